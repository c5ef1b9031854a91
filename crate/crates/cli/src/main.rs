use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use vdwlab_cli::{list_scenarios, run, RunError, RunOptions, RunReport, ScenarioConfig};

#[derive(Parser)]
#[command(name = "vdwlab", version, about = "Van der Waals numerical laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Abort at the first failing check.
    #[arg(long, global = true)]
    strict: bool,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed (overrides `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Ionization table CSV (overrides `property_e.ion_table`).
    #[arg(long, global = true)]
    ion_table: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a TOML config.
    Run { config: PathBuf },
    /// List the scenarios; with `--defaults` print each default config.
    List {
        #[arg(long)]
        defaults: bool,
    },
}

fn print_checks(report: &RunReport) {
    for c in &report.checks {
        println!(
            "{} {}: {:.6e} ({}){}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.measured,
            c.tolerance,
            if c.detail.is_empty() {
                String::new()
            } else {
                format!(" {}", c.detail)
            }
        );
    }
}

fn main() -> Result<ExitCode> {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match cli.command {
        Command::List { defaults } => {
            for entry in list_scenarios() {
                println!("{:<16} {}", entry.scenario.name(), entry.description);
                if defaults {
                    println!("{}", entry.default_config.to_toml());
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Run { config } => {
            let mut cfg = ScenarioConfig::load(&config)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            if let Some(t) = cli.ion_table {
                cfg.property_e.ion_table = Some(t);
            }
            if let Some(o) = cli.out {
                cfg.output.dir = o;
            }
            cfg.validate()?;
            let opts = RunOptions {
                out_dir: cfg.output.dir.clone(),
                strict: cli.strict,
            };
            match run(&cfg, &opts) {
                Ok(report) => {
                    print_checks(&report);
                    println!("report: {}", opts.out_dir.join("report.json").display());
                    Ok(if report.passed() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::FAILURE
                    })
                }
                Err(RunError::Strict { check, report }) => {
                    print_checks(&report);
                    eprintln!("strict mode: stopped at failing check `{check}`");
                    Ok(ExitCode::FAILURE)
                }
                Err(e) => Err(e.into()),
            }
        }
    }
}
