//! Scenario runners. Each one computes, writes its CSV artifacts and
//! records checks; nothing here draws conclusions beyond the checks.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{DMatrix, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use vdwlab_core::feshbach::{build_p, FeshbachProblem};
use vdwlab_core::linalg;
use vdwlab_core::localization::{build_partition, ims_residual, stability_bound};
use vdwlab_core::spectral::{self, decomposition_levels, linear_fit};
use vdwlab_core::symmetry::{self, cluster_factor_projector, induced_types, irreps, subgroup_projector, InducedType};
use vdwlab_core::vdw::{self, SweepOptions};
use vdwlab_core::{assemble_full, enumerate_decompositions, LinearOperator};

use crate::config::{Scenario, ScenarioConfig};
use crate::report::{CheckResult, RunReport};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error(transparent)]
    Compute(#[from] vdwlab_core::Error),
    #[error("cannot write {path}: {source}")]
    Output { path: PathBuf, source: std::io::Error },
    #[error("check `{check}` failed in strict mode")]
    Strict { check: String, report: Box<RunReport> },
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Abort at the first failing check.
    pub strict: bool,
}

struct Run<'a> {
    cfg: &'a ScenarioConfig,
    opts: &'a RunOptions,
    report: RunReport,
}

impl Run<'_> {
    fn check(&mut self, c: CheckResult) -> Result<(), RunError> {
        let failed = !c.passed;
        let name = c.name.clone();
        self.report.checks.push(c);
        if failed && self.opts.strict {
            return Err(RunError::Strict {
                check: name,
                report: Box::new(self.report.clone()),
            });
        }
        Ok(())
    }

    fn artifact(&mut self, name: &str) -> Result<BufWriter<File>, RunError> {
        let path = self.opts.out_dir.join(name);
        let f = File::create(&path).map_err(|source| RunError::Output { path, source })?;
        self.report.artifacts.push(name.to_string());
        Ok(BufWriter::new(f))
    }
}

fn csv_writer<W: std::io::Write>(w: W) -> csv::Writer<W> {
    csv::Writer::from_writer(w)
}

fn io_err(path: &Path) -> impl Fn(csv::Error) -> RunError + '_ {
    move |e| RunError::Output {
        path: path.to_owned(),
        source: std::io::Error::other(e),
    }
}

fn e(x: f64) -> String {
    format!("{x:.12e}")
}

/// Validates the config, creates the output directory and runs the
/// scenario. Deterministic for a given config.
pub fn run(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<RunReport, RunError> {
    cfg.validate()?;
    std::fs::create_dir_all(&opts.out_dir).map_err(|source| RunError::Output {
        path: opts.out_dir.clone(),
        source,
    })?;
    let start = Instant::now();
    let mut run = Run {
        cfg,
        opts,
        report: RunReport::new(cfg),
    };
    let outcome = match cfg.scenario {
        Scenario::Sweep => sweep(&mut run),
        Scenario::C6 => c6(&mut run),
        Scenario::FeshbachCheck => feshbach_check(&mut run),
        Scenario::SymmetryCheck => symmetry_check(&mut run),
        Scenario::ImsCheck => ims_check(&mut run),
        Scenario::StabilityCheck => stability_check(&mut run),
        Scenario::PropertyE => property_e(&mut run),
        Scenario::Necessity => necessity(&mut run),
        Scenario::BoCorrection => bo_correction(&mut run),
    };
    let path = opts.out_dir.join("report.json");
    let write = |report: &mut RunReport| {
        report.elapsed_seconds = start.elapsed().as_secs_f64();
        std::fs::write(&path, report.to_json()).map_err(|source| RunError::Output {
            path: path.clone(),
            source,
        })
    };
    match outcome {
        Ok(()) => {
            write(&mut run.report)?;
            Ok(run.report)
        }
        Err(RunError::Strict { check, mut report }) => {
            write(&mut report)?;
            Err(RunError::Strict { check, report })
        }
        Err(err) => Err(err),
    }
}

fn sweep(run: &mut Run) -> Result<(), RunError> {
    let cfg = run.cfg;
    let w = &cfg.sweep;
    let spec = cfg.system.spec_at(w.r_min)?;
    let opts = SweepOptions {
        method: w.method,
        cutoff_fraction: cfg.numerics.cutoff_fraction,
        symmetry: cfg.numerics.symmetry_type()?,
        tol: cfg.numerics.tol,
        with_c6: true,
        window: (w.window[0], w.window[1]),
    };
    let rep = vdw::interaction_sweep(&spec, &w.separations(), &opts)?;
    let path = run.opts.out_dir.join("sweep.csv");
    rep.write_csv(run.artifact("sweep.csv")?)
        .map_err(|err| RunError::Output {
            path,
            source: std::io::Error::other(err.to_string()),
        })?;
    let sigma = rep.sigma.expect("sweep computes sigma");
    match &rep.fit {
        Some(f) => run.check(
            CheckResult::in_range("fitted exponent", f.exponent, w.exponent_range[0], w.exponent_range[1]).with_detail(
                format!(
                    "sign {:+}, C = {:.4e}, log residual {:.2e}",
                    f.sign, f.coefficient, f.residual
                ),
            ),
        )?,
        None => run.check(
            CheckResult::new("fitted exponent", false, f64::NAN, "fit succeeds")
                .with_detail(rep.fit_error.clone().unwrap_or_default()),
        )?,
    }
    if let Some(last) = rep.points.last().filter(|p| p.w().is_some()) {
        let scaled = last.r.powi(6) * last.w().unwrap_or(f64::NAN).abs();
        let rel = (scaled - sigma).abs() / sigma;
        run.check(
            CheckResult::new(
                "R^6 |W(r_max)| vs sigma_12",
                rel <= w.sigma_tolerance,
                rel,
                format!("<= {}", w.sigma_tolerance),
            )
            .with_detail(format!("R^6|W| = {scaled:.6}, sigma = {sigma:.6}")),
        )?;
    }
    if w.method == vdw::Method::Both {
        let gap = rep
            .points
            .iter()
            .filter_map(|p| Some((p.w_direct? - p.w_feshbach?).abs()))
            .fold(0.0, f64::max);
        run.check(CheckResult::below(
            "direct vs Feshbach |dW|",
            gap,
            1e3 * cfg.numerics.tol,
        ))?;
    }
    let u_scaled: Vec<f64> = rep
        .points
        .iter()
        .filter_map(|p| Some(p.u_norm? * p.r.powi(6)))
        .collect();
    run.report.data = json!({
        "sigma_12": sigma,
        "fit": rep.fit,
        "points": rep.points,
        "u_norm_times_r6": u_scaled,
    });
    Ok(())
}

fn c6(run: &mut Run) -> Result<(), RunError> {
    let cfg = run.cfg;
    let c = &cfg.c6;
    let spec = cfg.system.spec_at(cfg.system.separation)?;
    let line = vdw::c6_coefficient(&spec, (0, 1), cfg.numerics.tol)?;
    let line_sos = if cfg.system.charges == [1, 1] {
        Some(vdw::c6_sum_over_states(&spec, (0, 1))?)
    } else {
        None
    };
    let y = Vector3::from(c.direction);
    let space = vdw::c6_hydrogen_3d(c.radial_points, c.radial_extent, &y, cfg.numerics.tol)?;
    let space_sos = vdw::c6_hydrogen_3d_sum_over_states(c.radial_points, c.radial_extent, &y)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut angular_spread: f64 = 0.0;
    for _ in 0..5 {
        let d = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        angular_spread = angular_spread.max((vdw::angular_factor(&d)? - 6.0 / 9.0).abs());
    }
    let path = run.opts.out_dir.join("c6.csv");
    let mut wtr = csv_writer(run.artifact("c6.csv")?);
    wtr.write_record(["model", "linear_solve", "sum_over_states"])
        .map_err(io_err(&path))?;
    wtr.write_record(["line", &e(line.sigma), &line_sos.map(e).unwrap_or_default()])
        .map_err(io_err(&path))?;
    wtr.write_record(["radial_3d", &e(space.sigma), &e(space_sos)])
        .map_err(io_err(&path))?;
    wtr.flush().map_err(|source| RunError::Output {
        path: path.clone(),
        source,
    })?;
    run.check(CheckResult::new(
        "sigma_12 > 0 (line)",
        line.sigma > 0.0,
        line.sigma,
        "> 0",
    ))?;
    if let Some(s) = line_sos {
        run.check(CheckResult::below(
            "line sigma vs sum over states (rel)",
            (line.sigma - s).abs() / s,
            1e-6,
        ))?;
    }
    run.check(CheckResult::below(
        "3D C6 vs sum over states (rel)",
        (space.sigma - space_sos).abs() / space_sos,
        c.tolerance,
    ))?;
    run.check(CheckResult::below(
        "angular factor rotation invariance",
        angular_spread,
        1e-12,
    ))?;
    run.report.data = json!({
        "line": line,
        "line_sum_over_states": line_sos,
        "radial_3d": space,
        "radial_3d_sum_over_states": space_sos,
    });
    Ok(())
}

fn feshbach_check(run: &mut Run) -> Result<(), RunError> {
    let cfg = run.cfg;
    let f = &cfg.feshbach;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let path = run.opts.out_dir.join("feshbach.csv");
    let mut wtr = csv_writer(run.artifact("feshbach.csv")?);
    wtr.write_record([
        "trial",
        "dim",
        "rank",
        "branch",
        "energy",
        "eigenvalue_error",
        "reconstruction_residual",
    ])
    .map_err(io_err(&path))?;
    let (mut worst_e, mut worst_r, mut mismatches): (f64, f64, usize) = (0.0, 0.0, 0);
    for trial in 0..f.trials {
        let n = rng.random_range(f.max_rank + 1..=f.max_dim);
        let r = rng.random_range(1..=f.max_rank);
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let h = (&a + a.transpose()) * 0.5;
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for _ in 0..r {
            let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            linalg::orthogonalize_against(&mut v, &basis);
            linalg::orthogonalize_against(&mut v, &basis);
            linalg::normalize(&mut v);
            basis.push(v);
        }
        let problem = FeshbachProblem::new(&h, basis, None)?;
        let (eigs, _) = linalg::sorted_eigen(h.clone());
        let below = eigs.iter().filter(|&&x| x < problem.perp_bottom() - 1e-6).count();
        let fps = problem.all_fixed_points()?;
        mismatches += (fps.len() != below) as usize;
        for fp in &fps {
            let err = eigs.iter().map(|x| (fp.energy - x).abs()).fold(f64::INFINITY, f64::min);
            worst_e = worst_e.max(err);
            worst_r = worst_r.max(fp.eigen_residual);
            wtr.write_record([
                trial.to_string(),
                n.to_string(),
                r.to_string(),
                fp.branch.to_string(),
                e(fp.energy),
                format!("{err:.3e}"),
                format!("{:.3e}", fp.eigen_residual),
            ])
            .map_err(io_err(&path))?;
        }
    }
    wtr.flush().map_err(|source| RunError::Output {
        path: path.clone(),
        source,
    })?;
    run.check(CheckResult::below(
        "max |fixed point - eigenvalue|",
        worst_e,
        f.energy_tolerance,
    ))?;
    run.check(CheckResult::below(
        "max reconstruction residual",
        worst_r,
        f.residual_tolerance,
    ))?;
    run.check(CheckResult::new(
        "fixed-point counts match",
        mismatches == 0,
        mismatches as f64,
        "= 0",
    ))?;

    let spec = cfg.system.spec_at(cfg.system.separation)?;
    let sigma = cfg.numerics.symmetry_type()?;
    let h = assemble_full(&spec)?;
    let p = build_p(&spec, cfg.numerics.cutoff_fraction, sigma.as_ref(), cfg.numerics.tol)?;
    let q = sigma
        .as_ref()
        .map(|t| symmetry::projector(t, spec.grid().len()))
        .transpose()?;
    let problem = FeshbachProblem::new(&h, p.active(), q.as_ref())?;
    let levels = decomposition_levels(
        &spec,
        &enumerate_decompositions(spec.electrons, &spec.charges())?,
        cfg.numerics.tol,
    )?;
    let fp = problem.solve_fixed_point(levels.e_inf)?;
    let restrict = |v: &mut [f64]| {
        if let Some(q) = &q {
            q.apply_in_place(v)
        }
    };
    let direct = spectral::low_spectrum_with(
        &h,
        &spectral::SpectralOptions {
            k: 1,
            tol: cfg.numerics.tol,
            seed: cfg.seed,
            restrict: Some(&restrict),
        },
    )?;
    let diff = (fp.energy - direct.eigenvalues[0]).abs();
    run.check(
        CheckResult::below("two-atom fixed point vs direct ground energy", diff, 1e-7).with_detail(format!(
            "fixed point {:.12}, direct {:.12}",
            fp.energy, direct.eigenvalues[0]
        )),
    )?;
    run.report.data = json!({
        "max_energy_error": worst_e,
        "max_residual": worst_r,
        "two_atom": { "fixed_point": fp, "direct": direct.eigenvalues[0], "perp_bottom": problem.perp_bottom() },
    });
    Ok(())
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn symmetry_check(run: &mut Run) -> Result<(), RunError> {
    let cfg = run.cfg;
    let s = &cfg.symmetry;
    let axis = s.axis;
    let mut rows = Vec::new();
    for n in 2..=s.max_order {
        let dim = axis.pow(n as u32);
        let types = irreps(n)?;
        let qs = types
            .iter()
            .map(|t| symmetry::projector(t, axis))
            .collect::<Result<Vec<_>, _>>()?;
        let x = linalg::random_vector(dim, cfg.seed + n as u64);
        let images: Vec<Vec<f64>> = qs.iter().map(|q| q.apply_vec(&x)).collect();
        let mut sum = vec![0.0; dim];
        images.iter().for_each(|im| linalg::axpy(1.0, im, &mut sum));
        let completeness = max_abs_diff(&sum, &x);
        let mut idempotence: f64 = 0.0;
        let mut orthogonality: f64 = 0.0;
        for (i, q) in qs.iter().enumerate() {
            idempotence = idempotence.max(max_abs_diff(&q.apply_vec(&images[i]), &images[i]));
            for (j, im) in images.iter().enumerate() {
                if i != j {
                    orthogonality = orthogonality.max(linalg::norm(&q.apply_vec(im)));
                }
            }
        }
        let charges: Vec<u32> = vec![(n - n / 2) as u32, (n / 2) as u32];
        let mut factorization: f64 = 0.0;
        let mut branching = true;
        for a in enumerate_decompositions(n, &charges)? {
            for alpha in InducedType::all(&a) {
                let q = subgroup_projector(&a, &alpha, axis)?;
                let mut y = x.clone();
                for j in 0..a.clusters().len() {
                    y = cluster_factor_projector(&a, &alpha, j, axis)?.apply_vec(&y);
                }
                factorization = factorization.max(max_abs_diff(&q.apply_vec(&x), &y));
            }
            for t in &types {
                let total: u64 = induced_types(t, &a)?
                    .iter()
                    .map(|b| b.multiplicity * b.alpha.dimension())
                    .sum();
                branching &= total == t.dimension;
            }
        }
        for (name, v) in [
            ("completeness", completeness),
            ("idempotence", idempotence),
            ("orthogonality", orthogonality),
            ("factorization", factorization),
        ] {
            rows.push((n, name, v));
            run.check(CheckResult::below(format!("N = {n}: {name}"), v, s.tolerance))?;
        }
        run.check(CheckResult::new(
            format!("N = {n}: branching dimensions"),
            branching,
            branching as u8 as f64,
            "= 1",
        ))?;
        let path = run.opts.out_dir.join(format!("characters_s{n}.csv"));
        let w = run.artifact(&format!("characters_s{n}.csv"))?;
        symmetry::write_character_table(n, w).map_err(|err| RunError::Output {
            path,
            source: std::io::Error::other(err.to_string()),
        })?;
    }
    let path = run.opts.out_dir.join("symmetry.csv");
    let mut wtr = csv_writer(run.artifact("symmetry.csv")?);
    wtr.write_record(["order", "identity", "max_error"])
        .map_err(io_err(&path))?;
    for (n, name, v) in &rows {
        wtr.write_record([n.to_string(), name.to_string(), format!("{v:.3e}")])
            .map_err(io_err(&path))?;
    }
    wtr.flush().map_err(|source| RunError::Output {
        path: path.clone(),
        source,
    })?;
    Ok(())
}

fn ims_check(run: &mut Run) -> Result<(), RunError> {
    let cfg = run.cfg;
    let l = &cfg.localization;
    let path = run.opts.out_dir.join("ims.csv");
    let mut wtr = csv_writer(run.artifact("ims.csv")?);
    wtr.write_record(["R", "residual", "h_norm", "localization_error", "localization_constant"])
        .map_err(io_err(&path))?;
    let mut pts = Vec::new();
    for &r in &l.r_values {
        let spec = cfg.system.spec_at(r)?;
        let a = enumerate_decompositions(spec.electrons, &spec.charges())?;
        let part = build_partition(&spec, &a, r)?;
        let h = assemble_full(&spec)?;
        let rep = ims_residual(&h, &part)?;
        wtr.write_record([
            r.to_string(),
            format!("{:.3e}", rep.residual),
            e(rep.h_norm),
            e(rep.localization_error),
            e(rep.localization_constant),
        ])
        .map_err(io_err(&path))?;
        run.check(CheckResult::below(
            format!("R = {r}: IMS residual / |H|"),
            rep.residual / rep.h_norm,
            l.ims_tolerance,
        ))?;
        pts.push((r.ln(), rep.localization_error.ln()));
    }
    wtr.flush().map_err(|source| RunError::Output {
        path: path.clone(),
        source,
    })?;
    let (slope, _) = linear_fit(&pts);
    run.check(CheckResult::in_range(
        "gradient-term slope",
        slope,
        -2.0 - l.slope_tolerance,
        -2.0 + l.slope_tolerance,
    ))?;
    Ok(())
}

fn stability_check(run: &mut Run) -> Result<(), RunError> {
    let cfg = run.cfg;
    let sigma = cfg.numerics.symmetry_type()?;
    let path = run.opts.out_dir.join("stability.csv");
    let mut wtr = csv_writer(run.artifact("stability.csv")?);
    wtr.write_record(["R", "bottom", "threshold", "e_inf", "gamma0", "passes"])
        .map_err(io_err(&path))?;
    let mut rows = Vec::new();
    for &r in &cfg.localization.r_values {
        let spec = cfg.system.spec_at(r)?;
        let a = enumerate_decompositions(spec.electrons, &spec.charges())?;
        let levels = decomposition_levels(&spec, &a, cfg.numerics.tol)?;
        let part = build_partition(&spec, &a, r)?;
        let p = build_p(&spec, cfg.numerics.cutoff_fraction, sigma.as_ref(), cfg.numerics.tol)?;
        let h = assemble_full(&spec)?;
        let q = sigma
            .as_ref()
            .map(|t| symmetry::projector(t, spec.grid().len()))
            .transpose()?;
        let rep = stability_bound(&spec, &h, &p.active(), q.as_ref(), &part, levels.e_inf, levels.gamma0)?;
        wtr.write_record([
            r.to_string(),
            e(rep.measured),
            e(rep.threshold),
            e(levels.e_inf),
            e(levels.gamma0),
            rep.passes.to_string(),
        ])
        .map_err(io_err(&path))?;
        rows.push(json!({ "r": r, "report": rep, "levels": levels }));
        run.check(CheckResult::new(
            format!("R = {r}: bottom of H_perp >= E(inf) + gamma0/2"),
            rep.passes,
            rep.measured,
            format!(">= {:.6}", rep.threshold),
        ))?;
    }
    wtr.flush().map_err(|source| RunError::Output {
        path: path.clone(),
        source,
    })?;
    run.report.data = json!(rows);
    Ok(())
}

fn property_e(run: &mut Run) -> Result<(), RunError> {
    let cfg = run.cfg;
    let p = &cfg.property_e;
    let grid = cfg.system.grid()?;
    let num = vdw::property_e_numeric(&grid, p.strength, p.max_extra, cfg.numerics.tol)?;
    for l in num.levels.iter().skip(1) {
        run.check(CheckResult::new(
            format!("E({}) - {}E(0) > 0", l.extra, l.extra + 1),
            l.margin > 0.0 && l.margin >= l.repulsion,
            l.margin,
            format!(">= repulsion {:.6} > 0", l.repulsion),
        ))?;
    }
    for c in &num.e_prime {
        run.check(CheckResult::new(
            format!("(E') m = {}, n = {}, l = {}", c.m, c.n, c.l),
            c.holds,
            c.rhs - c.lhs,
            "> 0",
        ))?;
    }
    let table = match &p.ion_table {
        Some(path) => vdw::load_ion_table(path)?,
        None => vdw::default_ion_table(),
    };
    let rep = vdw::property_e_table(&table, p.elements.as_deref());
    let path = run.opts.out_dir.join("property_e_pairs.csv");
    let mut wtr = csv_writer(run.artifact("property_e_pairs.csv")?);
    wtr.write_record([
        "donor",
        "acceptor",
        "ionization_kcal",
        "affinity_kcal",
        "margin_kcal",
        "margin_hartree",
        "holds",
        "estimated",
    ])
    .map_err(io_err(&path))?;
    for pc in &rep.pairs {
        wtr.write_record([
            pc.donor.clone(),
            pc.acceptor.clone(),
            pc.ionization.to_string(),
            pc.affinity.to_string(),
            format!("{:.1}", pc.margin),
            format!("{:.6}", pc.margin / vdw::KCAL_PER_HARTREE),
            pc.holds.to_string(),
            pc.estimated.to_string(),
        ])
        .map_err(io_err(&path))?;
    }
    wtr.flush().map_err(|source| RunError::Output {
        path: path.clone(),
        source,
    })?;
    let min_margin = rep.pairs.iter().map(|x| x.margin).fold(f64::INFINITY, f64::min);
    run.check(
        CheckResult::new(
            "table (E') on complete rows",
            rep.property_e_prime,
            min_margin,
            "min margin > 0 kcal/mol",
        )
        .with_detail(format!(
            "{} rows, {} ordered pairs",
            rep.complete.len(),
            rep.pairs.len()
        )),
    )?;
    run.report.data = json!({ "numeric": num, "table_notices": rep.notices, "complete_rows": rep.complete });
    Ok(())
}

fn necessity(run: &mut Run) -> Result<(), RunError> {
    let cfg = run.cfg;
    let w = &cfg.sweep;
    let n = &cfg.necessity;
    let grid = cfg.system.grid()?;
    let rig = vdw::rig_degenerate_ions(&grid, w.r_min, cfg.numerics.tol)?;
    let rep = vdw::necessity_experiment(
        &rig.spec,
        &w.separations(),
        (w.window[0], w.window[1]),
        Some(n.tail_r),
        cfg.numerics.cutoff_fraction,
        cfg.numerics.tol,
    )?;
    let path = run.opts.out_dir.join("necessity.csv");
    rep.sweep
        .write_csv(run.artifact("necessity.csv")?)
        .map_err(|err| RunError::Output {
            path,
            source: std::io::Error::other(err.to_string()),
        })?;
    match &rep.sweep.fit {
        Some(f) => run.check(CheckResult::in_range(
            "fitted exponent",
            f.exponent,
            n.exponent_range[0],
            n.exponent_range[1],
        ))?,
        None => run.check(
            CheckResult::new("fitted exponent", false, f64::NAN, "fit succeeds")
                .with_detail(rep.sweep.fit_error.clone().unwrap_or_default()),
        )?,
    }
    if let Some(t) = &rep.tail {
        run.check(
            CheckResult::new(
                format!("PHP Coulomb tail at R = {}", t.r),
                t.relative_error <= n.tail_tolerance,
                t.relative_error,
                format!("<= {}", n.tail_tolerance),
            )
            .with_detail(format!("diagonal {:.6e}, q_i q_j / R {:.6e}", t.diagonal, t.coulomb)),
        )?;
    }
    run.report.data = json!({ "rigged_strength": rig.strength, "affinity": rig.affinity, "tie_gap": rig.tie_gap, "gamma2": rep.gamma2, "fit": rep.sweep.fit, "tail": rep.tail });
    Ok(())
}

fn bo_correction(run: &mut Run) -> Result<(), RunError> {
    let cfg = run.cfg;
    let b = &cfg.bo;
    let spec = cfg.system.spec_at(cfg.system.separation)?;
    let sigma = b
        .symmetry
        .clone()
        .map(vdwlab_core::symmetry::SymmetryType::from_diagram)
        .transpose()?;
    let rep = vdw::bo_interaction(&spec, &b.masses, b.step, sigma.as_ref(), cfg.numerics.tol)?;
    let path = run.opts.out_dir.join("bo_correction.csv");
    let mut wtr = csv_writer(run.artifact("bo_correction.csv")?);
    wtr.write_record(["R", "total", "atomic_sum", "interaction", "W", "ratio"])
        .map_err(io_err(&path))?;
    wtr.write_record([
        cfg.system.separation.to_string(),
        e(rep.molecule.total),
        e(rep.atomic.iter().sum()),
        e(rep.interaction),
        e(rep.w),
        format!("{:.6e}", rep.ratio),
    ])
    .map_err(io_err(&path))?;
    wtr.flush().map_err(|source| RunError::Output {
        path: path.clone(),
        source,
    })?;
    run.check(CheckResult::new(
        "correction >= 0",
        rep.molecule.total >= 0.0,
        rep.molecule.total,
        ">= 0",
    ))?;
    run.check(CheckResult::below("|interaction part| / |W|", rep.ratio, b.max_ratio))?;
    run.report.data = json!(rep);
    Ok(())
}

/// One catalog entry of [`list_scenarios`].
#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub scenario: Scenario,
    pub description: &'static str,
    pub default_config: ScenarioConfig,
}

/// Every scenario with its description and default configuration, in a
/// fixed order.
pub fn list_scenarios() -> Vec<CatalogEntry> {
    Scenario::ALL
        .iter()
        .map(|&s| CatalogEntry {
            scenario: s,
            description: s.description(),
            default_config: ScenarioConfig::default_for(s),
        })
        .collect()
}
