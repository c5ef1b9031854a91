//! Acceptance suite: one line per criterion with the measured values and
//! the tolerances they are judged against.
//!
//! Failing criteria are reported but do not fail `cargo test` unless
//! `VDWLAB_ACCEPTANCE_STRICT=1` is set.

use std::time::Instant;

use nalgebra::{DMatrix, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vdwlab_core::feshbach::{
    boosted_resolvent_norm, build_p, smoothstep, BoostWeight, FeshbachProblem, DEFAULT_CUTOFF_FRACTION,
};
use vdwlab_core::linalg::{self, LinearOperator};
use vdwlab_core::localization::{build_partition, ims_residual, stability_bound};
use vdwlab_core::spectral::{
    self, decomposition_levels, linear_fit, newton_screening_residual, AxialDensity, RadialOrbital,
};
use vdwlab_core::symmetry::{
    self, cluster_factor_projector, induced_types, irreps, norm_after_projection, subgroup_projector, InducedType,
};
use vdwlab_core::vdw::{
    self, c6_hydrogen_3d, c6_hydrogen_3d_sum_over_states, default_ion_table, interaction_sweep, necessity_experiment,
    property_e_numeric, property_e_table, rig_degenerate_ions, SweepOptions,
};
use vdwlab_core::{assemble_full, build_grid, enumerate_decompositions, Decomposition, SystemSpec};

type Outcome = Result<(bool, String), String>;
type Criterion = (&'static str, fn() -> Outcome);

fn fmt_err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// 100 random symmetric matrices with random `P`.
fn feshbach_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_energy: f64 = 0.0;
    let mut worst_vector: f64 = 0.0;
    let mut count_mismatch = 0;
    let mut fixed_points = 0;
    for trial in 0..100u64 {
        let n = rng.random_range(10..=50);
        let r = rng.random_range(1..=5);
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let h = (&a + a.transpose()) * 0.5;
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for k in 0..r {
            let mut v = linalg::random_vector(n, 1000 * trial + k as u64);
            linalg::orthogonalize_against(&mut v, &basis);
            linalg::orthogonalize_against(&mut v, &basis);
            linalg::normalize(&mut v);
            basis.push(v);
        }
        let problem = FeshbachProblem::new(&h, basis, None).map_err(fmt_err)?;
        let (eigs, _) = linalg::sorted_eigen(h.clone());
        let below: Vec<f64> = eigs
            .iter()
            .copied()
            .filter(|&e| e < problem.perp_bottom() - 1e-6)
            .collect();
        let fps = problem.all_fixed_points().map_err(fmt_err)?;
        if fps.len() != below.len() {
            count_mismatch += 1;
        }
        for fp in &fps {
            fixed_points += 1;
            let nearest = eigs.iter().map(|e| (fp.energy - e).abs()).fold(f64::INFINITY, f64::min);
            worst_energy = worst_energy.max(nearest);
            worst_vector = worst_vector.max(fp.eigen_residual);
        }
    }
    let pass = worst_energy < 1e-10 && worst_vector < 1e-8 && count_mismatch == 0;
    Ok((
        pass,
        format!(
            "{fixed_points} fixed points; max |λ - eig| = {worst_energy:.2e} (< 1e-10), max reconstruction residual = {worst_vector:.2e} (< 1e-8), count mismatches = {count_mismatch}"
        ),
    ))
}

/// 1D soft-Coulomb H-H sweep over [12, 24].
fn vdw_exponent() -> Outcome {
    let spec = SystemSpec::hydrogen_pair(12.0);
    let rs: Vec<f64> = (0..=6).map(|k| 12.0 + 2.0 * k as f64).collect();
    let rep = interaction_sweep(&spec, &rs, &SweepOptions::default()).map_err(fmt_err)?;
    let sigma = rep.sigma.ok_or("no sigma")?;
    let last = rep.points.last().ok_or("empty sweep")?;
    let w24 = last.w().ok_or("no W at R = 24")?;
    let scaled = last.r.powi(6) * w24.abs();
    let rel = (scaled - sigma).abs() / sigma;
    let (p, fit_text) = match (&rep.fit, &rep.fit_error) {
        (Some(f), _) => (f.exponent, format!("p = {:.3} (sign {:+})", f.exponent, f.sign)),
        (None, Some(e)) => (f64::NAN, format!("fit failed: {e}")),
        _ => (f64::NAN, "no fit".into()),
    };
    let pass = (p + 6.0).abs() <= 0.2 && rel <= 0.02;
    Ok((
        pass,
        format!(
            "{fit_text}, target -6 ± 0.2; R⁶|W(24)| = {scaled:.4} vs σ₁₂ = {sigma:.4} (rel {rel:.2e}, < 2e-2); W(24) = {w24:.3e}"
        ),
    ))
}

/// H-H C6 in the radial channel basis.
fn hydrogen_c6() -> Outcome {
    let y = Vector3::new(0.3, -0.4, 0.866);
    let c6 = c6_hydrogen_3d(1000, 40.0, &y, 1e-10).map_err(fmt_err)?.sigma;
    let sos = c6_hydrogen_3d_sum_over_states(1000, 40.0, &y).map_err(fmt_err)?;
    let rel_oracle = (c6 - sos).abs() / sos;
    let rel_ref = (c6 - 6.499).abs() / 6.499;
    Ok((
        rel_oracle < 0.01 && rel_ref < 0.01,
        format!("C6 = {c6:.4}, sum over states = {sos:.4} (rel {rel_oracle:.1e}, < 1e-2); vs 6.499 rel {rel_ref:.1e} (< 1e-2)"),
    ))
}

/// Newton screening for spherical and distorted densities.
fn newton_screening() -> Outcome {
    let ball = AxialDensity::spherical(3.0, |_| 1.0);
    let gauss = AxialDensity::spherical(4.0, |r| (-r * r).exp());
    let spec = SystemSpec::radial_hydrogen(2000, 40.0, 0).map_err(fmt_err)?;
    let h = assemble_full(&spec).map_err(fmt_err)?;
    let (_, v) = spectral::ground_state(&h, 1e-11).map_err(fmt_err)?;
    let orbital = RadialOrbital::from_eigenvector(spec.grid(), &v);
    let s1 = AxialDensity::from_orbital(&orbital);
    let mut spherical: f64 = 0.0;
    for (d, y) in [(&ball, 5.0), (&gauss, 10.0), (&s1, orbital.support() + 5.0)] {
        spherical = spherical.max(newton_screening_residual(d, y).map_err(fmt_err)?);
    }
    let distorted = AxialDensity {
        support: 4.0,
        rho: Box::new(|r, mu| (-r * r).exp() * (1.0 + 0.5 * mu)),
    };
    let control = newton_screening_residual(&distorted, 10.0).map_err(fmt_err)?;
    Ok((
        spherical < 1e-8 && control > 1e-4,
        format!("max spherical residual = {spherical:.2e} (< 1e-8); dipole-distorted control = {control:.2e} (> 1e-4)"),
    ))
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Projector algebra for N ≤ 4 and the norm formula.
fn symmetry_algebra() -> Outcome {
    let mut algebra: f64 = 0.0;
    let mut branching_ok = true;
    for n in 2..=4usize {
        let axis: usize = 3;
        let dim = axis.pow(n as u32);
        let types = irreps(n).map_err(fmt_err)?;
        let qs: Vec<_> = types
            .iter()
            .map(|t| symmetry::projector(t, axis))
            .collect::<Result<_, _>>()
            .map_err(fmt_err)?;
        for seed in 0..3 {
            let x = linalg::random_vector(dim, 100 * n as u64 + seed);
            let mut sum = vec![0.0; dim];
            let images: Vec<Vec<f64>> = qs.iter().map(|q| q.apply_vec(&x)).collect();
            for im in &images {
                linalg::axpy(1.0, im, &mut sum);
            }
            algebra = algebra.max(max_abs_diff(&sum, &x));
            for (i, q) in qs.iter().enumerate() {
                algebra = algebra.max(max_abs_diff(&q.apply_vec(&images[i]), &images[i]));
                for (j, im) in images.iter().enumerate() {
                    if i != j {
                        algebra = algebra.max(linalg::norm(&q.apply_vec(im)));
                    }
                }
            }
        }
        let charges: Vec<u32> = if n == 4 { vec![2, 2] } else { vec![n as u32 - 1, 1] };
        for a in enumerate_decompositions(n, &charges).map_err(fmt_err)? {
            for alpha in InducedType::all(&a) {
                let q = subgroup_projector(&a, &alpha, axis).map_err(fmt_err)?;
                let x = linalg::random_vector(dim, 7 + n as u64);
                let mut y = x.clone();
                for j in 0..a.clusters().len() {
                    y = cluster_factor_projector(&a, &alpha, j, axis)
                        .map_err(fmt_err)?
                        .apply_vec(&y);
                }
                algebra = algebra.max(max_abs_diff(&q.apply_vec(&x), &y));
            }
            for t in &types {
                let total: u64 = induced_types(t, &a)
                    .map_err(fmt_err)?
                    .iter()
                    .map(|b| b.multiplicity * b.alpha.dimension())
                    .sum();
                branching_ok &= total == t.dimension;
            }
        }
    }
    // Ψ = Q_a^α (f ⊗ g) with f on the left half of the grid for the two
    // electrons of nucleus 1 and g on the right half for nucleus 2.
    let axis: usize = 6;
    let a = Decomposition::from_clusters(&[vec![0, 1], vec![2]], &[2, 1]).map_err(fmt_err)?;
    let mut norm_err: f64 = 0.0;
    for alpha in InducedType::all(&a) {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut psi = vec![0.0; axis.pow(3)];
        for i in 0..3 {
            for j in 0..3 {
                for k in 3..6 {
                    psi[(i * axis + j) * axis + k] = rng.random_range(-1.0..1.0);
                }
            }
        }
        let psi = subgroup_projector(&a, &alpha, axis).map_err(fmt_err)?.apply_vec(&psi);
        for sigma in irreps(3).map_err(fmt_err)? {
            let c = norm_after_projection(&psi, &sigma, &a, &alpha, axis).map_err(fmt_err)?;
            norm_err = norm_err.max((c.computed - c.predicted).abs() / linalg::dot(&psi, &psi));
        }
    }
    Ok((
        algebra < 1e-12 && branching_ok && norm_err < 1e-8,
        format!(
            "completeness/idempotence/orthogonality/factorization max error = {algebra:.1e} (< 1e-12); branching dimensions {}; norm formula rel error = {norm_err:.1e} (< 1e-8)",
            if branching_ok { "match" } else { "MISMATCH" }
        ),
    ))
}

/// IMS identity and the 1/R² scaling of the localization error.
fn ims_identity() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut pts = Vec::new();
    for r in [10.0, 14.0, 20.0] {
        let spec = SystemSpec::hydrogen_pair(r);
        let a = enumerate_decompositions(2, &spec.charges()).map_err(fmt_err)?;
        let part = build_partition(&spec, &a, r).map_err(fmt_err)?;
        let h = assemble_full(&spec).map_err(fmt_err)?;
        let rep = ims_residual(&h, &part).map_err(fmt_err)?;
        worst = worst.max(rep.residual / rep.h_norm);
        pts.push((r.ln(), rep.localization_error.ln()));
    }
    let (slope, _) = linear_fit(&pts);
    Ok((
        worst < 1e-8 && (slope + 2.0).abs() <= 0.2,
        format!("max residual/‖H‖ = {worst:.1e} (< 1e-8); gradient-term slope = {slope:.3} (-2 ± 0.2)"),
    ))
}

fn stability_at(r: f64) -> Result<(bool, f64, f64), String> {
    let spec = SystemSpec::hydrogen_pair(r);
    let a = enumerate_decompositions(2, &spec.charges()).map_err(fmt_err)?;
    let levels = decomposition_levels(&spec, &a, 1e-10).map_err(fmt_err)?;
    let part = build_partition(&spec, &a, r).map_err(fmt_err)?;
    let p = build_p(&spec, DEFAULT_CUTOFF_FRACTION, None, 1e-10).map_err(fmt_err)?;
    let h = assemble_full(&spec).map_err(fmt_err)?;
    let rep = stability_bound(&spec, &h, &p.vectors(), None, &part, levels.e_inf, levels.gamma0).map_err(fmt_err)?;
    Ok((rep.passes, rep.measured, rep.threshold))
}

/// Deflated bottom of H⊥ against E(∞) + γ₀/2.
fn stability() -> Outcome {
    let (far, m14, t14) = stability_at(14.0)?;
    let (near, m3, t3) = stability_at(3.0)?;
    Ok((
        far && !near,
        format!(
            "R = 14: bottom {m14:.5} ≥ {t14:.5} {}; R = 3: bottom {m3:.5} vs {t3:.5} reported {}",
            if far { "holds" } else { "FAILS" },
            if near { "as holding" } else { "as failing" }
        ),
    ))
}

/// Numeric and table checks of Property (E).
fn property_e() -> Outcome {
    let grid = build_grid(201, (-25.0, 25.0)).map_err(fmt_err)?;
    let num = property_e_numeric(&grid, 1.0, 1, 1e-10).map_err(fmt_err)?;
    let l1 = &num.levels[1];
    let table = default_ion_table();
    let rep = property_e_table(&table, None);
    let h = rep
        .pairs
        .iter()
        .find(|p| p.donor == "H" && p.acceptor == "H")
        .ok_or("no H row")?;
    let pass = l1.margin > 0.0 && l1.margin >= l1.repulsion && rep.property_e_prime && h.holds;
    Ok((
        pass,
        format!(
            "E(1) - 2E(0) = {:.5} > 0 (≥ ⟨repulsion⟩ = {:.5}); table (E') holds for {} ordered pairs of {} complete rows; H: {} > {}",
            l1.margin,
            l1.repulsion,
            rep.pairs.iter().filter(|p| p.holds).count(),
            rep.complete.len(),
            h.ionization,
            h.affinity
        ),
    ))
}

/// Rigged degenerate-ion system.
fn necessity() -> Outcome {
    let grid = build_grid(201, (-25.0, 25.0)).map_err(fmt_err)?;
    let rig = rig_degenerate_ions(&grid, 12.0, 1e-10).map_err(fmt_err)?;
    let rs: Vec<f64> = (0..=6).map(|k| 12.0 + 2.0 * k as f64).collect();
    let rep = necessity_experiment(
        &rig.spec,
        &rs,
        vdw::DEFAULT_WINDOW,
        Some(20.0),
        DEFAULT_CUTOFF_FRACTION,
        1e-10,
    )
    .map_err(fmt_err)?;
    let fit = rep
        .sweep
        .fit
        .ok_or_else(|| rep.sweep.fit_error.clone().unwrap_or_default())?;
    let tail = rep.tail.ok_or("no tail")?;
    Ok((
        (fit.exponent + 1.0).abs() <= 0.2 && tail.relative_error <= 0.05,
        format!(
            "s_B = {:.5}; p = {:.3} (-1 ± 0.2); PHP diagonal at R = 20 {:.5e} vs q²/R {:.5e} (rel {:.1e}, < 5e-2)",
            rig.strength, fit.exponent, tail.diagonal, tail.coulomb, tail.relative_error
        ),
    ))
}

/// Boosted resolvent at δ = 0 and δ = 0.1.
fn boosted_resolvent() -> Outcome {
    let spec = SystemSpec::hydrogen_pair_on(10.0, build_grid(81, (-16.0, 16.0)).map_err(fmt_err)?);
    let h = assemble_full(&spec).map_err(fmt_err)?;
    let p = build_p(&spec, DEFAULT_CUTOFF_FRACTION, None, 1e-10).map_err(fmt_err)?;
    let problem = FeshbachProblem::new(&h, p.active(), None).map_err(fmt_err)?;
    let energy = problem.solve_fixed_point(-1.3).map_err(fmt_err)?.energy;
    let exact = (1.0 / (problem.perp_bottom() - energy)).max(-1.0 / energy);
    let ys: Vec<f64> = spec.nuclei.iter().map(|n| n.position[0]).collect();
    let inner = p.cutoff_radius + p.transition_width;
    // Flat on the supports of P and saturated before the midpoint, where
    // the distance to the nearest nucleus has a kink.
    let phi = |x: &[f64]| -> f64 {
        x.iter()
            .map(|xi| {
                let d = ys.iter().map(|y| (xi - y).abs()).fold(f64::INFINITY, f64::min);
                2.0 * smoothstep((d - inner) / 2.5)
            })
            .sum()
    };
    let weight = BoostWeight::sample(&h, phi);
    let zero = boosted_resolvent_norm(&problem, &weight, 0.0, energy, 1)
        .map_err(fmt_err)?
        .norm;
    let boosted = boosted_resolvent_norm(&problem, &weight, 0.1, energy, 1)
        .map_err(fmt_err)?
        .norm;
    let rel = (zero - exact).abs() / exact;
    Ok((
        rel < 1e-6 && boosted <= 3.0 * zero,
        format!(
            "δ = 0: {zero:.6} vs 1/dist = {exact:.6} (rel {rel:.1e}, < 1e-6); δ = 0.1: {boosted:.6} ({:.3}×, ≤ 3×)",
            boosted / zero
        ),
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("Feshbach equivalence", feshbach_equivalence),
        ("van der Waals exponent", vdw_exponent),
        ("H-H C6 in 3D", hydrogen_c6),
        ("Newton screening", newton_screening),
        ("symmetry algebra", symmetry_algebra),
        ("IMS identity", ims_identity),
        ("stability bound", stability),
        ("Property (E)", property_e),
        ("necessity of (E)", necessity),
        ("boosted resolvent", boosted_resolvent),
    ];
    let strict = std::env::var("VDWLAB_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let mut passed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (ok, detail) = match check() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        passed += ok as usize;
        println!(
            "criterion {:>2} {} {name}: {detail} [{:.1} s]",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {passed}/{} criteria pass", criteria.len());
    if strict && passed < criteria.len() {
        std::process::exit(1);
    }
}
