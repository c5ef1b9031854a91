//! Low-lying spectra, decay and density diagnostics, Newton screening and
//! the spectral gaps of the cluster decompositions.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{composite_gauss, gauss_legendre, Grid};
use crate::linalg::{self, LanczosOptions, LinearOperator, Restriction};
use crate::manybody::{assemble_ion, Decomposition, SystemSpec};

/// Below this dimension unrestricted problems are diagonalized densely.
pub const DENSE_LIMIT: usize = 2000;

/// Default residual tolerance relative to `‖H‖₁`.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Eigenvalues closer than this are reported as one degenerate block.
pub const DEGENERACY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralResult {
    pub eigenvalues: Vec<f64>,
    #[serde(skip)]
    pub eigenvectors: Vec<Vec<f64>>,
    /// `E₁ - E₀` when at least two levels were requested.
    pub gap: Option<f64>,
    pub residuals: Vec<f64>,
}

impl SpectralResult {
    /// Index ranges of eigenvalues equal within [`DEGENERACY_TOL`].
    pub fn blocks(&self) -> Vec<std::ops::Range<usize>> {
        let mut out = Vec::new();
        let mut start = 0;
        for i in 1..=self.eigenvalues.len() {
            if i == self.eigenvalues.len() || (self.eigenvalues[i] - self.eigenvalues[i - 1]).abs() > DEGENERACY_TOL {
                out.push(start..i);
                start = i;
            }
        }
        out
    }

    /// Writes `index,energy,residual` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["index", "energy", "residual"])?;
        for (i, (e, r)) in self.eigenvalues.iter().zip(&self.residuals).enumerate() {
            wtr.write_record([i.to_string(), format!("{e:.15e}"), format!("{r:.3e}")])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

#[derive(Clone, Copy)]
pub struct SpectralOptions<'a> {
    pub k: usize,
    pub tol: f64,
    pub seed: u64,
    pub restrict: Option<Restriction<'a>>,
}

impl Default for SpectralOptions<'_> {
    fn default() -> Self {
        Self {
            k: 1,
            tol: DEFAULT_TOL,
            seed: 0,
            restrict: None,
        }
    }
}

/// The `k` lowest eigenpairs with residual certificates.
pub fn low_spectrum(op: &dyn LinearOperator, k: usize, tol: f64) -> Result<SpectralResult> {
    low_spectrum_with(
        op,
        &SpectralOptions {
            k,
            tol,
            ..Default::default()
        },
    )
}

pub fn low_spectrum_with(op: &dyn LinearOperator, opts: &SpectralOptions) -> Result<SpectralResult> {
    let k = opts.k.max(1);
    let n = op.dim();
    if k > n {
        return Err(Error::InvalidSystem(format!(
            "asked for {k} levels of a {n}-dimensional operator"
        )));
    }
    let (values, vectors) = if n < DENSE_LIMIT && opts.restrict.is_none() {
        let (vals, vecs) = linalg::sorted_eigen(linalg::to_dense(op));
        let vectors = (0..k).map(|i| vecs.column(i).iter().copied().collect()).collect();
        (vals[..k].to_vec(), vectors)
    } else {
        let lopts = LanczosOptions {
            k,
            tol: opts.tol,
            subspace: (2 * k + 30).max(40),
            max_restarts: 2000,
            seed: opts.seed,
        };
        let res = linalg::lanczos_lowest(op, &lopts, opts.restrict)?;
        (res.values, res.vectors)
    };
    let mut residuals = Vec::with_capacity(k);
    let mut w = vec![0.0; n];
    for (v, &lam) in vectors.iter().zip(&values) {
        op.apply(v, &mut w);
        linalg::axpy(-lam, v, &mut w);
        if let Some(restrict) = opts.restrict {
            restrict(&mut w);
        }
        residuals.push(linalg::norm(&w));
    }
    let limit = opts.tol * op.norm_estimate() * 10.0;
    if let Some(worst) = residuals.iter().cloned().reduce(f64::max) {
        if worst > limit.max(1e-10) {
            return Err(Error::ConvergenceFailure {
                iterations: 0,
                residual: worst,
            });
        }
    }
    Ok(SpectralResult {
        gap: (values.len() > 1).then(|| values[1] - values[0]),
        eigenvalues: values,
        eigenvectors: vectors,
        residuals,
    })
}

/// Ground energy and normalized ground vector.
pub fn ground_state(op: &dyn LinearOperator, tol: f64) -> Result<(f64, Vec<f64>)> {
    let mut r = low_spectrum(op, 1, tol)?;
    Ok((r.eigenvalues[0], r.eigenvectors.swap_remove(0)))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayReport {
    /// Least-squares slope of `log|ψ|` against distance in the tail.
    pub slope: f64,
    pub passes: bool,
    pub tail_points: usize,
    pub warning: Option<String>,
}

/// Fits the exponential decay rate of a one-electron grid state around
/// `center`. The tail starts at the radius holding 90% of the norm and
/// stops 10% short of the grid edge (where the Dirichlet wall bends the
/// profile) or at the floating-point floor.
pub fn decay_check(state: &[f64], grid: &Grid, center: f64, theta_trial: f64) -> DecayReport {
    let pts = grid.points();
    let total: f64 = state.iter().map(|v| v * v).sum();
    let mut by_dist: Vec<(f64, f64)> = pts.iter().zip(state).map(|(&x, &v)| ((x - center).abs(), v)).collect();
    by_dist.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut acc = 0.0;
    let mut r90 = by_dist.last().map(|p| p.0).unwrap_or(0.0);
    for &(d, v) in &by_dist {
        acc += v * v;
        if acc >= 0.9 * total {
            r90 = d;
            break;
        }
    }
    let reach = (grid.max() - center).min(center - grid.min());
    let r_hi = 0.9 * reach;
    let peak = state.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = 1e-12 * peak;
    let tail: Vec<(f64, f64)> = by_dist
        .iter()
        .filter(|(d, v)| *d >= r90 && *d <= r_hi && v.abs() > floor)
        .map(|&(d, v)| (d, v.abs().ln()))
        .collect();
    let mut warning = None;
    let truncated = by_dist.iter().any(|(d, v)| *d >= r90 && *d <= r_hi && v.abs() <= floor);
    if truncated {
        warning = Some("tail reaches the floating-point floor; fit truncated".into());
    }
    if tail.len() < 3 {
        return DecayReport {
            slope: f64::NAN,
            passes: false,
            tail_points: tail.len(),
            warning: Some("too few tail points above the floating-point floor".into()),
        };
    }
    let (slope, _) = linear_fit(&tail);
    DecayReport {
        slope,
        passes: slope <= -theta_trial,
        tail_points: tail.len(),
        warning,
    }
}

/// Least-squares line `y = a x + b`; returns `(a, b)`.
pub fn linear_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let a = sxy / sxx;
    (a, my - a * mx)
}

/// One-electron density on a one-dimensional grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityProfile {
    pub grid: Grid,
    pub values: Vec<f64>,
    /// `∫ρ`, equal to the number of generating vectors.
    pub total: f64,
}

/// Marginal density of electron `axis` summed over an orthonormal basis of
/// tensor-grid vectors (unit Euclidean norm, so `h Σ ρ = rank`).
pub fn one_electron_density(basis: &[Vec<f64>], grid: &Grid, electrons: usize, axis: usize) -> Result<DensityProfile> {
    let dev = linalg::gram_deviation(basis);
    if dev > 1e-8 {
        return Err(Error::InvalidBasis { deviation: dev });
    }
    if axis >= electrons {
        return Err(Error::InvalidSystem(format!("electron axis {axis} out of range")));
    }
    let n = grid.len();
    let stride = n.pow((electrons - 1 - axis) as u32);
    let mut values = vec![0.0; n];
    for v in basis {
        if v.len() != n.pow(electrons as u32) {
            return Err(Error::InvalidBasis {
                deviation: f64::INFINITY,
            });
        }
        for (i, x) in v.iter().enumerate() {
            values[(i / stride) % n] += x * x;
        }
    }
    let h = grid.spacing();
    values.iter_mut().for_each(|v| *v /= h);
    let total = h * values.iter().sum::<f64>();
    Ok(DensityProfile {
        grid: grid.clone(),
        values,
        total,
    })
}

/// Radial orbital `u(r) = r R(r)` sampled on an offset radial grid with
/// `h Σ u² = 1`.
#[derive(Debug, Clone)]
pub struct RadialOrbital {
    pub grid: Grid,
    pub u: Vec<f64>,
}

impl RadialOrbital {
    /// Builds an orbital from a unit-Euclidean-norm eigenvector.
    pub fn from_eigenvector(grid: &Grid, v: &[f64]) -> Self {
        let s = 1.0 / grid.spacing().sqrt();
        let mut u: Vec<f64> = v.iter().map(|x| x * s).collect();
        // Fix the sign so the orbital starts positive.
        if u.iter().find(|x| x.abs() > 1e-12).is_some_and(|x| *x < 0.0) {
            u.iter_mut().for_each(|x| *x = -*x);
        }
        Self { grid: grid.clone(), u }
    }

    /// `u(r)` by linear interpolation, with `u(0) = 0` and zero beyond the
    /// grid.
    pub fn u_at(&self, r: f64) -> f64 {
        let h = self.grid.spacing();
        let t = r / h;
        if t <= 0.0 || t >= (self.u.len() + 1) as f64 {
            return 0.0;
        }
        let k = t.floor() as usize;
        let s = t - k as f64;
        let left = if k == 0 { 0.0 } else { self.u[k - 1] };
        let right = if k >= self.u.len() { 0.0 } else { self.u[k] };
        left * (1.0 - s) + right * s
    }

    /// Radial part `R(r) = u(r)/r`.
    pub fn radial_at(&self, r: f64) -> f64 {
        if r <= 0.0 {
            // Linear extrapolation of u near the origin.
            return self.u[0] / self.grid.spacing();
        }
        self.u_at(r) / r
    }

    pub fn support(&self) -> f64 {
        self.grid.max() + self.grid.spacing()
    }
}

/// Three-dimensional density that is axially symmetric about the
/// separation axis: `ρ(r, μ)` with `μ = cos θ`.
pub struct AxialDensity<'a> {
    pub support: f64,
    pub rho: Box<dyn Fn(f64, f64) -> f64 + Sync + 'a>,
}

impl<'a> AxialDensity<'a> {
    pub fn spherical(support: f64, rho: impl Fn(f64) -> f64 + Sync + 'a) -> Self {
        Self {
            support,
            rho: Box::new(move |r, _| rho(r)),
        }
    }

    /// `|R(r) Y_00|²` for an s orbital.
    pub fn from_orbital(orbital: &'a RadialOrbital) -> Self {
        Self::spherical(orbital.support(), move |r| {
            orbital.radial_at(r).powi(2) / (4.0 * std::f64::consts::PI)
        })
    }
}

const RADIAL_PANELS: usize = 64;
const RADIAL_ORDER: usize = 16;
const ANGULAR_ORDER: usize = 96;

/// `|∫ρ(z)/|y - z| dz / ∫ρ - 1/y|` for a point at distance `y` on the axis,
/// by Gauss-Legendre quadrature in `r` and `μ`.
pub fn newton_screening_residual(density: &AxialDensity, y: f64) -> Result<f64> {
    if density.support >= y {
        return Err(Error::ScreeningInapplicable {
            support: density.support,
            distance: y,
        });
    }
    let (rs, rw) = composite_gauss(0.0, density.support, RADIAL_PANELS, RADIAL_ORDER);
    let (mus, mw) = gauss_legendre(ANGULAR_ORDER);
    let two_pi = 2.0 * std::f64::consts::PI;
    let (mass, potential) = rs
        .par_iter()
        .zip(&rw)
        .map(|(&r, &wr)| {
            let mut m = 0.0;
            let mut p = 0.0;
            for (&mu, &wm) in mus.iter().zip(&mw) {
                let rho = (density.rho)(r, mu);
                let w = two_pi * r * r * wr * wm * rho;
                m += w;
                p += w / (r * r + y * y - 2.0 * r * y * mu).sqrt();
            }
            (m, p)
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    Ok((potential / mass - 1.0 / y).abs())
}

/// 24 proper rotations of the cube followed by `random` Haar-distributed
/// rotations from a fixed seed.
pub fn sample_rotations(random: usize, seed: u64) -> Vec<Matrix3<f64>> {
    let mut out = Vec::new();
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    for p in perms {
        for signs in 0..8u32 {
            let mut m = Matrix3::zeros();
            for (row, &col) in p.iter().enumerate() {
                m[(row, col)] = if signs >> row & 1 == 1 { -1.0 } else { 1.0 };
            }
            if m.determinant() > 0.0 {
                out.push(m);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tau = 2.0 * std::f64::consts::PI;
    for _ in 0..random {
        let (u1, u2, u3): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
        let q = nalgebra::Quaternion::new(
            u1.sqrt() * (tau * u3).cos(),
            (1.0 - u1).sqrt() * (tau * u2).sin(),
            (1.0 - u1).sqrt() * (tau * u2).cos(),
            u1.sqrt() * (tau * u3).sin(),
        );
        let rot = nalgebra::UnitQuaternion::from_quaternion(q);
        out.push(*rot.to_rotation_matrix().matrix());
    }
    out
}

/// Number of random rotations added to the cube group in symmetry checks.
pub const RANDOM_ROTATIONS: usize = 10;

/// Largest relative change `‖ρ∘R - ρ‖/‖ρ‖` over the sampled rotations,
/// measured on shells of Fibonacci-sphere points inside `radius`.
pub fn spherical_symmetry_check(rho: impl Fn(&Vector3<f64>) -> f64 + Sync, radius: f64, seed: u64) -> f64 {
    let shells = 12;
    let dirs = 200;
    let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
    let mut pts = Vec::with_capacity(shells * dirs);
    for s in 0..shells {
        let r = radius * (s as f64 + 0.5) / shells as f64;
        for i in 0..dirs {
            let zc = 1.0 - 2.0 * (i as f64 + 0.5) / dirs as f64;
            let rr = (1.0 - zc * zc).sqrt();
            let phi = golden * i as f64;
            pts.push(Vector3::new(r * rr * phi.cos(), r * rr * phi.sin(), r * zc));
        }
    }
    let base: Vec<f64> = pts.iter().map(&rho).collect();
    let base_norm = base.iter().map(|v| v * v).sum::<f64>().sqrt();
    sample_rotations(RANDOM_ROTATIONS, seed)
        .par_iter()
        .map(|rot| {
            let diff: f64 = pts.iter().zip(&base).map(|(p, b)| (rho(&(rot * p)) - b).powi(2)).sum();
            diff.sqrt() / base_norm
        })
        .reduce(|| 0.0, f64::max)
}

/// Density `Σ_m |R(r) Y_1m|²` of the chosen real p orbitals (0 = x, 1 = y,
/// 2 = z).
pub fn p_shell_density<'a>(
    orbital: &'a RadialOrbital,
    components: &'a [usize],
) -> impl Fn(&Vector3<f64>) -> f64 + Sync + 'a {
    move |x: &Vector3<f64>| {
        let r = x.norm();
        if r == 0.0 {
            return 0.0;
        }
        let radial = orbital.radial_at(r).powi(2);
        let ang: f64 = components.iter().map(|&c| (x[c] / r).powi(2)).sum();
        radial * 3.0 / (4.0 * std::f64::consts::PI) * ang
    }
}

/// Ground energies of the clusters and the gaps of the decomposition
/// picture.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelReport {
    /// `E(∞)`: the lowest atomic decomposition energy.
    pub e_inf: f64,
    /// First excitation above `E(∞)` inside atomic decompositions.
    pub gamma1: f64,
    /// Gap between `E(∞)` and the lowest non-atomic decomposition.
    pub gamma2: Option<f64>,
    pub gamma0: f64,
    pub levels: Vec<DecompositionLevel>,
    /// Ground energy of nucleus `j` holding `k` electrons.
    pub ion_energies: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecompositionLevel {
    pub label: String,
    pub atomic: bool,
    pub energy: f64,
}

/// Two lowest levels of nucleus `j` holding `k` electrons (`k = 0` is the
/// bare nucleus with energy 0 and no excitation).
fn ion_levels(spec: &SystemSpec, j: usize, k: usize, tol: f64) -> Result<(f64, f64)> {
    if k == 0 {
        return Ok((0.0, f64::INFINITY));
    }
    let h = assemble_ion(spec, j, k)?;
    let r = low_spectrum(&h, 2, tol)?;
    Ok((r.eigenvalues[0], r.eigenvalues[1]))
}

/// `E_a` for every decomposition together with `E(∞)`, `γ₁`, `γ₂` and
/// `γ₀ = min(γ₁, γ₂)`.
pub fn decomposition_levels(spec: &SystemSpec, decomps: &[Decomposition], tol: f64) -> Result<LevelReport> {
    let mut needed: Vec<(usize, usize)> = Vec::new();
    for a in decomps {
        a.check_against(spec)?;
        for (j, c) in a.clusters().iter().enumerate() {
            if !needed.contains(&(j, c.len())) {
                needed.push((j, c.len()));
            }
        }
    }
    let energies: Vec<(f64, f64)> = needed
        .par_iter()
        .map(|&(j, k)| ion_levels(spec, j, k, tol))
        .collect::<Result<_>>()?;
    let lookup = |j: usize, k: usize| energies[needed.iter().position(|&p| p == (j, k)).unwrap()];
    let mut levels = Vec::new();
    let mut e_inf = f64::INFINITY;
    let mut gamma1 = f64::INFINITY;
    let mut lowest_ionic = f64::INFINITY;
    for a in decomps {
        let e: f64 = a.clusters().iter().enumerate().map(|(j, c)| lookup(j, c.len()).0).sum();
        if a.is_atomic() {
            e_inf = e_inf.min(e);
            for (j, c) in a.clusters().iter().enumerate() {
                let (e0, e1) = lookup(j, c.len());
                gamma1 = gamma1.min(e1 - e0);
            }
        } else {
            lowest_ionic = lowest_ionic.min(e);
        }
        levels.push(DecompositionLevel {
            label: a.label(),
            atomic: a.is_atomic(),
            energy: e,
        });
    }
    if !e_inf.is_finite() {
        return Err(Error::InvalidDecomposition(
            "no atomic decomposition in the list".into(),
        ));
    }
    let gamma2 = lowest_ionic.is_finite().then_some(lowest_ionic - e_inf);
    let gamma0 = gamma2.map_or(gamma1, |g| g.min(gamma1));
    let ion_energies = needed
        .iter()
        .zip(&energies)
        .map(|(&(j, k), &(e, _))| (format!("nucleus{}_electrons{}", j + 1, k), e))
        .collect();
    Ok(LevelReport {
        e_inf,
        gamma1,
        gamma2,
        gamma0,
        levels,
        ion_energies,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_grid;
    use crate::manybody::{assemble_full, enumerate_decompositions};
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn diagonal_identity_case() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0]));
        let r = low_spectrum(&a, 2, 1e-12).unwrap();
        assert_eq!(r.eigenvalues, vec![1.0, 2.0]);
        assert_eq!(r.gap, Some(1.0));
    }

    #[test]
    fn soft_coulomb_atom_levels() {
        let grid = build_grid(801, (-40.0, 40.0)).unwrap();
        let h = assemble_full(&SystemSpec::single_well(grid, 1, 1)).unwrap();
        let r = low_spectrum(&h, 2, 1e-10).unwrap();
        assert!((r.eigenvalues[0] + 0.6698).abs() < 5e-4, "{:?}", r.eigenvalues);
        assert!((r.eigenvalues[1] + 0.2749).abs() < 5e-4, "{:?}", r.eigenvalues);
    }

    #[test]
    fn lanczos_and_dense_agree_on_two_electrons() {
        let spec = SystemSpec::hydrogen_pair_on(6.0, build_grid(41, (-10.0, 10.0)).unwrap());
        let h = assemble_full(&spec).unwrap();
        let dense = linalg::sorted_eigen(h.to_dense()).0;
        let it = low_spectrum_with(
            &h,
            &SpectralOptions {
                k: 3,
                tol: 1e-11,
                restrict: Some(&|_: &mut [f64]| {}),
                ..Default::default()
            },
        )
        .unwrap();
        for (v, d) in it.eigenvalues.iter().zip(dense.iter()).take(3) {
            assert!((v - d).abs() < 1e-9);
        }
    }

    #[test]
    fn decay_examples() {
        let grid = build_grid(801, (-40.0, 40.0)).unwrap();
        let h = assemble_full(&SystemSpec::single_well(grid.clone(), 1, 1)).unwrap();
        let (e0, v) = ground_state(&h, 1e-10).unwrap();
        let rep = decay_check(&v, &grid, 0.0, 0.5);
        assert!(rep.passes, "{rep:?}");
        let kappa = (2.0 * e0.abs()).sqrt();
        assert!((rep.slope + kappa).abs() < 0.15, "{} vs {}", rep.slope, kappa);

        let box_grid = build_grid(401, (-25.0, 25.0)).unwrap();
        let sine: Vec<f64> = box_grid
            .points()
            .iter()
            .map(|x| (std::f64::consts::PI * (x + 25.0) / 50.0).sin())
            .collect();
        assert!(!decay_check(&sine, &box_grid, 0.0, 0.5).passes);

        let gauss: Vec<f64> = box_grid.points().iter().map(|x| (-x * x).exp()).collect();
        assert!(decay_check(&gauss, &box_grid, 0.0, 3.0).passes);
    }

    #[test]
    fn densities() {
        let grid = build_grid(11, (-1.0, 1.0)).unwrap();
        let h = grid.spacing();
        let phi0: Vec<f64> = (0..11).map(|i| ((i as f64 + 1.0) * 0.3).sin()).collect();
        let mut phi0 = phi0;
        linalg::normalize(&mut phi0);
        let rho = one_electron_density(&[phi0.clone()], &grid, 1, 0).unwrap();
        assert!((rho.total - 1.0).abs() < 1e-12);
        assert!((rho.values[3] - phi0[3] * phi0[3] / h).abs() < 1e-14);

        let mut phi1: Vec<f64> = (0..11).map(|i| (i as f64 - 5.0) * phi0[i]).collect();
        linalg::orthogonalize_against(&mut phi1, &[phi0.clone()]);
        linalg::normalize(&mut phi1);
        let prod = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect() };
        let pp = prod(&phi0, &phi0);
        let rho = one_electron_density(&[pp], &grid, 2, 1).unwrap();
        assert!((rho.values[7] - phi0[7] * phi0[7] / h).abs() < 1e-14);
        let b = vec![prod(&phi0, &phi1), prod(&phi1, &phi0)];
        let rho = one_electron_density(&b, &grid, 2, 0).unwrap();
        assert!((rho.total - 2.0).abs() < 1e-12);
        for k in 0..11 {
            let expect = (phi0[k] * phi0[k] + phi1[k] * phi1[k]) / h;
            assert!((rho.values[k] - expect).abs() < 1e-13);
        }
        let bad = vec![phi0.clone(), phi0];
        assert!(matches!(
            one_electron_density(&bad, &grid, 1, 0),
            Err(Error::InvalidBasis { .. })
        ));
    }

    #[test]
    fn newton_theorem_cases() {
        let ball = AxialDensity::spherical(3.0, |_| 1.0);
        assert!(newton_screening_residual(&ball, 5.0).unwrap() < 1e-8);
        let gauss = AxialDensity::spherical(4.0, |r| (-r * r).exp());
        assert!(newton_screening_residual(&gauss, 10.0).unwrap() < 1e-8);
        assert!(matches!(
            newton_screening_residual(&gauss, 3.0),
            Err(Error::ScreeningInapplicable { .. })
        ));
    }

    #[test]
    fn dipole_distortion_matches_direct_cartesian_quadrature() {
        let eps = 0.5;
        let distorted = AxialDensity {
            support: 4.0,
            rho: Box::new(move |r, mu| (-r * r).exp() * (1.0 + eps * mu)),
        };
        let y = 10.0;
        let res = newton_screening_residual(&distorted, y).unwrap();
        assert!(res > 1e-4);
        // Direct Cartesian midpoint quadrature of the same density.
        let n = 80;
        let h = 8.0 / n as f64;
        let (mut mass, mut pot) = (0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let p = [
                        -4.0 + (i as f64 + 0.5) * h,
                        -4.0 + (j as f64 + 0.5) * h,
                        -4.0 + (k as f64 + 0.5) * h,
                    ];
                    let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
                    if r > 4.0 {
                        continue;
                    }
                    let rho = (-r * r).exp() * (1.0 + eps * p[2] / r.max(1e-300));
                    mass += rho;
                    pot += rho / (p[0] * p[0] + p[1] * p[1] + (p[2] - y).powi(2)).sqrt();
                }
            }
        }
        let direct = (pot / mass - 1.0 / y).abs();
        assert!((direct - res).abs() < 0.05 * res, "{direct} vs {res}");
    }

    #[test]
    fn spherical_and_p_shell_anisotropy() {
        let spec = SystemSpec::radial_hydrogen(2000, 40.0, 0).unwrap();
        let h0 = assemble_full(&spec).unwrap();
        let (_, v0) = ground_state(&h0, 1e-11).unwrap();
        let s = RadialOrbital::from_eigenvector(spec.grid(), &v0);
        let aniso = spherical_symmetry_check(|x| s.radial_at(x.norm()).powi(2), 10.0, 7);
        assert!(aniso < 1e-10);

        let spec1 = SystemSpec::radial_hydrogen(2000, 40.0, 1).unwrap();
        let h1 = assemble_full(&spec1).unwrap();
        let (_, v1) = ground_state(&h1, 1e-11).unwrap();
        let p = RadialOrbital::from_eigenvector(spec1.grid(), &v1);
        let single = spherical_symmetry_check(p_shell_density(&p, &[2]), 10.0, 7);
        assert!(single > 0.1);
        let shell = spherical_symmetry_check(p_shell_density(&p, &[0, 1, 2]), 10.0, 7);
        assert!(shell < 1e-8);
        assert_eq!(sample_rotations(10, 0).len(), 34);
    }

    #[test]
    fn hydrogen_pair_gaps_positive() {
        let spec = SystemSpec::hydrogen_pair_on(14.0, build_grid(101, (-25.0, 25.0)).unwrap());
        let d = enumerate_decompositions(2, &spec.charges()).unwrap();
        let rep = decomposition_levels(&spec, &d, 1e-10).unwrap();
        assert!(rep.gamma0 > 0.0);
        assert!(rep.gamma1 > 0.3 && rep.gamma2.unwrap() > 0.3, "{rep:?}");
    }
}
