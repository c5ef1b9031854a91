//! Multipole expansion of the intercluster interaction, C6 coefficients,
//! interaction-energy sweeps and power-law fits, Property (E) checks and
//! the first-order adiabatic correction.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feshbach::{build_p, build_p_for, php_diagnostics, FeshbachProblem};
use crate::lattice::{soft_kernel, Grid, PotentialKind};
use crate::linalg::{self, LinearOperator};
use crate::manybody::{
    assemble_full, assemble_ion, enumerate_decompositions, Decomposition, ManyBodyOperator, Mode, SystemSpec,
};
use crate::spectral::{self, decomposition_levels, linear_fit, SpectralOptions};
use crate::symmetry::{self, SymmetryType};

/// Hartree to kcal/mol, used only when reporting.
pub const KCAL_PER_HARTREE: f64 = 627.509;

/// Default fit window in bohr.
pub const DEFAULT_WINDOW: (f64, f64) = (12.0, 24.0);

/// `Σ_k 1 ⊗ … ⊗ A_k ⊗ … ⊗ 1 + shift`, with factor 0 on the slowest axis.
pub struct KronSum<'a> {
    factors: Vec<&'a dyn LinearOperator>,
    dims: Vec<usize>,
    shift: f64,
    dim: usize,
}

impl<'a> KronSum<'a> {
    pub fn new(factors: Vec<&'a dyn LinearOperator>, shift: f64) -> Self {
        let dims: Vec<usize> = factors.iter().map(|f| f.dim()).collect();
        let dim = dims.iter().product();
        Self {
            factors,
            dims,
            shift,
            dim,
        }
    }
}

impl LinearOperator for KronSum<'_> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().zip(x).for_each(|(yi, xi)| *yi = self.shift * xi);
        for (k, f) in self.factors.iter().enumerate() {
            let d = self.dims[k];
            let inner: usize = self.dims[k + 1..].iter().product();
            let block = d * inner;
            y.par_chunks_mut(block).zip(x.par_chunks(block)).for_each(|(yb, xb)| {
                let mut fiber = vec![0.0; d];
                let mut out = vec![0.0; d];
                for i in 0..inner {
                    for t in 0..d {
                        fiber[t] = xb[t * inner + i];
                    }
                    f.apply(&fiber, &mut out);
                    for t in 0..d {
                        yb[t * inner + i] += out[t];
                    }
                }
            });
        }
    }

    fn norm_estimate(&self) -> f64 {
        self.factors.iter().map(|f| f.norm_estimate()).sum::<f64>() + self.shift.abs()
    }
}

/// Dipole-dipole coupling `f_ij` between the clusters on nuclei `i` and
/// `j`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DipoleCoupling {
    pub pair: (usize, usize),
    /// Unit vector from nucleus `i` to nucleus `j` (the sign on a line).
    pub direction: [f64; 3],
    pub line: bool,
}

impl DipoleCoupling {
    /// Value of `f_ij` for electron displacements `z` (cluster `i`) and
    /// `w` (cluster `j`) from their nuclei. On a line only the first
    /// component is used and `f = -2 Σ z_k w_l`.
    pub fn value(&self, z: &[Vector3<f64>], w: &[Vector3<f64>]) -> f64 {
        let y = Vector3::from(self.direction);
        let mut total = 0.0;
        for a in z {
            for b in w {
                total += if self.line {
                    -2.0 * a.x * b.x
                } else {
                    a.dot(b) - 3.0 * a.dot(&y) * b.dot(&y)
                };
            }
        }
        total
    }
}

/// Taylor coefficient `k^{(n)}(d)/n!` of the soft kernel
/// `k(u) = (u² + a²)^{-1/2}` (the Coulomb kernel when `a = 0`).
pub fn kernel_taylor(d: f64, a: f64, n: usize) -> Result<f64> {
    let s = d * d + a * a;
    Ok(match n {
        0 => s.powf(-0.5),
        1 => -d * s.powf(-1.5),
        2 => 0.5 * (2.0 * d * d - a * a) * s.powf(-2.5),
        3 => -0.5 * d * (2.0 * d * d - 3.0 * a * a) * s.powf(-3.5),
        _ => {
            return Err(Error::Domain {
                radius: n as f64,
                limit: 3.0,
            })
        }
    })
}

/// Order-`n` Taylor term of `1/|d + u|` in three dimensions.
pub fn coulomb_taylor_3d(d: &Vector3<f64>, u: &Vector3<f64>, n: usize) -> Result<f64> {
    let r = d.norm();
    let c = d.dot(u) / r;
    let u2 = u.norm_squared();
    Ok(match n {
        0 => 1.0 / r,
        1 => -c / (r * r),
        2 => (3.0 * c * c - u2) / (2.0 * r.powi(3)),
        3 => (-5.0 * c.powi(3) + 3.0 * c * u2) / (2.0 * r.powi(4)),
        _ => {
            return Err(Error::Domain {
                radius: n as f64,
                limit: 3.0,
            })
        }
    })
}

/// Four-term combination shared by the exact interaction and each Taylor
/// order: `Σ_kl t(w_l - z_k) - s_j Σ_k t(-z_k) - s_i Σ_l t(w_l) + s_i s_j t(0)`.
fn four_term<V: Copy + std::ops::Sub<Output = V> + std::ops::Neg<Output = V>>(
    z: &[V],
    w: &[V],
    zero: V,
    si: f64,
    sj: f64,
    t: &dyn Fn(V) -> Result<f64>,
) -> Result<f64> {
    let mut total = si * sj * t(zero)?;
    for &a in z {
        for &b in w {
            total += t(b - a)?;
        }
        total -= sj * t(-a)?;
    }
    for &b in w {
        total -= si * t(b)?;
    }
    Ok(total)
}

/// Exact intercluster interaction `I_ij` in three dimensions for
/// displacements `z`, `w` and `d = y_j - y_i`.
pub fn pair_interaction_3d(z: &[Vector3<f64>], w: &[Vector3<f64>], d: &Vector3<f64>, si: f64, sj: f64) -> f64 {
    four_term(z, w, Vector3::zeros(), si, sj, &|u| Ok(1.0 / (d + u).norm())).expect("exact kernel")
}

/// Order-`p` multipole term (`p = 1, 2, 3`, decaying as `|d|^{-p}`) of
/// `I_ij` in three dimensions.
pub fn pair_term_3d(
    z: &[Vector3<f64>],
    w: &[Vector3<f64>],
    d: &Vector3<f64>,
    si: f64,
    sj: f64,
    p: usize,
) -> Result<f64> {
    if p == 0 {
        return Err(Error::Domain {
            radius: 0.0,
            limit: 1.0,
        });
    }
    four_term(z, w, Vector3::zeros(), si, sj, &|u| coulomb_taylor_3d(d, &u, p - 1))
}

/// Multipole expansion of `I_ij` on the cut-off region of a line system.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultipoleExpansion {
    pub pair: (usize, usize),
    pub order: usize,
    pub separation: f64,
    /// Displacements of the electrons of cluster `i` and cluster `j` at
    /// every sampled configuration.
    pub displacements: Vec<(Vec<f64>, Vec<f64>)>,
    /// `terms[p-1][k]`: order-`p` term at configuration `k`.
    pub terms: Vec<Vec<f64>>,
    pub exact: Vec<f64>,
    /// `sup |I_ij - Σ_{p ≤ order} terms|`.
    pub remainder_sup: f64,
    /// `sup |remainder| · R^{order+1} / ‖z‖₁^{order}`.
    pub remainder_constant: f64,
}

/// Expands `I_ij` for an atomic decomposition on the configurations where
/// every electron of clusters `i` and `j` lies within `radius` of its
/// nucleus. Requires `radius ≤ R/3`.
pub fn multipole_expand(
    spec: &SystemSpec,
    a: &Decomposition,
    pair: (usize, usize),
    order: usize,
    radius: f64,
) -> Result<MultipoleExpansion> {
    spec.validate()?;
    a.check_against(spec)?;
    let Mode::Line { grid } = &spec.mode else {
        return Err(Error::InvalidSystem(
            "line mode expansion; use pair_term_3d in space".into(),
        ));
    };
    let PotentialKind::SoftCoulomb { softening } = spec.potential.kind else {
        return Err(Error::InvalidSystem(
            "the expansion needs the soft-Coulomb kernel".into(),
        ));
    };
    if !(1..=3).contains(&order) {
        return Err(Error::Domain {
            radius: order as f64,
            limit: 3.0,
        });
    }
    let (i, j) = pair;
    let (yi, yj) = (spec.nuclei[i].position[0], spec.nuclei[j].position[0]);
    let d = yj - yi;
    let r = d.abs();
    if radius > r / 3.0 {
        return Err(Error::Domain { radius, limit: r / 3.0 });
    }
    let (si, sj) = (spec.nuclei[i].effective_charge(), spec.nuclei[j].effective_charge());
    let (ni, nj) = (a.clusters()[i].len(), a.clusters()[j].len());
    let local: Vec<f64> = grid.points();
    let near = |y: f64| -> Vec<f64> { local.iter().map(|&x| x - y).filter(|z| z.abs() <= radius).collect() };
    let (zi, zj) = (near(yi), near(yj));
    let tuples = |vals: &[f64], k: usize| -> Vec<Vec<f64>> {
        let mut out = vec![Vec::new()];
        for _ in 0..k {
            out = out
                .into_iter()
                .flat_map(|p| {
                    vals.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.push(v);
                        q
                    })
                })
                .collect();
        }
        out
    };
    let (ti, tj) = (tuples(&zi, ni), tuples(&zj, nj));
    let mut displacements = Vec::with_capacity(ti.len() * tj.len());
    for z in &ti {
        for w in &tj {
            displacements.push((z.clone(), w.clone()));
        }
    }
    let c = spec.coupling;
    let coeffs: Vec<f64> = (0..order)
        .map(|n| kernel_taylor(d, softening, n))
        .collect::<Result<_>>()?;
    let mut terms = vec![Vec::with_capacity(displacements.len()); order];
    let mut exact = Vec::with_capacity(displacements.len());
    let mut remainder_sup: f64 = 0.0;
    let mut remainder_constant: f64 = 0.0;
    for (z, w) in &displacements {
        let e = c * four_term(z, w, 0.0, si, sj, &|u| Ok(soft_kernel(d + u, softening)))?;
        let mut sum = 0.0;
        for (n, cn) in coeffs.iter().enumerate() {
            let t = c * cn * four_term(z, w, 0.0, si, sj, &|u| Ok(u.powi(n as i32)))?;
            terms[n].push(t);
            sum += t;
        }
        let rem = (e - sum).abs();
        remainder_sup = remainder_sup.max(rem);
        let size: f64 = z.iter().chain(w).map(|v| v.abs()).sum();
        if size > 0.0 {
            remainder_constant = remainder_constant.max(rem * r.powi(order as i32 + 1) / size.powi(order as i32));
        }
        exact.push(e);
    }
    Ok(MultipoleExpansion {
        pair,
        order,
        separation: r,
        displacements,
        terms,
        exact,
        remainder_sup,
        remainder_constant,
    })
}

/// Result of a C6 computation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct C6Result {
    /// `σ = ⟨fφφ, R⊥ fφφ⟩` (summed over the ground blocks).
    pub sigma: f64,
    pub atom_energies: (f64, f64),
    pub iterations: usize,
    /// Largest component of the solution along the deflated ground space.
    pub deflation_residual: f64,
}

/// Ground block (all states within the degeneracy tolerance) of a
/// cluster operator.
fn ground_block(h: &dyn LinearOperator, tol: f64) -> Result<(f64, Vec<Vec<f64>>)> {
    let res = spectral::low_spectrum(h, 3.min(h.dim()), tol)?;
    let block = res.blocks()[0].clone();
    Ok((res.eigenvalues[0], res.eigenvectors[block].to_vec()))
}

/// `σ = Σ_{p,q} ⟨g_pq, (H_i ⊕ H_j - E_i - E_j)⁻¹ P⊥ g_pq⟩` with
/// `g_pq = f · (φ_p ⊗ ψ_q)`.
#[allow(clippy::too_many_arguments)]
fn second_order_trace(
    hi: &dyn LinearOperator,
    ei: f64,
    block_i: &[Vec<f64>],
    fi: &[f64],
    hj: &dyn LinearOperator,
    ej: f64,
    block_j: &[Vec<f64>],
    fj: &[f64],
    tol: f64,
) -> Result<(f64, usize, f64)> {
    let k = KronSum::new(vec![hi, hj], -(ei + ej));
    let (di, dj) = (hi.dim(), hj.dim());
    let product = |a: &[f64], b: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; di * dj];
        for (p, &x) in a.iter().enumerate() {
            for (q, &y) in b.iter().enumerate() {
                out[p * dj + q] = x * y;
            }
        }
        out
    };
    let ground: Vec<Vec<f64>> = block_i
        .iter()
        .flat_map(|a| block_j.iter().map(move |b| (a, b)))
        .map(|(a, b)| product(a, b))
        .collect();
    let deflate = |x: &mut [f64]| {
        for g in &ground {
            let c = linalg::dot(g, x);
            linalg::axpy(-c, g, x);
        }
    };
    let f = product(fi, fj);
    let mut sigma = 0.0;
    let mut iterations = 0;
    let mut leak: f64 = 0.0;
    for g0 in &ground {
        let g: Vec<f64> = f.iter().zip(g0).map(|(a, b)| a * b).collect();
        let mut rhs = g.clone();
        deflate(&mut rhs);
        let out = linalg::conjugate_gradient(&k, &rhs, tol, 50_000, Some(&deflate))?;
        iterations += out.iterations;
        for gr in &ground {
            leak = leak.max(linalg::dot(gr, &out.x).abs());
        }
        sigma += linalg::dot(&rhs, &out.x);
    }
    if leak > 1e-8 {
        return Err(Error::Deflation { residual: leak });
    }
    Ok((sigma, iterations, leak))
}

/// Single-nucleus copy of nucleus `j` with its neutral electron count,
/// placed at the grid midpoint.
fn centered_atom(spec: &SystemSpec, j: usize) -> Result<(SystemSpec, usize)> {
    let mut sub = spec.clone();
    let mut nuc = spec.nuclei[j].clone();
    nuc.position = [spec.grid().midpoint(), 0.0, 0.0];
    let k = nuc.charge as usize;
    if k == 0 {
        return Err(Error::InvalidSystem(format!("nucleus {} carries no electrons", j + 1)));
    }
    sub.nuclei = vec![nuc];
    sub.electrons = k;
    Ok((sub, k))
}

/// `Σ_k z_k` for every configuration of `k` electrons on a grid, with `z`
/// measured from `center`.
fn summed_displacement(grid: &Grid, k: usize, center: f64) -> Vec<f64> {
    let z: Vec<f64> = grid.points().iter().map(|x| x - center).collect();
    let n = z.len();
    (0..n.pow(k as u32))
        .map(|mut idx| {
            let mut s = 0.0;
            for _ in 0..k {
                s += z[idx % n];
                idx /= n;
            }
            s
        })
        .collect()
}

/// `σ_ij` for two neutral atoms of a line system by one deflated linear
/// solve per ground-block pair. The atoms are isolated copies centered on
/// the grid; the 1D coupling is `f = -2 Σ z_k w_l`.
pub fn c6_coefficient(spec: &SystemSpec, pair: (usize, usize), tol: f64) -> Result<C6Result> {
    spec.validate()?;
    if spec.is_radial() {
        return Err(Error::InvalidSystem(
            "use c6_hydrogen_3d for the radial channel basis".into(),
        ));
    }
    let (si, ki) = centered_atom(spec, pair.0)?;
    let (sj, kj) = centered_atom(spec, pair.1)?;
    let hi = assemble_full(&si)?;
    let hj = assemble_full(&sj)?;
    let (ei, bi) = ground_block(&hi, tol)?;
    let (ej, bj) = ground_block(&hj, tol)?;
    let mid = spec.grid().midpoint();
    let fi: Vec<f64> = summed_displacement(spec.grid(), ki, mid)
        .iter()
        .map(|z| -2.0 * z)
        .collect();
    let fj = summed_displacement(spec.grid(), kj, mid);
    let (sigma, iterations, leak) = second_order_trace(&hi, ei, &bi, &fi, &hj, ej, &bj, &fj, tol)?;
    if !(sigma > 0.0) {
        return Err(Error::ConvergenceFailure {
            iterations,
            residual: sigma,
        });
    }
    Ok(C6Result {
        sigma,
        atom_energies: (ei, ej),
        iterations,
        deflation_residual: leak,
    })
}

/// Sum-over-states value `Σ_{n,m≥1} 4 d_n² e_m² / (ω_n + ω'_m)` for two
/// one-electron atoms of a line system, from dense spectra.
pub fn c6_sum_over_states(spec: &SystemSpec, pair: (usize, usize)) -> Result<f64> {
    let atom = |j: usize| -> Result<(Vec<f64>, Vec<f64>)> {
        let (s, k) = centered_atom(spec, j)?;
        if k != 1 {
            return Err(Error::InvalidSystem("sum over states needs one-electron atoms".into()));
        }
        let h = assemble_full(&s)?;
        let (vals, vecs) = linalg::sorted_eigen(h.to_dense());
        let mid = spec.grid().midpoint();
        let z: Vec<f64> = spec.grid().points().iter().map(|x| x - mid).collect();
        let g0: Vec<f64> = vecs.column(0).iter().zip(&z).map(|(a, b)| a * b).collect();
        let d: Vec<f64> = (1..vals.len())
            .map(|n| vecs.column(n).iter().zip(&g0).map(|(a, b)| a * b).sum())
            .collect();
        let w: Vec<f64> = vals[1..].iter().map(|e| e - vals[0]).collect();
        Ok((d, w))
    };
    let (di, wi) = atom(pair.0)?;
    let (dj, wj) = atom(pair.1)?;
    Ok(di
        .par_iter()
        .zip(&wi)
        .map(|(a, x)| {
            dj.iter()
                .zip(&wj)
                .map(|(b, y)| 4.0 * a * a * b * b / (x + y))
                .sum::<f64>()
        })
        .sum())
}

/// `Σ_{αβ} (δ_αβ - 3ŷ_α ŷ_β)² / 9` for a direction `ŷ`.
pub fn angular_factor(direction: &Vector3<f64>) -> Result<f64> {
    let n = direction.norm();
    if !(n > 0.0) {
        return Err(Error::Geometry("zero direction".into()));
    }
    let y = direction / n;
    let mut s = 0.0;
    for a in 0..3 {
        for b in 0..3 {
            let t = if a == b { 1.0 } else { 0.0 } - 3.0 * y[a] * y[b];
            s += t * t;
        }
    }
    Ok(s / 9.0)
}

/// Channel-basis data for hydrogen: the 1s energy and the dipole source
/// `g(r) = r u_1s(r)` in the `ℓ = 1` channel.
struct HydrogenChannels {
    e0: f64,
    h1: ManyBodyOperator,
    g: Vec<f64>,
}

fn hydrogen_channels(n: usize, r_max: f64, tol: f64) -> Result<HydrogenChannels> {
    let s0 = SystemSpec::radial_hydrogen(n, r_max, 0)?;
    let s1 = SystemSpec::radial_hydrogen(n, r_max, 1)?;
    let h0 = assemble_full(&s0)?;
    let h1 = assemble_full(&s1)?;
    let (e0, u) = if n < spectral::DENSE_LIMIT {
        let (vals, vecs) = linalg::sorted_eigen(h0.to_dense());
        (vals[0], vecs.column(0).iter().copied().collect::<Vec<f64>>())
    } else {
        spectral::ground_state(&h0, tol)?
    };
    let g = s0.grid().points().iter().zip(&u).map(|(r, v)| r * v).collect();
    Ok(HydrogenChannels { e0, h1, g })
}

/// H-H `C6 = angular · ⟨gg, (h₁ ⊕ h₁ - 2E₀)⁻¹ gg⟩` in the radial channel
/// basis, by one linear solve.
pub fn c6_hydrogen_3d(n: usize, r_max: f64, direction: &Vector3<f64>, tol: f64) -> Result<C6Result> {
    let ang = angular_factor(direction)?;
    let ch = hydrogen_channels(n, r_max, tol)?;
    let k = KronSum::new(vec![&ch.h1, &ch.h1], -2.0 * ch.e0);
    let gg: Vec<f64> = ch.g.iter().flat_map(|a| ch.g.iter().map(move |b| a * b)).collect();
    let out = linalg::conjugate_gradient(&k, &gg, tol, 100_000, None)?;
    let s = linalg::dot(&gg, &out.x);
    Ok(C6Result {
        sigma: ang * s,
        atom_energies: (ch.e0, ch.e0),
        iterations: out.iterations,
        deflation_residual: 0.0,
    })
}

/// Sum-over-states oracle `angular · Σ d_n² d_m² / (ω_n + ω_m)` in the
/// same channel basis.
pub fn c6_hydrogen_3d_sum_over_states(n: usize, r_max: f64, direction: &Vector3<f64>) -> Result<f64> {
    let ang = angular_factor(direction)?;
    let ch = hydrogen_channels(n, r_max, 1e-12)?;
    let (vals, vecs) = linalg::sorted_eigen(ch.h1.to_dense());
    let d: Vec<f64> = (0..vals.len())
        .map(|m| vecs.column(m).iter().zip(&ch.g).map(|(a, b)| a * b).sum())
        .collect();
    let w: Vec<f64> = vals.iter().map(|e| e - ch.e0).collect();
    let s: f64 = d
        .par_iter()
        .zip(&w)
        .map(|(a, x)| d.iter().zip(&w).map(|(b, y)| a * a * b * b / (x + y)).sum::<f64>())
        .sum();
    Ok(ang * s)
}

/// `⟨f_ij Φ, R⊥ f_kl Φ⟩` and `⟨f_ij Φ, R⊥ f_ij Φ⟩` for `atoms` identical
/// one-electron line atoms in the product ground state `Φ`.
pub fn selection_rule(
    grid: &Grid,
    atoms: usize,
    first: (usize, usize),
    second: (usize, usize),
    tol: f64,
) -> Result<(f64, f64)> {
    if first.0 >= atoms || first.1 >= atoms || second.0 >= atoms || second.1 >= atoms {
        return Err(Error::InvalidSystem("pair index out of range".into()));
    }
    let spec = SystemSpec::single_well(grid.clone(), 1, 1);
    let h = assemble_full(&spec)?;
    let (e0, phi) = spectral::ground_state(&h, tol)?;
    let mid = grid.midpoint();
    let z: Vec<f64> = grid.points().iter().map(|x| x - mid).collect();
    let ops: Vec<&dyn LinearOperator> = vec![&h; atoms];
    let k = KronSum::new(ops, -(atoms as f64) * e0);
    let n = grid.len();
    let dim = k.dim();
    let coords = |mut idx: usize| {
        let mut c = vec![0usize; atoms];
        for e in (0..atoms).rev() {
            c[e] = idx % n;
            idx /= n;
        }
        c
    };
    let big_phi: Vec<f64> = (0..dim).map(|i| coords(i).iter().map(|&c| phi[c]).product()).collect();
    let source = |p: (usize, usize)| -> Vec<f64> {
        (0..dim)
            .map(|i| {
                let c = coords(i);
                -2.0 * z[c[p.0]] * z[c[p.1]] * big_phi[i]
            })
            .collect()
    };
    let deflate = |x: &mut [f64]| {
        let c = linalg::dot(&big_phi, x);
        linalg::axpy(-c, &big_phi, x);
    };
    let mut a = source(first);
    deflate(&mut a);
    let mut b = source(second);
    deflate(&mut b);
    let ub = linalg::conjugate_gradient(&k, &b, tol, 50_000, Some(&deflate))?;
    let ua = linalg::conjugate_gradient(&k, &a, tol, 50_000, Some(&deflate))?;
    Ok((linalg::dot(&a, &ub.x), linalg::dot(&a, &ua.x)))
}

/// Which energies a sweep computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Direct,
    Feshbach,
    Both,
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub method: Method,
    pub cutoff_fraction: f64,
    pub symmetry: Option<SymmetryType>,
    pub tol: f64,
    /// Compute `σ_12` and the predicted `-σ/R⁶`.
    pub with_c6: bool,
    pub window: (f64, f64),
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            method: Method::Direct,
            cutoff_fraction: crate::feshbach::DEFAULT_CUTOFF_FRACTION,
            symmetry: None,
            tol: 1e-10,
            with_c6: true,
            window: DEFAULT_WINDOW,
        }
    }
}

/// One separation of a sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint {
    pub r: f64,
    /// Lowest atomic decomposition energy.
    pub e_inf: f64,
    /// Lowest decomposition energy of any kind; `W` is measured from it.
    pub e_min: f64,
    pub w_direct: Option<f64>,
    pub w_feshbach: Option<f64>,
    pub w_predicted: Option<f64>,
    /// First diagonal term `⟨Ψ_a, I_a Ψ_a⟩` of `PHP`.
    pub php_diagonal: Option<f64>,
    /// `‖U(E)‖` on `Ran P` at the fixed point.
    pub u_norm: Option<f64>,
}

impl SweepPoint {
    /// The direct value if present, else the Feshbach one.
    pub fn w(&self) -> Option<f64> {
        self.w_direct.or(self.w_feshbach)
    }
}

/// Least-squares fit `|W| = C R^p` on a window.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PowerFit {
    pub exponent: f64,
    pub coefficient: f64,
    /// Sign shared by every `W` in the window.
    pub sign: f64,
    /// Root-mean-square residual of `log|W|`.
    pub residual: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VdwReport {
    pub method: Method,
    pub points: Vec<SweepPoint>,
    pub sigma: Option<f64>,
    pub fit: Option<PowerFit>,
    pub fit_error: Option<String>,
}

impl VdwReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["R", "W_direct", "W_feshbach", "W_predicted", "php_diagonal", "u_norm"])?;
        let f = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.12e}"));
        for p in &self.points {
            wtr.write_record([
                p.r.to_string(),
                f(p.w_direct),
                f(p.w_feshbach),
                f(p.w_predicted),
                f(p.php_diagonal),
                f(p.u_norm),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Places the two nuclei of `spec` at `midpoint ∓ r/2`.
pub fn at_separation(spec: &SystemSpec, r: f64) -> Result<SystemSpec> {
    if spec.nuclei.len() != 2 {
        return Err(Error::InvalidSystem("separation sweeps need exactly two nuclei".into()));
    }
    let c = spec.grid().midpoint();
    Ok(spec.with_positions(&[c - 0.5 * r, c + 0.5 * r]))
}

fn sweep_point(spec: &SystemSpec, r: f64, opts: &SweepOptions, sigma: Option<f64>) -> Result<SweepPoint> {
    let s = at_separation(spec, r)?;
    let decomps = enumerate_decompositions(s.electrons, &s.charges())?;
    let levels = decomposition_levels(&s, &decomps, opts.tol)?;
    let e_min = levels.e_inf + levels.gamma2.map_or(0.0, |g| g.min(0.0));
    let h = assemble_full(&s)?;
    let sector = match &opts.symmetry {
        Some(t) => Some(symmetry::projector(t, s.grid().len())?),
        None => None,
    };
    let restrict = |v: &mut [f64]| {
        if let Some(q) = &sector {
            q.apply_in_place(v)
        }
    };
    let mut point = SweepPoint {
        r,
        e_inf: levels.e_inf,
        e_min,
        w_direct: None,
        w_feshbach: None,
        w_predicted: sigma.map(|sg| -sg / r.powi(6)),
        php_diagonal: None,
        u_norm: None,
    };
    if matches!(opts.method, Method::Direct | Method::Both) {
        let res = spectral::low_spectrum_with(
            &h,
            &SpectralOptions {
                k: 1,
                tol: opts.tol,
                seed: 0,
                restrict: sector.as_ref().map(|_| &restrict as &(dyn Fn(&mut [f64]) + Sync)),
            },
        )?;
        point.w_direct = Some(res.eigenvalues[0] - e_min);
    }
    if matches!(opts.method, Method::Feshbach | Method::Both) {
        let p = build_p(&s, opts.cutoff_fraction, opts.symmetry.as_ref(), opts.tol)?;
        let problem = FeshbachProblem::new(&h, p.active(), sector.as_ref())?;
        let fp = problem.solve_fixed_point(e_min)?;
        point.w_feshbach = Some(fp.energy - e_min);
        point.u_norm = Some(problem.map(fp.energy)?.u_norm());
        let php = php_diagnostics(&s, &h, &p, levels.e_inf)?;
        point.php_diagonal = php.diagonal_terms.first().map(|t| t.1);
    }
    Ok(point)
}

/// `W(R)` for every separation, in parallel over `R`.
pub fn interaction_sweep(spec: &SystemSpec, rs: &[f64], opts: &SweepOptions) -> Result<VdwReport> {
    spec.validate()?;
    at_separation(spec, rs.first().copied().unwrap_or(1.0))?;
    let sigma = if opts.with_c6 {
        Some(c6_coefficient(spec, (0, 1), opts.tol)?.sigma)
    } else {
        None
    };
    let points: Vec<SweepPoint> = rs
        .par_iter()
        .map(|&r| sweep_point(spec, r, opts, sigma).map_err(|e| Error::AtSeparation { r, source: Box::new(e) }))
        .collect::<Result<_>>()?;
    let samples: Vec<(f64, f64)> = points.iter().filter_map(|p| p.w().map(|w| (p.r, w))).collect();
    let (fit, fit_error) = match fit_power_law(&samples, opts.window) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(VdwReport {
        method: opts.method,
        points,
        sigma,
        fit,
        fit_error,
    })
}

/// Fits `log|W| = log C + p log R` on the samples inside `window`.
pub fn fit_power_law(samples: &[(f64, f64)], window: (f64, f64)) -> Result<PowerFit> {
    let inside: Vec<(f64, f64)> = samples
        .iter()
        .copied()
        .filter(|(r, _)| *r >= window.0 && *r <= window.1)
        .collect();
    if inside.len() < 4 {
        return Err(Error::Window(format!(
            "{} points in [{}, {}], need at least 4",
            inside.len(),
            window.0,
            window.1
        )));
    }
    let sign = inside[0].1.signum();
    if inside.iter().any(|(_, w)| w.signum() != sign || *w == 0.0) {
        return Err(Error::Window("W changes sign inside the window".into()));
    }
    let logs: Vec<(f64, f64)> = inside.iter().map(|(r, w)| (r.ln(), w.abs().ln())).collect();
    let (p, b) = linear_fit(&logs);
    let residual = (logs.iter().map(|(x, y)| (y - p * x - b).powi(2)).sum::<f64>() / logs.len() as f64).sqrt();
    Ok(PowerFit {
        exponent: p,
        coefficient: b.exp(),
        sign,
        residual,
        points: inside.len(),
    })
}

/// A two-well line system tuned so that moving the electron of `B` onto
/// `A` costs nothing: `E_B(1) = E_A(2) - E_A(1)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RiggedSystem {
    pub spec: SystemSpec,
    /// Effective charge of nucleus `B`.
    pub strength: f64,
    /// `E_A(1) - E_A(2)`.
    pub affinity: f64,
    /// `E_A(2) - E_A(1) - E_B(1)` after tuning.
    pub tie_gap: f64,
}

/// Tunes the strength of nucleus `B` by bisection, with both wells at
/// their positions for separation `r`.
pub fn rig_degenerate_ions(grid: &Grid, r: f64, tol: f64) -> Result<RiggedSystem> {
    let mut spec = SystemSpec::hydrogen_pair_on(r, grid.clone());
    let e1 = spectral::ground_state(&assemble_ion(&spec, 0, 1)?, tol)?.0;
    let e2 = spectral::ground_state(&assemble_ion(&spec, 0, 2)?, tol)?.0;
    let target = e2 - e1;
    let one = |s: f64| -> Result<f64> {
        let mut sp = spec.clone();
        sp.nuclei[1].strength = Some(s);
        Ok(linalg::sorted_eigen(assemble_ion(&sp, 1, 1)?.to_dense()).0[0])
    };
    let (mut lo, mut hi) = (1e-3, 1.0);
    if one(hi)? > target || one(lo)? < target {
        return Err(Error::Rigging { gap: one(hi)? - target });
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if one(mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = 0.5 * (lo + hi);
    let gap = target - one(s)?;
    spec.nuclei[1].strength = Some(s);
    Ok(RiggedSystem {
        spec,
        strength: s,
        affinity: e1 - e2,
        tie_gap: gap,
    })
}

/// `PHP` diagonal term of the ionic block against the Coulomb tail.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoulombTail {
    pub r: f64,
    pub label: String,
    pub diagonal: f64,
    /// `Σ_{i<j} q_i q_j / R`.
    pub coulomb: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NecessityReport {
    pub sweep: VdwReport,
    /// `E_min(ionic) - E(∞)` at the smallest separation.
    pub gamma2: f64,
    pub tail: Option<CoulombTail>,
}

/// Tolerance on the tie between ionic and atomic energies.
pub const TIE_TOL: f64 = 1e-6;

/// Sweep and fit for a system whose ionic decomposition ties with the
/// atomic one; refuses systems where Property (E) holds.
pub fn necessity_experiment(
    spec_rigged: &SystemSpec,
    rs: &[f64],
    window: (f64, f64),
    tail_r: Option<f64>,
    cutoff_fraction: f64,
    tol: f64,
) -> Result<NecessityReport> {
    let r0 = rs.iter().copied().fold(f64::INFINITY, f64::min);
    let s0 = at_separation(spec_rigged, r0)?;
    let decomps = enumerate_decompositions(s0.electrons, &s0.charges())?;
    let levels = decomposition_levels(&s0, &decomps, tol)?;
    let gamma2 = levels
        .gamma2
        .ok_or_else(|| Error::InvalidDecomposition("no ionic decomposition".into()))?;
    let rigged = spec_rigged.nuclei.iter().any(|n| n.strength.is_some());
    if !rigged && gamma2 > TIE_TOL {
        return Err(Error::PropertyEHolds { gamma2 });
    }
    if gamma2.abs() > TIE_TOL {
        return Err(Error::Rigging { gap: gamma2 });
    }
    let opts = SweepOptions {
        method: Method::Direct,
        cutoff_fraction,
        symmetry: None,
        tol,
        with_c6: false,
        window,
    };
    let sweep = interaction_sweep(spec_rigged, rs, &opts)?;
    let tail = match tail_r {
        Some(r) => Some(coulomb_tail(spec_rigged, r, cutoff_fraction, tol)?),
        None => None,
    };
    Ok(NecessityReport { sweep, gamma2, tail })
}

/// Builds `P` over the decompositions within `1e-3` of the lowest level and
/// compares the diagonal of the lowest ionic block with `Σ q_i q_j / R`.
pub fn coulomb_tail(spec: &SystemSpec, r: f64, cutoff_fraction: f64, tol: f64) -> Result<CoulombTail> {
    let s = at_separation(spec, r)?;
    let decomps = enumerate_decompositions(s.electrons, &s.charges())?;
    let levels = decomposition_levels(&s, &decomps, tol)?;
    let e_min = levels.levels.iter().map(|l| l.energy).fold(f64::INFINITY, f64::min);
    let chosen: Vec<Decomposition> = decomps
        .iter()
        .zip(&levels.levels)
        .filter(|(_, l)| l.energy <= e_min + 1e-3)
        .map(|(a, _)| a.clone())
        .collect();
    let ionic = chosen
        .iter()
        .find(|a| !a.is_atomic())
        .ok_or_else(|| Error::Rigging {
            gap: levels.gamma2.unwrap_or(f64::NAN),
        })?
        .clone();
    let p = build_p_for(&s, &chosen, cutoff_fraction, None, tol)?;
    let h = assemble_full(&s)?;
    let php = php_diagnostics(&s, &h, &p, e_min)?;
    let label = ionic.label();
    let diagonal = php
        .diagonal_terms
        .iter()
        .find(|(l, _)| *l == label)
        .map(|t| t.1)
        .ok_or_else(|| Error::InvalidDecomposition("ionic block missing from P".into()))?;
    let q = ionic.cluster_charges(&s);
    let mut coulomb = 0.0;
    for i in 0..q.len() {
        for j in i + 1..q.len() {
            coulomb += s.coupling * q[i] * q[j] / s.distance(i, j);
        }
    }
    Ok(CoulombTail {
        r,
        label,
        diagonal,
        coulomb,
        relative_error: ((diagonal - coulomb) / coulomb).abs(),
    })
}

/// One row of the ionization table (energies in kcal/mol).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IonTableEntry {
    pub atomic_number: u32,
    pub element: String,
    #[serde(rename = "ionization_kcal")]
    pub ionization: f64,
    #[serde(rename = "affinity_kcal")]
    pub affinity: Option<f64>,
    #[serde(rename = "estimated_flag")]
    pub estimated: bool,
}

const DEFAULT_TABLE: &str = include_str!("../data/ionization.csv");

pub fn parse_ion_table<R: Read>(reader: R) -> Result<Vec<IonTableEntry>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let e: IonTableEntry = row?;
        if !(e.ionization > 0.0) || e.affinity.is_some_and(|a| a < 0.0) {
            return Err(Error::Parse(format!("invalid energies for {}", e.element)));
        }
        out.push(e);
    }
    Ok(out)
}

pub fn load_ion_table(path: &Path) -> Result<Vec<IonTableEntry>> {
    parse_ion_table(std::fs::File::open(path)?)
}

/// The bundled table of first ionization energies and electron affinities
/// for Z = 1..25.
pub fn default_ion_table() -> Vec<IonTableEntry> {
    parse_ion_table(DEFAULT_TABLE.as_bytes()).expect("bundled table parses")
}

/// `(E')` for one ordered pair: the donor's ionization energy exceeds the
/// acceptor's affinity.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairCheck {
    pub donor: String,
    pub acceptor: String,
    pub ionization: f64,
    pub affinity: f64,
    pub margin: f64,
    pub holds: bool,
    pub estimated: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableReport {
    pub pairs: Vec<PairCheck>,
    pub complete: Vec<String>,
    pub notices: Vec<String>,
    pub property_e_prime: bool,
    /// `(E)` for any system built from the complete elements, by induction
    /// on the number of atoms from the pairwise inequalities.
    pub property_e: bool,
}

/// Checks `(E')` with first ionization energies and affinities for every
/// ordered pair of complete rows (restricted to `elements` if given).
pub fn property_e_table(entries: &[IonTableEntry], elements: Option<&[String]>) -> TableReport {
    let mut notices = Vec::new();
    let selected: Vec<&IonTableEntry> = entries
        .iter()
        .filter(|e| elements.is_none_or(|list| list.iter().any(|x| x == &e.element)))
        .filter(|e| {
            if e.affinity.is_none() {
                notices.push(format!("{}: no electron affinity, skipped", e.element));
                false
            } else {
                true
            }
        })
        .collect();
    let mut pairs = Vec::new();
    for d in &selected {
        for a in &selected {
            let aff = a.affinity.expect("filtered");
            pairs.push(PairCheck {
                donor: d.element.clone(),
                acceptor: a.element.clone(),
                ionization: d.ionization,
                affinity: aff,
                margin: d.ionization - aff,
                holds: d.ionization > aff,
                estimated: d.estimated || a.estimated,
            });
        }
    }
    let ok = pairs.iter().all(|p| p.holds);
    TableReport {
        complete: selected.iter().map(|e| e.element.clone()).collect(),
        pairs,
        notices,
        property_e_prime: ok,
        property_e: ok,
    }
}

/// `E^{(m)}` for a single well holding `m + 1` electrons.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IonLevel {
    pub extra: usize,
    pub energy: f64,
    /// `E^{(m)} - (m+1) E^{(0)}`.
    pub margin: f64,
    /// `⟨ψ, Σ_{i<j} k(x_i - x_j) ψ⟩` in the ground state.
    pub repulsion: f64,
}

/// One instance `E_{i,m} + E_{j,-n} < E_{i,m+l} + E_{j,-n-l}` of `(E')`
/// for two identical wells (`E_{j,c}` holds `Z - c` electrons).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EPrimeCheck {
    pub m: usize,
    pub n: usize,
    pub l: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NumericPropertyE {
    pub e0: f64,
    pub levels: Vec<IonLevel>,
    pub e_prime: Vec<EPrimeCheck>,
    pub holds: bool,
    pub notices: Vec<String>,
}

fn pair_repulsion(grid: &Grid, k: usize, softening: f64, coupling: f64, psi: &[f64]) -> f64 {
    let pts = grid.points();
    let n = pts.len();
    psi.iter()
        .enumerate()
        .map(|(mut idx, v)| {
            let mut c = vec![0.0; k];
            for e in (0..k).rev() {
                c[e] = pts[idx % n];
                idx /= n;
            }
            let mut s = 0.0;
            for a in 0..k {
                for b in a + 1..k {
                    s += soft_kernel(c[a] - c[b], softening);
                }
            }
            coupling * s * v * v
        })
        .sum()
}

/// Hydrogen-analogue inequalities `E^{(m)} > (m+1)E^{(0)}` for
/// `m = 1..=max_extra` and the `(E')` instances they decide, for a charge-1
/// well of the given strength.
pub fn property_e_numeric(grid: &Grid, strength: f64, max_extra: usize, tol: f64) -> Result<NumericPropertyE> {
    let mut base = SystemSpec::single_well(grid.clone(), 1, 1);
    base.nuclei[0].strength = Some(strength);
    let softening = base.potential.interaction_softening();
    let mut energies = vec![0.0];
    let mut levels = Vec::new();
    let mut notices = Vec::new();
    let mut e0 = 0.0;
    for m in 0..=max_extra {
        let mut s = base.clone();
        s.electrons = m + 1;
        let h = match assemble_full(&s) {
            Ok(h) => h,
            Err(Error::ResourceLimit { what, requested, cap }) if m > 1 => {
                notices.push(format!(
                    "{} electrons skipped: {what} = {requested} exceeds {cap}",
                    m + 1
                ));
                break;
            }
            Err(e) => return Err(e),
        };
        let (e, psi) = spectral::ground_state(&h, tol)?;
        if m == 0 {
            e0 = e;
        }
        energies.push(e);
        levels.push(IonLevel {
            extra: m,
            energy: e,
            margin: e - (m as f64 + 1.0) * e0,
            repulsion: pair_repulsion(grid, m + 1, softening, s.coupling, &psi),
        });
    }
    // energies[c] holds c electrons; a well of charge 1 in state `charge q`
    // holds 1 - q electrons.
    let computed = levels.len() - 1;
    let level = |electrons: usize| energies[electrons];
    let mut e_prime = Vec::new();
    let z = 1usize;
    for m in 0..=z {
        for l in 1..=z.saturating_sub(m) {
            for n in 0..computed {
                if z + n + l > computed + 1 {
                    continue;
                }
                let lhs = level(z - m) + level(z + n);
                let rhs = level(z - m - l) + level(z + n + l);
                e_prime.push(EPrimeCheck {
                    m,
                    n,
                    l,
                    lhs,
                    rhs,
                    holds: lhs < rhs,
                });
            }
        }
    }
    let holds = levels.iter().skip(1).all(|l| l.margin > 0.0) && e_prime.iter().all(|c| c.holds);
    Ok(NumericPropertyE {
        e0,
        levels,
        e_prime,
        holds,
        notices,
    })
}

/// First-order adiabatic correction `Σ_j ‖∂ψ/∂y_j‖² / (2 m_j)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoCorrection {
    pub total: f64,
    /// `‖∂ψ/∂y_j‖²` per nucleus.
    pub derivative_norms: Vec<f64>,
    pub masses: Vec<f64>,
    /// Ground energy at the reference geometry.
    pub energy: f64,
    /// Gap above the ground level inside the sector used.
    pub gap: f64,
}

/// Default nuclear mass (proton, in electron masses).
pub const PROTON_MASS: f64 = 1_836.152_673;

/// Central differences of the ground state in each nuclear coordinate,
/// with phases aligned to the reference state. `sector` restricts the
/// ground state to a symmetry type.
pub fn bo_correction(
    spec: &SystemSpec,
    masses: &[f64],
    step: f64,
    sector: Option<&SymmetryType>,
    tol: f64,
) -> Result<BoCorrection> {
    spec.validate()?;
    if masses.len() != spec.nuclei.len() || masses.iter().any(|m| !(*m > 0.0)) {
        return Err(Error::InvalidSystem("one positive mass per nucleus is required".into()));
    }
    if spec.is_radial() {
        return Err(Error::InvalidSystem("the adiabatic correction needs line mode".into()));
    }
    let q = match sector {
        Some(t) => Some(symmetry::projector(t, spec.grid().len())?),
        None => None,
    };
    let solve = |s: &SystemSpec, k: usize| -> Result<spectral::SpectralResult> {
        let h = assemble_full(s)?;
        let restrict = |v: &mut [f64]| {
            if let Some(q) = &q {
                q.apply_in_place(v)
            }
        };
        spectral::low_spectrum_with(
            &h,
            &SpectralOptions {
                k,
                tol,
                seed: 0,
                restrict: Some(&restrict),
            },
        )
    };
    let reference = solve(spec, 2)?;
    let gap = reference.eigenvalues[1] - reference.eigenvalues[0];
    if gap < 1e-6 {
        return Err(Error::DegenerateState(format!("ground gap {gap:.3e} below 1e-6")));
    }
    let psi0 = &reference.eigenvectors[0];
    let mut norms = Vec::with_capacity(masses.len());
    let mut total = 0.0;
    for (j, m) in masses.iter().enumerate() {
        let displaced = |sign: f64| -> Result<Vec<f64>> {
            let mut s = spec.clone();
            s.nuclei[j].position[0] += sign * step;
            let mut v = solve(&s, 1)?.eigenvectors.swap_remove(0);
            let overlap = linalg::dot(psi0, &v);
            if overlap.abs() < 0.5 {
                return Err(Error::DegenerateState(format!(
                    "overlap {overlap:.3} with the reference state after displacing nucleus {}",
                    j + 1
                )));
            }
            if overlap < 0.0 {
                linalg::scale(-1.0, &mut v);
            }
            Ok(v)
        };
        let plus = displaced(1.0)?;
        let minus = displaced(-1.0)?;
        let d2: f64 = plus
            .iter()
            .zip(&minus)
            .map(|(a, b)| ((a - b) / (2.0 * step)).powi(2))
            .sum();
        norms.push(d2);
        total += d2 / (2.0 * m);
    }
    Ok(BoCorrection {
        total,
        derivative_norms: norms,
        masses: masses.to_vec(),
        energy: reference.eigenvalues[0],
        gap,
    })
}

/// Adiabatic correction of a molecule split into its single-atom parts and
/// the remainder that depends on the geometry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoInteraction {
    pub molecule: BoCorrection,
    /// Correction of each neutral atom alone at its position.
    pub atomic: Vec<f64>,
    /// `total - Σ atomic`.
    pub interaction: f64,
    /// `W = E - E(∞)` at the reference geometry.
    pub w: f64,
    /// `|interaction| / |W|`.
    pub ratio: f64,
}

/// [`bo_correction`] for the molecule and for every atom on its own.
pub fn bo_interaction(
    spec: &SystemSpec,
    masses: &[f64],
    step: f64,
    sector: Option<&SymmetryType>,
    tol: f64,
) -> Result<BoInteraction> {
    let molecule = bo_correction(spec, masses, step, sector, tol)?;
    let mut atomic = Vec::with_capacity(masses.len());
    for (j, m) in masses.iter().enumerate() {
        let mut sub = spec.clone();
        sub.nuclei = vec![spec.nuclei[j].clone()];
        sub.electrons = spec.nuclei[j].charge as usize;
        let ty = sector.filter(|t| t.order() == sub.electrons);
        atomic.push(bo_correction(&sub, &[*m], step, ty, tol)?.total);
    }
    let decomps = enumerate_decompositions(spec.electrons, &spec.charges())?;
    let e_inf = decomposition_levels(spec, &decomps, tol)?.e_inf;
    let w = molecule.energy - e_inf;
    let interaction = molecule.total - atomic.iter().sum::<f64>();
    Ok(BoInteraction {
        ratio: interaction.abs() / w.abs(),
        molecule,
        atomic,
        interaction,
        w,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_grid;

    #[test]
    fn synthetic_inverse_sixth_power() {
        let samples: Vec<(f64, f64)> = (12..=24)
            .step_by(2)
            .map(|r| (r as f64, -5.0 / (r as f64).powi(6)))
            .collect();
        let fit = fit_power_law(&samples, DEFAULT_WINDOW).unwrap();
        assert!((fit.exponent + 6.0).abs() < 1e-10);
        assert!((fit.coefficient - 5.0).abs() < 1e-10);
        assert_eq!(fit.sign, -1.0);
    }

    #[test]
    fn sign_change_is_a_window_error() {
        let samples = [(12.0, -1.0), (14.0, 1.0), (16.0, -1.0), (18.0, -1.0)];
        assert!(matches!(fit_power_law(&samples, DEFAULT_WINDOW), Err(Error::Window(_))));
        assert!(matches!(
            fit_power_law(&samples[..2], DEFAULT_WINDOW),
            Err(Error::Window(_))
        ));
    }

    #[test]
    fn dipole_term_matches_coupling_in_space() {
        let d = Vector3::new(0.3, -1.1, 7.0);
        let z = [Vector3::new(0.2, -0.4, 0.1)];
        let w = [Vector3::new(-0.3, 0.25, 0.5)];
        let t3 = pair_term_3d(&z, &w, &d, 1.0, 1.0, 3).unwrap();
        let f = DipoleCoupling {
            pair: (0, 1),
            direction: (d / d.norm()).into(),
            line: false,
        };
        assert!((t3 - f.value(&z, &w) / d.norm().powi(3)).abs() < 1e-14);
        for p in [1, 2] {
            assert!(pair_term_3d(&z, &w, &d, 1.0, 1.0, p).unwrap().abs() < 1e-14);
        }
    }

    #[test]
    fn line_quadratic_term_is_dipole_coupling() {
        let spec = SystemSpec::hydrogen_pair(12.0);
        let a = Decomposition::new(vec![0, 1], &spec.charges()).unwrap();
        let exp = multipole_expand(&spec, &a, (0, 1), 3, 2.0).unwrap();
        let r = 12.0;
        let c2 = kernel_taylor(r, 1.0, 2).unwrap();
        for (k, (z, w)) in exp.displacements.iter().enumerate() {
            assert!(exp.terms[0][k].abs() < 1e-14);
            assert!(exp.terms[1][k].abs() < 1e-14);
            assert!((exp.terms[2][k] + 2.0 * c2 * z[0] * w[0]).abs() < 1e-14);
        }
        assert!(multipole_expand(&spec, &a, (0, 1), 3, 4.5).is_err());
    }

    #[test]
    fn angular_factor_is_two_thirds() {
        for y in [Vector3::x(), Vector3::new(1.0, 2.0, -0.5)] {
            assert!((angular_factor(&y).unwrap() - 6.0 / 9.0).abs() < 1e-15);
        }
    }

    #[test]
    fn kron_sum_of_diagonals() {
        let a = nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0]));
        let b = nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![10.0, 20.0, 30.0]));
        let k = KronSum::new(vec![&a, &b], -1.0);
        let d = linalg::to_dense(&k);
        let expect = [10.0, 20.0, 30.0, 11.0, 21.0, 31.0];
        for (i, e) in expect.iter().enumerate() {
            assert_eq!(d[(i, i)], *e);
        }
    }

    #[test]
    fn table_pairs() {
        let t = default_ion_table();
        assert_eq!(t.len(), 25);
        let rep = property_e_table(&t, Some(&["F".to_string(), "Cl".to_string()]));
        assert!(rep.property_e_prime);
        assert_eq!(rep.pairs.len(), 4);
        let h = property_e_table(&t, Some(&["H".to_string()]));
        assert_eq!(h.pairs[0].ionization, 313.5);
        assert_eq!(h.pairs[0].affinity, 17.3);
        let he = property_e_table(&t, Some(&["He".to_string()]));
        assert!(he.pairs.is_empty() && he.notices.len() == 1);
    }

    #[test]
    fn adiabatic_correction_scales_inversely_with_mass() {
        let grid = build_grid(81, (-20.0, 20.0)).unwrap();
        let spec = SystemSpec::single_well(grid, 1, 1);
        let a = bo_correction(&spec, &[1.0], 1e-2, None, 1e-12).unwrap();
        let b = bo_correction(&spec, &[1e6], 1e-2, None, 1e-12).unwrap();
        assert!(a.total > 0.0);
        assert!((b.total * 1e6 - a.total).abs() < 1e-9 * a.total.max(1.0));
    }
}
