//! Cut-off ground-state projections, the Feshbach-Schur map
//! `F_P(λ) = PHP - PHP⊥(H⊥ - λ)⁻¹P⊥HP`, its fixed points and the boosted
//! resolvent diagnostic.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{smoothed_cutoff_at, DEFAULT_WIDTH_FRACTION};
use crate::linalg::{self, FnOperator, LanczosOptions, LinearOperator};
use crate::manybody::{assemble_full, Decomposition, Mode, SystemSpec};
use crate::spectral::{self, SpectralOptions};
use crate::symmetry::{self, CharacterProjector, InducedType, SymmetryType};

/// Default cut-off radius as a fraction of the smallest internuclear
/// distance.
pub const DEFAULT_CUTOFF_FRACTION: f64 = 1.0 / 6.0;

/// Problems up to this dimension use dense factorizations for the inner
/// resolvent.
pub const DENSE_FESHBACH_LIMIT: usize = 800;

/// Relative residual of the inner linear solves.
pub const INNER_TOL: f64 = 1e-12;

/// Orthonormal vectors spanning `Ran P_{a,R}^α` for one decomposition.
#[derive(Debug, Clone)]
pub struct BasisBlock {
    pub decomposition: Option<Decomposition>,
    pub alpha: Option<InducedType>,
    pub energy: f64,
    pub vectors: Vec<Vec<f64>>,
    /// Ground eigenspace dimension of each cluster equals `dim α_j`.
    pub condition_d: bool,
}

/// Basis of `Ran P`, grouped by decomposition, with the optional
/// symmetry-projected range `Ran Π^σ = Ran Q^σ P`.
#[derive(Debug, Clone)]
pub struct CutoffGroundBasis {
    pub blocks: Vec<BasisBlock>,
    pub cutoff_radius: f64,
    pub transition_width: f64,
    /// Largest overlap between vectors of different blocks.
    pub max_overlap: f64,
    pub symmetry: Option<SymmetryType>,
    /// Orthonormal basis of `Ran Q^σ P` when a symmetry type is set.
    pub symmetric: Option<Vec<Vec<f64>>>,
}

impl CutoffGroundBasis {
    /// Wraps an arbitrary orthonormal set.
    pub fn from_orthonormal(vectors: Vec<Vec<f64>>) -> Result<Self> {
        let dev = linalg::gram_deviation(&vectors);
        if dev > 1e-10 {
            return Err(Error::InvalidBasis { deviation: dev });
        }
        Ok(Self {
            blocks: vec![BasisBlock {
                decomposition: None,
                alpha: None,
                energy: f64::NAN,
                vectors,
                condition_d: true,
            }],
            cutoff_radius: 0.0,
            transition_width: 0.0,
            max_overlap: 0.0,
            symmetry: None,
            symmetric: None,
        })
    }

    /// All vectors of `Ran P`.
    pub fn vectors(&self) -> Vec<Vec<f64>> {
        self.blocks.iter().flat_map(|b| b.vectors.iter().cloned()).collect()
    }

    /// The basis the Feshbach map acts on: `Ran Π^σ` if a symmetry type is
    /// set, otherwise `Ran P`.
    pub fn active(&self) -> Vec<Vec<f64>> {
        self.symmetric.clone().unwrap_or_else(|| self.vectors())
    }

    pub fn rank(&self) -> usize {
        self.blocks.iter().map(|b| b.vectors.len()).sum()
    }

    /// `P x` onto `Ran P`.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        for b in self.blocks.iter().flat_map(|b| &b.vectors) {
            linalg::axpy(linalg::dot(b, x), b, &mut out);
        }
        out
    }
}

/// Ground block of one cluster: nucleus `j` holding `k` electrons,
/// optionally restricted to the isotypic sector of `alpha`.
/// Nucleus, electron count and symmetry diagram of a cached cluster.
type ClusterKey = (usize, usize, Vec<usize>);

struct ClusterGround {
    energy: f64,
    vectors: Vec<Vec<f64>>,
    condition_d: bool,
}

fn cluster_ground(spec: &SystemSpec, j: usize, k: usize, alpha: Option<&[usize]>, tol: f64) -> Result<ClusterGround> {
    let mut sub = spec.clone();
    sub.nuclei = vec![spec.nuclei[j].clone()];
    sub.electrons = k;
    let h = assemble_full(&sub)?;
    let axis = spec.grid().len();
    let diagram = alpha.map(|a| a.to_vec()).unwrap_or_else(|| vec![k]);
    let ty = SymmetryType::from_diagram(diagram)?;
    let want = ty.dimension as usize + 1;
    let result = if k == 1 {
        spectral::low_spectrum(&h, 2, tol)?
    } else if alpha.is_some() {
        let q = symmetry::projector(&ty, axis)?;
        let restrict = |v: &mut [f64]| q.apply_in_place(v);
        spectral::low_spectrum_with(
            &h,
            &SpectralOptions {
                k: want,
                tol,
                restrict: Some(&restrict),
                ..Default::default()
            },
        )?
    } else {
        spectral::low_spectrum(&h, 2, tol)?
    };
    let e0 = result.eigenvalues[0];
    let block = result.blocks()[0].clone();
    let mut vectors: Vec<Vec<f64>> = result.eigenvectors[block.clone()].to_vec();
    let condition_d = if alpha.is_some() {
        block.len() as u64 == ty.dimension
    } else {
        block.len() == 1
    };
    if alpha.is_none() {
        vectors.truncate(1);
    }
    Ok(ClusterGround {
        energy: e0,
        vectors,
        condition_d,
    })
}

/// Multiplies each electron coordinate of a `k`-electron cluster vector by
/// the cut-off around its nucleus and re-orthonormalizes the block.
fn cut_off_block(vectors: &[Vec<f64>], chi: &[f64], k: usize) -> Result<Vec<Vec<f64>>> {
    let n = chi.len();
    let mut out: Vec<Vec<f64>> = Vec::new();
    for v in vectors {
        let mut w = v.clone();
        for (idx, x) in w.iter_mut().enumerate() {
            let mut rest = idx;
            let mut f = 1.0;
            for _ in 0..k {
                f *= chi[rest % n];
                rest /= n;
            }
            *x *= f;
        }
        linalg::orthogonalize_against(&mut w, &out);
        if linalg::normalize(&mut w) < 1e-8 {
            return Err(Error::InvalidBasis { deviation: 1.0 });
        }
        out.push(w);
    }
    Ok(out)
}

/// Tensor product `Ψ(x) = Π_j φ_j(x_{A_j})` with cluster coordinates taken
/// in increasing label order.
fn place_clusters(a: &Decomposition, factors: &[&Vec<f64>], axis: usize) -> Vec<f64> {
    let nn = a.electrons();
    let dim = axis.pow(nn as u32);
    let mut out = vec![0.0; dim];
    let mut coords = vec![0usize; nn];
    for (idx, o) in out.iter_mut().enumerate() {
        let mut rest = idx;
        for e in (0..nn).rev() {
            coords[e] = rest % axis;
            rest /= axis;
        }
        let mut val = 1.0;
        for (cluster, f) in a.clusters().iter().zip(factors) {
            if cluster.is_empty() {
                continue;
            }
            let sub = cluster.iter().fold(0, |acc, &e| acc * axis + coords[e]);
            val *= f[sub];
            if val == 0.0 {
                break;
            }
        }
        *o = val;
    }
    out
}

/// Builds `P` from cut-off cluster ground states for every atomic
/// decomposition (restricted to the `≺≺` types of `σ` when given).
pub fn build_p(
    spec: &SystemSpec,
    cutoff_fraction: f64,
    sigma: Option<&SymmetryType>,
    tol: f64,
) -> Result<CutoffGroundBasis> {
    let decomps: Vec<Decomposition> = crate::manybody::enumerate_decompositions(spec.electrons, &spec.charges())?
        .into_iter()
        .filter(|a| a.is_atomic())
        .collect();
    build_p_for(spec, &decomps, cutoff_fraction, sigma, tol)
}

/// As [`build_p`] but over an explicit list of decompositions (used to
/// force ionic decompositions into `P`).
pub fn build_p_for(
    spec: &SystemSpec,
    decomps: &[Decomposition],
    cutoff_fraction: f64,
    sigma: Option<&SymmetryType>,
    tol: f64,
) -> Result<CutoffGroundBasis> {
    spec.validate()?;
    let Mode::Line { grid } = &spec.mode else {
        return Err(Error::InvalidSystem("cut-off projections need line mode".into()));
    };
    if decomps.is_empty() {
        return Err(Error::InvalidDecomposition("no decompositions for P".into()));
    }
    if !(cutoff_fraction > 0.0 && cutoff_fraction < 0.5) {
        return Err(Error::Geometry(format!(
            "cut-off fraction {cutoff_fraction} must lie in (0, 1/2) for disjoint balls"
        )));
    }
    let m = spec.nuclei.len();
    let sep = if m > 1 {
        spec.min_separation()
    } else {
        grid.max() - grid.min()
    };
    let radius = cutoff_fraction * sep;
    if m > 1 && 2.0 * radius >= sep {
        return Err(Error::Geometry("cut-off balls overlap".into()));
    }
    let width = DEFAULT_WIDTH_FRACTION * radius;
    let chis: Vec<Vec<f64>> = spec
        .nuclei
        .iter()
        .map(|n| smoothed_cutoff_at(n.position[0], radius, width, grid).map(|c| c.samples))
        .collect::<Result<_>>()?;
    let axis = grid.len();

    // Candidate (a, α) pairs with their cluster energies.
    let mut candidates: Vec<(Decomposition, Option<InducedType>)> = Vec::new();
    for a in decomps {
        a.check_against(spec)?;
        match sigma {
            Some(s) => {
                for br in symmetry::induced_types(s, a)? {
                    candidates.push((a.clone(), Some(br.alpha)));
                }
            }
            None => candidates.push((a.clone(), None)),
        }
    }
    let mut cache: Vec<(ClusterKey, ClusterGround)> = Vec::new();
    let mut energies = Vec::with_capacity(candidates.len());
    for (a, alpha) in &candidates {
        let mut e = 0.0;
        for (j, cluster) in a.clusters().iter().enumerate() {
            if cluster.is_empty() {
                continue;
            }
            let diagram = alpha.as_ref().map(|al| al.factors[j].clone()).unwrap_or_default();
            let key = (j, cluster.len(), diagram.clone());
            if !cache.iter().any(|(k, _)| *k == key) {
                let d = alpha.as_ref().map(|_| diagram.as_slice());
                let g = cluster_ground(spec, j, cluster.len(), d, tol)?;
                let cut = cut_off_block(&g.vectors, &chis[j], cluster.len())?;
                cache.push((
                    key.clone(),
                    ClusterGround {
                        energy: g.energy,
                        vectors: cut,
                        condition_d: g.condition_d,
                    },
                ));
            }
            e += cache.iter().find(|(k, _)| *k == key).unwrap().1.energy;
        }
        energies.push(Some(e));
    }
    let keep = if sigma.is_some() {
        symmetry::flag_minimizers(&energies, spectral::DEGENERACY_TOL)?
    } else {
        vec![true; candidates.len()]
    };

    let mut blocks = Vec::new();
    for (((a, alpha), e), k) in candidates.iter().zip(&energies).zip(keep) {
        if !k {
            continue;
        }
        let mut per_cluster: Vec<&ClusterGround> = Vec::new();
        let empty = ClusterGround {
            energy: 0.0,
            vectors: vec![vec![1.0]],
            condition_d: true,
        };
        for (j, cluster) in a.clusters().iter().enumerate() {
            if cluster.is_empty() {
                per_cluster.push(&empty);
                continue;
            }
            let diagram = alpha.as_ref().map(|al| al.factors[j].clone()).unwrap_or_default();
            let key = (j, cluster.len(), diagram);
            per_cluster.push(&cache.iter().find(|(kk, _)| *kk == key).unwrap().1);
        }
        // All combinations of cluster block vectors.
        let mut combos: Vec<Vec<usize>> = vec![Vec::new()];
        for c in &per_cluster {
            combos = combos
                .into_iter()
                .flat_map(|p| {
                    (0..c.vectors.len()).map(move |i| {
                        let mut q = p.clone();
                        q.push(i);
                        q
                    })
                })
                .collect();
        }
        let vectors = combos
            .iter()
            .map(|combo| {
                let factors: Vec<&Vec<f64>> = combo.iter().zip(&per_cluster).map(|(&i, c)| &c.vectors[i]).collect();
                place_clusters(a, &factors, axis)
            })
            .collect();
        blocks.push(BasisBlock {
            decomposition: Some(a.clone()),
            alpha: alpha.clone(),
            energy: e.unwrap_or(f64::NAN),
            vectors,
            condition_d: per_cluster.iter().all(|c| c.condition_d),
        });
    }

    let mut max_overlap: f64 = 0.0;
    for (i, bi) in blocks.iter().enumerate() {
        for bj in blocks.iter().skip(i + 1) {
            for v in &bi.vectors {
                for w in &bj.vectors {
                    max_overlap = max_overlap.max(linalg::dot(v, w).abs());
                }
            }
        }
    }
    if max_overlap > 1e-12 {
        return Err(Error::SupportOverlap { overlap: max_overlap });
    }

    let symmetric = match sigma {
        Some(s) => {
            let q = symmetry::projector(s, axis)?;
            let mut basis: Vec<Vec<f64>> = Vec::new();
            for v in blocks.iter().flat_map(|b| &b.vectors) {
                let mut w = q.apply_vec(v);
                linalg::orthogonalize_against(&mut w, &basis);
                if linalg::norm(&w) > 1e-8 {
                    linalg::normalize(&mut w);
                    basis.push(w);
                }
            }
            Some(basis)
        }
        None => None,
    };

    Ok(CutoffGroundBasis {
        blocks,
        cutoff_radius: radius,
        transition_width: width,
        max_overlap,
        symmetry: sigma.cloned(),
        symmetric,
    })
}

/// Feshbach-Schur map at one spectral parameter.
#[derive(Debug, Clone)]
pub struct FeshbachResult {
    pub lambda: f64,
    /// `F_P(λ)` on `Ran P` in the active basis.
    pub f: DMatrix<f64>,
    /// `U(λ) = PHP⊥(H⊥-λ)⁻¹P⊥HP`.
    pub u: DMatrix<f64>,
    /// `(H⊥-λ)⁻¹P⊥H b_l` for each basis vector.
    pub solutions: Vec<Vec<f64>>,
}

impl FeshbachResult {
    pub fn eigen(&self) -> (Vec<f64>, DMatrix<f64>) {
        linalg::sorted_eigen(self.f.clone())
    }

    /// Spectral norm of `U(λ)` on `Ran P`.
    pub fn u_norm(&self) -> f64 {
        let (vals, _) = linalg::sorted_eigen(self.u.clone());
        vals.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Fixed point `λ ∈ spec F_P(λ)` and the reconstructed eigenvector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixedPoint {
    pub energy: f64,
    /// Which eigenvalue branch of `F_P` (0 = lowest).
    pub branch: usize,
    pub coefficients: Vec<f64>,
    #[serde(skip)]
    pub psi: Vec<f64>,
    /// `|λ - μ_k(λ)|`.
    pub fixed_point_residual: f64,
    /// `‖Hψ - λψ‖ / ‖ψ‖`.
    pub eigen_residual: f64,
    /// Iterates of the spectral parameter.
    pub trace: Vec<f64>,
}

/// `H`, an orthonormal basis of `Ran P` and the complement projection,
/// with the cached data every evaluation of `F_P` needs.
pub struct FeshbachProblem<'a> {
    h: &'a dyn LinearOperator,
    basis: Vec<Vec<f64>>,
    hb: Vec<Vec<f64>>,
    php: DMatrix<f64>,
    sector: Option<&'a CharacterProjector>,
    dense: Option<DMatrix<f64>>,
    perp_bottom: f64,
    scale: f64,
    seed: u64,
}

impl<'a> FeshbachProblem<'a> {
    /// `sector`, when given, must commute with `H` and contain the basis;
    /// the complement is then taken inside its range.
    pub fn new(
        h: &'a dyn LinearOperator,
        basis: Vec<Vec<f64>>,
        sector: Option<&'a CharacterProjector>,
    ) -> Result<Self> {
        if basis.is_empty() {
            return Err(Error::InvalidBasis { deviation: 1.0 });
        }
        let dev = linalg::gram_deviation(&basis);
        if dev > 1e-10 {
            return Err(Error::InvalidBasis { deviation: dev });
        }
        let r = basis.len();
        let hb: Vec<Vec<f64>> = basis.iter().map(|b| h.apply_vec(b)).collect();
        let php = DMatrix::from_fn(r, r, |i, j| {
            0.5 * (linalg::dot(&basis[i], &hb[j]) + linalg::dot(&basis[j], &hb[i]))
        });
        let scale = h.norm_estimate().max(1.0);
        let dense = (h.dim() <= DENSE_FESHBACH_LIMIT).then(|| linalg::to_dense(h));
        let mut out = Self {
            h,
            basis,
            hb,
            php,
            sector,
            dense,
            perp_bottom: f64::NAN,
            scale,
            seed: 0,
        };
        out.perp_bottom = out.compute_perp_bottom()?;
        Ok(out)
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    /// Bottom of `H⊥ = P⊥HP⊥` on `Ran P⊥` (inside the sector).
    pub fn perp_bottom(&self) -> f64 {
        self.perp_bottom
    }

    pub fn php(&self) -> &DMatrix<f64> {
        &self.php
    }

    /// Complement projection `P⊥` (composed with the sector projection).
    pub fn perp(&self, x: &mut [f64]) {
        if let Some(q) = self.sector {
            q.apply_in_place(x);
        }
        for b in &self.basis {
            let c = linalg::dot(b, x);
            linalg::axpy(-c, b, x);
        }
    }

    fn complement_dense(&self) -> DMatrix<f64> {
        let n = self.h.dim();
        let mut c = DMatrix::identity(n, n);
        if let Some(q) = self.sector {
            c = linalg::to_dense(q);
        }
        for b in &self.basis {
            let v = DVector::from_column_slice(b);
            c -= &v * v.transpose();
        }
        c
    }

    fn compute_perp_bottom(&self) -> Result<f64> {
        if let Some(hd) = &self.dense {
            let c = self.complement_dense();
            let n = hd.nrows();
            let shift = 2.0 * self.scale + 1.0;
            let m = &c * hd * &c + (DMatrix::identity(n, n) - &c) * shift;
            let (vals, _) = linalg::sorted_eigen(m);
            return Ok(vals[0]);
        }
        let restrict = |v: &mut [f64]| self.perp(v);
        let res = spectral::low_spectrum_with(
            self.h,
            &SpectralOptions {
                k: 1,
                tol: spectral::DEFAULT_TOL,
                seed: self.seed,
                restrict: Some(&restrict),
            },
        )?;
        Ok(res.eigenvalues[0])
    }

    fn margin(&self) -> f64 {
        1e-9 * self.scale
    }

    /// Solves `(H⊥ - λ) u = P⊥ w` inside `Ran P⊥`.
    fn solve_perp(&self, lambda: f64, rhs: &[f64]) -> Result<Vec<f64>> {
        let gap = self.perp_bottom - lambda;
        if gap <= self.margin() {
            return Err(Error::NotInvertible { margin: gap });
        }
        let mut b = rhs.to_vec();
        self.perp(&mut b);
        if let Some(hd) = &self.dense {
            let c = self.complement_dense();
            let n = hd.nrows();
            let a = &c * (hd - DMatrix::identity(n, n) * lambda) * &c + (DMatrix::identity(n, n) - &c);
            let lu = a.lu();
            let x = lu
                .solve(&DVector::from_column_slice(&b))
                .ok_or(Error::NotInvertible { margin: gap })?;
            let mut x: Vec<f64> = x.iter().copied().collect();
            self.perp(&mut x);
            return Ok(x);
        }
        let shifted = FnOperator {
            dim: self.h.dim(),
            norm: self.scale + lambda.abs(),
            f: |x: &[f64], y: &mut [f64]| {
                self.h.apply(x, y);
                linalg::axpy(-lambda, x, y);
            },
        };
        let restrict = |v: &mut [f64]| self.perp(v);
        let out = linalg::conjugate_gradient(&shifted, &b, INNER_TOL, 20_000, Some(&restrict))?;
        Ok(out.x)
    }

    /// `F_P(λ)` and `U(λ)` in the basis.
    pub fn map(&self, lambda: f64) -> Result<FeshbachResult> {
        let r = self.rank();
        let mut w = Vec::with_capacity(r);
        let mut solutions = Vec::with_capacity(r);
        for hb in &self.hb {
            let mut wl = hb.clone();
            self.perp(&mut wl);
            solutions.push(self.solve_perp(lambda, &wl)?);
            w.push(wl);
        }
        let u = DMatrix::from_fn(r, r, |i, j| {
            0.5 * (linalg::dot(&w[i], &solutions[j]) + linalg::dot(&w[j], &solutions[i]))
        });
        Ok(FeshbachResult {
            lambda,
            f: &self.php - &u,
            u,
            solutions,
        })
    }

    /// `μ_k(λ)` and its derivative `-‖Σ_l c_l u_l‖²`.
    fn branch(&self, lambda: f64, k: usize) -> Result<(f64, f64, Vec<f64>, FeshbachResult)> {
        let res = self.map(lambda)?;
        let (vals, vecs) = res.eigen();
        let c: Vec<f64> = vecs.column(k).iter().copied().collect();
        let mut s = vec![0.0; self.h.dim()];
        for (cl, ul) in c.iter().zip(&res.solutions) {
            linalg::axpy(*cl, ul, &mut s);
        }
        let deriv = -linalg::dot(&s, &s);
        Ok((vals[k], deriv, c, res))
    }

    /// Fixed point of branch `k` by safeguarded Newton iteration on
    /// `g(λ) = μ_k(λ) - λ`, which is strictly decreasing below the bottom
    /// of `H⊥`.
    pub fn solve_branch(&self, k: usize, lambda0: f64) -> Result<FixedPoint> {
        if k >= self.rank() {
            return Err(Error::InvalidBasis { deviation: 0.0 });
        }
        let hi_edge = self.perp_bottom - 1e3 * self.margin();
        let (g_hi, ..) = {
            let (mu, d, c, r) = self.branch(hi_edge, k)?;
            (mu - hi_edge, d, c, r)
        };
        if g_hi >= 0.0 {
            return Err(Error::WindowExit { lambda: hi_edge });
        }
        let mut lo = -self.scale - 1.0;
        let mut hi = hi_edge;
        let mut lambda = if lambda0 < hi && lambda0 > lo {
            lambda0
        } else {
            0.5 * (lo + hi)
        };
        let mut trace = Vec::new();
        let tol = 1e-13 * self.scale.max(lambda.abs());
        for _ in 0..200 {
            let (mu, deriv, c, res) = self.branch(lambda, k)?;
            trace.push(lambda);
            let g = mu - lambda;
            if g > 0.0 {
                lo = lambda;
            } else {
                hi = lambda;
            }
            if g.abs() <= tol {
                return Ok(self.finish(lambda, k, c, &res, g.abs(), trace));
            }
            let step = -g / (deriv - 1.0);
            let mut next = lambda + step;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (hi - lo).abs() <= tol {
                let (mu, _, c, res) = self.branch(next, k)?;
                return Ok(self.finish(next, k, c, &res, (mu - next).abs(), trace));
            }
            lambda = next;
        }
        Err(Error::ConvergenceFailure {
            iterations: 200,
            residual: hi - lo,
        })
    }

    fn finish(
        &self,
        lambda: f64,
        k: usize,
        c: Vec<f64>,
        res: &FeshbachResult,
        fp_residual: f64,
        trace: Vec<f64>,
    ) -> FixedPoint {
        let n = self.h.dim();
        let mut psi = vec![0.0; n];
        for (cl, (b, u)) in c.iter().zip(self.basis.iter().zip(&res.solutions)) {
            linalg::axpy(*cl, b, &mut psi);
            linalg::axpy(-cl, u, &mut psi);
        }
        let hpsi = self.h.apply_vec(&psi);
        let mut r = hpsi;
        linalg::axpy(-lambda, &psi, &mut r);
        let eigen_residual = linalg::norm(&r) / linalg::norm(&psi);
        FixedPoint {
            energy: lambda,
            branch: k,
            coefficients: c,
            psi,
            fixed_point_residual: fp_residual,
            eigen_residual,
            trace,
        }
    }

    /// Lowest fixed point starting from `λ₀`.
    pub fn solve_fixed_point(&self, lambda0: f64) -> Result<FixedPoint> {
        self.solve_branch(0, lambda0)
    }

    /// Every fixed point below the bottom of `H⊥`, one per branch that
    /// crosses the diagonal.
    pub fn all_fixed_points(&self) -> Result<Vec<FixedPoint>> {
        let mut out = Vec::new();
        for k in 0..self.rank() {
            match self.solve_branch(k, self.php[(k.min(self.rank() - 1), k.min(self.rank() - 1))]) {
                Ok(fp) => out.push(fp),
                Err(Error::WindowExit { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(out)
    }

    /// Samples `min eig F_P(λ)` on an increasing list of `λ`.
    pub fn lowest_branch_samples(&self, lambdas: &[f64]) -> Result<Vec<f64>> {
        lambdas.iter().map(|&l| Ok(self.map(l)?.eigen().0[0])).collect()
    }
}

/// Summary of how close `PHP` is to `E(∞)P`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhpReport {
    /// `‖PHP - E(∞)P‖`.
    pub deviation: f64,
    /// `⟨Ψ_a, I_a Ψ_a⟩` for each block.
    pub diagonal_terms: Vec<(String, f64)>,
}

/// `‖PHP - E(∞)P‖` and the diagonal intercluster terms of each block.
pub fn php_diagnostics(
    spec: &SystemSpec,
    h: &dyn LinearOperator,
    p: &CutoffGroundBasis,
    e_inf: f64,
) -> Result<PhpReport> {
    let vecs = p.vectors();
    let r = vecs.len();
    let hv: Vec<Vec<f64>> = vecs.iter().map(|v| h.apply_vec(v)).collect();
    let m = DMatrix::from_fn(r, r, |i, j| {
        linalg::dot(&vecs[i], &hv[j]) - if i == j { e_inf } else { 0.0 }
    });
    let (vals, _) = linalg::sorted_eigen(0.5 * (&m + m.transpose()));
    let deviation = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut diagonal_terms = Vec::new();
    for b in &p.blocks {
        let Some(a) = &b.decomposition else { continue };
        let ia = crate::manybody::intercluster(spec, a)?;
        for v in &b.vectors {
            let val: f64 = v.iter().zip(&ia.diagonal).map(|(x, d)| x * x * d).sum();
            diagonal_terms.push((a.label(), val));
        }
    }
    Ok(PhpReport {
        deviation,
        diagonal_terms,
    })
}

/// Weight used to boost the resolvent: a smooth function of the electron
/// positions, with bounded first and second differences.
pub struct BoostWeight {
    pub values: Vec<f64>,
    /// Largest `|∇φ|` over the grid (forward differences).
    pub grad_max: f64,
    /// Largest `|Δφ|` over the grid (3-point stencil).
    pub laplacian_max: f64,
}

impl BoostWeight {
    /// Samples `φ(x_1, …, x_N)` on the tensor grid of a many-body operator.
    pub fn sample(h: &crate::manybody::ManyBodyOperator, phi: impl Fn(&[f64]) -> f64 + Sync) -> Self {
        let pts = h.grid.points();
        let n = h.axis_len();
        let nn = h.electrons;
        let dim = h.dimension();
        let values: Vec<f64> = (0..dim)
            .map(|i| {
                let c = h.coordinates(i);
                let x: Vec<f64> = c.iter().map(|&k| pts[k]).collect();
                phi(&x)
            })
            .collect();
        let hs = h.grid.spacing();
        let mut grad_max: f64 = 0.0;
        let mut lap_max: f64 = 0.0;
        for i in 0..dim {
            let c = h.coordinates(i);
            let mut g2 = 0.0;
            let mut lap = 0.0;
            let mut stride = n.pow(nn as u32 - 1);
            for &ce in c.iter().take(nn) {
                if ce + 1 < n {
                    g2 += ((values[i + stride] - values[i]) / hs).powi(2);
                }
                if ce > 0 && ce + 1 < n {
                    lap += (values[i + stride] - 2.0 * values[i] + values[i - stride]) / (hs * hs);
                }
                stride /= n.max(1);
            }
            grad_max = grad_max.max(g2.sqrt());
            lap_max = lap_max.max(lap.abs());
        }
        Self {
            values,
            grad_max,
            laplacian_max: lap_max,
        }
    }

    /// Constant weight.
    pub fn constant(dim: usize, c: f64) -> Self {
        Self {
            values: vec![c; dim],
            grad_max: 0.0,
            laplacian_max: 0.0,
        }
    }
}

/// Quintic smoothstep: 0 below 0, 1 above 1, C² in between.
pub fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoostedNorm {
    pub delta: f64,
    /// `‖(H_δ⊥ - E)⁻¹‖` estimate.
    pub norm: f64,
    /// Bottom of `H⊥` used for the admissibility test.
    pub perp_bottom: f64,
}

/// Estimates `‖e^{-δφ} A⁻¹ e^{δφ}‖` for `A = P⊥(H - E)P⊥ - E P`, the
/// resolvent of the boosted `H⊥` at `E` extended by `-1/E` on `Ran P`.
/// The weight must be constant on the support of every basis vector.
pub fn boosted_resolvent_norm(
    problem: &FeshbachProblem,
    weight: &BoostWeight,
    delta: f64,
    energy: f64,
    seed: u64,
) -> Result<BoostedNorm> {
    let n = problem.h.dim();
    if weight.values.len() != n {
        return Err(Error::BoostTooLarge("weight has the wrong dimension".into()));
    }
    if energy >= 0.0 {
        return Err(Error::BoostTooLarge(format!(
            "energy {energy} must be negative so that -E P is positive"
        )));
    }
    let gap = problem.perp_bottom - energy;
    if gap <= problem.margin() {
        return Err(Error::NotInvertible { margin: gap });
    }
    // The similarity perturbs the kinetic energy by δ∇φ·∇ + ½δ²|∇φ|² +
    // ½δΔφ; require the bounded part to stay below half the gap.
    let perturbation = 0.5 * delta * delta * weight.grad_max.powi(2) + 0.5 * delta * weight.laplacian_max;
    if perturbation >= 0.5 * gap.min(-energy) {
        return Err(Error::BoostTooLarge(format!(
            "δ = {delta}: weight perturbation {perturbation:.3e} exceeds half the gap {gap:.3e}"
        )));
    }
    for b in problem.basis() {
        let vals: Vec<f64> = b
            .iter()
            .zip(&weight.values)
            .filter(|(x, _)| x.abs() > 1e-14)
            .map(|(_, w)| *w)
            .collect();
        let (mn, mx) = vals
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        if mx - mn > 1e-12 {
            return Err(Error::BoostTooLarge(
                "weight is not constant on the support of P".into(),
            ));
        }
    }
    let plus: Vec<f64> = weight.values.iter().map(|w| (delta * w).exp()).collect();
    let minus: Vec<f64> = plus.iter().map(|e| 1.0 / e).collect();

    // A⁻¹ x = (H⊥-E)⁻¹ P⊥x - (1/E) P x.
    let apply_inv = |x: &[f64]| -> Result<Vec<f64>> {
        let mut y = problem.solve_perp(energy, x)?;
        for b in problem.basis() {
            let c = linalg::dot(b, x);
            linalg::axpy(-c / energy, b, &mut y);
        }
        if let Some(q) = problem.sector {
            // Outside the sector the extension is the identity scaled like P.
            let mut rest = x.to_vec();
            let qx = q.apply_vec(x);
            linalg::axpy(-1.0, &qx, &mut rest);
            linalg::axpy(-1.0 / energy, &rest, &mut y);
        }
        Ok(y)
    };
    let failure = std::sync::Mutex::new(None);
    // M = B^T B with B = e^{-δφ} A⁻¹ e^{δφ}; B^T = e^{δφ} A⁻¹ e^{-δφ}.
    let op = FnOperator {
        dim: n,
        norm: 1.0,
        f: |x: &[f64], y: &mut [f64]| {
            let step = || -> Result<Vec<f64>> {
                let t: Vec<f64> = x.iter().zip(&plus).map(|(a, b)| a * b).collect();
                let t = apply_inv(&t)?;
                let t: Vec<f64> = t.iter().zip(&minus).map(|(a, b)| a * b).collect();
                let t: Vec<f64> = t.iter().zip(&minus).map(|(a, b)| a * b).collect();
                let t = apply_inv(&t)?;
                Ok(t.iter().zip(&plus).map(|(a, b)| -a * b).collect())
            };
            match step() {
                Ok(v) => y.copy_from_slice(&v),
                Err(e) => {
                    *failure.lock().unwrap() = Some(e);
                    y.iter_mut().for_each(|v| *v = 0.0);
                }
            }
        },
    };
    let res = linalg::lanczos_lowest(
        &op,
        &LanczosOptions {
            k: 1,
            tol: 1e-8,
            subspace: 30,
            max_restarts: 200,
            seed,
        },
        None,
    );
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    let res = res.map_err(|e| Error::BoostTooLarge(format!("norm iteration failed: {e}")))?;
    let lam = -res.values[0];
    if !lam.is_finite() || lam <= 0.0 {
        return Err(Error::BoostTooLarge("norm iteration diverged".into()));
    }
    Ok(BoostedNorm {
        delta,
        norm: lam.sqrt(),
        perp_bottom: problem.perp_bottom,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn unit(n: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        v
    }

    #[test]
    fn two_by_two_closed_form() {
        let h = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 2.0]);
        let p = FeshbachProblem::new(&h, vec![unit(2, 0)], None).unwrap();
        for lambda in [-1.0, 0.0, 1.5] {
            let f = p.map(lambda).unwrap();
            assert!((f.f[(0, 0)] + 1.0 / (2.0 - lambda)).abs() < 1e-14);
        }
        let fp = p.solve_fixed_point(-1.0).unwrap();
        assert!((fp.energy - (1.0 - 2f64.sqrt())).abs() < 1e-12);
        assert!(fp.eigen_residual < 1e-10);
    }

    #[test]
    fn full_space_projection_is_identity_map() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 2.0]);
        let p = FeshbachProblem::new(&h, vec![unit(2, 0), unit(2, 1)], None).unwrap();
        // Complement is empty; its bottom is the large shift.
        let f = p.map(0.5).unwrap();
        assert!((&f.f - &h).abs().max() < 1e-14);
    }

    #[test]
    fn decoupled_diagonal_converges_in_one_step() {
        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 2.0, 3.0]));
        let p = FeshbachProblem::new(&h, vec![unit(3, 0)], None).unwrap();
        let fp = p.solve_fixed_point(0.0).unwrap();
        assert_eq!(fp.energy, -1.0);
        assert_eq!(fp.trace.len(), 2);
    }

    #[test]
    fn not_invertible_above_perp_bottom() {
        let h = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 2.0]);
        let p = FeshbachProblem::new(&h, vec![unit(2, 0)], None).unwrap();
        assert!(matches!(p.map(2.0), Err(Error::NotInvertible { .. })));
    }

    #[test]
    fn smoothstep_is_monotone() {
        assert_eq!(smoothstep(-1.0), 0.0);
        assert_eq!(smoothstep(2.0), 1.0);
        assert!((smoothstep(0.5) - 0.5).abs() < 1e-15);
    }
}
