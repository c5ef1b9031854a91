//! Shared linear-algebra substrate: the operator trait, Krylov solvers and
//! a handful of vector kernels.
//!
//! Everything here works on plain `&[f64]` slices so that many-body grid
//! vectors (tens of thousands of entries) never round-trip through nalgebra.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// A real symmetric operator that can be applied matrix-free.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;

    /// `y = A x`. `y` is overwritten.
    fn apply(&self, x: &[f64], y: &mut [f64]);

    /// An upper bound on the operator norm, used to scale tolerances.
    fn norm_estimate(&self) -> f64;

    fn apply_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.apply(x, &mut y);
        y
    }
}

impl LinearOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.nrows();
        for (i, yi) in y.iter_mut().enumerate().take(n) {
            let mut acc = 0.0;
            for (j, xj) in x.iter().enumerate() {
                acc += self[(i, j)] * xj;
            }
            *yi = acc;
        }
    }

    fn norm_estimate(&self) -> f64 {
        (0..self.ncols())
            .map(|j| self.column(j).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Wraps a closure as an operator.
pub struct FnOperator<F: Fn(&[f64], &mut [f64]) + Sync> {
    pub dim: usize,
    pub norm: f64,
    pub f: F,
}

impl<F: Fn(&[f64], &mut [f64]) + Sync> LinearOperator for FnOperator<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (self.f)(x, y)
    }
    fn norm_estimate(&self) -> f64 {
        self.norm
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(alpha: f64, x: &mut [f64]) {
    for v in x.iter_mut() {
        *v *= alpha;
    }
}

pub fn normalize(x: &mut [f64]) -> f64 {
    let n = norm(x);
    if n > 0.0 {
        scale(1.0 / n, x);
    }
    n
}

/// Removes the components of `v` along an orthonormal set (two passes of
/// classical Gram-Schmidt).
pub fn orthogonalize_against(v: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for b in basis {
            let c = dot(b, v);
            axpy(-c, b, v);
        }
    }
}

/// Largest deviation of the Gram matrix of `basis` from the identity.
pub fn gram_deviation(basis: &[Vec<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, a) in basis.iter().enumerate() {
        for (j, b) in basis.iter().enumerate().skip(i) {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot(a, b) - target).abs());
        }
    }
    worst
}

/// Deterministic pseudo-random vector with entries in [-1, 1].
pub fn random_vector(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Dense matrix of a (small) operator, assembled column by column.
pub fn to_dense(op: &dyn LinearOperator) -> DMatrix<f64> {
    let n = op.dim();
    let mut m = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        op.apply(&e, &mut col);
        for i in 0..n {
            m[(i, j)] = col[i];
        }
        e[j] = 0.0;
    }
    m
}

/// Eigenvalues ascending with the matching eigenvector columns.
pub fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Projection onto an invariant subspace, applied in place.
pub type Restriction<'a> = &'a (dyn Fn(&mut [f64]) + Sync);

#[derive(Debug, Clone, Copy)]
pub struct LanczosOptions {
    pub k: usize,
    /// Residual tolerance relative to `norm_estimate()`.
    pub tol: f64,
    pub subspace: usize,
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            k: 1,
            tol: 1e-9,
            subspace: 40,
            max_restarts: 400,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub matvecs: usize,
}

/// Thick-restart Lanczos for the lowest `k` eigenpairs of a symmetric
/// operator, with full reorthogonalization.
///
/// `restrict`, when given, is an orthogonal projection `Π`; the iteration
/// then computes eigenpairs of the compression `Π op Π` on its range.
pub fn lanczos_lowest(
    op: &dyn LinearOperator,
    opts: &LanczosOptions,
    restrict: Option<Restriction<'_>>,
) -> Result<EigenPairs> {
    let n = op.dim();
    let k = opts.k.max(1);
    let m = opts.subspace.max(2 * k + 8).min(n);
    let scale_ref = op.norm_estimate().max(f64::MIN_POSITIVE);
    let tol = opts.tol * scale_ref;

    let project = |v: &mut [f64]| {
        if let Some(r) = restrict {
            r(v)
        }
    };

    let mut start = random_vector(n, opts.seed);
    project(&mut start);
    if normalize(&mut start) < 1e-300 {
        return Err(Error::InvalidBasis { deviation: 1.0 });
    }

    let mut basis: Vec<Vec<f64>> = vec![start];
    let mut t = DMatrix::<f64>::zeros(m, m);
    let mut w = vec![0.0; n];
    let mut matvecs = 0usize;
    let mut best_residual = f64::INFINITY;

    for _restart in 0..opts.max_restarts {
        let mut residual_vec: Vec<f64>;
        let mut exhausted = false;
        loop {
            let last = basis.len() - 1;
            op.apply(&basis[last], &mut w);
            matvecs += 1;
            project(&mut w);
            let mut coeff = vec![0.0; basis.len()];
            for _ in 0..2 {
                for (i, b) in basis.iter().enumerate() {
                    let c = dot(b, &w);
                    coeff[i] += c;
                    axpy(-c, b, &mut w);
                }
            }
            for (i, c) in coeff.iter().enumerate() {
                t[(i, last)] = *c;
                t[(last, i)] = *c;
            }
            let beta = norm(&w);
            residual_vec = w.clone();
            if beta <= 1e-13 * scale_ref {
                exhausted = true;
                break;
            }
            if basis.len() == m {
                break;
            }
            let mut next = w.clone();
            scale(1.0 / beta, &mut next);
            basis.push(next);
        }

        let s = basis.len();
        let small = t.view((0, 0), (s, s)).into_owned();
        let (theta, y) = sorted_eigen(small);
        let beta = norm(&residual_vec);
        let want = k.min(s);
        let estimates: Vec<f64> = (0..want).map(|i| beta * y[(s - 1, i)].abs()).collect();
        let worst = estimates.iter().cloned().fold(0.0, f64::max);
        best_residual = best_residual.min(worst);

        if (worst <= tol && want == k) || exhausted {
            if want < k {
                return Err(Error::ConvergenceFailure {
                    iterations: matvecs,
                    residual: f64::INFINITY,
                });
            }
            let mut vectors = Vec::with_capacity(k);
            let mut residuals = Vec::with_capacity(k);
            for i in 0..k {
                let mut x = vec![0.0; n];
                for (j, b) in basis.iter().enumerate() {
                    axpy(y[(j, i)], b, &mut x);
                }
                normalize(&mut x);
                let mut ax = vec![0.0; n];
                op.apply(&x, &mut ax);
                let lambda = dot(&x, &ax);
                axpy(-lambda, &x, &mut ax);
                project(&mut ax);
                residuals.push(norm(&ax));
                vectors.push(x);
            }
            let values = (0..k).map(|i| theta[i]).collect();
            return Ok(EigenPairs {
                values,
                vectors,
                residuals,
                matvecs,
            });
        }

        // Thick restart: keep the lowest Ritz vectors and continue from the
        // residual direction, which is already orthogonal to them.
        let keep = (k + (m - k) / 2).min(s - 1).max(k);
        let mut kept = Vec::with_capacity(keep + 1);
        for i in 0..keep {
            let mut x = vec![0.0; n];
            for (j, b) in basis.iter().enumerate() {
                axpy(y[(j, i)], b, &mut x);
            }
            kept.push(x);
        }
        t.fill(0.0);
        for (i, th) in theta.iter().take(keep).enumerate() {
            t[(i, i)] = *th;
        }
        let mut next = residual_vec;
        orthogonalize_against(&mut next, &kept);
        scale(1.0 / beta, &mut next);
        kept.push(next);
        basis = kept;
    }
    Err(Error::ConvergenceFailure {
        iterations: matvecs,
        residual: best_residual,
    })
}

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final residual relative to `|b|`.
    pub residual: f64,
}

/// Conjugate gradients for a symmetric positive definite system. With a
/// restriction the solve runs inside its range (the right-hand side is
/// projected first and every search direction is re-projected).
pub fn conjugate_gradient(
    op: &dyn LinearOperator,
    b: &[f64],
    tol: f64,
    max_iter: usize,
    restrict: Option<Restriction<'_>>,
) -> Result<CgOutcome> {
    let n = b.len();
    let project = |v: &mut [f64]| {
        if let Some(r) = restrict {
            r(v)
        }
    };
    let mut r = b.to_vec();
    project(&mut r);
    let bnorm = norm(&r);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(CgOutcome {
            x,
            iterations: 0,
            residual: 0.0,
        });
    }
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    for it in 0..max_iter {
        op.apply(&p, &mut ap);
        project(&mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::NotInvertible {
                margin: pap / dot(&p, &p),
            });
        }
        let alpha = rr / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        // Periodic residual replacement keeps the recursion honest.
        if it % 50 == 49 {
            op.apply(&x, &mut ap);
            project(&mut ap);
            for i in 0..n {
                r[i] = b[i] - ap[i];
            }
            project(&mut r);
        }
        let rr_new = dot(&r, &r);
        let rel = rr_new.sqrt() / bnorm;
        if rel <= tol {
            project(&mut x);
            return Ok(CgOutcome {
                x,
                iterations: it + 1,
                residual: rel,
            });
        }
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        project(&mut p);
        rr = rr_new;
    }
    Err(Error::ConvergenceFailure {
        iterations: max_iter,
        residual: rr.sqrt() / bnorm,
    })
}

/// Power-iteration estimate of `max |eig|` of a symmetric operator.
pub fn power_norm(op: &dyn LinearOperator, iterations: usize, seed: u64) -> f64 {
    let n = op.dim();
    let mut v = random_vector(n, seed);
    normalize(&mut v);
    let mut w = vec![0.0; n];
    let mut estimate = 0.0;
    for _ in 0..iterations {
        op.apply(&v, &mut w);
        let nw = norm(&w);
        estimate = nw;
        if nw == 0.0 {
            break;
        }
        v.copy_from_slice(&w);
        scale(1.0 / nw, &mut v);
    }
    estimate
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                2.0
            } else if i.abs_diff(j) == 1 {
                -1.0
            } else {
                0.0
            }
        })
    }

    #[test]
    fn lanczos_matches_dense_on_laplacian() {
        let a = laplacian(300);
        let opts = LanczosOptions {
            k: 4,
            tol: 1e-11,
            ..Default::default()
        };
        let res = lanczos_lowest(&a, &opts, None).unwrap();
        let (dense, _) = sorted_eigen(a.clone());
        for (i, (v, d)) in res.values.iter().zip(dense.iter()).take(4).enumerate() {
            assert!((v - d).abs() < 1e-10, "{i}");
            assert!(res.residuals[i] < 1e-9);
        }
    }

    #[test]
    fn lanczos_diagonal_identity_case() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 1.0, 2.0]));
        let opts = LanczosOptions {
            k: 2,
            ..Default::default()
        };
        let res = lanczos_lowest(&a, &opts, None).unwrap();
        assert!((res.values[0] - 1.0).abs() < 1e-14);
        assert!((res.values[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn cg_solves_spd_system() {
        let a = laplacian(100);
        let b = random_vector(100, 3);
        let out = conjugate_gradient(&a, &b, 1e-12, 1000, None).unwrap();
        let ax = a.apply_vec(&out.x);
        let err: f64 = ax.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9);
    }

    #[test]
    fn restricted_lanczos_stays_in_subspace() {
        // Even vectors of a reflection-symmetric operator.
        let n = 101;
        let a = laplacian(n);
        let even = |v: &mut [f64]| {
            let n = v.len();
            for i in 0..n / 2 {
                let s = 0.5 * (v[i] + v[n - 1 - i]);
                v[i] = s;
                v[n - 1 - i] = s;
            }
        };
        let opts = LanczosOptions {
            k: 2,
            tol: 1e-11,
            ..Default::default()
        };
        let res = lanczos_lowest(&a, &opts, Some(&even)).unwrap();
        let (dense, _) = sorted_eigen(a);
        assert!((res.values[0] - dense[0]).abs() < 1e-10);
        assert!((res.values[1] - dense[2]).abs() < 1e-10);
    }
}
