//! Symmetric-group machinery: irreducible characters, character projectors
//! on tensor-grid spaces, stabilizer subgroups and branching rules.
//!
//! Permutations act on tensor-grid vectors by relabelling electrons:
//! `(T_π Ψ)(x_1, …, x_N) = Ψ(x_{π(1)}, …, x_{π(N)})`, which makes
//! `T_π T_ρ = T_{π∘ρ}`. Characters are real class functions, so the
//! projectors do not depend on whether `π` or `π⁻¹` labels the action.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, LinearOperator};
use crate::manybody::Decomposition;

/// Largest symmetric group for which character tables are built.
pub const MAX_ORDER: usize = 6;

/// A permutation of `0..N` in one-line notation: `pi[i]` is the image of `i`.
pub type Perm = Vec<usize>;

/// A partition in non-increasing order.
pub type Partition = Vec<usize>;

pub fn factorial(n: usize) -> u64 {
    (1..=n as u64).product()
}

pub fn identity(n: usize) -> Perm {
    (0..n).collect()
}

/// `(π∘ρ)(i) = π(ρ(i))`.
pub fn compose(pi: &[usize], rho: &[usize]) -> Perm {
    rho.iter().map(|&r| pi[r]).collect()
}

pub fn inverse(pi: &[usize]) -> Perm {
    let mut inv = vec![0; pi.len()];
    for (i, &p) in pi.iter().enumerate() {
        inv[p] = i;
    }
    inv
}

/// All permutations of `0..n` in lexicographic order.
pub fn all_permutations(n: usize) -> Vec<Perm> {
    let mut out = Vec::with_capacity(factorial(n) as usize);
    let mut p = identity(n);
    loop {
        out.push(p.clone());
        // Next lexicographic permutation.
        let Some(i) = (1..n).rev().find(|&i| p[i - 1] < p[i]) else {
            return out;
        };
        let j = (i..n).rev().find(|&j| p[j] > p[i - 1]).unwrap();
        p.swap(i - 1, j);
        p[i..].reverse();
    }
}

/// Cycle type as a partition.
pub fn cycle_type(pi: &[usize]) -> Partition {
    let mut seen = vec![false; pi.len()];
    let mut out = Vec::new();
    for s in 0..pi.len() {
        if seen[s] {
            continue;
        }
        let mut len = 0;
        let mut k = s;
        while !seen[k] {
            seen[k] = true;
            k = pi[k];
            len += 1;
        }
        out.push(len);
    }
    out.sort_unstable_by(|a, b| b.cmp(a));
    out
}

/// All partitions of `n`, in reverse lexicographic order starting at `(n)`.
pub fn partitions(n: usize) -> Vec<Partition> {
    fn rec(n: usize, max: usize, prefix: &mut Vec<usize>, out: &mut Vec<Partition>) {
        if n == 0 {
            out.push(prefix.clone());
            return;
        }
        for k in (1..=n.min(max)).rev() {
            prefix.push(k);
            rec(n - k, k, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, n, &mut Vec::new(), &mut out);
    out
}

/// Dimension of the irrep by the hook-length formula.
pub fn hook_dimension(lambda: &[usize]) -> u64 {
    let n: usize = lambda.iter().sum();
    let mut hooks: u64 = 1;
    for (i, &row) in lambda.iter().enumerate() {
        for j in 0..row {
            let arm = row - j - 1;
            let leg = lambda[i + 1..].iter().filter(|&&r| r > j).count();
            hooks *= (arm + leg + 1) as u64;
        }
    }
    factorial(n) / hooks
}

/// Murnaghan-Nakayama rule on beta-numbers: `χ^λ` on the class `μ`.
pub fn mn_character(lambda: &[usize], mu: &[usize]) -> i64 {
    let l = lambda.len();
    let beta: Vec<usize> = lambda.iter().enumerate().map(|(i, &p)| p + (l - 1 - i)).collect();
    mn_rec(&beta, mu)
}

fn mn_rec(beta: &[usize], mu: &[usize]) -> i64 {
    let Some((&r, rest)) = mu.split_first() else {
        return 1;
    };
    let mut total = 0;
    for (idx, &b) in beta.iter().enumerate() {
        if b < r {
            continue;
        }
        let target = b - r;
        if beta.contains(&target) {
            continue;
        }
        let between = beta.iter().filter(|&&c| c > target && c < b).count();
        let sign = if between % 2 == 0 { 1 } else { -1 };
        let mut next = beta.to_vec();
        next[idx] = target;
        total += sign * mn_rec(&next, rest);
    }
    total
}

/// Size `N!/z_μ` of the conjugacy class with cycle type `μ`.
pub fn class_size(mu: &[usize]) -> u64 {
    let n: usize = mu.iter().sum();
    let mut z: u64 = 1;
    let mut k = 0;
    while k < mu.len() {
        let part = mu[k];
        let mult = mu[k..].iter().take_while(|&&p| p == part).count();
        z *= (part as u64).pow(mult as u32) * factorial(mult);
        k += mult;
    }
    factorial(n) / z
}

/// Irreducible representation of `S_N`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymmetryType {
    pub diagram: Partition,
    pub dimension: u64,
    /// Character on each class of [`classes`]`(N)`, in that order.
    pub characters: Vec<i64>,
    /// At most two columns: admissible for spin-½ fermions.
    pub two_column: bool,
}

impl SymmetryType {
    pub fn order(&self) -> usize {
        self.diagram.iter().sum()
    }

    /// Character of a permutation.
    pub fn character(&self, pi: &[usize]) -> i64 {
        mn_character(&self.diagram, &cycle_type(pi))
    }

    pub fn label(&self) -> String {
        let parts: Vec<String> = self.diagram.iter().map(|p| p.to_string()).collect();
        format!("({})", parts.join(","))
    }

    pub fn trivial(n: usize) -> Self {
        Self::from_diagram(vec![n]).expect("valid diagram")
    }

    pub fn sign(n: usize) -> Self {
        Self::from_diagram(vec![1; n]).expect("valid diagram")
    }

    pub fn from_diagram(diagram: Partition) -> Result<Self> {
        if diagram.windows(2).any(|w| w[1] > w[0]) || diagram.contains(&0) {
            return Err(Error::InvalidInducedType(format!("{diagram:?} is not a partition")));
        }
        let n: usize = diagram.iter().sum();
        if n > MAX_ORDER {
            return Err(Error::ResourceLimit {
                what: "symmetric group order",
                requested: n as u128,
                cap: MAX_ORDER as u128,
            });
        }
        let characters = classes(n).iter().map(|mu| mn_character(&diagram, mu)).collect();
        Ok(Self {
            dimension: hook_dimension(&diagram),
            two_column: diagram.first().is_none_or(|&c| c <= 2),
            characters,
            diagram,
        })
    }
}

/// Conjugacy classes of `S_N` labelled by cycle type.
pub fn classes(n: usize) -> Vec<Partition> {
    partitions(n)
}

/// All irreps of `S_N` for `N ≤ 6`.
pub fn irreps(n: usize) -> Result<Vec<SymmetryType>> {
    if n > MAX_ORDER {
        return Err(Error::ResourceLimit {
            what: "symmetric group order",
            requested: n as u128,
            cap: MAX_ORDER as u128,
        });
    }
    partitions(n).into_iter().map(SymmetryType::from_diagram).collect()
}

/// Writes the character table as CSV: class index, cycle type, class size,
/// then one column per irrep.
pub fn write_character_table<W: Write>(n: usize, w: W) -> Result<()> {
    let types = irreps(n)?;
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["class".to_string(), "cycle_type".into(), "class_size".into()];
    header.extend(types.iter().map(|t| t.label()));
    wtr.write_record(&header)?;
    for (c, mu) in classes(n).iter().enumerate() {
        let mut row = vec![
            c.to_string(),
            format!("{mu:?}").replace(' ', ""),
            class_size(mu).to_string(),
        ];
        row.extend(types.iter().map(|t| t.characters[c].to_string()));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Index map of `T_π` on the tensor space of `electrons` copies of an
/// `axis`-point grid: `(T_π x)[i] = x[map[i]]`.
pub fn permutation_map(pi: &[usize], axis: usize, electrons: usize) -> Vec<u32> {
    let dim = axis.pow(electrons as u32);
    let strides: Vec<usize> = (0..electrons).map(|e| axis.pow((electrons - 1 - e) as u32)).collect();
    let mut map = vec![0u32; dim];
    map.par_chunks_mut(axis.max(1)).enumerate().for_each(|(row, chunk)| {
        let base = row * axis;
        let mut coords = vec![0usize; electrons];
        let mut rest = base;
        for e in (0..electrons).rev() {
            coords[e] = rest % axis;
            rest /= axis;
        }
        for (k, m) in chunk.iter_mut().enumerate() {
            coords[electrons - 1] = k;
            let src: usize = (0..electrons).map(|s| coords[pi[s]] * strides[s]).sum();
            *m = src as u32;
        }
    });
    map
}

/// `T_π` as an explicit relabelling.
#[derive(Debug, Clone)]
pub struct PermutationAction {
    pub pi: Perm,
    map: Vec<u32>,
}

impl PermutationAction {
    pub fn new(pi: Perm, axis: usize, electrons: usize) -> Self {
        let map = permutation_map(&pi, axis, electrons);
        Self { pi, map }
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (yi, &m) in y.iter_mut().zip(&self.map) {
            *yi = x[m as usize];
        }
    }

    pub fn apply_vec(&self, x: &[f64]) -> Vec<f64> {
        self.map.iter().map(|&m| x[m as usize]).collect()
    }
}

/// Character-sum projector `Σ_π w_π T_π`, applied matrix-free.
#[derive(Debug, Clone)]
pub struct CharacterProjector {
    terms: Vec<(f64, PermutationAction)>,
    dim: usize,
}

impl CharacterProjector {
    fn from_weights(weights: Vec<(Perm, f64)>, axis: usize, electrons: usize) -> Result<Self> {
        let dim = (axis as u128).pow(electrons as u32);
        if dim > u32::MAX as u128 {
            return Err(Error::ResourceLimit {
                what: "projector dimension",
                requested: dim,
                cap: u32::MAX as u128,
            });
        }
        let terms = weights
            .into_iter()
            .filter(|(_, w)| *w != 0.0)
            .map(|(p, w)| (w, PermutationAction::new(p, axis, electrons)))
            .collect();
        Ok(Self {
            terms,
            dim: dim as usize,
        })
    }

    pub fn rank_by_trace(&self) -> f64 {
        // tr T_π = axis^{#cycles(π)}
        let axis = (self.dim as f64).powf(1.0 / self.terms[0].1.pi.len() as f64).round();
        self.terms
            .iter()
            .map(|(w, a)| w * axis.powi(cycle_type(&a.pi).len() as i32))
            .sum()
    }

    pub fn apply_in_place(&self, x: &mut [f64]) {
        let y = self.apply_vec(x);
        x.copy_from_slice(&y);
    }

    /// Terms as `(weight, permutation)` pairs.
    pub fn terms(&self) -> impl Iterator<Item = (f64, &[usize])> {
        self.terms.iter().map(|(w, a)| (*w, a.pi.as_slice()))
    }
}

impl LinearOperator for CharacterProjector {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let chunk = 4096;
        y.par_chunks_mut(chunk).enumerate().for_each(|(c, yc)| {
            let base = c * chunk;
            yc.iter_mut().for_each(|v| *v = 0.0);
            for (w, act) in &self.terms {
                let m = &act.map[base..base + yc.len()];
                for (yi, &src) in yc.iter_mut().zip(m) {
                    *yi += w * x[src as usize];
                }
            }
        });
    }

    fn norm_estimate(&self) -> f64 {
        1.0
    }
}

/// `Q^σ = (d_σ/N!) Σ_π χ^σ(π⁻¹) T_π`.
pub fn projector(sigma: &SymmetryType, axis: usize) -> Result<CharacterProjector> {
    let n = sigma.order();
    let scale = sigma.dimension as f64 / factorial(n) as f64;
    let weights = all_permutations(n)
        .into_iter()
        .map(|p| {
            let w = scale * sigma.character(&inverse(&p)) as f64;
            (p, w)
        })
        .collect();
    CharacterProjector::from_weights(weights, axis, n)
}

/// Elements of the stabilizer `S(a) = Π_j S(A_j)`.
pub fn stabilizer(a: &Decomposition) -> Vec<Perm> {
    let n = a.electrons();
    let mut out = vec![identity(n)];
    for cluster in a.clusters() {
        if cluster.len() < 2 {
            continue;
        }
        let local = all_permutations(cluster.len());
        let mut next = Vec::with_capacity(out.len() * local.len());
        for base in &out {
            for lp in &local {
                let mut p = base.clone();
                for (i, &li) in lp.iter().enumerate() {
                    p[cluster[i]] = cluster[li];
                }
                next.push(p);
            }
        }
        out = next;
    }
    out
}

/// A tuple of irreps `α = (α_1, …, α_M)` of the cluster groups `S(A_j)`;
/// empty clusters carry the empty diagram.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InducedType {
    pub factors: Vec<Partition>,
}

impl InducedType {
    pub fn dimension(&self) -> u64 {
        self.factors.iter().map(|f| hook_dimension(f)).product()
    }

    pub fn validate(&self, a: &Decomposition) -> Result<()> {
        if self.factors.len() != a.clusters().len() {
            return Err(Error::InvalidInducedType(format!(
                "{} factors for {} clusters",
                self.factors.len(),
                a.clusters().len()
            )));
        }
        for (f, c) in self.factors.iter().zip(a.clusters()) {
            if f.iter().sum::<usize>() != c.len() || f.windows(2).any(|w| w[1] > w[0]) {
                return Err(Error::InvalidInducedType(format!(
                    "{f:?} is not a diagram of a cluster of size {}",
                    c.len()
                )));
            }
        }
        Ok(())
    }

    /// `χ^α(π)` for `π ∈ S(a)`.
    pub fn character(&self, a: &Decomposition, pi: &[usize]) -> i64 {
        self.factors
            .iter()
            .zip(a.clusters())
            .map(|(f, cluster)| {
                if cluster.is_empty() {
                    return 1;
                }
                let local: Perm = cluster
                    .iter()
                    .map(|&e| cluster.iter().position(|&c| c == pi[e]).expect("π stabilizes a"))
                    .collect();
                mn_character(f, &cycle_type(&local))
            })
            .product()
    }

    pub fn label(&self) -> String {
        let parts: Vec<String> = self
            .factors
            .iter()
            .map(|f| {
                let inner: Vec<String> = f.iter().map(|p| p.to_string()).collect();
                format!("({})", inner.join(","))
            })
            .collect();
        parts.join("x")
    }

    /// All induced types of a decomposition.
    pub fn all(a: &Decomposition) -> Vec<InducedType> {
        let mut out = vec![Vec::new()];
        for c in a.clusters() {
            let options = if c.is_empty() {
                vec![Vec::new()]
            } else {
                partitions(c.len())
            };
            let mut next = Vec::new();
            for prefix in &out {
                for o in &options {
                    let mut p: Vec<Partition> = prefix.clone();
                    p.push(o.clone());
                    next.push(p);
                }
            }
            out = next;
        }
        out.into_iter().map(|factors| InducedType { factors }).collect()
    }
}

/// `Q_a^α = (d_α/|S(a)|) Σ_{π∈S(a)} χ^α(π⁻¹) T_π`.
pub fn subgroup_projector(a: &Decomposition, alpha: &InducedType, axis: usize) -> Result<CharacterProjector> {
    alpha.validate(a)?;
    let group = stabilizer(a);
    let scale = alpha.dimension() as f64 / group.len() as f64;
    let weights = group
        .into_iter()
        .map(|p| {
            let w = scale * alpha.character(a, &inverse(&p)) as f64;
            (p, w)
        })
        .collect();
    CharacterProjector::from_weights(weights, axis, a.electrons())
}

/// Projector of a single cluster factor `Q_{A_j}^{α_j}` on the full space.
pub fn cluster_factor_projector(
    a: &Decomposition,
    alpha: &InducedType,
    j: usize,
    axis: usize,
) -> Result<CharacterProjector> {
    alpha.validate(a)?;
    // Only permutations inside cluster j, weighted by χ^{α_j}.
    let cluster = &a.clusters()[j];
    let n = a.electrons();
    let local = all_permutations(cluster.len().max(1));
    let d = hook_dimension(&alpha.factors[j]) as f64;
    let order = local.len() as f64;
    let weights = if cluster.is_empty() {
        vec![(identity(n), 1.0)]
    } else {
        local
            .into_iter()
            .map(|lp| {
                let mut p = identity(n);
                for (i, &li) in lp.iter().enumerate() {
                    p[cluster[i]] = cluster[li];
                }
                let w = d / order * mn_character(&alpha.factors[j], &cycle_type(&inverse(&lp))) as f64;
                (p, w)
            })
            .collect()
    };
    CharacterProjector::from_weights(weights, axis, n)
}

/// Irreducible constituent of a restriction with its multiplicity.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Branch {
    pub alpha: InducedType,
    pub multiplicity: u64,
}

/// Branching of `σ` restricted to `S(a)` by character inner products.
pub fn induced_types(sigma: &SymmetryType, a: &Decomposition) -> Result<Vec<Branch>> {
    if sigma.order() != a.electrons() {
        return Err(Error::InvalidInducedType(format!(
            "σ = {} acts on {} labels, the decomposition on {}",
            sigma.label(),
            sigma.order(),
            a.electrons()
        )));
    }
    let group = stabilizer(a);
    let chi_sigma: Vec<i64> = group.iter().map(|p| sigma.character(p)).collect();
    let mut out = Vec::new();
    for alpha in InducedType::all(a) {
        let inner: i64 = group
            .iter()
            .zip(&chi_sigma)
            .map(|(p, cs)| cs * alpha.character(a, p))
            .sum();
        let m = inner / group.len() as i64;
        debug_assert_eq!(inner % group.len() as i64, 0);
        if m > 0 {
            out.push(Branch {
                alpha,
                multiplicity: m as u64,
            });
        }
    }
    Ok(out)
}

/// Marks the `≺≺` types: those whose cluster energy attains the minimum
/// over all candidates within `tol`. Every candidate needs an energy.
pub fn flag_minimizers(energies: &[Option<f64>], tol: f64) -> Result<Vec<bool>> {
    let vals: Vec<f64> = energies
        .iter()
        .enumerate()
        .map(|(i, e)| e.ok_or_else(|| Error::DependencyMissing(format!("cluster ground energy for candidate {i}"))))
        .collect::<Result<_>>()?;
    let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(vals.iter().map(|v| (v - min).abs() <= tol).collect())
}

/// Squared norm `‖Q^σ Ψ‖²` and the closed form
/// `(d_σ/N!) (|S(a)|/d_α) m_α ‖Ψ‖²` for `Ψ ∈ Ran Q_a^α` whose permuted
/// copies outside `S(a)` are orthogonal to it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormCheck {
    pub computed: f64,
    pub predicted: f64,
    pub max_overlap: f64,
}

pub fn norm_after_projection(
    psi: &[f64],
    sigma: &SymmetryType,
    a: &Decomposition,
    alpha: &InducedType,
    axis: usize,
) -> Result<NormCheck> {
    alpha.validate(a)?;
    let n = a.electrons();
    let norm2 = linalg::dot(psi, psi);
    let mut max_overlap: f64 = 0.0;
    for p in all_permutations(n) {
        if a.stabilizes(&p) {
            continue;
        }
        let t = PermutationAction::new(p, axis, n).apply_vec(psi);
        max_overlap = max_overlap.max(linalg::dot(psi, &t).abs() / norm2);
    }
    if max_overlap > 1e-8 {
        return Err(Error::SupportOverlap { overlap: max_overlap });
    }
    let q = projector(sigma, axis)?;
    let qpsi = q.apply_vec(psi);
    let computed = linalg::dot(&qpsi, &qpsi);
    let m = induced_types(sigma, a)?
        .into_iter()
        .find(|b| b.alpha == *alpha)
        .map_or(0, |b| b.multiplicity);
    let predicted = sigma.dimension as f64 / factorial(n) as f64 * stabilizer(a).len() as f64
        / alpha.dimension() as f64
        * m as f64
        * norm2;
    Ok(NormCheck {
        computed,
        predicted,
        max_overlap,
    })
}

/// Condition (D) on a computed eigenspace: it carries exactly one copy of
/// `α`.
pub fn condition_d_holds(eigenspace_dim: usize, alpha: &InducedType) -> bool {
    eigenspace_dim as u64 == alpha.dimension()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random_vector;

    #[test]
    fn small_group_dimensions() {
        let d2: Vec<u64> = irreps(2).unwrap().iter().map(|t| t.dimension).collect();
        assert_eq!(d2, vec![1, 1]);
        let d3: Vec<u64> = irreps(3).unwrap().iter().map(|t| t.dimension).collect();
        assert_eq!(d3, vec![1, 2, 1]);
        let d4: Vec<u64> = irreps(4).unwrap().iter().map(|t| t.dimension).collect();
        assert_eq!(d4, vec![1, 3, 2, 3, 1]);
        for n in 1..=6 {
            let s: u64 = irreps(n).unwrap().iter().map(|t| t.dimension.pow(2)).sum();
            assert_eq!(s, factorial(n));
        }
        assert!(matches!(irreps(7), Err(Error::ResourceLimit { .. })));
    }

    #[test]
    fn regular_representation_oracle() {
        // Multiplicity of each irrep in the regular representation equals
        // its dimension: (1/N!) Σ_π χ_reg(π) χ(π) with χ_reg = N! δ_id.
        for n in 2..=5 {
            for t in irreps(n).unwrap() {
                let id_class = classes(n).iter().position(|c| c.iter().all(|&p| p == 1)).unwrap();
                assert_eq!(t.characters[id_class] as u64, t.dimension);
            }
        }
    }

    #[test]
    fn character_orthogonality() {
        for n in 2..=6 {
            let cls = classes(n);
            let types = irreps(n).unwrap();
            for s in &types {
                for t in &types {
                    let ip: i64 = cls
                        .iter()
                        .enumerate()
                        .map(|(c, mu)| class_size(mu) as i64 * s.characters[c] * t.characters[c])
                        .sum();
                    let expect = if s == t { factorial(n) as i64 } else { 0 };
                    assert_eq!(ip, expect);
                }
            }
        }
    }

    #[test]
    fn composition_law() {
        let axis = 3;
        let x = random_vector(27, 1);
        let perms = all_permutations(3);
        for p in &perms {
            for r in &perms {
                let tp = PermutationAction::new(p.clone(), axis, 3);
                let tr = PermutationAction::new(r.clone(), axis, 3);
                let tpr = PermutationAction::new(compose(p, r), axis, 3);
                assert_eq!(tp.apply_vec(&tr.apply_vec(&x)), tpr.apply_vec(&x));
            }
            let y = PermutationAction::new(p.clone(), axis, 3).apply_vec(&x);
            assert!((linalg::norm(&y) - linalg::norm(&x)).abs() < 1e-14);
        }
    }

    #[test]
    fn antisymmetrizer_kills_symmetric_vectors() {
        let sign = SymmetryType::sign(2);
        let q = projector(&sign, 4).unwrap();
        let x = random_vector(16, 2);
        let swap = PermutationAction::new(vec![1, 0], 4, 2);
        let sym: Vec<f64> = x.iter().zip(swap.apply_vec(&x)).map(|(a, b)| a + b).collect();
        assert!(linalg::norm(&q.apply_vec(&sym)) < 1e-15);
    }

    #[test]
    fn standard_type_trace_on_three_point_grid() {
        let std3 = SymmetryType::from_diagram(vec![2, 1]).unwrap();
        let q = projector(&std3, 3).unwrap();
        let dense = linalg::to_dense(&q);
        let trace = dense.trace();
        // Explicit diagonalization of the projector: rank counts the
        // eigenvalues at 1.
        let (vals, _) = linalg::sorted_eigen(dense);
        let rank = vals.iter().filter(|v| (*v - 1.0).abs() < 1e-10).count();
        assert!((trace - rank as f64).abs() < 1e-10);
        assert_eq!(rank % 2, 0);
        assert!((q.rank_by_trace() - trace).abs() < 1e-10);
        // 27 = 10·1 (trivial) + 8·2 (standard) + 1·1 (sign)
        assert_eq!(rank, 16);
    }

    #[test]
    fn branching_of_standard_into_s2() {
        let a = Decomposition::from_clusters(&[vec![0, 1], vec![2]], &[2, 1]).unwrap();
        let std3 = SymmetryType::from_diagram(vec![2, 1]).unwrap();
        let br = induced_types(&std3, &a).unwrap();
        assert_eq!(br.len(), 2);
        assert!(br.iter().all(|b| b.multiplicity == 1));
        let total: u64 = br.iter().map(|b| b.multiplicity * b.alpha.dimension()).sum();
        assert_eq!(total, std3.dimension);
    }

    #[test]
    fn trivial_stabilizer_gives_identity() {
        let a = Decomposition::from_clusters(&[vec![0], vec![1]], &[1, 1]).unwrap();
        let alpha = InducedType {
            factors: vec![vec![1], vec![1]],
        };
        let q = subgroup_projector(&a, &alpha, 5).unwrap();
        let x = random_vector(25, 3);
        assert_eq!(q.apply_vec(&x), x);
        let bad = InducedType {
            factors: vec![vec![2], vec![1]],
        };
        assert!(matches!(
            subgroup_projector(&a, &bad, 5),
            Err(Error::InvalidInducedType(_))
        ));
    }

    #[test]
    fn minimizer_flags_need_energies() {
        assert_eq!(
            flag_minimizers(&[Some(1.0), Some(1.0 + 1e-9), Some(2.0)], 1e-8).unwrap(),
            vec![true, true, false]
        );
        assert!(matches!(
            flag_minimizers(&[Some(1.0), None], 1e-8),
            Err(Error::DependencyMissing(_))
        ));
    }
}
