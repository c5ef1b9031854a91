//! Born-Oppenheimer Hamiltonians on tensor-product grids, cluster
//! Hamiltonians, intercluster interactions and decompositions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{build_grid, soft_kernel, Grid, PotentialKind, PotentialSpec};
use crate::linalg::LinearOperator;

/// Default cap on stored nonzeros of an assembled operator.
pub const DEFAULT_NNZ_CAP: u128 = 20_000_000;

/// Default cap on the number of enumerated decompositions.
pub const DECOMPOSITION_CAP: u128 = 1_000_000;

/// A clamped nucleus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Nucleus {
    pub position: [f64; 3],
    pub charge: u32,
    /// Nuclear mass in electron masses (only used by the adiabatic
    /// correction).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass: Option<f64>,
    /// Effective charge seen by electrons and by the other nuclei when it
    /// differs from the integer charge (used to rig level crossings).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strength: Option<f64>,
}

impl Nucleus {
    pub fn new(x: f64, charge: u32) -> Self {
        Self {
            position: [x, 0.0, 0.0],
            charge,
            mass: None,
            strength: None,
        }
    }

    pub fn effective_charge(&self) -> f64 {
        self.strength.unwrap_or(self.charge as f64)
    }
}

/// Discretization mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Mode {
    /// Each electron lives on the same one-dimensional grid.
    Line { grid: Grid },
    /// One electron, radial reduced equation on an offset grid.
    Radial { grid: Grid },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub nuclei: Vec<Nucleus>,
    pub electrons: usize,
    pub potential: PotentialSpec,
    #[serde(default = "unit_coupling")]
    pub coupling: f64,
    #[serde(flatten)]
    pub mode: Mode,
}

fn unit_coupling() -> f64 {
    1.0
}

impl SystemSpec {
    /// Two soft-Coulomb hydrogen analogues at `±r/2` on the default grid of
    /// 201 points on [-25, 25].
    pub fn hydrogen_pair(r: f64) -> Self {
        Self::hydrogen_pair_on(r, build_grid(201, (-25.0, 25.0)).expect("static grid"))
    }

    pub fn hydrogen_pair_on(r: f64, grid: Grid) -> Self {
        let c = grid.midpoint();
        Self {
            nuclei: vec![Nucleus::new(c - 0.5 * r, 1), Nucleus::new(c + 0.5 * r, 1)],
            electrons: 2,
            potential: PotentialSpec::soft_coulomb(1.0).expect("positive softening"),
            coupling: 1.0,
            mode: Mode::Line { grid },
        }
    }

    /// A single soft-Coulomb well of charge `z` holding `electrons`
    /// electrons at the grid midpoint.
    pub fn single_well(grid: Grid, z: u32, electrons: usize) -> Self {
        Self {
            nuclei: vec![Nucleus::new(grid.midpoint(), z)],
            electrons,
            potential: PotentialSpec::soft_coulomb(1.0).expect("positive softening"),
            coupling: 1.0,
            mode: Mode::Line { grid },
        }
    }

    /// Radial hydrogen-like problem in the given angular momentum channel.
    pub fn radial_hydrogen(n: usize, r_max: f64, ell: u32) -> Result<Self> {
        Ok(Self {
            nuclei: vec![Nucleus {
                position: [0.0; 3],
                charge: 1,
                mass: None,
                strength: None,
            }],
            electrons: 1,
            potential: PotentialSpec::coulomb_radial(ell),
            coupling: 1.0,
            mode: Mode::Radial {
                grid: Grid::radial(n, r_max)?,
            },
        })
    }

    pub fn grid(&self) -> &Grid {
        match &self.mode {
            Mode::Line { grid } | Mode::Radial { grid } => grid,
        }
    }

    pub fn is_radial(&self) -> bool {
        matches!(self.mode, Mode::Radial { .. })
    }

    pub fn charges(&self) -> Vec<u32> {
        self.nuclei.iter().map(|n| n.charge).collect()
    }

    /// `Σ Z_j = N`.
    pub fn is_neutral(&self) -> bool {
        self.nuclei.iter().map(|n| n.charge as usize).sum::<usize>() == self.electrons
    }

    /// Tensor-space dimension `n^N`.
    pub fn dimension(&self) -> Result<usize> {
        let n = self.grid().len() as u128;
        let dim = n
            .checked_pow(self.electrons as u32)
            .filter(|d| *d <= usize::MAX as u128)
            .ok_or(Error::ResourceLimit {
                what: "dimension",
                requested: u128::MAX,
                cap: usize::MAX as u128,
            })?;
        Ok(dim as usize)
    }

    /// Separation between nuclei `i` and `j`.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (&self.nuclei[i].position, &self.nuclei[j].position);
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
    }

    /// Smallest internuclear distance.
    pub fn min_separation(&self) -> f64 {
        let m = self.nuclei.len();
        let mut best = f64::INFINITY;
        for i in 0..m {
            for j in i + 1..m {
                best = best.min(self.distance(i, j));
            }
        }
        best
    }

    /// Internuclear repulsion `Σ_{i<j} e² Z_i Z_j k(|y_i - y_j|)` with the
    /// kernel used for the electron-electron interaction.
    pub fn nuclear_repulsion(&self) -> f64 {
        let a = self.potential.interaction_softening();
        let m = self.nuclei.len();
        let mut total = 0.0;
        for i in 0..m {
            for j in i + 1..m {
                total += self.coupling
                    * self.nuclei[i].effective_charge()
                    * self.nuclei[j].effective_charge()
                    * soft_kernel(self.distance(i, j), a);
            }
        }
        total
    }

    /// Copy with nucleus positions replaced by `x` (line mode).
    pub fn with_positions(&self, xs: &[f64]) -> Self {
        let mut s = self.clone();
        for (n, &x) in s.nuclei.iter_mut().zip(xs) {
            n.position = [x, 0.0, 0.0];
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        self.potential.validate()?;
        if self.nuclei.is_empty() {
            return Err(Error::InvalidSystem("at least one nucleus is required".into()));
        }
        if self.electrons == 0 {
            return Err(Error::InvalidSystem("at least one electron is required".into()));
        }
        if !(self.coupling.is_finite()) {
            return Err(Error::InvalidSystem("coupling must be finite".into()));
        }
        for n in &self.nuclei {
            if n.position.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidSystem("non-finite nuclear position".into()));
            }
            if let Some(m) = n.mass {
                if !(m > 0.0) {
                    return Err(Error::InvalidSystem("nuclear masses must be positive".into()));
                }
            }
        }
        if self.min_separation() == 0.0 {
            return Err(Error::InvalidSystem("coincident nuclei".into()));
        }
        match &self.mode {
            Mode::Line { .. } => {
                if self.nuclei.iter().any(|n| n.position[1] != 0.0 || n.position[2] != 0.0) {
                    return Err(Error::InvalidSystem("line mode places nuclei on the x axis".into()));
                }
                if matches!(self.potential.kind, PotentialKind::CoulombRadial { .. }) {
                    return Err(Error::InvalidSystem(
                        "the radial Coulomb potential needs radial mode".into(),
                    ));
                }
            }
            Mode::Radial { .. } => {
                if self.electrons != 1 || self.nuclei.len() != 1 {
                    return Err(Error::InvalidSystem(
                        "radial mode supports one electron and one nucleus".into(),
                    ));
                }
                if !matches!(self.potential.kind, PotentialKind::CoulombRadial { .. }) {
                    return Err(Error::InvalidSystem(
                        "radial mode needs the coulomb_radial potential".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Attraction of one electron to nucleus `j`, sampled on the grid and
    /// including the coupling.
    fn attraction(&self, j: usize) -> Vec<f64> {
        let y = self.nuclei[j].position[0];
        let z = self.nuclei[j].effective_charge();
        self.grid()
            .points()
            .iter()
            .map(|&x| {
                let u = if self.is_radial() { x } else { x - y };
                self.coupling * self.potential.one_body(u, z)
            })
            .collect()
    }

    fn centrifugal(&self) -> Vec<f64> {
        self.grid()
            .points()
            .iter()
            .map(|&r| self.potential.centrifugal(r))
            .collect()
    }

    fn pair_table(&self) -> Vec<f64> {
        let pts = self.grid().points();
        let a = self.potential.interaction_softening();
        let n = pts.len();
        let mut t = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                t[i * n + j] = self.coupling * soft_kernel(pts[i] - pts[j], a);
            }
        }
        t
    }
}

/// A partition of the electron labels `0..N` into clusters attached to the
/// nuclei.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Decomposition {
    /// `assignment[i]` is the nucleus that electron `i` belongs to.
    assignment: Vec<usize>,
    clusters: Vec<Vec<usize>>,
    is_atomic: bool,
}

impl Decomposition {
    pub fn new(assignment: Vec<usize>, charges: &[u32]) -> Result<Self> {
        let m = charges.len();
        if let Some(&bad) = assignment.iter().find(|&&c| c >= m) {
            return Err(Error::InvalidDecomposition(format!(
                "cluster label {bad} out of range for {m} nuclei"
            )));
        }
        let mut clusters = vec![Vec::new(); m];
        for (e, &c) in assignment.iter().enumerate() {
            clusters[c].push(e);
        }
        let is_atomic = clusters.iter().zip(charges).all(|(c, &z)| c.len() == z as usize);
        Ok(Self {
            assignment,
            clusters,
            is_atomic,
        })
    }

    /// Builds a decomposition from explicit clusters, which must be
    /// disjoint and cover `0..N`.
    pub fn from_clusters(clusters: &[Vec<usize>], charges: &[u32]) -> Result<Self> {
        if clusters.len() != charges.len() {
            return Err(Error::InvalidDecomposition(format!(
                "{} clusters for {} nuclei",
                clusters.len(),
                charges.len()
            )));
        }
        let n: usize = clusters.iter().map(|c| c.len()).sum();
        let mut assignment = vec![usize::MAX; n];
        for (m, c) in clusters.iter().enumerate() {
            for &e in c {
                if e >= n || assignment[e] != usize::MAX {
                    return Err(Error::InvalidDecomposition(format!(
                        "electron label {e} repeated or out of range"
                    )));
                }
                assignment[e] = m;
            }
        }
        Self::new(assignment, charges)
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn clusters(&self) -> &[Vec<usize>] {
        &self.clusters
    }

    pub fn electrons(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_atomic(&self) -> bool {
        self.is_atomic
    }

    /// `|S(a)| = Π |A_j|!`
    pub fn stabilizer_order(&self) -> u128 {
        self.clusters
            .iter()
            .map(|c| (1..=c.len() as u128).product::<u128>())
            .product()
    }

    /// Net charge `q_j = Z_j - |A_j|` of each cluster, using effective
    /// charges.
    pub fn cluster_charges(&self, spec: &SystemSpec) -> Vec<f64> {
        self.clusters
            .iter()
            .zip(&spec.nuclei)
            .map(|(c, n)| n.effective_charge() - c.len() as f64)
            .collect()
    }

    /// The decomposition `πa` whose clusters are `π(A_m)`; `pi[i]` is the
    /// image of label `i`.
    pub fn permuted(&self, pi: &[usize]) -> Self {
        let mut assignment = vec![0; self.assignment.len()];
        for (i, &c) in self.assignment.iter().enumerate() {
            assignment[pi[i]] = c;
        }
        let mut clusters: Vec<Vec<usize>> = self
            .clusters
            .iter()
            .map(|c| {
                let mut v: Vec<usize> = c.iter().map(|&e| pi[e]).collect();
                v.sort_unstable();
                v
            })
            .collect();
        clusters.iter_mut().for_each(|c| c.sort_unstable());
        Self {
            assignment,
            clusters,
            is_atomic: self.is_atomic,
        }
    }

    /// Whether `π` stabilizes every cluster.
    pub fn stabilizes(&self, pi: &[usize]) -> bool {
        self.assignment
            .iter()
            .enumerate()
            .all(|(i, &c)| self.assignment[pi[i]] == c)
    }

    pub fn check_against(&self, spec: &SystemSpec) -> Result<()> {
        if self.assignment.len() != spec.electrons || self.clusters.len() != spec.nuclei.len() {
            return Err(Error::InvalidDecomposition(format!(
                "decomposition of {} electrons into {} clusters does not fit a system of {} electrons and {} nuclei",
                self.assignment.len(),
                self.clusters.len(),
                spec.electrons,
                spec.nuclei.len()
            )));
        }
        Ok(())
    }

    /// Human-readable form with 1-based electron labels, e.g. `({1},{2})`.
    pub fn label(&self) -> String {
        let parts: Vec<String> = self
            .clusters
            .iter()
            .map(|c| {
                let inner: Vec<String> = c.iter().map(|e| (e + 1).to_string()).collect();
                format!("{{{}}}", inner.join(","))
            })
            .collect();
        format!("({})", parts.join(","))
    }
}

/// All `M^N` decompositions in lexicographic order of the assignment.
pub fn enumerate_decompositions(n: usize, charges: &[u32]) -> Result<Vec<Decomposition>> {
    if n == 0 || charges.is_empty() {
        return Err(Error::InvalidDecomposition(
            "need at least one electron and one nucleus".into(),
        ));
    }
    let m = charges.len();
    let count = (m as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if count > DECOMPOSITION_CAP {
        return Err(Error::ResourceLimit {
            what: "decompositions",
            requested: count,
            cap: DECOMPOSITION_CAP,
        });
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut assignment = vec![0usize; n];
    loop {
        out.push(Decomposition::new(assignment.clone(), charges)?);
        let mut k = n;
        loop {
            if k == 0 {
                return Ok(out);
            }
            k -= 1;
            assignment[k] += 1;
            if assignment[k] < m {
                break;
            }
            assignment[k] = 0;
        }
    }
}

/// Which physical terms an operator contains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Terms {
    pub kinetic: bool,
    pub attraction: bool,
    pub repulsion: bool,
    pub nuclear_constant: bool,
}

/// Grid Hamiltonian `kinetic_weight · (stencil) + diag(V)` on the tensor
/// space of `electrons` copies of a one-dimensional grid. The off-diagonal
/// entries of `-½Δ` equal `-kinetic_weight`; the matching diagonal
/// contribution is folded into `diagonal`.
#[derive(Debug, Clone)]
pub struct ManyBodyOperator {
    pub grid: Grid,
    pub electrons: usize,
    pub kinetic_weight: f64,
    pub diagonal: Vec<f64>,
    pub terms: Terms,
    /// Scalar shift included in `diagonal` (the internuclear repulsion).
    pub constant: f64,
}

impl ManyBodyOperator {
    pub fn axis_len(&self) -> usize {
        self.grid.len()
    }

    pub fn dimension(&self) -> usize {
        self.diagonal.len()
    }

    /// Stored nonzeros of the sparse representation.
    pub fn nnz(&self) -> u128 {
        let d = self.dimension() as u128;
        if self.kinetic_weight == 0.0 {
            d
        } else {
            d * (1 + 2 * self.electrons as u128)
        }
    }

    /// Coordinates (grid indices per electron) of a flat index; electron 0
    /// is the slowest axis.
    pub fn coordinates(&self, mut idx: usize) -> Vec<usize> {
        let n = self.axis_len();
        let mut c = vec![0; self.electrons];
        for e in (0..self.electrons).rev() {
            c[e] = idx % n;
            idx /= n;
        }
        c
    }

    pub fn flat_index(&self, coords: &[usize]) -> usize {
        let n = self.axis_len();
        coords.iter().fold(0, |acc, &c| acc * n + c)
    }

    /// Entry `H[i][j]` of the sparse matrix.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.diagonal[i];
        }
        let n = self.axis_len();
        let mut stride = 1;
        for _ in 0..self.electrons {
            let (ci, cj) = ((i / stride) % n, (j / stride) % n);
            if ci.abs_diff(cj) == 1 && i.abs_diff(j) == stride {
                return -self.kinetic_weight;
            }
            stride *= n;
        }
        0.0
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        crate::linalg::to_dense(self)
    }

    /// Operator with an additional diagonal shift.
    pub fn shifted(&self, shift: f64) -> Self {
        let mut out = self.clone();
        out.diagonal.iter_mut().for_each(|d| *d += shift);
        out
    }
}

impl LinearOperator for ManyBodyOperator {
    fn dim(&self) -> usize {
        self.diagonal.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.axis_len();
        let kw = self.kinetic_weight;
        let nn = self.electrons;
        let row = |r: usize, yr: &mut [f64]| {
            let base = r * n;
            let xr = &x[base..base + n];
            let dr = &self.diagonal[base..base + n];
            for k in 0..n {
                yr[k] = dr[k] * xr[k];
            }
            if kw == 0.0 {
                return;
            }
            for k in 1..n {
                yr[k] -= kw * xr[k - 1];
                yr[k - 1] -= kw * xr[k];
            }
            // Slower axes: whole rows shifted by the axis stride.
            let mut row_stride = 1usize;
            for _ in 1..nn {
                let c = (r / row_stride) % n;
                let stride = row_stride * n;
                if c > 0 {
                    let nb = &x[base - stride..base - stride + n];
                    for k in 0..n {
                        yr[k] -= kw * nb[k];
                    }
                }
                if c + 1 < n {
                    let nb = &x[base + stride..base + stride + n];
                    for k in 0..n {
                        yr[k] -= kw * nb[k];
                    }
                }
                row_stride *= n;
            }
        };
        if y.len() >= 1 << 15 {
            y.par_chunks_mut(n).enumerate().for_each(|(r, yr)| row(r, yr));
        } else {
            y.chunks_mut(n).enumerate().for_each(|(r, yr)| row(r, yr));
        }
    }

    fn norm_estimate(&self) -> f64 {
        let dmax = self.diagonal.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        dmax + 2.0 * self.electrons as f64 * self.kinetic_weight
    }
}

struct Assembly {
    /// One-body potential per electron.
    one_body: Vec<Vec<f64>>,
    /// Interacting electron pairs.
    pairs: Vec<(usize, usize)>,
    constant: f64,
    kinetic: bool,
    terms: Terms,
}

fn assemble(spec: &SystemSpec, parts: Assembly, cap: u128) -> Result<ManyBodyOperator> {
    let dim = spec.dimension()?;
    let n = spec.grid().len();
    let nn = spec.electrons;
    let nnz = dim as u128 * if parts.kinetic { 1 + 2 * nn as u128 } else { 1 };
    if nnz > cap {
        return Err(Error::ResourceLimit {
            what: "nonzeros",
            requested: nnz,
            cap,
        });
    }
    let h = spec.grid().spacing();
    let kw = if parts.kinetic { 0.5 / (h * h) } else { 0.0 };
    let kin_diag = 2.0 * kw * nn as f64;
    let pair_table = if parts.pairs.is_empty() {
        Vec::new()
    } else {
        spec.pair_table()
    };
    let mut diagonal = vec![0.0; dim];
    diagonal.par_chunks_mut(n).enumerate().for_each(|(r, chunk)| {
        let mut coords = vec![0usize; nn];
        let mut rest = r;
        for e in (0..nn.saturating_sub(1)).rev() {
            coords[e] = rest % n;
            rest /= n;
        }
        for (k, d) in chunk.iter_mut().enumerate() {
            if nn > 0 {
                coords[nn - 1] = k;
            }
            let mut v = kin_diag + parts.constant;
            for (e, &c) in coords.iter().enumerate() {
                v += parts.one_body[e][c];
            }
            for &(a, b) in &parts.pairs {
                v += pair_table[coords[a] * n + coords[b]];
            }
            *d = v;
        }
    });
    Ok(ManyBodyOperator {
        grid: spec.grid().clone(),
        electrons: nn,
        kinetic_weight: kw,
        diagonal,
        terms: parts.terms,
        constant: parts.constant,
    })
}

fn sum_vecs(vs: &[Vec<f64>], len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for v in vs {
        for (o, x) in out.iter_mut().zip(v) {
            *o += x;
        }
    }
    out
}

/// Full Hamiltonian `H_N(y)` including the internuclear constant.
pub fn assemble_full(spec: &SystemSpec) -> Result<ManyBodyOperator> {
    assemble_full_capped(spec, DEFAULT_NNZ_CAP)
}

pub fn assemble_full_capped(spec: &SystemSpec, cap: u128) -> Result<ManyBodyOperator> {
    spec.validate()?;
    let n = spec.grid().len();
    let attractions: Vec<Vec<f64>> = (0..spec.nuclei.len()).map(|j| spec.attraction(j)).collect();
    let mut total = sum_vecs(&attractions, n);
    for (t, c) in total.iter_mut().zip(spec.centrifugal()) {
        *t += c;
    }
    let nn = spec.electrons;
    let pairs = all_pairs(nn);
    let constant = spec.nuclear_repulsion();
    assemble(
        spec,
        Assembly {
            one_body: vec![total; nn],
            terms: Terms {
                kinetic: true,
                attraction: true,
                repulsion: !pairs.is_empty(),
                nuclear_constant: spec.nuclei.len() > 1,
            },
            pairs,
            constant,
            kinetic: true,
        },
        cap,
    )
}

fn all_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut p = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            p.push((a, b));
        }
    }
    p
}

/// `H_a = Σ_m H_{A_m}`: kinetic energy, attraction to the own nucleus and
/// repulsion inside each cluster.
pub fn assemble_cluster(spec: &SystemSpec, a: &Decomposition) -> Result<ManyBodyOperator> {
    spec.validate()?;
    a.check_against(spec)?;
    let cent = spec.centrifugal();
    let attractions: Vec<Vec<f64>> = (0..spec.nuclei.len())
        .map(|j| {
            let mut v = spec.attraction(j);
            for (x, c) in v.iter_mut().zip(&cent) {
                *x += c;
            }
            v
        })
        .collect();
    let asg = a.assignment();
    let one_body = asg.iter().map(|&c| attractions[c].clone()).collect();
    let pairs: Vec<(usize, usize)> = all_pairs(spec.electrons)
        .into_iter()
        .filter(|&(p, q)| asg[p] == asg[q])
        .collect();
    assemble(
        spec,
        Assembly {
            one_body,
            terms: Terms {
                kinetic: true,
                attraction: true,
                repulsion: !pairs.is_empty(),
                nuclear_constant: false,
            },
            pairs,
            constant: 0.0,
            kinetic: true,
        },
        DEFAULT_NNZ_CAP,
    )
}

/// `I_a = H - H_a`: attraction to foreign nuclei, repulsion between
/// clusters and the internuclear constant. Purely diagonal.
pub fn intercluster(spec: &SystemSpec, a: &Decomposition) -> Result<ManyBodyOperator> {
    spec.validate()?;
    a.check_against(spec)?;
    let n = spec.grid().len();
    let m = spec.nuclei.len();
    let attractions: Vec<Vec<f64>> = (0..m).map(|j| spec.attraction(j)).collect();
    let asg = a.assignment();
    let one_body = asg
        .iter()
        .map(|&c| {
            let foreign: Vec<Vec<f64>> = (0..m).filter(|&j| j != c).map(|j| attractions[j].clone()).collect();
            sum_vecs(&foreign, n)
        })
        .collect();
    let pairs: Vec<(usize, usize)> = all_pairs(spec.electrons)
        .into_iter()
        .filter(|&(p, q)| asg[p] != asg[q])
        .collect();
    assemble(
        spec,
        Assembly {
            one_body,
            terms: Terms {
                kinetic: false,
                attraction: m > 1,
                repulsion: !pairs.is_empty(),
                nuclear_constant: m > 1,
            },
            pairs,
            constant: spec.nuclear_repulsion(),
            kinetic: false,
        },
        DEFAULT_NNZ_CAP,
    )
}

/// Single-cluster Hamiltonian `H_{A_m}` of nucleus `j` holding `k`
/// electrons, on the same grid.
pub fn assemble_ion(spec: &SystemSpec, j: usize, k: usize) -> Result<ManyBodyOperator> {
    let mut sub = spec.clone();
    sub.nuclei = vec![spec.nuclei[j].clone()];
    sub.electrons = k;
    if k == 0 {
        return Err(Error::InvalidSystem("a bare nucleus has no electronic space".into()));
    }
    assemble_full(&sub)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{PotentialSpec, PotentialTable};
    use crate::linalg::sorted_eigen;

    fn small_pair(r: f64) -> SystemSpec {
        SystemSpec::hydrogen_pair_on(r, build_grid(21, (-10.0, 10.0)).unwrap())
    }

    #[test]
    fn apply_matches_entries() {
        let spec = small_pair(4.0);
        let h = assemble_full(&spec).unwrap();
        let d = h.to_dense();
        for i in (0..h.dimension()).step_by(37) {
            for j in 0..h.dimension() {
                assert_eq!(d[(i, j)], h.entry(i, j));
            }
        }
        let asym = (&d - d.transpose()).abs().max();
        assert!(asym < 1e-12 * h.norm_estimate());
    }

    #[test]
    fn decomposition_identity_holds_entrywise() {
        let spec = small_pair(6.0);
        let h = assemble_full(&spec).unwrap();
        for a in enumerate_decompositions(2, &spec.charges()).unwrap() {
            let ha = assemble_cluster(&spec, &a).unwrap();
            let ia = intercluster(&spec, &a).unwrap();
            assert_eq!(ha.kinetic_weight, h.kinetic_weight);
            for i in 0..h.dimension() {
                let diff = h.diagonal[i] - ha.diagonal[i] - ia.diagonal[i];
                assert!(diff.abs() < 1e-12, "{}", a.label());
            }
        }
    }

    #[test]
    fn enumeration_counts() {
        let d = enumerate_decompositions(2, &[1, 1]).unwrap();
        assert_eq!(d.len(), 4);
        assert_eq!(d.iter().filter(|a| a.is_atomic()).count(), 2);
        let d = enumerate_decompositions(3, &[2, 1]).unwrap();
        assert_eq!(d.len(), 8);
        assert_eq!(d.iter().filter(|a| a.is_atomic()).count(), 3);
        assert!(matches!(
            enumerate_decompositions(30, &[1, 1, 1]),
            Err(Error::ResourceLimit { .. })
        ));
    }

    #[test]
    fn dimension_is_tensor_count() {
        let spec = small_pair(6.0);
        assert_eq!(assemble_full(&spec).unwrap().dimension(), 21 * 21);
    }

    #[test]
    fn harmonic_custom_potential() {
        let grid = build_grid(401, (-10.0, 10.0)).unwrap();
        let table = PotentialTable::from_fn(&grid.shifted(0.0), |x| 0.5 * x * x);
        let spec = SystemSpec {
            nuclei: vec![Nucleus::new(0.0, 1)],
            electrons: 1,
            potential: PotentialSpec::custom(table),
            coupling: 1.0,
            mode: Mode::Line { grid },
        };
        let h = assemble_full(&spec).unwrap();
        let (vals, _) = sorted_eigen(h.to_dense());
        assert!((vals[0] - 0.5).abs() < 1e-3);
        assert!((vals[1] - 1.5).abs() < 2e-3);
    }

    #[test]
    fn coincident_nuclei_rejected() {
        let spec = small_pair(0.0);
        assert!(matches!(assemble_full(&spec), Err(Error::InvalidSystem(_))));
    }

    #[test]
    fn cap_enforced() {
        let spec = small_pair(6.0);
        assert!(matches!(
            assemble_full_capped(&spec, 100),
            Err(Error::ResourceLimit { .. })
        ));
    }

    #[test]
    fn nuclear_repulsion_matches_kernel() {
        let spec = small_pair(6.0);
        let expected = 1.0 / (36.0f64 + 1.0).sqrt();
        assert!((spec.nuclear_repulsion() - expected).abs() < 1e-15);
        let h = assemble_full(&spec).unwrap();
        assert_eq!(h.constant, spec.nuclear_repulsion());
    }

    #[test]
    fn ionic_cluster_has_internal_repulsion_only() {
        let spec = small_pair(6.0);
        let ionic = Decomposition::from_clusters(&[vec![0, 1], vec![]], &[1, 1]).unwrap();
        assert!(!ionic.is_atomic());
        let ha = assemble_cluster(&spec, &ionic).unwrap();
        let one = spec.attraction(0);
        let pts = spec.grid().points();
        let i = ha.flat_index(&[3, 15]);
        let kin = 4.0 * ha.kinetic_weight;
        let expected = kin + one[3] + one[15] + soft_kernel(pts[3] - pts[15], 1.0);
        assert!((ha.diagonal[i] - expected).abs() < 1e-14);
    }

    #[test]
    fn bad_labels() {
        assert!(Decomposition::new(vec![0, 2], &[1, 1]).is_err());
        let spec = small_pair(6.0);
        let a = Decomposition::new(vec![0, 1, 1], &[1, 1]).unwrap();
        assert!(assemble_cluster(&spec, &a).is_err());
    }
}
