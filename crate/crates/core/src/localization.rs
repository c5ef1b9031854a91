//! Partition of unity over decompositions, the discrete IMS identity and
//! the measured lower bound for `H⊥`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feshbach::CutoffGroundBasis;
use crate::lattice::mollified_interval;
use crate::linalg::{self, FnOperator, LinearOperator};
use crate::manybody::{Decomposition, ManyBodyOperator, Mode, SystemSpec};
use crate::spectral::{self, SpectralOptions};
use crate::symmetry::CharacterProjector;

/// Radius fraction of the sets `Ω_a^ν` that get mollified.
pub const INDICATOR_FRACTION: f64 = 0.3;

/// Mollifier half-width as a fraction of the scale.
pub const MOLLIFIER_FRACTION: f64 = 0.1;

/// One member `J_a` of the partition.
#[derive(Debug, Clone)]
pub struct PartitionMember {
    pub decomposition: Decomposition,
    /// `J_a` sampled on the many-body grid.
    pub values: Vec<f64>,
}

/// Partition of unity `{J_a}` with `Σ J_a² = 1`, built from the mollified
/// indicators `F_a` of `Ω_a^{3/10}`, where
/// `Ω_a^ν = {x : |x_i - y_j| ≥ νR for every nucleus j not holding i}`.
#[derive(Debug, Clone)]
pub struct Partition {
    pub members: Vec<PartitionMember>,
    pub scale: f64,
    /// One-electron factors `f_j(x)`: mollified indicator of the points at
    /// distance at least `3R/10` from every nucleus other than `j`.
    pub factors: Vec<Vec<f64>>,
    pub grid: crate::lattice::Grid,
    pub electrons: usize,
    /// `R · max |∂J_a|` over members and axes (forward differences).
    pub gradient_constant: f64,
}

/// Builds the partition on the grid of `spec` at scale `r`.
pub fn build_partition(spec: &SystemSpec, decomps: &[Decomposition], r: f64) -> Result<Partition> {
    spec.validate()?;
    let Mode::Line { grid } = &spec.mode else {
        return Err(Error::InvalidSystem("the partition needs line mode".into()));
    };
    if decomps.is_empty() {
        return Err(Error::InvalidDecomposition("empty decomposition list".into()));
    }
    let s = MOLLIFIER_FRACTION * r;
    if grid.spacing() > s {
        return Err(Error::Resolution {
            spacing: grid.spacing(),
            scale: s,
        });
    }
    let pts = grid.points();
    let nuclei: Vec<f64> = spec.nuclei.iter().map(|n| n.position[0]).collect();
    let radius = INDICATOR_FRACTION * r;
    let factors: Vec<Vec<f64>> = (0..nuclei.len())
        .map(|j| {
            pts.iter()
                .map(|&x| {
                    let mut f = 1.0;
                    for (k, &y) in nuclei.iter().enumerate() {
                        if k != j {
                            f -= mollified_interval(x, y - radius, y + radius, s);
                        }
                    }
                    f.max(0.0)
                })
                .collect()
        })
        .collect();
    let n = grid.len();
    let nn = spec.electrons;
    let dim = n.pow(nn as u32);
    let coords = |mut idx: usize| {
        let mut c = vec![0usize; nn];
        for e in (0..nn).rev() {
            c[e] = idx % n;
            idx /= n;
        }
        c
    };
    let f: Vec<Vec<f64>> = decomps
        .par_iter()
        .map(|a| {
            a.check_against(spec)?;
            Ok((0..dim)
                .map(|idx| {
                    coords(idx)
                        .iter()
                        .zip(a.assignment())
                        .map(|(&c, &j)| factors[j][c])
                        .product()
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut norm = vec![0.0; dim];
    for fa in &f {
        for (s, v) in norm.iter_mut().zip(fa) {
            *s += v * v;
        }
    }
    if let Some(i) = norm.iter().position(|&v| v <= 0.0) {
        return Err(Error::Geometry(format!(
            "grid point {i} is not covered by any decomposition region"
        )));
    }
    let members: Vec<PartitionMember> = decomps
        .iter()
        .zip(f)
        .map(|(a, fa)| PartitionMember {
            decomposition: a.clone(),
            values: fa.iter().zip(&norm).map(|(v, s)| v / s.sqrt()).collect(),
        })
        .collect();
    let h = grid.spacing();
    let gradient_constant = r * members
        .par_iter()
        .map(|m| {
            let mut best: f64 = 0.0;
            let mut stride = 1;
            for _ in 0..nn {
                for idx in 0..dim {
                    if (idx / stride) % n + 1 < n {
                        best = best.max((m.values[idx + stride] - m.values[idx]).abs() / h);
                    }
                }
                stride *= n;
            }
            best
        })
        .reduce(|| 0.0, f64::max);
    Ok(Partition {
        members,
        scale: r,
        factors,
        grid: grid.clone(),
        electrons: nn,
        gradient_constant,
    })
}

impl Partition {
    pub fn dimension(&self) -> usize {
        self.members.first().map_or(0, |m| m.values.len())
    }

    /// `max |Σ_a J_a² - 1|`.
    pub fn normalization_error(&self) -> f64 {
        (0..self.dimension())
            .map(|i| (self.members.iter().map(|m| m.values[i].powi(2)).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Whether each `J_a` vanishes outside `Ω_a^ν`.
    pub fn support_within(&self, nu: f64, spec: &SystemSpec) -> bool {
        let pts = self.grid.points();
        let n = self.grid.len();
        let nn = self.electrons;
        self.members.iter().all(|m| {
            m.values.iter().enumerate().all(|(idx, &v)| {
                if v == 0.0 {
                    return true;
                }
                let mut rest = idx;
                for e in (0..nn).rev() {
                    let x = pts[rest % n];
                    rest /= n;
                    let own = m.decomposition.assignment()[e];
                    for (j, nuc) in spec.nuclei.iter().enumerate() {
                        if j != own && (x - nuc.position[0]).abs() < nu * self.scale {
                            return false;
                        }
                    }
                }
                true
            })
        })
    }

    /// Pointwise `Σ_a |∇J_a|²` with forward differences.
    pub fn localization_error(&self) -> Vec<f64> {
        let n = self.grid.len();
        let h = self.grid.spacing();
        let dim = self.dimension();
        let mut out = vec![0.0; dim];
        for m in &self.members {
            let mut stride = 1;
            for _ in 0..self.electrons {
                for (idx, o) in out.iter_mut().enumerate() {
                    if (idx / stride) % n + 1 < n {
                        *o += ((m.values[idx + stride] - m.values[idx]) / h).powi(2);
                    }
                }
                stride *= n;
            }
        }
        out
    }

    /// Writes the one-electron factors `f_j` as CSV columns.
    pub fn write_profiles_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["x".to_string()];
        header.extend((0..self.factors.len()).map(|j| format!("f{}", j + 1)));
        wtr.write_record(&header)?;
        for (i, x) in self.grid.points().iter().enumerate() {
            let mut row = vec![x.to_string()];
            row.extend(self.factors.iter().map(|f| f[i].to_string()));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Discrete localization operator `K`: on each stencil edge `(i, j)` it
/// carries `¼ Σ_a (J_a(i) - J_a(j))² / h²`, so that
/// `Σ_a J_a H J_a = H + K` exactly for the 3-point Laplacian. It is the
/// compatible discrete form of `-Σ_a |∇J_a|²`.
pub fn localization_operator<'a>(h: &'a ManyBodyOperator, part: &'a Partition) -> impl LinearOperator + 'a {
    let n = h.axis_len();
    let nn = h.electrons;
    let dim = h.dimension();
    // Edge weights per axis: w[e][idx] couples idx and idx + stride_e.
    let weights: Vec<Vec<f64>> = (0..nn)
        .map(|e| {
            let stride = n.pow((nn - 1 - e) as u32);
            (0..dim)
                .map(|idx| {
                    if (idx / stride) % n + 1 < n {
                        h.kinetic_weight
                            * 0.5
                            * part
                                .members
                                .iter()
                                .map(|m| (m.values[idx] - m.values[idx + stride]).powi(2))
                                .sum::<f64>()
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    let norm = weights.iter().flatten().fold(0.0f64, |a, &b| a.max(b)) * 2.0 * nn as f64;
    FnOperator {
        dim,
        norm,
        f: move |x: &[f64], y: &mut [f64]| {
            y.iter_mut().for_each(|v| *v = 0.0);
            for (e, w) in weights.iter().enumerate() {
                let stride = n.pow((nn - 1 - e) as u32);
                for idx in 0..dim {
                    let wi = w[idx];
                    if wi != 0.0 {
                        y[idx] += wi * x[idx + stride];
                        y[idx + stride] += wi * x[idx];
                    }
                }
            }
        },
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImsReport {
    /// `‖H - Σ_a J_a H J_a + K‖`.
    pub residual: f64,
    pub h_norm: f64,
    /// `max_x Σ_a |∇J_a|²`.
    pub localization_error: f64,
    /// `R² · max Σ_a |∇J_a|²`.
    pub localization_constant: f64,
}

/// Operator-norm residual of the discrete IMS identity.
pub fn ims_residual(h: &ManyBodyOperator, part: &Partition) -> Result<ImsReport> {
    if part.dimension() != h.dimension() || part.grid != h.grid {
        return Err(Error::InvalidGrid("partition and operator grids differ".into()));
    }
    let k = localization_operator(h, part);
    let dim = h.dimension();
    let diff = FnOperator {
        dim,
        norm: 2.0 * h.norm_estimate(),
        f: |x: &[f64], y: &mut [f64]| {
            h.apply(x, y);
            let mut acc = vec![0.0; dim];
            let mut t = vec![0.0; dim];
            let mut u = vec![0.0; dim];
            for m in &part.members {
                for ((ti, xi), ji) in t.iter_mut().zip(x).zip(&m.values) {
                    *ti = xi * ji;
                }
                h.apply(&t, &mut u);
                for ((a, ui), ji) in acc.iter_mut().zip(&u).zip(&m.values) {
                    *a += ui * ji;
                }
            }
            k.apply(x, &mut u);
            for ((yi, a), ki) in y.iter_mut().zip(&acc).zip(&u) {
                *yi += ki - a;
            }
        },
    };
    let residual = linalg::power_norm(&diff, 60, 7);
    let h_norm = linalg::power_norm(h, 200, 3);
    let loc = part.localization_error().into_iter().fold(0.0, f64::max);
    Ok(ImsReport {
        residual,
        h_norm,
        localization_error: loc,
        localization_constant: loc * part.scale * part.scale,
    })
}

/// `sup |I_a|` over `supp J_a` for each member.
pub fn intercluster_sup(spec: &SystemSpec, part: &Partition) -> Result<Vec<(String, f64)>> {
    part.members
        .iter()
        .map(|m| {
            let ia = crate::manybody::intercluster(spec, &m.decomposition)?;
            let sup = ia
                .diagonal
                .iter()
                .zip(&m.values)
                .filter(|(_, &j)| j > 0.0)
                .map(|(v, _)| v.abs())
                .fold(0.0, f64::max);
            Ok((m.decomposition.label(), sup))
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityReport {
    /// Bottom of `P⊥HP⊥` on `Ran P⊥`.
    pub measured: f64,
    /// `E(∞) + γ₀/2`.
    pub threshold: f64,
    /// `E(∞) + γ₀ - max_a sup_{supp J_a}|I_a| - max Σ_a|∇J_a|²`, the
    /// estimate the localization argument produces.
    pub localization_estimate: f64,
    pub passes: bool,
    /// `‖Px‖` for the computed bottom vector.
    pub deflation_leak: f64,
}

/// Measures the bottom of `H⊥` by deflated Lanczos and compares it with
/// `E(∞) + γ₀/2`. With a sector projector the measurement is taken inside
/// its range and `basis` must span `Ran Q^σ P`.
pub fn stability_bound(
    spec: &SystemSpec,
    h: &ManyBodyOperator,
    basis: &[Vec<f64>],
    sector: Option<&CharacterProjector>,
    part: &Partition,
    e_inf: f64,
    gamma0: f64,
) -> Result<StabilityReport> {
    let perp = |x: &mut [f64]| {
        if let Some(q) = sector {
            q.apply_in_place(x);
        }
        for b in basis {
            let c = linalg::dot(b, x);
            linalg::axpy(-c, b, x);
        }
    };
    let res = spectral::low_spectrum_with(
        h,
        &SpectralOptions {
            k: 1,
            tol: spectral::DEFAULT_TOL,
            seed: 1,
            restrict: Some(&perp),
        },
    )?;
    let v = &res.eigenvectors[0];
    let mut leak: f64 = basis.iter().map(|b| linalg::dot(b, v).powi(2)).sum::<f64>().sqrt();
    if let Some(q) = sector {
        let mut qv = q.apply_vec(v);
        linalg::axpy(-1.0, v, &mut qv);
        leak = leak.max(linalg::norm(&qv));
    }
    if leak > 1e-8 {
        return Err(Error::Deflation { residual: leak });
    }
    let measured = res.eigenvalues[0];
    let sup_i = intercluster_sup(spec, part)?
        .into_iter()
        .map(|(_, v)| v)
        .fold(0.0, f64::max);
    let loc = part.localization_error().into_iter().fold(0.0, f64::max);
    let threshold = e_inf + 0.5 * gamma0;
    Ok(StabilityReport {
        measured,
        threshold,
        localization_estimate: e_inf + gamma0 - sup_i - loc,
        passes: measured >= threshold,
        deflation_leak: leak,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaseSplit {
    pub label: String,
    pub atomic: bool,
    /// Bottom of `H_a` (deflated by `P_a` when atomic).
    pub bottom: f64,
}

/// Bottoms of the cluster Hamiltonians: `H_a` for ionic `a` and `H_a`
/// deflated by the cut-off ground states of `a` for atomic `a`.
pub fn case_split(spec: &SystemSpec, decomps: &[Decomposition], p: &CutoffGroundBasis) -> Result<Vec<CaseSplit>> {
    decomps
        .iter()
        .map(|a| {
            let ha = crate::manybody::assemble_cluster(spec, a)?;
            let block: Vec<Vec<f64>> = p
                .blocks
                .iter()
                .filter(|b| b.decomposition.as_ref() == Some(a))
                .flat_map(|b| b.vectors.iter().cloned())
                .collect();
            let deflate = |x: &mut [f64]| {
                for b in &block {
                    let c = linalg::dot(b, x);
                    linalg::axpy(-c, b, x);
                }
            };
            let opts = SpectralOptions {
                k: 1,
                tol: spectral::DEFAULT_TOL,
                seed: 2,
                restrict: if a.is_atomic() && !block.is_empty() {
                    Some(&deflate)
                } else {
                    None
                },
            };
            let res = spectral::low_spectrum_with(&ha, &opts)?;
            Ok(CaseSplit {
                label: a.label(),
                atomic: a.is_atomic(),
                bottom: res.eigenvalues[0],
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_grid;
    use crate::manybody::{assemble_full, enumerate_decompositions, Nucleus};

    fn one_electron_pair(r: f64) -> SystemSpec {
        let grid = build_grid(241, (-30.0, 30.0)).unwrap();
        let mut spec = SystemSpec::hydrogen_pair_on(r, grid);
        spec.electrons = 1;
        spec.nuclei = vec![Nucleus::new(-r / 2.0, 1), Nucleus::new(r / 2.0, 0)];
        spec
    }

    #[test]
    fn single_member_partition_is_identity() {
        let grid = build_grid(41, (-10.0, 10.0)).unwrap();
        let spec = SystemSpec::single_well(grid, 1, 1);
        let a = enumerate_decompositions(1, &spec.charges()).unwrap();
        let part = build_partition(&spec, &a, 10.0).unwrap();
        assert!(part.members[0].values.iter().all(|&v| v == 1.0));
        let h = assemble_full(&spec).unwrap();
        assert_eq!(ims_residual(&h, &part).unwrap().residual, 0.0);
    }

    #[test]
    fn one_electron_two_centers() {
        let spec = one_electron_pair(12.0);
        let a = enumerate_decompositions(1, &spec.charges()).unwrap();
        assert_eq!(a.len(), 2);
        let part = build_partition(&spec, &a, 12.0).unwrap();
        assert!(part.normalization_error() < 1e-12);
        assert!(part.support_within(0.2 - 1e-12, &spec));
        let h = assemble_full(&spec).unwrap();
        let rep = ims_residual(&h, &part).unwrap();
        assert!(rep.residual < 1e-8 * rep.h_norm, "{rep:?}");
        // Deep inside the region around nucleus 0, J_a = 1 for the member
        // assigning the electron there.
        let idx = spec
            .grid()
            .points()
            .iter()
            .position(|&x| (x + 6.0).abs() < 1e-9)
            .unwrap();
        let own = part
            .members
            .iter()
            .find(|m| m.decomposition.assignment()[0] == 0)
            .unwrap();
        assert!((own.values[idx] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let spec = one_electron_pair(2.0);
        let a = enumerate_decompositions(1, &spec.charges()).unwrap();
        assert!(matches!(build_partition(&spec, &a, 2.0), Err(Error::Resolution { .. })));
    }
}
