//! Uniform grids, model potentials and smoothed cut-off functions.

use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform one-dimensional grid including both endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridConfig", into = "GridConfig")]
pub struct Grid {
    points: usize,
    min: f64,
    max: f64,
    spacing: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GridConfig {
    points: usize,
    min: f64,
    max: f64,
}

impl TryFrom<GridConfig> for Grid {
    type Error = Error;
    fn try_from(c: GridConfig) -> Result<Self> {
        build_grid(c.points, (c.min, c.max))
    }
}

impl From<Grid> for GridConfig {
    fn from(g: Grid) -> Self {
        GridConfig {
            points: g.points,
            min: g.min,
            max: g.max,
        }
    }
}

/// Builds a grid of `n` points on `[extent.0, extent.1]`.
pub fn build_grid(n: usize, extent: (f64, f64)) -> Result<Grid> {
    let (min, max) = extent;
    if n < 2 {
        return Err(Error::InvalidGrid(format!("need at least 2 points, got {n}")));
    }
    if !(min.is_finite() && max.is_finite()) || min >= max {
        return Err(Error::InvalidExtent { min, max });
    }
    Ok(Grid {
        points: n,
        min,
        max,
        spacing: (max - min) / (n - 1) as f64,
    })
}

impl Grid {
    /// Offset grid `r_k = k h`, `k = 1..=n`, `h = r_max / n`, for radial
    /// problems with the Dirichlet condition `u(0) = 0`.
    pub fn radial(n: usize, r_max: f64) -> Result<Grid> {
        if n < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 points, got {n}")));
        }
        if !(r_max.is_finite() && r_max > 0.0) {
            return Err(Error::InvalidExtent { min: 0.0, max: r_max });
        }
        let h = r_max / n as f64;
        Ok(Grid {
            points: n,
            min: h,
            max: r_max,
            spacing: h,
        })
    }

    pub fn len(&self) -> usize {
        self.points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn point(&self, i: usize) -> f64 {
        if i + 1 == self.points {
            self.max
        } else {
            self.min + i as f64 * self.spacing
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.point(i)).collect()
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.min + self.max)
    }

    /// Quadrature weight of a single sample (rectangle rule, consistent with
    /// the finite-difference inner product).
    pub fn weight(&self) -> f64 {
        self.spacing
    }

    /// Same grid translated by `shift`.
    pub fn shifted(&self, shift: f64) -> Grid {
        Grid {
            points: self.points,
            min: self.min + shift,
            max: self.max + shift,
            spacing: self.spacing,
        }
    }

    /// L² norm `sqrt(h Σ f²)` of samples of `f`.
    pub fn l2_norm(&self, f: impl Fn(f64) -> f64) -> f64 {
        (self.spacing * (0..self.points).map(|i| f(self.point(i)).powi(2)).sum::<f64>()).sqrt()
    }
}

/// Two-column sampled potential, linearly interpolated and clamped to its
/// end values outside the table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialTable {
    pub positions: Vec<f64>,
    pub values: Vec<f64>,
}

impl PotentialTable {
    pub fn new(positions: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if positions.len() != values.len() || positions.len() < 2 {
            return Err(Error::Parse(
                "potential table needs at least two (position, value) rows".into(),
            ));
        }
        if positions.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Parse(
                "potential table positions must be strictly increasing".into(),
            ));
        }
        if values.iter().chain(&positions).any(|v| !v.is_finite()) {
            return Err(Error::Parse("potential table contains non-finite entries".into()));
        }
        Ok(Self { positions, values })
    }

    /// Tabulates `f` on a grid.
    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Self {
        let positions = grid.points();
        let values = positions.iter().map(|&x| f(x)).collect();
        Self { positions, values }
    }

    /// Parses whitespace- or comma-separated `(position, value)` rows. Blank
    /// lines and lines starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut positions = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .collect();
            if fields.len() != 2 {
                return Err(Error::Parse(format!(
                    "line {}: expected two columns, found {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
            };
            positions.push(parse(fields[0])?);
            values.push(parse(fields[1])?);
        }
        Self::new(positions, values)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let p = &self.positions;
        let n = p.len();
        if x <= p[0] {
            return self.values[0];
        }
        if x >= p[n - 1] {
            return self.values[n - 1];
        }
        let k = p.partition_point(|&q| q <= x) - 1;
        let t = (x - p[k]) / (p[k + 1] - p[k]);
        self.values[k] * (1.0 - t) + self.values[k + 1] * t
    }
}

/// Shape of the one-body potential generated by each nucleus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialKind {
    /// Attraction `-s / sqrt(u² + a²)`; electron-electron and
    /// nucleus-nucleus terms use the same softening.
    SoftCoulomb { softening: f64 },
    /// Radial reduced equation `-Z/r + ℓ(ℓ+1)/(2r²)` in three dimensions.
    CoulombRadial { ell: u32 },
    /// Literal signed one-body potential `v(x - y_j)` scaled by the nuclear
    /// strength.
    CustomTable { table: PotentialTable },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    #[serde(flatten)]
    pub kind: PotentialKind,
    /// Overall magnitude; the attractive sign is applied at assembly.
    #[serde(default = "one")]
    pub strength: f64,
}

fn one() -> f64 {
    1.0
}

impl PotentialSpec {
    pub fn soft_coulomb(softening: f64) -> Result<Self> {
        let p = Self {
            kind: PotentialKind::SoftCoulomb { softening },
            strength: 1.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn coulomb_radial(ell: u32) -> Self {
        Self {
            kind: PotentialKind::CoulombRadial { ell },
            strength: 1.0,
        }
    }

    pub fn custom(table: PotentialTable) -> Self {
        Self {
            kind: PotentialKind::CustomTable { table },
            strength: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.strength.is_finite() {
            return Err(Error::InvalidSystem("potential strength must be finite".into()));
        }
        if let PotentialKind::SoftCoulomb { softening } = self.kind {
            if !(softening > 0.0 && softening.is_finite()) {
                return Err(Error::InvalidSystem(format!(
                    "soft-Coulomb softening must be positive, got {softening}"
                )));
            }
        }
        Ok(())
    }

    /// Softening used for the pair kernels between like particles.
    pub fn interaction_softening(&self) -> f64 {
        match self.kind {
            PotentialKind::SoftCoulomb { softening } => softening,
            _ => 1.0,
        }
    }

    /// Centrifugal barrier `ℓ(ℓ+1)/(2r²)` of the radial reduction (zero for
    /// the other kinds).
    pub fn centrifugal(&self, r: f64) -> f64 {
        match self.kind {
            PotentialKind::CoulombRadial { ell } => {
                let l = ell as f64;
                l * (l + 1.0) / (2.0 * r * r)
            }
            _ => 0.0,
        }
    }

    /// Attractive one-body potential felt by an electron at signed offset `u` from a
    /// nucleus of effective charge `charge` (coupling applied by caller).
    pub fn one_body(&self, u: f64, charge: f64) -> f64 {
        match &self.kind {
            PotentialKind::SoftCoulomb { softening } => -self.strength * charge * soft_kernel(u, *softening),
            PotentialKind::CoulombRadial { .. } => -self.strength * charge / u,
            PotentialKind::CustomTable { table } => self.strength * charge * table.eval(u),
        }
    }
}

/// `1 / sqrt(u² + a²)`.
#[inline]
pub fn soft_kernel(u: f64, a: f64) -> f64 {
    1.0 / (u * u + a * a).sqrt()
}

/// Gauss-Legendre nodes and weights on [-1, 1] (Newton iteration on the
/// Legendre recurrence).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite Gauss-Legendre rule on `[a, b]` with `panels` equal panels.
pub fn composite_gauss(a: f64, b: f64, panels: usize, order: usize) -> (Vec<f64>, Vec<f64>) {
    let (t, w) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut xs = Vec::with_capacity(panels * order);
    let mut ws = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let lo = a + p as f64 * h;
        for (ti, wi) in t.iter().zip(&w) {
            xs.push(lo + 0.5 * h * (ti + 1.0));
            ws.push(0.5 * h * wi);
        }
    }
    (xs, ws)
}

/// Unnormalized bump `exp(-1/(1-t²))` on (-1, 1).
#[inline]
pub fn bump(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - t * t)).exp()
    }
}

const BUMP_TABLE: usize = 2048;

struct BumpCdf {
    norm: f64,
    cumulative: Vec<f64>,
}

fn bump_cdf_table() -> &'static BumpCdf {
    static TABLE: OnceLock<BumpCdf> = OnceLock::new();
    TABLE.get_or_init(|| {
        // Composite Simpson on each table cell; the bump is flat to all
        // orders at ±1, so this converges very fast.
        let h = 2.0 / BUMP_TABLE as f64;
        let mut cumulative = Vec::with_capacity(BUMP_TABLE + 1);
        let mut acc = 0.0;
        cumulative.push(0.0);
        for k in 0..BUMP_TABLE {
            let a = -1.0 + k as f64 * h;
            let sub = 8;
            let s = h / sub as f64;
            let mut cell = 0.0;
            for j in 0..sub {
                let x0 = a + j as f64 * s;
                cell += s / 6.0 * (bump(x0) + 4.0 * bump(x0 + 0.5 * s) + bump(x0 + s));
            }
            acc += cell;
            cumulative.push(acc);
        }
        let norm = acc;
        for c in cumulative.iter_mut() {
            *c /= norm;
        }
        BumpCdf { norm, cumulative }
    })
}

/// Normalized bump density on (-1, 1).
pub fn bump_density(t: f64) -> f64 {
    bump(t) / bump_cdf_table().norm
}

/// Cumulative distribution of the normalized bump: 0 for t ≤ -1, 1 for
/// t ≥ 1, smooth and increasing in between. Cubic Hermite interpolation of
/// a Simpson table using the exact density as slope keeps it C¹ and accurate
/// to ~1e-13.
pub fn bump_cdf(t: f64) -> f64 {
    if t <= -1.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let tab = bump_cdf_table();
    let h = 2.0 / BUMP_TABLE as f64;
    let pos = (t + 1.0) / h;
    let k = (pos.floor() as usize).min(BUMP_TABLE - 1);
    let s = pos - k as f64;
    let x0 = -1.0 + k as f64 * h;
    let (p0, p1) = (tab.cumulative[k], tab.cumulative[k + 1]);
    let (m0, m1) = (bump_density(x0) * h, bump_density(x0 + h) * h);
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * p0 + (s3 - 2.0 * s2 + s) * m0 + (-2.0 * s3 + 3.0 * s2) * p1 + (s3 - s2) * m1
}

/// Indicator of `[lo, hi]` convolved with the normalized bump of half-width
/// `s`.
pub fn mollified_interval(x: f64, lo: f64, hi: f64, s: f64) -> f64 {
    (bump_cdf((hi - x) / s) - bump_cdf((lo - x) / s)).clamp(0.0, 1.0)
}

/// Smoothed characteristic function of the ball of radius `radius` about
/// `center`, sampled on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffFn {
    pub radius: f64,
    pub transition_width: f64,
    pub center: f64,
    pub samples: Vec<f64>,
    pub grid: Grid,
}

impl CutoffFn {
    /// Value at an arbitrary offset `z` from the center: the indicator of
    /// `|z| ≤ radius - width/2` convolved with a bump of half-width `width/2`.
    pub fn profile(radius: f64, width: f64, z: f64) -> f64 {
        let c = radius - 0.5 * width;
        mollified_interval(z, -c, c, 0.5 * width)
    }

    pub fn value(&self, x: f64) -> f64 {
        Self::profile(self.radius, self.transition_width, x - self.center)
    }

    /// Largest one-sided finite-difference slope of the samples.
    pub fn max_derivative(&self) -> f64 {
        let h = self.grid.spacing();
        self.samples
            .windows(2)
            .map(|w| (w[1] - w[0]).abs() / h)
            .fold(0.0, f64::max)
    }

    /// Largest second difference of the samples divided by h².
    pub fn max_second_difference(&self) -> f64 {
        let h = self.grid.spacing();
        self.samples
            .windows(3)
            .map(|w| (w[2] - 2.0 * w[1] + w[0]).abs() / (h * h))
            .fold(0.0, f64::max)
    }
}

/// Default transition width as a fraction of the radius.
pub const DEFAULT_WIDTH_FRACTION: f64 = 0.25;

/// Cut-off centered at the origin.
pub fn smoothed_cutoff(radius: f64, width: f64, grid: &Grid) -> Result<CutoffFn> {
    smoothed_cutoff_at(0.0, radius, width, grid)
}

pub fn smoothed_cutoff_at(center: f64, radius: f64, width: f64, grid: &Grid) -> Result<CutoffFn> {
    if !(width > 0.0 && width < radius && radius.is_finite()) {
        return Err(Error::InvalidGrid(format!(
            "cut-off needs 0 < width < radius, got width {width}, radius {radius}"
        )));
    }
    if center - radius < grid.min() || center + radius > grid.max() {
        return Err(Error::CutoffClipped { radius });
    }
    let samples = grid
        .points()
        .iter()
        .map(|&x| CutoffFn::profile(radius, width, x - center))
        .collect();
    Ok(CutoffFn {
        radius,
        transition_width: width,
        center,
        samples,
        grid: grid.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_examples() {
        let g = build_grid(401, (-20.0, 20.0)).unwrap();
        assert!((g.spacing() - 0.1).abs() < 1e-15);
        let g = build_grid(2, (0.0, 1.0)).unwrap();
        assert_eq!(g.spacing(), 1.0);
        let g = build_grid(5, (-1.0, 1.0)).unwrap();
        assert_eq!(g.points(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
    }

    #[test]
    fn grid_errors() {
        assert!(matches!(build_grid(1, (0.0, 1.0)), Err(Error::InvalidGrid(_))));
        assert!(matches!(build_grid(10, (1.0, 1.0)), Err(Error::InvalidExtent { .. })));
    }

    #[test]
    fn radial_grid_is_offset() {
        let g = Grid::radial(100, 50.0).unwrap();
        assert!((g.point(0) - 0.5).abs() < 1e-15);
        assert_eq!(g.point(99), 50.0);
        assert!((g.spacing() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn bump_cdf_endpoints_and_symmetry() {
        assert_eq!(bump_cdf(-1.0), 0.0);
        assert_eq!(bump_cdf(1.0), 1.0);
        assert!((bump_cdf(0.0) - 0.5).abs() < 1e-13);
        for t in [0.1, 0.37, 0.8, 0.99] {
            assert!((bump_cdf(t) + bump_cdf(-t) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cutoff_plateau_edge_and_slope() {
        let g = build_grid(2001, (-10.0, 10.0)).unwrap();
        let c = smoothed_cutoff(4.0, 1.0, &g).unwrap();
        assert_eq!(c.value(0.0), 1.0);
        assert_eq!(c.value(4.0), 0.0);
        assert_eq!(c.value(3.0), 1.0);
        let slope = c.max_derivative() * c.transition_width;
        assert!(slope <= 4.0, "C = {slope}");
        for (i, s) in c.samples.iter().enumerate() {
            assert!((0.0..=1.0).contains(s));
            assert!((s - c.samples[g.len() - 1 - i]).abs() < 1e-14);
        }
    }

    #[test]
    fn cutoff_clipped() {
        let g = build_grid(11, (-1.0, 1.0)).unwrap();
        assert!(matches!(
            smoothed_cutoff(2.0, 0.5, &g),
            Err(Error::CutoffClipped { .. })
        ));
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(8);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
        let m14: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((m14 - 2.0 / 15.0).abs() < 1e-14);
        let (x, w) = composite_gauss(0.0, 3.0, 4, 5);
        let cube: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x * x).sum();
        assert!((cube - 81.0 / 4.0).abs() < 1e-12);
    }

    #[test]
    fn table_parse_and_interpolate() {
        let t = PotentialTable::parse("# x v\n0 0\n1, 2\n\n2 4\n").unwrap();
        assert_eq!(t.eval(0.5), 1.0);
        assert_eq!(t.eval(-3.0), 0.0);
        assert_eq!(t.eval(7.0), 4.0);
        assert!(PotentialTable::parse("0 1 2").is_err());
    }
}
