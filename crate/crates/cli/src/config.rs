//! Scenario configuration: a TOML document with one table per concern.
//! Every knob has a default, and [`ScenarioConfig::validate`] runs before
//! any computation starts.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vdwlab_core::symmetry::SymmetryType;
use vdwlab_core::vdw::Method;
use vdwlab_core::{build_grid, Grid, Nucleus, PotentialSpec, SystemSpec};

/// Version of the configuration schema echoed in every report.
pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("malformed config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {field}: {reason}")]
    Invalid { field: &'static str, reason: String },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Sweep,
    C6,
    FeshbachCheck,
    SymmetryCheck,
    ImsCheck,
    StabilityCheck,
    PropertyE,
    Necessity,
    BoCorrection,
}

impl Scenario {
    pub const ALL: [Scenario; 9] = [
        Scenario::Sweep,
        Scenario::C6,
        Scenario::FeshbachCheck,
        Scenario::SymmetryCheck,
        Scenario::ImsCheck,
        Scenario::StabilityCheck,
        Scenario::PropertyE,
        Scenario::Necessity,
        Scenario::BoCorrection,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Sweep => "sweep",
            Scenario::C6 => "c6",
            Scenario::FeshbachCheck => "feshbach_check",
            Scenario::SymmetryCheck => "symmetry_check",
            Scenario::ImsCheck => "ims_check",
            Scenario::StabilityCheck => "stability_check",
            Scenario::PropertyE => "property_e",
            Scenario::Necessity => "necessity",
            Scenario::BoCorrection => "bo_correction",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Scenario::Sweep => "interaction energy W(R) of two 1D atoms and its power-law fit",
            Scenario::C6 => "C6 by a deflated linear solve against sum-over-states oracles (1D and 3D H-H)",
            Scenario::FeshbachCheck => "Feshbach fixed points against direct eigenvalues on random matrices and H-H",
            Scenario::SymmetryCheck => "projector algebra and branching identities for S_N, N <= 4",
            Scenario::ImsCheck => "IMS localization identity and 1/R^2 scaling of the gradient term",
            Scenario::StabilityCheck => "deflated bottom of H_perp against E(inf) + gamma_0/2",
            Scenario::PropertyE => "Property (E) for a 1D well and (E') on the ionization table",
            Scenario::Necessity => "rigged degenerate ions: 1/R interaction and Coulomb tail of PHP",
            Scenario::BoCorrection => "first-order adiabatic correction against W(R)",
        }
    }
}

/// Two-nucleus line system shared by most scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    /// Points per electron axis (signed so that negative input is caught by
    /// validation rather than by the parser).
    pub grid_points: i64,
    pub extent: [f64; 2],
    pub softening: f64,
    pub charges: Vec<u32>,
    /// Separation used by single-geometry scenarios.
    pub separation: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            grid_points: 201,
            extent: [-25.0, 25.0],
            softening: 1.0,
            charges: vec![1, 1],
            separation: 14.0,
        }
    }
}

impl SystemConfig {
    pub fn grid(&self) -> vdwlab_core::Result<Grid> {
        build_grid(self.grid_points as usize, (self.extent[0], self.extent[1]))
    }

    /// Neutral system with the nuclei at `midpoint ∓ r/2`.
    pub fn spec_at(&self, r: f64) -> vdwlab_core::Result<SystemSpec> {
        let grid = self.grid()?;
        let c = grid.midpoint();
        let xs = [c - 0.5 * r, c + 0.5 * r];
        let spec = SystemSpec {
            nuclei: self.charges.iter().zip(xs).map(|(&z, x)| Nucleus::new(x, z)).collect(),
            electrons: self.charges.iter().sum::<u32>() as usize,
            potential: PotentialSpec::soft_coulomb(self.softening)?,
            coupling: 1.0,
            mode: vdwlab_core::Mode::Line { grid },
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericsConfig {
    pub tol: f64,
    pub cutoff_fraction: f64,
    /// Young diagram of the symmetry type; `None` for distinguishable
    /// electrons.
    pub symmetry: Option<Vec<usize>>,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            cutoff_fraction: vdwlab_core::feshbach::DEFAULT_CUTOFF_FRACTION,
            symmetry: None,
        }
    }
}

impl NumericsConfig {
    pub fn symmetry_type(&self) -> vdwlab_core::Result<Option<SymmetryType>> {
        self.symmetry.clone().map(SymmetryType::from_diagram).transpose()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub r_min: f64,
    pub r_max: f64,
    pub r_step: f64,
    pub window: [f64; 2],
    pub method: Method,
    /// Accepted range of the fitted exponent.
    pub exponent_range: [f64; 2],
    /// Relative tolerance on `R⁶|W(r_max)|` against `σ₁₂`.
    pub sigma_tolerance: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            r_min: 12.0,
            r_max: 24.0,
            r_step: 2.0,
            window: [12.0, 24.0],
            method: Method::Direct,
            exponent_range: [-6.2, -5.8],
            sigma_tolerance: 0.02,
        }
    }
}

impl SweepConfig {
    pub fn separations(&self) -> Vec<f64> {
        let n = ((self.r_max - self.r_min) / self.r_step + 1e-9).floor() as usize;
        (0..=n).map(|k| self.r_min + self.r_step * k as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct C6Config {
    pub radial_points: usize,
    pub radial_extent: f64,
    pub direction: [f64; 3],
    pub tolerance: f64,
}

impl Default for C6Config {
    fn default() -> Self {
        Self {
            radial_points: 1000,
            radial_extent: 40.0,
            direction: [0.0, 0.0, 1.0],
            tolerance: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeshbachConfig {
    pub trials: usize,
    pub max_dim: usize,
    pub max_rank: usize,
    pub energy_tolerance: f64,
    pub residual_tolerance: f64,
}

impl Default for FeshbachConfig {
    fn default() -> Self {
        Self {
            trials: 100,
            max_dim: 50,
            max_rank: 5,
            energy_tolerance: 1e-10,
            residual_tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SymmetryCheckConfig {
    pub max_order: usize,
    pub axis: usize,
    pub tolerance: f64,
}

impl Default for SymmetryCheckConfig {
    fn default() -> Self {
        Self {
            max_order: 4,
            axis: 3,
            tolerance: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalizationConfig {
    pub r_values: Vec<f64>,
    pub ims_tolerance: f64,
    pub slope_tolerance: f64,
}

impl Default for LocalizationConfig {
    fn default() -> Self {
        Self {
            r_values: vec![10.0, 14.0, 20.0],
            ims_tolerance: 1e-8,
            slope_tolerance: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropertyEConfig {
    pub ion_table: Option<PathBuf>,
    pub elements: Option<Vec<String>>,
    pub strength: f64,
    pub max_extra: usize,
}

impl Default for PropertyEConfig {
    fn default() -> Self {
        Self {
            ion_table: None,
            elements: None,
            strength: 1.0,
            max_extra: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NecessityConfig {
    pub tail_r: f64,
    pub exponent_range: [f64; 2],
    pub tail_tolerance: f64,
}

impl Default for NecessityConfig {
    fn default() -> Self {
        Self {
            tail_r: 20.0,
            exponent_range: [-1.2, -0.8],
            tail_tolerance: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoConfig {
    pub masses: Vec<f64>,
    pub step: f64,
    /// Upper bound on `|interaction part| / |W|`.
    pub max_ratio: f64,
    /// Young diagram of the sector the ground state is taken in. The
    /// distinguishable-particle ground level of two distant atoms is nearly
    /// degenerate, so the default is the symmetric type.
    pub symmetry: Option<Vec<usize>>,
}

impl Default for BoConfig {
    fn default() -> Self {
        Self {
            masses: vec![vdwlab_core::vdw::PROTON_MASS; 2],
            step: 0.01,
            max_ratio: 0.1,
            symmetry: Some(vec![2]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("vdwlab-out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub system: SystemConfig,
    #[serde(default)]
    pub numerics: NumericsConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub c6: C6Config,
    #[serde(default)]
    pub feshbach: FeshbachConfig,
    #[serde(default)]
    pub symmetry: SymmetryCheckConfig,
    #[serde(default)]
    pub localization: LocalizationConfig,
    #[serde(default)]
    pub property_e: PropertyEConfig,
    #[serde(default)]
    pub necessity: NecessityConfig,
    #[serde(default)]
    pub bo: BoConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ScenarioConfig {
    /// Defaults for a scenario.
    pub fn default_for(scenario: Scenario) -> Self {
        Self {
            scenario,
            seed: 0,
            system: SystemConfig::default(),
            numerics: NumericsConfig::default(),
            sweep: SweepConfig::default(),
            c6: C6Config::default(),
            feshbach: FeshbachConfig::default(),
            symmetry: SymmetryCheckConfig::default(),
            localization: LocalizationConfig::default(),
            property_e: PropertyEConfig::default(),
            necessity: NecessityConfig::default(),
            bo: BoConfig::default(),
            output: OutputConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let c: Self = toml::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let s = &self.system;
        if s.grid_points < 3 {
            return Err(invalid(
                "system.grid_points",
                format!("must be at least 3, got {}", s.grid_points),
            ));
        }
        if !(s.extent[0] < s.extent[1]) || !s.extent.iter().all(|x| x.is_finite()) {
            return Err(invalid(
                "system.extent",
                format!("need x_min < x_max, got {:?}", s.extent),
            ));
        }
        if !(s.softening > 0.0) {
            return Err(invalid("system.softening", "must be positive"));
        }
        if s.charges.len() != 2 || s.charges.contains(&0) {
            return Err(invalid("system.charges", "two positive nuclear charges are required"));
        }
        let width = s.extent[1] - s.extent[0];
        if !(s.separation > 0.0 && s.separation < width) {
            return Err(invalid("system.separation", "must be positive and inside the grid"));
        }
        let n = &self.numerics;
        if !(n.tol > 0.0 && n.tol < 1e-3) {
            return Err(invalid("numerics.tol", "must lie in (0, 1e-3)"));
        }
        if !(n.cutoff_fraction > 0.0 && n.cutoff_fraction < 0.5) {
            return Err(invalid("numerics.cutoff_fraction", "must lie in (0, 1/2)"));
        }
        if let Some(t) = n
            .symmetry_type()
            .map_err(|e| invalid("numerics.symmetry", e.to_string()))?
        {
            let electrons: u32 = s.charges.iter().sum();
            if t.order() != electrons as usize {
                return Err(invalid(
                    "numerics.symmetry",
                    format!("diagram has {} boxes for {electrons} electrons", t.order()),
                ));
            }
        }
        let w = &self.sweep;
        if !(w.r_min > 0.0 && w.r_step > 0.0 && w.r_max >= w.r_min && w.r_max < width) {
            return Err(invalid(
                "sweep",
                "need 0 < r_min <= r_max inside the grid and r_step > 0",
            ));
        }
        if !(w.window[0] < w.window[1]) {
            return Err(invalid("sweep.window", "need window[0] < window[1]"));
        }
        if !(w.exponent_range[0] < w.exponent_range[1]) {
            return Err(invalid("sweep.exponent_range", "need an increasing range"));
        }
        let c = &self.c6;
        if c.radial_points < 10 || !(c.radial_extent > 0.0) {
            return Err(invalid("c6", "radial_points >= 10 and radial_extent > 0 are required"));
        }
        if c.direction.iter().all(|x| *x == 0.0) {
            return Err(invalid("c6.direction", "must be nonzero"));
        }
        let f = &self.feshbach;
        if f.trials == 0 || f.max_rank == 0 || f.max_dim <= f.max_rank {
            return Err(invalid("feshbach", "need trials > 0 and 0 < max_rank < max_dim"));
        }
        let y = &self.symmetry;
        if !(2..=vdwlab_core::symmetry::MAX_ORDER).contains(&y.max_order) || y.axis < 2 {
            return Err(invalid("symmetry", "max_order in 2..=6 and axis >= 2 are required"));
        }
        if (y.axis as u128).pow(y.max_order as u32) > 1 << 22 {
            return Err(invalid("symmetry", "axis^max_order exceeds 2^22"));
        }
        let l = &self.localization;
        if l.r_values.is_empty() || l.r_values.iter().any(|r| !(*r > 0.0 && *r < width)) {
            return Err(invalid("localization.r_values", "need separations inside the grid"));
        }
        if self.scenario == Scenario::ImsCheck && l.r_values.len() < 2 {
            return Err(invalid(
                "localization.r_values",
                "the slope needs at least two separations",
            ));
        }
        let p = &self.property_e;
        if !(p.strength > 0.0) || p.max_extra == 0 {
            return Err(invalid("property_e", "strength > 0 and max_extra >= 1 are required"));
        }
        let b = &self.bo;
        if b.masses.len() != 2 || b.masses.iter().any(|m| !(*m > 0.0)) || !(b.step > 0.0) {
            return Err(invalid("bo", "two positive masses and a positive step are required"));
        }
        if let Some(d) = &b.symmetry {
            let t = SymmetryType::from_diagram(d.clone()).map_err(|e| invalid("bo.symmetry", e.to_string()))?;
            if t.order() != s.charges.iter().sum::<u32>() as usize {
                return Err(invalid("bo.symmetry", "diagram size must equal the electron count"));
            }
        }
        if !(self.necessity.tail_r > 0.0 && self.necessity.tail_r < width) {
            return Err(invalid("necessity.tail_r", "must lie inside the grid"));
        }
        Ok(())
    }
}
