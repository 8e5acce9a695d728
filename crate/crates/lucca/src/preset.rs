//! Experiment presets: every knob of a run in one TOML file.
//!
//! Sections not present in a file take their defaults, so a preset can be as
//! short as `format_version`, `name` and the fields it changes. The shipped
//! presets live in `presets/*.toml`.

use std::fs;
use std::path::Path;

use lucca_core::conformal::DEFAULT_SIGMA0;
use lucca_core::dynamics::{double_integrator_model, LinearModel, DEFAULT_DT, DEFAULT_NOISE_SCALE};
use lucca_core::locart::LocartConfig;
use lucca_core::planner::{CostParams, MppiConfig};
use lucca_core::rng::SeedTree;
use lucca_core::statmath::CovMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::envfile::{parse_error, BUILTIN_NAMES};
use crate::error::{Error, Result};
use crate::grid::GridSpec;

pub const PRESET_FORMAT_VERSION: u32 = 1;

pub const BUILTIN_PRESETS: [&str; 3] = ["paper", "paper-fig4", "desk"];

const PRESET_SOURCES: [(&str, &str); 3] = [
    ("paper", include_str!("../presets/paper.toml")),
    ("paper-fig4", include_str!("../presets/paper-fig4.toml")),
    ("desk", include_str!("../presets/desk.toml")),
];

/// Tree settings; the split seed is derived from the preset seed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocartSection {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub part_ratio: f64,
}

impl Default for LocartSection {
    fn default() -> Self {
        let c = LocartConfig::default();
        Self {
            max_depth: c.max_depth,
            min_samples_split: c.min_samples_split,
            part_ratio: c.part_ratio,
        }
    }
}

/// MPPI settings; the sampling seed is derived per episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MppiSection {
    pub horizon: usize,
    pub n_samples: usize,
    pub lambda: f64,
    /// `[[a_x lo, a_x hi], [a_y lo, a_y hi]]`, m/s².
    pub control_bounds: [[f64; 2]; 2],
    /// Row-major 2×2 covariance of the control perturbations, (m/s²)².
    pub control_noise_cov: [[f64; 2]; 2],
}

impl Default for MppiSection {
    fn default() -> Self {
        let c = MppiConfig::default();
        Self {
            horizon: c.horizon,
            n_samples: c.n_samples,
            lambda: c.lambda,
            control_bounds: c.control_bounds,
            control_noise_cov: [[1.0, 0.0], [0.0, 1.0]],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub label: String,
    /// `[p_x, p_y, v_x, v_y]`
    pub state: [f64; 4],
    /// Constant acceleration applied at every step, m/s².
    pub control: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoverageSection {
    pub environment: String,
    pub n_samples: usize,
    pub horizon: usize,
    /// True trajectories start from a draw of the start belief.
    pub sample_start: bool,
    pub scenarios: Vec<Scenario>,
}

impl Default for CoverageSection {
    fn default() -> Self {
        let scenario = |label: &str, state, control| Scenario {
            label: label.into(),
            state,
            control,
        };
        Self {
            environment: "corridor".into(),
            n_samples: 2500,
            horizon: 8,
            sample_start: true,
            scenarios: vec![
                scenario("white-accel", [3.0, 3.6, 0.5, 0.0], [0.8, 0.0]),
                scenario("white-decel", [3.0, 3.6, 0.5, 0.0], [-0.8, 0.0]),
                scenario("yellow-accel", [2.1, 1.5, 0.0, 0.5], [0.0, 0.5]),
                scenario("yellow-decel", [2.1, 1.5, 0.0, 0.5], [0.0, -0.5]),
            ],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeatmapSection {
    /// Cells per axis.
    pub resolution: usize,
    /// Horizontal velocities of the exported grids, m/s.
    pub v_x: Vec<f64>,
}

impl Default for HeatmapSection {
    fn default() -> Self {
        Self {
            resolution: 64,
            v_x: vec![-2.0, 0.0, 2.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPreset {
    pub format_version: u32,
    pub name: String,
    #[serde(default = "all_environments")]
    pub environments: Vec<String>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub seed: u64,
    /// Episodes per (environment, method) cell.
    #[serde(default = "default_n_runs")]
    pub n_runs: usize,
    /// Step budget of one episode.
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    /// Diagonal of the initial belief covariance Σ₀.
    #[serde(default = "default_sigma0")]
    pub sigma0: f64,
    /// Scale of the process noise, `Q = noise_scale·BBᵀ`.
    #[serde(default = "default_noise_scale")]
    pub noise_scale: f64,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub locart: LocartSection,
    #[serde(default)]
    pub mppi: MppiSection,
    #[serde(default)]
    pub cost: CostParams,
    #[serde(default)]
    pub coverage: CoverageSection,
    #[serde(default)]
    pub heatmap: HeatmapSection,
}

fn all_environments() -> Vec<String> {
    BUILTIN_NAMES.iter().map(|s| s.to_string()).collect()
}
fn default_alpha() -> f64 {
    0.1
}
fn default_n_runs() -> usize {
    30
}
fn default_max_steps() -> usize {
    1500
}
fn default_sigma0() -> f64 {
    DEFAULT_SIGMA0
}
fn default_noise_scale() -> f64 {
    DEFAULT_NOISE_SCALE
}

impl Default for ExperimentPreset {
    fn default() -> Self {
        Self {
            format_version: PRESET_FORMAT_VERSION,
            name: "default".into(),
            environments: all_environments(),
            alpha: default_alpha(),
            seed: 0,
            n_runs: default_n_runs(),
            max_steps: default_max_steps(),
            sigma0: default_sigma0(),
            noise_scale: default_noise_scale(),
            grid: GridSpec::default(),
            locart: LocartSection::default(),
            mppi: MppiSection::default(),
            cost: CostParams::default(),
            coverage: CoverageSection::default(),
            heatmap: HeatmapSection::default(),
        }
    }
}

impl ExperimentPreset {
    fn invalid(&self, field: &str, reason: impl Into<String>) -> Error {
        Error::Invalid {
            path: format!("preset {}", self.name),
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Checks ranges and that referenced environments resolve.
    pub fn validate(&self) -> Result<()> {
        if self.format_version != PRESET_FORMAT_VERSION {
            return Err(self.invalid(
                "format_version",
                format!("unsupported version {} (expected {PRESET_FORMAT_VERSION})", self.format_version),
            ));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(self.invalid("alpha", "must lie in (0, 1)"));
        }
        if !(self.sigma0 > 0.0 && self.sigma0.is_finite()) {
            return Err(self.invalid("sigma0", "must be positive"));
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return Err(self.invalid("noise_scale", "must be non-negative"));
        }
        if self.environments.is_empty() {
            return Err(self.invalid("environments", "needs at least one environment"));
        }
        for name in self.environments.iter().chain([&self.coverage.environment]) {
            crate::envfile::resolve_environment(name)?;
        }
        self.grid.validate()?;
        if self.locart.max_depth == 0 {
            return Err(self.invalid("locart.max_depth", "must be at least 1"));
        }
        if !(self.locart.part_ratio > 0.0 && self.locart.part_ratio < 1.0) {
            return Err(self.invalid("locart.part_ratio", "must lie in (0, 1)"));
        }
        self.mppi_config(0)?.validate().map_err(|e| match e {
            lucca_core::Error::Validation { field, reason } => self.invalid(&format!("mppi.{field}"), reason),
            other => Error::Core(other),
        })?;
        if self.coverage.horizon == 0 {
            return Err(self.invalid("coverage.horizon", "must be at least 1"));
        }
        if self.coverage.n_samples == 0 {
            return Err(self.invalid("coverage.n_samples", "must be at least 1"));
        }
        if self.heatmap.resolution < 2 {
            return Err(self.invalid("heatmap.resolution", "must be at least 2"));
        }
        Ok(())
    }

    pub fn seeds(&self) -> SeedTree {
        SeedTree::new(self.seed)
    }

    /// Approximate model used for prediction and planning.
    pub fn approx_model(&self) -> Result<LinearModel> {
        Ok(double_integrator_model(DEFAULT_DT, DEFAULT_NOISE_SCALE)?)
    }

    /// The model whose noise drives the simulated true system.
    pub fn true_model(&self) -> Result<LinearModel> {
        Ok(double_integrator_model(DEFAULT_DT, self.noise_scale)?)
    }

    pub fn sigma0_cov(&self) -> Result<CovMatrix<4>> {
        Ok(CovMatrix::scaled_identity(self.sigma0)?)
    }

    pub fn locart_config(&self, env_name: &str) -> LocartConfig {
        LocartConfig {
            max_depth: self.locart.max_depth,
            min_samples_split: self.locart.min_samples_split,
            part_ratio: self.locart.part_ratio,
            seed: self.seeds().child(env_name).derive("locart-split"),
        }
    }

    pub fn mppi_config(&self, seed: u64) -> Result<MppiConfig> {
        let rows: Vec<Vec<f64>> = self.mppi.control_noise_cov.iter().map(|r| r.to_vec()).collect();
        let control_noise_cov =
            CovMatrix::from_rows(&rows).map_err(|_| self.invalid("mppi.control_noise_cov", "must be symmetric positive definite"))?;
        Ok(MppiConfig {
            horizon: self.mppi.horizon,
            n_samples: self.mppi.n_samples,
            lambda: self.mppi.lambda,
            control_bounds: self.mppi.control_bounds,
            control_noise_cov,
            seed,
        })
    }

    /// Canonical JSON of every field; the basis of [`Self::config_hash`].
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("preset serializes")
    }

    /// Hex SHA-256 of the canonical JSON.
    pub fn config_hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("preset serializes")
    }
}

pub fn parse_preset(src: &str, origin: &str) -> Result<ExperimentPreset> {
    let preset: ExperimentPreset = toml::from_str(src).map_err(|e| parse_error(origin, src, &e))?;
    preset.validate()?;
    Ok(preset)
}

pub fn load_preset(path: &Path) -> Result<ExperimentPreset> {
    let src = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_preset(&src, &path.display().to_string())
}

pub fn builtin_preset(name: &str) -> Result<ExperimentPreset> {
    let (_, src) = PRESET_SOURCES
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::Unknown {
            kind: "preset",
            name: name.to_string(),
            expected: BUILTIN_PRESETS.join(", "),
        })?;
    parse_preset(src, &format!("<builtin preset {name}>"))
}

/// A builtin preset name, or otherwise a path to a preset file.
pub fn resolve_preset(name_or_path: &str) -> Result<ExperimentPreset> {
    if !BUILTIN_PRESETS.contains(&name_or_path) && Path::new(name_or_path).exists() {
        load_preset(Path::new(name_or_path))
    } else {
        builtin_preset(name_or_path)
    }
}
