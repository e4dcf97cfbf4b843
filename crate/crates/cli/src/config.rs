//! Experiment configuration.
//!
//! A config is a TOML file (or JSON when the path ends in `.json`). Every
//! section is optional; unknown keys are rejected. Example:
//!
//! ```toml
//! seed = 7
//! checks = ["mla", "localization"]
//! refinement = [128, 256, 512]
//!
//! [grid]
//! radius = 8.0
//! cells = 256
//!
//! [weight]
//! kind = "power"
//! exponent = 0.5
//!
//! [params]
//! p = 2.0
//! delta = 0.5
//! ```

use std::path::{Path, PathBuf};

use maxlab_core::checks::{gallery_family, refinement_family, PointwiseCheck};
use maxlab_core::{FamilyKind, FamilySpec, Grid1D, WeightSpec, WindowFamily};
use serde::{Deserialize, Serialize};

use crate::gridio::read_grid_csv;

/// Configuration problems map to exit code 2.
#[derive(Debug)]
pub enum ConfigError {
    Missing(PathBuf, std::io::Error),
    Parse(String),
    Invalid(String),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Missing(p, e) => write!(f, "cannot read config {}: {e}", p.display()),
            ConfigError::Parse(m) => write!(f, "malformed config: {m}"),
            ConfigError::Invalid(m) => write!(f, "invalid config: {m}"),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Cells on `[−radius, radius]`, or on `[origin, origin + cells·h]` when
/// `origin` and `h` are both given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub radius: f64,
    pub cells: usize,
    pub origin: Option<f64>,
    pub h: Option<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            radius: 8.0,
            cells: 256,
            origin: None,
            h: None,
        }
    }
}

impl GridConfig {
    pub fn grid(&self) -> maxlab_core::Result<Grid1D> {
        match (self.origin, self.h) {
            (Some(o), Some(h)) => Grid1D::new(o, h, self.cells),
            _ => Grid1D::symmetric(self.radius, self.cells),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Exponents {
    pub p: f64,
    /// Exponent of the pointwise comparison `M_r(Hf)`, `r ∈ (0, 1)`.
    pub cf_r: f64,
    pub delta: f64,
    pub lambda: f64,
    /// Localization `ε`; by default the largest admissible `k/N`.
    pub eps: Option<f64>,
}

impl Default for Exponents {
    fn default() -> Self {
        Self {
            p: 2.0,
            cf_r: 0.5,
            delta: 0.5,
            lambda: 0.3,
            eps: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Random configurations per pointwise check.
    pub configs: usize,
    pub cells: usize,
    /// Oracle comparisons run on a smaller grid (the oracle is cubic).
    pub oracle_configs: usize,
    pub oracle_cells: usize,
    /// Added to every oracle value. Nonzero only to exercise the failure
    /// path.
    pub oracle_perturbation: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            configs: 200,
            cells: 256,
            oracle_configs: 100,
            oracle_cells: 64,
            oracle_perturbation: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlacementConfig {
    pub cells: usize,
    pub placements: usize,
    pub lambda0: f64,
    pub eps: f64,
    pub support_lambda0: f64,
}

impl Default for PlacementConfig {
    fn default() -> Self {
        Self {
            cells: 512,
            placements: 20,
            lambda0: 0.3,
            eps: 0.05,
            support_lambda0: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NondegenConfig {
    pub cells: usize,
    pub trials: usize,
    pub constant: f64,
}

impl Default for NondegenConfig {
    fn default() -> Self {
        Self {
            cells: 512,
            trials: 50,
            constant: 2.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Chebyshev,
    PropSplitting,
    Mla,
    SharpDeltaBound,
    LocalOfMaximal,
    HilbertL2,
    OracleMaximal,
    OracleLocalMaximal,
    CoifmanRochberg,
    LocalOfMaximalStability,
    CfPointwise,
    SearchLambda0,
    WpRatio,
    FsRatio,
    Localization,
    SupportRq,
    DoublingStep,
    Decay,
    OrderContinuity,
    Nondegeneracy,
    Coherence,
}

impl CheckKind {
    pub const ALL: [CheckKind; 21] = [
        CheckKind::OracleMaximal,
        CheckKind::OracleLocalMaximal,
        CheckKind::Chebyshev,
        CheckKind::PropSplitting,
        CheckKind::Mla,
        CheckKind::SharpDeltaBound,
        CheckKind::LocalOfMaximal,
        CheckKind::HilbertL2,
        CheckKind::CoifmanRochberg,
        CheckKind::LocalOfMaximalStability,
        CheckKind::CfPointwise,
        CheckKind::SearchLambda0,
        CheckKind::WpRatio,
        CheckKind::FsRatio,
        CheckKind::Localization,
        CheckKind::SupportRq,
        CheckKind::DoublingStep,
        CheckKind::Decay,
        CheckKind::OrderContinuity,
        CheckKind::Nondegeneracy,
        CheckKind::Coherence,
    ];

    pub fn name(&self) -> &'static str {
        if let Some(p) = self.pointwise() {
            return p.name();
        }
        match self {
            CheckKind::CoifmanRochberg => "coifman_rochberg",
            CheckKind::LocalOfMaximalStability => "local_of_maximal_stability",
            CheckKind::CfPointwise => "cf_pointwise",
            CheckKind::SearchLambda0 => "search_lambda0",
            CheckKind::WpRatio => "wp_ratio",
            CheckKind::FsRatio => "fs_ratio",
            CheckKind::Localization => "localization",
            CheckKind::SupportRq => "support_rq",
            CheckKind::DoublingStep => "doubling_step",
            CheckKind::Decay => "decay",
            CheckKind::OrderContinuity => "order_continuity",
            CheckKind::Nondegeneracy => "nondegeneracy",
            CheckKind::Coherence => "coherence",
            _ => unreachable!("pointwise kinds handled above"),
        }
    }

    pub fn pointwise(&self) -> Option<PointwiseCheck> {
        Some(match self {
            CheckKind::Chebyshev => PointwiseCheck::Chebyshev,
            CheckKind::PropSplitting => PointwiseCheck::PropSplitting,
            CheckKind::Mla => PointwiseCheck::Mla,
            CheckKind::SharpDeltaBound => PointwiseCheck::SharpDeltaBound,
            CheckKind::LocalOfMaximal => PointwiseCheck::LocalOfMaximal,
            CheckKind::HilbertL2 => PointwiseCheck::HilbertL2,
            CheckKind::OracleMaximal => PointwiseCheck::OracleMaximal,
            CheckKind::OracleLocalMaximal => PointwiseCheck::OracleLocalMaximal,
            _ => return None,
        })
    }
}

fn default_weight() -> WeightSpec {
    WeightSpec::Constant { value: 1.0 }
}

fn default_refinement() -> Vec<usize> {
    vec![128, 256, 512]
}

fn default_gallery() -> Vec<WeightSpec> {
    vec![
        WeightSpec::Constant { value: 1.0 },
        WeightSpec::Power { exponent: 0.5 },
        WeightSpec::Power { exponent: 2.0 },
        WeightSpec::Vanishing,
    ]
}

fn default_decay_radii() -> Vec<f64> {
    vec![0.5, 1.0, 2.0, 4.0, 6.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default = "default_weight")]
    pub weight: WeightSpec,
    /// `x,value` CSV on the `[grid]`; replaces `weight` with its values.
    /// Relative paths are resolved against the config file.
    #[serde(default)]
    pub weight_csv: Option<PathBuf>,
    #[serde(default)]
    pub params: Exponents,
    /// Test family for norm-level checks; defaults to the gallery family.
    #[serde(default)]
    pub family: Option<Vec<FamilyKind>>,
    /// Resolution-independent family for refinement studies.
    #[serde(default)]
    pub refinement_family: Option<Vec<FamilyKind>>,
    #[serde(default)]
    pub window_family: WindowFamily,
    /// Checks run by `check`; empty means all.
    #[serde(default)]
    pub checks: Vec<CheckKind>,
    /// Cell counts of refinement studies on `[−radius, radius]`.
    #[serde(default = "default_refinement")]
    pub refinement: Vec<usize>,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub placement: PlacementConfig,
    #[serde(default)]
    pub nondegeneracy: NondegenConfig,
    #[serde(default = "default_gallery")]
    pub gallery: Vec<WeightSpec>,
    #[serde(default = "default_decay_radii")]
    pub decay_radii: Vec<f64>,
    #[serde(default)]
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        // An empty document fills every default.
        toml::from_str("").expect("empty config is valid")
    }
}

impl ExperimentConfig {
    pub fn family_spec(&self) -> FamilySpec {
        match &self.family {
            Some(kinds) => FamilySpec {
                kinds: kinds.clone(),
                seed: self.seed,
            },
            None => gallery_family(self.seed),
        }
    }

    pub fn refinement_family_spec(&self) -> FamilySpec {
        match &self.refinement_family {
            Some(kinds) => FamilySpec {
                kinds: kinds.clone(),
                seed: self.seed,
            },
            None => refinement_family(self.seed),
        }
    }

    pub fn checks(&self) -> Vec<CheckKind> {
        if self.checks.is_empty() {
            CheckKind::ALL.to_vec()
        } else {
            self.checks.clone()
        }
    }

    /// Range checks that serde cannot express.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        let e = &self.params;
        if !(e.p > 1.0 && e.p.is_finite()) {
            return bad(format!("p must exceed 1, got {}", e.p));
        }
        if !(e.cf_r > 0.0 && e.cf_r < 1.0) {
            return bad(format!("cf_r must lie in (0, 1), got {}", e.cf_r));
        }
        if !(e.delta > 0.0 && e.delta <= 1.0) {
            return bad(format!("delta must lie in (0, 1], got {}", e.delta));
        }
        if !(e.lambda > 0.0 && e.lambda < 1.0) {
            return bad(format!("lambda must lie in (0, 1), got {}", e.lambda));
        }
        if let Some(eps) = e.eps {
            if !(eps > 0.0 && eps <= 1.0) {
                return bad(format!("eps must lie in (0, 1], got {eps}"));
            }
        }
        if self.grid.origin.is_some() != self.grid.h.is_some() {
            return bad("grid.origin and grid.h must be given together".into());
        }
        if let Err(err) = self.grid.grid() {
            return bad(format!("grid: {err}"));
        }
        if self.refinement.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!(
                "refinement ladder must be strictly increasing, got {:?}",
                self.refinement
            ));
        }
        if self.refinement.iter().any(|&n| n == 0 || n % 2 != 0) {
            return bad("refinement cell counts must be even and positive".into());
        }
        if self.decay_radii.windows(2).any(|w| w[0] >= w[1]) {
            return bad("decay_radii must be strictly increasing".into());
        }
        let p = &self.placement;
        if !(p.lambda0 > 0.0
            && p.lambda0 < 1.0
            && p.support_lambda0 > 0.0
            && p.support_lambda0 < 1.0)
        {
            return bad("placement lambda0 values must lie in (0, 1)".into());
        }
        if !(p.eps > 0.0 && p.eps <= 1.0) {
            return bad(format!("placement eps must lie in (0, 1], got {}", p.eps));
        }
        if self.sweep.configs == 0 || self.sweep.oracle_configs == 0 {
            return bad("sweeps need at least one configuration".into());
        }
        if !self.sweep.oracle_perturbation.is_finite() {
            return bad("oracle_perturbation must be finite".into());
        }
        if !(self.nondegeneracy.constant > 0.0) {
            return bad("nondegeneracy constant must be positive".into());
        }
        Ok(())
    }
}

/// Reads and validates a config. `.json` files are parsed as JSON,
/// everything else as TOML.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| ConfigError::Missing(path.to_path_buf(), e))?;
    let cfg: ExperimentConfig = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?
    } else {
        toml::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?
    };
    let mut cfg = cfg;
    cfg.validate()?;
    if let Some(rel) = &cfg.weight_csv {
        let file = path.parent().unwrap_or(Path::new(".")).join(rel);
        let grid = cfg
            .grid
            .grid()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let values = read_grid_csv(&file, grid).map_err(ConfigError::Invalid)?;
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(ConfigError::Invalid(format!(
                "{}: weights must be finite and nonnegative",
                file.display()
            )));
        }
        cfg.weight = WeightSpec::Custom { values };
    }
    Ok(cfg)
}
