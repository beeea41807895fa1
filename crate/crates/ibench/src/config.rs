//! Run configuration: the TOML schema, environment overrides, and
//! conversions into the core pipeline types.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use editid_core::integrate::{
    select_blocks, BlockId, BlockPolicy, FusionMethod, IntegrationConfig, ReweightMethod,
    StrengthSchedule, Stream,
};
use editid_core::fusion::FusionNetworkSpec;
use editid_core::metrics::LandmarkNorm;
use editid_core::sampler::VectorFieldSpec;
use editid_core::selection::{LayerSelection, ShiftStrategy};

/// Environment variable overriding `output_dir`.
pub const ENV_OUTPUT_DIR: &str = "IBENCH_OUTPUT_DIR";
/// Environment variable overriding `workers`.
pub const ENV_WORKERS: &str = "IBENCH_WORKERS";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn default_workers() -> usize {
    1
}

fn default_steps() -> usize {
    20
}

fn default_token_dim() -> usize {
    32
}

fn default_cond_dim() -> usize {
    32
}

fn default_heads() -> usize {
    4
}

fn default_id_dim() -> usize {
    32
}

fn default_local_dim() -> usize {
    16
}

fn default_picks() -> Vec<usize> {
    vec![4, 14, 16, 18, 20]
}

fn default_block_count() -> usize {
    10
}

fn default_base() -> f64 {
    1.0
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("ibench-out")
}

fn default_metrics() -> Vec<String> {
    ALL_METRICS.iter().map(|s| s.to_string()).collect()
}

/// Every metric the report knows, in the report's column order.
pub const ALL_METRICS: [&str; 13] = [
    "fid",
    "aesthetic",
    "imaging_quality",
    "posediv_yaw",
    "posediv_pitch",
    "posediv_roll",
    "landmarkdiff",
    "exprdiv",
    "facesim",
    "clipi",
    "clipt",
    "dino",
    "fgis",
];

/// Human-readable column headers matching [`ALL_METRICS`].
pub const METRIC_HEADERS: [&str; 13] = [
    "FID",
    "Aesthetic",
    "Image Quality",
    "Posediv(yaw)",
    "Posediv(pitch)",
    "Posediv(roll)",
    "Landmarkdiff",
    "Exprdiv",
    "Facesim",
    "ClipI",
    "ClipT",
    "Dino",
    "Fgis",
];

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub backends: BackendsSection,
    #[serde(default)]
    pub sampler: SamplerSection,
    #[serde(default)]
    pub feature_branch: FeatureBranchSection,
    #[serde(default)]
    pub integration: IntegrationSection,
    #[serde(default)]
    pub datasets: Vec<DatasetSection>,
    #[serde(default)]
    pub prompts: Vec<PromptSection>,
    #[serde(default)]
    pub pairing: Vec<PairingSection>,
    #[serde(default)]
    pub metrics: MetricsSection,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BackendsSection {
    /// Root seed all toy backend seeds derive from.
    #[serde(default)]
    pub seed: u64,
}

impl Default for BackendsSection {
    fn default() -> Self {
        Self { seed: 0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SamplerSection {
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_token_dim")]
    pub token_dim: usize,
    #[serde(default = "default_cond_dim")]
    pub cond_dim: usize,
    #[serde(default = "default_heads")]
    pub heads: usize,
    #[serde(default)]
    pub field_seed: u64,
}

impl Default for SamplerSection {
    fn default() -> Self {
        Self {
            steps: default_steps(),
            token_dim: default_token_dim(),
            cond_dim: default_cond_dim(),
            heads: default_heads(),
            field_seed: 0,
        }
    }
}

impl SamplerSection {
    pub fn vector_field_spec(&self) -> VectorFieldSpec {
        VectorFieldSpec {
            dim: self.token_dim,
            cond_dim: self.cond_dim,
            heads: self.heads,
            seed: self.field_seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FeatureBranchSection {
    /// Full five-slot selection string like "[4,-,-,-,-]"; takes precedence
    /// over `picks` and allows zeroed slots at any position.
    #[serde(default)]
    pub selection: Option<String>,
    /// Raw layer picks; coerced to five slots via `strategy` when needed.
    #[serde(default = "default_picks")]
    pub picks: Vec<usize>,
    /// padding | interpolate | average | max; required iff picks.len() != 5.
    #[serde(default)]
    pub strategy: Option<String>,
    #[serde(default = "default_id_dim")]
    pub id_dim: usize,
    #[serde(default = "default_local_dim")]
    pub local_dim: usize,
    #[serde(default)]
    pub network_seed: u64,
}

impl Default for FeatureBranchSection {
    fn default() -> Self {
        Self {
            selection: None,
            picks: default_picks(),
            strategy: None,
            id_dim: default_id_dim(),
            local_dim: default_local_dim(),
            network_seed: 0,
        }
    }
}

impl FeatureBranchSection {
    /// The parsed explicit selection, when one is configured.
    pub fn layer_selection(&self) -> Result<Option<LayerSelection>, ConfigError> {
        self.selection
            .as_deref()
            .map(|s| {
                s.parse::<LayerSelection>()
                    .map_err(|e| ConfigError::Invalid(format!("selection '{s}': {e}")))
            })
            .transpose()
    }

    pub fn shift_strategy(&self) -> Result<Option<ShiftStrategy>, ConfigError> {
        self.strategy
            .as_deref()
            .map(|s| {
                s.parse::<ShiftStrategy>()
                    .map_err(|e| ConfigError::Invalid(format!("strategy: {e}")))
            })
            .transpose()
    }

    pub fn network_spec(&self) -> FusionNetworkSpec {
        FusionNetworkSpec {
            global_dim: 2 * self.local_dim,
            local_dim: self.local_dim,
            hidden_dim: self.id_dim,
            id_dim: self.id_dim,
            seed: self.network_seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct IntegrationSection {
    #[serde(default = "default_block_count")]
    pub block_count: usize,
    /// Explicit blocks like "dual:3" / "single:17"; overrides block_count.
    #[serde(default)]
    pub blocks: Option<Vec<String>>,
    /// seeded-gaussian-linear | dct | partial-fourier
    #[serde(default)]
    pub reweight: ReweightSection,
    /// weight | dropout | concat | sum | multiply | max
    #[serde(default)]
    pub fusion: FusionSection,
    /// constant | early-boost
    #[serde(default)]
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub seed: u64,
}

impl Default for IntegrationSection {
    fn default() -> Self {
        Self {
            block_count: default_block_count(),
            blocks: None,
            reweight: ReweightSection::default(),
            fusion: FusionSection::default(),
            schedule: ScheduleSection::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ReweightSection {
    #[serde(default = "ReweightSection::default_kind")]
    pub kind: String,
    #[serde(default)]
    pub seed: u64,
}

impl ReweightSection {
    fn default_kind() -> String {
        "seeded-gaussian-linear".into()
    }
}

impl Default for ReweightSection {
    fn default() -> Self {
        Self {
            kind: Self::default_kind(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FusionSection {
    #[serde(default = "FusionSection::default_kind")]
    pub kind: String,
    #[serde(default)]
    pub w1: Option<f64>,
    #[serde(default)]
    pub w2: Option<f64>,
    #[serde(default)]
    pub drop_rate: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl FusionSection {
    fn default_kind() -> String {
        "concat".into()
    }

    pub fn method(&self) -> Result<FusionMethod, ConfigError> {
        let method = match self.kind.as_str() {
            "weight" => {
                let (w1, w2) = match (self.w1, self.w2) {
                    (Some(a), Some(b)) => (a, b),
                    _ => {
                        return Err(ConfigError::Invalid(
                            "fusion kind 'weight' requires w1 and w2".into(),
                        ))
                    }
                };
                FusionMethod::Weight { w1, w2 }
            }
            "dropout" => {
                let drop_rate = self.drop_rate.ok_or_else(|| {
                    ConfigError::Invalid("fusion kind 'dropout' requires drop_rate".into())
                })?;
                FusionMethod::Dropout {
                    drop_rate,
                    seed: self.seed,
                }
            }
            "concat" => FusionMethod::Concat,
            "sum" => FusionMethod::Sum,
            "multiply" => FusionMethod::Multiply,
            "max" => FusionMethod::Max,
            other => {
                return Err(ConfigError::Invalid(format!("unknown fusion kind '{other}'")))
            }
        };
        Ok(method)
    }
}

impl Default for FusionSection {
    fn default() -> Self {
        Self {
            kind: Self::default_kind(),
            w1: None,
            w2: None,
            drop_rate: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    #[serde(default = "ScheduleSection::default_kind")]
    pub kind: String,
    #[serde(default = "default_base")]
    pub base: f64,
    #[serde(default)]
    pub boost: f64,
    #[serde(default)]
    pub boost_until_fraction: f64,
}

impl ScheduleSection {
    fn default_kind() -> String {
        "constant".into()
    }

    pub fn schedule(&self) -> Result<StrengthSchedule, ConfigError> {
        match self.kind.as_str() {
            "constant" => Ok(StrengthSchedule::Constant { base: self.base }),
            "early-boost" => Ok(StrengthSchedule::EarlyBoost {
                base: self.base,
                boost: self.boost,
                boost_until_fraction: self.boost_until_fraction,
            }),
            other => Err(ConfigError::Invalid(format!(
                "unknown schedule kind '{other}'"
            ))),
        }
    }
}

impl Default for ScheduleSection {
    fn default() -> Self {
        Self {
            kind: Self::default_kind(),
            base: default_base(),
            boost: 0.0,
            boost_until_fraction: 0.0,
        }
    }
}

fn parse_block(s: &str) -> Result<BlockId, ConfigError> {
    let (stream, index) = s
        .split_once(':')
        .ok_or_else(|| ConfigError::Invalid(format!("block '{s}' must be stream:index")))?;
    let index: usize = index
        .trim()
        .parse()
        .map_err(|_| ConfigError::Invalid(format!("block index '{index}' not a number")))?;
    let stream = match stream.trim() {
        "dual" => Stream::Dual,
        "single" => Stream::Single,
        other => return Err(ConfigError::Invalid(format!("unknown stream '{other}'"))),
    };
    Ok(BlockId { stream, index })
}

impl IntegrationSection {
    pub fn integration_config(&self, id_dim: usize) -> Result<IntegrationConfig, ConfigError> {
        let blocks = match &self.blocks {
            Some(list) if !list.is_empty() => {
                let parsed: Vec<BlockId> =
                    list.iter().map(|s| parse_block(s)).collect::<Result<_, _>>()?;
                select_blocks(parsed.len(), &BlockPolicy::Explicit(parsed))
                    .map_err(|e| ConfigError::Invalid(e.to_string()))?
            }
            _ if self.block_count == 0 => editid_core::integrate::BlockSet::empty(),
            _ => select_blocks(self.block_count, &BlockPolicy::EvenlySpaced)
                .map_err(|e| ConfigError::Invalid(e.to_string()))?,
        };
        let reweight = match self.reweight.kind.as_str() {
            "seeded-gaussian-linear" => ReweightMethod::SeededGaussianLinear {
                seed: self.reweight.seed,
                target_dim: id_dim,
            },
            "dct" => ReweightMethod::Dct { target_dim: id_dim },
            "partial-fourier" => ReweightMethod::PartialFourier { target_dim: id_dim },
            other => {
                return Err(ConfigError::Invalid(format!(
                    "unknown reweight kind '{other}'"
                )))
            }
        };
        let cfg = IntegrationConfig {
            blocks,
            reweight,
            fusion: self.fusion.method()?,
            schedule: self.schedule.schedule()?,
            seed: self.seed,
        };
        cfg.validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub name: String,
    pub image_dir: PathBuf,
    #[serde(default)]
    pub expected_count: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PromptSection {
    pub name: String,
    pub file: PathBuf,
    #[serde(default)]
    pub expected_count: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PairingSection {
    pub dataset: String,
    pub prompts: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MetricsSection {
    #[serde(default = "default_metrics")]
    pub enabled: Vec<String>,
    /// own-diagonal (default) | shared-max-diagonal
    #[serde(default = "MetricsSection::default_norm")]
    pub landmark_norm: String,
}

impl MetricsSection {
    fn default_norm() -> String {
        "own-diagonal".into()
    }

    pub fn norm(&self) -> Result<LandmarkNorm, ConfigError> {
        match self.landmark_norm.as_str() {
            "own-diagonal" => Ok(LandmarkNorm::OwnDiagonal),
            "shared-max-diagonal" => Ok(LandmarkNorm::SharedMaxDiagonal),
            other => Err(ConfigError::Invalid(format!(
                "unknown landmark_norm '{other}'"
            ))),
        }
    }

    pub fn is_enabled(&self, metric: &str) -> bool {
        self.enabled.iter().any(|m| m == metric)
    }
}

impl Default for MetricsSection {
    fn default() -> Self {
        Self {
            enabled: default_metrics(),
            landmark_norm: Self::default_norm(),
        }
    }
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: default_output_dir(),
            workers: default_workers(),
            backends: BackendsSection::default(),
            sampler: SamplerSection::default(),
            feature_branch: FeatureBranchSection::default(),
            integration: IntegrationSection::default(),
            datasets: Vec::new(),
            prompts: Vec::new(),
            pairing: Vec::new(),
            metrics: MetricsSection::default(),
        }
    }
}

impl Config {
    /// Parse TOML text, then apply the two supported environment overrides.
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let mut config: Config = toml::from_str(text)?;
        config.apply_env_overrides();
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config: Config = toml::from_str(&text)?;
        // paths in the file are relative to the file's directory
        if let Some(dir) = path.parent() {
            if !config.output_dir.is_absolute() {
                config.output_dir = dir.join(&config.output_dir);
            }
            for ds in &mut config.datasets {
                if !ds.image_dir.is_absolute() {
                    ds.image_dir = dir.join(&ds.image_dir);
                }
            }
            for ps in &mut config.prompts {
                if !ps.file.is_absolute() {
                    ps.file = dir.join(&ps.file);
                }
            }
        }
        config.apply_env_overrides();
        config.validate()?;
        Ok(config)
    }

    fn apply_env_overrides(&mut self) {
        if let Ok(dir) = std::env::var(ENV_OUTPUT_DIR) {
            if !dir.is_empty() {
                self.output_dir = PathBuf::from(dir);
            }
        }
        if let Ok(workers) = std::env::var(ENV_WORKERS) {
            if let Ok(n) = workers.parse::<usize>() {
                if n >= 1 {
                    self.workers = n;
                }
            }
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.workers == 0 {
            return Err(ConfigError::Invalid("workers must be >= 1".into()));
        }
        if self.sampler.steps == 0 {
            return Err(ConfigError::Invalid("sampler.steps must be >= 1".into()));
        }
        for m in &self.metrics.enabled {
            if !ALL_METRICS.contains(&m.as_str()) {
                return Err(ConfigError::Invalid(format!("unknown metric '{m}'")));
            }
        }
        self.metrics.norm()?;
        self.feature_branch.layer_selection()?;
        self.feature_branch.shift_strategy()?;
        self.integration
            .integration_config(self.feature_branch.id_dim)?;
        for pair in &self.pairing {
            if !self.datasets.iter().any(|d| d.name == pair.dataset) {
                return Err(ConfigError::Invalid(format!(
                    "pairing references unknown dataset '{}'",
                    pair.dataset
                )));
            }
            if !self.prompts.iter().any(|p| p.name == pair.prompts) {
                return Err(ConfigError::Invalid(format!(
                    "pairing references unknown prompt set '{}'",
                    pair.prompts
                )));
            }
        }
        Ok(())
    }

    /// Hash of everything that affects numeric outputs (output location and
    /// worker count excluded).
    pub fn config_hash(&self) -> anyhow::Result<String> {
        let mut hashed = self.clone();
        hashed.output_dir = PathBuf::new();
        hashed.workers = 1;
        crate::canonical::canonical_hash(&hashed)
    }
}
