use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use netwaves::calibrate::{Lambda2Mapping, LoadingModel};
use netwaves::netgen::{Alignment, ConsumptionMode};
use netwaves::propagate::{DepthConvention, PathKind, Timing};

use crate::verify::Level;
use crate::CliError;

/// One JSON document per run. Every block is optional; command-line flags
/// override the fields they name.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub run_id: Option<String>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Fallback seed for blocks that do not carry their own.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub network: Option<NetworkBlock>,
    #[serde(default)]
    pub spectrum: Option<SpectrumBlock>,
    #[serde(default)]
    pub simulate: Option<SimulateBlock>,
    #[serde(default)]
    pub compare: Option<CompareBlock>,
    #[serde(default)]
    pub calibrate: Option<CalibrateBlock>,
    #[serde(default)]
    pub verify: Option<VerifyBlock>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkBlock {
    pub n: Option<usize>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    #[serde(default)]
    pub gamma_mode: ConsumptionMode,
    #[serde(default)]
    pub alignment: Alignment,
    pub seed: Option<u64>,
    /// Read a `supplier,buyer,weight` edge list instead of generating.
    pub edges: Option<PathBuf>,
    /// Rescale ingested columns to `1 − beta`.
    #[serde(default)]
    pub normalize: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumBlock {
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateBlock {
    pub kind: PathKind,
    #[serde(rename = "L")]
    pub l: Option<usize>,
    #[serde(rename = "T")]
    pub t: usize,
    pub sigma: f64,
    pub seed: Option<u64>,
    pub lambda2: Option<f64>,
    pub b: Option<f64>,
    #[serde(default)]
    pub timing: Timing,
    #[serde(default)]
    pub convention: DepthConvention,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CompareMode {
    #[default]
    TwoMode,
    LEconomy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareBlock {
    #[serde(default)]
    pub mode: CompareMode,
    pub lambda2: Option<f64>,
    pub b: Option<f64>,
    #[serde(rename = "T")]
    pub t: usize,
    pub sigma: f64,
    pub reps: usize,
    /// Tail threshold for `ω_c`.
    pub c: f64,
    pub seed: Option<u64>,
    #[serde(default = "default_l_values", rename = "L_values")]
    pub l_values: Vec<usize>,
    #[serde(default)]
    pub timing: Timing,
}

fn default_l_values() -> Vec<usize> {
    vec![1, 100]
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateBlock {
    #[serde(default)]
    pub grid: Option<Vec<f64>>,
    #[serde(default)]
    pub shares: Option<Vec<f64>>,
    #[serde(default)]
    pub sensitivity: Option<SensitivityBlock>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensitivityBlock {
    pub alpha: f64,
    pub mapping: Lambda2Mapping,
    pub loading: LoadingModel,
    pub sigma: f64,
    #[serde(rename = "T")]
    pub t: usize,
    pub h: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyBlock {
    #[serde(default)]
    pub level: Level,
    pub seed: Option<u64>,
    #[serde(default)]
    pub criteria: Option<Vec<u8>>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Seed for a stochastic block: `--seed`, then the block's own seed,
    /// then the top-level seed. Missing everywhere is an error.
    pub fn resolve_seed(
        &self,
        flag: Option<u64>,
        block_seed: Option<u64>,
        block: &str,
    ) -> Result<u64, CliError> {
        flag.or(block_seed).or(self.seed).ok_or_else(|| {
            CliError::Config(format!(
                "missing seed: pass --seed or set {block}.seed in the config"
            ))
        })
    }
}

pub fn require<T>(value: Option<T>, key: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Config(format!("missing required key `{key}`")))
}

/// Parse a `kind` flag value with the same names the config uses.
pub fn parse_kind(s: &str) -> Result<PathKind, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown path kind `{s}` (static, depth-l, micro, reduced)"))
}
