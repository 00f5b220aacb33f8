//! Experiment configuration files (JSON, one experiment per file).

use serde::Deserialize;

use ruintail::{DependenceModel, DistributionSpec};

use crate::CliError;

/// Capital / threshold grid: an explicit list or a geometric span.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum XGrid {
    Explicit { values: Vec<f64> },
    Geometric { from: f64, to: f64, points: usize },
}

impl XGrid {
    pub fn expand(&self) -> Result<Vec<f64>, CliError> {
        let xs = match self {
            XGrid::Explicit { values } => values.clone(),
            XGrid::Geometric { from, to, points } => {
                if !(*from > 0.0 && to > from && *points >= 2) {
                    return Err(CliError::config(
                        "geometric grid needs 0 < from < to and points >= 2",
                    ));
                }
                let ratio = to / from;
                (0..*points)
                    .map(|j| from * ratio.powf(j as f64 / (*points - 1) as f64))
                    .collect()
            }
        };
        if xs.is_empty() {
            return Err(CliError::config("x_grid must be non-empty"));
        }
        if xs.iter().any(|x| !x.is_finite()) {
            return Err(CliError::config("x_grid values must be finite"));
        }
        if xs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CliError::config(
                "x_grid must be strictly increasing after expansion",
            ));
        }
        Ok(xs)
    }
}

fn default_mc_paths() -> u64 {
    1_000_000
}

fn default_chunks() -> u32 {
    1
}

fn default_product_index() -> u32 {
    1
}

fn default_oracle_budget() -> usize {
    1 << 16
}

fn default_final_deviation() -> f64 {
    0.05
}

fn default_rel_band() -> f64 {
    0.10
}

/// Config for the `product-tail` command.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductTailConfig {
    pub loss: DistributionSpec,
    pub discount: DistributionSpec,
    pub model: DependenceModel,
    pub x_grid: XGrid,
    pub seed: u64,
    #[serde(default = "default_product_index")]
    pub product_index: u32,
    /// Adds the exact closed-form column; only valid for the FGM model
    /// with the two-point discount law on {1, 2} at index 1.
    #[serde(default)]
    pub with_exact_two_point: bool,
    #[serde(default)]
    pub with_mc: bool,
    #[serde(default = "default_mc_paths")]
    pub mc_paths: u64,
    #[serde(default)]
    pub out: Option<String>,
}

/// Config for the `ruin` command.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuinConfig {
    pub loss: DistributionSpec,
    pub discount: DistributionSpec,
    pub model: DependenceModel,
    pub horizon: u32,
    pub x_grid: XGrid,
    pub paths: u64,
    #[serde(default = "default_chunks")]
    pub chunks: u32,
    pub seed: u64,
    #[serde(default)]
    pub out: Option<String>,
}

/// Config for the `verify` command: any subset of the probes.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub seed: u64,
    #[serde(default)]
    pub out: Option<String>,
    pub probes: Probes,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Probes {
    #[serde(default)]
    pub long_tail: Option<LongTailProbe>,
    #[serde(default)]
    pub convolution: Option<ConvolutionProbe>,
    #[serde(default)]
    pub tail_domination: Option<TailDominationProbe>,
    #[serde(default)]
    pub product_class: Option<ProductClassProbe>,
}

impl Probes {
    pub fn is_empty(&self) -> bool {
        self.long_tail.is_none()
            && self.convolution.is_none()
            && self.tail_domination.is_none()
            && self.product_class.is_none()
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LongTailProbe {
    pub spec: DistributionSpec,
    pub gamma: f64,
    pub t: f64,
    pub x_grid: XGrid,
    #[serde(default = "default_final_deviation")]
    pub max_final_deviation: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvolutionProbe {
    pub spec: DistributionSpec,
    pub gamma: f64,
    pub x_grid: XGrid,
    #[serde(default = "default_oracle_budget")]
    pub oracle_budget: usize,
    /// Pass band around the target ratio 2c at the deepest grid point.
    #[serde(default = "default_rel_band")]
    pub rel_band: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailDominationProbe {
    pub loss: DistributionSpec,
    pub discount: DistributionSpec,
    pub model: DependenceModel,
    pub b: f64,
    pub x_grid: XGrid,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductClassProbe {
    pub loss: DistributionSpec,
    pub discount: DistributionSpec,
    pub model: DependenceModel,
    pub gamma: f64,
    pub t: f64,
    pub x_grid: XGrid,
    #[serde(default = "default_final_deviation")]
    pub max_final_deviation: f64,
}

/// Config for the `validate-model` command.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateModelConfig {
    pub loss: DistributionSpec,
    pub discount: DistributionSpec,
    pub model: DependenceModel,
    pub seed: u64,
    #[serde(default)]
    pub out: Option<String>,
}

/// Parse a config file, mapping JSON errors to config errors.
pub fn parse<T: for<'de> Deserialize<'de>>(bytes: &[u8]) -> Result<T, CliError> {
    serde_json::from_slice(bytes).map_err(|e| CliError::config(format!("bad config: {e}")))
}
