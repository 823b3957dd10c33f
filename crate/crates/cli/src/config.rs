//! Run configurations read from JSON. Every struct rejects unknown keys and
//! fills missing ones with defaults; the fully resolved form is written next
//! to the outputs so a run can be repeated from it alone.

use std::fs;
use std::path::{Path, PathBuf};

use mimo_align::codec::{ChannelDims, WhitenOptions};
use mimo_align::flops::{NeuralShape, DEFAULT_ACTIVATION_COST};
use mimo_align::linear_eq::{AdmmConfig, ChannelKnowledge};
use mimo_align::neural_eq::TrainConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

fn default_dims() -> ChannelDims {
    ChannelDims { k: 1, n_t: 2, n_r: 2 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainRun {
    pub channel: ChannelDims,
    pub snr_db: f64,
    pub p_t: f64,
    /// Leading rows used for training; `None` uses the whole dataset.
    pub n_train: Option<usize>,
    pub knowledge: ChannelKnowledge,
    pub whiten: Option<WhitenOptions>,
    pub admm: AdmmConfig,
    pub neural: TrainConfig,
    pub base_seed: u64,
}

impl Default for TrainRun {
    fn default() -> Self {
        TrainRun {
            channel: default_dims(),
            snr_db: 20.0,
            p_t: 1.0,
            n_train: None,
            knowledge: ChannelKnowledge::Aware,
            whiten: Some(WhitenOptions::default()),
            admm: AdmmConfig::default(),
            neural: TrainConfig::default(),
            base_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalRun {
    pub snr_db: f64,
    /// First row scored.
    pub start: usize,
    /// Rows scored from `start`; `None` takes the rest.
    pub rows: Option<usize>,
    pub activation_cost: u64,
    pub base_seed: u64,
}

impl Default for EvalRun {
    fn default() -> Self {
        EvalRun { snr_db: 20.0, start: 0, rows: None, activation_cost: DEFAULT_ACTIVATION_COST, base_seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearArch {
    pub channel: ChannelDims,
    pub d: u64,
    pub m: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArchRun {
    pub linear: LinearArch,
    pub neural: NeuralShape,
    pub sparsity: f64,
    pub activation_cost: u64,
}

impl Default for ArchRun {
    /// ViT-sized latents (d = 384, m = 768) over a 6x6 link.
    fn default() -> Self {
        ArchRun {
            linear: LinearArch { channel: ChannelDims { k: 1, n_t: 6, n_r: 6 }, d: 384, m: 768 },
            neural: NeuralShape { i_p: 192, h_p: 192, o_p: 6, l_p: 1, i_d: 6, h_d: 384, o_d: 384, l_d: 1 },
            sparsity: 0.0,
            activation_cost: 0,
        }
    }
}

pub fn read<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, CliError> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("config serializes");
    s.push('\n');
    s
}

/// `dir/resolved_config.json` for directory outputs.
pub fn resolved_in(dir: &Path) -> PathBuf {
    dir.join("resolved_config.json")
}

/// `results.csv` -> `results.config.json`.
pub fn resolved_beside(file: &Path) -> PathBuf {
    file.with_extension("config.json")
}
