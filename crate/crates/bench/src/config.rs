use std::path::{Path, PathBuf};

use hera_core::{BudgetPolicy, CodeWidth, KMeansConfig, TruncNormalSpec};
use serde::Deserialize;

use crate::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CodeWidthSetting {
    #[default]
    CeilLog2,
    Literal,
}

/// One experiment, read from a flat TOML file.
///
/// ```toml
/// n = 1024
/// d = 128
/// subspaces = [8]
/// levels = [0, 1, 2, 3, 4]
/// baseline_ks = 16
/// repetitions = 20
/// base_seed = 0
/// charge_fm_overhead = true
/// output_path = "results.csv"
/// ```
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub d: usize,
    pub subspaces: Vec<usize>,
    /// Reordering depths; 0 is the plain PQ baseline.
    pub levels: Vec<usize>,
    /// `K_s` of the PQ baseline whose storage every cell must fit into.
    pub baseline_ks: usize,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_true")]
    pub charge_fm_overhead: bool,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
    /// Fixed budget shared by every `M`. When absent each `M` is matched
    /// against PQ with `baseline_ks` at that same `M`.
    #[serde(default)]
    pub budget_bits: Option<u64>,
    #[serde(default)]
    pub code_width: CodeWidthSetting,
    #[serde(default = "default_max_iters")]
    pub kmeans_max_iters: usize,
    #[serde(default = "default_rel_tol")]
    pub kmeans_rel_tol: f64,
    #[serde(default = "default_mean")]
    pub mean: f64,
    #[serde(default = "default_stddev")]
    pub stddev: f64,
    #[serde(default)]
    pub lower: f64,
    #[serde(default = "default_upper")]
    pub upper: f64,
}

fn default_repetitions() -> usize {
    20
}
fn default_true() -> bool {
    true
}
fn default_max_iters() -> usize {
    100
}
fn default_rel_tol() -> f64 {
    1e-4
}
fn default_mean() -> f64 {
    0.5
}
fn default_stddev() -> f64 {
    0.16
}
fn default_upper() -> f64 {
    1.0
}

impl ExperimentConfig {
    /// Defaults for everything but the grid itself.
    pub fn new(n: usize, d: usize, subspaces: Vec<usize>, levels: Vec<usize>, baseline_ks: usize) -> Self {
        Self {
            n,
            d,
            subspaces,
            levels,
            baseline_ks,
            repetitions: default_repetitions(),
            base_seed: 0,
            charge_fm_overhead: true,
            output_path: None,
            budget_bits: None,
            code_width: CodeWidthSetting::CeilLog2,
            kmeans_max_iters: default_max_iters(),
            kmeans_rel_tol: default_rel_tol(),
            mean: default_mean(),
            stddev: default_stddev(),
            lower: 0.0,
            upper: default_upper(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, BenchError> {
        let cfg: Self = toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |msg: String| Err(BenchError::Config(msg));
        if self.n == 0 || self.d == 0 {
            return bad(format!("matrix must be non-empty, got {}x{}", self.n, self.d));
        }
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1".into());
        }
        if self.baseline_ks == 0 || self.baseline_ks > self.n {
            return bad(format!("baseline_ks must be in 1..={}", self.n));
        }
        if self.subspaces.is_empty() || self.levels.is_empty() {
            return bad("subspaces and levels must be non-empty".into());
        }
        for &m in &self.subspaces {
            if m == 0 || !self.d.is_multiple_of(m) {
                return bad(format!("{} columns cannot be split into {m} subspaces", self.d));
            }
        }
        for &l in &self.levels {
            if l >= 32 || !self.n.is_multiple_of(1 << l) {
                return bad(format!("{} rows are not divisible by 2^{l}", self.n));
            }
        }
        self.kmeans(0).validate().map_err(|e| BenchError::Config(e.to_string()))?;
        self.dataset(0).validate().map_err(|e| BenchError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn policy(&self) -> BudgetPolicy {
        BudgetPolicy {
            code_width: match self.code_width {
                CodeWidthSetting::CeilLog2 => CodeWidth::CeilLog2,
                CodeWidthSetting::Literal => CodeWidth::Literal,
            },
            charge_feature_maps: self.charge_fm_overhead,
            scalar_bits: 32,
        }
    }

    pub fn kmeans(&self, seed: u64) -> KMeansConfig {
        KMeansConfig {
            k: self.baseline_ks,
            max_iters: self.kmeans_max_iters,
            rel_tol: self.kmeans_rel_tol,
            seed,
        }
    }

    pub fn dataset(&self, seed: u64) -> TruncNormalSpec {
        TruncNormalSpec {
            mean: self.mean,
            stddev: self.stddev,
            lower: self.lower,
            upper: self.upper,
            seed,
        }
    }

    /// Dataset seed of repetition `r`.
    pub fn seed(&self, r: usize) -> u64 {
        self.base_seed.wrapping_add(r as u64)
    }
}
