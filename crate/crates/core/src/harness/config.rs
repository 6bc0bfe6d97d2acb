use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::anneal::AnnealConfig;

/// Which arms an experiment runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// SGD only.
    Baseline,
    /// SGD baseline next to SGD followed by microcanonical refinement.
    #[default]
    CnnMa,
    /// SGD baseline next to SGD followed by Metropolis refinement.
    SaBaseline,
    SweepDelta,
    SweepNeighborhood,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::Baseline => "baseline",
            Mode::CnnMa => "cnn_ma",
            Mode::SaBaseline => "sa_baseline",
            Mode::SweepDelta => "sweep_delta",
            Mode::SweepNeighborhood => "sweep_neighborhood",
        }
    }
}

/// Split used for the reported accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalSplit {
    #[default]
    Test,
    Train,
}

impl fmt::Display for EvalSplit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvalSplit::Test => "test",
            EvalSplit::Train => "train",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Directory holding the four MNIST IDX files (optionally gzipped).
    pub dir: PathBuf,
    /// Class-stratified training subset size; 0 keeps every sample.
    pub train_subset: usize,
    /// Class-stratified test subset size; 0 keeps every sample.
    pub test_subset: usize,
    pub split: EvalSplit,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            dir: PathBuf::from("data/mnist"),
            train_subset: 0,
            test_subset: 0,
            split: EvalSplit::Test,
        }
    }
}

/// Values visited by the parameter sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub delta: Vec<f64>,
    pub neighborhood: Vec<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            delta: vec![0.001, 0.0001],
            neighborhood: vec![5, 10, 20],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Delta,
    Neighborhood,
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepParam::Delta => "delta",
            SweepParam::Neighborhood => "neighborhood",
        })
    }
}

impl FromStr for SweepParam {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "delta" => Ok(SweepParam::Delta),
            "neighborhood" => Ok(SweepParam::Neighborhood),
            other => Err(HarnessError::Config(format!(
                "unknown sweep parameter {other:?} (expected delta or neighborhood)"
            ))),
        }
    }
}

/// Everything one experiment needs. Loaded from TOML; every field has a default.
///
/// `anneal.seed` is ignored by the experiment runner, which derives a fresh
/// annealer seed per repeat and epoch from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub repeats: usize,
    pub seed: u64,
    /// Measure wall-clock time. When off every duration is recorded as 0,
    /// which makes emitted reports byte-for-byte reproducible.
    pub record_wall_time: bool,
    /// Run repeats on the rayon pool. Timings then include contention.
    pub parallel_repeats: bool,
    pub data: DataConfig,
    pub anneal: AnnealConfig,
    pub sweep: SweepConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mode: Mode::default(),
            epochs: 1,
            learning_rate: 1.0,
            batch_size: 100,
            repeats: 5,
            seed: 0,
            record_wall_time: true,
            parallel_repeats: false,
            data: DataConfig::default(),
            anneal: AnnealConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes to TOML")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let fail = |m: String| Err(HarnessError::Config(m));
        if self.repeats == 0 {
            return fail("repeats must be >= 1".into());
        }
        if self.epochs == 0 {
            return fail("epochs must be >= 1".into());
        }
        if self.batch_size == 0 {
            return fail("batch_size must be >= 1".into());
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return fail(format!(
                "learning_rate must be finite and >= 0, got {}",
                self.learning_rate
            ));
        }
        self.anneal
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        if self.sweep.delta.is_empty()
            || self
                .sweep
                .delta
                .iter()
                .any(|d| !(*d > 0.0 && d.is_finite()))
        {
            return fail("sweep.delta must be a non-empty list of positive values".into());
        }
        if self.sweep.neighborhood.is_empty() || self.sweep.neighborhood.contains(&0) {
            return fail("sweep.neighborhood must be a non-empty list of positive sizes".into());
        }
        Ok(())
    }
}
