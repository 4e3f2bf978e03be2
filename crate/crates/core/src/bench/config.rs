use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::crbm::RbmTrainConfig;
use crate::dataset::{NormScope, RegressorConfig};
use crate::fuzzy::BuildConfig;
use crate::probcluster::ClusterConfig;
use crate::probopt::OptOptions;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub use_rbm: bool,
    pub use_prob_rules: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { seed: 0, use_rbm: true, use_prob_rules: true }
    }
}

/// Which plant the data describes when no file is given.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    GasFurnace,
    /// Simulated Wiener-Hammerstein surrogate of the given length.
    WhSurrogate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataConfig {
    /// CSV file; when absent the built-in `source` is used.
    pub path: Option<PathBuf>,
    pub source: Source,
    pub surrogate_len: usize,
    pub surrogate_seed: u64,
    pub u_column: String,
    pub y_column: String,
    /// Leading regressor rows used for training.
    pub n_train: usize,
    /// First test row; defaults to right after the training rows.
    pub test_start: Option<usize>,
    /// Test row count; defaults to every remaining row.
    pub n_test: Option<usize>,
    pub norm_scope: NormScope,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            path: None,
            source: Source::GasFurnace,
            surrogate_len: 188_000,
            surrogate_seed: 2009,
            u_column: "u".into(),
            y_column: "y".into(),
            n_train: 200,
            test_start: None,
            n_test: None,
            norm_scope: NormScope::Train,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbConfig {
    /// Floor on the per-cluster target spread used as `σ_B`.
    pub sigma_b_floor: f64,
    /// Re-solve the consequents with the optimized `P`.
    pub resolve_w: bool,
    pub optimizer: OptOptions,
}

impl Default for ProbConfig {
    fn default() -> Self {
        ProbConfig { sigma_b_floor: 0.02, resolve_w: false, optimizer: OptOptions::default() }
    }
}

/// Everything a pipeline run depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub run: RunConfig,
    pub data: DataConfig,
    pub regressors: RegressorConfig,
    pub rbm: RbmTrainConfig,
    pub cluster: ClusterConfig,
    pub fuzzy: BuildConfig,
    pub probopt: ProbConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig::gas_furnace()
    }
}

/// Clustering settings shared by both benchmarks. Beyond the published
/// `α, ψ, λ, C`, the proposal scale and sweep count are tuned so the gas
/// furnace settles near ten rules.
fn calibrated_cluster(alpha: f64, psi: f64) -> ClusterConfig {
    ClusterConfig { alpha, psi, lambda: 5.0, c: 0.001, sweeps: 5, t_scale: 0.15, ..ClusterConfig::default() }
}

impl PipelineConfig {
    /// Gas furnace: `n_y = 4`, `n_u = 5`, 200 training rows, `η = 0.2`,
    /// `α = 0.8`, `ψ = 10`, `λ = 5`, `C = 0.001`.
    pub fn gas_furnace() -> Self {
        PipelineConfig {
            run: RunConfig::default(),
            data: DataConfig::default(),
            regressors: RegressorConfig::new(4, 5),
            rbm: RbmTrainConfig { learning_rate: 0.2, epochs: 10, ..RbmTrainConfig::default() },
            cluster: calibrated_cluster(0.8, 10.0),
            fuzzy: BuildConfig::default(),
            probopt: ProbConfig::default(),
        }
    }

    /// Wiener-Hammerstein: `η = 0.1`, `α = 0.95`, `ψ = 100`, `λ = 5`,
    /// `C = 0.001`. The desk split trains on the first 10,000 rows and tests
    /// on 5,000 rows from the start of the test region; `full` uses the
    /// 100,000 / 88,000 split.
    pub fn wiener_hammerstein(full: bool) -> Self {
        let (n_train, n_test) = if full { (100_000, None) } else { (10_000, Some(5_000)) };
        PipelineConfig {
            run: RunConfig::default(),
            data: DataConfig {
                source: Source::WhSurrogate,
                u_column: "uBenchMark".into(),
                y_column: "yBenchMark".into(),
                n_train,
                test_start: Some(100_000),
                n_test,
                ..DataConfig::default()
            },
            regressors: RegressorConfig::new(4, 5),
            rbm: RbmTrainConfig { learning_rate: 0.1, epochs: 10, ..RbmTrainConfig::default() },
            cluster: calibrated_cluster(0.95, 100.0),
            fuzzy: BuildConfig::default(),
            probopt: ProbConfig::default(),
        }
    }

    /// Parse a config file over `self`: keys present in the file replace the
    /// corresponding values.
    pub fn merge_file(&self, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.merge_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn merge_str(&self, text: &str) -> Result<Self> {
        let mut base = toml::Value::try_from(self).map_err(|e| Error::Config(e.to_string()))?;
        let overlay: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        merge(&mut base, toml::Value::Table(overlay));
        let cfg: PipelineConfig = base.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Seed every stochastic stage from one value.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.run.seed = seed;
        self.rbm.seed = derive_seed(seed, 1);
        self.cluster.seed = derive_seed(seed, 2);
        self
    }

    /// Seed for the antecedent width draw.
    pub fn width_seed(&self) -> u64 {
        derive_seed(self.run.seed, 3)
    }

    pub fn validate(&self) -> Result<()> {
        self.rbm.validate()?;
        self.cluster.validate()?;
        if self.data.n_train == 0 {
            return Err(Error::Config("n_train must be at least 1".into()));
        }
        if self.data.n_test == Some(0) {
            return Err(Error::Config("n_test must be at least 1".into()));
        }
        if !(self.probopt.sigma_b_floor > 0.0) {
            return Err(Error::Config("sigma_b_floor must be positive".into()));
        }
        let f = &self.fuzzy;
        if !(f.sigma_min > 0.0 && f.sigma_min < f.sigma_max && f.sigma_b > 0.0) {
            return Err(Error::Config("fuzzy widths must satisfy 0 < sigma_min < sigma_max and sigma_b > 0".into()));
        }
        Ok(())
    }
}

/// SplitMix64 finalizer over `seed + stream`, kept to 63 bits so it fits a
/// TOML integer.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed.wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    (z ^ (z >> 31)) >> 1
}

fn merge(base: &mut toml::Value, overlay: toml::Value) {
    match (base, overlay) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}
