//! Experiment configuration: one JSON document drives every subcommand.
//! Hyperparameter defaults are the tuned optima, so a minimal config like
//! `{"model": "ols", "dataset": "measures.csv"}` runs out of the box.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use rotortemp::data::{LossCoeffs, SyntheticConfig};
use rotortemp::features::SpanSet;
use rotortemp::hpo::spaces::SpecContext;
use rotortemp::mlp::{Activation, MlpConfig, OptimizerRule, TrainSchedule};
use rotortemp::model::{ForestSpec, ModelKind, ModelSpec};
use rotortemp::neighbors::Weighting;
use rotortemp::svr::SvrParams;

fn default_repetitions() -> usize {
    10
}

fn default_cv_folds() -> usize {
    3
}

fn default_fractions() -> Vec<f64> {
    vec![0.1, 0.25, 0.5, 0.75, 1.0]
}

fn default_learn_repeats() -> usize {
    10
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HpoSettings {
    #[serde(default = "HpoSettings::default_n_init")]
    pub n_init: usize,
    #[serde(default = "HpoSettings::default_n_iter")]
    pub n_iter: usize,
}

impl HpoSettings {
    fn default_n_init() -> usize {
        30
    }
    fn default_n_iter() -> usize {
        100
    }
}

impl Default for HpoSettings {
    fn default() -> Self {
        HpoSettings {
            n_init: 30,
            n_iter: 100,
        }
    }
}

/// Synthetic-data generation settings (mirrors the library config with
/// plain-JSON types).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticSettings {
    #[serde(default = "SyntheticSettings::default_time_constants")]
    pub time_constants_s: [f64; 2],
    #[serde(default = "SyntheticSettings::default_boundary")]
    pub boundary_conductance: [f64; 2],
    #[serde(default = "SyntheticSettings::default_coupling")]
    pub coupling_conductance: f64,
    #[serde(default = "SyntheticSettings::default_duration")]
    pub duration_s: f64,
    #[serde(default = "SyntheticSettings::default_profiles")]
    pub n_profiles: usize,
    #[serde(default = "SyntheticSettings::default_excitation")]
    pub excitation: f64,
    #[serde(default = "SyntheticSettings::default_ambient")]
    pub ambient_c: f64,
    #[serde(default = "SyntheticSettings::default_coolant")]
    pub coolant_c: f64,
    #[serde(default = "SyntheticSettings::default_hold_range")]
    pub hold_range_s: [f64; 2],
    #[serde(default)]
    pub start_at_steady_state: bool,
}

impl SyntheticSettings {
    fn default_time_constants() -> [f64; 2] {
        [240.0, 90.0]
    }
    fn default_boundary() -> [f64; 2] {
        [1.2, 4.0]
    }
    fn default_coupling() -> f64 {
        0.8
    }
    fn default_duration() -> f64 {
        3600.0
    }
    fn default_profiles() -> usize {
        4
    }
    fn default_excitation() -> f64 {
        1.0
    }
    fn default_ambient() -> f64 {
        25.0
    }
    fn default_coolant() -> f64 {
        30.0
    }
    fn default_hold_range() -> [f64; 2] {
        [20.0, 240.0]
    }

    pub fn to_library(&self) -> SyntheticConfig<f64> {
        SyntheticConfig {
            time_constants_s: self.time_constants_s,
            boundary_conductance: self.boundary_conductance,
            coupling_conductance: self.coupling_conductance,
            losses: LossCoeffs {
                magnet_per_i2: 2.5e-3,
                magnet_per_speed: 4.0e-3,
                stator_per_i2: 1.2e-2,
                stator_per_speed: 2.0e-3,
                magnet_const: 0.0,
                stator_const: 0.0,
            },
            duration_s: self.duration_s,
            sample_rate_hz: 2.0,
            ambient_c: self.ambient_c,
            coolant_c: self.coolant_c,
            n_profiles: self.n_profiles,
            excitation: self.excitation,
            hold_range_s: self.hold_range_s,
            start_at_steady_state: self.start_at_steady_state,
        }
    }
}

impl Default for SyntheticSettings {
    fn default() -> Self {
        serde_json::from_value(serde_json::json!({})).expect("all fields defaulted")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// CSV dataset path; omit to use `synthetic`.
    #[serde(default)]
    pub dataset: Option<PathBuf>,
    /// Synthetic generator settings, used when no dataset path is given.
    #[serde(default)]
    pub synthetic: Option<SyntheticSettings>,
    /// Profiles held out as the test set.
    #[serde(default)]
    pub test_profiles: Vec<String>,
    pub model: String,
    /// Four filter spans in samples; taken from a tune run when omitted.
    #[serde(default)]
    pub spans: Option<[usize; 4]>,
    /// Model hyperparameters; family-specific keys, tuned optima as default.
    #[serde(default)]
    pub hyperparameters: serde_json::Value,
    #[serde(default)]
    pub seed: u64,
    /// Seed repetitions for stochastic model families; the best test MSE
    /// wins.
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default = "default_cv_folds")]
    pub cv_folds: usize,
    #[serde(default)]
    pub hpo: HpoSettings,
    #[serde(default = "default_fractions")]
    pub learn_fractions: Vec<f64>,
    #[serde(default = "default_learn_repeats")]
    pub learn_repeats: usize,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: ExperimentConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        Ok(config)
    }

    pub fn model_kind(&self) -> Result<ModelKind> {
        Ok(ModelKind::parse(&self.model)?)
    }

    pub fn span_set(&self) -> Result<SpanSet> {
        let spans = self
            .spans
            .ok_or_else(|| anyhow::anyhow!("config has no `spans`; run `tune` or set them"))?;
        Ok(SpanSet::new(spans)?)
    }

    /// Stable hash of the resolved configuration, embedded in artifacts.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).unwrap_or_default();
        let digest = Sha256::digest(canonical.as_bytes());
        hex_prefix(&digest, 16)
    }

    pub fn spec_context(&self) -> SpecContext {
        SpecContext {
            svr_subsample: self.hp_usize("subsample"),
            knn_subsample: self.hp_usize("subsample"),
        }
    }

    fn hp(&self, key: &str) -> Option<&serde_json::Value> {
        self.hyperparameters.get(key)
    }

    fn hp_f64(&self, key: &str) -> Option<f64> {
        self.hp(key).and_then(|v| v.as_f64())
    }

    fn hp_usize(&self, key: &str) -> Option<usize> {
        self.hp(key).and_then(|v| v.as_u64()).map(|v| v as usize)
    }

    fn hp_str(&self, key: &str) -> Option<&str> {
        self.hp(key).and_then(|v| v.as_str())
    }

    fn hp_bool(&self, key: &str) -> Option<bool> {
        self.hp(key).and_then(|v| v.as_bool())
    }

    /// Resolves the model spec from `hyperparameters`, defaulting each knob
    /// to the tuned optimum of its family.
    pub fn model_spec(&self) -> Result<ModelSpec<f64>> {
        let kind = self.model_kind()?;
        let spec = match kind {
            ModelKind::Ols => ModelSpec::Ols,
            ModelKind::Wls => {
                let mut cfg = rotortemp::linmodel::ThermalWeightConfig::default();
                if let Some(v) = self.hp_f64("w_min") {
                    cfg.w_min = v;
                }
                if let Some(v) = self.hp_f64("w_max") {
                    cfg.w_max = v;
                }
                if let Some(v) = self.hp_f64("under_estimate_factor") {
                    cfg.under_estimate_factor = v;
                }
                if let Some(v) = self.hp_usize("max_irls_iterations") {
                    cfg.max_irls_iterations = v;
                }
                ModelSpec::WlsThermal(cfg)
            }
            ModelKind::Knn => ModelSpec::Knn {
                k: self.hp_usize("neighbors").unwrap_or(2048),
                weighting: match self.hp_str("weighting").unwrap_or("distance") {
                    "uniform" => Weighting::Uniform,
                    "distance" => Weighting::Distance,
                    other => bail!("unknown weighting `{other}`"),
                },
                subsample: self.hp_usize("subsample"),
            },
            ModelKind::RandomForest => ModelSpec::RandomForest(ForestSpec {
                n_estimators: self.hp_usize("estimators").unwrap_or(93),
                max_depth: Some(self.hp_usize("max_depth").unwrap_or(60)),
                min_samples_split: self.hp_usize("min_samples_split").unwrap_or(15),
                min_samples_leaf: self.hp_usize("min_samples_leaf").unwrap_or(2),
                n_features_considered: self.hp_usize("features_per_split"),
                bootstrap: self.hp_bool("bootstrap").unwrap_or(true),
            }),
            ModelKind::ExtraTrees => ModelSpec::ExtraTrees(ForestSpec {
                n_estimators: self.hp_usize("estimators").unwrap_or(600),
                max_depth: Some(self.hp_usize("max_depth").unwrap_or(53)),
                min_samples_split: self.hp_usize("min_samples_split").unwrap_or(20),
                min_samples_leaf: self.hp_usize("min_samples_leaf").unwrap_or(7),
                n_features_considered: self.hp_usize("features_per_split"),
                bootstrap: self.hp_bool("bootstrap").unwrap_or(true),
            }),
            ModelKind::Svr => ModelSpec::Svr(SvrParams {
                c: self.hp_f64("c").unwrap_or(1.56),
                epsilon: self.hp_f64("epsilon").unwrap_or(0.11),
                gamma: self.hp_f64("gamma"),
                subsample: self.hp_usize("subsample"),
                ..Default::default()
            }),
            ModelKind::Mlp => ModelSpec::Mlp {
                config: MlpConfig {
                    layers: self.hp_usize("layers").unwrap_or(1),
                    units: self.hp_usize("units").unwrap_or(16),
                    activation: match self.hp_str("activation").unwrap_or("relu") {
                        "selu" => Activation::Selu,
                        "relu" => Activation::ReLU,
                        other => bail!("unknown activation `{other}`"),
                    },
                    dropout: self.hp_f64("dropout").unwrap_or(0.13),
                    l2: self.hp_f64("l2").unwrap_or(1.7e-8),
                    learn_rate: self.hp_f64("learn_rate").unwrap_or(5.8e-3),
                    optimizer: OptimizerRule::parse(self.hp_str("optimizer").unwrap_or("adam"))?,
                    seed: self.seed,
                },
                schedule: TrainSchedule::default(),
            },
        };
        Ok(spec)
    }
}

fn hex_prefix(bytes: &[u8], n: usize) -> String {
    bytes
        .iter()
        .take(n / 2)
        .map(|b| format!("{b:02x}"))
        .collect()
}
