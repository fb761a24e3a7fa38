//! Shared data-preparation and fit/evaluate plumbing used by the commands.

use std::path::Path;

use anyhow::{bail, Context, Result};
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use rotortemp::artifact::{pack_model, ModelArtifact, ModelDocument, ScalerDoc, ARTIFACT_SCHEMA};
use rotortemp::data::{generate_synthetic, load_dataset, Dataset, ProfileSpan};
use rotortemp::eval::{compute_metrics, Metrics};
use rotortemp::features::{build_features, FeatureMatrix, Scaler, SpanSet};
use rotortemp::model::{ModelSpec, TrainedModel};

use crate::config::ExperimentConfig;

/// Train/test datasets resolved from the config.
pub struct PreparedData {
    pub train: Dataset<f64>,
    pub test: Dataset<f64>,
    pub full: Dataset<f64>,
}

pub fn load_data(config: &ExperimentConfig) -> Result<PreparedData> {
    let full: Dataset<f64> = match (&config.dataset, &config.synthetic) {
        (Some(path), _) => load_dataset(path)
            .with_context(|| format!("loading dataset {}", path.display()))?,
        (None, Some(synth)) => generate_synthetic(&synth.to_library(), config.seed)?,
        (None, None) => bail!("config needs either `dataset` or `synthetic`"),
    };
    if config.test_profiles.is_empty() {
        bail!(
            "config names no `test_profiles`; available profiles: {}",
            full.profile_ids().join(", ")
        );
    }
    let (train, test) = full.split_profiles(&config.test_profiles)?;
    if train.is_empty() || test.is_empty() {
        bail!("test split left train or test empty");
    }
    Ok(PreparedData { train, test, full })
}

/// Standardized features of a train/test split plus the fitted scaler.
pub struct PreparedFeatures {
    pub scaler: Scaler<f64>,
    pub x_train: Array2<f64>,
    pub y_train: Array1<f64>,
    pub train_profiles: Vec<ProfileSpan>,
    pub x_test: Array2<f64>,
    pub y_test: Array1<f64>,
    pub test_features: FeatureMatrix<f64>,
    pub feature_names: Vec<String>,
}

pub fn prepare_features(
    train: &Dataset<f64>,
    test: &Dataset<f64>,
    spans: SpanSet,
) -> Result<PreparedFeatures> {
    let train_features = build_features(train, spans)?;
    let test_features = build_features(test, spans)?;
    let scaler = Scaler::fit(&train_features.x, &train_features.names)?;
    let x_train = scaler.transform(&train_features.x);
    let x_test = scaler.transform(&test_features.x);
    Ok(PreparedFeatures {
        x_train,
        y_train: train_features.y.clone(),
        train_profiles: train_features.profiles.clone(),
        x_test,
        y_test: test_features.y.clone(),
        feature_names: train_features.names.clone(),
        test_features,
        scaler,
    })
}

/// Metrics document written next to every trained or evaluated model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsDoc {
    pub model: String,
    pub mse: f64,
    pub mae: f64,
    pub r2: Option<f64>,
    pub linf: f64,
    pub param_count: usize,
    pub spans: [usize; 4],
    pub seeds: Vec<u64>,
    pub best_seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub config_hash: String,
}

impl MetricsDoc {
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

pub struct FitOutcome {
    pub model: TrainedModel<f64>,
    pub metrics: Metrics<f64>,
    pub seed: u64,
    pub all_seeds: Vec<u64>,
}

/// Fits the spec, repeating over seeds for stochastic families and keeping
/// the best test MSE.
pub fn fit_best_of_seeds(
    spec: &ModelSpec<f64>,
    prepared: &PreparedFeatures,
    base_seed: u64,
    repetitions: usize,
) -> Result<FitOutcome> {
    let reps = if spec.kind().is_stochastic() {
        repetitions.max(1)
    } else {
        1
    };
    let mut best: Option<FitOutcome> = None;
    let mut all_seeds = Vec::new();
    for r in 0..reps {
        let seed = base_seed.wrapping_add(r as u64);
        all_seeds.push(seed);
        let model = spec.fit(
            &prepared.x_train,
            &prepared.y_train,
            &prepared.train_profiles,
            seed,
        )?;
        let y_hat = model.predict(&prepared.x_test)?;
        let metrics = compute_metrics(&prepared.y_test, &y_hat)?;
        let better = match &best {
            None => true,
            Some(b) => metrics.mse < b.metrics.mse,
        };
        if better {
            best = Some(FitOutcome {
                model,
                metrics,
                seed,
                all_seeds: Vec::new(),
            });
        }
    }
    let mut outcome = best.expect("at least one repetition runs");
    outcome.all_seeds = all_seeds;
    Ok(outcome)
}

pub fn build_document(
    config: &ExperimentConfig,
    spans: SpanSet,
    prepared: &PreparedFeatures,
    outcome: &FitOutcome,
) -> Result<ModelDocument> {
    Ok(ModelDocument {
        meta: ModelArtifact {
            schema: ARTIFACT_SCHEMA.into(),
            model_type: outcome.model.kind(),
            feature_names: prepared.feature_names.clone(),
            spans,
            sample_rate_hz: 2.0,
            scaler: ScalerDoc::from_scaler(&prepared.scaler),
            param_count: outcome.model.param_count(),
            seed: outcome.seed,
            config_hash: config.hash(),
            config: Some(serde_json::to_value(config)?),
        },
        params: pack_model(&outcome.model),
    })
}

/// Writes the plot-ready CSVs: per-sample test trace and the
/// residual-vs-temperature scatter.
pub fn write_eval_csvs(
    dir: &Path,
    test_features: &FeatureMatrix<f64>,
    y_hat: &Array1<f64>,
) -> Result<()> {
    use std::io::Write;
    let mut trace = std::io::BufWriter::new(std::fs::File::create(dir.join("test_trace.csv"))?);
    writeln!(trace, "index,profile_id,pm,pm_hat,residual")?;
    for span in &test_features.profiles {
        for r in span.start..span.end {
            let y = test_features.y[r];
            writeln!(
                trace,
                "{},{},{},{},{}",
                r,
                span.id,
                y,
                y_hat[r],
                y - y_hat[r]
            )?;
        }
    }
    let mut scatter =
        std::io::BufWriter::new(std::fs::File::create(dir.join("residuals.csv"))?);
    writeln!(scatter, "pm,residual")?;
    for r in 0..test_features.y.len() {
        writeln!(
            scatter,
            "{},{}",
            test_features.y[r],
            test_features.y[r] - y_hat[r]
        )?;
    }
    Ok(())
}

pub fn metrics_doc(
    config: &ExperimentConfig,
    spans: SpanSet,
    outcome: &FitOutcome,
    n_train: usize,
    n_test: usize,
) -> MetricsDoc {
    MetricsDoc {
        model: outcome.model.kind().name().to_string(),
        mse: outcome.metrics.mse,
        mae: outcome.metrics.mae,
        r2: outcome.metrics.r2,
        linf: outcome.metrics.linf,
        param_count: outcome.model.param_count(),
        spans: spans.spans(),
        seeds: outcome.all_seeds.clone(),
        best_seed: outcome.seed,
        n_train,
        n_test,
        config_hash: config.hash(),
    }
}
