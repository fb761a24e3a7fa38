//! The trained-model sum type and the hyperparameter specs that produce it.
//! One enum covers every family so the harness, artifact IO and streaming
//! inference can stay model-agnostic.

use ndarray::{Array1, Array2};

use crate::data::ProfileSpan;
use crate::error::{Error, Result};
use crate::forest::{fit_ensemble, Forest, SplitMode, TreeParams};
use crate::linmodel::{fit_ols, fit_wls_thermal, LinearModel, ThermalWeightConfig};
use crate::mlp::{train_mlp, Mlp, MlpConfig, TrainSchedule};
use crate::neighbors::{fit_knn, KnnModel, Weighting};
use crate::scalar::Scalar;
use crate::svr::{fit_svr, SvrModel, SvrParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Ols,
    Wls,
    Knn,
    RandomForest,
    ExtraTrees,
    Svr,
    Mlp,
}

impl ModelKind {
    pub const ALL: [ModelKind; 7] = [
        ModelKind::Ols,
        ModelKind::Wls,
        ModelKind::Knn,
        ModelKind::RandomForest,
        ModelKind::ExtraTrees,
        ModelKind::Svr,
        ModelKind::Mlp,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Ols => "ols",
            ModelKind::Wls => "wls",
            ModelKind::Knn => "knn",
            ModelKind::RandomForest => "rf",
            ModelKind::ExtraTrees => "et",
            ModelKind::Svr => "svr",
            ModelKind::Mlp => "mlp",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.name() == name.to_lowercase())
            .ok_or_else(|| Error::invalid(format!("unknown model type `{name}`")))
    }

    /// Whether fits of this family depend on the seed.
    pub fn is_stochastic(&self) -> bool {
        matches!(
            self,
            ModelKind::RandomForest | ModelKind::ExtraTrees | ModelKind::Mlp | ModelKind::Svr
        )
    }
}

/// Ensemble hyperparameters shared by the RF and ET specs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForestSpec {
    pub n_estimators: usize,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub n_features_considered: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestSpec {
    fn default() -> Self {
        ForestSpec {
            n_estimators: 100,
            max_depth: Some(30),
            min_samples_split: 2,
            min_samples_leaf: 1,
            n_features_considered: None,
            bootstrap: true,
        }
    }
}

impl ForestSpec {
    fn tree_params(&self, mode: SplitMode) -> TreeParams {
        TreeParams {
            max_depth: self.max_depth,
            min_samples_split: self.min_samples_split,
            min_samples_leaf: self.min_samples_leaf,
            n_features_considered: self.n_features_considered,
            mode,
        }
    }
}

/// Resolved hyperparameters for one model family: everything `fit` needs
/// besides the data and the seed.
#[derive(Debug, Clone)]
pub enum ModelSpec<F: Scalar> {
    Ols,
    WlsThermal(ThermalWeightConfig<F>),
    Knn {
        k: usize,
        weighting: Weighting,
        /// Optional seeded training subsample, mirroring the SVR hook.
        subsample: Option<usize>,
    },
    RandomForest(ForestSpec),
    ExtraTrees(ForestSpec),
    Svr(SvrParams<F>),
    Mlp {
        config: MlpConfig<F>,
        schedule: TrainSchedule<F>,
    },
}

impl<F: Scalar> ModelSpec<F> {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::Ols => ModelKind::Ols,
            ModelSpec::WlsThermal(_) => ModelKind::Wls,
            ModelSpec::Knn { .. } => ModelKind::Knn,
            ModelSpec::RandomForest(_) => ModelKind::RandomForest,
            ModelSpec::ExtraTrees(_) => ModelKind::ExtraTrees,
            ModelSpec::Svr(_) => ModelKind::Svr,
            ModelSpec::Mlp { .. } => ModelKind::Mlp,
        }
    }

    /// Fits on standardized features `x` and raw targets `y` (°C).
    /// `profiles` carries session boundaries for the families that need a
    /// group-aware internal split; `seed` overrides any seed embedded in the
    /// spec so repetition runs stay reproducible.
    pub fn fit(
        &self,
        x: &Array2<F>,
        y: &Array1<F>,
        profiles: &[ProfileSpan],
        seed: u64,
    ) -> Result<TrainedModel<F>> {
        match self {
            ModelSpec::Ols => Ok(TrainedModel::Ols(fit_ols(x, y)?)),
            ModelSpec::WlsThermal(config) => {
                Ok(TrainedModel::Wls(fit_wls_thermal(x, y, config)?.model))
            }
            ModelSpec::Knn {
                k,
                weighting,
                subsample,
            } => {
                let (xs, ys) = match subsample {
                    Some(m) if *m < x.nrows() => subsample_rows(x, y, *m, seed)?,
                    _ => (x.to_owned(), y.to_owned()),
                };
                Ok(TrainedModel::Knn(fit_knn(xs, ys, *k, *weighting)?))
            }
            ModelSpec::RandomForest(spec) => Ok(TrainedModel::RandomForest(fit_ensemble(
                x,
                y,
                &spec.tree_params(SplitMode::BestSplit),
                spec.n_estimators,
                spec.bootstrap,
                seed,
            )?)),
            ModelSpec::ExtraTrees(spec) => Ok(TrainedModel::ExtraTrees(fit_ensemble(
                x,
                y,
                &spec.tree_params(SplitMode::RandomThreshold),
                spec.n_estimators,
                spec.bootstrap,
                seed,
            )?)),
            ModelSpec::Svr(params) => {
                let mut params = *params;
                params.seed = seed;
                Ok(TrainedModel::Svr(fit_svr(x, y, &params)?))
            }
            ModelSpec::Mlp { config, schedule } => {
                let mut config = *config;
                config.seed = seed;
                let (net, _) = train_mlp(&config, schedule, x, y, profiles)?;
                Ok(TrainedModel::Mlp(net))
            }
        }
    }
}

fn subsample_rows<F: Scalar>(
    x: &Array2<F>,
    y: &Array1<F>,
    m: usize,
    seed: u64,
) -> Result<(Array2<F>, Array1<F>)> {
    use rand::Rng;
    use rand::SeedableRng;
    if m == 0 {
        return Err(Error::invalid("subsample must keep at least one row"));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut pool: Vec<usize> = (0..x.nrows()).collect();
    for i in 0..m {
        let j = rng.random_range(i..pool.len());
        pool.swap(i, j);
    }
    let mut idx = pool[..m].to_vec();
    idx.sort_unstable();
    let mut xs = Array2::zeros((m, x.ncols()));
    let mut ys = Array1::zeros(m);
    for (out, &r) in idx.iter().enumerate() {
        xs.row_mut(out).assign(&x.row(r));
        ys[out] = y[r];
    }
    Ok((xs, ys))
}

/// A fitted predictor of any family.
#[derive(Debug, Clone)]
pub enum TrainedModel<F> {
    Ols(LinearModel<F>),
    Wls(LinearModel<F>),
    Knn(KnnModel<F>),
    RandomForest(Forest<F>),
    ExtraTrees(Forest<F>),
    Svr(SvrModel<F>),
    Mlp(Mlp<F>),
}

impl<F: Scalar> TrainedModel<F> {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::Ols(_) => ModelKind::Ols,
            TrainedModel::Wls(_) => ModelKind::Wls,
            TrainedModel::Knn(_) => ModelKind::Knn,
            TrainedModel::RandomForest(_) => ModelKind::RandomForest,
            TrainedModel::ExtraTrees(_) => ModelKind::ExtraTrees,
            TrainedModel::Svr(_) => ModelKind::Svr,
            TrainedModel::Mlp(_) => ModelKind::Mlp,
        }
    }

    pub fn predict(&self, x: &Array2<F>) -> Result<Array1<F>> {
        match self {
            TrainedModel::Ols(m) | TrainedModel::Wls(m) => m.predict(x),
            TrainedModel::Knn(m) => m.predict(x),
            TrainedModel::RandomForest(m) | TrainedModel::ExtraTrees(m) => m.predict(x),
            TrainedModel::Svr(m) => m.predict(x),
            TrainedModel::Mlp(m) => m.predict(x),
        }
    }

    pub fn predict_row(&self, row: &[F]) -> Result<F> {
        match self {
            TrainedModel::Ols(m) | TrainedModel::Wls(m) => m.predict_row(row),
            TrainedModel::Knn(m) => m.predict_row(row),
            TrainedModel::RandomForest(m) | TrainedModel::ExtraTrees(m) => m.predict_row(row),
            TrainedModel::Svr(m) => m.predict_row(row),
            TrainedModel::Mlp(m) => m.predict_row(row),
        }
    }

    /// Stored-parameter count using each family's reporting convention.
    pub fn param_count(&self) -> usize {
        match self {
            TrainedModel::Ols(m) | TrainedModel::Wls(m) => m.param_count(),
            TrainedModel::Knn(m) => m.param_count(),
            TrainedModel::RandomForest(m) | TrainedModel::ExtraTrees(m) => m.param_count(),
            TrainedModel::Svr(m) => m.param_count(),
            TrainedModel::Mlp(m) => m.param_count(),
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            TrainedModel::Ols(m) | TrainedModel::Wls(m) => m.n_features(),
            TrainedModel::Knn(m) => m.n_features(),
            TrainedModel::RandomForest(m) | TrainedModel::ExtraTrees(m) => m.n_features(),
            TrainedModel::Svr(m) => m.n_features(),
            TrainedModel::Mlp(m) => m.n_inputs(),
        }
    }
}
