//! Per-model search spaces and the mapping from an evaluated point back to
//! a concrete model spec plus span set. Every space carries the four span
//! dimensions; model-specific axes follow the published intervals.

use super::{DimSpec, Dimension, HpoSpace, ParamValue, Point};
use crate::error::{Error, Result};
use crate::features::SpanSet;
use crate::mlp::{Activation, MlpConfig, OptimizerRule, TrainSchedule};
use crate::model::{ForestSpec, ModelKind, ModelSpec};
use crate::neighbors::Weighting;
use crate::scalar::Scalar;
use crate::svr::SvrParams;

/// Spans are searched log-scaled from 4 samples up to 1.5 h at 2 Hz.
pub const SPAN_LO: i64 = 4;
pub const SPAN_HI: i64 = 10_800;

fn span_dims() -> Vec<Dimension> {
    (1..=4)
        .map(|i| Dimension {
            name: format!("span_{i}"),
            spec: DimSpec::Integer {
                lo: SPAN_LO,
                hi: SPAN_HI,
                log: true,
            },
        })
        .collect()
}

/// The search box of one model family (spans always included).
pub fn model_space(kind: ModelKind) -> HpoSpace {
    let mut dims = span_dims();
    match kind {
        ModelKind::Ols | ModelKind::Wls => {}
        ModelKind::Svr => {
            dims.push(Dimension {
                name: "c".into(),
                spec: DimSpec::Real {
                    lo: 1e-3,
                    hi: 10.0,
                    log: true,
                },
            });
            dims.push(Dimension {
                name: "epsilon".into(),
                spec: DimSpec::Real {
                    lo: 1e-2,
                    hi: 1.0,
                    log: false,
                },
            });
        }
        ModelKind::Knn => {
            dims.push(Dimension {
                name: "neighbors".into(),
                spec: DimSpec::Integer {
                    lo: 1,
                    hi: 2048,
                    log: false,
                },
            });
            dims.push(Dimension {
                name: "weighting".into(),
                spec: DimSpec::Categorical {
                    choices: vec!["uniform".into(), "distance".into()],
                },
            });
        }
        ModelKind::RandomForest | ModelKind::ExtraTrees => {
            dims.push(Dimension {
                name: "estimators".into(),
                spec: DimSpec::Integer {
                    lo: 10,
                    hi: 600,
                    log: false,
                },
            });
            dims.push(Dimension {
                name: "max_depth".into(),
                spec: DimSpec::Integer {
                    lo: 10,
                    hi: 60,
                    log: false,
                },
            });
            dims.push(Dimension {
                name: "min_samples_split".into(),
                spec: DimSpec::Integer {
                    lo: 2,
                    hi: 20,
                    log: false,
                },
            });
            dims.push(Dimension {
                name: "min_samples_leaf".into(),
                spec: DimSpec::Integer {
                    lo: 1,
                    hi: 10,
                    log: false,
                },
            });
            dims.push(Dimension {
                name: "bootstrap".into(),
                spec: DimSpec::Categorical {
                    choices: vec!["yes".into(), "no".into()],
                },
            });
        }
        ModelKind::Mlp => {
            dims.push(Dimension {
                name: "layers".into(),
                spec: DimSpec::Integer {
                    lo: 1,
                    hi: 3,
                    log: false,
                },
            });
            dims.push(Dimension {
                name: "units".into(),
                spec: DimSpec::Integer {
                    lo: 4,
                    hi: 32,
                    log: false,
                },
            });
            dims.push(Dimension {
                name: "activation".into(),
                spec: DimSpec::Categorical {
                    choices: vec!["selu".into(), "relu".into()],
                },
            });
            dims.push(Dimension {
                name: "dropout".into(),
                spec: DimSpec::Real {
                    lo: 0.0,
                    hi: 0.3,
                    log: false,
                },
            });
            dims.push(Dimension {
                name: "l2".into(),
                spec: DimSpec::Real {
                    lo: 1e-9,
                    hi: 0.1,
                    log: true,
                },
            });
            dims.push(Dimension {
                name: "learn_rate".into(),
                spec: DimSpec::Real {
                    lo: 1e-6,
                    hi: 0.1,
                    log: true,
                },
            });
            dims.push(Dimension {
                name: "optimizer".into(),
                spec: DimSpec::Categorical {
                    choices: OptimizerRule::ALL.iter().map(|r| r.name().to_string()).collect(),
                },
            });
        }
    }
    HpoSpace::with_span_dims(dims, vec![0, 1, 2, 3]).expect("static space definition")
}

fn lookup<'p>(space: &HpoSpace, point: &'p Point, name: &str) -> Result<&'p ParamValue> {
    let idx = space
        .index_of(name)
        .ok_or_else(|| Error::invalid(format!("space has no dimension `{name}`")))?;
    Ok(&point[idx])
}

fn f64_of(space: &HpoSpace, point: &Point, name: &str) -> Result<f64> {
    lookup(space, point, name)?
        .as_f64()
        .ok_or_else(|| Error::invalid(format!("`{name}` is not numeric")))
}

fn i64_of(space: &HpoSpace, point: &Point, name: &str) -> Result<i64> {
    lookup(space, point, name)?
        .as_i64()
        .ok_or_else(|| Error::invalid(format!("`{name}` is not an integer")))
}

fn str_of<'p>(space: &HpoSpace, point: &'p Point, name: &str) -> Result<&'p str> {
    lookup(space, point, name)?
        .as_str()
        .ok_or_else(|| Error::invalid(format!("`{name}` is not categorical")))
}

/// Span set of an evaluated point.
pub fn spans_from_point(space: &HpoSpace, point: &Point) -> Result<SpanSet> {
    let mut spans = [0usize; 4];
    for (i, slot) in spans.iter_mut().enumerate() {
        *slot = i64_of(space, point, &format!("span_{}", i + 1))? as usize;
    }
    SpanSet::new(spans)
}

/// Extra knobs that are benchmark-run configuration rather than searched
/// hyperparameters.
#[derive(Debug, Clone, Copy, Default)]
pub struct SpecContext {
    /// Uniform training subsample for the lazy/kernel models.
    pub svr_subsample: Option<usize>,
    pub knn_subsample: Option<usize>,
}

/// Reconstructs the model spec a point describes.
pub fn spec_from_point<F: Scalar>(
    kind: ModelKind,
    space: &HpoSpace,
    point: &Point,
    ctx: &SpecContext,
) -> Result<ModelSpec<F>> {
    match kind {
        ModelKind::Ols => Ok(ModelSpec::Ols),
        ModelKind::Wls => Ok(ModelSpec::WlsThermal(Default::default())),
        ModelKind::Svr => Ok(ModelSpec::Svr(SvrParams {
            c: F::c(f64_of(space, point, "c")?),
            epsilon: F::c(f64_of(space, point, "epsilon")?),
            subsample: ctx.svr_subsample,
            ..Default::default()
        })),
        ModelKind::Knn => Ok(ModelSpec::Knn {
            k: i64_of(space, point, "neighbors")? as usize,
            weighting: match str_of(space, point, "weighting")? {
                "distance" => Weighting::Distance,
                _ => Weighting::Uniform,
            },
            subsample: ctx.knn_subsample,
        }),
        ModelKind::RandomForest | ModelKind::ExtraTrees => {
            let spec = ForestSpec {
                n_estimators: i64_of(space, point, "estimators")? as usize,
                max_depth: Some(i64_of(space, point, "max_depth")? as usize),
                min_samples_split: i64_of(space, point, "min_samples_split")? as usize,
                min_samples_leaf: i64_of(space, point, "min_samples_leaf")? as usize,
                n_features_considered: None,
                bootstrap: str_of(space, point, "bootstrap")? == "yes",
            };
            Ok(if kind == ModelKind::RandomForest {
                ModelSpec::RandomForest(spec)
            } else {
                ModelSpec::ExtraTrees(spec)
            })
        }
        ModelKind::Mlp => Ok(ModelSpec::Mlp {
            config: MlpConfig {
                layers: i64_of(space, point, "layers")? as usize,
                units: i64_of(space, point, "units")? as usize,
                activation: match str_of(space, point, "activation")? {
                    "selu" => Activation::Selu,
                    _ => Activation::ReLU,
                },
                dropout: F::c(f64_of(space, point, "dropout")?),
                l2: F::c(f64_of(space, point, "l2")?),
                learn_rate: F::c(f64_of(space, point, "learn_rate")?),
                optimizer: OptimizerRule::parse(str_of(space, point, "optimizer")?)?,
                seed: 0,
            },
            schedule: TrainSchedule::default(),
        }),
    }
}
