//! Self-describing JSON model documents. One schema serves every family, so
//! a single `infer` command can replay any trained model: the document
//! carries the span set, the scaler, the model parameters and enough
//! provenance (config hash, seed) to reproduce the run. Bulk numeric arrays
//! are base64-packed little-endian f64.

use base64::Engine;
use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::features::{Scaler, SpanSet};
use crate::forest::{Forest, SplitMode, Tree, TreeNode, TreeParams};
use crate::linmodel::LinearModel;
use crate::mlp::{Activation, Mlp};
use crate::model::{ModelKind, TrainedModel};
use crate::neighbors::{fit_knn, Weighting};
use crate::scalar::Scalar;
use crate::svr::{SvrModel, SvrParams};

pub const ARTIFACT_SCHEMA: &str = "rotortemp-model/1";

/// Dense f64 matrix packed for compact JSON transport.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PackedMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: String,
}

impl PackedMatrix {
    pub fn pack<F: Scalar>(m: &Array2<F>) -> Self {
        let mut bytes = Vec::with_capacity(m.len() * 8);
        for v in m.iter() {
            bytes.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
        }
        PackedMatrix {
            rows: m.nrows(),
            cols: m.ncols(),
            data: base64::engine::general_purpose::STANDARD.encode(bytes),
        }
    }

    pub fn unpack<F: Scalar>(&self) -> Result<Array2<F>> {
        let bytes = base64::engine::general_purpose::STANDARD
            .decode(&self.data)
            .map_err(|e| Error::Artifact(format!("bad base64: {e}")))?;
        if bytes.len() != self.rows * self.cols * 8 {
            return Err(Error::Artifact("packed matrix size mismatch".into()));
        }
        let mut values = Vec::with_capacity(self.rows * self.cols);
        for chunk in bytes.chunks_exact(8) {
            let v = f64::from_le_bytes(chunk.try_into().unwrap());
            values.push(F::c(v));
        }
        Array2::from_shape_vec((self.rows, self.cols), values)
            .map_err(|e| Error::Artifact(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ScalerDoc {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub kept: Vec<usize>,
    pub dropped: Vec<String>,
    pub n_fit_rows: usize,
}

impl ScalerDoc {
    pub fn from_scaler<F: Scalar>(s: &Scaler<F>) -> Self {
        ScalerDoc {
            means: s.means.iter().map(|v| v.to_f64_lossy()).collect(),
            stds: s.stds.iter().map(|v| v.to_f64_lossy()).collect(),
            kept: s.kept.clone(),
            dropped: s.dropped.clone(),
            n_fit_rows: s.n_fit_rows,
        }
    }

    pub fn to_scaler<F: Scalar>(&self) -> Scaler<F> {
        Scaler {
            means: self.means.iter().map(|&v| F::c(v)).collect(),
            stds: self.stds.iter().map(|&v| F::c(v)).collect(),
            kept: self.kept.clone(),
            dropped: self.dropped.clone(),
            n_fit_rows: self.n_fit_rows,
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TreeDoc {
    pub feature: Vec<i32>,
    pub threshold: Vec<f64>,
    pub left: Vec<u32>,
    pub right: Vec<u32>,
    pub value: Vec<f64>,
    pub n_samples: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelParamsDoc {
    Linear {
        coefficients: Vec<f64>,
    },
    Knn {
        x: PackedMatrix,
        y: Vec<f64>,
        k: usize,
        weighting: Weighting,
    },
    Forest {
        mode: SplitMode,
        trees: Vec<TreeDoc>,
        n_features: usize,
        max_depth: Option<usize>,
        min_samples_split: usize,
        min_samples_leaf: usize,
        n_features_considered: Option<usize>,
        bootstrap: bool,
        seed: u64,
    },
    Svr {
        support_vectors: PackedMatrix,
        dual_coefs: Vec<f64>,
        bias: f64,
        gamma: f64,
        y_mean: f64,
        y_scale: f64,
        c: f64,
        epsilon: f64,
    },
    Mlp {
        weights: Vec<PackedMatrix>,
        biases: Vec<Vec<f64>>,
        activation: Activation,
        y_mean: f64,
        y_scale: f64,
    },
}

/// Top-level artifact document.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModelArtifact {
    pub schema: String,
    pub model_type: ModelKind,
    pub feature_names: Vec<String>,
    pub spans: SpanSet,
    pub sample_rate_hz: f64,
    pub scaler: ScalerDoc,
    pub param_count: usize,
    pub seed: u64,
    pub config_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

/// Artifact plus parameters; the full on-disk document.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModelDocument {
    #[serde(flatten)]
    pub meta: ModelArtifact,
    pub params: ModelParamsDoc,
}

impl ModelDocument {
    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let file = std::fs::File::create(path.as_ref())?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())?;
        let doc: ModelDocument = serde_json::from_reader(std::io::BufReader::new(file))?;
        if doc.meta.schema != ARTIFACT_SCHEMA {
            return Err(Error::Artifact(format!(
                "unsupported schema `{}`",
                doc.meta.schema
            )));
        }
        Ok(doc)
    }
}

pub fn pack_model<F: Scalar>(model: &TrainedModel<F>) -> ModelParamsDoc {
    match model {
        TrainedModel::Ols(m) | TrainedModel::Wls(m) => ModelParamsDoc::Linear {
            coefficients: m.coefficients.iter().map(|v| v.to_f64_lossy()).collect(),
        },
        TrainedModel::Knn(m) => ModelParamsDoc::Knn {
            x: PackedMatrix::pack(m.stored_x()),
            y: m.stored_y().iter().map(|v| v.to_f64_lossy()).collect(),
            k: m.k,
            weighting: m.weighting,
        },
        TrainedModel::RandomForest(m) | TrainedModel::ExtraTrees(m) => ModelParamsDoc::Forest {
            mode: m.params.mode,
            trees: m.trees.iter().map(pack_tree).collect(),
            n_features: m.n_features(),
            max_depth: m.params.max_depth,
            min_samples_split: m.params.min_samples_split,
            min_samples_leaf: m.params.min_samples_leaf,
            n_features_considered: m.params.n_features_considered,
            bootstrap: m.bootstrap,
            seed: m.seed,
        },
        TrainedModel::Svr(m) => ModelParamsDoc::Svr {
            support_vectors: PackedMatrix::pack(&m.support_vectors),
            dual_coefs: m.dual_coefs.iter().map(|v| v.to_f64_lossy()).collect(),
            bias: m.bias.to_f64_lossy(),
            gamma: m.gamma.to_f64_lossy(),
            y_mean: m.y_mean.to_f64_lossy(),
            y_scale: m.y_scale.to_f64_lossy(),
            c: m.params.c.to_f64_lossy(),
            epsilon: m.params.epsilon.to_f64_lossy(),
        },
        TrainedModel::Mlp(m) => ModelParamsDoc::Mlp {
            weights: m.weights.iter().map(PackedMatrix::pack).collect(),
            biases: m
                .biases
                .iter()
                .map(|b| b.iter().map(|v| v.to_f64_lossy()).collect())
                .collect(),
            activation: m.activation,
            y_mean: m.y_mean.to_f64_lossy(),
            y_scale: m.y_scale.to_f64_lossy(),
        },
    }
}

fn pack_tree<F: Scalar>(tree: &Tree<F>) -> TreeDoc {
    let mut doc = TreeDoc {
        feature: Vec::with_capacity(tree.nodes.len()),
        threshold: Vec::with_capacity(tree.nodes.len()),
        left: Vec::with_capacity(tree.nodes.len()),
        right: Vec::with_capacity(tree.nodes.len()),
        value: Vec::with_capacity(tree.nodes.len()),
        n_samples: Vec::with_capacity(tree.nodes.len()),
    };
    for n in &tree.nodes {
        doc.feature.push(n.feature);
        doc.threshold.push(n.threshold.to_f64_lossy());
        doc.left.push(n.left);
        doc.right.push(n.right);
        doc.value.push(n.value.to_f64_lossy());
        doc.n_samples.push(n.n_samples);
    }
    doc
}

fn unpack_tree<F: Scalar>(doc: &TreeDoc, n_features: usize) -> Result<Tree<F>> {
    let n = doc.feature.len();
    if [doc.threshold.len(), doc.left.len(), doc.right.len(), doc.value.len(), doc.n_samples.len()]
        .iter()
        .any(|&l| l != n)
    {
        return Err(Error::Artifact("ragged tree arrays".into()));
    }
    let nodes = (0..n)
        .map(|i| TreeNode {
            feature: doc.feature[i],
            threshold: F::c(doc.threshold[i]),
            left: doc.left[i],
            right: doc.right[i],
            value: F::c(doc.value[i]),
            n_samples: doc.n_samples[i],
        })
        .collect();
    Ok(Tree { nodes, n_features })
}

/// Reconstructs a runnable model from its document. The k-NN index is
/// rebuilt from the stored rows (identical data, identical predictions).
pub fn unpack_model<F: Scalar>(kind: ModelKind, params: &ModelParamsDoc) -> Result<TrainedModel<F>> {
    match (kind, params) {
        (ModelKind::Ols, ModelParamsDoc::Linear { coefficients }) => {
            Ok(TrainedModel::Ols(linear_from(coefficients)))
        }
        (ModelKind::Wls, ModelParamsDoc::Linear { coefficients }) => {
            Ok(TrainedModel::Wls(linear_from(coefficients)))
        }
        (ModelKind::Knn, ModelParamsDoc::Knn { x, y, k, weighting }) => {
            let xs: Array2<F> = x.unpack()?;
            let ys = Array1::from_iter(y.iter().map(|&v| F::c(v)));
            Ok(TrainedModel::Knn(fit_knn(xs, ys, *k, *weighting)?))
        }
        (
            ModelKind::RandomForest | ModelKind::ExtraTrees,
            ModelParamsDoc::Forest {
                mode,
                trees,
                n_features,
                max_depth,
                min_samples_split,
                min_samples_leaf,
                n_features_considered,
                bootstrap,
                seed,
            },
        ) => {
            let forest = Forest {
                trees: trees
                    .iter()
                    .map(|t| unpack_tree(t, *n_features))
                    .collect::<Result<_>>()?,
                params: TreeParams {
                    max_depth: *max_depth,
                    min_samples_split: *min_samples_split,
                    min_samples_leaf: *min_samples_leaf,
                    n_features_considered: *n_features_considered,
                    mode: *mode,
                },
                bootstrap: *bootstrap,
                seed: *seed,
            };
            Ok(if kind == ModelKind::RandomForest {
                TrainedModel::RandomForest(forest)
            } else {
                TrainedModel::ExtraTrees(forest)
            })
        }
        (
            ModelKind::Svr,
            ModelParamsDoc::Svr {
                support_vectors,
                dual_coefs,
                bias,
                gamma,
                y_mean,
                y_scale,
                c,
                epsilon,
            },
        ) => Ok(TrainedModel::Svr(SvrModel {
            support_vectors: support_vectors.unpack()?,
            dual_coefs: Array1::from_iter(dual_coefs.iter().map(|&v| F::c(v))),
            bias: F::c(*bias),
            gamma: F::c(*gamma),
            y_mean: F::c(*y_mean),
            y_scale: F::c(*y_scale),
            converged: true,
            iterations: 0,
            params: SvrParams {
                c: F::c(*c),
                epsilon: F::c(*epsilon),
                gamma: Some(F::c(*gamma)),
                ..Default::default()
            },
        })),
        (
            ModelKind::Mlp,
            ModelParamsDoc::Mlp {
                weights,
                biases,
                activation,
                y_mean,
                y_scale,
            },
        ) => Ok(TrainedModel::Mlp(Mlp {
            weights: weights.iter().map(|w| w.unpack()).collect::<Result<_>>()?,
            biases: biases
                .iter()
                .map(|b| Array1::from_iter(b.iter().map(|&v| F::c(v))))
                .collect(),
            activation: *activation,
            y_mean: F::c(*y_mean),
            y_scale: F::c(*y_scale),
        })),
        _ => Err(Error::Artifact(format!(
            "params do not match model type {:?}",
            kind
        ))),
    }
}

fn linear_from<F: Scalar>(coefficients: &[f64]) -> LinearModel<F> {
    LinearModel {
        coefficients: Array1::from_iter(coefficients.iter().map(|&v| F::c(v))),
        jitter: F::zero(),
    }
}
