//! Feed-forward network for temperature regression: 1–3 hidden layers,
//! ReLU or SELU activations with the matching dropout variant, L2 penalty,
//! six optimizer rules, LR-plateau halving, a batch-size doubling schedule
//! and early stopping on a profile-wise validation split.
//!
//! The target is standardized internally; losses reported in the training
//! history are on that standardized scale while predictions come back in °C.

mod optim;

pub use optim::{OptimizerRule, OptimizerState};

use ndarray::{Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::ProfileSpan;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const SELU_LAMBDA: f64 = 1.050_700_987_355_480_5;
const SELU_ALPHA: f64 = 1.673_263_242_354_377_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    ReLU,
    Selu,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlpConfig<F> {
    /// Hidden layers (1–3).
    pub layers: usize,
    /// Units per hidden layer (4–32).
    pub units: usize,
    pub activation: Activation,
    /// Dropout rate (0–0.3).
    pub dropout: F,
    /// L2 coefficient on weights (biases exempt).
    pub l2: F,
    pub learn_rate: F,
    pub optimizer: OptimizerRule,
    pub seed: u64,
}

impl<F: Scalar> Default for MlpConfig<F> {
    fn default() -> Self {
        // The tuned single-layer configuration.
        MlpConfig {
            layers: 1,
            units: 16,
            activation: Activation::ReLU,
            dropout: F::c(0.13),
            l2: F::c(1.7e-8),
            learn_rate: F::c(5.8e-3),
            optimizer: OptimizerRule::Adam,
            seed: 0,
        }
    }
}

impl<F: Scalar> MlpConfig<F> {
    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.layers) {
            return Err(Error::invalid("layers must lie in 1..=3"));
        }
        if !(4..=32).contains(&self.units) {
            return Err(Error::invalid("units must lie in 4..=32"));
        }
        if self.dropout < F::zero() || self.dropout > F::c(0.3) {
            return Err(Error::invalid("dropout must lie in [0, 0.3]"));
        }
        if self.l2 < F::zero() || self.l2 > F::c(0.1) {
            return Err(Error::invalid("l2 must lie in [0, 0.1]"));
        }
        if !self.learn_rate.is_finite() || self.learn_rate <= F::zero() || self.learn_rate > F::c(0.1)
        {
            return Err(Error::invalid("learn rate must lie in (0, 0.1]"));
        }
        Ok(())
    }
}

/// Epoch schedule: 99 epochs maximum, mini-batches doubling 32→64→128 at
/// epochs 33 and 66, LR halved after 10 epochs without training-loss
/// improvement, early stop on the validation loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainSchedule<F> {
    pub max_epochs: usize,
    pub batch_sizes: [usize; 3],
    pub batch_switch_epochs: [usize; 2],
    pub lr_plateau_patience: usize,
    pub early_stop_patience: usize,
    pub early_stop_min_delta: F,
    pub validation_fraction: F,
}

impl<F: Scalar> Default for TrainSchedule<F> {
    fn default() -> Self {
        TrainSchedule {
            max_epochs: 99,
            batch_sizes: [32, 64, 128],
            batch_switch_epochs: [33, 66],
            lr_plateau_patience: 10,
            early_stop_patience: 15,
            early_stop_min_delta: F::c(1e-4),
            validation_fraction: F::c(0.10),
        }
    }
}

impl<F: Scalar> TrainSchedule<F> {
    fn validate(&self) -> Result<()> {
        if self.batch_switch_epochs[0] > self.batch_switch_epochs[1] {
            return Err(Error::invalid("batch switch epochs must be ordered"));
        }
        if self.lr_plateau_patience == 0 || self.early_stop_patience == 0 {
            return Err(Error::invalid("patience values must be at least 1"));
        }
        if self.batch_sizes.contains(&0) {
            return Err(Error::invalid("batch sizes must be positive"));
        }
        Ok(())
    }

    fn batch_size_at(&self, epoch: usize) -> usize {
        if epoch < self.batch_switch_epochs[0] {
            self.batch_sizes[0]
        } else if epoch < self.batch_switch_epochs[1] {
            self.batch_sizes[1]
        } else {
            self.batch_sizes[2]
        }
    }
}

/// Dropout realized as an affine map per unit: dropped(h) = scale∘h + offset.
/// Inverted dropout has offset 0; the SELU variant shifts dropped units to
/// the negative saturation value and renormalizes.
type DropoutArrays<F> = Option<(Array2<F>, Array2<F>)>;

#[derive(Debug, Clone)]
pub struct ForwardCache<F> {
    input: Array2<F>,
    pre_act: Vec<Array2<F>>,
    post_drop: Vec<Array2<F>>,
    pub dropout: Vec<DropoutArrays<F>>,
}

#[derive(Debug, Clone)]
pub struct Gradients<F> {
    pub weights: Vec<Array2<F>>,
    pub biases: Vec<Array1<F>>,
}

/// The network: hidden layers plus a linear single-unit readout, with the
/// target scaling folded into the artifact.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<F> {
    pub weights: Vec<Array2<F>>,
    pub biases: Vec<Array1<F>>,
    pub activation: Activation,
    pub y_mean: F,
    pub y_scale: F,
}

/// Deterministic fan-in initialization: variance 2/fan_in for ReLU layers,
/// 1/fan_in for SELU (self-normalizing) and the linear readout.
pub fn init_mlp<F: Scalar>(config: &MlpConfig<F>, n_inputs: usize) -> Result<Mlp<F>> {
    config.validate()?;
    if n_inputs == 0 {
        return Err(Error::invalid("network needs at least one input"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(0);
    let mut sizes = vec![n_inputs];
    sizes.extend(std::iter::repeat_n(config.units, config.layers));
    sizes.push(1);

    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for l in 0..sizes.len() - 1 {
        let fan_in = sizes[l];
        let is_output = l == sizes.len() - 2;
        let gain = if is_output || config.activation == Activation::Selu {
            1.0
        } else {
            2.0
        };
        let std = (gain / fan_in as f64).sqrt();
        let w = Array2::from_shape_fn((sizes[l], sizes[l + 1]), |_| {
            F::c(std * standard_normal(&mut rng))
        });
        weights.push(w);
        biases.push(Array1::zeros(sizes[l + 1]));
    }
    Ok(Mlp {
        weights,
        biases,
        activation: config.activation,
        y_mean: F::zero(),
        y_scale: F::one(),
    })
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller keeps the generic code free of distribution dependencies.
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn activate<F: Scalar>(a: Activation, z: F) -> F {
    match a {
        Activation::ReLU => z.max(F::zero()),
        Activation::Selu => {
            let lambda = F::c(SELU_LAMBDA);
            let alpha = F::c(SELU_ALPHA);
            if z > F::zero() {
                lambda * z
            } else {
                lambda * alpha * (z.exp() - F::one())
            }
        }
    }
}

fn activate_grad<F: Scalar>(a: Activation, z: F) -> F {
    match a {
        Activation::ReLU => {
            if z > F::zero() {
                F::one()
            } else {
                F::zero()
            }
        }
        Activation::Selu => {
            let lambda = F::c(SELU_LAMBDA);
            let alpha = F::c(SELU_ALPHA);
            if z > F::zero() {
                lambda
            } else {
                lambda * alpha * z.exp()
            }
        }
    }
}

impl<F: Scalar> Mlp<F> {
    pub fn n_inputs(&self) -> usize {
        self.weights[0].nrows()
    }

    pub fn n_hidden_layers(&self) -> usize {
        self.weights.len() - 1
    }

    pub fn param_count(&self) -> usize {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| w.len() + b.len())
            .sum()
    }

    fn check_width(&self, got: usize) -> Result<()> {
        if got != self.n_inputs() {
            return Err(Error::DimensionMismatch {
                expected: self.n_inputs(),
                got,
            });
        }
        Ok(())
    }

    /// Draws the per-batch dropout transforms for every hidden layer.
    pub fn draw_dropout(
        &self,
        rate: F,
        batch: usize,
        rng: &mut ChaCha8Rng,
    ) -> Vec<DropoutArrays<F>> {
        let mut out = Vec::with_capacity(self.n_hidden_layers());
        for l in 0..self.n_hidden_layers() {
            if rate <= F::zero() {
                out.push(None);
                continue;
            }
            let units = self.weights[l].ncols();
            let keep = F::one() - rate;
            let (scale, offset) = match self.activation {
                Activation::ReLU => {
                    // Inverted dropout: kept units rescaled by 1/keep.
                    let scale = Array2::from_shape_fn((batch, units), |_| {
                        if F::c(rng.random::<f64>()) < keep {
                            F::one() / keep
                        } else {
                            F::zero()
                        }
                    });
                    (scale, Array2::zeros((batch, units)))
                }
                Activation::Selu => {
                    // Alpha dropout: dropped units pinned to the negative
                    // saturation value, then affinely renormalized.
                    let alpha_prime = F::c(-SELU_LAMBDA * SELU_ALPHA);
                    let a = (keep + alpha_prime * alpha_prime * keep * (F::one() - keep))
                        .powf(F::c(-0.5));
                    let b = -a * (F::one() - keep) * alpha_prime;
                    let mut scale = Array2::zeros((batch, units));
                    let mut offset = Array2::zeros((batch, units));
                    for r in 0..batch {
                        for c in 0..units {
                            if F::c(rng.random::<f64>()) < keep {
                                scale[(r, c)] = a;
                                offset[(r, c)] = b;
                            } else {
                                scale[(r, c)] = F::zero();
                                offset[(r, c)] = a * alpha_prime + b;
                            }
                        }
                    }
                    (scale, offset)
                }
            };
            out.push(Some((scale, offset)));
        }
        out
    }

    /// Forward pass with explicit dropout transforms (empty/None entries mean
    /// no dropout). Returns standardized-scale outputs and the cache needed
    /// for backprop.
    pub fn forward_with_dropout(
        &self,
        x: &Array2<F>,
        dropout: &[DropoutArrays<F>],
    ) -> Result<(Array1<F>, ForwardCache<F>)> {
        self.check_width(x.ncols())?;
        let mut pre_act = Vec::new();
        let mut post_drop = Vec::new();
        let mut h = x.to_owned();
        for l in 0..self.n_hidden_layers() {
            let mut z = h.dot(&self.weights[l]);
            for r in 0..z.nrows() {
                for c in 0..z.ncols() {
                    z[(r, c)] = z[(r, c)] + self.biases[l][c];
                }
            }
            let mut a = z.mapv(|v| activate(self.activation, v));
            if let Some(Some((scale, offset))) = dropout.get(l) {
                a = &a * scale + offset;
            }
            pre_act.push(z);
            post_drop.push(a.clone());
            h = a;
        }
        let out_l = self.n_hidden_layers();
        let z_out = h.dot(&self.weights[out_l]);
        let preds = Array1::from_shape_fn(x.nrows(), |r| z_out[(r, 0)] + self.biases[out_l][0]);
        Ok((
            preds,
            ForwardCache {
                input: x.to_owned(),
                pre_act,
                post_drop,
                dropout: dropout.to_vec(),
            },
        ))
    }

    /// Deterministic inference on standardized scale; dropout inactive.
    pub fn forward_infer(&self, x: &Array2<F>) -> Result<Array1<F>> {
        let none: Vec<DropoutArrays<F>> = vec![None; self.n_hidden_layers()];
        Ok(self.forward_with_dropout(x, &none)?.0)
    }

    /// Predictions in target units (°C).
    pub fn predict(&self, x: &Array2<F>) -> Result<Array1<F>> {
        let raw = self.forward_infer(x)?;
        Ok(raw.mapv(|v| self.y_mean + self.y_scale * v))
    }

    pub fn predict_row(&self, row: &[F]) -> Result<F> {
        let x = Array2::from_shape_vec((1, row.len()), row.to_vec())
            .map_err(|e| Error::invalid(e.to_string()))?;
        Ok(self.predict(&x)?[0])
    }

    /// Mean-squared loss on standardized targets plus the L2 penalty.
    pub fn loss_with_dropout(
        &self,
        x: &Array2<F>,
        y_std: &Array1<F>,
        dropout: &[DropoutArrays<F>],
        l2: F,
    ) -> Result<F> {
        let (preds, _) = self.forward_with_dropout(x, dropout)?;
        let n = F::from_usize(x.nrows()).unwrap();
        let mse = preds
            .iter()
            .zip(y_std.iter())
            .fold(F::zero(), |acc, (p, t)| acc + (*p - *t) * (*p - *t))
            / n;
        Ok(mse + l2 * self.weight_norm_sq())
    }

    pub fn weight_norm_sq(&self) -> F {
        self.weights
            .iter()
            .map(|w| w.iter().fold(F::zero(), |a, v| a + *v * *v))
            .fold(F::zero(), |a, v| a + v)
    }

    /// Gradients of (MSE + l2·Σ‖W‖²) from a cached training forward pass.
    pub fn backward(
        &self,
        cache: &ForwardCache<F>,
        preds: &Array1<F>,
        y_std: &Array1<F>,
        l2: F,
    ) -> Gradients<F> {
        let batch = cache.input.nrows();
        let n = F::from_usize(batch).unwrap();
        let n_layers = self.weights.len();
        let mut grads_w: Vec<Array2<F>> = self.weights.iter().map(|w| Array2::zeros(w.dim())).collect();
        let mut grads_b: Vec<Array1<F>> = self.biases.iter().map(|b| Array1::zeros(b.len())).collect();

        // d = ∂L/∂z for the current layer, starting at the linear output.
        let mut d = Array2::from_shape_fn((batch, 1), |(r, _)| {
            F::c(2.0) * (preds[r] - y_std[r]) / n
        });

        for l in (0..n_layers).rev() {
            let h_prev = if l == 0 { &cache.input } else { &cache.post_drop[l - 1] };
            grads_w[l] = h_prev.t().dot(&d);
            for (c, g) in grads_b[l].iter_mut().enumerate() {
                *g = d.column(c).iter().fold(F::zero(), |a, v| a + *v);
            }
            // L2 on weights only.
            if l2 > F::zero() {
                grads_w[l] = &grads_w[l] + &self.weights[l].mapv(|w| F::c(2.0) * l2 * w);
            }
            if l > 0 {
                let mut dh = d.dot(&self.weights[l].t());
                if let Some((scale, _)) = &cache.dropout[l - 1] {
                    dh = &dh * scale;
                }
                let z = &cache.pre_act[l - 1];
                d = Array2::from_shape_fn(dh.dim(), |(r, c)| {
                    dh[(r, c)] * activate_grad(self.activation, z[(r, c)])
                });
            }
        }
        Gradients {
            weights: grads_w,
            biases: grads_b,
        }
    }

    /// All parameters as one flat vector (weights then biases, per layer).
    pub fn params_flat(&self) -> Vec<F> {
        let mut out = Vec::with_capacity(self.param_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter().cloned());
            out.extend(b.iter().cloned());
        }
        out
    }

    pub fn set_params_flat(&mut self, flat: &[F]) {
        let mut k = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            for v in w.iter_mut() {
                *v = flat[k];
                k += 1;
            }
            for v in b.iter_mut() {
                *v = flat[k];
                k += 1;
            }
        }
        debug_assert_eq!(k, flat.len());
    }

    /// Gradient counterpart of [`Mlp::params_flat`].
    pub fn grads_flat(grads: &Gradients<F>) -> Vec<F> {
        let mut out = Vec::new();
        for (w, b) in grads.weights.iter().zip(&grads.biases) {
            out.extend(w.iter().cloned());
            out.extend(b.iter().cloned());
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord<F> {
    pub epoch: usize,
    pub lr: F,
    pub batch_size: usize,
    pub train_loss: F,
    pub val_loss: F,
}

#[derive(Debug, Clone)]
pub struct TrainReport<F> {
    pub history: Vec<EpochRecord<F>>,
    pub best_epoch: usize,
    pub best_val_loss: F,
    pub stopped_early: bool,
}

impl<F: Scalar> TrainReport<F> {
    pub fn to_csv(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        use std::io::Write;
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "epoch,lr,batch_size,train_loss,val_loss")?;
        for rec in &self.history {
            writeln!(
                w,
                "{},{},{},{},{}",
                rec.epoch, rec.lr, rec.batch_size, rec.train_loss, rec.val_loss
            )?;
        }
        Ok(())
    }
}

/// Splits profiles into fit/validation sets targeting the configured
/// validation fraction of rows; whole sessions only.
fn validation_split<F: Scalar>(
    profiles: &[ProfileSpan],
    n_rows: usize,
    fraction: F,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if profiles.len() < 2 {
        return Err(Error::invalid(
            "training needs at least two profiles to form a validation split",
        ));
    }
    let mut order: Vec<usize> = (0..profiles.len()).collect();
    for i in (1..order.len()).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let target = (fraction.to_f64_lossy() * n_rows as f64).ceil() as usize;
    let mut val_profiles = Vec::new();
    let mut val_rows = 0usize;
    for &p in &order {
        if val_profiles.len() + 1 >= profiles.len() {
            break; // keep at least one profile for fitting
        }
        val_profiles.push(p);
        val_rows += profiles[p].len();
        if val_rows >= target {
            break;
        }
    }
    if val_profiles.is_empty() {
        return Err(Error::invalid("validation split came out empty"));
    }
    let mut fit_rows = Vec::new();
    let mut val_row_idx = Vec::new();
    for (p, span) in profiles.iter().enumerate() {
        let rows = span.start..span.end;
        if val_profiles.contains(&p) {
            val_row_idx.extend(rows);
        } else {
            fit_rows.extend(rows);
        }
    }
    Ok((fit_rows, val_row_idx))
}

/// Full training run. `x` rows are standardized features; `y` is the raw
/// target in °C; `profiles` describes session boundaries within `x`.
pub fn train_mlp<F: Scalar>(
    config: &MlpConfig<F>,
    schedule: &TrainSchedule<F>,
    x: &Array2<F>,
    y: &Array1<F>,
    profiles: &[ProfileSpan],
) -> Result<(Mlp<F>, TrainReport<F>)> {
    config.validate()?;
    schedule.validate()?;
    if x.nrows() != y.len() || x.nrows() == 0 {
        return Err(Error::invalid("training data must be non-empty and aligned"));
    }
    let total_rows: usize = profiles.iter().map(|p| p.len()).sum();
    if total_rows != x.nrows() {
        return Err(Error::invalid("profile spans do not cover the matrix"));
    }

    let mut split_rng = ChaCha8Rng::seed_from_u64(config.seed);
    split_rng.set_stream(1);
    let (fit_rows, val_rows) =
        validation_split(profiles, x.nrows(), schedule.validation_fraction, &mut split_rng)?;

    // Target standardization on the fit portion.
    let n_fit = F::from_usize(fit_rows.len()).unwrap();
    let y_mean = fit_rows.iter().map(|&r| y[r]).fold(F::zero(), |a, v| a + v) / n_fit;
    let y_var = fit_rows
        .iter()
        .map(|&r| (y[r] - y_mean) * (y[r] - y_mean))
        .fold(F::zero(), |a, v| a + v)
        / n_fit;
    let y_scale = if y_var > F::zero() { y_var.sqrt() } else { F::one() };

    let gather = |rows: &[usize]| -> (Array2<F>, Array1<F>) {
        let mut gx = Array2::zeros((rows.len(), x.ncols()));
        let mut gy = Array1::zeros(rows.len());
        for (out, &r) in rows.iter().enumerate() {
            gx.row_mut(out).assign(&x.row(r));
            gy[out] = (y[r] - y_mean) / y_scale;
        }
        (gx, gy)
    };
    let (x_fit, y_fit) = gather(&fit_rows);
    let (x_val, y_val) = gather(&val_rows);

    let mut net = init_mlp(config, x.ncols())?;
    net.y_mean = y_mean;
    net.y_scale = y_scale;

    let mut params = net.params_flat();
    let mut opt = OptimizerState::new(config.optimizer, params.len());
    let mut lr = config.learn_rate;

    let mut epoch_rng = ChaCha8Rng::seed_from_u64(config.seed);
    epoch_rng.set_stream(2);

    let mut history = Vec::new();
    let mut best_val = F::infinity();
    let mut best_epoch = 0usize;
    let mut best_params = params.clone();
    let mut val_stall = 0usize;
    let mut best_train = F::infinity();
    let mut train_stall = 0usize;
    let mut stopped_early = false;

    let n_fit_rows = x_fit.nrows();
    let mut order: Vec<usize> = (0..n_fit_rows).collect();

    for epoch in 0..schedule.max_epochs {
        let batch_size = schedule.batch_size_at(epoch).min(n_fit_rows);
        for i in (1..order.len()).rev() {
            let j = epoch_rng.random_range(0..=i);
            order.swap(i, j);
        }

        let mut loss_sum = F::zero();
        let mut batches = 0usize;
        let mut start = 0;
        while start < n_fit_rows {
            let end = (start + batch_size).min(n_fit_rows);
            let rows = &order[start..end];
            let mut bx = Array2::zeros((rows.len(), x.ncols()));
            let mut by = Array1::zeros(rows.len());
            for (out, &r) in rows.iter().enumerate() {
                bx.row_mut(out).assign(&x_fit.row(r));
                by[out] = y_fit[r];
            }
            let dropout = net.draw_dropout(config.dropout, rows.len(), &mut epoch_rng);
            let (preds, cache) = net.forward_with_dropout(&bx, &dropout)?;
            let nb = F::from_usize(rows.len()).unwrap();
            let mse = preds
                .iter()
                .zip(by.iter())
                .fold(F::zero(), |a, (p, t)| a + (*p - *t) * (*p - *t))
                / nb;
            loss_sum = loss_sum + mse + config.l2 * net.weight_norm_sq();
            batches += 1;

            let grads = net.backward(&cache, &preds, &by, config.l2);
            let g_flat = Mlp::grads_flat(&grads);
            opt.step(&mut params, &g_flat, lr);
            net.set_params_flat(&params);
            start = end;
        }
        let train_loss = loss_sum / F::from_usize(batches.max(1)).unwrap();

        let val_preds = net.forward_infer(&x_val)?;
        let nv = F::from_usize(x_val.nrows()).unwrap();
        let val_loss = val_preds
            .iter()
            .zip(y_val.iter())
            .fold(F::zero(), |a, (p, t)| a + (*p - *t) * (*p - *t))
            / nv;

        history.push(EpochRecord {
            epoch,
            lr,
            batch_size,
            train_loss,
            val_loss,
        });

        // LR plateau on the training loss.
        if train_loss < best_train {
            best_train = train_loss;
            train_stall = 0;
        } else {
            train_stall += 1;
            if train_stall >= schedule.lr_plateau_patience {
                lr = lr / F::c(2.0);
                train_stall = 0;
            }
        }

        // Early stopping on the validation loss.
        if val_loss < best_val - schedule.early_stop_min_delta {
            best_val = val_loss;
            best_epoch = epoch;
            best_params = params.clone();
            val_stall = 0;
        } else {
            val_stall += 1;
            if val_stall >= schedule.early_stop_patience {
                stopped_early = true;
                break;
            }
        }
    }

    net.set_params_flat(&best_params);
    Ok((
        net,
        TrainReport {
            history,
            best_epoch,
            best_val_loss: best_val,
            stopped_early,
        },
    ))
}
