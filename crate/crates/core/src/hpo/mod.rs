//! Sequential model-based hyperparameter search: a Gaussian-process
//! surrogate over the encoded search box, three acquisition functions
//! proposing candidates independently, and the most promising proposal
//! evaluated next. The objective is the cross-validation mean MSE.

mod gp;
pub mod spaces;

pub use gp::{acquisition, gp_fit, normal_cdf, AcquisitionKind, GpHyperParams, GpSurrogate};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// One hyperparameter axis.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DimSpec {
    Real { lo: f64, hi: f64, log: bool },
    Integer { lo: i64, hi: i64, log: bool },
    Categorical { choices: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Dimension {
    pub name: String,
    #[serde(flatten)]
    pub spec: DimSpec,
}

impl DimSpec {
    fn validate(&self) -> Result<()> {
        match self {
            DimSpec::Real { lo, hi, log } => {
                if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                    return Err(Error::invalid("real bounds must be ordered"));
                }
                if *log && *lo <= 0.0 {
                    return Err(Error::invalid("log dims must be strictly positive"));
                }
            }
            DimSpec::Integer { lo, hi, log } => {
                if lo >= hi {
                    return Err(Error::invalid("integer bounds must be ordered"));
                }
                if *log && *lo <= 0 {
                    return Err(Error::invalid("log dims must be strictly positive"));
                }
            }
            DimSpec::Categorical { choices } => {
                if choices.len() < 2 {
                    return Err(Error::invalid("categoricals need at least two choices"));
                }
            }
        }
        Ok(())
    }

    /// Width of this dimension in the encoded vector.
    fn encoded_width(&self) -> usize {
        match self {
            DimSpec::Categorical { choices } => choices.len(),
            _ => 1,
        }
    }
}

/// A concrete hyperparameter value.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Real(f64),
    Cat(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Real(v) => Some(*v),
            ParamValue::Int(v) => Some(*v as f64),
            ParamValue::Cat(_) => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            ParamValue::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            ParamValue::Cat(s) => Some(s),
            _ => None,
        }
    }
}

/// Point in the search space, aligned with [`HpoSpace::dims`].
pub type Point = Vec<ParamValue>;

/// Search box over mixed dimensions. Span dimensions (always present in the
/// model spaces) carry a strictly-increasing constraint enforced whenever a
/// point is produced.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HpoSpace {
    pub dims: Vec<Dimension>,
    /// Indices of the span dimensions, in order.
    pub span_dims: Vec<usize>,
}

impl HpoSpace {
    pub fn new(dims: Vec<Dimension>) -> Result<Self> {
        Self::with_span_dims(dims, Vec::new())
    }

    pub fn with_span_dims(dims: Vec<Dimension>, span_dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::invalid("space needs at least one dimension"));
        }
        for d in &dims {
            d.spec.validate()?;
        }
        for &s in &span_dims {
            if s >= dims.len() {
                return Err(Error::invalid("span index out of range"));
            }
            if !matches!(dims[s].spec, DimSpec::Integer { .. }) {
                return Err(Error::invalid("span dims must be integers"));
            }
        }
        Ok(HpoSpace { dims, span_dims })
    }

    pub fn encoded_width(&self) -> usize {
        self.dims.iter().map(|d| d.spec.encoded_width()).sum()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.dims.iter().position(|d| d.name == name)
    }

    /// Maps a point onto [0,1]^w: log/linear scaling for numerics, one-hot
    /// for categoricals.
    pub fn encode(&self, point: &Point) -> Result<Vec<f64>> {
        if point.len() != self.dims.len() {
            return Err(Error::DimensionMismatch {
                expected: self.dims.len(),
                got: point.len(),
            });
        }
        let mut out = Vec::with_capacity(self.encoded_width());
        for (dim, value) in self.dims.iter().zip(point.iter()) {
            match (&dim.spec, value) {
                (DimSpec::Real { lo, hi, log }, v) => {
                    let v = v
                        .as_f64()
                        .ok_or_else(|| Error::invalid(format!("`{}` must be numeric", dim.name)))?;
                    if v < *lo || v > *hi {
                        return Err(Error::invalid(format!("`{}` out of bounds", dim.name)));
                    }
                    out.push(scale_to_unit(v, *lo, *hi, *log));
                }
                (DimSpec::Integer { lo, hi, log }, v) => {
                    let v = v
                        .as_f64()
                        .ok_or_else(|| Error::invalid(format!("`{}` must be numeric", dim.name)))?;
                    if v < *lo as f64 || v > *hi as f64 {
                        return Err(Error::invalid(format!("`{}` out of bounds", dim.name)));
                    }
                    out.push(scale_to_unit(v, *lo as f64, *hi as f64, *log));
                }
                (DimSpec::Categorical { choices }, ParamValue::Cat(c)) => {
                    let idx = choices
                        .iter()
                        .position(|x| x == c)
                        .ok_or_else(|| Error::invalid(format!("unknown choice `{c}`")))?;
                    for k in 0..choices.len() {
                        out.push(if k == idx { 1.0 } else { 0.0 });
                    }
                }
                (DimSpec::Categorical { .. }, _) => {
                    return Err(Error::invalid(format!("`{}` must be categorical", dim.name)))
                }
            }
        }
        Ok(out)
    }

    /// Inverse of [`HpoSpace::encode`]; integers round, categoricals argmax.
    /// The result passes through the span-ordering repair.
    pub fn decode(&self, encoded: &[f64]) -> Result<Point> {
        if encoded.len() != self.encoded_width() {
            return Err(Error::DimensionMismatch {
                expected: self.encoded_width(),
                got: encoded.len(),
            });
        }
        let mut point = Vec::with_capacity(self.dims.len());
        let mut k = 0;
        for dim in &self.dims {
            match &dim.spec {
                DimSpec::Real { lo, hi, log } => {
                    let u = encoded[k].clamp(0.0, 1.0);
                    point.push(ParamValue::Real(unit_to_scale(u, *lo, *hi, *log)));
                    k += 1;
                }
                DimSpec::Integer { lo, hi, log } => {
                    let u = encoded[k].clamp(0.0, 1.0);
                    let v = unit_to_scale(u, *lo as f64, *hi as f64, *log).round() as i64;
                    point.push(ParamValue::Int(v.clamp(*lo, *hi)));
                    k += 1;
                }
                DimSpec::Categorical { choices } => {
                    let slice = &encoded[k..k + choices.len()];
                    let idx = slice
                        .iter()
                        .enumerate()
                        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                        .map(|(i, _)| i)
                        .unwrap_or(0);
                    point.push(ParamValue::Cat(choices[idx].clone()));
                    k += choices.len();
                }
            }
        }
        Ok(self.repair(point))
    }

    /// Enforces the strictly-increasing span constraint by sorting and
    /// nudging duplicates apart within bounds.
    pub fn repair(&self, mut point: Point) -> Point {
        if self.span_dims.is_empty() {
            return point;
        }
        let (lo, hi) = match &self.dims[self.span_dims[0]].spec {
            DimSpec::Integer { lo, hi, .. } => (*lo, *hi),
            _ => unreachable!("span dims validated as integers"),
        };
        let mut spans: Vec<i64> = self
            .span_dims
            .iter()
            .map(|&i| point[i].as_i64().unwrap_or(lo))
            .collect();
        spans.sort_unstable();
        for i in 1..spans.len() {
            if spans[i] <= spans[i - 1] {
                spans[i] = spans[i - 1] + 1;
            }
        }
        // Push back under the upper bound if the bumps overflowed.
        for i in (0..spans.len()).rev() {
            let cap = hi - (spans.len() - 1 - i) as i64;
            if spans[i] > cap {
                spans[i] = cap;
            }
        }
        for i in 1..spans.len() {
            if spans[i] <= spans[i - 1] {
                spans[i] = spans[i - 1] + 1;
            }
        }
        for (slot, &v) in self.span_dims.iter().zip(spans.iter()) {
            point[*slot] = ParamValue::Int(v.clamp(lo, hi));
        }
        point
    }

    /// Uniform sample in encoded coordinates.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Point {
        let encoded: Vec<f64> = (0..self.encoded_width()).map(|_| rng.random()).collect();
        self.decode(&encoded).expect("decode of in-range vector")
    }

    /// Jittered latin-hypercube batch for the initial design.
    pub fn latin_hypercube(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<Point> {
        let w = self.encoded_width();
        let mut columns: Vec<Vec<f64>> = Vec::with_capacity(w);
        for _ in 0..w {
            let mut levels: Vec<f64> = (0..n)
                .map(|i| (i as f64 + rng.random::<f64>()) / n as f64)
                .collect();
            for i in (1..levels.len()).rev() {
                let j = rng.random_range(0..=i);
                levels.swap(i, j);
            }
            columns.push(levels);
        }
        (0..n)
            .map(|i| {
                let encoded: Vec<f64> = (0..w).map(|c| columns[c][i]).collect();
                self.decode(&encoded).expect("decode of in-range vector")
            })
            .collect()
    }

    pub fn point_in_bounds(&self, point: &Point) -> bool {
        self.encode(point).is_ok()
    }
}

fn scale_to_unit(v: f64, lo: f64, hi: f64, log: bool) -> f64 {
    if log {
        (v.ln() - lo.ln()) / (hi.ln() - lo.ln())
    } else {
        (v - lo) / (hi - lo)
    }
}

fn unit_to_scale(u: f64, lo: f64, hi: f64, log: bool) -> f64 {
    if log {
        (lo.ln() + u * (hi.ln() - lo.ln())).exp()
    } else {
        lo + u * (hi - lo)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Ok,
    Failed,
}

/// One evaluated configuration.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Trial {
    pub index: usize,
    pub point: Point,
    /// CV mean MSE (°C²) for successful trials.
    pub value: Option<f64>,
    pub status: TrialStatus,
}

#[derive(Debug, Clone)]
pub struct HpoOptions {
    pub n_init: usize,
    /// Guided iterations after the initial design.
    pub n_iter: usize,
    pub seed: u64,
    pub ucb_kappa: f64,
    /// Candidate pool size per suggestion.
    pub pool: usize,
    /// Objective values are fed to the GP as log(1+v); reporting stays raw.
    pub log_transform: bool,
}

impl Default for HpoOptions {
    fn default() -> Self {
        HpoOptions {
            n_init: 30,
            n_iter: 100,
            seed: 0,
            ucb_kappa: 1.96,
            pool: 1000,
            log_transform: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HpoResult {
    pub history: Vec<Trial>,
    pub best: Trial,
}

fn transform(v: f64, log: bool) -> f64 {
    if log {
        v.max(0.0).ln_1p()
    } else {
        v
    }
}

/// Proposes the next point: each acquisition ranks a shared candidate pool
/// (seeded uniform draws plus perturbations of the incumbent) and refines
/// its winner locally; the best pool-normalized score wins. Falls back to a
/// random point when the surrogate cannot be built.
pub fn suggest(
    surrogate: Option<&GpSurrogate<f64>>,
    space: &HpoSpace,
    incumbent_encoded: Option<&[f64]>,
    best_transformed: f64,
    failed_encoded: &[Vec<f64>],
    opts: &HpoOptions,
    rng: &mut ChaCha8Rng,
) -> Point {
    let surrogate = match surrogate {
        Some(s) => s,
        None => return space.sample(rng),
    };
    let w = space.encoded_width();

    let mut candidates: Vec<Vec<f64>> = (0..opts.pool)
        .map(|_| (0..w).map(|_| rng.random()).collect())
        .collect();
    if let Some(inc) = incumbent_encoded {
        for _ in 0..10 {
            let jittered: Vec<f64> = inc
                .iter()
                .map(|&v| {
                    let delta = (rng.random::<f64>() - 0.5) * 0.1;
                    (v + delta).clamp(0.0, 1.0)
                })
                .collect();
            candidates.push(jittered);
        }
    }

    // Pre-score the pool once per acquisition for normalization statistics.
    let posteriors: Vec<(f64, f64)> = candidates.iter().map(|c| surrogate.posterior(c)).collect();
    let too_close_to_failure = |c: &[f64]| {
        failed_encoded.iter().any(|f| {
            let d2: f64 = f.iter().zip(c.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            d2 < 1e-6
        })
    };

    let mut best_normalized = f64::NEG_INFINITY;
    let mut best_point: Option<Vec<f64>> = None;
    for kind in AcquisitionKind::ALL {
        let scores: Vec<f64> = posteriors
            .iter()
            .zip(candidates.iter())
            .map(|(&(m, s), c)| {
                if too_close_to_failure(c) {
                    f64::NEG_INFINITY
                } else {
                    acquisition(m, s, best_transformed, kind, opts.ucb_kappa)
                }
            })
            .collect();
        let finite: Vec<f64> = scores.iter().copied().filter(|v| v.is_finite()).collect();
        if finite.is_empty() {
            continue;
        }
        let mean = finite.iter().sum::<f64>() / finite.len() as f64;
        let var = finite.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / finite.len() as f64;
        let std = var.sqrt().max(1e-12);

        let (arg, _) = scores
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        // Local pattern refinement of the winner in encoded space.
        let mut current = candidates[arg].clone();
        let mut current_score = scores[arg];
        let mut step = 0.05;
        for _ in 0..8 {
            let mut improved = false;
            for d in 0..w {
                for dir in [1.0, -1.0] {
                    let mut cand = current.clone();
                    cand[d] = (cand[d] + dir * step).clamp(0.0, 1.0);
                    if too_close_to_failure(&cand) {
                        continue;
                    }
                    let (m, s) = surrogate.posterior(&cand);
                    let sc = acquisition(m, s, best_transformed, kind, opts.ucb_kappa);
                    if sc > current_score {
                        current_score = sc;
                        current = cand;
                        improved = true;
                    }
                }
            }
            if !improved {
                step /= 2.0;
                if step < 5e-3 {
                    break;
                }
            }
        }
        let normalized = (current_score - mean) / std;
        if normalized > best_normalized {
            best_normalized = normalized;
            best_point = Some(current);
        }
    }

    match best_point {
        Some(enc) => space.decode(&enc).expect("in-range encoded point"),
        None => space.sample(rng),
    }
}

/// Runs the full search: seeded initial design, then sequential
/// suggest/evaluate. `prior_trials` (e.g. from a resumed history) count
/// towards the budget.
pub fn optimize<E>(
    objective: E,
    space: &HpoSpace,
    opts: &HpoOptions,
    prior_trials: Vec<Trial>,
) -> Result<HpoResult>
where
    E: FnMut(&Point) -> Result<f64>,
{
    optimize_with_observer(objective, space, opts, prior_trials, |_| {})
}

/// [`optimize`] with a per-trial observer, e.g. for persisting the history
/// line by line so interrupted runs can resume.
pub fn optimize_with_observer<E, O>(
    mut objective: E,
    space: &HpoSpace,
    opts: &HpoOptions,
    prior_trials: Vec<Trial>,
    mut on_trial: O,
) -> Result<HpoResult>
where
    E: FnMut(&Point) -> Result<f64>,
    O: FnMut(&Trial),
{
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(0);
    let mut history = prior_trials;
    let total_budget = opts.n_init + opts.n_iter;

    // Initial design, skipping slots already covered by prior trials.
    if history.len() < opts.n_init {
        let design = space.latin_hypercube(opts.n_init, &mut rng);
        for point in design.into_iter().skip(history.len()) {
            let idx = history.len();
            let trial = evaluate(&mut objective, point, idx);
            on_trial(&trial);
            history.push(trial);
        }
    }

    let mut suggest_rng = ChaCha8Rng::seed_from_u64(opts.seed);
    suggest_rng.set_stream(1);
    while history.len() < total_budget {
        let (xs, ys): (Vec<Vec<f64>>, Vec<f64>) = history
            .iter()
            .filter(|t| t.status == TrialStatus::Ok)
            .filter_map(|t| {
                let enc = space.encode(&t.point).ok()?;
                Some((enc, transform(t.value.unwrap(), opts.log_transform)))
            })
            .unzip();
        let failed: Vec<Vec<f64>> = history
            .iter()
            .filter(|t| t.status == TrialStatus::Failed)
            .filter_map(|t| space.encode(&t.point).ok())
            .collect();

        let surrogate = if xs.len() >= 2 {
            gp_fit(xs.clone(), &ndarray::Array1::from_vec(ys.clone())).ok()
        } else {
            None
        };
        let (incumbent_encoded, best_transformed) = match ys
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        {
            Some((i, v)) => (Some(xs[i].clone()), *v),
            None => (None, f64::INFINITY),
        };

        let point = suggest(
            surrogate.as_ref(),
            space,
            incumbent_encoded.as_deref(),
            best_transformed,
            &failed,
            opts,
            &mut suggest_rng,
        );
        let idx = history.len();
        let trial = evaluate(&mut objective, point, idx);
        on_trial(&trial);
        history.push(trial);
    }

    let best = history
        .iter()
        .filter(|t| t.status == TrialStatus::Ok)
        .min_by(|a, b| a.value.partial_cmp(&b.value).unwrap())
        .cloned()
        .ok_or_else(|| Error::invalid("every trial failed"))?;
    Ok(HpoResult { history, best })
}

fn evaluate<E>(objective: &mut E, point: Point, index: usize) -> Trial
where
    E: FnMut(&Point) -> Result<f64>,
{
    match objective(&point) {
        Ok(v) if v.is_finite() => Trial {
            index,
            point,
            value: Some(v),
            status: TrialStatus::Ok,
        },
        _ => Trial {
            index,
            point,
            value: None,
            status: TrialStatus::Failed,
        },
    }
}

/// Incumbent-best trace: element i is the best objective among trials 0..=i.
pub fn incumbent_trace(history: &[Trial]) -> Vec<f64> {
    let mut best = f64::INFINITY;
    history
        .iter()
        .map(|t| {
            if let (TrialStatus::Ok, Some(v)) = (t.status, t.value) {
                best = best.min(v);
            }
            best
        })
        .collect()
}
