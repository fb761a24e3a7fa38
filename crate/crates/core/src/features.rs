//! Signal-to-regressor transformation.
//!
//! Raw drive telemetry is extended with derived electrical quantities and
//! low-pass filtered through exponentially weighted moving averages (EWMA)
//! and standard deviations (EWMS) at several spans. The filters run in a
//! constant-memory recursive form whose output is kept bias-corrected so it
//! equals the direct finite-window weighted sum at every step, which is what
//! makes batch features and streaming inference interchangeable.

use ndarray::{Array1, Array2};

use crate::data::{Dataset, ProfileSpan};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Base model inputs: the seven measured signals plus five derived ones.
pub const BASE_SIGNAL_NAMES: [&str; 12] = [
    "ambient",
    "coolant",
    "u_d",
    "u_q",
    "i_d",
    "i_q",
    "motor_speed",
    "u_s",
    "i_s",
    "s_el",
    "i_s_omega",
    "s_el_omega",
];

pub const N_BASE_SIGNALS: usize = BASE_SIGNAL_NAMES.len();

/// Smoothing factor for a span expressed in samples: α = 2/(s+1).
pub fn alpha_from_span<F: Scalar>(span: usize) -> F {
    F::c(2.0) / (F::from_usize(span).unwrap() + F::one())
}

/// Smoothing factor equivalent to a discretized RC low-pass with step `h`:
/// α = h/(RC+h).
pub fn alpha_from_rc<F: Scalar>(rc: F, h: F) -> Result<F> {
    if !h.is_finite() || h <= F::zero() {
        return Err(Error::invalid("step size h must be positive"));
    }
    if rc < F::zero() {
        return Err(Error::invalid("RC must be nonnegative"));
    }
    Ok(h / (rc + h))
}

/// Four filter spans in samples, strictly increasing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SpanSet(pub [usize; 4]);

impl SpanSet {
    pub fn new(spans: [usize; 4]) -> Result<Self> {
        if spans[0] < 1 {
            return Err(Error::invalid("spans must be at least 1"));
        }
        if !spans.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::invalid("spans must be strictly increasing"));
        }
        Ok(SpanSet(spans))
    }

    pub fn spans(&self) -> [usize; 4] {
        self.0
    }

    pub fn alphas<F: Scalar>(&self) -> [F; 4] {
        self.0.map(alpha_from_span)
    }

    /// Converts spans given in seconds to samples at the dataset rate.
    pub fn from_seconds<F: Scalar>(seconds: [F; 4], sample_rate_hz: F) -> Result<Self> {
        let mut spans = [0usize; 4];
        for (i, s) in seconds.iter().enumerate() {
            let v = (*s * sample_rate_hz).to_f64_lossy().round();
            if !v.is_finite() || v < 1.0 {
                return Err(Error::invalid("span shorter than one sample"));
            }
            spans[i] = v as usize;
        }
        SpanSet::new(spans)
    }
}

/// Recursive accumulator for one (signal, span) pair.
///
/// Tracks the weight-sum normalizer w = Σ(1-α)^i alongside the running mean
/// and a centered second moment, so the outputs reproduce the direct
/// finite-window form exactly instead of carrying initialization bias.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EwAccum<F> {
    mean: F,
    m2: F,
    w_sum: F,
}

impl<F: Scalar> Default for EwAccum<F> {
    fn default() -> Self {
        EwAccum {
            mean: F::zero(),
            m2: F::zero(),
            w_sum: F::zero(),
        }
    }
}

impl<F: Scalar> EwAccum<F> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Folds in one observation and returns the updated (EWMA, EWMS) pair.
    pub fn update(&mut self, x: F, alpha: F) -> (F, F) {
        let decay = F::one() - alpha;
        self.w_sum = decay * self.w_sum + F::one();
        let d1 = x - self.mean;
        self.mean = self.mean + d1 / self.w_sum;
        let d2 = x - self.mean;
        self.m2 = decay * self.m2 + d1 * d2;
        (self.mean, self.ewms())
    }

    pub fn ewma(&self) -> F {
        self.mean
    }

    /// Exponentially weighted standard deviation; variance is clamped at 0
    /// to absorb rounding.
    pub fn ewms(&self) -> F {
        if self.w_sum > F::zero() {
            (self.m2 / self.w_sum).max(F::zero()).sqrt()
        } else {
            F::zero()
        }
    }

    pub fn weight_sum(&self) -> F {
        self.w_sum
    }
}

fn check_alpha<F: Scalar>(alpha: F) -> Result<()> {
    if alpha > F::zero() && alpha <= F::one() {
        Ok(())
    } else {
        Err(Error::invalid("alpha must lie in (0, 1]"))
    }
}

/// Advances the accumulator and returns the exponentially weighted mean μ_t.
pub fn ewma_update<F: Scalar>(state: &mut EwAccum<F>, x: F, alpha: F) -> Result<F> {
    check_alpha(alpha)?;
    Ok(state.update(x, alpha).0)
}

/// Advances the accumulator and returns the exponentially weighted standard
/// deviation σ_t.
pub fn ewms_update<F: Scalar>(state: &mut EwAccum<F>, x: F, alpha: F) -> Result<F> {
    check_alpha(alpha)?;
    Ok(state.update(x, alpha).1)
}

/// The seven measured drive signals, the inference-time input unit (the
/// dataset schema minus the target).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasuredSignals<F> {
    pub ambient: F,
    pub coolant: F,
    pub u_d: F,
    pub u_q: F,
    pub i_d: F,
    pub i_q: F,
    pub motor_speed: F,
}

impl<F: Scalar> MeasuredSignals<F> {
    pub fn from_sample(sample: &crate::data::RawSample<F>) -> Self {
        MeasuredSignals {
            ambient: sample.ambient,
            coolant: sample.coolant,
            u_d: sample.u_d,
            u_q: sample.u_q,
            i_d: sample.i_d,
            i_q: sample.i_q,
            motor_speed: sample.motor_speed,
        }
    }
}

/// Computes the twelve base signals: the seven measured inputs followed by
/// u_s, i_s, S_el = 1.5·u_s·i_s and the speed interactions i_s·ω and
/// S_el·ω, with ω = 2π·n_mech/60.
pub fn derive_signals<F: Scalar>(m: &MeasuredSignals<F>) -> [F; N_BASE_SIGNALS] {
    let u_s = (m.u_d * m.u_d + m.u_q * m.u_q).sqrt();
    let i_s = (m.i_d * m.i_d + m.i_q * m.i_q).sqrt();
    let s_el = F::c(1.5) * u_s * i_s;
    let omega = m.motor_speed * F::c(2.0 * std::f64::consts::PI / 60.0);
    [
        m.ambient,
        m.coolant,
        m.u_d,
        m.u_q,
        m.i_d,
        m.i_q,
        m.motor_speed,
        u_s,
        i_s,
        s_el,
        i_s * omega,
        s_el * omega,
    ]
}

pub fn derive_inputs<F: Scalar>(sample: &crate::data::RawSample<F>) -> [F; N_BASE_SIGNALS] {
    derive_signals(&MeasuredSignals::from_sample(sample))
}

/// Constant-memory filter bank covering every (base signal, span) pair.
/// One instance serves one stream; reset it at profile boundaries.
#[derive(Debug, Clone)]
pub struct EwStreamState<F> {
    spans: SpanSet,
    alphas: [F; 4],
    accums: [[EwAccum<F>; 4]; N_BASE_SIGNALS],
}

impl<F: Scalar> EwStreamState<F> {
    pub fn new(spans: SpanSet) -> Self {
        EwStreamState {
            spans,
            alphas: spans.alphas(),
            accums: [[EwAccum::default(); 4]; N_BASE_SIGNALS],
        }
    }

    pub fn spans(&self) -> SpanSet {
        self.spans
    }

    /// Drops all filter state, e.g. at a session boundary.
    pub fn reset(&mut self) {
        self.accums = [[EwAccum::default(); 4]; N_BASE_SIGNALS];
    }

    /// Width of the produced feature rows.
    pub fn feature_count(&self) -> usize {
        N_BASE_SIGNALS * (1 + 2 * 4)
    }

    /// Folds one sample's base signals into the filters and writes the full
    /// feature row (base signals, then per span the EWMA/EWMS of each base
    /// signal) into `row`.
    pub fn update_into(&mut self, base: &[F; N_BASE_SIGNALS], row: &mut [F]) {
        assert_eq!(row.len(), self.feature_count(), "feature row width");
        row[..N_BASE_SIGNALS].copy_from_slice(base);
        let mut k = N_BASE_SIGNALS;
        for s in 0..4 {
            let alpha = self.alphas[s];
            for (b, &x) in base.iter().enumerate() {
                let (mean, std) = self.accums[b][s].update(x, alpha);
                row[k] = mean;
                row[k + 1] = std;
                k += 2;
            }
        }
    }

    pub fn update(&mut self, base: &[F; N_BASE_SIGNALS]) -> Vec<F> {
        let mut row = vec![F::zero(); self.feature_count()];
        self.update_into(base, &mut row);
        row
    }

    /// Fixed memory footprint in bytes; independent of how many samples have
    /// been folded in.
    pub fn state_bytes(&self) -> usize {
        std::mem::size_of::<Self>()
    }
}

/// Column names matching [`EwStreamState::update_into`]'s layout.
pub fn feature_names(spans: &SpanSet) -> Vec<String> {
    let mut names: Vec<String> = BASE_SIGNAL_NAMES.iter().map(|s| s.to_string()).collect();
    for span in spans.spans() {
        for base in BASE_SIGNAL_NAMES {
            names.push(format!("{base}_ewma_{span}"));
            names.push(format!("{base}_ewms_{span}"));
        }
    }
    names
}

/// Engineered regressors with the target column and session layout carried
/// along for group-aware splitting.
#[derive(Debug, Clone)]
pub struct FeatureMatrix<F> {
    pub x: Array2<F>,
    pub y: Array1<F>,
    pub names: Vec<String>,
    pub spans: SpanSet,
    pub profiles: Vec<ProfileSpan>,
}

impl<F: Scalar> FeatureMatrix<F> {
    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    /// Row indices covering the named profiles, in matrix order.
    pub fn rows_for(&self, ids: &[String]) -> Vec<usize> {
        let mut rows = Vec::new();
        for span in &self.profiles {
            if ids.contains(&span.id) {
                rows.extend(span.start..span.end);
            }
        }
        rows
    }

    /// Gathers a row subset into a dense (X, y) pair.
    pub fn gather(&self, rows: &[usize]) -> (Array2<F>, Array1<F>) {
        let mut x = Array2::zeros((rows.len(), self.n_features()));
        let mut y = Array1::zeros(rows.len());
        for (out, &r) in rows.iter().enumerate() {
            x.row_mut(out).assign(&self.x.row(r));
            y[out] = self.y[r];
        }
        (x, y)
    }

    /// Profile spans re-indexed for a gathered subset; `rows` must be the
    /// output of [`FeatureMatrix::rows_for`] (profile-contiguous).
    pub fn profiles_for(&self, ids: &[String]) -> Vec<ProfileSpan> {
        let mut out = Vec::new();
        let mut offset = 0usize;
        for span in &self.profiles {
            if ids.contains(&span.id) {
                out.push(ProfileSpan {
                    id: span.id.clone(),
                    start: offset,
                    end: offset + span.len(),
                });
                offset += span.len();
            }
        }
        out
    }

    /// Writes the matrix (plus target and profile id) as CSV.
    pub fn to_csv(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        use std::io::Write;
        let file = std::fs::File::create(path.as_ref())?;
        let mut w = std::io::BufWriter::new(file);
        writeln!(w, "{},pm,profile_id", self.names.join(","))?;
        for span in &self.profiles {
            for r in span.start..span.end {
                for c in 0..self.n_features() {
                    write!(w, "{},", self.x[(r, c)])?;
                }
                writeln!(w, "{},{}", self.y[r], span.id)?;
            }
        }
        Ok(())
    }
}

/// Builds the full regressor matrix for a dataset. Filter state resets at
/// every profile boundary, so one session's features never depend on
/// another's.
pub fn build_features<F: Scalar>(dataset: &Dataset<F>, spans: SpanSet) -> Result<FeatureMatrix<F>> {
    if dataset.is_empty() {
        return Err(Error::invalid("cannot build features from an empty dataset"));
    }
    let mut state = EwStreamState::new(spans);
    let p = state.feature_count();
    let n = dataset.len();
    let mut x = Array2::zeros((n, p));
    let mut y = Array1::zeros(n);
    let mut row_buf = vec![F::zero(); p];
    for span in dataset.profiles() {
        state.reset();
        for r in span.start..span.end {
            let sample = &dataset.samples()[r];
            let base = derive_inputs(sample);
            state.update_into(&base, &mut row_buf);
            for (c, v) in row_buf.iter().enumerate() {
                x[(r, c)] = *v;
            }
            y[r] = sample.pm;
        }
    }
    Ok(FeatureMatrix {
        x,
        y,
        names: feature_names(&spans),
        spans,
        profiles: dataset.profiles().to_vec(),
    })
}

/// Per-feature standardization parameters fitted on training rows only.
/// Zero-variance features are dropped and recorded by name.
#[derive(Debug, Clone)]
pub struct Scaler<F> {
    /// Means of the retained features (in original column order).
    pub means: Vec<F>,
    /// Standard deviations of the retained features (population convention).
    pub stds: Vec<F>,
    /// Indices of retained columns in the source matrix.
    pub kept: Vec<usize>,
    /// Names of dropped zero-variance features.
    pub dropped: Vec<String>,
    /// Number of rows the scaler was fitted on.
    pub n_fit_rows: usize,
}

impl<F: Scalar> Scaler<F> {
    /// Fits means and standard deviations column-wise.
    pub fn fit(x: &Array2<F>, names: &[String]) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(Error::invalid("cannot fit a scaler on zero rows"));
        }
        if names.len() != x.ncols() {
            return Err(Error::DimensionMismatch {
                expected: x.ncols(),
                got: names.len(),
            });
        }
        let n = F::from_usize(x.nrows()).unwrap();
        let mut means = Vec::new();
        let mut stds = Vec::new();
        let mut kept = Vec::new();
        let mut dropped = Vec::new();
        for (c, name) in names.iter().enumerate() {
            let col = x.column(c);
            let mean = col.iter().fold(F::zero(), |a, &v| a + v) / n;
            let var = col
                .iter()
                .fold(F::zero(), |a, &v| a + (v - mean) * (v - mean))
                / n;
            let std = var.max(F::zero()).sqrt();
            let tol = F::epsilon().sqrt() * (mean.abs() + F::one());
            if std <= tol {
                dropped.push(name.clone());
            } else {
                means.push(mean);
                stds.push(std);
                kept.push(c);
            }
        }
        Ok(Scaler {
            means,
            stds,
            kept,
            dropped,
            n_fit_rows: x.nrows(),
        })
    }

    /// Number of features after dropping zero-variance columns.
    pub fn n_output_features(&self) -> usize {
        self.kept.len()
    }

    /// Standardizes a matrix using the fitted train statistics.
    pub fn transform(&self, x: &Array2<F>) -> Array2<F> {
        let mut out = Array2::zeros((x.nrows(), self.kept.len()));
        for (oc, &c) in self.kept.iter().enumerate() {
            let mean = self.means[oc];
            let std = self.stds[oc];
            for r in 0..x.nrows() {
                out[(r, oc)] = (x[(r, c)] - mean) / std;
            }
        }
        out
    }

    /// Standardizes a single feature row in source-column order.
    pub fn transform_row(&self, row: &[F]) -> Vec<F> {
        self.kept
            .iter()
            .enumerate()
            .map(|(oc, &c)| (row[c] - self.means[oc]) / self.stds[oc])
            .collect()
    }

    /// Names of the retained features.
    pub fn output_names(&self, names: &[String]) -> Vec<String> {
        self.kept.iter().map(|&c| names[c].clone()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::RawSample;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Direct finite-window form: weights (1-α)^i over lags i = 0..=t.
    fn direct_ew(xs: &[f64], alpha: f64) -> (Vec<f64>, Vec<f64>) {
        let mut means = Vec::new();
        let mut stds = Vec::new();
        for t in 0..xs.len() {
            let mut w_sum = 0.0;
            let mut m = 0.0;
            for (lag, j) in (0..=t).rev().enumerate() {
                let w = (1.0 - alpha).powi(lag as i32);
                w_sum += w;
                m += w * xs[j];
            }
            let mean = m / w_sum;
            let mut v = 0.0;
            for (lag, j) in (0..=t).rev().enumerate() {
                let w = (1.0 - alpha).powi(lag as i32);
                v += w * (xs[j] - mean) * (xs[j] - mean);
            }
            means.push(mean);
            stds.push((v / w_sum).sqrt());
        }
        (means, stds)
    }

    #[test]
    fn constant_stream_is_identity_with_zero_spread() {
        let mut acc = EwAccum::new();
        let alpha = alpha_from_span::<f64>(20);
        for _ in 0..100 {
            let (m, s) = acc.update(3.25, alpha);
            assert_abs_diff_eq!(m, 3.25, epsilon = 1e-12);
            assert_abs_diff_eq!(s, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn span_one_passes_samples_through() {
        // s = 1 makes α = 1: the filter output is the raw sample.
        let alpha = alpha_from_span::<f64>(1);
        assert_abs_diff_eq!(alpha, 1.0, epsilon = 1e-15);
        let mut acc = EwAccum::new();
        for &x in &[0.0, 1.0, -7.5, 42.0] {
            let (m, s) = acc.update(x, alpha);
            assert_abs_diff_eq!(m, x, epsilon = 1e-15);
            assert_abs_diff_eq!(s, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn streaming_matches_direct_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let xs: Vec<f64> = (0..200).map(|_| rng.random_range(-5.0..5.0)).collect();
        let alpha = alpha_from_span::<f64>(20);
        let (means, stds) = direct_ew(&xs, alpha);
        let mut acc = EwAccum::new();
        for (t, &x) in xs.iter().enumerate() {
            let (m, s) = acc.update(x, alpha);
            assert_abs_diff_eq!(m, means[t], epsilon = 1e-10 * means[t].abs().max(1.0));
            assert_abs_diff_eq!(s, stds[t], epsilon = 1e-8 * stds[t].abs().max(1.0));
        }
    }

    #[test]
    fn two_point_stream_with_alpha_one_has_zero_spread() {
        let mut acc = EwAccum::new();
        for &x in &[0.0, 1.0] {
            let (_, s) = acc.update(x, 1.0);
            assert_abs_diff_eq!(s, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn rejects_alpha_out_of_range() {
        let mut acc = EwAccum::new();
        assert!(ewma_update(&mut acc, 1.0, 0.0).is_err());
        assert!(ewma_update(&mut acc, 1.0, 1.5).is_err());
        assert!(ewms_update(&mut acc, 1.0, -0.1).is_err());
        assert!(ewma_update(&mut acc, 1.0, 0.5).is_ok());
    }

    #[test]
    fn recent_span_carries_about_86_percent_of_weight() {
        for &s in &[10usize, 100, 1000] {
            let alpha = alpha_from_span::<f64>(s);
            // Σ_{i<s} (1-α)^i / Σ_{i<∞} (1-α)^i = 1 - (1-α)^s.
            let mass = 1.0 - (1.0 - alpha).powi(s as i32);
            assert!(
                (0.855..=0.875).contains(&mass),
                "span {s}: weight mass {mass}"
            );
        }
    }

    #[test]
    fn ewma_stays_within_stream_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let alpha = alpha_from_span::<f64>(15);
        let mut acc = EwAccum::new();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for _ in 0..500 {
            let x = rng.random_range(-3.0..7.0);
            lo = lo.min(x);
            hi = hi.max(x);
            let (m, _) = acc.update(x, alpha);
            assert!(m >= lo - 1e-12 && m <= hi + 1e-12);
        }
    }

    #[test]
    fn alpha_from_rc_endpoints_and_monotonicity() {
        assert_abs_diff_eq!(alpha_from_rc(0.0, 0.5).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(alpha_from_rc(0.5, 0.5).unwrap(), 0.5, epsilon = 1e-15);
        assert!(alpha_from_rc(1.0, 0.0).is_err());
        let mut prev = 1.0;
        for rc in [0.1, 1.0, 10.0, 100.0, 1e4] {
            let a = alpha_from_rc(rc, 0.5).unwrap();
            assert!(a < prev);
            prev = a;
        }
    }

    #[test]
    fn rc_filter_and_ewma_share_step_response() {
        // y_t = RC/(RC+h)·y_{t-1} + h/(RC+h)·x_t against the EWMA recursion
        // seeded with y_0 = x_0.
        let (rc, h) = (60.0, 0.5);
        let alpha = alpha_from_rc(rc, h).unwrap();
        let mut y = 1.0; // step input x = 1 from t = 0, y_0 = x_0
        let mut ew = 1.0;
        for _ in 1..2000 {
            y = rc / (rc + h) * y + h / (rc + h) * 1.0;
            ew = (1.0 - alpha) * ew + alpha * 1.0;
            assert_abs_diff_eq!(y, ew, epsilon = 1e-12);
        }
    }

    #[test]
    fn derive_inputs_matches_formulas() {
        let s = RawSample::<f64> {
            ambient: 20.0,
            coolant: 21.0,
            u_d: 3.0,
            u_q: 4.0,
            i_d: 0.0,
            i_q: 0.0,
            motor_speed: 600.0,
            pm: 55.0,
            profile_id: "p".into(),
        };
        let base = derive_inputs(&s);
        assert_abs_diff_eq!(base[7], 5.0, epsilon = 1e-12); // u_s of a 3-4-5 triangle
        assert_abs_diff_eq!(base[8], 0.0, epsilon = 1e-12); // i_s
        assert_abs_diff_eq!(base[9], 0.0, epsilon = 1e-12); // s_el
        assert_abs_diff_eq!(base[10], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(base[11], 0.0, epsilon = 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let s = RawSample::<f64> {
                ambient: rng.random_range(-10.0..40.0),
                coolant: rng.random_range(-10.0..90.0),
                u_d: rng.random_range(-130.0..130.0),
                u_q: rng.random_range(-130.0..130.0),
                i_d: rng.random_range(-250.0..0.0),
                i_q: rng.random_range(-250.0..250.0),
                motor_speed: rng.random_range(0.0..6000.0),
                pm: 0.0,
                profile_id: "p".into(),
            };
            let base = derive_inputs(&s);
            let u_s = s.u_d.hypot(s.u_q);
            let i_s = s.i_d.hypot(s.i_q);
            let s_el = 1.5 * u_s * i_s;
            let omega = 2.0 * std::f64::consts::PI * s.motor_speed / 60.0;
            assert_abs_diff_eq!(base[7], u_s, epsilon = 1e-9);
            assert_abs_diff_eq!(base[8], i_s, epsilon = 1e-9);
            assert_abs_diff_eq!(base[9], s_el, epsilon = 1e-9 * s_el.abs().max(1.0));
            assert_abs_diff_eq!(base[10], i_s * omega, epsilon = 1e-9 * (i_s * omega).abs().max(1.0));
            assert_abs_diff_eq!(base[11], s_el * omega, epsilon = 1e-9 * (s_el * omega).abs().max(1.0));
        }
    }

    fn tiny_dataset(profiles: &[(&str, usize)]) -> Dataset<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut rows = Vec::new();
        for (id, n) in profiles {
            for _ in 0..*n {
                rows.push(RawSample {
                    ambient: rng.random_range(15.0..30.0),
                    coolant: rng.random_range(15.0..80.0),
                    u_d: rng.random_range(-100.0..100.0),
                    u_q: rng.random_range(-100.0..100.0),
                    i_d: rng.random_range(-200.0..0.0),
                    i_q: rng.random_range(-200.0..200.0),
                    motor_speed: rng.random_range(0.0..5000.0),
                    pm: rng.random_range(20.0..110.0),
                    profile_id: id.to_string(),
                });
            }
        }
        Dataset::from_samples(rows, 2.0).unwrap()
    }

    #[test]
    fn feature_count_is_108_for_four_spans() {
        let ds = tiny_dataset(&[("a", 10)]);
        let fm = build_features(&ds, SpanSet::new([2, 5, 9, 20]).unwrap()).unwrap();
        assert_eq!(fm.n_features(), 108);
        assert_eq!(fm.names.len(), 108);
        assert_eq!(fm.n_rows(), 10);
    }

    #[test]
    fn single_sample_profile_has_raw_ewma_and_zero_ewms() {
        let ds = tiny_dataset(&[("a", 1)]);
        let fm = build_features(&ds, SpanSet::new([2, 5, 9, 20]).unwrap()).unwrap();
        for b in 0..N_BASE_SIGNALS {
            let raw = fm.x[(0, b)];
            for s in 0..4 {
                let ewma = fm.x[(0, N_BASE_SIGNALS + 2 * (s * N_BASE_SIGNALS + b))];
                let ewms = fm.x[(0, N_BASE_SIGNALS + 2 * (s * N_BASE_SIGNALS + b) + 1)];
                assert_abs_diff_eq!(ewma, raw, epsilon = 1e-12);
                assert_abs_diff_eq!(ewms, 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn profile_boundary_resets_filter_state() {
        let ds_ab = tiny_dataset(&[("a", 30), ("b", 25)]);
        let spans = SpanSet::new([2, 5, 9, 20]).unwrap();
        let fm_ab = build_features(&ds_ab, spans).unwrap();
        // Build profile b alone and compare its feature rows.
        let ds_b = ds_ab.select_profiles(&["b".to_string()]).unwrap();
        let fm_b = build_features(&ds_b, spans).unwrap();
        for r in 0..25 {
            for c in 0..fm_b.n_features() {
                assert_abs_diff_eq!(fm_ab.x[(30 + r, c)], fm_b.x[(r, c)], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn scaler_standardizes_and_drops_constant_columns() {
        let ds = tiny_dataset(&[("a", 200)]);
        let mut fm = build_features(&ds, SpanSet::new([2, 5, 9, 20]).unwrap()).unwrap();
        // Force one constant column.
        for r in 0..fm.n_rows() {
            fm.x[(r, 3)] = 7.0;
        }
        let scaler = Scaler::fit(&fm.x, &fm.names).unwrap();
        assert_eq!(scaler.dropped, vec![fm.names[3].clone()]);
        assert_eq!(scaler.n_output_features(), fm.n_features() - 1);
        let z = scaler.transform(&fm.x);
        let n = z.nrows() as f64;
        for c in 0..z.ncols() {
            let mean: f64 = z.column(c).iter().sum::<f64>() / n;
            let var: f64 = z.column(c).iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            assert_abs_diff_eq!(mean, 0.0, epsilon = 1e-9);
            assert_abs_diff_eq!(var, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn transform_row_agrees_with_matrix_transform() {
        let ds = tiny_dataset(&[("a", 50)]);
        let fm = build_features(&ds, SpanSet::new([2, 5, 9, 20]).unwrap()).unwrap();
        let scaler = Scaler::fit(&fm.x, &fm.names).unwrap();
        let z = scaler.transform(&fm.x);
        let row: Vec<f64> = fm.x.row(17).to_vec();
        let z_row = scaler.transform_row(&row);
        for c in 0..z.ncols() {
            assert_abs_diff_eq!(z_row[c], z[(17, c)], epsilon = 1e-12);
        }
    }

    #[test]
    fn feature_matrix_exports_named_csv() {
        let ds = tiny_dataset(&[("a", 5), ("b", 3)]);
        let fm = build_features(&ds, SpanSet::new([2, 5, 9, 20]).unwrap()).unwrap();
        let dir = std::env::temp_dir().join("rotortemp-feature-csv");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("features.csv");
        fm.to_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let header = text.lines().next().unwrap();
        assert!(header.starts_with("ambient,coolant,"));
        assert!(header.ends_with(",pm,profile_id"));
        assert_eq!(header.split(',').count(), 108 + 2);
        assert_eq!(text.lines().count(), 1 + 8);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn span_set_validation() {
        assert!(SpanSet::new([1, 2, 3, 4]).is_ok());
        assert!(SpanSet::new([0, 2, 3, 4]).is_err());
        assert!(SpanSet::new([2, 2, 3, 4]).is_err());
        assert!(SpanSet::new([5, 4, 8, 9]).is_err());
    }
}
