//! Dataset ingestion and synthesis.
//!
//! Rows come from the public motor-temperature CSV (or a generated stand-in)
//! and are grouped into measurement sessions ("profiles"). A small two-node
//! RC thermal network doubles as a ground-truth generator so the rest of the
//! pipeline can be tested against data with known structure.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Required CSV columns, in canonical order.
pub const REQUIRED_COLUMNS: [&str; 9] = [
    "ambient",
    "coolant",
    "u_d",
    "u_q",
    "motor_speed",
    "i_d",
    "i_q",
    "pm",
    "profile_id",
];

/// Optional columns kept for inspection but never fed to models.
pub const OPTIONAL_COLUMNS: [&str; 4] = ["torque", "stator_yoke", "stator_tooth", "stator_winding"];

/// One timestamped sensor row.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSample<F> {
    /// Ambient temperature (°C).
    pub ambient: F,
    /// Liquid coolant temperature (°C).
    pub coolant: F,
    /// d-axis voltage (V).
    pub u_d: F,
    /// q-axis voltage (V).
    pub u_q: F,
    /// d-axis current (A).
    pub i_d: F,
    /// q-axis current (A).
    pub i_q: F,
    /// Mechanical speed (1/min).
    pub motor_speed: F,
    /// Permanent-magnet temperature (°C) — the estimation target.
    pub pm: F,
    /// Measurement-session identifier.
    pub profile_id: String,
}

impl<F: Scalar> RawSample<F> {
    pub fn is_finite(&self) -> bool {
        [
            self.ambient,
            self.coolant,
            self.u_d,
            self.u_q,
            self.i_d,
            self.i_q,
            self.motor_speed,
            self.pm,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// Contiguous row range of one profile within [`Dataset::samples`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProfileSpan {
    pub id: String,
    pub start: usize,
    pub end: usize,
}

impl ProfileSpan {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

/// Ordered samples grouped by measurement session.
#[derive(Debug, Clone)]
pub struct Dataset<F> {
    samples: Vec<RawSample<F>>,
    profiles: Vec<ProfileSpan>,
    /// Samples per second of the recordings.
    pub sample_rate_hz: F,
    /// Tolerated columns preserved verbatim (same row order as `samples`).
    pub extras: Vec<(String, Vec<F>)>,
}

impl<F: Scalar> Dataset<F> {
    /// Builds a dataset from rows, regrouping them by `profile_id` while
    /// preserving first-appearance order of profiles and within-profile
    /// row order.
    pub fn from_samples(samples: Vec<RawSample<F>>, sample_rate_hz: F) -> Result<Self> {
        Self::from_samples_with_extras(samples, sample_rate_hz, Vec::new())
    }

    pub fn from_samples_with_extras(
        samples: Vec<RawSample<F>>,
        sample_rate_hz: F,
        extras: Vec<(String, Vec<F>)>,
    ) -> Result<Self> {
        if !sample_rate_hz.is_finite() || sample_rate_hz <= F::zero() {
            return Err(Error::invalid("sample_rate_hz must be positive"));
        }
        for (name, col) in &extras {
            if col.len() != samples.len() {
                return Err(Error::invalid(format!(
                    "extra column `{name}` has {} rows, expected {}",
                    col.len(),
                    samples.len()
                )));
            }
        }
        for (i, s) in samples.iter().enumerate() {
            if s.profile_id.is_empty() {
                return Err(Error::invalid(format!("row {i}: empty profile_id")));
            }
            if !s.is_finite() {
                return Err(Error::invalid(format!("row {i}: non-finite value")));
            }
        }

        // Stable regroup: permutation ordering rows by (profile first
        // appearance, original position).
        let mut first_seen: HashMap<&str, usize> = HashMap::new();
        let mut order: Vec<usize> = Vec::with_capacity(samples.len());
        for (i, s) in samples.iter().enumerate() {
            let next = first_seen.len();
            first_seen.entry(s.profile_id.as_str()).or_insert(next);
            order.push(i);
        }
        let needs_regroup = {
            let mut prev_group = None;
            let mut seen_groups: Vec<usize> = Vec::new();
            let mut interleaved = false;
            for s in &samples {
                let g = first_seen[s.profile_id.as_str()];
                if prev_group != Some(g) {
                    if seen_groups.contains(&g) {
                        interleaved = true;
                        break;
                    }
                    seen_groups.push(g);
                    prev_group = Some(g);
                }
            }
            interleaved
        };
        let (samples, extras) = if needs_regroup {
            order.sort_by_key(|&i| (first_seen[samples[i].profile_id.as_str()], i));
            let extras = extras
                .into_iter()
                .map(|(name, col)| {
                    let re: Vec<F> = order.iter().map(|&i| col[i]).collect();
                    (name, re)
                })
                .collect();
            let mut re_samples = Vec::with_capacity(samples.len());
            // Consume in permutation order without cloning row strings twice.
            let mut slots: Vec<Option<RawSample<F>>> = samples.into_iter().map(Some).collect();
            for &i in &order {
                re_samples.push(slots[i].take().expect("permutation visits each row once"));
            }
            (re_samples, extras)
        } else {
            (samples, extras)
        };

        let mut profiles: Vec<ProfileSpan> = Vec::new();
        for (i, s) in samples.iter().enumerate() {
            match profiles.last_mut() {
                Some(span) if span.id == s.profile_id => span.end = i + 1,
                _ => profiles.push(ProfileSpan {
                    id: s.profile_id.clone(),
                    start: i,
                    end: i + 1,
                }),
            }
        }
        Ok(Dataset {
            samples,
            profiles,
            sample_rate_hz,
            extras,
        })
    }

    pub fn samples(&self) -> &[RawSample<F>] {
        &self.samples
    }

    pub fn profiles(&self) -> &[ProfileSpan] {
        &self.profiles
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn profile_ids(&self) -> Vec<&str> {
        self.profiles.iter().map(|p| p.id.as_str()).collect()
    }

    pub fn profile_rows(&self, id: &str) -> Option<&[RawSample<F>]> {
        self.profiles
            .iter()
            .find(|p| p.id == id)
            .map(|p| &self.samples[p.start..p.end])
    }

    /// Total recording duration in hours.
    pub fn duration_hours(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz.to_f64_lossy() / 3600.0
    }

    /// Splits off the named profiles into a test set; everything else stays
    /// in the training set. Profiles never straddle the split.
    pub fn split_profiles(&self, test_profile_ids: &[String]) -> Result<(Self, Self)> {
        let present: Vec<&str> = self.profile_ids();
        for id in test_profile_ids {
            if !present.contains(&id.as_str()) {
                return Err(Error::invalid(format!("unknown profile id `{id}`")));
            }
        }
        let in_test = |id: &str| test_profile_ids.iter().any(|t| t == id);
        let mut train_rows = Vec::new();
        let mut test_rows = Vec::new();
        let mut train_extras: Vec<(String, Vec<F>)> = self
            .extras
            .iter()
            .map(|(n, _)| (n.clone(), Vec::new()))
            .collect();
        let mut test_extras = train_extras.clone();
        for span in &self.profiles {
            let rows = self.samples[span.start..span.end].iter().cloned();
            if in_test(&span.id) {
                test_rows.extend(rows);
                for (k, (_, col)) in self.extras.iter().enumerate() {
                    test_extras[k].1.extend_from_slice(&col[span.start..span.end]);
                }
            } else {
                train_rows.extend(rows);
                for (k, (_, col)) in self.extras.iter().enumerate() {
                    train_extras[k].1.extend_from_slice(&col[span.start..span.end]);
                }
            }
        }
        Ok((
            Dataset::from_samples_with_extras(train_rows, self.sample_rate_hz, train_extras)?,
            Dataset::from_samples_with_extras(test_rows, self.sample_rate_hz, test_extras)?,
        ))
    }

    /// Keeps only the named profiles, in dataset order.
    pub fn select_profiles(&self, ids: &[String]) -> Result<Self> {
        let (_, selected) = self.split_profiles(ids)?;
        Ok(selected)
    }
}

/// Reads the motor-temperature CSV schema. Sampling rate is assumed 2 Hz
/// unless the caller overrides it afterwards.
pub fn load_dataset<F: Scalar>(path: impl AsRef<Path>) -> Result<Dataset<F>> {
    let mut reader = csv::Reader::from_path(path.as_ref())?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let idx: Vec<usize> = REQUIRED_COLUMNS
        .iter()
        .map(|c| col(c))
        .collect::<Result<_>>()?;
    let extra_cols: Vec<(String, usize)> = OPTIONAL_COLUMNS
        .iter()
        .filter_map(|c| headers.iter().position(|h| h == *c).map(|i| (c.to_string(), i)))
        .collect();

    let parse = |record: &csv::StringRecord, row: usize, pos: usize, name: &str| -> Result<F> {
        let raw = record.get(pos).unwrap_or("");
        raw.trim().parse::<f64>().ok().and_then(F::from_f64).ok_or(Error::Parse {
            row,
            column: name.to_string(),
            message: format!("expected a number, got `{raw}`"),
        })
    };

    let mut samples = Vec::new();
    let mut extras: Vec<(String, Vec<F>)> = extra_cols
        .iter()
        .map(|(n, _)| (n.clone(), Vec::new()))
        .collect();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let sample = RawSample {
            ambient: parse(&record, row, idx[0], "ambient")?,
            coolant: parse(&record, row, idx[1], "coolant")?,
            u_d: parse(&record, row, idx[2], "u_d")?,
            u_q: parse(&record, row, idx[3], "u_q")?,
            motor_speed: parse(&record, row, idx[4], "motor_speed")?,
            i_d: parse(&record, row, idx[5], "i_d")?,
            i_q: parse(&record, row, idx[6], "i_q")?,
            pm: parse(&record, row, idx[7], "pm")?,
            profile_id: record.get(idx[8]).unwrap_or("").trim().to_string(),
        };
        if sample.profile_id.is_empty() {
            return Err(Error::Parse {
                row,
                column: "profile_id".into(),
                message: "empty profile id".into(),
            });
        }
        for (k, (name, col_idx)) in extra_cols.iter().enumerate() {
            extras[k].1.push(parse(&record, row, *col_idx, name)?);
        }
        samples.push(sample);
    }
    Dataset::from_samples_with_extras(samples, F::c(2.0), extras)
}

/// Writes a dataset back out in the same schema; numeric formatting uses the
/// shortest representation that round-trips.
pub fn save_dataset<F: Scalar>(dataset: &Dataset<F>, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path.as_ref())?;
    let mut w = std::io::BufWriter::new(file);
    let mut header: Vec<&str> = REQUIRED_COLUMNS.to_vec();
    for (name, _) in &dataset.extras {
        header.push(name);
    }
    writeln!(w, "{}", header.join(","))?;
    for (i, s) in dataset.samples.iter().enumerate() {
        write!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            s.ambient, s.coolant, s.u_d, s.u_q, s.motor_speed, s.i_d, s.i_q, s.pm, s.profile_id
        )?;
        for (_, col) in &dataset.extras {
            write!(w, ",{}", col[i])?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Loss model of the synthetic network: heat injected into each node as a
/// linear map of i_s² (copper) and |n_mech| (iron/friction) plus a constant
/// offset, which is mostly useful for step-response experiments.
#[derive(Debug, Clone)]
pub struct LossCoeffs<F> {
    /// W per A² into the magnet node.
    pub magnet_per_i2: F,
    /// W per rpm into the magnet node.
    pub magnet_per_speed: F,
    /// W per A² into the stator node.
    pub stator_per_i2: F,
    /// W per rpm into the stator node.
    pub stator_per_speed: F,
    /// Constant heat into the magnet node (W).
    pub magnet_const: F,
    /// Constant heat into the stator node (W).
    pub stator_const: F,
}

/// Configuration of the two-node RC generator (magnet node, stator node).
///
/// Node heat capacities are derived from the configured time constants and
/// boundary conductances (C = τ·G), so with zero coupling each node is an
/// exact first-order lag with the configured τ.
#[derive(Debug, Clone)]
pub struct SyntheticConfig<F> {
    /// Time constants in seconds: `[magnet, stator]`.
    pub time_constants_s: [F; 2],
    /// Node-to-boundary conductances in W/K: magnet→ambient, stator→coolant.
    pub boundary_conductance: [F; 2],
    /// Magnet↔stator coupling conductance in W/K (0 decouples the nodes).
    pub coupling_conductance: F,
    pub losses: LossCoeffs<F>,
    /// Length of each generated profile in seconds.
    pub duration_s: F,
    pub sample_rate_hz: F,
    pub ambient_c: F,
    pub coolant_c: F,
    /// Number of independent profiles to generate.
    pub n_profiles: usize,
    /// Scales the randomized speed/current excitation; 0 means idle motor.
    pub excitation: F,
    /// Dwell-time range of each random excitation level (s). Shorter holds
    /// give richer operating-point coverage per profile.
    pub hold_range_s: [F; 2],
    /// Start each profile at the thermal steady state of its first operating
    /// point instead of at ambient (a motor already in operation).
    pub start_at_steady_state: bool,
}

impl<F: Scalar> Default for SyntheticConfig<F> {
    fn default() -> Self {
        SyntheticConfig {
            time_constants_s: [F::c(240.0), F::c(90.0)],
            boundary_conductance: [F::c(1.2), F::c(4.0)],
            coupling_conductance: F::c(0.8),
            losses: LossCoeffs {
                magnet_per_i2: F::c(2.5e-3),
                magnet_per_speed: F::c(4.0e-3),
                stator_per_i2: F::c(1.2e-2),
                stator_per_speed: F::c(2.0e-3),
                magnet_const: F::zero(),
                stator_const: F::zero(),
            },
            duration_s: F::c(3600.0),
            sample_rate_hz: F::c(2.0),
            ambient_c: F::c(25.0),
            coolant_c: F::c(30.0),
            n_profiles: 1,
            excitation: F::one(),
            hold_range_s: [F::c(20.0), F::c(240.0)],
            start_at_steady_state: false,
        }
    }
}

impl<F: Scalar> SyntheticConfig<F> {
    fn validate(&self) -> Result<()> {
        if !self.duration_s.is_finite() || self.duration_s <= F::zero() {
            return Err(Error::invalid("duration must be positive"));
        }
        if !self.sample_rate_hz.is_finite() || self.sample_rate_hz <= F::zero() {
            return Err(Error::invalid("sample_rate_hz must be positive"));
        }
        if self.time_constants_s.iter().any(|t| !t.is_finite() || *t <= F::zero()) {
            return Err(Error::invalid("time constants must be positive"));
        }
        if self.boundary_conductance.iter().any(|g| !g.is_finite() || *g <= F::zero()) {
            return Err(Error::invalid("boundary conductances must be positive"));
        }
        if self.coupling_conductance < F::zero() {
            return Err(Error::invalid("coupling conductance must be nonnegative"));
        }
        if self.n_profiles == 0 {
            return Err(Error::invalid("n_profiles must be at least 1"));
        }
        let [hold_lo, hold_hi] = self.hold_range_s;
        if !hold_lo.is_finite() || !hold_hi.is_finite() || hold_lo <= F::zero() || hold_hi < hold_lo
        {
            return Err(Error::invalid("hold_range_s must be positive and ordered"));
        }
        // Explicit Euler stability: h must stay well under the fastest
        // node's effective time constant.
        let h = F::one() / self.sample_rate_hz;
        for (i, tau) in self.time_constants_s.iter().enumerate() {
            let g_b = self.boundary_conductance[i];
            let c = *tau * g_b;
            let g_total = g_b + self.coupling_conductance;
            if h * g_total / c >= F::one() {
                return Err(Error::invalid(
                    "sample interval too coarse for the configured time constants",
                ));
            }
        }
        Ok(())
    }
}

/// Holds per-step energy bookkeeping of the generator so tests can check the
/// injected = stored + dissipated balance.
#[derive(Debug, Clone, Copy, Default)]
pub struct EnergyLedger {
    pub injected_j: f64,
    pub stored_j: f64,
    pub dissipated_j: f64,
}

/// Integrates the two-node RC network under randomized excitation.
/// Deterministic for a fixed seed; the target column `pm` is the exact
/// magnet-node temperature.
pub fn generate_synthetic<F: Scalar>(config: &SyntheticConfig<F>, seed: u64) -> Result<Dataset<F>> {
    let (ds, _) = generate_synthetic_with_ledger(config, seed)?;
    Ok(ds)
}

pub fn generate_synthetic_with_ledger<F: Scalar>(
    config: &SyntheticConfig<F>,
    seed: u64,
) -> Result<(Dataset<F>, EnergyLedger)> {
    config.validate()?;
    let h = F::one() / config.sample_rate_hz;
    let steps = (config.duration_s * config.sample_rate_hz)
        .to_f64_lossy()
        .round()
        .max(1.0) as usize;
    let [tau_m, tau_s] = config.time_constants_s;
    let [g_ma, g_sc] = config.boundary_conductance;
    let g_ms = config.coupling_conductance;
    let c_m = tau_m * g_ma;
    let c_s = tau_s * g_sc;

    let mut samples = Vec::with_capacity(steps * config.n_profiles);
    let mut ledger = EnergyLedger::default();

    for profile_idx in 0..config.n_profiles {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(profile_idx as u64);
        let profile_id = format!("synth-{seed}-{profile_idx}");

        let mut excite = Excitation::new(config.excitation, config.hold_range_s);
        let mut t_m = config.ambient_c;
        let mut t_s = config.ambient_c;
        if config.start_at_steady_state {
            excite.prime(&mut rng);
            let i_s2 = excite.i_d * excite.i_d + excite.i_q * excite.i_q;
            let p_m = config.losses.magnet_per_i2 * i_s2
                + config.losses.magnet_per_speed * excite.speed.abs()
                + config.losses.magnet_const;
            let p_s = config.losses.stator_per_i2 * i_s2
                + config.losses.stator_per_speed * excite.speed.abs()
                + config.losses.stator_const;
            let (sm, ss) = steady_state(
                p_m,
                p_s,
                g_ma,
                g_sc,
                g_ms,
                config.ambient_c,
                config.coolant_c,
            );
            t_m = sm;
            t_s = ss;
        }

        for _ in 0..steps {
            let sig = excite.step(&mut rng, h);
            let i_s2 = sig.i_d * sig.i_d + sig.i_q * sig.i_q;
            let p_m = config.losses.magnet_per_i2 * i_s2
                + config.losses.magnet_per_speed * sig.speed.abs()
                + config.losses.magnet_const;
            let p_s = config.losses.stator_per_i2 * i_s2
                + config.losses.stator_per_speed * sig.speed.abs()
                + config.losses.stator_const;

            samples.push(RawSample {
                ambient: config.ambient_c,
                coolant: config.coolant_c,
                u_d: sig.u_d,
                u_q: sig.u_q,
                i_d: sig.i_d,
                i_q: sig.i_q,
                motor_speed: sig.speed,
                pm: t_m,
                profile_id: profile_id.clone(),
            });

            // Explicit Euler update of both nodes.
            let q_ma = g_ma * (t_m - config.ambient_c);
            let q_sc = g_sc * (t_s - config.coolant_c);
            let q_ms = g_ms * (t_m - t_s);
            let dt_m = h / c_m * (p_m - q_ma - q_ms);
            let dt_s = h / c_s * (p_s - q_sc + q_ms);

            ledger.injected_j += (h * (p_m + p_s)).to_f64_lossy();
            ledger.stored_j += (c_m * dt_m + c_s * dt_s).to_f64_lossy();
            ledger.dissipated_j += (h * (q_ma + q_sc)).to_f64_lossy();

            t_m = t_m + dt_m;
            t_s = t_s + dt_s;
        }
    }

    let ds = Dataset::from_samples(samples, config.sample_rate_hz)?;
    Ok((ds, ledger))
}

/// Steady-state node temperatures of the two-node network under constant
/// losses: solves the 2x2 balance equations.
fn steady_state<F: Scalar>(p_m: F, p_s: F, g_ma: F, g_sc: F, g_ms: F, amb: F, cool: F) -> (F, F) {
    let a11 = g_ma + g_ms;
    let a12 = -g_ms;
    let a21 = -g_ms;
    let a22 = g_sc + g_ms;
    let b1 = p_m + g_ma * amb;
    let b2 = p_s + g_sc * cool;
    let det = a11 * a22 - a12 * a21;
    ((b1 * a22 - a12 * b2) / det, (a11 * b2 - b1 * a21) / det)
}

struct ExcitationSignals<F> {
    speed: F,
    i_d: F,
    i_q: F,
    u_d: F,
    u_q: F,
}

/// Randomized drive cycle: piecewise targets with first-order smoothing, and
/// voltages from a crude steady-state machine model so inputs correlate the
/// way real drive telemetry does.
struct Excitation<F> {
    scale: F,
    hold_range_s: [F; 2],
    speed: F,
    i_d: F,
    i_q: F,
    target_speed: F,
    target_i_d: F,
    target_i_q: F,
    hold_s: F,
}

impl<F: Scalar> Excitation<F> {
    /// Draws the first targets and jumps the signals straight onto them.
    fn prime(&mut self, rng: &mut ChaCha8Rng) {
        self.draw_targets(rng);
        self.speed = self.target_speed;
        self.i_d = self.target_i_d;
        self.i_q = self.target_i_q;
    }

    fn draw_targets(&mut self, rng: &mut ChaCha8Rng) {
        self.target_speed = F::c(rng.random_range(0.0..6000.0)) * self.scale;
        self.target_i_d = F::c(rng.random_range(-180.0..0.0)) * self.scale;
        self.target_i_q = F::c(rng.random_range(-220.0..220.0)) * self.scale;
        let lo = self.hold_range_s[0].to_f64_lossy();
        let hi = self.hold_range_s[1].to_f64_lossy();
        self.hold_s = F::c(if hi > lo { rng.random_range(lo..hi) } else { lo });
    }

    fn new(scale: F, hold_range_s: [F; 2]) -> Self {
        Excitation {
            scale,
            hold_range_s,
            speed: F::zero(),
            i_d: F::zero(),
            i_q: F::zero(),
            target_speed: F::zero(),
            target_i_d: F::zero(),
            target_i_q: F::zero(),
            hold_s: F::zero(),
        }
    }

    fn step(&mut self, rng: &mut ChaCha8Rng, h: F) -> ExcitationSignals<F> {
        if self.hold_s <= F::zero() {
            self.draw_targets(rng);
        }
        self.hold_s = self.hold_s - h;

        // First-order lag towards targets (10 s actuator constant).
        let blend = h / (h + F::c(10.0));
        self.speed = self.speed + blend * (self.target_speed - self.speed);
        self.i_d = self.i_d + blend * (self.target_i_d - self.i_d);
        self.i_q = self.i_q + blend * (self.target_i_q - self.i_q);

        // ω in rad/s; crude PMSM steady-state voltage equations.
        let omega = self.speed * F::c(2.0 * std::f64::consts::PI / 60.0);
        let (r, l_d, l_q, psi) = (F::c(0.02), F::c(2.0e-4), F::c(3.0e-4), F::c(0.08));
        let u_d = r * self.i_d - omega * l_q * self.i_q;
        let u_q = r * self.i_q + omega * (l_d * self.i_d + psi);

        ExcitationSignals {
            speed: self.speed,
            i_d: self.i_d,
            i_q: self.i_q,
            u_d,
            u_q,
        }
    }
}
