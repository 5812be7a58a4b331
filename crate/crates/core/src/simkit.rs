//! Seeded Monte-Carlo evaluation of the full chain: per-user SER/BER with
//! Wilson intervals, sweeps over one operating-point axis, and the antenna
//! concentration measurement.
//!
//! Trial `i` of sweep point `p` always draws from the ChaCha stream
//! `(seed, p, i)`, and trials are scheduled in fixed-size batches, so counts
//! do not depend on how many worker threads execute them.

use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{apply, realize, ChannelConfig, FadingModel};
use crate::constellation::{design_eep, Criterion, DesignReport, JointConstellation};
use crate::receiver::{correlate, decide_bits, demap, DetectionStat};
use crate::txchain::{diff_encode, map_bits};
use crate::{Error, Result, Scalar};

/// Two-sided 95% standard normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// RNG for trial `trial` of sweep point `point`.
pub fn stream_rng(seed: u64, point: u32, trial: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((point as u64) << 32) | trial as u64);
    rng
}

#[derive(Debug, Clone)]
pub struct SimPoint<T> {
    pub design: DesignReport<T>,
    pub channel: ChannelConfig<T>,
    /// Data symbols per frame (the reference symbol is extra).
    pub frame_len: usize,
    pub frames_per_trial: usize,
    pub max_trials: usize,
    /// Stop once every user has at least this many symbol errors.
    pub min_errors: u64,
    /// Trials run between two checks of the stopping rule.
    pub batch_trials: usize,
}

impl<T: Scalar> SimPoint<T> {
    pub fn new(design: DesignReport<T>, channel: ChannelConfig<T>) -> Self {
        SimPoint {
            design,
            channel,
            frame_len: 100,
            frames_per_trial: 1,
            max_trials: 1000,
            min_errors: 100,
            batch_trials: 16,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        if self.channel.users() != self.design.users() {
            return Err(Error::DimensionMismatch(format!(
                "{} channel gains for a {}-user design",
                self.channel.users(),
                self.design.users()
            )));
        }
        if self.frame_len == 0 || self.frames_per_trial == 0 || self.batch_trials == 0 {
            return Err(Error::invalid(
                "frame_len, frames_per_trial and batch_trials must be >= 1",
            ));
        }
        if self.max_trials == 0 || self.min_errors == 0 {
            return Err(Error::invalid("max_trials and min_errors must be >= 1"));
        }
        if self.max_trials > u32::MAX as usize {
            return Err(Error::invalid("max_trials exceeds the stream index range"));
        }
        Ok(())
    }

    /// Joint constellation the receiver decides against: the design
    /// superposed with the users' expected lag-one channel correlations.
    pub fn reference_joint(&self) -> Result<JointConstellation<T>> {
        if !self.design.unique {
            return Err(Error::NonInjectiveDesign);
        }
        let rho = self.channel.model.lag_one_correlation();
        if !(rho > T::zero()) {
            return Err(Error::NonInjectiveDesign);
        }
        let gains: Vec<T> = self.channel.gains.iter().map(|&a| a * rho).collect();
        let joint = JointConstellation::build(&self.design.constellations, &gains)?;
        let tol = T::default_tol() * gains.iter().copied().fold(T::zero(), T::max);
        joint.validate_unique(tol).map_err(|_| Error::NonInjectiveDesign)?;
        Ok(joint)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Tally {
    symbols: u64,
    symbol_errors: u64,
    bits: u64,
    bit_errors: u64,
}

impl std::ops::AddAssign for Tally {
    fn add_assign(&mut self, o: Tally) {
        self.symbols += o.symbols;
        self.symbol_errors += o.symbol_errors;
        self.bits += o.bits;
        self.bit_errors += o.bit_errors;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserStats {
    pub user_id: usize,
    pub ser: f64,
    pub ber: f64,
    /// Wilson 95% interval on the SER.
    pub ser_ci: (f64, f64),
    pub ci95_halfwidth: f64,
    pub symbols: u64,
    pub errors: u64,
    pub bits: u64,
    pub bit_errors: u64,
}

impl UserStats {
    /// Whether two SER intervals share at least one point.
    pub fn overlaps(&self, other: &UserStats) -> bool {
        self.ser_ci.0 <= other.ser_ci.1 && other.ser_ci.0 <= self.ser_ci.1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub users: Vec<UserStats>,
    pub trials: usize,
    pub wall_time: f64,
}

impl SimResult {
    pub fn worst_ser(&self) -> f64 {
        self.users.iter().map(|u| u.ser).fold(0.0, f64::max)
    }

    /// Everything except the wall-clock time.
    pub fn same_counts(&self, other: &SimResult) -> bool {
        self.users == other.users && self.trials == other.trials
    }
}

/// Wilson score interval at 95% for `errors` out of `n`.
pub fn wilson_interval(errors: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = errors as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let lo = if errors == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if errors as f64 == n {
        1.0
    } else {
        (center + half).min(1.0)
    };
    (lo, hi)
}

fn stats(user_id: usize, t: Tally) -> UserStats {
    let ci = wilson_interval(t.symbol_errors, t.symbols);
    UserStats {
        user_id,
        ser: t.symbol_errors as f64 / t.symbols as f64,
        ber: t.bit_errors as f64 / t.bits as f64,
        ser_ci: ci,
        ci95_halfwidth: (ci.1 - ci.0) / 2.0,
        symbols: t.symbols,
        errors: t.symbol_errors,
        bits: t.bits,
        bit_errors: t.bit_errors,
    }
}

fn random_bits<R: Rng>(n: usize, rng: &mut R) -> Vec<u8> {
    (0..n).map(|_| rng.random_range(0..2u8)).collect()
}

/// One frame through the whole chain. Returns the statistic, the true
/// per-user indices and the transmitted bits.
struct FrameOutcome<T> {
    stat: DetectionStat<T>,
    sent_indices: Vec<Vec<usize>>,
    sent_bits: Vec<Vec<u8>>,
}

fn run_frame<T: Scalar>(p: &SimPoint<T>, rng: &mut ChaCha8Rng) -> Result<FrameOutcome<T>> {
    let mut sent_indices = Vec::with_capacity(p.design.users());
    let mut sent_bits = Vec::with_capacity(p.design.users());
    let mut frames = Vec::with_capacity(p.design.users());
    for c in &p.design.constellations {
        let bits = random_bits(p.frame_len * c.bits_per_symbol() as usize, rng);
        let symbols = map_bits(&bits, c)?;
        frames.push(diff_encode(&symbols, c));
        sent_indices.push(symbols.indices);
        sent_bits.push(bits);
    }
    let ch = realize(&p.channel, p.frame_len + 1, rng)?;
    let y = apply(&ch, &frames, rng)?;
    let stat = correlate(&y, p.channel.antennas)?;
    Ok(FrameOutcome {
        stat,
        sent_indices,
        sent_bits,
    })
}

fn run_trial<T: Scalar>(p: &SimPoint<T>, joint: &JointConstellation<T>, point: u32, trial: u32) -> Result<Vec<Tally>> {
    let mut rng = stream_rng(p.channel.seed, point, trial);
    let mut tallies = vec![Tally::default(); p.design.users()];
    for _ in 0..p.frames_per_trial {
        let out = run_frame(p, &mut rng)?;
        let detected = demap(&out.stat, joint);
        let bits = decide_bits(&detected, &p.design.constellations)?;
        for (k, t) in tallies.iter_mut().enumerate() {
            t.symbols += out.sent_indices[k].len() as u64;
            t.symbol_errors += out.sent_indices[k]
                .iter()
                .zip(&detected.per_user_indices[k])
                .filter(|(a, b)| a != b)
                .count() as u64;
            t.bits += out.sent_bits[k].len() as u64;
            t.bit_errors += out.sent_bits[k].iter().zip(&bits[k]).filter(|(a, b)| a != b).count() as u64;
        }
    }
    Ok(tallies)
}

/// Runs one operating point as sweep point 0.
pub fn run_point<T: Scalar>(p: &SimPoint<T>) -> Result<SimResult> {
    run_point_indexed(p, 0)
}

/// Runs trials in batches until every user has `min_errors` symbol errors or
/// `max_trials` trials are done.
pub fn run_point_indexed<T: Scalar>(p: &SimPoint<T>, point: u32) -> Result<SimResult> {
    p.validate()?;
    let joint = p.reference_joint()?;
    let start = Instant::now();
    let mut totals = vec![Tally::default(); p.design.users()];
    let mut done = 0usize;
    while done < p.max_trials {
        let end = (done + p.batch_trials).min(p.max_trials);
        let batch = (done..end)
            .into_par_iter()
            .map(|trial| run_trial(p, &joint, point, trial as u32))
            .collect::<Result<Vec<_>>>()?;
        for trial in batch {
            for (total, t) in totals.iter_mut().zip(trial) {
                *total += t;
            }
        }
        done = end;
        if totals.iter().all(|t| t.symbol_errors >= p.min_errors) {
            break;
        }
    }
    Ok(SimResult {
        users: totals.into_iter().enumerate().map(|(k, t)| stats(k, t)).collect(),
        trials: done,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    SnrDb,
    Antennas,
    Rho,
    Kappa,
    Users,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::SnrDb => "snr_db",
            SweepAxis::Antennas => "antennas",
            SweepAxis::Rho => "rho",
            SweepAxis::Kappa => "kappa",
            SweepAxis::Users => "users",
        }
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "snr" | "snr_db" => Ok(SweepAxis::SnrDb),
            "r" | "R" | "antennas" => Ok(SweepAxis::Antennas),
            "rho" => Ok(SweepAxis::Rho),
            "kappa" => Ok(SweepAxis::Kappa),
            "k" | "K" | "users" => Ok(SweepAxis::Users),
            other => Err(Error::invalid(format!("unknown sweep axis `{other}`"))),
        }
    }
}

fn as_count(value: f64, what: &str) -> Result<usize> {
    if value >= 1.0 && value.fract() == 0.0 && value <= u32::MAX as f64 {
        Ok(value as usize)
    } else {
        Err(Error::invalid(format!(
            "{what} must be a positive integer, got {value}"
        )))
    }
}

/// The operating point `base` moved to `value` along `axis`.
pub fn with_axis<T: Scalar>(base: &SimPoint<T>, axis: SweepAxis, value: f64) -> Result<SimPoint<T>> {
    let mut p = base.clone();
    match axis {
        SweepAxis::SnrDb => p.channel.snr_db = T::lit(value),
        SweepAxis::Antennas => p.channel.antennas = as_count(value, "antenna count")?,
        SweepAxis::Rho => p.channel.model = FadingModel::GaussMarkov { rho: T::lit(value) },
        SweepAxis::Kappa => p.channel.model = FadingModel::Rician { kappa: T::lit(value) },
        SweepAxis::Users => {
            if base.design.criterion != Criterion::Eep {
                return Err(Error::invalid(
                    "the user-count axis regenerates an EEP design; base must be EEP",
                ));
            }
            let users = as_count(value, "user count")?;
            let order = base.design.constellations[0].order();
            let constellations = design_eep(users, order)?;
            p.channel.gains = vec![base.channel.gains[0]; users];
            p.design = DesignReport::new(constellations, &vec![T::one(); users], Criterion::Eep)?;
        }
    }
    Ok(p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub result: SimResult,
}

/// One [`run_point_indexed`] per value, with the value's position as the
/// stream point index.
pub fn sweep<T: Scalar>(base: &SimPoint<T>, axis: SweepAxis, values: &[f64]) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::invalid("sweep needs at least one value"));
    }
    if values.iter().any(|v| v.is_nan()) || values.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("sweep values must be sorted ascending"));
    }
    values
        .iter()
        .enumerate()
        .map(|(i, &value)| {
            let p = with_axis(base, axis, value)?;
            Ok(SweepRow {
                value,
                result: run_point_indexed(&p, i as u32)?,
            })
        })
        .collect()
}

/// Writes `# comment`, then the `axis_value,user_id,ser,ber,ci95,symbols,errors`
/// table in row order.
pub fn write_results_csv<W: Write>(mut out: W, comment: &str, rows: &[SweepRow]) -> Result<()> {
    for line in comment.lines() {
        writeln!(out, "# {line}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["axis_value", "user_id", "ser", "ber", "ci95", "symbols", "errors"])?;
    for row in rows {
        for u in &row.result.users {
            w.write_record([
                row.value.to_string(),
                u.user_id.to_string(),
                u.ser.to_string(),
                u.ber.to_string(),
                u.ci95_halfwidth.to_string(),
                u.symbols.to_string(),
                u.errors.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Detection statistic over `frames` frames of the operating point.
pub fn cloud<T: Scalar>(p: &SimPoint<T>, frames: usize) -> Result<DetectionStat<T>> {
    p.validate()?;
    let mut z = Vec::with_capacity(frames * p.frame_len);
    for f in 0..frames {
        let mut rng = stream_rng(p.channel.seed, 0, f as u32);
        z.extend(run_frame(p, &mut rng)?.stat.z);
    }
    Ok(DetectionStat {
        z,
        antennas_used: p.channel.antennas,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcentrationRow {
    pub antennas: usize,
    /// Mean `|z[t] - E[z[t] | x[t]]|^2`.
    pub variance: f64,
}

impl ConcentrationRow {
    pub fn scaled(&self) -> f64 {
        self.variance * self.antennas as f64
    }
}

/// Spread of the detection statistic around its conditional mean for each
/// antenna count, `trials` frames per count.
pub fn concentration<T: Scalar>(
    base: &SimPoint<T>,
    antennas: &[usize],
    trials: usize,
) -> Result<Vec<ConcentrationRow>> {
    antennas
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let mut p = base.clone();
            p.channel.antennas = r;
            p.validate()?;
            let joint = p.reference_joint()?;
            let sums = (0..trials)
                .into_par_iter()
                .map(|trial| {
                    let mut rng = stream_rng(p.channel.seed, i as u32, trial as u32);
                    let out = run_frame(&p, &mut rng)?;
                    let mut tuple = vec![0usize; p.design.users()];
                    let mut acc = 0.0;
                    for (t, z) in out.stat.z.iter().enumerate() {
                        for (k, slot) in tuple.iter_mut().enumerate() {
                            *slot = out.sent_indices[k][t];
                        }
                        let mean = joint.point(joint.index_of(&tuple).expect("valid tuple"));
                        acc += (*z - mean).norm_sqr().as_f64();
                    }
                    Ok(acc)
                })
                .collect::<Result<Vec<f64>>>()?;
            let n = (trials * p.frame_len) as f64;
            Ok(ConcentrationRow {
                antennas: r,
                variance: sums.iter().sum::<f64>() / n,
            })
        })
        .collect()
}
