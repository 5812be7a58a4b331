//! Massive-MIMO uplink channel: per-antenna, per-user complex gains plus
//! receiver noise.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::txchain::DiffFrame;
use crate::{Complex, Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum FadingModel<T> {
    /// Independent `CN(0, alpha_k)` gains, constant over a frame.
    Rayleigh,
    /// Fixed per-user line-of-sight term plus Rayleigh scatter; `kappa` is
    /// the LOS-to-scatter power ratio.
    Rician { kappa: T },
    /// First-order Gauss-Markov evolution `h[t] = rho h[t-1] + sqrt(1-rho^2) w[t]`.
    GaussMarkov { rho: T },
}

impl<T: Scalar> FadingModel<T> {
    /// `E[conj(h[t-1]) h[t]] / alpha` for this model.
    pub fn lag_one_correlation(&self) -> T {
        match *self {
            FadingModel::GaussMarkov { rho } => rho,
            _ => T::one(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig<T> {
    pub antennas: usize,
    pub model: FadingModel<T>,
    /// Average power `E|h|^2` of each user's gain; its length is the user count.
    pub gains: Vec<T>,
    /// Total average signal power over noise power, per antenna. `inf` means
    /// a noiseless channel.
    pub snr_db: T,
    pub seed: u64,
}

impl<T: Scalar> ChannelConfig<T> {
    pub fn new(antennas: usize, model: FadingModel<T>, gains: Vec<T>, snr_db: T, seed: u64) -> Self {
        ChannelConfig {
            antennas,
            model,
            gains,
            snr_db,
            seed,
        }
    }

    pub fn users(&self) -> usize {
        self.gains.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.antennas == 0 {
            return Err(Error::invalid("antenna count must be at least 1"));
        }
        if self.gains.is_empty() {
            return Err(Error::invalid("at least one user gain is required"));
        }
        if self.gains.iter().any(|&a| !(a > T::zero()) || !a.is_finite()) {
            return Err(Error::invalid("user gains must be positive and finite"));
        }
        if self.snr_db.is_nan() || self.snr_db == T::neg_infinity() {
            return Err(Error::invalid("snr_db must be a number"));
        }
        match self.model {
            FadingModel::Rician { kappa } if !(kappa >= T::zero()) || !kappa.is_finite() => {
                Err(Error::invalid(format!("kappa {kappa} must be >= 0")))
            }
            FadingModel::GaussMarkov { rho } if !(rho >= T::zero() && rho <= T::one()) => {
                Err(Error::invalid(format!("rho {rho} outside [0, 1]")))
            }
            _ => Ok(()),
        }
    }

    /// `sigma^2` such that `sum_k alpha_k / sigma^2 = 10^(snr_db/10)`.
    pub fn noise_variance(&self) -> T {
        if self.snr_db == T::infinity() {
            return T::zero();
        }
        let signal: T = self.gains.iter().copied().sum();
        signal / T::lit(10.0).powf(self.snr_db / T::lit(10.0))
    }
}

/// Draws a circularly-symmetric complex Gaussian with unit total variance.
pub fn complex_normal<T: Scalar, R: Rng + ?Sized>(rng: &mut R) -> Complex<T> {
    let scale = T::FRAC_1_SQRT_2();
    Complex::new(T::standard_normal(rng) * scale, T::standard_normal(rng) * scale)
}

/// Channel gains `H[t][r][k]` for one frame.
///
/// Static models keep a single time slice that applies to every sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization<T> {
    gains: Vec<Complex<T>>,
    time_varying: bool,
    len_t: usize,
    antennas: usize,
    users: usize,
    noise_variance: T,
}

impl<T: Scalar> ChannelRealization<T> {
    /// Full `[time][antenna][user]` gain array.
    pub fn from_parts(
        len_t: usize,
        antennas: usize,
        users: usize,
        gains: Vec<Complex<T>>,
        noise_variance: T,
    ) -> Result<Self> {
        if gains.len() != len_t * antennas * users {
            return Err(Error::DimensionMismatch(format!(
                "{} gains for {len_t}x{antennas}x{users}",
                gains.len()
            )));
        }
        Ok(ChannelRealization {
            gains,
            time_varying: true,
            len_t,
            antennas,
            users,
            noise_variance,
        })
    }

    /// Every gain equal to `value`.
    pub fn constant(len_t: usize, antennas: usize, users: usize, value: Complex<T>, noise_variance: T) -> Self {
        ChannelRealization {
            gains: vec![value; antennas * users],
            time_varying: false,
            len_t,
            antennas,
            users,
            noise_variance,
        }
    }

    pub fn len_t(&self) -> usize {
        self.len_t
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn noise_variance(&self) -> T {
        self.noise_variance
    }

    pub fn is_time_varying(&self) -> bool {
        self.time_varying
    }

    #[inline]
    fn slice(&self, t: usize) -> &[Complex<T>] {
        let n = self.antennas * self.users;
        if self.time_varying {
            &self.gains[t * n..(t + 1) * n]
        } else {
            &self.gains
        }
    }

    #[inline]
    pub fn gain(&self, t: usize, antenna: usize, user: usize) -> Complex<T> {
        self.slice(t)[antenna * self.users + user]
    }
}

/// Draws one frame of channel gains, `len_t` samples long.
pub fn realize<T: Scalar, R: Rng + ?Sized>(
    cfg: &ChannelConfig<T>,
    len_t: usize,
    rng: &mut R,
) -> Result<ChannelRealization<T>> {
    cfg.validate()?;
    if len_t < 2 {
        return Err(Error::invalid("a frame needs the reference plus at least one symbol"));
    }
    let users = cfg.users();
    let antennas = cfg.antennas;
    let noise_variance = cfg.noise_variance();

    let (gains, time_varying) = match cfg.model {
        FadingModel::Rayleigh => (static_gains(cfg, T::zero(), rng), false),
        FadingModel::Rician { kappa } => (static_gains(cfg, kappa, rng), false),
        FadingModel::GaussMarkov { rho } => {
            let innovation = (T::one() - rho * rho).max(T::zero()).sqrt();
            let scale: Vec<T> = cfg.gains.iter().map(|a| a.sqrt()).collect();
            let n = antennas * users;
            let mut h = Vec::with_capacity(len_t * n);
            for i in 0..n {
                h.push(complex_normal::<T, R>(rng) * scale[i % users]);
            }
            for t in 1..len_t {
                for i in 0..n {
                    let prev = h[(t - 1) * n + i];
                    let w = complex_normal::<T, R>(rng) * scale[i % users];
                    h.push(prev * rho + w * innovation);
                }
            }
            (h, true)
        }
    };

    Ok(ChannelRealization {
        gains,
        time_varying,
        len_t,
        antennas,
        users,
        noise_variance,
    })
}

/// Rician gains with a per-user LOS phase shared by all antennas; `kappa = 0`
/// is Rayleigh with the same random draws.
fn static_gains<T: Scalar, R: Rng + ?Sized>(cfg: &ChannelConfig<T>, kappa: T, rng: &mut R) -> Vec<Complex<T>> {
    let k1 = kappa + T::one();
    let los: Vec<Complex<T>> = cfg
        .gains
        .iter()
        .map(|&a| {
            let phi = T::unit_uniform(rng) * T::TAU();
            Complex::from_polar((a * kappa / k1).sqrt(), phi)
        })
        .collect();
    let scatter: Vec<T> = cfg.gains.iter().map(|&a| (a / k1).sqrt()).collect();
    let mut h = Vec::with_capacity(cfg.antennas * cfg.users());
    for _ in 0..cfg.antennas {
        for (l, &s) in los.iter().zip(&scatter) {
            h.push(*l + complex_normal::<T, R>(rng) * s);
        }
    }
    h
}

/// Received samples `Y[t][r]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedMatrix<T> {
    data: Vec<Complex<T>>,
    len_t: usize,
    antennas: usize,
}

impl<T: Scalar> ReceivedMatrix<T> {
    pub fn from_rows(rows: Vec<Vec<Complex<T>>>) -> Result<Self> {
        let len_t = rows.len();
        let antennas = rows.first().map_or(0, |r| r.len());
        if antennas == 0 || rows.iter().any(|r| r.len() != antennas) {
            return Err(Error::DimensionMismatch("ragged or empty received rows".into()));
        }
        Ok(ReceivedMatrix {
            data: rows.into_iter().flatten().collect(),
            len_t,
            antennas,
        })
    }

    pub fn zeros(len_t: usize, antennas: usize) -> Self {
        ReceivedMatrix {
            data: vec![Complex::new(T::zero(), T::zero()); len_t * antennas],
            len_t,
            antennas,
        }
    }

    pub fn len_t(&self) -> usize {
        self.len_t
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn row(&self, t: usize) -> &[Complex<T>] {
        &self.data[t * self.antennas..(t + 1) * self.antennas]
    }

    pub fn get(&self, t: usize, antenna: usize) -> Complex<T> {
        self.data[t * self.antennas + antenna]
    }

    pub fn samples(&self) -> &[Complex<T>] {
        &self.data
    }
}

/// `Y[t][r] = sum_k H[t][r][k] s_k[t] + n[t][r]`.
pub fn apply<T: Scalar, R: Rng + ?Sized>(
    ch: &ChannelRealization<T>,
    frames: &[DiffFrame<T>],
    rng: &mut R,
) -> Result<ReceivedMatrix<T>> {
    if frames.len() != ch.users {
        return Err(Error::DimensionMismatch(format!(
            "{} frames for {} users",
            frames.len(),
            ch.users
        )));
    }
    if let Some(f) = frames.iter().find(|f| f.samples.len() != ch.len_t) {
        return Err(Error::DimensionMismatch(format!(
            "frame of {} samples on a {}-sample channel",
            f.samples.len(),
            ch.len_t
        )));
    }
    let noise_scale = ch.noise_variance.sqrt();
    let noisy = ch.noise_variance > T::zero();
    let mut data = Vec::with_capacity(ch.len_t * ch.antennas);
    let mut tx = vec![Complex::new(T::zero(), T::zero()); ch.users];
    for t in 0..ch.len_t {
        for (s, f) in tx.iter_mut().zip(frames) {
            *s = f.samples[t];
        }
        let slice = ch.slice(t);
        for h in slice.chunks_exact(ch.users) {
            let mut y = h
                .iter()
                .zip(&tx)
                .fold(Complex::new(T::zero(), T::zero()), |acc, (h, s)| acc + h * s);
            if noisy {
                y = y + complex_normal::<T, R>(rng) * noise_scale;
            }
            data.push(y);
        }
    }
    Ok(ReceivedMatrix {
        data,
        len_t: ch.len_t,
        antennas: ch.antennas,
    })
}
