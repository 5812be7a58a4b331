//! Empirical moments of the channel generator.

use ncma::channel::{apply, realize, ChannelConfig, ChannelRealization, FadingModel};
use ncma::constellation::design_eep;
use ncma::txchain::{diff_encode, SymbolFrame};
use ncma::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn cfg(model: FadingModel<f64>, antennas: usize, gains: Vec<f64>, snr_db: f64) -> ChannelConfig<f64> {
    ChannelConfig::new(antennas, model, gains, snr_db, 11)
}

#[test]
fn rayleigh_mean_power_matches_gain() {
    let c = cfg(FadingModel::Rayleigh, 256, vec![2.0], f64::INFINITY);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut acc = 0.0;
    let draws = 10_000;
    for _ in 0..draws {
        let ch = realize(&c, 2, &mut rng).unwrap();
        acc += (0..256).map(|r| ch.gain(0, r, 0).norm_sqr()).sum::<f64>();
    }
    let mean = acc / (draws * 256) as f64;
    assert!((1.9..=2.1).contains(&mean), "mean |h|^2 = {mean}");
}

#[test]
fn rician_zero_kappa_is_rayleigh() {
    let a = cfg(FadingModel::Rayleigh, 64, vec![1.0, 0.5], 10.0);
    let b = cfg(FadingModel::Rician { kappa: 0.0 }, 64, vec![1.0, 0.5], 10.0);
    let ra = realize(&a, 5, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let rb = realize(&b, 5, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    assert_eq!(ra, rb);
}

#[test]
fn rician_los_fraction() {
    for kappa in [1.0, 10.0] {
        let c = cfg(FadingModel::Rician { kappa }, 256, vec![1.5], f64::INFINITY);
        let mut rng = ChaCha8Rng::seed_from_u64(kappa as u64);
        let draws = 2000;
        let mut los = 0.0;
        let mut total = 0.0;
        for _ in 0..draws {
            let ch = realize(&c, 2, &mut rng).unwrap();
            let mean: Complex<f64> = (0..256).map(|r| ch.gain(0, r, 0)).sum::<Complex<f64>>() / 256.0;
            los += mean.norm_sqr();
            total += (0..256).map(|r| ch.gain(0, r, 0).norm_sqr()).sum::<f64>() / 256.0;
        }
        // the antenna mean keeps 1/R of the scatter power
        let scatter_leak = 1.0 / (kappa + 1.0) / 256.0;
        let fraction = los / total - scatter_leak;
        let expect = kappa / (kappa + 1.0);
        assert!(
            (fraction - expect).abs() < 0.02,
            "kappa {kappa}: {fraction} vs {expect}"
        );
        assert!((total / draws as f64 - 1.5).abs() < 0.05);
    }
}

#[test]
fn gauss_markov_lag_one_correlation() {
    for rho in [0.5, 0.9, 0.99] {
        let c = cfg(FadingModel::GaussMarkov { rho }, 64, vec![1.0], f64::INFINITY);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut cross = Complex::new(0.0, 0.0);
        let mut power = 0.0;
        for _ in 0..50 {
            let ch = realize(&c, 200, &mut rng).unwrap();
            assert!(ch.is_time_varying());
            for t in 1..200 {
                for r in 0..64 {
                    cross += ch.gain(t - 1, r, 0).conj() * ch.gain(t, r, 0);
                    power += ch.gain(t, r, 0).norm_sqr();
                }
            }
        }
        let est = cross.re / power;
        assert!((est - rho).abs() < 0.02, "rho {rho}: {est}");
        assert!(cross.im.abs() / power < 0.02);
    }
}

#[test]
fn gauss_markov_rho_one_is_static() {
    let c = cfg(FadingModel::GaussMarkov { rho: 1.0 }, 8, vec![1.0], 10.0);
    let ch = realize(&c, 10, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    for t in 1..10 {
        for r in 0..8 {
            assert_eq!(ch.gain(t, r, 0), ch.gain(0, r, 0));
        }
    }
}

fn received_power(snr_db: f64, gains: Vec<f64>, zero_channel: bool) -> (f64, f64) {
    let users = gains.len();
    let d = design_eep::<f64>(users, 4).unwrap();
    let len_t = 101;
    let c = cfg(FadingModel::Rayleigh, 128, gains, snr_db);
    let nv = c.noise_variance();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut acc = 0.0;
    let mut n = 0usize;
    for trial in 0..100 {
        let frames: Vec<_> = d
            .iter()
            .map(|ci| diff_encode(&SymbolFrame::new(ci, vec![trial % 4; len_t - 1]).unwrap(), ci))
            .collect();
        let ch = if zero_channel {
            ChannelRealization::constant(len_t, 128, users, Complex::new(0.0, 0.0), nv)
        } else {
            realize(&c, len_t, &mut rng).unwrap()
        };
        let y = apply(&ch, &frames, &mut rng).unwrap();
        acc += y.samples().iter().map(|s| s.norm_sqr()).sum::<f64>();
        n += y.samples().len();
    }
    (acc / n as f64, nv)
}

#[test]
fn noise_variance_calibration() {
    for snr in [0.0, 10.0, 20.0] {
        let (p, nv) = received_power(snr, vec![1.0, 1.0], true);
        assert!((nv - 2.0 / 10f64.powf(snr / 10.0)).abs() < 1e-15);
        assert!((p / nv - 1.0).abs() < 0.02, "snr {snr}: {p} vs {nv}");
    }
}

#[test]
fn very_low_snr_power_budget() {
    let (p, nv) = received_power(-40.0, vec![1.0, 0.5], false);
    assert!((nv - 1.5e4).abs() < 1e-9);
    assert!((p / (nv + 1.5) - 1.0).abs() < 0.02);
}

#[test]
fn infinite_snr_is_noiseless() {
    let c = cfg(FadingModel::Rayleigh, 4, vec![1.0], f64::INFINITY);
    assert_eq!(c.noise_variance(), 0.0);
    let d = design_eep::<f64>(1, 4).unwrap();
    let f = diff_encode(&SymbolFrame::new(&d[0], vec![1, 2, 3]).unwrap(), &d[0]);
    let ch = realize(&c, 4, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let y = apply(&ch, std::slice::from_ref(&f), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    for t in 0..4 {
        for r in 0..4 {
            assert_eq!(y.get(t, r), ch.gain(t, r, 0) * f.samples[t]);
        }
    }
}

#[test]
fn identical_seed_identical_realization() {
    let c = cfg(FadingModel::GaussMarkov { rho: 0.9 }, 16, vec![1.0, 2.0], 5.0);
    let a = realize(&c, 20, &mut ChaCha8Rng::seed_from_u64(77)).unwrap();
    let b = realize(&c, 20, &mut ChaCha8Rng::seed_from_u64(77)).unwrap();
    assert_eq!(a, b);
}
