//! Non-coherent detection by antenna-averaged differential correlation.
//!
//! For a static channel `conj(Y[t-1][r]) Y[t][r]` averages over the antennas
//! to `sum_k (1/R) sum_r |h_rk|^2 x_k[t]` plus cross-user and noise terms that
//! shrink as `1/sqrt(R)`. The statistic therefore settles on a point of the
//! joint constellation built with the users' average channel powers, and the
//! users are separated by picking the nearest joint point.

use std::io::Write;

use crate::channel::ReceivedMatrix;
use crate::constellation::{IndividualConstellation, JointConstellation};
use crate::txchain::unmap_bits;
use crate::{Complex, Error, Result, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionStat<T> {
    /// One value per data symbol.
    pub z: Vec<Complex<T>>,
    pub antennas_used: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetectionResult {
    /// `per_user_indices[k][t]`.
    pub per_user_indices: Vec<Vec<usize>>,
    pub joint_indices: Vec<usize>,
}

/// `z[t] = (1/R) sum_{r < R} conj(Y[t-1][r]) Y[t][r]` over the first `antennas`
/// receive antennas.
pub fn correlate<T: Scalar>(y: &ReceivedMatrix<T>, antennas: usize) -> Result<DetectionStat<T>> {
    if y.len_t() < 2 {
        return Err(Error::invalid("correlation needs at least two time samples"));
    }
    if antennas == 0 || antennas > y.antennas() {
        return Err(Error::invalid(format!(
            "cannot use {antennas} of {} antennas",
            y.antennas()
        )));
    }
    let norm = T::one() / T::lit(antennas as f64);
    let z = (1..y.len_t())
        .map(|t| {
            let prev = &y.row(t - 1)[..antennas];
            let cur = &y.row(t)[..antennas];
            prev.iter()
                .zip(cur)
                .fold(Complex::new(T::zero(), T::zero()), |acc, (p, c)| acc + p.conj() * c)
                * norm
        })
        .collect();
    Ok(DetectionStat {
        z,
        antennas_used: antennas,
    })
}

/// Nearest-joint-point decision on every `z[t]`; ties go to the lower point index.
pub fn demap<T: Scalar>(stat: &DetectionStat<T>, joint: &JointConstellation<T>) -> DetectionResult {
    let joint_indices: Vec<usize> = stat.z.iter().map(|&z| joint.nearest(z)).collect();
    let mut per_user_indices = vec![Vec::with_capacity(joint_indices.len()); joint.users()];
    for &p in &joint_indices {
        for (k, &m) in joint.tuple(p).iter().enumerate() {
            per_user_indices[k].push(m);
        }
    }
    DetectionResult {
        per_user_indices,
        joint_indices,
    }
}

/// Per-user bit streams through each user's inverse bit map.
pub fn decide_bits<T: Scalar>(
    result: &DetectionResult,
    constellations: &[IndividualConstellation<T>],
) -> Result<Vec<Vec<u8>>> {
    if constellations.len() != result.per_user_indices.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} constellations for {} detected users",
            constellations.len(),
            result.per_user_indices.len()
        )));
    }
    Ok(result
        .per_user_indices
        .iter()
        .zip(constellations)
        .map(|(idx, c)| unmap_bits(idx, c))
        .collect())
}

/// Writes the statistic as `t,re,im` rows with `t` starting at 1.
pub fn write_cloud_csv<T: Scalar, W: Write>(stat: &DetectionStat<T>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "re", "im"])?;
    for (t, z) in stat.z.iter().enumerate() {
        w.write_record([(t + 1).to_string(), z.re.to_string(), z.im.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{apply, ChannelRealization};
    use crate::constellation::{design_eep, design_uep};
    use crate::txchain::{diff_encode, SymbolFrame};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn static_single_user_recovers_phase_and_gain() {
        let c = design_eep::<f64>(1, 8).unwrap().remove(0);
        let f = SymbolFrame::new(&c, vec![3, 5, 0, 7]).unwrap();
        let s = diff_encode(&f, &c);
        let h: Vec<Complex<f64>> = (0..4)
            .map(|r| Complex::from_polar(0.5 + r as f64 * 0.25, r as f64))
            .collect();
        let c_mean = h.iter().map(|g| g.norm_sqr()).sum::<f64>() / 4.0;
        let rows = s.samples.iter().map(|&x| h.iter().map(|g| g * x).collect()).collect();
        let y = ReceivedMatrix::from_rows(rows).unwrap();
        let z = correlate(&y, 4).unwrap();
        for (zt, &m) in z.z.iter().zip(&f.indices) {
            assert!((zt.norm() - c_mean).abs() < 1e-12);
            assert!(crate::constellation::circular_distance(zt.arg(), c.phase(m)) < 1e-12);
        }
    }

    #[test]
    fn zero_input_gives_zero() {
        let z = correlate(&ReceivedMatrix::<f64>::zeros(5, 3), 3).unwrap();
        assert_eq!(z.z.len(), 4);
        assert!(z.z.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn correlate_preconditions() {
        assert!(correlate(&ReceivedMatrix::<f64>::zeros(1, 3), 3).is_err());
        assert!(correlate(&ReceivedMatrix::<f64>::zeros(4, 3), 4).is_err());
        assert!(correlate(&ReceivedMatrix::<f64>::zeros(4, 3), 0).is_err());
    }

    #[test]
    fn exact_point_and_tie_break() {
        let d = design_eep::<f64>(2, 4).unwrap();
        let j = JointConstellation::build(&d, &[1.0, 1.0]).unwrap();
        let stat = DetectionStat {
            z: (0..j.len()).map(|p| j.point(p)).collect(),
            antennas_used: 1,
        };
        let r = demap(&stat, &j);
        assert_eq!(r.joint_indices, (0..16).collect::<Vec<_>>());

        let bpsk = design_eep::<f64>(1, 2).unwrap();
        let jb = JointConstellation::build(&bpsk, &[1.0]).unwrap();
        let mid = DetectionStat {
            z: vec![(jb.point(0) + jb.point(1)) / 2.0],
            antennas_used: 1,
        };
        assert_eq!(demap(&mid, &jb).joint_indices, vec![0]);
    }

    #[test]
    fn perturbation_inside_half_distance() {
        let d = design_uep(2, 4, &[1.0, 0.5], &[0.0, std::f64::consts::FRAC_PI_8]).unwrap();
        let j = JointConstellation::build(&d, &[1.0, 0.8]).unwrap();
        let radius = 0.49 * j.min_distance();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for p in 0..j.len() {
            let z: Vec<Complex<f64>> = (0..1000)
                .map(|_| j.point(p) + Complex::from_polar(radius, rng.random::<f64>() * std::f64::consts::TAU))
                .collect();
            let r = demap(&DetectionStat { z, antennas_used: 1 }, &j);
            assert!(r.joint_indices.iter().all(|&q| q == p));
            assert!(r.per_user_indices[0].iter().all(|&m| m == j.tuple(p)[0]));
            assert!(r.per_user_indices[1].iter().all(|&m| m == j.tuple(p)[1]));
        }
    }

    #[test]
    fn gray_inverse_bits() {
        let c = design_eep::<f64>(1, 4).unwrap();
        let r = DetectionResult {
            per_user_indices: vec![vec![0, 1, 2, 3]],
            joint_indices: vec![0, 1, 2, 3],
        };
        assert_eq!(decide_bits(&r, &c).unwrap(), vec![vec![0, 0, 0, 1, 1, 1, 1, 0]]);

        let b = design_eep::<f64>(1, 2).unwrap();
        let r = DetectionResult {
            per_user_indices: vec![vec![1]],
            joint_indices: vec![1],
        };
        assert_eq!(decide_bits(&r, &b).unwrap(), vec![vec![1]]);
        assert!(decide_bits(&r, &c.iter().chain(&b).cloned().collect::<Vec<_>>()).is_err());
    }

    #[test]
    fn scaling_leaves_decisions_unchanged() {
        let d = design_eep::<f64>(2, 4).unwrap();
        let j = JointConstellation::build(&d, &[1.0, 1.0]).unwrap();
        let js = JointConstellation::build(&d, &[3.5, 3.5]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let z: Vec<Complex<f64>> = (0..500)
            .map(|_| Complex::new(rng.random_range(-2.5..2.5), rng.random_range(-2.5..2.5)))
            .collect();
        let scaled: Vec<Complex<f64>> = z.iter().map(|v| v * 3.5).collect();
        let a = demap(&DetectionStat { z, antennas_used: 1 }, &j);
        let b = demap(
            &DetectionStat {
                z: scaled,
                antennas_used: 1,
            },
            &js,
        );
        assert_eq!(a, b);
    }

    #[test]
    fn unit_channel_two_users_noiseless() {
        let d = design_eep::<f64>(2, 4).unwrap();
        let j = JointConstellation::build(&d, &[1.0, 1.0]).unwrap();
        let frames: Vec<SymbolFrame> = vec![
            SymbolFrame::new(&d[0], vec![0, 1, 2, 3, 3]).unwrap(),
            SymbolFrame::new(&d[1], vec![3, 3, 1, 0, 2]).unwrap(),
        ];
        let tx: Vec<_> = frames.iter().zip(&d).map(|(f, c)| diff_encode(f, c)).collect();
        // orthogonal per-antenna gains so the cross terms cancel exactly
        let mut h = Vec::new();
        for _t in 0..6 {
            h.extend([
                Complex::new(1.0, 0.0),
                Complex::new(1.0, 0.0),
                Complex::new(1.0, 0.0),
                Complex::new(-1.0, 0.0),
            ]);
        }
        let ch = ChannelRealization::from_parts(6, 2, 2, h, 0.0).unwrap();
        let y = apply(&ch, &tx, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let r = demap(&correlate(&y, 2).unwrap(), &j);
        assert_eq!(r.per_user_indices[0], frames[0].indices);
        assert_eq!(r.per_user_indices[1], frames[1].indices);
    }

    #[test]
    fn cloud_csv() {
        let stat = DetectionStat {
            z: vec![Complex::new(1.0, -0.5)],
            antennas_used: 1,
        };
        let mut buf = Vec::new();
        write_cloud_csv(&stat, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,re,im\n1,1,-0.5\n");
    }
}
