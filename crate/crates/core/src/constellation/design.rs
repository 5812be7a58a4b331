use super::{log2_exact, IndividualConstellation, JointConstellation};
use crate::{Error, Result, Scalar};

fn check_order(order: usize) -> Result<()> {
    log2_exact(order)
        .map(|_| ())
        .ok_or_else(|| Error::invalid(format!("order {order} must be a power of two >= 2")))
}

/// Equal-protection design: user `k` is standard `M`-PSK rotated by
/// `k * (2pi/M) / K`.
///
/// Fails with [`Error::Collision`] when the resulting joint constellation
/// (unit gains) is not injective, e.g. for `K = 3, M = 4`.
pub fn design_eep<T: Scalar>(users: usize, order: usize) -> Result<Vec<IndividualConstellation<T>>> {
    if users == 0 {
        return Err(Error::invalid("user count must be at least 1"));
    }
    check_order(order)?;
    let spacing = T::TAU() / T::lit(order as f64);
    let step = spacing / T::lit(users as f64);
    let constellations = (0..users)
        .map(|k| {
            let base = T::lit(k as f64) * step;
            let phases = (0..order).map(|m| base + T::lit(m as f64) * spacing).collect();
            IndividualConstellation::new(k, phases)
        })
        .collect::<Result<Vec<_>>>()?;

    let joint = JointConstellation::build(&constellations, &vec![T::one(); users])?;
    joint.validate_unique(T::default_tol())?;
    Ok(constellations)
}

/// Unequal-protection design: user `k` gets phases
/// `offsets[k] + m * gammas[k] * 2pi/M`.
///
/// A smaller `gamma` packs the user's symbols closer together and so protects
/// it less. Injectivity of the joint constellation is not checked here.
pub fn design_uep<T: Scalar>(
    users: usize,
    order: usize,
    gammas: &[T],
    offsets: &[T],
) -> Result<Vec<IndividualConstellation<T>>> {
    if users == 0 {
        return Err(Error::invalid("user count must be at least 1"));
    }
    check_order(order)?;
    if gammas.len() != users || offsets.len() != users {
        return Err(Error::DimensionMismatch(format!(
            "{users} users but {} gammas and {} offsets",
            gammas.len(),
            offsets.len()
        )));
    }
    if let Some(g) = gammas.iter().find(|&&g| !(g > T::zero() && g <= T::one())) {
        return Err(Error::invalid(format!("gamma {g} outside (0, 1]")));
    }
    let spacing = T::TAU() / T::lit(order as f64);
    gammas
        .iter()
        .zip(offsets)
        .enumerate()
        .map(|(k, (&gamma, &offset))| {
            let phases = (0..order)
                .map(|m| offset + T::lit(m as f64) * gamma * spacing)
                .collect();
            IndividualConstellation::new(k, phases)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OffsetSearch<T> {
    pub offsets: Vec<T>,
    pub min_distance: T,
}

/// Distances closer than this are treated as equal so that the tie-break
/// stays lexicographic despite rounding.
const TIE_TOL: f64 = 1e-12;

/// Largest grid accepted by [`optimize_offsets`].
const MAX_CANDIDATES: usize = 1 << 22;

/// Exhaustive grid search over the offsets of users `1..K` in `[0, 2pi/M)`
/// (user 0 pinned at 0) maximizing the joint minimum distance with unit gains.
///
/// Ties resolve to the lexicographically smallest offset vector.
pub fn optimize_offsets<T: Scalar>(users: usize, order: usize, gammas: &[T], step: T) -> Result<OffsetSearch<T>> {
    if users == 0 {
        return Err(Error::invalid("user count must be at least 1"));
    }
    check_order(order)?;
    if gammas.len() != users {
        return Err(Error::DimensionMismatch(format!(
            "{users} users but {} gammas",
            gammas.len()
        )));
    }
    if !(step > T::zero()) {
        return Err(Error::invalid("grid step must be positive"));
    }
    let span = T::TAU() / T::lit(order as f64);
    let ratio = (span / step).as_f64();
    let per_axis = ratio.round();
    if (ratio - per_axis).abs() > 1e-9 || per_axis < 1.0 {
        return Err(Error::invalid("grid step must divide 2pi/M evenly"));
    }
    let per_axis = per_axis as usize;
    let free = users - 1;
    let total = (0..free).try_fold(1usize, |acc, _| acc.checked_mul(per_axis));
    match total {
        Some(n) if n <= MAX_CANDIDATES => {}
        _ => return Err(Error::invalid("offset grid too large for exhaustive search")),
    }

    let ones = vec![T::one(); users];
    let tol = T::default_tol();
    let tie = T::lit(TIE_TOL);
    let mut grid = vec![0usize; free];
    let mut best: Option<OffsetSearch<T>> = None;
    loop {
        let offsets: Vec<T> = std::iter::once(T::zero())
            .chain(grid.iter().map(|&i| T::lit(i as f64) * step))
            .collect();
        let design = design_uep(users, order, gammas, &offsets)?;
        let joint = JointConstellation::build(&design, &ones)?;
        if joint.validate_unique(tol).is_ok() {
            let d = joint.min_distance();
            if best.as_ref().is_none_or(|b| d > b.min_distance + tie) {
                best = Some(OffsetSearch {
                    offsets,
                    min_distance: d,
                });
            }
        }

        // lexicographic odometer, last axis fastest
        let mut k = free;
        loop {
            if k == 0 {
                return best.ok_or(Error::NoInjectiveDesign);
            }
            k -= 1;
            grid[k] += 1;
            if grid[k] < per_axis {
                break;
            }
            grid[k] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_8, PI, SQRT_2};

    fn deg(c: &IndividualConstellation<f64>) -> Vec<f64> {
        c.phases().iter().map(|p| p.to_degrees()).collect()
    }

    #[test]
    fn eep_two_users_qpsk() {
        let d = design_eep::<f64>(2, 4).unwrap();
        let expect = [[0.0, 90.0, 180.0, 270.0], [45.0, 135.0, 225.0, 315.0]];
        for (c, e) in d.iter().zip(expect) {
            for (a, b) in deg(c).iter().zip(e) {
                assert_abs_diff_eq!(*a, b, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn eep_single_user_is_plain_psk() {
        let d = design_eep::<f64>(1, 4).unwrap();
        for (a, b) in deg(&d[0]).iter().zip([0.0, 90.0, 180.0, 270.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn eep_bpsk_pair() {
        let d = design_eep::<f64>(2, 2).unwrap();
        assert_abs_diff_eq!(d[1].phase(0), FRAC_PI_2, epsilon = 1e-12);
        let j = JointConstellation::build(&d, &[1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(j.min_distance(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn eep_rejects_bad_arguments() {
        assert!(matches!(design_eep::<f64>(0, 4), Err(Error::InvalidParameter(_))));
        assert!(matches!(design_eep::<f64>(2, 3), Err(Error::InvalidParameter(_))));
        assert!(matches!(design_eep::<f64>(2, 1), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn eep_reports_collision() {
        // offsets 0, 30, 60 degrees: 1 + e^{i60} and e^{i30}(...) coincide
        assert!(matches!(design_eep::<f64>(3, 4), Err(Error::Collision { .. })));
    }

    #[test]
    fn uep_spacing_orders_protection() {
        let d = design_uep(2, 4, &[1.0, 0.5], &[0.0, FRAC_PI_8]).unwrap();
        assert_abs_diff_eq!(d[0].min_intra_distance(), 2.0 * (FRAC_PI_4).sin(), epsilon = 1e-12);
        assert_abs_diff_eq!(d[1].min_intra_distance(), 2.0 * (PI / 8.0).sin(), epsilon = 1e-12);
        assert_abs_diff_eq!(d[0].min_intra_distance(), 1.414, epsilon = 1e-3);
        assert_abs_diff_eq!(d[1].min_intra_distance(), 0.765, epsilon = 1e-3);
        assert!(d[1].is_gray());
    }

    #[test]
    fn uep_unit_gamma_matches_eep_single() {
        let u = design_uep(1, 4, &[1.0], &[0.0]).unwrap();
        let e = design_eep::<f64>(1, 4).unwrap();
        assert_eq!(u, e);
    }

    #[test]
    fn uep_identical_users_not_unique() {
        let d = design_uep(2, 4, &[1.0, 1.0], &[0.0, 0.0]).unwrap();
        let j = JointConstellation::build(&d, &[1.0, 1.0]).unwrap();
        assert!(j.validate_unique(1e-9).is_err());
    }

    #[test]
    fn uep_rejects_bad_gamma() {
        assert!(design_uep(1, 4, &[0.0], &[0.0]).is_err());
        assert!(design_uep(1, 4, &[1.5], &[0.0]).is_err());
        assert!(design_uep(1, 4, &[1e-12], &[0.0]).is_err());
        assert!(design_uep(2, 4, &[1.0], &[0.0, 0.0]).is_err());
    }

    // Expected values below come from the brute-force scan in
    // `tests/constellation_oracles.rs`, which enumerates every grid offset.
    #[test]
    fn offsets_two_qpsk_users() {
        let r = optimize_offsets(2, 4, &[1.0, 1.0], PI / 16.0).unwrap();
        assert_abs_diff_eq!(r.offsets[1], 3.0 * PI / 16.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.min_distance, 0.672_190_909_423_364_6, epsilon = 1e-9);
    }

    #[test]
    fn offsets_two_bpsk_users() {
        let r = optimize_offsets(2, 2, &[1.0, 1.0], PI / 8.0).unwrap();
        assert_abs_diff_eq!(r.offsets[1], 3.0 * PI / 8.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.min_distance, 2.0, epsilon = 1e-9);

        let r = optimize_offsets(2, 2, &[1.0, 1.0], FRAC_PI_4).unwrap();
        assert_abs_diff_eq!(r.offsets[1], FRAC_PI_2, epsilon = 1e-12);
        assert_abs_diff_eq!(r.min_distance, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn offsets_single_user() {
        let r = optimize_offsets(1, 4, &[1.0], PI / 16.0).unwrap();
        assert_eq!(r.offsets, vec![0.0]);
        assert_abs_diff_eq!(r.min_distance, SQRT_2, epsilon = 1e-12);
    }

    #[test]
    fn offsets_reject_bad_grid() {
        assert!(optimize_offsets(2, 4, &[1.0, 1.0], 0.3).is_err());
        assert!(optimize_offsets(2, 4, &[1.0, 1.0], -0.1).is_err());
    }

    #[test]
    fn offsets_no_injective_design() {
        // a single grid point (offset 0) always duplicates user 0
        assert!(matches!(
            optimize_offsets(2, 4, &[1.0, 1.0], FRAC_PI_2),
            Err(Error::NoInjectiveDesign)
        ));
    }
}
