//! Per-user unit-circle constellations and their additive joint constellation.
//!
//! Every user places `M` phases on the unit circle. The receiver observes the
//! superposition `sum_k alpha_k * exp(i * phase_k)` for one symbol per user, so
//! the individual designs are only usable together if no two symbol tuples
//! produce the same joint point.

mod catalog;
mod design;

use std::cmp::Ordering;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::{Complex, Error, Result, Scalar};

pub use catalog::{read_catalog, write_catalog, Catalog, CatalogUser};
pub use design::{design_eep, design_uep, optimize_offsets, OffsetSearch};

/// Binary reflected Gray code of `m`.
#[inline]
pub fn gray_encode(m: u32) -> u32 {
    m ^ (m >> 1)
}

/// Inverse of [`gray_encode`].
#[inline]
pub fn gray_decode(mut g: u32) -> u32 {
    let mut m = g;
    while g > 0 {
        g >>= 1;
        m ^= g;
    }
    m
}

/// Wraps an angle into `[0, 2pi)`.
pub fn wrap_angle<T: Scalar>(phi: T) -> T {
    let tau = T::TAU();
    let mut w = phi % tau;
    if w < T::zero() {
        w = w + tau;
    }
    // `-tiny % tau + tau` can round up to exactly tau
    if w >= tau {
        w = w - tau;
    }
    w
}

/// Shortest angular separation of two phases, in `[0, pi]`.
pub fn circular_distance<T: Scalar>(a: T, b: T) -> T {
    let d = wrap_angle(a - b);
    d.min(T::TAU() - d)
}

pub(crate) fn log2_exact(m: usize) -> Option<u32> {
    (m >= 2 && m.is_power_of_two()).then(|| m.trailing_zeros())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    /// Equal error protection: every user gets the same spacing.
    Eep,
    /// Unequal error protection: per-user spacing factors.
    Uep,
}

impl std::fmt::Display for Criterion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Criterion::Eep => f.write_str("eep"),
            Criterion::Uep => f.write_str("uep"),
        }
    }
}

impl std::str::FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eep" => Ok(Criterion::Eep),
            "uep" => Ok(Criterion::Uep),
            other => Err(Error::invalid(format!("unknown criterion `{other}`"))),
        }
    }
}

/// One user's symbol set on the unit circle with its bit labels.
///
/// Symbol index `m` is the generation order of the phases; `bit_map[m]` is the
/// label sent for that symbol. Phases are stored wrapped into `[0, 2pi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IndividualConstellation<T> {
    user_id: usize,
    phases: Vec<T>,
    amplitude: T,
    bits_per_symbol: u32,
    bit_map: Vec<u32>,
    label_to_index: Vec<usize>,
}

impl<T: Scalar> IndividualConstellation<T> {
    /// Builds a constellation with Gray labels `bit_map[m] = gray(m)`.
    pub fn new(user_id: usize, phases: Vec<T>) -> Result<Self> {
        let bit_map = (0..phases.len() as u32).map(gray_encode).collect();
        Self::from_parts(user_id, phases, bit_map)
    }

    /// Builds a constellation from explicit labels, checking every invariant.
    pub fn from_parts(user_id: usize, phases: Vec<T>, bit_map: Vec<u32>) -> Result<Self> {
        let order = phases.len();
        let bits =
            log2_exact(order).ok_or_else(|| Error::invalid(format!("order {order} is not a power of two >= 2")))?;
        if bit_map.len() != order {
            return Err(Error::invalid(format!(
                "bit_map has {} labels for {order} phases",
                bit_map.len()
            )));
        }
        if phases.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("non-finite phase"));
        }
        let phases: Vec<T> = phases.into_iter().map(wrap_angle).collect();

        let tol = T::default_tol();
        for i in 0..order {
            for j in (i + 1)..order {
                if circular_distance(phases[i], phases[j]) <= tol {
                    return Err(Error::invalid(format!("user {user_id}: phases {i} and {j} coincide")));
                }
            }
        }

        let mut label_to_index = vec![usize::MAX; order];
        for (m, &label) in bit_map.iter().enumerate() {
            let slot = label_to_index
                .get_mut(label as usize)
                .ok_or_else(|| Error::invalid(format!("label {label} needs more than {bits} bits")))?;
            if *slot != usize::MAX {
                return Err(Error::invalid(format!("label {label} assigned twice")));
            }
            *slot = m;
        }

        let c = IndividualConstellation {
            user_id,
            phases,
            amplitude: T::one(),
            bits_per_symbol: bits,
            bit_map,
            label_to_index,
        };
        if !c.is_gray() {
            return Err(Error::invalid(format!(
                "user {user_id}: adjacent phases differ in more than one bit"
            )));
        }
        Ok(c)
    }

    pub fn user_id(&self) -> usize {
        self.user_id
    }

    pub fn order(&self) -> usize {
        self.phases.len()
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.bits_per_symbol
    }

    pub fn amplitude(&self) -> T {
        self.amplitude
    }

    pub fn phases(&self) -> &[T] {
        &self.phases
    }

    pub fn phase(&self, index: usize) -> T {
        self.phases[index]
    }

    pub fn symbol(&self, index: usize) -> Complex<T> {
        Complex::from_polar(self.amplitude, self.phases[index])
    }

    pub fn bit_map(&self) -> &[u32] {
        &self.bit_map
    }

    pub fn label(&self, index: usize) -> u32 {
        self.bit_map[index]
    }

    /// Symbol index carrying `label`.
    pub fn index_of_label(&self, label: u32) -> Option<usize> {
        self.label_to_index.get(label as usize).copied()
    }

    /// Symbol indices sorted by phase angle.
    pub fn sorted_indices(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.order()).collect();
        idx.sort_by(|&a, &b| self.phases[a].partial_cmp(&self.phases[b]).unwrap_or(Ordering::Equal));
        idx
    }

    /// Adjacent phases in angular order differ in exactly one label bit.
    pub fn is_gray(&self) -> bool {
        self.sorted_indices()
            .windows(2)
            .all(|w| (self.bit_map[w[0]] ^ self.bit_map[w[1]]).count_ones() == 1)
    }

    /// Smallest chord between two symbols of this user.
    pub fn min_intra_distance(&self) -> T {
        let mut best = T::infinity();
        for i in 0..self.order() {
            for j in (i + 1)..self.order() {
                best = best.min((self.symbol(i) - self.symbol(j)).norm());
            }
        }
        best
    }

    /// Returns a copy with every phase advanced by `angle`.
    pub fn rotated(&self, angle: T) -> Self {
        let mut c = self.clone();
        for p in &mut c.phases {
            *p = wrap_angle(*p + angle);
        }
        c
    }
}

/// All `prod_k M_k` superpositions of one symbol per user.
///
/// Point `p` corresponds to the symbol tuple at position `p` of the
/// lexicographic enumeration (the last user varies fastest).
#[derive(Debug, Clone)]
pub struct JointConstellation<T> {
    points: Vec<Complex<T>>,
    tuples: Vec<usize>,
    orders: Vec<usize>,
    gains: Vec<T>,
    min_distance: T,
    closest: Option<(usize, usize)>,
}

impl<T: Scalar> JointConstellation<T> {
    /// Enumerates the superposition `sum_k gains[k] * symbol_k(tuple[k])`.
    pub fn build(constellations: &[IndividualConstellation<T>], gains: &[T]) -> Result<Self> {
        if constellations.is_empty() {
            return Err(Error::invalid("at least one constellation is required"));
        }
        if gains.len() != constellations.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} gains for {} constellations",
                gains.len(),
                constellations.len()
            )));
        }
        if gains.iter().any(|&g| !(g > T::zero()) || !g.is_finite()) {
            return Err(Error::invalid("gains must be positive and finite"));
        }

        let orders: Vec<usize> = constellations.iter().map(|c| c.order()).collect();
        let n = orders
            .iter()
            .try_fold(1usize, |acc, &m| acc.checked_mul(m))
            .ok_or_else(|| Error::invalid("joint constellation size overflows"))?;
        let users = orders.len();

        let scaled: Vec<Vec<Complex<T>>> = constellations
            .iter()
            .zip(gains)
            .map(|(c, &g)| (0..c.order()).map(|m| c.symbol(m) * g).collect())
            .collect();

        let mut points = Vec::with_capacity(n);
        let mut tuples = Vec::with_capacity(n * users);
        let mut tuple = vec![0usize; users];
        for _ in 0..n {
            let point = tuple
                .iter()
                .zip(&scaled)
                .fold(Complex::new(T::zero(), T::zero()), |acc, (&m, sym)| acc + sym[m]);
            points.push(point);
            tuples.extend_from_slice(&tuple);
            // odometer, last user fastest
            for k in (0..users).rev() {
                tuple[k] += 1;
                if tuple[k] < orders[k] {
                    break;
                }
                tuple[k] = 0;
            }
        }

        let (min_distance, closest) = match closest_pair(&points) {
            Some((d, a, b)) => (d, Some((a, b))),
            None => (T::infinity(), None),
        };

        Ok(JointConstellation {
            points,
            tuples,
            orders,
            gains: gains.to_vec(),
            min_distance,
            closest,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn users(&self) -> usize {
        self.orders.len()
    }

    pub fn orders(&self) -> &[usize] {
        &self.orders
    }

    pub fn points(&self) -> &[Complex<T>] {
        &self.points
    }

    pub fn point(&self, index: usize) -> Complex<T> {
        self.points[index]
    }

    pub fn gains(&self) -> &[T] {
        &self.gains
    }

    /// Per-user symbol indices of joint point `index`.
    pub fn tuple(&self, index: usize) -> &[usize] {
        let k = self.users();
        &self.tuples[index * k..(index + 1) * k]
    }

    /// Joint point index of a symbol tuple.
    pub fn index_of(&self, tuple: &[usize]) -> Option<usize> {
        if tuple.len() != self.users() {
            return None;
        }
        tuple
            .iter()
            .zip(&self.orders)
            .try_fold(0usize, |acc, (&m, &order)| (m < order).then_some(acc * order + m))
    }

    /// Smallest pairwise distance, whether or not the design is injective.
    /// Infinite for a single-point constellation.
    pub fn min_distance(&self) -> T {
        self.min_distance
    }

    /// The pair of point indices realizing [`Self::min_distance`].
    pub fn closest_pair(&self) -> Option<(usize, usize)> {
        self.closest
    }

    /// `Ok` iff every pair of points is farther apart than `tol`.
    ///
    /// On failure the witness is the colliding pair with the smallest point
    /// indices.
    pub fn validate_unique(&self, tol: T) -> Result<()> {
        if self.min_distance > tol {
            return Ok(());
        }
        let (a, b) = first_collision(&self.points, tol)
            .or(self.closest)
            .expect("a collision exists when min_distance <= tol");
        Err(Error::Collision {
            a: self.tuple(a).to_vec(),
            b: self.tuple(b).to_vec(),
        })
    }

    /// Minimum distance of an injective design; the collision otherwise.
    pub fn checked_min_distance(&self, tol: T) -> Result<T> {
        self.validate_unique(tol).map(|_| self.min_distance)
    }

    /// Peak-to-average power ratio of the joint points (linear).
    pub fn papr(&self) -> T {
        let powers = self.points.iter().map(|p| p.norm_sqr());
        let peak = powers.clone().fold(T::zero(), T::max);
        let mean = powers.sum::<T>() / T::lit(self.points.len() as f64);
        peak / mean
    }

    /// Nearest point to `z`; ties go to the lowest index.
    pub fn nearest(&self, z: Complex<T>) -> usize {
        let mut best = 0;
        let mut best_d = T::infinity();
        for (p, point) in self.points.iter().enumerate() {
            let d = (z - point).norm_sqr();
            if d < best_d {
                best_d = d;
                best = p;
            }
        }
        best
    }

    /// Writes `tuple,re,im` rows; the tuple is the per-user indices joined by `-`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["tuple", "re", "im"])?;
        for (p, point) in self.points.iter().enumerate() {
            let tuple = self
                .tuple(p)
                .iter()
                .map(|m| m.to_string())
                .collect::<Vec<_>>()
                .join("-");
            w.write_record([tuple, point.re.to_string(), point.im.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn by_real_part<T: Scalar>(points: &[Complex<T>]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .re
            .partial_cmp(&points[b].re)
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

/// Exact closest pair by a sweep over points sorted on the real axis.
fn closest_pair<T: Scalar>(points: &[Complex<T>]) -> Option<(T, usize, usize)> {
    let order = by_real_part(points);
    let mut best: Option<(T, usize, usize)> = None;
    for (i, &a) in order.iter().enumerate() {
        for &b in &order[i + 1..] {
            let dx = points[b].re - points[a].re;
            if let Some((d, _, _)) = best {
                if dx > d {
                    break;
                }
            }
            let d = (points[a] - points[b]).norm();
            let pair = (a.min(b), a.max(b));
            let better = match best {
                None => true,
                Some((bd, ba, bb)) => d < bd || (d == bd && pair < (ba, bb)),
            };
            if better {
                best = Some((d, pair.0, pair.1));
            }
        }
    }
    best
}

/// Lexicographically smallest index pair within `tol` of each other.
fn first_collision<T: Scalar>(points: &[Complex<T>], tol: T) -> Option<(usize, usize)> {
    let order = by_real_part(points);
    let mut found: Option<(usize, usize)> = None;
    for (i, &a) in order.iter().enumerate() {
        for &b in &order[i + 1..] {
            if points[b].re - points[a].re > tol {
                break;
            }
            if (points[a] - points[b]).norm() <= tol {
                let pair = (a.min(b), a.max(b));
                if found.is_none_or(|f| pair < f) {
                    found = Some(pair);
                }
            }
        }
    }
    found
}

/// A complete multi-user design with its figures of merit.
#[derive(Debug, Clone)]
pub struct DesignReport<T> {
    pub constellations: Vec<IndividualConstellation<T>>,
    pub joint: JointConstellation<T>,
    pub unique: bool,
    /// Zero when the design collides.
    pub min_distance: T,
    pub papr: T,
    pub criterion: Criterion,
}

impl<T: Scalar> DesignReport<T> {
    pub fn new(constellations: Vec<IndividualConstellation<T>>, gains: &[T], criterion: Criterion) -> Result<Self> {
        let joint = JointConstellation::build(&constellations, gains)?;
        let unique = joint.validate_unique(T::default_tol()).is_ok();
        let min_distance = if unique { joint.min_distance() } else { T::zero() };
        let papr = joint.papr();
        Ok(DesignReport {
            constellations,
            joint,
            unique,
            min_distance,
            papr,
            criterion,
        })
    }

    pub fn users(&self) -> usize {
        self.constellations.len()
    }

    pub fn papr_db(&self) -> T {
        T::lit(10.0) * self.papr.log10()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, SQRT_2};

    fn qpsk(user: usize, offset: f64) -> IndividualConstellation<f64> {
        IndividualConstellation::new(user, (0..4).map(|m| offset + m as f64 * FRAC_PI_2).collect()).unwrap()
    }

    #[test]
    fn gray_roundtrip_and_adjacency() {
        for m in 0..1024u32 {
            assert_eq!(gray_decode(gray_encode(m)), m);
            assert_eq!((gray_encode(m) ^ gray_encode(m + 1)).count_ones(), 1);
        }
    }

    #[test]
    fn gray_property_for_standard_orders() {
        for order in [2usize, 4, 8, 16] {
            let c = IndividualConstellation::new(0, (0..order).map(|m| m as f64 * 2.0 * PI / order as f64).collect())
                .unwrap();
            assert!(c.is_gray());
            // wrap-around pair as well
            assert_eq!((c.label(0) ^ c.label(order - 1)).count_ones(), 1);
        }
    }

    #[test]
    fn rejects_bad_individuals() {
        assert!(IndividualConstellation::new(0, vec![0.0, 1.0, 2.0]).is_err());
        assert!(IndividualConstellation::new(0, vec![0.0, 2.0 * PI]).is_err());
        assert!(IndividualConstellation::new(0, vec![0.0, 1e-12]).is_err());
        assert!(IndividualConstellation::from_parts(0, vec![0.0, PI], vec![0, 0]).is_err());
        // natural binary is not Gray for QPSK
        assert!(
            IndividualConstellation::from_parts(0, vec![0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2], vec![0, 1, 2, 3])
                .is_err()
        );
    }

    #[test]
    fn phases_are_wrapped() {
        let c = IndividualConstellation::new(0, vec![-FRAC_PI_2, FRAC_PI_2]).unwrap();
        assert_abs_diff_eq!(c.phase(0), 3.0 * FRAC_PI_2, epsilon = 1e-15);
        assert!(wrap_angle(-1e-20_f64) < 2.0 * PI);
    }

    #[test]
    fn single_user_joint_is_the_individual() {
        let c = qpsk(0, 0.0);
        let j = JointConstellation::build(std::slice::from_ref(&c), &[1.0]).unwrap();
        assert_eq!(j.len(), 4);
        for m in 0..4 {
            assert_abs_diff_eq!((j.point(m) - c.symbol(m)).norm(), 0.0, epsilon = 1e-15);
            assert_eq!(j.tuple(m), &[m]);
        }
        assert_abs_diff_eq!(j.min_distance(), SQRT_2, epsilon = 1e-12);
        assert_abs_diff_eq!(j.papr(), 1.0, epsilon = 1e-12);
        assert!(j.validate_unique(1e-9).is_ok());
    }

    #[test]
    fn identical_users_collide_with_first_witness() {
        let j = JointConstellation::build(&[qpsk(0, 0.0), qpsk(1, 0.0)], &[1.0, 1.0]).unwrap();
        match j.validate_unique(1e-9) {
            Err(Error::Collision { a, b }) => {
                assert_eq!(a, vec![0, 1]);
                assert_eq!(b, vec![1, 0]);
            }
            other => panic!("expected collision, got {other:?}"),
        }
        assert!(j.checked_min_distance(1e-9).is_err());
    }

    #[test]
    fn tuple_index_roundtrip() {
        let c8 = IndividualConstellation::new(1, (0..8).map(|m| 0.1 + m as f64 * PI / 4.0).collect()).unwrap();
        let j = JointConstellation::build(&[qpsk(0, 0.0), c8], &[1.0, 0.5]).unwrap();
        assert_eq!(j.len(), 32);
        for p in 0..j.len() {
            assert_eq!(j.index_of(j.tuple(p)), Some(p));
        }
        assert_eq!(j.tuple(9), &[1, 1]);
        assert_eq!(j.index_of(&[4, 0]), None);
    }

    #[test]
    fn eep_two_by_two_distance_and_papr() {
        let j = JointConstellation::build(
            &[
                IndividualConstellation::new(0, vec![0.0, PI]).unwrap(),
                IndividualConstellation::new(1, vec![FRAC_PI_2, 3.0 * FRAC_PI_2]).unwrap(),
            ],
            &[1.0, 1.0],
        )
        .unwrap();
        assert_abs_diff_eq!(j.min_distance(), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(j.papr(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn nearest_breaks_ties_low() {
        let j = JointConstellation::build(&[IndividualConstellation::new(0, vec![0.0, PI]).unwrap()], &[1.0]).unwrap();
        let mid = (j.point(0) + j.point(1)) / 2.0;
        assert_eq!((mid - j.point(0)).norm_sqr(), (mid - j.point(1)).norm_sqr());
        assert_eq!(j.nearest(mid), 0);
        assert_eq!(j.nearest(Complex::new(-0.1, 0.3)), 1);
    }

    #[test]
    fn joint_csv_layout() {
        let j = JointConstellation::build(&[qpsk(0, 0.0), qpsk(1, FRAC_PI_4)], &[1.0, 1.0]).unwrap();
        let mut buf = Vec::new();
        j.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "tuple,re,im");
        assert_eq!(lines.len(), 17);
        assert!(lines[1].starts_with("0-0,1.707106781186547"));
    }

    #[test]
    fn report_zeroes_distance_on_collision() {
        let r = DesignReport::new(vec![qpsk(0, 0.0), qpsk(1, 0.0)], &[1.0, 1.0], Criterion::Uep).unwrap();
        assert!(!r.unique);
        assert_eq!(r.min_distance, 0.0);
    }

    #[test]
    fn f32_joint_builds() {
        let c: Vec<IndividualConstellation<f32>> = (0..2)
            .map(|k| {
                IndividualConstellation::new(
                    k,
                    (0..4)
                        .map(|m| {
                            k as f32 * 0.25 * std::f32::consts::FRAC_PI_2 * 2.0 + m as f32 * std::f32::consts::FRAC_PI_2
                        })
                        .collect(),
                )
                .unwrap()
            })
            .collect();
        let j = JointConstellation::build(&c, &[1.0, 1.0]).unwrap();
        assert!((j.min_distance() - (2.0 - std::f32::consts::SQRT_2)).abs() < 1e-5);
        assert!(j.validate_unique(f32::default_tol()).is_ok());
    }
}
