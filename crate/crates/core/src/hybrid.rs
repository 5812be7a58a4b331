//! Hybrid access: users split into groups separated by an orthogonal resource
//! (time, frequency or code slots), each group sharing its slot through the
//! constellation domain.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelConfig;
use crate::constellation::{design_eep, Criterion, DesignReport};
use crate::simkit::{run_point_indexed, SimPoint};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Resource {
    Time,
    Frequency,
    Code,
}

impl std::str::FromStr for Resource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "time" | "tdma" => Ok(Resource::Time),
            "frequency" | "fdma" => Ok(Resource::Frequency),
            "code" | "cdma" => Ok(Resource::Code),
            other => Err(Error::invalid(format!("unknown resource `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct HybridPlan {
    pub resource: Resource,
    pub order: usize,
    pub groups: Vec<Vec<usize>>,
    pub slot_fractions: Vec<f64>,
    pub designs: Vec<DesignReport<f64>>,
}

/// Consecutive users in groups of `group_size`; a remainder forms a final
/// smaller group. Every group gets an equal slot share and an EEP design.
pub fn make_plan(users: usize, group_size: usize, order: usize, resource: Resource) -> Result<HybridPlan> {
    if users == 0 || group_size == 0 {
        return Err(Error::invalid("users and group size must be >= 1"));
    }
    let ids: Vec<usize> = (0..users).collect();
    let groups: Vec<Vec<usize>> = ids.chunks(group_size).map(|c| c.to_vec()).collect();
    let share = 1.0 / groups.len() as f64;
    let designs = groups
        .iter()
        .map(|g| DesignReport::new(design_eep(g.len(), order)?, &vec![1.0; g.len()], Criterion::Eep))
        .collect::<Result<Vec<_>>>()?;
    Ok(HybridPlan {
        resource,
        order,
        slot_fractions: vec![share; groups.len()],
        groups,
        designs,
    })
}

impl HybridPlan {
    pub fn users(&self) -> usize {
        self.groups.iter().map(|g| g.len()).sum()
    }

    /// Every user in exactly one group and the slot shares sum to one.
    pub fn is_valid(&self) -> bool {
        let n = self.users();
        let mut seen = vec![false; n];
        for &u in self.groups.iter().flatten() {
            if u >= n || std::mem::replace(&mut seen[u], true) {
                return false;
            }
        }
        let total: f64 = self.slot_fractions.iter().sum();
        self.slot_fractions.iter().all(|&f| f > 0.0 && f <= 1.0)
            && (total - 1.0).abs() <= 1e-12
            && self.designs.iter().all(|d| d.unique)
    }

    /// Uncoded rate of every user in bits per channel use, indexed by user id.
    /// `frame_len = Some(T)` charges the differential reference symbol,
    /// `None` is the long-frame limit.
    pub fn rates(&self, frame_len: Option<usize>) -> Vec<f64> {
        let bits = (self.order as f64).log2();
        let overhead = frame_len.map_or(1.0, |t| t as f64 / (t as f64 + 1.0));
        let mut rates = vec![0.0; self.users()];
        for (group, &share) in self.groups.iter().zip(&self.slot_fractions) {
            for &u in group {
                rates[u] = bits * share * overhead;
            }
        }
        rates
    }

    pub fn sum_rate(&self, frame_len: Option<usize>) -> f64 {
        self.rates(frame_len).iter().sum()
    }

    pub fn to_document(&self) -> PlanDocument {
        PlanDocument {
            resource: self.resource,
            order: self.order,
            group: self
                .groups
                .iter()
                .zip(&self.slot_fractions)
                .zip(&self.designs)
                .map(|((members, &fraction), d)| PlanGroup {
                    members: members.clone(),
                    fraction,
                    design: format!("{}({},{})", d.criterion, members.len(), self.order),
                    min_distance: d.min_distance,
                })
                .collect(),
        }
    }
}

/// Structured-text form of a plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanDocument {
    pub resource: Resource,
    pub order: usize,
    pub group: Vec<PlanGroup>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanGroup {
    pub members: Vec<usize>,
    pub fraction: f64,
    /// Design reference, e.g. `eep(2,4)`.
    pub design: String,
    pub min_distance: f64,
}

/// Monte-Carlo settings shared by every candidate of a threshold search.
#[derive(Debug, Clone)]
pub struct SearchSettings {
    pub frame_len: usize,
    pub frames_per_trial: usize,
    pub max_trials: usize,
    pub min_errors: u64,
    pub batch_trials: usize,
}

impl Default for SearchSettings {
    fn default() -> Self {
        SearchSettings {
            frame_len: 100,
            frames_per_trial: 1,
            max_trials: 200,
            min_errors: 100,
            batch_trials: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchRow {
    pub group_size: usize,
    /// 1.0 when the group design collides.
    pub worst_ser: f64,
    pub sum_rate: f64,
    pub qualifies: bool,
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdReport {
    pub rows: Vec<SearchRow>,
    pub selected: usize,
    /// No candidate met the SER target; `selected` is then 1.
    pub fallback: bool,
}

/// Simulates one representative group per candidate size and keeps the size
/// with the largest sum rate whose worst-user SER meets `target_ser`. Ties go
/// to the smaller group.
///
/// `channel.gains[0]` is used for every user of a group.
pub fn threshold_search(
    users: usize,
    candidates: &[usize],
    order: usize,
    channel: &ChannelConfig<f64>,
    target_ser: f64,
    settings: &SearchSettings,
) -> Result<ThresholdReport> {
    if candidates.is_empty() {
        return Err(Error::invalid("no group-size candidates"));
    }
    if !(target_ser > 0.0 && target_ser < 0.5) {
        return Err(Error::invalid("target SER must lie in (0, 0.5)"));
    }
    let alpha = *channel
        .gains
        .first()
        .ok_or_else(|| Error::invalid("channel needs a gain"))?;

    let mut rows = Vec::with_capacity(candidates.len());
    for (i, &g) in candidates.iter().enumerate() {
        if g == 0 || g > users {
            return Err(Error::invalid(format!("group size {g} outside 1..={users}")));
        }
        let sum_rate = plan_sum_rate(users, g, order, Some(settings.frame_len));
        let worst_ser = match design_eep::<f64>(g, order) {
            Ok(constellations) => {
                let design = DesignReport::new(constellations, &vec![1.0; g], Criterion::Eep)?;
                let mut cfg = channel.clone();
                cfg.gains = vec![alpha; g];
                let point = SimPoint {
                    design,
                    channel: cfg,
                    frame_len: settings.frame_len,
                    frames_per_trial: settings.frames_per_trial,
                    max_trials: settings.max_trials,
                    min_errors: settings.min_errors,
                    batch_trials: settings.batch_trials,
                };
                run_point_indexed(&point, i as u32)?.worst_ser()
            }
            Err(Error::Collision { .. }) => 1.0,
            Err(e) => return Err(e),
        };
        rows.push(SearchRow {
            group_size: g,
            worst_ser,
            sum_rate,
            qualifies: worst_ser <= target_ser,
            selected: false,
        });
    }

    let best = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.qualifies)
        .fold(None::<usize>, |best, (i, r)| match best {
            Some(b)
                if rows[b].sum_rate > r.sum_rate
                    || (rows[b].sum_rate == r.sum_rate && rows[b].group_size <= r.group_size) =>
            {
                Some(b)
            }
            _ => Some(i),
        });
    let (selected, fallback) = match best {
        Some(i) => {
            rows[i].selected = true;
            (rows[i].group_size, false)
        }
        None => {
            if let Some(r) = rows.iter_mut().find(|r| r.group_size == 1) {
                r.selected = true;
            }
            (1, true)
        }
    };
    Ok(ThresholdReport {
        rows,
        selected,
        fallback,
    })
}

/// Closed-form sum rate of `make_plan(users, group_size, order, _)`, also
/// defined when a group design would collide.
pub fn plan_sum_rate(users: usize, group_size: usize, order: usize, frame_len: Option<usize>) -> f64 {
    let slots = users.div_ceil(group_size) as f64;
    let overhead = frame_len.map_or(1.0, |t| t as f64 / (t as f64 + 1.0));
    users as f64 * (order as f64).log2() / slots * overhead
}

/// Writes `g,worst_ser,sum_rate,selected` after a `# comment` line.
pub fn write_search_csv<W: Write>(mut out: W, comment: &str, report: &ThresholdReport) -> Result<()> {
    for line in comment.lines() {
        writeln!(out, "# {line}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["g", "worst_ser", "sum_rate", "selected"])?;
    for r in &report.rows {
        w.write_record([
            r.group_size.to_string(),
            r.worst_ser.to_string(),
            r.sum_rate.to_string(),
            r.selected.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::FadingModel;
    use proptest::prelude::*;

    #[test]
    fn two_groups_of_two() {
        let p = make_plan(4, 2, 4, Resource::Time).unwrap();
        assert_eq!(p.groups, vec![vec![0, 1], vec![2, 3]]);
        assert_eq!(p.slot_fractions, vec![0.5, 0.5]);
        assert!(p.is_valid());
    }

    #[test]
    fn pure_tdma() {
        let p = make_plan(4, 1, 4, Resource::Time).unwrap();
        assert_eq!(p.slot_fractions, vec![0.25; 4]);
        assert!(p.rates(None).iter().all(|&r| (r - 0.5).abs() < 1e-15));
    }

    #[test]
    fn remainder_group() {
        let p = make_plan(3, 2, 4, Resource::Frequency).unwrap();
        assert_eq!(p.groups, vec![vec![0, 1], vec![2]]);
        assert_eq!(p.slot_fractions, vec![0.5, 0.5]);
        assert!(p.is_valid());
    }

    #[test]
    fn collision_surfaces() {
        assert!(matches!(
            make_plan(6, 3, 4, Resource::Time),
            Err(Error::Collision { .. })
        ));
        assert!(make_plan(0, 1, 4, Resource::Time).is_err());
    }

    #[test]
    fn rate_with_reference_overhead() {
        let p = make_plan(4, 2, 4, Resource::Time).unwrap();
        let r = p.rates(Some(100));
        for &x in &r {
            assert!((x - 2.0 * 0.5 * 100.0 / 101.0).abs() < 1e-12);
        }
        assert!((p.sum_rate(Some(100)) - 3.960_396_039_603_96).abs() < 1e-12);
        let single = make_plan(1, 1, 8, Resource::Code).unwrap();
        assert!((single.sum_rate(Some(100)) - 3.0 * 100.0 / 101.0).abs() < 1e-12);
    }

    #[test]
    fn doubling_against_tdma() {
        let hybrid = make_plan(4, 2, 4, Resource::Time).unwrap().sum_rate(None);
        let tdma = make_plan(4, 1, 4, Resource::Time).unwrap().sum_rate(None);
        assert_eq!(hybrid, 2.0 * tdma);
    }

    #[test]
    fn plan_document_roundtrips() {
        let doc = make_plan(4, 2, 4, Resource::Time).unwrap().to_document();
        let text = toml::to_string(&doc).unwrap();
        assert!(text.contains("design = \"eep(2,4)\""));
        let back: PlanDocument = toml::from_str(&text).unwrap();
        assert_eq!(back, doc);
    }

    #[test]
    fn search_only_tdma_candidate() {
        let ch = ChannelConfig::new(32, FadingModel::Rayleigh, vec![1.0], 20.0, 1);
        let settings = SearchSettings {
            max_trials: 4,
            ..Default::default()
        };
        let r = threshold_search(4, &[1], 4, &ch, 0.1, &settings).unwrap();
        assert_eq!(r.selected, 1);
        assert!(r.rows[0].selected);
    }

    #[test]
    fn search_argument_checks() {
        let ch = ChannelConfig::new(32, FadingModel::Rayleigh, vec![1.0], 20.0, 1);
        let s = SearchSettings::default();
        assert!(threshold_search(4, &[], 4, &ch, 0.1, &s).is_err());
        assert!(threshold_search(4, &[1], 4, &ch, 0.6, &s).is_err());
        assert!(threshold_search(4, &[5], 4, &ch, 0.1, &s).is_err());
    }

    #[test]
    fn colliding_candidate_does_not_qualify() {
        let ch = ChannelConfig::new(32, FadingModel::Rayleigh, vec![1.0], f64::INFINITY, 1);
        let settings = SearchSettings {
            max_trials: 2,
            ..Default::default()
        };
        let r = threshold_search(6, &[1, 3], 4, &ch, 0.2, &settings).unwrap();
        assert_eq!(r.rows[1].worst_ser, 1.0);
        assert!(!r.rows[1].qualifies);
        assert_eq!(r.selected, 1);
    }

    proptest! {
        #[test]
        fn partition_and_closed_form(n in 1usize..40, g in 1usize..5, t in 1usize..500) {
            let plan = match make_plan(n, g, 2, Resource::Time) {
                Ok(p) => p,
                Err(_) => return Ok(()),
            };
            prop_assert!(plan.is_valid());
            prop_assert!((plan.sum_rate(Some(t)) - plan_sum_rate(n, g, 2, Some(t))).abs() < 1e-12);
            if n % g == 0 {
                let closed = n as f64 / (n / g) as f64 * t as f64 / (t as f64 + 1.0);
                prop_assert!((plan.sum_rate(Some(t)) - closed).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rate_monotone_in_group_size() {
        let n = 8;
        let mut last = 0.0;
        // EEP groups are injective for K in {1, 2, 4}
        for g in [1, 2, 4] {
            let r = make_plan(n, g, 2, Resource::Time).unwrap().sum_rate(None);
            assert!(r >= last);
            last = r;
        }
    }
}
