//! Multibeam frequency plans where a beam's color is the triplet
//! (frequency, polarization, constellation set), plus scenario presets.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::config::{ModelName, SimConfig};
use crate::constellation::Criterion;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Polarization {
    Rhcp,
    Lhcp,
}

impl Polarization {
    fn from_index(i: usize) -> Self {
        if i == 0 {
            Polarization::Rhcp
        } else {
            Polarization::Lhcp
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Polarization::Rhcp => "RHCP",
            Polarization::Lhcp => "LHCP",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Color {
    pub freq_index: usize,
    pub polarization: Polarization,
    pub const_set_index: usize,
}

/// Which color dimension changes from one beam to the next.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RepeatPattern {
    #[default]
    FrequencyFirst,
    PolarizationFirst,
    ConstellationFirst,
}

impl RepeatPattern {
    pub fn as_str(&self) -> &'static str {
        match self {
            RepeatPattern::FrequencyFirst => "frequency",
            RepeatPattern::PolarizationFirst => "polarization",
            RepeatPattern::ConstellationFirst => "constellation",
        }
    }
}

impl std::str::FromStr for RepeatPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "frequency" | "freq" => Ok(RepeatPattern::FrequencyFirst),
            "polarization" | "pol" => Ok(RepeatPattern::PolarizationFirst),
            "constellation" | "const" => Ok(RepeatPattern::ConstellationFirst),
            other => Err(Error::invalid(format!("unknown repeat pattern `{other}`"))),
        }
    }
}

/// Every color of the plan in assignment order.
pub fn palette(n_freq: usize, n_pol: usize, n_const_sets: usize, pattern: RepeatPattern) -> Vec<Color> {
    let mut colors = Vec::with_capacity(n_freq * n_pol * n_const_sets);
    for slow in 0.. {
        if colors.len() == n_freq * n_pol * n_const_sets {
            break;
        }
        let (f, p, c) = match pattern {
            RepeatPattern::FrequencyFirst => (slow % n_freq, (slow / n_freq) % n_pol, slow / (n_freq * n_pol)),
            RepeatPattern::PolarizationFirst => ((slow / n_pol) % n_freq, slow % n_pol, slow / (n_freq * n_pol)),
            RepeatPattern::ConstellationFirst => (
                (slow / n_const_sets) % n_freq,
                slow / (n_const_sets * n_freq),
                slow % n_const_sets,
            ),
        };
        colors.push(Color {
            freq_index: f,
            polarization: Polarization::from_index(p),
            const_set_index: c,
        });
    }
    colors
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyPlan {
    pub n_freq: usize,
    pub n_pol: usize,
    pub n_const_sets: usize,
    pub beams: Vec<(u32, Color)>,
    pub bandwidth_per_beam_hz: f64,
    /// Capacity of a beam with a single constellation set.
    pub base_capacity_per_beam_bps: f64,
}

/// Assigns the palette to `beam_ids` cyclically.
pub fn build_plan(
    n_freq: usize,
    n_pol: usize,
    n_const_sets: usize,
    beam_ids: &[u32],
    pattern: RepeatPattern,
    bandwidth_per_beam_hz: f64,
    base_capacity_per_beam_bps: f64,
) -> Result<FrequencyPlan> {
    if n_freq == 0 || n_const_sets == 0 {
        return Err(Error::invalid("frequency and constellation-set counts must be >= 1"));
    }
    if !(1..=2).contains(&n_pol) {
        return Err(Error::invalid("polarization count must be 1 or 2"));
    }
    if beam_ids.is_empty() {
        return Err(Error::invalid("plan needs at least one beam"));
    }
    if !(bandwidth_per_beam_hz > 0.0) || !(base_capacity_per_beam_bps > 0.0) {
        return Err(Error::invalid("bandwidth and base capacity must be positive"));
    }
    let colors = palette(n_freq, n_pol, n_const_sets, pattern);
    let beams = beam_ids
        .iter()
        .enumerate()
        .map(|(i, &id)| (id, colors[i % colors.len()]))
        .collect();
    Ok(FrequencyPlan {
        n_freq,
        n_pol,
        n_const_sets,
        beams,
        bandwidth_per_beam_hz,
        base_capacity_per_beam_bps,
    })
}

impl FrequencyPlan {
    /// Distinguishable colors of the plan, `n_freq * n_pol * n_const_sets`.
    pub fn color_count(&self) -> usize {
        self.n_freq * self.n_pol * self.n_const_sets
    }

    /// Distinct colors actually assigned to beams.
    pub fn colors_in_use(&self) -> usize {
        let mut used: Vec<Color> = self.beams.iter().map(|b| b.1).collect();
        used.sort();
        used.dedup();
        used.len()
    }

    pub fn is_valid(&self) -> bool {
        (1..=2).contains(&self.n_pol)
            && self.beams.iter().all(|(_, c)| {
                c.freq_index < self.n_freq
                    && (c.polarization == Polarization::Rhcp || self.n_pol == 2)
                    && c.const_set_index < self.n_const_sets
            })
    }

    pub fn beam_capacity_bps(&self) -> f64 {
        self.base_capacity_per_beam_bps * self.n_const_sets as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityReport {
    pub per_beam: Vec<(u32, f64)>,
    pub total_bps: f64,
    pub bandwidth_per_beam_hz: f64,
    /// Spectrum spanned by the frequency colors.
    pub total_bandwidth_hz: f64,
}

/// Each constellation set multiplies a beam's capacity without using more
/// bandwidth.
pub fn beam_capacity(plan: &FrequencyPlan) -> CapacityReport {
    let per = plan.beam_capacity_bps();
    let per_beam: Vec<(u32, f64)> = plan.beams.iter().map(|(id, _)| (*id, per)).collect();
    CapacityReport {
        total_bps: per_beam.iter().map(|b| b.1).sum(),
        per_beam,
        bandwidth_per_beam_hz: plan.bandwidth_per_beam_hz,
        total_bandwidth_hz: plan.bandwidth_per_beam_hz * plan.n_freq as f64,
    }
}

/// `beam_id,freq_index,polarization,const_set_index,capacity` after a
/// `# comment` line.
pub fn write_plan_csv<W: Write>(mut out: W, comment: &str, plan: &FrequencyPlan) -> Result<()> {
    for line in comment.lines() {
        writeln!(out, "# {line}")?;
    }
    let capacity = plan.beam_capacity_bps();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["beam_id", "freq_index", "polarization", "const_set_index", "capacity"])?;
    for (id, c) in &plan.beams {
        w.write_record([
            id.to_string(),
            c.freq_index.to_string(),
            c.polarization.as_str().to_string(),
            c.const_set_index.to_string(),
            capacity.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    VsatUplink,
    MegaLeoGw,
    MegaLeoMaritime,
    TerrestrialNtn,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::VsatUplink,
        Scenario::MegaLeoGw,
        Scenario::MegaLeoMaritime,
        Scenario::TerrestrialNtn,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::VsatUplink => "vsat_uplink",
            Scenario::MegaLeoGw => "mega_leo_gw",
            Scenario::MegaLeoMaritime => "mega_leo_maritime",
            Scenario::TerrestrialNtn => "terrestrial_ntn",
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::UnknownPreset(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orbit {
    Geo,
    Leo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkDirection {
    Uplink,
    Downlink,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReceiverSite {
    /// Massive-MIMO receiver on the satellite payload.
    Payload,
    /// Massive-MIMO receiver at a ground station or base station.
    Ground,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlanParams {
    pub n_freq: usize,
    pub n_pol: usize,
    pub n_const_sets: usize,
    pub beams: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioPreset {
    pub scenario: Scenario,
    pub orbit: Orbit,
    pub direction: LinkDirection,
    pub receiver: ReceiverSite,
    pub summary: &'static str,
    pub sim: SimConfig,
    pub plan: PlanParams,
}

/// Bundled configuration for a named scenario. The numbers are illustrative
/// desk-scale defaults, not measured values.
pub fn scenario_preset(name: &str) -> Result<ScenarioPreset> {
    let scenario: Scenario = name.parse()?;
    let four_colour_doubled = PlanParams {
        n_freq: 2,
        n_pol: 2,
        n_const_sets: 2,
        beams: 7,
    };
    let base = SimConfig {
        antennas: 256,
        ..SimConfig::default()
    };
    let preset = match scenario {
        Scenario::VsatUplink => ScenarioPreset {
            scenario,
            orbit: Orbit::Geo,
            direction: LinkDirection::Uplink,
            receiver: ReceiverSite::Payload,
            summary: "VSAT terminals in one GEO HTS beam share the uplink through distinct constellations",
            sim: SimConfig {
                users: 4,
                model: ModelName::Rician,
                kappa: 10.0,
                ..base
            },
            plan: four_colour_doubled,
        },
        Scenario::MegaLeoGw => ScenarioPreset {
            scenario,
            orbit: Orbit::Leo,
            direction: LinkDirection::Uplink,
            receiver: ReceiverSite::Payload,
            summary: "gateway stations access a LEO satellite, one constellation per gateway",
            sim: SimConfig {
                users: 2,
                model: ModelName::Rician,
                kappa: 5.0,
                ..base
            },
            plan: four_colour_doubled,
        },
        Scenario::MegaLeoMaritime => ScenarioPreset {
            scenario,
            orbit: Orbit::Leo,
            direction: LinkDirection::Uplink,
            receiver: ReceiverSite::Payload,
            summary: "ships in the same LEO beam access the satellite over a time-varying channel",
            sim: SimConfig {
                users: 4,
                model: ModelName::GaussMarkov,
                rho: 0.99,
                ..base
            },
            plan: four_colour_doubled,
        },
        Scenario::TerrestrialNtn => ScenarioPreset {
            scenario,
            orbit: Orbit::Leo,
            direction: LinkDirection::Uplink,
            receiver: ReceiverSite::Ground,
            summary: "one terrestrial and one non-terrestrial user share a beam with unequal protection",
            sim: SimConfig {
                criterion: Criterion::Uep,
                users: 2,
                gammas: Some(vec![1.0, 0.7]),
                offsets_deg: Some(vec![0.0, 45.0]),
                antennas: 128,
                ..base
            },
            plan: four_colour_doubled,
        },
    };
    Ok(preset)
}

impl ScenarioPreset {
    pub fn frequency_plan(&self) -> Result<FrequencyPlan> {
        let ids: Vec<u32> = (0..self.plan.beams as u32).collect();
        build_plan(
            self.plan.n_freq,
            self.plan.n_pol,
            self.plan.n_const_sets,
            &ids,
            RepeatPattern::FrequencyFirst,
            250e6,
            500e6,
        )
    }

    /// Simulation config document; scenario metadata goes in comment lines so
    /// the document loads unchanged as a `simulate` config.
    pub fn to_document(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# scenario: {}\n", self.scenario.name()));
        out.push_str(&format!("# {}\n", self.summary));
        out.push_str(&format!(
            "# orbit: {}  direction: {}  receiver: {}\n",
            self.orbit.as_str(),
            self.direction.as_str(),
            self.receiver.as_str()
        ));
        out.push_str(&format!(
            "# plan: n_freq={} n_pol={} n_const_sets={} beams={}\n",
            self.plan.n_freq, self.plan.n_pol, self.plan.n_const_sets, self.plan.beams
        ));
        out.push_str("# numeric values are illustrative defaults without measured provenance\n");
        out.push_str(&self.sim.to_toml());
        out
    }
}

impl Orbit {
    pub fn as_str(&self) -> &'static str {
        match self {
            Orbit::Geo => "geo",
            Orbit::Leo => "leo",
        }
    }
}

impl LinkDirection {
    pub fn as_str(&self) -> &'static str {
        match self {
            LinkDirection::Uplink => "uplink",
            LinkDirection::Downlink => "downlink",
        }
    }
}

impl ReceiverSite {
    pub fn as_str(&self) -> &'static str {
        match self {
            ReceiverSite::Payload => "payload",
            ReceiverSite::Ground => "ground",
        }
    }
}
