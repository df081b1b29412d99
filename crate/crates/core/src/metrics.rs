//! Energy, reliability, privacy and total cost of an evaluated schedule.

use serde::Serialize;

use crate::config::ScenarioConfig;
use crate::model::Location;
use crate::timeline::TaskTimeline;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Energy {
    pub compute: f64,
    pub transmit: f64,
}

impl Energy {
    pub fn total(&self) -> f64 {
        self.compute + self.transmit
    }
}

/// UE energy: `kappa f^3` over the local compute time plus `P_tran` over the
/// total upload time (redundant bytes included).
pub fn energy(timeline: &[TaskTimeline], cfg: &ScenarioConfig) -> Energy {
    let mut local_seconds = 0.0;
    let mut upload_seconds = 0.0;
    for t in timeline {
        match t.location {
            Location::Local => local_seconds += t.size_mb / cfg.ue_compute_mbps(),
            Location::Satellite(_) => upload_seconds += t.upload_end - t.upload_start,
        }
    }
    Energy {
        compute: cfg.ue_compute_power_w() * local_seconds,
        transmit: cfg.ue_tx_power_w() * upload_seconds,
    }
}

/// Probability that at least one offloaded bit is corrupted.
///
/// Takes `(transmitted bits, bit error rate)` for each offloaded task. Local
/// tasks contribute nothing. Accumulated as `sum bits * ln(1 - b)`.
pub fn failure_probability(offloaded: impl IntoIterator<Item = (f64, f64)>) -> f64 {
    let log_success: f64 = offloaded
        .into_iter()
        .map(|(bits, b)| bits * (-b).ln_1p())
        .sum();
    (-log_success.exp_m1()).clamp(0.0, 1.0)
}

pub fn reliability(timeline: &[TaskTimeline]) -> f64 {
    failure_probability(
        timeline
            .iter()
            .filter_map(|t| t.ber.map(|b| (t.upload_bits, b))),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrivacyRecord {
    /// Usage-pattern indicator per decision.
    pub usage: Vec<u8>,
    /// Location indicator per decision.
    pub location: Vec<u8>,
    /// `usage + w * location` per decision.
    pub per_decision: Vec<f64>,
    pub average: f64,
}

/// Per-decision privacy indicators.
///
/// `channel_gain` is the gain at the decision's upload start, `None` for local
/// decisions.
pub fn decision_privacy(
    location: Location,
    redundancy: bool,
    channel_gain: Option<f64>,
    cfg: &ScenarioConfig,
) -> (u8, u8) {
    match (location, channel_gain) {
        (Location::Local, _) => (1, 1),
        (Location::Satellite(_), Some(g)) => {
            let good = g >= cfg.channel_threshold();
            (u8::from(redundancy && good), u8::from(!good))
        }
        (Location::Satellite(_), None) => (0, 0),
    }
}

pub fn privacy(timeline: &[TaskTimeline], cfg: &ScenarioConfig) -> PrivacyRecord {
    let weight = cfg.privacy_weight();
    let mut rec = PrivacyRecord {
        usage: Vec::with_capacity(timeline.len()),
        location: Vec::with_capacity(timeline.len()),
        per_decision: Vec::with_capacity(timeline.len()),
        average: 0.0,
    };
    for t in timeline {
        let (u, l) = decision_privacy(t.location, t.redundancy, t.channel_gain, cfg);
        rec.usage.push(u);
        rec.location.push(l);
        rec.per_decision.push(f64::from(u) + weight * f64::from(l));
    }
    if !timeline.is_empty() {
        rec.average = rec.per_decision.iter().sum::<f64>() / timeline.len() as f64;
    }
    rec
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostSummary {
    pub cost: f64,
    pub feasible_time: bool,
    pub feasible_reliability: bool,
    pub feasible_privacy: bool,
}

impl CostSummary {
    pub fn violations(&self) -> usize {
        [
            self.feasible_time,
            self.feasible_reliability,
            self.feasible_privacy,
        ]
        .iter()
        .filter(|ok| !**ok)
        .count()
    }
}

/// `C = T + mu E` and the three threshold checks.
pub fn total_cost(
    total_time: f64,
    energy: f64,
    failure_prob: f64,
    privacy: f64,
    cfg: &ScenarioConfig,
) -> CostSummary {
    CostSummary {
        cost: total_time + cfg.energy_weight() * energy,
        feasible_time: total_time < cfg.time_threshold_s(),
        feasible_reliability: failure_prob < cfg.failure_threshold(),
        feasible_privacy: privacy >= cfg.privacy_threshold(),
    }
}

/// Why a schedule could not be carried out at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Infeasibility {
    /// The target satellite did not enter the visible arc within the horizon.
    UploadWindow { task: usize, satellite: usize },
    /// No satellite was visible to carry the result back.
    NoLandingSatellite { task: usize, satellite: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub total_time: f64,
    pub energy: Energy,
    pub failure_prob: f64,
    pub privacy: PrivacyRecord,
    pub cost: f64,
    pub feasible_time: bool,
    pub feasible_reliability: bool,
    pub feasible_privacy: bool,
    /// End of the last upload (start of local computation).
    pub upload_end: f64,
    pub offload_end: f64,
    pub local_end: f64,
    /// One entry per decision, in schedule order.
    pub timeline: Vec<TaskTimeline>,
    pub infeasibility: Option<Infeasibility>,
}

impl EvaluationReport {
    pub fn energy_total(&self) -> f64 {
        self.energy.total()
    }

    pub fn privacy_total(&self) -> f64 {
        self.privacy.average
    }

    pub fn is_feasible(&self) -> bool {
        self.infeasibility.is_none()
            && self.feasible_time
            && self.feasible_reliability
            && self.feasible_privacy
    }

    pub fn violations(&self) -> usize {
        self.summary().violations()
    }

    pub fn summary(&self) -> CostSummary {
        CostSummary {
            cost: self.cost,
            feasible_time: self.feasible_time,
            feasible_reliability: self.feasible_reliability,
            feasible_privacy: self.feasible_privacy,
        }
    }

    /// Total order used to pick a best schedule: feasible before infeasible,
    /// then by cost.
    pub fn rank_key(&self) -> (bool, f64) {
        (!self.is_feasible(), self.cost)
    }
}
