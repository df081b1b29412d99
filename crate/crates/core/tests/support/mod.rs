//! Shared helpers for integration tests: a reference event-queue simulator,
//! an exhaustive schedule enumerator and random scenario generators.
#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use rand::Rng;
use satoffload::config::{ScenarioConfig, TINY_SCENARIO};
use satoffload::constellation::Constellation;
use satoffload::{Decision, Location};

/// Timestamps of one decision, in schedule order.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Stamps {
    pub upload_start: f64,
    pub upload_end: f64,
    pub comp_start: f64,
    pub comp_end: f64,
    pub migrate_end: f64,
    pub download_end: f64,
    pub hops: usize,
    pub landing: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub stamps: Vec<Stamps>,
    pub total_time: f64,
    pub energy: f64,
    pub failure_prob: f64,
    pub privacy: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    UploadDone,
    CompDone,
    MigrateDone,
    DownloadDone,
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    seq: u64,
    kind: Kind,
    slot: usize,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    // min-heap on (time, seq)
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.seq.cmp(&self.seq))
    }
}

struct Sim<'a> {
    cfg: &'a ScenarioConfig,
    sky: Constellation<'a>,
    decisions: &'a [Decision],
    heap: BinaryHeap<Event>,
    seq: u64,
    stamps: Vec<Stamps>,
    gains: Vec<Option<f64>>,
    bers: Vec<f64>,
    bits: Vec<f64>,
    queues: Vec<VecDeque<usize>>,
    busy: Vec<bool>,
    pending_uploads: VecDeque<usize>,
}

impl Sim<'_> {
    fn push(&mut self, time: f64, kind: Kind, slot: usize) {
        self.seq += 1;
        self.heap.push(Event {
            time,
            seq: self.seq,
            kind,
            slot,
        });
    }

    fn sat(&self, slot: usize) -> usize {
        self.decisions[slot].location.satellite().unwrap()
    }

    fn size(&self, slot: usize) -> f64 {
        self.cfg.task_size_mb(self.decisions[slot].task)
    }

    /// Starts the next queued upload at or after `free`. `false` when the
    /// target never becomes visible.
    fn start_upload(&mut self, free: f64) -> bool {
        let Some(slot) = self.pending_uploads.pop_front() else {
            return true;
        };
        let sat = self.sat(slot);
        let Some(start) = self
            .sky
            .next_visible_time(sat, free, self.cfg.visibility_horizon_s())
        else {
            return false;
        };
        let link = self.sky.link_at(sat, start);
        let pad = if self.decisions[slot].redundancy {
            self.cfg.redundancy_ratio()
        } else {
            0.0
        };
        let bits = self.size(slot) * (1.0 + pad) * 8.0e6;
        self.stamps[slot].upload_start = start;
        self.stamps[slot].upload_end = start + bits / link.rate_bps;
        self.gains[slot] = Some(link.gain);
        self.bers[slot] = link.ber;
        self.bits[slot] = bits;
        self.push(self.stamps[slot].upload_end, Kind::UploadDone, slot);
        true
    }

    fn start_compute(&mut self, slot: usize, now: f64) {
        let sat = self.sat(slot);
        self.busy[sat] = true;
        self.stamps[slot].comp_start = now;
        self.stamps[slot].comp_end = now + self.size(slot) / self.cfg.sat_compute_mbps(sat);
        self.push(self.stamps[slot].comp_end, Kind::CompDone, slot);
    }
}

/// Evaluates `decisions` with an event queue. `None` when the schedule cannot
/// be carried out (a target never comes into view, or no satellite is visible
/// to return a result).
pub fn event_simulate(decisions: &[Decision], cfg: &ScenarioConfig) -> Option<Outcome> {
    let n = decisions.len();
    let mut sim = Sim {
        cfg,
        sky: Constellation::new(cfg),
        decisions,
        heap: BinaryHeap::new(),
        seq: 0,
        stamps: vec![Stamps::default(); n],
        gains: vec![None; n],
        bers: vec![0.0; n],
        bits: vec![0.0; n],
        queues: vec![VecDeque::new(); cfg.num_satellites()],
        busy: vec![false; cfg.num_satellites()],
        pending_uploads: (0..n)
            .filter(|&i| decisions[i].location.is_offloaded())
            .collect(),
    };
    let mut uplink_done = 0.0;
    let mut offload_end = 0.0f64;
    if !sim.start_upload(0.0) {
        return None;
    }
    while let Some(ev) = sim.heap.pop() {
        let slot = ev.slot;
        match ev.kind {
            Kind::UploadDone => {
                uplink_done = ev.time;
                if !sim.start_upload(ev.time) {
                    return None;
                }
                let sat = sim.sat(slot);
                if sim.busy[sat] {
                    sim.queues[sat].push_back(slot);
                } else {
                    sim.start_compute(slot, ev.time);
                }
            }
            Kind::CompDone => {
                let sat = sim.sat(slot);
                sim.busy[sat] = false;
                if let Some(next) = sim.queues[sat].pop_front() {
                    sim.start_compute(next, ev.time);
                }
                let (landing, hops) = sim.sky.landing_satellite(sat, ev.time)?;
                let result = cfg.result_size_ratio() * sim.size(slot);
                sim.stamps[slot].hops = hops;
                sim.stamps[slot].landing = Some(landing);
                sim.stamps[slot].migrate_end =
                    ev.time + hops as f64 * result / cfg.isl_rate_mbps();
                sim.push(sim.stamps[slot].migrate_end, Kind::MigrateDone, slot);
            }
            Kind::MigrateDone => {
                let landing = sim.stamps[slot].landing.unwrap();
                let rate = sim.sky.link_at(landing, ev.time).rate_bps;
                let result = cfg.result_size_ratio() * sim.size(slot);
                sim.stamps[slot].download_end = ev.time + result * 8.0e6 / rate;
                sim.push(sim.stamps[slot].download_end, Kind::DownloadDone, slot);
            }
            Kind::DownloadDone => offload_end = offload_end.max(ev.time),
        }
    }

    // the UE starts its own work once the uplink has gone quiet
    let mut clock = uplink_done;
    let mut local_seconds = 0.0;
    for (i, d) in decisions.iter().enumerate() {
        if d.location == Location::Local {
            let dt = cfg.task_size_mb(d.task) / cfg.ue_compute_mbps();
            let end = clock + dt;
            sim.stamps[i] = Stamps {
                upload_start: clock,
                upload_end: clock,
                comp_start: clock,
                comp_end: end,
                migrate_end: end,
                download_end: end,
                hops: 0,
                landing: None,
            };
            clock = end;
            local_seconds += dt;
        }
    }
    let total_time = offload_end.max(clock);

    let mut upload_seconds = 0.0;
    let mut log_success = 0.0;
    let mut privacy = 0.0;
    for (i, d) in decisions.iter().enumerate() {
        match sim.gains[i] {
            None => privacy += 1.0 + cfg.privacy_weight(),
            Some(g) => {
                upload_seconds += sim.stamps[i].upload_end - sim.stamps[i].upload_start;
                log_success += sim.bits[i] * (-sim.bers[i]).ln_1p();
                let good = g >= cfg.channel_threshold();
                let usage = if d.redundancy && good { 1.0 } else { 0.0 };
                let loc = if good { 0.0 } else { 1.0 };
                privacy += usage + cfg.privacy_weight() * loc;
            }
        }
    }
    let energy = cfg.ue_compute_power_w() * local_seconds + cfg.ue_tx_power_w() * upload_seconds;
    Some(Outcome {
        stamps: sim.stamps,
        total_time,
        energy,
        failure_prob: -log_success.exp_m1(),
        privacy: if n == 0 { 0.0 } else { privacy / n as f64 },
        cost: total_time + cfg.energy_weight() * energy,
    })
}

/// Every complete schedule of `n` tasks over `m` satellites: all task orders
/// times all (location, redundancy) choices.
pub fn all_schedules(n: usize, m: usize) -> Vec<Vec<Decision>> {
    fn perms(rest: &mut Vec<usize>, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rest.is_empty() {
            out.push(cur.clone());
            return;
        }
        for i in 0..rest.len() {
            let t = rest.remove(i);
            cur.push(t);
            perms(rest, cur, out);
            cur.pop();
            rest.insert(i, t);
        }
    }
    let mut orders = Vec::new();
    perms(&mut (0..n).collect(), &mut Vec::new(), &mut orders);
    let choices: Vec<(Location, bool)> = (0..=m)
        .flat_map(|c| [false, true].map(|r| (Location::from_code(c), r)))
        .collect();
    let mut out = Vec::new();
    for order in orders {
        let mut idx = vec![0usize; n];
        loop {
            out.push(
                order
                    .iter()
                    .zip(&idx)
                    .map(|(&t, &k)| Decision::new(t, choices[k].0, choices[k].1))
                    .collect(),
            );
            let mut p = 0;
            while p < n {
                idx[p] += 1;
                if idx[p] < choices.len() {
                    break;
                }
                idx[p] = 0;
                p += 1;
            }
            if p == n {
                break;
            }
        }
    }
    out
}

pub fn tiny() -> ScenarioConfig {
    ScenarioConfig::from_toml_str(TINY_SCENARIO).unwrap()
}

/// A small scenario with randomized geometry and workload. Orbits are sped
/// up so satellites leave the arc mid-task and results need migration.
pub fn random_small_config(rng: &mut impl Rng, n: usize, m: usize) -> ScenarioConfig {
    tiny()
        .modified(|f| {
            f.workload.num_tasks = n;
            f.workload.task_sizes_mb = (0..n).map(|_| rng.gen_range(10.0..1500.0)).collect();
            f.workload.result_size_ratio = rng.gen_range(0.01..0.5);
            f.workload.redundancy_ratio = rng.gen_range(0.0..0.3);
            f.ue.compute_mbps = rng.gen_range(10.0..60.0);
            f.channel.calibration_snr_db = rng.gen_range(5.0..25.0);
            f.orbit.num_satellites = m;
            f.orbit.spacing_deg = rng.gen_range(1.0..40.0);
            f.orbit.anchor_deg = rng.gen_range(0.0..360.0);
            f.orbit.clockwise = rng.gen_bool(0.5);
            f.orbit.angular_speed_rad_s = Some(rng.gen_range(1e-3..3e-2));
            f.orbit.sat_compute_mbps = (0..m).map(|_| rng.gen_range(5.0..100.0)).collect();
            f.orbit.isl_rate_mbps = rng.gen_range(50.0..20000.0);
            f.objective.energy_weight = rng.gen_range(0.0..2.0);
            f.objective.privacy_weight = rng.gen_range(0.0..2.0);
        })
        .unwrap()
}

/// A larger random scenario for invariant checks.
pub fn random_config(rng: &mut impl Rng, n: usize, m: usize) -> ScenarioConfig {
    random_small_config(rng, n, m)
        .modified(|f| {
            f.orbit.angular_speed_rad_s = Some(rng.gen_range(1e-4..5e-3));
            f.orbit.spacing_deg = rng.gen_range(0.5..15.0);
        })
        .unwrap()
}
