//! Deterministic evaluation of a schedule into a per-task timeline.
//!
//! Offloaded tasks share one uplink and are sent in schedule order; each
//! satellite runs a single-core FCFS server. Results whose satellite has left
//! the visible arc are migrated hop by hop over inter-satellite links to the
//! nearest visible neighbour before the backhaul. Local tasks start once the
//! last upload finishes and run back to back.

use std::io::Write;

use serde::Serialize;
use thiserror::Error;

use crate::config::{ScenarioConfig, BITS_PER_MB};
use crate::constellation::Constellation;
use crate::metrics::{self, EvaluationReport, Infeasibility, PrivacyRecord};
use crate::model::{Location, Schedule, ScheduleError, Task};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("schedule has {schedule} tasks but the scenario has {scenario}")]
    TaskCountMismatch { schedule: usize, scenario: usize },
    #[error("satellite {0} is not visible at the upload instant")]
    NotVisible(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TaskTimeline {
    pub task: usize,
    pub size_mb: f64,
    pub location: Location,
    pub redundancy: bool,
    pub upload_start: f64,
    pub upload_end: f64,
    pub comp_start: f64,
    pub comp_end: f64,
    pub migrate_end: f64,
    pub download_end: f64,
    /// Inter-satellite hops taken by the result.
    pub hops: usize,
    /// Satellite that sends the result back.
    pub landing: Option<usize>,
    /// Channel gain at upload start (offloaded tasks only).
    pub channel_gain: Option<f64>,
    /// Bit error rate at upload start (offloaded tasks only).
    pub ber: Option<f64>,
    pub upload_bits: f64,
}

impl TaskTimeline {
    /// A task computed on the UE between `start` and `end`.
    pub fn local(task: usize, size_mb: f64, start: f64, end: f64) -> Self {
        Self {
            task,
            size_mb,
            location: Location::Local,
            redundancy: false,
            upload_start: start,
            upload_end: start,
            comp_start: start,
            comp_end: end,
            migrate_end: end,
            download_end: end,
            hops: 0,
            landing: None,
            channel_gain: None,
            ber: None,
            upload_bits: 0.0,
        }
    }

    pub fn completion(&self) -> f64 {
        self.download_end
    }
}

/// Upload duration for `task` to satellite `sat` starting at `t`, with the
/// rate frozen at `t`.
pub fn upload_time(
    task: &Task,
    redundancy: bool,
    sat: usize,
    t: f64,
    cfg: &ScenarioConfig,
) -> Result<f64, EvalError> {
    let constellation = Constellation::new(cfg);
    if !constellation.is_visible_at(sat, t) {
        return Err(EvalError::NotVisible(sat));
    }
    let rate = constellation.link_at(sat, t).rate_bps;
    Ok(task.upload_bits(redundancy, cfg) / rate)
}

/// Computation time on a server of the given speed. Redundancy never inflates it.
pub fn compute_time(task: &Task, speed_mbps: f64) -> f64 {
    task.size_mb / speed_mbps
}

/// Evaluates a complete schedule.
pub fn evaluate_schedule(
    schedule: &Schedule,
    cfg: &ScenarioConfig,
) -> Result<EvaluationReport, EvalError> {
    if !schedule.is_complete() {
        return Err(ScheduleError::Incomplete {
            covered: schedule.len(),
            num_tasks: schedule.num_tasks(),
        }
        .into());
    }
    evaluate_partial(schedule, cfg)
}

/// Evaluates the decisions made so far; tasks not in the schedule are ignored.
pub fn evaluate_partial(
    schedule: &Schedule,
    cfg: &ScenarioConfig,
) -> Result<EvaluationReport, EvalError> {
    if schedule.num_tasks() != cfg.num_tasks() {
        return Err(EvalError::TaskCountMismatch {
            schedule: schedule.num_tasks(),
            scenario: cfg.num_tasks(),
        });
    }
    schedule.check_satellites(cfg.num_satellites())?;

    let constellation = Constellation::new(cfg);
    let horizon = cfg.visibility_horizon_s();
    let mut busy_until = vec![0.0f64; cfg.num_satellites()];
    let mut uplink_free = 0.0f64;
    let mut slots: Vec<Option<TaskTimeline>> = vec![None; schedule.len()];
    let mut infeasibility = None;

    for (slot, d) in schedule.decisions().iter().enumerate() {
        let Location::Satellite(sat) = d.location else {
            continue;
        };
        let task = Task {
            id: d.task,
            size_mb: cfg.task_size_mb(d.task),
        };
        let Some(upload_start) = constellation.next_visible_time(sat, uplink_free, horizon) else {
            infeasibility = Some(Infeasibility::UploadWindow {
                task: d.task,
                satellite: sat,
            });
            break;
        };
        let link = constellation.link_at(sat, upload_start);
        let upload_bits = task.upload_bits(d.redundancy, cfg);
        let upload_end = upload_start + upload_bits / link.rate_bps;

        let comp_start = busy_until[sat].max(upload_end);
        let comp_end = comp_start + compute_time(&task, cfg.sat_compute_mbps(sat));
        busy_until[sat] = comp_end;

        let Some((landing, hops)) = constellation.landing_satellite(sat, comp_end) else {
            infeasibility = Some(Infeasibility::NoLandingSatellite {
                task: d.task,
                satellite: sat,
            });
            break;
        };
        let result_mb = cfg.result_size_ratio() * task.size_mb;
        let migrate_end = comp_end + hops as f64 * result_mb / cfg.isl_rate_mbps();
        let backhaul_rate = constellation.link_at(landing, migrate_end).rate_bps;
        let download_end = migrate_end + result_mb * BITS_PER_MB / backhaul_rate;

        slots[slot] = Some(TaskTimeline {
            task: d.task,
            size_mb: task.size_mb,
            location: d.location,
            redundancy: d.redundancy,
            upload_start,
            upload_end,
            comp_start,
            comp_end,
            migrate_end,
            download_end,
            hops,
            landing: Some(landing),
            channel_gain: Some(link.gain),
            ber: Some(link.ber),
            upload_bits,
        });
        uplink_free = upload_end;
    }

    if let Some(reason) = infeasibility {
        let done = slots.into_iter().flatten().collect();
        return Ok(infeasible_report(schedule.len(), done, reason));
    }

    let upload_end = uplink_free;
    let offload_end = slots
        .iter()
        .flatten()
        .map(TaskTimeline::completion)
        .fold(0.0, f64::max);

    let mut local_clock = upload_end;
    for (slot, d) in schedule.decisions().iter().enumerate() {
        if d.location == Location::Local {
            let size = cfg.task_size_mb(d.task);
            let start = local_clock;
            local_clock = start + size / cfg.ue_compute_mbps();
            slots[slot] = Some(TaskTimeline::local(d.task, size, start, local_clock));
        }
    }
    let local_end = local_clock;
    let timeline: Vec<TaskTimeline> = slots.into_iter().flatten().collect();

    let total_time = offload_end.max(local_end);
    let energy = metrics::energy(&timeline, cfg);
    let failure_prob = metrics::reliability(&timeline);
    let privacy = metrics::privacy(&timeline, cfg);
    let summary = metrics::total_cost(
        total_time,
        energy.total(),
        failure_prob,
        privacy.average,
        cfg,
    );

    Ok(EvaluationReport {
        total_time,
        energy,
        failure_prob,
        privacy,
        cost: summary.cost,
        feasible_time: summary.feasible_time,
        feasible_reliability: summary.feasible_reliability,
        feasible_privacy: summary.feasible_privacy,
        upload_end,
        offload_end,
        local_end,
        timeline,
        infeasibility: None,
    })
}

fn infeasible_report(
    n: usize,
    timeline: Vec<TaskTimeline>,
    reason: Infeasibility,
) -> EvaluationReport {
    EvaluationReport {
        total_time: f64::INFINITY,
        energy: metrics::Energy {
            compute: f64::INFINITY,
            transmit: f64::INFINITY,
        },
        failure_prob: 1.0,
        privacy: PrivacyRecord {
            usage: vec![0; n],
            location: vec![0; n],
            per_decision: vec![0.0; n],
            average: 0.0,
        },
        cost: f64::INFINITY,
        feasible_time: false,
        feasible_reliability: false,
        feasible_privacy: false,
        upload_end: f64::INFINITY,
        offload_end: f64::INFINITY,
        local_end: f64::INFINITY,
        timeline,
        infeasibility: Some(reason),
    }
}

/// Writes one CSV row per task with every timestamp.
pub fn write_timeline_csv(report: &EvaluationReport, mut out: impl Write) -> std::io::Result<()> {
    writeln!(
        out,
        "task,size_mb,location,redundancy,upload_start,upload_end,comp_start,comp_end,migrate_end,download_end,hops,landing"
    )?;
    for t in &report.timeline {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            t.task,
            t.size_mb,
            t.location.code(),
            u8::from(t.redundancy),
            t.upload_start,
            t.upload_end,
            t.comp_start,
            t.comp_end,
            t.migrate_end,
            t.download_end,
            t.hops,
            t.landing.map(|j| (j + 1).to_string()).unwrap_or_default(),
        )?;
    }
    Ok(())
}
