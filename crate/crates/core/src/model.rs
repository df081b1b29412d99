//! Tasks, placement decisions and schedules.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ScenarioConfig, BITS_PER_MB};

/// Where a task runs. Encoded as `0` for local and `j + 1` for satellite `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "usize", from = "usize")]
pub enum Location {
    Local,
    Satellite(usize),
}

impl Location {
    pub fn from_code(code: usize) -> Self {
        if code == 0 {
            Location::Local
        } else {
            Location::Satellite(code - 1)
        }
    }

    pub fn code(self) -> usize {
        match self {
            Location::Local => 0,
            Location::Satellite(j) => j + 1,
        }
    }

    pub fn satellite(self) -> Option<usize> {
        match self {
            Location::Local => None,
            Location::Satellite(j) => Some(j),
        }
    }

    pub fn is_offloaded(self) -> bool {
        matches!(self, Location::Satellite(_))
    }
}

impl From<Location> for usize {
    fn from(l: Location) -> usize {
        l.code()
    }
}

impl From<usize> for Location {
    fn from(code: usize) -> Location {
        Location::from_code(code)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: usize,
    pub size_mb: f64,
}

impl Task {
    pub fn from_config(cfg: &ScenarioConfig) -> Vec<Task> {
        (0..cfg.num_tasks())
            .map(|id| Task {
                id,
                size_mb: cfg.task_size_mb(id),
            })
            .collect()
    }

    /// Bits put on the uplink, including redundancy padding.
    pub fn upload_bits(&self, redundancy: bool, cfg: &ScenarioConfig) -> f64 {
        let pad = if redundancy { cfg.redundancy_ratio() } else { 0.0 };
        self.size_mb * (1.0 + pad) * BITS_PER_MB
    }
}

/// One entry of a schedule: run `task` at `location`, padding the upload when
/// `redundancy` is set. Ordering is lexicographic on (task, location, redundancy).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Decision {
    pub task: usize,
    pub location: Location,
    pub redundancy: bool,
}

impl Decision {
    pub fn new(task: usize, location: Location, redundancy: bool) -> Self {
        Self {
            task,
            location,
            redundancy,
        }
    }

    pub fn local(task: usize) -> Self {
        Self::new(task, Location::Local, false)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScheduleError {
    #[error("task {task} is out of range for {num_tasks} tasks")]
    TaskOutOfRange { task: usize, num_tasks: usize },
    #[error("task {0} appears more than once")]
    Duplicate(usize),
    #[error("schedule covers {covered} of {num_tasks} tasks")]
    Incomplete { covered: usize, num_tasks: usize },
    #[error("satellite {satellite} is out of range for {num_satellites} satellites")]
    SatelliteOutOfRange {
        satellite: usize,
        num_satellites: usize,
    },
}

/// Ordered decisions over distinct tasks. Order is the uplink transmission order.
///
/// A schedule may be partial (a prefix built by the environment); use
/// [`Schedule::complete`] when every task must be covered exactly once.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    num_tasks: usize,
    decisions: Vec<Decision>,
}

impl Schedule {
    pub fn partial(num_tasks: usize, decisions: Vec<Decision>) -> Result<Self, ScheduleError> {
        let mut seen = vec![false; num_tasks];
        for d in &decisions {
            if d.task >= num_tasks {
                return Err(ScheduleError::TaskOutOfRange {
                    task: d.task,
                    num_tasks,
                });
            }
            if std::mem::replace(&mut seen[d.task], true) {
                return Err(ScheduleError::Duplicate(d.task));
            }
        }
        Ok(Self {
            num_tasks,
            decisions,
        })
    }

    pub fn complete(num_tasks: usize, decisions: Vec<Decision>) -> Result<Self, ScheduleError> {
        let s = Self::partial(num_tasks, decisions)?;
        if !s.is_complete() {
            return Err(ScheduleError::Incomplete {
                covered: s.decisions.len(),
                num_tasks,
            });
        }
        Ok(s)
    }

    /// Every task computed locally, in id order.
    pub fn all_local(num_tasks: usize) -> Self {
        Self {
            num_tasks,
            decisions: (0..num_tasks).map(Decision::local).collect(),
        }
    }

    pub fn num_tasks(&self) -> usize {
        self.num_tasks
    }

    pub fn decisions(&self) -> &[Decision] {
        &self.decisions
    }

    pub fn is_complete(&self) -> bool {
        self.decisions.len() == self.num_tasks
    }

    pub fn len(&self) -> usize {
        self.decisions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decisions.is_empty()
    }

    pub fn contains_task(&self, task: usize) -> bool {
        self.decisions.iter().any(|d| d.task == task)
    }

    /// Appends a decision for a task not yet present.
    pub fn push(&mut self, decision: Decision) -> Result<(), ScheduleError> {
        if decision.task >= self.num_tasks {
            return Err(ScheduleError::TaskOutOfRange {
                task: decision.task,
                num_tasks: self.num_tasks,
            });
        }
        if self.contains_task(decision.task) {
            return Err(ScheduleError::Duplicate(decision.task));
        }
        self.decisions.push(decision);
        Ok(())
    }

    pub fn check_satellites(&self, num_satellites: usize) -> Result<(), ScheduleError> {
        for d in &self.decisions {
            if let Location::Satellite(j) = d.location {
                if j >= num_satellites {
                    return Err(ScheduleError::SatelliteOutOfRange {
                        satellite: j,
                        num_satellites,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Size of the full decision space, `((M+1) * 2)^N * N!`, or `None` on overflow.
pub fn schedule_space_size(num_tasks: usize, num_satellites: usize) -> Option<u128> {
    let per_task = (num_satellites as u128 + 1).checked_mul(2)?;
    let mut total: u128 = 1;
    for k in 1..=num_tasks as u128 {
        total = total.checked_mul(per_task)?.checked_mul(k)?;
    }
    Some(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn location_codes() {
        assert_eq!(Location::from_code(0), Location::Local);
        assert_eq!(Location::from_code(3), Location::Satellite(2));
        assert_eq!(Location::Satellite(2).code(), 3);
        assert!(Location::Local < Location::Satellite(0));
    }

    #[test]
    fn schedule_validation() {
        let d = |t, c| Decision::new(t, Location::from_code(c), false);
        assert!(Schedule::complete(2, vec![d(1, 0), d(0, 1)]).is_ok());
        assert_eq!(
            Schedule::complete(2, vec![d(1, 0), d(1, 1)]),
            Err(ScheduleError::Duplicate(1))
        );
        assert_eq!(
            Schedule::complete(2, vec![d(1, 0)]),
            Err(ScheduleError::Incomplete {
                covered: 1,
                num_tasks: 2
            })
        );
        assert!(matches!(
            Schedule::partial(2, vec![d(2, 0)]),
            Err(ScheduleError::TaskOutOfRange { .. })
        ));
        let s = Schedule::complete(1, vec![d(0, 4)]).unwrap();
        assert!(s.check_satellites(3).is_err());
        assert!(s.check_satellites(4).is_ok());
    }

    #[test]
    fn space_size_closed_form() {
        assert_eq!(schedule_space_size(1, 1), Some(4));
        assert_eq!(schedule_space_size(2, 1), Some(32));
        assert_eq!(schedule_space_size(3, 3), Some(3072));
        assert_eq!(schedule_space_size(90, 25), None);
    }

    #[test]
    fn location_serializes_as_code() {
        let d = Decision::new(2, Location::Satellite(4), true);
        let json = serde_json::to_string(&d).unwrap();
        assert_eq!(json, r#"{"task":2,"location":5,"redundancy":true}"#);
        let back: Decision = serde_json::from_str(&json).unwrap();
        assert_eq!(back, d);
    }
}
