//! Satellite kinematics in a single orbital plane.
//!
//! Satellite `j` starts at `anchor + j * spacing` (clockwise-positive geocentric
//! angle) and all satellites rotate at the same angular speed, so pairwise
//! spacing is preserved for every `t`.

use crate::channel::{self, wrap_angle, LinkState};
use crate::config::ScenarioConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SatelliteState {
    pub index: usize,
    /// Geocentric angle in [0, 2pi).
    pub angle: f64,
    /// Time at which the satellite's server becomes free.
    pub busy_until: f64,
}

/// Migration direction along the ring of satellite indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Towards smaller geocentric angles, i.e. decreasing index.
    Counterclockwise,
    /// Towards larger geocentric angles, i.e. increasing index.
    Clockwise,
}

#[derive(Debug, Clone)]
pub struct Constellation<'a> {
    cfg: &'a ScenarioConfig,
    /// Signed angular velocity, negative when moving clockwise.
    velocity: f64,
}

impl<'a> Constellation<'a> {
    pub fn new(cfg: &'a ScenarioConfig) -> Self {
        let speed = cfg.angular_speed();
        let velocity = if cfg.clockwise() { -speed } else { speed };
        Self { cfg, velocity }
    }

    pub fn len(&self) -> usize {
        self.cfg.num_satellites()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn initial_angle(&self, sat: usize) -> f64 {
        self.cfg.anchor_rad() + sat as f64 * self.cfg.sat_spacing_rad()
    }

    pub fn angle_at(&self, sat: usize, t: f64) -> f64 {
        wrap_angle(self.initial_angle(sat) + self.velocity * t)
    }

    pub fn is_visible_at(&self, sat: usize, t: f64) -> bool {
        channel::is_visible(self.angle_at(sat, t), self.cfg)
    }

    pub fn link_at(&self, sat: usize, t: f64) -> LinkState {
        LinkState::at_angle(self.angle_at(sat, t), self.cfg)
    }

    pub fn states_at(&self, t: f64, busy_until: &[f64]) -> Vec<SatelliteState> {
        (0..self.len())
            .map(|j| SatelliteState {
                index: j,
                angle: self.angle_at(j, t),
                busy_until: busy_until.get(j).copied().unwrap_or(0.0),
            })
            .collect()
    }

    pub fn visible_at(&self, t: f64) -> Vec<usize> {
        (0..self.len()).filter(|&j| self.is_visible_at(j, t)).collect()
    }

    /// Earliest instant `>= t` at which `sat` is visible, if it comes within
    /// `horizon` seconds.
    pub fn next_visible_time(&self, sat: usize, t: f64, horizon: f64) -> Option<f64> {
        if self.is_visible_at(sat, t) {
            return Some(t);
        }
        let speed = self.velocity.abs();
        if speed == 0.0 {
            return None;
        }
        let gamma = self.angle_at(sat, t);
        let gmax = self.cfg.visibility_half_angle();
        let travel = if self.velocity < 0.0 {
            gamma - gmax
        } else {
            std::f64::consts::TAU - gmax - gamma
        };
        let mut candidate = t + travel / speed;
        let mut nudge = 1e-9 * (1.0 + candidate.abs());
        for _ in 0..64 {
            if self.is_visible_at(sat, candidate) {
                break;
            }
            candidate += nudge;
            nudge *= 2.0;
        }
        (candidate - t <= horizon && self.is_visible_at(sat, candidate)).then_some(candidate)
    }

    /// Migration direction for a result sitting on `sat` at time `t`:
    /// counterclockwise when the satellite is in (0, pi), clockwise otherwise.
    pub fn migration_direction(&self, sat: usize, t: f64) -> Direction {
        let gamma = self.angle_at(sat, t);
        if gamma > 0.0 && gamma < std::f64::consts::PI {
            Direction::Counterclockwise
        } else {
            Direction::Clockwise
        }
    }

    /// Nearest visible satellite reached from `sat` by stepping in the
    /// migration direction (indices wrap modulo M). Returns `(landing, hops)`.
    pub fn landing_satellite(&self, sat: usize, t: f64) -> Option<(usize, usize)> {
        if self.is_visible_at(sat, t) {
            return Some((sat, 0));
        }
        let m = self.len();
        let dir = self.migration_direction(sat, t);
        (1..m).find_map(|hops| {
            let j = match dir {
                Direction::Counterclockwise => (sat + m - hops % m) % m,
                Direction::Clockwise => (sat + hops) % m,
            };
            self.is_visible_at(j, t).then_some((j, hops))
        })
    }
}
