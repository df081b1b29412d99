//! Scenario configuration.
//!
//! A scenario file is TOML with one table per parameter group. Values are kept
//! in the units a human writes them in (dBm, degrees, megabytes, kilometers);
//! every consumer reads them through the accessors on [`ScenarioConfig`], which
//! return SI-converted values.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// 1 MB = 10^6 bytes = 8 * 10^6 bits.
pub const BITS_PER_MB: f64 = 8.0e6;

/// Standard gravitational parameter of the Earth, km^3/s^2.
pub const EARTH_MU_KM3_S2: f64 = 398_600.441_8;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read scenario {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("scenario does not parse: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("scenario does not serialize: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Workload {
    pub num_tasks: usize,
    /// Sizes in MB, assigned to tasks cyclically (task i gets `task_sizes_mb[i % len]`).
    pub task_sizes_mb: Vec<f64>,
    /// Fraction of the task size returned as the computation result.
    #[serde(default = "default_result_ratio")]
    pub result_size_ratio: f64,
    /// Extra fraction transmitted when redundancy is attached.
    #[serde(default = "default_redundancy_ratio")]
    pub redundancy_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UeParams {
    pub tx_power_w: f64,
    pub compute_mbps: f64,
    pub cpu_freq_ghz: f64,
    /// Watts per GHz^3.
    pub hardware_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelParams {
    pub bandwidth_hz: f64,
    pub noise_power_w: f64,
    pub ref_gain_dbm: f64,
    /// Aggregate link-budget multiplier. When absent it is calibrated so the
    /// SNR at zenith equals `calibration_snr_db`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system_gain: Option<f64>,
    #[serde(default = "default_calibration_snr_db")]
    pub calibration_snr_db: f64,
    /// Good/poor channel threshold in calibrated gain units. When absent it is
    /// the gain at `threshold_ref_fraction * visibility_half_angle`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel_threshold: Option<f64>,
    #[serde(default = "default_threshold_ref_fraction")]
    pub threshold_ref_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitParams {
    pub num_satellites: usize,
    pub earth_radius_km: f64,
    pub altitude_km: f64,
    pub spacing_deg: f64,
    /// Geocentric angle of satellite 0 at t = 0.
    pub anchor_deg: f64,
    /// Defaults to the Keplerian rate for the configured altitude.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angular_speed_rad_s: Option<f64>,
    /// Satellites move clockwise (geocentric angles decrease over time).
    #[serde(default = "default_true")]
    pub clockwise: bool,
    /// Defaults to the horizon-limited half angle arccos(R / (R + H)).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visibility_half_angle_deg: Option<f64>,
    /// Per-satellite compute speed in MB/s, assigned cyclically.
    pub sat_compute_mbps: Vec<f64>,
    pub isl_rate_mbps: f64,
    /// How long an upload may wait for its target to come into view.
    /// Defaults to one orbital period.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visibility_horizon_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveParams {
    pub privacy_weight: f64,
    pub energy_weight: f64,
    pub time_threshold_s: f64,
    pub failure_threshold: f64,
    pub privacy_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RlParams {
    #[serde(default)]
    pub reward_constant: f64,
    #[serde(default = "default_penalty")]
    pub terminal_penalty: f64,
    #[serde(default)]
    pub rng_seed: u64,
}

impl Default for RlParams {
    fn default() -> Self {
        Self {
            reward_constant: 0.0,
            terminal_penalty: default_penalty(),
            rng_seed: 0,
        }
    }
}

fn default_result_ratio() -> f64 {
    0.1
}
fn default_redundancy_ratio() -> f64 {
    0.1
}
fn default_calibration_snr_db() -> f64 {
    15.0
}
fn default_threshold_ref_fraction() -> f64 {
    0.5
}
fn default_true() -> bool {
    true
}
fn default_penalty() -> f64 {
    100.0
}

/// On-disk scenario representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub workload: Workload,
    pub ue: UeParams,
    pub channel: ChannelParams,
    pub orbit: OrbitParams,
    pub objective: ObjectiveParams,
    #[serde(default)]
    pub rl: RlParams,
}

/// Values derived once at load time.
#[derive(Debug, Clone, PartialEq)]
struct Derived {
    ref_gain_w: f64,
    system_gain: f64,
    channel_threshold: f64,
    visibility_half_angle: f64,
    angular_speed: f64,
    orbital_period: f64,
    visibility_horizon: f64,
}

/// A validated scenario. Immutable; share it freely across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    file: ScenarioFile,
    derived: Derived,
}

/// Converts a power level in dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) / 1000.0
}

fn positive(field: &'static str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("must be finite and > 0, got {v}")))
    }
}

fn unit_interval(field: &'static str, v: f64) -> Result<(), ConfigError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(invalid(field, format!("must lie in [0, 1], got {v}")))
    }
}

impl ScenarioConfig {
    pub fn from_file(file: ScenarioFile) -> Result<Self, ConfigError> {
        let w = &file.workload;
        if w.num_tasks == 0 {
            return Err(invalid("workload.num_tasks", "must be >= 1"));
        }
        if w.task_sizes_mb.is_empty() {
            return Err(invalid("workload.task_sizes_mb", "must not be empty"));
        }
        for &s in &w.task_sizes_mb {
            positive("workload.task_sizes_mb", s)?;
        }
        unit_interval("workload.result_size_ratio", w.result_size_ratio)?;
        unit_interval("workload.redundancy_ratio", w.redundancy_ratio)?;

        let ue = &file.ue;
        positive("ue.tx_power_w", ue.tx_power_w)?;
        positive("ue.compute_mbps", ue.compute_mbps)?;
        positive("ue.cpu_freq_ghz", ue.cpu_freq_ghz)?;
        positive("ue.hardware_factor", ue.hardware_factor)?;

        let ch = &file.channel;
        positive("channel.bandwidth_hz", ch.bandwidth_hz)?;
        positive("channel.noise_power_w", ch.noise_power_w)?;
        if !ch.ref_gain_dbm.is_finite() {
            return Err(invalid("channel.ref_gain_dbm", "must be finite"));
        }
        if let Some(g) = ch.system_gain {
            positive("channel.system_gain", g)?;
        }
        if !ch.calibration_snr_db.is_finite() {
            return Err(invalid("channel.calibration_snr_db", "must be finite"));
        }
        if let Some(w) = ch.channel_threshold {
            if !(w.is_finite() && w >= 0.0) {
                return Err(invalid("channel.channel_threshold", "must be finite and >= 0"));
            }
        }
        unit_interval("channel.threshold_ref_fraction", ch.threshold_ref_fraction)?;

        let o = &file.orbit;
        if o.num_satellites == 0 {
            return Err(invalid("orbit.num_satellites", "must be >= 1"));
        }
        positive("orbit.earth_radius_km", o.earth_radius_km)?;
        positive("orbit.altitude_km", o.altitude_km)?;
        positive("orbit.spacing_deg", o.spacing_deg)?;
        if !o.anchor_deg.is_finite() {
            return Err(invalid("orbit.anchor_deg", "must be finite"));
        }
        if let Some(v) = o.angular_speed_rad_s {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid("orbit.angular_speed_rad_s", "must be finite and >= 0"));
            }
        }
        if o.sat_compute_mbps.is_empty() {
            return Err(invalid("orbit.sat_compute_mbps", "must not be empty"));
        }
        for &b in &o.sat_compute_mbps {
            positive("orbit.sat_compute_mbps", b)?;
        }
        positive("orbit.isl_rate_mbps", o.isl_rate_mbps)?;
        if let Some(h) = o.visibility_horizon_s {
            if h.is_nan() || h < 0.0 {
                return Err(invalid("orbit.visibility_horizon_s", "must be >= 0"));
            }
        }

        let obj = &file.objective;
        if !(obj.privacy_weight.is_finite() && obj.privacy_weight >= 0.0) {
            return Err(invalid("objective.privacy_weight", "must be finite and >= 0"));
        }
        if !(obj.energy_weight.is_finite() && obj.energy_weight >= 0.0) {
            return Err(invalid("objective.energy_weight", "must be finite and >= 0"));
        }
        positive("objective.time_threshold_s", obj.time_threshold_s)?;
        if !(obj.failure_threshold > 0.0 && obj.failure_threshold < 1.0) {
            return Err(invalid("objective.failure_threshold", "must lie in (0, 1)"));
        }
        if !(obj.privacy_threshold.is_finite() && obj.privacy_threshold >= 0.0) {
            return Err(invalid("objective.privacy_threshold", "must be >= 0"));
        }

        let radius_km = o.earth_radius_km;
        let orbit_km = radius_km + o.altitude_km;
        let visibility_half_angle = match o.visibility_half_angle_deg {
            Some(d) => d.to_radians(),
            None => (radius_km / orbit_km).acos(),
        };
        if !(visibility_half_angle > 0.0 && visibility_half_angle <= PI / 2.0) {
            return Err(invalid(
                "orbit.visibility_half_angle_deg",
                format!("must lie in (0, 90], got {}", visibility_half_angle.to_degrees()),
            ));
        }
        let angular_speed = o
            .angular_speed_rad_s
            .unwrap_or_else(|| (EARTH_MU_KM3_S2 / orbit_km.powi(3)).sqrt());
        let orbital_period = if angular_speed > 0.0 {
            2.0 * PI / angular_speed
        } else {
            f64::INFINITY
        };
        let visibility_horizon = o.visibility_horizon_s.unwrap_or(orbital_period);

        let ref_gain_w = dbm_to_watts(ch.ref_gain_dbm);
        let altitude_m = o.altitude_km * 1000.0;
        let system_gain = ch.system_gain.unwrap_or_else(|| {
            let target = 10f64.powf(ch.calibration_snr_db / 10.0);
            let raw_snr = ue.tx_power_w * ref_gain_w / (altitude_m * altitude_m) / ch.noise_power_w;
            target / raw_snr
        });

        let mut derived = Derived {
            ref_gain_w,
            system_gain,
            channel_threshold: 0.0,
            visibility_half_angle,
            angular_speed,
            orbital_period,
            visibility_horizon,
        };
        derived.channel_threshold = match ch.channel_threshold {
            Some(w) => w,
            None => {
                let partial = ScenarioConfig {
                    file: file.clone(),
                    derived: derived.clone(),
                };
                let gamma = ch.threshold_ref_fraction * visibility_half_angle;
                crate::channel::channel_gain(crate::channel::distance_km(gamma, &partial), &partial)
            }
        };

        Ok(Self { file, derived })
    }

    pub fn from_toml_str(source: &str) -> Result<Self, ConfigError> {
        let file: ScenarioFile = toml::from_str(source)?;
        Self::from_file(file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string(&self.file)?)
    }

    /// Short hex digest of the canonical serialized scenario.
    pub fn scenario_hash(&self) -> String {
        let canonical = self.to_toml_string().unwrap_or_default();
        let digest = Sha256::digest(canonical.as_bytes());
        let mut out = String::with_capacity(16);
        for b in &digest[..8] {
            let _ = write!(out, "{b:02x}");
        }
        out
    }

    pub fn file(&self) -> &ScenarioFile {
        &self.file
    }

    /// Applies `edit` to a copy of the on-disk form and revalidates it.
    pub fn modified(&self, edit: impl FnOnce(&mut ScenarioFile)) -> Result<Self, ConfigError> {
        let mut file = self.file.clone();
        edit(&mut file);
        Self::from_file(file)
    }

    pub fn num_tasks(&self) -> usize {
        self.file.workload.num_tasks
    }

    pub fn num_satellites(&self) -> usize {
        self.file.orbit.num_satellites
    }

    pub fn task_size_mb(&self, task: usize) -> f64 {
        let sizes = &self.file.workload.task_sizes_mb;
        sizes[task % sizes.len()]
    }

    pub fn task_sizes_mb(&self) -> Vec<f64> {
        (0..self.num_tasks()).map(|i| self.task_size_mb(i)).collect()
    }

    pub fn max_task_size_mb(&self) -> f64 {
        self.file
            .workload
            .task_sizes_mb
            .iter()
            .copied()
            .fold(0.0, f64::max)
    }

    pub fn result_size_ratio(&self) -> f64 {
        self.file.workload.result_size_ratio
    }

    pub fn redundancy_ratio(&self) -> f64 {
        self.file.workload.redundancy_ratio
    }

    pub fn ue_tx_power_w(&self) -> f64 {
        self.file.ue.tx_power_w
    }

    pub fn ue_compute_mbps(&self) -> f64 {
        self.file.ue.compute_mbps
    }

    /// Local compute power kappa * f^3 in watts (f in GHz).
    pub fn ue_compute_power_w(&self) -> f64 {
        self.file.ue.hardware_factor * self.file.ue.cpu_freq_ghz.powi(3)
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.file.channel.bandwidth_hz
    }

    pub fn noise_power_w(&self) -> f64 {
        self.file.channel.noise_power_w
    }

    /// Reference gain at 1 m, linear watts.
    pub fn ref_gain_w(&self) -> f64 {
        self.derived.ref_gain_w
    }

    pub fn system_gain(&self) -> f64 {
        self.derived.system_gain
    }

    pub fn channel_threshold(&self) -> f64 {
        self.derived.channel_threshold
    }

    pub fn earth_radius_km(&self) -> f64 {
        self.file.orbit.earth_radius_km
    }

    pub fn altitude_km(&self) -> f64 {
        self.file.orbit.altitude_km
    }

    pub fn earth_radius_m(&self) -> f64 {
        self.file.orbit.earth_radius_km * 1000.0
    }

    pub fn altitude_m(&self) -> f64 {
        self.file.orbit.altitude_km * 1000.0
    }

    pub fn sat_spacing_rad(&self) -> f64 {
        self.file.orbit.spacing_deg.to_radians()
    }

    pub fn anchor_rad(&self) -> f64 {
        self.file.orbit.anchor_deg.to_radians()
    }

    /// Magnitude of the orbital angular speed, rad/s.
    pub fn angular_speed(&self) -> f64 {
        self.derived.angular_speed
    }

    pub fn clockwise(&self) -> bool {
        self.file.orbit.clockwise
    }

    pub fn orbital_period_s(&self) -> f64 {
        self.derived.orbital_period
    }

    pub fn visibility_half_angle(&self) -> f64 {
        self.derived.visibility_half_angle
    }

    pub fn visibility_horizon_s(&self) -> f64 {
        self.derived.visibility_horizon
    }

    pub fn sat_compute_mbps(&self, sat: usize) -> f64 {
        let speeds = &self.file.orbit.sat_compute_mbps;
        speeds[sat % speeds.len()]
    }

    pub fn isl_rate_mbps(&self) -> f64 {
        self.file.orbit.isl_rate_mbps
    }

    pub fn privacy_weight(&self) -> f64 {
        self.file.objective.privacy_weight
    }

    pub fn energy_weight(&self) -> f64 {
        self.file.objective.energy_weight
    }

    pub fn time_threshold_s(&self) -> f64 {
        self.file.objective.time_threshold_s
    }

    pub fn failure_threshold(&self) -> f64 {
        self.file.objective.failure_threshold
    }

    pub fn privacy_threshold(&self) -> f64 {
        self.file.objective.privacy_threshold
    }

    pub fn reward_constant(&self) -> f64 {
        self.file.rl.reward_constant
    }

    pub fn terminal_penalty(&self) -> f64 {
        self.file.rl.terminal_penalty
    }

    pub fn rng_seed(&self) -> u64 {
        self.file.rl.rng_seed
    }
}

impl std::str::FromStr for ScenarioConfig {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::from_toml_str(s)
    }
}

/// The 30-task reference scenario bundled with the crate.
pub const DEFAULT_SCENARIO: &str = include_str!("../scenarios/default.scenario");
/// N = 3, M = 3 scenario used for oracle comparisons.
pub const TINY_SCENARIO: &str = include_str!("../scenarios/tiny.scenario");
/// N = 15, M = 10 scenario used for baseline ordering.
pub const MEDIUM_SCENARIO: &str = include_str!("../scenarios/medium.scenario");
