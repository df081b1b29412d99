//! WebAssembly bindings for the browser demo.
//!
//! Every exported function takes the scenario as TOML text and returns JSON.
//! The `*_json` functions hold the logic and are plain Rust so they can be
//! tested natively; the `#[wasm_bindgen]` wrappers only convert errors.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use satoffload::baselines;
use satoffload::channel::{self, LinkState};
use satoffload::config::{ScenarioConfig, MEDIUM_SCENARIO, DEFAULT_SCENARIO, TINY_SCENARIO};
use satoffload::constellation::Constellation;
use satoffload::timeline::TaskTimeline;
use satoffload::{evaluate_schedule, EvaluationReport, Schedule};

fn parse(toml: &str) -> Result<ScenarioConfig, String> {
    ScenarioConfig::from_toml_str(toml).map_err(|e| e.to_string())
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

/// Bundled scenario text by name: `default`, `medium` or `tiny`.
pub fn scenario_text(name: &str) -> Result<String, String> {
    match name {
        "default" => Ok(DEFAULT_SCENARIO.to_string()),
        "medium" => Ok(MEDIUM_SCENARIO.to_string()),
        "tiny" => Ok(TINY_SCENARIO.to_string()),
        other => Err(format!("no bundled scenario named `{other}`")),
    }
}

#[derive(Serialize)]
struct LinkSample {
    angle_deg: f64,
    distance_km: f64,
    gain: f64,
    snr_db: f64,
    rate_gbps: f64,
    ber: f64,
}

#[derive(Serialize)]
struct LinkProfile {
    half_angle_deg: f64,
    channel_threshold: f64,
    samples: Vec<LinkSample>,
}

fn sample(angle: f64, cfg: &ScenarioConfig) -> LinkSample {
    let l = LinkState::at_angle(angle, cfg);
    LinkSample {
        angle_deg: angle.to_degrees(),
        distance_km: l.distance_km,
        gain: l.gain,
        snr_db: 10.0 * l.snr.log10(),
        rate_gbps: l.rate_bps / 1e9,
        ber: l.ber,
    }
}

/// Link budget across the visible arc, sampled at `samples` evenly spaced angles.
pub fn link_profile_json(toml: &str, samples: u32) -> Result<String, String> {
    let cfg = parse(toml)?;
    let samples = samples.max(2);
    let g = cfg.visibility_half_angle();
    let points = (0..samples)
        .map(|i| {
            let a = -g + 2.0 * g * f64::from(i) / f64::from(samples - 1);
            sample(a, &cfg)
        })
        .collect();
    to_json(&LinkProfile {
        half_angle_deg: g.to_degrees(),
        channel_threshold: cfg.channel_threshold(),
        samples: points,
    })
}

#[derive(Serialize)]
struct SatelliteView {
    index: usize,
    angle_deg: f64,
    visible: bool,
    link: Option<LinkSample>,
}

/// Position, visibility and link quality of every satellite at time `t` seconds.
pub fn snapshot_json(toml: &str, t: f64) -> Result<String, String> {
    let cfg = parse(toml)?;
    let c = Constellation::new(&cfg);
    let sats: Vec<SatelliteView> = (0..cfg.num_satellites())
        .map(|j| {
            let angle = c.angle_at(j, t);
            let visible = channel::is_visible(angle, &cfg);
            let signed = if angle > std::f64::consts::PI {
                angle - std::f64::consts::TAU
            } else {
                angle
            };
            SatelliteView {
                index: j,
                angle_deg: signed.to_degrees(),
                visible,
                link: visible.then(|| sample(signed, &cfg)),
            }
        })
        .collect();
    to_json(&sats)
}

/// Builds a schedule with `policy` (`uniform`, `random` or `local`) and
/// returns its full evaluation, including the per-task timeline.
pub fn simulate_json(toml: &str, policy: &str, seed: u64) -> Result<String, String> {
    let cfg = parse(toml)?;
    let schedule = match policy {
        "uniform" => baselines::uniform_schedule(&cfg),
        "local" => Schedule::all_local(cfg.num_tasks()),
        "random" => baselines::random_policy(&cfg, 200, seed).map_err(|e| e.to_string())?.schedule,
        other => return Err(format!("unknown policy `{other}`")),
    };
    let report = evaluate_schedule(&schedule, &cfg).map_err(|e| e.to_string())?;
    let segments = report.timeline.iter().map(segments_of).collect();
    to_json(&Simulation {
        policy: policy.to_string(),
        segments,
        report,
    })
}

#[derive(Serialize)]
struct Segment {
    kind: &'static str,
    start: f64,
    end: f64,
}

#[derive(Serialize)]
struct Simulation {
    policy: String,
    /// Drawable phases of each task, in schedule order.
    segments: Vec<Vec<Segment>>,
    report: EvaluationReport,
}

fn segments_of(t: &TaskTimeline) -> Vec<Segment> {
    let seg = |kind, start, end| Segment { kind, start, end };
    if !t.location.is_offloaded() {
        return vec![seg("local", t.comp_start, t.comp_end)];
    }
    vec![
        seg("upload", t.upload_start, t.upload_end),
        seg("compute", t.comp_start, t.comp_end),
        seg("migrate", t.comp_end, t.migrate_end),
        seg("download", t.migrate_end, t.download_end),
    ]
}

#[wasm_bindgen]
pub fn scenario(name: &str) -> Result<String, JsValue> {
    scenario_text(name).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn link_profile(toml: &str, samples: u32) -> Result<String, JsValue> {
    link_profile_json(toml, samples).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn snapshot(toml: &str, t: f64) -> Result<String, JsValue> {
    snapshot_json(toml, t).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn simulate(toml: &str, policy: &str, seed: u32) -> Result<String, JsValue> {
    simulate_json(toml, policy, u64::from(seed)).map_err(|e| JsValue::from_str(&e))
}
