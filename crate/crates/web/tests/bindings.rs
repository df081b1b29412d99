use satoffload_web::{link_profile_json, scenario_text, simulate_json, snapshot_json};
use serde_json::Value;

fn tiny() -> String {
    scenario_text("tiny").unwrap()
}

#[test]
fn bundled_scenarios_parse() {
    for name in ["tiny", "medium", "default"] {
        let text = scenario_text(name).unwrap();
        satoffload::ScenarioConfig::from_toml_str(&text).unwrap();
    }
    assert!(scenario_text("nope").is_err());
}

#[test]
fn link_profile_is_symmetric_and_peaks_at_zenith() {
    let v: Value = serde_json::from_str(&link_profile_json(&tiny(), 41).unwrap()).unwrap();
    let s = v["samples"].as_array().unwrap();
    assert_eq!(s.len(), 41);
    let snr: Vec<f64> = s.iter().map(|x| x["snr_db"].as_f64().unwrap()).collect();
    for i in 0..20 {
        assert!((snr[i] - snr[40 - i]).abs() < 1e-9);
        assert!(snr[i] < snr[i + 1]);
    }
    // zenith SNR is the calibration point
    assert!((snr[20] - 15.0).abs() < 1e-9);
}

#[test]
fn snapshot_lists_every_satellite() {
    let v: Value = serde_json::from_str(&snapshot_json(&tiny(), 0.0).unwrap()).unwrap();
    let sats = v.as_array().unwrap();
    assert_eq!(sats.len(), 3);
    for s in sats {
        let visible = s["visible"].as_bool().unwrap();
        assert_eq!(visible, !s["link"].is_null());
    }
}

#[test]
fn simulate_reports_timeline_and_segments() {
    for policy in ["uniform", "random", "local"] {
        let v: Value = serde_json::from_str(&simulate_json(&tiny(), policy, 3).unwrap()).unwrap();
        let timeline = v["report"]["timeline"].as_array().unwrap();
        assert_eq!(timeline.len(), 3);
        assert_eq!(v["segments"].as_array().unwrap().len(), 3);
        assert!(v["report"]["cost"].as_f64().unwrap() > 0.0);
    }
    let a = simulate_json(&tiny(), "random", 7).unwrap();
    let b = simulate_json(&tiny(), "random", 7).unwrap();
    assert_eq!(a, b);
    assert!(simulate_json(&tiny(), "greedy", 0).is_err());
}

#[test]
fn bad_scenario_text_is_an_error() {
    assert!(link_profile_json("not = [valid", 10).is_err());
    assert!(simulate_json("", "uniform", 0).is_err());
}
