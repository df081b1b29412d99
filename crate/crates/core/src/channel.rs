//! Coverage geometry and the UE-satellite link model.

use std::f64::consts::{PI, TAU};

use crate::config::ScenarioConfig;

/// Wraps an angle into [0, 2pi).
pub fn wrap_angle(gamma: f64) -> f64 {
    let w = gamma.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// UE-satellite distance in kilometers for a geocentric angle `gamma`.
///
/// Law of cosines, written as `H^2 + 4R(R+H) sin^2(gamma/2)` so the zenith
/// case evaluates to exactly `H`.
pub fn distance_km(gamma: f64, cfg: &ScenarioConfig) -> f64 {
    let r = cfg.earth_radius_km();
    let h = cfg.altitude_km();
    let half = (gamma / 2.0).sin();
    (h * h + 4.0 * r * (r + h) * half * half).sqrt()
}

/// Closed visible arc around the zenith: `min(gamma, 2pi - gamma) <= gamma_max`.
pub fn is_visible(gamma: f64, cfg: &ScenarioConfig) -> bool {
    let g = wrap_angle(gamma);
    g.min(TAU - g) <= cfg.visibility_half_angle()
}

/// Free-space gain `G_sys * beta_o / s^2` with `s` given in kilometers.
pub fn channel_gain(distance_km: f64, cfg: &ScenarioConfig) -> f64 {
    let s = distance_km * 1000.0;
    cfg.system_gain() * cfg.ref_gain_w() / (s * s)
}

pub fn snr(gain: f64, cfg: &ScenarioConfig) -> f64 {
    cfg.ue_tx_power_w() * gain / cfg.noise_power_w()
}

/// Shannon rate in bits per second.
pub fn data_rate(snr: f64, cfg: &ScenarioConfig) -> f64 {
    cfg.bandwidth_hz() * (1.0 + snr).log2()
}

/// BPSK bit error rate, `erfc(sqrt(snr)) / 2`.
pub fn ber(snr: f64) -> f64 {
    0.5 * erfc(snr.max(0.0).sqrt())
}

/// Link quantities for one satellite at one geocentric angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkState {
    pub distance_km: f64,
    pub gain: f64,
    pub snr: f64,
    pub rate_bps: f64,
    pub ber: f64,
}

impl LinkState {
    pub fn at_angle(gamma: f64, cfg: &ScenarioConfig) -> Self {
        let distance_km = distance_km(gamma, cfg);
        let gain = channel_gain(distance_km, cfg);
        let snr = snr(gain, cfg);
        Self {
            distance_km,
            gain,
            snr,
            rate_bps: data_rate(snr, cfg),
            ber: ber(snr),
        }
    }
}

const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;

/// Complementary error function.
///
/// Below x = 2 it uses the positive-term series
/// `erf(x) = 2/sqrt(pi) * exp(-x^2) * sum 2^n x^(2n+1) / (2n+1)!!`;
/// above, the Laplace continued fraction for erfc evaluated with the modified
/// Lentz method. Both reach close to machine precision (relative error in the
/// tail, which is what BER exponents need), and erfc(0) is exactly 1.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < 2.0 {
        1.0 - erf_series(x)
    } else if x > 27.3 {
        // exp(-x^2) underflows
        0.0
    } else {
        erfc_continued_fraction(x)
    }
}

pub fn erf(x: f64) -> f64 {
    1.0 - erfc(x)
}

fn erf_series(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    loop {
        n += 1.0;
        term *= 2.0 * x2 / (2.0 * n + 1.0);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    FRAC_2_SQRT_PI * (-x2).exp() * sum
}

fn erfc_continued_fraction(x: f64) -> f64 {
    // erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..500 {
        let a = k as f64 / 2.0;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x * x).exp() / (PI.sqrt() * f)
}
