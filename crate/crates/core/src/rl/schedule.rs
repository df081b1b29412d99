use serde::{Deserialize, Serialize};

/// Learning rate as a function of training progress.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum LrSchedule {
    Fixed { lr: f64 },
    /// Straight line from `initial` at step 0 to `final_lr` at the last step.
    Linear { initial: f64, final_lr: f64 },
}

impl LrSchedule {
    pub const DEFAULT_INITIAL: f64 = 1e-3;
    pub const DEFAULT_FINAL: f64 = 5.76e-7;

    pub fn default_decay() -> Self {
        LrSchedule::Linear {
            initial: Self::DEFAULT_INITIAL,
            final_lr: Self::DEFAULT_FINAL,
        }
    }

    /// Rate at `step` of `total`. Endpoints are returned exactly.
    pub fn at(&self, step: u64, total: u64) -> f64 {
        match *self {
            LrSchedule::Fixed { lr } => lr,
            LrSchedule::Linear { initial, final_lr } => {
                if total == 0 || step >= total {
                    return if total == 0 { initial } else { final_lr };
                }
                let frac = step as f64 / total as f64;
                initial * (1.0 - frac) + final_lr * frac
            }
        }
    }
}

impl Default for LrSchedule {
    fn default() -> Self {
        Self::default_decay()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_exact() {
        let s = LrSchedule::default_decay();
        assert_eq!(s.at(0, 1_000_000), 1e-3);
        assert_eq!(s.at(1_000_000, 1_000_000), 5.76e-7);
        let mid = s.at(500_000, 1_000_000);
        assert!((mid - (1e-3 + 5.76e-7) / 2.0).abs() < 1e-18);
        assert_eq!(LrSchedule::Fixed { lr: 0.01 }.at(77, 100), 0.01);
    }

    #[test]
    fn monotone_decay() {
        let s = LrSchedule::default_decay();
        let mut prev = f64::INFINITY;
        for k in 0..=100 {
            let lr = s.at(k * 10_000, 1_000_000);
            assert!(lr <= prev);
            prev = lr;
        }
    }
}
