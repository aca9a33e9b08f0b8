use serde::{Deserialize, Serialize};

/// Learning rate as a function of the step count within a stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LrSchedule {
    Constant,
    /// `lr0 * base^floor(step / decay_steps)`
    Staircase { decay_steps: u64, base: f64 },
    /// `lr0 * base^(step / decay_steps)`
    Exponential { decay_steps: u64, base: f64 },
}

impl LrSchedule {
    pub fn rate(&self, lr0: f64, step: u64) -> f64 {
        match *self {
            LrSchedule::Constant => lr0,
            LrSchedule::Staircase { decay_steps, base } => {
                let k = step / decay_steps.max(1);
                lr0 * base.powi(k.min(i32::MAX as u64) as i32)
            }
            LrSchedule::Exponential { decay_steps, base } => {
                lr0 * base.powf(step as f64 / decay_steps.max(1) as f64)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const FINE: LrSchedule = LrSchedule::Staircase {
        decay_steps: 125,
        base: 0.5,
    };

    #[test]
    fn staircase_values() {
        assert_eq!(FINE.rate(1e-4, 0), 1e-4);
        assert_eq!(FINE.rate(1e-4, 124), 1e-4);
        assert_eq!(FINE.rate(1e-4, 125), 5e-5);
        assert_eq!(FINE.rate(1e-4, 250), 2.5e-5);
        assert_eq!(FINE.rate(1e-4, 260), 2.5e-5);
        assert_eq!(LrSchedule::Constant.rate(1e-3, 10_000), 1e-3);
    }

    #[test]
    fn exponential_agrees_at_multiples() {
        let e = LrSchedule::Exponential {
            decay_steps: 125,
            base: 0.5,
        };
        assert!((e.rate(1e-4, 250) - 2.5e-5).abs() < 1e-18);
        assert!(e.rate(1e-4, 60) < 1e-4 && e.rate(1e-4, 60) > 5e-5);
    }

    proptest! {
        #[test]
        fn non_increasing_and_halves_at_multiples(step in 0u64..5000) {
            prop_assert!(FINE.rate(1e-4, step + 1) <= FINE.rate(1e-4, step));
            let k = step / 125;
            prop_assert_eq!(FINE.rate(1e-4, (k + 1) * 125), FINE.rate(1e-4, k * 125) / 2.0);
        }
    }
}
