//! Lévy motion for a single particle: drift, Brownian component, compound
//! Poisson jumps.
//!
//! The motion `Z` is parameterized so that its time-1 moments are closed
//! forms:
//!
//! ```text
//! E[Z_1]   = drift + jump_rate * E[J]
//! Var(Z_1) = diffusion_var + jump_rate * E[J^2]
//! ```
//!
//! Increments over disjoint intervals are independent, and an increment over
//! `dt` is sampled exactly (no Euler discretization): the Brownian part is one
//! Gaussian draw with variance `diffusion_var * dt`, and the jump part draws a
//! `Poisson(jump_rate * dt)` count of i.i.d. jumps.

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::Serialize;
use thiserror::Error;

use crate::model::ModelError;

/// Distribution of a single jump of the compound Poisson component.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum JumpLaw {
    /// No jump displacement (jumps of size zero).
    Zero,
    /// Every jump has the fixed size `j`.
    Deterministic { j: f64 },
    /// Jumps are `Normal(mean, var)`.
    Gaussian { mean: f64, var: f64 },
}

impl JumpLaw {
    pub fn mean(&self) -> f64 {
        match *self {
            JumpLaw::Zero => 0.0,
            JumpLaw::Deterministic { j } => j,
            JumpLaw::Gaussian { mean, .. } => mean,
        }
    }

    /// `E[J^2]`.
    pub fn second_moment(&self) -> f64 {
        match *self {
            JumpLaw::Zero => 0.0,
            JumpLaw::Deterministic { j } => j * j,
            JumpLaw::Gaussian { mean, var } => var + mean * mean,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match *self {
            JumpLaw::Zero => Ok(()),
            JumpLaw::Deterministic { j } => {
                if !j.is_finite() {
                    return Err(ModelError::invalid("motion.jump.j", "must be finite"));
                }
                Ok(())
            }
            JumpLaw::Gaussian { mean, var } => {
                if !mean.is_finite() {
                    return Err(ModelError::invalid("motion.jump.mean", "must be finite"));
                }
                if !var.is_finite() || var < 0.0 {
                    return Err(ModelError::invalid(
                        "motion.jump.var",
                        "must be finite and non-negative",
                    ));
                }
                Ok(())
            }
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            JumpLaw::Zero => 0.0,
            JumpLaw::Deterministic { j } => j,
            JumpLaw::Gaussian { mean, var } => Normal::new(mean, var.sqrt())
                .expect("validated jump law")
                .sample(rng),
        }
    }
}

/// Lévy motion specification: `Z_t = drift*t + Brownian(diffusion_var) +
/// compound Poisson(jump_rate, jump)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevySpec {
    pub drift: f64,
    pub diffusion_var: f64,
    pub jump_rate: f64,
    pub jump: JumpLaw,
}

/// Error returned by [`LevySpec::sample_increment`] for a negative or
/// non-finite duration.
#[derive(Clone, Copy, Debug, PartialEq, Error)]
#[error("increment duration must be non-negative and finite, got {dt}")]
pub struct NegativeDuration {
    pub dt: f64,
}

impl LevySpec {
    /// The motionless process: every increment is exactly zero.
    pub fn zero() -> Self {
        LevySpec {
            drift: 0.0,
            diffusion_var: 0.0,
            jump_rate: 0.0,
            jump: JumpLaw::Zero,
        }
    }

    /// True when no component can ever move the particle.
    pub fn is_zero(&self) -> bool {
        self.drift == 0.0
            && self.diffusion_var == 0.0
            && (self.jump_rate == 0.0
                || self.jump.second_moment() == 0.0 && self.jump.mean() == 0.0)
    }

    /// `E[Z_1]`.
    pub fn mean_rate(&self) -> f64 {
        self.drift + self.jump_rate * self.jump.mean()
    }

    /// `Var(Z_1)`.
    pub fn var_rate(&self) -> f64 {
        self.diffusion_var + self.jump_rate * self.jump.second_moment()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !self.drift.is_finite() {
            return Err(ModelError::invalid("motion.drift", "must be finite"));
        }
        if !self.diffusion_var.is_finite() || self.diffusion_var < 0.0 {
            return Err(ModelError::invalid(
                "motion.diffusion_var",
                "must be finite and non-negative",
            ));
        }
        if !self.jump_rate.is_finite() || self.jump_rate < 0.0 {
            return Err(ModelError::invalid(
                "motion.jump_rate",
                "must be finite and non-negative",
            ));
        }
        self.jump.validate()
    }

    /// Samples `Z_{t+dt} - Z_t` exactly.
    ///
    /// `dt = 0` returns exactly `0.0` and consumes no randomness, so inserting
    /// a checkpoint at the current time never perturbs a trajectory.
    pub fn sample_increment<R: Rng + ?Sized>(
        &self,
        dt: f64,
        rng: &mut R,
    ) -> Result<f64, NegativeDuration> {
        if !dt.is_finite() || dt < 0.0 {
            return Err(NegativeDuration { dt });
        }
        if dt == 0.0 {
            return Ok(0.0);
        }
        let mut x = self.drift * dt;
        if self.diffusion_var > 0.0 {
            let normal = Normal::new(0.0, (self.diffusion_var * dt).sqrt())
                .expect("validated diffusion variance");
            x += normal.sample(rng);
        }
        if self.jump_rate > 0.0 {
            let count = Poisson::new(self.jump_rate * dt)
                .expect("positive jump intensity")
                .sample(rng);
            for _ in 0..count as u64 {
                x += self.jump.sample(rng);
            }
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn pure_drift_is_exact() {
        let spec = LevySpec {
            drift: 3.0,
            diffusion_var: 0.0,
            jump_rate: 0.0,
            jump: JumpLaw::Zero,
        };
        let x = spec.sample_increment(2.0, &mut rng(0)).unwrap();
        assert_eq!(x, 6.0);
    }

    #[test]
    fn zero_duration_returns_exact_zero_without_consuming_randomness() {
        let spec = LevySpec {
            drift: 1.0,
            diffusion_var: 2.0,
            jump_rate: 3.0,
            jump: JumpLaw::Gaussian {
                mean: 0.5,
                var: 1.0,
            },
        };
        let mut a = rng(9);
        let mut b = rng(9);
        assert_eq!(spec.sample_increment(0.0, &mut a).unwrap(), 0.0);
        // The stream was untouched: the next draws agree with a fresh clone.
        let xa = spec.sample_increment(1.0, &mut a).unwrap();
        let xb = spec.sample_increment(1.0, &mut b).unwrap();
        assert_eq!(xa, xb);
    }

    #[test]
    fn zero_process_returns_zero_for_any_duration() {
        let spec = LevySpec::zero();
        assert_eq!(spec.sample_increment(5.0, &mut rng(1)).unwrap(), 0.0);
        assert!(spec.is_zero());
    }

    #[test]
    fn negative_duration_is_rejected() {
        let spec = LevySpec::zero();
        assert_eq!(
            spec.sample_increment(-1.0, &mut rng(1)),
            Err(NegativeDuration { dt: -1.0 })
        );
        assert!(spec.sample_increment(f64::NAN, &mut rng(1)).is_err());
    }

    #[test]
    fn moment_rates_combine_all_components() {
        let spec = LevySpec {
            drift: 0.25,
            diffusion_var: 0.5,
            jump_rate: 2.0,
            jump: JumpLaw::Gaussian {
                mean: 0.5,
                var: 0.75,
            },
        };
        assert_eq!(spec.mean_rate(), 0.25 + 2.0 * 0.5);
        assert_eq!(spec.var_rate(), 0.5 + 2.0 * (0.75 + 0.25));
    }

    #[test]
    fn validation_rejects_negative_variance_and_rate() {
        let mut spec = LevySpec::zero();
        spec.diffusion_var = -1.0;
        assert!(spec.validate().is_err());
        let mut spec = LevySpec::zero();
        spec.jump_rate = -0.5;
        assert!(spec.validate().is_err());
        let spec = LevySpec {
            drift: 0.0,
            diffusion_var: 0.0,
            jump_rate: 1.0,
            jump: JumpLaw::Gaussian {
                mean: 0.0,
                var: -2.0,
            },
        };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn sampled_moments_match_rates() {
        // Jump diffusion with every component active, checked against the
        // closed-form mean and variance over dt = 0.5.
        let spec = LevySpec {
            drift: 1.0,
            diffusion_var: 0.8,
            jump_rate: 2.0,
            jump: JumpLaw::Gaussian {
                mean: -0.3,
                var: 0.4,
            },
        };
        let dt = 0.5;
        let n = 400_000;
        let mut r = rng(42);
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let x = spec.sample_increment(dt, &mut r).unwrap();
            sum += x;
            sum_sq += x * x;
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        let exact_mean = spec.mean_rate() * dt;
        let exact_var = spec.var_rate() * dt;
        let se_mean = (exact_var / n as f64).sqrt();
        assert!(
            (mean - exact_mean).abs() < 4.0 * se_mean,
            "mean {mean} vs {exact_mean} (4se = {})",
            4.0 * se_mean
        );
        assert!(
            (var - exact_var).abs() < 0.02 * exact_var,
            "variance {var} vs {exact_var}"
        );
    }

    #[test]
    fn deterministic_jumps_add_up() {
        // With deterministic unit jumps and no other component the increment
        // equals the jump count, so its mean is jump_rate * dt.
        let spec = LevySpec {
            drift: 0.0,
            diffusion_var: 0.0,
            jump_rate: 3.0,
            jump: JumpLaw::Deterministic { j: 1.0 },
        };
        let mut r = rng(7);
        let n = 200_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let x = spec.sample_increment(1.0, &mut r).unwrap();
            assert_eq!(x.fract(), 0.0);
            sum += x;
        }
        let mean = sum / n as f64;
        let se = (3.0 / n as f64).sqrt();
        assert!((mean - 3.0).abs() < 4.0 * se, "mean {mean}");
    }
}
