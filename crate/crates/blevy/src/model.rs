//! Branching model configuration and its exact moment constants.
//!
//! The reproduction step at a death event draws an offspring count `N` and
//! per-child displacements `D_1..D_N`. Everything downstream (oracles,
//! simulator centering, martingale scaling) is driven by a handful of exact
//! moments of that step:
//!
//! ```text
//! lambda_hat = lambda * E[N - 1]             growth rate of E[population]
//! r          = E[Z_1] + lambda * E[sum D_i]  empirical mean speed
//! kappa      = E[(N-1)^2] / E[N-1]
//! ```
//!
//! and the second-moment constants `c1`, `c2` of the centered position sum,
//! in two variants: the displacement-only form (`c1`, `c2`) and the form that
//! also carries the motion variance (`c1_corr`, `c2_corr`). The two coincide
//! exactly when `Var(Z_1) = 0`; which one matches the process when
//! `Var(Z_1) > 0` is decided numerically by [`crate::oracle`], not assumed
//! here.

use rand::Rng;
use rand_distr::{Bernoulli, Distribution, Geometric, Normal, Poisson};
use serde::Serialize;
use thiserror::Error;

use crate::levy::LevySpec;
use crate::tolerances::{FIXED_POINT_ABS_TOL, FIXED_POINT_MAX_ITERS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("offspring law must be supercritical: E[N] = {mean} is <= 1")]
    SubcriticalOrCritical { mean: f64 },
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter {
        field: &'static str,
        reason: &'static str,
    },
    #[error("extinction fixed-point iteration did not converge within {iterations} iterations")]
    NoConvergence { iterations: u64 },
}

impl ModelError {
    pub(crate) fn invalid(field: &'static str, reason: &'static str) -> Self {
        ModelError::InvalidParameter { field, reason }
    }
}

/// Offspring count distribution at a death event.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum OffspringLaw {
    /// Always exactly `k` children.
    Deterministic { k: u32 },
    /// No children with probability `p0`, otherwise exactly `k` (`k >= 2`).
    TwoPoint { p0: f64, k: u32 },
    /// Geometric on `{0, 1, 2, ...}` with the given mean:
    /// `P(N = n) = (1-p)^n p` where `p = 1 / (1 + mean)`.
    Geometric { mean: f64 },
}

impl OffspringLaw {
    pub fn mean(&self) -> f64 {
        match *self {
            OffspringLaw::Deterministic { k } => k as f64,
            OffspringLaw::TwoPoint { p0, k } => (1.0 - p0) * k as f64,
            OffspringLaw::Geometric { mean } => mean,
        }
    }

    /// `E[N^2]`.
    pub fn second_moment(&self) -> f64 {
        match *self {
            OffspringLaw::Deterministic { k } => (k as f64) * (k as f64),
            OffspringLaw::TwoPoint { p0, k } => (1.0 - p0) * (k as f64) * (k as f64),
            // Var(N) = mean (1 + mean) for the geometric started at 0.
            OffspringLaw::Geometric { mean } => mean + 2.0 * mean * mean,
        }
    }

    /// `E[N (N-1)]`.
    pub fn factorial_moment(&self) -> f64 {
        self.second_moment() - self.mean()
    }

    /// `E[N - 1]`.
    pub fn mean_excess(&self) -> f64 {
        self.mean() - 1.0
    }

    /// `E[(N - 1)^2]`.
    pub fn second_moment_excess(&self) -> f64 {
        self.second_moment() - 2.0 * self.mean() + 1.0
    }

    /// Probability generating function `E[s^N]` for `s` in `[0, 1]`.
    pub fn pgf(&self, s: f64) -> f64 {
        match *self {
            OffspringLaw::Deterministic { k } => s.powi(k as i32),
            OffspringLaw::TwoPoint { p0, k } => p0 + (1.0 - p0) * s.powi(k as i32),
            OffspringLaw::Geometric { mean } => {
                let p = 1.0 / (1.0 + mean);
                p / (1.0 - (1.0 - p) * s)
            }
        }
    }

    /// `P(N = 0)`.
    pub fn mass_at_zero(&self) -> f64 {
        match *self {
            OffspringLaw::Deterministic { k } => {
                if k == 0 {
                    1.0
                } else {
                    0.0
                }
            }
            OffspringLaw::TwoPoint { p0, .. } => p0,
            OffspringLaw::Geometric { mean } => 1.0 / (1.0 + mean),
        }
    }

    /// Parameter validity only; supercriticality is checked by
    /// [`ModelConfig::validate`] and [`extinction_probability`].
    pub fn validate(&self) -> Result<(), ModelError> {
        match *self {
            OffspringLaw::Deterministic { .. } => Ok(()),
            OffspringLaw::TwoPoint { p0, k } => {
                if !p0.is_finite() || !(0.0..=1.0).contains(&p0) {
                    return Err(ModelError::invalid("offspring.p0", "must lie in [0, 1]"));
                }
                if k < 2 {
                    return Err(ModelError::invalid("offspring.k", "must be at least 2"));
                }
                Ok(())
            }
            OffspringLaw::Geometric { mean } => {
                if !mean.is_finite() || mean <= 0.0 {
                    return Err(ModelError::invalid("offspring.mean", "must be positive"));
                }
                Ok(())
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        match *self {
            OffspringLaw::Deterministic { k } => k,
            OffspringLaw::TwoPoint { p0, k } => {
                let dies_out = Bernoulli::new(p0).expect("validated p0").sample(rng);
                if dies_out {
                    0
                } else {
                    k
                }
            }
            OffspringLaw::Geometric { mean } => {
                let p = 1.0 / (1.0 + mean);
                Geometric::new(p)
                    .expect("validated success probability")
                    .sample(rng) as u32
            }
        }
    }
}

/// Per-child displacement distribution.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum DisplacementLaw {
    Zero,
    Deterministic {
        d: f64,
    },
    Gaussian {
        mean: f64,
        var: f64,
    },
    /// Poisson with the given positive mean (integer-valued displacements).
    Poisson {
        mean: f64,
    },
}

impl DisplacementLaw {
    pub fn mean(&self) -> f64 {
        match *self {
            DisplacementLaw::Zero => 0.0,
            DisplacementLaw::Deterministic { d } => d,
            DisplacementLaw::Gaussian { mean, .. } => mean,
            DisplacementLaw::Poisson { mean } => mean,
        }
    }

    /// `E[D^2]`.
    pub fn second_moment(&self) -> f64 {
        match *self {
            DisplacementLaw::Zero => 0.0,
            DisplacementLaw::Deterministic { d } => d * d,
            DisplacementLaw::Gaussian { mean, var } => var + mean * mean,
            DisplacementLaw::Poisson { mean } => mean + mean * mean,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match *self {
            DisplacementLaw::Zero => Ok(()),
            DisplacementLaw::Deterministic { d } => {
                if !d.is_finite() {
                    return Err(ModelError::invalid("displacement.d", "must be finite"));
                }
                Ok(())
            }
            DisplacementLaw::Gaussian { mean, var } => {
                if !mean.is_finite() {
                    return Err(ModelError::invalid("displacement.mean", "must be finite"));
                }
                if !var.is_finite() || var < 0.0 {
                    return Err(ModelError::invalid(
                        "displacement.var",
                        "must be finite and non-negative",
                    ));
                }
                Ok(())
            }
            DisplacementLaw::Poisson { mean } => {
                if !mean.is_finite() || mean <= 0.0 {
                    return Err(ModelError::invalid("displacement.mean", "must be positive"));
                }
                Ok(())
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            DisplacementLaw::Zero => 0.0,
            DisplacementLaw::Deterministic { d } => d,
            DisplacementLaw::Gaussian { mean, var } => Normal::new(mean, var.sqrt())
                .expect("validated displacement")
                .sample(rng),
            DisplacementLaw::Poisson { mean } => Poisson::new(mean)
                .expect("validated displacement mean")
                .sample(rng),
        }
    }
}

/// How the displacements of siblings relate to each other.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Coupling {
    /// Independent draws, one per child.
    Iid,
    /// One draw shared by every child of the brood.
    Shared,
}

/// Exact moments of the total displacement of one brood.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AggregateDisplacement {
    /// `E[sum_i D_i]`.
    pub sum_mean: f64,
    /// `E[sum_i D_i^2]`.
    pub sum_of_squares: f64,
    /// `E[(sum_i D_i)^2]`.
    pub sum_squared: f64,
}

/// Moments of `sum_{i<=N} D_i` under the given sibling coupling.
pub fn aggregate_displacement(
    offspring: &OffspringLaw,
    displacement: &DisplacementLaw,
    coupling: Coupling,
) -> AggregateDisplacement {
    let en = offspring.mean();
    let en2 = offspring.second_moment();
    let fact = offspring.factorial_moment();
    let ed = displacement.mean();
    let ed2 = displacement.second_moment();
    let sum_mean = en * ed;
    let sum_of_squares = en * ed2;
    let sum_squared = match coupling {
        Coupling::Iid => en * ed2 + fact * ed * ed,
        Coupling::Shared => en2 * ed2,
    };
    AggregateDisplacement {
        sum_mean,
        sum_of_squares,
        sum_squared,
    }
}

/// Full model: lifetime rate, reproduction step, single-particle motion.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelConfig {
    /// Exponential lifetime rate, strictly positive.
    pub lambda: f64,
    pub offspring: OffspringLaw,
    pub displacement: DisplacementLaw,
    pub coupling: Coupling,
    pub motion: LevySpec,
}

/// Exact constants derived from a validated [`ModelConfig`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DerivedConstants {
    /// `lambda * E[N-1]`; `E[population at t] = exp(lambda_hat * t)`.
    pub lambda_hat: f64,
    /// Speed `r` of the empirical mean: `E[Z_1] + lambda * E[sum D_i]`.
    pub r: f64,
    /// `E[(N-1)^2] / E[N-1]`.
    pub kappa: f64,
    /// Displacement-only second-moment constants.
    pub c1: f64,
    pub c2: f64,
    /// Second-moment constants including the motion variance contribution
    /// `(1 + kappa) Var(Z_1) / lambda_hat` and `kappa Var(Z_1)`.
    pub c1_corr: f64,
    pub c2_corr: f64,
    /// Probability the whole population eventually dies out.
    pub q_ext: f64,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !self.lambda.is_finite() || self.lambda <= 0.0 {
            return Err(ModelError::invalid("lambda", "must be positive and finite"));
        }
        self.offspring.validate()?;
        let mean = self.offspring.mean();
        if mean <= 1.0 {
            return Err(ModelError::SubcriticalOrCritical { mean });
        }
        self.displacement.validate()?;
        self.motion.validate()
    }

    pub fn derived_constants(&self) -> Result<DerivedConstants, ModelError> {
        self.validate()?;
        let agg = aggregate_displacement(&self.offspring, &self.displacement, self.coupling);
        let mean_excess = self.offspring.mean_excess();
        let excess_sq = self.offspring.second_moment_excess();
        let lambda_hat = self.lambda * mean_excess;
        let kappa = excess_sq / mean_excess;
        let r = self.motion.mean_rate() + self.lambda * agg.sum_mean;
        let ratio = excess_sq / (mean_excess * mean_excess);
        let c1 = ratio * agg.sum_of_squares + agg.sum_squared / mean_excess;
        let c2 = lambda_hat * ratio * agg.sum_of_squares;
        let var_z = self.motion.var_rate();
        let c1_corr = c1 + (1.0 + kappa) * var_z / lambda_hat;
        let c2_corr = c2 + kappa * var_z;
        let q_ext = extinction_probability(&self.offspring)?;
        Ok(DerivedConstants {
            lambda_hat,
            r,
            kappa,
            c1,
            c2,
            c1_corr,
            c2_corr,
            q_ext,
        })
    }
}

/// Smallest fixed point of the offspring generating function on `[0, 1)`.
///
/// Computed by iterating `s <- pgf(s)` from `0`, which increases monotonically
/// to the smallest root; stops when consecutive iterates are within
/// [`FIXED_POINT_ABS_TOL`]. Requires a supercritical law.
pub fn extinction_probability(law: &OffspringLaw) -> Result<f64, ModelError> {
    law.validate()?;
    let mean = law.mean();
    if mean <= 1.0 {
        return Err(ModelError::SubcriticalOrCritical { mean });
    }
    let mut s = 0.0_f64;
    for _ in 0..FIXED_POINT_MAX_ITERS {
        let next = law.pgf(s);
        if (next - s).abs() <= FIXED_POINT_ABS_TOL {
            return Ok(next);
        }
        s = next;
    }
    Err(ModelError::NoConvergence {
        iterations: FIXED_POINT_MAX_ITERS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::JumpLaw;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn yule_unit_displacement() -> ModelConfig {
        ModelConfig {
            lambda: 1.0,
            offspring: OffspringLaw::Deterministic { k: 2 },
            displacement: DisplacementLaw::Deterministic { d: 1.0 },
            coupling: Coupling::Iid,
            motion: LevySpec::zero(),
        }
    }

    #[test]
    fn offspring_moments_deterministic() {
        let law = OffspringLaw::Deterministic { k: 3 };
        assert_eq!(law.mean(), 3.0);
        assert_eq!(law.second_moment(), 9.0);
        assert_eq!(law.factorial_moment(), 6.0);
        assert_eq!(law.mean_excess(), 2.0);
        assert_eq!(law.second_moment_excess(), 4.0);
        assert_eq!(law.mass_at_zero(), 0.0);
    }

    #[test]
    fn offspring_moments_two_point() {
        let law = OffspringLaw::TwoPoint { p0: 0.2, k: 2 };
        assert!((law.mean() - 1.6).abs() < 1e-15);
        assert!((law.second_moment() - 3.2).abs() < 1e-15);
        // (N-1)^2 is 1 both at N=0 and N=2.
        assert!((law.second_moment_excess() - 1.0).abs() < 1e-15);
        assert_eq!(law.mass_at_zero(), 0.2);
    }

    #[test]
    fn offspring_moments_geometric() {
        let m = 2.0;
        let law = OffspringLaw::Geometric { mean: m };
        assert_eq!(law.mean(), m);
        assert_eq!(law.second_moment(), m + 2.0 * m * m);
        assert_eq!(law.factorial_moment(), 2.0 * m * m);
        assert!((law.mass_at_zero() - 1.0 / 3.0).abs() < 1e-15);
        // pgf at 1 is 1.
        assert!((law.pgf(1.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn geometric_sampled_moments_match() {
        let law = OffspringLaw::Geometric { mean: 2.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 200_000;
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..n {
            let x = law.sample(&mut rng) as f64;
            sum += x;
            sum_sq += x * x;
        }
        let mean = sum / n as f64;
        let second = sum_sq / n as f64;
        let var = law.second_moment() - law.mean() * law.mean();
        let se = (var / n as f64).sqrt();
        assert!((mean - law.mean()).abs() < 4.0 * se, "mean {mean}");
        assert!((second - law.second_moment()).abs() < 0.05 * law.second_moment());
    }

    #[test]
    fn two_point_sampled_mass_at_zero() {
        let law = OffspringLaw::TwoPoint { p0: 0.2, k: 2 };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let zeros = (0..n).filter(|_| law.sample(&mut rng) == 0).count();
        let frac = zeros as f64 / n as f64;
        let se = (0.2 * 0.8 / n as f64).sqrt();
        assert!((frac - 0.2).abs() < 4.0 * se, "zero fraction {frac}");
    }

    #[test]
    fn aggregate_displacement_iid_vs_shared() {
        // N = 2 fixed, D ~ Gaussian(0, 1).
        let off = OffspringLaw::Deterministic { k: 2 };
        let disp = DisplacementLaw::Gaussian {
            mean: 0.0,
            var: 1.0,
        };
        let iid = aggregate_displacement(&off, &disp, Coupling::Iid);
        assert_eq!(iid.sum_mean, 0.0);
        assert_eq!(iid.sum_of_squares, 2.0);
        assert_eq!(iid.sum_squared, 2.0);
        let shared = aggregate_displacement(&off, &disp, Coupling::Shared);
        assert_eq!(shared.sum_mean, 0.0);
        assert_eq!(shared.sum_of_squares, 2.0);
        assert_eq!(shared.sum_squared, 4.0);
    }

    #[test]
    fn aggregate_displacement_shared_poisson() {
        // Sampled check: N ~ Geometric(2), D ~ Poisson(1.5), shared draw.
        let off = OffspringLaw::Geometric { mean: 2.0 };
        let disp = DisplacementLaw::Poisson { mean: 1.5 };
        let agg = aggregate_displacement(&off, &disp, Coupling::Shared);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 400_000;
        let (mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let count = off.sample(&mut rng) as f64;
            let d = disp.sample(&mut rng);
            let total = count * d;
            s1 += total;
            s2 += count * d * d;
            s3 += total * total;
        }
        let nf = n as f64;
        assert!(
            (s1 / nf - agg.sum_mean).abs() < 0.05,
            "sum_mean {}",
            s1 / nf
        );
        assert!((s2 / nf - agg.sum_of_squares).abs() / agg.sum_of_squares < 0.02);
        assert!((s3 / nf - agg.sum_squared).abs() / agg.sum_squared < 0.05);
    }

    #[test]
    fn derived_constants_for_unit_displacement_doubling() {
        let dc = yule_unit_displacement().derived_constants().unwrap();
        assert_eq!(dc.lambda_hat, 1.0);
        assert_eq!(dc.r, 2.0);
        assert_eq!(dc.kappa, 1.0);
        assert_eq!(dc.c1, 6.0);
        assert_eq!(dc.c2, 2.0);
        assert_eq!(dc.c1_corr, 6.0);
        assert_eq!(dc.c2_corr, 2.0);
        assert_eq!(dc.q_ext, 0.0);
    }

    #[test]
    fn derived_constants_brownian_only() {
        let config = ModelConfig {
            lambda: 1.0,
            offspring: OffspringLaw::Deterministic { k: 2 },
            displacement: DisplacementLaw::Zero,
            coupling: Coupling::Iid,
            motion: LevySpec {
                drift: 0.0,
                diffusion_var: 1.0,
                jump_rate: 0.0,
                jump: JumpLaw::Zero,
            },
        };
        let dc = config.derived_constants().unwrap();
        assert_eq!(dc.lambda_hat, 1.0);
        assert_eq!(dc.r, 0.0);
        assert_eq!(dc.c1, 0.0);
        assert_eq!(dc.c2, 0.0);
        assert_eq!(dc.c1_corr, 2.0);
        assert_eq!(dc.c2_corr, 1.0);
    }

    #[test]
    fn corrected_constants_dominate_and_coincide_without_motion_variance() {
        let mut config = yule_unit_displacement();
        let dc = config.derived_constants().unwrap();
        assert_eq!(dc.c1, dc.c1_corr);
        assert_eq!(dc.c2, dc.c2_corr);
        config.motion.diffusion_var = 0.7;
        let dc = config.derived_constants().unwrap();
        assert!(dc.c1_corr > dc.c1);
        assert!(dc.c2_corr > dc.c2);
    }

    #[test]
    fn extinction_probability_two_point() {
        // Root of 0.8 s^2 - s + 0.2 in [0, 1).
        let q = extinction_probability(&OffspringLaw::TwoPoint { p0: 0.2, k: 2 }).unwrap();
        assert!((q - 0.25).abs() < 1e-10, "q = {q}");
    }

    #[test]
    fn extinction_probability_geometric_matches_closed_form() {
        for mean in [1.25, 1.5, 2.0, 3.0, 10.0] {
            let q = extinction_probability(&OffspringLaw::Geometric { mean }).unwrap();
            assert!((q - 1.0 / mean).abs() < 1e-10, "mean {mean}: q = {q}");
        }
    }

    #[test]
    fn extinction_probability_zero_iff_no_mass_at_zero() {
        let q = extinction_probability(&OffspringLaw::Deterministic { k: 2 }).unwrap();
        assert_eq!(q, 0.0);
        let q = extinction_probability(&OffspringLaw::TwoPoint { p0: 0.0, k: 3 }).unwrap();
        assert_eq!(q, 0.0);
        let q = extinction_probability(&OffspringLaw::TwoPoint { p0: 1e-3, k: 2 }).unwrap();
        assert!(q > 0.0);
    }

    #[test]
    fn extinction_probability_requires_supercritical_law() {
        let err = extinction_probability(&OffspringLaw::Deterministic { k: 1 }).unwrap_err();
        assert_eq!(err, ModelError::SubcriticalOrCritical { mean: 1.0 });
        assert!(extinction_probability(&OffspringLaw::Geometric { mean: 0.9 }).is_err());
    }

    #[test]
    fn validate_rejects_bad_parameters() {
        let mut config = yule_unit_displacement();
        config.lambda = 0.0;
        assert!(matches!(
            config.validate(),
            Err(ModelError::InvalidParameter {
                field: "lambda",
                ..
            })
        ));

        let mut config = yule_unit_displacement();
        config.offspring = OffspringLaw::TwoPoint { p0: 1.5, k: 2 };
        assert!(matches!(
            config.validate(),
            Err(ModelError::InvalidParameter {
                field: "offspring.p0",
                ..
            })
        ));

        let mut config = yule_unit_displacement();
        config.offspring = OffspringLaw::TwoPoint { p0: 0.6, k: 2 };
        assert!(matches!(
            config.validate(),
            Err(ModelError::SubcriticalOrCritical { .. })
        ));

        let mut config = yule_unit_displacement();
        config.displacement = DisplacementLaw::Gaussian {
            mean: 0.0,
            var: -1.0,
        };
        assert!(config.validate().is_err());

        let mut config = yule_unit_displacement();
        config.motion.diffusion_var = f64::NAN;
        assert!(config.validate().is_err());
    }

    #[test]
    fn second_moment_constants_satisfy_cauchy_schwarz_shape() {
        // E[(sum D)^2] >= E[sum D]^2 for a spread of laws and couplings.
        let offsprings = [
            OffspringLaw::Deterministic { k: 2 },
            OffspringLaw::Deterministic { k: 5 },
            OffspringLaw::TwoPoint { p0: 0.3, k: 3 },
            OffspringLaw::Geometric { mean: 1.7 },
        ];
        let displacements = [
            DisplacementLaw::Zero,
            DisplacementLaw::Deterministic { d: -2.5 },
            DisplacementLaw::Gaussian {
                mean: 0.4,
                var: 2.0,
            },
            DisplacementLaw::Poisson { mean: 0.9 },
        ];
        for off in &offsprings {
            for disp in &displacements {
                for coupling in [Coupling::Iid, Coupling::Shared] {
                    let agg = aggregate_displacement(off, disp, coupling);
                    assert!(
                        agg.sum_squared + 1e-12 >= agg.sum_mean * agg.sum_mean,
                        "{off:?} {disp:?} {coupling:?}"
                    );
                    assert!(agg.sum_of_squares >= 0.0);
                }
            }
        }
    }
}
