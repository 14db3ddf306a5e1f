//! Exact moment oracles and an independent numerical cross-check.
//!
//! Closed forms, for a model with derived constants `lambda_hat`, `kappa`,
//! `c1`, `c2` (see [`crate::model::DerivedConstants`]):
//!
//! ```text
//! E[|T_t|]                 = exp(lambda_hat t)
//! E[|T_t|^2]               = (1 + kappa) exp(2 lambda_hat t) - kappa exp(lambda_hat t)
//! E[S_t]                   = 0                 where S_t = sum_v (X_v(t) - r t)
//! E[S_t^2]                 = c1 exp(2 lambda_hat t) - c2 t exp(lambda_hat t) - c1 exp(lambda_hat t)
//! Var(exp(-lambda_hat t) S_t) = c1 - c2 t exp(-lambda_hat t) - c1 exp(-lambda_hat t)
//! ```
//!
//! `E[S_t^2]` solves the linear ODE `y' = lambda_hat y + a e^{2 lambda_hat t}
//! + b e^{lambda_hat t}` with `a = lambda_hat c1` and `b = -c2`. Two
//! independent checks guard the closed forms: [`ode_residual`] differentiates
//! the closed form numerically and compares against that right-hand side, and
//! [`brute_force_second_moment`] re-derives `E[S_t^2]` by integrating the
//! moment system assembled directly from the raw one-step moments of the
//! model, never touching `c1`/`c2`. The brute-force integration carries the
//! motion-variance source term `Var(Z_1) E[|T_t|^2]`, so comparing it with the
//! two closed-form variants decides which variant describes the process when
//! `Var(Z_1) > 0`.

use serde::Serialize;

use crate::model::{aggregate_displacement, DerivedConstants, ModelConfig};
use crate::tolerances::{BRUTE_FORCE_MIN_STEPS, ODE_RESIDUAL_MAX_STEP};

/// Selects which second-moment constants an oracle evaluates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MomentVariant {
    /// Displacement-only constants `c1`, `c2`.
    Paper,
    /// Constants `c1_corr`, `c2_corr` carrying the motion variance.
    Corrected,
}

impl MomentVariant {
    pub fn label(self) -> &'static str {
        match self {
            MomentVariant::Paper => "paper",
            MomentVariant::Corrected => "corrected",
        }
    }
}

/// `(c1, c2)` for the chosen variant.
pub fn variant_constants(dc: &DerivedConstants, variant: MomentVariant) -> (f64, f64) {
    match variant {
        MomentVariant::Paper => (dc.c1, dc.c2),
        MomentVariant::Corrected => (dc.c1_corr, dc.c2_corr),
    }
}

/// `E[|T_t|] = exp(lambda_hat t)`.
pub fn expected_population(dc: &DerivedConstants, t: f64) -> f64 {
    (dc.lambda_hat * t).exp()
}

/// `E[|T_t|^2] = (1 + kappa) exp(2 lambda_hat t) - kappa exp(lambda_hat t)`.
pub fn population_second_moment(dc: &DerivedConstants, t: f64) -> f64 {
    let g = (dc.lambda_hat * t).exp();
    (1.0 + dc.kappa) * g * g - dc.kappa * g
}

/// `E[S_t] = 0` for every `t`: the centering speed `r` absorbs both the
/// motion drift and the mean displacement per branching.
pub fn centered_sum_mean(_dc: &DerivedConstants, _t: f64) -> f64 {
    0.0
}

/// `E[S_t^2]` under the chosen variant.
pub fn centered_sum_second_moment(dc: &DerivedConstants, t: f64, variant: MomentVariant) -> f64 {
    let (c1, c2) = variant_constants(dc, variant);
    let g = (dc.lambda_hat * t).exp();
    c1 * g * g - c2 * t * g - c1 * g
}

/// `Var(M_t)` for the martingale `M_t = exp(-lambda_hat t) S_t`, evaluated in
/// the decay form `c1 - c2 t e^{-lambda_hat t} - c1 e^{-lambda_hat t}` so it
/// stays finite for large `t` and visibly converges to `c1`.
pub fn martingale_variance(dc: &DerivedConstants, t: f64, variant: MomentVariant) -> f64 {
    let (c1, c2) = variant_constants(dc, variant);
    let d = (-dc.lambda_hat * t).exp();
    c1 - c2 * t * d - c1 * d
}

/// Right-hand side of the second-moment ODE at `t`, with `(a, b)` rebuilt
/// from the variant constants.
pub fn ode_rhs(dc: &DerivedConstants, t: f64, variant: MomentVariant) -> f64 {
    let (c1, c2) = variant_constants(dc, variant);
    let a = dc.lambda_hat * c1;
    let b = -c2;
    let g = (dc.lambda_hat * t).exp();
    dc.lambda_hat * centered_sum_second_moment(dc, t, variant) + a * g * g + b * g
}

/// Central-difference derivative of the closed-form `E[S_t^2]` minus the ODE
/// right-hand side. Near zero when the closed form actually solves the ODE.
///
/// Requires `0 < h <= 1e-4` and `t >= h`.
pub fn ode_residual(dc: &DerivedConstants, t: f64, h: f64, variant: MomentVariant) -> f64 {
    assert!(
        h > 0.0 && h <= ODE_RESIDUAL_MAX_STEP,
        "step h = {h} outside (0, 1e-4]"
    );
    assert!(
        t >= h,
        "t = {t} must be >= h = {h} for the central difference"
    );
    let fd = (centered_sum_second_moment(dc, t + h, variant)
        - centered_sum_second_moment(dc, t - h, variant))
        / (2.0 * h);
    fd - ode_rhs(dc, t, variant)
}

/// `E[S_t^2]` obtained independently of the closed form: classic RK4 on the
/// moment system for `(E[S_t], E[|T_t| S_t], E[S_t^2])`, assembled from the
/// raw one-step moments of the model.
///
/// The system, writing `p1 = E[|T_t|]`, `p2 = E[|T_t|^2]`, `g = E[Z_1] - r +
/// lambda E[sum D]` (identically zero by the definition of `r`, kept
/// explicitly), `F = E[N(N-1)]` and `m_D = E[D]`:
///
/// ```text
/// m1' = lambda_hat m1 + g p1
/// c'  = lambda_hat c  + g p2 + lambda F (p1 m1 + m_D p1^2)
/// m2' = lambda_hat m2 + 2 g c + Var(Z_1) p2
///       + lambda (F m1^2 + 2 F m_D p1 m1 + E[sum D^2] p2
///                 + (E[(sum D)^2] - E[sum D^2]) p1^2)
/// ```
///
/// Requires `t >= 0` and `n_steps >= 1000`.
pub fn brute_force_second_moment(config: &ModelConfig, t: f64, n_steps: usize) -> f64 {
    assert!(
        t >= 0.0 && t.is_finite(),
        "time t = {t} must be finite and non-negative"
    );
    assert!(
        n_steps >= BRUTE_FORCE_MIN_STEPS,
        "n_steps = {n_steps} below the minimum {BRUTE_FORCE_MIN_STEPS}"
    );
    config.validate().expect("valid model config");
    if t == 0.0 {
        return 0.0;
    }

    let lambda = config.lambda;
    let agg = aggregate_displacement(&config.offspring, &config.displacement, config.coupling);
    let mean_excess = config.offspring.mean_excess();
    let lambda_hat = lambda * mean_excess;
    let kappa = config.offspring.second_moment_excess() / mean_excess;
    let fact = config.offspring.factorial_moment();
    let mean_disp = config.displacement.mean();
    let var_z = config.motion.var_rate();
    let r = config.motion.mean_rate() + lambda * agg.sum_mean;
    let g = config.motion.mean_rate() - r + lambda * agg.sum_mean;

    let deriv = |time: f64, y: [f64; 3]| -> [f64; 3] {
        let p1 = (lambda_hat * time).exp();
        let p2 = (1.0 + kappa) * p1 * p1 - kappa * p1;
        let [m1, cross, m2] = y;
        let dm1 = lambda_hat * m1 + g * p1;
        let dcross = lambda_hat * cross + g * p2 + lambda * fact * (p1 * m1 + mean_disp * p1 * p1);
        let dm2 = lambda_hat * m2
            + 2.0 * g * cross
            + var_z * p2
            + lambda
                * (fact * m1 * m1
                    + 2.0 * fact * mean_disp * p1 * m1
                    + agg.sum_of_squares * p2
                    + (agg.sum_squared - agg.sum_of_squares) * p1 * p1);
        [dm1, dcross, dm2]
    };

    let h = t / n_steps as f64;
    let mut y = [0.0_f64; 3];
    for step in 0..n_steps {
        let time = step as f64 * h;
        let k1 = deriv(time, y);
        let k2 = deriv(time + 0.5 * h, advance(y, k1, 0.5 * h));
        let k3 = deriv(time + 0.5 * h, advance(y, k2, 0.5 * h));
        let k4 = deriv(time + h, advance(y, k3, h));
        for j in 0..3 {
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
    }
    y[2]
}

fn advance(y: [f64; 3], k: [f64; 3], h: f64) -> [f64; 3] {
    [y[0] + h * k[0], y[1] + h * k[1], y[2] + h * k[2]]
}
