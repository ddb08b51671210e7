//! Hazard, survival and density functions of the general failure rate model
//! `r(t) = a + b t^(θ-1)` together with the FGM bivariate exponential prior
//! on `(a, b)` and the resulting marginal lifetime density.
//!
//! Exponentials with large negative arguments are evaluated directly and may
//! underflow to zero.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("theta must be positive and finite, got {0}")]
    Theta(f64),
    #[error("lambda{index} must be positive and finite, got {value}")]
    Lambda { index: u8, value: f64 },
    #[error("rho must lie in [-1, 1], got {0}")]
    Rho(f64),
    #[error("invalid parameter pair (a={a}, b={b}): need a >= 0, b >= 0, a + b > 0")]
    Params { a: f64, b: f64 },
    #[error("hazard is singular at t = 0 when theta = {theta} < 1")]
    SingularOrigin { theta: f64 },
    #[error("time must be nonnegative and finite, got {0}")]
    Time(f64),
}

/// Known hyperparameters: shape `theta`, prior rates `lambda1`, `lambda2`
/// of `a` and `b`, and the FGM dependence `rho`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    theta: f64,
    lambda1: f64,
    lambda2: f64,
    rho: f64,
}

impl ModelConfig {
    pub fn new(theta: f64, lambda1: f64, lambda2: f64, rho: f64) -> Result<Self, ModelError> {
        if !(theta.is_finite() && theta > 0.0) {
            return Err(ModelError::Theta(theta));
        }
        if !(lambda1.is_finite() && lambda1 > 0.0) {
            return Err(ModelError::Lambda { index: 1, value: lambda1 });
        }
        if !(lambda2.is_finite() && lambda2 > 0.0) {
            return Err(ModelError::Lambda { index: 2, value: lambda2 });
        }
        if !(-1.0..=1.0).contains(&rho) {
            return Err(ModelError::Rho(rho));
        }
        Ok(Self { theta, lambda1, lambda2, rho })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }
}

/// A point `(a, b)` of the parameter space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamPair {
    a: f64,
    b: f64,
}

impl ParamPair {
    pub fn new(a: f64, b: f64) -> Result<Self, ModelError> {
        let ok = a.is_finite() && b.is_finite() && a >= 0.0 && b >= 0.0 && a + b > 0.0;
        if ok {
            Ok(Self { a, b })
        } else {
            Err(ModelError::Params { a, b })
        }
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }
}

fn check_time(theta: f64, t: f64) -> Result<(), ModelError> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(ModelError::Time(t));
    }
    if t == 0.0 && theta < 1.0 {
        return Err(ModelError::SingularOrigin { theta });
    }
    Ok(())
}

/// Failure rate `a + b t^(θ-1)`.
pub fn hazard(p: ParamPair, theta: f64, t: f64) -> Result<f64, ModelError> {
    check_time(theta, t)?;
    Ok(p.a + p.b * t.powf(theta - 1.0))
}

/// Cumulative hazard `a t + b t^θ / θ`.
pub fn cumulative_hazard(p: ParamPair, theta: f64, t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    p.a * t + p.b * t.powf(theta) / theta
}

/// Survival probability `exp(-(a t + b t^θ / θ))`.
pub fn survival(p: ParamPair, theta: f64, t: f64) -> f64 {
    (-cumulative_hazard(p, theta, t)).exp()
}

/// Conditional lifetime density given `(a, b)`: hazard times survival.
pub fn lifetime_pdf(p: ParamPair, theta: f64, t: f64) -> Result<f64, ModelError> {
    Ok(hazard(p, theta, t)? * survival(p, theta, t))
}

/// FGM prior density with exponential marginals of rates `lambda1`, `lambda2`.
pub fn prior_density(cfg: &ModelConfig, p: ParamPair) -> f64 {
    let (l1, l2) = (cfg.lambda1, cfg.lambda2);
    let ea = (-l1 * p.a).exp();
    let eb = (-l2 * p.b).exp();
    let base = l1 * l2 * ea * eb;
    let correction = l1 * l2 * cfg.rho * (2.0 * ea * ea - ea) * (2.0 * eb * eb - eb);
    (base + correction).max(0.0)
}

/// The four closed-form integrals `I1..I4` of the conditional density against
/// the exponential kernels `e^{-λ1 a - λ2 b}`, `e^{-2λ1 a - 2λ2 b}`,
/// `e^{-λ1 a - 2λ2 b}` and `e^{-2λ1 a - λ2 b}` respectively.
pub fn lifetime_kernel_integrals(cfg: &ModelConfig, t: f64) -> [f64; 4] {
    let (th, l1, l2) = (cfg.theta, cfg.lambda1, cfg.lambda2);
    let t_th = t.powf(th);
    let t_th1 = t.powf(th - 1.0);
    let kernel = |x: f64, y: f64| {
        th / ((t + x).powi(2) * (t_th + th * y)) + th * th * t_th1 / ((t + x) * (t_th + th * y).powi(2))
    };
    [
        kernel(l1, l2),
        kernel(2.0 * l1, 2.0 * l2),
        kernel(l1, 2.0 * l2),
        kernel(2.0 * l1, l2),
    ]
}

/// `λ1 λ2 (I1 + ρ(4 I2 - 2 I3 - 2 I4 + I1))`, the unsimplified marginal.
pub fn marginal_lifetime_pdf_from_integrals(cfg: &ModelConfig, t: f64) -> f64 {
    let [i1, i2, i3, i4] = lifetime_kernel_integrals(cfg, t);
    cfg.lambda1 * cfg.lambda2 * (i1 + cfg.rho * (4.0 * i2 - 2.0 * i3 - 2.0 * i4 + i1))
}

/// Marginal lifetime density `f_T(t)` after integrating `(a, b)` out against
/// the prior, in its simplified two-term form.
pub fn marginal_lifetime_pdf(cfg: &ModelConfig, t: f64) -> f64 {
    let (th, l1, l2, rho) = (cfg.theta, cfg.lambda1, cfg.lambda2, cfg.rho);
    let x = t.powf(th);
    let xm1 = t.powf(th - 1.0);
    let independent = l1 * l2 * th * ((th + 1.0) * x + th * l1 * xm1 + th * l2)
        / ((l1 + t).powi(2) * (x + th * l2).powi(2));
    if rho == 0.0 {
        return independent;
    }
    let u1 = l2 * th + x;
    let u2 = 2.0 * l2 * th + x;
    let w1 = l1 + t;
    let w2 = 2.0 * l1 + t;
    let bracket = (t * t - 2.0 * l1 * l1) / (w2 * w1) + th * (x * x - 2.0 * l2 * l2 * th * th) / (u2 * u1);
    independent + rho * l1 * l2 * th * x / (u2 * u1 * w2 * w1) * bracket
}

/// Plug-in reliability estimate at `t` from estimates of `a` and `b`.
pub fn plugin_reliability(est_a: f64, est_b: f64, theta: f64, t: f64) -> f64 {
    (-(est_a * t + est_b * t.powf(theta) / theta)).exp()
}

/// Plug-in failure rate estimate at `t`.
pub fn plugin_hazard(est_a: f64, est_b: f64, theta: f64, t: f64) -> Result<f64, ModelError> {
    check_time(theta, t)?;
    Ok(est_a + est_b * t.powf(theta - 1.0))
}
