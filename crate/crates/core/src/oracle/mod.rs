//! Slow, direct cross-checks for the closed-form modules.
//!
//! Nothing here calls into [`crate::posterior`] or the statistics of
//! [`crate::sample`]: posterior integrands are rebuilt from the raw failure
//! times and the prior in its copula form, and symmetric polynomials are
//! enumerated subset by subset.

pub mod quadrature;

use thiserror::Error;

use crate::model::ModelConfig;
use crate::sample::CensoredSample;

pub use quadrature::{
    cumulative_at, integrate_1d, integrate_2d, integrate_interval, Quadrature, QuadratureSpec, TailStrategy,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("no convergence after {subdivisions} subdivisions (value {value}, error {error})")]
    NonConvergence { subdivisions: usize, value: f64, error: f64 },
    #[error("integrand is not finite near {at}")]
    NonFinite { at: f64 },
    #[error("integral diverges near the axis (successive decades contribute {near} vs {far})")]
    DivergenceDetected { near: f64, far: f64 },
    #[error("brute-force enumeration limited to {max} values, got {got}")]
    TooLarge { max: usize, got: usize },
}

pub const ESP_MAX_LEN: usize = 20;

/// Elementary symmetric polynomials by summing the product of every subset.
pub fn esp_bruteforce(values: &[f64]) -> Result<Vec<f64>, OracleError> {
    let k = values.len();
    if k > ESP_MAX_LEN {
        return Err(OracleError::TooLarge { max: ESP_MAX_LEN, got: k });
    }
    // compensated sums per degree
    let mut sum = vec![0.0f64; k + 1];
    let mut carry = vec![0.0f64; k + 1];
    for mask in 0u32..(1u32 << k) {
        let mut prod = 1.0;
        for (i, v) in values.iter().enumerate() {
            if mask & (1 << i) != 0 {
                prod *= v;
            }
        }
        let d = mask.count_ones() as usize;
        let t = sum[d] + prod;
        if sum[d].abs() >= prod.abs() {
            carry[d] += (sum[d] - t) + prod;
        } else {
            carry[d] += (prod - t) + sum[d];
        }
        sum[d] = t;
    }
    Ok(sum.iter().zip(&carry).map(|(s, c)| s + c).collect())
}

/// Weight functions whose posterior expectations define the estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weight {
    One,
    A,
    B,
    InvA,
    InvB,
    ExpNegA(f64),
    ExpNegB(f64),
}

impl Weight {
    fn eval(&self, a: f64, b: f64) -> f64 {
        match *self {
            Weight::One => 1.0,
            Weight::A => a,
            Weight::B => b,
            Weight::InvA => 1.0 / a,
            Weight::InvB => 1.0 / b,
            Weight::ExpNegA(c) => (-c * a).exp(),
            Weight::ExpNegB(c) => (-c * b).exp(),
        }
    }
}

/// Unnormalized posterior `L(t | a, b) h(a, b)` evaluated straight from the
/// failure times, rescaled by a fixed offset so its peak is of order one.
#[derive(Debug, Clone)]
pub struct PosteriorIntegrand {
    cfg: ModelConfig,
    times: Vec<f64>,
    censored: f64,
    scale_a: f64,
    scale_b: f64,
    offset: f64,
}

impl PosteriorIntegrand {
    pub fn new(cfg: ModelConfig, sample: &CensoredSample) -> Self {
        let times = sample.times().to_vec();
        let censored = (sample.n() - sample.r()) as f64;
        let th = cfg.theta();
        let t_r = *times.last().unwrap();
        let exposure_a: f64 = times.iter().sum::<f64>() + censored * t_r;
        let exposure_b: f64 = (times.iter().map(|t| t.powf(th)).sum::<f64>() + censored * t_r.powf(th)) / th;
        let r = times.len() as f64;
        let mut this = Self {
            cfg,
            times,
            censored,
            scale_a: (r + 1.0) / (exposure_a + cfg.lambda1()),
            scale_b: (r + 1.0) / (exposure_b + cfg.lambda2()),
            offset: 0.0,
        };
        // crude peak search on a log grid
        let mut best = f64::NEG_INFINITY;
        for i in 0..60 {
            for j in 0..60 {
                let a = this.scale_a * 10f64.powf(-3.0 + 4.5 * i as f64 / 59.0);
                let b = this.scale_b * 10f64.powf(-3.0 + 4.5 * j as f64 / 59.0);
                best = best.max(this.ln_unnormalized(a, b));
            }
        }
        this.offset = best;
        this
    }

    /// Typical posterior magnitudes of `a` and `b`, used as transform scales.
    pub fn scales(&self) -> (f64, f64) {
        (self.scale_a, self.scale_b)
    }

    fn ln_unnormalized(&self, a: f64, b: f64) -> f64 {
        let th = self.cfg.theta();
        let (l1, l2, rho) = (self.cfg.lambda1(), self.cfg.lambda2(), self.cfg.rho());
        let mut ln_lik = 0.0;
        for &t in &self.times {
            let h = a + b * t.powf(th - 1.0);
            ln_lik += h.ln() - (a * t + b * t.powf(th) / th);
        }
        let t_r = *self.times.last().unwrap();
        ln_lik -= self.censored * (a * t_r + b * t_r.powf(th) / th);

        // FGM: f(a) g(b) [1 + ρ (1 - 2F(a)) (1 - 2G(b))]
        let big_f = 1.0 - (-l1 * a).exp();
        let big_g = 1.0 - (-l2 * b).exp();
        let copula = 1.0 + rho * (1.0 - 2.0 * big_f) * (1.0 - 2.0 * big_g);
        let ln_prior = l1.ln() - l1 * a + l2.ln() - l2 * b + copula.max(0.0).ln();
        ln_lik + ln_prior
    }

    /// Posterior density up to the constant `exp(offset)`.
    pub fn eval(&self, a: f64, b: f64) -> f64 {
        let x = self.ln_unnormalized(a, b) - self.offset;
        if x.is_nan() {
            0.0
        } else {
            x.exp()
        }
    }

    /// `ln` of the constant dividing [`Self::eval`] back to `L h`.
    pub fn offset(&self) -> f64 {
        self.offset
    }
}

fn axis_specs(base: &QuadratureSpec, integrand: &PosteriorIntegrand) -> (QuadratureSpec, QuadratureSpec) {
    let (sa, sb) = integrand.scales();
    let outer = base.with_tail(TailStrategy::Transform { scale: sa });
    let inner = base
        .with_tail(TailStrategy::Transform { scale: sb })
        .with_tolerance(base.relative_tolerance * 0.1);
    (outer, inner)
}

/// `∫∫ w(a, b) L h da db` up to the integrand offset, integrating `b` innermost.
fn weighted_integral(
    integrand: &PosteriorIntegrand,
    weight: Weight,
    spec: &QuadratureSpec,
) -> Result<Quadrature, OracleError> {
    let (outer, inner) = axis_specs(spec, integrand);
    match weight {
        Weight::InvB | Weight::B | Weight::ExpNegB(_) => {
            // integrate a innermost so a singularity in b sits on the outer axis
            let (sa, sb) = integrand.scales();
            let outer_b = spec.with_tail(TailStrategy::Transform { scale: sb });
            let inner_a = spec
                .with_tail(TailStrategy::Transform { scale: sa })
                .with_tolerance(spec.relative_tolerance * 0.1);
            integrate_2d(|b, a| weight.eval(a, b) * integrand.eval(a, b), &outer_b, &inner_a)
        }
        _ => integrate_2d(|a, b| weight.eval(a, b) * integrand.eval(a, b), &outer, &inner),
    }
}

/// Detects a `1/x` singularity of a weighted marginal at the origin by
/// comparing the mass in two successive decade bands next to the axis.
fn check_axis_divergence<F>(marginal: F, scale: f64, spec: &QuadratureSpec) -> Result<(), OracleError>
where
    F: Fn(f64) -> f64,
{
    let band = |lo: f64, hi: f64| -> Result<f64, OracleError> {
        // logarithmic substitution x = e^s resolves the 1/x shape
        let q = integrate_interval(|s| {
            let x = s.exp();
            marginal(x) * x
        }, lo.ln(), hi.ln(), &spec.with_tolerance(1e-6))?;
        Ok(q.value)
    };
    let far = band(scale * 1e-8, scale * 1e-4)?;
    let near = band(scale * 1e-12, scale * 1e-8)?;
    if near > 0.1 * far && near > 0.0 {
        return Err(OracleError::DivergenceDetected { near, far });
    }
    Ok(())
}

/// Posterior expectation of `weight` by 2-D adaptive quadrature of the
/// weighted and unweighted posterior.
pub fn posterior_moment(
    cfg: ModelConfig,
    sample: &CensoredSample,
    weight: Weight,
    spec: &QuadratureSpec,
) -> Result<Quadrature, OracleError> {
    let integrand = PosteriorIntegrand::new(cfg, sample);
    let (sa, sb) = integrand.scales();
    match weight {
        Weight::InvA => {
            let inner = spec.with_tail(TailStrategy::Transform { scale: sb });
            check_axis_divergence(
                |a| {
                    quadrature::integrate_half_line_with(|b| Ok(integrand.eval(a, b)), 0.0, &inner)
                        .map(|q| q.value / a)
                        .unwrap_or(f64::NAN)
                },
                sa,
                spec,
            )?;
        }
        Weight::InvB => {
            let inner = spec.with_tail(TailStrategy::Transform { scale: sa });
            check_axis_divergence(
                |b| {
                    quadrature::integrate_half_line_with(|a| Ok(integrand.eval(a, b)), 0.0, &inner)
                        .map(|q| q.value / b)
                        .unwrap_or(f64::NAN)
                },
                sb,
                spec,
            )?;
        }
        _ => {}
    }
    let norm = weighted_integral(&integrand, Weight::One, spec)?;
    if weight == Weight::One {
        return Ok(Quadrature { value: 1.0, error: norm.error / norm.value });
    }
    let num = weighted_integral(&integrand, weight, spec)?;
    let value = num.value / norm.value;
    let rel_err = num.error / num.value.abs() + norm.error / norm.value;
    Ok(Quadrature { value, error: rel_err * value.abs() })
}

/// `∫∫ L h da db`, the marginal density of the sample, by quadrature.
pub fn marginal_sample_density(
    cfg: ModelConfig,
    sample: &CensoredSample,
    spec: &QuadratureSpec,
) -> Result<Quadrature, OracleError> {
    let integrand = PosteriorIntegrand::new(cfg, sample);
    let q = weighted_integral(&integrand, Weight::One, spec)?;
    let k = integrand.offset().exp();
    Ok(Quadrature { value: q.value * k, error: q.error * k })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn esp_examples() {
        assert_eq!(esp_bruteforce(&[2.0, 3.0]).unwrap(), vec![1.0, 5.0, 6.0]);
        assert_eq!(esp_bruteforce(&[1.0; 4]).unwrap(), vec![1.0, 4.0, 6.0, 4.0, 1.0]);
        assert_eq!(esp_bruteforce(&[]).unwrap(), vec![1.0]);
        assert!(matches!(esp_bruteforce(&[1.0; 21]), Err(OracleError::TooLarge { .. })));
    }

    fn tiny() -> (ModelConfig, CensoredSample) {
        (
            ModelConfig::new(2.0, 1.0, 1.0, 0.0).unwrap(),
            CensoredSample::new(1, 1, vec![1.0]).unwrap(),
        )
    }

    #[test]
    fn moments_of_tiny_context() {
        let (cfg, s) = tiny();
        let spec = QuadratureSpec::default().with_tolerance(1e-10);
        let one = posterior_moment(cfg, &s, Weight::One, &spec).unwrap();
        assert_eq!(one.value, 1.0);
        let a = posterior_moment(cfg, &s, Weight::A, &spec).unwrap();
        assert!((a.value - 5.0 / 7.0).abs() < 1e-8, "{a:?}");
        let e = posterior_moment(cfg, &s, Weight::ExpNegA(1.0), &spec).unwrap();
        assert!((-e.value.ln() - 0.559615787935423).abs() < 1e-8, "{e:?}");
        let m = marginal_sample_density(cfg, &s, &spec).unwrap();
        assert!((m.value - 7.0 / 18.0).abs() < 1e-9, "{m:?}");
    }

    #[test]
    fn reciprocal_weights_diverge() {
        let (cfg, s) = tiny();
        let spec = QuadratureSpec::default();
        assert!(matches!(
            posterior_moment(cfg, &s, Weight::InvA, &spec),
            Err(OracleError::DivergenceDetected { .. })
        ));
        assert!(matches!(
            posterior_moment(cfg, &s, Weight::InvB, &spec),
            Err(OracleError::DivergenceDetected { .. })
        ));
    }
}
