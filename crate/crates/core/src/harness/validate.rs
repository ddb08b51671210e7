//! Cross-checks of the closed forms against the brute-force oracles, run by
//! `gfr-bayes validate`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{lifetime_pdf, marginal_lifetime_pdf, prior_density, ModelConfig, ParamPair};
use crate::oracle::{esp_bruteforce, integrate_1d, integrate_2d, posterior_moment, OracleError, QuadratureSpec, TailStrategy, Weight};
use crate::posterior::{EntropyMode, LossConstants, PosteriorContext};
use crate::sample::{summarize, CensoredSample};

/// Outcome of one named check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, worst: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            passed: worst <= tolerance,
            detail: format!("worst relative error {worst:.3e} (tolerance {tolerance:.0e})"),
        }
    }

    fn failed(name: &str, why: String) -> Self {
        Self { name: name.to_string(), passed: false, detail: why }
    }
}

fn rel(x: f64, y: f64) -> f64 {
    if x == y {
        0.0
    } else {
        (x - y).abs() / y.abs()
    }
}

/// A model and censored sample drawn over θ ∈ [1.1, 5], λ ∈ [0.05, 2],
/// ρ ∈ [-1, 1], n ≤ 50 and r ≤ 15, with failure times in (0.05, 3).
pub fn random_context<R: Rng>(rng: &mut R) -> (ModelConfig, CensoredSample) {
    let cfg = ModelConfig::new(
        rng.random_range(1.1..=5.0),
        rng.random_range(0.05..=2.0),
        rng.random_range(0.05..=2.0),
        rng.random_range(-1.0..=1.0),
    )
    .expect("ranges are inside the parameter domain");
    let r = rng.random_range(1..=15usize);
    let n = rng.random_range(r..=50usize);
    loop {
        let times: Vec<f64> = (0..r).map(|_| rng.random_range(0.05..3.0)).collect();
        if let Ok(sample) = CensoredSample::from_unsorted(n, times) {
            return (cfg, sample);
        }
    }
}

/// Closed-form posterior means against 2-D quadrature.
pub fn check_posterior_means(rng: &mut ChaCha8Rng, contexts: usize, tolerance: f64) -> Check {
    let name = "posterior means (squared error) vs quadrature";
    let spec = QuadratureSpec::default().with_tolerance(1e-9);
    let mut worst = 0.0f64;
    for _ in 0..contexts {
        let (cfg, sample) = random_context(rng);
        let (a, b) = match PosteriorContext::new(cfg, &sample).and_then(|c| c.estimate_squared_error()) {
            Ok(v) => v,
            Err(e) => return Check::failed(name, e.to_string()),
        };
        for (est, w) in [(a, Weight::A), (b, Weight::B)] {
            match posterior_moment(cfg, &sample, w, &spec) {
                Ok(q) => worst = worst.max(rel(est, q.value)),
                Err(e) => return Check::failed(name, e.to_string()),
            }
        }
    }
    Check::new(name, worst, tolerance)
}

/// Linex estimates against quadrature of `E[e^{-c a}]` and `E[e^{-c b}]`.
pub fn check_linex(rng: &mut ChaCha8Rng, contexts: usize, tolerance: f64) -> Check {
    let name = "linex estimates vs quadrature";
    let spec = QuadratureSpec::default().with_tolerance(1e-9);
    let mut worst = 0.0f64;
    for _ in 0..contexts {
        let (cfg, sample) = random_context(rng);
        let c1 = rng.random_range(0.5..10.0);
        let c2 = rng.random_range(0.5..10.0);
        let loss = LossConstants::new(c1, c2).expect("nonzero curvatures");
        let (a, b) = match PosteriorContext::new(cfg, &sample).and_then(|c| c.estimate_linex(&loss)) {
            Ok(v) => v,
            Err(e) => return Check::failed(name, e.to_string()),
        };
        for (est, w, c) in [(a, Weight::ExpNegA(c1), c1), (b, Weight::ExpNegB(c2), c2)] {
            match posterior_moment(cfg, &sample, w, &spec) {
                Ok(q) => worst = worst.max(rel(est, -q.value.ln() / c)),
                Err(e) => return Check::failed(name, e.to_string()),
            }
        }
    }
    Check::new(name, worst, tolerance)
}

/// Strict-mode divergence flags against the oracle's divergence detection.
pub fn check_entropy_divergence(rng: &mut ChaCha8Rng, contexts: usize) -> Check {
    let name = "entropy-loss divergence flags vs quadrature";
    let spec = QuadratureSpec::default().with_tolerance(1e-7);
    for _ in 0..contexts {
        let (cfg, sample) = random_context(rng);
        let est = match PosteriorContext::new(cfg, &sample).and_then(|c| c.estimate_entropy(EntropyMode::Strict)) {
            Ok(v) => v,
            Err(e) => return Check::failed(name, e.to_string()),
        };
        for (flag, w) in [(est.a_divergent, Weight::InvA), (est.b_divergent, Weight::InvB)] {
            let detected = matches!(posterior_moment(cfg, &sample, w, &spec), Err(OracleError::DivergenceDetected { .. }));
            if flag != detected {
                return Check::failed(name, format!("closed form says divergent = {flag}, quadrature says {detected}"));
            }
        }
    }
    Check { name: name.to_string(), passed: true, detail: format!("{contexts} contexts agree") }
}

/// Closed-form symmetric polynomials against subset enumeration.
pub fn check_symmetric_polynomials(rng: &mut ChaCha8Rng, samples: usize, tolerance: f64) -> Check {
    let name = "symmetric polynomials vs subset enumeration";
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let r = rng.random_range(1..=12usize);
        let theta = rng.random_range(0.2..6.0);
        let times: Vec<f64> = (0..r).map(|_| rng.random_range(0.01..5.0)).collect();
        let Ok(sample) = CensoredSample::from_unsorted(r + 3, times) else { continue };
        let stats = match summarize(&sample, theta) {
            Ok(s) => s,
            Err(e) => return Check::failed(name, e.to_string()),
        };
        let values: Vec<f64> = sample.times().iter().map(|t| t.powf(theta - 1.0)).collect();
        let brute = esp_bruteforce(&values).expect("r ≤ 12");
        for (j, e) in brute.iter().enumerate() {
            worst = worst.max(rel(stats.m(j), *e));
        }
    }
    Check::new(name, worst, tolerance)
}

/// Prior, lifetime, marginal and posterior densities integrate to one.
pub fn check_normalizations(rng: &mut ChaCha8Rng, configs: usize, tolerance: f64) -> Check {
    let name = "density normalizations";
    let spec = QuadratureSpec::default().with_tolerance(1e-10);
    let mut worst = 0.0f64;
    for _ in 0..configs {
        let (cfg, sample) = random_context(rng);
        let run = || -> Result<Vec<f64>, String> {
            let e = |e: OracleError| e.to_string();
            let prior = {
                let outer = spec.with_tail(TailStrategy::Transform { scale: 1.0 / cfg.lambda1() });
                let inner = spec.with_tail(TailStrategy::Transform { scale: 1.0 / cfg.lambda2() });
                integrate_2d(|a, b| ParamPair::new(a, b).map_or(0.0, |p| prior_density(&cfg, p)), &outer, &inner).map_err(e)?.value
            };
            let p = ParamPair::new(cfg.lambda1().recip(), cfg.lambda2().recip()).map_err(|x| x.to_string())?;
            let lifetime = integrate_1d(|t| lifetime_pdf(p, cfg.theta(), t).unwrap_or(0.0), &spec).map_err(e)?.value;
            let marginal = integrate_1d(|t| marginal_lifetime_pdf(&cfg, t), &spec).map_err(e)?.value;
            let ctx = PosteriorContext::new(cfg, &sample).map_err(|x| x.to_string())?;
            let (ea, eb) = ctx.estimate_squared_error().map_err(|x| x.to_string())?;
            let outer = spec.with_tail(TailStrategy::Transform { scale: ea });
            let inner = spec.with_tail(TailStrategy::Transform { scale: eb });
            let post = integrate_2d(
                |a, b| ParamPair::new(a, b).map_or(Ok(0.0), |p| ctx.posterior_density(p)).unwrap_or(f64::NAN),
                &outer,
                &inner,
            )
            .map_err(e)?
            .value;
            Ok(vec![prior, lifetime, marginal, post])
        };
        match run() {
            Ok(values) => {
                for v in values {
                    worst = worst.max(rel(v, 1.0));
                }
            }
            Err(why) => return Check::failed(name, why),
        }
    }
    Check::new(name, worst, tolerance)
}

/// The quick suite behind `gfr-bayes validate`.
pub fn run_validation(seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    vec![
        check_symmetric_polynomials(&mut rng, 100, 1e-12),
        check_posterior_means(&mut rng, 8, 1e-6),
        check_linex(&mut rng, 4, 1e-6),
        check_entropy_divergence(&mut rng, 3),
        check_normalizations(&mut rng, 3, 1e-6),
    ]
}
