use gfr_bayes::harness::validate::random_context;
use gfr_bayes::model::{ModelConfig, ParamPair};
use gfr_bayes::oracle::{integrate_2d, posterior_moment, QuadratureSpec, TailStrategy, Weight};
use gfr_bayes::posterior::{EntropyMode, LossConstants, PosteriorContext, PosteriorError};
use gfr_bayes::sample::CensoredSample;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rel(x: f64, y: f64) -> f64 {
    (x - y).abs() / y.abs()
}

fn context(seed: u64) -> (ModelConfig, CensoredSample, PosteriorContext) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (cfg, sample) = random_context(&mut rng);
    let ctx = PosteriorContext::new(cfg, &sample).unwrap();
    (cfg, sample, ctx)
}

/// `∫∫ a^(l-1) b^(m-1) Π(a + b t_i^(θ-1)) e^{-a A_p - b B_q} da db` straight
/// from the failure times.
fn phi_by_quadrature(ctx: &PosteriorContext, sample: &CensoredSample, l: i32, m: i32, p: u8, q: u8) -> f64 {
    let theta = ctx.config().theta();
    let v: Vec<f64> = sample.times().iter().map(|t| t.powf(theta - 1.0)).collect();
    let (ra, rb) = (ctx.rate_a(p), ctx.rate_b(q));
    let r = v.len() as f64;
    let (sa, sb) = ((r + l as f64) / ra, (r + m as f64) / rb);
    let spec = QuadratureSpec::default().with_tolerance(1e-10);
    let outer = spec.with_tail(TailStrategy::Transform { scale: sa });
    let inner = spec.with_tail(TailStrategy::Transform { scale: sb }).with_tolerance(1e-11);
    // evaluate relative to the value at the scale point to keep magnitudes near one
    let ln_at = |a: f64, b: f64| {
        (l - 1) as f64 * a.ln() + (m - 1) as f64 * b.ln() + v.iter().map(|x| (a + b * x).ln()).sum::<f64>()
            - a * ra
            - b * rb
    };
    let offset = ln_at(sa, sb);
    let q = integrate_2d(|a, b| (ln_at(a, b) - offset).exp(), &outer, &inner).unwrap();
    q.value * offset.exp()
}

#[test]
fn phi_matches_its_defining_integral() {
    for seed in 0..6 {
        let (_, sample, ctx) = context(seed);
        if ctx.r() > 10 {
            continue;
        }
        for (l, m) in [(1, 1), (2, 1), (1, 2)] {
            for (p, q) in [(1, 1), (2, 2), (1, 2), (2, 1)] {
                let closed = ctx.phi(l as u32, m as u32, p, q, 0.0, 0.0).unwrap().to_f64();
                let quad = phi_by_quadrature(&ctx, &sample, l, m, p, q);
                assert!(rel(closed, quad) < 1e-6, "seed {seed} Φ({l},{m},{p},{q}): {closed} vs {quad}");
            }
        }
    }
}

#[test]
fn normalizer_inverts_marginal_bracket() {
    for seed in 0..20 {
        let (cfg, _, ctx) = context(seed);
        let bracket = ctx.prior_weighted_phi(1, 1, 0.0, 0.0).unwrap().to_f64() * cfg.lambda1() * cfg.lambda2();
        assert!((ctx.normalizer().unwrap() * bracket - 1.0).abs() < 1e-13);
    }
}

#[test]
fn posterior_integrates_to_one() {
    let spec = QuadratureSpec::default().with_tolerance(1e-10);
    for seed in 100..106 {
        let (_, _, ctx) = context(seed);
        let (ea, eb) = ctx.estimate_squared_error().unwrap();
        let outer = spec.with_tail(TailStrategy::Transform { scale: ea });
        let inner = spec.with_tail(TailStrategy::Transform { scale: eb });
        let q = integrate_2d(
            |a, b| ParamPair::new(a, b).map_or(0.0, |p| ctx.posterior_density(p).unwrap()),
            &outer,
            &inner,
        )
        .unwrap();
        assert!((q.value - 1.0).abs() < 1e-6, "seed {seed}: {}", q.value);
    }
}

#[test]
fn posterior_means_match_quadrature() {
    let spec = QuadratureSpec::default().with_tolerance(1e-9);
    for seed in 200..210 {
        let (cfg, sample, ctx) = context(seed);
        let (a, b) = ctx.estimate_squared_error().unwrap();
        let qa = posterior_moment(cfg, &sample, Weight::A, &spec).unwrap();
        let qb = posterior_moment(cfg, &sample, Weight::B, &spec).unwrap();
        assert!(rel(a, qa.value) < 1e-6f64.max(10.0 * qa.error / qa.value));
        assert!(rel(b, qb.value) < 1e-6f64.max(10.0 * qb.error / qb.value));
    }
}

#[test]
fn entropy_modes() {
    for seed in 300..320 {
        let (_, _, ctx) = context(seed);
        let strict = ctx.estimate_entropy(EntropyMode::Strict).unwrap();
        assert_eq!((strict.a, strict.b), (0.0, 0.0));
        assert!(strict.a_divergent && strict.b_divergent);
        let drop = ctx.estimate_entropy(EntropyMode::DropDivergent).unwrap();
        assert!(drop.a > 0.0 && drop.b > 0.0 && drop.a.is_finite() && drop.b.is_finite());
        assert!(drop.a_divergent && drop.b_divergent);
        assert!(matches!(ctx.phi(0, 1, 1, 1, 0.0, 0.0), Err(PosteriorError::Divergent { .. })));
    }
}

#[test]
fn linex_tends_to_posterior_mean() {
    for seed in 400..420 {
        let (_, _, ctx) = context(seed);
        let (a_bs, b_bs) = ctx.estimate_squared_error().unwrap();
        let gap = |c: f64| {
            let (a, b) = ctx.estimate_linex(&LossConstants::new(c, c).unwrap()).unwrap();
            ((a_bs - a).abs(), (b_bs - b).abs())
        };
        let (ga3, gb3) = gap(1e-3);
        let (ga5, gb5) = gap(1e-5);
        assert!(ga5 * 10.0 <= ga3, "seed {seed}: {ga3} -> {ga5}");
        assert!(gb5 * 10.0 <= gb3, "seed {seed}: {gb3} -> {gb5}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jensen_ordering(seed in any::<u64>(), c in 0.01f64..100.0, negative in any::<bool>()) {
        let (_, _, ctx) = context(seed);
        let (a_bs, b_bs) = ctx.estimate_squared_error().unwrap();
        let (c1, c2) = if negative {
            // stay inside the region where E e^{-c a} is finite
            (-0.5 * ctx.rate_a(1) * (c / 100.0), -0.5 * ctx.rate_b(1) * (c / 100.0))
        } else {
            (c, c)
        };
        let (a_bl, b_bl) = ctx.estimate_linex(&LossConstants::new(c1, c2).unwrap()).unwrap();
        let tol = 1e-12 * a_bs.abs().max(1.0);
        prop_assert!(c1.signum() * (a_bs - a_bl) >= -tol);
        prop_assert!(c2.signum() * (b_bs - b_bl) >= -1e-12 * b_bs.abs().max(1.0));
    }

    #[test]
    fn estimators_ignore_input_order(seed in any::<u64>(), rot in 0usize..15) {
        let (cfg, sample, ctx) = context(seed);
        let mut times = sample.times().to_vec();
        let k = rot % times.len();
        times.rotate_left(k);
        times.reverse();
        let other = CensoredSample::from_unsorted(sample.n(), times).unwrap();
        let ctx2 = PosteriorContext::new(cfg, &other).unwrap();
        let loss = LossConstants::new(2.0, -0.1 * ctx.rate_b(1)).unwrap();
        prop_assert_eq!(
            ctx.estimate(&loss, EntropyMode::DropDivergent).unwrap(),
            ctx2.estimate(&loss, EntropyMode::DropDivergent).unwrap()
        );
    }
}
