//! Posterior of `(a, b)` given a censored sample, and the Bayes estimators
//! under squared error, linex and entropy loss.
//!
//! Every posterior expectation reduces to combinations of
//!
//! ```text
//! Φ(l, m, p, q) = Σ_j M_j Γ(r-j+l) / A_p^(r-j+l) · Γ(j+m) / B_q^(j+m)
//! A_p = S1 + p λ1 (+ shift1),   B_q = S2/θ + q λ2 (+ shift2)
//! ```
//!
//! weighted by the FGM prior coefficients. The sums are formed in log space
//! since `Γ(r + 2)` and `A_p^(r+1)` leave double range for moderate `r`.

use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::model::{ModelConfig, ParamPair};
use crate::sample::{summarize, CensoredSample, SampleError, SummaryStats};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PosteriorError {
    #[error("Φ({l},{m},·,·) diverges: Γ(0) at j = {j}")]
    Divergent { l: u32, m: u32, j: usize },
    #[error("marginal density of the sample is not positive ({0})")]
    NonPositiveMarginal(f64),
    #[error("linex curvature c{index} = {value} must exceed {bound}")]
    CurvatureTooNegative { index: u8, value: f64, bound: f64 },
    #[error("linex curvature c{index} must be nonzero and finite, got {value}")]
    BadCurvature { index: u8, value: f64 },
    #[error("loss weight `{name}` must be positive and finite, got {value}")]
    BadWeight { name: &'static str, value: f64 },
    #[error("non-finite or non-positive posterior expectation for {0}")]
    Numerical(&'static str),
    #[error(transparent)]
    Sample(#[from] SampleError),
}

/// How the divergent `Γ(0)` terms of the entropy-loss estimators are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EntropyMode {
    /// The posterior expectation of `1/a` (or `1/b`) is infinite, so the
    /// estimator is reported as zero.
    Strict,
    /// The divergent term is omitted from the sum.
    #[default]
    DropDivergent,
}

impl EntropyMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            EntropyMode::Strict => "strict",
            EntropyMode::DropDivergent => "drop",
        }
    }
}

impl std::str::FromStr for EntropyMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "strict" => Ok(EntropyMode::Strict),
            "drop" | "drop-divergent" => Ok(EntropyMode::DropDivergent),
            other => Err(format!("unknown entropy mode `{other}` (expected strict or drop)")),
        }
    }
}

/// Curvatures of the linex loss and the weights of all three losses.
///
/// The weights scale the risks only; the Bayes rules separate per component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConstants {
    pub c1: f64,
    pub c2: f64,
    pub k1: f64,
    pub k2: f64,
    pub l1: f64,
    pub l2: f64,
    pub m1: f64,
    pub m2: f64,
}

impl LossConstants {
    /// Linex curvatures with all weights set to one.
    pub fn new(c1: f64, c2: f64) -> Result<Self, PosteriorError> {
        Self { c1, c2, k1: 1.0, k2: 1.0, l1: 1.0, l2: 1.0, m1: 1.0, m2: 1.0 }.validated()
    }

    pub fn validated(self) -> Result<Self, PosteriorError> {
        for (index, value) in [(1, self.c1), (2, self.c2)] {
            if value == 0.0 || !value.is_finite() {
                return Err(PosteriorError::BadCurvature { index, value });
            }
        }
        let weights = [
            ("k1", self.k1),
            ("k2", self.k2),
            ("l1", self.l1),
            ("l2", self.l2),
            ("m1", self.m1),
            ("m2", self.m2),
        ];
        for (name, value) in weights {
            if !(value.is_finite() && value > 0.0) {
                return Err(PosteriorError::BadWeight { name, value });
            }
        }
        Ok(self)
    }
}

/// A sum of positive terms kept as `value · e^scale` with `value` of order one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogSum {
    pub scale: f64,
    pub value: f64,
}

impl LogSum {
    pub const ZERO: LogSum = LogSum { scale: f64::NEG_INFINITY, value: 0.0 };

    /// Max-shifted sum of `exp(ln_terms)`.
    pub fn from_ln_terms(ln_terms: &[f64]) -> Self {
        let max = ln_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Self::ZERO;
        }
        let value = ln_terms.iter().map(|&x| (x - max).exp()).sum();
        LogSum { scale: max, value }
    }

    pub fn ln(&self) -> f64 {
        self.scale + self.value.ln()
    }

    pub fn to_f64(&self) -> f64 {
        if self.value == 0.0 {
            0.0
        } else {
            self.value * self.scale.exp()
        }
    }

    /// `Σ coeffs[i] · sums[i]`, rescaled to the largest magnitude. The result
    /// may be negative.
    pub fn linear_combination(parts: &[(f64, LogSum)]) -> Self {
        let max = parts
            .iter()
            .filter(|(c, s)| *c != 0.0 && s.value != 0.0)
            .map(|(_, s)| s.scale)
            .fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Self::ZERO;
        }
        let value = parts
            .iter()
            .filter(|(c, s)| *c != 0.0 && s.value != 0.0)
            .map(|(c, s)| c * s.value * (s.scale - max).exp())
            .sum();
        LogSum { scale: max, value }
    }

    /// `self / other` as an ordinary float.
    pub fn ratio(&self, other: &LogSum) -> f64 {
        (self.value / other.value) * (self.scale - other.scale).exp()
    }
}

/// Which of the four prior kernels a `Φ` term belongs to.
const KERNELS: [(u8, u8); 4] = [(1, 1), (2, 2), (1, 2), (2, 1)];

fn kernel_coefficient(rho: f64, p: u8, q: u8) -> f64 {
    match (p, q) {
        (1, 1) => 1.0 + rho,
        (2, 2) => 4.0 * rho,
        _ => -2.0 * rho,
    }
}

/// Everything the estimators need from a sample and the prior.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorContext {
    cfg: ModelConfig,
    stats: SummaryStats,
    n: usize,
}

impl PosteriorContext {
    pub fn new(cfg: ModelConfig, sample: &CensoredSample) -> Result<Self, PosteriorError> {
        let stats = summarize(sample, cfg.theta())?;
        Ok(Self { cfg, stats, n: sample.n() })
    }

    pub fn from_stats(cfg: ModelConfig, stats: SummaryStats, n: usize) -> Self {
        Self { cfg, stats, n }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn stats(&self) -> &SummaryStats {
        &self.stats
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.stats.r()
    }

    /// `S1 + p λ1`.
    pub fn rate_a(&self, p: u8) -> f64 {
        self.stats.s1 + p as f64 * self.cfg.lambda1()
    }

    /// `S2 / θ + q λ2`.
    pub fn rate_b(&self, q: u8) -> f64 {
        self.stats.s2 / self.cfg.theta() + q as f64 * self.cfg.lambda2()
    }

    fn phi_ln_terms(&self, l: u32, m: u32, p: u8, q: u8, shift1: f64, shift2: f64) -> Vec<Option<f64>> {
        let r = self.r();
        let ln_a = (self.rate_a(p) + shift1).ln();
        let ln_b = (self.rate_b(q) + shift2).ln();
        (0..=r)
            .map(|j| {
                let ka = (r - j) as u32 + l;
                let kb = j as u32 + m;
                if ka == 0 || kb == 0 {
                    return None;
                }
                let (ka, kb) = (ka as f64, kb as f64);
                Some(self.stats.ln_m(j) + ln_gamma(ka) - ka * ln_a + ln_gamma(kb) - kb * ln_b)
            })
            .collect()
    }

    /// `Φ(l, m, p, q)` with additive shifts on the two rates (zero for plain
    /// `Φ`, `c1` on the first rate for the linex estimator of `a`, `c2` on the
    /// second for `b`).
    pub fn phi(&self, l: u32, m: u32, p: u8, q: u8, shift1: f64, shift2: f64) -> Result<LogSum, PosteriorError> {
        let terms = self.phi_ln_terms(l, m, p, q, shift1, shift2);
        let mut ln_terms = Vec::with_capacity(terms.len());
        for (j, term) in terms.into_iter().enumerate() {
            match term {
                Some(x) => ln_terms.push(x),
                None => return Err(PosteriorError::Divergent { l, m, j }),
            }
        }
        Ok(LogSum::from_ln_terms(&ln_terms))
    }

    /// `Φ` with any `Γ(0)` terms left out of the sum.
    pub fn phi_truncated(&self, l: u32, m: u32, p: u8, q: u8, shift1: f64, shift2: f64) -> LogSum {
        let ln_terms: Vec<f64> = self.phi_ln_terms(l, m, p, q, shift1, shift2).into_iter().flatten().collect();
        LogSum::from_ln_terms(&ln_terms)
    }

    fn combine(&self, l: u32, m: u32, shift1: f64, shift2: f64, truncate: bool) -> Result<LogSum, PosteriorError> {
        let rho = self.cfg.rho();
        let mut parts = Vec::with_capacity(4);
        for (p, q) in KERNELS {
            let phi = if truncate {
                self.phi_truncated(l, m, p, q, shift1, shift2)
            } else {
                self.phi(l, m, p, q, shift1, shift2)?
            };
            parts.push((kernel_coefficient(rho, p, q), phi));
        }
        Ok(LogSum::linear_combination(&parts))
    }

    /// `Φ(l,m,1,1) + ρ{4Φ(l,m,2,2) - 2Φ(l,m,1,2) - 2Φ(l,m,2,1) + Φ(l,m,1,1)}`,
    /// i.e. `∫∫ a^(l-1) b^(m-1) e^{-shift1 a - shift2 b} f*(a,b,t) da db / (λ1 λ2)`.
    pub fn prior_weighted_phi(&self, l: u32, m: u32, shift1: f64, shift2: f64) -> Result<LogSum, PosteriorError> {
        self.combine(l, m, shift1, shift2, false)
    }

    /// The marginal bracket `λ1 λ2 [...]`, which is `1 / K`.
    fn marginal(&self) -> Result<LogSum, PosteriorError> {
        let mut bracket = self.prior_weighted_phi(1, 1, 0.0, 0.0)?;
        if !(bracket.value > 0.0) {
            return Err(PosteriorError::NonPositiveMarginal(bracket.value));
        }
        bracket.scale += (self.cfg.lambda1() * self.cfg.lambda2()).ln();
        Ok(bracket)
    }

    /// `ln K`, the log of the posterior normalizing constant.
    pub fn ln_normalizer(&self) -> Result<f64, PosteriorError> {
        Ok(-self.marginal()?.ln())
    }

    /// `K`, the reciprocal of the marginal density of the sample.
    pub fn normalizer(&self) -> Result<f64, PosteriorError> {
        Ok(self.ln_normalizer()?.exp())
    }

    /// Joint posterior density of `(a, b)`.
    pub fn posterior_density(&self, p: ParamPair) -> Result<f64, PosteriorError> {
        let ln_k = self.ln_normalizer()?;
        Ok(self.unnormalized_ln_parts(p.a(), p.b(), ln_k))
    }

    fn unnormalized_ln_parts(&self, a: f64, b: f64, ln_k: f64) -> f64 {
        let r = self.r();
        let ln_a = a.ln();
        let ln_b = b.ln();
        let ln_terms: Vec<f64> = (0..=r)
            .filter_map(|j| {
                let ea = (r - j) as f64;
                let eb = j as f64;
                let pa = if ea == 0.0 { 0.0 } else { ea * ln_a };
                let pb = if eb == 0.0 { 0.0 } else { eb * ln_b };
                let x = self.stats.ln_m(j) + pa + pb;
                (x > f64::NEG_INFINITY).then_some(x)
            })
            .collect();
        let poly = LogSum::from_ln_terms(&ln_terms);
        if poly.value == 0.0 {
            return 0.0;
        }
        let rho = self.cfg.rho();
        let base = -a * self.rate_a(1) - b * self.rate_b(1);
        let mixture: f64 = KERNELS
            .iter()
            .map(|&(p, q)| {
                let exponent = -a * self.rate_a(p) - b * self.rate_b(q) - base;
                kernel_coefficient(rho, p, q) * exponent.exp()
            })
            .sum();
        let ln_lambda = (self.cfg.lambda1() * self.cfg.lambda2()).ln();
        (mixture.max(0.0)) * (ln_k + ln_lambda + poly.ln() + base).exp()
    }

    /// Posterior means `(â_BS, b̂_BS)`.
    pub fn estimate_squared_error(&self) -> Result<(f64, f64), PosteriorError> {
        let den = self.prior_weighted_phi(1, 1, 0.0, 0.0)?;
        if !(den.value > 0.0) {
            return Err(PosteriorError::NonPositiveMarginal(den.value));
        }
        let a = self.prior_weighted_phi(2, 1, 0.0, 0.0)?.ratio(&den);
        let b = self.prior_weighted_phi(1, 2, 0.0, 0.0)?.ratio(&den);
        check_positive(a, "a_bs")?;
        check_positive(b, "b_bs")?;
        Ok((a, b))
    }

    /// Linex rules `-(1/c) ln E[e^{-c a}]`, returned as `(â_BL, b̂_BL)`.
    pub fn estimate_linex(&self, loss: &LossConstants) -> Result<(f64, f64), PosteriorError> {
        let bound1 = -self.rate_a(1);
        let bound2 = -self.rate_b(1);
        if !(loss.c1 > bound1) {
            return Err(PosteriorError::CurvatureTooNegative { index: 1, value: loss.c1, bound: bound1 });
        }
        if !(loss.c2 > bound2) {
            return Err(PosteriorError::CurvatureTooNegative { index: 2, value: loss.c2, bound: bound2 });
        }
        let den = self.prior_weighted_phi(1, 1, 0.0, 0.0)?;
        if !(den.value > 0.0) {
            return Err(PosteriorError::NonPositiveMarginal(den.value));
        }
        let a = -self.ln_laplace(loss.c1, false, &den)? / loss.c1;
        let b = -self.ln_laplace(loss.c2, true, &den)? / loss.c2;
        if !(a.is_finite() && b.is_finite()) {
            return Err(PosteriorError::Numerical("linex"));
        }
        // E[e^{-ca}] <= 1 on a >= 0, so the rule is nonnegative for c > 0;
        // rounding can leave a tiny negative value when the posterior mean is ~0.
        Ok((a.max(0.0), b.max(0.0)))
    }

    /// `ln E[e^{-c a}]`, or `ln E[e^{-c b}]` when `on_b`.
    ///
    /// Each term of the shifted bracket is the unshifted term times
    /// `e^δ` with `δ = -k ln(1 + c/rate)`, so the log ratio is
    /// `ln1p(Σ w expm1(δ) / Σ w)`, which keeps full precision as `c → 0`.
    /// When the ratio is far below one the two brackets are summed separately.
    fn ln_laplace(&self, c: f64, on_b: bool, den: &LogSum) -> Result<f64, PosteriorError> {
        let r = self.r();
        let rho = self.cfg.rho();
        let mut terms = Vec::with_capacity(4 * (r + 1));
        for (p, q) in KERNELS {
            let coef = kernel_coefficient(rho, p, q);
            if coef == 0.0 {
                continue;
            }
            let shrink = if on_b { (c / self.rate_b(q)).ln_1p() } else { (c / self.rate_a(p)).ln_1p() };
            for (j, t) in self.phi_ln_terms(1, 1, p, q, 0.0, 0.0).into_iter().enumerate() {
                let t = t.ok_or(PosteriorError::Divergent { l: 1, m: 1, j })?;
                let k = if on_b { (j + 1) as f64 } else { (r - j + 1) as f64 };
                terms.push((coef, t, -k * shrink));
            }
        }
        let max = terms.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
        let (mut total, mut change) = (0.0, 0.0);
        for (coef, t, delta) in terms {
            let w = coef * (t - max).exp();
            total += w;
            change += w * delta.exp_m1();
        }
        let x = change / total;
        if x.is_finite() && x > -0.5 {
            return Ok(x.ln_1p());
        }
        let (s1, s2) = if on_b { (0.0, c) } else { (c, 0.0) };
        let num = self.prior_weighted_phi(1, 1, s1, s2)?;
        if !(num.value > 0.0) {
            return Err(PosteriorError::Numerical(if on_b { "b_bl" } else { "a_bl" }));
        }
        Ok(num.ln() - den.ln())
    }

    /// Entropy rules `1 / E[1/a]`, `1 / E[1/b]`.
    pub fn estimate_entropy(&self, mode: EntropyMode) -> Result<EntropyEstimates, PosteriorError> {
        let den = self.prior_weighted_phi(1, 1, 0.0, 0.0)?;
        if !(den.value > 0.0) {
            return Err(PosteriorError::NonPositiveMarginal(den.value));
        }
        let rule = |l: u32, m: u32, name: &'static str| -> Result<(f64, bool), PosteriorError> {
            match self.prior_weighted_phi(l, m, 0.0, 0.0) {
                Ok(num) => {
                    let v = den.ratio(&num);
                    check_positive(v, name)?;
                    Ok((v, false))
                }
                Err(PosteriorError::Divergent { .. }) => match mode {
                    EntropyMode::Strict => Ok((0.0, true)),
                    EntropyMode::DropDivergent => {
                        let num = self.combine(l, m, 0.0, 0.0, true)?;
                        if !(num.value > 0.0) {
                            return Err(PosteriorError::Numerical(name));
                        }
                        let v = den.ratio(&num);
                        check_positive(v, name)?;
                        Ok((v, true))
                    }
                },
                Err(e) => Err(e),
            }
        };
        let (a, a_divergent) = rule(0, 1, "a_be")?;
        let (b, b_divergent) = rule(1, 0, "b_be")?;
        Ok(EntropyEstimates { a, b, a_divergent, b_divergent })
    }

    /// All six estimators.
    pub fn estimate(&self, loss: &LossConstants, mode: EntropyMode) -> Result<EstimateSet, PosteriorError> {
        let (a_bs, b_bs) = self.estimate_squared_error()?;
        let (a_bl, b_bl) = self.estimate_linex(loss)?;
        let be = self.estimate_entropy(mode)?;
        Ok(EstimateSet {
            a_bs,
            b_bs,
            a_bl,
            b_bl,
            a_be: be.a,
            b_be: be.b,
            loss: *loss,
            divergence: Divergence { a_be: be.a_divergent, b_be: be.b_divergent },
        })
    }
}

fn check_positive(x: f64, name: &'static str) -> Result<(), PosteriorError> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(PosteriorError::Numerical(name))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyEstimates {
    pub a: f64,
    pub b: f64,
    pub a_divergent: bool,
    pub b_divergent: bool,
}

/// Which estimators hit a divergent `Γ(0)` term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Divergence {
    pub a_be: bool,
    pub b_be: bool,
}

/// The six Bayes estimates of one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateSet {
    pub a_bs: f64,
    pub b_bs: f64,
    pub a_bl: f64,
    pub b_bl: f64,
    pub a_be: f64,
    pub b_be: f64,
    pub loss: LossConstants,
    pub divergence: Divergence,
}

impl EstimateSet {
    /// Values in column order `a_bs, b_bs, a_bl, b_bl, a_be, b_be`.
    pub fn values(&self) -> [f64; 6] {
        [self.a_bs, self.b_bs, self.a_bl, self.b_bl, self.a_be, self.b_be]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// r = 1, t = [1], n = 1, θ = 2, λ1 = λ2 = 1.
    fn tiny(rho: f64) -> PosteriorContext {
        let cfg = ModelConfig::new(2.0, 1.0, 1.0, rho).unwrap();
        let sample = CensoredSample::new(1, 1, vec![1.0]).unwrap();
        PosteriorContext::new(cfg, &sample).unwrap()
    }

    fn rel(x: f64, y: f64) -> f64 {
        (x - y).abs() / y.abs()
    }

    #[test]
    fn phi_small_context() {
        let ctx = tiny(0.0);
        assert_eq!(ctx.rate_a(1), 2.0);
        assert_eq!(ctx.rate_b(1), 1.5);
        let phi11 = ctx.phi(1, 1, 1, 1, 0.0, 0.0).unwrap().to_f64();
        assert!(rel(phi11, 1.0 / (4.0 * 1.5) + 1.0 / (2.0 * 2.25)) < 1e-14);
        assert!(rel(phi11, 7.0 / 18.0) < 1e-14);
        let phi21 = ctx.phi(2, 1, 1, 1, 0.0, 0.0).unwrap().to_f64();
        assert!(rel(phi21, 2.0 / (8.0 * 1.5) + 1.0 / (4.0 * 2.25)) < 1e-14);
    }

    #[test]
    fn shifted_phi_is_phi_with_moved_rate() {
        let ctx = tiny(0.3);
        let shifted = ctx.phi(1, 1, 1, 1, 1.0, 0.0).unwrap().to_f64();
        assert!(rel(shifted, 1.0 / (9.0 * 1.5) + 1.0 / (3.0 * 2.25)) < 1e-14);
        let plain = ctx.phi(1, 2, 2, 1, 0.0, 0.0).unwrap();
        let zero_shift = ctx.phi(1, 2, 2, 1, 0.0, 0.0).unwrap();
        assert_eq!(plain, zero_shift);
    }

    #[test]
    fn divergence_is_reported() {
        let ctx = tiny(0.0);
        assert_eq!(ctx.phi(0, 1, 1, 1, 0.0, 0.0), Err(PosteriorError::Divergent { l: 0, m: 1, j: 1 }));
        assert_eq!(ctx.phi(1, 0, 1, 1, 0.0, 0.0), Err(PosteriorError::Divergent { l: 1, m: 0, j: 0 }));
        let truncated = ctx.phi_truncated(0, 1, 1, 1, 0.0, 0.0).to_f64();
        assert!(rel(truncated, 1.0 / 3.0) < 1e-14);
    }

    #[test]
    fn normalizer_small_context() {
        let ctx = tiny(0.0);
        assert!(rel(ctx.normalizer().unwrap(), 18.0 / 7.0) < 1e-14);
    }

    #[test]
    fn estimators_small_context() {
        let ctx = tiny(0.0);
        let (a, _) = ctx.estimate_squared_error().unwrap();
        assert!(rel(a, 5.0 / 7.0) < 1e-13);

        let loss = LossConstants::new(1.0, 1.0).unwrap();
        let (a_bl, _) = ctx.estimate_linex(&loss).unwrap();
        let expected: f64 = -((1.0f64 / 13.5 + 1.0 / 6.75) / (7.0 / 18.0)).ln();
        assert!(rel(a_bl, expected) < 1e-13);
        assert!((a_bl - 0.55962).abs() < 1e-5);

        let strict = ctx.estimate_entropy(EntropyMode::Strict).unwrap();
        assert_eq!((strict.a, strict.b), (0.0, 0.0));
        assert!(strict.a_divergent && strict.b_divergent);

        let dropped = ctx.estimate_entropy(EntropyMode::DropDivergent).unwrap();
        // only the j = 0 term survives: Γ(1)/2 · Γ(1)/1.5 = 1/3
        assert!(rel(dropped.a, 7.0 / 6.0) < 1e-13);
        assert!(dropped.a_divergent);
        assert!(dropped.b > 0.0 && dropped.b.is_finite());
    }

    #[test]
    fn linex_precondition() {
        let ctx = tiny(0.0);
        let loss = LossConstants::new(-2.5, 1.0).unwrap();
        assert!(matches!(
            ctx.estimate_linex(&loss),
            Err(PosteriorError::CurvatureTooNegative { index: 1, .. })
        ));
        let loss = LossConstants::new(-1.0, 1.0).unwrap();
        assert!(ctx.estimate_linex(&loss).is_ok());
        assert!(LossConstants::new(0.0, 1.0).is_err());
    }

    #[test]
    fn posterior_density_matches_gamma_mixture_at_independence() {
        // f2 = Σ_j w_j Gamma(a; 2-j, 2) Gamma(b; j+1, 1.5), w ∝ (1/4·1/1.5, 1/2·1/2.25)
        let ctx = tiny(0.0);
        let w0 = (1.0 / 4.0 / 1.5) / (7.0 / 18.0);
        let w1 = (1.0 / 2.0 / 2.25) / (7.0 / 18.0);
        for &(a, b) in &[(0.3f64, 0.2f64), (1.0, 1.0), (2.5, 0.1), (0.05, 3.0)] {
            let g_a2 = 4.0 * a * (-2.0 * a).exp();
            let g_a1 = 2.0 * (-2.0 * a).exp();
            let g_b1 = 1.5 * (-1.5 * b).exp();
            let g_b2 = 2.25 * b * (-1.5 * b).exp();
            let direct = w0 * g_a2 * g_b1 + w1 * g_a1 * g_b2;
            let f = ctx.posterior_density(ParamPair::new(a, b).unwrap()).unwrap();
            assert!(rel(f, direct) < 1e-10, "{a} {b}: {f} vs {direct}");
        }
    }

    #[test]
    fn posterior_density_nonnegative_at_extreme_dependence() {
        for rho in [-1.0, 1.0] {
            let ctx = tiny(rho);
            for i in 0..30 {
                for j in 0..30 {
                    let p = ParamPair::new(i as f64 * 0.2 + 1e-3, j as f64 * 0.2).unwrap();
                    assert!(ctx.posterior_density(p).unwrap() >= 0.0);
                }
            }
        }
    }

    #[test]
    fn linear_combination_keeps_sign() {
        let a = LogSum::from_ln_terms(&[1000.0]);
        let b = LogSum::from_ln_terms(&[1000.0 + 2f64.ln()]);
        let c = LogSum::linear_combination(&[(3.0, a), (-1.0, b)]);
        assert!((c.ratio(&a) - 1.0).abs() < 1e-12);
    }
}
