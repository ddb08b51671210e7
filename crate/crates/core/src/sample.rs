//! Type-II censored samples and their sufficient statistics.
//!
//! The likelihood of `(a, b)` depends on a sample `t_1 < ... < t_r` from a
//! test of `n` units only through
//!
//! * `S1 = Σ t_i + (n - r) t_r`
//! * `S2 = Σ t_i^θ + (n - r) t_r^θ`
//! * `M_j`, the elementary symmetric polynomials of `v_i = t_i^(θ-1)`,
//!   which are the coefficients of `Π (a + b v_i) = Σ_j M_j a^(r-j) b^j`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SampleError {
    #[error("bad counts: n = {n}, r = {r} (need 1 <= r <= n)")]
    BadCounts { n: usize, r: usize },
    #[error("expected {expected} failure times, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("failure time {index} is not positive and finite: {value}")]
    NonPositiveTime { index: usize, value: f64 },
    #[error("failure times {index} and {} are tied at {value}", index + 1)]
    TiedTimes { index: usize, value: f64 },
    #[error("failure times are not increasing at index {index}")]
    Unordered { index: usize },
    #[error("theta must be positive and finite, got {0}")]
    Theta(f64),
    #[error("summary statistics overflowed")]
    Overflow,
}

/// Ordered failure times of the first `r` failures among `n` units on test.
#[derive(Debug, Clone, PartialEq)]
pub struct CensoredSample {
    n: usize,
    times: Vec<f64>,
}

impl CensoredSample {
    /// Validates and wraps a sample. `times` must already be strictly
    /// increasing.
    pub fn new(n: usize, r: usize, times: Vec<f64>) -> Result<Self, SampleError> {
        if r == 0 || r > n {
            return Err(SampleError::BadCounts { n, r });
        }
        if times.len() != r {
            return Err(SampleError::LengthMismatch { expected: r, got: times.len() });
        }
        for (index, &value) in times.iter().enumerate() {
            if !(value.is_finite() && value > 0.0) {
                return Err(SampleError::NonPositiveTime { index, value });
            }
        }
        for (index, w) in times.windows(2).enumerate() {
            if w[0] == w[1] {
                return Err(SampleError::TiedTimes { index, value: w[0] });
            }
            if w[0] > w[1] {
                return Err(SampleError::Unordered { index: index + 1 });
            }
        }
        Ok(Self { n, times })
    }

    /// Sorts `times` ascending before validating.
    pub fn from_unsorted(n: usize, mut times: Vec<f64>) -> Result<Self, SampleError> {
        times.sort_by(f64::total_cmp);
        let r = times.len();
        Self::new(n, r, times)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.times.len()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Time of the last observed failure, where the test is stopped.
    pub fn censoring_time(&self) -> f64 {
        self.times[self.times.len() - 1]
    }
}

/// Sufficient statistics of a censored sample for a fixed `θ`.
///
/// The symmetric polynomials are kept as logarithms, `ln M_0 .. ln M_r`, so
/// that large `r` and widely spread `t_i^(θ-1)` stay representable.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryStats {
    pub s1: f64,
    pub s2: f64,
    pub theta: f64,
    ln_m: Vec<f64>,
}

impl SummaryStats {
    /// Number of observed failures.
    pub fn r(&self) -> usize {
        self.ln_m.len() - 1
    }

    /// `ln M_j`.
    pub fn ln_m(&self, j: usize) -> f64 {
        self.ln_m[j]
    }

    pub fn ln_m_values(&self) -> &[f64] {
        &self.ln_m
    }

    /// `M_j` in linear scale; may overflow to infinity for extreme inputs.
    pub fn m(&self, j: usize) -> f64 {
        self.ln_m[j].exp()
    }

    /// All `M_0..M_r` in linear scale.
    pub fn m_values(&self) -> Vec<f64> {
        self.ln_m.iter().map(|x| x.exp()).collect()
    }
}

fn ln_add_exp(x: f64, y: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        return y;
    }
    if y == f64::NEG_INFINITY {
        return x;
    }
    let (hi, lo) = if x > y { (x, y) } else { (y, x) };
    hi + (lo - hi).exp().ln_1p()
}

/// Logarithms of the elementary symmetric polynomials `e_0..e_k` of the
/// nonnegative values whose logarithms are given, via the one-pass
/// recurrence `e_j <- e_j + v e_{j-1}` (descending `j`) carried out in log
/// space.
pub fn ln_elementary_symmetric(ln_values: &[f64]) -> Vec<f64> {
    let mut e = vec![f64::NEG_INFINITY; ln_values.len() + 1];
    e[0] = 0.0;
    for (i, &ln_v) in ln_values.iter().enumerate() {
        for j in (1..=i + 1).rev() {
            e[j] = ln_add_exp(e[j], ln_v + e[j - 1]);
        }
    }
    e
}

/// Computes `S1`, `S2` and `M_0..M_r` for the sample under shape `theta`.
pub fn summarize(sample: &CensoredSample, theta: f64) -> Result<SummaryStats, SampleError> {
    if !(theta.is_finite() && theta > 0.0) {
        return Err(SampleError::Theta(theta));
    }
    let times = sample.times();
    let r = times.len();
    let censored = (sample.n() - r) as f64;
    let t_r = sample.censoring_time();

    let s1 = times.iter().sum::<f64>() + censored * t_r;
    let s2 = times.iter().map(|t| t.powf(theta)).sum::<f64>() + censored * t_r.powf(theta);
    if !(s1.is_finite() && s2.is_finite()) {
        return Err(SampleError::Overflow);
    }

    let ln_v: Vec<f64> = times.iter().map(|t| (theta - 1.0) * t.ln()).collect();
    let ln_m = ln_elementary_symmetric(&ln_v);
    if ln_m.iter().any(|x| x.is_nan() || *x == f64::INFINITY) {
        return Err(SampleError::Overflow);
    }
    Ok(SummaryStats { s1, s2, theta, ln_m })
}

/// Errors from the plain-text sample format, with 1-based line numbers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("invalid sample: {0}")]
    Invalid(#[from] SampleError),
}

/// A sample together with the shape recorded in its header line.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleFile {
    pub sample: CensoredSample,
    pub theta: f64,
}

impl FromStr for SampleFile {
    type Err = ParseError;

    /// Header `n r theta`, then exactly `r` lines of one failure time each.
    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let syntax = |line: usize, message: String| ParseError::Syntax { line, message };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));

        let (hl, header) = lines.next().ok_or_else(|| syntax(1, "empty input".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(syntax(hl, format!("expected `n r theta`, found {} fields", fields.len())));
        }
        let n: usize = fields[0].parse().map_err(|e| syntax(hl, format!("bad n `{}`: {e}", fields[0])))?;
        let r: usize = fields[1].parse().map_err(|e| syntax(hl, format!("bad r `{}`: {e}", fields[1])))?;
        let theta: f64 = fields[2].parse().map_err(|e| syntax(hl, format!("bad theta `{}`: {e}", fields[2])))?;
        if !(theta.is_finite() && theta > 0.0) {
            return Err(syntax(hl, format!("theta must be positive, got {theta}")));
        }

        let mut times = Vec::with_capacity(r);
        let mut last_line = hl;
        for (ln, line) in lines {
            if line.is_empty() {
                last_line = ln;
                continue;
            }
            if times.len() == r {
                return Err(syntax(ln, format!("more than r = {r} failure times")));
            }
            let t: f64 = line.parse().map_err(|e| syntax(ln, format!("bad failure time `{line}`: {e}")))?;
            times.push(t);
            last_line = ln;
        }
        if times.len() != r {
            return Err(syntax(last_line, format!("expected {r} failure times, found {}", times.len())));
        }
        let sample = CensoredSample::new(n, r, times)?;
        Ok(SampleFile { sample, theta })
    }
}

impl fmt::Display for SampleFile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} {} {}", self.sample.n(), self.sample.r(), self.theta)?;
        for t in self.sample.times() {
            writeln!(f, "{t}")?;
        }
        Ok(())
    }
}
