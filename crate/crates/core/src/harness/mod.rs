//! Configuration-driven sweeps: repeated censored samples per sweep point,
//! averages and variances of the six estimators, empirical Bayes risks, and
//! CSV output.
//!
//! Repetition `j` of every sweep point runs its own chain seeded from
//! `(seed, j)`, so results do not depend on scheduling. Aggregation folds in
//! repetition order.

pub mod config;
mod output;
pub mod validate;

use log::{info, warn};
use thiserror::Error;

use crate::mcmc::{draw_censored_sample, ChainState, MarginalTarget, McmcError};
use crate::posterior::{EntropyMode, EstimateSet, LossConstants, PosteriorContext, PosteriorError};
use crate::stats::{mean, variance};

pub use config::{ConfigError, ExperimentConfig, PointConfig, Sweep, SweepParam};
pub use output::{emit_tables, read_tables, EmittedFiles, RunMetadata, ESTIMATE_COLUMNS, VARIANCE_COLUMNS};

/// Largest tolerated share of failed repetitions at one sweep point.
pub const MAX_FAILURE_FRACTION: f64 = 0.01;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{failed} of {repetitions} repetitions failed at {param} = {value}; first error: {first}")]
    TooManyFailures { param: SweepParam, value: f64, failed: usize, repetitions: usize, first: String },
    #[error("no rows to write")]
    EmptyBeforeWrite,
    #[error("empirical risk needs at least one estimate")]
    NoEstimates,
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: {message}")]
    Malformed { path: String, message: String },
    #[error("metadata: {0}")]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    /// Process exit code: 1 config, 2 numerical, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::EmptyBeforeWrite => 1,
            HarnessError::TooManyFailures { .. } | HarnessError::NoEstimates => 2,
            HarnessError::Io { .. } | HarnessError::Csv { .. } | HarnessError::Malformed { .. } | HarnessError::Json(_) => 3,
        }
    }
}

/// Why a single repetition produced no estimates.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum RepetitionError {
    #[error("sampler: {0}")]
    Mcmc(#[from] McmcError),
    #[error("estimation: {0}")]
    Posterior(#[from] PosteriorError),
}

/// How repetitions are scheduled. Both give identical output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Parallel,
    Sequential,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

#[cfg(feature = "parallel")]
fn map_indexed<T, F>(len: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    match exec {
        Execution::Parallel => (0..len).into_par_iter().map(f).collect(),
        Execution::Sequential => (0..len).map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
fn map_indexed<T, F>(len: usize, _exec: Execution, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..len).map(f).collect()
}

/// Empirical Bayes risks of one sweep point. `r_be` is `None` when some
/// entropy-loss estimate (or its mean) is zero and the loss is undefined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalRisks {
    pub r_bs: f64,
    pub r_bl: f64,
    pub r_be: Option<f64>,
}

/// Average loss of each repetition's estimate against the mean estimate.
pub fn empirical_risk(estimates: &[EstimateSet], loss: &LossConstants) -> Result<EmpiricalRisks, HarnessError> {
    if estimates.is_empty() {
        return Err(HarnessError::NoEstimates);
    }
    let cols: Vec<Vec<f64>> = (0..6).map(|k| estimates.iter().map(|e| e.values()[k]).collect()).collect();
    let bar: Vec<f64> = cols.iter().map(|c| mean(c)).collect();

    let squared = |i: usize, w: f64| -> f64 { cols[i].iter().map(|x| w * (bar[i] - x).powi(2)).sum::<f64>() };
    let r_bs = (squared(0, loss.k1) + squared(1, loss.k2)) / estimates.len() as f64;

    let linex = |i: usize, c: f64, w: f64| -> f64 {
        cols[i]
            .iter()
            .map(|x| {
                let d = c * (x - bar[i]);
                // e^d - d - 1, accurate for small d
                w * (d.exp_m1() - d)
            })
            .sum::<f64>()
    };
    let r_bl = (linex(2, loss.c1, loss.l1) + linex(3, loss.c2, loss.l2)) / estimates.len() as f64;

    let entropy = |i: usize, w: f64| -> Option<f64> {
        if bar[i] <= 0.0 || cols[i].iter().any(|&x| x <= 0.0) {
            return None;
        }
        Some(cols[i].iter().map(|x| {
            let q = x / bar[i];
            w * (q - q.ln() - 1.0)
        }).sum::<f64>())
    };
    let r_be = match (entropy(4, loss.m1), entropy(5, loss.m2)) {
        (Some(a), Some(b)) => Some((a + b) / estimates.len() as f64),
        _ => None,
    };
    Ok(EmpiricalRisks { r_bs, r_bl, r_be })
}

/// Aggregates of one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    /// Column order `a_bs, b_bs, a_bl, b_bl, a_be, b_be`.
    pub means: [f64; 6],
    pub variances: [f64; 6],
    pub risks: EmpiricalRisks,
    pub repetitions: usize,
    pub failed: usize,
    pub divergent_a_be: usize,
    pub divergent_b_be: usize,
    pub ties_broken: usize,
    pub acceptance_rate: f64,
}

/// What one repetition contributes to its row.
#[derive(Debug, Clone, PartialEq)]
pub struct Repetition {
    pub estimates: EstimateSet,
    pub ties_broken: usize,
    pub accepted: u64,
    pub proposed: u64,
}

/// Draws one censored sample on the chain `(seed, index)` and estimates.
pub fn run_repetition(point: &PointConfig, mode: EntropyMode, index: usize) -> Result<Repetition, RepetitionError> {
    let target = MarginalTarget(point.model);
    let mut state = ChainState::start(&target, &point.mh, index as u64)?;
    let drawn = draw_censored_sample(&target, &point.mh, point.n, point.r, &mut state)?;
    let ctx = PosteriorContext::new(point.model, &drawn.sample)?;
    let estimates = ctx.estimate(&point.loss, mode)?;
    Ok(Repetition {
        estimates,
        ties_broken: drawn.ties_broken,
        accepted: state.accepted(),
        proposed: state.proposed(),
    })
}

/// Folds repetition results in index order into a row.
pub fn aggregate(
    param: SweepParam,
    value: f64,
    loss: &LossConstants,
    results: Vec<Result<Repetition, RepetitionError>>,
) -> Result<SweepRow, HarnessError> {
    let repetitions = results.len();
    let mut ok = Vec::with_capacity(repetitions);
    let mut first = None;
    for r in results {
        match r {
            Ok(rep) => ok.push(rep),
            Err(e) => {
                first.get_or_insert_with(|| e.to_string());
            }
        }
    }
    let failed = repetitions - ok.len();
    if failed as f64 > MAX_FAILURE_FRACTION * repetitions as f64 || ok.is_empty() {
        return Err(HarnessError::TooManyFailures {
            param,
            value,
            failed,
            repetitions,
            first: first.unwrap_or_default(),
        });
    }
    if failed > 0 {
        warn!("{failed} of {repetitions} repetitions failed at {param} = {value}; first error: {}", first.unwrap_or_default());
    }
    let estimates: Vec<EstimateSet> = ok.iter().map(|r| r.estimates).collect();
    let mut means = [0.0; 6];
    let mut variances = [0.0; 6];
    for k in 0..6 {
        let col: Vec<f64> = estimates.iter().map(|e| e.values()[k]).collect();
        means[k] = mean(&col);
        variances[k] = variance(&col);
    }
    let accepted: u64 = ok.iter().map(|r| r.accepted).sum();
    let proposed: u64 = ok.iter().map(|r| r.proposed).sum();
    Ok(SweepRow {
        value,
        means,
        variances,
        risks: empirical_risk(&estimates, loss)?,
        repetitions,
        failed,
        divergent_a_be: estimates.iter().filter(|e| e.divergence.a_be).count(),
        divergent_b_be: estimates.iter().filter(|e| e.divergence.b_be).count(),
        ties_broken: ok.iter().map(|r| r.ties_broken).sum(),
        acceptance_rate: if proposed == 0 { 0.0 } else { accepted as f64 / proposed as f64 },
    })
}

/// Runs every sweep point of `config`.
pub fn run_sweep(config: &ExperimentConfig, exec: Execution) -> Result<Vec<SweepRow>, HarnessError> {
    let points = config.points()?;
    let param = config.sweep.param;
    let rows = map_indexed(points.len(), exec, |i| {
        let point = &points[i];
        let value = config.sweep.values[i];
        let results = map_indexed(config.repetitions, exec, |j| run_repetition(point, config.entropy_mode, j));
        let row = aggregate(param, value, &point.loss, results);
        if row.is_ok() {
            info!("{param} = {value}: {} repetitions done", config.repetitions);
        }
        row
    });
    rows.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::posterior::Divergence;

    fn est(a: f64, b: f64) -> EstimateSet {
        EstimateSet {
            a_bs: a,
            b_bs: b,
            a_bl: a,
            b_bl: b,
            a_be: a,
            b_be: b,
            loss: LossConstants::new(1.0, 1.0).unwrap(),
            divergence: Divergence::default(),
        }
    }

    #[test]
    fn risk_examples() {
        let loss = LossConstants::new(1.0, 1.0).unwrap();
        let same = empirical_risk(&[est(0.3, 2.0); 5], &loss).unwrap();
        assert_eq!(same, EmpiricalRisks { r_bs: 0.0, r_bl: 0.0, r_be: Some(0.0) });

        let r = empirical_risk(&[est(0.0, 1.0), est(2.0, 1.0)], &loss).unwrap();
        assert_eq!(r.r_bs, 1.0);
        // linex with c = 1 about the mean 1: (e^-1 + 1 - 1 + e - 1 - 1) / 2
        let expected = (std::f64::consts::E + (-1.0f64).exp() - 2.0) / 2.0;
        assert!((r.r_bl - expected).abs() < 1e-15);
        assert_eq!(r.r_be, None);

        assert!(matches!(empirical_risk(&[], &loss), Err(HarnessError::NoEstimates)));
    }

    #[test]
    fn failure_budget() {
        let loss = LossConstants::new(1.0, 1.0).unwrap();
        let good = || Ok(Repetition { estimates: est(1.0, 1.0), ties_broken: 0, accepted: 1, proposed: 2 });
        let bad = || Err(RepetitionError::Mcmc(McmcError::ZeroDensity { at: 1.0 }));

        let mut results: Vec<_> = (0..100).map(|_| good()).collect();
        results[3] = bad();
        let row = aggregate(SweepParam::N, 10.0, &loss, results).unwrap();
        assert_eq!(row.failed, 1);
        assert_eq!(row.acceptance_rate, 0.5);

        let mut results: Vec<_> = (0..100).map(|_| good()).collect();
        results[3] = bad();
        results[4] = bad();
        let err = aggregate(SweepParam::N, 10.0, &loss, results).unwrap_err();
        assert!(matches!(err, HarnessError::TooManyFailures { failed: 2, .. }));
        assert_eq!(err.exit_code(), 2);
    }
}
