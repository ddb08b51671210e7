//! Independence Metropolis-Hastings sampling of lifetimes from the marginal
//! density `f_T`, and Type-II censored samples cut from the chain.
//!
//! Proposals are exponential with a fixed rate regardless of the current
//! state, so a move from `x` to `y` is accepted with probability
//! `min(1, f(y) q(x) / (f(x) q(y)))`.
//!
//! Protocol: one burn-in per chain, then each sample takes `n` consecutive
//! chain states, sorts them and keeps the smallest `r`. Between consecutive
//! samples `inter_sample_gap` states are discarded. Setting
//! `within_sample_gap` also discards states between the draws of one sample.

use std::io::{self, Write};
use std::path::Path;

use log::debug;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use thiserror::Error;

use crate::model::{marginal_lifetime_pdf, ModelConfig};
use crate::sample::{CensoredSample, SampleError};

/// Identity of the random generator, recorded in run metadata.
pub const GENERATOR: &str = "rand_chacha::ChaCha8Rng (seed_from_u64, one stream per chain)";

const MAX_START_ATTEMPTS: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum McmcError {
    #[error("target density is zero at the current state {at}")]
    ZeroDensity { at: f64 },
    #[error("proposal rate must be positive and finite, got {0}")]
    ProposalRate(f64),
    #[error(transparent)]
    Sample(#[from] SampleError),
}

/// Sampler settings: burn-in length, discarded states between samples, rate
/// of the exponential proposal and the seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MhConfig {
    pub burn_in: usize,
    pub inter_sample_gap: usize,
    /// States discarded between consecutive draws of one sample.
    pub within_sample_gap: usize,
    pub proposal_rate: f64,
    pub seed: u64,
}

impl MhConfig {
    /// Burn-in 5000, gap 100, proposal rate `(λ1 + λ2) / 2`.
    pub fn for_model(cfg: &ModelConfig, seed: u64) -> Self {
        Self {
            burn_in: 5000,
            inter_sample_gap: 100,
            within_sample_gap: 0,
            proposal_rate: 0.5 * (cfg.lambda1() + cfg.lambda2()),
            seed,
        }
    }

    pub fn validated(self) -> Result<Self, McmcError> {
        if !(self.proposal_rate.is_finite() && self.proposal_rate > 0.0) {
            return Err(McmcError::ProposalRate(self.proposal_rate));
        }
        Ok(self)
    }
}

/// A density the sampler can target; need not be normalized.
pub trait Target {
    fn density(&self, t: f64) -> f64;
}

impl<F: Fn(f64) -> f64> Target for F {
    fn density(&self, t: f64) -> f64 {
        self(t)
    }
}

/// The marginal lifetime density `f_T` of a model configuration.
#[derive(Debug, Clone, Copy)]
pub struct MarginalTarget(pub ModelConfig);

impl Target for MarginalTarget {
    fn density(&self, t: f64) -> f64 {
        if t > 0.0 {
            marginal_lifetime_pdf(&self.0, t)
        } else {
            0.0
        }
    }
}

/// Single-owner state of one chain.
#[derive(Debug, Clone)]
pub struct ChainState {
    current: f64,
    current_density: f64,
    accepted: u64,
    proposed: u64,
    burned_in: bool,
    samples_drawn: u64,
    proposal: Exp<f64>,
    rng: ChaCha8Rng,
}

impl ChainState {
    /// Seeds the chain from `(mh.seed, stream)` and starts it at the first
    /// proposal with positive target density.
    pub fn start<T: Target>(target: &T, mh: &MhConfig, stream: u64) -> Result<Self, McmcError> {
        let mh = mh.validated()?;
        let mut rng = ChaCha8Rng::seed_from_u64(mh.seed);
        rng.set_stream(stream);
        let proposal = Exp::new(mh.proposal_rate).map_err(|_| McmcError::ProposalRate(mh.proposal_rate))?;
        let mut state = Self {
            current: f64::NAN,
            current_density: 0.0,
            accepted: 0,
            proposed: 0,
            burned_in: false,
            samples_drawn: 0,
            proposal,
            rng,
        };
        state.restart(target)?;
        Ok(state)
    }

    /// Replaces the current state with a fresh proposal of positive density.
    pub fn restart<T: Target>(&mut self, target: &T) -> Result<(), McmcError> {
        for _ in 0..MAX_START_ATTEMPTS {
            let t = self.proposal.sample(&mut self.rng);
            let d = target.density(t);
            if t > 0.0 && d > 0.0 && d.is_finite() {
                self.current = t;
                self.current_density = d;
                return Ok(());
            }
        }
        Err(McmcError::ZeroDensity { at: self.current })
    }

    pub fn current(&self) -> f64 {
        self.current
    }

    pub fn accepted(&self) -> u64 {
        self.accepted
    }

    pub fn proposed(&self) -> u64 {
        self.proposed
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    fn ensure_burned_in<T: Target>(&mut self, target: &T, mh: &MhConfig) -> Result<(), McmcError> {
        if !self.burned_in {
            for _ in 0..mh.burn_in {
                mh_step(self, target, mh)?;
            }
            self.burned_in = true;
        }
        Ok(())
    }
}

/// One independence-sampler transition. Returns whether the proposal was
/// accepted.
pub fn mh_step<T: Target>(state: &mut ChainState, target: &T, mh: &MhConfig) -> Result<bool, McmcError> {
    if !(state.current_density > 0.0) {
        return Err(McmcError::ZeroDensity { at: state.current });
    }
    let proposal = state.proposal.sample(&mut state.rng);
    let u: f64 = state.rng.random();
    state.proposed += 1;

    let density = target.density(proposal);
    if !(density > 0.0 && density.is_finite()) {
        return Ok(false);
    }
    // ln[f(y) q(x) / (f(x) q(y))] with q(x) ∝ e^{-rate x}
    let ln_ratio = density.ln() - state.current_density.ln() + mh.proposal_rate * (proposal - state.current);
    if u.ln() < ln_ratio {
        state.current = proposal;
        state.current_density = density;
        state.accepted += 1;
        Ok(true)
    } else {
        Ok(false)
    }
}

/// A censored sample together with what the chain produced for it.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawnSample {
    pub sample: CensoredSample,
    /// The `n` chain states in chain order.
    pub draws: Vec<f64>,
    /// How many retained times were nudged up to break ties.
    pub ties_broken: usize,
}

/// Sorts, keeps the smallest `r` and nudges tied values up by one ulp.
fn censor(draws: &[f64], n: usize, r: usize) -> Result<(CensoredSample, usize), McmcError> {
    if r == 0 || r > n {
        return Err(SampleError::BadCounts { n, r }.into());
    }
    let mut times = draws.to_vec();
    times.sort_by(f64::total_cmp);
    times.truncate(r);
    let mut ties = 0;
    for i in 1..times.len() {
        if times[i] <= times[i - 1] {
            times[i] = times[i - 1].next_up();
            ties += 1;
        }
    }
    Ok((CensoredSample::new(n, r, times)?, ties))
}

/// Draws the next Type-II censored sample of size `n`, censored at `r`.
pub fn draw_censored_sample<T: Target>(
    target: &T,
    mh: &MhConfig,
    n: usize,
    r: usize,
    state: &mut ChainState,
) -> Result<DrawnSample, McmcError> {
    if r == 0 || r > n {
        return Err(SampleError::BadCounts { n, r }.into());
    }
    state.ensure_burned_in(target, mh)?;
    if state.samples_drawn > 0 {
        for _ in 0..mh.inter_sample_gap {
            mh_step(state, target, mh)?;
        }
    }
    let mut draws = Vec::with_capacity(n);
    for i in 0..n {
        if i > 0 {
            for _ in 0..mh.within_sample_gap {
                mh_step(state, target, mh)?;
            }
        }
        mh_step(state, target, mh)?;
        draws.push(state.current);
    }
    state.samples_drawn += 1;
    let (sample, ties_broken) = censor(&draws, n, r)?;
    if ties_broken > 0 {
        debug!("broke {ties_broken} tied failure times in sample {}", state.samples_drawn);
    }
    Ok(DrawnSample { sample, draws, ties_broken })
}

/// `reps` consecutive samples from a single chain seeded by `mh.seed`.
pub fn run_repetitions(
    cfg: &ModelConfig,
    mh: &MhConfig,
    n: usize,
    r: usize,
    reps: usize,
) -> Result<Vec<CensoredSample>, McmcError> {
    let target = MarginalTarget(*cfg);
    let mut state = ChainState::start(&target, mh, 0)?;
    (0..reps)
        .map(|_| draw_censored_sample(&target, mh, n, r, &mut state).map(|d| d.sample))
        .collect()
}

/// `count` chain states keeping one out of every `thin` after burn-in.
pub fn thinned_draws<T: Target>(
    target: &T,
    mh: &MhConfig,
    count: usize,
    thin: usize,
    state: &mut ChainState,
) -> Result<Vec<f64>, McmcError> {
    state.ensure_burned_in(target, mh)?;
    let thin = thin.max(1);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        for _ in 0..thin {
            mh_step(state, target, mh)?;
        }
        out.push(state.current);
    }
    Ok(out)
}

/// Writes draws one per line with full precision.
pub fn write_draws<P: AsRef<Path>>(path: P, draws: &[f64]) -> io::Result<()> {
    let mut w = io::BufWriter::new(std::fs::File::create(path)?);
    for d in draws {
        writeln!(w, "{d:.16e}")?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ModelConfig {
        ModelConfig::new(1.5, 0.1, 0.2, 0.5).unwrap()
    }

    #[test]
    fn proposal_equal_to_target_always_accepts() {
        let mh = MhConfig { burn_in: 0, inter_sample_gap: 0, within_sample_gap: 0, proposal_rate: 0.7, seed: 3 };
        let target = |t: f64| 0.7 * (-0.7 * t).exp();
        let mut state = ChainState::start(&target, &mh, 0).unwrap();
        for _ in 0..1000 {
            assert!(mh_step(&mut state, &target, &mh).unwrap());
        }
        assert_eq!(state.accepted(), state.proposed());
    }

    #[test]
    fn zero_density_proposals_are_rejected() {
        let mh = MhConfig { burn_in: 0, inter_sample_gap: 0, within_sample_gap: 0, proposal_rate: 1.0, seed: 9 };
        // support only on (0, 0.5)
        let target = |t: f64| if t < 0.5 { 1.0 } else { 0.0 };
        let mut state = ChainState::start(&target, &mh, 0).unwrap();
        for _ in 0..2000 {
            mh_step(&mut state, &target, &mh).unwrap();
            assert!(state.current() < 0.5);
        }
        assert!(state.accepted() < state.proposed());
    }

    #[test]
    fn zero_density_state_is_an_error() {
        let mh = MhConfig { burn_in: 0, inter_sample_gap: 0, within_sample_gap: 0, proposal_rate: 1.0, seed: 1 };
        let target = |t: f64| (-t).exp();
        let mut state = ChainState::start(&target, &mh, 0).unwrap();
        let dead = |_t: f64| 0.0;
        state.current_density = 0.0;
        assert!(matches!(mh_step(&mut state, &dead, &mh), Err(McmcError::ZeroDensity { .. })));
        assert!(ChainState::start(&dead, &mh, 0).is_err());
        state.restart(&target).unwrap();
        assert!(mh_step(&mut state, &target, &mh).is_ok());
    }

    #[test]
    fn complete_sample_keeps_all_draws() {
        let c = cfg();
        let mh = MhConfig::for_model(&c, 11);
        let target = MarginalTarget(c);
        let mut state = ChainState::start(&target, &mh, 0).unwrap();
        let d = draw_censored_sample(&target, &mh, 12, 12, &mut state).unwrap();
        assert_eq!(d.sample.r(), 12);
        let mut sorted = d.draws.clone();
        sorted.sort_by(f64::total_cmp);
        for (t, s) in d.sample.times().iter().zip(&sorted) {
            assert!(*t >= *s && *t <= s.next_up().next_up().max(*t));
        }
    }

    #[test]
    fn samples_are_valid_and_reproducible() {
        let c = cfg();
        let mh = MhConfig::for_model(&c, 2024);
        let a = run_repetitions(&c, &mh, 30, 10, 20).unwrap();
        let b = run_repetitions(&c, &mh, 30, 10, 20).unwrap();
        assert_eq!(a, b);
        for s in &a {
            assert!(CensoredSample::new(s.n(), s.r(), s.times().to_vec()).is_ok());
        }
        let other = run_repetitions(&c, &MhConfig { seed: 2025, ..mh }, 30, 10, 20).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn single_repetition_is_first_draw() {
        let c = cfg();
        let mh = MhConfig::for_model(&c, 5);
        let reps = run_repetitions(&c, &mh, 20, 5, 1).unwrap();
        let target = MarginalTarget(c);
        let mut state = ChainState::start(&target, &mh, 0).unwrap();
        let d = draw_censored_sample(&target, &mh, 20, 5, &mut state).unwrap();
        assert_eq!(reps[0], d.sample);
    }

    #[test]
    fn ties_are_broken_upward() {
        let (s, ties) = censor(&[2.0, 1.0, 1.0, 1.0, 3.0], 5, 4).unwrap();
        assert_eq!(ties, 2);
        assert_eq!(s.times()[0], 1.0);
        assert_eq!(s.times()[1], 1.0f64.next_up());
        assert_eq!(s.times()[2], 1.0f64.next_up().next_up());
        assert_eq!(s.times()[3], 2.0);
    }

    #[test]
    fn bad_counts_rejected() {
        let c = cfg();
        let mh = MhConfig::for_model(&c, 5);
        assert!(run_repetitions(&c, &mh, 3, 4, 1).is_err());
        assert!(MhConfig { proposal_rate: 0.0, ..mh }.validated().is_err());
    }

    #[test]
    fn acceptance_rate_is_nondegenerate() {
        for &(th, l1, l2, rho) in &[(1.5, 0.1, 0.2, 0.5), (2.0, 1.0, 1.0, -1.0), (0.8, 0.5, 2.0, 1.0)] {
            let c = ModelConfig::new(th, l1, l2, rho).unwrap();
            let mh = MhConfig::for_model(&c, 77);
            let target = MarginalTarget(c);
            let mut state = ChainState::start(&target, &mh, 0).unwrap();
            thinned_draws(&target, &mh, 200, 10, &mut state).unwrap();
            let rate = state.acceptance_rate();
            assert!(rate > 0.0 && rate < 1.0, "{rate}");
        }
    }
}
