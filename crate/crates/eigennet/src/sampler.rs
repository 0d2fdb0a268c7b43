//! Blockwise random-walk Metropolis sampler, posterior summaries, and chain
//! diagnostics.
//!
//! Each sweep updates four blocks in a fixed order (`alpha`, `beta`, `s`,
//! intercept) with Gaussian proposals, reflecting `s` at zero. Proposal step
//! sizes adapt toward a target acceptance rate during burn-in and stay
//! frozen afterwards. The engine is generic over a [`BlockTarget`], so the
//! eigenbasis model, the Bayesian lasso, and plain closures over
//! [`ModelState`] all run on the same loop.

use std::io::{BufRead, BufReader, Read, Write};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::eigen::{project_data, EigenBasis};
use crate::error::{Error, Result};
use crate::model::{l1_norm, log_sigmoid, HyperParams, ModelState};

/// Chain length, thinning, proposal scales, and adaptation settings.
///
/// The defaults match the full-scale protocol (300k iterations, half burned);
/// [`SamplerConfig::desk_scale`] is the 10x-shorter configuration the
/// experiment harness uses by default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub total_iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub step_alpha: f64,
    pub step_beta: f64,
    pub step_s: f64,
    pub step_bias: f64,
    pub target_accept: f64,
    pub adapt_window: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            total_iterations: 300_000,
            burn_in: 150_000,
            thin: 10,
            step_alpha: 0.25,
            step_beta: 0.25,
            step_s: 0.25,
            step_bias: 0.25,
            target_accept: 0.25,
            adapt_window: 500,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    /// 30k iterations with 15k burn-in; everything else as [`Default`].
    pub fn desk_scale() -> Self {
        Self {
            total_iterations: 30_000,
            burn_in: 15_000,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_iterations == 0 {
            return Err(Error::Config("total_iterations must be positive".into()));
        }
        if self.burn_in >= self.total_iterations {
            return Err(Error::Config(format!(
                "burn_in {} must be smaller than total_iterations {}",
                self.burn_in, self.total_iterations
            )));
        }
        if self.thin == 0 {
            return Err(Error::Config("thin must be positive".into()));
        }
        if self.adapt_window == 0 {
            return Err(Error::Config("adapt_window must be positive".into()));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::Config(format!(
                "target_accept must lie in (0, 1), got {}",
                self.target_accept
            )));
        }
        for (name, v) in [
            ("step_alpha", self.step_alpha),
            ("step_beta", self.step_beta),
            ("step_s", self.step_s),
            ("step_bias", self.step_bias),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!(
                    "{name} must be non-negative and finite, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Number of states a run with this configuration retains.
    pub fn retained_len(&self) -> usize {
        (self.total_iterations - self.burn_in) / self.thin
    }
}

/// The four update blocks of one sweep, in update order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    Alpha,
    Beta,
    S,
    Bias,
}

impl Block {
    pub const ALL: [Block; 4] = [Block::Alpha, Block::Beta, Block::S, Block::Bias];

    fn index(self) -> usize {
        match self {
            Block::Alpha => 0,
            Block::Beta => 1,
            Block::S => 2,
            Block::Bias => 3,
        }
    }
}

/// Current proposal standard deviations, one per block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSizes {
    pub alpha: f64,
    pub beta: f64,
    pub s: f64,
    pub bias: f64,
}

impl StepSizes {
    fn from_config(cfg: &SamplerConfig) -> Self {
        Self {
            alpha: cfg.step_alpha,
            beta: cfg.step_beta,
            s: cfg.step_s,
            bias: cfg.step_bias,
        }
    }
}

/// Proposal scales plus an optional mask freezing individual `s`
/// coordinates (used to pin alignment magnitudes on zero eigenvalues).
#[derive(Debug, Clone)]
pub struct BlockSteps {
    pub sizes: StepSizes,
    pub s_active: Option<Vec<bool>>,
}

/// An unnormalized log density evaluated blockwise.
///
/// The engine calls `log_density_full` once at the start of a run, then
/// `log_density_block` for each proposal with exactly one block changed
/// relative to the last committed state, followed by `commit` or `discard`.
/// Implementations may cache per-term work between calls; the provided
/// defaults recompute from scratch, which is what the blanket closure
/// implementation relies on.
pub trait BlockTarget {
    /// Log density at `state`, refreshing any caches.
    fn log_density_full(&mut self, state: &ModelState) -> f64;

    /// Log density at `state`, which differs from the committed state only
    /// in `block`.
    fn log_density_block(&mut self, state: &ModelState, _block: Block) -> f64 {
        self.log_density_full(state)
    }

    /// The proposal just evaluated for `block` was accepted.
    fn commit(&mut self, _block: Block) {}

    /// The proposal just evaluated for `block` was rejected.
    fn discard(&mut self, _block: Block) {}
}

impl<F: FnMut(&ModelState) -> f64> BlockTarget for F {
    fn log_density_full(&mut self, state: &ModelState) -> f64 {
        self(state)
    }
}

/// Which proposals one sweep attempted and which it accepted.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepReport {
    pub attempted: [bool; 4],
    pub accepted: [bool; 4],
}

/// One sweep of blockwise Metropolis updates over `state`.
///
/// `log_density` must hold the target's value at `state` (finite, and
/// matching the target's internal caches). Empty blocks are skipped and
/// consume no randomness. Proposals with a non-finite log density are
/// rejected. On return, `state` and `log_density` reflect all accepted
/// sub-updates.
pub fn rw_step<T, R>(
    state: &mut ModelState,
    log_density: &mut f64,
    target: &mut T,
    steps: &BlockSteps,
    rng: &mut R,
) -> Result<StepReport>
where
    T: BlockTarget + ?Sized,
    R: Rng + ?Sized,
{
    if !log_density.is_finite() {
        return Err(Error::Contract(format!(
            "current log density must be finite, got {log_density}"
        )));
    }
    if let Some(mask) = &steps.s_active {
        if mask.len() != state.s.len() {
            return Err(Error::Dimension(format!(
                "s mask has length {}, state.s has {}",
                mask.len(),
                state.s.len()
            )));
        }
    }
    let mut report = StepReport::default();
    for block in Block::ALL {
        let skip = match block {
            Block::Alpha => state.alpha.is_empty(),
            Block::Beta => state.beta.is_empty(),
            Block::S => {
                state.s.is_empty()
                    || steps
                        .s_active
                        .as_ref()
                        .is_some_and(|m| m.iter().all(|&a| !a))
            }
            Block::Bias => false,
        };
        if skip {
            continue;
        }
        let undo = propose(state, block, steps, rng);
        let proposed = target.log_density_block(state, block);
        let accept = proposed.is_finite() && rng.random::<f64>().ln() < proposed - *log_density;
        report.attempted[block.index()] = true;
        if accept {
            report.accepted[block.index()] = true;
            *log_density = proposed;
            target.commit(block);
        } else {
            undo.restore(state);
            target.discard(block);
        }
    }
    Ok(report)
}

enum Undo {
    Vector(Block, DVector<f64>),
    Scalar(f64),
}

impl Undo {
    fn restore(self, state: &mut ModelState) {
        match self {
            Undo::Vector(Block::Alpha, v) => state.alpha = v,
            Undo::Vector(Block::Beta, v) => state.beta = v,
            Undo::Vector(_, v) => state.s = v,
            Undo::Scalar(b) => state.b = b,
        }
    }
}

fn propose<R: Rng + ?Sized>(
    state: &mut ModelState,
    block: Block,
    steps: &BlockSteps,
    rng: &mut R,
) -> Undo {
    let normal = |rng: &mut R| -> f64 { rng.sample(StandardNormal) };
    match block {
        Block::Alpha => {
            let undo = Undo::Vector(block, state.alpha.clone());
            for x in state.alpha.iter_mut() {
                *x += steps.sizes.alpha * normal(rng);
            }
            undo
        }
        Block::Beta => {
            let undo = Undo::Vector(block, state.beta.clone());
            for x in state.beta.iter_mut() {
                *x += steps.sizes.beta * normal(rng);
            }
            undo
        }
        Block::S => {
            let undo = Undo::Vector(block, state.s.clone());
            for (j, x) in state.s.iter_mut().enumerate() {
                let active = steps.s_active.as_ref().is_none_or(|m| m[j]);
                if active {
                    // reflect at zero; the proposal stays symmetric
                    *x = (*x + steps.sizes.s * normal(rng)).abs();
                }
            }
            undo
        }
        Block::Bias => {
            let undo = Undo::Scalar(state.b);
            state.b += steps.sizes.bias * normal(rng);
            undo
        }
    }
}

/// A thinned post-burn-in state.
#[derive(Debug, Clone, PartialEq)]
pub struct RetainedSample {
    /// 1-based sweep index at which the state was recorded.
    pub iteration: usize,
    pub log_density: f64,
    pub state: ModelState,
}

/// Post-burn-in acceptance rates per block; blocks that never proposed
/// report 1.0.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AcceptRates {
    pub alpha: f64,
    pub beta: f64,
    pub s: f64,
    pub bias: f64,
}

/// Everything a finished run exposes: thinned samples, acceptance rates,
/// the best state seen anywhere in the run, the (frozen) final step sizes,
/// and an echo of the configuration.
#[derive(Debug, Clone)]
pub struct ChainResult {
    pub samples: Vec<RetainedSample>,
    pub accept_rates: AcceptRates,
    pub best_state: ModelState,
    pub best_log_density: f64,
    pub final_steps: StepSizes,
    pub config: SamplerConfig,
}

/// Runs a full chain of [`rw_step`] sweeps over `target` from `init`.
///
/// Step sizes adapt once per `adapt_window` sweeps during burn-in
/// (multiplying by `exp((rate - target_accept) / sqrt(k))` at the k-th
/// window) and are frozen afterwards. States are retained every `thin`-th
/// sweep after burn-in, giving exactly
/// `(total_iterations - burn_in) / thin` samples (integer division).
pub fn run_chain_with_target<T: BlockTarget + ?Sized>(
    target: &mut T,
    init: ModelState,
    cfg: &SamplerConfig,
    s_active: Option<Vec<bool>>,
) -> Result<ChainResult> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = init;
    let mut log_density = target.log_density_full(&state);
    if !log_density.is_finite() {
        return Err(Error::Contract(format!(
            "log density at the initial state is {log_density}"
        )));
    }

    let mut steps = BlockSteps {
        sizes: StepSizes::from_config(cfg),
        s_active,
    };
    let mut samples = Vec::with_capacity(cfg.retained_len());
    let mut best_state = state.clone();
    let mut best_log_density = log_density;
    let mut window_attempts = [0u64; 4];
    let mut window_accepts = [0u64; 4];
    let mut run_attempts = [0u64; 4];
    let mut run_accepts = [0u64; 4];
    let mut windows_done = 0u32;

    for i in 1..=cfg.total_iterations {
        let report = rw_step(&mut state, &mut log_density, target, &steps, &mut rng)?;
        for k in 0..4 {
            if report.attempted[k] {
                window_attempts[k] += 1;
                window_accepts[k] += u64::from(report.accepted[k]);
                if i > cfg.burn_in {
                    run_attempts[k] += 1;
                    run_accepts[k] += u64::from(report.accepted[k]);
                }
            }
        }
        if log_density > best_log_density {
            best_log_density = log_density;
            best_state = state.clone();
        }
        if i <= cfg.burn_in && i % cfg.adapt_window == 0 {
            windows_done += 1;
            let gain = 1.0 / f64::from(windows_done).sqrt();
            for block in Block::ALL {
                let k = block.index();
                if window_attempts[k] == 0 {
                    continue;
                }
                let rate = window_accepts[k] as f64 / window_attempts[k] as f64;
                let factor = (gain * (rate - cfg.target_accept)).exp();
                let size = match block {
                    Block::Alpha => &mut steps.sizes.alpha,
                    Block::Beta => &mut steps.sizes.beta,
                    Block::S => &mut steps.sizes.s,
                    Block::Bias => &mut steps.sizes.bias,
                };
                *size = (*size * factor).clamp(0.0, 1e10);
            }
            window_attempts = [0; 4];
            window_accepts = [0; 4];
        }
        if i > cfg.burn_in && (i - cfg.burn_in).is_multiple_of(cfg.thin) {
            samples.push(RetainedSample {
                iteration: i,
                log_density,
                state: state.clone(),
            });
        }
    }

    let rate = |k: usize| {
        if run_attempts[k] == 0 {
            1.0
        } else {
            run_accepts[k] as f64 / run_attempts[k] as f64
        }
    };
    Ok(ChainResult {
        samples,
        accept_rates: AcceptRates {
            alpha: rate(0),
            beta: rate(1),
            s: rate(2),
            bias: rate(3),
        },
        best_state,
        best_log_density,
        final_steps: steps.sizes,
        config: cfg.clone(),
    })
}

/// The eigenbasis model's log posterior with per-term caching.
///
/// Projected margins, the l1 norm of `V * alpha`, and each energy term are
/// recomputed only when the block they depend on changes, so one sweep
/// costs `O(n m + p m)` instead of four full posterior evaluations.
pub struct EigenNetTarget<'a> {
    z: DMatrix<f64>,
    basis: &'a EigenBasis,
    labels: &'a DVector<f64>,
    hp: HyperParams,
    margins: DVector<f64>,
    margins_prop: DVector<f64>,
    w_buf: DVector<f64>,
    likelihood: Term,
    l1: Term,
    alignment: Term,
    coupling: Term,
    bias: Term,
}

#[derive(Debug, Clone, Copy, Default)]
struct Term {
    current: f64,
    proposed: f64,
}

impl Term {
    fn keep(&mut self) {
        self.current = self.proposed;
    }
}

impl<'a> EigenNetTarget<'a> {
    pub fn new(data: &'a Dataset, basis: &'a EigenBasis, hp: HyperParams) -> Result<Self> {
        let z = project_data(data.features(), basis)?;
        let n = data.n();
        Ok(Self {
            z,
            basis,
            labels: data.labels(),
            hp,
            margins: DVector::zeros(n),
            margins_prop: DVector::zeros(n),
            w_buf: DVector::zeros(basis.p()),
            likelihood: Term::default(),
            l1: Term::default(),
            alignment: Term::default(),
            coupling: Term::default(),
            bias: Term::default(),
        })
    }

    fn log_likelihood(&self, margins: &DVector<f64>, b: f64) -> f64 {
        let mut total = 0.0;
        for i in 0..margins.len() {
            total += log_sigmoid(self.labels[i] * (margins[i] + b));
        }
        total
    }

    fn l1_term(&mut self, alpha: &DVector<f64>) -> f64 {
        self.w_buf.gemv(1.0, self.basis.vectors(), alpha, 0.0);
        -self.hp.lambda1() * l1_norm(&self.w_buf)
    }

    fn alignment_term(&self, state: &ModelState) -> f64 {
        let mut total = 0.0;
        for j in 0..state.beta.len() {
            let (beta, s, eta) = (state.beta[j], state.s[j], self.basis.values()[j]);
            total += beta * beta - 2.0 * eta * s * beta.abs() + eta * s * s;
        }
        -0.5 * self.hp.lambda2() * total
    }

    fn coupling_term(&self, state: &ModelState) -> f64 {
        -0.5 * self.hp.lambda3() * (&state.alpha - &state.beta).norm_squared()
    }

    fn bias_term(&self, b: f64) -> f64 {
        let sigma = self.hp.bias_sigma();
        -b * b / (2.0 * sigma * sigma)
    }
}

impl BlockTarget for EigenNetTarget<'_> {
    fn log_density_full(&mut self, state: &ModelState) -> f64 {
        self.margins.gemv(1.0, &self.z, &state.alpha, 0.0);
        self.likelihood.current = self.log_likelihood(&self.margins, state.b);
        self.l1.current = self.l1_term(&state.alpha);
        self.alignment.current = self.alignment_term(state);
        self.coupling.current = self.coupling_term(state);
        self.bias.current = self.bias_term(state.b);
        self.likelihood.current
            + self.l1.current
            + self.alignment.current
            + self.coupling.current
            + self.bias.current
    }

    fn log_density_block(&mut self, state: &ModelState, block: Block) -> f64 {
        match block {
            Block::Alpha => {
                self.margins_prop.gemv(1.0, &self.z, &state.alpha, 0.0);
                self.likelihood.proposed = self.log_likelihood(&self.margins_prop, state.b);
                self.l1.proposed = self.l1_term(&state.alpha);
                self.coupling.proposed = self.coupling_term(state);
                self.likelihood.proposed
                    + self.l1.proposed
                    + self.alignment.current
                    + self.coupling.proposed
                    + self.bias.current
            }
            Block::Beta => {
                self.alignment.proposed = self.alignment_term(state);
                self.coupling.proposed = self.coupling_term(state);
                self.likelihood.current
                    + self.l1.current
                    + self.alignment.proposed
                    + self.coupling.proposed
                    + self.bias.current
            }
            Block::S => {
                self.alignment.proposed = self.alignment_term(state);
                self.likelihood.current
                    + self.l1.current
                    + self.alignment.proposed
                    + self.coupling.current
                    + self.bias.current
            }
            Block::Bias => {
                self.likelihood.proposed = self.log_likelihood(&self.margins, state.b);
                self.bias.proposed = self.bias_term(state.b);
                self.likelihood.proposed
                    + self.l1.current
                    + self.alignment.current
                    + self.coupling.current
                    + self.bias.proposed
            }
        }
    }

    fn commit(&mut self, block: Block) {
        match block {
            Block::Alpha => {
                std::mem::swap(&mut self.margins, &mut self.margins_prop);
                self.likelihood.keep();
                self.l1.keep();
                self.coupling.keep();
            }
            Block::Beta => {
                self.alignment.keep();
                self.coupling.keep();
            }
            Block::S => self.alignment.keep(),
            Block::Bias => {
                self.likelihood.keep();
                self.bias.keep();
            }
        }
    }
}

/// Runs the eigenbasis model's sampler on `data`.
///
/// Starts from [`ModelState::initial`] and freezes the `s` coordinates of
/// zero eigenvalues.
pub fn run_chain(
    data: &Dataset,
    basis: &EigenBasis,
    hp: &HyperParams,
    cfg: &SamplerConfig,
) -> Result<ChainResult> {
    let mut target = EigenNetTarget::new(data, basis, *hp)?;
    let init = ModelState::initial(basis);
    let s_active: Vec<bool> = (0..basis.m()).map(|j| basis.values()[j] > 0.0).collect();
    run_chain_with_target(&mut target, init, cfg, Some(s_active))
}

/// Posterior-mean classifier `(w, b)`: `w = V * mean(alpha)`, `b = mean(b)`.
pub fn posterior_mean_classifier(
    chain: &ChainResult,
    basis: &EigenBasis,
) -> Result<(DVector<f64>, f64)> {
    if chain.samples.is_empty() {
        return Err(Error::Contract("chain retained no samples".into()));
    }
    let m = basis.m();
    if chain.samples[0].state.alpha.len() != m {
        return Err(Error::Dimension(format!(
            "samples have alpha length {}, basis has {} columns",
            chain.samples[0].state.alpha.len(),
            m
        )));
    }
    let count = chain.samples.len() as f64;
    let mut alpha_mean = DVector::zeros(m);
    let mut b_mean = 0.0;
    for sample in &chain.samples {
        alpha_mean += &sample.state.alpha;
        b_mean += sample.state.b;
    }
    alpha_mean /= count;
    b_mean /= count;
    Ok((basis.vectors() * alpha_mean, b_mean))
}

/// Posterior covariance of the feature-space weights,
/// `V Cov(alpha) V^T` with the unbiased (T - 1) divisor.
pub fn posterior_covariance_w(chain: &ChainResult, basis: &EigenBasis) -> Result<DMatrix<f64>> {
    let t = chain.samples.len();
    if t < 2 {
        return Err(Error::Contract(format!(
            "covariance needs at least 2 samples, chain retained {t}"
        )));
    }
    let m = basis.m();
    if chain.samples[0].state.alpha.len() != m {
        return Err(Error::Dimension(format!(
            "samples have alpha length {}, basis has {} columns",
            chain.samples[0].state.alpha.len(),
            m
        )));
    }
    let mut mean = DVector::zeros(m);
    for sample in &chain.samples {
        mean += &sample.state.alpha;
    }
    mean /= t as f64;
    let mut cov = DMatrix::zeros(m, m);
    for sample in &chain.samples {
        let d = &sample.state.alpha - &mean;
        cov.ger(1.0, &d, &d, 1.0);
    }
    cov /= (t - 1) as f64;
    Ok(basis.vectors() * cov * basis.vectors().transpose())
}

/// A scalar coordinate of the chain for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coordinate {
    Alpha(usize),
    Beta(usize),
    S(usize),
    Bias,
    LogDensity,
}

impl ChainResult {
    /// The retained series of one coordinate.
    pub fn coordinate_series(&self, coord: Coordinate) -> Result<Vec<f64>> {
        let pick = |len: usize, j: usize, name: &str| -> Result<()> {
            if j >= len {
                return Err(Error::Dimension(format!(
                    "{name} index {j} out of bounds for length {len}"
                )));
            }
            Ok(())
        };
        if let Some(first) = self.samples.first() {
            match coord {
                Coordinate::Alpha(j) => pick(first.state.alpha.len(), j, "alpha")?,
                Coordinate::Beta(j) => pick(first.state.beta.len(), j, "beta")?,
                Coordinate::S(j) => pick(first.state.s.len(), j, "s")?,
                Coordinate::Bias | Coordinate::LogDensity => {}
            }
        }
        Ok(self
            .samples
            .iter()
            .map(|s| match coord {
                Coordinate::Alpha(j) => s.state.alpha[j],
                Coordinate::Beta(j) => s.state.beta[j],
                Coordinate::S(j) => s.state.s[j],
                Coordinate::Bias => s.state.b,
                Coordinate::LogDensity => s.log_density,
            })
            .collect())
    }
}

/// Effective sample size of one retained coordinate of `chain`.
pub fn effective_sample_size(chain: &ChainResult, coord: Coordinate) -> Result<f64> {
    effective_sample_size_of(&chain.coordinate_series(coord)?)
}

/// Effective sample size of a scalar series by the initial-positive-sequence
/// estimator: sum autocorrelations in pairs, truncate at the first
/// non-positive pair, and divide the length by the resulting correlation
/// time. A constant series reports 1.0; the result is clamped to
/// `(0, len]`. Needs at least 10 points.
pub fn effective_sample_size_of(series: &[f64]) -> Result<f64> {
    let n = series.len();
    if n < 10 {
        return Err(Error::Validation(format!(
            "effective sample size needs at least 10 points, got {n}"
        )));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation(
            "series contains non-finite values".into(),
        ));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = series.iter().map(|v| v - mean).collect();
    let c0 = centered.iter().map(|d| d * d).sum::<f64>() / n as f64;
    if c0 == 0.0 {
        return Ok(1.0);
    }
    let autocorr = |lag: usize| -> f64 {
        let mut acc = 0.0;
        for i in 0..n - lag {
            acc += centered[i] * centered[i + lag];
        }
        acc / (n as f64 * c0)
    };
    let mut tau = -1.0;
    let mut k = 0;
    while 2 * k + 1 < n {
        let gamma = autocorr(2 * k) + autocorr(2 * k + 1);
        if gamma <= 0.0 {
            break;
        }
        tau += 2.0 * gamma;
        k += 1;
    }
    if tau <= 0.0 {
        return Ok(n as f64);
    }
    Ok((n as f64 / tau).min(n as f64))
}

/// Writes the retained samples as one record per line:
/// `iteration,log_density,b,alpha...,beta...,s...`, preceded by a header
/// giving the block lengths. Floats round-trip exactly.
pub fn write_chain_dump<W: Write>(chain: &ChainResult, mut out: W) -> Result<()> {
    let (ma, mb, ms) = chain
        .samples
        .first()
        .map(|s| (s.state.alpha.len(), s.state.beta.len(), s.state.s.len()))
        .unwrap_or((0, 0, 0));
    writeln!(out, "# alpha={ma} beta={mb} s={ms}")?;
    let mut line = String::new();
    for sample in &chain.samples {
        line.clear();
        line.push_str(&format!(
            "{},{:e},{:e}",
            sample.iteration, sample.log_density, sample.state.b
        ));
        for block in [&sample.state.alpha, &sample.state.beta, &sample.state.s] {
            for v in block.iter() {
                line.push_str(&format!(",{v:e}"));
            }
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Reads a dump produced by [`write_chain_dump`].
pub fn read_chain_dump<R: Read>(input: R) -> Result<Vec<RetainedSample>> {
    let mut lines = BufReader::new(input).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Validation("chain dump is empty".into()))??;
    let sizes = parse_dump_header(&header)?;
    let mut samples = Vec::new();
    for (row, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        samples.push(parse_dump_line(&line, row + 2, sizes)?);
    }
    Ok(samples)
}

fn parse_dump_header(header: &str) -> Result<(usize, usize, usize)> {
    let bad = || Error::CsvParse {
        line: 1,
        field: 1,
        message: format!("malformed chain dump header: {header:?}"),
    };
    let rest = header.strip_prefix("# ").ok_or_else(bad)?;
    let mut sizes = [0usize; 3];
    let mut parts = rest.split_whitespace();
    for (i, key) in ["alpha=", "beta=", "s="].iter().enumerate() {
        let part = parts.next().ok_or_else(bad)?;
        let value = part.strip_prefix(key).ok_or_else(bad)?;
        sizes[i] = value.parse().map_err(|_| bad())?;
    }
    Ok((sizes[0], sizes[1], sizes[2]))
}

fn parse_dump_line(
    line: &str,
    lineno: usize,
    sizes: (usize, usize, usize),
) -> Result<RetainedSample> {
    let (ma, mb, ms) = sizes;
    let expect = 3 + ma + mb + ms;
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != expect {
        return Err(Error::CsvParse {
            line: lineno,
            field: fields.len(),
            message: format!("expected {expect} fields, found {}", fields.len()),
        });
    }
    let parse_f64 = |idx: usize| -> Result<f64> {
        fields[idx].parse().map_err(|e| Error::CsvParse {
            line: lineno,
            field: idx + 1,
            message: format!("{e}: {:?}", fields[idx]),
        })
    };
    let iteration: usize = fields[0].parse().map_err(|e| Error::CsvParse {
        line: lineno,
        field: 1,
        message: format!("{e}: {:?}", fields[0]),
    })?;
    let log_density = parse_f64(1)?;
    let b = parse_f64(2)?;
    let read_block = |offset: usize, len: usize| -> Result<DVector<f64>> {
        let mut v = DVector::zeros(len);
        for j in 0..len {
            v[j] = parse_f64(offset + j)?;
        }
        Ok(v)
    };
    let alpha = read_block(3, ma)?;
    let beta = read_block(3 + ma, mb)?;
    let s = read_block(3 + ma + mb, ms)?;
    Ok(RetainedSample {
        iteration,
        log_density,
        state: ModelState { alpha, beta, s, b },
    })
}
