//! Recursive posterior of the hidden pair `(C_t, E_t)` and MAP sensing.
//!
//! Each slot runs a predictor (the channel and energy transitions applied to
//! the previous posterior) followed by a corrector (the emission likelihood of
//! the current observation), then normalizes. The normalizer is the one-step
//! evidence `P(obs_t | obs^{t-1})`; its log is kept so the sum over slots is
//! the log-likelihood of the whole sequence.
//!
//! Emission weights are evaluated in log space and shifted by their maximum
//! before exponentiation, so a single very unlikely observation does not
//! underflow the corrector.

use ndarray::Array2;

use crate::error::{HimmError, Result};
use crate::model::{normal_log_pdf, HimmParams, BUSY, CHANNEL_STATES, IDLE};
use crate::simgen::ObservationSequence;

/// Which observation streams weight the corrector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SensingMode {
    /// Channel statistic `Y` and harvested energy `U`.
    Joint,
    /// Channel statistic `Y` only; `U` is marginalized out.
    ChannelOnly,
}

/// `P(C_t = c, E_t = e | observations up to t)` stored as `p[[c, e]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorGrid {
    pub p: Array2<f64>,
    /// `log P(obs_t | obs^{t-1})`.
    pub log_evidence_increment: f64,
}

impl PosteriorGrid {
    /// Marginal probability that the channel is busy.
    pub fn busy_probability(&self) -> f64 {
        self.p.row(BUSY).sum()
    }

    pub fn energy_marginal(&self) -> Vec<f64> {
        (0..self.p.ncols()).map(|e| self.p[[IDLE, e]] + self.p[[BUSY, e]]).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SenseDecision {
    pub channel: usize,
    /// Energy level index.
    pub level: usize,
    pub busy_posterior: f64,
    pub grid: PosteriorGrid,
}

/// `d[e][u] * N(y; mu[c][e], sigma2[c][e])`.
pub fn emission_weight(params: &HimmParams, channel: usize, level: usize, u: usize, y: f64) -> f64 {
    let d = params.d[[level, u]];
    if d == 0.0 {
        return 0.0;
    }
    d * params.y_log_density(channel, level, y).exp()
}

fn log_corrector(params: &HimmParams, mode: SensingMode, c: usize, e: usize, u: usize, y: f64) -> f64 {
    let ly = normal_log_pdf(y, params.mu[[c, e]], params.sigma2[[c, e]]);
    match mode {
        SensingMode::Joint => params.d[[e, u]].ln() + ly,
        SensingMode::ChannelOnly => ly,
    }
}

/// Multiplies `prior` by the corrector and normalizes.
fn correct(
    params: &HimmParams,
    mode: SensingMode,
    prior: Array2<f64>,
    u: usize,
    y: f64,
    t: usize,
) -> Result<PosteriorGrid> {
    let l = params.shape.levels;
    if u >= l {
        return Err(HimmError::dim(format!("U[{t}]"), format!("< {l}"), u));
    }
    let mut logq = Array2::from_elem((CHANNEL_STATES, l), f64::NEG_INFINITY);
    let mut shift = f64::NEG_INFINITY;
    for c in 0..CHANNEL_STATES {
        for e in 0..l {
            if prior[[c, e]] > 0.0 {
                let lq = log_corrector(params, mode, c, e, u, y);
                logq[[c, e]] = lq;
                shift = shift.max(lq);
            }
        }
    }
    if !shift.is_finite() {
        return Err(HimmError::DegenerateEvidence { t });
    }
    let mut p = prior;
    for (v, lq) in p.iter_mut().zip(logq.iter()) {
        *v = if *v > 0.0 { *v * (lq - shift).exp() } else { 0.0 };
    }
    let total: f64 = p.sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(HimmError::DegenerateEvidence { t });
    }
    p.mapv_inplace(|v| v / total);
    Ok(PosteriorGrid { p, log_evidence_increment: total.ln() + shift })
}

/// Joint prior `pi_C[e][c] * pi_E[e]` of the first slot.
fn initial_prior(params: &HimmParams) -> Array2<f64> {
    let l = params.shape.levels;
    Array2::from_shape_fn((CHANNEL_STATES, l), |(c, e)| params.pi_c[[e, c]] * params.pi_e[e])
}

/// One-step prediction `sum_{m,l} B(e)[m][c] A[l][e] prev[m][l]`.
pub fn predict(params: &HimmParams, prev: &Array2<f64>) -> Array2<f64> {
    let l = params.shape.levels;
    let mut pred = Array2::zeros((CHANNEL_STATES, l));
    for e in 0..l {
        for m in 0..CHANNEL_STATES {
            let into_e: f64 = (0..l).map(|k| params.a[[k, e]] * prev[[m, k]]).sum();
            if into_e == 0.0 {
                continue;
            }
            for c in 0..CHANNEL_STATES {
                pred[[c, e]] += params.b[[e, m, c]] * into_e;
            }
        }
    }
    pred
}

pub fn posterior_init_with(params: &HimmParams, mode: SensingMode, u: usize, y: f64) -> Result<PosteriorGrid> {
    correct(params, mode, initial_prior(params), u, y, 0)
}

pub fn posterior_step_with(
    prev: &PosteriorGrid,
    params: &HimmParams,
    mode: SensingMode,
    u: usize,
    y: f64,
    t: usize,
) -> Result<PosteriorGrid> {
    correct(params, mode, predict(params, &prev.p), u, y, t)
}

/// Posterior of the first slot from both observation streams.
pub fn posterior_init(params: &HimmParams, u1: usize, y1: f64) -> Result<PosteriorGrid> {
    posterior_init_with(params, SensingMode::Joint, u1, y1)
}

/// Advances the joint posterior by one slot.
pub fn posterior_step(prev: &PosteriorGrid, params: &HimmParams, u: usize, y: f64) -> Result<PosteriorGrid> {
    posterior_step_with(prev, params, SensingMode::Joint, u, y, 0)
}

/// Filtering posteriors for every slot of `obs`.
pub fn filter_sequence(
    params: &HimmParams,
    obs: &ObservationSequence,
    mode: SensingMode,
) -> Result<Vec<PosteriorGrid>> {
    if obs.is_empty() {
        return Err(HimmError::TooShort { needed: 1, got: 0 });
    }
    if obs.u.len() != obs.y.len() {
        return Err(HimmError::dim("observations", obs.u.len(), obs.y.len()));
    }
    let mut grids = Vec::with_capacity(obs.len());
    let mut grid = posterior_init_with(params, mode, obs.u[0], obs.y[0])?;
    for t in 1..obs.len() {
        let next = posterior_step_with(&grid, params, mode, obs.u[t], obs.y[t], t)?;
        grids.push(std::mem::replace(&mut grid, next));
    }
    grids.push(grid);
    Ok(grids)
}

/// Joint MAP cell of a grid, skipping (busy, insufficient) cells. Ties go to
/// the lowest (channel, level) pair.
pub fn map_cell(params: &HimmParams, grid: &PosteriorGrid) -> (usize, usize) {
    let shape = &params.shape;
    let mut best = (IDLE, 0);
    let mut best_p = f64::NEG_INFINITY;
    for c in 0..CHANNEL_STATES {
        for e in 0..shape.levels {
            if shape.is_allowed(c, e) && grid.p[[c, e]] > best_p {
                best_p = grid.p[[c, e]];
                best = (c, e);
            }
        }
    }
    best
}

pub fn decide(params: &HimmParams, grid: PosteriorGrid) -> SenseDecision {
    let (channel, level) = map_cell(params, &grid);
    SenseDecision { channel, level, busy_posterior: grid.busy_probability(), grid }
}

pub fn sense(params: &HimmParams, obs: &ObservationSequence, mode: SensingMode) -> Result<Vec<SenseDecision>> {
    Ok(filter_sequence(params, obs, mode)?.into_iter().map(|g| decide(params, g)).collect())
}

/// 2-D sensing: joint MAP of (channel, energy) from `U` and `Y`.
pub fn sense_2d(params: &HimmParams, obs: &ObservationSequence) -> Result<Vec<SenseDecision>> {
    sense(params, obs, SensingMode::Joint)
}

/// 1-D sensing from the channel statistic alone.
pub fn sense_1d(params: &HimmParams, y: &[f64]) -> Result<Vec<SenseDecision>> {
    // U never enters the ChannelOnly corrector.
    let obs = ObservationSequence { u: vec![0; y.len()], y: y.to_vec() };
    sense(params, &obs, SensingMode::ChannelOnly)
}

/// Busy iff the marginal busy posterior reaches `tau`.
pub fn detect_with_threshold(decisions: &[SenseDecision], tau: f64) -> Result<Vec<bool>> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(HimmError::Config(format!("threshold {tau} outside [0, 1]")));
    }
    Ok(decisions.iter().map(|d| d.busy_posterior >= tau).collect())
}
