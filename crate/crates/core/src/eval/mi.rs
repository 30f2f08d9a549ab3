//! Monte-Carlo estimate of the information the harvested-energy stream adds
//! about the final hidden pair.
//!
//! `I(C_T, E_T; U^T | Y^T)` equals the expected Kullback-Leibler divergence
//! between the joint posterior `P(C_T, E_T | U^T, Y^T)` and the channel-only
//! posterior `P(C_T, E_T | Y^T)`, so each trial generates one sequence, runs
//! both filters and records that divergence.

use rayon::prelude::*;

use crate::error::{HimmError, Result};
use crate::filter::{filter_sequence, PosteriorGrid, SensingMode};
use crate::model::HimmParams;
use crate::seed::derive_seed;
use crate::simgen::{emit_parametric, generate_hidden};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiEstimate {
    /// Nats.
    pub estimate: f64,
    pub standard_error: f64,
    pub trials: usize,
}

/// `KL(p || q)` in nats over the cells of two posterior grids.
pub fn kl_divergence(p: &PosteriorGrid, q: &PosteriorGrid) -> f64 {
    p.p.iter()
        .zip(q.p.iter())
        .filter(|(&a, _)| a > 0.0)
        .map(|(&a, &b)| if b > 0.0 { a * (a / b).ln() } else { f64::INFINITY })
        .sum()
}

/// KL between the two final-slot posteriors of one simulated sequence.
pub fn mi_trial(params: &HimmParams, horizon: usize, seed: u64, trial: usize) -> Result<f64> {
    let traj = generate_hidden(params, horizon, derive_seed(seed, "mi-hidden", trial as u64))?;
    let obs = emit_parametric(params, &traj, derive_seed(seed, "mi-emit", trial as u64))?;
    let joint = filter_sequence(params, &obs, SensingMode::Joint)?;
    let channel = filter_sequence(params, &obs, SensingMode::ChannelOnly)?;
    Ok(kl_divergence(joint.last().expect("horizon >= 1"), channel.last().expect("horizon >= 1")))
}

pub fn mi_gain_mc(params: &HimmParams, horizon: usize, n_trials: usize, seed: u64) -> Result<MiEstimate> {
    if horizon == 0 {
        return Err(HimmError::TooShort { needed: 1, got: 0 });
    }
    if n_trials < 2 {
        return Err(HimmError::Config("need at least two trials for a standard error".into()));
    }
    params.validate()?;
    let samples: Vec<f64> =
        (0..n_trials).into_par_iter().map(|k| mi_trial(params, horizon, seed, k)).collect::<Result<_>>()?;
    let n = n_trials as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(MiEstimate { estimate: mean, standard_error: (var / n).sqrt(), trials: n_trials })
}
