//! Forward/backward statistics for the three observation streams.
//!
//! * `U` stream: chain over energy levels, emission `D[e][u]`.
//! * `Y` stream: chain over joint states `(c, e)`, Gaussian emission of `Y`.
//! * `U,Y` stream: chain over joint states, emission `D[e][u] * f(y | c, e)`.
//!
//! All recursions are rescaled per slot: the forward vector is normalized to
//! sum to one and the scale factors are accumulated in log space. The
//! resulting `gamma` and `eps` arrays are the textbook occupation and
//! transition posteriors, i.e. the unscaled forward/backward products divided
//! by the stream likelihood.

use ndarray::{s, Array1, Array2, Array3, ArrayView3, ArrayView5, Ix5};

use crate::error::{HimmError, Result};
use crate::model::{normal_log_pdf, HimmParams, CHANNEL_STATES};
use crate::simgen::ObservationSequence;

/// Posteriors of one hidden chain given one observation stream.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainPosterior {
    /// `gamma[[t, i]] = P(X_t = i | obs)`.
    pub gamma: Array2<f64>,
    /// `eps[[t, i, j]] = P(X_t = i, X_{t+1} = j | obs)`.
    pub eps: Array3<f64>,
    pub log_likelihood: f64,
}

/// Rescaled forward/backward pass.
///
/// `init[i]` is the prior of the first slot, `trans[[i, j]]` the transition
/// probability and `log_emission[[t, j]]` the log emission weight of state
/// `j` at slot `t` (may be `-inf`).
pub fn forward_backward(init: &Array1<f64>, trans: &Array2<f64>, log_emission: &Array2<f64>) -> Result<ChainPosterior> {
    let (len, n) = log_emission.dim();
    if len == 0 {
        return Err(HimmError::TooShort { needed: 1, got: 0 });
    }
    // emission[t] = exp(log_emission[t] - shift[t]) over states with prior mass.
    let mut emission = Array2::<f64>::zeros((len, n));
    let mut alpha = Array2::<f64>::zeros((len, n));
    let mut scale = Array1::<f64>::zeros(len);
    let mut log_likelihood = 0.0;

    let mut prior = init.clone();
    for t in 0..len {
        if t > 0 {
            prior = alpha.row(t - 1).dot(trans);
        }
        let shift = (0..n).filter(|&j| prior[j] > 0.0).map(|j| log_emission[[t, j]]).fold(f64::NEG_INFINITY, f64::max);
        if !shift.is_finite() {
            return Err(HimmError::DegenerateEvidence { t });
        }
        let mut total = 0.0;
        for j in 0..n {
            let e = (log_emission[[t, j]] - shift).exp();
            emission[[t, j]] = e;
            let a = prior[j] * e;
            alpha[[t, j]] = a;
            total += a;
        }
        if !(total > 0.0 && total.is_finite()) {
            return Err(HimmError::DegenerateEvidence { t });
        }
        alpha.row_mut(t).mapv_inplace(|v| v / total);
        scale[t] = total;
        log_likelihood += total.ln() + shift;
    }

    let mut beta = Array2::<f64>::ones((len, n));
    for t in (0..len - 1).rev() {
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                acc += trans[[i, j]] * emission[[t + 1, j]] * beta[[t + 1, j]];
            }
            beta[[t, i]] = acc / scale[t + 1];
        }
    }

    let gamma = &alpha * &beta;
    let mut eps = Array3::<f64>::zeros((len.saturating_sub(1), n, n));
    for t in 0..len.saturating_sub(1) {
        for i in 0..n {
            let a = alpha[[t, i]];
            if a == 0.0 {
                continue;
            }
            for j in 0..n {
                eps[[t, i, j]] = a * trans[[i, j]] * emission[[t + 1, j]] * beta[[t + 1, j]] / scale[t + 1];
            }
        }
    }
    Ok(ChainPosterior { gamma, eps, log_likelihood })
}

/// Flattened joint state index of (channel, level).
#[inline]
pub fn joint_index(levels: usize, channel: usize, level: usize) -> usize {
    channel * levels + level
}

/// Prior of the first slot over joint states.
pub fn joint_init(params: &HimmParams) -> Array1<f64> {
    let l = params.shape.levels;
    Array1::from_shape_fn(CHANNEL_STATES * l, |s| {
        let (c, e) = (s / l, s % l);
        params.pi_c[[e, c]] * params.pi_e[e]
    })
}

/// Joint transition `T[(m, k), (c, e)] = A[k][e] * B(e)[m][c]`.
pub fn joint_transition(params: &HimmParams) -> Array2<f64> {
    let l = params.shape.levels;
    let n = CHANNEL_STATES * l;
    Array2::from_shape_fn((n, n), |(from, to)| {
        let (m, k) = (from / l, from % l);
        let (c, e) = (to / l, to % l);
        params.a[[k, e]] * params.b[[e, m, c]]
    })
}

/// Sufficient statistics of one E-step.
///
/// Joint-state arrays are indexed by [`joint_index`]; `*_grid` accessors
/// expose them as `[t, c, e]` and `[t, c, e, c', e']` views.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStats {
    pub levels: usize,
    pub gamma_u: Array2<f64>,
    pub eps_u: Array3<f64>,
    pub gamma_y: Array2<f64>,
    pub eps_y: Array3<f64>,
    pub gamma_uy: Array2<f64>,
    pub eps_uy: Array3<f64>,
    /// `log P(U^T, Y^T | params)`.
    pub log_likelihood: f64,
    /// `log P(U^T | params)`.
    pub loglik_u: f64,
    /// `log P(Y^T | params)`.
    pub loglik_y: f64,
}

fn grid3(a: &Array2<f64>, levels: usize) -> ArrayView3<'_, f64> {
    a.view().into_shape_with_order((a.nrows(), CHANNEL_STATES, levels)).expect("joint layout")
}

fn grid5(a: &Array3<f64>, levels: usize) -> ArrayView5<'_, f64> {
    a.view()
        .into_shape_with_order(Ix5(a.dim().0, CHANNEL_STATES, levels, CHANNEL_STATES, levels))
        .expect("joint layout")
}

impl SufficientStats {
    pub fn len(&self) -> usize {
        self.gamma_u.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn gamma_y_grid(&self) -> ArrayView3<'_, f64> {
        grid3(&self.gamma_y, self.levels)
    }

    pub fn gamma_uy_grid(&self) -> ArrayView3<'_, f64> {
        grid3(&self.gamma_uy, self.levels)
    }

    pub fn eps_y_grid(&self) -> ArrayView5<'_, f64> {
        grid5(&self.eps_y, self.levels)
    }

    pub fn eps_uy_grid(&self) -> ArrayView5<'_, f64> {
        grid5(&self.eps_uy, self.levels)
    }
}

/// Runs the three forward/backward passes.
pub fn compute_stats(params: &HimmParams, obs: &ObservationSequence) -> Result<SufficientStats> {
    let len = obs.len();
    if len < 2 {
        return Err(HimmError::TooShort { needed: 2, got: len });
    }
    if obs.u.len() != len {
        return Err(HimmError::dim("observations", obs.u.len(), len));
    }
    obs.check_shape(&params.shape)?;
    let l = params.shape.levels;
    let n = CHANNEL_STATES * l;

    let log_d = params.d.mapv(f64::ln);
    let log_u = Array2::from_shape_fn((len, l), |(t, e)| log_d[[e, obs.u[t]]]);
    let log_y = Array2::from_shape_fn((len, n), |(t, s)| {
        let (c, e) = (s / l, s % l);
        normal_log_pdf(obs.y[t], params.mu[[c, e]], params.sigma2[[c, e]])
    });
    let log_uy = Array2::from_shape_fn((len, n), |(t, s)| log_y[[t, s]] + log_u[[t, s % l]]);

    let init = joint_init(params);
    let trans = joint_transition(params);

    let u_pass = forward_backward(&params.pi_e, &params.a, &log_u)?;
    let y_pass = forward_backward(&init, &trans, &log_y)?;
    let uy_pass = forward_backward(&init, &trans, &log_uy)?;

    Ok(SufficientStats {
        levels: l,
        gamma_u: u_pass.gamma,
        eps_u: u_pass.eps,
        gamma_y: y_pass.gamma,
        eps_y: y_pass.eps,
        gamma_uy: uy_pass.gamma,
        eps_uy: uy_pass.eps,
        log_likelihood: uy_pass.log_likelihood,
        loglik_u: u_pass.log_likelihood,
        loglik_y: y_pass.log_likelihood,
    })
}

/// Joint log-likelihood only (forward pass of the `U,Y` stream).
pub fn log_likelihood(params: &HimmParams, obs: &ObservationSequence) -> Result<f64> {
    let grids = crate::filter::filter_sequence(params, obs, crate::filter::SensingMode::Joint)?;
    Ok(grids.iter().map(|g| g.log_evidence_increment).sum())
}

/// Marginal of the joint-state occupation over channels: `[t, e]`.
pub(crate) fn level_marginal(gamma_joint: &Array2<f64>, levels: usize) -> Array2<f64> {
    let len = gamma_joint.nrows();
    let mut out = Array2::zeros((len, levels));
    for c in 0..CHANNEL_STATES {
        out += &gamma_joint.slice(s![.., c * levels..(c + 1) * levels]);
    }
    out
}
