//! Brute-force reference computations by explicit hidden-path enumeration.
#![allow(dead_code, clippy::needless_range_loop)]

use himm::model::{random_params, RandomParamsConfig};
use himm::simgen::{emit_parametric, generate_hidden, ObservationSequence};
use himm::{HimmParams, ModelShape};

/// `(gamma[t][state], eps[t][state][state'], evidence)`.
pub type Smoothed = (Vec<Vec<f64>>, Vec<Vec<Vec<f64>>>, f64);

/// Which observation streams weight a path.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Streams {
    U,
    Y,
    UY,
}

fn gauss(y: f64, m: f64, v: f64) -> f64 {
    (-(y - m) * (y - m) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt()
}

fn emission(p: &HimmParams, s: Streams, c: usize, e: usize, u: usize, y: f64) -> f64 {
    let du = p.d[[e, u]];
    let gy = gauss(y, p.mu[[c, e]], p.sigma2[[c, e]]);
    match s {
        Streams::U => du,
        Streams::Y => gy,
        Streams::UY => du * gy,
    }
}

fn start_weight(p: &HimmParams, c: usize, e: usize) -> f64 {
    p.pi_e[e] * p.pi_c[[e, c]]
}

fn step_weight(p: &HimmParams, from: (usize, usize), to: (usize, usize)) -> f64 {
    p.a[[from.1, to.1]] * p.b[[to.1, from.0, to.0]]
}

/// Every hidden path of length `len` as a list of (channel, level) pairs.
pub fn all_paths(levels: usize, len: usize) -> Vec<Vec<(usize, usize)>> {
    let states: Vec<(usize, usize)> = (0..2).flat_map(|c| (0..levels).map(move |e| (c, e))).collect();
    let mut out = vec![vec![]];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|p| {
                states.iter().map(move |&s| {
                    let mut q = p.clone();
                    q.push(s);
                    q
                })
            })
            .collect();
    }
    out
}

/// Unnormalized probability of a path together with the observations.
pub fn path_weight(p: &HimmParams, s: Streams, obs: &ObservationSequence, path: &[(usize, usize)]) -> f64 {
    let mut w = 1.0;
    for (t, &(c, e)) in path.iter().enumerate() {
        w *= if t == 0 { start_weight(p, c, e) } else { step_weight(p, path[t - 1], (c, e)) };
        w *= emission(p, s, c, e, obs.u[t], obs.y[t]);
    }
    w
}

/// Filtering posteriors `P(C_t, E_t | obs^t)` as `[t][c][e]`, plus the
/// total evidence `P(obs^T)`.
pub fn filter_oracle(p: &HimmParams, s: Streams, obs: &ObservationSequence) -> (Vec<Vec<Vec<f64>>>, f64) {
    let l = p.shape.levels;
    let mut grids = Vec::new();
    let mut evidence = 0.0;
    for t in 1..=obs.len() {
        let mut g = vec![vec![0.0; l]; 2];
        let mut total = 0.0;
        for path in all_paths(l, t) {
            let w = path_weight(p, s, obs, &path);
            let (c, e) = path[t - 1];
            g[c][e] += w;
            total += w;
        }
        for row in g.iter_mut() {
            for v in row.iter_mut() {
                *v /= total;
            }
        }
        grids.push(g);
        evidence = total;
    }
    (grids, evidence)
}

/// Smoothing posteriors over joint states `s = c * L + e`:
/// `gamma[t][s]` and `eps[t][s][s']`, plus the evidence.
pub fn smoothing_oracle(p: &HimmParams, s: Streams, obs: &ObservationSequence) -> Smoothed {
    let l = p.shape.levels;
    let n = 2 * l;
    let len = obs.len();
    let mut gamma = vec![vec![0.0; n]; len];
    let mut eps = vec![vec![vec![0.0; n]; n]; len - 1];
    let mut total = 0.0;
    for path in all_paths(l, len) {
        let w = path_weight(p, s, obs, &path);
        total += w;
        let idx: Vec<usize> = path.iter().map(|&(c, e)| c * l + e).collect();
        for t in 0..len {
            gamma[t][idx[t]] += w;
            if t + 1 < len {
                eps[t][idx[t]][idx[t + 1]] += w;
            }
        }
    }
    for g in gamma.iter_mut().flatten() {
        *g /= total;
    }
    for v in eps.iter_mut().flatten().flatten() {
        *v /= total;
    }
    (gamma, eps, total)
}

/// Energy-only smoothing over the `U` stream: `gamma[t][e]`, `eps[t][e][e']`.
pub fn energy_smoothing_oracle(p: &HimmParams, obs: &ObservationSequence) -> Smoothed {
    let l = p.shape.levels;
    let len = obs.len();
    let mut paths: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..len {
        paths = paths.into_iter().flat_map(|q| (0..l).map(move |e| [q.clone(), vec![e]].concat())).collect();
    }
    let mut gamma = vec![vec![0.0; l]; len];
    let mut eps = vec![vec![vec![0.0; l]; l]; len - 1];
    let mut total = 0.0;
    for path in paths {
        let mut w = p.pi_e[path[0]] * p.d[[path[0], obs.u[0]]];
        for t in 1..len {
            w *= p.a[[path[t - 1], path[t]]] * p.d[[path[t], obs.u[t]]];
        }
        total += w;
        for t in 0..len {
            gamma[t][path[t]] += w;
            if t + 1 < len {
                eps[t][path[t]][path[t + 1]] += w;
            }
        }
    }
    for g in gamma.iter_mut().flatten() {
        *g /= total;
    }
    for v in eps.iter_mut().flatten().flatten() {
        *v /= total;
    }
    (gamma, eps, total)
}

/// A random small instance: shape, parameters and a sampled sequence.
pub fn random_instance(seed: u64, max_levels: usize, max_len: usize) -> (HimmParams, ObservationSequence) {
    let levels = 1 + (seed as usize % max_levels);
    let insufficient = (seed as usize / 7) % levels;
    let len = 1 + (seed as usize / 3) % max_len;
    let shape = ModelShape::new(levels, 0, insufficient).unwrap();
    let cfg = RandomParamsConfig { mu_range: (0.0, 3.0), sigma2_range: (0.2, 1.5) };
    let p = random_params(&shape, seed ^ 0x5eed, &cfg);
    let traj = generate_hidden(&p, len, seed.wrapping_mul(31) + 1).unwrap();
    let obs = emit_parametric(&p, &traj, seed.wrapping_mul(17) + 2).unwrap();
    (p, obs)
}
