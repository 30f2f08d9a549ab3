//! Seeded generation of hidden PU trajectories and SU observations.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{HimmError, Result};
use crate::model::{HimmParams, ModelShape, PhysicalConfig, BUSY};
use crate::seed::{rng_from, SimRng};

/// Latent energy levels and channel states, by level index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HiddenTrajectory {
    pub energy: Vec<usize>,
    pub channel: Vec<usize>,
}

impl HiddenTrajectory {
    pub fn len(&self) -> usize {
        self.energy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energy.is_empty()
    }

    /// Number of slots where the channel is busy on an insufficient level.
    pub fn forbidden_pairs(&self, shape: &ModelShape) -> usize {
        self.energy.iter().zip(&self.channel).filter(|&(&e, &c)| !shape.is_allowed(c, e)).count()
    }
}

/// SU observations: harvested energy level index `u` and slot energy `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSequence {
    pub u: Vec<usize>,
    pub y: Vec<f64>,
}

impl ObservationSequence {
    pub fn new(u: Vec<usize>, y: Vec<f64>) -> Result<Self> {
        if u.len() != y.len() {
            return Err(HimmError::dim("observations", format!("|U| = {}", u.len()), format!("|Y| = {}", y.len())));
        }
        if let Some(t) = y.iter().position(|v| !v.is_finite()) {
            return Err(HimmError::Config(format!("Y[{t}] is not finite")));
        }
        Ok(Self { u, y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Checks that every `u` is a level index of `shape`.
    pub fn check_shape(&self, shape: &ModelShape) -> Result<()> {
        match self.u.iter().position(|&u| u >= shape.levels) {
            Some(t) => Err(HimmError::dim(format!("U[{t}]"), format!("< {}", shape.levels), self.u[t])),
            None => Ok(()),
        }
    }
}

/// Draws an index from a discrete distribution. Zero-weight entries are
/// never returned.
pub(crate) fn sample_index<'a>(weights: impl IntoIterator<Item = &'a f64>, rng: &mut SimRng) -> usize {
    let x: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.into_iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = i;
            if x < acc {
                return i;
            }
        }
    }
    last_positive
}

pub fn generate_hidden(params: &HimmParams, len: usize, seed: u64) -> Result<HiddenTrajectory> {
    if len == 0 {
        return Err(HimmError::TooShort { needed: 1, got: 0 });
    }
    let mut rng = rng_from(seed);
    let mut energy = Vec::with_capacity(len);
    let mut channel = Vec::with_capacity(len);

    let e = sample_index(params.pi_e.iter(), &mut rng);
    let c = sample_index(params.pi_c.row(e).iter(), &mut rng);
    energy.push(e);
    channel.push(c);
    for _ in 1..len {
        let e = sample_index(params.a.row(*energy.last().unwrap()).iter(), &mut rng);
        let c_prev = *channel.last().unwrap();
        let c = sample_index(params.b.slice(ndarray::s![e, c_prev, ..]).iter(), &mut rng);
        energy.push(e);
        channel.push(c);
    }
    Ok(HiddenTrajectory { energy, channel })
}

fn check_traj(traj: &HiddenTrajectory, shape: &ModelShape) -> Result<()> {
    if traj.energy.len() != traj.channel.len() {
        return Err(HimmError::dim("trajectory", traj.energy.len(), traj.channel.len()));
    }
    if let Some(t) = traj.energy.iter().position(|&e| e >= shape.levels) {
        return Err(HimmError::dim(format!("E[{t}]"), format!("< {}", shape.levels), traj.energy[t]));
    }
    if let Some(t) = traj.channel.iter().position(|&c| c > BUSY) {
        return Err(HimmError::dim(format!("C[{t}]"), "0 or 1", traj.channel[t]));
    }
    Ok(())
}

fn emit_u(d: &ndarray::Array2<f64>, e: usize, rng: &mut SimRng) -> usize {
    sample_index(d.row(e).iter(), rng)
}

/// Samples `U_t ~ D[E_t]` and `Y_t ~ N(mu[C_t][E_t], sigma2[C_t][E_t])`
/// independently per slot.
pub fn emit_parametric(params: &HimmParams, traj: &HiddenTrajectory, seed: u64) -> Result<ObservationSequence> {
    check_traj(traj, &params.shape)?;
    let mut rng = rng_from(seed);
    let mut u = Vec::with_capacity(traj.len());
    let mut y = Vec::with_capacity(traj.len());
    for (&e, &c) in traj.energy.iter().zip(&traj.channel) {
        u.push(emit_u(&params.d, e, &mut rng));
        let sd = params.sigma2[[c, e]].sqrt();
        let z: f64 = rand_distr::StandardNormal.sample(&mut rng);
        y.push(params.mu[[c, e]] + sd * z);
    }
    Ok(ObservationSequence { u, y })
}

/// Simulates the raw received samples of every slot and sums their squares.
///
/// Noise is `N(0, noise_var)`; on busy slots a Gaussian PU signal with
/// variance `power_of_level[E_t]`, scaled by the channel gain, is added.
pub fn emit_physical(
    phys: &PhysicalConfig,
    d: &ndarray::Array2<f64>,
    traj: &HiddenTrajectory,
    seed: u64,
) -> Result<ObservationSequence> {
    let levels = phys.power_of_level.len();
    if d.shape() != [levels, levels] {
        return Err(HimmError::dim("D", format!("{levels}x{levels}"), format!("{:?}", d.shape())));
    }
    if traj.energy.len() != traj.channel.len() {
        return Err(HimmError::dim("trajectory", traj.energy.len(), traj.channel.len()));
    }
    if let Some(t) = traj.energy.iter().position(|&e| e >= levels) {
        return Err(HimmError::dim(format!("E[{t}]"), format!("< {levels}"), traj.energy[t]));
    }
    let noise = Normal::new(0.0, phys.noise_var.sqrt()).map_err(|e| HimmError::Config(e.to_string()))?;
    let mut rng = rng_from(seed);
    let mut u = Vec::with_capacity(traj.len());
    let mut y = Vec::with_capacity(traj.len());
    for (&e, &c) in traj.energy.iter().zip(&traj.channel) {
        u.push(emit_u(d, e, &mut rng));
        let signal_sd = phys.power_of_level[e].sqrt();
        let mut energy = 0.0;
        for _ in 0..phys.N {
            let mut x = noise.sample(&mut rng);
            if c == BUSY {
                let s: f64 = rand_distr::StandardNormal.sample(&mut rng);
                x += phys.channel_gain * signal_sd * s;
            }
            energy += x * x;
        }
        y.push(energy);
    }
    Ok(ObservationSequence { u, y })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::two_level;
    use crate::model::{build_b_from_scheme, emission_moments_from_physical};
    use ndarray::{array, Array2};

    fn demo_physical(power: f64, gain: f64) -> (ModelShape, PhysicalConfig) {
        let shape = ModelShape::new(2, 0, 1).unwrap();
        let phys = PhysicalConfig {
            E_h: 1,
            P_0: 0.5,
            N: 100,
            noise_var: 1.0,
            channel_gain: gain,
            power_of_level: vec![0.0, power],
            data_persistence: None,
        };
        (shape, phys)
    }

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    #[test]
    fn absorbing_chain_stays_put() {
        let mut p = two_level();
        p.a = Array2::eye(2);
        p.pi_e = array![0.0, 1.0];
        let traj = generate_hidden(&p, 500, 3).unwrap();
        assert!(traj.energy.iter().all(|&e| e == 1));
    }

    #[test]
    fn always_idle_channel() {
        let mut p = two_level();
        for q in 0..2 {
            for i in 0..2 {
                p.b[[q, i, 0]] = 1.0;
                p.b[[q, i, 1]] = 0.0;
            }
        }
        p.pi_c = array![[1.0, 0.0], [1.0, 0.0]];
        let traj = generate_hidden(&p, 1000, 4).unwrap();
        assert!(traj.channel.iter().all(|&c| c == 0));
    }

    #[test]
    fn transition_frequencies_follow_a() {
        let mut p = two_level();
        p.shape = ModelShape::new(3, 0, 1).unwrap();
        p.pi_e = array![0.2, 0.3, 0.5];
        p.a = array![[0.6, 0.3, 0.1], [0.2, 0.5, 0.3], [0.25, 0.25, 0.5]];
        p.pi_c = array![[1.0, 0.0], [0.5, 0.5], [0.5, 0.5]];
        p.b = ndarray::Array3::from_shape_vec(
            (3, 2, 2),
            vec![1.0, 0.0, 1.0, 0.0, 0.3, 0.7, 0.6, 0.4, 0.5, 0.5, 0.1, 0.9],
        )
        .unwrap();
        let traj = generate_hidden(&p, 100_000, 8).unwrap();
        let mut counts = Array2::<f64>::zeros((3, 3));
        for w in traj.energy.windows(2) {
            counts[[w[0], w[1]]] += 1.0;
        }
        for i in 0..3 {
            let total = counts.row(i).sum();
            let l1: f64 = (0..3).map(|j| (counts[[i, j]] / total - p.a[[i, j]]).abs()).sum();
            assert!(l1 < 0.02, "row {i}: {l1}");
        }
        assert_eq!(traj.forbidden_pairs(&p.shape), 0);
    }

    #[test]
    fn reproducible() {
        let p = two_level();
        let a = generate_hidden(&p, 200, 9).unwrap();
        assert_eq!(a, generate_hidden(&p, 200, 9).unwrap());
        assert_eq!(emit_parametric(&p, &a, 1).unwrap(), emit_parametric(&p, &a, 1).unwrap());
    }

    #[test]
    fn identity_d_copies_energy() {
        let mut p = two_level();
        p.d = Array2::eye(2);
        let traj = generate_hidden(&p, 300, 2).unwrap();
        let obs = emit_parametric(&p, &traj, 5).unwrap();
        assert_eq!(obs.u, traj.energy);
    }

    #[test]
    fn tiny_variance_pins_y_to_mean() {
        let mut p = two_level();
        p.sigma2.fill(1e-12);
        let traj = generate_hidden(&p, 300, 2).unwrap();
        let obs = emit_parametric(&p, &traj, 5).unwrap();
        for t in 0..traj.len() {
            assert!((obs.y[t] - p.mu[[traj.channel[t], traj.energy[t]]]).abs() < 1e-3);
        }
    }

    #[test]
    fn parametric_moments_per_state() {
        let p = two_level();
        let traj = generate_hidden(&p, 100_000, 21).unwrap();
        let obs = emit_parametric(&p, &traj, 22).unwrap();
        for (c, e) in [(0, 0), (0, 1), (1, 1)] {
            let ys: Vec<f64> =
                (0..traj.len()).filter(|&t| traj.channel[t] == c && traj.energy[t] == e).map(|t| obs.y[t]).collect();
            let (m, v) = mean_var(&ys);
            let se = (p.sigma2[[c, e]] / ys.len() as f64).sqrt();
            assert!((m - p.mu[[c, e]]).abs() < 3.0 * se, "({c},{e}) mean {m}");
            assert!((v / p.sigma2[[c, e]] - 1.0).abs() < 0.05, "({c},{e}) var {v}");
        }
    }

    fn constant_traj(channel: usize, len: usize) -> HiddenTrajectory {
        HiddenTrajectory { energy: vec![1; len], channel: vec![channel; len] }
    }

    #[test]
    fn idle_slot_energy_mean() {
        let (_, phys) = demo_physical(1.0, 1.0);
        let obs = emit_physical(&phys, &Array2::eye(2), &constant_traj(0, 100_000), 3).unwrap();
        let (m, v) = mean_var(&obs.y);
        let se = (v / obs.len() as f64).sqrt();
        assert!((m - 100.0).abs() < 3.0 * se, "{m}");
        assert!(obs.y.iter().all(|&y| y >= 0.0));
    }

    #[test]
    fn physical_matches_parametric_moments() {
        let (shape, phys) = demo_physical(1.0, 1.0);
        let (mu, s2) = emission_moments_from_physical(&phys, &shape);
        let obs = emit_physical(&phys, &Array2::eye(2), &constant_traj(1, 100_000), 4).unwrap();
        let (m, v) = mean_var(&obs.y);
        let se_mean = (v / obs.len() as f64).sqrt();
        assert!((m - mu[[1, 1]]).abs() < 3.0 * se_mean, "mean {m} vs {}", mu[[1, 1]]);
        assert_eq!(mu[[1, 1]], 200.0);
        assert_eq!(s2[[1, 1]], 800.0);
        // sample variance of a chi-square sum: relative standard error ~ sqrt(2/n + kurtosis term)
        assert!((v / s2[[1, 1]] - 1.0).abs() < 0.03, "var {v}");
    }

    #[test]
    fn zero_gain_removes_the_signal() {
        let (_, phys) = demo_physical(5.0, 0.0);
        let idle = emit_physical(&phys, &Array2::eye(2), &constant_traj(0, 50_000), 7).unwrap();
        let busy = emit_physical(&phys, &Array2::eye(2), &constant_traj(1, 50_000), 8).unwrap();
        let (m0, v0) = mean_var(&idle.y);
        let (m1, v1) = mean_var(&busy.y);
        let se = ((v0 + v1) / 50_000.0).sqrt();
        assert!((m0 - m1).abs() < 4.0 * se);
        assert!((v0 / v1 - 1.0).abs() < 0.05);
    }

    #[test]
    fn scheme_generated_trajectories_respect_structural_zero() {
        let shape = ModelShape::new(4, 1, 1).unwrap();
        let phys = PhysicalConfig {
            E_h: 2,
            P_0: 0.2,
            N: 10,
            noise_var: 1.0,
            channel_gain: 1.0,
            power_of_level: vec![0.0, 1.0, 2.0, 3.0],
            data_persistence: None,
        };
        let (b, pi_c) = build_b_from_scheme(&shape, &phys).unwrap();
        let mut p = crate::model::random_params(&shape, 1, &Default::default());
        p.b = b;
        p.pi_c = pi_c;
        for seed in 0..20 {
            let traj = generate_hidden(&p, 2000, seed).unwrap();
            assert_eq!(traj.forbidden_pairs(&shape), 0);
        }
    }
}
