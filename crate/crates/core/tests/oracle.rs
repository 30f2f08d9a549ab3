#![allow(clippy::needless_range_loop)]

mod common;

use common::{energy_smoothing_oracle, filter_oracle, random_instance, smoothing_oracle, Streams};
use himm::em::{compute_stats, log_likelihood, m_step, WeightingMode};
use himm::eval::mi_gain_mc;
use himm::filter::{filter_sequence, SensingMode};
use himm::model::{random_params, RandomParamsConfig};
use himm::simgen::ObservationSequence;
use himm::{HimmParams, ModelShape};
use ndarray::{array, Array2, Array3};
use proptest::prelude::*;

fn assert_grids_match(p: &HimmParams, obs: &ObservationSequence, mode: SensingMode, streams: Streams) {
    let got = filter_sequence(p, obs, mode).unwrap();
    let (want, evidence) = filter_oracle(p, streams, obs);
    for (t, (g, w)) in got.iter().zip(&want).enumerate() {
        for c in 0..2 {
            for e in 0..p.shape.levels {
                let diff = (g.p[[c, e]] - w[c][e]).abs();
                assert!(diff < 1e-10, "t={t} cell ({c},{e}): {} vs {}", g.p[[c, e]], w[c][e]);
            }
        }
    }
    let log_ev: f64 = got.iter().map(|g| g.log_evidence_increment).sum();
    assert!((log_ev.exp() - evidence).abs() <= 1e-8 * evidence.max(1e-300), "{} vs {}", log_ev.exp(), evidence);
}

#[test]
fn filter_matches_path_enumeration() {
    for seed in 0..150 {
        let (p, obs) = random_instance(seed, 3, 6);
        assert_grids_match(&p, &obs, SensingMode::Joint, Streams::UY);
        assert_grids_match(&p, &obs, SensingMode::ChannelOnly, Streams::Y);
    }
}

#[test]
fn stats_match_unscaled_definitions() {
    for seed in 0..60 {
        let (p, obs) = random_instance(seed, 2, 4);
        if obs.len() < 2 {
            continue;
        }
        let st = compute_stats(&p, &obs).unwrap();
        for (streams, gamma, eps, ll) in [
            (Streams::Y, &st.gamma_y, &st.eps_y, st.loglik_y),
            (Streams::UY, &st.gamma_uy, &st.eps_uy, st.log_likelihood),
        ] {
            let (g, e, total) = smoothing_oracle(&p, streams, &obs);
            assert!((ll - total.ln()).abs() < 1e-12 * total.ln().abs().max(1.0));
            for t in 0..obs.len() {
                for s in 0..g[t].len() {
                    assert!((gamma[[t, s]] - g[t][s]).abs() < 1e-12, "{streams:?} gamma t={t} s={s}");
                }
            }
            for t in 0..obs.len() - 1 {
                for a in 0..e[t].len() {
                    for b in 0..e[t].len() {
                        assert!((eps[[t, a, b]] - e[t][a][b]).abs() < 1e-12, "{streams:?} eps");
                    }
                }
            }
        }
        let (g, e, total) = energy_smoothing_oracle(&p, &obs);
        assert!((st.loglik_u - total.ln()).abs() < 1e-12 * total.ln().abs().max(1.0));
        for t in 0..obs.len() {
            for i in 0..p.shape.levels {
                assert!((st.gamma_u[[t, i]] - g[t][i]).abs() < 1e-12);
                if t + 1 < obs.len() {
                    for j in 0..p.shape.levels {
                        assert!((st.eps_u[[t, i, j]] - e[t][i][j]).abs() < 1e-12);
                    }
                }
            }
        }
    }
}

#[test]
fn stats_likelihood_equals_filter_evidence() {
    for seed in 0..40 {
        let (p, _) = random_instance(seed, 3, 2);
        let traj = himm::simgen::generate_hidden(&p, 300, seed + 5).unwrap();
        let obs = himm::simgen::emit_parametric(&p, &traj, seed + 6).unwrap();
        let st = compute_stats(&p, &obs).unwrap();
        let ll = log_likelihood(&p, &obs).unwrap();
        assert!((st.log_likelihood - ll).abs() < 1e-10 * ll.abs().max(1.0), "{} vs {ll}", st.log_likelihood);
    }
}

/// Expected complete-data log-likelihood of one stochastic row, maximized by
/// brute force over a grid on the 2-simplex.
fn grid_argmax(counts: [f64; 2]) -> f64 {
    let mut best = (f64::NEG_INFINITY, 0.0);
    for k in 0..=1000 {
        let x = k as f64 / 1000.0;
        let q = counts[0] * x.ln() + counts[1] * (1.0 - x).ln();
        let q = if q.is_nan() { f64::NEG_INFINITY } else { q };
        if q > best.0 {
            best = (q, x);
        }
    }
    best.1
}

#[test]
fn m_step_rows_maximize_expected_log_likelihood() {
    let shape = ModelShape::new(2, 0, 0).unwrap();
    for seed in 0..20 {
        let p = random_params(&shape, seed, &RandomParamsConfig { mu_range: (0.0, 2.0), sigma2_range: (0.3, 1.0) });
        let traj = himm::simgen::generate_hidden(&p, 3, seed + 100).unwrap();
        let obs = himm::simgen::emit_parametric(&p, &traj, seed + 200).unwrap();
        let st = compute_stats(&p, &obs).unwrap();
        let (q, _) = m_step(&st, &obs, &p, WeightingMode::Joint).unwrap();
        let gu = st.gamma_uy_grid();
        let eu = st.eps_uy_grid();
        for e in 0..2 {
            let mut d = [0.0; 2];
            for t in 0..3 {
                d[obs.u[t]] += gu[[t, 0, e]] + gu[[t, 1, e]];
            }
            assert!((q.d[[e, 0]] - grid_argmax(d)).abs() <= 2e-3);
            let mut a = [0.0; 2];
            for t in 0..2 {
                for m in 0..2 {
                    for c in 0..2 {
                        for j in 0..2 {
                            a[j] += eu[[t, m, e, c, j]];
                        }
                    }
                }
            }
            assert!((q.a[[e, 0]] - grid_argmax(a)).abs() <= 2e-3);
            for i in 0..2 {
                let mut b = [0.0; 2];
                for t in 0..2 {
                    for k in 0..2 {
                        for j in 0..2 {
                            b[j] += eu[[t, i, k, j, e]];
                        }
                    }
                }
                assert!((q.b[[e, i, 0]] - grid_argmax(b)).abs() <= 2e-3);
            }
        }
    }
}

#[test]
fn posteriors_invariant_to_rescaling_y() {
    for seed in 0..30 {
        let (p, obs) = random_instance(seed, 3, 6);
        let k = 7.5;
        let mut q = p.clone();
        q.mu.mapv_inplace(|m| m * k);
        q.sigma2.mapv_inplace(|v| v * k * k);
        let scaled = ObservationSequence { u: obs.u.clone(), y: obs.y.iter().map(|y| y * k).collect() };
        let a = filter_sequence(&p, &obs, SensingMode::Joint).unwrap();
        let b = filter_sequence(&q, &scaled, SensingMode::Joint).unwrap();
        for (g, h) in a.iter().zip(&b) {
            for (x, y) in g.p.iter().zip(h.p.iter()) {
                assert!((x - y).abs() < 1e-12);
            }
            assert!((g.log_evidence_increment - h.log_evidence_increment - k.ln()).abs() < 1e-10);
        }
    }
}

/// Relabels levels `i <-> j` (both sufficient) throughout a parameter set.
fn swap_levels(p: &HimmParams, i: usize, j: usize) -> HimmParams {
    let l = p.shape.levels;
    let perm = |x: usize| {
        if x == i {
            j
        } else if x == j {
            i
        } else {
            x
        }
    };
    let mut q = p.clone();
    for a in 0..l {
        q.pi_e[perm(a)] = p.pi_e[a];
        for c in 0..2 {
            q.pi_c[[perm(a), c]] = p.pi_c[[a, c]];
            q.mu[[c, perm(a)]] = p.mu[[c, a]];
            q.sigma2[[c, perm(a)]] = p.sigma2[[c, a]];
            for m in 0..2 {
                q.b[[perm(a), m, c]] = p.b[[a, m, c]];
            }
        }
        for b in 0..l {
            q.a[[perm(a), perm(b)]] = p.a[[a, b]];
            q.d[[perm(a), perm(b)]] = p.d[[a, b]];
        }
    }
    q
}

#[test]
fn permuting_sufficient_levels_permutes_posteriors() {
    let shape = ModelShape::new(3, 0, 1).unwrap();
    for seed in 0..20 {
        let p = random_params(&shape, seed, &RandomParamsConfig::default());
        let q = swap_levels(&p, 1, 2);
        q.validate().unwrap();
        let traj = himm::simgen::generate_hidden(&p, 50, seed).unwrap();
        let obs = himm::simgen::emit_parametric(&p, &traj, seed).unwrap();
        let swapped = ObservationSequence { u: obs.u.iter().map(|&u| [0, 2, 1][u]).collect(), y: obs.y.clone() };
        let a = filter_sequence(&p, &obs, SensingMode::Joint).unwrap();
        let b = filter_sequence(&q, &swapped, SensingMode::Joint).unwrap();
        for (g, h) in a.iter().zip(&b) {
            for c in 0..2 {
                for e in 0..3 {
                    assert!((g.p[[c, e]] - h.p[[c, [0, 2, 1][e]]]).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn uniform_d_makes_both_filters_agree() {
    for seed in 0..30 {
        let (mut p, obs) = random_instance(seed, 3, 6);
        let l = p.shape.levels;
        p.d = Array2::from_elem((l, l), 1.0 / l as f64);
        let a = filter_sequence(&p, &obs, SensingMode::Joint).unwrap();
        let b = filter_sequence(&p, &obs, SensingMode::ChannelOnly).unwrap();
        for (g, h) in a.iter().zip(&b) {
            for (x, y) in g.p.iter().zip(h.p.iter()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }
}

fn exact_mi_u_only(p: &HimmParams) -> f64 {
    // I(C_2, E_2; U_1, U_2) by enumeration over the finite joint law.
    let l = p.shape.levels;
    let mut joint = vec![vec![0.0; 2 * l]; l * l];
    for path in common::all_paths(l, 2) {
        let (c1, e1) = path[0];
        let (c2, e2) = path[1];
        let w = p.pi_e[e1] * p.pi_c[[e1, c1]] * p.a[[e1, e2]] * p.b[[e2, c1, c2]];
        for u1 in 0..l {
            for u2 in 0..l {
                joint[u1 * l + u2][c2 * l + e2] += w * p.d[[e1, u1]] * p.d[[e2, u2]];
            }
        }
    }
    let px: Vec<f64> = (0..2 * l).map(|x| joint.iter().map(|r| r[x]).sum()).collect();
    let mut mi = 0.0;
    for row in &joint {
        let pu: f64 = row.iter().sum();
        for (x, &pj) in row.iter().enumerate() {
            if pj > 0.0 {
                mi += pj * (pj / (pu * px[x])).ln();
            }
        }
    }
    mi
}

#[test]
fn mi_matches_exact_enumeration_without_y_information() {
    let p = HimmParams {
        shape: ModelShape::new(2, 0, 1).unwrap(),
        pi_e: array![0.5, 0.5],
        pi_c: array![[1.0, 0.0], [0.4, 0.6]],
        a: array![[0.7, 0.3], [0.2, 0.8]],
        b: Array3::from_shape_vec((2, 2, 2), vec![1.0, 0.0, 1.0, 0.0, 0.5, 0.5, 0.3, 0.7]).unwrap(),
        d: array![[0.9, 0.1], [0.2, 0.8]],
        mu: Array2::from_elem((2, 2), 1.0),
        sigma2: Array2::from_elem((2, 2), 1.0),
    };
    p.validate().unwrap();
    let exact = exact_mi_u_only(&p);
    let mc = mi_gain_mc(&p, 2, 10_000, 11).unwrap();
    assert!(exact > 0.0);
    assert!((mc.estimate - exact).abs() <= 3.0 * mc.standard_error, "{mc:?} vs {exact}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn grids_are_normalized(seed in 0u64..100_000) {
        let (p, obs) = random_instance(seed, 3, 6);
        for mode in [SensingMode::Joint, SensingMode::ChannelOnly] {
            for g in filter_sequence(&p, &obs, mode).unwrap() {
                prop_assert!((g.p.sum() - 1.0).abs() < 1e-12);
                prop_assert!(g.p.iter().all(|&v| v >= 0.0));
            }
        }
    }

    #[test]
    fn mi_estimate_not_significantly_negative(seed in 0u64..1000) {
        let (p, _) = random_instance(seed, 3, 2);
        let mi = mi_gain_mc(&p, 4, 200, seed).unwrap();
        prop_assert!(mi.estimate >= -3.0 * mi.standard_error);
    }
}
