//! Empirical ROC curves and matched false-alarm comparisons.

use crate::error::{HimmError, Result};
use crate::model::BUSY;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub p_fa: f64,
    pub p_d: f64,
}

/// Operating points of a "busy iff score >= threshold" detector, sorted by
/// threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub slots_evaluated: usize,
}

/// Empirical false-alarm and detection rates for each threshold.
pub fn roc_points(scores: &[f64], truth: &[usize], thresholds: &[f64]) -> Result<RocCurve> {
    if scores.len() != truth.len() {
        return Err(HimmError::dim("truth", scores.len(), truth.len()));
    }
    let mut idle: Vec<f64> = Vec::new();
    let mut busy: Vec<f64> = Vec::new();
    for (&s, &c) in scores.iter().zip(truth) {
        if c == BUSY {
            busy.push(s);
        } else {
            idle.push(s);
        }
    }
    if idle.is_empty() || busy.is_empty() {
        return Err(HimmError::Config("ROC needs both idle and busy slots in the ground truth".into()));
    }
    idle.sort_by(f64::total_cmp);
    busy.sort_by(f64::total_cmp);
    let rate = |sorted: &[f64], tau: f64| {
        let below = sorted.partition_point(|&s| s < tau);
        (sorted.len() - below) as f64 / sorted.len() as f64
    };

    let mut taus = thresholds.to_vec();
    taus.sort_by(f64::total_cmp);
    let points = taus
        .into_iter()
        .map(|tau| RocPoint { threshold: tau, p_fa: rate(&idle, tau), p_d: rate(&busy, tau) })
        .collect();
    Ok(RocCurve { points, slots_evaluated: scores.len() })
}

/// Every distinct score plus one threshold above all of them, which gives
/// the complete empirical ROC staircase.
pub fn threshold_grid(scores: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = scores.iter().copied().filter(|s| !s.is_nan()).collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    if let Some(&max) = v.last() {
        let above = if max.is_finite() { max + max.abs().max(1.0) } else { f64::INFINITY };
        v.push(above);
    }
    v
}

impl RocCurve {
    /// Detection probability at false-alarm rate `target`, linearly
    /// interpolated between neighbouring operating points. `None` when the
    /// target lies outside the curve's false-alarm range.
    pub fn p_d_at(&self, target: f64) -> Option<f64> {
        let mut pts: Vec<(f64, f64)> = self.points.iter().map(|p| (p.p_fa, p.p_d)).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let (first, last) = (pts.first()?.0, pts.last()?.0);
        if target < first || target > last {
            return None;
        }
        // best detection among points sharing exactly this false-alarm rate
        let exact = pts.iter().filter(|p| p.0 == target).map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        if exact.is_finite() {
            return Some(exact);
        }
        let hi = pts.partition_point(|p| p.0 < target);
        let (x0, y0) = pts[hi - 1];
        let (x1, y1) = pts[hi];
        Some(y0 + (y1 - y0) * (target - x0) / (x1 - x0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchedPoint {
    pub p_fa: f64,
    pub p_d_first: Option<f64>,
    pub p_d_second: Option<f64>,
}

impl MatchedPoint {
    /// `p_d_first - p_d_second` when both are available.
    pub fn gap(&self) -> Option<f64> {
        Some(self.p_d_first? - self.p_d_second?)
    }
}

pub fn compare_at_matched_pfa(first: &RocCurve, second: &RocCurve, targets: &[f64]) -> Result<Vec<MatchedPoint>> {
    if first.points.is_empty() || second.points.is_empty() {
        return Err(HimmError::Config("cannot compare empty ROC curves".into()));
    }
    Ok(targets
        .iter()
        .map(|&p_fa| MatchedPoint { p_fa, p_d_first: first.p_d_at(p_fa), p_d_second: second.p_d_at(p_fa) })
        .collect())
}

/// Busy iff `Y_t >= threshold`, slot by slot.
pub fn memoryless_energy_detector(y: &[f64], threshold: f64) -> Vec<bool> {
    y.iter().map(|&v| v >= threshold).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn counting_oracle(scores: &[f64], truth: &[usize], tau: f64) -> (f64, f64) {
        let (mut fa, mut idle, mut det, mut busy) = (0, 0, 0, 0);
        for (&s, &c) in scores.iter().zip(truth) {
            if c == 1 {
                busy += 1;
                det += (s >= tau) as usize;
            } else {
                idle += 1;
                fa += (s >= tau) as usize;
            }
        }
        (fa as f64 / idle as f64, det as f64 / busy as f64)
    }

    #[test]
    fn perfect_detector() {
        let truth = [0, 1, 1, 0, 1];
        let scores: Vec<f64> = truth.iter().map(|&c| c as f64).collect();
        let roc = roc_points(&scores, &truth, &[0.25, 0.5, 0.75]).unwrap();
        for p in roc.points {
            assert_eq!((p.p_fa, p.p_d), (0.0, 1.0));
        }
    }

    #[test]
    fn uninformative_detector_on_diagonal() {
        let truth = [0, 1, 1, 0, 1, 0];
        let roc = roc_points(&[0.5; 6], &truth, &[0.0, 0.3, 0.5, 0.7, 1.0]).unwrap();
        for p in roc.points {
            assert_eq!(p.p_fa, p.p_d);
        }
    }

    #[test]
    fn single_class_rejected() {
        assert!(roc_points(&[0.1, 0.2], &[0, 0], &[0.5]).is_err());
    }

    #[test]
    fn interpolation_hits_exact_points_and_reports_unavailable() {
        let curve = RocCurve {
            points: vec![
                RocPoint { threshold: 0.1, p_fa: 0.4, p_d: 0.9 },
                RocPoint { threshold: 0.5, p_fa: 0.2, p_d: 0.7 },
                RocPoint { threshold: 0.9, p_fa: 0.1, p_d: 0.3 },
            ],
            slots_evaluated: 10,
        };
        assert_eq!(curve.p_d_at(0.2), Some(0.7));
        assert!((curve.p_d_at(0.15).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(curve.p_d_at(0.05), None);
        let rows = compare_at_matched_pfa(&curve, &curve, &[0.1, 0.3]).unwrap();
        assert!(rows.iter().all(|r| r.gap() == Some(0.0)));
    }

    #[test]
    fn energy_detector_extremes() {
        let y = [1.0, -3.0, 1e9];
        assert!(memoryless_energy_detector(&y, f64::NEG_INFINITY).iter().all(|&b| b));
        assert!(memoryless_energy_detector(&y, f64::INFINITY).iter().all(|&b| !b));
    }

    proptest! {
        #[test]
        fn rates_match_counting(
            data in proptest::collection::vec((0.0f64..1.0, 0usize..2), 2..200),
            taus in proptest::collection::vec(0.0f64..1.0, 1..20),
        ) {
            let mut data = data;
            data[0].1 = 0;
            data[1].1 = 1;
            let (scores, truth): (Vec<f64>, Vec<usize>) = data.into_iter().unzip();
            let roc = roc_points(&scores, &truth, &taus).unwrap();
            let mut prev_fa = f64::INFINITY;
            for p in &roc.points {
                let (fa, pd) = counting_oracle(&scores, &truth, p.threshold);
                prop_assert_eq!(p.p_fa, fa);
                prop_assert_eq!(p.p_d, pd);
                prop_assert!(p.p_fa <= prev_fa);
                prev_fa = p.p_fa;
            }
        }

        #[test]
        fn invariant_under_increasing_transform(
            data in proptest::collection::vec((0.0f64..1.0, 0usize..2), 2..100),
            taus in proptest::collection::vec(0.0f64..1.0, 1..10),
        ) {
            let mut data = data;
            data[0].1 = 0;
            data[1].1 = 1;
            let (scores, truth): (Vec<f64>, Vec<usize>) = data.into_iter().unzip();
            let f = |x: f64| (3.0 * x).exp() - 2.0;
            let a = roc_points(&scores, &truth, &taus).unwrap();
            let ts: Vec<f64> = scores.iter().map(|&s| f(s)).collect();
            let tt: Vec<f64> = taus.iter().map(|&t| f(t)).collect();
            let b = roc_points(&ts, &truth, &tt).unwrap();
            for (p, q) in a.points.iter().zip(&b.points) {
                prop_assert_eq!((p.p_fa, p.p_d), (q.p_fa, q.p_d));
            }
        }

        #[test]
        fn swapping_curves_negates_gap(
            a in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 2..15),
            b in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 2..15),
            targets in proptest::collection::vec(0.0f64..1.0, 1..6),
        ) {
            let mk = |v: Vec<(f64, f64)>| RocCurve {
                points: v.into_iter().enumerate().map(|(i, (f, d))| RocPoint { threshold: i as f64, p_fa: f, p_d: d }).collect(),
                slots_evaluated: 0,
            };
            let (ca, cb) = (mk(a), mk(b));
            let ab = compare_at_matched_pfa(&ca, &cb, &targets).unwrap();
            let ba = compare_at_matched_pfa(&cb, &ca, &targets).unwrap();
            for (x, y) in ab.iter().zip(&ba) {
                match (x.gap(), y.gap()) {
                    (Some(g), Some(h)) => prop_assert_eq!(g, -h),
                    (None, None) => {}
                    _ => prop_assert!(false, "availability differs"),
                }
            }
        }
    }
}
