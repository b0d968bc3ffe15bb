use rayon::prelude::*;

use crate::dataset::{enumerate_pairs, RoomRecording};
use crate::error::{Error, Result};
use crate::estimator::{PairInput, TdoaEstimator};

use super::ReportRow;

/// Headline metric threshold.
pub const INLIER_THRESHOLD_M: f64 = 0.1;

/// Estimate and truth for one pair. A failed estimate is stored as NaN and
/// counts as an outlier at every threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairOutcome {
    pub estimate_s: f64,
    pub truth_s: f64,
}

impl PairOutcome {
    pub fn residual_m(&self, speed: f64) -> f64 {
        (self.estimate_s - self.truth_s).abs() * speed
    }
}

/// Fraction of pairs with `|est - truth| * speed <= threshold_m`.
pub fn inlier_ratio(estimates: &[f64], truths: &[f64], threshold_m: f64, speed: f64) -> Result<f64> {
    check_lists(estimates, truths)?;
    if threshold_m.is_nan() || threshold_m < 0.0 {
        return Err(Error::invalid(format!(
            "threshold must be non-negative, got {threshold_m}"
        )));
    }
    let hits = estimates
        .iter()
        .zip(truths)
        .filter(|(e, t)| (*e - *t).abs() * speed <= threshold_m)
        .count();
    Ok(hits as f64 / estimates.len() as f64)
}

fn check_lists(estimates: &[f64], truths: &[f64]) -> Result<()> {
    if estimates.is_empty() {
        return Err(Error::invalid("no estimates to score"));
    }
    if estimates.len() != truths.len() {
        return Err(Error::invalid(format!(
            "{} estimates but {} truths",
            estimates.len(),
            truths.len()
        )));
    }
    Ok(())
}

/// Thresholds 0, 0.02, ..., 0.5 m.
pub fn threshold_grid() -> Vec<f64> {
    (0..=25).map(|i| i as f64 * 0.02).collect()
}

/// Inlier ratio at every threshold of [`threshold_grid`].
pub fn threshold_curve(estimates: &[f64], truths: &[f64], speed: f64, condition: &str) -> Result<Vec<ReportRow>> {
    check_lists(estimates, truths)?;
    threshold_grid()
        .into_iter()
        .map(|t| {
            Ok(ReportRow {
                condition: condition.to_string(),
                value: t,
                inlier_ratio: inlier_ratio(estimates, truths, t, speed)?,
                n_pairs: estimates.len(),
            })
        })
        .collect()
}

/// Counts of residuals (m) in bins `[k w, (k+1) w)` up to `max_m`; the last
/// bin also holds everything beyond, including failed estimates.
pub fn residual_histogram(
    outcomes: &[PairOutcome],
    speed: f64,
    bin_width_m: f64,
    max_m: f64,
) -> Result<Vec<(f64, usize)>> {
    if !(bin_width_m > 0.0 && max_m > bin_width_m) {
        return Err(Error::invalid("histogram needs 0 < bin width < max"));
    }
    let bins = (max_m / bin_width_m).ceil() as usize;
    let mut counts = vec![0usize; bins];
    for o in outcomes {
        let r = o.residual_m(speed);
        let k = if r.is_finite() {
            ((r / bin_width_m).floor() as usize).min(bins - 1)
        } else {
            bins - 1
        };
        counts[k] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(k, c)| (k as f64 * bin_width_m, c))
        .collect())
}

/// Runs the estimator on all in-range pairs of a recording. Ground truth and
/// microphone spacing are passed along as side information.
pub fn evaluate_recording(estimator: &dyn TdoaEstimator, rec: &RoomRecording, num_classes: usize) -> Vec<PairOutcome> {
    let speed = rec.spec.room.speed_of_sound;
    let pairs: Vec<_> = enumerate_pairs(rec, num_classes)
        .into_iter()
        .filter(|p| p.class_id.is_some())
        .collect();
    pairs
        .par_iter()
        .map(|p| {
            let mut input = PairInput::new(&rec.clips[p.i], &rec.clips[p.j]);
            input.truth_s = Some(p.tdoa_s);
            input.mic_distance_m = Some(rec.spec.mics[p.i].position.distance(rec.spec.mics[p.j].position));
            input.speed_of_sound = speed;
            PairOutcome {
                estimate_s: estimator.estimate(&input).map(|e| e.tdoa_s).unwrap_or(f64::NAN),
                truth_s: p.tdoa_s,
            }
        })
        .collect()
}

/// Splits outcomes into parallel estimate and truth lists.
pub fn evaluate_pairs(outcomes: &[PairOutcome]) -> (Vec<f64>, Vec<f64>) {
    outcomes.iter().map(|o| (o.estimate_s, o.truth_s)).unzip()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_zero_residuals() {
        let t = [0.001, -0.002, 0.0];
        assert_eq!(inlier_ratio(&t, &t, 0.1, 343.0).unwrap(), 1.0);
    }

    #[test]
    fn residual_example() {
        let speed = 343.0;
        let truths = [0.0; 3];
        let est: Vec<f64> = [0.05, 0.15, 0.09].iter().map(|m| m / speed).collect();
        let r = inlier_ratio(&est, &truths, 0.1, speed).unwrap();
        assert!((r - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn ten_cm_is_4_66_samples() {
        let samples: f64 = 0.1 / 343.0 * 16_000.0;
        assert!((samples - 4.66).abs() < 0.005);
        let truths = [0.0, 0.0];
        let est = [4.0 / 16_000.0, 5.0 / 16_000.0];
        assert_eq!(inlier_ratio(&est, &truths, 0.1, 343.0).unwrap(), 0.5);
    }

    #[test]
    fn failures_are_outliers() {
        assert_eq!(inlier_ratio(&[f64::NAN, 0.0], &[0.0, 0.0], 0.5, 343.0).unwrap(), 0.5);
    }

    #[test]
    fn errors() {
        assert!(inlier_ratio(&[], &[], 0.1, 343.0).is_err());
        assert!(inlier_ratio(&[0.0], &[0.0, 1.0], 0.1, 343.0).is_err());
    }

    #[test]
    fn grid_shape() {
        let g = threshold_grid();
        assert_eq!(g.len(), 26);
        assert_eq!(g[0], 0.0);
        assert!((g[25] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn curve_at_zero_counts_exact_matches_only() {
        let rows = threshold_curve(&[0.0, 1e-4], &[0.0, 0.0], 343.0, "x").unwrap();
        assert_eq!(rows[0].inlier_ratio, 0.5);
        let rows = threshold_curve(&[1e-5, 1e-4], &[0.0, 0.0], 343.0, "x").unwrap();
        assert_eq!(rows[0].inlier_ratio, 0.0);
    }

    #[test]
    fn histogram_counts_everything() {
        let o = [
            PairOutcome {
                estimate_s: 0.0,
                truth_s: 0.0,
            },
            PairOutcome {
                estimate_s: 0.05 / 343.0,
                truth_s: 0.0,
            },
            PairOutcome {
                estimate_s: f64::NAN,
                truth_s: 0.0,
            },
            PairOutcome {
                estimate_s: 1.0,
                truth_s: 0.0,
            },
        ];
        let h = residual_histogram(&o, 343.0, 0.02, 1.0).unwrap();
        assert_eq!(h.len(), 50);
        assert_eq!(h.iter().map(|b| b.1).sum::<usize>(), 4);
        assert_eq!(h[0].1, 1);
        assert_eq!(h[2].1, 1);
        assert_eq!(h[49].1, 2);
    }

    proptest::proptest! {
        #[test]
        fn curve_is_monotone(res in proptest::collection::vec(-0.003f64..0.003, 1..200)) {
            let truths = vec![0.0; res.len()];
            let rows = threshold_curve(&res, &truths, 343.0, "c").unwrap();
            for w in rows.windows(2) {
                proptest::prop_assert!(w[1].inlier_ratio >= w[0].inlier_ratio);
            }
        }
    }
}
