//! Generalised cross-correlation with PHAT or plain weighting.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dsp::{fft_plan, real_pair_spectra, AudioClip};
use crate::error::{Error, Result};
use crate::estimator::{PairInput, TdoaEstimate, TdoaEstimator};

/// Relative floor on the cross-spectrum magnitude under PHAT weighting.
const PHAT_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    Phat,
    Plain,
}

/// Circular cross-correlation indexed by signed lag in `[-N/2, N/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationCurve {
    /// `values[m]` is the correlation at circular lag `m`.
    circular: Vec<f64>,
    pub sample_rate_hz: u32,
}

impl CorrelationCurve {
    pub fn len(&self) -> usize {
        self.circular.len()
    }

    pub fn is_empty(&self) -> bool {
        self.circular.is_empty()
    }

    pub fn min_lag(&self) -> i64 {
        -((self.len() / 2) as i64)
    }

    pub fn max_lag(&self) -> i64 {
        ((self.len() - 1) / 2) as i64
    }

    /// Correlation at signed `lag`.
    pub fn at(&self, lag: i64) -> f64 {
        let n = self.len() as i64;
        self.circular[lag.rem_euclid(n) as usize]
    }

    /// `(lag, value)` pairs in increasing lag order.
    pub fn signed(&self) -> Vec<(i64, f64)> {
        (self.min_lag()..=self.max_lag()).map(|l| (l, self.at(l))).collect()
    }
}

fn check_pair(x_i: &AudioClip, x_j: &AudioClip) -> Result<()> {
    if x_i.len() != x_j.len() {
        return Err(Error::invalid(format!(
            "clip lengths differ: {} vs {}",
            x_i.len(),
            x_j.len()
        )));
    }
    if x_i.sample_rate_hz != x_j.sample_rate_hz {
        return Err(Error::invalid(format!(
            "sample rates differ: {} vs {}",
            x_i.sample_rate_hz, x_j.sample_rate_hz
        )));
    }
    x_i.require_non_empty("gcc")
}

/// `curve(l) = IDFT[W(f) X_i(f) conj(X_j(f))](l)`, which for plain
/// weighting equals `sum_t x_i(t) x_j(t - l)` (circularly).
pub fn gcc_curve(x_i: &AudioClip, x_j: &AudioClip, weighting: Weighting) -> Result<CorrelationCurve> {
    check_pair(x_i, x_j)?;
    let n = x_i.len();
    let (si, sj) = real_pair_spectra(&x_i.samples, &x_j.samples);
    let mut cross: Vec<Complex64> = si.iter().zip(&sj).map(|(a, b)| a * b.conj()).collect();
    if weighting == Weighting::Phat {
        let peak = cross.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if peak > 0.0 {
            let floor = PHAT_GUARD * peak;
            for c in &mut cross {
                *c /= c.norm().max(floor);
            }
        }
    }
    fft_plan(n).inverse(&mut cross);
    Ok(CorrelationCurve {
        circular: cross.into_iter().map(|c| c.re).collect(),
        sample_rate_hz: x_i.sample_rate_hz,
    })
}

/// Integer-lag argmax of the curve within `|lag| <= max_lag`. Ties go to the
/// smaller `|lag|`, then to the positive side.
pub fn peak_of(curve: &CorrelationCurve, max_lag: usize) -> TdoaEstimate {
    let max_lag = max_lag as i64;
    let mut best = (0i64, curve.at(0));
    let mut abs_sum = curve.at(0).abs();
    for l in 1..=max_lag {
        for lag in [l, -l] {
            let v = curve.at(lag);
            abs_sum += v.abs();
            if v > best.1 {
                best = (lag, v);
            }
        }
    }
    let confidence = if abs_sum > 0.0 {
        (best.1.max(0.0) / abs_sum).clamp(0.0, 1.0)
    } else {
        0.0
    };
    TdoaEstimate::from_lag(best.0, curve.sample_rate_hz, best.1, confidence)
}

/// GCC estimate restricted to `|lag| <= max_lag`, `0 < max_lag < N/2`.
pub fn gcc_phat_estimate(
    x_i: &AudioClip,
    x_j: &AudioClip,
    max_lag: usize,
    weighting: Weighting,
) -> Result<TdoaEstimate> {
    check_pair(x_i, x_j)?;
    let n = x_i.len();
    if max_lag == 0 || 2 * max_lag >= n {
        return Err(Error::invalid(format!(
            "max lag {max_lag} must satisfy 0 < max_lag < N/2 = {}",
            n as f64 / 2.0
        )));
    }
    Ok(peak_of(&gcc_curve(x_i, x_j, weighting)?, max_lag))
}

/// How an estimator bounds the lag search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LagBound {
    /// `ceil(distance * fs / c) + 2` when the pair geometry is known,
    /// otherwise `N / 4`.
    Geometry,
    Fixed {
        max_lag: usize,
    },
}

/// GCC estimator usable through [`TdoaEstimator`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GccPhat {
    pub weighting: Weighting,
    pub lag_bound: LagBound,
}

impl Default for GccPhat {
    fn default() -> Self {
        Self {
            weighting: Weighting::Phat,
            lag_bound: LagBound::Geometry,
        }
    }
}

impl GccPhat {
    pub fn max_lag_for(&self, pair: &PairInput<'_>) -> usize {
        let n = pair.x_i.len();
        let limit = n.saturating_sub(1) / 2;
        let lag = match self.lag_bound {
            LagBound::Fixed { max_lag } => max_lag,
            LagBound::Geometry => match pair.mic_distance_m {
                Some(d) => (d * pair.x_i.sample_rate_hz as f64 / pair.speed_of_sound).ceil() as usize + 2,
                None => n / 4,
            },
        };
        lag.clamp(1, limit.max(1))
    }
}

impl TdoaEstimator for GccPhat {
    fn id(&self) -> String {
        match self.weighting {
            Weighting::Phat => "gccphat".into(),
            Weighting::Plain => "gcc".into(),
        }
    }

    fn estimate(&self, pair: &PairInput<'_>) -> Result<TdoaEstimate> {
        gcc_phat_estimate(pair.x_i, pair.x_j, self.max_lag_for(pair), self.weighting)
    }
}
