use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{evaluate_pairs, format_g6, inlier_ratio, EvalReport, PairOutcome, ReportRow, INLIER_THRESHOLD_M};
use crate::acoustics::t60_to_reflection;
use crate::dataset::{
    add_scenario_noise, enumerate_pairs, render_scenario_clean, sample_scenario, GenerationConfig, RoomRecording,
    ScenarioSpec, SourcePool,
};
use crate::error::{Error, Result};
use crate::estimator::{PairInput, TdoaEstimator};
use crate::seed::{derive_seed, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    Snr,
    T60,
}

/// Grid of a sweep: SNR -30..30 dB in steps of 5, or T60 0.05..0.95 s in
/// steps of 0.1.
pub fn sweep_grid(kind: SweepKind) -> Vec<f64> {
    match kind {
        SweepKind::Snr => (0..=12).map(|i| -30.0 + 5.0 * i as f64).collect(),
        SweepKind::T60 => (0..=9).map(|i| 0.05 + 0.1 * i as f64).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSettings {
    /// Room, placement and path distributions. Its reflection range and
    /// noise settings are ignored: each grid point fixes T60 and SNR.
    pub template: GenerationConfig,
    pub pairs_per_point: usize,
    pub mics_per_scenario: usize,
    pub fixed_t60_s: f64,
    pub fixed_snr_db: f64,
    pub seed: u64,
    /// Rooms whose geometry cannot reach the requested T60 are redrawn up
    /// to this many times.
    pub max_attempts: usize,
    /// Overrides the default grid when set.
    pub grid: Option<Vec<f64>>,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            template: GenerationConfig::default(),
            pairs_per_point: 200,
            mics_per_scenario: 4,
            fixed_t60_s: 0.2,
            fixed_snr_db: 10.0,
            seed: 0,
            max_attempts: 1000,
            grid: None,
        }
    }
}

impl SweepSettings {
    fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("settings serialise");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }

    fn pairs_per_scenario(&self) -> usize {
        self.mics_per_scenario * (self.mics_per_scenario - 1) / 2
    }

    fn scenarios(&self) -> usize {
        self.pairs_per_point.div_ceil(self.pairs_per_scenario())
    }

    fn check(&self) -> Result<()> {
        if self.mics_per_scenario < 2 || self.pairs_per_point == 0 {
            return Err(Error::invalid(
                "sweep needs >= 2 mics per scenario and >= 1 pair per point",
            ));
        }
        if self.max_attempts == 0 {
            return Err(Error::invalid("sweep max_attempts must be positive"));
        }
        Ok(())
    }
}

/// Outcomes of one estimator over a sweep.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub report: EvalReport,
    /// Per grid value, the pair outcomes behind the row.
    pub outcomes: Vec<(f64, Vec<PairOutcome>)>,
}

/// Scenario `index` of a sweep with its reflection coefficient set to reach
/// `t60_s`. Geometries that cannot reach it are redrawn.
pub fn sample_sweep_scenario(settings: &SweepSettings, index: usize, t60_s: f64) -> Result<ScenarioSpec> {
    let template = GenerationConfig {
        mics: settings.mics_per_scenario,
        noise: false,
        ..settings.template.clone()
    };
    let base = derive_seed(settings.seed, stream::SWEEP, index as u64);
    for attempt in 0..settings.max_attempts {
        let seed = derive_seed(base, stream::ROOM, attempt as u64);
        let mut spec = sample_scenario(seed, &template)?;
        if let Ok(r) = t60_to_reflection(spec.room.dims, t60_s) {
            if r > 0.0 && r < 1.0 {
                spec.room.reflection_coeff = r;
                return Ok(spec);
            }
        }
    }
    Err(Error::Generation {
        seed: base,
        message: format!("no room reaches T60 = {t60_s} s in {} attempts", settings.max_attempts),
    })
}

fn render_set(settings: &SweepSettings, t60_s: f64, pool: &SourcePool) -> Result<Vec<RoomRecording>> {
    (0..settings.scenarios())
        .into_par_iter()
        .map(|i| {
            let spec = sample_sweep_scenario(settings, i, t60_s)?;
            let (audio, _) = pool.draw(spec.seed, spec.source_len(), spec.room.sample_rate_hz)?;
            render_scenario_clean(&spec, &audio)
        })
        .collect()
}

fn score(estimator: &dyn TdoaEstimator, recs: &[RoomRecording], settings: &SweepSettings) -> Vec<PairOutcome> {
    let num_classes = settings.template.num_classes;
    let jobs: Vec<(usize, usize, usize, f64)> = recs
        .iter()
        .enumerate()
        .flat_map(|(r, rec)| {
            enumerate_pairs(rec, num_classes)
                .into_iter()
                .map(move |p| (r, p.i, p.j, p.tdoa_s))
        })
        .take(settings.pairs_per_point)
        .collect();
    jobs.par_iter()
        .map(|&(r, i, j, truth)| {
            let rec = &recs[r];
            let mut input = PairInput::new(&rec.clips[i], &rec.clips[j]);
            input.truth_s = Some(truth);
            input.mic_distance_m = Some(rec.spec.mics[i].position.distance(rec.spec.mics[j].position));
            input.speed_of_sound = rec.spec.room.speed_of_sound;
            PairOutcome {
                estimate_s: estimator.estimate(&input).map(|e| e.tdoa_s).unwrap_or(f64::NAN),
                truth_s: truth,
            }
        })
        .collect()
}

fn assemble(
    estimator: &dyn TdoaEstimator,
    settings: &SweepSettings,
    condition: &str,
    value_name: &str,
    outcomes: Vec<(f64, Vec<PairOutcome>)>,
) -> Result<SweepResult> {
    let speed = settings.template.speed_of_sound;
    let rows = outcomes
        .iter()
        .map(|(value, o)| {
            let (est, truth) = evaluate_pairs(o);
            Ok(ReportRow {
                condition: condition.to_string(),
                value: *value,
                inlier_ratio: inlier_ratio(&est, &truth, INLIER_THRESHOLD_M, speed)?,
                n_pairs: o.len(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        report: EvalReport {
            estimator_id: estimator.id(),
            manifest_hash: format!("sweep:{}", settings.hash()),
            seed: settings.seed,
            config_hash: settings.template.hash(),
            value_name: value_name.to_string(),
            rows,
        },
        outcomes,
    })
}

fn grid_of(settings: &SweepSettings, kind: SweepKind) -> Vec<f64> {
    settings.grid.clone().unwrap_or_else(|| sweep_grid(kind))
}

/// Inlier@10cm per SNR at fixed T60. Every grid point uses the same rendered
/// scenarios; only the additive noise level changes.
pub fn snr_sweep(
    estimators: &[&dyn TdoaEstimator],
    settings: &SweepSettings,
    pool: &SourcePool,
) -> Result<Vec<SweepResult>> {
    settings.check()?;
    let clean = render_set(settings, settings.fixed_t60_s, pool)?;
    let grid = grid_of(settings, SweepKind::Snr);
    let mut per_estimator: Vec<Vec<(f64, Vec<PairOutcome>)>> = vec![Vec::new(); estimators.len()];
    for &snr in &grid {
        let noisy = clean
            .iter()
            .map(|r| add_scenario_noise(r, Some(snr)))
            .collect::<Result<Vec<_>>>()?;
        for (e, est) in estimators.iter().enumerate() {
            per_estimator[e].push((snr, score(*est, &noisy, settings)));
        }
    }
    let condition = format!("t60_s={}", format_g6(settings.fixed_t60_s));
    estimators
        .iter()
        .zip(per_estimator)
        .map(|(est, o)| assemble(*est, settings, &condition, "snr_db", o))
        .collect()
}

/// Inlier@10cm per T60 at fixed SNR. Scenario `i` keeps its seed across
/// grid points unless its room cannot reach the requested T60.
pub fn t60_sweep(
    estimators: &[&dyn TdoaEstimator],
    settings: &SweepSettings,
    pool: &SourcePool,
) -> Result<Vec<SweepResult>> {
    settings.check()?;
    let grid = grid_of(settings, SweepKind::T60);
    let mut per_estimator: Vec<Vec<(f64, Vec<PairOutcome>)>> = vec![Vec::new(); estimators.len()];
    for &t60 in &grid {
        let noisy = render_set(settings, t60, pool)?
            .iter()
            .map(|r| add_scenario_noise(r, Some(settings.fixed_snr_db)))
            .collect::<Result<Vec<_>>>()?;
        for (e, est) in estimators.iter().enumerate() {
            per_estimator[e].push((t60, score(*est, &noisy, settings)));
        }
    }
    let condition = format!("snr_db={}", format_g6(settings.fixed_snr_db));
    estimators
        .iter()
        .zip(per_estimator)
        .map(|(est, o)| assemble(*est, settings, &condition, "t60_s", o))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acoustics::reflection_to_t60;
    use crate::estimator::OracleEstimator;

    fn quick() -> SweepSettings {
        let mut s = SweepSettings {
            pairs_per_point: 12,
            mics_per_scenario: 3,
            seed: 11,
            ..SweepSettings::default()
        };
        s.template.signal_len = 1500;
        s.template.render.preroll = 200;
        s.template.render.max_order = 2;
        s.template.render.rir_len = 1024;
        s.template.render.segments = 4;
        s
    }

    #[test]
    fn grids() {
        let snr = sweep_grid(SweepKind::Snr);
        assert_eq!(snr.len(), 13);
        assert_eq!((snr[0], snr[12]), (-30.0, 30.0));
        let t60 = sweep_grid(SweepKind::T60);
        assert_eq!(t60.len(), 10);
        assert!((t60[9] - 0.95).abs() < 1e-12);
    }

    #[test]
    fn sweep_scenarios_hit_requested_t60() {
        let s = quick();
        for t60 in [0.05, 0.2, 0.95] {
            let spec = sample_sweep_scenario(&s, 0, t60).unwrap();
            assert!((reflection_to_t60(&spec.room).unwrap() - t60).abs() < 1e-9);
        }
    }

    #[test]
    fn oracle_scores_one_everywhere() {
        let mut s = quick();
        s.grid = Some(vec![-10.0, 20.0]);
        let oracle = OracleEstimator;
        let res = snr_sweep(&[&oracle], &s, &SourcePool::Synthetic).unwrap();
        for row in &res[0].report.rows {
            assert_eq!(row.inlier_ratio, 1.0);
            assert_eq!(row.n_pairs, 12);
        }
        s.grid = Some(vec![0.25, 0.65]);
        let res = t60_sweep(&[&oracle], &s, &SourcePool::Synthetic).unwrap();
        assert!(res[0].report.rows.iter().all(|r| r.inlier_ratio == 1.0));
    }

    #[test]
    fn sweep_report_is_deterministic() {
        let mut s = quick();
        s.grid = Some(vec![0.0]);
        let gcc = crate::gcc::GccPhat::default();
        let a = snr_sweep(&[&gcc], &s, &SourcePool::Synthetic).unwrap();
        let b = snr_sweep(&[&gcc], &s, &SourcePool::Synthetic).unwrap();
        assert_eq!(a[0].report.to_csv(), b[0].report.to_csv());
    }
}
