use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::GenerationConfig;
use crate::acoustics::{
    render_moving_source_multi, Directivity, Microphone, RenderSettings, RoomSpec, SourcePath, Vec3,
};
use crate::dsp::{add_noise_at_snr, AudioClip};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from_seed, stream};

/// A fully sampled simulation scenario. Rendering it is a pure function of
/// this value and the source audio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub seed: u64,
    pub room: RoomSpec,
    pub mics: Vec<Microphone>,
    pub source_path: SourcePath,
    pub source_directivity: Directivity,
    /// `None` renders without additive noise.
    pub snr_db: Option<f64>,
    pub signal_len: usize,
    pub render: RenderSettings,
}

impl ScenarioSpec {
    pub fn preroll(&self) -> usize {
        self.render.preroll
    }

    pub fn source_len(&self) -> usize {
        self.signal_len + self.render.preroll
    }

    pub fn mic_positions(&self) -> Vec<Vec3> {
        self.mics.iter().map(|m| m.position).collect()
    }

    pub fn source_midpoint(&self) -> Vec3 {
        self.source_path.midpoint()
    }
}

/// Multi-microphone rendering of a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct RoomRecording {
    pub spec: ScenarioSpec,
    pub clips: Vec<AudioClip>,
    pub source_midpoint: Vec3,
}

fn uniform(rng: &mut ChaCha8Rng, range: [f64; 2]) -> f64 {
    if range[0] == range[1] {
        range[0]
    } else {
        rng.random_range(range[0]..=range[1])
    }
}

fn unit_vector(rng: &mut ChaCha8Rng) -> Vec3 {
    // uniform on the sphere via z and azimuth
    let z: f64 = rng.random_range(-1.0..=1.0);
    let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let r = (1.0 - z * z).max(0.0).sqrt();
    Vec3::new(r * phi.cos(), r * phi.sin(), z)
}

fn point_in_box(rng: &mut ChaCha8Rng, dims: Vec3, margin: f64) -> Vec3 {
    let mut p = [0.0; 3];
    for (c, d) in p.iter_mut().zip(dims.0) {
        *c = rng.random_range(margin..d - margin);
    }
    Vec3(p)
}

/// Uniform point in the intersection of the margin box with the ball of
/// `radius` around `center` (which must itself lie in the box).
fn point_near(rng: &mut ChaCha8Rng, center: Vec3, radius: f64, dims: Vec3, margin: f64) -> Option<Vec3> {
    let mut lo = [0.0; 3];
    let mut hi = [0.0; 3];
    for k in 0..3 {
        lo[k] = (center.0[k] - radius).max(margin);
        hi[k] = (center.0[k] + radius).min(dims.0[k] - margin);
        if lo[k] >= hi[k] {
            return Some(center);
        }
    }
    for _ in 0..64 {
        let p = Vec3([
            rng.random_range(lo[0]..hi[0]),
            rng.random_range(lo[1]..hi[1]),
            rng.random_range(lo[2]..hi[2]),
        ]);
        if p.distance(center) <= radius {
            return Some(p);
        }
    }
    None
}

fn directivity(rng: &mut ChaCha8Rng, enabled: bool) -> Directivity {
    if enabled {
        Directivity::Subcardioid {
            orientation: unit_vector(rng),
        }
    } else {
        Directivity::Omnidirectional
    }
}

fn check_config(config: &GenerationConfig) -> Result<()> {
    let bad = |m: String| Err(Error::invalid(m));
    if config.mics < 2 {
        return bad(format!("need at least 2 microphones, got {}", config.mics));
    }
    if config.signal_len == 0 || config.sample_rate_hz == 0 {
        return bad("signal length and sample rate must be positive".into());
    }
    let [dlo, dhi] = config.room_dim_range_m;
    if !(dlo > 0.0 && dlo <= dhi && dhi.is_finite()) {
        return bad(format!("invalid room dimension range {:?}", config.room_dim_range_m));
    }
    let [rlo, rhi] = config.reflection_range;
    if !(rlo > 0.0 && rlo <= rhi && rhi < 1.0) {
        return bad(format!("invalid reflection range {:?}", config.reflection_range));
    }
    if !(0.0..=1.0).contains(&config.moving_probability) {
        return bad("moving probability must lie in [0, 1]".into());
    }
    if !(config.max_speed_m_s >= 0.0 && config.max_speed_m_s.is_finite()) {
        return bad("max speed must be finite and non-negative".into());
    }
    let [slo, shi] = config.snr_range_db;
    if config.noise && !(slo <= shi && slo.is_finite() && shi.is_finite()) {
        return bad(format!("invalid SNR range {:?}", config.snr_range_db));
    }
    if config.placement_margin_m.is_nan() || config.placement_margin_m < 0.0 {
        return bad("placement margin must be non-negative".into());
    }
    if config.max_placement_attempts == 0 {
        return bad("max placement attempts must be positive".into());
    }
    Ok(())
}

/// Samples a scenario as a deterministic function of `seed`.
///
/// Moving sources follow a quadratic Bezier curve whose consecutive control
/// points are at most `max_speed * T / 2` apart, which bounds the
/// instantaneous speed by `max_speed`. Each control point is drawn
/// uniformly from the part of that ball inside the margin box. The curve lies in the convex hull of
/// its control points, so checking those against the margin box suffices.
pub fn sample_scenario(seed: u64, config: &GenerationConfig) -> Result<ScenarioSpec> {
    check_config(config)?;
    let mut rng = rng_from_seed(seed);
    let margin = config.placement_margin_m;
    let duration = config.duration_s();

    let dims = Vec3::new(
        uniform(&mut rng, config.room_dim_range_m),
        uniform(&mut rng, config.room_dim_range_m),
        uniform(&mut rng, config.room_dim_range_m),
    );
    if dims.0.iter().any(|&d| d <= 2.0 * margin) {
        return Err(Error::Generation {
            seed,
            message: format!("room {:?} leaves no space inside the {margin} m margin", dims.0),
        });
    }
    let reflection = uniform(&mut rng, config.reflection_range);
    let room = RoomSpec::new(dims, reflection, config.speed_of_sound, config.sample_rate_hz)?;

    let moving = config.movement && rng.random_bool(config.moving_probability);
    let source_path = if moving {
        let step = 0.5 * config.max_speed_m_s * duration;
        let mut found = None;
        for _ in 0..config.max_placement_attempts {
            let p0 = point_in_box(&mut rng, dims, margin);
            let Some(p1) = point_near(&mut rng, p0, step, dims, margin) else {
                continue;
            };
            let Some(p2) = point_near(&mut rng, p1, step, dims, margin) else {
                continue;
            };
            found = Some(SourcePath::bezier(p0, p1, p2, duration));
            break;
        }
        found.ok_or_else(|| Error::Generation {
            seed,
            message: format!(
                "no Bezier path inside room {:?} after {} attempts",
                dims.0, config.max_placement_attempts
            ),
        })?
    } else {
        SourcePath::stationary(point_in_box(&mut rng, dims, margin), duration)
    };
    let source_directivity = directivity(&mut rng, config.directional_source);

    let mics = (0..config.mics)
        .map(|_| {
            let position = point_in_box(&mut rng, dims, margin);
            Microphone {
                position,
                directivity: directivity(&mut rng, config.directional_mics),
            }
        })
        .collect();
    let snr_db = config.noise.then(|| uniform(&mut rng, config.snr_range_db));

    Ok(ScenarioSpec {
        seed,
        room,
        mics,
        source_path,
        source_directivity,
        snr_db,
        signal_len: config.signal_len,
        render: config.render,
    })
}

/// Renders all microphones without noise. A source longer than needed is
/// cropped at an offset derived from the scenario seed.
pub fn render_scenario_clean(spec: &ScenarioSpec, source_audio: &AudioClip) -> Result<RoomRecording> {
    let need = spec.source_len();
    if source_audio.len() < need {
        return Err(Error::invalid(format!(
            "source audio has {} samples, scenario needs {need}",
            source_audio.len()
        )));
    }
    let slack = source_audio.len() - need;
    let offset = if slack == 0 {
        0
    } else {
        rng_from_seed(derive_seed(spec.seed, stream::SOURCE_AUDIO, 1)).random_range(0..=slack)
    };
    let source = source_audio.slice(offset, need)?;
    let clips = render_moving_source_multi(
        &spec.room,
        &spec.source_path,
        &source,
        &spec.source_directivity,
        &spec.mics,
        &spec.render,
    )?;
    Ok(RoomRecording {
        source_midpoint: spec.source_midpoint(),
        spec: spec.clone(),
        clips,
    })
}

/// Adds independent noise to every clip at `snr_db`, each relative to that
/// clip's own power. Noise streams are derived from the scenario seed.
pub fn add_scenario_noise(rec: &RoomRecording, snr_db: Option<f64>) -> Result<RoomRecording> {
    let Some(snr) = snr_db else {
        return Ok(rec.clone());
    };
    let clips = rec
        .clips
        .iter()
        .enumerate()
        .map(|(m, clip)| {
            let mut rng = rng_from_seed(derive_seed(rec.spec.seed, stream::NOISE, m as u64));
            add_noise_at_snr(clip, snr, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut spec = rec.spec.clone();
    spec.snr_db = snr_db;
    Ok(RoomRecording {
        spec,
        clips,
        source_midpoint: rec.source_midpoint,
    })
}

/// Renders every microphone, discards the preroll and adds noise at the
/// scenario SNR.
pub fn render_scenario(spec: &ScenarioSpec, source_audio: &AudioClip) -> Result<RoomRecording> {
    let clean = render_scenario_clean(spec, source_audio)?;
    add_scenario_noise(&clean, spec.snr_db)
}
