use std::ops::Range;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tdekit_core::dataset::{class_to_tdoa, enumerate_pairs, DatasetReader, RoomRecording};
use tdekit_core::eval::{inlier_ratio, INLIER_THRESHOLD_M};
use tdekit_core::seed::{derive_seed, rng_from_seed, stream};

use crate::checkpoint::TrainingMetadata;
use crate::error::{Error, Result};
use crate::frontend::clip_spectrum;
use crate::graph::Graph;
use crate::model::{Dtype, Model, ModelConfig};
use crate::optim::{AdamW, AdamWConfig};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: AdamWConfig,
    pub label_smoothing: f64,
    pub seed: u64,
    /// Fraction of rooms (taken from the end of the dataset) held out for
    /// per-epoch validation.
    pub validation_fraction: f64,
    /// Randomly present pairs as `(j, i)` with the negated label.
    pub swap_augment: bool,
    /// Apply the same random circular shift to both clips of a pair.
    pub phase_augment: bool,
    /// Delay the first clip by a random integer in `[-n, n]` samples and
    /// move the label with it (0 disables).
    pub shift_augment_max: usize,
    /// Cap on training pairs, taken after the first shuffle.
    pub max_train_pairs: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl TrainConfig {
    pub fn desk() -> Self {
        Self {
            epochs: 12,
            batch_size: 64,
            optimizer: AdamWConfig {
                lr: 1e-3,
                ..AdamWConfig::default()
            },
            label_smoothing: 0.1,
            seed: 0,
            validation_fraction: 0.1,
            swap_augment: true,
            phase_augment: true,
            shift_augment_max: 100,
            max_train_pairs: None,
        }
    }

    pub fn paper() -> Self {
        Self {
            epochs: 100,
            batch_size: 4096,
            optimizer: AdamWConfig::default(),
            swap_augment: false,
            phase_augment: false,
            shift_augment_max: 0,
            ..Self::desk()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be positive"));
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return Err(Error::invalid("label_smoothing must lie in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::invalid("validation_fraction must lie in [0, 1)"));
        }
        let o = &self.optimizer;
        if !(o.lr >= 0.0 && o.weight_decay >= 0.0 && o.eps > 0.0) {
            return Err(Error::invalid("optimizer lr, weight_decay must be >= 0 and eps > 0"));
        }
        if !((0.0..1.0).contains(&o.beta1) && (0.0..1.0).contains(&o.beta2)) {
            return Err(Error::invalid("optimizer betas must lie in [0, 1)"));
        }
        Ok(())
    }

    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serialises");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// One labelled pair referring into [`PairSet::spectra`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainPair {
    pub clip_i: usize,
    pub clip_j: usize,
    pub class_id: usize,
    pub tdoa_s: f64,
}

/// Cached per-clip spectra plus the in-range pairs built from them.
#[derive(Debug, Clone, Default)]
pub struct PairSet {
    /// Samples per clip the spectra were computed from.
    pub clip_len: usize,
    pub spectra: Vec<Vec<f32>>,
    pub pairs: Vec<TrainPair>,
}

impl PairSet {
    fn check_clip(config: &ModelConfig, rec: &RoomRecording) -> Result<()> {
        for c in &rec.clips {
            if c.len() != config.input_len || c.sample_rate_hz != config.sample_rate_hz {
                return Err(Error::invalid(format!(
                    "clip of {} samples at {} Hz does not match the model input ({} samples at {} Hz)",
                    c.len(),
                    c.sample_rate_hz,
                    config.input_len,
                    config.sample_rate_hz
                )));
            }
        }
        Ok(())
    }

    pub fn push_recording(&mut self, config: &ModelConfig, rec: &RoomRecording) -> Result<()> {
        Self::check_clip(config, rec)?;
        let bins = config.bins()?;
        self.clip_len = config.input_len;
        let base = self.spectra.len();
        self.spectra.extend(
            rec.clips
                .iter()
                .map(|c| clip_spectrum::<f32>(c, bins, config.feature_norm)),
        );
        for p in enumerate_pairs(rec, config.num_classes) {
            if let Some(class_id) = p.class_id {
                self.pairs.push(TrainPair {
                    clip_i: base + p.i,
                    clip_j: base + p.j,
                    class_id,
                    tdoa_s: p.tdoa_s,
                });
            }
        }
        Ok(())
    }

    pub fn from_recordings(config: &ModelConfig, recs: &[RoomRecording]) -> Result<Self> {
        let mut set = Self::default();
        for r in recs {
            set.push_recording(config, r)?;
        }
        Ok(set)
    }

    pub fn from_dataset(config: &ModelConfig, reader: &DatasetReader, rooms: Range<usize>) -> Result<Self> {
        let mut set = Self::default();
        for i in rooms {
            set.push_recording(config, &reader.read_room(i)?)?;
        }
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Network input for `pair`, optionally with the clips swapped, each
    /// clip circularly delayed by the matching entry of `shifts`.
    fn features_into<T: Scalar>(&self, pair: &TrainPair, swap: bool, shifts: [i64; 2], out: &mut Vec<T>) {
        let (a, b) = if swap {
            (pair.clip_j, pair.clip_i)
        } else {
            (pair.clip_i, pair.clip_j)
        };
        for (clip, shift) in [(a, shifts[0]), (b, shifts[1])] {
            let spec = &self.spectra[clip];
            if shift == 0 {
                out.extend(spec.iter().map(|&v| T::of(v as f64)));
                continue;
            }
            // X[k] e^{-j 2 pi k s / N}
            let bins = spec.len() / 2;
            let (re, im) = spec.split_at(bins);
            let w = -2.0 * std::f64::consts::PI * shift as f64 / self.clip_len as f64;
            let rot: Vec<(f64, f64)> = (0..bins).map(|k| (w * k as f64).sin_cos()).collect();
            out.extend((0..bins).map(|k| T::of(re[k] as f64 * rot[k].1 - im[k] as f64 * rot[k].0)));
            out.extend((0..bins).map(|k| T::of(re[k] as f64 * rot[k].0 + im[k] as f64 * rot[k].1)));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    /// Inlier ratio at 10 cm of the argmax prediction on validation pairs.
    pub val_inlier_ratio: Option<f64>,
    pub seconds: f64,
}

pub struct TrainOutcome {
    pub model: Model<f32>,
    pub optimizer: AdamW<f32>,
    pub history: Vec<EpochMetrics>,
    pub metadata: TrainingMetadata,
}

/// Mean loss and argmax inlier ratio of `model` on `set`.
pub fn validate_on<T: Scalar>(
    model: &Model<T>,
    set: &PairSet,
    batch: usize,
    epsilon: f64,
    speed: f64,
) -> Result<(f64, f64)> {
    let k = model.config.num_classes;
    let fs = model.config.sample_rate_hz;
    let mut loss_sum = 0.0;
    let mut est = Vec::with_capacity(set.len());
    let mut truth = Vec::with_capacity(set.len());
    for chunk in set.pairs.chunks(batch.max(1)) {
        let mut feats = Vec::new();
        for p in chunk {
            set.features_into::<T>(p, false, [0, 0], &mut feats);
        }
        let targets: Vec<usize> = chunk.iter().map(|p| p.class_id).collect();
        let mut g = Graph::new(&model.params);
        let logits = model.forward(&mut g, feats, chunk.len())?;
        let loss = g.cross_entropy(logits, &targets, epsilon)?;
        loss_sum += g.value(loss)[0].f64() * chunk.len() as f64;
        for row in g.value(logits).chunks(k) {
            let arg = argmax(row);
            est.push(class_to_tdoa(arg, fs, k)?);
        }
        truth.extend(chunk.iter().map(|p| p.tdoa_s));
    }
    let ratio = inlier_ratio(&est, &truth, INLIER_THRESHOLD_M, speed)?;
    Ok((loss_sum / set.len().max(1) as f64, ratio))
}

pub(crate) fn argmax<T: Scalar>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

/// Runs `config.epochs` epochs of minibatch AdamW on `train`, updating
/// `model` and `optimizer` in place. `on_epoch` sees each epoch's metrics.
pub fn train_epochs<T: Scalar>(
    model: &mut Model<T>,
    optimizer: &mut AdamW<T>,
    train: &PairSet,
    validation: Option<&PairSet>,
    config: &TrainConfig,
    speed_of_sound: f64,
    on_epoch: &mut dyn FnMut(&EpochMetrics),
) -> Result<Vec<EpochMetrics>> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Training {
            epoch: 0,
            batch: 0,
            message: "no in-range training pairs".into(),
        });
    }
    let k = model.config.num_classes;
    let mut order: Vec<usize> = (0..train.len()).collect();
    if let Some(cap) = config.max_train_pairs {
        order.shuffle(&mut rng_from_seed(derive_seed(config.seed, stream::SHUFFLE, u64::MAX)));
        order.truncate(cap.max(1));
    }
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let start = Instant::now();
        let mut rng = rng_from_seed(derive_seed(config.seed, stream::SHUFFLE, epoch as u64));
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let fail = |message: String| Error::Training {
                epoch,
                batch: b,
                message,
            };
            let mut feats = Vec::with_capacity(chunk.len() * 2 * train.spectra[0].len());
            let mut targets = Vec::with_capacity(chunk.len());
            for &idx in chunk {
                let p = &train.pairs[idx];
                let mirrored = k - p.class_id;
                let swap = config.swap_augment && rng.random_bool(0.5) && mirrored < k;
                let class = if swap { mirrored } else { p.class_id };
                let common = if config.phase_augment {
                    rng.random_range(0..train.clip_len as i64)
                } else {
                    0
                };
                let d = if config.shift_augment_max > 0 {
                    let max = config.shift_augment_max as i64;
                    rng.random_range((-max).max(-(class as i64))..=max.min((k - 1 - class) as i64))
                } else {
                    0
                };
                train.features_into::<T>(p, swap, [common + d, common], &mut feats);
                targets.push((class as i64 + d) as usize);
            }
            let grads = {
                let mut g = Graph::new(&model.params);
                let logits = model.forward(&mut g, feats, chunk.len())?;
                let loss = g.cross_entropy(logits, &targets, config.label_smoothing)?;
                let value = g.value(loss)[0].f64();
                if !value.is_finite() {
                    return Err(fail(format!("loss is {value}")));
                }
                loss_sum += value * chunk.len() as f64;
                g.backward(loss)?
            };
            optimizer
                .step(&mut model.params, &grads, &model.names)
                .map_err(|e| fail(e.to_string()))?;
        }
        let (val_loss, val_inlier_ratio) = match validation {
            Some(v) if !v.is_empty() => {
                let (l, r) = validate_on(model, v, config.batch_size, config.label_smoothing, speed_of_sound)?;
                (Some(l), Some(r))
            }
            _ => (None, None),
        };
        let metrics = EpochMetrics {
            epoch,
            train_loss: loss_sum / order.len() as f64,
            val_loss,
            val_inlier_ratio,
            seconds: start.elapsed().as_secs_f64(),
        };
        log::info!(
            "epoch {} train_loss {:.4} val_loss {} val_inlier {} ({:.1}s)",
            epoch,
            metrics.train_loss,
            metrics.val_loss.map_or("-".into(), |v| format!("{v:.4}")),
            metrics.val_inlier_ratio.map_or("-".into(), |v| format!("{v:.3}")),
            metrics.seconds
        );
        on_epoch(&metrics);
        history.push(metrics);
    }
    Ok(history)
}

/// Rooms `[0, n - v)` train, `[n - v, n)` validate, with
/// `v = round(fraction * n)` kept below `n`.
pub fn split_rooms(n: usize, fraction: f64) -> (Range<usize>, Range<usize>) {
    let v = ((fraction * n as f64).round() as usize).min(n.saturating_sub(1));
    (0..n - v, n - v..n)
}

/// Trains a freshly initialised model on a stored dataset.
pub fn train_on_dataset(
    reader: &DatasetReader,
    model_config: &ModelConfig,
    config: &TrainConfig,
    on_epoch: &mut dyn FnMut(&EpochMetrics),
) -> Result<TrainOutcome> {
    model_config.validate()?;
    config.validate()?;
    let manifest = reader.manifest();
    if manifest.config.num_classes != model_config.num_classes {
        return Err(Error::invalid(format!(
            "dataset labels use {} classes, model has {}",
            manifest.config.num_classes, model_config.num_classes
        )));
    }
    let (train_rooms, val_rooms) = split_rooms(reader.len(), config.validation_fraction);
    log::info!(
        "loading {} training and {} validation rooms",
        train_rooms.len(),
        val_rooms.len()
    );
    let train = PairSet::from_dataset(model_config, reader, train_rooms)?;
    let val = PairSet::from_dataset(model_config, reader, val_rooms)?;
    let speed = manifest.config.speed_of_sound;
    let metadata = TrainingMetadata {
        seed: config.seed,
        epochs: config.epochs,
        dataset_manifest_hash: reader.manifest_hash().to_string(),
        dataset_master_seed: manifest.master_seed,
        dataset_config_hash: manifest.config_hash.clone(),
        train_config_hash: config.hash(),
    };
    let (model, optimizer, history) = match model_config.parameter_dtype {
        Dtype::F32 => run::<f32>(model_config, config, &train, &val, speed, on_epoch)?,
        Dtype::F64 => {
            let (m, o, h) = run::<f64>(model_config, config, &train, &val, speed, on_epoch)?;
            let cast = |v: Vec<Vec<f64>>| -> Vec<Vec<f32>> {
                v.into_iter()
                    .map(|x| x.into_iter().map(|y| y as f32).collect())
                    .collect()
            };
            let opt = AdamW {
                config: o.config,
                step: o.step,
                m: cast(o.m),
                v: cast(o.v),
            };
            (m.cast(), opt, h)
        }
    };
    Ok(TrainOutcome {
        model,
        optimizer,
        history,
        metadata,
    })
}

fn run<T: Scalar>(
    model_config: &ModelConfig,
    config: &TrainConfig,
    train: &PairSet,
    val: &PairSet,
    speed: f64,
    on_epoch: &mut dyn FnMut(&EpochMetrics),
) -> Result<(Model<f32>, AdamW<T>, Vec<EpochMetrics>)>
where
    Model<T>: Sized,
{
    let mut model = Model::<T>::init(model_config, config.seed)?;
    let mut opt = AdamW::new(config.optimizer, &model.params);
    let history = train_epochs(&mut model, &mut opt, train, Some(val), config, speed, on_epoch)?;
    Ok((model.cast(), opt, history))
}

/// Epoch metrics as CSV (`epoch,train_loss,val_loss,val_inlier_ratio`).
pub fn history_csv(history: &[EpochMetrics]) -> String {
    let mut s = String::from("epoch,train_loss,val_loss,val_inlier_ratio\n");
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x}"));
    for m in history {
        s.push_str(&format!(
            "{},{},{},{}\n",
            m.epoch,
            m.train_loss,
            opt(m.val_loss),
            opt(m.val_inlier_ratio)
        ));
    }
    s
}
