use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use tdekit_core::acoustics::{
    compute_rir, enumerate_image_sources, image_arrivals, t60_to_reflection, Directivity, RoomSpec, Vec3,
};
use tdekit_core::dataset::{generate_dataset, read_dataset, DatasetReader, SourcePool};
use tdekit_core::dsp::{read_wav, resample, write_wav, AudioClip, WavFormat};
use tdekit_core::estimator::OracleEstimator;
use tdekit_core::eval::{
    evaluate_pairs, evaluate_recording, format_g6, histogram_csv, residual_histogram, sliding_window_infer, snr_sweep,
    t60_sweep, threshold_curve, window_hop, EvalReport, PairOutcome, SweepResult, INLIER_THRESHOLD_M,
};
use tdekit_core::gcc::{gcc_phat_estimate, GccPhat, LagBound, Weighting};
use tdekit_core::TdoaEstimator;
use tdekit_neural::{history_csv, train_on_dataset, Checkpoint, NeuralEstimator};

use crate::config::RunConfig;
use crate::{CliError, GlobalArgs};

/// Sets `path` (dot separated) in a JSON object, creating parents.
fn set(obj: &mut Value, path: &str, v: impl Serialize) {
    let mut cur = obj;
    let parts: Vec<&str> = path.split('.').collect();
    for p in &parts[..parts.len() - 1] {
        cur = cur
            .as_object_mut()
            .expect("object")
            .entry(p.to_string())
            .or_insert_with(|| json!({}));
    }
    cur[parts[parts.len() - 1]] = serde_json::to_value(v).expect("flag serialises");
}

fn set_opt<T: Serialize>(obj: &mut Value, path: &str, v: &Option<T>) {
    if let Some(v) = v {
        set(obj, path, v);
    }
}

/// Preset, then config file, then the flags collected in `flags`.
fn effective(g: &GlobalArgs, mut flags: Value) -> Result<RunConfig, CliError> {
    set_opt(&mut flags, "seed", &g.seed);
    let mut cfg = RunConfig::load(g.preset, g.config.as_deref())?.overlay(&flags)?;
    cfg.sync_seeds();
    log::info!("effective config (hash {}):\n{}", &cfg.hash()[..16], cfg.to_json());
    Ok(cfg)
}

fn require<'a>(v: &'a Option<PathBuf>, what: &str) -> Result<&'a PathBuf, CliError> {
    v.as_ref()
        .ok_or_else(|| CliError::usage(format!("missing {what} (flag or config key)")))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::runtime(format!("creating {}: {e}", parent.display())))?;
    }
    fs::write(path, text).map_err(|e| CliError::runtime(format!("writing {}: {e}", path.display())))
}

fn open_dataset(dir: &Path) -> Result<DatasetReader, CliError> {
    read_dataset(dir).map_err(|e| CliError::usage(format!("cannot open dataset {}: {e}", dir.display())))
}

fn read_clip(path: &Path) -> Result<AudioClip, CliError> {
    read_wav(path).map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))
}

fn source_pool(cfg: &RunConfig, synthetic: bool) -> Result<SourcePool, CliError> {
    if synthetic {
        return Ok(SourcePool::Synthetic);
    }
    match &cfg.sources {
        Some(dir) => {
            let pool = SourcePool::from_dir(dir, cfg.generation.sample_rate_hz, cfg.generation.source_len())
                .map_err(|e| CliError::usage(format!("source audio {}: {e}", dir.display())))?;
            Ok(pool)
        }
        None => Err(CliError::usage(
            "no source audio: pass --sources <dir> or --synthetic-sounds",
        )),
    }
}

fn file_label(id: &str, taken: &mut Vec<String>) -> String {
    let base: String = id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect();
    let mut label = base.clone();
    let mut n = 2;
    while taken.contains(&label) {
        label = format!("{base}_{n}");
        n += 1;
    }
    taken.push(label.clone());
    label
}

pub const ESTIMATOR_IDS: &str = "gccphat, gcc, oracle, model, model:<checkpoint>";

fn build_estimator(spec: &str, cfg: &RunConfig) -> Result<Box<dyn TdoaEstimator>, CliError> {
    let from_ckpt =
        |p: &Path| -> Result<Box<dyn TdoaEstimator>, CliError> { Ok(Box::new(NeuralEstimator::from_checkpoint(p)?)) };
    match spec {
        "gccphat" => Ok(Box::new(GccPhat::default())),
        "gcc" => Ok(Box::new(GccPhat {
            weighting: Weighting::Plain,
            ..GccPhat::default()
        })),
        "oracle" => Ok(Box::new(OracleEstimator)),
        "model" => from_ckpt(require(&cfg.checkpoint, "checkpoint for estimator `model`")?),
        s if s.starts_with("model:") => from_ckpt(Path::new(&s["model:".len()..])),
        other => Err(CliError::usage(format!(
            "unknown estimator `{other}`; valid: {ESTIMATOR_IDS}"
        ))),
    }
}

fn build_estimators(specs: &[String], cfg: &RunConfig) -> Result<Vec<Box<dyn TdoaEstimator>>, CliError> {
    if specs.is_empty() {
        return Err(CliError::usage(format!("no --estimator given; valid: {ESTIMATOR_IDS}")));
    }
    specs.iter().map(|s| build_estimator(s, cfg)).collect()
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Output directory.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub rooms: Option<usize>,
    /// Microphones per room.
    #[arg(long)]
    pub mics: Option<usize>,
    /// Keep every source stationary.
    #[arg(long)]
    pub no_movement: bool,
    /// Omnidirectional source and microphones.
    #[arg(long)]
    pub no_directivity: bool,
    /// Draw source audio from the built-in synthetic generators.
    #[arg(long)]
    pub synthetic_sounds: bool,
    /// Directory of WAV files to draw source audio from.
    #[arg(long, conflicts_with = "synthetic_sounds")]
    pub sources: Option<PathBuf>,
    /// Fix the SNR of every room (dB).
    #[arg(long)]
    pub snr_db: Option<f64>,
    /// Disable additive noise.
    #[arg(long, conflicts_with = "snr_db")]
    pub no_noise: bool,
}

pub fn simulate(g: &GlobalArgs, a: &SimulateArgs) -> Result<(), CliError> {
    let mut f = json!({});
    set_opt(&mut f, "output", &a.out);
    set_opt(&mut f, "sources", &a.sources);
    set_opt(&mut f, "generation.rooms", &a.rooms);
    set_opt(&mut f, "generation.mics", &a.mics);
    if a.no_movement {
        set(&mut f, "generation.movement", false);
    }
    if a.no_directivity {
        set(&mut f, "generation.directional_mics", false);
        set(&mut f, "generation.directional_source", false);
    }
    if let Some(snr) = a.snr_db {
        set(&mut f, "generation.snr_range_db", [snr, snr]);
    }
    if a.no_noise {
        set(&mut f, "generation.noise", false);
    }
    let cfg = effective(g, f)?;
    let out = require(&cfg.output, "output directory (--out)")?;
    let pool = source_pool(&cfg, a.synthetic_sounds)?;
    let n = cfg.generation.rooms;
    let step = (n / 20).max(1);
    let result = generate_dataset(&cfg.generation, cfg.seed, &pool, out, |done, total| {
        if done % step == 0 || done == total {
            log::info!("rendered {done}/{total} rooms");
        }
    });
    let manifest = match result {
        Ok(m) => m,
        Err(e) => {
            // no manifest is written on failure; drop the partial blobs too
            let _ = fs::remove_dir_all(out.join("rooms"));
            return Err(match e {
                tdekit_core::Error::Generation { .. } => CliError::runtime(e.to_string()),
                other => other.into(),
            });
        }
    };
    let reader = open_dataset(out)?;
    log::info!(
        "wrote {} rooms ({} moving), {} pairs, {:.3}% out of range",
        manifest.stats.rooms,
        manifest.stats.moving_rooms,
        manifest.stats.pairs_total,
        100.0 * manifest.stats.out_of_range_rate
    );
    println!("{}", reader.manifest_hash());
    Ok(())
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset directory written by `simulate`.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Checkpoint file to write.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Per-epoch metrics CSV (default: next to the checkpoint).
    #[arg(long)]
    pub metrics: Option<PathBuf>,
}

pub fn train(g: &GlobalArgs, a: &TrainArgs) -> Result<(), CliError> {
    let mut f = json!({});
    set_opt(&mut f, "dataset", &a.dataset);
    set_opt(&mut f, "checkpoint", &a.out);
    set_opt(&mut f, "training.epochs", &a.epochs);
    set_opt(&mut f, "training.batch_size", &a.batch_size);
    set_opt(&mut f, "training.optimizer.lr", &a.lr);
    let cfg = effective(g, f)?;
    let dataset = require(&cfg.dataset, "dataset directory (--dataset)")?;
    let ckpt_path = require(&cfg.checkpoint, "checkpoint path (--out)")?;
    let reader = open_dataset(dataset)?;
    let dcfg = &reader.manifest().config;
    if dcfg.signal_len != cfg.model.input_len || dcfg.sample_rate_hz != cfg.model.sample_rate_hz {
        return Err(CliError::usage(format!(
            "dataset clips ({} samples at {} Hz) do not match model input ({} samples at {} Hz)",
            dcfg.signal_len, dcfg.sample_rate_hz, cfg.model.input_len, cfg.model.sample_rate_hz
        )));
    }
    log::info!(
        "model has {} parameters",
        cfg.model.parameter_count().map_err(CliError::from)?
    );
    let out = train_on_dataset(&reader, &cfg.model, &cfg.training, &mut |_| {})?;
    let final_loss = out.history.last().map(|m| m.train_loss);
    let csv = history_csv(&out.history);
    let ckpt = Checkpoint {
        model: out.model,
        optimizer: Some(out.optimizer),
        metadata: out.metadata,
    };
    if let Some(parent) = ckpt_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::runtime(format!("creating {}: {e}", parent.display())))?;
    }
    ckpt.save(ckpt_path).map_err(|e| CliError::runtime(e.to_string()))?;
    let metrics_path = a
        .metrics
        .clone()
        .unwrap_or_else(|| ckpt_path.with_extension("metrics.csv"));
    write_file(&metrics_path, &csv)?;
    log::info!("wrote {} and {}", ckpt_path.display(), metrics_path.display());
    if let Some(l) = final_loss {
        println!("final_train_loss={l}");
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InferEstimator {
    Gccphat,
    Model,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    /// First microphone recording.
    pub wav_i: PathBuf,
    /// Second microphone recording.
    pub wav_j: PathBuf,
    #[arg(long, value_enum, default_value = "gccphat")]
    pub estimator: InferEstimator,
    /// Checkpoint for `--estimator model`.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Window length in samples.
    #[arg(long)]
    pub window: Option<usize>,
    /// Fraction of each window shared with the next, in [0, 1).
    #[arg(long)]
    pub overlap: Option<f64>,
    /// CSV output (default: stdout).
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

fn to_rate(clip: AudioClip, rate: u32, name: &Path) -> Result<AudioClip, CliError> {
    if clip.sample_rate_hz < rate {
        return Err(CliError::usage(format!(
            "{} is sampled at {} Hz, below the required {} Hz",
            name.display(),
            clip.sample_rate_hz,
            rate
        )));
    }
    if clip.sample_rate_hz > rate {
        log::info!(
            "resampling {} from {} Hz to {} Hz",
            name.display(),
            clip.sample_rate_hz,
            rate
        );
        return Ok(resample(&clip, rate)?);
    }
    Ok(clip)
}

fn equalize(a: AudioClip, b: AudioClip) -> Result<(AudioClip, AudioClip), CliError> {
    if a.len() == b.len() {
        return Ok((a, b));
    }
    let n = a.len().min(b.len());
    log::warn!(
        "clip lengths differ ({} vs {}); using the first {n} samples",
        a.len(),
        b.len()
    );
    Ok((a.slice(0, n)?, b.slice(0, n)?))
}

pub fn infer(g: &GlobalArgs, a: &InferArgs) -> Result<(), CliError> {
    let mut f = json!({});
    set_opt(&mut f, "checkpoint", &a.checkpoint);
    set_opt(&mut f, "inference.window", &a.window);
    set_opt(&mut f, "inference.overlap", &a.overlap);
    set_opt(&mut f, "output", &a.out);
    let cfg = effective(g, f)?;
    let (estimator, rate, window): (Box<dyn TdoaEstimator>, u32, usize) = match a.estimator {
        InferEstimator::Gccphat => (
            Box::new(GccPhat::default()),
            cfg.inference.sample_rate_hz,
            cfg.inference.window,
        ),
        InferEstimator::Model => {
            let est = NeuralEstimator::from_checkpoint(require(&cfg.checkpoint, "checkpoint (--checkpoint)")?)?;
            let mc = &est.model.config;
            let window = match a.window {
                Some(w) if w != mc.input_len => {
                    return Err(CliError::usage(format!(
                        "the model takes {}-sample windows, got --window {w}",
                        mc.input_len
                    )))
                }
                _ => mc.input_len,
            };
            let rate = mc.sample_rate_hz;
            (Box::new(est), rate, window)
        }
    };
    let xi = to_rate(read_clip(&a.wav_i)?, rate, &a.wav_i)?;
    let xj = to_rate(read_clip(&a.wav_j)?, rate, &a.wav_j)?;
    let (xi, xj) = equalize(xi, xj)?;
    let hop = window_hop(window, cfg.inference.overlap)?;
    let rows = sliding_window_infer(estimator.as_ref(), &xi, &xj, window, cfg.inference.overlap)?;
    log::info!("{} windows of {window} samples, hop {hop}", rows.len());
    let mut csv = String::new();
    let _ = writeln!(csv, "# estimator={}", estimator.id());
    let _ = writeln!(csv, "# sample_rate_hz={rate}");
    let _ = writeln!(csv, "# window={window}");
    let _ = writeln!(csv, "# hop={hop}");
    csv.push_str("window,start_sample,t_center_s,lag_samples,tdoa_s,confidence\n");
    for (w, r) in rows.iter().enumerate() {
        let _ = writeln!(
            csv,
            "{w},{},{},{},{},{}",
            r.start_sample,
            format_g6(r.t_center_s),
            r.estimate.lag_samples,
            format_g6(r.estimate.tdoa_s),
            format_g6(r.estimate.confidence)
        );
    }
    match &cfg.output {
        Some(p) => write_file(p, &csv),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Dataset directory written by `simulate`.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Estimator to score (repeatable): gccphat, gcc, oracle, model, model:<checkpoint>.
    #[arg(long = "estimator", required = true)]
    pub estimators: Vec<String>,
    /// Output directory for the report CSVs.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

/// `threshold,<label>...` with one column per estimator.
fn side_by_side(reports: &[(String, EvalReport)], value_name: &str) -> String {
    let mut s = String::from(value_name);
    for (label, _) in reports {
        s.push(',');
        s.push_str(label);
    }
    s.push('\n');
    let mut values: Vec<(String, f64)> = reports
        .iter()
        .flat_map(|(_, r)| r.rows.iter().map(|row| (row.condition.clone(), row.value)))
        .collect();
    values.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    values.dedup();
    for (cond, v) in values {
        s.push_str(&format_g6(v));
        for (_, r) in reports {
            s.push(',');
            if let Some(x) = r.ratio_at(&cond, v) {
                s.push_str(&format_g6(x));
            }
        }
        s.push('\n');
    }
    s
}

pub fn evaluate(g: &GlobalArgs, a: &EvaluateArgs) -> Result<(), CliError> {
    let mut f = json!({});
    set_opt(&mut f, "dataset", &a.dataset);
    set_opt(&mut f, "output", &a.out);
    let cfg = effective(g, f)?;
    let dataset = require(&cfg.dataset, "dataset directory (--dataset)")?;
    let out = require(&cfg.output, "output directory (--out)")?;
    let estimators = build_estimators(&a.estimators, &cfg)?;
    let reader = open_dataset(dataset)?;
    let manifest = reader.manifest();
    let k = manifest.config.num_classes;
    let speed = manifest.config.speed_of_sound;
    let mut outcomes: Vec<Vec<PairOutcome>> = vec![Vec::new(); estimators.len()];
    for i in 0..reader.len() {
        let rec = reader.read_room(i)?;
        for (e, acc) in estimators.iter().zip(&mut outcomes) {
            acc.extend(evaluate_recording(e.as_ref(), &rec, k));
        }
        log::debug!("evaluated room {}/{}", i + 1, reader.len());
    }
    let mut taken = Vec::new();
    let mut reports = Vec::new();
    let mut summary = String::from("estimator,inlier_ratio_at_0.1m,n_pairs\n");
    for (e, o) in estimators.iter().zip(&outcomes) {
        let (est, truth) = evaluate_pairs(o);
        let report = EvalReport {
            estimator_id: e.id(),
            manifest_hash: reader.manifest_hash().to_string(),
            seed: manifest.master_seed,
            config_hash: manifest.config_hash.clone(),
            value_name: "threshold_m".into(),
            rows: threshold_curve(&est, &truth, speed, "all")?,
        };
        let label = file_label(&e.id(), &mut taken);
        write_file(&out.join(format!("curve_{label}.csv")), &report.to_csv())?;
        let hist = residual_histogram(o, speed, 0.01, 0.5)?;
        write_file(&out.join(format!("histogram_{label}.csv")), &histogram_csv(&hist))?;
        let ratio = report.ratio_at("all", INLIER_THRESHOLD_M).unwrap_or(f64::NAN);
        let _ = writeln!(summary, "{},{},{}", e.id(), format_g6(ratio), o.len());
        log::info!("{}: inlier@10cm {:.4} over {} pairs", e.id(), ratio, o.len());
        reports.push((label, report));
    }
    write_file(&out.join("curves.csv"), &side_by_side(&reports, "threshold_m"))?;
    write_file(&out.join("summary.csv"), &summary)?;
    print!("{summary}");
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepKindArg {
    Snr,
    T60,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub kind: SweepKindArg,
    /// Estimator to score (repeatable): gccphat, gcc, oracle, model, model:<checkpoint>.
    #[arg(long = "estimator", required = true)]
    pub estimators: Vec<String>,
    #[arg(long)]
    pub pairs_per_point: Option<usize>,
    /// Comma-separated grid replacing the default one.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    #[arg(long)]
    pub synthetic_sounds: bool,
    #[arg(long, conflicts_with = "synthetic_sounds")]
    pub sources: Option<PathBuf>,
    /// Output directory for the report CSVs.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

pub fn sweep(g: &GlobalArgs, a: &SweepArgs) -> Result<(), CliError> {
    let mut f = json!({});
    set_opt(&mut f, "sweep.pairs_per_point", &a.pairs_per_point);
    set_opt(&mut f, "sweep.grid", &a.grid);
    set_opt(&mut f, "sources", &a.sources);
    set_opt(&mut f, "output", &a.out);
    let cfg = effective(g, f)?;
    let out = require(&cfg.output, "output directory (--out)")?;
    let estimators = build_estimators(&a.estimators, &cfg)?;
    let refs: Vec<&dyn TdoaEstimator> = estimators.iter().map(|e| e.as_ref()).collect();
    let pool = {
        let mut pool_cfg = cfg.clone();
        pool_cfg.generation = cfg.sweep.template.clone();
        source_pool(&pool_cfg, a.synthetic_sounds)?
    };
    let (results, name): (Vec<SweepResult>, &str) = match a.kind {
        SweepKindArg::Snr => (snr_sweep(&refs, &cfg.sweep, &pool)?, "snr"),
        SweepKindArg::T60 => (t60_sweep(&refs, &cfg.sweep, &pool)?, "t60"),
    };
    let mut taken = Vec::new();
    let mut reports = Vec::new();
    for r in results {
        let label = file_label(&r.report.estimator_id, &mut taken);
        write_file(&out.join(format!("sweep_{name}_{label}.csv")), &r.report.to_csv())?;
        reports.push((label, r.report));
    }
    let value_name = reports.first().map(|(_, r)| r.value_name.clone()).unwrap_or_default();
    let table = side_by_side(&reports, &value_name);
    write_file(&out.join(format!("sweep_{name}.csv")), &table)?;
    print!("{table}");
    Ok(())
}

fn parse_vec3(s: &str) -> Result<Vec3, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    match v.as_slice() {
        [x, y, z] => Ok(Vec3::new(*x, *y, *z)),
        _ => Err(format!("expected x,y,z, got `{s}`")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RirFormat {
    /// `sample,amplitude` rows.
    Csv,
    /// 32-bit float WAV (needs --out).
    Wav,
    /// One `delay_samples,amplitude,generation` row per image source.
    Arrivals,
}

#[derive(Debug, Args)]
pub struct RirArgs {
    /// Room dimensions in metres, `x,y,z`.
    #[arg(long, value_parser = parse_vec3)]
    pub room: Vec3,
    /// Source position `x,y,z`.
    #[arg(long, value_parser = parse_vec3)]
    pub src: Vec3,
    /// Microphone position `x,y,z`.
    #[arg(long, value_parser = parse_vec3)]
    pub mic: Vec3,
    /// Maximum reflection order (default: the generation setting).
    #[arg(long)]
    pub order: Option<u32>,
    /// Wall reflection coefficient.
    #[arg(long, default_value_t = 0.5, conflicts_with = "t60")]
    pub reflection: f64,
    /// Target reverberation time; sets the reflection coefficient.
    #[arg(long)]
    pub t60: Option<f64>,
    /// Length in samples (default: the generation setting).
    #[arg(long)]
    pub len: Option<usize>,
    /// Subcardioid source facing this direction (omnidirectional if absent).
    #[arg(long, value_parser = parse_vec3)]
    pub src_orientation: Option<Vec3>,
    /// Subcardioid microphone facing this direction (omnidirectional if absent).
    #[arg(long, value_parser = parse_vec3)]
    pub mic_orientation: Option<Vec3>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: RirFormat,
    /// Output file (default: stdout; required for WAV).
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

fn directivity(orientation: Option<Vec3>) -> Result<Directivity, CliError> {
    match orientation {
        None => Ok(Directivity::Omnidirectional),
        Some(o) => Ok(Directivity::subcardioid(o)?),
    }
}

pub fn rir(g: &GlobalArgs, a: &RirArgs) -> Result<(), CliError> {
    let cfg = effective(g, json!({}))?;
    let gen = &cfg.generation;
    let reflection = match a.t60 {
        Some(t60) => {
            let r = t60_to_reflection(a.room, t60)?;
            log::info!(
                "T60 {t60} s in a {:?} m room -> reflection coefficient {r:.4}",
                a.room.0
            );
            r
        }
        None => a.reflection,
    };
    let room = RoomSpec::new(a.room, reflection, gen.speed_of_sound, gen.sample_rate_hz)?;
    let order = a.order.unwrap_or(gen.render.max_order);
    let len = a.len.unwrap_or(gen.render.rir_len);
    let src_dir = directivity(a.src_orientation)?;
    let mic_dir = directivity(a.mic_orientation)?;
    let text = match a.format {
        RirFormat::Arrivals => {
            room.require_inside(a.mic, "microphone")?;
            let orient = src_dir.orientation().unwrap_or(Vec3::new(1.0, 0.0, 0.0));
            let images = enumerate_image_sources(&room, a.src, orient, order)?;
            let mut arrivals = image_arrivals(&room, &images, &src_dir, a.mic, &mic_dir);
            arrivals.sort_by(|x, y| x.delay_samples.total_cmp(&y.delay_samples));
            log::info!("{} arrivals up to order {order}", arrivals.len());
            let mut s = String::from("delay_samples,amplitude,generation\n");
            for r in &arrivals {
                let _ = writeln!(s, "{},{},{}", r.delay_samples, r.amplitude, r.generation);
            }
            s
        }
        RirFormat::Csv | RirFormat::Wav => {
            let h = compute_rir(&room, a.src, &src_dir, a.mic, &mic_dir, order, len, gen.render.taps)?;
            if a.format == RirFormat::Wav {
                let path = require(&a.out, "output file (--out) for WAV")?;
                let clip = AudioClip::new(h, gen.sample_rate_hz)?;
                write_wav(&clip, path, WavFormat::Float32)?;
                return Ok(());
            }
            let mut s = String::from("sample,amplitude\n");
            for (n, v) in h.iter().enumerate() {
                let _ = writeln!(s, "{n},{v}");
            }
            s
        }
    };
    match &a.out {
        Some(p) => write_file(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WeightingArg {
    Phat,
    Plain,
}

#[derive(Debug, Args)]
pub struct GccArgs {
    pub wav_i: PathBuf,
    pub wav_j: PathBuf,
    /// Largest lag searched, in samples.
    #[arg(long, conflicts_with = "mic_distance")]
    pub max_lag: Option<usize>,
    /// Microphone spacing in metres; bounds the lag search.
    #[arg(long)]
    pub mic_distance: Option<f64>,
    #[arg(long, value_enum, default_value = "phat")]
    pub weighting: WeightingArg,
}

pub fn gccphat(g: &GlobalArgs, a: &GccArgs) -> Result<(), CliError> {
    let cfg = effective(g, json!({}))?;
    let xi = read_clip(&a.wav_i)?;
    let xj = read_clip(&a.wav_j)?;
    if xi.sample_rate_hz != xj.sample_rate_hz {
        return Err(CliError::usage(format!(
            "sample rates differ: {} vs {} Hz",
            xi.sample_rate_hz, xj.sample_rate_hz
        )));
    }
    let (xi, xj) = equalize(xi, xj)?;
    let weighting = match a.weighting {
        WeightingArg::Phat => Weighting::Phat,
        WeightingArg::Plain => Weighting::Plain,
    };
    let est = match (a.max_lag, a.mic_distance) {
        (Some(m), _) => gcc_phat_estimate(&xi, &xj, m, weighting)?,
        (None, d) => {
            let gcc = GccPhat {
                weighting,
                lag_bound: LagBound::Geometry,
            };
            let mut pair = tdekit_core::PairInput::new(&xi, &xj);
            pair.mic_distance_m = d;
            pair.speed_of_sound = cfg.generation.speed_of_sound;
            gcc.estimate(&pair)?
        }
    };
    println!("lag_samples,tdoa_s,peak_value,confidence");
    println!(
        "{},{},{},{}",
        est.lag_samples,
        format_g6(est.tdoa_s),
        format_g6(est.peak_value),
        format_g6(est.confidence)
    );
    Ok(())
}
