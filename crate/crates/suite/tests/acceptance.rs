//! Exit criteria. Each test prints one `criterion N: PASS|FAIL` line.
//! Criteria run one at a time so timings are not distorted.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::OnceLock;
use std::time::Instant;

use rand::Rng;
use tdekit_core::acoustics::{enumerate_image_sources, image_arrivals, tdoa_ground_truth, Directivity, RoomSpec, Vec3};
use tdekit_core::dataset::{generate_dataset, generate_room, read_dataset, GenerationConfig, SourcePool};
use tdekit_core::dsp::AudioClip;
use tdekit_core::eval::{
    evaluate_pairs, evaluate_recording, inlier_ratio, sliding_window_infer, snr_sweep, window_count, window_hop,
    SweepSettings, INLIER_THRESHOLD_M,
};
use tdekit_core::gcc::{gcc_curve, gcc_phat_estimate, GccPhat, Weighting};
use tdekit_core::seed::rng_from_seed;
use tdekit_core::{PairInput, TdoaEstimate, TdoaEstimator};
use tdekit_neural::graph::Graph;
use tdekit_neural::{predict_tdoa, train_on_dataset, Model, ModelConfig, NeuralEstimator, TrainConfig};
use tdekit_suite::{report, serial, white};

#[test]
fn criterion_01_gcc_phat_exact_integer_lags() {
    let _g = serial();
    let mut rng = rng_from_seed(101);
    let n = 10_000;
    let trials = 1000;
    let start = Instant::now();
    let mut exact = 0;
    for _ in 0..trials {
        let x = white(n, &mut rng);
        let shift: i64 = rng.random_range(-400..=400);
        // x_i(t) = x(t - shift), circularly
        let xi: Vec<f64> = (0..n as i64)
            .map(|t| x[(t - shift).rem_euclid(n as i64) as usize])
            .collect();
        let a = AudioClip::new(xi, 16_000).unwrap();
        let b = AudioClip::new(x, 16_000).unwrap();
        let est = gcc_phat_estimate(&a, &b, 500, Weighting::Phat).unwrap();
        exact += usize::from(est.lag_samples == shift);
    }
    let secs = start.elapsed().as_secs_f64();
    let rate = exact as f64 / trials as f64;
    report(
        1,
        rate >= 0.999 && secs < 30.0,
        &format!("{exact}/{trials} exact, {secs:.2} s single-threaded"),
    );
}

#[test]
fn criterion_02_plain_gcc_matches_direct_correlation() {
    let _g = serial();
    let mut rng = rng_from_seed(202);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = rng.random_range(2..=512usize);
        let xi = white(n, &mut rng);
        let xj = white(n, &mut rng);
        let curve = gcc_curve(
            &AudioClip::new(xi.clone(), 16_000).unwrap(),
            &AudioClip::new(xj.clone(), 16_000).unwrap(),
            Weighting::Plain,
        )
        .unwrap();
        let scale = xi.iter().map(|v| v * v).sum::<f64>().sqrt() * xj.iter().map(|v| v * v).sum::<f64>().sqrt();
        for l in 0..n {
            let direct: f64 = (0..n).map(|t| xi[t] * xj[(t + n - l) % n]).sum();
            let err = (curve.at(l as i64) - direct).abs() / direct.abs().max(1e-12 * scale).max(f64::MIN_POSITIVE);
            // relative to the value, or to the signal scale where the value is ~0
            let err = err.min((curve.at(l as i64) - direct).abs() / scale);
            worst = worst.max(err);
        }
    }
    report(
        2,
        worst < 1e-9,
        &format!("max relative error {worst:.2e} over 50 pairs"),
    );
}

fn unit(rng: &mut impl Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        if let Some(u) = v.normalized() {
            if v.norm() <= 1.0 {
                return u;
            }
        }
    }
}

fn subcardioid(orientation: Vec3, direction: Vec3) -> f64 {
    let d = direction.normalized().unwrap();
    0.75 + 0.25 * orientation.dot(d)
}

#[test]
fn criterion_03_image_source_oracle() {
    let _g = serial();
    let mut rng = rng_from_seed(303);
    let mut worst_delay = 0.0f64;
    let mut worst_amp = 0.0f64;
    let mut all_matched = true;
    for _ in 0..20 {
        let dims = [
            rng.random_range(2.0..9.0),
            rng.random_range(2.0..9.0),
            rng.random_range(2.0..5.0),
        ];
        let s: [f64; 3] = std::array::from_fn(|a| rng.random_range(0.3..dims[a] - 0.3));
        let m: [f64; 3] = std::array::from_fn(|a| rng.random_range(0.3..dims[a] - 0.3));
        let r = rng.random_range(0.05..0.99);
        let fs = 16_000.0;
        let c = 343.0;
        let (so, mo) = (unit(&mut rng), unit(&mut rng));
        let order = rng.random_range(0..=1u32);
        let room = RoomSpec::new(Vec3::new(dims[0], dims[1], dims[2]), r, c, fs as u32).unwrap();
        let src_dir = Directivity::subcardioid(so).unwrap();
        let mic_dir = Directivity::subcardioid(mo).unwrap();
        let images = enumerate_image_sources(&room, Vec3::new(s[0], s[1], s[2]), so, order).unwrap();
        let arrivals = image_arrivals(&room, &images, &src_dir, Vec3::new(m[0], m[1], m[2]), &mic_dir);

        // mirror oracle: direct path plus one image per wall
        let mut oracle = vec![(s, so.0, 0u32)];
        if order >= 1 {
            for axis in 0..3 {
                for wall in [0.0, dims[axis]] {
                    let mut p = s;
                    p[axis] = 2.0 * wall - s[axis];
                    let mut o = so.0;
                    o[axis] = -o[axis];
                    oracle.push((p, o, 1));
                }
            }
        }
        if oracle.len() != arrivals.len() {
            all_matched = false;
            continue;
        }
        let mut used = vec![false; arrivals.len()];
        for (p, o, g) in oracle {
            let to_image = Vec3::new(p[0] - m[0], p[1] - m[1], p[2] - m[2]);
            let d = to_image.norm();
            let delay = d / c * fs;
            let amp = r.powi(g as i32) * subcardioid(mo, to_image) * subcardioid(Vec3(o), -to_image) / (4.0 * PI * d);
            let best = (0..arrivals.len())
                .filter(|&k| !used[k] && arrivals[k].generation == g)
                .min_by(|&a, &b| {
                    (arrivals[a].delay_samples - delay)
                        .abs()
                        .total_cmp(&(arrivals[b].delay_samples - delay).abs())
                });
            match best {
                Some(k) => {
                    used[k] = true;
                    worst_delay = worst_delay.max((arrivals[k].delay_samples - delay).abs());
                    worst_amp = worst_amp.max((arrivals[k].amplitude - amp).abs() / amp.abs());
                }
                None => all_matched = false,
            }
        }
    }
    report(
        3,
        all_matched && worst_delay <= 0.5 && worst_amp <= 0.01,
        &format!(
            "max delay error {worst_delay:.2e} samples, max amplitude error {:.2e}%",
            100.0 * worst_amp
        ),
    );
}

fn loop_recovery(cfg: &GenerationConfig, pool: &SourcePool) -> (usize, usize) {
    let gcc = GccPhat::default();
    let (mut ok, mut total) = (0usize, 0usize);
    for i in 0..100 {
        let (rec, _) = generate_room(cfg, 404, i, pool).unwrap();
        assert!(!rec.spec.source_path.is_moving());
        let fs = rec.spec.room.sample_rate_hz as f64;
        let mics = &rec.spec.mics;
        for a in 0..mics.len() {
            for b in a + 1..mics.len() {
                let truth = tdoa_ground_truth(mics[a].position, mics[b].position, rec.source_midpoint, 343.0);
                let mut pair = PairInput::new(&rec.clips[a], &rec.clips[b]);
                pair.mic_distance_m = Some(mics[a].position.distance(mics[b].position));
                let est = gcc.estimate(&pair).unwrap();
                ok += usize::from((est.lag_samples as f64 - truth * fs).abs() <= 1.0);
                total += 1;
            }
        }
    }
    (ok, total)
}

#[test]
fn criterion_04_simulation_estimation_loop() {
    let _g = serial();
    let cfg = GenerationConfig {
        mics: 6,
        movement: false,
        noise: false,
        reflection_range: [0.1, 0.1],
        ..GenerationConfig::desk()
    };
    // broadband sources; periodic tone complexes are ambiguous for any
    // correlation method and are reported separately
    let mut rng = rng_from_seed(404);
    let noise_pool = SourcePool::Files(
        (0..8)
            .map(|i| {
                let clip = AudioClip::new(white(3 * 16_000, &mut rng), 16_000).unwrap();
                (format!("noise{i}"), clip)
            })
            .collect(),
    );
    let (ok, total) = loop_recovery(&cfg, &noise_pool);
    let (mixed_ok, mixed_total) = loop_recovery(&cfg, &SourcePool::Synthetic);
    let rate = ok as f64 / total as f64;
    report(
        4,
        rate >= 0.95,
        &format!(
            "{ok}/{total} pairs within 1 sample ({:.2}%) with white-noise sources; \
             built-in mixed pool {mixed_ok}/{mixed_total}",
            100.0 * rate
        ),
    );
}

#[test]
fn criterion_05_gradient_fidelity() {
    let _g = serial();
    let cfg = ModelConfig::tiny();
    let h = 1e-4;
    let eps = 0.1;
    let mut worst = 0.0f64;
    let mut params_checked = 0;
    for seed in 0..5u64 {
        let mut model = Model::<f64>::init(&cfg, seed).unwrap();
        let mut rng = rng_from_seed(500 + seed);
        for (name, p) in model.names.iter().zip(model.params.iter_mut()) {
            if name.ends_with(".bias") {
                p.data_mut().iter_mut().for_each(|b| *b = rng.random_range(-0.2..0.2));
            }
        }
        let batch = 3;
        let feats: Vec<f64> = (0..batch * 4 * cfg.bins().unwrap())
            .map(|_| rng.random_range(-2.0..2.0))
            .collect();
        let targets: Vec<usize> = (0..batch).map(|_| rng.random_range(0..cfg.num_classes)).collect();
        let loss_of = |m: &Model<f64>| {
            let mut g = Graph::new(&m.params);
            let z = m.forward(&mut g, feats.clone(), batch).unwrap();
            let l = g.cross_entropy(z, &targets, eps).unwrap();
            g.value(l)[0]
        };
        let grads = {
            let mut g = Graph::new(&model.params);
            let z = model.forward(&mut g, feats.clone(), batch).unwrap();
            let l = g.cross_entropy(z, &targets, eps).unwrap();
            g.backward(l).unwrap()
        };
        params_checked = model.parameter_count();
        for p in 0..model.params.len() {
            for e in 0..model.params[p].len() {
                let orig = model.params[p].data()[e];
                model.params[p].data_mut()[e] = orig + h;
                let up = loss_of(&model);
                model.params[p].data_mut()[e] = orig - h;
                let down = loss_of(&model);
                model.params[p].data_mut()[e] = orig;
                let fd = (up - down) / (2.0 * h);
                let a = grads[p][e];
                worst = worst.max((a - fd).abs() / a.abs().max(fd.abs()).max(1e-6));
            }
        }
    }
    report(
        5,
        worst < 1e-4 && params_checked <= 5000,
        &format!("max relative error {worst:.2e}, {params_checked} parameters, 5 seeds"),
    );
}

struct Trained {
    model: Model<f32>,
    gcc_ratio: f64,
    learned_ratio: f64,
    pairs: usize,
}

fn desk_run() -> &'static Trained {
    static RUN: OnceLock<Trained> = OnceLock::new();
    RUN.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let train_cfg = GenerationConfig::desk();
        assert_eq!((train_cfg.rooms, train_cfg.mics), (200, 20));
        let start = Instant::now();
        generate_dataset(&train_cfg, 6001, &SourcePool::Synthetic, dir.path(), |_, _| {}).unwrap();
        println!("desk dataset rendered in {:.0} s", start.elapsed().as_secs_f64());
        let reader = read_dataset(dir.path()).unwrap();
        let start = Instant::now();
        let out = train_on_dataset(&reader, &ModelConfig::desk(), &TrainConfig::desk(), &mut |m| {
            println!(
                "epoch {} train_loss {:.4} val_inlier {:?} ({:.0} s)",
                m.epoch, m.train_loss, m.val_inlier_ratio, m.seconds
            )
        })
        .unwrap();
        println!("desk training took {:.0} s", start.elapsed().as_secs_f64());
        let held_out = GenerationConfig {
            snr_range_db: [10.0, 10.0],
            ..GenerationConfig::desk()
        };
        let neural = NeuralEstimator::new(out.model.clone(), "neural");
        let gcc = GccPhat::default();
        let (mut g, mut n) = (Vec::new(), Vec::new());
        for i in 0..50 {
            let (rec, _) = generate_room(&held_out, 6002, i, &SourcePool::Synthetic).unwrap();
            g.extend(evaluate_recording(&gcc, &rec, held_out.num_classes));
            n.extend(evaluate_recording(&neural, &rec, held_out.num_classes));
        }
        let ratio = |o: &[tdekit_core::eval::PairOutcome]| {
            let (e, t) = evaluate_pairs(o);
            inlier_ratio(&e, &t, INLIER_THRESHOLD_M, held_out.speed_of_sound).unwrap()
        };
        Trained {
            model: out.model,
            gcc_ratio: ratio(&g),
            learned_ratio: ratio(&n),
            pairs: g.len(),
        }
    })
}

#[test]
fn criterion_06_desk_model_beats_gcc_phat() {
    let _g = serial();
    let run = desk_run();
    report(
        6,
        run.learned_ratio >= run.gcc_ratio + 0.10,
        &format!(
            "learned {:.4} vs GCC-PHAT {:.4} inlier@10cm on {} held-out pairs at 10 dB SNR",
            run.learned_ratio, run.gcc_ratio, run.pairs
        ),
    );
}

#[test]
fn desk_model_recovers_clean_shift() {
    let _g = serial();
    let run = desk_run();
    let mut rng = rng_from_seed(606);
    let n = 10_000;
    let x = white(n + 100, &mut rng);
    // x_i lags x_j by 50 samples
    let xi = AudioClip::new(x[0..n].to_vec(), 16_000).unwrap();
    let xj = AudioClip::new(x[50..n + 50].to_vec(), 16_000).unwrap();
    let est = predict_tdoa(&run.model, &xi, &xj).unwrap();
    println!("clean 50-sample shift predicted as {} samples", est.lag_samples);
    assert!((est.lag_samples - 50).abs() as f64 <= 4.66, "{est:?}");
}

#[test]
fn criterion_07_phat_noise_flatness() {
    let _g = serial();
    let settings = SweepSettings {
        grid: Some(vec![-10.0, 0.0, 10.0, 20.0, 30.0]),
        fixed_t60_s: 0.2,
        pairs_per_point: 200,
        seed: 707,
        ..SweepSettings::default()
    };
    let gcc = GccPhat::default();
    let res = snr_sweep(&[&gcc], &settings, &SourcePool::Synthetic).unwrap();
    let rows = &res[0].report.rows;
    let ratios: Vec<f64> = rows.iter().map(|r| r.inlier_ratio).collect();
    let spread = ratios.iter().cloned().fold(f64::MIN, f64::max) - ratios.iter().cloned().fold(f64::MAX, f64::min);
    let detail = rows
        .iter()
        .map(|r| format!("{} dB: {:.3} (n={})", r.value, r.inlier_ratio, r.n_pairs))
        .collect::<Vec<_>>()
        .join(", ");
    report(7, spread <= 0.05, &format!("spread {:.1} pp; {detail}", 100.0 * spread));
}

#[test]
fn criterion_08_uniform_logits_loss() {
    let _g = serial();
    let k = 1000;
    let want = (1000f64).ln();
    let mut worst = 0.0f64;
    for eps in [0.0, 0.1, 0.25, 0.5, 0.9, 0.999] {
        for batch in [1usize, 3] {
            let params: Vec<tdekit_neural::Tensor<f64>> = Vec::new();
            let mut g = Graph::new(&params);
            let z = g.input(vec![batch, k], vec![0.0; batch * k]).unwrap();
            let targets: Vec<usize> = (0..batch).map(|b| (b * 397) % k).collect();
            let l = g.cross_entropy(z, &targets, eps).unwrap();
            worst = worst.max((g.value(l)[0] - want).abs());
        }
    }
    report(8, worst <= 1e-6, &format!("max |loss - ln 1000| = {worst:.2e}"));
}

fn tdekit(args: &[&str]) {
    let argv = std::iter::once("tdekit").chain(args.iter().copied());
    if let Err(e) = tdekit_cli::run_args(argv) {
        panic!("tdekit {args:?} failed: {e}");
    }
}

type Files = Vec<(String, Vec<u8>)>;

fn chain(root: &Path) -> (String, Vec<u8>, Files) {
    let data = root.join("data");
    let ckpt = root.join("model.ckpt");
    let eval = root.join("eval");
    let s = |p: &Path| p.to_str().unwrap().to_string();
    tdekit(&[
        "simulate",
        "--rooms",
        "3",
        "--mics",
        "4",
        "--seed",
        "909",
        "--synthetic-sounds",
        "--out",
        &s(&data),
    ]);
    tdekit(&[
        "train",
        "--dataset",
        &s(&data),
        "--out",
        &s(&ckpt),
        "--epochs",
        "2",
        "--seed",
        "909",
    ]);
    tdekit(&[
        "evaluate",
        "--dataset",
        &s(&data),
        "--estimator",
        "gccphat",
        "--estimator",
        &format!("model:{}", s(&ckpt)),
        "--out",
        &s(&eval),
    ]);
    let mut reports: Files = std::fs::read_dir(&eval)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    reports.sort();
    let hash = read_dataset(&data).unwrap().manifest_hash().to_string();
    (hash, std::fs::read(&ckpt).unwrap(), reports)
}

#[test]
fn criterion_09_determinism_chain() {
    let _g = serial();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (ha, ca, ra) = chain(a.path());
    let (hb, cb, rb) = chain(b.path());
    let same = ha == hb && ca == cb && ra == rb && !ra.is_empty();
    report(
        9,
        same,
        &format!(
            "manifest hash {} / {}, checkpoint {} bytes, {} report files",
            ha,
            hb,
            ca.len(),
            ra.len()
        ),
    );
}

struct Counter;

impl TdoaEstimator for Counter {
    fn id(&self) -> String {
        "counter".into()
    }

    fn estimate(&self, pair: &PairInput<'_>) -> tdekit_core::Result<TdoaEstimate> {
        Ok(TdoaEstimate::from_lag(0, pair.x_i.sample_rate_hz, 0.0, 0.0))
    }
}

#[test]
fn criterion_10_windowing_arithmetic() {
    let _g = serial();
    let hop = window_hop(10_000, 5.0 / 6.0).unwrap();
    let mut ok = hop == 1667;
    let mut checked = 0;
    for len in [10_000usize, 10_001, 11_666, 11_667, 11_668, 20_000, 96_000, 160_017] {
        let expected = (len - 10_000) / 1667 + 1;
        let clip = AudioClip::new(vec![0.0; len], 16_000).unwrap();
        let rows = sliding_window_infer(&Counter, &clip, &clip, 10_000, 5.0 / 6.0).unwrap();
        ok &= rows.len() == expected && window_count(len, 10_000, hop) == expected;
        ok &= rows.iter().enumerate().all(|(w, r)| r.start_sample == w * 1667);
        checked += 1;
    }
    report(
        10,
        ok,
        &format!("hop {hop}, window counts exact for {checked} clip lengths"),
    );
}
