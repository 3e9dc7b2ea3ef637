//! Scratch calibration probes, run manually with --ignored.

use mtc_core::clip::{self, PreprocessConfig};
use mtc_core::model::{self, ModelConfig, ModelParams};
use mtc_core::ops;
use mtc_core::rng::Rng;
use mtc_core::sgd::{sgd_step, SgdConfig};
use mtc_core::synth::{render_clip, Background, SynthConfig};
use mtc_core::trainer::LabeledClip;
use mtc_core::MotionType;

fn probe_dataset(n_per_class: usize) -> Vec<(mtc_core::clip::Clip, usize)> {
    // class 0: static sprite, class 1: fast linear sprite, plain bg
    let cfg = SynthConfig {
        background: Background::Plain,
        ..SynthConfig::default()
    };
    let mut rng = Rng::new(7);
    let mut out = Vec::new();
    for i in 0..n_per_class {
        let x = rng.uniform(8.0, 24.0);
        let y = rng.uniform(8.0, 24.0);
        let pos: Vec<(f64, f64)> = (0..30).map(|_| (x, y)).collect();
        out.push((render_clip(&pos, &cfg, &mut rng, format!("s{i}")).unwrap(), 0));

        let x0 = rng.uniform(3.0, 6.0);
        let y0 = rng.uniform(8.0, 24.0);
        let dir = if rng.chance(0.5) { 1.0 } else { -1.0 };
        let pos: Vec<(f64, f64)> = (0..30)
            .map(|t| {
                let x = x0 + 0.8 * t as f64;
                let y = y0;
                if dir > 0.0 {
                    (x, y)
                } else {
                    (31.0 - x, y)
                }
            })
            .collect();
        out.push((render_clip(&pos, &cfg, &mut rng, format!("m{i}")).unwrap(), 1));
    }
    out
}

fn manual_train(
    data: &[(mtc_core::clip::Clip, usize)],
    lr: f64,
    epochs: usize,
    batch: usize,
) -> Vec<f64> {
    let cfg = ModelConfig::default();
    let pre = PreprocessConfig::eval(32);
    let mut rng = Rng::new(0);
    let mut params = ModelParams::<f32>::init(&cfg, &mut rng).unwrap();
    let sgd_cfg = SgdConfig {
        learning_rate: lr,
        momentum: 0.9,
        weight_decay: 0.0,
    };
    let mut accs = Vec::new();
    let mut order: Vec<usize> = (0..data.len()).collect();
    for _ in 0..epochs {
        rng.shuffle(&mut order);
        let mut correct = 0usize;
        for chunk in order.chunks(batch) {
            params.zero_grads();
            let scale = 1.0 / chunk.len() as f64;
            for &i in chunk {
                let (c, target) = &data[i];
                let indices = clip::sample_segments(c, cfg.segments).unwrap();
                let input = clip::preprocess(c, &indices, &pre, &mut rng).unwrap();
                let cache = model::forward_cached(&input, &params, &cfg).unwrap();
                let (_, probs) = ops::softmax_cross_entropy(&cache.logits, *target).unwrap();
                if probs.argmax() == *target {
                    correct += 1;
                }
                let g = ops::softmax_cross_entropy_backward(&probs, *target);
                model::backward(&cache, &g, &mut params, &cfg, scale).unwrap();
            }
            sgd_step(&mut params.params, &sgd_cfg).unwrap();
        }
        accs.push(correct as f64 / data.len() as f64);
    }
    accs
}

#[test]
#[ignore]
fn static_vs_moving() {
    let data = probe_dataset(25);
    for (lr, batch) in [(0.05, 2), (0.1, 2), (0.05, 10), (0.02, 2)] {
        let accs = manual_train(&data, lr, 400, batch);
        let every: Vec<f64> = accs.iter().step_by(40).cloned().collect();
        println!(
            "lr {lr} batch {batch}: every40 {every:?} last {:?}",
            accs.last().unwrap()
        );
    }
}

#[allow(dead_code)]
fn unused(_: &[LabeledClip], _: MotionType) {}

#[test]
#[ignore]
fn end_to_end() {
    use mtc_core::trainer::{synth_splits, train, TrainConfig};
    let scfg = SynthConfig {
        clips_per_class: std::env::var("CALIB_CLIPS")
            .ok()
            .and_then(|v| v.parse().ok())
            .unwrap_or(100),
        ..SynthConfig::default()
    };
    let [tr, val, te] = synth_splits(&scfg, (2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0)).unwrap();
    let mcfg = ModelConfig::default();
    let mut pre_t = PreprocessConfig::train(32);
    if let Ok(sides) = std::env::var("CALIB_CROPS") {
        if !sides.is_empty() {
            pre_t.crop_sides = sides.split(',').filter_map(|p| p.parse().ok()).collect();
        }
    }
    let pre_e = PreprocessConfig::eval(32);
    let envf = |k: &str, d: f64| -> f64 {
        std::env::var(k).ok().and_then(|v| v.parse().ok()).unwrap_or(d)
    };
    {
        let lr = envf("CALIB_LR", 2.0);
        let tcfg = TrainConfig {
            base_lr: lr,
            halve_epochs: std::env::var("CALIB_HALVE")
                .ok()
                .map(|s| s.split(',').filter_map(|p| p.parse().ok()).collect())
                .unwrap_or_default(),
            total_epochs: envf("CALIB_EPOCHS", 40.0) as usize,
            momentum: envf("CALIB_MOM", 0.0),
            weight_decay: envf("CALIB_WD", 0.0),
            batch_size: envf("CALIB_BATCH", 16.0) as usize,
            seed: envf("CALIB_SEED", 0.0) as u64,
            ..TrainConfig::default()
        };
        match train(&mcfg, &tr, &val, &tcfg, &pre_t, &pre_e) {
            Ok((params, m)) => {
                let (test_acc, _) =
                    mtc_core::trainer::evaluate(&params, &te, &mcfg, &pre_e).unwrap();
                let tr_accs: Vec<f64> =
                    m.epochs.iter().step_by(8).map(|e| e.train_acc).collect();
                println!(
                    "lr {lr}: train8 {tr_accs:?} best_val {:.3} test {test_acc:.3}",
                    m.best_val_acc
                );
            }
            Err(e) => println!("lr {lr}: {e:?}"),
        }
    }
}
