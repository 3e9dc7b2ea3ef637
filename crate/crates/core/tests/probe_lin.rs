//! Scratch: linear separability of random-init features.
use mtc_core::clip::PreprocessConfig;
use mtc_core::model::{extract_feature, ModelConfig, ModelParams};
use mtc_core::rng::Rng;
use mtc_core::synth::SynthConfig;
use mtc_core::trainer::synth_splits;

#[test]
#[ignore]
fn linear_probe() {
    let scfg = SynthConfig { clips_per_class: 100, ..SynthConfig::default() };
    let s: usize = std::env::var("PROBE_S").ok().and_then(|v| v.parse().ok()).unwrap_or(32);
    let cfg = ModelConfig { input_size: s, ..ModelConfig::default() };
    let pre = PreprocessConfig::eval(s);
    let mut rng = Rng::new(3);
    let params = ModelParams::<f32>::init(&cfg, &mut rng).unwrap();
    let [train, _, test] = synth_splits(&scfg, (2.0/3.0, 1.0/6.0, 1.0/6.0)).unwrap();
    let featurize = |set: &[mtc_core::trainer::LabeledClip]| -> Vec<(Vec<f64>, usize)> {
        set.iter().map(|lc| {
            let f = extract_feature(&lc.clip, &params, &cfg, &pre).unwrap();
            (f.data().iter().map(|&x| x as f64).collect(), lc.label.code() as usize)
        }).collect()
    };
    let tr = featurize(&train);
    let te = featurize(&test);
    // standardize
    let d = tr[0].0.len();
    let n = tr.len() as f64;
    let mut mean = vec![0.0; d]; let mut var = vec![0.0; d];
    for (f, _) in &tr { for i in 0..d { mean[i] += f[i]; } }
    for m in mean.iter_mut() { *m /= n; }
    for (f, _) in &tr { for i in 0..d { var[i] += (f[i]-mean[i]).powi(2); } }
    for v in var.iter_mut() { *v = (*v/n).sqrt().max(1e-9); }
    let std = |f: &[f64]| -> Vec<f64> { (0..d).map(|i| (f[i]-mean[i])/var[i]).collect() };
    // multinomial logistic regression, plain GD with momentum
    let k = 5;
    let mut w = vec![0.0f64; k*d]; let mut b = vec![0.0f64; k];
    let mut mw = vec![0.0f64; k*d]; let mut mb = vec![0.0f64; k];
    let lr = std::env::var("PROBE_LR").ok().and_then(|v| v.parse().ok()).unwrap_or(0.5);
    let epochs = std::env::var("PROBE_EPOCHS").ok().and_then(|v| v.parse().ok()).unwrap_or(400);
    let mom = 0.9;
    let xs: Vec<(Vec<f64>, usize)> = tr.iter().map(|(f,l)| (std(f), *l)).collect();
    for _epoch in 0..epochs {
        let mut gw = vec![0.0f64; k*d]; let mut gb = vec![0.0f64; k];
        for (x, y) in &xs {
            let mut z: Vec<f64> = (0..k).map(|c| b[c] + (0..d).map(|i| w[c*d+i]*x[i]).sum::<f64>()).collect();
            let m = z.iter().cloned().fold(f64::MIN, f64::max);
            let s: f64 = z.iter().map(|v| (v-m).exp()).sum();
            for c in 0..k {
                let p = (z[c]-m).exp()/s;
                let g = p - if c==*y {1.0} else {0.0};
                gb[c] += g;
                for i in 0..d { gw[c*d+i] += g*x[i]; }
            }
            z.clear();
        }
        let inv = 1.0/xs.len() as f64;
        for i in 0..k*d { mw[i] = mom*mw[i] + gw[i]*inv; w[i] -= lr*mw[i]; }
        for c in 0..k { mb[c] = mom*mb[c] + gb[c]*inv; b[c] -= lr*mb[c]; }
    }
    let acc = |set: &[(Vec<f64>, usize)]| -> f64 {
        let mut ok = 0;
        for (f, y) in set {
            let x = f.clone();
            let z: Vec<f64> = (0..k).map(|c| b[c] + (0..d).map(|i| w[c*d+i]*x[i]).sum::<f64>()).collect();
            let pred = z.iter().enumerate().max_by(|a,b| a.1.partial_cmp(b.1).unwrap()).unwrap().0;
            if pred == *y { ok += 1; }
        }
        ok as f64 / set.len() as f64
    };
    println!("train acc {:.3} test acc {:.3}", acc(&xs), acc(&te.iter().map(|(f,l)| (std(f), *l)).collect::<Vec<_>>()));
}
