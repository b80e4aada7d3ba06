use blocksense::boolfn::{sample_spectrum_concentrated, TruthTable};
use blocksense::rnnlab::{
    forward, input_sequence, loss_and_gradient, random_init_bs_distribution, train_fit, InitMode, LstmParams,
    TrainConfig,
};
use rand::{Rng, SeedableRng};

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Textbook LSTM written gate by gate from the accessors.
fn reference_forward(p: &LstmParams, x: &[f64]) -> f64 {
    let d = p.hidden();
    let mut h = vec![0.0; d];
    let mut c = vec![0.0; d];
    for &xt in x {
        let pre = |g: usize, r: usize| -> f64 {
            p.input_weight(g, r) * xt + (0..d).map(|j| p.recurrent_weight(g, r, j) * h[j]).sum::<f64>() + p.bias(g, r)
        };
        let i: Vec<f64> = (0..d).map(|r| sigmoid(pre(0, r))).collect();
        let f: Vec<f64> = (0..d).map(|r| sigmoid(pre(1, r))).collect();
        let g: Vec<f64> = (0..d).map(|r| pre(2, r).tanh()).collect();
        let o: Vec<f64> = (0..d).map(|r| sigmoid(pre(3, r))).collect();
        for r in 0..d {
            c[r] = f[r] * c[r] + i[r] * g[r];
        }
        h = (0..d).map(|r| o[r] * c[r].tanh()).collect();
    }
    (0..d).map(|r| p.readout(r) * h[r]).sum::<f64>() + p.readout_bias()
}

#[test]
fn forward_matches_reference() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    for case in 0..10 {
        let d = rng.random_range(1..=12);
        let n = rng.random_range(1..=15);
        let mode = if case % 2 == 0 { InitMode::Uniform } else { InitMode::Gaussian };
        let p = LstmParams::init(mode, d, case).unwrap();
        let x: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
        let (a, b) = (forward(&p, &x), reference_forward(&p, &x));
        assert!(a.is_finite());
        assert!((a - b).abs() < 1e-10, "case {case}: {a} vs {b}");
    }
}

#[test]
fn gradients_match_central_differences() {
    let h = 1e-5;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for case in 0..20 {
        let d = rng.random_range(1..=8);
        let n = rng.random_range(1..=5);
        let batch = rng.random_range(1..=4);
        let mode = if case % 2 == 0 { InitMode::Uniform } else { InitMode::Gaussian };
        let p = LstmParams::init(mode, d, 100 + case).unwrap();
        let inputs: Vec<Vec<f64>> = (0..batch).map(|_| input_sequence(rng.random_range(0..1 << n), n)).collect();
        let targets: Vec<f64> = (0..batch).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (_, grad) = loss_and_gradient(&p, &inputs, &targets).unwrap();
        for (k, &analytic) in grad.iter().enumerate() {
            let at = |delta: f64| {
                let mut q = p.clone();
                q.as_mut_slice()[k] += delta;
                loss_and_gradient(&q, &inputs, &targets).unwrap().0
            };
            let numeric = (at(h) - at(-h)) / (2.0 * h);
            let scale = analytic.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max((analytic - numeric).abs() / scale);
        }
    }
    assert!(worst < 1e-4, "max relative error {worst}");
}

#[test]
fn training_is_deterministic_across_thread_counts() {
    let target = sample_spectrum_concentrated(4, 2, 3).unwrap();
    let cfg = TrainConfig {
        checkpoints: vec![10, 50],
        seed: 5,
        ..Default::default()
    };
    let run = || {
        let mut p = LstmParams::init(InitMode::Gaussian, 6, 8).unwrap();
        train_fit(&target, &mut p, &cfg).unwrap()
    };
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let two = rayon::ThreadPoolBuilder::new().num_threads(2).build().unwrap();
    assert_eq!(one.install(run), two.install(run));
    let dist = || random_init_bs_distribution(5, 4, InitMode::Uniform, 8, 1).unwrap();
    assert_eq!(one.install(dist), two.install(dist));
}

#[test]
fn constant_target_is_fit_quickly() {
    let target = TruthTable::constant(7, 0.5).unwrap();
    let mut p = LstmParams::init(InitMode::Uniform, 32, 0).unwrap();
    let cfg = TrainConfig {
        checkpoints: vec![1000],
        ..Default::default()
    };
    let curve = train_fit(&target, &mut p, &cfg).unwrap();
    assert!(curve.final_mse() < 1e-3, "{}", curve.final_mse());
}

#[test]
fn parity_is_harder_than_a_low_sensitivity_target() {
    let cfg = TrainConfig {
        checkpoints: vec![100, 1000],
        ..Default::default()
    };
    let fit = |t: &TruthTable| {
        let mut p = LstmParams::init(InitMode::Uniform, 16, 4).unwrap();
        train_fit(t, &mut p, &cfg).unwrap()
    };
    let parity = fit(&TruthTable::parity(7).unwrap());
    let easy = fit(&sample_spectrum_concentrated(7, 1, 4).unwrap());
    assert!(parity.final_mse() > 0.9, "{}", parity.final_mse());
    assert!(easy.final_mse() < 0.25 * parity.final_mse(), "{} vs {}", easy.final_mse(), parity.final_mse());
}

#[test]
fn binarized_init_tables_have_maximal_variance() {
    let dist = random_init_bs_distribution(6, 8, InitMode::Gaussian, 10, 3).unwrap();
    for t in &dist.trials {
        let p = LstmParams::init(InitMode::Gaussian, 8, t.seed).unwrap();
        let outputs = blocksense::rnnlab::tabulate(&p, 6);
        let best = outputs
            .iter()
            .map(|&cut| {
                let ones = outputs.iter().filter(|&&v| v > cut).count() as f64;
                let m = (2.0 * ones - 64.0) / 64.0;
                1.0 - m * m
            })
            .fold(0.0, f64::max);
        let ones = outputs.iter().filter(|&&v| v > t.threshold).count() as f64;
        let mean = (2.0 * ones - 64.0) / 64.0;
        assert_eq!(1.0 - mean * mean, best);
    }
}
