//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! `cargo test --test acceptance -- 3 7` runs only criteria 3 and 7.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use blocksense::boolfn::{
    sample_random_boolean, sample_spectrum_concentrated, threshold_binarize, walsh_hadamard, TruthTable,
};
use blocksense::linbound::{run_trials, TrialConfig};
use blocksense::rng::{rng_from_seed, trial_seed};
use blocksense::rnnlab::{
    forward, learnability_sweep, loss_and_gradient, random_init_bs_distribution, InitMode, LstmParams, SweepRow,
    TrainConfig, FUNCTIONS_PER_LEVEL,
};
use blocksense::seqsens::{
    build_subset_family, estimate_input, EstimateConfig, Example, ExhaustiveSampler, FocusWindow, PackingMode,
    Sequence, SubsetFamilyConfig, TableModel, Vocabulary, WindowCenter,
};
use blocksense::seqsens::protocol::Fault;
use rand::Rng;

type Outcome = Result<String, String>;

macro_rules! check {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

/// Average ranks, ties sharing the mean of their positions.
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        for &k in &idx[i..=j] {
            out[k] = (i + j) as f64 / 2.0 + 1.0;
        }
        i = j + 1;
    }
    out
}

fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&ranks(x), &ranks(y))
}

/// Population variance of `t` over the inputs agreeing with `x` outside `mask`.
fn neighbourhood_variance(t: &TruthTable, x: usize, mask: usize) -> f64 {
    let mut vals = Vec::new();
    let mut sub = mask;
    loop {
        vals.push(t.values()[(x & !mask) | sub]);
        if sub == 0 {
            break;
        }
        sub = (sub - 1) & mask;
    }
    let m = vals.iter().sum::<f64>() / vals.len() as f64;
    vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / vals.len() as f64
}

/// Maximum over all set partitions of `0..n`, enumerated as restricted growth strings.
fn brute_force_bs(n: usize, weights: &[f64]) -> f64 {
    fn go(pos: usize, n: usize, blocks: &mut Vec<usize>, weights: &[f64], best: &mut f64) {
        if pos == n {
            let v: f64 = blocks.iter().map(|&b| weights[b]).sum();
            *best = best.max(v);
            return;
        }
        for b in 0..blocks.len() {
            blocks[b] |= 1 << pos;
            go(pos + 1, n, blocks, weights, best);
            blocks[b] &= !(1 << pos);
        }
        blocks.push(1 << pos);
        go(pos + 1, n, blocks, weights, best);
        blocks.pop();
    }
    let mut best = f64::NEG_INFINITY;
    go(0, n, &mut Vec::new(), weights, &mut best);
    best
}

fn c1_parity() -> Outcome {
    for n in 3..=10 {
        let t = TruthTable::parity(n).map_err(|e| e.to_string())?;
        let want = n as f64;
        for x in 0..t.len() {
            let s = t.sensitivity_at(x).unwrap();
            let bs = t.block_sensitivity_exact(x).unwrap().value;
            check!(s == want && bs == want, "n={n} x={x}: s={s} bs={bs}");
        }
        check!(t.average_sensitivity() == want, "n={n}: as={}", t.average_sensitivity());
        let avg = t.average_block_sensitivity(None, 0).unwrap().mean;
        check!(avg == want, "n={n}: bs-hat={avg}");
    }
    Ok("s = bs = as = n exactly for n = 3..10".into())
}

fn c2_random_concentration() -> Outcome {
    let values: Vec<f64> = (0..500)
        .map(|i| {
            let t = sample_random_boolean(7, trial_seed(2, "random-boolean", i)).unwrap();
            t.average_block_sensitivity(None, 0).unwrap().mean
        })
        .collect();
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let (lo, hi) = values.iter().fold((f64::MAX, f64::MIN), |(l, h), &v| (l.min(v), h.max(v)));
    check!((4.0..=5.0).contains(&mean), "mean bs-hat {mean:.4}");
    Ok(format!("mean bs-hat {mean:.4} over 500 functions (range {lo:.3}..{hi:.3})"))
}

fn c3_spectral_identity() -> Outcome {
    let mut rng = rng_from_seed(3);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let n = 1 + i % 12;
        let values: Vec<f64> = (0..1usize << n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let t = TruthTable::new(n, values.clone()).unwrap();
        // Sum over inputs and positions of ((f(x) - f(x^i)) / 2)^2, averaged.
        let direct = (0..values.len())
            .map(|x| (0..n).map(|i| ((values[x] - values[x ^ (1 << i)]) / 2.0).powi(2)).sum::<f64>())
            .sum::<f64>()
            / values.len() as f64;
        let spectral = walsh_hadamard(&t).total_influence();
        worst = worst.max((direct - spectral).abs()).max((t.average_sensitivity() - spectral).abs());
    }
    check!(worst <= 1e-9, "max deviation {worst:e}");
    Ok(format!("max |as - spectral| = {worst:.2e} over 100 tables"))
}

fn c4_partition_oracle() -> Outcome {
    let mut inputs = 0;
    for i in 0..50u64 {
        let n = 1 + (i % 8) as usize;
        let t = sample_random_boolean(n, trial_seed(4, "partition", i)).unwrap();
        for x in 0..t.len() {
            let weights: Vec<f64> = (0..1usize << n).map(|m| neighbourhood_variance(&t, x, m)).collect();
            let brute = brute_force_bs(n, &weights);
            let dp = t.block_sensitivity_exact(x).unwrap().value;
            check!(brute == dp, "function {i} (n={n}) x={x}: dp {dp} vs brute force {brute}");
            inputs += 1;
        }
    }
    Ok(format!("exact agreement on {inputs} inputs of 50 functions"))
}

fn c5_as_bs_correlation() -> Outcome {
    let (mut avs, mut bs) = (Vec::new(), Vec::new());
    for level in 1..=7 {
        for f in 0..FUNCTIONS_PER_LEVEL {
            let index = (level * FUNCTIONS_PER_LEVEL + f) as u64;
            let t = sample_spectrum_concentrated(7, level, trial_seed(5, "target", index)).unwrap();
            avs.push(t.average_sensitivity());
            bs.push(t.average_block_sensitivity(None, 0).unwrap().mean);
        }
    }
    let r = pearson(&avs, &bs);
    check!(r >= 0.9, "R = {r:.4}");
    Ok(format!("R(as, bs-hat) = {r:.4} over 35 functions"))
}

fn c6_kgram_bound() -> Outcome {
    let config = TrialConfig {
        trials: 1000,
        ks: vec![1, 2, 3],
        max_n: 12,
        radix: 2,
        seed: 6,
        ..TrialConfig::default()
    };
    let s = run_trials(&config).map_err(|e| e.to_string())?;
    check!(s.trials == 1000, "{} trials", s.trials);
    check!(s.violations == 0 && s.block_violations == 0, "{} violations, {} block violations", s.violations, s.block_violations);
    for (head, slope) in &s.lipschitz_audit {
        check!(slope.is_finite(), "audit of {head:?} failed");
    }
    let exhaustive = s.certificates.iter().filter(|c| c.exhaustive).count();
    let inputs: usize = s.certificates.iter().map(|c| c.inputs_checked).sum();
    Ok(format!(
        "0 violations in 1000 models ({exhaustive} fully enumerated, {inputs} inputs), max bs/bound {:.4}",
        s.max_ratio
    ))
}

fn sign_example(x: usize, n: usize, ids: &[u32]) -> Example {
    Example {
        id: format!("x{x}"),
        sequence: Sequence::new((0..n).map(|i| ids[x >> i & 1]).collect()).unwrap(),
        label: None,
    }
}

fn c7_estimator_equivalence() -> Outcome {
    let vocab = Vocabulary::new();
    let ids = vec![vocab.intern("1"), vocab.intern("-1")];
    let sampler = ExhaustiveSampler::uniform(ids.clone()).unwrap();
    let config = |full_family: bool| EstimateConfig {
        family: SubsetFamilyConfig {
            full_family,
            enumerate: true,
            ..Default::default()
        },
        mode: PackingMode::Exact,
        seed: 7,
    };
    for (n, seed) in [(4, 0), (6, 1), (8, 2)] {
        let t = sample_random_boolean(n, trial_seed(7, "full", seed)).unwrap();
        let model = TableModel::new(t.clone(), &vocab);
        for x in 0..t.len() {
            let r = estimate_input(&sign_example(x, n, &ids), &sampler, &model, &config(true)).unwrap();
            let again = estimate_input(&sign_example(x, n, &ids), &sampler, &model, &config(true)).unwrap();
            let exact = t.block_sensitivity_exact(x).unwrap().value;
            check!(r.bs_estimate.to_bits() == exact.to_bits(), "n={n} x={x}: {} vs {exact}", r.bs_estimate);
            check!(r == again, "n={n} x={x}: rerun differs");
        }
    }
    // Restricted family at n = 10 against the exact values, on binarized targets of every level.
    let n = 10;
    let (mut restricted, mut exact) = (Vec::new(), Vec::new());
    let mut gap: f64 = 0.0;
    for i in 0..20u64 {
        let level = 1 + (i as usize % n);
        let real = sample_spectrum_concentrated(n, level, trial_seed(7, "restricted", i)).unwrap();
        let t = threshold_binarize(real.values()).unwrap().table;
        let model = TableModel::new(t.clone(), &vocab);
        let (mut sum_r, mut sum_e) = (0.0, 0.0);
        for x in 0..t.len() {
            let r = estimate_input(&sign_example(x, n, &ids), &sampler, &model, &config(false)).unwrap();
            let e = t.block_sensitivity_exact(x).unwrap().value;
            check!(r.bs_estimate <= e + 1e-12, "function {i} x={x}: restricted {} above exact {e}", r.bs_estimate);
            gap = gap.max(e - r.bs_estimate);
            sum_r += r.bs_estimate;
            sum_e += e;
        }
        restricted.push(sum_r / t.len() as f64);
        exact.push(sum_e / t.len() as f64);
    }
    let r = pearson(&restricted, &exact);
    check!(r >= 0.8, "R = {r:.4}");
    Ok(format!("bitwise equal on n = 4, 6, 8; restricted <= exact; R = {r:.4} over 20 functions (max gap {gap:.3})"))
}

fn c8_family_budget() -> Outcome {
    let configs = [
        SubsetFamilyConfig::default(),
        SubsetFamilyConfig {
            window: Some(FocusWindow {
                width: 7,
                center: WindowCenter::Median,
            }),
            ..Default::default()
        },
        SubsetFamilyConfig {
            window: Some(FocusWindow {
                width: 7,
                center: WindowCenter::Position(1),
            }),
            ..Default::default()
        },
        SubsetFamilyConfig {
            max_span_len: 1,
            num_chunks: 1,
            ..Default::default()
        },
    ];
    let mut tightest: f64 = 0.0;
    for (c, config) in configs.iter().enumerate() {
        for n in 1..=512 {
            let count = build_subset_family(n, config).map_err(|e| e.to_string())?.len();
            check!(count <= 8 * n + 256, "config {c}, n={n}: {count} subsets");
            tightest = tightest.max(count as f64 / (8 * n + 256) as f64);
        }
    }
    Ok(format!("count <= 8n + 256 for n = 1..512 under 4 configurations (max ratio {tightest:.3})"))
}

fn c9_gradient_check() -> Outcome {
    let mut rng = rng_from_seed(9);
    let mut worst: f64 = 0.0;
    for case in 0..20u64 {
        let d = rng.random_range(1..=6);
        let n = rng.random_range(1..=5);
        let batch = rng.random_range(1..=4);
        let mode = if case % 2 == 0 { InitMode::Uniform } else { InitMode::Gaussian };
        let mut p = LstmParams::init(mode, d, trial_seed(9, "gradcheck", case)).unwrap();
        let inputs: Vec<Vec<f64>> = (0..batch)
            .map(|_| (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect())
            .collect();
        let targets: Vec<f64> = (0..batch).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let (_, grad) = loss_and_gradient(&p, &inputs, &targets).unwrap();
        let loss = |p: &LstmParams| {
            inputs.iter().zip(&targets).map(|(x, y)| (forward(p, x) - y).powi(2)).sum::<f64>() / batch as f64
        };
        let h = 1e-5;
        for j in 0..grad.len() {
            let orig = p.as_slice()[j];
            p.as_mut_slice()[j] = orig + h;
            let up = loss(&p);
            p.as_mut_slice()[j] = orig - h;
            let down = loss(&p);
            p.as_mut_slice()[j] = orig;
            let numeric = (up - down) / (2.0 * h);
            let rel = (grad[j] - numeric).abs() / grad[j].abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    check!(worst < 1e-4, "max relative error {worst:e}");
    Ok(format!("max relative error {worst:.2e} over 20 configurations"))
}

fn c10_init_bias() -> Outcome {
    let mut parts = Vec::new();
    for d in [32, 64] {
        for mode in [InitMode::Uniform, InitMode::Gaussian] {
            let dist = random_init_bs_distribution(7, d, mode, 200, 10).map_err(|e| e.to_string())?;
            let gap = dist.baseline_mean - dist.lstm_mean;
            check!(gap >= 0.5, "d={d} {mode:?}: lstm {:.3} vs baseline {:.3}", dist.lstm_mean, dist.baseline_mean);
            parts.push(format!("d={d} {mode:?}: {:.2} vs {:.2}", dist.lstm_mean, dist.baseline_mean));
        }
    }
    Ok(parts.join("; "))
}

/// Mean final MSE per level.
fn level_means(rows: &[SweepRow]) -> Vec<(f64, f64)> {
    let last = rows.iter().map(|r| r.iteration).max().unwrap_or(0);
    let mut out = Vec::new();
    for level in 1..=7 {
        let v: Vec<f64> = rows.iter().filter(|r| r.iteration == last && r.level == level).map(|r| r.mse).collect();
        out.push((level as f64, v.iter().sum::<f64>() / v.len() as f64));
    }
    out
}

fn c11_learnability() -> Outcome {
    let config = TrainConfig {
        checkpoints: vec![100, 1000, 10_000],
        ..TrainConfig::default()
    };
    let rows = learnability_sweep(7, 32, &[0, 1, 2, 3, 4], &config).map_err(|e| e.to_string())?;
    let last: Vec<&SweepRow> = rows.iter().filter(|r| r.iteration == 10_000).collect();
    check!(last.len() == 7 * FUNCTIONS_PER_LEVEL * 5, "{} final rows", last.len());
    let per_run = spearman(
        &last.iter().map(|r| r.level as f64).collect::<Vec<_>>(),
        &last.iter().map(|r| r.mse).collect::<Vec<_>>(),
    );
    let means = level_means(&rows);
    let (levels, mse): (Vec<f64>, Vec<f64>) = means.iter().copied().unzip();
    let bucketed = spearman(&levels, &mse);
    let shown: Vec<String> = mse.iter().map(|m| format!("{m:.2e}")).collect();
    let detail = format!(
        "rho(level, mean final MSE) = {bucketed:.3}, per run {per_run:.3}; means [{}]",
        shown.join(", ")
    );
    check!(bucketed > 0.8, "{detail}");
    Ok(detail)
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_blocksense"))
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("spawn blocksense")
}

fn c12_determinism() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let mut dataset = String::new();
    let words = ["good", "bad", "fine", "awful", "plot", "the", "movie"];
    let mut rng = rng_from_seed(12);
    for i in 0..24 {
        let len = rng.random_range(3..=12);
        let tokens: Vec<String> = (0..len).map(|_| format!("\"{}\"", words[rng.random_range(0..words.len())])).collect();
        dataset.push_str(&format!("{{\"id\": \"s{i}\", \"tokens\": [{}]}}\n", tokens.join(", ")));
    }
    let lexicon = r#"{"scores": {"good": [1.5], "bad": [-1.5], "fine": [0.7], "awful": [-2.0]}, "head": "tanh"}"#;
    let mut files = Vec::new();
    for (dir, threads) in [("a", "1"), ("b", "4")] {
        let d = root.path().join(dir);
        std::fs::create_dir(&d).unwrap();
        std::fs::write(d.join("d.jsonl"), &dataset).unwrap();
        std::fs::write(d.join("lex.json"), lexicon).unwrap();
        let out = run(bin().current_dir(&d).args([
            "--threads", threads, "estimate", "--dataset", "d.jsonl", "--sampler", "markov:k=2", "--model",
            "lexicon:lex.json", "--seed", "1", "--out", "out",
        ]));
        check!(out.status.success(), "--threads {threads}: {}", String::from_utf8_lossy(&out.stderr));
        files.push(d.join("out"));
    }
    let mut compared = 0;
    for name in ["reports.jsonl", "summary.json", "histogram.csv"] {
        let a = std::fs::read(files[0].join(name)).map_err(|e| format!("{name}: {e}"))?;
        let b = std::fs::read(files[1].join(name)).map_err(|e| format!("{name}: {e}"))?;
        check!(a == b, "{name} differs between --threads 1 and --threads 4");
        compared += a.len();
    }
    Ok(format!("--threads 1 and 4 give byte-identical outputs ({compared} bytes)"))
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn c13_protocol() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let golden = dir.path().join("golden.txt");
    let out = run(bin().args(["oracle-check", "--mock", "--record"]).arg(&golden));
    check!(exit_code(&out) == 0, "in-process mock: exit {} {}", exit_code(&out), stdout(&out));
    let spawned = format!("{} mock-oracle", env!("CARGO_BIN_EXE_blocksense"));
    let out = run(bin().args(["oracle-check", "--cmd", &spawned]));
    check!(exit_code(&out) == 0, "spawned mock: exit {} {}", exit_code(&out), stdout(&out));
    let out = run(bin().args(["oracle-check", "--transcript"]).arg(&golden));
    check!(exit_code(&out) == 0, "golden transcript: exit {} {}", exit_code(&out), stdout(&out));

    let mut flagged = 0;
    for fault in Fault::ALL.into_iter().filter(|f| *f != Fault::None) {
        let name = serde_json::to_value(fault).unwrap().as_str().unwrap().to_string();
        let path = dir.path().join(format!("{name}.txt"));
        let live = run(bin().args(["oracle-check", "--mock", "--fault", &name, "--record"]).arg(&path));
        let replay = run(bin().args(["oracle-check", "--transcript"]).arg(&path));
        for (what, out) in [("live", &live), ("transcript", &replay)] {
            check!(exit_code(out) == 2, "{name} {what}: exit {}", exit_code(out));
            check!(stdout(out).contains("violation 1: ["), "{name} {what}: no itemized violation");
        }
        flagged += 1;
    }

    // Hand-corrupted copies of the golden transcript.
    let text = std::fs::read_to_string(&golden).unwrap();
    let received: Vec<usize> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| l.starts_with("< ") && l.contains("\"samples\""))
        .map(|(i, _)| i)
        .collect();
    check!(!received.is_empty(), "golden transcript has no sample replies");
    let edit = |f: &dyn Fn(&str) -> String| -> String {
        text.lines()
            .enumerate()
            .map(|(i, l)| if i == received[0] { f(l) } else { l.to_string() })
            .collect::<Vec<_>>()
            .join("\n")
    };
    let corruptions = [
        ("truncated", edit(&|l: &str| l[..l.len() / 2].to_string())),
        ("wrong-id", edit(&|l: &str| l.replacen("\"id\":", "\"id\":\"zz\",\"was\":", 1))),
        ("outside-subset", edit(&|l: &str| l.replacen("[[\"the\"", "[[\"zz\"", 1))),
    ];
    for (name, body) in corruptions {
        let path = dir.path().join(format!("edited-{name}.txt"));
        std::fs::write(&path, body).unwrap();
        let out = run(bin().args(["oracle-check", "--transcript"]).arg(&path));
        check!(exit_code(&out) == 2, "edited {name}: exit {}", exit_code(&out));
        check!(stdout(&out).contains("violation 1: ["), "edited {name}: no itemized violation");
        if name == "truncated" {
            check!(stdout(&out).contains("payload:"), "truncated line reported without its payload");
        }
        flagged += 1;
    }
    Ok(format!("mock passes in process, spawned and replayed; {flagged} corrupted sessions exit 2 with itemized violations"))
}

type Criterion = (usize, &'static str, fn() -> Outcome);

const CRITERIA: [Criterion; 13] = [
    (1, "parity exactness", c1_parity),
    (2, "random-function concentration", c2_random_concentration),
    (3, "spectral identity", c3_spectral_identity),
    (4, "partition oracle equivalence", c4_partition_oracle),
    (5, "as-bs correlation", c5_as_bs_correlation),
    (6, "k-gram bound", c6_kgram_bound),
    (7, "estimator equivalence", c7_estimator_equivalence),
    (8, "family budget", c8_family_budget),
    (9, "LSTM gradient check", c9_gradient_check),
    (10, "random-init bias", c10_init_bias),
    (11, "learnability trend", c11_learnability),
    (12, "determinism", c12_determinism),
    (13, "protocol", c13_protocol),
];

fn main() {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let listing = std::env::args().any(|a| a == "--list");
    let mut failed = 0;
    for (id, name, f) in CRITERIA {
        if listing {
            println!("criterion {id}: test");
            continue;
        }
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panicked".into()))
        });
        let secs = elapsed(start);
        match outcome {
            Ok(detail) => println!("PASS {id:>2} {name}: {detail} [{secs}]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {id:>2} {name}: {detail} [{secs}]");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

fn elapsed(start: Instant) -> String {
    let d: Duration = start.elapsed();
    format!("{:.1}s", d.as_secs_f64())
}
