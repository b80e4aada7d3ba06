use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::Result;
use blocksense::rnnlab::{
    final_level_spearman, learnability_sweep, random_init_bs_distribution, sweep_csv, InitDistribution, InitMode,
    TrainConfig,
};
use blocksense::stats::{spearman, Correlation, PairedSeries, DEFAULT_BIN_WIDTH};
use serde::{Deserialize, Serialize};

use crate::config::{ConfigFile, Embedded};
use crate::output::{write_csv_with_config, write_json};

#[derive(clap::Subcommand, Debug)]
pub enum Command {
    /// bs-hat of binarized randomly initialized LSTMs against random functions.
    InitDist(InitArgs),
    /// Fit spectrum-concentrated targets of every level and record the MSE.
    Sweep(SweepArgs),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitRun {
    pub n: usize,
    pub d: usize,
    pub init: InitMode,
    pub trials: usize,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for InitRun {
    fn default() -> Self {
        Self {
            n: 7,
            d: 32,
            init: InitMode::Uniform,
            trials: 200,
            seed: 0,
            out: PathBuf::from("out"),
        }
    }
}

#[derive(clap::Args, Debug)]
pub struct InitArgs {
    #[arg(long)]
    n: Option<usize>,
    /// Hidden units.
    #[arg(long)]
    d: Option<usize>,
    /// uniform | gaussian
    #[arg(long)]
    init: Option<InitMode>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepRun {
    pub n: usize,
    pub d: usize,
    pub seeds: Vec<u64>,
    pub train: TrainConfig,
    pub out: PathBuf,
}

impl Default for SweepRun {
    fn default() -> Self {
        Self {
            n: 7,
            d: 32,
            seeds: vec![0],
            train: TrainConfig::default(),
            out: PathBuf::from("out"),
        }
    }
}

#[derive(clap::Args, Debug)]
pub struct SweepArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    /// Each seed draws its own targets and initializations.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long, value_delimiter = ',')]
    checkpoints: Option<Vec<usize>>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

macro_rules! set {
    ($args:expr; $($field:ident => $target:expr),* $(,)?) => {
        $(if let Some(v) = $args.$field { $target = v; })*
    };
}

#[derive(Serialize)]
struct InitFile<'a> {
    run_config: Embedded<'a, InitRun>,
    distribution: &'a InitDistribution,
}

#[derive(Serialize)]
struct LevelMean {
    level: usize,
    mean_final_mse: f64,
    mean_avg_sensitivity: f64,
}

#[derive(Serialize)]
struct SweepSummary<'a> {
    run_config: Embedded<'a, SweepRun>,
    /// Over every run; absent when undefined (constant MSE, fewer than 3 runs).
    spearman_level_final_mse: Option<f64>,
    spearman_p: Option<f64>,
    /// Over the per-level means.
    spearman_level_mean_final_mse: Option<f64>,
    levels: Vec<LevelMean>,
}

fn init_dist(a: InitArgs, file: &ConfigFile) -> Result<()> {
    let mut c: InitRun = file.section("init_dist")?;
    set!(a; n => c.n, d => c.d, init => c.init, trials => c.trials, seed => c.seed, out => c.out);
    let dist = random_init_bs_distribution(c.n, c.d, c.init, c.trials, c.seed)?;
    let embedded = Embedded {
        command: "rnnlab init-dist",
        config: &c,
    };
    write_json(
        &c.out.join("init_dist.json"),
        &InitFile {
            run_config: Embedded {
                command: "rnnlab init-dist",
                config: &c,
            },
            distribution: &dist,
        },
    )?;
    write_csv_with_config(&c.out.join("init_hist.csv"), &embedded, &dist.histogram_csv(DEFAULT_BIN_WIDTH)?)?;
    println!(
        "lstm bs-hat mean = {:.4}, random-function mean = {:.4}, difference = {:.4}, degenerate = {}",
        dist.lstm_mean,
        dist.baseline_mean,
        dist.baseline_mean - dist.lstm_mean,
        dist.degenerate
    );
    Ok(())
}

fn sweep(a: SweepArgs, file: &ConfigFile) -> Result<()> {
    let mut c: SweepRun = file.section("sweep")?;
    set!(a;
        n => c.n,
        d => c.d,
        seeds => c.seeds,
        checkpoints => c.train.checkpoints,
        learning_rate => c.train.learning_rate,
        batch_size => c.train.batch_size,
        out => c.out,
    );
    let rows = learnability_sweep(c.n, c.d, &c.seeds, &c.train)?;
    let rho = final_level_spearman(&rows).ok();
    let last = rows.iter().map(|r| r.iteration).max().unwrap_or(0);
    let mut by_level: BTreeMap<usize, (f64, f64, usize)> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.iteration == last) {
        let e = by_level.entry(r.level).or_default();
        e.0 += r.mse;
        e.1 += r.avg_sensitivity;
        e.2 += 1;
    }
    let levels: Vec<LevelMean> = by_level
        .into_iter()
        .map(|(level, (mse, avs, k))| LevelMean {
            level,
            mean_final_mse: mse / k as f64,
            mean_avg_sensitivity: avs / k as f64,
        })
        .collect();
    let bucketed = PairedSeries::new(
        levels.iter().map(|l| l.level as f64).collect(),
        levels.iter().map(|l| l.mean_final_mse).collect(),
    )
    .and_then(|s| spearman(&s))
    .ok();
    let show = |c: &Option<Correlation>| c.as_ref().map_or("-".to_string(), |c| format!("{:.4}", c.r));
    let embedded = Embedded {
        command: "rnnlab sweep",
        config: &c,
    };
    write_csv_with_config(&c.out.join("sweep.csv"), &embedded, &sweep_csv(&rows))?;
    for l in &levels {
        println!(
            "level {}: as {:.3}, mean MSE at {last} = {:.3e}",
            l.level, l.mean_avg_sensitivity, l.mean_final_mse
        );
    }
    println!(
        "spearman(level, final MSE) = {} over runs, {} over level means",
        show(&rho),
        show(&bucketed)
    );
    write_json(
        &c.out.join("sweep_summary.json"),
        &SweepSummary {
            run_config: embedded,
            spearman_level_final_mse: rho.as_ref().map(|c| c.r),
            spearman_p: rho.as_ref().map(|c| c.p),
            spearman_level_mean_final_mse: bucketed.map(|c| c.r),
            levels,
        },
    )?;
    Ok(())
}

pub fn run(cmd: Command, file: &ConfigFile) -> Result<()> {
    match cmd {
        Command::InitDist(a) => init_dist(a, file),
        Command::Sweep(a) => sweep(a, file),
    }
}
