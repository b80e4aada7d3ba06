use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lstm::{InitMode, LstmParams};
use super::train::{tabulate, train_fit, TrainConfig};
use crate::boolfn::{sample_random_boolean, sample_spectrum_concentrated, threshold_binarize, MAX_EXHAUSTIVE_AVERAGE_ARITY};
use crate::error::{Error, Result};
use crate::rng::trial_seed;
use crate::stats;

/// Functions generated per sensitivity level in a sweep.
pub const FUNCTIONS_PER_LEVEL: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitTrial {
    pub seed: u64,
    pub bs_hat: f64,
    pub threshold: f64,
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitDistribution {
    pub arity: usize,
    pub hidden: usize,
    pub mode: InitMode,
    pub seed: u64,
    pub trials: Vec<InitTrial>,
    /// Average block sensitivity of as many uniformly random Boolean functions.
    pub baseline: Vec<f64>,
    pub lstm_mean: f64,
    pub baseline_mean: f64,
    pub degenerate: usize,
}

/// Exact average block sensitivity of binarized randomly initialized LSTMs,
/// next to a matched sample of random Boolean functions.
pub fn random_init_bs_distribution(
    arity: usize,
    hidden: usize,
    mode: InitMode,
    trials: usize,
    seed: u64,
) -> Result<InitDistribution> {
    if arity == 0 || arity > MAX_EXHAUSTIVE_AVERAGE_ARITY {
        return Err(Error::invalid(format!(
            "arity must be in 1..={MAX_EXHAUSTIVE_AVERAGE_ARITY}, got {arity}"
        )));
    }
    if trials == 0 {
        return Err(Error::invalid("need at least one trial"));
    }
    let results: Vec<InitTrial> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let s = trial_seed(seed, "lstm-init", t);
            let params = LstmParams::init(mode, hidden, s)?;
            let bin = threshold_binarize(&tabulate(&params, arity))?;
            let bs = bin.table.average_block_sensitivity(None, s)?;
            Ok(InitTrial {
                seed: s,
                bs_hat: bs.mean,
                threshold: bin.threshold,
                degenerate: bin.degenerate,
            })
        })
        .collect::<Result<_>>()?;
    let baseline: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let s = trial_seed(seed, "baseline", t);
            Ok(sample_random_boolean(arity, s)?.average_block_sensitivity(None, s)?.mean)
        })
        .collect::<Result<_>>()?;
    let lstm: Vec<f64> = results.iter().map(|r| r.bs_hat).collect();
    Ok(InitDistribution {
        arity,
        hidden,
        mode,
        seed,
        lstm_mean: stats::mean(&lstm),
        baseline_mean: stats::mean(&baseline),
        degenerate: results.iter().filter(|r| r.degenerate).count(),
        trials: results,
        baseline,
    })
}

impl InitDistribution {
    /// Histogram CSV with one column per series.
    pub fn histogram_csv(&self, bin_width: f64) -> Result<String> {
        let lstm: Vec<f64> = self.trials.iter().map(|t| t.bs_hat).collect();
        let all: Vec<f64> = lstm.iter().chain(&self.baseline).copied().collect();
        let span = stats::histogram(&all, bin_width)?;
        let a = stats::histogram(&lstm, bin_width)?;
        let b = stats::histogram(&self.baseline, bin_width)?;
        let count = |bins: &[stats::HistogramBin], left: f64| {
            bins.iter().find(|b| b.bin_left == left).map_or(0, |b| b.count)
        };
        let mut out = String::from("bin_left,bin_right,lstm,baseline\n");
        for bin in span {
            out.push_str(&format!(
                "{},{},{},{}\n",
                bin.bin_left,
                bin.bin_right,
                count(&a, bin.bin_left),
                count(&b, bin.bin_left)
            ));
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub level: usize,
    pub function: usize,
    pub seed: u64,
    pub avg_sensitivity: f64,
    pub iteration: usize,
    pub mse: f64,
}

/// Trains an LSTM on [`FUNCTIONS_PER_LEVEL`] spectrum-concentrated targets per
/// level `1..=n` for each seed. Rows are ordered by (level, function, seed,
/// checkpoint) whatever the thread count.
pub fn learnability_sweep(arity: usize, hidden: usize, seeds: &[u64], config: &TrainConfig) -> Result<Vec<SweepRow>> {
    config.validate()?;
    if seeds.is_empty() {
        return Err(Error::invalid("need at least one seed"));
    }
    let jobs: Vec<(usize, usize, u64)> = (1..=arity)
        .flat_map(|level| (0..FUNCTIONS_PER_LEVEL).flat_map(move |f| seeds.iter().map(move |&s| (level, f, s))))
        .collect();
    let rows: Vec<Vec<SweepRow>> = jobs
        .into_par_iter()
        .map(|(level, function, seed)| {
            let index = (level * FUNCTIONS_PER_LEVEL + function) as u64;
            let target = sample_spectrum_concentrated(arity, level, trial_seed(seed, "target", index))?;
            let avg_sensitivity = target.average_sensitivity();
            let mut params = LstmParams::init(InitMode::Uniform, hidden, trial_seed(seed, "init", index))?;
            let cfg = TrainConfig {
                seed: trial_seed(seed, "train", index),
                ..config.clone()
            };
            let curve = train_fit(&target, &mut params, &cfg)?;
            Ok(curve
                .points
                .iter()
                .map(|p| SweepRow {
                    level,
                    function,
                    seed,
                    avg_sensitivity,
                    iteration: p.iteration,
                    mse: p.mse,
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("level,function,seed,avg_sensitivity,iteration,mse\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.level, r.function, r.seed, r.avg_sensitivity, r.iteration, r.mse
        ));
    }
    out
}

/// Spearman correlation between level and MSE at the last checkpoint.
pub fn final_level_spearman(rows: &[SweepRow]) -> Result<stats::Correlation> {
    let last = rows
        .iter()
        .map(|r| r.iteration)
        .max()
        .ok_or_else(|| Error::invalid("no sweep rows"))?;
    let (x, y): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.iteration == last)
        .map(|r| (r.level as f64, r.mse))
        .unzip();
    stats::spearman(&stats::PairedSeries::new(x, y)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_distribution_shape() {
        let d = random_init_bs_distribution(4, 3, InitMode::Gaussian, 6, 2).unwrap();
        assert_eq!(d.trials.len(), 6);
        assert_eq!(d.baseline.len(), 6);
        assert!(d.trials.iter().all(|t| (0.0..=4.0).contains(&t.bs_hat)));
        let again = random_init_bs_distribution(4, 3, InitMode::Gaussian, 6, 2).unwrap();
        assert_eq!(d, again);
        let csv = d.histogram_csv(0.25).unwrap();
        assert!(csv.starts_with("bin_left,bin_right,lstm,baseline\n"));
        assert!(random_init_bs_distribution(11, 3, InitMode::Uniform, 1, 0).is_err());
    }

    #[test]
    fn sweep_row_count_and_order() {
        let cfg = TrainConfig {
            checkpoints: vec![2, 4],
            ..Default::default()
        };
        let rows = learnability_sweep(3, 2, &[1, 2], &cfg).unwrap();
        assert_eq!(rows.len(), 3 * FUNCTIONS_PER_LEVEL * 2 * 2);
        assert_eq!((rows[0].level, rows[0].function, rows[0].seed, rows[0].iteration), (1, 0, 1, 2));
        assert_eq!((rows[3].level, rows[3].seed, rows[3].iteration), (1, 2, 4));
        for r in &rows {
            let lo = r.level.saturating_sub(1).max(1) as f64;
            let hi = (r.level + 1).min(3) as f64;
            assert!(r.avg_sensitivity >= lo - 1e-9 && r.avg_sensitivity <= hi + 1e-9);
        }
        assert_eq!(sweep_csv(&rows).lines().count(), rows.len() + 1);
    }
}
