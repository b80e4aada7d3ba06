use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::lstm::{forward, loss_and_gradient, LstmParams};
use crate::boolfn::{signs_of_index, TruthTable};
use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, trial_seed};

/// Inputs evaluated at a checkpoint when `2^n` is too many.
pub const HELD_IN_SAMPLE: usize = 1024;

/// Largest arity whose MSE is taken over every input.
pub const MAX_EXACT_MSE_ARITY: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Iterations after which the MSE is recorded, ascending.
    pub checkpoints: Vec<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.003,
            batch_size: 32,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            checkpoints: vec![100, 1_000, 10_000],
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::invalid("Adam moments must lie in [0, 1)"));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::invalid("epsilon must be positive"));
        }
        if self.checkpoints.is_empty() || self.checkpoints[0] == 0 {
            return Err(Error::invalid("checkpoints must be nonempty and positive"));
        }
        if self.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("checkpoints must be strictly ascending"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointLoss {
    pub iteration: usize,
    pub mse: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossCurve {
    pub points: Vec<CheckpointLoss>,
    /// Number of inputs the MSE was averaged over.
    pub evaluated_inputs: usize,
}

impl LossCurve {
    pub fn final_mse(&self) -> f64 {
        self.points.last().map_or(f64::NAN, |p| p.mse)
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    fn step(&mut self, theta: &mut [f64], grad: &[f64], cfg: &TrainConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        for ((w, g), (m, v)) in theta.iter_mut().zip(grad).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            *w -= cfg.learning_rate * (*m / c1) / ((*v / c2).sqrt() + cfg.epsilon);
        }
    }
}

/// Input index as the ±1 sequence fed to the network, position 1 first.
pub fn input_sequence(index: usize, arity: usize) -> Vec<f64> {
    signs_of_index(index, arity).into_iter().map(f64::from).collect()
}

/// Outputs of the network on every input of a table of the given arity.
pub fn tabulate(params: &LstmParams, arity: usize) -> Vec<f64> {
    (0..1usize << arity).map(|x| forward(params, &input_sequence(x, arity))).collect()
}

/// MSE of `params` against `target` over the given inputs.
pub fn mse(params: &LstmParams, target: &TruthTable, inputs: &[usize]) -> f64 {
    let n = target.arity();
    let total: f64 = inputs
        .iter()
        .map(|&x| {
            let r = forward(params, &input_sequence(x, n)) - target.values()[x];
            r * r
        })
        .sum();
    total / inputs.len() as f64
}

fn evaluation_inputs(target: &TruthTable, seed: u64) -> Vec<usize> {
    if target.arity() <= MAX_EXACT_MSE_ARITY {
        (0..target.len()).collect()
    } else {
        let mut rng = rng_from_seed(trial_seed(seed, "held-in", 0));
        (0..HELD_IN_SAMPLE).map(|_| rng.random_range(0..target.len())).collect()
    }
}

/// Trains `params` on `target` with Adam, recording the MSE at each checkpoint.
///
/// Batches are drawn uniformly with replacement from all `2^n` inputs.
/// Returns [`Error::Diverged`] when a batch loss or parameter stops being finite.
pub fn train_fit(target: &TruthTable, params: &mut LstmParams, config: &TrainConfig) -> Result<LossCurve> {
    config.validate()?;
    let n = target.arity();
    let eval = evaluation_inputs(target, config.seed);
    let mut rng = rng_from_seed(trial_seed(config.seed, "batches", 0));
    let mut adam = Adam::new(params.as_slice().len());
    let mut points = Vec::with_capacity(config.checkpoints.len());
    let mut next = 0;
    let last = *config.checkpoints.last().expect("validated nonempty");
    for iteration in 1..=last {
        let idx: Vec<usize> = (0..config.batch_size).map(|_| rng.random_range(0..target.len())).collect();
        let inputs: Vec<Vec<f64>> = idx.iter().map(|&x| input_sequence(x, n)).collect();
        let targets: Vec<f64> = idx.iter().map(|&x| target.values()[x]).collect();
        let (loss, grad) = loss_and_gradient(params, &inputs, &targets)?;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged { iteration });
        }
        adam.step(params.as_mut_slice(), &grad, config);
        if config.checkpoints[next] == iteration {
            let value = mse(params, target, &eval);
            if !value.is_finite() {
                return Err(Error::Diverged { iteration });
            }
            points.push(CheckpointLoss { iteration, mse: value });
            next += 1;
        }
    }
    Ok(LossCurve {
        points,
        evaluated_inputs: eval.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rnnlab::InitMode;

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = [
            TrainConfig {
                learning_rate: 0.0,
                ..Default::default()
            },
            TrainConfig {
                checkpoints: vec![10, 10],
                ..Default::default()
            },
            TrainConfig {
                checkpoints: vec![],
                ..Default::default()
            },
            TrainConfig {
                batch_size: 0,
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn checkpoints_recorded_and_deterministic() {
        let target = TruthTable::parity(3).unwrap();
        let cfg = TrainConfig {
            checkpoints: vec![5, 20, 40],
            seed: 9,
            ..Default::default()
        };
        let run = || {
            let mut p = LstmParams::init(InitMode::Uniform, 4, 1).unwrap();
            (train_fit(&target, &mut p, &cfg).unwrap(), p)
        };
        let (a, pa) = run();
        let (b, pb) = run();
        assert_eq!(a, b);
        assert_eq!(pa, pb);
        let iters: Vec<usize> = a.points.iter().map(|p| p.iteration).collect();
        assert_eq!(iters, [5, 20, 40]);
        assert_eq!(a.evaluated_inputs, 8);
    }

    #[test]
    fn huge_rate_diverges() {
        let target = TruthTable::parity(3).unwrap();
        let mut p = LstmParams::init(InitMode::Uniform, 2, 0).unwrap();
        p.as_mut_slice().iter_mut().for_each(|w| *w = 1e300);
        let cfg = TrainConfig {
            checkpoints: vec![3],
            ..Default::default()
        };
        assert!(matches!(train_fit(&target, &mut p, &cfg), Err(Error::Diverged { .. })));
    }

    #[test]
    fn held_in_sample_for_large_arity() {
        let target = TruthTable::constant(11, 0.5).unwrap();
        assert_eq!(evaluation_inputs(&target, 1).len(), HELD_IN_SAMPLE);
    }
}
