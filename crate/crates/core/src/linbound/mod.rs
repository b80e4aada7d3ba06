//! Windowed averaging models `f(x) = h((1/n) sum_i f_i(window_i))` and exact
//! checks of their block-sensitivity bound `bs(f, x) <= 2 L^2 C^2 k^2`.
//!
//! Window `i` (for `i = 1..=n-k`) holds the `k` symbols `x_i .. x_{i+k-1}`,
//! so every position lies in at most `k` windows. The average divides by `n`
//! although there are `n - k` summands.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boolfn::{partition, GridTable, TruthTable, MAX_EXACT_BS_ARITY, MAX_EXHAUSTIVE_AVERAGE_ARITY};
use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, trial_seed};

/// Squashing function applied after the affine readout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    Identity,
    Tanh,
    /// `2 sigma(z) - 1`, the logistic function rescaled to `[-1,1]`.
    Logistic,
}

impl Head {
    pub const ALL: [Head; 3] = [Head::Identity, Head::Tanh, Head::Logistic];

    pub fn apply(self, z: f64) -> f64 {
        match self {
            Head::Identity => z,
            Head::Tanh => z.tanh(),
            Head::Logistic => 2.0 / (1.0 + (-z).exp()) - 1.0,
        }
    }

    /// Lipschitz constant of the squashing function. The rescaled logistic
    /// has slope `2 sigma'(0) = 1/2` at most.
    pub fn lipschitz(self) -> f64 {
        match self {
            Head::Identity | Head::Tanh => 1.0,
            Head::Logistic => 0.5,
        }
    }
}

impl std::str::FromStr for Head {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Head::Identity),
            "tanh" => Ok(Head::Tanh),
            "logistic" => Ok(Head::Logistic),
            _ => Err(Error::invalid(format!("unknown head {s:?}"))),
        }
    }
}

/// Largest finite-difference slope of `head` on a grid over `[-12, 12]`.
pub fn audit_lipschitz(head: Head) -> f64 {
    let h = 1e-4;
    (0..240_000)
        .map(|i| {
            let z = -12.0 + i as f64 * h;
            (head.apply(z + h) - head.apply(z)).abs() / h
        })
        .fold(0.0, f64::max)
}

/// The model for one sequence length `n` over alphabet `{0, .., radix-1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KGramAveragingModel {
    pub k: usize,
    pub n: usize,
    pub radix: usize,
    pub feature_dim: usize,
    /// `features[i][w]` is the vector of window `i+1` on the window string
    /// with mixed-radix index `w` (first symbol least significant).
    features: Vec<Vec<Vec<f64>>>,
    weights: Vec<f64>,
    bias: f64,
    head: Head,
    /// Largest feature norm actually present.
    c: f64,
    /// `||w||_2` times the head's Lipschitz constant.
    l: f64,
}

impl KGramAveragingModel {
    pub fn new(
        k: usize,
        n: usize,
        radix: usize,
        features: Vec<Vec<Vec<f64>>>,
        weights: Vec<f64>,
        bias: f64,
        head: Head,
    ) -> Result<Self> {
        if k == 0 || n <= k {
            return Err(Error::invalid(format!("need 1 <= k < n, got k = {k}, n = {n}")));
        }
        if radix < 2 {
            return Err(Error::invalid("alphabet needs at least two symbols"));
        }
        let dim = weights.len();
        if dim == 0 {
            return Err(Error::invalid("feature dimension must be at least 1"));
        }
        let windows = radix
            .checked_pow(k as u32)
            .ok_or_else(|| Error::invalid("window table too large"))?;
        if features.len() != n - k {
            return Err(Error::invalid(format!("expected {} feature maps, got {}", n - k, features.len())));
        }
        let mut c = 0.0f64;
        for map in &features {
            if map.len() != windows {
                return Err(Error::invalid(format!("each feature map needs {windows} entries")));
            }
            for v in map {
                if v.len() != dim || v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::invalid(format!("feature vectors must be finite with dimension {dim}")));
                }
                c = c.max(norm(v));
            }
        }
        if weights.iter().any(|w| !w.is_finite()) || !bias.is_finite() {
            return Err(Error::invalid("head parameters must be finite"));
        }
        let l = norm(&weights) * head.lipschitz();
        Ok(Self {
            k,
            n,
            radix,
            feature_dim: dim,
            features,
            weights,
            bias,
            head,
            c,
            l,
        })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn feature(&self, window: usize, index: usize) -> &[f64] {
        &self.features[window][index]
    }

    /// `2 L^2 C^2 k^2`.
    pub fn bound(&self) -> f64 {
        2.0 * self.l * self.l * self.c * self.c * (self.k * self.k) as f64
    }

    /// Bound on the variance of a single block of `size` positions.
    pub fn block_bound(&self, size: usize) -> f64 {
        self.bound() * (size * size) as f64 / (self.n * self.n) as f64
    }

    /// `f(x)` for a string of symbol indices of length `n`.
    pub fn evaluate(&self, x: &[usize]) -> Result<f64> {
        if x.len() != self.n {
            return Err(Error::invalid(format!("model is defined for length {}, got {}", self.n, x.len())));
        }
        if let Some(s) = x.iter().find(|&&s| s >= self.radix) {
            return Err(Error::invalid(format!("symbol {s} outside alphabet of size {}", self.radix)));
        }
        Ok(self.evaluate_unchecked(x))
    }

    fn evaluate_unchecked(&self, x: &[usize]) -> f64 {
        let mut g = vec![0.0; self.feature_dim];
        for (i, map) in self.features.iter().enumerate() {
            let w = x[i..i + self.k].iter().rev().fold(0, |acc, &s| acc * self.radix + s);
            g.iter_mut().zip(&map[w]).for_each(|(a, b)| *a += b);
        }
        let inv_n = 1.0 / self.n as f64;
        let z: f64 = g.iter().zip(&self.weights).map(|(a, w)| a * inv_n * w).sum::<f64>() + self.bias;
        self.head.apply(z)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Model with feature vectors uniform in the ball of radius `c_cap` and
/// standard normal head weights and bias.
pub fn random_model(
    k: usize,
    feature_dim: usize,
    c_cap: f64,
    head: Head,
    n: usize,
    radix: usize,
    seed: u64,
) -> Result<KGramAveragingModel> {
    if !(c_cap > 0.0 && c_cap.is_finite()) {
        return Err(Error::invalid(format!("C cap must be positive, got {c_cap}")));
    }
    if feature_dim == 0 {
        return Err(Error::invalid("feature dimension must be at least 1"));
    }
    if k == 0 || n <= k {
        return Err(Error::invalid(format!("need 1 <= k < n, got k = {k}, n = {n}")));
    }
    let windows = radix
        .checked_pow(k as u32)
        .filter(|&w| w <= 1 << 16)
        .ok_or_else(|| Error::invalid("window table too large"))?;
    let mut rng = rng_from_seed(seed);
    let mut ball = || -> Vec<f64> {
        loop {
            let g: Vec<f64> = (0..feature_dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let len = norm(&g);
            if len > 0.0 {
                let radius = c_cap * rng.random::<f64>().powf(1.0 / feature_dim as f64);
                return g.into_iter().map(|x| x / len * radius).collect();
            }
        }
    };
    let features: Vec<Vec<Vec<f64>>> = (0..n - k).map(|_| (0..windows).map(|_| ball()).collect()).collect();
    let weights: Vec<f64> = (0..feature_dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let bias: f64 = StandardNormal.sample(&mut rng);
    KGramAveragingModel::new(k, n, radix, features, weights, bias, head)
}

/// Inputs certified when the input space is sampled.
pub const CERTIFY_SAMPLE: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub k: usize,
    pub n: usize,
    pub radix: usize,
    pub c: f64,
    pub l: f64,
    /// `2 L^2 C^2 k^2`.
    pub bound: f64,
    pub max_bs: f64,
    /// `max_bs / bound`, or 0 when the bound is 0.
    pub ratio: f64,
    pub inputs_checked: usize,
    pub exhaustive: bool,
    /// Inputs with `bs(f, x)` above the bound.
    pub violations: usize,
    /// `(input, block)` pairs whose variance exceeds `2 L^2 C^2 k^2 |P|^2 / n^2`.
    pub block_violations: usize,
    pub passed: bool,
}

fn exceeds(value: f64, bound: f64) -> bool {
    value > bound * (1.0 + 1e-9) + 1e-12
}

/// Tabulates `model` over `Σ^n` and computes `bs(f, x)` exactly at every
/// input (or at [`CERTIFY_SAMPLE`] seeded inputs when `|Σ|^n > 2^10`).
pub fn certify_bound(model: &KGramAveragingModel, seed: u64) -> Result<Certificate> {
    let n = model.n;
    if n > MAX_EXACT_BS_ARITY {
        return Err(Error::ArityTooLarge {
            arity: n,
            limit: MAX_EXACT_BS_ARITY,
            what: "bound certification",
        });
    }
    let grid = GridTable::from_fn(model.radix, n, |s| model.evaluate_unchecked(s))?;
    let binary = (model.radix == 2).then(|| TruthTable::new_unbounded(n, grid.values().to_vec())).transpose()?;
    let size = grid.len();
    let exhaustive = size <= 1 << MAX_EXHAUSTIVE_AVERAGE_ARITY;
    let inputs: Vec<usize> = if exhaustive {
        (0..size).collect()
    } else {
        let mut rng = rng_from_seed(seed);
        (0..CERTIFY_SAMPLE).map(|_| rng.random_range(0..size)).collect()
    };
    let bound = model.bound();
    let per_input: Vec<(f64, usize)> = inputs
        .par_iter()
        .map(|&x| {
            let weights = match &binary {
                Some(t) => t.all_subset_variances(x)?,
                None => grid.all_subset_variances(x)?,
            };
            let block_violations = weights
                .iter()
                .enumerate()
                .skip(1)
                .filter(|(mask, w)| exceeds(**w, model.block_bound(mask.count_ones() as usize)))
                .count();
            Ok((partition::best_partition(n, &weights).value, block_violations))
        })
        .collect::<Result<_>>()?;
    let max_bs = per_input.iter().map(|p| p.0).fold(0.0, f64::max);
    let violations = per_input.iter().filter(|p| exceeds(p.0, bound)).count();
    let block_violations = per_input.iter().map(|p| p.1).sum();
    Ok(Certificate {
        k: model.k,
        n,
        radix: model.radix,
        c: model.c,
        l: model.l,
        bound,
        max_bs,
        ratio: if bound > 0.0 { max_bs / bound } else { 0.0 },
        inputs_checked: inputs.len(),
        exhaustive,
        violations,
        block_violations,
        passed: violations == 0 && block_violations == 0,
    })
}

/// Settings for a batch of random certifications.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrialConfig {
    pub trials: usize,
    /// Window sizes cycled through across trials.
    pub ks: Vec<usize>,
    /// Lengths are drawn from `k+1 ..= max_n`.
    pub max_n: usize,
    pub radix: usize,
    pub feature_dim: usize,
    pub c_cap: f64,
    pub seed: u64,
}

impl Default for TrialConfig {
    fn default() -> Self {
        Self {
            trials: 100,
            ks: vec![1, 2, 3],
            max_n: 12,
            radix: 2,
            feature_dim: 3,
            c_cap: 1.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trials: usize,
    pub violations: usize,
    pub block_violations: usize,
    pub max_ratio: f64,
    pub lipschitz_audit: Vec<(Head, f64)>,
    pub certificates: Vec<Certificate>,
}

/// Certifies `trials` random models; trial `t` uses window size
/// `ks[t % ks.len()]`, head `t % 3` and its own derived seed.
pub fn run_trials(config: &TrialConfig) -> Result<TrialSummary> {
    if config.ks.is_empty() || config.ks.iter().any(|&k| k == 0 || k >= config.max_n) {
        return Err(Error::invalid("window sizes must lie in 1..max_n"));
    }
    let certificates = (0..config.trials)
        .map(|t| {
            let seed = trial_seed(config.seed, "linbound", t as u64);
            let mut rng = rng_from_seed(seed);
            let k = config.ks[t % config.ks.len()];
            let n = rng.random_range(k + 1..=config.max_n);
            let head = Head::ALL[t % Head::ALL.len()];
            let model = random_model(k, config.feature_dim, config.c_cap, head, n, config.radix, rng.random())?;
            certify_bound(&model, rng.random())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrialSummary {
        trials: certificates.len(),
        violations: certificates.iter().map(|c| c.violations).sum(),
        block_violations: certificates.iter().map(|c| c.block_violations).sum(),
        max_ratio: certificates.iter().map(|c| c.ratio).fold(0.0, f64::max),
        lipschitz_audit: Head::ALL.iter().map(|&h| (h, audit_lipschitz(h))).collect(),
        certificates,
    })
}
