//! Reference neighbor samplers: exact enumeration, Markov-chain Gibbs infilling
//! and independent uniform draws.

use std::collections::HashMap;
use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng as _;

use super::{IndexSet, NeighborSampler, Sequence, TokenId, Vocabulary};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Default bound on `|Σ|^|P|` for exhaustive enumeration.
pub const DEFAULT_ENUMERATION_CAP: u128 = 4096;

/// Unnormalized log-probability of a whole sequence.
pub trait SequenceLogWeight: Send + Sync {
    fn name(&self) -> String;
    fn log_weight(&self, x: &Sequence) -> f64;
}

/// Every sequence equally likely.
#[derive(Clone, Copy, Debug, Default)]
pub struct UniformWeight;

impl SequenceLogWeight for UniformWeight {
    fn name(&self) -> String {
        "uniform".into()
    }

    fn log_weight(&self, _x: &Sequence) -> f64 {
        0.0
    }
}

const BOS: TokenId = TokenId::MAX;

#[derive(Debug, Default)]
struct ContextCounts {
    total: f64,
    next: HashMap<TokenId, f64>,
}

/// Add-λ smoothed order-`k` Markov model with start-of-sequence padding.
#[derive(Debug)]
pub struct MarkovModel {
    order: usize,
    smoothing: f64,
    /// Distinct corpus tokens, sorted by their text.
    alphabet: Vec<TokenId>,
    contexts: HashMap<Box<[TokenId]>, ContextCounts>,
}

impl MarkovModel {
    pub fn fit(order: usize, smoothing: f64, corpus: &[Sequence], vocab: &Vocabulary) -> Result<Self> {
        if order == 0 {
            return Err(Error::invalid("Markov order must be at least 1"));
        }
        if !(smoothing > 0.0 && smoothing.is_finite()) {
            return Err(Error::invalid(format!("smoothing must be positive, got {smoothing}")));
        }
        if corpus.is_empty() {
            return Err(Error::invalid("Markov corpus is empty"));
        }
        let mut contexts: HashMap<Box<[TokenId]>, ContextCounts> = HashMap::new();
        let mut seen: HashMap<TokenId, ()> = HashMap::new();
        let mut padded = Vec::new();
        for s in corpus {
            padded.clear();
            padded.extend(std::iter::repeat_n(BOS, order));
            padded.extend_from_slice(s.ids());
            for j in order..padded.len() {
                let entry = contexts.entry(padded[j - order..j].into()).or_default();
                entry.total += 1.0;
                *entry.next.entry(padded[j]).or_default() += 1.0;
                seen.insert(padded[j], ());
            }
        }
        let mut alphabet: Vec<TokenId> = seen.into_keys().collect();
        let text = |id: TokenId| vocab.token(id).map(|t| t.to_string()).unwrap_or_default();
        alphabet.sort_by_cached_key(|&id| text(id));
        Ok(Self {
            order,
            smoothing,
            alphabet,
            contexts,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    pub fn alphabet(&self) -> &[TokenId] {
        &self.alphabet
    }

    /// `P(token | context)`, where `context` holds exactly `order` ids
    /// (padding included).
    pub fn conditional(&self, context: &[TokenId], token: TokenId) -> f64 {
        let denom_extra = self.smoothing * self.alphabet.len() as f64;
        match self.contexts.get(context) {
            Some(c) => (c.next.get(&token).copied().unwrap_or(0.0) + self.smoothing) / (c.total + denom_extra),
            None => self.smoothing / denom_extra,
        }
    }

    fn padded(&self, x: &[TokenId]) -> Vec<TokenId> {
        let mut padded = vec![BOS; self.order];
        padded.extend_from_slice(x);
        padded
    }

    /// Log-probability of the tokens at padded offsets `from..to`.
    fn log_prob_range(&self, padded: &[TokenId], from: usize, to: usize) -> f64 {
        (from..to)
            .map(|j| self.conditional(&padded[j - self.order..j], padded[j]).ln())
            .sum()
    }

    pub fn log_prob(&self, x: &Sequence) -> f64 {
        let padded = self.padded(x.ids());
        self.log_prob_range(&padded, self.order, padded.len())
    }
}

impl SequenceLogWeight for MarkovModel {
    fn name(&self) -> String {
        format!("markov:k={}", self.order)
    }

    fn log_weight(&self, x: &Sequence) -> f64 {
        self.log_prob(x)
    }
}

/// Enumerates `x^{⊕P}` over an alphabet and draws weighted samples from it.
pub struct ExhaustiveSampler {
    alphabet: Vec<TokenId>,
    weighting: Arc<dyn SequenceLogWeight>,
    cap: u128,
}

impl ExhaustiveSampler {
    pub fn new(alphabet: Vec<TokenId>, weighting: Arc<dyn SequenceLogWeight>) -> Result<Self> {
        if alphabet.is_empty() {
            return Err(Error::invalid("sampler alphabet is empty"));
        }
        let mut sorted = alphabet.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != alphabet.len() {
            return Err(Error::invalid("sampler alphabet has duplicate tokens"));
        }
        Ok(Self {
            alphabet,
            weighting,
            cap: DEFAULT_ENUMERATION_CAP,
        })
    }

    pub fn uniform(alphabet: Vec<TokenId>) -> Result<Self> {
        Self::new(alphabet, Arc::new(UniformWeight))
    }

    pub fn with_cap(mut self, cap: u128) -> Self {
        self.cap = cap;
        self
    }

    /// Completions in odometer order, the lowest position of `P` cycling
    /// fastest through the alphabet.
    fn completions(&self, x: &Sequence, subset: &IndexSet) -> Result<Vec<Sequence>> {
        let positions: Vec<usize> = subset.positions().collect();
        if subset.max_position() > x.len() {
            return Err(Error::invalid(format!("subset {subset:?} exceeds length {}", x.len())));
        }
        let a = self.alphabet.len() as u128;
        let size = u32::try_from(positions.len())
            .ok()
            .and_then(|k| a.checked_pow(k))
            .unwrap_or(u128::MAX);
        if size > self.cap {
            return Err(Error::EnumerationCap { size, cap: self.cap });
        }
        let mut digits = vec![0usize; positions.len()];
        let mut out = Vec::with_capacity(size as usize);
        let mut current = x.clone();
        for _ in 0..size {
            {
                let ids = current.ids_mut();
                for (&p, &d) in positions.iter().zip(&digits) {
                    ids[p - 1] = self.alphabet[d];
                }
            }
            out.push(current.clone());
            for d in digits.iter_mut() {
                *d += 1;
                if *d < self.alphabet.len() {
                    break;
                }
                *d = 0;
            }
        }
        Ok(out)
    }

    fn weighted(&self, x: &Sequence, subset: &IndexSet) -> Result<Vec<(Sequence, f64)>> {
        let all = self.completions(x, subset)?;
        let logs: Vec<f64> = all.iter().map(|s| self.weighting.log_weight(s)).collect();
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !top.is_finite() {
            return Err(Error::Degenerate(format!("no completion of {subset:?} has positive weight")));
        }
        let raw: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = raw.iter().sum();
        Ok(all.into_iter().zip(raw).map(|(s, w)| (s, w / total)).collect())
    }
}

impl NeighborSampler for ExhaustiveSampler {
    fn name(&self) -> String {
        format!("exhaustive:{}", self.weighting.name())
    }

    fn sample(&self, x: &Sequence, subset: &IndexSet, m: usize, seed: u64) -> Result<Vec<Sequence>> {
        let weighted = self.weighted(x, subset)?;
        let dist = WeightedIndex::new(weighted.iter().map(|(_, w)| *w))
            .map_err(|e| Error::Degenerate(format!("cannot sample completions: {e}")))?;
        let mut rng = rng_from_seed(seed);
        Ok((0..m).map(|_| weighted[dist.sample(&mut rng)].0.clone()).collect())
    }

    fn enumerate(&self, x: &Sequence, subset: &IndexSet) -> Option<Result<Vec<(Sequence, f64)>>> {
        Some(self.weighted(x, subset))
    }
}

pub const DEFAULT_BURN_IN: usize = 20;
pub const DEFAULT_THINNING: usize = 5;

/// Gibbs infilling under a [`MarkovModel`]: sweeps the positions of `P` in
/// ascending order, resampling each from its full conditional.
pub struct MarkovGibbsSampler {
    model: Arc<MarkovModel>,
    burn_in: usize,
    thinning: usize,
}

impl MarkovGibbsSampler {
    pub fn new(model: Arc<MarkovModel>) -> Self {
        Self {
            model,
            burn_in: DEFAULT_BURN_IN,
            thinning: DEFAULT_THINNING,
        }
    }

    pub fn with_schedule(mut self, burn_in: usize, thinning: usize) -> Result<Self> {
        if thinning == 0 {
            return Err(Error::invalid("thinning must be at least 1"));
        }
        self.burn_in = burn_in;
        self.thinning = thinning;
        Ok(self)
    }

    pub fn model(&self) -> &Arc<MarkovModel> {
        &self.model
    }

    fn sweep(&self, padded: &mut [TokenId], positions: &[usize], logs: &mut [f64], rng: &mut crate::rng::Rng) {
        let k = self.model.order;
        let n = padded.len() - k;
        for &p in positions {
            let j = p - 1 + k;
            // only the factors at offsets j..=j+k mention position p
            let end = (j + k + 1).min(k + n);
            for (slot, &tok) in logs.iter_mut().zip(&self.model.alphabet) {
                padded[j] = tok;
                *slot = self.model.log_prob_range(padded, j, end);
            }
            let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let total: f64 = logs.iter().map(|l| (l - top).exp()).sum();
            let mut u = rng.random::<f64>() * total;
            let mut pick = logs.len() - 1;
            for (i, l) in logs.iter().enumerate() {
                u -= (l - top).exp();
                if u < 0.0 {
                    pick = i;
                    break;
                }
            }
            padded[j] = self.model.alphabet[pick];
        }
    }
}

impl NeighborSampler for MarkovGibbsSampler {
    fn name(&self) -> String {
        format!(
            "markov:k={},lambda={},burn_in={},thin={}",
            self.model.order, self.model.smoothing, self.burn_in, self.thinning
        )
    }

    fn sample(&self, x: &Sequence, subset: &IndexSet, m: usize, seed: u64) -> Result<Vec<Sequence>> {
        if subset.max_position() > x.len() {
            return Err(Error::invalid(format!("subset {subset:?} exceeds length {}", x.len())));
        }
        let k = self.model.order;
        let positions: Vec<usize> = subset.positions().collect();
        let mut padded = self.model.padded(x.ids());
        let mut logs = vec![0.0; self.model.alphabet.len()];
        let mut rng = rng_from_seed(seed);
        for _ in 0..self.burn_in {
            self.sweep(&mut padded, &positions, &mut logs, &mut rng);
        }
        let mut out = Vec::with_capacity(m);
        for i in 0..m {
            if i > 0 {
                for _ in 0..self.thinning {
                    self.sweep(&mut padded, &positions, &mut logs, &mut rng);
                }
            }
            out.push(Sequence::new(padded[k..].to_vec())?);
        }
        Ok(out)
    }
}

/// Independent uniform tokens at every position of `P`.
pub struct UniformSampler {
    alphabet: Vec<TokenId>,
}

impl UniformSampler {
    pub fn new(alphabet: Vec<TokenId>) -> Result<Self> {
        if alphabet.is_empty() {
            return Err(Error::invalid("sampler alphabet is empty"));
        }
        Ok(Self { alphabet })
    }
}

impl NeighborSampler for UniformSampler {
    fn name(&self) -> String {
        "uniform".into()
    }

    fn sample(&self, x: &Sequence, subset: &IndexSet, m: usize, seed: u64) -> Result<Vec<Sequence>> {
        if subset.max_position() > x.len() {
            return Err(Error::invalid(format!("subset {subset:?} exceeds length {}", x.len())));
        }
        let mut rng = rng_from_seed(seed);
        Ok((0..m)
            .map(|_| {
                let mut s = x.clone();
                let ids = s.ids_mut();
                for p in subset.positions() {
                    ids[p - 1] = self.alphabet[rng.random_range(0..self.alphabet.len())];
                }
                s
            })
            .collect())
    }
}
