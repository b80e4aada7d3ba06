use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{inverse_walsh_hadamard, FourierSpectrum, TruthTable, MAX_ARITY};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Uniformly random Boolean function: each output is ±1 with probability 1/2.
pub fn sample_random_boolean(arity: usize, seed: u64) -> Result<TruthTable> {
    if arity == 0 || arity > MAX_ARITY {
        return Err(Error::invalid(format!("arity must be in 1..={MAX_ARITY}, got {arity}")));
    }
    let mut rng = rng_from_seed(seed);
    TruthTable::new(
        arity,
        (0..1usize << arity)
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect(),
    )
}

/// Real-valued function whose spectrum lives on degrees `{level-1, level, level+1}`.
///
/// Every coefficient at a degree in that band (clipped to `1..=n`; the constant
/// term is never used) is standard normal, then the spectrum is rescaled to
/// unit squared mass. The result has `E[f] = 0`, `E[f^2] = 1` and total
/// influence in `[max(1, level-1), min(n, level+1)]`.
pub fn sample_spectrum_concentrated(arity: usize, level: usize, seed: u64) -> Result<TruthTable> {
    if arity == 0 || arity > MAX_ARITY {
        return Err(Error::invalid(format!("arity must be in 1..={MAX_ARITY}, got {arity}")));
    }
    if level == 0 || level > arity {
        return Err(Error::invalid(format!("level must be in 1..={arity}, got {level}")));
    }
    let lo = level.saturating_sub(1).max(1);
    let hi = (level + 1).min(arity);
    let mut rng = rng_from_seed(seed);
    let mut coefficients: Vec<f64> = (0..1usize << arity)
        .map(|mask| {
            let degree = mask.count_ones() as usize;
            if (lo..=hi).contains(&degree) {
                rng.sample(StandardNormal)
            } else {
                0.0
            }
        })
        .collect();
    let norm = coefficients.iter().map(|c| c * c).sum::<f64>().sqrt();
    coefficients.iter_mut().for_each(|c| *c /= norm);
    Ok(inverse_walsh_hadamard(&FourierSpectrum::new(arity, coefficients)?))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Binarized {
    pub table: TruthTable,
    /// Inputs with output strictly above this value map to +1.
    pub threshold: f64,
    /// All outputs were equal, so the table is constant.
    pub degenerate: bool,
}

/// Turns real outputs over all `2^n` inputs into a ±1 table with maximal variance.
///
/// The cut `v > t` is chosen among the distinct output values so that the
/// +1/-1 split is as balanced as possible, which maximizes `1 - mean^2`; when
/// outputs are distinct this is the lower median. Equally balanced cuts
/// resolve to the lower threshold.
pub fn threshold_binarize(outputs: &[f64]) -> Result<Binarized> {
    let len = outputs.len();
    if !len.is_power_of_two() || len < 2 {
        return Err(Error::invalid(format!("need 2^n outputs with n >= 1, got {len}")));
    }
    if outputs.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("outputs contain a non-finite value"));
    }
    let arity = len.trailing_zeros() as usize;
    let mut sorted = outputs.to_vec();
    sorted.sort_by(f64::total_cmp);

    // Cutting after the last copy of sorted[i] leaves len - (i + 1) values above.
    let mut threshold = sorted[len - 1];
    let mut best_gap = len;
    let mut i = 0;
    while i < len {
        let mut j = i;
        while j + 1 < len && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let above = len - (j + 1);
        let gap = (2 * above).abs_diff(len);
        if gap < best_gap {
            best_gap = gap;
            threshold = sorted[i];
        }
        i = j + 1;
    }
    let degenerate = sorted[0] == sorted[len - 1];
    let table = TruthTable::new(
        arity,
        outputs.iter().map(|&v| if v > threshold { 1.0 } else { -1.0 }).collect(),
    )?;
    Ok(Binarized {
        table,
        threshold,
        degenerate,
    })
}

/// Serializable summary of a binarization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinarizeSummary {
    pub threshold: f64,
    pub degenerate: bool,
    pub variance: f64,
}

impl Binarized {
    pub fn summary(&self) -> BinarizeSummary {
        BinarizeSummary {
            threshold: self.threshold,
            degenerate: self.degenerate,
            variance: self.table.variance(),
        }
    }
}
