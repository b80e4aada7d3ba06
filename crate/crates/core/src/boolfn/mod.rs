//! Exact analysis of functions on the hypercube `{-1,1}^n`.
//!
//! A function is stored as a [`TruthTable`] of `2^n` reals. Input `x` maps to
//! the index `sum_i b_i 2^(i-1)` with `b_i = (1 - x_i) / 2`: position 1 is the
//! least significant bit, and a set bit means the coordinate is `-1`.
//!
//! All variances are population variances under the uniform distribution on
//! the relevant subcube.

mod fourier;
mod grid;
mod io;
pub mod partition;
mod sample;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, Rng};
use crate::stats;

pub use fourier::{inverse_walsh_hadamard, walsh_hadamard, FourierSpectrum};
pub use grid::{GridTable, MAX_GRID_LEN};
pub use io::{read_table, write_table, TableFormat};
pub use partition::BestPartition;
pub use sample::{
    sample_random_boolean, sample_spectrum_concentrated, threshold_binarize, BinarizeSummary, Binarized,
};

/// Largest supported arity for truth tables.
pub const MAX_ARITY: usize = 20;
/// Largest arity for which block sensitivity is computed exactly (3^n work per input).
pub const MAX_EXACT_BS_ARITY: usize = 14;
/// Up to this arity the average block sensitivity averages over every input.
pub const MAX_EXHAUSTIVE_AVERAGE_ARITY: usize = 10;

/// Set of coordinate positions, bit `i-1` standing for position `i`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SubsetMask(u32);

impl SubsetMask {
    pub fn new(bits: u32, arity: usize) -> Result<Self> {
        if arity < 32 && bits >> arity != 0 {
            return Err(Error::invalid(format!(
                "mask {bits:#b} sets positions beyond arity {arity}"
            )));
        }
        Ok(Self(bits))
    }

    /// Mask from 1-based positions.
    pub fn from_positions(positions: &[usize], arity: usize) -> Result<Self> {
        let mut bits = 0u32;
        for &p in positions {
            if p == 0 || p > arity {
                return Err(Error::invalid(format!("position {p} outside 1..={arity}")));
            }
            bits |= 1 << (p - 1);
        }
        Ok(Self(bits))
    }

    pub fn full(arity: usize) -> Self {
        Self(((1u64 << arity) - 1) as u32)
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// 1-based positions in increasing order.
    pub fn positions(self) -> Vec<usize> {
        (0..32).filter(|i| self.0 >> i & 1 == 1).map(|i| i + 1).collect()
    }
}

/// Iterates all submasks of `mask` (including 0 and `mask`) in increasing order.
pub(crate) fn submasks(mask: u32) -> impl Iterator<Item = u32> {
    let mut next = Some(0u32);
    std::iter::from_fn(move || {
        let cur = next?;
        let succ = cur.wrapping_sub(mask) & mask;
        next = if succ == 0 { None } else { Some(succ) };
        Some(cur)
    })
}

/// Exhaustive table of a function `{-1,1}^n -> R`.
#[derive(Clone, Debug, PartialEq)]
pub struct TruthTable {
    arity: usize,
    values: Vec<f64>,
    boolean: bool,
    bounded: bool,
}

impl TruthTable {
    /// Table with every value in `[-1, 1]`.
    pub fn new(arity: usize, values: Vec<f64>) -> Result<Self> {
        let table = Self::new_unbounded(arity, values)?;
        if !table.bounded {
            return Err(Error::invalid("truth table values must lie in [-1, 1]"));
        }
        Ok(table)
    }

    /// Table of arbitrary finite reals, e.g. a normalized Fourier sample whose
    /// second moment is 1 but whose values may leave `[-1, 1]`.
    pub fn new_unbounded(arity: usize, values: Vec<f64>) -> Result<Self> {
        if arity == 0 || arity > MAX_ARITY {
            return Err(Error::invalid(format!("arity must be in 1..={MAX_ARITY}, got {arity}")));
        }
        if values.len() != 1 << arity {
            return Err(Error::invalid(format!(
                "arity {arity} needs {} values, got {}",
                1usize << arity,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("truth table contains a non-finite value"));
        }
        let boolean = values.iter().all(|&v| v == 1.0 || v == -1.0);
        let bounded = values.iter().all(|v| (-1.0..=1.0).contains(v));
        Ok(Self {
            arity,
            values,
            boolean,
            bounded,
        })
    }

    /// Tabulates `f` over all inputs; `f` receives the input index.
    pub fn from_fn(arity: usize, f: impl Fn(usize) -> f64) -> Result<Self> {
        if arity == 0 || arity > MAX_ARITY {
            return Err(Error::invalid(format!("arity must be in 1..={MAX_ARITY}, got {arity}")));
        }
        Self::new_unbounded(arity, (0..1usize << arity).map(f).collect())
    }

    pub fn parity(arity: usize) -> Result<Self> {
        Self::from_fn(arity, |x| if x.count_ones() % 2 == 0 { 1.0 } else { -1.0 })
    }

    pub fn constant(arity: usize, value: f64) -> Result<Self> {
        Self::new(arity, vec![value; 1usize.checked_shl(arity as u32).unwrap_or(0)])
    }

    /// Majority of the coordinates; ties (even arity) map to +1.
    pub fn majority(arity: usize) -> Result<Self> {
        Self::from_fn(arity, |x| {
            let minus = x.count_ones() as usize;
            if 2 * minus > arity {
                -1.0
            } else {
                1.0
            }
        })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// True iff every value is exactly -1 or +1.
    pub fn is_boolean(&self) -> bool {
        self.boolean
    }

    /// True iff every value lies in `[-1, 1]`.
    pub fn is_bounded(&self) -> bool {
        self.bounded
    }

    pub fn value(&self, x: usize) -> Result<f64> {
        self.check_index(x)?;
        Ok(self.values[x])
    }

    fn check_index(&self, x: usize) -> Result<()> {
        if x >= self.values.len() {
            return Err(Error::IndexOutOfRange {
                index: x,
                arity: self.arity,
            });
        }
        Ok(())
    }

    /// Population variance of the values.
    pub fn variance(&self) -> f64 {
        stats::population_variance(&self.values)
    }

    /// `s(f, x) = sum_i Var(f | all coordinates but i fixed to x)`.
    ///
    /// For Boolean tables this is the number of Hamming neighbors of `x` with
    /// the opposite value.
    pub fn sensitivity_at(&self, x: usize) -> Result<f64> {
        self.check_index(x)?;
        Ok(self.sensitivity_unchecked(x))
    }

    fn sensitivity_unchecked(&self, x: usize) -> f64 {
        let fx = self.values[x];
        (0..self.arity)
            .map(|i| {
                let half = (fx - self.values[x ^ (1 << i)]) / 2.0;
                half * half
            })
            .sum()
    }

    /// Variance of `f` over the `2^|P|` inputs that agree with `x` outside `P`.
    pub fn subset_variance(&self, x: usize, subset: SubsetMask) -> Result<f64> {
        self.check_index(x)?;
        if subset.is_empty() {
            return Err(Error::invalid("subset must be nonempty"));
        }
        SubsetMask::new(subset.bits(), self.arity)?;
        let mut buf = Vec::with_capacity(1 << subset.len());
        Ok(self.subset_variance_into(x, subset.bits(), &mut buf))
    }

    fn subset_variance_into(&self, x: usize, mask: u32, buf: &mut Vec<f64>) -> f64 {
        buf.clear();
        buf.extend(submasks(mask).map(|flip| self.values[x ^ flip as usize]));
        stats::population_variance(buf)
    }

    /// Variances of every subset at `x`, indexed by mask; entry 0 is 0.
    pub fn all_subset_variances(&self, x: usize) -> Result<Vec<f64>> {
        self.check_index(x)?;
        if self.arity > MAX_EXACT_BS_ARITY {
            return Err(Error::ArityTooLarge {
                arity: self.arity,
                limit: MAX_EXACT_BS_ARITY,
                what: "exact block sensitivity",
            });
        }
        let mut buf = Vec::new();
        let mut weights = vec![0.0; 1 << self.arity];
        for (mask, w) in weights.iter_mut().enumerate().skip(1) {
            *w = self.subset_variance_into(x, mask as u32, &mut buf);
        }
        Ok(weights)
    }

    /// `bs(f, x)`: the best partition of the positions into blocks, scored by
    /// the sum of block variances.
    pub fn block_sensitivity_exact(&self, x: usize) -> Result<BestPartition> {
        let weights = self.all_subset_variances(x)?;
        Ok(partition::best_partition(self.arity, &weights))
    }

    /// `as(f)`, the mean of [`sensitivity_at`](Self::sensitivity_at) over all inputs.
    pub fn average_sensitivity(&self) -> f64 {
        let total: f64 = (0..self.values.len()).map(|x| self.sensitivity_unchecked(x)).sum();
        total / self.values.len() as f64
    }

    /// Mean of `bs(f, x)` over inputs: every input when `n <= 10`, otherwise a
    /// seeded uniform sample of `sample_size` inputs (default 256).
    pub fn average_block_sensitivity(
        &self,
        sample_size: Option<usize>,
        seed: u64,
    ) -> Result<AverageBlockSensitivity> {
        if self.arity > MAX_EXACT_BS_ARITY {
            return Err(Error::ArityTooLarge {
                arity: self.arity,
                limit: MAX_EXACT_BS_ARITY,
                what: "exact block sensitivity",
            });
        }
        let (inputs, sampled): (Vec<usize>, bool) = if self.arity <= MAX_EXHAUSTIVE_AVERAGE_ARITY {
            ((0..self.values.len()).collect(), false)
        } else {
            use rand::Rng as _;
            let count = sample_size.unwrap_or(256);
            if count == 0 {
                return Err(Error::invalid("sample size must be positive"));
            }
            let mut rng: Rng = rng_from_seed(seed);
            ((0..count).map(|_| rng.random_range(0..self.values.len())).collect(), true)
        };
        // collect in input order so the reduction does not depend on scheduling
        let per_input: Vec<f64> = inputs
            .par_iter()
            .map(|&x| self.block_sensitivity_exact(x).map(|b| b.value))
            .collect::<Result<_>>()?;
        Ok(AverageBlockSensitivity {
            mean: stats::mean(&per_input),
            std_error: sampled.then(|| stats::standard_error(&per_input)),
            inputs: per_input.len(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AverageBlockSensitivity {
    pub mean: f64,
    /// Present only when inputs were sampled.
    pub std_error: Option<f64>,
    pub inputs: usize,
}

/// Input index of a sign vector (entry `i` is coordinate `i+1`).
pub fn index_of_signs(signs: &[i8]) -> Result<usize> {
    let mut index = 0usize;
    for (i, &s) in signs.iter().enumerate() {
        match s {
            1 => {}
            -1 => index |= 1 << i,
            other => return Err(Error::invalid(format!("coordinate must be +1 or -1, got {other}"))),
        }
    }
    Ok(index)
}

/// Sign vector of an input index.
pub fn signs_of_index(index: usize, arity: usize) -> Vec<i8> {
    (0..arity).map(|i| if index >> i & 1 == 1 { -1 } else { 1 }).collect()
}
