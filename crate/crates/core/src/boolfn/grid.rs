//! Functions on `Σ^n` for an alphabet of any size, stored in mixed radix.

use super::{partition, BestPartition, MAX_EXACT_BS_ARITY};
use crate::error::{Error, Result};
use crate::stats;

/// Largest table a [`GridTable`] may hold.
pub const MAX_GRID_LEN: usize = 1 << 20;

/// Values of `f` on every string in `Σ^n`, `|Σ| = radix`. The string
/// `(s_1, ..., s_n)` of symbol indices sits at `sum_i s_i radix^(i-1)`; with
/// radix 2 this is the [`TruthTable`](super::TruthTable) layout, symbol 0
/// standing for `+1`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridTable {
    radix: usize,
    arity: usize,
    values: Vec<f64>,
    strides: Vec<usize>,
}

impl GridTable {
    pub fn new(radix: usize, arity: usize, values: Vec<f64>) -> Result<Self> {
        if radix < 2 {
            return Err(Error::invalid(format!("alphabet size must be at least 2, got {radix}")));
        }
        if arity == 0 {
            return Err(Error::invalid("arity must be at least 1"));
        }
        let len = u32::try_from(arity)
            .ok()
            .and_then(|a| radix.checked_pow(a))
            .filter(|&l| l <= MAX_GRID_LEN)
            .ok_or_else(|| Error::invalid(format!("{radix}^{arity} strings exceed the table limit {MAX_GRID_LEN}")))?;
        if values.len() != len {
            return Err(Error::invalid(format!("expected {len} values, got {}", values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("table contains a non-finite value"));
        }
        let strides = (0..arity).map(|i| radix.pow(i as u32)).collect();
        Ok(Self {
            radix,
            arity,
            values,
            strides,
        })
    }

    /// Tabulates `f` over symbol strings.
    pub fn from_fn(radix: usize, arity: usize, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let len = u32::try_from(arity)
            .ok()
            .and_then(|a| radix.checked_pow(a))
            .filter(|&l| l <= MAX_GRID_LEN)
            .ok_or_else(|| Error::invalid(format!("{radix}^{arity} strings exceed the table limit {MAX_GRID_LEN}")))?;
        let mut symbols = vec![0usize; arity];
        let mut values = Vec::with_capacity(len);
        for _ in 0..len {
            values.push(f(&symbols));
            for s in symbols.iter_mut() {
                *s += 1;
                if *s < radix {
                    break;
                }
                *s = 0;
            }
        }
        Self::new(radix, arity, values)
    }

    pub fn radix(&self) -> usize {
        self.radix
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

    pub fn symbols_of(&self, index: usize) -> Vec<usize> {
        self.strides.iter().map(|s| index / s % self.radix).collect()
    }

    fn neighborhood_into(&self, x: usize, mask: u32, buf: &mut Vec<f64>) {
        buf.clear();
        let positions: Vec<usize> = (0..self.arity).filter(|i| mask >> i & 1 == 1).collect();
        // clear the subset's digits, then run an odometer over them
        let base = positions
            .iter()
            .fold(x, |acc, &i| acc - (x / self.strides[i] % self.radix) * self.strides[i]);
        let mut digits = vec![0usize; positions.len()];
        let mut index = base;
        loop {
            buf.push(self.values[index]);
            let mut carried = true;
            for (d, &i) in digits.iter_mut().zip(&positions) {
                *d += 1;
                index += self.strides[i];
                if *d < self.radix {
                    carried = false;
                    break;
                }
                index -= self.radix * self.strides[i];
                *d = 0;
            }
            if carried {
                break;
            }
        }
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

    /// Population variance of `f` over strings agreeing with `x` outside `mask`.
    pub fn subset_variance(&self, x: usize, mask: u32) -> Result<f64> {
        self.check_index(x)?;
        if mask == 0 || (mask as usize) >> self.arity != 0 {
            return Err(Error::invalid(format!("mask {mask:#b} is not a nonempty subset of 1..={}", self.arity)));
        }
        let mut buf = Vec::new();
        self.neighborhood_into(x, mask, &mut buf);
        Ok(stats::population_variance(&buf))
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
        let mut out = vec![0.0; 1 << self.arity];
        for (mask, w) in out.iter_mut().enumerate().skip(1) {
            self.neighborhood_into(x, mask as u32, &mut buf);
            *w = stats::population_variance(&buf);
        }
        Ok(out)
    }

    pub fn block_sensitivity_exact(&self, x: usize) -> Result<BestPartition> {
        let weights = self.all_subset_variances(x)?;
        Ok(partition::best_partition(self.arity, &weights))
    }
}
