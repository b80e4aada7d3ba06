use serde::{Deserialize, Serialize};

use super::TruthTable;
use crate::error::{Error, Result};

/// Fourier coefficients `f^(S)` of a function on `{-1,1}^n`, indexed by mask.
///
/// `f(x) = sum_S f^(S) chi_S(x)` with `chi_S(x) = prod_{i in S} x_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierSpectrum {
    arity: usize,
    coefficients: Vec<f64>,
}

impl FourierSpectrum {
    pub fn new(arity: usize, coefficients: Vec<f64>) -> Result<Self> {
        if arity == 0 || arity > super::MAX_ARITY {
            return Err(Error::invalid(format!("arity must be in 1..={}, got {arity}", super::MAX_ARITY)));
        }
        if coefficients.len() != 1 << arity {
            return Err(Error::invalid(format!(
                "arity {arity} needs {} coefficients, got {}",
                1usize << arity,
                coefficients.len()
            )));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("spectrum contains a non-finite coefficient"));
        }
        Ok(Self { arity, coefficients })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn coefficient(&self, mask: usize) -> f64 {
        self.coefficients[mask]
    }

    /// `sum_S f^(S)^2`, equal to `E[f^2]` by Parseval.
    pub fn squared_mass(&self) -> f64 {
        self.coefficients.iter().map(|c| c * c).sum()
    }

    /// `sum_S |S| f^(S)^2`, the total influence.
    pub fn total_influence(&self) -> f64 {
        self.coefficients
            .iter()
            .enumerate()
            .map(|(mask, c)| mask.count_ones() as f64 * c * c)
            .sum()
    }

    /// Squared mass at each degree `0..=n`.
    pub fn degree_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.arity + 1];
        for (mask, c) in self.coefficients.iter().enumerate() {
            w[mask.count_ones() as usize] += c * c;
        }
        w
    }
}

fn butterfly(data: &mut [f64]) {
    let mut half = 1;
    while half < data.len() {
        for block in data.chunks_exact_mut(2 * half) {
            let (lo, hi) = block.split_at_mut(half);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (u, v) = (*a, *b);
                *a = u + v;
                *b = u - v;
            }
        }
        half *= 2;
    }
}

/// Fast Walsh–Hadamard transform, `O(n 2^n)`.
pub fn walsh_hadamard(table: &TruthTable) -> FourierSpectrum {
    let mut data = table.values().to_vec();
    butterfly(&mut data);
    let scale = 1.0 / data.len() as f64;
    data.iter_mut().for_each(|c| *c *= scale);
    FourierSpectrum {
        arity: table.arity(),
        coefficients: data,
    }
}

/// Evaluates `sum_S f^(S) chi_S` at every input.
pub fn inverse_walsh_hadamard(spectrum: &FourierSpectrum) -> TruthTable {
    let mut data = spectrum.coefficients.clone();
    butterfly(&mut data);
    TruthTable::new_unbounded(spectrum.arity, data).expect("transform of a valid spectrum is finite")
}
