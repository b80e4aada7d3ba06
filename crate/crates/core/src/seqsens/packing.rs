//! Maximum-weight packing of pairwise disjoint index sets.
//!
//! Because every singleton is in the family and weights are nonnegative, the
//! best disjoint sub-collection scores the same as the best partition.

use serde::{Deserialize, Serialize};

use super::IndexSet;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PackingMode {
    /// Branch and bound; always optimal.
    Exact,
    /// Highest weight first, skipping sets that overlap earlier picks.
    Greedy,
    /// Exact up to [`AUTO_EXACT_MAX_LEN`] positions, greedy beyond.
    Auto,
}

pub const AUTO_EXACT_MAX_LEN: usize = 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Packing {
    pub value: f64,
    /// Indices into the family, ordered by the lowest position of each set.
    pub chosen: Vec<usize>,
    /// The mode that actually ran (never `Auto`).
    pub mode: PackingMode,
}

/// Chooses pairwise disjoint sets from `family` (positions in `1..=n`)
/// maximizing the summed weights.
///
/// Zero-weight sets are never chosen. Ties between sets resolve toward the
/// smaller mask; among equally good packings the exact search keeps the first
/// one met in its (deterministic) search order.
pub fn best_packing(n: usize, family: &[IndexSet], weights: &[f64], mode: PackingMode) -> Result<Packing> {
    if family.len() != weights.len() {
        return Err(Error::invalid("family and weights differ in length"));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::invalid(format!("packing weights must be finite and nonnegative, got {w}")));
    }
    if let Some(s) = family.iter().find(|s| s.max_position() > n) {
        return Err(Error::invalid(format!("set {s:?} exceeds length {n}")));
    }
    let mode = match mode {
        PackingMode::Auto if n <= AUTO_EXACT_MAX_LEN => PackingMode::Exact,
        PackingMode::Auto => PackingMode::Greedy,
        m => m,
    };
    let mut chosen = match mode {
        PackingMode::Greedy => greedy(family, weights),
        _ => BranchAndBound::new(n, family, weights).run(),
    };
    chosen.sort_by_key(|&i| (family[i].min_position(), i));
    let value = chosen.iter().map(|&i| weights[i]).sum();
    Ok(Packing { value, chosen, mode })
}

/// Candidate order: weight descending, then smaller mask.
fn ranked(indices: &mut [usize], family: &[IndexSet], weights: &[f64]) {
    indices.sort_by(|&a, &b| {
        weights[b]
            .total_cmp(&weights[a])
            .then_with(|| family[a].cmp(&family[b]))
    });
}

fn greedy(family: &[IndexSet], weights: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..family.len()).filter(|&i| weights[i] > 0.0).collect();
    ranked(&mut order, family, weights);
    let mut chosen: Vec<usize> = Vec::new();
    for i in order {
        if chosen.iter().all(|&j| family[j].is_disjoint(&family[i])) {
            chosen.push(i);
        }
    }
    chosen
}

/// Bitmask over positions `0..n` (0-based) sized for the search.
#[derive(Clone)]
struct Mask(Vec<u64>);

impl Mask {
    fn of(set: &IndexSet, words: usize) -> Self {
        let mut m = vec![0u64; words];
        m[..set.words().len()].copy_from_slice(set.words());
        Mask(m)
    }

    fn get(&self, p: usize) -> bool {
        self.0[p / 64] >> (p % 64) & 1 == 1
    }

    fn disjoint(&self, other: &Mask) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a & b == 0)
    }

    fn or_assign(&mut self, other: &Mask) {
        self.0.iter_mut().zip(&other.0).for_each(|(a, b)| *a |= b);
    }

    fn andnot_assign(&mut self, other: &Mask) {
        self.0.iter_mut().zip(&other.0).for_each(|(a, b)| *a &= !b);
    }
}

struct BranchAndBound<'a> {
    n: usize,
    weights: &'a [f64],
    masks: Vec<Mask>,
    /// Sets whose lowest position is `p`, in candidate order.
    starting_at: Vec<Vec<usize>>,
    /// Largest weight-per-position among sets covering `p`.
    density: Vec<f64>,
    covered: Mask,
    stack: Vec<usize>,
    best_value: f64,
    best: Vec<usize>,
}

impl<'a> BranchAndBound<'a> {
    fn new(n: usize, family: &'a [IndexSet], weights: &'a [f64]) -> Self {
        let words = n.div_ceil(64).max(1);
        let masks: Vec<Mask> = family.iter().map(|s| Mask::of(s, words)).collect();
        let mut starting_at = vec![Vec::new(); n];
        let mut density = vec![0.0f64; n];
        for (i, set) in family.iter().enumerate() {
            if weights[i] <= 0.0 {
                continue;
            }
            starting_at[set.min_position() - 1].push(i);
            let d = weights[i] / set.len() as f64;
            for p in set.positions() {
                density[p - 1] = density[p - 1].max(d);
            }
        }
        for list in &mut starting_at {
            ranked(list, family, weights);
        }
        let incumbent = greedy(family, weights);
        let best_value = incumbent.iter().map(|&i| weights[i]).sum();
        Self {
            n,
            weights,
            masks,
            starting_at,
            density,
            covered: Mask(vec![0; words]),
            stack: Vec::new(),
            best_value,
            best: incumbent,
        }
    }

    fn run(mut self) -> Vec<usize> {
        self.search(0, 0.0);
        self.best
    }

    /// Admissible bound on what uncovered positions `p..n` can still add.
    fn remaining_bound(&self, p: usize) -> f64 {
        (p..self.n).filter(|&q| !self.covered.get(q)).map(|q| self.density[q]).sum()
    }

    fn search(&mut self, mut p: usize, value: f64) {
        while p < self.n && self.covered.get(p) {
            p += 1;
        }
        if p == self.n {
            if value > self.best_value {
                self.best_value = value;
                self.best = self.stack.clone();
            }
            return;
        }
        let bound = value + self.remaining_bound(p);
        // slack keeps the bound admissible under rounding
        if bound + 1e-12 * (1.0 + bound) <= self.best_value {
            return;
        }
        for k in 0..self.starting_at[p].len() {
            let i = self.starting_at[p][k];
            if !self.masks[i].disjoint(&self.covered) {
                continue;
            }
            let mask = self.masks[i].clone();
            self.covered.or_assign(&mask);
            self.stack.push(i);
            self.search(p + 1, value + self.weights[i]);
            self.stack.pop();
            self.covered.andnot_assign(&mask);
        }
        self.search(p + 1, value);
    }
}
