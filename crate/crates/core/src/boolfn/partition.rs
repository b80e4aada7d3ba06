//! Maximum-weight set partition by subset-mask dynamic programming.

use serde::{Deserialize, Serialize};

use super::{submasks, SubsetMask};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestPartition {
    pub value: f64,
    /// Blocks ordered by their lowest position.
    pub blocks: Vec<SubsetMask>,
}

/// Maximizes `sum weights[B]` over partitions of `{1..n}` into nonempty blocks.
///
/// `weights` is indexed by block mask and must have length `2^n`. The
/// recurrence is `best(S) = max_T weights[T] + best(S \ T)` where `T` ranges
/// over subsets of `S` containing the lowest element of `S`, so every
/// partition is visited once. Candidates are tried in increasing mask order
/// and only a strict improvement replaces the incumbent: among optimal
/// partitions, the one whose block sequence (listed by lowest position) is
/// lexicographically smallest wins.
pub fn best_partition(n: usize, weights: &[f64]) -> BestPartition {
    assert_eq!(weights.len(), 1 << n, "weights must be indexed by all 2^n masks");
    let full = (1usize << n) - 1;
    let mut best = vec![0.0f64; 1 << n];
    let mut choice = vec![0u32; 1 << n];
    for set in 1..=full {
        let low = set & set.wrapping_neg();
        let rest = (set ^ low) as u32;
        let mut top = f64::NEG_INFINITY;
        let mut arg = 0u32;
        for sub in submasks(rest) {
            let block = sub as usize | low;
            let cand = weights[block] + best[set ^ block];
            if cand > top {
                top = cand;
                arg = block as u32;
            }
        }
        best[set] = top;
        choice[set] = arg;
    }
    let mut blocks = Vec::new();
    let mut left = full;
    while left != 0 {
        let block = choice[left];
        blocks.push(SubsetMask(block));
        left ^= block as usize;
    }
    BestPartition {
        value: best[full],
        blocks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Restricted-growth-string enumeration of every set partition.
    fn brute(n: usize, weights: &[f64]) -> f64 {
        fn go(i: usize, n: usize, blocks: &mut Vec<usize>, weights: &[f64], best: &mut f64) {
            if i == n {
                let v: f64 = blocks.iter().map(|&b| weights[b]).sum();
                if v > *best {
                    *best = v;
                }
                return;
            }
            for k in 0..blocks.len() {
                blocks[k] |= 1 << i;
                go(i + 1, n, blocks, weights, best);
                blocks[k] &= !(1 << i);
            }
            blocks.push(1 << i);
            go(i + 1, n, blocks, weights, best);
            blocks.pop();
        }
        let mut best = f64::NEG_INFINITY;
        go(0, n, &mut Vec::new(), weights, &mut best);
        best
    }

    #[test]
    fn singleton_weights() {
        let w = [0.0, 1.0, 1.0, 0.5];
        let p = best_partition(2, &w);
        assert_eq!(p.value, 2.0);
        assert_eq!(p.blocks, vec![SubsetMask(1), SubsetMask(2)]);
    }

    #[test]
    fn merged_block_wins() {
        let w = [0.0, 0.1, 0.1, 0.9];
        let p = best_partition(2, &w);
        assert_eq!(p.value, 0.9);
        assert_eq!(p.blocks, vec![SubsetMask(3)]);
    }

    #[test]
    fn ties_keep_smallest_first_block() {
        let p = best_partition(2, &[0.0, 0.5, 0.5, 1.0]);
        assert_eq!(p.value, 1.0);
        assert_eq!(p.blocks, vec![SubsetMask(1), SubsetMask(2)]);
    }

    #[test]
    fn matches_partition_enumeration() {
        use rand::Rng as _;
        let mut rng = crate::rng::rng_from_seed(11);
        for n in 1..=7 {
            let w: Vec<f64> = (0..1 << n)
                .map(|m| if m == 0 { 0.0 } else { rng.random_range(0.0..1.0) })
                .collect();
            let p = best_partition(n, &w);
            assert!((p.value - brute(n, &w)).abs() < 1e-12);
            let union = p.blocks.iter().fold(0u32, |acc, b| {
                assert_eq!(acc & b.bits(), 0);
                acc | b.bits()
            });
            assert_eq!(union as usize, (1 << n) - 1);
            let sum: f64 = p.blocks.iter().map(|b| w[b.bits() as usize]).sum();
            assert!((sum - p.value).abs() < 1e-12);
        }
    }
}
