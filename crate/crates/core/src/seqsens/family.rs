//! The restricted family of index sets over which packings are searched.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::IndexSet;
use crate::error::{Error, Result};

/// Where a focus window is centred.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowCenter {
    /// Position `ceil(n / 2)`.
    Median,
    /// A fixed 1-based position, clamped to the sequence.
    Position(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FocusWindow {
    pub center: WindowCenter,
    pub width: usize,
}

pub const MAX_WINDOW_WIDTH: usize = 7;
/// Largest sequence length for which the full power set can be requested.
pub const MAX_FULL_FAMILY_LEN: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubsetFamilyConfig {
    /// Contiguous spans of length `1..=max_span_len`.
    pub max_span_len: usize,
    /// Number of contiguous chunks whose unions join the family.
    pub num_chunks: usize,
    pub window: Option<FocusWindow>,
    /// Use every nonempty subset instead of the restricted family.
    pub full_family: bool,
    /// Neighbor samples drawn per subset (`m`).
    pub samples_per_subset: usize,
    /// Ask the sampler to enumerate each neighborhood exactly once instead of
    /// drawing `samples_per_subset` samples.
    pub enumerate: bool,
    /// Evaluate the model on the original input as well as on the samples.
    pub include_original: bool,
}

impl Default for SubsetFamilyConfig {
    fn default() -> Self {
        Self {
            max_span_len: 8,
            num_chunks: 7,
            window: None,
            full_family: false,
            samples_per_subset: 10,
            enumerate: false,
            include_original: true,
        }
    }
}

impl SubsetFamilyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_span_len == 0 {
            return Err(Error::invalid("max_span_len must be at least 1"));
        }
        if self.num_chunks == 0 {
            return Err(Error::invalid("num_chunks must be at least 1"));
        }
        if self.samples_per_subset < 2 && !self.enumerate {
            return Err(Error::invalid("samples_per_subset must be at least 2"));
        }
        if let Some(w) = self.window {
            if w.width == 0 || w.width > MAX_WINDOW_WIDTH {
                return Err(Error::invalid(format!(
                    "window width must be in 1..={MAX_WINDOW_WIDTH}, got {}",
                    w.width
                )));
            }
        }
        Ok(())
    }
}

/// Positions `floor((i-1) n / c) + 1 ..= floor(i n / c)` of chunk `i` (1-based);
/// empty when `n < c` leaves the chunk without positions.
fn chunk_bounds(n: usize, chunks: usize, i: usize) -> (usize, usize) {
    ((i - 1) * n / chunks + 1, i * n / chunks)
}

fn window_positions(n: usize, window: FocusWindow) -> Vec<usize> {
    let center = match window.center {
        WindowCenter::Median => n.div_ceil(2),
        WindowCenter::Position(p) => p.clamp(1, n),
    };
    let left = (window.width - 1) / 2;
    let start = center.saturating_sub(left).max(1);
    let end = (start + window.width - 1).min(n);
    (start..=end).collect()
}

/// Builds the family for a sequence of length `n`, without duplicates.
///
/// Order: spans by length then start, then chunk unions by increasing chunk
/// bitmask, then focus-window subsets by increasing bitmask. A set keeps the
/// slot of its first occurrence. With the default configuration the family
/// has at most `8n + 127` sets, plus 127 when a width-7 window is added.
pub fn build_subset_family(n: usize, config: &SubsetFamilyConfig) -> Result<Vec<IndexSet>> {
    if n == 0 {
        return Err(Error::invalid("sequence length must be at least 1"));
    }
    config.validate()?;
    if config.full_family {
        return full_subset_family(n);
    }
    let mut seen = HashSet::new();
    let mut family = Vec::new();
    let mut push = |set: IndexSet| {
        if seen.insert(set.clone()) {
            family.push(set);
        }
    };

    for len in 1..=config.max_span_len.min(n) {
        for start in 1..=n - len + 1 {
            push(IndexSet::span(start, start + len - 1)?);
        }
    }

    let chunks: Vec<(usize, usize)> = (1..=config.num_chunks)
        .map(|i| chunk_bounds(n, config.num_chunks, i))
        .collect();
    if config.num_chunks >= 64 {
        return Err(Error::invalid("num_chunks must be below 64"));
    }
    for combo in 1u64..(1 << config.num_chunks) {
        let positions: Vec<usize> = chunks
            .iter()
            .enumerate()
            .filter(|(i, _)| combo >> i & 1 == 1)
            .flat_map(|(_, &(a, b))| a..=b)
            .collect();
        if !positions.is_empty() {
            push(IndexSet::from_positions(positions)?);
        }
    }

    if let Some(window) = config.window {
        let positions = window_positions(n, window);
        for combo in 1u64..(1 << positions.len()) {
            push(IndexSet::from_positions(
                positions
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| combo >> i & 1 == 1)
                    .map(|(_, &p)| p),
            )?);
        }
    }
    Ok(family)
}

/// All `2^n - 1` nonempty subsets in increasing mask order.
pub fn full_subset_family(n: usize) -> Result<Vec<IndexSet>> {
    if n == 0 || n > MAX_FULL_FAMILY_LEN {
        return Err(Error::invalid(format!(
            "full family needs 1 <= n <= {MAX_FULL_FAMILY_LEN}, got {n}"
        )));
    }
    (1u64..1 << n)
        .map(|mask| IndexSet::from_positions((0..n).filter(|i| mask >> i & 1 == 1).map(|i| i + 1)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn positions(family: &[IndexSet]) -> Vec<Vec<usize>> {
        family.iter().map(|s| s.positions().collect()).collect()
    }

    #[test]
    fn length_three_family() {
        let f = build_subset_family(3, &SubsetFamilyConfig::default()).unwrap();
        assert_eq!(
            positions(&f),
            vec![vec![1], vec![2], vec![3], vec![1, 2], vec![2, 3], vec![1, 2, 3], vec![1, 3]]
        );
    }

    #[test]
    fn length_one_family() {
        let f = build_subset_family(1, &SubsetFamilyConfig::default()).unwrap();
        assert_eq!(positions(&f), vec![vec![1]]);
    }

    #[test]
    fn chunks_partition_positions() {
        for n in 1..60 {
            let mut covered = Vec::new();
            for i in 1..=7 {
                let (a, b) = chunk_bounds(n, 7, i);
                covered.extend(a..=b);
            }
            assert_eq!(covered, (1..=n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn twenty_tokens_within_budget() {
        let f = build_subset_family(20, &SubsetFamilyConfig::default()).unwrap();
        assert!(f.len() <= 8 * 20 + 127);
        // all 7 chunks are nonempty at n = 20, so every union is present
        let spans = (1..=8).map(|l| 20 - l + 1).sum::<usize>();
        assert!(f.len() > spans);
    }

    #[test]
    fn window_subsets_are_added() {
        let cfg = SubsetFamilyConfig {
            window: Some(FocusWindow {
                center: WindowCenter::Median,
                width: 7,
            }),
            ..Default::default()
        };
        let f = build_subset_family(30, &cfg).unwrap();
        // {12, 14, 18} is neither a span nor a chunk union
        let odd = IndexSet::from_positions([12, 14, 18]).unwrap();
        assert!(f.contains(&odd));
        assert_eq!(window_positions(30, cfg.window.unwrap()), (12..=18).collect::<Vec<_>>());
        assert_eq!(window_positions(3, cfg.window.unwrap()), vec![1, 2, 3]);
    }

    #[test]
    fn full_family_counts() {
        assert_eq!(full_subset_family(4).unwrap().len(), 15);
        assert!(full_subset_family(17).is_err());
    }

    #[test]
    fn invalid_configs() {
        let bad = SubsetFamilyConfig {
            samples_per_subset: 1,
            ..Default::default()
        };
        assert!(build_subset_family(5, &bad).is_err());
        let wide = SubsetFamilyConfig {
            window: Some(FocusWindow {
                center: WindowCenter::Median,
                width: 8,
            }),
            ..Default::default()
        };
        assert!(build_subset_family(5, &wide).is_err());
    }
}
