//! The two plug-in points of the estimator: a task model and a neighbor sampler.

use super::{IndexSet, Sequence};
use crate::error::{Error, Result};

/// A classifier or scorer `f : Σ* -> [-1,1]^d`.
pub trait TaskModel: Send + Sync {
    fn name(&self) -> String;

    /// Output dimension `d`.
    fn num_classes(&self) -> usize;

    /// Scores for one sequence. Must be deterministic.
    fn evaluate(&self, x: &Sequence) -> Result<Vec<f64>>;

    /// The endpoint cannot take interleaved requests.
    fn serial_only(&self) -> bool {
        false
    }
}

/// Draws completions of `x` that may differ from it only inside a subset.
pub trait NeighborSampler: Send + Sync {
    fn name(&self) -> String;

    /// `m` samples from the neighborhood of `x` over `subset`, reproducible per seed.
    fn sample(&self, x: &Sequence, subset: &IndexSet, m: usize, seed: u64) -> Result<Vec<Sequence>>;

    /// Every completion once, each with its probability. `None` when the
    /// sampler cannot enumerate.
    fn enumerate(&self, _x: &Sequence, _subset: &IndexSet) -> Option<Result<Vec<(Sequence, f64)>>> {
        None
    }

    fn serial_only(&self) -> bool {
        false
    }
}

/// Checks that a sample has the length of `x` and agrees with it outside `subset`.
pub fn check_neighbor(x: &Sequence, subset: &IndexSet, sample: &Sequence) -> Result<()> {
    if sample.len() != x.len() {
        return Err(Error::protocol(format!(
            "sample has length {} but the input has length {}",
            sample.len(),
            x.len()
        )));
    }
    for (i, (a, b)) in x.ids().iter().zip(sample.ids()).enumerate() {
        if a != b && !subset.contains(i + 1) {
            return Err(Error::protocol(format!(
                "sample changed position {} outside the subset {subset:?}",
                i + 1
            )));
        }
    }
    Ok(())
}

/// Validates model scores: wrong dimension or non-finite values are protocol
/// errors, values outside `[-1,1]` are clamped. Returns how many were clamped.
pub fn sanitize_scores(scores: &mut [f64], expected: usize) -> Result<usize> {
    if scores.len() != expected {
        return Err(Error::protocol(format!(
            "model returned {} scores, expected {expected}",
            scores.len()
        )));
    }
    let mut clamped = 0;
    for s in scores.iter_mut() {
        if !s.is_finite() {
            return Err(Error::protocol(format!("model returned non-finite score {s}")));
        }
        if s.abs() > 1.0 {
            *s = s.clamp(-1.0, 1.0);
            clamped += 1;
        }
    }
    Ok(clamped)
}

/// Falls back to a second sampler when the first refuses with
/// [`Error::EnumerationCap`].
pub struct FallbackSampler<A, B> {
    pub primary: A,
    pub fallback: B,
}

impl<A: NeighborSampler, B: NeighborSampler> NeighborSampler for FallbackSampler<A, B> {
    fn name(&self) -> String {
        format!("{}|{}", self.primary.name(), self.fallback.name())
    }

    fn sample(&self, x: &Sequence, subset: &IndexSet, m: usize, seed: u64) -> Result<Vec<Sequence>> {
        match self.primary.sample(x, subset, m, seed) {
            Err(Error::EnumerationCap { .. }) => self.fallback.sample(x, subset, m, seed),
            other => other,
        }
    }

    fn enumerate(&self, x: &Sequence, subset: &IndexSet) -> Option<Result<Vec<(Sequence, f64)>>> {
        match self.primary.enumerate(x, subset) {
            Some(Err(Error::EnumerationCap { .. })) => self.fallback.enumerate(x, subset),
            other => other,
        }
    }

    fn serial_only(&self) -> bool {
        self.primary.serial_only() || self.fallback.serial_only()
    }
}

impl<T: TaskModel + ?Sized> TaskModel for Box<T> {
    fn name(&self) -> String {
        (**self).name()
    }
    fn num_classes(&self) -> usize {
        (**self).num_classes()
    }
    fn evaluate(&self, x: &Sequence) -> Result<Vec<f64>> {
        (**self).evaluate(x)
    }
    fn serial_only(&self) -> bool {
        (**self).serial_only()
    }
}

impl<T: NeighborSampler + ?Sized> NeighborSampler for Box<T> {
    fn name(&self) -> String {
        (**self).name()
    }
    fn sample(&self, x: &Sequence, subset: &IndexSet, m: usize, seed: u64) -> Result<Vec<Sequence>> {
        (**self).sample(x, subset, m, seed)
    }
    fn enumerate(&self, x: &Sequence, subset: &IndexSet) -> Option<Result<Vec<(Sequence, f64)>>> {
        (**self).enumerate(x, subset)
    }
    fn serial_only(&self) -> bool {
        (**self).serial_only()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(ids: &[u32]) -> Sequence {
        Sequence::new(ids.to_vec()).unwrap()
    }

    #[test]
    fn neighbor_check() {
        let x = seq(&[1, 2, 3]);
        let p = IndexSet::from_positions([2]).unwrap();
        assert!(check_neighbor(&x, &p, &seq(&[1, 9, 3])).is_ok());
        assert!(check_neighbor(&x, &p, &seq(&[9, 2, 3])).unwrap_err().is_protocol_violation());
        assert!(check_neighbor(&x, &p, &seq(&[1, 2])).unwrap_err().is_protocol_violation());
    }

    #[test]
    fn scores_are_clamped_or_rejected() {
        let mut s = vec![1.0000001, -0.5];
        assert_eq!(sanitize_scores(&mut s, 2).unwrap(), 1);
        assert_eq!(s, vec![1.0, -0.5]);
        assert!(sanitize_scores(&mut [f64::NAN], 1).is_err());
        assert!(sanitize_scores(&mut [0.0], 2).is_err());
    }
}
