//! Subset scores, per-input block-sensitivity reports and dataset summaries.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{
    best_packing, build_subset_family, check_neighbor, full_subset_family, sanitize_scores, Example, IndexSet,
    NeighborSampler, Packing, PackingMode, Sequence, SubsetFamilyConfig, TaskModel,
};
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::stats;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateConfig {
    pub family: SubsetFamilyConfig,
    pub mode: PackingMode,
    pub seed: u64,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self {
            family: SubsetFamilyConfig::default(),
            mode: PackingMode::Auto,
            seed: 0,
        }
    }
}

/// Estimated `s(f, x, P)` for one subset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsetScore {
    pub subset: IndexSet,
    /// Largest per-class variance.
    pub variance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_class_variances: Option<Vec<f64>>,
    /// Model evaluations that entered the variance.
    pub samples_used: usize,
    pub sampler: String,
    pub seed: u64,
    /// Scores clamped into `[-1,1]`.
    pub clamped: usize,
}

/// Oracle calls spent on one input.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkCounters {
    pub sampler_calls: usize,
    pub model_calls: usize,
    pub clamped: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub id: String,
    pub length: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Value>,
    pub bs_estimate: f64,
    /// Packing mode that ran.
    pub mode: PackingMode,
    /// The disjoint sets whose variances sum to `bs_estimate`.
    pub packing: Vec<IndexSet>,
    pub scores: Vec<SubsetScore>,
    pub sampler: String,
    pub model: String,
    pub seed: u64,
    pub work: WorkCounters,
}

/// Seed for the samples of `subset` at input `input_id`; independent of the
/// rest of the family.
pub fn subset_seed(global: u64, input_id: &str, subset: &IndexSet) -> u64 {
    let positions: Vec<u8> = subset.positions().flat_map(|p| (p as u64).to_le_bytes()).collect();
    derive_seed(global, &[b"subset", input_id.as_bytes(), &positions])
}

fn evaluate(model: &dyn TaskModel, x: &Sequence, work: &mut WorkCounters) -> Result<Vec<f64>> {
    work.model_calls += 1;
    let mut scores = model.evaluate(x)?;
    work.clamped += sanitize_scores(&mut scores, model.num_classes())?;
    Ok(scores)
}

/// Per-class variances of the rows, weighted when `weights` is given.
fn class_variances(rows: &[Vec<f64>], weights: Option<&[f64]>, d: usize) -> Vec<f64> {
    (0..d)
        .map(|c| {
            let column: Vec<f64> = rows.iter().map(|r| r[c]).collect();
            match weights {
                None => stats::population_variance(&column),
                Some(w) => {
                    let mean: f64 = column.iter().zip(w).map(|(v, w)| v * w).sum();
                    column.iter().zip(w).map(|(v, w)| w * (v - mean) * (v - mean)).sum()
                }
            }
        })
        .collect()
}

struct Scorer<'a> {
    sampler: &'a dyn NeighborSampler,
    model: &'a dyn TaskModel,
    config: &'a EstimateConfig,
}

impl Scorer<'_> {
    fn score(
        &self,
        x: &Sequence,
        input_id: &str,
        subset: &IndexSet,
        original: &[f64],
        work: &mut WorkCounters,
    ) -> Result<SubsetScore> {
        if subset.max_position() > x.len() {
            return Err(Error::invalid(format!("subset {subset:?} exceeds length {}", x.len())));
        }
        let family = &self.config.family;
        let seed = subset_seed(self.config.seed, input_id, subset);
        let clamped_before = work.clamped;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut weights: Option<Vec<f64>> = None;
        work.sampler_calls += 1;
        if family.enumerate {
            // the neighborhood already contains x, so it is not added again
            let all = self
                .sampler
                .enumerate(x, subset)
                .ok_or_else(|| Error::invalid(format!("sampler {} cannot enumerate", self.sampler.name())))??;
            let uniform = all.windows(2).all(|w| w[0].1 == w[1].1);
            let mut w = Vec::with_capacity(all.len());
            for (s, p) in &all {
                check_neighbor(x, subset, s)?;
                rows.push(evaluate(self.model, s, work)?);
                w.push(*p);
            }
            if !uniform {
                weights = Some(w);
            }
        } else {
            let m = family.samples_per_subset;
            let samples = self.sampler.sample(x, subset, m, seed)?;
            if samples.len() != m {
                return Err(Error::protocol(format!(
                    "sampler returned {} samples for {subset:?}, expected {m}",
                    samples.len()
                )));
            }
            if family.include_original {
                rows.push(original.to_vec());
            }
            for s in &samples {
                check_neighbor(x, subset, s)?;
                rows.push(evaluate(self.model, s, work)?);
            }
        }
        let d = self.model.num_classes();
        let per_class = class_variances(&rows, weights.as_deref(), d);
        let variance = per_class.iter().copied().fold(0.0, f64::max);
        Ok(SubsetScore {
            subset: subset.clone(),
            variance,
            per_class_variances: (d > 1).then_some(per_class),
            samples_used: rows.len(),
            sampler: self.sampler.name(),
            seed,
            clamped: work.clamped - clamped_before,
        })
    }
}

/// Estimates `s(f, x, P)` for a single subset.
pub fn estimate_subset_sensitivity(
    x: &Sequence,
    input_id: &str,
    subset: &IndexSet,
    sampler: &dyn NeighborSampler,
    model: &dyn TaskModel,
    config: &EstimateConfig,
) -> Result<SubsetScore> {
    config.family.validate()?;
    let mut work = WorkCounters::default();
    let original = evaluate(model, x, &mut work)?;
    Scorer { sampler, model, config }.score(x, input_id, subset, &original, &mut work)
}

/// Best disjoint packing of already scored subsets.
pub fn estimate_block_sensitivity(n: usize, scores: &[SubsetScore], mode: PackingMode) -> Result<Packing> {
    let family: Vec<IndexSet> = scores.iter().map(|s| s.subset.clone()).collect();
    let weights: Vec<f64> = scores.iter().map(|s| s.variance).collect();
    best_packing(n, &family, &weights, mode)
}

/// The family the configuration asks for at length `n`.
pub fn family_for(n: usize, config: &SubsetFamilyConfig) -> Result<Vec<IndexSet>> {
    if config.full_family {
        full_subset_family(n)
    } else {
        build_subset_family(n, config)
    }
}

/// Scores the whole family at one input and packs it.
pub fn estimate_input(
    example: &Example,
    sampler: &dyn NeighborSampler,
    model: &dyn TaskModel,
    config: &EstimateConfig,
) -> Result<SensitivityReport> {
    config.family.validate()?;
    let x = &example.sequence;
    let n = x.len();
    let family = family_for(n, &config.family)?;
    let mut work = WorkCounters::default();
    let original = evaluate(model, x, &mut work)?;
    let scorer = Scorer { sampler, model, config };
    let scores = family
        .iter()
        .map(|p| scorer.score(x, &example.id, p, &original, &mut work))
        .collect::<Result<Vec<_>>>()?;
    let packing = estimate_block_sensitivity(n, &scores, config.mode)?;
    Ok(SensitivityReport {
        id: example.id.clone(),
        length: n,
        label: example.label.clone(),
        bs_estimate: packing.value,
        mode: packing.mode,
        packing: packing.chosen.iter().map(|&i| family[i].clone()).collect(),
        scores,
        sampler: sampler.name(),
        model: model.name(),
        seed: config.seed,
        work,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailedInput {
    pub id: String,
    pub error: String,
    pub protocol_violation: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LengthMean {
    pub count: usize,
    pub mean: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub inputs: usize,
    pub succeeded: usize,
    /// Mean `bs` estimate over successful inputs; absent when none succeeded.
    pub mean: Option<f64>,
    pub std_error: Option<f64>,
    pub per_length: BTreeMap<usize, LengthMean>,
    pub failed: Vec<FailedInput>,
}

impl DatasetSummary {
    pub fn from_reports(reports: &[SensitivityReport], failed: Vec<FailedInput>) -> Self {
        let values: Vec<f64> = reports.iter().map(|r| r.bs_estimate).collect();
        let mut by_len: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for r in reports {
            by_len.entry(r.length).or_default().push(r.bs_estimate);
        }
        Self {
            inputs: reports.len() + failed.len(),
            succeeded: reports.len(),
            mean: (!values.is_empty()).then(|| stats::mean(&values)),
            std_error: (!values.is_empty()).then(|| stats::standard_error(&values)),
            per_length: by_len
                .into_iter()
                .map(|(n, v)| {
                    (
                        n,
                        LengthMean {
                            count: v.len(),
                            mean: stats::mean(&v),
                        },
                    )
                })
                .collect(),
            failed,
        }
    }

    pub fn any_protocol_violation(&self) -> bool {
        self.failed.iter().any(|f| f.protocol_violation)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetEstimate {
    /// Successful reports in dataset order.
    pub reports: Vec<SensitivityReport>,
    pub summary: DatasetSummary,
}

/// Estimates every input. A failing input is recorded and skipped; inputs run
/// concurrently unless an oracle is serial-only, and results keep dataset order.
pub fn average_block_sensitivity_dataset(
    examples: &[Example],
    sampler: &dyn NeighborSampler,
    model: &dyn TaskModel,
    config: &EstimateConfig,
) -> Result<DatasetEstimate> {
    config.family.validate()?;
    let run = |e: &Example| estimate_input(e, sampler, model, config);
    let results: Vec<Result<SensitivityReport>> = if sampler.serial_only() || model.serial_only() {
        examples.iter().map(run).collect()
    } else {
        examples.par_iter().map(run).collect()
    };
    let mut reports = Vec::new();
    let mut failed = Vec::new();
    for (e, r) in examples.iter().zip(results) {
        match r {
            Ok(rep) => reports.push(rep),
            Err(err) => failed.push(FailedInput {
                id: e.id.clone(),
                protocol_violation: err.is_protocol_violation(),
                error: err.to_string(),
            }),
        }
    }
    let summary = DatasetSummary::from_reports(&reports, failed);
    Ok(DatasetEstimate { reports, summary })
}
