//! Probabilistic block sensitivity of sequence tasks, estimated through a
//! neighbor sampler and a task model over a restricted family of subsets.

mod dataset;
mod estimate;
mod family;
mod index_set;
mod models;
mod oracle;
mod packing;
pub mod protocol;
mod samplers;
mod vocab;

pub use dataset::{read_jsonl, read_text, Example};
pub use estimate::{
    average_block_sensitivity_dataset, estimate_block_sensitivity, estimate_input, estimate_subset_sensitivity,
    family_for, subset_seed, DatasetEstimate, DatasetSummary, EstimateConfig, FailedInput, LengthMean,
    SensitivityReport, SubsetScore, WorkCounters,
};
pub use family::{
    build_subset_family, full_subset_family, FocusWindow, SubsetFamilyConfig, WindowCenter, MAX_FULL_FAMILY_LEN,
    MAX_WINDOW_WIDTH,
};
pub use index_set::IndexSet;
pub use models::{
    ConstantModel, DfaModel, DfaSpec, LexiconModel, LexiconSpec, MajorityTokenModel, ParityModel, Squash, TableModel,
};
pub use oracle::{check_neighbor, sanitize_scores, FallbackSampler, NeighborSampler, TaskModel};
pub use packing::{best_packing, Packing, PackingMode, AUTO_EXACT_MAX_LEN};
pub use samplers::{
    ExhaustiveSampler, MarkovGibbsSampler, MarkovModel, SequenceLogWeight, UniformSampler, UniformWeight,
    DEFAULT_BURN_IN, DEFAULT_ENUMERATION_CAP, DEFAULT_THINNING,
};
pub use vocab::{Sequence, TokenId, Vocabulary, UNKNOWN_ID, UNKNOWN_TOKEN};
