//! Random matrices supported on regular graphs.
//!
//! An [`EnsembleSpec`] couples a [`GraphSpec`] (which entries may be
//! nonzero) with an [`EntryModel`] (their law and transpose-pair
//! correlation ρ). [`sample_matrix`] draws `d^{-1/2} X` from counter-keyed
//! streams, so a sample depends only on `(spec, seed, trial_index)`.

mod diagnostics;
mod entries;
mod graph;
pub mod io;
mod profile;
mod sample;
mod truncate;

pub use diagnostics::{diagnostics, DiagnosticChecks, ModelDiagnostics, Thresholds};
pub use entries::{BoundedLaw, EntryLaw, EntryModel, Family};
pub use graph::{build_graph, Graph, GraphKind, GraphSpec, SelfLoops};
pub use profile::{
    validate_profile_of, validate_variance_profile, ProfileDeviation, ProfileReport, MIN_BATCH,
};
pub use sample::{sample_factor, sample_matrix, EnsembleSpec, MatrixSample};
pub use truncate::{
    moment_level, truncate, truncation_threshold, TruncationInfo, INVALID_FRACTION,
};
