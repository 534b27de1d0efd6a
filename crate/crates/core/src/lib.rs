//! Package-confusion detection: name similarity, hybrid candidate search,
//! legitimate-target selection, feature extraction and a random-forest
//! classifier with a metadata-only fallback.

pub mod candidate_index;
pub mod content;
pub mod error;
pub mod eval;
pub mod features;
pub mod forest;
pub mod namevec;
pub mod pipeline;
pub mod registry;
pub mod target_analysis;
pub mod textsim;
