//! Command-line companion of `pcnf-core`: JSON network files, LP export in MPS and
//! LP-text form, the solve pipeline with its JSON report, and test-instance
//! generators.

pub mod engine;
pub mod generate;
pub mod json;
pub mod lpio;
pub mod pipeline;
