//! Pipeline plumbing for the `offerner` binary: configuration, dataset
//! generation, training, tagging, evaluation and the end-to-end `repro` run.
//!
//! Exit codes: 1 i/o, 2 config, 3 missing lexicon entry, 4 training failure,
//! 5 model load failure, 6 dataset load failure.

pub mod config;
pub mod error;
pub mod pipeline;

pub use config::PipelineConfig;
pub use error::{CliError, CliResult};
