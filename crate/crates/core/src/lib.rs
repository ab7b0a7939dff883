//! Multi-path one-shot architecture search.
//!
//! The crate models a layered multi-scale supernet grid ([`space`]), samples
//! batches of child networks in which every edge of a connection layer is used
//! equally often ([`sampler`]), and searches the grid with simulated annealing
//! ([`search`]) against a pluggable penalty provider ([`eval`]).
//!
//! Runnable walkthroughs live in `examples/`:
//!
//! ```bash
//! cargo run -p monas --example search_space_size
//! cargo run -p monas --example fair_batches
//! cargo run -p monas --example anneal_planted
//! cargo run -p monas --example validity_and_pruning
//! cargo run -p monas --example penalty_table
//! cargo run -p monas --example eval_server
//! cargo run -p monas --example export_dot
//! ```
//!
//! The `monas` binary wraps the same functionality for scripted runs.

pub mod cli;
pub mod codec;
pub mod dot;
pub mod eval;
pub mod sampler;
pub mod search;
pub mod space;

pub use codec::{canonical_key, decode, decode_any, encode, ArchitectureRecord, DecodeError};
pub use eval::{EvalError, Evaluator};
pub use sampler::{assert_fair, batch_stream, sample_batch, BatchSample, FairnessReport};
pub use search::{
    acceptance_probability, neighbor, samos, AnnealingSchedule, SearchResult, SearchTraceEntry,
};
pub use space::{
    enumerate_all, enumerate_valid, random_valid, ChildArchitecture, EdgeSlot, EdgeState, NodeId,
    SearchSpaceConfig, ValidityReport,
};
