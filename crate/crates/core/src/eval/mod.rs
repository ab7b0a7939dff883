//! Penalty providers for the annealing search.
//!
//! An [`Evaluator`] maps a valid architecture to a non-negative penalty and
//! must return equal penalties for canonically equal architectures within one
//! run. Shipped implementations:
//!
//! - [`PlantedEvaluator`]: normalized edit distance to a hidden architecture,
//!   with a unique known optimum.
//! - [`TableEvaluator`]: replay of precomputed penalties keyed by canonical
//!   encoding.
//! - [`ProcessEvaluator`]: a child process speaking `monas-eval/1`.
//! - [`Memoized`]: cache wrapper around any of the above.

mod memo;
mod planted;
pub mod protocol;
mod table;

use thiserror::Error;

use crate::space::{ChildArchitecture, SpaceError};

pub use memo::Memoized;
pub use planted::PlantedEvaluator;
pub use protocol::{ProcessEvaluator, ProtocolError};
pub use table::{write_table, TableEvaluator};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(#[from] SpaceError),
    #[error("unevaluated architecture: {encoding}")]
    MissingEntry { encoding: String },
    #[error("penalty table line {line}: {message}")]
    Table { line: usize, message: String },
    #[error("evaluator I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("evaluator reported an error for request {id}: {message}")]
    Remote { id: u64, message: String },
    #[error("{0}")]
    Other(String),
}

pub trait Evaluator {
    fn evaluate(&mut self, arch: &ChildArchitecture) -> Result<f64, EvalError>;
}

impl<E: Evaluator + ?Sized> Evaluator for &mut E {
    fn evaluate(&mut self, arch: &ChildArchitecture) -> Result<f64, EvalError> {
        (**self).evaluate(arch)
    }
}

impl<E: Evaluator + ?Sized> Evaluator for Box<E> {
    fn evaluate(&mut self, arch: &ChildArchitecture) -> Result<f64, EvalError> {
        (**self).evaluate(arch)
    }
}

/// Adapts a closure into an [`Evaluator`].
pub struct FnEvaluator<F>(pub F);

impl<F> Evaluator for FnEvaluator<F>
where
    F: FnMut(&ChildArchitecture) -> Result<f64, EvalError>,
{
    fn evaluate(&mut self, arch: &ChildArchitecture) -> Result<f64, EvalError> {
        (self.0)(arch)
    }
}

/// Evaluator returning the same penalty for every architecture.
#[derive(Debug, Clone, Copy)]
pub struct ConstantEvaluator(pub f64);

impl Evaluator for ConstantEvaluator {
    fn evaluate(&mut self, _arch: &ChildArchitecture) -> Result<f64, EvalError> {
        Ok(self.0)
    }
}
