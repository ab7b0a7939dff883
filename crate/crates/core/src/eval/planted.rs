use crate::space::{random_valid, ChildArchitecture, SearchSpaceConfig};

use super::{EvalError, Evaluator};

/// Synthetic landscape with a hidden optimum.
///
/// The penalty of an architecture is the number of slots in which its pruned
/// form differs from the hidden target, divided by the slot count. The target
/// is `random_valid(config, hidden_seed)`, so the global minimum 0 is attained
/// exactly at the target's pruned form.
#[derive(Debug, Clone)]
pub struct PlantedEvaluator {
    target: ChildArchitecture,
}

impl PlantedEvaluator {
    pub fn new(config: &SearchSpaceConfig, hidden_seed: u64) -> Self {
        Self {
            target: random_valid(config, hidden_seed),
        }
    }

    pub fn target(&self) -> &ChildArchitecture {
        &self.target
    }

    pub fn penalty(&self, arch: &ChildArchitecture) -> Result<f64, EvalError> {
        if arch.config() != self.target.config() {
            return Err(EvalError::Other(
                "architecture belongs to a different search space".to_owned(),
            ));
        }
        let pruned = arch.prune()?;
        let edges = self.target.config().edge_count();
        Ok(pruned.hamming_distance(&self.target) as f64 / edges as f64)
    }
}

impl Evaluator for PlantedEvaluator {
    fn evaluate(&mut self, arch: &ChildArchitecture) -> Result<f64, EvalError> {
        self.penalty(arch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{EdgeState, SpaceError};

    #[test]
    fn zero_at_target() {
        let c = SearchSpaceConfig::with_default_ops(3, 2).unwrap();
        let e = PlantedEvaluator::new(&c, 42);
        assert_eq!(e.penalty(e.target()).unwrap(), 0.0);
    }

    #[test]
    fn one_op_change_costs_one_eighth() {
        let c = SearchSpaceConfig::with_default_ops(3, 2).unwrap();
        let e = PlantedEvaluator::new(&c, 42);
        let mut a = e.target().clone();
        let (slot, op) = a.present_edges().next().unwrap();
        a.set_edge(slot, EdgeState::Present(1 - op)).unwrap();
        assert_eq!(e.penalty(&a).unwrap(), 0.125);
    }

    #[test]
    fn invalid_input_is_an_error() {
        let c = SearchSpaceConfig::with_default_ops(3, 2).unwrap();
        let e = PlantedEvaluator::new(&c, 1);
        let empty = ChildArchitecture::empty(e.target().shared_config().clone());
        assert!(matches!(
            e.penalty(&empty),
            Err(EvalError::InvalidArchitecture(
                SpaceError::InvalidArchitecture(_)
            ))
        ));
    }
}
