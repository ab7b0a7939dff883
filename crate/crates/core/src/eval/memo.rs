use std::collections::HashMap;

use crate::codec::canonical_key;
use crate::space::ChildArchitecture;

use super::{EvalError, Evaluator};

/// Caches penalties by canonical encoding. Errors are not cached.
#[derive(Debug)]
pub struct Memoized<E> {
    inner: E,
    cache: HashMap<String, f64>,
    hits: u64,
    misses: u64,
}

impl<E: Evaluator> Memoized<E> {
    pub fn new(inner: E) -> Self {
        Self {
            inner,
            cache: HashMap::new(),
            hits: 0,
            misses: 0,
        }
    }

    pub fn hits(&self) -> u64 {
        self.hits
    }

    /// Calls forwarded to the inner evaluator.
    pub fn misses(&self) -> u64 {
        self.misses
    }

    pub fn inner(&self) -> &E {
        &self.inner
    }

    pub fn into_inner(self) -> E {
        self.inner
    }
}

impl<E: Evaluator> Evaluator for Memoized<E> {
    fn evaluate(&mut self, arch: &ChildArchitecture) -> Result<f64, EvalError> {
        let key = canonical_key(arch)?;
        if let Some(&penalty) = self.cache.get(&key) {
            self.hits += 1;
            return Ok(penalty);
        }
        self.misses += 1;
        let penalty = self.inner.evaluate(arch)?;
        self.cache.insert(key, penalty);
        Ok(penalty)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{FnEvaluator, PlantedEvaluator};
    use crate::space::{random_valid, SearchSpaceConfig};

    #[test]
    fn one_inner_call_per_distinct_architecture() {
        let c = SearchSpaceConfig::with_default_ops(4, 3).unwrap();
        let mut calls = 0;
        let mut memo = Memoized::new(FnEvaluator(|a: &ChildArchitecture| {
            calls += 1;
            Ok(a.present_count() as f64)
        }));
        let a = random_valid(&c, 1);
        let b = random_valid(&c, 2);
        assert_ne!(a, b);
        let first = memo.evaluate(&a).unwrap();
        assert_eq!(memo.evaluate(&a).unwrap(), first);
        memo.evaluate(&b).unwrap();
        assert_eq!((memo.hits(), memo.misses()), (1, 2));
        drop(memo);
        assert_eq!(calls, 2);
    }

    #[test]
    fn errors_are_not_cached() {
        let c = SearchSpaceConfig::with_default_ops(3, 2).unwrap();
        let mut fail = true;
        let mut memo = Memoized::new(FnEvaluator(|_: &ChildArchitecture| {
            if std::mem::take(&mut fail) {
                Err(EvalError::Other("transient".into()))
            } else {
                Ok(0.5)
            }
        }));
        let a = random_valid(&c, 0);
        assert!(memo.evaluate(&a).is_err());
        assert_eq!(memo.evaluate(&a).unwrap(), 0.5);
        assert_eq!(memo.misses(), 2);
    }

    #[test]
    fn transparent_over_planted() {
        let c = SearchSpaceConfig::with_default_ops(5, 3).unwrap();
        let plain = PlantedEvaluator::new(&c, 77);
        let mut memo = Memoized::new(plain.clone());
        for seed in 0..1000 {
            let a = random_valid(&c, seed % 400);
            assert_eq!(memo.evaluate(&a).unwrap(), plain.penalty(&a).unwrap());
        }
        assert!(memo.misses() <= 400);
    }
}
