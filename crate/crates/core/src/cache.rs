//! Memoization of expensive evaluations and the distinct-evaluation counter.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::error::{Error, EvalError, Result};
use crate::evaluator::Evaluator;
use crate::types::{DesignVector, ResponseCurve};

/// Whether a cache request consumed a new evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lookup {
    /// Stored response returned; counter unchanged.
    Hit,
    /// Evaluator invoked and its response stored; counter incremented.
    Miss,
}

/// Exact-key response cache. Keys are the bit patterns of the design entries,
/// so two vectors that differ in the last ulp are different designs.
///
/// Safe to share between threads. When two callers race on the same missing
/// key both may run the evaluator, but only the first stored response is kept
/// and counted.
#[derive(Debug, Default)]
pub struct EvalCache {
    entries: Mutex<HashMap<Vec<u64>, Arc<ResponseCurve>>>,
}

fn key(x: &[f64]) -> Vec<u64> {
    x.iter().map(|v| v.to_bits()).collect()
}

impl EvalCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of distinct designs evaluated so far.
    pub fn evaluations(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn get(&self, x: &DesignVector) -> Option<Arc<ResponseCurve>> {
        self.entries.lock().unwrap().get(&key(x)).cloned()
    }

    /// Returns the response for `x`, evaluating it on a miss.
    pub fn evaluate<E: Evaluator + ?Sized>(
        &self,
        ev: &E,
        x: &DesignVector,
    ) -> Result<(Arc<ResponseCurve>, Lookup)> {
        if x.dim() != ev.dimension() {
            return Err(Error::DimensionMismatch {
                expected: ev.dimension(),
                actual: x.dim(),
            });
        }
        let k = key(x);
        if let Some(hit) = self.entries.lock().unwrap().get(&k) {
            return Ok((Arc::clone(hit), Lookup::Hit));
        }

        // The lock is not held while the evaluator runs.
        let response = ev
            .evaluate(x)
            .and_then(|r| {
                let expected = ev.sweep().len();
                if r.len() != expected {
                    return Err(EvalError::LengthMismatch {
                        expected,
                        actual: r.len(),
                    });
                }
                Ok(r)
            })
            .map_err(|source| Error::Evaluation {
                x: x.to_vec(),
                source,
            })?;

        let mut entries = self.entries.lock().unwrap();
        match entries.get(&k) {
            Some(existing) => Ok((Arc::clone(existing), Lookup::Hit)),
            None => {
                let stored = Arc::new(response);
                entries.insert(k, Arc::clone(&stored));
                Ok((stored, Lookup::Miss))
            }
        }
    }
}

/// Evaluate `x` through `cache`; a repeated design never re-invokes `ev`.
pub fn cached_evaluate<E: Evaluator + ?Sized>(
    cache: &EvalCache,
    ev: &E,
    x: &DesignVector,
) -> Result<Arc<ResponseCurve>> {
    cache.evaluate(ev, x).map(|(r, _)| r)
}
