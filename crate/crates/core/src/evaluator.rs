use std::sync::Arc;

use crate::error::EvalError;
use crate::types::{DesignVector, FrequencySweep, ResponseCurve};

/// The expensive model `x -> R(x, f)`.
///
/// Implementations must be deterministic: the same input vector always yields
/// a bit-identical response.
pub trait Evaluator: Send + Sync {
    fn dimension(&self) -> usize;

    fn sweep(&self) -> &FrequencySweep;

    fn evaluate(&self, x: &DesignVector) -> Result<ResponseCurve, EvalError>;

    /// Whether several `evaluate` calls may usefully run at the same time.
    fn supports_concurrency(&self) -> bool {
        true
    }
}

impl<E: Evaluator + ?Sized> Evaluator for &E {
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn sweep(&self) -> &FrequencySweep {
        (**self).sweep()
    }
    fn evaluate(&self, x: &DesignVector) -> Result<ResponseCurve, EvalError> {
        (**self).evaluate(x)
    }
    fn supports_concurrency(&self) -> bool {
        (**self).supports_concurrency()
    }
}

impl<E: Evaluator + ?Sized> Evaluator for Box<E> {
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn sweep(&self) -> &FrequencySweep {
        (**self).sweep()
    }
    fn evaluate(&self, x: &DesignVector) -> Result<ResponseCurve, EvalError> {
        (**self).evaluate(x)
    }
    fn supports_concurrency(&self) -> bool {
        (**self).supports_concurrency()
    }
}

impl<E: Evaluator + ?Sized> Evaluator for Arc<E> {
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn sweep(&self) -> &FrequencySweep {
        (**self).sweep()
    }
    fn evaluate(&self, x: &DesignVector) -> Result<ResponseCurve, EvalError> {
        (**self).evaluate(x)
    }
    fn supports_concurrency(&self) -> bool {
        (**self).supports_concurrency()
    }
}
