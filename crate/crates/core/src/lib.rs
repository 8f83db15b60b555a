//! Trust-region optimization of frequency responses with finite-difference
//! linear surrogates, plus the tools to benchmark how the finite-difference
//! step size affects it.

pub mod adapter;
pub mod bench;
pub mod cache;
pub mod error;
pub mod evaluator;
pub mod hash;
pub mod objective;
pub mod perturb;
pub mod problems;
pub mod surrogate;
pub mod trustloop;
pub mod types;

pub use cache::{cached_evaluate, EvalCache, Lookup};
pub use error::{Error, EvalError, Result};
pub use evaluator::Evaluator;
pub use objective::objective_minmax;
pub use perturb::{fd_jacobian, resolve_steps, PerturbationScheme, StepVector};
pub use surrogate::{
    model_predict, solve_tr_subproblem, subproblem_oracle_grid, LinearModel, NormMode,
    SubproblemSpec,
};
pub use trustloop::{optimize, RunFailure, RunResult, Termination, TraceRow, TrustConfig};
pub use types::{clip_to_bounds, Bounds, DesignVector, FrequencySweep, ResponseCurve};
