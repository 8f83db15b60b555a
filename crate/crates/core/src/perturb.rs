//! Finite-difference perturbation schemes and forward-difference Jacobians.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cache::{EvalCache, Lookup};
use crate::error::{Error, Result};
use crate::evaluator::Evaluator;
use crate::surrogate::LinearModel;
use crate::types::{Bounds, DesignVector, ResponseCurve};

/// Rule turning the initial design into absolute FD steps. Every variant is a
/// fraction of the initial design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum PerturbationScheme {
    /// `p[d] = frac * x0[d]`.
    FractionOfInitial(f64),
    /// `p[d] = sqrt(machine_eps) * x0[d]`.
    SqrtMachineEps(f64),
    /// `p[d] = fracs[d] * x0[d]`.
    CustomFractions(Vec<f64>),
}

impl PerturbationScheme {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        match self {
            Self::FractionOfInitial(f) if !ok(*f) => {
                Err(Error::config(format!("fraction must be positive, got {f}")))
            }
            Self::SqrtMachineEps(e) if !ok(*e) => Err(Error::config(format!(
                "machine epsilon must be positive, got {e}"
            ))),
            Self::CustomFractions(fs) if fs.is_empty() || !fs.iter().all(|&f| ok(f)) => Err(
                Error::config("custom fractions must be non-empty and positive"),
            ),
            _ => Ok(()),
        }
    }

    /// Per-dimension fractions of the initial design.
    pub fn fractions(&self, dim: usize) -> Result<Vec<f64>> {
        self.validate()?;
        match self {
            Self::FractionOfInitial(f) => Ok(vec![*f; dim]),
            Self::SqrtMachineEps(e) => Ok(vec![e.sqrt(); dim]),
            Self::CustomFractions(fs) => {
                if fs.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        actual: fs.len(),
                    });
                }
                Ok(fs.clone())
            }
        }
    }

    /// Short label used in report columns and file names, e.g. `3pct`.
    pub fn label(&self) -> String {
        match self {
            Self::FractionOfInitial(f) => format!("{}pct", round_label(f * 100.0)),
            Self::SqrtMachineEps(_) => "sqrteps".to_string(),
            Self::CustomFractions(_) => "custom".to_string(),
        }
    }
}

fn round_label(v: f64) -> f64 {
    (v * 1e9).round() / 1e9
}

impl fmt::Display for PerturbationScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::FractionOfInitial(v) => write!(f, "fraction:{v}"),
            Self::SqrtMachineEps(v) => write!(f, "sqrteps:{v}"),
            Self::CustomFractions(vs) => {
                let parts: Vec<String> = vs.iter().map(|v| v.to_string()).collect();
                write!(f, "custom:{}", parts.join(","))
            }
        }
    }
}

impl FromStr for PerturbationScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::config(format!("scheme `{s}` must look like kind:value")))?;
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::config(format!("invalid number `{t}` in scheme `{s}`")))
        };
        let scheme = match kind.trim() {
            "fraction" => Self::FractionOfInitial(num(rest)?),
            "sqrteps" => Self::SqrtMachineEps(num(rest)?),
            "custom" => Self::CustomFractions(rest.split(',').map(num).collect::<Result<_>>()?),
            other => return Err(Error::config(format!("unknown scheme kind `{other}`"))),
        };
        scheme.validate()?;
        Ok(scheme)
    }
}

impl TryFrom<String> for PerturbationScheme {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<PerturbationScheme> for String {
    fn from(s: PerturbationScheme) -> Self {
        s.to_string()
    }
}

/// Absolute, strictly positive FD steps.
#[derive(Debug, Clone, PartialEq)]
pub struct StepVector(Vec<f64>);

impl StepVector {
    pub fn new(steps: Vec<f64>) -> Result<Self> {
        if steps.is_empty() || !steps.iter().all(|p| p.is_finite() && *p > 0.0) {
            return Err(Error::config(
                "FD steps must be non-empty, finite and positive",
            ));
        }
        Ok(Self(steps))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Absolute steps for the whole run, computed once from the initial design.
pub fn resolve_steps(scheme: &PerturbationScheme, x0: &DesignVector) -> Result<StepVector> {
    let fractions = scheme.fractions(x0.dim())?;
    if let Some(d) = x0.iter().position(|&v| v <= 0.0) {
        return Err(Error::config(format!(
            "relative FD steps need a positive initial design; entry {d} is {}",
            x0[d]
        )));
    }
    StepVector::new(x0.iter().zip(&fractions).map(|(x, f)| f * x).collect())
}

/// One perturbed evaluation used for a Jacobian column.
#[derive(Debug, Clone)]
pub struct Probe {
    pub design: DesignVector,
    /// Signed step: `+p[d]` forward, `-p[d]` when the forward probe would leave the box.
    pub step: f64,
    pub lookup: Lookup,
}

/// Forward-difference Jacobian together with the probe record.
#[derive(Debug, Clone)]
pub struct JacobianBuild {
    pub model: LinearModel,
    pub center_lookup: Lookup,
    pub probes: Vec<Probe>,
}

/// Signed step for dimension `d`: forward unless that leaves the box.
fn probe_step(x: &DesignVector, p: f64, b: &Bounds, d: usize) -> Result<f64> {
    if x[d] + p <= b.upper()[d] {
        Ok(p)
    } else if x[d] - p >= b.lower()[d] {
        Ok(-p)
    } else {
        Err(Error::config(format!(
            "FD step {p} in dimension {d} leaves the box in both directions"
        )))
    }
}

/// Builds the linear model at `x` from `D` forward (or boundary-flipped
/// backward) differences, all evaluated through `cache`.
pub fn fd_jacobian<E: Evaluator + ?Sized>(
    cache: &EvalCache,
    ev: &E,
    x: &DesignVector,
    steps: &StepVector,
    b: &Bounds,
) -> Result<LinearModel> {
    fd_jacobian_with_probes(cache, ev, x, steps, b).map(|j| j.model)
}

pub fn fd_jacobian_with_probes<E: Evaluator + ?Sized>(
    cache: &EvalCache,
    ev: &E,
    x: &DesignVector,
    steps: &StepVector,
    b: &Bounds,
) -> Result<JacobianBuild> {
    let dim = x.dim();
    b.check_dim(dim)?;
    if steps.as_slice().len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: steps.as_slice().len(),
        });
    }
    if !b.contains(x) {
        return Err(Error::config("Jacobian center lies outside the bounds"));
    }

    let signed: Vec<f64> = (0..dim)
        .map(|d| probe_step(x, steps.as_slice()[d], b, d))
        .collect::<Result<_>>()?;
    let (center, center_lookup) = cache.evaluate(ev, x)?;

    let probe = |d: usize| -> Result<(DesignVector, Arc<ResponseCurve>, Lookup)> {
        let design = x.with_entry(d, x[d] + signed[d]);
        let (r, lookup) = cache.evaluate(ev, &design)?;
        Ok((design, r, lookup))
    };
    // Columns are collected by index, so the result does not depend on
    // completion order.
    let evaluated: Vec<_> = if ev.supports_concurrency() {
        (0..dim).into_par_iter().map(probe).collect::<Result<_>>()?
    } else {
        (0..dim).map(probe).collect::<Result<_>>()?
    };

    let m = center.len();
    let mut jacobian = vec![0.0; m * dim];
    for (d, (_, r, _)) in evaluated.iter().enumerate() {
        let s = signed[d];
        for i in 0..m {
            jacobian[i * dim + d] = (r[i] - center[i]) / s;
        }
    }
    let model = LinearModel::new(x.clone(), (*center).clone(), jacobian)?;
    let probes = evaluated
        .into_iter()
        .zip(signed)
        .map(|((design, _, lookup), step)| Probe {
            design,
            step,
            lookup,
        })
        .collect();
    Ok(JacobianBuild {
        model,
        center_lookup,
        probes,
    })
}

/// One row of a step-size error table. `residual` is `None` when a function
/// value was not finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdErrorRow {
    pub step: f64,
    pub residual: Option<f64>,
}

/// Residual of the forward difference against the analytic derivative for
/// each step, in input order.
pub fn fd_error_curve(
    f: impl Fn(f64) -> f64,
    df: impl Fn(f64) -> f64,
    t: f64,
    steps: &[f64],
) -> Result<Vec<FdErrorRow>> {
    if steps.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
        return Err(Error::config("steps must be positive and finite"));
    }
    if steps.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::config("steps must be sorted ascending"));
    }
    let f0 = f(t);
    let d0 = df(t);
    Ok(steps
        .iter()
        .map(|&h| {
            let f1 = f(t + h);
            let residual = (f1 - f0) / h - d0;
            FdErrorRow {
                step: h,
                residual: (f0.is_finite() && f1.is_finite() && residual.is_finite())
                    .then_some(residual),
            }
        })
        .collect())
}

/// `count` logarithmically spaced values from `lo` to `hi` inclusive.
pub fn log_steps(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && count >= 2) {
        return Err(Error::config(
            "log spacing needs 0 < lo < hi and count >= 2",
        ));
    }
    let (a, b) = (lo.log10(), hi.log10());
    Ok((0..count)
        .map(|i| {
            if i == count - 1 {
                hi
            } else {
                10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64)
            }
        })
        .collect())
}
