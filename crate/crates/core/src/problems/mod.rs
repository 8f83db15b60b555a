//! Built-in test problems, addressable by name.

pub mod analytic;
pub mod antenna;
pub mod fixtures;
pub mod noise;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluator::Evaluator;
use crate::types::{Bounds, DesignVector};

use analytic::{AffineMinMax, QuadraticBowl};
use antenna::SyntheticAntenna;
use noise::NoiseSpec;

/// Knobs shared by the named problems.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ProblemOptions {
    /// Noise settings for the antenna problem.
    pub noise: NoiseSpec,
    /// Seed for the affine problem's coefficients.
    pub seed: u64,
}

/// An evaluator with its box and named starting designs.
#[derive(Clone)]
pub struct Problem {
    pub name: String,
    pub evaluator: Arc<dyn Evaluator>,
    pub bounds: Bounds,
    pub designs: Vec<(String, DesignVector)>,
}

impl std::fmt::Debug for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("bounds", &self.bounds)
            .field("designs", &self.designs)
            .finish_non_exhaustive()
    }
}

pub const PROBLEM_NAMES: [&str; 3] = ["antenna", "quadratic", "affine"];

pub const QUADRATIC_CENTER: [f64; 3] = [3.0, 6.0, 4.5];

pub fn build_problem(name: &str, opts: &ProblemOptions) -> Result<Problem> {
    let dv = |v: &[f64]| DesignVector::new(v.to_vec());
    match name {
        "antenna" => {
            let ev = SyntheticAntenna::with_noise(opts.noise)?;
            let designs = fixtures::INITIAL_DESIGNS
                .iter()
                .map(|d| Ok((d.name.to_string(), dv(&d.values)?)))
                .collect::<Result<_>>()?;
            Ok(Problem {
                name: name.into(),
                bounds: ev.bounds().clone(),
                evaluator: Arc::new(ev),
                designs,
            })
        }
        "quadratic" => Ok(Problem {
            name: name.into(),
            evaluator: Arc::new(QuadraticBowl::new(QUADRATIC_CENTER.to_vec())),
            bounds: Bounds::new(vec![0.5; 3], vec![10.0; 3])?,
            designs: vec![
                ("x1".into(), dv(&[5.0, 3.5, 2.0])?),
                ("x2".into(), dv(&[8.0, 1.0, 9.0])?),
                ("x3".into(), dv(&[1.0, 9.0, 6.0])?),
            ],
        }),
        "affine" => {
            let f = AffineMinMax::seeded(opts.seed, 2, 3);
            Ok(Problem {
                name: name.into(),
                bounds: f.bounds().clone(),
                designs: vec![("x1".into(), f.start())],
                evaluator: Arc::new(f),
            })
        }
        other => Err(Error::config(format!(
            "unknown problem `{other}` (expected one of {})",
            PROBLEM_NAMES.join(", ")
        ))),
    }
}

impl Problem {
    /// Named fixture (`x1`, ...) or a comma-separated list of values.
    pub fn design(&self, spec: &str) -> Result<(String, DesignVector)> {
        if let Some((name, x)) = self.designs.iter().find(|(n, _)| n == spec) {
            return Ok((name.clone(), x.clone()));
        }
        let values = spec
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::config(format!("unknown design `{spec}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        let x = DesignVector::new(values)?;
        self.bounds.check_dim(x.dim())?;
        Ok(("custom".into(), x))
    }
}
