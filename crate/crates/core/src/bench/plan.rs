use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perturb::PerturbationScheme;
use crate::problems::noise::NoiseSpec;
use crate::problems::{Problem, ProblemOptions};
use crate::trustloop::TrustConfig;
use crate::types::DesignVector;

/// A starting design: a fixture name, or explicit values with a label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DesignEntry {
    Named(String),
    Explicit { label: String, values: Vec<f64> },
}

/// A scheme column. `overhead_evals` is extra tuning cost reported next to
/// the table, never added to measured counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SchemeEntry {
    Plain(PerturbationScheme),
    Detailed {
        scheme: PerturbationScheme,
        #[serde(default)]
        label: Option<String>,
        #[serde(default)]
        overhead_evals: Option<u64>,
    },
}

impl SchemeEntry {
    pub fn scheme(&self) -> &PerturbationScheme {
        match self {
            SchemeEntry::Plain(s) | SchemeEntry::Detailed { scheme: s, .. } => s,
        }
    }

    pub fn label(&self) -> String {
        match self {
            SchemeEntry::Detailed { label: Some(l), .. } => l.clone(),
            _ => self.scheme().label(),
        }
    }

    pub fn overhead_evals(&self) -> Option<u64> {
        match self {
            SchemeEntry::Detailed { overhead_evals, .. } => *overhead_evals,
            SchemeEntry::Plain(_) => None,
        }
    }
}

fn one() -> usize {
    1
}

/// JSON plan file. The `scheme` inside `trust` is ignored; every column
/// supplies its own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPlan {
    pub problem: String,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub seed: u64,
    pub designs: Vec<DesignEntry>,
    pub schemes: Vec<SchemeEntry>,
    #[serde(default)]
    pub trust: TrustConfig,
    #[serde(default = "one")]
    pub jobs: usize,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl SweepPlan {
    pub fn from_json(text: &str) -> Result<Self> {
        let plan: Self =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("plan: {e}")))?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.designs.is_empty() || self.schemes.is_empty() {
            return Err(Error::config(
                "a plan needs at least one design and one scheme",
            ));
        }
        if self.jobs == 0 {
            return Err(Error::config("jobs must be at least 1"));
        }
        if !self.noise.is_valid() {
            return Err(Error::config(
                "noise amplitude must be >= 0 and cell fraction in (0, 1)",
            ));
        }
        self.trust.validate()?;
        let mut seen = HashSet::new();
        for s in &self.schemes {
            s.scheme().validate()?;
            if !seen.insert(s.label()) {
                return Err(Error::config(format!(
                    "duplicate scheme label `{}`",
                    s.label()
                )));
            }
        }
        let mut seen = HashSet::new();
        for d in &self.designs {
            let label = match d {
                DesignEntry::Named(n) => n,
                DesignEntry::Explicit { label, .. } => label,
            };
            if !seen.insert(label.clone()) {
                return Err(Error::config(format!("duplicate design label `{label}`")));
            }
        }
        Ok(())
    }

    pub fn problem_options(&self) -> ProblemOptions {
        ProblemOptions {
            noise: self.noise,
            seed: self.seed,
        }
    }

    /// Labelled starting designs, checked against the problem.
    pub fn resolve_designs(&self, problem: &Problem) -> Result<Vec<(String, DesignVector)>> {
        self.designs
            .iter()
            .map(|d| match d {
                DesignEntry::Named(name) => problem
                    .designs
                    .iter()
                    .find(|(n, _)| n == name)
                    .cloned()
                    .ok_or_else(|| {
                        Error::config(format!("problem `{}` has no design `{name}`", problem.name))
                    }),
                DesignEntry::Explicit { label, values } => {
                    let x = DesignVector::new(values.clone())?;
                    problem.bounds.check_dim(x.dim())?;
                    if !problem.bounds.contains(&x) {
                        return Err(Error::config(format!(
                            "design `{label}` lies outside the bounds"
                        )));
                    }
                    Ok((label.clone(), x))
                }
            })
            .collect()
    }
}
