//! Design-space constants of the quasi-patch antenna benchmark.

use crate::perturb::PerturbationScheme;
use crate::types::{Bounds, DesignVector, FrequencySweep};

/// Variable names, in vector order.
pub const VARIABLES: [&str; 6] = ["L", "l2", "W", "w2", "l0", "o0"];

pub const LOWER: [f64; 6] = [10.0, 5.0, 3.5, 0.2, 3.0, 2.0];
pub const UPPER: [f64; 6] = [25.0, 25.0, 10.0, 3.2, 15.0, 10.0];

/// Objective band in GHz.
pub const BAND_GHZ: (f64, f64) = (5.0, 6.0);

/// A benchmark starting point with the objective value reported for the
/// full-wave model. The value is metadata only; the synthetic model does not
/// reproduce it.
#[derive(Debug, Clone, Copy)]
pub struct InitialDesign {
    pub name: &'static str,
    pub reported_objective_db: f64,
    pub values: [f64; 6],
}

pub const INITIAL_DESIGNS: [InitialDesign; 10] = [
    InitialDesign {
        name: "x1",
        reported_objective_db: -2.03,
        values: [17.5, 15.1, 6.79, 1.72, 9.07, 6.05],
    },
    InitialDesign {
        name: "x2",
        reported_objective_db: -4.50,
        values: [22.2, 21.3, 8.79, 2.64, 12.8, 8.51],
    },
    InitialDesign {
        name: "x3",
        reported_objective_db: -0.34,
        values: [18.8, 16.7, 7.30, 1.96, 10.0, 6.68],
    },
    InitialDesign {
        name: "x4",
        reported_objective_db: -3.53,
        values: [17.9, 15.6, 6.95, 1.79, 9.37, 6.25],
    },
    InitialDesign {
        name: "x5",
        reported_objective_db: -2.97,
        values: [14.6, 11.2, 5.52, 1.13, 6.73, 4.49],
    },
    InitialDesign {
        name: "x6",
        reported_objective_db: -0.87,
        values: [13.4, 9.58, 4.99, 0.89, 5.75, 3.83],
    },
    InitialDesign {
        name: "x7",
        reported_objective_db: -2.04,
        values: [20.4, 18.9, 8.04, 2.30, 11.3, 7.59],
    },
    InitialDesign {
        name: "x8",
        reported_objective_db: -2.45,
        values: [13.6, 9.87, 5.08, 0.93, 5.92, 3.95],
    },
    InitialDesign {
        name: "x9",
        reported_objective_db: -6.23,
        values: [18.2, 15.9, 7.07, 1.85, 9.60, 6.40],
    },
    InitialDesign {
        name: "x10",
        reported_objective_db: -1.23,
        values: [21.6, 20.5, 8.56, 2.54, 12.3, 8.23],
    },
];

/// Geometry that only matters for the full-wave model: dependent dimensions
/// as multiples of `L`, and fixed dimensions in mm.
pub const DEPENDENT_FACTORS_OF_L: [(&str, f64); 2] = [("o", 0.22), ("ls", 0.1)];
pub const FIXED_DIMENSIONS_MM: [(&str, f64); 4] =
    [("l1", 1.5), ("w1", 2.5), ("ws", 0.5), ("w0", 1.7)];

/// Per-dimension step fractions of the hand-tuned FD setup.
pub const CUSTOM_FRACTIONS: [f64; 6] = [0.003, 0.003, 0.003, 0.007, 0.008, 0.006];

/// Simulation evaluations spent on hand tuning the custom setup.
pub const CUSTOM_TUNING_EVALS: u64 = 10;

/// Machine epsilon of the single-precision solver the sqrt-eps setup assumes.
pub const SOLVER_EPS: f64 = 1e-7;

/// The eight FD setups of the benchmark: fractions 0.5% to 3% in 0.5% steps,
/// square root of [`SOLVER_EPS`], and the hand-tuned [`CUSTOM_FRACTIONS`].
pub fn benchmark_schemes() -> Vec<PerturbationScheme> {
    let mut schemes: Vec<PerturbationScheme> = (1..=6)
        .map(|k| PerturbationScheme::FractionOfInitial(0.005 * k as f64))
        .collect();
    schemes.push(PerturbationScheme::SqrtMachineEps(SOLVER_EPS));
    schemes.push(PerturbationScheme::CustomFractions(
        CUSTOM_FRACTIONS.to_vec(),
    ));
    schemes
}

pub fn antenna_bounds() -> Bounds {
    Bounds::new(LOWER.to_vec(), UPPER.to_vec()).expect("fixture bounds are valid")
}

pub fn antenna_sweep() -> FrequencySweep {
    FrequencySweep::antenna_default()
}

pub fn initial_design(name: &str) -> Option<DesignVector> {
    INITIAL_DESIGNS
        .iter()
        .find(|d| d.name == name)
        .map(|d| DesignVector::new(d.values.to_vec()).expect("fixture designs are finite"))
}
