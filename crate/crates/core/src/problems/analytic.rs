//! Closed-form evaluators with known derivatives and optima.

use crate::error::EvalError;
use crate::evaluator::Evaluator;
use crate::hash::SplitMix;
use crate::types::{Bounds, DesignVector, FrequencySweep, ResponseCurve};

/// `m` affine rows `b_i + a_i . x` on the box `[1, 3]^D`, all in band.
#[derive(Debug, Clone)]
pub struct AffineMinMax {
    coefficients: Vec<Vec<f64>>,
    offsets: Vec<f64>,
    sweep: FrequencySweep,
    bounds: Bounds,
    start: DesignVector,
}

impl AffineMinMax {
    pub const LOWER: f64 = 1.0;
    pub const UPPER: f64 = 3.0;

    /// Slopes and offsets uniform on `[-1, 1]`; the start point is uniform on
    /// `[1.5, 2.5]^D`.
    pub fn seeded(seed: u64, dim: usize, rows: usize) -> Self {
        assert!(dim >= 1 && rows >= 1);
        let mut rng = SplitMix::new(seed);
        let coefficients = (0..rows)
            .map(|_| (0..dim).map(|_| rng.uniform(-1.0, 1.0)).collect())
            .collect();
        let offsets = (0..rows).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let start = (0..dim).map(|_| rng.uniform(1.5, 2.5)).collect();
        Self::new(
            coefficients,
            offsets,
            DesignVector::new(start).expect("finite"),
        )
    }

    pub fn new(coefficients: Vec<Vec<f64>>, offsets: Vec<f64>, start: DesignVector) -> Self {
        let rows = offsets.len();
        let dim = start.dim();
        assert!(coefficients.len() == rows && coefficients.iter().all(|r| r.len() == dim));
        let sweep = FrequencySweep::uniform(5.0, 6.0, rows, 5.0, 6.0).expect("valid sweep");
        let bounds = Bounds::new(vec![Self::LOWER; dim], vec![Self::UPPER; dim]).expect("valid");
        Self {
            coefficients,
            offsets,
            sweep,
            bounds,
            start,
        }
    }

    /// Row-major true Jacobian.
    pub fn coefficients(&self) -> &[Vec<f64>] {
        &self.coefficients
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn start(&self) -> DesignVector {
        self.start.clone()
    }
}

impl Evaluator for AffineMinMax {
    fn dimension(&self) -> usize {
        self.start.dim()
    }

    fn sweep(&self) -> &FrequencySweep {
        &self.sweep
    }

    fn evaluate(&self, x: &DesignVector) -> Result<ResponseCurve, EvalError> {
        ResponseCurve::from_db(
            self.coefficients
                .iter()
                .zip(&self.offsets)
                .map(|(a, b)| b + a.iter().zip(x.iter()).map(|(c, v)| c * v).sum::<f64>())
                .collect(),
        )
    }
}

/// Single-sample response `sum_d (x_d - c_d)^2`.
#[derive(Debug, Clone)]
pub struct QuadraticBowl {
    center: DesignVector,
    sweep: FrequencySweep,
}

impl QuadraticBowl {
    pub fn new(center: Vec<f64>) -> Self {
        Self {
            center: DesignVector::new(center).expect("finite center"),
            sweep: FrequencySweep::new(vec![5.5], 5.0, 6.0).expect("valid sweep"),
        }
    }

    pub fn center(&self) -> &DesignVector {
        &self.center
    }
}

impl Evaluator for QuadraticBowl {
    fn dimension(&self) -> usize {
        self.center.dim()
    }

    fn sweep(&self) -> &FrequencySweep {
        &self.sweep
    }

    fn evaluate(&self, x: &DesignVector) -> Result<ResponseCurve, EvalError> {
        if x.dim() != self.center.dim() {
            return Err(EvalError::Failed(format!(
                "expected {} parameters, got {}",
                self.center.dim(),
                x.dim()
            )));
        }
        let r = x
            .iter()
            .zip(self.center.iter())
            .map(|(a, c)| (a - c) * (a - c))
            .sum();
        ResponseCurve::from_db(vec![r])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cache::EvalCache;
    use crate::perturb::{fd_jacobian, StepVector};

    #[test]
    fn bowl_is_zero_at_center() {
        let q = QuadraticBowl::new(vec![1.0, 2.0]);
        assert_eq!(q.evaluate(q.center()).unwrap()[0], 0.0);
    }

    #[test]
    fn affine_jacobian_recovered() {
        let f = AffineMinMax::seeded(11, 3, 5);
        let steps = StepVector::new(vec![0.01, 0.02, 0.03]).unwrap();
        let m = fd_jacobian(&EvalCache::new(), &f, &f.start(), &steps, f.bounds()).unwrap();
        for i in 0..5 {
            for d in 0..3 {
                assert!((m.entry(i, d) - f.coefficients()[i][d]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bowl_forward_difference_error_equals_step() {
        // d/dx_d of (x_d - c_d)^2 is 2 r; the forward difference adds exactly p.
        let q = QuadraticBowl::new(vec![1.0, 1.0]);
        let b = Bounds::new(vec![0.0, 0.0], vec![10.0, 10.0]).unwrap();
        let x = DesignVector::new(vec![3.0, 1.5]).unwrap();
        for p in [0.5, 0.05, 0.005] {
            let steps = StepVector::new(vec![p, p]).unwrap();
            let m = fd_jacobian(&EvalCache::new(), &q, &x, &steps, &b).unwrap();
            assert!((m.entry(0, 0) - (4.0 + p)).abs() < 1e-9);
            assert!((m.entry(0, 1) - (1.0 + p)).abs() < 1e-9);
        }
    }

    #[test]
    fn seeded_fixtures_are_deterministic() {
        let a = AffineMinMax::seeded(4, 2, 3);
        let b = AffineMinMax::seeded(4, 2, 3);
        assert_eq!(a.coefficients(), b.coefficients());
        assert_eq!(a.start(), b.start());
        assert!(a.bounds().contains(&a.start()));
    }
}
