//! Two-resonance stand-in for a planar antenna's reflection response.
//!
//! With `x = [L, l2, W, w2, l0, o0]` the two resonances sit at
//! `f1 = c1 / (L + 0.3 l2 + W)` and `f2 = c2 / (l2 + o0)`. Their depths peak
//! when `w2` and `l0` hit their matching values, and the curve is the
//! baseline minus two Gaussian dips, floored, plus the mesh-noise overlay.

use serde::{Deserialize, Serialize};

use crate::error::{Error, EvalError, Result};
use crate::evaluator::Evaluator;
use crate::problems::fixtures;
use crate::problems::noise::{noise_overlay, NoiseSpec};
use crate::types::{Bounds, DesignVector, FrequencySweep, ResponseCurve};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticAntennaSpec {
    /// GHz·mm
    pub c1: f64,
    /// GHz·mm
    pub c2: f64,
    /// GHz
    pub sigma1: f64,
    /// GHz
    pub sigma2: f64,
    pub depth1_max_db: f64,
    pub depth2_max_db: f64,
    pub w2_match_mm: f64,
    pub l0_match_mm: f64,
    pub w2_width_mm: f64,
    pub l0_width_mm: f64,
    pub baseline_db: f64,
    pub floor_db: f64,
    pub noise: NoiseSpec,
}

impl Default for SyntheticAntennaSpec {
    fn default() -> Self {
        Self {
            c1: 140.0,
            c2: 130.0,
            sigma1: 0.25,
            sigma2: 0.35,
            depth1_max_db: 25.0,
            depth2_max_db: 20.0,
            w2_match_mm: 1.2,
            l0_match_mm: 10.0,
            w2_width_mm: 0.8,
            l0_width_mm: 4.0,
            baseline_db: -1.0,
            floor_db: -40.0,
            noise: NoiseSpec::default(),
        }
    }
}

impl SyntheticAntennaSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.c1,
            self.c2,
            self.sigma1,
            self.sigma2,
            self.depth1_max_db,
            self.depth2_max_db,
            self.w2_width_mm,
            self.l0_width_mm,
        ];
        if !positive.iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(Error::config(
                "antenna widths, depths and coefficients must be positive",
            ));
        }
        if self.floor_db.partial_cmp(&self.baseline_db) != Some(std::cmp::Ordering::Less) {
            return Err(Error::config("antenna floor must lie below the baseline"));
        }
        if !self.noise.is_valid() {
            return Err(Error::config(
                "noise amplitude must be >= 0 and cell fraction in (0, 1)",
            ));
        }
        Ok(())
    }

    /// Resonance frequencies in GHz.
    pub fn resonances(&self, x: &[f64]) -> (f64, f64) {
        let (l, l2, w, o0) = (x[0], x[1], x[2], x[5]);
        (self.c1 / (l + 0.3 * l2 + w), self.c2 / (l2 + o0))
    }

    /// Dip depths in dB.
    pub fn depths(&self, x: &[f64]) -> (f64, f64) {
        let g = |v: f64, c: f64, w: f64| (-((v - c) / w).powi(2)).exp();
        (
            self.depth1_max_db * g(x[3], self.w2_match_mm, self.w2_width_mm),
            self.depth2_max_db * g(x[4], self.l0_match_mm, self.l0_width_mm),
        )
    }
}

pub fn antenna_response(
    spec: &SyntheticAntennaSpec,
    bounds: &Bounds,
    x: &[f64],
    sweep: &FrequencySweep,
) -> Result<ResponseCurve> {
    if x.len() != 6 {
        return Err(Error::DimensionMismatch {
            expected: 6,
            actual: x.len(),
        });
    }
    let (f1, f2) = spec.resonances(x);
    let (d1, d2) = spec.depths(x);
    let noise = noise_overlay(&spec.noise, bounds, x, sweep.len());
    let values = sweep
        .points()
        .iter()
        .zip(noise)
        .map(|(&f, n)| {
            let dip1 = d1 * (-(f - f1).powi(2) / (2.0 * spec.sigma1 * spec.sigma1)).exp();
            let dip2 = d2 * (-(f - f2).powi(2) / (2.0 * spec.sigma2 * spec.sigma2)).exp();
            (spec.baseline_db - dip1 - dip2).max(spec.floor_db) + n
        })
        .collect();
    ResponseCurve::from_db(values).map_err(|source| Error::Evaluation {
        x: x.to_vec(),
        source,
    })
}

/// [`antenna_response`] on the fixture bounds as an [`Evaluator`].
#[derive(Debug, Clone)]
pub struct SyntheticAntenna {
    spec: SyntheticAntennaSpec,
    bounds: Bounds,
    sweep: FrequencySweep,
}

impl SyntheticAntenna {
    pub fn new(spec: SyntheticAntennaSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            spec,
            bounds: fixtures::antenna_bounds(),
            sweep: fixtures::antenna_sweep(),
        })
    }

    pub fn with_noise(noise: NoiseSpec) -> Result<Self> {
        Self::new(SyntheticAntennaSpec {
            noise,
            ..SyntheticAntennaSpec::default()
        })
    }

    pub fn spec(&self) -> &SyntheticAntennaSpec {
        &self.spec
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }
}

impl Evaluator for SyntheticAntenna {
    fn dimension(&self) -> usize {
        6
    }

    fn sweep(&self) -> &FrequencySweep {
        &self.sweep
    }

    fn evaluate(&self, x: &DesignVector) -> std::result::Result<ResponseCurve, EvalError> {
        antenna_response(&self.spec, &self.bounds, x, &self.sweep).map_err(|e| match e {
            Error::Evaluation { source, .. } => source,
            other => EvalError::Failed(other.to_string()),
        })
    }
}
