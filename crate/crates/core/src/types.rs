//! Design-space and response types shared by every module.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, EvalError, Result};

/// A point in the D-dimensional design space. Always non-empty and finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DesignVector(Vec<f64>);

impl DesignVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::config("design vector must have at least one entry"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::config(format!(
                "design vector entry {i} is not finite ({})",
                values[i]
            )));
        }
        Ok(Self(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Copy with entry `d` replaced. The caller guarantees `value` is finite.
    pub(crate) fn with_entry(&self, d: usize, value: f64) -> Self {
        debug_assert!(value.is_finite());
        let mut v = self.0.clone();
        v[d] = value;
        Self(v)
    }

    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        debug_assert!(!values.is_empty() && values.iter().all(|v| v.is_finite()));
        Self(values)
    }
}

impl Deref for DesignVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for DesignVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<DesignVector> for Vec<f64> {
    fn from(x: DesignVector) -> Self {
        x.0
    }
}

/// Box constraints `lower[d] < upper[d]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                actual: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(Error::config("bounds must have at least one dimension"));
        }
        for (d, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !l.is_finite() || !u.is_finite() || l >= u {
                return Err(Error::config(format!(
                    "bounds for dimension {d} are invalid: lower {l}, upper {u}"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn range(&self, d: usize) -> f64 {
        self.upper[d] - self.lower[d]
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| l <= v && v <= u)
    }

    pub(crate) fn check_dim(&self, actual: usize) -> Result<()> {
        if actual != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual,
            });
        }
        Ok(())
    }
}

/// Componentwise clamp of `x` into the box.
pub fn clip_to_bounds(x: &DesignVector, b: &Bounds) -> Result<DesignVector> {
    b.check_dim(x.dim())?;
    let clipped = x
        .iter()
        .zip(b.lower.iter().zip(&b.upper))
        .map(|(&v, (&l, &u))| v.max(l).min(u))
        .collect();
    Ok(DesignVector(clipped))
}

/// Frequency samples (GHz) together with the objective band `[band_lo, band_hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencySweep {
    points: Vec<f64>,
    band_lo: f64,
    band_hi: f64,
    in_band: Vec<usize>,
}

impl FrequencySweep {
    pub fn new(points: Vec<f64>, band_lo: f64, band_hi: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::config("frequency sweep is empty"));
        }
        if points.iter().any(|f| !f.is_finite()) || !band_lo.is_finite() || !band_hi.is_finite() {
            return Err(Error::config("frequency sweep contains non-finite values"));
        }
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config(
                "frequency points must be strictly increasing",
            ));
        }
        if band_lo >= band_hi {
            return Err(Error::config(format!(
                "band [{band_lo}, {band_hi}] is empty"
            )));
        }
        // Band ends are inclusive.
        let in_band: Vec<usize> = points
            .iter()
            .enumerate()
            .filter(|(_, &f)| band_lo <= f && f <= band_hi)
            .map(|(i, _)| i)
            .collect();
        if in_band.is_empty() {
            return Err(Error::config(format!(
                "no frequency sample lies inside the band [{band_lo}, {band_hi}]"
            )));
        }
        Ok(Self {
            points,
            band_lo,
            band_hi,
            in_band,
        })
    }

    /// `count` uniformly spaced points on `[start, stop]`.
    pub fn uniform(
        start: f64,
        stop: f64,
        count: usize,
        band_lo: f64,
        band_hi: f64,
    ) -> Result<Self> {
        if count == 0 {
            return Err(Error::config("frequency sweep is empty"));
        }
        let points = if count == 1 {
            vec![start]
        } else {
            let step = (stop - start) / (count - 1) as f64;
            (0..count).map(|i| start + step * i as f64).collect()
        };
        Self::new(points, band_lo, band_hi)
    }

    /// 201 points on [4, 7] GHz with the objective band [5, 6] GHz.
    pub fn antenna_default() -> Self {
        Self::uniform(4.0, 7.0, 201, 5.0, 6.0).expect("default sweep is valid")
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn band(&self) -> (f64, f64) {
        (self.band_lo, self.band_hi)
    }

    /// Indices of the samples inside the band, ascending.
    pub fn in_band(&self) -> &[usize] {
        &self.in_band
    }
}

/// A response in dB sampled on a [`FrequencySweep`]. All entries are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseCurve(Vec<f64>);

impl ResponseCurve {
    pub fn from_db(values: Vec<f64>) -> Result<Self, EvalError> {
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(EvalError::NonFinite { index });
        }
        Ok(Self(values))
    }

    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Deref for ResponseCurve {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dv(v: &[f64]) -> DesignVector {
        DesignVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn clip_clamps_each_component() {
        let b = Bounds::new(vec![1.0, 1.0], vec![4.0, 4.0]).unwrap();
        assert_eq!(
            clip_to_bounds(&dv(&[0.0, 5.0]), &b).unwrap().as_slice(),
            &[1.0, 4.0]
        );
        assert_eq!(
            clip_to_bounds(&dv(&[2.0, 3.0]), &b).unwrap().as_slice(),
            &[2.0, 3.0]
        );
    }

    #[test]
    fn clip_against_antenna_upper_bound() {
        let b = crate::problems::fixtures::antenna_bounds();
        let x = dv(&[25.1, 15.1, 6.79, 1.72, 9.07, 6.05]);
        let c = clip_to_bounds(&x, &b).unwrap();
        assert_eq!(c[0], 25.0);
        assert_eq!(&c[1..], &x[1..]);
    }

    #[test]
    fn clip_rejects_dimension_mismatch() {
        let b = Bounds::new(vec![0.0], vec![1.0]).unwrap();
        assert!(matches!(
            clip_to_bounds(&dv(&[0.5, 0.5]), &b),
            Err(Error::DimensionMismatch {
                expected: 1,
                actual: 2
            })
        ));
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        assert!(DesignVector::new(vec![]).is_err());
        assert!(DesignVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(Bounds::new(vec![1.0], vec![1.0]).is_err());
        assert!(FrequencySweep::new(vec![1.0, 1.0], 0.0, 2.0).is_err());
        assert!(FrequencySweep::new(vec![1.0, 2.0], 3.0, 4.0).is_err());
        assert!(FrequencySweep::new(vec![1.0, 2.0], 2.0, 1.0).is_err());
        assert!(matches!(
            ResponseCurve::from_db(vec![0.0, f64::INFINITY]),
            Err(EvalError::NonFinite { index: 1 })
        ));
    }

    #[test]
    fn default_sweep_brackets_band() {
        let s = FrequencySweep::antenna_default();
        assert_eq!(s.len(), 201);
        assert_eq!(s.points()[0], 4.0);
        assert!((s.points()[200] - 7.0).abs() < 1e-12);
        let first = s.points()[s.in_band()[0]];
        let last = s.points()[*s.in_band().last().unwrap()];
        // The 15 MHz grid does not land on the band edges.
        assert!(first >= 5.0 && first - 0.015 < 5.0);
        assert!(last <= 6.0 && last + 0.015 > 6.0);
    }

    proptest! {
        #[test]
        fn clip_is_idempotent(x in proptest::collection::vec(-50.0f64..50.0, 3)) {
            let b = Bounds::new(vec![-1.0, 0.0, 2.0], vec![1.0, 10.0, 3.0]).unwrap();
            let once = clip_to_bounds(&dv(&x), &b).unwrap();
            let twice = clip_to_bounds(&once, &b).unwrap();
            prop_assert_eq!(&once, &twice);
            prop_assert!(b.contains(&once));
        }
    }
}
