use crate::error::{Error, Result};
use crate::types::{FrequencySweep, ResponseCurve};

/// Worst (largest) in-band response level in dB. Band ends are inclusive and
/// out-of-band samples are ignored.
pub fn objective_minmax(r: &ResponseCurve, sweep: &FrequencySweep) -> Result<f64> {
    if r.len() != sweep.len() {
        return Err(Error::DimensionMismatch {
            expected: sweep.len(),
            actual: r.len(),
        });
    }
    Ok(band_max(r, sweep.in_band()))
}

pub(crate) fn band_max(values: &[f64], band: &[usize]) -> f64 {
    band.iter()
        .map(|&i| values[i])
        .fold(f64::NEG_INFINITY, f64::max)
}
