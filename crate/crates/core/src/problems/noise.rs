//! Piecewise-constant pseudo-random overlay that mimics re-meshing noise.
//!
//! The design box is cut into cells of `cell_fraction * (u_d - l_d)` along
//! every axis. Within one cell the overlay is constant; across cells it jumps
//! to an independent value. Values come from integer hashing only, so they are
//! bit-reproducible on every platform.

use serde::{Deserialize, Serialize};

use crate::hash::{splitmix64, unit_f64};
use crate::types::Bounds;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    /// Half-width of the uniform overlay in dB. Zero disables noise exactly.
    pub amplitude_db: f64,
    /// Cell edge as a fraction of each variable's bound range.
    pub cell_fraction: f64,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            amplitude_db: 0.5,
            cell_fraction: 0.001,
            seed: 0,
        }
    }
}

impl NoiseSpec {
    pub fn off() -> Self {
        Self {
            amplitude_db: 0.0,
            ..Self::default()
        }
    }

    pub fn is_valid(&self) -> bool {
        self.amplitude_db >= 0.0
            && self.amplitude_db.is_finite()
            && self.cell_fraction > 0.0
            && self.cell_fraction < 1.0
    }
}

/// Cell index of `x` along every axis.
pub fn cell_index(spec: &NoiseSpec, bounds: &Bounds, x: &[f64]) -> Vec<i64> {
    x.iter()
        .enumerate()
        .map(|(d, v)| {
            let cell = spec.cell_fraction * bounds.range(d);
            ((v - bounds.lower()[d]) / cell).floor() as i64
        })
        .collect()
}

/// Uniform in `[0, 1)` keyed by seed, cell and sample index.
fn h01(seed: u64, cell: &[i64], sample: usize) -> f64 {
    let mut h = splitmix64(seed);
    for &k in cell {
        h = splitmix64(h ^ k as u64);
    }
    unit_f64(splitmix64(h ^ splitmix64(sample as u64)))
}

/// Additive noise in dB for each of `samples` frequency points.
pub fn noise_overlay(spec: &NoiseSpec, bounds: &Bounds, x: &[f64], samples: usize) -> Vec<f64> {
    if spec.amplitude_db == 0.0 {
        return vec![0.0; samples];
    }
    let cell = cell_index(spec, bounds, x);
    (0..samples)
        .map(|j| spec.amplitude_db * (2.0 * h01(spec.seed, &cell, j) - 1.0))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hash::SplitMix;

    fn bounds() -> Bounds {
        Bounds::new(vec![0.0, 10.0], vec![1.0, 20.0]).unwrap()
    }

    #[test]
    fn zero_amplitude_is_silent() {
        let s = NoiseSpec::off();
        assert!(noise_overlay(&s, &bounds(), &[0.3, 12.0], 7)
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn same_cell_same_noise() {
        let s = NoiseSpec::default();
        // Cells are 0.001 wide along the first axis and 0.01 along the second.
        let a = noise_overlay(&s, &bounds(), &[0.5001, 12.001], 11);
        let b = noise_overlay(&s, &bounds(), &[0.5009, 12.009], 11);
        assert_eq!(a, b);
        assert!(a.iter().all(|v| v.abs() <= 0.5));
    }

    #[test]
    fn adjacent_cells_differ() {
        let s = NoiseSpec::default();
        let b = bounds();
        let mut rng = SplitMix::new(99);
        let mut differ = 0;
        for _ in 0..100 {
            let x = [rng.uniform(0.0, 0.99), rng.uniform(10.0, 19.9)];
            let cell = 0.001;
            let y = [x[0] + cell, x[1]];
            if cell_index(&s, &b, &x) == cell_index(&s, &b, &y) {
                continue;
            }
            if noise_overlay(&s, &b, &x, 5) != noise_overlay(&s, &b, &y, 5) {
                differ += 1;
            }
        }
        assert!(differ >= 95, "{differ}");
    }

    #[test]
    fn seed_changes_the_field() {
        let b = bounds();
        let s1 = NoiseSpec {
            seed: 1,
            ..NoiseSpec::default()
        };
        let s2 = NoiseSpec {
            seed: 2,
            ..NoiseSpec::default()
        };
        assert_ne!(
            noise_overlay(&s1, &b, &[0.5, 15.0], 4),
            noise_overlay(&s2, &b, &[0.5, 15.0], 4)
        );
    }
}
