//! Designs × perturbation-schemes experiments: plan files, the sweep runner,
//! summary tables and CSV exports for plotting.

pub mod plan;
pub mod plots;
pub mod sweep;
pub mod table;

pub use plan::{DesignEntry, SchemeEntry, SweepPlan};
pub use plots::{write_convergence_csv, write_fd_curve_csv, write_overlay_csv};
pub use sweep::{run_sweep, run_sweep_on, write_sweep_outputs, CellRun, SweepOutcome};
pub use table::{render_table, CellRecord, SchemeAggregate, SchemeColumn, SweepTable, TableFormat};

/// Arithmetic mean; `None` for an empty slice.
pub fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Sample standard deviation with the `n - 1` denominator; `None` below two
/// values.
pub fn sample_std(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let m = mean(values)?;
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    Some((ss / (values.len() - 1) as f64).sqrt())
}

/// Replaces anything outside `[A-Za-z0-9._-]` so labels can be used in file
/// names.
pub fn file_label(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reported_column_statistics() {
        let u = [
            -16.9, -27.2, -29.7, -30.7, -16.3, -27.1, -20.2, -27.0, -26.6, -16.1,
        ];
        let m = mean(&u).unwrap();
        let s = sample_std(&u).unwrap();
        assert!((m - -23.78).abs() < 1e-12);
        // Frozen from an independent computation; the population formula
        // would give 5.4686 instead.
        assert!((s - 5.764_411_890_595_991).abs() < 1e-12);
    }

    #[test]
    fn degenerate_statistics() {
        assert_eq!(mean(&[]), None);
        assert_eq!(mean(&[-3.0]), Some(-3.0));
        assert_eq!(sample_std(&[-3.0]), None);
        assert_eq!(sample_std(&[2.0, 2.0]), Some(0.0));
    }

    #[test]
    fn labels_are_file_safe() {
        assert_eq!(file_label("0.5pct"), "0.5pct");
        assert_eq!(file_label("my run/1"), "my_run_1");
    }

    proptest! {
        #[test]
        fn std_is_shift_invariant(v in proptest::collection::vec(-50.0f64..50.0, 2..30), c in -100.0f64..100.0) {
            let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
            let a = sample_std(&v).unwrap();
            let b = sample_std(&shifted).unwrap();
            prop_assert!((a - b).abs() < 1e-9 * (1.0 + a));
        }
    }
}
