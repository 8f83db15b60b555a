//! CSV exports behind convergence, response-overlay and FD-error plots.

use std::io::{self, Write};

use crate::perturb::FdErrorRow;
use crate::trustloop::TraceRow;
use crate::types::{FrequencySweep, ResponseCurve};

pub const CONVERGENCE_HEADER: &str = "iter,objective_db,best_db,delta,cum_evals,accepted";
pub const FD_CURVE_HEADER: &str = "step,residual,abs_residual";

/// One row per trial with the running best objective. `initial_db` seeds the
/// running best; an empty trace gives a header-only file.
pub fn write_convergence_csv<W: Write>(
    trace: &[TraceRow],
    initial_db: f64,
    mut out: W,
) -> io::Result<()> {
    writeln!(out, "{CONVERGENCE_HEADER}")?;
    let mut best = initial_db;
    for r in trace {
        if r.accepted {
            best = best.min(r.objective_db);
        }
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.iter,
            r.objective_db,
            best,
            r.delta,
            r.cum_evals,
            u8::from(r.accepted)
        )?;
    }
    Ok(())
}

/// `freq,run_<label>_db,...`: one response per column on a shared sweep.
pub fn write_overlay_csv<W: Write>(
    sweep: &FrequencySweep,
    runs: &[(String, &ResponseCurve)],
    mut out: W,
) -> io::Result<()> {
    let mut header = String::from("freq");
    for (label, r) in runs {
        if r.len() != sweep.len() {
            return Err(io::Error::new(
                io::ErrorKind::InvalidInput,
                format!(
                    "response `{label}` has {} samples, sweep has {}",
                    r.len(),
                    sweep.len()
                ),
            ));
        }
        header.push_str(&format!(",run_{label}_db"));
    }
    writeln!(out, "{header}")?;
    for (j, f) in sweep.points().iter().enumerate() {
        write!(out, "{f}")?;
        for (_, r) in runs {
            write!(out, ",{}", r[j])?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Non-finite residuals leave both residual fields empty.
pub fn write_fd_curve_csv<W: Write>(rows: &[FdErrorRow], mut out: W) -> io::Result<()> {
    writeln!(out, "{FD_CURVE_HEADER}")?;
    for r in rows {
        match r.residual {
            Some(v) => writeln!(out, "{},{},{}", r.step, v, v.abs())?,
            None => writeln!(out, "{},,", r.step)?,
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::DesignVector;

    fn text(f: impl FnOnce(&mut Vec<u8>) -> io::Result<()>) -> String {
        let mut buf = Vec::new();
        f(&mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn empty_trace_is_header_only() {
        let s = text(|b| write_convergence_csv(&[], -3.0, b));
        assert_eq!(s, format!("{CONVERGENCE_HEADER}\n"));
    }

    #[test]
    fn running_best_ignores_rejected_trials() {
        let row = |iter, objective_db, accepted| TraceRow {
            iter,
            candidate: DesignVector::new(vec![1.0]).unwrap(),
            accepted,
            rho: 0.5,
            delta: 1.0,
            step_norm: 0.5,
            objective_db,
            predicted_db: objective_db,
            cum_evals: 3 + iter,
        };
        let s =
            text(|b| write_convergence_csv(&[row(0, -5.0, true), row(1, -9.0, false)], -1.0, b));
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[1], "0,-5,-5,1,3,1");
        assert_eq!(lines[2], "1,-9,-5,1,4,0");
    }

    #[test]
    fn overlay_columns_follow_run_labels() {
        let sweep = FrequencySweep::new(vec![5.0, 5.5], 5.0, 6.0).unwrap();
        let a = ResponseCurve::from_db(vec![-1.0, -2.0]).unwrap();
        let b = ResponseCurve::from_db(vec![-3.0, -4.5]).unwrap();
        let s = text(|w| write_overlay_csv(&sweep, &[("1pct".into(), &a), ("3pct".into(), &b)], w));
        assert_eq!(s, "freq,run_1pct_db,run_3pct_db\n5,-1,-3\n5.5,-2,-4.5\n");
    }

    #[test]
    fn fd_curve_layout() {
        let rows = [
            FdErrorRow {
                step: 0.1,
                residual: Some(-0.25),
            },
            FdErrorRow {
                step: 0.2,
                residual: None,
            },
        ];
        let s = text(|w| write_fd_curve_csv(&rows, w));
        assert_eq!(s, "step,residual,abs_residual\n0.1,-0.25,0.25\n0.2,,\n");
    }
}
