use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::bench::file_label;
use crate::bench::plan::SweepPlan;
use crate::bench::plots::{write_convergence_csv, write_overlay_csv};
use crate::bench::table::{render_table, CellRecord, SweepTable, TableFormat};
use crate::error::{Error, Result};
use crate::problems::{build_problem, Problem};
use crate::trustloop::{optimize, write_trace_csv, RunFailure, RunResult, TrustConfig};
use crate::types::ResponseCurve;

/// One finished cell with its full run record.
#[derive(Debug, Clone)]
pub struct CellRun {
    pub design: String,
    pub scheme: String,
    pub outcome: std::result::Result<RunResult, RunFailure>,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub table: SweepTable,
    pub runs: Vec<CellRun>,
}

/// Runs every (design, scheme) cell of a plan on a named built-in problem.
pub fn run_sweep(plan: &SweepPlan) -> Result<SweepOutcome> {
    plan.validate()?;
    let problem = build_problem(&plan.problem, &plan.problem_options())?;
    run_sweep_on(plan, &problem)
}

/// Runs every cell against `problem`. Each cell owns its cache, so results
/// do not depend on `plan.jobs` or on scheduling.
pub fn run_sweep_on(plan: &SweepPlan, problem: &Problem) -> Result<SweepOutcome> {
    plan.validate()?;
    let dim = problem.evaluator.dimension();
    let designs = plan.resolve_designs(problem)?;
    for s in &plan.schemes {
        s.scheme().fractions(dim)?;
    }

    let jobs: Vec<(usize, usize)> = (0..designs.len())
        .flat_map(|d| (0..plan.schemes.len()).map(move |s| (d, s)))
        .collect();
    let run_cell = |&(d, s): &(usize, usize)| {
        let (label, x0) = &designs[d];
        let cfg = TrustConfig {
            scheme: plan.schemes[s].scheme().clone(),
            ..plan.trust.clone()
        };
        CellRun {
            design: label.clone(),
            scheme: plan.schemes[s].label(),
            outcome: optimize(&*problem.evaluator, x0, &problem.bounds, &cfg),
        }
    };
    let runs: Vec<CellRun> = if plan.jobs > 1 && problem.evaluator.supports_concurrency() {
        rayon::ThreadPoolBuilder::new()
            .num_threads(plan.jobs)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(|| jobs.par_iter().map(run_cell).collect())
    } else {
        jobs.iter().map(run_cell).collect()
    };

    let cells = jobs
        .iter()
        .zip(&runs)
        .map(|(&(_, s), run)| {
            let entry = &plan.schemes[s];
            let mut cell = CellRecord {
                design: run.design.clone(),
                scheme: run.scheme.clone(),
                scheme_spec: entry.scheme().to_string(),
                overhead_evals: entry.overhead_evals(),
                initial_db: None,
                final_db: None,
                evaluations: 0,
                jacobian_builds: None,
                accepted: None,
                termination: None,
                error: None,
            };
            match &run.outcome {
                Ok(r) => {
                    cell.initial_db = Some(r.initial_objective);
                    cell.final_db = Some(r.best_objective);
                    cell.evaluations = r.evaluations;
                    cell.jacobian_builds = Some(r.jacobian_builds);
                    cell.accepted = Some(r.accepted_iterations());
                    cell.termination = Some(r.termination.to_string());
                }
                Err(f) => {
                    cell.evaluations = f.evaluations;
                    cell.error = Some(f.error.to_string());
                }
            }
            cell
        })
        .collect();
    Ok(SweepOutcome {
        table: SweepTable::from_cells(cells),
        runs,
    })
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Writes `cells.csv`, `table.md`, `table.csv`, `best_designs.csv`, and per
/// cell `trace_<design>_<scheme>.csv` / `convergence_<design>_<scheme>.csv`,
/// plus one `overlay_<design>.csv` per design.
pub fn write_sweep_outputs(outcome: &SweepOutcome, problem: &Problem, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let mut w = create(dir, "cells.csv")?;
    outcome.table.write_cells_csv(&mut w)?;
    w.flush()?;
    for (name, format) in [
        ("table.md", TableFormat::Markdown),
        ("table.csv", TableFormat::Csv),
    ] {
        let mut w = create(dir, name)?;
        w.write_all(render_table(&outcome.table, format).as_bytes())?;
        w.flush()?;
    }

    let mut best = create(dir, "best_designs.csv")?;
    let dim = problem.bounds.dim();
    let cols: Vec<String> = (0..dim).map(|d| format!("x{}", d + 1)).collect();
    writeln!(best, "design,scheme,final_db,{}", cols.join(","))?;
    for run in &outcome.runs {
        let tag = format!("{}_{}", file_label(&run.design), file_label(&run.scheme));
        let (trace, initial) = match &run.outcome {
            Ok(r) => {
                let xs: Vec<String> = r.best.iter().map(|v| v.to_string()).collect();
                writeln!(
                    best,
                    "{},{},{},{}",
                    run.design,
                    run.scheme,
                    r.best_objective,
                    xs.join(",")
                )?;
                (&r.trace, r.initial_objective)
            }
            Err(f) => (&f.trace, f64::NAN),
        };
        let mut w = create(dir, &format!("trace_{tag}.csv"))?;
        write_trace_csv(trace, &mut w)?;
        w.flush()?;
        let mut w = create(dir, &format!("convergence_{tag}.csv"))?;
        write_convergence_csv(trace, initial, &mut w)?;
        w.flush()?;
    }
    best.flush()?;

    for design in &outcome.table.designs {
        let curves: Vec<(String, &ResponseCurve)> = outcome
            .runs
            .iter()
            .filter(|r| &r.design == design)
            .filter_map(|r| {
                r.outcome
                    .as_ref()
                    .ok()
                    .map(|o| (file_label(&r.scheme), &o.best_response))
            })
            .collect();
        let mut w = create(dir, &format!("overlay_{}.csv", file_label(design)))?;
        write_overlay_csv(problem.evaluator.sweep(), &curves, &mut w)?;
        w.flush()?;
    }
    Ok(())
}
