use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use trustfd::adapter::{serve_mock, ExternalEvaluator, DEFAULT_TIMEOUT};
use trustfd::bench::{
    file_label, render_table, run_sweep_on, write_convergence_csv, write_fd_curve_csv,
    write_overlay_csv, write_sweep_outputs, SweepPlan, SweepTable, TableFormat,
};
use trustfd::perturb::{fd_error_curve, log_steps};
use trustfd::problems::noise::NoiseSpec;
use trustfd::problems::{build_problem, Problem, ProblemOptions};
use trustfd::trustloop::{write_trace_csv, EvalKind, EvalRecord};
use trustfd::{optimize, NormMode, PerturbationScheme, TrustConfig};

#[derive(Parser)]
#[command(
    name = "trustfd",
    version,
    about = "Trust-region optimization with finite-difference surrogates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one optimization and write its trace and final response.
    Optimize(OptimizeArgs),
    /// Run every design × scheme cell of a plan file.
    Sweep(SweepArgs),
    /// Tabulate forward-difference error against the step size.
    FdCurve(FdCurveArgs),
    /// Render the summary table of a finished sweep.
    Report(ReportArgs),
    /// Answer evaluation requests on stdin/stdout for a built-in problem.
    ServeMock(ServeArgs),
}

#[derive(Args)]
struct NoiseArgs {
    /// Seed for the noise field and for seeded problems.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Noise half-width in dB for the antenna problem.
    #[arg(long, default_value_t = NoiseSpec::default().amplitude_db)]
    noise_amplitude: f64,
    /// Noise cell edge as a fraction of each bound range.
    #[arg(long, default_value_t = NoiseSpec::default().cell_fraction)]
    cell_fraction: f64,
}

impl NoiseArgs {
    fn options(&self) -> ProblemOptions {
        ProblemOptions {
            noise: NoiseSpec {
                amplitude_db: self.noise_amplitude,
                cell_fraction: self.cell_fraction,
                seed: self.seed,
            },
            seed: self.seed,
        }
    }
}

#[derive(Args)]
struct OptimizeArgs {
    /// Built-in problem name, or `cmd:<command line>` for an external
    /// evaluator with the antenna geometry.
    #[arg(long)]
    problem: String,
    /// Fixture name (e.g. x1) or comma-separated values.
    #[arg(long)]
    design: String,
    /// fraction:F | sqrteps:E | custom:f1,...,fD
    #[arg(long, default_value = "fraction:0.03")]
    scheme: PerturbationScheme,
    /// Measure trust-region radius in box-normalized coordinates.
    #[arg(long)]
    normalize_box: bool,
    #[command(flatten)]
    noise: NoiseArgs,
    /// Evaluate through an external process (`cmd:<command line>`) while
    /// keeping the problem's geometry.
    #[arg(long)]
    evaluator: Option<String>,
    /// Per-request timeout for external evaluators, in seconds.
    #[arg(long, default_value_t = DEFAULT_TIMEOUT.as_secs_f64())]
    timeout: f64,
    /// Evaluation budget (default 200 * (D + 1)).
    #[arg(long)]
    max_evals: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    plan: PathBuf,
    /// Output directory; overrides the plan's `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Concurrent cells; overrides the plan's `jobs`.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_TIMEOUT.as_secs_f64())]
    timeout: f64,
}

#[derive(Args)]
struct FdCurveArgs {
    /// sin, cos or exp.
    #[arg(long, default_value = "sin")]
    function: String,
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_4)]
    point: f64,
    /// `log:LO:HI:COUNT` or a comma-separated list.
    #[arg(long, default_value = "log:1e-12:1e-1:60")]
    steps: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Sweep output directory containing cells.csv.
    #[arg(long = "in")]
    input: PathBuf,
    /// markdown or csv.
    #[arg(long, default_value = "markdown")]
    format: TableFormat,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    problem: String,
    #[command(flatten)]
    noise: NoiseArgs,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Optimize(a) => run_optimize(a),
        Command::Sweep(a) => run_sweep_cmd(a),
        Command::FdCurve(a) => run_fd_curve(a),
        Command::Report(a) => run_report(a),
        Command::ServeMock(a) => run_serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn timeout(secs: f64) -> Result<Duration> {
    Duration::try_from_secs_f64(secs).map_err(|_| anyhow!("invalid timeout {secs}"))
}

/// Spawns `cmd:<command line>` as an evaluator for `geometry`.
fn external(spec: &str, geometry: &Problem, limit: Duration) -> Result<Problem> {
    let line = spec
        .strip_prefix("cmd:")
        .ok_or_else(|| anyhow!("external evaluator must look like cmd:<command>, got `{spec}`"))?;
    let words = shell_words::split(line).context("cannot split evaluator command")?;
    let (program, args) = words
        .split_first()
        .ok_or_else(|| anyhow!("empty evaluator command"))?;
    let ev = ExternalEvaluator::spawn(
        program,
        args,
        geometry.evaluator.dimension(),
        geometry.evaluator.sweep().clone(),
    )?
    .with_timeout(limit);
    Ok(Problem {
        name: spec.to_string(),
        evaluator: Arc::new(ev),
        bounds: geometry.bounds.clone(),
        designs: geometry.designs.clone(),
    })
}

fn resolve_problem(name: &str, opts: &ProblemOptions, limit: Duration) -> Result<Problem> {
    if name.starts_with("cmd:") {
        let geometry = build_problem("antenna", opts)?;
        return external(name, &geometry, limit);
    }
    Ok(build_problem(name, opts)?)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| {
        format!("cannot create {}", path.display())
    })?))
}

fn write_eval_log(log: &[EvalRecord], path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let dim = log.first().map_or(0, |r| r.design.dim());
    let cols: Vec<String> = (0..dim).map(|d| format!("x{}", d + 1)).collect();
    writeln!(w, "index,kind,cache_hit,{}", cols.join(","))?;
    for (k, r) in log.iter().enumerate() {
        let kind = match r.kind {
            EvalKind::Center => "center",
            EvalKind::Probe => "probe",
            EvalKind::Candidate => "candidate",
        };
        let xs: Vec<String> = r.design.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{k},{kind},{},{}", u8::from(r.cache_hit), xs.join(","))?;
    }
    w.flush()?;
    Ok(())
}

fn run_optimize(a: OptimizeArgs) -> Result<()> {
    let opts = a.noise.options();
    let limit = timeout(a.timeout)?;
    let mut problem = resolve_problem(&a.problem, &opts, limit)?;
    if let Some(spec) = &a.evaluator {
        problem = external(spec, &problem, limit)?;
    }
    let (label, x0) = problem.design(&a.design)?;
    let cfg = TrustConfig {
        norm: if a.normalize_box {
            NormMode::UnitBox
        } else {
            NormMode::Euclidean
        },
        max_evals: a.max_evals,
        ..TrustConfig::with_scheme(a.scheme.clone())
    };
    fs::create_dir_all(&a.out).with_context(|| format!("cannot create {}", a.out.display()))?;

    let outcome = optimize(&*problem.evaluator, &x0, &problem.bounds, &cfg);
    let (trace, log) = match &outcome {
        Ok(r) => (&r.trace, &r.eval_log),
        Err(f) => (&f.trace, &f.eval_log),
    };
    let mut w = create(&a.out.join("trace.csv"))?;
    write_trace_csv(trace, &mut w)?;
    w.flush()?;
    write_eval_log(log, &a.out.join("evaluations.csv"))?;

    let r = outcome.map_err(|f| anyhow!("run on design {label} failed: {f}"))?;
    let mut w = create(&a.out.join("convergence.csv"))?;
    write_convergence_csv(&r.trace, r.initial_objective, &mut w)?;
    w.flush()?;
    let mut w = create(&a.out.join("response.csv"))?;
    let run_label = file_label(&a.scheme.label());
    write_overlay_csv(
        problem.evaluator.sweep(),
        &[(run_label, &r.best_response)],
        &mut w,
    )?;
    w.flush()?;

    let summary = serde_json::json!({
        "problem": a.problem,
        "design": label,
        "scheme": a.scheme.to_string(),
        "initial_design": x0.as_slice(),
        "steps": r.steps.as_slice(),
        "initial_objective_db": r.initial_objective,
        "final_objective_db": r.best_objective,
        "best_design": r.best.as_slice(),
        "evaluations": r.evaluations,
        "jacobian_builds": r.jacobian_builds,
        "accepted_iterations": r.accepted_iterations(),
        "trials": r.trace.len(),
        "termination": r.termination.to_string(),
    });
    let mut w = create(&a.out.join("result.json"))?;
    serde_json::to_writer_pretty(&mut w, &summary)?;
    writeln!(w)?;
    w.flush()?;

    println!(
        "{label} {}: U {:.3} -> {:.3} dB, {} evaluations, stopped on {}",
        a.scheme.label(),
        r.initial_objective,
        r.best_objective,
        r.evaluations,
        r.termination
    );
    Ok(())
}

fn run_sweep_cmd(a: SweepArgs) -> Result<()> {
    let mut plan = SweepPlan::load(&a.plan)?;
    if let Some(jobs) = a.jobs {
        plan.jobs = jobs;
    }
    let out = a
        .out
        .or_else(|| plan.output_dir.clone())
        .ok_or_else(|| anyhow!("no output directory: pass --out or set output_dir in the plan"))?;
    let problem = resolve_problem(&plan.problem, &plan.problem_options(), timeout(a.timeout)?)?;
    let outcome = run_sweep_on(&plan, &problem)?;
    write_sweep_outputs(&outcome, &problem, &out)?;
    print!("{}", render_table(&outcome.table, TableFormat::Markdown));
    let excluded = outcome.table.excluded();
    if excluded > 0 {
        eprintln!("{excluded} cell(s) failed and were excluded from the aggregates");
    }
    Ok(())
}

fn parse_steps(spec: &str) -> Result<Vec<f64>> {
    if let Some(rest) = spec.strip_prefix("log:") {
        let parts: Vec<&str> = rest.split(':').collect();
        let [lo, hi, n] = parts[..] else {
            bail!("step spec must look like log:LO:HI:COUNT, got `{spec}`");
        };
        return Ok(log_steps(lo.parse()?, hi.parse()?, n.parse()?)?);
    }
    spec.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .with_context(|| format!("invalid step `{t}`"))
        })
        .collect()
}

type ScalarFn = fn(f64) -> f64;

fn run_fd_curve(a: FdCurveArgs) -> Result<()> {
    let steps = parse_steps(&a.steps)?;
    let (f, df): (ScalarFn, ScalarFn) = match a.function.as_str() {
        "sin" => (f64::sin, f64::cos),
        "cos" => (f64::cos, |t| -t.sin()),
        "exp" => (f64::exp, f64::exp),
        other => bail!("unknown function `{other}` (expected sin, cos or exp)"),
    };
    let rows = fd_error_curve(f, df, a.point, &steps)?;
    if let Some(dir) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut w = create(&a.out)?;
    write_fd_curve_csv(&rows, &mut w)?;
    w.flush()?;
    Ok(())
}

fn run_report(a: ReportArgs) -> Result<()> {
    let path = a.input.join("cells.csv");
    let file = File::open(&path).with_context(|| format!("cannot open {}", path.display()))?;
    let table = SweepTable::read_cells_csv(file)?;
    print!("{}", render_table(&table, a.format));
    Ok(())
}

fn run_serve(a: ServeArgs) -> Result<()> {
    let problem = build_problem(&a.problem, &a.noise.options())?;
    let stdin = io::stdin();
    let stdout = io::stdout();
    serve_mock(
        &*problem.evaluator,
        stdin.lock(),
        stdout.lock(),
        io::stderr(),
    )?;
    Ok(())
}
