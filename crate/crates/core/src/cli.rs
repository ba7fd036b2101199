//! Command-line entry point: load a plan, dispatch, write artifacts.
//!
//! Exit status: 0 success, 2 invalid plan or arguments, 3 solver failure
//! (no convergence, uncertified map, singular system, non-positive slope),
//! 4 any other runtime failure.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use log::info;
use serde::Serialize;
use serde_json::json;

use crate::demand::{default_grid_resolution, DemandBounds};
use crate::equilibrium::{
    contraction_report, gmv_optimize, linear_cv_closed_form, solve_fixed_point, sweep_conjecture, ContractionReport,
};
use crate::error::{Error, Result};
use crate::harness::{correlation_sweep, fit_rate, run_replications};
use crate::io::{self, ArtifactDir, Manifest};
use crate::plan::{OutputFormat, Plan};
use crate::sldl::{inf_dist, run_sldl};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Subcommand {
    /// Fixed point for the plan's conjecture, with its contraction report.
    Solve,
    /// Conjecture-path sweep, or a design-correlation sweep.
    Sweep,
    /// One learning trace.
    Simulate,
    /// Replications plus a log-log convergence-rate fit.
    Rate,
    /// Joint revenue maximizer.
    Gmv,
    /// Validate the plan, scan demand regularity and report contraction; runs nothing.
    Check,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Solve => "solve",
            Subcommand::Sweep => "sweep",
            Subcommand::Simulate => "simulate",
            Subcommand::Rate => "rate",
            Subcommand::Gmv => "gmv",
            Subcommand::Check => "check",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub reps: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub format: Option<OutputFormat>,
    pub quiet: bool,
}

#[derive(Debug, Parser)]
#[command(
    name = "switchback-cv",
    version,
    about = "Solve and simulate conjectural-variations pricing markets"
)]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Subcommand,
    /// Plan file (TOML).
    pub plan: PathBuf,
    /// Override the plan's random seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the number of replications.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Write artifacts here instead of the plan's output directory.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
    /// Only log errors. Never changes file outputs.
    #[arg(long, short)]
    pub quiet: bool,
}

impl Cli {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            reps: self.reps,
            out_dir: self.out_dir.clone(),
            format: self.format,
            quiet: self.quiet,
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Validation { .. } => 2,
        Error::NonConvergence { .. }
        | Error::NotContraction { .. }
        | Error::Singular(_)
        | Error::NonPositiveSlope { .. } => 3,
        _ => 4,
    }
}

/// Runs `cmd` on the plan at `plan_path`, printing results to `out` and
/// errors to `err`. Returns the process exit status.
pub fn execute(
    cmd: Subcommand,
    plan_path: &Path,
    overrides: &Overrides,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    match run(cmd, plan_path, overrides, out) {
        Ok(()) => 0,
        Err(e) => {
            let stage = match exit_code(&e) {
                2 => "plan",
                3 => "solver",
                _ => cmd.name(),
            };
            let _ = writeln!(err, "error [{stage}]: {e}");
            exit_code(&e)
        }
    }
}

/// Parses process arguments, sets up logging and runs.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = if cli.quiet {
        log::LevelFilter::Error
    } else {
        log::LevelFilter::Info
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .format_timestamp(None)
        .try_init();
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    execute(
        cli.command,
        &cli.plan,
        &cli.overrides(),
        &mut stdout.lock(),
        &mut stderr.lock(),
    )
}

fn output_dir(cmd: Subcommand, plan: &Plan, plan_path: &Path, overrides: &Overrides) -> PathBuf {
    if let Some(d) = &overrides.out_dir {
        return d.clone();
    }
    let stem = plan_path
        .file_stem()
        .map_or("plan".into(), |s| s.to_string_lossy().into_owned());
    let base = plan
        .file
        .outputs
        .as_ref()
        .and_then(|o| o.dir.clone())
        .map_or_else(|| PathBuf::from("out").join(stem), PathBuf::from);
    base.join(cmd.name())
}

fn format_of(plan: &Plan, overrides: &Overrides) -> OutputFormat {
    overrides
        .format
        .or_else(|| plan.file.outputs.as_ref().and_then(|o| o.format))
        .unwrap_or(OutputFormat::Json)
}

fn apply_overrides(plan: &mut Plan, overrides: &Overrides) -> Result<()> {
    if let Some(seed) = overrides.seed {
        if let Some(s) = plan.sldl.as_mut() {
            s.seed = seed;
        }
    }
    if let Some(reps) = overrides.reps {
        if reps == 0 {
            return Err(Error::validation("--reps", "must be at least 1"));
        }
        match plan.file.harness.as_mut() {
            Some(h) => h.replications = reps,
            None => {
                plan.file.harness = Some(crate::plan::HarnessSection {
                    replications: reps,
                    target: None,
                    tail_fraction: None,
                    bootstrap_resamples: None,
                })
            }
        }
    }
    Ok(())
}

fn compact<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).unwrap_or_default()
}

pub fn run(cmd: Subcommand, plan_path: &Path, overrides: &Overrides, out: &mut dyn Write) -> Result<()> {
    let (mut plan, bytes) = Plan::load(plan_path)?;
    apply_overrides(&mut plan, overrides)?;
    let fmt = format_of(&plan, overrides);
    let dir = output_dir(cmd, &plan, plan_path, overrides);
    let seed = plan.seed();
    let mut manifest = Manifest::new(cmd.name(), &bytes, seed);
    let mut art = ArtifactDir::create(&dir)?;
    info!("{} -> {}", cmd.name(), dir.display());

    match cmd {
        Subcommand::Check => check(&plan, &mut art, out)?,
        Subcommand::Solve => solve(&plan, fmt, &mut art, out)?,
        Subcommand::Gmv => {
            let (grid, refine) = plan.gmv_settings();
            let r = gmv_optimize(&plan.demand, grid, refine)?;
            match fmt {
                OutputFormat::Json => art.json("gmv.json", &r)?,
                OutputFormat::Csv => art.csv("gmv.csv", |f| {
                    let mut w = csv::Writer::from_writer(f);
                    w.write_record(["seller", "price"])?;
                    for (i, p) in r.price.iter().enumerate() {
                        w.write_record([i.to_string(), format!("{p:?}")])?;
                    }
                    w.flush()?;
                    Ok(())
                })?,
            }
            writeln!(out, "{}", compact(&json!({ "price": r.price, "value": r.value })))?;
        }
        Subcommand::Sweep => sweep(&plan, fmt, &mut art, out)?,
        Subcommand::Simulate => {
            let exp = plan.experiment()?;
            let target = plan.declared_target().map(|_| exp.resolve_target()).transpose()?;
            let trace = run_sldl(&exp.sldl, &exp.demand, exp.noise.as_ref(), &exp.designs)?;
            match fmt {
                OutputFormat::Csv => art.csv("trace.csv", |f| io::write_trace_csv(f, 0, &trace, target.as_deref()))?,
                OutputFormat::Json => art.json("trace.json", &trace)?,
            }
            let summary = json!({
                "final_price": trace.final_price,
                "batches": exp.sldl.batches.batches(),
                "lengths": exp.sldl.batches.lengths(),
                "total_periods": exp.sldl.batches.total_periods(),
                "batch_schedule": exp.sldl.batches,
                "delta_schedule": exp.sldl.delta,
                "deltas": trace.batches.iter().map(|b| b.delta.clone()).collect::<Vec<_>>(),
                "seed": exp.sldl.seed,
                "target": target,
                "final_err_inf": target.as_ref().map(|t| inf_dist(&trace.final_price, t)),
            });
            art.json("summary.json", &summary)?;
            writeln!(out, "{}", compact(&json!({ "final_price": trace.final_price })))?;
        }
        Subcommand::Rate => {
            let exp = plan.experiment()?;
            manifest.replications = Some(exp.replications);
            let stats = run_replications(&exp)?;
            let fit = fit_rate(&stats, plan.tail_fraction(), plan.bootstrap_resamples(), exp.sldl.seed)?;
            match fmt {
                OutputFormat::Csv => art.csv("stats.csv", |f| io::write_stats_csv(f, &stats))?,
                OutputFormat::Json => art.json("stats.json", &stats.batches)?,
            }
            art.json(
                "ratefit.json",
                &json!({
                    "slope": fit.slope,
                    "ci": [fit.slope_ci.0, fit.slope_ci.1],
                    "window": [fit.window.0, fit.window.1],
                    "intercept": fit.intercept,
                    "resamples": fit.resamples,
                    "replications": stats.replications,
                    "target": stats.target,
                    "final_mean_err": stats.final_mean_err(),
                }),
            )?;
            writeln!(
                out,
                "{}",
                compact(
                    &json!({ "slope": fit.slope, "ci": [fit.slope_ci.0, fit.slope_ci.1], "final_mean_err": stats.final_mean_err() })
                )
            )?;
        }
    }
    art.finish(manifest)?;
    Ok(())
}

fn report_for(plan: &Plan, a: &crate::design::ConjectureMatrix) -> Result<ContractionReport> {
    contraction_report(&plan.demand, a, &plan.u, plan.solver.grid_resolution)
}

fn check(plan: &Plan, art: &mut ArtifactDir, out: &mut dyn Write) -> Result<()> {
    let bounds: DemandBounds = plan.demand.scan_bounds(default_grid_resolution(plan.n()))?;
    if !bounds.regular() {
        writeln!(
            out,
            "demand regularity: {} sign violations on the scan grid",
            bounds.violations.len()
        )?;
    } else {
        writeln!(
            out,
            "demand regularity: ok (m0 = {:.6}, m1 = {:.6}, M1 = {:.6}, M2 = {:.6})",
            bounds.m0, bounds.m1, bounds.max_gradient, bounds.max_curvature
        )?;
    }
    let a = plan.conjecture()?;
    let report = report_for(plan, &a)?;
    writeln!(out, "contraction: {}", report.verdict())?;
    let mut induced = None;
    if let Some(d) = &plan.design {
        let a_star = d.conjecture_matrix(None)?;
        if a_star != a {
            let r = report_for(plan, &a_star)?;
            writeln!(out, "contraction under design conjecture: {}", r.verdict())?;
            induced = Some((a_star.flattened(), r));
        }
    }
    art.json(
        "check.json",
        &json!({
            "demand_bounds": bounds,
            "conjecture": a.flattened(),
            "contraction": report,
            "design_conjecture": induced.as_ref().map(|(a, _)| a),
            "design_contraction": induced.as_ref().map(|(_, r)| r),
        }),
    )?;
    Ok(())
}

fn solve(plan: &Plan, fmt: OutputFormat, art: &mut ArtifactDir, out: &mut dyn Write) -> Result<()> {
    let a = plan.conjecture()?;
    let report = report_for(plan, &a)?;
    let init = plan.demand.price_box().midpoint();
    let r = solve_fixed_point(&plan.demand, &a, &plan.u, &init, &plan.solver)?;
    let closed = if plan.demand.is_linear() {
        Some(linear_cv_closed_form(&plan.demand, &a)?)
    } else {
        None
    };
    match fmt {
        OutputFormat::Json => art.json(
            "solve.json",
            &json!({
                "conjecture": a.flattened(),
                "result": r,
                "closed_form": closed,
                "contraction": report,
            }),
        )?,
        OutputFormat::Csv => art.csv("solve.csv", |f| {
            let mut w = csv::Writer::from_writer(f);
            w.write_record(["seller", "price", "foc_residual", "at_boundary"])?;
            for i in 0..r.price.len() {
                w.write_record([
                    i.to_string(),
                    format!("{:?}", r.price[i]),
                    format!("{:?}", r.residual_foc[i]),
                    r.boundary_flags[i].to_string(),
                ])?;
            }
            w.flush()?;
            Ok(())
        })?,
    }
    writeln!(
        out,
        "{}",
        compact(&json!({
            "price": r.price,
            "certified_interior": r.certified_interior,
            "contraction": report.verdict(),
        }))
    )?;
    Ok(())
}

fn sweep(plan: &Plan, fmt: OutputFormat, art: &mut ArtifactDir, out: &mut dyn Write) -> Result<()> {
    if let Some(s) = &plan.file.design_sweep {
        let base = plan.experiment()?;
        let sw = correlation_sweep(&base, &s.rho, s.q, s.simulate)?;
        match fmt {
            OutputFormat::Csv => art.csv("sweep.csv", |f| io::write_correlation_sweep_csv(f, &sw))?,
            OutputFormat::Json => art.json("sweep.json", &sw)?,
        }
        for row in &sw.rows {
            writeln!(out, "{}", compact(row))?;
        }
        writeln!(out, "limits nondecreasing in rho: {}", sw.limits_nondecreasing)?;
        return Ok(());
    }
    let path = plan.conjecture_path()?;
    let sw = sweep_conjecture(&plan.demand, &plan.u, &path, &plan.solver)?;
    match fmt {
        OutputFormat::Csv => art.csv("sweep.csv", |f| io::write_conjecture_sweep_csv(f, &sw))?,
        OutputFormat::Json => art.json("sweep.json", &sw)?,
    }
    for p in &sw.points {
        let price = p.result.as_ref().map(|r| r.price.clone());
        writeln!(
            out,
            "{}",
            compact(&json!({ "conjecture": p.conjecture, "price": price, "failure": p.failure }))
        )?;
    }
    writeln!(out, "prices nondecreasing along path: {}", sw.prices_nondecreasing)?;
    Ok(())
}
