use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::Args;
use rayon::prelude::*;

use tikflow::analysis::rates::{default_window, RateFit};
use tikflow::analysis::{fill_energy, fit_rate, viscosity_curve, Observable};
use tikflow::config::RawConfig;
use tikflow::verify::{run_criterion, selected, VerifyOptions};
use tikflow::{integrate, Error, RunConfig, TrajectoryRecord};

use crate::{EXIT_ACCEPTANCE, EXIT_NUMERICAL, EXIT_VALIDATION};

pub const THREADS_ENV: &str = "TIKFLOW_THREADS";

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn validation(message: impl Into<String>) -> Self {
        CliError { code: EXIT_VALIDATION, message: message.into() }
    }

    fn numerical(e: Error) -> Self {
        let code = if e.is_validation() { EXIT_VALIDATION } else { EXIT_NUMERICAL };
        CliError { code, message: e.to_string() }
    }

    fn io(path: &Path, e: io::Error) -> Self {
        CliError::validation(format!("{}: {e}", path.display()))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::validation(format!("csv output: {e}"))
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Args, Debug)]
pub struct RunArgs {
    /// Config file with `section.key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV path (default: `output.path`, else stdout).
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Rate-fit window `lo,hi` (default: last decade of the run).
    #[arg(long, value_parser = parse_window)]
    window: Option<(f64, f64)>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Grid axis `name=v1,v2,...` with name one of alpha, delta, r; at most two.
    #[arg(long, value_parser = parse_axis)]
    vary: Vec<Axis>,
    #[arg(long, value_parser = parse_window)]
    window: Option<(f64, f64)>,
}

#[derive(Args, Debug)]
pub struct ViscosityArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Explicit eps values, comma-separated.
    #[arg(long, value_delimiter = ',')]
    eps: Vec<f64>,
    #[arg(long, default_value_t = 1e-4)]
    eps_min: f64,
    #[arg(long, default_value_t = 10.0)]
    eps_max: f64,
    #[arg(long, default_value_t = 4)]
    per_decade: usize,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Skip the nonsmooth runs.
    #[arg(long)]
    quick: bool,
}

#[derive(Debug, Clone)]
pub struct Axis {
    name: &'static str,
    values: Vec<f64>,
}

fn parse_window(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected `lo,hi`")?;
    let lo: f64 = a.trim().parse().map_err(|_| format!("bad number `{a}`"))?;
    let hi: f64 = b.trim().parse().map_err(|_| format!("bad number `{b}`"))?;
    if !(lo > 0.0 && lo < hi) {
        return Err("window needs 0 < lo < hi".into());
    }
    Ok((lo, hi))
}

fn parse_axis(s: &str) -> Result<Axis, String> {
    let (name, list) = s.split_once('=').ok_or("expected `name=v1,v2,...`")?;
    let name = match name.trim() {
        "alpha" => "alpha",
        "delta" => "delta",
        "r" => "r",
        other => return Err(format!("cannot vary `{other}`; use alpha, delta or r")),
    };
    let values = list
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| v.parse::<f64>().map_err(|_| format!("bad number `{v}`")))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Axis { name, values })
}

fn load_raw(args: &RunArgs, overrides: &[(String, String)]) -> CliResult<RawConfig> {
    let mut raw = match &args.config {
        Some(p) => RawConfig::from_file(p).map_err(CliError::numerical)?,
        None => RawConfig::default(),
    };
    for (k, v) in overrides {
        raw.set(k, v).map_err(CliError::numerical)?;
    }
    Ok(raw)
}

fn output_target(args: &RunArgs, raw: &RawConfig) -> Option<PathBuf> {
    args.output.clone().or_else(|| raw.get("output.path").map(PathBuf::from))
}

fn open_output(path: &Option<PathBuf>) -> CliResult<Box<dyn Write>> {
    match path {
        Some(p) => Ok(Box::new(File::create(p).map_err(|e| CliError::io(p, e))?)),
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn build(raw: &RawConfig) -> CliResult<RunConfig> {
    raw.build().map_err(|e| CliError::validation(e.to_string()))
}

fn run_record(cfg: &RunConfig) -> tikflow::Result<TrajectoryRecord> {
    let mut rec = integrate(&cfg.dynamics, &cfg.integrator)?;
    fill_energy(&mut rec, &cfg.problem)?;
    Ok(rec)
}

pub fn simulate(args: &SimulateArgs, overrides: &[(String, String)]) -> CliResult<()> {
    let raw = load_raw(&args.run, overrides)?;
    let cfg = build(&raw)?;
    let rec = run_record(&cfg).map_err(CliError::numerical)?;
    let target = output_target(&args.run, &raw);
    write_trajectory(open_output(&target)?, &rec)?;

    let window = args.window.unwrap_or_else(|| default_window(&rec));
    let mut summary = String::new();
    for obs in [Observable::FGap, Observable::GradNorm] {
        summary.push_str(&match fit_rate(&rec, obs, Some(window)) {
            Ok(f) => format!("{} slope on [{:e}, {:e}]: {:.6} (r2 {:.6})\n", obs.name(), window.0, window.1, f.slope, f.r_squared),
            Err(e) => format!("{} slope on [{:e}, {:e}]: unavailable ({e})\n", obs.name(), window.0, window.1),
        });
    }
    if target.is_some() {
        print!("{summary}");
    } else {
        eprint!("{summary}");
    }
    Ok(())
}

/// Writes `t,x_1..x_d,f_gap,grad_norm,dist_min_norm,eps,E`.
pub fn write_trajectory(out: Box<dyn Write>, rec: &TrajectoryRecord) -> CliResult<()> {
    let dim = rec.states[0].position.len();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend((1..=dim).map(|i| format!("x_{i}")));
    header.extend(["f_gap", "grad_norm", "dist_min_norm", "eps", "E"].map(String::from));
    w.write_record(&header)?;
    for ((t, s), d) in rec.times.iter().zip(&rec.states).zip(&rec.diagnostics) {
        let mut row = vec![num(*t)];
        row.extend(s.position.iter().map(|v| num(*v)));
        row.push(num(d.f_gap));
        row.push(opt(d.grad_norm));
        row.push(opt(d.dist_to_min_norm));
        row.push(num(d.eps_value));
        row.push(opt(d.energy));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| CliError::validation(e.to_string()))?;
    Ok(())
}

fn thread_pool() -> CliResult<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(s) = std::env::var(THREADS_ENV) {
        let n: usize = s
            .trim()
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| CliError::validation(format!("{THREADS_ENV}={s} is not a positive integer")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| CliError::validation(e.to_string()))
}

fn grid_points(axes: &[Axis]) -> Vec<Vec<f64>> {
    let mut points: Vec<Vec<f64>> = vec![vec![]];
    for axis in axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                axis.values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push(*v);
                    q
                })
            })
            .collect();
    }
    points
}

struct SweepRow {
    f_gap: Option<RateFit>,
    grad: Option<RateFit>,
    final_f_gap: Option<f64>,
    final_dist: Option<f64>,
    error: String,
}

fn sweep_point(raw: &RawConfig, axes: &[Axis], values: &[f64], window: Option<(f64, f64)>) -> SweepRow {
    let mut row = SweepRow { f_gap: None, grad: None, final_f_gap: None, final_dist: None, error: String::new() };
    let mut raw = raw.clone();
    for (axis, v) in axes.iter().zip(values) {
        let (key, family) = match axis.name {
            "alpha" => ("dynamics.alpha", None),
            "delta" => ("schedule.delta", Some("delta_over_t")),
            _ => ("schedule.r", Some("inverse_power")),
        };
        if let Some(f) = family {
            if raw.get("schedule.family").is_none() {
                raw.set("schedule.family", f).expect("known key");
            }
        }
        raw.set(key, &v.to_string()).expect("known key");
    }
    let rec = match raw.build().and_then(|cfg| run_record(&cfg)) {
        Ok(rec) => rec,
        Err(e) => {
            row.error = e.to_string();
            return row;
        }
    };
    let last = rec.diagnostics.last().expect("records are never empty");
    row.final_f_gap = Some(last.f_gap);
    row.final_dist = last.dist_to_min_norm;
    let mut errors = Vec::new();
    for (obs, slot) in [(Observable::FGap, &mut row.f_gap), (Observable::GradNorm, &mut row.grad)] {
        match fit_rate(&rec, obs, window) {
            Ok(f) => *slot = Some(f),
            Err(e) => errors.push(format!("{}: {e}", obs.name())),
        }
    }
    row.error = errors.join("; ");
    row
}

pub fn sweep(args: &SweepArgs, overrides: &[(String, String)]) -> CliResult<()> {
    if args.vary.len() > 2 {
        return Err(CliError::validation("at most two --vary axes"));
    }
    let raw = load_raw(&args.run, overrides)?;
    // Varied keys may be absent from the base config, so only the problem is checked up front.
    if args.vary.is_empty() {
        build(&raw)?;
    } else {
        raw.build_problem().map_err(|e| CliError::validation(e.to_string()))?;
    }
    let points = grid_points(&args.vary);
    let points = if args.vary.iter().any(|a| a.values.is_empty()) { vec![] } else { points };
    let rows: Vec<SweepRow> = thread_pool()?.install(|| {
        points
            .par_iter()
            .map(|v| sweep_point(&raw, &args.vary, v, args.window))
            .collect()
    });

    let target = output_target(&args.run, &raw);
    let mut w = csv::Writer::from_writer(open_output(&target)?);
    let mut header: Vec<String> = args.vary.iter().map(|a| a.name.to_string()).collect();
    header.extend(
        ["f_gap_slope", "f_gap_r2", "grad_norm_slope", "grad_norm_r2", "final_f_gap", "final_dist_min_norm", "error"]
            .map(String::from),
    );
    w.write_record(&header)?;
    for (values, row) in points.iter().zip(&rows) {
        let mut rec: Vec<String> = values.iter().map(|v| num(*v)).collect();
        rec.push(opt(row.f_gap.map(|f| f.slope)));
        rec.push(opt(row.f_gap.map(|f| f.r_squared)));
        rec.push(opt(row.grad.map(|f| f.slope)));
        rec.push(opt(row.grad.map(|f| f.r_squared)));
        rec.push(opt(row.final_f_gap));
        rec.push(opt(row.final_dist));
        rec.push(row.error.clone());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| CliError::validation(e.to_string()))?;
    Ok(())
}

pub fn viscosity(args: &ViscosityArgs, overrides: &[(String, String)]) -> CliResult<()> {
    let raw = load_raw(&args.run, overrides)?;
    let problem = raw.build_problem().map_err(|e| CliError::validation(e.to_string()))?;
    let mut eps = if args.eps.is_empty() {
        if !(args.eps_min > 0.0 && args.eps_min < args.eps_max) || args.per_decade == 0 {
            return Err(CliError::validation("eps grid needs 0 < eps_min < eps_max and per_decade > 0"));
        }
        tikflow::integrators::log_grid(args.eps_min, args.eps_max, args.per_decade)
            .map_err(|e| CliError::validation(e.to_string()))?
    } else {
        args.eps.clone()
    };
    if eps.iter().any(|e| !(*e > 0.0)) {
        return Err(CliError::validation("eps values must be positive"));
    }
    eps.sort_by(|a, b| b.total_cmp(a));
    eps.dedup();
    let curve = viscosity_curve(&problem, &eps);

    let target = output_target(&args.run, &raw);
    let mut w = csv::Writer::from_writer(open_output(&target)?);
    let mut header = vec!["eps".to_string()];
    header.extend((1..=problem.dim()).map(|i| format!("x_{i}")));
    header.extend(["norm", "residual", "error"].map(String::from));
    w.write_record(&header)?;
    for (e, r) in eps.iter().zip(curve) {
        let mut row = vec![num(*e)];
        match r {
            Ok(vp) => {
                row.extend(vp.point.iter().map(|v| num(*v)));
                row.push(num(vp.point.norm()));
                row.push(num(vp.residual));
                row.push(String::new());
            }
            Err(err) => {
                row.extend(std::iter::repeat_n(String::new(), problem.dim() + 2));
                row.push(err.to_string());
            }
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| CliError::validation(e.to_string()))?;
    Ok(())
}

pub fn verify(args: &VerifyArgs) -> CliResult<()> {
    let opts = VerifyOptions::from_env(args.quick).map_err(|e| CliError::validation(e.to_string()))?;
    let ids = selected(&opts);
    let results: Vec<_> = thread_pool()?.install(|| ids.par_iter().map(|id| run_criterion(*id, &opts)).collect());
    let mut failed = 0;
    let mut total = 0.0;
    for r in &results {
        println!("{}", r.summary());
        for line in &r.lines {
            println!("        {line}");
        }
        failed += usize::from(!r.passed);
        total += r.elapsed.as_secs_f64();
    }
    println!(
        "{} of {} criteria passed ({total:.2}s of criterion time)",
        results.len() - failed,
        results.len()
    );
    if failed == 0 {
        Ok(())
    } else {
        Err(CliError { code: EXIT_ACCEPTANCE, message: format!("{failed} acceptance criteria failed") })
    }
}
