//! The `run`, `stability` and `compare` subcommands.

use std::path::PathBuf;
use std::time::Instant;

use mrtrbdf2::benchmarks::{courant_numbers, error_table, relative_linf_error, BenchmarkPreset};
use mrtrbdf2::linalg::DenseMatrix;
use mrtrbdf2::multirate::{integrate, integrate_single_rate, InterpolantKind, IntegrationTrace, Trajectory};
use mrtrbdf2::problem::ActivePartition;
use mrtrbdf2::stability::{log_grid, model_system, norm_sweep, ModelSystem, StabilityError};
use serde::Serialize;

use crate::args::{CompareArgs, RunArgs, StabilityArgs};
use crate::error::CliError;
use crate::output::{
    courant_rows, error_rows, num, spacetime_rows, trace_rows, trajectory_rows, ConfigSnapshot, ErrorEntry, Metrics,
    OutDir, RunManifest, DETERMINISM_NOTE, SPACETIME_HEADER, TRACE_HEADER,
};
use crate::presets::{build_preset, Mode};

const DEFAULT_OUT_DIR: &str = "out";

fn execute(preset: &BenchmarkPreset, mode: Mode) -> Result<(Trajectory, IntegrationTrace, f64), CliError> {
    let start = Instant::now();
    let (traj, trace) = match mode {
        Mode::Single => integrate_single_rate(&preset.problem, preset.t0, preset.t_end, &preset.u0, &preset.config)?,
        Mode::Multi => integrate(&preset.problem, preset.t0, preset.t_end, &preset.u0, &preset.config)?,
    };
    Ok((traj, trace, start.elapsed().as_secs_f64()))
}

pub fn run(args: &RunArgs, command_line: Vec<String>) -> Result<(), CliError> {
    let (resolved, mut rest) = args.preset.merged()?;
    let mut mode = args.mode.clone();
    rest.take("mode", &mut mode)?;
    let mut out_dir = args.out_dir.clone();
    rest.take("out-dir", &mut out_dir)?;
    let mut skip_reference = args.skip_reference.then_some(true);
    rest.take("skip-reference", &mut skip_reference)?;
    rest.finish()?;
    let mode = Mode::parse(mode.as_deref().unwrap_or("multi"))?;
    let skip_reference = skip_reference.unwrap_or(false);

    let mut preset = build_preset(&resolved)?;
    let flux_known = preset.spatial.as_ref().is_some_and(|s| s.flux_derivative.is_some());
    preset.config.record_states = flux_known;

    let (traj, trace, wall) = execute(&preset, mode)?;
    let times = preset.error_times.clone();
    let reference = if skip_reference {
        None
    } else {
        Some(preset.reference_states(&times)?)
    };
    let errors = error_table(&traj, &preset, &times, reference.as_deref())?;
    let courant = if flux_known {
        Some(courant_numbers(&trace, &preset)?)
    } else {
        None
    };

    let mut out = OutDir::create(&out_dir.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR)))?;
    let (header, rows) = trajectory_rows(&traj);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    out.csv("trajectory.csv", &header, rows)?;
    out.csv("trace.csv", &TRACE_HEADER, trace_rows(&trace))?;
    out.csv("spacetime.csv", &SPACETIME_HEADER, spacetime_rows(&trace))?;
    if let Some(c) = &courant {
        out.csv("courant.csv", &["t", "h", "courant", "kind"], courant_rows(c))?;
    }
    out.csv("errors.csv", &["t", "vs_exact", "vs_reference"], error_rows(&errors))?;

    let (params, spatial) = RunManifest::describe(&preset);
    let mut outputs = out.written.clone();
    outputs.push("summary.json".into());
    let manifest = RunManifest {
        command_line,
        preset: preset.name.clone(),
        mode: mode.name().into(),
        dim: preset.problem.dim(),
        t0: preset.t0,
        t_end: preset.t_end,
        config: ConfigSnapshot::of(&preset.config),
        params,
        spatial,
        determinism: DETERMINISM_NOTE.into(),
        outputs,
        metrics: Metrics::of(&trace, wall),
        errors: errors
            .iter()
            .map(|r| ErrorEntry {
                t: r.t,
                vs_exact: r.vs_exact,
                vs_reference: r.vs_reference,
            })
            .collect(),
    };
    out.json("summary.json", &manifest)?;
    let m = &manifest.metrics;
    println!(
        "{} ({}): {} macro + {} micro steps, workload {}, {:.3} s, output in {}",
        manifest.preset,
        manifest.mode,
        m.accepted_macro,
        m.accepted_micro,
        m.workload,
        m.wall_time_s,
        out.root().display()
    );
    Ok(())
}

fn stability_error(e: StabilityError) -> CliError {
    match e {
        StabilityError::InvalidInput(_) | StabilityError::UnknownSystem(_) => CliError::Config(e.to_string()),
        _ => CliError::Integration(e.to_string()),
    }
}

fn read_matrix(path: &std::path::Path) -> Result<DenseMatrix, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read matrix {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(str::parse::<f64>)
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Config(format!("matrix line {}: {e}", no + 1)))?;
        rows.push(row);
    }
    let a = DenseMatrix::from_rows(&rows).map_err(|e| CliError::Config(e.to_string()))?;
    if !a.is_square() || a.rows() == 0 {
        return Err(CliError::Config(format!("matrix must be square and non-empty, got {}x{}", a.rows(), a.cols())));
    }
    Ok(a)
}

fn parse_active(list: &str, dim: usize) -> Result<ActivePartition, CliError> {
    let indices: Vec<usize> = match list.trim() {
        "all" => (0..dim).collect(),
        "none" | "" => Vec::new(),
        items => items
            .split(',')
            .map(|s| s.trim().parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Config(format!("--active: {e}")))?,
    };
    ActivePartition::from_unsorted(indices, dim).map_err(|e| CliError::Config(e.to_string()))
}

pub fn stability(args: &StabilityArgs) -> Result<(), CliError> {
    let (a, default_partition, label) = match (&args.system, &args.matrix) {
        (Some(name), None) => {
            let system: ModelSystem = name.parse().map_err(stability_error)?;
            let (a, p) = model_system(system);
            (a, Some(p), system.name().to_string())
        }
        (None, Some(path)) => (read_matrix(path)?, None, path.display().to_string()),
        _ => return Err(CliError::Config("give exactly one of --system or --matrix".into())),
    };
    let partition = match (&args.active, default_partition) {
        (Some(list), _) => parse_active(list, a.rows())?,
        (None, Some(p)) => p,
        (None, None) => return Err(CliError::Config("--active is required with --matrix".into())),
    };
    let kinds = match args.kind.as_str() {
        "both" => vec![InterpolantKind::Linear, InterpolantKind::Hermite],
        k => vec![k.parse::<InterpolantKind>().map_err(CliError::Config)?],
    };
    if args.points < 2 || !(args.min > 0.0 && args.max > args.min && args.max.is_finite()) {
        return Err(CliError::Config("grid needs --points >= 2 and 0 < --min < --max".into()));
    }
    let grid = log_grid(args.min, args.max, args.points);
    let report = norm_sweep(&a, &partition, &kinds, &grid).map_err(stability_error)?;

    let mut out = OutDir::create(args.out_dir.as_deref().unwrap_or(std::path::Path::new(DEFAULT_OUT_DIR)))?;
    let rows = report.rows.iter().map(|r| {
        vec![
            num(r.rescaled_h),
            r.kind.to_string(),
            num(r.multirate.norm1),
            num(r.multirate.norm2),
            num(r.multirate.norminf),
            num(r.multirate.spectral_radius),
            num(r.single_rate.norm2),
        ]
    });
    out.csv(
        "amplification.csv",
        &["rescaled_h", "kind", "norm1", "norm2", "norminf", "spectral_radius", "single_rate_norm2"],
        rows,
    )?;
    let worst = report.rows.iter().map(|r| r.multirate.spectral_radius).fold(0.0, f64::max);
    println!(
        "{label}: {} active of {}, {} rows, max spectral radius {worst:.6}, output in {}",
        report.active.len(),
        a.rows(),
        report.rows.len(),
        out.root().display()
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct CompareManifest {
    command_line: Vec<String>,
    preset: String,
    t_end: f64,
    tolerances: Vec<f64>,
    reference_tolerance: f64,
    config: ConfigSnapshot,
    params: std::collections::BTreeMap<String, f64>,
    determinism: String,
    outputs: Vec<String>,
}

struct CompareRow {
    tol: f64,
    mode: Mode,
    error: f64,
    error_vs_exact: Option<f64>,
    metrics: Metrics,
}

pub fn compare(args: &CompareArgs, command_line: Vec<String>) -> Result<(), CliError> {
    let (resolved, mut rest) = args.preset.merged()?;
    let mut out_dir = args.out_dir.clone();
    rest.take("out-dir", &mut out_dir)?;
    rest.finish()?;
    if args.tols.is_empty() {
        return Err(CliError::Config("--tols needs at least one tolerance".into()));
    }
    if args.tols.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
        return Err(CliError::Config("tolerances must be positive and finite".into()));
    }
    let base = build_preset(&resolved)?;
    let tightest = args.tols.iter().copied().fold(f64::INFINITY, f64::min);
    let t_end = base.t_end;
    let reference = base.clone().with_tolerance(tightest)?.reference_states(&[t_end])?.remove(0);
    let exact = base.exact_states(&[t_end]).map(|mut v| v.remove(0));

    let jobs: Vec<(f64, Mode, BenchmarkPreset)> = args
        .tols
        .iter()
        .flat_map(|&tol| [Mode::Single, Mode::Multi].map(|m| (tol, m)))
        .map(|(tol, m)| Ok((tol, m, base.clone().with_tolerance(tol)?)))
        .collect::<Result<_, CliError>>()?;
    let results: Vec<Result<CompareRow, CliError>> = std::thread::scope(|s| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|(tol, mode, preset)| {
                let (reference, exact) = (&reference, &exact);
                s.spawn(move || {
                    let (traj, trace, wall) = execute(preset, *mode)?;
                    let last = traj.final_state();
                    Ok(CompareRow {
                        tol: *tol,
                        mode: *mode,
                        error: relative_linf_error(last, reference),
                        error_vs_exact: exact.as_deref().map(|e| relative_linf_error(last, e)),
                        metrics: Metrics::of(&trace, wall),
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(CliError::Integration("worker thread panicked".into()))))
            .collect()
    });
    let rows = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    let mut out = OutDir::create(&out_dir.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR)))?;
    out.csv(
        "compare.csv",
        &[
            "tol",
            "mode",
            "error_vs_reference",
            "error_vs_exact",
            "workload",
            "scalar_rhs",
            "total_steps",
            "accepted_macro",
            "accepted_micro",
            "rejected_steps",
            "wall_time_s",
        ],
        rows.iter().map(|r| {
            let m = &r.metrics;
            vec![
                num(r.tol),
                r.mode.name().into(),
                num(r.error),
                r.error_vs_exact.map(num).unwrap_or_default(),
                m.workload.to_string(),
                m.scalar_rhs.to_string(),
                m.total_steps.to_string(),
                m.accepted_macro.to_string(),
                m.accepted_micro.to_string(),
                (m.rejected_macro + m.rejected_micro).to_string(),
                num(m.wall_time_s),
            ]
        }),
    )?;
    let (params, _) = RunManifest::describe(&base);
    let mut outputs = out.written.clone();
    outputs.push("summary.json".into());
    out.json(
        "summary.json",
        &CompareManifest {
            command_line,
            preset: base.name.clone(),
            t_end,
            tolerances: args.tols.clone(),
            reference_tolerance: tightest,
            config: ConfigSnapshot::of(&base.config),
            params,
            determinism: DETERMINISM_NOTE.into(),
            outputs,
        },
    )?;
    for r in &rows {
        println!(
            "tol {:.1e} {:>6}: error {:.3e}, workload {}, steps {}",
            r.tol,
            r.mode.name(),
            r.error,
            r.metrics.workload,
            r.metrics.total_steps
        );
    }
    Ok(())
}
