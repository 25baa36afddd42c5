//! Orchestration of the CLI verbs.

use std::io;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use log::info;
use stochabs_core::game::{Relation, TransitionSystem};
use stochabs_core::grid::Grid;
use stochabs_core::model::{build_abstraction, builtin_system, check_fu_alternative, AuditReport, System};
use stochabs_core::set::AbstractSet;
use stochabs_core::sim::{simulate_batch, Observer, SimStats};
use stochabs_core::solver::{buchi_over, buchi_under, losing_over, target_sets, worst_case_buchi, SolveReport};
use thiserror::Error;

use crate::config::{ConfigError, ProblemConfig};
use crate::files::{
    format_controller, format_region, parse_controller, parse_region, read_to_string, write_atomic, GridSpec,
    ParseError, Report,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: ParseError },
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            _ => 2,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn runtime<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Runtime(e.to_string())
}

pub fn load_system(cfg: &ProblemConfig) -> Result<(System, Grid), CliError> {
    let system = builtin_system(&cfg.system, &cfg.params).map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let grid = cfg.grid().map_err(ConfigError::from)?;
    if system.dim() != grid.dim() {
        return Err(ConfigError::Invalid(format!(
            "system {} has dimension {}, the grid has dimension {}",
            cfg.system,
            system.dim(),
            grid.dim()
        ))
        .into());
    }
    Ok((system, grid))
}

pub fn abstraction(system: &System, grid: &Grid) -> Result<TransitionSystem, CliError> {
    match system {
        System::Continuous(m) => build_abstraction(m, grid).map_err(runtime),
        System::Chain(c) => c
            .abstraction(grid)
            .map_err(|e| ConfigError::Invalid(e.to_string()).into()),
    }
}

/// Result of a synthesis run.
pub struct SynthOutcome {
    pub grid: Grid,
    pub system: System,
    pub ts: TransitionSystem,
    pub target_under: AbstractSet,
    pub target_over: AbstractSet,
    pub solve: SolveReport,
    pub report: Report,
}

fn volume_of_cells(g: &Grid, set: &AbstractSet) -> f64 {
    set.iter().filter(|&i| i < g.cell_count()).count() as f64 * g.cell_volume()
}

fn secs(d: Duration) -> String {
    format!("{:.6}", d.as_secs_f64())
}

/// Builds the abstraction, evaluates the requested fixed points and, when
/// `out_dir` is given, writes region, controller and report files there.
pub fn run_synth(cfg: &ProblemConfig, out_dir: Option<&Path>) -> Result<SynthOutcome, CliError> {
    let (system, grid) = load_system(cfg)?;
    let (b_under, b_over) = target_sets(&grid, &cfg.target).map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let mut solve = SolveReport::default();

    let t = Instant::now();
    let ts = abstraction(&system, &grid)?;
    solve.abstraction_time = t.elapsed();
    info!(
        "abstraction: {} states, {} inputs, {} F̄ edges, {} F̲ edges in {:.2?}",
        ts.n_states(),
        ts.n_inputs(),
        ts.edge_count(Relation::Over),
        ts.edge_count(Relation::Under),
        solve.abstraction_time
    );

    let c = cfg.compute;
    if c.over {
        let t = Instant::now();
        let (w, stats) = buchi_over(&ts, &b_over);
        solve.over_time = t.elapsed();
        solve.over_stats = stats;
        info!("over-approximation: {} cells in {:.2?}", w.len(), solve.over_time);
        solve.over = Some(w);
    }
    let warm = cfg.warm_start && solve.over.is_some();
    if c.under {
        let t = Instant::now();
        let start = if warm { solve.over.as_ref() } else { None };
        let (w, ctrl, stats) = buchi_under(&ts, &b_under, start).map_err(runtime)?;
        solve.under_time = t.elapsed();
        solve.under_stats = stats;
        info!("under-approximation: {} cells in {:.2?}", w.len(), solve.under_time);
        solve.under = Some(w);
        solve.controller = Some(ctrl);
    }
    if c.worst_case {
        let t = Instant::now();
        let (w, stats) = worst_case_buchi(&ts, &b_under);
        solve.worst_case_time = t.elapsed();
        solve.worst_case_stats = stats;
        solve.worst_case = Some(w);
    }
    if c.losing {
        let t = Instant::now();
        let under = solve.under.as_ref().expect("losing implies under");
        solve.losing = Some(losing_over(&ts, under));
        solve.losing_time = t.elapsed();
    }
    if let (Some(u), Some(o)) = (&solve.under, &solve.over) {
        if !u.is_subset(o) {
            return Err(CliError::Runtime(
                "internal error: under-approximation is not inside the over-approximation".into(),
            ));
        }
    }

    let mut report = Report::default();
    report.push("system", &cfg.system);
    report.push("dims", grid.dim());
    report.push("cells", grid.cell_count());
    report.push("free_cells", grid.free_cells().len());
    report.push("inputs", ts.n_inputs());
    report.push("over_edges", ts.edge_count(Relation::Over));
    report.push("under_edges", ts.edge_count(Relation::Under));
    report.push("target_under_cells", b_under.len());
    report.push("target_over_cells", b_over.len());
    report.push("warm_start", warm);
    report.push("time_abstraction_s", secs(solve.abstraction_time));
    if let Some(w) = &solve.over {
        report.push("time_over_s", secs(solve.over_time));
        report.push("over_cells", w.len());
        report.push("volume_over", volume_of_cells(&grid, w));
        report.push("over_outer_iterations", solve.over_stats.outer);
        report.push("over_inner_rounds", solve.over_stats.inner);
    }
    if let Some(w) = &solve.under {
        report.push("time_under_s", secs(solve.under_time));
        report.push("under_cells", w.len());
        report.push("volume_under", volume_of_cells(&grid, w));
        report.push("under_outer_iterations", solve.under_stats.outer);
        report.push("under_inner_rounds", solve.under_stats.inner);
        report.push("controller_cells", solve.controller.as_ref().map_or(0, |c| c.len()));
    }
    if let (Some(u), Some(o)) = (&solve.under, &solve.over) {
        let vo = volume_of_cells(&grid, o);
        let ratio = if vo > 0.0 { volume_of_cells(&grid, u) / vo } else { 0.0 };
        report.push("volume_ratio", ratio);
    }
    if let Some(w) = &solve.worst_case {
        report.push("time_worst_case_s", secs(solve.worst_case_time));
        report.push("worst_case_cells", w.len());
        report.push("worst_case_outer_iterations", solve.worst_case_stats.outer);
    }
    if let Some(w) = &solve.losing {
        report.push("time_losing_s", secs(solve.losing_time));
        report.push("losing_cells", w.iter().filter(|&i| i < grid.cell_count()).count());
        report.push("volume_losing", volume_of_cells(&grid, w));
    }

    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let spec = GridSpec::of(&grid);
        let write = |name: &str, text: String| -> Result<(), CliError> {
            let path = dir.join(name);
            write_atomic(&path, &text).map_err(io_err(&path))
        };
        if let Some(w) = &solve.under {
            write("under.region", format_region(&spec, w))?;
        }
        if let Some(w) = &solve.over {
            write("over.region", format_region(&spec, w))?;
        }
        if let Some(w) = &solve.losing {
            write("losing.region", format_region(&spec, w))?;
        }
        if let Some(w) = &solve.worst_case {
            write("worst_case.region", format_region(&spec, w))?;
        }
        if let Some(ctrl) = &solve.controller {
            write("controller.ctrl", format_controller(&spec, ctrl))?;
        }
        write("report.txt", report.to_string())?;
    }

    Ok(SynthOutcome {
        grid,
        system,
        ts,
        target_under: b_under,
        target_over: b_over,
        solve,
        report,
    })
}

fn read_file(path: &Path) -> Result<String, CliError> {
    read_to_string(path).map_err(io_err(path))
}

pub fn read_region(path: &Path) -> Result<(GridSpec, AbstractSet), CliError> {
    parse_region(&read_file(path)?).map_err(|source| CliError::Parse {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_controller(path: &Path) -> Result<(GridSpec, stochabs_core::solver::Controller), CliError> {
    parse_controller(&read_file(path)?).map_err(|source| CliError::Parse {
        path: path.to_path_buf(),
        source,
    })
}

/// Simulates the closed loop from states drawn in the region of
/// `region_path` under the controller of `controller_path`. Writes
/// `sim_stats.txt` and one `traj_<i>.txt` per trial when `out_dir` is given.
pub fn run_simulate(
    cfg: &ProblemConfig,
    controller_path: &Path,
    region_path: &Path,
    out_dir: Option<&Path>,
) -> Result<SimStats, CliError> {
    let (system, grid) = load_system(cfg)?;
    let (cspec, controller) = read_controller(controller_path)?;
    let (rspec, region) = read_region(region_path)?;
    for (path, spec) in [(controller_path, &cspec), (region_path, &rspec)] {
        if !spec.matches(&grid) {
            return Err(CliError::Runtime(format!(
                "{}: grid '{spec}' does not match the configured grid '{}'",
                path.display(),
                GridSpec::of(&grid)
            )));
        }
    }
    let observer = Observer {
        grid: &grid,
        target: &cfg.target,
        winning: &region,
    };
    let (stats, runs) = match &system {
        System::Continuous(m) => {
            simulate_batch(m, &controller, &observer, cfg.sim.trials, cfg.sim.horizon, cfg.sim.seed)
        }
        System::Chain(c) => simulate_batch(c, &controller, &observer, cfg.sim.trials, cfg.sim.horizon, cfg.sim.seed),
    }
    .map_err(runtime)?;

    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let path = dir.join("sim_stats.txt");
        write_atomic(&path, &stats_report(&stats).to_string()).map_err(io_err(&path))?;
        for (i, run) in runs.iter().enumerate() {
            let mut buf = Vec::new();
            run.write_to(&mut buf).expect("writing to memory");
            let path = dir.join(format!("traj_{i:04}.txt"));
            write_atomic(&path, &String::from_utf8(buf).expect("ascii")).map_err(io_err(&path))?;
        }
    }
    Ok(stats)
}

pub fn stats_report(stats: &SimStats) -> Report {
    let mut r = Report::default();
    r.push("trials", stats.trials);
    r.push("horizon", stats.horizon);
    r.push("seed", stats.seed);
    r.push("stayed_fraction", stats.stayed_fraction);
    r.push("sink_hits", stats.sink_hits);
    r.push("fallback_steps", stats.fallback_steps);
    r.push(
        "min_target_visits",
        stats.min_visits().map_or("-".to_string(), |v| v.to_string()),
    );
    let visits: Vec<String> = stats.target_visits.iter().map(|v| v.to_string()).collect();
    r.push("target_visits", visits.join(","));
    r
}

/// Cell count and volume of each region file; with two files also the
/// ratio of the first volume to the second.
pub fn run_volume(paths: &[PathBuf]) -> Result<Report, CliError> {
    if paths.is_empty() {
        return Err(CliError::Usage("volume needs at least one --region".into()));
    }
    let mut r = Report::default();
    let mut volumes = Vec::new();
    for (i, path) in paths.iter().enumerate() {
        let (spec, set) = read_region(path)?;
        if set.contains(spec.cell_count()) {
            return Err(CliError::Runtime(format!("{}: the sink has no volume", path.display())));
        }
        let v = set.len() as f64 * spec.cell_volume();
        r.push(&format!("region{i}_cells"), set.len());
        r.push(&format!("region{i}_volume"), v);
        volumes.push(v);
    }
    if volumes.len() == 2 {
        r.push("ratio", if volumes[1] > 0.0 { volumes[0] / volumes[1] } else { 0.0 });
    }
    Ok(r)
}

/// Audits the under-approximating relation of the configured abstraction.
pub fn run_audit(cfg: &ProblemConfig, seed: u64, out_dir: Option<&Path>) -> Result<(AuditReport, Report), CliError> {
    let (system, grid) = load_system(cfg)?;
    let ts = abstraction(&system, &grid)?;
    let audit = match &system {
        System::Continuous(m) => check_fu_alternative(m, &grid, &ts, cfg.audit.samples, cfg.audit.pairs, seed),
        System::Chain(c) => check_fu_alternative(c, &grid, &ts, cfg.audit.samples, cfg.audit.pairs, seed),
    };
    let mut r = Report::default();
    r.push("pairs_checked", audit.pairs_checked);
    r.push("points_per_pair", audit.samples_per_pair);
    r.push("edges_checked", audit.edges.len());
    r.push("epsilon", audit.epsilon().map_or("-".to_string(), |e| format!("{e:e}")));
    r.push("flagged", audit.flagged.len());
    for e in &audit.flagged {
        r.push(
            "flagged_edge",
            format!("{} {} {} {:e}", e.cell, e.input, e.successor, e.min_mass),
        );
    }
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let path = dir.join("audit.txt");
        write_atomic(&path, &r.to_string()).map_err(io_err(&path))?;
    }
    Ok((audit, r))
}
