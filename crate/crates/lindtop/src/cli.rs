//! Command-line front end: scenario presets, trajectory export, winding
//! reports, control-parameter sweeps, transition detection, and symmetry
//! audits.
//!
//! Output is data-only. Trajectory CSV files carry the fixed header
//! `t,k,delta0,d1,d2,d3,n1,n2,n3,purity` with floats printed to 17
//! significant digits; reports are JSON documents with the fixed top-level
//! shape `{config, windings, transitions, audits}`. Identical configurations
//! produce byte-identical output.
//!
//! Exit codes: 0 success, 1 configuration/validation error, 2 numerical
//! refusal (a winding was demanded where the purity gap closes) or audit
//! failure.

use crate::model::{
    damping_matrix, gain_matrix, initial_correlation, loss_matrix, DampingConvention, KWindow,
    ModelParams, Variant,
};
use crate::pauli::Mat2;
use crate::symmetry::{
    inversion_defect, matrix_function_alignment, MatrixFunction, SymmetryReport,
};
use crate::topology::{
    berry_winding, classify, detect_dynamical_transition, detect_steady_transitions,
    open_arc_winding, planar_winding, window_windings, Integrality, Sample, SubWindow,
    Trajectory, TransitionEvent, GAP_TOL, INT_TOL,
};
use crate::{dynamics, Error};
use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

#[derive(Parser)]
#[command(
    name = "lindtop",
    version,
    about = "Momentum-resolved Lindblad dynamics of two-band fermion chains: \
             steady states, transient Bloch trajectories, and fractional winding numbers"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Steady-state trajectory and windings over the configured window
    Steady(CommonArgs),
    /// Transient trajectories and windings at the configured times
    Evolve(CommonArgs),
    /// Scan gamma or time, tabulating the purity gap and windings
    Sweep(ScanArgs),
    /// Locate purity-gap-closing transitions in a control range
    Detect(ScanArgs),
    /// Inversion-symmetry and matrix-function audits
    Audit(AuditArgs),
    /// Long-range chain over one Brillouin zone with the K = 3k decomposition
    Longrange(CommonArgs),
}

#[derive(Args, Clone, Default)]
pub struct CommonArgs {
    /// Preset: fig2 | fig3 | fig4 | longrange | custom
    #[arg(long)]
    pub scenario: Option<String>,
    /// Gain-matrix control parameter
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub t1: Option<f64>,
    #[arg(long)]
    pub t2: Option<f64>,
    #[arg(long)]
    pub t3: Option<f64>,
    #[arg(long)]
    pub gamma1: Option<f64>,
    #[arg(long)]
    pub gamma2: Option<f64>,
    /// Branch count of the gain matrix (period 2*pi*n)
    #[arg(long)]
    pub n: Option<u32>,
    /// Momentum window "lo,hi" in radians
    #[arg(long)]
    pub window: Option<String>,
    /// Number of momentum grid intervals
    #[arg(long)]
    pub grid: Option<usize>,
    /// Comma-separated list of times for `evolve`
    #[arg(long)]
    pub times: Option<String>,
    /// Output base path; writes <out>.csv and <out>.json
    #[arg(long)]
    pub out: Option<String>,
    /// Stdout format when --out is absent: csv | json
    #[arg(long)]
    pub format: Option<String>,
    /// Seed for randomized audits
    #[arg(long)]
    pub seed: Option<u64>,
    /// Flat key=value configuration file; flags override file values
    #[arg(long)]
    pub config: Option<String>,
}

#[derive(Args, Clone, Default)]
pub struct ScanArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Control parameter to scan: gamma | time
    #[arg(long)]
    pub control: Option<String>,
    /// Scan range "lo,hi"
    #[arg(long)]
    pub range: Option<String>,
    /// Number of scan intervals
    #[arg(long)]
    pub steps: Option<usize>,
}

#[derive(Args, Clone, Default)]
pub struct AuditArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Add c*sigma_y to the damping matrix in the audit (symmetry probe)
    #[arg(long)]
    pub perturb_sy: Option<f64>,
}

/// Fully-resolved run configuration, echoed verbatim into every report.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub scenario: String,
    pub params: ModelParams,
    pub window: [f64; 2],
    pub grid: usize,
    pub times: Vec<f64>,
    pub format: String,
    pub seed: u64,
    pub gap_tol: f64,
    pub int_tol: f64,
    pub out: Option<String>,
    pub control: Option<String>,
    pub range: Option<[f64; 2]>,
    pub steps: Option<usize>,
    pub perturb_sy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct WindingEntry {
    /// Time of the snapshot; null for the steady state.
    pub t: Option<f64>,
    pub window: [f64; 2],
    pub planar: f64,
    pub berry: f64,
    pub per_window: Vec<SubWindow>,
    pub integrality: Integrality,
}

#[derive(Debug, Clone, Serialize)]
pub struct Refusal {
    pub t: Option<f64>,
    pub error: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub config: RunConfig,
    pub windings: Vec<WindingEntry>,
    pub transitions: Vec<TransitionEvent>,
    pub audits: Vec<SymmetryReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub refusals: Vec<Refusal>,
}

/// Run outcome as a process exit code.
enum RunError {
    Config(String),
    Numeric(Error),
    Refusal(String),
    AuditFailed,
    Io(std::io::Error),
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(msg) => RunError::Config(msg),
            other => RunError::Numeric(other),
        }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

/// Parse arguments, run, and map the outcome onto the exit-code contract.
pub fn main_entry() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(RunError::Config(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(RunError::Numeric(err)) => {
            eprintln!("refusal: {err}");
            2
        }
        Err(RunError::Refusal(msg)) => {
            eprintln!("refusal: {msg}");
            2
        }
        Err(RunError::AuditFailed) => {
            eprintln!("audit failed: defect above tolerance");
            2
        }
        Err(RunError::Io(err)) => {
            eprintln!("io error: {err}");
            1
        }
    }
}

fn run(cli: Cli) -> Result<(), RunError> {
    match cli.command {
        Command::Steady(args) => run_snapshots(args, true, false),
        Command::Evolve(args) => run_snapshots(args, false, false),
        Command::Longrange(args) => run_snapshots(args, true, true),
        Command::Sweep(args) => run_scan(args, true),
        Command::Detect(args) => run_scan(args, false),
        Command::Audit(args) => run_audit(args),
    }
}

// --- Configuration resolution -------------------------------------------------

fn preset(name: &str) -> Result<RunConfig, RunError> {
    let base = RunConfig {
        scenario: name.to_string(),
        params: ModelParams::default(),
        window: [0.0, 6.0 * PI],
        grid: 3000,
        times: vec![0.0],
        format: "json".into(),
        seed: 42,
        gap_tol: GAP_TOL,
        int_tol: INT_TOL,
        out: None,
        control: None,
        range: None,
        steps: None,
        perturb_sy: 0.0,
    };
    let cfg = match name {
        "custom" => base,
        "fig2" => RunConfig {
            params: ModelParams { gamma: 0.5, ..ModelParams::default() },
            ..base
        },
        "fig3" => RunConfig {
            params: ModelParams { gamma: 1.2, ..ModelParams::default() },
            times: vec![0.0, 0.1, 0.2],
            ..base
        },
        "fig4" => RunConfig {
            params: ModelParams { gamma: 0.35, ..ModelParams::default() },
            ..base
        },
        "longrange" => RunConfig {
            params: ModelParams {
                variant: Variant::Longrange,
                t3: 2.0,
                ..ModelParams::default()
            },
            window: [0.0, 2.0 * PI],
            ..base
        },
        other => {
            return Err(RunError::Config(format!(
                "unknown scenario '{other}' (expected fig2, fig3, fig4, longrange, custom)"
            )))
        }
    };
    Ok(cfg)
}

fn parse_number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, RunError> {
    value
        .trim()
        .parse()
        .map_err(|_| RunError::Config(format!("cannot parse {key}='{value}'")))
}

fn parse_pair(key: &str, value: &str) -> Result<[f64; 2], RunError> {
    let parts: Vec<&str> = value.split(',').collect();
    if parts.len() != 2 {
        return Err(RunError::Config(format!("{key} must be 'lo,hi', got '{value}'")));
    }
    Ok([parse_number(key, parts[0])?, parse_number(key, parts[1])?])
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, RunError> {
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_number(key, s))
        .collect()
}

/// Read a flat `key=value` file; `#` starts a comment, blank lines ignored.
fn read_config_file(path: &str) -> Result<BTreeMap<String, String>, RunError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| RunError::Config(format!("cannot read config file {path}: {e}")))?;
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            RunError::Config(format!("{path}:{}: expected key=value, got '{line}'", lineno + 1))
        })?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn apply_kv(cfg: &mut RunConfig, key: &str, value: &str) -> Result<(), RunError> {
    match key {
        "scenario" => {} // consumed during preset selection
        "t1" => cfg.params.t1 = parse_number(key, value)?,
        "t2" => cfg.params.t2 = parse_number(key, value)?,
        "t3" => cfg.params.t3 = parse_number(key, value)?,
        "gamma" => cfg.params.gamma = parse_number(key, value)?,
        "gamma1" => cfg.params.gamma1 = parse_number(key, value)?,
        "gamma2" => cfg.params.gamma2 = parse_number(key, value)?,
        "gamma0" => cfg.params.gamma0 = parse_number(key, value)?,
        "n" => cfg.params.n = parse_number(key, value)?,
        "variant" => {
            cfg.params.variant = match value {
                "standard" => Variant::Standard,
                "longrange" => Variant::Longrange,
                other => {
                    return Err(RunError::Config(format!("unknown variant '{other}'")))
                }
            }
        }
        "window" => cfg.window = parse_pair(key, value)?,
        "grid" => cfg.grid = parse_number(key, value)?,
        "times" => cfg.times = parse_list(key, value)?,
        "format" => cfg.format = value.to_string(),
        "seed" => cfg.seed = parse_number(key, value)?,
        "gap_tol" => cfg.gap_tol = parse_number(key, value)?,
        "int_tol" => cfg.int_tol = parse_number(key, value)?,
        "out" => cfg.out = Some(value.to_string()),
        "control" => cfg.control = Some(value.to_string()),
        "range" => cfg.range = Some(parse_pair(key, value)?),
        "steps" => cfg.steps = Some(parse_number(key, value)?),
        "perturb_sy" => cfg.perturb_sy = parse_number(key, value)?,
        other => return Err(RunError::Config(format!("unknown config key '{other}'"))),
    }
    Ok(())
}

/// Resolve precedence: scenario preset, then config file, then flags.
fn resolve(args: &CommonArgs) -> Result<RunConfig, RunError> {
    let file = match &args.config {
        Some(path) => read_config_file(path)?,
        None => BTreeMap::new(),
    };
    let scenario = args
        .scenario
        .clone()
        .or_else(|| file.get("scenario").cloned())
        .unwrap_or_else(|| "custom".to_string());
    let mut cfg = preset(&scenario)?;
    for (key, value) in &file {
        apply_kv(&mut cfg, key, value)?;
    }
    if let Some(v) = args.gamma {
        cfg.params.gamma = v;
    }
    if let Some(v) = args.t1 {
        cfg.params.t1 = v;
    }
    if let Some(v) = args.t2 {
        cfg.params.t2 = v;
    }
    if let Some(v) = args.t3 {
        cfg.params.t3 = v;
    }
    if let Some(v) = args.gamma1 {
        cfg.params.gamma1 = v;
    }
    if let Some(v) = args.gamma2 {
        cfg.params.gamma2 = v;
    }
    if let Some(v) = args.n {
        cfg.params.n = v;
    }
    if let Some(v) = &args.window {
        cfg.window = parse_pair("window", v)?;
    }
    if let Some(v) = args.grid {
        cfg.grid = v;
    }
    if let Some(v) = &args.times {
        cfg.times = parse_list("times", v)?;
    }
    if let Some(v) = &args.out {
        cfg.out = Some(v.clone());
    }
    if let Some(v) = &args.format {
        cfg.format = v.clone();
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &RunConfig) -> Result<(), RunError> {
    cfg.params.validate()?;
    if cfg.grid < 64 {
        return Err(RunError::Config(format!("grid must be >= 64, got {}", cfg.grid)));
    }
    if !(cfg.window[1] > cfg.window[0]) {
        return Err(RunError::Config(format!(
            "window must have hi > lo, got [{}, {}]",
            cfg.window[0], cfg.window[1]
        )));
    }
    if !(cfg.gap_tol > 0.0) || !(cfg.int_tol > 0.0) {
        return Err(RunError::Config("tolerances must be positive".into()));
    }
    match cfg.format.as_str() {
        "csv" | "json" => Ok(()),
        other => Err(RunError::Config(format!("unknown format '{other}' (csv or json)"))),
    }
}

// --- Output helpers -------------------------------------------------------------

pub const CSV_HEADER: &str = "t,k,delta0,d1,d2,d3,n1,n2,n3,purity";

fn fmt(x: f64) -> String {
    format!("{:.16e}", x)
}

struct Row {
    t: f64,
    sample: Sample,
}

fn csv_rows(out: &mut String, rows: &[Row]) {
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in rows {
        let s = &row.sample;
        let n = if s.purity > GAP_TOL {
            [s.dvec[0] / s.purity, s.dvec[1] / s.purity, s.dvec[2] / s.purity]
        } else {
            [f64::NAN; 3]
        };
        let fields = [
            fmt(row.t),
            fmt(s.k),
            fmt(s.delta0),
            fmt(s.dvec[0]),
            fmt(s.dvec[1]),
            fmt(s.dvec[2]),
            fmt(n[0]),
            fmt(n[1]),
            fmt(n[2]),
            fmt(s.purity),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
}

fn emit(cfg: &RunConfig, csv: &str, report: &Report) -> Result<(), RunError> {
    let json = serde_json::to_string_pretty(report)
        .map_err(|e| RunError::Config(format!("report serialization failed: {e}")))?;
    match &cfg.out {
        Some(base) => {
            if let Some(parent) = Path::new(base).parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent)?;
                }
            }
            std::fs::write(format!("{base}.csv"), csv)?;
            std::fs::write(format!("{base}.json"), format!("{json}\n"))?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            if cfg.format == "csv" {
                lock.write_all(csv.as_bytes())?;
            } else {
                lock.write_all(json.as_bytes())?;
                lock.write_all(b"\n")?;
            }
        }
    }
    Ok(())
}

// --- Winding assembly -------------------------------------------------------------

/// Windings of the configured window at one time (or steady). For windows
/// `[0, 2πm]` the per-2π decomposition is included; other windows are treated
/// as a single closed span.
fn winding_entry(cfg: &RunConfig, time: dynamics::TimeSpec) -> Result<WindingEntry, Error> {
    let t = match time {
        dynamics::TimeSpec::Steady => None,
        dynamics::TimeSpec::At(t) => Some(t),
    };
    let span = cfg.window[1] - cfg.window[0];
    let m = (span / (2.0 * PI)).round() as usize;
    if cfg.window[0] == 0.0 && m >= 1 && (span - 2.0 * PI * m as f64).abs() < 1e-9 {
        let per = cfg.grid.div_ceil(m);
        let report = window_windings(&cfg.params, time, m, per)?;
        Ok(WindingEntry {
            t,
            window: cfg.window,
            planar: report.planar,
            berry: report.berry,
            per_window: report.per_window,
            integrality: classify(report.berry, cfg.int_tol),
        })
    } else {
        let w = KWindow::new(cfg.window[0], cfg.window[1], cfg.grid, true)?;
        let traj = dynamics::trajectory(&cfg.params, &w, time);
        let berry = berry_winding(&traj)?;
        let planar = planar_winding(&traj)?;
        Ok(WindingEntry {
            t,
            window: cfg.window,
            planar,
            berry,
            per_window: Vec::new(),
            integrality: classify(berry, cfg.int_tol),
        })
    }
}

/// Full-BZ windings of the long-range chain with the `K = 3k` decomposition:
/// thirds of the physical zone are labelled by the unfolded momentum
/// `K ∈ [0, 6π]` so the entries compare directly with the standard `n = 3`
/// per-window values.
fn longrange_entry(cfg: &RunConfig) -> Result<WindingEntry, Error> {
    let grid = cfg.grid.div_ceil(3) * 3;
    let w = KWindow::new(0.0, 2.0 * PI, grid, true)?;
    let traj = dynamics::trajectory(&cfg.params, &w, dynamics::TimeSpec::Steady);
    let berry = berry_winding(&traj)?;
    let planar = planar_winding(&traj)?;
    let nvecs = traj.unit_vectors()?;
    let third = grid / 3;
    let mut per_window = Vec::with_capacity(3);
    for j in 0..3 {
        let slice = &nvecs[j * third..=(j + 1) * third];
        let gap = (0..3)
            .map(|a| (slice[0][a] - slice[slice.len() - 1][a]).powi(2))
            .sum::<f64>()
            .sqrt();
        let value = if gap < 1e-9 {
            let sub = KWindow::new(0.0, 2.0 * PI, third, true)?;
            berry_winding(&Trajectory::from_directions(sub, slice))?
        } else {
            open_arc_winding(slice)?
        };
        per_window.push(SubWindow {
            window: [2.0 * PI * j as f64, 2.0 * PI * (j + 1) as f64],
            berry: value,
        });
    }
    Ok(WindingEntry {
        t: None,
        window: [0.0, 2.0 * PI],
        planar,
        berry,
        per_window,
        integrality: classify(berry, cfg.int_tol),
    })
}

// --- Subcommand drivers ---------------------------------------------------------------

fn run_snapshots(args: CommonArgs, steady: bool, longrange: bool) -> Result<(), RunError> {
    let mut args = args;
    if longrange && args.scenario.is_none() {
        args.scenario = Some("longrange".into());
    }
    let cfg = resolve(&args)?;

    let mut rows = Vec::new();
    let mut windings = Vec::new();
    let mut refusals = Vec::new();

    let time_specs: Vec<dynamics::TimeSpec> = if steady {
        vec![dynamics::TimeSpec::Steady]
    } else {
        cfg.times.iter().map(|&t| dynamics::TimeSpec::At(t)).collect()
    };

    for &time in &time_specs {
        let t_column = match time {
            dynamics::TimeSpec::Steady => f64::INFINITY,
            dynamics::TimeSpec::At(t) => t,
        };
        let w = KWindow::new(cfg.window[0], cfg.window[1], cfg.grid, true)
            .map_err(RunError::from)?;
        let traj = dynamics::trajectory(&cfg.params, &w, time);
        for sample in &traj.samples {
            rows.push(Row { t: t_column, sample: *sample });
        }
        let entry = if longrange {
            longrange_entry(&cfg)
        } else {
            winding_entry(&cfg, time)
        };
        match entry {
            Ok(entry) => windings.push(entry),
            Err(err) => refusals.push(Refusal {
                t: match time {
                    dynamics::TimeSpec::Steady => None,
                    dynamics::TimeSpec::At(t) => Some(t),
                },
                error: err.to_string(),
            }),
        }
    }

    let report = Report {
        config: cfg.clone(),
        windings,
        transitions: Vec::new(),
        audits: Vec::new(),
        refusals: refusals.clone(),
    };
    let mut csv = String::new();
    csv_rows(&mut csv, &rows);
    emit(&cfg, &csv, &report)?;

    // Refusals are recorded in the report and mapped onto exit code 2.
    match refusals.first() {
        Some(r) => Err(RunError::Refusal(r.error.clone())),
        None => Ok(()),
    }
}

fn run_scan(args: ScanArgs, sweep: bool) -> Result<(), RunError> {
    let cfg = {
        let mut cfg = resolve(&args.common)?;
        if let Some(v) = &args.control {
            cfg.control = Some(v.clone());
        }
        if let Some(v) = &args.range {
            cfg.range = Some(parse_pair("range", v)?);
        }
        if let Some(v) = args.steps {
            cfg.steps = Some(v);
        }
        cfg
    };
    let control = cfg.control.clone().unwrap_or_else(|| "gamma".to_string());
    let default_range = match control.as_str() {
        "gamma" => [0.5, 1.5],
        _ => [0.0, 0.5],
    };
    let range = cfg.range.unwrap_or(default_range);
    let steps = cfg.steps.unwrap_or(20);
    if !(range[1] > range[0]) || steps < 2 {
        return Err(RunError::Config(format!(
            "scan needs range lo < hi and steps >= 2, got [{}, {}] with {steps} steps",
            range[0], range[1]
        )));
    }

    let transitions = match control.as_str() {
        "gamma" => detect_steady_transitions(&cfg.params, range[0], range[1], steps),
        "time" => detect_dynamical_transition(&cfg.params, range[0], range[1], steps),
        other => {
            return Err(RunError::Config(format!(
                "unknown control '{other}' (gamma or time)"
            )))
        }
    };

    let mut csv = String::from("control,min_purity,planar,berry\n");
    if sweep {
        let h = (range[1] - range[0]) / steps as f64;
        for j in 0..=steps {
            let c = range[0] + j as f64 * h;
            let (params, time) = match control.as_str() {
                "gamma" => (
                    ModelParams { gamma: c, ..cfg.params },
                    dynamics::TimeSpec::Steady,
                ),
                _ => (cfg.params, dynamics::TimeSpec::At(c)),
            };
            let w = KWindow::new(cfg.window[0], cfg.window[1], cfg.grid, true)
                .map_err(RunError::from)?;
            let traj = dynamics::trajectory(&params, &w, time);
            let min_purity = traj.min_purity();
            let planar = planar_winding(&traj).unwrap_or(f64::NAN);
            let berry = berry_winding(&traj).unwrap_or(f64::NAN);
            csv.push_str(&format!(
                "{},{},{},{}\n",
                fmt(c),
                fmt(min_purity),
                fmt(planar),
                fmt(berry)
            ));
        }
    }

    let mut cfg = cfg;
    cfg.control = Some(control);
    cfg.range = Some(range);
    cfg.steps = Some(steps);
    let report = Report {
        config: cfg.clone(),
        windings: Vec::new(),
        transitions,
        audits: Vec::new(),
        refusals: Vec::new(),
    };
    emit(&cfg, &csv, &report)
}

fn run_audit(args: AuditArgs) -> Result<(), RunError> {
    let mut cfg = resolve(&args.common)?;
    if let Some(v) = args.perturb_sy {
        cfg.perturb_sy = v;
    }
    let p = cfg.params;
    let half_span = 0.5 * (cfg.window[1] - cfg.window[0]);
    let w = KWindow::new(0.0, half_span.max(PI), (cfg.grid / 4).max(64), false)
        .map_err(RunError::from)?;

    let perturbation = Mat2::sigma_y().scale_re(cfg.perturb_sy);
    let mut audits = vec![
        inversion_defect(
            |k| damping_matrix(&p, k, DampingConvention::Explicit).add(&perturbation),
            &w,
            "damping_matrix",
        ),
        inversion_defect(|k| gain_matrix(&p, k), &w, "gain_matrix"),
        inversion_defect(|k| loss_matrix(&p, k), &w, "loss_matrix"),
        inversion_defect(
            |k| initial_correlation(&p, k).unwrap_or_else(|_| Mat2::zero()),
            &w,
            "initial_correlation",
        ),
    ];
    for &t in &cfg.times {
        audits.push(inversion_defect(
            |k| match dynamics::evolution_state(&p, k) {
                Ok(s) => dynamics::propagate(&s, t),
                Err(_) => Mat2::zero(),
            },
            &w,
            &format!("delta(t={t})"),
        ));
    }
    audits.push(inversion_defect(
        |k| {
            let x = damping_matrix(&p, k, DampingConvention::Explicit);
            crate::pauli::solve_lyapunov(&x, &gain_matrix(&p, k))
                .unwrap_or_else(|_| Mat2::zero())
        },
        &w,
        "steady_state",
    ));

    // Matrix-function alignment over seeded random valid states.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut max_dev = 0.0f64;
    let mut worst = 0usize;
    let draws = 1000;
    for i in 0..draws {
        let d0: f64 = rng.gen_range(0.3..0.7);
        let raw: [f64; 3] = [
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ];
        let r = (raw[0] * raw[0] + raw[1] * raw[1] + raw[2] * raw[2]).sqrt();
        if r < 1e-3 {
            continue;
        }
        let s = (d0.min(1.0 - d0) - 1e-3) / r * 0.95;
        let d = Mat2::from_pauli_re(d0, raw[0] * s, raw[1] * s, raw[2] * s);
        for f in [
            MatrixFunction::Modular,
            MatrixFunction::Square,
            MatrixFunction::Cube,
            MatrixFunction::Exponential,
        ] {
            if let Ok(a) = matrix_function_alignment(&d, f) {
                let dev = (a - 1.0).abs();
                if dev > max_dev {
                    max_dev = dev;
                    worst = i;
                }
            }
        }
    }
    audits.push(SymmetryReport {
        operator_name: "matrix_function_alignment".into(),
        max_defect: max_dev,
        worst_k: worst as f64,
        samples: draws,
    });

    let failed = audits.iter().any(|a| {
        if a.operator_name == "matrix_function_alignment" {
            a.max_defect > 1e-9
        } else {
            a.max_defect > 1e-8
        }
    });

    let report = Report {
        config: cfg.clone(),
        windings: Vec::new(),
        transitions: Vec::new(),
        audits,
        refusals: Vec::new(),
    };
    let csv = {
        let mut s = String::from("operator,max_defect,worst_k,samples\n");
        for a in &report.audits {
            s.push_str(&format!(
                "{},{},{},{}\n",
                a.operator_name,
                fmt(a.max_defect),
                fmt(a.worst_k),
                a.samples
            ));
        }
        s
    };
    emit(&cfg, &csv, &report)?;
    if failed {
        Err(RunError::AuditFailed)
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_resolve() {
        for name in ["fig2", "fig3", "fig4", "longrange", "custom"] {
            let cfg = preset(name).map_err(|_| ()).unwrap();
            assert_eq!(cfg.scenario, name);
            validate(&cfg).map_err(|_| ()).unwrap();
        }
        assert!(preset("fig9").is_err());
    }

    #[test]
    fn fig3_preset_parameters() {
        let cfg = preset("fig3").map_err(|_| ()).unwrap();
        assert_eq!(cfg.params.gamma, 1.2);
        assert_eq!(cfg.times, vec![0.0, 0.1, 0.2]);
        assert_eq!(cfg.window, [0.0, 6.0 * PI]);
    }

    #[test]
    fn flags_override_preset() {
        let args = CommonArgs {
            scenario: Some("fig2".into()),
            gamma: Some(0.8),
            grid: Some(500),
            ..CommonArgs::default()
        };
        let cfg = resolve(&args).map_err(|_| ()).unwrap();
        assert_eq!(cfg.params.gamma, 0.8);
        assert_eq!(cfg.grid, 500);
        assert_eq!(cfg.params.t2, 2.0);
    }

    #[test]
    fn config_file_between_preset_and_flags() {
        let dir = std::env::temp_dir().join("lindtop-cli-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("case.conf");
        std::fs::write(&path, "scenario=fig2\ngamma=0.9 # comment\ngrid=700\n").unwrap();
        let args = CommonArgs {
            config: Some(path.to_string_lossy().into_owned()),
            grid: Some(900),
            ..CommonArgs::default()
        };
        let cfg = resolve(&args).map_err(|_| ()).unwrap();
        assert_eq!(cfg.scenario, "fig2");
        assert_eq!(cfg.params.gamma, 0.9); // file beats preset
        assert_eq!(cfg.grid, 900); // flag beats file
    }

    #[test]
    fn invalid_values_rejected() {
        let args = CommonArgs { grid: Some(10), ..CommonArgs::default() };
        assert!(matches!(resolve(&args), Err(RunError::Config(_))));
        let args = CommonArgs {
            window: Some("3.0,1.0".into()),
            ..CommonArgs::default()
        };
        assert!(matches!(resolve(&args), Err(RunError::Config(_))));
        let args = CommonArgs {
            format: Some("xml".into()),
            ..CommonArgs::default()
        };
        assert!(matches!(resolve(&args), Err(RunError::Config(_))));
    }

    #[test]
    fn csv_format_is_fixed() {
        let rows = vec![Row {
            t: 0.0,
            sample: Sample { k: 1.0, delta0: 1.0, dvec: [0.5, 0.0, 0.0], purity: 0.5 },
        }];
        let mut out = String::new();
        csv_rows(&mut out, &rows);
        let mut lines = out.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        let row = lines.next().unwrap();
        assert!(row.starts_with("0.0000000000000000e0,1.0000000000000000e0"));
        assert_eq!(row.split(',').count(), 10);
    }

    #[test]
    fn winding_entry_full_span() {
        let cfg = preset("fig2").map_err(|_| ()).unwrap();
        let cfg = RunConfig { grid: 3000, ..cfg };
        let entry = winding_entry(&cfg, dynamics::TimeSpec::Steady).unwrap();
        assert!((entry.berry - 1.0).abs() < 1e-3);
        assert_eq!(entry.per_window.len(), 3);
        assert_eq!(entry.integrality, Integrality::Integer(1));
    }

    #[test]
    fn longrange_matches_standard_decomposition() {
        let cfg = preset("longrange").map_err(|_| ()).unwrap();
        let entry = longrange_entry(&cfg).unwrap();
        assert_eq!(entry.per_window.len(), 3);
        assert!((entry.berry - 1.0).abs() < 1e-3, "berry {}", entry.berry);
    }
}
