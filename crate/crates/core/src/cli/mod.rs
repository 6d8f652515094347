//! The `optent` experiment runner.
//!
//! Exit codes: 0 on success, 2 for argument or configuration errors, 3 for runtime errors
//! (a JSON diagnostic is printed on stderr).

pub mod config;
mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

pub use config::{Config, DistributionConfig, OutputFormat, Overrides, SystemConfig, OUT_DIR_ENV};
use output::{write_columns, write_json, Series};

use crate::cocycle::{audit_mane_bound, audit_quotient_inequalities, is_optical, twist_probe, POSITIVITY_TOL};
use crate::entropy::{
    epsilon_extrapolate, estimate_slope, growth_series_expansion, growth_series_theorem_a, growth_series_theorem_b,
    hyperplane_field, EntropyEstimate, GrowthSeries,
};
use crate::error::Error;
use crate::hamflow::{
    catalog, evolve_with_frames, reversibility_error, sample_shell, windowed_reversibility_error, PhasePoint,
};
use crate::symplin::LagrangianFrame;

/// Window of the windowed round-trip check reported by `simulate`.
pub const REVERSIBILITY_WINDOW: f64 = 1.0;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// Labels the finite-(t, ε) protocol in every estimate summary.
const PROTOCOL: &str =
    "finite-time, finite-width protocol: OLS slope of log averages over the window at fixed epsilon; \
epsilon -> 0 by affine extrapolation when three or more widths are given";

#[derive(Debug, Parser)]
#[command(name = "optent", version, about = "Entropy estimation for optical Hamiltonian flows")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    #[arg(long, global = true)]
    pub tmax: Option<f64>,
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    /// Shell half-width; repeat for several widths.
    #[arg(long, global = true)]
    pub epsilon: Vec<f64>,
    /// Output directory (defaults to $OPTENT_OUT_DIR, then ./optent-out).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<OutputFormat>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AuditKind {
    Mane,
    Quotient,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one trajectory and report hygiene diagnostics.
    Simulate,
    /// Growth series of the restricted determinant over the energy shell.
    EntropyA,
    /// Growth series of the restricted determinant on the quotient distribution of a level.
    EntropyB,
    /// Growth series of the expansion over the energy shell.
    Expansion,
    /// Audit the determinant/expansion bound or the quotient inequalities.
    Audit {
        #[arg(value_enum)]
        kind: AuditKind,
    },
    /// Check positivity of the twist form on shell samples.
    Opticity,
    /// Transversality profile of one trajectory.
    Twist,
    /// Print the built-in systems.
    ListSystems,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(Error),
    Io(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Runtime(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            _ => EXIT_RUNTIME,
        }
    }

    pub fn diagnostic(&self) -> Value {
        match self {
            CliError::Config(m) => json!({ "error": "config", "message": m }),
            CliError::Io(m) => json!({ "error": "io", "message": m }),
            CliError::Runtime(e) => json!({ "error": e, "message": e.to_string() }),
        }
    }
}

/// Parses `args` and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(summary) => {
            if !summary.is_null() {
                println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("{}", serde_json::to_string_pretty(&e.diagnostic()).expect("diagnostic serializes"));
            e.exit_code()
        }
    }
}

/// Resolves the configuration and dispatches; returns the JSON summary that was written.
pub fn run(cli: &Cli) -> Result<Value, CliError> {
    if let Command::ListSystems = cli.command {
        return list_systems(cli.format.unwrap_or_default());
    }
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p).map_err(CliError::Config)?,
        None => Config::default(),
    };
    cfg.apply(&Overrides {
        seed: cli.seed,
        samples: cli.samples,
        t_max: cli.tmax,
        dt: cli.dt,
        epsilon: cli.epsilon.clone(),
        out: cli.out.clone(),
        format: cli.format,
    });
    cfg.resolve(std::env::var(OUT_DIR_ENV).ok());
    cfg.validate().map_err(CliError::Config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("cannot build thread pool: {e}")))?;
    pool.install(|| dispatch(&cli.command, &cfg))
}

fn dispatch(cmd: &Command, cfg: &Config) -> Result<Value, CliError> {
    let out = cfg.out_dir();
    std::fs::create_dir_all(&out).map_err(|e| CliError::Io(format!("cannot create {}: {e}", out.display())))?;
    let summary = match cmd {
        Command::Simulate => simulate(cfg)?,
        Command::EntropyA => shell_series(cfg, "entropy-a")?,
        Command::Expansion => shell_series(cfg, "expansion")?,
        Command::EntropyB => entropy_b(cfg)?,
        Command::Audit { kind: AuditKind::Mane } => audit_mane(cfg)?,
        Command::Audit { kind: AuditKind::Quotient } => audit_quotient(cfg)?,
        Command::Opticity => opticity(cfg)?,
        Command::Twist => twist(cfg)?,
        Command::ListSystems => unreachable!("handled before configuration"),
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

fn base_summary(cfg: &Config, mode: &str) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("mode".into(), json!(mode));
    m.insert("config".into(), serde_json::to_value(cfg).expect("config serializes"));
    m
}

fn series_value(s: &GrowthSeries) -> Value {
    json!({
        "integrand": s.integrand,
        "n_samples": s.n_samples,
        "warnings": s.warnings,
        "max_energy_drift": s.max_energy_drift,
        "max_symp_residual": s.max_symp_residual,
        "svd_gap": s.svd_gap,
    })
}

fn write_series(cfg: &Config, name: &str, s: &GrowthSeries) -> Result<(), CliError> {
    let n = vec![s.n_samples as f64; s.t.len()];
    write_columns(
        &cfg.out_dir(),
        name,
        cfg.format,
        &Series::new(&[("t", &s.t), ("log_avg", &s.log_avg), ("stderr", &s.stderr)]).with_counts("n_samples", &n),
    )
}

fn start_point(cfg: &Config) -> Result<PhasePoint, CliError> {
    if let Some(p) = cfg.start_point().map_err(CliError::Config)? {
        return Ok(p);
    }
    let sys = cfg.system().map_err(CliError::Config)?;
    let shell = cfg.shell(cfg.epsilon[0], 1);
    Ok(sample_shell(sys.as_ref(), &shell)?.points.remove(0))
}

fn simulate(cfg: &Config) -> Result<Value, CliError> {
    let sys = cfg.system().map_err(CliError::Config)?;
    let x = start_point(cfg)?;
    let grid = cfg.grid().map_err(CliError::Config)?;
    let n = sys.dof();
    let frames = vec![("vertical".to_string(), LagrangianFrame::vertical(n).frame().clone())];
    let traj = evolve_with_frames(sys.as_ref(), &x, &grid, &frames, &cfg.evolve_options())?;
    let logv = traj.log_volumes("vertical").expect("tracked");
    let energies: Vec<f64> = traj.points.iter().map(|p| sys.energy(p.as_slice())).collect();
    let mut cols: Vec<(String, Vec<f64>)> = vec![("t".into(), traj.times.clone())];
    for i in 0..2 * n {
        let label = if i < n { format!("q{}", i + 1) } else { format!("p{}", i - n + 1) };
        cols.push((label, traj.points.iter().map(|p| p.as_slice()[i]).collect()));
    }
    cols.push(("energy".into(), energies));
    cols.push(("log_vol_vertical".into(), logv));
    let view: Vec<(&str, &[f64])> = cols.iter().map(|(k, v)| (k.as_str(), v.as_slice())).collect();
    write_columns(&cfg.out_dir(), "trajectory", cfg.format, &Series::new(&view))?;
    let rev = reversibility_error(sys.as_ref(), &x, cfg.t_max, cfg.dt, cfg.scheme)?;
    let rev_windowed = windowed_reversibility_error(
        sys.as_ref(),
        &x,
        cfg.t_max,
        REVERSIBILITY_WINDOW.min(cfg.t_max),
        cfg.dt,
        cfg.scheme,
    )?;
    let mut m = base_summary(cfg, "simulate");
    m.insert("initial_point".into(), json!(x.as_slice()));
    m.insert("scheme".into(), json!(traj.scheme));
    m.insert("steps".into(), json!(traj.steps));
    m.insert("renormalizations".into(), json!(traj.renormalizations));
    m.insert("energy_drift".into(), json!(traj.energy_drift));
    m.insert("symp_residual".into(), json!(traj.symp_residual));
    m.insert("reversibility_error".into(), json!(rev));
    m.insert("windowed_reversibility_error".into(), json!(rev_windowed));
    m.insert("reversibility_window".into(), json!(REVERSIBILITY_WINDOW.min(cfg.t_max)));
    Ok(Value::Object(m))
}

fn estimate_value(e: &EntropyEstimate) -> Value {
    serde_json::to_value(e).expect("estimate serializes")
}

fn shell_series(cfg: &Config, mode: &str) -> Result<Value, CliError> {
    let sys = cfg.system().map_err(CliError::Config)?;
    let dist = cfg.distribution(sys.dof()).map_err(CliError::Config)?;
    let grid = cfg.grid().map_err(CliError::Config)?;
    let opts = cfg.evolve_options();
    let many = cfg.epsilon.len() > 1;
    let mut pairs = Vec::new();
    let mut entries = Vec::new();
    for (i, &eps) in cfg.epsilon.iter().enumerate() {
        let shell = cfg.shell(eps, cfg.samples);
        let s = if mode == "expansion" {
            growth_series_expansion(sys.as_ref(), &shell, &grid, &opts)?
        } else {
            growth_series_theorem_a(sys.as_ref(), &dist, &shell, &grid, &opts)?
        };
        let mut est = estimate_slope(&s, cfg.window())?;
        est.epsilon = Some(eps);
        let name = if many { format!("series_eps_{i}") } else { "series".to_string() };
        write_series(cfg, &name, &s)?;
        entries.push(
            json!({ "epsilon": eps, "file": name, "estimate": estimate_value(&est), "series": series_value(&s) }),
        );
        pairs.push((eps, est));
    }
    let mut m = base_summary(cfg, mode);
    m.insert("protocol".into(), json!(PROTOCOL));
    m.insert("estimates".into(), Value::Array(entries));
    if pairs.len() >= 3 {
        m.insert("extrapolation".into(), estimate_value(&epsilon_extrapolate(&pairs)?));
    }
    Ok(Value::Object(m))
}

fn entropy_b(cfg: &Config) -> Result<Value, CliError> {
    let sys = cfg.system().map_err(CliError::Config)?;
    let dist = cfg.distribution(sys.dof()).map_err(CliError::Config)?;
    let grid = cfg.grid().map_err(CliError::Config)?;
    let field = hyperplane_field(sys.as_ref(), cfg.e)?;
    let s = growth_series_theorem_b(sys.as_ref(), &dist, cfg.e, cfg.samples, cfg.seed, &grid, &cfg.evolve_options())?;
    let est = estimate_slope(&s, cfg.window())?;
    write_series(cfg, "series", &s)?;
    let mut m = base_summary(cfg, "entropy-b");
    m.insert("protocol".into(), json!(PROTOCOL));
    m.insert("hyperplane_field".into(), serde_json::to_value(&field.report).expect("report serializes"));
    m.insert("estimate".into(), estimate_value(&est));
    m.insert("series".into(), series_value(&s));
    Ok(Value::Object(m))
}

fn audit_mane(cfg: &Config) -> Result<Value, CliError> {
    let sys = cfg.system().map_err(CliError::Config)?;
    let dist = cfg.distribution(sys.dof()).map_err(CliError::Config)?;
    let grid = cfg.grid().map_err(CliError::Config)?;
    let shell = cfg.shell(cfg.epsilon[0], cfg.samples);
    let a = audit_mane_bound(sys.as_ref(), &dist, &shell, &grid, cfg.window(), &cfg.evolve_options())?;
    write_columns(&cfg.out_dir(), "audit_mane", cfg.format, &Series::new(&[("t", &a.t), ("log_r", &a.log_r)]))?;
    let mut m = base_summary(cfg, "audit-mane");
    m.insert("min_r".into(), json!(a.min_r));
    m.insert("max_r".into(), json!(a.max_r));
    m.insert("trivial_bound_ok".into(), json!(a.trivial_bound_ok));
    m.insert("log_r_slope".into(), estimate_value(&a.slope));
    m.insert("det_slope".into(), estimate_value(&a.det_slope));
    m.insert("ex_slope".into(), estimate_value(&a.ex_slope));
    m.insert("n_samples".into(), json!(a.n_samples));
    m.insert("min_opticity_eigenvalue".into(), json!(a.opticity.min_eigenvalue));
    m.insert("warnings".into(), json!(a.warnings));
    Ok(Value::Object(m))
}

fn audit_quotient(cfg: &Config) -> Result<Value, CliError> {
    let sys = cfg.system().map_err(CliError::Config)?;
    let dist = cfg.distribution(sys.dof()).map_err(CliError::Config)?;
    let grid = cfg.grid().map_err(CliError::Config)?;
    let a = audit_quotient_inequalities(
        sys.as_ref(),
        &dist,
        cfg.e,
        &grid,
        cfg.samples,
        cfg.seed,
        cfg.window(),
        &cfg.evolve_options(),
    )?;
    write_columns(
        &cfg.out_dir(),
        "audit_quotient",
        cfg.format,
        &Series::new(&[("t", &a.t), ("mean_log_k1", &a.mean_log_k1), ("mean_log_k2", &a.mean_log_k2)]),
    )?;
    let mut m = base_summary(cfg, "audit-quotient");
    m.insert("max_log_k1".into(), json!(a.max_log_k1));
    m.insert("max_log_k2".into(), json!(a.max_log_k2));
    m.insert("slope_k1".into(), estimate_value(&a.slope_k1));
    m.insert("slope_k2".into(), estimate_value(&a.slope_k2));
    m.insert("max_leakage".into(), json!(a.max_leakage));
    m.insert("n_samples".into(), json!(a.n_samples));
    Ok(Value::Object(m))
}

fn opticity(cfg: &Config) -> Result<Value, CliError> {
    let sys = cfg.system().map_err(CliError::Config)?;
    let dist = cfg.distribution(sys.dof()).map_err(CliError::Config)?;
    let shell = cfg.shell(cfg.epsilon[0], cfg.samples);
    let pts = sample_shell(sys.as_ref(), &shell)?.points;
    let r = is_optical(sys.as_ref(), &dist, &pts, POSITIVITY_TOL)?;
    let idx: Vec<f64> = (0..r.min_eigenvalues.len()).map(|i| i as f64).collect();
    write_columns(
        &cfg.out_dir(),
        "opticity",
        cfg.format,
        &Series::new(&[("min_eigenvalue", &r.min_eigenvalues)]).with_counts("sample", &idx).counts_first(),
    )?;
    let mut m = base_summary(cfg, "opticity");
    m.insert("optical".into(), json!(r.optical));
    m.insert("min_eigenvalue".into(), json!(r.min_eigenvalue));
    m.insert("max_eigenvalue".into(), json!(r.max_eigenvalue));
    m.insert("max_antisymmetry".into(), json!(r.max_antisymmetry));
    m.insert("fd_discrepancy".into(), json!(r.fd_discrepancy));
    m.insert("tol".into(), json!(r.tol));
    m.insert("sample_count".into(), json!(r.sample_count));
    Ok(Value::Object(m))
}

fn twist(cfg: &Config) -> Result<Value, CliError> {
    let sys = cfg.system().map_err(CliError::Config)?;
    let dist = cfg.distribution(sys.dof()).map_err(CliError::Config)?;
    let x = start_point(cfg)?;
    let p = twist_probe(sys.as_ref(), &dist, &x, cfg.t_max, &cfg.deltas, cfg.dt)?;
    write_columns(
        &cfg.out_dir(),
        "twist",
        cfg.format,
        &Series::new(&[("delta", &p.deltas), ("measure", &p.measures)]),
    )?;
    write_columns(&cfg.out_dir(), "twist_angles", cfg.format, &Series::new(&[("t", &p.times), ("angle", &p.angles)]))?;
    let mut m = base_summary(cfg, "twist");
    m.insert("initial_point".into(), json!(x.as_slice()));
    m.insert("deltas".into(), json!(p.deltas));
    m.insert("measures".into(), json!(p.measures));
    Ok(Value::Object(m))
}

fn list_systems(format: OutputFormat) -> Result<Value, CliError> {
    let cat = catalog();
    match format {
        OutputFormat::Json => {
            let v: Vec<Value> = cat
                .iter()
                .map(|s| {
                    json!({
                        "name": s.name,
                        "description": s.description,
                        "params": s.params.iter().map(|(k, d, h)| json!({ "name": k, "default": d, "description": h })).collect::<Vec<_>>(),
                    })
                })
                .collect();
            Ok(Value::Array(v))
        }
        OutputFormat::Csv => {
            for s in &cat {
                let params: Vec<String> = s.params.iter().map(|(k, d, _)| format!("{k}={d}")).collect();
                println!("{:<18} {:<40} {}", s.name, params.join(" "), s.description);
            }
            Ok(Value::Null)
        }
    }
}
