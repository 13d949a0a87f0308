//! Command-line front end.

pub mod checks;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::Parser;

use crate::error::Error;
use crate::exact::{exact_solve, fkg_min, overlap_moments, MAX_EXACT_SITES, MAX_REPLICA_SITES};
use crate::lattice::LatticeGeometry;
use crate::mc::{run_mc, Estimate};
use crate::models::sample_disorder;
use crate::stats::{aggregate, concentration_sweep, DisorderAggregate, Engine, Stat};

pub use config::{Command, ConfigError, EngineKind, RunConfig, DEFAULT_SEED};
use output::{write_atomic, Cell, Table};

/// Environment variable that overrides `output.directory`.
pub const OUT_ENV: &str = "FKG_OVERLAP_OUT";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_CAP: i32 = 4;

const TABLES_HELP: &str = "\
Commands and CSV tables (fixed column order; floats carry 17 significant digits):
  exact-solve  exact_summary.csv: index,sites,log_z,psi,mean_energy,xi_mean,xi_second,q1,q2,q11,fkg_min
               exact_sites.csv:   site,magnetization,field,gauss
  mc-run       mc_summary.csv:    observable,mean,std_err,tau
               mc_info.csv:       measurements,block_length,acceptance_rate,max_energy_drift
               mc_sites.csv:      site,mean,std_err,tau
               mc_trace.csv:      sweep,m_<a>...,R_<a>_<b>...   (mc.record_trace = true)
  aggregate    realizations.csv:  index,psi,q1,q2,q11,q1_sq,xi_mean,xi_var,fkg_min
               aggregate.csv:     quantity,value,err
  gg           gg.csv:            n,f,mu,value,err
  fkg          fkg.csv:           index,fkg_min
  scaling      scaling.csv:       L,volume,var_psi,var_psi_err,scaled_var_psi,scaled_var_psi_err,
                                  xi_var,xi_var_err,xi_abs_dev,xi_abs_dev_err,eq1,eq1_err,v1,v1_err,
                                  v2,v2_err,v3,v3_err,gg2,gg2_err,gg3,gg3_err,gap_a,gap_a_err,
                                  gap_b,gap_b_err
               scaling_fit.csv:   quantity,value
  checks       checks.csv:        check,subject,value,tolerance,passed
  oracle       oracle.csv:        index,observable,reduced,brute_force,abs_diff

Each run appends one JSON object to manifest.jsonl (output.formats containing jsonl).
Config files hold `section.key = value` lines (or `[section]` headers), `#` comments.
Keys: command, model.{family,beta,h,b,J,p,mu,field_dist}, lattice.{d,L,L_list},
      sampling.{n_samples,master_seed,index,engine}, mc.{sweeps,burn_in,thinning,n_replicas,
      update_rule,chain_seed,estimate_q11,record_trace}, output.{directory,formats}
The output directory can also be set with FKG_OVERLAP_OUT (overridden by --out).
Exit codes: 0 ok, 1 i/o error or failed check, 2 config error, 3 non-finite value, 4 size cap.";

#[derive(Parser, Debug)]
#[command(name = "fkg-overlap", version, about = "Overlap statistics for disordered ferromagnetic Ising models", after_long_help = TABLES_HELP)]
struct Args {
    /// exact-solve, mc-run, aggregate, gg, fkg, scaling, checks or oracle.
    command: Option<String>,
    /// Config file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override a config key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads (default: available parallelism).
    #[arg(long, value_name = "N")]
    workers: Option<usize>,
    /// Master seed for disorder sampling.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0} check(s) failed")]
    ChecksFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Core(e) => match e.root() {
                Error::NonFinite(_) => EXIT_NUMERIC,
                Error::CapExceeded { .. } => EXIT_CAP,
                _ => EXIT_CONFIG,
            },
            CliError::Io { .. } | CliError::ChecksFailed(_) => EXIT_FAILURE,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Builds the effective configuration: defaults, then the config file, then
/// the environment, then flags.
fn resolve(args: &Args) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        cfg.apply_text(&text)?;
    }
    if let Some(dir) = std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()) {
        cfg.out_dir = PathBuf::from(dir);
    }
    if let Some(c) = &args.command {
        cfg.set("command", c)?;
    }
    for kv in &args.set {
        cfg.apply_assignment(kv)?;
    }
    if let Some(dir) = &args.out {
        cfg.out_dir = dir.clone();
    }
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    Ok(cfg)
}

fn geometry(cfg: &RunConfig, side: usize) -> Result<Arc<LatticeGeometry>, CliError> {
    Ok(Arc::new(LatticeGeometry::new(cfg.dim, side)?))
}

fn cap(what: &'static str, value: usize, cap: usize) -> Result<(), CliError> {
    if value > cap {
        return Err(Error::CapExceeded { what, value, cap }.into());
    }
    Ok(())
}

fn engine(cfg: &RunConfig) -> Engine {
    match cfg.engine {
        EngineKind::Exact => Engine::Exact,
        EngineKind::Mc => Engine::MonteCarlo(cfg.mc.clone()),
    }
}

fn invalid(name: &'static str, reason: &str) -> CliError {
    Error::InvalidParameter {
        name,
        reason: reason.to_string(),
    }
    .into()
}

/// Checks every precondition of the selected command before any work.
pub fn validate(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.model.validate()?;
    if !cfg.formats.csv && !cfg.formats.jsonl {
        return Err(invalid("output.formats", "select at least one format"));
    }
    let uses_mc = cfg.command == Command::McRun
        || (cfg.engine == EngineKind::Mc
            && matches!(
                cfg.command,
                Command::Aggregate | Command::Gg | Command::Scaling
            ));
    if uses_mc {
        cfg.mc.validate()?;
    }
    let sides: Vec<usize> = if cfg.command == Command::Scaling {
        if cfg.sides.is_empty() {
            return Err(invalid("lattice.L_list", "need at least one side length"));
        }
        cfg.sides.clone()
    } else {
        vec![cfg.side]
    };
    for &l in &sides {
        let n = geometry(cfg, l)?.site_count();
        match cfg.command {
            Command::Oracle => cap("replica oracle sites", n, MAX_REPLICA_SITES)?,
            Command::ExactSolve | Command::Fkg => {
                cap("exact enumeration sites", n, MAX_EXACT_SITES)?
            }
            Command::Aggregate | Command::Gg | Command::Scaling if !uses_mc => {
                cap("exact enumeration sites", n, MAX_EXACT_SITES)?
            }
            _ => {}
        }
    }
    match cfg.command {
        Command::Aggregate | Command::Gg | Command::Scaling if cfg.n_samples < 2 => {
            return Err(invalid(
                "sampling.n_samples",
                "need at least two realizations",
            ));
        }
        Command::Fkg | Command::Oracle | Command::Checks if cfg.n_samples < 1 => {
            return Err(invalid(
                "sampling.n_samples",
                "need at least one realization",
            ));
        }
        Command::Fkg if cfg.engine == EngineKind::Mc => {
            return Err(invalid("sampling.engine", "fkg needs the exact engine"));
        }
        Command::Gg if cfg.model.mu == 0.0 => {
            return Err(invalid(
                "model.mu",
                "the residuals need mu != 0; see the continuity checks",
            ));
        }
        _ => {}
    }
    Ok(())
}

fn stat_cells(s: Stat) -> [Cell; 2] {
    [s.value.into(), s.err.into()]
}

fn estimate_row(name: &str, e: &Estimate) -> Vec<Cell> {
    vec![name.into(), e.mean.into(), e.std_err.into(), e.tau.into()]
}

fn aggregate_table(a: &DisorderAggregate) -> Table {
    let mut t = Table::new("aggregate", &["quantity", "value", "err"]);
    let rows = [
        ("p_L", a.p_l),
        ("var_psi", a.var_psi),
        ("Eq1", a.eq1),
        ("Eq2", a.eq2),
        ("Eq11", a.eq11),
        ("Eq1_sq", a.eq1_sq),
        ("V1", a.v1),
        ("V2", a.v2),
        ("V3", a.v3),
        ("xi_var", a.xi_var),
        ("xi_abs_dev", a.xi_abs_dev),
        ("gg2", a.gg2),
        ("gg3", a.gg3),
        ("gap_a", a.gap_a),
        ("gap_b", a.gap_b),
        (
            "min_fkg",
            Stat {
                value: a.min_fkg,
                err: f64::NAN,
            },
        ),
    ];
    for (name, s) in rows {
        let [v, e] = stat_cells(s);
        t.push(vec![name.into(), v, e]);
    }
    t
}

fn realizations_table(a: &DisorderAggregate) -> Table {
    let mut t = Table::new(
        "realizations",
        &[
            "index", "psi", "q1", "q2", "q11", "q1_sq", "xi_mean", "xi_var", "fkg_min",
        ],
    );
    for r in &a.records {
        t.push(vec![
            r.index.into(),
            r.psi.into(),
            r.q1.into(),
            r.q2.into(),
            r.q11.into(),
            r.q1_sq.into(),
            r.xi_mean.into(),
            r.xi_var.into(),
            r.fkg_min.into(),
        ]);
    }
    t
}

fn cmd_exact_solve(cfg: &RunConfig) -> Result<Vec<Table>, CliError> {
    let geom = geometry(cfg, cfg.side)?;
    let real = sample_disorder(&cfg.model, &geom, cfg.master_seed, cfg.index)?;
    let sol = exact_solve(&real, cfg.model.beta, cfg.model.mu)?;
    let m = overlap_moments(&sol, &real.overlap_weights())?;
    let mut summary = Table::new(
        "exact_summary",
        &[
            "index",
            "sites",
            "log_z",
            "psi",
            "mean_energy",
            "xi_mean",
            "xi_second",
            "q1",
            "q2",
            "q11",
            "fkg_min",
        ],
    );
    summary.push(vec![
        cfg.index.into(),
        sol.sites.into(),
        sol.log_z.into(),
        sol.psi.into(),
        sol.mean_energy.into(),
        sol.xi_mean.into(),
        sol.xi_second.into(),
        m.q1.into(),
        m.q2.into(),
        m.q11.into(),
        fkg_min(&sol).into(),
    ]);
    let mut sites = Table::new("exact_sites", &["site", "magnetization", "field", "gauss"]);
    for x in 0..sol.sites {
        sites.push(vec![
            x.into(),
            sol.magnetization[x].into(),
            real.site_fields()[x].into(),
            real.gauss()[x].into(),
        ]);
    }
    Ok(vec![summary, sites])
}

fn cmd_mc_run(cfg: &RunConfig) -> Result<Vec<Table>, CliError> {
    let geom = geometry(cfg, cfg.side)?;
    let real = sample_disorder(&cfg.model, &geom, cfg.master_seed, cfg.index)?;
    let est = run_mc(&real, cfg.model.beta, cfg.model.mu, &cfg.mc)?;
    let mut summary = Table::new("mc_summary", &["observable", "mean", "std_err", "tau"]);
    summary.push(estimate_row("q1", &est.q1));
    summary.push(estimate_row("q2", &est.q2));
    if let Some(q11) = &est.q11 {
        summary.push(estimate_row("q11", q11));
    }
    summary.push(estimate_row("xi", &est.xi));
    summary.push(estimate_row("xi_second", &est.xi_second));
    summary.push(estimate_row("energy", &est.energy));
    let mut info = Table::new(
        "mc_info",
        &[
            "measurements",
            "block_length",
            "acceptance_rate",
            "max_energy_drift",
        ],
    );
    info.push(vec![
        est.measurements.into(),
        est.block_length.into(),
        est.acceptance_rate.into(),
        est.max_energy_drift.into(),
    ]);
    let mut sites = Table::new("mc_sites", &["site", "mean", "std_err", "tau"]);
    for (x, e) in est.magnetization.iter().enumerate() {
        sites.push(vec![
            x.into(),
            e.mean.into(),
            e.std_err.into(),
            e.tau.into(),
        ]);
    }
    let mut tables = vec![summary, info, sites];
    if let Some(trace) = &est.trace {
        let k = cfg.mc.n_replicas;
        let mut cols = vec!["sweep".to_string()];
        cols.extend((0..k).map(|a| format!("m_{a}")));
        for a in 0..k {
            cols.extend((a + 1..k).map(|b| format!("R_{a}_{b}")));
        }
        let mut t = Table::new("mc_trace", &cols);
        for row in trace {
            let mut cells: Vec<Cell> = vec![row.sweep.into()];
            cells.extend(row.magnetization.iter().map(|&v| Cell::from(v)));
            cells.extend(row.overlaps.iter().map(|&v| Cell::from(v)));
            t.push(cells);
        }
        tables.push(t);
    }
    Ok(tables)
}

fn cmd_aggregate(cfg: &RunConfig) -> Result<Vec<Table>, CliError> {
    let geom = geometry(cfg, cfg.side)?;
    let a = aggregate(
        &cfg.model,
        &geom,
        cfg.n_samples,
        cfg.master_seed,
        &engine(cfg),
    )?;
    Ok(vec![realizations_table(&a), aggregate_table(&a)])
}

fn cmd_gg(cfg: &RunConfig) -> Result<Vec<Table>, CliError> {
    let geom = geometry(cfg, cfg.side)?;
    let a = aggregate(
        &cfg.model,
        &geom,
        cfg.n_samples,
        cfg.master_seed,
        &engine(cfg),
    )?;
    let mut t = Table::new("gg", &["n", "f", "mu", "value", "err"]);
    for (n, f, s) in [(2usize, "R12", a.gg2), (3, "R23", a.gg3)] {
        let [v, e] = stat_cells(s);
        t.push(vec![n.into(), f.into(), cfg.model.mu.into(), v, e]);
    }
    Ok(vec![t])
}

fn cmd_fkg(cfg: &RunConfig) -> Result<Vec<Table>, CliError> {
    let geom = geometry(cfg, cfg.side)?;
    let n = cfg.n_samples.max(2);
    let a = aggregate(&cfg.model, &geom, n, cfg.master_seed, &Engine::Exact)?;
    let mut t = Table::new("fkg", &["index", "fkg_min"]);
    for r in a.records.iter().take(cfg.n_samples) {
        t.push(vec![r.index.into(), r.fkg_min.into()]);
    }
    Ok(vec![t])
}

fn cmd_scaling(cfg: &RunConfig) -> Result<Vec<Table>, CliError> {
    let table = concentration_sweep(
        &cfg.model,
        cfg.dim,
        &cfg.sides,
        cfg.n_samples,
        cfg.master_seed,
        &engine(cfg),
    )?;
    let mut cols = vec!["L".to_string(), "volume".to_string()];
    for q in [
        "var_psi",
        "scaled_var_psi",
        "xi_var",
        "xi_abs_dev",
        "eq1",
        "v1",
        "v2",
        "v3",
        "gg2",
        "gg3",
        "gap_a",
        "gap_b",
    ] {
        cols.push(q.to_string());
        cols.push(format!("{q}_err"));
    }
    let mut t = Table::new("scaling", &cols);
    for r in &table.rows {
        let mut cells: Vec<Cell> = vec![r.l.into(), r.volume.into()];
        for s in [
            r.var_psi,
            r.scaled_var_psi,
            r.xi_var,
            r.xi_abs_dev,
            r.eq1,
            r.v1,
            r.v2,
            r.v3,
            r.gg2,
            r.gg3,
            r.gap_a,
            r.gap_b,
        ] {
            cells.extend(stat_cells(s));
        }
        t.push(cells);
    }
    let mut fit = Table::new("scaling_fit", &["quantity", "value"]);
    fit.push(vec![
        "slope_log_var_psi_vs_log_volume".into(),
        table.slope.into(),
    ]);
    Ok(vec![t, fit])
}

fn cmd_checks(cfg: &RunConfig) -> Result<Vec<Table>, CliError> {
    let mut t = Table::new(
        "checks",
        &["check", "subject", "value", "tolerance", "passed"],
    );
    let push = |t: &mut Table, check: &str, subject: String, value: f64, tol: f64| {
        t.push(vec![
            check.into(),
            subject.into(),
            value.into(),
            tol.into(),
            (value <= tol).into(),
        ]);
    };
    let spec = &cfg.model;
    let samples = cfg.n_samples.min(5) as u64;
    for (d, l) in [(1usize, 2usize), (2, 2)] {
        let geom = Arc::new(LatticeGeometry::new(d, l)?);
        for i in 0..samples {
            let real = sample_disorder(spec, &geom, cfg.master_seed, i)?;
            let subject = format!("{}x{l} d={d} realization {i}", spec.family);
            let v = checks::kernel_gap(&real, spec.beta, spec.mu)?;
            push(&mut t, "detailed-balance", subject.clone(), v, 1e-12);
            let v = checks::replica_oracle_gap(&real, spec.beta, spec.mu)?;
            push(&mut t, "replica-oracle", subject.clone(), v, 1e-10);
            let (gh, gmu) = checks::psi_gradient_gaps(&real, spec.beta, spec.mu)?;
            push(&mut t, "gradient-h", subject.clone(), gh, 1e-6);
            push(&mut t, "gradient-mu", subject, gmu, 1e-6);
        }
    }
    let qspec = checks::quadrature_spec(spec);
    let q = checks::quadrature_gaps(&qspec, 20)?;
    let subject = format!(
        "rfi 1x2 beta={} h={} b={} mu={}",
        qspec.beta, qspec.h, qspec.b, qspec.mu
    );
    push(
        &mut t,
        "quadrature-ibp",
        subject.clone(),
        q.integration_by_parts,
        1e-8,
    );
    push(
        &mut t,
        "quadrature-pressure-derivative",
        subject,
        q.pressure_derivative,
        1e-6,
    );
    Ok(vec![t])
}

fn cmd_oracle(cfg: &RunConfig) -> Result<Vec<Table>, CliError> {
    use crate::exact::{brute_force_replica, ReplicaObservable};
    let geom = geometry(cfg, cfg.side)?;
    let mut t = Table::new(
        "oracle",
        &["index", "observable", "reduced", "brute_force", "abs_diff"],
    );
    let (beta, mu) = (cfg.model.beta, cfg.model.mu);
    for i in 0..cfg.n_samples as u64 {
        let real = sample_disorder(&cfg.model, &geom, cfg.master_seed, i)?;
        let sol = exact_solve(&real, beta, mu).map_err(|e| e.at_realization(i))?;
        let m = overlap_moments(&sol, &real.overlap_weights())?;
        for f in ReplicaObservable::ALL {
            let brute = brute_force_replica(&real, beta, mu, f).map_err(|e| e.at_realization(i))?;
            let r = f.reduced(&m);
            t.push(vec![
                i.into(),
                f.name().into(),
                r.into(),
                brute.into(),
                (r - brute).abs().into(),
            ]);
        }
    }
    Ok(vec![t])
}

/// Runs the configured command and returns its tables without writing them.
pub fn execute(cfg: &RunConfig) -> Result<Vec<Table>, CliError> {
    validate(cfg)?;
    match cfg.command {
        Command::ExactSolve => cmd_exact_solve(cfg),
        Command::McRun => cmd_mc_run(cfg),
        Command::Aggregate => cmd_aggregate(cfg),
        Command::Gg => cmd_gg(cfg),
        Command::Fkg => cmd_fkg(cfg),
        Command::Scaling => cmd_scaling(cfg),
        Command::Checks => cmd_checks(cfg),
        Command::Oracle => cmd_oracle(cfg),
    }
}

pub fn version_string() -> String {
    format!("v{}", env!("CARGO_PKG_VERSION"))
}

/// One manifest line describing a run.
pub fn manifest_line(cfg: &RunConfig, tables: &[Table]) -> String {
    let files: Vec<String> = if cfg.formats.csv {
        tables.iter().map(|t| format!("{}.csv", t.name)).collect()
    } else {
        Vec::new()
    };
    let value = serde_json::json!({
        "version": version_string(),
        "command": cfg.command.name(),
        "master_seed": cfg.master_seed,
        "engine": cfg.get("sampling.engine"),
        "config": cfg.to_map(),
        "tables": files,
    });
    value.to_string()
}

/// Recovers the run configuration from a manifest line.
pub fn config_from_manifest(line: &str) -> Result<RunConfig, ConfigError> {
    let syntax = |msg: String| ConfigError::Syntax { line: 1, msg };
    let v: serde_json::Value = serde_json::from_str(line).map_err(|e| syntax(e.to_string()))?;
    let map = v
        .get("config")
        .and_then(|c| c.as_object())
        .ok_or_else(|| syntax("manifest has no `config` object".into()))?;
    let mut cfg = RunConfig::default();
    for (k, val) in map {
        let s = val
            .as_str()
            .ok_or_else(|| syntax(format!("manifest value for `{k}` is not a string")))?;
        cfg.set(k, s)?;
    }
    Ok(cfg)
}

/// Writes the tables (and manifest line) into `cfg.out_dir`.
pub fn write_outputs(cfg: &RunConfig, tables: &[Table]) -> Result<Vec<PathBuf>, CliError> {
    let dir = &cfg.out_dir;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    if cfg.formats.csv {
        for t in tables {
            let path = dir.join(format!("{}.csv", t.name));
            write_atomic(&path, t.to_csv().as_bytes()).map_err(io_err(&path))?;
            written.push(path);
        }
    }
    if cfg.formats.jsonl {
        let path = dir.join("manifest.jsonl");
        let mut text = match fs::read_to_string(&path) {
            Ok(s) => s,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(io_err(&path)(e)),
        };
        text.push_str(&manifest_line(cfg, tables));
        text.push('\n');
        write_atomic(&path, text.as_bytes()).map_err(io_err(&path))?;
        written.push(path);
    }
    Ok(written)
}

fn summary(t: &Table) -> String {
    format!(
        "{}.csv: {} row(s) x {} column(s)",
        t.name,
        t.rows.len(),
        t.columns.len()
    )
}

fn failed_checks(tables: &[Table]) -> usize {
    tables
        .iter()
        .filter(|t| t.name == "checks")
        .flat_map(|t| &t.rows)
        .filter(|r| r.last() == Some(&Cell::Text("false".into())))
        .count()
}

fn run_resolved(args: &Args) -> Result<(), CliError> {
    let cfg = resolve(args)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.workers {
        if n == 0 {
            return Err(invalid("--workers", "must be at least 1"));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| invalid("--workers", &e.to_string()))?;
    let tables = pool.install(|| execute(&cfg))?;
    write_outputs(&cfg, &tables)?;
    for t in &tables {
        println!("{}", summary(t));
    }
    match failed_checks(&tables) {
        0 => Ok(()),
        n => Err(CliError::ChecksFailed(n)),
    }
}

/// Entry point for the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match run_resolved(&args) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(kvs: &[&str]) -> RunConfig {
        let mut c = RunConfig::default();
        for kv in kvs {
            c.apply_assignment(kv).unwrap();
        }
        c
    }

    #[test]
    fn exit_codes_by_error_kind() {
        let e = execute(&cfg(&["command=exact-solve", "lattice.L=5"])).unwrap_err();
        assert_eq!(e.exit_code(), EXIT_CAP);
        let e = execute(&cfg(&["command=gg", "model.mu=0"])).unwrap_err();
        assert_eq!(e.exit_code(), EXIT_CONFIG);
        assert!(e.to_string().contains("model.mu"));
        let e = execute(&cfg(&["command=oracle", "lattice.L=3"])).unwrap_err();
        assert_eq!(e.exit_code(), EXIT_CAP);
        assert_eq!(
            CliError::Core(Error::NonFinite("x")).exit_code(),
            EXIT_NUMERIC
        );
    }

    #[test]
    fn exact_solve_tables() {
        let t = execute(&cfg(&["command=exact-solve", "lattice.d=1", "lattice.L=3"])).unwrap();
        assert_eq!(t[0].rows.len(), 1);
        assert_eq!(t[1].rows.len(), 3);
    }

    #[test]
    fn manifest_round_trip() {
        let c = cfg(&[
            "command=scaling",
            "lattice.L_list=2,3",
            "model.family=bdi",
            "model.p=0.7",
        ]);
        let line = manifest_line(&c, &[]);
        assert_eq!(config_from_manifest(&line).unwrap(), c);
    }

    #[test]
    fn checks_pass_on_defaults() {
        let t = execute(&cfg(&["command=checks"])).unwrap();
        assert_eq!(failed_checks(&t), 0, "{}", t[0].to_csv());
    }
}
