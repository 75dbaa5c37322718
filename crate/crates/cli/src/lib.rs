//! Command-line front end: generate ensembles, build Gram matrices, run the
//! verification suites, search violation witnesses and scan the `(a, b)`
//! plane. Every artifact is CSV or JSON and written atomically.
//!
//! Settings come from flags, then an optional config file, then defaults.
//! The config file is either flat `key = value` text with the flag names as
//! keys, or the JSON metadata written by `gen` (which replays the run).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use longmem_gp::kernels::{self, KernelError};
use longmem_gp::pd_analysis::{self, PdError, PsdCertificate, Status};
use longmem_gp::properties::{self, CheckError, Condition, IncrRegion, LrdQuadruple};
use longmem_gp::sampling::{self, SamplingError};
use longmem_gp::{FamilySpec, PathEnsemble, TimeGrid, VerificationReport};

pub const SCHEMA_VERSION: u32 = 1;
pub const THREADS_ENV: &str = "LONGMEM_GP_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

fn from_kernel(e: KernelError) -> CliError {
    match e {
        KernelError::Quadrature { .. } | KernelError::Numerical(_) => CliError::Numerical(e.to_string()),
        _ => CliError::Config(e.to_string()),
    }
}

fn from_pd(e: PdError) -> CliError {
    match e {
        PdError::Kernel(k) => from_kernel(k),
        PdError::NonFinite { .. } | PdError::WitnessNotFound { .. } => CliError::Numerical(e.to_string()),
        _ => CliError::Config(e.to_string()),
    }
}

fn from_sampling(e: SamplingError) -> CliError {
    match e {
        SamplingError::Kernel(k) => from_kernel(k),
        SamplingError::Pd(p) => from_pd(p),
        SamplingError::Cholesky { .. } => CliError::Numerical(e.to_string()),
        SamplingError::Domain(_) => CliError::Config(e.to_string()),
    }
}

fn from_check(e: CheckError) -> CliError {
    match e {
        CheckError::Config(_) => CliError::Config(e.to_string()),
        CheckError::Kernel(k) => from_kernel(k),
        CheckError::Pd(p) => from_pd(p),
        CheckError::Sampling(s) => from_sampling(s),
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Gen,
    Gram,
    Verify,
    Witness,
    Scan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Wfbm,
    Sfbm,
    Nsfbm,
    OddBfbm,
    Eta,
    Fbm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Kernels,
    Pd,
    Sampling,
    Properties,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Gram factorization on the grid.
    Direct,
    /// sfBm from the even part of a two-sided fBm.
    Even,
    /// nsfBm by integrating the odd-part derivative process.
    Odd,
    /// wfBm with `b = 1` by integrating a time-changed Bm.
    TimeChanged,
}

/// Fully resolved settings of one run. Every default is filled in, so the
/// serialized form is enough to repeat the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub family: Family,
    pub a: f64,
    pub b: f64,
    pub h: f64,
    pub hurst: f64,
    pub grid: Vec<f64>,
    pub n: usize,
    pub seed: u64,
    pub substeps: usize,
    pub method: Method,
    pub suite: Suite,
    pub tol: f64,
    pub sigmas: f64,
    pub lattice: usize,
    pub out: PathBuf,
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn spec(&self) -> FamilySpec {
        match self.family {
            Family::Wfbm => FamilySpec::Wfbm { a: self.a, b: self.b },
            Family::Sfbm => FamilySpec::Sfbm { h: self.h },
            Family::Nsfbm => FamilySpec::Nsfbm { h: self.h },
            Family::OddBfbm => FamilySpec::OddBfbm { h: self.h },
            Family::Eta => FamilySpec::Eta,
            Family::Fbm => FamilySpec::Fbm { hurst: self.hurst },
        }
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.grid.clone()).map_err(from_pd)
    }
}

#[derive(Debug, Parser)]
#[command(name = "longmem-gp", version, about = "Kernels, positive-definiteness, sampling and property checks for long-memory Gaussian processes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Sample an ensemble of paths (CSV + JSON metadata).
    Gen(Flags),
    /// Gram matrix on the grid with its PSD certificate.
    Gram(Flags),
    /// Run a verification suite; exit 0 iff every check passes.
    Verify(Flags),
    /// Violation witness for an invalid wfBm parameter pair.
    Witness(Flags),
    /// Validity verdict and minimum eigenvalue over an (a, b) lattice.
    Scan(Flags),
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    #[arg(long, value_enum)]
    pub family: Option<Family>,
    #[arg(short = 'a', allow_negative_numbers = true)]
    pub a: Option<f64>,
    #[arg(short = 'b', allow_negative_numbers = true)]
    pub b: Option<f64>,
    #[arg(long = "h")]
    pub h: Option<f64>,
    #[arg(long)]
    pub hurst: Option<f64>,
    /// Comma-separated time points; overrides --start/--stop/--count.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub start: Option<f64>,
    #[arg(long)]
    pub stop: Option<f64>,
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(short = 'n')]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub substeps: Option<usize>,
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    #[arg(long, value_enum)]
    pub suite: Option<Suite>,
    /// Relative PSD tolerance (times the trace).
    #[arg(long)]
    pub tol: Option<f64>,
    /// z-score bound for Monte Carlo screens.
    #[arg(long)]
    pub sigmas: Option<f64>,
    /// Lattice points per axis for `scan`.
    #[arg(long)]
    pub lattice: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn parse_grid(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| CliError::Config(format!("bad grid value `{s}`"))))
        .collect()
}

fn parse_value<T: std::str::FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.trim()
        .parse()
        .map_err(|_| CliError::Config(format!("bad value `{raw}` for `{key}`")))
}

fn parse_enum<T: ValueEnum>(key: &str, raw: &str) -> Result<T> {
    T::from_str(raw.trim(), true).map_err(|_| CliError::Config(format!("bad value `{raw}` for `{key}`")))
}

/// Reads a config file into `Flags`. JSON input may be the metadata of a
/// previous `gen` (its `config` object is used) or a flat object.
pub fn read_config_file(path: &Path) -> Result<Flags> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut pairs: Vec<(String, String)> = Vec::new();
    if text.trim_start().starts_with('{') {
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let obj = value.get("config").unwrap_or(&value);
        let map = obj
            .as_object()
            .ok_or_else(|| CliError::Config(format!("{}: expected an object", path.display())))?;
        for (k, v) in map {
            let raw = match v {
                serde_json::Value::String(s) => s.clone(),
                serde_json::Value::Array(xs) => xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","),
                other => other.to_string(),
            };
            pairs.push((k.clone(), raw));
        }
    } else {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("{}:{}: expected key = value", path.display(), lineno + 1)))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
    }
    let mut f = Flags::default();
    for (k, v) in pairs {
        match k.as_str() {
            "family" => f.family = Some(parse_enum(&k, &v)?),
            "a" => f.a = Some(parse_value(&k, &v)?),
            "b" => f.b = Some(parse_value(&k, &v)?),
            "h" => f.h = Some(parse_value(&k, &v)?),
            "hurst" => f.hurst = Some(parse_value(&k, &v)?),
            "grid" => f.grid = Some(v),
            "start" => f.start = Some(parse_value(&k, &v)?),
            "stop" => f.stop = Some(parse_value(&k, &v)?),
            "count" => f.count = Some(parse_value(&k, &v)?),
            "n" => f.n = Some(parse_value(&k, &v)?),
            "seed" => f.seed = Some(parse_value(&k, &v)?),
            "substeps" => f.substeps = Some(parse_value(&k, &v)?),
            "method" => f.method = Some(parse_enum(&k, &v)?),
            "suite" => f.suite = Some(parse_enum(&k, &v)?),
            "tol" => f.tol = Some(parse_value(&k, &v)?),
            "sigmas" => f.sigmas = Some(parse_value(&k, &v)?),
            "lattice" => f.lattice = Some(parse_value(&k, &v)?),
            "out" => f.out = Some(PathBuf::from(v)),
            // recorded for information only
            "command" | "schema_version" => {}
            other => return Err(CliError::Config(format!("{}: unknown key `{other}`", path.display()))),
        }
    }
    Ok(f)
}

fn overlay(flags: Flags, file: Flags) -> Flags {
    // a grid given on the command line in either form beats any grid in the file
    let cli_grid = flags.grid.is_some() || flags.start.is_some() || flags.stop.is_some() || flags.count.is_some();
    Flags {
        family: flags.family.or(file.family),
        a: flags.a.or(file.a),
        b: flags.b.or(file.b),
        h: flags.h.or(file.h),
        hurst: flags.hurst.or(file.hurst),
        grid: if cli_grid { flags.grid } else { file.grid },
        start: flags.start.or(if cli_grid { None } else { file.start }),
        stop: flags.stop.or(if cli_grid { None } else { file.stop }),
        count: flags.count.or(if cli_grid { None } else { file.count }),
        n: flags.n.or(file.n),
        seed: flags.seed.or(file.seed),
        substeps: flags.substeps.or(file.substeps),
        method: flags.method.or(file.method),
        suite: flags.suite.or(file.suite),
        tol: flags.tol.or(file.tol),
        sigmas: flags.sigmas.or(file.sigmas),
        lattice: flags.lattice.or(file.lattice),
        out: flags.out.or(file.out),
        config: None,
    }
}

pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Config(format!("{THREADS_ENV} must be a positive integer (got `{v}`)"))),
        },
        _ => Ok(None),
    }
}

/// Merges flags, config file and defaults, then validates.
pub fn resolve(command: Command, flags: Flags) -> Result<RunConfig> {
    let flags = match &flags.config {
        Some(path) => {
            let file = read_config_file(path)?;
            overlay(flags, file)
        }
        None => flags,
    };
    let grid = match &flags.grid {
        Some(text) => parse_grid(text)?,
        None => {
            let start = flags.start.unwrap_or(0.1);
            let stop = flags.stop.unwrap_or(1.0);
            let count = flags.count.unwrap_or(10);
            TimeGrid::linspace(start, stop, count).map_err(from_pd)?.points().to_vec()
        }
    };
    let cfg = RunConfig {
        command,
        family: flags.family.unwrap_or(Family::Wfbm),
        a: flags.a.unwrap_or(0.0),
        b: flags.b.unwrap_or(0.0),
        h: flags.h.unwrap_or(1.0),
        hurst: flags.hurst.unwrap_or(0.5),
        grid,
        n: flags.n.unwrap_or(1000),
        seed: flags.seed.unwrap_or(0),
        substeps: flags.substeps.unwrap_or(128),
        method: flags.method.unwrap_or(Method::Direct),
        suite: flags.suite.unwrap_or(Suite::Full),
        tol: flags.tol.unwrap_or(1e-8),
        sigmas: flags.sigmas.unwrap_or(3.0),
        lattice: flags.lattice.unwrap_or(41),
        out: flags.out.unwrap_or_else(|| PathBuf::from("longmem_out")),
        threads: threads_from_env()?,
    };
    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &RunConfig) -> Result<()> {
    cfg.time_grid()?;
    if !(cfg.tol > 0.0 && cfg.tol.is_finite()) || !(cfg.sigmas > 0.0) {
        return Err(CliError::Config("tolerances must be positive".into()));
    }
    let spec = cfg.spec();
    match cfg.command {
        Command::Gen | Command::Gram | Command::Verify => {
            spec.check().map_err(from_kernel)?;
            let verdict = pd_analysis::classify(&spec);
            if !verdict.is_valid() {
                return Err(CliError::Config(format!(
                    "{spec:?} is not a valid covariance ({:?})",
                    verdict.regime
                )));
            }
            if cfg.command == Command::Gen && cfg.n == 0 {
                return Err(CliError::Config("need -n >= 1".into()));
            }
        }
        Command::Witness => {
            if cfg.family != Family::Wfbm {
                return Err(CliError::Config("witness search is defined for wfbm only".into()));
            }
        }
        Command::Scan => {
            if cfg.lattice < 2 {
                return Err(CliError::Config("need --lattice >= 2".into()));
            }
        }
    }
    Ok(())
}

/// What a run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub exit_code: i32,
    pub files: Vec<PathBuf>,
    pub summary: String,
}

/// Runs one command inside a pool capped by `threads` (if set).
pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cfg.threads {
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Numerical(format!("cannot start worker pool: {e}")))?;
    pool.install(|| match cfg.command {
        Command::Gen => run_gen(cfg),
        Command::Gram => run_gram(cfg),
        Command::Verify => run_verify(cfg),
        Command::Witness => run_witness(cfg),
        Command::Scan => run_scan(cfg),
    })
}

/// Parses arguments, runs, prints a summary, returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (command, flags) = match cli.command {
        CliCommand::Gen(f) => (Command::Gen, f),
        CliCommand::Gram(f) => (Command::Gram, f),
        CliCommand::Verify(f) => (Command::Verify, f),
        CliCommand::Witness(f) => (Command::Witness, f),
        CliCommand::Scan(f) => (Command::Scan, f),
    };
    match resolve(command, flags).and_then(|cfg| run(&cfg)) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            outcome.exit_code
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents).map_err(io)?;
    tmp.flush().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Numerical(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// One row per path, header = grid times.
pub fn ensemble_csv(ens: &PathEnsemble) -> String {
    let mut out = String::new();
    let header: Vec<String> = ens.grid.points().iter().map(|&t| fmt_f64(t)).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..ens.n {
        let row: Vec<String> = ens.path(i).iter().map(|&x| fmt_f64(x)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn matrix_csv(grid: &TimeGrid, m: &nalgebra::DMatrix<f64>) -> String {
    let mut out = String::new();
    let header: Vec<String> = grid.points().iter().map(|&t| fmt_f64(t)).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| fmt_f64(m[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    command: Command,
    config: &'a RunConfig,
    #[serde(flatten)]
    body: T,
}

fn envelope<'a, T: Serialize>(cfg: &'a RunConfig, body: T) -> Envelope<'a, T> {
    Envelope {
        schema_version: SCHEMA_VERSION,
        command: cfg.command,
        config: cfg,
        body,
    }
}

#[derive(Serialize)]
struct GenMeta {
    spec: FamilySpec,
    method: sampling::SamplingMethod,
    n: usize,
    m: usize,
    seed: u64,
    substeps: Option<usize>,
    jitter: f64,
    csv: String,
}

pub fn generate(cfg: &RunConfig) -> Result<PathEnsemble> {
    let grid = cfg.time_grid()?;
    let spec = cfg.spec();
    let ens = match (cfg.method, spec) {
        (Method::Direct, _) => sampling::sample(&spec, &grid, cfg.n, cfg.seed),
        (Method::Even, FamilySpec::Sfbm { h }) => sampling::sample_sfbm_even(h, &grid, cfg.n, cfg.seed),
        (Method::Odd, FamilySpec::Nsfbm { h }) => {
            sampling::sample_nsfbm_odd_integrated(h, &grid, cfg.n, cfg.seed, cfg.substeps)
        }
        (Method::TimeChanged, FamilySpec::Wfbm { a, b }) if b == 1.0 => {
            sampling::sample_wfbm_b1(a, &grid, cfg.n, cfg.seed, cfg.substeps)
        }
        (m, s) => {
            return Err(CliError::Config(format!("method {m:?} does not apply to {s:?}")));
        }
    };
    ens.map_err(from_sampling)
}

fn run_gen(cfg: &RunConfig) -> Result<Outcome> {
    let ens = generate(cfg)?;
    let csv_path = cfg.out.join("ensemble.csv");
    let meta_path = cfg.out.join("ensemble.json");
    write_atomic(&csv_path, ensemble_csv(&ens).as_bytes())?;
    let meta = GenMeta {
        spec: ens.spec,
        method: ens.method,
        n: ens.n,
        m: ens.m(),
        seed: ens.seed,
        substeps: ens.substeps,
        jitter: ens.jitter,
        csv: "ensemble.csv".into(),
    };
    write_json(&meta_path, &envelope(cfg, meta))?;
    Ok(Outcome {
        exit_code: 0,
        files: vec![csv_path, meta_path],
        summary: format!("sampled {} paths on {} points ({:?})", ens.n, ens.m(), ens.method),
    })
}

#[derive(Serialize)]
struct GramMeta {
    spec: FamilySpec,
    verdict: pd_analysis::ValidityVerdict,
    certificate: PsdCertificate,
    csv: String,
}

fn run_gram(cfg: &RunConfig) -> Result<Outcome> {
    let grid = cfg.time_grid()?;
    let spec = cfg.spec();
    let gm = pd_analysis::gram(&spec, &grid).map_err(from_pd)?;
    let cert = pd_analysis::psd_certificate(&gm, cfg.tol).map_err(from_pd)?;
    let csv_path = cfg.out.join("gram.csv");
    let json_path = cfg.out.join("gram.json");
    write_atomic(&csv_path, matrix_csv(&grid, &gm.entries).as_bytes())?;
    let meta = GramMeta {
        spec,
        verdict: pd_analysis::classify(&spec),
        certificate: cert,
        csv: "gram.csv".into(),
    };
    write_json(&json_path, &envelope(cfg, meta))?;
    Ok(Outcome {
        exit_code: if cert.pass { 0 } else { 1 },
        files: vec![csv_path, json_path],
        summary: format!(
            "gram {}x{}: min eigenvalue {:e}, PSD {}",
            gm.dim(),
            gm.dim(),
            cert.min_eigenvalue,
            if cert.pass { "pass" } else { "FAIL" }
        ),
    })
}

fn run_witness(cfg: &RunConfig) -> Result<Outcome> {
    let (a, b) = (cfg.a, cfg.b);
    let verdict = pd_analysis::classify(&FamilySpec::Wfbm { a, b });
    if verdict.status != Status::Invalid {
        return Err(CliError::Config(format!("wfbm({a}, {b}) is valid; no witness exists")));
    }
    let w = pd_analysis::violation_witness(a, b).map_err(from_pd)?;
    let path = cfg.out.join("witness.json");
    #[derive(Serialize)]
    struct Body {
        verdict: pd_analysis::ValidityVerdict,
        witness: pd_analysis::Witness,
    }
    write_json(&path, &envelope(cfg, Body { verdict, witness: w }))?;
    Ok(Outcome {
        exit_code: if w.defect > 0.0 { 0 } else { 1 },
        files: vec![path],
        summary: format!("witness s={} t={} defect {:e} ({:?})", w.s, w.t, w.defect, verdict.regime),
    })
}

/// `a = −1 + 4i/L`, `b = −1 + 2.5j/L` for `i, j = 1..L`.
pub fn scan_lattice(size: usize) -> Vec<(f64, f64)> {
    let l = size as f64;
    let mut out = Vec::with_capacity(size * size);
    for i in 1..=size {
        for j in 1..=size {
            out.push((-1.0 + 4.0 * i as f64 / l, -1.0 + 2.5 * j as f64 / l));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub a: f64,
    pub b: f64,
    pub status: Status,
    pub regime: pd_analysis::Regime,
    pub min_eigenvalue: f64,
    pub psd_pass: bool,
}

impl ScanRow {
    pub fn agrees(&self) -> bool {
        (self.status == Status::Valid) == self.psd_pass
    }
}

/// Verdict and PSD certificate at each lattice point. Invalid points get
/// their witness cluster merged into the grid, as a finite grid on its own
/// need not expose the violation.
pub fn scan(grid: &TimeGrid, size: usize, tol: f64) -> Result<Vec<ScanRow>> {
    scan_lattice(size)
        .into_par_iter()
        .map(|(a, b)| {
            let spec = FamilySpec::Wfbm { a, b };
            let verdict = pd_analysis::classify(&spec);
            let g = if verdict.status == Status::Invalid && verdict.regime != pd_analysis::Regime::NonIntegrable {
                let extra = pd_analysis::witness_grid(a, b).map_err(from_pd)?;
                grid.merged(&extra).map_err(from_pd)?
            } else {
                grid.clone()
            };
            let (min_eigenvalue, psd_pass) = if verdict.regime == pd_analysis::Regime::NonIntegrable {
                (f64::NAN, false)
            } else {
                let gm = pd_analysis::gram_unchecked(&spec, &g).map_err(from_pd)?;
                let cert = pd_analysis::psd_certificate(&gm, tol).map_err(from_pd)?;
                (cert.min_eigenvalue, cert.pass)
            };
            Ok(ScanRow {
                a,
                b,
                status: verdict.status,
                regime: verdict.regime,
                min_eigenvalue,
                psd_pass,
            })
        })
        .collect()
}

fn run_scan(cfg: &RunConfig) -> Result<Outcome> {
    let grid = cfg.time_grid()?;
    let rows = scan(&grid, cfg.lattice, cfg.tol)?;
    let mut csv = String::from("a,b,verdict,regime,min_eigenvalue,psd_pass\n");
    for r in &rows {
        let regime = serde_json::to_value(r.regime).map_err(|e| CliError::Numerical(e.to_string()))?;
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            fmt_f64(r.a),
            fmt_f64(r.b),
            if r.status == Status::Valid { "VALID" } else { "INVALID" },
            regime.as_str().unwrap_or(""),
            fmt_f64(r.min_eigenvalue),
            r.psd_pass
        );
    }
    let path = cfg.out.join("scan.csv");
    write_atomic(&path, csv.as_bytes())?;
    let disagreements = rows.iter().filter(|r| !r.agrees()).count();
    Ok(Outcome {
        exit_code: if disagreements == 0 { 0 } else { 1 },
        files: vec![path],
        summary: format!("{} lattice points, {} disagreements", rows.len(), disagreements),
    })
}

type Check<'a> = Box<dyn Fn() -> std::result::Result<VerificationReport, CheckError> + Send + Sync + 'a>;

fn kernel_checks<'a>(cfg: &'a RunConfig, spec: FamilySpec, grid: &'a TimeGrid) -> Vec<Check<'a>> {
    let mut checks: Vec<Check> = Vec::new();
    let pts = grid.points();
    let oracle: Option<(&'static str, fn(&FamilySpec, f64, f64) -> kernels::Result<f64>, f64)> = match spec {
        FamilySpec::Wfbm { .. } => Some(("oracle_single_integral", |s, x, y| match *s {
            FamilySpec::Wfbm { a, b } => kernels::wfbm_cov_quad(a, b, x, y),
            _ => unreachable!(),
        }, 1e-8)),
        FamilySpec::Nsfbm { h } if h > 2.0 && h < 4.0 => Some(("oracle_triple_integral", |s, x, y| match *s {
            FamilySpec::Nsfbm { h } => kernels::nsfbm_cov_triple(h, x, y),
            _ => unreachable!(),
        }, 1e-4)),
        FamilySpec::Eta => Some(("oracle_triple_integral", |_, x, y| kernels::eta_cov_triple(x, y), 1e-6)),
        _ => None,
    };
    if let Some((name, f, tol)) = oracle {
        checks.push(Box::new(move || {
            let mut worst = 0.0f64;
            for (i, &s) in pts.iter().enumerate() {
                for &t in &pts[i..] {
                    let closed = kernels::cov(&spec, s, t)?;
                    let other = f(&spec, s, t)?;
                    let scale = closed.abs().max(1e-300);
                    worst = worst.max((closed - other).abs() / scale);
                }
            }
            Ok(VerificationReport::new(
                "kernel_oracle",
                spec,
                BTreeMap::from([("grid_points".to_string(), pts.len() as f64)]),
                vec![Condition::at_most(name, worst, tol)],
                None,
            ))
        }));
    }
    checks.push(Box::new(move || {
        let mut worst = 0.0f64;
        for &s in pts {
            worst = worst.max(kernels::cov(&spec, 0.0, s)?.abs());
            for &t in pts {
                worst = worst.max((kernels::cov(&spec, s, t)? - kernels::cov(&spec, t, s)?).abs());
            }
        }
        Ok(VerificationReport::new(
            "kernel_symmetry",
            spec,
            BTreeMap::new(),
            vec![Condition::at_most("max_asymmetry_or_origin_value", worst, 0.0)],
            None,
        ))
    }));
    checks.push(Box::new(move || properties::check_self_similarity(&spec, grid, &[0.5, 2.0, 10.0])));
    if let FamilySpec::Wfbm { a, b } = spec {
        let seed = cfg.seed;
        checks.push(Box::new(move || properties::check_increment_sign_law(a, b, 1000, seed)));
    }
    checks
}

fn pd_checks<'a>(cfg: &'a RunConfig, spec: FamilySpec, grid: &'a TimeGrid) -> Vec<Check<'a>> {
    vec![Box::new(move || {
        let gm = pd_analysis::gram(&spec, grid)?;
        let cert = pd_analysis::psd_certificate(&gm, cfg.tol)?;
        let p = BTreeMap::from([
            ("min_eigenvalue".to_string(), cert.min_eigenvalue),
            ("equilibrated_min_eigenvalue".to_string(), cert.equilibrated_min_eigenvalue),
            ("trace".to_string(), cert.trace),
        ]);
        Ok(VerificationReport::new(
            "psd_certificate",
            spec,
            p,
            vec![
                Condition::at_least("min_eigenvalue_over_trace", cert.min_eigenvalue / cert.trace.abs().max(f64::MIN_POSITIVE), -cfg.tol),
                Condition::at_least("verdict_agrees", if cert.pass { 1.0 } else { 0.0 }, 1.0),
            ],
            None,
        ))
    })]
}

fn sampling_checks<'a>(cfg: &'a RunConfig, spec: FamilySpec, grid: &'a TimeGrid) -> Vec<Check<'a>> {
    let mut checks: Vec<Check> = Vec::new();
    let (n, seed, sigmas) = (cfg.n, cfg.seed, cfg.sigmas);
    checks.push(Box::new(move || {
        let ens = sampling::sample(&spec, grid, n, seed)?;
        properties::check_empirical_cov(&ens, sigmas)
    }));
    match spec {
        FamilySpec::Sfbm { h } if h < 2.0 => checks.push(Box::new(move || {
            let x = sampling::sample(&spec, grid, n, seed)?;
            let y = sampling::sample_sfbm_even(h, grid, n, seed ^ 0x5eed)?;
            let mut r = properties::check_ensemble_agreement(&x, &y, sigmas, 0.0)?;
            r.check_name = "even_part_agreement".into();
            Ok(r)
        })),
        FamilySpec::Nsfbm { h } if h > 2.0 && h < 4.0 => {
            let substeps = cfg.substeps;
            checks.push(Box::new(move || {
                let x = sampling::sample(&spec, grid, n, seed)?;
                let y = sampling::sample_nsfbm_odd_integrated(h, grid, n, seed ^ 0x5eed, substeps)?;
                let mut r = properties::check_ensemble_agreement(&x, &y, sigmas, 2e-2)?;
                r.check_name = "odd_part_agreement".into();
                Ok(r)
            }))
        }
        FamilySpec::Wfbm { a, b } if b == 1.0 => {
            let substeps = cfg.substeps;
            checks.push(Box::new(move || {
                let x = sampling::sample(&spec, grid, n, seed)?;
                let y = sampling::sample_wfbm_b1(a, grid, n, seed ^ 0x5eed, substeps)?;
                let mut r = properties::check_ensemble_agreement(&x, &y, sigmas, 2e-2)?;
                r.check_name = "time_changed_agreement".into();
                Ok(r)
            }))
        }
        _ => {}
    }
    checks
}

fn property_checks<'a>(_cfg: &'a RunConfig, spec: FamilySpec) -> Vec<Check<'a>> {
    let mut checks: Vec<Check> = Vec::new();
    let lrd = matches!(spec, FamilySpec::Wfbm { .. } | FamilySpec::Sfbm { .. } | FamilySpec::Nsfbm { .. } | FamilySpec::Eta);
    if lrd {
        checks.push(Box::new(move || properties::check_lrd_limit(&spec, &LrdQuadruple::standard())));
    }
    checks.push(Box::new(move || {
        properties::check_quadratic_variation(&spec, &properties::dyadic_partitions(), None)
    }));
    checks.push(Box::new(move || properties::check_markov_defect(&spec, 1.0, 2.0, 3.0)));
    let region = match spec {
        FamilySpec::Wfbm { a, .. } if a < 0.0 => Some(IncrRegion { lo: 0.1, hi: 2.0, count: 9 }),
        FamilySpec::Wfbm { .. } | FamilySpec::Fbm { .. } => Some(IncrRegion { lo: 0.0, hi: 2.0, count: 9 }),
        FamilySpec::Sfbm { h } if h < 2.0 => Some(IncrRegion { lo: 0.0, hi: 2.0, count: 9 }),
        FamilySpec::Nsfbm { h } if h > 2.0 && h < 4.0 => Some(IncrRegion { lo: 0.1, hi: 2.0, count: 9 }),
        _ => None,
    };
    if let Some(region) = region {
        checks.push(Box::new(move || properties::check_incr_var_bounds(&spec, &region)));
    }
    match spec {
        FamilySpec::Wfbm { a, b } => {
            let big = [1e2, 1e3, 1e4, 1e5];
            checks.push(Box::new(move || properties::check_asymptotic_homogeneity(a, b, 1.0, 2.0, &big)));
            checks.push(Box::new(move || {
                properties::check_short_long_asymptotics(a, b, 1.0, &[1e-2, 1e-3, 1e-4, 1e-5], &big)
            }));
        }
        FamilySpec::Eta => {
            checks.push(Box::new(|| properties::check_variation_growth(&properties::dyadic_partitions(), None)));
        }
        _ => {}
    }
    checks
}

/// Runs the selected suite concurrently; reports come back sorted by check
/// name (ties keep suite order).
pub fn verify(cfg: &RunConfig) -> Result<Vec<VerificationReport>> {
    let grid = cfg.time_grid()?;
    let spec = cfg.spec();
    let mut checks: Vec<Check> = Vec::new();
    let all = cfg.suite == Suite::Full;
    if all || cfg.suite == Suite::Kernels {
        checks.extend(kernel_checks(cfg, spec, &grid));
    }
    if all || cfg.suite == Suite::Pd {
        checks.extend(pd_checks(cfg, spec, &grid));
    }
    if all || cfg.suite == Suite::Sampling {
        checks.extend(sampling_checks(cfg, spec, &grid));
    }
    if all || cfg.suite == Suite::Properties {
        checks.extend(property_checks(cfg, spec));
    }
    let mut reports: Vec<VerificationReport> = checks
        .par_iter()
        .map(|c| c().map_err(from_check))
        .collect::<Result<_>>()?;
    reports.sort_by(|x, y| x.check_name.cmp(&y.check_name));
    Ok(reports)
}

fn run_verify(cfg: &RunConfig) -> Result<Outcome> {
    let reports = verify(cfg)?;
    let path = cfg.out.join("report.json");
    #[derive(Serialize)]
    struct Body<'a> {
        all_pass: bool,
        reports: &'a [VerificationReport],
    }
    let all_pass = reports.iter().all(|r| r.pass);
    write_json(&path, &envelope(cfg, Body { all_pass, reports: &reports }))?;
    let mut summary = String::new();
    for r in &reports {
        let _ = writeln!(summary, "{:<28} {}", r.check_name, if r.pass { "pass" } else { "FAIL" });
    }
    let failed = reports.iter().filter(|r| !r.pass).count();
    let _ = write!(summary, "{} checks, {} failed", reports.len(), failed);
    Ok(Outcome {
        exit_code: if all_pass { 0 } else { 1 },
        files: vec![path],
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("1, 2,3.5").unwrap(), vec![1.0, 2.0, 3.5]);
        assert!(parse_grid("1,x").is_err());
    }

    #[test]
    fn csv_number_format_is_round_trip() {
        let x = 0.1f64 + 0.2;
        let s = fmt_f64(x);
        assert_eq!(s.parse::<f64>().unwrap(), x);
        assert!(!s.contains(' '));
    }

    #[test]
    fn defaults_are_explicit() {
        let cfg = resolve(Command::Gen, Flags::default()).unwrap();
        let v = serde_json::to_value(&cfg).unwrap();
        for key in ["family", "a", "b", "h", "hurst", "grid", "n", "seed", "substeps", "method", "tol", "out"] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn invalid_spec_is_a_config_error() {
        let flags = Flags {
            a: Some(-0.5),
            b: Some(0.8),
            ..Flags::default()
        };
        assert_eq!(resolve(Command::Gen, flags).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn lattice_shape() {
        let l = scan_lattice(41);
        assert_eq!(l.len(), 41 * 41);
        assert_eq!(l[0], (-1.0 + 4.0 / 41.0, -1.0 + 2.5 / 41.0));
        assert_eq!(*l.last().unwrap(), (3.0, 1.5));
    }
}
