//! Command-line front end for the `privsit` solvers.
//!
//! `run` takes the full argument vector and returns the process exit code:
//! 0 on success, 1 on invalid or infeasible input, 2 when `verify` finds a
//! mismatch. Curves go to `--output`, else to `$PRIVSIT_OUT_DIR/<command>.<ext>`,
//! else to stdout. Single results go to `--output` or stdout.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use privsit::curves::{self, CurvePoints};
use privsit::model::{gaussian_conditional_entropy, nats_to_bits};
use privsit::montecarlo::{self, SimConfig, SimResult};
use privsit::oracle::{self, OracleConfig};
use privsit::{ChannelSpec, EquilibriumSolution, Scenario, Setting, SourceModel};

/// Default output directory for curve files.
pub const OUT_DIR_ENV: &str = "PRIVSIT_OUT_DIR";

pub const PRIVACY_HEADER: &str = "d_p,d_c,alpha,kappa";
pub const RATE_HEADER: &str = "sigma_n2,rate,d_c,d_p,alpha";
pub const SCAN_HEADER: &str = "lambda,alpha,noise_var,d_p,d_c,frontier_d_c,frontier_gap";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config file {path}: {msg}")]
    Config { path: PathBuf, msg: String },
    #[error("inconsistent flags: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Library(#[from] privsit::Error),
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("serialization failed: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Parser)]
#[command(name = "privsit", version, about = "Privacy-constrained Gaussian equilibria")]
#[command(args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Closed-form equilibrium for one privacy target.
    Solve(PointArgs),
    /// Privacy/distortion curve for the simple or channel setting.
    Tradeoff(TradeoffArgs),
    /// Rate/distortion curve at a fixed privacy target.
    Rate(RateArgs),
    /// Check the closed form against the brute-force oracle.
    Verify(VerifyArgs),
    /// Monte Carlo estimate at the closed-form equilibrium.
    Simulate(SimulateArgs),
    /// Lagrangian scan of the noiseless frontier.
    Scan(ScanArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SettingArg {
    Simple,
    Compression,
    Channel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    Nats,
    Bits,
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long)]
    sigma_x2: f64,
    #[arg(long)]
    rho: f64,
    #[arg(long)]
    r: f64,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long, value_enum)]
    log_units: Option<Units>,
    /// Shorthand for `--log-units bits`.
    #[arg(long)]
    bits: bool,
    /// Flat key=value file; flags on the command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SettingFlags {
    #[arg(long, value_enum, default_value = "simple")]
    setting: SettingArg,
    /// Test-channel noise variance; a comma-separated list for `rate`.
    #[arg(long, value_delimiter = ',')]
    sigma_n2: Vec<f64>,
    #[arg(long)]
    pt: Option<f64>,
    #[arg(long)]
    sigma_z2: Option<f64>,
}

#[derive(Debug, Args)]
struct PointArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    setting: SettingFlags,
    #[arg(long)]
    dp: f64,
}

#[derive(Debug, Args)]
struct TradeoffArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    setting: SettingFlags,
    #[arg(long, default_value_t = 64)]
    grid: usize,
}

#[derive(Debug, Args)]
struct RateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    dp: f64,
    #[arg(long, value_delimiter = ',', required = true)]
    sigma_n2: Vec<f64>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[command(flatten)]
    point: PointArgs,
    /// Oracle grid points per axis.
    #[arg(long, default_value_t = 401)]
    grid: usize,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    point: PointArgs,
    #[arg(long, default_value_t = 1_000_000)]
    samples: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Debug, Args)]
struct ScanArgs {
    #[command(flatten)]
    common: Common,
    /// Number of multipliers spread over [0, 1/ρ²].
    #[arg(long, default_value_t = 9)]
    grid: usize,
}

/// `solve` output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOutput {
    pub setting: Setting,
    pub alpha: f64,
    pub beta: f64,
    pub noise_var: f64,
    pub kappa: f64,
    pub d_c: f64,
    pub d_p: f64,
    pub d_p_target: f64,
    pub constraint_active: bool,
    /// `H(θ|Y)`; absent when `θ` is recovered exactly.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub privacy_entropy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    pub units: Units,
}

/// `simulate` output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateOutput {
    pub equilibrium: EquilibriumSolution,
    pub simulation: SimResult,
    pub units: Units,
}

impl Common {
    fn model(&self) -> Result<SourceModel, CliError> {
        Ok(SourceModel::new(self.sigma_x2, self.rho, self.r)?)
    }

    fn units(&self) -> Units {
        if self.bits {
            Units::Bits
        } else {
            self.log_units.unwrap_or(Units::Nats)
        }
    }

    fn json_only(&self, cmd: &str) -> Result<(), CliError> {
        match self.format {
            Some(Format::Csv) => Err(CliError::Inconsistent(format!("{cmd} emits JSON only"))),
            _ => Ok(()),
        }
    }
}

impl Units {
    fn convert(self, nats: f64) -> f64 {
        match self {
            Units::Nats => nats,
            Units::Bits => nats_to_bits(nats),
        }
    }
}

impl SettingFlags {
    fn scenario(&self) -> Result<Scenario, CliError> {
        let channel_flags = self.pt.is_some() || self.sigma_z2.is_some();
        if self.setting != SettingArg::Channel && channel_flags {
            return Err(CliError::Inconsistent("--pt/--sigma-z2 need --setting channel".into()));
        }
        if self.setting != SettingArg::Compression && !self.sigma_n2.is_empty() {
            return Err(CliError::Inconsistent("--sigma-n2 needs --setting compression".into()));
        }
        match self.setting {
            SettingArg::Simple => Ok(Scenario::Simple),
            SettingArg::Compression => match self.sigma_n2.as_slice() {
                [n] => Ok(Scenario::Compression { sigma_n2: *n }),
                [] => Err(CliError::Inconsistent("compression needs --sigma-n2".into())),
                _ => Err(CliError::Inconsistent("expected a single --sigma-n2 value".into())),
            },
            SettingArg::Channel => match (self.pt, self.sigma_z2) {
                (Some(p), Some(z)) => Ok(Scenario::Channel(ChannelSpec::new(p, z)?)),
                _ => Err(CliError::Inconsistent("channel needs --pt and --sigma-z2".into())),
            },
        }
    }
}

/// Reads a flat `key=value` file. Blank lines and `#` comments are skipped.
fn read_config(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let err = |msg: String| CliError::Config {
        path: path.to_path_buf(),
        msg,
    };
    let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| err(format!("line {}: expected key=value", i + 1)))?;
        let key = k.trim().replace('_', "-");
        if key.is_empty() || key == "config" {
            return Err(err(format!("line {}: invalid key '{}'", i + 1, k.trim())));
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

fn config_path(args: &[String]) -> Option<PathBuf> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

/// Splices config-file entries in front of the command-line flags so that
/// later (command-line) occurrences win.
fn expand_config(argv: Vec<String>) -> Result<Vec<String>, CliError> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let entries = read_config(&path)?;
    let sub = argv
        .iter()
        .skip(1)
        .position(|a| !a.starts_with('-'))
        .map(|p| p + 2)
        .unwrap_or(argv.len());
    let mut tokens = Vec::new();
    for (k, v) in entries {
        match v.as_str() {
            "true" => tokens.push(format!("--{k}")),
            "false" => {}
            _ => {
                tokens.push(format!("--{k}"));
                tokens.push(v);
            }
        }
    }
    let mut out = argv[..sub].to_vec();
    out.extend(tokens);
    out.extend_from_slice(&argv[sub..]);
    Ok(out)
}

enum Sink {
    File(PathBuf),
    Stdout,
}

fn curve_sink(explicit: &Option<PathBuf>, command: &str, ext: &str) -> Result<Sink, CliError> {
    if let Some(p) = explicit {
        return Ok(Sink::File(p.clone()));
    }
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if !dir.is_empty() => {
            let dir = PathBuf::from(dir);
            fs::create_dir_all(&dir).map_err(|source| CliError::Output {
                path: dir.clone(),
                source,
            })?;
            Ok(Sink::File(dir.join(format!("{command}.{ext}"))))
        }
        _ => Ok(Sink::Stdout),
    }
}

fn emit(sink: Sink, body: &str, stdout: &mut dyn Write) -> Result<(), CliError> {
    match sink {
        Sink::File(path) => fs::write(&path, body).map_err(|source| CliError::Output { path, source }),
        Sink::Stdout => stdout.write_all(body.as_bytes()).map_err(|source| CliError::Output {
            path: PathBuf::from("<stdout>"),
            source,
        }),
    }
}

fn json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Shortest round-trip decimal; exponent form outside `[1e-5, 1e16)`.
pub fn format_number(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-5..1e16).contains(&a) {
        format!("{}", v + 0.0)
    } else {
        format!("{v:e}")
    }
}

fn csv(header: &str, rows: impl Iterator<Item = Vec<f64>>) -> String {
    let mut s = format!("{header}\n");
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&v| format_number(v)).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

fn solve_output(sol: &EquilibriumSolution, units: Units) -> SolveOutput {
    SolveOutput {
        setting: sol.setting,
        alpha: sol.policy.alpha,
        beta: sol.policy.beta,
        noise_var: sol.policy.noise_var,
        kappa: sol.kappa,
        d_c: sol.d_c,
        d_p: sol.d_p,
        d_p_target: sol.d_p_target,
        constraint_active: sol.constraint_active,
        privacy_entropy: gaussian_conditional_entropy(sol.d_p).ok().map(|h| units.convert(h)),
        rate: sol.rate.map(|r| units.convert(r)),
        units,
    }
}

fn cmd_solve(a: &PointArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    a.common.json_only("solve")?;
    let model = a.common.model()?;
    let scenario = a.setting.scenario()?;
    let sol = privsit::solve(&model, &scenario, a.dp)?;
    let out = solve_output(&sol, a.common.units());
    let sink = a.common.output.clone().map_or(Sink::Stdout, Sink::File);
    emit(sink, &json(&out)?, stdout)?;
    Ok(0)
}

fn cmd_tradeoff(a: &TradeoffArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let model = a.common.model()?;
    let scenario = a.setting.scenario()?;
    if matches!(scenario, Scenario::Compression { .. }) {
        return Err(CliError::Inconsistent("use `rate` for the compression setting".into()));
    }
    let curve = curves::sweep_privacy_distortion(&model, &scenario, a.grid)?;
    let CurvePoints::Privacy(points) = &curve.points else {
        unreachable!("privacy sweep yields privacy points")
    };
    let format = a.common.format.unwrap_or(Format::Csv);
    let body = match format {
        Format::Csv => csv(
            PRIVACY_HEADER,
            points.iter().map(|p| vec![p.d_p, p.d_c, p.alpha, p.kappa]),
        ),
        Format::Json => json(points)?,
    };
    let sink = curve_sink(&a.common.output, "tradeoff", ext(format))?;
    emit(sink, &body, stdout)?;
    Ok(0)
}

fn ext(f: Format) -> &'static str {
    match f {
        Format::Csv => "csv",
        Format::Json => "json",
    }
}

fn cmd_rate(a: &RateArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let model = a.common.model()?;
    let units = a.common.units();
    let curve = curves::sweep_rate_distortion(&model, a.dp, &a.sigma_n2)?;
    let CurvePoints::Rate(points) = &curve.points else {
        unreachable!("rate sweep yields rate points")
    };
    let format = a.common.format.unwrap_or(Format::Csv);
    let body = match format {
        Format::Csv => csv(
            RATE_HEADER,
            points
                .iter()
                .map(|p| vec![p.sigma_n2, units.convert(p.rate), p.d_c, p.d_p, p.alpha]),
        ),
        Format::Json => {
            let converted: Vec<_> = points
                .iter()
                .map(|p| curves::RatePoint {
                    rate: units.convert(p.rate),
                    ..*p
                })
                .collect();
            json(&converted)?
        }
    };
    let sink = curve_sink(&a.common.output, "rate", ext(format))?;
    emit(sink, &body, stdout)?;
    Ok(0)
}

fn cmd_verify(a: &VerifyArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let p = &a.point;
    p.common.json_only("verify")?;
    let model = p.common.model()?;
    let scenario = p.setting.scenario()?;
    let config = OracleConfig::for_model(&model).with_grid(a.grid);
    let report = oracle::verify_equilibrium(&model, &scenario, p.dp, &config)?;
    let sink = p.common.output.clone().map_or(Sink::Stdout, Sink::File);
    emit(sink, &json(&report)?, stdout)?;
    Ok(if report.passed { 0 } else { 2 })
}

fn cmd_simulate(a: &SimulateArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let p = &a.point;
    p.common.json_only("simulate")?;
    let model = p.common.model()?;
    let scenario = p.setting.scenario()?;
    let units = p.common.units();
    let sol = privsit::solve(&model, &scenario, p.dp)?;
    let config = SimConfig::new(a.samples, a.seed, scenario.setting());
    let mut sim = montecarlo::simulate_policy(&model, &sol.policy, scenario.channel(), sol.kappa, &config)?;
    sim.entropy_hat = units.convert(sim.entropy_hat);
    let mut equilibrium = sol;
    equilibrium.rate = sol.rate.map(|r| units.convert(r));
    let out = SimulateOutput {
        equilibrium,
        simulation: sim,
        units,
    };
    let sink = p.common.output.clone().map_or(Sink::Stdout, Sink::File);
    emit(sink, &json(&out)?, stdout)?;
    Ok(0)
}

fn cmd_scan(a: &ScanArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let model = a.common.model()?;
    if a.grid < 2 {
        return Err(CliError::Inconsistent("--grid must be >= 2".into()));
    }
    let top = if model.rho() > 0.0 { 1.0 / (model.rho() * model.rho()) } else { 0.0 };
    let lambdas: Vec<f64> = (0..a.grid)
        .map(|i| top * i as f64 / (a.grid - 1) as f64)
        .collect();
    let config = OracleConfig::for_model(&model).with_grid(201);
    let scan = oracle::lagrangian_scan(&model, &lambdas, &config)?;
    let format = a.common.format.unwrap_or(Format::Csv);
    let body = match format {
        Format::Csv => csv(
            SCAN_HEADER,
            scan.points.iter().map(|p| {
                vec![p.lambda, p.alpha, p.noise_var, p.d_p, p.d_c, p.frontier_d_c, p.frontier_gap]
            }),
        ),
        Format::Json => json(&scan)?,
    };
    let sink = curve_sink(&a.common.output, "scan", ext(format))?;
    emit(sink, &body, stdout)?;
    Ok(0)
}

fn dispatch(argv: Vec<String>, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let argv = expand_config(argv)?;
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return Ok(0);
            }
            return Err(CliError::Usage(e.to_string()));
        }
    };
    match &cli.command {
        Command::Solve(a) => cmd_solve(a, stdout),
        Command::Tradeoff(a) => cmd_tradeoff(a, stdout),
        Command::Rate(a) => cmd_rate(a, stdout),
        Command::Verify(a) => cmd_verify(a, stdout),
        Command::Simulate(a) => cmd_simulate(a, stdout),
        Command::Scan(a) => cmd_scan(a, stdout),
    }
}

/// Runs the CLI on `argv` (including the program name) and returns the exit
/// code. Errors are reported on `stderr`.
pub fn run<I, S>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let argv: Vec<String> = argv.into_iter().map(Into::into).collect();
    match dispatch(argv, stdout) {
        Ok(code) => code,
        Err(e) => {
            let msg = e.to_string();
            let _ = writeln!(stderr, "error: {}", msg.trim_end().trim_start_matches("error: "));
            1
        }
    }
}
