//! Command-line front end for the Maxwell–Bloch solvers: JSON scenario
//! configs in, CSV tables and a meta.json out.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use mbrh::broadening::{gamma_trace, BroadeningProfile, CurveConfig, Sign};
use mbrh::direct::{integrate_direct, DirectConfig};
use mbrh::jump::{jump_wholeline, posdef_check, JumpData, ProblemClass};
use mbrh::rhsolver::{one_soliton_pole, soliton_closed_form, MixedConfig, MixedProblem};
use mbrh::scenario::{Rho0, ScenarioData, Signal};
use mbrh::spectral::{spectral_table, SpectralConfig};
use mbrh::MbError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("schema error at `{path}`: {msg}")]
    Schema { path: String, msg: String },
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("numerical failure: {0}")]
    Numerical(#[from] MbError),
}

impl CliError {
    /// 2 for anything wrong with the input, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(MbError::InvalidInput(_)) => 2,
            CliError::Numerical(_) => 3,
            _ => 2,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

// ---------------------------------------------------------------- config

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignSpec {
    #[default]
    Attenuator,
    Amplifier,
}

impl From<SignSpec> for Sign {
    fn from(s: SignSpec) -> Self {
        match s {
            SignSpec::Attenuator => Sign::Attenuator,
            SignSpec::Amplifier => Sign::Amplifier,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProfileSpec {
    Lorentzian {
        l: f64,
        #[serde(default)]
        sign: SignSpec,
    },
    Rectangular {
        eps: f64,
        #[serde(default)]
        sign: SignSpec,
    },
    Delta {
        #[serde(default)]
        eps: f64,
        #[serde(default)]
        sign: SignSpec,
    },
    Tabulated {
        grid: Vec<f64>,
        values: Vec<f64>,
        #[serde(default)]
        sign: SignSpec,
    },
}

impl Default for ProfileSpec {
    fn default() -> Self {
        ProfileSpec::Lorentzian { l: 1.0, sign: SignSpec::Attenuator }
    }
}

impl ProfileSpec {
    pub fn build(&self) -> CliResult<BroadeningProfile> {
        let positive = |name: &str, v: f64, allow_zero: bool| {
            if v.is_finite() && (v > 0.0 || (allow_zero && v == 0.0)) {
                Ok(())
            } else {
                Err(CliError::Invariant(format!("profile.{name} must be positive, got {v}")))
            }
        };
        Ok(match self {
            ProfileSpec::Lorentzian { l, sign } => {
                positive("l", *l, false)?;
                BroadeningProfile::lorentzian(*l, (*sign).into())
            }
            ProfileSpec::Rectangular { eps, sign } => {
                positive("eps", *eps, false)?;
                BroadeningProfile::rectangular(*eps, (*sign).into())
            }
            ProfileSpec::Delta { eps, sign } => {
                positive("eps", *eps, true)?;
                BroadeningProfile::delta_approx(*eps, (*sign).into())
            }
            ProfileSpec::Tabulated { grid, values, sign } => {
                if grid.len() < 2 || grid.len() != values.len() {
                    return Err(CliError::Invariant("profile.grid and profile.values need equal length >= 2".into()));
                }
                if grid.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(CliError::Invariant("profile.grid must be strictly increasing".into()));
                }
                if let Some(k) = values.iter().position(|v| !(*v >= 0.0)) {
                    return Err(CliError::Invariant(format!("profile.values[{k}] must be non-negative")));
                }
                BroadeningProfile::tabulated(grid.clone(), values.clone(), (*sign).into())
            }
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "pulse", rename_all = "lowercase", deny_unknown_fields)]
pub enum PulseSpec {
    #[default]
    Zero,
    Sech {
        amplitude: f64,
        center: Option<f64>,
        width: Option<f64>,
    },
    Gaussian {
        amplitude: f64,
        center: Option<f64>,
        width: Option<f64>,
    },
    /// Samples at s0 + k·ds as [re, im] pairs.
    Samples { s0: f64, ds: f64, values: Vec<[f64; 2]> },
}

impl PulseSpec {
    /// `mid` is the default center (the middle of the interval).
    fn to_signal(&self, mid: f64, name: &str) -> CliResult<Signal> {
        let width_of = |w: Option<f64>| {
            let w = w.unwrap_or(1.0);
            if w > 0.0 && w.is_finite() {
                Ok(w)
            } else {
                Err(CliError::Invariant(format!("{name}.width must be positive, got {w}")))
            }
        };
        Ok(match self {
            PulseSpec::Zero => Signal::Zero,
            PulseSpec::Sech { amplitude, center, width } => {
                Signal::Sech { amplitude: *amplitude, center: center.unwrap_or(mid), width: width_of(*width)? }
            }
            PulseSpec::Gaussian { amplitude, center, width } => {
                Signal::Gaussian { amplitude: *amplitude, center: center.unwrap_or(mid), width: width_of(*width)? }
            }
            PulseSpec::Samples { s0, ds, values } => {
                if !(*ds > 0.0) || values.is_empty() {
                    return Err(CliError::Invariant(format!("{name} samples need ds > 0 and at least one value")));
                }
                Signal::Samples { s0: *s0, ds: *ds, values: values.iter().map(|v| C64::new(v[0], v[1])).collect() }
            }
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Rho0Spec {
    #[default]
    Zero,
    Gaussian {
        amplitude: [f64; 2],
        center: f64,
        width: f64,
        spread: f64,
    },
    /// values[i][j] = ρ₀(x_i, λ_j) as [re, im].
    Table {
        x: Vec<f64>,
        lambda: Vec<f64>,
        values: Vec<Vec<[f64; 2]>>,
    },
}

impl Rho0Spec {
    fn build(&self) -> CliResult<Rho0> {
        Ok(match self {
            Rho0Spec::Zero => Rho0::Zero,
            Rho0Spec::Gaussian { amplitude, center, width, spread } => {
                let a = C64::new(amplitude[0], amplitude[1]);
                if a.norm() > 1.0 {
                    return Err(CliError::Invariant(format!(
                        "rho0.amplitude has modulus {} > 1; N0 = sqrt(1 - |rho0|^2) needs |rho0| <= 1",
                        a.norm()
                    )));
                }
                if !(*width > 0.0 && *spread > 0.0) {
                    return Err(CliError::Invariant("rho0.width and rho0.spread must be positive".into()));
                }
                Rho0::Gaussian { amplitude: a, center: *center, width: *width, spread: *spread }
            }
            Rho0Spec::Table { x, lambda, values } => {
                if values.len() != x.len() || values.iter().any(|row| row.len() != lambda.len()) {
                    return Err(CliError::Invariant("rho0.values must be |x| rows of |lambda| entries".into()));
                }
                for (i, row) in values.iter().enumerate() {
                    for (j, v) in row.iter().enumerate() {
                        let m = v[0].hypot(v[1]);
                        if m > 1.0 {
                            return Err(CliError::Invariant(format!(
                                "|rho0| = {m} > 1 in cell (x, lambda) = ({}, {}) [values[{i}][{j}]]; N0 = sqrt(1 - |rho0|^2) needs |rho0| <= 1",
                                x[i], lambda[j]
                            )));
                        }
                    }
                }
                Rho0::Table {
                    x: x.clone(),
                    lambda: lambda.clone(),
                    values: values.iter().map(|r| r.iter().map(|v| C64::new(v[0], v[1])).collect()).collect(),
                }
            }
        })
    }
}

/// "a:b:n" (n points from a to b inclusive) or an explicit list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Range(String),
    Points(Vec<f64>),
}

impl GridSpec {
    pub fn points(&self) -> CliResult<Vec<f64>> {
        match self {
            GridSpec::Range(s) => parse_range(s),
            GridSpec::Points(v) if v.is_empty() => Err(CliError::Invariant("grid must be non-empty".into())),
            GridSpec::Points(v) => Ok(v.clone()),
        }
    }
}

pub fn parse_range(s: &str) -> CliResult<Vec<f64>> {
    let bad = || CliError::Config(format!("grid `{s}` is not of the form start:stop:count"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if n == 0 || !a.is_finite() || !b.is_finite() {
        return Err(bad());
    }
    if n == 1 {
        return Ok(vec![a]);
    }
    Ok((0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect())
}

fn parse_window(s: &str) -> CliResult<(f64, f64)> {
    let bad = || CliError::Config(format!("window `{s}` is not of the form lo:hi"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let a: f64 = a.trim().parse().map_err(|_| bad())?;
    let b: f64 = b.trim().parse().map_err(|_| bad())?;
    if !(a < b) {
        return Err(bad());
    }
    Ok((a, b))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    pub t: Option<GridSpec>,
    pub x: Option<GridSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsSpec {
    /// λ-scan (lo, hi, count) that locates the reflection data.
    pub scan: (f64, f64, usize),
    pub support_tol: f64,
    pub panel_width: Option<f64>,
    pub order: usize,
    pub magnus_tol: f64,
    pub magnus_max_step: f64,
    /// Step of the direct integrator (dt = dx).
    pub direct_step: f64,
    pub medium_nodes: usize,
}

impl Default for NumericsSpec {
    fn default() -> Self {
        let m = MixedConfig::default();
        let s = SpectralConfig::default();
        let d = DirectConfig::default();
        Self {
            scan: m.scan,
            support_tol: m.support_tol,
            panel_width: m.panel_width,
            order: m.order,
            magnus_tol: s.magnus.tol,
            magnus_max_step: s.magnus.max_step,
            direct_step: d.dt,
            medium_nodes: d.medium_nodes,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub length: f64,
    pub horizon: f64,
    /// Incoming pulse E_in(t).
    #[serde(default)]
    pub pulse: PulseSpec,
    /// Initial field E(0, x).
    #[serde(default)]
    pub initial_field: PulseSpec,
    #[serde(default)]
    pub rho0: Rho0Spec,
    #[serde(default)]
    pub profile: ProfileSpec,
    #[serde(default)]
    pub problem_class: ClassSpec,
    #[serde(default)]
    pub lattice: LatticeSpec,
    #[serde(default)]
    pub numerics: NumericsSpec,
    /// Output directory (relative to the working directory).
    #[serde(default)]
    pub output: Option<String>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassSpec {
    #[default]
    Mixed,
    Wholeline,
}

impl RunConfig {
    pub fn t_grid(&self) -> CliResult<Vec<f64>> {
        let t = match &self.lattice.t {
            Some(g) => g.points()?,
            None => parse_range(&format!("0:{}:11", self.horizon))?,
        };
        check_inside("lattice.t", &t, self.horizon)?;
        Ok(t)
    }

    pub fn x_grid(&self) -> CliResult<Vec<f64>> {
        let x = match &self.lattice.x {
            Some(g) => g.points()?,
            None => parse_range(&format!("0:{}:11", self.length))?,
        };
        check_inside("lattice.x", &x, self.length)?;
        Ok(x)
    }

    pub fn spectral_config(&self) -> SpectralConfig {
        let mut s = SpectralConfig::default();
        s.magnus.tol = self.numerics.magnus_tol;
        s.magnus.max_step = self.numerics.magnus_max_step;
        s
    }

    pub fn mixed_config(&self) -> MixedConfig {
        MixedConfig {
            spectral: self.spectral_config(),
            scan: self.numerics.scan,
            support_tol: self.numerics.support_tol,
            panel_width: self.numerics.panel_width,
            order: self.numerics.order,
            ..Default::default()
        }
    }

    fn validate(&self) -> CliResult<()> {
        for (name, v) in [("length", self.length), ("horizon", self.horizon)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Invariant(format!("{name} must be positive, got {v}")));
            }
        }
        let n = &self.numerics;
        for (name, v) in [
            ("numerics.support_tol", n.support_tol),
            ("numerics.magnus_tol", n.magnus_tol),
            ("numerics.magnus_max_step", n.magnus_max_step),
            ("numerics.direct_step", n.direct_step),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Invariant(format!("{name} must be positive, got {v}")));
            }
        }
        if n.scan.2 < 2 || !(n.scan.0 < n.scan.1) {
            return Err(CliError::Invariant("numerics.scan must be (lo, hi, count) with lo < hi and count >= 2".into()));
        }
        if n.order == 0 || n.medium_nodes == 0 {
            return Err(CliError::Invariant("numerics.order and numerics.medium_nodes must be positive".into()));
        }
        if let Some(w) = n.panel_width {
            if !(w > 0.0) {
                return Err(CliError::Invariant(format!("numerics.panel_width must be positive, got {w}")));
            }
        }
        self.t_grid()?;
        self.x_grid()?;
        Ok(())
    }

    pub fn scenario(&self) -> CliResult<ScenarioData> {
        Ok(ScenarioData {
            e_in: self.pulse.to_signal(0.5 * self.horizon, "pulse")?,
            e0: self.initial_field.to_signal(0.5 * self.length, "initial_field")?,
            rho0: self.rho0.build()?,
            length: self.length,
            horizon: self.horizon,
        })
    }
}

fn check_inside(name: &str, pts: &[f64], hi: f64) -> CliResult<()> {
    if pts.is_empty() {
        return Err(CliError::Invariant(format!("{name} must be non-empty")));
    }
    if let Some(p) = pts.iter().find(|&&p| !(p >= -1e-12 && p <= hi + 1e-12)) {
        return Err(CliError::Invariant(format!("{name} point {p} lies outside [0, {hi}]")));
    }
    Ok(())
}

/// Parses a config string; schema errors carry the path of the offending field.
pub fn parse_config(text: &str) -> CliResult<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de)
        .map_err(|e| CliError::Schema { path: e.path().to_string(), msg: e.inner().to_string() })?;
    cfg.validate()?;
    Ok(cfg)
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: &Path) -> CliResult<(ScenarioData, RunConfig)> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let cfg = parse_config(&text)?;
    let sc = cfg.scenario()?;
    Ok((sc, cfg))
}

// ---------------------------------------------------------------- results

/// A numeric table written as CSV with 17 significant digits.
#[derive(Clone, Debug)]
pub struct Table {
    pub file: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct RunResults {
    pub command: String,
    pub config: serde_json::Value,
    pub tables: Vec<Table>,
    /// Extra files written verbatim.
    pub raw: Vec<(String, String)>,
    pub diagnostics: BTreeMap<String, f64>,
}

impl RunResults {
    fn new(command: &str, config: serde_json::Value) -> Self {
        Self { command: command.into(), config, tables: Vec::new(), raw: Vec::new(), diagnostics: BTreeMap::new() }
    }

    fn diag(&mut self, key: &str, v: f64) {
        self.diagnostics.insert(key.into(), v);
    }

    fn summary(&self) -> String {
        let d: Vec<String> = self.diagnostics.iter().map(|(k, v)| format!("{k}={v:.6e}")).collect();
        format!("{}: {}", self.command, d.join(" "))
    }
}

pub fn config_hash(config: &serde_json::Value) -> String {
    let canonical = serde_json::to_string(config).expect("JSON value serializes");
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes every table, the raw files and meta.json into `dir`.
pub fn emit_results(results: &RunResults, dir: &Path) -> CliResult<Vec<PathBuf>> {
    if results.tables.is_empty() && results.raw.is_empty() && results.diagnostics.is_empty() {
        return Err(CliError::Config("nothing to write".into()));
    }
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    for table in &results.tables {
        let path = dir.join(&table.file);
        let mut w = csv::Writer::from_path(&path)
            .map_err(|e| CliError::Io { path: path.display().to_string(), source: e.into() })?;
        let to_io = |e: csv::Error| CliError::Io { path: path.display().to_string(), source: e.into() };
        w.write_record(&table.header).map_err(to_io)?;
        for row in &table.rows {
            w.write_record(row.iter().map(|&v| fmt_num(v))).map_err(to_io)?;
        }
        w.flush().map_err(io_err(&path))?;
        written.push(path);
    }
    for (name, text) in &results.raw {
        let path = dir.join(name);
        fs::write(&path, text).map_err(io_err(&path))?;
        written.push(path);
    }
    let diagnostics: BTreeMap<&String, serde_json::Value> =
        results.diagnostics.iter().map(|(k, v)| (k, serde_json::Value::String(fmt_num(*v)))).collect();
    let meta = serde_json::json!({
        "command": results.command,
        "config": results.config,
        "config_hash": config_hash(&results.config),
        "versions": { "mbrh-core": mbrh_core_version(), "mbrh-cli": env!("CARGO_PKG_VERSION") },
        "diagnostics": diagnostics,
        "files": results.tables.iter().map(|t| t.file.clone()).chain(results.raw.iter().map(|r| r.0.clone())).collect::<Vec<_>>(),
    });
    let path = dir.join("meta.json");
    let text = serde_json::to_string_pretty(&meta).expect("meta serializes") + "\n";
    fs::write(&path, text).map_err(io_err(&path))?;
    written.push(path);
    Ok(written)
}

fn mbrh_core_version() -> &'static str {
    // both crates are versioned together in the workspace
    env!("CARGO_PKG_VERSION")
}

fn field_table(points: &[(f64, f64)], e: &[C64]) -> Table {
    Table {
        file: "fields.csv".into(),
        header: ["t", "x", "re_E", "im_E", "abs_E"].iter().map(|s| s.to_string()).collect(),
        rows: points.iter().zip(e).map(|(&(t, x), v)| vec![t, x, v.re, v.im, v.norm()]).collect(),
    }
}

// ---------------------------------------------------------------- commands

#[derive(Parser, Debug)]
#[command(name = "mb-rh", version, about = "Maxwell-Bloch mixed problem: Riemann-Hilbert and direct solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct ProfileArgs {
    /// lorentzian, rectangular or delta
    #[arg(long)]
    profile: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    l: f64,
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    /// attenuator or amplifier
    #[arg(long, default_value = "attenuator")]
    sign: String,
}

impl ProfileArgs {
    fn spec(&self, default: &str) -> CliResult<ProfileSpec> {
        let sign = match self.sign.as_str() {
            "attenuator" => SignSpec::Attenuator,
            "amplifier" => SignSpec::Amplifier,
            s => return Err(CliError::Config(format!("unknown sign `{s}`"))),
        };
        match self.profile.as_deref().unwrap_or(default) {
            "lorentzian" => Ok(ProfileSpec::Lorentzian { l: self.l, sign }),
            "rectangular" => Ok(ProfileSpec::Rectangular { eps: self.eps, sign }),
            "delta" => Ok(ProfileSpec::Delta { eps: self.eps, sign }),
            s => Err(CliError::Config(format!("unknown profile `{s}`"))),
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// η± on a real grid.
    Eta {
        #[command(flatten)]
        profile: ProfileArgs,
        #[arg(long, default_value_t = 401)]
        grid: usize,
        #[arg(long, default_value = "-5:5", allow_hyphen_values = true)]
        window: String,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// The curve Im η = 0 in the upper half-plane.
    Curve {
        #[command(flatten)]
        profile: ProfileArgs,
        #[arg(long, default_value = "-20:20", allow_hyphen_values = true)]
        window: String,
        #[arg(long, default_value_t = 801)]
        samples: usize,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// a⁺, b⁺ and |r⁺| on a λ-grid.
    Spectra {
        #[arg(long)]
        config: PathBuf,
        /// start:stop:count; defaults to the config's scan
        #[arg(long, allow_hyphen_values = true)]
        lambdas: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Jump matrices at one (t, x).
    Jump {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        x: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// E on the config lattice from the Riemann-Hilbert problem.
    SolveRh {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// E on the config lattice from the direct integrator.
    SolveDirect {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One-soliton field from the closed form.
    Soliton {
        #[arg(long)]
        nu: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        delta0: f64,
        #[command(flatten)]
        profile: ProfileArgs,
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        #[arg(long, allow_hyphen_values = true)]
        t: String,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Relative L² and L∞ differences of two fields.csv files.
    Compare {
        #[arg(long)]
        run_a: PathBuf,
        #[arg(long)]
        run_b: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn config_out(cfg: &RunConfig, out: Option<PathBuf>) -> PathBuf {
    out.or_else(|| cfg.output.as_ref().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("."))
}

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("config serializes")
}

fn cmd_eta(profile: &ProfileArgs, grid: usize, window: &str) -> CliResult<RunResults> {
    let spec = profile.spec("lorentzian")?;
    let p = spec.build()?;
    let (lo, hi) = parse_window(window)?;
    let lams = parse_range(&format!("{lo}:{hi}:{grid}"))?;
    let mut res = RunResults::new("eta", serde_json::json!({ "profile": to_value(&spec), "grid": grid, "window": [lo, hi] }));
    let mut rows = Vec::with_capacity(lams.len());
    let mut jump_err: f64 = 0.0;
    for &l in &lams {
        let ev = p.eta_boundary(l)?;
        jump_err = jump_err.max((ev.eta_plus - ev.eta_minus - C64::new(0.0, -0.5 * std::f64::consts::PI * ev.n)).norm());
        rows.push(vec![l, ev.eta_plus.re, ev.eta_plus.im, ev.eta_minus.re, ev.eta_minus.im, ev.n]);
    }
    res.tables.push(Table {
        file: "eta.csv".into(),
        header: ["lambda", "re_eta_plus", "im_eta_plus", "re_eta_minus", "im_eta_minus", "n"].iter().map(|s| s.to_string()).collect(),
        rows,
    });
    res.diag("points", lams.len() as f64);
    res.diag("max_jump_defect", jump_err);
    Ok(res)
}

fn cmd_curve(profile: &ProfileArgs, window: &str, samples: usize) -> CliResult<RunResults> {
    let spec = profile.spec("lorentzian")?;
    let p = spec.build()?;
    let window = parse_window(window)?;
    let c = gamma_trace(&p, &CurveConfig { window, samples, ..Default::default() });
    let mut res = RunResults::new(
        "curve",
        serde_json::json!({ "profile": to_value(&spec), "window": [window.0, window.1], "samples": samples }),
    );
    res.tables.push(Table {
        file: "curve.csv".into(),
        header: vec!["lambda".into(), "nu".into()],
        rows: c.points.iter().map(|&(l, n)| vec![l, n]).collect(),
    });
    res.diag("points", c.points.len() as f64);
    if let Some((l, n)) = c.nu_max {
        res.diag("nu_max", n);
        res.diag("lambda_at_nu_max", l);
    }
    res.diag("max_residual", c.max_residual);
    res.diag("truncated", if c.truncated { 1.0 } else { 0.0 });
    Ok(res)
}

fn cmd_spectra(cfg: &RunConfig, sc: &ScenarioData, lambdas: Option<&str>) -> CliResult<RunResults> {
    let p = cfg.profile.build()?;
    let lams = match lambdas {
        Some(s) => parse_range(s)?,
        None => {
            let (a, b, n) = cfg.numerics.scan;
            parse_range(&format!("{a}:{b}:{n}"))?
        }
    };
    let table = spectral_table(sc, &p, &lams, &cfg.spectral_config())?;
    let mut res = RunResults::new("spectra", serde_json::json!({ "scenario": to_value(cfg), "lambdas": lams }));
    let rows = (0..lams.len())
        .map(|k| {
            let (a, b) = (table.a_plus[k], table.b_plus[k]);
            vec![lams[k], a.re, a.im, b.re, b.im, table.r_plus[k].norm()]
        })
        .collect();
    res.tables.push(Table {
        file: "spectra.csv".into(),
        header: ["lambda", "re_a", "im_a", "re_b", "im_b", "abs_r"].iter().map(|s| s.to_string()).collect(),
        rows,
    });
    res.diag("det_deviation", table.det_deviation);
    res.diag("reduction_deviation", table.reduction_deviation);
    res.diag("max_abs_r", table.r_plus.iter().map(|r| r.norm()).fold(0.0, f64::max));
    Ok(res)
}

fn cmd_jump(cfg: &RunConfig, sc: &ScenarioData, t: f64, x: f64) -> CliResult<RunResults> {
    check_inside("t", &[t], cfg.horizon)?;
    check_inside("x", &[x], cfg.length)?;
    let p = cfg.profile.build()?;
    let data = match cfg.problem_class {
        ClassSpec::Mixed => {
            let mp = MixedProblem::new(sc, &p, &[x], &cfg.mixed_config())?;
            mp.jump_data(t, 0)?
        }
        ClassSpec::Wholeline => {
            let (a, b, n) = cfg.numerics.scan;
            let lams = parse_range(&format!("{a}:{b}:{n}"))?;
            let table = spectral_table(sc, &p, &lams, &cfg.spectral_config())?;
            let jumps: Result<Vec<_>, MbError> =
                lams.iter().zip(&table.r_plus).map(|(&l, &r)| jump_wholeline(t, x, l, r, &p)).collect();
            JumpData { class: ProblemClass::WholeLine, t, x, nodes: lams.iter().map(|&l| C64::new(l, 0.0)).collect(), jumps: jumps? }
        }
    };
    let cert = posdef_check(&data);
    let mut res = RunResults::new("jump", serde_json::json!({ "scenario": to_value(cfg), "t": t, "x": x }));
    res.raw.push(("jump.csv".into(), data.to_csv()));
    res.diag("nodes", data.nodes.len() as f64);
    res.diag("det_deviation", data.det_deviation());
    res.diag("max_deviation_from_identity", data.max_deviation_from_identity());
    if cert.real_nodes > 0 {
        res.diag("min_hermitian_eigenvalue", cert.min_eigenvalue);
    }
    Ok(res)
}

fn cmd_solve_rh(cfg: &RunConfig, sc: &ScenarioData) -> CliResult<RunResults> {
    if cfg.problem_class != ClassSpec::Mixed {
        return Err(CliError::Config("solve-rh supports the mixed problem class".into()));
    }
    let p = cfg.profile.build()?;
    let ts = cfg.t_grid()?;
    let xs = cfg.x_grid()?;
    let mp = MixedProblem::new(sc, &p, &xs, &cfg.mixed_config())?;
    let idx: Vec<(f64, usize)> = ts.iter().flat_map(|&t| (0..xs.len()).map(move |k| (t, k))).collect();
    let solved: Result<Vec<(C64, f64)>, MbError> =
        idx.par_iter().map(|&(t, k)| mp.solve(t, k).map(|r| (r.e, r.residual))).collect();
    let solved = solved?;
    let points: Vec<(f64, f64)> = idx.iter().map(|&(t, k)| (t, xs[k])).collect();
    let e: Vec<C64> = solved.iter().map(|v| v.0).collect();
    let mut res = RunResults::new("solve-rh", to_value(cfg));
    res.tables.push(field_table(&points, &e));
    res.diag("points", points.len() as f64);
    res.diag("contour_nodes", mp.contour.len() as f64);
    res.diag("poles", mp.poles.len() as f64);
    res.diag("max_residual", solved.iter().map(|v| v.1).fold(0.0, f64::max));
    res.diag("e_peak", e.iter().map(|v| v.norm()).fold(0.0, f64::max));
    Ok(res)
}

fn grid_index(v: f64, h: f64, what: &str) -> CliResult<usize> {
    let k = (v / h).round();
    if (k * h - v).abs() > 1e-9 * (1.0 + v.abs()) {
        return Err(CliError::Config(format!("lattice {what} = {v} is not a multiple of numerics.direct_step = {h}")));
    }
    Ok(k as usize)
}

fn cmd_solve_direct(cfg: &RunConfig, sc: &ScenarioData) -> CliResult<RunResults> {
    let p = cfg.profile.build()?;
    let ts = cfg.t_grid()?;
    let xs = cfg.x_grid()?;
    let h = cfg.numerics.direct_step;
    let ti: Vec<usize> = ts.iter().map(|&t| grid_index(t, h, "t")).collect::<CliResult<_>>()?;
    let xi: Vec<usize> = xs.iter().map(|&x| grid_index(x, h, "x")).collect::<CliResult<_>>()?;
    let d = integrate_direct(sc, &p, &DirectConfig { dt: h, dx: h, medium_nodes: cfg.numerics.medium_nodes, ..Default::default() })?;
    let mut points = Vec::new();
    let mut e = Vec::new();
    for (&t, &i) in ts.iter().zip(&ti) {
        for (&x, &j) in xs.iter().zip(&xi) {
            points.push((t, x));
            e.push(d.e_at(i, j));
        }
    }
    let mut res = RunResults::new("solve-direct", to_value(cfg));
    res.tables.push(field_table(&points, &e));
    res.diag("points", points.len() as f64);
    res.diag("max_step_drift", d.max_step_drift);
    res.diag("e_peak", e.iter().map(|v| v.norm()).fold(0.0, f64::max));
    Ok(res)
}

fn cmd_soliton(nu: f64, delta0: f64, profile: &ProfileArgs, x: &str, t: &str) -> CliResult<RunResults> {
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(CliError::Invariant(format!("nu must be positive, got {nu}")));
    }
    let spec = profile.spec("delta")?;
    let p = spec.build()?;
    let xs = parse_range(x)?;
    let ts = parse_range(t)?;
    let pole = one_soliton_pole(nu, delta0);
    let points: Vec<(f64, f64)> = ts.iter().flat_map(|&t| xs.iter().map(move |&x| (t, x))).collect();
    let e: Result<Vec<C64>, MbError> =
        points.par_iter().map(|&(t, x)| soliton_closed_form(&[pole], &p, t, x).map(|s| s.e)).collect();
    let e = e?;
    let mut res = RunResults::new(
        "soliton",
        serde_json::json!({ "nu": nu, "delta0": delta0, "profile": to_value(&spec), "x": x, "t": t }),
    );
    res.tables.push(field_table(&points, &e));
    res.diag("points", points.len() as f64);
    res.diag("e_peak", e.iter().map(|v| v.norm()).fold(0.0, f64::max));
    Ok(res)
}

/// Rows (t, x, E) of a fields.csv.
pub fn read_fields(path: &Path) -> CliResult<Vec<(f64, f64, C64)>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::Io { path: path.display().to_string(), source: e.into() })?;
    let headers = r.headers().map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| CliError::Config(format!("{}: missing column {name}", path.display())))
    };
    let (ct, cx, cr, ci) = (col("t")?, col("x")?, col("re_E")?, col("im_E")?);
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let num = |c: usize| -> CliResult<f64> {
            rec.get(c)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| CliError::Config(format!("{}: bad number in row {}", path.display(), line + 2)))
        };
        out.push((num(ct)?, num(cx)?, C64::new(num(cr)?, num(ci)?)));
    }
    Ok(out)
}

/// (relative L², L∞) of a − b, relative to b.
pub fn compare_fields(a: &[(f64, f64, C64)], b: &[(f64, f64, C64)]) -> CliResult<(f64, f64)> {
    if a.len() != b.len() || a.is_empty() {
        return Err(CliError::Config(format!("runs have {} and {} rows", a.len(), b.len())));
    }
    let (mut num, mut den, mut linf) = (0.0, 0.0, 0.0f64);
    for (k, (p, q)) in a.iter().zip(b).enumerate() {
        if (p.0 - q.0).abs() > 1e-9 || (p.1 - q.1).abs() > 1e-9 {
            return Err(CliError::Config(format!("row {} is at (t, x) = ({}, {}) in one run and ({}, {}) in the other", k + 2, p.0, p.1, q.0, q.1)));
        }
        let d = (p.2 - q.2).norm();
        num += d * d;
        den += q.2.norm_sqr();
        linf = linf.max(d);
    }
    let rel = if den > 0.0 { (num / den).sqrt() } else { num.sqrt() };
    Ok((rel, linf))
}

fn cmd_compare(a: &Path, b: &Path) -> CliResult<RunResults> {
    let (rel, linf) = compare_fields(&read_fields(a)?, &read_fields(b)?)?;
    let mut res = RunResults::new(
        "compare",
        serde_json::json!({ "run_a": a.display().to_string(), "run_b": b.display().to_string() }),
    );
    res.diag("relative_l2", rel);
    res.diag("linf", linf);
    Ok(res)
}

fn set_threads() -> CliResult<()> {
    if let Ok(v) = std::env::var("MB_RH_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Config(format!("MB_RH_THREADS must be a positive integer, got `{v}`")))?;
        // a pool built earlier in the process stays in place
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn dispatch(cli: Cli) -> CliResult<(RunResults, Option<PathBuf>)> {
    set_threads()?;
    match cli.command {
        Command::Eta { profile, grid, window, out } => Ok((cmd_eta(&profile, grid, &window)?, Some(out))),
        Command::Curve { profile, window, samples, out } => Ok((cmd_curve(&profile, &window, samples)?, Some(out))),
        Command::Spectra { config, lambdas, out } => {
            let (sc, cfg) = load_scenario(&config)?;
            Ok((cmd_spectra(&cfg, &sc, lambdas.as_deref())?, Some(config_out(&cfg, out))))
        }
        Command::Jump { config, t, x, out } => {
            let (sc, cfg) = load_scenario(&config)?;
            Ok((cmd_jump(&cfg, &sc, t, x)?, Some(config_out(&cfg, out))))
        }
        Command::SolveRh { config, out } => {
            let (sc, cfg) = load_scenario(&config)?;
            Ok((cmd_solve_rh(&cfg, &sc)?, Some(config_out(&cfg, out))))
        }
        Command::SolveDirect { config, out } => {
            let (sc, cfg) = load_scenario(&config)?;
            Ok((cmd_solve_direct(&cfg, &sc)?, Some(config_out(&cfg, out))))
        }
        Command::Soliton { nu, delta0, profile, x, t, out } => Ok((cmd_soliton(nu, delta0, &profile, &x, &t)?, Some(out))),
        Command::Compare { run_a, run_b, out } => Ok((cmd_compare(&run_a, &run_b)?, out)),
    }
}

/// Runs one command line (argv[0] is the program name) and returns the
/// exit status: 0 on success, 2 on config errors, 3 on numerical failures.
pub fn run_command<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = dispatch(cli).and_then(|(res, out)| {
        if let Some(dir) = out {
            emit_results(&res, &dir)?;
        }
        Ok(res)
    });
    match outcome {
        Ok(res) => {
            println!("{}", res.summary());
            0
        }
        Err(e) => {
            eprintln!("mb-rh: {e}");
            e.exit_code()
        }
    }
}
