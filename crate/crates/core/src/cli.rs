//! The `fredinfo` command-line front end.
//!
//! Exit status: 0 on success, 2 on usage/validation errors, 3 on numeric
//! failures or failed sweep assertions. Diagnostics go to stderr; results
//! go to `--out` or stdout.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::epsilon::Epsilon;
use crate::error::{Error, Result};
use crate::format;
use crate::harness::{self, ExperimentConfig, SUMMARY_CSV_HEADER};
use crate::metric_info::{
    capacity_csv_row, capacity_interval, growth_orders, log_grid, pow2_grid, Sided, CAPACITY_CSV_HEADER,
};
use crate::prob_info::{extremal_comparison, ComponentInfo, ExtremalCase, GaussianChannel, ScaleRule};
use crate::spectral_models::{CoefficientVector, ModelKind, SpectrumModel};
use crate::truncation::truncated_solution;

/// Environment variable overriding the seed of a `simulate` config.
pub const SEED_ENV: &str = "FREDINFO_SEED";

#[derive(Debug, Parser)]
#[command(name = "fredinfo", version, about = "Spectral cutoff and information bounds for Fredholm equations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List eigenvalues of a spectral model.
    Eigens(EigensArgs),
    /// Truncated-expansion solution for a data vector.
    Truncate(TruncateArgs),
    /// Entropy/capacity bounds per epsilon.
    Capacity(CapacityArgs),
    /// Growth orders and degrees of compactness over an epsilon grid.
    MetricInfo(MetricInfoArgs),
    /// Gaussian-channel information, partition and error.
    ProbInfo(ProbInfoArgs),
    /// Run a seeded experiment described by a JSON config.
    Simulate(SimulateArgs),
    /// The three-operator summary table.
    Table(TableArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelName {
    Poisson,
    Heat,
    Green,
    Tabulated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SidedArg {
    OneSided,
    Total,
}

impl From<SidedArg> for Sided {
    fn from(s: SidedArg) -> Self {
        match s {
            SidedArg::OneSided => Sided::OneSided,
            SidedArg::Total => Sided::Total,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExtremalArg {
    Alpha,
    Beta,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum)]
    pub model: ModelName,
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<f64>,
    /// Diffusivity of the heat model.
    #[arg(long, allow_hyphen_values = true)]
    pub d: Option<f64>,
    /// Comma-separated eigenvalues of a tabulated model.
    #[arg(long, value_delimiter = ',')]
    pub values: Option<Vec<f64>>,
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Accept tied tabulated eigenvalues.
    #[arg(long)]
    pub allow_ties: bool,
}

impl ModelArgs {
    pub fn build(&self) -> Result<SpectrumModel> {
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| Error::Validation(format!("--{name} is required for --model {:?}", self.model)))
        };
        let kind = match self.model {
            ModelName::Poisson => ModelKind::Poisson { a: need(self.a, "a")?, b: need(self.b, "b")? },
            ModelName::Heat => ModelKind::Heat {
                diffusivity: need(self.d, "d")?,
                a: need(self.a, "a")?,
                b: need(self.b, "b")?,
            },
            ModelName::Green => ModelKind::Green,
            ModelName::Tabulated => ModelKind::Tabulated {
                values: self
                    .values
                    .clone()
                    .ok_or_else(|| Error::Validation("--values is required for --model tabulated".into()))?,
            },
        };
        let mut model = SpectrumModel::new(kind)?;
        if self.allow_ties {
            model = model.allowing_ties()?;
        }
        if let Some(k) = self.k_max {
            model = model.with_k_max(k)?;
        }
        Ok(model)
    }
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Write the result here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
}

#[derive(Debug, Args)]
pub struct EigensArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Index range `lo..hi` (inclusive); defaults to the retained labels.
    #[arg(long)]
    pub k: Option<String>,
    /// Emit `k,lambda_k,multiplicity` for the retained spectrum.
    #[arg(long)]
    pub with_multiplicity: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct TruncateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub epsilon: Epsilon,
    /// JSON data coefficients: a number array or a coefficient-vector object.
    #[arg(long)]
    pub data: PathBuf,
    /// Reference solution in the same format, for error diagnostics.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct CapacityArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// One or more epsilon values (repeat or comma-separate).
    #[arg(long, value_delimiter = ',')]
    pub epsilon: Vec<Epsilon>,
    /// Grid specification, see `metric-info --help`.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long, value_enum, default_value = "one-sided")]
    pub sided: SidedArg,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct MetricInfoArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// `pow2:START..END:COUNT`, `log:HI..LO:COUNT` or a comma-separated list.
    #[arg(long)]
    pub grid: String,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ProbInfoArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub epsilon: f64,
    /// Prior scale rule, e.g. `geometric:1,0.5`.
    #[arg(long)]
    pub rho: Option<String>,
    /// Noise scale rule, e.g. `constant:1`.
    #[arg(long)]
    pub nu: Option<String>,
    /// Use one of the two extremal channels instead of `--rho/--nu`.
    #[arg(long, value_enum, conflicts_with_all = ["rho", "nu"])]
    pub extremal: Option<ExtremalArg>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// CSV destination; `<out>.meta.json` and `<out>.config.json` are written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Parses a scale rule: `constant:V`, `geometric:S,Q`, `power:S,P`,
/// `gaussian:S,R`, `inverse-eigen:D` or `tabulated:V1,V2,...`.
pub fn parse_scale_rule(text: &str) -> Result<ScaleRule> {
    let (family, rest) = text
        .split_once(':')
        .ok_or_else(|| Error::Validation(format!("scale rule {text:?} needs the form family:params")))?;
    let nums: Vec<f64> = rest
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Validation(format!("bad number in scale rule {text:?}")))?;
    let arity = |n: usize| {
        if nums.len() == n {
            Ok(())
        } else {
            Err(Error::Validation(format!("scale rule {family} takes {n} parameter(s), got {}", nums.len())))
        }
    };
    Ok(match family {
        "constant" => {
            arity(1)?;
            ScaleRule::Constant { value: nums[0] }
        }
        "geometric" => {
            arity(2)?;
            ScaleRule::Geometric { scale: nums[0], ratio: nums[1] }
        }
        "power" => {
            arity(2)?;
            ScaleRule::Power { scale: nums[0], exponent: nums[1] }
        }
        "gaussian" => {
            arity(2)?;
            ScaleRule::Gaussian { scale: nums[0], rate: nums[1] }
        }
        "inverse-eigen" => {
            arity(1)?;
            ScaleRule::InverseEigen { perturbation: nums[0] }
        }
        "tabulated" => ScaleRule::Tabulated { values: nums, tail_sq_bound: None },
        other => return Err(Error::Validation(format!("unknown scale rule family {other:?}"))),
    })
}

/// Parses an epsilon grid: `pow2:-16..-1024:64`, `log:1e-2..1e-10:33`, or
/// a comma-separated list of epsilons.
pub fn parse_grid(text: &str) -> Result<Vec<Epsilon>> {
    let ranged = |body: &str| -> Result<(f64, f64, usize)> {
        let bad = || Error::Validation(format!("bad grid {text:?}"));
        let (range, count) = body.rsplit_once(':').ok_or_else(bad)?;
        let (lo, hi) = range.split_once("..").ok_or_else(bad)?;
        let count: usize = count.trim().parse().map_err(|_| bad())?;
        if count < 2 {
            return Err(Error::Validation("grid needs at least two points".into()));
        }
        Ok((lo.trim().parse().map_err(|_| bad())?, hi.trim().parse().map_err(|_| bad())?, count))
    };
    if let Some(body) = text.strip_prefix("pow2:").filter(|b| b.contains("..")) {
        let (start, end, count) = ranged(body)?;
        Ok(pow2_grid(start, end, count))
    } else if let Some(body) = text.strip_prefix("log:") {
        let (hi, lo, count) = ranged(body)?;
        if !(hi > 0.0 && lo > 0.0) {
            return Err(Error::Validation("log grid endpoints must be positive".into()));
        }
        Ok(log_grid(hi, lo, count))
    } else {
        text.split(',').map(str::parse).collect()
    }
}

/// Parses an inclusive range `lo..hi` or a single index.
fn parse_index_range(text: &str) -> Result<(i64, i64)> {
    let bad = || Error::Validation(format!("bad index range {text:?}"));
    match text.split_once("..") {
        Some((lo, hi)) => {
            let lo: i64 = lo.trim().parse().map_err(|_| bad())?;
            let hi: i64 = hi.trim().parse().map_err(|_| bad())?;
            if hi < lo {
                return Err(bad());
            }
            Ok((lo, hi))
        }
        None => {
            let k: i64 = text.trim().parse().map_err(|_| bad())?;
            Ok((k, k))
        }
    }
}

/// Reads coefficients from JSON. A bare array is laid out one-sided for
/// `[0, 1]` models and centred (`-K..=K`) for Fourier models.
pub fn read_coefficients(path: &Path, model: &SpectrumModel) -> Result<CoefficientVector> {
    let text = fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let vector = if value.is_array() {
        let entries: Vec<f64> = serde_json::from_value(value)?;
        if model.is_two_sided() {
            CoefficientVector::two_sided(model, entries)?
        } else {
            CoefficientVector::one_sided(model, entries)
        }
    } else {
        serde_json::from_value(value)?
    };
    vector.check_basis(model)?;
    Ok(vector)
}

#[derive(Debug, Serialize)]
struct ProbInfoReport {
    #[serde(rename = "k_I")]
    k_i: usize,
    saturated: bool,
    k_alpha: Option<usize>,
    mse: Option<f64>,
    exact_nats: f64,
    approx_nats: f64,
    components: Vec<ComponentInfo>,
}

#[derive(Debug, Serialize)]
struct EigenRow {
    k: i64,
    lambda: f64,
}

fn emit(out: &Option<PathBuf>, stdout: &mut dyn Write, body: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, body)?,
        None => stdout.write_all(body.as_bytes())?,
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

fn csv_only(format: Option<OutputFormat>, what: &str) -> Result<()> {
    match format {
        Some(OutputFormat::Json) => Err(Error::Unsupported(format!("{what} has no JSON output"))),
        _ => Ok(()),
    }
}

fn json_only(format: Option<OutputFormat>, what: &str) -> Result<()> {
    match format {
        Some(OutputFormat::Csv) => Err(Error::Unsupported(format!("{what} has no CSV output"))),
        _ => Ok(()),
    }
}

/// Executes a parsed command. `Ok(code)` carries a non-zero status for runs
/// that completed but failed an assertion.
pub fn execute(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    match cli.command {
        Command::Eigens(args) => {
            let model = args.model.build()?;
            if args.with_multiplicity {
                if args.k.is_some() {
                    return Err(Error::Usage("--with-multiplicity lists the retained spectrum; drop --k".into()));
                }
                csv_only(args.output.format, "eigens --with-multiplicity")?;
                return emit(&args.output.out, stdout, &model.spectrum_csv()).map(|_| 0);
            }
            let (lo, hi) = match &args.k {
                Some(r) => parse_index_range(r)?,
                None if model.is_two_sided() => (0, model.k_max() as i64),
                None => (1, model.k_max() as i64),
            };
            let rows = (lo..=hi)
                .map(|k| Ok(EigenRow { k, lambda: model.eigenvalue(k)? }))
                .collect::<Result<Vec<_>>>()?;
            let body = match args.output.format.unwrap_or(OutputFormat::Csv) {
                OutputFormat::Json => to_json(&rows)?,
                OutputFormat::Csv => {
                    let mut s = String::from("k,lambda\n");
                    for r in &rows {
                        s.push_str(&format!("{},{}\n", r.k, format::float(r.lambda)));
                    }
                    s
                }
            };
            emit(&args.output.out, stdout, &body)?;
        }
        Command::Truncate(args) => {
            json_only(args.output.format, "truncate")?;
            let model = args.model.build()?;
            let eps = args
                .epsilon
                .as_f64()
                .ok_or_else(|| Error::Unsupported("truncate needs an epsilon representable as a float".into()))?;
            let data = read_coefficients(&args.data, &model)?;
            let mut report = truncated_solution(&model, &data, eps)?;
            if let Some(path) = &args.reference {
                let f = read_coefficients(path, &model)?;
                report = report.with_reference(&model, &f)?;
            }
            for k in &report.range_advisories {
                writeln!(stderr, "advisory: |g_{k}| / lambda_{k} exceeds 1e12; data may lie outside the range")?;
            }
            emit(&args.output.out, stdout, &to_json(&report)?)?;
        }
        Command::Capacity(args) => {
            let model = args.model.build()?;
            let mut grid = args.epsilon.clone();
            if let Some(g) = &args.grid {
                grid.extend(parse_grid(g)?);
            }
            if grid.is_empty() {
                return Err(Error::Validation("give --epsilon or --grid".into()));
            }
            let sided = Sided::from(args.sided);
            let body = match args.output.format.unwrap_or(OutputFormat::Csv) {
                OutputFormat::Csv => {
                    let mut s = format!("{CAPACITY_CSV_HEADER}\n");
                    for eps in &grid {
                        s.push_str(&capacity_csv_row(&model, eps, sided)?);
                        s.push('\n');
                    }
                    s
                }
                OutputFormat::Json => {
                    let rows = grid
                        .iter()
                        .map(|eps| capacity_interval(&model, eps, sided))
                        .collect::<Result<Vec<_>>>()?;
                    to_json(&rows)?
                }
            };
            emit(&args.output.out, stdout, &body)?;
        }
        Command::MetricInfo(args) => {
            json_only(args.output.format, "metric-info")?;
            let model = args.model.build()?;
            let grid = parse_grid(&args.grid)?;
            let est = growth_orders(&model, &grid)?;
            emit(&args.output.out, stdout, &to_json(&est)?)?;
        }
        Command::ProbInfo(args) => {
            json_only(args.output.format, "prob-info")?;
            let model = args.model.build()?;
            if let Some(case) = args.extremal {
                let case = match case {
                    ExtremalArg::Alpha => ExtremalCase::Alpha,
                    ExtremalArg::Beta => ExtremalCase::Beta,
                };
                let cmp = extremal_comparison(&model, args.epsilon, case)?;
                if let Some(d) = &cmp.diagnostic {
                    writeln!(stderr, "note: {d}")?;
                }
                return emit(&args.output.out, stdout, &to_json(&cmp)?).map(|_| 0);
            }
            let rho = parse_scale_rule(
                args.rho.as_deref().ok_or_else(|| Error::Validation("--rho is required".into()))?,
            )?;
            let nu = parse_scale_rule(
                args.nu.as_deref().ok_or_else(|| Error::Validation("--nu is required".into()))?,
            )?;
            let ch = GaussianChannel::new(model, rho, nu, args.epsilon)?;
            let part = ch.partition()?;
            let totals = ch.total_information()?;
            let (k_alpha, mse) = if ch.is_trace_class() {
                (Some(ch.k_alpha()?), Some(ch.mse_closed_form()?))
            } else {
                writeln!(stderr, "note: prior is not trace class; k_alpha and mse omitted")?;
                (None, None)
            };
            let report = ProbInfoReport {
                k_i: part.k_i,
                saturated: part.saturated,
                k_alpha,
                mse,
                exact_nats: totals.exact_nats,
                approx_nats: totals.approx_nats,
                components: ch.components(),
            };
            emit(&args.output.out, stdout, &to_json(&report)?)?;
        }
        Command::Simulate(args) => {
            let text = fs::read_to_string(&args.config)?;
            let mut config = ExperimentConfig::from_json(&text)?;
            if let Ok(seed) = std::env::var(SEED_ENV) {
                config.seed = seed
                    .trim()
                    .parse()
                    .map_err(|_| Error::Validation(format!("{SEED_ENV}={seed:?} is not a 64-bit integer")))?;
            }
            let out = args.out.clone().or_else(|| config.output_path.as_ref().map(PathBuf::from));
            let result = harness::convergence_sweep(&config)?;
            let csv = result.to_csv();
            match &out {
                Some(path) => {
                    fs::write(path, &csv)?;
                    fs::write(sibling(path, ".meta.json"), result.metadata_json()? + "\n")?;
                    fs::write(sibling(path, ".config.json"), config.to_json()? + "\n")?;
                }
                None => stdout.write_all(csv.as_bytes())?,
            }
            for v in &result.violations {
                writeln!(stderr, "assertion failed: {v}")?;
            }
            if !result.violations.is_empty() {
                return Ok(3);
            }
        }
        Command::Table(args) => {
            let rows = harness::reproduce_summary_table()?;
            let body = match args.output.format.unwrap_or(OutputFormat::Csv) {
                OutputFormat::Csv => {
                    let mut s = format!("{SUMMARY_CSV_HEADER}\n");
                    for r in &rows {
                        s.push_str(&r.csv_row());
                        s.push('\n');
                    }
                    s
                }
                OutputFormat::Json => to_json(&rows)?,
            };
            emit(&args.output.out, stdout, &body)?;
        }
    }
    Ok(0)
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = stdout.write_all(rendered.as_bytes());
            } else {
                let _ = stderr.write_all(rendered.as_bytes());
            }
            return code;
        }
    };
    match execute(cli, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
