//! Command-line front end: argument parsing, JSON configs, exit codes.

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::bounds::{verify_grr, verify_grr_on_grid, BSource, GridCheckSummary, GrrProblem, ProblemField};
use crate::error::{parameter, Error, Result};
use crate::experiments::{refinement_sweep, CertificateSpec, ExperimentSpec, DEFAULT_DELTA_MAX};
use crate::field_grid::{GridField, PointPair};
use crate::gaussian::{CovarianceModel, Sampler, SamplingPath};
use crate::modulus::{LogModulatedModulus, ModulusFunction, YoungFunction};
use crate::report::{to_json, write_atomic, SCHEMA};
use crate::rng::replicate_rng;
use crate::snapshot::{write_snapshot, Manifest};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

/// Grid shape written `33x33`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct GridSpec(pub Vec<usize>);

impl FromStr for GridSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let dims: Vec<usize> = s
            .split('x')
            .map(|p| p.trim().parse::<usize>().map_err(|_| format!("bad grid '{s}' (want e.g. 33x33)")))
            .collect::<std::result::Result<_, _>>()?;
        if dims.is_empty() || dims.len() > crate::field_grid::MAX_DIM || dims.iter().any(|&m| m < 2) {
            return Err(format!("grid '{s}' needs 1 to 8 axes of at least 2 nodes"));
        }
        Ok(Self(dims))
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join("x"))
    }
}

impl TryFrom<String> for GridSpec {
    type Error = String;
    fn try_from(s: String) -> std::result::Result<Self, String> {
        s.parse()
    }
}

impl From<GridSpec> for String {
    fn from(g: GridSpec) -> String {
        g.to_string()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelName {
    Fbm,
    Heat,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Builtin {
    Prod,
    Quad,
    Sinprod,
    Zero,
}

impl Builtin {
    pub fn eval(self, p: &[f64]) -> f64 {
        match self {
            Self::Prod => p.iter().product(),
            Self::Quad => p.iter().map(|x| x * x).product(),
            Self::Sinprod => p.iter().map(|x| (std::f64::consts::PI * x).sin()).product(),
            Self::Zero => 0.0,
        }
    }

    /// B over [0,1]ⁿ where it has a closed form.
    pub fn closed_form_b(self, psi: &YoungFunction, moduli: &[ModulusFunction]) -> Result<f64> {
        match self {
            Self::Zero => Ok(psi.at_zero()),
            Self::Prod => {
                let YoungFunction::Power(alpha) = *psi else {
                    return parameter("closed-form B for prod needs a power Ψ");
                };
                // ∫∫|x − y|^c dx dy = 2/((c + 1)(c + 2)) per axis, c = α(1 − γ)
                moduli.iter().try_fold(1.0, |acc, m| {
                    let Some(gamma) = m.is_power() else {
                        return parameter("closed-form B for prod needs power moduli");
                    };
                    let c = alpha * (1.0 - gamma);
                    if c <= -1.0 {
                        return Err(Error::Divergent(format!("B is infinite for α(1 − γ) = {c}")));
                    }
                    Ok(acc * 2.0 / ((c + 1.0) * (c + 2.0)))
                })
            }
            _ => parameter("no closed-form B for this function; use --b estimated"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BMode {
    Closed,
    Estimated,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathArg {
    Kronecker,
    Dense,
    Full,
}

impl From<PathArg> for SamplingPath {
    fn from(p: PathArg) -> Self {
        match p {
            PathArg::Kronecker => SamplingPath::Kronecker,
            PathArg::Dense => SamplingPath::Dense,
            PathArg::Full => SamplingPath::FullCholesky,
        }
    }
}

fn parse_hurst(s: &str) -> std::result::Result<f64, String> {
    let h: f64 = s.trim().parse().map_err(|_| format!("not a number: '{s}'"))?;
    if h > 0.0 && h <= 1.0 {
        Ok(h)
    } else {
        Err(format!("Hurst index must lie in (0, 1], got {h}"))
    }
}

fn parse_delta(s: &str) -> std::result::Result<f64, String> {
    let d: f64 = s.trim().parse().map_err(|_| format!("not a number: '{s}'"))?;
    if d > 0.0 && d < 1.0 {
        Ok(d)
    } else {
        Err(format!("δ_max must lie in (0, 1), got {d}"))
    }
}

fn parse_slack(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("not a number: '{s}'"))?;
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("slack must be a non-negative number, got {v}"))
    }
}

fn parse_psi(s: &str) -> std::result::Result<String, String> {
    s.parse::<YoungFunction>().map_err(|e| e.to_string())?;
    Ok(s.trim().to_string())
}

fn parse_modulus(s: &str) -> std::result::Result<String, String> {
    s.parse::<ModulusFunction>().map_err(|e| e.to_string())?;
    Ok(s.trim().to_string())
}

fn parse_form(s: &str) -> std::result::Result<String, String> {
    match s {
        "h" | "sigma" | "hH" | "sigmaH" | "heat" => Ok(s.to_string()),
        _ => Err(format!("unknown modulus form '{s}' (want h, sigma, hH, sigmaH or heat)")),
    }
}

fn parse_alpha(s: &str) -> std::result::Result<f64, String> {
    let a: f64 = s.trim().parse().map_err(|_| format!("not a number: '{s}'"))?;
    if (0.0..=0.25).contains(&a) {
        Ok(a)
    } else {
        Err(format!("α must lie in [0, 1/4], got {a}"))
    }
}

fn parse_node_count(s: &str) -> std::result::Result<usize, String> {
    match s.trim().parse::<usize>() {
        Ok(m) if m >= 2 => Ok(m),
        _ => Err(format!("node count must be an integer ≥ 2, got '{s}'")),
    }
}

/// One run of the tool; also the schema of `--config` files.
#[derive(Clone, Debug, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RunConfig {
    /// Sample Gaussian fields on a grid and store snapshots.
    Simulate {
        #[arg(long, value_enum)]
        model: ModelName,
        #[arg(long, value_delimiter = ',', value_parser = parse_hurst)]
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        hurst: Vec<f64>,
        #[arg(long)]
        grid: GridSpec,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        replicates: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        #[serde(default, skip_serializing_if = "Option::is_none")]
        path: Option<PathArg>,
    },
    /// Check the GRR inequality for a builtin function.
    VerifyGrr {
        #[arg(long, value_enum)]
        function: Builtin,
        #[arg(long, value_parser = parse_psi)]
        psi: String,
        /// One modulus per axis, or one for all axes.
        #[arg(long, value_delimiter = ',', required = true, value_parser = parse_modulus)]
        p: Vec<String>,
        #[arg(long)]
        grid: GridSpec,
        /// Defaults to 0 for a closed-form B and 0.05 for an estimated one.
        #[arg(long, value_parser = parse_slack)]
        #[serde(default, skip_serializing_if = "Option::is_none")]
        slack: Option<f64>,
        /// Check this many random node pairs instead of every box.
        #[arg(long)]
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pairs: Option<usize>,
        #[arg(long, value_enum, default_value_t = BMode::Closed)]
        b: BMode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        #[serde(default, skip_serializing_if = "Option::is_none")]
        report: Option<PathBuf>,
    },
    /// Sup ratios of sampled fields across grid refinements.
    Holder {
        #[arg(long, value_enum, default_value_t = ModelName::Fbm)]
        model: ModelName,
        #[arg(long, value_delimiter = ',', value_parser = parse_hurst)]
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        hurst: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        grids: Vec<GridSpec>,
        #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
        replicates: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_DELTA_MAX, value_parser = parse_delta)]
        delta: f64,
        #[arg(long, default_value = "hH", value_parser = parse_form)]
        form: String,
        /// Exponent of the heat form.
        #[arg(long, default_value_t = 0.125, value_parser = parse_alpha)]
        alpha: f64,
        #[arg(long, default_value_t = 0.05, value_parser = parse_slack)]
        slack: f64,
        /// Moduli for a per-path certificate with Ψ = expq.
        #[arg(long, value_delimiter = ',', value_parser = parse_modulus)]
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        certificate_p: Vec<String>,
        #[arg(long)]
        #[serde(default, skip_serializing_if = "Option::is_none")]
        report: Option<PathBuf>,
        #[arg(long)]
        #[serde(default, skip_serializing_if = "Option::is_none")]
        csv: Option<PathBuf>,
    },
    /// Sup ratios of the heat-equation field against the time–space modulus.
    HeatHolder {
        #[arg(long, value_delimiter = ',', required = true, value_parser = parse_node_count)]
        t_grid: Vec<usize>,
        #[arg(long, value_delimiter = ',', required = true, value_parser = parse_node_count)]
        x_grid: Vec<usize>,
        #[arg(long, default_value_t = 0.125, value_parser = parse_alpha)]
        alpha: f64,
        #[arg(long, default_value_t = DEFAULT_DELTA_MAX, value_parser = parse_delta)]
        delta: f64,
        #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
        replicates: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        #[serde(default, skip_serializing_if = "Option::is_none")]
        report: Option<PathBuf>,
        #[arg(long)]
        #[serde(default, skip_serializing_if = "Option::is_none")]
        csv: Option<PathBuf>,
    },
    /// Print Q(x, y); `--eval` takes the coordinates of x followed by y.
    Cov {
        #[arg(long, value_enum)]
        model: ModelName,
        #[arg(long, value_delimiter = ',', value_parser = parse_hurst)]
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        hurst: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        eval: Vec<f64>,
    },
}

#[derive(Debug, Parser)]
#[command(name = "grr", version, about = "GRR inequality checks and regularity experiments for Gaussian fields")]
#[command(args_conflicts_with_subcommands = true, subcommand_required = false)]
struct Cli {
    /// Read the run from a JSON file instead of flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<RunConfig>,
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Simulate { .. } => "simulate",
            Self::VerifyGrr { .. } => "verify-grr",
            Self::Holder { .. } => "holder",
            Self::HeatHolder { .. } => "heat-holder",
            Self::Cov { .. } => "cov",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Self::Simulate { seed, .. }
            | Self::VerifyGrr { seed, .. }
            | Self::Holder { seed, .. }
            | Self::HeatHolder { seed, .. } => Some(*seed),
            Self::Cov { .. } => None,
        }
    }

    /// Normalized argument list; parsing it gives back `self`.
    pub fn to_args(&self) -> Vec<String> {
        let mut a = vec![self.name().to_string()];
        let mut push = |k: &str, v: String| {
            a.push(format!("--{k}"));
            a.push(v);
        };
        let value_name = |v: &dyn ValueEnumName| v.value_name();
        match self {
            Self::Simulate {
                model,
                hurst,
                grid,
                replicates,
                seed,
                out,
                path,
            } => {
                push("model", value_name(model));
                if !hurst.is_empty() {
                    push("hurst", join(hurst));
                }
                push("grid", grid.to_string());
                push("replicates", replicates.to_string());
                push("seed", seed.to_string());
                push("out", out.display().to_string());
                if let Some(p) = path {
                    push("path", value_name(p));
                }
            }
            Self::VerifyGrr {
                function,
                psi,
                p,
                grid,
                slack,
                pairs,
                b,
                seed,
                report,
            } => {
                push("function", value_name(function));
                push("psi", psi.clone());
                push("p", p.join(","));
                push("grid", grid.to_string());
                if let Some(s) = slack {
                    push("slack", s.to_string());
                }
                if let Some(n) = pairs {
                    push("pairs", n.to_string());
                }
                push("b", value_name(b));
                push("seed", seed.to_string());
                if let Some(r) = report {
                    push("report", r.display().to_string());
                }
            }
            Self::Holder {
                model,
                hurst,
                grids,
                replicates,
                seed,
                delta,
                form,
                alpha,
                slack,
                certificate_p,
                report,
                csv,
            } => {
                push("model", value_name(model));
                if !hurst.is_empty() {
                    push("hurst", join(hurst));
                }
                push("grids", join(grids));
                push("replicates", replicates.to_string());
                push("seed", seed.to_string());
                push("delta", delta.to_string());
                push("form", form.clone());
                push("alpha", alpha.to_string());
                push("slack", slack.to_string());
                if !certificate_p.is_empty() {
                    push("certificate-p", certificate_p.join(","));
                }
                if let Some(r) = report {
                    push("report", r.display().to_string());
                }
                if let Some(c) = csv {
                    push("csv", c.display().to_string());
                }
            }
            Self::HeatHolder {
                t_grid,
                x_grid,
                alpha,
                delta,
                replicates,
                seed,
                report,
                csv,
            } => {
                push("t-grid", join(t_grid));
                push("x-grid", join(x_grid));
                push("alpha", alpha.to_string());
                push("delta", delta.to_string());
                push("replicates", replicates.to_string());
                push("seed", seed.to_string());
                if let Some(r) = report {
                    push("report", r.display().to_string());
                }
                if let Some(c) = csv {
                    push("csv", c.display().to_string());
                }
            }
            Self::Cov { model, hurst, eval } => {
                push("model", value_name(model));
                if !hurst.is_empty() {
                    push("hurst", join(hurst));
                }
                push("eval", join(eval));
            }
        }
        a
    }
}

trait ValueEnumName {
    fn value_name(&self) -> String;
}

impl<T: ValueEnum> ValueEnumName for T {
    fn value_name(&self) -> String {
        self.to_possible_value().expect("no skipped variants").get_name().to_string()
    }
}

/// Why parsing stopped without a runnable config.
#[derive(Debug)]
pub enum ParseStop {
    /// `--help` or `--version`; the text to print.
    Info(String),
    /// Bad usage; the message to print.
    Usage(String),
}

/// Parses `argv` (program name first). A `--config` file goes through the
/// same validation as flags.
pub fn parse_args<I, T>(argv: I) -> std::result::Result<RunConfig, ParseStop>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
            ParseStop::Info(e.to_string())
        }
        _ => ParseStop::Usage(e.to_string()),
    })?;
    match (cli.config, cli.command) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| ParseStop::Usage(format!("cannot read config {}: {e}", path.display())))?;
            let cfg: RunConfig =
                serde_json::from_str(&text).map_err(|e| ParseStop::Usage(format!("bad config: {e}")))?;
            let argv = std::iter::once("grr".to_string()).chain(cfg.to_args());
            parse_args(argv)
        }
        (None, Some(cmd)) => Ok(cmd),
        _ => Err(ParseStop::Usage("expected a subcommand or --config <file>".into())),
    }
}

/// Result of a successful run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parameter(_) | Error::Domain(_) | Error::Hypothesis(_) | Error::Json(_) => EXIT_USAGE,
        Error::Io(_) => EXIT_IO,
        Error::Model(_) | Error::Divergent(_) | Error::Resolution(_) => EXIT_FAIL,
    }
}

fn build_model(model: ModelName, hurst: &[f64], grid_dim: Option<usize>) -> Result<CovarianceModel> {
    match model {
        ModelName::Fbm => {
            if hurst.is_empty() {
                return parameter("fbm needs --hurst");
            }
            let m = CovarianceModel::fbm(hurst.to_vec())?;
            if let Some(d) = grid_dim {
                if d != hurst.len() {
                    return parameter(format!("{} Hurst indices for a {d}-dimensional grid", hurst.len()));
                }
            }
            Ok(m)
        }
        ModelName::Heat => {
            if grid_dim.is_some_and(|d| d != 2) {
                return parameter("the heat field lives on a 2-dimensional (t, y) grid");
            }
            Ok(CovarianceModel::Heat)
        }
    }
}

fn parse_moduli(specs: &[String], dim: usize) -> Result<Vec<ModulusFunction>> {
    let moduli: Vec<ModulusFunction> = specs.iter().map(|s| s.parse()).collect::<Result<_>>()?;
    match moduli.len() {
        1 => Ok(vec![moduli[0].clone(); dim]),
        n if n == dim => Ok(moduli),
        n => parameter(format!("{n} moduli for a {dim}-dimensional grid")),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, to_json(value)?.as_bytes())
}

/// Executes a parsed config.
pub fn run(config: &RunConfig) -> Result<Outcome> {
    match config {
        RunConfig::Simulate {
            model,
            hurst,
            grid,
            replicates,
            seed,
            out,
            path,
        } => {
            let model = build_model(*model, hurst, Some(grid.0.len()))?;
            let axes = GridField::uniform_axes(&grid.0);
            let sampler = match path {
                Some(p) => Sampler::new(&model, &axes, (*p).into())?,
                None => Sampler::auto(&model, &axes)?,
            };
            std::fs::create_dir_all(out)?;
            for r in 0..*replicates {
                let field = sampler.sample(*seed, r);
                let manifest = Manifest {
                    dim: grid.0.len(),
                    shape: grid.0.clone(),
                    axes: axes.clone(),
                    seed: *seed,
                    model: model.name().to_string(),
                    params: model.params(),
                    replicate: r,
                    jitter: sampler.jitter().to_vec(),
                    data: String::new(),
                };
                write_snapshot(out, &format!("replicate_{r:04}"), &field, &manifest)?;
            }
            Ok(Outcome::Pass)
        }
        RunConfig::VerifyGrr {
            function,
            psi,
            p,
            grid,
            slack,
            pairs,
            b,
            seed,
            report,
        } => {
            let n = grid.0.len();
            let psi: YoungFunction = psi.parse()?;
            let moduli = parse_moduli(p, n)?;
            let field = GridField::from_fn(GridField::uniform_axes(&grid.0), |x| function.eval(x))?;
            let b_source = match b {
                BMode::Closed => BSource::ClosedForm(function.closed_form_b(&psi, &moduli)?),
                BMode::Estimated => BSource::Estimated,
            };
            let slack = slack.unwrap_or(b_source.default_slack());
            let (b_value, pass, details) = match pairs {
                None => {
                    let (b_value, summary) = verify_grr_on_grid(&field, psi, &moduli, slack, b_source)?;
                    let pass = summary.pass;
                    (b_value, pass, summary_json(&summary))
                }
                Some(count) => {
                    let pairs = random_node_pairs(&field, *count, *seed);
                    let prob = GrrProblem::new(ProblemField::Grid(&field), psi, moduli.clone())?;
                    let v = verify_grr(&prob, &pairs, slack, b_source)?;
                    (v.b, v.pass, serde_json::to_value(&v.checks)?)
                }
            };
            if let Some(path) = report {
                let doc = json!({
                    "schema": SCHEMA,
                    "function": function.value_name(),
                    "psi": psi_name(&psi),
                    "p": p,
                    "grid": grid.0,
                    "b": b_value,
                    "b_source": b_source,
                    "slack": slack,
                    "checks": details,
                    "pass": pass,
                });
                write_json(path, &doc)?;
            }
            Ok(if pass { Outcome::Pass } else { Outcome::Fail })
        }
        RunConfig::Holder {
            model,
            hurst,
            grids,
            replicates,
            seed,
            delta,
            form,
            alpha,
            slack,
            certificate_p,
            report,
            csv,
        } => {
            let dim = grids[0].0.len();
            if grids.iter().any(|g| g.0.len() != dim) {
                return parameter("all grids need the same dimension");
            }
            let model = build_model(*model, hurst, Some(dim))?;
            let modulus = LogModulatedModulus::named(form, hurst, *alpha)?;
            let certificate = if certificate_p.is_empty() {
                None
            } else {
                Some(CertificateSpec {
                    psi: YoungFunction::ExpQuarterSquare,
                    moduli: parse_moduli(certificate_p, dim)?,
                })
            };
            let spec = ExperimentSpec {
                model,
                modulus,
                delta_max: *delta,
                replicates: *replicates,
                seed: *seed,
                slack: *slack,
                certificate,
            };
            let shapes: Vec<Vec<usize>> = grids.iter().map(|g| g.0.clone()).collect();
            sweep(&spec, &shapes, report.as_deref(), csv.as_deref())
        }
        RunConfig::HeatHolder {
            t_grid,
            x_grid,
            alpha,
            delta,
            replicates,
            seed,
            report,
            csv,
        } => {
            if t_grid.len() != x_grid.len() {
                return parameter("--t-grid and --x-grid need the same number of entries");
            }
            let spec = ExperimentSpec {
                model: CovarianceModel::Heat,
                modulus: LogModulatedModulus::heat(*alpha)?,
                delta_max: *delta,
                replicates: *replicates,
                seed: *seed,
                slack: 0.0,
                certificate: None,
            };
            let shapes: Vec<Vec<usize>> = t_grid.iter().zip(x_grid).map(|(&t, &x)| vec![t, x]).collect();
            sweep(&spec, &shapes, report.as_deref(), csv.as_deref())
        }
        RunConfig::Cov { model, hurst, eval } => {
            let model = build_model(*model, hurst, None)?;
            let n = model.dim();
            if eval.len() != 2 * n {
                return parameter(format!("--eval needs {} numbers (x then y)", 2 * n));
            }
            println!("{:.6}", model.cov(&eval[..n], &eval[n..]));
            Ok(Outcome::Pass)
        }
    }
}

fn sweep(spec: &ExperimentSpec, shapes: &[Vec<usize>], report: Option<&Path>, csv: Option<&Path>) -> Result<Outcome> {
    let r = refinement_sweep(spec, shapes)?;
    if let Some(path) = report {
        write_json(path, &r)?;
    }
    if let Some(path) = csv {
        write_atomic(path, r.csv().as_bytes())?;
    }
    for g in &r.grids {
        let shape = GridSpec(g.shape.clone());
        eprintln!("grid {shape}: median {:.6e}, p95 {:.6e}", g.median, g.p95);
    }
    if r.refinement.unstable {
        eprintln!("note: median sup ratio grew by more than the heuristic band");
    }
    Ok(if r.pass { Outcome::Pass } else { Outcome::Fail })
}

fn psi_name(psi: &YoungFunction) -> String {
    match psi {
        YoungFunction::Power(a) => format!("pow:{a}"),
        YoungFunction::ExpQuarterSquare => "expq".into(),
    }
}

fn summary_json(s: &GridCheckSummary) -> serde_json::Value {
    serde_json::to_value(s).unwrap_or(serde_json::Value::Null)
}

fn random_node_pairs(field: &GridField, count: usize, seed: u64) -> Vec<PointPair> {
    let mut rng = replicate_rng(seed, 0);
    (0..count)
        .map(|_| {
            let mut pick = || {
                let idx: Vec<usize> = field.axes().iter().map(|a| rng.random_range(0..a.len())).collect();
                field.node(&idx)
            };
            let x = pick();
            let y = pick();
            PointPair::new(x, y).expect("same dimension")
        })
        .collect()
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("GRR_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::Parameter(format!("GRR_THREADS must be a positive integer, got '{v}'")))?;
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Parses, runs, prints the closing status line and returns the exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let start = Instant::now();
    let status_line = |sub: Option<&str>, seed: Option<u64>, status: &str| {
        let line = json!({
            "subcommand": sub,
            "seed": seed,
            "elapsed_ms": start.elapsed().as_millis() as u64,
            "status": status,
        });
        println!("{line}");
    };
    let config = match parse_args(argv) {
        Ok(c) => c,
        Err(ParseStop::Info(text)) => {
            print!("{text}");
            return EXIT_PASS;
        }
        Err(ParseStop::Usage(msg)) => {
            eprint!("{msg}");
            if !msg.ends_with('\n') {
                eprintln!();
            }
            status_line(None, None, "usage");
            return EXIT_USAGE;
        }
    };
    let result = configure_threads().and_then(|_| run(&config));
    let (code, status) = match result {
        Ok(Outcome::Pass) => (EXIT_PASS, "pass"),
        Ok(Outcome::Fail) => (EXIT_FAIL, "fail"),
        Err(e) => {
            eprintln!("error: {e}");
            let code = exit_code(&e);
            (
                code,
                match code {
                    EXIT_USAGE => "usage",
                    EXIT_IO => "io",
                    _ => "error",
                },
            )
        }
    };
    status_line(Some(config.name()), config.seed(), status);
    code
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> std::result::Result<RunConfig, ParseStop> {
        parse_args(std::iter::once("grr").chain(s.split_whitespace()))
    }

    #[test]
    fn simulate_example_parses_and_round_trips() {
        let c = parse("simulate --model fbm --hurst 0.3,0.7 --grid 33x33 --seed 42 --replicates 10 --out d/").unwrap();
        let back = parse_args(std::iter::once("grr".to_string()).chain(c.to_args())).unwrap();
        assert_eq!(back, c);
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), c);
    }

    #[test]
    fn bad_values_are_usage_errors() {
        for bad in [
            "holder --hurst 0.5,0.5 --grids 17x17 --delta 1.5",
            "holder --hurst 0.5,0.5 --grids 17x17 --replicates 0",
            "simulate --model fbm --hurst 1.2 --grid 9 --out d",
            "simulate --model fbm --hurst 0.5 --grid 9 --out d --bogus 1",
            "verify-grr --function prod --psi pow:x --p pow:1 --grid 9",
        ] {
            assert!(matches!(parse(bad), Err(ParseStop::Usage(_))), "{bad}");
        }
    }

    #[test]
    fn closed_form_b_for_prod() {
        let psi = YoungFunction::Power(4.0);
        let b = Builtin::Prod
            .closed_form_b(&psi, &[ModulusFunction::Power(1.0)])
            .unwrap();
        assert_eq!(b, 1.0);
        // α = 2, γ = ½: c = 1, 2/(2·3)
        let b = Builtin::Prod
            .closed_form_b(&YoungFunction::Power(2.0), &[ModulusFunction::Power(0.5)])
            .unwrap();
        assert!((b - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(Builtin::Zero.closed_form_b(&YoungFunction::ExpQuarterSquare, &[]).unwrap(), 1.0);
        assert!(Builtin::Quad.closed_form_b(&psi, &[ModulusFunction::Power(1.0)]).is_err());
    }

    #[test]
    fn heat_cov_evaluation() {
        let c = parse("cov --model heat --eval 1,0,1,0").unwrap();
        assert_eq!(run(&c).unwrap(), Outcome::Pass);
    }
}
