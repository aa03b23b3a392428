//! `dlab` — command-line driver for the weighted Diophantine approximation
//! laboratory.
//!
//! Every run prints a JSON summary with the resolved configuration, the tool
//! version, and the seed; `--out DIR` additionally writes `summary.json` and
//! the CSV artifacts into DIR. Identical (configuration, seed, version)
//! produce byte-identical output. Domain failures exit 1 with a
//! machine-readable error object; configuration problems exit 2.

mod render;

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dlab_core::bounds::{bound_corollary_suite, bound_fixed_xi, Scenario, XiVariant};
use dlab_core::covering::{box_counting_estimate, CoverParams, CoverRun, CoverState, StepRecord};
use dlab_core::diophantine::{
    best_approximation, div_fraction, emass_estimate, emass_estimate_rounded, trajectory,
    uniform_exponent_estimate,
};
use dlab_core::exact::linalg::{QMat, QVec};
use dlab_core::exact::{qi, qpow, Q};
use dlab_core::fractal::{ProductFractal, SimilarityIFS};
use dlab_core::height::{
    eta_from_zeta, ContractionCheck, ContractionReport, ContractionStatus, CriticalMc,
    CriticalReport, EtaProfile,
};
use dlab_core::lattice::{AffineLattice, DEFAULT_BUDGET};
use dlab_core::weights::{parse_q, parse_q_list, FlowTime, Weights};
use num_traits::{One, ToPrimitive, Zero};
use render::{
    big_list, bound_report_json, emit, f64_cell, f64_json, linreal_json, linreal_str, norm_json,
    q_list, q_str, qf, shortvec_json, Artifact,
};
use serde_json::{json, Map, Value};

const VERSION: &str = env!("CARGO_PKG_VERSION");
const SCHEMA: u32 = 1;

#[derive(Parser)]
#[command(
    name = "dlab",
    version,
    about = "Weighted inhomogeneous Diophantine approximation laboratory",
    propagate_version = true
)]
struct Cli {
    /// Flat `key = value` config file supplying any flag not given on the
    /// command line; `command = <name>` supplies the subcommand itself.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Weight system: `m=2,n=1` for equal weights, or explicit exact vectors
    /// `a=2/3,1/3;b=1` (each summing to 1, nonincreasing).
    #[arg(long, global = true, env = "DLAB_WEIGHTS")]
    weights: Option<String>,
    /// Fractal system(s): `dim=1 c=1/3 maps=(+1,0),(+1,2/3)`, a preset name
    /// (middle-thirds, middle-fifths, unit-interval), or several such
    /// separated by `|`.
    #[arg(long, global = true, env = "DLAB_FRACTAL")]
    fractal: Option<String>,
    /// Seed for every randomized routine.
    #[arg(long, global = true, env = "DLAB_SEED", default_value_t = 0)]
    seed: u64,
    /// Input precision in bits: where supported, a θ given as a decimal is
    /// treated as a midpoint with uncertainty max(half-ulp, 2^-prec).
    #[arg(long, global = true, env = "DLAB_PREC")]
    prec: Option<u32>,
    /// Directory for summary.json and CSV artifacts (default: stdout only).
    #[arg(long, global = true, env = "DLAB_OUT")]
    out: Option<PathBuf>,
    /// Worker threads for the exact kernels (default: all cores).
    #[arg(long, global = true, env = "DLAB_THREADS")]
    threads: Option<usize>,
    /// Search budget for shortest-vector enumerations.
    #[arg(long, global = true, env = "DLAB_BUDGET")]
    budget: Option<u64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Best weighted approximations and the exponent curve ω(T) on a
    /// geometric horizon grid.
    Exponent {
        /// Matrix part θ: rows separated by `;`, exact entries by `,`.
        #[arg(long)]
        theta: String,
        /// Shift ξ (m exact entries; default all zero, the homogeneous case).
        #[arg(long)]
        xi: Option<String>,
        /// First horizon (exact rational > 1).
        #[arg(long, default_value = "2")]
        t_min: String,
        /// Geometric factor between horizons (exact rational > 1).
        #[arg(long, default_value = "2")]
        t_factor: String,
        /// Number of horizons on the grid.
        #[arg(long, default_value_t = 8)]
        t_count: usize,
    },
    /// Shortest-vector series λ₀/λ̃₀ along the diagonal flow.
    Trajectory {
        #[arg(long)]
        theta: String,
        #[arg(long)]
        xi: Option<String>,
        /// Flow step τ (exact rational > 1).
        #[arg(long, default_value = "3")]
        t: String,
        /// Number of flow steps.
        #[arg(long = "N")]
        n: usize,
    },
    /// Escape-of-mass fraction: how often λ₀ drops below ε along the flow.
    Emass {
        #[arg(long)]
        theta: String,
        #[arg(long)]
        xi: Option<String>,
        /// Flow step τ (exact rational > 1).
        #[arg(long, default_value = "3")]
        t: String,
        /// Number of flow steps.
        #[arg(long = "N")]
        n: usize,
        /// Thinness threshold ε (exact rational in (0,1)).
        #[arg(long)]
        eps: String,
    },
    /// Fraction of a continuous-time grid on which the affine orbit is
    /// ε-deep (divergence indicator).
    Divfrac {
        #[arg(long)]
        theta: String,
        #[arg(long)]
        xi: Option<String>,
        /// Depth threshold ε (exact rational).
        #[arg(long)]
        eps: String,
        /// Continuous-time horizon.
        #[arg(long)]
        horizon: f64,
        /// Grid resolution: flow times advance by ln(1 + 1/⌈1/step⌉).
        #[arg(long, default_value_t = 0.1)]
        step: f64,
    },
    /// Covering refinement run: per-step measure recursion, the horizon
    /// inequality, and optionally the aggregate covering-count bound.
    Cover {
        #[arg(long)]
        theta: String,
        /// Flow step τ; the refinement base is t = τ^D.
        #[arg(long, default_value = "3")]
        tau: String,
        /// Target thinness ε.
        #[arg(long)]
        eps: String,
        /// Cell half-width δ.
        #[arg(long)]
        delta: String,
        /// Committed fraction q′ ∈ (0, 1].
        #[arg(long)]
        q_prime: String,
        /// Number of refinement steps.
        #[arg(long)]
        horizon: usize,
        /// Steps committed up front.
        #[arg(long)]
        commit: usize,
        /// Block sizes, comma-separated (default: maximal runs of equal top
        /// weights).
        #[arg(long)]
        sizes: Option<String>,
        /// Ball scale γ ∈ (0, 2δ) for the aggregate count bound.
        #[arg(long)]
        gamma: Option<String>,
        /// Pivot block for the count bound.
        #[arg(long, default_value_t = 0)]
        pivot: usize,
    },
    /// Monte-Carlo audit of the one-step height contraction inequality.
    HeightVerify {
        #[arg(long)]
        theta: String,
        #[arg(long)]
        xi: Option<String>,
        /// Flow step τ (exact rational > 1).
        #[arg(long)]
        tau: String,
        /// Contraction exponents η₁,…,η_{d−1} (exact rationals).
        #[arg(long)]
        eta: Option<String>,
        /// Critical-exponent lower bounds ζ₁,…,ζ_{d−1}; η is derived from
        /// them with `--slack`.
        #[arg(long)]
        zeta: Option<String>,
        /// Relative slack when deriving η from ζ.
        #[arg(long, default_value = "1/4")]
        slack: String,
        /// Height cutoff ε ∈ (0, 1).
        #[arg(long)]
        eps: String,
        /// Sampling scales, one exact rational per grid cell (default all 1).
        #[arg(long)]
        scales: Option<String>,
        /// Monte-Carlo sample count (≥ 100).
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        /// Coding depth of the sampled measure.
        #[arg(long)]
        depth: Option<usize>,
        /// Pilot-stream size used to calibrate the decay constant.
        #[arg(long)]
        pilot: Option<usize>,
    },
    /// Critical-exponent Monte-Carlo for the expansion integrals
    /// ∫‖π(u(θ)v)‖^{−γ} dμ.
    Zeta {
        /// Exterior-power level l (1 ≤ l ≤ d−1).
        #[arg(long, default_value_t = 1)]
        l: usize,
        /// Integrand exponent γ > 0 (exact rational).
        #[arg(long)]
        gamma: String,
        /// Sampling scales, one exact rational per grid cell (default all 1).
        #[arg(long)]
        scales: Option<String>,
        /// Monte-Carlo sample count (≥ 80).
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        /// Coding depth of the sampled measure.
        #[arg(long)]
        depth: Option<usize>,
    },
    /// Closed-form dimension bounds with parent-formula cross-checks.
    Bound {
        /// Named preset: `cheung`, or `equal-M-N` (e.g. equal-2-1).
        #[arg(long, conflicts_with = "scenario")]
        preset: Option<String>,
        /// Scenario: zero-escape | equal-weights | cube | cantor | omega |
        /// fixed-xi (the last evaluates the general bound directly).
        #[arg(long)]
        scenario: Option<String>,
        /// Density exponent q ∈ (0, 1].
        #[arg(long, default_value = "1")]
        q: String,
        /// Escape-of-mass average E ∈ [0, 1] (equal-weights scenario).
        #[arg(long)]
        emass: Option<String>,
        /// Uniform-approximation exponent ω ≥ 0 (omega / fixed-xi).
        #[arg(long)]
        omega: Option<String>,
        /// Explicit η profile for the fixed-xi scenario.
        #[arg(long)]
        eta: Option<String>,
    },
    /// Iterated-function-system inspection: dimension data, cylinder
    /// enumeration, measure samples, box-counting regression.
    Ifs {
        /// Enumerate all cylinders at this depth.
        #[arg(long)]
        cylinders: Option<usize>,
        /// Draw this many measure samples.
        #[arg(long)]
        samples: Option<usize>,
        /// Coding depth for the samples.
        #[arg(long, default_value_t = 16)]
        depth: usize,
        /// Box-counting regression over cylinder centers to this depth.
        #[arg(long)]
        box_depth: Option<usize>,
    },
}

enum Failure {
    Config(String),
    Domain { kind: &'static str, message: String },
}

impl Failure {
    fn domain(kind: &'static str, message: impl Into<String>) -> Self {
        Failure::Domain {
            kind,
            message: message.into(),
        }
    }
}

impl From<dlab_core::Error> for Failure {
    fn from(e: dlab_core::Error) -> Self {
        use dlab_core::Error as E;
        let kind = match &e {
            E::Parse(_) => return Failure::Config(e.to_string()),
            E::InvalidWeights(_) => "invalid-weights",
            E::DimensionMismatch(_) => "dimension-mismatch",
            E::Singular(_) => "singular",
            E::PremiseViolation(_) => "premise-violation",
            E::OscViolated(_) => "osc-violated",
            E::InvalidIfs(_) => "invalid-ifs",
            E::ScaleOutOfRange(_) => "scale-out-of-range",
            E::InfeasibleEta(_) => "infeasible-eta",
            E::NonRationalEta(_) => "non-rational-eta",
            E::CoveringInvariant(_) => "covering-invariant",
            E::CalibrationFailed(_) => "calibration-failed",
            E::Domain(_) => "domain",
        };
        Failure::Domain {
            kind,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::domain("io", e.to_string())
    }
}

fn main() -> ExitCode {
    let argv = match expand_argv(std::env::args().collect()) {
        Ok(v) => v,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::parse_from(argv);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Domain { kind, message }) => {
            let err = json!({
                "tool": "dlab",
                "version": VERSION,
                "error": { "kind": kind, "message": message },
            });
            println!(
                "{}",
                serde_json::to_string_pretty(&err).expect("error object serializes")
            );
            eprintln!("error ({kind}): {message}");
            ExitCode::from(1)
        }
    }
}

const SUBCOMMANDS: &[&str] = &[
    "exponent",
    "trajectory",
    "emass",
    "divfrac",
    "cover",
    "height-verify",
    "zeta",
    "bound",
    "ifs",
];

/// Merge a `key = value` config file into the argument list: the subcommand
/// comes from the `command` key when none is present, and each other key
/// becomes `--key value` unless that flag was given explicitly (explicit
/// flags win).
fn expand_argv(mut argv: Vec<String>) -> Result<Vec<String>, String> {
    let mut cfg_path: Option<String> = None;
    let mut i = 1;
    while i < argv.len() {
        if argv[i] == "--config" {
            cfg_path = argv.get(i + 1).cloned();
            i += 2;
        } else if let Some(rest) = argv[i].strip_prefix("--config=") {
            cfg_path = Some(rest.to_string());
            i += 1;
        } else {
            i += 1;
        }
    }
    if cfg_path.is_none() {
        cfg_path = std::env::var("DLAB_CONFIG").ok();
    }
    let Some(path) = cfg_path else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| format!("cannot read config file {path}: {e}"))?;

    let mut command: Option<String> = None;
    let mut pairs: Vec<(String, String)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("{path}:{}: expected `key = value`", lineno + 1))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(format!("{path}:{}: empty key or value", lineno + 1));
        }
        if k == "command" {
            command = Some(v.to_string());
        } else {
            pairs.push((k.to_string(), v.to_string()));
        }
    }

    // Locate the subcommand token, treating every `--flag` before it as
    // value-taking unless it is a bare help/version switch.
    const BARE: &[&str] = &["--help", "-h", "--version", "-V"];
    let mut has_sub = false;
    let mut j = 1;
    while j < argv.len() {
        let tok = argv[j].clone();
        if tok.starts_with("--") {
            if BARE.contains(&tok.as_str()) || tok.contains('=') {
                j += 1;
            } else {
                j += 2;
            }
        } else if tok.starts_with('-') {
            j += 1;
        } else {
            has_sub = SUBCOMMANDS.contains(&tok.as_str());
            break;
        }
    }
    if !has_sub && j >= argv.len() {
        if let Some(cmd) = command {
            if !SUBCOMMANDS.contains(&cmd.as_str()) {
                return Err(format!("{path}: unknown command `{cmd}`"));
            }
            argv.push(cmd);
        }
    }

    let present: HashSet<String> = argv
        .iter()
        .filter_map(|t| t.strip_prefix("--"))
        .map(|t| t.split('=').next().unwrap_or(t).to_string())
        .collect();
    for (k, v) in pairs {
        if present.contains(&k) {
            continue;
        }
        match v.as_str() {
            "true" => argv.push(format!("--{k}")),
            "false" => {}
            _ => {
                argv.push(format!("--{k}"));
                argv.push(v);
            }
        }
    }
    Ok(argv)
}

/// Resolved global context shared by the runners.
struct Ctx {
    weights: Weights,
    seed: u64,
    prec: Option<u32>,
    budget: u64,
    fractal: Option<String>,
}

type RunOutput = (BTreeMap<String, String>, Value, Vec<Artifact>);

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .ok();
    }
    let ctx = Ctx {
        weights: parse_weights(cli.weights.as_deref().unwrap_or("m=1,n=1"))?,
        seed: cli.seed,
        prec: cli.prec,
        budget: cli.budget.unwrap_or(DEFAULT_BUDGET),
        fractal: cli.fractal.clone(),
    };

    let (name, (mut echo, result, artifacts)) = match &cli.cmd {
        Cmd::Exponent {
            theta,
            xi,
            t_min,
            t_factor,
            t_count,
        } => (
            "exponent",
            cmd_exponent(&ctx, theta, xi.as_deref(), t_min, t_factor, *t_count)?,
        ),
        Cmd::Trajectory { theta, xi, t, n } => {
            ("trajectory", cmd_trajectory(&ctx, theta, xi.as_deref(), t, *n)?)
        }
        Cmd::Emass {
            theta,
            xi,
            t,
            n,
            eps,
        } => ("emass", cmd_emass(&ctx, theta, xi.as_deref(), t, *n, eps)?),
        Cmd::Divfrac {
            theta,
            xi,
            eps,
            horizon,
            step,
        } => (
            "divfrac",
            cmd_divfrac(&ctx, theta, xi.as_deref(), eps, *horizon, *step)?,
        ),
        Cmd::Cover {
            theta,
            tau,
            eps,
            delta,
            q_prime,
            horizon,
            commit,
            sizes,
            gamma,
            pivot,
        } => (
            "cover",
            cmd_cover(
                &ctx,
                theta,
                tau,
                eps,
                delta,
                q_prime,
                *horizon,
                *commit,
                sizes.as_deref(),
                gamma.as_deref(),
                *pivot,
            )?,
        ),
        Cmd::HeightVerify {
            theta,
            xi,
            tau,
            eta,
            zeta,
            slack,
            eps,
            scales,
            samples,
            depth,
            pilot,
        } => (
            "height-verify",
            cmd_height_verify(
                &ctx,
                theta,
                xi.as_deref(),
                tau,
                eta.as_deref(),
                zeta.as_deref(),
                slack,
                eps,
                scales.as_deref(),
                *samples,
                *depth,
                *pilot,
            )?,
        ),
        Cmd::Zeta {
            l,
            gamma,
            scales,
            samples,
            depth,
        } => (
            "zeta",
            cmd_zeta(&ctx, *l, gamma, scales.as_deref(), *samples, *depth)?,
        ),
        Cmd::Bound {
            preset,
            scenario,
            q,
            emass,
            omega,
            eta,
        } => (
            "bound",
            cmd_bound(
                &ctx,
                preset.as_deref(),
                scenario.as_deref(),
                q,
                emass.as_deref(),
                omega.as_deref(),
                eta.as_deref(),
            )?,
        ),
        Cmd::Ifs {
            cylinders,
            samples,
            depth,
            box_depth,
        } => (
            "ifs",
            cmd_ifs(&ctx, *cylinders, *samples, *depth, *box_depth)?,
        ),
    };

    echo.insert("budget".into(), ctx.budget.to_string());
    if let Some(p) = ctx.prec {
        echo.entry("prec".into()).or_insert_with(|| p.to_string());
    }
    if let Some(o) = &cli.out {
        echo.insert("out".into(), o.display().to_string());
    }
    if let Some(t) = cli.threads {
        echo.insert("threads".into(), t.to_string());
    }

    let mut summary = Map::new();
    summary.insert("tool".into(), json!("dlab"));
    summary.insert("version".into(), json!(VERSION));
    summary.insert("schema".into(), json!(SCHEMA));
    summary.insert("command".into(), json!(name));
    summary.insert("seed".into(), json!(ctx.seed));
    let config: Map<String, Value> = echo
        .into_iter()
        .map(|(k, v)| (k, Value::String(v)))
        .collect();
    summary.insert("config".into(), Value::Object(config));
    summary.insert("result".into(), result);

    emit(summary, artifacts, cli.out.as_deref())?;
    Ok(())
}

// ---------------------------------------------------------------------------
// input parsing

fn parse_weights(spec: &str) -> Result<Weights, Failure> {
    let spec = spec.trim();
    if spec.contains("a=") || spec.contains("b=") {
        let mut a: Option<Vec<Q>> = None;
        let mut b: Option<Vec<Q>> = None;
        for part in spec.split(';') {
            let (k, v) = part
                .trim()
                .split_once('=')
                .ok_or_else(|| Failure::Config(format!("weights: expected `a=…;b=…`, got `{spec}`")))?;
            match k.trim() {
                "a" => a = Some(parse_q_list(v)?),
                "b" => b = Some(parse_q_list(v)?),
                other => {
                    return Err(Failure::Config(format!(
                        "weights: unknown key `{other}` in `{spec}`"
                    )))
                }
            }
        }
        let a = a.ok_or_else(|| Failure::Config("weights: missing `a=`".into()))?;
        let b = b.ok_or_else(|| Failure::Config("weights: missing `b=`".into()))?;
        Ok(Weights::new(a, b)?)
    } else {
        let mut m: Option<usize> = None;
        let mut n: Option<usize> = None;
        for part in spec.split(',') {
            let (k, v) = part
                .trim()
                .split_once('=')
                .ok_or_else(|| Failure::Config(format!("weights: expected `m=…,n=…`, got `{spec}`")))?;
            let val: usize = v
                .trim()
                .parse()
                .map_err(|_| Failure::Config(format!("weights: bad count `{v}`")))?;
            match k.trim() {
                "m" => m = Some(val),
                "n" => n = Some(val),
                other => {
                    return Err(Failure::Config(format!(
                        "weights: unknown key `{other}` in `{spec}`"
                    )))
                }
            }
        }
        let m = m.ok_or_else(|| Failure::Config("weights: missing `m=`".into()))?;
        let n = n.ok_or_else(|| Failure::Config("weights: missing `n=`".into()))?;
        if m == 0 || n == 0 {
            return Err(Failure::Config("weights: m and n must be ≥ 1".into()));
        }
        Ok(Weights::equal(m, n))
    }
}

fn weights_echo(w: &Weights) -> String {
    let a: Vec<String> = w.a.iter().map(q_str).collect();
    let b: Vec<String> = w.b.iter().map(q_str).collect();
    format!("a={};b={}", a.join(","), b.join(","))
}

/// Parse θ as m rows of n exact entries (`;` between rows, `,` inside).
fn parse_theta(spec: &str, m: usize, n: usize) -> Result<(QMat, String), Failure> {
    let mut rows: Vec<QVec> = Vec::new();
    for part in spec.split(';') {
        rows.push(parse_q_list(part)?);
    }
    if rows.len() != m || rows.iter().any(|r| r.len() != n) {
        return Err(Failure::Config(format!(
            "theta: expected {m} row(s) of {n} entr(ies), got `{spec}`"
        )));
    }
    let echo = rows
        .iter()
        .map(|r| r.iter().map(q_str).collect::<Vec<_>>().join(","))
        .collect::<Vec<_>>()
        .join(";");
    Ok((QMat::from_rows(rows), echo))
}

fn parse_xi(spec: Option<&str>, m: usize) -> Result<Vec<Q>, Failure> {
    match spec {
        None => Ok(vec![Q::zero(); m]),
        Some(s) => {
            let xi = parse_q_list(s)?;
            if xi.len() != m {
                return Err(Failure::Config(format!(
                    "xi: expected {m} entr(ies), got `{s}`"
                )));
            }
            Ok(xi)
        }
    }
}

fn xi_echo(xi: &[Q]) -> String {
    xi.iter().map(q_str).collect::<Vec<_>>().join(",")
}

fn parse_one_ifs(spec: &str) -> Result<SimilarityIFS, Failure> {
    match spec.trim() {
        "middle-thirds" => Ok(SimilarityIFS::middle_thirds()),
        "middle-fifths" => Ok(SimilarityIFS::middle_fifths()),
        "unit-interval" => Ok(SimilarityIFS::unit_interval()),
        other => Ok(SimilarityIFS::parse(other)?),
    }
}

fn parse_factors(spec: &str) -> Result<Vec<SimilarityIFS>, Failure> {
    spec.split('|').map(parse_one_ifs).collect()
}

fn need_fractal<'a>(ctx: &'a Ctx, what: &str) -> Result<&'a str, Failure> {
    ctx.fractal
        .as_deref()
        .ok_or_else(|| Failure::Config(format!("{what} needs --fractal")))
}

/// Build the m×n sampling grid from a fractal spec: a single system is used
/// at every cell, a `|`-list must supply one system per cell (row-major).
fn parse_grid(spec: &str, m: usize, n: usize) -> Result<ProductFractal, Failure> {
    let factors = parse_factors(spec)?;
    if factors.len() == 1 {
        Ok(ProductFractal::uniform_grid(m, n, &factors[0])?)
    } else if factors.len() == m * n {
        Ok(ProductFractal::grid(m, n, factors)?)
    } else {
        Err(Failure::Config(format!(
            "fractal: need 1 or {}·{} systems, got {}",
            m,
            n,
            factors.len()
        )))
    }
}

fn parse_q_flag(name: &str, s: &str) -> Result<Q, Failure> {
    parse_q(s).map_err(|e| Failure::Config(format!("--{name}: {e}")))
}

fn parse_scales(spec: Option<&str>, cells: usize) -> Result<Vec<Q>, Failure> {
    match spec {
        None => Ok(vec![Q::one(); cells]),
        Some(s) => {
            let v = parse_q_list(s)?;
            if v.len() != cells {
                return Err(Failure::Config(format!(
                    "scales: expected {cells} entr(ies), got `{s}`"
                )));
            }
            Ok(v)
        }
    }
}

/// Half of the last printed digit of the widest decimal entry in a θ spec;
/// zero when every entry is written as an exact fraction or integer.
fn half_ulp(spec: &str) -> Q {
    let mut best = Q::zero();
    for token in spec.split([';', ',']) {
        let token = token.trim();
        if let Some((_, frac)) = token.split_once('.') {
            let digits = frac.trim().len() as i64;
            let ulp = qpow(&qi(10), -digits) / qi(2);
            if ulp > best {
                best = ulp;
            }
        }
    }
    best
}

// ---------------------------------------------------------------------------
// runners

fn cmd_exponent(
    ctx: &Ctx,
    theta_s: &str,
    xi_s: Option<&str>,
    t_min: &str,
    t_factor: &str,
    t_count: usize,
) -> Result<RunOutput, Failure> {
    let w = &ctx.weights;
    let (theta, theta_echo) = parse_theta(theta_s, w.m, w.n)?;
    let xi = parse_xi(xi_s, w.m)?;
    let t_min = parse_q_flag("t-min", t_min)?;
    let t_factor = parse_q_flag("t-factor", t_factor)?;
    if t_count == 0 {
        return Err(Failure::Config("--t-count must be ≥ 1".into()));
    }
    let mut grid = Vec::with_capacity(t_count);
    let mut t = t_min.clone();
    for _ in 0..t_count {
        grid.push(t.clone());
        t = &t * &t_factor;
    }

    let est = uniform_exponent_estimate(w, &theta, &xi, &grid)?;
    let best = best_approximation(w, &theta, &xi, grid.last().expect("nonempty grid"))?;

    let points: Vec<Value> = est
        .points
        .iter()
        .map(|p| {
            json!({
                "t": q_str(&p.t),
                "residual_ln": f64_json(p.residual_ln),
                "omega": f64_json(p.omega),
                "exact_zero": p.exact_zero,
            })
        })
        .collect();
    let result = json!({
        "omega_hat": f64_json(est.omega_hat),
        "rational_flag": est.rational_flag,
        "tail_infimum": est.tail_infimum.iter().map(|x| f64_json(*x)).collect::<Vec<_>>(),
        "points": points,
        "best": {
            "t_bound": q_str(&best.t_bound),
            "p": big_list(&best.p),
            "q": big_list(&best.q),
            "residual": norm_json(&best.residual),
            "q_norm": norm_json(&best.q_norm),
        },
    });

    let mut csv = String::from("t,residual_ln,omega,exact_zero\n");
    for p in &est.points {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            q_str(&p.t),
            f64_cell(p.residual_ln),
            f64_cell(p.omega),
            u8::from(p.exact_zero)
        );
    }
    let artifact = Artifact {
        name: "omega.csv",
        csv,
        columns: &[
            ("t", "approximation horizon T, exact rational"),
            (
                "residual_ln",
                "natural log of the best weighted residual at horizon T (-inf at an exact solution)",
            ),
            (
                "omega",
                "finite-horizon exponent ω(T) = −1 − ln(residual)/ln(T) (inf at an exact solution)",
            ),
            ("exact_zero", "1 when the residual is exactly zero"),
        ],
    };

    let mut echo = BTreeMap::new();
    echo.insert("weights".into(), weights_echo(w));
    echo.insert("theta".into(), theta_echo);
    echo.insert("xi".into(), xi_echo(&xi));
    echo.insert("t-min".into(), q_str(&t_min));
    echo.insert("t-factor".into(), q_str(&t_factor));
    echo.insert("t-count".into(), t_count.to_string());
    Ok((echo, result, vec![artifact]))
}

fn cmd_trajectory(
    ctx: &Ctx,
    theta_s: &str,
    xi_s: Option<&str>,
    t_s: &str,
    n: usize,
) -> Result<RunOutput, Failure> {
    let w = &ctx.weights;
    let (theta, theta_echo) = parse_theta(theta_s, w.m, w.n)?;
    let xi = parse_xi(xi_s, w.m)?;
    let tau = parse_q_flag("t", t_s)?;
    let time = FlowTime::exact(tau.clone())?;
    let x = AffineLattice::from_theta_xi(w, &theta, &xi)?;
    let points = trajectory(w, &x, &time, n, ctx.budget)?;

    let rows: Vec<Value> = points
        .iter()
        .map(|p| {
            json!({
                "k": p.k,
                "lambda0": shortvec_json(&p.lambda0),
                "lambda0_affine": shortvec_json(&p.lambda0_affine),
            })
        })
        .collect();
    let result = json!({ "points": rows });

    let mut csv = String::from(
        "k,lambda0,lambda0_f64,lambda0_ln,lambda0_affine,lambda0_affine_f64,lambda0_affine_ln\n",
    );
    for p in &points {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            p.k,
            render::norm_exact_cell(&p.lambda0.value),
            f64_cell(p.lambda0.value.to_f64()),
            f64_cell(p.lambda0.value.ln_f64()),
            render::norm_exact_cell(&p.lambda0_affine.value),
            f64_cell(p.lambda0_affine.value.to_f64()),
            f64_cell(p.lambda0_affine.value.ln_f64()),
        );
    }
    let artifact = Artifact {
        name: "trajectory.csv",
        csv,
        columns: &[
            ("k", "flow step index, starting at 1"),
            ("lambda0", "shortest nonzero lattice-vector quasi-norm, exact rational (empty when irrational)"),
            ("lambda0_f64", "the same as a float"),
            ("lambda0_ln", "natural log of lambda0 (-inf when the norm is 0)"),
            ("lambda0_affine", "shortest affine (shifted) vector quasi-norm, exact rational (empty when irrational)"),
            ("lambda0_affine_f64", "the same as a float"),
            ("lambda0_affine_ln", "natural log of lambda0_affine (-inf when the norm is 0)"),
        ],
    };

    let mut echo = BTreeMap::new();
    echo.insert("weights".into(), weights_echo(w));
    echo.insert("theta".into(), theta_echo);
    echo.insert("xi".into(), xi_echo(&xi));
    echo.insert("t".into(), q_str(&tau));
    echo.insert("N".into(), n.to_string());
    Ok((echo, result, vec![artifact]))
}

fn cmd_emass(
    ctx: &Ctx,
    theta_s: &str,
    xi_s: Option<&str>,
    t_s: &str,
    n: usize,
    eps_s: &str,
) -> Result<RunOutput, Failure> {
    let w = &ctx.weights;
    let (theta, theta_echo) = parse_theta(theta_s, w.m, w.n)?;
    let tau = parse_q_flag("t", t_s)?;
    let time = FlowTime::exact(tau.clone())?;
    let eps = parse_q_flag("eps", eps_s)?;

    let mut echo = BTreeMap::new();
    echo.insert("weights".into(), weights_echo(w));
    echo.insert("theta".into(), theta_echo);
    echo.insert("t".into(), q_str(&tau));
    echo.insert("N".into(), n.to_string());
    echo.insert("eps".into(), q_str(&eps));

    let result = match ctx.prec {
        None => {
            let xi = parse_xi(xi_s, w.m)?;
            echo.insert("xi".into(), xi_echo(&xi));
            let x = AffineLattice::from_theta_xi(w, &theta, &xi)?;
            let est = emass_estimate(w, &x, &time, &eps, n, ctx.budget)?;
            json!({
                "mode": "exact",
                "fraction": q_str(&est.fraction),
                "fraction_f64": f64_json(qf(&est.fraction)),
                "lower_fraction": q_str(&est.lower_fraction),
                "upper_fraction": q_str(&est.upper_fraction),
                "count": est.count,
                "count_tight": est.count_tight,
                "count_loose": est.count_loose,
                "epsilon": q_str(&est.epsilon),
                "N": est.n,
            })
        }
        Some(prec) => {
            let xi = parse_xi(xi_s, w.m)?;
            if xi.iter().any(|v| !v.is_zero()) {
                return Err(Failure::domain(
                    "domain",
                    "finite-precision escape counts are homogeneous: --xi must be absent or zero",
                ));
            }
            let floor = qpow(&qi(2), -(prec as i64));
            let hu = half_ulp(theta_s);
            let radius = if hu > floor { hu } else { floor };
            echo.insert("prec".into(), prec.to_string());
            echo.insert("radius".into(), q_str(&radius));
            let est = emass_estimate_rounded(w, &theta, &radius, &time, &eps, n, ctx.budget)?;
            json!({
                "mode": "rounded",
                "radius": q_str(&radius),
                "fraction": q_str(&est.certified_fraction),
                "fraction_f64": f64_json(qf(&est.certified_fraction)),
                "possible_fraction": q_str(&est.possible_fraction),
                "possible_fraction_f64": f64_json(qf(&est.possible_fraction)),
                "certified_below": est.certified_below,
                "certified_above": est.certified_above,
                "ambiguous": est.ambiguous,
                "epsilon": q_str(&est.epsilon),
                "N": est.n,
            })
        }
    };
    Ok((echo, result, Vec::new()))
}

fn cmd_divfrac(
    ctx: &Ctx,
    theta_s: &str,
    xi_s: Option<&str>,
    eps_s: &str,
    horizon: f64,
    step: f64,
) -> Result<RunOutput, Failure> {
    let w = &ctx.weights;
    let (theta, theta_echo) = parse_theta(theta_s, w.m, w.n)?;
    let xi = parse_xi(xi_s, w.m)?;
    let eps = parse_q_flag("eps", eps_s)?;
    let report = div_fraction(w, &theta, &xi, &eps, horizon, step, ctx.budget)?;

    let result = json!({
        "fraction": f64_json(report.fraction),
        "count": report.count,
        "total": report.total,
        "grid_ratio": q_str(&report.grid_ratio),
    });
    let mut echo = BTreeMap::new();
    echo.insert("weights".into(), weights_echo(w));
    echo.insert("theta".into(), theta_echo);
    echo.insert("xi".into(), xi_echo(&xi));
    echo.insert("eps".into(), q_str(&eps));
    echo.insert("horizon".into(), f64_cell(horizon));
    echo.insert("step".into(), f64_cell(step));
    Ok((echo, result, Vec::new()))
}

fn step_record_json(r: &StepRecord) -> Value {
    json!({
        "step": r.step,
        "committed": r.committed,
        "compact": r.compact,
        "contracted": r.contracted,
        "nodes": r.nodes,
        "alive": r.alive,
        "max_children": r.max_children,
        "alive_sum": q_str(&r.alive_sum),
        "recorded_sum": q_str(&r.recorded_sum),
    })
}

fn steps_csv(state: &CoverState) -> String {
    let mut csv = String::from(
        "step,committed,compact,contracted,nodes,alive,max_children,alive_sum,recorded_sum\n",
    );
    for r in &state.log {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{}",
            r.step,
            u8::from(r.committed),
            u8::from(r.compact),
            u8::from(r.contracted),
            r.nodes,
            r.alive,
            r.max_children,
            q_str(&r.alive_sum),
            q_str(&r.recorded_sum),
        );
    }
    csv
}

#[allow(clippy::too_many_arguments)]
fn cmd_cover(
    ctx: &Ctx,
    theta_s: &str,
    tau_s: &str,
    eps_s: &str,
    delta_s: &str,
    q_prime_s: &str,
    horizon: usize,
    commit: usize,
    sizes_s: Option<&str>,
    gamma_s: Option<&str>,
    pivot: usize,
) -> Result<RunOutput, Failure> {
    let w = &ctx.weights;
    let (theta, theta_echo) = parse_theta(theta_s, w.m, w.n)?;
    let tau = parse_q_flag("tau", tau_s)?;
    let time = FlowTime::exact(tau.clone())?;
    let eps = parse_q_flag("eps", eps_s)?;
    let delta = parse_q_flag("delta", delta_s)?;
    let q_prime = parse_q_flag("q-prime", q_prime_s)?;
    let d_exp = w
        .common_denominator()
        .to_i64()
        .ok_or_else(|| Failure::domain("domain", "weight denominator too large for the flow step"))?;
    let t_base = qpow(&tau, d_exp);

    let params = match sizes_s {
        Some(s) => {
            let sizes: Vec<usize> = s
                .split(',')
                .map(|x| {
                    x.trim()
                        .parse::<usize>()
                        .map_err(|_| Failure::Config(format!("sizes: bad entry `{x}`")))
                })
                .collect::<Result<_, _>>()?;
            CoverParams::new(
                w,
                &sizes,
                t_base.clone(),
                eps.clone(),
                delta.clone(),
                q_prime.clone(),
                horizon,
                commit,
            )?
        }
        None => CoverParams::grouped(
            w,
            t_base.clone(),
            eps.clone(),
            delta.clone(),
            q_prime.clone(),
            horizon,
            commit,
        )?,
    };
    let sizes_echo: Vec<String> = params.groups.iter().map(|g| g.size.to_string()).collect();

    let factors = parse_factors(need_fractal(ctx, "cover")?)?;
    let fractal = ProductFractal::product(factors)?;
    let run = CoverRun::new(params, w.clone(), time, theta, fractal, ctx.seed)?;
    let traj = run.trajectory()?;
    let (state, cover_csv) = run.run_cover_csv(&traj)?;
    let horizon_ok = run.horizon_bound_holds(&state)?;

    let bound = match gamma_s {
        Some(g) => {
            let gamma = parse_q_flag("gamma", g)?;
            let b = run.cover_count_bound(pivot, state.compact_steps.len(), &gamma)?;
            Some(json!({
                "gamma": q_str(&b.gamma),
                "scale_steps": b.scale_steps,
                "pivot": b.pivot,
                "quotient": f64_json(b.quotient),
                "limit": linreal_json(&b.limit),
                "d_ln": f64_json(b.d_ln),
                "b": b.b.to_string(),
                "ball_limit": b.ball_limit,
                "lambda": b.lambda.iter().map(|x| f64_json(*x)).collect::<Vec<_>>(),
            }))
        }
        None => None,
    };

    let result = json!({
        "t": q_str(&t_base),
        "horizon_bound_holds": horizon_ok,
        "final": {
            "step": state.step,
            "depths": state.depths.iter().map(|d| d.value).collect::<Vec<_>>(),
            "nodes": state.nodes.len(),
            "alive": state.alive_count(),
            "alive_sum": q_str(&state.alive_sum),
            "recorded_sum": q_str(&state.recorded_sum),
            "committed_steps": state.committed_steps,
            "compact_steps": state.compact_steps,
        },
        "log": state.log.iter().map(step_record_json).collect::<Vec<_>>(),
        "count_bound": bound,
    });

    let artifacts = vec![
        Artifact {
            name: "cover.csv",
            csv: cover_csv,
            columns: &[
                ("depth", "refinement step j (1-based)"),
                ("node_word", "digit words of the node per block, blocks separated by `|`"),
                ("alive", "true when the node can still meet the target set"),
                ("measure_sum", "exact total measure of alive nodes after this step (repeated per row)"),
            ],
        },
        Artifact {
            name: "steps.csv",
            csv: steps_csv(&state),
            columns: &[
                ("step", "refinement step j (1-based)"),
                ("committed", "1 when the step was committed up front"),
                ("compact", "1 when the trajectory returned to the compact part at this step"),
                ("contracted", "1 when the alive measure contracted at this step"),
                ("nodes", "number of nodes in the cover after the step"),
                ("alive", "number of alive nodes after the step"),
                ("max_children", "largest number of children any node produced"),
                ("alive_sum", "exact total measure of alive nodes"),
                ("recorded_sum", "exact measure recorded by the two-sided recursion"),
            ],
        },
    ];

    let mut echo = BTreeMap::new();
    echo.insert("weights".into(), weights_echo(w));
    echo.insert("theta".into(), theta_echo);
    echo.insert("tau".into(), q_str(&tau));
    echo.insert("eps".into(), q_str(&eps));
    echo.insert("delta".into(), q_str(&delta));
    echo.insert("q-prime".into(), q_str(&q_prime));
    echo.insert("horizon".into(), horizon.to_string());
    echo.insert("commit".into(), commit.to_string());
    echo.insert("sizes".into(), sizes_echo.join(","));
    echo.insert(
        "fractal".into(),
        ctx.fractal.clone().unwrap_or_default(),
    );
    if let Some(g) = gamma_s {
        echo.insert("gamma".into(), q_str(&parse_q_flag("gamma", g)?));
        echo.insert("pivot".into(), pivot.to_string());
    }
    Ok((echo, result, artifacts))
}

fn status_str(s: ContractionStatus) -> &'static str {
    match s {
        ContractionStatus::Pass => "pass",
        ContractionStatus::Fail => "fail",
        ContractionStatus::Inconclusive => "inconclusive",
    }
}

fn contraction_report_json(r: &ContractionReport, profile: &EtaProfile, flow_eta: &Q) -> Value {
    json!({
        "status": status_str(r.status),
        "pass": r.pass,
        "mean": f64_json(r.mean),
        "stderr": f64_json(r.stderr),
        "max_sample": f64_json(r.max_sample),
        "bound": f64_json(r.bound),
        "margin": f64_json(r.margin),
        "f_start": f64_json(r.f_start),
        "samples": r.samples,
        "psi_included": r.psi_included,
        "chain_violations": r.chain_violations,
        "note": r.note,
        "params": {
            "eps": q_str(&r.params.eps),
            "t": f64_json(r.params.t),
            "eta": q_str(&r.params.eta),
            "alpha": q_str(&r.params.alpha),
            "c_hat": f64_json(r.params.c_hat),
            "decay": f64_json(r.params.decay),
            "xi_hat": f64_json(r.params.xi_hat),
            "b_hat": f64_json(r.params.b_hat),
            "eps_admissible": r.params.eps_admissible,
        },
        "profile": {
            "etas": q_list(profile.etas()),
            "alpha": q_str(&profile.alpha()),
            "flow_exponent": q_str(flow_eta),
        },
        "pilot": r.pilot.iter().map(|p| json!({
            "l": p.l,
            "label": p.label,
            "mean": f64_json(p.mean),
        })).collect::<Vec<_>>(),
        "lipschitz": {
            "violations": r.lipschitz.violations,
            "max_up": f64_json(r.lipschitz.max_up),
            "max_down": f64_json(r.lipschitz.max_down),
        },
    })
}

#[allow(clippy::too_many_arguments)]
fn cmd_height_verify(
    ctx: &Ctx,
    theta_s: &str,
    xi_s: Option<&str>,
    tau_s: &str,
    eta_s: Option<&str>,
    zeta_s: Option<&str>,
    slack_s: &str,
    eps_s: &str,
    scales_s: Option<&str>,
    samples: usize,
    depth: Option<usize>,
    pilot: Option<usize>,
) -> Result<RunOutput, Failure> {
    let w = &ctx.weights;
    let d = w.d();
    let (theta, theta_echo) = parse_theta(theta_s, w.m, w.n)?;
    let xi = parse_xi(xi_s, w.m)?;
    let tau = parse_q_flag("tau", tau_s)?;
    let time = FlowTime::exact(tau.clone())?;
    let eps = parse_q_flag("eps", eps_s)?;
    let grid = parse_grid(need_fractal(ctx, "height-verify")?, w.m, w.n)?;
    let scales = parse_scales(scales_s, w.m * w.n)?;

    let mut echo = BTreeMap::new();
    let profile = match (eta_s, zeta_s) {
        (Some(e), None) => {
            let etas = parse_q_list(e)?;
            echo.insert(
                "eta".into(),
                etas.iter().map(q_str).collect::<Vec<_>>().join(","),
            );
            EtaProfile::new(d, etas)?
        }
        (None, Some(z)) => {
            let zetas = parse_q_list(z)?;
            let slack = parse_q_flag("slack", slack_s)?;
            echo.insert(
                "zeta".into(),
                zetas.iter().map(q_str).collect::<Vec<_>>().join(","),
            );
            echo.insert("slack".into(), q_str(&slack));
            eta_from_zeta(&zetas, &slack)?
        }
        _ => {
            return Err(Failure::Config(
                "height-verify needs exactly one of --eta or --zeta".into(),
            ))
        }
    };
    let flow_eta = profile.flow_exponent(w)?;

    let mut check = ContractionCheck::new(
        w.clone(),
        time,
        &grid,
        profile.clone(),
        eps.clone(),
        scales.clone(),
        samples,
        ctx.seed,
    )?;
    if let Some(dep) = depth {
        check = check.with_depth(dep);
        echo.insert("depth".into(), dep.to_string());
    }
    if let Some(p) = pilot {
        check = check.with_pilot_samples(p);
        echo.insert("pilot".into(), p.to_string());
    }
    check = check.with_budget(ctx.budget);

    let x = AffineLattice::from_theta_xi(w, &theta, &xi)?;
    let report = check.run(&x)?;
    let result = contraction_report_json(&report, &profile, &flow_eta);

    echo.insert("weights".into(), weights_echo(w));
    echo.insert("theta".into(), theta_echo);
    echo.insert("xi".into(), xi_echo(&xi));
    echo.insert("tau".into(), q_str(&tau));
    echo.insert("eps".into(), q_str(&eps));
    echo.insert(
        "scales".into(),
        scales.iter().map(q_str).collect::<Vec<_>>().join(","),
    );
    echo.insert("samples".into(), samples.to_string());
    echo.insert(
        "fractal".into(),
        ctx.fractal.clone().unwrap_or_default(),
    );
    Ok((echo, result, Vec::new()))
}

fn critical_report_json(r: &CriticalReport) -> Value {
    json!({
        "l": r.l,
        "gamma": f64_json(r.gamma),
        "diverged": r.diverged,
        "worst": r.worst,
        "worst_label": r.rows[r.worst].label,
        "rows": r.rows.iter().map(|row| json!({
            "label": row.label,
            "mean": f64_json(row.mean),
            "running": row.running.iter().map(|x| f64_json(*x)).collect::<Vec<_>>(),
            "rel_step": row.rel_step.iter().map(|x| f64_json(*x)).collect::<Vec<_>>(),
            "cauchy_failed": row.cauchy_failed,
            "tail_index": row.tail_index.map(f64_json).unwrap_or(Value::Null),
            "unbounded_hits": row.unbounded_hits,
        })).collect::<Vec<_>>(),
    })
}

fn cmd_zeta(
    ctx: &Ctx,
    l: usize,
    gamma_s: &str,
    scales_s: Option<&str>,
    samples: usize,
    depth: Option<usize>,
) -> Result<RunOutput, Failure> {
    let w = &ctx.weights;
    let gamma = parse_q_flag("gamma", gamma_s)?;
    let grid = parse_grid(need_fractal(ctx, "zeta")?, w.m, w.n)?;
    let scales = parse_scales(scales_s, w.m * w.n)?;

    let mut mc = CriticalMc::new(
        &grid,
        w.clone(),
        l,
        gamma.clone(),
        scales.clone(),
        samples,
        ctx.seed,
    )?;
    let mut echo = BTreeMap::new();
    if let Some(dep) = depth {
        mc = mc.with_depth(dep);
        echo.insert("depth".into(), dep.to_string());
    }
    let report = mc.run(None)?;
    let result = critical_report_json(&report);

    let mut csv = String::from(
        "label,mean,running_eighth,running_quarter,running_half,running_full,rel_step_1,rel_step_2,rel_step_3,cauchy_failed,tail_index,unbounded_hits\n",
    );
    for row in &report.rows {
        let tail = row.tail_index.map(f64_cell).unwrap_or_default();
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            row.label,
            f64_cell(row.mean),
            f64_cell(row.running[0]),
            f64_cell(row.running[1]),
            f64_cell(row.running[2]),
            f64_cell(row.running[3]),
            f64_cell(row.rel_step[0]),
            f64_cell(row.rel_step[1]),
            f64_cell(row.rel_step[2]),
            u8::from(row.cauchy_failed),
            tail,
            row.unbounded_hits,
        );
    }
    let artifact = Artifact {
        name: "zeta.csv",
        csv,
        columns: &[
            ("label", "direction vector the integrand was evaluated against"),
            ("mean", "Monte-Carlo mean of the γ-power integrand"),
            ("running_eighth", "running mean after 1/8 of the samples"),
            ("running_quarter", "running mean after 1/4 of the samples"),
            ("running_half", "running mean after 1/2 of the samples"),
            ("running_full", "running mean after all samples"),
            ("rel_step_1", "relative change between the first two running means"),
            ("rel_step_2", "relative change between the middle running means"),
            ("rel_step_3", "relative change between the last two running means"),
            ("cauchy_failed", "1 when the running means fail the stabilization diagnostic"),
            ("tail_index", "Hill tail-index estimate of the integrand (empty when degenerate; < 1 suggests divergence)"),
            ("unbounded_hits", "samples on which the projected direction vanished exactly"),
        ],
    };

    echo.insert("weights".into(), weights_echo(w));
    echo.insert("l".into(), l.to_string());
    echo.insert("gamma".into(), q_str(&gamma));
    echo.insert(
        "scales".into(),
        scales.iter().map(q_str).collect::<Vec<_>>().join(","),
    );
    echo.insert("samples".into(), samples.to_string());
    echo.insert(
        "fractal".into(),
        ctx.fractal.clone().unwrap_or_default(),
    );
    Ok((echo, result, vec![artifact]))
}

fn preset_lookup(name: &str) -> Result<(Weights, Scenario), Failure> {
    if name == "cheung" {
        return Ok((Weights::equal(2, 1), Scenario::FixedXiCube { q: Q::one() }));
    }
    if let Some(rest) = name.strip_prefix("equal-") {
        if let Some((ms, ns)) = rest.split_once('-') {
            let m: usize = ms
                .parse()
                .map_err(|_| Failure::Config(format!("bad preset `{name}`")))?;
            let n: usize = ns
                .parse()
                .map_err(|_| Failure::Config(format!("bad preset `{name}`")))?;
            if m == 0 || n == 0 {
                return Err(Failure::Config(format!("bad preset `{name}`")));
            }
            return Ok((Weights::equal(m, n), Scenario::FixedXiCube { q: Q::one() }));
        }
    }
    Err(Failure::Config(format!(
        "unknown preset `{name}` (expected `cheung` or `equal-M-N`)"
    )))
}

fn cmd_bound(
    ctx: &Ctx,
    preset: Option<&str>,
    scenario: Option<&str>,
    q_s: &str,
    emass_s: Option<&str>,
    omega_s: Option<&str>,
    eta_s: Option<&str>,
) -> Result<RunOutput, Failure> {
    let q = parse_q_flag("q", q_s)?;
    let mut echo = BTreeMap::new();

    let (weights_used, reports) = match (preset, scenario) {
        (Some(p), None) => {
            let (w, sc) = preset_lookup(p)?;
            echo.insert("preset".into(), p.to_string());
            let reports = bound_corollary_suite(&w, &sc)?;
            (w, reports)
        }
        (None, Some(s)) => {
            let w = ctx.weights.clone();
            echo.insert("scenario".into(), s.to_string());
            let reports = match s {
                "zero-escape" => bound_corollary_suite(&w, &Scenario::FixedThetaZeroEmass)?,
                "equal-weights" => {
                    let emass = match emass_s {
                        Some(e) => parse_q_flag("emass", e)?,
                        None => Q::zero(),
                    };
                    echo.insert("q".into(), q_str(&q));
                    echo.insert("emass".into(), q_str(&emass));
                    bound_corollary_suite(
                        &w,
                        &Scenario::FixedThetaGeneral {
                            q: q.clone(),
                            emass,
                        },
                    )?
                }
                "cube" => {
                    echo.insert("q".into(), q_str(&q));
                    bound_corollary_suite(&w, &Scenario::FixedXiCube { q: q.clone() })?
                }
                "cantor" => {
                    echo.insert("q".into(), q_str(&q));
                    bound_corollary_suite(&w, &Scenario::FixedXiCantor { q: q.clone() })?
                }
                "omega" => {
                    let omega = parse_q_flag(
                        "omega",
                        omega_s.ok_or_else(|| {
                            Failure::Config("scenario `omega` needs --omega".into())
                        })?,
                    )?;
                    echo.insert("omega".into(), q_str(&omega));
                    bound_corollary_suite(&w, &Scenario::OmegaVariant { omega })?
                }
                "fixed-xi" => {
                    let grid = parse_grid(need_fractal(ctx, "scenario `fixed-xi`")?, w.m, w.n)?;
                    echo.insert(
                        "fractal".into(),
                        ctx.fractal.clone().unwrap_or_default(),
                    );
                    let variant = match omega_s {
                        Some(o) => {
                            let omega = parse_q_flag("omega", o)?;
                            echo.insert("omega".into(), q_str(&omega));
                            XiVariant::Uniform { omega }
                        }
                        None => {
                            echo.insert("q".into(), q_str(&q));
                            XiVariant::Divergence { q: q.clone() }
                        }
                    };
                    let profile = match eta_s {
                        Some(e) => {
                            let etas = parse_q_list(e)?;
                            echo.insert(
                                "eta".into(),
                                etas.iter().map(q_str).collect::<Vec<_>>().join(","),
                            );
                            Some(EtaProfile::new(w.d(), etas)?)
                        }
                        None => None,
                    };
                    vec![bound_fixed_xi(&grid, &w, &variant, profile.as_ref())?]
                }
                other => {
                    return Err(Failure::Config(format!(
                        "unknown scenario `{other}` (expected zero-escape, equal-weights, cube, cantor, omega, or fixed-xi)"
                    )))
                }
            };
            (w, reports)
        }
        _ => {
            return Err(Failure::Config(
                "bound needs exactly one of --preset or --scenario".into(),
            ))
        }
    };

    let headline = reports.first().expect("at least one report");
    let result = json!({
        "value": linreal_str(&headline.value),
        "value_f64": f64_json(headline.value.to_f64()),
        "formula": headline.formula,
        "reports": reports.iter().map(bound_report_json).collect::<Vec<_>>(),
    });
    echo.insert("weights".into(), weights_echo(&weights_used));
    Ok((echo, result, Vec::new()))
}

fn cmd_ifs(
    ctx: &Ctx,
    cylinders: Option<usize>,
    samples: Option<usize>,
    depth: usize,
    box_depth: Option<usize>,
) -> Result<RunOutput, Failure> {
    let spec = need_fractal(ctx, "ifs")?;
    if spec.contains('|') {
        return Err(Failure::Config(
            "ifs inspects a single system; give one spec without `|`".into(),
        ));
    }
    let ifs = parse_one_ifs(spec)?;
    let hull = ifs.hull();
    let mut result = Map::new();
    result.insert(
        "spec".into(),
        ifs.to_spec_line().map(Value::String).unwrap_or(Value::Null),
    );
    result.insert("dim".into(), json!(ifs.dim()));
    result.insert("alphabet_size".into(), json!(ifs.alphabet_size()));
    result.insert("ratio".into(), json!(q_str(ifs.ratio())));
    result.insert("dimension".into(), linreal_json(&ifs.dimension()));
    result.insert("diameter".into(), json!(q_str(&ifs.diameter())));
    result.insert("hull_center".into(), q_list(&hull.center()));
    result.insert("hull_diameter".into(), json!(q_str(&hull.diameter())));

    let mut artifacts = Vec::new();
    let mut echo = BTreeMap::new();

    if let Some(cyl_depth) = cylinders {
        let count = ifs.cylinder_count(cyl_depth);
        let mut csv = String::from("word,depth,center,diameter,measure\n");
        let mut rows = Vec::new();
        for c in ifs.cylinders(cyl_depth) {
            let word: Vec<String> = c.word.iter().map(|d| d.to_string()).collect();
            let word = word.join(".");
            let center = c.region.center();
            let _ = writeln!(
                csv,
                "{},{},{},{},{}",
                word,
                c.depth,
                q_str(&center[0]),
                q_str(&c.diameter),
                q_str(&c.measure),
            );
            rows.push(json!({
                "word": word,
                "center": q_str(&center[0]),
                "diameter": q_str(&c.diameter),
                "measure": q_str(&c.measure),
            }));
        }
        result.insert(
            "cylinders".into(),
            json!({ "depth": cyl_depth, "count": count.to_string(), "rows": rows }),
        );
        artifacts.push(Artifact {
            name: "cylinders.csv",
            csv,
            columns: &[
                ("word", "digit word of the cylinder, digits separated by `.`"),
                ("depth", "word length"),
                ("center", "exact center of the cylinder interval"),
                ("diameter", "exact cylinder diameter"),
                ("measure", "exact Bernoulli measure of the cylinder"),
            ],
        });
        echo.insert("cylinders".into(), cyl_depth.to_string());
    }

    if let Some(count) = samples {
        let mut csv = String::from("index,x,x_f64\n");
        let mut rows = Vec::new();
        for i in 0..count {
            let pt = ifs.bernoulli_sample(depth, ctx.seed, i as u64);
            let _ = writeln!(csv, "{},{},{}", i, q_str(&pt[0]), f64_cell(qf(&pt[0])));
            rows.push(Value::String(q_str(&pt[0])));
        }
        result.insert(
            "samples".into(),
            json!({ "count": count, "depth": depth, "points": rows }),
        );
        artifacts.push(Artifact {
            name: "samples.csv",
            csv,
            columns: &[
                ("index", "sample index, 0-based"),
                ("x", "exact coordinate of the depth-truncated measure sample"),
                ("x_f64", "the same as a float"),
            ],
        });
        echo.insert("samples".into(), count.to_string());
        echo.insert("depth".into(), depth.to_string());
    }

    if let Some(bd) = box_depth {
        if bd == 0 {
            return Err(Failure::Config("--box-depth must be ≥ 1".into()));
        }
        let points: Vec<QVec> = ifs.cylinders(bd).map(|c| c.region.center()).collect();
        let scales: Vec<Q> = (1..=bd as i64).map(|k| qpow(ifs.ratio(), k)).collect();
        let curve = box_counting_estimate(&points, &scales)?;
        result.insert(
            "box_counting".into(),
            json!({
                "slope": f64_json(curve.slope),
                "expected": linreal_json(&ifs.dimension()),
                "curve": curve.scales.iter().map(|(s, c)| json!({
                    "scale": q_str(s),
                    "count": c,
                })).collect::<Vec<_>>(),
            }),
        );
        echo.insert("box-depth".into(), bd.to_string());
    }

    echo.insert("fractal".into(), spec.to_string());
    Ok((echo, Value::Object(result), artifacts))
}
