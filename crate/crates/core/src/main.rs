use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use exact_lipschitz::baselines::{layerwise_bound, sampled_lower_bound, symprop_bound};
use exact_lipschitz::bnb::solve;
use exact_lipschitz::oracle::{brute_force_oracle, combination_count};
use exact_lipschitz::report::{bounds_report, compute_report, oracle_report, Estimate};
use exact_lipschitz::{Error, Network, NormPair, Polyhedron, SolveStatus, SolverConfig};

const EXIT_ERROR: u8 = 1;
const EXIT_LIMIT: u8 = 2;
const EXIT_GUARDRAIL: u8 = 3;
const EXIT_USAGE: u8 = 64;
const EXIT_DATA: u8 = 65;

#[derive(Parser)]
#[command(
    name = "exact-lipschitz",
    version,
    about = "Lipschitz constants of piecewise-linear networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Branch and bound to the exact constant (or within --theta).
    Compute(ComputeArgs),
    /// Layerwise, symbolic-propagation and sampled estimates.
    Bounds(BoundsArgs),
    /// Exhaustive enumeration of activation pieces (small models only).
    Oracle(Target),
}

#[derive(Args)]
struct Target {
    /// Model JSON file.
    #[arg(long)]
    model: PathBuf,
    /// Norm pair as P or P:Q with P, Q in {1, 2, inf}.
    #[arg(long, default_value = "2")]
    norm: String,
    #[command(flatten)]
    region: RegionArgs,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct RegionArgs {
    /// The whole input space.
    #[arg(long)]
    global: bool,
    /// The hypercube [LO, HI]^d.
    #[arg(long = "box", value_name = "LO,HI", allow_hyphen_values = true)]
    cube: Option<String>,
    /// Region JSON file.
    #[arg(long, value_name = "PATH")]
    region: Option<PathBuf>,
}

#[derive(Args)]
struct SamplingArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Range used for unbounded coordinates when sampling.
    #[arg(
        long,
        value_name = "LO,HI",
        default_value = "-10,10",
        allow_hyphen_values = true
    )]
    sample_box: String,
}

#[derive(Args)]
struct ComputeArgs {
    #[command(flatten)]
    target: Target,
    #[arg(long, default_value_t = 1.0)]
    theta: f64,
    /// Seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    /// Random points used to seed the lower bound.
    #[arg(long, default_value_t = 0)]
    samples: usize,
    #[command(flatten)]
    sampling: SamplingArgs,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long)]
    max_iterations: Option<u64>,
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    target: Target,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[command(flatten)]
    sampling: SamplingArgs,
}

enum Failure {
    Usage(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Guardrail { .. } => EXIT_GUARDRAIL,
        Error::Parse(_)
        | Error::Shape { .. }
        | Error::UnknownActivation(_)
        | Error::UnknownFields { .. }
        | Error::Dimension(_)
        | Error::EmptyRegion(_)
        | Error::Io(_) => EXIT_DATA,
        _ => EXIT_ERROR,
    }
}

fn parse_pair(text: &str, flag: &str) -> Result<(f64, f64), Failure> {
    let bad = || Failure::Usage(format!("--{flag} expects LO,HI with LO < HI, got '{text}'"));
    let (lo, hi) = text.split_once(',').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    if !(lo < hi) {
        return Err(bad());
    }
    Ok((lo, hi))
}

fn parse_norm(text: &str) -> Result<NormPair, Failure> {
    text.parse().map_err(|e| match e {
        Error::Parse(msg) => Failure::Usage(format!("--norm: {msg}")),
        other => Failure::Run(other),
    })
}

fn load(target: &Target) -> Result<(Network, Polyhedron, NormPair), Failure> {
    let np = parse_norm(&target.norm)?;
    let net = Network::load(&target.model)?;
    let d = net.input_dim();
    let region = &target.region;
    let omega = if region.global {
        Polyhedron::unconstrained(d)?
    } else if let Some(cube) = &region.cube {
        let (lo, hi) = parse_pair(cube, "box")?;
        Polyhedron::hypercube(d, lo, hi)?
    } else {
        let path = region
            .region
            .as_ref()
            .expect("clap enforces one region flag");
        Polyhedron::from_region_json(&std::fs::read_to_string(path).map_err(Error::from)?)?
    };
    Ok((net, omega, np))
}

fn compute(args: &ComputeArgs) -> Result<(Value, u8), Failure> {
    let (net, omega, np) = load(&args.target)?;
    let cfg = SolverConfig {
        norm: np,
        theta: args.theta,
        time_limit: args.time_limit,
        sample_count: args.samples,
        seed: args.sampling.seed,
        max_iterations: args.max_iterations,
        threads: args.threads,
        sample_box: parse_pair(&args.sampling.sample_box, "sample-box")?,
    };
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let result = solve(&net, &omega, cfg.clone())?;
    let code = match result.status {
        SolveStatus::Exact | SolveStatus::ApproxReached => 0,
        SolveStatus::TimeLimit | SolveStatus::IterationLimit => EXIT_LIMIT,
    };
    Ok((compute_report(&result, &cfg), code))
}

fn timed(f: impl FnOnce() -> exact_lipschitz::Result<f64>) -> Result<Estimate, Failure> {
    let start = Instant::now();
    let value = f()?;
    Ok(Estimate::Value {
        value,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

fn bounds(args: &BoundsArgs) -> Result<(Value, u8), Failure> {
    let (net, omega, np) = load(&args.target)?;
    let sample_box = parse_pair(&args.sampling.sample_box, "sample-box")?;
    let layerwise = if np.is_symmetric() {
        timed(|| layerwise_bound(&net, np))?
    } else {
        Estimate::Unavailable {
            reason: format!("layerwise bound needs p = q, got {np}"),
        }
    };
    let symprop = timed(|| symprop_bound(&net, &omega, np))?;
    let sampled = timed(|| {
        sampled_lower_bound(
            &net,
            &omega,
            np,
            args.samples,
            args.sampling.seed,
            sample_box,
        )
    })?;
    Ok((bounds_report(&layerwise, &symprop, &sampled), 0))
}

fn oracle(target: &Target) -> Result<(Value, u8), Failure> {
    let (net, omega, np) = load(target)?;
    let exact = brute_force_oracle(&net, &omega, np)?;
    Ok((oracle_report(exact, combination_count(&net)), 0))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let outcome = match &cli.command {
        Command::Compute(args) => compute(args),
        Command::Bounds(args) => bounds(args),
        Command::Oracle(target) => oracle(target),
    };
    match outcome {
        Ok((report, code)) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&report).expect("report serializes")
            );
            ExitCode::from(code)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
