use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use torus_ergodic::estimators::{run_time_average, TrajectorySpec};
use torus_ergodic::experiments::{
    distance_report, extrapolate_sweep, sweep_delta, sweep_time, with_threads, write_report_files, RateReport,
    SweepConfig,
};
use torus_ergodic::oracle::{default_cutoff, oracle_report, SOLVABILITY_TOLERANCE};
use torus_ergodic::schemes::{weak_order_check, OrderCheckConfig};
use torus_ergodic::torus::catalog_problem;
use torus_ergodic::{Error, NoiseKind, Observable, RngStream, SchemeConfig, SchemeKind, TorusPoint};

const EXIT_PRECONDITION: u8 = 2;
const EXIT_THRESHOLD: u8 = 3;

#[derive(Parser)]
#[command(name = "torus-ergodic", version, about = "Stationary averages of SDEs on the torus")]
struct Cli {
    /// Sweep configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for CSV, JSON and SVG outputs.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Spectral reference values for one observable.
    Oracle {
        #[arg(long)]
        problem: String,
        #[arg(long)]
        observable: String,
        #[arg(long)]
        cutoff: Option<usize>,
    },
    /// One time average with its block-variance CI, as a CSV row.
    Simulate {
        #[arg(long)]
        problem: String,
        #[arg(long)]
        scheme: SchemeKind,
        #[arg(long)]
        observable: String,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        steps: u64,
        #[arg(long, default_value_t = 32)]
        blocks: usize,
        #[arg(long, default_value_t = 0)]
        burnin: u64,
        #[arg(long)]
        noise: Option<NoiseKind>,
    },
    /// Weak-order certificate of a scheme.
    CheckOrder {
        #[arg(long)]
        scheme: SchemeKind,
        #[arg(long)]
        problem: String,
        #[arg(long)]
        p: Option<u32>,
        #[arg(long, value_delimiter = ',', required = true)]
        deltas: Vec<f64>,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long)]
        noise: Option<NoiseKind>,
    },
    /// Bias against step size.
    SweepDelta(SweepArgs),
    /// Mean-square error against horizon.
    SweepTime(SweepArgs),
    /// Richardson-extrapolated bias against step size.
    Extrapolate(SweepArgs),
    /// Max error over an observable dictionary against step size.
    Distance(SweepArgs),
}

#[derive(Args)]
struct SweepArgs {
    /// Exit with code 3 unless every fitted slope lies in `LO:HI`.
    #[arg(long, value_name = "LO:HI")]
    expect_slope: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads;
    match with_threads(threads, || run(&cli)).and_then(|r| r) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_THRESHOLD),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NoiseDominated { .. } => EXIT_THRESHOLD,
        e if e.is_precondition() => EXIT_PRECONDITION,
        _ => 1,
    }
}

/// Returns whether every threshold held.
fn run(cli: &Cli) -> Result<bool, Error> {
    match &cli.command {
        Command::Oracle { problem, observable, cutoff } => {
            let prob = catalog_problem(problem)?;
            let obs = Observable::parse(observable, prob.dim())?;
            let report = oracle_report(&prob, &obs, cutoff.unwrap_or_else(|| default_cutoff(prob.dim())))?;
            let text = serde_json::to_string_pretty(&report)?;
            emit(cli, "oracle.json", &text)?;
            Ok(report.residual <= SOLVABILITY_TOLERANCE)
        }
        Command::Simulate { problem, scheme, observable, delta, steps, blocks, burnin, noise } => {
            let seed = cli.seed.unwrap_or(0);
            let prob = catalog_problem(problem)?;
            let obs = Observable::parse(observable, prob.dim())?;
            let cfg = SchemeConfig::new(*scheme);
            let spec = TrajectorySpec::new(cfg, *delta, *steps)
                .with_noise(noise.unwrap_or(cfg.default_noise()))
                .with_blocks(*blocks)
                .with_burnin(*burnin);
            let r = run_time_average(&prob, &spec, &obs, &TorusPoint::origin(prob.dim()), RngStream::new(seed, 0))?;
            let text = format!(
                "problem,scheme,observable,delta,steps,horizon,value,variance,ci_halfwidth,seed\n\
                 {problem},{scheme},{observable},{delta},{steps},{},{},{},{},{seed}",
                r.horizon, r.value, r.sampled_variance, r.ci_halfwidth
            );
            emit(cli, "simulate.csv", &text)?;
            Ok(true)
        }
        Command::CheckOrder { scheme, problem, p, deltas, samples, noise } => {
            let prob = catalog_problem(problem)?;
            let mut sc = SchemeConfig::new(*scheme);
            if let Some(p) = p {
                sc.claimed_order = *p;
            }
            let mut cfg = OrderCheckConfig::new(sc, deltas.clone(), *samples, cli.seed.unwrap_or(0));
            if let Some(n) = noise {
                cfg.noise = *n;
            }
            let report = weak_order_check(&prob, &cfg)?;
            let summary = json!({
                "scheme": report.scheme,
                "p_claimed": report.p_claimed,
                "slope": report.slope,
                "pass": report.pass,
            });
            if let Some(dir) = &cli.out {
                std::fs::create_dir_all(dir)?;
                std::fs::write(dir.join("check_order_full.json"), serde_json::to_string_pretty(&report)? + "\n")?;
            }
            emit(cli, "check_order.json", &serde_json::to_string_pretty(&summary)?)?;
            Ok(report.pass)
        }
        Command::SweepDelta(args) => {
            let cfg = load_config(cli)?;
            let reports = sweep_delta(&cfg)?.reports;
            finish_sweep(cli, &cfg, "sweep_delta", &reports, args)
        }
        Command::SweepTime(args) => {
            let cfg = load_config(cli)?;
            let reports = sweep_time(&cfg)?.reports;
            finish_sweep(cli, &cfg, "sweep_time", &reports, args)
        }
        Command::Extrapolate(args) => {
            let cfg = load_config(cli)?;
            let reports = extrapolate_sweep(&cfg)?.reports;
            finish_sweep(cli, &cfg, "extrapolate", &reports, args)
        }
        Command::Distance(args) => {
            let cfg = load_config(cli)?;
            let report = distance_report(&cfg)?;
            if let Some(dir) = out_dir(cli, &cfg) {
                std::fs::create_dir_all(&dir)?;
                std::fs::write(dir.join("distance_table.json"), serde_json::to_string_pretty(&report)? + "\n")?;
            }
            finish_sweep(cli, &cfg, "distance", &[report.as_rate_report()], args)
        }
    }
}

fn load_config(cli: &Cli) -> Result<SweepConfig, Error> {
    let path = cli.config.as_deref().ok_or_else(|| Error::InvalidConfig("--config is required".into()))?;
    let mut cfg = SweepConfig::load(path).map_err(|e| match e {
        Error::Io(io) => Error::InvalidConfig(format!("{}: {io}", path.display())),
        e => e,
    })?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn out_dir(cli: &Cli, cfg: &SweepConfig) -> Option<PathBuf> {
    cli.out.clone().or_else(|| cfg.output.clone())
}

fn parse_range(s: &str) -> Result<(f64, f64), Error> {
    let bad = || Error::InvalidArgument(format!("expected LO:HI, got '{s}'"));
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    if lo > hi {
        return Err(bad());
    }
    Ok((lo, hi))
}

fn finish_sweep(
    cli: &Cli,
    cfg: &SweepConfig,
    stem: &str,
    reports: &[RateReport],
    args: &SweepArgs,
) -> Result<bool, Error> {
    let range = args.expect_slope.as_deref().map(parse_range).transpose()?;
    if let Some(dir) = out_dir(cli, cfg) {
        for r in reports {
            write_report_files(&dir, &format!("{stem}_{}", file_safe(&r.observable)), r)?;
        }
    }
    let summaries: Vec<_> = reports
        .iter()
        .map(|r| {
            let s = r.summary();
            json!({
                "observable": r.observable,
                "slope": s.slope,
                "intercept": s.intercept,
                "r2": s.r2,
                "warnings": s.warnings,
            })
        })
        .collect();
    println!("{}", serde_json::to_string_pretty(&summaries)?);
    Ok(range.is_none_or(|(lo, hi)| reports.iter().all(|r| (lo..=hi).contains(&r.slope))))
}

fn file_safe(label: &str) -> String {
    label.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect()
}

/// Prints `text` and, with `--out`, also stores it as `name`.
fn emit(cli: &Cli, name: &str, text: &str) -> Result<(), Error> {
    println!("{text}");
    if let Some(dir) = &cli.out {
        write_file(dir, name, text)?;
    }
    Ok(())
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<(), Error> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), format!("{text}\n"))?;
    Ok(())
}
