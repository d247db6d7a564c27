use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use tamed_euler::{builtin, builtin_names, Error, GridSpec, SchemeConfig};
use tamed_euler_cli::experiment::{self, ErrorTime, ExperimentConfig};
use tamed_euler_cli::output;

/// Tamed explicit Euler scheme for SDEs and SDDEs driven by Brownian motion
/// and compensated Poisson jumps, with a strong-convergence harness.
#[derive(Parser)]
#[command(name = "tamed-euler", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single trajectory and dump it as CSV.
    Simulate(SimulateArgs),
    /// Measure strong errors against a finer reference across levels.
    Convergence(ConvergenceArgs),
    /// Compare tamed vs plain Euler second moments and divergence counts.
    CompareUntamed(CompareArgs),
    /// List the built-in problems.
    ListProblems,
}

#[derive(Args)]
struct SimulateArgs {
    /// Problem name from the registry.
    #[arg(long)]
    problem: String,
    /// Steps per unit time.
    #[arg(long)]
    n: u32,
    #[arg(long)]
    seed: u64,
    /// Taming exponent in (0, 1/2].
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
    /// Use the plain (untamed) Euler scheme.
    #[arg(long)]
    untamed: bool,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConvergenceArgs {
    /// Problem name from the registry.
    #[arg(long)]
    problem: String,
    /// Inclusive level range a:b; level l runs at 2^l steps per unit time.
    #[arg(long, value_parser = parse_levels)]
    levels: (u32, u32),
    /// Reference level (strictly greater than every level).
    #[arg(long)]
    ref_level: u32,
    /// Monte Carlo paths.
    #[arg(long)]
    paths: u64,
    #[arg(long)]
    seed: u64,
    /// Taming exponent in (0, 1/2].
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
    /// Where deviations are measured: final time, or running max.
    #[arg(long, value_enum, default_value_t = Metric::Terminal)]
    metric: Metric,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (speed only; never changes any output bit).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct CompareArgs {
    /// Problem name from the registry.
    #[arg(long)]
    problem: String,
    /// Inclusive level range a:b; level l runs at 2^l steps per unit time.
    #[arg(long, value_parser = parse_levels)]
    levels: (u32, u32),
    /// Monte Carlo paths.
    #[arg(long)]
    paths: u64,
    #[arg(long)]
    seed: u64,
    /// Taming exponent in (0, 1/2].
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (speed only; never changes any output bit).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Metric {
    /// Deviation at the final time.
    Terminal,
    /// Maximum deviation over the coarse grid.
    Sup,
}

fn parse_levels(s: &str) -> Result<(u32, u32), String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected an inclusive range a:b, got {s:?}"))?;
    let lo: u32 = a.parse().map_err(|e| format!("bad level {a:?}: {e}"))?;
    let hi: u32 = b.parse().map_err(|e| format!("bad level {b:?}: {e}"))?;
    if lo > hi {
        return Err(format!("empty level range {lo}:{hi}"));
    }
    Ok((lo, hi))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(if err.is_internal() { 3 } else { 2 })
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Convergence(args) => {
            let workers = args.workers;
            with_workers(workers, || cmd_convergence(args))
        }
        Command::CompareUntamed(args) => {
            let workers = args.workers;
            with_workers(workers, || cmd_compare(args))
        }
        Command::ListProblems => {
            for name in builtin_names() {
                println!("{name}");
            }
            Ok(())
        }
    }
}

fn with_workers<T: Send>(
    workers: Option<usize>,
    f: impl FnOnce() -> Result<T, Error> + Send,
) -> Result<T, Error> {
    match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::InvalidInput(format!("cannot build a {w}-worker pool: {e}")))?
            .install(f),
        None => f(),
    }
}

fn io_error(e: std::io::Error) -> Error {
    Error::InvalidInput(format!("cannot write output: {e}"))
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), Error> {
    let problem = builtin(&args.problem)?;
    let (t0, t1) = problem.window();
    let grid = GridSpec::new(t0, t1, args.n)?;
    let config = if args.untamed {
        SchemeConfig::untamed(args.n)
    } else {
        SchemeConfig::tamed(args.n, args.theta)?
    };
    let noise = experiment::path_noise(&problem, grid, args.seed, 0);
    let traj = experiment::simulate_any(&problem, &config, &noise)?;
    output::write_out(args.out.as_deref(), &output::trajectory_csv(&traj)).map_err(io_error)?;
    if let Some(k) = traj.first_nonfinite() {
        eprintln!(
            "warning: state left the finite range at t = {}",
            traj.grid().time(k)
        );
    }
    eprintln!(
        "{}: {} steps on [{t0}, {t1}], seed {}",
        args.problem,
        grid.steps(),
        args.seed
    );
    Ok(())
}

fn fmt_rate(rate: Option<f64>) -> String {
    match rate {
        Some(r) => format!("{r:.3}"),
        None => "n/a".into(),
    }
}

fn cmd_convergence(args: ConvergenceArgs) -> Result<(), Error> {
    let (lo, hi) = args.levels;
    if args.ref_level <= hi {
        return Err(Error::InvalidInput(format!(
            "--ref-level must exceed the largest level, got {} vs {hi}",
            args.ref_level
        )));
    }
    let config = ExperimentConfig {
        problem: args.problem,
        levels: (lo..=hi).collect(),
        ref_level: args.ref_level,
        paths: args.paths,
        base_seed: args.seed,
        theta: args.theta,
        error_time: match args.metric {
            Metric::Terminal => ErrorTime::Terminal,
            Metric::Sup => ErrorTime::RunningMax,
        },
        compare_untamed: false,
    };
    let report = experiment::strong_error(&config)?;
    output::write_out(args.out.as_deref(), &output::convergence_csv(&report)).map_err(io_error)?;
    let diverged: u64 = report.rows.iter().map(|r| r.paths_diverged).sum();
    eprintln!(
        "fitted rate: l2 {} l1 {} ({} paths, {} levels, {} diverged runs, {:.2} s)",
        fmt_rate(report.fitted_rate_l2),
        fmt_rate(report.fitted_rate_l1),
        config.paths,
        report.rows.len(),
        diverged,
        report.wall_seconds
    );
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> Result<(), Error> {
    let (lo, hi) = args.levels;
    let config = ExperimentConfig {
        problem: args.problem,
        levels: (lo..=hi).collect(),
        ref_level: hi,
        paths: args.paths,
        base_seed: args.seed,
        theta: args.theta,
        error_time: ErrorTime::Terminal,
        compare_untamed: true,
    };
    let report = experiment::compare_untamed(&config)?;
    output::write_out(args.out.as_deref(), &output::moments_csv(&report)).map_err(io_error)?;
    let diverged: u64 = report.rows.iter().map(|r| r.untamed_diverged).sum();
    eprintln!(
        "tamed vs plain Euler: {} paths, {} levels, {} plain-Euler divergences, {:.2} s",
        config.paths,
        report.rows.len(),
        diverged,
        report.wall_seconds
    );
    Ok(())
}
