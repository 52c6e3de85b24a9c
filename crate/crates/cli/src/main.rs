//! `ristx` command-line runner.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ristx::channel::{dbm_to_watts, Scenario, DEFAULT_SEED};
use ristx::crlb::Scheme;
use ristx::experiment::{
    parse_estimator, run_experiment, rows_to_csv, ExperimentSpec, PilotSource, SweepAxis, Task,
};

#[derive(Parser)]
#[command(name = "ristx", version, about = "RIS-transmitted pilot training experiments")]
struct Cli {
    /// Seed used when the config sets none.
    #[arg(long, global = true, env = "RISTX_SEED", default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize a pilot and write it with its iteration log.
    Optimize {
        #[arg(long, value_enum)]
        algo: Algo,
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// NMSE of the configured schemes at the configured power.
    Evaluate(EvalArgs),
    /// Averaged Cramér–Rao bounds and the watershed RIS size.
    Crlb {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// NMSE over a grid of one parameter.
    Sweep {
        #[arg(long, value_enum)]
        axis: Axis,
        /// Comma-separated grid values; `p_max` values are in watts.
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        grid: Vec<f64>,
        /// Emit bounds instead of estimator NMSEs.
        #[arg(long)]
        crlb: bool,
        #[command(flatten)]
        eval: EvalArgs,
    },
    /// Runs whatever task the config names.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct EvalArgs {
    /// Without a config the i.i.d. setting with M_B = 8, M_R = 64, one user
    /// and 20 dBm is used.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<String>>,
    #[arg(long)]
    estimator: Option<String>,
    #[arg(long)]
    pilot: Option<String>,
    #[arg(long)]
    pilot_file: Option<PathBuf>,
    /// Monte-Carlo trials, 0 for analytic values.
    #[arg(long)]
    trials: Option<usize>,
    /// CSV path; standard output when omitted. The config's `output` key is
    /// ignored by this subcommand.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    Gd,
    Pdd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    #[value(name = "p_max")]
    PMax,
    #[value(name = "m_r")]
    MR,
    #[value(name = "distance")]
    Distance,
}

fn load(config: Option<&Path>, seed: u64) -> ristx::Result<ExperimentSpec> {
    match config {
        Some(path) => ExperimentSpec::from_file(path, seed),
        None => {
            let mut s = Scenario::analysis(8, 64, 1, dbm_to_watts(20.0));
            s.seed = seed;
            Ok(ExperimentSpec::new(s, Task::Evaluate))
        }
    }
}

fn apply_eval(spec: &mut ExperimentSpec, a: &EvalArgs) -> ristx::Result<()> {
    if let Some(s) = &a.schemes {
        spec.schemes = s.iter().map(|x| Scheme::parse(x)).collect::<ristx::Result<_>>()?;
    }
    if let Some(e) = &a.estimator {
        spec.estimator = parse_estimator(e)?;
    }
    if let Some(p) = &a.pilot {
        spec.pilot = PilotSource::parse(p)?;
    }
    if let Some(p) = &a.pilot_file {
        spec.pilot_file = Some(p.clone());
        if a.pilot.is_none() {
            spec.pilot = PilotSource::File;
        }
    }
    if let Some(t) = a.trials {
        spec.trials = t;
    }
    // The config's `output` belongs to `run`; here only `--out` counts.
    spec.output = a.out.clone();
    Ok(())
}

fn run(cli: Cli) -> ristx::Result<()> {
    let seed = cli.seed;
    let (spec, to_stdout) = match cli.command {
        Command::Optimize { algo, config, out } => {
            let mut spec = ExperimentSpec::from_file(&config, seed)?;
            spec.task = match algo {
                Algo::Gd => Task::OptimizeGd,
                Algo::Pdd => Task::OptimizePdd,
            };
            spec.output = Some(out);
            (spec, false)
        }
        Command::Evaluate(a) => {
            let mut spec = load(a.config.as_deref(), seed)?;
            spec.task = if spec.axis.is_some() { Task::Sweep } else { Task::Evaluate };
            apply_eval(&mut spec, &a)?;
            (spec, a.out.is_none())
        }
        Command::Crlb { config, out } => {
            let mut spec = ExperimentSpec::from_file(&config, seed)?;
            spec.task = Task::Crlb;
            let to_stdout = out.is_none();
            spec.output = out;
            (spec, to_stdout)
        }
        Command::Sweep { axis, grid, crlb, eval } => {
            let mut spec = load(eval.config.as_deref(), seed)?;
            spec.task = if crlb { Task::Crlb } else { Task::Sweep };
            spec.axis = Some(match axis {
                Axis::PMax => SweepAxis::PMax,
                Axis::MR => SweepAxis::MR,
                Axis::Distance => SweepAxis::Distance,
            });
            spec.grid = grid;
            apply_eval(&mut spec, &eval)?;
            (spec, eval.out.is_none())
        }
        Command::Run { config, out } => {
            let mut spec = ExperimentSpec::from_file(&config, seed)?;
            if out.is_some() {
                spec.output = out;
            }
            let optimizer = matches!(spec.task, Task::OptimizeGd | Task::OptimizePdd);
            let to_stdout = spec.output.is_none() && !optimizer;
            (spec, to_stdout)
        }
    };
    let out = run_experiment(&spec)?;
    if to_stdout {
        print!("{}", rows_to_csv(&out.rows));
    }
    for line in &out.summary {
        eprintln!("{line}");
    }
    for f in &out.files {
        eprintln!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
