use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use kernelfed_cli::checks;
use kernelfed_cli::commands::{run_gen, run_solve, Learner};
use kernelfed_cli::config::{build_config, read_config_file, Overrides, RunConfig};
use kernelfed_cli::sweeps::{emit_outputs, precheck_out_path, run_sweep};

/// Federated kernel classification experiments.
#[derive(Parser)]
#[command(name = "kernelfed", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct CommonFlags {
    /// key=value config file (or a JSON sidecar) supplying any flag
    #[arg(long)]
    config: Option<PathBuf>,
    /// Experiment kind: sample-size, gamma, or agents
    #[arg(long)]
    experiment: Option<String>,
    /// Base seed; repetition r uses seed + r
    #[arg(long)]
    seed: Option<u64>,
    /// Repetitions per sweep value
    #[arg(long)]
    reps: Option<usize>,
    /// Output path
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sparsity weights, comma separated
    #[arg(long)]
    gamma: Option<String>,
    /// Training sizes, comma separated
    #[arg(long)]
    n: Option<String>,
    /// Agent counts, comma separated
    #[arg(long)]
    agents: Option<String>,
    /// Margin slack in [0, 1]
    #[arg(long)]
    epsilon: Option<f64>,
    /// Ascent step size
    #[arg(long)]
    eta: Option<f64>,
    /// Iteration cap per solve
    #[arg(long)]
    iters: Option<usize>,
    /// Early-stop threshold on the projected-gradient norm
    #[arg(long)]
    grad_tol: Option<f64>,
    /// Lattice cells per dimension
    #[arg(long)]
    grid_res: Option<usize>,
    /// Kernel widths, comma separated
    #[arg(long)]
    widths: Option<String>,
    /// Accelerometer CSV (user,activity,timestamp,ax,ay,az)
    #[arg(long)]
    data: Option<PathBuf>,
    /// Activity labels, e.g. Walking=+1,Jogging=-1
    #[arg(long)]
    label_map: Option<String>,
    /// Feature noise sigma for the synthetic task
    #[arg(long)]
    noise: Option<f64>,
    /// Subspace overlap fraction for the synthetic task
    #[arg(long)]
    overlap: Option<f64>,
    /// Held-out test samples for the synthetic task
    #[arg(long)]
    test_n: Option<usize>,
    /// Per-user test fraction for file data
    #[arg(long)]
    test_fraction: Option<f64>,
    /// Window length for accelerometer ingestion
    #[arg(long)]
    window_seconds: Option<f64>,
    /// Record per-iteration solver traces as CSV
    #[arg(long)]
    trace: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic dataset and archive it as CSV
    Gen {
        #[command(flatten)]
        flags: CommonFlags,
    },
    /// One federated and/or centralized run, reported as JSON lines
    Solve {
        #[command(flatten)]
        flags: CommonFlags,
        /// federated, centralized, or both
        #[arg(long, default_value = "both")]
        learner: String,
    },
    /// Sweep a variable over seeded repetitions and emit a CSV table
    Sweep {
        #[command(flatten)]
        flags: CommonFlags,
    },
    /// Run the theory-validation suite
    Check {
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        /// Smaller instance counts
        #[arg(long)]
        quick: bool,
    },
}

fn to_overrides(f: &CommonFlags) -> Overrides {
    Overrides {
        experiment: f.experiment.clone(),
        seed: f.seed,
        reps: f.reps,
        out: f.out.clone(),
        gamma: f.gamma.clone(),
        n: f.n.clone(),
        agents: f.agents.clone(),
        epsilon: f.epsilon,
        eta: f.eta,
        iters: f.iters,
        grad_tol: f.grad_tol,
        grid_res: f.grid_res,
        widths: f.widths.clone(),
        data: f.data.clone(),
        label_map: f.label_map.clone(),
        noise: f.noise,
        overlap: f.overlap,
        test_n: f.test_n,
        test_fraction: f.test_fraction,
        window_seconds: f.window_seconds,
        trace: f.trace,
    }
}

fn effective_config(flags: &CommonFlags) -> kernelfed::Result<RunConfig> {
    let file = flags.config.as_deref().map(read_config_file).transpose()?;
    build_config(file.as_ref(), &to_overrides(flags))
}

fn run(cli: Cli) -> kernelfed::Result<()> {
    match cli.command {
        Command::Gen { flags } => {
            let cfg = effective_config(&flags)?;
            println!("{}", run_gen(&cfg)?);
        }
        Command::Solve { flags, learner } => {
            let cfg = effective_config(&flags)?;
            let learner = Learner::parse(&learner)?;
            for line in run_solve(&cfg, learner)? {
                println!("{line}");
            }
        }
        Command::Sweep { flags } => {
            let cfg = effective_config(&flags)?;
            precheck_out_path(&cfg.out)?;
            let rows = run_sweep(&cfg)?;
            emit_outputs(&rows, &cfg, &cfg.out)?;
            println!(
                "wrote {} rows to {} (sidecar {}.config.json)",
                rows.len(),
                cfg.out.display(),
                cfg.out.display()
            );
        }
        Command::Check { seed, quick } => {
            let reports = checks::run_all(seed, quick)?;
            let mut all_passed = true;
            for r in &reports {
                println!("{}", r.line());
                all_passed &= r.passed;
            }
            if !all_passed {
                return Err(kernelfed::Error::invalid("validation suite failed"));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                kernelfed::Error::SolverDiverged { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
