//! Benchmark driver for the quadratic-bound optimizer and its baselines.
//!
//! Loads a LIBSVM dataset, splits it, runs one configured method, and writes
//! the convergence series (costs, excess cost, test error against effective
//! passes) as CSV. Exit code 2 flags a configuration problem, 1 a runtime
//! failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use sqb::bench::{run_experiment, RunConfig};
use sqb::optimizer::Method;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Sqb,
    Sgd,
    Asgd,
    Sag,
}

impl From<MethodArg> for Method {
    fn from(value: MethodArg) -> Method {
        match value {
            MethodArg::Sqb => Method::Sqb,
            MethodArg::Sgd => Method::Sgd,
            MethodArg::Asgd => Method::Asgd,
            MethodArg::Sag => Method::Sag,
        }
    }
}

/// Run one optimizer on a LIBSVM dataset and emit a convergence CSV.
#[derive(Parser, Debug)]
#[command(name = "sqb-bench", version)]
struct Args {
    /// Dataset in LIBSVM text format; .gz files are decompressed.
    #[arg(long, value_name = "PATH")]
    data: PathBuf,

    /// Optimizer to run.
    #[arg(long, value_enum)]
    method: MethodArg,

    /// Constant step size (ignored by sag, which uses its Lipschitz step).
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,

    /// Ridge strength, or "auto" for 1/T on the training split.
    #[arg(long, default_value = "auto")]
    eta: String,

    /// Gradient-batch growth rate per iteration.
    #[arg(long, default_value_t = 0.05)]
    gamma_mu: f64,

    /// Curvature-batch growth rate per iteration.
    #[arg(long, default_value_t = 0.001)]
    gamma_sigma: f64,

    /// Linear-solver iterations per bound step.
    #[arg(long, default_value_t = 5)]
    solver_iters: usize,

    /// Initial gradient-batch size.
    #[arg(long, default_value_t = 5)]
    b1_mu: usize,

    /// Initial curvature-batch size.
    #[arg(long, default_value_t = 5)]
    b1_sigma: usize,

    /// Curvature-batch size cap.
    #[arg(long, default_value_t = 200)]
    cap_sigma: usize,

    /// Effective-pass budget.
    #[arg(long, default_value_t = 10.0)]
    passes: f64,

    /// RNG seed for batch draws and example picks.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Output CSV path.
    #[arg(long, value_name = "PATH")]
    out: PathBuf,

    /// Training fraction of the shuffled dataset, in (0, 1].
    #[arg(long, default_value_t = 0.9)]
    split: f64,

    /// RNG seed for the train/test shuffle.
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
}

fn build_config(args: Args) -> Result<RunConfig, String> {
    if !(args.alpha > 0.0) || !args.alpha.is_finite() {
        return Err(format!("--alpha {} is not a positive number", args.alpha));
    }
    let eta = match args.eta.as_str() {
        "auto" => None,
        text => match text.parse::<f64>() {
            Ok(value) if value > 0.0 && value.is_finite() => Some(value),
            _ => return Err(format!("--eta {text:?} is neither \"auto\" nor a positive number")),
        },
    };
    if !(args.gamma_mu >= 0.0) || !args.gamma_mu.is_finite() {
        return Err(format!("--gamma-mu {} is not a nonnegative number", args.gamma_mu));
    }
    if !(args.gamma_sigma >= 0.0) || !args.gamma_sigma.is_finite() {
        return Err(format!(
            "--gamma-sigma {} is not a nonnegative number",
            args.gamma_sigma
        ));
    }
    if args.solver_iters < 1 {
        return Err("--solver-iters must be at least 1".to_string());
    }
    if args.b1_mu < 1 || args.b1_sigma < 1 {
        return Err("--b1-mu and --b1-sigma must be at least 1".to_string());
    }
    if args.cap_sigma < 1 {
        return Err("--cap-sigma must be at least 1".to_string());
    }
    if !(args.passes >= 0.0) || !args.passes.is_finite() {
        return Err(format!("--passes {} is not a nonnegative number", args.passes));
    }
    if !(args.split > 0.0 && args.split <= 1.0) {
        return Err(format!("--split {} is outside (0, 1]", args.split));
    }
    Ok(RunConfig {
        data_path: args.data,
        method: args.method.into(),
        alpha: args.alpha,
        eta,
        gamma_mu: args.gamma_mu,
        gamma_sigma: args.gamma_sigma,
        solver_iters: args.solver_iters,
        b1_mu: args.b1_mu,
        b1_sigma: args.b1_sigma,
        cap_sigma: args.cap_sigma,
        passes: args.passes,
        seed: args.seed,
        out_path: args.out,
        split_fraction: args.split,
        split_seed: args.split_seed,
    })
}

fn main() -> ExitCode {
    env_logger::init();
    let args = Args::parse();
    let config = match build_config(args) {
        Ok(config) => config,
        Err(message) => {
            eprintln!("error: {message}");
            return ExitCode::from(2);
        }
    };
    match run_experiment(&config) {
        Ok(rows) => {
            log::info!(
                "wrote {} metric rows to {}",
                rows.len(),
                config.out_path.display()
            );
            ExitCode::SUCCESS
        }
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::FAILURE
        }
    }
}
