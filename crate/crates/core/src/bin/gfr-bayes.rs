use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use gfr_bayes::harness::validate::run_validation;
use gfr_bayes::harness::{emit_tables, run_sweep, ExperimentConfig, Execution, HarnessError, RunMetadata, ESTIMATE_COLUMNS};
use gfr_bayes::mcmc::{thinned_draws, write_draws, ChainState, MarginalTarget, MhConfig};
use gfr_bayes::model::ModelConfig;
use gfr_bayes::posterior::{EntropyMode, LossConstants, PosteriorContext};
use gfr_bayes::sample::SampleFile;

const EXIT_CONFIG: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "gfr-bayes", version, about = "Bayes estimation for the a + b t^(theta-1) failure rate model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configured sweep and write CSV tables
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_name = "strict|drop")]
        entropy_mode: Option<EntropyMode>,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Run repetitions on one thread
        #[arg(long)]
        sequential: bool,
    },
    /// Print the six estimates for one censored sample
    Estimate {
        #[arg(long)]
        sample: PathBuf,
        #[arg(long)]
        theta: f64,
        #[arg(long)]
        lambda1: f64,
        #[arg(long)]
        lambda2: f64,
        #[arg(long)]
        rho: f64,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        c1: f64,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        c2: f64,
        #[arg(long, value_name = "strict|drop", default_value = "drop")]
        entropy_mode: EntropyMode,
    },
    /// Cross-check the closed forms against quadrature and enumeration
    Validate {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Dump thinned draws from the marginal lifetime density, one per line
    Draws {
        #[arg(long)]
        theta: f64,
        #[arg(long)]
        lambda1: f64,
        #[arg(long)]
        lambda2: f64,
        #[arg(long)]
        rho: f64,
        #[arg(long, default_value_t = 10_000)]
        count: usize,
        #[arg(long, default_value_t = 100)]
        thin: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl std::fmt::Display) -> Self {
        Self { code, message: message.to_string() }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        Failure::new(e.exit_code() as u8, e)
    }
}

fn model(theta: f64, lambda1: f64, lambda2: f64, rho: f64) -> Result<ModelConfig, Failure> {
    ModelConfig::new(theta, lambda1, lambda2, rho).map_err(|e| Failure::new(EXIT_CONFIG, e))
}

fn run(
    config: PathBuf,
    seed: Option<u64>,
    entropy_mode: Option<EntropyMode>,
    out: Option<PathBuf>,
    sequential: bool,
) -> Result<(), Failure> {
    let text = fs::read_to_string(&config).map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", config.display())))?;
    let mut cfg: ExperimentConfig =
        text.parse().map_err(|e| Failure::new(EXIT_CONFIG, format!("{}: {e}", config.display())))?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(mode) = entropy_mode {
        cfg.entropy_mode = mode;
    }
    if let Some(out) = out {
        cfg.output_path = out;
    }
    let exec = if sequential { Execution::Sequential } else { Execution::default() };
    info!("config hash {}", cfg.hash());
    let rows = run_sweep(&cfg, exec)?;
    let files = emit_tables(&rows, cfg.sweep.param, &RunMetadata::for_config(&cfg), &cfg.output_path)?;

    println!("{:>10} {}", cfg.sweep.param, ESTIMATE_COLUMNS.map(|c| format!("{c:>12}")).join(" "));
    for row in &rows {
        println!("{:>10} {}", row.value, row.means.map(|x| format!("{x:>12.6}")).join(" "));
    }
    println!("wrote {}", files.tables().map(|p| p.display().to_string()).join(", "));
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn estimate(
    path: PathBuf,
    theta: f64,
    lambda1: f64,
    lambda2: f64,
    rho: f64,
    c1: f64,
    c2: f64,
    mode: EntropyMode,
) -> Result<(), Failure> {
    let cfg = model(theta, lambda1, lambda2, rho)?;
    let loss = LossConstants::new(c1, c2).map_err(|e| Failure::new(EXIT_CONFIG, e))?;
    let text = fs::read_to_string(&path).map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", path.display())))?;
    let file: SampleFile = text.parse().map_err(|e| Failure::new(EXIT_CONFIG, format!("{}: {e}", path.display())))?;
    if file.theta != theta {
        return Err(Failure::new(
            EXIT_CONFIG,
            format!("{} was written for theta = {}, but --theta is {theta}", path.display(), file.theta),
        ));
    }
    let ctx = PosteriorContext::new(cfg, &file.sample).map_err(|e| Failure::new(EXIT_NUMERICAL, e))?;
    let est = ctx.estimate(&loss, mode).map_err(|e| match e {
        gfr_bayes::posterior::PosteriorError::CurvatureTooNegative { .. } => Failure::new(EXIT_CONFIG, e),
        _ => Failure::new(EXIT_NUMERICAL, e),
    })?;
    for (name, value) in ESTIMATE_COLUMNS.iter().zip(est.values()) {
        println!("{name} = {value:.16e}");
    }
    if est.divergence.a_be || est.divergence.b_be {
        println!(
            "# entropy-loss expectation of 1/a diverges: {}, of 1/b diverges: {} ({} mode)",
            est.divergence.a_be,
            est.divergence.b_be,
            mode.as_str()
        );
    }
    Ok(())
}

fn validate(seed: u64) -> Result<(), Failure> {
    let checks = run_validation(seed);
    let mut failed = 0;
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        failed += usize::from(!c.passed);
    }
    if failed > 0 {
        return Err(Failure::new(EXIT_NUMERICAL, format!("{failed} of {} checks failed", checks.len())));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn draws(
    theta: f64,
    lambda1: f64,
    lambda2: f64,
    rho: f64,
    count: usize,
    thin: usize,
    seed: u64,
    out: PathBuf,
) -> Result<(), Failure> {
    let cfg = model(theta, lambda1, lambda2, rho)?;
    let mh = MhConfig::for_model(&cfg, seed);
    let target = MarginalTarget(cfg);
    let numerical = |e| Failure::new(EXIT_NUMERICAL, e);
    let mut state = ChainState::start(&target, &mh, 0).map_err(numerical)?;
    let values = thinned_draws(&target, &mh, count, thin, &mut state).map_err(numerical)?;
    write_draws(&out, &values).map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", out.display())))?;
    println!("wrote {count} draws to {} (acceptance rate {:.4})", out.display(), state.acceptance_rate());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, seed, entropy_mode, out, sequential } => run(config, seed, entropy_mode, out, sequential),
        Command::Estimate { sample, theta, lambda1, lambda2, rho, c1, c2, entropy_mode } => {
            estimate(sample, theta, lambda1, lambda2, rho, c1, c2, entropy_mode)
        }
        Command::Validate { seed } => validate(seed),
        Command::Draws { theta, lambda1, lambda2, rho, count, thin, seed, out } => {
            draws(theta, lambda1, lambda2, rho, count, thin, seed, out)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
