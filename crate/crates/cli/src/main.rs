mod commands;
mod output;
mod selftest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "hedgefront", version, about = "f-divergence regularized channels, hedges, certificates and frontiers")]
struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true, env = "HEDGEFRONT_THREADS")]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, env = "HEDGEFRONT_OUT", default_value = "out")]
    out: PathBuf,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GenArgs {
    /// Generator id.
    #[arg(long, default_value = "kl")]
    pub generator: String,
    /// Hockey-stick parameter (> 1).
    #[arg(long)]
    pub gamma: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the regularized channel at one beta.
    Solve {
        #[arg(long)]
        problem: PathBuf,
        #[command(flatten)]
        gen: GenArgs,
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, default_value_t = 20000)]
        max_iters: usize,
    },
    /// Solve, then emit the optimal perturbation, certificate and indifference report.
    Hedge {
        #[arg(long)]
        problem: PathBuf,
        #[command(flatten)]
        gen: GenArgs,
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Matrix of L(beta) + I_f(beta) / beta_adv.
    HedgeGrid {
        #[arg(long)]
        problem: PathBuf,
        #[command(flatten)]
        gen: GenArgs,
        #[arg(long, default_value_t = 0.1)]
        beta_min: f64,
        #[arg(long, default_value_t = 100.0)]
        beta_max: f64,
        #[arg(long, default_value_t = 30)]
        points: usize,
        /// Adversary grid; defaults to the beta grid.
        #[arg(long)]
        adv_min: Option<f64>,
        #[arg(long)]
        adv_max: Option<f64>,
        #[arg(long)]
        adv_points: Option<usize>,
    },
    /// Trace the loss/information frontier over a geometric beta grid.
    Frontier {
        #[arg(long)]
        problem: PathBuf,
        #[command(flatten)]
        gen: GenArgs,
        #[arg(long, default_value_t = 0.1)]
        beta_min: f64,
        #[arg(long, default_value_t = 100.0)]
        beta_max: f64,
        #[arg(long, default_value_t = 30)]
        points: usize,
        /// Comma-separated generator ids to project onto.
        #[arg(long, value_delimiter = ',')]
        project: Vec<String>,
    },
    /// Tail bound for one threshold.
    Tails {
        #[command(flatten)]
        gen: GenArgs,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        u: f64,
        #[arg(long, default_value_t = 0.0)]
        phi: f64,
        #[arg(long)]
        info: f64,
    },
    /// Loss-scaling probe of a black box over a list of controls.
    Probe {
        /// builtin:<generator id>, builtin:kernel_ridge, builtin:mlp, or external:<command line>.
        #[arg(long = "box")]
        bbox: String,
        /// Required for solver and external boxes.
        #[arg(long)]
        problem: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', required = true)]
        controls: Vec<f64>,
        #[arg(long, default_value_t = 9)]
        t_nodes: usize,
        /// Beta assigned to the last control (default: that control for solver boxes, else 1).
        #[arg(long)]
        anchor: Option<f64>,
        /// Sampled pairs per call for solver boxes; training samples for learner boxes.
        #[arg(long)]
        samples: Option<usize>,
        /// Codebook size for learner boxes.
        #[arg(long, default_value_t = 32)]
        codes: usize,
        /// Pilot samples for learner codebooks.
        #[arg(long, default_value_t = 4)]
        pilot: usize,
    },
    /// Regression experiment with kernel ridge and a small network.
    Experiment {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "desk")]
        scale: String,
    },
    /// White-box round trips: certificate identity, gradient, Pareto oracle.
    Selftest,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(String),
    Io(String),
}

impl CliError {
    pub fn from_core(context: &str, e: hedgefront::Error) -> Self {
        if e.is_config() {
            CliError::Config(format!("{context}: {e}"))
        } else {
            CliError::Numeric(format!("{context}: {e}"))
        }
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) | CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
            CliError::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(2),
            };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("config error: --threads must be positive");
            return ExitCode::from(2);
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().ok();
    }
    let seed = cli.seed;
    let out = commands::Ctx {
        out: cli.out.clone(),
        seed: seed.unwrap_or(0),
    };
    let result = match cli.command {
        Command::Solve {
            problem,
            gen,
            beta,
            tol,
            max_iters,
        } => commands::solve(&out, &problem, &gen, beta, tol, max_iters),
        Command::Hedge { problem, gen, beta, tol } => commands::hedge(&out, &problem, &gen, beta, tol),
        Command::HedgeGrid {
            problem,
            gen,
            beta_min,
            beta_max,
            points,
            adv_min,
            adv_max,
            adv_points,
        } => commands::hedge_grid(
            &out,
            &problem,
            &gen,
            (beta_min, beta_max, points),
            (adv_min.unwrap_or(beta_min), adv_max.unwrap_or(beta_max), adv_points.unwrap_or(points)),
        ),
        Command::Frontier {
            problem,
            gen,
            beta_min,
            beta_max,
            points,
            project,
        } => commands::frontier(&out, &problem, &gen, beta_min, beta_max, points, &project),
        Command::Tails { gen, beta, u, phi, info } => commands::tails(&out, &gen, beta, u, phi, info),
        Command::Probe {
            bbox,
            problem,
            controls,
            t_nodes,
            anchor,
            samples,
            codes,
            pilot,
        } => commands::probe(
            &out,
            &commands::ProbeArgs {
                bbox,
                problem,
                controls,
                t_nodes,
                anchor,
                samples,
                codes,
                pilot,
            },
        ),
        Command::Experiment { config, scale } => commands::experiment(&out, config.as_deref(), &scale, seed),
        Command::Selftest => selftest::run(seed.unwrap_or(0)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code())
        }
    }
}
