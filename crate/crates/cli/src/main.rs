mod commands;
mod config;
mod output;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "pucci", version, about = "Phase-plane analysis of radial solutions to Pucci extremal equations")]
pub struct Cli {
    #[command(flatten)]
    pub params: ParamArgs,

    /// TOML file with default values; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ParamArgs {
    /// Lower ellipticity constant.
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    /// Upper ellipticity constant.
    #[arg(long = "Lambda", global = true)]
    pub big_lambda: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub op: Option<OpArg>,
    /// Space dimension.
    #[arg(long = "N", global = true)]
    pub n: Option<u32>,
    /// Weight exponent in |x|^a u^p.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub a: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OpArg {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DirArg {
    Forward,
    Backward,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dimension-like numbers and the exponents that organise the regimes.
    Exponents {
        #[arg(long)]
        p: Option<f64>,
    },
    /// Trace one orbit; writes `<out>.csv` and `<out>.events.json`.
    Orbit {
        #[arg(long)]
        p: Option<f64>,
        /// `gamma`, `upsilon` or `point X,Z`.
        #[arg(long, num_args = 1..=2, value_names = ["KIND", "X,Z"], default_values = ["gamma"])]
        seed: Vec<String>,
        #[arg(long, value_enum, default_value = "forward")]
        direction: DirArg,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Class of p from the fate of the regular orbit.
    Classify {
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// Critical exponent by bisection between the theoretical bounds.
    Critical {
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// Classify a uniform grid of exponents; CSV `p,class,detail`.
    Sweep {
        #[arg(long = "p-from")]
        p_from: f64,
        #[arg(long = "p-to")]
        p_to: f64,
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// SVG phase portrait of the first quadrant.
    Portrait {
        #[arg(long)]
        p: Option<f64>,
        /// Arrow grid as `WxH`.
        #[arg(long, default_value = "24x18")]
        grid: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Catalog of singular solutions as JSON.
    Singular {
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Direct radial shooting from u(0) = gamma; CSV `r,u,du,ddu`.
    Shoot {
        #[arg(long)]
        p: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long = "r-max")]
        r_max: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Signs of the weighted divergence on the two regions.
    Dulac {
        #[arg(long)]
        p: Option<f64>,
        /// Also integrate along a detected periodic orbit.
        #[arg(long = "line-integral")]
        line_integral: bool,
    },
    /// Nonexistence check for exterior positive solutions.
    Exterior {
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// Print the effective configuration as TOML.
    Config,
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("LOGLEVEL", "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
