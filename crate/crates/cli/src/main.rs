//! `copula`: measure copula families, reproduce the M_θ table, verify the
//! structural identities, sample, and audit data for asymmetry.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or input error.

mod commands;
mod family;
mod output;
mod verify;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use copula_core::{PExponent, QuadratureConfig, RngSeed};

use crate::family::FamilyArgs;

#[derive(Debug, Parser)]
#[command(
    name = "copula",
    version,
    about = "Bivariate copula dependence and asymmetry toolkit"
)]
struct Cli {
    /// Emit a single JSON document instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Quadrature grid resolution per axis.
    #[arg(long, global = true, value_name = "N")]
    grid_n: Option<usize>,
    /// Seed for every random draw.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Exponents for μ_p: reals ≥ 1 or "inf", comma-separated or repeated.
    #[arg(long = "p", global = true, value_delimiter = ',', value_parser = parse_p, value_name = "P")]
    p: Vec<PExponent>,
    /// Include the current Unix time in the output.
    #[arg(long, global = true)]
    timestamp: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Every functional of one copula.
    Measure {
        #[command(flatten)]
        family: FamilyArgs,
        /// Pairs for the Monte-Carlo τ fallback.
        #[arg(long, default_value_t = copula_core::measures::DEFAULT_MC_PAIRS)]
        mc_pairs: usize,
    },
    /// Closed forms against numerics for the M_θ family.
    Table {
        /// θ values in [0, 1/3]; defaults to 0, 0.05, ..., 0.3, 1/3.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        theta: Vec<f64>,
    },
    /// Check one of the structural identities over a seeded pool.
    Verify {
        /// Which identity: 1, 2, 3, 4 or corollary.
        prop: verify::Prop,
        /// Number of random trials.
        #[arg(long, default_value_t = 50)]
        trials: usize,
    },
    /// Draw a sample and write it as CSV.
    Sample {
        #[command(flatten)]
        family: FamilyArgs,
        /// Number of pairs.
        #[arg(long)]
        n: usize,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate every functional from a CSV file and test for asymmetry.
    Audit {
        /// Two-column CSV, optional header.
        path: PathBuf,
        /// Bootstrap resamples.
        #[arg(long, default_value_t = 200)]
        bootstrap: usize,
        /// Confidence level of the bootstrap intervals.
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        /// Rounds of swap randomization for the symmetric floor.
        #[arg(long, default_value_t = 100)]
        swap_rounds: usize,
    },
}

fn parse_p(s: &str) -> Result<PExponent, String> {
    s.parse::<PExponent>().map_err(|e| e.to_string())
}

/// Settings shared by every subcommand.
pub struct Globals {
    pub json: bool,
    pub grid_n: Option<usize>,
    pub seed: Option<u64>,
    pub p: Vec<PExponent>,
    pub timestamp: Option<u64>,
}

impl Globals {
    /// Quadrature settings with the `--grid-n` override applied.
    pub fn quadrature(&self, refine_levels: usize) -> Result<QuadratureConfig, String> {
        let mut cfg = QuadratureConfig {
            refine_levels,
            ..Default::default()
        };
        if let Some(n) = self.grid_n {
            cfg.n = n;
        }
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }

    pub fn seed_or(&self, default: RngSeed) -> RngSeed {
        self.seed.map(RngSeed).unwrap_or(default)
    }

    pub fn p_list_or(&self, default: &[PExponent]) -> Vec<PExponent> {
        if self.p.is_empty() {
            default.to_vec()
        } else {
            self.p.clone()
        }
    }
}

/// What a successful run produced.
pub struct Outcome {
    pub stdout: String,
    pub verified: bool,
}

impl Outcome {
    pub fn ok(stdout: String) -> Self {
        Self {
            stdout,
            verified: true,
        }
    }
}

fn run(cli: Cli) -> Result<Outcome, String> {
    let timestamp = cli.timestamp.then(|| {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0)
    });
    let g = Globals {
        json: cli.json,
        grid_n: cli.grid_n,
        seed: cli.seed,
        p: cli.p,
        timestamp,
    };
    match cli.command {
        Command::Measure { family, mc_pairs } => commands::measure(&g, &family, mc_pairs),
        Command::Table { theta } => commands::table(&g, &theta),
        Command::Verify { prop, trials } => verify::run(&g, prop, trials),
        Command::Sample { family, n, out } => commands::sample(&g, &family, n, out.as_deref()),
        Command::Audit {
            path,
            bootstrap,
            level,
            swap_rounds,
        } => commands::audit(&g, &path, bootstrap, level, swap_rounds),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(outcome) => {
            let mut stdout = std::io::stdout().lock();
            // A closed pipe is not worth a panic.
            let _ = stdout.write_all(outcome.stdout.as_bytes());
            let _ = stdout.flush();
            if outcome.verified {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
