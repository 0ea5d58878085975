use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use qbqaoa::analysis::{run_experiment, ExperimentConfig, ExperimentKind};
use qbqaoa::encoding::build_layout;
use qbqaoa::market_data::{compute_moments, frontier_constants, load_price_history, MarketMoments};
use qbqaoa::parallel::Parallelism;

#[derive(Parser)]
#[command(name = "qbqaoa", version, about = "Quasi-binary encoded QAOA for portfolio optimisation")]
struct Cli {
    /// Run every loop on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Estimate return moments from a `date,<ticker>...` closing-price CSV.
    Moments {
        prices: PathBuf,
        /// Comma-separated subset of tickers.
        #[arg(long, value_delimiter = ',')]
        tickers: Vec<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Convert between risk factor and target return on the efficient frontier.
    Frontier {
        moments: PathBuf,
        #[arg(long, conflicts_with = "mu", required_unless_present = "mu")]
        q: Option<f64>,
        #[arg(long)]
        mu: Option<f64>,
    },
    /// Print the qubit layout for the given variable ranges.
    Encode {
        #[arg(required = true)]
        ranges: Vec<u64>,
    },
    /// Solve one configured instance and print its report.
    Solve {
        config: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Mixability matrices as PGM and CSV.
    Mixability {
        config: PathBuf,
        #[arg(short, long, default_value = "results/mixability")]
        output: PathBuf,
    },
    /// Precision-increasing iteration study.
    Iterate {
        config: PathBuf,
        #[arg(short, long, default_value = "results/iterate")]
        output: PathBuf,
    },
    /// Qubits per variable for ranges `1..=max_range`.
    SweepQubits {
        #[arg(long, default_value_t = 4096)]
        max_range: u64,
        #[arg(short, long, default_value = "results/sweep-qubits")]
        output: PathBuf,
    },
    /// Run any experiment config.
    Run {
        config: PathBuf,
        #[arg(short, long, default_value = "results/run")]
        output: PathBuf,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let par = if cli.sequential { Parallelism::Sequential } else { Parallelism::default() };
    match cli.cmd {
        Cmd::Moments { prices, tickers, output } => {
            let mut history = load_price_history(File::open(&prices).with_context(|| format!("opening {}", prices.display()))?)?;
            if !tickers.is_empty() {
                history = history.select(&tickers)?;
            }
            emit(&compute_moments(&history)?.to_json()?, output.as_deref())
        }
        Cmd::Frontier { moments, q, mu } => {
            let m = MarketMoments::from_json(&std::fs::read_to_string(&moments)?)?;
            let k = frontier_constants(&m)?;
            let (q, mu) = match (q, mu) {
                (Some(q), _) => (q, k.target_from_risk_factor(q)?),
                (None, Some(mu)) => (k.risk_factor_from_target(mu)?, mu),
                _ => bail!("give --q or --mu"),
            };
            let out = serde_json::json!({
                "q": q,
                "mu": mu,
                "variance": k.frontier_variance(mu)?,
                "slope": k.frontier_slope(mu),
                "constants": k,
            });
            emit(&serde_json::to_string_pretty(&out)?, None)
        }
        Cmd::Encode { ranges } => emit(&build_layout(&ranges).to_json()?, None),
        Cmd::Solve { config, output } => {
            let (cfg, dir) = load(&config, ExperimentKind::Solve)?;
            match output {
                Some(out) => report_written(run_experiment(&cfg, &dir, &out, par)?),
                None => emit(&qbqaoa::analysis::solve(&cfg, &dir, par)?.to_json()?, None),
            }
        }
        Cmd::Mixability { config, output } => {
            let (cfg, dir) = load(&config, ExperimentKind::Mixability)?;
            report_written(run_experiment(&cfg, &dir, &output, par)?)
        }
        Cmd::Iterate { config, output } => {
            let (cfg, dir) = load(&config, ExperimentKind::Iterate)?;
            report_written(run_experiment(&cfg, &dir, &output, par)?)
        }
        Cmd::SweepQubits { max_range, output } => {
            let cfg = ExperimentConfig::from_toml(&format!("kind = \"sweep-qubits\"\nmax_range = {max_range}\n"))?;
            report_written(run_experiment(&cfg, Path::new("."), &output, par)?)
        }
        Cmd::Run { config, output } => {
            let (cfg, dir) = ExperimentConfig::load(&config)?;
            report_written(run_experiment(&cfg, &dir, &output, par)?)
        }
    }
}

/// Load a config whose `kind` must match the subcommand.
fn load(path: &Path, kind: ExperimentKind) -> Result<(ExperimentConfig, PathBuf)> {
    let (cfg, dir) = ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    if cfg.kind != kind {
        bail!("{} has kind {:?}, expected {:?}", path.display(), cfg.kind, kind);
    }
    Ok((cfg, dir))
}

fn emit(text: &str, output: Option<&Path>) -> Result<()> {
    match output {
        Some(p) => std::fs::write(p, format!("{text}\n"))?,
        None => match writeln!(io::stdout(), "{text}") {
            Err(e) if e.kind() == io::ErrorKind::BrokenPipe => {}
            r => r?,
        },
    }
    Ok(())
}

fn report_written(paths: Vec<PathBuf>) -> Result<()> {
    let mut out = io::stdout().lock();
    for p in paths {
        writeln!(out, "{}", p.display())?;
    }
    Ok(())
}
