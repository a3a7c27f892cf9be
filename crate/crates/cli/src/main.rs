use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hkuramoto_cli::config::ScalarOrList;
use hkuramoto_cli::{run, CliError, Command, FileConfig, RunConfig};

/// Hebbian Kuramoto experiments: simulation, lock scans, feasibility
/// sweeps and stability classification.
#[derive(Debug, Parser)]
#[command(name = "hkuramoto", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,

    /// TOML config file; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    alpha: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    mu: Option<f64>,
    /// `complete:N` or an edge-list file.
    #[arg(long, global = true)]
    graph: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Frequency-plane range `lo:hi:n`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    a_range: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    b_range: Option<String>,
    /// Natural frequencies, comma separated.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    omega: Option<Vec<f64>>,
    /// Initial coupling on every edge.
    #[arg(long, global = true, allow_hyphen_values = true)]
    gamma0: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    t_end: Option<f64>,
    #[arg(long, global = true)]
    count: Option<usize>,
    /// Random starts per grid point in feasibility sweeps (0 disables).
    #[arg(long, global = true)]
    starts: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Integrate one configuration and write its trajectory.
    Simulate,
    /// Lock detection over the three-oscillator frequency plane.
    LockScan,
    /// Fixed-point existence and stability over the frequency plane.
    Feasibility,
    /// Solve for and classify one fixed point.
    Stability,
    /// Compare Hebbian and classical stability at random fixed points.
    TheoremCheck,
}

impl Cli {
    fn flags(&self) -> FileConfig {
        FileConfig {
            out: self.out.clone(),
            alpha: self.alpha,
            mu: self.mu,
            graph: self.graph.clone(),
            seed: self.seed,
            a_range: self.a_range.clone(),
            b_range: self.b_range.clone(),
            omega: self.omega.clone(),
            gamma0: self.gamma0.map(ScalarOrList::Scalar),
            t_end: self.t_end,
            count: self.count,
            starts: self.starts,
            ..Default::default()
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(2);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    let command = match cli.command {
        Sub::Simulate => Command::Simulate,
        Sub::LockScan => Command::LockScan,
        Sub::Feasibility => Command::Feasibility,
        Sub::Stability => Command::Stability,
        Sub::TheoremCheck => Command::TheoremCheck,
    };
    let result = (|| -> Result<String, CliError> {
        let file = match &cli.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let cfg = RunConfig::resolve(file.overlay(cli.flags()))?;
        run(command, &cfg)
    })();
    match result {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("hkuramoto: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
