use std::path::PathBuf;
use std::process::ExitCode;

use antireduce::{BracketSign, Method};
use antireduce_cli::{commands, CliError, ExperimentConfig, PinningChoice, SystemSource};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "antireduce",
    version,
    about = "Collective integrators for Lie-Poisson systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Audit the algebra, energy gradient and Casimirs at the initial momentum.
    Check(Common),
    /// Integrate the anti-reduced system and write trajectories and invariants.
    Run(Common),
    /// Collective run against RK4 on the Lie-Poisson equation.
    Compare(Common),
    /// Empirical convergence orders of midpoint, GL4 and RK4.
    Convergence(Common),
}

#[derive(Args)]
struct Common {
    /// kida, rattleback or heavy_top
    #[arg(long)]
    preset: Option<String>,
    /// Experiment config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    /// midpoint, gl4 or rk4
    #[arg(long)]
    integrator: Option<Method>,
    /// plus or minus
    #[arg(long)]
    sign: Option<BracketSign>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Use randomized Gauss-Newton pinning with this seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn into_config(self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(p) = self.preset {
            cfg.system = SystemSource::Preset(p);
        }
        if self.dt.is_some() {
            cfg.dt = self.dt;
        }
        if self.t_end.is_some() {
            cfg.t_end = self.t_end;
        }
        if let Some(m) = self.integrator {
            cfg.integrator = m;
        }
        if self.sign.is_some() {
            cfg.sign = self.sign;
        }
        if let Some(out) = self.out {
            cfg.out_dir = out;
        }
        if let Some(seed) = self.seed {
            let f0 = match cfg.pinning {
                PinningChoice::Random { f0, .. } => f0,
                _ => 1.0,
            };
            cfg.pinning = PinningChoice::Random { seed, f0 };
        }
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (run, common): (fn(&ExperimentConfig) -> _, _) = match cli.command {
        Command::Check(c) => (commands::check, c),
        Command::Run(c) => (commands::run, c),
        Command::Compare(c) => (commands::compare, c),
        Command::Convergence(c) => (commands::convergence, c),
    };
    let result = common.into_config().and_then(|cfg| run(&cfg));
    match result {
        Ok(out) => {
            println!("{}", out.summary);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
