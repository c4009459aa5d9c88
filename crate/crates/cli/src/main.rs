//! `langevin`: scenario-driven front end for the kernel library.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::RunError;
use config::Scenario;

#[derive(Parser)]
#[command(
    name = "langevin",
    version,
    about = "Fundamental solutions of kinetic Fokker-Planck and stochastic Langevin equations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario file (`key = value` with `[section]` headers).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for CSV tables and reports.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (results do not depend on it).
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides `parametrix.order`.
    #[arg(long)]
    order: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form kernel of the constant-coefficient equation on a grid.
    Density(Common),
    /// Parametrix series for a Kolmogorov family.
    Parametrix(Common),
    /// Stochastic kernel along one Brownian path.
    Spde(Common),
    /// Monte Carlo check of the conditional law.
    McCheck(Common),
    /// Two-sided Gaussian bound constants.
    Bounds(Common),
    /// Minimum-energy control and energy bounds.
    Control(Common),
    /// Empirical constants of the stochastic flow estimates.
    FlowCheck(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, common, run): (&str, &Common, fn(&Scenario) -> commands::Outcome) = match &cli.command {
        Command::Density(c) => ("density", c, commands::density),
        Command::Parametrix(c) => ("parametrix", c, commands::parametrix),
        Command::Spde(c) => ("spde", c, commands::spde_kernel),
        Command::McCheck(c) => ("mc-check", c, commands::mc_check),
        Command::Bounds(c) => ("bounds", c, commands::bounds),
        Command::Control(c) => ("control", c, commands::control),
        Command::FlowCheck(c) => ("flow-check", c, commands::flow_check),
    };
    let text = match fs::read_to_string(&common.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", common.config.display());
            return ExitCode::from(2);
        }
    };
    let mut sc = match Scenario::parse(&text) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(s) = common.seed {
        sc.seed = s;
    }
    if let Some(n) = common.order {
        sc.parametrix.order = n;
        if let Err(e) = sc.parametrix.validate() {
            eprintln!("error: --order: {e}");
            return ExitCode::from(2);
        }
    }
    if let Some(n) = common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: --threads: {e}");
            return ExitCode::from(2);
        }
    }
    let (report, tables) = match run(&sc) {
        Ok(x) => x,
        Err(RunError::Config(e)) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
        Err(RunError::Numerical(m)) => {
            eprintln!("numerical failure in `{name}`: {m}");
            return ExitCode::from(3);
        }
    };
    let write = || -> std::io::Result<()> {
        fs::create_dir_all(&common.out)?;
        for (file, t) in &tables {
            t.write(&common.out.join(file))?;
        }
        fs::write(common.out.join("report.txt"), report.render())?;
        fs::write(common.out.join("summary.txt"), report.summary())
    };
    if let Err(e) = write() {
        eprintln!("error: writing to {}: {e}", common.out.display());
        return ExitCode::from(3);
    }
    print!("{}", report.render());
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
