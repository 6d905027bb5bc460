use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use ftl_harness::config::{DatumSpec, ModeSpec, ModelSpec};
use ftl_harness::{experiments, json, ExperimentConfig, Overrides};

/// Follow-the-leader particle experiments.
#[derive(Parser)]
#[command(name = "ftl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one particle system and write trajectory, densities and diagnostics.
    Run(Common),
    /// L1 errors against the exact solution for several particle counts.
    Converge(Common),
    /// Print the solution of one Riemann problem as JSON.
    Riemann {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        rho_l: f64,
        #[arg(long, allow_hyphen_values = true)]
        rho_r: f64,
    },
    /// Property suite on a fresh run or on an existing trajectory file.
    Check {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// lwr | glwr:<gamma> | table:<path>
    #[arg(long)]
    model: Option<ModelSpec>,
    /// ic-paper | <csv>
    #[arg(long)]
    datum: Option<DatumSpec>,
    /// anchored | phantom
    #[arg(long)]
    mode: Option<ModeSpec>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    n_list: Option<Vec<usize>>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    snapshots: Option<Vec<f64>>,
    #[arg(long)]
    rtol: Option<f64>,
    #[arg(long)]
    atol: Option<f64>,
    #[arg(long)]
    delta_rho: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
}

impl Common {
    fn config(self) -> Result<ExperimentConfig> {
        let base = match &self.config {
            Some(p) => ExperimentConfig::from_json_file(p)?,
            None => ExperimentConfig::default(),
        };
        let o = Overrides {
            model: self.model,
            datum: self.datum,
            mode: self.mode,
            n: self.n,
            n_list: self.n_list,
            t_end: self.t_end,
            snapshots: self.snapshots,
            rtol: self.rtol,
            atol: self.atol,
            delta_rho: self.delta_rho,
            out: self.out,
            jobs: self.jobs,
        };
        Ok(o.apply(base))
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run(c) => {
            let r = experiments::run(&c.config()?)?;
            println!(
                "wrote {} snapshots to {} ({} steps, {} rejected)",
                r.snapshots.len(),
                r.config.out.display(),
                r.stats.accepted_steps,
                r.stats.rejected_steps
            );
            let warnings = r.entropy.iter().filter(|e| !e.passes).count();
            if warnings > 0 {
                eprintln!("warning: {warnings} entropy residual(s) below -tol");
            }
        }
        Command::Converge(c) => {
            let r = experiments::converge(&c.config()?)?;
            print!("{}", r.render());
        }
        Command::Riemann { common, rho_l, rho_r } => {
            let r = experiments::riemann(&common.config()?, rho_l, rho_r)?;
            print!("{}", json::to_string(&r)?);
        }
        Command::Check { common, trajectory } => {
            let r = experiments::check(&common.config()?, trajectory.as_deref())?;
            print!("{}", r.render());
            if !r.passed {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
