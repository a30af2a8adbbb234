use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use linksched_cli::commands::{cmd_oracle, cmd_reduce, cmd_run, cmd_sweep, load_spec, read_instance, Overrides, SweepAxis};
use linksched_core::DenominatorKind;

#[derive(Parser)]
#[command(name = "linksched", about = "Packet scheduling over a link with adversarial errors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated seed list, e.g. 1,2,3.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long)]
    sample_every: Option<u64>,
    /// opt or off.
    #[arg(long)]
    denominator: Option<DenominatorKind>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seeds: self.seeds.clone(),
            horizon: self.horizon,
            sample_every: self.sample_every,
            denominator: self.denominator,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and emit `t,L_alg,L_ref,ratio,seed`.
    Run(Common),
    /// One summary row per (axis value, seed).
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        axis: SweepAxis,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
    /// Solve an instance file exactly.
    Oracle {
        instance: PathBuf,
        /// Also run brute force and require agreement.
        #[arg(long)]
        check: bool,
        /// Answer whether the optimum reaches T.
        #[arg(long, value_name = "T")]
        decision: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Turn a 3-Partition file into an instance file.
    Reduce {
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(common) => {
            let spec = load_spec(&common.config, &common.overrides())?;
            let output = cmd_run(&spec)?;
            emit(common.out.as_deref(), &output.csv)?;
            if let (Some(mean), Some(out)) = (output.mean_csv, &common.out) {
                emit(Some(&out.with_extension("mean.csv")), &mean)?;
            }
        }
        Command::Sweep { common, axis, values } => {
            let spec = load_spec(&common.config, &common.overrides())?;
            emit(common.out.as_deref(), &cmd_sweep(&spec, axis, &values)?)?;
        }
        Command::Oracle { instance, check, decision, out } => {
            let inst = read_instance(&instance)?;
            emit(out.as_deref(), &cmd_oracle(&inst, check, decision)?)?;
        }
        Command::Reduce { input, out } => emit(out.as_deref(), &cmd_reduce(&input)?)?,
    }
    Ok(())
}
