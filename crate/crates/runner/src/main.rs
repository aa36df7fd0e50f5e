use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dnls_runner::experiments::{defaults, execute};
use dnls_runner::{Manifest, Overrides, Result};

#[derive(Parser)]
#[command(name = "dnls-lab", version, about = "Discrete traveling waves of the cubic lattice NLS: solve, evolve, track")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Newton solve of the discrete wave at every (xi, h) point.
    Solve(Overrides),
    /// H¹ distance between discrete wave and continuous soliton across a step sweep.
    Consistency(Overrides),
    /// Evolve a perturbed wave and track its orbital distance.
    Stability(Overrides),
    /// Running suprema of discrete Sobolev norms along an evolution.
    SobolevGrowth(Overrides),
    /// Velocity of a sampled moving soliton on coarse lattices.
    Peierls(Overrides),
    /// Coefficients, consistency order and stability constant of the centred stencils.
    StencilInfo(Overrides),
    /// Re-run the experiment recorded in a manifest.
    Replay {
        manifest: PathBuf,
        /// Output directory (default: the recorded one).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<Manifest> {
    let (name, overrides) = match cli.command {
        Command::Solve(o) => ("solve", o),
        Command::Consistency(o) => ("consistency", o),
        Command::Stability(o) => ("stability", o),
        Command::SobolevGrowth(o) => ("sobolev-growth", o),
        Command::Peierls(o) => ("peierls", o),
        Command::StencilInfo(o) => ("stencil-info", o),
        Command::Replay { manifest, out } => {
            let mut cfg = Manifest::read(&manifest)?.config;
            if let Some(dir) = out {
                cfg.out = dir;
            }
            return execute(&cfg);
        }
    };
    let cfg = overrides.resolve(defaults(name)?)?;
    execute(&cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(m) => {
            for c in &m.checks {
                println!("{} {} = {:e} ({})", if c.passed { "ok  " } else { "FAIL" }, c.name, c.value, c.bound);
            }
            println!("{}: {} in {:.1}s, outputs in {}", m.experiment, m.status, m.wall_clock_s, m.config.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
