use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod output;

use commands::{Command, Context, Globals};

/// Homogeneous scalar-field collapse: simulations, sweeps and verification runs.
#[derive(Parser)]
#[command(name = "scalar-collapse", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
    #[command(flatten)]
    global: GlobalArgs,
}

#[derive(Args)]
struct GlobalArgs {
    /// Scenario (figure1, figure2, figure3, ...) or potential preset.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// TOML scenario file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (default `out`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    #[arg(long, global = true, value_name = "N", env = "SCALAR_COLLAPSE_THREADS")]
    threads: Option<usize>,
    /// Also write plot.svg.
    #[arg(long, global = true)]
    plot: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Sub {
    /// Integrate one solution and write its time series.
    Simulate,
    /// Sample initial data and tabulate outcomes.
    Sweep,
    /// Integrate and classify the fate (expansion verdict or collapse endstate).
    Classify,
    /// Collapse run plus exterior matching data.
    Match,
    /// Solve the collapse problem from zero initial energy.
    ZeroEnergy,
    /// Run the singular ODE contraction solver.
    VerifyOde,
    /// Test a potential for the admissibility classes.
    CheckPotential,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::Simulate => Command::Simulate,
            Sub::Sweep => Command::Sweep,
            Sub::Classify => Command::Classify,
            Sub::Match => Command::Match,
            Sub::ZeroEnergy => Command::ZeroEnergy,
            Sub::VerifyOde => Command::VerifyOde,
            Sub::CheckPotential => Command::CheckPotential,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: configuration error: --threads: {e}");
            return ExitCode::from(2);
        }
    }
    let globals = Globals {
        preset: cli.global.preset,
        config: cli.global.config,
        out: cli.global.out,
        seed: cli.global.seed,
        plot: cli.global.plot,
    };
    let result = Context::new(&globals).and_then(|ctx| {
        let lines = commands::run(cli.command.into(), &ctx)?;
        Ok((lines, ctx.out_dir().to_path_buf()))
    });
    match result {
        Ok((lines, dir)) => {
            for l in lines {
                println!("{l}");
            }
            println!("wrote {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
