//! `rdlc` entry point.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rdlc::commands::{self, LemmaParams, Status};

#[derive(Debug, Parser)]
#[command(name = "rdlc", version, about = "Degenerate reaction-diffusion runs and their verification")]
struct Cli {
    /// Log level (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "warn")]
    log: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a configuration into a run directory.
    Simulate {
        config: PathBuf,
        /// Run directory to create.
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Check every invariant and inequality on a run directory.
    Verify { run_dir: PathBuf },
    /// Print the constants ledger of a configuration as JSON.
    Constants {
        config: PathBuf,
        /// Write the ledger here instead of stdout.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Check the interpolation lemma on a sampled series.
    LembpCheck {
        /// CSV with columns t, y, N and optionally f1, f2.
        series: PathBuf,
        /// Coefficient of the 1/Γ term in the bound on N′.
        #[arg(long)]
        c0: f64,
        /// Constant term in the bound on N′.
        #[arg(long)]
        c1: f64,
        /// Weight shift h.
        #[arg(long)]
        h: f64,
        /// Horizon T.
        #[arg(long)]
        horizon: f64,
        /// First time, t1 < t2.
        #[arg(long)]
        t1: f64,
        /// Middle time.
        #[arg(long)]
        t2: f64,
        /// Last time, t2 < t3 < T.
        #[arg(long)]
        t3: f64,
        /// Write the report here instead of stdout.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Run a configuration template over a parameter grid in parallel.
    Sweep {
        template: PathBuf,
        /// TOML with [axes] and/or [[case]] entries of dotted overrides.
        grid: PathBuf,
        /// Directory for the case runs and comparison.csv.
        #[arg(short, long)]
        out: PathBuf,
        /// Worker threads (default: all cores).
        #[arg(short, long)]
        jobs: Option<usize>,
    },
    /// Write a long-format table of a run directory for plotting.
    PlotData {
        run_dir: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

fn dispatch(cmd: Command) -> commands::Outcome<Status> {
    match cmd {
        Command::Simulate { config, out } => commands::simulate(&config, &out),
        Command::Verify { run_dir } => commands::verify(&run_dir),
        Command::Constants { config, out } => commands::constants(&config, out.as_deref()),
        Command::LembpCheck { series, c0, c1, h, horizon, t1, t2, t3, out } => {
            commands::lembp(&series, LemmaParams { c0, c1, h, horizon, t1, t2, t3 }, out.as_deref())
        }
        Command::Sweep { template, grid, out, jobs } => commands::sweep(&template, &grid, &out, jobs).map(|r| r.0),
        Command::PlotData { run_dir, out } => commands::plot_data(&run_dir, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { Status::Usage.code() } else { 0 });
        }
    };
    env_logger::Builder::new().parse_filters(&cli.log).format_timestamp(None).init();
    match dispatch(cli.command) {
        Ok(status) => ExitCode::from(status.code()),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.status.code())
        }
    }
}
