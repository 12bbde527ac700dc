//! `pands`: exact and simulated analysis of pass-and-swap queues.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use output::{Format, Header};

#[derive(Parser, Debug)]
#[command(name = "pands", version, about = "Pass-and-swap queue analysis")]
struct Cli {
    /// Output mode.
    #[arg(long, value_enum, default_value_t = Format::Table, global = true)]
    format: Format,
    /// Write the report to this file instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Largest state space any enumeration may build.
    #[arg(long, default_value_t = 2_000_000, global = true)]
    budget: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check the order-independence conditions of the rate function(s).
    Validate {
        model: PathBuf,
        /// Check every state with at most this many customers.
        #[arg(long, default_value_t = 6)]
        max_total: u32,
    },
    /// Stability conditions of an open queue.
    Stability { model: PathBuf },
    /// Product-form distribution of an open queue truncated at a capacity.
    Analyze {
        model: PathBuf,
        #[arg(long)]
        capacity: Option<usize>,
        /// Only list the most likely states.
        #[arg(long)]
        top: Option<usize>,
    },
    /// One service completion and its swap chain.
    Trace {
        model: PathBuf,
        /// State, 1-based classes head first, e.g. 1,3,3,2.
        #[arg(long)]
        state: String,
        /// 1-based position of the completing customer.
        #[arg(long)]
        position: usize,
    },
    /// Stationary distribution of a closed queue.
    ClosedAnalyze {
        model: PathBuf,
        #[arg(long)]
        initial: Option<String>,
    },
    /// Stationary distribution of a closed tandem of two queues.
    TandemAnalyze {
        model: PathBuf,
        #[arg(long, requires = "second")]
        first: Option<String>,
        #[arg(long, requires = "first")]
        second: Option<String>,
    },
    /// Communicating classes of the chain reachable from the initial state.
    Classes {
        model: PathBuf,
        #[arg(long, conflicts_with_all = ["first", "second"])]
        initial: Option<String>,
        #[arg(long, requires = "second")]
        first: Option<String>,
        #[arg(long, requires = "first")]
        second: Option<String>,
    },
    /// Isomorphic queue of a closed queue and initial state.
    Iso {
        model: PathBuf,
        #[arg(long)]
        initial: Option<String>,
    },
    /// Compile a cluster spec into a closed tandem model.
    ClusterCompile {
        cluster: PathBuf,
        /// Also write the tandem model file here.
        #[arg(long)]
        emit_model: Option<PathBuf>,
    },
    /// Compile a cluster spec and read protocol metrics off the tandem.
    ClusterAnalyze { cluster: PathBuf },
    /// Discrete-event simulation of a model or, for cluster specs, of the
    /// token protocol itself.
    Simulate {
        file: PathBuf,
        #[arg(long, conflicts_with = "time")]
        events: Option<u64>,
        #[arg(long)]
        time: Option<f64>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        reps: usize,
        #[arg(long, default_value_t = 0.2)]
        warmup: f64,
        #[arg(long)]
        capacity: Option<usize>,
        #[arg(long)]
        initial: Option<String>,
        /// Write an event log of the first replication here.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, default_value_t = 10_000)]
        trace_events: usize,
    },
    /// Analytic distribution against the brute-force CTMC solution.
    OracleCompare {
        model: PathBuf,
        #[arg(long)]
        capacity: Option<usize>,
        #[arg(long, conflicts_with_all = ["first", "second"])]
        initial: Option<String>,
        #[arg(long, requires = "second")]
        first: Option<String>,
        #[arg(long, requires = "first")]
        second: Option<String>,
        #[arg(long, default_value_t = 1e-10)]
        threshold: f64,
        /// Dump the generator as sparse triplets here.
        #[arg(long)]
        triplets: Option<PathBuf>,
    },
}

fn exit_code(e: &pands::Error) -> u8 {
    match e {
        pands::Error::Parse(_) => 2,
        pands::Error::Resource { .. } => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let flags: Vec<String> = std::env::args().skip(1).collect();
    let run = commands::run(&cli.command, cli.budget);
    match run {
        Ok((report, input_sha256)) => {
            let header = Header {
                tool: "pands",
                version: env!("CARGO_PKG_VERSION"),
                input_sha256,
                flags,
            };
            let text = report.render(&header, cli.format);
            match &cli.output {
                Some(path) => {
                    if let Err(e) = std::fs::write(path, text) {
                        eprintln!("error: cannot write {}: {e}", path.display());
                        return ExitCode::from(1);
                    }
                }
                None => print!("{text}"),
            }
            ExitCode::from(report.status)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
