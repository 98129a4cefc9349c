//! `surgseg`: generate synthetic traces, segment them, classify segments and
//! score the results.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "surgseg", version, about = "Unsupervised action segmentation for ring-transfer traces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic traces from a dataset name or a scenario spec file.
    Generate {
        /// `standard`, `failure`, `occupied_pegs`, `simultaneous`, `test_a`,
        /// `test_b`, `test_c`, or a path to a JSON spec.
        spec: String,
        #[command(flatten)]
        gen: config::GenFlags,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Segment one trace file.
    Segment {
        trace: PathBuf,
        #[command(flatten)]
        flags: config::PipelineFlags,
        /// Output segments file.
        #[arg(long)]
        out: PathBuf,
        /// Also write per-feature changepoint candidates to this file.
        #[arg(long)]
        debug: Option<PathBuf>,
    },
    /// Retrieve the k nearest segments for each query exemplar.
    Classify {
        /// Trace file or directory of `*.trace.json` files.
        dataset: PathBuf,
        #[command(flatten)]
        flags: config::PipelineFlags,
        /// Output classification report.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score segmentation and classification against annotations.
    Evaluate {
        dataset: PathBuf,
        #[command(flatten)]
        flags: config::PipelineFlags,
        #[command(flatten)]
        sweep: SweepFlag,
        /// Output directory for report.json and report.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Segment, build features, classify and evaluate in one go.
    Pipeline {
        dataset: PathBuf,
        #[command(flatten)]
        flags: config::PipelineFlags,
        #[command(flatten)]
        sweep: SweepFlag,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Clone, Debug, Default)]
struct SweepFlag {
    /// Average F1 for each k in START:END:STEP (END inclusive).
    #[arg(long, value_name = "START:END:STEP", value_parser = parse_sweep)]
    k_sweep: Option<(usize, usize, usize)>,
}

fn parse_sweep(s: &str) -> Result<(usize, usize, usize), String> {
    let parts: Vec<&str> = s.split(':').collect();
    let nums: Result<Vec<usize>, _> = parts.iter().map(|p| p.parse::<usize>()).collect();
    match nums.as_deref() {
        Ok([a, b, step]) if *a >= 1 && a <= b && *step >= 1 => Ok((*a, *b, *step)),
        Ok([a, b]) if *a >= 1 && a <= b => Ok((*a, *b, 1)),
        _ => Err(format!("expected START:END[:STEP] with 1 <= START <= END, got `{s}`")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate { spec, gen, out } => commands::generate(&spec, &gen, &out),
        Command::Segment { trace, flags, out, debug } => commands::segment(&trace, &flags, &out, debug.as_deref()),
        Command::Classify { dataset, flags, out } => commands::classify(&dataset, &flags, &out),
        Command::Evaluate { dataset, flags, sweep, out } => commands::evaluate(&dataset, &flags, sweep.k_sweep, &out),
        Command::Pipeline { dataset, flags, sweep, out } => commands::pipeline(&dataset, &flags, sweep.k_sweep, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("surgseg: {e}");
            // Unreadable or missing inputs get the same code as usage errors.
            match e {
                surgseg::Error::Io { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
