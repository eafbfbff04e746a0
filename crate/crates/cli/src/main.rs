use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use qcm::sim::TraceMode;
use qcm::wire::Direction;
use qcm_cli::{cmd_decode, cmd_diff_trace, cmd_encode, cmd_run, ExitStatus};

/// Quantum communication metadata over OpenFlow: simulator and codec tools.
#[derive(Parser)]
#[command(name = "qcm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and print its trace.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Trace wording; defaults to the mode named in the scenario.
        #[arg(long, value_parser = clap::builder::ValueParser::new(|s: &str| s.parse::<TraceMode>()))]
        mode: Option<TraceMode>,
        /// Write the trace here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decode a hex dump of one or more frames.
    Decode {
        /// Hex dump file; standard input when absent.
        #[arg(long = "in")]
        input: Option<PathBuf>,
    },
    /// Encode a record spec as a hex dump.
    Encode {
        /// Record spec in `FIELD: value` form. Optional for requests.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, value_enum)]
        direction: DirectionArg,
        #[arg(long)]
        xid: u32,
    },
    /// Compare a trace with a golden file byte for byte.
    DiffTrace { actual: PathBuf, golden: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionArg {
    Request,
    Reply,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitStatus::Usage.into()
            } else {
                ExitStatus::Success.into()
            };
        }
    };
    let mut out = io::stdout().lock();
    let mut err = io::stderr().lock();
    let status = match cli.command {
        Command::Run {
            scenario,
            mode,
            out: path,
        } => cmd_run(&scenario, mode, path.as_deref(), &mut out, &mut err),
        Command::Decode { input } => cmd_decode(input.as_deref(), &mut out, &mut err),
        Command::Encode {
            spec,
            direction,
            xid,
        } => {
            let direction = match direction {
                DirectionArg::Request => Direction::Request,
                DirectionArg::Reply => Direction::Reply,
            };
            cmd_encode(spec.as_deref(), direction, xid, &mut out, &mut err)
        }
        Command::DiffTrace { actual, golden } => {
            cmd_diff_trace(&actual, &golden, &mut out, &mut err)
        }
    };
    status.into()
}
