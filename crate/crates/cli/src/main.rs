use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use mrdt_cli::{cmd_replay, cmd_vc, fuzz, shrink_same_failure, FuzzConfig, RunReport, Trace};
use mrdt_core::{Alphabet, Mode};

#[derive(Parser)]
#[command(
    name = "mrdt",
    about = "Check replicated datatypes against replication-aware linearizability"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value = "mrdt")]
    mode: Mode,
    #[arg(long, default_value = "a,b,c,d,e")]
    alphabet: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Random executions with every verdict checked after each transition.
    Fuzz {
        #[arg(long)]
        datatype: String,
        #[arg(long, default_value_t = 3)]
        replicas: usize,
        #[arg(long, default_value_t = 8)]
        events: usize,
        #[arg(long, default_value_t = 100)]
        iters: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Side conditions and every verification-condition row.
    Vc {
        #[arg(long)]
        datatype: String,
        #[arg(long, default_value_t = 1000)]
        cases: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Re-run a trace file, checking recorded answers and the final digest.
    Replay {
        trace: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cut a failing trace down to a locally minimal one.
    Shrink {
        trace: PathBuf,
        /// Where to write the shrunk trace (stdout if absent).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn write_json<T: serde::Serialize>(out: &Option<PathBuf>, value: &T) -> anyhow::Result<()> {
    if let Some(path) = out {
        let text = serde_json::to_string_pretty(value)? + "\n";
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn print_run(r: &RunReport) {
    println!(
        "{} {}: {} iterations, {} transitions, {} configurations, {} assertions",
        r.datatype, r.mode, r.iterations, r.transitions, r.tally.configurations, r.tally.assertions
    );
    println!(
        "  not linearizable {}  not convergent {}  lca {}  partition {}  query {}  lo {}  inconclusive {}",
        r.tally.not_linearizable,
        r.tally.not_convergent,
        r.tally.lca_violations,
        r.tally.partition_violations,
        r.tally.query_mismatches,
        r.tally.lo_violations,
        r.tally.inconclusive
    );
    if let Some(f) = &r.first_failure {
        println!(
            "  first failure: iteration {} transition {}: {:?}: {}",
            f.iteration, f.failure.transition_index, f.failure.kind, f.failure.detail
        );
    }
}

fn run(cli: Cli) -> anyhow::Result<i32> {
    match cli.cmd {
        Cmd::Fuzz {
            datatype,
            replicas,
            events,
            iters,
            common,
        } => {
            let mut cfg = FuzzConfig::new(&datatype, common.mode);
            cfg.alphabet = Alphabet::parse(&common.alphabet)?;
            cfg.replicas = replicas;
            cfg.events = events;
            cfg.iters = iters;
            cfg.seed = common.seed;
            let report = fuzz(&cfg)?;
            print_run(&report);
            write_json(&common.out, &report)?;
            Ok(report.exit_code())
        }
        Cmd::Vc {
            datatype,
            cases,
            common,
        } => {
            let alphabet = Alphabet::parse(&common.alphabet)?;
            let report = cmd_vc(&datatype, common.mode, &alphabet, cases, common.seed)?;
            print!("{}", report.summary());
            write_json(&common.out, &report)?;
            Ok(report.exit_code())
        }
        Cmd::Replay { trace, out } => {
            let t = Trace::read(&trace)?;
            let report = cmd_replay(&t)?;
            print_run(&report);
            write_json(&out, &report)?;
            Ok(report.exit_code())
        }
        Cmd::Shrink { trace, out } => {
            let t = Trace::read(&trace)?;
            let small = shrink_same_failure(&t)?;
            eprintln!("{} -> {} transitions", t.steps.len(), small.steps.len());
            match out {
                Some(path) => small.write(&path)?,
                None => print!("{}", small.to_text()),
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
