//! Command-line front end for mrdt-core: fuzzing with verdicts, VC suites,
//! trace replay and shrinking.

pub mod exec;
pub mod fuzz;
pub mod shrink;
pub mod trace;
pub mod vc;

pub use exec::{record, run_trace, Failure, FailureKind, Runner, Tally};
pub use fuzz::{fuzz, FuzzConfig, RunReport};
pub use shrink::{failure_kind, shrink_same_failure, shrink_trace};
pub use trace::{state_digest, Step, Trace, TraceHeader};
pub use vc::{cmd_vc, SuiteReport};

use mrdt_core::lincheck::LinOptions;

/// Replays a trace strictly and reports like a single fuzz iteration.
pub fn cmd_replay(trace: &Trace) -> anyhow::Result<RunReport> {
    let runner = run_trace(trace, LinOptions::default(), true)?;
    let failure = runner.first_failure.clone();
    let tally = runner.tally.clone();
    Ok(RunReport {
        datatype: trace.header.spec_name.clone(),
        mode: trace.header.mode,
        seed: trace.header.seed,
        iterations: 1,
        failing_iterations: usize::from(failure.is_some()),
        inconclusive_iterations: usize::from(tally.inconclusive > 0),
        transitions: trace.steps.len(),
        tally,
        first_failure: failure.map(|f| fuzz::IterationFailure {
            iteration: trace.header.iteration.unwrap_or(0),
            failure: f,
            trace: trace.to_text(),
        }),
    })
}
