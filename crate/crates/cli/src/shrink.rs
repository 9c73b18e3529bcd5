//! Greedy delta debugging over the transitions of a failing trace.

use anyhow::bail;
use mrdt_core::lincheck::LinOptions;
use mrdt_core::Transition;

use crate::exec::{record, run_trace, FailureKind};
use crate::trace::{Step, Trace};

/// First failure kind of a trace replayed without checking recorded answers;
/// None when it passes or is not well formed.
pub fn failure_kind(trace: &Trace) -> Option<FailureKind> {
    run_trace(trace, LinOptions::default(), false)
        .ok()?
        .first_failure
        .map(|f| f.kind)
}

fn with_steps(trace: &Trace, steps: Vec<Step>) -> Trace {
    Trace {
        header: trace.header.clone(),
        steps,
        digest: None,
    }
}

/// Removes chunks of transitions, halving the chunk size, while `fails`
/// keeps holding; finishes when no single transition can be removed.
pub fn shrink_trace(trace: &Trace, fails: impl Fn(&Trace) -> bool) -> anyhow::Result<Trace> {
    // recorded answers would pin states that removals change
    let mut steps: Vec<Step> = trace
        .steps
        .iter()
        .map(|s| {
            let mut s = s.clone();
            if let Transition::Query { expected, .. } = &mut s.transition {
                *expected = None;
            }
            s
        })
        .collect();
    if !fails(&with_steps(trace, steps.clone())) {
        bail!("the trace does not fail; nothing to shrink");
    }
    let mut chunk = steps.len().div_ceil(2).max(1);
    loop {
        let mut removed_any = false;
        let mut start = 0;
        while start < steps.len() {
            let end = (start + chunk).min(steps.len());
            let mut candidate = steps.clone();
            candidate.drain(start..end);
            if fails(&with_steps(trace, candidate.clone())) {
                steps = candidate;
                removed_any = true;
            } else {
                start = end;
            }
        }
        if chunk == 1 && !removed_any {
            break;
        }
        if !removed_any {
            chunk = chunk.div_ceil(2).max(1);
        }
    }
    record(trace.header.clone(), &steps)
}

/// Shrinks while keeping the trace's original first failure kind.
pub fn shrink_same_failure(trace: &Trace) -> anyhow::Result<Trace> {
    let Some(kind) = failure_kind(trace) else {
        bail!("the trace does not fail; nothing to shrink");
    };
    shrink_trace(trace, |t| failure_kind(t) == Some(kind))
}
