//! Runs a list of transitions on a fresh configuration with every verdict
//! checked after each step.

use anyhow::{bail, Context};
use mrdt_core::lincheck::{LinOptions, Monitor, Outcome, StepReport};
use mrdt_core::{lookup_for_mode, Alphabet, Configuration, MrdtSpec, Transition, VersionId};
use serde::Serialize;

use crate::trace::{state_digest, Step, Trace, TraceHeader};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    NotLinearizable,
    NotConvergent,
    LcaLemma,
    Partition,
    QueryMismatch,
    LoCycle,
    LoUnstable,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Failure {
    /// Index into the trace's transitions.
    pub transition_index: usize,
    pub kind: FailureKind,
    pub detail: String,
}

/// Failures found in one step report, most specific first.
pub fn failures_of(rep: &StepReport, index: usize) -> Vec<Failure> {
    let mut out = Vec::new();
    let mut push = |kind, detail: String| {
        out.push(Failure {
            transition_index: index,
            kind,
            detail,
        })
    };
    if let Some(d) = &rep.divergence {
        push(
            FailureKind::NotConvergent,
            format!(
                "{} = {} but {} = {} over the same events",
                d.v1, d.state1, d.v2, d.state2
            ),
        );
    }
    if let Some(v) = &rep.lin_failure {
        let who = v.replica.map(|r| format!(" (head of {r})")).unwrap_or_default();
        push(
            FailureKind::NotLinearizable,
            format!("{}{who} holds {} which no lo-extension reaches", v.version, v.expected),
        );
    }
    if let Some(l) = &rep.lca_violation {
        push(
            FailureKind::LcaLemma,
            format!("{} / {} with LCA candidates {:?}", l.v1, l.v2, l.lca),
        );
    }
    if let Some(p) = &rep.partition_violation {
        push(FailureKind::Partition, p.clone());
    }
    if let Some((got, want)) = &rep.query_mismatch {
        push(
            FailureKind::QueryMismatch,
            format!("answered {got}, witness gives {want}"),
        );
    }
    if !rep.lo_irreflexive {
        push(FailureKind::LoCycle, "lo has a cycle".into());
    }
    if !rep.lo_stable {
        push(FailureKind::LoUnstable, "lo between earlier events changed".into());
    }
    out
}

/// Per-configuration tallies over one or more executions.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Tally {
    pub configurations: usize,
    pub versions_checked: usize,
    pub head_checks: usize,
    pub assertions: usize,
    pub not_linearizable: usize,
    pub not_convergent: usize,
    pub lca_violations: usize,
    pub partition_violations: usize,
    pub query_mismatches: usize,
    pub lo_violations: usize,
    pub inconclusive: usize,
}

impl Tally {
    pub fn add_step(&mut self, rep: &StepReport) {
        self.configurations += 1;
        self.versions_checked += rep.versions_checked.len();
        self.head_checks += rep.heads.len();
        self.assertions += rep.assertions;
        self.not_linearizable += usize::from(rep.lin_failure.is_some());
        self.not_convergent += usize::from(rep.divergence.is_some());
        self.lca_violations += usize::from(rep.lca_violation.is_some());
        self.partition_violations += usize::from(rep.partition_violation.is_some());
        self.query_mismatches += usize::from(rep.query_mismatch.is_some());
        self.lo_violations += usize::from(!rep.lo_irreflexive || !rep.lo_stable);
        self.inconclusive += usize::from(rep.inconclusive || rep.heads.iter().any(|h| h.2 == Outcome::Inconclusive));
    }

    pub fn merge(&mut self, o: &Tally) {
        self.configurations += o.configurations;
        self.versions_checked += o.versions_checked;
        self.head_checks += o.head_checks;
        self.assertions += o.assertions;
        self.not_linearizable += o.not_linearizable;
        self.not_convergent += o.not_convergent;
        self.lca_violations += o.lca_violations;
        self.partition_violations += o.partition_violations;
        self.query_mismatches += o.query_mismatches;
        self.lo_violations += o.lo_violations;
        self.inconclusive += o.inconclusive;
    }

    pub fn failures(&self) -> usize {
        self.not_linearizable
            + self.not_convergent
            + self.lca_violations
            + self.partition_violations
            + self.query_mismatches
            + self.lo_violations
    }
}

pub fn spec_for(header: &TraceHeader) -> anyhow::Result<MrdtSpec> {
    let alphabet = Alphabet::parse(&header.alphabet)?;
    Ok(lookup_for_mode(&header.spec_name, header.mode, &alphabet)?)
}

/// A monitored execution in progress.
pub struct Runner {
    pub config: Configuration,
    monitor: Monitor,
    pub steps: Vec<Step>,
    /// Version created by each step, if any.
    pub created: Vec<Option<VersionId>>,
    /// Verdicts after each step.
    pub reports: Vec<StepReport>,
    pub tally: Tally,
    pub first_failure: Option<Failure>,
}

impl Runner {
    pub fn new(spec: MrdtSpec, header: &TraceHeader, opts: LinOptions) -> anyhow::Result<Runner> {
        let config = Configuration::new(spec, header.mode);
        let mut monitor = Monitor::new(opts);
        monitor.start(&config)?;
        Ok(Runner {
            config,
            monitor,
            steps: Vec::new(),
            created: Vec::new(),
            reports: Vec::new(),
            tally: Tally::default(),
            first_failure: None,
        })
    }

    /// Executes one step, recording its timestamp and query answer. With
    /// `check_expected`, a recorded answer that differs is an error.
    pub fn step(&mut self, step: &Step, check_expected: bool) -> anyhow::Result<&StepReport> {
        let index = self.steps.len();
        let out = self
            .config
            .step(&step.transition)
            .with_context(|| format!("transition {index}: {}", step.transition))?;
        let mut recorded = step.clone();
        match &mut recorded.transition {
            Transition::Apply { ts, .. } => *ts = out.event.as_ref().map(|e| e.ts),
            Transition::Query { expected, .. } => {
                let answer = out.answer.as_ref().expect("query answers").to_string();
                if check_expected {
                    if let Some(want) = expected.as_ref().filter(|w| **w != answer) {
                        bail!("transition {index}: recorded answer {want}, replay gives {answer}");
                    }
                }
                *expected = Some(answer);
            }
            _ => {}
        }
        let rep = self.monitor.after_step(&self.config, Some(&step.transition), &out)?;
        self.tally.add_step(&rep);
        if self.first_failure.is_none() {
            self.first_failure = failures_of(&rep, index).into_iter().next();
        }
        self.steps.push(recorded);
        self.created.push(out.version);
        self.reports.push(rep);
        Ok(self.reports.last().unwrap())
    }

    pub fn into_trace(self, header: TraceHeader) -> Trace {
        Trace {
            digest: Some(state_digest(&self.config)),
            header,
            steps: self.steps,
        }
    }

    pub fn digest(&self) -> String {
        state_digest(&self.config)
    }
}

/// Runs every step of a trace. With `strict`, recorded answers and the
/// final digest must match.
pub fn run_trace(trace: &Trace, opts: LinOptions, strict: bool) -> anyhow::Result<Runner> {
    let spec = spec_for(&trace.header)?;
    let mut runner = Runner::new(spec, &trace.header, opts)?;
    for s in &trace.steps {
        runner.step(s, strict)?;
    }
    if strict {
        if let Some(d) = &trace.digest {
            let got = runner.digest();
            if *d != got {
                bail!("final state digest {got} differs from recorded {d}");
            }
        }
    }
    Ok(runner)
}

/// Executes the steps and returns them as a trace with timestamps, query
/// answers and the digest filled in.
pub fn record(header: TraceHeader, steps: &[Step]) -> anyhow::Result<Trace> {
    let spec = spec_for(&header)?;
    let mut runner = Runner::new(spec, &header, LinOptions::default())?;
    for s in steps {
        runner.step(s, false)?;
    }
    Ok(runner.into_trace(header))
}
