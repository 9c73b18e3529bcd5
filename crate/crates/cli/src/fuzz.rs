//! Random transition schedules checked step by step.

use mrdt_core::lincheck::LinOptions;
use mrdt_core::{Alphabet, Mode, MrdtSpec, ReplicaId, Transition};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::exec::{Failure, Runner, Tally};
use crate::trace::{Step, Trace, TraceHeader};

#[derive(Clone, Debug)]
pub struct FuzzConfig {
    pub datatype: String,
    pub mode: Mode,
    pub alphabet: Alphabet,
    pub replicas: usize,
    pub events: usize,
    pub iters: usize,
    pub seed: u64,
    pub lin: LinOptions,
}

impl FuzzConfig {
    pub fn new(datatype: &str, mode: Mode) -> FuzzConfig {
        FuzzConfig {
            datatype: datatype.to_string(),
            mode,
            alphabet: Alphabet::default(),
            replicas: 3,
            events: 8,
            iters: 100,
            seed: 0,
            lin: LinOptions::default(),
        }
    }
}

/// Schedule weights: apply, merge, branch, query.
pub const WEIGHTS: [u32; 4] = [50, 25, 15, 10];

#[derive(Clone, Debug, Serialize)]
pub struct IterationFailure {
    pub iteration: u64,
    #[serde(flatten)]
    pub failure: Failure,
    /// The failing execution as trace text, replayable on its own.
    pub trace: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub datatype: String,
    pub mode: Mode,
    pub seed: u64,
    pub iterations: usize,
    pub failing_iterations: usize,
    pub inconclusive_iterations: usize,
    pub transitions: usize,
    #[serde(flatten)]
    pub tally: Tally,
    pub first_failure: Option<IterationFailure>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.failing_iterations == 0
    }

    pub fn exit_code(&self) -> i32 {
        if !self.passed() {
            1
        } else if self.inconclusive_iterations > 0 {
            3
        } else {
            0
        }
    }
}

pub struct Iteration {
    pub trace: Trace,
    pub tally: Tally,
    pub failure: Option<Failure>,
}

fn header(cfg: &FuzzConfig, iteration: u64) -> TraceHeader {
    TraceHeader {
        spec_name: cfg.datatype.clone(),
        seed: cfg.seed,
        alphabet: cfg.alphabet.joined(),
        mode: cfg.mode,
        iteration: Some(iteration),
    }
}

/// Draws a transition valid for the current set of active replicas.
fn next_transition(spec: &MrdtSpec, rng: &mut ChaCha8Rng, active: &[ReplicaId], max_replicas: usize) -> Transition {
    loop {
        let total: u32 = WEIGHTS.iter().sum();
        let mut pick = rng.gen_range(0..total);
        let mut kind = 0;
        while pick >= WEIGHTS[kind] {
            pick -= WEIGHTS[kind];
            kind += 1;
        }
        let r = *active.choose(rng).unwrap();
        match kind {
            0 => {
                let op = spec.ops().choose(rng).unwrap().clone();
                return Transition::Apply { r, op, ts: None };
            }
            1 if active.len() >= 2 => {
                let other = *active
                    .iter()
                    .filter(|x| **x != r)
                    .collect::<Vec<_>>()
                    .choose(rng)
                    .unwrap();
                return Transition::Merge { r1: r, r2: *other };
            }
            2 if active.len() < max_replicas => {
                let new = ReplicaId(active.iter().map(|x| x.0).max().unwrap() + 1);
                return Transition::CreateBranch { new, from: r };
            }
            3 => {
                let q = spec.queries().choose(rng).unwrap().clone();
                return Transition::Query { r, q, expected: None };
            }
            _ => continue,
        }
    }
}

/// One random execution. Stops at the first failing transition; otherwise
/// ends with every replica merged with replica 0 and back.
pub fn run_iteration(cfg: &FuzzConfig, spec: &MrdtSpec, iteration: u64) -> anyhow::Result<Iteration> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(iteration);
    let header = header(cfg, iteration);
    let mut runner = Runner::new(spec.clone(), &header, cfg.lin)?;
    let mut active = vec![ReplicaId(0)];
    let mut applied = 0;
    let guard = 6 * cfg.events + 8;
    let mut schedule_len = 0;
    while applied < cfg.events && schedule_len < guard {
        let t = next_transition(spec, &mut rng, &active, cfg.replicas.max(1));
        schedule_len += 1;
        match &t {
            Transition::Apply { .. } => applied += 1,
            Transition::CreateBranch { new, .. } => active.push(*new),
            _ => {}
        }
        runner.step(&Step::new(t), false)?;
        if runner.first_failure.is_some() {
            break;
        }
    }
    let root = ReplicaId(0);
    let gossip: Vec<Transition> = active
        .iter()
        .skip(1)
        .map(|r| Transition::Merge { r1: root, r2: *r })
        .chain(active.iter().skip(1).map(|r| Transition::Merge { r1: *r, r2: root }))
        .collect();
    for t in gossip {
        if runner.first_failure.is_some() {
            break;
        }
        runner.step(&Step::new(t), false)?;
    }
    let tally = runner.tally.clone();
    let failure = runner.first_failure.clone();
    Ok(Iteration {
        trace: runner.into_trace(header),
        tally,
        failure,
    })
}

pub fn fuzz(cfg: &FuzzConfig) -> anyhow::Result<RunReport> {
    if cfg.iters == 0 {
        anyhow::bail!("--iters must be at least 1");
    }
    if cfg.replicas == 0 {
        anyhow::bail!("--replicas must be at least 1");
    }
    let spec = mrdt_core::lookup_for_mode(&cfg.datatype, cfg.mode, &cfg.alphabet)?;
    let results: Vec<anyhow::Result<Iteration>> = (0..cfg.iters as u64)
        .into_par_iter()
        .map(|i| run_iteration(cfg, &spec, i))
        .collect();
    let mut report = RunReport {
        datatype: cfg.datatype.clone(),
        mode: cfg.mode,
        seed: cfg.seed,
        iterations: cfg.iters,
        failing_iterations: 0,
        inconclusive_iterations: 0,
        transitions: 0,
        tally: Tally::default(),
        first_failure: None,
    };
    for (i, it) in results.into_iter().enumerate() {
        let it = it?;
        report.transitions += it.trace.steps.len();
        report.tally.merge(&it.tally);
        report.inconclusive_iterations += usize::from(it.tally.inconclusive > 0);
        if let Some(f) = it.failure {
            report.failing_iterations += 1;
            if report.first_failure.is_none() {
                report.first_failure = Some(IterationFailure {
                    iteration: i as u64,
                    failure: f,
                    trace: it.trace.to_text(),
                });
            }
        }
    }
    Ok(report)
}
