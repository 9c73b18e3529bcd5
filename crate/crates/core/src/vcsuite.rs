//! Verification conditions checked on generated feasible states, plus the
//! three side-conditions on rc and commutativity.
//!
//! Each row is an equation (or implication between equations) over merge
//! terms. States are built in the row's shape from a generated triple
//! `l = pi_top(s0)`, `a = pi1(l)`, `b = pi2(l)` and fresh role events.

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::event::{Event, Op};
use crate::lincheck::check_rc_acyclic;
use crate::spec::{apply_sequence, merge_in, Mode, Mrdt, MrdtSpec};
use crate::value::Value;

/// Rows with fewer pre-satisfied cases than this share are flagged vacuous.
pub const VACUITY_THRESHOLD: f64 = 0.10;

#[derive(Clone, Serialize)]
pub struct FeasibleTriple {
    pub l: Value,
    pub a: Value,
    pub b: Value,
    pub pi_top: Vec<Event>,
    pub pi1: Vec<Event>,
    pub pi2: Vec<Event>,
    #[serde(skip)]
    pub spec: MrdtSpec,
}

impl fmt::Debug for FeasibleTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FeasibleTriple")
            .field("spec", &self.spec.name())
            .field("l", &self.l)
            .field("a", &self.a)
            .field("b", &self.b)
            .field("pi_top", &self.pi_top)
            .field("pi1", &self.pi1)
            .field("pi2", &self.pi2)
            .finish()
    }
}

/// Lengths of the generated sequences pi_top, pi1, pi2.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SizeBounds {
    pub top: usize,
    pub left: usize,
    pub right: usize,
}

impl SizeBounds {
    pub fn new(top: usize, left: usize, right: usize) -> SizeBounds {
        SizeBounds { top, left, right }
    }
}

/// Replica running pi_top and the shared-prefix roles.
const TOP_REPLICA: u32 = 0;
const LEFT_REPLICA: u32 = 1;
const RIGHT_REPLICA: u32 = 2;

fn random_seq(ops: &[Op], rng: &mut ChaCha8Rng, len: usize, rep: u32, next_ts: &mut u64) -> Vec<Event> {
    (0..len)
        .map(|_| {
            let op = ops.choose(rng).expect("datatype has no operations").clone();
            let e = Event::new(*next_ts, rep, op);
            *next_ts += 1;
            e
        })
        .collect()
}

fn triple_from(spec: &MrdtSpec, rng: &mut ChaCha8Rng, bounds: SizeBounds) -> Result<FeasibleTriple> {
    let ops = spec.ops();
    let mut ts = 1;
    let pi_top = random_seq(&ops, rng, bounds.top, TOP_REPLICA, &mut ts);
    let pi1 = random_seq(&ops, rng, bounds.left, LEFT_REPLICA, &mut ts);
    let pi2 = random_seq(&ops, rng, bounds.right, RIGHT_REPLICA, &mut ts);
    let l = apply_sequence(spec.as_ref(), &spec.init(), &pi_top)?;
    let a = apply_sequence(spec.as_ref(), &l, &pi1)?;
    let b = apply_sequence(spec.as_ref(), &l, &pi2)?;
    Ok(FeasibleTriple {
        l,
        a,
        b,
        pi_top,
        pi1,
        pi2,
        spec: spec.clone(),
    })
}

/// Random operation sequences of exactly the given lengths, applied from
/// the initial state. Timestamps run 1, 2, ... across pi_top, pi1, pi2.
pub fn gen_feasible_triple(spec: &MrdtSpec, rng_seed: u64, bounds: SizeBounds) -> Result<FeasibleTriple> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    triple_from(spec, &mut rng, bounds)
}

impl FeasibleTriple {
    fn max_ts(&self) -> u64 {
        self.pi_top
            .iter()
            .chain(&self.pi1)
            .chain(&self.pi2)
            .map(|e| e.ts.0)
            .max()
            .unwrap_or(0)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Counterexample {
    pub triple: FeasibleTriple,
    /// Role name and the event drawn for it.
    pub events: Vec<(String, Event)>,
    pub lhs: Value,
    pub rhs: Value,
}

#[derive(Clone, Debug, Serialize)]
pub struct VcReport {
    pub vc_name: String,
    pub cases_run: usize,
    pub cases_pre_satisfied: usize,
    pub cases_failed: usize,
    pub first_counterexample: Option<Counterexample>,
    /// No operation combination satisfies the row's side conditions.
    pub inapplicable: bool,
    pub vacuous: bool,
    /// Free-form note, used by the side-condition checks.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl VcReport {
    fn new(name: &str) -> VcReport {
        VcReport {
            vc_name: name.to_string(),
            cases_run: 0,
            cases_pre_satisfied: 0,
            cases_failed: 0,
            first_counterexample: None,
            inapplicable: false,
            vacuous: false,
            note: None,
        }
    }

    fn finish(mut self) -> VcReport {
        self.vacuous = self.inapplicable
            || self.cases_run == 0
            || (self.cases_pre_satisfied as f64) < VACUITY_THRESHOLD * self.cases_run as f64;
        self
    }

    pub fn passed(&self) -> bool {
        self.cases_failed == 0
    }

    pub fn pre_rate(&self) -> f64 {
        if self.cases_run == 0 {
            0.0
        } else {
            self.cases_pre_satisfied as f64 / self.cases_run as f64
        }
    }
}

// ---------------------------------------------------------------------------
// side conditions

fn sample_state(spec: &MrdtSpec, rng: &mut ChaCha8Rng, max_len: usize) -> Result<(Value, u64)> {
    let ops = spec.ops();
    let mut ts = 1;
    let len = rng.gen_range(0..=max_len);
    let mut seq = Vec::with_capacity(len);
    for _ in 0..len {
        let rep = rng.gen_range(0..3);
        seq.push(Event::new(ts, rep, ops.choose(rng).unwrap().clone()));
        ts += 1;
    }
    Ok((apply_sequence(spec.as_ref(), &spec.init(), &seq)?, ts))
}

/// Non-commuting pairs are rc-related in exactly one direction, rc pairs
/// never commute, and declared-commuting pairs commute on sampled states.
pub fn check_rc_non_comm(spec: &MrdtSpec, cases: usize, rng_seed: u64) -> Result<VcReport> {
    let mut rep = VcReport::new("rc-non-comm");
    let ops = spec.ops();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    for _ in 0..cases {
        let o1 = ops.choose(&mut rng).unwrap().clone();
        let o2 = ops.choose(&mut rng).unwrap().clone();
        rep.cases_run += 1;
        rep.cases_pre_satisfied += 1;
        let comm = spec.commutes(&o1, &o2);
        let fwd = spec.rc(&o1, &o2);
        let back = spec.rc(&o2, &o1);
        let mut ok = if comm { !fwd && !back } else { fwd ^ back };
        let (sigma, ts) = sample_state(spec, &mut rng, 6)?;
        let e1 = Event::new(ts, 1, o1.clone());
        let e2 = Event::new(ts + 1, 2, o2.clone());
        let one = spec.apply(&spec.apply(&sigma, &e2)?, &e1)?;
        let two = spec.apply(&spec.apply(&sigma, &e1)?, &e2)?;
        if comm && one != two {
            ok = false;
        }
        if !ok {
            rep.cases_failed += 1;
            if rep.note.is_none() {
                rep.note = Some(format!(
                    "{o1} / {o2}: commutes={comm} rc->={fwd} rc<-={back} on {sigma}"
                ));
            }
        }
    }
    Ok(rep.finish_side())
}

/// For o1 rc o2 with o2, o3 not commuting: e3(pi(e1(e2(s)))) = e3(pi(e2(e1(s)))).
pub fn check_cond_comm(spec: &MrdtSpec, cases: usize, pi_bound: usize, rng_seed: u64) -> Result<VcReport> {
    let mut rep = VcReport::new("cond-comm");
    let ops = spec.ops();
    let mut triples = Vec::new();
    for o1 in &ops {
        for o2 in &ops {
            if !spec.rc(o1, o2) {
                continue;
            }
            for o3 in &ops {
                if !spec.commutes(o2, o3) {
                    triples.push((o1.clone(), o2.clone(), o3.clone()));
                }
            }
        }
    }
    if triples.is_empty() {
        rep.inapplicable = true;
        return Ok(rep.finish());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    for _ in 0..cases {
        let (o1, o2, o3) = triples.choose(&mut rng).unwrap().clone();
        rep.cases_run += 1;
        rep.cases_pre_satisfied += 1;
        let (sigma, mut ts) = sample_state(spec, &mut rng, 6)?;
        let e1 = Event::new(ts, rng.gen_range(0..3), o1);
        let e2 = Event::new(ts + 1, rng.gen_range(0..3), o2);
        ts += 2;
        let len = rng.gen_range(0..=pi_bound);
        let mut pi = Vec::with_capacity(len);
        for _ in 0..len {
            pi.push(Event::new(
                ts,
                rng.gen_range(0..3),
                ops.choose(&mut rng).unwrap().clone(),
            ));
            ts += 1;
        }
        let e3 = Event::new(ts, rng.gen_range(0..3), o3);
        let run = |first: &Event, second: &Event| -> Result<Value> {
            let s = spec.apply(&spec.apply(&sigma, first)?, second)?;
            let s = apply_sequence(spec.as_ref(), &s, &pi)?;
            spec.apply(&s, &e3)
        };
        let lhs = run(&e2, &e1)?;
        let rhs = run(&e1, &e2)?;
        if lhs != rhs {
            rep.cases_failed += 1;
            if rep.first_counterexample.is_none() {
                let mut all = vec![("e1".to_string(), e1), ("e2".to_string(), e2)];
                all.extend(pi.iter().map(|e| ("pi".to_string(), e.clone())));
                all.push(("e3".to_string(), e3));
                rep.first_counterexample = Some(Counterexample {
                    triple: FeasibleTriple {
                        l: sigma.clone(),
                        a: sigma.clone(),
                        b: sigma.clone(),
                        pi_top: vec![],
                        pi1: vec![],
                        pi2: vec![],
                        spec: spec.clone(),
                    },
                    events: all,
                    lhs,
                    rhs,
                });
            }
        }
    }
    Ok(rep.finish())
}

/// No o1 rc o2 rc o3 over the whole operation alphabet, and rc+ acyclic.
pub fn check_no_rc_chain(spec: &MrdtSpec) -> VcReport {
    let mut rep = VcReport::new("no-rc-chain");
    let ops = spec.ops();
    let succ: Vec<Vec<usize>> = ops
        .iter()
        .map(|o1| (0..ops.len()).filter(|&j| spec.rc(o1, &ops[j])).collect())
        .collect();
    for (i, next) in succ.iter().enumerate() {
        for &j in next {
            rep.cases_run += 1;
            rep.cases_pre_satisfied += 1;
            if let Some(&k) = succ[j].first() {
                rep.cases_failed += 1;
                if rep.note.is_none() {
                    rep.note = Some(format!("{} rc {} rc {}", ops[i], ops[j], ops[k]));
                }
            }
        }
    }
    if let Err(e) = check_rc_acyclic(spec.as_ref(), &ops) {
        rep.cases_failed += 1;
        rep.note.get_or_insert_with(|| e.to_string());
    }
    // an empty rc passes exhaustively, it is not a sampling gap
    let mut rep = rep.finish_side();
    rep.inapplicable = succ.iter().all(Vec::is_empty);
    rep
}

impl VcReport {
    fn finish_side(mut self) -> VcReport {
        self.vacuous = false;
        self
    }
}

// ---------------------------------------------------------------------------
// rows

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum Role {
    E,
    Eb,
    TopPrev,
    Top,
    E1Prev,
    E2Prev,
    E1,
    E2,
}

// Order above is also the timestamp order of the fresh events.
const ROLES: [Role; 8] = [
    Role::E,
    Role::Eb,
    Role::TopPrev,
    Role::Top,
    Role::E1Prev,
    Role::E2Prev,
    Role::E1,
    Role::E2,
];

impl Role {
    fn label(self) -> &'static str {
        match self {
            Role::E => "e",
            Role::Eb => "e_b",
            Role::TopPrev => "e_top'",
            Role::Top => "e_top",
            Role::E1Prev => "e1'",
            Role::E2Prev => "e2'",
            Role::E1 => "e1",
            Role::E2 => "e2",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Base {
    Init,
    L,
    A,
    B,
    /// pi1 replayed on top of `role(l)` instead of `l`
    AOver(Role),
}

#[derive(Clone, Debug)]
enum Term {
    State(Base, Vec<Role>),
    Merge(Box<[Term; 3]>, Vec<Role>),
}

fn st(base: Base, roles: &[Role]) -> Term {
    Term::State(base, roles.to_vec())
}

fn mu(l: Term, a: Term, b: Term) -> Term {
    Term::Merge(Box::new([l, a, b]), Vec::new())
}

impl Term {
    fn then(mut self, r: Role) -> Term {
        match &mut self {
            Term::State(_, rs) | Term::Merge(_, rs) => rs.push(r),
        }
        self
    }

    fn roles_into(&self, out: &mut Vec<Role>) {
        match self {
            Term::State(base, rs) => {
                if let Base::AOver(r) = base {
                    out.push(*r);
                }
                out.extend(rs);
            }
            Term::Merge(parts, rs) => {
                parts.iter().for_each(|p| p.roles_into(out));
                out.extend(rs);
            }
        }
    }
}

type Equation = (Term, Term);

/// `mu(l, e1(a), b) = e1(mu(l, a, b))`
fn peel(l: Term, a: Term, b: Term) -> Equation {
    (
        mu(l.clone(), a.clone().then(Role::E1), b.clone()),
        mu(l, a, b).then(Role::E1),
    )
}

/// `mu(e1(l), e1(a), e1(b)) = e1(mu(l, a, b))`
fn zero(l: Term, a: Term, b: Term) -> Equation {
    (
        mu(
            l.clone().then(Role::E1),
            a.clone().then(Role::E1),
            b.clone().then(Role::E1),
        ),
        mu(l, a, b).then(Role::E1),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Cond {
    /// e2 rc e1 or e2 commutes with e1
    TwoOp,
    /// same for the earlier b-side event e2'
    TwoOpPrev,
    /// some operation is rc-before e_top
    SomeRcTop,
    /// e_b rc e_top
    EbRcTop,
    /// e does not commute with e_b, or e rc e_top
    GuardTop,
    /// e does not commute with e_b, or e rc e1
    GuardE1,
}

impl Cond {
    fn roles(self) -> &'static [Role] {
        match self {
            Cond::TwoOp => &[Role::E1, Role::E2],
            Cond::TwoOpPrev => &[Role::E1, Role::E2Prev],
            Cond::SomeRcTop => &[Role::Top],
            Cond::EbRcTop => &[Role::Eb, Role::Top],
            Cond::GuardTop => &[Role::E, Role::Eb, Role::Top],
            Cond::GuardE1 => &[Role::E, Role::Eb, Role::E1],
        }
    }

    fn holds(self, spec: &dyn Mrdt, ops: &[Op], pick: &BTreeMap<Role, &Op>) -> bool {
        let o = |r: Role| pick[&r];
        match self {
            Cond::TwoOp => spec.rc(o(Role::E2), o(Role::E1)) || spec.commutes(o(Role::E2), o(Role::E1)),
            Cond::TwoOpPrev => spec.rc(o(Role::E2Prev), o(Role::E1)) || spec.commutes(o(Role::E2Prev), o(Role::E1)),
            Cond::SomeRcTop => ops.iter().any(|x| spec.rc(x, o(Role::Top))),
            Cond::EbRcTop => spec.rc(o(Role::Eb), o(Role::Top)),
            Cond::GuardTop => !spec.commutes(o(Role::E), o(Role::Eb)) || spec.rc(o(Role::E), o(Role::Top)),
            Cond::GuardE1 => !spec.commutes(o(Role::E), o(Role::Eb)) || spec.rc(o(Role::E), o(Role::E1)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Family {
    Merge,
    Two,
    One,
    Zero,
}

struct Row {
    name: &'static str,
    family: Family,
    conds: Vec<Cond>,
    /// replica of e_b and e
    side: u32,
    pre: Option<Equation>,
    post: Equation,
}

fn row(name: &'static str, family: Family, conds: &[Cond], side: u32, pre: Option<Equation>, post: Equation) -> Row {
    Row {
        name,
        family,
        conds: conds.to_vec(),
        side,
        pre,
        post,
    }
}

fn rows() -> Vec<Row> {
    use Base::*;
    use Cond::*;
    use Family::*;
    use Role::*;
    let (l1, l2) = (LEFT_REPLICA, RIGHT_REPLICA);
    let lt = || st(L, &[Top]);
    vec![
        row(
            "MergeCommutativity",
            Merge,
            &[],
            l1,
            None,
            (
                mu(st(L, &[]), st(A, &[]), st(B, &[])),
                mu(st(L, &[]), st(B, &[]), st(A, &[])),
            ),
        ),
        row(
            "MergeIdempotence",
            Merge,
            &[],
            l1,
            None,
            (mu(st(A, &[]), st(A, &[]), st(A, &[])), st(A, &[])),
        ),
        // -- two sides with events
        row(
            "psi-Ltopb-base-2op",
            Two,
            &[TwoOp],
            l1,
            None,
            peel(st(Init, &[]), st(Init, &[]), st(Init, &[E2])),
        ),
        row(
            "psi-Ltopb-ind-2op",
            Two,
            &[TwoOp],
            l1,
            Some(peel(st(L, &[]), st(L, &[]), st(L, &[E2]))),
            peel(lt(), lt(), st(L, &[Top, E2])),
        ),
        row(
            "psi-Ltopa-ind-2op",
            Two,
            &[TwoOp, SomeRcTop],
            l1,
            Some(peel(st(L, &[]), st(A, &[]), st(B, &[E2]))),
            peel(lt(), st(A, &[Top]), st(B, &[Top, E2])),
        ),
        row(
            "psi-L1b-ind1-2op",
            Two,
            &[TwoOp, EbRcTop],
            l1,
            Some(peel(lt(), st(A, &[Top]), st(B, &[Top, E2]))),
            peel(lt(), st(A, &[Eb, Top]), st(B, &[Top, E2])),
        ),
        row(
            "psi-L1b-ind2-2op",
            Two,
            &[TwoOp, EbRcTop, GuardTop],
            l1,
            Some(peel(lt(), st(A, &[Eb, Top]), st(B, &[Top, E2]))),
            peel(lt(), st(A, &[E, Eb, Top]), st(B, &[Top, E2])),
        ),
        row(
            "psi-L2b-ind1-2op",
            Two,
            &[TwoOp, EbRcTop],
            l2,
            Some(peel(lt(), st(A, &[Top]), st(B, &[Top, E2]))),
            peel(lt(), st(A, &[Top]), st(B, &[Eb, Top, E2])),
        ),
        row(
            "psi-L2b-ind2-2op",
            Two,
            &[TwoOp, EbRcTop, GuardTop],
            l2,
            Some(peel(lt(), st(A, &[Top]), st(B, &[Eb, Top, E2]))),
            peel(lt(), st(A, &[Top]), st(B, &[E, Eb, Top, E2])),
        ),
        row(
            "psi-L1a-ind-2op",
            Two,
            &[TwoOp],
            l1,
            Some(peel(st(L, &[]), st(A, &[]), st(B, &[E2]))),
            peel(st(L, &[]), st(A, &[E1Prev]), st(B, &[E2])),
        ),
        row(
            "psi-L2a-ind-2op",
            Two,
            &[TwoOp, TwoOpPrev],
            l1,
            Some(peel(st(L, &[]), st(A, &[]), st(B, &[E2]))),
            peel(st(L, &[]), st(A, &[]), st(B, &[E2Prev, E2])),
        ),
        // -- one side with events
        row(
            "psi-Ltopb-base-1op",
            One,
            &[],
            l1,
            None,
            peel(st(Init, &[]), st(Init, &[]), st(Init, &[])),
        ),
        row(
            "psi-Ltopb-ind-1op",
            One,
            &[],
            l1,
            Some(peel(st(L, &[]), st(L, &[]), st(L, &[]))),
            peel(lt(), lt(), lt()),
        ),
        row(
            "psi-Ltopa-ind-1op",
            One,
            &[SomeRcTop],
            l1,
            Some(peel(st(L, &[TopPrev]), st(AOver(TopPrev), &[]), st(B, &[TopPrev]))),
            peel(
                st(L, &[TopPrev, Top]),
                st(AOver(TopPrev), &[Top]),
                st(B, &[TopPrev, Top]),
            ),
        ),
        row(
            "psi-L1b-ind1-1op",
            One,
            &[EbRcTop],
            l1,
            Some(peel(lt(), st(A, &[Top]), st(B, &[Top]))),
            peel(lt(), st(A, &[Eb, Top]), st(B, &[Top])),
        ),
        row(
            "psi-L1b-ind2-1op",
            One,
            &[EbRcTop, GuardTop],
            l1,
            Some(peel(lt(), st(A, &[Eb, Top]), st(B, &[Top]))),
            peel(lt(), st(A, &[E, Eb, Top]), st(B, &[Top])),
        ),
        row(
            "psi-L2b-ind1-1op",
            One,
            &[EbRcTop],
            l2,
            Some(peel(lt(), st(A, &[Top]), st(B, &[Top]))),
            peel(lt(), st(A, &[Top]), st(B, &[Eb, Top])),
        ),
        row(
            "psi-L2b-ind2-1op",
            One,
            &[EbRcTop, GuardTop],
            l2,
            Some(peel(lt(), st(A, &[Top]), st(B, &[Eb, Top]))),
            peel(lt(), st(A, &[Top]), st(B, &[E, Eb, Top])),
        ),
        row(
            "psi-L1a-ind-1op",
            One,
            &[],
            l1,
            Some(peel(lt(), st(AOver(Top), &[]), st(B, &[Top]))),
            peel(lt(), st(AOver(Top), &[E1Prev]), st(B, &[Top])),
        ),
        // -- the event is on the shared prefix
        row(
            "psi-Ltopb-base-0op",
            Zero,
            &[],
            l1,
            None,
            zero(st(Init, &[]), st(Init, &[]), st(Init, &[])),
        ),
        row(
            "psi-Ltopb-ind-0op",
            Zero,
            &[],
            l1,
            Some(zero(st(L, &[]), st(L, &[]), st(L, &[]))),
            zero(lt(), lt(), lt()),
        ),
        row(
            "psi-Ltopa-ind-0op",
            Zero,
            &[SomeRcTop],
            l1,
            Some(zero(st(L, &[]), st(A, &[]), st(B, &[]))),
            zero(lt(), st(A, &[Top]), st(B, &[Top])),
        ),
        row(
            "psi-L1b-ind1-0op",
            Zero,
            &[],
            l1,
            Some(zero(st(L, &[]), st(A, &[]), st(B, &[]))),
            zero(st(L, &[]), st(A, &[Eb]), st(B, &[])),
        ),
        row(
            "psi-L1b-ind2-0op",
            Zero,
            &[GuardE1],
            l1,
            Some(zero(st(L, &[]), st(A, &[Eb]), st(B, &[]))),
            zero(st(L, &[]), st(A, &[E, Eb]), st(B, &[])),
        ),
        row(
            "psi-L2b-ind1-0op",
            Zero,
            &[],
            l2,
            Some(zero(st(L, &[]), st(A, &[]), st(B, &[]))),
            zero(st(L, &[]), st(A, &[]), st(B, &[Eb])),
        ),
        row(
            "psi-L2b-ind2-0op",
            Zero,
            &[GuardE1],
            l2,
            Some(zero(st(L, &[]), st(A, &[]), st(B, &[Eb]))),
            zero(st(L, &[]), st(A, &[]), st(B, &[E, Eb])),
        ),
    ]
}

/// Names of every verification-condition row, in suite order.
pub fn vc_names() -> Vec<&'static str> {
    rows().iter().map(|r| r.name).collect()
}

fn find_row(name: &str) -> Result<Row> {
    rows()
        .into_iter()
        .find(|r| r.name.eq_ignore_ascii_case(name))
        .ok_or_else(|| Error::UnknownVc(name.to_string()))
}

impl Row {
    fn roles(&self) -> Vec<Role> {
        let mut out = Vec::new();
        if let Some((x, y)) = &self.pre {
            x.roles_into(&mut out);
            y.roles_into(&mut out);
        }
        self.post.0.roles_into(&mut out);
        self.post.1.roles_into(&mut out);
        for c in &self.conds {
            out.extend(c.roles());
        }
        out.sort();
        out.dedup();
        out
    }

    fn replica(&self, r: Role) -> u32 {
        match r {
            Role::Top | Role::TopPrev => TOP_REPLICA,
            Role::E1 if self.family == Family::Zero => TOP_REPLICA,
            Role::E1 | Role::E1Prev => LEFT_REPLICA,
            Role::E2 | Role::E2Prev => RIGHT_REPLICA,
            Role::Eb | Role::E => self.side,
        }
    }
}

/// All assignments of operations to the constrained roles that satisfy
/// every side condition of the row, as operation indices in role order.
fn satisfying_picks(spec: &dyn Mrdt, ops: &[Op], row: &Row) -> (Vec<Role>, Vec<Vec<usize>>) {
    let mut roles: Vec<Role> = row.conds.iter().flat_map(|c| c.roles().iter().copied()).collect();
    roles.sort();
    roles.dedup();
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(roles.len());
    fn go(spec: &dyn Mrdt, ops: &[Op], row: &Row, roles: &[Role], cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let assigned: BTreeMap<Role, &Op> = roles.iter().zip(cur.iter()).map(|(r, &i)| (*r, &ops[i])).collect();
        // prune as soon as a condition has all its roles assigned
        for c in &row.conds {
            if c.roles().iter().all(|r| assigned.contains_key(r)) && !c.holds(spec, ops, &assigned) {
                return;
            }
        }
        if cur.len() == roles.len() {
            out.push(cur.clone());
            return;
        }
        for i in 0..ops.len() {
            cur.push(i);
            go(spec, ops, row, roles, cur, out);
            cur.pop();
        }
    }
    go(spec, ops, row, &roles, &mut cur, &mut out);
    (roles, out)
}

struct Ctx<'a> {
    spec: &'a dyn Mrdt,
    mode: Mode,
    triple: &'a FeasibleTriple,
    events: &'a BTreeMap<Role, Event>,
}

impl Ctx<'_> {
    fn apply_roles(&self, mut s: Value, roles: &[Role]) -> Result<Value> {
        for r in roles {
            s = self.spec.apply(&s, &self.events[r])?;
        }
        Ok(s)
    }

    fn eval(&self, t: &Term) -> Result<Value> {
        match t {
            Term::State(base, roles) => {
                let s = match base {
                    Base::Init => self.spec.init(),
                    Base::L => self.triple.l.clone(),
                    Base::A => self.triple.a.clone(),
                    Base::B => self.triple.b.clone(),
                    Base::AOver(r) => {
                        let under = self.apply_roles(self.triple.l.clone(), &[*r])?;
                        apply_sequence(self.spec, &under, &self.triple.pi1)?
                    }
                };
                self.apply_roles(s, roles)
            }
            Term::Merge(parts, roles) => {
                let [l, a, b] = parts.as_ref();
                let m = merge_in(self.spec, self.mode, &self.eval(l)?, &self.eval(a)?, &self.eval(b)?)?;
                self.apply_roles(m, roles)
            }
        }
    }

    fn equation(&self, eq: &Equation) -> Result<(Value, Value)> {
        Ok((self.eval(&eq.0)?, self.eval(&eq.1)?))
    }
}

/// Default generator bounds: each of pi_top, pi1, pi2 has 0..=3 events.
pub const DEFAULT_MAX_LEN: usize = 3;

fn row_seed(seed: u64, name: &str) -> u64 {
    // FNV-1a over the row name keeps per-row streams independent of order
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h ^ seed.rotate_left(17)
}

pub fn run_vc(spec: &MrdtSpec, vc_name: &str, mode: Mode, cases: usize, rng_seed: u64) -> Result<VcReport> {
    let row = find_row(vc_name)?;
    if mode == Mode::Crdt && !spec.has_merge2() {
        return Err(Error::NoBinaryMerge(spec.name().to_string()));
    }
    run_row(spec, &row, mode, cases, rng_seed)
}

fn run_row(spec: &MrdtSpec, row: &Row, mode: Mode, cases: usize, rng_seed: u64) -> Result<VcReport> {
    let mut rep = VcReport::new(row.name);
    let ops = spec.ops();
    let (constrained, picks) = satisfying_picks(spec.as_ref(), &ops, row);
    if picks.is_empty() {
        rep.inapplicable = true;
        return Ok(rep.finish());
    }
    let roles = row.roles();
    let mut rng = ChaCha8Rng::seed_from_u64(row_seed(rng_seed, row.name));
    for _ in 0..cases {
        let bounds = SizeBounds::new(
            rng.gen_range(0..=DEFAULT_MAX_LEN),
            rng.gen_range(0..=DEFAULT_MAX_LEN),
            rng.gen_range(0..=DEFAULT_MAX_LEN),
        );
        let triple = triple_from(spec, &mut rng, bounds)?;
        let pick = picks.choose(&mut rng).unwrap();
        let mut chosen: BTreeMap<Role, Op> = constrained
            .iter()
            .zip(pick)
            .map(|(r, &i)| (*r, ops[i].clone()))
            .collect();
        let mut events = BTreeMap::new();
        let mut ts = triple.max_ts() + 1;
        for r in ROLES {
            if !roles.contains(&r) {
                continue;
            }
            let op = chosen
                .remove(&r)
                .unwrap_or_else(|| ops.choose(&mut rng).unwrap().clone());
            events.insert(r, Event::new(ts, row.replica(r), op));
            ts += 1;
        }
        let ctx = Ctx {
            spec: spec.as_ref(),
            mode,
            triple: &triple,
            events: &events,
        };
        rep.cases_run += 1;
        if let Some(pre) = &row.pre {
            let (x, y) = ctx.equation(pre)?;
            if x != y {
                continue;
            }
        }
        rep.cases_pre_satisfied += 1;
        let (lhs, rhs) = ctx.equation(&row.post)?;
        if lhs != rhs {
            rep.cases_failed += 1;
            if rep.first_counterexample.is_none() {
                rep.first_counterexample = Some(Counterexample {
                    events: events.iter().map(|(r, e)| (r.label().to_string(), e.clone())).collect(),
                    triple: triple.clone(),
                    lhs,
                    rhs,
                });
            }
        }
    }
    Ok(rep.finish())
}

/// Re-evaluates a row on a recorded counterexample; true when the
/// post-condition fails again with the pre-condition holding.
pub fn replay_counterexample(spec: &MrdtSpec, vc_name: &str, mode: Mode, cx: &Counterexample) -> Result<bool> {
    let row = find_row(vc_name)?;
    let mut events = BTreeMap::new();
    for (label, e) in &cx.events {
        let r = ROLES
            .iter()
            .find(|r| r.label() == label)
            .ok_or_else(|| Error::Invalid(format!("unknown role `{label}`")))?;
        events.insert(*r, e.clone());
    }
    let l = apply_sequence(spec.as_ref(), &spec.init(), &cx.triple.pi_top)?;
    let triple = FeasibleTriple {
        a: apply_sequence(spec.as_ref(), &l, &cx.triple.pi1)?,
        b: apply_sequence(spec.as_ref(), &l, &cx.triple.pi2)?,
        l,
        pi_top: cx.triple.pi_top.clone(),
        pi1: cx.triple.pi1.clone(),
        pi2: cx.triple.pi2.clone(),
        spec: spec.clone(),
    };
    let ctx = Ctx {
        spec: spec.as_ref(),
        mode,
        triple: &triple,
        events: &events,
    };
    if let Some(pre) = &row.pre {
        let (x, y) = ctx.equation(pre)?;
        if x != y {
            return Ok(false);
        }
    }
    let (lhs, rhs) = ctx.equation(&row.post)?;
    Ok(lhs != rhs)
}

/// Side conditions, then every row.
pub fn run_full_suite(spec: &MrdtSpec, mode: Mode, cases: usize, rng_seed: u64) -> Result<Vec<VcReport>> {
    if mode == Mode::Crdt && !spec.has_merge2() {
        return Err(Error::NoBinaryMerge(spec.name().to_string()));
    }
    let mut out = vec![
        check_rc_non_comm(spec, cases, rng_seed)?,
        check_cond_comm(spec, cases, 3, rng_seed)?,
        check_no_rc_chain(spec),
    ];
    for row in rows() {
        out.push(run_row(spec, &row, mode, cases, rng_seed)?);
    }
    Ok(out)
}

pub fn suite_passed(reports: &[VcReport]) -> bool {
    reports.iter().all(VcReport::passed)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;
    use std::sync::Arc;

    use super::*;
    use crate::datatypes::{catalog_lookup, Alphabet, Counter, EwFlag, EwFlagBuggy, OrSet};
    use crate::event::QueryOp;

    fn orset() -> MrdtSpec {
        Arc::new(OrSet::new(Alphabet::default()))
    }

    #[test]
    fn empty_bounds_give_initial_states() {
        let t = gen_feasible_triple(&orset(), 3, SizeBounds::new(0, 0, 0)).unwrap();
        let s0 = Value::empty_set();
        assert_eq!((t.l, t.a, t.b), (s0.clone(), s0.clone(), s0));
        assert!(t.pi_top.is_empty() && t.pi1.is_empty() && t.pi2.is_empty());
    }

    #[test]
    fn counter_triple_folds_increments() {
        let spec: MrdtSpec = Arc::new(Counter);
        let t = gen_feasible_triple(&spec, 11, SizeBounds::new(1, 2, 3)).unwrap();
        assert_eq!((t.l, t.a, t.b), (Value::Int(1), Value::Int(3), Value::Int(4)));
    }

    #[test]
    fn orset_tags_come_from_generating_adds() {
        let spec = orset();
        for seed in 0..200 {
            let t = gen_feasible_triple(&spec, seed, SizeBounds::new(3, 3, 3)).unwrap();
            let mut ts: Vec<u64> = t.pi_top.iter().chain(&t.pi1).chain(&t.pi2).map(|e| e.ts.0).collect();
            let n = ts.len();
            ts.sort();
            ts.dedup();
            assert_eq!(ts.len(), n);
            for (state, seqs) in [
                (&t.l, vec![&t.pi_top]),
                (&t.a, vec![&t.pi_top, &t.pi1]),
                (&t.b, vec![&t.pi_top, &t.pi2]),
            ] {
                for item in state.as_set().unwrap() {
                    let parts = item.as_tuple().unwrap();
                    let (x, tag) = (parts[0].as_str().unwrap(), parts[1].as_int().unwrap() as u64);
                    let found = seqs
                        .iter()
                        .flat_map(|s| s.iter())
                        .any(|e| e.ts.0 == tag && e.op == Op::with_arg("add", x));
                    assert!(found, "{item} has no add in its sequence");
                }
            }
        }
    }

    #[test]
    fn side_conditions_hold_for_orset_and_counter() {
        for spec in [orset(), Arc::new(Counter) as MrdtSpec] {
            assert!(check_rc_non_comm(&spec, 500, 1).unwrap().passed());
            assert!(check_no_rc_chain(&spec).passed());
        }
        let cc = check_cond_comm(&orset(), 500, 3, 1).unwrap();
        assert!(cc.passed() && !cc.vacuous);
        let cc = check_cond_comm(&(Arc::new(Counter) as MrdtSpec), 500, 3, 1).unwrap();
        assert!(cc.inapplicable && cc.vacuous && cc.passed());
    }

    #[test]
    fn orset_pair_classification() {
        let s = orset();
        let (add, rem) = (Op::with_arg("add", "a"), Op::with_arg("rem", "a"));
        assert!(s.rc(&rem, &add) && !s.commutes(&rem, &add));
        assert!(s.commutes(&add, &Op::with_arg("add", "b")));
        assert!(!s.rc(&add, &Op::with_arg("add", "b")));
    }

    #[test]
    fn fixed_ewflag_cond_comm_passes() {
        let spec: MrdtSpec = Arc::new(EwFlag);
        let r = check_cond_comm(&spec, 1000, 3, 5).unwrap();
        assert!(r.passed() && !r.inapplicable);
    }

    /// rc with a -> b -> c over three nullary operations.
    struct Chain;

    impl Mrdt for Chain {
        fn name(&self) -> &str {
            "chain"
        }
        fn init(&self) -> Value {
            Value::Int(0)
        }
        fn apply(&self, s: &Value, _: &Event) -> Result<Value> {
            Ok(s.clone())
        }
        fn merge3(&self, _: &Value, a: &Value, _: &Value) -> Value {
            a.clone()
        }
        fn query(&self, s: &Value, _: &QueryOp) -> Result<Value> {
            Ok(s.clone())
        }
        fn queries(&self) -> Vec<QueryOp> {
            vec![Op::new("rd")]
        }
        fn ops(&self) -> Vec<Op> {
            ["a", "b", "c"].iter().map(|n| Op::new(n)).collect()
        }
        fn rc(&self, o1: &Op, o2: &Op) -> bool {
            matches!((o1.name.as_str(), o2.name.as_str()), ("a", "b") | ("b", "c"))
        }
        fn commutes(&self, o1: &Op, o2: &Op) -> bool {
            !self.rc(o1, o2) && !self.rc(o2, o1)
        }
    }

    #[test]
    fn rc_chain_is_rejected() {
        let spec: MrdtSpec = Arc::new(Chain);
        let r = check_no_rc_chain(&spec);
        assert!(!r.passed());
        assert!(r.note.unwrap().contains("a rc b rc c"));
    }

    #[test]
    fn orset_with_two_elements_has_no_chain() {
        let spec: MrdtSpec = Arc::new(OrSet::new(Alphabet(vec!["a".into(), "b".into()])));
        let r = check_no_rc_chain(&spec);
        assert!(r.passed() && r.cases_run == 2);
    }

    #[test]
    fn orset_base_case_by_hand() {
        let s = orset();
        let tagged = Value::set_of([Value::pair(Value::str("a"), Value::Int(4))]);
        let s0 = s.init();
        let add = Event::new(4, 2, Op::with_arg("add", "a"));
        let rem = Event::new(3, 1, Op::with_arg("rem", "a"));
        assert_eq!(s.apply(&s0, &add).unwrap(), tagged);
        let lhs = s.merge3(&s0, &s.apply(&s0, &rem).unwrap(), &tagged);
        assert_eq!(lhs, tagged);
        let rhs = s.apply(&s.merge3(&s0, &s0, &s0), &add).unwrap();
        assert_eq!(lhs, rhs);
        let r = run_vc(&s, "psi-Ltopb-base-2op", Mode::Mrdt, 300, 2).unwrap();
        assert!(r.passed() && r.cases_pre_satisfied == r.cases_run);
    }

    #[test]
    fn merge_is_idempotent_on_reachable_states() {
        for name in ["counter", "orset", "ewflag", "rga", "json"] {
            let spec = catalog_lookup(name, &Alphabet::default()).unwrap();
            let r = run_vc(&spec, "MergeIdempotence", Mode::Mrdt, 300, 9).unwrap();
            assert!(r.passed() && !r.vacuous, "{name}");
        }
    }

    #[test]
    fn counter_rows_without_rc_are_inapplicable() {
        let spec: MrdtSpec = Arc::new(Counter);
        let reports = run_full_suite(&spec, Mode::Mrdt, 200, 4).unwrap();
        assert!(suite_passed(&reports));
        let inapplicable: BTreeSet<&str> = reports
            .iter()
            .filter(|r| r.inapplicable)
            .map(|r| r.vc_name.as_str())
            .collect();
        assert!(inapplicable.contains("psi-L1b-ind1-2op"));
        assert!(inapplicable.contains("psi-Ltopa-ind-0op"));
        assert!(!inapplicable.contains("psi-Ltopb-ind-2op"));
    }

    #[test]
    fn buggy_flag_fails_the_second_b_side_step() {
        let spec: MrdtSpec = Arc::new(EwFlagBuggy);
        let r = run_vc(&spec, "psi-L2b-ind2-1op", Mode::Mrdt, 1000, 0).unwrap();
        assert!(r.cases_failed > 0);
        let cx = r.first_counterexample.unwrap();
        assert!(replay_counterexample(&spec, "psi-L2b-ind2-1op", Mode::Mrdt, &cx).unwrap());
    }

    #[test]
    fn buggy_flag_counterexample_from_initial_states() {
        let spec: MrdtSpec = Arc::new(EwFlagBuggy);
        let empty = gen_feasible_triple(&spec, 0, SizeBounds::new(0, 0, 0)).unwrap();
        let ev = |role: &str, ts, rep, op| (role.to_string(), Event::new(ts, rep, Op::new(op)));
        let cx = Counterexample {
            events: vec![
                ev("e", 1, 2, "enable"),
                ev("e_b", 2, 2, "disable"),
                ev("e_top", 3, 0, "enable"),
                ev("e1", 4, 1, "disable"),
            ],
            lhs: Value::Unit,
            rhs: Value::Unit,
            triple: empty,
        };
        assert!(replay_counterexample(&spec, "psi-L2b-ind2-1op", Mode::Mrdt, &cx).unwrap());
        let fixed: MrdtSpec = Arc::new(EwFlag);
        let mut cx = cx;
        cx.triple.spec = fixed.clone();
        assert!(!replay_counterexample(&fixed, "psi-L2b-ind2-1op", Mode::Mrdt, &cx).unwrap());
    }

    #[test]
    fn unknown_row_and_missing_binary_merge() {
        assert!(matches!(
            run_vc(&orset(), "psi-nope", Mode::Mrdt, 1, 0),
            Err(Error::UnknownVc(_))
        ));
        assert!(matches!(
            run_vc(&orset(), "MergeCommutativity", Mode::Crdt, 1, 0),
            Err(Error::NoBinaryMerge(_))
        ));
    }

    #[test]
    fn reports_are_deterministic() {
        let a = run_full_suite(&orset(), Mode::Mrdt, 100, 42).unwrap();
        let b = run_full_suite(&orset(), Mode::Mrdt, 100, 42).unwrap();
        let key = |r: &VcReport| (r.vc_name.clone(), r.cases_run, r.cases_pre_satisfied, r.cases_failed);
        assert_eq!(
            a.iter().map(key).collect::<Vec<_>>(),
            b.iter().map(key).collect::<Vec<_>>()
        );
        assert_eq!(vc_names().len(), 26);
    }
}
