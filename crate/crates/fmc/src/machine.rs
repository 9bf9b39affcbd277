//! The small-step abstract machine: states are triples of a memory
//! (location-indexed stacks of terms), a focus term, and a continuation
//! stack of conditional continuations. Six transitions drive the machine;
//! every state is exactly one of final, failure, or steppable.
//!
//! ```text
//! (S, [N]a.M, K)        -> (S·a(N), M, K)          push
//! (S·a(N), a<x>.M, K)   -> (S, {N/x}M, K)          pop
//! (S, 'i, ('i->M)·K)    -> (S, M, K)               select
//! (S, 'i, ('j->M)·K)    -> (S, 'i, K)   (i /= j)   skip
//! (S, N;'i->M, K)       -> (S, N, ('i->M)·K)       case
//! (S, M^'i, K)          -> (S, M, ('i->M^'i)·K)    loop
//! ```
//!
//! Final states are `(S, 'i, e)`; failure states have a free variable in
//! focus or pop from an empty stack.

use std::collections::BTreeMap;
use std::fmt;

use crate::syntax::{ChoiceLabel, Ident, Location, Term};

/// Location-indexed stacks of terms. Stacks are stored bottom-to-top
/// (`last` is the head); empty stacks are not stored, so structural
/// equality is canonical.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Memory(BTreeMap<Location, Vec<Term>>);

impl Memory {
    pub fn empty() -> Self {
        Memory(BTreeMap::new())
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push(&mut self, loc: &Location, term: Term) {
        self.0.entry(loc.clone()).or_default().push(term);
    }

    pub fn pop(&mut self, loc: &Location) -> Option<Term> {
        let stack = self.0.get_mut(loc)?;
        let t = stack.pop();
        if stack.is_empty() {
            self.0.remove(loc);
        }
        t
    }

    pub fn stack(&self, loc: &Location) -> &[Term] {
        self.0.get(loc).map(|s| s.as_slice()).unwrap_or(&[])
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Location, &Vec<Term>)> {
        self.0.iter()
    }

    pub fn locations(&self) -> impl Iterator<Item = &Location> {
        self.0.keys()
    }

    pub fn total_len(&self) -> usize {
        self.0.values().map(|s| s.len()).sum()
    }

    pub fn alpha_eq(&self, other: &Memory) -> bool {
        if self.0.len() != other.0.len() {
            return false;
        }
        self.0.iter().zip(other.0.iter()).all(|((l1, s1), (l2, s2))| {
            l1 == l2 && s1.len() == s2.len() && s1.iter().zip(s2.iter()).all(|(a, b)| a.alpha_eq(b))
        })
    }
}

impl fmt::Display for Memory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "ε");
        }
        let mut first = true;
        for (loc, stack) in &self.0 {
            if !first {
                write!(f, " ")?;
            }
            first = false;
            match loc {
                Location::Default => write!(f, "@(")?,
                Location::Named(n) => write!(f, "{n}(")?,
            }
            let mut inner = true;
            for t in stack {
                if !inner {
                    write!(f, ", ")?;
                }
                inner = false;
                write!(f, "{t}")?;
            }
            write!(f, ")")?;
        }
        Ok(())
    }
}

/// Stack of conditional continuations `'i -> M`, head last.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ContStack(Vec<(ChoiceLabel, Term)>);

impl ContStack {
    pub fn empty() -> Self {
        ContStack(Vec::new())
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    pub fn push(&mut self, label: ChoiceLabel, handler: Term) {
        self.0.push((label, handler));
    }

    pub fn pop(&mut self) -> Option<(ChoiceLabel, Term)> {
        self.0.pop()
    }

    /// Head (most recently pushed) continuation first.
    pub fn iter_head_first(&self) -> impl Iterator<Item = (&ChoiceLabel, &Term)> {
        self.0.iter().rev().map(|(l, t)| (l, t))
    }

    /// Oldest (outermost) continuation first.
    pub fn iter_tail_first(&self) -> impl Iterator<Item = (&ChoiceLabel, &Term)> {
        self.0.iter().map(|(l, t)| (l, t))
    }
}

/// A machine state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct State {
    pub memory: Memory,
    pub term: Term,
    pub cont: ContStack,
}

impl State {
    pub fn initial(term: Term, memory: Memory) -> State {
        State { memory, term, cont: ContStack::empty() }
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, |K|={})", self.memory, self.term, self.cont.depth())
    }
}

/// Why a state is a failure state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StuckReason {
    FreeVariable(Ident),
    EmptyPop(Location),
}

impl fmt::Display for StuckReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StuckReason::FreeVariable(x) => write!(f, "free variable `{x}` in focus"),
            StuckReason::EmptyPop(l) => match l {
                Location::Default => write!(f, "pop from the empty default stack"),
                Location::Named(n) => write!(f, "pop from the empty stack `{n}`"),
            },
        }
    }
}

/// The transition rule taken by a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Transition {
    Push,
    Pop,
    Select,
    Skip,
    Case,
    Loop,
}

impl Transition {
    pub fn name(self) -> &'static str {
        match self {
            Transition::Push => "push",
            Transition::Pop => "pop",
            Transition::Select => "select",
            Transition::Skip => "skip",
            Transition::Case => "case",
            Transition::Loop => "loop",
        }
    }
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Result of a single step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepResult {
    Next(State, Transition),
    Final(State),
    Stuck(State, StuckReason),
}

/// How a state classifies without stepping it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Classification {
    Final,
    Failure(StuckReason),
    Steppable,
}

pub fn classify(state: &State) -> Classification {
    match &state.term {
        Term::Var(x) => Classification::Failure(StuckReason::FreeVariable(x.clone())),
        Term::Pop(loc, _, _, _) if state.memory.stack(loc).is_empty() => {
            Classification::Failure(StuckReason::EmptyPop(loc.clone()))
        }
        Term::Choice(_) if state.cont.is_empty() => Classification::Final,
        _ => Classification::Steppable,
    }
}

/// Apply one transition.
pub fn step(state: State) -> StepResult {
    let State { mut memory, term, mut cont } = state;
    match term {
        Term::Var(x) => {
            let reason = StuckReason::FreeVariable(x.clone());
            StepResult::Stuck(State { memory, term: Term::Var(x), cont }, reason)
        }
        Term::Push(arg, loc, m) => {
            memory.push(&loc, *arg);
            StepResult::Next(State { memory, term: *m, cont }, Transition::Push)
        }
        Term::Pop(loc, x, ann, m) => match memory.pop(&loc) {
            Some(n) => {
                let next = m.substitute(&x, &n);
                StepResult::Next(State { memory, term: next, cont }, Transition::Pop)
            }
            None => {
                let reason = StuckReason::EmptyPop(loc.clone());
                StepResult::Stuck(State { memory, term: Term::Pop(loc, x, ann, m), cont }, reason)
            }
        },
        Term::Choice(i) => match cont.pop() {
            None => StepResult::Final(State { memory, term: Term::Choice(i), cont }),
            Some((j, m)) => {
                if i == j {
                    StepResult::Next(State { memory, term: m, cont }, Transition::Select)
                } else {
                    StepResult::Next(
                        State { memory, term: Term::Choice(i), cont },
                        Transition::Skip,
                    )
                }
            }
        },
        Term::Case(n, i, m) => {
            cont.push(i, *m);
            StepResult::Next(State { memory, term: *n, cont }, Transition::Case)
        }
        Term::Loop(m, i) => {
            let unrolled = Term::Loop(m.clone(), i.clone());
            cont.push(i, unrolled);
            StepResult::Next(State { memory, term: *m, cont }, Transition::Loop)
        }
    }
}

/// Outcome of a bounded run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunResult {
    Final { memory: Memory, choice: ChoiceLabel, steps: u64, pops: u64 },
    Stuck { state: State, reason: StuckReason },
    FuelExhausted { state: State, steps: u64 },
}

impl RunResult {
    pub fn is_final(&self) -> bool {
        matches!(self, RunResult::Final { .. })
    }
}

/// One trace record per transition; the snapshot is the state after the
/// transition.
#[derive(Debug, Clone)]
pub struct TraceEntry {
    pub step: u64,
    pub rule: Transition,
    pub memory: Memory,
    pub term: Term,
    pub cont_depth: usize,
}

impl fmt::Display for TraceEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "#{:<4} {:<6} mem: {}  term: {}  cont: {}",
            self.step, self.rule, self.memory, self.term, self.cont_depth
        )
    }
}

/// Iterate `step` from `(init, term, e)` for at most `fuel` transitions.
pub fn run(term: Term, init: Memory, fuel: u64) -> RunResult {
    run_inner(term, init, fuel, None)
}

/// As [`run`], also recording one trace entry per transition.
pub fn run_traced(term: Term, init: Memory, fuel: u64) -> (RunResult, Vec<TraceEntry>) {
    let mut trace = Vec::new();
    let result = run_inner(term, init, fuel, Some(&mut trace));
    (result, trace)
}

fn run_inner(
    term: Term,
    init: Memory,
    fuel: u64,
    mut trace: Option<&mut Vec<TraceEntry>>,
) -> RunResult {
    let mut state = State::initial(term, init);
    let mut steps: u64 = 0;
    let mut pops: u64 = 0;
    loop {
        if steps == fuel {
            if let Classification::Steppable = classify(&state) {
                return RunResult::FuelExhausted { state, steps };
            }
        }
        match step(state) {
            StepResult::Final(s) => {
                let choice = match &s.term {
                    Term::Choice(i) => i.clone(),
                    _ => unreachable!("final state focuses a choice"),
                };
                debug_assert!(pops <= steps);
                return RunResult::Final { memory: s.memory, choice, steps, pops };
            }
            StepResult::Stuck(s, reason) => return RunResult::Stuck { state: s, reason },
            StepResult::Next(s, rule) => {
                steps += 1;
                if rule == Transition::Pop {
                    pops += 1;
                }
                if let Some(trace) = trace.as_mut() {
                    trace.push(TraceEntry {
                        step: steps,
                        rule,
                        memory: s.memory.clone(),
                        term: s.term.clone(),
                        cont_depth: s.cont.depth(),
                    });
                }
                state = s;
            }
        }
    }
}

/// Read a state back to a closed-form term: continuation items become
/// cases (head innermost), then memory items become pushes (head of each
/// stack innermost, named locations inside the default location, in
/// lexicographic order).
pub fn readback(state: &State) -> Term {
    let mut t = state.term.clone();
    for (label, handler) in state.cont.iter_head_first() {
        t = Term::case(t, label.clone(), handler.clone());
    }
    let locs: Vec<Location> = state.memory.locations().cloned().collect();
    for loc in locs.iter().rev() {
        for item in state.memory.stack(loc).iter().rev() {
            t = Term::push(item.clone(), loc.clone(), t);
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse;

    fn p(src: &str) -> Term {
        parse(src).unwrap()
    }

    #[test]
    fn step_push_rule() {
        let s = State::initial(p("[n]a.m"), Memory::empty());
        match step(s) {
            StepResult::Next(s, Transition::Push) => {
                assert_eq!(s.memory.stack(&Location::named("a")), &[p("n")]);
                assert_eq!(s.term, p("m"));
            }
            other => panic!("expected push, got {other:?}"),
        }
    }

    #[test]
    fn step_skip_rule() {
        let mut cont = ContStack::empty();
        cont.push(ChoiceLabel::named("j"), p("m"));
        let s = State { memory: Memory::empty(), term: p("'i"), cont };
        match step(s) {
            StepResult::Next(s, Transition::Skip) => {
                assert_eq!(s.term, p("'i"));
                assert!(s.cont.is_empty());
            }
            other => panic!("expected skip, got {other:?}"),
        }
    }

    #[test]
    fn step_final() {
        let s = State::initial(p("*"), Memory::empty());
        assert!(matches!(step(s), StepResult::Final(_)));
    }

    #[test]
    fn run_push_pop() {
        // push, pop: two transitions, one of them a pop.
        match run(p("[*].<y>.y"), Memory::empty(), 100) {
            RunResult::Final { memory, choice, steps, pops } => {
                assert!(memory.is_empty());
                assert_eq!(choice, ChoiceLabel::Star);
                assert_eq!(steps, 2);
                assert_eq!(pops, 1);
            }
            other => panic!("expected final, got {other:?}"),
        }
    }

    #[test]
    fn run_free_variable_is_stuck() {
        match run(p("x"), Memory::empty(), 100) {
            RunResult::Stuck { reason: StuckReason::FreeVariable(x), .. } => {
                assert_eq!(x.as_str(), "x");
            }
            other => panic!("expected stuck, got {other:?}"),
        }
    }

    #[test]
    fn run_empty_pop_is_stuck() {
        match run(p("<x>.x"), Memory::empty(), 100) {
            RunResult::Stuck { reason: StuckReason::EmptyPop(Location::Default), .. } => {}
            other => panic!("expected stuck, got {other:?}"),
        }
    }

    #[test]
    fn looping_term_exhausts_fuel() {
        match run(p("('i)^'i"), Memory::empty(), 10) {
            RunResult::FuelExhausted { steps, .. } => assert_eq!(steps, 10),
            other => panic!("expected fuel exhaustion, got {other:?}"),
        }
    }

    #[test]
    fn classification_is_total() {
        for src in ["*", "'i", "x", "<x>.x", "[n].m", "m;n", "(m)^'i"] {
            let s = State::initial(p(src), Memory::empty());
            let c = classify(&s);
            match c {
                Classification::Final => assert!(matches!(step(s), StepResult::Final(_))),
                Classification::Failure(_) => assert!(matches!(step(s), StepResult::Stuck(_, _))),
                Classification::Steppable => assert!(matches!(step(s), StepResult::Next(_, _))),
            }
        }
    }

    #[test]
    fn traces_are_deterministic() {
        let t = p("[<x>.x].<y>.(y;'i->*)");
        let (r1, tr1) = run_traced(t.clone(), Memory::empty(), 100);
        let (r2, tr2) = run_traced(t, Memory::empty(), 100);
        assert_eq!(r1, r2);
        assert_eq!(tr1.len(), tr2.len());
        for (a, b) in tr1.iter().zip(tr2.iter()) {
            assert_eq!(a.to_string(), b.to_string());
        }
    }

    #[test]
    fn readback_shapes() {
        // (e, M, e) -> M
        let s = State::initial(p("m"), Memory::empty());
        assert_eq!(readback(&s), p("m"));
        // (a(N), M, e) -> [N]a.M
        let mut mem = Memory::empty();
        mem.push(&Location::named("a"), p("n"));
        let s = State { memory: mem, term: p("m"), cont: ContStack::empty() };
        assert_eq!(readback(&s), p("[n]a.m"));
        // (e, M, ('i->N)) -> M;'i->N
        let mut cont = ContStack::empty();
        cont.push(ChoiceLabel::named("i"), p("n"));
        let s = State { memory: Memory::empty(), term: p("m"), cont };
        assert_eq!(readback(&s), p("m;'i->n"));
    }

    #[test]
    fn readback_orders_default_outermost() {
        let mut mem = Memory::empty();
        mem.push(&Location::Default, p("p"));
        mem.push(&Location::named("a"), p("n"));
        mem.push(&Location::named("a"), p("q"));
        let s = State { memory: mem, term: p("m"), cont: ContStack::empty() };
        // default first, then a; within a stack the head is innermost
        assert_eq!(readback(&s), p("[p].[n]a.[q]a.m"));
    }

    #[test]
    fn pops_never_exceed_steps() {
        for src in ["[*].<y>.y", "[x].[y].*", "*;*;*"] {
            if let RunResult::Final { steps, pops, .. } = run(p(src), Memory::empty(), 100) {
                assert!(pops <= steps);
            }
        }
    }
}
