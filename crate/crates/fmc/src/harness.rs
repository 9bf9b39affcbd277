//! Seeded random generation of terms and types, and the executable
//! metatheory suites: machine/big-step agreement, weak head simulation of
//! the machine, evaluation/reduction commutation, affine termination,
//! confluence and the complete-reduction diamond, subject reduction,
//! progress, typed termination, measured-evaluation decrease, zero-term
//! inhabitation, and a generator coverage smoke test.
//!
//! Typed terms are generated by sampling typing derivations goal-first,
//! so every generated term synthesizes its goal type by construction;
//! rejection sampling would almost never produce well-typed case or loop
//! compositions. Counterexamples are minimized by greedy subterm
//! shrinking and printed in concrete syntax.

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::fmt;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::eval::{eval_big, eval_measured, EvalResult};
use crate::machine::{
    classify, readback, run, step, Classification, Memory, RunResult, State, StepResult,
};
use crate::rewrite::{
    affine_measure, apply, complete_step, mark_with, marked_reduct, redexes, weak_head_reducts,
    Rule,
};
use crate::syntax::{ident, ChoiceLabel, Ident, Location, Term};
use crate::types::{self, check, synthesize, Context, MemType, SumType, ValueType};

/// Generator configuration.
#[derive(Debug, Clone)]
pub struct GenConfig {
    pub seed: u64,
    pub max_size: usize,
    /// Number of named locations in the alphabet (the default location is
    /// always available).
    pub locations: usize,
    /// Number of named choices in the alphabet (the default choice is
    /// always available).
    pub choices: usize,
    pub loop_prob: f64,
    pub typed: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig { seed: 0, max_size: 16, locations: 2, choices: 2, loop_prob: 0.0, typed: false }
    }
}

impl GenConfig {
    fn validate(&self) -> GenConfig {
        let mut c = self.clone();
        c.max_size = c.max_size.max(1);
        c.loop_prob = c.loop_prob.clamp(0.0, 1.0);
        c
    }
}

/// A reproducible generator for a seed.
pub fn seeded_rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

fn rng_for(cfg: &GenConfig) -> StdRng {
    seeded_rng(cfg.seed)
}

fn random_location(rng: &mut StdRng, cfg: &GenConfig) -> Location {
    if cfg.locations == 0 || rng.gen_bool(0.5) {
        Location::Default
    } else {
        let k = rng.gen_range(0..cfg.locations);
        Location::Named(ident(&format!("{}", (b'a' + (k % 26) as u8) as char)))
    }
}

fn random_choice(rng: &mut StdRng, cfg: &GenConfig) -> ChoiceLabel {
    if cfg.choices == 0 || rng.gen_bool(0.4) {
        ChoiceLabel::Star
    } else {
        let k = rng.gen_range(0..cfg.choices);
        ChoiceLabel::Named(ident(&format!("c{k}")))
    }
}

/// A closed random term within the size bound; in typed mode the term
/// synthesizes a type by construction.
pub fn gen_term(cfg: &GenConfig) -> Term {
    let cfg = cfg.validate();
    let mut rng = rng_for(&cfg);
    gen_term_with(&mut rng, &cfg)
}

pub fn gen_term_with(rng: &mut StdRng, cfg: &GenConfig) -> Term {
    if cfg.typed {
        gen_typed_term_with(rng, cfg).0
    } else {
        let mut env = Vec::new();
        let mut counter = 0;
        gen_untyped(rng, cfg, cfg.max_size.max(1), &mut env, &mut counter)
    }
}

fn gen_untyped(
    rng: &mut StdRng,
    cfg: &GenConfig,
    budget: usize,
    env: &mut Vec<Ident>,
    counter: &mut usize,
) -> Term {
    if budget <= 1 {
        return if !env.is_empty() && rng.gen_bool(0.5) {
            Term::Var(env[rng.gen_range(0..env.len())].clone())
        } else {
            Term::Choice(random_choice(rng, cfg))
        };
    }
    let include_loop = cfg.loop_prob > 0.0 && rng.gen_bool(cfg.loop_prob);
    match rng.gen_range(0..10u32) {
        _ if include_loop => {
            let body = gen_untyped(rng, cfg, budget - 1, env, counter);
            Term::looped(body, random_choice(rng, cfg))
        }
        0 | 1 => {
            let left = budget / 2;
            let arg = gen_untyped(rng, cfg, left.max(1), env, counter);
            let cont = gen_untyped(rng, cfg, (budget - 1 - left.min(budget - 1)).max(1), env, counter);
            Term::push(arg, random_location(rng, cfg), cont)
        }
        2 | 3 | 4 => {
            let x = if rng.gen_bool(0.1) {
                Ident::blank()
            } else {
                let name = ident(&format!("v{counter}"));
                *counter += 1;
                name
            };
            if !x.is_blank() {
                env.push(x.clone());
            }
            let cont = gen_untyped(rng, cfg, budget - 1, env, counter);
            if !x.is_blank() {
                env.pop();
            }
            Term::pop(random_location(rng, cfg), x, None, cont)
        }
        5 | 6 | 7 => {
            let left = budget / 2;
            let a = gen_untyped(rng, cfg, left.max(1), env, counter);
            let b = gen_untyped(rng, cfg, (budget - 1 - left.min(budget - 1)).max(1), env, counter);
            Term::case(a, random_choice(rng, cfg), b)
        }
        _ => {
            if !env.is_empty() && rng.gen_bool(0.6) {
                Term::Var(env[rng.gen_range(0..env.len())].clone())
            } else {
                Term::Choice(random_choice(rng, cfg))
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Type generation
// ---------------------------------------------------------------------------

/// A random well-formed type of bounded depth. With `allow_void`, empty
/// sums may appear; without it every sum in the type is nonempty, as the
/// termination results require.
pub fn gen_type(cfg: &GenConfig) -> ValueType {
    let cfg = cfg.validate();
    let mut rng = rng_for(&cfg);
    gen_type_with(&mut rng, &cfg, 2, true)
}

pub fn gen_type_with(rng: &mut StdRng, cfg: &GenConfig, depth: usize, allow_void: bool) -> ValueType {
    let input = gen_memtype(rng, cfg, depth, allow_void);
    let output = gen_sumtype(rng, cfg, depth, allow_void);
    ValueType::new(input, output)
}

fn gen_memtype(rng: &mut StdRng, cfg: &GenConfig, depth: usize, allow_void: bool) -> MemType {
    let mut m = MemType::empty();
    if depth == 0 {
        return m;
    }
    let groups = rng.gen_range(0..=2);
    for _ in 0..groups {
        let loc = random_location(rng, cfg);
        let items = rng.gen_range(1..=2);
        for _ in 0..items {
            m.push_top(&loc, gen_item_type(rng, cfg, depth - 1, allow_void));
        }
    }
    m
}

/// A type for a stack item. Item sums are kept to a single branch: the
/// zero term of a wider item is a case chain whose reject reducts leave
/// the reach of the syntax-directed checker, which does not claim
/// completeness for the declarative system.
fn gen_item_type(rng: &mut StdRng, cfg: &GenConfig, depth: usize, allow_void: bool) -> ValueType {
    let input = if depth == 0 {
        MemType::empty()
    } else {
        gen_memtype(rng, cfg, depth, allow_void)
    };
    let output = if allow_void && rng.gen_bool(0.08) {
        SumType::empty()
    } else {
        let mem = if depth == 0 {
            MemType::empty()
        } else {
            gen_memtype(rng, cfg, depth - 1, allow_void)
        };
        SumType::singleton(random_choice(rng, cfg), mem)
    };
    ValueType::new(input, output)
}

fn gen_sumtype(rng: &mut StdRng, cfg: &GenConfig, depth: usize, allow_void: bool) -> SumType {
    if allow_void && rng.gen_bool(0.08) {
        return SumType::empty();
    }
    let mut s = SumType::empty();
    let branches = rng.gen_range(1..=2);
    for _ in 0..branches {
        let label = random_choice(rng, cfg);
        let mem = if depth == 0 {
            MemType::empty()
        } else {
            gen_memtype(rng, cfg, depth - 1, allow_void)
        };
        s.insert(label, mem);
    }
    s
}

// ---------------------------------------------------------------------------
// Typed term generation: sampling derivations goal-first
// ---------------------------------------------------------------------------

/// A closed term synthesizing exactly the returned type.
pub fn gen_typed_term(cfg: &GenConfig) -> (Term, ValueType) {
    let cfg = cfg.validate();
    let mut rng = rng_for(&cfg);
    gen_typed_term_with(&mut rng, &cfg)
}

pub fn gen_typed_term_with(rng: &mut StdRng, cfg: &GenConfig) -> (Term, ValueType) {
    // Loop-free suites need void-free types throughout: the zero term of
    // a void type is a loop.
    let allow_void = cfg.loop_prob > 0.0;
    let goal = gen_type_with(rng, cfg, 1, allow_void);
    let mut counter = 0;
    let term = gen_typed(rng, cfg, &mut Vec::new(), &goal, cfg.max_size, &mut counter);
    debug_assert_eq!(synthesize(&Context::empty(), &term).as_ref(), Ok(&goal));
    (term, goal)
}

/// The canonical inhabitant synthesizing exactly `goal`.
pub fn exact_zero_term(goal: &ValueType) -> Term {
    types::inhabit(goal)
}

fn fresh_choice(rng: &mut StdRng, cfg: &GenConfig, avoid: &SumType) -> ChoiceLabel {
    for k in 0..(cfg.choices + 8) {
        let candidate = ChoiceLabel::Named(ident(&format!("c{k}")));
        if avoid.branch(&candidate).is_none() && rng.gen_bool(0.5) {
            return candidate;
        }
    }
    let mut k = 0;
    loop {
        let candidate = ChoiceLabel::Named(ident(&format!("c{k}")));
        if avoid.branch(&candidate).is_none() {
            return candidate;
        }
        k += 1;
    }
}

fn gen_typed(
    rng: &mut StdRng,
    cfg: &GenConfig,
    ctx: &mut Vec<(Ident, ValueType)>,
    goal: &ValueType,
    budget: usize,
    counter: &mut usize,
) -> Term {
    if budget <= 2 {
        // A variable of exactly the goal type, when one is in scope.
        let hits: Vec<&Ident> =
            ctx.iter().filter(|(_, t)| t == goal).map(|(x, _)| x).collect();
        if !hits.is_empty() && rng.gen_bool(0.7) {
            return Term::Var(hits[rng.gen_range(0..hits.len())].clone());
        }
        return exact_zero_term(goal);
    }
    let with_loop = cfg.loop_prob > 0.0 && rng.gen_bool(cfg.loop_prob);
    if with_loop {
        // loop: body at goal plus a fresh repeat branch equal to the input.
        let label = fresh_choice(rng, cfg, &goal.output);
        let mut body_out = goal.output.clone();
        body_out.insert(label.clone(), goal.input.clone());
        let body_goal = ValueType::new(goal.input.clone(), body_out);
        let body = gen_typed(rng, cfg, ctx, &body_goal, budget - 1, counter);
        return Term::looped(body, label);
    }
    match rng.gen_range(0..10u32) {
        // pop: consume the top of one input stack
        0 | 1 | 2 if !goal.input.is_empty() => {
            let locs: Vec<Location> = goal.input.locations().cloned().collect();
            let loc = locs[rng.gen_range(0..locs.len())].clone();
            let mut inner_input = goal.input.clone();
            let ann = inner_input.pop_top(&loc).expect("nonempty stack");
            let x = ident(&format!("v{counter}"));
            *counter += 1;
            ctx.push((x.clone(), ann.clone()));
            let body = gen_typed(
                rng,
                cfg,
                ctx,
                &ValueType::new(inner_input, goal.output.clone()),
                budget - 1,
                counter,
            );
            ctx.pop();
            Term::pop(loc, x, Some(ann), body)
        }
        // push: provide an extra item for the continuation to consume
        3 | 4 => {
            let loc = random_location(rng, cfg);
            let arg_ty = gen_item_type(rng, cfg, 1, false);
            let arg_budget = (budget / 3).max(1);
            let arg = gen_typed(rng, cfg, ctx, &arg_ty, arg_budget, counter);
            let mut inner_input = goal.input.clone();
            inner_input.push_top(&loc, arg_ty);
            let body = gen_typed(
                rng,
                cfg,
                ctx,
                &ValueType::new(inner_input, goal.output.clone()),
                budget.saturating_sub(arg_budget + 1).max(1),
                counter,
            );
            Term::push(arg, loc, body)
        }
        // case: route a fresh branch of the body through a handler
        5 | 6 | 7 => {
            let label = fresh_choice(rng, cfg, &goal.output);
            let handler_input = gen_memtype(rng, cfg, 1, false);
            // the body keeps a random subset of the goal branches
            let mut body_out = SumType::singleton(label.clone(), handler_input.clone());
            for (l, m) in goal.output.branches() {
                if rng.gen_bool(0.5) {
                    body_out.insert(l.clone(), m.clone());
                }
            }
            let body_goal = ValueType::new(goal.input.clone(), body_out);
            let handler_goal = ValueType::new(handler_input, goal.output.clone());
            let left_budget = (budget / 2).max(1);
            let body = gen_typed(rng, cfg, ctx, &body_goal, left_budget, counter);
            let handler = gen_typed(
                rng,
                cfg,
                ctx,
                &handler_goal,
                budget.saturating_sub(left_budget + 1).max(1),
                counter,
            );
            Term::case(body, label, handler)
        }
        _ => {
            let hits: Vec<&Ident> =
                ctx.iter().filter(|(_, t)| t == goal).map(|(x, _)| x).collect();
            if !hits.is_empty() && rng.gen_bool(0.7) {
                return Term::Var(hits[rng.gen_range(0..hits.len())].clone());
            }
            exact_zero_term(goal)
        }
    }
}

// ---------------------------------------------------------------------------
// Relational checkers shared by the suites and the acceptance tests
// ---------------------------------------------------------------------------

/// The machine states of a run, in order, starting with the initial
/// state. Stops at final, stuck, or the fuel bound.
pub fn run_states(term: Term, init: Memory, fuel: u64) -> Vec<State> {
    let mut states = vec![State::initial(term, init)];
    for _ in 0..fuel {
        match step(states.last().unwrap().clone()) {
            StepResult::Next(s, _) => states.push(s),
            StepResult::Final(_) | StepResult::Stuck(_, _) => break,
        }
    }
    states
}

/// Is `t` a readback of `state`? Readbacks absorb the continuation items
/// in order and each memory stack bottom-up, but may interleave freely,
/// so the check peels the term outside-in with backtracking.
pub fn is_readback_of(t: &Term, state: &State) -> bool {
    // remaining[loc] = index of the next unconsumed (bottom-most) item
    fn peel(
        t: &Term,
        state: &State,
        consumed: &mut Vec<usize>,
        locs: &[Location],
        cont_taken: usize,
    ) -> bool {
        // all memory and continuation items consumed: compare the focus
        if consumed.iter().enumerate().all(|(i, c)| *c == state.memory.stack(&locs[i]).len())
            && cont_taken == state.cont.depth()
            && t.alpha_eq(&state.term)
        {
            return true;
        }
        if let Term::Push(arg, loc, cont) = t {
            if let Some(i) = locs.iter().position(|l| l == loc) {
                let stack = state.memory.stack(loc);
                if consumed[i] < stack.len() && arg.alpha_eq(&stack[consumed[i]]) {
                    consumed[i] += 1;
                    if peel(cont, state, consumed, locs, cont_taken) {
                        consumed[i] -= 1;
                        return true;
                    }
                    consumed[i] -= 1;
                }
            }
        }
        if let Term::Case(left, label, handler) = t {
            // the outermost case matches the oldest unconsumed item
            let items: Vec<(&ChoiceLabel, &Term)> = state.cont.iter_tail_first().collect();
            if cont_taken < items.len() {
                let (l, h) = items[cont_taken];
                if l == label && handler.alpha_eq(h) {
                    if peel(left, state, consumed, locs, cont_taken + 1) {
                        return true;
                    }
                }
            }
        }
        false
    }
    let locs: Vec<Location> = state.memory.locations().cloned().collect();
    let mut consumed = vec![0usize; locs.len()];
    peel(t, state, &mut consumed, &locs, 0)
}

/// Does some weak head reduction sequence from `from` reach a term
/// satisfying `target`? Bounded breadth-first search.
pub fn wh_reaches(from: &Term, target: &dyn Fn(&Term) -> bool, depth: usize, node_cap: usize) -> bool {
    let mut seen: HashSet<String> = HashSet::new();
    let mut queue: VecDeque<(Term, usize)> = VecDeque::new();
    queue.push_back((from.clone(), 0));
    seen.insert(from.alpha_canonical().to_string());
    let mut nodes = 0;
    while let Some((t, d)) = queue.pop_front() {
        if target(&t) {
            return true;
        }
        if d >= depth {
            continue;
        }
        for next in weak_head_reducts(&t) {
            nodes += 1;
            if nodes > node_cap {
                return false;
            }
            let key = next.alpha_canonical().to_string();
            if seen.insert(key) {
                queue.push_back((next, d + 1));
            }
        }
    }
    false
}

/// Check weak head simulation along one machine transition: the readback
/// of `before` weak-head-reduces to a readback of `after`.
pub fn simulates(before: &State, after: &State) -> bool {
    let rb = readback(before);
    let depth = before.cont.depth() + before.memory.total_len() + 6;
    wh_reaches(&rb, &|t| is_readback_of(t, after), depth, 50_000)
}

/// Replay every transition of a run and check the simulation for each.
pub fn check_weak_head_simulation(term: &Term, fuel: u64) -> Result<(), String> {
    let states = run_states(term.clone(), Memory::empty(), fuel);
    for (i, pair) in states.windows(2).enumerate() {
        if !simulates(&pair[0], &pair[1]) {
            return Err(format!(
                "transition {i} of `{term}`: readback `{}` does not weak-head-reduce to a readback of {}",
                readback(&pair[0]),
                &pair[1]
            ));
        }
    }
    Ok(())
}

/// Does `a` reduce to `b` in at most `depth` steps? Bounded search over
/// all redexes, modulo alpha.
pub fn term_reduces_to(a: &Term, b: &Term, depth: usize, node_cap: usize) -> bool {
    let target = b.alpha_canonical().to_string();
    let mut seen: HashSet<String> = HashSet::new();
    let mut queue: VecDeque<(Term, usize)> = VecDeque::new();
    seen.insert(a.alpha_canonical().to_string());
    queue.push_back((a.clone(), 0));
    let mut nodes = 0;
    while let Some((t, d)) = queue.pop_front() {
        if t.alpha_canonical().to_string() == target {
            return true;
        }
        if d >= depth {
            continue;
        }
        for (path, rule) in redexes(&t, true) {
            nodes += 1;
            if nodes > node_cap {
                return false;
            }
            let next = apply(&t, &path, rule).expect("enumerated redex applies");
            if seen.insert(next.alpha_canonical().to_string()) {
                queue.push_back((next, d + 1));
            }
        }
    }
    false
}

/// Pointwise bounded reduction between memories of the same shape.
pub fn memory_reduces_to(a: &Memory, b: &Memory, depth: usize, node_cap: usize) -> bool {
    let la: Vec<&Location> = a.locations().collect();
    let lb: Vec<&Location> = b.locations().collect();
    if la != lb {
        return false;
    }
    for loc in la {
        let sa = a.stack(loc);
        let sb = b.stack(loc);
        if sa.len() != sb.len() {
            return false;
        }
        for (x, y) in sa.iter().zip(sb.iter()) {
            if !x.alpha_eq(y) && !term_reduces_to(x, y, depth, node_cap) {
                return false;
            }
        }
    }
    true
}

/// Compare the machine and big-step evaluation on the same inputs,
/// escalating the fuel when only one side decides.
pub fn machine_eval_agree(term: &Term, init: &Memory, fuel: u64) -> Result<(), String> {
    let mut fuel = fuel;
    for _ in 0..3 {
        let machine = run(term.clone(), init.clone(), fuel);
        let big = eval_big(term, init.clone(), fuel);
        match (&machine, &big) {
            (RunResult::Final { memory, choice, .. }, EvalResult::Value(mem2, c2)) => {
                return if memory.alpha_eq(mem2) && choice == c2 {
                    Ok(())
                } else {
                    Err(format!("final disagreement on `{term}`: ({memory}, {choice}) vs ({mem2}, {c2})"))
                };
            }
            (RunResult::Stuck { reason, .. }, EvalResult::Failed(r2)) => {
                return if reason == r2 {
                    Ok(())
                } else {
                    Err(format!("stuck disagreement on `{term}`: {reason} vs {r2}"))
                };
            }
            (RunResult::FuelExhausted { .. }, EvalResult::Diverged) => return Ok(()),
            _ => {
                // one side decided and the other ran out of fuel
                fuel = fuel.saturating_mul(10);
            }
        }
    }
    let machine = run(term.clone(), init.clone(), fuel);
    let big = eval_big(term, init.clone(), fuel);
    Err(format!("machine/big-step mismatch on `{term}`: {machine:?} vs {big:?}"))
}

// ---------------------------------------------------------------------------
// Shrinking
// ---------------------------------------------------------------------------

/// Greedy subterm shrinking: repeatedly replace the counterexample by its
/// smallest closed proper subterm that still fails.
pub fn shrink(term: &Term, still_fails: &dyn Fn(&Term) -> bool) -> Term {
    let mut cur = term.clone();
    'outer: loop {
        let mut candidates: Vec<&Term> = cur
            .proper_subterms()
            .into_iter()
            .map(|(_, t)| t)
            .filter(|t| t.is_closed())
            .collect();
        candidates.sort_by_key(|t| t.size());
        for c in candidates {
            if c.size() < cur.size() && still_fails(c) {
                cur = c.clone();
                continue 'outer;
            }
        }
        return cur;
    }
}

// ---------------------------------------------------------------------------
// Suites
// ---------------------------------------------------------------------------

/// Outcome of one suite run.
#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub name: String,
    pub total: usize,
    pub failures: usize,
    pub first_counterexample: Option<String>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    fn new(name: &str, total: usize) -> SuiteReport {
        SuiteReport { name: name.to_string(), total, failures: 0, first_counterexample: None }
    }

    fn fail(&mut self, detail: String) {
        self.failures += 1;
        if self.first_counterexample.is_none() {
            self.first_counterexample = Some(detail);
        }
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.passed() {
            write!(f, "suite {}: pass ({} cases)", self.name, self.total)
        } else {
            write!(
                f,
                "suite {}: FAIL ({}/{} cases failed){}",
                self.name,
                self.failures,
                self.total,
                match &self.first_counterexample {
                    Some(c) => format!("; first counterexample: {c}"),
                    None => String::new(),
                }
            )
        }
    }
}

pub const SUITES: &[&str] = &[
    "agreement",
    "weak-head-sim",
    "commutation",
    "affine-termination",
    "confluence",
    "diamond",
    "subject-reduction",
    "progress",
    "typed-termination",
    "measure-decrease",
    "inhabitation",
    "coverage",
];

/// Run a named suite over `n` cases.
pub fn run_suite(name: &str, n: usize, cfg: &GenConfig) -> Result<SuiteReport, String> {
    let cfg = cfg.validate();
    Ok(match name {
        "agreement" => suite_agreement(n, &cfg),
        "weak-head-sim" => suite_weak_head_sim(n, &cfg),
        "commutation" => suite_commutation(n, &cfg),
        "affine-termination" => suite_affine_termination(n, &cfg),
        "confluence" => suite_confluence(n, &cfg),
        "diamond" => suite_diamond(n, &cfg),
        "subject-reduction" => suite_subject_reduction(n, &cfg),
        "progress" => suite_progress(n, &cfg),
        "typed-termination" => suite_typed_termination(n, &cfg),
        "measure-decrease" => suite_measure_decrease(n, &cfg),
        "inhabitation" => suite_inhabitation(n, &cfg),
        "coverage" => suite_coverage(n, &cfg),
        other => return Err(format!("unknown suite `{other}` (known: {})", SUITES.join(", "))),
    })
}

pub fn suite_agreement(n: usize, cfg: &GenConfig) -> SuiteReport {
    let mut report = SuiteReport::new("agreement", n);
    let mut rng = rng_for(cfg);
    for _ in 0..n {
        let term = gen_term_with(&mut rng, cfg);
        let init = if cfg.typed {
            let ty = synthesize(&Context::empty(), &term).expect("typed generation");
            types::zero_memory(&ty.input)
        } else {
            Memory::empty()
        };
        if let Err(e) = machine_eval_agree(&term, &init, 10_000) {
            let pred = |t: &Term| machine_eval_agree(t, &Memory::empty(), 10_000).is_err();
            let small = shrink(&term, &pred);
            report.fail(format!("{e}; shrunk: `{small}`"));
        }
    }
    report
}

pub fn suite_weak_head_sim(n: usize, cfg: &GenConfig) -> SuiteReport {
    let mut report = SuiteReport::new("weak-head-sim", n);
    let mut rng = rng_for(cfg);
    for _ in 0..n {
        let term = gen_term_with(&mut rng, cfg);
        if let Err(e) = check_weak_head_simulation(&term, 80) {
            report.fail(e);
        }
    }
    report
}

pub fn suite_commutation(n: usize, cfg: &GenConfig) -> SuiteReport {
    let mut report = SuiteReport::new("commutation", n);
    let mut rng = rng_for(cfg);
    let mut collected = 0;
    let mut attempts = 0;
    while collected < n && attempts < 40 * n {
        attempts += 1;
        let (term, ty) = gen_typed_term_with(&mut rng, cfg);
        let init = types::zero_memory(&ty.input);
        let before = match eval_big(&term, init.clone(), 10_000) {
            EvalResult::Value(mem, choice) => (mem, choice),
            _ => continue,
        };
        collected += 1;
        // up to ten random steps, at most two unrolls
        let mut reduct = term.clone();
        let mut unrolls = 0;
        for _ in 0..10 {
            let rxs: Vec<(Vec<usize>, Rule)> = redexes(&reduct, unrolls < 2)
                .into_iter()
                .filter(|(_, r)| *r != Rule::Unroll || unrolls < 2)
                .collect();
            if rxs.is_empty() {
                break;
            }
            let (path, rule) = rxs[rng.gen_range(0..rxs.len())].clone();
            if rule == Rule::Unroll {
                unrolls += 1;
            }
            reduct = apply(&reduct, &path, rule).expect("redex applies");
        }
        match eval_big(&reduct, init, 1_000_000) {
            EvalResult::Value(mem, choice) => {
                if choice != before.1 {
                    report.fail(format!(
                        "`{term}` evaluates to {} but its reduct `{reduct}` to {choice}",
                        before.1
                    ));
                } else if !memory_reduces_to(&before.0, &mem, 14, 60_000) {
                    report.fail(format!(
                        "memories of `{term}` and reduct `{reduct}` are not related: {} vs {mem}",
                        before.0
                    ));
                }
            }
            other => {
                report.fail(format!("reduct `{reduct}` of `{term}` does not evaluate: {other:?}"));
            }
        }
    }
    report.total = collected;
    report
}

pub fn suite_affine_termination(n: usize, cfg: &GenConfig) -> SuiteReport {
    let mut report = SuiteReport::new("affine-termination", n);
    let mut rng = rng_for(cfg);
    let step_cap = 100_000;
    for _ in 0..n {
        let term = gen_term_with(&mut rng, cfg);
        let mut cur = term.clone();
        let mut prev = affine_measure(&cur);
        let mut steps = 0;
        loop {
            let redex = redexes(&cur, false).into_iter().find(|(_, r)| r.is_affine());
            let Some((path, rule)) = redex else { break };
            cur = apply(&cur, &path, rule).expect("redex applies");
            let next = affine_measure(&cur);
            if next >= prev {
                let pred = |t: &Term| {
                    let mut c = t.clone();
                    let mut p = affine_measure(&c);
                    for _ in 0..step_cap {
                        let Some((path, rule)) =
                            redexes(&c, false).into_iter().find(|(_, r)| r.is_affine())
                        else {
                            return false;
                        };
                        c = apply(&c, &path, rule).unwrap();
                        let q = affine_measure(&c);
                        if q >= p {
                            return true;
                        }
                        p = q;
                    }
                    true
                };
                let small = shrink(&term, &pred);
                report.fail(format!(
                    "measure did not decrease on `{term}` ({prev:?} -> {next:?}); shrunk: `{small}`"
                ));
                break;
            }
            prev = next;
            steps += 1;
            if steps > step_cap {
                report.fail(format!("affine normalization of `{term}` exceeded {step_cap} steps"));
                break;
            }
        }
    }
    report
}

fn random_normal_form(t: &Term, rng: &mut StdRng, cap: usize) -> Option<Term> {
    let mut cur = t.clone();
    for _ in 0..cap {
        let rxs = redexes(&cur, true);
        if rxs.is_empty() {
            return Some(cur);
        }
        let (path, rule) = rxs[rng.gen_range(0..rxs.len())].clone();
        cur = apply(&cur, &path, rule).expect("redex applies");
    }
    None
}

pub fn suite_confluence(n: usize, cfg: &GenConfig) -> SuiteReport {
    let mut report = SuiteReport::new("confluence", n);
    let mut cfg = cfg.clone();
    cfg.typed = true;
    cfg.loop_prob = 0.0;
    let mut rng = rng_for(&cfg);
    for _ in 0..n {
        let (term, _) = gen_typed_term_with(&mut rng, &cfg);
        let a = random_normal_form(&term, &mut rng, 100_000);
        let b = random_normal_form(&term, &mut rng, 100_000);
        match (a, b) {
            (Some(a), Some(b)) => {
                if !a.alpha_eq(&b) {
                    report.fail(format!("normal forms of `{term}` differ: `{a}` vs `{b}`"));
                }
            }
            _ => report.fail(format!("normalization of typed loop-free `{term}` did not stop")),
        }
    }
    report
}

pub fn suite_diamond(n: usize, cfg: &GenConfig) -> SuiteReport {
    let mut report = SuiteReport::new("diamond", n);
    let mut cfg = cfg.clone();
    cfg.typed = true;
    cfg.loop_prob = 0.0;
    let mut rng = rng_for(&cfg);
    for _ in 0..n {
        let (term, _) = gen_typed_term_with(&mut rng, &cfg);
        // a peak of two random parallel duplicating steps, each followed
        // by affine normalization
        let mut legs = Vec::new();
        for _ in 0..2 {
            let marked = mark_with(&term, &mut || rng.gen_bool(0.5));
            legs.push(crate::rewrite::affine_normalize(&marked_reduct(&marked)));
        }
        // complete reduction closes the peak: iterate to the common fixpoint
        let close = |mut t: Term| -> Option<Term> {
            for _ in 0..1_000 {
                let next = complete_step(&t);
                if next.alpha_eq(&t) {
                    return Some(t);
                }
                t = next;
            }
            None
        };
        match (close(legs[0].clone()), close(legs[1].clone())) {
            (Some(a), Some(b)) => {
                if !a.alpha_eq(&b) {
                    report.fail(format!("peak of `{term}` does not close: `{a}` vs `{b}`"));
                }
            }
            _ => report.fail(format!("complete reduction from `{term}` did not stabilize")),
        }
    }
    report
}

pub fn suite_subject_reduction(n: usize, cfg: &GenConfig) -> SuiteReport {
    let mut report = SuiteReport::new("subject-reduction", n);
    let mut cfg = cfg.clone();
    cfg.typed = true;
    let mut rng = rng_for(&cfg);
    for _ in 0..n {
        let (term, ty) = gen_typed_term_with(&mut rng, &cfg);
        for (path, rule) in redexes(&term, true) {
            let reduct = apply(&term, &path, rule).expect("redex applies");
            if let Err(e) = check(&Context::empty(), &reduct, &ty) {
                report.fail(format!(
                    "{rule} reduct `{reduct}` of `{term}` no longer checks at {ty}: {e}"
                ));
            }
        }
    }
    report
}

pub fn suite_progress(n: usize, cfg: &GenConfig) -> SuiteReport {
    let mut report = SuiteReport::new("progress", n);
    let mut cfg = cfg.clone();
    cfg.typed = true;
    let mut rng = rng_for(&cfg);
    for _ in 0..n {
        let (term, ty) = gen_typed_term_with(&mut rng, &cfg);
        let init = types::zero_memory(&ty.input);
        if let RunResult::Stuck { state, reason } = run(term.clone(), init.clone(), 10_000) {
            report.fail(format!("typed `{term}` got stuck ({reason}) at {state}"));
            continue;
        }
        // a state accepted by the state typing is never a failure state
        for state in run_states(term.clone(), init, 60) {
            if types::type_state(&state, None).is_ok() {
                if let Classification::Failure(reason) = classify(&state) {
                    report.fail(format!("state {state} is accepted but stuck: {reason}"));
                    break;
                }
            }
        }
    }
    report
}

pub fn suite_typed_termination(n: usize, cfg: &GenConfig) -> SuiteReport {
    let mut report = SuiteReport::new("typed-termination", n);
    let mut cfg = cfg.clone();
    cfg.typed = true;
    cfg.loop_prob = 0.0;
    let mut rng = rng_for(&cfg);
    for _ in 0..n {
        let (term, ty) = gen_typed_term_with(&mut rng, &cfg);
        let init = types::zero_memory(&ty.input);
        match run(term.clone(), init, 100_000) {
            RunResult::Final { .. } => {}
            other => report.fail(format!("typed loop-free `{term}` did not finish: {other:?}")),
        }
    }
    report
}

pub fn suite_measure_decrease(n: usize, cfg: &GenConfig) -> SuiteReport {
    let mut report = SuiteReport::new("measure-decrease", n);
    let mut cfg = cfg.clone();
    cfg.typed = true;
    cfg.loop_prob = 0.0;
    let mut rng = rng_for(&cfg);
    for _ in 0..n {
        let (term, ty) = gen_typed_term_with(&mut rng, &cfg);
        let init = types::zero_memory(&ty.input);
        let base = match eval_measured(&term, init.clone(), 1_000_000) {
            Ok(r) => r.pops,
            Err(e) => {
                report.fail(format!("measured evaluation failed on `{term}`: {e}"));
                continue;
            }
        };
        for (path, rule) in redexes(&term, true) {
            let reduct = apply(&term, &path, rule).expect("redex applies");
            match eval_measured(&reduct, init.clone(), 1_000_000) {
                Ok(r) => {
                    let ok = if rule == Rule::Beta { r.pops < base } else { r.pops <= base };
                    if !ok {
                        report.fail(format!(
                            "{rule} on `{term}` took the measure from {base} to {} (reduct `{reduct}`)",
                            r.pops
                        ));
                    }
                }
                Err(e) => {
                    report.fail(format!("measured evaluation failed on reduct `{reduct}`: {e}"))
                }
            }
        }
    }
    report
}

pub fn suite_inhabitation(n: usize, cfg: &GenConfig) -> SuiteReport {
    let mut report = SuiteReport::new("inhabitation", n);
    let mut rng = rng_for(cfg);
    for _ in 0..n {
        let ty = gen_type_with(&mut rng, cfg, 2, true);
        let zero = types::inhabit(&ty);
        if let Err(e) = check(&Context::empty(), &zero, &ty) {
            report.fail(format!("inhabitant `{zero}` does not check at {ty}: {e}"));
            continue;
        }
        if !ty.output.is_empty() {
            let init = types::zero_memory(&ty.input);
            match run(zero.clone(), init, 100_000) {
                RunResult::Final { .. } => {}
                other => {
                    report.fail(format!("zero term `{zero}` of {ty} did not finish: {other:?}"))
                }
            }
        }
    }
    report
}

pub fn suite_coverage(n: usize, cfg: &GenConfig) -> SuiteReport {
    let mut report = SuiteReport::new("coverage", n);
    let mut cfg = cfg.clone();
    if cfg.loop_prob == 0.0 {
        cfg.loop_prob = 0.2;
    }
    let mut rng = rng_for(&cfg);
    let mut ctors: BTreeSet<&'static str> = BTreeSet::new();
    let mut rules: BTreeSet<Rule> = BTreeSet::new();
    for _ in 0..n {
        let term = gen_term_with(&mut rng, &cfg);
        collect_ctors(&term, &mut ctors);
        for (_, r) in redexes(&term, true) {
            rules.insert(r);
        }
    }
    for expected in ["var", "push", "pop", "choice", "case", "loop"] {
        if !ctors.contains(expected) {
            report.fail(format!("constructor {expected} never generated"));
        }
    }
    for rule in Rule::ALL {
        if !rules.contains(&rule) {
            report.fail(format!("rule {rule} never enumerated"));
        }
    }
    report
}

fn collect_ctors(t: &Term, acc: &mut BTreeSet<&'static str>) {
    match t {
        Term::Var(_) => {
            acc.insert("var");
        }
        Term::Choice(_) => {
            acc.insert("choice");
        }
        Term::Push(a, _, m) => {
            acc.insert("push");
            collect_ctors(a, acc);
            collect_ctors(m, acc);
        }
        Term::Pop(_, _, _, m) => {
            acc.insert("pop");
            collect_ctors(m, acc);
        }
        Term::Case(a, _, b) => {
            acc.insert("case");
            collect_ctors(a, acc);
            collect_ctors(b, acc);
        }
        Term::Loop(a, _) => {
            acc.insert("loop");
            collect_ctors(a, acc);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_reproducible() {
        let cfg = GenConfig { seed: 42, ..GenConfig::default() };
        let a = gen_term(&cfg);
        let b = gen_term(&cfg);
        assert!(a.alpha_eq(&b));
        let cfg = GenConfig { typed: true, ..cfg };
        let (a, ta) = gen_typed_term(&cfg);
        let (b, tb) = gen_typed_term(&cfg);
        assert!(a.alpha_eq(&b));
        assert_eq!(ta, tb);
    }

    #[test]
    fn generated_terms_are_closed() {
        let mut cfg = GenConfig { seed: 7, max_size: 24, loop_prob: 0.2, ..GenConfig::default() };
        let mut rng = rng_for(&cfg);
        for _ in 0..200 {
            assert!(gen_term_with(&mut rng, &cfg).is_closed());
        }
        cfg.typed = true;
        cfg.loop_prob = 0.0;
        let mut rng = rng_for(&cfg);
        for _ in 0..100 {
            let (t, _) = gen_typed_term_with(&mut rng, &cfg);
            assert!(t.is_closed());
        }
    }

    #[test]
    fn size_one_terms_are_leaves() {
        let cfg = GenConfig { seed: 3, max_size: 1, ..GenConfig::default() };
        let mut rng = rng_for(&cfg);
        for _ in 0..50 {
            let t = gen_term_with(&mut rng, &cfg);
            assert!(matches!(t, Term::Choice(_)), "{t}");
        }
    }

    #[test]
    fn typed_generation_synthesizes_its_goal() {
        let cfg = GenConfig { seed: 11, typed: true, max_size: 18, ..GenConfig::default() };
        let mut rng = rng_for(&cfg);
        for _ in 0..100 {
            let (term, goal) = gen_typed_term_with(&mut rng, &cfg);
            let syn = synthesize(&Context::empty(), &term)
                .unwrap_or_else(|e| panic!("`{term}` does not synthesize: {e}"));
            assert_eq!(syn, goal, "term `{term}`");
        }
        // with loops enabled as well
        let cfg = GenConfig { seed: 12, typed: true, loop_prob: 0.2, ..cfg };
        let mut rng = rng_for(&cfg);
        for _ in 0..100 {
            let (term, goal) = gen_typed_term_with(&mut rng, &cfg);
            assert_eq!(synthesize(&Context::empty(), &term).unwrap(), goal, "term `{term}`");
        }
    }

    #[test]
    fn type_generation_is_reproducible_and_inhabitable() {
        let cfg = GenConfig { seed: 5, ..GenConfig::default() };
        assert_eq!(gen_type(&cfg), gen_type(&cfg));
        let mut rng = rng_for(&cfg);
        for _ in 0..100 {
            let ty = gen_type_with(&mut rng, &cfg, 2, true);
            let z = types::inhabit(&ty);
            check(&Context::empty(), &z, &ty)
                .unwrap_or_else(|e| panic!("inhabit({ty}) = {z}: {e}"));
        }
    }

    #[test]
    fn readback_recognizer_accepts_interleavings() {
        let mut mem = Memory::empty();
        mem.push(&Location::Default, Term::var("p"));
        mem.push(&Location::named("a"), Term::var("q"));
        let mut cont = crate::machine::ContStack::empty();
        cont.push(ChoiceLabel::named("i"), Term::var("h"));
        let state = State { memory: mem, term: Term::star(), cont };
        for src in [
            "[p].[q]a.(*;'i->h)",
            "[q]a.[p].(*;'i->h)",
            "[p].([q]a.*;'i->h)",
            "([p].[q]a.*);'i->h",
        ] {
            let t = crate::syntax::parse(src).unwrap();
            assert!(is_readback_of(&t, &state), "{src}");
        }
        for src in ["[q]a.[p].*", "[p].[q]a.(*;'j->h)", "[p].[q]a.((*;'i->h);'i->h)"] {
            let t = crate::syntax::parse(src).unwrap();
            assert!(!is_readback_of(&t, &state), "{src}");
        }
    }

    #[test]
    fn simulation_holds_on_tricky_shapes() {
        for src in [
            "[*]a.[*].*",
            "[*].[*]a.*",
            "(['i].<x>.x);'j->q;'k->w",
            "((m^'i);'j->q)",
            "[p]b.(a<x>.'i;'i->*)",
            "['i].<y>.(y;'i->['k].<z>.z)",
        ] {
            let t = crate::syntax::parse(src).unwrap();
            check_weak_head_simulation(&t, 60).unwrap_or_else(|e| panic!("{src}: {e}"));
        }
    }

    #[test]
    fn shrinker_preserves_failure() {
        // synthetic property: "fails" when the term contains a loop
        let pred = |t: &Term| t.contains_loop();
        let t = crate::syntax::parse("[<x>.x].([q].(('i)^'i);'j->w)").unwrap();
        let small = shrink(&t, &pred);
        assert!(pred(&small));
        assert_eq!(small, crate::syntax::parse("('i)^'i").unwrap());
    }

    #[test]
    fn quick_suites_pass() {
        let base = GenConfig { seed: 2024, max_size: 14, ..GenConfig::default() };
        let untyped = GenConfig { loop_prob: 0.2, ..base.clone() };
        assert!(run_suite("agreement", 60, &untyped).unwrap().passed());
        assert!(run_suite("weak-head-sim", 40, &untyped).unwrap().passed());
        assert!(run_suite("affine-termination", 60, &untyped).unwrap().passed());
        let typed = GenConfig { typed: true, ..base.clone() };
        assert!(run_suite("agreement", 40, &typed).unwrap().passed());
        assert!(run_suite("subject-reduction", 30, &typed).unwrap().passed());
        assert!(run_suite("progress", 30, &typed).unwrap().passed());
        assert!(run_suite("typed-termination", 30, &typed).unwrap().passed());
        assert!(run_suite("confluence", 30, &typed).unwrap().passed());
        assert!(run_suite("diamond", 30, &typed).unwrap().passed());
        assert!(run_suite("measure-decrease", 20, &typed).unwrap().passed());
        assert!(run_suite("inhabitation", 60, &base).unwrap().passed());
        let looped = GenConfig { typed: true, loop_prob: 0.15, ..base.clone() };
        assert!(run_suite("commutation", 20, &looped).unwrap().passed());
        assert!(run_suite("coverage", 1500, &untyped).unwrap().passed());
        assert!(run_suite("nonsense", 1, &base).is_err());
    }

    #[test]
    fn vacuous_suites_pass() {
        let cfg = GenConfig::default();
        let r = run_suite("agreement", 0, &cfg).unwrap();
        assert!(r.passed());
        assert_eq!(r.total, 0);
    }
}
