//! Big-step evaluation and measured evaluation.
//!
//! Big-step evaluation is the machine's behaviour on complete runs,
//! defined inductively on terms: a choice returns the memory and itself;
//! a push extends the memory; a pop substitutes; a case continues into
//! the handler only on the matching choice; a loop re-enters its body on
//! the matching choice. It is a deterministic partial function, made
//! total here with fuel.
//!
//! Measured evaluation additionally counts pop rule uses, including in
//! subterms that ordinary evaluation discards: a pushed argument is also
//! evaluated on its own input, and a skipped case handler likewise. Those
//! side evaluations need input memories, which are instantiated with zero
//! memories built from synthesized types; measured evaluation therefore
//! requires typeable, loop-free terms.

use crate::machine::{Memory, StuckReason};
use crate::syntax::{ChoiceLabel, Term};
use crate::types::{self, Context, TypeError};

/// Outcome of big-step evaluation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalResult {
    Value(Memory, ChoiceLabel),
    Diverged,
    Failed(StuckReason),
}

impl EvalResult {
    pub fn is_value(&self) -> bool {
        matches!(self, EvalResult::Value(_, _))
    }
}

/// Evaluate `term` on `init`, spending one unit of fuel per rule
/// application.
pub fn eval_big(term: &Term, init: Memory, fuel: u64) -> EvalResult {
    let mut fuel = fuel;
    match go(term, init, &mut fuel) {
        Ok((mem, choice)) => EvalResult::Value(mem, choice),
        Err(stop) => stop,
    }
}

fn go(term: &Term, mut mem: Memory, fuel: &mut u64) -> Result<(Memory, ChoiceLabel), EvalResult> {
    if *fuel == 0 {
        return Err(EvalResult::Diverged);
    }
    *fuel -= 1;
    match term {
        Term::Choice(i) => Ok((mem, i.clone())),
        Term::Var(x) => Err(EvalResult::Failed(StuckReason::FreeVariable(x.clone()))),
        Term::Push(arg, loc, m) => {
            mem.push(loc, (**arg).clone());
            go(m, mem, fuel)
        }
        Term::Pop(loc, x, _, m) => match mem.pop(loc) {
            Some(n) => go(&m.substitute(x, &n), mem, fuel),
            None => Err(EvalResult::Failed(StuckReason::EmptyPop(loc.clone()))),
        },
        Term::Case(m, i, n) => {
            let (s, j) = go(m, mem, fuel)?;
            if &j == i {
                go(n, s, fuel)
            } else {
                Ok((s, j))
            }
        }
        Term::Loop(m, i) => {
            let mut cur = mem;
            loop {
                let (s, j) = go(m, cur, fuel)?;
                if &j != i {
                    return Ok((s, j));
                }
                cur = s;
                if *fuel == 0 {
                    return Err(EvalResult::Diverged);
                }
                *fuel -= 1;
            }
        }
    }
}

/// Result of measured evaluation: the value together with the number of
/// pop rule uses, including those in discarded subterms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeasuredResult {
    pub memory: Memory,
    pub choice: ChoiceLabel,
    pub pops: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MeasuredError {
    #[error("measured evaluation needs typed subterms: {0}")]
    Type(#[from] TypeError),
    #[error("measured evaluation ran out of fuel")]
    Diverged,
    #[error("measured evaluation got stuck: {0}")]
    Failed(StuckReason),
    #[error("measured evaluation is defined on loop-free terms only")]
    LoopNotSupported,
}

/// Measured evaluation on a loop-free, typeable term. Pushed arguments
/// and skipped handlers are evaluated on zero memories of their
/// synthesized input types, and their pop counts contribute to the total.
pub fn eval_measured(term: &Term, init: Memory, fuel: u64) -> Result<MeasuredResult, MeasuredError> {
    // Refuse unannotated terms up front instead of guessing inputs for
    // the discarded subterms discovered during evaluation; the subterms
    // that actually appear in discard position are synthesized on demand.
    if let Some(binder) = first_unannotated(term) {
        return Err(MeasuredError::Type(TypeError::UnannotatedBinder {
            binder,
            path: crate::types::TermPath::default(),
        }));
    }
    let mut fuel = fuel;
    let (memory, choice, pops) = go_measured(term, init, &mut fuel)?;
    Ok(MeasuredResult { memory, choice, pops })
}

fn first_unannotated(term: &Term) -> Option<crate::syntax::Ident> {
    match term {
        Term::Var(_) | Term::Choice(_) => None,
        Term::Push(a, _, m) => first_unannotated(a).or_else(|| first_unannotated(m)),
        Term::Pop(_, x, ann, m) => {
            if ann.is_none() {
                Some(x.clone())
            } else {
                first_unannotated(m)
            }
        }
        Term::Case(a, _, b) => first_unannotated(a).or_else(|| first_unannotated(b)),
        Term::Loop(a, _) => first_unannotated(a),
    }
}

fn go_measured(
    term: &Term,
    mut mem: Memory,
    fuel: &mut u64,
) -> Result<(Memory, ChoiceLabel, u64), MeasuredError> {
    if *fuel == 0 {
        return Err(MeasuredError::Diverged);
    }
    *fuel -= 1;
    match term {
        Term::Choice(i) => Ok((mem, i.clone(), 0)),
        Term::Var(x) => Err(MeasuredError::Failed(StuckReason::FreeVariable(x.clone()))),
        Term::Loop(_, _) => Err(MeasuredError::LoopNotSupported),
        Term::Push(arg, loc, m) => {
            let arg_ty = types::synthesize(&Context::empty(), arg)?;
            let (_, _, side) = go_measured(arg, types::zero_memory(&arg_ty.input), fuel)?;
            mem.push(loc, (**arg).clone());
            let (out, choice, main) = go_measured(m, mem, fuel)?;
            Ok((out, choice, side + main))
        }
        Term::Pop(loc, x, _, m) => match mem.pop(loc) {
            Some(n) => {
                let (out, choice, below) = go_measured(&m.substitute(x, &n), mem, fuel)?;
                Ok((out, choice, below + 1))
            }
            None => Err(MeasuredError::Failed(StuckReason::EmptyPop(loc.clone()))),
        },
        Term::Case(m, i, n) => {
            let (s, j, taken) = go_measured(m, mem, fuel)?;
            if &j == i {
                let (out, choice, rest) = go_measured(n, s, fuel)?;
                Ok((out, choice, taken + rest))
            } else {
                let handler_ty = types::synthesize(&Context::empty(), n)?;
                let (_, _, side) = go_measured(n, types::zero_memory(&handler_ty.input), fuel)?;
                Ok((s, j, taken + side))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::{run, RunResult};
    use crate::syntax::parse;

    fn p(src: &str) -> Term {
        parse(src).unwrap()
    }

    #[test]
    fn choice_axiom() {
        let mut mem = Memory::empty();
        mem.push(&crate::syntax::Location::named("a"), p("*"));
        match eval_big(&p("'i"), mem.clone(), 100) {
            EvalResult::Value(out, choice) => {
                assert_eq!(out, mem);
                assert_eq!(choice, ChoiceLabel::named("i"));
            }
            other => panic!("expected value, got {other:?}"),
        }
    }

    #[test]
    fn push_pop_round() {
        match eval_big(&p("[*].<y>.y"), Memory::empty(), 100) {
            EvalResult::Value(out, choice) => {
                assert!(out.is_empty());
                assert_eq!(choice, ChoiceLabel::Star);
            }
            other => panic!("expected value, got {other:?}"),
        }
    }

    #[test]
    fn skipped_case_keeps_choice() {
        match eval_big(&p("'j;'i->m"), Memory::empty(), 100) {
            EvalResult::Value(out, choice) => {
                assert!(out.is_empty());
                assert_eq!(choice, ChoiceLabel::named("j"));
            }
            other => panic!("expected value, got {other:?}"),
        }
    }

    #[test]
    fn failures_and_divergence() {
        assert!(matches!(
            eval_big(&p("x"), Memory::empty(), 100),
            EvalResult::Failed(StuckReason::FreeVariable(_))
        ));
        assert!(matches!(
            eval_big(&p("<x>.x"), Memory::empty(), 100),
            EvalResult::Failed(StuckReason::EmptyPop(_))
        ));
        assert_eq!(eval_big(&p("('i)^'i"), Memory::empty(), 1000), EvalResult::Diverged);
    }

    #[test]
    fn agrees_with_the_machine_on_examples() {
        for src in [
            "[*].<y>.y",
            "'j;'i->*",
            "['i].<x>.(x;'i->'k)",
            "([m].*);*->n;'q->*",
            "(['b].*;<x>.x)^'b",
        ] {
            let t = p(src);
            let machine = run(t.clone(), Memory::empty(), 10000);
            let big = eval_big(&t, Memory::empty(), 10000);
            match (machine, big) {
                (RunResult::Final { memory, choice, .. }, EvalResult::Value(mem2, c2)) => {
                    assert!(memory.alpha_eq(&mem2), "{src}");
                    assert_eq!(choice, c2, "{src}");
                }
                (RunResult::Stuck { reason, .. }, EvalResult::Failed(r2)) => {
                    assert_eq!(reason, r2, "{src}")
                }
                (RunResult::FuelExhausted { .. }, EvalResult::Diverged) => {}
                (m, b) => panic!("{src}: machine {m:?} vs big-step {b:?}"),
            }
        }
    }

    #[test]
    fn measured_basics() {
        let r = eval_measured(&p("'i"), Memory::empty(), 1000).unwrap();
        assert_eq!(r.pops, 0);
        let r = eval_measured(&p("[*].<y: e => e.*>.y"), Memory::empty(), 1000).unwrap();
        assert_eq!(r.pops, 1);
        assert_eq!(r.choice, ChoiceLabel::Star);
        assert!(r.memory.is_empty());
    }

    #[test]
    fn measured_counts_discarded_arguments() {
        // The pushed identity is discarded by the main run but still
        // contributes its own pop on a zero memory.
        let t = p("[<z: e => e.'i>.z].<y: (e => e.'i) => e.'i>.'i");
        let r = eval_measured(&t, Memory::empty(), 1000).unwrap();
        assert_eq!(r.pops, 2);
        assert_eq!(r.choice, ChoiceLabel::named("i"));
    }

    #[test]
    fn measured_counts_skipped_handlers() {
        // 'j;'i->(<x>.x applied): handler is skipped but evaluated aside.
        let t = p("'j;'i-><x: e => e.'k>.x");
        let r = eval_measured(&t, Memory::empty(), 1000).unwrap();
        assert_eq!(r.choice, ChoiceLabel::named("j"));
        assert_eq!(r.pops, 1);
    }

    #[test]
    fn measured_agrees_with_big_step() {
        for src in ["'i", "[*].<y: e => e.*>.y", "['k].<x: e => e.'k>.(x;'k->*)"] {
            let t = p(src);
            let m = eval_measured(&t, Memory::empty(), 1000).unwrap();
            match eval_big(&t, Memory::empty(), 1000) {
                EvalResult::Value(mem, choice) => {
                    assert!(m.memory.alpha_eq(&mem), "{src}");
                    assert_eq!(m.choice, choice, "{src}");
                }
                other => panic!("{src}: {other:?}"),
            }
        }
    }

    #[test]
    fn measured_refuses_untyped_and_loops() {
        assert!(matches!(
            eval_measured(&p("['i].<x>.x"), Memory::empty(), 100),
            Err(MeasuredError::Type(_))
        ));
        assert!(matches!(
            eval_measured(&p("('i)^'i"), Memory::empty(), 100),
            Err(MeasuredError::LoopNotSupported)
        ));
    }

    #[test]
    fn weak_head_steps_preserve_evaluation() {
        let t = p("(['i].*);*-><x>.x");
        let mut cur = t.clone();
        let expected = eval_big(&t, Memory::empty(), 1000);
        while let Some((next, _)) = crate::rewrite::weak_head_step(&cur) {
            assert_eq!(eval_big(&next, Memory::empty(), 1000), expected);
            cur = next;
        }
        assert_eq!(cur, p("'i"));
    }
}
