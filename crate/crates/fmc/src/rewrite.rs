//! The reduction relation and its strategies.
//!
//! Eight rules, closed under any context (side conditions in parens):
//!
//! ```text
//! beta       [N]a.a<x>.M   -> {N/x}M
//! passage    [N]b.a<x>.M   -> a<x>.[N]b.M      (a /= b, x not free in N)
//! select     'i;'i->M      -> M
//! reject     'i;'j->M      -> 'i               (i /= j)
//! prefix pop (a<x>.N);'i->M -> a<x>.(N;'i->M)  (x not free in M)
//! prefix push ([P]a.N);'i->M -> [P]a.(N;'i->M)
//! associate  (P;'i->N);'i->M -> P;'i->(N;'i->M)
//! unroll     M^'i          -> M;'i->M^'i
//! ```
//!
//! Beta and unroll duplicate subterms; the other six rules are affine and
//! terminate under the lexicographic measure of [`affine_measure`]. Weak
//! head reduction contracts along the machine's focus spine: at the root,
//! under pushes, and in the left branch of cases. Marked terms, complete
//! development, and complete reduction implement the parallel-reduction
//! device used to test confluence.

use crate::syntax::{ChoiceLabel, Ident, Location, Term};
use crate::types::ValueType;

/// Path of child indices from the root to a redex.
pub type RedexPath = Vec<usize>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rule {
    Beta,
    Passage,
    Select,
    Reject,
    PrefixPop,
    PrefixPush,
    Associate,
    Unroll,
}

impl Rule {
    pub fn is_duplicating(self) -> bool {
        matches!(self, Rule::Beta | Rule::Unroll)
    }

    pub fn is_affine(self) -> bool {
        !self.is_duplicating()
    }

    pub fn name(self) -> &'static str {
        match self {
            Rule::Beta => "beta",
            Rule::Passage => "passage",
            Rule::Select => "select",
            Rule::Reject => "reject",
            Rule::PrefixPop => "prefix-pop",
            Rule::PrefixPush => "prefix-push",
            Rule::Associate => "associate",
            Rule::Unroll => "unroll",
        }
    }

    pub const ALL: [Rule; 8] = [
        Rule::Beta,
        Rule::Passage,
        Rule::Select,
        Rule::Reject,
        Rule::PrefixPop,
        Rule::PrefixPush,
        Rule::Associate,
        Rule::Unroll,
    ];
}

impl std::fmt::Display for Rule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RewriteError {
    #[error("no subterm at path {path:?}")]
    InvalidPath { path: RedexPath },
    #[error("rule {rule} does not match the subterm at path {path:?}")]
    RuleMismatch { rule: Rule, path: RedexPath },
}

/// The rule matching at the root of `t`, if any. Side conditions are
/// checked literally; no renaming is performed to enable passage or
/// prefix-pop. At most one rule matches any given node.
pub fn rule_at(t: &Term, include_unroll: bool) -> Option<Rule> {
    match t {
        Term::Push(arg, a, cont) => match &**cont {
            Term::Pop(b, _, _, _) if a == b => Some(Rule::Beta),
            Term::Pop(b, x, _, _) if a != b && !arg.free_vars().contains(x) => {
                Some(Rule::Passage)
            }
            _ => None,
        },
        Term::Case(left, i, right) => match &**left {
            Term::Choice(j) => Some(if j == i { Rule::Select } else { Rule::Reject }),
            Term::Pop(_, x, _, _) if !right.free_vars().contains(x) => Some(Rule::PrefixPop),
            Term::Push(_, _, _) => Some(Rule::PrefixPush),
            Term::Case(_, j, _) if j == i => Some(Rule::Associate),
            _ => None,
        },
        Term::Loop(_, _) if include_unroll => Some(Rule::Unroll),
        _ => None,
    }
}

fn contract_root(t: &Term, rule: Rule) -> Option<Term> {
    match (t, rule) {
        (Term::Push(arg, a, cont), Rule::Beta) => match &**cont {
            Term::Pop(b, x, _, m) if a == b => Some(m.substitute(x, arg)),
            _ => None,
        },
        (Term::Push(arg, a, cont), Rule::Passage) => match &**cont {
            Term::Pop(b, x, ann, m) if a != b && !arg.free_vars().contains(x) => {
                Some(Term::Pop(
                    b.clone(),
                    x.clone(),
                    ann.clone(),
                    Box::new(Term::push((**arg).clone(), a.clone(), (**m).clone())),
                ))
            }
            _ => None,
        },
        (Term::Case(left, i, right), Rule::Select) => match &**left {
            Term::Choice(j) if j == i => Some((**right).clone()),
            _ => None,
        },
        (Term::Case(left, i, _), Rule::Reject) => match &**left {
            Term::Choice(j) if j != i => Some((**left).clone()),
            _ => None,
        },
        (Term::Case(left, i, right), Rule::PrefixPop) => match &**left {
            Term::Pop(l, x, ann, m) if !right.free_vars().contains(x) => Some(Term::Pop(
                l.clone(),
                x.clone(),
                ann.clone(),
                Box::new(Term::case((**m).clone(), i.clone(), (**right).clone())),
            )),
            _ => None,
        },
        (Term::Case(left, i, right), Rule::PrefixPush) => match &**left {
            Term::Push(p, a, n) => Some(Term::push(
                (**p).clone(),
                a.clone(),
                Term::case((**n).clone(), i.clone(), (**right).clone()),
            )),
            _ => None,
        },
        (Term::Case(left, i, right), Rule::Associate) => match &**left {
            Term::Case(p, j, n) if j == i => Some(Term::case(
                (**p).clone(),
                i.clone(),
                Term::case((**n).clone(), i.clone(), (**right).clone()),
            )),
            _ => None,
        },
        (Term::Loop(m, i), Rule::Unroll) => Some(Term::case(
            (**m).clone(),
            i.clone(),
            Term::looped((**m).clone(), i.clone()),
        )),
        _ => None,
    }
}

/// Complete, duplicate-free enumeration of redexes in leftmost-outermost
/// (preorder) order.
pub fn redexes(t: &Term, include_unroll: bool) -> Vec<(RedexPath, Rule)> {
    fn go(t: &Term, include_unroll: bool, path: &mut Vec<usize>, acc: &mut Vec<(RedexPath, Rule)>) {
        if let Some(r) = rule_at(t, include_unroll) {
            acc.push((path.clone(), r));
        }
        for (i, c) in t.children().into_iter().enumerate() {
            path.push(i);
            go(c, include_unroll, path, acc);
            path.pop();
        }
    }
    let mut acc = Vec::new();
    go(t, include_unroll, &mut Vec::new(), &mut acc);
    acc
}

/// Contract the redex at `path` with `rule`.
pub fn apply(t: &Term, path: &[usize], rule: Rule) -> Result<Term, RewriteError> {
    let sub = t
        .subterm_at(path)
        .ok_or_else(|| RewriteError::InvalidPath { path: path.to_vec() })?;
    let contracted = contract_root(sub, rule)
        .ok_or_else(|| RewriteError::RuleMismatch { rule, path: path.to_vec() })?;
    t.replace_at(path, contracted)
        .ok_or_else(|| RewriteError::InvalidPath { path: path.to_vec() })
}

// ---------------------------------------------------------------------------
// Weak head reduction
// ---------------------------------------------------------------------------

/// Contract the outermost redex on the focus spine (root, push
/// continuations, case left branches), or report a weak head normal form.
pub fn weak_head_step(t: &Term) -> Option<(Term, Rule)> {
    if let Some(r) = rule_at(t, true) {
        return Some((contract_root(t, r).expect("rule matched"), r));
    }
    match t {
        Term::Push(arg, l, m) => weak_head_step(m)
            .map(|(m2, r)| (Term::push((**arg).clone(), l.clone(), m2), r)),
        Term::Case(a, i, b) => weak_head_step(a)
            .map(|(a2, r)| (Term::case(a2, i.clone(), (**b).clone()), r)),
        _ => None,
    }
}

/// All one-step weak head reducts; the spine may offer several redexes.
pub fn weak_head_reducts(t: &Term) -> Vec<Term> {
    let mut out = Vec::new();
    if let Some(r) = rule_at(t, true) {
        out.push(contract_root(t, r).expect("rule matched"));
    }
    match t {
        Term::Push(arg, l, m) => {
            for m2 in weak_head_reducts(m) {
                out.push(Term::push((**arg).clone(), l.clone(), m2));
            }
        }
        Term::Case(a, i, b) => {
            for a2 in weak_head_reducts(a) {
                out.push(Term::case(a2, i.clone(), (**b).clone()));
            }
        }
        _ => {}
    }
    out
}

// ---------------------------------------------------------------------------
// Affine reduction
// ---------------------------------------------------------------------------

/// Contract affine redexes, leftmost-outermost, until none remain.
/// Terminating by the measure of [`affine_measure`]; the result is unique
/// up to alpha by confluence of the affine fragment.
pub fn affine_normalize(t: &Term) -> Term {
    let mut cur = t.clone();
    while let Some((path, rule)) = first_affine(&cur) {
        cur = apply(&cur, &path, rule).expect("enumerated redex applies");
    }
    cur
}

/// The full affine reduction sequence from `t`, leftmost-outermost:
/// the rule taken and the term after each step.
pub fn affine_reduction_sequence(t: &Term) -> Vec<(Rule, Term)> {
    let mut out = Vec::new();
    let mut cur = t.clone();
    while let Some((path, rule)) = first_affine(&cur) {
        cur = apply(&cur, &path, rule).expect("enumerated redex applies");
        out.push((rule, cur.clone()));
    }
    out
}

fn first_affine(t: &Term) -> Option<(RedexPath, Rule)> {
    redexes(t, false).into_iter().find(|(_, r)| r.is_affine())
}

/// The termination measure for affine reduction: `n` sums the size of the
/// left subterm over every case node, `m` sums the size of the
/// continuation over every push node. Every affine step decreases
/// `(n, m)` lexicographically.
pub fn affine_measure(t: &Term) -> (usize, usize) {
    fn go(t: &Term, n: &mut usize, m: &mut usize) {
        match t {
            Term::Var(_) | Term::Choice(_) => {}
            Term::Push(arg, _, cont) => {
                *m += cont.size();
                go(arg, n, m);
                go(cont, n, m);
            }
            Term::Pop(_, _, _, cont) => go(cont, n, m),
            Term::Case(left, _, right) => {
                *n += left.size();
                go(left, n, m);
                go(right, n, m);
            }
            Term::Loop(body, _) => go(body, n, m),
        }
    }
    let (mut n, mut m) = (0, 0);
    go(t, &mut n, &mut m);
    (n, m)
}

// ---------------------------------------------------------------------------
// Normalization with an unroll policy
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnrollPolicy {
    /// Unroll redexes are skipped; the result is a normal form modulo
    /// loops.
    Forbid,
    /// Each loop node unrolls at most this many times; copies of a loop
    /// inherit its remaining budget.
    Bounded(u32),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NormalizeResult {
    Normal(Term),
    FuelExhausted(Term),
}

impl NormalizeResult {
    pub fn term(&self) -> &Term {
        match self {
            NormalizeResult::Normal(t) | NormalizeResult::FuelExhausted(t) => t,
        }
    }

    pub fn into_term(self) -> Term {
        match self {
            NormalizeResult::Normal(t) | NormalizeResult::FuelExhausted(t) => t,
        }
    }
}

/// One step of a reduction trace.
#[derive(Debug, Clone)]
pub struct ReductionStep {
    pub rule: Rule,
    pub path: RedexPath,
    pub before: Term,
    pub after: Term,
}

/// Repeated leftmost-outermost contraction under the given unroll policy.
pub fn normalize(t: &Term, fuel: u64, policy: UnrollPolicy) -> NormalizeResult {
    normalize_traced(t, fuel, policy).0
}

/// As [`normalize`], also returning the numbered reduction steps.
pub fn normalize_traced(
    t: &Term,
    fuel: u64,
    policy: UnrollPolicy,
) -> (NormalizeResult, Vec<ReductionStep>) {
    let budget = match policy {
        UnrollPolicy::Forbid => 0,
        UnrollPolicy::Bounded(k) => k,
    };
    let mut cur = BTerm::from_term(t, budget);
    let mut steps = Vec::new();
    let mut used: u64 = 0;
    loop {
        let redex = cur.first_redex();
        match redex {
            None => return (NormalizeResult::Normal(cur.to_term()), steps),
            Some((path, rule)) => {
                if used == fuel {
                    return (NormalizeResult::FuelExhausted(cur.to_term()), steps);
                }
                used += 1;
                let before = cur.to_term();
                cur = cur.apply(&path, rule);
                steps.push(ReductionStep { rule, path, before, after: cur.to_term() });
            }
        }
    }
}

/// Terms with per-loop unroll budgets, used internally by [`normalize`].
#[derive(Debug, Clone, PartialEq, Eq)]
enum BTerm {
    Var(Ident),
    Choice(ChoiceLabel),
    Push(Box<BTerm>, Location, Box<BTerm>),
    Pop(Location, Ident, Option<ValueType>, Box<BTerm>),
    Case(Box<BTerm>, ChoiceLabel, Box<BTerm>),
    Loop(Box<BTerm>, ChoiceLabel, u32),
}

impl BTerm {
    fn from_term(t: &Term, budget: u32) -> BTerm {
        match t {
            Term::Var(x) => BTerm::Var(x.clone()),
            Term::Choice(i) => BTerm::Choice(i.clone()),
            Term::Push(a, l, m) => BTerm::Push(
                Box::new(BTerm::from_term(a, budget)),
                l.clone(),
                Box::new(BTerm::from_term(m, budget)),
            ),
            Term::Pop(l, x, ann, m) => BTerm::Pop(
                l.clone(),
                x.clone(),
                ann.clone(),
                Box::new(BTerm::from_term(m, budget)),
            ),
            Term::Case(a, i, b) => BTerm::Case(
                Box::new(BTerm::from_term(a, budget)),
                i.clone(),
                Box::new(BTerm::from_term(b, budget)),
            ),
            Term::Loop(a, i) => {
                BTerm::Loop(Box::new(BTerm::from_term(a, budget)), i.clone(), budget)
            }
        }
    }

    fn to_term(&self) -> Term {
        match self {
            BTerm::Var(x) => Term::Var(x.clone()),
            BTerm::Choice(i) => Term::Choice(i.clone()),
            BTerm::Push(a, l, m) => Term::push(a.to_term(), l.clone(), m.to_term()),
            BTerm::Pop(l, x, ann, m) => Term::Pop(l.clone(), x.clone(), ann.clone(), Box::new(m.to_term())),
            BTerm::Case(a, i, b) => Term::case(a.to_term(), i.clone(), b.to_term()),
            BTerm::Loop(a, i, _) => Term::looped(a.to_term(), i.clone()),
        }
    }

    fn free_vars(&self) -> std::collections::BTreeSet<Ident> {
        // Budgets do not affect binding structure.
        self.to_term().free_vars()
    }

    fn substitute(&self, x: &Ident, n: &BTerm) -> BTerm {
        if x.is_blank() {
            return self.clone();
        }
        match self {
            BTerm::Var(y) => {
                if y == x {
                    n.clone()
                } else {
                    self.clone()
                }
            }
            BTerm::Choice(_) => self.clone(),
            BTerm::Push(a, l, m) => BTerm::Push(
                Box::new(a.substitute(x, n)),
                l.clone(),
                Box::new(m.substitute(x, n)),
            ),
            BTerm::Pop(l, y, ann, m) => {
                if y == x {
                    self.clone()
                } else if !m.free_vars().contains(x) {
                    self.clone()
                } else if n.free_vars().contains(y) {
                    let mut avoid = n.free_vars();
                    avoid.extend(m.free_vars());
                    avoid.insert(x.clone());
                    let fresh = crate::syntax::fresh_ident(y, &avoid);
                    let renamed = m.substitute(y, &BTerm::Var(fresh.clone()));
                    BTerm::Pop(l.clone(), fresh, ann.clone(), Box::new(renamed.substitute(x, n)))
                } else {
                    BTerm::Pop(l.clone(), y.clone(), ann.clone(), Box::new(m.substitute(x, n)))
                }
            }
            BTerm::Case(a, i, b) => BTerm::Case(
                Box::new(a.substitute(x, n)),
                i.clone(),
                Box::new(b.substitute(x, n)),
            ),
            BTerm::Loop(a, i, k) => BTerm::Loop(Box::new(a.substitute(x, n)), i.clone(), *k),
        }
    }

    fn rule_here(&self) -> Option<Rule> {
        match self {
            BTerm::Push(arg, a, cont) => match &**cont {
                BTerm::Pop(b, _, _, _) if a == b => Some(Rule::Beta),
                BTerm::Pop(b, x, _, _) if a != b && !arg.free_vars().contains(x) => {
                    Some(Rule::Passage)
                }
                _ => None,
            },
            BTerm::Case(left, i, right) => match &**left {
                BTerm::Choice(j) => Some(if j == i { Rule::Select } else { Rule::Reject }),
                BTerm::Pop(_, x, _, _) if !right.free_vars().contains(x) => Some(Rule::PrefixPop),
                BTerm::Push(_, _, _) => Some(Rule::PrefixPush),
                BTerm::Case(_, j, _) if j == i => Some(Rule::Associate),
                _ => None,
            },
            BTerm::Loop(_, _, budget) if *budget > 0 => Some(Rule::Unroll),
            _ => None,
        }
    }

    fn children(&self) -> Vec<&BTerm> {
        match self {
            BTerm::Var(_) | BTerm::Choice(_) => vec![],
            BTerm::Push(a, _, m) => vec![a, m],
            BTerm::Pop(_, _, _, m) => vec![m],
            BTerm::Case(a, _, b) => vec![a, b],
            BTerm::Loop(a, _, _) => vec![a],
        }
    }

    fn first_redex(&self) -> Option<(RedexPath, Rule)> {
        fn go(t: &BTerm, path: &mut Vec<usize>) -> Option<(RedexPath, Rule)> {
            if let Some(r) = t.rule_here() {
                return Some((path.clone(), r));
            }
            for (i, c) in t.children().into_iter().enumerate() {
                path.push(i);
                if let Some(found) = go(c, path) {
                    path.pop();
                    return Some(found);
                }
                path.pop();
            }
            None
        }
        go(self, &mut Vec::new())
    }

    fn apply(&self, path: &[usize], rule: Rule) -> BTerm {
        if path.is_empty() {
            return self.contract(rule);
        }
        let (head, rest) = (path[0], &path[1..]);
        match self {
            BTerm::Push(a, l, m) => match head {
                0 => BTerm::Push(Box::new(a.apply(rest, rule)), l.clone(), m.clone()),
                _ => BTerm::Push(a.clone(), l.clone(), Box::new(m.apply(rest, rule))),
            },
            BTerm::Pop(l, x, ann, m) => {
                BTerm::Pop(l.clone(), x.clone(), ann.clone(), Box::new(m.apply(rest, rule)))
            }
            BTerm::Case(a, i, b) => match head {
                0 => BTerm::Case(Box::new(a.apply(rest, rule)), i.clone(), b.clone()),
                _ => BTerm::Case(a.clone(), i.clone(), Box::new(b.apply(rest, rule))),
            },
            BTerm::Loop(a, i, k) => BTerm::Loop(Box::new(a.apply(rest, rule)), i.clone(), *k),
            _ => unreachable!("path into a leaf"),
        }
    }

    fn contract(&self, rule: Rule) -> BTerm {
        match (self, rule) {
            (BTerm::Push(arg, _, cont), Rule::Beta) => match &**cont {
                BTerm::Pop(_, x, _, m) => m.substitute(x, arg),
                _ => unreachable!(),
            },
            (BTerm::Push(arg, a, cont), Rule::Passage) => match &**cont {
                BTerm::Pop(b, x, ann, m) => BTerm::Pop(
                    b.clone(),
                    x.clone(),
                    ann.clone(),
                    Box::new(BTerm::Push(arg.clone(), a.clone(), m.clone())),
                ),
                _ => unreachable!(),
            },
            (BTerm::Case(_, _, right), Rule::Select) => (**right).clone(),
            (BTerm::Case(left, _, _), Rule::Reject) => (**left).clone(),
            (BTerm::Case(left, i, right), Rule::PrefixPop) => match &**left {
                BTerm::Pop(l, x, ann, m) => BTerm::Pop(
                    l.clone(),
                    x.clone(),
                    ann.clone(),
                    Box::new(BTerm::Case(m.clone(), i.clone(), right.clone())),
                ),
                _ => unreachable!(),
            },
            (BTerm::Case(left, i, right), Rule::PrefixPush) => match &**left {
                BTerm::Push(p, a, n) => BTerm::Push(
                    p.clone(),
                    a.clone(),
                    Box::new(BTerm::Case(n.clone(), i.clone(), right.clone())),
                ),
                _ => unreachable!(),
            },
            (BTerm::Case(left, i, right), Rule::Associate) => match &**left {
                BTerm::Case(p, j, n) => {
                    debug_assert_eq!(i, j);
                    BTerm::Case(
                        p.clone(),
                        i.clone(),
                        Box::new(BTerm::Case(n.clone(), i.clone(), right.clone())),
                    )
                }
                _ => unreachable!(),
            },
            (BTerm::Loop(m, i, budget), Rule::Unroll) => {
                debug_assert!(*budget > 0);
                BTerm::Case(
                    m.clone(),
                    i.clone(),
                    Box::new(BTerm::Loop(m.clone(), i.clone(), budget - 1)),
                )
            }
            _ => unreachable!("contract with mismatched rule"),
        }
    }
}

// ---------------------------------------------------------------------------
// Marked terms and complete reduction
// ---------------------------------------------------------------------------

/// A term with marks on a selection of duplicating (beta or unroll)
/// redexes. Marks exist only on the two dedicated constructors, so the
/// invariant that only duplicating redexes carry marks holds by
/// construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MarkedTerm {
    Var(Ident),
    Choice(ChoiceLabel),
    Push(Box<MarkedTerm>, Location, Box<MarkedTerm>),
    Pop(Location, Ident, Option<ValueType>, Box<MarkedTerm>),
    Case(Box<MarkedTerm>, ChoiceLabel, Box<MarkedTerm>),
    Loop(Box<MarkedTerm>, ChoiceLabel),
    /// A marked beta redex `[arg]loc.loc<binder>.body`.
    MarkedBeta {
        arg: Box<MarkedTerm>,
        loc: Location,
        binder: Ident,
        ann: Option<ValueType>,
        body: Box<MarkedTerm>,
    },
    /// A marked unroll redex `body^'label`.
    MarkedLoop(Box<MarkedTerm>, ChoiceLabel),
}

/// Mark the duplicating redexes selected by `pick`, which is consulted
/// once per duplicating redex in preorder.
pub fn mark_with(t: &Term, pick: &mut impl FnMut() -> bool) -> MarkedTerm {
    match t {
        Term::Var(x) => MarkedTerm::Var(x.clone()),
        Term::Choice(i) => MarkedTerm::Choice(i.clone()),
        Term::Push(arg, a, cont) => {
            if let Term::Pop(b, x, ann, body) = &**cont {
                if a == b && pick() {
                    return MarkedTerm::MarkedBeta {
                        arg: Box::new(mark_with(arg, pick)),
                        loc: a.clone(),
                        binder: x.clone(),
                        ann: ann.clone(),
                        body: Box::new(mark_with(body, pick)),
                    };
                }
            }
            MarkedTerm::Push(
                Box::new(mark_with(arg, pick)),
                a.clone(),
                Box::new(mark_with(cont, pick)),
            )
        }
        Term::Pop(l, x, ann, m) => {
            MarkedTerm::Pop(l.clone(), x.clone(), ann.clone(), Box::new(mark_with(m, pick)))
        }
        Term::Case(a, i, b) => MarkedTerm::Case(
            Box::new(mark_with(a, pick)),
            i.clone(),
            Box::new(mark_with(b, pick)),
        ),
        Term::Loop(m, i) => {
            if pick() {
                MarkedTerm::MarkedLoop(Box::new(mark_with(m, pick)), i.clone())
            } else {
                MarkedTerm::Loop(Box::new(mark_with(m, pick)), i.clone())
            }
        }
    }
}

/// Mark every duplicating redex.
pub fn mark_all(t: &Term) -> MarkedTerm {
    mark_with(t, &mut || true)
}

/// The marked reduct: contract exactly the marked redexes, simultaneously.
pub fn marked_reduct(t: &MarkedTerm) -> Term {
    match t {
        MarkedTerm::Var(x) => Term::Var(x.clone()),
        MarkedTerm::Choice(i) => Term::Choice(i.clone()),
        MarkedTerm::Push(a, l, m) => Term::push(marked_reduct(a), l.clone(), marked_reduct(m)),
        MarkedTerm::Pop(l, x, ann, m) => {
            Term::Pop(l.clone(), x.clone(), ann.clone(), Box::new(marked_reduct(m)))
        }
        MarkedTerm::Case(a, i, b) => Term::case(marked_reduct(a), i.clone(), marked_reduct(b)),
        MarkedTerm::Loop(a, i) => Term::looped(marked_reduct(a), i.clone()),
        MarkedTerm::MarkedBeta { arg, binder, body, .. } => {
            marked_reduct(body).substitute(binder, &marked_reduct(arg))
        }
        MarkedTerm::MarkedLoop(a, i) => {
            let r = marked_reduct(a);
            Term::case(r.clone(), i.clone(), Term::looped(r, i.clone()))
        }
    }
}

/// Complete development: the marked reduct with every duplicating redex
/// marked.
pub fn complete_development(t: &Term) -> Term {
    marked_reduct(&mark_all(t))
}

/// Complete reduction: a full parallel duplicating step followed by
/// affine normalization.
pub fn complete_step(t: &Term) -> Term {
    affine_normalize(&complete_development(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse;

    fn p(src: &str) -> Term {
        parse(src).unwrap()
    }

    #[test]
    fn redex_enumeration() {
        assert_eq!(redexes(&p("[n]a.a<x>.m"), true), vec![(vec![], Rule::Beta)]);
        assert_eq!(redexes(&p("'i;'i->m"), true), vec![(vec![], Rule::Select)]);
        assert_eq!(redexes(&p("*"), true), vec![]);
        // respects the passage side condition
        assert_eq!(redexes(&p("[x]b.a<x>.m"), true), vec![]);
        assert_eq!(redexes(&p("[y]b.a<x>.m"), true), vec![(vec![], Rule::Passage)]);
        // respects the prefix-pop side condition
        assert_eq!(redexes(&p("(a<x>.m);'i->x"), true), vec![]);
        assert_eq!(
            redexes(&p("(a<x>.m);'i->y"), true),
            vec![(vec![], Rule::PrefixPop)]
        );
        // associate requires the same label on both cases
        assert_eq!(redexes(&p("(m;'i->n);'i->q"), true), vec![(vec![], Rule::Associate)]);
        assert_eq!(redexes(&p("(m;'i->n);'j->q"), true), vec![]);
        // unroll can be excluded
        assert_eq!(redexes(&p("m^'i"), false), vec![]);
        assert_eq!(redexes(&p("m^'i"), true), vec![(vec![], Rule::Unroll)]);
    }

    #[test]
    fn apply_rules() {
        let t = apply(&p("['i].<x>.x"), &[], Rule::Beta).unwrap();
        assert_eq!(t, p("'i"));
        let t = apply(&p("x^'i"), &[], Rule::Unroll).unwrap();
        assert_eq!(t, p("x;'i->x^'i"));
        let t = apply(&p("'i;'j->m"), &[], Rule::Reject).unwrap();
        assert_eq!(t, p("'i"));
        assert!(apply(&p("*"), &[], Rule::Beta).is_err());
        assert!(apply(&p("['i].<x>.x"), &[0, 0], Rule::Beta).is_err());
    }

    #[test]
    fn weak_head_descends_the_spine() {
        // under a push
        let (t, r) = weak_head_step(&p("[q]a.(['i].<x>.x)")).unwrap();
        assert_eq!((t, r), (p("[q]a.'i"), Rule::Beta));
        // not under a pop
        assert!(weak_head_step(&p("<x>.(['i].<y>.y)")).is_none());
        // select at the head
        let (t, _) = weak_head_step(&p("*;*->m")).unwrap();
        assert_eq!(t, p("m"));
        // in the left branch of a case, matching the machine focus
        let (t, r) = weak_head_step(&p("(m^'i);'j->q")).unwrap();
        assert_eq!((t, r), (p("(m;'i->m^'i);'j->q"), Rule::Unroll));
    }

    #[test]
    fn affine_normalize_examples() {
        assert_eq!(affine_normalize(&p("*")), p("*"));
        assert_eq!(affine_normalize(&p("[n]b.a<x>.m")), p("a<x>.[n]b.m"));
        // chained: prefix-push then select
        assert_eq!(affine_normalize(&p("([m].*);*->n")), p("[m].n"));
        // beta redexes stay
        assert_eq!(affine_normalize(&p("['i].<x>.x")), p("['i].<x>.x"));
    }

    #[test]
    fn affine_measure_examples() {
        assert_eq!(affine_measure(&p("*")), (0, 0));
        assert_eq!(affine_measure(&p("(<x>.y);'i->z")), (2, 0));
        assert_eq!(affine_measure(&p("<x>.(y;'i->z)")), (1, 0));
        // passage leaves n alone and strictly decreases m
        let before = p("[n]b.a<x>.m");
        let after = apply(&before, &[], Rule::Passage).unwrap();
        let (n0, m0) = affine_measure(&before);
        let (n1, m1) = affine_measure(&after);
        assert_eq!(n0, n1);
        assert!(m1 < m0);
    }

    #[test]
    fn affine_steps_decrease_the_measure() {
        let t = p("((<x>.y);'i->z);'i->([q].*;'j->w)");
        let mut prev = affine_measure(&t);
        for (_, after) in affine_reduction_sequence(&t) {
            let next = affine_measure(&after);
            assert!(next < prev, "{next:?} not below {prev:?}");
            prev = next;
        }
    }

    #[test]
    fn normalize_let_chain() {
        // prefix-push, select, beta: three steps exactly
        let (result, steps) = normalize_traced(&p("(['i].*);*-><x>.x"), 100, UnrollPolicy::Forbid);
        assert_eq!(result, NormalizeResult::Normal(p("'i")));
        let rules: Vec<Rule> = steps.iter().map(|s| s.rule).collect();
        assert_eq!(rules, vec![Rule::PrefixPush, Rule::Select, Rule::Beta]);
    }

    #[test]
    fn normalize_respects_policy() {
        assert_eq!(normalize(&p("x"), 100, UnrollPolicy::Forbid), NormalizeResult::Normal(p("x")));
        assert_eq!(
            normalize(&p("('i)^'i"), 100, UnrollPolicy::Forbid),
            NormalizeResult::Normal(p("('i)^'i"))
        );
        // bounded unrolling terminates and returns to the loop
        assert_eq!(
            normalize(&p("('i)^'i"), 1000, UnrollPolicy::Bounded(2)),
            NormalizeResult::Normal(p("('i)^'i"))
        );
    }

    #[test]
    fn complete_development_examples() {
        assert_eq!(complete_development(&p("['i].<x>.x")), p("'i"));
        assert_eq!(complete_development(&p("x")), p("x"));
        assert_eq!(complete_development(&p("x^'i")), p("x;'i->x^'i"));
        // nested duplicating redexes contract simultaneously
        assert_eq!(complete_development(&p("[['j].<y>.y].<x>.x")), p("'j"));
    }

    #[test]
    fn complete_step_examples() {
        assert_eq!(complete_step(&p("*")), p("*"));
        // development gives 'j;'j->'k, select gives 'k
        assert_eq!(complete_step(&p("['j].<x>.(x;'j->'k)")), p("'k"));
        // a rejected continuation disappears
        assert_eq!(complete_step(&p("(['i].<x>.x);'i->n")), p("n"));
        assert_eq!(complete_step(&p("(['i].<x>.x);*->n")), p("'i"));
    }

    #[test]
    fn random_marks_are_between_identity_and_development() {
        let t = p("[['j].<y>.y].<x>.(x^'k)");
        let none = marked_reduct(&mark_with(&t, &mut || false));
        assert_eq!(none, t);
        let all = marked_reduct(&mark_all(&t));
        assert_eq!(all, complete_development(&t));
    }
}
