//! The simple type system: stack, memory, sum, and value types; stack
//! expansion and sum inclusion; a deterministic synthesis algorithm with
//! subsumption checking; typing of machine states; and zero-term
//! inhabitation.
//!
//! A value type `!!s => !!t_I` maps an input memory shape to a finite
//! family of output memory shapes indexed by choice labels. The empty sum
//! `0` is the void type, inhabited only by looping terms.
//!
//! Concrete syntax (the input side is written top-of-stack first and
//! stored bottom-to-top internally):
//!
//! ```text
//! vtype   := memtype '=>' sumtype
//! memtype := 'e' | item*            item := loc '(' vtype* ')' | '(' vtype ')'
//! sumtype := '0' | branch ('+' branch)*
//! branch  := memtype '.' choice
//! ```

use std::collections::BTreeMap;
use std::fmt;

use crate::machine::Memory;
use crate::syntax::{self, ChoiceLabel, Cursor, Ident, Location, ParseError, Term, Tok};

/// Types of the items on one stack, bottom first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct StackType(pub Vec<ValueType>);

/// Per-location stack types; locations with empty stacks are absent.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct MemType(BTreeMap<Location, StackType>);

/// Choice-indexed family of memory types. May be empty (the void type).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct SumType(BTreeMap<ChoiceLabel, MemType>);

/// An implication from an input memory type to a sum of outputs.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ValueType {
    pub input: MemType,
    pub output: SumType,
}

/// Typing context for free variables.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Context(BTreeMap<Ident, ValueType>);

/// Type of a continuation stack: a sum transformer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContType {
    pub input: SumType,
    pub output: SumType,
}

impl MemType {
    pub fn empty() -> Self {
        MemType(BTreeMap::new())
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn singleton(loc: Location, ty: ValueType) -> Self {
        let mut m = MemType::empty();
        m.push_top(&loc, ty);
        m
    }

    pub fn stack(&self, loc: &Location) -> &[ValueType] {
        self.0.get(loc).map(|s| s.0.as_slice()).unwrap_or(&[])
    }

    pub fn locations(&self) -> impl Iterator<Item = &Location> {
        self.0.keys()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Location, &StackType)> {
        self.0.iter()
    }

    pub fn push_top(&mut self, loc: &Location, ty: ValueType) {
        self.0.entry(loc.clone()).or_default().0.push(ty);
    }

    pub fn pop_top(&mut self, loc: &Location) -> Option<ValueType> {
        let stack = self.0.get_mut(loc)?;
        let ty = stack.0.pop();
        if stack.0.is_empty() {
            self.0.remove(loc);
        }
        ty
    }

    /// Prepend `below` at the bottom of every stack of `self`.
    pub fn stacked_on(&self, below: &MemType) -> MemType {
        let mut out = below.clone();
        for (loc, stack) in &self.0 {
            out.0.entry(loc.clone()).or_default().0.extend(stack.0.iter().cloned());
        }
        out.canonicalize();
        out
    }

    fn canonicalize(&mut self) {
        self.0.retain(|_, s| !s.0.is_empty());
    }

    pub fn total_len(&self) -> usize {
        self.0.values().map(|s| s.0.len()).sum()
    }
}

impl SumType {
    pub fn empty() -> Self {
        SumType(BTreeMap::new())
    }

    pub fn singleton(label: ChoiceLabel, mem: MemType) -> Self {
        let mut s = SumType::empty();
        s.0.insert(label, mem);
        s
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn branch(&self, label: &ChoiceLabel) -> Option<&MemType> {
        self.0.get(label)
    }

    pub fn branches(&self) -> impl Iterator<Item = (&ChoiceLabel, &MemType)> {
        self.0.iter()
    }

    pub fn labels(&self) -> impl Iterator<Item = &ChoiceLabel> {
        self.0.keys()
    }

    pub fn without(&self, label: &ChoiceLabel) -> SumType {
        let mut s = self.clone();
        s.0.remove(label);
        s
    }

    pub fn insert(&mut self, label: ChoiceLabel, mem: MemType) {
        self.0.insert(label, mem);
    }
}

impl ValueType {
    pub fn new(input: MemType, output: SumType) -> Self {
        ValueType { input, output }
    }

    /// The type `e => e.i` of a bare choice.
    pub fn of_choice(label: ChoiceLabel) -> Self {
        ValueType::new(MemType::empty(), SumType::singleton(label, MemType::empty()))
    }
}

impl Context {
    pub fn empty() -> Self {
        Context(BTreeMap::new())
    }

    pub fn get(&self, x: &Ident) -> Option<&ValueType> {
        self.0.get(x)
    }

    pub fn with(&self, x: Ident, ty: ValueType) -> Context {
        let mut c = self.clone();
        c.0.insert(x, ty);
        c
    }
}

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TypeError {
    #[error("unannotated binder `{binder}` at {path}; synthesis needs `<{binder}: type>`")]
    UnannotatedBinder { binder: Ident, path: TermPath },
    #[error("unbound variable `{name}` at {path}")]
    UnboundVariable { name: Ident, path: TermPath },
    #[error("pushed argument at {path} has type {found} but the continuation expects {expected} on top of `{loc}`")]
    PushMismatch { loc: String, expected: Box<ValueType>, found: Box<ValueType>, path: TermPath },
    #[error("stack types conflict on `{loc}`: {left} vs {right} ({context})")]
    StackConflict { loc: String, left: Box<ValueType>, right: Box<ValueType>, context: String },
    #[error("sum types overlap on choice {label}")]
    SumOverlap { label: ChoiceLabel },
    #[error("branch {label} at {path} conflicts during case merge: {detail}")]
    BranchConflict { label: ChoiceLabel, detail: String, path: TermPath },
    #[error("loop on {label} at {path}: branch type {branch} does not equal input type {input}")]
    LoopMismatch { label: ChoiceLabel, branch: String, input: String, path: TermPath },
    #[error("case merge did not converge at {path}")]
    MergeDivergence { path: TermPath },
    #[error("term synthesizes {synthesized}, which does not subsume into the goal {goal}")]
    CheckFailed { synthesized: Box<ValueType>, goal: Box<ValueType> },
    #[error("memory item {index} on `{loc}`: {detail}")]
    MemoryItem { loc: String, index: usize, detail: String },
    #[error("state term needs more memory than the state provides on `{loc}`")]
    StateUnderflow { loc: String },
    #[error("continuation handler for {label}: {detail}")]
    ContinuationItem { label: ChoiceLabel, detail: String },
}

/// A path of child indices into a term, used as an error position.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TermPath(pub Vec<usize>);

impl fmt::Display for TermPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            write!(f, "root")
        } else {
            let parts: Vec<String> = self.0.iter().map(|i| i.to_string()).collect();
            write!(f, "path {}", parts.join("."))
        }
    }
}

// ---------------------------------------------------------------------------
// Expansion, inclusion, matching
// ---------------------------------------------------------------------------

/// Stack expansion: prepend `below` at the bottom of the input and at the
/// bottom of every output branch.
pub fn expand(t: &ValueType, below: &MemType) -> ValueType {
    if below.is_empty() {
        return t.clone();
    }
    let input = t.input.stacked_on(below);
    let mut output = SumType::empty();
    for (label, mem) in t.output.branches() {
        output.insert(label.clone(), mem.stacked_on(below));
    }
    ValueType::new(input, output)
}

/// Sum inclusion: enlarge the output family by `extra`, whose labels must
/// be disjoint from the existing ones.
pub fn include(t: &ValueType, extra: &SumType) -> Result<ValueType, TypeError> {
    let mut output = t.output.clone();
    for (label, mem) in extra.branches() {
        if output.branch(label).is_some() {
            return Err(TypeError::SumOverlap { label: label.clone() });
        }
        output.insert(label.clone(), mem.clone());
    }
    Ok(ValueType::new(t.input.clone(), output))
}

/// Minimal bottom expansions `(e1, e2)` with
/// `m1 stacked on e1 == m2 stacked on e2`, by top-aligned suffix matching
/// per location. Fails when the overlapping parts conflict.
pub fn align_mems(m1: &MemType, m2: &MemType, context: &str) -> Result<(MemType, MemType), TypeError> {
    let mut e1 = MemType::empty();
    let mut e2 = MemType::empty();
    let locs: std::collections::BTreeSet<Location> =
        m1.locations().chain(m2.locations()).cloned().collect();
    for loc in locs {
        let a = m1.stack(&loc);
        let b = m2.stack(&loc);
        let (short, long, target) = if a.len() <= b.len() {
            (a, b, &mut e1)
        } else {
            (b, a, &mut e2)
        };
        let cut = long.len() - short.len();
        for (x, y) in long[cut..].iter().zip(short.iter()) {
            if x != y {
                return Err(TypeError::StackConflict {
                    loc: loc.to_string(),
                    left: Box::new(x.clone()),
                    right: Box::new(y.clone()),
                    context: context.to_string(),
                });
            }
        }
        for item in &long[..cut] {
            target.push_top(&loc, item.clone());
        }
    }
    Ok((e1, e2))
}

/// Minimal expansions making the inputs of two value types coincide.
pub fn match_types(t1: &ValueType, t2: &ValueType) -> Result<(MemType, MemType), TypeError> {
    align_mems(&t1.input, &t2.input, "matching input types")
}

/// Recursive subsumption: `demanded` is obtainable from `provided` by a
/// stack expansion, a sum inclusion, and raising output items likewise.
/// Input items are fixed by binder annotations and compare exactly;
/// output items record pushed terms, whose derivations may themselves end
/// in expansion or inclusion, so they compare covariantly.
pub fn deep_le(provided: &ValueType, demanded: &ValueType) -> bool {
    let locs: std::collections::BTreeSet<Location> =
        provided.input.locations().chain(demanded.input.locations()).cloned().collect();
    let mut below = MemType::empty();
    for loc in locs {
        let p = provided.input.stack(&loc);
        let d = demanded.input.stack(&loc);
        if p.len() > d.len() {
            return false;
        }
        let cut = d.len() - p.len();
        if d[cut..] != *p {
            return false;
        }
        for item in &d[..cut] {
            below.push_top(&loc, item.clone());
        }
    }
    let expanded = expand(provided, &below);
    if expanded.input != demanded.input {
        return false;
    }
    let included = expanded.output.branches().all(|(label, mem)| {
        match demanded.output.branch(label) {
            Some(dm) => mem_le(mem, dm),
            None => false,
        }
    });
    included
}

/// Same shape, item-wise [`deep_le`].
fn mem_le(provided: &MemType, demanded: &MemType) -> bool {
    let lp: Vec<&Location> = provided.locations().collect();
    let ld: Vec<&Location> = demanded.locations().collect();
    if lp != ld {
        return false;
    }
    for loc in lp {
        let p = provided.stack(loc);
        let d = demanded.stack(loc);
        if p.len() != d.len() || !p.iter().zip(d.iter()).all(|(a, b)| deep_le(a, b)) {
            return false;
        }
    }
    true
}

fn join_types(a: &ValueType, b: &ValueType) -> Option<ValueType> {
    if deep_le(a, b) {
        Some(b.clone())
    } else if deep_le(b, a) {
        Some(a.clone())
    } else {
        None
    }
}

fn join_mems(a: &MemType, b: &MemType) -> Option<MemType> {
    let la: Vec<&Location> = a.locations().collect();
    let lb: Vec<&Location> = b.locations().collect();
    if la != lb {
        return None;
    }
    let mut out = MemType::empty();
    for loc in la {
        let sa = a.stack(loc);
        let sb = b.stack(loc);
        if sa.len() != sb.len() {
            return None;
        }
        for (x, y) in sa.iter().zip(sb.iter()) {
            out.push_top(loc, join_types(x, y)?);
        }
    }
    Some(out)
}

/// Align a provided memory against a demanded one: bottom expansions fix
/// length differences and the overlap must satisfy item-wise [`deep_le`]
/// from provided to demanded.
fn align_provide(
    provided: &MemType,
    demanded: &MemType,
    context: &str,
) -> Result<(MemType, MemType), TypeError> {
    let mut e_provided = MemType::empty();
    let mut e_demanded = MemType::empty();
    let locs: std::collections::BTreeSet<Location> =
        provided.locations().chain(demanded.locations()).cloned().collect();
    for loc in locs {
        let p = provided.stack(&loc);
        let d = demanded.stack(&loc);
        let overlap = p.len().min(d.len());
        let (ptail, dtail) = (&p[p.len() - overlap..], &d[d.len() - overlap..]);
        for (x, y) in ptail.iter().zip(dtail.iter()) {
            if !deep_le(x, y) {
                return Err(TypeError::StackConflict {
                    loc: loc.to_string(),
                    left: Box::new(x.clone()),
                    right: Box::new(y.clone()),
                    context: context.to_string(),
                });
            }
        }
        if p.len() < d.len() {
            for item in &d[..d.len() - overlap] {
                e_provided.push_top(&loc, item.clone());
            }
        } else {
            for item in &p[..p.len() - overlap] {
                e_demanded.push_top(&loc, item.clone());
            }
        }
    }
    Ok((e_provided, e_demanded))
}

/// The bottom-extra of `larger` over `smaller`, requiring `smaller` to be
/// a top-aligned suffix of `larger` per location, comparing the overlap
/// with [`deep_le`] from `larger` (provided) to `smaller` (demanded).
fn suffix_diff(larger: &MemType, smaller: &MemType, context: &str) -> Result<MemType, TypeError> {
    let (e_large, e_small) = align_provide(larger, smaller, context)?;
    if !e_large.is_empty() {
        // `smaller` is deeper somewhere; report the offending location.
        let loc = e_large.locations().next().cloned().unwrap();
        return Err(TypeError::StateUnderflow { loc: loc.to_string() });
    }
    Ok(e_small)
}

// ---------------------------------------------------------------------------
// Synthesis
// ---------------------------------------------------------------------------

/// A synthesized type together with its floating branches: output
/// branches contributed by a handler that never runs (the body cannot
/// produce the case's choice). The recorded memory is the handler's real
/// exit, but the inclusion that justifies the branch may feed the handler
/// any input, so a floating branch extends at the bottom independently of
/// the input, instead of riding expansions like a real branch.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Syn {
    ty: ValueType,
    floating: std::collections::BTreeSet<ChoiceLabel>,
}

impl Syn {
    fn real(ty: ValueType) -> Syn {
        Syn { ty, floating: Default::default() }
    }

    fn is_floating(&self, label: &ChoiceLabel) -> bool {
        self.floating.contains(label)
    }

    fn expand(&self, below: &MemType) -> Syn {
        if below.is_empty() {
            return self.clone();
        }
        let input = self.ty.input.stacked_on(below);
        let mut output = SumType::empty();
        for (label, mem) in self.ty.output.branches() {
            if self.floating.contains(label) {
                output.insert(label.clone(), mem.clone());
            } else {
                output.insert(label.clone(), mem.stacked_on(below));
            }
        }
        Syn { ty: ValueType::new(input, output), floating: self.floating.clone() }
    }
}

/// Can a floating branch recorded at `m` present itself as `target`?
/// `m` must be a top-aligned suffix of `target`, raising items covariantly.
fn mem_floating_le(m: &MemType, target: &MemType) -> bool {
    for loc in m.locations() {
        let p = m.stack(loc);
        let d = target.stack(loc);
        if p.len() > d.len() {
            return false;
        }
        let cut = d.len() - p.len();
        if !p.iter().zip(d[cut..].iter()).all(|(a, b)| deep_le(a, b)) {
            return false;
        }
    }
    true
}

/// Synthesize the minimal type of a term, requiring annotations on every
/// binder. Expansion and inclusion are folded into the composition points
/// (push, case, loop) and into the subsumption of [`check`].
pub fn synthesize(ctx: &Context, term: &Term) -> Result<ValueType, TypeError> {
    Ok(synth_at(ctx, term, &mut Vec::new())?.ty)
}

fn synth_at(ctx: &Context, term: &Term, path: &mut Vec<usize>) -> Result<Syn, TypeError> {
    match term {
        Term::Var(x) => ctx
            .get(x)
            .cloned()
            .map(Syn::real)
            .ok_or_else(|| TypeError::UnboundVariable {
                name: x.clone(),
                path: TermPath(path.clone()),
            }),
        Term::Choice(i) => Ok(Syn::real(ValueType::of_choice(i.clone()))),
        Term::Pop(loc, x, ann, m) => {
            let ann = ann.as_ref().ok_or_else(|| TypeError::UnannotatedBinder {
                binder: x.clone(),
                path: TermPath(path.clone()),
            })?;
            let inner_ctx = if x.is_blank() {
                ctx.clone()
            } else {
                ctx.with(x.clone(), ann.clone())
            };
            path.push(0);
            let mut t = synth_at(&inner_ctx, m, path)?;
            path.pop();
            t.ty.input.push_top(loc, ann.clone());
            Ok(t)
        }
        Term::Push(arg, loc, m) => {
            path.push(0);
            let arg_syn = synth_at(ctx, arg, path)?;
            path.pop();
            path.push(1);
            let mut tm = synth_at(ctx, m, path)?;
            path.pop();
            if tm.ty.input.stack(loc).is_empty() {
                // The continuation ignores `loc`; the pushed value rides
                // along at the bottom of every real output branch.
                let extra = MemType::singleton(loc.clone(), arg_syn.ty);
                let ridden = tm.expand(&extra);
                let mut input = ridden.ty.input;
                input.pop_top(loc);
                Ok(Syn { ty: ValueType::new(input, ridden.ty.output), floating: ridden.floating })
            } else {
                // The argument may synthesize less than the continuation
                // demands; its derivation can be raised to the demand.
                let top = tm.ty.input.pop_top(loc).unwrap();
                if !syn_le(&arg_syn, &top) {
                    return Err(TypeError::PushMismatch {
                        loc: loc.to_string(),
                        expected: Box::new(top),
                        found: Box::new(arg_syn.ty),
                        path: TermPath(path.clone()),
                    });
                }
                Ok(tm)
            }
        }
        Term::Case(m, i, n) => {
            path.push(0);
            let tm = synth_at(ctx, m, path)?;
            path.pop();
            path.push(1);
            let tn = synth_at(ctx, n, path)?;
            path.pop();
            compose_case(tm, i, tn, path)
        }
        Term::Loop(m, i) => {
            path.push(0);
            let tm = synth_at(ctx, m, path)?;
            path.pop();
            match tm.ty.output.branch(i) {
                None => Ok(tm),
                Some(branch) => {
                    if tm.is_floating(i) {
                        // the floating branch can present itself as the
                        // input when it fits underneath
                        if mem_floating_le(branch, &tm.ty.input) {
                            let mut out = tm.clone();
                            out.ty.output = out.ty.output.without(i);
                            out.floating.remove(i);
                            return Ok(out);
                        }
                        return Err(TypeError::LoopMismatch {
                            label: i.clone(),
                            branch: branch.to_string(),
                            input: tm.ty.input.to_string(),
                            path: TermPath(path.clone()),
                        });
                    }
                    // Exact shapes; expansion prepends to the branch and
                    // the input alike, so it cannot repair a mismatch.
                    // Branch items are produced by pushes and may be
                    // raised to the input's item types.
                    if mem_le(branch, &tm.ty.input) {
                        Ok(Syn {
                            ty: ValueType::new(tm.ty.input.clone(), tm.ty.output.without(i)),
                            floating: tm.floating,
                        })
                    } else {
                        Err(TypeError::LoopMismatch {
                            label: i.clone(),
                            branch: branch.to_string(),
                            input: tm.ty.input.to_string(),
                            path: TermPath(path.clone()),
                        })
                    }
                }
            }
        }
    }
}

/// Compose `tm ;i-> tn`.
///
/// When the body really exits on `i`, that branch must match the
/// handler's input and the real shared branches must join, iterating
/// expansion to a fixpoint (a repair on one branch may re-open another).
/// When `i` is free or absent the handler never runs: its branches join
/// the composite as free branches and impose nothing.
fn compose_case(
    mut tm: Syn,
    i: &ChoiceLabel,
    mut tn: Syn,
    path: &mut Vec<usize>,
) -> Result<Syn, TypeError> {
    let conflict = |label: &ChoiceLabel, detail: String, path: &[usize]| TypeError::BranchConflict {
        label: label.clone(),
        detail,
        path: TermPath(path.to_vec()),
    };
    let body_runs_handler = tm.ty.output.branch(i).is_some() && !tm.is_floating(i);
    if !body_runs_handler {
        // The handler never runs: its exits join as floating branches.
        let mut output = tm.ty.output.without(i);
        let mut floating: std::collections::BTreeSet<ChoiceLabel> =
            tm.floating.iter().filter(|l| *l != i).cloned().collect();
        for (label, mem) in tn.ty.output.branches() {
            match output.branch(label) {
                None => {
                    output.insert(label.clone(), mem.clone());
                    floating.insert(label.clone());
                }
                Some(existing) => {
                    let merged = merge_flavored(
                        existing,
                        floating.contains(label),
                        mem,
                        true,
                    )
                    .ok_or_else(|| conflict(label, format!("{existing} vs {mem}"), path))?;
                    if !merged.1 {
                        floating.remove(label);
                    }
                    output.insert(label.clone(), merged.0);
                }
            }
        }
        return Ok(Syn { ty: ValueType::new(tm.ty.input, output), floating });
    }
    'rounds: for _ in 0..64 {
        let branch = tm.ty.output.branch(i).expect("real branch");
        let (em, en) = align_provide(branch, &tn.ty.input, "case body/handler")
            .map_err(|e| conflict(i, e.to_string(), path))?;
        if !em.is_empty() || !en.is_empty() {
            tm = tm.expand(&em);
            tn = tn.expand(&en);
            continue 'rounds;
        }
        // Real shared branches must join; expansion can repair a length
        // difference when the short side is real.
        let shared: Vec<ChoiceLabel> = tm
            .ty
            .output
            .labels()
            .filter(|j| *j != i && tn.ty.output.branch(j).is_some())
            .cloned()
            .collect();
        for j in shared {
            let bm = tm.ty.output.branch(&j).unwrap();
            let bn = tn.ty.output.branch(&j).unwrap();
            let m_float = tm.is_floating(&j);
            let n_float = tn.is_floating(&j);
            if merge_flavored(bm, m_float, bn, n_float).is_some() {
                continue;
            }
            let (em, en) = length_align(bm, bn);
            let em_helps = !em.is_empty() && !m_float;
            let en_helps = !en.is_empty() && !n_float;
            if !em_helps && !en_helps {
                return Err(conflict(&j, format!("{bm} vs {bn}"), path));
            }
            if em_helps {
                tm = tm.expand(&em);
            }
            if en_helps {
                tn = tn.expand(&en);
            }
            continue 'rounds;
        }
        // Fixpoint reached: build the composite.
        let mut output = tm.ty.output.without(i);
        let mut floating: std::collections::BTreeSet<ChoiceLabel> =
            tm.floating.iter().filter(|l| *l != i).cloned().collect();
        for (label, mem) in tn.ty.output.branches() {
            let n_float = tn.is_floating(label);
            match output.branch(label) {
                None => {
                    output.insert(label.clone(), mem.clone());
                    if n_float {
                        floating.insert(label.clone());
                    }
                }
                Some(existing) => {
                    let m_float = floating.contains(label);
                    let (merged, still_floating) =
                        merge_flavored(existing, m_float, mem, n_float).ok_or_else(|| {
                            conflict(label, format!("{existing} vs {mem}"), path)
                        })?;
                    if !still_floating {
                        floating.remove(label);
                    }
                    output.insert(label.clone(), merged);
                }
            }
        }
        return Ok(Syn { ty: ValueType::new(tm.ty.input, output), floating });
    }
    Err(TypeError::MergeDivergence { path: TermPath(path.clone()) })
}

/// Merge two same-label branch memories, respecting flavors: two real
/// branches join item-wise; a floating branch fits underneath a real one
/// with items joined on the overlap; two floating branches keep the
/// deeper shape, joining overlaps.
fn merge_flavored(
    a: &MemType,
    a_floating: bool,
    b: &MemType,
    b_floating: bool,
) -> Option<(MemType, bool)> {
    match (a_floating, b_floating) {
        (false, false) => join_mems(a, b).map(|m| (m, false)),
        (true, false) => fit_floating_onto(a, b).map(|m| (m, false)),
        (false, true) => fit_floating_onto(b, a).map(|m| (m, false)),
        (true, true) => {
            let locs: std::collections::BTreeSet<Location> =
                a.locations().chain(b.locations()).cloned().collect();
            let mut out = MemType::empty();
            for loc in locs {
                let sa = a.stack(&loc);
                let sb = b.stack(&loc);
                let (short, long) = if sa.len() <= sb.len() { (sa, sb) } else { (sb, sa) };
                let cut = long.len() - short.len();
                for item in &long[..cut] {
                    out.push_top(&loc, item.clone());
                }
                for (x, y) in long[cut..].iter().zip(short.iter()) {
                    out.push_top(&loc, join_types(x, y)?);
                }
            }
            Some((out, true))
        }
    }
}

/// Fit a floating branch memory underneath a real one: the floating side
/// must be a top-aligned suffix shape-wise; overlapping items join.
fn fit_floating_onto(floating: &MemType, real: &MemType) -> Option<MemType> {
    let mut out = MemType::empty();
    for loc in floating.locations() {
        if floating.stack(loc).len() > real.stack(loc).len() {
            return None;
        }
    }
    for loc in real.locations().cloned().collect::<Vec<_>>() {
        let r = real.stack(&loc);
        let f = floating.stack(&loc);
        let cut = r.len() - f.len();
        for item in &r[..cut] {
            out.push_top(&loc, item.clone());
        }
        for (x, y) in r[cut..].iter().zip(f.iter()) {
            out.push_top(&loc, join_types(x, y)?);
        }
    }
    Some(out)
}

/// [`deep_le`] from a flagged type: real branches ride the input
/// expansion and compare item-wise; floating branches fit anywhere their
/// recorded memory extends to.
fn syn_le(provided: &Syn, demanded: &ValueType) -> bool {
    let locs: std::collections::BTreeSet<Location> = provided
        .ty
        .input
        .locations()
        .chain(demanded.input.locations())
        .cloned()
        .collect();
    let mut below = MemType::empty();
    for loc in locs {
        let p = provided.ty.input.stack(&loc);
        let d = demanded.input.stack(&loc);
        if p.len() > d.len() {
            return false;
        }
        let cut = d.len() - p.len();
        if d[cut..] != *p {
            return false;
        }
        for item in &d[..cut] {
            below.push_top(&loc, item.clone());
        }
    }
    let expanded = provided.expand(&below);
    if expanded.ty.input != demanded.input {
        return false;
    }
    let fits = expanded.ty.output.branches().all(|(label, mem)| {
        match demanded.output.branch(label) {
            Some(dm) if expanded.is_floating(label) => mem_floating_le(mem, dm),
            Some(dm) => mem_le(mem, dm),
            None => false,
        }
    });
    fits
}

/// Bottom expansions equalizing per-location stack lengths.
fn length_align(m1: &MemType, m2: &MemType) -> (MemType, MemType) {
    let mut e1 = MemType::empty();
    let mut e2 = MemType::empty();
    let locs: std::collections::BTreeSet<Location> =
        m1.locations().chain(m2.locations()).cloned().collect();
    for loc in locs {
        let a = m1.stack(&loc);
        let b = m2.stack(&loc);
        if a.len() < b.len() {
            for item in &b[..b.len() - a.len()] {
                e1.push_top(&loc, item.clone());
            }
        } else {
            for item in &a[..a.len() - b.len()] {
                e2.push_top(&loc, item.clone());
            }
        }
    }
    (e1, e2)
}

/// True iff `goal` is obtainable from `syn` by stack expansion and sum
/// inclusion, applied recursively at output item positions.
pub fn subsume(syn: &ValueType, goal: &ValueType) -> bool {
    deep_le(syn, goal)
}

/// Check a term against a goal type.
///
/// Minimal synthesized types are not stable under reduction: a pushed
/// item may start riding through phantom branches that an equal-shape
/// comparison then rejects, even though a derivation at the original
/// type exists. The checker therefore pushes the goal down through the
/// term, falling back to synthesis only for pushed arguments and for the
/// intermediate memory of a case.
pub fn check(ctx: &Context, term: &Term, goal: &ValueType) -> Result<(), TypeError> {
    check_at(ctx, term, goal, &mut Vec::new())
}

fn check_at(
    ctx: &Context,
    term: &Term,
    goal: &ValueType,
    path: &mut Vec<usize>,
) -> Result<(), TypeError> {
    let fail = |syn: ValueType, goal: &ValueType| TypeError::CheckFailed {
        synthesized: Box::new(syn),
        goal: Box::new(goal.clone()),
    };
    match term {
        Term::Var(x) => {
            let tx = ctx.get(x).cloned().ok_or_else(|| TypeError::UnboundVariable {
                name: x.clone(),
                path: TermPath(path.clone()),
            })?;
            if deep_le(&tx, goal) {
                Ok(())
            } else {
                Err(fail(tx, goal))
            }
        }
        Term::Choice(i) => {
            // expansion carries the whole input into the exit branch
            match goal.output.branch(i) {
                Some(branch) if mem_le(&goal.input, branch) => Ok(()),
                _ => Err(fail(ValueType::of_choice(i.clone()), goal)),
            }
        }
        Term::Pop(loc, x, ann, m) => {
            let ann = ann.as_ref().ok_or_else(|| TypeError::UnannotatedBinder {
                binder: x.clone(),
                path: TermPath(path.clone()),
            })?;
            let mut inner_input = goal.input.clone();
            let top = inner_input.pop_top(loc).ok_or_else(|| TypeError::StateUnderflow {
                loc: loc.to_string(),
            })?;
            // the arriving item may be raised to the annotation
            if !deep_le(&top, ann) {
                return Err(TypeError::PushMismatch {
                    loc: loc.to_string(),
                    expected: Box::new(ann.clone()),
                    found: Box::new(top),
                    path: TermPath(path.clone()),
                });
            }
            let inner_ctx = if x.is_blank() {
                ctx.clone()
            } else {
                ctx.with(x.clone(), ann.clone())
            };
            path.push(0);
            let r = check_at(&inner_ctx, m, &ValueType::new(inner_input, goal.output.clone()), path);
            path.pop();
            r
        }
        Term::Push(arg, loc, m) => {
            path.push(0);
            let arg_syn = synth_at(ctx, arg, path)?;
            path.pop();
            let mut inner_input = goal.input.clone();
            inner_input.push_top(loc, arg_syn.ty);
            path.push(1);
            let r = check_at(ctx, m, &ValueType::new(inner_input, goal.output.clone()), path);
            path.pop();
            r
        }
        Term::Case(m, i, n) => {
            // the intermediate memory: the body's own exit on i when it
            // really has one, the handler's minimal input otherwise
            let s = match synth_at(ctx, m, path) {
                Ok(tm) if tm.ty.output.branch(i).is_some() && !tm.is_floating(i) => {
                    // account for the goal's deeper memory riding along
                    let (e_m, _) = align_provide(&tm.ty.input, &goal.input, "case body input")
                        .unwrap_or((MemType::empty(), MemType::empty()));
                    expand(&tm.ty, &e_m).output.branch(i).cloned().unwrap()
                }
                _ => {
                    path.push(1);
                    let tn = synth_at(ctx, n, path);
                    path.pop();
                    tn.map(|t| t.ty.input).unwrap_or_else(|_| MemType::empty())
                }
            };
            let mut body_out = goal.output.without(i);
            body_out.insert(i.clone(), s.clone());
            path.push(0);
            check_at(ctx, m, &ValueType::new(goal.input.clone(), body_out), path)?;
            path.pop();
            path.push(1);
            let r = check_at(ctx, n, &ValueType::new(s, goal.output.clone()), path);
            path.pop();
            r
        }
        Term::Loop(m, i) => {
            let mut body_out = goal.output.without(i);
            body_out.insert(i.clone(), goal.input.clone());
            path.push(0);
            let r = check_at(ctx, m, &ValueType::new(goal.input.clone(), body_out), path);
            path.pop();
            r
        }
    }
}

// ---------------------------------------------------------------------------
// State typing
// ---------------------------------------------------------------------------

/// Type a machine state as `e => sum`.
///
/// Memory items are typed first (checked against `memtyping` when given,
/// synthesized otherwise), then the focus term, then the continuation
/// items from the head outward. The memory type is fixed by the state, so
/// handlers are expanded to fit it and branch merges must then agree
/// exactly.
pub fn type_state(
    state: &crate::machine::State,
    memtyping: Option<&MemType>,
) -> Result<ValueType, TypeError> {
    let empty = Context::empty();
    let mut memty = MemType::empty();
    for (loc, stack) in state.memory.entries() {
        for (index, item) in stack.iter().enumerate() {
            let ty = match memtyping.and_then(|h| h.stack(loc).get(index)) {
                Some(expected) => {
                    check(&empty, item, expected).map_err(|e| TypeError::MemoryItem {
                        loc: loc.to_string(),
                        index,
                        detail: e.to_string(),
                    })?;
                    expected.clone()
                }
                None => synthesize(&empty, item).map_err(|e| TypeError::MemoryItem {
                    loc: loc.to_string(),
                    index,
                    detail: e.to_string(),
                })?,
            };
            memty.push_top(loc, ty);
        }
    }
    let tm = synthesize(&empty, &state.term)?;
    let below = suffix_diff(&memty, &tm.input, "state memory")?;
    let tm = expand(&tm, &below);
    let mut sum = tm.output;
    for (label, handler) in state.cont.iter_head_first() {
        let th = synthesize(&empty, handler).map_err(|e| TypeError::ContinuationItem {
            label: label.clone(),
            detail: e.to_string(),
        })?;
        let th = match sum.branch(label) {
            Some(mem) => {
                let diff = suffix_diff(mem, &th.input, "continuation input").map_err(|e| {
                    TypeError::ContinuationItem { label: label.clone(), detail: e.to_string() }
                })?;
                expand(&th, &diff)
            }
            None => th,
        };
        let mut next = sum.without(label);
        for (j, mem) in th.output.branches() {
            let merged = match next.branch(j) {
                Some(existing) => join_mems(existing, mem).ok_or_else(|| {
                    TypeError::ContinuationItem {
                        label: label.clone(),
                        detail: format!("branch {j} mismatch: {existing} vs {mem}"),
                    }
                })?,
                None => mem.clone(),
            };
            next.insert(j.clone(), merged);
        }
        sum = next;
    }
    Ok(ValueType::new(MemType::empty(), sum))
}

/// Type a continuation stack alone, given its input sum.
pub fn cont_type(
    cont: &crate::machine::ContStack,
    input: &SumType,
) -> Result<ContType, TypeError> {
    let mut sum = input.clone();
    let empty = Context::empty();
    for (label, handler) in cont.iter_head_first() {
        let th = synthesize(&empty, handler).map_err(|e| TypeError::ContinuationItem {
            label: label.clone(),
            detail: e.to_string(),
        })?;
        let th = match sum.branch(label) {
            Some(mem) => {
                let diff = suffix_diff(mem, &th.input, "continuation input").map_err(|e| {
                    TypeError::ContinuationItem { label: label.clone(), detail: e.to_string() }
                })?;
                expand(&th, &diff)
            }
            None => th,
        };
        let mut next = sum.without(label);
        for (j, mem) in th.output.branches() {
            let merged = match next.branch(j) {
                Some(existing) => join_mems(existing, mem).ok_or_else(|| {
                    TypeError::ContinuationItem {
                        label: label.clone(),
                        detail: format!("branch {j} mismatch: {existing} vs {mem}"),
                    }
                })?,
                None => mem.clone(),
            };
            next.insert(j.clone(), merged);
        }
        sum = next;
    }
    Ok(ContType { input: input.clone(), output: sum })
}

// ---------------------------------------------------------------------------
// Inhabitation
// ---------------------------------------------------------------------------

/// The zero term of a type: discard the input memory, return zero terms
/// on the least output branch. Void-output types are inhabited by a loop.
///
/// Any further output branches are joined on through never-taken case
/// handlers, so the zero term synthesizes its full sum under the
/// syntax-directed checker; the declarative system would reach the same
/// type by sum inclusion inside the derivation.
pub fn inhabit(ty: &ValueType) -> Term {
    if ty.output.is_empty() {
        let again = ValueType::new(
            ty.input.clone(),
            SumType::singleton(ChoiceLabel::Star, ty.input.clone()),
        );
        return Term::looped(inhabit(&again), ChoiceLabel::Star);
    }
    let (label, out_mem) = ty.output.branches().next().expect("nonempty sum");
    let mut t = Term::Choice(label.clone());
    // Pushes for the output memory: built inside out, so iterate locations
    // in reverse and each stack top first; the printed term then pushes
    // bottom items first.
    let out_locs: Vec<Location> = out_mem.locations().cloned().collect();
    for loc in out_locs.iter().rev() {
        for item in out_mem.stack(loc).iter().rev() {
            t = Term::push(inhabit(item), loc.clone(), t);
        }
    }
    // Non-binding pops for the input memory: the printed term pops each
    // stack top first.
    let in_locs: Vec<Location> = ty.input.locations().cloned().collect();
    for loc in in_locs.iter().rev() {
        for item in ty.input.stack(loc).iter() {
            t = Term::pop(loc.clone(), Ident::blank(), Some(item.clone()), t);
        }
    }
    // Join the remaining branches with zero handlers that are never taken.
    for (extra, mem) in ty.output.branches().skip(1) {
        let handler_ty =
            ValueType::new(MemType::empty(), SumType::singleton(extra.clone(), mem.clone()));
        t = Term::case(t, extra.clone(), inhabit(&handler_ty));
    }
    t
}

/// A memory of zero terms matching a memory type.
pub fn zero_memory(mem: &MemType) -> Memory {
    let mut out = Memory::empty();
    for (loc, stack) in mem.entries() {
        for item in &stack.0 {
            out.push(loc, inhabit(item));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------------

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_memtype(&self.input, true, f)?;
        write!(f, " => ")?;
        write!(f, "{}", self.output)
    }
}

impl fmt::Display for MemType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_memtype(self, false, f)
    }
}

fn write_memtype(m: &MemType, reversed: bool, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if m.is_empty() {
        return write!(f, "e");
    }
    let mut first = true;
    for (loc, stack) in m.entries() {
        if !first {
            write!(f, " ")?;
        }
        first = false;
        let items: Vec<&ValueType> = if reversed {
            stack.0.iter().rev().collect()
        } else {
            stack.0.iter().collect()
        };
        match loc {
            Location::Default => {
                let mut inner_first = true;
                for item in items {
                    if !inner_first {
                        write!(f, " ")?;
                    }
                    inner_first = false;
                    write!(f, "({item})")?;
                }
            }
            Location::Named(name) => {
                write!(f, "{name}(")?;
                let mut inner_first = true;
                for item in items {
                    if !inner_first {
                        write!(f, " ")?;
                    }
                    inner_first = false;
                    write!(f, "{item}")?;
                }
                write!(f, ")")?;
            }
        }
    }
    Ok(())
}

impl fmt::Display for SumType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (label, mem) in self.branches() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write_memtype(mem, false, f)?;
            write!(f, ".{label}")?;
        }
        Ok(())
    }
}

impl fmt::Display for ContType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} => {}", self.input, self.output)
    }
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

/// Parse a value type from concrete syntax.
pub fn parse_vtype(src: &str) -> Result<ValueType, ParseError> {
    let mut cur = Cursor::new(src)?;
    let t = parse_vtype_at(&mut cur)?;
    if !cur.at_end() {
        return Err(cur.err("trailing input after type"));
    }
    Ok(t)
}

pub(crate) fn parse_vtype_at(cur: &mut Cursor) -> Result<ValueType, ParseError> {
    let written = parse_memtype(cur)?;
    cur.expect(&Tok::FatArrow)?;
    let output = parse_sumtype(cur)?;
    Ok(ValueType::new(reverse_stacks(written), output))
}

fn reverse_stacks(mut m: MemType) -> MemType {
    for stack in m.0.values_mut() {
        stack.0.reverse();
    }
    m
}

fn parse_memtype(cur: &mut Cursor) -> Result<MemType, ParseError> {
    let mut m = MemType::empty();
    loop {
        match cur.peek() {
            Some(Tok::Ident(name)) if name == "e" && cur.peek2() != Some(&Tok::LParen) => {
                cur.next();
            }
            Some(Tok::Ident(_)) if cur.peek2() == Some(&Tok::LParen) => {
                let name = match cur.next() {
                    Some(Tok::Ident(n)) => n,
                    _ => unreachable!(),
                };
                let loc = Location::Named(syntax::ident(&name));
                cur.expect(&Tok::LParen)?;
                while cur.peek() != Some(&Tok::RParen) {
                    let item = parse_vtype_at(cur)?;
                    m.push_top(&loc, item);
                }
                cur.expect(&Tok::RParen)?;
            }
            Some(Tok::LParen) => {
                cur.next();
                let item = parse_vtype_at(cur)?;
                cur.expect(&Tok::RParen)?;
                m.push_top(&Location::Default, item);
            }
            _ => break,
        }
    }
    Ok(m)
}

fn parse_sumtype(cur: &mut Cursor) -> Result<SumType, ParseError> {
    if cur.eat(&Tok::Zero) {
        return Ok(SumType::empty());
    }
    let mut sum = SumType::empty();
    loop {
        let written = parse_memtype(cur)?;
        cur.expect(&Tok::Dot)?;
        let label = match cur.next() {
            Some(Tok::Star) => ChoiceLabel::Star,
            Some(Tok::ChoiceName(n)) => ChoiceLabel::Named(syntax::ident(&n)),
            _ => return Err(cur.err("expected a choice after `.` in a sum type")),
        };
        if sum.branch(&label).is_some() {
            return Err(cur.err(format!("duplicate branch {label} in sum type")));
        }
        sum.insert(label, written);
        if !cur.eat(&Tok::Plus) {
            break;
        }
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse;

    fn vt(src: &str) -> ValueType {
        parse_vtype(src).unwrap_or_else(|e| panic!("parse type {src}: {e}"))
    }

    fn synth(src: &str) -> ValueType {
        synthesize(&Context::empty(), &parse(src).unwrap())
            .unwrap_or_else(|e| panic!("synthesize {src}: {e}"))
    }

    #[test]
    fn type_round_trip() {
        for src in [
            "e => e.*",
            "e => 0",
            "a(e => e.*) => a(e => e.*).*",
            "(e => e.'i) (e => e.'j) => (e => e.'i).* + e.'err",
            "a(e => e.'i  e => e.'j) b(e => 0) => e.*",
        ] {
            let t = vt(src);
            let printed = t.to_string();
            assert_eq!(vt(&printed), t, "round trip failed: {src} -> {printed}");
        }
    }

    #[test]
    fn input_side_is_reversed() {
        // Written top-first: `(r) (s) => ...` has r on top.
        let r = vt("e => e.'r");
        let s = vt("e => e.'s");
        let t = vt("(e => e.'r) (e => e.'s) => e.*");
        assert_eq!(t.input.stack(&Location::Default), &[s.clone(), r.clone()]);
        // The printer re-reverses, so the identity shape prints as written.
        let printed = t.to_string();
        assert_eq!(printed, "(e => e.'r) (e => e.'s) => e.*");
    }

    #[test]
    fn expand_basics() {
        let t = vt("e => e.*");
        let s = MemType::singleton(Location::named("a"), vt("e => e.*"));
        let e = expand(&t, &s);
        assert_eq!(e, vt("a(e => e.*) => a(e => e.*).*"));
        assert_eq!(expand(&t, &MemType::empty()), t);
        // associativity on small types
        let s1 = MemType::singleton(Location::Default, vt("e => e.'i"));
        let s2 = MemType::singleton(Location::named("b"), vt("e => e.'j"));
        let combined = s1.stacked_on(&s2);
        assert_eq!(expand(&expand(&t, &s1), &s2), expand(&t, &combined));
    }

    #[test]
    fn include_basics() {
        let t = vt("e => e.'i");
        let extra = SumType::singleton(ChoiceLabel::named("j"), MemType::empty());
        assert_eq!(include(&t, &extra).unwrap(), vt("e => e.'i + e.'j"));
        assert_eq!(include(&t, &SumType::empty()).unwrap(), t);
        assert!(include(&t, &SumType::singleton(ChoiceLabel::named("i"), MemType::empty())).is_err());
        // include/expand commute
        let s = MemType::singleton(Location::named("a"), vt("e => e.*"));
        let expanded_extra: SumType = {
            let mut out = SumType::empty();
            for (l, m) in extra.branches() {
                out.insert(l.clone(), m.stacked_on(&s));
            }
            out
        };
        assert_eq!(
            expand(&include(&t, &extra).unwrap(), &s),
            include(&expand(&t, &s), &expanded_extra).unwrap()
        );
    }

    #[test]
    fn match_types_basics() {
        let t1 = vt("e => e.*");
        let t2 = vt("a(e => e.*) => a(e => e.*).*");
        let (e1, e2) = match_types(&t1, &t2).unwrap();
        assert_eq!(e1, MemType::singleton(Location::named("a"), vt("e => e.*")));
        assert!(e2.is_empty());
        assert_eq!(match_types(&t1, &t1).unwrap(), (MemType::empty(), MemType::empty()));
        // conflicting heads cannot be fixed by bottom expansion
        let r = vt("(e => e.'r) => e.*");
        let s = vt("(e => e.'s) => e.*");
        assert!(match_types(&r, &s).is_err());
    }

    #[test]
    fn synthesize_basics() {
        assert_eq!(synth("'i"), vt("e => e.'i"));
        assert_eq!(synth("*"), vt("e => e.*"));
        assert_eq!(synth("<x: e => e.*>.x"), vt("(e => e.*) => e.*"));
        // pushing onto an ignored location rides along
        assert_eq!(synth("['i].*"), vt("e => (e => e.'i).*"));
        // the non-terminating loop has void type
        assert_eq!(synth("('i)^'i"), vt("e => 0"));
    }

    #[test]
    fn synthesize_store_ops() {
        // lookup: a<x: t>.[x]a.[x].*  :  a(t) => a(t) (t).*
        let lookup = parse("a<x: e => e.*>.[x]a.[x].*").unwrap();
        let t = synthesize(&Context::empty(), &lookup).unwrap();
        assert_eq!(t, vt("a(e => e.*) => (e => e.*) a(e => e.*).*"));
    }

    #[test]
    fn case_composition_with_expansion() {
        // 'j ;'i-> M with i unknown to the body includes M's input branch.
        let t = synth("'j;'i->*");
        assert_eq!(t, vt("e => e.* + e.'j"));
        // select-style composition expands the handler
        let t = synth("['k].*;<x: e => e.'k>.x");
        assert_eq!(t, vt("e => e.'k"));
    }

    #[test]
    fn loop_requires_exact_branch() {
        // body: e => e.'i + (t).*  — looping on * fails (branch not equal to input)
        let body = parse("['k].'i;'i->'i").unwrap();
        let tb = synthesize(&Context::empty(), &body).unwrap();
        assert_eq!(tb, vt("e => (e => e.'k).'i"));
        let looped = Term::looped(body, ChoiceLabel::named("i"));
        assert!(matches!(
            synthesize(&Context::empty(), &looped),
            Err(TypeError::LoopMismatch { .. })
        ));
    }

    #[test]
    fn subsume_and_check() {
        assert!(subsume(&vt("e => e.*"), &vt("a(e => e.*) => a(e => e.*).*")));
        assert!(subsume(&vt("e => e.*"), &vt("e => e.*")));
        assert!(!subsume(&vt("e => e.'i"), &vt("e => e.'j")));
        // identity `*` against an expanded goal
        let goal = vt("(e => e.'i) => (e => e.'i).*");
        assert!(check(&Context::empty(), &parse("*").unwrap(), &goal).is_ok());
        assert!(check(&Context::empty(), &parse("'i").unwrap(), &vt("e => e.'j")).is_err());
        // inclusion into a larger sum
        assert!(subsume(&vt("e => e.'i"), &vt("e => e.'i + e.'j")));
    }

    #[test]
    fn unannotated_binder_is_rejected() {
        assert!(matches!(
            synthesize(&Context::empty(), &parse("<x>.x").unwrap()),
            Err(TypeError::UnannotatedBinder { .. })
        ));
    }

    #[test]
    fn inhabit_basics() {
        assert_eq!(inhabit(&vt("e => e.'i")), parse("'i").unwrap());
        let t = vt("(e => e.*) => e.*");
        let z = inhabit(&t);
        assert!(z.alpha_eq(&parse("<_>.*").unwrap()));
        assert!(check(&Context::empty(), &z, &t).is_ok());
        // void output becomes a loop
        let v = inhabit(&vt("e => 0"));
        assert!(v.alpha_eq(&parse("(*)^*").unwrap()));
        assert!(check(&Context::empty(), &v, &vt("e => 0")).is_ok());
    }

    #[test]
    fn inhabit_checks_at_its_type() {
        for src in [
            "e => e.*",
            "e => 0",
            "a(e => e.'i) => e.'i + e.'j",
            "(e => e.'i) a(e => e.*) => a(e => e.*  e => e.*).'k",
            "(e => 0) => (e => 0).*",
        ] {
            let ty = vt(src);
            let z = inhabit(&ty);
            check(&Context::empty(), &z, &ty)
                .unwrap_or_else(|e| panic!("inhabit({src}) = {z} does not check: {e}"));
        }
    }
}
