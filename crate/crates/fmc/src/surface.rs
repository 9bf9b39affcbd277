//! The imperative/functional surface language and its macro-expansion
//! into core terms.
//!
//! Statements cover store, printing, conditionals, while/do-while loops
//! with break, exceptions, returns, and case switches over bounded
//! integers. Expressions cover constants, booleans, dereference, stream
//! reads, sampling, `+` and `<` over a configurable modulus, and a
//! call-by-value lambda fragment (variables, lambdas, application, let,
//! return). Call-by-name data constructors and pattern cases are
//! available through the API.
//!
//! The encodings are pure macro expansion:
//!
//! ```text
//! c := E            E ; <v>.c<_>.[v]c.*
//! !c                c<x>.[x]c.[x].*
//! print E           E ; <v>.[v]out.*
//! throw e           'e
//! try S catch e H   S ;'e-> H
//! if B then M else N    B ; <x>.x ;'tt-> M ;'ff-> N
//! while B do S      (B ; <x>.x ;'tt-> S)^* ;'ff-> * ;'break-> *
//! do S while B      (S ; B ; <x>.x)^'tt ;'ff-> * ;'break-> *
//! ```
//!
//! Bounded integers are a finite family of choices `'n0 .. 'n(m-1)`;
//! constants push a widened choice term so that every constant carries
//! the full integer sum type, and the generated `+` and `<` operators are
//! nested case switches over the constants.

use std::collections::BTreeSet;
use std::fmt;

use crate::syntax::{ident, ChoiceLabel, Ident, Location, ParseError, Term};
use crate::types::{MemType, SumType, ValueType};

/// Statements of the imperative fragment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    Skip,
    Assign(Ident, Expr),
    Print(Expr),
    Seq(Box<Stmt>, Box<Stmt>),
    If(Expr, Box<Stmt>, Box<Stmt>),
    While(Expr, Box<Stmt>),
    DoWhile(Box<Stmt>, Expr),
    Try(Box<Stmt>, Ident, Box<Stmt>),
    Throw(Ident),
    Break,
    Return(Expr),
    CaseOf(Expr, Vec<(u32, Stmt)>),
}

/// Expressions. The lambda fragment desugars without annotations and is
/// exercised through the machine; the first-order fragment is annotated
/// and typeable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Const(u32),
    True,
    False,
    Deref(Ident),
    Read,
    Sample,
    BinOp(BinOp, Box<Expr>, Box<Expr>),
    Var(Ident),
    Lam(Ident, Box<Expr>),
    App(Box<Expr>, Box<Expr>),
    Let(Ident, Box<Expr>, Box<Expr>),
    Return(Box<Expr>),
    Ctor(Ident, Vec<Expr>),
    CaseData(Box<Expr>, Vec<DataBranch>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Less,
}

/// One arm of a call-by-name data case: `ctor x1 .. xn -> body`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataBranch {
    pub ctor: Ident,
    pub params: Vec<Ident>,
    pub body: Expr,
}

/// A call-by-name datatype: constructor names with arities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataDecl {
    pub name: Ident,
    pub ctors: Vec<(Ident, usize)>,
}

/// Bounded-integer configuration: constants are the choices
/// `'n0 .. 'n(modulus-1)` and `+` wraps around.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntConfig {
    pub modulus: u32,
}

impl Default for IntConfig {
    fn default() -> Self {
        IntConfig { modulus: 8 }
    }
}

#[derive(Debug, Clone, Default)]
pub struct DesugarConfig {
    pub ints: IntConfig,
    /// Evaluate the function before the argument in cbv application.
    pub cbv_function_first: bool,
    pub data: Vec<DataDecl>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SurfaceError {
    #[error("integer modulus must be at least 2, got {0}")]
    BadModulus(u32),
    #[error("constant {value} is out of range for modulus {modulus}")]
    ConstOutOfRange { value: u32, modulus: u32 },
    #[error("label `{label}` clashes with {with}")]
    LabelClash { label: String, with: String },
    #[error("constructor `{ctor}` expects {expected} arguments, got {found}")]
    ArityMismatch { ctor: Ident, expected: usize, found: usize },
    #[error("unknown constructor `{0}`")]
    UnknownCtor(Ident),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

// Reserved choice labels of the encodings.
const BOOL_TRUE: &str = "tt";
const BOOL_FALSE: &str = "ff";
const BREAK_LABEL: &str = "break";
const RETURN_LABEL: &str = "ret";

fn int_label(k: u32) -> ChoiceLabel {
    ChoiceLabel::named(&format!("n{k}"))
}

fn reserved_labels(modulus: u32) -> BTreeSet<String> {
    let mut s: BTreeSet<String> = [BOOL_TRUE, BOOL_FALSE, BREAK_LABEL, RETURN_LABEL]
        .into_iter()
        .map(str::to_string)
        .collect();
    for k in 0..modulus {
        s.insert(format!("n{k}"));
    }
    s
}

// ---------------------------------------------------------------------------
// Generated integer operators
// ---------------------------------------------------------------------------

/// Generated arithmetic: operator terms and the integer and boolean
/// types for a given modulus.
#[derive(Debug, Clone)]
pub struct IntOps {
    pub modulus: u32,
    pub plus: Term,
    pub less: Term,
    pub int_type: ValueType,
    pub bool_type: ValueType,
}

impl IntOps {
    /// The widened constant term for `k`: the bare choice would
    /// synthesize a single-branch sum, so constants are chained through
    /// a case per label to carry the full integer type.
    pub fn const_value(&self, k: u32) -> Term {
        widen(Term::Choice(int_label(k)), &int_labels(self.modulus))
    }

    pub fn bool_value(&self, b: bool) -> Term {
        let base = if b { BOOL_TRUE } else { BOOL_FALSE };
        widen(Term::choice(base), &bool_labels())
    }

    /// `[const].*`, the expression form of a constant.
    pub fn const_expr(&self, k: u32) -> Term {
        Term::push(self.const_value(k), Location::Default, Term::star())
    }
}

fn int_labels(modulus: u32) -> Vec<ChoiceLabel> {
    (0..modulus).map(int_label).collect()
}

fn bool_labels() -> Vec<ChoiceLabel> {
    vec![ChoiceLabel::named(BOOL_FALSE), ChoiceLabel::named(BOOL_TRUE)]
}

fn widen(base: Term, labels: &[ChoiceLabel]) -> Term {
    labels.iter().fold(base, |t, l| Term::case(t, l.clone(), Term::Choice(l.clone())))
}

fn sum_of_labels(labels: &[ChoiceLabel]) -> SumType {
    let mut s = SumType::empty();
    for l in labels {
        s.insert(l.clone(), MemType::empty());
    }
    s
}

/// Build the operator terms for a modulus: nested case switches over the
/// constants. Both operands are taken from the default stack, second
/// operand on top (reverse Polish order).
pub fn gen_intops(cfg: &IntConfig) -> Result<IntOps, SurfaceError> {
    let m = cfg.modulus;
    if m < 2 {
        return Err(SurfaceError::BadModulus(m));
    }
    let int_type = ValueType::new(MemType::empty(), sum_of_labels(&int_labels(m)));
    let bool_type = ValueType::new(MemType::empty(), sum_of_labels(&bool_labels()));

    // dispatch: <x: ty>.x ; l0 -> arm(0) ; l1 -> arm(1) ; ...
    let dispatch = |ty: &ValueType, arm: &dyn Fn(u32) -> Term| -> Term {
        let x = ident("x");
        let head = Term::pop(Location::Default, x.clone(), Some(ty.clone()), Term::Var(x));
        (0..m).fold(head, |t, k| Term::case(t, int_label(k), arm(k)))
    };
    // The top of the stack is the second operand, so the outer dispatch
    // sees it first. Arms push the result constant and exit with the
    // default choice; exiting with a constant label would feed the later
    // cases of the enclosing switch.
    let ops = IntOps { modulus: m, plus: Term::star(), less: Term::star(), int_type, bool_type };
    let plus = dispatch(&ops.int_type, &|second| {
        dispatch(&ops.int_type, &|first| {
            Term::push(ops.const_value((first + second) % m), Location::Default, Term::star())
        })
    });
    let less = dispatch(&ops.int_type, &|second| {
        dispatch(&ops.int_type, &|first| {
            Term::push(ops.bool_value(first < second), Location::Default, Term::star())
        })
    });
    Ok(IntOps { plus, less, ..ops })
}

// ---------------------------------------------------------------------------
// Desugaring
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SurfTy {
    Int,
    Bool,
}

struct Desugarer {
    ops: IntOps,
    cfg: DesugarConfig,
}

/// Macro-expand a surface program into a core term.
///
/// Assignments on the straight-line spine of the program initialize
/// fresh cells (plain push); all other assignments are updates
/// (pop-then-push) and need the cell initialized or preloaded.
pub fn desugar(program: &Stmt, cfg: &DesugarConfig) -> Result<Term, SurfaceError> {
    let d = Desugarer { ops: gen_intops(&cfg.ints)?, cfg: cfg.clone() };
    d.check_labels(program)?;
    let mut initialized = BTreeSet::new();
    d.stmt(program, &mut initialized, true)
}

/// Desugar a single expression (the call-by-value embedding).
pub fn desugar_cbv(expr: &Expr, cfg: &DesugarConfig) -> Result<Term, SurfaceError> {
    let d = Desugarer { ops: gen_intops(&cfg.ints)?, cfg: cfg.clone() };
    d.check_expr_labels(expr)?;
    Ok(d.expr(expr)?.0)
}

/// Desugar an expression against a call-by-name datatype declaration.
pub fn desugar_cbn_data(decl: &DataDecl, expr: &Expr, cfg: &DesugarConfig) -> Result<Term, SurfaceError> {
    let mut cfg = cfg.clone();
    cfg.data.push(decl.clone());
    desugar_cbv(expr, &cfg)
}

impl Desugarer {
    fn m(&self) -> u32 {
        self.ops.modulus
    }

    fn check_labels(&self, s: &Stmt) -> Result<(), SurfaceError> {
        let mut exceptions = BTreeSet::new();
        let mut ctors = BTreeSet::new();
        collect_stmt_labels(s, &mut exceptions, &mut ctors);
        self.check_label_sets(&exceptions, &ctors)
    }

    fn check_expr_labels(&self, e: &Expr) -> Result<(), SurfaceError> {
        let mut exceptions = BTreeSet::new();
        let mut ctors = BTreeSet::new();
        collect_expr_labels(e, &mut exceptions, &mut ctors);
        for decl in &self.cfg.data {
            for (c, _) in &decl.ctors {
                ctors.insert(c.clone());
            }
        }
        self.check_label_sets(&exceptions, &ctors)
    }

    fn check_label_sets(
        &self,
        exceptions: &BTreeSet<Ident>,
        ctors: &BTreeSet<Ident>,
    ) -> Result<(), SurfaceError> {
        let reserved = reserved_labels(self.m());
        for e in exceptions {
            if reserved.contains(e.as_str()) {
                return Err(SurfaceError::LabelClash {
                    label: e.to_string(),
                    with: "a reserved label".to_string(),
                });
            }
            if ctors.contains(e) {
                return Err(SurfaceError::LabelClash {
                    label: e.to_string(),
                    with: "a constructor label".to_string(),
                });
            }
        }
        for c in ctors {
            if reserved.contains(c.as_str()) {
                return Err(SurfaceError::LabelClash {
                    label: c.to_string(),
                    with: "a reserved label".to_string(),
                });
            }
        }
        Ok(())
    }

    fn find_ctor(&self, name: &Ident) -> Result<usize, SurfaceError> {
        for decl in &self.cfg.data {
            for (c, arity) in &decl.ctors {
                if c == name {
                    return Ok(*arity);
                }
            }
        }
        Err(SurfaceError::UnknownCtor(name.clone()))
    }

    fn ty_term(&self, ty: SurfTy) -> ValueType {
        match ty {
            SurfTy::Int => self.ops.int_type.clone(),
            SurfTy::Bool => self.ops.bool_type.clone(),
        }
    }

    fn stmt(
        &self,
        s: &Stmt,
        initialized: &mut BTreeSet<Ident>,
        straight: bool,
    ) -> Result<Term, SurfaceError> {
        let int_ty = self.ops.int_type.clone();
        Ok(match s {
            Stmt::Skip => Term::star(),
            Stmt::Seq(p, q) => {
                let p = self.stmt(p, initialized, straight)?;
                let q = self.stmt(q, initialized, straight)?;
                Term::seq(p, q)
            }
            Stmt::Assign(cell, e) => {
                let (value, _) = self.expr(e)?;
                let loc = Location::Named(cell.clone());
                let v = ident("v");
                let store = Term::push(Term::Var(v.clone()), loc.clone(), Term::star());
                let rest = if straight && !initialized.contains(cell) {
                    initialized.insert(cell.clone());
                    store
                } else {
                    Term::pop(loc, Ident::blank(), Some(int_ty.clone()), store)
                };
                Term::seq(value, Term::pop(Location::Default, v, Some(int_ty), rest))
            }
            Stmt::Print(e) => {
                let (value, ty) = self.expr(e)?;
                let v = ident("v");
                let out = Term::push(
                    Term::Var(v.clone()),
                    Location::named("out"),
                    Term::star(),
                );
                Term::seq(value, Term::pop(Location::Default, v, ty.map(|t| self.ty_term(t)), out))
            }
            Stmt::If(cond, s1, s2) => {
                let branch_true = self.stmt(s1, initialized, false)?;
                let branch_false = self.stmt(s2, initialized, false)?;
                let scrut = self.run_condition(cond)?;
                Term::case(
                    Term::case(scrut, ChoiceLabel::named(BOOL_TRUE), branch_true),
                    ChoiceLabel::named(BOOL_FALSE),
                    branch_false,
                )
            }
            Stmt::While(cond, body) => {
                let body = self.stmt(body, initialized, false)?;
                let scrut = self.run_condition(cond)?;
                let looped = Term::looped(
                    Term::case(scrut, ChoiceLabel::named(BOOL_TRUE), body),
                    ChoiceLabel::Star,
                );
                self.catch_loop_exits(looped)
            }
            Stmt::DoWhile(body, cond) => {
                let body = self.stmt(body, initialized, false)?;
                let scrut = self.run_condition(cond)?;
                let looped = Term::looped(
                    Term::seq(body, scrut),
                    ChoiceLabel::named(BOOL_TRUE),
                );
                self.catch_loop_exits(looped)
            }
            Stmt::Try(body, exc, handler) => {
                let body = self.stmt(body, initialized, false)?;
                let handler = self.stmt(handler, initialized, false)?;
                Term::case(body, ChoiceLabel::Named(exc.clone()), handler)
            }
            Stmt::Throw(exc) => Term::Choice(ChoiceLabel::Named(exc.clone())),
            Stmt::Break => Term::choice(BREAK_LABEL),
            Stmt::Return(e) => {
                let (value, _) = self.expr(e)?;
                Term::push(value, Location::Default, Term::choice(RETURN_LABEL))
            }
            Stmt::CaseOf(scrut, arms) => {
                let (value, _) = self.expr(scrut)?;
                let x = ident("x");
                let head = Term::seq(
                    value,
                    Term::pop(
                        Location::Default,
                        x.clone(),
                        Some(self.ops.int_type.clone()),
                        Term::Var(x),
                    ),
                );
                let mut t = head;
                for (k, arm) in arms {
                    if *k >= self.m() {
                        return Err(SurfaceError::ConstOutOfRange { value: *k, modulus: self.m() });
                    }
                    let arm = self.stmt(arm, initialized, false)?;
                    t = Term::case(t, int_label(*k), arm);
                }
                t
            }
        })
    }

    /// `B ; <x: bool>.x`, leaving the machine on the condition's branch.
    fn run_condition(&self, cond: &Expr) -> Result<Term, SurfaceError> {
        let (value, _) = self.expr(cond)?;
        let x = ident("x");
        Ok(Term::seq(
            value,
            Term::pop(Location::Default, x.clone(), Some(self.ops.bool_type.clone()), Term::Var(x)),
        ))
    }

    /// Catch the false exit and break: `T ;'ff-> * ;'break-> *`.
    fn catch_loop_exits(&self, t: Term) -> Term {
        Term::case(
            Term::case(t, ChoiceLabel::named(BOOL_FALSE), Term::star()),
            ChoiceLabel::named(BREAK_LABEL),
            Term::star(),
        )
    }

    fn expr(&self, e: &Expr) -> Result<(Term, Option<SurfTy>), SurfaceError> {
        let int_ty = self.ops.int_type.clone();
        Ok(match e {
            Expr::Const(k) => {
                if *k >= self.m() {
                    return Err(SurfaceError::ConstOutOfRange { value: *k, modulus: self.m() });
                }
                (self.ops.const_expr(*k), Some(SurfTy::Int))
            }
            Expr::True => (
                Term::push(self.ops.bool_value(true), Location::Default, Term::star()),
                Some(SurfTy::Bool),
            ),
            Expr::False => (
                Term::push(self.ops.bool_value(false), Location::Default, Term::star()),
                Some(SurfTy::Bool),
            ),
            Expr::Deref(cell) => {
                let loc = Location::Named(cell.clone());
                let x = ident("x");
                let t = Term::pop(
                    loc.clone(),
                    x.clone(),
                    Some(int_ty),
                    Term::push(
                        Term::Var(x.clone()),
                        loc,
                        Term::push(Term::Var(x), Location::Default, Term::star()),
                    ),
                );
                (t, Some(SurfTy::Int))
            }
            Expr::Read => (self.stream_read("in"), Some(SurfTy::Int)),
            Expr::Sample => (self.stream_read("rnd"), Some(SurfTy::Int)),
            Expr::BinOp(op, a, b) => {
                let (ta, _) = self.expr(a)?;
                let (tb, _) = self.expr(b)?;
                let (opterm, ty) = match op {
                    BinOp::Add => (self.ops.plus.clone(), SurfTy::Int),
                    BinOp::Less => (self.ops.less.clone(), SurfTy::Bool),
                };
                (Term::seq(Term::seq(ta, tb), opterm), Some(ty))
            }
            Expr::Var(x) => (
                Term::push(Term::Var(x.clone()), Location::Default, Term::star()),
                None,
            ),
            Expr::Lam(x, body) => {
                let (body, _) = self.expr(body)?;
                (
                    Term::push(
                        Term::pop(Location::Default, x.clone(), None, body),
                        Location::Default,
                        Term::star(),
                    ),
                    None,
                )
            }
            Expr::App(f, a) => {
                let (tf, _) = self.expr(f)?;
                let (ta, _) = self.expr(a)?;
                let t = if self.cfg.cbv_function_first {
                    // F ; A ; <y>.<x>.[y].x
                    let (x, y) = (ident("x"), ident("y"));
                    Term::seq(
                        Term::seq(tf, ta),
                        Term::pop(
                            Location::Default,
                            y.clone(),
                            None,
                            Term::pop(
                                Location::Default,
                                x.clone(),
                                None,
                                Term::push(Term::Var(y), Location::Default, Term::Var(x)),
                            ),
                        ),
                    )
                } else {
                    // A ; F ; <x>.x
                    let x = ident("x");
                    Term::seq(
                        Term::seq(ta, tf),
                        Term::pop(Location::Default, x.clone(), None, Term::Var(x)),
                    )
                };
                (t, None)
            }
            Expr::Let(x, e1, e2) => {
                let (t1, _) = self.expr(e1)?;
                let (t2, ty) = self.expr(e2)?;
                (
                    Term::seq(t1, Term::pop(Location::Default, x.clone(), None, t2)),
                    ty,
                )
            }
            Expr::Return(inner) => {
                let (t, _) = self.expr(inner)?;
                (Term::push(t, Location::Default, Term::star()), None)
            }
            Expr::Ctor(name, args) => {
                let arity = self.find_ctor(name)?;
                if args.len() != arity {
                    return Err(SurfaceError::ArityMismatch {
                        ctor: name.clone(),
                        expected: arity,
                        found: args.len(),
                    });
                }
                // i M1..Mm  =  [Mm]..[M1].'i  (first argument on top)
                let mut t = Term::Choice(ChoiceLabel::Named(name.clone()));
                for arg in args {
                    let (ta, _) = self.expr(arg)?;
                    t = Term::push(ta, Location::Default, t);
                }
                (t, None)
            }
            Expr::CaseData(scrut, branches) => {
                let (ts, _) = self.expr(scrut)?;
                let mut t = ts;
                for branch in branches {
                    let arity = self.find_ctor(&branch.ctor)?;
                    if branch.params.len() != arity {
                        return Err(SurfaceError::ArityMismatch {
                            ctor: branch.ctor.clone(),
                            expected: arity,
                            found: branch.params.len(),
                        });
                    }
                    let (body, _) = self.expr(&branch.body)?;
                    // <x1>..<xn>.[body].*
                    let mut arm = Term::push(body, Location::Default, Term::star());
                    for param in branch.params.iter().rev() {
                        arm = Term::pop(Location::Default, param.clone(), None, arm);
                    }
                    t = Term::case(t, ChoiceLabel::Named(branch.ctor.clone()), arm);
                }
                // Pop and force the selected arm.
                let x = ident("x");
                (
                    Term::seq(t, Term::pop(Location::Default, x.clone(), None, Term::Var(x))),
                    None,
                )
            }
        })
    }

    fn stream_read(&self, loc: &str) -> Term {
        let x = ident("x");
        Term::pop(
            Location::named(loc),
            x.clone(),
            Some(self.ops.int_type.clone()),
            Term::push(Term::Var(x), Location::Default, Term::star()),
        )
    }
}

fn collect_stmt_labels(s: &Stmt, exceptions: &mut BTreeSet<Ident>, ctors: &mut BTreeSet<Ident>) {
    match s {
        Stmt::Skip | Stmt::Break => {}
        Stmt::Assign(_, e) | Stmt::Print(e) | Stmt::Return(e) => {
            collect_expr_labels(e, exceptions, ctors)
        }
        Stmt::Seq(p, q) => {
            collect_stmt_labels(p, exceptions, ctors);
            collect_stmt_labels(q, exceptions, ctors);
        }
        Stmt::If(e, a, b) => {
            collect_expr_labels(e, exceptions, ctors);
            collect_stmt_labels(a, exceptions, ctors);
            collect_stmt_labels(b, exceptions, ctors);
        }
        Stmt::While(e, b) => {
            collect_expr_labels(e, exceptions, ctors);
            collect_stmt_labels(b, exceptions, ctors);
        }
        Stmt::DoWhile(b, e) => {
            collect_stmt_labels(b, exceptions, ctors);
            collect_expr_labels(e, exceptions, ctors);
        }
        Stmt::Try(b, exc, h) => {
            exceptions.insert(exc.clone());
            collect_stmt_labels(b, exceptions, ctors);
            collect_stmt_labels(h, exceptions, ctors);
        }
        Stmt::Throw(exc) => {
            exceptions.insert(exc.clone());
        }
        Stmt::CaseOf(e, arms) => {
            collect_expr_labels(e, exceptions, ctors);
            for (_, arm) in arms {
                collect_stmt_labels(arm, exceptions, ctors);
            }
        }
    }
}

fn collect_expr_labels(e: &Expr, exceptions: &mut BTreeSet<Ident>, ctors: &mut BTreeSet<Ident>) {
    match e {
        Expr::Const(_) | Expr::True | Expr::False | Expr::Deref(_) | Expr::Read | Expr::Sample
        | Expr::Var(_) => {}
        Expr::BinOp(_, a, b) | Expr::App(a, b) => {
            collect_expr_labels(a, exceptions, ctors);
            collect_expr_labels(b, exceptions, ctors);
        }
        Expr::Lam(_, b) | Expr::Return(b) => collect_expr_labels(b, exceptions, ctors),
        Expr::Let(_, a, b) => {
            collect_expr_labels(a, exceptions, ctors);
            collect_expr_labels(b, exceptions, ctors);
        }
        Expr::Ctor(name, args) => {
            ctors.insert(name.clone());
            for a in args {
                collect_expr_labels(a, exceptions, ctors);
            }
        }
        Expr::CaseData(scrut, branches) => {
            collect_expr_labels(scrut, exceptions, ctors);
            for b in branches {
                ctors.insert(b.ctor.clone());
                collect_expr_labels(&b.body, exceptions, ctors);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Surface parser
// ---------------------------------------------------------------------------

/// Parse a surface program.
///
/// Statements separate with `;`; compound statement bodies are either a
/// single statement or a braced block. Keywords: `skip`, `if/then/else`,
/// `while/do`, `do/while`, `try/catch`, `throw`, `break`, `return`,
/// `case/of`, `let/in`, `print`, `read`, `sample`, `true`, `false`;
/// assignment is `c := e` and dereference `!c`. Lambdas are
/// `\x -> e`, application is juxtaposition, operators are `+` and `<`.
pub fn parse_program(src: &str) -> Result<Stmt, SurfaceError> {
    let toks = slex(src)?;
    let mut p = SParser { toks, pos: 0 };
    let s = p.stmt_seq()?;
    if p.pos < p.toks.len() {
        return Err(p.err("trailing input after program").into());
    }
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum STok {
    Kw(&'static str),
    Ident(String),
    Num(u32),
    Sym(&'static str),
}

impl fmt::Display for STok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            STok::Kw(k) => write!(f, "`{k}`"),
            STok::Ident(s) => write!(f, "`{s}`"),
            STok::Num(n) => write!(f, "`{n}`"),
            STok::Sym(s) => write!(f, "`{s}`"),
        }
    }
}

const KEYWORDS: &[&str] = &[
    "skip", "if", "then", "else", "while", "do", "try", "catch", "throw", "break", "return",
    "case", "of", "let", "in", "print", "read", "sample", "true", "false",
];

fn slex(src: &str) -> Result<Vec<(STok, usize, usize)>, ParseError> {
    let mut out = Vec::new();
    let mut line = 1;
    let mut col = 1;
    let mut it = src.chars().peekable();
    let bump = |it: &mut std::iter::Peekable<std::str::Chars>, line: &mut usize, col: &mut usize| {
        let c = it.next().unwrap();
        if c == '\n' {
            *line += 1;
            *col = 1;
        } else {
            *col += 1;
        }
        c
    };
    while let Some(&c) = it.peek() {
        let (tl, tc) = (line, col);
        match c {
            ' ' | '\t' | '\r' | '\n' => {
                bump(&mut it, &mut line, &mut col);
            }
            '-' => {
                bump(&mut it, &mut line, &mut col);
                match it.peek() {
                    Some('-') => {
                        while let Some(&c2) = it.peek() {
                            if c2 == '\n' {
                                break;
                            }
                            bump(&mut it, &mut line, &mut col);
                        }
                    }
                    Some('>') => {
                        bump(&mut it, &mut line, &mut col);
                        out.push((STok::Sym("->"), tl, tc));
                    }
                    _ => return Err(ParseError::new(tl, tc, "expected `--` or `->` after `-`")),
                }
            }
            ':' => {
                bump(&mut it, &mut line, &mut col);
                if it.peek() == Some(&'=') {
                    bump(&mut it, &mut line, &mut col);
                    out.push((STok::Sym(":="), tl, tc));
                } else {
                    return Err(ParseError::new(tl, tc, "expected `:=`"));
                }
            }
            ';' | '!' | '+' | '<' | '(' | ')' | '{' | '}' | '|' | '\\' | '=' => {
                bump(&mut it, &mut line, &mut col);
                let sym = match c {
                    ';' => ";",
                    '!' => "!",
                    '+' => "+",
                    '<' => "<",
                    '(' => "(",
                    ')' => ")",
                    '{' => "{",
                    '}' => "}",
                    '|' => "|",
                    '\\' => "\\",
                    '=' => "=",
                    _ => unreachable!(),
                };
                out.push((STok::Sym(sym), tl, tc));
            }
            c if c.is_ascii_digit() => {
                let mut n = String::new();
                while let Some(&c2) = it.peek() {
                    if c2.is_ascii_digit() {
                        n.push(bump(&mut it, &mut line, &mut col));
                    } else {
                        break;
                    }
                }
                let value: u32 = n
                    .parse()
                    .map_err(|_| ParseError::new(tl, tc, format!("number out of range: {n}")))?;
                out.push((STok::Num(value), tl, tc));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut name = String::new();
                while let Some(&c2) = it.peek() {
                    if c2.is_ascii_alphanumeric() || c2 == '_' || c2 == '\'' {
                        name.push(bump(&mut it, &mut line, &mut col));
                    } else {
                        break;
                    }
                }
                match KEYWORDS.iter().find(|k| **k == name) {
                    Some(k) => out.push((STok::Kw(k), tl, tc)),
                    None => out.push((STok::Ident(name), tl, tc)),
                }
            }
            other => {
                return Err(ParseError::new(tl, tc, format!("unexpected character `{other}`")))
            }
        }
    }
    Ok(out)
}

struct SParser {
    toks: Vec<(STok, usize, usize)>,
    pos: usize,
}

impl SParser {
    fn peek(&self) -> Option<&STok> {
        self.toks.get(self.pos).map(|(t, _, _)| t)
    }

    fn next(&mut self) -> Option<STok> {
        let t = self.toks.get(self.pos).map(|(t, _, _)| t.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, t: &STok) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: &STok) -> Result<(), ParseError> {
        let e = self.err(format!("expected {t}"));
        match self.next() {
            Some(got) if &got == t => Ok(()),
            Some(got) => Err(ParseError::new(e.line, e.col, format!("expected {t}, found {got}"))),
            None => Err(ParseError::new(e.line, e.col, format!("expected {t}, found end of input"))),
        }
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        let (l, c) = self
            .toks
            .get(self.pos)
            .map(|(_, l, c)| (*l, *c))
            .unwrap_or_else(|| self.toks.last().map(|(_, l, c)| (*l, *c + 1)).unwrap_or((1, 1)));
        ParseError::new(l, c, msg)
    }

    fn ident(&mut self) -> Result<Ident, ParseError> {
        let e = self.err("expected an identifier");
        match self.next() {
            Some(STok::Ident(n)) => Ok(ident(&n)),
            Some(got) => {
                Err(ParseError::new(e.line, e.col, format!("expected an identifier, found {got}")))
            }
            None => Err(e),
        }
    }

    fn stmt_seq(&mut self) -> Result<Stmt, ParseError> {
        let mut s = self.basic()?;
        while self.eat(&STok::Sym(";")) {
            let next = self.basic()?;
            s = Stmt::Seq(Box::new(s), Box::new(next));
        }
        Ok(s)
    }

    fn block(&mut self) -> Result<Stmt, ParseError> {
        if self.eat(&STok::Sym("{")) {
            let s = self.stmt_seq()?;
            self.expect(&STok::Sym("}"))?;
            Ok(s)
        } else {
            self.basic()
        }
    }

    fn basic(&mut self) -> Result<Stmt, ParseError> {
        match self.peek() {
            Some(STok::Kw("skip")) => {
                self.next();
                Ok(Stmt::Skip)
            }
            Some(STok::Kw("print")) => {
                self.next();
                Ok(Stmt::Print(self.expr()?))
            }
            Some(STok::Kw("throw")) => {
                self.next();
                Ok(Stmt::Throw(self.ident()?))
            }
            Some(STok::Kw("break")) => {
                self.next();
                Ok(Stmt::Break)
            }
            Some(STok::Kw("return")) => {
                self.next();
                Ok(Stmt::Return(self.expr()?))
            }
            Some(STok::Kw("if")) => {
                self.next();
                let cond = self.expr()?;
                self.expect(&STok::Kw("then"))?;
                let a = self.block()?;
                self.expect(&STok::Kw("else"))?;
                let b = self.block()?;
                Ok(Stmt::If(cond, Box::new(a), Box::new(b)))
            }
            Some(STok::Kw("while")) => {
                self.next();
                let cond = self.expr()?;
                self.expect(&STok::Kw("do"))?;
                let body = self.block()?;
                Ok(Stmt::While(cond, Box::new(body)))
            }
            Some(STok::Kw("do")) => {
                self.next();
                let body = self.block()?;
                self.expect(&STok::Kw("while"))?;
                let cond = self.expr()?;
                Ok(Stmt::DoWhile(Box::new(body), cond))
            }
            Some(STok::Kw("try")) => {
                self.next();
                let body = self.block()?;
                self.expect(&STok::Kw("catch"))?;
                let exc = self.ident()?;
                let handler = self.block()?;
                Ok(Stmt::Try(Box::new(body), exc, Box::new(handler)))
            }
            Some(STok::Kw("case")) => {
                self.next();
                let scrut = self.expr()?;
                self.expect(&STok::Kw("of"))?;
                self.expect(&STok::Sym("{"))?;
                let mut arms = Vec::new();
                loop {
                    let k = match self.next() {
                        Some(STok::Num(k)) => k,
                        _ => return Err(self.err("expected a constant in a case arm")),
                    };
                    self.expect(&STok::Sym("->"))?;
                    let arm = self.block()?;
                    arms.push((k, arm));
                    if !self.eat(&STok::Sym("|")) {
                        break;
                    }
                }
                self.expect(&STok::Sym("}"))?;
                Ok(Stmt::CaseOf(scrut, arms))
            }
            Some(STok::Sym("{")) => self.block(),
            Some(STok::Ident(_)) => {
                let cell = self.ident()?;
                self.expect(&STok::Sym(":="))?;
                Ok(Stmt::Assign(cell, self.expr()?))
            }
            _ => Err(self.err("expected a statement")),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(STok::Sym("\\")) => {
                self.next();
                let x = self.ident()?;
                self.expect(&STok::Sym("->"))?;
                let body = self.expr()?;
                Ok(Expr::Lam(x, Box::new(body)))
            }
            Some(STok::Kw("let")) => {
                self.next();
                let x = self.ident()?;
                self.expect(&STok::Sym("="))?;
                let e1 = self.expr()?;
                self.expect(&STok::Kw("in"))?;
                let e2 = self.expr()?;
                Ok(Expr::Let(x, Box::new(e1), Box::new(e2)))
            }
            Some(STok::Kw("return")) => {
                self.next();
                let e = self.expr()?;
                Ok(Expr::Return(Box::new(e)))
            }
            _ => self.cmp(),
        }
    }

    fn cmp(&mut self) -> Result<Expr, ParseError> {
        let a = self.sum()?;
        if self.eat(&STok::Sym("<")) {
            let b = self.sum()?;
            Ok(Expr::BinOp(BinOp::Less, Box::new(a), Box::new(b)))
        } else {
            Ok(a)
        }
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut a = self.app()?;
        while self.eat(&STok::Sym("+")) {
            let b = self.app()?;
            a = Expr::BinOp(BinOp::Add, Box::new(a), Box::new(b));
        }
        Ok(a)
    }

    fn app(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.atom()?;
        while self.starts_atom() {
            let arg = self.atom()?;
            e = Expr::App(Box::new(e), Box::new(arg));
        }
        Ok(e)
    }

    fn starts_atom(&self) -> bool {
        matches!(
            self.peek(),
            Some(STok::Num(_))
                | Some(STok::Ident(_))
                | Some(STok::Sym("("))
                | Some(STok::Sym("!"))
                | Some(STok::Kw("true"))
                | Some(STok::Kw("false"))
                | Some(STok::Kw("read"))
                | Some(STok::Kw("sample"))
        )
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.next() {
            Some(STok::Num(k)) => Ok(Expr::Const(k)),
            Some(STok::Kw("true")) => Ok(Expr::True),
            Some(STok::Kw("false")) => Ok(Expr::False),
            Some(STok::Kw("read")) => Ok(Expr::Read),
            Some(STok::Kw("sample")) => Ok(Expr::Sample),
            Some(STok::Sym("!")) => Ok(Expr::Deref(self.ident()?)),
            Some(STok::Ident(n)) => Ok(Expr::Var(ident(&n))),
            Some(STok::Sym("(")) => {
                let e = self.expr()?;
                self.expect(&STok::Sym(")"))?;
                Ok(e)
            }
            Some(got) => Err(self.err(format!("expected an expression, found {got}"))),
            None => Err(self.err("expected an expression, found end of input")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::{run, Memory, RunResult};
    use crate::syntax::parse;
    use crate::types::{check, synthesize, Context};

    fn cfg() -> DesugarConfig {
        DesugarConfig::default()
    }

    fn run_closed(t: &Term) -> (Memory, ChoiceLabel) {
        match run(t.clone(), Memory::empty(), 200_000) {
            RunResult::Final { memory, choice, .. } => (memory, choice),
            other => panic!("machine did not finish: {other:?}"),
        }
    }

    #[test]
    fn throw_and_try_desugar() {
        let d = desugar(&Stmt::Throw(ident("e")), &cfg()).unwrap();
        assert_eq!(d, parse("'e").unwrap());
        let t = Stmt::Try(Box::new(Stmt::Throw(ident("e"))), ident("e"), Box::new(Stmt::Skip));
        let d = desugar(&t, &cfg()).unwrap();
        assert_eq!(d, parse("'e;'e->*").unwrap());
    }

    #[test]
    fn sequencing_is_compositional() {
        let p = Stmt::Print(Expr::Const(1));
        let q = Stmt::Skip;
        let seq = Stmt::Seq(Box::new(p.clone()), Box::new(q.clone()));
        let whole = desugar(&seq, &cfg()).unwrap();
        let parts = Term::seq(desugar(&p, &cfg()).unwrap(), desugar(&q, &cfg()).unwrap());
        assert_eq!(whole, parts);
    }

    #[test]
    fn if_desugar_shape_and_run() {
        let s = Stmt::If(Expr::True, Box::new(Stmt::Skip), Box::new(Stmt::Break));
        let d = desugar(&s, &cfg()).unwrap();
        // B ; <x>.x ;'tt-> * ;'ff-> 'break
        match &d {
            Term::Case(inner, ff, br) => {
                assert_eq!(ff, &ChoiceLabel::named("ff"));
                assert_eq!(**br, Term::choice("break"));
                match &**inner {
                    Term::Case(_, tt, skip) => {
                        assert_eq!(tt, &ChoiceLabel::named("tt"));
                        assert_eq!(**skip, Term::star());
                    }
                    other => panic!("unexpected shape: {other}"),
                }
            }
            other => panic!("unexpected shape: {other}"),
        }
        let (mem, choice) = run_closed(&d);
        assert!(mem.is_empty());
        assert_eq!(choice, ChoiceLabel::Star);
    }

    #[test]
    fn exceptions_are_transparent_and_propagate() {
        // try { throw e } catch e H behaves as H
        let handler = Stmt::Print(Expr::Const(3));
        let t = Stmt::Try(
            Box::new(Stmt::Throw(ident("e"))),
            ident("e"),
            Box::new(handler.clone()),
        );
        let caught = run_closed(&desugar(&t, &cfg()).unwrap());
        let direct = run_closed(&desugar(&handler, &cfg()).unwrap());
        assert!(caught.0.alpha_eq(&direct.0));
        assert_eq!(caught.1, direct.1);
        // an uncaught exception keeps its choice
        let t = Stmt::Try(
            Box::new(Stmt::Throw(ident("f"))),
            ident("e"),
            Box::new(Stmt::Skip),
        );
        let (_, choice) = run_closed(&desugar(&t, &cfg()).unwrap());
        assert_eq!(choice, ChoiceLabel::named("f"));
    }

    #[test]
    fn label_clashes_are_rejected() {
        let t = Stmt::Throw(ident("n0"));
        assert!(matches!(desugar(&t, &cfg()), Err(SurfaceError::LabelClash { .. })));
        let t = Stmt::Throw(ident("break"));
        assert!(matches!(desugar(&t, &cfg()), Err(SurfaceError::LabelClash { .. })));
    }

    #[test]
    fn intops_check_at_their_stated_types() {
        let ops = gen_intops(&IntConfig { modulus: 2 }).unwrap();
        // Z Z => Z.*
        let z = ops.int_type.clone();
        let b = ops.bool_type.clone();
        let mut in2 = MemType::empty();
        in2.push_top(&Location::Default, z.clone());
        in2.push_top(&Location::Default, z.clone());
        let plus_ty = ValueType::new(
            in2.clone(),
            SumType::singleton(ChoiceLabel::Star, MemType::singleton(Location::Default, z.clone())),
        );
        check(&Context::empty(), &ops.plus, &plus_ty).unwrap();
        let less_ty = ValueType::new(
            in2,
            SumType::singleton(ChoiceLabel::Star, MemType::singleton(Location::Default, b)),
        );
        check(&Context::empty(), &ops.less, &less_ty).unwrap();
    }

    #[test]
    fn plus_mod_two_is_xor() {
        let ops = gen_intops(&IntConfig { modulus: 2 }).unwrap();
        for a in 0..2u32 {
            for b in 0..2u32 {
                let t = Term::push(
                    ops.const_value(a),
                    Location::Default,
                    Term::push(ops.const_value(b), Location::Default, ops.plus.clone()),
                );
                let (mem, choice) = run_closed(&t);
                assert_eq!(choice, ChoiceLabel::Star);
                let stack = mem.stack(&Location::Default);
                assert_eq!(stack.len(), 1);
                let expected = ops.const_value(a ^ b);
                assert!(stack[0].alpha_eq(&expected), "{a}+{b}: {} vs {expected}", stack[0]);
            }
        }
    }

    #[test]
    fn less_is_irreflexive_at_zero() {
        let ops = gen_intops(&IntConfig::default()).unwrap();
        let t = Term::push(
            ops.const_value(0),
            Location::Default,
            Term::push(ops.const_value(0), Location::Default, ops.less.clone()),
        );
        let (mem, choice) = run_closed(&t);
        assert_eq!(choice, ChoiceLabel::Star);
        let stack = mem.stack(&Location::Default);
        assert!(stack[0].alpha_eq(&ops.bool_value(false)));
    }

    #[test]
    fn while_program_counts_to_five() {
        let program = parse_program("a := 0; while !a < 5 do a := !a + 1").unwrap();
        let term = desugar(&program, &cfg()).unwrap();
        let (mem, choice) = run_closed(&term);
        assert_eq!(choice, ChoiceLabel::Star);
        let ops = gen_intops(&IntConfig::default()).unwrap();
        let cell = mem.stack(&Location::named("a"));
        assert_eq!(cell.len(), 1);
        assert!(cell[0].alpha_eq(&ops.const_value(5)), "cell held {}", cell[0]);
        // the whole program synthesizes a type
        synthesize(&Context::empty(), &term).unwrap();
    }

    #[test]
    fn cbv_let_return_chain() {
        // let x = return M in N  =  ([M].*) ; <x>.N
        let e = Expr::Let(
            ident("x"),
            Box::new(Expr::Return(Box::new(Expr::Const(1)))),
            Box::new(Expr::Var(ident("x"))),
        );
        let d = desugar_cbv(&e, &cfg()).unwrap();
        match &d {
            Term::Case(push_star, star, pop) => {
                assert_eq!(star, &ChoiceLabel::Star);
                assert!(
                    matches!(&**push_star, Term::Push(_, Location::Default, cont) if **cont == Term::star())
                );
                assert!(matches!(&**pop, Term::Pop(Location::Default, _, None, _)));
            }
            other => panic!("unexpected shape: {other}"),
        }
    }

    #[test]
    fn cbv_application_applies() {
        // (\x -> x) 1 leaves the constant for 1 on the stack
        let e = Expr::App(
            Box::new(Expr::Lam(ident("x"), Box::new(Expr::Var(ident("x"))))),
            Box::new(Expr::Const(1)),
        );
        let ops = gen_intops(&IntConfig::default()).unwrap();
        for function_first in [false, true] {
            let mut c = cfg();
            c.cbv_function_first = function_first;
            let d = desugar_cbv(&e, &c).unwrap();
            let (mem, choice) = run_closed(&d);
            assert_eq!(choice, ChoiceLabel::Star);
            let stack = mem.stack(&Location::Default);
            assert_eq!(stack.len(), 1);
            assert!(stack[0].alpha_eq(&ops.const_value(1)));
        }
    }

    #[test]
    fn ctor_pushes_arguments_in_reverse() {
        let decl = DataDecl { name: ident("p"), ctors: vec![(ident("pair"), 2)] };
        let e = Expr::Ctor(ident("pair"), vec![Expr::Const(1), Expr::Const(2)]);
        let d = desugar_cbn_data(&decl, &e, &cfg()).unwrap();
        // [M2].[M1].'pair
        match &d {
            Term::Push(m2, _, rest) => {
                let ops = gen_intops(&IntConfig::default()).unwrap();
                assert!(m2.alpha_eq(&ops.const_expr(2)));
                match &**rest {
                    Term::Push(m1, _, c) => {
                        assert!(m1.alpha_eq(&ops.const_expr(1)));
                        assert_eq!(**c, Term::choice("pair"));
                    }
                    other => panic!("unexpected shape: {other}"),
                }
            }
            other => panic!("unexpected shape: {other}"),
        }
    }

    #[test]
    fn cbn_case_selects_and_binds_in_stack_order() {
        let decl = DataDecl {
            name: ident("p"),
            ctors: vec![(ident("pair"), 2), (ident("unit"), 0)],
        };
        // case (pair 1 2) of { pair x y -> x; unit -> 7 }  evaluates to 1
        let e = Expr::CaseData(
            Box::new(Expr::Ctor(ident("pair"), vec![Expr::Const(1), Expr::Const(2)])),
            vec![
                DataBranch {
                    ctor: ident("pair"),
                    params: vec![ident("x"), ident("y")],
                    body: Expr::Var(ident("x")),
                },
                DataBranch { ctor: ident("unit"), params: vec![], body: Expr::Const(7) },
            ],
        );
        let d = desugar_cbn_data(&decl, &e, &cfg()).unwrap();
        let (mem, choice) = run_closed(&d);
        assert_eq!(choice, ChoiceLabel::Star);
        let ops = gen_intops(&IntConfig::default()).unwrap();
        let stack = mem.stack(&Location::Default);
        assert_eq!(stack.len(), 1);
        // call-by-name: the case returns the first argument's thunk
        assert!(stack[0].alpha_eq(&ops.const_expr(1)), "got {}", stack[0]);
        // nullary constructors behave as booleans
        let e = Expr::CaseData(
            Box::new(Expr::Ctor(ident("unit"), vec![])),
            vec![
                DataBranch {
                    ctor: ident("pair"),
                    params: vec![ident("x"), ident("y")],
                    body: Expr::Const(1),
                },
                DataBranch { ctor: ident("unit"), params: vec![], body: Expr::Const(3) },
            ],
        );
        let d = desugar_cbn_data(&decl, &e, &cfg()).unwrap();
        let (mem, _) = run_closed(&d);
        assert!(mem.stack(&Location::Default)[0].alpha_eq(&ops.const_value(3)));
    }

    #[test]
    fn arity_mismatch_is_rejected() {
        let decl = DataDecl { name: ident("p"), ctors: vec![(ident("pair"), 2)] };
        let e = Expr::Ctor(ident("pair"), vec![Expr::Const(1)]);
        assert!(matches!(
            desugar_cbn_data(&decl, &e, &cfg()),
            Err(SurfaceError::ArityMismatch { .. })
        ));
    }

    #[test]
    fn reads_consume_preloaded_streams() {
        let program = parse_program("a := read; b := read + sample").unwrap();
        let term = desugar(&program, &cfg()).unwrap();
        let ops = gen_intops(&IntConfig::default()).unwrap();
        let mut mem = Memory::empty();
        // heads are consumed first
        mem.push(&Location::named("in"), ops.const_value(2));
        mem.push(&Location::named("in"), ops.const_value(1));
        mem.push(&Location::named("rnd"), ops.const_value(4));
        match run(term.clone(), mem, 200_000) {
            RunResult::Final { memory, choice, .. } => {
                assert_eq!(choice, ChoiceLabel::Star);
                assert!(memory.stack(&Location::named("a"))[0].alpha_eq(&ops.const_value(1)));
                assert!(memory.stack(&Location::named("b"))[0].alpha_eq(&ops.const_value(6)));
            }
            other => panic!("{other:?}"),
        }
        // an empty stream strands the machine on a pop
        match run(term, Memory::empty(), 200_000) {
            RunResult::Stuck { reason, .. } => {
                assert_eq!(reason.to_string(), "pop from the empty stack `in`");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parse_program_shapes() {
        let s = parse_program("skip; print 1 + 2; if true then skip else break").unwrap();
        assert!(matches!(s, Stmt::Seq(_, _)));
        let s = parse_program("try { throw oops; skip } catch oops print 1").unwrap();
        assert!(matches!(s, Stmt::Try(_, _, _)));
        let s = parse_program("case read of { 0 -> skip | 1 -> break }").unwrap();
        assert!(matches!(s, Stmt::CaseOf(_, _)));
        let s = parse_program("do a := !a + 1 while !a < 3").unwrap();
        assert!(matches!(s, Stmt::DoWhile(_, _)));
        assert!(parse_program("if true then").is_err());
    }

    #[test]
    fn do_while_runs() {
        let program = parse_program("a := 0; do a := !a + 1 while !a < 3").unwrap();
        let term = desugar(&program, &cfg()).unwrap();
        let (mem, choice) = run_closed(&term);
        assert_eq!(choice, ChoiceLabel::Star);
        let ops = gen_intops(&IntConfig::default()).unwrap();
        assert!(mem.stack(&Location::named("a"))[0].alpha_eq(&ops.const_value(3)));
    }

    #[test]
    fn break_escapes_a_loop() {
        let program = parse_program(
            "a := 0; while true do { a := !a + 1; if !a < 2 then skip else break }",
        )
        .unwrap();
        let term = desugar(&program, &cfg()).unwrap();
        let (mem, choice) = run_closed(&term);
        assert_eq!(choice, ChoiceLabel::Star);
        let ops = gen_intops(&IntConfig::default()).unwrap();
        assert!(mem.stack(&Location::named("a"))[0].alpha_eq(&ops.const_value(2)));
    }

    #[test]
    fn print_writes_to_out() {
        let program = parse_program("print 2; print true").unwrap();
        let term = desugar(&program, &cfg()).unwrap();
        let (mem, choice) = run_closed(&term);
        assert_eq!(choice, ChoiceLabel::Star);
        let ops = gen_intops(&IntConfig::default()).unwrap();
        let out = mem.stack(&Location::named("out"));
        assert_eq!(out.len(), 2);
        assert!(out[0].alpha_eq(&ops.const_value(2)));
        assert!(out[1].alpha_eq(&ops.bool_value(true)));
    }
}
