//! Core term syntax: identifiers, locations, choice labels, terms,
//! free variables, capture-avoiding substitution, alpha-equivalence,
//! and the concrete syntax (parser and printer).
//!
//! The term grammar has six constructors:
//!
//! ```text
//! M, N ::= x | [N]a.M | a<x>.M | 'i | M;'i->N | M^'i
//! ```
//!
//! `[N]a.M` pushes `N` onto the stack at location `a` and continues with
//! `M`; `a<x>.M` pops from `a` and binds the popped term to `x`; `'i` is a
//! choice (the default choice is written `*`); `M;'i->N` runs `M` and
//! continues with `N` only if `M` exits with choice `'i`; `M^'i` repeats
//! `M` while it exits with `'i`. `M;N` is sugar for `M;*->N`.

use std::collections::BTreeSet;
use std::fmt;

use crate::types::ValueType;

/// A variable, location, or choice name: `[a-zA-Z_][a-zA-Z0-9_']*`.
///
/// The name `_` is reserved for binders whose variable may not occur.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Ident(String);

impl Ident {
    pub fn new(name: impl Into<String>) -> Result<Self, ParseError> {
        let name = name.into();
        if Self::is_valid(&name) {
            Ok(Ident(name))
        } else {
            Err(ParseError::new(0, 0, format!("invalid identifier `{name}`")))
        }
    }

    pub fn is_valid(name: &str) -> bool {
        let mut chars = name.chars();
        match chars.next() {
            Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
            _ => return false,
        }
        chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '\'')
    }

    pub fn blank() -> Self {
        Ident("_".to_string())
    }

    pub fn is_blank(&self) -> bool {
        self.0 == "_"
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Ident {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Convenience constructor for statically known identifiers.
pub fn ident(name: &str) -> Ident {
    Ident::new(name).expect("valid identifier")
}

/// A stack name. The default location is the lambda-calculus operand stack
/// and is omitted in the concrete syntax.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Location {
    Default,
    Named(Ident),
}

impl Location {
    pub fn named(name: &str) -> Self {
        Location::Named(ident(name))
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Default => Ok(()),
            Location::Named(x) => write!(f, "{x}"),
        }
    }
}

/// A branch label. The default choice `*` plays the role of skip.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ChoiceLabel {
    Star,
    Named(Ident),
}

impl ChoiceLabel {
    pub fn named(name: &str) -> Self {
        ChoiceLabel::Named(ident(name))
    }
}

impl fmt::Display for ChoiceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChoiceLabel::Star => write!(f, "*"),
            ChoiceLabel::Named(x) => write!(f, "'{x}"),
        }
    }
}

/// A term of the calculus.
///
/// Binder scope: the variable of a `Pop` is bound exactly in its
/// continuation. Pop binders may carry a type annotation, which is
/// ignored by alpha-equivalence.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Var(Ident),
    /// `[arg]loc.cont`
    Push(Box<Term>, Location, Box<Term>),
    /// `loc<x: ann>.cont`
    Pop(Location, Ident, Option<ValueType>, Box<Term>),
    Choice(ChoiceLabel),
    /// `body ;'i-> handler`
    Case(Box<Term>, ChoiceLabel, Box<Term>),
    /// `body ^'i`
    Loop(Box<Term>, ChoiceLabel),
}

impl Term {
    pub fn var(name: &str) -> Term {
        Term::Var(ident(name))
    }

    pub fn star() -> Term {
        Term::Choice(ChoiceLabel::Star)
    }

    pub fn choice(name: &str) -> Term {
        Term::Choice(ChoiceLabel::named(name))
    }

    pub fn push(arg: Term, loc: Location, cont: Term) -> Term {
        Term::Push(Box::new(arg), loc, Box::new(cont))
    }

    pub fn pop(loc: Location, x: Ident, ann: Option<ValueType>, cont: Term) -> Term {
        Term::Pop(loc, x, ann, Box::new(cont))
    }

    pub fn case(body: Term, label: ChoiceLabel, handler: Term) -> Term {
        Term::Case(Box::new(body), label, Box::new(handler))
    }

    /// `M;N`, sugar for `M;*->N`.
    pub fn seq(first: Term, then: Term) -> Term {
        Term::case(first, ChoiceLabel::Star, then)
    }

    pub fn looped(body: Term, label: ChoiceLabel) -> Term {
        Term::Loop(Box::new(body), label)
    }

    /// Number of constructors.
    pub fn size(&self) -> usize {
        match self {
            Term::Var(_) | Term::Choice(_) => 1,
            Term::Push(a, _, m) => 1 + a.size() + m.size(),
            Term::Pop(_, _, _, m) => 1 + m.size(),
            Term::Case(a, _, b) => 1 + a.size() + b.size(),
            Term::Loop(a, _) => 1 + a.size(),
        }
    }

    /// Variables with a free occurrence.
    pub fn free_vars(&self) -> BTreeSet<Ident> {
        fn go(t: &Term, acc: &mut BTreeSet<Ident>) {
            match t {
                Term::Var(x) => {
                    acc.insert(x.clone());
                }
                Term::Choice(_) => {}
                Term::Push(a, _, m) => {
                    go(a, acc);
                    go(m, acc);
                }
                Term::Pop(_, x, _, m) => {
                    let mut inner = BTreeSet::new();
                    go(m, &mut inner);
                    inner.remove(x);
                    acc.extend(inner);
                }
                Term::Case(a, _, b) => {
                    go(a, acc);
                    go(b, acc);
                }
                Term::Loop(a, _) => go(a, acc),
            }
        }
        let mut acc = BTreeSet::new();
        go(self, &mut acc);
        acc
    }

    pub fn is_closed(&self) -> bool {
        self.free_vars().is_empty()
    }

    pub fn contains_loop(&self) -> bool {
        match self {
            Term::Var(_) | Term::Choice(_) => false,
            Term::Push(a, _, m) => a.contains_loop() || m.contains_loop(),
            Term::Pop(_, _, _, m) => m.contains_loop(),
            Term::Case(a, _, b) => a.contains_loop() || b.contains_loop(),
            Term::Loop(_, _) => true,
        }
    }

    /// Capture-avoiding substitution `{n/x}self`.
    ///
    /// Substituting for `_` is a no-op; bound variables are renamed with
    /// apostrophe-suffixed fresh names when they would capture.
    pub fn substitute(&self, x: &Ident, n: &Term) -> Term {
        if x.is_blank() {
            return self.clone();
        }
        match self {
            Term::Var(y) => {
                if y == x {
                    n.clone()
                } else {
                    self.clone()
                }
            }
            Term::Choice(_) => self.clone(),
            Term::Push(a, l, m) => {
                Term::push(a.substitute(x, n), l.clone(), m.substitute(x, n))
            }
            Term::Pop(l, y, ann, m) => {
                if y == x {
                    self.clone()
                } else if !m.free_vars().contains(x) {
                    // No occurrence to replace below; keep the binder as is.
                    Term::Pop(l.clone(), y.clone(), ann.clone(), m.clone())
                } else if n.free_vars().contains(y) {
                    let mut avoid = n.free_vars();
                    avoid.extend(m.free_vars());
                    avoid.insert(x.clone());
                    let fresh = fresh_ident(y, &avoid);
                    let renamed = m.substitute(y, &Term::Var(fresh.clone()));
                    Term::Pop(
                        l.clone(),
                        fresh,
                        ann.clone(),
                        Box::new(renamed.substitute(x, n)),
                    )
                } else {
                    Term::Pop(l.clone(), y.clone(), ann.clone(), Box::new(m.substitute(x, n)))
                }
            }
            Term::Case(a, i, b) => {
                Term::case(a.substitute(x, n), i.clone(), b.substitute(x, n))
            }
            Term::Loop(a, i) => Term::looped(a.substitute(x, n), i.clone()),
        }
    }

    /// Alpha-equivalence; annotations are ignored.
    pub fn alpha_eq(&self, other: &Term) -> bool {
        fn go(a: &Term, b: &Term, env: &mut Vec<(Ident, Ident)>) -> bool {
            match (a, b) {
                (Term::Var(x), Term::Var(y)) => {
                    let ax = env.iter().rposition(|(l, _)| l == x);
                    let by = env.iter().rposition(|(_, r)| r == y);
                    match (ax, by) {
                        (Some(i), Some(j)) => i == j,
                        (None, None) => x == y,
                        _ => false,
                    }
                }
                (Term::Choice(i), Term::Choice(j)) => i == j,
                (Term::Push(a1, l1, m1), Term::Push(a2, l2, m2)) => {
                    l1 == l2 && go(a1, a2, env) && go(m1, m2, env)
                }
                (Term::Pop(l1, x1, _, m1), Term::Pop(l2, x2, _, m2)) => {
                    if l1 != l2 {
                        return false;
                    }
                    env.push((x1.clone(), x2.clone()));
                    let r = go(m1, m2, env);
                    env.pop();
                    r
                }
                (Term::Case(a1, i1, b1), Term::Case(a2, i2, b2)) => {
                    i1 == i2 && go(a1, a2, env) && go(b1, b2, env)
                }
                (Term::Loop(a1, i1), Term::Loop(a2, i2)) => i1 == i2 && go(a1, a2, env),
                _ => false,
            }
        }
        go(self, other, &mut Vec::new())
    }

    /// Canonical representative of the alpha-equivalence class: binders are
    /// renamed to `v0, v1, ...` in traversal order, unused binders become
    /// `_`, annotations are stripped. Two terms are alpha-equal iff their
    /// canonical forms are syntactically equal.
    pub fn alpha_canonical(&self) -> Term {
        fn go(t: &Term, env: &mut Vec<(Ident, Ident)>, counter: &mut usize) -> Term {
            match t {
                Term::Var(x) => match env.iter().rfind(|(orig, _)| orig == x) {
                    Some((_, canon)) => Term::Var(canon.clone()),
                    None => t.clone(),
                },
                Term::Choice(_) => t.clone(),
                Term::Push(a, l, m) => Term::push(
                    go(a, env, counter),
                    l.clone(),
                    go(m, env, counter),
                ),
                Term::Pop(l, x, _, m) => {
                    let fresh = if m.free_vars().contains(x) {
                        let name = ident(&format!("v{counter}"));
                        *counter += 1;
                        name
                    } else {
                        Ident::blank()
                    };
                    env.push((x.clone(), fresh.clone()));
                    let body = go(m, env, counter);
                    env.pop();
                    Term::Pop(l.clone(), fresh, None, Box::new(body))
                }
                Term::Case(a, i, b) => Term::case(
                    go(a, env, counter),
                    i.clone(),
                    go(b, env, counter),
                ),
                Term::Loop(a, i) => Term::looped(go(a, env, counter), i.clone()),
            }
        }
        go(self, &mut Vec::new(), &mut 0)
    }

    /// Immediate subterms, in leftmost order.
    pub fn children(&self) -> Vec<&Term> {
        match self {
            Term::Var(_) | Term::Choice(_) => vec![],
            Term::Push(a, _, m) => vec![a, m],
            Term::Pop(_, _, _, m) => vec![m],
            Term::Case(a, _, b) => vec![a, b],
            Term::Loop(a, _) => vec![a],
        }
    }

    /// The subterm at a child-index path, if the path is valid.
    pub fn subterm_at(&self, path: &[usize]) -> Option<&Term> {
        let mut cur = self;
        for &i in path {
            cur = *cur.children().get(i)?;
        }
        Some(cur)
    }

    /// Rebuild the term with the subterm at `path` replaced by `new`.
    pub fn replace_at(&self, path: &[usize], new: Term) -> Option<Term> {
        if path.is_empty() {
            return Some(new);
        }
        let (head, rest) = (path[0], &path[1..]);
        Some(match self {
            Term::Var(_) | Term::Choice(_) => return None,
            Term::Push(a, l, m) => match head {
                0 => Term::push(a.replace_at(rest, new)?, l.clone(), (**m).clone()),
                1 => Term::push((**a).clone(), l.clone(), m.replace_at(rest, new)?),
                _ => return None,
            },
            Term::Pop(l, x, ann, m) => match head {
                0 => Term::Pop(l.clone(), x.clone(), ann.clone(), Box::new(m.replace_at(rest, new)?)),
                _ => return None,
            },
            Term::Case(a, i, b) => match head {
                0 => Term::case(a.replace_at(rest, new)?, i.clone(), (**b).clone()),
                1 => Term::case((**a).clone(), i.clone(), b.replace_at(rest, new)?),
                _ => return None,
            },
            Term::Loop(a, i) => match head {
                0 => Term::looped(a.replace_at(rest, new)?, i.clone()),
                _ => return None,
            },
        })
    }

    /// All proper subterms paired with their paths, preorder.
    pub fn proper_subterms(&self) -> Vec<(Vec<usize>, &Term)> {
        fn go<'a>(t: &'a Term, path: &mut Vec<usize>, acc: &mut Vec<(Vec<usize>, &'a Term)>) {
            for (i, c) in t.children().into_iter().enumerate() {
                path.push(i);
                acc.push((path.clone(), c));
                go(c, path, acc);
                path.pop();
            }
        }
        let mut acc = Vec::new();
        go(self, &mut Vec::new(), &mut acc);
        acc
    }
}

/// A name not in `avoid`, derived from `base` by appending apostrophes
/// and, past the first retry, a counter.
pub fn fresh_ident(base: &Ident, avoid: &BTreeSet<Ident>) -> Ident {
    let stem = base.as_str().trim_end_matches(|c: char| c == '\'' || c.is_ascii_digit());
    let stem = if stem.is_empty() { "v" } else { stem };
    let primed = ident(&format!("{stem}'"));
    if !avoid.contains(&primed) {
        return primed;
    }
    for k in 2.. {
        let candidate = ident(&format!("{stem}'{k}"));
        if !avoid.contains(&candidate) {
            return candidate;
        }
    }
    unreachable!()
}

// ---------------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------------

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_cases(self, f)
    }
}

fn write_cases(t: &Term, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match t {
        Term::Case(a, i, b) => {
            write_cases(a, f)?;
            match i {
                ChoiceLabel::Star => write!(f, ";")?,
                ChoiceLabel::Named(_) => write!(f, ";{i}->")?,
            }
            write_looped(b, f)
        }
        _ => write_looped(t, f),
    }
}

fn write_looped(t: &Term, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match t {
        Term::Loop(a, i) => {
            write_looped(a, f)?;
            write!(f, "^{i}")
        }
        Term::Case(_, _, _) => write!(f, "({t})"),
        _ => write_prefix(t, f),
    }
}

fn write_prefix(t: &Term, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match t {
        Term::Push(a, l, m) => {
            write!(f, "[{a}]{l}.")?;
            write_prefix_cont(m, f)
        }
        Term::Pop(l, x, ann, m) => {
            match ann {
                Some(ty) => write!(f, "{l}<{x}: {ty}>.")?,
                None => write!(f, "{l}<{x}>.")?,
            }
            write_prefix_cont(m, f)
        }
        Term::Var(x) => write!(f, "{x}"),
        Term::Choice(i) => write!(f, "{i}"),
        Term::Case(_, _, _) | Term::Loop(_, _) => write!(f, "({t})"),
    }
}

fn write_prefix_cont(t: &Term, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match t {
        Term::Case(_, _, _) | Term::Loop(_, _) => write!(f, "({t})"),
        _ => write_prefix(t, f),
    }
}

// ---------------------------------------------------------------------------
// Lexing
// ---------------------------------------------------------------------------

/// Parse failure with source position.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("parse error at {line}:{col}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

impl ParseError {
    pub fn new(line: usize, col: usize, msg: impl Into<String>) -> Self {
        ParseError { line, col, msg: msg.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    ChoiceName(String),
    Star,
    Zero,
    LBracket,
    RBracket,
    LParen,
    RParen,
    Lt,
    Gt,
    Dot,
    Semi,
    Colon,
    Arrow,
    FatArrow,
    Caret,
    Plus,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::ChoiceName(s) => write!(f, "`'{s}`"),
            Tok::Star => write!(f, "`*`"),
            Tok::Zero => write!(f, "`0`"),
            Tok::LBracket => write!(f, "`[`"),
            Tok::RBracket => write!(f, "`]`"),
            Tok::LParen => write!(f, "`(`"),
            Tok::RParen => write!(f, "`)`"),
            Tok::Lt => write!(f, "`<`"),
            Tok::Gt => write!(f, "`>`"),
            Tok::Dot => write!(f, "`.`"),
            Tok::Semi => write!(f, "`;`"),
            Tok::Colon => write!(f, "`:`"),
            Tok::Arrow => write!(f, "`->`"),
            Tok::FatArrow => write!(f, "`=>`"),
            Tok::Caret => write!(f, "`^`"),
            Tok::Plus => write!(f, "`+`"),
        }
    }
}

pub(crate) fn lex(src: &str) -> Result<Vec<(Tok, usize, usize)>, ParseError> {
    let mut out = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = src.chars().peekable();
    while let Some(&c) = chars.peek() {
        let (tl, tc) = (line, col);
        let bump = |chars: &mut std::iter::Peekable<std::str::Chars>, line: &mut usize, col: &mut usize| {
            let c = chars.next().unwrap();
            if c == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
            c
        };
        match c {
            ' ' | '\t' | '\r' | '\n' => {
                bump(&mut chars, &mut line, &mut col);
            }
            '-' => {
                bump(&mut chars, &mut line, &mut col);
                match chars.peek() {
                    Some('-') => {
                        // line comment
                        while let Some(&c2) = chars.peek() {
                            if c2 == '\n' {
                                break;
                            }
                            bump(&mut chars, &mut line, &mut col);
                        }
                    }
                    Some('>') => {
                        bump(&mut chars, &mut line, &mut col);
                        out.push((Tok::Arrow, tl, tc));
                    }
                    _ => return Err(ParseError::new(tl, tc, "expected `--` or `->` after `-`")),
                }
            }
            '=' => {
                bump(&mut chars, &mut line, &mut col);
                if chars.peek() == Some(&'>') {
                    bump(&mut chars, &mut line, &mut col);
                    out.push((Tok::FatArrow, tl, tc));
                } else {
                    return Err(ParseError::new(tl, tc, "expected `=>` after `=`"));
                }
            }
            '\'' => {
                bump(&mut chars, &mut line, &mut col);
                let mut name = String::new();
                while let Some(&c2) = chars.peek() {
                    if c2.is_ascii_alphanumeric() || c2 == '_' || (c2 == '\'' && !name.is_empty()) {
                        name.push(bump(&mut chars, &mut line, &mut col));
                    } else {
                        break;
                    }
                }
                if name.is_empty() || !Ident::is_valid(&name) {
                    return Err(ParseError::new(tl, tc, "expected choice name after `'`"));
                }
                out.push((Tok::ChoiceName(name), tl, tc));
            }
            '*' => {
                bump(&mut chars, &mut line, &mut col);
                out.push((Tok::Star, tl, tc));
            }
            '0' => {
                bump(&mut chars, &mut line, &mut col);
                out.push((Tok::Zero, tl, tc));
            }
            '[' | ']' | '(' | ')' | '<' | '>' | '.' | ';' | ':' | '^' | '+' => {
                bump(&mut chars, &mut line, &mut col);
                let tok = match c {
                    '[' => Tok::LBracket,
                    ']' => Tok::RBracket,
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    '<' => Tok::Lt,
                    '>' => Tok::Gt,
                    '.' => Tok::Dot,
                    ';' => Tok::Semi,
                    ':' => Tok::Colon,
                    '^' => Tok::Caret,
                    '+' => Tok::Plus,
                    _ => unreachable!(),
                };
                out.push((tok, tl, tc));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut name = String::new();
                while let Some(&c2) = chars.peek() {
                    if c2.is_ascii_alphanumeric() || c2 == '_' || c2 == '\'' {
                        name.push(bump(&mut chars, &mut line, &mut col));
                    } else {
                        break;
                    }
                }
                out.push((Tok::Ident(name), tl, tc));
            }
            'ε' => {
                bump(&mut chars, &mut line, &mut col);
                out.push((Tok::Ident("e".to_string()), tl, tc));
            }
            other => {
                return Err(ParseError::new(tl, tc, format!("unexpected character `{other}`")));
            }
        }
    }
    Ok(out)
}

/// Token cursor shared by the term and type parsers.
pub(crate) struct Cursor {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
}

impl Cursor {
    pub(crate) fn new(src: &str) -> Result<Self, ParseError> {
        Ok(Cursor { toks: lex(src)?, pos: 0 })
    }

    pub(crate) fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _, _)| t)
    }

    pub(crate) fn peek2(&self) -> Option<&Tok> {
        self.toks.get(self.pos + 1).map(|(t, _, _)| t)
    }

    pub(crate) fn here(&self) -> (usize, usize) {
        self.toks
            .get(self.pos)
            .map(|(_, l, c)| (*l, *c))
            .unwrap_or_else(|| {
                self.toks
                    .last()
                    .map(|(_, l, c)| (*l, *c + 1))
                    .unwrap_or((1, 1))
            })
    }

    pub(crate) fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _, _)| t.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    pub(crate) fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub(crate) fn expect(&mut self, t: &Tok) -> Result<(), ParseError> {
        let (l, c) = self.here();
        match self.next() {
            Some(got) if &got == t => Ok(()),
            Some(got) => Err(ParseError::new(l, c, format!("expected {t}, found {got}"))),
            None => Err(ParseError::new(l, c, format!("expected {t}, found end of input"))),
        }
    }

    pub(crate) fn err(&self, msg: impl Into<String>) -> ParseError {
        let (l, c) = self.here();
        ParseError::new(l, c, msg)
    }

    pub(crate) fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

/// Parse a term from concrete syntax.
pub fn parse(src: &str) -> Result<Term, ParseError> {
    let mut cur = Cursor::new(src)?;
    let t = parse_cases(&mut cur)?;
    if !cur.at_end() {
        return Err(cur.err("trailing input after term"));
    }
    Ok(t)
}

pub(crate) fn parse_cases(cur: &mut Cursor) -> Result<Term, ParseError> {
    let mut t = parse_looped(cur)?;
    while cur.eat(&Tok::Semi) {
        // `M;'i->N` when a choice is followed by `->`, otherwise `M;N`.
        let labelled = matches!(cur.peek(), Some(Tok::Star) | Some(Tok::ChoiceName(_)))
            && cur.peek2() == Some(&Tok::Arrow);
        let label = if labelled {
            let l = parse_choice(cur)?;
            cur.expect(&Tok::Arrow)?;
            l
        } else {
            ChoiceLabel::Star
        };
        let rhs = parse_looped(cur)?;
        t = Term::case(t, label, rhs);
    }
    Ok(t)
}

fn parse_looped(cur: &mut Cursor) -> Result<Term, ParseError> {
    let mut t = parse_prefix(cur)?;
    while cur.eat(&Tok::Caret) {
        let label = parse_choice(cur)?;
        t = Term::looped(t, label);
    }
    Ok(t)
}

fn parse_choice(cur: &mut Cursor) -> Result<ChoiceLabel, ParseError> {
    match cur.next() {
        Some(Tok::Star) => Ok(ChoiceLabel::Star),
        Some(Tok::ChoiceName(n)) => Ok(ChoiceLabel::Named(ident(&n))),
        _ => Err(cur.err("expected a choice (`*` or `'name`)")),
    }
}

fn parse_prefix(cur: &mut Cursor) -> Result<Term, ParseError> {
    match cur.peek() {
        Some(Tok::LBracket) => {
            cur.next();
            let arg = parse_cases(cur)?;
            cur.expect(&Tok::RBracket)?;
            let loc = parse_opt_location(cur)?;
            cur.expect(&Tok::Dot)?;
            let cont = parse_prefix(cur)?;
            Ok(Term::push(arg, loc, cont))
        }
        Some(Tok::Lt) => parse_pop(cur, Location::Default),
        Some(Tok::Ident(_)) if cur.peek2() == Some(&Tok::Lt) => {
            let name = match cur.next() {
                Some(Tok::Ident(n)) => n,
                _ => unreachable!(),
            };
            parse_pop(cur, Location::Named(ident(&name)))
        }
        _ => parse_atom(cur),
    }
}

fn parse_opt_location(cur: &mut Cursor) -> Result<Location, ParseError> {
    if let Some(Tok::Ident(_)) = cur.peek() {
        match cur.next() {
            Some(Tok::Ident(n)) => Ok(Location::Named(ident(&n))),
            _ => unreachable!(),
        }
    } else {
        Ok(Location::Default)
    }
}

fn parse_pop(cur: &mut Cursor, loc: Location) -> Result<Term, ParseError> {
    cur.expect(&Tok::Lt)?;
    let x = match cur.next() {
        Some(Tok::Ident(n)) => ident(&n),
        _ => return Err(cur.err("expected a binder name")),
    };
    let ann = if cur.eat(&Tok::Colon) {
        Some(crate::types::parse_vtype_at(cur)?)
    } else {
        None
    };
    cur.expect(&Tok::Gt)?;
    cur.expect(&Tok::Dot)?;
    let cont = parse_prefix(cur)?;
    Ok(Term::Pop(loc, x, ann, Box::new(cont)))
}

fn parse_atom(cur: &mut Cursor) -> Result<Term, ParseError> {
    let (l, c) = cur.here();
    match cur.next() {
        Some(Tok::Ident(n)) => {
            if n == "_" {
                Err(ParseError::new(l, c, "`_` may only appear as a binder"))
            } else {
                Ok(Term::Var(ident(&n)))
            }
        }
        Some(Tok::Star) => Ok(Term::star()),
        Some(Tok::ChoiceName(n)) => Ok(Term::Choice(ChoiceLabel::named(&n))),
        Some(Tok::LParen) => {
            let t = parse_cases(cur)?;
            cur.expect(&Tok::RParen)?;
            Ok(t)
        }
        Some(got) => Err(ParseError::new(l, c, format!("expected a term, found {got}"))),
        None => Err(ParseError::new(l, c, "expected a term, found end of input")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(src: &str) -> Term {
        parse(src).unwrap_or_else(|e| panic!("parse {src}: {e}"))
    }

    #[test]
    fn free_vars_basics() {
        assert!(p("<x>.x").free_vars().is_empty());
        assert_eq!(
            p("<x>.y").free_vars(),
            [ident("y")].into_iter().collect()
        );
        // structural recursion oracle for `[x].'i`
        fn fv_oracle(t: &Term, bound: &mut Vec<Ident>, acc: &mut BTreeSet<Ident>) {
            match t {
                Term::Var(x) => {
                    if !bound.contains(x) {
                        acc.insert(x.clone());
                    }
                }
                Term::Choice(_) => {}
                Term::Push(a, _, m) => {
                    fv_oracle(a, bound, acc);
                    fv_oracle(m, bound, acc);
                }
                Term::Pop(_, x, _, m) => {
                    bound.push(x.clone());
                    fv_oracle(m, bound, acc);
                    bound.pop();
                }
                Term::Case(a, _, b) => {
                    fv_oracle(a, bound, acc);
                    fv_oracle(b, bound, acc);
                }
                Term::Loop(a, _) => fv_oracle(a, bound, acc),
            }
        }
        let t = p("[x].'i");
        let mut expected = BTreeSet::new();
        fv_oracle(&t, &mut Vec::new(), &mut expected);
        assert_eq!(t.free_vars(), expected);
        assert_eq!(expected, [ident("x")].into_iter().collect());
    }

    #[test]
    fn substitution_basics() {
        let n = p("[*].*");
        // {N/x}x = N
        assert_eq!(Term::var("x").substitute(&ident("x"), &n), n);
        // shadowing: {N/x}(<x>.M) = <x>.M
        let shadowed = p("<x>.x");
        assert_eq!(shadowed.substitute(&ident("x"), &n), shadowed);
        // capture avoidance: {y/x}(<y>.x) = <y'>.y
        let t = p("<y>.x");
        let r = t.substitute(&ident("x"), &Term::var("y"));
        assert!(r.alpha_eq(&p("<z>.y")));
        assert_eq!(r.to_string(), "<y'>.y");
    }

    #[test]
    fn substitution_for_blank_is_noop() {
        let t = p("<x>.x");
        assert_eq!(t.substitute(&Ident::blank(), &p("*")), t);
    }

    #[test]
    fn alpha_equivalence() {
        assert!(p("<x>.x").alpha_eq(&p("<y>.y")));
        assert!(!p("<x>.y").alpha_eq(&p("<x>.z")));
        // recursive comparison oracle
        assert!(p("[<x>.x].'i").alpha_eq(&p("[<z>.z].'i")));
        assert!(!p("<x>.x").alpha_eq(&p("<_>.x")));
        assert!(p("<x>.y").alpha_eq(&p("<_>.y")));
        // annotations are ignored
        assert!(p("<x: e => e.*>.x").alpha_eq(&p("<x>.x")));
    }

    #[test]
    fn size_counts_constructors() {
        assert_eq!(p("*").size(), 1);
        assert_eq!(p("<x>.x").size(), 2);
        assert_eq!(p("[x].'i").size(), 3);
    }

    #[test]
    fn parse_shapes() {
        // direct grammar reading
        let t = p("[n].<x>.x");
        assert_eq!(
            t,
            Term::push(
                Term::var("n"),
                Location::Default,
                Term::pop(Location::Default, ident("x"), None, Term::var("x"))
            )
        );
        // case associates left
        let t = p("m;'i->n;'j->q");
        assert_eq!(
            t,
            Term::case(
                Term::case(Term::var("m"), ChoiceLabel::named("i"), Term::var("n")),
                ChoiceLabel::named("j"),
                Term::var("q")
            )
        );
        // store lookup body
        let t = p("a<x>.[x]a.[x].*");
        assert_eq!(
            t,
            Term::pop(
                Location::named("a"),
                ident("x"),
                None,
                Term::push(
                    Term::var("x"),
                    Location::named("a"),
                    Term::push(Term::var("x"), Location::Default, Term::star())
                )
            )
        );
    }

    #[test]
    fn loop_binds_prefix_chain() {
        assert_eq!(
            p("<x>.x^*"),
            Term::looped(
                Term::pop(Location::Default, ident("x"), None, Term::var("x")),
                ChoiceLabel::Star
            )
        );
        assert_eq!(p("[n].m^'i"), Term::looped(p("[n].m"), ChoiceLabel::named("i")));
        // parenthesised loop in continuation position
        assert_eq!(
            p("[n].(m^'i)"),
            Term::push(Term::var("n"), Location::Default, p("m^'i"))
        );
    }

    #[test]
    fn sequence_sugar() {
        assert_eq!(p("m;n"), Term::seq(Term::var("m"), Term::var("n")));
        assert_eq!(p("m;*->n"), Term::seq(Term::var("m"), Term::var("n")));
        // `;'i` without an arrow is a sequence whose rhs is the choice
        assert_eq!(p("m;'i"), Term::seq(Term::var("m"), Term::choice("i")));
    }

    #[test]
    fn parse_errors_have_positions() {
        let e = parse("[n].").unwrap_err();
        assert_eq!((e.line, e.col), (1, 5));
        assert!(parse("_").is_err());
        let e = parse("<x>.\n  )").unwrap_err();
        assert_eq!(e.line, 2);
    }

    #[test]
    fn comments_and_whitespace() {
        let t = p("-- lookup\n a<x>.  [x]a.\n[x].* -- done");
        assert_eq!(t, p("a<x>.[x]a.[x].*"));
    }

    #[test]
    fn print_parse_round_trip_fixed() {
        for src in [
            "*",
            "'i",
            "<x>.x",
            "[<x>.x].'i",
            "m;'i->n;'j->q",
            "m;(n;'i->q)",
            "(m;n)^'i",
            "x^'i^'j",
            "[n]a.b<y>.y",
            "a<x: e => e.*>.x",
            "[x].'i;'j->*",
        ] {
            let t = p(src);
            let printed = t.to_string();
            let back = p(&printed);
            assert!(back.alpha_eq(&t), "round trip failed: {src} -> {printed}");
        }
    }

    #[test]
    fn canonical_form_identifies_alpha_classes() {
        let a = p("<x>.[x].<y>.y");
        let b = p("<u>.[u].<v>.v");
        assert_eq!(a.alpha_canonical(), b.alpha_canonical());
        let c = p("<u>.[u].<v>.u");
        assert_ne!(a.alpha_canonical(), c.alpha_canonical());
    }
}
