//! A toolkit for the functional machine calculus: a lambda-calculus with
//! named operand stacks (locations) and branching/looping control
//! (choices, cases, loops).
//!
//! The crate provides the core term syntax with parser and printer
//! ([`syntax`]), the small-step abstract machine ([`machine`]), big-step
//! and measured evaluation ([`eval`]), the reduction relation with its
//! affine/duplicating split and parallel-reduction machinery ([`rewrite`]),
//! the simple type system with synthesis and inhabitation ([`types`]), an
//! imperative surface language that macro-expands into core terms
//! ([`surface`]), and seeded random generators with executable metatheory
//! suites ([`harness`]).

pub mod eval;
pub mod harness;
pub mod machine;
pub mod rewrite;
pub mod surface;
pub mod syntax;
pub mod types;

pub use syntax::{parse, ChoiceLabel, Ident, Location, ParseError, Term};
pub use types::{parse_vtype, Context, MemType, StackType, SumType, TypeError, ValueType};
