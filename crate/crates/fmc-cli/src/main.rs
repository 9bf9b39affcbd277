//! Batch command-line driver: parse, run (with trace), step, big-step
//! eval, normalize, type check/synthesis, surface desugaring, type
//! inhabitation, and seeded term/type generation.
//!
//! Exit codes: 0 success, 1 stuck or runtime failure, 2 type or
//! desugaring error, 3 fuel exhausted, 4 parse error. Results go to
//! stdout, diagnostics to stderr. `FMC_FUEL` overrides the default fuel.

use std::io::Read;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use fmc::eval::{eval_big, EvalResult};
use fmc::harness::{gen_term_with, gen_type_with, gen_typed_term_with, seeded_rng, GenConfig};
use fmc::machine::{run_traced, step, Memory, RunResult, State, StepResult, TraceEntry};
use fmc::rewrite::{normalize_traced, NormalizeResult, ReductionStep, UnrollPolicy};
use fmc::surface::{desugar, desugar_cbv, parse_program, DesugarConfig, IntConfig};
use fmc::syntax::Location;
use fmc::types::{check, parse_vtype, synthesize, Context};
use fmc::Term;

const EXIT_STUCK: u8 = 1;
const EXIT_TYPE: u8 = 2;
const EXIT_FUEL: u8 = 3;
const EXIT_PARSE: u8 = 4;

#[derive(Parser)]
#[command(name = "fmc", version, about = "Functional machine calculus toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Input {
    /// Inline source text; reads stdin when absent and --file is not given
    source: Option<String>,
    /// Read the source from a file
    #[arg(long, short = 'f')]
    file: Option<std::path::PathBuf>,
}

impl Input {
    fn read(&self) -> Result<String, String> {
        if let Some(path) = &self.file {
            return std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()));
        }
        if let Some(src) = &self.source {
            return Ok(src.clone());
        }
        let mut buf = String::new();
        std::io::stdin()
            .read_to_string(&mut buf)
            .map_err(|e| format!("cannot read stdin: {e}"))?;
        Ok(buf)
    }
}

#[derive(Args, Clone)]
struct Common {
    /// Transition/rule budget (default 10000, or FMC_FUEL)
    #[arg(long)]
    fuel: Option<u64>,
    /// Output format
    #[arg(long, default_value = "text")]
    format: Format,
    /// Preload a stack: LOC=T1,T2 with items in consumption order
    /// (head first); `@` names the default location
    #[arg(long, value_name = "LOC=TERMS")]
    preload: Vec<String>,
}

impl Common {
    fn fuel(&self) -> u64 {
        self.fuel
            .or_else(|| std::env::var("FMC_FUEL").ok().and_then(|v| v.parse().ok()))
            .unwrap_or(10_000)
    }

    fn memory(&self) -> Result<Memory, String> {
        let mut mem = Memory::empty();
        for spec in &self.preload {
            let (loc, items) = spec
                .split_once('=')
                .ok_or_else(|| format!("preload `{spec}` is not LOC=TERMS"))?;
            let loc = match loc.trim() {
                "@" => Location::Default,
                name => Location::Named(
                    fmc::syntax::Ident::new(name.trim())
                        .map_err(|e| format!("preload location: {e}"))?,
                ),
            };
            // listed head-first; stacks store the head last
            let mut parsed = Vec::new();
            for item in items.split(',') {
                let t = fmc::parse(item).map_err(|e| format!("preload term `{item}`: {e}"))?;
                parsed.push(t);
            }
            for t in parsed.into_iter().rev() {
                mem.push(&loc, t);
            }
        }
        Ok(mem)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone)]
enum Policy {
    Forbid,
    Bounded(u32),
}

impl std::str::FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "forbid" {
            return Ok(Policy::Forbid);
        }
        if let Some(k) = s.strip_prefix("bounded:") {
            return k
                .parse()
                .map(Policy::Bounded)
                .map_err(|e| format!("bad unroll bound: {e}"));
        }
        Err(format!("unknown unroll policy `{s}` (use `forbid` or `bounded:K`)"))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Validate a term and report its canonical form
    Parse {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value = "text")]
        format: Format,
    },
    /// Parse a term and print its canonical form
    Print {
        #[command(flatten)]
        input: Input,
    },
    /// Run the abstract machine
    Run {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        common: Common,
        /// Print one record per transition
        #[arg(long)]
        trace: bool,
    },
    /// Big-step evaluation
    Eval {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        common: Common,
    },
    /// Apply a single machine transition
    Step {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        common: Common,
    },
    /// Reduce to normal form under an unroll policy
    Normalize {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "forbid", value_name = "forbid|bounded:K")]
        unroll_policy: Policy,
        /// Print the numbered reduction steps
        #[arg(long)]
        trace: bool,
    },
    /// Check a term against a type
    Check {
        #[command(flatten)]
        input: Input,
        /// Goal type, e.g. "e => e.'i"
        #[arg(long = "type", value_name = "TYPE")]
        goal: String,
        #[arg(long, default_value = "text")]
        format: Format,
    },
    /// Synthesize the minimal type of a term
    Synth {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value = "text")]
        format: Format,
    },
    /// Macro-expand a surface program into a core term
    Desugar {
        #[command(flatten)]
        input: Input,
        /// Bounded-integer modulus
        #[arg(long, default_value_t = 8)]
        modulus: u32,
        /// Treat the input as a call-by-value expression
        #[arg(long)]
        expr: bool,
        /// Evaluate functions before arguments in cbv application
        #[arg(long)]
        cbv_function_first: bool,
        #[arg(long, default_value = "text")]
        format: Format,
    },
    /// Print the zero term inhabiting a type
    Inhabit {
        /// The type, e.g. "a(e => e.*) => e.'i"
        #[arg(long = "type", value_name = "TYPE")]
        goal: String,
        #[arg(long, default_value = "text")]
        format: Format,
    },
    /// Generate seeded random terms or types
    Gen {
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 16)]
        max_size: usize,
        /// Sample typing derivations so every term synthesizes
        #[arg(long)]
        typed: bool,
        #[arg(long, default_value_t = 0.0)]
        loop_prob: f64,
        #[arg(long, default_value_t = 2)]
        locations: usize,
        #[arg(long, default_value_t = 2)]
        choices: usize,
        /// Emit types instead of terms
        #[arg(long)]
        types: bool,
        #[arg(long, default_value = "text")]
        format: Format,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, msg)) => {
            eprintln!("{msg}");
            ExitCode::from(code)
        }
    }
}

type Failure = (u8, String);

fn parse_term(src: &str) -> Result<Term, Failure> {
    fmc::parse(src).map_err(|e| (EXIT_PARSE, e.to_string()))
}

fn memory_json(mem: &Memory) -> Value {
    let mut obj = serde_json::Map::new();
    for (loc, stack) in mem.entries() {
        let key = match loc {
            Location::Default => "@".to_string(),
            Location::Named(n) => n.to_string(),
        };
        obj.insert(key, Value::Array(stack.iter().map(|t| json!(t.to_string())).collect()));
    }
    Value::Object(obj)
}

fn trace_json(trace: &[TraceEntry]) -> Value {
    Value::Array(
        trace
            .iter()
            .map(|e| {
                json!({
                    "step": e.step,
                    "rule": e.rule.name(),
                    "memory": memory_json(&e.memory),
                    "term": e.term.to_string(),
                    "cont_depth": e.cont_depth,
                })
            })
            .collect(),
    )
}

fn reduction_trace_json(steps: &[ReductionStep]) -> Value {
    Value::Array(
        steps
            .iter()
            .enumerate()
            .map(|(i, s)| {
                json!({
                    "step": i + 1,
                    "rule": s.rule.name(),
                    "path": s.path,
                    "before": s.before.to_string(),
                    "after": s.after.to_string(),
                })
            })
            .collect(),
    )
}

fn surface_failure(e: fmc::surface::SurfaceError) -> Failure {
    match e {
        fmc::surface::SurfaceError::Parse(p) => (EXIT_PARSE, p.to_string()),
        other => (EXIT_TYPE, format!("desugar error: {other}")),
    }
}

fn dispatch(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Parse { input, format } => {
            let src = input.read().map_err(|e| (EXIT_PARSE, e))?;
            let term = parse_term(&src)?;
            match format {
                Format::Text => println!("{term}"),
                Format::Json => println!(
                    "{}",
                    json!({ "ok": true, "term": term.to_string(), "size": term.size() })
                ),
            }
            Ok(())
        }
        Command::Print { input } => {
            let src = input.read().map_err(|e| (EXIT_PARSE, e))?;
            println!("{}", parse_term(&src)?);
            Ok(())
        }
        Command::Run { input, common, trace } => {
            let src = input.read().map_err(|e| (EXIT_PARSE, e))?;
            let term = parse_term(&src)?;
            let mem = common.memory().map_err(|e| (EXIT_PARSE, e))?;
            let (result, entries) = run_traced(term, mem, common.fuel());
            match common.format {
                Format::Text => {
                    if trace {
                        for e in &entries {
                            println!("{e}");
                        }
                    }
                    match result {
                        RunResult::Final { memory, choice, steps, pops } => {
                            println!(
                                "memory: {memory}  choice: {choice}  steps: {steps}  pops: {pops}"
                            );
                            Ok(())
                        }
                        RunResult::Stuck { state, reason } => Err((
                            EXIT_STUCK,
                            format!(
                                "stuck after {} steps: {reason}\nstate: {state}",
                                entries.len()
                            ),
                        )),
                        RunResult::FuelExhausted { state, steps } => Err((
                            EXIT_FUEL,
                            format!("fuel exhausted after {steps} steps\nstate: {state}"),
                        )),
                    }
                }
                Format::Json => {
                    let mut obj = serde_json::Map::new();
                    if trace {
                        obj.insert("trace".into(), trace_json(&entries));
                    }
                    match result {
                        RunResult::Final { memory, choice, steps, pops } => {
                            obj.insert("outcome".into(), json!("final"));
                            obj.insert("memory".into(), memory_json(&memory));
                            obj.insert("choice".into(), json!(choice.to_string()));
                            obj.insert("steps".into(), json!(steps));
                            obj.insert("pops".into(), json!(pops));
                            println!("{}", Value::Object(obj));
                            Ok(())
                        }
                        RunResult::Stuck { state, reason } => {
                            obj.insert("outcome".into(), json!("stuck"));
                            obj.insert("reason".into(), json!(reason.to_string()));
                            obj.insert("term".into(), json!(state.term.to_string()));
                            obj.insert("memory".into(), memory_json(&state.memory));
                            println!("{}", Value::Object(obj));
                            Err((EXIT_STUCK, reason.to_string()))
                        }
                        RunResult::FuelExhausted { steps, .. } => {
                            obj.insert("outcome".into(), json!("fuel-exhausted"));
                            obj.insert("steps".into(), json!(steps));
                            println!("{}", Value::Object(obj));
                            Err((EXIT_FUEL, "fuel exhausted".to_string()))
                        }
                    }
                }
            }
        }
        Command::Eval { input, common } => {
            let src = input.read().map_err(|e| (EXIT_PARSE, e))?;
            let term = parse_term(&src)?;
            let mem = common.memory().map_err(|e| (EXIT_PARSE, e))?;
            match eval_big(&term, mem, common.fuel()) {
                EvalResult::Value(memory, choice) => {
                    match common.format {
                        Format::Text => println!("memory: {memory}  choice: {choice}"),
                        Format::Json => println!(
                            "{}",
                            json!({
                                "outcome": "value",
                                "memory": memory_json(&memory),
                                "choice": choice.to_string(),
                            })
                        ),
                    }
                    Ok(())
                }
                EvalResult::Failed(reason) => {
                    Err((EXIT_STUCK, format!("evaluation failed: {reason}")))
                }
                EvalResult::Diverged => Err((EXIT_FUEL, "evaluation ran out of fuel".to_string())),
            }
        }
        Command::Step { input, common } => {
            let src = input.read().map_err(|e| (EXIT_PARSE, e))?;
            let term = parse_term(&src)?;
            let mem = common.memory().map_err(|e| (EXIT_PARSE, e))?;
            let state = State::initial(term, mem);
            match step(state) {
                StepResult::Next(s, rule) => {
                    match common.format {
                        Format::Text => {
                            println!("rule: {rule}");
                            println!("memory: {}", s.memory);
                            println!("term: {}", s.term);
                            println!("cont: {}", s.cont.depth());
                        }
                        Format::Json => println!(
                            "{}",
                            json!({
                                "outcome": "next",
                                "rule": rule.name(),
                                "memory": memory_json(&s.memory),
                                "term": s.term.to_string(),
                                "cont_depth": s.cont.depth(),
                            })
                        ),
                    }
                    Ok(())
                }
                StepResult::Final(s) => {
                    match common.format {
                        Format::Text => println!("final: {}", s.term),
                        Format::Json => println!(
                            "{}",
                            json!({ "outcome": "final", "choice": s.term.to_string() })
                        ),
                    }
                    Ok(())
                }
                StepResult::Stuck(_, reason) => Err((EXIT_STUCK, format!("stuck: {reason}"))),
            }
        }
        Command::Normalize { input, common, unroll_policy, trace } => {
            let src = input.read().map_err(|e| (EXIT_PARSE, e))?;
            let term = parse_term(&src)?;
            let policy = match unroll_policy {
                Policy::Forbid => UnrollPolicy::Forbid,
                Policy::Bounded(k) => UnrollPolicy::Bounded(k),
            };
            let (result, steps) = normalize_traced(&term, common.fuel(), policy);
            match common.format {
                Format::Text => {
                    if trace {
                        for (i, s) in steps.iter().enumerate() {
                            println!("#{} {}  at {:?}", i + 1, s.rule, s.path);
                            println!("  before: {}", s.before);
                            println!("  after:  {}", s.after);
                        }
                    }
                    match result {
                        NormalizeResult::Normal(t) => {
                            println!("{t}");
                            Ok(())
                        }
                        NormalizeResult::FuelExhausted(t) => {
                            println!("{t}");
                            Err((EXIT_FUEL, "normalization ran out of fuel".to_string()))
                        }
                    }
                }
                Format::Json => {
                    let done = matches!(result, NormalizeResult::Normal(_));
                    let mut obj = serde_json::Map::new();
                    if trace {
                        obj.insert("trace".into(), reduction_trace_json(&steps));
                    }
                    obj.insert("normal".into(), json!(done));
                    obj.insert("term".into(), json!(result.term().to_string()));
                    println!("{}", Value::Object(obj));
                    if done {
                        Ok(())
                    } else {
                        Err((EXIT_FUEL, "normalization ran out of fuel".to_string()))
                    }
                }
            }
        }
        Command::Check { input, goal, format } => {
            let src = input.read().map_err(|e| (EXIT_PARSE, e))?;
            let term = parse_term(&src)?;
            let goal = parse_vtype(&goal).map_err(|e| (EXIT_PARSE, format!("goal type: {e}")))?;
            match check(&Context::empty(), &term, &goal) {
                Ok(()) => {
                    match format {
                        Format::Text => println!("ok"),
                        Format::Json => {
                            println!("{}", json!({ "ok": true, "type": goal.to_string() }))
                        }
                    }
                    Ok(())
                }
                Err(e) => Err((EXIT_TYPE, format!("type error: {e}"))),
            }
        }
        Command::Synth { input, format } => {
            let src = input.read().map_err(|e| (EXIT_PARSE, e))?;
            let term = parse_term(&src)?;
            match synthesize(&Context::empty(), &term) {
                Ok(ty) => {
                    match format {
                        Format::Text => println!("{ty}"),
                        Format::Json => println!("{}", json!({ "type": ty.to_string() })),
                    }
                    Ok(())
                }
                Err(e) => Err((EXIT_TYPE, format!("type error: {e}"))),
            }
        }
        Command::Desugar { input, modulus, expr, cbv_function_first, format } => {
            let src = input.read().map_err(|e| (EXIT_PARSE, e))?;
            let cfg =
                DesugarConfig { ints: IntConfig { modulus }, cbv_function_first, data: Vec::new() };
            let term = if expr {
                // reuse the statement parser for the expression grammar
                let program = parse_program(&format!("print ({src})"))
                    .map_err(|e| (EXIT_PARSE, e.to_string()))?;
                match program {
                    fmc::surface::Stmt::Print(e) => desugar_cbv(&e, &cfg).map_err(surface_failure)?,
                    _ => unreachable!("print wraps one expression"),
                }
            } else {
                let program = parse_program(&src).map_err(|e| (EXIT_PARSE, e.to_string()))?;
                desugar(&program, &cfg).map_err(surface_failure)?
            };
            match format {
                Format::Text => println!("{term}"),
                Format::Json => {
                    println!("{}", json!({ "term": term.to_string(), "size": term.size() }))
                }
            }
            Ok(())
        }
        Command::Inhabit { goal, format } => {
            let goal = parse_vtype(&goal).map_err(|e| (EXIT_PARSE, format!("type: {e}")))?;
            let zero = fmc::types::inhabit(&goal);
            match format {
                Format::Text => println!("{zero}"),
                Format::Json => println!("{}", json!({ "term": zero.to_string() })),
            }
            Ok(())
        }
        Command::Gen {
            count,
            seed,
            max_size,
            typed,
            loop_prob,
            locations,
            choices,
            types,
            format,
        } => {
            let cfg = GenConfig { seed, max_size, locations, choices, loop_prob, typed };
            let mut rng = seeded_rng(seed);
            if types {
                let items: Vec<String> =
                    (0..count).map(|_| gen_type_with(&mut rng, &cfg, 2, true).to_string()).collect();
                match format {
                    Format::Text => items.iter().for_each(|l| println!("{l}")),
                    Format::Json => println!("{}", json!(items)),
                }
            } else if typed {
                let items: Vec<(String, String)> = (0..count)
                    .map(|_| {
                        let (t, ty) = gen_typed_term_with(&mut rng, &cfg);
                        (t.to_string(), ty.to_string())
                    })
                    .collect();
                match format {
                    Format::Text => {
                        items.iter().for_each(|(t, ty)| println!("{t}  -- : {ty}"))
                    }
                    Format::Json => {
                        let arr: Vec<Value> = items
                            .iter()
                            .map(|(t, ty)| json!({ "term": t, "type": ty }))
                            .collect();
                        println!("{}", Value::Array(arr));
                    }
                }
            } else {
                let items: Vec<String> =
                    (0..count).map(|_| gen_term_with(&mut rng, &cfg).to_string()).collect();
                match format {
                    Format::Text => items.iter().for_each(|l| println!("{l}")),
                    Format::Json => println!("{}", json!(items)),
                }
            }
            Ok(())
        }
    }
}
