//! AgentSpeak subset: terms, parser and the BDI reasoning cycle.

mod agent;
mod ast;
mod parser;
mod term;

pub use agent::{check_context, ActionRequest, AgentError, AgentState, Diagnostics};
pub use ast::{AgentProgram, BodyStep, Condition, Plan, RelOp, TriggerEvent, TriggerKind};
pub use parser::{parse_program, parse_term, ParseError, Position};
pub use term::{unify, Substitution, Term};
