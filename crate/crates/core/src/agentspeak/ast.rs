//! Parsed program structure and its canonical printed form.

use std::fmt;

use super::term::Term;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TriggerKind {
    BeliefAdd,
    BeliefDel,
    GoalAdd,
    GoalDel,
}

impl TriggerKind {
    fn prefix(self) -> &'static str {
        match self {
            TriggerKind::BeliefAdd => "+",
            TriggerKind::BeliefDel => "-",
            TriggerKind::GoalAdd => "+!",
            TriggerKind::GoalDel => "-!",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriggerEvent {
    pub kind: TriggerKind,
    pub content: Term,
}

impl TriggerEvent {
    pub fn new(kind: TriggerKind, content: Term) -> Self {
        Self { kind, content }
    }

    pub fn belief_add(content: Term) -> Self {
        Self::new(TriggerKind::BeliefAdd, content)
    }

    pub fn belief_del(content: Term) -> Self {
        Self::new(TriggerKind::BeliefDel, content)
    }

    pub fn goal_add(content: Term) -> Self {
        Self::new(TriggerKind::GoalAdd, content)
    }
}

impl fmt::Display for TriggerEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.kind.prefix(), self.content)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl RelOp {
    pub fn symbol(self) -> &'static str {
        match self {
            RelOp::Lt => "<",
            RelOp::Le => "<=",
            RelOp::Gt => ">",
            RelOp::Ge => ">=",
            RelOp::Eq => "==",
            RelOp::Ne => "\\==",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Condition {
    Literal(Term),
    Not(Term),
    Rel(Term, RelOp, Term),
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::Literal(t) => write!(f, "{t}"),
            Condition::Not(t) => write!(f, "not {t}"),
            Condition::Rel(l, op, r) => write!(f, "{l} {} {r}", op.symbol()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BodyStep {
    /// External (or `.`-prefixed host-internal) action.
    Action { name: String, args: Vec<Term> },
    AchieveGoal(Term),
    TestGoal(Term),
    AddBelief(Term),
    DelBelief(Term),
}

impl fmt::Display for BodyStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BodyStep::Action { name, args } => {
                f.write_str(name)?;
                if !args.is_empty() {
                    f.write_str("(")?;
                    for (i, a) in args.iter().enumerate() {
                        if i > 0 {
                            f.write_str(",")?;
                        }
                        write!(f, "{a}")?;
                    }
                    f.write_str(")")?;
                }
                Ok(())
            }
            BodyStep::AchieveGoal(t) => write!(f, "!{t}"),
            BodyStep::TestGoal(t) => write!(f, "?{t}"),
            BodyStep::AddBelief(t) => write!(f, "+{t}"),
            BodyStep::DelBelief(t) => write!(f, "-{t}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub trigger: TriggerEvent,
    /// Empty means `true`.
    pub context: Vec<Condition>,
    /// Empty means `true`.
    pub body: Vec<BodyStep>,
}

impl Plan {
    pub(crate) fn renamed(&self, suffix: &str) -> Plan {
        let cond = |c: &Condition| match c {
            Condition::Literal(t) => Condition::Literal(t.rename(suffix)),
            Condition::Not(t) => Condition::Not(t.rename(suffix)),
            Condition::Rel(l, op, r) => Condition::Rel(l.rename(suffix), *op, r.rename(suffix)),
        };
        let step = |s: &BodyStep| match s {
            BodyStep::Action { name, args } => BodyStep::Action {
                name: name.clone(),
                args: args.iter().map(|a| a.rename(suffix)).collect(),
            },
            BodyStep::AchieveGoal(t) => BodyStep::AchieveGoal(t.rename(suffix)),
            BodyStep::TestGoal(t) => BodyStep::TestGoal(t.rename(suffix)),
            BodyStep::AddBelief(t) => BodyStep::AddBelief(t.rename(suffix)),
            BodyStep::DelBelief(t) => BodyStep::DelBelief(t.rename(suffix)),
        };
        Plan {
            trigger: TriggerEvent::new(self.trigger.kind, self.trigger.content.rename(suffix)),
            context: self.context.iter().map(cond).collect(),
            body: self.body.iter().map(step).collect(),
        }
    }

    /// Names of every action the plan body can dispatch.
    pub fn action_names(&self) -> impl Iterator<Item = &str> {
        self.body.iter().filter_map(|s| match s {
            BodyStep::Action { name, .. } => Some(name.as_str()),
            _ => None,
        })
    }
}

impl fmt::Display for Plan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} : ", self.trigger)?;
        if self.context.is_empty() {
            f.write_str("true")?;
        } else {
            for (i, c) in self.context.iter().enumerate() {
                if i > 0 {
                    f.write_str(" & ")?;
                }
                write!(f, "{c}")?;
            }
        }
        f.write_str(" <- ")?;
        if self.body.is_empty() {
            f.write_str("true")?;
        } else {
            for (i, s) in self.body.iter().enumerate() {
                if i > 0 {
                    f.write_str("; ")?;
                }
                write!(f, "{s}")?;
            }
        }
        f.write_str(".")
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AgentProgram {
    pub initial_beliefs: Vec<Term>,
    pub initial_goals: Vec<Term>,
    pub plans: Vec<Plan>,
}

impl AgentProgram {
    /// Every distinct action name used by the program, in first-use order.
    pub fn action_names(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for name in self.plans.iter().flat_map(Plan::action_names) {
            if !out.iter().any(|n| n == name) {
                out.push(name.to_string());
            }
        }
        out
    }
}

impl fmt::Display for AgentProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.initial_beliefs {
            writeln!(f, "{b}.")?;
        }
        for g in &self.initial_goals {
            writeln!(f, "!{g}.")?;
        }
        for p in &self.plans {
            writeln!(f, "{p}")?;
        }
        Ok(())
    }
}
