//! Terms, substitutions and first-order unification.

use std::collections::BTreeMap;
use std::fmt;

/// A first-order term of the agent language.
#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    Atom(String),
    Var(String),
    Num(f64),
    Str(String),
    /// Compound term. Arity is always at least one; zero-arity terms are atoms.
    Struct(String, Vec<Term>),
}

impl Term {
    pub fn atom(name: impl Into<String>) -> Self {
        Term::Atom(name.into())
    }

    pub fn var(name: impl Into<String>) -> Self {
        Term::Var(name.into())
    }

    pub fn num(value: f64) -> Self {
        Term::Num(value)
    }

    pub fn string(text: impl Into<String>) -> Self {
        Term::Str(text.into())
    }

    /// Builds a compound term, collapsing to an atom when `args` is empty.
    pub fn compound(functor: impl Into<String>, args: Vec<Term>) -> Self {
        let functor = functor.into();
        if args.is_empty() {
            Term::Atom(functor)
        } else {
            Term::Struct(functor, args)
        }
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Struct(_, args) => args.iter().all(Term::is_ground),
            _ => true,
        }
    }

    /// Functor name and arity for atoms and compound terms.
    pub fn functor(&self) -> Option<(&str, usize)> {
        match self {
            Term::Atom(name) => Some((name, 0)),
            Term::Struct(name, args) => Some((name, args.len())),
            _ => None,
        }
    }

    pub fn args(&self) -> &[Term] {
        match self {
            Term::Struct(_, args) => args,
            _ => &[],
        }
    }

    pub fn as_num(&self) -> Option<f64> {
        match self {
            Term::Num(v) => Some(*v),
            _ => None,
        }
    }

    /// Collects variable names in first-occurrence order.
    pub fn variables(&self, out: &mut Vec<String>) {
        match self {
            Term::Var(v) if !out.contains(v) => out.push(v.clone()),
            Term::Struct(_, args) => args.iter().for_each(|a| a.variables(out)),
            _ => {}
        }
    }

    pub(crate) fn rename(&self, suffix: &str) -> Term {
        match self {
            Term::Var(v) if v == "_" => self.clone(),
            Term::Var(v) => Term::Var(format!("{v}{suffix}")),
            Term::Struct(f, args) => Term::Struct(f.clone(), args.iter().map(|a| a.rename(suffix)).collect()),
            _ => self.clone(),
        }
    }
}

pub(crate) fn fmt_num(v: f64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if v == v.trunc() && v.abs() < 1e15 {
        write!(f, "{}", v as i64)
    } else {
        write!(f, "{v}")
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Atom(a) => f.write_str(a),
            Term::Var(v) => f.write_str(v),
            Term::Num(n) => fmt_num(*n, f),
            Term::Str(s) => {
                f.write_str("\"")?;
                for c in s.chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        '\n' => f.write_str("\\n")?,
                        '\t' => f.write_str("\\t")?,
                        c => write!(f, "{c}")?,
                    }
                }
                f.write_str("\"")
            }
            Term::Struct(name, args) => {
                write!(f, "{name}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Variable bindings. Ordered so that iteration and printing are deterministic.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Substitution {
    bindings: BTreeMap<String, Term>,
}

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn get(&self, var: &str) -> Option<&Term> {
        self.bindings.get(var)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Term)> {
        self.bindings.iter()
    }

    /// Fully resolved value of `var`, if bound.
    pub fn resolve(&self, var: &str) -> Option<Term> {
        self.bindings.get(var).map(|t| self.apply(t))
    }

    fn bind(&mut self, var: String, term: Term) {
        self.bindings.insert(var, term);
    }

    /// Applies the substitution to `term`, following binding chains. Idempotent.
    pub fn apply(&self, term: &Term) -> Term {
        match term {
            Term::Var(v) => match self.bindings.get(v) {
                Some(bound) => self.apply(bound),
                None => term.clone(),
            },
            Term::Struct(f, args) => Term::Struct(f.clone(), args.iter().map(|a| self.apply(a)).collect()),
            _ => term.clone(),
        }
    }
}

fn occurs(var: &str, term: &Term, s: &Substitution) -> bool {
    match term {
        Term::Var(v) if v == var => true,
        Term::Var(v) => s.get(v).is_some_and(|t| occurs(var, t, s)),
        Term::Struct(_, args) => args.iter().any(|a| occurs(var, a, s)),
        _ => false,
    }
}

fn walk<'a>(term: &'a Term, s: &'a Substitution) -> &'a Term {
    let mut cur = term;
    while let Term::Var(v) = cur {
        match s.get(v) {
            Some(next) => cur = next,
            None => break,
        }
    }
    cur
}

fn unify_into(a: &Term, b: &Term, s: &mut Substitution) -> bool {
    let a = walk(a, s).clone();
    let b = walk(b, s).clone();
    match (&a, &b) {
        (Term::Var(x), _) if x == "_" => true,
        (_, Term::Var(y)) if y == "_" => true,
        (Term::Var(x), Term::Var(y)) if x == y => true,
        (Term::Var(x), t) | (t, Term::Var(x)) => {
            if occurs(x, t, s) {
                return false;
            }
            s.bind(x.clone(), t.clone());
            true
        }
        (Term::Atom(x), Term::Atom(y)) => x == y,
        (Term::Str(x), Term::Str(y)) => x == y,
        (Term::Num(x), Term::Num(y)) => x == y,
        (Term::Struct(f, xs), Term::Struct(g, ys)) => {
            f == g && xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| unify_into(x, y, s))
        }
        _ => false,
    }
}

/// Most general unifier of `a` and `b` extending `s`, or `None`.
pub fn unify(a: &Term, b: &Term, s: &Substitution) -> Option<Substitution> {
    let mut out = s.clone();
    unify_into(a, b, &mut out).then_some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(f: &str, args: Vec<Term>) -> Term {
        Term::compound(f, args)
    }

    #[test]
    fn binds_variable_to_number() {
        let s = unify(&st("mission", vec![Term::var("X")]), &st("mission", vec![Term::num(5.0)]), &Substitution::new()).unwrap();
        assert_eq!(s.resolve("X"), Some(Term::num(5.0)));
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn distinct_atoms_fail() {
        assert!(unify(&Term::atom("a"), &Term::atom("b"), &Substitution::new()).is_none());
    }

    #[test]
    fn inconsistent_binding_fails() {
        let a = st("f", vec![Term::var("X"), Term::var("X")]);
        let b = st("f", vec![Term::num(1.0), Term::num(2.0)]);
        assert!(unify(&a, &b, &Substitution::new()).is_none());
    }

    #[test]
    fn occurs_check_rejects_cycles() {
        let a = Term::var("X");
        let b = st("f", vec![Term::var("X")]);
        assert!(unify(&a, &b, &Substitution::new()).is_none());
    }

    #[test]
    fn anonymous_variable_binds_nothing() {
        let s = unify(&st("p", vec![Term::var("_"), Term::var("_")]), &st("p", vec![Term::num(1.0), Term::num(2.0)]), &Substitution::new()).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn chains_resolve_through_apply() {
        let s = unify(&st("p", vec![Term::var("X"), Term::var("Y")]), &st("p", vec![Term::var("Y"), Term::atom("z")]), &Substitution::new()).unwrap();
        assert_eq!(s.apply(&Term::var("X")), Term::atom("z"));
    }

    #[test]
    fn display_formats() {
        let t = st("m", vec![Term::num(40.0), Term::num(-2.5), Term::string("a\"b"), Term::var("X")]);
        assert_eq!(t.to_string(), "m(40,-2.5,\"a\\\"b\",X)");
    }
}
