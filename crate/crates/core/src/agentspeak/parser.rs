//! Lexer and recursive-descent parser for the agent language subset.
//!
//! ```text
//! program   := item*
//! item      := literal "." | "!" literal "." | trigger [":" context] ["<-" body] "."
//! trigger   := ("+" | "-") ["!"] literal
//! context   := "true" | cond ("&" cond)*
//! cond      := "not" literal | term relop term | literal
//! body      := "true" | step (";" step)*
//! step      := "!" literal | "?" literal | "+" literal | "-" literal | action
//! ```

use thiserror::Error;

use super::ast::{AgentProgram, BodyStep, Condition, Plan, RelOp, TriggerEvent, TriggerKind};
use super::term::Term;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Position {
    pub line: usize,
    pub col: usize,
}

impl std::fmt::Display for Position {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("{pos}: unexpected character {ch:?}")]
    Lex { pos: Position, ch: char },
    #[error("{pos}: unterminated {what}")]
    Unterminated { pos: Position, what: &'static str },
    #[error("{pos}: found {found}, expected {expected}")]
    Unexpected { pos: Position, found: String, expected: String },
    #[error("{pos}: compound term `{functor}()` has no arguments")]
    EmptyArgs { pos: Position, functor: String },
    #[error("{pos}: initial belief `{term}` is not ground")]
    NonGroundBelief { pos: Position, term: String },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Atom(String),
    Var(String),
    Num(f64),
    Str(String),
    Internal(String),
    LParen,
    RParen,
    Comma,
    Period,
    Colon,
    Arrow,
    Semi,
    Amp,
    Plus,
    Minus,
    Bang,
    Question,
    Rel(RelOp),
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Atom(a) => format!("`{a}`"),
            Tok::Var(v) => format!("variable `{v}`"),
            Tok::Num(n) => format!("number {n}"),
            Tok::Str(_) => "string".into(),
            Tok::Internal(n) => format!("`{n}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Period => "`.`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Arrow => "`<-`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Amp => "`&`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Bang => "`!`".into(),
            Tok::Question => "`?`".into(),
            Tok::Rel(op) => format!("`{}`", op.symbol()),
            Tok::Eof => "end of input".into(),
        }
    }
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    src: &'a str,
    line: usize,
    col: usize,
}

fn is_ident(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Self { chars: src.char_indices().peekable(), src, line: 1, col: 1 }
    }

    fn pos(&self) -> Position {
        Position { line: self.line, col: self.col }
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().map(|&(_, c)| c)
    }

    fn peek2(&self) -> Option<char> {
        let mut it = self.chars.clone();
        it.next();
        it.next().map(|(_, c)| c)
    }

    fn bump(&mut self) -> Option<char> {
        let (_, c) = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn offset(&mut self) -> usize {
        self.chars.peek().map_or(self.src.len(), |&(i, _)| i)
    }

    fn ident(&mut self) -> String {
        let start = self.offset();
        while self.peek().is_some_and(is_ident) {
            self.bump();
        }
        let end = self.offset();
        self.src[start..end].to_string()
    }

    fn skip_trivia(&mut self) -> Result<(), ParseError> {
        loop {
            match self.peek() {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('/') if self.peek2() == Some('/') => {
                    while self.peek().is_some_and(|c| c != '\n') {
                        self.bump();
                    }
                }
                Some('/') if self.peek2() == Some('*') => {
                    let pos = self.pos();
                    self.bump();
                    self.bump();
                    loop {
                        match self.bump() {
                            Some('*') if self.peek() == Some('/') => {
                                self.bump();
                                break;
                            }
                            Some(_) => {}
                            None => return Err(ParseError::Unterminated { pos, what: "block comment" }),
                        }
                    }
                }
                _ => return Ok(()),
            }
        }
    }

    fn number(&mut self) -> f64 {
        let start = self.offset();
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.bump();
        }
        if self.peek() == Some('.') && self.peek2().is_some_and(|c| c.is_ascii_digit()) {
            self.bump();
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.bump();
            }
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            let mut it = self.chars.clone();
            it.next();
            let next = it.next().map(|(_, c)| c);
            let after = it.next().map(|(_, c)| c);
            let exp = match next {
                Some(c) if c.is_ascii_digit() => true,
                Some('+' | '-') => after.is_some_and(|c| c.is_ascii_digit()),
                _ => false,
            };
            if exp {
                self.bump();
                if matches!(self.peek(), Some('+' | '-')) {
                    self.bump();
                }
                while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                    self.bump();
                }
            }
        }
        let end = self.offset();
        // Digits with optional fraction/exponent always parse.
        self.src[start..end].parse().unwrap_or(f64::NAN)
    }

    fn string(&mut self) -> Result<String, ParseError> {
        let pos = self.pos();
        self.bump();
        let mut out = String::new();
        loop {
            match self.bump() {
                Some('"') => return Ok(out),
                Some('\\') => match self.bump() {
                    Some('n') => out.push('\n'),
                    Some('t') => out.push('\t'),
                    Some(c) => out.push(c),
                    None => return Err(ParseError::Unterminated { pos, what: "string" }),
                },
                Some(c) => out.push(c),
                None => return Err(ParseError::Unterminated { pos, what: "string" }),
            }
        }
    }

    fn next_token(&mut self) -> Result<(Tok, Position), ParseError> {
        self.skip_trivia()?;
        let pos = self.pos();
        let Some(c) = self.peek() else {
            return Ok((Tok::Eof, pos));
        };
        let tok = match c {
            'a'..='z' => Tok::Atom(self.ident()),
            'A'..='Z' | '_' => Tok::Var(self.ident()),
            '0'..='9' => Tok::Num(self.number()),
            '"' => Tok::Str(self.string()?),
            '.' if self.peek2().is_some_and(|c| c.is_ascii_lowercase()) => {
                self.bump();
                Tok::Internal(format!(".{}", self.ident()))
            }
            _ => {
                self.bump();
                match c {
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    ',' => Tok::Comma,
                    '.' => Tok::Period,
                    ':' => Tok::Colon,
                    ';' => Tok::Semi,
                    '&' => Tok::Amp,
                    '+' => Tok::Plus,
                    '-' => Tok::Minus,
                    '!' => Tok::Bang,
                    '?' => Tok::Question,
                    '<' => match self.peek() {
                        Some('-') => {
                            self.bump();
                            Tok::Arrow
                        }
                        Some('=') => {
                            self.bump();
                            Tok::Rel(RelOp::Le)
                        }
                        _ => Tok::Rel(RelOp::Lt),
                    },
                    '>' => {
                        if self.peek() == Some('=') {
                            self.bump();
                            Tok::Rel(RelOp::Ge)
                        } else {
                            Tok::Rel(RelOp::Gt)
                        }
                    }
                    '=' if self.peek() == Some('=') => {
                        self.bump();
                        Tok::Rel(RelOp::Eq)
                    }
                    '\\' if self.peek() == Some('=') && self.peek2() == Some('=') => {
                        self.bump();
                        self.bump();
                        Tok::Rel(RelOp::Ne)
                    }
                    other => return Err(ParseError::Lex { pos, ch: other }),
                }
            }
        };
        Ok((tok, pos))
    }
}

fn tokenize(src: &str) -> Result<Vec<(Tok, Position)>, ParseError> {
    let mut lx = Lexer::new(src);
    let mut out = Vec::new();
    loop {
        let (tok, pos) = lx.next_token()?;
        let eof = tok == Tok::Eof;
        out.push((tok, pos));
        if eof {
            return Ok(out);
        }
    }
}

struct Parser {
    toks: Vec<(Tok, Position)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.at + n).min(self.toks.len() - 1)].0
    }

    fn pos(&self) -> Position {
        self.toks[self.at].1
    }

    fn advance(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn unexpected(&self, expected: &str) -> ParseError {
        ParseError::Unexpected { pos: self.pos(), found: self.peek().describe(), expected: expected.into() }
    }

    fn expect(&mut self, tok: Tok, expected: &str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.advance();
            Ok(())
        } else {
            Err(self.unexpected(expected))
        }
    }

    fn args(&mut self, functor: &str) -> Result<Vec<Term>, ParseError> {
        let pos = self.pos();
        self.expect(Tok::LParen, "`(`")?;
        if *self.peek() == Tok::RParen {
            return Err(ParseError::EmptyArgs { pos, functor: functor.to_string() });
        }
        let mut args = vec![self.term()?];
        loop {
            match self.peek() {
                Tok::Comma => {
                    self.advance();
                    args.push(self.term()?);
                }
                Tok::RParen => {
                    self.advance();
                    return Ok(args);
                }
                _ => return Err(self.unexpected("`,` or `)`")),
            }
        }
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        match self.peek().clone() {
            Tok::Atom(_) => self.literal(),
            Tok::Var(v) => {
                self.advance();
                Ok(Term::Var(v))
            }
            Tok::Num(n) => {
                self.advance();
                Ok(Term::Num(n))
            }
            Tok::Minus if matches!(self.peek_at(1), Tok::Num(_)) => {
                self.advance();
                let Tok::Num(n) = self.advance() else { unreachable!() };
                Ok(Term::Num(-n))
            }
            Tok::Str(s) => {
                self.advance();
                Ok(Term::Str(s))
            }
            _ => Err(self.unexpected("a term")),
        }
    }

    fn literal(&mut self) -> Result<Term, ParseError> {
        let Tok::Atom(name) = self.peek().clone() else {
            return Err(self.unexpected("a literal"));
        };
        self.advance();
        if *self.peek() == Tok::LParen {
            let args = self.args(&name)?;
            Ok(Term::Struct(name, args))
        } else {
            Ok(Term::Atom(name))
        }
    }

    fn condition(&mut self) -> Result<Condition, ParseError> {
        if *self.peek() == Tok::Atom("not".into()) {
            self.advance();
            if *self.peek() == Tok::LParen {
                self.advance();
                let lit = self.literal()?;
                self.expect(Tok::RParen, "`)`")?;
                return Ok(Condition::Not(lit));
            }
            return Ok(Condition::Not(self.literal()?));
        }
        let lhs = self.term()?;
        if let Tok::Rel(op) = *self.peek() {
            self.advance();
            let rhs = self.term()?;
            return Ok(Condition::Rel(lhs, op, rhs));
        }
        match lhs {
            Term::Atom(_) | Term::Struct(..) => Ok(Condition::Literal(lhs)),
            _ => Err(self.unexpected("a relational operator")),
        }
    }

    fn context(&mut self) -> Result<Vec<Condition>, ParseError> {
        let mut out = Vec::new();
        loop {
            match self.condition()? {
                Condition::Literal(Term::Atom(a)) if a == "true" => {}
                c => out.push(c),
            }
            if *self.peek() == Tok::Amp {
                self.advance();
            } else {
                return Ok(out);
            }
        }
    }

    fn step(&mut self) -> Result<Option<BodyStep>, ParseError> {
        let step = match self.peek().clone() {
            Tok::Bang => {
                self.advance();
                BodyStep::AchieveGoal(self.literal()?)
            }
            Tok::Question => {
                self.advance();
                BodyStep::TestGoal(self.literal()?)
            }
            Tok::Plus => {
                self.advance();
                BodyStep::AddBelief(self.literal()?)
            }
            Tok::Minus => {
                self.advance();
                BodyStep::DelBelief(self.literal()?)
            }
            Tok::Internal(name) => {
                self.advance();
                let args = if *self.peek() == Tok::LParen { self.args(&name)? } else { Vec::new() };
                BodyStep::Action { name, args }
            }
            Tok::Atom(a) if a == "true" => {
                self.advance();
                return Ok(None);
            }
            Tok::Atom(_) => {
                let (name, args) = match self.literal()? {
                    Term::Atom(n) => (n, Vec::new()),
                    Term::Struct(n, args) => (n, args),
                    _ => unreachable!(),
                };
                BodyStep::Action { name, args }
            }
            _ => return Err(self.unexpected("a body step")),
        };
        Ok(Some(step))
    }

    fn body(&mut self) -> Result<Vec<BodyStep>, ParseError> {
        let mut out = Vec::new();
        loop {
            if let Some(s) = self.step()? {
                out.push(s);
            }
            if *self.peek() == Tok::Semi {
                self.advance();
            } else {
                return Ok(out);
            }
        }
    }

    fn plan(&mut self) -> Result<Plan, ParseError> {
        let del = matches!(self.advance(), Tok::Minus);
        let goal = if *self.peek() == Tok::Bang {
            self.advance();
            true
        } else {
            false
        };
        let kind = match (del, goal) {
            (false, false) => TriggerKind::BeliefAdd,
            (true, false) => TriggerKind::BeliefDel,
            (false, true) => TriggerKind::GoalAdd,
            (true, true) => TriggerKind::GoalDel,
        };
        let content = self.literal()?;
        let context = if *self.peek() == Tok::Colon {
            self.advance();
            self.context()?
        } else {
            Vec::new()
        };
        let body = if *self.peek() == Tok::Arrow {
            self.advance();
            self.body()?
        } else {
            Vec::new()
        };
        if *self.peek() != Tok::Period {
            return Err(self.unexpected("`.`"));
        }
        self.advance();
        Ok(Plan { trigger: TriggerEvent::new(kind, content), context, body })
    }

    fn program(&mut self) -> Result<AgentProgram, ParseError> {
        let mut prog = AgentProgram::default();
        loop {
            match self.peek() {
                Tok::Eof => return Ok(prog),
                Tok::Plus | Tok::Minus => prog.plans.push(self.plan()?),
                Tok::Bang => {
                    self.advance();
                    let g = self.literal()?;
                    self.expect(Tok::Period, "`.`")?;
                    prog.initial_goals.push(g);
                }
                Tok::Atom(_) => {
                    let pos = self.pos();
                    let b = self.literal()?;
                    if !b.is_ground() {
                        return Err(ParseError::NonGroundBelief { pos, term: b.to_string() });
                    }
                    self.expect(Tok::Period, "`.`")?;
                    prog.initial_beliefs.push(b);
                }
                _ => return Err(self.unexpected("a belief, goal or plan")),
            }
        }
    }
}

/// Parses program source, preserving plan order.
pub fn parse_program(source: &str) -> Result<AgentProgram, ParseError> {
    let toks = tokenize(source)?;
    Parser { toks, at: 0 }.program()
}

/// Parses a single term, e.g. for scenario-supplied beliefs.
pub fn parse_term(source: &str) -> Result<Term, ParseError> {
    let toks = tokenize(source)?;
    let mut p = Parser { toks, at: 0 };
    let t = p.term()?;
    if *p.peek() != Tok::Eof {
        return Err(p.unexpected("end of input"));
    }
    Ok(t)
}
