//! Recursive-descent parser for terms, formulas, programs and model files.

use crate::ast::{parse_decimal, CmpOp, Formula, OdeSystem, Program, Rational, Term};

use super::lexer::{tokenize, Pos, Tok, Token};
use super::model::{Decl, Located, ModelFile, ScenarioValue, SystemExpr};
use super::DslError;

pub const KEYWORDS: &[&str] = &[
    "U",
    "assume",
    "ccs",
    "contract",
    "controllability",
    "controller",
    "env",
    "exists",
    "false",
    "forall",
    "guarantee",
    "in",
    "init",
    "invariant",
    "plant",
    "reactivity",
    "resource",
    "scenario",
    "system",
    "timestamp",
    "true",
    "with",
];

pub fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

pub struct Parser {
    toks: Vec<Token>,
    i: usize,
}

type PResult<T> = Result<T, DslError>;

impl Parser {
    pub fn new(src: &str) -> PResult<Parser> {
        Ok(Parser {
            toks: tokenize(src)?,
            i: 0,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.i].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let j = (self.i + k).min(self.toks.len() - 1);
        &self.toks[j].tok
    }

    fn pos(&self) -> Pos {
        self.toks[self.i].pos
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.i].tok.clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn error<T>(&self, expected: impl Into<String>) -> PResult<T> {
        Err(DslError::Syntax {
            pos: self.pos(),
            expected: expected.into(),
            found: self.peek().describe(),
        })
    }

    fn expect(&mut self, tok: Tok) -> PResult<()> {
        if self.eat(&tok) {
            Ok(())
        } else {
            let want = tok.describe();
            self.error(want)
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn expect_keyword(&mut self, kw: &str) -> PResult<()> {
        if self.at_keyword(kw) {
            self.bump();
            Ok(())
        } else {
            self.error(format!("`{kw}`"))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_keyword(&s) => {
                self.bump();
                Ok(s)
            }
            _ => self.error("identifier"),
        }
    }

    pub fn finish(&mut self) -> PResult<()> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            self.error("end of input")
        }
    }

    fn rational(&mut self) -> PResult<Rational> {
        let neg = self.eat(&Tok::Minus);
        match self.peek().clone() {
            Tok::Number(text) => {
                let pos = self.pos();
                self.bump();
                let r = parse_decimal(&text).ok_or_else(|| DslError::Syntax {
                    pos,
                    expected: "a representable number".into(),
                    found: format!("number `{text}`"),
                })?;
                Ok(if neg { -r } else { r })
            }
            _ => self.error("number"),
        }
    }

    // ---- terms ----

    pub fn term(&mut self) -> PResult<Term> {
        let mut acc = self.product()?;
        loop {
            if self.eat(&Tok::Plus) {
                acc = Term::add(acc, self.product()?);
            } else if self.eat(&Tok::Minus) {
                acc = Term::sub(acc, self.product()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn product(&mut self) -> PResult<Term> {
        let mut acc = self.unary_term()?;
        loop {
            if self.eat(&Tok::Star) {
                acc = Term::mul(acc, self.unary_term()?);
            } else if self.eat(&Tok::Slash) {
                acc = Term::div(acc, self.unary_term()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary_term(&mut self) -> PResult<Term> {
        if *self.peek() == Tok::Minus {
            if let Tok::Number(_) = self.peek_at(1) {
                return Ok(Term::constant(self.rational()?));
            }
            self.bump();
            return Ok(Term::neg(self.unary_term()?));
        }
        match self.peek().clone() {
            Tok::Number(_) => Ok(Term::constant(self.rational()?)),
            Tok::Ident(s) if !is_keyword(&s) => {
                self.bump();
                Ok(Term::Var(s))
            }
            Tok::LParen => {
                self.bump();
                let t = self.term()?;
                self.expect(Tok::RParen)?;
                Ok(t)
            }
            _ => self.error("term"),
        }
    }

    // ---- formulas ----

    pub fn formula(&mut self) -> PResult<Formula> {
        let lhs = self.disjunction()?;
        if self.eat(&Tok::Arrow) {
            Ok(Formula::implies(lhs, self.formula()?))
        } else {
            Ok(lhs)
        }
    }

    fn disjunction(&mut self) -> PResult<Formula> {
        let lhs = self.conjunction()?;
        if self.eat(&Tok::Or) {
            Ok(Formula::or(lhs, self.disjunction()?))
        } else {
            Ok(lhs)
        }
    }

    fn conjunction(&mut self) -> PResult<Formula> {
        let lhs = self.unary_formula()?;
        if self.eat(&Tok::And) {
            Ok(Formula::and(lhs, self.conjunction()?))
        } else {
            Ok(lhs)
        }
    }

    fn unary_formula(&mut self) -> PResult<Formula> {
        match self.peek().clone() {
            Tok::Not => {
                self.bump();
                Ok(Formula::not(self.unary_formula()?))
            }
            Tok::LBracket => {
                self.bump();
                let p = self.program()?;
                self.expect(Tok::RBracket)?;
                Ok(Formula::boxed(p, self.unary_formula()?))
            }
            Tok::Ident(kw) if kw == "forall" || kw == "exists" => {
                self.bump();
                let pos = self.pos();
                let x = self.ident()?;
                let body = self.unary_formula()?;
                let built = if kw == "forall" {
                    Formula::forall(x, body)
                } else {
                    Formula::exists(x, body)
                };
                built.map_err(|e| DslError::Ast { pos, source: e })
            }
            Tok::Ident(kw) if kw == "true" => {
                self.bump();
                Ok(Formula::True)
            }
            Tok::Ident(kw) if kw == "false" => {
                self.bump();
                Ok(Formula::False)
            }
            Tok::LParen => {
                let mark = self.i;
                self.bump();
                if let Ok(f) = self.formula() {
                    if self.eat(&Tok::RParen) && !self.continues_term() {
                        return Ok(f);
                    }
                }
                self.i = mark;
                self.comparison()
            }
            _ => self.comparison(),
        }
    }

    /// True if the next token would extend a term or comparison.
    fn continues_term(&self) -> bool {
        matches!(
            self.peek(),
            Tok::Plus
                | Tok::Minus
                | Tok::Star
                | Tok::Slash
                | Tok::Le
                | Tok::Lt
                | Tok::Eq
                | Tok::Ne
                | Tok::Gt
                | Tok::Ge
        )
    }

    fn cmp_op(&self) -> Option<CmpOp> {
        Some(match self.peek() {
            Tok::Le => CmpOp::Le,
            Tok::Lt => CmpOp::Lt,
            Tok::Eq => CmpOp::Eq,
            Tok::Ne => CmpOp::Ne,
            Tok::Gt => CmpOp::Gt,
            Tok::Ge => CmpOp::Ge,
            _ => return None,
        })
    }

    /// `a op b (op c)*`; chains become conjunctions of neighbouring pairs.
    fn comparison(&mut self) -> PResult<Formula> {
        let mut lhs = self.term()?;
        let Some(op) = self.cmp_op() else {
            return self.error("comparison operator");
        };
        self.bump();
        let mut rhs = self.term()?;
        let mut parts = vec![Formula::cmp(op, lhs.clone(), rhs.clone())];
        while let Some(op) = self.cmp_op() {
            self.bump();
            lhs = rhs;
            rhs = self.term()?;
            parts.push(Formula::cmp(op, lhs.clone(), rhs.clone()));
        }
        Ok(Formula::conj(parts))
    }

    // ---- programs ----

    pub fn program(&mut self) -> PResult<Program> {
        let mut parts = vec![self.sequence()?];
        while self.at_keyword("U") {
            self.bump();
            parts.push(self.sequence()?);
        }
        Ok(Program::choice_all(parts))
    }

    fn sequence(&mut self) -> PResult<Program> {
        let mut parts = vec![self.postfix()?];
        while self.eat(&Tok::Semi) {
            if !self.starts_statement() {
                break;
            }
            parts.push(self.postfix()?);
        }
        Ok(Program::seq_all(parts))
    }

    fn starts_statement(&self) -> bool {
        match self.peek() {
            Tok::Question | Tok::LBrace | Tok::LParen => true,
            Tok::Ident(s) => !is_keyword(s) && *self.peek_at(1) == Tok::Assign,
            _ => false,
        }
    }

    fn postfix(&mut self) -> PResult<Program> {
        let grouped = *self.peek() == Tok::LParen;
        let mut p = self.statement()?;
        if grouped {
            while self.eat(&Tok::Star) {
                p = Program::repeat(p);
            }
        }
        Ok(p)
    }

    fn statement(&mut self) -> PResult<Program> {
        match self.peek().clone() {
            Tok::Question => {
                self.bump();
                self.expect(Tok::LParen)?;
                let f = self.formula()?;
                self.expect(Tok::RParen)?;
                Ok(Program::test(f))
            }
            Tok::LBrace => {
                self.bump();
                let pos = self.pos();
                let (equations, domain) = self.ode_body()?;
                self.expect(Tok::RBrace)?;
                let ode = OdeSystem::new(equations, domain)
                    .map_err(|e| DslError::Ast { pos, source: e })?;
                Ok(Program::Ode(ode))
            }
            Tok::LParen => {
                self.bump();
                let p = self.program()?;
                self.expect(Tok::RParen)?;
                Ok(p)
            }
            Tok::Ident(s) if !is_keyword(&s) => {
                self.bump();
                self.expect(Tok::Assign)?;
                Ok(Program::assign(s, self.term()?))
            }
            _ => self.error("statement"),
        }
    }

    /// `x' = e, y' = f & H` with the domain optional.
    pub fn ode_body(&mut self) -> PResult<(Vec<(String, Term)>, Formula)> {
        let mut equations = Vec::new();
        loop {
            let x = self.ident()?;
            self.expect(Tok::Prime)?;
            self.expect(Tok::Eq)?;
            equations.push((x, self.term()?));
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        let domain = if self.eat(&Tok::And) {
            self.formula()?
        } else {
            Formula::True
        };
        Ok((equations, domain))
    }

    // ---- declarations ----

    pub fn model(&mut self) -> PResult<ModelFile> {
        let mut decls = Vec::new();
        while *self.peek() != Tok::Eof {
            let pos = self.pos();
            let node = self.decl()?;
            decls.push(Located { node, pos });
        }
        Ok(ModelFile { decls })
    }

    fn decl(&mut self) -> PResult<Decl> {
        let Tok::Ident(kw) = self.peek().clone() else {
            return self.error("declaration");
        };
        match kw.as_str() {
            "env" => {
                self.bump();
                self.expect(Tok::LBrace)?;
                let f = self.formula()?;
                self.expect(Tok::RBrace)?;
                Ok(Decl::Env(f))
            }
            "controller" => {
                self.bump();
                let name = self.ident()?;
                self.expect_keyword("reactivity")?;
                let reactivity = self.rational()?;
                let timestamp = if self.at_keyword("timestamp") {
                    self.bump();
                    Some(self.ident()?)
                } else {
                    None
                };
                self.expect(Tok::LBrace)?;
                let body = self.program()?;
                self.expect(Tok::RBrace)?;
                Ok(Decl::Controller {
                    name,
                    reactivity,
                    timestamp,
                    body,
                })
            }
            "plant" => {
                self.bump();
                let name = self.ident()?;
                self.expect_keyword("controllability")?;
                let controllability = self.rational()?;
                self.expect(Tok::LBrace)?;
                let (equations, domain) = self.ode_body()?;
                self.expect(Tok::RBrace)?;
                Ok(Decl::Plant {
                    name,
                    controllability,
                    equations,
                    domain,
                })
            }
            "contract" => {
                self.bump();
                let name = self.ident()?;
                self.expect_keyword("assume")?;
                let assume = self.formula()?;
                self.expect_keyword("guarantee")?;
                let guarantee = self.formula()?;
                self.expect_keyword("init")?;
                let init = self.formula()?;
                Ok(Decl::Contract {
                    name,
                    assume,
                    guarantee,
                    init,
                })
            }
            "invariant" => {
                self.bump();
                let name = self.ident()?;
                self.expect(Tok::LBrace)?;
                let formula = self.formula()?;
                self.expect(Tok::RBrace)?;
                Ok(Decl::Invariant { name, formula })
            }
            "resource" => {
                self.bump();
                let name = self.ident()?;
                self.expect(Tok::LBrace)?;
                let mut controllers = Vec::new();
                if *self.peek() != Tok::RBrace {
                    controllers.push(self.ident()?);
                    while self.eat(&Tok::Comma) {
                        controllers.push(self.ident()?);
                    }
                }
                self.expect(Tok::RBrace)?;
                Ok(Decl::Resource { name, controllers })
            }
            "scenario" => {
                self.bump();
                self.expect(Tok::LBrace)?;
                let mut entries = Vec::new();
                if *self.peek() != Tok::RBrace {
                    entries.push(self.scenario_entry()?);
                    while self.eat(&Tok::Comma) {
                        entries.push(self.scenario_entry()?);
                    }
                }
                self.expect(Tok::RBrace)?;
                Ok(Decl::Scenario(entries))
            }
            "system" => {
                self.bump();
                let name = self.ident()?;
                self.expect(Tok::Eq)?;
                let expr = self.system_expr()?;
                let mut invariants = Vec::new();
                if self.at_keyword("with") {
                    self.bump();
                    invariants.push(self.ident()?);
                    while self.eat(&Tok::Comma) {
                        invariants.push(self.ident()?);
                    }
                }
                Ok(Decl::System {
                    name,
                    expr,
                    invariants,
                })
            }
            _ => self.error("declaration"),
        }
    }

    fn scenario_entry(&mut self) -> PResult<(String, ScenarioValue)> {
        let x = self.ident()?;
        if self.at_keyword("in") {
            self.bump();
            self.expect(Tok::LBracket)?;
            let lo = self.rational()?;
            self.expect(Tok::Comma)?;
            let hi = self.rational()?;
            self.expect(Tok::RBracket)?;
            return Ok((x, ScenarioValue::Interval(lo, hi)));
        }
        self.expect(Tok::Eq)?;
        match self.peek() {
            Tok::Ident(_) => Ok((x, ScenarioValue::Copy(self.ident()?))),
            _ => Ok((x, ScenarioValue::Value(self.rational()?))),
        }
    }

    fn system_expr(&mut self) -> PResult<SystemExpr> {
        let mut acc = self.system_primary()?;
        while self.eat(&Tok::Par) {
            acc = SystemExpr::Par(Box::new(acc), Box::new(self.system_primary()?));
        }
        Ok(acc)
    }

    fn system_primary(&mut self) -> PResult<SystemExpr> {
        if self.at_keyword("ccs") {
            self.bump();
            self.expect(Tok::LParen)?;
            let c = self.system_expr()?;
            self.expect(Tok::Comma)?;
            let p = self.system_expr()?;
            self.expect(Tok::RParen)?;
            return Ok(SystemExpr::Ccs(Box::new(c), Box::new(p)));
        }
        if self.eat(&Tok::LParen) {
            let e = self.system_expr()?;
            self.expect(Tok::RParen)?;
            return Ok(e);
        }
        Ok(SystemExpr::Name(self.ident()?))
    }
}

pub fn parse_term(src: &str) -> Result<Term, DslError> {
    let mut p = Parser::new(src)?;
    let t = p.term()?;
    p.finish()?;
    Ok(t)
}

pub fn parse_formula(src: &str) -> Result<Formula, DslError> {
    let mut p = Parser::new(src)?;
    let f = p.formula()?;
    p.finish()?;
    Ok(f)
}

/// A program, optionally followed by `;`.
pub fn parse_program(src: &str) -> Result<Program, DslError> {
    let mut p = Parser::new(src)?;
    let prog = p.program()?;
    p.finish()?;
    Ok(prog)
}

pub fn parse_model(src: &str) -> Result<ModelFile, DslError> {
    Parser::new(src)?.model()
}
