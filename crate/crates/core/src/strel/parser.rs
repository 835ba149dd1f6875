//! Recursive-descent parser for the formula DSL.
//!
//! ```text
//! phi  := phi '|' phi | phi '&' phi | phi 'U' ival phi | phi 'R' ival phi
//!       | '!' phi | ('F' | 'G' | 'E' | 'somewhere' | 'everywhere') ival phi
//!       | 'surround' ival '(' phi ',' phi ')' | '(' phi ')'
//!       | 'true' | ident cmp number
//! ival := '[' number ',' (number | 'inf') ']'
//! ```
//!
//! Binding, loosest first: `|`, `&`, the binary `U`/`R`, then prefix
//! operators. Templates may use `$name` wherever a number is expected.

use thiserror::Error;

use super::formula::{Comparison, Formula, Interval, Term};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{message} at offset {position}")]
pub struct ParseError {
    pub position: usize,
    pub message: String,
}

/// Parse a concrete formula; parameter holes are rejected.
pub fn parse(text: &str) -> Result<Formula, ParseError> {
    let f = Parser::new(text, false)?.parse_all()?;
    f.try_map(&mut |t: &Term| match t {
        Term::Num(v) => Ok(*v),
        Term::Hole(_) => unreachable!("holes rejected by the lexer"),
    })
}

/// Parse a formula that may contain `$name` parameter holes.
pub fn parse_template(text: &str) -> Result<Formula<Term>, ParseError> {
    Parser::new(text, true)?.parse_all()
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    Hole(String),
    Cmp(Comparison),
    LBracket,
    RBracket,
    LParen,
    RParen,
    Comma,
    Bang,
    Amp,
    Pipe,
    Eof,
}

fn lex(text: &str, allow_holes: bool) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |position, message: String| Err(ParseError { position, message });
    while i < bytes.len() {
        let c = bytes[i] as char;
        let start = i;
        match c {
            c if c.is_ascii_whitespace() => {
                i += 1;
                continue;
            }
            '[' | ']' | '(' | ')' | ',' | '!' | '&' | '|' => {
                i += 1;
                out.push((
                    match c {
                        '[' => Tok::LBracket,
                        ']' => Tok::RBracket,
                        '(' => Tok::LParen,
                        ')' => Tok::RParen,
                        ',' => Tok::Comma,
                        '!' => Tok::Bang,
                        '&' => Tok::Amp,
                        _ => Tok::Pipe,
                    },
                    start,
                ));
            }
            '>' | '<' => {
                let strict = bytes.get(i + 1) != Some(&b'=');
                i += if strict { 1 } else { 2 };
                let cmp = match (c, strict) {
                    ('>', true) => Comparison::Gt,
                    ('>', false) => Comparison::Ge,
                    ('<', true) => Comparison::Lt,
                    _ => Comparison::Le,
                };
                out.push((Tok::Cmp(cmp), start));
            }
            '$' => {
                i += 1;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                if i == start + 1 {
                    return err(start, "expected a parameter name after `$`".into());
                }
                if !allow_holes {
                    return err(start, format!("parameter `{}` not allowed in a concrete formula", &text[start..i]));
                }
                out.push((Tok::Hole(text[start + 1..i].to_string()), start));
            }
            c if c.is_ascii_digit() || c == '.' || c == '-' || c == '+' => {
                i += 1;
                while i < bytes.len() {
                    let d = bytes[i];
                    let exp_sign = (d == b'-' || d == b'+') && matches!(bytes[i - 1], b'e' | b'E');
                    if d.is_ascii_digit() || d == b'.' || d == b'e' || d == b'E' || exp_sign {
                        i += 1;
                    } else {
                        break;
                    }
                }
                let lexeme = &text[start..i];
                let value = if lexeme == "-" || lexeme == "+" {
                    // allow `-inf`
                    if text[i..].starts_with("inf") {
                        i += 3;
                        if c == '-' { f64::NEG_INFINITY } else { f64::INFINITY }
                    } else {
                        return err(start, format!("unexpected `{c}`"));
                    }
                } else {
                    match lexeme.parse::<f64>() {
                        Ok(v) => v,
                        Err(_) => return err(start, format!("invalid number `{lexeme}`")),
                    }
                };
                out.push((Tok::Num(value), start));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'.') {
                    i += 1;
                }
                out.push((Tok::Ident(text[start..i].to_string()), start));
            }
            other => return err(start, format!("unexpected character `{other}`")),
        }
    }
    out.push((Tok::Eof, text.len()));
    Ok(out)
}

#[derive(Clone, Copy, PartialEq)]
enum IntervalKind {
    Time,
    Distance,
}

struct Parser {
    tokens: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn new(text: &str, allow_holes: bool) -> Result<Self, ParseError> {
        Ok(Parser { tokens: lex(text, allow_holes)?, pos: 0 })
    }

    fn parse_all(mut self) -> Result<Formula<Term>, ParseError> {
        let f = self.or()?;
        match self.peek() {
            Tok::Eof => Ok(f),
            t => self.fail(format!("unexpected {}", describe(t))),
        }
    }

    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.tokens[(self.pos + k).min(self.tokens.len() - 1)].0
    }

    fn offset(&self) -> usize {
        self.tokens[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.tokens[self.pos].0.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn fail<T>(&self, message: String) -> Result<T, ParseError> {
        Err(ParseError { position: self.offset(), message })
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            self.fail(format!("expected {}, found {}", describe(&tok), describe(self.peek())))
        }
    }

    fn or(&mut self) -> Result<Formula<Term>, ParseError> {
        let mut lhs = self.and()?;
        while *self.peek() == Tok::Pipe {
            self.bump();
            lhs = Formula::or(lhs, self.and()?);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Formula<Term>, ParseError> {
        let mut lhs = self.binary()?;
        while *self.peek() == Tok::Amp {
            self.bump();
            lhs = Formula::and(lhs, self.binary()?);
        }
        Ok(lhs)
    }

    fn binary(&mut self) -> Result<Formula<Term>, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Ident(w) if (w == "U" || w == "R") && *self.peek_at(1) == Tok::LBracket => w.clone(),
                _ => return Ok(lhs),
            };
            self.bump();
            if op == "U" {
                let i = self.interval(IntervalKind::Time)?;
                lhs = Formula::until(i, lhs, self.unary()?);
            } else {
                let i = self.interval(IntervalKind::Distance)?;
                lhs = Formula::reach(i, lhs, self.unary()?);
            }
        }
    }

    fn unary(&mut self) -> Result<Formula<Term>, ParseError> {
        if *self.peek() == Tok::Bang {
            self.bump();
            return Ok(Formula::not(self.unary()?));
        }
        let word = match self.peek() {
            Tok::Ident(w) if *self.peek_at(1) == Tok::LBracket => w.clone(),
            _ => return self.primary(),
        };
        let kind = match word.as_str() {
            "F" | "G" => IntervalKind::Time,
            "E" | "somewhere" | "everywhere" | "surround" => IntervalKind::Distance,
            _ => return self.primary(),
        };
        self.bump();
        let i = self.interval(kind)?;
        Ok(match word.as_str() {
            "F" => Formula::eventually(i, self.unary()?),
            "G" => Formula::globally(i, self.unary()?),
            "E" => Formula::escape(i, self.unary()?),
            "somewhere" => Formula::somewhere(i, self.unary()?),
            "everywhere" => Formula::everywhere(i, self.unary()?),
            _ => {
                self.expect(Tok::LParen)?;
                let a = self.or()?;
                self.expect(Tok::Comma)?;
                let b = self.or()?;
                self.expect(Tok::RParen)?;
                Formula::surround(i, a, b)
            }
        })
    }

    fn primary(&mut self) -> Result<Formula<Term>, ParseError> {
        match self.peek().clone() {
            Tok::LParen => {
                self.bump();
                let f = self.or()?;
                self.expect(Tok::RParen)?;
                Ok(f)
            }
            Tok::Ident(w) if w == "true" => {
                self.bump();
                Ok(Formula::True)
            }
            Tok::Ident(var) => {
                self.bump();
                let cmp = match self.bump() {
                    Tok::Cmp(c) => c,
                    _ => {
                        self.pos -= 1;
                        return self.fail(format!("expected a comparison after `{var}`"));
                    }
                };
                let threshold = self.number()?;
                Ok(Formula::atom(var, cmp, threshold))
            }
            t => self.fail(format!("expected a formula, found {}", describe(&t))),
        }
    }

    fn number(&mut self) -> Result<Term, ParseError> {
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Term::Num(v))
            }
            Tok::Ident(w) if w == "inf" => {
                self.bump();
                Ok(Term::Num(f64::INFINITY))
            }
            Tok::Hole(name) => {
                self.bump();
                Ok(Term::Hole(name))
            }
            t => self.fail(format!("expected a number, found {}", describe(&t))),
        }
    }

    fn interval(&mut self, kind: IntervalKind) -> Result<Interval<Term>, ParseError> {
        let start = self.offset();
        self.expect(Tok::LBracket)?;
        let lo = self.number()?;
        self.expect(Tok::Comma)?;
        let hi = self.number()?;
        self.expect(Tok::RBracket)?;
        let bad = |message: String| Err(ParseError { position: start, message });
        if let Term::Num(lo) = lo {
            if !(lo >= 0.0) || lo.is_infinite() {
                return bad(format!("interval lower bound must be finite and non-negative, got {lo}"));
            }
        }
        if let (Term::Num(lo), Term::Num(hi)) = (&lo, &hi) {
            if lo > hi {
                return bad(format!("interval [{lo},{hi}] has lower bound above upper bound"));
            }
            if kind == IntervalKind::Time && lo == hi {
                return bad(format!("time interval [{lo},{hi}] is singular"));
            }
        }
        Ok(Interval::new(lo, hi))
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(w) => format!("`{w}`"),
        Tok::Num(v) => format!("number {v}"),
        Tok::Hole(h) => format!("`${h}`"),
        Tok::Cmp(c) => format!("`{}`", c.symbol()),
        Tok::LBracket => "`[`".into(),
        Tok::RBracket => "`]`".into(),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::Comma => "`,`".into(),
        Tok::Bang => "`!`".into(),
        Tok::Amp => "`&`".into(),
        Tok::Pipe => "`|`".into(),
        Tok::Eof => "end of input".into(),
    }
}
