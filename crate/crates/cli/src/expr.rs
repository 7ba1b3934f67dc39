//! Arithmetic expressions for config values.
//!
//! Config files state physical inputs the way they are quoted in protocols:
//! `phi = "pi - 2*pi/N"`, `omega = "E1/10"`. A tiny evaluator resolves such
//! strings against a named-constant context, so the manifest can preserve the
//! human-readable form while every computation sees an exact float.

use std::fmt;

/// Error from tokenizing or evaluating one expression.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExprError {
    message: String,
}

impl ExprError {
    fn new(message: impl Into<String>) -> Self {
        Self { message: message.into() }
    }
}

impl fmt::Display for ExprError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for ExprError {}

/// Named constants visible to an expression, e.g. `pi`, `N`, `E1`.
#[derive(Debug, Clone, Default)]
pub struct Context {
    names: Vec<(String, f64)>,
}

impl Context {
    /// Context that only knows `pi`.
    pub fn new() -> Self {
        Self { names: vec![("pi".to_string(), std::f64::consts::PI)] }
    }

    /// Add or replace one named constant; returns self for chaining.
    pub fn with(mut self, name: &str, value: f64) -> Self {
        match self.names.iter_mut().find(|(n, _)| n == name) {
            Some(slot) => slot.1 = value,
            None => self.names.push((name.to_string(), value)),
        }
        self
    }

    fn lookup(&self, name: &str) -> Option<f64> {
        self.names.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    fn known(&self) -> String {
        let names: Vec<&str> = self.names.iter().map(|(n, _)| n.as_str()).collect();
        names.join(", ")
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Open,
    Close,
}

fn tokenize(text: &str) -> Result<Vec<Token>, ExprError> {
    let mut tokens = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' => i += 1,
            '+' => {
                tokens.push(Token::Plus);
                i += 1;
            }
            '-' => {
                tokens.push(Token::Minus);
                i += 1;
            }
            '*' => {
                tokens.push(Token::Star);
                i += 1;
            }
            '/' => {
                tokens.push(Token::Slash);
                i += 1;
            }
            '(' => {
                tokens.push(Token::Open);
                i += 1;
            }
            ')' => {
                tokens.push(Token::Close);
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && matches!(bytes[i] as char, '0'..='9' | '.') {
                    i += 1;
                }
                // Exponent suffix like 1e-3; a bare e would be an identifier.
                if i < bytes.len()
                    && matches!(bytes[i] as char, 'e' | 'E')
                    && i + 1 < bytes.len()
                    && matches!(bytes[i + 1] as char, '0'..='9' | '+' | '-')
                {
                    i += 2;
                    while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                        i += 1;
                    }
                }
                let lit = &text[start..i];
                let value = lit
                    .parse::<f64>()
                    .map_err(|_| ExprError::new(format!("bad number literal `{lit}`")))?;
                tokens.push(Token::Number(value));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len()
                    && matches!(bytes[i] as char, 'a'..='z' | 'A'..='Z' | '0'..='9' | '_')
                {
                    i += 1;
                }
                tokens.push(Token::Ident(text[start..i].to_string()));
            }
            other => {
                return Err(ExprError::new(format!("unexpected character `{other}`")));
            }
        }
    }
    Ok(tokens)
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    ctx: &'a Context,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expr(&mut self) -> Result<f64, ExprError> {
        let mut acc = self.term()?;
        while let Some(op) = self.peek() {
            match op {
                Token::Plus => {
                    self.bump();
                    acc += self.term()?;
                }
                Token::Minus => {
                    self.bump();
                    acc -= self.term()?;
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<f64, ExprError> {
        let mut acc = self.unary()?;
        while let Some(op) = self.peek() {
            match op {
                Token::Star => {
                    self.bump();
                    acc *= self.unary()?;
                }
                Token::Slash => {
                    self.bump();
                    let den = self.unary()?;
                    if den == 0.0 {
                        return Err(ExprError::new("division by zero"));
                    }
                    acc /= den;
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<f64, ExprError> {
        match self.peek() {
            Some(Token::Minus) => {
                self.bump();
                Ok(-self.unary()?)
            }
            Some(Token::Plus) => {
                self.bump();
                self.unary()
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<f64, ExprError> {
        match self.bump() {
            Some(Token::Number(v)) => Ok(v),
            Some(Token::Ident(name)) => self.ctx.lookup(&name).ok_or_else(|| {
                ExprError::new(format!(
                    "unknown name `{name}`; known names here: {}",
                    self.ctx.known()
                ))
            }),
            Some(Token::Open) => {
                let inner = self.expr()?;
                match self.bump() {
                    Some(Token::Close) => Ok(inner),
                    _ => Err(ExprError::new("missing closing parenthesis")),
                }
            }
            Some(tok) => Err(ExprError::new(format!("unexpected token {tok:?}"))),
            None => Err(ExprError::new("expression ended early")),
        }
    }
}

/// Evaluate `text` against `ctx`; the result must be finite.
pub fn eval(text: &str, ctx: &Context) -> Result<f64, ExprError> {
    let tokens = tokenize(text)?;
    if tokens.is_empty() {
        return Err(ExprError::new("empty expression"));
    }
    let mut parser = Parser { tokens: &tokens, pos: 0, ctx };
    let value = parser.expr()?;
    if parser.pos != tokens.len() {
        return Err(ExprError::new(format!(
            "trailing input after position {}",
            parser.pos
        )));
    }
    if !value.is_finite() {
        return Err(ExprError::new(format!("expression evaluates to {value}")));
    }
    Ok(value)
}
