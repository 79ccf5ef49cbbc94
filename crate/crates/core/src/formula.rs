//! Model formulas and design matrices.
//!
//! Grammar (whitespace-insensitive):
//!
//! ```text
//! formula  := response "~" rhs
//! response := ident | "log" "(" ident ")"
//! rhs      := ["-"] item (("+" | "-") item)*
//! item     := "1" | ident | ident ":" ident
//! ```
//!
//! The intercept is implicit; `- 1` removes it. Categorical predictors are
//! one-hot expanded with their lexicographically first level as reference.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::{Column, Dataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    Identity,
    Log,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Formula {
    pub response: String,
    pub transform: Transform,
    pub terms: Vec<String>,
    pub interactions: Vec<(String, String)>,
    pub intercept: bool,
}

impl Formula {
    /// Builds a formula, enforcing the term invariants.
    pub fn new(
        response: impl Into<String>,
        transform: Transform,
        terms: Vec<String>,
        interactions: Vec<(String, String)>,
        intercept: bool,
    ) -> Result<Self> {
        let f = Formula {
            response: response.into(),
            transform,
            terms,
            interactions,
            intercept,
        };
        f.validate()?;
        Ok(f)
    }

    /// `response ~ f1 + f2 + ...` with intercept.
    pub fn main_effects(response: impl Into<String>, features: &[String]) -> Result<Self> {
        Formula::new(
            response,
            Transform::Identity,
            features.to_vec(),
            vec![],
            true,
        )
    }

    fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for t in &self.terms {
            if *t == self.response {
                return Err(Error::FormulaInvalid(format!(
                    "response `{t}` used as a predictor"
                )));
            }
            if !seen.insert(t.as_str()) {
                return Err(Error::FormulaInvalid(format!("duplicate term `{t}`")));
            }
        }
        let mut pairs = HashSet::new();
        for (a, b) in &self.interactions {
            if *a == self.response || *b == self.response {
                return Err(Error::FormulaInvalid(format!(
                    "response `{}` used in interaction {a}:{b}",
                    self.response
                )));
            }
            if a == b {
                return Err(Error::FormulaInvalid(format!("self-interaction {a}:{b}")));
            }
            let key = if a < b { (a, b) } else { (b, a) };
            if !pairs.insert(key) {
                return Err(Error::FormulaInvalid(format!(
                    "duplicate interaction {a}:{b}"
                )));
            }
        }
        Ok(())
    }

    /// Every predictor identifier, in first-use order.
    pub fn predictors(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        let all = self
            .terms
            .iter()
            .chain(self.interactions.iter().flat_map(|(a, b)| [a, b]));
        for name in all {
            if !out.contains(name) {
                out.push(name.clone());
            }
        }
        out
    }
}

/// Canonical text form; parsing it yields an identical `Formula`.
impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.transform {
            Transform::Identity => write!(f, "{} ~ ", self.response)?,
            Transform::Log => write!(f, "log({}) ~ ", self.response)?,
        }
        let mut items: Vec<String> = self.terms.clone();
        items.extend(self.interactions.iter().map(|(a, b)| format!("{a}:{b}")));
        if items.is_empty() {
            return f.write_str(if self.intercept { "1" } else { "-1" });
        }
        f.write_str(&items.join(" + "))?;
        if !self.intercept {
            f.write_str(" - 1")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    LParen,
    RParen,
    Tilde,
    Plus,
    Minus,
    Colon,
    End,
}

fn tokenize(text: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let single = match c {
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            b'~' => Some(Tok::Tilde),
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b':' => Some(Tok::Colon),
            _ => None,
        };
        if let Some(tok) = single {
            out.push((i, tok));
            i += 1;
        } else if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len()
                && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'.')
            {
                i += 1;
            }
            out.push((start, Tok::Ident(text[start..i].to_string())));
        } else if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            out.push((start, Tok::Number(text[start..i].to_string())));
        } else {
            return Err(Error::FormulaSyntax {
                offset: i,
                message: format!(
                    "unexpected character `{}`",
                    text[i..].chars().next().unwrap_or('?')
                ),
            });
        }
    }
    out.push((text.len(), Tok::End));
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].1
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].0
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.pos].1.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::FormulaSyntax {
            offset: self.offset(),
            message: message.into(),
        })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        if *self.peek() == tok {
            self.next();
            Ok(())
        } else {
            self.err(format!("expected {what}"))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.next();
                Ok(s)
            }
            _ => self.err(format!("expected {what}")),
        }
    }
}

pub fn parse_formula(text: &str) -> Result<Formula> {
    let mut p = Parser {
        toks: tokenize(text)?,
        pos: 0,
    };

    let head = p.ident("response name")?;
    let (response, transform) = if *p.peek() == Tok::LParen {
        if head != "log" {
            return Err(Error::FormulaSyntax {
                offset: p.toks[p.pos - 1].0,
                message: format!("unsupported response transform `{head}`"),
            });
        }
        p.next();
        let name = p.ident("response name inside log()")?;
        p.expect(Tok::RParen, "`)`")?;
        (name, Transform::Log)
    } else {
        (head, Transform::Identity)
    };
    p.expect(Tok::Tilde, "`~`")?;

    let mut terms = Vec::new();
    let mut interactions = Vec::new();
    let mut intercept = true;
    let mut negate = false;
    if *p.peek() == Tok::Minus {
        p.next();
        negate = true;
    }
    loop {
        let at = p.offset();
        match p.next() {
            Tok::Number(n) if n == "1" => intercept = !negate,
            Tok::Number(n) => {
                return Err(Error::FormulaSyntax {
                    offset: at,
                    message: format!("unexpected number `{n}` (only `1` is allowed)"),
                })
            }
            Tok::Ident(a) => {
                if negate {
                    return Err(Error::FormulaSyntax {
                        offset: at,
                        message: "only `- 1` may be subtracted".into(),
                    });
                }
                if *p.peek() == Tok::Colon {
                    p.next();
                    let b = p.ident("second interaction member")?;
                    if *p.peek() == Tok::Colon {
                        return p.err("three-way interactions are not supported");
                    }
                    interactions.push((a, b));
                } else {
                    terms.push(a);
                }
            }
            _ => {
                return Err(Error::FormulaSyntax {
                    offset: at,
                    message: "expected a term".into(),
                })
            }
        }
        match p.peek() {
            Tok::Plus => {
                p.next();
                negate = false;
            }
            Tok::Minus => {
                p.next();
                negate = true;
            }
            Tok::End => break,
            _ => return p.err("expected `+`, `-` or end of formula"),
        }
    }
    Formula::new(response, transform, terms, interactions, intercept)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Factor {
    Numeric {
        name: String,
    },
    /// `levels[0]` is the reference; one indicator per remaining level.
    Categorical {
        name: String,
        levels: Vec<String>,
    },
}

impl Factor {
    fn name(&self) -> &str {
        match self {
            Factor::Numeric { name } | Factor::Categorical { name, .. } => name,
        }
    }

    fn expand(&self, ds: &Dataset) -> Result<Vec<(String, Vec<f64>)>> {
        match (self, ds.column(self.name())?) {
            (Factor::Numeric { name }, Column::Numeric(v)) => Ok(vec![(name.clone(), v.clone())]),
            (Factor::Categorical { name, levels }, Column::Categorical(v)) => {
                if let Some(bad) = v.iter().find(|s| !levels.contains(s)) {
                    return Err(Error::UnseenLevel {
                        feature: name.clone(),
                        level: bad.clone(),
                    });
                }
                Ok(levels[1..]
                    .iter()
                    .map(|lvl| {
                        let col = v.iter().map(|s| if s == lvl { 1.0 } else { 0.0 }).collect();
                        (format!("{name}[{lvl}]"), col)
                    })
                    .collect())
            }
            _ => Err(Error::SchemaMismatch(format!(
                "feature `{}` changed kind since fit",
                self.name()
            ))),
        }
    }
}

/// Fit-time encoding of a formula: remembers categorical levels so that
/// later datasets expand to the same columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignEncoding {
    formula: Formula,
    factors: Vec<Factor>,
}

/// Dense row-major design plus the transformed response.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub column_names: Vec<String>,
    pub n_rows: usize,
    pub values: Vec<f64>,
    pub response: Vec<f64>,
}

impl DesignMatrix {
    pub fn n_cols(&self) -> usize {
        self.column_names.len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_cols() + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let p = self.n_cols();
        &self.values[row * p..(row + 1) * p]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.n_rows).map(|r| self.get(r, col)).collect()
    }
}

pub const INTERCEPT: &str = "(Intercept)";

impl DesignEncoding {
    pub fn learn(formula: &Formula, ds: &Dataset) -> Result<Self> {
        ds.numeric(&formula.response)?;
        let factors = formula
            .predictors()
            .into_iter()
            .map(|name| {
                ds.schema().require_feature(&name)?;
                Ok(match ds.column(&name)? {
                    Column::Numeric(_) => Factor::Numeric { name },
                    Column::Categorical(v) => {
                        let mut levels: Vec<String> = v.clone();
                        levels.sort();
                        levels.dedup();
                        Factor::Categorical { name, levels }
                    }
                })
            })
            .collect::<Result<_>>()?;
        Ok(DesignEncoding {
            formula: formula.clone(),
            factors,
        })
    }

    pub fn formula(&self) -> &Formula {
        &self.formula
    }

    fn factor(&self, name: &str) -> &Factor {
        self.factors
            .iter()
            .find(|f| f.name() == name)
            .expect("factor learned for every predictor")
    }

    /// Predictor columns only (the response column is not read).
    pub fn predictors(&self, ds: &Dataset) -> Result<(Vec<String>, Vec<f64>)> {
        let n = ds.n_rows();
        let mut cols: Vec<(String, Vec<f64>)> = Vec::new();
        if self.formula.intercept {
            cols.push((INTERCEPT.to_string(), vec![1.0; n]));
        }
        for t in &self.formula.terms {
            cols.extend(self.factor(t).expand(ds)?);
        }
        for (a, b) in &self.formula.interactions {
            let ea = self.factor(a).expand(ds)?;
            let eb = self.factor(b).expand(ds)?;
            for (na, va) in &ea {
                for (nb, vb) in &eb {
                    let prod = va.iter().zip(vb).map(|(x, y)| x * y).collect();
                    cols.push((format!("{na}:{nb}"), prod));
                }
            }
        }
        let p = cols.len();
        let mut values = vec![0.0; n * p];
        for (j, (_, v)) in cols.iter().enumerate() {
            for (i, x) in v.iter().enumerate() {
                values[i * p + j] = *x;
            }
        }
        Ok((cols.into_iter().map(|(name, _)| name).collect(), values))
    }

    /// Response after the formula's transform.
    pub fn response(&self, ds: &Dataset) -> Result<Vec<f64>> {
        let y = ds.numeric(&self.formula.response)?;
        match self.formula.transform {
            Transform::Identity => Ok(y.to_vec()),
            Transform::Log => y
                .iter()
                .enumerate()
                .map(|(row, &v)| {
                    if v > 0.0 {
                        Ok(v.ln())
                    } else {
                        Err(Error::NonPositiveResponse { row, value: v })
                    }
                })
                .collect(),
        }
    }

    pub fn design(&self, ds: &Dataset) -> Result<DesignMatrix> {
        let (column_names, values) = self.predictors(ds)?;
        let response = self.response(ds)?;
        Ok(DesignMatrix {
            column_names,
            n_rows: ds.n_rows(),
            values,
            response,
        })
    }
}

pub fn design_matrix(formula: &Formula, ds: &Dataset) -> Result<DesignMatrix> {
    DesignEncoding::learn(formula, ds)?.design(ds)
}
