//! Normal forms `Σ s^m i(f_{mn}) s*^n` in the Toeplitz algebra of a rotation.
//!
//! At level `j` the rotation angle is `θ_j` and the generators satisfy
//! `s* s = 1` and `s i(f) = i(f ∘ R_θ) s`. Every product of spanning elements
//! reduces to a single spanning element:
//!
//! - if `n ≥ p`: `s^m i(f) s*^n · s^p i(g) s*^q = s^m i(f · (g ∘ R_θ^{−(n−p)})) s*^{n−p+q}`
//! - if `n < p`: `s^m i(f) s*^n · s^p i(g) s*^q = s^{m+p−n} i((f ∘ R_θ^{−(p−n)}) · g) s*^q`
//!
//! where `f ∘ R_θ^{−k}(t) = f(t + kθ)`.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circle::{CircleError, TrigPoly, DEFAULT_DEGREE_CAP};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ToeplitzError {
    #[error("elements live at different levels ({left} and {right})")]
    LevelMismatch { left: u32, right: u32 },
    #[error("rotation angle must lie in (0, 1), got {0}")]
    InvalidAngle(f64),
    #[error("cannot embed into level {got}; expected the successor of level {from}")]
    NotSuccessor { from: u32, got: u32 },
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error(transparent)]
    Circle(#[from] CircleError),
}

/// One level of the inductive system: angle `θ_j`, cover degree `N` and the
/// degree cap applied to every coefficient polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlgebraLevel {
    pub index: u32,
    pub theta: f64,
    pub cover: u32,
    pub degree_cap: usize,
}

/// `θ_{j+1} = θ_j / N²`, the canonical real lift.
pub fn next_theta(theta: f64, n: u32) -> f64 {
    theta / f64::from(n * n)
}

impl AlgebraLevel {
    pub fn new(index: u32, theta: f64, cover: u32) -> Result<Self, ToeplitzError> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(ToeplitzError::InvalidAngle(theta));
        }
        if cover < 2 {
            return Err(CircleError::InvalidCover(cover).into());
        }
        Ok(AlgebraLevel {
            index,
            theta,
            cover,
            degree_cap: DEFAULT_DEGREE_CAP,
        })
    }

    pub fn with_degree_cap(self, degree_cap: usize) -> Self {
        AlgebraLevel { degree_cap, ..self }
    }

    pub fn successor(&self) -> AlgebraLevel {
        AlgebraLevel {
            index: self.index + 1,
            theta: next_theta(self.theta, self.cover),
            ..*self
        }
    }

    /// `N^j`.
    pub fn scale(&self) -> f64 {
        f64::from(self.cover).powi(self.index as i32)
    }
}

/// A finite sum `Σ s^m i(f_{mn}) s*^n` with nonzero coefficient polynomials.
#[derive(Debug, Clone, PartialEq)]
pub struct ToeplitzElement {
    level: AlgebraLevel,
    terms: BTreeMap<(u32, u32), TrigPoly>,
}

impl ToeplitzElement {
    pub fn zero(level: AlgebraLevel) -> Self {
        ToeplitzElement {
            level,
            terms: BTreeMap::new(),
        }
    }

    /// The single spanning element `s^m i(f) s*^n`.
    pub fn spanning(level: AlgebraLevel, m: u32, f: TrigPoly, n: u32) -> Result<Self, ToeplitzError> {
        f.check_cap(level.degree_cap)?;
        let mut x = ToeplitzElement::zero(level);
        x.accumulate((m, n), f);
        Ok(x)
    }

    pub fn identity(level: AlgebraLevel) -> Self {
        ToeplitzElement::function(level, TrigPoly::one()).expect("constant fits any cap")
    }

    pub fn s(level: AlgebraLevel) -> Self {
        ToeplitzElement::spanning(level, 1, TrigPoly::one(), 0).expect("constant fits any cap")
    }

    pub fn s_adj(level: AlgebraLevel) -> Self {
        ToeplitzElement::spanning(level, 0, TrigPoly::one(), 1).expect("constant fits any cap")
    }

    /// `i(f)`.
    pub fn function(level: AlgebraLevel, f: TrigPoly) -> Result<Self, ToeplitzError> {
        ToeplitzElement::spanning(level, 0, f, 0)
    }

    /// The defect projection `1 − s s*`.
    pub fn gap(level: AlgebraLevel) -> Self {
        let mut x = ToeplitzElement::identity(level);
        x.accumulate((1, 1), TrigPoly::constant(Complex64::new(-1.0, 0.0)));
        x
    }

    pub fn level(&self) -> &AlgebraLevel {
        &self.level
    }

    pub fn terms(&self) -> impl Iterator<Item = (u32, u32, &TrigPoly)> {
        self.terms.iter().map(|(&(m, n), f)| (m, n, f))
    }

    pub fn term(&self, m: u32, n: u32) -> Option<&TrigPoly> {
        self.terms.get(&(m, n))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_degree(&self) -> usize {
        self.terms.values().map(TrigPoly::degree).max().unwrap_or(0)
    }

    fn accumulate(&mut self, key: (u32, u32), f: TrigPoly) {
        if f.is_zero() {
            return;
        }
        match self.terms.get_mut(&key) {
            Some(existing) => {
                let sum = existing.add(&f);
                if sum.is_zero() {
                    self.terms.remove(&key);
                } else {
                    *existing = sum;
                }
            }
            None => {
                self.terms.insert(key, f);
            }
        }
    }

    fn check_level(&self, other: &ToeplitzElement) -> Result<(), ToeplitzError> {
        if self.level != other.level {
            return Err(ToeplitzError::LevelMismatch {
                left: self.level.index,
                right: other.level.index,
            });
        }
        Ok(())
    }

    fn map_terms<F>(&self, mut f: F) -> ToeplitzElement
    where
        F: FnMut(u32, u32, &TrigPoly) -> TrigPoly,
    {
        let mut out = ToeplitzElement::zero(self.level);
        for (&(m, n), p) in &self.terms {
            out.accumulate((m, n), f(m, n, p));
        }
        out
    }

    pub fn add(&self, other: &ToeplitzElement) -> Result<ToeplitzElement, ToeplitzError> {
        self.check_level(other)?;
        let mut out = self.clone();
        for (&key, f) in &other.terms {
            out.accumulate(key, f.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &ToeplitzElement) -> Result<ToeplitzElement, ToeplitzError> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, c: Complex64) -> ToeplitzElement {
        self.map_terms(|_, _, f| f.scale(c))
    }

    pub fn mul(&self, other: &ToeplitzElement) -> Result<ToeplitzElement, ToeplitzError> {
        self.check_level(other)?;
        let theta = self.level.theta;
        let cap = self.level.degree_cap;
        let mut out = ToeplitzElement::zero(self.level);
        for (&(m, n), f) in &self.terms {
            for (&(p, q), g) in &other.terms {
                let (key, coeff) = if n >= p {
                    let shifted = g.compose_rotation(-f64::from(n - p) * theta);
                    ((m, n - p + q), f.checked_mul(&shifted, cap)?)
                } else {
                    let shifted = f.compose_rotation(-f64::from(p - n) * theta);
                    ((m + p - n, q), shifted.checked_mul(g, cap)?)
                };
                out.accumulate(key, coeff);
            }
        }
        Ok(out)
    }

    /// `(s^m i(f) s*^n)* = s^n i(conj f) s*^m`.
    pub fn adjoint(&self) -> ToeplitzElement {
        let mut out = ToeplitzElement::zero(self.level);
        for (&(m, n), f) in &self.terms {
            out.accumulate((n, m), f.conj());
        }
        out
    }

    /// `α_t`: the `(m, n)` term picks up `e^{it(m−n)/N^j}`.
    pub fn apply_dynamics(&self, t: f64) -> ToeplitzElement {
        let scale = self.level.scale();
        self.map_terms(|m, n, f| {
            let phase = t * (f64::from(m) - f64::from(n)) / scale;
            f.scale(Complex64::from_polar(1.0, phase))
        })
    }

    /// `α_{iβ}`: the `(m, n)` term picks up `e^{−β(m−n)/N^j}`.
    pub fn apply_dynamics_imaginary(&self, beta: f64) -> ToeplitzElement {
        let scale = self.level.scale();
        self.map_terms(|m, n, f| {
            let factor = (-beta * (f64::from(m) - f64::from(n)) / scale).exp();
            f.scale(Complex64::new(factor, 0.0))
        })
    }

    /// The connecting map to level `j + 1`:
    /// `s^m i(f) s*^n ↦ s^{Nm} i(f ∘ p_N) s*^{Nn}`.
    pub fn embed(&self) -> Result<ToeplitzElement, ToeplitzError> {
        self.embed_into(self.level.successor())
    }

    /// [`embed`](Self::embed) into an explicitly supplied successor level.
    pub fn embed_into(&self, target: AlgebraLevel) -> Result<ToeplitzElement, ToeplitzError> {
        if target != self.level.successor() {
            return Err(ToeplitzError::NotSuccessor {
                from: self.level.index,
                got: target.index,
            });
        }
        let n = self.level.cover;
        let mut out = ToeplitzElement::zero(target);
        for (&(a, b), f) in &self.terms {
            out.accumulate((n * a, n * b), f.checked_compose_cover(n, target.degree_cap)?);
        }
        Ok(out)
    }

    /// Applies [`embed`](Self::embed) `k` times.
    pub fn embed_times(&self, k: u32) -> Result<ToeplitzElement, ToeplitzError> {
        let mut x = self.clone();
        for _ in 0..k {
            x = x.embed()?;
        }
        Ok(x)
    }

    /// The solenoid action at this level: `f ↦ f ∘ R_s` in every term.
    pub fn solenoid_act(&self, s: f64) -> ToeplitzElement {
        self.map_terms(|_, _, f| f.compose_rotation(s))
    }

    /// Largest coefficient difference over all terms of both elements.
    pub fn max_coeff_diff(&self, other: &ToeplitzElement) -> f64 {
        let zero = TrigPoly::zero();
        let keys: std::collections::BTreeSet<_> = self.terms.keys().chain(other.terms.keys()).collect();
        keys.into_iter()
            .map(|k| {
                let a = self.terms.get(k).unwrap_or(&zero);
                let b = other.terms.get(k).unwrap_or(&zero);
                a.max_coeff_diff(b)
            })
            .fold(0.0, f64::max)
    }

    /// Parses the textual format produced by `Display`.
    pub fn parse(text: &str, level: AlgebraLevel) -> Result<ToeplitzElement, ToeplitzError> {
        Parser::new(text).element(level)
    }
}

pub fn elem_mul(x: &ToeplitzElement, y: &ToeplitzElement) -> Result<ToeplitzElement, ToeplitzError> {
    x.mul(y)
}

pub fn elem_adjoint(x: &ToeplitzElement) -> ToeplitzElement {
    x.adjoint()
}

pub fn gap_element(level: AlgebraLevel) -> ToeplitzElement {
    ToeplitzElement::gap(level)
}

impl fmt::Display for ToeplitzElement {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(out, "0");
        }
        for (i, (&(m, n), f)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(out, " + ")?;
            }
            write!(out, "S^{m} [")?;
            for (j, (k, c)) in f.terms().enumerate() {
                if j > 0 {
                    write!(out, "; ")?;
                }
                write!(out, "{k}:{},{}", c.re, c.im)?;
            }
            write!(out, "] S*^{n}")?;
        }
        Ok(())
    }
}

struct Parser<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Parser { text, pos: 0 }
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ToeplitzError> {
        Err(ToeplitzError::Parse {
            pos: self.pos,
            msg: msg.into(),
        })
    }

    fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.text.len() - trimmed.len();
    }

    fn eat(&mut self, token: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(token) {
            self.pos += token.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, token: &str) -> Result<(), ToeplitzError> {
        if self.eat(token) {
            Ok(())
        } else {
            self.err(format!("expected `{token}`"))
        }
    }

    fn power(&mut self) -> Result<u32, ToeplitzError> {
        self.skip_ws();
        let digits = self.rest().bytes().take_while(u8::is_ascii_digit).count();
        if digits == 0 {
            return self.err("expected a nonnegative exponent");
        }
        let value = self.rest()[..digits].parse::<u32>();
        match value {
            Ok(v) => {
                self.pos += digits;
                Ok(v)
            }
            Err(e) => self.err(e.to_string()),
        }
    }

    fn number<T: std::str::FromStr>(&self, s: &str, offset: usize) -> Result<T, ToeplitzError>
    where
        T::Err: fmt::Display,
    {
        s.trim().parse::<T>().map_err(|e| ToeplitzError::Parse {
            pos: offset,
            msg: format!("bad number `{}`: {e}", s.trim()),
        })
    }

    fn polynomial(&mut self) -> Result<TrigPoly, ToeplitzError> {
        self.expect("[")?;
        let start = self.pos;
        let Some(close) = self.rest().find(']') else {
            return self.err("unterminated `[`");
        };
        let body = &self.text[start..start + close];
        self.pos = start + close + 1;
        if body.trim().is_empty() {
            return Ok(TrigPoly::one());
        }
        let mut terms = Vec::new();
        for item in body.split(';') {
            let Some((k, value)) = item.split_once(':') else {
                return Err(ToeplitzError::Parse {
                    pos: start,
                    msg: format!("expected `k:re,im`, got `{}`", item.trim()),
                });
            };
            let Some((re, im)) = value.split_once(',') else {
                return Err(ToeplitzError::Parse {
                    pos: start,
                    msg: format!("expected `re,im`, got `{}`", value.trim()),
                });
            };
            let k: i64 = self.number(k, start)?;
            let re: f64 = self.number(re, start)?;
            let im: f64 = self.number(im, start)?;
            terms.push((k, Complex64::new(re, im)));
        }
        Ok(TrigPoly::from_terms(terms))
    }

    fn element(&mut self, level: AlgebraLevel) -> Result<ToeplitzElement, ToeplitzError> {
        let mut out = ToeplitzElement::zero(level);
        self.skip_ws();
        if self.rest() == "0" {
            return Ok(out);
        }
        loop {
            self.expect("S^")?;
            let m = self.power()?;
            let f = self.polynomial()?;
            self.expect("S*^")?;
            let n = self.power()?;
            f.check_cap(level.degree_cap)?;
            out.accumulate((m, n), f);
            self.skip_ws();
            if self.rest().is_empty() {
                return Ok(out);
            }
            self.expect("+")?;
        }
    }
}

/// A random element with `terms` spanning summands, powers `≤ max_power`,
/// coefficient degree `≤ max_degree` and coefficients in the unit square.
pub fn random_element<R: Rng + ?Sized>(
    rng: &mut R,
    level: AlgebraLevel,
    terms: usize,
    max_power: u32,
    max_degree: i64,
) -> ToeplitzElement {
    let mut out = ToeplitzElement::zero(level);
    for _ in 0..terms {
        let m = rng.gen_range(0..=max_power);
        let n = rng.gen_range(0..=max_power);
        let f = random_poly(rng, max_degree);
        out.accumulate((m, n), f);
    }
    out
}

pub fn random_poly<R: Rng + ?Sized>(rng: &mut R, max_degree: i64) -> TrigPoly {
    TrigPoly::from_terms(
        (-max_degree..=max_degree).map(|k| (k, Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))),
    )
}
