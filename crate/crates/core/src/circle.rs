//! The circle ℝ/ℤ, identified with `[0, 1)`.
//!
//! Rotations follow the clockwise convention `R_γ(t) = t − γ (mod 1)` and the
//! covering map is `p_N(t) = Nt (mod 1)`. Functions on the circle are either
//! trigonometric polynomials ([`TrigPoly`]) or step functions on finitely many
//! arcs ([`SimpleFunction`]).

use std::f64::consts::TAU;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default bound on the degree of trigonometric polynomials produced by
/// capped operations.
pub const DEFAULT_DEGREE_CAP: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CircleError {
    #[error("covering degree must be at least 2, got {0}")]
    InvalidCover(u32),
    #[error("arc length must lie in (0, 1], got {0}")]
    InvalidArcLength(f64),
    #[error("non-finite value {0}")]
    NonFinite(f64),
    #[error("degree {degree} exceeds the configured cap {cap}")]
    DegreeOverflow { degree: usize, cap: usize },
    #[error("simple function needs increasing breakpoints starting at 0 and one value per piece")]
    InvalidSimpleFunction,
}

/// Reduces a real number into `[0, 1)`.
pub fn wrap_unit(x: f64) -> f64 {
    let y = x - x.floor();
    // `x - floor(x)` can round up to 1 for tiny negative x.
    if y >= 1.0 {
        0.0
    } else {
        y
    }
}

/// Circular distance between two reals viewed as points of ℝ/ℤ.
pub fn circle_distance(a: f64, b: f64) -> f64 {
    let d = wrap_unit(a - b);
    d.min(1.0 - d)
}

/// A point of the circle, stored as its representative in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(into = "f64", from = "f64")]
pub struct CirclePoint(f64);

impl CirclePoint {
    pub const ZERO: CirclePoint = CirclePoint(0.0);

    pub fn new(x: f64) -> Self {
        CirclePoint(wrap_unit(x))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `R_γ(t) = t − γ (mod 1)`.
    pub fn rotate(self, gamma: f64) -> Self {
        rotate(self, gamma)
    }

    /// Coordinatewise group subtraction on ℝ/ℤ.
    pub fn sub(self, other: CirclePoint) -> Self {
        CirclePoint::new(self.0 - other.0)
    }
}

impl From<f64> for CirclePoint {
    fn from(x: f64) -> Self {
        CirclePoint::new(x)
    }
}

impl From<CirclePoint> for f64 {
    fn from(p: CirclePoint) -> f64 {
        p.0
    }
}

impl fmt::Display for CirclePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Clockwise rotation `R_γ(t) = t − γ (mod 1)`.
pub fn rotate(t: CirclePoint, gamma: f64) -> CirclePoint {
    CirclePoint::new(t.0 - wrap_unit(gamma))
}

fn check_cover(n: u32) -> Result<(), CircleError> {
    if n < 2 {
        Err(CircleError::InvalidCover(n))
    } else {
        Ok(())
    }
}

/// The `N`-fold covering map `p_N(t) = Nt (mod 1)`.
pub fn cover(t: CirclePoint, n: u32) -> Result<CirclePoint, CircleError> {
    check_cover(n)?;
    Ok(CirclePoint::new(f64::from(n) * t.0))
}

/// A half-open arc `[start, start + length)` taken mod 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    start: CirclePoint,
    length: f64,
}

impl Arc {
    pub fn new(start: f64, length: f64) -> Result<Self, CircleError> {
        if !start.is_finite() {
            return Err(CircleError::NonFinite(start));
        }
        if !(length > 0.0 && length <= 1.0) {
            return Err(CircleError::InvalidArcLength(length));
        }
        Ok(Arc {
            start: CirclePoint::new(start),
            length,
        })
    }

    /// The arc `[a, b)`; `b` may exceed 1 for arcs that wrap.
    pub fn from_endpoints(a: f64, b: f64) -> Result<Self, CircleError> {
        Arc::new(a, b - a)
    }

    pub fn full() -> Self {
        Arc {
            start: CirclePoint::ZERO,
            length: 1.0,
        }
    }

    pub fn start(&self) -> CirclePoint {
        self.start
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Right endpoint as a real, possibly greater than 1.
    pub fn end(&self) -> f64 {
        self.start.0 + self.length
    }

    /// The arc split into at most two non-wrapping intervals `[lo, hi)` with
    /// `0 ≤ lo < hi ≤ 1`.
    pub fn fragments(&self) -> Vec<(f64, f64)> {
        let a = self.start.0;
        let b = a + self.length;
        if self.length >= 1.0 {
            vec![(0.0, 1.0)]
        } else if b <= 1.0 {
            vec![(a, b)]
        } else {
            let mut out = vec![(a, 1.0)];
            if b - 1.0 > 0.0 {
                out.push((0.0, b - 1.0));
            }
            out
        }
    }

    pub fn contains(&self, t: CirclePoint) -> bool {
        wrap_unit(t.0 - self.start.0) < self.length || self.length >= 1.0
    }

    /// The image `R_γ(arc) = arc − γ`.
    pub fn rotate(&self, gamma: f64) -> Arc {
        Arc {
            start: rotate(self.start, gamma),
            length: self.length,
        }
    }
}

impl fmt::Display for Arc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start.0, self.end())
    }
}

/// `R_γ(arc)`.
pub fn rotate_arc(a: &Arc, gamma: f64) -> Arc {
    a.rotate(gamma)
}

/// The `N` disjoint arcs making up `p_N^{-1}(a)`.
pub fn cover_preimage_arcs(a: &Arc, n: u32) -> Result<Vec<Arc>, CircleError> {
    check_cover(n)?;
    let nf = f64::from(n);
    let s = a.start.0;
    Ok((0..n)
        .map(|i| Arc {
            start: CirclePoint::new((s + f64::from(i)) / nf),
            length: a.length / nf,
        })
        .collect())
}

/// The dyadic partition `U^n_j = [j/2^n, (j+1)/2^n)`, `0 ≤ j < 2^n`.
pub fn dyadic_partition(n: u32) -> Vec<Arc> {
    let k = 1u64 << n;
    let width = 1.0 / k as f64;
    (0..k)
        .map(|j| Arc {
            start: CirclePoint(j as f64 * width),
            length: width,
        })
        .collect()
}

/// The first `k` base-`N` digits of `t`, choosing the terminating expansion
/// whenever one exists.
pub fn base_n_digits(t: CirclePoint, n: u32, k: usize) -> Result<Vec<u32>, CircleError> {
    check_cover(n)?;
    let nf = f64::from(n);
    let mut x = t.0;
    // representation error of t, amplified by N at every step
    let mut slack = 8.0 * f64::EPSILON;
    let mut digits = Vec::with_capacity(k);
    for _ in 0..k {
        x *= nf;
        slack *= nf;
        let nearest = x.round();
        if (x - nearest).abs() <= slack {
            x = nearest;
        }
        let d = x.floor().clamp(0.0, nf - 1.0);
        digits.push(d as u32);
        x = (x - d).max(0.0);
    }
    Ok(digits)
}

/// `Σ a_i / N^i` for a digit string.
pub fn from_base_n_digits(digits: &[u32], n: u32) -> f64 {
    let nf = f64::from(n);
    digits.iter().rev().fold(0.0, |acc, &d| (acc + f64::from(d)) / nf)
}

/// `e^{2πi x}` with the argument reduced mod 1 first.
pub fn unit_phase(x: f64) -> Complex64 {
    let (s, c) = (TAU * wrap_unit(x)).sin_cos();
    Complex64::new(c, s)
}

/// A finite Fourier series `f(t) = Σ_{|k| ≤ K} c_k e^{2πikt}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigPoly {
    /// `coeffs[k + degree]` holds `c_k`.
    coeffs: Vec<Complex64>,
}

impl TrigPoly {
    pub fn zero() -> Self {
        TrigPoly {
            coeffs: vec![Complex64::new(0.0, 0.0)],
        }
    }

    pub fn constant(c: Complex64) -> Self {
        TrigPoly { coeffs: vec![c] }
    }

    pub fn one() -> Self {
        TrigPoly::constant(Complex64::new(1.0, 0.0))
    }

    /// The character `e^{2πikt}`.
    pub fn monomial(k: i64, c: Complex64) -> Self {
        let degree = k.unsigned_abs() as usize;
        let mut coeffs = vec![Complex64::new(0.0, 0.0); 2 * degree + 1];
        coeffs[(k + degree as i64) as usize] = c;
        TrigPoly { coeffs }
    }

    /// Builds a polynomial from `(frequency, coefficient)` pairs; repeated
    /// frequencies are summed.
    pub fn from_terms<I>(terms: I) -> Self
    where
        I: IntoIterator<Item = (i64, Complex64)>,
    {
        let terms: Vec<_> = terms.into_iter().collect();
        let degree = terms.iter().map(|(k, _)| k.unsigned_abs() as usize).max().unwrap_or(0);
        let mut coeffs = vec![Complex64::new(0.0, 0.0); 2 * degree + 1];
        for (k, c) in terms {
            coeffs[(k + degree as i64) as usize] += c;
        }
        TrigPoly { coeffs }.trimmed()
    }

    pub fn degree(&self) -> usize {
        (self.coeffs.len() - 1) / 2
    }

    /// `c_k`, zero outside the support.
    pub fn coeff(&self, k: i64) -> Complex64 {
        let d = self.degree() as i64;
        if k.abs() > d {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[(k + d) as usize]
        }
    }

    /// Nonzero `(k, c_k)` pairs in increasing frequency.
    pub fn terms(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        let d = self.degree() as i64;
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != Complex64::new(0.0, 0.0))
            .map(move |(i, c)| (i as i64 - d, *c))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == Complex64::new(0.0, 0.0))
    }

    pub fn is_constant(&self) -> bool {
        self.degree() == 0
    }

    /// Real-valued iff `c_{-k} = conj(c_k)` within `tol`.
    pub fn is_real(&self, tol: f64) -> bool {
        let d = self.degree() as i64;
        (-d..=d).all(|k| (self.coeff(-k) - self.coeff(k).conj()).norm() <= tol)
    }

    /// Drops exactly-zero outermost coefficient pairs.
    fn trimmed(mut self) -> Self {
        let zero = Complex64::new(0.0, 0.0);
        while self.coeffs.len() > 1 && self.coeffs[0] == zero && self.coeffs[self.coeffs.len() - 1] == zero {
            self.coeffs.pop();
            self.coeffs.remove(0);
        }
        self
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        self.terms().map(|(k, c)| c * unit_phase(k as f64 * t)).sum()
    }

    pub fn conj(&self) -> Self {
        TrigPoly {
            coeffs: self.coeffs.iter().rev().map(|c| c.conj()).collect(),
        }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        TrigPoly {
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
        .trimmed()
    }

    pub fn add(&self, other: &TrigPoly) -> Self {
        let d = self.degree().max(other.degree()) as i64;
        TrigPoly {
            coeffs: (-d..=d).map(|k| self.coeff(k) + other.coeff(k)).collect(),
        }
        .trimmed()
    }

    pub fn sub(&self, other: &TrigPoly) -> Self {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    /// Exact product (convolution of coefficients).
    pub fn mul(&self, other: &TrigPoly) -> Self {
        let (da, db) = (self.degree(), other.degree());
        let mut coeffs = vec![Complex64::new(0.0, 0.0); 2 * (da + db) + 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if *a == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        TrigPoly { coeffs }.trimmed()
    }

    pub fn checked_mul(&self, other: &TrigPoly, cap: usize) -> Result<Self, CircleError> {
        let p = self.mul(other);
        p.check_cap(cap)?;
        Ok(p)
    }

    /// `f ∘ R_γ`, i.e. `t ↦ f(t − γ)`: `c_k ↦ c_k e^{−2πikγ}`.
    pub fn compose_rotation(&self, gamma: f64) -> Self {
        let d = self.degree() as i64;
        TrigPoly {
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .map(|(i, c)| c * unit_phase(-((i as i64 - d) as f64) * gamma))
                .collect(),
        }
    }

    /// `f ∘ p_N`: the coefficient at `k` moves to `Nk`.
    pub fn compose_cover(&self, n: u32) -> Result<Self, CircleError> {
        check_cover(n)?;
        let d = self.degree();
        let nd = d * n as usize;
        let mut coeffs = vec![Complex64::new(0.0, 0.0); 2 * nd + 1];
        for (i, c) in self.coeffs.iter().enumerate() {
            let k = i as i64 - d as i64;
            coeffs[(k * i64::from(n) + nd as i64) as usize] = *c;
        }
        Ok(TrigPoly { coeffs })
    }

    pub fn checked_compose_cover(&self, n: u32, cap: usize) -> Result<Self, CircleError> {
        let p = self.compose_cover(n)?;
        p.check_cap(cap)?;
        Ok(p)
    }

    pub fn check_cap(&self, cap: usize) -> Result<(), CircleError> {
        if self.degree() > cap {
            Err(CircleError::DegreeOverflow {
                degree: self.degree(),
                cap,
            })
        } else {
            Ok(())
        }
    }

    /// Largest coefficient difference, for coefficient-level comparisons.
    pub fn max_coeff_diff(&self, other: &TrigPoly) -> f64 {
        let d = self.degree().max(other.degree()) as i64;
        (-d..=d)
            .map(|k| (self.coeff(k) - other.coeff(k)).norm())
            .fold(0.0, f64::max)
    }
}

/// `trig_compose_rotation`: `f ∘ R_γ`.
pub fn trig_compose_rotation(f: &TrigPoly, gamma: f64) -> TrigPoly {
    f.compose_rotation(gamma)
}

/// `trig_compose_cover`: `f ∘ p_N`.
pub fn trig_compose_cover(f: &TrigPoly, n: u32) -> Result<TrigPoly, CircleError> {
    f.compose_cover(n)
}

pub fn trig_mul(f: &TrigPoly, g: &TrigPoly) -> TrigPoly {
    f.mul(g)
}

pub fn trig_conj(f: &TrigPoly) -> TrigPoly {
    f.conj()
}

pub fn trig_eval(f: &TrigPoly, t: f64) -> Complex64 {
    f.eval(t)
}

/// A step function: `values[i]` on `[breakpoints[i], breakpoints[i+1])`, the
/// last piece running to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimpleFunction {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl SimpleFunction {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self, CircleError> {
        let ok = !breakpoints.is_empty()
            && breakpoints.len() == values.len()
            && breakpoints[0] == 0.0
            && breakpoints.windows(2).all(|w| w[0] < w[1])
            && breakpoints.last().is_some_and(|&b| b < 1.0);
        if !ok {
            return Err(CircleError::InvalidSimpleFunction);
        }
        Ok(SimpleFunction { breakpoints, values })
    }

    /// `f_n = Σ_j f(j/2^n) 1_{U^n_j}` for a real-valued `f`.
    pub fn dyadic_samples<F: Fn(f64) -> f64>(f: F, n: u32) -> Self {
        let k = 1usize << n;
        let breakpoints: Vec<f64> = (0..k).map(|j| j as f64 / k as f64).collect();
        let values = breakpoints.iter().map(|&t| f(t)).collect();
        SimpleFunction { breakpoints, values }
    }

    /// Non-wrapping intervals `[lo, hi)` with their values.
    pub fn pieces(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.breakpoints.iter().enumerate().map(move |(i, &lo)| {
            let hi = self.breakpoints.get(i + 1).copied().unwrap_or(1.0);
            (lo, hi, self.values[i])
        })
    }

    pub fn eval(&self, t: CirclePoint) -> f64 {
        let i = self.breakpoints.partition_point(|&b| b <= t.value());
        self.values[i.saturating_sub(1)]
    }
}
