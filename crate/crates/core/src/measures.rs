//! Probability measures on the circle with piecewise-exponential densities.
//!
//! A [`CircleMeasure`] is a finite convex combination of components, each a
//! density made of [`ExpPiece`]s that tile `[0, 1)`. This class contains
//! Lebesgue measure `μ`, the measures `m_r` with density
//! `W_r(t) = r/(1 − e^{−r}) e^{−rt}`, all their rotates `m_r ∘ R_s`, the step
//! approximations `m_{n,r}`, and is closed under rotation, pushforward along
//! `p_N` and convex combination. Every mass and every integral against a
//! trigonometric polynomial is evaluated in closed form.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circle::{dyadic_partition, unit_phase, wrap_unit, Arc, CircleError, SimpleFunction, TrigPoly};
use crate::cycle::{self, CycleError};

/// Default tolerance for subinvariance verdicts.
pub const SUBINVARIANCE_TOL: f64 = 1e-9;

/// Deepest dyadic level used by the arc form of the subinvariance check.
pub const SUBINVARIANCE_ARC_LEVEL: u32 = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeasureError {
    #[error("rate must be nonnegative, got {0} (no subinvariant probability measures exist)")]
    NegativeRate(f64),
    #[error("rate must be positive, got {0}")]
    NonPositiveRate(f64),
    #[error("invalid piece: {0}")]
    InvalidPiece(String),
    #[error("pieces must tile [0, 1) without gaps")]
    NotATiling,
    #[error("total mass {0} differs from 1")]
    NotNormalized(f64),
    #[error("convex weights must be nonnegative, match the component count and sum to 1")]
    InvalidWeights,
    #[error("gamma must lie in (0, 1), got {0}")]
    InvalidGamma(f64),
    #[error("need at least {min} quadrature panels, got {got}")]
    TooFewPanels { min: usize, got: usize },
    #[error("grid sizes must be at least 2")]
    GridTooSmall,
    #[error("forced equality fails on [{index}/{n}, {}/{n}): mass {mass} vs {reference}", index + 1)]
    ForcedEqualityViolated {
        n: u32,
        index: u32,
        mass: f64,
        reference: f64,
    },
    #[error(transparent)]
    Cycle(#[from] CycleError),
    #[error(transparent)]
    Circle(#[from] CircleError),
}

/// `(1 − e^{−ρL})/ρ`, the integral of `e^{−ρu}` over `[0, L]`.
fn decay_integral(rate: f64, len: f64) -> f64 {
    if rate == 0.0 {
        len
    } else {
        -(-rate * len).exp_m1() / rate
    }
}

/// `e^z − 1` for complex `z`, accurate near zero.
fn complex_exp_m1(z: Complex64) -> Complex64 {
    let half = (0.5 * z.im).sin();
    let re = z.re.exp_m1() * z.im.cos() - 2.0 * half * half;
    Complex64::new(re, z.re.exp() * z.im.sin())
}

/// A density `t ↦ e^{log_coefficient − rate (t − start)}` on `[start, end)`.
///
/// The coefficient is kept as a logarithm so that pieces of steep densities
/// stay representable after rotation or restriction even where the density
/// itself underflows. A zero density has `log_coefficient = −∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpPiece {
    pub start: f64,
    pub end: f64,
    #[serde(with = "log_coefficient_serde")]
    pub log_coefficient: f64,
    pub rate: f64,
}

/// JSON has no infinities, so a zero density is written as `null`.
mod log_coefficient_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
    }
}

impl ExpPiece {
    /// A piece whose density at `start` is `coefficient`.
    pub fn new(start: f64, end: f64, coefficient: f64, rate: f64) -> Result<Self, MeasureError> {
        if !(coefficient.is_finite() && coefficient >= 0.0) {
            return Err(MeasureError::InvalidPiece(format!("coefficient {coefficient}")));
        }
        ExpPiece::from_log(start, end, coefficient.ln(), rate)
    }

    pub fn from_log(start: f64, end: f64, log_coefficient: f64, rate: f64) -> Result<Self, MeasureError> {
        let ok = start.is_finite()
            && end.is_finite()
            && (0.0..1.0).contains(&start)
            && end > start
            && end <= 1.0
            && (log_coefficient.is_finite() || log_coefficient == f64::NEG_INFINITY)
            && rate.is_finite();
        if !ok {
            return Err(MeasureError::InvalidPiece(format!(
                "[{start}, {end}) log coefficient {log_coefficient} rate {rate}"
            )));
        }
        Ok(ExpPiece {
            start,
            end,
            log_coefficient,
            rate,
        })
    }

    /// Density at `start` (zero if it underflows).
    pub fn coefficient(&self) -> f64 {
        self.log_coefficient.exp()
    }

    fn is_null(&self) -> bool {
        self.log_coefficient == f64::NEG_INFINITY
    }

    pub fn arc(&self) -> Arc {
        Arc::from_endpoints(self.start, self.end).expect("piece endpoints are ordered")
    }

    fn log_value_at(&self, t: f64) -> f64 {
        if self.is_null() {
            return f64::NEG_INFINITY;
        }
        self.log_coefficient - self.rate * (t - self.start)
    }

    /// Density value, extended continuously to the closed interval.
    pub fn value_at(&self, t: f64) -> f64 {
        self.log_value_at(t).exp()
    }

    /// `ln ∫_lo^hi density` for `start ≤ lo ≤ hi ≤ end`.
    fn log_mass_between(&self, lo: f64, hi: f64) -> f64 {
        if hi <= lo || self.is_null() {
            return f64::NEG_INFINITY;
        }
        if self.rate >= 0.0 {
            self.log_value_at(lo) + decay_integral(self.rate, hi - lo).ln()
        } else {
            self.log_value_at(hi) + decay_integral(-self.rate, hi - lo).ln()
        }
    }

    fn mass_between(&self, lo: f64, hi: f64) -> f64 {
        self.log_mass_between(lo, hi).exp()
    }

    /// `∫_lo^hi e^{2πikt} density(t) dt`.
    fn fourier_between(&self, k: i64, lo: f64, hi: f64) -> Complex64 {
        if hi <= lo || self.is_null() {
            return Complex64::new(0.0, 0.0);
        }
        let len = hi - lo;
        let z = Complex64::new(-self.rate, std::f64::consts::TAU * k as f64);
        if z.re == 0.0 && z.im == 0.0 {
            return Complex64::new(self.value_at(lo) * len, 0.0);
        }
        if self.rate >= 0.0 {
            let g = unit_phase(k as f64 * lo) * self.value_at(lo);
            g * complex_exp_m1(z * len) / z
        } else {
            let g = unit_phase(k as f64 * hi) * self.value_at(hi);
            -g * complex_exp_m1(-z * len) / z
        }
    }

    fn mass(&self) -> f64 {
        self.mass_between(self.start, self.end)
    }

    /// The same density with its reference point moved to `start`.
    fn rebased(&self, start: f64) -> ExpPiece {
        ExpPiece {
            start,
            log_coefficient: self.log_value_at(start),
            ..*self
        }
    }

    /// The same density restricted to `[lo, hi) ⊆ [start, end)`.
    fn restrict(&self, lo: f64, hi: f64) -> ExpPiece {
        ExpPiece {
            end: hi,
            ..self.rebased(lo)
        }
    }

    /// The piece translated by `shift` (its density moves with it).
    fn translated(&self, shift: f64) -> ExpPiece {
        ExpPiece {
            start: self.start + shift,
            end: self.end + shift,
            ..*self
        }
    }
}

/// A density on the circle given by pieces tiling `[0, 1)` in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseDensity {
    pieces: Vec<ExpPiece>,
}

impl PiecewiseDensity {
    pub fn new(pieces: Vec<ExpPiece>) -> Result<Self, MeasureError> {
        let tiles = !pieces.is_empty()
            && pieces[0].start == 0.0
            && pieces[pieces.len() - 1].end == 1.0
            && pieces.windows(2).all(|w| w[0].end == w[1].start);
        if !tiles {
            return Err(MeasureError::NotATiling);
        }
        Ok(PiecewiseDensity { pieces })
    }

    pub fn pieces(&self) -> &[ExpPiece] {
        &self.pieces
    }

    pub fn total_mass(&self) -> f64 {
        self.pieces.iter().map(ExpPiece::mass).sum()
    }

    fn piece_index(&self, t: f64) -> usize {
        self.pieces.partition_point(|p| p.end <= t).min(self.pieces.len() - 1)
    }

    pub fn density(&self, t: f64) -> f64 {
        let t = wrap_unit(t);
        self.pieces[self.piece_index(t)].value_at(t)
    }

    fn log_density(&self, t: f64) -> f64 {
        let t = wrap_unit(t);
        self.pieces[self.piece_index(t)].log_value_at(t)
    }

    fn log_mass_interval(&self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return f64::NEG_INFINITY;
        }
        let first = self.piece_index(lo);
        log_sum_exp(
            self.pieces[first..]
                .iter()
                .take_while(|p| p.start < hi)
                .map(|p| p.log_mass_between(lo.max(p.start), hi.min(p.end))),
        )
    }

    /// Mass of `[lo, hi)` for `0 ≤ lo ≤ hi ≤ 1`.
    fn mass_interval(&self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        let first = self.piece_index(lo);
        let mut total = 0.0;
        for p in &self.pieces[first..] {
            if p.start >= hi {
                break;
            }
            total += p.mass_between(lo.max(p.start), hi.min(p.end));
        }
        total
    }

    fn fourier(&self, k: i64) -> Complex64 {
        self.pieces.iter().map(|p| p.fourier_between(k, p.start, p.end)).sum()
    }

    fn scaled(&self, factor: f64) -> PiecewiseDensity {
        PiecewiseDensity {
            pieces: self
                .pieces
                .iter()
                .map(|p| ExpPiece {
                    log_coefficient: p.log_coefficient + factor.ln(),
                    ..*p
                })
                .collect(),
        }
    }

    /// Density of `m ∘ R_s`, i.e. `t ↦ density(t − s)`.
    fn rotated(&self, s: f64) -> PiecewiseDensity {
        let shift = wrap_unit(s);
        if shift == 0.0 {
            return self.clone();
        }
        let mut out = Vec::with_capacity(self.pieces.len() + 1);
        for p in &self.pieces {
            let (a, b) = (p.start + shift, p.end + shift);
            if b <= 1.0 {
                out.push(p.translated(shift));
            } else if a >= 1.0 {
                out.push(p.translated(shift - 1.0));
            } else {
                let cut = 1.0 - shift;
                if cut > p.start {
                    out.push(p.restrict(p.start, cut).translated(shift));
                }
                if p.end > cut {
                    out.push(p.restrict(cut, p.end).translated(shift - 1.0));
                }
            }
        }
        out.sort_by(|x, y| x.start.total_cmp(&y.start));
        normalize_tiling(out)
    }

    /// Density of `t ↦ density(1 − t)`.
    fn reflected(&self) -> PiecewiseDensity {
        let mut out: Vec<ExpPiece> = self
            .pieces
            .iter()
            .rev()
            .map(|p| ExpPiece {
                start: 1.0 - p.end,
                end: 1.0 - p.start,
                log_coefficient: p.log_value_at(p.end),
                rate: -p.rate,
            })
            .collect();
        out.retain(|p| p.end > p.start);
        normalize_tiling(out)
    }

    /// Pieces obtained by pushing the part of the density on `[i/N, (i+1)/N)` forward along `t ↦ Nt − i`, scaled by `1/N`.
    fn branch_pushforward(&self, n: u32, i: u32) -> Vec<ExpPiece> {
        let nf = f64::from(n);
        let (lo, hi) = (f64::from(i) / nf, f64::from(i + 1) / nf);
        let mut out = Vec::new();
        for p in &self.pieces {
            let (a, b) = (p.start.max(lo), p.end.min(hi));
            if b <= a {
                continue;
            }
            let exact = nf * a - f64::from(i);
            let start = exact.clamp(0.0, 1.0);
            let end = (nf * b - f64::from(i)).clamp(0.0, 1.0);
            if end <= start {
                continue;
            }
            let rate = p.rate / nf;
            out.push(ExpPiece {
                start,
                end,
                log_coefficient: p.log_value_at(a) - nf.ln() - rate * (start - exact),
                rate,
            });
        }
        out
    }
}

/// `ln Σ e^{x_i}`, with `−∞` for an empty or all-`−∞` input.
fn log_sum_exp<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let values: Vec<f64> = values.into_iter().collect();
    let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return top;
    }
    top + values.iter().map(|v| (v - top).exp()).sum::<f64>().ln()
}

/// Snaps a sorted, contiguous-up-to-rounding list of pieces onto an exact
/// tiling of `[0, 1)`.
fn normalize_tiling(mut pieces: Vec<ExpPiece>) -> PiecewiseDensity {
    pieces.retain(|p| p.end - p.start > 1e-15);
    let count = pieces.len();
    for i in 0..count {
        if i == 0 {
            pieces[i] = pieces[i].rebased(0.0);
        }
        if i + 1 < count {
            let next = pieces[i + 1].start;
            pieces[i].end = next;
        } else {
            pieces[i].end = 1.0;
        }
    }
    PiecewiseDensity { pieces }
}

/// Merges several densities (each a list of pieces tiling `[0, 1)`) into one
/// density, summing coefficients of equal-rate terms. Returns `None` when some
/// elementary interval carries terms of different rates.
fn merge_tilings(branches: &[Vec<ExpPiece>]) -> Option<PiecewiseDensity> {
    let mut cuts: Vec<f64> = branches
        .iter()
        .flat_map(|b| b.iter().map(|p| p.start))
        .chain(std::iter::once(1.0))
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    if cuts.first() != Some(&0.0) {
        cuts.insert(0, 0.0);
    }
    *cuts.last_mut().expect("nonempty") = 1.0;
    let mut out = Vec::with_capacity(cuts.len());
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        let mid = 0.5 * (lo + hi);
        let mut rate: Option<f64> = None;
        let mut logs = Vec::with_capacity(branches.len());
        for b in branches {
            let idx = b.partition_point(|p| p.end <= mid).min(b.len() - 1);
            let p = &b[idx];
            if p.is_null() {
                continue;
            }
            match rate {
                None => rate = Some(p.rate),
                Some(r) if r == p.rate => {}
                Some(_) => return None,
            }
            logs.push(p.log_value_at(lo));
        }
        out.push(ExpPiece {
            start: lo,
            end: hi,
            log_coefficient: log_sum_exp(logs),
            rate: rate.unwrap_or(0.0),
        });
    }
    Some(normalize_tiling(out))
}

/// A probability measure: a flat convex combination of piecewise densities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircleMeasure {
    components: Vec<(f64, PiecewiseDensity)>,
}

impl CircleMeasure {
    /// A single-component measure; the density must integrate to 1.
    pub fn from_density(density: PiecewiseDensity) -> Result<Self, MeasureError> {
        let mass = density.total_mass();
        if (mass - 1.0).abs() > 1e-12 {
            return Err(MeasureError::NotNormalized(mass));
        }
        Ok(CircleMeasure {
            components: vec![(1.0, density)],
        })
    }

    /// Builds a measure from pieces, rescaling the density to total mass 1.
    pub fn from_pieces_normalized(pieces: Vec<ExpPiece>) -> Result<Self, MeasureError> {
        let density = PiecewiseDensity::new(pieces)?;
        let mass = density.total_mass();
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(MeasureError::NotNormalized(mass));
        }
        Ok(CircleMeasure {
            components: vec![(1.0, density.scaled(1.0 / mass))],
        })
    }

    /// Rebuilds a measure from serialized components after validation.
    pub fn from_components(components: Vec<(f64, PiecewiseDensity)>) -> Result<Self, MeasureError> {
        let wsum: f64 = components.iter().map(|(w, _)| w).sum();
        if components.is_empty() || components.iter().any(|(w, _)| !(*w >= 0.0)) || (wsum - 1.0).abs() > 1e-12 {
            return Err(MeasureError::InvalidWeights);
        }
        for (_, d) in &components {
            PiecewiseDensity::new(d.pieces.clone())?;
            let mass = d.total_mass();
            if (mass - 1.0).abs() > 1e-12 {
                return Err(MeasureError::NotNormalized(mass));
            }
        }
        Ok(CircleMeasure { components })
    }

    pub fn components(&self) -> &[(f64, PiecewiseDensity)] {
        &self.components
    }

    pub fn total_mass(&self) -> f64 {
        self.components.iter().map(|(w, d)| w * d.total_mass()).sum()
    }

    /// Density at `t` (right-continuous at breakpoints).
    pub fn density(&self, t: f64) -> f64 {
        self.components.iter().map(|(w, d)| w * d.density(t)).sum()
    }

    /// Sorted breakpoints of all components, including 0 and 1.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self
            .components
            .iter()
            .flat_map(|(_, d)| d.pieces.iter().map(|p| p.start))
            .chain(std::iter::once(1.0))
            .collect();
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }

    /// `ln density(t)`, accurate where the density itself underflows.
    pub fn log_density(&self, t: f64) -> f64 {
        log_sum_exp(self.components.iter().map(|(w, d)| w.ln() + d.log_density(t)))
    }

    /// `ln m(U)`, accurate where the mass itself underflows.
    pub fn log_measure_arc(&self, a: &Arc) -> f64 {
        log_sum_exp(a.fragments().iter().flat_map(|&(lo, hi)| {
            self.components
                .iter()
                .map(move |(w, d)| w.ln() + d.log_mass_interval(lo, hi))
        }))
    }

    pub fn measure_arc(&self, a: &Arc) -> f64 {
        a.fragments().iter().map(|&(lo, hi)| self.mass_interval(lo, hi)).sum()
    }

    /// Mass of `[lo, hi)` for `0 ≤ lo ≤ hi ≤ 1`.
    pub fn mass_interval(&self, lo: f64, hi: f64) -> f64 {
        self.components.iter().map(|(w, d)| w * d.mass_interval(lo, hi)).sum()
    }

    /// `∫ e^{2πikt} dm`.
    pub fn fourier(&self, k: i64) -> Complex64 {
        self.components.iter().map(|(w, d)| d.fourier(k) * *w).sum()
    }

    pub fn integrate_trig(&self, f: &TrigPoly) -> Complex64 {
        f.terms().map(|(k, c)| c * self.fourier(k)).sum()
    }

    pub fn integrate_simple(&self, f: &SimpleFunction) -> f64 {
        f.pieces().map(|(lo, hi, v)| v * self.mass_interval(lo, hi)).sum()
    }

    /// `m ∘ R_s`.
    pub fn rotate(&self, s: f64) -> CircleMeasure {
        CircleMeasure {
            components: self.components.iter().map(|(w, d)| (*w, d.rotated(s))).collect(),
        }
    }

    /// The reflection `U ↦ m(1 − U)`, whose density is `t ↦ density(1 − t)`.
    pub fn reflect(&self) -> CircleMeasure {
        CircleMeasure {
            components: self.components.iter().map(|(w, d)| (*w, d.reflected())).collect(),
        }
    }

    /// `m ∘ p_N^{-1}`.
    pub fn pushforward(&self, n: u32) -> Result<CircleMeasure, MeasureError> {
        if n < 2 {
            return Err(CircleError::InvalidCover(n).into());
        }
        let mut components = Vec::new();
        for (w, d) in &self.components {
            let branches: Vec<Vec<ExpPiece>> = (0..n).map(|i| d.branch_pushforward(n, i)).collect();
            let full: Vec<Vec<ExpPiece>> = branches
                .iter()
                .filter(|b| b.first().is_some_and(|p| p.start == 0.0) && b.last().is_some_and(|p| p.end == 1.0))
                .cloned()
                .collect();
            let merged = if full.len() == branches.len() {
                merge_tilings(&branches)
            } else {
                None
            };
            match merged {
                Some(density) => components.push((*w, density)),
                None => {
                    // Fall back to one component per branch, weighted by mass.
                    for b in branches {
                        let density = normalize_tiling(b);
                        let mass = density.total_mass();
                        if mass > 0.0 {
                            components.push((w * mass, density.scaled(1.0 / mass)));
                        }
                    }
                }
            }
        }
        Ok(CircleMeasure { components })
    }

    /// `Σ_i w_i m_i`, flattened to a single level of components.
    pub fn convex_combination(weights: &[f64], measures: &[CircleMeasure]) -> Result<CircleMeasure, MeasureError> {
        let sum: f64 = weights.iter().sum();
        if weights.len() != measures.len()
            || weights.is_empty()
            || weights.iter().any(|&w| !(w >= 0.0))
            || (sum - 1.0).abs() > 1e-12
        {
            return Err(MeasureError::InvalidWeights);
        }
        let components = weights
            .iter()
            .zip(measures)
            .filter(|(w, _)| **w > 0.0)
            .flat_map(|(w, m)| m.components.iter().map(move |(v, d)| (w * v, d.clone())))
            .collect();
        Ok(CircleMeasure { components })
    }

    /// Terms `(weight · peak-at-lo, rate)` valid on an interval free of
    /// breakpoints, so that `density(t) = Σ c e^{−ρ(t − lo)}` on `[lo, hi]`.
    fn local_terms(&self, lo: f64, hi: f64) -> Vec<(f64, f64)> {
        let mid = 0.5 * (lo + hi);
        self.components
            .iter()
            .map(|(w, d)| {
                let p = &d.pieces[d.piece_index(mid)];
                (w * p.value_at(lo), p.rate)
            })
            .collect()
    }
}

/// Lebesgue measure `μ`.
pub fn lebesgue() -> CircleMeasure {
    CircleMeasure {
        components: vec![(
            1.0,
            PiecewiseDensity {
                pieces: vec![ExpPiece {
                    start: 0.0,
                    end: 1.0,
                    log_coefficient: 0.0,
                    rate: 0.0,
                }],
            },
        )],
    }
}

/// The extreme measure `m_r` with density `W_r(t) = r/(1 − e^{−r}) e^{−rt}`.
pub fn make_mr(r: f64) -> Result<CircleMeasure, MeasureError> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(MeasureError::NegativeRate(r));
    }
    if r == 0.0 {
        return Ok(lebesgue());
    }
    Ok(CircleMeasure {
        components: vec![(
            1.0,
            PiecewiseDensity {
                pieces: vec![ExpPiece {
                    start: 0.0,
                    end: 1.0,
                    log_coefficient: (r / -(-r).exp_m1()).ln(),
                    rate: r,
                }],
            },
        )],
    })
}

/// `m ∘ R_s`.
pub fn rotate_measure(m: &CircleMeasure, s: f64) -> CircleMeasure {
    m.rotate(s)
}

/// `m ∘ p_N^{-1}`.
pub fn pushforward_cover(m: &CircleMeasure, n: u32) -> Result<CircleMeasure, MeasureError> {
    m.pushforward(n)
}

pub fn measure_arc(m: &CircleMeasure, a: &Arc) -> f64 {
    m.measure_arc(a)
}

/// Integrand accepted by [`integrate`].
pub enum Integrand<'a> {
    Trig(&'a TrigPoly),
    Simple(&'a SimpleFunction),
}

pub fn integrate(m: &CircleMeasure, f: Integrand<'_>) -> Complex64 {
    match f {
        Integrand::Trig(p) => m.integrate_trig(p),
        Integrand::Simple(s) => Complex64::new(m.integrate_simple(s), 0.0),
    }
}

/// The step approximation `m_{n,r}` with density `2^n (v^n_0)_j` on `U^n_j`.
pub fn make_mnr(n: u32, r: f64) -> Result<CircleMeasure, MeasureError> {
    if !(r > 0.0) {
        return Err(MeasureError::NonPositiveRate(r));
    }
    let v0 = cycle::extreme_vector(n, r, 0)?;
    let k = v0.len() as f64;
    let pieces = dyadic_partition(n)
        .iter()
        .zip(&v0)
        .map(|(a, &x)| ExpPiece {
            start: a.start().value(),
            end: a.end(),
            log_coefficient: (k * x).ln(),
            rate: 0.0,
        })
        .collect();
    Ok(CircleMeasure {
        components: vec![(1.0, PiecewiseDensity::new(pieces)?)],
    })
}

/// `Σ_j λ_j (m_r ∘ R_{j/2^n})`, the measure `M_n` rebuilt from weights.
pub fn extreme_combination(lambda: &[f64], r: f64, n: u32) -> Result<CircleMeasure, MeasureError> {
    let base = make_mr(r)?;
    let k = 1usize << n;
    if lambda.len() != k {
        return Err(MeasureError::InvalidWeights);
    }
    let rotates: Vec<CircleMeasure> = (0..k).map(|j| base.rotate(j as f64 / k as f64)).collect();
    CircleMeasure::convex_combination(lambda, &rotates)
}

/// Verdict of a subinvariance check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubinvReport {
    pub satisfied: bool,
    /// Largest relative excess `(lhs − rhs)/max(1, lhs)` over every test,
    /// with excesses inside floating-point rounding counted as zero.
    pub worst_violation: f64,
    pub witness: Option<SubinvWitness>,
    pub cases: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubinvWitness {
    pub t: f64,
    pub s: f64,
    pub arc: Arc,
}

/// Relative excess `(lhs − rhs)/max(1, lhs)` of `lhs = e^{a}` over
/// `rhs = e^{g + b}`, computed from the logarithms so that large growth
/// factors and tiny masses cancel instead of overflowing or underflowing.
/// Excesses within rounding of the exponents count as zero.
fn log_excess(lhs_log: f64, growth: f64, base_log: f64) -> f64 {
    if lhs_log == f64::NEG_INFINITY {
        return 0.0;
    }
    let rhs_log = growth + base_log;
    let slack = 16.0
        * f64::EPSILON
        * (1.0 + lhs_log.abs() + growth.abs() + if base_log.is_finite() { base_log.abs() } else { 0.0 });
    let gap = rhs_log - lhs_log;
    if gap >= -slack {
        return 0.0;
    }
    let lhs = lhs_log.exp();
    -lhs * gap.exp_m1() / lhs.max(1.0)
}

/// Checks `m(R_t(U)) ≤ e^{rt} m(U)` in two ways: density domination
/// `density(t − s) ≤ e^{rs} density(t)` on an `n_t × n_s` grid of
/// `t, s ∈ [0, 1)`, and the arc inequality on every dyadic arc up to level 8
/// for the same rotation grid. Larger rotations reduce to `s mod 1` because the
/// right-hand side only grows.
pub fn check_subinvariance(
    m: &CircleMeasure,
    r: f64,
    grid: (usize, usize),
    tol: f64,
) -> Result<SubinvReport, MeasureError> {
    if !(r >= 0.0) {
        return Err(MeasureError::NegativeRate(r));
    }
    let (n_t, n_s) = grid;
    if n_t < 2 || n_s < 2 {
        return Err(MeasureError::GridTooSmall);
    }
    let mut worst = 0.0f64;
    let mut witness = None;
    let mut cases = 0usize;

    let densities: Vec<f64> = (0..n_t).map(|i| m.log_density(i as f64 / n_t as f64)).collect();
    for ks in 0..n_s {
        let s = ks as f64 / n_s as f64;
        for (i, &here) in densities.iter().enumerate() {
            let t = i as f64 / n_t as f64;
            let v = log_excess(m.log_density(t - s), r * s, here);
            cases += 1;
            if v > worst {
                worst = v;
                witness = Some(SubinvWitness {
                    t,
                    s,
                    arc: Arc::new(t, 1.0 / n_t as f64).expect("grid arc"),
                });
            }
        }
    }

    for level in 0..=SUBINVARIANCE_ARC_LEVEL {
        for u in dyadic_partition(level) {
            let base = m.log_measure_arc(&u);
            for ks in 0..n_s {
                let s = ks as f64 / n_s as f64;
                let v = log_excess(m.log_measure_arc(&u.rotate(s)), r * s, base);
                cases += 1;
                if v > worst {
                    worst = v;
                    witness = Some(SubinvWitness {
                        t: u.start().value(),
                        s,
                        arc: u,
                    });
                }
            }
        }
    }

    Ok(SubinvReport {
        satisfied: worst <= tol,
        worst_violation: worst,
        witness: if worst > tol { witness } else { None },
        cases,
    })
}

/// Outcome of [`certify_from_scales`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleCertificate {
    pub passed: bool,
    /// First scale `k` whose hypothesis `m(R_{γ/N^k}(U)) ≤ e^{s/N^k} m(U)`
    /// fails on a probe arc.
    pub failing_scale: Option<u32>,
    /// Whether the iterated bound `m(R_{tγ}(U)) ≤ e^{st} m(U)` held for every
    /// sampled `t`.
    pub conclusion_holds: bool,
    pub worst_violation: f64,
}

/// Checks the scale hypotheses `m(R_{γ/N^k}(U)) ≤ e^{s/N^k} m(U)` for
/// `k = 0..=K` on the probe arcs, then the conclusion
/// `m(R_{tγ}(U)) ≤ e^{st} m(U)` for base-`N` truncated `t ∈ [0, 1]` by walking
/// the chain `R_{γ/N^K}, R_{2γ/N^K}, …` one finest-scale step at a time.
pub fn certify_from_scales(
    m: &CircleMeasure,
    n: u32,
    gamma: f64,
    s: f64,
    k_max: u32,
    probe_arcs: &[Arc],
    tol: f64,
) -> Result<ScaleCertificate, MeasureError> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(MeasureError::InvalidGamma(gamma));
    }
    if n < 2 {
        return Err(CircleError::InvalidCover(n).into());
    }
    if !(s >= 0.0) {
        return Err(MeasureError::NegativeRate(s));
    }
    let nf = f64::from(n);
    let mut worst = 0.0f64;
    let mut failing_scale = None;
    let base_mass: Vec<f64> = probe_arcs.iter().map(|u| m.log_measure_arc(u)).collect();
    for k in 0..=k_max {
        let scale = nf.powi(k as i32);
        for (u, &mu) in probe_arcs.iter().zip(&base_mass) {
            let v = log_excess(m.log_measure_arc(&u.rotate(gamma / scale)), s / scale, mu);
            worst = worst.max(v);
            if v > tol && failing_scale.is_none() {
                failing_scale = Some(k);
            }
        }
    }

    // Walk R_{lγ/N^K}(U), l = 0..N^K, checking each single step.
    let finest = nf.powi(k_max as i32);
    let steps = n.pow(k_max) as usize;
    let mut chain_ok = true;
    let mut chain: Vec<Vec<f64>> = Vec::with_capacity(probe_arcs.len());
    for u in probe_arcs {
        let masses: Vec<f64> = (0..=steps)
            .map(|l| m.log_measure_arc(&u.rotate(l as f64 * gamma / finest)))
            .collect();
        for w in masses.windows(2) {
            let v = log_excess(w[1], s / finest, w[0]);
            worst = worst.max(v);
            chain_ok &= v <= tol;
        }
        chain.push(masses);
    }

    // Sampled t: the chain position K' = Σ a_i N^{K−i} gives t_K ≤ t.
    let samples = 16;
    for i in 0..=samples {
        let t = i as f64 / samples as f64;
        let position = ((t * finest).floor() as usize).min(steps);
        let t_k = position as f64 / finest;
        for (masses, &mu) in chain.iter().zip(&base_mass) {
            let v = log_excess(masses[position], s * t_k, mu);
            worst = worst.max(v);
            chain_ok &= v <= tol;
        }
    }

    Ok(ScaleCertificate {
        passed: failing_scale.is_none() && chain_ok,
        failing_scale,
        conclusion_holds: chain_ok,
        worst_violation: worst,
    })
}

/// Weights `λ^n_j` with `(m(U^n_j))_j = Σ λ^n_j v^n_j`.
pub fn decompose_into_extremes(m: &CircleMeasure, r: f64, n: u32) -> Result<Vec<f64>, MeasureError> {
    if !(r > 0.0) {
        return Err(MeasureError::NonPositiveRate(r));
    }
    let x = cycle::measure_to_vector(m, n);
    Ok(cycle::decompose_subinvariant(&x, n, r)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProbeVerdict {
    /// The tail mass did not exceed that of `m_r`, and `m` agrees with `m_r`
    /// on every `[i/n, (i+1)/n)`.
    ForcedEqual,
    /// `m` puts more mass than `m_r` on `[(n−1)/n, 1)`.
    Exceeds,
}

/// If `m([(n−1)/n, 1)) ≤ m_r([(n−1)/n, 1))`, subinvariance forces `m` and
/// `m_r` to agree on each `[i/n, (i+1)/n)`; a disagreement is reported as an
/// error because it exposes a non-subinvariant input.
pub fn extremality_probe(m: &CircleMeasure, r: f64, n: u32, tol: f64) -> Result<ProbeVerdict, MeasureError> {
    if !(r > 0.0) {
        return Err(MeasureError::NonPositiveRate(r));
    }
    if n == 0 {
        return Err(MeasureError::GridTooSmall);
    }
    let mr = make_mr(r)?;
    let nf = f64::from(n);
    let tail = |mm: &CircleMeasure| mm.mass_interval(f64::from(n - 1) / nf, 1.0);
    if tail(m) > tail(&mr) + tol {
        return Ok(ProbeVerdict::Exceeds);
    }
    for i in 0..n {
        let (lo, hi) = (f64::from(i) / nf, f64::from(i + 1) / nf);
        let (mass, reference) = (m.mass_interval(lo, hi), mr.mass_interval(lo, hi));
        if (mass - reference).abs() > tol {
            return Err(MeasureError::ForcedEqualityViolated {
                n,
                index: i,
                mass,
                reference,
            });
        }
    }
    Ok(ProbeVerdict::ForcedEqual)
}

/// 5-point Gauss–Legendre on `[a, b]`.
fn gauss5<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    const X: [f64; 5] = [
        0.0,
        0.538_469_310_105_683_1,
        -0.538_469_310_105_683_1,
        0.906_179_845_938_664,
        -0.906_179_845_938_664,
    ];
    const W: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
        0.236_926_885_056_189_1,
    ];
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    h * X.iter().zip(W).map(|(x, w)| w * f(c + h * x)).sum::<f64>()
}

/// `∫₀¹ |density₁ − density₂| dt`.
///
/// The integrand is smooth between the union of both measures' breakpoints.
/// Each such interval is cut into panels of width at most `1/panels`; a panel
/// whose endpoint values change sign is split at the root (bisection) before
/// applying Gauss–Legendre, so the kink of `|·|` never sits inside a panel.
pub fn l1_distance(m1: &CircleMeasure, m2: &CircleMeasure, panels: usize) -> Result<f64, MeasureError> {
    if panels < 256 {
        return Err(MeasureError::TooFewPanels { min: 256, got: panels });
    }
    let mut cuts = m1.breakpoints();
    cuts.extend(m2.breakpoints());
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        let t1 = m1.local_terms(lo, hi);
        let t2 = m2.local_terms(lo, hi);
        let g = |t: f64| -> f64 {
            let a: f64 = t1.iter().map(|(c, r)| c * (-r * (t - lo)).exp()).sum();
            let b: f64 = t2.iter().map(|(c, r)| c * (-r * (t - lo)).exp()).sum();
            a - b
        };
        let abs_g = |t: f64| g(t).abs();
        let count = ((hi - lo) * panels as f64).ceil().max(1.0) as usize;
        let h = (hi - lo) / count as f64;
        for p in 0..count {
            let a = lo + p as f64 * h;
            let b = if p + 1 == count { hi } else { a + h };
            let (ga, gb) = (g(a), g(b));
            if ga * gb < 0.0 {
                let (mut x0, mut x1) = (a, b);
                for _ in 0..60 {
                    let mid = 0.5 * (x0 + x1);
                    if g(mid) * ga > 0.0 {
                        x0 = mid;
                    } else {
                        x1 = mid;
                    }
                }
                let root = 0.5 * (x0 + x1);
                total += gauss5(&abs_g, a, root) + gauss5(&abs_g, root, b);
            } else {
                total += gauss5(&abs_g, a, b);
            }
        }
    }
    Ok(total)
}
