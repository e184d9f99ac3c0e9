//! KMS states on the direct limit of Toeplitz algebras.
//!
//! A state is described by its inverse temperature `β` and a tower of circle
//! measures `(m_j)` compatible under pushforward along `p_N`. On a spanning
//! element at level `j` it evaluates as
//!
//! ```text
//! φ(s^a i(f) s*^b) = δ_{ab} e^{−aβ/N^j} ∫ f dm_j
//! ```
//!
//! The extreme states at `β > 0` are indexed by points `(s_j)` of the
//! solenoid, with `m_j = m_{r_j} ∘ R_{s_j}` and `r_j = β/(N^j θ_j)`; at
//! `β = 0` the only state is the Lebesgue tower.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circle::{circle_distance, cover, dyadic_partition, Arc, CirclePoint, TrigPoly, DEFAULT_DEGREE_CAP};
use crate::measures::{
    certify_from_scales, check_subinvariance, lebesgue, make_mr, CircleMeasure, MeasureError, ScaleCertificate,
    SubinvReport,
};
use crate::toeplitz::{next_theta, AlgebraLevel, ToeplitzElement, ToeplitzError};

/// Tolerance for "the state vanishes on the gap projection".
pub const FACTOR_TOL: f64 = 1e-10;

/// Dyadic depth used for tower compatibility checks.
pub const TOWER_ARC_LEVEL: u32 = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KmsError {
    #[error("there are no KMS states at negative inverse temperature (beta = {0})")]
    NoKmsStates(f64),
    #[error("theta = 0 is the degenerate commutative case and is not supported")]
    Degenerate,
    #[error("theta0 must lie in (0, 1), got {0}")]
    InvalidAngle(f64),
    #[error("cover degree must be at least 2, got {0}")]
    InvalidCover(u32),
    #[error("depth must be positive")]
    InvalidDepth,
    #[error("at beta = 0 the only state is the trace; use trace_state")]
    UseTraceState,
    #[error("the trace state requires beta = 0, got {0}")]
    NotTraceRegime(f64),
    #[error("level {level} exceeds the tower depth {depth}")]
    LevelOutOfRange { level: u32, depth: u32 },
    #[error("element level does not match the state's angle sequence at level {0}")]
    LevelMismatch(u32),
    #[error("solenoid coordinates are inconsistent at index {index}: N*s_{{j+1}} = {expected}, s_j = {got}")]
    IncompatibleSolenoid { index: usize, expected: f64, got: f64 },
    #[error("angle sequence breaks N^2 theta_{{j+1}} = theta_j at index {index} (so r_{{j+1}} != N r_j)")]
    NotCanonicalLift { index: usize },
    #[error("solenoid point has {got} coordinates, expected {expected}")]
    WrongLength { expected: usize, got: usize },
    #[error("convex weights must be nonnegative, sum to 1 and match the states")]
    WeightMismatch,
    #[error("states use different angle sequences")]
    ThetaMismatch,
    #[error("tower is not a valid KMS tower: {0}")]
    InvalidTower(String),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Toeplitz(#[from] ToeplitzError),
}

/// Angles `θ_j = θ_0/N^{2j}` and rates `r_j = β/(N^j θ_j)` for `0 ≤ j ≤ J`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaSeq {
    cover: u32,
    beta: f64,
    thetas: Vec<f64>,
    rates: Vec<f64>,
    degree_cap: usize,
}

impl ThetaSeq {
    pub fn new(n: u32, theta0: f64, depth: u32, beta: f64) -> Result<Self, KmsError> {
        validate_common(n, beta)?;
        if theta0 == 0.0 {
            return Err(KmsError::Degenerate);
        }
        if !(theta0 > 0.0 && theta0 < 1.0) {
            return Err(KmsError::InvalidAngle(theta0));
        }
        if depth == 0 {
            return Err(KmsError::InvalidDepth);
        }
        let mut thetas = vec![theta0];
        for _ in 0..depth {
            let last = *thetas.last().expect("nonempty");
            thetas.push(next_theta(last, n));
        }
        Ok(ThetaSeq::assemble(n, beta, thetas))
    }

    /// Accepts an explicit angle sequence, rejecting any that is not the
    /// canonical real lift (relative tolerance `1e-12`).
    pub fn from_angles(n: u32, thetas: Vec<f64>, beta: f64) -> Result<Self, KmsError> {
        validate_common(n, beta)?;
        if thetas.len() < 2 {
            return Err(KmsError::InvalidDepth);
        }
        if thetas.contains(&0.0) {
            return Err(KmsError::Degenerate);
        }
        if let Some(&bad) = thetas.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
            return Err(KmsError::InvalidAngle(bad));
        }
        let n2 = f64::from(n * n);
        for (index, w) in thetas.windows(2).enumerate() {
            if (n2 * w[1] - w[0]).abs() > 1e-12 * w[0] {
                return Err(KmsError::NotCanonicalLift { index });
            }
        }
        Ok(ThetaSeq::assemble(n, beta, thetas))
    }

    fn assemble(n: u32, beta: f64, thetas: Vec<f64>) -> Self {
        let mut rates = vec![beta / thetas[0]];
        for _ in 1..thetas.len() {
            let last = *rates.last().expect("nonempty");
            rates.push(f64::from(n) * last);
        }
        ThetaSeq {
            cover: n,
            beta,
            thetas,
            rates,
            degree_cap: DEFAULT_DEGREE_CAP,
        }
    }

    pub fn with_degree_cap(mut self, cap: usize) -> Self {
        self.degree_cap = cap;
        self
    }

    pub fn cover(&self) -> u32 {
        self.cover
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn depth(&self) -> u32 {
        (self.thetas.len() - 1) as u32
    }

    pub fn theta(&self, j: u32) -> f64 {
        self.thetas[j as usize]
    }

    pub fn rate(&self, j: u32) -> f64 {
        self.rates[j as usize]
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    /// `N^j`.
    pub fn scale(&self, j: u32) -> f64 {
        f64::from(self.cover).powi(j as i32)
    }

    /// The algebra at level `j`.
    pub fn level(&self, j: u32) -> Result<AlgebraLevel, KmsError> {
        self.check_level(j)?;
        Ok(AlgebraLevel {
            index: j,
            theta: self.theta(j),
            cover: self.cover,
            degree_cap: self.degree_cap,
        })
    }

    fn check_level(&self, j: u32) -> Result<(), KmsError> {
        if j > self.depth() {
            return Err(KmsError::LevelOutOfRange {
                level: j,
                depth: self.depth(),
            });
        }
        Ok(())
    }

    /// The same angles at another inverse temperature.
    pub fn with_beta(&self, beta: f64) -> Result<Self, KmsError> {
        validate_common(self.cover, beta)?;
        Ok(ThetaSeq::assemble(self.cover, beta, self.thetas.clone()).with_degree_cap(self.degree_cap))
    }
}

fn validate_common(n: u32, beta: f64) -> Result<(), KmsError> {
    if n < 2 {
        return Err(KmsError::InvalidCover(n));
    }
    if beta < 0.0 || !beta.is_finite() {
        return Err(KmsError::NoKmsStates(beta));
    }
    Ok(())
}

pub fn make_theta_seq(n: u32, theta0: f64, depth: u32, beta: f64) -> Result<ThetaSeq, KmsError> {
    ThetaSeq::new(n, theta0, depth, beta)
}

/// The value `1 − e^{−β/N^j}` that the KMS formula assigns to the gap
/// projection at level `j`. For `β < 0` it is negative, which no state can
/// produce on a projection.
pub fn gap_formula_value(beta: f64, n: u32, j: u32) -> f64 {
    -(-beta / f64::from(n).powi(j as i32)).exp_m1()
}

/// Coordinates `(s_0, …, s_J)` with `s_j = N s_{j+1} mod 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolenoidPoint {
    coords: Vec<CirclePoint>,
}

impl SolenoidPoint {
    /// Validates `s_j = N s_{j+1}` to within `1e-12` on the circle.
    pub fn new(coords: Vec<f64>, n: u32) -> Result<Self, KmsError> {
        let coords: Vec<CirclePoint> = coords.into_iter().map(CirclePoint::new).collect();
        for (index, w) in coords.windows(2).enumerate() {
            let expected = cover(w[1], n).map_err(|_| KmsError::InvalidCover(n))?;
            if circle_distance(expected.value(), w[0].value()) > 1e-12 {
                return Err(KmsError::IncompatibleSolenoid {
                    index,
                    expected: expected.value(),
                    got: w[0].value(),
                });
            }
        }
        Ok(SolenoidPoint { coords })
    }

    /// The point whose deepest coordinate is `top`; shallower coordinates
    /// follow by applying the cover.
    pub fn from_top(top: f64, n: u32, depth: u32) -> Result<Self, KmsError> {
        let mut coords = vec![CirclePoint::new(top)];
        for _ in 0..depth {
            let next = cover(coords[0], n).map_err(|_| KmsError::InvalidCover(n))?;
            coords.insert(0, next);
        }
        Ok(SolenoidPoint { coords })
    }

    pub fn zero(depth: u32) -> Self {
        SolenoidPoint {
            coords: vec![CirclePoint::ZERO; depth as usize + 1],
        }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, n: u32, depth: u32) -> Self {
        SolenoidPoint::from_top(rng.gen_range(0.0..1.0), n, depth).expect("cover degree checked by caller")
    }

    pub fn coords(&self) -> &[CirclePoint] {
        &self.coords
    }

    pub fn coord(&self, j: u32) -> f64 {
        self.coords[j as usize].value()
    }

    /// Coordinatewise difference `p ⊖ q`.
    pub fn sub(&self, other: &SolenoidPoint) -> SolenoidPoint {
        SolenoidPoint {
            coords: self.coords.iter().zip(&other.coords).map(|(a, b)| a.sub(*b)).collect(),
        }
    }

    fn check_depth(&self, theta: &ThetaSeq) -> Result<(), KmsError> {
        let expected = theta.depth() as usize + 1;
        if self.coords.len() != expected {
            return Err(KmsError::WrongLength {
                expected,
                got: self.coords.len(),
            });
        }
        Ok(())
    }
}

/// Levelwise measures `m_0, …, m_J` for an angle sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureTower {
    measures: Vec<CircleMeasure>,
    theta: ThetaSeq,
}

impl MeasureTower {
    /// A tower without validation; see [`MeasureTower::validate`].
    pub fn new_unchecked(measures: Vec<CircleMeasure>, theta: ThetaSeq) -> Result<Self, KmsError> {
        if measures.len() != theta.depth() as usize + 1 {
            return Err(KmsError::InvalidTower(format!(
                "{} measures for depth {}",
                measures.len(),
                theta.depth()
            )));
        }
        Ok(MeasureTower { measures, theta })
    }

    pub fn measures(&self) -> &[CircleMeasure] {
        &self.measures
    }

    pub fn measure(&self, j: u32) -> &CircleMeasure {
        &self.measures[j as usize]
    }

    pub fn theta(&self) -> &ThetaSeq {
        &self.theta
    }

    /// Largest `|(m_{j+1} ∘ p_N^{-1})(U) − m_j(U)|` over dyadic arcs `U` up to
    /// level 8 and all `j < J`.
    pub fn compatibility_error(&self) -> Result<f64, KmsError> {
        let arcs: Vec<Arc> = (0..=TOWER_ARC_LEVEL).flat_map(dyadic_partition).collect();
        let mut worst = 0.0f64;
        for w in self.measures.windows(2) {
            let pushed = w[1].pushforward(self.theta.cover())?;
            for u in &arcs {
                worst = worst.max((pushed.measure_arc(u) - w[0].measure_arc(u)).abs());
            }
        }
        Ok(worst)
    }

    /// Subinvariance of each `m_j` at rate `r_j`.
    pub fn subinvariance(&self, grid: (usize, usize), tol: f64) -> Result<Vec<SubinvReport>, KmsError> {
        self.measures
            .iter()
            .enumerate()
            .map(|(j, m)| Ok(check_subinvariance(m, self.theta.rate(j as u32), grid, tol)?))
            .collect()
    }

    /// Runs the scale-hypothesis certificate on every level with angle `θ_j`
    /// and exponent `β/N^j`.
    pub fn certify(&self, k_max: u32, probes: &[Arc], tol: f64) -> Result<Vec<ScaleCertificate>, KmsError> {
        let th = &self.theta;
        (0..=th.depth())
            .map(|j| {
                Ok(certify_from_scales(
                    self.measure(j),
                    th.cover(),
                    th.theta(j),
                    th.beta() / th.scale(j),
                    k_max,
                    probes,
                    tol,
                )?)
            })
            .collect()
    }
}

/// A state given by its measure tower.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmsState {
    tower: MeasureTower,
}

impl KmsState {
    /// Wraps a tower without checking compatibility or subinvariance. Used
    /// for deliberately invalid towers in the positivity tests.
    pub fn from_tower_unchecked(tower: MeasureTower) -> Self {
        KmsState { tower }
    }

    /// Wraps a tower after checking compatibility (`1e-10`) and
    /// subinvariance of every level.
    pub fn from_tower(tower: MeasureTower) -> Result<Self, KmsError> {
        let err = tower.compatibility_error()?;
        if err > 1e-10 {
            return Err(KmsError::InvalidTower(format!("pushforward mismatch {err:e}")));
        }
        for (j, rep) in tower.subinvariance((64, 32), 1e-9)?.iter().enumerate() {
            if !rep.satisfied {
                return Err(KmsError::InvalidTower(format!(
                    "level {j} is not subinvariant (violation {:e})",
                    rep.worst_violation
                )));
            }
        }
        Ok(KmsState { tower })
    }

    pub fn tower(&self) -> &MeasureTower {
        &self.tower
    }

    pub fn theta(&self) -> &ThetaSeq {
        &self.tower.theta
    }

    pub fn beta(&self) -> f64 {
        self.tower.theta.beta()
    }

    pub fn evaluate(&self, x: &ToeplitzElement) -> Result<Complex64, KmsError> {
        evaluate(self, x)
    }
}

/// The extreme state with tower `m_j = m_{r_j} ∘ R_{s_j}`.
pub fn extreme_state_from_solenoid(p: &SolenoidPoint, theta: &ThetaSeq) -> Result<KmsState, KmsError> {
    if theta.beta() == 0.0 {
        return Err(KmsError::UseTraceState);
    }
    p.check_depth(theta)?;
    let measures = (0..=theta.depth())
        .map(|j| Ok(make_mr(theta.rate(j))?.rotate(p.coord(j))))
        .collect::<Result<Vec<_>, KmsError>>()?;
    Ok(KmsState {
        tower: MeasureTower::new_unchecked(measures, theta.clone())?,
    })
}

/// `Σ w_i φ_i`, computed levelwise on the towers.
pub fn convex_state(weights: &[f64], states: &[KmsState]) -> Result<KmsState, KmsError> {
    if weights.len() != states.len() || states.is_empty() {
        return Err(KmsError::WeightMismatch);
    }
    let theta = states[0].theta();
    if states.iter().any(|s| s.theta() != theta) {
        return Err(KmsError::ThetaMismatch);
    }
    let measures = (0..=theta.depth())
        .map(|j| {
            let level: Vec<CircleMeasure> = states.iter().map(|s| s.tower.measure(j).clone()).collect();
            CircleMeasure::convex_combination(weights, &level).map_err(|_| KmsError::WeightMismatch)
        })
        .collect::<Result<Vec<_>, KmsError>>()?;
    Ok(KmsState {
        tower: MeasureTower::new_unchecked(measures, theta.clone())?,
    })
}

/// The unique state at `β = 0`: Lebesgue measure at every level.
pub fn trace_state(theta: &ThetaSeq) -> Result<KmsState, KmsError> {
    if theta.beta() != 0.0 {
        return Err(KmsError::NotTraceRegime(theta.beta()));
    }
    let measures = vec![lebesgue(); theta.depth() as usize + 1];
    Ok(KmsState {
        tower: MeasureTower::new_unchecked(measures, theta.clone())?,
    })
}

/// A tower whose densities increase like `e^{+r_j t}` (the reflection of the
/// extreme tower at the origin). It is pushforward-compatible but violates
/// subinvariance at every level, so the functional it defines is not positive.
pub fn reversed_density_state(theta: &ThetaSeq) -> Result<KmsState, KmsError> {
    let measures = (0..=theta.depth())
        .map(|j| Ok(make_mr(theta.rate(j))?.reflect()))
        .collect::<Result<Vec<_>, KmsError>>()?;
    Ok(KmsState::from_tower_unchecked(MeasureTower::new_unchecked(
        measures,
        theta.clone(),
    )?))
}

/// `Σ_{a} e^{−aβ/N^j} ∫ f_{aa} dm_j` over the diagonal terms of `x`.
pub fn evaluate(phi: &KmsState, x: &ToeplitzElement) -> Result<Complex64, KmsError> {
    let level = x.level();
    let theta = phi.theta();
    let j = level.index;
    theta.check_level(j)?;
    if level.cover != theta.cover() || level.theta != theta.theta(j) {
        return Err(KmsError::LevelMismatch(j));
    }
    let m = phi.tower.measure(j);
    let scale = theta.scale(j);
    let mut total = Complex64::new(0.0, 0.0);
    for (a, b, f) in x.terms() {
        if a != b {
            continue;
        }
        let weight = (-f64::from(a) * theta.beta() / scale).exp();
        if weight != 0.0 {
            total += m.integrate_trig(f) * weight;
        }
    }
    Ok(total)
}

/// `|φ(xy) − φ(y α_{iβ}(x))|`.
pub fn verify_kms_identity(phi: &KmsState, x: &ToeplitzElement, y: &ToeplitzElement) -> Result<f64, KmsError> {
    let lhs = evaluate(phi, &x.mul(y)?)?;
    let rhs = evaluate(phi, &y.mul(&x.apply_dynamics_imaginary(phi.beta()))?)?;
    Ok((lhs - rhs).norm())
}

/// `|φ(xy) − φ(yx)|`, the trace defect.
pub fn trace_defect(phi: &KmsState, x: &ToeplitzElement, y: &ToeplitzElement) -> Result<f64, KmsError> {
    let lhs = evaluate(phi, &x.mul(y)?)?;
    let rhs = evaluate(phi, &y.mul(x)?)?;
    Ok((lhs - rhs).norm())
}

/// `φ(x (1 − s s*) x*)`, real part. Nonnegative for every genuine state.
pub fn verify_positivity_gap(phi: &KmsState, x: &ToeplitzElement) -> Result<f64, KmsError> {
    let gap = ToeplitzElement::gap(*x.level());
    let y = x.mul(&gap)?.mul(&x.adjoint())?;
    Ok(evaluate(phi, &y)?.re)
}

/// A function `f` for which `φ(i(f)(1 − ss*)i(f)*) < −tol`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositivityWitness {
    pub level: u32,
    pub center: f64,
    pub degree: u32,
    pub value: f64,
}

/// Scans `f(t) = Σ_{k=0}^{d} e^{2πik(t−c)}` over centres `c` on a grid of
/// `centers` points and every level, returning the most negative value of
/// [`verify_positivity_gap`] at `x = i(f)` if it is below `−tol`.
pub fn find_positivity_witness(
    phi: &KmsState,
    degree: u32,
    centers: usize,
    tol: f64,
) -> Result<Option<PositivityWitness>, KmsError> {
    let theta = phi.theta();
    let mut best: Option<PositivityWitness> = None;
    for j in 0..=theta.depth() {
        let level = theta.level(j)?;
        for i in 0..centers {
            let center = i as f64 / centers as f64;
            let f = TrigPoly::from_terms(
                (0..=i64::from(degree)).map(|k| (k, crate::circle::unit_phase(-(k as f64) * center))),
            );
            let x = ToeplitzElement::function(level, f)?;
            let value = verify_positivity_gap(phi, &x)?;
            if value < -tol && best.as_ref().is_none_or(|b| value < b.value) {
                best = Some(PositivityWitness {
                    level: j,
                    center,
                    degree,
                    value,
                });
            }
        }
    }
    Ok(best)
}

/// Values `φ(1 − s s*)` at each level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorTest {
    pub factors: bool,
    pub gap_values: Vec<f64>,
}

/// Whether `φ` vanishes on the gap projection at every level, i.e. factors
/// through the quotient by the ideal it generates.
pub fn factors_through_solenoid(phi: &KmsState) -> Result<FactorTest, KmsError> {
    let theta = phi.theta();
    let gap_values = (0..=theta.depth())
        .map(|j| Ok(evaluate(phi, &ToeplitzElement::gap(theta.level(j)?))?.re))
        .collect::<Result<Vec<f64>, KmsError>>()?;
    Ok(FactorTest {
        factors: gap_values.iter().all(|v| v.abs() <= FACTOR_TOL),
        gap_values,
    })
}

/// `|φ(α_t(x)) − φ(x)|`.
pub fn verify_state_invariance(phi: &KmsState, x: &ToeplitzElement, t: f64) -> Result<f64, KmsError> {
    Ok((evaluate(phi, &x.apply_dynamics(t))? - evaluate(phi, x)?).norm())
}

/// `|φ_p(λ_q(x)) − φ_{p ⊖ q}(x)|` for the extreme states `φ_p`.
pub fn verify_solenoid_equivariance(
    p: &SolenoidPoint,
    q: &SolenoidPoint,
    x: &ToeplitzElement,
    theta: &ThetaSeq,
) -> Result<f64, KmsError> {
    let j = x.level().index;
    theta.check_level(j)?;
    q.check_depth(theta)?;
    let lhs = evaluate(&extreme_state_from_solenoid(p, theta)?, &x.solenoid_act(q.coord(j)))?;
    let rhs = evaluate(&extreme_state_from_solenoid(&p.sub(q), theta)?, x)?;
    Ok((lhs - rhs).norm())
}

/// A level `j` at which `x = i(e^{2πit})` separates `φ_p ∘ λ_q` from `φ_p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreenessWitness {
    pub level: u32,
    pub difference: f64,
}

/// Looks for a level where `|φ_p(λ_q(i(e^{2πit}))) − φ_p(i(e^{2πit}))| ≥ tol`,
/// returning the level with the largest difference.
pub fn freeness_witness(
    p: &SolenoidPoint,
    q: &SolenoidPoint,
    theta: &ThetaSeq,
    tol: f64,
) -> Result<Option<FreenessWitness>, KmsError> {
    let phi = extreme_state_from_solenoid(p, theta)?;
    let mut best: Option<FreenessWitness> = None;
    for j in 0..=theta.depth() {
        let x = ToeplitzElement::function(theta.level(j)?, TrigPoly::monomial(1, Complex64::new(1.0, 0.0)))?;
        let difference = (evaluate(&phi, &x.solenoid_act(q.coord(j)))? - evaluate(&phi, &x)?).norm();
        if difference >= tol && best.as_ref().is_none_or(|b| difference > b.difference) {
            best = Some(FreenessWitness { level: j, difference });
        }
    }
    Ok(best)
}
