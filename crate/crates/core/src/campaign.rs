//! Seeded verification campaigns.
//!
//! Each suite runs a batch of independent cases (in parallel where it pays),
//! folds the per-case residuals in case order, and returns a [`SuiteReport`].
//! Reports depend only on the inputs and the seed; `wall_time_ms` is the only
//! field that varies between runs.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::circle::{circle_distance, dyadic_partition, Arc};
use crate::cycle::{self, CycleError};
use crate::kms::{
    convex_state, evaluate, extreme_state_from_solenoid, factors_through_solenoid, find_positivity_witness,
    freeness_witness, gap_formula_value, make_theta_seq, reversed_density_state, trace_defect, trace_state,
    verify_kms_identity, verify_positivity_gap, verify_solenoid_equivariance, verify_state_invariance, KmsError,
    KmsState, SolenoidPoint, ThetaSeq,
};
use crate::measures::{
    check_subinvariance, l1_distance, lebesgue, make_mnr, make_mr, CircleMeasure, ExpPiece, SUBINVARIANCE_TOL,
};
use crate::toeplitz::{random_element, ToeplitzElement};

/// At most this many witnesses are attached to a report.
pub const MAX_WITNESSES: usize = 5;

/// Result of one suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub test: String,
    pub parameters: Value,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub cases: usize,
    pub witnesses: Vec<Value>,
    pub wall_time_ms: u64,
}

/// One evaluated case: its residual and a description used as a witness.
struct Case {
    residual: f64,
    detail: Value,
}

impl Case {
    fn new(residual: f64, detail: Value) -> Self {
        Case { residual, detail }
    }

    fn failed(detail: Value) -> Self {
        Case {
            residual: f64::INFINITY,
            detail,
        }
    }
}

fn from_result(result: Result<Case, KmsError>, detail: impl FnOnce() -> Value) -> Case {
    match result {
        Ok(c) => c,
        Err(e) => {
            let mut d = detail();
            d["error"] = json!(e.to_string());
            Case::failed(d)
        }
    }
}

/// Folds cases in order. `pass` requires at least one case and
/// `max_residual ≤ tolerance`; failing reports always carry a witness.
fn assemble(test: &str, parameters: Value, tolerance: f64, cases: Vec<Case>, started: Instant) -> SuiteReport {
    let count = cases.len();
    let max_residual =
        cases.iter().map(|c| c.residual).fold(
            0.0f64,
            |a, b| {
                if b.is_nan() || a.is_nan() {
                    f64::NAN
                } else {
                    a.max(b)
                }
            },
        );
    let pass = count > 0 && max_residual <= tolerance;
    let mut failing: Vec<&Case> = cases.iter().filter(|c| !(c.residual <= tolerance)).collect();
    failing.sort_by(|a, b| b.residual.total_cmp(&a.residual));
    let mut witnesses: Vec<Value> = failing
        .iter()
        .take(MAX_WITNESSES)
        .map(|c| {
            let mut d = c.detail.clone();
            d["residual"] = finite_or_string(c.residual);
            d
        })
        .collect();
    if count == 0 {
        witnesses.push(json!({"reason": "no cases executed"}));
    }
    SuiteReport {
        test: test.to_string(),
        parameters,
        max_residual: if max_residual.is_finite() {
            max_residual
        } else {
            f64::MAX
        },
        tolerance,
        pass,
        cases: count,
        witnesses,
        wall_time_ms: started.elapsed().as_millis() as u64,
    }
}

fn finite_or_string(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(x.to_string())
    }
}

/// A per-case generator: independent of thread scheduling.
pub fn case_rng(seed: u64, stream: u64, case: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ case.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(stream);
    rng
}

mod stream {
    pub const STATES: u64 = 1;
    pub const KMS: u64 = 2;
    pub const POSITIVITY: u64 = 3;
    pub const EMBEDDING: u64 = 4;
    pub const EQUIVARIANCE: u64 = 5;
    pub const FREENESS: u64 = 6;
    pub const TRACE: u64 = 7;
    pub const CYCLE: u64 = 8;
    pub const PUSHFORWARD: u64 = 9;
    pub const OMEGA_ZERO: u64 = 10;
}

/// Parameters of a KMS campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub cover: u32,
    pub theta0: f64,
    pub beta: f64,
    pub depth: u32,
    pub samples: usize,
    pub states: usize,
    pub seed: u64,
}

impl CampaignConfig {
    pub fn theta(&self) -> Result<ThetaSeq, KmsError> {
        make_theta_seq(self.cover, self.theta0, self.depth, self.beta)
    }

    fn parameters(&self) -> Value {
        json!({
            "N": self.cover,
            "theta0": self.theta0,
            "beta": self.beta,
            "depth": self.depth,
            "samples": self.samples,
            "states": self.states,
            "seed": self.seed,
        })
    }
}

/// `count` seeded states: alternating extreme states and convex combinations
/// of two or three extreme states. At `β = 0` every state is the trace.
pub fn random_states(theta: &ThetaSeq, count: usize, seed: u64) -> Result<Vec<KmsState>, KmsError> {
    (0..count)
        .map(|i| {
            if theta.beta() == 0.0 {
                return trace_state(theta);
            }
            let mut rng = case_rng(seed, stream::STATES, i as u64);
            let (n, depth) = (theta.cover(), theta.depth());
            if i % 2 == 0 {
                extreme_state_from_solenoid(&SolenoidPoint::random(&mut rng, n, depth), theta)
            } else {
                let parts = rng.gen_range(2..=3);
                let raw: Vec<f64> = (0..parts).map(|_| rng.gen_range(0.05..1.0)).collect();
                let total: f64 = raw.iter().sum();
                let mut weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
                let head: f64 = weights[..parts - 1].iter().sum();
                weights[parts - 1] = 1.0 - head;
                let states = (0..parts)
                    .map(|_| extreme_state_from_solenoid(&SolenoidPoint::random(&mut rng, n, depth), theta))
                    .collect::<Result<Vec<_>, _>>()?;
                convex_state(&weights, &states)
            }
        })
        .collect()
}

fn random_pair_element(rng: &mut ChaCha8Rng, theta: &ThetaSeq, max_level: u32) -> Result<ToeplitzElement, KmsError> {
    let level = theta.level(rng.gen_range(0..=max_level))?;
    let terms = rng.gen_range(1..=3);
    Ok(random_element(rng, level, terms, 2, 2))
}

/// `|φ(xy) − φ(y α_{iβ}(x))|` over `samples` random pairs and every state.
pub fn kms_identity_suite(cfg: &CampaignConfig, states: &[KmsState], tol: f64) -> SuiteReport {
    let started = Instant::now();
    let cases = pair_cases(cfg, states, stream::KMS, |phi, x, y, _| verify_kms_identity(phi, x, y));
    assemble("kms_identity", cfg.parameters(), tol, cases, started)
}

/// `|φ(α_t(x)) − φ(x)|` for `t ∈ [0, 10]`.
pub fn state_invariance_suite(cfg: &CampaignConfig, states: &[KmsState], tol: f64) -> SuiteReport {
    let started = Instant::now();
    let cases = pair_cases(cfg, states, stream::KMS ^ 0x100, |phi, x, _, t| {
        verify_state_invariance(phi, x, t)
    });
    assemble("state_invariance", cfg.parameters(), tol, cases, started)
}

fn pair_cases<F>(cfg: &CampaignConfig, states: &[KmsState], stream: u64, check: F) -> Vec<Case>
where
    F: Fn(&KmsState, &ToeplitzElement, &ToeplitzElement, f64) -> Result<f64, KmsError> + Sync,
{
    let Ok(theta) = cfg.theta() else {
        return Vec::new();
    };
    (0..cfg.samples)
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut rng = case_rng(cfg.seed, stream, i as u64);
            let pair = random_pair_element(&mut rng, &theta, theta.depth()).map(|x| {
                let level = *x.level();
                let terms = rng.gen_range(1..=3);
                (x, random_element(&mut rng, level, terms, 2, 2))
            });
            let t = rng.gen_range(0.0..10.0);
            let cases: Vec<Case> = match pair {
                Ok((x, y)) => states
                    .iter()
                    .enumerate()
                    .map(|(k, phi)| {
                        let detail = || json!({"case": i, "state": k, "x": x.to_string(), "y": y.to_string(), "t": t});
                        from_result(check(phi, &x, &y, t).map(|r| Case::new(r, detail())), detail)
                    })
                    .collect(),
                Err(e) => vec![Case::failed(json!({"case": i, "error": e.to_string()}))],
            };
            cases
        })
        .collect()
}

/// `φ(x(1 − ss*)x*) ≥ −tol` for `samples` random `x` per state; the residual
/// is `max(0, −value)`.
pub fn positivity_suite(cfg: &CampaignConfig, states: &[KmsState], tol: f64) -> SuiteReport {
    let started = Instant::now();
    let Ok(theta) = cfg.theta() else {
        return assemble("positivity_gap", cfg.parameters(), tol, Vec::new(), started);
    };
    let cases: Vec<Case> = (0..cfg.samples)
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut rng = case_rng(cfg.seed, stream::POSITIVITY, i as u64);
            let x = random_pair_element(&mut rng, &theta, theta.depth());
            match x {
                Ok(x) => states
                    .iter()
                    .enumerate()
                    .map(|(k, phi)| {
                        let detail = || json!({"case": i, "state": k, "x": x.to_string()});
                        from_result(
                            verify_positivity_gap(phi, &x).map(|v| Case::new((-v).max(0.0), detail())),
                            detail,
                        )
                    })
                    .collect::<Vec<_>>(),
                Err(e) => vec![Case::failed(json!({"case": i, "error": e.to_string()}))],
            }
        })
        .collect();
    assemble("positivity_gap", cfg.parameters(), tol, cases, started)
}

/// The reversed-density tower must produce a negative gap value for some
/// `x = i(f)` with `deg f ≤ 4`. The single case has residual
/// `max(0, best + tol)`, so it passes exactly when a witness below `−tol` is
/// found.
pub fn reversed_tower_suite(cfg: &CampaignConfig, tol: f64) -> SuiteReport {
    let started = Instant::now();
    let params = cfg.parameters();
    let case = cfg
        .theta()
        .and_then(|theta| reversed_density_state(&theta))
        .and_then(|phi| find_positivity_witness(&phi, 4, 64, tol));
    let cases = match case {
        Ok(Some(w)) => vec![Case::new(
            (w.value + tol).max(0.0),
            json!({"level": w.level, "center": w.center, "degree": w.degree, "value": w.value}),
        )],
        Ok(None) => vec![Case::new(1.0, json!({"reason": "no negative value found"}))],
        Err(e) => vec![Case::failed(json!({"error": e.to_string()}))],
    };
    let mut report = assemble("reversed_tower_detected", params, 0.0, cases, started);
    // the witness is the point of this suite, so keep it even on success
    if report.pass {
        if let Ok(Ok(Some(w))) = cfg
            .theta()
            .map(|t| reversed_density_state(&t).and_then(|phi| find_positivity_witness(&phi, 4, 64, tol)))
        {
            report.witnesses =
                vec![json!({"level": w.level, "center": w.center, "degree": w.degree, "value": w.value})];
        }
    }
    report
}

/// `|φ(embed^k(x)) − φ(x)|` for `k = 1..=3` and `x` at levels `≤ J − k`.
pub fn embedding_suite(cfg: &CampaignConfig, states: &[KmsState], tol: f64) -> SuiteReport {
    let started = Instant::now();
    let Ok(theta) = cfg.theta() else {
        return assemble("embedding_consistency", cfg.parameters(), tol, Vec::new(), started);
    };
    let max_k = theta.depth().min(3);
    let cases: Vec<Case> = (0..cfg.samples)
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut rng = case_rng(cfg.seed, stream::EMBEDDING, i as u64);
            let k = rng.gen_range(1..=max_k);
            let x = random_pair_element(&mut rng, &theta, theta.depth() - k);
            let prepared = x.and_then(|x| {
                let up = x.embed_times(k)?;
                Ok((x, up))
            });
            match prepared {
                Ok((x, up)) => states
                    .iter()
                    .enumerate()
                    .map(|(s, phi)| {
                        let detail = || json!({"case": i, "state": s, "k": k, "x": x.to_string()});
                        let r = evaluate(phi, &up).and_then(|a| Ok((a - evaluate(phi, &x)?).norm()));
                        from_result(r.map(|r| Case::new(r, detail())), detail)
                    })
                    .collect::<Vec<_>>(),
                Err(e) => vec![Case::failed(json!({"case": i, "k": k, "error": e.to_string()}))],
            }
        })
        .collect();
    assemble("embedding_consistency", cfg.parameters(), tol, cases, started)
}

/// Pushforward compatibility of every state's tower on dyadic arcs to level 8.
pub fn tower_suite(cfg: &CampaignConfig, states: &[KmsState], tol: f64) -> SuiteReport {
    let started = Instant::now();
    let cases: Vec<Case> = states
        .par_iter()
        .enumerate()
        .map(|(k, phi)| {
            let detail = || json!({"state": k});
            from_result(
                phi.tower().compatibility_error().map(|e| Case::new(e, detail())),
                detail,
            )
        })
        .collect();
    assemble("tower_compatibility", cfg.parameters(), tol, cases, started)
}

/// The scale-hypothesis certificate with `K = 6` on every level of every
/// state; residual is the number of failing levels.
pub fn certificate_suite(cfg: &CampaignConfig, states: &[KmsState], tol: f64) -> SuiteReport {
    let started = Instant::now();
    let probes = dyadic_partition(4);
    let cases: Vec<Case> = states
        .par_iter()
        .enumerate()
        .map(|(k, phi)| match phi.tower().certify(6, &probes, tol) {
            Ok(certs) => {
                let failing: Vec<usize> = certs
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| !c.passed)
                    .map(|(j, _)| j)
                    .collect();
                let worst = certs.iter().map(|c| c.worst_violation).fold(0.0, f64::max);
                Case::new(
                    failing.len() as f64,
                    json!({"state": k, "failing_levels": failing, "worst_violation": worst}),
                )
            }
            Err(e) => Case::failed(json!({"state": k, "error": e.to_string()})),
        })
        .collect();
    let mut params = cfg.parameters();
    params["K"] = json!(6);
    params["probe_level"] = json!(4);
    params["violation_tol"] = json!(tol);
    assemble("scale_certificate", params, 0.0, cases, started)
}

/// `|φ_p(λ_q(x)) − φ_{p⊖q}(x)|` over `samples` random triples.
pub fn equivariance_suite(cfg: &CampaignConfig, tol: f64) -> SuiteReport {
    let started = Instant::now();
    let Ok(theta) = cfg.theta() else {
        return assemble("solenoid_equivariance", cfg.parameters(), tol, Vec::new(), started);
    };
    let cases: Vec<Case> = (0..cfg.samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = case_rng(cfg.seed, stream::EQUIVARIANCE, i as u64);
            let p = SolenoidPoint::random(&mut rng, theta.cover(), theta.depth());
            let q = SolenoidPoint::random(&mut rng, theta.cover(), theta.depth());
            let detail =
                |x: &str| json!({"case": i, "p_top": p.coord(theta.depth()), "q_top": q.coord(theta.depth()), "x": x});
            match random_pair_element(&mut rng, &theta, theta.depth()) {
                Ok(x) => from_result(
                    verify_solenoid_equivariance(&p, &q, &x, &theta).map(|r| Case::new(r, detail(&x.to_string()))),
                    || detail(&x.to_string()),
                ),
                Err(e) => Case::failed(json!({"case": i, "error": e.to_string()})),
            }
        })
        .collect();
    assemble("solenoid_equivariance", cfg.parameters(), tol, cases, started)
}

/// For `count` random `q` with every coordinate at least `1e-3` from 0, a
/// level where `i(e^{2πit})` separates `φ_p ∘ λ_q` from `φ_p` by `≥ 1e-6`.
/// Residual is 0 when such a level exists and 1 otherwise.
pub fn freeness_suite(cfg: &CampaignConfig, count: usize) -> SuiteReport {
    let started = Instant::now();
    let Ok(theta) = cfg.theta() else {
        return assemble("solenoid_freeness", cfg.parameters(), 0.0, Vec::new(), started);
    };
    let cases: Vec<Case> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = case_rng(cfg.seed, stream::FREENESS, i as u64);
            let p = SolenoidPoint::random(&mut rng, theta.cover(), theta.depth());
            let q = loop {
                let q = SolenoidPoint::random(&mut rng, theta.cover(), theta.depth());
                if q.coords().iter().all(|c| circle_distance(c.value(), 0.0) >= 1e-3) {
                    break q;
                }
            };
            let detail = json!({"case": i, "q_top": q.coord(theta.depth())});
            match freeness_witness(&p, &q, &theta, 1e-6) {
                Ok(Some(w)) => Case::new(0.0, json!({"case": i, "level": w.level, "difference": w.difference})),
                Ok(None) => Case::new(1.0, detail),
                Err(e) => Case::failed(json!({"case": i, "error": e.to_string()})),
            }
        })
        .collect();
    let mut params = cfg.parameters();
    params["q_count"] = json!(count);
    assemble("solenoid_freeness", params, 0.0, cases, started)
}

/// The `β = 0` suite: trace defects `|φ(xy) − φ(yx)|`, `φ(1 − ss*)` and the
/// independence of `φ(s^a i(f) s*^a)` from `a`, all against the Lebesgue tower.
pub fn trace_suite(cfg: &CampaignConfig, tol: f64) -> SuiteReport {
    let started = Instant::now();
    let theta = match cfg.theta().and_then(|t| t.with_beta(0.0)) {
        Ok(t) => t,
        Err(e) => {
            let cases = vec![Case::failed(json!({"error": e.to_string()}))];
            return assemble("trace_beta_zero", cfg.parameters(), tol, cases, started);
        }
    };
    let tau = match trace_state(&theta) {
        Ok(t) => t,
        Err(e) => {
            let cases = vec![Case::failed(json!({"error": e.to_string()}))];
            return assemble("trace_beta_zero", cfg.parameters(), tol, cases, started);
        }
    };
    let mut cases: Vec<Case> = (0..cfg.samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = case_rng(cfg.seed, stream::TRACE, i as u64);
            let pair = random_pair_element(&mut rng, &theta, theta.depth()).map(|x| {
                let level = *x.level();
                let terms = rng.gen_range(1..=3);
                (x, random_element(&mut rng, level, terms, 2, 2))
            });
            match pair {
                Ok((x, y)) => {
                    let detail = || json!({"case": i, "x": x.to_string(), "y": y.to_string()});
                    from_result(trace_defect(&tau, &x, &y).map(|r| Case::new(r, detail())), detail)
                }
                Err(e) => Case::failed(json!({"case": i, "error": e.to_string()})),
            }
        })
        .collect();
    for j in 0..=theta.depth() {
        let r = theta
            .level(j)
            .and_then(|l| evaluate(&tau, &ToeplitzElement::gap(l)))
            .map(|v| v.norm());
        cases.push(from_result(
            r.map(|r| Case::new(r, json!({"gap_level": j}))),
            || json!({"gap_level": j}),
        ));
        let mut rng = case_rng(cfg.seed, stream::TRACE ^ 0x100, u64::from(j));
        let f = crate::toeplitz::random_poly(&mut rng, 3);
        let expect = f.coeff(0);
        for a in 0..4 {
            let r = theta
                .level(j)
                .and_then(|l| Ok(ToeplitzElement::spanning(l, a, f.clone(), a)?))
                .and_then(|x| evaluate(&tau, &x))
                .map(|v| (v - expect).norm());
            cases.push(from_result(
                r.map(|r| Case::new(r, json!({"diagonal_level": j, "a": a}))),
                || json!({"diagonal_level": j, "a": a}),
            ));
        }
    }
    let mut params = cfg.parameters();
    params["beta"] = json!(0.0);
    assemble("trace_beta_zero", params, tol, cases, started)
}

/// Gap values per level. At `β = 0` the trace must vanish on the gap (within
/// `trace_tol`); at `β > 0` each state's value at level `j` must equal
/// `1 − e^{−β/N^j} > 0` (within `formula_tol`). A factoring verdict that
/// contradicts the regime makes the residual infinite.
pub fn factor_suite(cfg: &CampaignConfig, states: &[KmsState], trace_tol: f64, formula_tol: f64) -> SuiteReport {
    let started = Instant::now();
    let beta = cfg.beta;
    let cases: Vec<Case> = states
        .par_iter()
        .enumerate()
        .map(|(k, phi)| match factors_through_solenoid(phi) {
            Ok(ft) => {
                let residual = if beta == 0.0 {
                    let worst = ft.gap_values.iter().map(|v| v.abs()).fold(0.0, f64::max);
                    worst + if ft.factors { 0.0 } else { f64::INFINITY }
                } else {
                    let worst = ft
                        .gap_values
                        .iter()
                        .enumerate()
                        .map(|(j, v)| {
                            let expect = gap_formula_value(beta, cfg.cover, j as u32);
                            if *v > 0.0 && expect > 0.0 {
                                (v - expect).abs()
                            } else {
                                f64::INFINITY
                            }
                        })
                        .fold(0.0, f64::max);
                    worst + if ft.factors { f64::INFINITY } else { 0.0 }
                };
                Case::new(
                    residual,
                    json!({"state": k, "factors": ft.factors, "gap_values": ft.gap_values}),
                )
            }
            Err(e) => Case::failed(json!({"state": k, "error": e.to_string()})),
        })
        .collect();
    let tol = if beta == 0.0 { trace_tol } else { formula_tol };
    assemble("factor_test", cfg.parameters(), tol, cases, started)
}

/// Every `β < 0` must be rejected by the angle-sequence constructor. The
/// residual of a case is 1 if it was accepted.
pub fn negative_beta_suite(cover: u32, theta0: f64, depth: u32) -> SuiteReport {
    let started = Instant::now();
    let betas = [-1e-9, -0.1, -0.5, -1.0, -4.0, -100.0];
    let cases = betas
        .iter()
        .map(|&beta| match make_theta_seq(cover, theta0, depth, beta) {
            Err(KmsError::NoKmsStates(_)) => Case::new(
                0.0,
                json!({"beta": beta, "formula_gap_value": gap_formula_value(beta, cover, 0)}),
            ),
            Err(e) => Case::new(1.0, json!({"beta": beta, "unexpected": e.to_string()})),
            Ok(_) => Case::new(1.0, json!({"beta": beta, "accepted": true})),
        })
        .collect();
    assemble(
        "negative_beta_rejected",
        json!({"N": cover, "theta0": theta0, "depth": depth, "betas": betas}),
        0.0,
        cases,
        started,
    )
}

/// Resolvent residual `max |(I − qA)v^n_j − ε_j|` with `ε_j = (1 − q)e_j`.
pub fn cycle_resolvent_suite(levels: &[u32], rates: &[f64], tol: f64) -> SuiteReport {
    let started = Instant::now();
    let mut cases = Vec::new();
    for &n in levels {
        for &r in rates {
            let k = 1usize << n;
            let gap = -(-r / k as f64).exp_m1();
            let vectors = match cycle::extreme_vectors(n, r) {
                Ok(v) => v,
                Err(e) => {
                    cases.push(Case::failed(json!({"n": n, "r": r, "error": e.to_string()})));
                    continue;
                }
            };
            for (j, v) in vectors.iter().enumerate() {
                let res = cycle::resolvent_apply(v, n, r).map(|eps| {
                    eps.iter()
                        .enumerate()
                        .map(|(i, e)| (e - if i == j { gap } else { 0.0 }).abs())
                        .fold(0.0, f64::max)
                });
                cases.push(match res {
                    Ok(err) => Case::new(err, json!({"n": n, "r": r, "j": j})),
                    Err(e) => Case::failed(json!({"n": n, "r": r, "j": j, "error": e.to_string()})),
                });
            }
        }
    }
    assemble(
        "cycle_resolvent",
        json!({"levels": levels, "rates": rates}),
        tol,
        cases,
        started,
    )
}

/// Decomposes `samples` random convex combinations of the `v^n_j` per
/// `(n, r)` and compares the recovered weights.
pub fn cycle_roundtrip_suite(levels: &[u32], rates: &[f64], samples: usize, seed: u64, tol: f64) -> SuiteReport {
    let started = Instant::now();
    let grid: Vec<(u32, f64)> = levels
        .iter()
        .flat_map(|&n| rates.iter().map(move |&r| (n, r)))
        .collect();
    let cases: Vec<Case> = grid
        .par_iter()
        .enumerate()
        .flat_map_iter(|(g, &(n, r))| {
            (0..samples).map(move |i| {
                let mut rng = case_rng(seed, stream::CYCLE, (g * samples + i) as u64);
                let k = 1usize << n;
                let raw: Vec<f64> = (0..k).map(|_| -rng.gen_range(f64::MIN_POSITIVE..1.0).ln()).collect();
                let total: f64 = raw.iter().sum();
                let lambda: Vec<f64> = raw.iter().map(|x| x / total).collect();
                let res: Result<f64, CycleError> = cycle::combine_extremes(&lambda, n, r)
                    .and_then(|x| cycle::decompose_subinvariant(&x, n, r))
                    .map(|back| back.iter().zip(&lambda).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
                match res {
                    Ok(err) => Case::new(err, json!({"n": n, "r": r, "sample": i})),
                    Err(e) => Case::failed(json!({"n": n, "r": r, "sample": i, "error": e.to_string()})),
                }
            })
        })
        .collect();
    assemble(
        "cycle_roundtrip",
        json!({"levels": levels, "rates": rates, "samples": samples, "seed": seed}),
        tol,
        cases,
        started,
    )
}

/// `‖m_r − m_{n,r}‖₁` for `n = 1..=n_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L1Curve {
    pub rate: f64,
    pub panels: usize,
    pub values: Vec<(u32, f64)>,
}

pub fn l1_curve(r: f64, n_max: u32, panels: usize) -> Result<L1Curve, crate::measures::MeasureError> {
    let mr = make_mr(r)?;
    let values = (1..=n_max)
        .into_par_iter()
        .map(|n| Ok((n, l1_distance(&mr, &make_mnr(n, r)?, panels)?)))
        .collect::<Result<Vec<_>, crate::measures::MeasureError>>()?;
    Ok(L1Curve {
        rate: r,
        panels,
        values,
    })
}

/// Three reports: quadrature stability (the curve at `panels` against `4 ×
/// panels`), strict decrease, and the final value against `final_bound`.
pub fn l1_suites(r: f64, n_max: u32, panels: usize, quad_tol: f64, final_bound: f64) -> Vec<SuiteReport> {
    let started = Instant::now();
    let params = json!({"r": r, "n_max": n_max, "panels": panels});
    let (coarse, fine) = match (l1_curve(r, n_max, panels), l1_curve(r, n_max, 4 * panels)) {
        (Ok(c), Ok(f)) => (c, f),
        (Err(e), _) | (_, Err(e)) => {
            let fail = |name: &str, tol: f64| {
                assemble(
                    name,
                    params.clone(),
                    tol,
                    vec![Case::failed(json!({"error": e.to_string()}))],
                    started,
                )
            };
            return vec![
                fail("l1_quadrature", quad_tol),
                fail("l1_strictly_decreasing", 0.0),
                fail("l1_final_value", final_bound),
            ];
        }
    };
    let quad = coarse
        .values
        .iter()
        .zip(&fine.values)
        .map(|(&(n, a), &(_, b))| Case::new((a - b).abs(), json!({"n": n, "coarse": a, "fine": b})))
        .collect();
    let decrease = coarse
        .values
        .windows(2)
        .map(|w| {
            let (n, a) = w[0];
            let (_, b) = w[1];
            Case::new(
                if b < a { 0.0 } else { b - a + f64::MIN_POSITIVE },
                json!({"n": n, "value": a, "next": b}),
            )
        })
        .collect();
    let last = coarse
        .values
        .last()
        .map(|&(n, v)| Case::new(v, json!({"n": n, "value": v})));
    let table: Vec<Value> = coarse.values.iter().map(|&(n, v)| json!([n, v])).collect();
    let mut with_table = params.clone();
    with_table["curve"] = json!(table);
    vec![
        assemble("l1_quadrature", params.clone(), quad_tol, quad, started),
        assemble("l1_strictly_decreasing", with_table, 0.0, decrease, started),
        assemble(
            "l1_final_value",
            params,
            final_bound,
            last.into_iter().collect(),
            started,
        ),
    ]
}

/// `|(m_{Nr} ∘ R_s ∘ p_N^{-1})(U) − (m_r ∘ R_{Ns})(U)|` on random arcs.
pub fn pushforward_suite(
    covers: &[u32],
    rates: &[f64],
    shifts: &[f64],
    arcs: usize,
    seed: u64,
    tol: f64,
) -> SuiteReport {
    let started = Instant::now();
    let mut rng = case_rng(seed, stream::PUSHFORWARD, 0);
    let test_arcs: Vec<Arc> = (0..arcs)
        .map(|_| Arc::new(rng.gen_range(0.0..1.0), rng.gen_range(1e-3..1.0)).expect("valid arc"))
        .collect();
    let mut cases = Vec::new();
    for &n in covers {
        for &r in rates {
            for &s in shifts {
                let sides = make_mr(f64::from(n) * r).and_then(|upper| {
                    let lhs = upper.rotate(s).pushforward(n)?;
                    let rhs = make_mr(r)?.rotate(f64::from(n) * s);
                    Ok((lhs, rhs))
                });
                match sides {
                    Ok((lhs, rhs)) => {
                        for (a, u) in test_arcs.iter().enumerate() {
                            let err = (lhs.measure_arc(u) - rhs.measure_arc(u)).abs();
                            cases.push(Case::new(err, json!({"N": n, "r": r, "s": s, "arc": a, "start": u.start().value(), "length": u.length()})));
                        }
                    }
                    Err(e) => cases.push(Case::failed(json!({"N": n, "r": r, "s": s, "error": e.to_string()}))),
                }
            }
        }
    }
    assemble(
        "pushforward_identity",
        json!({"covers": covers, "rates": rates, "shifts": shifts, "arcs": arcs, "seed": seed}),
        tol,
        cases,
        started,
    )
}

/// A seeded perturbation of Lebesgue measure that is not Lebesgue: a step
/// bump on a dyadic cell, an exponential tilt, or a mixture with `m_r`.
pub fn perturbed_lebesgue(seed: u64, index: u64) -> CircleMeasure {
    let mut rng = case_rng(seed, stream::OMEGA_ZERO, index);
    match index % 3 {
        0 => {
            let level = rng.gen_range(1..=6);
            let cells = dyadic_partition(level);
            let bump = rng.gen_range(0..cells.len());
            let height = 1.0 + rng.gen_range(0.01..0.5);
            let pieces = cells
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    ExpPiece::new(a.start().value(), a.end(), if i == bump { height } else { 1.0 }, 0.0)
                        .expect("dyadic cell")
                })
                .collect();
            CircleMeasure::from_pieces_normalized(pieces).expect("positive density")
        }
        1 => {
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let tilt = make_mr(rng.gen_range(0.01..2.0)).expect("positive rate");
            let tilt = if sign > 0.0 { tilt } else { tilt.reflect() };
            tilt.rotate(rng.gen_range(0.0..1.0))
        }
        _ => {
            let w = rng.gen_range(0.01..0.5);
            let other = make_mr(rng.gen_range(0.1..3.0))
                .expect("positive rate")
                .rotate(rng.gen_range(0.0..1.0));
            CircleMeasure::convex_combination(&[1.0 - w, w], &[lebesgue(), other]).expect("weights sum to 1")
        }
    }
}

/// Lebesgue measure must pass subinvariance at `r = 0` with violation exactly
/// 0, and each of `count` perturbations must fail. Residuals: the Lebesgue
/// violation, and 1 for every perturbation that passes.
pub fn omega_zero_suite(count: usize, seed: u64) -> SuiteReport {
    let started = Instant::now();
    let grid = (64, 32);
    let mut cases = vec![match check_subinvariance(&lebesgue(), 0.0, grid, SUBINVARIANCE_TOL) {
        Ok(rep) => Case::new(
            rep.worst_violation,
            json!({"measure": "lebesgue", "violation": rep.worst_violation}),
        ),
        Err(e) => Case::failed(json!({"measure": "lebesgue", "error": e.to_string()})),
    }];
    cases.extend(
        (0..count)
            .into_par_iter()
            .map(|i| {
                let m = perturbed_lebesgue(seed, i as u64);
                match check_subinvariance(&m, 0.0, grid, SUBINVARIANCE_TOL) {
                    Ok(rep) => Case::new(
                        if rep.satisfied { 1.0 } else { 0.0 },
                        json!({"perturbation": i, "violation": rep.worst_violation}),
                    ),
                    Err(e) => Case::failed(json!({"perturbation": i, "error": e.to_string()})),
                }
            })
            .collect::<Vec<_>>(),
    );
    assemble(
        "omega_zero_singleton",
        json!({"perturbations": count, "seed": seed, "grid": [grid.0, grid.1], "tol": SUBINVARIANCE_TOL}),
        0.0,
        cases,
        started,
    )
}

/// Named tolerances. Missing names take their defaults when deserialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub kms: f64,
    pub evaluation: f64,
    pub positivity: f64,
    pub embedding: f64,
    pub tower: f64,
    pub formula: f64,
    pub trace: f64,
    pub cycle_resolvent: f64,
    pub cycle_roundtrip: f64,
    pub quadrature: f64,
    pub l1_final: f64,
    pub pushforward: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            kms: 1e-9,
            evaluation: 1e-10,
            positivity: 1e-9,
            embedding: 1e-12,
            tower: 1e-10,
            formula: 1e-12,
            trace: 1e-10,
            cycle_resolvent: 1e-13,
            cycle_roundtrip: 1e-10,
            quadrature: 1e-8,
            l1_final: 1e-3,
            pushforward: 1e-12,
        }
    }
}

/// The full KMS campaign for one configuration: KMS identity, invariance,
/// positivity, embedding consistency, tower compatibility, the scale
/// certificate, factoring, and at `β > 0` equivariance, freeness and
/// detection of the reversed-density tower.
pub fn verify_campaign(cfg: &CampaignConfig, tol: &Tolerances) -> Vec<SuiteReport> {
    let started = Instant::now();
    let states = match cfg.theta().and_then(|t| random_states(&t, cfg.states, cfg.seed)) {
        Ok(s) => s,
        Err(e) => {
            let case = Case::failed(json!({"error": e.to_string()}));
            return vec![assemble("kms_setup", cfg.parameters(), 0.0, vec![case], started)];
        }
    };
    let mut reports = vec![
        kms_identity_suite(cfg, &states, tol.kms),
        state_invariance_suite(cfg, &states, tol.evaluation),
        positivity_suite(cfg, &states, tol.positivity),
        embedding_suite(cfg, &states, tol.embedding),
        tower_suite(cfg, &states, tol.tower),
        certificate_suite(cfg, &states, tol.kms),
        factor_suite(cfg, &states, tol.trace, tol.formula),
    ];
    if cfg.beta > 0.0 {
        reports.push(equivariance_suite(cfg, tol.evaluation));
        reports.push(freeness_suite(cfg, cfg.states));
        reports.push(reversed_tower_suite(cfg, tol.positivity));
    }
    reports
}
