//! Subinvariant vectors on the cycle graph `C^{2^n}`.
//!
//! The adjacency matrix shifts indices forward, `(Ax)_{j+1} = x_j`, so a
//! probability vector `x` is subinvariant at rate `r` when
//! `x_j ≤ e^{r/2^n} x_{j+1}` for every `j` (indices mod `2^n`). The simplex of
//! such vectors has the `2^n` extreme points `v^n_j`, and the resolvent
//! `(I − e^{−r/2^n}A)` maps `v^n_j` to a multiple of the `j`-th basis vector.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::circle::dyadic_partition;
use crate::measures::CircleMeasure;

/// Entries of `ε = (I − qA)x` below this are a subinvariance violation.
pub const NEGATIVE_WEIGHT_ERROR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CycleError {
    #[error("rate must be positive, got {0}")]
    InvalidRate(f64),
    #[error("vector has length {got}, expected 2^{level} = {expected}")]
    LengthMismatch { level: u32, expected: usize, got: usize },
    #[error("vector is not subinvariant: resolvent entry {value:e} at index {index}")]
    NotSubinvariant { index: usize, value: f64 },
    #[error("entries must be nonnegative and sum to 1")]
    NotProbability,
    #[error("level {0} too large for brute-force verification (need 2^n <= 16)")]
    LevelTooLarge(u32),
}

/// The cycle graph with `2^n` vertices, stored implicitly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CycleMatrix {
    level: u32,
}

impl CycleMatrix {
    pub fn new(level: u32) -> Self {
        CycleMatrix { level }
    }

    pub fn size(&self) -> usize {
        1usize << self.level
    }

    /// `(Ax)_i = x_{i−1}`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let k = x.len();
        (0..k).map(|i| x[(i + k - 1) % k]).collect()
    }
}

/// `q = e^{−r/2^n}`.
pub fn decay(n: u32, r: f64) -> f64 {
    (-r / (1u64 << n) as f64).exp()
}

fn check_rate(r: f64) -> Result<(), CycleError> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(CycleError::InvalidRate(r))
    }
}

fn check_len(x: &[f64], n: u32) -> Result<(), CycleError> {
    let expected = 1usize << n;
    if x.len() != expected {
        Err(CycleError::LengthMismatch {
            level: n,
            expected,
            got: x.len(),
        })
    } else {
        Ok(())
    }
}

/// The extreme vectors `v^n_0, …, v^n_{2^n−1}` with
/// `(v^n_j)_i = c q^{(i−j) mod 2^n}`, `c = (1−q)/(1−e^{−r})`.
pub fn extreme_vectors(n: u32, r: f64) -> Result<Vec<Vec<f64>>, CycleError> {
    check_rate(r)?;
    let k = 1usize << n;
    let base = extreme_vector_base(n, r);
    Ok((0..k)
        .map(|j| (0..k).map(|i| base[(i + k - j) % k]).collect())
        .collect())
}

/// `v^n_0`; the other extreme vectors are its cyclic shifts.
fn extreme_vector_base(n: u32, r: f64) -> Vec<f64> {
    let k = 1usize << n;
    let step = r / k as f64;
    // (1 − q)/(1 − e^{−r}) without cancellation for small r
    let scale = (-step).exp_m1() / (-r).exp_m1();
    (0..k).map(|i| scale * (-(i as f64) * step).exp()).collect()
}

pub fn extreme_vector(n: u32, r: f64, j: usize) -> Result<Vec<f64>, CycleError> {
    check_rate(r)?;
    let k = 1usize << n;
    let base = extreme_vector_base(n, r);
    Ok((0..k).map(|i| base[(i + k - j % k) % k]).collect())
}

/// `(I − qA)x`, evaluated as the stencil `x_i − q x_{i−1}`.
pub fn resolvent_apply(x: &[f64], n: u32, r: f64) -> Result<Vec<f64>, CycleError> {
    check_len(x, n)?;
    let q = decay(n, r);
    let k = x.len();
    Ok((0..k).map(|i| x[i] - q * x[(i + k - 1) % k]).collect())
}

/// A probability vector on `ℤ/2^nℤ` that is subinvariant at rate `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubinvariantVector {
    entries: Vec<f64>,
    level: u32,
    rate: f64,
}

impl SubinvariantVector {
    pub fn new(entries: Vec<f64>, level: u32, rate: f64) -> Result<Self, CycleError> {
        check_rate(rate)?;
        check_len(&entries, level)?;
        if entries.iter().any(|&x| x < -1e-12) || (entries.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(CycleError::NotProbability);
        }
        let growth = 1.0 / decay(level, rate);
        let shifted = CycleMatrix::new(level).apply(&entries);
        for (i, (&ax, &x)) in shifted.iter().zip(&entries).enumerate() {
            if ax > growth * x + 1e-12 {
                return Err(CycleError::NotSubinvariant {
                    index: i,
                    value: x - ax / growth,
                });
            }
        }
        Ok(SubinvariantVector { entries, level, rate })
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }
}

/// Weights `λ` with `x = Σ λ_j v^n_j`, read off as `λ = (I − qA)x / (1 − q)`.
///
/// Entries in `(−1e−8, 0)` are rounding noise and are clamped to zero before
/// renormalising; anything more negative is reported as a violation.
pub fn decompose_subinvariant(x: &[f64], n: u32, r: f64) -> Result<Vec<f64>, CycleError> {
    check_rate(r)?;
    let eps = resolvent_apply(x, n, r)?;
    let one_minus_q = -(-r / (1u64 << n) as f64).exp_m1();
    if let Some((index, &value)) = eps
        .iter()
        .enumerate()
        .filter(|(_, &e)| e < -NEGATIVE_WEIGHT_ERROR)
        .min_by(|a, b| a.1.total_cmp(b.1))
    {
        return Err(CycleError::NotSubinvariant { index, value });
    }
    let mut lambda: Vec<f64> = eps.iter().map(|&e| (e / one_minus_q).max(0.0)).collect();
    let total: f64 = lambda.iter().sum();
    if total <= 0.0 {
        return Err(CycleError::NotProbability);
    }
    for l in &mut lambda {
        *l /= total;
    }
    Ok(lambda)
}

/// `Σ_j λ_j v^n_j`.
pub fn combine_extremes(lambda: &[f64], n: u32, r: f64) -> Result<Vec<f64>, CycleError> {
    check_len(lambda, n)?;
    let vs = extreme_vectors(n, r)?;
    let k = lambda.len();
    Ok((0..k)
        .map(|i| lambda.iter().zip(&vs).map(|(l, v)| l * v[i]).sum())
        .collect())
}

/// Arc masses `(m(U^n_0), …, m(U^n_{2^n−1}))` on the dyadic partition.
pub fn measure_to_vector(m: &CircleMeasure, n: u32) -> Vec<f64> {
    dyadic_partition(n).iter().map(|a| m.measure_arc(a)).collect()
}

/// Feasibility constraints `a·x ≤ b` of the subinvariant simplex, written out
/// directly (nonnegativity and `x_j ≤ e^{r/2^n} x_{j+1}`); the sum-to-one
/// constraint is handled by only moving along zero-sum directions.
fn constraint_rows(n: u32, r: f64) -> Vec<Vec<f64>> {
    let k = 1usize << n;
    let growth = (r / k as f64).exp();
    let mut rows = Vec::with_capacity(2 * k);
    for i in 0..k {
        let mut row = vec![0.0; k];
        row[i] = -1.0;
        rows.push(row);
    }
    for j in 0..k {
        let mut row = vec![0.0; k];
        row[j] += 1.0;
        row[(j + 1) % k] -= growth;
        rows.push(row);
    }
    rows
}

/// Largest `t ≥ 0` keeping `x + t d` feasible (ratio test).
fn max_step(rows: &[Vec<f64>], x: &[f64], d: &[f64]) -> f64 {
    rows.iter()
        .filter_map(|row| {
            let ad: f64 = row.iter().zip(d).map(|(a, b)| a * b).sum();
            if ad <= 1e-15 {
                return None;
            }
            let slack: f64 = -row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            Some(slack.max(0.0) / ad)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Random search for a nontrivial decomposition `v^n_j = t x + (1 − t) y`.
///
/// Each trial draws a zero-sum direction `d` and measures how far one can move
/// from `v^n_j` along `±d` inside the simplex, using the defining inequalities
/// rather than the resolvent. If both steps exceed `1e−9` then
/// `x = v + αd`, `y = v − αd` is a counterexample and the function returns
/// false.
pub fn verify_extremality_bruteforce(n: u32, r: f64, trials: usize, seed: u64) -> Result<bool, CycleError> {
    check_rate(r)?;
    if n > 4 {
        return Err(CycleError::LevelTooLarge(n));
    }
    let k = 1usize << n;
    let rows = constraint_rows(n, r);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in extreme_vectors(n, r)? {
        for _ in 0..trials {
            let mut d: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mean = d.iter().sum::<f64>() / k as f64;
            d.iter_mut().for_each(|x| *x -= mean);
            let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-12 {
                continue;
            }
            d.iter_mut().for_each(|x| *x /= norm);
            let neg: Vec<f64> = d.iter().map(|x| -x).collect();
            let forward = max_step(&rows, &v, &d);
            let backward = max_step(&rows, &v, &neg);
            if forward.min(backward) > 1e-9 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{lebesgue, make_mr, rotate_measure};
    use std::f64::consts::LN_2;

    #[test]
    fn level_one_vectors() {
        let vs = extreme_vectors(1, 2.0 * LN_2).unwrap();
        assert!((vs[0][0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((vs[0][1] - 1.0 / 3.0).abs() < 1e-15);
        assert!((vs[1][0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((vs[1][1] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn own_entry_and_sums() {
        for n in 0..6 {
            for r in [0.1, 1.0, 5.0] {
                let q = decay(n, r);
                for (j, v) in extreme_vectors(n, r).unwrap().iter().enumerate() {
                    assert!((v[j] - (1.0 - q) / (1.0 - (-r).exp())).abs() < 1e-14);
                    let s: f64 = v.iter().sum();
                    assert!((s - 1.0).abs() < 1e-13);
                    assert!(SubinvariantVector::new(v.clone(), n, r).is_ok());
                }
            }
        }
    }

    #[test]
    fn resolvent_examples() {
        let n = 3;
        let r = 1.7;
        let q = decay(n, r);
        for (j, v) in extreme_vectors(n, r).unwrap().iter().enumerate() {
            let eps = resolvent_apply(v, n, r).unwrap();
            for (i, e) in eps.iter().enumerate() {
                let expected = if i == j { 1.0 - q } else { 0.0 };
                assert!((e - expected).abs() < 1e-14);
            }
        }
        let uniform = vec![1.0 / 8.0; 8];
        for e in resolvent_apply(&uniform, n, r).unwrap() {
            assert!((e - (1.0 - q) / 8.0).abs() < 1e-15);
        }
        assert!(matches!(
            resolvent_apply(&[0.5, 0.5], 2, r),
            Err(CycleError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn decomposition_examples() {
        let r = 2.0 * LN_2;
        let lambda = decompose_subinvariant(&[0.5, 0.5], 1, r).unwrap();
        assert!((lambda[0] - 0.5).abs() < 1e-15 && (lambda[1] - 0.5).abs() < 1e-15);

        let err = decompose_subinvariant(&[0.9, 0.1], 1, r).unwrap_err();
        match err {
            CycleError::NotSubinvariant { index, value } => {
                assert_eq!(index, 1);
                assert!((value - (0.1 - 0.45)).abs() < 1e-15);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(SubinvariantVector::new(vec![0.9, 0.1], 1, r).is_err());

        for j in 0..4 {
            let v = extreme_vector(2, 1.0, j).unwrap();
            let lambda = decompose_subinvariant(&v, 2, 1.0).unwrap();
            for (i, l) in lambda.iter().enumerate() {
                assert!((l - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn midpoint_is_not_extreme() {
        let vs = extreme_vectors(2, 1.0).unwrap();
        let mid: Vec<f64> = vs[0].iter().zip(&vs[1]).map(|(a, b)| 0.5 * (a + b)).collect();
        let lambda = decompose_subinvariant(&mid, 2, 1.0).unwrap();
        assert_eq!(lambda.iter().filter(|&&l| l > 1e-9).count(), 2);
    }

    #[test]
    fn bruteforce_extremality() {
        for r in [0.3, 1.0, 2.0 * LN_2, 4.0] {
            assert!(verify_extremality_bruteforce(1, r, 1000, 1).unwrap());
        }
        assert!(verify_extremality_bruteforce(2, 1.0, 500, 2).unwrap());
        assert!(verify_extremality_bruteforce(4, 1.0, 100, 3).unwrap());
        assert_eq!(
            verify_extremality_bruteforce(5, 1.0, 1, 0),
            Err(CycleError::LevelTooLarge(5))
        );
    }

    #[test]
    fn bruteforce_sees_interior_points() {
        // The same ratio test applied at a non-vertex finds room both ways.
        let rows = constraint_rows(1, 1.0);
        let x = [0.5, 0.5];
        let d = [1.0 / 2f64.sqrt(), -1.0 / 2f64.sqrt()];
        let neg = [-d[0], -d[1]];
        assert!(max_step(&rows, &x, &d) > 1e-3 && max_step(&rows, &x, &neg) > 1e-3);
    }

    #[test]
    fn measure_vectors() {
        let v = measure_to_vector(&lebesgue(), 2);
        assert_eq!(v, vec![0.25; 4]);
        for n in 0..6 {
            let r = 1.3;
            let k = 1usize << n;
            for j in [0, k / 2, k - 1] {
                let m = rotate_measure(&make_mr(r).unwrap(), j as f64 / k as f64);
                let x = measure_to_vector(&m, n);
                let v = extreme_vector(n, r, j).unwrap();
                for (a, b) in x.iter().zip(&v) {
                    assert!((a - b).abs() < 1e-13, "n={n} j={j}");
                }
            }
        }
    }
}
