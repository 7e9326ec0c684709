//! Standalone inequalities between orthant tail sums and weighted square
//! sums, used to relate the weighted-projection condition to the
//! tail-norm and absolute-sum conditions.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::grid::{AxisSpec, CompressedSupport, Layers};
use crate::lattice::CoefficientField;

/// Both sides of
/// `sum_{j >= 1} (sum_{i >= j} a_i)^2 <= C sum_{i >= 1} i_1^2 ... i_d^2 a_i^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailSumCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs / rhs`, with `0/0 = 0`.
    pub ratio: f64,
}

/// Bound on the ratio used by the tests: `6^d`.
pub fn tail_sum_constant(dim: usize) -> f64 {
    6f64.powi(dim as i32)
}

/// Evaluate both sides for nonnegative weights supported in `i >= 1`.
pub fn tail_sum_check(weights: &CoefficientField) -> Result<TailSumCheck> {
    if weights.channel_count() != 1 {
        return Err(Error::InvalidInput("tail sum check takes a single channel".into()));
    }
    for (_, i, v) in weights.iter() {
        if v < 0.0 {
            return Err(Error::InvalidInput(format!("negative weight {v} at {i}")));
        }
        if i.coords().iter().any(|&c| c < 1) {
            return Err(Error::InvalidInput(format!("weight at {i} outside the positive orthant")));
        }
    }
    let dim = weights.dimension();
    let specs = vec![AxisSpec::at_least(Some(1), None); dim];
    let lhs = CompressedSupport::new(weights).sum(Layers::Channels, &specs, |s| s[0] * s[0])?;
    let rhs: f64 = weights
        .iter()
        .map(|(_, i, v)| {
            let w: f64 = i.coords().iter().map(|&c| (c as f64).powi(2)).product();
            w * v * v
        })
        .sum();
    let ratio = if lhs == 0.0 && rhs == 0.0 { 0.0 } else { lhs / rhs };
    Ok(TailSumCheck { lhs, rhs, ratio })
}

/// `b_k = sqrt(sum_{i >= k} a_i^2)`, accumulated from the far end.
pub fn tail_norms(a: &[f64]) -> Vec<f64> {
    let mut b = vec![0.0; a.len()];
    let mut acc = 0.0;
    for k in (0..a.len()).rev() {
        acc += a[k] * a[k];
        b[k] = acc.sqrt();
    }
    b
}

/// Nonnegative `a` with `sum_{i >= k} a_i^2 = b_k^2` for a nonincreasing,
/// nonnegative `b` (with `b` vanishing past its end).
pub fn coefficients_from_tail_norms(b: &[f64]) -> Result<Vec<f64>> {
    check_tail_sequence(b)?;
    Ok((0..b.len())
        .map(|k| {
            let next = b.get(k + 1).copied().unwrap_or(0.0);
            (b[k] * b[k] - next * next).max(0.0).sqrt()
        })
        .collect())
}

fn check_tail_sequence(b: &[f64]) -> Result<()> {
    if let Some(k) = b.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidInput(format!("b_{k} is not a finite nonnegative number")));
    }
    if let Some(k) = b.windows(2).position(|w| w[1] > w[0]) {
        return Err(Error::InvalidInput(format!("b is not nonincreasing at index {}", k + 1)));
    }
    Ok(())
}

/// Outcome of the tail-norm inequality chain for one sequence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailNormReport {
    /// `sum_k (k+1) b_k^2`.
    pub weighted_tail: f64,
    /// `sum_i a_i^2 (i+1)(i+2)/2`, which equals `weighted_tail`.
    pub weighted_tail_by_coefficients: f64,
    /// `1/2 sum_i (i+1)^2 a_i^2`.
    pub half_weighted_square: f64,
    /// `sqrt(sum_k (k+1)^2 b_k^3) sqrt(sum_k b_k)`.
    pub cauchy_schwarz_bound: f64,
    /// `max_{n >= 1} n b_n`.
    pub max_scaled_tail: f64,
    /// `4 sum_{k >= 1} b_k`.
    pub scaled_tail_bound: f64,
    /// Largest residual of the summation-by-parts identity
    /// `sum_{k=1}^n b_k = (n+1) b_{n+1} - b_1 - sum_{k=1}^n (k+1)(b_{k+1} - b_k)`.
    pub abel_residual: f64,
    pub weighted_square_holds: bool,
    pub cauchy_schwarz_holds: bool,
    pub scaled_tail_holds: bool,
}

impl TailNormReport {
    pub fn all_hold(&self) -> bool {
        self.weighted_square_holds && self.cauchy_schwarz_holds && self.scaled_tail_holds
    }
}

/// Check the inequality chain for `b` and its generating coefficients `a`.
///
/// Both sequences are indexed from 0 and vanish past their ends. Inequalities
/// are checked with a relative slack of `1e-12` for rounding.
pub fn tail_norm_inequalities(b: &[f64], a: &[f64]) -> Result<TailNormReport> {
    check_tail_sequence(b)?;
    if let Some(i) = a.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidInput(format!("a_{i} is not a finite nonnegative number")));
    }
    let expected = tail_norms(a);
    let len = a.len().max(b.len());
    for k in 0..len {
        let want = expected.get(k).copied().unwrap_or(0.0);
        let got = b.get(k).copied().unwrap_or(0.0);
        if (want * want - got * got).abs() > 1e-9 * (1.0 + want * want) {
            return Err(Error::InvalidInput(format!(
                "b_{k}^2 = {} does not match the tail sum {}",
                got * got,
                want * want
            )));
        }
    }

    let bk = |k: usize| b.get(k).copied().unwrap_or(0.0);
    let weighted_tail: f64 = (0..b.len()).rev().map(|k| (k + 1) as f64 * bk(k) * bk(k)).sum();
    let weighted_tail_by_coefficients: f64 = (0..a.len())
        .rev()
        .map(|i| {
            let i = i as f64;
            a[i as usize].powi(2) * (i + 1.0) * (i + 2.0) / 2.0
        })
        .sum();
    let half_weighted_square: f64 = 0.5
        * (0..a.len())
            .rev()
            .map(|i| ((i + 1) as f64 * a[i]).powi(2))
            .sum::<f64>();
    let cube_term: f64 = (0..b.len()).rev().map(|k| ((k + 1) as f64).powi(2) * bk(k).powi(3)).sum();
    let b_total: f64 = (0..b.len()).rev().map(bk).sum();
    let cauchy_schwarz_bound = cube_term.sqrt() * b_total.sqrt();
    let tail_from_one: f64 = (1..b.len()).rev().map(bk).sum();
    let max_scaled_tail = (1..b.len()).map(|n| n as f64 * bk(n)).fold(0.0, f64::max);
    let scaled_tail_bound = 4.0 * tail_from_one;

    let mut abel_residual: f64 = 0.0;
    let mut lhs = 0.0;
    let mut diff_sum = 0.0;
    for n in 1..len.max(2) {
        lhs += bk(n);
        diff_sum += (n + 1) as f64 * (bk(n + 1) - bk(n));
        let rhs = (n + 1) as f64 * bk(n + 1) - bk(1) - diff_sum;
        abel_residual = abel_residual.max((lhs - rhs).abs());
    }

    let le = |x: f64, y: f64| x <= y + 1e-12 * y.abs().max(x.abs());
    Ok(TailNormReport {
        weighted_tail,
        weighted_tail_by_coefficients,
        half_weighted_square,
        cauchy_schwarz_bound,
        max_scaled_tail,
        scaled_tail_bound,
        abel_residual,
        weighted_square_holds: le(half_weighted_square, weighted_tail),
        cauchy_schwarz_holds: le(weighted_tail, cauchy_schwarz_bound),
        scaled_tail_holds: le(max_scaled_tail, scaled_tail_bound),
    })
}
