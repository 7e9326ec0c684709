//! Orlicz norms with the Young functions `psi_a(x) = exp((x+h_a)^a) - exp(h_a^a)`
//! and the sub-Weibull tail bound for partial sums.

use serde::Serialize;

use super::{sample_linear_form, tilted_tail_probability, NORM_SAMPLES};
use crate::conditions::verdict::linear_fit;
use crate::decomposition::Decomposition;
use crate::error::{Error, Result};
use crate::fieldsim::{partial_sum_coefficients, partial_sum_totals, InnovationLaw, InnovationModel};
use crate::lattice::{CoefficientField, MultiIndex, SubsetMask};

pub const ORLICZ_TAIL_FORMULA: &str =
    "(1 + exp(h_q^q)) exp(-(x / (C |n|^(1/2) sum_S ||g_S||_psi_beta(q)) + h_q)^q)";

/// Grid steps per octave in the Luxemburg search; relative spacing 6.6e-7.
const STEPS_PER_OCTAVE: f64 = (1u64 << 20) as f64;

/// `psi_a(x) = exp((x + h_a)^a) - exp(h_a^a)` with
/// `h_a = ((1-a)/a)^{1/a}` for `a < 1` and `0` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct YoungFunction {
    pub alpha: f64,
    pub h: f64,
}

impl YoungFunction {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidInput(format!("Young exponent {alpha} must be positive")));
        }
        let h = if alpha < 1.0 { ((1.0 - alpha) / alpha).powf(1.0 / alpha) } else { 0.0 };
        Ok(YoungFunction { alpha, h })
    }

    pub fn eval(&self, x: f64) -> f64 {
        (x + self.h).powf(self.alpha).exp() - self.h.powf(self.alpha).exp()
    }

    /// `psi^{-1}(1) = (ln(1 + exp(h^a)))^{1/a} - h`.
    pub fn inverse_at_one(&self) -> f64 {
        let a = self.alpha;
        self.h.powf(a).exp().ln_1p().powf(1.0 / a) - self.h
    }

    /// Second differences on `0, step, ..., n step` are nonnegative and the
    /// function is nondecreasing there.
    pub fn is_convex_on_grid(&self, step: f64, n: usize) -> bool {
        let v: Vec<f64> = (0..=n).map(|i| self.eval(i as f64 * step)).collect();
        let scale = v.last().copied().unwrap_or(1.0).abs().max(1.0);
        v.windows(2).all(|w| w[1] >= w[0])
            && v.windows(3).all(|w| w[2] - 2.0 * w[1] + w[0] >= -1e-12 * scale)
    }
}

/// Exponents and Young functions for a given `q` in `(0, 2/d)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrliczParams {
    pub dim: usize,
    pub q: f64,
    /// `beta(q) = 2q / (2 - dq)`.
    pub beta: f64,
    pub psi_q: YoungFunction,
    pub psi_beta: YoungFunction,
}

impl OrliczParams {
    pub fn new(q: f64, dim: usize) -> Result<Self> {
        let d = dim as f64;
        if !(q > 0.0 && q < 2.0 / d) {
            return Err(Error::InvalidInput(format!("q = {q} must lie in (0, 2/{dim})")));
        }
        let beta = 2.0 * q / (2.0 - d * q);
        Ok(OrliczParams {
            dim,
            q,
            beta,
            psi_q: YoungFunction::new(q)?,
            psi_beta: YoungFunction::new(beta)?,
        })
    }

    /// `(1 + exp(h^q)) exp(-(x / scale + h)^q)` with `scale = C |n|^{1/2} G`.
    pub fn tail_bound(&self, x: f64, scale: f64) -> f64 {
        let YoungFunction { alpha: q, h } = self.psi_q;
        (1.0 + h.powf(q).exp()) * (-(x / scale + h).powf(q)).exp()
    }

    /// Smallest `scale` with `tail_bound(x, scale) >= freq`, for `0 < freq <= 1`.
    fn scale_for(&self, x: f64, freq: f64) -> f64 {
        let YoungFunction { alpha: q, h } = self.psi_q;
        let reach = ((1.0 + h.powf(q).exp()) / freq).ln().powf(1.0 / q) - h;
        x / reach
    }
}

/// `inf { c > 0 : mean psi(|z|/c) <= 1 }`.
///
/// The answer is the smallest point of the geometric grid
/// `2^{k / 2^20}` that satisfies the constraint, which keeps the result
/// exactly monotone in the samples and exactly homogeneous under scaling by
/// powers of two.
pub fn luxemburg_norm(samples: &[f64], psi: &YoungFunction) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("Luxemburg norm of an empty sample".into()));
    }
    if samples.iter().any(|z| !z.is_finite()) {
        return Err(Error::InvalidInput("Luxemburg norm of a non-finite sample".into()));
    }
    let top = samples.iter().fold(0.0f64, |m, z| m.max(z.abs()));
    if top == 0.0 {
        return Ok(0.0);
    }
    let n = samples.len() as f64;
    let fits = |k: i64| {
        let c = (k as f64 / STEPS_PER_OCTAVE).exp2();
        samples.iter().map(|z| psi.eval(z.abs() / c)).sum::<f64>() / n <= 1.0
    };
    // mean psi(|z|/c) <= psi(top/c) <= 1 once c >= top / psi^{-1}(1)
    let guess = (top / psi.inverse_at_one()).log2();
    let mut hi = (guess * STEPS_PER_OCTAVE).ceil() as i64;
    while !fits(hi) {
        hi += STEPS_PER_OCTAVE as i64;
    }
    let mut lo = hi - STEPS_PER_OCTAVE as i64;
    while fits(lo) {
        hi = lo;
        lo -= 64 * STEPS_PER_OCTAVE as i64;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if fits(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((hi as f64 / STEPS_PER_OCTAVE).exp2())
}

/// Monte Carlo `||Y||_psi` for `Y = sum a_{k,j} e_k(-j)`.
pub fn orlicz_norm_estimate(
    field: &CoefficientField,
    law: InnovationLaw,
    psi: &YoungFunction,
    samples: u64,
    seed: u64,
) -> Result<f64> {
    if field.is_zero() {
        return Ok(0.0);
    }
    luxemburg_norm(&sample_linear_form(field, law, samples, seed), psi)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrliczLevel {
    pub x: f64,
    pub exceedances: u64,
    pub empirical: f64,
    /// Bound with `C = norm_constant`.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrliczReport {
    pub params: OrliczParams,
    pub n: Vec<i64>,
    pub replications: u64,
    /// `||g_S||_{psi_beta}` per part.
    pub part_norms: Vec<(SubsetMask, f64)>,
    pub norm_sum: f64,
    /// `||S_n||_{psi_q}` from the simulated sums.
    pub sum_norm: f64,
    /// `||S_n||_{psi_q} / (|n|^{1/2} sum_S ||g_S||_{psi_beta})`.
    pub norm_constant: f64,
    /// Smallest `C` for which the tail bound covers every observed
    /// exceedance frequency; 0 when nothing was exceeded.
    pub tail_constant: f64,
    pub levels: Vec<OrliczLevel>,
    pub formula: &'static str,
}

/// Estimate both Orlicz constants for `S_n` over `[1, n]` and tabulate the
/// tail bound at each level.
#[allow(clippy::too_many_arguments)]
pub fn orlicz_tail_bound(
    field: &CoefficientField,
    dec: &Decomposition,
    model: &InnovationModel,
    q: f64,
    n: &MultiIndex,
    levels: &[f64],
    replications: u64,
    seed: u64,
) -> Result<OrliczReport> {
    let params = OrliczParams::new(q, field.dimension())?;
    n.check_dim(field.dimension())?;
    if dec.dimension() != field.dimension() {
        return Err(Error::DimensionMismatch {
            expected: field.dimension(),
            found: dec.dimension(),
        });
    }
    let part_norms = dec
        .parts()
        .map(|(s, g)| Ok((s, orlicz_norm_estimate(g, model.law, &params.psi_beta, NORM_SAMPLES, seed)?)))
        .collect::<Result<Vec<_>>>()?;
    let norm_sum: f64 = part_norms.iter().map(|p| p.1).sum();
    let totals = partial_sum_totals(field, model, n, replications, seed)?;
    let sum_norm = luxemburg_norm(&totals, &params.psi_q)?;
    let root_volume = (n.product() as f64).sqrt();
    let norm_constant = if norm_sum > 0.0 { sum_norm / (root_volume * norm_sum) } else { 0.0 };

    let reps = totals.len() as f64;
    let mut tail_constant: f64 = 0.0;
    let levels = levels
        .iter()
        .map(|&x| {
            let exceedances = totals.iter().filter(|&&s| s > x).count() as u64;
            let empirical = exceedances as f64 / reps;
            if exceedances > 0 && norm_sum > 0.0 {
                tail_constant = tail_constant.max(params.scale_for(x, empirical) / (root_volume * norm_sum));
            }
            let bound = params.tail_bound(x, norm_constant * root_volume * norm_sum);
            OrliczLevel {
                x,
                exceedances,
                empirical,
                bound,
            }
        })
        .collect();
    Ok(OrliczReport {
        params,
        n: n.coords().to_vec(),
        replications,
        part_norms,
        norm_sum,
        sum_norm,
        norm_constant,
        tail_constant,
        levels,
        formula: ORLICZ_TAIL_FORMULA,
    })
}

/// Decay of `-ln P(S_n > |n|)` across block sizes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayFit {
    pub q: f64,
    /// `q/2`: the bound decays like `exp(-c |n|^{q/2})` at `x = |n|`.
    pub target_exponent: f64,
    pub volumes: Vec<f64>,
    pub neg_log_tails: Vec<f64>,
    pub relative_errors: Vec<f64>,
    /// Slope of `ln(-ln P)` against `ln |n|`.
    pub fitted_exponent: f64,
    pub r_squared: f64,
    /// `fitted >= target / 2`: the empirical tail decays at least as fast as
    /// the bound allows, up to a factor 2 in the exponent.
    pub consistent: bool,
    /// `target / 2 <= fitted <= 2 target`.
    pub within_factor_two: bool,
}

/// Tilted estimates of `P(S_n > |n|)` for each block size, and the fitted
/// growth exponent of `-ln P`.
pub fn orlicz_decay_fit(
    field: &CoefficientField,
    model: &InnovationModel,
    q: f64,
    sizes: &[MultiIndex],
    replications: u64,
    seed: u64,
) -> Result<DecayFit> {
    OrliczParams::new(q, field.dimension())?;
    if sizes.len() < 2 {
        return Err(Error::InvalidInput("decay fit needs at least two block sizes".into()));
    }
    let mut volumes = Vec::new();
    let mut neg_log_tails = Vec::new();
    let mut relative_errors = Vec::new();
    for n in sizes {
        let weights = partial_sum_coefficients(field, n, model.site_budget)?;
        let volume = n.product() as f64;
        let est = tilted_tail_probability(&weights, model.law, volume, replications, seed)?;
        if !est.log_probability.is_finite() {
            return Err(Error::InvalidInput(format!(
                "P(S_n > |n|) is zero or unobserved for n = {n}; the decay exponent is undefined"
            )));
        }
        volumes.push(volume);
        neg_log_tails.push(-est.log_probability);
        relative_errors.push(est.relative_error);
    }
    let x: Vec<f64> = volumes.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = neg_log_tails.iter().map(|v| v.ln()).collect();
    let (fitted_exponent, r_squared) = linear_fit(&x, &y);
    let target = q / 2.0;
    Ok(DecayFit {
        q,
        target_exponent: target,
        volumes,
        neg_log_tails,
        relative_errors,
        fitted_exponent,
        r_squared,
        consistent: fitted_exponent >= target / 2.0,
        within_factor_two: fitted_exponent >= target / 2.0 && fitted_exponent <= 2.0 * target,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_and_young_functions() {
        let p = OrliczParams::new(2.0 / 3.0, 1).unwrap();
        assert!((p.beta - 1.0).abs() < 1e-15);
        assert!((p.psi_q.h - 0.5f64.powf(1.5)).abs() < 1e-15);
        // beta rounds to just below 1
        assert!(p.psi_beta.h < 1e-15);
        assert!(OrliczParams::new(1.0, 2).is_err());
        assert!(OrliczParams::new(0.0, 1).is_err());
        for a in [0.2, 0.5, 2.0 / 3.0, 1.0, 1.5, 2.0] {
            let psi = YoungFunction::new(a).unwrap();
            assert_eq!(psi.eval(0.0), 0.0);
            assert!(psi.is_convex_on_grid(0.01, 2000), "alpha = {a}");
        }
    }

    #[test]
    fn inverse_at_one_solves_the_equation() {
        for a in [0.3, 2.0 / 3.0, 1.0, 2.0] {
            let psi = YoungFunction::new(a).unwrap();
            // plain bisection on psi(t) = 1
            let (mut lo, mut hi) = (0.0, 100.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if psi.eval(mid) < 1.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            assert!((psi.inverse_at_one() - lo).abs() < 1e-10 * lo.max(1.0), "alpha = {a}");
        }
    }

    #[test]
    fn luxemburg_constant_and_zero_samples() {
        let psi = YoungFunction::new(2.0 / 3.0).unwrap();
        let c = luxemburg_norm(&[2.5; 10], &psi).unwrap();
        let want = 2.5 / psi.inverse_at_one();
        assert!(((c - want) / want).abs() < 1e-6, "{c} vs {want}");
        assert!(c >= want);
        assert_eq!(luxemburg_norm(&[0.0, 0.0], &psi).unwrap(), 0.0);
        assert!(luxemburg_norm(&[], &psi).is_err());
    }

    #[test]
    fn luxemburg_homogeneity_and_monotonicity() {
        let psi = YoungFunction::new(1.0).unwrap();
        let z: Vec<f64> = (1..50).map(|i| (i as f64 * 0.37).sin() * 3.0).collect();
        let base = luxemburg_norm(&z, &psi).unwrap();
        let doubled: Vec<f64> = z.iter().map(|v| v * 4.0).collect();
        assert_eq!(luxemburg_norm(&doubled, &psi).unwrap(), 4.0 * base);
        let scaled: Vec<f64> = z.iter().map(|v| v * 1.7).collect();
        assert!((luxemburg_norm(&scaled, &psi).unwrap() / (1.7 * base) - 1.0).abs() < 2e-6);
        let bigger: Vec<f64> = z.iter().map(|v| v.abs() + 0.01).collect();
        assert!(luxemburg_norm(&bigger, &psi).unwrap() >= base);
    }

    #[test]
    fn calibrated_scale_reaches_frequency() {
        let p = OrliczParams::new(0.5, 1).unwrap();
        let scale = p.scale_for(7.0, 0.01);
        assert!((p.tail_bound(7.0, scale) - 0.01).abs() < 1e-12);
    }
}
