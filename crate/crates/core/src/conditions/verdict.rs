//! Convergence verdicts for partial-sum sequences over a cutoff ladder.
//!
//! A sequence is *converged* when its last two partials agree to a relative
//! 1e-6. Otherwise it is *diverging* when the increments are all positive
//! and their growth matches a power law `c N^g` or a log-power law
//! `c (ln N)^g`:
//!
//! * the increments per unit of `ln N`, `delta_t = (P_t - P_{t-1}) / ln(N_t / N_{t-1})`,
//!   behave like `g c N^g` (power) or `g c (ln N)^{g-1}` (log-power);
//! * power: the slope of `ln delta` against `ln N` exceeds 0.05 with R^2 > 0.9;
//! * log-power: `P` is increasing in `ln N` with R^2 > 0.9 and the slope of
//!   `ln delta` against `ln ln N` exceeds -1/2, i.e. `g > 1/2`.
//!
//! Everything else, including summable tails that have not yet settled, is
//! *inconclusive*.

use serde::Serialize;

pub const CONVERGENCE_RTOL: f64 = 1e-6;
pub const MIN_R_SQUARED: f64 = 0.9;
pub const MIN_POWER_SLOPE: f64 = 0.05;
pub const MIN_LOG_EXPONENT: f64 = 0.5;
pub const MIN_LADDER_LEN: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Converged,
    Diverging,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Converged => "converged",
            Verdict::Diverging => "diverging",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GrowthModel {
    Power,
    Log,
}

/// Fitted growth law of a diverging sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthFit {
    pub model: GrowthModel,
    /// `g` in `c N^g` or `c (ln N)^g`.
    pub exponent: f64,
    pub r_squared: f64,
}

/// Least-squares line `y = a + b x`; returns `(b, r_squared)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if sxx == 0.0 {
        return (0.0, 0.0);
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    (slope, r2)
}

/// Relative change between the last two partials is within tolerance.
pub fn has_settled(partials: &[f64]) -> bool {
    match partials {
        [.., a, b] => {
            let scale = a.abs().max(b.abs());
            scale == 0.0 || (b - a).abs() <= CONVERGENCE_RTOL * scale
        }
        _ => false,
    }
}

/// Classify a partial-sum sequence observed at increasing cutoffs.
pub fn classify(cutoffs: &[u64], partials: &[f64]) -> (Verdict, Option<GrowthFit>) {
    assert_eq!(cutoffs.len(), partials.len());
    if has_settled(partials) {
        return (Verdict::Converged, None);
    }
    match fit_growth(cutoffs, partials) {
        Some(fit) => (Verdict::Diverging, Some(fit)),
        None => (Verdict::Inconclusive, None),
    }
}

fn fit_growth(cutoffs: &[u64], partials: &[f64]) -> Option<GrowthFit> {
    if cutoffs.len() < MIN_LADDER_LEN || cutoffs[0] == 0 {
        return None;
    }
    let mut ln_n = Vec::new();
    let mut ln_delta = Vec::new();
    for t in 1..cutoffs.len() {
        let step = partials[t] - partials[t - 1];
        if cutoffs[t] <= cutoffs[t - 1] || !(step > 0.0) {
            return None;
        }
        let width = (cutoffs[t] as f64 / cutoffs[t - 1] as f64).ln();
        ln_n.push((cutoffs[t] as f64).ln());
        ln_delta.push((step / width).ln());
    }

    let (power_slope, power_r2) = linear_fit(&ln_n, &ln_delta);
    if power_slope > MIN_POWER_SLOPE && power_r2 > MIN_R_SQUARED {
        return Some(GrowthFit {
            model: GrowthModel::Power,
            exponent: power_slope,
            r_squared: power_r2,
        });
    }

    let all_ln: Vec<f64> = cutoffs.iter().map(|&n| (n as f64).ln()).collect();
    let (level_slope, level_r2) = linear_fit(&all_ln, partials);
    // ln ln N needs N > e
    let (x, y): (Vec<f64>, Vec<f64>) = ln_n
        .iter()
        .zip(&ln_delta)
        .filter(|(l, _)| **l > 1.0)
        .map(|(l, d)| (l.ln(), *d))
        .unzip();
    if x.len() < MIN_LADDER_LEN - 1 {
        return None;
    }
    let (loglog_slope, _) = linear_fit(&x, &y);
    let exponent = 1.0 + loglog_slope;
    if level_slope > 0.0 && level_r2 > MIN_R_SQUARED && exponent > MIN_LOG_EXPONENT {
        return Some(GrowthFit {
            model: GrowthModel::Log,
            exponent,
            r_squared: level_r2,
        });
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ladder(from: u32, to: u32) -> Vec<u64> {
        (from..=to).map(|e| 1u64 << e).collect()
    }

    #[test]
    fn settled_sequences_converge() {
        let n = ladder(4, 10);
        let p: Vec<f64> = n.iter().map(|&k| 2.0 - 1e-9 / k as f64).collect();
        assert_eq!(classify(&n, &p).0, Verdict::Converged);
        assert_eq!(classify(&[1, 2], &[0.0, 0.0]).0, Verdict::Converged);
    }

    #[test]
    fn harmonic_growth_is_logarithmic() {
        let n = ladder(10, 20);
        let p: Vec<f64> = n.iter().map(|&k| (1..=k).map(|i| 1.0 / i as f64).sum()).collect();
        let (v, fit) = classify(&n, &p);
        assert_eq!(v, Verdict::Diverging);
        let fit = fit.unwrap();
        assert_eq!(fit.model, GrowthModel::Log);
        assert!((fit.exponent - 1.0).abs() < 0.05, "{fit:?}");
    }

    #[test]
    fn square_root_growth_is_power() {
        let n = ladder(6, 12);
        let p: Vec<f64> = n.iter().map(|&k| (k as f64).sqrt() + 3.0).collect();
        let (v, fit) = classify(&n, &p);
        assert_eq!(v, Verdict::Diverging);
        let fit = fit.unwrap();
        assert_eq!(fit.model, GrowthModel::Power);
        assert!((fit.exponent - 0.5).abs() < 1e-6);
    }

    #[test]
    fn slowly_settling_summable_tail_is_inconclusive() {
        let n = ladder(4, 12);
        let p: Vec<f64> = n.iter().map(|&k| 1.0 - 1.0 / (k as f64).sqrt()).collect();
        assert_eq!(classify(&n, &p).0, Verdict::Inconclusive);
    }

    #[test]
    fn short_or_nonmonotone_ladders_are_inconclusive() {
        assert_eq!(classify(&[2, 4, 8], &[1.0, 2.0, 3.0]).0, Verdict::Inconclusive);
        assert_eq!(classify(&[2, 4, 8, 16], &[1.0, 2.0, 1.5, 3.0]).0, Verdict::Inconclusive);
    }
}
