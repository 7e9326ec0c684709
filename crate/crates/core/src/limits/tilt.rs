//! Exponentially tilted sampling for far tails of linear forms.
//!
//! `S = sum_m c_m e_m` is sampled with each innovation tilted by `theta c_m`,
//! where `theta` puts the tilted mean of `S` at the level `x`. The
//! likelihood ratio `exp(-theta S + sum_m L(theta c_m))`, with `L` the log
//! moment generating function of the innovation law, reweights the hits.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fieldsim::{unit_open, InnovationLaw, Purpose, SiteStream};
use crate::lattice::CoefficientField;

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Tail probability estimate in log form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TiltEstimate {
    pub level: f64,
    pub theta: f64,
    /// `ln P(S > level)`; `-inf` when the level is unreachable.
    pub log_probability: f64,
    /// Standard error of the estimate relative to the estimate.
    pub relative_error: f64,
    pub hits: u64,
    pub replications: u64,
}

fn ln_sinhc(y: f64) -> f64 {
    // ln(sinh(y) / y) for y >= 0
    if y < 1e-4 {
        y * y / 6.0
    } else {
        y + (-(-2.0 * y).exp_m1()).ln() - (2.0 * y).ln()
    }
}

fn log_mgf(law: InnovationLaw, t: f64) -> f64 {
    match law {
        InnovationLaw::Gaussian => t * t / 2.0,
        InnovationLaw::Rademacher => {
            let a = t.abs();
            a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
        }
        InnovationLaw::Uniform => ln_sinhc(SQRT3 * t.abs()),
    }
}

fn tilted_mean(law: InnovationLaw, t: f64) -> f64 {
    match law {
        InnovationLaw::Gaussian => t,
        InnovationLaw::Rademacher => t.tanh(),
        InnovationLaw::Uniform => {
            let y = SQRT3 * t.abs();
            // sqrt3 (coth y - 1/y)
            let m = if y < 1e-4 {
                y / 3.0
            } else {
                let q = (-2.0 * y).exp();
                (1.0 + q) / (1.0 - q) - 1.0 / y
            };
            SQRT3 * m * t.signum()
        }
    }
}

fn tilted_draw(law: InnovationLaw, t: f64, x: u64, y: u64) -> f64 {
    match law {
        InnovationLaw::Gaussian => t + law.transform(x, y),
        InnovationLaw::Rademacher => {
            let up = (1.0 + t.tanh()) / 2.0;
            if unit_open(x) <= up {
                1.0
            } else {
                -1.0
            }
        }
        InnovationLaw::Uniform => {
            let v = unit_open(x);
            let a = t.abs();
            if a * SQRT3 < 1e-12 {
                return SQRT3 * (2.0 * v - 1.0);
            }
            // inverse CDF of the density proportional to exp(a u) on [-sqrt3, sqrt3]
            let w = SQRT3 + (-(1.0 - v) * -(-2.0 * SQRT3 * a).exp_m1()).ln_1p() / a;
            w * t.signum()
        }
    }
}

fn max_reach(coefficients: &[(usize, Vec<i64>, f64)], law: InnovationLaw) -> f64 {
    let scale = match law {
        InnovationLaw::Gaussian => return f64::INFINITY,
        InnovationLaw::Rademacher => 1.0,
        InnovationLaw::Uniform => SQRT3,
    };
    scale * coefficients.iter().map(|c| c.2.abs()).sum::<f64>()
}

/// Solve `sum_m c_m L'(theta c_m) = x` for `theta >= 0`.
fn saddle_point(coefficients: &[(usize, Vec<i64>, f64)], law: InnovationLaw, x: f64) -> f64 {
    let mean = |theta: f64| -> f64 { coefficients.iter().map(|c| c.2 * tilted_mean(law, theta * c.2)).sum() };
    if x <= 0.0 {
        return 0.0;
    }
    let mut hi = 1.0;
    while mean(hi) < x {
        hi *= 2.0;
        if hi > 1e300 {
            break;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean(mid) < x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Estimate `P(S > level)` for `S = sum c_{k,s} e_k(s)` with `weights`
/// holding `c` indexed by channel and site.
pub fn tilted_tail_probability(
    weights: &CoefficientField,
    law: InnovationLaw,
    level: f64,
    replications: u64,
    seed: u64,
) -> Result<TiltEstimate> {
    if replications == 0 {
        return Err(Error::InvalidInput("at least one replication is needed".into()));
    }
    let coefficients: Vec<(usize, Vec<i64>, f64)> =
        weights.iter().map(|(k, s, c)| (k, s.coords().to_vec(), c)).collect();
    if level >= max_reach(&coefficients, law) {
        return Ok(TiltEstimate {
            level,
            theta: f64::INFINITY,
            log_probability: f64::NEG_INFINITY,
            relative_error: 0.0,
            hits: 0,
            replications,
        });
    }
    let theta = saddle_point(&coefficients, law, level);
    let log_norm: f64 = coefficients.iter().map(|c| log_mgf(law, theta * c.2)).sum();
    let channels = weights.channel_count();

    // log likelihood ratio of each hit, None for misses
    let log_weights: Vec<Option<f64>> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let mut streams: Vec<SiteStream> = (0..channels)
                .map(|k| SiteStream::new(seed, Purpose::ImportanceSampling, r, k, law))
                .collect();
            let mut s = 0.0;
            for (k, site, c) in &coefficients {
                let stream = &mut streams[*k];
                stream.seek(site);
                let (x, y) = stream.next_words();
                s += c * tilted_draw(law, theta * c, x, y);
            }
            (s > level).then(|| -theta * s + log_norm)
        })
        .collect();

    let hits: Vec<f64> = log_weights.iter().flatten().copied().collect();
    let n = replications as f64;
    if hits.is_empty() {
        return Ok(TiltEstimate {
            level,
            theta,
            log_probability: f64::NEG_INFINITY,
            relative_error: f64::INFINITY,
            hits: 0,
            replications,
        });
    }
    let top = hits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = hits.iter().map(|w| (w - top).exp()).collect();
    let sum: f64 = scaled.iter().sum();
    let sum_sq: f64 = scaled.iter().map(|w| w * w).sum();
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
    Ok(TiltEstimate {
        level,
        theta,
        log_probability: top + mean.ln(),
        relative_error: (var / n).sqrt() / mean,
        hits: hits.len() as u64,
        replications,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::MultiIndex;
    use statrs::function::erf::erfc;

    fn iid(n: i64) -> CoefficientField {
        CoefficientField::from_pairs(1, (1..=n).map(|s| (MultiIndex::from([s]), 1.0))).unwrap()
    }

    #[test]
    fn tilted_means_match_mgf_derivative() {
        for law in [InnovationLaw::Gaussian, InnovationLaw::Rademacher, InnovationLaw::Uniform] {
            for t in [-3.0f64, -0.2, 1e-6, 0.7, 5.0, 40.0] {
                let h = 1e-5 * (1.0 + t.abs());
                let numeric = (log_mgf(law, t + h) - log_mgf(law, t - h)) / (2.0 * h);
                assert!((numeric - tilted_mean(law, t)).abs() < 1e-6, "{law:?} t={t}");
            }
        }
    }

    #[test]
    fn uniform_tilted_draws_have_tilted_mean() {
        let t = 1.3;
        let mut stream = SiteStream::new(4, Purpose::ImportanceSampling, 0, 0, InnovationLaw::Uniform);
        let n = 200_000;
        let mut acc = 0.0;
        for i in 0..n {
            stream.seek(&[i]);
            let (x, y) = stream.next_words();
            let v = tilted_draw(InnovationLaw::Uniform, t, x, y);
            assert!(v.abs() <= SQRT3 + 1e-12);
            acc += v;
        }
        assert!((acc / n as f64 - tilted_mean(InnovationLaw::Uniform, t)).abs() < 0.01);
    }

    #[test]
    fn gaussian_far_tail_matches_closed_form() {
        for n in [128i64, 512] {
            let est = tilted_tail_probability(&iid(n), InnovationLaw::Gaussian, n as f64, 4000, 7).unwrap();
            // P(N(0, n) > n) = erfc(sqrt(n / 2)) / 2
            let exact = (0.5 * erfc((n as f64 / 2.0).sqrt())).ln();
            let tol = 4.0 * est.relative_error + 0.01;
            assert!(est.relative_error < 0.2);
            assert!((est.log_probability - exact).abs() < tol, "n={n}: {} vs {exact} ({est:?})", est.log_probability);
        }
    }

    #[test]
    fn rademacher_tail_matches_binomial() {
        // P(sum of 20 signs > 10) = P(Bin(20, 1/2) >= 16)
        let exact: f64 = (16..=20u64)
            .map(|k| {
                let c: f64 = (0..k).map(|i| (20 - i) as f64 / (i + 1) as f64).product();
                c / 2f64.powi(20)
            })
            .sum();
        let est = tilted_tail_probability(&iid(20), InnovationLaw::Rademacher, 10.0, 20_000, 3).unwrap();
        assert!((est.log_probability - exact.ln()).abs() < 0.05, "{} vs {}", est.log_probability, exact.ln());
        let none = tilted_tail_probability(&iid(20), InnovationLaw::Rademacher, 20.0, 10, 3).unwrap();
        assert_eq!(none.log_probability, f64::NEG_INFINITY);
    }
}
