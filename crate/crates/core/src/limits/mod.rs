//! Monte Carlo checks of the limit behaviour of rectangular partial sums:
//! normal approximation, moment and large-deviation bounds, and Orlicz-norm
//! tail bounds.
//!
//! All constants are evaluated from their closed forms; nothing is fitted
//! except the unspecified constant of the Orlicz tail bound, which is
//! reported as a calibration.

mod bounds;
pub mod orlicz;
mod tilt;
mod wip;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fieldsim::{linear_form_moment, InnovationLaw, Purpose, SiteStream};
use crate::lattice::CoefficientField;

pub use bounds::{
    moment_constant, moment_inequality, norm_bound_constant, tail_bound_check, tail_constant, MomentReport,
    TailReport, MOMENT_FORMULA, NORM_FORMULA, TAIL_FORMULA,
};
pub use orlicz::{
    luxemburg_norm, orlicz_decay_fit, orlicz_norm_estimate, orlicz_tail_bound, DecayFit, OrliczLevel, OrliczParams,
    OrliczReport, YoungFunction, ORLICZ_TAIL_FORMULA,
};
pub use tilt::{tilted_tail_probability, TiltEstimate};
pub use wip::{
    wip_experiment, WipReport, DEGENERATE_VARIANCE, KS_LEVEL, MIN_REPLICATIONS, VARIANCE_TOLERANCE,
};

/// Draws used when an `L^p` or Orlicz norm has no exact evaluation.
pub const NORM_SAMPLES: u64 = 100_000;

/// Which side of an inequality a report describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    /// `E|S_n|^p` against the orthomartingale moment bound.
    Moment,
    /// `||S_n||_p` against the sum of `||g_S||_p`.
    Norm,
    /// `P(S_n > x |n|)` against the Markov-type bound.
    Tail,
}

/// One empirical quantity compared with a closed-form bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub kind: BoundKind,
    /// Moment order.
    pub p: f64,
    pub n: Vec<i64>,
    /// Level, for tail reports.
    pub x: Option<f64>,
    pub empirical: f64,
    pub standard_error: f64,
    pub constant: f64,
    pub bound: f64,
    /// `empirical / bound`.
    pub margin_ratio: f64,
    pub holds: bool,
    pub formula: &'static str,
}

impl BoundReport {
    #[allow(clippy::too_many_arguments)]
    fn new(
        kind: BoundKind,
        p: f64,
        n: Vec<i64>,
        x: Option<f64>,
        empirical: f64,
        standard_error: f64,
        constant: f64,
        bound: f64,
        formula: &'static str,
    ) -> Self {
        let margin_ratio = if empirical == 0.0 { 0.0 } else { empirical / bound };
        BoundReport {
            kind,
            p,
            n,
            x,
            empirical,
            standard_error,
            constant,
            bound,
            margin_ratio,
            holds: empirical <= bound,
            formula,
        }
    }
}

/// How a norm was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormMethod {
    Exact,
    MonteCarlo,
}

/// `||Y||_p` for `Y = sum a_{k,j} e_k(-j)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LpNorm {
    pub value: f64,
    /// Value used in bounds: equal to `value` when exact, otherwise the
    /// estimate of `E|Y|^p` raised by two standard errors.
    pub upper: f64,
    pub standard_error: f64,
    pub method: NormMethod,
}

fn check_order(p: f64) -> Result<()> {
    if !(p >= 2.0) || !p.is_finite() {
        return Err(Error::InvalidInput(format!("moment order p = {p} must be at least 2")));
    }
    Ok(())
}

fn even_integer(p: f64) -> Option<u32> {
    (p.fract() == 0.0 && p <= 64.0 && (p as u32) % 2 == 0).then_some(p as u32)
}

/// Monte Carlo draws of `Y = sum a_{k,j} e_k(-j)`, one per sample index.
pub(crate) fn sample_linear_form(field: &CoefficientField, law: InnovationLaw, samples: u64, seed: u64) -> Vec<f64> {
    let terms: Vec<(usize, Vec<i64>, f64)> = field
        .iter()
        .map(|(k, j, a)| (k, j.coords().iter().map(|c| -c).collect(), a))
        .collect();
    (0..samples)
        .into_par_iter()
        .map(|r| {
            let mut streams: Vec<SiteStream> = (0..field.channel_count())
                .map(|k| SiteStream::new(seed, Purpose::NormEstimate, r, k, law))
                .collect();
            terms.iter().map(|(k, site, a)| a * streams[*k].draw_at(site)).sum()
        })
        .collect()
}

/// `||Y||_p` for the linear form with the coefficients of `field`.
///
/// Exact for `p = 2`, even integer `p`, Gaussian innovations and single-term
/// forms; Monte Carlo with [`NORM_SAMPLES`] draws otherwise.
pub fn lp_norm(field: &CoefficientField, law: InnovationLaw, p: f64, seed: u64) -> Result<LpNorm> {
    check_order(p)?;
    let exact = |value: f64| LpNorm {
        value,
        upper: value,
        standard_error: 0.0,
        method: NormMethod::Exact,
    };
    let coefficients: Vec<f64> = field.iter().map(|(_, _, a)| a).collect();
    if coefficients.is_empty() {
        return Ok(exact(0.0));
    }
    let sigma2 = field.sum_of_squares();
    if p == 2.0 {
        return Ok(exact(sigma2.sqrt()));
    }
    if let Some(r) = even_integer(p) {
        return Ok(exact(linear_form_moment(coefficients, law, r).powf(1.0 / p)));
    }
    if law == InnovationLaw::Gaussian || coefficients.len() == 1 {
        return Ok(exact(sigma2.sqrt() * law.absolute_moment(p).powf(1.0 / p)));
    }
    let draws = sample_linear_form(field, law, NORM_SAMPLES, seed);
    let powers: Vec<f64> = draws.iter().map(|y| y.abs().powf(p)).collect();
    let (mean, se) = mean_and_se(&powers);
    Ok(LpNorm {
        value: mean.powf(1.0 / p),
        upper: (mean + 2.0 * se).powf(1.0 / p),
        standard_error: se,
        method: NormMethod::MonteCarlo,
    })
}

/// Sample mean and its standard error.
pub(crate) fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
