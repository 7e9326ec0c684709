//! Moment and large-deviation bounds for rectangular partial sums.

use serde::Serialize;

use super::{check_order, even_integer, lp_norm, mean_and_se, BoundKind, BoundReport, LpNorm};
use crate::decomposition::{decompose, Decomposition};
use crate::error::{Error, Result};
use crate::fieldsim::{linear_form_moment, partial_sum_coefficients, partial_sum_totals, InnovationModel};
use crate::lattice::{CoefficientField, MultiIndex, SubsetMask};

pub const MOMENT_FORMULA: &str = "(2p)^(dp/2) |n|^(p/2) ||X||_p^p";
pub const NORM_FORMULA: &str = "2^(2d) p^(d/2) |n|^(1/2) sum_S ||g_S||_p";
pub const TAIL_FORMULA: &str = "2^(2dp) p^(dp/2) (sum_S ||g_S||_p)^p x^(-p) |n|^(-p/2)";

/// `(2p)^{dp/2}`.
pub fn moment_constant(dim: usize, p: f64) -> f64 {
    (2.0 * p).powf(dim as f64 * p / 2.0)
}

/// `2^{2d} p^{d/2}`.
pub fn norm_bound_constant(dim: usize, p: f64) -> f64 {
    let d = dim as f64;
    (2.0 * d).exp2() * p.powf(d / 2.0)
}

/// `2^{2dp} p^{dp/2}`.
pub fn tail_constant(dim: usize, p: f64) -> f64 {
    let d = dim as f64;
    (2.0 * d * p).exp2() * p.powf(d * p / 2.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentReport {
    pub bound: BoundReport,
    /// `||X_1||_p`.
    pub summand_norm: LpNorm,
    /// `E S_n^p` from the innovation weights of `S_n`, for even integer `p`.
    pub exact_moment: Option<f64>,
}

fn is_orthomartingale(field: &CoefficientField) -> Result<bool> {
    let dec = decompose(field)?;
    let full = SubsetMask::full(field.dimension());
    let pure = dec.parts().all(|(s, g)| s == full || g.is_zero());
    Ok(pure)
}

/// Empirical `E|S_n|^p` for an orthomartingale difference field against
/// `(2p)^{dp/2} |n|^{p/2} ||X_1||_p^p`.
pub fn moment_inequality(
    field: &CoefficientField,
    model: &InnovationModel,
    n: &MultiIndex,
    p: f64,
    replications: u64,
    seed: u64,
) -> Result<MomentReport> {
    check_order(p)?;
    n.check_dim(field.dimension())?;
    if !is_orthomartingale(field)? {
        return Err(Error::InvalidInput(
            "moment bound needs an orthomartingale difference field (only the full-subset part may be nonzero)".into(),
        ));
    }
    let d = field.dimension();
    let volume = n.product() as f64;
    let summand_norm = lp_norm(field, model.law, p, seed)?;
    let totals = partial_sum_totals(field, model, n, replications, seed)?;
    let powers: Vec<f64> = totals.iter().map(|s| s.abs().powf(p)).collect();
    let (empirical, se) = mean_and_se(&powers);
    let constant = moment_constant(d, p);
    let bound = constant * volume.powf(p / 2.0) * summand_norm.upper.powf(p);
    let exact_moment = match even_integer(p) {
        Some(r) => partial_sum_coefficients(field, n, model.site_budget)
            .ok()
            .map(|c| linear_form_moment(c.iter().map(|(_, _, v)| v), model.law, r)),
        None => None,
    };
    Ok(MomentReport {
        bound: BoundReport::new(
            BoundKind::Moment,
            p,
            n.coords().to_vec(),
            None,
            empirical,
            se,
            constant,
            bound,
            MOMENT_FORMULA,
        ),
        summand_norm,
        exact_moment,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailReport {
    pub part_norms: Vec<(SubsetMask, LpNorm)>,
    /// `sum_S ||g_S||_p`, using the upper estimates.
    pub norm_sum: f64,
    pub norm: BoundReport,
    pub tails: Vec<BoundReport>,
}

impl TailReport {
    pub fn all_hold(&self) -> bool {
        self.norm.holds && self.tails.iter().all(|t| t.holds)
    }
}

/// `||S_n||_p` and `P(S_n > x |n|)` against the bounds built from the
/// decomposition norms, at each level in `levels`.
#[allow(clippy::too_many_arguments)]
pub fn tail_bound_check(
    field: &CoefficientField,
    dec: &Decomposition,
    model: &InnovationModel,
    n: &MultiIndex,
    p: f64,
    levels: &[f64],
    replications: u64,
    seed: u64,
) -> Result<TailReport> {
    check_order(p)?;
    n.check_dim(field.dimension())?;
    if dec.dimension() != field.dimension() {
        return Err(Error::DimensionMismatch {
            expected: field.dimension(),
            found: dec.dimension(),
        });
    }
    let d = field.dimension();
    let volume = n.product() as f64;
    let part_norms = dec
        .parts()
        .map(|(s, g)| Ok((s, lp_norm(g, model.law, p, seed)?)))
        .collect::<Result<Vec<_>>>()?;
    let norm_sum: f64 = part_norms.iter().map(|(_, e)| e.upper).sum();

    let totals = partial_sum_totals(field, model, n, replications, seed)?;
    let powers: Vec<f64> = totals.iter().map(|s| s.abs().powf(p)).collect();
    let (moment, moment_se) = mean_and_se(&powers);
    let empirical_norm = moment.powf(1.0 / p);
    let norm_se = if moment > 0.0 { moment_se * empirical_norm / (p * moment) } else { 0.0 };
    let c17 = norm_bound_constant(d, p);
    let norm = BoundReport::new(
        BoundKind::Norm,
        p,
        n.coords().to_vec(),
        None,
        empirical_norm,
        norm_se,
        c17,
        c17 * volume.sqrt() * norm_sum,
        NORM_FORMULA,
    );

    let c18 = tail_constant(d, p);
    let reps = totals.len() as f64;
    let tails = levels
        .iter()
        .map(|&x| {
            if !(x > 0.0) {
                return Err(Error::InvalidInput(format!("tail level {x} must be positive")));
            }
            let hits = totals.iter().filter(|&&s| s > x * volume).count() as f64;
            let freq = hits / reps;
            let bound = c18 * norm_sum.powf(p) * x.powf(-p) * volume.powf(-p / 2.0);
            Ok(BoundReport::new(
                BoundKind::Tail,
                p,
                n.coords().to_vec(),
                Some(x),
                freq,
                (freq * (1.0 - freq) / reps).sqrt(),
                c18,
                bound,
                TAIL_FORMULA,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TailReport {
        part_norms,
        norm_sum,
        norm,
        tails,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fieldsim::InnovationLaw;

    #[test]
    fn constants() {
        assert_eq!(moment_constant(1, 4.0), 64.0);
        assert_eq!(moment_constant(2, 4.0), 4096.0);
        assert_eq!(norm_bound_constant(1, 2.0), 4.0 * 2f64.sqrt());
        assert_eq!(tail_constant(1, 2.0), 32.0);
        assert_eq!(moment_constant(3, 6.0).to_bits(), moment_constant(3, 6.0).to_bits());
    }

    #[test]
    fn rejects_non_martingale_and_low_order() {
        let model = InnovationModel::new(InnovationLaw::Rademacher, 1);
        let ma = CoefficientField::from_pairs(1, [(MultiIndex::from([0]), 1.0), (MultiIndex::from([1]), 1.0)]).unwrap();
        assert!(moment_inequality(&ma, &model, &MultiIndex::from([10]), 4.0, 10, 0).is_err());
        let e = CoefficientField::from_pairs(1, [(MultiIndex::from([0]), 1.0)]).unwrap();
        assert!(moment_inequality(&e, &model, &MultiIndex::from([10]), 1.0, 10, 0).is_err());
    }

    #[test]
    fn unit_block_is_trivial() {
        let model = InnovationModel::new(InnovationLaw::Gaussian, 1);
        let e = CoefficientField::from_pairs(2, [(MultiIndex::zeros(2), 1.0)]).unwrap();
        let r = moment_inequality(&e, &model, &MultiIndex::ones(2), 4.0, 200, 3).unwrap();
        assert_eq!(r.exact_moment, Some(3.0));
        assert!(r.bound.holds && r.bound.margin_ratio < 1.0);
    }

    #[test]
    fn huge_levels_are_vacuous() {
        let model = InnovationModel::new(InnovationLaw::Rademacher, 1);
        let e = CoefficientField::from_pairs(1, [(MultiIndex::from([0]), 1.0)]).unwrap();
        let dec = decompose(&e).unwrap();
        let r = tail_bound_check(&e, &dec, &model, &MultiIndex::from([64]), 2.0, &[2.0], 200, 1).unwrap();
        // |S_n| <= n < 2n
        assert_eq!(r.tails[0].empirical, 0.0);
        assert!(r.all_hold());
        assert_eq!(r.norm_sum, 1.0);
    }
}
