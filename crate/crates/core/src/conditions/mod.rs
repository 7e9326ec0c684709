//! Partial sums of the conditions governing the martingale plus coboundary
//! representation, evaluated over a ladder of cutoffs.
//!
//! | id | series |
//! |----|--------|
//! | `HEYDE` | `sum_S sum_{j_q >= 0 (q in S), j_q <= 0 (q not in S)} sum_k (orthant tail of a_k at j)^2`, tails `>=` on `S` and `<=` off `S` |
//! | `HEYDE_ADAPTED` | `sum_{j >= 0} sum_k (sum_{i >= j} a_{k,i})^2` |
//! | `GORDIN` | `sum_{j >= 0} (sum_k sum_{i >= j} a_{k,i}^2)^{1/2}` |
//! | `WEIGHTED_PROJECTION` | `sum_i prod_q ibar_q^2 sum_k a_{k,i}^2`, `ibar = i + 1` for `i >= 0` and `i` otherwise |
//! | `CONDEXP_SERIES` | L^2 norm of `sum_{0 <= i <= N} E(U_i f | F_0)` |
//! | `CONDEXP_SERIES_SHIFTED` | the same series conditioned on `F_{-1}` |
//! | `HANNAN` | `sum_i (sum_k a_{k,i}^2)^{1/2}` |
//!
//! For every cutoff the field is materialized by its [`GeneratorRule`] and
//! the series is evaluated exactly on that finite support. The Heyde report
//! also carries the transfer form `sum_S ||g_S||^2`, which equals the adapted
//! orthant form for adapted fields.

pub mod dyadic;
pub mod inequalities;
pub mod verdict;

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::decomposition::transfer_norms;
use crate::error::{Error, Result};
use crate::lattice::grid::{AxisSpec, CompressedSupport, Layers};
use crate::lattice::{BoxPoints, CoefficientField, GeneratorRule, MultiIndex, RuleKind, SubsetMask};

pub use inequalities::{
    coefficients_from_tail_norms, tail_norm_inequalities, tail_norms, tail_sum_check, tail_sum_constant,
    TailNormReport, TailSumCheck,
};
pub use verdict::{classify, GrowthFit, GrowthModel, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ConditionId {
    Heyde,
    HeydeAdapted,
    Gordin,
    WeightedProjection,
    CondexpSeries,
    CondexpSeriesShifted,
    Hannan,
}

impl ConditionId {
    pub const ALL: [ConditionId; 7] = [
        ConditionId::Heyde,
        ConditionId::HeydeAdapted,
        ConditionId::Gordin,
        ConditionId::WeightedProjection,
        ConditionId::CondexpSeries,
        ConditionId::CondexpSeriesShifted,
        ConditionId::Hannan,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ConditionId::Heyde => "HEYDE",
            ConditionId::HeydeAdapted => "HEYDE_ADAPTED",
            ConditionId::Gordin => "GORDIN",
            ConditionId::WeightedProjection => "WEIGHTED_PROJECTION",
            ConditionId::CondexpSeries => "CONDEXP_SERIES",
            ConditionId::CondexpSeriesShifted => "CONDEXP_SERIES_SHIFTED",
            ConditionId::Hannan => "HANNAN",
        }
    }
}

impl fmt::Display for ConditionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which sigma-algebra the conditional-expectation series conditions on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Conditioning {
    /// `F_0`: coefficients at `l >= 0`.
    Origin,
    /// `F_{-1}`: coefficients at `l >= 1`.
    Lagged,
}

/// Partial sums of one condition over a cutoff ladder.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub condition: ConditionId,
    pub cutoffs: Vec<u64>,
    pub partials: Vec<f64>,
    pub verdict: Verdict,
    pub growth: Option<GrowthFit>,
    /// Heyde only: `sum_S ||g_S||^2` per cutoff.
    pub transfer_form_partials: Option<Vec<f64>>,
    /// Heyde only: `||g_S||^2` per subset at the last cutoff.
    pub subset_breakdown: Option<BTreeMap<SubsetMask, f64>>,
    /// Set when the verdict follows from the whole support being included.
    pub exact: bool,
}

impl ConditionReport {
    fn new(condition: ConditionId, rule: &GeneratorRule, cutoffs: &[u64], partials: Vec<f64>) -> Self {
        let exact = covers_support(rule, cutoffs.last().copied());
        let (verdict, growth) = if exact {
            (Verdict::Converged, None)
        } else {
            classify(cutoffs, &partials)
        };
        ConditionReport {
            condition,
            cutoffs: cutoffs.to_vec(),
            partials,
            verdict,
            growth,
            transfer_form_partials: None,
            subset_breakdown: None,
            exact,
        }
    }

    pub fn last(&self) -> f64 {
        self.partials.last().copied().unwrap_or(0.0)
    }

    /// Whether the partials are nondecreasing (up to a relative `1e-12`).
    pub fn is_monotone(&self) -> bool {
        self.partials
            .windows(2)
            .all(|w| w[1] >= w[0] - 1e-12 * w[0].abs().max(w[1].abs()))
    }
}

/// A finite-support explicit field at a cutoff past its support radius has
/// nothing left to add.
fn covers_support(rule: &GeneratorRule, cutoff: Option<u64>) -> bool {
    match (rule.kind(), cutoff) {
        (RuleKind::Explicit(f), Some(n)) => n >= support_radius(f),
        _ => false,
    }
}

/// Cutoff at which an explicit field is materialized whole.
pub fn support_radius(field: &CoefficientField) -> u64 {
    field
        .support_box()
        .map(|(lo, hi)| lo.coords().iter().chain(hi.coords()).map(|c| c.unsigned_abs()).max().unwrap_or(0))
        .unwrap_or(0)
}

fn check_ladder(cutoffs: &[u64]) -> Result<()> {
    if cutoffs.is_empty() {
        return Err(Error::InvalidInput("empty cutoff ladder".into()));
    }
    if cutoffs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("cutoff ladder must be strictly increasing".into()));
    }
    Ok(())
}

fn squares(s: &[f64]) -> f64 {
    s.iter().map(|x| x * x).sum()
}

/// `sum_{j >= 0} sum_k (sum_{i >= j} a_{k,i})^2`.
pub fn heyde_adapted_sum(field: &CoefficientField) -> Result<f64> {
    let specs = vec![AxisSpec::at_least(Some(0), None); field.dimension()];
    CompressedSupport::new(field).sum(Layers::Channels, &specs, squares)
}

/// Orthant form for general support, per subset `S`: anchors `j_q >= 0`
/// with tails `i_q >= j_q` on `S`, anchors `j_q <= 0` with tails
/// `i_q <= j_q` off `S`.
pub fn heyde_orthant_sums(field: &CoefficientField) -> Result<BTreeMap<SubsetMask, f64>> {
    let dim = field.dimension();
    let support = CompressedSupport::new(field);
    SubsetMask::all(dim)
        .map(|s| {
            let specs: Vec<AxisSpec> = (0..dim)
                .map(|q| {
                    if s.contains(q) {
                        AxisSpec::at_least(Some(0), None)
                    } else {
                        AxisSpec::at_most(None, Some(0), 0)
                    }
                })
                .collect();
            Ok((s, support.sum(Layers::Channels, &specs, squares)?))
        })
        .collect()
}

/// `sum_{j >= 0} (sum_k sum_{i >= j} a_{k,i}^2)^{1/2}` for an adapted field.
pub fn gordin_sum(field: &CoefficientField) -> Result<f64> {
    if !field.is_adapted() {
        return Err(Error::NotAdapted("the conditional-norm series is defined for adapted fields"));
    }
    let specs = vec![AxisSpec::at_least(Some(0), None); field.dimension()];
    CompressedSupport::new(field).sum(Layers::SquaredTotal, &specs, |s| s[0].max(0.0).sqrt())
}

/// `sum_i prod_q ibar_q^2 sum_k a_{k,i}^2`.
pub fn weighted_projection_sum(field: &CoefficientField) -> f64 {
    field
        .iter()
        .map(|(_, i, a)| {
            let w: f64 = i
                .coords()
                .iter()
                .map(|&c| {
                    let bar = if c >= 0 { c + 1 } else { c } as f64;
                    bar * bar
                })
                .product();
            w * a * a
        })
        .sum()
}

/// `sum_i (sum_k a_{k,i}^2)^{1/2}`.
pub fn hannan_sum(field: &CoefficientField) -> f64 {
    let mut per_index: BTreeMap<&MultiIndex, f64> = BTreeMap::new();
    for (_, i, a) in field.iter() {
        *per_index.entry(i).or_insert(0.0) += a * a;
    }
    per_index.values().map(|s| s.sqrt()).sum()
}

/// Coefficients of `sum_{i in [0, N]^d} E(U_i f | F)`: entry `l` equals
/// `sum_{i in [0, N]^d} a_{l + i}` for `l >= 0` (origin) or `l >= 1` (lagged).
pub fn conditional_expectation_series(field: &CoefficientField, n: u64, conditioning: Conditioning) -> Result<CoefficientField> {
    if !field.is_adapted() {
        return Err(Error::NotAdapted("the conditional-expectation series is defined for adapted fields"));
    }
    let first = match conditioning {
        Conditioning::Origin => 0,
        Conditioning::Lagged => 1,
    };
    let n = n as i64;
    let mut out = CoefficientField::zero(field.dimension(), field.channel_count());
    let dim = field.dimension();
    for (k, j, a) in field.iter() {
        // a_j contributes to every l with l <= j <= l + N
        let lo: Vec<i64> = (0..dim).map(|q| (j.get(q) - n).max(first)).collect();
        let hi: Vec<i64> = (0..dim).map(|q| j.get(q)).collect();
        if lo.iter().zip(&hi).any(|(l, h)| l > h) {
            continue;
        }
        for l in BoxPoints::new(&lo, &hi) {
            out.add_at(k, MultiIndex::from(l), a)?;
        }
    }
    Ok(out)
}

/// L^2 norm of the conditional-expectation series, from windowed box sums.
pub fn conditional_expectation_norm(field: &CoefficientField, n: u64, conditioning: Conditioning) -> Result<f64> {
    if !field.is_adapted() {
        return Err(Error::NotAdapted("the conditional-expectation series is defined for adapted fields"));
    }
    let first = match conditioning {
        Conditioning::Origin => 0,
        Conditioning::Lagged => 1,
    };
    let width = i64::try_from(n).map_err(|_| Error::CutoffTooLarge {
        cutoff: n,
        reason: "window width exceeds the index range",
    })?;
    let specs = vec![AxisSpec::window(Some(first), None, width); field.dimension()];
    Ok(CompressedSupport::new(field).sum(Layers::Channels, &specs, squares)?.sqrt())
}

fn per_cutoff<F>(rule: &GeneratorRule, cutoffs: &[u64], mut eval: F) -> Result<Vec<f64>>
where
    F: FnMut(&CoefficientField, u64) -> Result<f64>,
{
    check_ladder(cutoffs)?;
    cutoffs
        .iter()
        .map(|&n| {
            let field = rule.materialize(n)?;
            eval(&field, n)
        })
        .collect()
}

// dyadic spikes past the materializable range go through the block closed forms
fn dyadic_closed_form(rule: &GeneratorRule, cutoffs: &[u64], form: fn(u64) -> f64) -> Option<Vec<f64>> {
    matches!(rule.kind(), RuleKind::DyadicSpikes).then(|| cutoffs.iter().map(|&k| form(k)).collect())
}

/// Heyde condition: the orthant form (adapted or general) plus the transfer
/// form `sum_S ||g_S||^2` when it can be materialized.
pub fn heyde_condition(rule: &GeneratorRule, cutoffs: &[u64]) -> Result<ConditionReport> {
    check_ladder(cutoffs)?;
    let adapted = rule.is_adapted();
    if let Some(partials) = dyadic_closed_form(rule, cutoffs, dyadic::tail_square_sum) {
        let mut report = ConditionReport::new(ConditionId::HeydeAdapted, rule, cutoffs, partials);
        if cutoffs.iter().all(|&k| k <= 20) {
            let forms = per_cutoff(rule, cutoffs, |f, _| Ok(transfer_norms(f)?.values().sum()))?;
            report.transfer_form_partials = Some(forms);
            report.subset_breakdown = Some(transfer_norms(&rule.materialize(*cutoffs.last().unwrap())?)?);
        }
        return Ok(report);
    }
    let mut partials = Vec::with_capacity(cutoffs.len());
    let mut transfer = Vec::with_capacity(cutoffs.len());
    let mut breakdown = BTreeMap::new();
    for &n in cutoffs {
        let field = rule.materialize(n)?;
        partials.push(if adapted {
            heyde_adapted_sum(&field)?
        } else {
            heyde_orthant_sums(&field)?.values().sum()
        });
        breakdown = transfer_norms(&field)?;
        transfer.push(breakdown.values().sum());
    }
    let id = if adapted { ConditionId::HeydeAdapted } else { ConditionId::Heyde };
    let mut report = ConditionReport::new(id, rule, cutoffs, partials);
    report.transfer_form_partials = Some(transfer);
    report.subset_breakdown = Some(breakdown);
    Ok(report)
}

pub fn gordin_norm_series(rule: &GeneratorRule, cutoffs: &[u64]) -> Result<ConditionReport> {
    check_ladder(cutoffs)?;
    if !rule.is_adapted() {
        return Err(Error::NotAdapted("the conditional-norm series is defined for adapted fields"));
    }
    let partials = match dyadic_closed_form(rule, cutoffs, dyadic::tail_norm_sum) {
        Some(p) => p,
        None => per_cutoff(rule, cutoffs, |f, _| gordin_sum(f))?,
    };
    Ok(ConditionReport::new(ConditionId::Gordin, rule, cutoffs, partials))
}

pub fn weighted_projection(rule: &GeneratorRule, cutoffs: &[u64]) -> Result<ConditionReport> {
    check_ladder(cutoffs)?;
    let partials = match dyadic_closed_form(rule, cutoffs, dyadic::weighted_square_sum) {
        Some(p) => p,
        None => per_cutoff(rule, cutoffs, |f, _| Ok(weighted_projection_sum(f)))?,
    };
    Ok(ConditionReport::new(ConditionId::WeightedProjection, rule, cutoffs, partials))
}

pub fn hannan_condition(rule: &GeneratorRule, cutoffs: &[u64]) -> Result<ConditionReport> {
    check_ladder(cutoffs)?;
    let partials = match dyadic_closed_form(rule, cutoffs, dyadic::absolute_sum) {
        Some(p) => p,
        None => per_cutoff(rule, cutoffs, |f, _| Ok(hannan_sum(f)))?,
    };
    Ok(ConditionReport::new(ConditionId::Hannan, rule, cutoffs, partials))
}

/// Norm of the conditional-expectation series, with the window `[0, N]^d`
/// tied to the materialization cutoff `N`. For the dyadic-spike family the
/// cutoff counts blocks and the window is `[0, 2^K]`.
pub fn conditional_expectation_condition(
    rule: &GeneratorRule,
    conditioning: Conditioning,
    cutoffs: &[u64],
) -> Result<ConditionReport> {
    check_ladder(cutoffs)?;
    if !rule.is_adapted() {
        return Err(Error::NotAdapted("the conditional-expectation series is defined for adapted fields"));
    }
    let dyadic = matches!(rule.kind(), RuleKind::DyadicSpikes);
    let partials = per_cutoff(rule, cutoffs, |f, n| {
        let window = if dyadic { 1u64 << n } else { n };
        conditional_expectation_norm(f, window, conditioning)
    })?;
    let id = match conditioning {
        Conditioning::Origin => ConditionId::CondexpSeries,
        Conditioning::Lagged => ConditionId::CondexpSeriesShifted,
    };
    Ok(ConditionReport::new(id, rule, cutoffs, partials))
}

/// Every condition applicable to `rule`; inapplicable ones come back as
/// errors alongside their id.
pub fn evaluate_all(rule: &GeneratorRule, cutoffs: &[u64]) -> Vec<(ConditionId, Result<ConditionReport>)> {
    vec![
        (
            if rule.is_adapted() { ConditionId::HeydeAdapted } else { ConditionId::Heyde },
            heyde_condition(rule, cutoffs),
        ),
        (ConditionId::Gordin, gordin_norm_series(rule, cutoffs)),
        (ConditionId::WeightedProjection, weighted_projection(rule, cutoffs)),
        (
            ConditionId::CondexpSeries,
            conditional_expectation_condition(rule, Conditioning::Origin, cutoffs),
        ),
        (
            ConditionId::CondexpSeriesShifted,
            conditional_expectation_condition(rule, Conditioning::Lagged, cutoffs),
        ),
        (ConditionId::Hannan, hannan_condition(rule, cutoffs)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f1(pairs: &[(i64, f64)]) -> CoefficientField {
        CoefficientField::from_pairs(1, pairs.iter().map(|&(j, v)| (MultiIndex::from([j]), v))).unwrap()
    }

    fn ladder(from: u32, to: u32) -> Vec<u64> {
        (from..=to).map(|e| 1u64 << e).collect()
    }

    #[test]
    fn unit_spike_values() {
        let rule = GeneratorRule::explicit(f1(&[(0, 1.0)]));
        let h = heyde_condition(&rule, &[0]).unwrap();
        assert_eq!(h.condition, ConditionId::HeydeAdapted);
        assert_eq!(h.partials, vec![1.0]);
        assert_eq!(h.verdict, Verdict::Converged);
        assert_eq!(h.transfer_form_partials, Some(vec![1.0]));
        assert_eq!(gordin_norm_series(&rule, &[0]).unwrap().partials, vec![1.0]);
        assert_eq!(weighted_projection(&rule, &[0]).unwrap().partials, vec![1.0]);
        assert_eq!(hannan_condition(&rule, &[0]).unwrap().partials, vec![1.0]);
        let c = conditional_expectation_condition(&rule, Conditioning::Origin, &[0]).unwrap();
        assert_eq!(c.partials, vec![1.0]);
        let w = weighted_projection(&GeneratorRule::explicit(f1(&[(1, 1.0)])), &[1]).unwrap();
        assert_eq!(w.partials, vec![4.0]);
    }

    #[test]
    fn empty_field_is_zero_and_converged() {
        let rule = GeneratorRule::explicit(CoefficientField::zero(2, 1));
        for (_, r) in evaluate_all(&rule, &[0]) {
            let r = r.unwrap();
            assert_eq!(r.partials, vec![0.0]);
            assert_eq!(r.verdict, Verdict::Converged);
        }
    }

    #[test]
    fn geometric_half_values() {
        let rule = GeneratorRule::geometric(vec![0.5]).unwrap();
        let cut = ladder(4, 7);
        let h = heyde_condition(&rule, &cut).unwrap();
        assert!((h.last() - 16.0 / 3.0).abs() < 1e-12);
        assert_eq!(h.verdict, Verdict::Converged);
        let g = gordin_norm_series(&rule, &cut).unwrap();
        assert!((g.last() - 4.0 / 3f64.sqrt()).abs() < 1e-9, "{}", g.last());
        let n = hannan_condition(&rule, &cut).unwrap();
        assert!((n.last() - 2.0).abs() < 1e-12);
        let c = conditional_expectation_condition(&rule, Conditioning::Origin, &cut).unwrap();
        assert!((c.last().powi(2) - 16.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn basel_hannan() {
        let rule = GeneratorRule::power(vec![2.0]).unwrap();
        let r = hannan_condition(&rule, &ladder(10, 16)).unwrap();
        assert!((r.last() - std::f64::consts::PI.powi(2) / 6.0).abs() < 2e-5);
        assert!(r.is_monotone());
    }

    #[test]
    fn series_matches_norm() {
        let f = CoefficientField::from_pairs(
            2,
            [([0, 0], 1.0), ([2, 1], -0.5), ([1, 3], 0.25), ([0, 2], 2.0)].map(|(j, v)| (MultiIndex::from(j), v)),
        )
        .unwrap();
        for n in 0..4 {
            for cond in [Conditioning::Origin, Conditioning::Lagged] {
                let series = conditional_expectation_series(&f, n, cond).unwrap();
                let norm = conditional_expectation_norm(&f, n, cond).unwrap();
                assert!((series.sum_of_squares().sqrt() - norm).abs() < 1e-12, "n={n} {cond:?}");
            }
        }
    }

    #[test]
    fn adapted_only_conditions_reject_two_sided_fields() {
        let rule = GeneratorRule::explicit(f1(&[(-1, 1.0)]));
        assert!(matches!(gordin_norm_series(&rule, &[1]), Err(Error::NotAdapted(_))));
        assert!(matches!(
            conditional_expectation_condition(&rule, Conditioning::Origin, &[1]),
            Err(Error::NotAdapted(_))
        ));
        let h = heyde_condition(&rule, &[1]).unwrap();
        assert_eq!(h.condition, ConditionId::Heyde);
    }
}
