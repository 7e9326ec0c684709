//! Split of a finite-support linear field into differenced transfer functions.
//!
//! For every subset `S` of the axes the transfer function `g_S` satisfies
//!
//! ```text
//! f = sum_S prod_{q not in S} (I - U_{e_q}) g_S
//! ```
//!
//! where `g_S` is a martingale-difference generator along the axes of `S`
//! and `S = {1..d}` gives the martingale part `m`. In coefficient space the
//! construction factorizes over axes: along `q in S` the coefficients of
//! every line are summed onto coordinate 0, and along `q not in S` they are
//! replaced by the signed tails
//!
//! ```text
//! t_l =  sum_{i >= l} c_i      (l >= 1)
//! t_l = -sum_{i <= l-1} c_i    (l <= 0)
//! ```
//!
//! so `g_S(j)` is `(-1)^{#{u : j_u <= 0}}` times the box sum of `a` over
//! `i_u >= j_u` (`j_u >= 1`) or `i_u <= j_u - 1` (`j_u <= 0`) on `S^c`, with
//! `S` coordinates summed out.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::lattice::grid::{AxisSpec, CompressedSupport, Layers};
use crate::lattice::{CoefficientField, MultiIndex, SubsetMask};

/// Largest number of coefficients a single axis transform may produce.
pub const DECOMPOSE_BUDGET: u128 = 1 << 25;

/// The parts `g_S` of a decomposition, one per subset of the axes.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    dim: usize,
    channels: usize,
    parts: BTreeMap<SubsetMask, CoefficientField>,
}

impl Decomposition {
    /// Assemble from explicit parts; missing subsets are zero.
    pub fn from_parts(
        dim: usize,
        channels: usize,
        parts: impl IntoIterator<Item = (SubsetMask, CoefficientField)>,
    ) -> Result<Self> {
        let mut all: BTreeMap<SubsetMask, CoefficientField> = SubsetMask::all(dim)
            .map(|s| (s, CoefficientField::zero(dim, channels)))
            .collect();
        for (s, g) in parts {
            if s.dim() != dim || g.dimension() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: if s.dim() != dim { s.dim() } else { g.dimension() },
                });
            }
            if g.channel_count() != channels {
                return Err(Error::InvalidInput(format!(
                    "part {s} has {} channels, expected {channels}",
                    g.channel_count()
                )));
            }
            all.insert(s, g);
        }
        Ok(Decomposition {
            dim,
            channels,
            parts: all,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn channel_count(&self) -> usize {
        self.channels
    }

    pub fn part(&self, s: SubsetMask) -> &CoefficientField {
        &self.parts[&s]
    }

    /// The part for `S = {1..d}`.
    pub fn martingale_part(&self) -> &CoefficientField {
        self.part(SubsetMask::full(self.dim))
    }

    /// Parts in increasing mask order.
    pub fn parts(&self) -> impl Iterator<Item = (SubsetMask, &CoefficientField)> {
        self.parts.iter().map(|(s, g)| (*s, g))
    }

    /// Stored indices that break the support structure: coordinates on `S`
    /// must be 0, and for adapted inputs coordinates on `S^c` must be `>= 1`.
    pub fn support_violations(&self, adapted: bool) -> Vec<(SubsetMask, MultiIndex)> {
        let mut bad = Vec::new();
        for (s, g) in self.parts() {
            for (_, j, _) in g.iter() {
                let ok = (0..self.dim).all(|q| {
                    if s.contains(q) {
                        j.get(q) == 0
                    } else {
                        !adapted || j.get(q) >= 1
                    }
                });
                if !ok {
                    bad.push((s, j.clone()));
                }
            }
        }
        bad
    }

    /// Serialization: one coefficient block per subset, each introduced by a
    /// `# subset=<bitstring>` line.
    pub fn to_delimited(&self) -> String {
        let mut out = String::new();
        for (s, g) in self.parts() {
            out.push_str(&format!("# subset={s}\n"));
            out.push_str(&g.to_delimited());
        }
        out
    }
}

/// Compute all `2^d` transfer functions of a finite-support field.
pub fn decompose(field: &CoefficientField) -> Result<Decomposition> {
    let dim = field.dimension();
    let mut parts = BTreeMap::new();
    branch(field.clone(), 0, 0, dim, &mut parts)?;
    Ok(Decomposition {
        dim,
        channels: field.channel_count(),
        parts,
    })
}

fn branch(
    current: CoefficientField,
    axis: usize,
    bits: u32,
    dim: usize,
    out: &mut BTreeMap<SubsetMask, CoefficientField>,
) -> Result<()> {
    if axis == dim {
        out.insert(SubsetMask::new(dim, bits), current);
        return Ok(());
    }
    let transferred = transfer_axis(&current, axis)?;
    branch(transferred, axis + 1, bits, dim, out)?;
    let collapsed = collapse_axis(&current, axis);
    branch(collapsed, axis + 1, bits | (1 << axis), dim, out)
}

// lines along `axis`: key has the axis coordinate zeroed
fn lines(channel: &BTreeMap<MultiIndex, f64>, axis: usize) -> BTreeMap<MultiIndex, Vec<(i64, f64)>> {
    let mut lines: BTreeMap<MultiIndex, Vec<(i64, f64)>> = BTreeMap::new();
    for (j, &v) in channel {
        lines.entry(j.with_coord(axis, 0)).or_default().push((j.get(axis), v));
    }
    for line in lines.values_mut() {
        line.sort_by_key(|p| p.0);
    }
    lines
}

/// Sum every line along `axis` onto coordinate 0.
fn collapse_axis(field: &CoefficientField, axis: usize) -> CoefficientField {
    let mut out = CoefficientField::zero(field.dimension(), field.channel_count());
    for k in 0..field.channel_count() {
        for (key, line) in lines(field.channel(k), axis) {
            let total: f64 = line.iter().map(|p| p.1).sum();
            out.add_at(k, key, total).expect("shape preserved");
        }
    }
    out
}

/// Replace every line along `axis` by its signed tails.
fn transfer_axis(field: &CoefficientField, axis: usize) -> Result<CoefficientField> {
    let mut out = CoefficientField::zero(field.dimension(), field.channel_count());
    let mut produced: u128 = 0;
    for k in 0..field.channel_count() {
        for (key, line) in lines(field.channel(k), axis) {
            let lo = (line[0].0 + 1).min(1);
            let hi = line[line.len() - 1].0.max(0);
            produced += (hi as i128 - lo as i128 + 1).max(0) as u128;
            if produced > DECOMPOSE_BUDGET {
                return Err(Error::ResourceBudget {
                    requested: produced,
                    budget: DECOMPOSE_BUDGET,
                });
            }
            // l <= 0: minus the sum over i <= l - 1, accumulated upward
            let mut below = 0.0;
            let mut p = 0;
            for l in lo..=0 {
                while p < line.len() && line[p].0 <= l - 1 {
                    below += line[p].1;
                    p += 1;
                }
                out.add_at(k, key.with_coord(axis, l), -below)?;
            }
            // l >= 1: the sum over i >= l, accumulated downward
            let mut above = 0.0;
            let mut p = line.len();
            for l in (1..=hi).rev() {
                while p > 0 && line[p - 1].0 >= l {
                    above += line[p - 1].1;
                    p -= 1;
                }
                out.add_at(k, key.with_coord(axis, l), above)?;
            }
        }
    }
    Ok(out)
}

/// `sum_S prod_{q not in S} (I - U_{e_q}) g_S`.
pub fn reconstruct(dec: &Decomposition) -> Result<CoefficientField> {
    let mut total = CoefficientField::zero(dec.dim, dec.channels);
    for (s, g) in dec.parts() {
        if g.dimension() != dec.dim {
            return Err(Error::DimensionMismatch {
                expected: dec.dim,
                found: g.dimension(),
            });
        }
        let mut term = g.clone();
        for q in s.complement().axes() {
            term = term.difference(q)?;
        }
        total = total.add(&term)?;
    }
    Ok(total)
}

/// One-dimensional decomposition `f = m + g - U g`.
#[derive(Debug, Clone, PartialEq)]
pub struct OneDimDecomposition {
    /// Supported at index 0.
    pub m: CoefficientField,
    pub g: CoefficientField,
}

impl OneDimDecomposition {
    /// `m + g - U g`.
    pub fn reconstruct(&self) -> Result<CoefficientField> {
        let ug = self.g.shift(&MultiIndex::from([1]))?;
        self.m.add(&self.g)?.linear_combination(1.0, &ug, -1.0)
    }
}

/// Decomposition of a `d = 1` field with possibly two-sided support.
///
/// `m = (sum_i a_i) e`, and `g` has coefficient `sum_{i >= l} a_i` at
/// `l >= 1` and `-sum_{i < l} a_i` at `l <= 0`.
pub fn decompose_1d(field: &CoefficientField) -> Result<OneDimDecomposition> {
    if field.dimension() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: field.dimension(),
        });
    }
    let channels = field.channel_count();
    let mut m = CoefficientField::zero(1, channels);
    let mut g = CoefficientField::zero(1, channels);
    for k in 0..channels {
        let coeffs: Vec<(i64, f64)> = field.channel(k).iter().map(|(j, &v)| (j.get(0), v)).collect();
        if coeffs.is_empty() {
            continue;
        }
        let total: f64 = coeffs.iter().map(|c| c.1).sum();
        m.add_at(k, MultiIndex::from([0]), total)?;
        let first = coeffs[0].0;
        let last = coeffs[coeffs.len() - 1].0;
        for l in 1..=last {
            let tail: f64 = coeffs.iter().filter(|c| c.0 >= l).map(|c| c.1).sum();
            g.add_at(k, MultiIndex::from([l]), tail)?;
        }
        for l in (first + 1)..=0 {
            let head: f64 = coeffs.iter().filter(|c| c.0 < l).map(|c| c.1).sum();
            g.add_at(k, MultiIndex::from([l]), -head)?;
        }
    }
    Ok(OneDimDecomposition { m, g })
}

/// Closed-form and directly computed squared norm of one part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormPair {
    pub closed_form: f64,
    pub direct: f64,
}

/// `||g_S||^2` from the orthant sums of `f` for every `S`:
///
/// ```text
/// sum_{S' subset S^c} sum_{j_u >= 1 (u in S'), j_v <= 0 (v in S^c \ S')}
///     sum_k ( sum_{i_r any (r in S), i_u >= j_u, i_v <= j_v - 1} a_{k,i} )^2
/// ```
pub fn transfer_norms(field: &CoefficientField) -> Result<BTreeMap<SubsetMask, f64>> {
    let dim = field.dimension();
    let support = CompressedSupport::new(field);
    let squares = |s: &[f64]| s.iter().map(|x| x * x).sum::<f64>();
    let mut out = BTreeMap::new();
    for s in SubsetMask::all(dim) {
        let mut total = 0.0;
        for upper in s.complement().subsets() {
            let specs: Vec<AxisSpec> = (0..dim)
                .map(|q| {
                    if s.contains(q) {
                        AxisSpec::full(0)
                    } else if upper.contains(q) {
                        AxisSpec::at_least(Some(1), None)
                    } else {
                        AxisSpec::at_most(None, Some(0), -1)
                    }
                })
                .collect();
            total += support.sum(Layers::Channels, &specs, squares)?;
        }
        out.insert(s, total);
    }
    Ok(out)
}

/// Compare the closed-form `||g_S||^2` with the sum of squared coefficients
/// of each stored part.
pub fn g_norm_identity(dec: &Decomposition) -> Result<BTreeMap<SubsetMask, NormPair>> {
    let field = reconstruct(dec)?;
    let closed = transfer_norms(&field)?;
    Ok(dec
        .parts()
        .map(|(s, g)| {
            (
                s,
                NormPair {
                    closed_form: closed[&s],
                    direct: g.sum_of_squares(),
                },
            )
        })
        .collect())
}

/// Merge per-channel decompositions of the channels of one field.
pub fn merge_channels(parts: &[Decomposition]) -> Result<Decomposition> {
    let first = parts
        .first()
        .ok_or_else(|| Error::InvalidInput("no decompositions to merge".into()))?;
    let mut merged = BTreeMap::new();
    for s in SubsetMask::all(first.dim) {
        let fields: Vec<CoefficientField> = parts.iter().map(|d| d.part(s).clone()).collect();
        merged.insert(s, CoefficientField::merge_channels(&fields)?);
    }
    let channels = parts.iter().map(|d| d.channels).sum();
    Ok(Decomposition {
        dim: first.dim,
        channels,
        parts: merged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f1(pairs: &[(i64, f64)]) -> CoefficientField {
        CoefficientField::from_pairs(1, pairs.iter().map(|&(j, v)| (MultiIndex::from([j]), v))).unwrap()
    }

    fn f2(pairs: &[([i64; 2], f64)]) -> CoefficientField {
        CoefficientField::from_pairs(2, pairs.iter().map(|&(j, v)| (MultiIndex::from(j), v))).unwrap()
    }

    fn mask(dim: usize, axes: &[usize]) -> SubsetMask {
        SubsetMask::from_axes(dim, axes.iter().copied())
    }

    #[test]
    fn martingale_difference_is_its_own_martingale_part() {
        let f = f2(&[([0, 0], 1.0)]);
        let dec = decompose(&f).unwrap();
        assert_eq!(dec.martingale_part(), &f);
        for (s, g) in dec.parts() {
            if s != SubsetMask::full(2) {
                assert!(g.is_zero(), "{s}");
            }
        }
    }

    #[test]
    fn one_dimensional_moving_average() {
        let f = f1(&[(0, 1.0), (1, 1.0)]);
        let dec = decompose(&f).unwrap();
        assert_eq!(dec.part(mask(1, &[0])), &f1(&[(0, 2.0)]));
        assert_eq!(dec.part(mask(1, &[])), &f1(&[(1, 1.0)]));
        assert_eq!(reconstruct(&dec).unwrap(), f);
    }

    #[test]
    fn unit_spike_in_two_dimensions() {
        let f = f2(&[([1, 1], 1.0)]);
        let dec = decompose(&f).unwrap();
        assert_eq!(dec.part(mask(2, &[0, 1])), &f2(&[([0, 0], 1.0)]));
        assert_eq!(dec.part(mask(2, &[0])), &f2(&[([0, 1], 1.0)]));
        assert_eq!(dec.part(mask(2, &[1])), &f2(&[([1, 0], 1.0)]));
        assert_eq!(dec.part(mask(2, &[])), &f2(&[([1, 1], 1.0)]));
        assert_eq!(reconstruct(&dec).unwrap(), f);
        assert!(dec.support_violations(true).is_empty());
    }

    #[test]
    fn empty_decomposition_reconstructs_zero() {
        let dec = Decomposition::from_parts(3, 2, []).unwrap();
        assert!(reconstruct(&dec).unwrap().is_zero());
    }

    #[test]
    fn one_dim_formula_examples() {
        let d = decompose_1d(&f1(&[(0, 1.0)])).unwrap();
        assert_eq!(d.m, f1(&[(0, 1.0)]));
        assert!(d.g.is_zero());

        let d = decompose_1d(&f1(&[(0, 1.0), (1, 1.0)])).unwrap();
        assert_eq!(d.m, f1(&[(0, 2.0)]));
        assert_eq!(d.g, f1(&[(1, 1.0)]));

        let f = f1(&[(-1, 1.0)]);
        let d = decompose_1d(&f).unwrap();
        assert_eq!(d.m, f1(&[(0, 1.0)]));
        assert_eq!(d.g, f1(&[(0, -1.0)]));
        assert_eq!(d.reconstruct().unwrap(), f);

        assert!(decompose_1d(&f2(&[([0, 0], 1.0)])).is_err());
    }

    #[test]
    fn norm_identity_examples() {
        let dec = decompose(&f2(&[([1, 1], 1.0)])).unwrap();
        let id = g_norm_identity(&dec).unwrap();
        assert_eq!(id[&mask(2, &[])], NormPair { closed_form: 1.0, direct: 1.0 });

        let dec = decompose(&f1(&[(0, 1.0), (1, 1.0)])).unwrap();
        let id = g_norm_identity(&dec).unwrap();
        assert_eq!(id[&mask(1, &[])].closed_form, 1.0);
        assert_eq!(id[&mask(1, &[0])].closed_form, 4.0);
        assert_eq!(id[&mask(1, &[0])].direct, 4.0);

        let dec = decompose(&CoefficientField::zero(2, 1)).unwrap();
        for pair in g_norm_identity(&dec).unwrap().values() {
            assert_eq!(*pair, NormPair { closed_form: 0.0, direct: 0.0 });
        }
    }

    #[test]
    fn transfer_span_is_budgeted() {
        let f = f1(&[(0, 1.0), (1 << 40, 1.0)]);
        assert!(matches!(decompose(&f), Err(Error::ResourceBudget { .. })));
    }

    #[test]
    fn serialization_lists_every_subset() {
        let dec = decompose(&f2(&[([1, 1], 1.0)])).unwrap();
        let text = dec.to_delimited();
        for s in ["00", "10", "01", "11"] {
            assert!(text.contains(&format!("# subset={s}\n")));
        }
    }
}
