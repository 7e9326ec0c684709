//! Bernoulli `Z^d` actions on finite boxes: iid innovations, pointwise
//! evaluation of linear fields and decompositions, and rectangular partial
//! sums.
//!
//! Boxes are inclusive `[lo, hi]` and stored row-major with the last axis
//! fastest. There is no wrap-around: evaluating a field on a box needs
//! innovations on that box dilated by the field support.

pub mod rng;

use rayon::prelude::*;
use serde::Serialize;

use crate::decomposition::Decomposition;
use crate::error::{Error, Result};
use crate::lattice::{BoxPoints, CoefficientField, MultiIndex, SubsetMask};

pub use rng::{unit_open, InnovationLaw, Purpose, SiteStream, SCHEME_ID};

/// Default cap on sites times channels held in memory at once.
pub const DEFAULT_SITE_BUDGET: u128 = 1 << 26;

/// Innovation law and channel count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct InnovationModel {
    pub law: InnovationLaw,
    pub channels: usize,
    #[serde(skip)]
    pub site_budget: u128,
}

impl InnovationModel {
    pub fn new(law: InnovationLaw, channels: usize) -> Self {
        InnovationModel {
            law,
            channels,
            site_budget: DEFAULT_SITE_BUDGET,
        }
    }
}

/// Inclusive integer box.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LatticeBox {
    pub lo: MultiIndex,
    pub hi: MultiIndex,
}

impl LatticeBox {
    pub fn new(lo: MultiIndex, hi: MultiIndex) -> Result<Self> {
        hi.check_dim(lo.dim())?;
        if !lo.le_componentwise(&hi) {
            return Err(Error::InvalidInput(format!("empty box [{lo}, {hi}]")));
        }
        let limit = rng::coordinate_limit(lo.dim());
        if lo.coords().iter().chain(hi.coords()).any(|c| c.abs() > limit) {
            return Err(Error::InvalidInput(format!(
                "box [{lo}, {hi}] exceeds the addressable range +-{limit}"
            )));
        }
        Ok(LatticeBox { lo, hi })
    }

    /// `[1, n]`.
    pub fn block(n: &MultiIndex) -> Result<Self> {
        Self::new(MultiIndex::ones(n.dim()), n.clone())
    }

    pub fn dim(&self) -> usize {
        self.lo.dim()
    }

    pub fn extents(&self) -> Vec<usize> {
        (0..self.dim())
            .map(|q| (self.hi.get(q) - self.lo.get(q) + 1) as usize)
            .collect()
    }

    pub fn volume(&self) -> u128 {
        self.extents().iter().map(|&e| e as u128).product()
    }

    pub fn contains_box(&self, other: &LatticeBox) -> bool {
        self.lo.le_componentwise(&other.lo) && other.hi.le_componentwise(&self.hi)
    }

    /// Row-major offset of `site`, which must lie in the box.
    pub fn offset(&self, site: &[i64]) -> usize {
        let ext = self.extents();
        let mut pos = 0usize;
        for q in 0..self.dim() {
            pos = pos * ext[q] + (site[q] - self.lo.get(q)) as usize;
        }
        pos
    }

    /// Starting site of every row along the last axis.
    pub fn row_starts(&self) -> Vec<Vec<i64>> {
        let d = self.dim();
        let mut hi = self.hi.coords().to_vec();
        hi[d - 1] = self.lo.get(d - 1);
        BoxPoints::new(self.lo.coords(), &hi).collect()
    }

    /// Sites `t - j` for `t` in this box and `j` in `[jlo, jhi]`.
    fn dilate_by_support(&self, jlo: &MultiIndex, jhi: &MultiIndex) -> Result<LatticeBox> {
        LatticeBox::new(&self.lo - jhi, &self.hi - jlo)
    }
}

/// Real values on a box.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValueGrid {
    pub bbox: LatticeBox,
    pub values: Vec<f64>,
}

impl ValueGrid {
    pub fn at(&self, site: &[i64]) -> f64 {
        self.values[self.bbox.offset(site)]
    }

    /// Delimited dump: `t_1,...,t_d,value` per site.
    pub fn to_delimited(&self) -> String {
        let mut out = String::new();
        for (site, v) in BoxPoints::new(self.bbox.lo.coords(), self.bbox.hi.coords()).zip(&self.values) {
            for c in &site {
                out.push_str(&format!("{c},"));
            }
            out.push_str(&format!("{v}\n"));
        }
        out
    }
}

/// Innovation draws `e_k(t)` on a box for one replication.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleLattice {
    pub bbox: LatticeBox,
    pub law: InnovationLaw,
    pub seed: u64,
    pub replication: u64,
    pub scheme: &'static str,
    /// One row-major grid per channel.
    pub values: Vec<Vec<f64>>,
}

impl SampleLattice {
    pub fn channel_count(&self) -> usize {
        self.values.len()
    }

    pub fn at(&self, channel: usize, site: &[i64]) -> f64 {
        self.values[channel][self.bbox.offset(site)]
    }
}

fn check_budget(volume: u128, channels: usize, budget: u128) -> Result<()> {
    let requested = volume.saturating_mul(channels as u128);
    if requested > budget {
        return Err(Error::ResourceBudget { requested, budget });
    }
    Ok(())
}

/// Draw innovations on `bbox` for replication 0.
pub fn sample_innovations(model: &InnovationModel, bbox: &LatticeBox, seed: u64) -> Result<SampleLattice> {
    sample_replication(model, bbox, seed, 0)
}

/// Draw innovations on `bbox` for the given replication.
///
/// The value at a site depends only on `(seed, replication, channel, site,
/// law)`, so overlapping boxes agree where they overlap.
pub fn sample_replication(model: &InnovationModel, bbox: &LatticeBox, seed: u64, replication: u64) -> Result<SampleLattice> {
    check_budget(bbox.volume(), model.channels, model.site_budget)?;
    let ext = bbox.extents();
    let row_len = ext[ext.len() - 1];
    let starts = bbox.row_starts();
    let values = (0..model.channels)
        .map(|k| {
            let mut grid = vec![0.0; bbox.volume() as usize];
            grid.par_chunks_mut(row_len).zip(starts.par_iter()).for_each_init(
                || SiteStream::new(seed, Purpose::Innovations, replication, k, model.law),
                |stream, (row, start)| stream.fill_row(start, row),
            );
            grid
        })
        .collect();
    Ok(SampleLattice {
        bbox: bbox.clone(),
        law: model.law,
        seed,
        replication,
        scheme: SCHEME_ID,
        values,
    })
}

/// `X_t = sum_k sum_j a_{k,j} e_k(t - j)` for `t` in `eval_box`.
pub fn evaluate_field(field: &CoefficientField, sample: &SampleLattice, eval_box: &LatticeBox) -> Result<ValueGrid> {
    if field.dimension() != eval_box.dim() || sample.bbox.dim() != eval_box.dim() {
        return Err(Error::DimensionMismatch {
            expected: eval_box.dim(),
            found: field.dimension(),
        });
    }
    if field.channel_count() > sample.channel_count() {
        return Err(Error::InvalidInput(format!(
            "field has {} channels, sample has {}",
            field.channel_count(),
            sample.channel_count()
        )));
    }
    let n = eval_box.volume() as usize;
    let Some((jlo, jhi)) = field.support_box() else {
        return Ok(ValueGrid {
            bbox: eval_box.clone(),
            values: vec![0.0; n],
        });
    };
    let needed = eval_box.dilate_by_support(&jlo, &jhi)?;
    if !sample.bbox.contains_box(&needed) {
        return Err(Error::InsufficientMargin);
    }
    let d = eval_box.dim();
    let ext = eval_box.extents();
    let row_len = ext[d - 1];
    let starts = eval_box.row_starts();
    let terms: Vec<(usize, &MultiIndex, f64)> = field.iter().collect();
    let mut values = vec![0.0; n];
    values
        .par_chunks_mut(row_len)
        .zip(starts.par_iter())
        .for_each(|(row, start)| {
            let mut src = vec![0i64; d];
            for &(k, j, a) in &terms {
                for q in 0..d {
                    src[q] = start[q] - j.get(q);
                }
                let base = sample.bbox.offset(&src);
                let innov = &sample.values[k][base..base + row_len];
                for (out, e) in row.iter_mut().zip(innov) {
                    *out += a * e;
                }
            }
        });
    Ok(ValueGrid {
        bbox: eval_box.clone(),
        values,
    })
}

/// Values of `prod_{q not in S} (I - U_{e_q}) g_S` on `eval_box`, formed by
/// finite differences of `g_S` on the grid.
pub fn evaluate_part(g: &CoefficientField, s: SubsetMask, sample: &SampleLattice, eval_box: &LatticeBox) -> Result<ValueGrid> {
    let d = eval_box.dim();
    let mut hi = eval_box.hi.clone();
    for q in s.complement().axes() {
        hi = hi.with_coord(q, hi.get(q) + 1);
    }
    let wide = LatticeBox::new(eval_box.lo.clone(), hi)?;
    let raw = evaluate_field(g, sample, &wide)?;
    let mut values = Vec::with_capacity(eval_box.volume() as usize);
    let diff_axes: Vec<usize> = s.complement().axes().collect();
    for t in BoxPoints::new(eval_box.lo.coords(), eval_box.hi.coords()) {
        // (U_v h)(t) = h(t + v)
        let mut acc = 0.0;
        for pattern in 0..(1usize << diff_axes.len()) {
            let mut site = t.clone();
            let mut sign = 1.0;
            for (b, &q) in diff_axes.iter().enumerate() {
                if pattern & (1 << b) != 0 {
                    site[q] += 1;
                    sign = -sign;
                }
            }
            acc += sign * raw.at(&site);
        }
        values.push(acc);
    }
    debug_assert_eq!(d, wide.dim());
    Ok(ValueGrid {
        bbox: eval_box.clone(),
        values,
    })
}

/// `max_t |f(t) - sum_S (prod (I - U) g_S)(t)|` over `eval_box`.
pub fn verify_pointwise(
    field: &CoefficientField,
    dec: &Decomposition,
    sample: &SampleLattice,
    eval_box: &LatticeBox,
) -> Result<f64> {
    let direct = evaluate_field(field, sample, eval_box)?;
    let mut sum = vec![0.0; direct.values.len()];
    for (s, g) in dec.parts() {
        let part = evaluate_part(g, s, sample, eval_box)?;
        for (acc, v) in sum.iter_mut().zip(&part.values) {
            *acc += v;
        }
    }
    Ok(direct
        .values
        .iter()
        .zip(&sum)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// Smallest sample box that lets every part of `dec` and `field` be
/// evaluated on `eval_box`.
pub fn sample_box_for(field: &CoefficientField, dec: Option<&Decomposition>, eval_box: &LatticeBox) -> Result<LatticeBox> {
    let d = eval_box.dim();
    let mut lo = eval_box.lo.coords().to_vec();
    let mut hi: Vec<i64> = eval_box.hi.coords().iter().map(|c| c + 1).collect();
    let mut widen = |f: &CoefficientField, extra: bool| {
        if let Some((jlo, jhi)) = f.support_box() {
            for q in 0..d {
                lo[q] = lo[q].min(eval_box.lo.get(q) - jhi.get(q));
                let top = eval_box.hi.get(q) + i64::from(extra) - jlo.get(q);
                hi[q] = hi[q].max(top);
            }
        }
    };
    widen(field, false);
    if let Some(dec) = dec {
        for (_, g) in dec.parts() {
            widen(g, true);
        }
    }
    LatticeBox::new(MultiIndex::from(lo), MultiIndex::from(hi))
}

/// Realized field values on `eval_box` for one replication.
pub fn sample_field_values(
    field: &CoefficientField,
    model: &InnovationModel,
    eval_box: &LatticeBox,
    seed: u64,
    replication: u64,
) -> Result<ValueGrid> {
    let sbox = sample_box_for(field, None, eval_box)?;
    let sample = sample_replication(model, &sbox, seed, replication)?;
    evaluate_field(field, &sample, eval_box)
}

/// Rectangular partial sums `S_m = sum_{1 <= i <= m} X_i` for `m <= n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartialSumGrid {
    pub n: MultiIndex,
    pub replication: u64,
    /// Inclusive prefix sums on `[0, n]`, zero whenever a coordinate is 0.
    cumulative: Vec<f64>,
}

impl PartialSumGrid {
    fn from_values(values: &ValueGrid, n: &MultiIndex, replication: u64) -> Self {
        let d = n.dim();
        let ext: Vec<usize> = n.coords().iter().map(|&c| c as usize + 1).collect();
        let mut cumulative = vec![0.0; ext.iter().product()];
        let mut strides = vec![1usize; d];
        for q in (0..d - 1).rev() {
            strides[q] = strides[q + 1] * ext[q + 1];
        }
        for (t, v) in BoxPoints::new(values.bbox.lo.coords(), values.bbox.hi.coords()).zip(&values.values) {
            let pos: usize = t.iter().zip(&strides).map(|(&c, s)| c as usize * s).sum();
            cumulative[pos] = *v;
        }
        for q in 0..d {
            let block = strides[q] * ext[q];
            for base in (0..cumulative.len()).step_by(block) {
                for inner in 0..strides[q] {
                    for i in 1..ext[q] {
                        let prev = cumulative[base + (i - 1) * strides[q] + inner];
                        cumulative[base + i * strides[q] + inner] += prev;
                    }
                }
            }
        }
        PartialSumGrid {
            n: n.clone(),
            replication,
            cumulative,
        }
    }

    fn index(&self, m: &[i64]) -> usize {
        let mut pos = 0usize;
        for (q, &c) in m.iter().enumerate() {
            pos = pos * (self.n.get(q) as usize + 1) + c as usize;
        }
        pos
    }

    /// `S_m` for `0 <= m <= n`.
    pub fn at(&self, m: &[i64]) -> f64 {
        self.cumulative[self.index(m)]
    }

    /// `S_n`.
    pub fn total(&self) -> f64 {
        self.at(self.n.coords())
    }

    /// Sum over the block `lo <= i <= hi` (1-based, inclusive).
    pub fn rect_sum(&self, lo: &[i64], hi: &[i64]) -> f64 {
        let d = lo.len();
        let mut acc = 0.0;
        for corner in 0..(1usize << d) {
            let mut m = vec![0i64; d];
            let mut sign = 1.0;
            for q in 0..d {
                if corner & (1 << q) != 0 {
                    m[q] = lo[q] - 1;
                    sign = -sign;
                } else {
                    m[q] = hi[q];
                }
            }
            acc += sign * self.at(&m);
        }
        acc
    }
}

fn check_block(n: &MultiIndex, field: &CoefficientField) -> Result<()> {
    n.check_dim(field.dimension())?;
    if n.coords().iter().any(|&c| c < 1) {
        return Err(Error::InvalidInput(format!("block size {n} must be at least 1 on every axis")));
    }
    Ok(())
}

/// Independent replications of the partial-sum grid on `[1, n]`.
pub fn partial_sums(
    field: &CoefficientField,
    model: &InnovationModel,
    n: &MultiIndex,
    replications: u64,
    seed: u64,
) -> Result<Vec<PartialSumGrid>> {
    check_block(n, field)?;
    let eval_box = LatticeBox::block(n)?;
    (0..replications)
        .into_par_iter()
        .map(|r| {
            let values = sample_field_values(field, model, &eval_box, seed, r)?;
            Ok(PartialSumGrid::from_values(&values, n, r))
        })
        .collect()
}

/// `S_n` for each replication, without keeping the grids.
pub fn partial_sum_totals(
    field: &CoefficientField,
    model: &InnovationModel,
    n: &MultiIndex,
    replications: u64,
    seed: u64,
) -> Result<Vec<f64>> {
    check_block(n, field)?;
    let eval_box = LatticeBox::block(n)?;
    let sbox = sample_box_for(field, None, &eval_box)?;
    check_budget(sbox.volume(), model.channels, model.site_budget)?;
    (0..replications)
        .into_par_iter()
        .map(|r| {
            let values = sample_field_values(field, model, &eval_box, seed, r)?;
            Ok(values.values.iter().sum())
        })
        .collect()
}

/// Weight of each innovation `e_k(s)` in `S_n = sum_{1 <= t <= n} X_t`,
/// stored as a coefficient field indexed by the site `s`.
pub fn partial_sum_coefficients(field: &CoefficientField, n: &MultiIndex, budget: u128) -> Result<CoefficientField> {
    check_block(n, field)?;
    let terms = (field.nnz() as u128).saturating_mul(n.product().max(0) as u128);
    if terms > budget {
        return Err(Error::ResourceBudget { requested: terms, budget });
    }
    let mut out = CoefficientField::zero(field.dimension(), field.channel_count());
    let ones = MultiIndex::ones(n.dim());
    for (k, j, a) in field.iter() {
        for t in BoxPoints::new(ones.coords(), n.coords()) {
            let s: Vec<i64> = t.iter().zip(j.coords()).map(|(t, j)| t - j).collect();
            out.add_at(k, MultiIndex::from(s), a)?;
        }
    }
    Ok(out)
}

/// `E (sum_m c_m e_m)^p` for independent innovations and an integer `p`,
/// by updating the raw moments `0..=p` one term at a time.
pub fn linear_form_moment(coefficients: impl IntoIterator<Item = f64>, law: InnovationLaw, p: u32) -> f64 {
    let p = p as usize;
    let mut binom = vec![vec![1.0f64; p + 1]; p + 1];
    for n in 1..=p {
        for r in 1..n {
            binom[n][r] = binom[n - 1][r - 1] + binom[n - 1][r];
        }
    }
    let law_moments: Vec<f64> = (0..=p).map(|r| law.raw_moment(r as u32)).collect();
    // moments[m] = E Y^m for the partial linear form Y
    let mut moments = vec![0.0; p + 1];
    moments[0] = 1.0;
    for c in coefficients {
        let mut next = vec![0.0; p + 1];
        for (m, slot) in next.iter_mut().enumerate() {
            let mut acc = 0.0;
            let mut cr = 1.0;
            for r in 0..=m {
                acc += binom[m][r] * cr * law_moments[r] * moments[m - r];
                cr *= c;
            }
            *slot = acc;
        }
        moments = next;
    }
    moments[p]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f1(pairs: &[(i64, f64)]) -> CoefficientField {
        CoefficientField::from_pairs(1, pairs.iter().map(|&(j, v)| (MultiIndex::from([j]), v))).unwrap()
    }

    fn bx(lo: &[i64], hi: &[i64]) -> LatticeBox {
        LatticeBox::new(MultiIndex::from(lo), MultiIndex::from(hi)).unwrap()
    }

    #[test]
    fn rademacher_box_is_reproducible() {
        let model = InnovationModel::new(InnovationLaw::Rademacher, 1);
        let b = bx(&[0, 0], &[1, 1]);
        let s1 = sample_innovations(&model, &b, 42).unwrap();
        let s2 = sample_innovations(&model, &b, 42).unwrap();
        assert_eq!(s1, s2);
        assert!(s1.values[0].iter().all(|v| *v == 1.0 || *v == -1.0));
    }

    #[test]
    fn overlapping_boxes_agree() {
        let model = InnovationModel::new(InnovationLaw::Gaussian, 2);
        let big = sample_innovations(&model, &bx(&[-3, -3], &[5, 5]), 9).unwrap();
        let small = sample_innovations(&model, &bx(&[0, 1], &[2, 4]), 9).unwrap();
        for t in BoxPoints::new(&[0, 1], &[2, 4]) {
            for k in 0..2 {
                assert_eq!(big.at(k, &t), small.at(k, &t));
            }
        }
    }

    #[test]
    fn identity_field_reproduces_innovations() {
        let model = InnovationModel::new(InnovationLaw::Uniform, 1);
        let b = bx(&[0, 0], &[3, 2]);
        let sample = sample_innovations(&model, &b, 1).unwrap();
        let f = CoefficientField::from_pairs(2, [(MultiIndex::zeros(2), 1.0)]).unwrap();
        assert_eq!(evaluate_field(&f, &sample, &b).unwrap().values, sample.values[0]);
        let zero = CoefficientField::zero(2, 1);
        assert!(evaluate_field(&zero, &sample, &b).unwrap().values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn moving_average_matches_naive_convolution() {
        let model = InnovationModel::new(InnovationLaw::Gaussian, 1);
        let sample = sample_innovations(&model, &bx(&[-5], &[20]), 3).unwrap();
        let f = f1(&[(0, 1.0), (1, 1.0)]);
        let grid = evaluate_field(&f, &sample, &bx(&[0], &[20])).unwrap();
        for t in 0..=20i64 {
            let want = sample.at(0, &[t]) + sample.at(0, &[t - 1]);
            assert_eq!(grid.at(&[t]), want);
        }
    }

    #[test]
    fn margin_is_enforced() {
        let model = InnovationModel::new(InnovationLaw::Gaussian, 1);
        let sample = sample_innovations(&model, &bx(&[0], &[10]), 3).unwrap();
        let f = f1(&[(1, 1.0)]);
        assert!(matches!(
            evaluate_field(&f, &sample, &bx(&[0], &[10])),
            Err(Error::InsufficientMargin)
        ));
        assert!(evaluate_field(&f, &sample, &bx(&[1], &[10])).is_ok());
    }

    #[test]
    fn budget_is_enforced() {
        let mut model = InnovationModel::new(InnovationLaw::Gaussian, 1);
        model.site_budget = 100;
        assert!(matches!(
            sample_innovations(&model, &bx(&[0, 0], &[10, 10]), 0),
            Err(Error::ResourceBudget { .. })
        ));
    }

    #[test]
    fn rademacher_fourth_moment_formula() {
        let f = f1(&[(0, 1.0)]);
        let c = partial_sum_coefficients(&f, &MultiIndex::from([100]), 1 << 20).unwrap();
        let m4 = linear_form_moment(c.iter().map(|(_, _, v)| v), InnovationLaw::Rademacher, 4);
        assert_eq!(m4, 3.0 * 100.0 * 100.0 - 2.0 * 100.0);
        let ma = partial_sum_coefficients(&f1(&[(0, 1.0), (1, 1.0)]), &MultiIndex::from([10]), 1 << 20).unwrap();
        assert_eq!(ma.sum_of_squares(), 2.0 + 9.0 * 4.0);
    }

    #[test]
    fn partial_sums_are_additive() {
        let model = InnovationModel::new(InnovationLaw::Gaussian, 1);
        let f = CoefficientField::from_pairs(2, [(MultiIndex::from([0, 0]), 1.0), (MultiIndex::from([1, 2]), -0.3)]).unwrap();
        let n = MultiIndex::from([6, 5]);
        let grids = partial_sums(&f, &model, &n, 3, 11).unwrap();
        let totals = partial_sum_totals(&f, &model, &n, 3, 11).unwrap();
        for (g, t) in grids.iter().zip(&totals) {
            assert!((g.total() - t).abs() < 1e-12);
            let split = g.rect_sum(&[1, 1], &[3, 5]) + g.rect_sum(&[4, 1], &[6, 5]);
            assert!((split - g.total()).abs() < 1e-12);
        }
        let one = partial_sums(&f, &model, &MultiIndex::ones(2), 1, 11).unwrap();
        let values = sample_field_values(&f, &model, &LatticeBox::block(&MultiIndex::ones(2)).unwrap(), 11, 0).unwrap();
        assert_eq!(one[0].total(), values.values[0]);
    }
}
