use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::lattice::MultiIndex;

/// Direction of a one-axis tail in an orthant sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Orientation {
    /// Sum over `i_q >= j_q`.
    AtLeast,
    /// Sum over `i_q <= j_q`.
    AtMost,
}

/// Sparse coefficients `a_{k,j}` of a linear field
/// `f = sum_k sum_j a_{k,j} U_{-j} e_k`.
///
/// Channel `k` holds the coefficients in front of the innovation `e_k`.
/// Under this convention a field is adapted exactly when every stored index
/// lies in the nonnegative orthant, and `U_v` acts on coefficients by
/// `c'_j = c_{j+v}`. Exact zeros are never stored.
#[derive(Clone, PartialEq)]
pub struct CoefficientField {
    dim: usize,
    channels: Vec<BTreeMap<MultiIndex, f64>>,
}

impl std::fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut m = f.debug_map();
        for (k, j, v) in self.iter() {
            m.entry(&(k, j), &v);
        }
        m.finish()
    }
}

impl CoefficientField {
    /// The zero field with `channels` innovation channels.
    pub fn zero(dim: usize, channels: usize) -> Self {
        assert!(dim >= 1, "dimension must be positive");
        assert!(channels >= 1, "at least one channel is required");
        CoefficientField {
            dim,
            channels: vec![BTreeMap::new(); channels],
        }
    }

    /// Single-channel field from `(index, value)` pairs; repeated indices add up.
    pub fn from_pairs<I, J>(dim: usize, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (J, f64)>,
        J: Into<MultiIndex>,
    {
        Self::from_entries(dim, 1, pairs.into_iter().map(|(j, v)| (0, j.into(), v)))
    }

    /// Multi-channel field from `(channel, index, value)` triples.
    pub fn from_entries<I>(dim: usize, channels: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, MultiIndex, f64)>,
    {
        let mut field = Self::zero(dim, channels);
        for (k, j, v) in entries {
            field.add_at(k, j, v)?;
        }
        Ok(field)
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn channel(&self, k: usize) -> &BTreeMap<MultiIndex, f64> {
        &self.channels[k]
    }

    pub fn get(&self, k: usize, j: &MultiIndex) -> f64 {
        self.channels
            .get(k)
            .and_then(|c| c.get(j))
            .copied()
            .unwrap_or(0.0)
    }

    /// Number of stored (nonzero) coefficients over all channels.
    pub fn nnz(&self) -> usize {
        self.channels.iter().map(BTreeMap::len).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.channels.iter().all(BTreeMap::is_empty)
    }

    /// `(channel, index, value)` in channel-major, lexicographic index order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &MultiIndex, f64)> + '_ {
        self.channels
            .iter()
            .enumerate()
            .flat_map(|(k, c)| c.iter().map(move |(j, &v)| (k, j, v)))
    }

    fn check_channel(&self, k: usize) -> Result<()> {
        if k >= self.channels.len() {
            return Err(Error::InvalidInput(format!(
                "channel {k} out of range ({} channels)",
                self.channels.len()
            )));
        }
        Ok(())
    }

    /// Overwrite the coefficient at `(k, j)`.
    pub fn set(&mut self, k: usize, j: MultiIndex, value: f64) -> Result<()> {
        j.check_dim(self.dim)?;
        self.check_channel(k)?;
        if !value.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite coefficient at {j}")));
        }
        if value == 0.0 {
            self.channels[k].remove(&j);
        } else {
            self.channels[k].insert(j, value);
        }
        Ok(())
    }

    /// Accumulate `value` into the coefficient at `(k, j)`.
    pub fn add_at(&mut self, k: usize, j: MultiIndex, value: f64) -> Result<()> {
        j.check_dim(self.dim)?;
        self.check_channel(k)?;
        if !value.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite coefficient at {j}")));
        }
        accumulate(&mut self.channels[k], j, value);
        Ok(())
    }

    /// Coefficients of `U_v f`: output at `j` is input at `j + v`.
    pub fn shift(&self, v: &MultiIndex) -> Result<Self> {
        v.check_dim(self.dim)?;
        let channels = self
            .channels
            .iter()
            .map(|c| c.iter().map(|(j, &a)| (j - v, a)).collect())
            .collect();
        Ok(CoefficientField {
            dim: self.dim,
            channels,
        })
    }

    /// Coefficients of `(I - U_{e_q}) f` for the 0-based axis `q`: output at
    /// `j` is `c_j - c_{j+e_q}`.
    pub fn difference(&self, axis: usize) -> Result<Self> {
        self.check_axis(axis)?;
        let mut out = self.clone();
        for (k, c) in self.channels.iter().enumerate() {
            for (j, &a) in c {
                let lowered = j.with_coord(axis, j.get(axis) - 1);
                accumulate(&mut out.channels[k], lowered, -a);
            }
        }
        Ok(out)
    }

    pub(crate) fn check_axis(&self, axis: usize) -> Result<()> {
        if axis >= self.dim {
            return Err(Error::AxisOutOfRange {
                axis,
                dimension: self.dim,
            });
        }
        Ok(())
    }

    /// Per-channel sum of `a_{k,i}` over the orthant anchored at `j` with the
    /// given per-axis orientation.
    pub fn orthant_tail(&self, j: &MultiIndex, orientation: &[Orientation]) -> Result<Vec<f64>> {
        j.check_dim(self.dim)?;
        if orientation.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: orientation.len(),
            });
        }
        Ok(self
            .channels
            .iter()
            .map(|c| {
                c.iter()
                    .filter(|(i, _)| {
                        orientation.iter().enumerate().all(|(q, o)| match o {
                            Orientation::AtLeast => i.get(q) >= j.get(q),
                            Orientation::AtMost => i.get(q) <= j.get(q),
                        })
                    })
                    .map(|(_, &a)| a)
                    .sum()
            })
            .collect())
    }

    /// True iff every stored index is componentwise nonnegative.
    pub fn is_adapted(&self) -> bool {
        self.iter().all(|(_, j, _)| j.is_nonnegative())
    }

    /// Smallest box `[lo, hi]` containing the support, or `None` when zero.
    pub fn support_box(&self) -> Option<(MultiIndex, MultiIndex)> {
        let mut lo: Option<Vec<i64>> = None;
        let mut hi: Vec<i64> = Vec::new();
        for (_, j, _) in self.iter() {
            match lo.as_mut() {
                None => {
                    lo = Some(j.coords().to_vec());
                    hi = j.coords().to_vec();
                }
                Some(lo) => {
                    for q in 0..self.dim {
                        lo[q] = lo[q].min(j.get(q));
                        hi[q] = hi[q].max(j.get(q));
                    }
                }
            }
        }
        lo.map(|lo| (MultiIndex::from(lo), MultiIndex::from(hi)))
    }

    /// Keep only coefficients with `lo <= j <= hi`.
    pub fn restrict_to_box(&self, lo: &MultiIndex, hi: &MultiIndex) -> Result<Self> {
        lo.check_dim(self.dim)?;
        hi.check_dim(self.dim)?;
        let channels = self
            .channels
            .iter()
            .map(|c| {
                c.iter()
                    .filter(|(j, _)| lo.le_componentwise(j) && j.le_componentwise(hi))
                    .map(|(j, &a)| (j.clone(), a))
                    .collect()
            })
            .collect();
        Ok(CoefficientField {
            dim: self.dim,
            channels,
        })
    }

    /// Split into single-channel fields.
    pub fn split_channels(&self) -> Vec<CoefficientField> {
        self.channels
            .iter()
            .map(|c| CoefficientField {
                dim: self.dim,
                channels: vec![c.clone()],
            })
            .collect()
    }

    /// Stack single- or multi-channel fields of equal dimension channel-wise.
    pub fn merge_channels(parts: &[CoefficientField]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidInput("no channels to merge".into()))?;
        let mut channels = Vec::new();
        for p in parts {
            if p.dim != first.dim {
                return Err(Error::DimensionMismatch {
                    expected: first.dim,
                    found: p.dim,
                });
            }
            channels.extend(p.channels.iter().cloned());
        }
        Ok(CoefficientField {
            dim: first.dim,
            channels,
        })
    }

    fn check_compatible(&self, other: &CoefficientField) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        if self.channels.len() != other.channels.len() {
            return Err(Error::InvalidInput(format!(
                "channel count mismatch: {} vs {}",
                self.channels.len(),
                other.channels.len()
            )));
        }
        Ok(())
    }

    /// `alpha * self + beta * other`.
    pub fn linear_combination(&self, alpha: f64, other: &CoefficientField, beta: f64) -> Result<Self> {
        self.check_compatible(other)?;
        let mut out = Self::zero(self.dim, self.channels.len());
        for (k, j, a) in self.iter() {
            accumulate(&mut out.channels[k], j.clone(), alpha * a);
        }
        for (k, j, b) in other.iter() {
            accumulate(&mut out.channels[k], j.clone(), beta * b);
        }
        Ok(out)
    }

    pub fn add(&self, other: &CoefficientField) -> Result<Self> {
        self.linear_combination(1.0, other, 1.0)
    }

    pub fn scale(&self, alpha: f64) -> Self {
        let mut out = Self::zero(self.dim, self.channels.len());
        for (k, j, a) in self.iter() {
            accumulate(&mut out.channels[k], j.clone(), alpha * a);
        }
        out
    }

    /// `max |self - other|` over the union of supports.
    pub fn max_abs_diff(&self, other: &CoefficientField) -> Result<f64> {
        self.check_compatible(other)?;
        let mut worst: f64 = 0.0;
        for (k, j, a) in self.iter() {
            worst = worst.max((a - other.get(k, j)).abs());
        }
        for (k, j, b) in other.iter() {
            if !self.channels[k].contains_key(j) {
                worst = worst.max(b.abs());
            }
        }
        Ok(worst)
    }

    /// `sum_k sum_j a_{k,j}^2`, the variance of the field under unit innovations.
    pub fn sum_of_squares(&self) -> f64 {
        self.iter().map(|(_, _, a)| a * a).sum()
    }

    /// `sum_j a_{k,j}` for each channel.
    pub fn channel_totals(&self) -> Vec<f64> {
        self.channels.iter().map(|c| c.values().sum()).collect()
    }

    /// Long-run variance `sum_k (sum_j a_{k,j})^2` of the normalized partial sums.
    pub fn long_run_variance(&self) -> f64 {
        self.channel_totals().iter().map(|t| t * t).sum()
    }

    /// Delimited text: a `# dimension=d channels=c` header followed by one
    /// `k,j_1,...,j_d,value` record per stored coefficient.
    pub fn to_delimited(&self) -> String {
        let mut out = format!("# dimension={} channels={}\n", self.dim, self.channels.len());
        for (k, j, v) in self.iter() {
            let _ = write!(out, "{k}");
            for c in j.coords() {
                let _ = write!(out, ",{c}");
            }
            let _ = writeln!(out, ",{v}");
        }
        out
    }

    /// Parse the format written by [`CoefficientField::to_delimited`].
    ///
    /// Blank lines and `#` comments other than the header are ignored. Without
    /// a header, `dimension` must be supplied and the channel count is inferred.
    pub fn from_delimited(text: &str, dimension: Option<usize>) -> Result<Self> {
        let mut dim = dimension;
        let mut declared_channels: Option<usize> = None;
        let mut records: Vec<(usize, MultiIndex, f64)> = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some((d, c)) = parse_header(comment) {
                    if dimension.is_some_and(|want| want != d) {
                        return Err(Error::Parse {
                            line: line_no,
                            message: format!("header dimension {d} contradicts expected {}", dimension.unwrap()),
                        });
                    }
                    dim = Some(d);
                    declared_channels = Some(c);
                }
                continue;
            }
            let d = dim.ok_or_else(|| Error::Parse {
                line: line_no,
                message: "record before dimension is known".into(),
            })?;
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != d + 2 {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected {} fields, found {}", d + 2, fields.len()),
                });
            }
            let bad = |what: &str| Error::Parse {
                line: line_no,
                message: format!("cannot parse {what}"),
            };
            let k: usize = fields[0].parse().map_err(|_| bad("channel"))?;
            let coords = fields[1..=d]
                .iter()
                .map(|s| s.parse::<i64>().map_err(|_| bad("index")))
                .collect::<Result<Vec<_>>>()?;
            let v: f64 = fields[d + 1].parse().map_err(|_| bad("value"))?;
            if !v.is_finite() {
                return Err(bad("value"));
            }
            records.push((k, MultiIndex::from(coords), v));
        }
        let dim = dim.ok_or_else(|| Error::Parse {
            line: 0,
            message: "missing dimension".into(),
        })?;
        if dim == 0 {
            return Err(Error::Parse {
                line: 0,
                message: "dimension must be positive".into(),
            });
        }
        let inferred = records.iter().map(|r| r.0 + 1).max().unwrap_or(1);
        let channels = match declared_channels {
            Some(c) if c < inferred || c == 0 => {
                return Err(Error::Parse {
                    line: 0,
                    message: format!("channel index {} exceeds declared count {c}", inferred - 1),
                })
            }
            Some(c) => c,
            None => inferred,
        };
        Self::from_entries(dim, channels, records)
    }
}

fn parse_header(comment: &str) -> Option<(usize, usize)> {
    let mut dim = None;
    let mut channels = None;
    for tok in comment.split_whitespace() {
        if let Some(v) = tok.strip_prefix("dimension=") {
            dim = v.parse().ok();
        } else if let Some(v) = tok.strip_prefix("channels=") {
            channels = v.parse().ok();
        }
    }
    Some((dim?, channels?))
}

fn accumulate(map: &mut BTreeMap<MultiIndex, f64>, j: MultiIndex, value: f64) {
    if value == 0.0 {
        return;
    }
    match map.entry(j) {
        std::collections::btree_map::Entry::Vacant(e) => {
            e.insert(value);
        }
        std::collections::btree_map::Entry::Occupied(mut e) => {
            let s = *e.get() + value;
            if s == 0.0 {
                e.remove();
            } else {
                *e.get_mut() = s;
            }
        }
    }
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

    #[test]
    fn shift_examples() {
        assert_eq!(f1(&[(0, 1.0)]).shift(&MultiIndex::from([1])).unwrap(), f1(&[(-1, 1.0)]));
        assert_eq!(
            f2(&[([1, 1], 2.0)]).shift(&MultiIndex::from([1, 0])).unwrap(),
            f2(&[([0, 1], 2.0)])
        );
        let f = f2(&[([1, -1], 2.0), ([0, 3], -0.5)]);
        assert_eq!(f.shift(&MultiIndex::zeros(2)).unwrap(), f);
        assert!(matches!(
            f.shift(&MultiIndex::from([1])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn difference_examples() {
        assert_eq!(f1(&[(0, 1.0)]).difference(0).unwrap(), f1(&[(0, 1.0), (-1, -1.0)]));
        assert_eq!(
            f1(&[(0, 1.0), (-1, 1.0)]).difference(0).unwrap(),
            f1(&[(0, 1.0), (-2, -1.0)])
        );
        let f = f2(&[([1, 1], 1.0)]);
        let want = f2(&[([1, 1], 1.0), ([0, 1], -1.0), ([1, 0], -1.0), ([0, 0], 1.0)]);
        assert_eq!(f.difference(1).unwrap().difference(0).unwrap(), want);
        assert_eq!(f.difference(0).unwrap().difference(1).unwrap(), want);
        assert!(matches!(f.difference(2), Err(Error::AxisOutOfRange { .. })));
    }

    #[test]
    fn orthant_tail_examples() {
        use Orientation::*;
        let f = f2(&[([0, 0], 1.0), ([1, 1], 2.0)]);
        assert_eq!(f.orthant_tail(&MultiIndex::from([0, 0]), &[AtLeast, AtLeast]).unwrap(), vec![3.0]);
        assert_eq!(f.orthant_tail(&MultiIndex::from([1, 0]), &[AtLeast, AtLeast]).unwrap(), vec![2.0]);
        let g = f1(&[(-1, 1.0), (0, 1.0)]);
        assert_eq!(g.orthant_tail(&MultiIndex::from([-1]), &[AtMost]).unwrap(), vec![1.0]);
    }

    #[test]
    fn zeros_are_not_stored() {
        let mut f = f1(&[(0, 1.0)]);
        f.add_at(0, MultiIndex::from([0]), -1.0).unwrap();
        assert!(f.is_zero());
        f.set(0, MultiIndex::from([3]), 0.0).unwrap();
        assert_eq!(f.nnz(), 0);
    }

    #[test]
    fn adaptedness() {
        assert!(f2(&[([0, 3], 1.0)]).is_adapted());
        assert!(!f2(&[([0, -1], 1.0)]).is_adapted());
        assert!(CoefficientField::zero(3, 2).is_adapted());
    }

    #[test]
    fn delimited_round_trip() {
        let f = CoefficientField::from_entries(
            2,
            2,
            vec![
                (0, MultiIndex::from([0, -3]), 0.1),
                (1, MultiIndex::from([2, 5]), -1.0 / 3.0),
            ],
        )
        .unwrap();
        let text = f.to_delimited();
        assert!(text.starts_with("# dimension=2 channels=2\n"));
        assert_eq!(CoefficientField::from_delimited(&text, None).unwrap(), f);
        let bare = "0,1,2.5\n\n0,-1,1\n";
        let g = CoefficientField::from_delimited(bare, Some(1)).unwrap();
        assert_eq!(g, f1(&[(1, 2.5), (-1, 1.0)]));
        assert!(matches!(
            CoefficientField::from_delimited("0,1\n", Some(1)),
            Err(Error::Parse { line: 1, .. })
        ));
    }
}
