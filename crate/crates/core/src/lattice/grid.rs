//! Compressed-grid evaluation of sums of functions of box sums.
//!
//! Every series in the `conditions` module has the shape
//! `sum_{j in R} F(sum_{i in B(j)} a_i)` where `R` is a product of integer
//! ranges and `B(j)` is a product of intervals translating with `j`. Along
//! each axis the box sum only changes when an interval endpoint crosses a
//! support coordinate, so the sum over `j` collapses to a weighted sum over
//! O(support size) cells, even when `R` is unbounded.

use crate::error::{Error, Result};
use crate::lattice::CoefficientField;

/// Maximum number of prefix-sum slots or enumerated cells per evaluation.
pub const GRID_BUDGET: u128 = 1 << 27;

/// What is summed inside each box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layers {
    /// One value per channel: `sum_{i in B} a_{k,i}`.
    Channels,
    /// A single value: `sum_{i in B} sum_k a_{k,i}^2`.
    SquaredTotal,
}

/// Range of `j` and box shape along one axis.
///
/// The box along this axis is `[j + lo_off, j + hi_off]`, with `None`
/// meaning unbounded on that side. `j` ranges over `[j_lo, j_hi]`; an
/// unbounded end of the `j` range is only allowed when the box leaves the
/// support there, so that the sum is finite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AxisSpec {
    pub j_lo: Option<i64>,
    pub j_hi: Option<i64>,
    pub lo_off: Option<i64>,
    pub hi_off: Option<i64>,
}

impl AxisSpec {
    /// `j` fixed at `at` and the box covering the whole axis.
    pub fn full(at: i64) -> Self {
        AxisSpec {
            j_lo: Some(at),
            j_hi: Some(at),
            lo_off: None,
            hi_off: None,
        }
    }

    /// `j in [lo, hi]`, box `[j, inf)`.
    pub fn at_least(lo: Option<i64>, hi: Option<i64>) -> Self {
        AxisSpec {
            j_lo: lo,
            j_hi: hi,
            lo_off: Some(0),
            hi_off: None,
        }
    }

    /// `j in [lo, hi]`, box `(-inf, j + shift]`.
    pub fn at_most(lo: Option<i64>, hi: Option<i64>, shift: i64) -> Self {
        AxisSpec {
            j_lo: lo,
            j_hi: hi,
            lo_off: None,
            hi_off: Some(shift),
        }
    }

    /// `j in [lo, hi]`, box `[j, j + width]`.
    pub fn window(lo: Option<i64>, hi: Option<i64>, width: i64) -> Self {
        AxisSpec {
            j_lo: lo,
            j_hi: hi,
            lo_off: Some(0),
            hi_off: Some(width),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Direction {
    /// `P[i] = sum over compressed coordinates < i`.
    Forward,
    /// `P[i] = sum over compressed coordinates >= i`.
    Backward,
}

/// Support of a field with coordinates compressed per axis.
#[derive(Debug, Clone)]
pub struct CompressedSupport {
    dim: usize,
    channels: usize,
    coords: Vec<Vec<i64>>,
    // (compressed index per axis, channel, value)
    entries: Vec<(Vec<usize>, usize, f64)>,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    weight: f64,
    lo: usize,
    hi: usize,
}

impl CompressedSupport {
    pub fn new(field: &CoefficientField) -> Self {
        let dim = field.dimension();
        let mut coords: Vec<Vec<i64>> = vec![Vec::new(); dim];
        for (_, j, _) in field.iter() {
            for (q, c) in coords.iter_mut().enumerate() {
                c.push(j.get(q));
            }
        }
        for c in &mut coords {
            c.sort_unstable();
            c.dedup();
        }
        let entries = field
            .iter()
            .map(|(k, j, v)| {
                let idx = (0..dim)
                    .map(|q| coords[q].binary_search(&j.get(q)).expect("coordinate present"))
                    .collect();
                (idx, k, v)
            })
            .collect();
        CompressedSupport {
            dim,
            channels: field.channel_count(),
            coords,
            entries,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `sum_{j} F(box sums at j)` over the product of axis specs.
    ///
    /// Cells whose box misses the support are skipped, so `f` must vanish at
    /// zero box sums.
    pub fn sum<F>(&self, layers: Layers, specs: &[AxisSpec], mut f: F) -> Result<f64>
    where
        F: FnMut(&[f64]) -> f64,
    {
        if specs.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: specs.len(),
            });
        }
        if self.is_empty() {
            return Ok(0.0);
        }
        let mut segments = Vec::with_capacity(self.dim);
        let mut cells: u128 = 1;
        for (q, spec) in specs.iter().enumerate() {
            let segs = self.segments(q, spec)?;
            if segs.is_empty() {
                return Ok(0.0);
            }
            cells = cells.saturating_mul(segs.len() as u128);
            segments.push(segs);
        }
        if cells > GRID_BUDGET {
            return Err(Error::ResourceBudget {
                requested: cells,
                budget: GRID_BUDGET,
            });
        }
        let directions: Vec<Direction> = specs
            .iter()
            .map(|s| {
                if s.lo_off.is_none() {
                    Direction::Forward
                } else {
                    Direction::Backward
                }
            })
            .collect();
        let grid = PrefixGrid::build(self, layers, &directions)?;

        let mut total = 0.0;
        let mut cursor = vec![0usize; self.dim];
        let mut buf = vec![0.0; grid.layers];
        let mut lo = vec![0usize; self.dim];
        let mut hi = vec![0usize; self.dim];
        'cells: loop {
            let mut weight = 1.0;
            for q in 0..self.dim {
                let s = segments[q][cursor[q]];
                weight *= s.weight;
                lo[q] = s.lo;
                hi[q] = s.hi;
            }
            grid.box_sum(&lo, &hi, &mut buf);
            total += weight * f(&buf);
            // odometer, last axis fastest
            let mut q = self.dim;
            loop {
                if q == 0 {
                    break 'cells;
                }
                q -= 1;
                cursor[q] += 1;
                if cursor[q] < segments[q].len() {
                    break;
                }
                cursor[q] = 0;
            }
        }
        Ok(total)
    }

    fn segments(&self, q: usize, spec: &AxisSpec) -> Result<Vec<Segment>> {
        let coords = &self.coords[q];
        let (min_c, max_c) = (coords[0] as i128, *coords.last().unwrap() as i128);
        let mut lo = spec.j_lo.map(i128::from);
        let mut hi = spec.j_hi.map(i128::from);
        if let Some(b) = spec.hi_off {
            let floor = min_c - b as i128;
            lo = Some(lo.map_or(floor, |l| l.max(floor)));
        }
        if let Some(a) = spec.lo_off {
            let ceil = max_c - a as i128;
            hi = Some(hi.map_or(ceil, |h| h.min(ceil)));
        }
        let (lo, hi) = match (lo, hi) {
            (Some(lo), Some(hi)) => (lo, hi),
            _ => {
                return Err(Error::InvalidInput(format!(
                    "summation range along axis {q} is unbounded"
                )))
            }
        };
        if lo > hi {
            return Ok(Vec::new());
        }
        let mut starts: Vec<i128> = vec![lo];
        for &c in coords {
            let c = c as i128;
            if let Some(a) = spec.lo_off {
                starts.push(c - a as i128 + 1);
            }
            if let Some(b) = spec.hi_off {
                starts.push(c - b as i128);
            }
        }
        starts.retain(|&s| s >= lo && s <= hi);
        starts.sort_unstable();
        starts.dedup();
        let mut out = Vec::with_capacity(starts.len());
        for (t, &s) in starts.iter().enumerate() {
            let end = starts.get(t + 1).map_or(hi, |&n| n - 1);
            let lo_idx = match spec.lo_off {
                Some(a) => coords.partition_point(|&c| (c as i128) < s + a as i128),
                None => 0,
            };
            let hi_idx = match spec.hi_off {
                Some(b) => coords.partition_point(|&c| (c as i128) <= s + b as i128),
                None => coords.len(),
            };
            if lo_idx < hi_idx {
                out.push(Segment {
                    weight: (end - s + 1) as f64,
                    lo: lo_idx,
                    hi: hi_idx,
                });
            }
        }
        Ok(out)
    }
}

struct PrefixGrid {
    dim: usize,
    layers: usize,
    extents: Vec<usize>,
    strides: Vec<usize>,
    directions: Vec<Direction>,
    values: Vec<f64>,
}

impl PrefixGrid {
    fn build(support: &CompressedSupport, layers: Layers, directions: &[Direction]) -> Result<Self> {
        let dim = support.dim;
        let n_layers = match layers {
            Layers::Channels => support.channels,
            Layers::SquaredTotal => 1,
        };
        let extents: Vec<usize> = support.coords.iter().map(|c| c.len() + 1).collect();
        let slots = extents
            .iter()
            .fold(n_layers as u128, |acc, &e| acc.saturating_mul(e as u128));
        if slots > GRID_BUDGET {
            return Err(Error::ResourceBudget {
                requested: slots,
                budget: GRID_BUDGET,
            });
        }
        let mut strides = vec![n_layers; dim];
        for q in (0..dim.saturating_sub(1)).rev() {
            strides[q] = strides[q + 1] * extents[q + 1];
        }
        let mut values = vec![0.0; slots as usize];
        for (idx, k, v) in &support.entries {
            let mut pos = 0;
            for q in 0..dim {
                let slot = match directions[q] {
                    Direction::Forward => idx[q] + 1,
                    Direction::Backward => idx[q],
                };
                pos += slot * strides[q];
            }
            match layers {
                Layers::Channels => values[pos + k] += v,
                Layers::SquaredTotal => values[pos] += v * v,
            }
        }
        let total = values.len();
        for q in 0..dim {
            let stride = strides[q];
            let extent = extents[q];
            let block = stride * extent;
            for base in (0..total).step_by(block) {
                for inner in 0..stride {
                    let at = |i: usize| base + i * stride + inner;
                    match directions[q] {
                        Direction::Forward => {
                            for i in 1..extent {
                                values[at(i)] += values[at(i - 1)];
                            }
                        }
                        Direction::Backward => {
                            for i in (0..extent - 1).rev() {
                                values[at(i)] += values[at(i + 1)];
                            }
                        }
                    }
                }
            }
        }
        Ok(PrefixGrid {
            dim,
            layers: n_layers,
            extents,
            strides,
            directions: directions.to_vec(),
            values,
        })
    }

    /// Sum over compressed indices `lo <= idx < hi` by inclusion-exclusion.
    fn box_sum(&self, lo: &[usize], hi: &[usize], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for corner in 0..(1usize << self.dim) {
            let mut pos = 0;
            let mut negative = false;
            let mut skip = false;
            for q in 0..self.dim {
                let take_hi = corner & (1 << q) != 0;
                let (slot, minus) = match (self.directions[q], take_hi) {
                    (Direction::Forward, true) => (hi[q], false),
                    (Direction::Forward, false) => (lo[q], true),
                    (Direction::Backward, true) => (hi[q], true),
                    (Direction::Backward, false) => (lo[q], false),
                };
                // the outermost slot of either direction is identically zero
                let empty = match self.directions[q] {
                    Direction::Forward => slot == 0,
                    Direction::Backward => slot + 1 == self.extents[q],
                };
                if empty {
                    skip = true;
                    break;
                }
                negative ^= minus;
                pos += slot * self.strides[q];
            }
            if skip {
                continue;
            }
            for (l, o) in out.iter_mut().enumerate() {
                let v = self.values[pos + l];
                if negative {
                    *o -= v;
                } else {
                    *o += v;
                }
            }
        }
    }
}
