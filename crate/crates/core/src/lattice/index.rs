use std::fmt;
use std::ops::{Add, Neg, Sub};

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

/// A point of `Z^d`.
///
/// Ordering is lexicographic, which fixes the summation order of every
/// reduction over a coefficient map. The componentwise partial order used by
/// orthant sums is [`MultiIndex::le_componentwise`].
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(SmallVec<[i64; 4]>);

impl MultiIndex {
    pub fn new(coords: impl IntoIterator<Item = i64>) -> Self {
        MultiIndex(coords.into_iter().collect())
    }

    pub fn zeros(dim: usize) -> Self {
        MultiIndex(SmallVec::from_elem(0, dim))
    }

    pub fn ones(dim: usize) -> Self {
        MultiIndex(SmallVec::from_elem(1, dim))
    }

    pub fn filled(dim: usize, value: i64) -> Self {
        MultiIndex(SmallVec::from_elem(value, dim))
    }

    /// Unit vector along `axis` (0-based).
    pub fn unit(dim: usize, axis: usize) -> Self {
        let mut idx = Self::zeros(dim);
        idx.0[axis] = 1;
        idx
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn get(&self, axis: usize) -> i64 {
        self.0[axis]
    }

    pub fn with_coord(&self, axis: usize, value: i64) -> Self {
        let mut idx = self.clone();
        idx.0[axis] = value;
        idx
    }

    /// `self <= other` in every coordinate.
    pub fn le_componentwise(&self, other: &MultiIndex) -> bool {
        self.0.iter().zip(other.0.iter()).all(|(a, b)| a <= b)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.0.iter().all(|&c| c >= 0)
    }

    /// Product of coordinates; the lattice volume `|n|` of a block size.
    pub fn product(&self) -> i128 {
        self.0.iter().map(|&c| c as i128).product()
    }

    pub(crate) fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: self.dim(),
            });
        }
        Ok(())
    }
}

/// Every point of the inclusive box `[lo, hi]`, last axis fastest.
#[derive(Debug, Clone)]
pub struct BoxPoints {
    lo: Vec<i64>,
    hi: Vec<i64>,
    next: Option<Vec<i64>>,
}

impl BoxPoints {
    pub fn new(lo: &[i64], hi: &[i64]) -> Self {
        assert_eq!(lo.len(), hi.len());
        let empty = lo.iter().zip(hi).any(|(l, h)| l > h);
        BoxPoints {
            lo: lo.to_vec(),
            hi: hi.to_vec(),
            next: (!empty).then(|| lo.to_vec()),
        }
    }
}

impl Iterator for BoxPoints {
    type Item = Vec<i64>;

    fn next(&mut self) -> Option<Vec<i64>> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut q = succ.len();
        while q > 0 {
            q -= 1;
            if succ[q] < self.hi[q] {
                succ[q] += 1;
                self.next = Some(succ);
                return Some(current);
            }
            succ[q] = self.lo[q];
        }
        Some(current)
    }
}

impl From<Vec<i64>> for MultiIndex {
    fn from(v: Vec<i64>) -> Self {
        MultiIndex(SmallVec::from_vec(v))
    }
}

impl From<&[i64]> for MultiIndex {
    fn from(v: &[i64]) -> Self {
        MultiIndex(SmallVec::from_slice(v))
    }
}

impl<const N: usize> From<[i64; N]> for MultiIndex {
    fn from(v: [i64; N]) -> Self {
        MultiIndex(v.iter().copied().collect())
    }
}

impl Add for &MultiIndex {
    type Output = MultiIndex;
    fn add(self, rhs: &MultiIndex) -> MultiIndex {
        debug_assert_eq!(self.dim(), rhs.dim());
        MultiIndex(self.0.iter().zip(rhs.0.iter()).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &MultiIndex {
    type Output = MultiIndex;
    fn sub(self, rhs: &MultiIndex) -> MultiIndex {
        debug_assert_eq!(self.dim(), rhs.dim());
        MultiIndex(self.0.iter().zip(rhs.0.iter()).map(|(a, b)| a - b).collect())
    }
}

impl Neg for &MultiIndex {
    type Output = MultiIndex;
    fn neg(self) -> MultiIndex {
        MultiIndex(self.0.iter().map(|a| -a).collect())
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// A subset `S` of the axes `{1, .., d}`, stored as a bitmask over 0-based
/// axes.
///
/// The textual form is a bitstring whose `q`-th character (1-based) is `1`
/// iff axis `q` belongs to the set, so `"110"` is `{1, 2}` in dimension 3.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SubsetMask {
    dim: u8,
    bits: u32,
}

pub const MAX_DIMENSION: usize = 16;

impl SubsetMask {
    pub fn new(dim: usize, bits: u32) -> Self {
        assert!(dim <= MAX_DIMENSION, "dimension {dim} exceeds {MAX_DIMENSION}");
        assert!(bits < (1u32 << dim), "mask {bits:#b} has bits outside dimension {dim}");
        SubsetMask {
            dim: dim as u8,
            bits,
        }
    }

    pub fn empty(dim: usize) -> Self {
        Self::new(dim, 0)
    }

    pub fn full(dim: usize) -> Self {
        Self::new(dim, (1u32 << dim) - 1)
    }

    pub fn from_axes(dim: usize, axes: impl IntoIterator<Item = usize>) -> Self {
        let bits = axes.into_iter().fold(0u32, |acc, q| {
            assert!(q < dim, "axis {q} out of range for dimension {dim}");
            acc | (1 << q)
        });
        Self::new(dim, bits)
    }

    /// All `2^d` subsets in increasing bit order.
    pub fn all(dim: usize) -> impl Iterator<Item = SubsetMask> {
        (0..(1u32 << dim)).map(move |bits| SubsetMask::new(dim, bits))
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn contains(&self, axis: usize) -> bool {
        self.bits & (1 << axis) != 0
    }

    pub fn len(&self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.bits == 0
    }

    pub fn complement(&self) -> SubsetMask {
        SubsetMask::new(self.dim(), !self.bits & ((1u32 << self.dim) - 1))
    }

    pub fn with(&self, axis: usize) -> SubsetMask {
        SubsetMask::new(self.dim(), self.bits | (1 << axis))
    }

    pub fn axes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.dim()).filter(move |&q| self.contains(q))
    }

    /// Every subset of `self`, including the empty set and `self`.
    pub fn subsets(&self) -> impl Iterator<Item = SubsetMask> {
        let dim = self.dim();
        let bits = self.bits;
        // standard sub-mask enumeration, emitted in increasing order
        let mut subs = Vec::with_capacity(1 << bits.count_ones());
        let mut s = bits;
        loop {
            subs.push(s);
            if s == 0 {
                break;
            }
            s = (s - 1) & bits;
        }
        subs.reverse();
        subs.into_iter().map(move |b| SubsetMask::new(dim, b))
    }

    pub fn to_bitstring(&self) -> String {
        (0..self.dim())
            .map(|q| if self.contains(q) { '1' } else { '0' })
            .collect()
    }

    pub fn from_bitstring(s: &str) -> Result<Self> {
        let dim = s.len();
        if dim == 0 || dim > MAX_DIMENSION {
            return Err(Error::InvalidInput(format!("bad subset bitstring {s:?}")));
        }
        let mut bits = 0u32;
        for (q, ch) in s.chars().enumerate() {
            match ch {
                '1' => bits |= 1 << q,
                '0' => {}
                _ => return Err(Error::InvalidInput(format!("bad subset bitstring {s:?}"))),
            }
        }
        Ok(SubsetMask::new(dim, bits))
    }
}

impl fmt::Debug for SubsetMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S[{}]", self.to_bitstring())
    }
}

impl fmt::Display for SubsetMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_bitstring())
    }
}

impl Serialize for SubsetMask {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_bitstring())
    }
}

impl<'de> Deserialize<'de> for SubsetMask {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        SubsetMask::from_bitstring(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_order_is_componentwise() {
        let a = MultiIndex::from([0, 2]);
        let b = MultiIndex::from([1, 2]);
        let c = MultiIndex::from([1, 1]);
        assert!(a.le_componentwise(&b));
        assert!(!b.le_componentwise(&a));
        assert!(!a.le_componentwise(&c) && !c.le_componentwise(&a));
    }

    #[test]
    fn subsets_enumeration_is_total_and_duplicate_free() {
        for d in 1..=5 {
            let all: Vec<_> = SubsetMask::all(d).collect();
            assert_eq!(all.len(), 1 << d);
            let mut seen = std::collections::BTreeSet::new();
            for s in &all {
                assert!(seen.insert(*s));
                assert_eq!(s.complement().complement(), *s);
                assert_eq!(s.len() + s.complement().len(), d);
                assert_eq!(s.bits() & s.complement().bits(), 0);
            }
        }
        let s = SubsetMask::from_axes(4, [0, 2, 3]);
        let subs: Vec<_> = s.subsets().collect();
        assert_eq!(subs.len(), 8);
        assert!(subs.iter().all(|t| t.bits() & !s.bits() == 0));
    }

    #[test]
    fn box_points_enumerates_in_order() {
        let pts: Vec<_> = BoxPoints::new(&[0, 1], &[1, 2]).collect();
        assert_eq!(pts, vec![vec![0, 1], vec![0, 2], vec![1, 1], vec![1, 2]]);
        assert_eq!(BoxPoints::new(&[0, 3], &[1, 2]).count(), 0);
        assert_eq!(BoxPoints::new(&[5], &[5]).count(), 1);
    }

    #[test]
    fn bitstring_round_trip() {
        let s = SubsetMask::from_axes(3, [0, 1]);
        assert_eq!(s.to_bitstring(), "110");
        assert_eq!(SubsetMask::from_bitstring("110").unwrap(), s);
        assert!(SubsetMask::from_bitstring("1a0").is_err());
        assert!(SubsetMask::from_bitstring("").is_err());
    }
}
