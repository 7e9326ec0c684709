//! Generator rules: infinite coefficient families materialized at a cutoff.

use std::fmt;

use crate::error::{Error, Result};
use crate::lattice::{CoefficientField, MultiIndex};

/// Largest number of coefficients a rule may materialize at once.
pub const MATERIALIZE_BUDGET: u128 = 1 << 25;

/// Largest block count for which the dyadic-spike family is materialized.
pub const DYADIC_MAX_BLOCKS: u64 = 62;

#[derive(Debug, Clone, PartialEq)]
pub enum RuleKind {
    /// A fixed finite-support field; the cutoff restricts it to `[-N, N]^d`.
    Explicit(CoefficientField),
    /// `a_i = prod_q rho_q^{i_q}` on `[0, N]^d`.
    Geometric { rho: Vec<f64> },
    /// `a_i = prod_q (i_q + 1)^{-alpha_q}` on `[0, N]^d`.
    Power { alpha: Vec<f64> },
    /// One dimension, spikes `a_{2^k} = eps_k` with `eps_0 = 1` and
    /// `eps_k = 2^{-k}/k`. The cutoff is the number of blocks `K`: the
    /// materialized field holds the spikes `k = 0..=K`.
    DyadicSpikes,
    /// Two dimensions, `a_{0,j} = 1/j` for `1 <= j <= N` and zero elsewhere.
    HarmonicAxis,
}

/// An infinite (or finite) family of coefficients with an explicit
/// truncation parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorRule {
    dim: usize,
    kind: RuleKind,
}

impl GeneratorRule {
    pub fn explicit(field: CoefficientField) -> Self {
        GeneratorRule {
            dim: field.dimension(),
            kind: RuleKind::Explicit(field),
        }
    }

    pub fn geometric(rho: Vec<f64>) -> Result<Self> {
        if rho.is_empty() {
            return Err(Error::InvalidRule("geometric rule needs one ratio per axis".into()));
        }
        if let Some(r) = rho.iter().find(|r| !(**r > 0.0 && **r < 1.0)) {
            return Err(Error::InvalidRule(format!("geometric ratio {r} outside (0, 1)")));
        }
        Ok(GeneratorRule {
            dim: rho.len(),
            kind: RuleKind::Geometric { rho },
        })
    }

    pub fn power(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::InvalidRule("power rule needs one exponent per axis".into()));
        }
        if let Some(a) = alpha.iter().find(|a| !(**a > 0.5 && a.is_finite())) {
            return Err(Error::InvalidRule(format!(
                "power exponent {a} must exceed 1/2 for square summability"
            )));
        }
        Ok(GeneratorRule {
            dim: alpha.len(),
            kind: RuleKind::Power { alpha },
        })
    }

    pub fn dyadic_spikes() -> Self {
        GeneratorRule {
            dim: 1,
            kind: RuleKind::DyadicSpikes,
        }
    }

    pub fn harmonic_axis() -> Self {
        GeneratorRule {
            dim: 2,
            kind: RuleKind::HarmonicAxis,
        }
    }

    pub fn kind(&self) -> &RuleKind {
        &self.kind
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn channel_count(&self) -> usize {
        match &self.kind {
            RuleKind::Explicit(f) => f.channel_count(),
            _ => 1,
        }
    }

    pub fn is_adapted(&self) -> bool {
        match &self.kind {
            RuleKind::Explicit(f) => f.is_adapted(),
            _ => true,
        }
    }

    /// Short token naming the rule family.
    pub fn token(&self) -> &'static str {
        match self.kind {
            RuleKind::Explicit(_) => "explicit",
            RuleKind::Geometric { .. } => "geometric",
            RuleKind::Power { .. } => "power",
            RuleKind::DyadicSpikes => "dyadic-spikes",
            RuleKind::HarmonicAxis => "harmonic-axis",
        }
    }

    /// Upper bound on `sum_k sum_j a_{k,j}^2` over the untruncated family;
    /// finiteness certifies the family defines an L^2 field.
    pub fn square_sum_bound(&self) -> f64 {
        match &self.kind {
            RuleKind::Explicit(f) => f.sum_of_squares(),
            RuleKind::Geometric { rho } => rho.iter().map(|r| 1.0 / (1.0 - r * r)).product(),
            // sum_{m>=1} m^{-2a} <= 1 + int_1^inf x^{-2a} dx
            RuleKind::Power { alpha } => alpha.iter().map(|a| 1.0 + 1.0 / (2.0 * a - 1.0)).product(),
            // 1 + sum_k 2^{-2k}/k^2 <= 1 + sum_k 4^{-k}
            RuleKind::DyadicSpikes => 1.0 + 1.0 / 3.0,
            RuleKind::HarmonicAxis => std::f64::consts::PI.powi(2) / 6.0,
        }
    }

    /// Number of coefficients the materialization at `cutoff` would store.
    pub fn support_size(&self, cutoff: u64) -> u128 {
        match &self.kind {
            RuleKind::Explicit(f) => f.nnz() as u128,
            RuleKind::Geometric { .. } | RuleKind::Power { .. } => {
                (cutoff as u128 + 1).saturating_pow(self.dim as u32)
            }
            RuleKind::DyadicSpikes => cutoff.min(DYADIC_MAX_BLOCKS) as u128 + 1,
            RuleKind::HarmonicAxis => cutoff as u128,
        }
    }

    /// Finite-support truncation at `cutoff`.
    ///
    /// Materializations at `N < N'` agree on the support of the smaller one.
    pub fn materialize(&self, cutoff: u64) -> Result<CoefficientField> {
        let size = self.support_size(cutoff);
        if size > MATERIALIZE_BUDGET {
            return Err(Error::ResourceBudget {
                requested: size,
                budget: MATERIALIZE_BUDGET,
            });
        }
        if cutoff > i64::MAX as u64 {
            return Err(Error::CutoffTooLarge {
                cutoff,
                reason: "exceeds the index range",
            });
        }
        let n = cutoff as i64;
        match &self.kind {
            RuleKind::Explicit(f) => f.restrict_to_box(&MultiIndex::filled(self.dim, -n), &MultiIndex::filled(self.dim, n)),
            RuleKind::Geometric { rho } => Ok(product_box(self.dim, n, |q, i| rho[q].powi(i as i32))),
            RuleKind::Power { alpha } => Ok(product_box(self.dim, n, |q, i| ((i + 1) as f64).powf(-alpha[q]))),
            RuleKind::DyadicSpikes => {
                if cutoff > DYADIC_MAX_BLOCKS {
                    return Err(Error::CutoffTooLarge {
                        cutoff,
                        reason: "spike positions 2^k overflow the index range",
                    });
                }
                CoefficientField::from_pairs(1, (0..=cutoff).map(|k| (MultiIndex::from([1i64 << k]), dyadic_weight(k))))
            }
            RuleKind::HarmonicAxis => {
                CoefficientField::from_pairs(2, (1..=n).map(|j| (MultiIndex::from([0, j]), 1.0 / j as f64)))
            }
        }
    }
}

/// `eps_k` of the dyadic-spike family.
pub fn dyadic_weight(k: u64) -> f64 {
    if k == 0 {
        1.0
    } else {
        (-(k as f64)).exp2() / k as f64
    }
}

// separable coefficients prod_q w(q, i_q) on [0, n]^d
fn product_box(dim: usize, n: i64, w: impl Fn(usize, i64) -> f64) -> CoefficientField {
    let weights: Vec<Vec<f64>> = (0..dim).map(|q| (0..=n).map(|i| w(q, i)).collect()).collect();
    let mut field = CoefficientField::zero(dim, 1);
    let mut idx = vec![0i64; dim];
    loop {
        let v: f64 = (0..dim).map(|q| weights[q][idx[q] as usize]).product();
        field
            .set(0, MultiIndex::from(idx.as_slice()), v)
            .expect("finite separable coefficient");
        let mut q = dim;
        loop {
            if q == 0 {
                return field;
            }
            q -= 1;
            idx[q] += 1;
            if idx[q] <= n {
                break;
            }
            idx[q] = 0;
        }
    }
}

impl fmt::Display for GeneratorRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            RuleKind::Explicit(field) => write!(f, "explicit(d={}, nnz={})", self.dim, field.nnz()),
            RuleKind::Geometric { rho } => write!(f, "geometric(rho={rho:?})"),
            RuleKind::Power { alpha } => write!(f, "power(alpha={alpha:?})"),
            RuleKind::DyadicSpikes => write!(f, "dyadic-spikes"),
            RuleKind::HarmonicAxis => write!(f, "harmonic-axis"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_validation() {
        assert!(GeneratorRule::geometric(vec![0.5, 0.99]).is_ok());
        assert!(GeneratorRule::geometric(vec![1.0]).is_err());
        assert!(GeneratorRule::geometric(vec![0.0]).is_err());
        assert!(GeneratorRule::power(vec![0.51]).is_ok());
        assert!(GeneratorRule::power(vec![0.5]).is_err());
        assert!(GeneratorRule::power(vec![f64::NAN]).is_err());
    }

    #[test]
    fn materializations_are_nested() {
        let rules = [
            GeneratorRule::geometric(vec![0.5, 0.25]).unwrap(),
            GeneratorRule::power(vec![1.5]).unwrap(),
            GeneratorRule::dyadic_spikes(),
            GeneratorRule::harmonic_axis(),
        ];
        for rule in &rules {
            let small = rule.materialize(5).unwrap();
            let large = rule.materialize(9).unwrap();
            for (k, j, v) in small.iter() {
                assert_eq!(large.get(k, j), v, "{rule} at {j}");
            }
            assert!(large.nnz() > small.nnz());
            assert!(large.sum_of_squares() <= rule.square_sum_bound());
        }
    }

    #[test]
    fn dyadic_spikes_positions() {
        let f = GeneratorRule::dyadic_spikes().materialize(3).unwrap();
        let got: Vec<(i64, f64)> = f.iter().map(|(_, j, v)| (j.get(0), v)).collect();
        assert_eq!(got, vec![(1, 1.0), (2, 0.5), (4, 0.125), (8, 0.125 / 3.0)]);
        assert!(matches!(
            GeneratorRule::dyadic_spikes().materialize(63),
            Err(Error::CutoffTooLarge { .. })
        ));
    }

    #[test]
    fn harmonic_axis_support() {
        let f = GeneratorRule::harmonic_axis().materialize(4).unwrap();
        assert_eq!(f.nnz(), 4);
        assert_eq!(f.get(0, &MultiIndex::from([0, 4])), 0.25);
        assert_eq!(f.get(0, &MultiIndex::from([0, 0])), 0.0);
    }

    #[test]
    fn budget_is_enforced() {
        let rule = GeneratorRule::geometric(vec![0.5, 0.5, 0.5]).unwrap();
        assert!(matches!(rule.materialize(1000), Err(Error::ResourceBudget { .. })));
    }
}
