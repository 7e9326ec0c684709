//! Condition series checked against independent evaluations.

use cobound::conditions::{
    dyadic, gordin_sum, hannan_sum, heyde_adapted_sum, tail_norm_inequalities, tail_norms, tail_sum_check,
    tail_sum_constant, weighted_projection_sum,
};
use cobound::{CoefficientField, GeneratorRule, MultiIndex};
use proptest::prelude::*;

#[test]
fn dyadic_engine_matches_block_closed_forms() {
    // the engine compresses the gaps between spikes, so the generic route
    // reaches spikes at 2^40
    let rule = GeneratorRule::dyadic_spikes();
    for k in (0..=40).step_by(4) {
        let f = rule.materialize(k).unwrap();
        let pairs = [
            (gordin_sum(&f).unwrap(), dyadic::tail_norm_sum(k)),
            (heyde_adapted_sum(&f).unwrap(), dyadic::tail_square_sum(k)),
            (weighted_projection_sum(&f), dyadic::weighted_square_sum(k)),
            (hannan_sum(&f), dyadic::absolute_sum(k)),
        ];
        for (i, (generic, closed)) in pairs.iter().enumerate() {
            assert!((generic - closed).abs() <= 1e-9 * closed, "K={k} series {i}: {generic} vs {closed}");
        }
    }
}

#[test]
fn dyadic_tail_norm_sum_dominates_harmonic_numbers() {
    let mut harmonic = 0.0;
    for k in 1..=20u64 {
        harmonic += 1.0 / k as f64;
        assert!(dyadic::tail_norm_sum(k) > harmonic, "K={k}");
    }
}

fn weights_strategy(dim: usize) -> impl Strategy<Value = CoefficientField> {
    prop::collection::vec((prop::collection::vec(1..=6i64, dim), 0.0..1.0f64), 1..12).prop_map(move |entries| {
        CoefficientField::from_pairs(dim, entries.into_iter().map(|(i, v)| (MultiIndex::from(i), v))).unwrap()
    })
}

fn brute_tail_sum(w: &CoefficientField) -> f64 {
    let d = w.dimension();
    let hi = 6;
    let mut total = 0.0;
    let mut j = vec![1i64; d];
    'outer: loop {
        let s: f64 = w
            .iter()
            .filter(|(_, i, _)| (0..d).all(|q| i.get(q) >= j[q]))
            .map(|(_, _, v)| v)
            .sum();
        total += s * s;
        for q in (0..d).rev() {
            j[q] += 1;
            if j[q] <= hi {
                continue 'outer;
            }
            j[q] = 1;
        }
        return total;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn hannan_is_bounded_by_weighted_sum(entries in prop::collection::vec((prop::collection::vec(-5..=5i64, 2), -1.0..1.0f64), 1..10)) {
        let f = CoefficientField::from_pairs(2, entries.into_iter().map(|(i, v)| (MultiIndex::from(i), v))).unwrap();
        // Cauchy-Schwarz with sum over Z of 1/ibar^2 = pi^2/3 per axis
        let bound = (weighted_projection_sum(&f) * (std::f64::consts::PI.powi(2) / 3.0).powi(2)).sqrt();
        prop_assert!(hannan_sum(&f) <= bound * (1.0 + 1e-12));
    }

    #[test]
    fn tail_sum_inequality_1d(w in weights_strategy(1)) {
        let c = tail_sum_check(&w).unwrap();
        prop_assert!((c.lhs - brute_tail_sum(&w)).abs() <= 1e-12 * c.lhs.max(1.0));
        prop_assert!(c.lhs <= tail_sum_constant(1) * c.rhs);
    }

    #[test]
    fn tail_sum_inequality_2d(w in weights_strategy(2)) {
        let c = tail_sum_check(&w).unwrap();
        prop_assert!((c.lhs - brute_tail_sum(&w)).abs() <= 1e-12 * c.lhs.max(1.0));
        prop_assert!(c.lhs <= tail_sum_constant(2) * c.rhs);
    }

    #[test]
    fn tail_norm_chain(a in prop::collection::vec(0.0..1.0f64, 1..60)) {
        let b = tail_norms(&a);
        let r = tail_norm_inequalities(&b, &a).unwrap();
        prop_assert!(r.all_hold(), "{:?}", r);
        prop_assert!((r.weighted_tail - r.weighted_tail_by_coefficients).abs() <= 1e-9 * r.weighted_tail.max(1.0));
        prop_assert!(r.abel_residual <= 1e-9 * (1.0 + b.iter().sum::<f64>() * b.len() as f64));
    }
}
