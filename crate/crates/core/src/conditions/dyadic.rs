//! Block-wise closed forms for the dyadic-spike family.
//!
//! The family has `a_{2^k} = eps_k` (`eps_0 = 1`, `eps_k = 2^{-k}/k`) and
//! zeros elsewhere. Every tail-type series is constant on the dyadic blocks
//! `(2^{k-1}, 2^k]`, so a partial sum over `K` blocks costs O(K) regardless
//! of how far out `2^K` lies. The ratio recursions below avoid forming
//! `2^{-k}` or `2^k` separately, which would under- or overflow for large `k`.

use crate::lattice::dyadic_weight;

/// `sum_{j >= 0} sqrt(sum_{i >= j} a_i^2)` with spikes `0..=blocks`.
pub fn tail_norm_sum(blocks: u64) -> f64 {
    if blocks == 0 {
        return 2.0;
    }
    // r_k = sum_{m=k..K} eps_m^2 / eps_k^2, built from the top block down
    let mut r = 1.0;
    let mut total = 0.0;
    for k in (1..=blocks).rev() {
        if k < blocks {
            let ratio = k as f64 / (k as f64 + 1.0);
            r = 1.0 + ratio * ratio / 4.0 * r;
        }
        // block (2^{k-1}, 2^k] has 2^{k-1} indices, each with b = eps_k sqrt(r_k)
        total += r.sqrt() / (2.0 * k as f64);
    }
    // j = 0 and j = 1 see every spike: b^2 = 1 + eps_1^2 r_1
    let head = (1.0 + r / 4.0).sqrt();
    total + 2.0 * head
}

/// `sum_i (i+1)^2 a_i^2` with spikes `0..=blocks`.
pub fn weighted_square_sum(blocks: u64) -> f64 {
    let tail: f64 = (1..=blocks)
        .rev()
        .map(|k| {
            let k = k as f64;
            let w = 1.0 + (-k).exp2();
            w * w / (k * k)
        })
        .sum();
    4.0 + tail
}

/// `sum_i |a_i|` with spikes `0..=blocks`.
pub fn absolute_sum(blocks: u64) -> f64 {
    let tail: f64 = (1..=blocks).rev().map(dyadic_weight).sum();
    1.0 + tail
}

/// `sum_{j >= 0} (sum_{i >= j} a_i)^2` with spikes `0..=blocks`.
pub fn tail_square_sum(blocks: u64) -> f64 {
    if blocks == 0 {
        return 2.0;
    }
    // q_k = sum_{m=k..K} eps_m / eps_k
    let mut q = 1.0;
    let mut total = 0.0;
    for k in (1..=blocks).rev() {
        if k < blocks {
            q = 1.0 + k as f64 / (2.0 * (k as f64 + 1.0)) * q;
        }
        let kf = k as f64;
        // 2^{k-1} (eps_k q_k)^2 = 2^{-k-1} q_k^2 / k^2
        total += (-(kf + 1.0)).exp2() * q * q / (kf * kf);
    }
    let head = 1.0 + q / 2.0;
    total + 2.0 * head * head
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::GeneratorRule;

    // direct evaluation over every j up to the last spike; plain summation
    // over ~2^K terms limits agreement to about 1e-11
    fn direct(blocks: u64) -> (f64, f64, f64, f64) {
        let f = GeneratorRule::dyadic_spikes().materialize(blocks).unwrap();
        let spikes: Vec<(i64, f64)> = f.iter().map(|(_, j, v)| (j.get(0), v)).collect();
        let last = spikes.last().unwrap().0;
        let mut gordin = 0.0;
        let mut heyde = 0.0;
        for j in 0..=last {
            let sq: f64 = spikes.iter().filter(|s| s.0 >= j).map(|s| s.1 * s.1).sum();
            let lin: f64 = spikes.iter().filter(|s| s.0 >= j).map(|s| s.1).sum();
            gordin += sq.sqrt();
            heyde += lin * lin;
        }
        let weighted = spikes.iter().map(|s| ((s.0 + 1) as f64 * s.1).powi(2)).sum();
        let hannan = spikes.iter().map(|s| s.1).sum();
        (gordin, weighted, hannan, heyde)
    }

    #[test]
    fn closed_forms_match_direct_sums() {
        for k in 0..=16 {
            let (g, w, h, y) = direct(k);
            assert!((tail_norm_sum(k) - g).abs() < 1e-10 * g, "K={k}: {} vs {g}", tail_norm_sum(k));
            assert!((weighted_square_sum(k) - w).abs() < 1e-12 * w, "K={k}");
            assert!((absolute_sum(k) - h).abs() < 1e-14 * h, "K={k}");
            assert!((tail_square_sum(k) - y).abs() < 1e-10 * y, "K={k}");
        }
    }

    #[test]
    fn huge_block_counts_stay_finite() {
        let k = 1 << 22;
        assert!(tail_norm_sum(k).is_finite());
        assert!(tail_square_sum(k).is_finite());
        assert!(weighted_square_sum(k) < 4.0 + 2.0 * std::f64::consts::PI.powi(2) / 6.0);
        assert!(absolute_sum(k) < 1.0 + std::f64::consts::LN_2 + 1e-12);
    }
}
