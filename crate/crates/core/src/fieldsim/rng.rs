//! Counter-based innovation draws.
//!
//! Every draw is a pure function of `(seed, purpose, replication, channel,
//! site)`: the ChaCha8 key comes from the seed, the stream id packs purpose,
//! replication and channel, and the word position is derived from the site
//! coordinates. Sites along the last axis are adjacent in the keystream, so a
//! row of a box is produced by one seek followed by sequential reads.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Identifier recorded in output headers.
pub const SCHEME_ID: &str = "chacha8-site-v1";

/// Keystream words consumed per site (two `u64` draws).
const WORDS_PER_SITE: u128 = 4;

/// Independent uses of the generator under one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Purpose {
    Innovations = 1,
    NormEstimate = 2,
    ImportanceSampling = 3,
    /// Randomized inputs for batch checks.
    Auxiliary = 4,
}

/// Unit-variance innovation distributions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InnovationLaw {
    Rademacher,
    Gaussian,
    Uniform,
}

impl InnovationLaw {
    pub fn token(&self) -> &'static str {
        match self {
            InnovationLaw::Rademacher => "rademacher",
            InnovationLaw::Gaussian => "gaussian",
            InnovationLaw::Uniform => "uniform",
        }
    }

    /// Map two uniform 64-bit words to one draw.
    #[inline]
    pub fn transform(&self, x: u64, y: u64) -> f64 {
        match self {
            InnovationLaw::Rademacher => {
                if x >> 63 == 1 {
                    1.0
                } else {
                    -1.0
                }
            }
            InnovationLaw::Gaussian => {
                // Box-Muller with u1 in (0, 1] so the log is finite
                let u1 = unit_open(x);
                let u2 = (y >> 11) as f64 * (-53f64).exp2();
                (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
            }
            InnovationLaw::Uniform => {
                let u = (x >> 11) as f64 * (-53f64).exp2();
                3f64.sqrt() * (2.0 * u - 1.0)
            }
        }
    }

    /// `E e^r` for a single innovation.
    pub fn raw_moment(&self, r: u32) -> f64 {
        if r % 2 == 1 {
            return 0.0;
        }
        match self {
            InnovationLaw::Rademacher => 1.0,
            // (r-1)!!
            InnovationLaw::Gaussian => (1..r).step_by(2).map(f64::from).product(),
            InnovationLaw::Uniform => 3f64.powi(r as i32 / 2) / f64::from(r + 1),
        }
    }

    /// `E|e|^p` for a single innovation.
    pub fn absolute_moment(&self, p: f64) -> f64 {
        match self {
            InnovationLaw::Rademacher => 1.0,
            InnovationLaw::Gaussian => {
                p.exp2().sqrt() * statrs::function::gamma::gamma((p + 1.0) / 2.0) / std::f64::consts::PI.sqrt()
            }
            InnovationLaw::Uniform => 3f64.sqrt().powf(p) / (p + 1.0),
        }
    }
}

/// Uniform on `(0, 1]` from the top 53 bits of a word.
#[inline]
pub fn unit_open(x: u64) -> f64 {
    ((x >> 11) + 1) as f64 * (-53f64).exp2()
}

/// Stream id for one (purpose, replication, channel) triple.
pub fn stream_id(purpose: Purpose, replication: u64, channel: usize) -> u64 {
    assert!(replication < 1 << 40, "replication index too large");
    assert!(channel < 1 << 16, "channel index too large");
    ((purpose as u64) << 56) | (replication << 16) | channel as u64
}

/// Bits per axis in the site key.
fn bits_per_axis(dim: usize) -> u32 {
    (64 / dim as u32).min(63)
}

/// Largest absolute coordinate addressable in dimension `dim`.
pub fn coordinate_limit(dim: usize) -> i64 {
    (1i64 << (bits_per_axis(dim) - 1)) - 1
}

/// Site key with the last axis in the lowest bits.
pub fn site_key(site: &[i64]) -> u64 {
    let dim = site.len();
    let b = bits_per_axis(dim);
    let offset = 1i128 << (b - 1);
    let mut key: u64 = 0;
    for &c in site {
        debug_assert!(c.unsigned_abs() as i128 <= offset - 1, "coordinate {c} out of range");
        key = key.wrapping_shl(b) | (c as i128 + offset) as u64;
    }
    key
}

/// Sequential reader over the keystream of one stream.
pub struct SiteStream {
    rng: ChaCha8Rng,
    law: InnovationLaw,
}

impl SiteStream {
    pub fn new(seed: u64, purpose: Purpose, replication: u64, channel: usize, law: InnovationLaw) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id(purpose, replication, channel));
        SiteStream { rng, law }
    }

    /// Position the stream at `site`.
    pub fn seek(&mut self, site: &[i64]) {
        self.rng.set_word_pos(site_key(site) as u128 * WORDS_PER_SITE);
    }

    /// Draw at the current site and advance to the next site along the last axis.
    #[inline]
    pub fn next_draw(&mut self) -> f64 {
        let x = self.rng.next_u64();
        let y = self.rng.next_u64();
        self.law.transform(x, y)
    }

    /// Raw words at the current site, advancing like [`SiteStream::next_draw`].
    #[inline]
    pub fn next_words(&mut self) -> (u64, u64) {
        (self.rng.next_u64(), self.rng.next_u64())
    }

    /// Draw at `site` directly.
    pub fn draw_at(&mut self, site: &[i64]) -> f64 {
        self.seek(site);
        self.next_draw()
    }

    /// Fill `out` with draws at `start`, `start + e_last`, ...
    pub fn fill_row(&mut self, start: &[i64], out: &mut [f64]) {
        self.seek(start);
        for v in out.iter_mut() {
            *v = self.next_draw();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_reads_match_point_reads() {
        let mut s = SiteStream::new(7, Purpose::Innovations, 3, 1, InnovationLaw::Gaussian);
        let mut row = vec![0.0; 5];
        s.fill_row(&[-2, 10], &mut row);
        for (i, v) in row.iter().enumerate() {
            let mut t = SiteStream::new(7, Purpose::Innovations, 3, 1, InnovationLaw::Gaussian);
            assert_eq!(t.draw_at(&[-2, 10 + i as i64]), *v);
        }
    }

    #[test]
    fn streams_are_distinct() {
        let a = SiteStream::new(1, Purpose::Innovations, 0, 0, InnovationLaw::Uniform).draw_at(&[0]);
        let b = SiteStream::new(1, Purpose::Innovations, 1, 0, InnovationLaw::Uniform).draw_at(&[0]);
        let c = SiteStream::new(1, Purpose::Innovations, 0, 1, InnovationLaw::Uniform).draw_at(&[0]);
        let d = SiteStream::new(2, Purpose::Innovations, 0, 0, InnovationLaw::Uniform).draw_at(&[0]);
        assert!(a != b && a != c && a != d && b != c);
    }

    #[test]
    fn site_keys_are_ordered_along_last_axis() {
        assert_eq!(site_key(&[0, 1]), site_key(&[0, 0]) + 1);
        assert_eq!(site_key(&[5]) + 1, site_key(&[6]));
        assert_ne!(site_key(&[1, 0]), site_key(&[0, 1]));
        assert_eq!(coordinate_limit(2), (1 << 31) - 1);
    }

    #[test]
    fn absolute_moments() {
        assert!((InnovationLaw::Gaussian.absolute_moment(2.0) - 1.0).abs() < 1e-12);
        assert!((InnovationLaw::Gaussian.absolute_moment(4.0) - 3.0).abs() < 1e-12);
        assert!((InnovationLaw::Uniform.absolute_moment(2.0) - 1.0).abs() < 1e-12);
        assert!((InnovationLaw::Uniform.absolute_moment(4.0) - 1.8).abs() < 1e-12);
        assert_eq!(InnovationLaw::Rademacher.absolute_moment(7.0), 1.0);
        for law in [InnovationLaw::Rademacher, InnovationLaw::Gaussian, InnovationLaw::Uniform] {
            for r in [2u32, 4, 6] {
                assert!((law.raw_moment(r) - law.absolute_moment(f64::from(r))).abs() < 1e-12);
            }
            assert_eq!(law.raw_moment(3), 0.0);
        }
    }

    #[test]
    fn draws_lie_in_support() {
        let mut s = SiteStream::new(9, Purpose::Innovations, 0, 0, InnovationLaw::Rademacher);
        let mut u = SiteStream::new(9, Purpose::Innovations, 0, 0, InnovationLaw::Uniform);
        for i in 0..1000 {
            let r = s.draw_at(&[i]);
            assert!(r == 1.0 || r == -1.0);
            assert!(u.draw_at(&[i]).abs() <= 3f64.sqrt());
        }
    }
}
