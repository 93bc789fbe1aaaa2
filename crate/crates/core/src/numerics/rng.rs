//! Reproducible random streams.
//!
//! A stream is addressed by `(master_seed, stream_id)`. The underlying
//! generator is ChaCha8 keyed by the master seed, with the stream id mapped
//! onto ChaCha's 64-bit stream counter, so every replication (or oracle
//! batch) owns an independent sequence no matter which worker runs it.
//! Sub-streams partition one stream's keystream into disjoint 2^60-word
//! windows.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SUBSTREAM_SHIFT: u32 = 60;

/// Fixed sub-stream offsets used by the data generator.
pub mod substream {
    pub const LATENT: u64 = 0;
    pub const NOISE: u64 = 1;
    pub const ASSIGNMENT: u64 = 2;
}

#[derive(Clone, Debug)]
pub struct RngStream {
    master_seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(master_seed);
        inner.set_stream(stream_id);
        Self {
            master_seed,
            stream_id,
            inner,
            spare_normal: None,
        }
    }

    /// Stream positioned at the start of sub-stream `index` of this stream.
    pub fn substream(&self, index: u64) -> Self {
        assert!(index < 16, "sub-stream index out of range");
        let mut out = Self::new(self.master_seed, self.stream_id);
        out.inner.set_word_pos(u128::from(index) << SUBSTREAM_SHIFT);
        out
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on [0, 1) with 53 bits of resolution.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on the open interval (-1, 1).
    fn symmetric_uniform(&mut self) -> f64 {
        loop {
            let u = 2.0 * self.uniform() - 1.0;
            if u > -1.0 {
                return u;
            }
        }
    }

    /// One standard normal variate (Marsaglia polar method).
    pub fn std_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        loop {
            let u = self.symmetric_uniform();
            let v = self.symmetric_uniform();
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let scale = (-2.0 * s.ln() / s).sqrt();
                self.spare_normal = Some(v * scale);
                return u * scale;
            }
        }
    }
}

/// Free-function form of [`RngStream::std_normal`].
pub fn draw_std_normal(rng: &mut RngStream) -> f64 {
    rng.std_normal()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_address_same_draws() {
        let mut a = RngStream::new(0, 0);
        let mut b = RngStream::new(0, 0);
        let first = [a.std_normal(), a.std_normal()];
        let second = [b.std_normal(), b.std_normal()];
        assert_eq!(first[0].to_bits(), second[0].to_bits());
        assert_eq!(first[1].to_bits(), second[1].to_bits());
    }

    #[test]
    fn normal_moments_over_a_million_draws() {
        let mut rng = RngStream::new(0, 0);
        let n = 1_000_000;
        let (mut sum, mut sq, mut below) = (0.0, 0.0, 0usize);
        for _ in 0..n {
            let z = rng.std_normal();
            sum += z;
            sq += z * z;
            if z < 0.0 {
                below += 1;
            }
        }
        let mean = sum / n as f64;
        let var = sq / n as f64 - mean * mean;
        assert!(mean.abs() < 0.005, "mean {mean}");
        assert!((var - 1.0).abs() < 0.01, "var {var}");
        assert!((below as f64 / n as f64 - 0.5).abs() < 0.002);
    }

    fn correlation(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let mut sab = 0.0;
        let mut saa = 0.0;
        let mut sbb = 0.0;
        for (x, y) in a.iter().zip(b) {
            sab += (x - ma) * (y - mb);
            saa += (x - ma).powi(2);
            sbb += (y - mb).powi(2);
        }
        sab / (saa * sbb).sqrt()
    }

    #[test]
    fn distinct_streams_are_uncorrelated() {
        let n = 1_000_000;
        let mut a = RngStream::new(7, 0);
        let mut b = RngStream::new(7, 1);
        let xa: Vec<f64> = (0..n).map(|_| a.std_normal()).collect();
        let xb: Vec<f64> = (0..n).map(|_| b.std_normal()).collect();
        assert!(correlation(&xa, &xb).abs() < 0.01);
        // lag-1 within a stream
        assert!(correlation(&xa[..n - 1], &xa[1..]).abs() < 0.01);
        // lag-1 across streams
        assert!(correlation(&xa[..n - 1], &xb[1..]).abs() < 0.01);
    }

    #[test]
    fn substreams_do_not_overlap_the_parent() {
        let base = RngStream::new(3, 9);
        let mut s0 = base.substream(0);
        let mut s1 = base.substream(1);
        let a: Vec<u64> = (0..64).map(|_| s0.next_u64()).collect();
        let b: Vec<u64> = (0..64).map(|_| s1.next_u64()).collect();
        assert_ne!(a, b);
        let mut fresh = RngStream::new(3, 9);
        assert_eq!(a[0], fresh.next_u64());
    }

    #[test]
    fn uniform_stays_in_unit_interval() {
        let mut rng = RngStream::new(1, 2);
        for _ in 0..10_000 {
            let u = rng.uniform();
            assert!((0.0..1.0).contains(&u));
        }
    }
}
