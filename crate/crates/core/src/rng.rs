//! Counter-based random streams.
//!
//! Every draw made by a solver comes from a stream identified by
//! `(seed, path, iteration, player, purpose, index)`. Streams are independent ChaCha8
//! keystreams, so the result of a run does not depend on evaluation order or thread count.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};

/// What a stream is used for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Purpose {
    /// Draw of the output index `R`.
    Output,
    /// Redraw of `R` after a truncated run.
    Resample,
    /// Upper-level noise `xi`.
    Noise,
    /// Smoothing directions.
    Direction,
    /// Lower-level stochastic approximation.
    LowerLevel,
    /// Probe points and diagnostics.
    Probe,
    /// Free for callers.
    Custom(u32),
}

impl Purpose {
    fn code(self) -> u64 {
        match self {
            Purpose::Output => 1,
            Purpose::Resample => 2,
            Purpose::Noise => 3,
            Purpose::Direction => 4,
            Purpose::LowerLevel => 5,
            Purpose::Probe => 6,
            Purpose::Custom(c) => 0x100 + c as u64,
        }
    }
}

/// Coordinates of a stream under a fixed seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub path: u64,
    pub iteration: u64,
    pub player: u64,
    pub purpose: Purpose,
    pub index: u64,
}

impl StreamKey {
    pub fn new(path: u64, iteration: u64, player: u64, purpose: Purpose, index: u64) -> Self {
        Self {
            path,
            iteration,
            player,
            purpose,
            index,
        }
    }

    /// 64-bit stream identifier.
    pub fn id(&self) -> u64 {
        let mut h = 0x243f_6a88_85a3_08d3u64;
        for word in [
            self.path,
            self.iteration,
            self.player,
            self.purpose.code(),
            self.index,
        ] {
            h = splitmix64(h ^ word);
        }
        h
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seeded, reproducible random stream.
#[derive(Clone, Debug)]
pub struct RandomStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn derive(seed: u64, key: StreamKey) -> Self {
        Self::new(seed, key.id())
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform draw from `[0, 1)`.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform draw from `[lo, hi)`; `lo == hi` returns `lo`.
    #[inline]
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Fills `out` with a point drawn uniformly from the sphere of the given radius.
    pub fn sphere_into(&mut self, radius: f64, out: &mut [f64]) {
        loop {
            let mut sq = 0.0;
            for v in out.iter_mut() {
                *v = self.standard_normal();
                sq += *v * *v;
            }
            if sq > 0.0 {
                let scale = radius / sq.sqrt();
                for v in out.iter_mut() {
                    *v *= scale;
                }
                return;
            }
        }
    }
}

/// Uniform draw from `[lo, hi]`.
pub fn sample_uniform(stream: &mut RandomStream, lo: f64, hi: f64) -> Result<f64> {
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return Err(Error::invalid("interval", format!("[{lo}, {hi}] is not a valid interval")));
    }
    Ok(stream.uniform(lo, hi))
}

/// Uniform draw from the sphere of radius `radius` in dimension `n`.
pub fn sample_sphere(stream: &mut RandomStream, n: usize, radius: f64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::invalid("n", "dimension must be positive"));
    }
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::invalid("radius", format!("{radius} is not positive")));
    }
    let mut out = vec![0.0; n];
    stream.sphere_into(radius, &mut out);
    Ok(out)
}

/// Distribution of the output index `R` over `{1, ..., T}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutputDistribution {
    cumulative: Vec<f64>,
}

impl OutputDistribution {
    /// Nonnegative weights summing to one.
    pub fn new(weights: &[f64]) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("weights", "empty support"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("weights", "weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("weights", format!("weights sum to {total}, not 1")));
        }
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Ok(Self { cumulative })
    }

    /// Uniform over `{1, ..., t}`.
    pub fn uniform(t: usize) -> Result<Self> {
        if t == 0 {
            return Err(Error::invalid("t", "horizon must be positive"));
        }
        let cumulative = (1..=t).map(|k| k as f64 / t as f64).collect();
        Ok(Self { cumulative })
    }

    /// Weights proportional to `gamma_k - L gamma_k^2`.
    pub fn from_steps(steps: &[f64], lipschitz: f64) -> Result<Self> {
        let raw: Vec<f64> = steps.iter().map(|g| g - lipschitz * g * g).collect();
        if raw.iter().any(|w| *w <= 0.0) {
            return Err(Error::invalid(
                "steps",
                "every step must satisfy gamma_k < 1/L for weighted output",
            ));
        }
        let total: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let mut acc = 0.0;
        let cumulative = w
            .iter()
            .map(|v| {
                acc += v;
                acc
            })
            .collect();
        Ok(Self { cumulative })
    }

    pub fn len(&self) -> usize {
        self.cumulative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cumulative.is_empty()
    }

    /// Probability of index `k` (one based).
    pub fn probability(&self, k: usize) -> f64 {
        if k == 0 || k > self.len() {
            return 0.0;
        }
        let prev = if k == 1 { 0.0 } else { self.cumulative[k - 2] };
        self.cumulative[k - 1] - prev
    }
}

/// Draws `R` in `{1, ..., T}`.
pub fn sample_output_index(stream: &mut RandomStream, dist: &OutputDistribution) -> usize {
    let total = *dist.cumulative.last().unwrap();
    let u = stream.next_f64() * total;
    let pos = dist.cumulative.partition_point(|c| *c <= u);
    pos.min(dist.len() - 1) + 1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible() {
        let key = StreamKey::new(3, 7, 1, Purpose::Noise, 0);
        let mut a = RandomStream::derive(42, key);
        let mut b = RandomStream::derive(42, key);
        for _ in 0..10 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        let mut c = RandomStream::derive(42, StreamKey { player: 2, ..key });
        assert_ne!(a.next_u64(), c.next_u64());
    }

    #[test]
    fn distinct_keys_give_distinct_ids() {
        let mut seen = std::collections::HashSet::new();
        for path in 0..5 {
            for it in 0..50 {
                for p in 0..6 {
                    for purpose in [Purpose::Noise, Purpose::Direction, Purpose::LowerLevel] {
                        assert!(seen.insert(StreamKey::new(path, it, p, purpose, 0).id()));
                    }
                }
            }
        }
    }

    #[test]
    fn uniform_moments() {
        let mut s = RandomStream::new(1, 0);
        let n = 200_000;
        let draws: Vec<f64> = (0..n).map(|_| sample_uniform(&mut s, 0.0, 1.0).unwrap()).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 4.0 * (1.0 / 12.0f64 / n as f64).sqrt());
        assert!((var - 1.0 / 12.0).abs() < 2e-3);
        assert!(draws.iter().all(|d| (0.0..1.0).contains(d)));
    }

    #[test]
    fn degenerate_uniform_and_bad_intervals() {
        let mut s = RandomStream::new(1, 0);
        assert_eq!(sample_uniform(&mut s, 2.0, 2.0).unwrap(), 2.0);
        assert!(sample_uniform(&mut s, 2.0, 1.0).is_err());
        assert!(sample_sphere(&mut s, 3, 0.0).is_err());
    }

    #[test]
    fn sphere_radius_and_symmetry() {
        let mut s = RandomStream::new(9, 4);
        let one_d: Vec<f64> = (0..10_000)
            .map(|_| sample_sphere(&mut s, 1, 0.3).unwrap()[0])
            .collect();
        assert!(one_d.iter().all(|v| (v.abs() - 0.3).abs() < 1e-15));
        let pos = one_d.iter().filter(|v| **v > 0.0).count() as f64 / 10_000.0;
        assert!((pos - 0.5).abs() < 0.03);
        for n in [2, 5, 10] {
            let v = sample_sphere(&mut s, n, 0.7).unwrap();
            assert!((crate::sets::norm(&v) - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn output_index_distribution() {
        let mut s = RandomStream::new(5, 5);
        let d = OutputDistribution::uniform(1).unwrap();
        assert_eq!(sample_output_index(&mut s, &d), 1);
        let d = OutputDistribution::uniform(4).unwrap();
        let mut counts = [0usize; 4];
        for _ in 0..40_000 {
            counts[sample_output_index(&mut s, &d) - 1] += 1;
        }
        for c in counts {
            assert!((c as f64 / 40_000.0 - 0.25).abs() < 0.01);
        }
        let d = OutputDistribution::new(&[0.0, 0.0, 1.0]).unwrap();
        assert_eq!(sample_output_index(&mut s, &d), 3);
        assert!(OutputDistribution::new(&[0.5, 0.4]).is_err());
    }

    #[test]
    fn weighted_output_matches_step_formula() {
        let steps = [0.1, 0.2, 0.05];
        let l = 2.0;
        let d = OutputDistribution::from_steps(&steps, l).unwrap();
        let raw: Vec<f64> = steps.iter().map(|g| g - l * g * g).collect();
        let total: f64 = raw.iter().sum();
        for (k, r) in raw.iter().enumerate() {
            assert!((d.probability(k + 1) - r / total).abs() < 1e-15);
        }
    }
}
