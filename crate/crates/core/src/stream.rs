//! Reproducible, chunked loss-vector streams.
//!
//! A `(seed, n)` pair defines one fixed sequence of loss vectors. The
//! sequence is cut into chunks of `CHUNK_SIZE` draws; chunk `c` is generated
//! by ChaCha8 keyed with `seed` on stream `c`, so any chunk can be produced
//! independently of the others. Parallel reductions combine chunk results in
//! chunk-index order, which makes every estimate bitwise independent of the
//! number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::joint_models::JointModel;

pub const CHUNK_SIZE: usize = 1 << 16;

pub fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

/// SplitMix64 finalizer, used to derive independent sub-seeds.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn chunk_len(n: usize, chunk: usize) -> usize {
    (n - chunk * CHUNK_SIZE).min(CHUNK_SIZE)
}

fn chunk_count(n: usize) -> usize {
    n.div_ceil(CHUNK_SIZE)
}

/// Folds every draw of the stream into a per-chunk accumulator, running the
/// chunks in parallel. The returned accumulators are in chunk order.
pub fn fold_chunks<A, I, F>(model: &JointModel, n: usize, seed: u64, init: I, fold: F) -> Vec<A>
where
    A: Send,
    I: Fn() -> A + Sync,
    F: Fn(&mut A, &[f64]) + Sync,
{
    (0..chunk_count(n))
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(seed, c as u64);
            let mut acc = init();
            let mut x = vec![0.0; model.dim()];
            for _ in 0..chunk_len(n, c) {
                model.sample_into(&mut rng, &mut x);
                fold(&mut acc, &x);
            }
            acc
        })
        .collect()
}

/// Visits the same stream as [`fold_chunks`], sequentially and in order.
pub fn for_each_sample(model: &JointModel, n: usize, seed: u64, mut f: impl FnMut(&[f64])) {
    let mut x = vec![0.0; model.dim()];
    for c in 0..chunk_count(n) {
        let mut rng = chunk_rng(seed, c as u64);
        for _ in 0..chunk_len(n, c) {
            model.sample_into(&mut rng, &mut x);
            f(&x);
        }
    }
}

/// Running mean and second central moment (Welford), mergeable in order.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / n;
        self.m2 += other.m2 + delta * delta * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).max(0.0)
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

/// Merges per-chunk moment vectors in chunk order.
pub fn merge_in_order(chunks: Vec<Vec<Moments>>, width: usize) -> Vec<Moments> {
    let mut total = vec![Moments::default(); width];
    for chunk in &chunks {
        for (t, c) in total.iter_mut().zip(chunk) {
            t.merge(c);
        }
    }
    total
}
