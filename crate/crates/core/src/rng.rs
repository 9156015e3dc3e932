//! Random-source contract for the randomized mechanisms.
//!
//! Every random stream is a ChaCha8 generator whose 32-byte seed is
//! `SHA-256(master_seed_le || label || 0x00 || index_le)`. Uniform indices
//! come from `Rng::random_range`, subsets from a partial Fisher-Yates
//! shuffle over a copy of the pool. Streams are keyed by what they are used
//! for, never by the thread that happens to run them.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

/// Source of the uniform draws a randomized mechanism consumes.
pub trait DrawSource {
    /// Uniform index in `0..bound`; `bound > 0`.
    fn index(&mut self, bound: usize) -> usize;

    /// `k` distinct elements of `pool`, uniformly, in draw order.
    fn draw_subset(&mut self, pool: &[usize], k: usize) -> Vec<usize> {
        assert!(k <= pool.len());
        let mut work = pool.to_vec();
        for i in 0..k {
            let j = i + self.index(work.len() - i);
            work.swap(i, j);
        }
        work.truncate(k);
        work
    }

    fn draw_one(&mut self, pool: &[usize]) -> usize {
        pool[self.index(pool.len())]
    }
}

impl<T: DrawSource + ?Sized> DrawSource for &mut T {
    fn index(&mut self, bound: usize) -> usize {
        (**self).index(bound)
    }

    fn draw_subset(&mut self, pool: &[usize], k: usize) -> Vec<usize> {
        (**self).draw_subset(pool, k)
    }

    fn draw_one(&mut self, pool: &[usize]) -> usize {
        (**self).draw_one(pool)
    }
}

/// Seeded stream; see the module docs for the derivation.
#[derive(Debug, Clone)]
pub struct Stream {
    rng: ChaCha8Rng,
}

impl Stream {
    pub fn derive(master_seed: u64, label: &str, index: u64) -> Self {
        let mut h = Sha256::new();
        h.update(master_seed.to_le_bytes());
        h.update(label.as_bytes());
        h.update([0u8]);
        h.update(index.to_le_bytes());
        let digest = h.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest);
        Stream {
            rng: ChaCha8Rng::from_seed(seed),
        }
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }
}

impl DrawSource for Stream {
    fn index(&mut self, bound: usize) -> usize {
        self.rng.random_range(0..bound)
    }
}

/// Replays pre-recorded outcomes; for tests and transcript replay.
///
/// Each `draw_subset` / `draw_one` call pops the next scripted answer and
/// checks that it is drawable from the offered pool.
#[derive(Debug, Default, Clone)]
pub struct Scripted {
    subsets: VecDeque<Vec<usize>>,
    singles: VecDeque<usize>,
}

impl Scripted {
    pub fn new(subsets: Vec<Vec<usize>>, singles: Vec<usize>) -> Self {
        Scripted {
            subsets: subsets.into(),
            singles: singles.into(),
        }
    }

    pub fn is_exhausted(&self) -> bool {
        self.subsets.is_empty() && self.singles.is_empty()
    }
}

impl DrawSource for Scripted {
    fn index(&mut self, _bound: usize) -> usize {
        panic!("scripted source only answers whole draws")
    }

    fn draw_subset(&mut self, pool: &[usize], k: usize) -> Vec<usize> {
        let s = self.subsets.pop_front().expect("script ran out of subsets");
        assert_eq!(s.len(), k, "scripted subset has wrong size");
        assert!(s.iter().all(|p| pool.contains(p)), "scripted subset not in pool");
        s
    }

    fn draw_one(&mut self, pool: &[usize]) -> usize {
        let p = self.singles.pop_front().expect("script ran out of draws");
        assert!(pool.contains(&p), "scripted draw {p} not in pool");
        p
    }
}
