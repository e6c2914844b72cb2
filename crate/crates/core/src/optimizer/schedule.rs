use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::mix_seed;
use crate::problems::Batch;

/// Shuffled minibatch order, re-seeded per epoch.
///
/// Every optimizer in a comparison consumes the same schedule for a given
/// seed. Problems without data (or `batch_size == 0`) get one full batch per
/// epoch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchSchedule {
    num_samples: usize,
    batch_size: usize,
    seed: u64,
}

impl BatchSchedule {
    pub fn new(num_samples: usize, batch_size: usize, seed: u64) -> Self {
        BatchSchedule { num_samples, batch_size, seed }
    }

    pub fn is_full_batch(&self) -> bool {
        self.num_samples == 0 || self.batch_size == 0 || self.batch_size >= self.num_samples
    }

    pub fn steps_per_epoch(&self) -> usize {
        if self.is_full_batch() {
            1
        } else {
            self.num_samples.div_ceil(self.batch_size)
        }
    }

    pub fn epoch(&self, epoch: u64) -> Vec<Batch> {
        let epoch_seed = mix_seed(self.seed, epoch);
        if self.is_full_batch() {
            return vec![Batch::new(Vec::new(), epoch_seed)];
        }
        let mut order: Vec<usize> = (0..self.num_samples).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(epoch_seed);
        order.shuffle(&mut rng);
        order
            .chunks(self.batch_size)
            .enumerate()
            .map(|(i, c)| Batch::new(c.to_vec(), mix_seed(epoch_seed, i as u64)))
            .collect()
    }

    /// The first `steps` batches, epoch by epoch.
    pub fn batches(&self, steps: usize) -> Vec<(u64, Batch)> {
        let mut out = Vec::with_capacity(steps);
        let mut epoch = 0;
        while out.len() < steps {
            for b in self.epoch(epoch) {
                if out.len() == steps {
                    break;
                }
                out.push((epoch, b));
            }
            epoch += 1;
        }
        out
    }

    /// Hex SHA-256 over the index stream of the first `steps` batches.
    pub fn fingerprint(&self, steps: usize) -> String {
        let mut h = Sha256::new();
        for (epoch, b) in self.batches(steps) {
            h.update(epoch.to_le_bytes());
            h.update((b.indices.len() as u64).to_le_bytes());
            for i in &b.indices {
                h.update((*i as u64).to_le_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epoch_is_a_permutation() {
        let s = BatchSchedule::new(10, 3, 4);
        let e = s.epoch(2);
        assert_eq!(e.len(), 4);
        let mut all: Vec<usize> = e.iter().flat_map(|b| b.indices.clone()).collect();
        all.sort();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_ne!(s.epoch(0), s.epoch(1));
        assert_eq!(s.epoch(3), BatchSchedule::new(10, 3, 4).epoch(3));
    }

    #[test]
    fn full_batch_problems() {
        let s = BatchSchedule::new(0, 32, 1);
        assert_eq!(s.steps_per_epoch(), 1);
        let b = s.batches(5);
        assert_eq!(b.len(), 5);
        assert!(b.iter().all(|(_, x)| x.is_full()));
        assert_eq!(b[4].0, 4);
    }

    #[test]
    fn fingerprint_depends_on_seed() {
        let a = BatchSchedule::new(20, 4, 1).fingerprint(12);
        assert_eq!(a, BatchSchedule::new(20, 4, 1).fingerprint(12));
        assert_ne!(a, BatchSchedule::new(20, 4, 2).fingerprint(12));
    }
}
