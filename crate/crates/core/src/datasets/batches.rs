use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::DatasetError;

/// Without-replacement minibatches: each epoch draws a fresh permutation of
/// `0..n` (ChaCha8 seeded by `seed`, stream `epoch`) and cuts it into
/// consecutive batches. The last batch may be short.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchSchedule {
    pub n: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub epoch: u64,
}

impl BatchSchedule {
    pub fn new(n: usize, batch_size: usize, seed: u64, epoch: u64) -> Self {
        BatchSchedule { n, batch_size, seed, epoch }
    }

    pub fn permutation(&self) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.epoch);
        let mut perm: Vec<usize> = (0..self.n).collect();
        perm.shuffle(&mut rng);
        perm
    }

    pub fn batches(&self) -> Result<Vec<Vec<usize>>, DatasetError> {
        if self.batch_size == 0 || self.batch_size > self.n {
            return Err(DatasetError::BatchSize { batch_size: self.batch_size, n: self.n });
        }
        Ok(self.permutation().chunks(self.batch_size).map(<[usize]>::to_vec).collect())
    }
}
