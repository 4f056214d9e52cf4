use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DataError, DataResult};

/// Position of a [`BatchSampler`] in its stream of epochs.
///
/// The permutation of each epoch is a pure function of `(seed, epoch)`, so
/// this triple is the sampler's entire state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerState {
    pub seed: u64,
    pub epoch: u64,
    pub cursor: usize,
}

/// Epoch-wise seeded shuffling over `len` records.
///
/// Every batch is full; a batch that runs past the end of an epoch continues
/// with the start of the next one.
#[derive(Debug, Clone)]
pub struct BatchSampler {
    len: usize,
    batch_size: usize,
    state: SamplerState,
    order: Vec<usize>,
}

/// Permutation of `0..len` used for `epoch`.
pub fn epoch_order(seed: u64, epoch: u64, len: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch);
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(&mut rng);
    order
}

impl BatchSampler {
    pub fn new(len: usize, batch_size: usize, seed: u64) -> DataResult<Self> {
        Self::resume(len, batch_size, SamplerState { seed, epoch: 0, cursor: 0 })
    }

    pub fn resume(len: usize, batch_size: usize, state: SamplerState) -> DataResult<Self> {
        if batch_size == 0 || batch_size > len {
            return Err(DataError::BatchSize { batch_size, records: len });
        }
        if state.cursor >= len {
            return Err(DataError::Sampler(format!("cursor {} past {len} records", state.cursor)));
        }
        Ok(Self { len, batch_size, order: epoch_order(state.seed, state.epoch, len), state })
    }

    pub fn state(&self) -> SamplerState {
        self.state
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    /// Record indices of the next batch.
    pub fn next_indices(&mut self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.batch_size);
        while out.len() < self.batch_size {
            out.push(self.order[self.state.cursor]);
            self.state.cursor += 1;
            if self.state.cursor == self.len {
                self.state.epoch += 1;
                self.state.cursor = 0;
                self.order = epoch_order(self.state.seed, self.state.epoch, self.len);
            }
        }
        out
    }
}

impl Iterator for BatchSampler {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        Some(self.next_indices())
    }
}
