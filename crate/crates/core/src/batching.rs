//! Consecutive mini-batches with a fixed-size overlap.
//!
//! Each new batch keeps `round(o·r)` members of the previous one, chosen
//! uniformly, and fills the rest with fresh indices drawn from outside the
//! previous batch, so `|S_{k-1} ∩ S_k|` is exact rather than expected.

use std::collections::HashSet;

use rand::seq::index;

use crate::error::{Error, Result};
use crate::rng::RngState;

#[derive(Debug, Clone)]
pub struct OverlapSampler {
    dataset_size: usize,
    batch_size: usize,
    overlap: usize,
    rng: RngState,
    previous: Option<Vec<usize>>,
}

impl OverlapSampler {
    /// `overlap_ratio` is validated by the training config; any value in
    /// `[0, 1)` is accepted here so degenerate cases can be tested.
    ///
    /// When `batch_size == dataset_size` every batch is the whole index set.
    pub fn new(dataset_size: usize, batch_size: usize, overlap_ratio: f64, rng: RngState) -> Result<Self> {
        if batch_size == 0 || batch_size > dataset_size {
            return Err(Error::config(
                "batch_size",
                format!("{batch_size} is not in 1..={dataset_size}"),
            ));
        }
        if !(0.0..1.0).contains(&overlap_ratio) {
            return Err(Error::config("overlap", format!("{overlap_ratio} is outside [0, 1)")));
        }
        let overlap = overlap_size(batch_size, overlap_ratio);
        let fresh = batch_size - overlap;
        if batch_size < dataset_size && fresh > dataset_size - batch_size {
            return Err(Error::config(
                "batch_size",
                format!(
                    "{fresh} fresh indices per batch exceed the {} rows outside the previous batch",
                    dataset_size - batch_size
                ),
            ));
        }
        Ok(Self {
            dataset_size,
            batch_size,
            overlap,
            rng,
            previous: None,
        })
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    /// Target `|O_k|`.
    pub fn overlap_count(&self) -> usize {
        if self.is_full_batch() {
            self.batch_size
        } else {
            self.overlap
        }
    }

    pub fn is_full_batch(&self) -> bool {
        self.batch_size == self.dataset_size
    }

    pub fn previous(&self) -> Option<&[usize]> {
        self.previous.as_deref()
    }

    pub fn next_batch(&mut self) -> Vec<usize> {
        let batch = if self.is_full_batch() {
            (0..self.dataset_size).collect()
        } else {
            match self.previous.take() {
                None => index::sample(&mut self.rng, self.dataset_size, self.batch_size).into_vec(),
                Some(prev) => self.overlapping(&prev),
            }
        };
        self.previous = Some(batch.clone());
        batch
    }

    fn overlapping(&mut self, prev: &[usize]) -> Vec<usize> {
        let mut batch: Vec<usize> = index::sample(&mut self.rng, prev.len(), self.overlap)
            .into_iter()
            .map(|i| prev[i])
            .collect();

        // complement of the previous batch, in ascending order
        let mut in_prev = vec![false; self.dataset_size];
        for &i in prev {
            in_prev[i] = true;
        }
        let outside: Vec<usize> = (0..self.dataset_size).filter(|&i| !in_prev[i]).collect();
        let fresh = self.batch_size - self.overlap;
        batch.extend(
            index::sample(&mut self.rng, outside.len(), fresh)
                .into_iter()
                .map(|i| outside[i]),
        );
        batch
    }
}

/// `round(o·r)`, half away from zero.
pub fn overlap_size(batch_size: usize, overlap_ratio: f64) -> usize {
    (overlap_ratio * batch_size as f64).round() as usize
}

/// `prev ∩ curr`, in the order the elements appear in `curr`.
pub fn overlap_of(prev: &[usize], curr: &[usize]) -> Vec<usize> {
    let prev: HashSet<usize> = prev.iter().copied().collect();
    curr.iter().copied().filter(|i| prev.contains(i)).collect()
}
