//! Ordered block decomposition of a decision vector.

use alloc::vec::Vec;
use core::ops::Range;

use crate::error::{bail, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    total: usize,
}

impl BlockPartition {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            bail!(Config, "partition needs at least one block");
        }
        if let Some(i) = sizes.iter().position(|&s| s == 0) {
            bail!(Config, "block {i} has size 0");
        }
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut acc = 0;
        for &s in &sizes {
            offsets.push(acc);
            acc += s;
        }
        Ok(Self { sizes, offsets, total: acc })
    }

    /// `n` blocks of size `block` each.
    pub fn uniform(n: usize, block: usize) -> Result<Self> {
        Self::new(alloc::vec![block; n])
    }

    /// One block per coordinate.
    pub fn scalar(m: usize) -> Result<Self> {
        Self::uniform(m, 1)
    }

    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn size(&self, i: usize) -> usize {
        self.sizes[i]
    }

    pub fn range(&self, i: usize) -> Range<usize> {
        self.offsets[i]..self.offsets[i] + self.sizes[i]
    }

    pub fn block<'a>(&self, x: &'a [f64], i: usize) -> &'a [f64] {
        &x[self.range(i)]
    }

    pub fn block_mut<'a>(&self, x: &'a mut [f64], i: usize) -> &'a mut [f64] {
        &mut x[self.range(i)]
    }

    /// Concatenate per-block vectors back into a full vector.
    pub fn assemble(&self, blocks: &[Vec<f64>]) -> Result<Vec<f64>> {
        if blocks.len() != self.len() {
            bail!(Domain, "expected {} blocks, got {}", self.len(), blocks.len());
        }
        let mut out = Vec::with_capacity(self.total);
        for (i, b) in blocks.iter().enumerate() {
            if b.len() != self.sizes[i] {
                bail!(Domain, "block {i} has length {}, expected {}", b.len(), self.sizes[i]);
            }
            out.extend_from_slice(b);
        }
        Ok(out)
    }

    /// Split a full vector into owned per-block vectors.
    pub fn split(&self, x: &[f64]) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.block(x, i).to_vec()).collect()
    }
}
