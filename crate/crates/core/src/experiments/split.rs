//! Size split: train on the smallest half, test on the largest tenth.

use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SizeSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl SizeSplit {
    /// Train and validation ids together.
    pub fn small(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = self.train.iter().chain(&self.val).copied().collect();
        ids.sort_unstable();
        ids
    }
}

/// Splits by node count. Graphs are ordered by `(size, index)`; the first
/// `⌊N/2⌋` form the small pool, the last `⌊N/10⌋` the test set, and
/// `⌊pool/10⌋` pool members chosen with `rng` become validation. All id
/// lists are sorted ascending.
pub fn size_split(sizes: &[usize], rng: &mut RngStream) -> Result<SizeSplit> {
    let n = sizes.len();
    if n < 10 {
        return Err(Error::InvalidArgument(format!("size split needs at least 10 graphs, got {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (sizes[i], i));
    let mut pool = order[..n / 2].to_vec();
    let mut test = order[n - n / 10..].to_vec();
    rng.shuffle(&mut pool);
    let mut val = pool.split_off(pool.len() - pool.len() / 10);
    pool.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok(SizeSplit {
        train: pool,
        val,
        test,
    })
}
