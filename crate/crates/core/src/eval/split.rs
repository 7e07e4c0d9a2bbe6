use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    /// Sorted ascending.
    pub train_idx: Vec<usize>,
    /// Sorted ascending.
    pub test_idx: Vec<usize>,
    pub seed: u64,
}

/// Seeded shuffle; the first `ceil(n * test_fraction)` rows form the test set.
pub fn train_test_split(n: usize, test_fraction: f64, seed: u64) -> Result<SplitIndices> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("cannot split {n} rows")));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("test fraction {test_fraction} outside (0, 1)")));
    }
    let n_test = ((n as f64 * test_fraction - 1e-9).ceil() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut test_idx = order[..n_test].to_vec();
    let mut train_idx = order[n_test..].to_vec();
    test_idx.sort_unstable();
    train_idx.sort_unstable();
    Ok(SplitIndices { train_idx, test_idx, seed })
}
