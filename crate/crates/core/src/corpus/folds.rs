use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One cross-validation fold: two pairs are excluded from training, one for
/// checkpoint selection and one for testing. Each fold is also evaluated with
/// the two roles swapped (see [`Fold::orientations`]), so over a full set of
/// folds every pair is tested once and validated once.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train_pairs: Vec<String>,
    pub val_pair: String,
    pub test_pair: String,
}

impl Fold {
    /// `(validation, test)` role assignments evaluated for this fold.
    pub fn orientations(&self) -> [(&str, &str); 2] {
        [
            (&self.val_pair, &self.test_pair),
            (&self.test_pair, &self.val_pair),
        ]
    }
}

/// Shuffles pairs by `seed` and cuts them into `n/2` disjoint exclusions.
pub fn make_folds(pair_ids: &[String], seed: u64) -> Result<Vec<Fold>> {
    let n = pair_ids.len();
    if n < 4 || !n.is_multiple_of(2) {
        return Err(Error::validation(format!(
            "fold generation needs an even number of pairs >= 4, got {n}"
        )));
    }
    let mut sorted = pair_ids.to_vec();
    sorted.sort();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::validation("duplicate pair ids"));
    }
    let mut order = pair_ids.to_vec();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(order
        .chunks(2)
        .map(|excluded| Fold {
            train_pairs: order
                .iter()
                .filter(|p| !excluded.contains(p))
                .cloned()
                .collect(),
            val_pair: excluded[0].clone(),
            test_pair: excluded[1].clone(),
        })
        .collect())
}
