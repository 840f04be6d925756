use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Seeded partition of `0..n`: a uniform random permutation whose first
/// `floor(n * train_fraction)` entries form the training side.
pub fn split_indices(n: usize, train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Domain(format!("train fraction {train_fraction} outside (0, 1)")));
    }
    let n_train = (n as f64 * train_fraction).floor() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::DegenerateSplit { train: n_train, test: n - n_train });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = order.split_off(n_train);
    Ok((order, test))
}

pub fn split_cohort<T: Clone>(records: &[T], train_fraction: f64, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    let (train, test) = split_indices(records.len(), train_fraction, seed)?;
    Ok((train.iter().map(|&i| records[i].clone()).collect(), test.iter().map(|&i| records[i].clone()).collect()))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn full_cohort_size_floors_to_2118() {
        let (train, test) = split_indices(4237, 0.5, 7).unwrap();
        assert_eq!((train.len(), test.len()), (2118, 2119));
    }

    #[test]
    fn four_records_split_two_two() {
        for seed in 0..20 {
            let (a, b) = split_cohort(&["a", "b", "c", "d"], 0.5, seed).unwrap();
            assert_eq!((a.len(), b.len()), (2, 2));
            let mut all: Vec<_> = a.iter().chain(&b).copied().collect();
            all.sort();
            assert_eq!(all, ["a", "b", "c", "d"]);
        }
    }

    #[test]
    fn degenerate_splits() {
        assert!(matches!(split_indices(1, 0.5, 0), Err(Error::DegenerateSplit { .. })));
        assert!(matches!(split_indices(3, 0.2, 0), Err(Error::DegenerateSplit { .. })));
        assert!(matches!(split_indices(10, 1.0, 0), Err(Error::Domain(_))));
    }

    proptest! {
        #[test]
        fn split_is_a_seeded_partition(n in 2usize..300, frac in 0.05f64..0.95, seed: u64) {
            if let Ok((train, test)) = split_indices(n, frac, seed) {
                prop_assert_eq!(train.len(), (n as f64 * frac).floor() as usize);
                let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
                all.sort_unstable();
                prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
                prop_assert_eq!(split_indices(n, frac, seed).unwrap(), (train, test));
            }
        }
    }
}
