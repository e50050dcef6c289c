//! Random bidder partition into a statistics side and an auction side.

use rand::Rng;

use crate::error::{AuctionError, Result};
use crate::model::GroupPartition;

/// Resampling budget when a group ends up empty on a side that needs it.
pub const MAX_SPLIT_ATTEMPTS: usize = 32;

/// Disjoint, covering partition of buyer indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BidderSplit {
    pub stat: Vec<usize>,
    pub auction_side: Vec<usize>,
}

impl BidderSplit {
    pub fn new(stat: Vec<usize>, auction_side: Vec<usize>, n: usize) -> Result<Self> {
        let mut seen = vec![false; n];
        for &i in stat.iter().chain(&auction_side) {
            if i >= n || seen[i] {
                return Err(AuctionError::Contract(format!(
                    "split sides must be disjoint and within 0..{n}"
                )));
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(AuctionError::Contract("split must cover every buyer".into()));
        }
        Ok(Self { stat, auction_side })
    }

    /// Everyone on the auction side.
    pub fn all_auction(n: usize) -> Self {
        Self {
            stat: Vec::new(),
            auction_side: (0..n).collect(),
        }
    }

    pub fn stat_members(&self, partition: &GroupPartition, group: usize) -> Vec<usize> {
        self.stat.iter().copied().filter(|&i| partition.group_of(i) == group).collect()
    }

    pub fn auction_members(&self, partition: &GroupPartition, group: usize) -> Vec<usize> {
        self.auction_side
            .iter()
            .copied()
            .filter(|&i| partition.group_of(i) == group)
            .collect()
    }

    /// First group with no member on the statistics side.
    pub fn first_empty_stat_group(&self, partition: &GroupPartition) -> Option<usize> {
        let mut present = vec![false; partition.m()];
        for &i in &self.stat {
            present[partition.group_of(i)] = true;
        }
        present.iter().position(|p| !p)
    }
}

/// Each buyer goes to the statistics side with probability 1/2.
/// Consumes exactly `n` draws.
pub fn split_bidders<R: Rng + ?Sized>(n: usize, rng: &mut R) -> BidderSplit {
    let mut split = BidderSplit {
        stat: Vec::with_capacity(n / 2 + 1),
        auction_side: Vec::with_capacity(n / 2 + 1),
    };
    for i in 0..n {
        if rng.random::<bool>() {
            split.stat.push(i);
        } else {
            split.auction_side.push(i);
        }
    }
    split
}

/// Splits until every group has a statistics-side member, at most
/// [`MAX_SPLIT_ATTEMPTS`] times. A single group never needs statistics.
pub fn split_with_stat_groups<R: Rng + ?Sized>(partition: &GroupPartition, rng: &mut R) -> Result<BidderSplit> {
    let mut last_empty = 0;
    for _ in 0..MAX_SPLIT_ATTEMPTS {
        let split = split_bidders(partition.n(), rng);
        if partition.m() == 1 {
            return Ok(split);
        }
        match split.first_empty_stat_group(partition) {
            None => return Ok(split),
            Some(g) => last_empty = g,
        }
    }
    Err(AuctionError::ResampleNeeded {
        group: last_empty,
        attempts: MAX_SPLIT_ATTEMPTS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn empty_population() {
        let s = split_bidders(0, &mut rng_from_seed(1));
        assert!(s.stat.is_empty() && s.auction_side.is_empty());
    }

    #[test]
    fn reproducible_and_covering() {
        let a = split_bidders(50, &mut rng_from_seed(9));
        let b = split_bidders(50, &mut rng_from_seed(9));
        assert_eq!(a, b);
        assert!(BidderSplit::new(a.stat.clone(), a.auction_side.clone(), 50).is_ok());
    }

    #[test]
    fn half_goes_to_each_side() {
        let n = 100_000;
        let s = split_bidders(n, &mut rng_from_seed(2024));
        let frac = s.stat.len() as f64 / n as f64;
        assert!((0.49..=0.51).contains(&frac), "{frac}");
    }

    #[test]
    fn singleton_groups_eventually_fail() {
        // 40 singleton groups: P(all on stat side) = 2^-40, so 32 attempts fail
        let p = GroupPartition::new((0..40).collect(), 40).unwrap();
        let err = split_with_stat_groups(&p, &mut rng_from_seed(0)).unwrap_err();
        assert!(matches!(err, AuctionError::ResampleNeeded { attempts: 32, .. }));
    }

    #[test]
    fn rejects_overlap() {
        assert!(BidderSplit::new(vec![0, 1], vec![1], 2).is_err());
        assert!(BidderSplit::new(vec![0], vec![], 2).is_err());
    }
}
