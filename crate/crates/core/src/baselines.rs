//! Comparison anchors: the second-price auction and the simple mechanism.
//!
//! The simple mechanism draws group `k` with probability proportional to
//! `1 / θ_{w_k}` (its top bid), so `Pr_k θ_{w_k}` is equal across groups, then
//! runs a second-price auction inside the drawn group. It is exactly
//! 0-group-fair at the group-winner level but not incentive compatible.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{AuctionError, Result};
use crate::model::{BidProfile, ExpectedOutcome, Outcome};
use crate::rng::{rng_from_seed, sample_weighted};

/// How equal top bids are resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieBreak {
    #[default]
    LowestIndex,
    /// Uniform among the tied bidders, using a stream seeded with this value.
    Seeded(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimpleMechConfig {
    pub rng_seed: u64,
}

/// Winner and price of a second-price auction restricted to `members`.
///
/// The highest bid wins (ties to the lowest index). The price is the
/// second-highest bid among `members`, or the support lower bound when the
/// winner is alone. Returns `None` for an empty member set.
pub fn second_price_among(bids: &BidProfile, members: &[usize]) -> Option<(usize, f64)> {
    let mut top: Option<usize> = None;
    for &i in members {
        if top.is_none_or(|t| bids.bid(i) > bids.bid(t) || (bids.bid(i) == bids.bid(t) && i < t)) {
            top = Some(i);
        }
    }
    let winner = top?;
    let price = members
        .iter()
        .filter(|&&i| i != winner)
        .map(|&i| bids.bid(i))
        .fold(None, |acc: Option<f64>, b| Some(acc.map_or(b, |a| a.max(b))))
        .unwrap_or(bids.support().lower());
    Some((winner, price))
}

/// Vickrey auction over all buyers.
pub fn second_price(bids: &BidProfile, tie_break: TieBreak) -> Result<Outcome> {
    if bids.n() == 0 {
        return Err(AuctionError::EmptyProfile);
    }
    let all: Vec<usize> = (0..bids.n()).collect();
    let (mut winner, price) = second_price_among(bids, &all).expect("nonempty profile");
    if let TieBreak::Seeded(seed) = tie_break {
        let top = bids.bid(winner);
        let tied: Vec<usize> = all.iter().copied().filter(|&i| bids.bid(i) == top).collect();
        if tied.len() > 1 {
            let mut rng = rng_from_seed(seed);
            winner = tied[rng.random_range(0..tied.len())];
        }
    }
    Ok(Outcome::sold(bids.n(), winner, price))
}

pub fn second_price_expected(bids: &BidProfile) -> Result<ExpectedOutcome> {
    Ok(ExpectedOutcome::from_outcome(&second_price(bids, TieBreak::LowestIndex)?))
}

/// Top bidder of every group, lowest index on ties.
fn group_winners(bids: &BidProfile) -> Vec<(usize, f64)> {
    (0..bids.m())
        .map(|k| {
            let members = bids.partition().members(k);
            second_price_among(bids, &members).expect("groups are nonempty")
        })
        .collect()
}

/// Group probabilities with `Pr_k θ_{w_k}` equal across groups and `Σ Pr_k = 1`.
pub fn simple_group_probs(bids: &BidProfile) -> Result<Vec<f64>> {
    let tops: Vec<f64> = group_winners(bids).iter().map(|&(w, _)| bids.bid(w)).collect();
    if let Some(group) = tops.iter().position(|&t| t <= 0.0) {
        return Err(AuctionError::DegenerateSupport { group });
    }
    let inv_sum: f64 = tops.iter().map(|t| 1.0 / t).sum();
    Ok(tops.iter().map(|t| (1.0 / t) / inv_sum).collect())
}

/// Second price inside a fixed group. Used for forced draws and by the lottery.
pub fn simple_mechanism_in_group(bids: &BidProfile, group: usize) -> Result<Outcome> {
    if group >= bids.m() {
        return Err(AuctionError::Contract(format!("group {group} out of range")));
    }
    let members = bids.partition().members(group);
    let (winner, price) = second_price_among(bids, &members).expect("groups are nonempty");
    Ok(Outcome::sold(bids.n(), winner, price))
}

pub fn simple_mechanism_with_rng<R: Rng + ?Sized>(bids: &BidProfile, rng: &mut R) -> Result<Outcome> {
    let probs = simple_group_probs(bids)?;
    let group = sample_weighted(&probs, rng).expect("probabilities sum to one");
    simple_mechanism_in_group(bids, group)
}

pub fn simple_mechanism(bids: &BidProfile, cfg: SimpleMechConfig) -> Result<Outcome> {
    simple_mechanism_with_rng(bids, &mut rng_from_seed(cfg.rng_seed))
}

/// Exact expectation of the simple mechanism: group winner `w_k` wins with
/// `Pr_k` and pays the in-group second price.
pub fn simple_expected(bids: &BidProfile) -> Result<ExpectedOutcome> {
    let probs = simple_group_probs(bids)?;
    let mut win = vec![0.0; bids.n()];
    let mut pay = vec![0.0; bids.n()];
    for (k, (w, price)) in group_winners(bids).into_iter().enumerate() {
        win[w] = probs[k];
        pay[w] = probs[k] * price;
    }
    ExpectedOutcome::new(win, pay, None)
}
