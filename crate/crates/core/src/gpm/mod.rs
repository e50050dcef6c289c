//! Group probability mechanism.
//!
//! 1. Split buyers into a statistics side and a second-price side.
//! 2. On the statistics side, find each group's second-price winner and
//!    price, and solve for revenue-maximizing ε-fair group probabilities.
//! 3. Draw a group with those probabilities and run a second-price auction
//!    among its members on the second-price side.
//!
//! A buyer's bid never influences which side she lands on or which group is
//! drawn, so her allocation is monotone in her own bid and the in-group
//! second price is her threshold payment.

pub mod lp;

use rand::Rng;
use rayon::prelude::*;

use crate::baselines::second_price_among;
use crate::error::{AuctionError, Result};
use crate::model::{BidProfile, EstimatorStderr, ExpectedOutcome, Outcome};
use crate::rng::{derived_rng, sample_weighted};
use crate::split::{split_with_stat_groups, BidderSplit};
use crate::stats::MeanAccumulator;

pub use lp::solve_group_lp;

/// Fitted group lottery.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupProbabilities {
    pub probs: Vec<f64>,
    /// Statistics-side winner `w_k` of every group.
    pub winners: Vec<usize>,
    pub winner_bids: Vec<f64>,
    /// In-group second price on the statistics side (support floor for singletons).
    pub winner_prices: Vec<f64>,
}

/// Solves the group-probability program over the buyers in `side`.
pub fn group_probabilities_on(bids: &BidProfile, side: &[usize], epsilon: f64) -> Result<GroupProbabilities> {
    let m = bids.m();
    let mut winners = Vec::with_capacity(m);
    let mut winner_bids = Vec::with_capacity(m);
    let mut winner_prices = Vec::with_capacity(m);
    for k in 0..m {
        let members: Vec<usize> = side.iter().copied().filter(|&i| bids.group_of(i) == k).collect();
        let (w, price) = second_price_among(bids, &members).ok_or(AuctionError::ResampleNeeded {
            group: k,
            attempts: 0,
        })?;
        winners.push(w);
        winner_bids.push(bids.bid(w));
        winner_prices.push(price);
    }
    let probs = solve_group_lp(&winner_bids, &winner_prices, epsilon)?;
    Ok(GroupProbabilities {
        probs,
        winners,
        winner_bids,
        winner_prices,
    })
}

/// Group probabilities fitted on a whole (statistics-side) profile.
pub fn solve_group_probabilities(stat_bids: &BidProfile, epsilon: f64) -> Result<GroupProbabilities> {
    let all: Vec<usize> = (0..stat_bids.n()).collect();
    group_probabilities_on(stat_bids, &all, epsilon)
}

/// Probabilities for a split; a single group needs no statistics.
fn probabilities_for_split(bids: &BidProfile, split: &BidderSplit, epsilon: f64) -> Result<Vec<f64>> {
    if bids.m() == 1 {
        Ok(vec![1.0])
    } else {
        Ok(group_probabilities_on(bids, &split.stat, epsilon)?.probs)
    }
}

/// Second-price stage on a given split with a given group draw.
pub fn run_on_split(bids: &BidProfile, split: &BidderSplit, group: usize) -> Outcome {
    let members = split.auction_members(bids.partition(), group);
    match second_price_among(bids, &members) {
        Some((w, price)) => Outcome::sold(bids.n(), w, price),
        None => Outcome::no_sale(bids.n()),
    }
}

/// One run of the mechanism. Randomness consumed: the split (`n` draws per
/// attempt) and one uniform for the group draw, independent of the bids.
pub fn gpm_run<R: Rng + ?Sized>(bids: &BidProfile, epsilon: f64, rng: &mut R) -> Result<Outcome> {
    if bids.n() == 0 {
        return Err(AuctionError::EmptyProfile);
    }
    let split = split_with_stat_groups(bids.partition(), rng)?;
    let probs = probabilities_for_split(bids, &split, epsilon)?;
    let group = sample_weighted(&probs, rng).expect("probabilities sum to one");
    Ok(run_on_split(bids, &split, group))
}

/// How a Monte Carlo trial contributes to the expectation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Estimator {
    /// Average realized allocations and payments.
    #[default]
    Realized,
    /// Average, over sampled splits, the exact expectation over the group
    /// draw given the split. Same mean, lower variance.
    SplitConditional,
}

/// Expected outcome plus per-trial group welfare (bids taken as values),
/// for standard errors of welfare differences.
#[derive(Debug, Clone)]
pub struct MonteCarloEstimate {
    pub expected: ExpectedOutcome,
    pub group_welfare_samples: Vec<Vec<f64>>,
}

/// Sparse per-trial contribution: `(buyer, allocation weight, payment)`.
pub type TrialContribution = Vec<(usize, f64, f64)>;

fn gpm_trial(bids: &BidProfile, epsilon: f64, seed: u64, trial: u64, estimator: Estimator) -> Result<TrialContribution> {
    let mut rng = derived_rng(seed, &[trial]);
    match estimator {
        Estimator::Realized => {
            let o = gpm_run(bids, epsilon, &mut rng)?;
            Ok(o.winner().map(|w| vec![(w, 1.0, o.payments()[w])]).unwrap_or_default())
        }
        Estimator::SplitConditional => {
            let split = split_with_stat_groups(bids.partition(), &mut rng)?;
            let probs = probabilities_for_split(bids, &split, epsilon)?;
            Ok((0..bids.m())
                .filter_map(|k| {
                    let members = split.auction_members(bids.partition(), k);
                    second_price_among(bids, &members).map(|(w, price)| (w, probs[k], probs[k] * price))
                })
                .collect())
        }
    }
}

/// Aggregates sparse trial contributions into an expected outcome with
/// standard errors. Contributions are merged in trial order.
pub fn aggregate_trials(bids: &BidProfile, trials: &[TrialContribution]) -> Result<MonteCarloEstimate> {
    let n = bids.n();
    let count = trials.len() as f64;
    let mut sum_pi = vec![0.0; n];
    let mut sum_pi2 = vec![0.0; n];
    let mut sum_p = vec![0.0; n];
    let mut sum_p2 = vec![0.0; n];
    let mut samples = Vec::with_capacity(trials.len());
    for t in trials {
        let mut sw = vec![0.0; bids.m()];
        for &(i, pi, p) in t {
            sum_pi[i] += pi;
            sum_pi2[i] += pi * pi;
            sum_p[i] += p;
            sum_p2[i] += p * p;
            sw[bids.group_of(i)] += pi * bids.bid(i);
        }
        samples.push(sw);
    }
    let se = |s: f64, s2: f64| {
        if trials.len() < 2 {
            0.0
        } else {
            let mean = s / count;
            let var = ((s2 - count * mean * mean) / (count - 1.0)).max(0.0);
            (var / count).sqrt()
        }
    };
    let stderr = EstimatorStderr {
        win_prob: (0..n).map(|i| se(sum_pi[i], sum_pi2[i])).collect(),
        exp_payment: (0..n).map(|i| se(sum_p[i], sum_p2[i])).collect(),
    };
    let expected = ExpectedOutcome::new(
        sum_pi.iter().map(|s| (s / count).min(1.0)).collect(),
        sum_p.iter().map(|s| s / count).collect(),
        Some(stderr),
    )?;
    Ok(MonteCarloEstimate {
        expected,
        group_welfare_samples: samples,
    })
}

/// Monte Carlo expectation over `trials` independent runs. Trial `t` uses the
/// stream derived from `(seed, t)`, so the result does not depend on how
/// trials are scheduled across threads.
pub fn gpm_estimate(
    bids: &BidProfile,
    epsilon: f64,
    trials: usize,
    seed: u64,
    estimator: Estimator,
) -> Result<MonteCarloEstimate> {
    let contributions = gpm_trials(bids, epsilon, trials, seed, estimator)?;
    aggregate_trials(bids, &contributions)
}

/// Per-trial contributions in trial order. Trial `t` consumes the stream
/// `(seed, t)` identically for any bids, so two profiles run with the same
/// seed share splits and lottery draws.
pub fn gpm_trials(
    bids: &BidProfile,
    epsilon: f64,
    trials: usize,
    seed: u64,
    estimator: Estimator,
) -> Result<Vec<TrialContribution>> {
    if trials == 0 {
        return Err(AuctionError::Contract("trials must be at least 1".into()));
    }
    (0..trials as u64)
        .into_par_iter()
        .map(|t| gpm_trial(bids, epsilon, seed, t, estimator))
        .collect()
}

pub fn gpm_expected(bids: &BidProfile, epsilon: f64, trials: usize, seed: u64) -> Result<ExpectedOutcome> {
    Ok(gpm_estimate(bids, epsilon, trials, seed, Estimator::Realized)?.expected)
}

/// Gap between expected group welfares with a standard error taken from the
/// paired per-trial difference of the attaining pair.
pub fn gap_with_stderr(samples: &[Vec<f64>]) -> (f64, f64) {
    let Some(first) = samples.first() else {
        return (f64::NAN, 0.0);
    };
    let m = first.len();
    let means: Vec<f64> = (0..m)
        .map(|k| samples.iter().map(|s| s[k]).sum::<f64>() / samples.len() as f64)
        .collect();
    match crate::model::gap_attaining_pair(&means) {
        None => (0.0, 0.0),
        Some((k, l)) => {
            let acc: MeanAccumulator = samples.iter().map(|s| s[k] - s[l]).collect();
            (acc.mean(), acc.stderr())
        }
    }
}
