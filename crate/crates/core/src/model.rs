//! Auction domain types and the welfare, revenue and fairness metrics every
//! mechanism is judged by.
//!
//! Buyers are indexed `0..n`, groups `0..m`. Reports present groups as `1..=m`.

use serde::{Deserialize, Serialize};

use crate::error::{contract, AuctionError, Result};

/// Publicly known valuation support `[lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValuationSupport {
    lower: f64,
    upper: f64,
}

impl ValuationSupport {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite()) || lower < 0.0 || lower >= upper {
            return contract(format!(
                "support must satisfy 0 <= lower < upper, both finite (got [{lower}, {upper}])"
            ));
        }
        Ok(Self { lower, upper })
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// Smallest support covering both.
    pub fn hull(&self, other: &ValuationSupport) -> ValuationSupport {
        ValuationSupport {
            lower: self.lower.min(other.lower),
            upper: self.upper.max(other.upper),
        }
    }
}

/// Assignment of buyers to `m` mutually disjoint, covering groups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupPartition {
    group_of: Vec<usize>,
    m: usize,
}

impl GroupPartition {
    pub fn new(group_of: Vec<usize>, m: usize) -> Result<Self> {
        if m == 0 {
            return contract("number of groups must be positive");
        }
        let mut seen = vec![false; m];
        for (i, &g) in group_of.iter().enumerate() {
            if g >= m {
                return contract(format!("buyer {i} assigned to group {g} but m = {m}"));
            }
            seen[g] = true;
        }
        if let Some(k) = seen.iter().position(|s| !s) {
            return contract(format!("group {k} has no members"));
        }
        Ok(Self { group_of, m })
    }

    /// Consecutive groups: the first `sizes[0]` buyers form group 0, and so on.
    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        let group_of = sizes
            .iter()
            .enumerate()
            .flat_map(|(k, &s)| std::iter::repeat_n(k, s))
            .collect();
        Self::new(group_of, sizes.len())
    }

    pub fn n(&self) -> usize {
        self.group_of.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn group_of(&self, buyer: usize) -> usize {
        self.group_of[buyer]
    }

    pub fn assignments(&self) -> &[usize] {
        &self.group_of
    }

    pub fn members(&self, group: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.group_of[i] == group).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.m];
        for &g in &self.group_of {
            sizes[g] += 1;
        }
        sizes
    }
}

/// Bids (or true valuations, same shape) together with group membership.
#[derive(Debug, Clone, PartialEq)]
pub struct BidProfile {
    bids: Vec<f64>,
    partition: GroupPartition,
    support: ValuationSupport,
}

impl BidProfile {
    pub fn new(bids: Vec<f64>, partition: GroupPartition, support: ValuationSupport) -> Result<Self> {
        if bids.len() != partition.n() {
            return contract(format!(
                "{} bids for a partition of {} buyers",
                bids.len(),
                partition.n()
            ));
        }
        if let Some(i) = bids.iter().position(|&b| !support.contains(b)) {
            return contract(format!(
                "bid {} of buyer {i} outside support [{}, {}]",
                bids[i],
                support.lower(),
                support.upper()
            ));
        }
        Ok(Self {
            bids,
            partition,
            support,
        })
    }

    /// Builds a profile from per-group bid lists, buyers numbered group by group.
    pub fn from_groups(groups: &[Vec<f64>], support: ValuationSupport) -> Result<Self> {
        let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
        let partition = GroupPartition::from_sizes(&sizes)?;
        let bids = groups.iter().flatten().copied().collect();
        Self::new(bids, partition, support)
    }

    pub fn n(&self) -> usize {
        self.bids.len()
    }

    pub fn m(&self) -> usize {
        self.partition.m()
    }

    pub fn bids(&self) -> &[f64] {
        &self.bids
    }

    pub fn bid(&self, buyer: usize) -> f64 {
        self.bids[buyer]
    }

    pub fn partition(&self) -> &GroupPartition {
        &self.partition
    }

    pub fn support(&self) -> ValuationSupport {
        self.support
    }

    pub fn group_of(&self, buyer: usize) -> usize {
        self.partition.group_of(buyer)
    }

    /// Same profile with buyer `buyer` bidding `bid` instead.
    pub fn with_bid(&self, buyer: usize, bid: f64) -> Result<Self> {
        if buyer >= self.n() {
            return contract(format!("buyer {buyer} out of range"));
        }
        if !self.support.contains(bid) {
            return contract(format!("deviation bid {bid} outside support"));
        }
        let mut out = self.clone();
        out.bids[buyer] = bid;
        Ok(out)
    }

    /// Bids grouped per group, preserving buyer order within each group.
    pub fn groups(&self) -> Vec<Vec<f64>> {
        let mut out = vec![Vec::new(); self.m()];
        for (i, &b) in self.bids.iter().enumerate() {
            out[self.group_of(i)].push(b);
        }
        out
    }
}

/// One realized allocation and payment vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    allocation: Vec<u8>,
    payments: Vec<f64>,
}

impl Outcome {
    pub fn no_sale(n: usize) -> Self {
        Self {
            allocation: vec![0; n],
            payments: vec![0.0; n],
        }
    }

    pub fn sold(n: usize, winner: usize, price: f64) -> Self {
        debug_assert!(winner < n && price >= 0.0);
        let mut out = Self::no_sale(n);
        out.allocation[winner] = 1;
        out.payments[winner] = price;
        out
    }

    /// Validates an externally supplied allocation/payment pair.
    pub fn from_vectors(allocation: Vec<u8>, payments: Vec<f64>) -> Result<Self> {
        if allocation.len() != payments.len() {
            return contract("allocation and payment vectors differ in length");
        }
        if allocation.iter().any(|&a| a > 1) {
            return contract("allocation entries must be 0 or 1");
        }
        if allocation.iter().filter(|&&a| a == 1).count() > 1 {
            return contract("more than one winner");
        }
        for (i, (&a, &p)) in allocation.iter().zip(&payments).enumerate() {
            if a == 0 && p != 0.0 {
                return contract(format!("non-winner {i} has payment {p}"));
            }
            if a == 1 && !(p >= 0.0) {
                return contract(format!("winner {i} has negative payment {p}"));
            }
        }
        Ok(Self {
            allocation,
            payments,
        })
    }

    pub fn n(&self) -> usize {
        self.allocation.len()
    }

    pub fn allocation(&self) -> &[u8] {
        &self.allocation
    }

    pub fn payments(&self) -> &[f64] {
        &self.payments
    }

    pub fn winner(&self) -> Option<usize> {
        self.allocation.iter().position(|&a| a == 1)
    }

    pub fn price(&self) -> Option<f64> {
        self.winner().map(|w| self.payments[w])
    }

    /// Realized utility `θ_i π_i − p_i` of every buyer.
    pub fn utilities(&self, valuations: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n(), valuations.len())?;
        Ok(self
            .allocation
            .iter()
            .zip(&self.payments)
            .zip(valuations)
            .map(|((&a, &p), &v)| v * f64::from(a) - p)
            .collect())
    }
}

/// Standard errors attached to a Monte Carlo estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorStderr {
    pub win_prob: Vec<f64>,
    pub exp_payment: Vec<f64>,
}

/// Per-buyer expected allocation `Π_i` and expected payment `P_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedOutcome {
    win_prob: Vec<f64>,
    exp_payment: Vec<f64>,
    stderr: Option<EstimatorStderr>,
}

const PROB_SLACK: f64 = 1e-9;

impl ExpectedOutcome {
    pub fn new(win_prob: Vec<f64>, exp_payment: Vec<f64>, stderr: Option<EstimatorStderr>) -> Result<Self> {
        if win_prob.len() != exp_payment.len() {
            return contract("win-probability and payment vectors differ in length");
        }
        if let Some(se) = &stderr {
            if se.win_prob.len() != win_prob.len() || se.exp_payment.len() != win_prob.len() {
                return contract("stderr vectors differ in length");
            }
        }
        if let Some(i) = win_prob
            .iter()
            .position(|&p| !(-PROB_SLACK..=1.0 + PROB_SLACK).contains(&p))
        {
            return contract(format!("win probability {} of buyer {i} outside [0, 1]", win_prob[i]));
        }
        let total: f64 = win_prob.iter().sum();
        if total > 1.0 + 1e-7 {
            return contract(format!("win probabilities sum to {total} > 1"));
        }
        Ok(Self {
            win_prob,
            exp_payment,
            stderr,
        })
    }

    /// Degenerate expectation of a deterministic outcome.
    pub fn from_outcome(outcome: &Outcome) -> Self {
        Self {
            win_prob: outcome.allocation().iter().map(|&a| f64::from(a)).collect(),
            exp_payment: outcome.payments().to_vec(),
            stderr: None,
        }
    }

    pub fn n(&self) -> usize {
        self.win_prob.len()
    }

    pub fn win_prob(&self) -> &[f64] {
        &self.win_prob
    }

    pub fn exp_payment(&self) -> &[f64] {
        &self.exp_payment
    }

    pub fn stderr(&self) -> Option<&EstimatorStderr> {
        self.stderr.as_ref()
    }

    /// Expected utilities `U_i = θ_i Π_i − P_i`.
    pub fn utilities(&self, valuations: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n(), valuations.len())?;
        Ok(self
            .win_prob
            .iter()
            .zip(&self.exp_payment)
            .zip(valuations)
            .map(|((&pi, &p), &v)| v * pi - p)
            .collect())
    }

    /// Expected social welfare `Σ Π_i θ_i`.
    pub fn social_welfare(&self, valuations: &[f64]) -> Result<f64> {
        check_len(self.n(), valuations.len())?;
        Ok(self.win_prob.iter().zip(valuations).map(|(p, v)| p * v).sum())
    }

    /// Expected revenue `Σ P_i`, the seller's expected utility.
    pub fn revenue(&self) -> f64 {
        self.exp_payment.iter().sum()
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(AuctionError::Contract(format!(
            "length mismatch: expected {expected}, got {got}"
        )));
    }
    Ok(())
}

/// `Σ π_i θ_i`: the allocation is decided by bids, welfare is weighted by true values.
pub fn social_welfare(outcome: &Outcome, valuations: &[f64]) -> Result<f64> {
    check_len(outcome.n(), valuations.len())?;
    Ok(outcome
        .allocation()
        .iter()
        .zip(valuations)
        .map(|(&a, &v)| f64::from(a) * v)
        .sum())
}

pub fn revenue(outcome: &Outcome) -> f64 {
    outcome.payments().iter().sum()
}

/// Per-group expected welfare `SW_k = Σ_{i∈N_k} Π_i θ_i`.
pub fn group_welfares(
    expected: &ExpectedOutcome,
    valuations: &[f64],
    partition: &GroupPartition,
) -> Result<Vec<f64>> {
    check_len(expected.n(), valuations.len())?;
    check_len(partition.n(), valuations.len())?;
    let mut out = vec![0.0; partition.m()];
    for (i, (&pi, &v)) in expected.win_prob().iter().zip(valuations).enumerate() {
        out[partition.group_of(i)] += pi * v;
    }
    Ok(out)
}

/// `max_{k,l} |SW_k − SW_l|`; zero for a single group.
pub fn group_fairness_gap(group_welfares: &[f64]) -> f64 {
    let (lo, hi) = group_welfares
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &w| (lo.min(w), hi.max(w)));
    if group_welfares.len() < 2 {
        0.0
    } else {
        hi - lo
    }
}

/// Pair `(k, l)` attaining the gap with `SW_k ≥ SW_l`, ties to the lexicographically
/// first pair.
pub fn gap_attaining_pair(group_welfares: &[f64]) -> Option<(usize, usize)> {
    let m = group_welfares.len();
    let mut best: Option<(usize, usize, f64)> = None;
    for k in 0..m {
        for l in (k + 1)..m {
            let d = (group_welfares[k] - group_welfares[l]).abs();
            if best.is_none_or(|(_, _, b)| d > b) {
                best = Some((k, l, d));
            }
        }
    }
    best.map(|(k, l, _)| {
        if group_welfares[k] >= group_welfares[l] {
            (k, l)
        } else {
            (l, k)
        }
    })
}

/// Individual fairness level `ε^I = max_k max_{i,j∈N_k} |θ_i Π_i − θ_j Π_j|`.
pub fn individual_fairness(
    expected: &ExpectedOutcome,
    valuations: &[f64],
    partition: &GroupPartition,
) -> Result<f64> {
    check_len(expected.n(), valuations.len())?;
    check_len(partition.n(), valuations.len())?;
    let m = partition.m();
    let mut lo = vec![f64::INFINITY; m];
    let mut hi = vec![f64::NEG_INFINITY; m];
    for (i, (&pi, &v)) in expected.win_prob().iter().zip(valuations).enumerate() {
        let g = partition.group_of(i);
        let gain = pi * v;
        lo[g] = lo[g].min(gain);
        hi[g] = hi[g].max(gain);
    }
    Ok(lo
        .iter()
        .zip(&hi)
        .filter(|(l, _)| l.is_finite())
        .map(|(l, h)| h - l)
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_partition() -> GroupPartition {
        GroupPartition::from_sizes(&[3, 3]).unwrap()
    }

    #[test]
    fn social_welfare_examples() {
        let theta = [9.0, 8.0, 7.0];
        assert_eq!(social_welfare(&Outcome::sold(3, 0, 8.0), &theta).unwrap(), 9.0);
        assert_eq!(social_welfare(&Outcome::no_sale(3), &theta).unwrap(), 0.0);
        assert_eq!(
            social_welfare(&Outcome::sold(3, 1, 1.0), &[2.5, 4.0, 1.0]).unwrap(),
            4.0
        );
        assert!(matches!(
            social_welfare(&Outcome::no_sale(3), &[1.0]),
            Err(AuctionError::Contract(_))
        ));
    }

    #[test]
    fn revenue_examples() {
        assert_eq!(revenue(&Outcome::sold(3, 1, 8.0)), 8.0);
        assert_eq!(revenue(&Outcome::no_sale(3)), 0.0);
        assert_eq!(revenue(&Outcome::sold(3, 0, 3.0)), 3.0);
    }

    #[test]
    fn group_welfares_example_one() {
        let pi = vec![7.0 / 16.0, 0.0, 0.0, 9.0 / 16.0, 0.0, 0.0];
        let exp = ExpectedOutcome::new(pi, vec![0.0; 6], None).unwrap();
        let theta = [9.0, 8.0, 7.0, 7.0, 3.0, 2.0];
        let sw = group_welfares(&exp, &theta, &example_partition()).unwrap();
        assert_eq!(sw, vec![63.0 / 16.0, 63.0 / 16.0]);
        assert_eq!(group_fairness_gap(&sw), 0.0);

        let zero = ExpectedOutcome::new(vec![0.0; 6], vec![0.0; 6], None).unwrap();
        assert_eq!(group_welfares(&zero, &theta, &example_partition()).unwrap(), vec![0.0, 0.0]);

        let one = GroupPartition::from_sizes(&[3]).unwrap();
        let exp = ExpectedOutcome::new(vec![0.5, 0.25, 0.25], vec![0.0; 3], None).unwrap();
        let sw = group_welfares(&exp, &[4.0, 2.0, 2.0], &one).unwrap();
        assert_eq!(sw, vec![3.0]);
    }

    #[test]
    fn gap_examples() {
        assert_eq!(group_fairness_gap(&[5.0]), 0.0);
        assert_eq!(group_fairness_gap(&[1.0, 4.0, 2.5]), 3.0);
        assert_eq!(gap_attaining_pair(&[1.0, 4.0, 2.5]), Some((1, 0)));
        assert_eq!(gap_attaining_pair(&[2.0, 2.0]), Some((0, 1)));
        assert_eq!(gap_attaining_pair(&[2.0]), None);
    }

    #[test]
    fn individual_fairness_examples() {
        let p = GroupPartition::from_sizes(&[2]).unwrap();
        let exp = ExpectedOutcome::new(vec![1.0, 0.0], vec![0.0; 2], None).unwrap();
        assert_eq!(individual_fairness(&exp, &[10.0, 5.0], &p).unwrap(), 10.0);

        // gains A = (2, 1), B = (5, 1)
        let p = GroupPartition::from_sizes(&[2, 2]).unwrap();
        let exp = ExpectedOutcome::new(vec![0.2, 0.1, 0.5, 0.1], vec![0.0; 4], None).unwrap();
        let ef = individual_fairness(&exp, &[10.0, 10.0, 10.0, 10.0], &p).unwrap();
        assert!((ef - 4.0).abs() < 1e-12);

        let exp = ExpectedOutcome::new(vec![0.25, 0.5], vec![0.0; 2], None).unwrap();
        assert_eq!(individual_fairness(&exp, &[4.0, 2.0], &GroupPartition::from_sizes(&[2]).unwrap()).unwrap(), 0.0);
    }

    #[test]
    fn partition_validation() {
        assert!(GroupPartition::new(vec![0, 2], 3).is_err());
        assert!(GroupPartition::new(vec![0, 3], 3).is_err());
        assert!(GroupPartition::new(vec![], 0).is_err());
        let p = GroupPartition::new(vec![1, 0, 1], 2).unwrap();
        assert_eq!(p.members(1), vec![0, 2]);
        assert_eq!(p.sizes(), vec![1, 2]);
    }

    #[test]
    fn support_and_profile_validation() {
        assert!(ValuationSupport::new(-1.0, 2.0).is_err());
        assert!(ValuationSupport::new(2.0, 2.0).is_err());
        assert!(ValuationSupport::new(0.0, f64::INFINITY).is_err());
        let s = ValuationSupport::new(0.0, 10.0).unwrap();
        assert!(BidProfile::from_groups(&[vec![11.0]], s).is_err());
        let b = BidProfile::from_groups(&[vec![1.0, 2.0], vec![3.0]], s).unwrap();
        assert_eq!(b.group_of(2), 1);
        assert!(b.with_bid(0, 12.0).is_err());
        assert_eq!(b.with_bid(0, 9.0).unwrap().bid(0), 9.0);
    }

    #[test]
    fn outcome_validation() {
        assert!(Outcome::from_vectors(vec![1, 1], vec![1.0, 1.0]).is_err());
        assert!(Outcome::from_vectors(vec![0, 1], vec![1.0, 1.0]).is_err());
        assert!(Outcome::from_vectors(vec![0, 1], vec![0.0, -1.0]).is_err());
        let o = Outcome::from_vectors(vec![0, 1], vec![0.0, 2.0]).unwrap();
        assert_eq!(o.winner(), Some(1));
        assert_eq!(o.price(), Some(2.0));
    }

    #[test]
    fn expected_outcome_validation() {
        assert!(ExpectedOutcome::new(vec![0.7, 0.7], vec![0.0; 2], None).is_err());
        assert!(ExpectedOutcome::new(vec![-0.1], vec![0.0], None).is_err());
    }
}
