//! Group score mechanism.
//!
//! Every auction-side buyer `i` in group `k` wins with probability
//! `Π_i = σ_k(θ′_i) / Σ_j σ_{g(j)}(θ′_j)` and, on winning, pays
//! `p_i = θ′_i − ∫_{θ̲}^{θ′_i} Π_i(x, θ′_{−i}) dx / Π_i(θ′)`, so the expected
//! payment satisfies the Myerson identity for the monotone allocation `Π_i`.

pub mod score;

use rand::Rng;

use crate::error::{AuctionError, Result};
use crate::model::{BidProfile, EstimatorStderr, ExpectedOutcome, Outcome};
use crate::quadrature::QuadratureSpec;
use crate::rng::{rng_from_seed, sample_weighted};
use crate::split::{split_bidders, BidderSplit};
use crate::stats::MeanAccumulator;

pub use score::{score, BaseTransform, GroupScoreFunction, ScoreParams};

/// Winners whose probability falls below this are redrawn.
pub const MIN_WIN_PROB: f64 = 1e-12;
/// Redraw budget before declaring no sale.
pub const MAX_REDRAWS: usize = 32;
/// Largest population for exhaustive split enumeration.
pub const MAX_ENUMERATED_BUYERS: usize = 16;

fn check_groups(gsf: &GroupScoreFunction, bids: &BidProfile) -> Result<()> {
    if gsf.m() != bids.m() {
        return Err(AuctionError::Contract(format!(
            "score function has {} groups, profile has {}",
            gsf.m(),
            bids.m()
        )));
    }
    Ok(())
}

fn side_scores(gsf: &GroupScoreFunction, bids: &BidProfile, side: &[usize]) -> Vec<f64> {
    side.iter().map(|&i| gsf.eval(bids.group_of(i), bids.bid(i))).collect()
}

/// Win probabilities of the buyers in `side`, in `side` order.
pub fn individual_win_probs(gsf: &GroupScoreFunction, bids: &BidProfile, side: &[usize]) -> Result<Vec<f64>> {
    check_groups(gsf, bids)?;
    let scores = side_scores(gsf, bids, side);
    let total: f64 = scores.iter().sum();
    if !(total > 0.0) {
        return Err(AuctionError::DegenerateScore);
    }
    Ok(scores.iter().map(|s| s / total).collect())
}

/// Threshold payment `bid − ∫_{lower}^{bid} Π(x) dx / Π(bid)` of a monotone
/// allocation rule `alloc`, clamped into `[lower, bid]`.
pub fn myerson_payment<F: Fn(f64) -> f64>(alloc: F, bid: f64, lower: f64, quad: &QuadratureSpec) -> Result<f64> {
    quad.validate()?;
    let at_bid = alloc(bid);
    if !(at_bid > 0.0) {
        return Err(AuctionError::Contract(format!(
            "payment undefined: allocation probability at bid {bid} is {at_bid}"
        )));
    }
    let area = quad.integrate(&alloc, lower, bid);
    Ok((bid - area / at_bid).clamp(lower, bid))
}

/// Allocation curve `x ↦ σ(x) / (σ(x) + rivals)` of buyer `i` with the
/// rivals' score mass held fixed.
fn own_allocation(gsf: &GroupScoreFunction, group: usize, rivals: f64) -> impl Fn(f64) -> f64 + '_ {
    move |x| {
        let s = gsf.eval(group, x);
        let total = s + rivals;
        if total > 0.0 {
            s / total
        } else {
            0.0
        }
    }
}

fn rival_mass(gsf: &GroupScoreFunction, bids: &BidProfile, side: &[usize], buyer: usize) -> f64 {
    side.iter()
        .filter(|&&j| j != buyer)
        .map(|&j| gsf.eval(bids.group_of(j), bids.bid(j)))
        .sum()
}

/// Payment of `winner` when the lottery runs over `side`.
pub fn gsm_payment(
    winner: usize,
    bids: &BidProfile,
    gsf: &GroupScoreFunction,
    side: &[usize],
    quad: &QuadratureSpec,
) -> Result<f64> {
    check_groups(gsf, bids)?;
    if !side.contains(&winner) {
        return Err(AuctionError::Contract(format!("winner {winner} is not on the auction side")));
    }
    let rivals = rival_mass(gsf, bids, side, winner);
    let alloc = own_allocation(gsf, bids.group_of(winner), rivals);
    myerson_payment(alloc, bids.bid(winner), bids.support().lower(), quad)
}

/// Lottery and payment over a fixed auction side.
pub fn run_lottery<R: Rng + ?Sized>(
    bids: &BidProfile,
    gsf: &GroupScoreFunction,
    side: &[usize],
    rng: &mut R,
    quad: &QuadratureSpec,
) -> Result<Outcome> {
    if side.is_empty() {
        return Ok(Outcome::no_sale(bids.n()));
    }
    let probs = individual_win_probs(gsf, bids, side)?;
    for _ in 0..MAX_REDRAWS {
        let pick = sample_weighted(&probs, rng).ok_or(AuctionError::DegenerateScore)?;
        if probs[pick] >= MIN_WIN_PROB {
            let winner = side[pick];
            let price = gsm_payment(winner, bids, gsf, side, quad)?;
            return Ok(Outcome::sold(bids.n(), winner, price));
        }
    }
    Ok(Outcome::no_sale(bids.n()))
}

/// One run with fixed score functions: split, then the lottery over the
/// auction side. The statistics side does not take part.
pub fn gsm_run<R: Rng + ?Sized>(
    bids: &BidProfile,
    gsf: &GroupScoreFunction,
    rng: &mut R,
    quad: &QuadratureSpec,
) -> Result<Outcome> {
    if bids.n() == 0 {
        return Err(AuctionError::EmptyProfile);
    }
    check_groups(gsf, bids)?;
    let split = split_bidders(bids.n(), rng);
    run_lottery(bids, gsf, &split.auction_side, rng, quad)
}

/// Exact expectation given the auction side: `Π_i` from the score ratio and
/// `P_i = θ′_i Π_i − ∫ Π_i`. Buyers off the side get zero.
pub fn gsm_expected_on_side(
    bids: &BidProfile,
    gsf: &GroupScoreFunction,
    side: &[usize],
    quad: &QuadratureSpec,
) -> Result<ExpectedOutcome> {
    check_groups(gsf, bids)?;
    quad.validate()?;
    let n = bids.n();
    let mut win = vec![0.0; n];
    let mut pay = vec![0.0; n];
    if !side.is_empty() {
        let probs = individual_win_probs(gsf, bids, side)?;
        let total: f64 = side_scores(gsf, bids, side).iter().sum();
        for (&i, &pi) in side.iter().zip(&probs) {
            win[i] = pi;
            let rivals = total - gsf.eval(bids.group_of(i), bids.bid(i));
            let alloc = own_allocation(gsf, bids.group_of(i), rivals.max(0.0));
            let area = quad.integrate(alloc, bids.support().lower(), bids.bid(i));
            pay[i] = (bids.bid(i) * pi - area).max(0.0);
        }
    }
    ExpectedOutcome::new(win, pay, None)
}

/// `(Π_i, P_i)` of one buyer given the auction side; zero when off it.
pub fn buyer_expected_on_side(
    bids: &BidProfile,
    gsf: &GroupScoreFunction,
    side: &[usize],
    buyer: usize,
    quad: &QuadratureSpec,
) -> Result<(f64, f64)> {
    check_groups(gsf, bids)?;
    if !side.contains(&buyer) {
        return Ok((0.0, 0.0));
    }
    let rivals = rival_mass(gsf, bids, side, buyer);
    let alloc = own_allocation(gsf, bids.group_of(buyer), rivals);
    let pi = alloc(bids.bid(buyer));
    if rivals == 0.0 && pi == 0.0 {
        return Err(AuctionError::DegenerateScore);
    }
    let area = quad.integrate(alloc, bids.support().lower(), bids.bid(buyer));
    Ok((pi, (bids.bid(buyer) * pi - area).max(0.0)))
}

/// How the expectation over the bidder split is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitMode {
    /// Every buyer on the auction side.
    AllAuction,
    /// Average over all `2^n` equally likely splits.
    Enumerate,
    /// Average over sampled splits.
    Sample { samples: usize, seed: u64 },
}

pub fn gsm_expected(
    bids: &BidProfile,
    gsf: &GroupScoreFunction,
    mode: SplitMode,
    quad: &QuadratureSpec,
) -> Result<ExpectedOutcome> {
    let n = bids.n();
    match mode {
        SplitMode::AllAuction => gsm_expected_on_side(bids, gsf, &BidderSplit::all_auction(n).auction_side, quad),
        SplitMode::Enumerate => {
            if n > MAX_ENUMERATED_BUYERS {
                return Err(AuctionError::Contract(format!(
                    "split enumeration limited to {MAX_ENUMERATED_BUYERS} buyers, got {n}"
                )));
            }
            let weight = 0.5f64.powi(n as i32);
            let mut win = vec![0.0; n];
            let mut pay = vec![0.0; n];
            for mask in 0u32..(1 << n) {
                let side: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
                let e = gsm_expected_on_side(bids, gsf, &side, quad)?;
                for i in 0..n {
                    win[i] += weight * e.win_prob()[i];
                    pay[i] += weight * e.exp_payment()[i];
                }
            }
            ExpectedOutcome::new(win, pay, None)
        }
        SplitMode::Sample { samples, seed } => {
            if samples == 0 {
                return Err(AuctionError::Contract("samples must be at least 1".into()));
            }
            let mut rng = rng_from_seed(seed);
            let mut win = vec![MeanAccumulator::new(); n];
            let mut pay = vec![MeanAccumulator::new(); n];
            for _ in 0..samples {
                let split = split_bidders(n, &mut rng);
                let e = gsm_expected_on_side(bids, gsf, &split.auction_side, quad)?;
                for i in 0..n {
                    win[i].push(e.win_prob()[i]);
                    pay[i].push(e.exp_payment()[i]);
                }
            }
            let stderr = EstimatorStderr {
                win_prob: win.iter().map(MeanAccumulator::stderr).collect(),
                exp_payment: pay.iter().map(MeanAccumulator::stderr).collect(),
            };
            ExpectedOutcome::new(
                win.iter().map(|a| a.mean().clamp(0.0, 1.0)).collect(),
                pay.iter().map(MeanAccumulator::mean).collect(),
                Some(stderr),
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ValuationSupport;
    use crate::rng::rng_from_seed;
    use approx::assert_abs_diff_eq;

    fn support() -> ValuationSupport {
        ValuationSupport::new(0.0, 10.0).unwrap()
    }

    fn identity(m: usize) -> GroupScoreFunction {
        GroupScoreFunction::uniform(m, ScoreParams::new(1.0, 1.0, 0.0, 0.0).unwrap(), BaseTransform::Linear, support()).unwrap()
    }

    fn constant(m: usize) -> GroupScoreFunction {
        GroupScoreFunction::uniform(m, ScoreParams::constant(2.0), BaseTransform::Linear, support()).unwrap()
    }

    #[test]
    fn win_prob_examples() {
        let b = BidProfile::from_groups(&[vec![1.0, 2.0, 3.0, 4.0]], support()).unwrap();
        assert_eq!(individual_win_probs(&constant(1), &b, &[0, 1, 2, 3]).unwrap(), vec![0.25; 4]);

        let b = BidProfile::from_groups(&[vec![2.0, 3.0, 5.0]], support()).unwrap();
        let p = individual_win_probs(&identity(1), &b, &[0, 1, 2]).unwrap();
        for (x, y) in p.iter().zip([0.2, 0.3, 0.5]) {
            assert_abs_diff_eq!(*x, y, epsilon = 1e-15);
        }
    }

    #[test]
    fn doubled_group_scores_take_two_thirds() {
        let bids = [1.5, 4.0, 7.25];
        let b = BidProfile::from_groups(&[bids.to_vec(), bids.to_vec()], support()).unwrap();
        let base = ScoreParams::new(0.5, 1.0, 1.0, 0.2).unwrap();
        let twice = ScoreParams::new(1.0, 1.0, 1.0, 0.4).unwrap();
        let g = GroupScoreFunction::new(vec![twice, base], BaseTransform::Square, support()).unwrap();
        let p = individual_win_probs(&g, &b, &(0..6).collect::<Vec<_>>()).unwrap();
        // direct summation oracle
        let sa: f64 = bids.iter().map(|x| 1.0 * (x * x + 1.0) + 0.4).sum();
        let sb: f64 = bids.iter().map(|x| 0.5 * (x * x + 1.0) + 0.2).sum();
        assert_abs_diff_eq!(sa / (sa + sb), 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p[..3].iter().sum::<f64>(), 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn all_zero_scores_are_degenerate() {
        let b = BidProfile::from_groups(&[vec![0.0, 0.0]], support()).unwrap();
        assert_eq!(individual_win_probs(&identity(1), &b, &[0, 1]), Err(AuctionError::DegenerateScore));
    }

    #[test]
    fn constant_allocation_pays_floor() {
        let s = ValuationSupport::new(1.0, 10.0).unwrap();
        let g = GroupScoreFunction::uniform(1, ScoreParams::constant(3.0), BaseTransform::Exp, s).unwrap();
        let b = BidProfile::from_groups(&[vec![6.0, 2.0, 9.0]], s).unwrap();
        let p = gsm_payment(0, &b, &g, &[0, 1, 2], &QuadratureSpec::default()).unwrap();
        assert_abs_diff_eq!(p, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn linear_allocation_pays_half_bid() {
        let q = QuadratureSpec::default();
        let p = myerson_payment(|x| x / 20.0, 7.0, 0.0, &q).unwrap();
        assert_abs_diff_eq!(p, 3.5, epsilon = 1e-10);
    }

    #[test]
    fn step_allocation_pays_threshold() {
        let q = QuadratureSpec::default();
        let t = 4.321;
        let p = myerson_payment(|x| if x >= t { 1.0 } else { 0.0 }, 8.0, 0.0, &q).unwrap();
        assert_abs_diff_eq!(p, t, epsilon = 1e-8);
    }

    #[test]
    fn zero_probability_payment_is_contract_error() {
        assert!(matches!(
            myerson_payment(|_| 0.0, 3.0, 0.0, &QuadratureSpec::default()),
            Err(AuctionError::Contract(_))
        ));
    }

    #[test]
    fn two_constant_bidders_split_evenly_and_pay_floor() {
        let b = BidProfile::from_groups(&[vec![3.0, 8.0]], support()).unwrap();
        let e = gsm_expected(&b, &constant(1), SplitMode::AllAuction, &QuadratureSpec::default()).unwrap();
        assert_eq!(e.win_prob(), &[0.5, 0.5]);
        assert_abs_diff_eq!(e.revenue(), 0.0, epsilon = 1e-12);
        let o = run_lottery(&b, &constant(1), &[0, 1], &mut rng_from_seed(1), &QuadratureSpec::default()).unwrap();
        assert_eq!(o.price(), Some(0.0));
    }

    #[test]
    fn run_is_reproducible() {
        let b = BidProfile::from_groups(&[vec![3.0, 8.0, 1.0], vec![2.0, 9.5]], support()).unwrap();
        let g = identity(2);
        let q = QuadratureSpec::default();
        let x = gsm_run(&b, &g, &mut rng_from_seed(5), &q).unwrap();
        let y = gsm_run(&b, &g, &mut rng_from_seed(5), &q).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn enumeration_matches_hand_computation_for_two_buyers() {
        // identity scores, bids (2, 6): splits {}, {0}, {1}, {0,1} each with weight 1/4
        let b = BidProfile::from_groups(&[vec![2.0, 6.0]], support()).unwrap();
        let q = QuadratureSpec::default();
        let e = gsm_expected(&b, &identity(1), SplitMode::Enumerate, &q).unwrap();
        assert_abs_diff_eq!(e.win_prob()[0], 0.25 * (1.0 + 0.25), epsilon = 1e-12);
        assert_abs_diff_eq!(e.win_prob()[1], 0.25 * (1.0 + 0.75), epsilon = 1e-12);
        // alone on the auction side: Π ≡ 1 above 0, pays 0. Together: Π_0(x) = x/(x+6)
        let area: f64 = 2.0 - 6.0 * (8.0f64 / 6.0).ln();
        assert_abs_diff_eq!(e.exp_payment()[0], 0.25 * (2.0 * 0.25 - area), epsilon = 1e-9);
    }

    #[test]
    fn all_auction_mode_matches_individual_probs() {
        let b = BidProfile::from_groups(&[vec![3.0, 8.0, 1.0], vec![2.0, 9.5]], support()).unwrap();
        let g = GroupScoreFunction::new(
            vec![ScoreParams::new(1.0, 2.0, 0.5, 0.1).unwrap(), ScoreParams::new(3.0, 1.0, 0.0, 0.3).unwrap()],
            BaseTransform::Log1p,
            support(),
        )
        .unwrap();
        let e = gsm_expected(&b, &g, SplitMode::AllAuction, &QuadratureSpec::default()).unwrap();
        let p = individual_win_probs(&g, &b, &[0, 1, 2, 3, 4]).unwrap();
        assert_eq!(e.win_prob(), p.as_slice());
        assert_abs_diff_eq!(e.win_prob().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn sampled_splits_agree_with_enumeration() {
        let b = BidProfile::from_groups(&[vec![3.0, 8.0], vec![2.0, 9.5]], support()).unwrap();
        let g = identity(2);
        let q = QuadratureSpec::composite(64);
        let exact = gsm_expected(&b, &g, SplitMode::Enumerate, &q).unwrap();
        let est = gsm_expected(&b, &g, SplitMode::Sample { samples: 20_000, seed: 9 }, &q).unwrap();
        for i in 0..4 {
            let se = est.stderr().unwrap().win_prob[i];
            assert!((exact.win_prob()[i] - est.win_prob()[i]).abs() <= 4.0 * se + 1e-12);
        }
    }
}
