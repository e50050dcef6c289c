//! Statistical audits: incentive compatibility by deviation grids with
//! common random numbers, and group fairness of expected welfare.
//!
//! A deviation is flagged when its estimated utility gain exceeds
//! `z · stderr` plus a small numerical tolerance. Exact mechanisms report a
//! zero standard error.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{second_price_expected, simple_expected};
use crate::error::{AuctionError, Result};
use crate::gpm::{gap_with_stderr, gpm_estimate, gpm_trials, Estimator};
use crate::gsm::{buyer_expected_on_side, gsm_expected_on_side, GroupScoreFunction};
use crate::learning::{dual_ascent_train, restrict, LearnerConfig};
use crate::mechanism::Mechanism;
use crate::model::{group_fairness_gap, group_welfares, BidProfile};
use crate::quadrature::QuadratureSpec;
use crate::rng::{derive_seed, derived_rng};
use crate::split::{split_bidders, split_with_stat_groups};
use crate::stats::MeanAccumulator;

/// Absolute slack for exact (zero-stderr) comparisons.
pub const NUMERIC_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct IcAuditConfig {
    pub mechanism: Mechanism,
    pub epsilon: f64,
    /// Fixed score functions; required for GSM.
    pub scores: Option<GroupScoreFunction>,
    /// Monte Carlo trials per report.
    pub trials: usize,
    pub seed: u64,
    /// Critical value, `3` for the usual three-sigma rule.
    pub z: f64,
    pub buyers: Vec<usize>,
    pub deviations: Vec<f64>,
    pub quadrature: QuadratureSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcProbe {
    pub buyer: usize,
    pub value: f64,
    pub deviation: f64,
    pub truthful_utility: f64,
    pub deviating_utility: f64,
    /// `deviating − truthful`, estimated on paired draws.
    pub gain: f64,
    pub gain_se: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BuyerIcSummary {
    pub buyer: usize,
    pub truthful_utility: f64,
    pub truthful_se: f64,
    /// Largest estimated gain over the deviation grid.
    pub max_gain: f64,
    pub max_gain_se: f64,
    pub max_gain_deviation: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub ic_violation: bool,
    pub ir_violation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcReport {
    pub mechanism: Mechanism,
    pub z: f64,
    pub buyers: Vec<BuyerIcSummary>,
    pub probes: Vec<IcProbe>,
}

impl IcReport {
    pub fn passed(&self) -> bool {
        self.buyers.iter().all(|b| !b.ic_violation && !b.ir_violation)
    }

    pub fn max_gain(&self) -> f64 {
        self.buyers.iter().map(|b| b.max_gain).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Per-trial utilities of `buyer` (true value `value`) when reporting the
/// bids of `bids`. Exact mechanisms return a single sample.
fn utility_samples(bids: &BidProfile, buyer: usize, value: f64, cfg: &IcAuditConfig) -> Result<Vec<f64>> {
    let u = |pi: f64, pay: f64| value * pi - pay;
    match cfg.mechanism {
        Mechanism::SecondPrice => {
            let e = second_price_expected(bids)?;
            Ok(vec![u(e.win_prob()[buyer], e.exp_payment()[buyer])])
        }
        Mechanism::Simple => {
            let e = simple_expected(bids)?;
            Ok(vec![u(e.win_prob()[buyer], e.exp_payment()[buyer])])
        }
        Mechanism::Gpm => {
            let trials = gpm_trials(bids, cfg.epsilon, cfg.trials, cfg.seed, Estimator::SplitConditional)?;
            Ok(trials
                .iter()
                .map(|t| t.iter().filter(|c| c.0 == buyer).map(|&(_, pi, p)| u(pi, p)).sum())
                .collect())
        }
        Mechanism::Gsm => {
            let gsf = cfg
                .scores
                .as_ref()
                .ok_or_else(|| AuctionError::Config("gsm audit needs score functions".into()))?;
            (0..cfg.trials as u64)
                .into_par_iter()
                .map(|t| {
                    let split = split_bidders(bids.n(), &mut derived_rng(cfg.seed, &[t]));
                    let (pi, pay) = buyer_expected_on_side(bids, gsf, &split.auction_side, buyer, &cfg.quadrature)?;
                    Ok(u(pi, pay))
                })
                .collect()
        }
    }
}

fn paired(a: &[f64], b: &[f64]) -> (f64, f64) {
    let acc: MeanAccumulator = a.iter().zip(b).map(|(x, y)| x - y).collect();
    (acc.mean(), acc.stderr())
}

/// Unilateral deviations of each listed buyer over the deviation grid,
/// holding the other bids fixed. Truthful bids are the profile's bids.
pub fn verify_ic(bids: &BidProfile, cfg: &IcAuditConfig) -> Result<IcReport> {
    if cfg.trials == 0 {
        return Err(AuctionError::Config("trials must be at least 1".into()));
    }
    if cfg.deviations.is_empty() || cfg.buyers.is_empty() {
        return Err(AuctionError::Config("need at least one buyer and one deviation".into()));
    }
    if let Some(&b) = cfg.buyers.iter().find(|&&b| b >= bids.n()) {
        return Err(AuctionError::Config(format!("buyer {b} out of range")));
    }
    let mut probes = Vec::new();
    let mut buyers = Vec::new();
    for &buyer in &cfg.buyers {
        let value = bids.bid(buyer);
        let truthful = utility_samples(bids, buyer, value, cfg)?;
        let truth: MeanAccumulator = truthful.iter().copied().collect();
        let mut worst: Option<IcProbe> = None;
        for &dev in &cfg.deviations {
            let deviated = bids.with_bid(buyer, dev)?;
            let samples = utility_samples(&deviated, buyer, value, cfg)?;
            let (gain, gain_se) = paired(&samples, &truthful);
            let probe = IcProbe {
                buyer,
                value,
                deviation: dev,
                truthful_utility: truth.mean(),
                deviating_utility: samples.iter().sum::<f64>() / samples.len() as f64,
                gain,
                gain_se,
            };
            if worst.is_none_or(|w| probe.gain > w.gain) {
                worst = Some(probe);
            }
            probes.push(probe);
        }
        let w = worst.expect("nonempty grid");
        let tol = NUMERIC_TOL * (1.0 + value.abs());
        buyers.push(BuyerIcSummary {
            buyer,
            truthful_utility: truth.mean(),
            truthful_se: truth.stderr(),
            max_gain: w.gain,
            max_gain_se: w.gain_se,
            max_gain_deviation: w.deviation,
            ci_low: w.gain - cfg.z * w.gain_se,
            ci_high: w.gain + cfg.z * w.gain_se,
            ic_violation: w.gain > cfg.z * w.gain_se + tol,
            ir_violation: truth.mean() < -(cfg.z * truth.stderr() + tol),
        });
    }
    Ok(IcReport { mechanism: cfg.mechanism, z: cfg.z, buyers, probes })
}

#[derive(Debug, Clone)]
pub struct FairnessAuditConfig {
    pub mechanism: Mechanism,
    pub epsilon: f64,
    /// Fixed score functions for GSM; trained per repetition when absent.
    pub scores: Option<GroupScoreFunction>,
    pub learner: LearnerConfig,
    /// Monte Carlo repetitions (splits, or split-and-train for GSM).
    pub reps: usize,
    pub seed: u64,
    pub z: f64,
    pub quadrature: QuadratureSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub mechanism: Mechanism,
    pub epsilon: f64,
    pub group_welfare: Vec<f64>,
    pub gap: f64,
    pub gap_se: f64,
    pub z: f64,
    /// Repetitions where training found no feasible score function.
    pub no_solution: usize,
    pub passed: bool,
}

/// Expected-welfare gap between groups (bids as values) compared against
/// `ε + z · stderr`.
pub fn verify_fairness(bids: &BidProfile, cfg: &FairnessAuditConfig) -> Result<FairnessReport> {
    if cfg.reps == 0 {
        return Err(AuctionError::Config("reps must be at least 1".into()));
    }
    let mut no_solution = 0;
    let samples: Vec<Vec<f64>> = match cfg.mechanism {
        Mechanism::SecondPrice | Mechanism::Simple => {
            let e = if cfg.mechanism == Mechanism::SecondPrice { second_price_expected(bids)? } else { simple_expected(bids)? };
            vec![group_welfares(&e, bids.bids(), bids.partition())?]
        }
        Mechanism::Gpm => {
            gpm_estimate(bids, cfg.epsilon, cfg.reps, cfg.seed, Estimator::SplitConditional)?.group_welfare_samples
        }
        Mechanism::Gsm => {
            let per_rep: Vec<Option<Vec<f64>>> = (0..cfg.reps as u64)
                .into_par_iter()
                .map(|t| gsm_fairness_rep(bids, cfg, t))
                .collect::<Result<_>>()?;
            no_solution = per_rep.iter().filter(|r| r.is_none()).count();
            per_rep.into_iter().flatten().collect()
        }
    };
    if samples.is_empty() {
        return Err(AuctionError::NoSolution { episodes: cfg.learner.episodes });
    }
    let (gap, gap_se) = if samples.len() == 1 {
        (group_fairness_gap(&samples[0]), 0.0)
    } else {
        gap_with_stderr(&samples)
    };
    let m = samples[0].len();
    let group_welfare: Vec<f64> =
        (0..m).map(|k| samples.iter().map(|s| s[k]).sum::<f64>() / samples.len() as f64).collect();
    let passed = gap <= cfg.epsilon + cfg.z * gap_se + NUMERIC_TOL;
    Ok(FairnessReport { mechanism: cfg.mechanism, epsilon: cfg.epsilon, group_welfare, gap, gap_se, z: cfg.z, no_solution, passed })
}

fn gsm_fairness_rep(bids: &BidProfile, cfg: &FairnessAuditConfig, rep: u64) -> Result<Option<Vec<f64>>> {
    let mut rng = derived_rng(cfg.seed, &[rep]);
    let (gsf, side) = match &cfg.scores {
        Some(g) => (g.clone(), split_bidders(bids.n(), &mut rng).auction_side),
        None => {
            let split = split_with_stat_groups(bids.partition(), &mut rng)?;
            let stat = restrict(bids, &split.stat)?;
            let learner = LearnerConfig { epsilon: cfg.epsilon, seed: derive_seed(cfg.seed, &[rep, 1]), ..cfg.learner.clone() };
            match dual_ascent_train(&stat, &learner)?.solution {
                Some(g) => (g, split.auction_side),
                None => return Ok(None),
            }
        }
    };
    let e = gsm_expected_on_side(bids, &gsf, &side, &cfg.quadrature)?;
    Ok(Some(group_welfares(&e, bids.bids(), bids.partition())?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gsm::{BaseTransform, ScoreParams};
    use crate::model::ValuationSupport;
    use approx::assert_abs_diff_eq;

    fn example1() -> BidProfile {
        BidProfile::from_groups(&[vec![9.0, 8.0, 7.0], vec![7.0, 3.0, 2.0]], ValuationSupport::new(0.0, 10.0).unwrap()).unwrap()
    }

    fn ic_cfg(mechanism: Mechanism) -> IcAuditConfig {
        IcAuditConfig {
            mechanism,
            epsilon: 0.5,
            scores: None,
            trials: 400,
            seed: 3,
            z: 3.0,
            buyers: (0..6).collect(),
            deviations: (0..=20).map(|k| k as f64 * 0.5).collect(),
            quadrature: QuadratureSpec::composite(64),
        }
    }

    #[test]
    fn second_price_passes() {
        let r = verify_ic(&example1(), &ic_cfg(Mechanism::SecondPrice)).unwrap();
        assert!(r.passed());
        assert!(r.max_gain() <= 1e-12);
    }

    #[test]
    fn simple_mechanism_gain_for_d() {
        let mut cfg = ic_cfg(Mechanism::Simple);
        cfg.buyers = vec![3];
        cfg.deviations = vec![6.0];
        let r = verify_ic(&example1(), &cfg).unwrap();
        assert!(!r.passed());
        assert_abs_diff_eq!(r.buyers[0].max_gain, 36.0 / 15.0 - 9.0 / 4.0, epsilon = 1e-12);
    }

    #[test]
    fn gpm_passes_on_example() {
        let r = verify_ic(&example1(), &ic_cfg(Mechanism::Gpm)).unwrap();
        assert!(r.passed(), "{:?}", r.buyers);
    }

    #[test]
    fn gsm_with_fixed_scores_passes() {
        let mut cfg = ic_cfg(Mechanism::Gsm);
        cfg.trials = 64;
        cfg.scores = Some(
            GroupScoreFunction::new(
                vec![ScoreParams::new(1.0, 1.0, 0.2, 0.1).unwrap(), ScoreParams::new(2.0, 0.5, 0.0, 0.3).unwrap()],
                BaseTransform::Square,
                ValuationSupport::new(0.0, 10.0).unwrap(),
            )
            .unwrap(),
        );
        cfg.buyers = vec![0, 4];
        let r = verify_ic(&example1(), &cfg).unwrap();
        assert!(r.passed(), "{:?}", r.buyers);
    }

    #[test]
    fn fairness_of_baselines() {
        let cfg = |mechanism| FairnessAuditConfig {
            mechanism,
            epsilon: 0.0,
            scores: None,
            learner: LearnerConfig::default(),
            reps: 10,
            seed: 0,
            z: 3.0,
            quadrature: QuadratureSpec::default(),
        };
        let r = verify_fairness(&example1(), &cfg(Mechanism::Simple)).unwrap();
        assert!(r.passed);
        assert_abs_diff_eq!(r.gap, 0.0, epsilon = 1e-12);
        let r = verify_fairness(&example1(), &cfg(Mechanism::SecondPrice)).unwrap();
        assert!(!r.passed);
        assert_eq!(r.gap, 9.0);
    }
}
