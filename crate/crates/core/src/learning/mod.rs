//! Learning group score functions by dual ascent.
//!
//! Parameters `μ` of a [`ScoreNetwork`] are fitted on the statistics-side
//! bids. Every episode runs `sgd_steps_per_episode` full-gradient steps on
//! `L(σ^μ, λ)`, commits `σ^μ` when it is `ε`-group fair on the statistics
//! side, then moves `λ ← max(0, λ + α_λ g)`.

pub mod net;
pub mod objective;

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{AuctionError, Result};
use crate::fmt::sig_digits;
use crate::gsm::{run_lottery, BaseTransform, GroupScoreFunction};
use crate::model::{BidProfile, GroupPartition, Outcome};
use crate::quadrature::QuadratureSpec;
use crate::rng::rng_from_seed;
use crate::split::{split_with_stat_groups, BidderSplit};

pub use net::{emit_params, CParams, FeatureVector, GroupNets, MlpParams, ScoreNetwork};
pub use objective::{evaluate, evaluate_with_grad, lagrangian, ObjectiveValue};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    /// Primal step `α`.
    pub learning_rate: f64,
    /// Dual step; `α` when absent.
    pub dual_learning_rate: Option<f64>,
    pub episodes: usize,
    pub epsilon: f64,
    pub base: BaseTransform,
    pub sgd_steps_per_episode: usize,
    pub hidden_width: usize,
    /// Composite Simpson panels for the payment integrals.
    pub train_panels: usize,
    pub initial_lambda: f64,
    pub seed: u64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            dual_learning_rate: None,
            episodes: 2000,
            epsilon: 0.5,
            base: BaseTransform::Linear,
            sgd_steps_per_episode: 50,
            hidden_width: net::DEFAULT_HIDDEN,
            train_panels: 32,
            initial_lambda: 0.0,
            seed: 0,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(AuctionError::Config(msg.into()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if let Some(r) = self.dual_learning_rate {
            if !(r > 0.0 && r.is_finite()) {
                return bad("dual_learning_rate must be positive");
            }
        }
        if self.episodes == 0 || self.sgd_steps_per_episode == 0 || self.hidden_width == 0 {
            return bad("episodes, sgd_steps_per_episode and hidden_width must be positive");
        }
        if !(self.epsilon >= 0.0) {
            return bad("epsilon must be nonnegative");
        }
        if !(self.initial_lambda >= 0.0) {
            return bad("initial_lambda must be nonnegative");
        }
        self.quadrature().validate()
    }

    pub fn quadrature(&self) -> QuadratureSpec {
        QuadratureSpec::composite(self.train_panels)
    }

    fn dual_rate(&self) -> f64 {
        self.dual_learning_rate.unwrap_or(self.learning_rate)
    }
}

/// One row of the training curve, recorded after the episode's primal steps
/// and before the dual update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub episode: usize,
    pub psi: f64,
    pub g: f64,
    pub lambda: f64,
    pub fair: bool,
}

pub const CURVE_HEADER: &str = "episode,psi,g,lambda,fair";

pub fn write_curve_csv<W: Write>(out: &mut W, curve: &[CurvePoint], header: bool) -> std::io::Result<()> {
    if header {
        writeln!(out, "{CURVE_HEADER}")?;
    }
    for p in curve {
        writeln!(
            out,
            "{},{},{},{},{}",
            p.episode,
            sig_digits(p.psi, 9),
            sig_digits(p.g, 9),
            sig_digits(p.lambda, 9),
            u8::from(p.fair)
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingResult {
    /// Last fairness-feasible score function, `None` for no solution.
    pub solution: Option<GroupScoreFunction>,
    /// Network at the committed episode.
    pub network: Option<ScoreNetwork>,
    pub features: FeatureVector,
    pub first_fair_episode: Option<usize>,
    pub curve: Vec<CurvePoint>,
}

impl TrainingResult {
    pub fn into_solution(self) -> Result<GroupScoreFunction> {
        let episodes = self.curve.len();
        self.solution.ok_or(AuctionError::NoSolution { episodes })
    }
}

const MONOTONE_GRID: usize = 33;

fn assert_invariants(gsf: &GroupScoreFunction, value: &ObjectiveValue, top_bid: f64, episode: usize) -> Result<()> {
    let diverged = |reason: String| Err(AuctionError::Diverged { episode, reason });
    if !(value.lagrangian.is_finite() && value.g.is_finite()) {
        return diverged("non-finite loss".into());
    }
    if value.psi < -top_bid * (1.0 + 1e-9) - 1e-9 {
        return diverged(format!("revenue term {} below −(top bid) {}", value.psi, -top_bid));
    }
    let s = gsf.support();
    for k in 0..gsf.m() {
        let mut prev = f64::NEG_INFINITY;
        for j in 0..MONOTONE_GRID {
            let x = s.lower() + s.width() * j as f64 / (MONOTONE_GRID - 1) as f64;
            let v = gsf.eval(k, x);
            if !(v >= prev && v >= 0.0) {
                return diverged(format!("score of group {k} not monotone at {x}"));
            }
            prev = v;
        }
    }
    Ok(())
}

/// Dual ascent on the statistics-side profile. Every group must have at
/// least one buyer (guaranteed by [`BidProfile`]).
pub fn dual_ascent_train(stat_bids: &BidProfile, cfg: &LearnerConfig) -> Result<TrainingResult> {
    cfg.validate()?;
    let quad = cfg.quadrature();
    let features = FeatureVector::from_bids(stat_bids);
    let support = stat_bids.support();
    let top_bid = stat_bids.bids().iter().cloned().fold(0.0, f64::max);
    let mut network = ScoreNetwork::init(stat_bids.m(), features.len(), cfg.hidden_width, cfg.seed)?;
    let mut lambda = cfg.initial_lambda;
    let mut result = TrainingResult {
        solution: None,
        network: None,
        features: features.clone(),
        first_fair_episode: None,
        curve: Vec::with_capacity(cfg.episodes),
    };

    for episode in 1..=cfg.episodes {
        for _ in 0..cfg.sgd_steps_per_episode {
            let gsf = emit_params(&network, &features, cfg.base, support)?;
            let (value, pgrad) = evaluate_with_grad(&gsf, stat_bids, lambda, cfg.epsilon, &quad)
                .map_err(|e| diverged_on(e, episode))?;
            if !value.lagrangian.is_finite() {
                return Err(AuctionError::Diverged { episode, reason: "non-finite loss".into() });
            }
            let grad = network.backward(&features, &pgrad)?.flatten();
            let mut flat = network.flatten();
            for (w, g) in flat.iter_mut().zip(&grad) {
                *w -= cfg.learning_rate * g;
            }
            network.assign(&flat)?;
            if !network.is_finite() {
                return Err(AuctionError::Diverged { episode, reason: "non-finite parameters".into() });
            }
        }

        let gsf = emit_params(&network, &features, cfg.base, support)?;
        let value = evaluate(&gsf, stat_bids, lambda, cfg.epsilon, &quad).map_err(|e| diverged_on(e, episode))?;
        assert_invariants(&gsf, &value, top_bid, episode)?;
        let fair = value.g <= 0.0;
        if fair {
            result.solution = Some(gsf);
            result.network = Some(network.clone());
            result.first_fair_episode.get_or_insert(episode);
        }
        result.curve.push(CurvePoint { episode, psi: value.psi, g: value.g, lambda, fair });
        lambda = (lambda + cfg.dual_rate() * value.g).max(0.0);
    }
    Ok(result)
}

/// Scores collapsing to zero mid-training are reported as divergence.
fn diverged_on(e: AuctionError, episode: usize) -> AuctionError {
    match e {
        AuctionError::DegenerateScore => AuctionError::Diverged { episode, reason: "all scores collapsed to zero".into() },
        other => other,
    }
}

/// Restriction of `bids` to `members` (ascending), keeping group labels.
pub fn restrict(bids: &BidProfile, members: &[usize]) -> Result<BidProfile> {
    let partition = GroupPartition::new(members.iter().map(|&i| bids.group_of(i)).collect(), bids.m())?;
    BidProfile::new(members.iter().map(|&i| bids.bid(i)).collect(), partition, bids.support())
}

/// Full mechanism run with training: split (resampled until every group has
/// a statistics-side buyer), train on the statistics side, lottery on the
/// auction side.
pub fn gsm_run_trained<R: Rng + ?Sized>(
    bids: &BidProfile,
    cfg: &LearnerConfig,
    rng: &mut R,
    quad: &QuadratureSpec,
) -> Result<(Outcome, BidderSplit, TrainingResult)> {
    let split = split_with_stat_groups(bids.partition(), rng)?;
    let stat = restrict(bids, &split.stat)?;
    let trained = dual_ascent_train(&stat, cfg)?;
    let gsf = trained.clone().into_solution()?;
    let outcome = run_lottery(bids, &gsf, &split.auction_side, rng, quad)?;
    Ok((outcome, split, trained))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    pub skipped: usize,
}

/// Compares the reverse-mode gradient of `L` with central differences
/// (step `1e−5`) on random coordinates. Probes whose step changes a ReLU
/// pattern, a head sign or the attaining pair are skipped.
#[allow(clippy::too_many_arguments)]
pub fn grad_check(
    network: &ScoreNetwork,
    features: &FeatureVector,
    stat_bids: &BidProfile,
    base: BaseTransform,
    lambda: f64,
    epsilon: f64,
    probe_count: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    if probe_count == 0 {
        return Err(AuctionError::Config("probe_count must be at least 1".into()));
    }
    const STEP: f64 = 1e-5;
    let quad = QuadratureSpec::composite(32);
    let support = stat_bids.support();
    let flat = network.flatten();
    let mut rng = rng_from_seed(seed);
    let signature = network.kink_signature(features);

    let at = |w: &[f64]| -> Result<(ScoreNetwork, ObjectiveValue)> {
        let mut net = network.clone();
        net.assign(w)?;
        let gsf = emit_params(&net, features, base, support)?;
        let v = evaluate(&gsf, stat_bids, lambda, epsilon, &quad)?;
        Ok((net, v))
    };

    let mut base_point: Option<(ObjectiveValue, Vec<f64>)> = None;
    let mut report = GradCheckReport { max_rel_error: 0.0, checked: 0, skipped: 0 };
    for _ in 0..probe_count {
        let j = rng.random_range(0..flat.len());
        let mut plus = flat.clone();
        let mut minus = flat.clone();
        plus[j] += STEP;
        minus[j] -= STEP;
        let smooth = [&plus, &minus].iter().all(|w| {
            let mut net = network.clone();
            net.assign(w).is_ok() && net.kink_signature(features) == signature
        });
        if !smooth {
            report.skipped += 1;
            continue;
        }
        if base_point.is_none() {
            let gsf = emit_params(network, features, base, support)?;
            let (v, pgrad) = evaluate_with_grad(&gsf, stat_bids, lambda, epsilon, &quad)?;
            base_point = Some((v, network.backward(features, &pgrad)?.flatten()));
        }
        let (v0, grad) = base_point.as_ref().unwrap();
        let (_, vp) = at(&plus)?;
        let (_, vm) = at(&minus)?;
        if vp.attaining_pair != v0.attaining_pair || vm.attaining_pair != v0.attaining_pair {
            report.skipped += 1;
            continue;
        }
        let fd = (vp.lagrangian - vm.lagrangian) / (2.0 * STEP);
        let err = (grad[j] - fd).abs() / (grad[j].abs() + 1e-8);
        report.max_rel_error = report.max_rel_error.max(err);
        report.checked += 1;
    }
    Ok(report)
}
