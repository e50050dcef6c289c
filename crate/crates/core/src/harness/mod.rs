//! Seeded experiment grids over mechanisms, group sizes, valuation
//! distributions, `ε` and base transforms.
//!
//! Trial `t` of every cell sharing a size pair and a valuation pair sees the
//! same profile, and a given mechanism sees the same split and lottery
//! streams across `ε` and base transforms, so differences between cells are
//! paired. Nothing depends on thread scheduling.

pub mod valuation;

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{second_price_expected, simple_expected};
use crate::error::{AuctionError, Result};
use crate::fmt::sig_digits;
use crate::gpm::{gpm_estimate, Estimator};
use crate::gsm::{gsm_expected_on_side, BaseTransform};
use crate::learning::{dual_ascent_train, restrict, LearnerConfig};
use crate::mechanism::Mechanism;
use crate::model::{group_fairness_gap, group_welfares, individual_fairness, BidProfile, ExpectedOutcome};
use crate::quadrature::QuadratureSpec;
use crate::rng::{derive_seed, derived_rng, rng_from_seed};
use crate::split::split_with_stat_groups;
use crate::stats::mean_stderr;

pub use valuation::{sample_valuations, ValuationKind, ValuationSpec};

pub const CSV_HEADER: &str =
    "cell_id,mechanism,n1,n2,dist1,dist2,epsilon,base,trials,sw_mean,sw_se,rv_mean,rv_se,gap_mean,gap_se,ef_mean,ef_se,infeasible,wall_ms";

const VALUATION_STREAM: u64 = 0;
const MECHANISM_STREAM: u64 = 1;

/// Learner used inside grids: shorter than the standalone defaults so a
/// per-trial fit stays cheap.
pub fn harness_learner() -> LearnerConfig {
    LearnerConfig {
        learning_rate: 0.05,
        dual_learning_rate: Some(1.0),
        episodes: 100,
        sgd_steps_per_episode: 10,
        ..LearnerConfig::default()
    }
}

fn default_trials() -> usize {
    100
}

fn default_mc_reps() -> usize {
    200
}

fn default_bases() -> Vec<BaseTransform> {
    vec![BaseTransform::Linear]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentGrid {
    pub group_sizes: Vec<(usize, usize)>,
    pub valuations: Vec<(ValuationSpec, ValuationSpec)>,
    pub epsilons: Vec<f64>,
    #[serde(default = "default_bases")]
    pub bases: Vec<BaseTransform>,
    pub mechanisms: Vec<Mechanism>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// Sampled splits per GPM expectation.
    #[serde(default = "default_mc_reps")]
    pub mc_reps: usize,
    #[serde(default = "harness_learner")]
    pub learner: LearnerConfig,
    /// Wall-clock column; off keeps result files byte-reproducible.
    #[serde(default)]
    pub record_timing: bool,
}

impl ExperimentGrid {
    pub fn from_json(text: &str) -> Result<Self> {
        let grid: Self = serde_json::from_str(text).map_err(|e| AuctionError::Config(format!("grid file: {e}")))?;
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(AuctionError::Config(format!("grid: {msg}")));
        if self.group_sizes.is_empty()
            || self.valuations.is_empty()
            || self.epsilons.is_empty()
            || self.bases.is_empty()
            || self.mechanisms.is_empty()
        {
            return bad("every list must be nonempty");
        }
        if self.trials == 0 || self.mc_reps == 0 {
            return bad("trials and mc_reps must be at least 1");
        }
        if self.group_sizes.iter().any(|&(a, b)| a == 0 || b == 0) {
            return bad("group sizes must be at least 1");
        }
        if self.epsilons.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
            return bad("epsilons must be finite and nonnegative");
        }
        self.learner.validate()
    }

    /// Cells in output order: sizes, valuations, `ε`, mechanism, then base
    /// (GSM only).
    pub fn cells(&self) -> Vec<CellConfig> {
        let mut out = Vec::new();
        for (size_index, &sizes) in self.group_sizes.iter().enumerate() {
            for (valuation_index, &valuations) in self.valuations.iter().enumerate() {
                for &epsilon in &self.epsilons {
                    for &mechanism in &self.mechanisms {
                        let bases: Vec<Option<BaseTransform>> = if mechanism == Mechanism::Gsm {
                            self.bases.iter().copied().map(Some).collect()
                        } else {
                            vec![None]
                        };
                        for base in bases {
                            out.push(CellConfig {
                                cell_id: out.len(),
                                mechanism,
                                sizes,
                                size_index,
                                valuations,
                                valuation_index,
                                epsilon,
                                base,
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellConfig {
    pub cell_id: usize,
    pub mechanism: Mechanism,
    pub sizes: (usize, usize),
    pub size_index: usize,
    pub valuations: (ValuationSpec, ValuationSpec),
    pub valuation_index: usize,
    pub epsilon: f64,
    pub base: Option<BaseTransform>,
}

/// Metrics of one trial's expected outcome, with bids as true values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub social_welfare: f64,
    pub revenue: f64,
    pub group_gap: f64,
    pub individual_fairness: f64,
}

impl TrialMetrics {
    pub fn of(expected: &ExpectedOutcome, bids: &BidProfile) -> Result<Self> {
        let gw = group_welfares(expected, bids.bids(), bids.partition())?;
        Ok(Self {
            social_welfare: expected.social_welfare(bids.bids())?,
            revenue: expected.revenue(),
            group_gap: group_fairness_gap(&gw),
            individual_fairness: individual_fairness(expected, bids.bids(), bids.partition())?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

impl MeanSe {
    fn of(xs: &[f64]) -> Self {
        if xs.is_empty() {
            return Self { mean: f64::NAN, se: f64::NAN };
        }
        let (mean, se) = mean_stderr(xs);
        Self { mean, se }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub cell: CellConfig,
    pub trials: usize,
    pub social_welfare: MeanSe,
    pub revenue: MeanSe,
    pub group_gap: MeanSe,
    pub individual_fairness: MeanSe,
    /// Trials without a feasible mechanism (no solution or infeasible
    /// program); excluded from the means.
    pub infeasible: usize,
    pub wall_ms: u64,
    /// Per-trial metrics in trial order, `None` where infeasible.
    pub samples: Vec<Option<TrialMetrics>>,
    /// Set when the cell failed outright.
    pub error: Option<String>,
}

impl ExperimentRecord {
    /// Any infeasible trial.
    pub fn infeasible_flag(&self) -> bool {
        self.infeasible > 0
    }

    fn aggregate(cell: CellConfig, trials: usize, samples: Vec<Option<TrialMetrics>>, wall_ms: u64) -> Self {
        let ok: Vec<TrialMetrics> = samples.iter().flatten().copied().collect();
        let col = |f: fn(&TrialMetrics) -> f64| MeanSe::of(&ok.iter().map(f).collect::<Vec<_>>());
        Self {
            cell,
            trials,
            social_welfare: col(|t| t.social_welfare),
            revenue: col(|t| t.revenue),
            group_gap: col(|t| t.group_gap),
            individual_fairness: col(|t| t.individual_fairness),
            infeasible: samples.len() - ok.len(),
            wall_ms,
            samples,
            error: None,
        }
    }
}

/// Profile of trial `trial` for the cell's size and valuation indices.
pub fn trial_profile(cell: &CellConfig, master_seed: u64, trial: usize) -> Result<BidProfile> {
    let mut rng = derived_rng(
        master_seed,
        &[VALUATION_STREAM, cell.size_index as u64, cell.valuation_index as u64, trial as u64],
    );
    let (s1, s2) = cell.valuations;
    sample_valuations(&[s1, s2], &[cell.sizes.0, cell.sizes.1], &mut rng)
}

fn mechanism_seed(cell: &CellConfig, master_seed: u64, trial: usize) -> u64 {
    let mech = Mechanism::ALL.iter().position(|&m| m == cell.mechanism).unwrap() as u64;
    derive_seed(
        master_seed,
        &[MECHANISM_STREAM, cell.size_index as u64, cell.valuation_index as u64, trial as u64, mech],
    )
}

/// Expected outcome of one trial; `Ok(None)` when the mechanism has no
/// feasible solution on this profile.
fn run_trial(cell: &CellConfig, grid: &ExperimentGrid, trial: usize) -> Result<Option<TrialMetrics>> {
    let bids = trial_profile(cell, grid.master_seed, trial)?;
    let seed = mechanism_seed(cell, grid.master_seed, trial);
    let expected = match cell.mechanism {
        Mechanism::SecondPrice => second_price_expected(&bids),
        Mechanism::Simple => simple_expected(&bids),
        Mechanism::Gpm => {
            gpm_estimate(&bids, cell.epsilon, grid.mc_reps, seed, Estimator::SplitConditional).map(|e| e.expected)
        }
        Mechanism::Gsm => gsm_trial(cell, grid, &bids, seed),
    };
    match expected {
        Ok(e) => TrialMetrics::of(&e, &bids).map(Some),
        Err(AuctionError::NoSolution { .. } | AuctionError::Infeasible { .. } | AuctionError::ResampleNeeded { .. }) => {
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

fn gsm_trial(cell: &CellConfig, grid: &ExperimentGrid, bids: &BidProfile, seed: u64) -> Result<ExpectedOutcome> {
    let mut rng = rng_from_seed(seed);
    let split = split_with_stat_groups(bids.partition(), &mut rng)?;
    let stat = restrict(bids, &split.stat)?;
    let cfg = LearnerConfig {
        epsilon: cell.epsilon,
        base: cell.base.unwrap_or(BaseTransform::Linear),
        seed: derive_seed(seed, &[2]),
        ..grid.learner.clone()
    };
    let gsf = dual_ascent_train(&stat, &cfg)?.into_solution()?;
    gsm_expected_on_side(bids, &gsf, &split.auction_side, &QuadratureSpec::default())
}

/// All trials of one cell. Failures are recorded on the record.
pub fn run_cell(cell: &CellConfig, grid: &ExperimentGrid) -> ExperimentRecord {
    let start = Instant::now();
    let results: Vec<Result<Option<TrialMetrics>>> =
        (0..grid.trials).into_par_iter().map(|t| run_trial(cell, grid, t)).collect();
    let wall_ms = if grid.record_timing { start.elapsed().as_millis() as u64 } else { 0 };
    match results.into_iter().collect::<Result<Vec<_>>>() {
        Ok(samples) => ExperimentRecord::aggregate(*cell, grid.trials, samples, wall_ms),
        Err(e) => {
            let mut rec = ExperimentRecord::aggregate(*cell, grid.trials, vec![None; grid.trials], wall_ms);
            rec.error = Some(e.to_string());
            rec
        }
    }
}

/// Every cell of the grid, in cell order, on a pool of `parallelism`
/// threads.
pub fn run_grid(grid: &ExperimentGrid, parallelism: usize) -> Result<Vec<ExperimentRecord>> {
    grid.validate()?;
    if parallelism == 0 {
        return Err(AuctionError::Config("parallelism must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| AuctionError::Config(format!("thread pool: {e}")))?;
    let cells = grid.cells();
    Ok(pool.install(|| cells.par_iter().map(|c| run_cell(c, grid)).collect()))
}

pub fn write_csv<W: Write>(out: W, records: &[ExperimentRecord]) -> Result<()> {
    let io = |e: csv::Error| AuctionError::Config(format!("writing results: {e}"));
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER.split(',')).map_err(io)?;
    let num = |x: f64| sig_digits(x, 9);
    for r in records {
        let c = &r.cell;
        w.write_record([
            c.cell_id.to_string(),
            c.mechanism.to_string(),
            c.sizes.0.to_string(),
            c.sizes.1.to_string(),
            c.valuations.0.to_string(),
            c.valuations.1.to_string(),
            num(c.epsilon),
            c.base.map(|b| b.to_string()).unwrap_or_default(),
            r.trials.to_string(),
            num(r.social_welfare.mean),
            num(r.social_welfare.se),
            num(r.revenue.mean),
            num(r.revenue.se),
            num(r.group_gap.mean),
            num(r.group_gap.se),
            num(r.individual_fairness.mean),
            num(r.individual_fairness.se),
            r.infeasible.to_string(),
            r.wall_ms.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| AuctionError::Config(format!("writing results: {e}")))?;
    Ok(())
}

pub fn csv_string(records: &[ExperimentRecord]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(&mut buf, records)?;
    Ok(String::from_utf8(buf).expect("ascii output"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(mechanisms: Vec<Mechanism>, trials: usize) -> ExperimentGrid {
        ExperimentGrid {
            group_sizes: vec![(20, 30)],
            valuations: vec![("uniform:0:10".parse().unwrap(), "uniform:0:8".parse().unwrap())],
            epsilons: vec![0.5, 1.5],
            bases: vec![BaseTransform::Linear],
            mechanisms,
            trials,
            master_seed: 7,
            mc_reps: 20,
            learner: LearnerConfig { episodes: 5, sgd_steps_per_episode: 2, hidden_width: 4, ..harness_learner() },
            record_timing: false,
        }
    }

    #[test]
    fn grid_json_rejects_unknown_keys() {
        let ok = r#"{"group_sizes": [[100, 900]], "valuations": [["uniform:0:10", "uniform:0:8"]],
                     "epsilons": [0.5], "mechanisms": ["gpm"]}"#;
        let g = ExperimentGrid::from_json(ok).unwrap();
        assert_eq!((g.trials, g.mc_reps, g.bases.clone()), (100, 200, vec![BaseTransform::Linear]));
        let bad = ok.replace("\"epsilons\"", "\"epsilon_list\": [1], \"epsilons\"");
        assert!(ExperimentGrid::from_json(&bad).is_err());
    }

    #[test]
    fn cell_enumeration() {
        let mut g = grid(Mechanism::ALL.to_vec(), 1);
        g.bases = vec![BaseTransform::Linear, BaseTransform::Exp];
        let cells = g.cells();
        assert_eq!(cells.len(), 2 * (3 + 2));
        assert!(cells.iter().enumerate().all(|(i, c)| c.cell_id == i));
        assert!(cells.iter().all(|c| c.base.is_some() == (c.mechanism == Mechanism::Gsm)));
    }

    #[test]
    fn single_trial_has_zero_stderr() {
        let recs = run_grid(&grid(vec![Mechanism::SecondPrice], 1), 1).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].social_welfare.se, 0.0);
        assert_eq!(recs[0].samples.len(), 1);
    }

    #[test]
    fn profiles_shared_across_epsilon_and_mechanism() {
        let g = grid(Mechanism::ALL.to_vec(), 1);
        let cells = g.cells();
        let a = trial_profile(&cells[0], g.master_seed, 3).unwrap();
        let b = trial_profile(&cells[cells.len() - 1], g.master_seed, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn records_independent_of_parallelism() {
        let g = grid(Mechanism::ALL.to_vec(), 3);
        let one = csv_string(&run_grid(&g, 1).unwrap()).unwrap();
        let many = csv_string(&run_grid(&g, 3).unwrap()).unwrap();
        assert_eq!(one, many);
        assert!(one.starts_with(CSV_HEADER));
        assert_eq!(one.lines().count(), 1 + 8);
        assert!(!one.contains('\r'));
    }
}
