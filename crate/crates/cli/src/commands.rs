use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use fair_auction::audit::{self, FairnessAuditConfig, IcAuditConfig};
use fair_auction::baselines::{second_price, simple_mechanism_with_rng, TieBreak};
use fair_auction::gpm::gpm_run;
use fair_auction::gsm::{gsm_run, GroupScoreFunction};
use fair_auction::harness::{self, sample_valuations, ExperimentGrid, ValuationSpec};
use fair_auction::io::{outcome_to_json, parse_bids};
use fair_auction::learning::{dual_ascent_train, gsm_run_trained, write_curve_csv, LearnerConfig};
use fair_auction::rng::{derived_rng, rng_from_seed};
use fair_auction::stats::MeanAccumulator;
use fair_auction::{AuctionError, BidProfile, Mechanism, Outcome, QuadratureSpec};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::args::{
    ExperimentArgs, LearnerArgs, ProfileArgs, RunAuctionArgs, TrainScoresArgs, VerifyFairnessArgs, VerifyIcArgs,
};

pub const THREADS_ENV: &str = "FAIRAUCTION_THREADS";

#[derive(Debug)]
pub enum CliError {
    Auction(AuctionError),
    Io(PathBuf, io::Error),
    /// An audited property failed.
    Violation(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Auction(
                AuctionError::Infeasible { .. } | AuctionError::NoSolution { .. } | AuctionError::ResampleNeeded { .. },
            ) => 3,
            Self::Auction(AuctionError::Diverged { .. }) => 5,
            Self::Violation(_) => 4,
            Self::Auction(_) | Self::Io(..) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Auction(e) => write!(f, "{e}"),
            Self::Io(p, e) => write!(f, "{}: {e}", p.display()),
            Self::Violation(msg) => write!(f, "property violation: {msg}"),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn config(msg: impl Into<String>) -> CliError {
    CliError::Auction(AuctionError::Config(msg.into()))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

/// Writes to `out`, or stdout when absent.
fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_file(p, text),
        None => io::stdout().write_all(text.as_bytes()).map_err(|e| CliError::Io("<stdout>".into(), e)),
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data");
    s.push('\n');
    s
}

fn load_bids(path: &Path) -> Result<BidProfile> {
    Ok(parse_bids(&read(path)?)?)
}

fn load_scores(path: &Path) -> Result<GroupScoreFunction> {
    Ok(GroupScoreFunction::from_json(&read(path)?)?)
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(|t| t.trim().parse::<T>().map_err(|_| config(format!("bad {what} '{t}'"))))
        .collect()
}

fn load_profile(p: &ProfileArgs) -> Result<BidProfile> {
    match (&p.bids_file, &p.profile_spec, &p.sizes) {
        (Some(path), _, _) => load_bids(path),
        (None, Some(spec), Some(sizes)) => {
            let specs: Vec<ValuationSpec> = spec.split(',').map(str::parse).collect::<std::result::Result<_, _>>()?;
            let sizes: Vec<usize> = parse_list(sizes, "group size")?;
            Ok(sample_valuations(&specs, &sizes, &mut rng_from_seed(p.profile_seed))?)
        }
        _ => Err(config("give --bids-file or --profile-spec with --sizes")),
    }
}

fn learner_config(a: &LearnerArgs, epsilon: f64, seed: u64) -> Result<LearnerConfig> {
    let cfg = LearnerConfig {
        learning_rate: a.learning_rate,
        dual_learning_rate: a.dual_learning_rate,
        episodes: a.episodes,
        epsilon,
        base: a.base,
        sgd_steps_per_episode: a.sgd_steps,
        hidden_width: a.hidden,
        train_panels: a.train_panels,
        initial_lambda: 0.0,
        seed,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Two-sided critical value `Φ⁻¹(1 − α/2)`.
pub fn z_for_alpha(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(config(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(Normal::standard().inverse_cdf(1.0 - alpha / 2.0))
}

fn require_epsilon(mechanism: Mechanism, epsilon: Option<f64>) -> Result<f64> {
    match epsilon {
        Some(e) => Ok(e),
        None if mechanism.uses_epsilon() => Err(config(format!("--epsilon is required for {mechanism}"))),
        None => Ok(0.0),
    }
}

#[derive(Serialize)]
struct RepeatSummary {
    mechanism: Mechanism,
    runs: usize,
    sales: usize,
    win_frequency: Vec<f64>,
    group_frequency: Vec<f64>,
    group_frequency_se: Vec<f64>,
    revenue_mean: f64,
    revenue_se: f64,
}

pub fn run_auction(a: RunAuctionArgs) -> Result<()> {
    let bids = load_bids(&a.bids_file)?;
    // Fixed scores already encode the fairness level.
    let epsilon = match (a.mechanism, &a.scores_file) {
        (Mechanism::Gsm, Some(_)) => a.epsilon.unwrap_or(0.0),
        _ => require_epsilon(a.mechanism, a.epsilon)?,
    };
    if a.repeat == 0 {
        return Err(config("--repeat must be at least 1"));
    }
    let quad = QuadratureSpec::default();
    let scores = a.scores_file.as_deref().map(load_scores).transpose()?;
    let learner = learner_config(&a.learner, epsilon, a.seed)?;

    let run_once = |r: usize| -> Result<Outcome> {
        let mut rng = derived_rng(a.seed, &[r as u64]);
        Ok(match a.mechanism {
            Mechanism::SecondPrice => second_price(&bids, TieBreak::LowestIndex)?,
            Mechanism::Simple => simple_mechanism_with_rng(&bids, &mut rng)?,
            Mechanism::Gpm => gpm_run(&bids, epsilon, &mut rng)?,
            Mechanism::Gsm => match &scores {
                Some(gsf) => gsm_run(&bids, gsf, &mut rng, &quad)?,
                None => gsm_run_trained(&bids, &learner, &mut rng, &quad)?.0,
            },
        })
    };

    if a.repeat == 1 {
        let outcome = run_once(0)?;
        let mut text = outcome_to_json(&outcome);
        text.push('\n');
        return emit(a.out.as_deref(), &text);
    }

    let mut wins = vec![0usize; bids.n()];
    let mut group_wins = vec![0usize; bids.m()];
    let mut revenue = MeanAccumulator::new();
    for r in 0..a.repeat {
        let o = run_once(r)?;
        if let Some(w) = o.winner() {
            wins[w] += 1;
            group_wins[bids.group_of(w)] += 1;
        }
        revenue.push(fair_auction::revenue(&o));
    }
    let runs = a.repeat as f64;
    let freq: Vec<f64> = group_wins.iter().map(|&c| c as f64 / runs).collect();
    let summary = RepeatSummary {
        mechanism: a.mechanism,
        runs: a.repeat,
        sales: wins.iter().sum(),
        win_frequency: wins.iter().map(|&w| w as f64 / runs).collect(),
        group_frequency_se: freq.iter().map(|p| (p * (1.0 - p) / (runs - 1.0)).sqrt()).collect(),
        group_frequency: freq,
        revenue_mean: revenue.mean(),
        revenue_se: revenue.stderr(),
    };
    emit(a.out.as_deref(), &to_json(&summary))
}

fn thread_count(flag: Option<usize>) -> Result<usize> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        return v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| config(format!("{THREADS_ENV} must be a positive integer, got '{v}'")));
    }
    match flag {
        Some(0) => Err(config("--threads must be at least 1")),
        Some(n) => Ok(n),
        None => Ok(std::thread::available_parallelism().map(usize::from).unwrap_or(1)),
    }
}

pub fn experiment(a: ExperimentArgs) -> Result<()> {
    let mut grid = ExperimentGrid::from_json(&read(&a.grid)?)?;
    if let Some(t) = a.trials {
        grid.trials = t;
    }
    if let Some(s) = a.seed {
        grid.master_seed = s;
    }
    let threads = thread_count(a.threads)?;
    let cells = grid.cells().len();
    eprintln!("running {cells} cells x {} trials on {threads} threads", grid.trials);
    let records = harness::run_grid(&grid, threads)?;
    for r in records.iter().filter(|r| r.error.is_some()) {
        eprintln!("cell {} ({}) failed: {}", r.cell.cell_id, r.cell.mechanism, r.error.as_deref().unwrap_or(""));
    }
    let infeasible: usize = records.iter().map(|r| r.infeasible).sum();
    if infeasible > 0 {
        eprintln!("{infeasible} infeasible trials recorded");
    }
    write_file(&a.out, &harness::csv_string(&records)?)?;
    if let Some(p) = &a.records_json {
        write_file(p, &to_json(&records))?;
    }
    Ok(())
}

pub fn train_scores(a: TrainScoresArgs) -> Result<()> {
    let bids = load_profile(&a.profile)?;
    let cfg = learner_config(&a.learner, a.epsilon, a.seed)?;
    let result = dual_ascent_train(&bids, &cfg)?;
    if let Some(path) = &a.curve {
        let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
        let mut f = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| CliError::Io(path.clone(), e))?;
        write_curve_csv(&mut f, &result.curve, fresh).map_err(|e| CliError::Io(path.clone(), e))?;
    }
    match result.first_fair_episode {
        Some(ep) => eprintln!("fair at episode {ep}; committed the last fair episode of {}", cfg.episodes),
        None => eprintln!("no fair episode in {}", cfg.episodes),
    }
    let gsf = result.into_solution()?;
    write_file(&a.out, &gsf.to_json())
}

/// Top and median bidder of every group.
fn default_buyers(bids: &BidProfile) -> Vec<usize> {
    let mut out = Vec::new();
    for k in 0..bids.m() {
        let mut members = bids.partition().members(k);
        members.sort_by(|&i, &j| bids.bid(j).total_cmp(&bids.bid(i)).then(i.cmp(&j)));
        out.push(members[0]);
        out.push(members[members.len() / 2]);
    }
    out.sort_unstable();
    out.dedup();
    out
}

fn deviation_grid(spec: Option<&str>, bids: &BidProfile) -> Result<Vec<f64>> {
    let s = bids.support();
    let range = |lo: f64, hi: f64, count: usize| -> Result<Vec<f64>> {
        if count < 2 || lo.partial_cmp(&hi).is_none_or(|o| o.is_gt()) {
            return Err(config("deviation grid needs LO <= HI and COUNT >= 2"));
        }
        Ok((0..count).map(|j| lo + (hi - lo) * j as f64 / (count - 1) as f64).collect())
    };
    let grid = match spec {
        None => range(s.lower(), s.upper(), 21)?,
        Some(text) if text.contains(':') => {
            let parts: Vec<&str> = text.split(':').collect();
            if parts.len() != 3 {
                return Err(config(format!("bad deviation grid '{text}'")));
            }
            let num = |t: &str| t.trim().parse::<f64>().map_err(|_| config(format!("bad deviation grid '{text}'")));
            let count = parts[2].trim().parse::<usize>().map_err(|_| config(format!("bad deviation grid '{text}'")))?;
            range(num(parts[0])?, num(parts[1])?, count)?
        }
        Some(text) => parse_list(text, "deviation")?,
    };
    if let Some(d) = grid.iter().find(|&&d| !s.contains(d)) {
        return Err(config(format!("deviation {d} outside the support")));
    }
    Ok(grid)
}

pub fn verify_ic(a: VerifyIcArgs) -> Result<()> {
    let bids = load_profile(&a.profile)?;
    let z = z_for_alpha(a.alpha)?;
    let scores = a.scores_file.as_deref().map(load_scores).transpose()?;
    if a.mechanism == Mechanism::Gsm && scores.is_none() {
        return Err(config("verify-ic for gsm needs --scores-file"));
    }
    let buyers = match &a.buyers {
        Some(list) => parse_list(list, "buyer index")?,
        None => default_buyers(&bids),
    };
    let cfg = IcAuditConfig {
        mechanism: a.mechanism,
        epsilon: a.epsilon,
        scores,
        trials: a.trials,
        seed: a.seed,
        z,
        buyers,
        deviations: deviation_grid(a.deviation_grid.as_deref(), &bids)?,
        quadrature: QuadratureSpec::default(),
    };
    let report = audit::verify_ic(&bids, &cfg)?;
    for b in &report.buyers {
        eprintln!(
            "buyer {:>4}: max gain {:+.6} (se {:.6}, CI [{:+.6}, {:+.6}]) at bid {}{}{}",
            b.buyer,
            b.max_gain,
            b.max_gain_se,
            b.ci_low,
            b.ci_high,
            b.max_gain_deviation,
            if b.ic_violation { "  IC VIOLATION" } else { "" },
            if b.ir_violation { "  IR VIOLATION" } else { "" },
        );
    }
    emit(a.out.as_deref(), &to_json(&report))?;
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Violation(format!(
            "{} exceeds z = {z:.3} standard errors for some buyer (max gain {:.6})",
            a.mechanism,
            report.max_gain()
        )))
    }
}

pub fn verify_fairness(a: VerifyFairnessArgs) -> Result<()> {
    let bids = load_profile(&a.profile)?;
    let z = z_for_alpha(a.alpha)?;
    let cfg = FairnessAuditConfig {
        mechanism: a.mechanism,
        epsilon: a.epsilon,
        scores: a.scores_file.as_deref().map(load_scores).transpose()?,
        learner: learner_config(&a.learner, a.epsilon, a.seed)?,
        reps: a.reps,
        seed: a.seed,
        z,
        quadrature: QuadratureSpec::default(),
    };
    let report = audit::verify_fairness(&bids, &cfg)?;
    eprintln!(
        "{}: gap {:.6} (se {:.6}) vs epsilon {} + {z:.3} se{}",
        a.mechanism,
        report.gap,
        report.gap_se,
        a.epsilon,
        if report.no_solution > 0 { format!(", {} repetitions without solution", report.no_solution) } else { String::new() }
    );
    emit(a.out.as_deref(), &to_json(&report))?;
    if report.passed {
        Ok(())
    } else {
        Err(CliError::Violation(format!("group gap {:.6} exceeds epsilon {}", report.gap, a.epsilon)))
    }
}
