//! Python module `fair_auction_py`.
//!
//! Bid profiles, outcomes and score functions are wrapped as classes; the
//! mechanisms are plain functions taking an explicit `seed`. Long-running
//! calls release the GIL.

use fair_auction::baselines::{self, TieBreak};
use fair_auction::gsm::{BaseTransform, GroupScoreFunction, ScoreParams, SplitMode};
use fair_auction::harness::{self, ExperimentGrid, TrialMetrics};
use fair_auction::learning::{dual_ascent_train, LearnerConfig};
use fair_auction::rng::rng_from_seed;
use fair_auction::{gpm, gsm, io, AuctionError, QuadratureSpec, ValuationSupport};
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(fair_auction_py, AuctionException, PyValueError, "Any auction error.");
create_exception!(fair_auction_py, InfeasibleError, AuctionException, "Group-probability program infeasible.");
create_exception!(fair_auction_py, NoSolutionError, AuctionException, "Training found no fair score function.");
create_exception!(fair_auction_py, DivergedError, AuctionException, "Training diverged.");
create_exception!(fair_auction_py, ResampleNeededError, AuctionException, "A statistics-side group stayed empty.");

fn to_py(e: AuctionError) -> PyErr {
    let msg = e.to_string();
    match e {
        AuctionError::Infeasible { .. } => InfeasibleError::new_err(msg),
        AuctionError::NoSolution { .. } => NoSolutionError::new_err(msg),
        AuctionError::Diverged { .. } => DivergedError::new_err(msg),
        AuctionError::ResampleNeeded { .. } => ResampleNeededError::new_err(msg),
        _ => AuctionException::new_err(msg),
    }
}

trait IntoPy<T> {
    fn py_err(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for fair_auction::Result<T> {
    fn py_err(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

fn support(bounds: (f64, f64)) -> PyResult<ValuationSupport> {
    ValuationSupport::new(bounds.0, bounds.1).py_err()
}

/// Bids partitioned into groups over a valuation support.
#[pyclass(name = "BidProfile", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyBidProfile(fair_auction::BidProfile);

#[pymethods]
impl PyBidProfile {
    #[new]
    #[pyo3(signature = (groups, support=(0.0, 10.0)))]
    fn new(groups: Vec<Vec<f64>>, support: (f64, f64)) -> PyResult<Self> {
        let s = self::support(support)?;
        fair_auction::BidProfile::from_groups(&groups, s).py_err().map(Self)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        io::parse_bids(text).py_err().map(Self)
    }

    fn to_json(&self) -> String {
        io::bids_to_json(&self.0)
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    #[getter]
    fn m(&self) -> usize {
        self.0.m()
    }

    #[getter]
    fn bids(&self) -> Vec<f64> {
        self.0.bids().to_vec()
    }

    #[getter]
    fn groups(&self) -> Vec<Vec<f64>> {
        self.0.groups()
    }

    /// Group index of every buyer.
    #[getter]
    fn group_of(&self) -> Vec<usize> {
        self.0.partition().assignments().to_vec()
    }

    #[getter]
    fn support(&self) -> (f64, f64) {
        let s = self.0.support();
        (s.lower(), s.upper())
    }

    fn with_bid(&self, buyer: usize, bid: f64) -> PyResult<Self> {
        self.0.with_bid(buyer, bid).py_err().map(Self)
    }

    fn __len__(&self) -> usize {
        self.0.n()
    }

    fn __repr__(&self) -> String {
        format!("BidProfile(groups={:?}, support={:?})", self.0.groups(), self.support())
    }
}

/// A realized outcome: at most one winner and per-buyer payments.
#[pyclass(name = "Outcome", frozen)]
pub struct PyOutcome(fair_auction::Outcome);

#[pymethods]
impl PyOutcome {
    #[getter]
    fn winner(&self) -> Option<usize> {
        self.0.winner()
    }

    #[getter]
    fn price(&self) -> Option<f64> {
        self.0.price()
    }

    #[getter]
    fn allocation(&self) -> Vec<u8> {
        self.0.allocation().to_vec()
    }

    #[getter]
    fn payments(&self) -> Vec<f64> {
        self.0.payments().to_vec()
    }

    #[getter]
    fn revenue(&self) -> f64 {
        fair_auction::revenue(&self.0)
    }

    fn to_json(&self) -> String {
        io::outcome_to_json(&self.0)
    }

    fn __repr__(&self) -> String {
        format!("Outcome(winner={:?}, price={:?})", self.0.winner(), self.0.price())
    }
}

/// Win probabilities and expected payments.
#[pyclass(name = "ExpectedOutcome", frozen)]
pub struct PyExpectedOutcome(fair_auction::ExpectedOutcome);

#[pymethods]
impl PyExpectedOutcome {
    #[getter]
    fn win_prob(&self) -> Vec<f64> {
        self.0.win_prob().to_vec()
    }

    #[getter]
    fn exp_payment(&self) -> Vec<f64> {
        self.0.exp_payment().to_vec()
    }

    #[getter]
    fn revenue(&self) -> f64 {
        self.0.revenue()
    }

    fn social_welfare(&self, valuations: Vec<f64>) -> PyResult<f64> {
        self.0.social_welfare(&valuations).py_err()
    }

    fn utilities(&self, valuations: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0.utilities(&valuations).py_err()
    }

    fn __repr__(&self) -> String {
        format!("ExpectedOutcome(win_prob={:?})", self.0.win_prob())
    }
}

/// Per-group scores `a (b f(x) + c) + d`.
#[pyclass(name = "GroupScoreFunction", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyGroupScoreFunction(GroupScoreFunction);

#[pymethods]
impl PyGroupScoreFunction {
    /// `params` holds one `(a, b, c, d)` tuple per group.
    #[new]
    #[pyo3(signature = (params, base="linear", support=(0.0, 10.0)))]
    fn new(params: Vec<(f64, f64, f64, f64)>, base: &str, support: (f64, f64)) -> PyResult<Self> {
        let base: BaseTransform = base.parse().py_err()?;
        let params = params
            .into_iter()
            .map(|(a, b, c, d)| ScoreParams::new(a, b, c, d))
            .collect::<fair_auction::Result<Vec<_>>>()
            .py_err()?;
        GroupScoreFunction::new(params, base, self::support(support)?).py_err().map(Self)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        GroupScoreFunction::from_json(text).py_err().map(Self)
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    #[getter]
    fn m(&self) -> usize {
        self.0.m()
    }

    #[getter]
    fn base(&self) -> &'static str {
        self.0.base().name()
    }

    #[getter]
    fn params(&self) -> Vec<(f64, f64, f64, f64)> {
        self.0.params().iter().map(|p| (p.a, p.b, p.c, p.d)).collect()
    }

    fn score(&self, group: usize, bid: f64) -> PyResult<f64> {
        gsm::score(&self.0, group, bid).py_err()
    }

    fn __repr__(&self) -> String {
        format!("GroupScoreFunction(base={}, params={:?})", self.base(), self.params())
    }
}

#[pyfunction]
fn second_price(bids: &PyBidProfile) -> PyResult<PyOutcome> {
    baselines::second_price(&bids.0, TieBreak::LowestIndex).py_err().map(PyOutcome)
}

#[pyfunction]
fn second_price_expected(bids: &PyBidProfile) -> PyResult<PyExpectedOutcome> {
    baselines::second_price_expected(&bids.0).py_err().map(PyExpectedOutcome)
}

/// Group lottery with probabilities proportional to `1 / top bid`.
#[pyfunction]
fn simple_group_probs(bids: &PyBidProfile) -> PyResult<Vec<f64>> {
    baselines::simple_group_probs(&bids.0).py_err()
}

#[pyfunction]
#[pyo3(signature = (bids, seed=0))]
fn simple_mechanism(bids: &PyBidProfile, seed: u64) -> PyResult<PyOutcome> {
    baselines::simple_mechanism_with_rng(&bids.0, &mut rng_from_seed(seed)).py_err().map(PyOutcome)
}

#[pyfunction]
fn simple_expected(bids: &PyBidProfile) -> PyResult<PyExpectedOutcome> {
    baselines::simple_expected(&bids.0).py_err().map(PyExpectedOutcome)
}

/// Group probabilities fitted on the whole profile.
#[pyfunction]
fn gpm_group_probabilities(bids: &PyBidProfile, epsilon: f64) -> PyResult<Vec<f64>> {
    gpm::solve_group_probabilities(&bids.0, epsilon).py_err().map(|g| g.probs)
}

#[pyfunction]
#[pyo3(signature = (bids, epsilon, seed=0))]
fn gpm_run(bids: &PyBidProfile, epsilon: f64, seed: u64) -> PyResult<PyOutcome> {
    gpm::gpm_run(&bids.0, epsilon, &mut rng_from_seed(seed)).py_err().map(PyOutcome)
}

#[pyfunction]
#[pyo3(signature = (bids, epsilon, trials=1000, seed=0))]
fn gpm_expected(py: Python<'_>, bids: &PyBidProfile, epsilon: f64, trials: usize, seed: u64) -> PyResult<PyExpectedOutcome> {
    let bids = &bids.0;
    py.detach(|| gpm::gpm_expected(bids, epsilon, trials, seed)).py_err().map(PyExpectedOutcome)
}

#[pyfunction]
#[pyo3(signature = (bids, scores, seed=0))]
fn gsm_run(bids: &PyBidProfile, scores: &PyGroupScoreFunction, seed: u64) -> PyResult<PyOutcome> {
    gsm::gsm_run(&bids.0, &scores.0, &mut rng_from_seed(seed), &QuadratureSpec::default())
        .py_err()
        .map(PyOutcome)
}

/// Expected GSM outcome. `split` is `"all_auction"`, `"enumerate"` (all
/// `2^n` splits) or `"sample"` (`samples` splits from `seed`).
#[pyfunction]
#[pyo3(signature = (bids, scores, split="all_auction", samples=200, seed=0))]
fn gsm_expected(
    py: Python<'_>,
    bids: &PyBidProfile,
    scores: &PyGroupScoreFunction,
    split: &str,
    samples: usize,
    seed: u64,
) -> PyResult<PyExpectedOutcome> {
    let mode = match split {
        "all_auction" => SplitMode::AllAuction,
        "enumerate" => SplitMode::Enumerate,
        "sample" => SplitMode::Sample { samples, seed },
        other => return Err(AuctionException::new_err(format!("unknown split mode '{other}'"))),
    };
    let (bids, gsf) = (&bids.0, &scores.0);
    py.detach(|| gsm::gsm_expected(bids, gsf, mode, &QuadratureSpec::default()))
        .py_err()
        .map(PyExpectedOutcome)
}

/// `(episode, psi, g, lambda, fair)`.
type CurveRow = (usize, f64, f64, f64, bool);

/// Trains score functions by dual ascent on `bids`.
///
/// Returns `(scores, curve)` where `curve` lists
/// `(episode, psi, g, lambda, fair)` tuples. Raises `NoSolutionError` when
/// no episode was fair.
#[pyfunction]
#[pyo3(signature = (
    bids, epsilon, *, base="linear", episodes=2000, steps=50, learning_rate=1e-3,
    dual_learning_rate=None, hidden=32, train_panels=32, seed=0
))]
#[allow(clippy::too_many_arguments)]
fn train_scores(
    py: Python<'_>,
    bids: &PyBidProfile,
    epsilon: f64,
    base: &str,
    episodes: usize,
    steps: usize,
    learning_rate: f64,
    dual_learning_rate: Option<f64>,
    hidden: usize,
    train_panels: usize,
    seed: u64,
) -> PyResult<(PyGroupScoreFunction, Vec<CurveRow>)> {
    let cfg = LearnerConfig {
        learning_rate,
        dual_learning_rate,
        episodes,
        epsilon,
        base: base.parse().py_err()?,
        sgd_steps_per_episode: steps,
        hidden_width: hidden,
        train_panels,
        initial_lambda: 0.0,
        seed,
    };
    let bids = &bids.0;
    let result = py.detach(|| dual_ascent_train(bids, &cfg)).py_err()?;
    let curve = result.curve.iter().map(|p| (p.episode, p.psi, p.g, p.lambda, p.fair)).collect();
    Ok((PyGroupScoreFunction(result.into_solution().py_err()?), curve))
}

/// Social welfare, revenue, group gap, individual fairness and per-group
/// welfare of `expected`, taking bids as true values.
#[pyfunction]
fn metrics<'py>(py: Python<'py>, expected: &PyExpectedOutcome, bids: &PyBidProfile) -> PyResult<Bound<'py, PyDict>> {
    let m = TrialMetrics::of(&expected.0, &bids.0).py_err()?;
    let gw = fair_auction::group_welfares(&expected.0, bids.0.bids(), bids.0.partition()).py_err()?;
    let d = PyDict::new(py);
    d.set_item("social_welfare", m.social_welfare)?;
    d.set_item("revenue", m.revenue)?;
    d.set_item("group_gap", m.group_gap)?;
    d.set_item("individual_fairness", m.individual_fairness)?;
    d.set_item("group_welfares", gw)?;
    Ok(d)
}

/// Runs an experiment grid given as JSON and returns the results CSV.
#[pyfunction]
#[pyo3(signature = (grid_json, threads=1))]
fn run_grid(py: Python<'_>, grid_json: &str, threads: usize) -> PyResult<String> {
    let grid = ExperimentGrid::from_json(grid_json).py_err()?;
    py.detach(|| harness::run_grid(&grid, threads).and_then(|r| harness::csv_string(&r))).py_err()
}

#[pymodule]
fn fair_auction_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("AuctionException", py.get_type::<AuctionException>())?;
    m.add("InfeasibleError", py.get_type::<InfeasibleError>())?;
    m.add("NoSolutionError", py.get_type::<NoSolutionError>())?;
    m.add("DivergedError", py.get_type::<DivergedError>())?;
    m.add("ResampleNeededError", py.get_type::<ResampleNeededError>())?;
    m.add_class::<PyBidProfile>()?;
    m.add_class::<PyOutcome>()?;
    m.add_class::<PyExpectedOutcome>()?;
    m.add_class::<PyGroupScoreFunction>()?;
    m.add_function(wrap_pyfunction!(second_price, m)?)?;
    m.add_function(wrap_pyfunction!(second_price_expected, m)?)?;
    m.add_function(wrap_pyfunction!(simple_group_probs, m)?)?;
    m.add_function(wrap_pyfunction!(simple_mechanism, m)?)?;
    m.add_function(wrap_pyfunction!(simple_expected, m)?)?;
    m.add_function(wrap_pyfunction!(gpm_group_probabilities, m)?)?;
    m.add_function(wrap_pyfunction!(gpm_run, m)?)?;
    m.add_function(wrap_pyfunction!(gpm_expected, m)?)?;
    m.add_function(wrap_pyfunction!(gsm_run, m)?)?;
    m.add_function(wrap_pyfunction!(gsm_expected, m)?)?;
    m.add_function(wrap_pyfunction!(train_scores, m)?)?;
    m.add_function(wrap_pyfunction!(metrics, m)?)?;
    m.add_function(wrap_pyfunction!(run_grid, m)?)?;
    Ok(())
}
