//! Group score functions `σ_k(x) = a_k (b_k f(x) + c_k) + d_k`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{AuctionError, Result};
use crate::fmt::json_number;
use crate::model::ValuationSupport;

/// Monotone base transform `f` shared by every group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseTransform {
    Linear,
    Log1p,
    Square,
    /// `e^{x − upper}`: the exponential divided by `e^{upper}` so values stay
    /// in `(0, 1]`. The constant factor is absorbed by `b_k`.
    Exp,
}

impl BaseTransform {
    pub const ALL: [BaseTransform; 4] = [Self::Linear, Self::Log1p, Self::Square, Self::Exp];

    pub fn apply(self, x: f64, support: ValuationSupport) -> f64 {
        match self {
            Self::Linear => x,
            Self::Log1p => x.ln_1p(),
            Self::Square => x * x,
            Self::Exp => (x - support.upper()).exp(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Linear => "linear",
            Self::Log1p => "log1p",
            Self::Square => "square",
            Self::Exp => "exp",
        }
    }
}

impl fmt::Display for BaseTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaseTransform {
    type Err = AuctionError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(Self::Linear),
            "log" | "log1p" => Ok(Self::Log1p),
            "square" => Ok(Self::Square),
            "exp" => Ok(Self::Exp),
            other => Err(AuctionError::Config(format!("unknown base transform '{other}'"))),
        }
    }
}

/// Nonnegative parameters of one group's score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl ScoreParams {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let p = Self { a, b, c, d };
        p.validate()?;
        Ok(p)
    }

    pub fn constant(d: f64) -> Self {
        Self { a: 0.0, b: 0.0, c: 0.0, d }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("a", self.a), ("b", self.b), ("c", self.c), ("d", self.d)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(AuctionError::Contract(format!(
                    "score parameter {name} = {v} must be finite and nonnegative"
                )));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn eval(&self, fx: f64) -> f64 {
        self.a * (self.b * fx + self.c) + self.d
    }
}

/// Score functions of all groups over a common base transform and support.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupScoreFunction {
    params: Vec<ScoreParams>,
    base: BaseTransform,
    support: ValuationSupport,
}

impl GroupScoreFunction {
    pub fn new(params: Vec<ScoreParams>, base: BaseTransform, support: ValuationSupport) -> Result<Self> {
        if params.is_empty() {
            return Err(AuctionError::Contract("score function needs at least one group".into()));
        }
        for p in &params {
            p.validate()?;
        }
        Ok(Self { params, base, support })
    }

    /// Same score for every group.
    pub fn uniform(m: usize, params: ScoreParams, base: BaseTransform, support: ValuationSupport) -> Result<Self> {
        Self::new(vec![params; m], base, support)
    }

    pub fn m(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[ScoreParams] {
        &self.params
    }

    pub fn base(&self) -> BaseTransform {
        self.base
    }

    pub fn support(&self) -> ValuationSupport {
        self.support
    }

    /// `σ_group(bid)` without the support check.
    #[inline]
    pub fn eval(&self, group: usize, bid: f64) -> f64 {
        self.params[group].eval(self.base.apply(bid, self.support))
    }

    /// Serializes to the score-file format: groups keyed `"1"..="m"`, fixed
    /// field order, reals with 17 significant digits.
    pub fn to_json(&self) -> String {
        let num = |x: f64| json_number(x, 17);
        let mut out = String::from("{\n  \"groups\": {\n");
        for (k, p) in self.params.iter().enumerate() {
            out.push_str(&format!(
                "    \"{}\": {{\"a\": {}, \"b\": {}, \"c\": {}, \"d\": {}}}{}\n",
                k + 1,
                num(p.a),
                num(p.b),
                num(p.c),
                num(p.d),
                if k + 1 < self.params.len() { "," } else { "" }
            ));
        }
        out.push_str(&format!(
            "  }},\n  \"base\": \"{}\",\n  \"support\": [{}, {}]\n}}\n",
            self.base,
            num(self.support.lower()),
            num(self.support.upper())
        ));
        out
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct ScoreFile {
            groups: BTreeMap<String, ScoreParams>,
            base: BaseTransform,
            support: [f64; 2],
        }
        let file: ScoreFile =
            serde_json::from_str(text).map_err(|e| AuctionError::Config(format!("score file: {e}")))?;
        let m = file.groups.len();
        let mut params = vec![None; m];
        for (key, p) in file.groups {
            let idx: usize = key
                .parse()
                .map_err(|_| AuctionError::Config(format!("score file: group key '{key}' is not an integer")))?;
            if idx == 0 || idx > m || params[idx - 1].is_some() {
                return Err(AuctionError::Config(format!(
                    "score file: group keys must be exactly 1..={m}, found '{key}'"
                )));
            }
            params[idx - 1] = Some(p);
        }
        let support = ValuationSupport::new(file.support[0], file.support[1])?;
        Self::new(params.into_iter().map(Option::unwrap).collect(), file.base, support)
    }
}

/// `σ_group(bid)`, rejecting bids outside the support.
pub fn score(gsf: &GroupScoreFunction, group: usize, bid: f64) -> Result<f64> {
    if group >= gsf.m() {
        return Err(AuctionError::Contract(format!("group {group} out of range")));
    }
    if !gsf.support().contains(bid) {
        return Err(AuctionError::Contract(format!("bid {bid} outside support")));
    }
    Ok(gsf.eval(group, bid))
}
