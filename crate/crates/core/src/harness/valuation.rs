//! Valuation distributions.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{AuctionError, Result};
use crate::model::{BidProfile, ValuationSupport};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ValuationKind {
    Uniform { lo: f64, hi: f64 },
    Normal { mean: f64, sd: f64 },
}

/// A distribution plus the support its draws are clamped into. Normal
/// draws are clamped to `[max(0, mean − 6sd), mean + 6sd]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ValuationSpec {
    kind: ValuationKind,
    clamp: ValuationSupport,
}

impl ValuationSpec {
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(AuctionError::Config(format!("uniform needs lo < hi, got ({lo}, {hi})")));
        }
        let clamp = ValuationSupport::new(lo, hi).map_err(|e| AuctionError::Config(e.to_string()))?;
        Ok(Self { kind: ValuationKind::Uniform { lo, hi }, clamp })
    }

    pub fn normal(mean: f64, sd: f64) -> Result<Self> {
        if !(mean.is_finite() && sd.is_finite() && sd > 0.0) {
            return Err(AuctionError::Config(format!("normal needs a finite mean and sd > 0, got ({mean}, {sd})")));
        }
        let clamp = ValuationSupport::new((mean - 6.0 * sd).max(0.0), mean + 6.0 * sd)
            .map_err(|e| AuctionError::Config(e.to_string()))?;
        Ok(Self { kind: ValuationKind::Normal { mean, sd }, clamp })
    }

    pub fn kind(&self) -> ValuationKind {
        self.kind
    }

    pub fn clamp(&self) -> ValuationSupport {
        self.clamp
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let x = match self.kind {
            ValuationKind::Uniform { lo, hi } => rng.random_range(lo..=hi),
            ValuationKind::Normal { mean, sd } => Normal::new(mean, sd).expect("validated").sample(rng),
        };
        x.clamp(self.clamp.lower(), self.clamp.upper())
    }
}

impl fmt::Display for ValuationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ValuationKind::Uniform { lo, hi } => write!(f, "uniform:{lo}:{hi}"),
            ValuationKind::Normal { mean, sd } => write!(f, "normal:{mean}:{sd}"),
        }
    }
}

impl FromStr for ValuationSpec {
    type Err = AuctionError;

    /// `uniform:LO:HI` or `normal:MEAN:SD`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| AuctionError::Config(format!("bad number '{t}' in distribution '{s}'")))
        };
        match parts.as_slice() {
            [kind, a, b] if kind.eq_ignore_ascii_case("uniform") || kind.eq_ignore_ascii_case("u") => {
                Self::uniform(num(a)?, num(b)?)
            }
            [kind, a, b] if kind.eq_ignore_ascii_case("normal") || kind.eq_ignore_ascii_case("n") => {
                Self::normal(num(a)?, num(b)?)
            }
            _ => Err(AuctionError::Config(format!(
                "distribution '{s}' is not uniform:LO:HI or normal:MEAN:SD"
            ))),
        }
    }
}

impl TryFrom<String> for ValuationSpec {
    type Error = AuctionError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ValuationSpec> for String {
    fn from(v: ValuationSpec) -> String {
        v.to_string()
    }
}

/// Group `k` gets `sizes[k]` draws from `specs[k]`; the profile's support is
/// the hull of the clamps.
pub fn sample_valuations<R: Rng + ?Sized>(specs: &[ValuationSpec], sizes: &[usize], rng: &mut R) -> Result<BidProfile> {
    if specs.len() != sizes.len() || specs.is_empty() {
        return Err(AuctionError::Config("need one distribution per group".into()));
    }
    if sizes.contains(&0) {
        return Err(AuctionError::Config("group sizes must be at least 1".into()));
    }
    let support = specs.iter().skip(1).fold(specs[0].clamp, |acc, s| acc.hull(&s.clamp));
    let groups: Vec<Vec<f64>> = specs
        .iter()
        .zip(sizes)
        .map(|(spec, &n)| (0..n).map(|_| spec.sample(rng)).collect())
        .collect();
    BidProfile::from_groups(&groups, support)
}
