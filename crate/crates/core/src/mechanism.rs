//! Mechanism selector shared by the harness, the audits and the CLI.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::AuctionError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    #[serde(alias = "second-price")]
    SecondPrice,
    Simple,
    Gpm,
    Gsm,
}

impl Mechanism {
    pub const ALL: [Mechanism; 4] = [Self::SecondPrice, Self::Simple, Self::Gpm, Self::Gsm];

    pub fn name(self) -> &'static str {
        match self {
            Self::SecondPrice => "second_price",
            Self::Simple => "simple",
            Self::Gpm => "gpm",
            Self::Gsm => "gsm",
        }
    }

    /// Whether the outcome depends on `ε`.
    pub fn uses_epsilon(self) -> bool {
        matches!(self, Self::Gpm | Self::Gsm)
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mechanism {
    type Err = AuctionError;

    fn from_str(s: &str) -> Result<Self, AuctionError> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "second_price" | "vickrey" => Ok(Self::SecondPrice),
            "simple" => Ok(Self::Simple),
            "gpm" => Ok(Self::Gpm),
            "gsm" => Ok(Self::Gsm),
            other => Err(AuctionError::Config(format!("unknown mechanism '{other}'"))),
        }
    }
}
