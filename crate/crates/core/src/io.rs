//! Bid files and outcome documents.
//!
//! Bids: `{"support": [lo, hi], "groups": [[bids...], ...]}`, buyers numbered
//! group by group. Outcomes: `{"winner", "price", "allocation", "payments"}`
//! with `null` winner and price on no sale.

use serde::{Deserialize, Serialize};

use crate::error::{AuctionError, Result};
use crate::model::{BidProfile, Outcome, ValuationSupport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BidsFile {
    pub support: [f64; 2],
    pub groups: Vec<Vec<f64>>,
}

impl BidsFile {
    pub fn from_profile(bids: &BidProfile) -> Self {
        Self { support: [bids.support().lower(), bids.support().upper()], groups: bids.groups() }
    }

    pub fn into_profile(self) -> Result<BidProfile> {
        let support = ValuationSupport::new(self.support[0], self.support[1])?;
        BidProfile::from_groups(&self.groups, support)
    }
}

pub fn parse_bids(text: &str) -> Result<BidProfile> {
    let file: BidsFile = serde_json::from_str(text).map_err(|e| AuctionError::Config(format!("bids file: {e}")))?;
    file.into_profile().map_err(|e| AuctionError::Config(format!("bids file: {e}")))
}

pub fn bids_to_json(bids: &BidProfile) -> String {
    serde_json::to_string_pretty(&BidsFile::from_profile(bids)).expect("plain data")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeDoc {
    pub winner: Option<usize>,
    pub price: Option<f64>,
    pub allocation: Vec<u8>,
    pub payments: Vec<f64>,
}

impl From<&Outcome> for OutcomeDoc {
    fn from(o: &Outcome) -> Self {
        Self { winner: o.winner(), price: o.price(), allocation: o.allocation().to_vec(), payments: o.payments().to_vec() }
    }
}

impl OutcomeDoc {
    pub fn into_outcome(self) -> Result<Outcome> {
        Outcome::from_vectors(self.allocation, self.payments)
    }
}

pub fn outcome_to_json(outcome: &Outcome) -> String {
    serde_json::to_string_pretty(&OutcomeDoc::from(outcome)).expect("plain data")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bids_round_trip() {
        let text = r#"{"support": [0, 10], "groups": [[9, 8, 7], [7, 3, 2]]}"#;
        let b = parse_bids(text).unwrap();
        assert_eq!((b.n(), b.m(), b.bid(3), b.group_of(3)), (6, 2, 7.0, 1));
        assert_eq!(parse_bids(&bids_to_json(&b)).unwrap(), b);
    }

    #[test]
    fn bad_bids_are_config_errors() {
        for text in [
            r#"{"support": [0, 10], "groups": [[11]]}"#,
            r#"{"support": [0, 10], "groups": [[1], []]}"#,
            r#"{"support": [0, 10], "groups": [[1]], "extra": 1}"#,
            r#"not json"#,
        ] {
            assert!(matches!(parse_bids(text), Err(AuctionError::Config(_))), "{text}");
        }
    }

    #[test]
    fn outcome_document() {
        let o = Outcome::sold(3, 1, 8.0);
        let doc: serde_json::Value = serde_json::from_str(&outcome_to_json(&o)).unwrap();
        assert_eq!(doc["winner"], 1);
        assert_eq!(doc["price"], 8.0);
        assert_eq!(doc["allocation"], serde_json::json!([0, 1, 0]));
        let none: serde_json::Value = serde_json::from_str(&outcome_to_json(&Outcome::no_sale(2))).unwrap();
        assert!(none["winner"].is_null() && none["price"].is_null());
        let back: OutcomeDoc = serde_json::from_str(&outcome_to_json(&o)).unwrap();
        assert_eq!(back.into_outcome().unwrap(), o);
    }
}
