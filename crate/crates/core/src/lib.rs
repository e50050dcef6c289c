//! Group-fair single-item auctions.
//!
//! Mechanisms: second price and the simple group lottery ([`baselines`]),
//! the group probability mechanism ([`gpm`]) and the group score mechanism
//! ([`gsm`]) whose score functions are learned by dual ascent
//! ([`learning`]). The [`harness`] runs seeded experiment grids and
//! [`audit`] checks incentive compatibility and group fairness
//! statistically.
//!
//! Every randomized entry point takes an explicit seed or RNG; results do
//! not depend on the number of threads.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audit;
pub mod baselines;
pub mod error;
pub mod fmt;
pub mod gpm;
pub mod gsm;
pub mod harness;
pub mod io;
pub mod learning;
pub mod mechanism;
pub mod model;
pub mod quadrature;
pub mod rng;
pub mod split;
pub mod stats;

pub use error::{AuctionError, Result};
pub use mechanism::Mechanism;
pub use model::{
    group_fairness_gap, group_welfares, individual_fairness, revenue, social_welfare, BidProfile,
    ExpectedOutcome, GroupPartition, Outcome, ValuationSupport,
};
pub use quadrature::{QuadratureRule, QuadratureSpec};
