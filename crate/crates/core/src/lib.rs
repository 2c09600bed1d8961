//! Exact stability auditing for randomized two-sided matching mechanisms.
//!
//! Given a market, a common prior over preference profiles and a mechanism,
//! the crate decides whether some coalition can agree on a deviating
//! mechanism that every member prefers in the sense of first-order stochastic
//! dominance over partner ranks, under three information regimes:
//!
//! * **ex post**: after the profile is realized (the classical notion),
//! * **interim**: each agent knows its own ranking,
//! * **ex ante**: before anyone learns anything.
//!
//! All arithmetic is exact. Every negative answer comes with a witness that
//! an independent checker re-verifies from scratch.

pub mod cases;
pub mod error;
pub mod lp;
pub mod market;
pub mod mechanism;
pub mod prior;
pub mod rational;
pub mod stability;

pub use error::{Error, Result};
pub use market::{AgentId, Market, Matching, PreferenceProfile, Ranking, Side};
pub use mechanism::{Mechanism, RandomMatching, RankDistribution};
pub use prior::{Event, Prior};
pub use rational::{q, Rational};
