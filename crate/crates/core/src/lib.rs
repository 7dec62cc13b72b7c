//! Monte Carlo simulation of multihop routing in finite ad hoc networks.
//!
//! Link reliability comes from a closed-form conditional outage probability
//! for Nakagami-faded links under shadowing, noise and random interference
//! ([`outage`]). The simulator places mobiles with exclusion zones
//! ([`topology`]), builds the per-topology channel ([`channel`]), turns
//! outage probabilities into per-trial candidate links and routes over them
//! with least-delay, nearest-neighbor and maximum-progress routing
//! ([`routing`]), and aggregates reliability, delay, hop count and area
//! spectral efficiency ([`metrics`]) through a seeded three-level driver
//! ([`engine`]). [`config`] and [`sweep`] provide the experiment files used by
//! the command-line tool.

pub mod channel;
pub mod config;
pub mod engine;
pub mod error;
pub mod metrics;
pub mod outage;
pub mod routing;
pub mod sweep;
pub mod topology;

pub use error::{Result, SimError};
