//! Deterministic simulator for budget-constrained cache placement on fog
//! storage nodes.
//!
//! A set of edge nodes each serves a fixed group of users from a limited
//! cache. Every time slot, a placement policy chooses which files to
//! cache, users issue one request each, and the node earns reward for
//! every request served from cache (weighted by file size) while paying
//! a storage cost for what it keeps. Storage cost must stay within a
//! long-run average budget per node.
//!
//! The main policy learns file demand with optimistic estimators (which
//! can be warm-started from historical observations), balances reward
//! against budget pressure through a virtual queue, and picks each slot's
//! placement with an exact knapsack over the scored files. Baselines
//! (a capacity-only bandit, LFU, LRU) and an exact stationary benchmark
//! used for regret accounting round out the toolkit.
//!
//! Everything is reproducible: all randomness flows from named ChaCha8
//! streams seeded in the config, and identical configs produce byte-
//! identical outputs on any platform.
//!
//! Entry points: [`config::SystemConfig`] to describe a system,
//! [`harness::run_simulation`] for one run, [`harness::sweep`] for
//! parameter grids, [`oracle::r_star`] for the benchmark alone.

pub mod config;
pub mod control;
pub mod demand;
pub mod harness;
pub mod learning;
pub mod oracle;
pub mod policies;
pub mod presets;
pub mod rng;
pub mod types;
pub mod verify;

pub use config::{SystemConfig, ValidConfig, Validated};
pub use harness::{run_simulation, sweep, RunOptions, RunRecord};
pub use types::{DemandMatrix, Placement, RequestEvent, SlotDemand, SlotOutcome};
