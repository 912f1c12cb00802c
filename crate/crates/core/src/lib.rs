//! Decentralized multi-agent reinforcement learning in grid worlds.
//!
//! Each agent trains its own actor-critic pair from local experience and,
//! depending on its collaboration policy, periodically blends its network
//! weights with those of peers that pursue the same goal and are close
//! enough to be observed. No central learner exists; coordination is pure
//! peer-to-peer parameter exchange.

pub mod agent;
pub mod cli;
pub mod coordination;
pub mod grid;
pub mod metrics;
pub mod nn;
pub mod orchestrator;
