//! Inter-agent coordination: the five agent types, goal-aware peer discovery
//! within an observation range, and dampened weight merging.
//!
//! Every timestep, before anyone moves, each live collaborative agent looks
//! for peers, and — if it finds any — pulls its four parameter vectors toward
//! the peer average: `theta <- (1 - alpha) * theta + alpha * mean(peers)`.
//! All merges in a round read from a snapshot taken before any agent writes,
//! so the result does not depend on iteration order.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::agent::ActorCritic;
use crate::grid::{in_observation_range, Position};
use crate::nn::ParamVector;

/// The agent-type matrix: collaboration level crossed with observation range.
///
/// | type | peers        | range      |
/// |------|--------------|------------|
/// | A1   | none         | —          |
/// | A2   | any goal     | everywhere |
/// | A3   | any goal     | limited    |
/// | A4   | same goal    | everywhere |
/// | A5   | same goal    | limited    |
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum AgentType {
    A1,
    A2,
    A3,
    A4,
    A5,
}

impl AgentType {
    pub const ALL: [AgentType; 5] = [
        AgentType::A1,
        AgentType::A2,
        AgentType::A3,
        AgentType::A4,
        AgentType::A5,
    ];

    /// Expands the type tag into its behavioral spec. `radius` is the
    /// observation range used by the range-limited types (A3, A5) and
    /// ignored by the rest.
    pub fn spec(self, radius: u32) -> AgentTypeSpec {
        let limited = |goal_aware: bool| {
            assert!(radius >= 1, "observation radius must be at least 1");
            AgentTypeSpec::Collaborative {
                goal_aware,
                range: RangePolicy::Limited { radius },
            }
        };
        match self {
            AgentType::A1 => AgentTypeSpec::NonCollaborative,
            AgentType::A2 => AgentTypeSpec::Collaborative {
                goal_aware: false,
                range: RangePolicy::Unrestricted,
            },
            AgentType::A3 => limited(false),
            AgentType::A4 => AgentTypeSpec::Collaborative {
                goal_aware: true,
                range: RangePolicy::Unrestricted,
            },
            AgentType::A5 => limited(true),
        }
    }
}

impl fmt::Display for AgentType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AgentType::A1 => "A1",
            AgentType::A2 => "A2",
            AgentType::A3 => "A3",
            AgentType::A4 => "A4",
            AgentType::A5 => "A5",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
#[error("unknown agent type {0:?} (expected A1..A5)")]
pub struct ParseAgentTypeError(String);

impl FromStr for AgentType {
    type Err = ParseAgentTypeError;

    fn from_str(s: &str) -> Result<AgentType, ParseAgentTypeError> {
        match s.to_ascii_uppercase().as_str() {
            "A1" => Ok(AgentType::A1),
            "A2" => Ok(AgentType::A2),
            "A3" => Ok(AgentType::A3),
            "A4" => Ok(AgentType::A4),
            "A5" => Ok(AgentType::A5),
            _ => Err(ParseAgentTypeError(s.to_string())),
        }
    }
}

/// Spatial filter on peer candidates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RangePolicy {
    /// Peers anywhere on the map qualify.
    Unrestricted,
    /// Peers must lie within Chebyshev distance `radius`.
    Limited { radius: u32 },
}

/// Behavioral description of an agent type. A non-collaborative agent has no
/// range at all, mirroring the "N/A" entries of the type matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AgentTypeSpec {
    NonCollaborative,
    Collaborative { goal_aware: bool, range: RangePolicy },
}

/// What one agent can see of another: where it is, which goal it serves,
/// and whether it already finished.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PeerView {
    pub position: Position,
    pub goal_id: usize,
    pub terminated: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CoordinationConfig {
    /// Dampening factor: the weight given to the peer average.
    pub alpha: f64,
}

impl Default for CoordinationConfig {
    fn default() -> Self {
        CoordinationConfig { alpha: 0.1 }
    }
}

impl CoordinationConfig {
    pub fn validate(&self) -> Result<(), CoordinationError> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(CoordinationError::BadAlpha(self.alpha));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum CoordinationError {
    #[error("alpha = {0} outside [0, 1]")]
    BadAlpha(f64),
    #[error("parameter vectors disagree in length: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("merge_weights needs at least one peer")]
    NoPeers,
}

/// Returns the ids of every other agent that qualifies as a peer of
/// `subject` under `spec`, in ascending id order. Terminated agents remain
/// eligible as peers — only *initiating* coordination is gated on being
/// alive, which is the caller's check.
pub fn discover_peers(subject: usize, views: &[PeerView], spec: &AgentTypeSpec) -> Vec<usize> {
    let (goal_aware, range) = match spec {
        AgentTypeSpec::NonCollaborative => return Vec::new(),
        AgentTypeSpec::Collaborative { goal_aware, range } => (*goal_aware, *range),
    };
    let me = &views[subject];
    views
        .iter()
        .enumerate()
        .filter(|&(j, v)| {
            j != subject
                && (!goal_aware || v.goal_id == me.goal_id)
                && match range {
                    RangePolicy::Unrestricted => true,
                    RangePolicy::Limited { radius } => {
                        in_observation_range(me.position, v.position, radius)
                    }
                }
        })
        .map(|(j, _)| j)
        .collect()
}

/// Dampened average of `own` with the peer mean:
/// `(1 - alpha) * own + alpha * mean(peers)`, elementwise. The mean runs
/// over exactly the K peers; the subject's own weights enter only through
/// the `(1 - alpha)` term.
///
/// Peers are summed in a canonical order (lexicographic by value) rather
/// than the order given: float addition is not associative, and this keeps
/// the result bit-identical when agent ids — and hence peer enumeration
/// order — are permuted.
pub fn merge_weights(
    own: &[f64],
    peers: &[&[f64]],
    alpha: f64,
) -> Result<ParamVector, CoordinationError> {
    if peers.is_empty() {
        return Err(CoordinationError::NoPeers);
    }
    for p in peers {
        if p.len() != own.len() {
            return Err(CoordinationError::LengthMismatch {
                expected: own.len(),
                got: p.len(),
            });
        }
    }
    let mut order: Vec<usize> = (0..peers.len()).collect();
    order.sort_by(|&a, &b| {
        for (x, y) in peers[a].iter().zip(peers[b]) {
            match x.total_cmp(y) {
                Ordering::Equal => continue,
                other => return other,
            }
        }
        Ordering::Equal
    });
    let mut mean = vec![0.0; own.len()];
    for &i in &order {
        for (m, &p) in mean.iter_mut().zip(peers[i]) {
            *m += p;
        }
    }
    let k = peers.len() as f64;
    Ok(own
        .iter()
        .zip(&mean)
        .map(|(&o, &m)| (1.0 - alpha) * o + alpha * (m / k))
        .collect())
}

/// One synchronous coordination round over the whole population.
///
/// Every agent's parameters are snapshotted first; each live agent with a
/// non-empty peer set then merges against the snapshots, so no agent ever
/// observes a mid-round write. Returns how many agents merged.
pub fn coordination_round(
    agents: &mut [ActorCritic],
    views: &[PeerView],
    specs: &[AgentTypeSpec],
    cfg: &CoordinationConfig,
) -> Result<usize, CoordinationError> {
    assert_eq!(agents.len(), views.len());
    assert_eq!(agents.len(), specs.len());
    cfg.validate()?;

    let peer_sets: Vec<Option<Vec<usize>>> = (0..agents.len())
        .map(|i| {
            if views[i].terminated {
                return None;
            }
            let peers = discover_peers(i, views, &specs[i]);
            if peers.is_empty() {
                None
            } else {
                Some(peers)
            }
        })
        .collect();
    if peer_sets.iter().all(Option::is_none) {
        return Ok(0);
    }

    let snapshots: Vec<[ParamVector; 4]> = agents.iter().map(ActorCritic::all_params).collect();
    let mut merged = 0;
    for (i, peers) in peer_sets.iter().enumerate() {
        let Some(peers) = peers else { continue };
        let mut new_params: [ParamVector; 4] = Default::default();
        for (net, out) in new_params.iter_mut().enumerate() {
            let peer_params: Vec<&[f64]> =
                peers.iter().map(|&j| snapshots[j][net].as_slice()).collect();
            *out = merge_weights(&snapshots[i][net], &peer_params, cfg.alpha)?;
        }
        let [a, c, ta, tc] = &new_params;
        agents[i]
            .set_all_params([a, c, ta, tc])
            .expect("merged parameters keep their shapes");
        merged += 1;
    }
    Ok(merged)
}
