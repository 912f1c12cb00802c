//! Scenario execution: builds the agent population from a map, drives the
//! per-timestep loop (coordination round, then act/learn per live agent),
//! accumulates metrics across episodes, and writes the run artifacts.
//!
//! Learning state — networks, optimizers, replay buffers — persists across
//! episodes; only positions and termination flags reset. Everything is
//! seeded, and a run is a pure function of its config: equal seeds give
//! byte-identical outputs.

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::agent::{encode_state, ActorCritic, AgentConfig, AgentError, ReplayBuffer, Transition};
use crate::coordination::{
    coordination_round, AgentType, AgentTypeSpec, CoordinationConfig, CoordinationError, PeerView,
};
use crate::grid::{
    self, parse_map_file, transition, GridMap, MapError, Position, RewardParams,
};
use crate::metrics::{
    self, AgentEpisode, AgentStats, EpisodeMetrics, RunResult,
};
use crate::nn::{self, NnError};

/// The 10x10 two-goal map used by scenarios 1 and 2.
pub const SMALL_MAP: &str = include_str!("../../../maps/small_10x10.map");
/// The 20x20 two-goal map used by scenario 3.
pub const LARGE_MAP: &str = include_str!("../../../maps/large_20x20.map");

const SMALL_MAP_LABEL: &str = "small_10x10";
const LARGE_MAP_LABEL: &str = "large_20x20";

/// Salt folded into an agent's seed to separate its action/sampling RNG
/// stream from its weight-initialization stream.
const ACTION_RNG_SALT: u64 = 0x6a09e667f3bcc909;

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("invalid scenario: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Coordination(#[from] CoordinationError),
    #[error(transparent)]
    Net(#[from] NnError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Everything a run needs. Constructed from a preset or assembled by the
/// CLI; serialized verbatim into `summary.json` so no resolved value stays
/// implicit.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct ScenarioConfig {
    /// Preset tag when built from one ("s1", "s2", "s3").
    pub scenario: Option<String>,
    /// Map identity: preset map name or the path given by the operator.
    pub map_label: String,
    /// Raw map text; the label, not the text, is echoed in summaries.
    #[serde(skip)]
    pub map_text: String,
    /// How many of the map's spawn markers to use (the first N).
    pub n_agents: usize,
    pub episodes: usize,
    pub max_steps: u32,
    pub agent_type: AgentType,
    /// Observation radius for the range-limited agent types.
    pub range_radius: u32,
    pub seed: u64,
    pub agent: AgentConfig,
    pub coordination: CoordinationConfig,
    pub reward: RewardParams,
}

impl ScenarioConfig {
    /// The three scenario presets. Agent type defaults to A1 (the baseline)
    /// and the seed to 0; both are meant to be overridden per experiment.
    pub fn preset(name: &str) -> Option<ScenarioConfig> {
        let base = |map_label: &str, map_text: &str, n, episodes, max_steps, radius, batch| {
            ScenarioConfig {
                scenario: Some(name.to_ascii_lowercase()),
                map_label: map_label.to_string(),
                map_text: map_text.to_string(),
                n_agents: n,
                episodes,
                max_steps,
                agent_type: AgentType::A1,
                range_radius: radius,
                seed: 0,
                agent: AgentConfig {
                    batch_size: batch,
                    ..AgentConfig::default()
                },
                coordination: CoordinationConfig::default(),
                reward: RewardParams::default(),
            }
        };
        match name.to_ascii_lowercase().as_str() {
            "s1" => Some(base(SMALL_MAP_LABEL, SMALL_MAP, 3, 2500, 400, 2, 64)),
            "s2" => Some(base(SMALL_MAP_LABEL, SMALL_MAP, 4, 2500, 400, 2, 64)),
            "s3" => Some(base(LARGE_MAP_LABEL, LARGE_MAP, 10, 400, 2500, 3, 256)),
            _ => None,
        }
    }

    /// Parses and validates the configured map, checking the config against
    /// it (enough spawn markers, usable radius, positive budgets).
    pub fn load_map(&self) -> Result<GridMap, OrchestratorError> {
        let map = parse_map_file(&self.map_text)?;
        self.validate(&map)?;
        Ok(map)
    }

    fn validate(&self, map: &GridMap) -> Result<(), OrchestratorError> {
        let bad = |msg: String| Err(OrchestratorError::BadConfig(msg));
        if self.n_agents == 0 {
            return bad("n_agents must be at least 1".into());
        }
        if self.n_agents > map.spawns().len() {
            return bad(format!(
                "n_agents = {} but map {:?} defines only {} spawn markers",
                self.n_agents,
                self.map_label,
                map.spawns().len()
            ));
        }
        if self.episodes == 0 {
            return bad("episodes must be at least 1".into());
        }
        if self.max_steps == 0 {
            return bad("max_steps must be at least 1".into());
        }
        if self.range_radius == 0 {
            return bad("observation range must be at least 1".into());
        }
        self.agent.validate()?;
        self.coordination.validate()?;
        self.reward
            .validate()
            .map_err(|_| OrchestratorError::BadConfig(format!(
                "lambda_stay = {} outside (0, 1)",
                self.reward.lambda_stay
            )))?;
        Ok(())
    }
}

/// SplitMix64 — the stock 64-bit seed scrambler.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Seed for one agent's streams. XOR-ing a per-id hash (rather than, say,
/// adding the id) means adding agents to a run never perturbs the streams
/// of the agents already present.
pub fn agent_seed(master_seed: u64, agent_id: usize) -> u64 {
    master_seed ^ splitmix64(agent_id as u64)
}

/// The live population: agents plus their environment-side state, kept as
/// parallel vectors so the learn loop can borrow pieces independently.
#[derive(Clone, Debug)]
pub struct Population {
    agents: Vec<ActorCritic>,
    buffers: Vec<ReplayBuffer>,
    rngs: Vec<ChaCha8Rng>,
    specs: Vec<AgentTypeSpec>,
    spawns: Vec<Position>,
    goal_ids: Vec<usize>,
    goal_positions: Vec<Position>,
    positions: Vec<Position>,
    terminated: Vec<bool>,
}

impl Population {
    pub fn new(map: &GridMap, cfg: &ScenarioConfig) -> Result<Population, OrchestratorError> {
        Self::with_agents(map, cfg, None)
    }

    /// Builds the population, optionally around pre-existing agents (loaded
    /// checkpoints, or custom initializations). When `agents` is `None`,
    /// fresh networks are initialized from the per-agent seeds. Action-RNG
    /// streams always derive from the config seed, so supplying agents
    /// changes parameters without touching exploration randomness.
    pub fn with_agents(
        map: &GridMap,
        cfg: &ScenarioConfig,
        agents: Option<Vec<ActorCritic>>,
    ) -> Result<Population, OrchestratorError> {
        let n = cfg.n_agents;
        let state_dim = 2 + map.goal_count();
        let spawns: Vec<_> = map.spawns()[..n].to_vec();
        let goal_ids: Vec<usize> = spawns.iter().map(|s| s.goal).collect();
        let agents = match agents {
            Some(agents) => {
                if agents.len() != n {
                    return Err(OrchestratorError::BadConfig(format!(
                        "expected {} agents, got {}",
                        n,
                        agents.len()
                    )));
                }
                for (i, a) in agents.iter().enumerate() {
                    if a.state_dim() != state_dim {
                        return Err(OrchestratorError::BadConfig(format!(
                            "agent {} expects {}-dimensional states, map needs {}",
                            i,
                            a.state_dim(),
                            state_dim
                        )));
                    }
                    if a.goal_id() != goal_ids[i] {
                        return Err(OrchestratorError::BadConfig(format!(
                            "agent {} serves goal {}, map assigns goal {}",
                            i,
                            a.goal_id(),
                            goal_ids[i]
                        )));
                    }
                }
                agents
            }
            None => (0..n)
                .map(|i| {
                    ActorCritic::new(state_dim, goal_ids[i], cfg.agent, agent_seed(cfg.seed, i))
                })
                .collect::<Result<_, _>>()?,
        };
        let rngs = (0..n)
            .map(|i| ChaCha8Rng::seed_from_u64(splitmix64(agent_seed(cfg.seed, i) ^ ACTION_RNG_SALT)))
            .collect();
        let positions: Vec<Position> = spawns.iter().map(|s| s.position).collect();
        Ok(Population {
            agents,
            buffers: vec![ReplayBuffer::new(cfg.agent.buffer_capacity); n],
            rngs,
            specs: vec![cfg.agent_type.spec(cfg.range_radius); n],
            goal_positions: goal_ids.iter().map(|&g| map.goals()[g]).collect(),
            goal_ids,
            spawns: positions.clone(),
            positions,
            terminated: vec![false; n],
        })
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn agents(&self) -> &[ActorCritic] {
        &self.agents
    }

    pub fn buffers(&self) -> &[ReplayBuffer] {
        &self.buffers
    }

    pub fn goal_ids(&self) -> &[usize] {
        &self.goal_ids
    }

    fn reset_for_episode(&mut self) {
        self.positions.copy_from_slice(&self.spawns);
        self.terminated.fill(false);
    }

    fn views(&self) -> Vec<PeerView> {
        (0..self.len())
            .map(|i| PeerView {
                position: self.positions[i],
                goal_id: self.goal_ids[i],
                terminated: self.terminated[i],
            })
            .collect()
    }
}

/// Runs one episode: positions reset, then per timestep a coordination
/// round followed by the act/learn sequence for every live agent. Learning
/// state persists beyond the episode.
pub fn run_episode(
    map: &GridMap,
    cfg: &ScenarioConfig,
    pop: &mut Population,
) -> Result<EpisodeMetrics, OrchestratorError> {
    let n = pop.len();
    let (w, h, goal_count) = (map.width(), map.height(), map.goal_count());
    pop.reset_for_episode();

    let mut reward_sum = vec![0.0; n];
    let mut steps_to_goal: Vec<Option<u32>> = vec![None; n];
    // An agent spawning on its goal succeeds at step 0 with the arrival
    // reward and never acts or learns.
    for i in 0..n {
        if pop.positions[i] == pop.goal_positions[i] {
            pop.terminated[i] = true;
            steps_to_goal[i] = Some(0);
            reward_sum[i] = 1.0;
        }
    }

    let mut executed = 0;
    for t in 1..=cfg.max_steps {
        if pop.terminated.iter().all(|&done| done) {
            break;
        }
        executed = t;

        let views = pop.views();
        coordination_round(&mut pop.agents, &views, &pop.specs, &cfg.coordination)?;

        for i in 0..n {
            if pop.terminated[i] {
                continue;
            }
            let state = encode_state(pop.positions[i], w, h, pop.goal_ids[i], goal_count);
            let action = pop.agents[i].select_action(&state, &mut pop.rngs[i]);
            let outcome = transition(map, pop.positions[i], action);
            let r = grid::reward(
                pop.positions[i],
                outcome.position,
                pop.goal_positions[i],
                outcome.valid,
                &cfg.reward,
            );
            let terminal = outcome.position == pop.goal_positions[i];
            let next_state = encode_state(outcome.position, w, h, pop.goal_ids[i], goal_count);
            pop.buffers[i].push(Transition {
                state,
                action,
                reward: r,
                next_state,
                terminal,
            });

            let idx = pop.buffers[i]
                .sample_indices(cfg.agent.batch_size, &mut pop.rngs[i])
                .expect("buffer holds at least the transition just pushed");
            let batch: Vec<&Transition> = idx.iter().map(|&k| pop.buffers[i].get(k)).collect();
            pop.agents[i].learn_step(&batch);
            pop.agents[i].soft_update_targets();

            pop.positions[i] = outcome.position;
            reward_sum[i] += r;
            if terminal {
                pop.terminated[i] = true;
                steps_to_goal[i] = Some(t);
            }
        }
    }

    let agents = (0..n)
        .map(|i| AgentEpisode {
            success: pop.terminated[i],
            steps_to_goal: steps_to_goal[i],
            episodic_reward: reward_sum[i],
        })
        .collect();
    Ok(EpisodeMetrics::new(agents, executed))
}

/// A finished scenario: the metrics plus the trained population.
#[derive(Clone, Debug)]
pub struct ScenarioRun {
    pub config: ScenarioConfig,
    pub result: RunResult,
    pub population: Population,
}

/// Trains a fresh population through the configured episode budget.
/// Deterministic: the result is a pure function of the config.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioRun, OrchestratorError> {
    let map = cfg.load_map()?;
    let mut population = Population::new(&map, cfg)?;
    let mut result = RunResult::default();
    result.episodes.reserve(cfg.episodes);
    for _ in 0..cfg.episodes {
        let ep = run_episode(&map, cfg, &mut population)?;
        result.episodes.push(ep);
    }
    Ok(ScenarioRun {
        config: cfg.clone(),
        result,
        population,
    })
}

/// Greedy-policy rollouts with learning, exploration, and coordination all
/// disabled. Agent `i` starts at the map's spawn `i`; every episode is
/// identical by construction, which makes this a policy probe rather than
/// an experiment.
pub fn evaluate(
    map: &GridMap,
    agents: &[ActorCritic],
    episodes: usize,
    max_steps: u32,
    reward: &RewardParams,
) -> Result<RunResult, OrchestratorError> {
    let n = agents.len();
    if n == 0 || n > map.spawns().len() {
        return Err(OrchestratorError::BadConfig(format!(
            "cannot place {} agents on a map with {} spawns",
            n,
            map.spawns().len()
        )));
    }
    let state_dim = 2 + map.goal_count();
    for (i, a) in agents.iter().enumerate() {
        if a.state_dim() != state_dim {
            return Err(OrchestratorError::BadConfig(format!(
                "agent {} expects {}-dimensional states, map needs {}",
                i,
                a.state_dim(),
                state_dim
            )));
        }
        if a.goal_id() >= map.goal_count() {
            return Err(OrchestratorError::BadConfig(format!(
                "agent {} serves goal {}, map has {} goals",
                i,
                a.goal_id(),
                map.goal_count()
            )));
        }
    }

    let mut result = RunResult::default();
    for _ in 0..episodes {
        let mut positions: Vec<Position> =
            map.spawns()[..n].iter().map(|s| s.position).collect();
        let mut done = vec![false; n];
        let mut reward_sum = vec![0.0; n];
        let mut steps_to_goal: Vec<Option<u32>> = vec![None; n];
        for i in 0..n {
            if positions[i] == map.goals()[agents[i].goal_id()] {
                done[i] = true;
                steps_to_goal[i] = Some(0);
                reward_sum[i] = 1.0;
            }
        }
        let mut executed = 0;
        for t in 1..=max_steps {
            if done.iter().all(|&d| d) {
                break;
            }
            executed = t;
            for i in 0..n {
                if done[i] {
                    continue;
                }
                let goal_pos = map.goals()[agents[i].goal_id()];
                let state =
                    encode_state(positions[i], map.width(), map.height(), agents[i].goal_id(), map.goal_count());
                let action = agents[i].greedy_action(&state);
                let outcome = transition(map, positions[i], action);
                let r = grid::reward(positions[i], outcome.position, goal_pos, outcome.valid, reward);
                positions[i] = outcome.position;
                reward_sum[i] += r;
                if outcome.position == goal_pos {
                    done[i] = true;
                    steps_to_goal[i] = Some(t);
                }
            }
        }
        let agents_ep = (0..n)
            .map(|i| AgentEpisode {
                success: done[i],
                steps_to_goal: steps_to_goal[i],
                episodic_reward: reward_sum[i],
            })
            .collect();
        result.episodes.push(EpisodeMetrics::new(agents_ep, executed));
    }
    Ok(result)
}

const NET_SUFFIXES: [&str; 4] = ["actor", "critic", "target_actor", "target_critic"];

fn checkpoint_path(dir: &Path, agent_id: usize, suffix: &str) -> PathBuf {
    dir.join(format!("agent{agent_id}_{suffix}.gmrl"))
}

/// Writes the four networks of every agent as
/// `agent{i}_{actor,critic,target_actor,target_critic}.gmrl`.
pub fn save_checkpoints(dir: &Path, agents: &[ActorCritic]) -> Result<Vec<PathBuf>, OrchestratorError> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (i, agent) in agents.iter().enumerate() {
        let nets = [
            agent.actor(),
            agent.critic(),
            agent.target_actor(),
            agent.target_critic(),
        ];
        for (net, suffix) in nets.iter().zip(NET_SUFFIXES) {
            let path = checkpoint_path(dir, i, suffix);
            nn::save_params(net, &path)?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Loads one agent's checkpoint set back into an [`ActorCritic`].
pub fn load_agent_checkpoint(
    dir: &Path,
    agent_id: usize,
    goal_id: usize,
    cfg: AgentConfig,
) -> Result<ActorCritic, OrchestratorError> {
    let load = |suffix: &str| nn::load_params(&checkpoint_path(dir, agent_id, suffix));
    Ok(ActorCritic::from_nets(
        load("actor")?,
        load("critic")?,
        load("target_actor")?,
        load("target_critic")?,
        goal_id,
        cfg,
    )?)
}

/// Loads checkpoints for the first `n` spawns of `map`, wiring each agent
/// to the goal its spawn marker is assigned.
pub fn load_population_checkpoints(
    dir: &Path,
    map: &GridMap,
    n: usize,
    cfg: AgentConfig,
) -> Result<Vec<ActorCritic>, OrchestratorError> {
    if n == 0 || n > map.spawns().len() {
        return Err(OrchestratorError::BadConfig(format!(
            "cannot load {} agents for a map with {} spawns",
            n,
            map.spawns().len()
        )));
    }
    (0..n)
        .map(|i| load_agent_checkpoint(dir, i, map.spawns()[i].goal, cfg))
        .collect()
}

/// Per-agent block of the run summary.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct AgentSummaryRow {
    pub agent_id: usize,
    pub goal_id: usize,
    pub spawn: Position,
    pub successes: usize,
    pub success_rate: f64,
    pub steps: Option<metrics::StepsStats>,
}

/// The `summary.json` payload: full config echo plus the derived statistics.
/// Contains no timestamps or host state, keeping equal-seed runs
/// byte-identical.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct RunSummary {
    pub config: ScenarioConfig,
    pub map_width: u32,
    pub map_height: u32,
    pub goal_count: usize,
    pub step_budget: u64,
    pub total_env_steps: u64,
    pub system_success_rate: f64,
    pub final_smoothed_system_reward: f64,
    /// Mean smoothed system reward over the final 100 episodes.
    pub final_window_mean_smoothed_reward: f64,
    pub per_agent: Vec<AgentSummaryRow>,
}

impl RunSummary {
    pub fn build(cfg: &ScenarioConfig, map: &GridMap, result: &RunResult) -> RunSummary {
        let stats: Vec<AgentStats> = metrics::summarize(result);
        let smoothed = result.smoothed_system_reward();
        RunSummary {
            config: cfg.clone(),
            map_width: map.width(),
            map_height: map.height(),
            goal_count: map.goal_count(),
            step_budget: cfg.episodes as u64 * cfg.max_steps as u64,
            total_env_steps: result.total_env_steps(),
            system_success_rate: result.system_success_rate(),
            final_smoothed_system_reward: smoothed.last().copied().unwrap_or(0.0),
            final_window_mean_smoothed_reward: result.final_window_mean_smoothed(100),
            per_agent: stats
                .into_iter()
                .map(|s| AgentSummaryRow {
                    agent_id: s.agent_id,
                    goal_id: map.spawns()[s.agent_id].goal,
                    spawn: map.spawns()[s.agent_id].position,
                    successes: s.successes,
                    success_rate: s.success_rate,
                    steps: s.steps,
                })
                .collect(),
        }
    }
}

/// Writes `metrics.csv`, `summary.json`, and the per-agent checkpoints into
/// `dir`, returning every path written (sorted).
pub fn write_run_outputs(dir: &Path, run: &ScenarioRun) -> Result<Vec<PathBuf>, OrchestratorError> {
    fs::create_dir_all(dir)?;
    let map = run.config.load_map()?;
    let mut written = Vec::new();

    let metrics_path = dir.join("metrics.csv");
    metrics::write_metrics_csv(&run.result, &metrics_path)?;
    written.push(metrics_path);

    let summary = RunSummary::build(&run.config, &map, &run.result);
    let summary_path = dir.join("summary.json");
    let mut payload = serde_json::to_string_pretty(&summary).expect("summary serializes");
    payload.push('\n');
    fs::write(&summary_path, payload)?;
    written.push(summary_path);

    written.extend(save_checkpoints(dir, run.population.agents())?);
    written.sort();
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{ActionKind, Spawn};
    use crate::nn::DenseNet;
    use std::collections::VecDeque;

    /// Independent shortest-path oracle over the map's motion graph.
    fn bfs_steps(map: &GridMap, from: Position, to: Position) -> Option<u32> {
        let mut dist = vec![None; (map.width() * map.height()) as usize];
        let at = |p: Position| (p.y * map.width() + p.x) as usize;
        let mut queue = VecDeque::new();
        dist[at(from)] = Some(0);
        queue.push_back(from);
        while let Some(p) = queue.pop_front() {
            if p == to {
                return dist[at(p)];
            }
            for action in ActionKind::ALL {
                if action == ActionKind::Stay {
                    continue;
                }
                let out = transition(map, p, action);
                if out.valid && dist[at(out.position)].is_none() {
                    dist[at(out.position)] = Some(dist[at(p)].unwrap() + 1);
                    queue.push_back(out.position);
                }
            }
        }
        None
    }

    fn tiny_config(map_text: &str, n: usize, episodes: usize, max_steps: u32) -> ScenarioConfig {
        ScenarioConfig {
            scenario: None,
            map_label: "test".into(),
            map_text: map_text.to_string(),
            n_agents: n,
            episodes,
            max_steps,
            agent_type: AgentType::A1,
            range_radius: 2,
            seed: 12345,
            agent: AgentConfig {
                batch_size: 8,
                ..AgentConfig::default()
            },
            coordination: CoordinationConfig::default(),
            reward: RewardParams::default(),
        }
    }

    #[test]
    fn splitmix64_known_answers() {
        // Reference values of the standard SplitMix64 stream seeded at 0.
        assert_eq!(splitmix64(0), 0xe220a8397b1dcdaf);
        assert_ne!(splitmix64(1), splitmix64(2));
        // Agent seeds differ from each other and from the master.
        let seeds: Vec<u64> = (0..8).map(|i| agent_seed(99, i)).collect();
        for (i, &s) in seeds.iter().enumerate() {
            assert_ne!(s, 99);
            assert!(!seeds[..i].contains(&s));
        }
    }

    #[test]
    fn presets_match_experiment_grid() {
        let s1 = ScenarioConfig::preset("s1").unwrap();
        assert_eq!(
            (s1.n_agents, s1.episodes, s1.max_steps, s1.agent.batch_size, s1.range_radius),
            (3, 2500, 400, 64, 2)
        );
        let s2 = ScenarioConfig::preset("s2").unwrap();
        assert_eq!((s2.n_agents, s2.episodes, s2.max_steps), (4, 2500, 400));
        let s3 = ScenarioConfig::preset("s3").unwrap();
        assert_eq!(
            (s3.n_agents, s3.episodes, s3.max_steps, s3.agent.batch_size, s3.range_radius),
            (10, 400, 2500, 256, 3)
        );
        for name in ["s1", "s2", "s3"] {
            let cfg = ScenarioConfig::preset(name).unwrap();
            assert_eq!(cfg.episodes as u64 * cfg.max_steps as u64, 1_000_000);
            let map = cfg.load_map().unwrap();
            assert!(map.spawns().len() >= cfg.n_agents);
        }
        assert!(ScenarioConfig::preset("s4").is_none());
        assert_eq!(ScenarioConfig::preset("S1").unwrap().n_agents, 3);
    }

    #[test]
    fn config_validation_rejects_bad_setups() {
        let mut cfg = tiny_config("@assign a=0\na.0", 1, 1, 5);
        cfg.n_agents = 2;
        assert!(matches!(
            cfg.load_map(),
            Err(OrchestratorError::BadConfig(_))
        ));
        let mut cfg = tiny_config("@assign a=0\na.0", 1, 1, 5);
        cfg.episodes = 0;
        assert!(cfg.load_map().is_err());
        let mut cfg = tiny_config("@assign a=0\na.0", 1, 1, 5);
        cfg.range_radius = 0;
        assert!(cfg.load_map().is_err());
        let cfg = tiny_config("@assign a=0\na.0\n..", 1, 1, 5);
        assert!(matches!(cfg.load_map(), Err(OrchestratorError::Map(_))));
    }

    #[test]
    fn spawn_on_goal_succeeds_at_step_zero_without_learning() {
        // Not expressible in map text (one glyph per cell), so build the
        // map directly: the agent's spawn sits on its goal.
        let map = GridMap::new(
            2,
            2,
            vec![false; 4],
            vec![Position::new(0, 0)],
            vec![Spawn {
                position: Position::new(0, 0),
                goal: 0,
            }],
        )
        .unwrap();
        let cfg = tiny_config("unused", 1, 2, 5);
        let mut pop = Population::new(&map, &cfg).unwrap();
        let fresh_params = pop.agents()[0].all_params();
        for _ in 0..2 {
            let ep = run_episode(&map, &cfg, &mut pop).unwrap();
            assert!(ep.all_succeeded);
            assert_eq!(ep.agents[0].steps_to_goal, Some(0));
            assert_eq!(ep.agents[0].episodic_reward, 1.0);
            assert_eq!(ep.steps_executed, 0);
        }
        assert_eq!(pop.agents()[0].all_params(), fresh_params);
        assert_eq!(pop.buffers()[0].len(), 0);
    }

    #[test]
    fn budget_exhaustion_is_failure() {
        // One step of budget, goal two moves away.
        let cfg = tiny_config("@assign a=0\na.0", 1, 1, 1);
        let run = run_scenario(&cfg).unwrap();
        let ep = &run.result.episodes[0];
        assert!(!ep.agents[0].success);
        assert_eq!(ep.agents[0].steps_to_goal, None);
        assert_eq!(ep.steps_executed, 1);
        assert!(ep.agents[0].episodic_reward >= -1.0 && ep.agents[0].episodic_reward <= 1.0);
    }

    /// A hand-built affine actor encoding "close the x gap, then the y gap".
    /// The x logits always dominate while any x gap remains (kx / (w-1)
    /// exceeds ky), gaps never tie, and every decisive gap is at least 10,
    /// so softmax sampling follows the argmax path with overwhelming
    /// probability.
    fn scripted_actor(map: &GridMap, goal: Position) -> DenseNet {
        let norm = |v: u32, extent: u32| {
            if extent > 1 {
                f64::from(v) / f64::from(extent - 1)
            } else {
                0.0
            }
        };
        let gx = norm(goal.x, map.width());
        let gy = norm(goal.y, map.height());
        let (kx, ky) = (200.0, 40.0);
        let state_dim = 2 + map.goal_count();
        let mut params = vec![0.0; crate::nn::param_count(&[state_dim, 5])];
        let mut set = |action: ActionKind, wx: f64, wy: f64, b: f64| {
            let row = action.index();
            params[row * state_dim] = wx;
            params[row * state_dim + 1] = wy;
            params[5 * state_dim + row] = b;
        };
        set(ActionKind::Stay, 0.0, 0.0, -10.0);
        set(ActionKind::Up, 0.0, ky, -ky * gy);
        set(ActionKind::Down, 0.0, -ky, ky * gy);
        set(ActionKind::Left, kx, 0.0, -kx * gx);
        set(ActionKind::Right, -kx, 0.0, kx * gx);
        DenseNet::from_params(&[state_dim, 5], params).unwrap()
    }

    fn scripted_agent(map: &GridMap, goal_id: usize, cfg: &AgentConfig) -> ActorCritic {
        let actor = scripted_actor(map, map.goals()[goal_id]);
        let critic = DenseNet::zeros(&[actor.input_dim() + 5, 4, 1]).unwrap();
        ActorCritic::from_nets(actor.clone(), critic.clone(), actor, critic, goal_id, *cfg)
            .unwrap()
    }

    #[test]
    fn scripted_policy_reaches_goal_in_bfs_steps() {
        let cfg = tiny_config("@assign a=0\na....\n.....\n.....\n.....\n....0", 1, 1, 50);
        let map = cfg.load_map().unwrap();
        let spawn = map.spawns()[0].position;
        let goal = map.goals()[0];
        let oracle = bfs_steps(&map, spawn, goal).unwrap();
        assert_eq!(oracle, 8);

        // Learning run: sampling follows the scripted argmax path here, and
        // a handful of Adam steps cannot overturn logit gaps of ~25.
        let mut pop = Population::new(&map, &cfg).unwrap();
        pop.agents[0] = scripted_agent(&map, 0, &cfg.agent);
        let ep = run_episode(&map, &cfg, &mut pop).unwrap();
        assert_eq!(ep.agents[0].steps_to_goal, Some(oracle));

        // Greedy evaluation of the same policy, learning disabled.
        let agents = vec![scripted_agent(&map, 0, &cfg.agent)];
        let eval = evaluate(&map, &agents, 3, 50, &cfg.reward).unwrap();
        for ep in &eval.episodes {
            assert_eq!(ep.agents[0].steps_to_goal, Some(oracle));
            assert!(ep.all_succeeded);
        }

        // Reward accounting along the known path: sum of 1/distance over
        // intermediate cells plus the arrival reward.
        let path = [
            (1, 0), (2, 0), (3, 0), (4, 0), (4, 1), (4, 2), (4, 3), (4, 4),
        ];
        let expected: f64 = path
            .iter()
            .map(|&(x, y)| {
                let p = Position::new(x, y);
                if p == goal {
                    1.0
                } else {
                    1.0 / crate::grid::distance(p, goal)
                }
            })
            .sum();
        let got = eval.episodes[0].agents[0].episodic_reward;
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn terminated_agents_freeze_mid_episode() {
        // Two agents, one spawns adjacent to its goal and finishes in one
        // step; its reward and position must not change afterwards.
        let text = "@assign a=0 b=1\na0.b.....1";
        let cfg = {
            let mut c = tiny_config(text, 2, 1, 20);
            c.agent_type = AgentType::A1;
            c
        };
        let map = cfg.load_map().unwrap();
        let mut pop = Population::new(&map, &cfg).unwrap();
        pop.agents[0] = scripted_agent(&map, 0, &cfg.agent);
        let ep = run_episode(&map, &cfg, &mut pop).unwrap();
        assert_eq!(ep.agents[0].steps_to_goal, Some(1));
        // Exactly the arrival reward: nothing accrued after termination.
        assert_eq!(ep.agents[0].episodic_reward, 1.0);
        assert_eq!(pop.positions[0], map.goals()[0]);
    }

    #[test]
    fn learning_state_persists_across_episodes() {
        let cfg = tiny_config("@assign a=0\na...0", 1, 3, 6);
        let run = run_scenario(&cfg).unwrap();
        let total_steps: u64 = run
            .result
            .episodes
            .iter()
            .map(|e| e.steps_executed as u64)
            .sum();
        // Replay buffer accumulated one transition per executed live step
        // across all episodes — never reset.
        assert_eq!(run.population.buffers()[0].len() as u64, total_steps);
        assert!(total_steps > 6, "agent should not solve every episode instantly");
        // And learning actually moved the parameters.
        let fresh = ActorCritic::new(3, 0, cfg.agent, agent_seed(cfg.seed, 0)).unwrap();
        assert_ne!(run.population.agents()[0].actor(), fresh.actor());
    }

    #[test]
    fn equal_seeds_reproduce_bit_identical_runs() {
        let mut cfg = tiny_config(
            "@assign a=0 b=0 c=1\na..c#....0\n..........\nb.......1.",
            3,
            3,
            15,
        );
        cfg.agent_type = AgentType::A5;
        let a = run_scenario(&cfg).unwrap();
        let b = run_scenario(&cfg).unwrap();
        assert_eq!(a.result, b.result);
        assert_eq!(
            metrics::render_metrics_csv(&a.result),
            metrics::render_metrics_csv(&b.result)
        );
        for (x, y) in a.population.agents().iter().zip(b.population.agents()) {
            assert_eq!(x.all_params(), y.all_params());
        }
        let mut cfg2 = cfg.clone();
        cfg2.seed = 999;
        let c = run_scenario(&cfg2).unwrap();
        assert_ne!(a.result, c.result);
    }

    #[test]
    fn a1_agent_ignores_bystanders() {
        // Same map, one against three non-collaborative agents: agent 0's
        // metrics and parameters must match bit for bit.
        let text = "@assign a=0 b=0 c=1 d=1\na..c#....0\n.......d..\nb.......1.";
        let solo = {
            let mut c = tiny_config(text, 1, 3, 12);
            c.agent_type = AgentType::A1;
            c
        };
        let crowd = {
            let mut c = solo.clone();
            c.n_agents = 4;
            c
        };
        let run_solo = run_scenario(&solo).unwrap();
        let run_crowd = run_scenario(&crowd).unwrap();
        for (a, b) in run_solo
            .result
            .episodes
            .iter()
            .zip(&run_crowd.result.episodes)
        {
            assert_eq!(a.agents[0], b.agents[0]);
        }
        assert_eq!(
            run_solo.population.agents()[0].all_params(),
            run_crowd.population.agents()[0].all_params()
        );
    }

    #[test]
    fn episodic_rewards_respect_bounds() {
        let cfg = tiny_config("@assign a=0\na....0", 1, 4, 9);
        let run = run_scenario(&cfg).unwrap();
        for ep in &run.result.episodes {
            for a in &ep.agents {
                assert!(a.episodic_reward >= -f64::from(cfg.max_steps));
                if let Some(steps) = a.steps_to_goal {
                    if steps >= 1 {
                        assert!(a.episodic_reward <= f64::from(steps) + 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn checkpoints_round_trip_through_disk() {
        let cfg = tiny_config("@assign a=0\na..0", 1, 2, 8);
        let run = run_scenario(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = save_checkpoints(dir.path(), run.population.agents()).unwrap();
        assert_eq!(files.len(), 4);
        let map = cfg.load_map().unwrap();
        let loaded = load_population_checkpoints(dir.path(), &map, 1, cfg.agent).unwrap();
        assert_eq!(loaded[0].actor(), run.population.agents()[0].actor());
        assert_eq!(
            loaded[0].target_critic(),
            run.population.agents()[0].target_critic()
        );
        let direct = evaluate(&map, run.population.agents(), 2, 8, &cfg.reward).unwrap();
        let reloaded = evaluate(&map, &loaded, 2, 8, &cfg.reward).unwrap();
        assert_eq!(direct, reloaded);
    }

    #[test]
    fn evaluate_handles_edge_cases() {
        let cfg = tiny_config("@assign a=0\na..0", 1, 1, 8);
        let map = cfg.load_map().unwrap();
        let agents =
            vec![ActorCritic::new(3, 0, cfg.agent, 7).unwrap()];
        assert!(evaluate(&map, &agents, 0, 8, &cfg.reward)
            .unwrap()
            .episodes
            .is_empty());
        // Architecture mismatch: agent built for a two-goal state space.
        let wrong = vec![ActorCritic::new(4, 0, cfg.agent, 7).unwrap()];
        assert!(matches!(
            evaluate(&map, &wrong, 1, 8, &cfg.reward),
            Err(OrchestratorError::BadConfig(_))
        ));
    }

    #[test]
    fn run_outputs_write_expected_artifacts() {
        let cfg = tiny_config("@assign a=0\na..0", 1, 2, 6);
        let run = run_scenario(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = write_run_outputs(dir.path(), &run).unwrap();
        let names: Vec<String> = files
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert!(names.contains(&"metrics.csv".to_string()));
        assert!(names.contains(&"summary.json".to_string()));
        assert!(names.contains(&"agent0_actor.gmrl".to_string()));
        assert_eq!(files.len(), 6);
        let summary: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap())
                .unwrap();
        // Config echo includes every resolved hyperparameter.
        assert_eq!(summary["config"]["seed"], 12345);
        assert_eq!(summary["config"]["agent"]["gamma"], 0.99);
        assert_eq!(summary["config"]["agent"]["batch_size"], 8);
        assert_eq!(summary["config"]["coordination"]["alpha"], 0.1);
        assert_eq!(summary["config"]["reward"]["lambda_stay"], 0.5);
        assert_eq!(summary["config"]["agent_type"], "A1");
        assert_eq!(summary["step_budget"], 12);
        assert!(summary.get("timestamp").is_none());
        // Writing twice is byte-identical.
        let first = fs::read(dir.path().join("metrics.csv")).unwrap();
        write_run_outputs(dir.path(), &run).unwrap();
        assert_eq!(first, fs::read(dir.path().join("metrics.csv")).unwrap());
    }

    #[test]
    fn collaborative_small_run_merges_and_stays_finite() {
        let mut cfg = tiny_config(
            "@assign a=0 b=0\na........0\nb.........",
            2,
            3,
            10,
        );
        cfg.agent_type = AgentType::A5;
        cfg.range_radius = 3;
        let run = run_scenario(&cfg).unwrap();
        for agent in run.population.agents() {
            for params in agent.all_params() {
                assert!(params.iter().all(|v| v.is_finite()));
            }
        }
        for ep in &run.result.episodes {
            assert!(ep.mean_reward.is_finite());
        }
    }
}
