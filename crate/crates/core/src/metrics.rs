//! Per-episode bookkeeping and the derived run statistics: success rates,
//! steps-to-goal summaries over successful episodes, and the smoothed
//! system-reward curve.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

/// Trailing moving-average window used for the system-reward curve.
pub const SMOOTHING_WINDOW: usize = 50;

/// One agent's outcome in one episode.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentEpisode {
    pub success: bool,
    /// Timestep of first goal arrival; `None` when the agent failed.
    /// An agent spawning on its goal records `Some(0)`.
    pub steps_to_goal: Option<u32>,
    /// Cumulative reward collected before termination.
    pub episodic_reward: f64,
}

/// One episode, all agents.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeMetrics {
    pub agents: Vec<AgentEpisode>,
    /// System success: every agent reached its goal within the budget.
    pub all_succeeded: bool,
    /// Across-agent mean episodic reward ("system reward").
    pub mean_reward: f64,
    /// Timesteps actually executed before all agents finished or the budget
    /// ran out.
    pub steps_executed: u32,
}

impl EpisodeMetrics {
    pub fn new(agents: Vec<AgentEpisode>, steps_executed: u32) -> EpisodeMetrics {
        assert!(!agents.is_empty());
        let all_succeeded = agents.iter().all(|a| a.success);
        let mean_reward =
            agents.iter().map(|a| a.episodic_reward).sum::<f64>() / agents.len() as f64;
        EpisodeMetrics {
            agents,
            all_succeeded,
            mean_reward,
            steps_executed,
        }
    }
}

/// Every episode of a scenario run, with the derived summaries computed on
/// demand so they always agree with the episode list.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct RunResult {
    pub episodes: Vec<EpisodeMetrics>,
}

/// Steps-to-goal statistics over an agent's successful episodes.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StepsStats {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub median: f64,
}

/// Per-agent summary row.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AgentStats {
    pub agent_id: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Absent — not zero — for agents that never succeeded.
    pub steps: Option<StepsStats>,
}

impl RunResult {
    pub fn n_agents(&self) -> usize {
        self.episodes.first().map_or(0, |e| e.agents.len())
    }

    pub fn n_episodes(&self) -> usize {
        self.episodes.len()
    }

    /// Trailing moving average (window [`SMOOTHING_WINDOW`]) of the
    /// across-agent mean episodic reward.
    pub fn smoothed_system_reward(&self) -> Vec<f64> {
        let raw: Vec<f64> = self.episodes.iter().map(|e| e.mean_reward).collect();
        moving_average(&raw, SMOOTHING_WINDOW)
    }

    pub fn agent_success_rate(&self, agent: usize) -> f64 {
        let hits = self
            .episodes
            .iter()
            .filter(|e| e.agents[agent].success)
            .count();
        hits as f64 / self.episodes.len() as f64
    }

    /// Fraction of episodes in which *all* agents reached their goals.
    pub fn system_success_rate(&self) -> f64 {
        let hits = self.episodes.iter().filter(|e| e.all_succeeded).count();
        hits as f64 / self.episodes.len() as f64
    }

    /// Mean, population standard deviation, and median of steps-to-goal over
    /// the agent's successful episodes; `None` if it never succeeded.
    pub fn steps_stats(&self, agent: usize) -> Option<StepsStats> {
        let steps: Vec<f64> = self
            .episodes
            .iter()
            .filter_map(|e| e.agents[agent].steps_to_goal)
            .map(f64::from)
            .collect();
        if steps.is_empty() {
            return None;
        }
        let n = steps.len() as f64;
        let mean = steps.iter().sum::<f64>() / n;
        let var = steps.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
        Some(StepsStats {
            mean,
            std: var.sqrt(),
            median: median(steps),
        })
    }

    /// Mean of the smoothed system-reward curve over the final `window`
    /// episodes (or all of them, if fewer).
    pub fn final_window_mean_smoothed(&self, window: usize) -> f64 {
        let smoothed = self.smoothed_system_reward();
        let tail = &smoothed[smoothed.len().saturating_sub(window)..];
        tail.iter().sum::<f64>() / tail.len() as f64
    }

    pub fn total_env_steps(&self) -> u64 {
        self.episodes.iter().map(|e| e.steps_executed as u64).sum()
    }
}

/// Trailing moving average: element `i` averages the inputs in
/// `[i + 1 - window, i]`, truncated at the start of the series.
pub fn moving_average(xs: &[f64], window: usize) -> Vec<f64> {
    assert!(window > 0);
    let mut out = Vec::with_capacity(xs.len());
    let mut acc = 0.0;
    for i in 0..xs.len() {
        acc += xs[i];
        if i >= window {
            acc -= xs[i - window];
        }
        let n = (i + 1).min(window);
        out.push(acc / n as f64);
    }
    out
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

/// Per-agent summary rows for the whole run.
pub fn summarize(run: &RunResult) -> Vec<AgentStats> {
    (0..run.n_agents())
        .map(|agent_id| {
            let successes = run
                .episodes
                .iter()
                .filter(|e| e.agents[agent_id].success)
                .count();
            AgentStats {
                agent_id,
                successes,
                success_rate: run.agent_success_rate(agent_id),
                steps: run.steps_stats(agent_id),
            }
        })
        .collect()
}

/// Renders the per-episode, per-agent metrics table. One row per
/// (episode, agent); `steps_to_goal` is left empty on failure; the smoothed
/// system reward is repeated on each agent row of its episode.
pub fn render_metrics_csv(run: &RunResult) -> String {
    let smoothed = run.smoothed_system_reward();
    let mut out = String::new();
    out.push_str("episode,agent_id,success,steps_to_goal,episodic_reward,smoothed_system_reward\n");
    for (e, ep) in run.episodes.iter().enumerate() {
        for (a, agent) in ep.agents.iter().enumerate() {
            let _ = write!(out, "{},{},{},", e, a, u8::from(agent.success));
            if let Some(steps) = agent.steps_to_goal {
                let _ = write!(out, "{steps}");
            }
            let _ = writeln!(out, ",{},{}", agent.episodic_reward, smoothed[e]);
        }
    }
    out
}

pub fn write_metrics_csv(run: &RunResult, path: &Path) -> io::Result<()> {
    fs::write(path, render_metrics_csv(run))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ep(rewards: &[f64], steps: &[Option<u32>]) -> EpisodeMetrics {
        let agents = rewards
            .iter()
            .zip(steps)
            .map(|(&r, &s)| AgentEpisode {
                success: s.is_some(),
                steps_to_goal: s,
                episodic_reward: r,
            })
            .collect();
        let executed = steps.iter().flatten().copied().max().unwrap_or(7);
        EpisodeMetrics::new(agents, executed)
    }

    #[test]
    fn episode_aggregates() {
        let e = ep(&[1.0, 3.0], &[Some(4), None]);
        assert!(!e.all_succeeded);
        assert_eq!(e.mean_reward, 2.0);
        let e = ep(&[1.0, 1.0], &[Some(2), Some(3)]);
        assert!(e.all_succeeded);
    }

    #[test]
    fn moving_average_hand_values() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(moving_average(&xs, 2), vec![1.0, 1.5, 2.5, 3.5]);
        assert_eq!(moving_average(&xs, 10), vec![1.0, 1.5, 2.0, 2.5]);
        assert_eq!(moving_average(&xs, 1), xs.to_vec());
    }

    #[test]
    fn summarize_matches_hand_statistics() {
        // All successes at 10 steps: 10 +- 0.
        let run = RunResult {
            episodes: (0..4).map(|_| ep(&[0.5], &[Some(10)])).collect(),
        };
        let stats = summarize(&run);
        let s = stats[0].steps.unwrap();
        assert_eq!((s.mean, s.std, s.median), (10.0, 0.0, 10.0));
        assert_eq!(stats[0].success_rate, 1.0);

        // Two successes at {100, 200}: 150 +- 50 (population std).
        let run = RunResult {
            episodes: vec![
                ep(&[0.1], &[Some(100)]),
                ep(&[0.1], &[Some(200)]),
                ep(&[0.0], &[None]),
            ],
        };
        let stats = summarize(&run);
        assert_eq!(stats[0].successes, 2);
        let s = stats[0].steps.unwrap();
        assert_eq!((s.mean, s.std, s.median), (150.0, 50.0, 150.0));
        assert!((stats[0].success_rate - 2.0 / 3.0).abs() < 1e-15);

        // Zero successes: steps absent, not zero.
        let run = RunResult {
            episodes: vec![ep(&[0.0], &[None])],
        };
        assert_eq!(summarize(&run)[0].steps, None);
    }

    #[test]
    fn system_rates_and_windows() {
        let run = RunResult {
            episodes: vec![
                ep(&[1.0, 1.0], &[Some(1), Some(2)]),
                ep(&[0.0, 2.0], &[None, Some(5)]),
                ep(&[3.0, 1.0], &[Some(2), Some(2)]),
            ],
        };
        assert!((run.system_success_rate() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(run.agent_success_rate(0), 2.0 / 3.0);
        assert_eq!(run.agent_success_rate(1), 1.0);
        // Mean rewards: 1.0, 1.0, 2.0; window-50 smoothing keeps the
        // running mean: 1.0, 1.0, 4/3.
        let smoothed = run.smoothed_system_reward();
        assert!((smoothed[2] - 4.0 / 3.0).abs() < 1e-15);
        assert!((run.final_window_mean_smoothed(2) - (1.0 + 4.0 / 3.0) / 2.0).abs() < 1e-15);
        assert_eq!(run.total_env_steps(), 2 + 5 + 2);
    }

    #[test]
    fn csv_layout_is_frozen() {
        let run = RunResult {
            episodes: vec![
                ep(&[1.5, -0.25], &[Some(3), None]),
                ep(&[2.0, 0.5], &[Some(1), Some(4)]),
            ],
        };
        let expected = "\
episode,agent_id,success,steps_to_goal,episodic_reward,smoothed_system_reward
0,0,1,3,1.5,0.625
0,1,0,,-0.25,0.625
1,0,1,1,2,0.9375
1,1,1,4,0.5,0.9375
";
        assert_eq!(render_metrics_csv(&run), expected);
    }

    #[test]
    fn csv_write_round_trips_bytes() {
        let run = RunResult {
            episodes: vec![ep(&[0.1], &[Some(2)])],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.csv");
        write_metrics_csv(&run, &path).unwrap();
        let a = std::fs::read(&path).unwrap();
        write_metrics_csv(&run, &path).unwrap();
        assert_eq!(a, std::fs::read(&path).unwrap());
        assert_eq!(String::from_utf8(a).unwrap(), render_metrics_csv(&run));
    }
}
