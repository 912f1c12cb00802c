//! Command-line surface: `train`, `eval`, and `map-check`.
//!
//! Configuration is resolved in three layers — built-in defaults (including
//! the scenario presets), then a TOML config file, then command-line flags —
//! with later layers winning. The resolved configuration, every defaulted
//! value included, is echoed into `summary.json` so a run is auditable from
//! its artifacts alone.
//!
//! Exit codes are a stable contract for scripting: 0 on success, 1 for
//! runtime failures (I/O mid-run), 2 for configuration or input errors.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::coordination::AgentType;
use crate::grid::{self, GridMap, Position};
use crate::metrics::{self, AgentStats};
use crate::orchestrator::{
    self, evaluate, load_population_checkpoints, run_scenario, OrchestratorError, ScenarioConfig,
};

#[derive(Parser)]
#[command(name = "gridmarl", version, about = "Decentralized multi-agent actor-critic gridworld trainer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a population of agents and write metrics, summary, and checkpoints.
    Train(TrainArgs),
    /// Evaluate saved checkpoints with the greedy policy (no learning).
    Eval(EvalArgs),
    /// Parse a map, report its room structure, and flag layout-rule violations.
    MapCheck(MapCheckArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// TOML config file (sections: scenario, environment, agent, coordination).
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Scenario preset: s1, s2, or s3.
    #[arg(long, value_name = "NAME")]
    scenario: Option<String>,
    /// Agent type A1..A5 (collaboration/goal-awareness/range per Table 1).
    #[arg(long, value_name = "TYPE")]
    agent_type: Option<String>,
    /// Master seed; all agent streams derive from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of training episodes E.
    #[arg(long)]
    episodes: Option<usize>,
    /// Per-episode step budget T.
    #[arg(long)]
    max_steps: Option<u32>,
    /// Merge dampening factor alpha in [0, 1].
    #[arg(long)]
    alpha: Option<f64>,
    /// Observation range c (Chebyshev radius) for range-limited agent types.
    #[arg(long)]
    range: Option<u32>,
    /// Output directory for metrics.csv, summary.json, and checkpoints.
    #[arg(long, value_name = "DIR", default_value = "run")]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Directory holding agent{i}_{net}.gmrl checkpoint files.
    #[arg(long, value_name = "DIR")]
    checkpoints: PathBuf,
    /// TOML config file describing the map and population.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Scenario preset: s1, s2, or s3.
    #[arg(long, value_name = "NAME")]
    scenario: Option<String>,
    /// Number of greedy evaluation episodes.
    #[arg(long, default_value_t = 100)]
    episodes: usize,
    /// Per-episode step budget T.
    #[arg(long)]
    max_steps: Option<u32>,
}

#[derive(Args)]
struct MapCheckArgs {
    /// Map file to inspect.
    map: PathBuf,
}

/// Errors split by exit status: configuration/input problems exit 2,
/// failures during an otherwise valid run exit 1.
enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    fn config(e: impl Display) -> CliError {
        CliError::Config(e.to_string())
    }

    fn runtime(e: impl Display) -> CliError {
        CliError::Runtime(e.to_string())
    }
}

/// Entry point behind `fn main`; returns the process exit code.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(args) => cmd_train(&args),
        Command::Eval(args) => cmd_eval(&args),
        Command::MapCheck(args) => cmd_map_check(&args.map),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

/// `[scenario]` section of the config file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioSection {
    /// Preset name (s1/s2/s3); flags may override it.
    preset: Option<String>,
    /// Path to a map file; replaces the preset's built-in map.
    map: Option<PathBuf>,
    agents: Option<usize>,
    episodes: Option<usize>,
    max_steps: Option<u32>,
    agent_type: Option<String>,
    seed: Option<u64>,
}

/// `[environment]` section: reward shaping and observation range.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnvironmentSection {
    lambda_stay: Option<f64>,
    range: Option<u32>,
}

/// `[agent]` section: learner hyperparameters.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct AgentSection {
    gamma: Option<f64>,
    beta: Option<f64>,
    tau: Option<f64>,
    batch_size: Option<usize>,
    buffer_capacity: Option<usize>,
    actor_lr: Option<f64>,
    critic_lr: Option<f64>,
}

/// `[coordination]` section: merge dampening.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoordinationSection {
    alpha: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default)]
    scenario: ScenarioSection,
    #[serde(default)]
    environment: EnvironmentSection,
    #[serde(default)]
    agent: AgentSection,
    #[serde(default)]
    coordination: CoordinationSection,
}

/// Command-line values that override the config file; shared by train/eval.
#[derive(Debug, Default)]
struct Overrides<'a> {
    config: Option<&'a Path>,
    scenario: Option<&'a str>,
    agent_type: Option<&'a str>,
    seed: Option<u64>,
    episodes: Option<usize>,
    max_steps: Option<u32>,
    alpha: Option<f64>,
    range: Option<u32>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn parse_agent_type(s: &str) -> Result<AgentType, CliError> {
    s.parse()
        .map_err(|_| CliError::Config(format!("unknown agent type {s:?} (expected A1..A5)")))
}

/// Builds the effective ScenarioConfig: defaults, then preset, then config
/// file, then flags. Without a preset, the file must supply the map, agent
/// count, and budgets (flags can fill the budgets).
fn resolve_config(ov: &Overrides) -> Result<ScenarioConfig, CliError> {
    let file: Option<FileConfig> = match ov.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Config(format!("cannot read config file {}: {e}", path.display()))
            })?;
            Some(toml::from_str(&text).map_err(|e| {
                CliError::Config(format!("config file {}: {e}", path.display()))
            })?)
        }
        None => None,
    };
    let file = file.unwrap_or_default();

    let preset_name = ov.scenario.map(str::to_owned).or_else(|| file.scenario.preset.clone());
    let mut cfg = match &preset_name {
        Some(name) => ScenarioConfig::preset(name).ok_or_else(|| {
            CliError::Config(format!("unknown scenario preset {name:?} (expected s1, s2, or s3)"))
        })?,
        None => ScenarioConfig {
            scenario: None,
            map_label: String::new(),
            map_text: String::new(),
            n_agents: 0,
            episodes: 0,
            max_steps: 0,
            agent_type: AgentType::A1,
            range_radius: 2,
            seed: 0,
            agent: Default::default(),
            coordination: Default::default(),
            reward: Default::default(),
        },
    };

    // Config-file layer.
    if let Some(path) = &file.scenario.map {
        cfg.map_label = path.display().to_string();
        cfg.map_text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read map file {}: {e}", path.display()))
        })?;
    }
    set(&mut cfg.n_agents, file.scenario.agents);
    set(&mut cfg.episodes, file.scenario.episodes);
    set(&mut cfg.max_steps, file.scenario.max_steps);
    if let Some(at) = &file.scenario.agent_type {
        cfg.agent_type = parse_agent_type(at)?;
    }
    set(&mut cfg.seed, file.scenario.seed);
    set(&mut cfg.reward.lambda_stay, file.environment.lambda_stay);
    set(&mut cfg.range_radius, file.environment.range);
    set(&mut cfg.agent.gamma, file.agent.gamma);
    set(&mut cfg.agent.beta, file.agent.beta);
    set(&mut cfg.agent.tau, file.agent.tau);
    set(&mut cfg.agent.batch_size, file.agent.batch_size);
    set(&mut cfg.agent.buffer_capacity, file.agent.buffer_capacity);
    set(&mut cfg.agent.actor_lr, file.agent.actor_lr);
    set(&mut cfg.agent.critic_lr, file.agent.critic_lr);
    set(&mut cfg.coordination.alpha, file.coordination.alpha);

    // Flag layer.
    if let Some(at) = ov.agent_type {
        cfg.agent_type = parse_agent_type(at)?;
    }
    set(&mut cfg.seed, ov.seed);
    set(&mut cfg.episodes, ov.episodes);
    set(&mut cfg.max_steps, ov.max_steps);
    set(&mut cfg.coordination.alpha, ov.alpha);
    set(&mut cfg.range_radius, ov.range);

    if cfg.map_text.is_empty() {
        return Err(CliError::Config(
            "no map configured: pass --scenario or set [scenario].map in a config file".into(),
        ));
    }
    if cfg.n_agents == 0 && preset_name.is_none() {
        return Err(CliError::Config(
            "[scenario].agents is required when no preset is used".into(),
        ));
    }
    if cfg.episodes == 0 && preset_name.is_none() {
        return Err(CliError::Config(
            "episodes not configured: set [scenario].episodes or pass --episodes".into(),
        ));
    }
    if cfg.max_steps == 0 && preset_name.is_none() {
        return Err(CliError::Config(
            "max_steps not configured: set [scenario].max_steps or pass --max-steps".into(),
        ));
    }
    Ok(cfg)
}

/// Everything needed to audit a run: where the config came from, what it
/// resolved to, and which files the run produced.
#[derive(serde::Serialize)]
struct RunManifest<'a> {
    config_path: Option<String>,
    output_dir: String,
    started_unix: u64,
    finished_unix: u64,
    resolved_config: &'a ScenarioConfig,
    artifacts: Vec<String>,
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn cmd_train(args: &TrainArgs) -> Result<(), CliError> {
    let ov = Overrides {
        config: args.config.as_deref(),
        scenario: args.scenario.as_deref(),
        agent_type: args.agent_type.as_deref(),
        seed: args.seed,
        episodes: args.episodes,
        max_steps: args.max_steps,
        alpha: args.alpha,
        range: args.range,
    };
    let cfg = resolve_config(&ov)?;
    cfg.load_map().map_err(CliError::config)?;

    let started = unix_now();
    let run = run_scenario(&cfg).map_err(CliError::runtime)?;
    let artifacts = orchestrator::write_run_outputs(&args.out, &run).map_err(CliError::runtime)?;
    let manifest = RunManifest {
        config_path: args.config.as_ref().map(|p| p.display().to_string()),
        output_dir: args.out.display().to_string(),
        started_unix: started,
        finished_unix: unix_now(),
        resolved_config: &run.config,
        artifacts: artifacts
            .iter()
            .map(|p| {
                p.file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_else(|| p.display().to_string())
            })
            .collect(),
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&manifest).map_err(CliError::runtime)?
    );
    Ok(())
}

/// Greedy-evaluation report printed by `eval`.
#[derive(serde::Serialize)]
struct EvalSummary {
    checkpoints: String,
    map: String,
    n_agents: usize,
    episodes: usize,
    max_steps: u32,
    system_success_rate: Option<f64>,
    per_agent: Vec<AgentStats>,
}

fn cmd_eval(args: &EvalArgs) -> Result<(), CliError> {
    let ov = Overrides {
        config: args.config.as_deref(),
        scenario: args.scenario.as_deref(),
        // Budgets may legitimately be zero here (eval allows zero episodes),
        // so bypass the train-side zero checks by passing them post-resolve.
        episodes: Some(args.episodes.max(1)),
        max_steps: args.max_steps,
        ..Default::default()
    };
    let mut cfg = resolve_config(&ov)?;
    cfg.episodes = args.episodes;
    let map = parse_map_checked(&cfg).map_err(CliError::config)?;
    let agents = load_population_checkpoints(&args.checkpoints, &map, cfg.n_agents, cfg.agent)
        .map_err(|e| {
            CliError::Config(format!(
                "loading checkpoints from {}: {e}",
                args.checkpoints.display()
            ))
        })?;
    let result = evaluate(&map, &agents, cfg.episodes, cfg.max_steps, &cfg.reward)
        .map_err(CliError::config)?;
    let summary = EvalSummary {
        checkpoints: args.checkpoints.display().to_string(),
        map: cfg.map_label.clone(),
        n_agents: cfg.n_agents,
        episodes: cfg.episodes,
        max_steps: cfg.max_steps,
        system_success_rate: (cfg.episodes > 0).then(|| result.system_success_rate()),
        per_agent: metrics::summarize(&result),
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&summary).map_err(CliError::runtime)?
    );
    Ok(())
}

/// Map parse + config cross-validation with a budget of at least one episode
/// already enforced by the caller where required.
fn parse_map_checked(cfg: &ScenarioConfig) -> Result<GridMap, OrchestratorError> {
    let map = grid::parse_map_file(&cfg.map_text)?;
    if cfg.n_agents == 0 || cfg.n_agents > map.spawns().len() {
        return Err(OrchestratorError::BadConfig(format!(
            "n_agents = {} but map {:?} defines {} spawn markers",
            cfg.n_agents,
            cfg.map_label,
            map.spawns().len()
        )));
    }
    Ok(map)
}

fn cmd_map_check(path: &Path) -> Result<(), CliError> {
    let map = grid::load_map(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let rooms = grid::decompose_rooms(&map);
    let warnings = grid::room_warnings(&map);

    let (w, h) = (map.width(), map.height());
    let obstacle_count = (0..h)
        .flat_map(|y| (0..w).map(move |x| Position::new(x, y)))
        .filter(|&p| map.is_obstacle(p))
        .count();
    println!("map: {}", path.display());
    println!("dimensions: {w}x{h} ({obstacle_count} obstacle cells)");
    println!(
        "goals: {}",
        map.goals()
            .iter()
            .enumerate()
            .map(|(i, g)| format!("goal{i}@({},{})", g.x, g.y))
            .collect::<Vec<_>>()
            .join(" ")
    );
    println!(
        "spawns: {}",
        map.spawns()
            .iter()
            .enumerate()
            .map(|(i, s)| {
                format!(
                    "{}@({},{})->goal{}",
                    (b'a' + i as u8) as char,
                    s.position.x,
                    s.position.y,
                    s.goal
                )
            })
            .collect::<Vec<_>>()
            .join(" ")
    );
    println!(
        "rooms: {} ({} door cells)",
        rooms.room_count(),
        rooms.doors().len()
    );
    for room in 0..rooms.room_count() {
        let spawns: Vec<String> = map
            .spawns()
            .iter()
            .enumerate()
            .filter(|(_, s)| rooms.room_of(s.position) == Some(room))
            .map(|(i, s)| format!("{}->goal{}", (b'a' + i as u8) as char, s.goal))
            .collect();
        let goals: Vec<String> = map
            .goals()
            .iter()
            .enumerate()
            .filter(|(_, g)| rooms.room_of(**g) == Some(room))
            .map(|(i, _)| format!("goal{i}"))
            .collect();
        println!(
            "room {room}: spawns [{}] goals [{}]",
            spawns.join(", "),
            goals.join(", ")
        );
    }
    if warnings.is_empty() {
        println!("warnings: none");
    } else {
        for wmsg in &warnings {
            println!("warning: {wmsg}");
        }
    }
    Ok(())
}
