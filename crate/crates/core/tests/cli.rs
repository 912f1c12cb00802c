//! End-to-end tests of the `gridmarl` binary: exit codes, artifact layout,
//! config precedence, and the eval/map-check surfaces.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gridmarl::agent::{ActorCritic, AgentConfig};
use gridmarl::grid::{self, ActionKind, GridMap};
use gridmarl::orchestrator::{agent_seed, save_checkpoints};

const BIN: &str = env!("CARGO_BIN_EXE_gridmarl");

const TINY_MAP: &str = "@assign a=0\na....\n.....\n.....\n.....\n....0\n";

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_str(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr_str(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

/// Writes the standard tiny fixture: a 5x5 empty map and a config for a
/// 3-episode, 5-step run with a small batch.
fn write_tiny_fixture(dir: &Path) {
    fs::write(dir.join("tiny.map"), TINY_MAP).unwrap();
    fs::write(
        dir.join("cfg.toml"),
        "[scenario]\nmap = \"tiny.map\"\nagents = 1\nepisodes = 3\nmax_steps = 5\n\n[agent]\nbatch_size = 4\n",
    )
    .unwrap();
}

#[test]
fn train_writes_exactly_the_manifest_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    write_tiny_fixture(dir.path());
    let out = run_in(
        dir.path(),
        &["train", "--config", "cfg.toml", "--seed", "9", "--out", "out1"],
    );
    assert_eq!(code(&out), 0, "stderr: {}", stderr_str(&out));

    let manifest: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    let mut listed: Vec<String> = manifest["artifacts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_owned())
        .collect();
    listed.sort();
    let mut on_disk: Vec<String> = fs::read_dir(dir.path().join("out1"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    on_disk.sort();
    assert_eq!(listed, on_disk, "output dir contains exactly the listed files");
    assert_eq!(manifest["resolved_config"]["seed"], 9);

    // Every defaulted hyperparameter is echoed in summary.json.
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out1/summary.json")).unwrap())
            .unwrap();
    let cfg = &summary["config"];
    for key in ["gamma", "beta", "tau", "batch_size", "buffer_capacity", "actor_lr", "critic_lr"] {
        assert!(!cfg["agent"][key].is_null(), "agent.{key} echoed");
    }
    assert!((cfg["coordination"]["alpha"].as_f64().unwrap() - 0.1).abs() < 1e-15);
    assert!((cfg["reward"]["lambda_stay"].as_f64().unwrap() - 0.5).abs() < 1e-15);
    assert_eq!(cfg["agent_type"], "A1");
    assert_eq!(cfg["seed"], 9);
}

#[test]
fn flags_override_file_overrides_preset() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("cfg.toml"),
        "[scenario]\npreset = \"s1\"\nepisodes = 2\nmax_steps = 3\n\n[agent]\nbatch_size = 4\n",
    )
    .unwrap();
    let out = run_in(
        dir.path(),
        &["train", "--config", "cfg.toml", "--episodes", "1", "--out", "o"],
    );
    assert_eq!(code(&out), 0, "stderr: {}", stderr_str(&out));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("o/summary.json")).unwrap())
            .unwrap();
    let cfg = &summary["config"];
    assert_eq!(cfg["scenario"], "s1");
    assert_eq!(cfg["n_agents"], 3, "agent count comes from the preset");
    assert_eq!(cfg["max_steps"], 3, "file overrides the preset budget");
    assert_eq!(cfg["episodes"], 1, "flag overrides the file");
    assert_eq!(cfg["agent"]["batch_size"], 4);
}

#[test]
fn missing_map_file_exits_2_with_path_in_message() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("cfg.toml"),
        "[scenario]\nmap = \"gone.map\"\nagents = 1\nepisodes = 1\nmax_steps = 1\n",
    )
    .unwrap();
    let out = run_in(dir.path(), &["train", "--config", "cfg.toml"]);
    assert_eq!(code(&out), 2);
    assert!(
        stderr_str(&out).contains("gone.map"),
        "path appears in the diagnostic: {}",
        stderr_str(&out)
    );
}

#[test]
fn config_and_input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    write_tiny_fixture(dir.path());

    let unknown_preset = run_in(dir.path(), &["train", "--scenario", "s9"]);
    assert_eq!(code(&unknown_preset), 2);

    let bad_type = run_in(
        dir.path(),
        &["train", "--config", "cfg.toml", "--agent-type", "A9"],
    );
    assert_eq!(code(&bad_type), 2);

    let zero_episodes = run_in(
        dir.path(),
        &["train", "--scenario", "s1", "--episodes", "0"],
    );
    assert_eq!(code(&zero_episodes), 2);

    let usage = run_in(dir.path(), &["train", "--bogus-flag"]);
    assert_eq!(code(&usage), 2);

    let no_map = run_in(dir.path(), &["train"]);
    assert_eq!(code(&no_map), 2);

    fs::write(dir.path().join("typo.toml"), "[agent]\ngama = 0.5\n").unwrap();
    let unknown_key = run_in(dir.path(), &["train", "--config", "typo.toml"]);
    assert_eq!(code(&unknown_key), 2);
    assert!(stderr_str(&unknown_key).contains("gama"));
}

#[test]
fn equal_seeds_give_byte_identical_metrics() {
    let dir = tempfile::tempdir().unwrap();
    write_tiny_fixture(dir.path());
    for out_dir in ["a", "b"] {
        let out = run_in(
            dir.path(),
            &["train", "--config", "cfg.toml", "--seed", "3", "--out", out_dir],
        );
        assert_eq!(code(&out), 0, "stderr: {}", stderr_str(&out));
    }
    let a = fs::read(dir.path().join("a/metrics.csv")).unwrap();
    let b = fs::read(dir.path().join("b/metrics.csv")).unwrap();
    assert_eq!(a, b, "same seed, same bytes");

    let out = run_in(
        dir.path(),
        &["train", "--config", "cfg.toml", "--seed", "4", "--out", "c"],
    );
    assert_eq!(code(&out), 0);
    let c = fs::read(dir.path().join("c/metrics.csv")).unwrap();
    assert_ne!(a, c, "different seed, different trajectory");
}

#[test]
fn eval_zero_episodes_gives_empty_summary_and_exit_0() {
    let dir = tempfile::tempdir().unwrap();
    write_tiny_fixture(dir.path());
    let train = run_in(
        dir.path(),
        &["train", "--config", "cfg.toml", "--out", "out"],
    );
    assert_eq!(code(&train), 0);
    let out = run_in(
        dir.path(),
        &[
            "eval",
            "--checkpoints",
            "out",
            "--config",
            "cfg.toml",
            "--episodes",
            "0",
        ],
    );
    assert_eq!(code(&out), 0, "stderr: {}", stderr_str(&out));
    let summary: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(summary["episodes"], 0);
    assert!(summary["per_agent"].as_array().unwrap().is_empty());
    assert!(summary["system_success_rate"].is_null());
}

#[test]
fn eval_missing_checkpoints_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    write_tiny_fixture(dir.path());
    let out = run_in(
        dir.path(),
        &["eval", "--checkpoints", "nope", "--config", "cfg.toml"],
    );
    assert_eq!(code(&out), 2);
}

#[test]
fn eval_architecture_mismatch_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    write_tiny_fixture(dir.path());
    // Checkpoints built for the one-goal tiny map (state dim 3) cannot drive
    // agents on the two-goal small map (state dim 4).
    let train = run_in(
        dir.path(),
        &["train", "--config", "cfg.toml", "--out", "out"],
    );
    assert_eq!(code(&train), 0);
    let out = run_in(
        dir.path(),
        &[
            "eval",
            "--checkpoints",
            "out",
            "--scenario",
            "s1",
            "--episodes",
            "1",
            "--max-steps",
            "5",
        ],
    );
    assert_eq!(code(&out), 2, "stderr: {}", stderr_str(&out));
}

/// Pure random-policy rollout: the baseline oracle for untrained behaviour.
fn random_walk_success_rate(map: &GridMap, t_max: u32, episodes: u32, seed: u64) -> f64 {
    let spawn = map.spawns()[0];
    let goal = map.goals()[spawn.goal];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut successes = 0u32;
    for _ in 0..episodes {
        let mut pos = spawn.position;
        if pos == goal {
            successes += 1;
            continue;
        }
        for _ in 0..t_max {
            let action = ActionKind::from_index(rng.gen_range(0..5)).unwrap();
            pos = grid::transition(map, pos, action).position;
            if pos == goal {
                successes += 1;
                break;
            }
        }
    }
    f64::from(successes) / f64::from(episodes)
}

#[test]
fn eval_fresh_agent_is_no_better_than_random_walk() {
    let dir = tempfile::tempdir().unwrap();
    let map = grid::parse_map_file(gridmarl::orchestrator::SMALL_MAP).unwrap();
    let spawn = map.spawns()[0];
    let fresh = ActorCritic::new(
        2 + map.goal_count(),
        spawn.goal,
        AgentConfig::default(),
        agent_seed(11, 0),
    )
    .unwrap();
    save_checkpoints(&dir.path().join("chk"), std::slice::from_ref(&fresh)).unwrap();

    fs::write(
        dir.path().join("eval.toml"),
        format!(
            "[scenario]\nmap = \"{}\"\nagents = 1\nepisodes = 1\nmax_steps = 50\n",
            "map.map"
        ),
    )
    .unwrap();
    fs::write(dir.path().join("map.map"), gridmarl::orchestrator::SMALL_MAP).unwrap();

    let out = run_in(
        dir.path(),
        &[
            "eval",
            "--checkpoints",
            "chk",
            "--config",
            "eval.toml",
            "--episodes",
            "40",
        ],
    );
    assert_eq!(code(&out), 0, "stderr: {}", stderr_str(&out));
    let summary: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    let fresh_rate = summary["per_agent"][0]["success_rate"].as_f64().unwrap();

    let baseline = random_walk_success_rate(&map, 50, 2000, 11);
    assert!(
        baseline < 0.9,
        "baseline sanity: the task is not trivial under random walk (got {baseline})"
    );
    assert!(
        fresh_rate <= baseline + 0.25,
        "untrained greedy policy ({fresh_rate}) should not beat random walk ({baseline}) by a wide margin"
    );
}

#[test]
fn map_check_reports_rooms_and_warnings() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        Path::new(env!("CARGO_MANIFEST_DIR")),
        &["map-check", "../../maps/small_10x10.map"],
    );
    assert_eq!(code(&out), 0, "stderr: {}", stderr_str(&out));
    let text = stdout_str(&out);
    assert!(text.contains("rooms: 4"), "got: {text}");
    assert!(text.contains("warnings: none"), "got: {text}");
    assert!(text.contains("dimensions: 10x10"), "got: {text}");

    // A spawn sharing its single room with its own goal violates the layout
    // rule and must be flagged.
    fs::write(dir.path().join("bad.map"), "@assign a=0\na...0\n").unwrap();
    let out = run_in(dir.path(), &["map-check", "bad.map"]);
    assert_eq!(code(&out), 0);
    assert!(stdout_str(&out).contains("warning"), "got: {}", stdout_str(&out));

    fs::write(dir.path().join("ragged.map"), "@assign a=0\na..\n....0\n").unwrap();
    let out = run_in(dir.path(), &["map-check", "ragged.map"]);
    assert_eq!(code(&out), 2);

    let out = run_in(dir.path(), &["map-check", "missing.map"]);
    assert_eq!(code(&out), 2);
    assert!(stderr_str(&out).contains("missing.map"));
}
