use std::path::Path;
use std::process::{Command, Output};

use reward_reconcile::SessionConfig;
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_reward-reconcile"))
}

fn run(cmd: &mut Command) -> Output {
    let out = cmd.output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    out
}

fn quick_config(dir: &Path) -> std::path::PathBuf {
    let mut cfg = SessionConfig::default();
    cfg.planner.scenarios = 40;
    cfg.planner.depth = 1;
    cfg.belief_particles = 500;
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
    path
}

#[test]
fn shipped_session_config_is_the_default() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("config/session_default.json");
    assert_eq!(SessionConfig::load(&path).unwrap(), SessionConfig::default());
}

#[test]
fn simulate_then_reconcile() {
    let dir = tempfile::tempdir().unwrap();
    let config = quick_config(dir.path());
    let session = dir.path().join("session.json");
    run(bin().args(["simulate", "--seed", "3", "--steps", "6", "--config"]).arg(&config).arg("--out").arg(&session));
    let export: Value = serde_json::from_str(&std::fs::read_to_string(&session).unwrap()).unwrap();
    assert_eq!(export["steps"].as_array().unwrap().len(), 6);
    assert_eq!(export["seed"], 3);

    let out = run(bin().args(["reconcile", "--timestep", "4", "--user-action", "2,1", "--session"]).arg(&session));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["t"], 4);
    assert_eq!(v["a_h"], serde_json::json!([2, 1]));
    assert_eq!(v["a_a"], export["steps"][3]["action"], "simulate follows the recommendation");
    assert!(v["reconcile_result"]["phi_hat"].is_array());
    assert!(v["explanation"].is_array());

    // reconciling is reproducible
    let again = run(bin().args(["reconcile", "--timestep", "4", "--user-action", "2,1", "--session"]).arg(&session));
    assert_eq!(out.stdout, again.stdout);
}

#[test]
fn simulate_to_stdout_matches_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = quick_config(dir.path());
    let file = dir.path().join("s.json");
    run(bin().args(["simulate", "--seed", "1", "--steps", "3", "--config"]).arg(&config).arg("--out").arg(&file));
    let stdout = run(bin().args(["simulate", "--seed", "1", "--steps", "3", "--config"]).arg(&config)).stdout;
    assert_eq!(stdout, std::fs::read(&file).unwrap());
}

#[test]
fn reconcile_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let config = quick_config(dir.path());
    let session = dir.path().join("session.json");
    run(bin().args(["simulate", "--seed", "2", "--steps", "2", "--config"]).arg(&config).arg("--out").arg(&session));
    for (t, action) in [("9", "2,1"), ("0", "2,1"), ("2", "5,1"), ("2", "a")] {
        let out = bin()
            .args(["reconcile", "--timestep", t, "--user-action", action, "--session"])
            .arg(&session)
            .output()
            .unwrap();
        assert!(!out.status.success(), "t={t} action={action}");
    }
    let missing = bin().args(["simulate", "--config", "/nonexistent.json"]).output().unwrap();
    assert!(!missing.status.success());
}

#[test]
fn serve_answers_over_tcp() {
    use std::io::{BufRead, BufReader, Read, Write};

    let mut child = bin()
        .args(["serve", "--port", "0"])
        .stderr(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stderr.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().rsplit(' ').next().unwrap().replace("0.0.0.0", "127.0.0.1");

    let mut stream = std::net::TcpStream::connect(&addr).unwrap();
    let body = r#"{"seed": 5}"#;
    write!(
        stream,
        "POST /sessions HTTP/1.1\r\nHost: x\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )
    .unwrap();
    let mut response = String::new();
    stream.read_to_string(&mut response).unwrap();
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(response.starts_with("HTTP/1.1 201"), "{response}");
    assert!(response.contains("\"timestep\":1"));
}
