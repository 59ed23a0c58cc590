use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .canonicalize()
        .unwrap()
}

fn screen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_screen"))
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("screen.toml");
    let text = format!(
        "corpus = \"{}\"\nstore_root = \"{}\"\n{extra}",
        fixtures().join("resumes").display(),
        dir.join("runs").display()
    );
    fs::write(&path, text).unwrap();
    path
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn run_id(out: &Output) -> String {
    stdout(out)
        .lines()
        .find_map(|l| {
            l.strip_prefix("run ")
                .map(|r| r.split_whitespace().next().unwrap().to_string())
        })
        .expect("run id in output")
}

#[test]
fn run_verify_and_tamper() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let out = screen(&["--config", cfg.to_str().unwrap(), "run"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(stdout(&out).contains("status ok"));
    assert!(stdout(&out).contains("shortlisted 10"));
    let id = run_id(&out);

    let out = screen(&["--config", cfg.to_str().unwrap(), "verify", "--run", &id]);
    assert_eq!(out.status.code(), Some(0));

    let assessments = dir.path().join("runs").join(&id).join("assessments.jsonl");
    let mut text = fs::read_to_string(&assessments).unwrap();
    text.push(' ');
    fs::write(&assessments, text).unwrap();
    let out = screen(&["--config", cfg.to_str().unwrap(), "verify", "--run", &id]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("assessments.jsonl"));
}

#[test]
fn invalid_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "top_k = 0\n");
    let out = screen(&["--config", cfg.to_str().unwrap(), "run"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("top_k"));

    let out = screen(&["run", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn manual_decisions_and_conflict() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "decision_mode = \"manual\"\n");
    let cfg = cfg.to_str().unwrap();
    let out = screen(&["--config", cfg, "run"]);
    assert_eq!(out.status.code(), Some(0));
    let id = run_id(&out);

    let out = screen(&[
        "--config", cfg, "decide", "--run", &id, "--select", "nobody",
    ]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let out = screen(&["--config", cfg, "decide", "--run", &id]);
    assert_eq!(out.status.code(), Some(0));
    let record: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(record["mode"], "auto");
    let chosen = record["selected_ids"][0].as_str().unwrap().to_string();

    let args = [
        "--config",
        cfg,
        "decide",
        "--run",
        &id,
        "--select",
        &chosen,
        "--rationale",
        "agree",
    ];
    assert_eq!(screen(&args).status.code(), Some(0));
    assert_eq!(screen(&args).status.code(), Some(3));
    let mut forced = args.to_vec();
    forced.push("--force");
    assert_eq!(screen(&forced).status.code(), Some(0));
}

#[test]
fn staged_commands_chain() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let cfg = cfg.to_str().unwrap();
    let work = dir.path().join("work");
    let w = work.to_str().unwrap();

    let out = screen(&["--config", cfg, "ingest", "--out", w]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("ingested 20 documents"));

    let records = work.join("records.jsonl");
    let out = screen(&[
        "--config",
        cfg,
        "classify",
        "--input",
        records.to_str().unwrap(),
        "--out",
        w,
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let redacted = work.join("redacted.jsonl");
    let preds = work.join("pred.jsonl");
    let out = screen(&[
        "--config",
        cfg,
        "assess",
        "--input",
        redacted.to_str().unwrap(),
        "--out",
        preds.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("assessed 19 resumes, 0 failed"));

    let gold = fixtures().join("gold_assessments.jsonl");
    let report = work.join("eval.json");
    let out = screen(&[
        "eval",
        "--pred",
        preds.to_str().unwrap(),
        "--gold",
        gold.to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["metrics"]["n"], 19);

    // gold against itself is a perfect score
    let out = screen(&[
        "eval",
        "--pred",
        gold.to_str().unwrap(),
        "--gold",
        gold.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("100.00"), "{}", stdout(&out));
}

#[test]
fn serve_requires_token() {
    let out = Command::new(env!("CARGO_BIN_EXE_screen"))
        .args(["serve", "--port", "0"])
        .env_remove("SCREEN_API_TOKEN")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("SCREEN_API_TOKEN"));
}

fn http_get(port: u16, path: &str, token: &str) -> Option<String> {
    use std::io::{Read, Write};
    let mut stream = std::net::TcpStream::connect(("127.0.0.1", port)).ok()?;
    let req = format!(
        "GET {path} HTTP/1.1\r\nHost: localhost\r\nAuthorization: Bearer {token}\r\nConnection: close\r\n\r\n"
    );
    stream.write_all(req.as_bytes()).ok()?;
    let mut out = String::new();
    stream.read_to_string(&mut out).ok()?;
    Some(out)
}

#[test]
fn serve_answers_over_http() {
    let dir = tempfile::tempdir().unwrap();
    let port = std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let mut child = Command::new(env!("CARGO_BIN_EXE_screen"))
        .args(["serve", "--port", &port.to_string(), "--store"])
        .arg(dir.path())
        .env("SCREEN_API_TOKEN", "tok")
        .spawn()
        .unwrap();
    let mut reply = None;
    for _ in 0..100 {
        reply = http_get(port, "/runs", "tok");
        if reply.is_some() {
            break;
        }
        std::thread::sleep(std::time::Duration::from_millis(50));
    }
    let denied = http_get(port, "/runs", "nope");
    child.kill().unwrap();
    child.wait().unwrap();

    let reply = reply.expect("server came up");
    assert!(reply.starts_with("HTTP/1.1 200"), "{reply}");
    assert!(reply.ends_with("[]"), "{reply}");
    assert!(denied.unwrap().starts_with("HTTP/1.1 401"));
}
