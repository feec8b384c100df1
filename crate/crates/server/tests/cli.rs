mod common;

use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use common::*;

fn ugi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ugi")).args(args).output().unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ugi-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn path(p: &PathBuf) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_exit_codes() {
    let ok = ugi(&["validate", path(&fixture("grid4x4.json"))]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    let dangling = ugi(&["validate", path(&fixture("dangling_ref.json"))]);
    assert_eq!(dangling.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&dangling.stderr).contains("DANGLING_REF"));

    let broken = scratch("broken.json");
    std::fs::write(&broken, "{\"roads\": [").unwrap();
    let out = ugi(&["validate", path(&broken)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("PARSE_ERROR"));

    let missing = ugi(&["validate", "/nonexistent/map.json"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn run_zero_steps_prints_empty_summary() {
    let out = ugi(&["run", path(&fixture("sample_city.json")), "--steps", "0"]);
    assert_eq!(out.status.code(), Some(0));
    let s: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(s["steps"], 0);
    assert_eq!(s["trips_completed"], 0);
    assert_eq!(s["events"], 0);
}

#[test]
fn genpop_then_validate_then_kg() {
    let out_map = scratch("pop.json");
    let out = ugi(&["genpop", path(&fixture("grid4x4.json")), "--n", "50", "--seed", "3", "--days", "2", "--out", path(&out_map)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(ugi(&["validate", path(&out_map)]).status.code(), Some(0));
    let b = ugi_core::ingest::load_map_file(&out_map).unwrap();
    assert_eq!(b.persons.len(), 50);
    assert_eq!(b.metadata.horizon_days, 2);

    let kg_out = scratch("kg.txt");
    assert_eq!(ugi(&["kg", path(&fixture("kg20.json")), "--out", path(&kg_out)]).status.code(), Some(0));
    let text = std::fs::read_to_string(&kg_out).unwrap();
    assert!(text.lines().any(|l| l == "aoi:600000000 borderBy aoi:600000001"), "{}", &text[..200]);

    let no_res = ugi(&["genpop", path(&fixture("kg20.json")), "--n", "5", "--out", path(&scratch("x.json"))]);
    assert_eq!(no_res.status.code(), Some(0), "kg20 has residential AOIs");
}

#[test]
fn run_stats_are_byte_identical() {
    let run = |name: &str| {
        let stats = scratch(name);
        let out = ugi(&[
            "run",
            path(&fixture("grid4x4.json")),
            "--persons",
            "150",
            "--seed",
            "11",
            "--start",
            "07:30",
            "--steps",
            "2400",
            "--tax",
            "0.1",
            "--stats-out",
            path(&stats),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        (std::fs::read(&stats).unwrap(), out.stdout)
    };
    let (a, sa) = run("a.ndjson");
    let (b, sb) = run("b.ndjson");
    assert!(!a.is_empty());
    assert_eq!(a, b);
    assert_eq!(sa, sb);
    let text = String::from_utf8(a).unwrap();
    assert!(text.lines().any(|l| l.contains("\"kind\":\"trip\"")));
    assert!(text.lines().any(|l| l.contains("\"kind\":\"road_flow\"")));
}

#[test]
fn repl_against_a_served_fixture() {
    let server = sample_server();
    let mut child = Command::new(env!("CARGO_BIN_EXE_ugi"))
        .args(["repl", "--url", &server.url()])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    writeln!(child.stdin.as_mut().unwrap(), "{AOI_SENTENCE}\n\n{SET_SENTENCE}\nTeleport agent 5").unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], AOI_RESPONSE);
    assert_eq!(lines[1], "OK.");
    assert!(lines[2].starts_with("Error: PARSE_ERROR:"));
    assert_eq!(lines.len(), 3);
}

#[test]
fn serve_honours_ugi_port() {
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let mut child = Command::new(env!("CARGO_BIN_EXE_ugi"))
        .args(["serve", path(&fixture("sample_city.json")), "--port", "1"])
        .env("UGI_PORT", port.to_string())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let url = format!("http://127.0.0.1:{port}/aois/500000000");
    let t0 = Instant::now();
    let body = loop {
        if let Ok(r) = reqwest::blocking::get(&url) {
            break r.json::<serde_json::Value>().unwrap();
        }
        assert!(t0.elapsed() < Duration::from_secs(10), "server never came up");
        std::thread::sleep(Duration::from_millis(50));
    };
    child.kill().unwrap();
    let _ = child.wait();
    assert_eq!(body["population"], 1219);
}
