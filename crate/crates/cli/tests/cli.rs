use sensorflow_core::api::DiagnoseResponse;
use sensorflow_core::{fixtures, NetworkDocument, Verdict};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn network(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../networks")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sensorflow"))
        .args(args)
        .env_remove("SENSORFLOW_SERVER")
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn verify_exit_codes() {
    assert_eq!(
        run(&["verify", path(&network("six-vertex.json"))]).status.code(),
        Some(2)
    );
    assert_eq!(run(&["verify", path(&network("pentagon.json"))]).status.code(), Some(0));
    assert_eq!(
        run(&["verify", path(&network("grid5-split.json"))]).status.code(),
        Some(2)
    );
    assert_eq!(
        run(&["verify", path(&network("grid5-tree.json"))]).status.code(),
        Some(0)
    );
    assert_eq!(
        run(&["verify", path(&network("counterexample.json"))]).status.code(),
        Some(2)
    );
    assert_eq!(run(&["verify", "/nonexistent.json"]).status.code(), Some(1));
}

#[test]
fn verify_without_monitors_reports_detached_component() {
    let out = run(&["verify", path(&network("six-vertex.json")), "--monitored", "", "--json"]);
    let report: DiagnoseResponse = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report.components.len(), 1);
    assert!(report.components[0].adjacent.is_empty());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_names_the_cut() {
    let out = run(&["verify", path(&network("six-vertex.json"))]);
    let text = stdout(&out);
    assert!(text.contains("cut {d}"), "{text}");
    assert!(text.contains("overall: not calculable"), "{text}");
}

#[test]
fn solve_reconstructs_the_pentagon() {
    let out = run(&["solve", path(&network("pentagon.json"))]);
    assert!(out.status.success());
    let text = stdout(&out);
    for line in ["S_b", "S_d", "S_f"] {
        assert!(text.contains(line), "{text}");
    }
    assert!(text.contains("-6"), "{text}");
}

#[test]
fn solve_refuses_an_undetermined_flow() {
    let out = run(&["solve", path(&network("six-vertex.json"))]);
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8_lossy(&out.stdout).to_string() + &String::from_utf8_lossy(&out.stderr);
    assert!(text.contains("rows b c are zero"), "{text}");
}

#[test]
fn explain_prints_the_certificate() {
    let out = run(&["explain", path(&network("six-vertex.json")), "--component", "0"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("zero rows: {b, c}"), "{text}");
    assert!(text.contains("rank(F*) <= R - Z = 3"), "{text}");
}

#[test]
fn generate_is_deterministic() {
    let args = [
        "generate",
        "--kind",
        "graph",
        "--n",
        "9",
        "--density",
        "0.3",
        "--centroids",
        "random:3",
        "--monitors",
        "random:2",
        "--ratios",
        "random:5",
        "--seed",
        "11",
        "--observe",
    ];
    let (a, b) = (run(&args), run(&args));
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let doc = NetworkDocument::parse(&stdout(&a)).unwrap();
    assert_eq!(doc.vertices.len(), 9);
    assert_eq!(doc.monitored.len(), 2);
    assert!(!doc.observations.is_empty());
}

#[test]
fn fixture_matches_bundled_file() {
    let out = run(&["fixture", "six-vertex"]);
    let doc = NetworkDocument::parse(&stdout(&out)).unwrap();
    assert_eq!(doc.network().unwrap(), fixtures::six_vertex_network());
    let bundled = NetworkDocument::parse(&std::fs::read_to_string(network("six-vertex.json")).unwrap()).unwrap();
    assert_eq!(doc, bundled);
}

#[tokio::test(flavor = "multi_thread")]
async fn remote_mode_matches_local_mode() {
    let addr = sensorflow_service::spawn_local(fixtures::six_vertex_network())
        .await
        .unwrap();
    let server = format!("http://{addr}");
    let file = network("six-vertex.json");
    let remote = tokio::task::spawn_blocking(move || run(&["--server", &server, "verify", path(&file), "--json"]))
        .await
        .unwrap();
    let local = run(&["verify", path(&network("six-vertex.json")), "--json"]);
    assert_eq!(remote.status.code(), Some(2));
    let (r, l): (DiagnoseResponse, DiagnoseResponse) = (
        serde_json::from_slice(&remote.stdout).unwrap(),
        serde_json::from_slice(&local.stdout).unwrap(),
    );
    assert_eq!(r, l);
    assert_eq!(r.overall, Verdict::NotCalculable);
}

#[tokio::test(flavor = "multi_thread")]
async fn remote_mode_rejects_a_different_network() {
    let addr = sensorflow_service::spawn_local(fixtures::six_vertex_network())
        .await
        .unwrap();
    let server = format!("http://{addr}");
    let out =
        tokio::task::spawn_blocking(move || run(&["--server", &server, "verify", path(&network("pentagon.json"))]))
            .await
            .unwrap();
    assert_eq!(out.status.code(), Some(1));
}
