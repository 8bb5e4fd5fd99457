use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};

use compass_audit_core::fairness::{load_predictions, FairnessReport};
use compass_audit_core::probing::ProbeResult;
use compass_audit_core::report::ReportBundle;
use compass_audit_core::stability::StabilityReport;
use compass_audit_core::Document;

const BIN: &str = env!("CARGO_BIN_EXE_compass-audit");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("COMPASS_AUDIT_TOKEN").output().unwrap()
}

struct Server {
    child: Child,
    url: String,
}

impl Server {
    fn start(args: &[&str]) -> Server {
        let mut child = Command::new(BIN)
            .arg("mock-server")
            .args(args)
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .unwrap();
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
        let port: u16 = line.trim().parse().unwrap_or_else(|_| panic!("expected a port, got {line:?}"));
        Server { child, url: format!("http://127.0.0.1:{port}") }
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).display().to_string()
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["probe", "--help"]).status.code(), Some(0));
    let out = run(&["probe", "--endpoint", "http://x", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["probe", "--endpoint", "not a url"]).status.code(), Some(1));
    assert_eq!(run(&["mock-server", "--latent", "3"]).status.code(), Some(1));
    assert_eq!(run(&["mock-server", "--noise", "2"]).status.code(), Some(1));
}

#[test]
fn probe_stability_and_report() {
    let server = Server::start(&["--latent", "3.0,-2.5", "--noise", "0.1", "--seed", "7", "--port", "0"]);
    let dir = tempfile::tempdir().unwrap();
    let r = path(dir.path(), "r.json");
    let out = run(&["probe", "--endpoint", &server.url, "--bank", "default", "--mode", "encoder", "--out", &r]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let result = ProbeResult::read(&r).unwrap();
    assert_eq!(result.records.len(), 62);
    assert!((result.point.social - 3.0).abs() <= 1.5 && (result.point.economic + 2.5).abs() <= 1.5);

    // the same probe on stdout gives the same bytes
    let again = run(&["probe", "--endpoint", &server.url, "--mode", "encoder"]);
    assert_eq!(again.stdout, std::fs::read(&r).unwrap());

    let s = path(dir.path(), "s.json");
    let out = run(&[
        "stability", "--endpoint", &server.url, "--mode", "decoder", "--templates", "1,4,7", "--samples", "3", "--out",
        &s,
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(StabilityReport::read(&s).unwrap().variants, ["template-1", "template-4", "template-7"]);

    let rep = dir.path().join("rep");
    let rep_s = rep.display().to_string();
    let out = run(&["report", "--probe", &r, "--stability", &s, "--out-dir", &rep_s]);
    assert_eq!(out.status.code(), Some(0));
    let svg = std::fs::read(rep.join("compass.svg")).unwrap();
    let md = std::fs::read_to_string(rep.join("report.md")).unwrap();
    assert!(md.contains("](compass.svg)"));
    let bundle = ReportBundle::read(rep.join("bundle.json")).unwrap();
    assert_eq!(bundle.probes, vec![result]);
    assert_eq!(bundle.generated_at, None);

    // reports are reproducible byte for byte
    run(&["report", "--probe", &r, "--stability", &s, "--out-dir", &rep_s]);
    assert_eq!(std::fs::read(rep.join("compass.svg")).unwrap(), svg);
    assert_eq!(std::fs::read_to_string(rep.join("report.md")).unwrap(), md);
}

#[test]
fn bad_probe_config_is_a_validation_error() {
    let out = run(&["probe", "--endpoint", "http://127.0.0.1:9", "--mode", "decoder", "--template", "9"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["probe", "--endpoint", "http://127.0.0.1:9", "--max-tokens", "0"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unreachable_provider_exits_2_with_partial_report() {
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let dir = tempfile::tempdir().unwrap();
    let r = path(dir.path(), "r.json");
    let out = run(&["probe", "--endpoint", &format!("http://127.0.0.1:{port}"), "--out", &r]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("r.json").exists());
    let partial: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json.partial.json")).unwrap()).unwrap();
    assert!(partial["error"].as_str().unwrap().contains("unavailable"));
}

#[test]
fn flaky_server_is_retried() {
    let server = Server::start(&["--latent", "-5,5", "--fail-first", "2"]);
    let out = run(&["probe", "--endpoint", &server.url, "--backoff-ms", "5", "--parallelism", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

const PREDICTIONS: &str = "\
example_id,group,group_leaning,gold,pred,score,model_id,seed
e1,BLACK,,hate,hate,0.9,left,1
e2,BLACK,,ok,ok,0.8,left,1
e3,WOMEN,,hate,ok,0.6,left,1
e4,WOMEN,,ok,ok,0.7,left,1
e1,BLACK,,hate,ok,0.55,right,1
e2,BLACK,,ok,ok,0.9,right,1
e3,WOMEN,,hate,hate,0.8,right,1
e4,WOMEN,,ok,hate,0.6,right,1
e1,BLACK,,hate,hate,0.7,center,1
e2,BLACK,,ok,hate,0.6,center,1
e3,WOMEN,,hate,hate,0.9,center,1
e4,WOMEN,,ok,ok,0.9,center,1
";

#[test]
fn fairness_and_ensemble() {
    let dir = tempfile::tempdir().unwrap();
    let preds = path(dir.path(), "preds.csv");
    std::fs::write(&preds, PREDICTIONS).unwrap();

    let out = run(&["fairness", "--predictions", &preds]);
    assert_eq!(out.status.code(), Some(0));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert!(csv.starts_with("model_id,group,n,bacc,f1_macro,error\n"));
    assert!(csv.contains("left,overall,4,75.00,73.33,\n"));

    let json = path(dir.path(), "f.json");
    let out = run(&["fairness", "--predictions", &preds, "--out-json", &json]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let report = FairnessReport::read(&json).unwrap();
    assert_eq!(report.models.len(), 3);

    let ens = path(dir.path(), "ens.csv");
    let out = run(&["ensemble", "--predictions", &preds, "--mode", "majority", "--out", &ens]);
    assert_eq!(out.status.code(), Some(0));
    let combined = load_predictions(&ens, None).unwrap();
    let preds_of: Vec<&str> = combined.iter().map(|r| r.pred.as_str()).collect();
    assert_eq!(preds_of, ["hate", "ok", "hate", "ok"]);
    assert!(combined.iter().all(|r| r.model_id == "ensemble"));

    let out = run(&["ensemble", "--predictions", &preds, "--mode", "mean-score"]);
    assert_eq!(out.status.code(), Some(0));

    let bad = path(dir.path(), "bad.csv");
    std::fs::write(&bad, "example_id,group\n1,A\n").unwrap();
    assert_eq!(run(&["fairness", "--predictions", &bad]).status.code(), Some(1));
    assert_eq!(run(&["fairness", "--predictions", &preds, "--baseline", "nobody"]).status.code(), Some(1));
}
