//! Wire bytes of the mock server for the configuration and requests in
//! `golden/cases.json`. Set `UPDATE_GOLDENS=1` to rewrite the response files
//! after an intended change.

use std::path::PathBuf;

use compass_audit_core::CompassPoint;
use compass_audit_providers::{MockRespondent, MockRespondentConfig, MockServer};
use serde_json::Value;

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

#[test]
fn mock_server_wire_bytes_match_goldens() {
    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(golden_dir().join("cases.json")).unwrap()).unwrap();
    let s = &manifest["server"];
    let latent = CompassPoint::new(s["latent"]["social"].as_f64().unwrap(), s["latent"]["economic"].as_f64().unwrap());
    let config = MockRespondentConfig::new(latent, s["noise"].as_f64().unwrap(), s["seed"].as_u64().unwrap()).unwrap();
    let server = MockServer::spawn(MockRespondent::new(config)).unwrap();
    let client = reqwest::blocking::Client::new();
    let update = std::env::var_os("UPDATE_GOLDENS").is_some();
    let mut mismatches = Vec::new();
    for case in manifest["cases"].as_array().unwrap() {
        let name = case["name"].as_str().unwrap();
        let url = format!("{}{}", server.base_url(), case["path"].as_str().unwrap());
        let bytes = client.post(url).json(&case["body"]).send().unwrap().bytes().unwrap();
        let file = golden_dir().join(format!("{name}.json"));
        if update {
            std::fs::write(&file, &bytes).unwrap();
            continue;
        }
        let expected = std::fs::read(&file).unwrap_or_else(|e| panic!("{}: {e}", file.display()));
        if expected != bytes.as_ref() {
            mismatches.push(format!("{name}: got {}", String::from_utf8_lossy(&bytes)));
        }
    }
    assert!(mismatches.is_empty(), "golden mismatches:\n{}", mismatches.join("\n"));
}
