//! Shared fixtures for the benchmarks.

use confmodels::manifold::PDModel;

/// Loads one of the workspace fixtures (`s2`, `t2`, `s3`, `s1xs2`).
pub fn pd_fixture(name: &str) -> PDModel {
    let path = format!("{}/../../fixtures/{name}.json", env!("CARGO_MANIFEST_DIR"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"));
    PDModel::from_json_str(&text).unwrap()
}
