#![allow(dead_code)]

use std::path::PathBuf;

use screening_core::runtime::RunConfig;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

/// Mock-backed config over the bundled corpus, storing runs under `store`.
pub fn fixture_config(store: &std::path::Path) -> RunConfig {
    RunConfig {
        corpus: fixtures().join("resumes"),
        store_root: store.to_path_buf(),
        ..RunConfig::default()
    }
}
