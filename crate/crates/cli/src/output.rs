//! Output artifacts: CSV tables and JSON summaries, each embedding the
//! tool version, the config hash, and the effective seed so a run can be
//! reproduced from its output alone.

use sha2::{Digest, Sha256};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn config_sha256(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hex_lower(&hasher.finalize())
}

fn hex_lower(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// CSV comment block: stable across reruns of the same config and seed.
pub fn csv_header(config_hash: &str, seed: u64) -> String {
    format!("# tool: ruintail {TOOL_VERSION}\n# config_sha256: {config_hash}\n# seed: {seed}\n")
}

/// Render one optional cell; absent values become empty cells.
pub fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
