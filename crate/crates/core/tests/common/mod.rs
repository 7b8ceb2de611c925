#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::OnceLock;

use edgegap::tw::{GoeMethod, TWTable, TwConfig};

/// Tables shared by every integration test binary.
pub fn cache_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("tw-cache")
}

/// The production-default table (d = 12, N = 2000, 20000 replicates),
/// built at most once per test binary.
pub fn default_table() -> &'static TWTable {
    static TABLE: OnceLock<TWTable> = OnceLock::new();
    TABLE.get_or_init(|| TWTable::build_or_load(&cache_dir(), TwConfig::default()).expect("default TW table"))
}

/// A quick table for tests that only need valid critical values.
pub fn small_table() -> TWTable {
    TWTable::build_or_load(
        &cache_dir(),
        TwConfig {
            d: 12,
            goe_n: 200,
            reps: 2000,
            seed: 11,
            method: GoeMethod::Tridiagonal,
        },
    )
    .expect("small TW table")
}

/// `1/(1 + √y)`, `(1 + √y)²`, `(1 + √y)^{4/3} y^{-1/6}` for `Σ = I`.
pub fn identity_constants(y: f64) -> (f64, f64, f64) {
    let s = y.sqrt();
    (1.0 / (1.0 + s), (1.0 + s).powi(2), ((1.0 + s).powi(4) / s).cbrt())
}
