//! Configuration, persistence and reproducible sweep execution.

mod config;
mod fieldio;
mod sweep;

pub use config::{parse_config, ConfigError, CouplingSpec, RunConfig};
pub use fieldio::{load_field, save_field, FieldIoError};
pub use sweep::{run_sequence, run_sweep, write_asymptotics_csv, write_uniqueness_csv, SweepError, SweepOutcome};

/// FNV-1a 64-bit hash, used for stage keys in sweep manifests.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325_u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Fixed float formatting used by every CSV and sidecar writer: 17 significant
/// digits round-trip f64 exactly, keeping reruns byte-identical.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.17e}")
}
