//! Plain-text run configuration: `key = value` lines, `#` comments, unknown
//! keys rejected, couplings given absolutely or as fractions of a*.

use crate::trap::{self, TrapSpec};
use std::collections::HashMap;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config-missing:{0}")]
    Missing(String),
    #[error("config-type:{key}: cannot parse {value:?}")]
    Type { key: String, value: String },
    #[error("config-duplicate: key {0} appears twice")]
    Duplicate(String),
    #[error("config-unknown:{0}")]
    Unknown(String),
    #[error("config-invalid: {0}")]
    Invalid(String),
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
}

/// A coupling either as an absolute value or as a fraction of a*, resolved
/// once the scalar-field problem has been solved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CouplingSpec {
    Absolute(f64),
    FractionOfAStar(f64),
}

impl CouplingSpec {
    pub fn resolve(&self, a_star: f64) -> f64 {
        match self {
            CouplingSpec::Absolute(a) => *a,
            CouplingSpec::FractionOfAStar(f) => f * a_star,
        }
    }

    fn parse(token: &str) -> Option<CouplingSpec> {
        let t = token.trim();
        if let Some(frac) = t.strip_suffix("*astar") {
            return frac.trim().parse().ok().map(CouplingSpec::FractionOfAStar);
        }
        if t == "astar" {
            return Some(CouplingSpec::FractionOfAStar(1.0));
        }
        t.parse().ok().map(CouplingSpec::Absolute)
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub p: f64,
    pub a1: f64,
    pub a2: f64,
    pub omega: f64,
    pub a_list: Vec<CouplingSpec>,
    pub n: usize,
    pub l: f64,
    pub dt: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub expect_collapse: bool,
    pub uniqueness_starts: usize,
    pub raw_text: String,
}

impl RunConfig {
    pub fn trap(&self) -> Result<TrapSpec, trap::TrapError> {
        TrapSpec::new(self.p, self.a1, self.a2)
    }
}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<RunConfig, ConfigError> {
    const KNOWN: &[&str] = &[
        "p", "a1", "a2", "omega", "a_list", "n", "l", "dt", "tol", "max_iter", "seed",
        "out_dir", "expect_collapse", "uniqueness_starts",
    ];
    let mut entries: HashMap<String, String> = HashMap::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| ConfigError::Invalid(format!("not a key = value line: {line:?}")))?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if !KNOWN.contains(&key.as_str()) {
            return Err(ConfigError::Unknown(key));
        }
        if entries.insert(key.clone(), value).is_some() {
            return Err(ConfigError::Duplicate(key));
        }
    }

    fn required<'a>(
        entries: &'a HashMap<String, String>,
        key: &str,
    ) -> Result<&'a str, ConfigError> {
        entries
            .get(key)
            .map(|s| s.as_str())
            .ok_or_else(|| ConfigError::Missing(key.to_string()))
    }
    fn parse_as<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
        value.parse().map_err(|_| ConfigError::Type {
            key: key.to_string(),
            value: value.to_string(),
        })
    }
    fn optional<T: std::str::FromStr>(
        entries: &HashMap<String, String>,
        key: &str,
        default: T,
    ) -> Result<T, ConfigError> {
        match entries.get(key) {
            Some(v) => parse_as(key, v),
            None => Ok(default),
        }
    }

    let p: f64 = parse_as("p", required(&entries, "p")?)?;
    let omega: f64 = parse_as("omega", required(&entries, "omega")?)?;
    let n: usize = parse_as("n", required(&entries, "n")?)?;
    let l: f64 = parse_as("l", required(&entries, "l")?)?;
    let a_list_raw = required(&entries, "a_list")?;
    let mut a_list = Vec::new();
    for token in a_list_raw.split(',') {
        let c = CouplingSpec::parse(token).ok_or_else(|| ConfigError::Type {
            key: "a_list".into(),
            value: token.trim().to_string(),
        })?;
        a_list.push(c);
    }
    if a_list.is_empty() {
        return Err(ConfigError::Invalid("a_list is empty".into()));
    }

    let cfg = RunConfig {
        p,
        a1: optional(&entries, "a1", 0.0)?,
        a2: optional(&entries, "a2", 0.0)?,
        omega,
        a_list,
        n,
        l,
        dt: optional(&entries, "dt", 5e-3)?,
        tol: optional(&entries, "tol", 1e-10)?,
        max_iter: optional(&entries, "max_iter", 200_000)?,
        seed: optional(&entries, "seed", 0)?,
        out_dir: PathBuf::from(optional(
            &entries,
            "out_dir",
            "sweep-out".to_string(),
        )?),
        expect_collapse: optional(&entries, "expect_collapse", false)?,
        uniqueness_starts: optional(&entries, "uniqueness_starts", 4)?,
        raw_text: text.to_string(),
    };

    // Structural validation.
    let trap_spec = cfg
        .trap()
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let omega_star = trap::omega_star(&trap_spec);
    if !(0.0..omega_star).contains(&cfg.omega) {
        return Err(ConfigError::Invalid(format!(
            "omega = {} exceeds Omega* = {}",
            cfg.omega, omega_star
        )));
    }
    if !cfg.n.is_power_of_two() || cfg.n < 64 {
        return Err(ConfigError::Invalid(format!(
            "n = {} must be a power of two >= 64",
            cfg.n
        )));
    }
    if cfg.l < 8.0 {
        return Err(ConfigError::Invalid(format!("l = {} below 8", cfg.l)));
    }
    let dx = 2.0 * cfg.l / cfg.n as f64;
    if dx > 0.25 + 1e-12 {
        return Err(ConfigError::Invalid(format!(
            "dx = {dx} above the production bound 0.25"
        )));
    }
    // Fractions beyond a* require the collapse flag; absolute values are
    // checked later against the computed a*.
    for c in &cfg.a_list {
        if let CouplingSpec::FractionOfAStar(f) = c {
            if *f >= 1.0 && !cfg.expect_collapse {
                return Err(ConfigError::Invalid(format!(
                    "a = {f}*astar is supercritical without expect_collapse"
                )));
            }
            if *f <= 0.0 {
                return Err(ConfigError::Invalid("nonpositive coupling".into()));
            }
        }
    }
    Ok(cfg)
}
