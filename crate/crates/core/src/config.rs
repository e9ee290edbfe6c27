//! Flat `key = value` experiment files.
//!
//! One setting per line, `#` starts a comment, nested settings use dotted keys
//! (`protocol.kind`, `ach.min_dist`). Dots and underscores are interchangeable
//! in keys, so `ach_min_dist` and `ach.min_dist` name the same setting. Keys
//! left out take the defaults of [`NetworkConfig`] and [`ProtocolSpec`].

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::engine::{InvalidConfig, NetworkConfig};
use crate::protocol::{EligibilityRule, ProtocolKind, Variant};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("invalid `{key}`: {reason}")]
    Invalid { key: String, reason: String },
}

impl ConfigError {
    fn invalid(key: &str, reason: impl Into<String>) -> Self {
        Self::Invalid { key: key.to_string(), reason: reason.into() }
    }

    /// The offending key, for validation errors.
    pub fn key(&self) -> Option<&str> {
        match self {
            Self::Invalid { key, .. } | Self::UnknownKey { key, .. } => Some(key),
            _ => None,
        }
    }
}

impl From<InvalidConfig> for ConfigError {
    fn from(e: InvalidConfig) -> Self {
        Self::Invalid { key: e.key.to_string(), reason: e.reason }
    }
}

/// A batch of runs: every listed variant over every seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub base: NetworkConfig,
    pub protocols: Vec<Variant>,
    pub seeds: Vec<u64>,
    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        let base = NetworkConfig::default();
        Self { protocols: vec![base.protocol.variant()], seeds: vec![base.seed], base, out_dir: None }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.protocols.is_empty() {
            return Err(ConfigError::invalid("experiment.protocols", "must list at least one protocol"));
        }
        if self.seeds.is_empty() {
            return Err(ConfigError::invalid("experiment.n_seeds", "must be >= 1"));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = self.seeds.iter().find(|s| !seen.insert(**s)) {
            return Err(ConfigError::invalid("experiment.seeds", format!("seed {dup} listed twice")));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = self.protocols.iter().find(|p| !seen.insert(**p)) {
            return Err(ConfigError::invalid("experiment.protocols", format!("{dup} listed twice")));
        }
        self.base.validate()?;
        for v in &self.protocols {
            self.base.with_variant(*v).validate()?;
        }
        Ok(())
    }

    /// Seeds `base, base+1, ..., base+n-1`.
    pub fn set_seed_range(&mut self, base_seed: u64, n_seeds: u64) {
        self.seeds = (0..n_seeds).map(|i| base_seed.wrapping_add(i)).collect();
    }

    /// All `(variant, seed)` pairs in output order.
    pub fn runs(&self) -> Vec<NetworkConfig> {
        self.protocols
            .iter()
            .flat_map(|v| self.seeds.iter().map(move |s| self.base.with_variant(*v).with_seed(*s)))
            .collect()
    }

    /// Serializes every setting explicitly; parsing the result reproduces `self`.
    pub fn to_config_string(&self) -> String {
        let c = &self.base;
        let p = &c.protocol;
        let e = &c.energy;
        let mut out = String::from("# resolved configuration\n");
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("field.width", c.field_width.to_string());
        put("field.height", c.field_height.to_string());
        put("n_nodes", c.n_nodes.to_string());
        put("bs.x", c.bs_position.x.to_string());
        put("bs.y", c.bs_position.y.to_string());
        put("packet_bits", c.packet_bits.to_string());
        put("max_rounds", c.max_rounds.to_string());
        put("seed", c.seed.to_string());
        put("protocol.kind", p.kind.to_string());
        put("protocol.popt", p.popt.to_string());
        put("election.eligibility", p.eligibility.name().to_string());
        put("sep.a", p.sep_a.to_string());
        put("sep.m", p.sep_m.to_string());
        put("teen.hard", p.teen_hard.to_string());
        put("teen.soft", p.teen_soft.to_string());
        put("ach.enabled", p.ach_enabled.to_string());
        put("ach.min_dist", p.ach_min_dist.to_string());
        put("energy.e_elec", e.e_elec.to_string());
        put("energy.eps_fs", e.eps_fs.to_string());
        put("energy.eps_mp", e.eps_mp.to_string());
        put("energy.e_da", e.e_da.to_string());
        put("energy.initial_normal", c.initial_energy_normal.to_string());
        put("energy.initial_max", c.initial_energy_max.to_string());
        put("experiment.protocols", self.protocols.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","));
        put("experiment.seeds", self.seeds.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(","));
        if let Some(dir) = &self.out_dir {
            put("experiment.out_dir", dir.display().to_string());
        }
        out
    }
}

const KEYS: &[&str] = &[
    "field.width",
    "field.height",
    "n_nodes",
    "bs.x",
    "bs.y",
    "packet_bits",
    "max_rounds",
    "seed",
    "protocol.kind",
    "protocol.popt",
    "election.eligibility",
    "sep.a",
    "sep.m",
    "teen.hard",
    "teen.soft",
    "ach.enabled",
    "ach.min_dist",
    "energy.e_elec",
    "energy.eps_fs",
    "energy.eps_mp",
    "energy.e_da",
    "energy.initial_normal",
    "energy.initial_max",
    "experiment.protocols",
    "experiment.seeds",
    "experiment.base_seed",
    "experiment.n_seeds",
    "experiment.out_dir",
];

fn canonical_key(raw: &str) -> Option<&'static str> {
    let norm = raw.replace('.', "_");
    KEYS.iter().copied().find(|k| k.replace('.', "_") == norm)
}

fn value<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    raw.parse::<T>().map_err(|e| ConfigError::Parse { line, message: format!("bad value `{raw}` for `{key}`: {e}") })
}

fn list<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    raw.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| value(line, key, s)).collect()
}

pub fn parse_config_str(text: &str) -> Result<ExperimentSpec, ConfigError> {
    let mut spec = ExperimentSpec::default();
    let mut seen: BTreeSet<&'static str> = BTreeSet::new();
    let mut explicit_seeds: Option<Vec<u64>> = None;
    let mut explicit_protocols: Option<Vec<Variant>> = None;
    let mut base_seed: Option<u64> = None;
    let mut n_seeds: Option<u64> = None;

    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (raw_key, raw_val) = content
            .split_once('=')
            .ok_or_else(|| ConfigError::Parse { line, message: format!("expected `key = value`, got `{content}`") })?;
        let raw_key = raw_key.trim();
        let raw_val = raw_val.trim();
        if raw_key.is_empty() {
            return Err(ConfigError::Parse { line, message: "missing key".into() });
        }
        let key = canonical_key(raw_key).ok_or_else(|| ConfigError::UnknownKey { line, key: raw_key.to_string() })?;
        if !seen.insert(key) {
            return Err(ConfigError::Parse { line, message: format!("`{key}` set twice") });
        }

        let c = &mut spec.base;
        match key {
            "field.width" => c.field_width = value(line, key, raw_val)?,
            "field.height" => c.field_height = value(line, key, raw_val)?,
            "n_nodes" => c.n_nodes = value(line, key, raw_val)?,
            "bs.x" => c.bs_position.x = value(line, key, raw_val)?,
            "bs.y" => c.bs_position.y = value(line, key, raw_val)?,
            "packet_bits" => c.packet_bits = value(line, key, raw_val)?,
            "max_rounds" => c.max_rounds = value(line, key, raw_val)?,
            "seed" => c.seed = value(line, key, raw_val)?,
            "protocol.kind" => c.protocol.kind = value::<ProtocolKind>(line, key, raw_val)?,
            "protocol.popt" => c.protocol.popt = value(line, key, raw_val)?,
            "election.eligibility" => c.protocol.eligibility = value::<EligibilityRule>(line, key, raw_val)?,
            "sep.a" => c.protocol.sep_a = value(line, key, raw_val)?,
            "sep.m" => c.protocol.sep_m = value(line, key, raw_val)?,
            "teen.hard" => c.protocol.teen_hard = value(line, key, raw_val)?,
            "teen.soft" => c.protocol.teen_soft = value(line, key, raw_val)?,
            "ach.enabled" => c.protocol.ach_enabled = value(line, key, raw_val)?,
            "ach.min_dist" => c.protocol.ach_min_dist = value(line, key, raw_val)?,
            "energy.e_elec" => c.energy.e_elec = value(line, key, raw_val)?,
            "energy.eps_fs" => c.energy.eps_fs = value(line, key, raw_val)?,
            "energy.eps_mp" => c.energy.eps_mp = value(line, key, raw_val)?,
            "energy.e_da" => c.energy.e_da = value(line, key, raw_val)?,
            "energy.initial_normal" => c.initial_energy_normal = value(line, key, raw_val)?,
            "energy.initial_max" => c.initial_energy_max = value(line, key, raw_val)?,
            "experiment.protocols" => explicit_protocols = Some(list(line, key, raw_val)?),
            "experiment.seeds" => explicit_seeds = Some(list(line, key, raw_val)?),
            "experiment.base_seed" => base_seed = Some(value(line, key, raw_val)?),
            "experiment.n_seeds" => n_seeds = Some(value(line, key, raw_val)?),
            "experiment.out_dir" => spec.out_dir = Some(PathBuf::from(raw_val)),
            _ => unreachable!("key table and match out of sync: {key}"),
        }
    }

    spec.protocols = explicit_protocols.unwrap_or_else(|| vec![spec.base.protocol.variant()]);
    spec.seeds = match (explicit_seeds, base_seed, n_seeds) {
        (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
            return Err(ConfigError::invalid(
                "experiment.seeds",
                "give either an explicit seed list or base_seed/n_seeds, not both",
            ))
        }
        (Some(list), None, None) => list,
        (None, b, n) => {
            let mut tmp = Vec::new();
            let start = b.unwrap_or(spec.base.seed);
            let count = n.unwrap_or(1);
            if count == 0 {
                return Err(ConfigError::invalid("experiment.n_seeds", "must be >= 1"));
            }
            tmp.extend((0..count).map(|i| start.wrapping_add(i)));
            tmp
        }
    };
    spec.validate()?;
    Ok(spec)
}

pub fn parse_config(path: &Path) -> Result<ExperimentSpec, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    parse_config_str(&text)
}
