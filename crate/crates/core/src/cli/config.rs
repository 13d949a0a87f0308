//! Flat `section.key = value` configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::mc::{MCConfig, UpdateRule};
use crate::models::{Family, FieldDist, ModelSpec};

pub const DEFAULT_SEED: u64 = 20240001;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("config key `{key}`: cannot parse `{value}`: {msg}")]
    BadValue {
        key: String,
        value: String,
        msg: String,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    ExactSolve,
    McRun,
    Aggregate,
    Gg,
    Fkg,
    Scaling,
    Checks,
    Oracle,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::ExactSolve,
        Command::McRun,
        Command::Aggregate,
        Command::Gg,
        Command::Fkg,
        Command::Scaling,
        Command::Checks,
        Command::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::ExactSolve => "exact-solve",
            Command::McRun => "mc-run",
            Command::Aggregate => "aggregate",
            Command::Gg => "gg",
            Command::Fkg => "fkg",
            Command::Scaling => "scaling",
            Command::Checks => "checks",
            Command::Oracle => "oracle",
        }
    }
}

impl FromStr for Command {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown command `{s}`"))
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EngineKind {
    Exact,
    Mc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Formats {
    pub csv: bool,
    pub jsonl: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub model: ModelSpec,
    pub dim: usize,
    pub side: usize,
    pub sides: Vec<usize>,
    pub n_samples: usize,
    pub master_seed: u64,
    /// Realization used by the single-realization commands.
    pub index: u64,
    pub engine: EngineKind,
    pub mc: MCConfig,
    pub out_dir: PathBuf,
    pub formats: Formats,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: Command::Aggregate,
            model: ModelSpec::default(),
            dim: 2,
            side: 2,
            sides: vec![2, 3, 4],
            n_samples: 200,
            master_seed: DEFAULT_SEED,
            index: 0,
            engine: EngineKind::Exact,
            mc: MCConfig::default(),
            out_dir: PathBuf::from("out"),
            formats: Formats {
                csv: true,
                jsonl: true,
            },
        }
    }
}

/// Every accepted key, in manifest order.
pub const KEYS: &[&str] = &[
    "command",
    "model.family",
    "model.beta",
    "model.h",
    "model.b",
    "model.J",
    "model.p",
    "model.mu",
    "model.field_dist",
    "lattice.d",
    "lattice.L",
    "lattice.L_list",
    "sampling.n_samples",
    "sampling.master_seed",
    "sampling.index",
    "sampling.engine",
    "mc.sweeps",
    "mc.burn_in",
    "mc.thinning",
    "mc.n_replicas",
    "mc.update_rule",
    "mc.chain_seed",
    "mc.estimate_q11",
    "mc.record_trace",
    "output.directory",
    "output.formats",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value.parse::<T>().map_err(|e| ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
        msg: e.to_string(),
    })
}

fn bad(key: &str, value: &str, msg: &str) -> ConfigError {
    ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
        msg: msg.to_string(),
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value.trim();
        match key {
            "command" => self.command = parse(key, v)?,
            "model.family" => self.model.family = parse::<Family>(key, v)?,
            "model.beta" => self.model.beta = parse(key, v)?,
            "model.h" => self.model.h = parse(key, v)?,
            "model.b" => self.model.b = parse(key, v)?,
            "model.J" => self.model.coupling = parse(key, v)?,
            "model.p" => self.model.p = parse(key, v)?,
            "model.mu" => self.model.mu = parse(key, v)?,
            "model.field_dist" => self.model.field_dist = parse::<FieldDist>(key, v)?,
            "lattice.d" => self.dim = parse(key, v)?,
            "lattice.L" => self.side = parse(key, v)?,
            "lattice.L_list" => {
                self.sides = v
                    .split(',')
                    .map(|s| parse::<usize>(key, s.trim()))
                    .collect::<Result<_, _>>()?;
            }
            "sampling.n_samples" => self.n_samples = parse(key, v)?,
            "sampling.master_seed" => self.master_seed = parse(key, v)?,
            "sampling.index" => self.index = parse(key, v)?,
            "sampling.engine" => {
                self.engine = match v {
                    "exact" => EngineKind::Exact,
                    "mc" => EngineKind::Mc,
                    _ => return Err(bad(key, v, "expected `exact` or `mc`")),
                }
            }
            "mc.sweeps" => self.mc.sweeps = parse(key, v)?,
            "mc.burn_in" => self.mc.burn_in = parse(key, v)?,
            "mc.thinning" => self.mc.thinning = parse(key, v)?,
            "mc.n_replicas" => self.mc.n_replicas = parse(key, v)?,
            "mc.update_rule" => self.mc.update_rule = parse::<UpdateRule>(key, v)?,
            "mc.chain_seed" => self.mc.chain_seed = parse(key, v)?,
            "mc.estimate_q11" => self.mc.estimate_q11 = parse(key, v)?,
            "mc.record_trace" => self.mc.record_trace = parse(key, v)?,
            "output.directory" => self.out_dir = PathBuf::from(v),
            "output.formats" => {
                let mut f = Formats {
                    csv: false,
                    jsonl: false,
                };
                for item in v.split(',').map(str::trim) {
                    match item {
                        "csv" => f.csv = true,
                        "jsonl" => f.jsonl = true,
                        _ => return Err(bad(key, v, "formats are `csv` and `jsonl`")),
                    }
                }
                self.formats = f;
            }
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Value of `key` in the syntax accepted by [`RunConfig::set`].
    pub fn get(&self, key: &str) -> Option<String> {
        let m = &self.model;
        let list = |xs: &[usize]| {
            xs.iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(",")
        };
        Some(match key {
            "command" => self.command.to_string(),
            "model.family" => m.family.to_string(),
            "model.beta" => m.beta.to_string(),
            "model.h" => m.h.to_string(),
            "model.b" => m.b.to_string(),
            "model.J" => m.coupling.to_string(),
            "model.p" => m.p.to_string(),
            "model.mu" => m.mu.to_string(),
            "model.field_dist" => m.field_dist.to_string(),
            "lattice.d" => self.dim.to_string(),
            "lattice.L" => self.side.to_string(),
            "lattice.L_list" => list(&self.sides),
            "sampling.n_samples" => self.n_samples.to_string(),
            "sampling.master_seed" => self.master_seed.to_string(),
            "sampling.index" => self.index.to_string(),
            "sampling.engine" => match self.engine {
                EngineKind::Exact => "exact".into(),
                EngineKind::Mc => "mc".into(),
            },
            "mc.sweeps" => self.mc.sweeps.to_string(),
            "mc.burn_in" => self.mc.burn_in.to_string(),
            "mc.thinning" => self.mc.thinning.to_string(),
            "mc.n_replicas" => self.mc.n_replicas.to_string(),
            "mc.update_rule" => self.mc.update_rule.to_string(),
            "mc.chain_seed" => self.mc.chain_seed.to_string(),
            "mc.estimate_q11" => self.mc.estimate_q11.to_string(),
            "mc.record_trace" => self.mc.record_trace.to_string(),
            "output.directory" => self.out_dir.display().to_string(),
            "output.formats" => {
                let mut v = Vec::new();
                if self.formats.csv {
                    v.push("csv");
                }
                if self.formats.jsonl {
                    v.push("jsonl");
                }
                v.join(",")
            }
            _ => return None,
        })
    }

    pub fn to_map(&self) -> BTreeMap<String, String> {
        KEYS.iter()
            .map(|k| (k.to_string(), self.get(k).expect("listed key")))
            .collect()
    }

    pub fn from_map<'a, I>(entries: I) -> Result<Self, ConfigError>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut cfg = RunConfig::default();
        for (k, v) in entries {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    /// Applies a config file: `key = value` lines, `#` comments, and
    /// optional `[section]` headers that prefix the following keys.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| ConfigError::Syntax {
                    line: i + 1,
                    msg: "unterminated section header".into(),
                })?;
                section = name.trim().to_string();
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            let k = k.trim();
            let key = if section.is_empty() {
                k.to_string()
            } else {
                format!("{section}.{k}")
            };
            self.set(&key, v)?;
        }
        Ok(())
    }

    /// Applies a `--set key=value` override.
    pub fn apply_assignment(&mut self, kv: &str) -> Result<(), ConfigError> {
        let (k, v) = kv.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: 0,
            msg: format!("--set expects key=value, got `{kv}`"),
        })?;
        self.set(k.trim(), v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_sections_and_comments() {
        let mut c = RunConfig::default();
        c.apply_text(
            "command = scaling  # trailing\n\n[model]\nfamily = sdi\nbeta=1.25\n[lattice]\nL_list = 2, 3\nmc.sweeps = 5\n",
        )
        .unwrap_err();
        let mut c2 = RunConfig::default();
        c2.apply_text(
            "command = scaling\n[model]\nfamily = sdi\nbeta=1.25\n[lattice]\nL_list = 2, 3\n",
        )
        .unwrap();
        assert_eq!(c2.command, Command::Scaling);
        assert_eq!(c2.model.family, Family::SiteDiluted);
        assert_eq!(c2.model.beta, 1.25);
        assert_eq!(c2.sides, vec![2, 3]);
        c.apply_text("sampling.master_seed = 9").unwrap();
        assert_eq!(c.master_seed, 9);
    }

    #[test]
    fn unknown_keys_and_bad_values_name_the_key() {
        let mut c = RunConfig::default();
        let e = c.apply_assignment("model.temperature=3").unwrap_err();
        assert!(e.to_string().contains("model.temperature"));
        let e = c.apply_assignment("model.beta=hot").unwrap_err();
        assert!(e.to_string().contains("model.beta"));
        assert!(c.apply_assignment("output.formats=xml").is_err());
        assert!(c.apply_assignment("novalue").is_err());
    }

    #[test]
    fn map_round_trip() {
        let mut c = RunConfig::default();
        for kv in [
            "command=gg",
            "model.family=rfi",
            "model.field_dist=discrete:-1:0.5,1:0.5",
            "model.mu=0.1",
            "model.beta=0.30000000000000004",
            "mc.update_rule=metropolis",
            "output.formats=csv",
            "lattice.L_list=2,4",
        ] {
            c.apply_assignment(kv).unwrap();
        }
        let map = c.to_map();
        let back = RunConfig::from_map(map.iter().map(|(k, v)| (k.as_str(), v.as_str()))).unwrap();
        assert_eq!(back, c);
        assert_eq!(map.len(), KEYS.len());
    }
}
