//! Option layering: command-line flags, then `COVCONC_*` environment
//! variables, then a `key = value` config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::args::Flags;
use crate::failure::Failure;

pub const ENV_PREFIX: &str = "COVCONC_";

pub const KEYS: &[&str] = &[
    "spectrum",
    "matrix",
    "weight-matrix",
    "n",
    "x",
    "y",
    "mu",
    "seed",
    "reps",
    "threads",
    "psd",
    "csv",
];

/// Fully resolved options; `None` means unset everywhere.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Settings {
    pub spectrum: Option<PathBuf>,
    pub matrix: Option<PathBuf>,
    pub weight_matrix: Option<PathBuf>,
    pub n: Option<u64>,
    pub x: Option<f64>,
    pub y: Option<f64>,
    pub mu: Option<f64>,
    pub seed: Option<u64>,
    pub reps: Option<usize>,
    pub threads: Option<usize>,
    pub psd: bool,
    pub csv: Option<PathBuf>,
}

/// Parsed config file: keys with values, plus the directory that relative
/// paths are resolved against.
#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    pub entries: BTreeMap<String, String>,
    pub base: PathBuf,
}

pub fn parse_config(text: &str, base: &Path) -> Result<ConfigFile, Failure> {
    let mut entries = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = body.split_once('=').ok_or_else(|| {
            Failure::Usage(format!("config line {}: expected key = value", i + 1))
        })?;
        let key = key.trim().replace('_', "-");
        if !KEYS.contains(&key.as_str()) {
            return Err(Failure::Usage(format!(
                "config line {}: unknown key {key:?}",
                i + 1
            )));
        }
        let value = value.trim().trim_matches('"').to_owned();
        entries.insert(key, value);
    }
    Ok(ConfigFile {
        entries,
        base: base.to_path_buf(),
    })
}

fn env_name(key: &str) -> String {
    format!("{ENV_PREFIX}{}", key.replace('-', "_").to_uppercase())
}

struct Layers<'a> {
    env: &'a dyn Fn(&str) -> Option<String>,
    file: &'a ConfigFile,
}

impl Layers<'_> {
    /// Raw value and whether it came from the file.
    fn raw(&self, key: &str) -> Option<(String, bool)> {
        if let Some(v) = (self.env)(&env_name(key)) {
            return Some((v, false));
        }
        self.file.entries.get(key).map(|v| (v.clone(), true))
    }

    fn value<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, Failure> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.raw(key) {
            None => Ok(None),
            Some((v, _)) => v
                .parse()
                .map(Some)
                .map_err(|_| Failure::Usage(format!("cannot parse {key} = {v:?}"))),
        }
    }

    fn path(&self, flag: Option<PathBuf>, key: &str) -> Option<PathBuf> {
        flag.or_else(|| {
            self.raw(key).map(|(v, from_file)| {
                let p = PathBuf::from(v);
                if from_file && p.is_relative() {
                    self.file.base.join(p)
                } else {
                    p
                }
            })
        })
    }

    fn flag(&self, flag: bool, key: &str) -> Result<bool, Failure> {
        if flag {
            return Ok(true);
        }
        match self.raw(key) {
            None => Ok(false),
            Some((v, _)) => match v.to_ascii_lowercase().as_str() {
                "1" | "true" | "yes" | "on" => Ok(true),
                "0" | "false" | "no" | "off" | "" => Ok(false),
                _ => Err(Failure::Usage(format!(
                    "cannot parse {key} = {v:?} as a boolean"
                ))),
            },
        }
    }
}

/// Reads the config file named by `--config` or `COVCONC_CONFIG`, if any.
pub fn load_config(
    flags: &Flags,
    env: &dyn Fn(&str) -> Option<String>,
) -> Result<Option<(PathBuf, ConfigFile)>, Failure> {
    let path = match flags
        .config
        .clone()
        .or_else(|| env(&env_name("config")).map(PathBuf::from))
    {
        Some(p) => p,
        None => return Ok(None),
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Some((path.clone(), parse_config(&text, &base)?)))
}

pub fn resolve(
    flags: Flags,
    env: &dyn Fn(&str) -> Option<String>,
    file: &ConfigFile,
) -> Result<Settings, Failure> {
    let l = Layers { env, file };
    Ok(Settings {
        spectrum: l.path(flags.spectrum, "spectrum"),
        matrix: l.path(flags.matrix, "matrix"),
        weight_matrix: l.path(flags.weight_matrix, "weight-matrix"),
        n: l.value(flags.n, "n")?,
        x: l.value(flags.x, "x")?,
        y: l.value(flags.y, "y")?,
        mu: l.value(flags.mu, "mu")?,
        seed: l.value(flags.seed, "seed")?,
        reps: l.value(flags.reps, "reps")?,
        threads: l.value(flags.threads, "threads")?,
        psd: l.flag(flags.psd, "psd")?,
        csv: l.path(flags.csv, "csv"),
    })
}
