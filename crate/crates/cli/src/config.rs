//! Flat `key = value` configuration checked against `config.schema`.

use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::OnceLock;

use crate::CliError;

const SCHEMA_TEXT: &str = include_str!("../config.schema");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Fiducial,
    Identities,
    Modes,
    Disk,
    Torus,
    Bands,
    Flow,
    FullSuite,
}

impl Experiment {
    pub const SINGLE: [Experiment; 7] = [
        Experiment::Fiducial,
        Experiment::Identities,
        Experiment::Modes,
        Experiment::Disk,
        Experiment::Torus,
        Experiment::Bands,
        Experiment::Flow,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Fiducial => "fiducial",
            Experiment::Identities => "identities",
            Experiment::Modes => "modes",
            Experiment::Disk => "disk",
            Experiment::Torus => "torus",
            Experiment::Bands => "bands",
            Experiment::Flow => "flow",
            Experiment::FullSuite => "full-suite",
        }
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Experiment::SINGLE
            .iter()
            .chain([Experiment::FullSuite].iter())
            .copied()
            .find(|e| e.name() == s)
            .ok_or_else(|| format!("unknown experiment `{s}`"))
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Experiment,
    Path,
    Positive,
    Nonneg,
    Count,
    Seed,
    Bool,
    Increasing,
    Positives,
    Ints,
    Key,
    Reals,
}

impl Kind {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "experiment" => Kind::Experiment,
            "path" => Kind::Path,
            "positive" => Kind::Positive,
            "nonneg" => Kind::Nonneg,
            "count" => Kind::Count,
            "seed" => Kind::Seed,
            "bool" => Kind::Bool,
            "increasing" => Kind::Increasing,
            "positives" => Kind::Positives,
            "ints" => Kind::Ints,
            "key" => Kind::Key,
            "reals" => Kind::Reals,
            _ => return None,
        })
    }

    fn is_list(self) -> bool {
        matches!(self, Kind::Increasing | Kind::Positives | Kind::Ints | Kind::Reals)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Experiment(Experiment),
    Text(String),
    Real(f64),
    Count(usize),
    Seed(u64),
    Bool(bool),
    Reals(Vec<f64>),
    Ints(Vec<i64>),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn join<T: fmt::Display>(v: &[T]) -> String {
            v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
        }
        match self {
            Value::Experiment(e) => write!(f, "{e}"),
            Value::Text(s) => f.write_str(s),
            Value::Real(x) => write!(f, "{x}"),
            Value::Count(n) => write!(f, "{n}"),
            Value::Seed(n) => write!(f, "{n}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Reals(v) => f.write_str(&join(v)),
            Value::Ints(v) => f.write_str(&join(v)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct KeySpec {
    pub key: String,
    pub kind: Kind,
    pub default: Value,
    pub doc: String,
}

/// Parsed schema in file order.
pub fn schema() -> &'static [KeySpec] {
    static SCHEMA: OnceLock<Vec<KeySpec>> = OnceLock::new();
    SCHEMA.get_or_init(|| {
        let mut out = Vec::new();
        for line in SCHEMA_TEXT.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let key = parts.next().expect("schema key");
            let kind = Kind::parse(parts.next().expect("schema type")).expect("known schema type");
            let default = parts.next().expect("schema default");
            let doc = parts.collect::<Vec<_>>().join(" ");
            let raw = if default == "-" { "" } else { default };
            let default = parse_value(kind, raw).expect("schema default parses");
            out.push(KeySpec { key: key.to_string(), kind, default, doc });
        }
        out
    })
}

fn spec(key: &str) -> Option<&'static KeySpec> {
    schema().iter().find(|s| s.key == key)
}

fn parse_list<T: FromStr>(raw: &str) -> Result<Vec<T>, String> {
    if raw.trim().is_empty() {
        return Ok(Vec::new());
    }
    raw.split(',').map(|p| p.trim().parse::<T>().map_err(|_| format!("`{}` is not a valid entry", p.trim()))).collect()
}

fn parse_real(raw: &str) -> Result<f64, String> {
    let x: f64 = raw.parse().map_err(|_| format!("`{raw}` is not a number"))?;
    if !x.is_finite() {
        return Err(format!("`{raw}` is not finite"));
    }
    Ok(x)
}

fn parse_value(kind: Kind, raw: &str) -> Result<Value, String> {
    let raw = raw.trim();
    Ok(match kind {
        Kind::Experiment => Value::Experiment(raw.parse()?),
        Kind::Path => {
            if raw.is_empty() {
                return Err("empty path".into());
            }
            Value::Text(raw.into())
        }
        Kind::Key => {
            if !raw.is_empty() && spec(raw).is_none() {
                return Err(format!("`{raw}` is not a config key"));
            }
            Value::Text(raw.into())
        }
        Kind::Positive | Kind::Nonneg => {
            let x = parse_real(raw)?;
            if kind == Kind::Positive && x <= 0.0 {
                return Err(format!("{x} must be positive"));
            }
            if x < 0.0 {
                return Err(format!("{x} must be nonnegative"));
            }
            Value::Real(x)
        }
        Kind::Count => {
            let n: usize = raw.parse().map_err(|_| format!("`{raw}` is not a count"))?;
            if n == 0 {
                return Err("count must be at least 1".into());
            }
            Value::Count(n)
        }
        Kind::Seed => Value::Seed(raw.parse().map_err(|_| format!("`{raw}` is not a u64 seed"))?),
        Kind::Bool => Value::Bool(match raw {
            "true" => true,
            "false" => false,
            _ => return Err(format!("`{raw}` is not true or false")),
        }),
        Kind::Increasing | Kind::Positives | Kind::Reals => {
            let v: Vec<f64> = parse_list::<String>(raw)?.iter().map(|s| parse_real(s)).collect::<Result<_, _>>()?;
            if kind != Kind::Reals && v.iter().any(|&x| x <= 0.0) {
                return Err("entries must be positive".into());
            }
            if kind == Kind::Increasing && v.windows(2).any(|w| w[1] <= w[0]) {
                return Err("entries must be strictly increasing".into());
            }
            Value::Reals(v)
        }
        Kind::Ints => Value::Ints(parse_list(raw)?),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub output_dir: PathBuf,
    params: BTreeMap<String, Value>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let params: BTreeMap<String, Value> = schema().iter().map(|s| (s.key.clone(), s.default.clone())).collect();
        let mut cfg = RunConfig { experiment: Experiment::FullSuite, output_dir: PathBuf::new(), params };
        cfg.sync();
        cfg
    }
}

impl RunConfig {
    /// Parses config text; keys not given keep their schema defaults.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = RunConfig::default();
        let mut seen = BTreeMap::new();
        for (no, line) in text.lines().enumerate() {
            let line_no = no + 1;
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let err = |message: String| CliError::ConfigParse { line: line_no, message };
            let (key, raw) =
                body.split_once('=').ok_or_else(|| err(format!("expected `key = value`, found `{body}`")))?;
            let key = key.trim();
            if let Some(prev) = seen.insert(key.to_string(), line_no) {
                return Err(err(format!("`{key}` already set on line {prev}")));
            }
            cfg.set(key, raw).map_err(err)?;
        }
        cfg.validate().map_err(|message| CliError::ConfigParse { line: 0, message })?;
        Ok(cfg)
    }

    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, raw: &str) -> Result<(), String> {
        let spec = spec(key).ok_or_else(|| format!("unknown key `{key}`"))?;
        let value = parse_value(spec.kind, raw).map_err(|m| format!("{key}: {m}"))?;
        self.params.insert(key.to_string(), value);
        self.sync();
        Ok(())
    }

    /// Sets `key` to a real number, as a one-element list for list keys.
    pub fn set_real(&mut self, key: &str, x: f64) -> Result<(), String> {
        let spec = spec(key).ok_or_else(|| format!("unknown key `{key}`"))?;
        let raw = match spec.kind {
            Kind::Count | Kind::Seed | Kind::Ints => {
                if x.fract() != 0.0 {
                    return Err(format!("{key} needs an integer, got {x}"));
                }
                format!("{}", x as i64)
            }
            Kind::Positive | Kind::Nonneg | Kind::Increasing | Kind::Positives | Kind::Reals => format!("{x:e}"),
            _ => return Err(format!("{key} cannot take numeric sweep values")),
        };
        self.set(key, &raw)
    }

    fn sync(&mut self) {
        if let Some(Value::Experiment(e)) = self.params.get("experiment") {
            self.experiment = *e;
        }
        if let Some(Value::Text(p)) = self.params.get("output_dir") {
            self.output_dir = PathBuf::from(p);
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.params.insert("seed".into(), Value::Seed(seed));
    }

    pub fn set_output_dir(&mut self, dir: PathBuf) {
        self.params.insert("output_dir".into(), Value::Text(dir.display().to_string()));
        self.output_dir = dir;
    }

    fn validate(&self) -> Result<(), String> {
        let key = self.text("sweep_key");
        if !key.is_empty() {
            let kind = spec(key).map(|s| s.kind).ok_or_else(|| format!("sweep_key `{key}` unknown"))?;
            let numeric = matches!(kind, Kind::Positive | Kind::Nonneg | Kind::Count | Kind::Seed) || kind.is_list();
            if !numeric || key == "sweep_values" {
                return Err(format!("sweep_key `{key}` is not numeric"));
            }
            if self.reals("sweep_values").is_empty() {
                return Err("sweep_key set without sweep_values".into());
            }
        }
        Ok(())
    }

    pub fn real(&self, key: &str) -> f64 {
        match self.params.get(key) {
            Some(Value::Real(x)) => *x,
            other => panic!("`{key}` is not a real key: {other:?}"),
        }
    }

    pub fn count(&self, key: &str) -> usize {
        match self.params.get(key) {
            Some(Value::Count(n)) => *n,
            other => panic!("`{key}` is not a count key: {other:?}"),
        }
    }

    pub fn seed(&self) -> u64 {
        match self.params.get("seed") {
            Some(Value::Seed(n)) => *n,
            other => panic!("seed missing: {other:?}"),
        }
    }

    pub fn flag(&self, key: &str) -> bool {
        match self.params.get(key) {
            Some(Value::Bool(b)) => *b,
            other => panic!("`{key}` is not a bool key: {other:?}"),
        }
    }

    pub fn reals(&self, key: &str) -> &[f64] {
        match self.params.get(key) {
            Some(Value::Reals(v)) => v,
            other => panic!("`{key}` is not a list key: {other:?}"),
        }
    }

    pub fn ints(&self, key: &str) -> &[i64] {
        match self.params.get(key) {
            Some(Value::Ints(v)) => v,
            other => panic!("`{key}` is not an integer list key: {other:?}"),
        }
    }

    pub fn text(&self, key: &str) -> &str {
        match self.params.get(key) {
            Some(Value::Text(s)) => s,
            other => panic!("`{key}` is not a text key: {other:?}"),
        }
    }

    /// Every key with its value, in schema order.
    pub fn snapshot(&self) -> Vec<(String, String)> {
        schema().iter().map(|s| (s.key.clone(), self.params[&s.key].to_string())).collect()
    }

    /// Config text that parses back to this config.
    pub fn to_text(&self) -> String {
        self.snapshot().iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_defaults_parse() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.experiment, Experiment::FullSuite);
        assert_eq!(cfg.reals("disk_r_list"), &[4.0, 6.0, 8.0, 10.0]);
        assert_eq!(cfg.ints("mode_ks"), &[-1, 0, 1, 2, 3]);
        assert!(cfg.reals("alpha1_list").is_empty());
        assert_eq!(cfg.text("sweep_key"), "");
    }

    #[test]
    fn text_round_trip() {
        let mut cfg = RunConfig::parse("experiment = disk\nalpha = 2.5\n").unwrap();
        cfg.set_seed(99);
        assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }
}
