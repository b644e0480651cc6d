//! Run configuration: flat dotted keys, resolved from command defaults, an
//! optional JSON file and command-line flags (in increasing precedence).

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::{Map, Value};
use thiserror::Error;

/// Configuration problems (exit code 2).
#[derive(Debug, Error)]
pub enum ConfigError {
    /// The config file could not be read.
    #[error("cannot read config file {path}: {message}")]
    Io {
        /// File path.
        path: String,
        /// Underlying error.
        message: String,
    },
    /// The config file is not a flat JSON object.
    #[error("config file {path}: {message}")]
    Format {
        /// File path.
        path: String,
        /// What is wrong.
        message: String,
    },
    /// A key that no flag corresponds to.
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    /// A value of the wrong JSON type.
    #[error("config key `{key}`: expected {expected}, got {got}")]
    Type {
        /// Key.
        key: String,
        /// Expected type.
        expected: &'static str,
        /// Offending value.
        got: String,
    },
    /// A required key is absent.
    #[error("missing config key `{0}`")]
    Missing(String),
    /// A value outside its admissible range or an inconsistent combination.
    #[error("{0}")]
    Invalid(String),
}

/// Value type of a key.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    /// Free text; numbers are accepted and kept in their decimal form.
    Text,
    /// Non-negative integer.
    Int,
    /// Real number.
    Float,
}

/// Every recognized key, with its flag and type.
pub const KEYS: &[(&str, &str, Kind)] = &[
    ("domain", "--domain", Kind::Text),
    ("domain.d", "--d", Kind::Int),
    ("weight.alpha", "--alpha", Kind::Float),
    ("weight.beta", "--beta", Kind::Float),
    ("weight.gamma", "--gamma", Kind::Float),
    ("weight.mu", "--mu", Kind::Float),
    ("weight.abc", "--abc", Kind::Text),
    ("op.name", "--op", Kind::Text),
    ("op.l", "--l", Kind::Int),
    ("op.i", "--i", Kind::Int),
    ("op.j", "--j", Kind::Int),
    ("degrees", "--n", Kind::Text),
    ("degrees.nmax", "--nmax", Kind::Int),
    ("norm.p", "--p", Kind::Text),
    ("seed", "--seed", Kind::Int),
    ("sample.count", "--samples", Kind::Int),
    ("sample.points", "--points", Kind::Int),
    ("sample.pairs", "--pairs", Kind::Int),
    ("kernels.identity", "--identity", Kind::Text),
    ("pointset.eps", "--eps", Kind::Float),
    ("mz.beta_hat", "--beta-hat", Kind::Float),
    ("remez.delta", "--delta", Kind::Float),
    ("maximal.beta", "--maximal-beta", Kind::Float),
    ("decay.kappa", "--kappa", Kind::Float),
    ("decay.op", "--decay-op", Kind::Text),
    ("tolerance.scale", "--tol-scale", Kind::Float),
    ("output.dir", "--out-dir", Kind::Text),
    ("output.prefix", "--prefix", Kind::Text),
];

fn kind_of(key: &str) -> Option<Kind> {
    KEYS.iter()
        .find(|(k, _, _)| *k == key)
        .map(|(_, _, kind)| *kind)
}

/// Checks a value against the key's type, normalizing text keys.
fn normalize(key: &str, v: Value) -> Result<Value, ConfigError> {
    let kind = kind_of(key).ok_or_else(|| ConfigError::UnknownKey(key.to_string()))?;
    let bad = |expected| ConfigError::Type {
        key: key.to_string(),
        expected,
        got: v.to_string(),
    };
    match kind {
        Kind::Text => match &v {
            Value::String(_) => Ok(v),
            Value::Number(n) => Ok(Value::String(n.to_string())),
            _ => Err(bad("a string")),
        },
        Kind::Int => match v.as_u64() {
            Some(_) => Ok(v),
            None => Err(bad("a non-negative integer")),
        },
        Kind::Float => match v.as_f64() {
            Some(x) if x.is_finite() => Ok(v),
            _ => Err(bad("a finite number")),
        },
    }
}

/// Reads a flat JSON object of dotted keys.
pub fn load_file(path: &Path) -> Result<BTreeMap<String, Value>, ConfigError> {
    let p = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: p.clone(),
        message: e.to_string(),
    })?;
    let v: Value = serde_json::from_str(&text).map_err(|e| ConfigError::Format {
        path: p.clone(),
        message: e.to_string(),
    })?;
    match v {
        Value::Object(m) => m
            .into_iter()
            .map(|(k, v)| Ok((k.clone(), normalize(&k, v)?)))
            .collect(),
        _ => Err(ConfigError::Format {
            path: p,
            message: "expected a flat JSON object of dotted keys".into(),
        }),
    }
}

/// The resolved configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    values: BTreeMap<String, Value>,
}

impl Config {
    /// Merges `defaults`, then `file`, then `flags`; later sources win.
    pub fn resolve(
        defaults: Vec<(&str, Value)>,
        file: BTreeMap<String, Value>,
        flags: BTreeMap<String, Value>,
    ) -> Result<Self, ConfigError> {
        let mut values = BTreeMap::new();
        for (k, v) in defaults {
            values.insert(k.to_string(), normalize(k, v)?);
        }
        for (k, v) in file.into_iter().chain(flags) {
            let v = normalize(&k, v)?;
            values.insert(k, v);
        }
        Ok(Config { values })
    }

    /// Whether `key` is set.
    pub fn has(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    fn get(&self, key: &str) -> Result<&Value, ConfigError> {
        self.values
            .get(key)
            .ok_or_else(|| ConfigError::Missing(key.to_string()))
    }

    /// A text value.
    pub fn text(&self, key: &str) -> Result<String, ConfigError> {
        Ok(self.get(key)?.as_str().unwrap_or_default().to_string())
    }

    /// An integer value.
    pub fn int(&self, key: &str) -> Result<u64, ConfigError> {
        self.get(key)?
            .as_u64()
            .ok_or_else(|| ConfigError::Missing(key.to_string()))
    }

    /// An integer value as `usize`.
    pub fn usize(&self, key: &str) -> Result<usize, ConfigError> {
        usize::try_from(self.int(key)?)
            .map_err(|_| ConfigError::Invalid(format!("`{key}` is too large")))
    }

    /// A real value.
    pub fn float(&self, key: &str) -> Result<f64, ConfigError> {
        self.get(key)?
            .as_f64()
            .ok_or_else(|| ConfigError::Missing(key.to_string()))
    }

    /// An optional integer.
    pub fn opt_usize(&self, key: &str) -> Result<Option<usize>, ConfigError> {
        if self.has(key) {
            self.usize(key).map(Some)
        } else {
            Ok(None)
        }
    }

    /// An optional real.
    pub fn opt_float(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        if self.has(key) {
            self.float(key).map(Some)
        } else {
            Ok(None)
        }
    }

    /// The resolved key/value pairs as a JSON object (keys sorted).
    pub fn to_json(&self) -> Value {
        Value::Object(
            self.values
                .iter()
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect::<Map<_, _>>(),
        )
    }
}

/// Parses a degree specification: a single degree, a comma list, or a range
/// `a:b` selecting the entries of `ladder` in `[a, b]`.
pub fn parse_degrees(spec: &str, ladder: &[usize]) -> Result<Vec<usize>, ConfigError> {
    let bad = || ConfigError::Invalid(format!("invalid degree specification `{spec}`"));
    let spec = spec.trim();
    let out: Vec<usize> = if let Some((a, b)) = spec.split_once(':') {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        let sel: Vec<usize> = ladder
            .iter()
            .copied()
            .filter(|n| (a..=b).contains(n))
            .collect();
        if sel.is_empty() {
            vec![a, b]
        } else {
            sel
        }
    } else {
        spec.split(',')
            .map(|s| s.trim().parse::<usize>().map_err(|_| bad()))
            .collect::<Result<_, _>>()?
    };
    if out.is_empty() || out.contains(&0) || out.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ConfigError::Invalid(format!(
            "degrees `{spec}` must be positive and strictly increasing"
        )));
    }
    Ok(out)
}

/// Parses `a,b,c` into three reals.
pub fn parse_triple(key: &str, s: &str) -> Result<[f64; 3], ConfigError> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| {
            ConfigError::Invalid(format!(
                "`{key}` must be three comma-separated numbers, got `{s}`"
            ))
        })?;
    match parts[..] {
        [a, b, c] => Ok([a, b, c]),
        _ => Err(ConfigError::Invalid(format!(
            "`{key}` must be three comma-separated numbers, got `{s}`"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn flags_override_file_which_overrides_defaults() {
        let file = BTreeMap::from([
            ("seed".to_string(), json!(5)),
            ("weight.gamma".to_string(), json!(0.5)),
        ]);
        let flags = BTreeMap::from([("seed".to_string(), json!(9))]);
        let c = Config::resolve(
            vec![("seed", json!(1)), ("domain", json!("surface"))],
            file,
            flags,
        )
        .unwrap();
        assert_eq!(c.int("seed").unwrap(), 9);
        assert_eq!(c.float("weight.gamma").unwrap(), 0.5);
        assert_eq!(c.text("domain").unwrap(), "surface");
    }

    #[test]
    fn unknown_keys_and_bad_types_are_rejected() {
        let file = BTreeMap::from([("nope".to_string(), json!(1))]);
        assert!(matches!(
            Config::resolve(vec![], file, BTreeMap::new()),
            Err(ConfigError::UnknownKey(_))
        ));
        let file = BTreeMap::from([("seed".to_string(), json!("x"))]);
        assert!(matches!(
            Config::resolve(vec![], file, BTreeMap::new()),
            Err(ConfigError::Type { .. })
        ));
    }

    #[test]
    fn degree_specs() {
        let ladder = [8, 12, 16, 20, 24, 32, 40, 48];
        assert_eq!(parse_degrees("8:48", &ladder).unwrap(), ladder.to_vec());
        assert_eq!(parse_degrees("16:24", &ladder).unwrap(), vec![16, 20, 24]);
        assert_eq!(parse_degrees("8", &ladder).unwrap(), vec![8]);
        assert_eq!(parse_degrees("4,6,9", &ladder).unwrap(), vec![4, 6, 9]);
        assert_eq!(parse_degrees("2:5", &ladder).unwrap(), vec![2, 5]);
        assert!(parse_degrees("9,8", &ladder).is_err());
        assert!(parse_degrees("0", &ladder).is_err());
        assert!(parse_degrees("a:b", &ladder).is_err());
    }

    #[test]
    fn text_keys_accept_numbers() {
        let flags = BTreeMap::from([("norm.p".to_string(), json!(2))]);
        let c = Config::resolve(vec![], BTreeMap::new(), flags).unwrap();
        assert_eq!(c.text("norm.p").unwrap(), "2");
    }
}
