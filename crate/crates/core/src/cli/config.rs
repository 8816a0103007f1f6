//! Flat `key = value` configuration files and typed value parsing shared by
//! the subcommands. Flags always win over file entries.

use std::collections::BTreeMap;
use std::path::Path;

use num_rational::BigRational;

use crate::chart::Orders;
use crate::coeff::parse_rational;
use crate::error::{Error, Result};

/// Keys accepted in a configuration file.
pub const KNOWN_KEYS: &[&str] = &[
    "f",
    "param",
    "point",
    "degree",
    "orders",
    "mode",
    "frame",
    "out",
    "format",
    "seed",
    "samples",
    "a",
    "b",
    "u0",
    "indices",
    "tmax",
    "dt",
    "grid",
    "spacing",
    "init",
    "patch",
    "fd-xi-step",
    "fd-t-step",
    "flow-steps",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FileConfig {
    values: BTreeMap<String, String>,
    params: Vec<(String, String)>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<FileConfig> {
        let mut cfg = FileConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if !KNOWN_KEYS.contains(&k) {
                return Err(Error::Config(format!("line {}: unknown key `{k}`", n + 1)));
            }
            if k == "param" {
                cfg.params.push(split_param(v)?);
            } else {
                cfg.values.insert(k.to_string(), v.to_string());
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<FileConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        FileConfig::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn params(&self) -> &[(String, String)] {
        &self.params
    }
}

/// `name=value` into its two halves.
pub fn split_param(text: &str) -> Result<(String, String)> {
    let (k, v) = text
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("parameter `{text}` must look like name=value")))?;
    let (k, v) = (k.trim(), v.trim());
    if k.is_empty() || !k.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return Err(Error::Config(format!("bad parameter name `{k}`")));
    }
    Ok((k.to_string(), v.to_string()))
}

pub fn rational(key: &str, text: &str) -> Result<BigRational> {
    parse_rational(text).ok_or_else(|| Error::Config(format!("{key}: `{text}` is not a number")))
}

pub fn real(key: &str, text: &str) -> Result<f64> {
    text.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .or_else(|| parse_rational(text).and_then(|q| num_traits::ToPrimitive::to_f64(&q)))
        .ok_or_else(|| Error::Config(format!("{key}: `{text}` is not a finite number")))
}

pub fn integer<T: std::str::FromStr>(key: &str, text: &str) -> Result<T> {
    text.trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: `{text}` is not a non-negative integer")))
}

/// Comma-separated list.
pub fn list<T>(key: &str, text: &str, each: impl Fn(&str, &str) -> Result<T>) -> Result<Vec<T>> {
    text.split(',').map(|s| each(key, s.trim())).collect()
}

pub fn triple<T>(key: &str, text: &str, each: impl Fn(&str, &str) -> Result<T>) -> Result<[T; 3]> {
    let v = list(key, text, each)?;
    let n = v.len();
    v.try_into()
        .map_err(|_| Error::Config(format!("{key}: expected 3 comma-separated values, got {n}")))
}

/// `t,xi`.
pub fn orders(text: &str) -> Result<Orders> {
    let v: Vec<usize> = list("orders", text, integer)?;
    match v[..] {
        [t, xi] => Ok(Orders::new(t, xi)),
        _ => Err(Error::Config(format!("orders: expected t,xi, got `{text}`"))),
    }
}

/// `n1xn2`.
pub fn grid(text: &str) -> Result<(usize, usize)> {
    let (a, b) = text
        .split_once(['x', 'X'])
        .ok_or_else(|| Error::Config(format!("grid: expected n1xn2, got `{text}`")))?;
    Ok((integer("grid", a)?, integer("grid", b)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_entries() {
        let cfg = FileConfig::parse("# comment\norders = 6,4\nparam = a=1/2\n\nparam=b=3\npatch=0.1\n").unwrap();
        assert_eq!(cfg.get("orders"), Some("6,4"));
        assert_eq!(cfg.get("patch"), Some("0.1"));
        assert_eq!(cfg.params().len(), 2);
        assert_eq!(cfg.params()[0], ("a".to_string(), "1/2".to_string()));
        assert!(matches!(FileConfig::parse("speed = 3"), Err(Error::Config(_))));
        assert!(matches!(FileConfig::parse("orders"), Err(Error::Config(_))));
    }

    #[test]
    fn typed_values() {
        assert_eq!(orders("6,3").unwrap(), Orders::new(6, 3));
        assert!(orders("6").is_err());
        assert_eq!(grid("9x17").unwrap(), (9, 17));
        assert_eq!(triple("point", "0,1/2,-1", real).unwrap(), [0.0, 0.5, -1.0]);
        assert!(triple("point", "0,1", real).is_err());
        assert_eq!(real("a", "1e-3").unwrap(), 1e-3);
        assert!(real("a", "nan").is_err());
    }
}
