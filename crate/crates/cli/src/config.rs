//! Problem configuration files.
//!
//! The format is line based: `[section]` headers, `key = value` entries and
//! `#` comments. Boxes are written `[a,b]x[c,d]x...`; bounds may use `pi`
//! (`-pi`, `2*pi`, `0.5*pi`). Lists are comma separated.

use std::fs;
use std::path::Path;

use stochabs_core::grid::{Grid, GridError, HyperRect};
use stochabs_core::model::{NoiseKind, SystemParams};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("cannot read {path}: {reason}")]
    Read { path: String, reason: String },
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: [{section}] {key}: {msg}")]
    Value {
        line: usize,
        section: String,
        key: String,
        msg: String,
    },
    #[error("missing required key [{section}] {key}")]
    Missing { section: &'static str, key: &'static str },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Which fixed points a synthesis run evaluates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ComputeSet {
    pub under: bool,
    pub over: bool,
    pub worst_case: bool,
    pub losing: bool,
}

impl Default for ComputeSet {
    fn default() -> Self {
        Self {
            under: true,
            over: true,
            worst_case: false,
            losing: false,
        }
    }
}

impl ComputeSet {
    /// Parses `under`, `over`, `both`, `worst-case`, `losing`, comma separated.
    /// The losing region is derived from the under-approximation, which is
    /// therefore computed as well.
    pub fn parse(s: &str) -> Result<Self, String> {
        let mut c = ComputeSet {
            under: false,
            over: false,
            worst_case: false,
            losing: false,
        };
        for item in s.split(',').map(str::trim) {
            match item {
                "under" => c.under = true,
                "over" => c.over = true,
                "both" => {
                    c.under = true;
                    c.over = true;
                }
                "worst-case" => c.worst_case = true,
                "losing" => {
                    c.losing = true;
                    c.under = true;
                }
                "all" => {
                    c = ComputeSet {
                        under: true,
                        over: true,
                        worst_case: true,
                        losing: true,
                    }
                }
                other => {
                    return Err(format!(
                        "unknown fixed point '{other}' (expected under, over, both, worst-case, losing, all)"
                    ))
                }
            }
        }
        Ok(c)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimOptions {
    pub trials: usize,
    pub horizon: usize,
    pub seed: u64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            trials: 100,
            horizon: 1000,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AuditOptions {
    pub samples: usize,
    pub pairs: Option<usize>,
}

impl Default for AuditOptions {
    fn default() -> Self {
        Self {
            samples: 64,
            pairs: Some(1000),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemConfig {
    pub system: String,
    pub params: SystemParams,
    pub region: HyperRect,
    pub widths: Vec<f64>,
    pub periodic: Vec<bool>,
    pub obstacles: Vec<HyperRect>,
    pub target: HyperRect,
    pub warm_start: bool,
    pub compute: ComputeSet,
    pub sim: SimOptions,
    pub audit: AuditOptions,
}

impl ProblemConfig {
    pub fn grid(&self) -> Result<Grid, GridError> {
        Grid::new(
            self.region.clone(),
            self.widths.clone(),
            self.periodic.clone(),
            self.obstacles.clone(),
        )
    }

    pub fn is_chain(&self) -> bool {
        self.system.starts_with("chain-")
    }
}

pub fn parse_config_file(path: &Path) -> Result<ProblemConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|e| ConfigError::Read {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    parse_config(&text)
}

/// Parses a real, accepting `pi` and `k*pi`.
pub fn parse_real(s: &str) -> Result<f64, String> {
    let t = s.trim();
    let (neg, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest.trim()),
        None => (false, t.strip_prefix('+').unwrap_or(t).trim()),
    };
    let v = if body == "pi" {
        std::f64::consts::PI
    } else if let Some(k) = body.strip_suffix("*pi") {
        k.trim().parse::<f64>().map_err(|_| format!("bad number '{s}'"))? * std::f64::consts::PI
    } else {
        body.parse::<f64>().map_err(|_| format!("bad number '{s}'"))?
    };
    if !v.is_finite() {
        return Err(format!("non-finite number '{s}'"));
    }
    Ok(if neg { -v } else { v })
}

/// Parses `[a,b]x[c,d]...`.
pub fn parse_box(s: &str) -> Result<HyperRect, String> {
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    for (i, factor) in s.split('x').enumerate() {
        let f = factor.trim();
        let inner = f
            .strip_prefix('[')
            .and_then(|r| r.strip_suffix(']'))
            .ok_or_else(|| format!("factor {} of box '{s}' is not of the form [a,b]", i + 1))?;
        let (a, b) = inner
            .split_once(',')
            .ok_or_else(|| format!("factor {} of box '{s}' needs two bounds", i + 1))?;
        let (a, b) = (parse_real(a)?, parse_real(b)?);
        if a > b {
            return Err(format!(
                "factor {} of box '{s}' has lower bound above upper bound",
                i + 1
            ));
        }
        lo.push(a);
        hi.push(b);
    }
    HyperRect::new(lo, hi).map_err(|e| e.to_string())
}

fn parse_list<T>(s: &str, item: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    s.split(',').map(|x| item(x.trim())).collect()
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("expected true or false, found '{s}'")),
    }
}

fn parse_count(s: &str) -> Result<usize, String> {
    s.parse::<usize>()
        .map_err(|_| format!("expected a non-negative integer, found '{s}'"))
}

#[derive(Default)]
struct Raw {
    system: Option<String>,
    tau: Option<f64>,
    velocity: Option<f64>,
    inputs: Option<Vec<f64>>,
    region: Option<HyperRect>,
    widths: Option<Vec<f64>>,
    cells: Option<Vec<usize>>,
    periodic: Option<Vec<bool>>,
    obstacles: Vec<HyperRect>,
    target: Option<HyperRect>,
    support: Option<HyperRect>,
    under_margin: Option<f64>,
    kind: Option<String>,
    sigma: Option<Vec<f64>>,
    warm_start: Option<bool>,
    compute: Option<ComputeSet>,
    trials: Option<usize>,
    horizon: Option<usize>,
    seed: Option<u64>,
    samples: Option<usize>,
    pairs: Option<Option<usize>>,
}

pub fn parse_config(text: &str) -> Result<ProblemConfig, ConfigError> {
    let mut raw = Raw::default();
    let mut section = String::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            if !line.contains(',') {
                section = name.trim().to_string();
                if !["system", "grid", "spec", "noise", "solver", "simulate", "audit"].contains(&section.as_str()) {
                    return Err(ConfigError::Syntax {
                        line: line_no,
                        msg: format!("unknown section [{section}]"),
                    });
                }
                continue;
            }
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: line_no,
            msg: format!("expected 'key = value' or '[section]', found '{line}'"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        let err = |msg: String| ConfigError::Value {
            line: line_no,
            section: section.clone(),
            key: key.to_string(),
            msg,
        };
        match (section.as_str(), key) {
            ("system", "name") => raw.system = Some(value.to_string()),
            ("system", "tau") => raw.tau = Some(parse_real(value).map_err(err)?),
            ("system", "velocity") => raw.velocity = Some(parse_real(value).map_err(err)?),
            ("system", "inputs") => raw.inputs = Some(parse_list(value, parse_real).map_err(err)?),
            ("grid", "region") => raw.region = Some(parse_box(value).map_err(err)?),
            ("grid", "widths") => raw.widths = Some(parse_list(value, parse_real).map_err(err)?),
            ("grid", "cells") => raw.cells = Some(parse_list(value, parse_count).map_err(err)?),
            ("grid", "periodic") => raw.periodic = Some(parse_list(value, parse_bool).map_err(err)?),
            ("grid", "obstacle") => raw.obstacles.push(parse_box(value).map_err(err)?),
            ("spec", "target") => raw.target = Some(parse_box(value).map_err(err)?),
            ("noise", "support") => raw.support = Some(parse_box(value).map_err(err)?),
            ("noise", "under_margin") => raw.under_margin = Some(parse_real(value).map_err(err)?),
            ("noise", "kind") => raw.kind = Some(value.to_string()),
            ("noise", "sigma") => raw.sigma = Some(parse_list(value, parse_real).map_err(err)?),
            ("solver", "warm_start") => raw.warm_start = Some(parse_bool(value).map_err(err)?),
            ("solver", "compute") => raw.compute = Some(ComputeSet::parse(value).map_err(err)?),
            ("simulate", "trials") => raw.trials = Some(parse_count(value).map_err(err)?),
            ("simulate", "horizon") => raw.horizon = Some(parse_count(value).map_err(err)?),
            ("simulate", "seed") => raw.seed = Some(value.parse().map_err(|_| err(format!("bad seed '{value}'")))?),
            ("audit", "samples") => raw.samples = Some(parse_count(value).map_err(err)?),
            ("audit", "pairs") => {
                raw.pairs = Some(if value == "all" {
                    None
                } else {
                    Some(parse_count(value).map_err(err)?)
                })
            }
            ("", _) => {
                return Err(ConfigError::Syntax {
                    line: line_no,
                    msg: format!("key '{key}' appears before any section header"),
                })
            }
            _ => return Err(err("unknown key".into())),
        }
    }
    finish(raw)
}

fn finish(raw: Raw) -> Result<ProblemConfig, ConfigError> {
    let system = raw.system.ok_or(ConfigError::Missing {
        section: "system",
        key: "name",
    })?;
    let region = raw.region.ok_or(ConfigError::Missing {
        section: "grid",
        key: "region",
    })?;
    let n = region.dim();
    let widths = match (raw.widths, raw.cells) {
        (Some(_), Some(_)) => {
            return Err(ConfigError::Invalid(
                "give either [grid] widths or [grid] cells, not both".into(),
            ))
        }
        (Some(w), None) => w,
        (None, Some(c)) => {
            if c.len() != n {
                return Err(ConfigError::Invalid(format!(
                    "[grid] cells has {} entries, the region has dimension {n}",
                    c.len()
                )));
            }
            if c.contains(&0) {
                return Err(ConfigError::Invalid("[grid] cells entries must be positive".into()));
            }
            (0..n).map(|d| region.width(d) / c[d] as f64).collect()
        }
        (None, None) => {
            return Err(ConfigError::Missing {
                section: "grid",
                key: "widths",
            })
        }
    };
    if widths.len() != n {
        return Err(ConfigError::Invalid(format!(
            "[grid] widths has {} entries, the region has dimension {n}",
            widths.len()
        )));
    }
    let periodic = raw.periodic.unwrap_or_else(|| vec![false; n]);
    if periodic.len() != n {
        return Err(ConfigError::Invalid(format!(
            "[grid] periodic has {} entries, the region has dimension {n}",
            periodic.len()
        )));
    }
    let target = raw.target.ok_or(ConfigError::Missing {
        section: "spec",
        key: "target",
    })?;
    if target.dim() != n {
        return Err(ConfigError::Invalid(format!(
            "target has dimension {}, the region has dimension {n}",
            target.dim()
        )));
    }
    if !region.contains(&target) {
        return Err(ConfigError::Invalid(format!(
            "target {target} is not inside the working region {region}"
        )));
    }
    for (i, o) in raw.obstacles.iter().enumerate() {
        if o.dim() != n {
            return Err(ConfigError::Invalid(format!(
                "obstacle {} has dimension {}, the region has dimension {n}",
                i + 1,
                o.dim()
            )));
        }
    }
    if let Some(d) = &raw.support {
        if d.dim() != n {
            return Err(ConfigError::Invalid(format!(
                "noise support has dimension {}, the region has dimension {n}",
                d.dim()
            )));
        }
    }
    let kind = match raw.kind.as_deref() {
        None | Some("uniform") => {
            if raw.sigma.is_some() {
                return Err(ConfigError::Invalid(
                    "[noise] sigma only applies to kind = gaussian".into(),
                ));
            }
            NoiseKind::Uniform
        }
        Some("gaussian") => {
            let sigma = raw.sigma.ok_or(ConfigError::Missing {
                section: "noise",
                key: "sigma",
            })?;
            if sigma.len() != n {
                return Err(ConfigError::Invalid(format!(
                    "[noise] sigma has {} entries, the region has dimension {n}",
                    sigma.len()
                )));
            }
            NoiseKind::TruncatedGaussian { sigma }
        }
        Some(other) => {
            return Err(ConfigError::Invalid(format!(
                "unknown noise kind '{other}' (expected uniform or gaussian)"
            )))
        }
    };
    let config = ProblemConfig {
        system,
        params: SystemParams {
            tau: raw.tau,
            velocity: raw.velocity,
            inputs: raw.inputs,
            noise: raw.support,
            under_margin: raw.under_margin.unwrap_or(0.0),
            kind,
        },
        region,
        widths,
        periodic,
        obstacles: raw.obstacles,
        target,
        warm_start: raw.warm_start.unwrap_or(true),
        compute: raw.compute.unwrap_or_default(),
        sim: SimOptions {
            trials: raw.trials.unwrap_or(SimOptions::default().trials),
            horizon: raw.horizon.unwrap_or(SimOptions::default().horizon),
            seed: raw.seed.unwrap_or(0),
        },
        audit: AuditOptions {
            samples: raw.samples.unwrap_or(AuditOptions::default().samples),
            pairs: raw.pairs.unwrap_or(AuditOptions::default().pairs),
        },
    };
    config.grid()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_and_boxes() {
        assert_eq!(parse_real("-pi").unwrap(), -std::f64::consts::PI);
        assert_eq!(parse_real("0.5*pi").unwrap(), 0.5 * std::f64::consts::PI);
        assert_eq!(parse_real(" 1e-3 ").unwrap(), 1e-3);
        assert!(parse_real("abc").is_err());
        let b = parse_box("[0, 2] x [-1,1]").unwrap();
        assert_eq!(b.lo(), &[0.0, -1.0]);
        assert_eq!(b.hi(), &[2.0, 1.0]);
        assert!(parse_box("[1,0]").is_err());
        assert!(parse_box("(0,1)").is_err());
    }

    #[test]
    fn compute_lists() {
        assert_eq!(ComputeSet::parse("both").unwrap(), ComputeSet::default());
        let c = ComputeSet::parse("over, worst-case").unwrap();
        assert!(c.over && c.worst_case && !c.under && !c.losing);
        let c = ComputeSet::parse("losing").unwrap();
        assert!(c.losing && c.under);
        assert!(ComputeSet::parse("everything").is_err());
    }
}
