//! Region, controller and report files.
//!
//! Region file:
//!
//! ```text
//! REGION v1
//! dims=2 lo=-3,-3 hi=3,3 w=0.02,0.02 periodic=0,0
//! 17
//! 18
//! PHI
//! ```
//!
//! Cell indices are row-major (last dimension fastest) and ascending; `PHI`
//! stands for the sink and, when present, comes last. A controller file
//! starts with `CONTROLLER v1`, repeats the grid line and then lists
//! `cell input` pairs in ascending cell order. Reals are written in the
//! shortest form that parses back to the same `f64`.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use stochabs_core::grid::Grid;
use stochabs_core::set::AbstractSet;
use stochabs_core::solver::Controller;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("byte {offset}: {msg}")]
pub struct ParseError {
    pub offset: usize,
    pub msg: String,
}

/// Geometry of a grid as recorded in region and controller files.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub widths: Vec<f64>,
    pub periodic: Vec<bool>,
}

impl GridSpec {
    pub fn of(g: &Grid) -> Self {
        Self {
            lo: g.region().lo().to_vec(),
            hi: g.region().hi().to_vec(),
            widths: g.widths().to_vec(),
            periodic: g.periodic().to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn cell_count(&self) -> usize {
        (0..self.dim())
            .map(|d| ((self.hi[d] - self.lo[d]) / self.widths[d]).round() as usize)
            .product()
    }

    /// Number of abstract states including the sink.
    pub fn state_count(&self) -> usize {
        self.cell_count() + 1
    }

    pub fn cell_volume(&self) -> f64 {
        self.widths.iter().product()
    }

    /// Whether `g` has exactly this geometry (bitwise equal reals).
    pub fn matches(&self, g: &Grid) -> bool {
        *self == GridSpec::of(g)
    }
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",")
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let periodic: Vec<&str> = self.periodic.iter().map(|p| if *p { "1" } else { "0" }).collect();
        write!(
            f,
            "dims={} lo={} hi={} w={} periodic={}",
            self.dim(),
            join(&self.lo),
            join(&self.hi),
            join(&self.widths),
            periodic.join(",")
        )
    }
}

/// Line-oriented reader that tracks byte offsets for error messages.
struct Lines<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self { text, pos: 0 }
    }

    /// Next line and the byte offset where it starts.
    fn next_line(&mut self) -> Option<(usize, &'a str)> {
        if self.pos >= self.text.len() {
            return None;
        }
        let start = self.pos;
        let rest = &self.text[start..];
        let (line, advance) = match rest.find('\n') {
            Some(i) => (&rest[..i], i + 1),
            None => (rest, rest.len()),
        };
        self.pos += advance;
        Some((start, line.strip_suffix('\r').unwrap_or(line)))
    }

    fn expect(&mut self, what: &str) -> Result<(usize, &'a str), ParseError> {
        self.next_line().ok_or_else(|| ParseError {
            offset: self.text.len(),
            msg: format!("unexpected end of file, expected {what}"),
        })
    }
}

fn err(offset: usize, msg: impl Into<String>) -> ParseError {
    ParseError {
        offset,
        msg: msg.into(),
    }
}

fn parse_grid_line(offset: usize, line: &str) -> Result<GridSpec, ParseError> {
    let fields: Vec<&str> = line.split(' ').collect();
    let keys = ["dims", "lo", "hi", "w", "periodic"];
    if fields.len() != keys.len() {
        return Err(err(offset, "grid line must have fields dims, lo, hi, w, periodic"));
    }
    let mut values = Vec::new();
    let mut at = offset;
    for (field, key) in fields.iter().zip(keys) {
        let v = field
            .strip_prefix(key)
            .and_then(|r| r.strip_prefix('='))
            .ok_or_else(|| err(at, format!("expected '{key}=...'")))?;
        values.push((at + key.len() + 1, v));
        at += field.len() + 1;
    }
    let (dims_at, dims) = values[0];
    let n: usize = dims.parse().map_err(|_| err(dims_at, "bad dimension"))?;
    if n == 0 {
        return Err(err(dims_at, "dimension must be positive"));
    }
    let reals = |(pos, s): (usize, &str)| -> Result<Vec<f64>, ParseError> {
        let xs: Result<Vec<f64>, _> = s.split(',').map(str::parse::<f64>).collect();
        let xs = xs.map_err(|_| err(pos, "bad number list"))?;
        if xs.len() != n || xs.iter().any(|x| !x.is_finite()) {
            return Err(err(pos, format!("expected {n} finite numbers")));
        }
        Ok(xs)
    };
    let lo = reals(values[1])?;
    let hi = reals(values[2])?;
    let widths = reals(values[3])?;
    let (p_at, p) = values[4];
    let periodic: Vec<bool> = p
        .split(',')
        .map(|x| match x {
            "0" => Ok(false),
            "1" => Ok(true),
            _ => Err(err(p_at, "periodic flags must be 0 or 1")),
        })
        .collect::<Result<_, _>>()?;
    if periodic.len() != n {
        return Err(err(p_at, format!("expected {n} periodic flags")));
    }
    for d in 0..n {
        if widths[d] <= 0.0 || hi[d] <= lo[d] {
            return Err(err(offset, format!("degenerate grid in dimension {d}")));
        }
    }
    Ok(GridSpec {
        lo,
        hi,
        widths,
        periodic,
    })
}

pub fn format_region(spec: &GridSpec, set: &AbstractSet) -> String {
    let sink = spec.cell_count();
    let mut out = format!("REGION v1\n{spec}\n");
    for i in set.iter() {
        if i == sink {
            out.push_str("PHI\n");
        } else {
            out.push_str(&format!("{i}\n"));
        }
    }
    out
}

pub fn parse_region(text: &str) -> Result<(GridSpec, AbstractSet), ParseError> {
    let mut lines = Lines::new(text);
    let (at, header) = lines.expect("header")?;
    if header != "REGION v1" {
        return Err(err(at, "expected header 'REGION v1'"));
    }
    let (at, grid) = lines.expect("grid line")?;
    let spec = parse_grid_line(at, grid)?;
    let sink = spec.cell_count();
    let mut set = AbstractSet::empty(spec.state_count());
    let mut last: Option<usize> = None;
    while let Some((at, line)) = lines.next_line() {
        let i = if line == "PHI" {
            sink
        } else {
            let i: usize = line
                .parse()
                .map_err(|_| err(at, format!("expected a cell index or PHI, found '{line}'")))?;
            if i >= sink {
                return Err(err(at, format!("cell index {i} out of range 0..{sink}")));
            }
            i
        };
        if last.is_some_and(|l| i <= l) {
            return Err(err(at, "indices must be strictly ascending"));
        }
        last = Some(i);
        set.insert(i);
    }
    Ok((spec, set))
}

pub fn format_controller(spec: &GridSpec, c: &Controller) -> String {
    let mut out = format!("CONTROLLER v1\n{spec}\n");
    for (cell, u) in c.entries() {
        out.push_str(&format!("{cell} {u}\n"));
    }
    out
}

pub fn parse_controller(text: &str) -> Result<(GridSpec, Controller), ParseError> {
    let mut lines = Lines::new(text);
    let (at, header) = lines.expect("header")?;
    if header != "CONTROLLER v1" {
        return Err(err(at, "expected header 'CONTROLLER v1'"));
    }
    let (at, grid) = lines.expect("grid line")?;
    let spec = parse_grid_line(at, grid)?;
    let mut c = Controller::empty(spec.state_count());
    let mut last: Option<usize> = None;
    while let Some((at, line)) = lines.next_line() {
        let (a, b) = line
            .split_once(' ')
            .ok_or_else(|| err(at, format!("expected 'cell input', found '{line}'")))?;
        let cell: usize = a.parse().map_err(|_| err(at, format!("bad cell index '{a}'")))?;
        let u: usize = b
            .parse()
            .map_err(|_| err(at + a.len() + 1, format!("bad input index '{b}'")))?;
        if cell >= spec.cell_count() {
            return Err(err(at, format!("cell index {cell} out of range")));
        }
        if last.is_some_and(|l| cell <= l) {
            return Err(err(at, "cells must be strictly ascending"));
        }
        last = Some(cell);
        c.set(cell, u);
    }
    Ok((spec, c))
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory, so readers never observe a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn read_to_string(path: &Path) -> io::Result<String> {
    fs::read_to_string(path)
}

/// Ordered `key=value` report.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    entries: Vec<(String, String)>,
}

impl Report {
    pub fn push(&mut self, key: &str, value: impl fmt::Display) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut lines = Lines::new(text);
        let mut r = Report::default();
        while let Some((at, line)) = lines.next_line() {
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| err(at, "expected key=value"))?;
            r.push(k, v);
        }
        Ok(r)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k}={v}")?;
        }
        Ok(())
    }
}
