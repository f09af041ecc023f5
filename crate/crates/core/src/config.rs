//! Sectioned `key = value` configuration.
//!
//! ```text
//! # comment
//! [gamma]
//! samples = 20001
//! lambdas = 0.5, 1, 2, 2.9, 3
//! ```
//!
//! Every key has a typed default in [`SCHEMA`]; unknown sections or keys,
//! duplicates and ill-typed values are errors carrying the line number.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Kind {
    /// Finite real, at least `min` when given.
    Float(Option<f64>),
    /// Unsigned integer, at least the bound.
    Int(u64),
    Bool,
    /// Comma-separated finite reals, at least one.
    FloatList,
    /// Comma-separated non-empty tokens, at least one.
    StrList,
    Choice(&'static [&'static str]),
}

pub struct Entry {
    pub section: &'static str,
    pub key: &'static str,
    pub default: &'static str,
    pub kind: Kind,
    pub doc: &'static str,
}

const fn e(section: &'static str, key: &'static str, default: &'static str, kind: Kind, doc: &'static str) -> Entry {
    Entry {
        section,
        key,
        default,
        kind,
        doc,
    }
}

const POS: Kind = Kind::Float(Some(f64::MIN_POSITIVE));

pub const SCHEMA: &[Entry] = &[
    e("run", "seed", "0", Kind::Int(0), "base seed for every seeded sampler; --seed overrides"),
    e("hull-check", "arc_intervals", "100", Kind::Int(2), "arc subdivisions; interior samples sit at kπ/n"),
    e("hull-check", "family_size", "64", Kind::Int(4), "quasi-convex test functions"),
    e("hull-check", "tol", "1e-9", Kind::Float(Some(0.0)), "hull distance tolerance"),
    e("monge", "resolution", "33", Kind::Int(5), "nodes per side for the square solves"),
    e("monge", "exp_resolutions", "17, 33, 65", Kind::FloatList, "refinement ladder for the manufactured exponential"),
    e("monge", "disk_resolution", "129", Kind::Int(9), "nodes per side for the disk solve"),
    e("monge", "tol", "1e-10", POS, "Newton residual tolerance"),
    e("monge", "hull_tol_factor", "4", POS, "hull tolerance in grid spacings"),
    e("monge", "expansion_lambdas", "0, 0.5, 1, 2, 10", Kind::FloatList, "λ values for the determinant expansion"),
    e("radial", "a", "1", POS, "inner radius"),
    e("radial", "b", "2", POS, "outer radius"),
    e("radial", "lambdas", "1, 10, 50, 100", Kind::FloatList, "λ values for the sine scan"),
    e("radial", "s_min", "-20", Kind::Float(None), "smallest initial slope"),
    e("radial", "s_max", "20", Kind::Float(None), "largest initial slope"),
    e("radial", "samples", "401", Kind::Int(3), "slopes per scan"),
    e("radial", "steps", "2000", Kind::Int(100), "RK4 steps per shot in scans"),
    e("radial", "energy_steps", "100000", Kind::Int(100), "RK4 steps for the conservation check"),
    e("radial", "energy_lambda", "50", POS, "λ for the conservation check"),
    e("radial", "energy_slope", "5", Kind::Float(None), "initial slope for the conservation check"),
    e("radial", "pohozaev_resolutions", "65, 129, 257", Kind::FloatList, "radial node counts for the disk eigenfunction ladder"),
    e("annulus", "nr", "25", Kind::Int(4), "radial nodes including both rims"),
    e("annulus", "ntheta", "48", Kind::Int(8), "angular nodes"),
    e("annulus", "inner", "1", POS, "inner radius"),
    e("annulus", "outer", "2", POS, "outer radius"),
    e("annulus", "start_factor", "3", POS, "sweep starts at this multiple of λ₁"),
    e("annulus", "end_factor", "20", POS, "sweep ends at this multiple of λ₁"),
    e("annulus", "steps", "12", Kind::Int(2), "λ values in the sweep"),
    e(
        "annulus",
        "seeds",
        "zero, radial:1, radial:pi, radial:2pi, radial:4pi, mode:1:2pi, mode:2:2pi, mode:3:2pi, mode:4:2pi, mode:5:2pi, mode:6:2pi, random:1:pi, random:2:2pi, random:3:4pi",
        Kind::StrList,
        "seed corpus",
    ),
    e("annulus", "nonlinearity", "neg-sine", Kind::Choice(&["neg-sine", "logistic"]), "right-hand side f"),
    e("annulus", "tol", "1e-8", POS, "Newton residual tolerance"),
    e("annulus", "radial_threshold", "1e-3", POS, "radiality at or below this counts as radial"),
    e("gamma", "x_min", "-100", Kind::Float(None), "scan window start"),
    e("gamma", "x_max", "100", Kind::Float(None), "scan window end"),
    e("gamma", "samples", "20001", Kind::Int(3), "scan samples"),
    e("gamma", "certificate_samples", "10000", Kind::Int(3), "samples per class certificate"),
    e("gamma", "lipschitz_pairs", "1000000", Kind::Int(1), "random pairs for the Lipschitz estimate"),
    e("gamma", "lambdas", "0.5, 1, 2, 2.9, 3", Kind::FloatList, "λ values for the lower bound, each in (0, 3]"),
    e("minimax", "corpus", "100", Kind::Int(1), "random instances"),
    e("minimax", "factor", "2", POS, "corpus λ as a multiple of θ"),
    e("minimax", "grid_step", "1e-4", POS, "v grid spacing for the two-state instance"),
    e("minimax", "zoom", "6", Kind::Int(0), "zoom refinements of the v grid"),
    e("minimax", "dimension", "8", Kind::Int(1), "Galerkin modes"),
    e("minimax", "gradient_points", "20", Kind::Int(1), "random points for the gradient check"),
    e("connectivity", "resolution", "129", Kind::Int(16), "grid nodes per axis"),
    e("connectivity", "y_min", "-10", Kind::Float(None), "y box start"),
    e("connectivity", "y_max", "10", Kind::Float(None), "y box end"),
    e("connectivity", "eps", "1e-3", POS, "relative band thickness"),
];

pub const SECTIONS: &[&str] = &["run", "hull-check", "monge", "radial", "annulus", "gamma", "minimax", "connectivity"];

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Float(f64),
    Int(u64),
    Bool(bool),
    FloatList(Vec<f64>),
    StrList(Vec<String>),
    Choice(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    values: BTreeMap<(String, String), Value>,
}

fn lookup(section: &str, key: &str) -> Option<&'static Entry> {
    SCHEMA.iter().find(|e| e.section == section && e.key == key)
}

fn parse_float(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn parse_value(kind: Kind, raw: &str) -> std::result::Result<Value, String> {
    let raw = raw.trim();
    match kind {
        Kind::Float(min) => {
            let v = parse_float(raw).ok_or_else(|| format!("expected a finite number, got {raw:?}"))?;
            match min {
                Some(m) if v < m => Err(format!("{v} is below the minimum {m}")),
                _ => Ok(Value::Float(v)),
            }
        }
        Kind::Int(min) => {
            let v: u64 = raw.parse().map_err(|_| format!("expected a non-negative integer, got {raw:?}"))?;
            if v < min {
                Err(format!("{v} is below the minimum {min}"))
            } else {
                Ok(Value::Int(v))
            }
        }
        Kind::Bool => match raw {
            "true" => Ok(Value::Bool(true)),
            "false" => Ok(Value::Bool(false)),
            _ => Err(format!("expected true or false, got {raw:?}")),
        },
        Kind::FloatList => {
            let items: Vec<&str> = raw.split(',').map(str::trim).collect();
            if items.iter().any(|s| s.is_empty()) {
                return Err("empty list item".into());
            }
            items
                .iter()
                .map(|s| parse_float(s).ok_or_else(|| format!("expected a finite number, got {s:?}")))
                .collect::<std::result::Result<_, _>>()
                .map(Value::FloatList)
        }
        Kind::StrList => {
            let items: Vec<String> = raw.split(',').map(|s| s.trim().to_string()).collect();
            if items.iter().any(String::is_empty) {
                return Err("empty list item".into());
            }
            Ok(Value::StrList(items))
        }
        Kind::Choice(options) => {
            if options.contains(&raw) {
                Ok(Value::Choice(raw.to_string()))
            } else {
                Err(format!("expected one of {}, got {raw:?}", options.join(", ")))
            }
        }
    }
}

impl Default for Config {
    fn default() -> Self {
        let values = SCHEMA
            .iter()
            .map(|e| {
                let v = parse_value(e.kind, e.default).expect("schema defaults parse");
                ((e.section.to_string(), e.key.to_string()), v)
            })
            .collect();
        Self { values }
    }
}

impl Config {
    /// Defaults overridden by `text`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut section: Option<String> = None;
        let mut seen: BTreeMap<(String, String), usize> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let err = |message: String| Error::Config { line: line_no, message };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| err("section header is missing ']'".into()))?
                    .trim();
                if !SECTIONS.contains(&name) {
                    return Err(err(format!("unknown section [{name}]; expected one of {}", SECTIONS.join(", "))));
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got {line:?}")))?;
            let key = key.trim();
            let sec = section.as_deref().ok_or_else(|| err(format!("key {key:?} appears before any section")))?;
            let entry = lookup(sec, key).ok_or_else(|| err(format!("unknown key {key:?} in [{sec}]")))?;
            let id = (sec.to_string(), key.to_string());
            if let Some(prev) = seen.insert(id.clone(), line_no) {
                return Err(err(format!("[{sec}] {key} already set on line {prev}")));
            }
            let v = parse_value(entry.kind, value).map_err(|m| err(format!("[{sec}] {key}: {m}")))?;
            cfg.values.insert(id, v);
        }
        cfg.cross_check()?;
        Ok(cfg)
    }

    /// Relations between keys; reported against line 0.
    fn cross_check(&self) -> Result<()> {
        let bad = |message: String| Err(Error::Config { line: 0, message });
        if self.float("radial", "a") >= self.float("radial", "b") {
            return bad("[radial] needs a < b".into());
        }
        if self.float("radial", "s_min") >= self.float("radial", "s_max") {
            return bad("[radial] needs s_min < s_max".into());
        }
        if self.float("annulus", "inner") >= self.float("annulus", "outer") {
            return bad("[annulus] needs inner < outer".into());
        }
        if self.float("annulus", "start_factor") >= self.float("annulus", "end_factor") {
            return bad("[annulus] needs start_factor < end_factor".into());
        }
        if self.float("gamma", "x_min") >= self.float("gamma", "x_max") {
            return bad("[gamma] needs x_min < x_max".into());
        }
        if self.floats("gamma", "lambdas").iter().any(|&l| !(l > 0.0 && l <= 3.0)) {
            return bad("[gamma] lambdas must lie in (0, 3]".into());
        }
        if self.float("connectivity", "y_min") >= self.float("connectivity", "y_max") {
            return bad("[connectivity] needs y_min < y_max".into());
        }
        for (sec, key, min) in [("monge", "exp_resolutions", 5.0), ("radial", "pohozaev_resolutions", 9.0)] {
            if self.floats(sec, key).iter().any(|&v| v.fract() != 0.0 || v < min) {
                return bad(format!("[{sec}] {key} must be integers of at least {min}"));
            }
        }
        for s in self.strings("annulus", "seeds") {
            if let Err(e) = s.parse::<crate::annulus::SeedSpec>() {
                return bad(format!("[annulus] seeds: {e}"));
            }
        }
        Ok(())
    }

    fn get(&self, section: &str, key: &str) -> &Value {
        self.values
            .get(&(section.to_string(), key.to_string()))
            .unwrap_or_else(|| panic!("[{section}] {key} is not in the schema"))
    }

    pub fn float(&self, section: &str, key: &str) -> f64 {
        match self.get(section, key) {
            Value::Float(v) => *v,
            Value::Int(v) => *v as f64,
            other => panic!("[{section}] {key} is {other:?}, not a number"),
        }
    }

    pub fn int(&self, section: &str, key: &str) -> u64 {
        match self.get(section, key) {
            Value::Int(v) => *v,
            other => panic!("[{section}] {key} is {other:?}, not an integer"),
        }
    }

    pub fn usize(&self, section: &str, key: &str) -> usize {
        self.int(section, key) as usize
    }

    pub fn boolean(&self, section: &str, key: &str) -> bool {
        match self.get(section, key) {
            Value::Bool(v) => *v,
            other => panic!("[{section}] {key} is {other:?}, not a bool"),
        }
    }

    pub fn floats(&self, section: &str, key: &str) -> Vec<f64> {
        match self.get(section, key) {
            Value::FloatList(v) => v.clone(),
            other => panic!("[{section}] {key} is {other:?}, not a list"),
        }
    }

    pub fn strings(&self, section: &str, key: &str) -> Vec<String> {
        match self.get(section, key) {
            Value::StrList(v) => v.clone(),
            other => panic!("[{section}] {key} is {other:?}, not a list"),
        }
    }

    pub fn choice(&self, section: &str, key: &str) -> &str {
        match self.get(section, key) {
            Value::Choice(v) => v,
            other => panic!("[{section}] {key} is {other:?}, not a choice"),
        }
    }

    pub fn seed(&self) -> u64 {
        self.int("run", "seed")
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.values.insert(("run".into(), "seed".into()), Value::Int(seed));
    }

    /// `key = value` pairs of one section in schema order, for report echoes.
    pub fn section(&self, section: &str) -> BTreeMap<String, String> {
        SCHEMA
            .iter()
            .filter(|e| e.section == section)
            .map(|e| (e.key.to_string(), render(self.get(section, e.key))))
            .collect()
    }

    /// Parseable text with one comment per key; `parse(to_text())` round-trips.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for sec in SECTIONS {
            let _ = writeln!(out, "[{sec}]");
            for e in SCHEMA.iter().filter(|e| e.section == *sec) {
                let _ = writeln!(out, "# {}", e.doc);
                let _ = writeln!(out, "{} = {}", e.key, render(self.get(sec, e.key)));
            }
            out.push('\n');
        }
        out
    }
}

fn render(v: &Value) -> String {
    let num = |x: &f64| format!("{x:?}");
    match v {
        Value::Float(x) => num(x),
        Value::Int(x) => x.to_string(),
        Value::Bool(x) => x.to_string(),
        Value::FloatList(xs) => xs.iter().map(num).collect::<Vec<_>>().join(", "),
        Value::StrList(xs) => xs.join(", "),
        Value::Choice(x) => x.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_of(err: Error) -> usize {
        match err {
            Error::Config { line, .. } => line,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn defaults_round_trip() {
        let d = Config::default();
        assert_eq!(Config::parse(&d.to_text()).unwrap(), d);
        assert_eq!(Config::parse("").unwrap(), d);
    }

    #[test]
    fn overrides_and_comments() {
        let c = Config::parse("# top\n[gamma]\nsamples = 101 # inline\nlambdas = 1, 2\n\n[run]\nseed=7\n").unwrap();
        assert_eq!(c.usize("gamma", "samples"), 101);
        assert_eq!(c.floats("gamma", "lambdas"), vec![1.0, 2.0]);
        assert_eq!(c.seed(), 7);
    }

    #[test]
    fn diagnostics_carry_lines() {
        assert_eq!(line_of(Config::parse("[gamma]\n\nbogus = 1").unwrap_err()), 3);
        assert_eq!(line_of(Config::parse("[nowhere]").unwrap_err()), 1);
        assert_eq!(line_of(Config::parse("samples = 3").unwrap_err()), 1);
        assert_eq!(line_of(Config::parse("[gamma]\nsamples = two").unwrap_err()), 2);
        assert_eq!(line_of(Config::parse("[gamma]\nsamples = 2").unwrap_err()), 2);
        assert_eq!(line_of(Config::parse("[gamma]\nsamples = 5\nsamples = 6").unwrap_err()), 3);
        assert_eq!(line_of(Config::parse("[gamma\n").unwrap_err()), 1);
        assert_eq!(line_of(Config::parse("[gamma]\nx_min = nan").unwrap_err()), 2);
        assert_eq!(line_of(Config::parse("[gamma]\nlambdas = 1,,2").unwrap_err()), 2);
        assert_eq!(line_of(Config::parse("[annulus]\nnonlinearity = cubic").unwrap_err()), 2);
        assert_eq!(line_of(Config::parse("[gamma]\nlambdas = 3.5").unwrap_err()), 0);
        assert_eq!(line_of(Config::parse("[annulus]\nseeds = zero, mode:0:1").unwrap_err()), 0);
    }
}
