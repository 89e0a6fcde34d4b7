//! Strict JSON run configuration.
//!
//! The file is read into a tree that keeps duplicate keys, then walked once; every
//! unknown key, duplicate, type mismatch and out-of-range value is collected before
//! anything is computed.

use std::fmt;

use serde::de::{self, Deserialize, Deserializer, MapAccess, SeqAccess, Visitor};
use serde::Serialize;

use crate::chaos_moments::default_split;
use crate::conditions::default_eta_grid;
use crate::covariance::{Normalization, SpatialMeasure, TemporalCovariance};
use crate::field_sim::{default_truncation, resolution_scale, Truncation, REQUIRED_MASS};
use crate::increments::HolderFit;

/// JSON value that keeps object entries in order, duplicates included.
#[derive(Debug, Clone, PartialEq)]
pub enum JsonNode {
    Null,
    Bool(bool),
    Number { value: f64, uint: Option<u64> },
    String(String),
    Array(Vec<JsonNode>),
    Object(Vec<(String, JsonNode)>),
}

impl JsonNode {
    fn type_name(&self) -> &'static str {
        match self {
            JsonNode::Null => "null",
            JsonNode::Bool(_) => "boolean",
            JsonNode::Number { .. } => "number",
            JsonNode::String(_) => "string",
            JsonNode::Array(_) => "array",
            JsonNode::Object(_) => "object",
        }
    }
}

impl<'de> Deserialize<'de> for JsonNode {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct NodeVisitor;

        impl<'de> Visitor<'de> for NodeVisitor {
            type Value = JsonNode;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("any JSON value")
            }

            fn visit_bool<E>(self, v: bool) -> Result<JsonNode, E> {
                Ok(JsonNode::Bool(v))
            }

            fn visit_u64<E>(self, v: u64) -> Result<JsonNode, E> {
                Ok(JsonNode::Number { value: v as f64, uint: Some(v) })
            }

            fn visit_i64<E>(self, v: i64) -> Result<JsonNode, E> {
                Ok(JsonNode::Number { value: v as f64, uint: None })
            }

            fn visit_f64<E>(self, v: f64) -> Result<JsonNode, E> {
                Ok(JsonNode::Number { value: v, uint: None })
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<JsonNode, E> {
                Ok(JsonNode::String(v.to_owned()))
            }

            fn visit_string<E>(self, v: String) -> Result<JsonNode, E> {
                Ok(JsonNode::String(v))
            }

            fn visit_unit<E>(self) -> Result<JsonNode, E> {
                Ok(JsonNode::Null)
            }

            fn visit_none<E>(self) -> Result<JsonNode, E> {
                Ok(JsonNode::Null)
            }

            fn visit_some<D: Deserializer<'de>>(self, d: D) -> Result<JsonNode, D::Error> {
                Deserialize::deserialize(d)
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<JsonNode, A::Error> {
                let mut out = Vec::new();
                while let Some(v) = seq.next_element()? {
                    out.push(v);
                }
                Ok(JsonNode::Array(out))
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<JsonNode, A::Error> {
                let mut out = Vec::new();
                while let Some(k) = map.next_key::<String>()? {
                    let v = map.next_value()?;
                    out.push((k, v));
                }
                Ok(JsonNode::Object(out))
            }
        }

        deserializer.deserialize_any(NodeVisitor)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    Syntax(String),
    Invalid(Vec<Violation>),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        match self {
            ConfigError::Syntax(m) => write!(f, "config is not valid JSON: {m}"),
            ConfigError::Invalid(v) => {
                write!(f, "{} config violation(s)", v.len())?;
                for x in v {
                    write!(f, "\n  {x}")?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for ConfigError {}

/// Walks one object, recording unknown and repeated keys.
struct Obj<'a> {
    path: String,
    entries: &'a [(String, JsonNode)],
}

struct Sink(Vec<Violation>);

impl Sink {
    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(Violation {
            path: path.into(),
            message: message.into(),
        });
    }
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_owned()
    } else {
        format!("{path}.{key}")
    }
}

impl<'a> Obj<'a> {
    fn open(node: &'a JsonNode, path: &str, allowed: &[&str], sink: &mut Sink) -> Option<Obj<'a>> {
        let JsonNode::Object(entries) = node else {
            let shown = if path.is_empty() { "config" } else { path };
            sink.push(shown, format!("expected an object, found {}", node.type_name()));
            return None;
        };
        for (i, (k, _)) in entries.iter().enumerate() {
            if entries[..i].iter().any(|(j, _)| j == k) {
                sink.push(join(path, k), "duplicate key");
            } else if !allowed.contains(&k.as_str()) {
                sink.push(join(path, k), format!("unknown key; allowed: {}", allowed.join(", ")));
            }
        }
        Some(Obj {
            path: path.to_owned(),
            entries,
        })
    }

    fn get(&self, key: &str) -> Option<&'a JsonNode> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    fn at(&self, key: &str) -> String {
        join(&self.path, key)
    }

    fn number(&self, key: &str, sink: &mut Sink) -> Option<f64> {
        match self.get(key)? {
            JsonNode::Number { value, .. } => Some(*value),
            other => {
                sink.push(self.at(key), format!("expected a number, found {}", other.type_name()));
                None
            }
        }
    }

    fn uint(&self, key: &str, sink: &mut Sink) -> Option<u64> {
        match self.get(key)? {
            JsonNode::Number { uint: Some(u), .. } => Some(*u),
            other => {
                sink.push(
                    self.at(key),
                    format!("expected a nonnegative integer, found {}", describe(other)),
                );
                None
            }
        }
    }

    fn string(&self, key: &str, sink: &mut Sink) -> Option<&'a str> {
        match self.get(key)? {
            JsonNode::String(s) => Some(s.as_str()),
            other => {
                sink.push(self.at(key), format!("expected a string, found {}", other.type_name()));
                None
            }
        }
    }

    fn numbers(&self, key: &str, sink: &mut Sink) -> Option<Vec<f64>> {
        number_list(self.get(key)?, &self.at(key), sink)
    }

    fn points(&self, key: &str, sink: &mut Sink) -> Option<Vec<Vec<f64>>> {
        let path = self.at(key);
        let JsonNode::Array(items) = self.get(key)? else {
            sink.push(path, "expected an array of points");
            return None;
        };
        let mut out = Vec::with_capacity(items.len());
        let mut ok = true;
        for (i, item) in items.iter().enumerate() {
            match number_list(item, &format!("{path}[{i}]"), sink) {
                Some(p) => out.push(p),
                None => ok = false,
            }
        }
        ok.then_some(out)
    }
}

fn describe(node: &JsonNode) -> String {
    match node {
        JsonNode::Number { value, .. } => format!("{value}"),
        other => other.type_name().to_owned(),
    }
}

fn number_list(node: &JsonNode, path: &str, sink: &mut Sink) -> Option<Vec<f64>> {
    let JsonNode::Array(items) = node else {
        sink.push(path, format!("expected an array of numbers, found {}", node.type_name()));
        return None;
    };
    let mut out = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        match item {
            JsonNode::Number { value, .. } => out.push(*value),
            other => {
                sink.push(format!("{path}[{i}]"), format!("expected a number, found {}", other.type_name()));
                return None;
            }
        }
    }
    Some(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum HolderMode {
    Time,
    Space,
}

/// Values read from the file or flags, before defaults and range checks.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    pub temporal: Option<RawTemporal>,
    pub spatial: Option<RawSpatial>,
    pub seed: Option<u64>,
    pub check: RawCheck,
    pub moments: RawMoments,
    pub simulate: RawSimulate,
    pub holder: RawHolder,
    /// Structural problems found while reading; reported together with range checks.
    pub rejected: Vec<Violation>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RawTemporal {
    Fractional { h: Option<f64> },
    Exponential { lambda: Option<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawSpatial {
    pub alpha: Option<f64>,
    pub d: Option<u64>,
    pub normalization: Option<Normalization>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawCheck {
    pub betas: Option<Vec<f64>>,
    pub max_principle_beta: Option<f64>,
    pub eta_grid: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawMoments {
    pub t: Option<f64>,
    pub n_max: Option<u64>,
    pub samples: Option<u64>,
    pub batches: Option<u64>,
    pub split_n: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawSimulate {
    pub t_grid: Option<Vec<f64>>,
    pub x_grid: Option<Vec<Vec<f64>>>,
    /// `--x-grid` text; split into points once `d` is known.
    pub x_grid_text: Option<String>,
    pub features: Option<u64>,
    pub replicates: Option<u64>,
    pub truncation: Option<Truncation>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawHolder {
    pub t: Option<f64>,
    pub h_min: Option<f64>,
    pub h_max: Option<f64>,
    pub points: Option<u64>,
    pub beta: Option<f64>,
    pub mode: Option<HolderMode>,
    pub tolerance: Option<f64>,
}

const TOP_KEYS: &[&str] = &["temporal", "spatial", "seed", "check", "moments", "simulate", "holder"];

/// Reads the strict file format; all problems are reported together.
pub fn parse_raw(text: &str) -> Result<RawConfig, ConfigError> {
    let root: JsonNode = serde_json::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    let mut sink = Sink(Vec::new());
    let mut raw = RawConfig::default();
    if let Some(top) = Obj::open(&root, "", TOP_KEYS, &mut sink) {
        if let Some(node) = top.get("temporal") {
            raw.temporal = read_temporal(node, &mut sink);
        }
        if let Some(node) = top.get("spatial") {
            raw.spatial = read_spatial(node, &mut sink);
        }
        raw.seed = top.uint("seed", &mut sink);
        if let Some(node) = top.get("check") {
            if let Some(o) = Obj::open(node, "check", &["betas", "max_principle_beta", "eta_grid"], &mut sink) {
                raw.check = RawCheck {
                    betas: o.numbers("betas", &mut sink),
                    max_principle_beta: o.number("max_principle_beta", &mut sink),
                    eta_grid: o.points("eta_grid", &mut sink),
                };
            }
        }
        if let Some(node) = top.get("moments") {
            let keys = ["t", "n_max", "samples", "batches", "split_N"];
            if let Some(o) = Obj::open(node, "moments", &keys, &mut sink) {
                raw.moments = RawMoments {
                    t: o.number("t", &mut sink),
                    n_max: o.uint("n_max", &mut sink),
                    samples: o.uint("samples", &mut sink),
                    batches: o.uint("batches", &mut sink),
                    split_n: o.number("split_N", &mut sink),
                };
            }
        }
        if let Some(node) = top.get("simulate") {
            let keys = ["t_grid", "x_grid", "features", "replicates", "truncation"];
            if let Some(o) = Obj::open(node, "simulate", &keys, &mut sink) {
                let truncation = o.get("truncation").and_then(|n| {
                    let t = Obj::open(n, "simulate.truncation", &["tau_max", "xi_max"], &mut sink)?;
                    let tau = t.number("tau_max", &mut sink);
                    let xi = t.number("xi_max", &mut sink);
                    if tau.is_none() || xi.is_none() {
                        sink.push("simulate.truncation", "needs both tau_max and xi_max");
                    }
                    Some(Truncation {
                        tau_max: tau?,
                        xi_max: xi?,
                    })
                });
                raw.simulate = RawSimulate {
                    t_grid: o.numbers("t_grid", &mut sink),
                    x_grid: o.points("x_grid", &mut sink),
                    x_grid_text: None,
                    features: o.uint("features", &mut sink),
                    replicates: o.uint("replicates", &mut sink),
                    truncation,
                };
            }
        }
        if let Some(node) = top.get("holder") {
            let keys = ["t", "h_min", "h_max", "points", "beta", "mode", "tolerance"];
            if let Some(o) = Obj::open(node, "holder", &keys, &mut sink) {
                let mode = o.string("mode", &mut sink).and_then(|m| match m {
                    "time" => Some(HolderMode::Time),
                    "space" => Some(HolderMode::Space),
                    other => {
                        sink.push("holder.mode", format!("unknown mode \"{other}\"; expected time | space"));
                        None
                    }
                });
                raw.holder = RawHolder {
                    t: o.number("t", &mut sink),
                    h_min: o.number("h_min", &mut sink),
                    h_max: o.number("h_max", &mut sink),
                    points: o.uint("points", &mut sink),
                    beta: o.number("beta", &mut sink),
                    mode,
                    tolerance: o.number("tolerance", &mut sink),
                };
            }
        }
    }
    raw.rejected = sink.0;
    Ok(raw)
}

fn read_temporal(node: &JsonNode, sink: &mut Sink) -> Option<RawTemporal> {
    let JsonNode::Object(entries) = node else {
        sink.push("temporal", format!("expected an object, found {}", node.type_name()));
        return None;
    };
    let kind = entries.iter().find(|(k, _)| k == "kind").map(|(_, v)| v);
    match kind {
        Some(JsonNode::String(k)) if k == "fractional" => {
            let o = Obj::open(node, "temporal", &["kind", "H"], sink)?;
            if o.get("H").is_none() {
                sink.push("temporal.H", "required for kind \"fractional\"");
            }
            Some(RawTemporal::Fractional { h: o.number("H", sink) })
        }
        Some(JsonNode::String(k)) if k == "exponential" => {
            let o = Obj::open(node, "temporal", &["kind", "lambda"], sink)?;
            if o.get("lambda").is_none() {
                sink.push("temporal.lambda", "required for kind \"exponential\"");
            }
            Some(RawTemporal::Exponential {
                lambda: o.number("lambda", sink),
            })
        }
        Some(JsonNode::String(k)) => {
            sink.push("temporal.kind", format!("unknown kind \"{k}\"; expected fractional | exponential"));
            None
        }
        Some(other) => {
            sink.push("temporal.kind", format!("expected a string, found {}", other.type_name()));
            None
        }
        None => {
            sink.push("temporal.kind", "required");
            None
        }
    }
}

fn read_spatial(node: &JsonNode, sink: &mut Sink) -> Option<RawSpatial> {
    let o = Obj::open(node, "spatial", &["kind", "alpha", "d", "normalization"], sink)?;
    match o.string("kind", sink) {
        Some("riesz") => {}
        Some(k) => sink.push("spatial.kind", format!("unknown kind \"{k}\"; expected riesz")),
        None if o.get("kind").is_none() => sink.push("spatial.kind", "required"),
        None => {}
    }
    if o.get("alpha").is_none() {
        sink.push("spatial.alpha", "required for kind \"riesz\"");
    }
    let normalization = o.string("normalization", sink).and_then(|n| match n {
        "unit" => Some(Normalization::Unit),
        "classical" => Some(Normalization::Classical),
        other => {
            sink.push(
                "spatial.normalization",
                format!("unknown normalization \"{other}\"; expected unit | classical"),
            );
            None
        }
    });
    Some(RawSpatial {
        alpha: o.number("alpha", sink),
        d: o.uint("d", sink),
        normalization,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TemporalConfig {
    Fractional {
        #[serde(rename = "H")]
        h: f64,
    },
    Exponential {
        lambda: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpatialConfig {
    pub kind: &'static str,
    pub alpha: f64,
    pub d: usize,
    pub normalization: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckConfig {
    pub betas: Vec<f64>,
    pub max_principle_beta: f64,
    pub eta_grid: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentsConfig {
    pub t: f64,
    pub n_max: usize,
    pub samples: u64,
    pub batches: u64,
    #[serde(rename = "split_N")]
    pub split_n: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateConfig {
    pub t_grid: Vec<f64>,
    pub x_grid: Vec<Vec<f64>>,
    pub features: usize,
    pub replicates: usize,
    pub truncation: Truncation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolderConfig {
    pub t: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub points: usize,
    pub beta: f64,
    pub mode: HolderMode,
    pub tolerance: f64,
}

/// Fully resolved run configuration; serializes to a valid config file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub temporal: TemporalConfig,
    pub spatial: SpatialConfig,
    pub seed: u64,
    pub check: CheckConfig,
    pub moments: MomentsConfig,
    pub simulate: SimulateConfig,
    pub holder: HolderConfig,
    #[serde(skip)]
    pub gamma: TemporalCovariance,
    #[serde(skip)]
    pub mu: SpatialMeasure,
}

pub const DEFAULT_BETAS: [f64; 3] = [0.25, 0.5, 0.75];
pub const DEFAULT_MOMENT_SAMPLES: u64 = 100_000;
pub const DEFAULT_BATCHES: u64 = 64;
pub const DEFAULT_FEATURES: u64 = 8192;
pub const DEFAULT_REPLICATES: u64 = 10_000;
const MAX_ORDER: u64 = 64;

fn unit_open(x: f64) -> bool {
    x > 0.0 && x < 1.0
}

/// Splits `--x-grid` text: commas separate points in d = 1, otherwise `;` separates
/// points and `,` coordinates.
pub fn parse_points(text: &str, d: usize) -> Result<Vec<Vec<f64>>, String> {
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| format!("\"{}\" is not a number", s.trim()))
    };
    if d == 1 {
        return text.split(',').map(|s| num(s).map(|v| vec![v])).collect();
    }
    text.split(';')
        .map(|p| p.split(',').map(num).collect::<Result<Vec<f64>, String>>())
        .collect()
}

pub fn parse_numbers(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| format!("\"{}\" is not a number", s.trim()))
        })
        .collect()
}

/// Applies defaults and range checks, collecting every violation.
pub fn resolve(raw: RawConfig) -> Result<RunConfig, ConfigError> {
    let mut sink = Sink(raw.rejected.clone());

    let gamma = match raw.temporal.clone().unwrap_or(RawTemporal::Fractional { h: Some(0.75) }) {
        RawTemporal::Fractional { h } => h.map(TemporalCovariance::fractional),
        RawTemporal::Exponential { lambda } => lambda.map(TemporalCovariance::exponential),
    }
    .and_then(|r| r.map_err(|e| sink.push("temporal", e.to_string())).ok());

    let spatial = raw.spatial.clone().unwrap_or(RawSpatial {
        alpha: Some(1.0),
        d: Some(1),
        normalization: None,
    });
    let d = spatial.d.unwrap_or(1);
    if d == 0 {
        sink.push("spatial.d", "must be at least 1");
    }
    let mu = spatial.alpha.filter(|_| d >= 1).and_then(|alpha| {
        SpatialMeasure::riesz(alpha, d as usize, spatial.normalization.unwrap_or(Normalization::Unit))
            .map_err(|e| sink.push("spatial", e.to_string()))
            .ok()
    });
    let d = d.max(1) as usize;
    let alpha = mu.map(|m| m.alpha());

    // check
    let betas = raw.check.betas.clone().unwrap_or_else(|| DEFAULT_BETAS.to_vec());
    if betas.is_empty() {
        sink.push("check.betas", "needs at least one value");
    }
    for (i, b) in betas.iter().enumerate() {
        if !unit_open(*b) {
            sink.push(format!("check.betas[{i}]"), format!("beta = {b} outside the admissible interval (0, 1)"));
        }
    }
    let mp_beta = raw
        .check
        .max_principle_beta
        .unwrap_or_else(|| alpha.map_or(0.75, |a| (1.0 + a / 2.0) / 2.0));
    if !unit_open(mp_beta) {
        sink.push(
            "check.max_principle_beta",
            format!("beta = {mp_beta} outside the admissible interval (0, 1)"),
        );
    }
    let eta_grid = raw.check.eta_grid.clone().unwrap_or_else(|| default_eta_grid(d));
    for (i, e) in eta_grid.iter().enumerate() {
        if e.len() != d || e.iter().any(|x| !x.is_finite()) {
            sink.push(format!("check.eta_grid[{i}]"), format!("must be a finite point of R^{d}"));
        }
    }

    // moments
    let m = &raw.moments;
    let mt = m.t.unwrap_or(1.0);
    if !(mt >= 0.0 && mt.is_finite()) {
        sink.push("moments.t", format!("t = {mt} must be finite and >= 0"));
    }
    let n_max = m.n_max.unwrap_or(4);
    if n_max > MAX_ORDER {
        sink.push("moments.n_max", format!("n_max = {n_max} outside [0, {MAX_ORDER}]"));
    }
    let samples = m.samples.unwrap_or(DEFAULT_MOMENT_SAMPLES);
    let batches = m.batches.unwrap_or(DEFAULT_BATCHES);
    if batches == 0 || batches > u32::MAX as u64 {
        sink.push("moments.batches", format!("batches = {batches} outside [1, {}]", u32::MAX));
    }
    if samples < 2 * batches.max(1) {
        sink.push(
            "moments.samples",
            format!("samples = {samples} must be at least 2 per batch ({batches} batches)"),
        );
    }
    if let Some(n) = m.split_n {
        if !(n > 0.0 && n.is_finite()) {
            sink.push("moments.split_N", format!("split radius N = {n} must be positive and finite"));
        }
    }
    let split_n = match (m.split_n, mu, gamma) {
        (Some(n), ..) => n,
        (None, ..) if mt == 0.0 => 1.0,
        (None, Some(mu), Some(g)) if mt > 0.0 && mt.is_finite() => match default_split(mt, &mu, &g) {
            Ok(n) => n,
            Err(e) => {
                sink.push("moments.split_N", e.to_string());
                f64::NAN
            }
        },
        _ => f64::NAN,
    };

    // simulate
    let s = &raw.simulate;
    let t_grid = s.t_grid.clone().unwrap_or_else(|| vec![0.5, 1.0]);
    if t_grid.is_empty() {
        sink.push("simulate.t_grid", "needs at least one time");
    }
    if t_grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        sink.push("simulate.t_grid", "times must be finite and >= 0");
    }
    if t_grid.windows(2).any(|w| !(w[0] < w[1])) {
        sink.push("simulate.t_grid", "times must be strictly increasing");
    }
    if !t_grid.last().is_some_and(|t| *t > 0.0) {
        sink.push("simulate.t_grid", "the last time must be positive");
    }
    let x_grid = match (&s.x_grid_text, &s.x_grid) {
        (Some(text), _) => match parse_points(text, d) {
            Ok(p) => p,
            Err(e) => {
                sink.push("simulate.x_grid", e);
                Vec::new()
            }
        },
        (None, Some(p)) => p.clone(),
        (None, None) => [0.0, 0.5, 1.0]
            .iter()
            .map(|&x| {
                let mut p = vec![0.0; d];
                p[0] = x;
                p
            })
            .collect(),
    };
    if x_grid.is_empty() {
        sink.push("simulate.x_grid", "needs at least one site");
    }
    for (i, p) in x_grid.iter().enumerate() {
        if p.len() != d || p.iter().any(|x| !x.is_finite()) {
            sink.push(format!("simulate.x_grid[{i}]"), format!("must be a finite point of R^{d}"));
        }
    }
    let features = s.features.unwrap_or(DEFAULT_FEATURES);
    if features == 0 {
        sink.push("simulate.features", "must be at least 1");
    }
    let replicates = s.replicates.unwrap_or(DEFAULT_REPLICATES);
    if replicates == 0 {
        sink.push("simulate.replicates", "must be at least 1");
    }
    let grid_ok = !t_grid.is_empty()
        && t_grid.last().is_some_and(|t| *t > 0.0)
        && x_grid.iter().all(|p| p.len() == d);
    let truncation = match (s.truncation, mu, gamma) {
        (Some(tr), ..) => {
            if !(tr.tau_max > 0.0 && tr.xi_max > 0.0) {
                sink.push("simulate.truncation", "radii must be positive");
            }
            tr
        }
        (None, Some(mu), Some(g)) if grid_ok => {
            match default_truncation(&mu, &g, resolution_scale(&t_grid, &x_grid), REQUIRED_MASS) {
                Ok(tr) => tr,
                Err(e) => {
                    sink.push("simulate.truncation", e.to_string());
                    Truncation { tau_max: f64::NAN, xi_max: f64::NAN }
                }
            }
        }
        _ => Truncation { tau_max: f64::NAN, xi_max: f64::NAN },
    };

    // holder
    let h = &raw.holder;
    let ht = h.t.unwrap_or(1.0);
    if !(ht >= 0.0 && ht.is_finite()) {
        sink.push("holder.t", format!("t = {ht} must be finite and >= 0"));
    }
    let h_min = h.h_min.unwrap_or(0.05);
    let h_max = h.h_max.unwrap_or(0.4);
    if !(h_min > 0.0 && h_min.is_finite()) {
        sink.push("holder.h_min", format!("h_min = {h_min} must be positive"));
    }
    if !(h_max > h_min && h_max.is_finite()) {
        sink.push("holder.h_max", format!("h_max = {h_max} must exceed h_min = {h_min}"));
    }
    let points = h.points.unwrap_or(4);
    if points < HolderFit::MIN_POINTS as u64 {
        sink.push(
            "holder.points",
            format!("points = {points}: the exponent fit needs at least {}", HolderFit::MIN_POINTS),
        );
    }
    let beta = h.beta.unwrap_or_else(|| alpha.map_or(0.5, |a| a / 2.0));
    if !unit_open(beta) {
        sink.push("holder.beta", format!("beta = {beta} outside the admissible interval (0, 1)"));
    }
    let mode = h.mode.unwrap_or(HolderMode::Time);
    if mode == HolderMode::Space && d != 1 {
        sink.push("holder.mode", format!("space increments are available for d = 1 only, got d = {d}"));
    }
    let tolerance = h.tolerance.unwrap_or(0.15);
    if !(tolerance > 0.0 && tolerance.is_finite()) {
        sink.push("holder.tolerance", format!("tolerance = {tolerance} must be positive"));
    }

    let (Some(gamma), Some(mu)) = (gamma, mu) else {
        if sink.0.is_empty() {
            sink.push("spatial", "incomplete model");
        }
        return Err(ConfigError::Invalid(sink.0));
    };
    if !sink.0.is_empty() {
        return Err(ConfigError::Invalid(sink.0));
    }
    let temporal = match gamma {
        TemporalCovariance::Fractional { h } => TemporalConfig::Fractional { h },
        TemporalCovariance::Exponential { lambda } => TemporalConfig::Exponential { lambda },
    };
    let SpatialMeasure::Riesz { normalization, .. } = mu;
    Ok(RunConfig {
        temporal,
        spatial: SpatialConfig {
            kind: "riesz",
            alpha: mu.alpha(),
            d,
            normalization: normalization.as_str(),
        },
        seed: raw.seed.unwrap_or(0),
        check: CheckConfig {
            betas,
            max_principle_beta: mp_beta,
            eta_grid,
        },
        moments: MomentsConfig {
            t: mt,
            n_max: n_max as usize,
            samples,
            batches,
            split_n,
        },
        simulate: SimulateConfig {
            t_grid,
            x_grid,
            features: features as usize,
            replicates: replicates as usize,
            truncation,
        },
        holder: HolderConfig {
            t: ht,
            h_min,
            h_max,
            points: points as usize,
            beta,
            mode,
            tolerance,
        },
        gamma,
        mu,
    })
}

/// Parses and resolves a config file with no flag overrides.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    resolve(parse_raw(text)?)
}
