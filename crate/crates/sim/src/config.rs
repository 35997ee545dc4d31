//! Flat `key = value` run configuration.
//!
//! One assignment per line, `#` starts a comment. Values are numbers, bare
//! words, or bracketed lists; a matrix is a list of rows, e.g.
//! `a = [[1.01, 0.05], [0.02, 0.98]]`. A value may continue over several
//! lines while its brackets are unbalanced.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use semagg_core::channel::{ChannelModel, ElementDistribution};
use semagg_core::gain_design::{CsscaConfig, StepRule};
use semagg_core::plant::{ActivationModel, PlantModel, SensorTopology};
use semagg_core::Matrix;

use crate::harness::{CollisionPolicy, CpuExperiment, Curvature, ExperimentSetup, GainDesign, Scheme, TopologySpec};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("config error")?;
        if let Some(line) = self.line {
            write!(f, " at line {line}")?;
        }
        if let Some(key) = &self.key {
            write!(f, " ({key})")?;
        }
        write!(f, ": {}", self.message)
    }
}

impl ConfigError {
    fn general(message: impl Into<String>) -> Self {
        ConfigError {
            line: None,
            key: None,
            message: message.into(),
        }
    }
}

const REQUIRED: &[&str] = &[
    "plant", "topology", "sensors", "n_r", "n_t", "channel", "snr_db", "p", "horizon", "seed",
];

const OPTIONAL: &[&str] = &[
    "a",
    "w",
    "x0",
    "topology_gain",
    "c",
    "rayleigh_scale",
    "gaussian_mean",
    "gaussian_variance",
    "schemes",
    "n_runs",
    "pilot_power",
    "calibration_horizon",
    "collision",
    "cssca_iters",
    "cssca_eps0",
    "cssca_eps1",
    "cssca_step",
    "cssca_exponent",
    "armijo_shrink",
    "armijo_slope",
    "cssca_batch",
    "cssca_margin",
    "cssca_smoothing",
    "k_init",
    "curvature_samples",
    "validation_samples",
    "m_values",
    "s_values",
    "cpu_slots",
    "cpu_reps",
    "cpu_warmup",
    "cpu_design_iters",
    "out_dir",
];

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Number(f64),
    Word(String),
    List(Vec<Value>),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub plant: PlantModel,
    pub topology: TopologySpec,
    pub sensors: usize,
    /// Channel before transmit-scale calibration.
    pub channel: ChannelModel,
    pub activation: ActivationModel,
    pub schemes: Vec<Scheme>,
    pub horizon: usize,
    pub n_runs: usize,
    pub pilot_power: f64,
    pub calibration_horizon: usize,
    pub collision: CollisionPolicy,
    pub gain_design: GainDesign,
    pub validation_samples: usize,
    pub m_values: Option<Vec<usize>>,
    pub s_values: Option<Vec<usize>>,
    pub cpu_slots: usize,
    pub cpu_reps: usize,
    pub cpu_warmup: usize,
    pub cpu_design_iters: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl RunConfig {
    pub fn setup(&self) -> ExperimentSetup {
        ExperimentSetup {
            plant: self.plant.clone(),
            topology: self.topology.clone(),
            channel: self.channel.clone(),
            activation: self.activation.clone(),
            horizon: self.horizon,
            pilot_power: self.pilot_power,
            calibration_horizon: self.calibration_horizon,
            collision: self.collision,
            gain_design: self.gain_design.clone(),
            seed: self.seed,
        }
    }

    pub fn cpu_experiment(&self, s_values: Vec<usize>) -> CpuExperiment {
        CpuExperiment {
            s_values,
            sensors: self.sensors,
            n_slots: self.cpu_slots,
            reps: self.cpu_reps,
            warmup_slots: self.cpu_warmup,
            design_iters: self.cpu_design_iters,
        }
    }
}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::general(format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text)
}

struct Entries {
    map: BTreeMap<String, (usize, Value)>,
}

impl Entries {
    fn err(&self, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError {
            line: self.map.get(key).map(|(l, _)| *l),
            key: Some(key.to_string()),
            message: message.into(),
        }
    }

    fn has(&self, key: &str) -> bool {
        self.map.contains_key(key)
    }

    fn value(&self, key: &str) -> Option<&Value> {
        self.map.get(key).map(|(_, v)| v)
    }

    fn f64_opt(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.value(key) {
            None => Ok(None),
            Some(Value::Number(v)) if v.is_finite() => Ok(Some(*v)),
            Some(_) => Err(self.err(key, "expected a finite number")),
        }
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.f64_opt(key)?.unwrap_or(default))
    }

    fn f64_req(&self, key: &str) -> Result<f64, ConfigError> {
        self.f64_opt(key)?.ok_or_else(|| self.err(key, "missing"))
    }

    fn uint_opt(&self, key: &str) -> Result<Option<u64>, ConfigError> {
        match self.value(key) {
            None => Ok(None),
            Some(v) => Ok(Some(
                as_uint(v).ok_or_else(|| self.err(key, "expected a non-negative integer"))?,
            )),
        }
    }

    fn usize_or(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        Ok(self.uint_opt(key)?.map_or(default, |v| v as usize))
    }

    fn usize_min(&self, key: &str, default: usize, min: usize) -> Result<usize, ConfigError> {
        let v = self.usize_or(key, default)?;
        if v < min {
            return Err(self.err(key, format!("value {v} must be at least {min}")));
        }
        Ok(v)
    }

    fn word_opt(&self, key: &str) -> Result<Option<&str>, ConfigError> {
        match self.value(key) {
            None => Ok(None),
            Some(Value::Word(w)) => Ok(Some(w)),
            Some(_) => Err(self.err(key, "expected a word")),
        }
    }

    fn word_req(&self, key: &str) -> Result<&str, ConfigError> {
        self.word_opt(key)?.ok_or_else(|| self.err(key, "missing"))
    }

    fn matrix_opt(&self, key: &str) -> Result<Option<Matrix>, ConfigError> {
        match self.value(key) {
            None => Ok(None),
            Some(v) => as_matrix(v).map(Some).map_err(|m| self.err(key, m)),
        }
    }

    fn uint_list_opt(&self, key: &str) -> Result<Option<Vec<usize>>, ConfigError> {
        match self.value(key) {
            None => Ok(None),
            Some(Value::List(items)) if !items.is_empty() => items
                .iter()
                .map(|v| match as_uint(v) {
                    Some(u) if u >= 1 => Ok(u as usize),
                    _ => Err(self.err(key, "expected a list of positive integers")),
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
            Some(v) => match as_uint(v) {
                Some(u) if u >= 1 => Ok(Some(vec![u as usize])),
                _ => Err(self.err(key, "expected a list of positive integers")),
            },
        }
    }
}

fn as_uint(v: &Value) -> Option<u64> {
    match v {
        Value::Number(x) if *x >= 0.0 && x.fract() == 0.0 && *x <= 2f64.powi(53) => Some(*x as u64),
        // Seeds can exceed the exact f64 integer range.
        Value::Word(w) => w.parse().ok(),
        _ => None,
    }
}

fn as_numbers(v: &Value) -> Option<Vec<f64>> {
    match v {
        Value::List(items) => items
            .iter()
            .map(|x| match x {
                Value::Number(n) => Some(*n),
                _ => None,
            })
            .collect(),
        _ => None,
    }
}

fn as_matrix(v: &Value) -> Result<Matrix, String> {
    let Value::List(items) = v else {
        return Err("expected a bracketed matrix".into());
    };
    if items.is_empty() {
        return Err("matrix is empty".into());
    }
    // A flat list is a column vector.
    if let Some(col) = as_numbers(v) {
        return Matrix::column(&col).map_err(|e| e.to_string());
    }
    let rows: Vec<Vec<f64>> = items
        .iter()
        .map(|r| as_numbers(r).ok_or_else(|| "matrix rows must be lists of numbers".to_string()))
        .collect::<Result<_, _>>()?;
    let width = rows[0].len();
    if rows.iter().any(|r| r.len() != width) {
        return Err("matrix rows have different lengths".into());
    }
    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    Matrix::from_rows(&refs).map_err(|e| e.to_string())
}

fn tokenize(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in s.chars() {
        match ch {
            '[' | ']' | ',' => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
                out.push(ch.to_string());
            }
            c if c.is_whitespace() => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
            }
            c => cur.push(c),
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn atom(tok: &str) -> Value {
    match tok.parse::<f64>() {
        Ok(v) if !tok.eq_ignore_ascii_case("nan") && !tok.to_ascii_lowercase().contains("inf") => Value::Number(v),
        _ => Value::Word(tok.to_string()),
    }
}

fn parse_value(raw: &str) -> Result<Value, String> {
    let toks = tokenize(raw);
    if toks.is_empty() {
        return Err("empty value".into());
    }
    let mut pos = 0;
    let v = parse_tokens(&toks, &mut pos)?;
    if pos != toks.len() {
        return Err(format!("unexpected '{}' after value", toks[pos]));
    }
    Ok(v)
}

fn parse_tokens(toks: &[String], pos: &mut usize) -> Result<Value, String> {
    let tok = toks.get(*pos).ok_or("unexpected end of value")?;
    *pos += 1;
    match tok.as_str() {
        "[" => {
            let mut items = Vec::new();
            loop {
                match toks.get(*pos).map(String::as_str) {
                    None => return Err("unclosed '['".into()),
                    Some("]") => {
                        *pos += 1;
                        return Ok(Value::List(items));
                    }
                    Some(",") if !items.is_empty() => *pos += 1,
                    Some(",") => return Err("misplaced ','".into()),
                    Some(_) => items.push(parse_tokens(toks, pos)?),
                }
            }
        }
        "]" | "," => Err(format!("unexpected '{tok}'")),
        t => Ok(atom(t)),
    }
}

fn collect_entries(text: &str) -> Result<Entries, ConfigError> {
    let mut map = BTreeMap::new();
    let mut pending: Option<(usize, String, String)> = None;
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.split('#').next().unwrap_or("").trim();
        let (start, key, value) = match pending.take() {
            Some((start, key, mut acc)) => {
                acc.push(' ');
                acc.push_str(line);
                (start, key, acc)
            }
            None => {
                if line.is_empty() {
                    continue;
                }
                let Some((k, v)) = line.split_once('=') else {
                    return Err(ConfigError {
                        line: Some(line_no),
                        key: None,
                        message: format!("expected 'key = value', found '{line}'"),
                    });
                };
                (line_no, k.trim().to_string(), v.trim().to_string())
            }
        };
        let depth = value.matches('[').count() as i64 - value.matches(']').count() as i64;
        if depth > 0 {
            pending = Some((start, key, value));
            continue;
        }
        let err = |message: String| ConfigError {
            line: Some(start),
            key: Some(key.clone()),
            message,
        };
        if !REQUIRED.contains(&key.as_str()) && !OPTIONAL.contains(&key.as_str()) {
            return Err(err("unknown key".into()));
        }
        if map.contains_key(&key) {
            return Err(err("duplicate key".into()));
        }
        let parsed = parse_value(&value).map_err(err)?;
        map.insert(key, (start, parsed));
    }
    if let Some((start, key, _)) = pending {
        return Err(ConfigError {
            line: Some(start),
            key: Some(key),
            message: "unclosed '[' at end of file".into(),
        });
    }
    Ok(Entries { map })
}

pub fn parse_config_str(text: &str) -> Result<RunConfig, ConfigError> {
    let e = collect_entries(text)?;
    let missing: Vec<&str> = REQUIRED.iter().copied().filter(|k| !e.has(k)).collect();
    if !missing.is_empty() {
        return Err(ConfigError::general(format!(
            "missing required keys: {}",
            missing.join(", ")
        )));
    }

    let plant = parse_plant(&e)?;
    let s = plant.dim();
    let sensors = e.usize_min("sensors", 0, 1)?;
    let n_r = e.usize_min("n_r", 0, 1)?;
    let n_t = e.usize_min("n_t", 0, 1)?;
    let topology = parse_topology(&e, s, n_t, sensors)?;
    let channel = parse_channel(&e, n_r, n_t)?;

    let p = e.f64_req("p")?;
    if !(0.0..=1.0).contains(&p) {
        return Err(e.err("p", format!("value {p} outside [0, 1]")));
    }
    let activation = ActivationModel::new(p).map_err(|err| e.err("p", err.to_string()))?;

    let schemes = match e.value("schemes") {
        None => Scheme::ALL.to_vec(),
        Some(v) => {
            let words: Vec<&Value> = match v {
                Value::List(items) if !items.is_empty() => items.iter().collect(),
                Value::Word(_) => vec![v],
                _ => return Err(e.err("schemes", "expected a scheme name or a list of them")),
            };
            let mut out = Vec::new();
            for w in words {
                let Value::Word(name) = w else {
                    return Err(e.err("schemes", "expected scheme names"));
                };
                let sc: Scheme = name.parse().map_err(|m: String| e.err("schemes", m))?;
                if out.contains(&sc) {
                    return Err(e.err("schemes", format!("scheme {sc} listed twice")));
                }
                out.push(sc);
            }
            out
        }
    };

    let horizon = e.usize_min("horizon", 0, 1)?;
    let n_runs = e.usize_min("n_runs", 1, 1)?;
    let pilot_power = e.f64_or("pilot_power", 10.0)?;
    if !(pilot_power > 0.0) {
        return Err(e.err("pilot_power", format!("value {pilot_power} must be positive")));
    }
    let calibration_horizon = e.usize_min("calibration_horizon", 300, 1)?;
    let collision = match e.word_opt("collision")? {
        None => CollisionPolicy::default(),
        Some(w) => w.parse().map_err(|m: String| e.err("collision", m))?,
    };
    let gain_design = parse_cssca(&e, s, n_r)?;
    let validation_samples = e.usize_min("validation_samples", 100_000, 1)?;

    let seed = e.uint_opt("seed")?.ok_or_else(|| e.err("seed", "missing"))?;
    let out_dir = match e.value("out_dir") {
        None => PathBuf::from("out"),
        Some(Value::Word(w)) => PathBuf::from(w),
        Some(_) => return Err(e.err("out_dir", "expected a path")),
    };

    Ok(RunConfig {
        plant,
        topology,
        sensors,
        channel,
        activation,
        schemes,
        horizon,
        n_runs,
        pilot_power,
        calibration_horizon,
        collision,
        gain_design,
        validation_samples,
        m_values: e.uint_list_opt("m_values")?,
        s_values: e.uint_list_opt("s_values")?,
        cpu_slots: e.usize_min("cpu_slots", 10_000, 1)?,
        cpu_reps: e.usize_min("cpu_reps", 3, 1)?,
        cpu_warmup: e.usize_min("cpu_warmup", 1000, 1)?,
        cpu_design_iters: e.usize_or("cpu_design_iters", 50)?,
        seed,
        out_dir,
    })
}

fn eq22_dynamics() -> Matrix {
    PlantModel::eq22().a_dyn().clone()
}

fn parse_plant(e: &Entries) -> Result<PlantModel, ConfigError> {
    let (a, w) = match e.word_req("plant")? {
        "eq22" => {
            for k in ["a", "w"] {
                if e.has(k) {
                    return Err(e.err(k, "not allowed with plant = eq22"));
                }
            }
            (eq22_dynamics(), Matrix::identity(3))
        }
        "custom" => {
            let a = e
                .matrix_opt("a")?
                .ok_or_else(|| e.err("a", "required when plant = custom"))?;
            if !a.is_square() {
                return Err(e.err("a", format!("must be square, got {}x{}", a.rows(), a.cols())));
            }
            let w = e
                .matrix_opt("w")?
                .ok_or_else(|| e.err("w", "required when plant = custom"))?;
            if w.shape() != a.shape() {
                return Err(e.err("w", format!("must be {}x{}", a.rows(), a.rows())));
            }
            (a, w)
        }
        other => return Err(e.err("plant", format!("unknown plant '{other}' (expected eq22 or custom)"))),
    };
    let s = a.rows();
    let x0 = match e.matrix_opt("x0")? {
        None => Matrix::zeros(s, 1),
        Some(x) if x.shape() == (s, 1) => x,
        Some(x) => return Err(e.err("x0", format!("must have {s} entries, got {}x{}", x.rows(), x.cols()))),
    };
    PlantModel::new(a, w, x0).map_err(|err| e.err("w", err.to_string()))
}

fn parse_topology(e: &Entries, s: usize, n_t: usize, sensors: usize) -> Result<TopologySpec, ConfigError> {
    let kind = e.word_req("topology")?;
    if kind != "explicit" && e.has("c") {
        return Err(e.err("c", "only allowed with topology = explicit"));
    }
    if kind != "sequential" && e.has("topology_gain") {
        return Err(e.err("topology_gain", "only allowed with topology = sequential"));
    }
    match kind {
        "sequential" => Ok(TopologySpec::Sequential {
            gain: e.f64_or("topology_gain", 1.0)?,
        }),
        "gaussian" => Ok(TopologySpec::Gaussian),
        "explicit" => {
            let Some(Value::List(items)) = e.value("c") else {
                return Err(e.err("c", "required list of matrices when topology = explicit"));
            };
            let mats: Vec<Matrix> = items
                .iter()
                .map(|v| as_matrix(v).map_err(|m| e.err("c", m)))
                .collect::<Result<_, _>>()?;
            if mats.len() != sensors {
                return Err(e.err("c", format!("{} matrices given for {sensors} sensors", mats.len())));
            }
            if let Some(bad) = mats.iter().find(|c| c.shape() != (n_t, s)) {
                return Err(e.err(
                    "c",
                    format!("matrices must be {n_t}x{s}, got {}x{}", bad.rows(), bad.cols()),
                ));
            }
            let topo = SensorTopology::new(mats).map_err(|err| e.err("c", err.to_string()))?;
            Ok(TopologySpec::Explicit(topo))
        }
        other => Err(e.err(
            "topology",
            format!("unknown topology '{other}' (expected sequential, gaussian or explicit)"),
        )),
    }
}

fn parse_channel(e: &Entries, n_r: usize, n_t: usize) -> Result<ChannelModel, ConfigError> {
    let dist = match e.word_req("channel")? {
        "rayleigh" => {
            for k in ["gaussian_mean", "gaussian_variance"] {
                if e.has(k) {
                    return Err(e.err(k, "only allowed with channel = gaussian"));
                }
            }
            let scale = e
                .f64_opt("rayleigh_scale")?
                .ok_or_else(|| e.err("rayleigh_scale", "required when channel = rayleigh"))?;
            if scale < 0.0 {
                return Err(e.err("rayleigh_scale", format!("value {scale} must be >= 0")));
            }
            ElementDistribution::Rayleigh { scale }
        }
        "gaussian" => {
            if e.has("rayleigh_scale") {
                return Err(e.err("rayleigh_scale", "only allowed with channel = rayleigh"));
            }
            let variance = e.f64_or("gaussian_variance", 1.0)?;
            if variance < 0.0 {
                return Err(e.err("gaussian_variance", format!("value {variance} must be >= 0")));
            }
            ElementDistribution::Gaussian {
                mean: e.f64_or("gaussian_mean", 0.0)?,
                variance,
            }
        }
        other => {
            return Err(e.err(
                "channel",
                format!("unknown channel '{other}' (expected rayleigh or gaussian)"),
            ))
        }
    };
    let snr_db = e.f64_req("snr_db")?;
    ChannelModel::new(n_r, n_t, dist, snr_db).map_err(|err| e.err("channel", err.to_string()))
}

fn parse_cssca(e: &Entries, s: usize, n_r: usize) -> Result<GainDesign, ConfigError> {
    let mut cfg = CsscaConfig::new(s, n_r);
    cfg.total_iters = e.usize_or("cssca_iters", cfg.total_iters)?;

    let mut auto = Vec::new();
    for key in ["cssca_eps0", "cssca_eps1"] {
        let v = match e.value(key) {
            None => -1.0,
            Some(Value::Word(w)) if w == "auto" => {
                auto.push(key);
                -1.0
            }
            Some(Value::Number(v)) if *v < 0.0 && v.is_finite() => *v,
            Some(_) => return Err(e.err(key, "expected a negative number or 'auto'")),
        };
        if key == "cssca_eps0" {
            cfg.eps0 = v;
        } else {
            cfg.eps1 = v;
        }
    }
    let curvature = match auto.len() {
        0 => Curvature::Fixed,
        2 => Curvature::Auto {
            samples: e.usize_min("curvature_samples", 10_000, 1)?,
        },
        _ => return Err(e.err(auto[0], "'auto' must be used for both cssca_eps0 and cssca_eps1")),
    };

    cfg.step_rule = match e.word_opt("cssca_step")?.unwrap_or("diminishing") {
        "diminishing" => {
            let exponent = e.f64_or("cssca_exponent", 0.6)?;
            if !(exponent > 0.0 && exponent <= 1.0) {
                return Err(e.err("cssca_exponent", format!("value {exponent} outside (0, 1]")));
            }
            StepRule::Diminishing { exponent }
        }
        "armijo" => {
            let shrink = e.f64_or("armijo_shrink", 0.5)?;
            let slope_fraction = e.f64_or("armijo_slope", 0.1)?;
            for (k, v) in [("armijo_shrink", shrink), ("armijo_slope", slope_fraction)] {
                if !(v > 0.0 && v < 1.0) {
                    return Err(e.err(k, format!("value {v} outside (0, 1)")));
                }
            }
            StepRule::Armijo { shrink, slope_fraction }
        }
        other => {
            return Err(e.err(
                "cssca_step",
                format!("unknown step rule '{other}' (expected diminishing or armijo)"),
            ))
        }
    };
    cfg.batch_size = e.usize_min("cssca_batch", 1, 1)?;
    cfg.feasibility_margin = e.f64_or("cssca_margin", cfg.feasibility_margin)?;
    if cfg.feasibility_margin < 0.0 {
        return Err(e.err("cssca_margin", format!("value {} must be >= 0", cfg.feasibility_margin)));
    }
    cfg.smoothing = match e.value("cssca_smoothing") {
        None => None,
        Some(Value::Word(w)) if w == "none" => None,
        Some(Value::Number(v)) if *v > 0.0 && *v <= 1.0 => Some(*v),
        Some(_) => return Err(e.err("cssca_smoothing", "expected 'none' or an exponent in (0, 1]")),
    };
    if let Some(k) = e.matrix_opt("k_init")? {
        if k.shape() != (s, n_r) {
            return Err(e.err("k_init", format!("must be {s}x{n_r}, got {}x{}", k.rows(), k.cols())));
        }
        cfg.k_init = k;
    }
    cfg.validate().map_err(|err| ConfigError::general(err.to_string()))?;
    Ok(GainDesign { cssca: cfg, curvature })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "plant = eq22\ntopology = sequential\nsensors = 6\nn_r = 3\nn_t = 3\nchannel = rayleigh\nrayleigh_scale = 3\nsnr_db = 12.5\np = 0.3\nhorizon = 300\nseed = 1\n";

    #[test]
    fn eq22_preset_builds_benchmark_plant() {
        let cfg = parse_config_str(MINIMAL).unwrap();
        let want = Matrix::from_rows(&[&[1.01, 0.05, 0.01], &[0.02, 0.98, 0.01], &[0.003, 0.002, 0.98]]).unwrap();
        assert_eq!(cfg.plant.a_dyn(), &want);
        assert_eq!(cfg.plant.w_cov(), &Matrix::identity(3));
        assert_eq!(cfg.schemes, Scheme::ALL.to_vec());
        assert_eq!(cfg.pilot_power, 10.0);
    }

    #[test]
    fn empty_file_lists_required_keys() {
        let err = parse_config_str("").unwrap_err();
        for key in REQUIRED {
            assert!(err.message.contains(key), "{err}");
        }
    }

    #[test]
    fn out_of_range_probability_names_the_key() {
        let text = MINIMAL.replace("p = 0.3", "p = 1.5");
        let err = parse_config_str(&text).unwrap_err();
        assert_eq!(err.key.as_deref(), Some("p"));
        assert_eq!(err.line, Some(9));
        assert!(err.to_string().contains("1.5"));
    }

    #[test]
    fn unknown_and_duplicate_keys_are_rejected() {
        let err = parse_config_str(&format!("{MINIMAL}colour = blue\n")).unwrap_err();
        assert_eq!(err.key.as_deref(), Some("colour"));
        assert_eq!(err.line, Some(12));
        let err = parse_config_str(&format!("{MINIMAL}seed = 2\n")).unwrap_err();
        assert!(err.message.contains("duplicate"));
    }

    #[test]
    fn custom_plant_with_multiline_matrix() {
        let text = MINIMAL.replace(
            "plant = eq22",
            "plant = custom\na = [[0.5, 0.1],\n     [0.0, 0.9]]   # rows\nw = [[1, 0], [0, 2]]\nx0 = [1, -1]",
        );
        let cfg = parse_config_str(&text).unwrap();
        assert_eq!(cfg.plant.dim(), 2);
        assert_eq!(cfg.plant.x0(), &Matrix::column(&[1.0, -1.0]).unwrap());
    }

    #[test]
    fn dimension_inconsistencies_are_reported() {
        let err = parse_config_str(&format!("{MINIMAL}k_init = [[1, 2], [3, 4]]\n")).unwrap_err();
        assert_eq!(err.key.as_deref(), Some("k_init"));
        let text = MINIMAL.replace("topology = sequential", "topology = explicit\nc = [[[1, 0, 0]]]");
        let err = parse_config_str(&text).unwrap_err();
        assert_eq!(err.key.as_deref(), Some("c"));
        let err = parse_config_str(&MINIMAL.replace("plant = eq22", "plant = custom\na = [[1, 2, 3]]\nw = [[1]]"))
            .unwrap_err();
        assert_eq!(err.key.as_deref(), Some("a"));
    }

    #[test]
    fn scheme_lists_and_curvature() {
        let text = format!("{MINIMAL}schemes = [proposed, aloha]\ncssca_eps0 = auto\ncssca_eps1 = auto\n");
        let cfg = parse_config_str(&text).unwrap();
        assert_eq!(cfg.schemes, vec![Scheme::Proposed, Scheme::Aloha]);
        assert_eq!(cfg.gain_design.curvature, Curvature::Auto { samples: 10_000 });
        assert!(parse_config_str(&format!("{MINIMAL}schemes = [proposed, nope]\n")).is_err());
        assert!(parse_config_str(&format!("{MINIMAL}cssca_eps0 = auto\n")).is_err());
        assert!(parse_config_str(&format!("{MINIMAL}cssca_eps0 = 0.5\n")).is_err());
    }

    #[test]
    fn malformed_lines_report_their_number() {
        let err = parse_config_str("plant = eq22\nthis line has no equals\n").unwrap_err();
        assert_eq!(err.line, Some(2));
        let err = parse_config_str(&format!("{MINIMAL}m_values = [3, 6\n")).unwrap_err();
        assert_eq!(err.line, Some(12));
    }
}
