//! Strict TOML configuration.
//!
//! Every key is optional and falls back to a documented default; any key
//! not listed here is rejected with its full dotted path. The effective
//! values can be written back out as a manifest that loads to the same
//! configuration.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use toml::{Table, Value};

use crate::barrier::SafetyParams;
use crate::error::{Error, Result};
use crate::field::{build_field, inflate_field, GridSpec};
use crate::geometry::{GateGeometry, Vec3};
use crate::sim::{Mode, PolicyParams, SafetyMaps, TrialParams};

const SECTIONS: &[(&str, &[&str])] = &[
    ("geometry", &["inner_size", "bar_thickness"]),
    ("map", &["resolution", "min", "max", "inflate"]),
    ("safety", &["R", "gamma", "alpha"]),
    ("noise", &["dw", "dv"]),
    ("sim", &["dt", "laps", "max_time", "seed"]),
    ("track", &["num_gates", "spacing"]),
    (
        "policy",
        &["gain", "pass_through", "lookahead", "aim_offset"],
    ),
    ("experiment", &["levels", "tracks", "modes"]),
];

#[derive(Debug, Clone, PartialEq)]
pub struct MapConfig {
    pub resolution: f64,
    pub min: Vec3,
    pub max: Vec3,
    /// Worst-case inflation half-widths for the uncertainty-aware map.
    pub inflate: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub laps: usize,
    pub max_time: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackConfig {
    pub num_gates: usize,
    pub spacing: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub levels: Vec<f64>,
    pub tracks: usize,
    pub modes: Vec<Mode>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub geometry: GateGeometry,
    pub map: MapConfig,
    pub safety: SafetyParams,
    pub sim: SimConfig,
    pub track: TrackConfig,
    pub policy: PolicyParams,
    pub experiment: ExperimentConfig,
}

impl Default for Config {
    fn default() -> Self {
        let safety = SafetyParams::default();
        Self {
            geometry: GateGeometry::default(),
            map: MapConfig {
                resolution: 0.1,
                min: Vec3::new(-6.0, -6.0, -4.0),
                max: Vec3::new(6.0, 6.0, 4.0),
                inflate: safety.dv,
            },
            safety,
            sim: SimConfig {
                dt: 0.02,
                laps: 3,
                max_time: 120.0,
                seed: 0,
            },
            track: TrackConfig {
                num_gates: 8,
                spacing: 6.25,
            },
            policy: PolicyParams::default(),
            experiment: ExperimentConfig {
                levels: vec![0.0, 0.5, 1.0, 1.5],
                tracks: 10,
                modes: Mode::ALL.to_vec(),
            },
        }
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<Config> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, path)
}

/// Parse and validate config text; `origin` only labels parse errors.
pub fn parse_config(text: &str, origin: &Path) -> Result<Config> {
    let root: Table = text.parse().map_err(|e: toml::de::Error| Error::Parse {
        path: origin.to_path_buf(),
        message: e.to_string().trim_end().to_string(),
    })?;
    check_keys(&root)?;
    let r = Reader { root: &root };
    let d = Config::default();

    let dv = r.vec3("noise", "dv", d.safety.dv)?;
    let cfg = Config {
        geometry: GateGeometry {
            inner_size: r.f64("geometry", "inner_size", d.geometry.inner_size)?,
            bar_thickness: r.f64("geometry", "bar_thickness", d.geometry.bar_thickness)?,
        },
        map: MapConfig {
            resolution: r.f64("map", "resolution", d.map.resolution)?,
            min: r.vec3("map", "min", d.map.min)?,
            max: r.vec3("map", "max", d.map.max)?,
            inflate: r.vec3("map", "inflate", dv)?,
        },
        safety: SafetyParams {
            radius: r.f64("safety", "R", d.safety.radius)?,
            gamma: r.f64("safety", "gamma", d.safety.gamma)?,
            alpha: r.f64("safety", "alpha", d.safety.alpha)?,
            dw: r.vec3("noise", "dw", d.safety.dw)?,
            dv,
        },
        sim: SimConfig {
            dt: r.f64("sim", "dt", d.sim.dt)?,
            laps: r.count("sim", "laps", d.sim.laps as u64)? as usize,
            max_time: r.f64("sim", "max_time", d.sim.max_time)?,
            seed: r.count("sim", "seed", d.sim.seed)?,
        },
        track: TrackConfig {
            num_gates: r.count("track", "num_gates", d.track.num_gates as u64)? as usize,
            spacing: r.f64("track", "spacing", d.track.spacing)?,
        },
        policy: PolicyParams {
            gain: r.f64("policy", "gain", d.policy.gain)?,
            pass_through: r.f64("policy", "pass_through", d.policy.pass_through)?,
            lookahead: r.f64("policy", "lookahead", d.policy.lookahead)?,
            aim_offset: r.vec3("policy", "aim_offset", d.policy.aim_offset)?,
        },
        experiment: ExperimentConfig {
            levels: r.f64_list("experiment", "levels", &d.experiment.levels)?,
            tracks: r.count("experiment", "tracks", d.experiment.tracks as u64)? as usize,
            modes: r.modes("experiment", "modes", &d.experiment.modes)?,
        },
    };
    cfg.validate()?;
    Ok(cfg)
}

fn check_keys(root: &Table) -> Result<()> {
    for (section, value) in root {
        let Some((_, keys)) = SECTIONS.iter().find(|(name, _)| name == section) else {
            return Err(Error::UnknownKey(section.clone()));
        };
        let Value::Table(table) = value else {
            return Err(invalid(section, "must be a table"));
        };
        if let Some(key) = table.keys().find(|k| !keys.contains(&k.as_str())) {
            return Err(Error::UnknownKey(format!("{section}.{key}")));
        }
    }
    Ok(())
}

fn invalid(key: &str, message: impl Into<String>) -> Error {
    Error::Validation {
        key: key.to_string(),
        message: message.into(),
    }
}

struct Reader<'a> {
    root: &'a Table,
}

impl Reader<'_> {
    fn get(&self, section: &str, key: &str) -> Option<&Value> {
        self.root.get(section)?.as_table()?.get(key)
    }

    fn f64(&self, section: &str, key: &str, default: f64) -> Result<f64> {
        match self.get(section, key) {
            None => Ok(default),
            Some(v) => {
                number(v).ok_or_else(|| invalid(&format!("{section}.{key}"), "expected a number"))
            }
        }
    }

    fn count(&self, section: &str, key: &str, default: u64) -> Result<u64> {
        match self.get(section, key) {
            None => Ok(default),
            Some(Value::Integer(n)) if *n >= 0 => Ok(*n as u64),
            Some(_) => Err(invalid(
                &format!("{section}.{key}"),
                "expected a non-negative integer",
            )),
        }
    }

    /// A 3-vector, or a single number applied to every axis.
    fn vec3(&self, section: &str, key: &str, default: Vec3) -> Result<Vec3> {
        let path = format!("{section}.{key}");
        match self.get(section, key) {
            None => Ok(default),
            Some(Value::Array(items)) => {
                let xs: Option<Vec<f64>> = items.iter().map(number).collect();
                match xs {
                    Some(xs) if xs.len() == 3 => Ok(Vec3::new(xs[0], xs[1], xs[2])),
                    _ => Err(invalid(&path, "expected three numbers")),
                }
            }
            Some(v) => number(v)
                .map(Vec3::repeat)
                .ok_or_else(|| invalid(&path, "expected a number or three numbers")),
        }
    }

    fn f64_list(&self, section: &str, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.get(section, key) {
            None => Ok(default.to_vec()),
            Some(Value::Array(items)) => items
                .iter()
                .map(number)
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| invalid(&format!("{section}.{key}"), "expected a list of numbers")),
            Some(_) => Err(invalid(
                &format!("{section}.{key}"),
                "expected a list of numbers",
            )),
        }
    }

    fn modes(&self, section: &str, key: &str, default: &[Mode]) -> Result<Vec<Mode>> {
        let path = format!("{section}.{key}");
        match self.get(section, key) {
            None => Ok(default.to_vec()),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| {
                    v.as_str()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| invalid(&path, format!("unknown mode {v}")))
                })
                .collect(),
            Some(_) => Err(invalid(&path, "expected a list of mode names")),
        }
    }
}

fn number(v: &Value) -> Option<f64> {
    match v {
        Value::Float(x) => Some(*x),
        Value::Integer(n) => Some(*n as f64),
        _ => None,
    }
}

fn check(key: &str, ok: bool, bound: &str, got: impl std::fmt::Display) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(invalid(key, format!("must be {bound}, got {got}")))
    }
}

fn positive(key: &str, v: f64) -> Result<()> {
    check(key, v.is_finite() && v > 0.0, "> 0", v)
}

fn non_negative(key: &str, v: f64) -> Result<()> {
    check(key, v.is_finite() && v >= 0.0, ">= 0", v)
}

fn per_axis(key: &str, v: &Vec3, f: impl Fn(&str, f64) -> Result<()>) -> Result<()> {
    for (k, axis) in ["x", "y", "z"].iter().enumerate() {
        f(&format!("{key}[{axis}]"), v[k])?;
    }
    Ok(())
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        positive("geometry.inner_size", self.geometry.inner_size)?;
        positive("geometry.bar_thickness", self.geometry.bar_thickness)?;

        positive("map.resolution", self.map.resolution)?;
        for k in 0..3 {
            let axis = ["x", "y", "z"][k];
            check(
                &format!("map.max[{axis}]"),
                self.map.max[k].is_finite()
                    && self.map.min[k].is_finite()
                    && self.map.max[k] > self.map.min[k],
                &format!("> map.min[{axis}] = {}", self.map.min[k]),
                self.map.max[k],
            )?;
        }
        per_axis("map.inflate", &self.map.inflate, non_negative)?;
        for k in 0..3 {
            let axis = ["x", "y", "z"][k];
            check(
                &format!("map.inflate[{axis}]"),
                self.map.inflate[k] >= self.safety.dv[k],
                &format!(">= noise.dv[{axis}] = {}", self.safety.dv[k]),
                self.map.inflate[k],
            )?;
        }

        positive("safety.R", self.safety.radius)?;
        positive("safety.gamma", self.safety.gamma)?;
        positive("safety.alpha", self.safety.alpha)?;
        per_axis("noise.dw", &self.safety.dw, non_negative)?;
        per_axis("noise.dv", &self.safety.dv, non_negative)?;

        positive("sim.dt", self.sim.dt)?;
        positive("sim.max_time", self.sim.max_time)?;
        check(
            "sim.dt",
            self.sim.dt <= self.sim.max_time,
            "<= sim.max_time",
            self.sim.dt,
        )?;
        check("sim.laps", self.sim.laps >= 1, ">= 1", self.sim.laps)?;

        check(
            "track.num_gates",
            self.track.num_gates >= 1,
            ">= 1",
            self.track.num_gates,
        )?;
        positive("track.spacing", self.track.spacing)?;

        positive("policy.gain", self.policy.gain)?;
        non_negative("policy.pass_through", self.policy.pass_through)?;
        check(
            "policy.lookahead",
            (0.0..=1.0).contains(&self.policy.lookahead),
            "in [0, 1]",
            self.policy.lookahead,
        )?;
        per_axis("policy.aim_offset", &self.policy.aim_offset, |key, v| {
            check(key, v.is_finite(), "finite", v)
        })?;

        check(
            "experiment.levels",
            !self.experiment.levels.is_empty(),
            "non-empty",
            "[]",
        )?;
        for &level in &self.experiment.levels {
            non_negative("experiment.levels", level)?;
        }
        check(
            "experiment.tracks",
            self.experiment.tracks >= 1,
            ">= 1",
            self.experiment.tracks,
        )?;
        check(
            "experiment.modes",
            !self.experiment.modes.is_empty(),
            "non-empty",
            "[]",
        )?;
        Ok(())
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        GridSpec::from_extent(self.map.min, self.map.max, self.map.resolution)
    }

    pub fn trial_params(&self) -> TrialParams {
        TrialParams {
            gate: self.geometry,
            safety: self.safety,
            policy: self.policy,
            dt: self.sim.dt,
            max_time: self.sim.max_time,
        }
    }

    /// Inflation actually applied to the map: `map.inflate` rounded up to
    /// whole cells so the box still contains the requested one.
    pub fn effective_inflation(&self) -> Result<Vec3> {
        Ok(self.grid_spec()?.round_up_inflation(&self.map.inflate))
    }

    /// Build the nominal field and its worst-case inflation.
    pub fn build_maps(&self) -> Result<SafetyMaps> {
        let spec = self.grid_spec()?;
        let eps = spec.round_up_inflation(&self.map.inflate);
        let margin = self.safety.radius + eps.max();
        let nominal = build_field(&self.geometry, &spec, margin)?;
        let inflated = inflate_field(&nominal, &eps)?;
        Ok(SafetyMaps { nominal, inflated })
    }

    /// Every effective value as TOML; parsing it back yields `self`.
    pub fn manifest(&self) -> String {
        fn arr(v: &Vec3) -> String {
            format!("[{}, {}, {}]", num(v.x), num(v.y), num(v.z))
        }
        let levels: Vec<String> = self.experiment.levels.iter().map(|&l| num(l)).collect();
        let modes: Vec<String> = self
            .experiment
            .modes
            .iter()
            .map(|m| format!("\"{m}\""))
            .collect();
        let mut s = String::new();
        let _ = writeln!(s, "[geometry]");
        let _ = writeln!(s, "inner_size = {}", num(self.geometry.inner_size));
        let _ = writeln!(s, "bar_thickness = {}", num(self.geometry.bar_thickness));
        let _ = writeln!(s, "\n[map]");
        let _ = writeln!(s, "resolution = {}", num(self.map.resolution));
        let _ = writeln!(s, "min = {}", arr(&self.map.min));
        let _ = writeln!(s, "max = {}", arr(&self.map.max));
        let _ = writeln!(s, "inflate = {}", arr(&self.map.inflate));
        let _ = writeln!(s, "\n[safety]");
        let _ = writeln!(s, "R = {}", num(self.safety.radius));
        let _ = writeln!(s, "gamma = {}", num(self.safety.gamma));
        let _ = writeln!(s, "alpha = {}", num(self.safety.alpha));
        let _ = writeln!(s, "\n[noise]");
        let _ = writeln!(s, "dw = {}", arr(&self.safety.dw));
        let _ = writeln!(s, "dv = {}", arr(&self.safety.dv));
        let _ = writeln!(s, "\n[sim]");
        let _ = writeln!(s, "dt = {}", num(self.sim.dt));
        let _ = writeln!(s, "laps = {}", self.sim.laps);
        let _ = writeln!(s, "max_time = {}", num(self.sim.max_time));
        let _ = writeln!(s, "seed = {}", self.sim.seed);
        let _ = writeln!(s, "\n[track]");
        let _ = writeln!(s, "num_gates = {}", self.track.num_gates);
        let _ = writeln!(s, "spacing = {}", num(self.track.spacing));
        let _ = writeln!(s, "\n[policy]");
        let _ = writeln!(s, "gain = {}", num(self.policy.gain));
        let _ = writeln!(s, "pass_through = {}", num(self.policy.pass_through));
        let _ = writeln!(s, "lookahead = {}", num(self.policy.lookahead));
        let _ = writeln!(s, "aim_offset = {}", arr(&self.policy.aim_offset));
        let _ = writeln!(s, "\n[experiment]");
        let _ = writeln!(s, "levels = [{}]", levels.join(", "));
        let _ = writeln!(s, "tracks = {}", self.experiment.tracks);
        let _ = writeln!(s, "modes = [{}]", modes.join(", "));
        s
    }
}

/// Shortest round-tripping float literal that TOML reads as a float.
fn num(x: f64) -> String {
    let s = format!("{x:?}");
    if s.contains(['.', 'e', 'E']) || !x.is_finite() {
        s
    } else {
        format!("{s}.0")
    }
}
