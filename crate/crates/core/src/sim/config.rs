//! Plain-text scenario files.
//!
//! One `key = value` pair per line; `#` starts a comment. Numeric values accept
//! arithmetic expressions (`pi/15`, `deg(30)`). Angles are radians.
//!
//! ```text
//! controller = rllp_optimal
//! L_d        = pi/15
//! seed       = 7
//! duration   = 200
//! path_seed  = 3
//! ```
//!
//! The path is either read from a waypoint CSV (`path = waypoints.csv`,
//! resolved against the config file's directory) or generated from the
//! `path_*` keys. Without explicit `initial_*` keys the UAV starts on the first
//! waypoint, aligned with the first segment.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::expr::{eval, ExprError};
use super::pathgen::PathSpec;
use super::{aligned_start, Controller, Scenario, SimError, DEFAULT_SPEED};
use crate::guidance::GuidanceConfig;
use crate::kinematics::{DisturbanceMode, UavState};
use crate::path::{PathError, WaypointPath};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}: expected 'key = value'")]
    Syntax { line: usize },
    #[error("line {line}: unknown key '{key}'")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key '{key}' given twice")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: bad value for '{key}': {message}")]
    BadValue { line: usize, key: String, message: String },
    #[error("path: {0}")]
    Path(#[from] PathError),
    #[error("{0}")]
    Invalid(String),
}

impl From<SimError> for ConfigError {
    fn from(e: SimError) -> Self {
        ConfigError::Invalid(e.to_string())
    }
}

const KEYS: &[&str] = &[
    "controller",
    "seed",
    "dt",
    "disturbance_hold",
    "disturbance_mode",
    "duration",
    "l_d",
    "v_g",
    "initial_x",
    "initial_y",
    "initial_z",
    "initial_chi",
    "initial_gamma",
    "path",
    "path_seed",
    "path_segments",
    "path_min_leg",
    "path_max_leg",
    "path_min_turn",
    "path_max_turn",
    "path_max_slope",
    "path_spacing",
    "path_start_x",
    "path_start_y",
    "path_start_z",
    "path_heading",
    "k_q",
    "delta",
    "tau_hat",
    "q_l",
    "a_yc_min",
    "a_yc_max",
    "a_zc_min",
    "a_zc_max",
    "u_dot_min",
    "u_dot_max",
    "epsilon",
    "k_q_floor",
    "k_q_decay",
    "r_weight",
    "fixed_gain",
    "capture_radius",
    "a_bzc_min",
    "a_bzc_max",
    "phi_c_min",
    "phi_c_max",
];

#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    value: String,
}

/// Parsed key/value pairs, keys lower-cased.
#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    entries: BTreeMap<String, Entry>,
    base_dir: PathBuf,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or(ConfigError::Syntax { line })?;
            let key = key.trim().to_ascii_lowercase();
            let value = value.trim().to_string();
            if key.is_empty() || value.is_empty() {
                return Err(ConfigError::Syntax { line });
            }
            if !KEYS.contains(&key.as_str()) {
                return Err(ConfigError::UnknownKey { line, key });
            }
            if entries.contains_key(&key) {
                return Err(ConfigError::DuplicateKey { line, key });
            }
            entries.insert(key, Entry { line, value });
        }
        Ok(Self {
            entries,
            base_dir: PathBuf::from("."),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let mut cfg = Self::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    /// Whether `key` (lower-case) was set in the file.
    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn bad(&self, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError::BadValue {
            line: self.entries[key].line,
            key: key.to_string(),
            message: message.into(),
        }
    }

    fn number(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        let Some(e) = self.entries.get(key) else {
            return Ok(None);
        };
        eval(&e.value).map(Some).map_err(|err: ExprError| self.bad(key, err.to_string()))
    }

    fn set_number(&self, key: &str, slot: &mut f64) -> Result<(), ConfigError> {
        if let Some(v) = self.number(key)? {
            *slot = v;
        }
        Ok(())
    }

    fn integer(&self, key: &str) -> Result<Option<u64>, ConfigError> {
        let Some(e) = self.entries.get(key) else {
            return Ok(None);
        };
        e.value
            .parse::<u64>()
            .map(Some)
            .map_err(|_| self.bad(key, "expected a non-negative integer"))
    }

    fn text(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    pub fn guidance_config(&self) -> Result<GuidanceConfig, ConfigError> {
        let mut c = GuidanceConfig::default();
        for (key, slot) in [
            ("k_q", &mut c.k_q),
            ("delta", &mut c.delta),
            ("l_d", &mut c.l_d),
            ("tau_hat", &mut c.tau_hat),
            ("q_l", &mut c.q_l),
            ("a_yc_min", &mut c.a_yc_min),
            ("a_yc_max", &mut c.a_yc_max),
            ("a_zc_min", &mut c.a_zc_min),
            ("a_zc_max", &mut c.a_zc_max),
            ("epsilon", &mut c.epsilon),
            ("k_q_floor", &mut c.k_q_floor),
            ("k_q_decay", &mut c.k_q_decay),
            ("fixed_gain", &mut c.fixed_gain),
            ("capture_radius", &mut c.capture_radius),
            ("a_bzc_min", &mut c.attitude.a_bzc_min),
            ("a_bzc_max", &mut c.attitude.a_bzc_max),
            ("phi_c_min", &mut c.attitude.phi_c_min),
            ("phi_c_max", &mut c.attitude.phi_c_max),
        ] {
            self.set_number(key, slot)?;
        }
        if let Some(v) = self.number("u_dot_min")? {
            c.u_dot_min = [v, v];
        }
        if let Some(v) = self.number("u_dot_max")? {
            c.u_dot_max = [v, v];
        }
        if let Some(v) = self.number("r_weight")? {
            c.r_weight = [[v, 0.0], [0.0, v]];
        }
        c.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(c)
    }

    pub fn path_spec(&self) -> Result<PathSpec, ConfigError> {
        let mut s = PathSpec::default();
        let [start_x, start_y, start_z] = &mut s.start;
        if let Some(v) = self.integer("path_seed")? {
            s.seed = v;
        }
        if let Some(v) = self.integer("path_segments")? {
            s.segments = v as usize;
        }
        for (key, slot) in [
            ("path_min_leg", &mut s.min_leg),
            ("path_max_leg", &mut s.max_leg),
            ("path_min_turn", &mut s.min_turn),
            ("path_max_turn", &mut s.max_turn),
            ("path_max_slope", &mut s.max_slope),
            ("path_spacing", &mut s.spacing),
            ("path_start_x", start_x),
            ("path_start_y", start_y),
            ("path_start_z", start_z),
            ("path_heading", &mut s.heading),
        ] {
            self.set_number(key, slot)?;
        }
        s.validate().map_err(ConfigError::Invalid)?;
        Ok(s)
    }

    pub fn waypoints(&self) -> Result<WaypointPath, ConfigError> {
        match self.text("path") {
            Some(file) => {
                if self.entries.keys().any(|k| k.starts_with("path_")) {
                    return Err(self.bad("path", "cannot combine a path file with path_* generator keys"));
                }
                let full = self.base_dir.join(file);
                Ok(WaypointPath::load(full)?)
            }
            None => Ok(self.path_spec()?.generate()?),
        }
    }

    pub fn scenario(&self) -> Result<Scenario, ConfigError> {
        let cfg = self.guidance_config()?;
        let controller = match self.text("controller") {
            Some(v) => v.parse::<Controller>().map_err(|m| self.bad("controller", m))?,
            None => Controller::default(),
        };
        let path = self.waypoints()?;
        let mut scenario = Scenario::new(path, cfg, controller);
        if let Some(v) = self.integer("seed")? {
            scenario.seed = v;
        }
        self.set_number("dt", &mut scenario.dt)?;
        self.set_number("duration", &mut scenario.duration)?;
        if let Some(v) = self.integer("disturbance_hold")? {
            scenario.disturbance_hold = v as usize;
        }
        if let Some(v) = self.text("disturbance_mode") {
            scenario.disturbance_mode = match v.to_ascii_lowercase().as_str() {
                "box" => DisturbanceMode::Box,
                "std_matched" => DisturbanceMode::StdMatched,
                _ => return Err(self.bad("disturbance_mode", "expected box or std_matched")),
            };
        }
        let v_g = self.number("v_g")?.unwrap_or(DEFAULT_SPEED);
        let aligned = aligned_start(&scenario.path, v_g);
        let pick = |key: &str, default: f64| -> Result<f64, ConfigError> {
            Ok(self.number(key)?.unwrap_or(default))
        };
        scenario.initial_state = UavState::new(
            [
                pick("initial_x", aligned.x)?,
                pick("initial_y", aligned.y)?,
                pick("initial_z", aligned.z)?,
            ],
            pick("initial_chi", aligned.chi)?,
            pick("initial_gamma", aligned.gamma)?,
            v_g,
        );
        scenario.validate()?;
        Ok(scenario)
    }
}

/// Loads and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ConfigError> {
    ConfigFile::load(path)?.scenario()
}
