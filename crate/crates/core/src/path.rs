//! Reference path, virtual-target selection and look-ahead geometry.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::guidance::{settling_time, GuidanceConfig};
use crate::kinematics::{wrap_angle, UavState};

/// Minimum segment length between consecutive waypoints, m.
pub const MIN_SEGMENT: f64 = 1e-9;
/// Minimum LOS length, m.
pub const MIN_LOS: f64 = 1e-9;
/// Eq. 31 denominators below this leave the constraint normal undefined.
pub const THETA_DENOM_MIN: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PathError {
    #[error("path needs at least two waypoints, got {0}")]
    TooFewPoints(usize),
    #[error("waypoint {index} is not finite")]
    NonFinite { index: usize },
    #[error("waypoints {index} and {} coincide", index + 1)]
    DuplicatePoint { index: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("cannot read path file {path}: {message}")]
    Io { path: String, message: String },
    #[error("line of sight is degenerate (target on top of or vertically above the UAV)")]
    DegenerateLos,
    #[error("start index {index} outside path of {len} points")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("final waypoint reached")]
    PathExhausted,
    #[error("target switched since the previous sample")]
    TargetSwitched,
    #[error("time step must be positive, got {0}")]
    NonPositiveStep(f64),
}

/// Ordered 3D polyline of waypoints, m.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaypointPath {
    points: Vec<[f64; 3]>,
    cumulative_arclength: Vec<f64>,
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

impl WaypointPath {
    pub fn new(points: Vec<[f64; 3]>) -> Result<Self, PathError> {
        if points.len() < 2 {
            return Err(PathError::TooFewPoints(points.len()));
        }
        if let Some(index) = points.iter().position(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(PathError::NonFinite { index });
        }
        let mut cumulative_arclength = Vec::with_capacity(points.len());
        cumulative_arclength.push(0.0);
        for (index, w) in points.windows(2).enumerate() {
            let seg = dist(&w[0], &w[1]);
            if seg <= MIN_SEGMENT {
                return Err(PathError::DuplicatePoint { index });
            }
            cumulative_arclength.push(cumulative_arclength[index] + seg);
        }
        Ok(Self {
            points,
            cumulative_arclength,
        })
    }

    /// Parses `x,y,z` lines; `#` starts a comment.
    pub fn from_csv_str(text: &str) -> Result<Self, PathError> {
        let mut points = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(PathError::Parse {
                    line: i + 1,
                    message: format!("expected 3 fields, found {}", fields.len()),
                });
            }
            let mut p = [0.0; 3];
            for (slot, f) in p.iter_mut().zip(&fields) {
                *slot = f.parse::<f64>().map_err(|e| PathError::Parse {
                    line: i + 1,
                    message: format!("{f:?}: {e}"),
                })?;
                if !slot.is_finite() {
                    return Err(PathError::Parse {
                        line: i + 1,
                        message: format!("non-finite coordinate {f:?}"),
                    });
                }
            }
            points.push(p);
        }
        Self::new(points)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PathError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| PathError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_csv_str(&text)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("# x,y,z [m]\n");
        for p in &self.points {
            let _ = writeln!(out, "{},{},{}", p[0], p[1], p[2]);
        }
        out
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn last_index(&self) -> usize {
        self.points.len() - 1
    }

    pub fn cumulative_arclength(&self) -> &[f64] {
        &self.cumulative_arclength
    }

    pub fn length(&self) -> f64 {
        *self.cumulative_arclength.last().unwrap()
    }

    /// Re-samples the polyline at (at most) `spacing` metres, keeping every original vertex.
    pub fn densified(&self, spacing: f64) -> Self {
        assert!(spacing > 0.0);
        let mut out = vec![self.points[0]];
        for w in self.points.windows(2) {
            let n = (dist(&w[0], &w[1]) / spacing).ceil().max(1.0) as usize;
            for k in 1..n {
                let t = k as f64 / n as f64;
                out.push(std::array::from_fn(|i| w[0][i] + t * (w[1][i] - w[0][i])));
            }
            out.push(w[1]);
        }
        Self::new(out).expect("densifying a valid path keeps it valid")
    }
}

/// Sine/cosine of the compensation-constraint normal direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaDirection {
    pub sin_theta: f64,
    pub cos_theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LookaheadGeometry {
    pub eta_lat: f64,
    pub eta_lon: f64,
    /// LOS azimuth, rad.
    pub c1: f64,
    /// LOS elevation, rad.
    pub c2: f64,
    /// `None` when both look-ahead angles sit at a multiple of pi/2.
    pub theta: Option<ThetaDirection>,
    pub los_distance: f64,
}

impl LookaheadGeometry {
    /// Builds the geometry from look-ahead angles alone (LOS angles set to match a level UAV).
    pub fn from_angles(eta_lat: f64, eta_lon: f64) -> Self {
        Self {
            eta_lat,
            eta_lon,
            c1: eta_lat,
            c2: eta_lon,
            theta: theta_direction(eta_lat, eta_lon),
            los_distance: f64::NAN,
        }
    }

    /// `sqrt((sin cos)_lat^2 + (sin cos)_lon^2)`, the shared normaliser of the constraint normal.
    pub fn theta_denominator(&self) -> f64 {
        theta_denominator(self.eta_lat, self.eta_lon)
    }
}

fn theta_denominator(eta_lat: f64, eta_lon: f64) -> f64 {
    let a = eta_lat.sin() * eta_lat.cos();
    let b = eta_lon.sin() * eta_lon.cos();
    a.hypot(b)
}

pub fn theta_direction(eta_lat: f64, eta_lon: f64) -> Option<ThetaDirection> {
    let den = theta_denominator(eta_lat, eta_lon);
    if den < THETA_DENOM_MIN {
        return None;
    }
    Some(ThetaDirection {
        sin_theta: eta_lat.sin() * eta_lat.cos() / den,
        cos_theta: eta_lon.sin() * eta_lon.cos() / den,
    })
}

pub fn compute_geometry(
    state: &UavState,
    target: [f64; 3],
) -> Result<LookaheadGeometry, PathError> {
    let dx = target[0] - state.x;
    let dy = target[1] - state.y;
    let dz = target[2] - state.z;
    let horizontal = dx.hypot(dy);
    let los = horizontal.hypot(dz);
    if los <= MIN_LOS || horizontal <= MIN_LOS {
        return Err(PathError::DegenerateLos);
    }
    let c1 = dy.atan2(dx);
    let c2 = dz.atan2(horizontal);
    let eta_lat = wrap_angle(c1 - state.chi);
    let eta_lon = wrap_angle(c2 - state.gamma);
    Ok(LookaheadGeometry {
        eta_lat,
        eta_lon,
        c1,
        c2,
        theta: theta_direction(eta_lat, eta_lon),
        los_distance: los,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetSelection {
    pub point: [f64; 3],
    pub index: usize,
    /// Whether the selector found a point satisfying its own admissibility test.
    pub feasible: bool,
}

fn los_and_dot(state: &UavState, p: &[f64; 3]) -> (f64, f64) {
    let h = state.heading();
    let d = [p[0] - state.x, p[1] - state.y, p[2] - state.z];
    let len = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    (len, d[0] * h[0] + d[1] * h[1] + d[2] * h[2])
}

fn check_start(
    state: &UavState,
    path: &WaypointPath,
    prev_index: usize,
    lookahead: f64,
    capture_radius: f64,
) -> Result<(), PathError> {
    if prev_index >= path.len() {
        return Err(PathError::IndexOutOfRange {
            index: prev_index,
            len: path.len(),
        });
    }
    if prev_index == path.last_index() {
        let (d, dot) = los_and_dot(state, &path.points[prev_index]);
        // Reached, or flown past within one look-ahead length.
        if d <= capture_radius || (dot <= 0.0 && d <= lookahead.max(capture_radius)) {
            return Err(PathError::PathExhausted);
        }
    }
    Ok(())
}

/// Picks the ahead point whose distance best matches the look-ahead length `q_l * V_g`.
pub fn select_target_basic(
    state: &UavState,
    path: &WaypointPath,
    q_l: f64,
    capture_radius: f64,
    prev_index: usize,
) -> Result<TargetSelection, PathError> {
    let lookahead = q_l * state.v_g;
    check_start(state, path, prev_index, lookahead, capture_radius)?;
    let mut best: Option<(usize, f64)> = None;
    for (i, p) in path.points.iter().enumerate().skip(prev_index) {
        let (d, dot) = los_and_dot(state, p);
        if d <= MIN_LOS || dot <= 0.0 {
            continue;
        }
        let score = (lookahead - d).abs();
        if best.is_none_or(|(_, s)| score < s) {
            best = Some((i, score));
        }
    }
    Ok(match best {
        Some((index, _)) => TargetSelection {
            point: path.points[index],
            index,
            feasible: true,
        },
        None => TargetSelection {
            point: path.points[path.last_index()],
            index: path.last_index(),
            feasible: false,
        },
    })
}

/// Closest ahead point whose look-ahead angles stay within `delta` and whose distance
/// covers the estimated settling time. Falls back to [`select_target_basic`] with
/// `feasible = false` when no point qualifies.
pub fn select_target_constrained(
    state: &UavState,
    path: &WaypointPath,
    cfg: &GuidanceConfig,
    prev_index: usize,
) -> Result<TargetSelection, PathError> {
    check_start(
        state,
        path,
        prev_index,
        cfg.q_l * state.v_g,
        cfg.capture_radius,
    )?;
    let mut best: Option<(usize, f64)> = None;
    for (i, p) in path.points.iter().enumerate().skip(prev_index) {
        let (d, dot) = los_and_dot(state, p);
        if d <= MIN_LOS || dot <= 0.0 || best.is_some_and(|(_, bd)| d >= bd) {
            continue;
        }
        let Ok(geom) = compute_geometry(state, *p) else {
            continue;
        };
        if geom.eta_lat.abs() > cfg.delta || geom.eta_lon.abs() > cfg.delta {
            continue;
        }
        let t = settling_time(cfg.k_q, cfg.delta, cfg.tau_hat, geom.eta_lat, geom.eta_lon);
        if d >= state.v_g * t {
            best = Some((i, d));
        }
    }
    match best {
        Some((index, _)) => Ok(TargetSelection {
            point: path.points[index],
            index,
            feasible: true,
        }),
        None => {
            let mut fallback =
                select_target_basic(state, path, cfg.q_l, cfg.capture_radius, prev_index)?;
            fallback.feasible = false;
            Ok(fallback)
        }
    }
}

/// Shortest signed arc from `from` to `to`.
fn arc(to: f64, from: f64) -> f64 {
    wrap_angle(to - from)
}

/// Backward difference of the LOS angles.
pub fn finite_difference_los(
    current: &LookaheadGeometry,
    previous: &LookaheadGeometry,
    dt: f64,
) -> Result<(f64, f64), PathError> {
    if !(dt > 0.0) {
        return Err(PathError::NonPositiveStep(dt));
    }
    Ok((
        arc(current.c1, previous.c1) / dt,
        arc(current.c2, previous.c2) / dt,
    ))
}

/// LOS-rate estimator that restarts whenever the pursued waypoint changes.
#[derive(Debug, Clone, Default)]
pub struct LosDifferentiator {
    last: Option<(usize, LookaheadGeometry)>,
}

impl LosDifferentiator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn reset(&mut self) {
        self.last = None;
    }

    /// Rate against the stored sample, without updating it.
    pub fn rate(
        &self,
        index: usize,
        geom: &LookaheadGeometry,
        dt: f64,
    ) -> Result<(f64, f64), PathError> {
        match &self.last {
            Some((i, prev)) if *i == index => finite_difference_los(geom, prev, dt),
            _ => Err(PathError::TargetSwitched),
        }
    }

    /// Returns the LOS rates and stores `geom`. A target switch (or first call) yields `(0, 0)`.
    pub fn update(&mut self, index: usize, geom: &LookaheadGeometry, dt: f64) -> (f64, f64) {
        let rates = self.rate(index, geom, dt).unwrap_or((0.0, 0.0));
        self.last = Some((index, *geom));
        rates
    }
}
