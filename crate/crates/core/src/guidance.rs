//! Look-ahead pursuit law, robust compensation layer and stability diagnostics.
//!
//! The base law steers both look-ahead angles to zero:
//!
//! ```text
//!   a_yc = k_q V sin(eta_lat) cos(gamma)
//!   a_zc = k_q V sin(eta_lon) + g cos(gamma)
//! ```
//!
//! which leaves the error system `eta' = -k_q sin(eta) + C' - d`. The compensation
//! layer adds `f_lat = C1' - f_chi`, `f_lon = C2' - f_gamma` so that
//! `eta' = -k_q sin(eta) + f - d`; any `(f_chi, f_gamma)` whose projection on the
//! unit normal `(sin theta, cos theta)` is at most `-(L_d + tau)` makes the origin
//! finite-time stable.

use std::f64::consts::{FRAC_PI_3, PI};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{AccelCommand, AttitudeLimits, UavState, GRAVITY};
use crate::path::{LookaheadGeometry, ThetaDirection};

/// Guard on `|sin theta|`, `|cos theta|` below which a compensation axis is dropped.
pub const THETA_EPS: f64 = 1e-6;
/// Slack on the strict feasibility inequality.
pub const FEASIBILITY_SLACK: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GuidanceError {
    #[error("invalid guidance configuration: {0}")]
    InvalidConfig(String),
    #[error("tau must be positive, got {0}")]
    NonPositiveTau(f64),
    #[error("look-ahead angles ({eta_lat}, {eta_lon}) exceed delta = {delta}")]
    LookaheadOutOfRange { eta_lat: f64, eta_lon: f64, delta: f64 },
}

/// All guidance tunables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GuidanceConfig {
    /// Pursuit gain, 1/s.
    pub k_q: f64,
    /// Look-ahead angle cap, rad.
    pub delta: f64,
    /// Disturbance bound, rad/s.
    pub l_d: f64,
    /// Settling-time rate estimate used by the target selector.
    pub tau_hat: f64,
    /// Look-ahead time coefficient, s.
    pub q_l: f64,
    pub a_yc_min: f64,
    pub a_yc_max: f64,
    pub a_zc_min: f64,
    pub a_zc_max: f64,
    /// Command rate limits per axis `(a_yc, a_zc)`, m/s³.
    pub u_dot_min: [f64; 2],
    pub u_dot_max: [f64; 2],
    /// Margin on `k1 + k2 >= (1 + epsilon) L_d`.
    pub epsilon: f64,
    pub k_q_floor: f64,
    pub k_q_decay: f64,
    /// Weight on the command increment in the per-tick program.
    pub r_weight: [[f64; 2]; 2],
    /// Gains `k1 = k2` of the fixed-compensation variant, rad/s.
    pub fixed_gain: f64,
    /// Final-waypoint capture radius, m.
    pub capture_radius: f64,
    pub attitude: AttitudeLimits,
}

impl Default for GuidanceConfig {
    fn default() -> Self {
        Self {
            k_q: 1.0,
            delta: FRAC_PI_3,
            l_d: 0.0,
            tau_hat: 1.0,
            q_l: 2.0,
            a_yc_min: -25.0,
            a_yc_max: 25.0,
            a_zc_min: -14.12,
            a_zc_max: 14.12,
            u_dot_min: [-40.0, -40.0],
            u_dot_max: [40.0, 40.0],
            epsilon: 0.1,
            k_q_floor: 0.2,
            k_q_decay: 0.8,
            r_weight: [[0.1, 0.0], [0.0, 0.1]],
            fixed_gain: 0.52,
            capture_radius: 2.0,
            attitude: AttitudeLimits::default(),
        }
    }
}

impl GuidanceConfig {
    pub fn validate(&self) -> Result<(), GuidanceError> {
        let bad = |m: &str| Err(GuidanceError::InvalidConfig(m.to_string()));
        if !(self.k_q > 0.0) {
            return bad("k_q must be positive");
        }
        if !(self.delta > 0.0 && self.delta < PI / 2.0) {
            return bad("delta must lie in (0, pi/2)");
        }
        if !(self.l_d >= 0.0) {
            return bad("L_d must be non-negative");
        }
        if !(self.tau_hat > 0.0) {
            return bad("tau_hat must be positive");
        }
        if !(self.q_l > 0.0) {
            return bad("q_L must be positive");
        }
        if !(self.a_yc_min < self.a_yc_max) || !(self.a_zc_min < self.a_zc_max) {
            return bad("acceleration bounds need min < max");
        }
        if (0..2).any(|i| !(self.u_dot_min[i] < self.u_dot_max[i])) {
            return bad("rate bounds need min < max");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if !(self.k_q_floor > 0.0) || !(self.k_q_decay > 0.0 && self.k_q_decay < 1.0) {
            return bad("k_q search needs k_q_floor > 0 and 0 < k_q_decay < 1");
        }
        let r = &self.r_weight;
        let det = r[0][0] * r[1][1] - r[0][1] * r[1][0];
        if (r[0][1] - r[1][0]).abs() > 1e-12 || !(r[0][0] > 0.0) || !(det > 0.0) {
            return bad("R must be symmetric positive definite");
        }
        if !(self.fixed_gain >= 0.0) || !(self.capture_radius > 0.0) {
            return bad("fixed_gain must be >= 0 and capture_radius > 0");
        }
        Ok(())
    }

    pub fn saturate(&self, cmd: AccelCommand) -> AccelCommand {
        AccelCommand {
            a_yc: cmd.a_yc.clamp(self.a_yc_min, self.a_yc_max),
            a_zc: cmd.a_zc.clamp(self.a_zc_min, self.a_zc_max),
        }
    }

    pub fn within_bounds(&self, cmd: AccelCommand) -> bool {
        (self.a_yc_min..=self.a_yc_max).contains(&cmd.a_yc)
            && (self.a_zc_min..=self.a_zc_max).contains(&cmd.a_zc)
    }

    /// Look-ahead angles limited to `[-delta, delta]`.
    pub fn clamp_etas(&self, geom: &LookaheadGeometry) -> (f64, f64) {
        (
            geom.eta_lat.clamp(-self.delta, self.delta),
            geom.eta_lon.clamp(-self.delta, self.delta),
        )
    }
}

/// Settling-time bound `ln(1 + k_q/tau * sqrt(sin^2 eta_lon + sin^2 eta_lat)) / (k_q cos delta)`.
pub fn settling_time(k_q: f64, delta: f64, tau: f64, eta_lat: f64, eta_lon: f64) -> f64 {
    let r = eta_lon.sin().hypot(eta_lat.sin());
    (1.0 + k_q / tau * r).ln() / (k_q * delta.cos())
}

pub fn settling_time_bound(
    geom: &LookaheadGeometry,
    cfg: &GuidanceConfig,
    tau: f64,
) -> Result<f64, GuidanceError> {
    if !(tau > 0.0) {
        return Err(GuidanceError::NonPositiveTau(tau));
    }
    if geom.eta_lat.abs() > cfg.delta || geom.eta_lon.abs() > cfg.delta {
        return Err(GuidanceError::LookaheadOutOfRange {
            eta_lat: geom.eta_lat,
            eta_lon: geom.eta_lon,
            delta: cfg.delta,
        });
    }
    Ok(settling_time(cfg.k_q, cfg.delta, tau, geom.eta_lat, geom.eta_lon))
}

/// Unsaturated pursuit command for clamped look-ahead angles.
pub fn base_law_raw(geom: &LookaheadGeometry, state: &UavState, cfg: &GuidanceConfig) -> AccelCommand {
    let (lat, lon) = cfg.clamp_etas(geom);
    let cg = state.gamma.cos();
    AccelCommand {
        a_yc: cfg.k_q * state.v_g * lat.sin() * cg,
        a_zc: cfg.k_q * state.v_g * lon.sin() + GRAVITY * cg,
    }
}

pub fn base_law(geom: &LookaheadGeometry, state: &UavState, cfg: &GuidanceConfig) -> AccelCommand {
    cfg.saturate(base_law_raw(geom, state, cfg))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompensationGains {
    pub k1: f64,
    pub k2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TypicalCompensation {
    pub f_chi: f64,
    pub f_gamma: f64,
    /// `|sin theta|` fell below the guard; `f_chi` zeroed.
    pub singular_lat: bool,
    /// `|cos theta|` fell below the guard; `f_gamma` zeroed.
    pub singular_lon: bool,
}

/// `f_chi = -k1 / sin(theta)`, `f_gamma = -k2 / cos(theta)`.
pub fn typical_compensation(geom: &LookaheadGeometry, gains: CompensationGains) -> TypicalCompensation {
    let Some(th) = geom.theta else {
        return TypicalCompensation {
            singular_lat: true,
            singular_lon: true,
            ..Default::default()
        };
    };
    let mut out = TypicalCompensation::default();
    if th.sin_theta.abs() >= THETA_EPS {
        out.f_chi = -gains.k1 / th.sin_theta;
    } else {
        out.singular_lat = true;
    }
    if th.cos_theta.abs() >= THETA_EPS {
        out.f_gamma = -gains.k2 / th.cos_theta;
    } else {
        out.singular_lon = true;
    }
    out
}

/// Admissible range of the law-frame compensation `(f_lat, f_lon)`, rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LawFrameBounds {
    pub f_lat_min: f64,
    pub f_lat_max: f64,
    pub f_lon_min: f64,
    pub f_lon_max: f64,
}

/// Box on `(f_chi, f_gamma)` implied by [`LawFrameBounds`] and the LOS rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompensationBox {
    pub f_chi_min: f64,
    pub f_chi_max: f64,
    pub f_gamma_min: f64,
    pub f_gamma_max: f64,
}

impl CompensationBox {
    pub fn corners(&self) -> [(f64, f64); 4] {
        [
            (self.f_chi_min, self.f_gamma_min),
            (self.f_chi_min, self.f_gamma_max),
            (self.f_chi_max, self.f_gamma_min),
            (self.f_chi_max, self.f_gamma_max),
        ]
    }
}

/// Compensation range keeping `base + V (cos(gamma) f_lat, f_lon)` inside the
/// acceleration bounds. For an unsaturated base this is
/// `f_lat in [a_min/(V cos gamma) - k_q sin eta_lat, a_max/(V cos gamma) - k_q sin eta_lat]`
/// and `f_lon in [(a_min - g cos gamma)/V - k_q sin eta_lon, ...]`.
pub fn law_frame_bounds(base: AccelCommand, state: &UavState, cfg: &GuidanceConfig) -> LawFrameBounds {
    let lat_scale = state.v_g * state.gamma.cos();
    let lon_scale = state.v_g;
    LawFrameBounds {
        f_lat_min: (cfg.a_yc_min - base.a_yc) / lat_scale,
        f_lat_max: (cfg.a_yc_max - base.a_yc) / lat_scale,
        f_lon_min: (cfg.a_zc_min - base.a_zc) / lon_scale,
        f_lon_max: (cfg.a_zc_max - base.a_zc) / lon_scale,
    }
}

pub fn compensation_box(bounds: &LawFrameBounds, c_dots: (f64, f64)) -> CompensationBox {
    CompensationBox {
        f_chi_min: c_dots.0 - bounds.f_lat_max,
        f_chi_max: c_dots.0 - bounds.f_lat_min,
        f_gamma_min: c_dots.1 - bounds.f_lon_max,
        f_gamma_max: c_dots.1 - bounds.f_lon_min,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feasibility {
    pub feasible: bool,
    /// Largest admissible tau; negative when infeasible.
    pub tau_star: f64,
    /// Box corner minimising the projection on the constraint normal.
    pub vertex: (f64, f64),
}

/// Tests whether some point of `f_box` satisfies `f . n + L_d < 0`, with `n = (sin theta, cos theta)`.
pub fn check_feasibility(theta: ThetaDirection, f_box: &CompensationBox, l_d: f64) -> Feasibility {
    let project = |(fc, fg): (f64, f64)| fc * theta.sin_theta + fg * theta.cos_theta;
    // The minimum of a linear function over a box sits at the corner opposite the normal.
    let vertex = (
        if theta.sin_theta >= 0.0 { f_box.f_chi_min } else { f_box.f_chi_max },
        if theta.cos_theta >= 0.0 { f_box.f_gamma_min } else { f_box.f_gamma_max },
    );
    let value = project(vertex);
    Feasibility {
        feasible: value + l_d <= -FEASIBILITY_SLACK,
        tau_star: -(value + l_d),
        vertex,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CompensationTerms {
    pub f_chi: f64,
    pub f_gamma: f64,
    /// Law-frame compensation after clipping.
    pub f_lat: f64,
    pub f_lon: f64,
    pub clipped: bool,
}

/// Converts angular-rate compensation into the law frame, clips it to the
/// acceleration envelope and adds it to the base command.
pub fn clip_and_assemble(
    base: AccelCommand,
    f_chi: f64,
    f_gamma: f64,
    c_dots: (f64, f64),
    state: &UavState,
    cfg: &GuidanceConfig,
) -> (AccelCommand, CompensationTerms) {
    let bounds = law_frame_bounds(base, state, cfg);
    let f_lat = c_dots.0 - f_chi;
    let f_lon = c_dots.1 - f_gamma;
    let f_lat_hat = f_lat.clamp(bounds.f_lat_min, bounds.f_lat_max);
    let f_lon_hat = f_lon.clamp(bounds.f_lon_min, bounds.f_lon_max);
    let clipped = f_lat_hat != f_lat || f_lon_hat != f_lon;
    let raw = AccelCommand {
        a_yc: base.a_yc + state.v_g * state.gamma.cos() * f_lat_hat,
        a_zc: base.a_zc + state.v_g * f_lon_hat,
    };
    (
        // Only rounding can push `raw` outside the envelope here.
        cfg.saturate(raw),
        CompensationTerms {
            f_chi,
            f_gamma,
            f_lat: f_lat_hat,
            f_lon: f_lon_hat,
            clipped,
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttractionRegion {
    /// Largest initial look-ahead error norm, rad.
    pub max_initial_norm: f64,
    /// Largest tolerated disturbance for the requested ultimate bound, rad/s.
    pub max_disturbance: f64,
}

/// Conservative attraction-region estimate of the uncompensated law.
pub fn attraction_region_bound(
    cfg: &GuidanceConfig,
    sup_disturbance: f64,
    epsilon_target: f64,
) -> AttractionRegion {
    let kc = cfg.k_q * cfg.delta.cos();
    AttractionRegion {
        max_initial_norm: PI / 2.0 * (sup_disturbance / kc).sqrt(),
        max_disturbance: 16.0 * epsilon_target * epsilon_target * kc / PI.powi(4),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KqSearch {
    pub k_q: f64,
    pub feasible: bool,
    /// Number of gain reductions performed.
    pub steps: usize,
}

/// Feasibility of the compensation box when the base law runs with gain `k_q`.
pub fn feasibility_at_gain(
    geom: &LookaheadGeometry,
    state: &UavState,
    cfg: &GuidanceConfig,
    c_dots: (f64, f64),
    k_q: f64,
) -> Option<Feasibility> {
    let theta = geom.theta?;
    let trial = GuidanceConfig { k_q, ..cfg.clone() };
    let base = base_law_raw(geom, state, &trial);
    let f_box = compensation_box(&law_frame_bounds(base, state, &trial), c_dots);
    Some(check_feasibility(theta, &f_box, cfg.l_d))
}

/// Shrinks `k_q` geometrically from `cfg.k_q` until the compensation box admits a
/// feasible point or the gain drops to `k_q_floor`.
pub fn decremental_kq_search(
    geom: &LookaheadGeometry,
    state: &UavState,
    cfg: &GuidanceConfig,
    c_dots: (f64, f64),
) -> KqSearch {
    let mut k_q = cfg.k_q;
    let mut steps = 0;
    loop {
        match feasibility_at_gain(geom, state, cfg, c_dots, k_q) {
            Some(f) if f.feasible => {
                return KqSearch {
                    k_q,
                    feasible: true,
                    steps,
                }
            }
            Some(_) => {}
            None => break,
        }
        k_q *= cfg.k_q_decay;
        steps += 1;
        if k_q <= cfg.k_q_floor {
            break;
        }
    }
    KqSearch {
        k_q: cfg.k_q_floor,
        feasible: false,
        steps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_6};

    fn level() -> UavState {
        UavState::new([0.0; 3], 0.0, 0.0, 25.0)
    }

    #[test]
    fn default_config_is_valid() {
        GuidanceConfig::default().validate().unwrap();
        let bad = GuidanceConfig {
            delta: FRAC_PI_2,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = GuidanceConfig {
            r_weight: [[0.1, 0.2], [0.0, 0.1]],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn base_law_gravity_only() {
        let cmd = base_law(&LookaheadGeometry::from_angles(0.0, 0.0), &level(), &GuidanceConfig::default());
        assert_eq!(cmd.a_yc, 0.0);
        assert_abs_diff_eq!(cmd.a_zc, 9.81, epsilon = 1e-12);
    }

    #[test]
    fn base_law_saturates() {
        let cfg = GuidanceConfig {
            k_q: 2.0,
            ..Default::default()
        };
        let g = LookaheadGeometry::from_angles(FRAC_PI_6, 0.0);
        assert_abs_diff_eq!(base_law_raw(&g, &level(), &cfg).a_yc, 25.0, epsilon = 1e-12);
        assert!(base_law(&g, &level(), &cfg).a_yc <= 25.0);
        let cfg = GuidanceConfig {
            k_q: 3.0,
            ..Default::default()
        };
        assert_eq!(base_law(&g, &level(), &cfg).a_yc, 25.0);
    }

    #[test]
    fn base_law_clamps_eta() {
        let cfg = GuidanceConfig::default();
        let a = base_law_raw(&LookaheadGeometry::from_angles(0.0, FRAC_PI_2), &level(), &cfg);
        let b = base_law_raw(&LookaheadGeometry::from_angles(0.0, cfg.delta), &level(), &cfg);
        assert_eq!(a, b);
    }

    #[test]
    fn typical_compensation_symmetric() {
        let g = LookaheadGeometry::from_angles(FRAC_PI_4, FRAC_PI_4);
        let c = typical_compensation(&g, CompensationGains { k1: 0.52, k2: 0.52 });
        assert_abs_diff_eq!(c.f_chi, -0.52 * 2f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(c.f_gamma, -0.7354, epsilon = 1e-4);
        assert!(!c.singular_lat && !c.singular_lon);
    }

    #[test]
    fn typical_compensation_singular_axis() {
        let g = LookaheadGeometry::from_angles(0.0, 0.3);
        let c = typical_compensation(&g, CompensationGains { k1: 0.52, k2: 0.52 });
        assert_eq!(c.f_chi, 0.0);
        assert!(c.singular_lat);
        assert!(!c.singular_lon);
        let zero = typical_compensation(
            &LookaheadGeometry::from_angles(0.3, 0.2),
            CompensationGains { k1: 0.0, k2: 0.0 },
        );
        assert_eq!((zero.f_chi, zero.f_gamma), (0.0, 0.0));
    }

    #[test]
    fn typical_compensation_meets_projection() {
        let g = LookaheadGeometry::from_angles(0.4, -0.2);
        let th = g.theta.unwrap();
        let c = typical_compensation(&g, CompensationGains { k1: 0.3, k2: 0.5 });
        assert_abs_diff_eq!(c.f_chi * th.sin_theta + c.f_gamma * th.cos_theta, -0.8, epsilon = 1e-12);
    }

    #[test]
    fn feasibility_vertex_enumeration() {
        let theta = ThetaDirection {
            sin_theta: 0.5f64.sqrt(),
            cos_theta: 0.5f64.sqrt(),
        };
        let b = CompensationBox {
            f_chi_min: -5.0,
            f_chi_max: 5.0,
            f_gamma_min: -5.0,
            f_gamma_max: 5.0,
        };
        let f = check_feasibility(theta, &b, 1.0);
        assert!(f.feasible);
        assert_eq!(f.vertex, (-5.0, -5.0));
        assert_abs_diff_eq!(f.tau_star, 10.0 / 2f64.sqrt() - 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.tau_star, 6.071, epsilon = 1e-3);

        let zero = CompensationBox {
            f_chi_min: 0.0,
            f_chi_max: 0.0,
            f_gamma_min: 0.0,
            f_gamma_max: 0.0,
        };
        let f = check_feasibility(theta, &zero, 1.0);
        assert!(!f.feasible);
        assert_eq!(f.tau_star, -1.0);

        let slack = CompensationBox {
            f_chi_min: -0.1,
            f_chi_max: 1.0,
            f_gamma_min: 0.0,
            f_gamma_max: 1.0,
        };
        assert!(check_feasibility(theta, &slack, 0.0).feasible);
    }

    #[test]
    fn clip_no_op() {
        let cfg = GuidanceConfig::default();
        let base = AccelCommand::new(3.0, 10.0);
        let (out, terms) = clip_and_assemble(base, 0.0, 0.0, (0.0, 0.0), &level(), &cfg);
        assert_eq!(out, base);
        assert!(!terms.clipped);
    }

    #[test]
    fn clip_lateral_upper_bound() {
        let cfg = GuidanceConfig::default();
        let base = AccelCommand::new(0.0, 9.81);
        let bounds = law_frame_bounds(base, &level(), &cfg);
        assert_abs_diff_eq!(bounds.f_lat_max, 1.0, epsilon = 1e-12);
        // f_lat = c1_dot - f_chi = 2
        let (out, terms) = clip_and_assemble(base, -2.0, 0.0, (0.0, 0.0), &level(), &cfg);
        assert!(terms.clipped);
        assert_abs_diff_eq!(terms.f_lat, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.a_yc, 25.0, epsilon = 1e-12);
    }

    #[test]
    fn clip_identity_branch() {
        let cfg = GuidanceConfig::default();
        let s = UavState::new([0.0; 3], 0.0, 0.2, 25.0);
        let base = AccelCommand::new(1.0, 9.0);
        let (out, terms) = clip_and_assemble(base, -0.1, 0.05, (0.02, -0.01), &s, &cfg);
        assert!(!terms.clipped);
        assert_eq!(out.a_yc, 1.0 + 25.0 * 0.2f64.cos() * (0.02 + 0.1));
        assert_eq!(out.a_zc, 9.0 + 25.0 * (-0.01 - 0.05));
    }

    #[test]
    fn paper_bound_form_matches_for_unsaturated_base() {
        let cfg = GuidanceConfig::default();
        let s = UavState::new([0.0; 3], 0.1, -0.15, 25.0);
        let g = LookaheadGeometry::from_angles(0.3, 0.1);
        let base = base_law(&g, &s, &cfg);
        assert_eq!(base, base_law_raw(&g, &s, &cfg));
        let b = law_frame_bounds(base, &s, &cfg);
        let vc = s.v_g * s.gamma.cos();
        let cg = s.gamma.cos();
        assert_abs_diff_eq!(b.f_lat_min, cfg.a_yc_min / vc - cfg.k_q * 0.3f64.sin(), epsilon = 1e-12);
        assert_abs_diff_eq!(b.f_lat_max, cfg.a_yc_max / vc - cfg.k_q * 0.3f64.sin(), epsilon = 1e-12);
        let lon = |a: f64| (a - GRAVITY * cg - cfg.k_q * 0.1f64.sin() * s.v_g) / s.v_g;
        assert_abs_diff_eq!(b.f_lon_min, lon(cfg.a_zc_min), epsilon = 1e-12);
        assert_abs_diff_eq!(b.f_lon_max, lon(cfg.a_zc_max), epsilon = 1e-12);
    }

    #[test]
    fn settling_time_examples() {
        let cfg = GuidanceConfig::default();
        let t = settling_time_bound(&LookaheadGeometry::from_angles(0.0, 0.0), &cfg, 1.0).unwrap();
        assert_eq!(t, 0.0);
        let g = LookaheadGeometry::from_angles(0.0, FRAC_PI_4);
        let t = settling_time_bound(&g, &cfg, 1.0).unwrap();
        assert_abs_diff_eq!(t, 2.0 * (1.0 + FRAC_PI_4.sin()).ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(t, 1.0696, epsilon = 1e-4);
        let mut prev = t;
        for tau in [2.0, 10.0, 100.0, 1e6] {
            let next = settling_time_bound(&g, &cfg, tau).unwrap();
            assert!(next < prev);
            prev = next;
        }
        assert!(prev < 1e-5);
        assert_eq!(
            settling_time_bound(&g, &cfg, 0.0),
            Err(GuidanceError::NonPositiveTau(0.0))
        );
        assert!(settling_time_bound(&LookaheadGeometry::from_angles(1.2, 0.0), &cfg, 1.0).is_err());
    }

    #[test]
    fn attraction_region_examples() {
        let cfg = GuidanceConfig::default();
        assert_eq!(attraction_region_bound(&cfg, 0.0, 1.0).max_initial_norm, 0.0);
        let r = attraction_region_bound(&cfg, 0.5, 1.0);
        assert_abs_diff_eq!(r.max_initial_norm, FRAC_PI_2, epsilon = 1e-12);
        assert_abs_diff_eq!(r.max_disturbance, 8.0 / PI.powi(4), epsilon = 1e-15);
        assert_abs_diff_eq!(r.max_disturbance, 0.08213, epsilon = 1e-5);
    }

    #[test]
    fn kq_search_zero_iterations_when_feasible() {
        let cfg = GuidanceConfig {
            l_d: 0.1,
            ..Default::default()
        };
        let g = LookaheadGeometry::from_angles(0.2, 0.1);
        let r = decremental_kq_search(&g, &level(), &cfg, (0.0, 0.0));
        assert!(r.feasible);
        assert_eq!(r.k_q, cfg.k_q);
        assert_eq!(r.steps, 0);
    }

    #[test]
    fn kq_search_exhausts() {
        let cfg = GuidanceConfig {
            l_d: 100.0,
            ..Default::default()
        };
        let g = LookaheadGeometry::from_angles(0.2, 0.1);
        let r = decremental_kq_search(&g, &level(), &cfg, (0.0, 0.0));
        assert!(!r.feasible);
        assert_eq!(r.k_q, cfg.k_q_floor);
        let expected = ((cfg.k_q_floor / cfg.k_q).ln() / cfg.k_q_decay.ln()).ceil() as usize;
        assert_eq!(r.steps, expected);
    }

    #[test]
    fn kq_search_returns_largest_feasible_grid_point() {
        // Large upward LOS rate: the upper a_zc bound binds and lowering k_q frees room.
        let cfg = GuidanceConfig {
            l_d: 0.11,
            k_q: 2.0,
            ..Default::default()
        };
        let g = LookaheadGeometry::from_angles(0.05, 0.6);
        let c_dots = (0.0, 0.0);
        let mut scan = None;
        let mut k = cfg.k_q;
        while k > cfg.k_q_floor {
            if feasibility_at_gain(&g, &level(), &cfg, c_dots, k).unwrap().feasible {
                scan = Some(k);
                break;
            }
            k *= cfg.k_q_decay;
        }
        let r = decremental_kq_search(&g, &level(), &cfg, c_dots);
        assert_eq!(r.feasible, scan.is_some());
        assert!(r.feasible && r.steps > 0);
        if let Some(k) = scan {
            assert_eq!(r.k_q, k);
        }
        // Feasibility along the grid is monotone in this configuration.
        let mut seen = false;
        let mut k = cfg.k_q;
        while k > cfg.k_q_floor {
            let f = feasibility_at_gain(&g, &level(), &cfg, c_dots, k).unwrap().feasible;
            assert!(!seen || f);
            seen |= f;
            k *= cfg.k_q_decay;
        }
    }

    /// Euler-free RK4 on the compensated error system with the min-norm split of the gains
    /// and the worst-case disturbance along the constraint normal.
    fn lemma_oracle(eta0: (f64, f64), l_d: f64, tau: f64, k_q: f64, horizon: f64) -> Option<f64> {
        let h = 1e-4;
        let field = |e: (f64, f64)| {
            let a = e.0.sin() * e.0.cos();
            let b = e.1.sin() * e.1.cos();
            let n = a.hypot(b);
            let (s, c) = if n > 0.0 { (a / n, b / n) } else { (0.0, 0.0) };
            // f = -(L_d + tau) n, d = -L_d n
            (
                -k_q * e.0.sin() - (l_d + tau) * s + l_d * s,
                -k_q * e.1.sin() - (l_d + tau) * c + l_d * c,
            )
        };
        let mut e = eta0;
        let mut t = 0.0;
        while t < horizon {
            if e.0.sin().hypot(e.1.sin()) < 1e-3 {
                return Some(t);
            }
            let k1 = field(e);
            let k2 = field((e.0 + 0.5 * h * k1.0, e.1 + 0.5 * h * k1.1));
            let k3 = field((e.0 + 0.5 * h * k2.0, e.1 + 0.5 * h * k2.1));
            let k4 = field((e.0 + h * k3.0, e.1 + h * k3.1));
            e.0 += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
            e.1 += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
            t += h;
        }
        None
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn commands_always_saturated(
            lat in -3.0f64..3.0, lon in -3.0f64..3.0, gamma in -1.2f64..1.2,
            k_q in 0.1f64..5.0, fchi in -50.0f64..50.0, fgam in -50.0f64..50.0,
            c1 in -5.0f64..5.0, c2 in -5.0f64..5.0,
        ) {
            let cfg = GuidanceConfig { k_q, ..Default::default() };
            let s = UavState::new([0.0; 3], 0.0, gamma, 25.0);
            let g = LookaheadGeometry::from_angles(lat, lon);
            let base = base_law(&g, &s, &cfg);
            prop_assert!(cfg.within_bounds(base));
            let (out, _) = clip_and_assemble(base, fchi, fgam, (c1, c2), &s, &cfg);
            prop_assert!(cfg.within_bounds(out));
        }

        #[test]
        fn clamp_idempotent(lat in -3.0f64..3.0, lon in -3.0f64..3.0) {
            let cfg = GuidanceConfig::default();
            let s = level();
            let g = LookaheadGeometry::from_angles(lat, lon);
            let (cl, cn) = cfg.clamp_etas(&g);
            prop_assert_eq!(
                base_law(&g, &s, &cfg),
                base_law(&LookaheadGeometry::from_angles(cl, cn), &s, &cfg)
            );
        }

        #[test]
        fn feasible_vertex_is_admissible(
            lat in -1.0f64..1.0, lon in -1.0f64..1.0,
            lo1 in -10.0f64..0.0, w1 in 0.0f64..10.0, lo2 in -10.0f64..0.0, w2 in 0.0f64..10.0,
            l_d in 0.0f64..2.0,
        ) {
            let Some(theta) = crate::path::theta_direction(lat, lon) else { return Ok(()); };
            let b = CompensationBox { f_chi_min: lo1, f_chi_max: lo1 + w1, f_gamma_min: lo2, f_gamma_max: lo2 + w2 };
            let f = check_feasibility(theta, &b, l_d);
            for corner in b.corners() {
                let v = corner.0 * theta.sin_theta + corner.1 * theta.cos_theta;
                prop_assert!(v >= f.vertex.0 * theta.sin_theta + f.vertex.1 * theta.cos_theta - 1e-12);
            }
            if f.feasible {
                let tau = f.tau_star - 1e-12;
                let v = f.vertex.0 * theta.sin_theta + f.vertex.1 * theta.cos_theta;
                prop_assert!(v + l_d + tau <= 0.0);
            }
        }

        #[test]
        fn lemma_settles_before_bound(
            lat in -1.0f64..1.0, lon in -1.0f64..1.0,
            l_d in 0.0f64..0.8, tau in 0.2f64..3.0, k_q in 0.3f64..3.0,
        ) {
            let cfg = GuidanceConfig { k_q, ..Default::default() };
            prop_assume!(lat.abs() <= cfg.delta && lon.abs() <= cfg.delta);
            prop_assume!(lat.sin().hypot(lon.sin()) >= 1e-3);
            let bound = settling_time_bound(&LookaheadGeometry::from_angles(lat, lon), &cfg, tau).unwrap();
            let hit = lemma_oracle((lat, lon), l_d, tau, k_q, bound + 1.0);
            prop_assert!(hit.is_some_and(|t| t < bound), "hit {:?} bound {}", hit, bound);
        }
    }
}
