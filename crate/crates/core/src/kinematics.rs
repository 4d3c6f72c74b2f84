//! 3-DOF point-mass kinematics with angular-rate disturbances.
//!
//! The airframe flies at constant airspeed. Lateral and normal-plane
//! accelerations steer the track angle `chi` and path angle `gamma`:
//!
//! ```text
//!   x' = V cos(gamma) cos(chi)      chi'   = a_y / (V cos(gamma)) + d_chi
//!   y' = V cos(gamma) sin(chi)      gamma' = (a_z - g cos(gamma)) / V + d_gamma
//!   z' = V sin(gamma)
//! ```

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Gravitational acceleration, m/s².
pub const GRAVITY: f64 = 9.81;

/// RK4 substeps per call to [`step`].
pub const SUBSTEPS: usize = 5;

/// Smallest admissible `|cos(gamma)|`.
pub const COS_GAMMA_MIN: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("path angle {gamma} rad makes cos(gamma) vanish")]
    DegenerateGamma { gamma: f64 },
    #[error("time step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("acceleration command is zero in both axes")]
    ZeroCommand,
    #[error("attitude command (a_bzc={a_bzc}, phi_c={phi_c}) outside limits")]
    AttitudeOutOfRange { a_bzc: f64, phi_c: f64 },
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let mut a = angle % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UavState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// Track angle, rad, in `(-pi, pi]`.
    pub chi: f64,
    /// Path angle, rad.
    pub gamma: f64,
    /// Airspeed, m/s.
    pub v_g: f64,
}

impl UavState {
    pub fn new(position: [f64; 3], chi: f64, gamma: f64, v_g: f64) -> Self {
        Self {
            x: position[0],
            y: position[1],
            z: position[2],
            chi: wrap_angle(chi),
            gamma,
            v_g,
        }
    }

    pub fn position(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    /// Unit vector along the velocity.
    pub fn heading(&self) -> [f64; 3] {
        let (sc, cc) = self.chi.sin_cos();
        let (sg, cg) = self.gamma.sin_cos();
        [cg * cc, cg * sc, sg]
    }

    pub fn velocity(&self) -> [f64; 3] {
        self.heading().map(|h| h * self.v_g)
    }
}

/// Lateral / normal-plane acceleration pair, m/s².
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AccelCommand {
    pub a_yc: f64,
    pub a_zc: f64,
}

impl AccelCommand {
    pub fn new(a_yc: f64, a_zc: f64) -> Self {
        Self { a_yc, a_zc }
    }
}

/// Body-normal acceleration and bank angle equivalent of an [`AccelCommand`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttitudeCommand {
    pub a_bzc: f64,
    pub phi_c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttitudeLimits {
    pub a_bzc_min: f64,
    pub a_bzc_max: f64,
    pub phi_c_min: f64,
    pub phi_c_max: f64,
}

impl Default for AttitudeLimits {
    fn default() -> Self {
        Self {
            a_bzc_min: 0.0,
            a_bzc_max: 30.0,
            phi_c_min: -PI,
            phi_c_max: PI,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DisturbanceSample {
    /// rad/s
    pub d_chi: f64,
    /// rad/s
    pub d_gamma: f64,
}

impl DisturbanceSample {
    pub fn norm(&self) -> f64 {
        self.d_chi.hypot(self.d_gamma)
    }
}

/// How the per-axis uniform interval is derived from the bound `L_d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisturbanceMode {
    /// Each axis uniform on `[-L_d/sqrt(2), L_d/sqrt(2)]`; the joint norm never exceeds `L_d`.
    #[default]
    Box,
    /// Each axis uniform with standard deviation `L_d/sqrt(2)`. Can exceed `L_d` jointly.
    StdMatched,
}

impl DisturbanceMode {
    pub fn half_width(self, bound: f64) -> f64 {
        match self {
            DisturbanceMode::Box => bound / 2f64.sqrt(),
            DisturbanceMode::StdMatched => bound / 2f64.sqrt() * 3f64.sqrt(),
        }
    }
}

/// Draws one disturbance sample. Consumes exactly two uniform draws regardless of `bound`.
pub fn sample_disturbance<R: Rng + ?Sized>(
    rng: &mut R,
    bound: f64,
    mode: DisturbanceMode,
) -> DisturbanceSample {
    let h = mode.half_width(bound.max(0.0));
    let u1: f64 = rng.gen();
    let u2: f64 = rng.gen();
    DisturbanceSample {
        d_chi: h * (2.0 * u1 - 1.0),
        d_gamma: h * (2.0 * u2 - 1.0),
    }
}

fn derivative(
    s: &[f64; 5],
    v_g: f64,
    cmd: AccelCommand,
    dist: DisturbanceSample,
) -> Result<[f64; 5], KinematicsError> {
    let (sc, cc) = s[3].sin_cos();
    let (sg, cg) = s[4].sin_cos();
    if cg.abs() < COS_GAMMA_MIN {
        return Err(KinematicsError::DegenerateGamma { gamma: s[4] });
    }
    Ok([
        v_g * cg * cc,
        v_g * cg * sc,
        v_g * sg,
        cmd.a_yc / (v_g * cg) + dist.d_chi,
        (cmd.a_zc - GRAVITY * cg) / v_g + dist.d_gamma,
    ])
}

fn axpy(a: f64, x: &[f64; 5], y: &[f64; 5]) -> [f64; 5] {
    std::array::from_fn(|i| y[i] + a * x[i])
}

/// Advances `state` by `dt` under a held command and disturbance using
/// [`SUBSTEPS`] equal RK4 substeps.
pub fn step(
    state: &UavState,
    cmd: AccelCommand,
    dist: DisturbanceSample,
    dt: f64,
) -> Result<UavState, KinematicsError> {
    step_with_substeps(state, cmd, dist, dt, SUBSTEPS)
}

pub fn step_with_substeps(
    state: &UavState,
    cmd: AccelCommand,
    dist: DisturbanceSample,
    dt: f64,
    substeps: usize,
) -> Result<UavState, KinematicsError> {
    if !(dt > 0.0) {
        return Err(KinematicsError::NonPositiveStep(dt));
    }
    let substeps = substeps.max(1);
    let h = dt / substeps as f64;
    let v = state.v_g;
    let mut s = [state.x, state.y, state.z, state.chi, state.gamma];
    for _ in 0..substeps {
        let k1 = derivative(&s, v, cmd, dist)?;
        let k2 = derivative(&axpy(0.5 * h, &k1, &s), v, cmd, dist)?;
        let k3 = derivative(&axpy(0.5 * h, &k2, &s), v, cmd, dist)?;
        let k4 = derivative(&axpy(h, &k3, &s), v, cmd, dist)?;
        s = std::array::from_fn(|i| s[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    }
    if s[4].cos().abs() < COS_GAMMA_MIN {
        return Err(KinematicsError::DegenerateGamma { gamma: s[4] });
    }
    Ok(UavState {
        x: s[0],
        y: s[1],
        z: s[2],
        chi: wrap_angle(s[3]),
        gamma: s[4],
        v_g: v,
    })
}

/// Converts `(a_yc, a_zc)` into body-normal acceleration and bank angle,
/// using `a_zc = a_bzc sin(phi_c)` and `a_yc = a_bzc cos(phi_c)`.
pub fn command_to_attitude(
    cmd: AccelCommand,
    limits: &AttitudeLimits,
) -> Result<AttitudeCommand, KinematicsError> {
    if cmd.a_yc == 0.0 && cmd.a_zc == 0.0 {
        return Err(KinematicsError::ZeroCommand);
    }
    let a_bzc = cmd.a_yc.hypot(cmd.a_zc);
    let phi_c = cmd.a_zc.atan2(cmd.a_yc);
    if a_bzc < limits.a_bzc_min
        || a_bzc > limits.a_bzc_max
        || phi_c < limits.phi_c_min
        || phi_c > limits.phi_c_max
    {
        return Err(KinematicsError::AttitudeOutOfRange { a_bzc, phi_c });
    }
    Ok(AttitudeCommand { a_bzc, phi_c })
}

pub fn attitude_to_command(att: AttitudeCommand) -> AccelCommand {
    let (s, c) = att.phi_c.sin_cos();
    AccelCommand {
        a_yc: att.a_bzc * c,
        a_zc: att.a_bzc * s,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn level(v: f64) -> UavState {
        UavState::new([0.0, 0.0, 0.0], 0.0, 0.0, v)
    }

    #[test]
    fn wrap_keeps_half_open_interval() {
        assert_eq!(wrap_angle(PI), PI);
        assert_abs_diff_eq!(wrap_angle(-PI), PI, epsilon = 1e-15);
        assert_abs_diff_eq!(wrap_angle(3.0 * PI / 2.0), -PI / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(wrap_angle(-7.0), -7.0 + 2.0 * PI, epsilon = 1e-15);
    }

    #[test]
    fn gravity_compensated_level_flight() {
        let out = step(
            &level(25.0),
            AccelCommand::new(0.0, GRAVITY),
            DisturbanceSample::default(),
            0.1,
        )
        .unwrap();
        assert_abs_diff_eq!(out.x, 2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(out.y, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.z, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.chi, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(out.gamma, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn constant_turn_rate_matches_closed_form() {
        // chi(t) = 0.1 t, y(t) = 25 (1 - cos(0.1 t)) / 0.1
        let out = step(
            &level(25.0),
            AccelCommand::new(0.0, GRAVITY),
            DisturbanceSample { d_chi: 0.1, d_gamma: 0.0 },
            0.1,
        )
        .unwrap();
        let w: f64 = 0.1;
        let t: f64 = 0.1;
        assert_abs_diff_eq!(out.chi, 0.01, epsilon = 1e-14);
        assert_abs_diff_eq!(out.y, 25.0 * (1.0 - (w * t).cos()) / w, epsilon = 1e-10);
        assert_abs_diff_eq!(out.y, 0.0125, epsilon = 1e-5);
        assert_abs_diff_eq!(out.x, 25.0 * (w * t).sin() / w, epsilon = 1e-10);
    }

    #[test]
    fn tiny_step_is_continuous() {
        let s = UavState::new([10.0, -4.0, 30.0], 0.7, 0.2, 25.0);
        let out = step(&s, AccelCommand::new(3.0, 12.0), DisturbanceSample::default(), 1e-9).unwrap();
        let flat = |u: &UavState| [u.x, u.y, u.z, u.chi, u.gamma, u.v_g];
        let scale = flat(&s).iter().map(|v| v * v).sum::<f64>().sqrt();
        let diff = flat(&out)
            .iter()
            .zip(flat(&s))
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(diff <= 1e-9 * scale, "{diff} vs {scale}");
    }

    #[test]
    fn zero_or_negative_step_rejected() {
        let s = level(25.0);
        assert!(matches!(
            step(&s, AccelCommand::default(), DisturbanceSample::default(), 0.0),
            Err(KinematicsError::NonPositiveStep(_))
        ));
        assert!(step(&s, AccelCommand::default(), DisturbanceSample::default(), -1.0).is_err());
    }

    #[test]
    fn vertical_flight_is_degenerate() {
        let s = UavState::new([0.0; 3], 0.0, PI / 2.0, 25.0);
        assert!(matches!(
            step(&s, AccelCommand::new(0.0, 0.0), DisturbanceSample::default(), 0.1),
            Err(KinematicsError::DegenerateGamma { .. })
        ));
    }

    #[test]
    fn chi_rewrapped_after_step() {
        let s = UavState::new([0.0; 3], PI - 0.01, 0.0, 25.0);
        let out = step(
            &s,
            AccelCommand::new(25.0, GRAVITY),
            DisturbanceSample::default(),
            0.1,
        )
        .unwrap();
        assert!(out.chi > -PI && out.chi < 0.0);
    }

    #[test]
    fn speed_preserved_when_angles_frozen() {
        let mut s = UavState::new([0.0; 3], 0.4, 0.3, 25.0);
        for _ in 0..50 {
            let cmd = AccelCommand::new(0.0, GRAVITY * s.gamma.cos());
            let prev = s;
            s = step(&s, cmd, DisturbanceSample::default(), 0.1).unwrap();
            let d = [s.x - prev.x, s.y - prev.y, s.z - prev.z];
            let speed = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt() / 0.1;
            assert_abs_diff_eq!(speed, 25.0, epsilon = 1e-9);
            assert_abs_diff_eq!(s.gamma, 0.3, epsilon = 1e-12);
        }
    }

    #[test]
    fn rk4_is_fourth_order() {
        let s = UavState::new([0.0; 3], 0.3, 0.1, 25.0);
        let cmd = AccelCommand::new(20.0, 14.0);
        let dist = DisturbanceSample { d_chi: 0.3, d_gamma: -0.2 };
        let dt = 2.0;
        let reference = step_with_substeps(&s, cmd, dist, dt, 400).unwrap();
        let err = |n: usize| {
            let out = step_with_substeps(&s, cmd, dist, dt, n).unwrap();
            let d = [
                out.x - reference.x,
                out.y - reference.y,
                out.z - reference.z,
                out.chi - reference.chi,
                out.gamma - reference.gamma,
            ];
            d.iter().map(|v| v * v).sum::<f64>().sqrt()
        };
        let coarse = err(4);
        let fine = err(8);
        assert!(coarse / fine >= 8.0, "ratio {}", coarse / fine);
    }

    #[test]
    fn attitude_examples() {
        let lim = AttitudeLimits::default();
        let a = command_to_attitude(AccelCommand::new(0.0, 9.81), &lim).unwrap();
        assert_abs_diff_eq!(a.a_bzc, 9.81, epsilon = 1e-12);
        assert_abs_diff_eq!(a.phi_c, PI / 2.0, epsilon = 1e-12);

        let b = command_to_attitude(AccelCommand::new(9.81, 9.81), &lim).unwrap();
        assert_abs_diff_eq!(b.a_bzc, 9.81 * 2f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(b.phi_c, PI / 4.0, epsilon = 1e-12);

        assert_eq!(
            command_to_attitude(AccelCommand::new(0.0, 0.0), &lim),
            Err(KinematicsError::ZeroCommand)
        );
    }

    #[test]
    fn attitude_limits_enforced() {
        let lim = AttitudeLimits { a_bzc_max: 10.0, ..Default::default() };
        assert!(matches!(
            command_to_attitude(AccelCommand::new(25.0, 14.0), &lim),
            Err(KinematicsError::AttitudeOutOfRange { .. })
        ));
        let lim = AttitudeLimits { phi_c_min: 0.0, ..Default::default() };
        assert!(command_to_attitude(AccelCommand::new(1.0, -1.0), &lim).is_err());
    }

    #[test]
    fn zero_bound_gives_zero_disturbance() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let d = sample_disturbance(&mut rng, 0.0, DisturbanceMode::Box);
            assert_eq!(d.d_chi, 0.0);
            assert_eq!(d.d_gamma, 0.0);
        }
    }

    #[test]
    fn box_disturbance_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 100_000;
        let samples: Vec<_> = (0..n)
            .map(|_| sample_disturbance(&mut rng, 1.0, DisturbanceMode::Box))
            .collect();
        for axis in [0, 1] {
            let xs: Vec<f64> = samples
                .iter()
                .map(|d| if axis == 0 { d.d_chi } else { d.d_gamma })
                .collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
            assert!(mean.abs() < 0.01, "mean {mean}");
            assert!((var.sqrt() - 1.0 / 6f64.sqrt()).abs() < 0.01, "std {}", var.sqrt());
        }
    }

    #[test]
    fn std_matched_mode_has_requested_std() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| sample_disturbance(&mut rng, 1.0, DisturbanceMode::StdMatched).d_chi)
            .collect();
        let var = xs.iter().map(|x| x * x).sum::<f64>() / n as f64;
        assert!((var.sqrt() - 1.0 / 2f64.sqrt()).abs() < 0.01);
    }

    #[test]
    fn same_seed_same_stream() {
        let mut a = ChaCha8Rng::seed_from_u64(11);
        let mut b = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            assert_eq!(
                sample_disturbance(&mut a, 0.3, DisturbanceMode::Box),
                sample_disturbance(&mut b, 0.3, DisturbanceMode::Box)
            );
        }
    }

    proptest! {
        #[test]
        fn box_samples_respect_bound(seed in any::<u64>(), bound in 0.0f64..2.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..32 {
                let d = sample_disturbance(&mut rng, bound, DisturbanceMode::Box);
                prop_assert!(d.norm() <= bound * (1.0 + 1e-12));
            }
        }

        #[test]
        fn attitude_round_trip(a_bzc in 0.01f64..30.0, phi in -3.1f64..3.1) {
            let cmd = attitude_to_command(AttitudeCommand { a_bzc, phi_c: phi });
            let att = command_to_attitude(cmd, &AttitudeLimits::default()).unwrap();
            prop_assert!((att.a_bzc - a_bzc).abs() < 1e-12);
            prop_assert!((att.phi_c - phi).abs() < 1e-12);
            let back = attitude_to_command(att);
            prop_assert!((back.a_yc - cmd.a_yc).abs() < 1e-12);
            prop_assert!((back.a_zc - cmd.a_zc).abs() < 1e-12);
        }
    }
}
