//! Seeded synthetic reference paths: piecewise-linear 3D polylines with
//! corners of alternating turn direction and level, climb and glide legs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::path::{PathError, WaypointPath};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathSpec {
    pub seed: u64,
    /// Number of straight legs.
    pub segments: usize,
    /// Leg length range, m.
    pub min_leg: f64,
    pub max_leg: f64,
    /// Largest heading change at a corner, rad.
    pub max_turn: f64,
    /// Smallest heading change at a corner, rad.
    pub min_turn: f64,
    /// Largest climb or glide angle of a leg, rad.
    pub max_slope: f64,
    /// Waypoint spacing along each leg, m. Zero keeps only the corners.
    pub spacing: f64,
    pub start: [f64; 3],
    /// Initial heading, rad.
    pub heading: f64,
}

impl Default for PathSpec {
    fn default() -> Self {
        Self {
            seed: 1,
            segments: 32,
            min_leg: 80.0,
            max_leg: 220.0,
            max_turn: 6f64.to_radians(),
            min_turn: 1f64.to_radians(),
            max_slope: 4f64.to_radians(),
            spacing: 0.0,
            start: [0.0, 0.0, 100.0],
            heading: 0.0,
        }
    }
}

impl PathSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.segments == 0 {
            return Err("path_segments must be at least 1".into());
        }
        if !(self.min_leg > 0.0 && self.min_leg <= self.max_leg) {
            return Err("path leg lengths need 0 < min <= max".into());
        }
        if !(self.min_turn >= 0.0 && self.min_turn <= self.max_turn && self.max_turn < std::f64::consts::PI) {
            return Err("path turns need 0 <= min <= max < pi".into());
        }
        if !(self.max_slope >= 0.0 && self.max_slope < std::f64::consts::FRAC_PI_2) {
            return Err("path slope must lie in [0, pi/2)".into());
        }
        if !(self.spacing >= 0.0) {
            return Err("path spacing must be non-negative".into());
        }
        if self.start.iter().chain([&self.heading]).any(|v| !v.is_finite()) {
            return Err("path start must be finite".into());
        }
        Ok(())
    }

    /// Corner waypoints only.
    pub fn corners(&self) -> Vec<[f64; 3]> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut points = vec![self.start];
        let mut heading = self.heading;
        let mut p = self.start;
        let mut sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        for leg in 0..self.segments {
            let magnitude = rng.gen_range(self.min_turn..=self.max_turn);
            if leg > 0 {
                heading += sign * magnitude;
                sign = -sign;
            }
            let length = rng.gen_range(self.min_leg..=self.max_leg);
            // Level, climb, level, glide.
            let slope = match leg % 4 {
                1 => rng.gen_range(0.0..=self.max_slope),
                3 => -rng.gen_range(0.0..=self.max_slope),
                _ => {
                    let _: f64 = rng.gen();
                    0.0
                }
            };
            p = [
                p[0] + length * slope.cos() * heading.cos(),
                p[1] + length * slope.cos() * heading.sin(),
                p[2] + length * slope.sin(),
            ];
            points.push(p);
        }
        points
    }

    pub fn generate(&self) -> Result<WaypointPath, PathError> {
        let path = WaypointPath::new(self.corners())?;
        Ok(if self.spacing > 0.0 {
            path.densified(self.spacing)
        } else {
            path
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn angle(a: [f64; 3], b: [f64; 3]) -> f64 {
        let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        let na = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
        let nb = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
        (dot / (na * nb)).clamp(-1.0, 1.0).acos()
    }

    #[test]
    fn deterministic_and_seed_dependent() {
        let a = PathSpec::default().generate().unwrap();
        let b = PathSpec::default().generate().unwrap();
        let c = PathSpec { seed: 2, ..Default::default() }.generate().unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn corners_respect_spec() {
        let spec = PathSpec::default();
        let pts = spec.corners();
        assert_eq!(pts.len(), spec.segments + 1);
        let legs: Vec<[f64; 3]> = pts
            .windows(2)
            .map(|w| [w[1][0] - w[0][0], w[1][1] - w[0][1], w[1][2] - w[0][2]])
            .collect();
        for (i, d) in legs.iter().enumerate() {
            let len = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            assert!(len >= spec.min_leg - 1e-9 && len <= spec.max_leg + 1e-9);
            let slope = d[2].atan2(d[0].hypot(d[1]));
            assert!(slope.abs() <= spec.max_slope + 1e-12);
            if i % 2 == 0 {
                assert_eq!(d[2], 0.0);
            }
        }
        for w in legs.windows(2) {
            let h0 = [w[0][0], w[0][1], 0.0];
            let h1 = [w[1][0], w[1][1], 0.0];
            let turn = angle(h0, h1);
            assert!(turn >= spec.min_turn - 1e-9 && turn <= spec.max_turn + 1e-9, "{turn}");
        }
    }

    #[test]
    fn turns_alternate() {
        let pts = PathSpec::default().corners();
        let headings: Vec<f64> = pts.windows(2).map(|w| (w[1][1] - w[0][1]).atan2(w[1][0] - w[0][0])).collect();
        let turns: Vec<f64> = headings.windows(2).map(|h| crate::kinematics::wrap_angle(h[1] - h[0])).collect();
        assert!(turns.windows(2).all(|t| t[0] * t[1] < 0.0));
    }

    #[test]
    fn densified_path_keeps_corners() {
        let spec = PathSpec { spacing: 5.0, ..Default::default() };
        let path = spec.generate().unwrap();
        for c in spec.corners() {
            assert!(path.points().contains(&c));
        }
        for w in path.points().windows(2) {
            let d = ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2) + (w[1][2] - w[0][2]).powi(2)).sqrt();
            assert!(d <= spec.spacing + 1e-9);
        }
    }
}
