//! Per-tick convex program for the compensation gains `k = (k1, k2)`.
//!
//! With `u = b + A k` the commanded accelerations, the program is
//!
//! ```text
//!   min  1/2 k' (dA' R dA) k + (db' R dA) k
//!   s.t. A k <= u_max - b,  -A k <= b - u_min,
//!        dA k <= udot_max dt - db,  -dA k <= db - udot_min dt,
//!        -k1 - k2 <= -(1 + eps) L_d
//! ```
//!
//! [`solve`] is a primal-dual interior-point method with a phase-1 slack
//! maximisation for infeasibility detection. [`brute_force_oracle`] enumerates
//! active sets exactly and exists to cross-check it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::guidance::{GuidanceConfig, THETA_EPS};
use crate::kinematics::{UavState, GRAVITY};
use crate::path::LookaheadGeometry;

/// Ridge added to the Hessian so the Newton system stays well posed when `dA = 0`.
pub const RIDGE: f64 = 1e-8;
pub const DEFAULT_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_MAX_ITERATIONS: usize = 100;
/// Constraint violation accepted by the oracle (on unit-norm rows).
pub const ORACLE_FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("constraint normal too close to an axis (sin theta = {sin_theta}, cos theta = {cos_theta})")]
    SingularTheta { sin_theta: f64, cos_theta: f64 },
    #[error("time step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("malformed problem: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpProblem {
    pub hessian: [[f64; 2]; 2],
    pub linear: [f64; 2],
    /// Rows of `G` in `G k <= h`.
    pub constraint_matrix: Vec<[f64; 2]>,
    pub constraint_rhs: Vec<f64>,
}

impl QpProblem {
    pub fn validate(&self) -> Result<(), QpError> {
        let h = &self.hessian;
        if (h[0][1] - h[1][0]).abs() > 1e-12 * (1.0 + h[0][1].abs()) {
            return Err(QpError::Malformed("hessian not symmetric".into()));
        }
        if self.constraint_matrix.is_empty() {
            return Err(QpError::Malformed("no constraints".into()));
        }
        if self.constraint_matrix.len() != self.constraint_rhs.len() {
            return Err(QpError::Malformed("row count mismatch".into()));
        }
        let finite = h.iter().flatten().chain(&self.linear).all(|v| v.is_finite())
            && self.constraint_matrix.iter().flatten().all(|v| v.is_finite())
            && self.constraint_rhs.iter().all(|v| v.is_finite());
        if !finite {
            return Err(QpError::Malformed("non-finite entry".into()));
        }
        Ok(())
    }

    pub fn objective(&self, k: [f64; 2]) -> f64 {
        let h = &self.hessian;
        0.5 * (k[0] * (h[0][0] * k[0] + h[0][1] * k[1]) + k[1] * (h[1][0] * k[0] + h[1][1] * k[1]))
            + self.linear[0] * k[0]
            + self.linear[1] * k[1]
    }

    /// Largest row violation `max_i (g_i . k - h_i)`.
    pub fn max_violation(&self, k: [f64; 2]) -> f64 {
        self.constraint_matrix
            .iter()
            .zip(&self.constraint_rhs)
            .map(|(g, h)| g[0] * k[0] + g[1] * k[1] - h)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QpStatus {
    Optimal,
    Infeasible,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpSolution {
    pub k: [f64; 2],
    pub objective: f64,
    pub status: QpStatus,
    /// Multipliers of the rows of the original problem.
    pub duals: Vec<f64>,
    pub iterations: usize,
    /// Complementarity `s'z` after each phase-2 iteration.
    pub gap_history: Vec<f64>,
}

impl QpSolution {
    fn failed(status: QpStatus, m: usize, iterations: usize) -> Self {
        Self {
            k: [f64::NAN; 2],
            objective: f64::NAN,
            status,
            duals: vec![0.0; m],
            iterations,
            gap_history: Vec::new(),
        }
    }
}

/// `u = b + A k` with `A` diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommandMap {
    pub b: [f64; 2],
    pub a: [f64; 2],
}

/// Builds the per-tick program. Without a previous map (first tick or fresh target)
/// the rate rows are dropped and the objective reduces to the ridge.
pub fn build_problem(
    geom: &LookaheadGeometry,
    state: &UavState,
    cfg: &GuidanceConfig,
    c_dots: (f64, f64),
    prev: Option<&CommandMap>,
    dt: f64,
) -> Result<(QpProblem, CommandMap), QpError> {
    if !(dt > 0.0) {
        return Err(QpError::NonPositiveStep(dt));
    }
    let th = geom.theta.ok_or(QpError::SingularTheta {
        sin_theta: 0.0,
        cos_theta: 0.0,
    })?;
    if th.sin_theta.abs() < THETA_EPS || th.cos_theta.abs() < THETA_EPS {
        return Err(QpError::SingularTheta {
            sin_theta: th.sin_theta,
            cos_theta: th.cos_theta,
        });
    }
    let (lat, lon) = cfg.clamp_etas(geom);
    let v = state.v_g;
    let cg = state.gamma.cos();
    let map = CommandMap {
        b: [
            (cfg.k_q * lat.sin() + c_dots.0) * v * cg,
            (cfg.k_q * lon.sin() + c_dots.1) * v + GRAVITY * cg,
        ],
        a: [v * cg / th.sin_theta, v / th.cos_theta],
    };
    let u_min = [cfg.a_yc_min, cfg.a_zc_min];
    let u_max = [cfg.a_yc_max, cfg.a_zc_max];

    let mut rows = vec![
        [map.a[0], 0.0],
        [0.0, map.a[1]],
        [-map.a[0], 0.0],
        [0.0, -map.a[1]],
    ];
    let mut rhs = vec![
        u_max[0] - map.b[0],
        u_max[1] - map.b[1],
        map.b[0] - u_min[0],
        map.b[1] - u_min[1],
    ];
    let r = &cfg.r_weight;
    let mut hessian = [[RIDGE, 0.0], [0.0, RIDGE]];
    let mut linear = [0.0; 2];
    if let Some(p) = prev {
        let da = [map.a[0] - p.a[0], map.a[1] - p.a[1]];
        let db = [map.b[0] - p.b[0], map.b[1] - p.b[1]];
        for i in 0..2 {
            for j in 0..2 {
                hessian[i][j] += da[i] * r[i][j] * da[j];
            }
            linear[i] = (db[0] * r[0][i] + db[1] * r[1][i]) * da[i];
        }
        rows.extend([[da[0], 0.0], [0.0, da[1]], [-da[0], 0.0], [0.0, -da[1]]]);
        rhs.extend([
            cfg.u_dot_max[0] * dt - db[0],
            cfg.u_dot_max[1] * dt - db[1],
            db[0] - cfg.u_dot_min[0] * dt,
            db[1] - cfg.u_dot_min[1] * dt,
        ]);
    }
    rows.push([-1.0, -1.0]);
    rhs.push(-(1.0 + cfg.epsilon) * cfg.l_d);
    Ok((
        QpProblem {
            hessian,
            linear,
            constraint_matrix: rows,
            constraint_rhs: rhs,
        },
        map,
    ))
}

// ---------------------------------------------------------------------------
// Dense primal-dual interior point
// ---------------------------------------------------------------------------

/// Gaussian elimination with partial pivoting for the tiny Newton systems.
fn solve_dense(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            if f != 0.0 {
                for c in col..n {
                    m[row][c] -= f * m[col][c];
                }
                rhs[row] -= f * rhs[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|c| m[row][c] * x[c]).sum();
        x[row] = (rhs[row] - s) / m[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// `min 1/2 x'Px + q'x  s.t.  Gx <= h`, dense, small `n`.
struct Program {
    p: Vec<Vec<f64>>,
    q: Vec<f64>,
    g: Vec<Vec<f64>>,
    h: Vec<f64>,
}

struct Iterate {
    x: Vec<f64>,
    s: Vec<f64>,
    z: Vec<f64>,
}

enum IpOutcome {
    Converged,
    StoppedEarly,
    MaxIterations,
    Breakdown,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_step(v: &[f64], dv: &[f64]) -> f64 {
    v.iter()
        .zip(dv)
        .filter(|(_, d)| **d < 0.0)
        .map(|(x, d)| -x / d)
        .fold(f64::INFINITY, f64::min)
}

impl Program {
    fn n(&self) -> usize {
        self.q.len()
    }

    fn m(&self) -> usize {
        self.h.len()
    }

    fn residuals(&self, it: &Iterate) -> (Vec<f64>, Vec<f64>) {
        let n = self.n();
        let rd: Vec<f64> = (0..n)
            .map(|i| {
                dot(&self.p[i], &it.x)
                    + self.q[i]
                    + (0..self.m()).map(|j| self.g[j][i] * it.z[j]).sum::<f64>()
            })
            .collect();
        let rp: Vec<f64> = (0..self.m())
            .map(|j| dot(&self.g[j], &it.x) + it.s[j] - self.h[j])
            .collect();
        (rd, rp)
    }

    /// Newton direction for residuals `(rd, rp)` and complementarity target `rc`.
    fn direction(
        &self,
        it: &Iterate,
        rd: &[f64],
        rp: &[f64],
        rc: &[f64],
    ) -> Option<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let (n, m) = (self.n(), self.m());
        // w = S^{-1}(-rc + Z rp); dz = w + S^{-1} Z G dx
        let w: Vec<f64> = (0..m).map(|j| (-rc[j] + it.z[j] * rp[j]) / it.s[j]).collect();
        let mut k = self.p.clone();
        for j in 0..m {
            let d = it.z[j] / it.s[j];
            for a in 0..n {
                for b in 0..n {
                    k[a][b] += self.g[j][a] * d * self.g[j][b];
                }
            }
        }
        let rhs: Vec<f64> = (0..n)
            .map(|a| -rd[a] - (0..m).map(|j| self.g[j][a] * w[j]).sum::<f64>())
            .collect();
        let dx = solve_dense(k, rhs)?;
        let gdx: Vec<f64> = (0..m).map(|j| dot(&self.g[j], &dx)).collect();
        let ds: Vec<f64> = (0..m).map(|j| -rp[j] - gdx[j]).collect();
        let dz: Vec<f64> = (0..m)
            .map(|j| w[j] + it.z[j] / it.s[j] * gdx[j])
            .collect();
        Some((dx, ds, dz))
    }

    /// Damped Newton on the log-barrier problem from a strictly feasible `x`,
    /// returning a near-central primal-dual point (`z = 1 / s`), which keeps the
    /// dual residual small so the gap can decrease monotonically from there.
    fn centered_start(&self, mut x: Vec<f64>, iterations: &mut usize) -> Iterate {
        let (n, m) = (self.n(), self.m());
        let slacks = |x: &[f64]| -> Vec<f64> { (0..m).map(|j| self.h[j] - dot(&self.g[j], x)).collect() };
        let barrier = |x: &[f64]| -> f64 {
            let s = slacks(x);
            if s.iter().any(|v| *v <= 0.0) {
                return f64::INFINITY;
            }
            let px: f64 = (0..n).map(|a| x[a] * dot(&self.p[a], x)).sum();
            0.5 * px + dot(&self.q, x) - s.iter().map(|v| v.ln()).sum::<f64>()
        };
        for _ in 0..200 {
            let s = slacks(&x);
            let mut grad: Vec<f64> = (0..n).map(|a| dot(&self.p[a], &x) + self.q[a]).collect();
            let mut hess = self.p.clone();
            for j in 0..m {
                for a in 0..n {
                    grad[a] += self.g[j][a] / s[j];
                    for b in 0..n {
                        hess[a][b] += self.g[j][a] * self.g[j][b] / (s[j] * s[j]);
                    }
                }
            }
            let Some(dx) = solve_dense(hess, grad.iter().map(|v| -v).collect()) else {
                break;
            };
            let decrement = -dot(&grad, &dx);
            if decrement < 1e-12 {
                break;
            }
            *iterations += 1;
            let f0 = barrier(&x);
            let mut alpha = 1.0;
            let mut moved = false;
            for _ in 0..60 {
                let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + alpha * d).collect();
                if barrier(&trial) <= f0 - 0.25 * alpha * decrement {
                    x = trial;
                    moved = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !moved {
                break;
            }
        }
        let s = slacks(&x);
        let z = s.iter().map(|v| 1.0 / v).collect();
        Iterate { x, s, z }
    }

    /// Mehrotra predictor-corrector. `stop` is consulted after every iteration.
    fn run(
        &self,
        it: &mut Iterate,
        tol: f64,
        max_iterations: usize,
        iterations: &mut usize,
        gaps: &mut Vec<f64>,
        monotone: bool,
        mut stop: impl FnMut(&Iterate, f64) -> bool,
    ) -> IpOutcome {
        let m = self.m() as f64;
        let scale = 1.0
            + self
                .q
                .iter()
                .chain(self.p.iter().flatten())
                .fold(0.0f64, |a, v| a.max(v.abs()));
        loop {
            let (rd, rp) = self.residuals(it);
            let gap = dot(&it.s, &it.z);
            let rd_norm = rd.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let rp_norm = rp.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if gap < tol && rp_norm < tol && rd_norm < tol * scale {
                return IpOutcome::Converged;
            }
            if *iterations >= max_iterations {
                return IpOutcome::MaxIterations;
            }
            *iterations += 1;

            let mu = gap / m;
            let rc_aff: Vec<f64> = it.s.iter().zip(&it.z).map(|(s, z)| s * z).collect();
            let Some((_, ds_a, dz_a)) = self.direction(it, &rd, &rp, &rc_aff) else {
                return IpOutcome::Breakdown;
            };
            let alpha_aff = max_step(&it.s, &ds_a).min(max_step(&it.z, &dz_a)).min(1.0);
            let mu_aff = it
                .s
                .iter()
                .zip(&ds_a)
                .zip(it.z.iter().zip(&dz_a))
                .map(|((s, ds), (z, dz))| (s + alpha_aff * ds) * (z + alpha_aff * dz))
                .sum::<f64>()
                / m;
            let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);
            let rc: Vec<f64> = (0..self.m())
                .map(|j| it.s[j] * it.z[j] + ds_a[j] * dz_a[j] - sigma * mu)
                .collect();
            let Some((dx, ds, dz)) = self.direction(it, &rd, &rp, &rc) else {
                return IpOutcome::Breakdown;
            };
            let mut alpha = (0.99 * max_step(&it.s, &ds).min(max_step(&it.z, &dz))).min(1.0);
            let gap_at = |alpha: f64| -> f64 {
                (0..self.m())
                    .map(|j| (it.s[j] + alpha * ds[j]) * (it.z[j] + alpha * dz[j]))
                    .sum()
            };
            let mut next_gap = gap_at(alpha);
            if monotone {
                // Keep the complementarity gap non-increasing.
                let mut tries = 0;
                while !(next_gap <= gap) && tries < 60 {
                    alpha *= 0.5;
                    next_gap = gap_at(alpha);
                    tries += 1;
                }
                if !(next_gap <= gap) {
                    return IpOutcome::Breakdown;
                }
            }
            if alpha == 0.0 || !next_gap.is_finite() {
                return IpOutcome::Breakdown;
            }
            for (x, d) in it.x.iter_mut().zip(&dx) {
                *x += alpha * d;
            }
            for (s, d) in it.s.iter_mut().zip(&ds) {
                *s += alpha * d;
            }
            for (z, d) in it.z.iter_mut().zip(&dz) {
                *z += alpha * d;
            }
            gaps.push(next_gap);
            if stop(it, next_gap) {
                return IpOutcome::StoppedEarly;
            }
        }
    }
}

/// Solves the program with a primal-dual interior-point method.
pub fn solve(problem: &QpProblem, tolerance: f64, max_iterations: usize) -> QpSolution {
    let m = problem.constraint_matrix.len();
    if problem.validate().is_err() {
        return QpSolution::failed(QpStatus::Infeasible, m, 0);
    }

    // Unit-norm rows; zero rows are constant constraints.
    let mut norms = Vec::with_capacity(m);
    let mut g = Vec::new();
    let mut h = Vec::new();
    let mut kept = Vec::new();
    for (j, (row, rhs)) in problem
        .constraint_matrix
        .iter()
        .zip(&problem.constraint_rhs)
        .enumerate()
    {
        let norm = row[0].hypot(row[1]);
        norms.push(norm);
        if norm < 1e-300 {
            if *rhs < 0.0 {
                return QpSolution::failed(QpStatus::Infeasible, m, 0);
            }
            continue;
        }
        g.push(vec![row[0] / norm, row[1] / norm]);
        h.push(rhs / norm);
        kept.push(j);
    }
    if g.is_empty() {
        // Only trivially satisfied rows: unconstrained minimiser.
        let hs = &problem.hessian;
        let Some(k) = solve_dense(
            vec![hs[0].to_vec(), hs[1].to_vec()],
            vec![-problem.linear[0], -problem.linear[1]],
        ) else {
            return QpSolution::failed(QpStatus::MaxIterations, m, 0);
        };
        let k = [k[0], k[1]];
        return QpSolution {
            k,
            objective: problem.objective(k),
            status: QpStatus::Optimal,
            duals: vec![0.0; m],
            iterations: 0,
            gap_history: Vec::new(),
        };
    }
    let mk = g.len();
    let mut iterations = 0;

    // Phase 1: maximise the common slack t subject to G x + t <= h, t <= 1.
    let rho = 1e-8;
    let mut g1: Vec<Vec<f64>> = g.iter().map(|r| vec![r[0], r[1], 1.0]).collect();
    g1.push(vec![0.0, 0.0, 1.0]);
    let mut h1 = h.clone();
    h1.push(1.0);
    let phase1 = Program {
        p: vec![vec![rho, 0.0, 0.0], vec![0.0, rho, 0.0], vec![0.0, 0.0, 0.0]],
        q: vec![0.0, 0.0, -1.0],
        g: g1,
        h: h1,
    };
    let t0 = h.iter().fold(1.0f64, |a, v| a.min(*v)) - 1.0;
    let s0: Vec<f64> = phase1.h.iter().map(|hj| hj - t0).collect();
    let mut it1 = Iterate {
        x: vec![0.0, 0.0, t0],
        s: s0,
        z: vec![1.0; mk + 1],
    };
    let mut scratch = Vec::new();
    let outcome = phase1.run(
        &mut it1,
        1e-13,
        max_iterations,
        &mut iterations,
        &mut scratch,
        false,
        |it, gap| it.x[2] > 0.0 || it.x[2] + gap < 0.0,
    );
    let t = it1.x[2];
    let strictly_feasible = t > 0.0;
    if !strictly_feasible {
        return match outcome {
            IpOutcome::MaxIterations => QpSolution::failed(QpStatus::MaxIterations, m, iterations),
            _ => QpSolution::failed(QpStatus::Infeasible, m, iterations),
        };
    }

    // Phase 2 from the strictly feasible point.
    let phase2 = Program {
        p: vec![problem.hessian[0].to_vec(), problem.hessian[1].to_vec()],
        q: problem.linear.to_vec(),
        g,
        h,
    };
    let mut centering = 0;
    let mut it2 = phase2.centered_start(vec![it1.x[0], it1.x[1]], &mut centering);
    let phase1_iterations = iterations;
    iterations = 0;
    let mut gaps = Vec::new();
    let outcome = phase2.run(
        &mut it2,
        tolerance,
        max_iterations,
        &mut iterations,
        &mut gaps,
        true,
        |_, _| false,
    );
    let k = [it2.x[0], it2.x[1]];
    let mut duals = vec![0.0; m];
    for (zj, &j) in it2.z.iter().zip(&kept) {
        duals[j] = zj / norms[j];
    }
    let status = match outcome {
        IpOutcome::Converged => QpStatus::Optimal,
        _ => QpStatus::MaxIterations,
    };
    QpSolution {
        k,
        objective: problem.objective(k),
        status,
        duals,
        iterations: phase1_iterations + centering + iterations,
        gap_history: gaps,
    }
}

/// KKT residuals `(stationarity, complementarity, primal infeasibility)` as max-norms.
pub fn kkt_residuals(problem: &QpProblem, sol: &QpSolution) -> (f64, f64, f64) {
    let h = &problem.hessian;
    let k = sol.k;
    let mut grad = [
        h[0][0] * k[0] + h[0][1] * k[1] + problem.linear[0],
        h[1][0] * k[0] + h[1][1] * k[1] + problem.linear[1],
    ];
    let mut comp = 0.0f64;
    let mut primal = 0.0f64;
    for ((row, rhs), z) in problem
        .constraint_matrix
        .iter()
        .zip(&problem.constraint_rhs)
        .zip(&sol.duals)
    {
        grad[0] += row[0] * z;
        grad[1] += row[1] * z;
        let slack = rhs - (row[0] * k[0] + row[1] * k[1]);
        comp = comp.max((slack * z).abs());
        primal = primal.max(-slack);
    }
    (grad[0].abs().max(grad[1].abs()), comp, primal.max(0.0))
}

// ---------------------------------------------------------------------------
// Reference solver
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleMode {
    /// Exact enumeration of every active set of size <= 2.
    ActiveSet,
    /// Feasible grid point of least objective on `[lo, hi]^2`.
    Grid { resolution: usize, lo: f64, hi: f64 },
}

fn inv2(m: &[[f64; 2]; 2]) -> Option<[[f64; 2]; 2]> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det.abs() < 1e-300 {
        return None;
    }
    Some([
        [m[1][1] / det, -m[0][1] / det],
        [-m[1][0] / det, m[0][0] / det],
    ])
}

fn mul2(m: &[[f64; 2]; 2], v: [f64; 2]) -> [f64; 2] {
    [
        m[0][0] * v[0] + m[0][1] * v[1],
        m[1][0] * v[0] + m[1][1] * v[1],
    ]
}

/// Reference minimiser for strictly convex two-variable programs.
pub fn brute_force_oracle(problem: &QpProblem, mode: OracleMode) -> QpSolution {
    let m = problem.constraint_matrix.len();
    // Unit-norm rows so the feasibility tolerance is geometric.
    let rows: Vec<([f64; 2], f64)> = problem
        .constraint_matrix
        .iter()
        .zip(&problem.constraint_rhs)
        .map(|(g, h)| {
            let n = g[0].hypot(g[1]);
            if n < 1e-300 {
                (*g, *h)
            } else {
                ([g[0] / n, g[1] / n], h / n)
            }
        })
        .collect();
    let feasible = |k: [f64; 2]| {
        rows.iter()
            .all(|(g, h)| g[0] * k[0] + g[1] * k[1] <= h + ORACLE_FEASIBILITY_TOL)
    };

    let mut candidates: Vec<[f64; 2]> = Vec::new();
    match mode {
        OracleMode::ActiveSet => {
            let Some(hinv) = inv2(&problem.hessian) else {
                return QpSolution::failed(QpStatus::MaxIterations, m, 0);
            };
            let q = problem.linear;
            let free = mul2(&hinv, [-q[0], -q[1]]);
            candidates.push(free);
            for (g, h) in &rows {
                let hg = mul2(&hinv, *g);
                let den = g[0] * hg[0] + g[1] * hg[1];
                if den.abs() < 1e-300 {
                    continue;
                }
                // x = -H^{-1}(q + nu g) with g.x = h
                let nu = -(h - (g[0] * free[0] + g[1] * free[1])) / den;
                candidates.push([free[0] - nu * hg[0], free[1] - nu * hg[1]]);
            }
            for i in 0..rows.len() {
                for j in i + 1..rows.len() {
                    let (g1, h1) = rows[i];
                    let (g2, h2) = rows[j];
                    if let Some(inv) = inv2(&[g1, g2]) {
                        candidates.push(mul2(&inv, [h1, h2]));
                    }
                }
            }
        }
        OracleMode::Grid { resolution, lo, hi } => {
            let n = resolution.max(2);
            let step = (hi - lo) / (n - 1) as f64;
            for a in 0..n {
                for b in 0..n {
                    candidates.push([lo + a as f64 * step, lo + b as f64 * step]);
                }
            }
        }
    }
    let best = candidates
        .into_iter()
        .filter(|k| k.iter().all(|v| v.is_finite()) && feasible(*k))
        .map(|k| (problem.objective(k), k))
        .min_by(|a, b| a.0.total_cmp(&b.0));
    match best {
        Some((objective, k)) => QpSolution {
            k,
            objective,
            status: QpStatus::Optimal,
            duals: vec![0.0; m],
            iterations: 0,
            gap_history: Vec::new(),
        },
        None => QpSolution::failed(QpStatus::Infeasible, m, 0),
    }
}
