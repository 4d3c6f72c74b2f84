use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::TickRecord;

/// Fraction of the leg-start distance error that counts as converged.
pub const CONVERGENCE_FRACTION: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("no records to summarise")]
    EmptyRun,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesStats {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl SeriesStats {
    pub fn from_values(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        let values: Vec<f64> = values.into_iter().collect();
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Self {
            mean,
            std: var.sqrt(),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

/// One maximal run of ticks pursuing the same waypoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Leg {
    pub target_index: usize,
    pub start_time: f64,
    pub start_error: f64,
    pub duration: f64,
    /// Time from leg start until `e_d` first drops below the threshold;
    /// `None` if the target switched first.
    pub convergence_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub ticks: usize,
    pub start_time: f64,
    pub end_time: f64,
    pub eta_lon: SeriesStats,
    pub eta_lat: SeriesStats,
    pub a_yc: SeriesStats,
    pub a_zc: SeriesStats,
    pub e_d: SeriesStats,
    /// Median over legs of the per-leg convergence time, s. Legs that never
    /// converge count as infinitely slow; an infinite median is reported as `None`.
    pub median_convergence_time: Option<f64>,
    pub unconverged_legs: usize,
    pub legs: Vec<Leg>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn legs(records: &[TickRecord], dt: f64) -> Vec<Leg> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < records.len() {
        let index = records[start].target.index;
        let end = records[start..]
            .iter()
            .position(|r| r.target.index != index)
            .map_or(records.len(), |p| start + p);
        let leg = &records[start..end];
        let t0 = leg[0].t;
        let e0 = leg[0].e_d;
        let duration = leg[leg.len() - 1].t - t0 + dt;
        let hit = leg.iter().find(|r| r.e_d < CONVERGENCE_FRACTION * e0);
        out.push(Leg {
            target_index: index,
            start_time: t0,
            start_error: e0,
            duration,
            convergence_time: hit.map(|r| r.t - t0),
        });
        start = end;
    }
    out
}

/// Summary statistics over the whole record list.
pub fn compute_metrics(records: &[TickRecord]) -> Result<RunMetrics, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyRun);
    }
    let dt = if records.len() > 1 { records[1].t - records[0].t } else { 0.0 };
    let stats = |f: fn(&TickRecord) -> f64| SeriesStats::from_values(records.iter().map(f)).expect("non-empty");
    let legs = legs(records, dt);
    Ok(RunMetrics {
        ticks: records.len(),
        start_time: records[0].t,
        end_time: records[records.len() - 1].t,
        eta_lon: stats(|r| r.eta_lon),
        eta_lat: stats(|r| r.eta_lat),
        a_yc: stats(|r| r.a_yc),
        a_zc: stats(|r| r.a_zc),
        e_d: stats(|r| r.e_d),
        median_convergence_time: Some(median(
            legs.iter().map(|l| l.convergence_time.unwrap_or(f64::INFINITY)).collect(),
        ))
        .filter(|m| m.is_finite()),
        unconverged_legs: legs.iter().filter(|l| l.convergence_time.is_none()).count(),
        legs,
    })
}

/// Metrics over records with `from <= t <= to`.
pub fn compute_metrics_window(records: &[TickRecord], from: f64, to: f64) -> Result<RunMetrics, MetricsError> {
    let lo = records.partition_point(|r| r.t < from - 1e-9);
    let hi = records.partition_point(|r| r.t <= to + 1e-9);
    compute_metrics(&records[lo..hi.max(lo)])
}
