//! Run log and metrics file formats.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;

use super::{RunMetrics, TickRecord};

pub const CSV_HEADER: &str =
    "t,x,y,z,chi,gamma,target_idx,eta_lat,eta_lon,a_yc,a_zc,e_d,k1,k2,qp_status,clipped";
pub const DISTURBANCE_HEADER: &str = "t,d_chi,d_gamma";

/// Formats `v` with 9 significant digits, dropping trailing zeros (like `%.9g`).
pub fn format_sig(v: f64) -> String {
    const DIGITS: i32 = 9;
    if v == 0.0 {
        return "0".into();
    }
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..DIGITS).contains(&exp) {
        let m = trim_zeros(mantissa);
        return format!("{m}e{exp}");
    }
    let decimals = (DIGITS - 1 - exp) as usize;
    trim_zeros(&format!("{v:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn csv_row(r: &TickRecord) -> String {
    let mut line = String::with_capacity(192);
    for v in [r.t, r.state.x, r.state.y, r.state.z, r.state.chi, r.state.gamma] {
        line.push_str(&format_sig(v));
        line.push(',');
    }
    write!(line, "{},", r.target.index).expect("string write");
    for v in [r.eta_lat, r.eta_lon, r.a_yc, r.a_zc, r.e_d, r.k1, r.k2] {
        line.push_str(&format_sig(v));
        line.push(',');
    }
    line.push_str(r.gain_source.as_str());
    line.push(',');
    line.push(if r.clipped { '1' } else { '0' });
    line
}

pub fn to_csv(records: &[TickRecord]) -> String {
    let mut out = String::with_capacity(records.len() * 160 + 128);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&csv_row(r));
        out.push('\n');
    }
    out
}

pub fn disturbance_csv(records: &[TickRecord]) -> String {
    let mut out = String::from(DISTURBANCE_HEADER);
    out.push('\n');
    for r in records {
        writeln!(
            out,
            "{},{},{}",
            format_sig(r.t),
            format_sig(r.disturbance.d_chi),
            format_sig(r.disturbance.d_gamma)
        )
        .expect("string write");
    }
    out
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("metrics serialise");
    s.push('\n');
    s
}

pub fn write_csv(path: impl AsRef<Path>, records: &[TickRecord]) -> io::Result<()> {
    fs::write(path, to_csv(records))
}

pub fn write_metrics(path: impl AsRef<Path>, metrics: &RunMetrics) -> io::Result<()> {
    fs::write(path, to_json(metrics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::guidance::GuidanceConfig;
    use crate::path::WaypointPath;
    use crate::sim::{run, Controller, Scenario};

    #[test]
    fn significant_digits() {
        assert_eq!(format_sig(0.0), "0");
        assert_eq!(format_sig(2.5), "2.5");
        assert_eq!(format_sig(-25.0), "-25");
        assert_eq!(format_sig(9.81), "9.81");
        assert_eq!(format_sig(std::f64::consts::PI), "3.14159265");
        assert_eq!(format_sig(123456.789123), "123456.789");
        assert_eq!(format_sig(1234567891.0), "1.23456789e9");
        assert_eq!(format_sig(1.0e-7), "1e-7");
        assert_eq!(format_sig(0.000123456789123), "0.000123456789");
        assert_eq!(format_sig(0.1 + 0.2), "0.3");
        assert_eq!(format_sig(f64::NAN), "nan");
    }

    #[test]
    fn values_round_trip_to_nine_digits() {
        for v in [1.0 / 3.0, -2.0f64.sqrt() * 1e5, 6.02214076e23, 1.602e-19, 0.7] {
            let back: f64 = format_sig(v).parse().unwrap();
            assert!(((back - v) / v).abs() < 5e-9, "{v} -> {back}");
        }
    }

    #[test]
    fn csv_layout() {
        let path = WaypointPath::new((0..50).map(|i| [10.0 * i as f64, 0.0, 0.0]).collect()).unwrap();
        let s = Scenario { duration: 2.0, ..Scenario::new(path, GuidanceConfig::default(), Controller::Rllp) };
        let out = run(&s).unwrap();
        let csv = to_csv(&out.records);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), out.records.len());
        for row in rows {
            assert_eq!(row.split(',').count(), 16);
        }
        assert!(csv.lines().nth(1).unwrap().starts_with("0,0,0,0,0,0,"));
        assert!(csv.lines().nth(1).unwrap().ends_with(",none,0"));
    }
}
