//! Output files: CSV tables, profile and report JSON, and the run manifest.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use platoon::config::{DesignedProfile, ScenarioConfig};
use platoon::numfmt::format9;
use platoon::profiles::Parity;
use platoon::safety::{min_safe_distance, min_time_gap_point, safe_time_gap, SafetyParams};
use platoon::sim::{reconstruct_time_domain, Check, PlatoonTrace};
use platoon::{Result, ShapingProfile};

pub const MANIFEST: &str = "manifest.json";
pub const TRACE_CSV: &str = "trace.csv";
pub const TRAJECTORIES_CSV: &str = "trajectories.csv";
pub const PROFILE_JSON: &str = "profile.json";
pub const PROFILE_CSV: &str = "profile.csv";
pub const SAFETY_CURVE_CSV: &str = "safety_curve.csv";
pub const MERGE_REPORT_JSON: &str = "merge_report.json";
pub const SWEEP_CSV: &str = "sweep.csv";

/// `PLATOON_OUT` beats `--out`, which beats `./out`.
pub fn resolve_out_dir(flag: Option<&Path>) -> PathBuf {
    match std::env::var_os("PLATOON_OUT") {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => flag.map_or_else(|| PathBuf::from("out"), Path::to_path_buf),
    }
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_rows(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Uniform samples of the safe time-gap curve plus the curve minimum,
/// merged in velocity order and flagged in `is_minimum`.
pub fn write_safety_curve(
    path: &Path,
    params: &SafetyParams,
    v_min: f64,
    v_max: f64,
    n: usize,
) -> Result<()> {
    let mut vs: Vec<(f64, bool)> = (0..n)
        .map(|k| (v_min + (v_max - v_min) * k as f64 / (n - 1) as f64, false))
        .collect();
    let v_star = min_time_gap_point(params).velocity;
    if v_star >= v_min && v_star <= v_max {
        match vs
            .iter_mut()
            .find(|(v, _)| (v - v_star).abs() <= 1e-12 * v_star)
        {
            Some(row) => row.1 = true,
            None => {
                let at = vs.partition_point(|(v, _)| *v < v_star);
                vs.insert(at, (v_star, true));
            }
        }
    }
    let mut rows = Vec::with_capacity(vs.len());
    for (v, is_min) in vs {
        rows.push(vec![
            format9(v),
            format9(safe_time_gap(v, params)?),
            format9(min_safe_distance(v, params)?),
            u8::from(is_min).to_string(),
        ]);
    }
    write_rows(
        path,
        &["v", "tau_safe", "min_safe_distance", "is_minimum"],
        rows.into_iter(),
    )
}

/// Ideal-flow profile samples: gaps, velocities and accelerations by parity.
pub fn write_profile_csv(path: &Path, profile: &ShapingProfile, s: &[f64]) -> Result<()> {
    let mut rows = Vec::with_capacity(s.len());
    for &x in s {
        let (a_odd, a_even) = profile.analytic_accelerations(x)?;
        rows.push(vec![
            format9(x),
            format9(profile.time_gap_at(Parity::Odd, x).tau),
            format9(profile.time_gap_at(Parity::Even, x).tau),
            format9(profile.odd_velocity(x)?),
            format9(profile.desired_velocity(x)?),
            format9(a_odd),
            format9(a_even),
        ]);
    }
    write_rows(
        path,
        &[
            "s", "tau_odd", "tau_even", "v_odd", "v_des", "a_odd", "a_even",
        ],
        rows.into_iter(),
    )
}

/// Positions `s_i(t)` on a uniform time grid; rows only where the vehicle
/// is on the simulated stretch.
pub fn write_trajectories(path: &Path, trace: &PlatoonTrace, dt: f64) -> Result<()> {
    let t_lo = trace
        .vehicles
        .iter()
        .map(|v| v.t[0])
        .fold(f64::INFINITY, f64::min);
    let t_hi = trace
        .vehicles
        .iter()
        .map(|v| v.t[v.t.len() - 1])
        .fold(f64::NEG_INFINITY, f64::max);
    let k_lo = (t_lo / dt).ceil() as i64;
    let k_hi = (t_hi / dt).floor() as i64;
    let times: Vec<f64> = (k_lo..=k_hi).map(|k| k as f64 * dt).collect();
    let positions = reconstruct_time_domain(trace, &times)?;
    let rows = positions.iter().enumerate().flat_map(|(i, column)| {
        times
            .iter()
            .zip(column)
            .filter_map(move |(t, s)| s.map(|s| vec![format9(*t), i.to_string(), format9(s)]))
    });
    write_rows(path, &["t", "i", "s"], rows)
}

#[derive(Debug, Serialize)]
pub struct ProfileDoc {
    pub constant: bool,
    pub tau0: f64,
    pub tau_odd_end: f64,
    pub tau_even_end: f64,
    pub gamma: f64,
    pub gamma_optimized: bool,
    pub alpha: f64,
    pub beta: f64,
    pub center_s: f64,
    /// `beta * gamma`, the steepest gap slope.
    pub max_slope: f64,
    pub vehicle_length: f64,
    pub a_min: f64,
    pub tau_min: f64,
    pub v_star: f64,
    pub window: [f64; 2],
    pub v_des_upstream: f64,
    pub v_des_downstream: f64,
    pub min_acceleration_odd: f64,
    pub min_acceleration_even: f64,
}

impl ProfileDoc {
    pub fn new(designed: &DesignedProfile, window: (f64, f64)) -> Result<Self> {
        let p = &designed.profile;
        let params = p.params();
        let (lo, hi) = window;
        let (a_odd, a_even) =
            p.sampled_min_accelerations(lo, hi, 0.05_f64.min((hi - lo) / 10.0))?;
        Ok(Self {
            constant: p.is_constant(),
            tau0: p.tau0(),
            tau_odd_end: p.tau_odd_end(),
            tau_even_end: p.tau_even_end(),
            gamma: p.gamma(),
            gamma_optimized: designed.gamma_optimized,
            alpha: p.alpha(),
            beta: p.beta(),
            center_s: p.center_s(),
            max_slope: p.max_slope(),
            vehicle_length: params.vehicle_length(),
            a_min: params.a_min(),
            tau_min: params.tau_min(),
            v_star: params.v_star(),
            window: [lo, hi],
            v_des_upstream: p.desired_velocity(lo)?,
            v_des_downstream: p.desired_velocity(hi)?,
            min_acceleration_odd: a_odd,
            min_acceleration_even: a_even,
        })
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    /// `ok`, `infeasible` or `failed`.
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<ScenarioConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_optimized: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Output role -> file name inside the output directory.
    pub outputs: BTreeMap<&'static str, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<serde_json::Value>,
    pub checks: Vec<Check>,
    pub created_unix: u64,
    pub version: &'static str,
}

impl RunManifest {
    pub fn new(command: &'static str, seed: Option<u64>) -> Self {
        Self {
            command,
            status: "ok",
            reason: None,
            message: None,
            scenario: None,
            config: None,
            gamma: None,
            gamma_optimized: None,
            seed,
            outputs: BTreeMap::new(),
            summary: None,
            checks: Vec::new(),
            created_unix: 0,
            version: env!("CARGO_PKG_VERSION"),
        }
    }

    pub fn output(&mut self, role: &'static str, file: &str) {
        self.outputs.insert(role, file.to_string());
    }

    /// Written last, once every other output is flushed.
    pub fn write(&mut self, dir: &Path) -> Result<()> {
        self.created_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        write_json(&dir.join(MANIFEST), self)
    }
}
