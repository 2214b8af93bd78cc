use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numfmt::format9;
use crate::profiles::Parity;
use crate::safety::safe_time_gap;

use super::scenario::Scenario;

/// Errors below this count as converged.
pub const CONVERGENCE_THRESHOLD: f64 = 1e-3;
/// Allowed excursion below the safety boundary in the built-in audit (s).
pub const SAFETY_AUDIT_TOLERANCE: f64 = 1e-6;
/// Allowed excursion below `-a_min` in the built-in audit (m/s^2).
pub const ACCELERATION_AUDIT_SLACK: f64 = 0.05;

pub const CSV_HEADER: [&str; 12] = [
    "s",
    "i",
    "parity",
    "t",
    "v",
    "u",
    "e",
    "delta",
    "delta_slope",
    "tau_realized",
    "tau_desired",
    "safety_margin",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleTrace {
    pub index: usize,
    pub parity: Parity,
    pub t: Vec<f64>,
    pub v: Vec<f64>,
    pub u: Vec<f64>,
    pub e: Vec<f64>,
    /// Absent for the lead.
    pub delta: Option<Vec<f64>>,
    pub delta_slope: Option<Vec<f64>>,
}

impl VehicleTrace {
    pub fn with_capacity(index: usize, len: usize) -> Self {
        let follower = index > 0;
        Self {
            index,
            parity: Parity::of(index),
            t: Vec::with_capacity(len),
            v: Vec::with_capacity(len),
            u: Vec::with_capacity(len),
            e: Vec::with_capacity(len),
            delta: follower.then(|| Vec::with_capacity(len)),
            delta_slope: follower.then(|| Vec::with_capacity(len)),
        }
    }

    pub fn sup_abs_e(&self) -> f64 {
        sup_abs(&self.e)
    }

    pub fn sup_abs_delta(&self) -> Option<f64> {
        self.delta.as_deref().map(sup_abs)
    }
}

fn sup_abs(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// A worst value and where it occurred.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    pub value: f64,
    pub vehicle: usize,
    pub s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub sup_abs_e: Vec<f64>,
    pub sup_abs_delta: Vec<Option<f64>>,
    pub min_acceleration: Extremum,
    /// `None` for a lone vehicle.
    pub min_safety_margin: Option<Extremum>,
    /// First location from which every |e| and |delta| stays below
    /// [`CONVERGENCE_THRESHOLD`].
    pub convergence_s: Option<f64>,
    /// Largest |e| or |delta| at the last grid point.
    pub final_max_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatoonTrace {
    pub s: Vec<f64>,
    pub vehicles: Vec<VehicleTrace>,
    pub scenario: Scenario,
    pub summary: TraceSummary,
}

impl PlatoonTrace {
    pub fn new(s: Vec<f64>, vehicles: Vec<VehicleTrace>, scenario: Scenario) -> Result<Self> {
        if vehicles.iter().any(|v| v.t.len() != s.len()) {
            return Err(Error::Invariant(
                "vehicle traces must share the grid".into(),
            ));
        }
        let mut trace = Self {
            s,
            vehicles,
            scenario,
            summary: TraceSummary {
                sup_abs_e: Vec::new(),
                sup_abs_delta: Vec::new(),
                min_acceleration: Extremum {
                    value: f64::INFINITY,
                    vehicle: 0,
                    s: f64::NAN,
                },
                min_safety_margin: None,
                convergence_s: None,
                final_max_error: 0.0,
            },
        };
        trace.summary = trace.summarize()?;
        Ok(trace)
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    /// `t_i(s_k) - t_{i-1}(s_k)`.
    pub fn realized_gap(&self, i: usize, k: usize) -> Option<f64> {
        (i > 0).then(|| self.vehicles[i].t[k] - self.vehicles[i - 1].t[k])
    }

    pub fn desired_gap(&self, i: usize, k: usize) -> Option<f64> {
        (i > 0).then(|| {
            self.scenario
                .profile
                .time_gap_at(Parity::of(i), self.s[k])
                .tau
        })
    }

    /// Realized gap minus the safe gap at the follower's velocity.
    pub fn safety_margin(&self, i: usize, k: usize) -> Result<Option<f64>> {
        match self.realized_gap(i, k) {
            None => Ok(None),
            Some(gap) => Ok(Some(
                gap - safe_time_gap(self.vehicles[i].v[k], self.scenario.params())?,
            )),
        }
    }

    fn errors_at(&self, k: usize) -> f64 {
        self.vehicles.iter().fold(0.0f64, |m, v| {
            let d = v.delta.as_ref().map_or(0.0, |d| d[k].abs());
            m.max(v.e[k].abs()).max(d)
        })
    }

    fn summarize(&self) -> Result<TraceSummary> {
        let mut min_acc = Extremum {
            value: f64::INFINITY,
            vehicle: 0,
            s: f64::NAN,
        };
        let mut min_margin: Option<Extremum> = None;
        for veh in &self.vehicles {
            for (k, &u) in veh.u.iter().enumerate() {
                if u < min_acc.value {
                    min_acc = Extremum {
                        value: u,
                        vehicle: veh.index,
                        s: self.s[k],
                    };
                }
                if let Some(m) = self.safety_margin(veh.index, k)? {
                    if min_margin.map_or(true, |cur| m < cur.value) {
                        min_margin = Some(Extremum {
                            value: m,
                            vehicle: veh.index,
                            s: self.s[k],
                        });
                    }
                }
            }
        }
        let n = self.s.len();
        let mut convergence_s = None;
        if n > 0 && self.errors_at(n - 1) < CONVERGENCE_THRESHOLD {
            let mut k = n - 1;
            while k > 0 && self.errors_at(k - 1) < CONVERGENCE_THRESHOLD {
                k -= 1;
            }
            convergence_s = Some(self.s[k]);
        }
        Ok(TraceSummary {
            sup_abs_e: self.vehicles.iter().map(VehicleTrace::sup_abs_e).collect(),
            sup_abs_delta: self
                .vehicles
                .iter()
                .map(VehicleTrace::sup_abs_delta)
                .collect(),
            min_acceleration: min_acc,
            min_safety_margin: min_margin,
            convergence_s,
            final_max_error: if n > 0 { self.errors_at(n - 1) } else { 0.0 },
        })
    }

    /// Safety, comfort and convergence audits.
    pub fn checks(&self) -> Vec<Check> {
        let a_min = self.scenario.params().a_min();
        let margin = self
            .summary
            .min_safety_margin
            .map_or(f64::INFINITY, |m| m.value);
        vec![
            Check {
                name: "safety".into(),
                passed: margin >= -SAFETY_AUDIT_TOLERANCE,
                value: margin,
                threshold: -SAFETY_AUDIT_TOLERANCE,
            },
            Check {
                name: "acceleration".into(),
                passed: self.summary.min_acceleration.value >= -a_min - ACCELERATION_AUDIT_SLACK,
                value: self.summary.min_acceleration.value,
                threshold: -a_min - ACCELERATION_AUDIT_SLACK,
            },
            Check {
                name: "convergence".into(),
                passed: self.summary.convergence_s.is_some(),
                value: self.summary.final_max_error,
                threshold: CONVERGENCE_THRESHOLD,
            },
        ]
    }

    pub fn downstream(&self) -> DownstreamSnapshot {
        let k = self.s.len() - 1;
        DownstreamSnapshot {
            s: self.s[k],
            times: self.vehicles.iter().map(|v| v.t[k]).collect(),
            velocities: self.vehicles.iter().map(|v| v.v[k]).collect(),
            max_abs_error: self.errors_at(k),
        }
    }

    /// Writes one row per (vehicle, recorded grid point), vehicle-major.
    /// Every `stride`-th grid point is written, and always the last one.
    pub fn write_csv<W: Write>(&self, writer: W, stride: usize) -> Result<()> {
        let stride = stride.max(1);
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(CSV_HEADER)?;
        let n = self.s.len();
        let opt = |x: Option<f64>| x.map(format9).unwrap_or_default();
        for veh in &self.vehicles {
            let i = veh.index;
            for k in (0..n).filter(|k| k % stride == 0 || *k == n - 1) {
                let delta = veh.delta.as_ref().map(|d| d[k]);
                let slope = veh.delta_slope.as_ref().map(|d| d[k]);
                w.write_record([
                    format9(self.s[k]),
                    i.to_string(),
                    veh.parity.as_str().to_string(),
                    format9(veh.t[k]),
                    format9(veh.v[k]),
                    format9(veh.u[k]),
                    format9(veh.e[k]),
                    opt(delta),
                    opt(slope),
                    opt(self.realized_gap(i, k)),
                    opt(self.desired_gap(i, k)),
                    opt(self.safety_margin(i, k)?),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Passage state of every vehicle at the last grid location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DownstreamSnapshot {
    pub s: f64,
    pub times: Vec<f64>,
    pub velocities: Vec<f64>,
    pub max_abs_error: f64,
}

/// One parsed row of a trace CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub s: f64,
    pub i: usize,
    pub parity: Parity,
    pub t: f64,
    pub v: f64,
    pub u: f64,
    pub e: f64,
    pub delta: Option<f64>,
    pub delta_slope: Option<f64>,
    pub tau_realized: Option<f64>,
    pub tau_desired: Option<f64>,
    pub safety_margin: Option<f64>,
}

pub fn read_trace_csv<R: Read>(reader: R) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Input(format!(
            "unexpected trace header: {}",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let rows = r
        .deserialize()
        .collect::<std::result::Result<Vec<TraceRow>, _>>()?;
    if rows.is_empty() {
        return Err(Error::Input("trace has no rows".into()));
    }
    Ok(rows)
}

/// Extracts the downstream passage state from parsed rows.
pub fn downstream_from_rows(rows: &[TraceRow]) -> Result<DownstreamSnapshot> {
    let s_end = rows.iter().map(|r| r.s).fold(f64::NEG_INFINITY, f64::max);
    let mut last: Vec<&TraceRow> = rows.iter().filter(|r| r.s == s_end).collect();
    last.sort_by_key(|r| r.i);
    if last.iter().enumerate().any(|(k, r)| r.i != k) {
        return Err(Error::Input(format!(
            "trace rows at s = {s_end} do not cover vehicles 0..n exactly once"
        )));
    }
    let max_abs_error = last.iter().fold(0.0f64, |m, r| {
        m.max(r.e.abs()).max(r.delta.map_or(0.0, f64::abs))
    });
    Ok(DownstreamSnapshot {
        s: s_end,
        times: last.iter().map(|r| r.t).collect(),
        velocities: last.iter().map(|r| r.v).collect(),
        max_abs_error,
    })
}
