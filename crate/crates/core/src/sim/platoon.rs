//! Whole-platoon integration over location.
//!
//! The state is `[t_0, v_0, t_1, v_1, ...]` with `dt_i/ds = 1/v_i` and
//! `dv_i/ds = u_i/v_i`. Every derivative evaluation computes the controls
//! front to back, so each follower sees its predecessor's velocity and
//! control at the same stage.

use crate::controller::{follower_control, lead_control, ErrorState, VehicleState, V_FLOOR};
use crate::error::{Error, Result};
use crate::profiles::{Parity, TimeGapSample};

use super::ode::Rk4;
use super::scenario::Scenario;
use super::trace::{PlatoonTrace, VehicleTrace};

#[derive(Debug, Clone, Copy)]
struct ProfileSample {
    v_des: f64,
    d_inv_vdes_ds: f64,
    even: TimeGapSample,
    odd: TimeGapSample,
}

impl ProfileSample {
    fn at(scenario: &Scenario, s: f64) -> Result<Self> {
        let p = &scenario.profile;
        Ok(Self {
            v_des: p.desired_velocity(s)?,
            d_inv_vdes_ds: p.inverse_desired_velocity_slope(s)?,
            even: p.time_gap_at(Parity::Even, s),
            odd: p.time_gap_at(Parity::Odd, s),
        })
    }

    fn gap(&self, i: usize) -> &TimeGapSample {
        match Parity::of(i) {
            Parity::Even => &self.even,
            Parity::Odd => &self.odd,
        }
    }
}

/// Controls and errors of every vehicle at one state.
#[derive(Debug, Clone)]
struct Evaluation {
    u: Vec<f64>,
    e: Vec<f64>,
    delta: Vec<f64>,
    delta_slope: Vec<f64>,
}

impl Evaluation {
    fn new(n: usize) -> Self {
        Self {
            u: vec![0.0; n],
            e: vec![0.0; n],
            delta: vec![0.0; n],
            delta_slope: vec![0.0; n],
        }
    }
}

fn evaluate(scenario: &Scenario, s: f64, y: &[f64], out: &mut Evaluation) -> Result<()> {
    let n = scenario.n_vehicles;
    for i in 0..n {
        let (t, v) = (y[2 * i], y[2 * i + 1]);
        if !(t.is_finite() && v.is_finite()) {
            return Err(Error::Diverged { vehicle: i, s });
        }
        if v <= V_FLOOR {
            return Err(Error::Stall { vehicle: i, s, v });
        }
    }
    let sample = ProfileSample::at(scenario, s)?;
    let gains = &scenario.gains;
    let clamp = |u: f64| match scenario.u_max {
        Some(m) => u.clamp(-m, m),
        None => u,
    };

    let v0 = y[1];
    out.e[0] = 1.0 / v0 - 1.0 / sample.v_des;
    out.u[0] = clamp(lead_control(v0, out.e[0], sample.d_inv_vdes_ds, gains)?);

    for i in 1..n {
        let state = VehicleState {
            t: y[2 * i],
            v: y[2 * i + 1],
        };
        let pred = VehicleState {
            t: y[2 * i - 2],
            v: y[2 * i - 1],
        };
        let gap = sample.gap(i);
        let err = ErrorState::follower(state, pred, sample.v_des, gap.tau, gap.dtau_ds)?;
        out.e[i] = err.e;
        out.delta[i] = err.delta;
        out.delta_slope[i] = err.delta_slope;
        out.u[i] = clamp(follower_control(
            state,
            pred.v,
            out.u[i - 1],
            &err,
            gap.d2tau_ds2,
            gains,
        )?);
    }
    Ok(())
}

fn check_ordering(y: &[f64], n: usize, s: f64) -> Result<()> {
    for i in 1..n {
        let gap = y[2 * i] - y[2 * i - 2];
        if !(gap > 0.0) {
            return Err(Error::Ordering {
                s,
                leader: i - 1,
                follower: i,
                gap,
            });
        }
    }
    Ok(())
}

/// Integrates the closed-loop platoon over the scenario grid with fixed-step
/// RK4 and records every vehicle's trace at each grid point.
pub fn simulate_platoon(scenario: &Scenario) -> Result<PlatoonTrace> {
    let n = scenario.n_vehicles;
    let grid = scenario.grid;
    let len = grid.len();
    let h = grid.step();

    let mut y = scenario.initial_state()?;
    check_ordering(&y, n, grid.s_start())?;

    let mut traces: Vec<VehicleTrace> = (0..n)
        .map(|i| VehicleTrace::with_capacity(i, len))
        .collect();
    let mut s_points = Vec::with_capacity(len);
    let mut eval = Evaluation::new(n);
    let mut stage = Evaluation::new(n);
    let mut rk = Rk4::new(2 * n);
    let mut rhs = |s: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        evaluate(scenario, s, y, &mut stage)?;
        for i in 0..n {
            let v = y[2 * i + 1];
            dy[2 * i] = 1.0 / v;
            dy[2 * i + 1] = stage.u[i] / v;
        }
        Ok(())
    };

    for k in 0..len {
        let s = grid.at(k);
        evaluate(scenario, s, &y, &mut eval)?;
        s_points.push(s);
        for (i, tr) in traces.iter_mut().enumerate() {
            tr.t.push(y[2 * i]);
            tr.v.push(y[2 * i + 1]);
            tr.u.push(eval.u[i]);
            tr.e.push(eval.e[i]);
            if let Some(d) = tr.delta.as_mut() {
                d.push(eval.delta[i]);
            }
            if let Some(d) = tr.delta_slope.as_mut() {
                d.push(eval.delta_slope[i]);
            }
        }
        if k + 1 < len {
            rk.step(s, &mut y, h, &mut rhs)?;
            check_ordering(&y, n, grid.at(k + 1))?;
        }
    }
    PlatoonTrace::new(s_points, traces, scenario.clone())
}
