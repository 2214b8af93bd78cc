//! Feedback-linearizing control laws in the location domain.
//!
//! With location `s` as the independent variable each vehicle obeys
//! `dt/ds = 1/v` and `dv/ds = u/v`. The lead law makes the velocity error
//! `e0 = 1/v0 - 1/v_des` decay as `de0/ds = -p e0`; the follower law makes the
//! time-gap error `delta = t_i - t_{i-1} - tau_i,des` obey
//! `delta'' = -p0 delta - p1 delta'`. The closed-form solutions of both linear
//! error systems live here as well, for use as oracles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Velocities at or below this are treated as a stall.
pub const V_FLOOR: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerGains {
    p: f64,
    p0: f64,
    p1: f64,
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self {
            p: 0.5,
            p0: 0.25,
            p1: 1.0,
        }
    }
}

impl ControllerGains {
    pub fn new(p: f64, p0: f64, p1: f64) -> Result<Self> {
        for (name, value) in [("p", p), ("p0", p0), ("p1", p1)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::Parameter(format!(
                    "gain {name} must be positive, got {value}"
                )));
            }
        }
        Ok(Self { p, p0, p1 })
    }

    /// Lead velocity-error gain (1/m).
    pub fn p(&self) -> f64 {
        self.p
    }

    /// Follower time-gap position gain (1/m^2).
    pub fn p0(&self) -> f64 {
        self.p0
    }

    /// Follower time-gap rate gain (1/m).
    pub fn p1(&self) -> f64 {
        self.p1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleState {
    /// Passage time at the current location.
    pub t: f64,
    pub v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorState {
    pub e: f64,
    pub delta: f64,
    pub delta_slope: f64,
}

impl ErrorState {
    /// Errors of a follower relative to its predecessor.
    pub fn follower(
        state: VehicleState,
        pred: VehicleState,
        v_des: f64,
        tau_des: f64,
        dtau_ds: f64,
    ) -> Result<Self> {
        Ok(Self {
            e: velocity_error(state.v, v_des)?,
            delta: time_gap_error(state.t, pred.t, tau_des),
            delta_slope: 1.0 / state.v - 1.0 / pred.v - dtau_ds,
        })
    }
}

pub fn velocity_error(v: f64, v_des: f64) -> Result<f64> {
    if !(v > 0.0) || !(v_des > 0.0) {
        return Err(Error::Domain(format!(
            "velocities must be positive, got v = {v}, v_des = {v_des}"
        )));
    }
    Ok(1.0 / v - 1.0 / v_des)
}

pub fn time_gap_error(t_i: f64, t_pred: f64, tau_des: f64) -> f64 {
    t_i - t_pred - tau_des
}

fn check_floor(v: f64, vehicle: usize) -> Result<()> {
    if v > V_FLOOR {
        Ok(())
    } else {
        Err(Error::Stall {
            vehicle,
            s: f64::NAN,
            v,
        })
    }
}

/// `u0 = v0^3 (p e0 - d(1/v_des)/ds)`.
pub fn lead_control(v0: f64, e0: f64, d_inv_vdes_ds: f64, gains: &ControllerGains) -> Result<f64> {
    check_floor(v0, 0)?;
    Ok(v0 * v0 * v0 * (gains.p * e0 - d_inv_vdes_ds))
}

/// `u_i = v_i^3 (p0 delta + p1 delta' + u_{i-1} / v_{i-1}^3 - tau''_i)`.
pub fn follower_control(
    state: VehicleState,
    pred_v: f64,
    pred_u: f64,
    err: &ErrorState,
    d2tau_ds2: f64,
    gains: &ControllerGains,
) -> Result<f64> {
    check_floor(state.v, 1)?;
    check_floor(pred_v, 0)?;
    let v3 = state.v * state.v * state.v;
    let pred_v3 = pred_v * pred_v * pred_v;
    Ok(v3 * (gains.p0 * err.delta + gains.p1 * err.delta_slope + pred_u / pred_v3 - d2tau_ds2))
}

/// Roots of `r^2 + p1 r + p0 = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CharacteristicRoots {
    /// `r1 < r2`
    Distinct(f64, f64),
    Repeated(f64),
    /// `re +- i im`, `im > 0`
    Complex {
        re: f64,
        im: f64,
    },
}

impl CharacteristicRoots {
    pub fn max_real_part(&self) -> f64 {
        match *self {
            CharacteristicRoots::Distinct(_, r2) => r2,
            CharacteristicRoots::Repeated(r) => r,
            CharacteristicRoots::Complex { re, .. } => re,
        }
    }
}

pub fn characteristic_roots(gains: &ControllerGains) -> CharacteristicRoots {
    let (p0, p1) = (gains.p0, gains.p1);
    let disc = p1 * p1 - 4.0 * p0;
    if disc.abs() < 1e-10 * (p1 * p1).max(1.0) {
        CharacteristicRoots::Repeated(-0.5 * p1)
    } else if disc > 0.0 {
        let sq = disc.sqrt();
        CharacteristicRoots::Distinct(0.5 * (-p1 - sq), 0.5 * (-p1 + sq))
    } else {
        CharacteristicRoots::Complex {
            re: -0.5 * p1,
            im: 0.5 * (-disc).sqrt(),
        }
    }
}

/// Closed-form solution of `delta'' = -p0 delta - p1 delta'` from initial
/// value and slope at `s = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaResponse {
    roots: CharacteristicRoots,
    delta0: f64,
    slope0: f64,
}

impl DeltaResponse {
    pub fn new(delta0: f64, slope0: f64, gains: &ControllerGains) -> Self {
        Self {
            roots: characteristic_roots(gains),
            delta0,
            slope0,
        }
    }

    pub fn roots(&self) -> CharacteristicRoots {
        self.roots
    }

    /// Coefficients `(A, B)` of `A e^{r1 s} + B e^{r2 s}` obtained by
    /// Cramer's rule. Only defined for distinct real roots.
    pub fn coefficients(&self) -> Option<(f64, f64)> {
        match self.roots {
            CharacteristicRoots::Distinct(r1, r2) => {
                let det = r2 - r1;
                Some((
                    (r2 * self.delta0 - self.slope0) / det,
                    (self.slope0 - r1 * self.delta0) / det,
                ))
            }
            _ => None,
        }
    }

    pub fn value(&self, s: f64) -> f64 {
        let (d0, d1) = (self.delta0, self.slope0);
        match self.roots {
            CharacteristicRoots::Distinct(r1, r2) => {
                let (a, b) = self.coefficients().unwrap_or_default();
                a * (r1 * s).exp() + b * (r2 * s).exp()
            }
            CharacteristicRoots::Repeated(r) => (d0 + (d1 - r * d0) * s) * (r * s).exp(),
            CharacteristicRoots::Complex { re, im } => {
                let c = d0;
                let d = (d1 - re * d0) / im;
                (re * s).exp() * (c * (im * s).cos() + d * (im * s).sin())
            }
        }
    }

    pub fn slope(&self, s: f64) -> f64 {
        let (d0, d1) = (self.delta0, self.slope0);
        match self.roots {
            CharacteristicRoots::Distinct(r1, r2) => {
                let (a, b) = self.coefficients().unwrap_or_default();
                a * r1 * (r1 * s).exp() + b * r2 * (r2 * s).exp()
            }
            CharacteristicRoots::Repeated(r) => {
                let k = d1 - r * d0;
                (r * (d0 + k * s) + k) * (r * s).exp()
            }
            CharacteristicRoots::Complex { re, im } => {
                let c = d0;
                let d = (d1 - re * d0) / im;
                let (sin, cos) = (im * s).sin_cos();
                (re * s).exp() * ((re * c + im * d) * cos + (re * d - im * c) * sin)
            }
        }
    }
}

/// Time-gap error at distance `s` past the point where `delta0`, `slope0`
/// were observed.
pub fn delta_solution(delta0: f64, slope0: f64, gains: &ControllerGains, s: f64) -> f64 {
    DeltaResponse::new(delta0, slope0, gains).value(s)
}

/// `e0(s) = e0(0) exp(-p s)`.
pub fn lead_error_solution(e0_initial: f64, p: f64, s: f64) -> f64 {
    e0_initial * (-p * s).exp()
}

/// Velocity error of follower `i` built up by induction along the chain:
/// `e_i = e_0 + r1 e^{r1 s} sum A_j + r2 e^{r2 s} sum B_j + sum tau_j'`.
///
/// The slices hold the entries for vehicles `1..=i`.
pub fn follower_error_induction(
    e0_at_s: f64,
    a_coeffs: &[f64],
    b_coeffs: &[f64],
    roots: (f64, f64),
    dtau_ds: &[f64],
    s: f64,
) -> Result<f64> {
    if a_coeffs.len() != b_coeffs.len() || a_coeffs.len() != dtau_ds.len() {
        return Err(Error::Input(format!(
            "coefficient lists differ in length: {}, {}, {}",
            a_coeffs.len(),
            b_coeffs.len(),
            dtau_ds.len()
        )));
    }
    let (r1, r2) = roots;
    let sum_a: f64 = a_coeffs.iter().sum();
    let sum_b: f64 = b_coeffs.iter().sum();
    let sum_slopes: f64 = dtau_ds.iter().sum();
    Ok(e0_at_s + r1 * (r1 * s).exp() * sum_a + r2 * (r2 * s).exp() * sum_b + sum_slopes)
}

/// `sum_{j=1..i} (-1)^j`, which is either 0 or -1.
pub fn alternating_sum(i: usize) -> f64 {
    if i % 2 == 0 {
        0.0
    } else {
        -1.0
    }
}
