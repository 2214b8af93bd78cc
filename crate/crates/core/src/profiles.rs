//! Desired time-gap and velocity profiles over roadway location.
//!
//! The variable part of the time-gap profile is the logistic step
//! `T(s) = alpha + beta * tanh(gamma * (s - center_s))`, increasing from 0
//! upstream to `2 alpha` downstream. Even-indexed vehicles (the lead
//! included) track `tau0 + T`, odd-indexed vehicles track `tau0 - T`.
//!
//! Odd vehicles ride the safety boundary, so their velocity is the
//! high-speed inverse of the boundary curve at `tau0 - T(s)`. The common
//! desired velocity (tracked by the lead and every even vehicle) is the one
//! that keeps every time-gap error constant under ideal tracking:
//! `1 / v_des = 1 / v_odd + T'`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::safety::{velocity_for_time_gap, SafetyParams};

/// Tolerance on the deceleration constraint used by the gamma search.
pub const CONSTRAINT_SLACK: f64 = 1e-6;

/// Lower and upper ends of the gamma bisection bracket, in 1/m.
pub const GAMMA_BRACKET: (f64, f64) = (1e-4, 10.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of(index: usize) -> Self {
        if index % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    /// `(-1)^i`
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
        }
    }
}

/// Desired time-gap and its first two derivatives at one location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGapSample {
    pub tau: f64,
    pub dtau_ds: f64,
    pub d2tau_ds2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapingProfile {
    tau0: f64,
    alpha: f64,
    beta: f64,
    gamma: f64,
    center_s: f64,
    params: SafetyParams,
}

/// Builds the logistic profile taking odd gaps from `tau0` down to
/// `tau_odd_end`.
pub fn design_profile(
    tau0: f64,
    tau_odd_end: f64,
    gamma: f64,
    center_s: f64,
    params: SafetyParams,
) -> Result<ShapingProfile> {
    let tau_min = params.tau_min();
    if !(tau_odd_end >= tau_min) {
        return Err(Error::InfeasibleTarget {
            tau_odd_end,
            tau_min,
        });
    }
    if !(tau0 > tau_odd_end) {
        return Err(Error::DegenerateProfile { tau0, tau_odd_end });
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Parameter(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    if !center_s.is_finite() {
        return Err(Error::Parameter("center_s must be finite".into()));
    }
    let half = 0.5 * (tau0 - tau_odd_end);
    Ok(ShapingProfile {
        tau0,
        alpha: half,
        beta: half,
        gamma,
        center_s,
        params,
    })
}

impl ShapingProfile {
    /// Profile with `T == 0`: every vehicle keeps `tau0` and the boundary
    /// velocity at `tau0` everywhere. Used as a no-shaping baseline.
    pub fn constant(tau0: f64, params: SafetyParams) -> Result<Self> {
        let tau_min = params.tau_min();
        if !(tau0 >= tau_min) {
            return Err(Error::InfeasibleTarget {
                tau_odd_end: tau0,
                tau_min,
            });
        }
        Ok(Self {
            tau0,
            alpha: 0.0,
            beta: 0.0,
            gamma: 0.0,
            center_s: 0.0,
            params,
        })
    }

    pub fn is_constant(&self) -> bool {
        self.beta == 0.0
    }

    pub fn tau0(&self) -> f64 {
        self.tau0
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn center_s(&self) -> f64 {
        self.center_s
    }

    pub fn params(&self) -> &SafetyParams {
        &self.params
    }

    pub fn tau_odd_end(&self) -> f64 {
        self.tau0 - self.alpha - self.beta
    }

    pub fn tau_even_end(&self) -> f64 {
        self.tau0 + self.alpha + self.beta
    }

    /// Largest |T'|, attained at the inflection point.
    pub fn max_slope(&self) -> f64 {
        self.beta * self.gamma
    }

    pub fn with_center(mut self, center_s: f64) -> Self {
        self.center_s = center_s;
        self
    }

    /// Location window outside of which the profile is flat to within
    /// `tanh` saturation at `|gamma (s - c)| = half_width_units`.
    pub fn window(&self, half_width_units: f64) -> (f64, f64) {
        if self.is_constant() {
            (self.center_s - 100.0, self.center_s + 100.0)
        } else {
            let w = half_width_units / self.gamma;
            (self.center_s - w, self.center_s + w)
        }
    }

    /// `T(s)` and its first two derivatives.
    pub fn variable_part(&self, s: f64) -> (f64, f64, f64) {
        if self.is_constant() {
            return (0.0, 0.0, 0.0);
        }
        let th = (self.gamma * (s - self.center_s)).tanh();
        let sech2 = 1.0 - th * th;
        let t = self.alpha + self.beta * th;
        let d1 = self.beta * self.gamma * sech2;
        let d2 = -2.0 * self.beta * self.gamma * self.gamma * sech2 * th;
        (t, d1, d2)
    }

    pub fn time_gap_at(&self, parity: Parity, s: f64) -> TimeGapSample {
        let (t, d1, d2) = self.variable_part(s);
        let sign = parity.sign();
        TimeGapSample {
            tau: self.tau0 + sign * t,
            dtau_ds: sign * d1,
            d2tau_ds2: sign * d2,
        }
    }

    /// Velocity that keeps odd vehicles on the safety boundary.
    pub fn odd_velocity(&self, s: f64) -> Result<f64> {
        let tau = self.time_gap_at(Parity::Odd, s).tau;
        velocity_for_time_gap(tau, &self.params)
    }

    /// Desired velocity for the lead and all even vehicles.
    pub fn desired_velocity(&self, s: f64) -> Result<f64> {
        let v_odd = self.odd_velocity(s)?;
        let (_, slope, _) = self.variable_part(s);
        even_velocity_from_odd(v_odd, slope).map_err(|e| match e {
            Error::ProfileInconsistency { denominator, .. } => {
                Error::ProfileInconsistency { s, denominator }
            }
            other => other,
        })
    }

    pub fn velocity(&self, parity: Parity, s: f64) -> Result<f64> {
        match parity {
            Parity::Odd => self.odd_velocity(s),
            Parity::Even => self.desired_velocity(s),
        }
    }

    /// Analytic `dv_odd/ds`.
    pub fn odd_velocity_slope(&self, s: f64) -> Result<f64> {
        let (t, d1, _) = self.variable_part(s);
        if d1 == 0.0 {
            return Ok(0.0);
        }
        let tau = self.tau0 - t;
        Ok(boundary_velocity_slope(tau, &self.params)? * -d1)
    }

    /// Analytic `d(1/v_des)/ds`, the feed-forward term of the lead law.
    pub fn inverse_desired_velocity_slope(&self, s: f64) -> Result<f64> {
        let v_odd = self.odd_velocity(s)?;
        let dv_odd = self.odd_velocity_slope(s)?;
        let (_, _, d2) = self.variable_part(s);
        Ok(-dv_odd / (v_odd * v_odd) + d2)
    }

    /// Analytic accelerations `v dv/ds` for (odd, even) vehicles under ideal
    /// tracking.
    pub fn analytic_accelerations(&self, s: f64) -> Result<(f64, f64)> {
        let v_odd = self.odd_velocity(s)?;
        let a_odd = v_odd * self.odd_velocity_slope(s)?;
        let v_des = self.desired_velocity(s)?;
        // dv/ds = -v^2 d(1/v)/ds
        let a_even = -v_des * v_des * v_des * self.inverse_desired_velocity_slope(s)?;
        Ok((a_odd, a_even))
    }

    /// Minimum sampled accelerations of (odd, even) vehicles on a uniform
    /// grid over `[lo, hi]`, using central differences of the analytic
    /// velocities (one-sided at the ends).
    pub fn sampled_min_accelerations(&self, lo: f64, hi: f64, step: f64) -> Result<(f64, f64)> {
        if !(step > 0.0) || !(hi > lo) {
            return Err(Error::Grid(format!(
                "bad sampling window [{lo}, {hi}] step {step}"
            )));
        }
        let n = ((hi - lo) / step).floor() as usize + 1;
        if n < 3 {
            return Err(Error::Grid(
                "sampling window needs at least 3 points".into(),
            ));
        }
        let at = |k: usize| -> Result<(f64, f64)> {
            let s = lo + k as f64 * step;
            Ok((self.odd_velocity(s)?, self.desired_velocity(s)?))
        };
        let mut prev = at(0)?;
        let mut cur = at(1)?;
        let one_sided = |a: (f64, f64), b: (f64, f64), v: (f64, f64)| {
            (v.0 * (b.0 - a.0) / step, v.1 * (b.1 - a.1) / step)
        };
        let first = one_sided(prev, cur, prev);
        let mut min_odd = first.0;
        let mut min_even = first.1;
        for k in 2..n {
            let next = at(k)?;
            let a_odd = cur.0 * (next.0 - prev.0) / (2.0 * step);
            let a_even = cur.1 * (next.1 - prev.1) / (2.0 * step);
            min_odd = min_odd.min(a_odd);
            min_even = min_even.min(a_even);
            prev = cur;
            cur = next;
        }
        let last = one_sided(prev, cur, cur);
        Ok((min_odd.min(last.0), min_even.min(last.1)))
    }
}

/// `v_odd / (1 + v_odd * dT/ds)`, the velocity that keeps the gap errors of
/// both parities stationary when odd vehicles travel at `v_odd`.
pub fn even_velocity_from_odd(v_odd: f64, variable_slope: f64) -> Result<f64> {
    let denominator = 1.0 + v_odd * variable_slope;
    if !(denominator > 0.0) {
        return Err(Error::ProfileInconsistency {
            s: f64::NAN,
            denominator,
        });
    }
    Ok(v_odd / denominator)
}

/// `dv/dtau` along the high-speed branch of the safety boundary.
fn boundary_velocity_slope(tau: f64, params: &SafetyParams) -> Result<f64> {
    let a = params.a_min();
    let ta = tau * a;
    let disc = ta * ta - 2.0 * params.vehicle_length() * a;
    if !(disc > 0.0) {
        return Err(Error::InfeasibleTimeGap {
            tau,
            tau_min: params.tau_min(),
        });
    }
    Ok(a * (1.0 + ta / disc.sqrt()))
}

/// Accelerations `v dv/ds` of the odd and even velocity profiles sampled on
/// a strictly increasing grid. Derivatives are central differences
/// (one-sided at the ends).
pub fn acceleration_profiles(
    profile: &ShapingProfile,
    s_grid: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    if s_grid.len() < 3 {
        return Err(Error::Grid(format!(
            "acceleration sampling needs at least 3 points, got {}",
            s_grid.len()
        )));
    }
    if s_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Grid("grid must be strictly increasing".into()));
    }
    let v_odd = s_grid
        .iter()
        .map(|&s| profile.odd_velocity(s))
        .collect::<Result<Vec<_>>>()?;
    let v_even = s_grid
        .iter()
        .map(|&s| profile.desired_velocity(s))
        .collect::<Result<Vec<_>>>()?;
    Ok((
        chain_rule_acceleration(s_grid, &v_odd),
        chain_rule_acceleration(s_grid, &v_even),
    ))
}

fn chain_rule_acceleration(s: &[f64], v: &[f64]) -> Vec<f64> {
    let n = s.len();
    (0..n)
        .map(|k| {
            let (lo, hi) = match k {
                0 => (0, 1),
                k if k == n - 1 => (n - 2, n - 1),
                k => (k - 1, k + 1),
            };
            v[k] * (v[hi] - v[lo]) / (s[hi] - s[lo])
        })
        .collect()
}

/// Sampling rule of the feasibility predicate: window `center +- 8/gamma`
/// at step `min(0.1 m, 0.01/gamma)`.
pub fn feasibility_sampling(gamma: f64) -> (f64, f64, f64) {
    let half = 8.0 / gamma;
    (-half, half, (0.1f64).min(0.01 / gamma))
}

/// Whether the profile with this `gamma` keeps both parities' accelerations
/// above `-decel_bound`.
pub fn gamma_is_feasible(
    tau0: f64,
    tau_odd_end: f64,
    params: SafetyParams,
    decel_bound: f64,
    gamma: f64,
) -> Result<bool> {
    let profile = design_profile(tau0, tau_odd_end, gamma, 0.0, params)?;
    let (lo, hi, step) = feasibility_sampling(gamma);
    let (a_odd, a_even) = profile.sampled_min_accelerations(lo, hi, step)?;
    Ok(a_odd.min(a_even) >= -decel_bound - CONSTRAINT_SLACK)
}

/// Largest `gamma` (to within `tol`) whose profile respects the deceleration
/// limit `params.a_min()`.
pub fn optimize_gamma(tau0: f64, tau_odd_end: f64, params: SafetyParams, tol: f64) -> Result<f64> {
    optimize_gamma_bounded(tau0, tau_odd_end, params, params.a_min(), tol)
}

/// As [`optimize_gamma`], with a deceleration bound that may differ from
/// the one defining the safety region.
pub fn optimize_gamma_bounded(
    tau0: f64,
    tau_odd_end: f64,
    params: SafetyParams,
    decel_bound: f64,
    tol: f64,
) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::Parameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if !(decel_bound > 0.0) {
        return Err(Error::Parameter(format!(
            "deceleration bound must be positive, got {decel_bound}"
        )));
    }
    let (mut lo, mut hi) = GAMMA_BRACKET;
    // validates the targets before any search
    design_profile(tau0, tau_odd_end, lo, 0.0, params)?;
    let feasible = |g: f64| gamma_is_feasible(tau0, tau_odd_end, params, decel_bound, g);
    if !feasible(lo)? {
        return Err(Error::OptimizationFailure(format!(
            "no gamma in ({lo}, {hi}] keeps deceleration within {decel_bound} m/s^2"
        )));
    }
    if feasible(hi)? {
        return Ok(hi);
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if feasible(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::safety::{is_safe, OperatingPoint};
    use proptest::prelude::*;

    fn params() -> SafetyParams {
        SafetyParams::new(6.0, 4.0).unwrap()
    }

    fn section5() -> ShapingProfile {
        design_profile(2.6, 1.74, 0.057, 0.0, params()).unwrap()
    }

    /// Independent quadratic-root evaluation of the boundary inverse.
    fn boundary_root(tau: f64) -> f64 {
        let (l, a) = (6.0, 4.0);
        let b = -2.0 * a * tau;
        let c = 2.0 * l * a;
        (-b + (b * b - 4.0 * c).sqrt()) / 2.0
    }

    #[test]
    fn design_splits_shaping_evenly() {
        let p = section5();
        assert!((p.alpha() - 0.43).abs() < 1e-12);
        assert!((p.beta() - 0.43).abs() < 1e-12);
        assert!((p.tau0() - p.alpha() - 2.17).abs() < 1e-12);
        assert!((p.tau_odd_end() - 1.74).abs() < 1e-12);
    }

    #[test]
    fn design_rejects_bad_targets() {
        assert!(matches!(
            design_profile(2.6, 2.6, 0.057, 0.0, params()),
            Err(Error::DegenerateProfile { .. })
        ));
        assert!(matches!(
            design_profile(2.0, 1.5, 0.1, 0.0, params()),
            Err(Error::InfeasibleTarget { .. })
        ));
        assert!(design_profile(2.6, 1.74, 0.0, 0.0, params()).is_err());
        assert!(design_profile(2.6, 1.74, -1.0, 0.0, params()).is_err());
    }

    #[test]
    fn time_gap_limits_and_center() {
        let p = section5();
        let up = p.time_gap_at(Parity::Odd, -1e4);
        assert!((up.tau - 2.6).abs() < 1e-12);
        assert!(up.dtau_ds.abs() < 1e-12);

        let mid = p.time_gap_at(Parity::Odd, 0.0);
        assert!((mid.tau - 2.17).abs() < 1e-12);
        assert!((mid.dtau_ds + 0.02451).abs() < 1e-12);
        assert!(mid.d2tau_ds2.abs() < 1e-15);

        let down = p.time_gap_at(Parity::Even, 1e4);
        assert!((down.tau - 3.46).abs() < 1e-12);
    }

    #[test]
    fn center_shift_translates_profile() {
        let p = section5();
        let q = p.with_center(250.0);
        for s in [-40.0, 0.0, 13.0, 90.0] {
            let a = p.time_gap_at(Parity::Odd, s);
            let b = q.time_gap_at(Parity::Odd, s + 250.0);
            assert!((a.tau - b.tau).abs() < 1e-12);
            assert!((a.dtau_ds - b.dtau_ds).abs() < 1e-12);
        }
    }

    #[test]
    fn odd_velocity_values() {
        let p = section5();
        assert!((p.odd_velocity(-1e4).unwrap() - 18.156).abs() < 1e-3);
        assert!((p.odd_velocity(1e4).unwrap() - 7.625).abs() < 1e-3);
        let mid = p.odd_velocity(0.0).unwrap();
        assert!((mid - boundary_root(2.17)).abs() < 1e-9);
        assert!((mid - 13.909).abs() < 1e-2);
    }

    #[test]
    fn desired_velocity_values() {
        let p = section5();
        for s in [-1e4, 1e4] {
            let d = p.desired_velocity(s).unwrap();
            assert!((d - p.odd_velocity(s).unwrap()).abs() < 1e-9);
        }
        let v = boundary_root(2.17);
        let expected = v / (1.0 + v * 0.43 * 0.057);
        let got = p.desired_velocity(0.0).unwrap();
        assert!((got - expected).abs() < 1e-9);
        assert!((got - 10.373).abs() < 1e-2);
    }

    #[test]
    fn inconsistent_slope_is_rejected() {
        // only reachable with a decreasing variable part
        assert!(matches!(
            even_velocity_from_odd(10.0, -0.2),
            Err(Error::ProfileInconsistency { .. })
        ));
        assert!(matches!(
            even_velocity_from_odd(10.0, -0.1),
            Err(Error::ProfileInconsistency { .. })
        ));
        assert!(even_velocity_from_odd(10.0, -0.09).is_ok());
    }

    #[test]
    fn constant_profile_has_zero_acceleration() {
        let p = ShapingProfile::constant(2.6, params()).unwrap();
        let grid: Vec<f64> = (0..50).map(|k| k as f64 * 2.0).collect();
        let (a_odd, a_even) = acceleration_profiles(&p, &grid).unwrap();
        assert!(a_odd.iter().chain(&a_even).all(|a| *a == 0.0));
    }

    #[test]
    fn acceleration_grid_errors() {
        let p = section5();
        assert!(matches!(
            acceleration_profiles(&p, &[0.0, 1.0]),
            Err(Error::Grid(_))
        ));
        assert!(matches!(
            acceleration_profiles(&p, &[0.0, 1.0, 1.0]),
            Err(Error::Grid(_))
        ));
    }

    fn min_accel(p: &ShapingProfile) -> (f64, f64) {
        let grid: Vec<f64> = (-3000..=3000).map(|k| k as f64 * 0.1).collect();
        let (a, b) = acceleration_profiles(p, &grid).unwrap();
        (
            a.iter().cloned().fold(f64::INFINITY, f64::min),
            b.iter().cloned().fold(f64::INFINITY, f64::min),
        )
    }

    #[test]
    fn deceleration_limits_at_reported_and_steep_gamma() {
        let (odd, even) = min_accel(&section5());
        assert!(odd >= -4.0 && even >= -4.0, "{odd} {even}");
        let steep = design_profile(2.6, 1.74, 0.2, 0.0, params()).unwrap();
        let (odd, even) = min_accel(&steep);
        assert!(odd.min(even) < -4.0);
    }

    #[test]
    fn sampled_minimum_matches_vector_route() {
        let p = section5();
        let (lo, hi, step) = (-300.0, 300.0, 0.1);
        let streamed = p.sampled_min_accelerations(lo, hi, step).unwrap();
        let vector = min_accel(&p);
        assert!((streamed.0 - vector.0).abs() < 1e-9);
        assert!((streamed.1 - vector.1).abs() < 1e-9);
    }

    #[test]
    fn analytic_accelerations_match_differences() {
        let p = section5();
        let h = 1e-3;
        for s in [-60.0, -12.0, 0.0, 7.5, 33.0] {
            let (a_odd, a_even) = p.analytic_accelerations(s).unwrap();
            let fd = |f: &dyn Fn(f64) -> f64| f(s) * (f(s + h) - f(s - h)) / (2.0 * h);
            let n_odd = fd(&|x| p.odd_velocity(x).unwrap());
            let n_even = fd(&|x| p.desired_velocity(x).unwrap());
            assert!((a_odd - n_odd).abs() < 1e-5, "{a_odd} {n_odd}");
            assert!((a_even - n_even).abs() < 1e-5, "{a_even} {n_even}");
        }
    }

    #[test]
    fn optimized_gamma_near_reported_value() {
        let g = optimize_gamma(2.6, 1.74, params(), 1e-4).unwrap();
        assert!((g - 0.057).abs() <= 0.005, "gamma = {g}");
        assert!(gamma_is_feasible(2.6, 1.74, params(), 4.0, g).unwrap());
        assert!(!gamma_is_feasible(2.6, 1.74, params(), 4.0, g + 2e-4).unwrap());
    }

    #[test]
    fn looser_bound_or_smaller_shaping_allows_steeper_profiles() {
        let base = optimize_gamma(2.6, 1.74, params(), 1e-4).unwrap();
        let loose = optimize_gamma_bounded(2.6, 1.74, params(), 400.0, 1e-4).unwrap();
        assert!(loose > 10.0 * base, "{loose} vs {base}");
        let small = optimize_gamma(2.6, 2.59, params(), 1e-4).unwrap();
        assert!(small > base);
    }

    #[test]
    fn optimizer_reports_failure_and_bad_inputs() {
        // a vanishing deceleration budget cannot be met by any gamma
        assert!(matches!(
            optimize_gamma_bounded(2.6, 1.74, params(), 1e-9, 1e-4),
            Err(Error::OptimizationFailure(_))
        ));
        assert!(optimize_gamma(2.6, 1.74, params(), 0.0).is_err());
        assert!(matches!(
            optimize_gamma(2.6, 1.5, params(), 1e-4),
            Err(Error::InfeasibleTarget { .. })
        ));
    }

    #[test]
    fn odd_vehicles_ride_boundary_and_even_vehicles_sit_inside() {
        let p = section5();
        let params = params();
        for k in -200..=200 {
            let s = k as f64;
            let odd = OperatingPoint::new(
                p.odd_velocity(s).unwrap(),
                p.time_gap_at(Parity::Odd, s).tau,
            )
            .unwrap();
            let m = is_safe(&odd, &params).unwrap().margin;
            assert!(m.abs() < 1e-9, "s={s} margin={m}");

            let even = OperatingPoint::new(
                p.desired_velocity(s).unwrap(),
                p.time_gap_at(Parity::Even, s).tau,
            )
            .unwrap();
            let m = is_safe(&even, &params).unwrap().margin;
            assert!(m > 0.0, "s={s} margin={m}");
        }
    }

    #[test]
    fn max_slope_at_inflection() {
        let p = section5();
        let peak = p.time_gap_at(Parity::Odd, 0.0).dtau_ds.abs();
        assert!((peak - p.max_slope()).abs() < 1e-15);
        for k in -500..=500 {
            let s = k as f64 * 0.37;
            assert!(p.time_gap_at(Parity::Odd, s).dtau_ds.abs() <= peak + 1e-15);
        }
        assert!(p.time_gap_at(Parity::Even, 1e3).dtau_ds.abs() < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn parities_sum_to_twice_tau0(s in -1e3f64..1e3) {
            let p = section5();
            let sum = p.time_gap_at(Parity::Even, s).tau + p.time_gap_at(Parity::Odd, s).tau;
            prop_assert!((sum - 5.2).abs() < 1e-12);
        }

        #[test]
        fn ideal_flow_keeps_gap_errors_stationary(s in -300.0f64..300.0) {
            let p = section5();
            let v_odd = p.odd_velocity(s).unwrap();
            let v_even = p.desired_velocity(s).unwrap();
            let odd = p.time_gap_at(Parity::Odd, s).dtau_ds;
            let even = p.time_gap_at(Parity::Even, s).dtau_ds;
            prop_assert!((1.0 / v_odd - 1.0 / v_even - odd).abs() < 1e-9);
            prop_assert!((1.0 / v_even - 1.0 / v_odd - even).abs() < 1e-9);
        }

        #[test]
        fn analytic_derivatives_match_central_differences(s in -200.0f64..200.0) {
            let p = section5();
            let h = 0.01;
            let tau = |x: f64| p.time_gap_at(Parity::Even, x).tau;
            let slope = |x: f64| p.time_gap_at(Parity::Even, x).dtau_ds;
            let here = p.time_gap_at(Parity::Even, s);
            prop_assert!(((tau(s + h) - tau(s - h)) / (2.0 * h) - here.dtau_ds).abs() < 1e-6);
            prop_assert!(((slope(s + h) - slope(s - h)) / (2.0 * h) - here.d2tau_ds2).abs() < 1e-6);
        }

        #[test]
        fn feasibility_is_monotone_in_gamma(g in 0.005f64..0.2, shrink in 0.05f64..0.95) {
            let params = params();
            if gamma_is_feasible(2.6, 1.74, params, 4.0, g).unwrap() {
                prop_assert!(gamma_is_feasible(2.6, 1.74, params, 4.0, g * shrink).unwrap());
            }
        }
    }
}
