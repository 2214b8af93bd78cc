//! Safe operating region in the (velocity, time-gap) plane.
//!
//! A follower can always stop behind a predecessor that stops instantly when
//! its front-to-front distance covers its braking distance plus one vehicle
//! length. At constant velocity `v` that distance is `v * tau`, which gives
//! the boundary curve `tau(v) = v / (2 a_min) + l / v`. The curve is convex
//! with a single minimum; the safe region lies on and above it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance, in seconds, for comparisons against the boundary.
pub const BOUNDARY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafetyParams {
    vehicle_length: f64,
    a_min: f64,
}

impl SafetyParams {
    /// `vehicle_length` covers the physical length plus desired standstill
    /// spacing; `a_min` is the magnitude of the maximum deceleration.
    pub fn new(vehicle_length: f64, a_min: f64) -> Result<Self> {
        if !(vehicle_length > 0.0 && vehicle_length.is_finite()) {
            return Err(Error::Parameter(format!(
                "vehicle length must be positive, got {vehicle_length}"
            )));
        }
        if !(a_min > 0.0 && a_min.is_finite()) {
            return Err(Error::Parameter(format!(
                "deceleration magnitude a_min must be positive, got {a_min}"
            )));
        }
        Ok(Self {
            vehicle_length,
            a_min,
        })
    }

    pub fn vehicle_length(&self) -> f64 {
        self.vehicle_length
    }

    pub fn a_min(&self) -> f64 {
        self.a_min
    }

    /// Smallest time-gap on the boundary curve, `sqrt(2 l / a_min)`.
    pub fn tau_min(&self) -> f64 {
        (2.0 * self.vehicle_length / self.a_min).sqrt()
    }

    /// Velocity at which the boundary curve attains `tau_min`.
    pub fn v_star(&self) -> f64 {
        (2.0 * self.vehicle_length * self.a_min).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub velocity: f64,
    pub time_gap: f64,
}

impl OperatingPoint {
    pub fn new(velocity: f64, time_gap: f64) -> Result<Self> {
        if !(velocity > 0.0) || !(time_gap > 0.0) {
            return Err(Error::Domain(format!(
                "operating point needs positive velocity and time-gap, got ({velocity}, {time_gap})"
            )));
        }
        Ok(Self { velocity, time_gap })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafetyVerdict {
    pub safe: bool,
    /// `time_gap - safe_time_gap(velocity)`; positive means inside the region.
    pub margin: f64,
}

/// Braking distance `v^2 / (2 a_min)`.
pub fn min_safe_distance(v: f64, params: &SafetyParams) -> Result<f64> {
    if !(v >= 0.0) {
        return Err(Error::Domain(format!(
            "velocity must be non-negative, got {v}"
        )));
    }
    Ok(v * v / (2.0 * params.a_min))
}

/// Minimum safe time-gap at velocity `v`.
pub fn safe_time_gap(v: f64, params: &SafetyParams) -> Result<f64> {
    if !(v > 0.0) {
        return Err(Error::Domain(format!("velocity must be positive, got {v}")));
    }
    Ok(v / (2.0 * params.a_min) + params.vehicle_length / v)
}

/// Inverts the boundary curve on its high-speed branch.
///
/// Returns the larger root of `v^2 - 2 a_min tau v + 2 l a_min = 0`.
pub fn velocity_for_time_gap(tau: f64, params: &SafetyParams) -> Result<f64> {
    let tau_min = params.tau_min();
    let ta = tau * params.a_min;
    let disc = ta * ta - 2.0 * params.vehicle_length * params.a_min;
    if !(tau >= tau_min - BOUNDARY_TOLERANCE) || !tau.is_finite() {
        return Err(Error::InfeasibleTimeGap { tau, tau_min });
    }
    // rounding right at tau_min can leave a tiny negative discriminant
    Ok(ta + disc.max(0.0).sqrt())
}

pub fn min_time_gap_point(params: &SafetyParams) -> OperatingPoint {
    OperatingPoint {
        velocity: params.v_star(),
        time_gap: params.tau_min(),
    }
}

pub fn is_safe(point: &OperatingPoint, params: &SafetyParams) -> Result<SafetyVerdict> {
    let boundary = safe_time_gap(point.velocity, params)?;
    let margin = point.time_gap - boundary;
    Ok(SafetyVerdict {
        safe: margin >= -BOUNDARY_TOLERANCE,
        margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params() -> SafetyParams {
        SafetyParams::new(6.0, 4.0).unwrap()
    }

    #[test]
    fn rejects_nonpositive_params() {
        assert!(SafetyParams::new(0.0, 4.0).is_err());
        assert!(SafetyParams::new(6.0, -1.0).is_err());
        assert!(SafetyParams::new(f64::NAN, 4.0).is_err());
    }

    #[test]
    fn braking_distance() {
        let p = params();
        assert_eq!(min_safe_distance(0.0, &p).unwrap(), 0.0);
        assert!((min_safe_distance(10.0, &p).unwrap() - 12.5).abs() < 1e-12);
        assert!((min_safe_distance(20.0, &p).unwrap() - 50.0).abs() < 1e-12);
        assert!(matches!(min_safe_distance(-1.0, &p), Err(Error::Domain(_))));
    }

    #[test]
    fn boundary_time_gap() {
        let p = params();
        assert!((safe_time_gap(6.0, &p).unwrap() - 1.75).abs() < 1e-12);
        let v_star = 48f64.sqrt();
        assert!((safe_time_gap(v_star, &p).unwrap() - 3f64.sqrt()).abs() < 1e-12);
        assert!((safe_time_gap(18.156, &p).unwrap() - 2.6).abs() < 1e-3);
        assert!(safe_time_gap(0.0, &p).is_err());
        assert!(safe_time_gap(-3.0, &p).is_err());
    }

    #[test]
    fn inverse_boundary() {
        let p = params();
        assert!((velocity_for_time_gap(2.6, &p).unwrap() - 18.156).abs() < 1e-3);
        assert!((velocity_for_time_gap(1.74, &p).unwrap() - 7.625).abs() < 1e-3);
        assert!(matches!(
            velocity_for_time_gap(1.5, &p),
            Err(Error::InfeasibleTimeGap { .. })
        ));
        // exactly at the minimum the two roots coincide
        let v = velocity_for_time_gap(p.tau_min(), &p).unwrap();
        assert!((v - p.v_star()).abs() < 1e-6);
    }

    #[test]
    fn curve_minimum() {
        let pt = min_time_gap_point(&params());
        assert!((pt.velocity - 6.9282).abs() < 1e-4);
        assert!((pt.time_gap - 1.7321).abs() < 1e-4);

        let pt = min_time_gap_point(&SafetyParams::new(6.0, 1.0).unwrap());
        assert!((pt.velocity - 3.4641).abs() < 1e-4);
        assert!((pt.time_gap - 3.4641).abs() < 1e-4);

        let pt = min_time_gap_point(&SafetyParams::new(24.0, 4.0).unwrap());
        assert!((pt.velocity - 13.8564).abs() < 1e-4);
        assert!((pt.time_gap - 3.4641).abs() < 1e-4);
    }

    #[test]
    fn membership() {
        let p = params();
        let on_min = OperatingPoint::new(48f64.sqrt(), 3f64.sqrt()).unwrap();
        let v = is_safe(&on_min, &p).unwrap();
        assert!(v.safe);
        assert!(v.margin.abs() < 1e-12);

        let v = is_safe(&OperatingPoint::new(18.156, 2.6).unwrap(), &p).unwrap();
        assert!(v.safe);
        assert!(v.margin.abs() < 1e-3);

        let v = is_safe(&OperatingPoint::new(18.156, 2.0).unwrap(), &p).unwrap();
        assert!(!v.safe);
        assert!((v.margin + 0.6).abs() < 1e-3);
    }

    #[test]
    fn operating_point_requires_positive_values() {
        assert!(OperatingPoint::new(0.0, 1.0).is_err());
        assert!(OperatingPoint::new(1.0, -1.0).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_on_high_speed_branch(extra in 0.0f64..20.0, l in 0.5f64..30.0, a in 0.5f64..10.0) {
            let p = SafetyParams::new(l, a).unwrap();
            let tau = p.tau_min() + extra;
            let v = velocity_for_time_gap(tau, &p).unwrap();
            prop_assert!(v >= p.v_star() * (1.0 - 1e-9));
            let back = safe_time_gap(v, &p).unwrap();
            prop_assert!((back - tau).abs() <= 1e-9 * tau);
        }

        #[test]
        fn boundary_is_convex(v1 in 0.1f64..60.0, v2 in 0.1f64..60.0) {
            let p = params();
            let mid = safe_time_gap(0.5 * (v1 + v2), &p).unwrap();
            let avg = 0.5 * (safe_time_gap(v1, &p).unwrap() + safe_time_gap(v2, &p).unwrap());
            prop_assert!(mid <= avg + 1e-12);
        }

        #[test]
        fn boundary_never_below_minimum(v in 0.05f64..200.0) {
            let p = params();
            prop_assert!(safe_time_gap(v, &p).unwrap() >= p.tau_min() - 1e-12);
        }

        #[test]
        fn braking_distance_is_quadratic(v in 0.0f64..100.0) {
            let p = params();
            let d1 = min_safe_distance(v, &p).unwrap();
            let d2 = min_safe_distance(2.0 * v, &p).unwrap();
            prop_assert!((d2 - 4.0 * d1).abs() <= 1e-9 * (1.0 + d2));
            prop_assert!(min_safe_distance(v + 0.1, &p).unwrap() > d1);
        }
    }
}
