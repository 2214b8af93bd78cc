//! Time-domain trajectories `s_i(t)` recovered from passage times `t_i(s)`.

use crate::error::{Error, Result};

use super::trace::PlatoonTrace;

/// Shape-preserving piecewise cubic Hermite interpolant (Fritsch-Carlson
/// slopes, three-point ends).
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n != y.len() || n < 2 {
            return Err(Error::Input(format!(
                "interpolation needs matching abscissae and ordinates (at least 2), got {} and {}",
                n,
                y.len()
            )));
        }
        if let Some(k) = x.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::Invariant(format!(
                "abscissae not strictly increasing at index {k}"
            )));
        }
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let m: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = m[0];
            d[1] = m[0];
        } else {
            for k in 1..n - 1 {
                if m[k - 1] * m[k] > 0.0 {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    d[k] = (w1 + w2) / (w1 / m[k - 1] + w2 / m[k]);
                }
            }
            d[0] = end_slope(h[0], h[1], m[0], m[1]);
            d[n - 1] = end_slope(h[n - 2], h[n - 3], m[n - 2], m[n - 3]);
        }
        Ok(Self { x, y, d })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    /// `None` outside the sampled range.
    pub fn eval(&self, xq: f64) -> Option<f64> {
        let (lo, hi) = self.domain();
        if !(xq >= lo && xq <= hi) {
            return None;
        }
        let k = self
            .x
            .partition_point(|&x| x <= xq)
            .clamp(1, self.x.len() - 1)
            - 1;
        let h = self.x[k + 1] - self.x[k];
        let t = (xq - self.x[k]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        Some(h00 * self.y[k] + h10 * h * self.d[k] + h01 * self.y[k + 1] + h11 * h * self.d[k + 1])
    }
}

fn end_slope(h0: f64, h1: f64, m0: f64, m1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if d.signum() != m0.signum() {
        0.0
    } else if m0.signum() != m1.signum() && d.abs() > 3.0 * m0.abs() {
        3.0 * m0
    } else {
        d
    }
}

/// Positions `s_i(t)` of every vehicle at each time of `t_grid`; `None`
/// where the vehicle is outside the simulated stretch of road.
pub fn reconstruct_time_domain(
    trace: &PlatoonTrace,
    t_grid: &[f64],
) -> Result<Vec<Vec<Option<f64>>>> {
    trace
        .vehicles
        .iter()
        .map(|veh| {
            let interp =
                MonotoneCubic::new(veh.t.clone(), trace.s.clone()).map_err(|e| match e {
                    Error::Invariant(msg) => Error::Invariant(format!(
                        "passage times of vehicle {} are not increasing: {msg}",
                        veh.index
                    )),
                    other => other,
                })?;
            Ok(t_grid.iter().map(|&t| interp.eval(t)).collect())
        })
        .collect()
}
