use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid `s_k = s_start + k h` over `[s_start, s_end]`. The last
/// point is the largest grid point not beyond `s_end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocationGrid {
    s_start: f64,
    s_end: f64,
    step: f64,
}

impl LocationGrid {
    pub fn new(s_start: f64, s_end: f64, step: f64) -> Result<Self> {
        if !(s_start.is_finite() && s_end.is_finite()) || !(s_start < s_end) {
            return Err(Error::Grid(format!(
                "grid needs s_start < s_end, got [{s_start}, {s_end}]"
            )));
        }
        if !(step > 0.0) || step > s_end - s_start {
            return Err(Error::Grid(format!("bad grid step {step}")));
        }
        Ok(Self {
            s_start,
            s_end,
            step,
        })
    }

    pub fn s_start(&self) -> f64 {
        self.s_start
    }

    pub fn s_end(&self) -> f64 {
        self.s_end
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn with_step(&self, step: f64) -> Result<Self> {
        Self::new(self.s_start, self.s_end, step)
    }

    pub fn len(&self) -> usize {
        ((self.s_end - self.s_start) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn at(&self, k: usize) -> f64 {
        self.s_start + k as f64 * self.step
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.at(k)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_count_includes_both_ends_when_aligned() {
        let g = LocationGrid::new(0.0, 1.0, 0.01).unwrap();
        assert_eq!(g.len(), 101);
        assert!((g.at(100) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unaligned_end_is_truncated() {
        let g = LocationGrid::new(-1.0, 1.05, 0.1).unwrap();
        assert_eq!(g.len(), 21);
        assert!(g.at(20) <= 1.05);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(LocationGrid::new(1.0, 1.0, 0.1).is_err());
        assert!(LocationGrid::new(0.0, 1.0, 0.0).is_err());
        assert!(LocationGrid::new(0.0, 1.0, 2.0).is_err());
        assert!(LocationGrid::new(f64::NAN, 1.0, 0.1).is_err());
    }
}
