use serde::{Deserialize, Serialize};

use crate::controller::{ControllerGains, V_FLOOR};
use crate::error::{Error, Result};
use crate::profiles::{Parity, ShapingProfile};
use crate::safety::SafetyParams;

use super::grid::LocationGrid;

/// Default grid half-width in units of `1/gamma`.
pub const GRID_HALF_WIDTH: f64 = 10.0;

pub const DEFAULT_STEP: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialConditions {
    /// Every follower starts with zero time-gap error and zero error slope
    /// relative to its predecessor; the lead starts with velocity error
    /// `lead_error` (s/m).
    Ideal { lead_error: f64 },
    /// Entry times and velocities at `s_start`, one per vehicle.
    Explicit {
        offsets: Vec<f64>,
        velocities: Vec<f64>,
    },
}

impl Default for InitialConditions {
    fn default() -> Self {
        InitialConditions::Ideal { lead_error: 0.0 }
    }
}

/// Additive change to one vehicle's entry time and velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub vehicle: usize,
    pub dt0: f64,
    pub dv0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub profile: ShapingProfile,
    pub gamma_optimized: bool,
    pub gains: ControllerGains,
    pub grid: LocationGrid,
    pub n_vehicles: usize,
    pub initial: InitialConditions,
    pub perturbations: Vec<Perturbation>,
    /// Optional symmetric clamp on every control input (m/s^2).
    pub u_max: Option<f64>,
}

impl Scenario {
    /// Ideal entry, default gains and the default grid around the profile.
    pub fn new(
        name: impl Into<String>,
        profile: ShapingProfile,
        n_vehicles: usize,
    ) -> Result<Self> {
        let (lo, hi) = profile.window(GRID_HALF_WIDTH);
        let scenario = Self {
            name: name.into(),
            profile,
            gamma_optimized: false,
            gains: ControllerGains::default(),
            grid: LocationGrid::new(lo, hi, DEFAULT_STEP)?,
            n_vehicles,
            initial: InitialConditions::default(),
            perturbations: Vec::new(),
            u_max: None,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn params(&self) -> &SafetyParams {
        self.profile.params()
    }

    pub fn with_gains(mut self, gains: ControllerGains) -> Self {
        self.gains = gains;
        self
    }

    pub fn with_step(mut self, step: f64) -> Result<Self> {
        self.grid = self.grid.with_step(step)?;
        Ok(self)
    }

    pub fn with_lead_error(mut self, lead_error: f64) -> Self {
        self.initial = InitialConditions::Ideal { lead_error };
        self
    }

    pub fn perturb(mut self, vehicle: usize, dt0: f64, dv0: f64) -> Self {
        self.perturbations.push(Perturbation { vehicle, dt0, dv0 });
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_vehicles == 0 {
            return Err(Error::Input("a platoon needs at least one vehicle".into()));
        }
        if let InitialConditions::Explicit {
            offsets,
            velocities,
        } = &self.initial
        {
            if offsets.len() != self.n_vehicles || velocities.len() != self.n_vehicles {
                return Err(Error::Input(format!(
                    "explicit initial conditions need {} offsets and velocities, got {} and {}",
                    self.n_vehicles,
                    offsets.len(),
                    velocities.len()
                )));
            }
        }
        for p in &self.perturbations {
            if p.vehicle >= self.n_vehicles {
                return Err(Error::Input(format!(
                    "perturbation targets vehicle {} of a {}-vehicle platoon",
                    p.vehicle, self.n_vehicles
                )));
            }
            if !(p.dt0.is_finite() && p.dv0.is_finite()) {
                return Err(Error::Input("perturbations must be finite".into()));
            }
        }
        if let Some(u) = self.u_max {
            if !(u > 0.0) {
                return Err(Error::Parameter(format!("u_max must be positive, got {u}")));
            }
        }
        Ok(())
    }

    /// Entry state `[t_0, v_0, t_1, v_1, ...]` at `s_start`.
    pub fn initial_state(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let n = self.n_vehicles;
        let s0 = self.grid.s_start();
        let mut y = vec![0.0; 2 * n];
        match &self.initial {
            InitialConditions::Ideal { lead_error } => {
                let inv_v0 = 1.0 / self.profile.desired_velocity(s0)? + lead_error;
                if !(inv_v0 > 0.0) {
                    return Err(Error::Input(format!(
                        "lead error {lead_error} s/m leaves no positive entry velocity"
                    )));
                }
                y[1] = 1.0 / inv_v0;
                let mut inv_v = inv_v0;
                for i in 1..n {
                    let gap = self.profile.time_gap_at(Parity::of(i), s0);
                    y[2 * i] = y[2 * (i - 1)] + gap.tau;
                    inv_v += gap.dtau_ds;
                    y[2 * i + 1] = 1.0 / inv_v;
                }
            }
            InitialConditions::Explicit {
                offsets,
                velocities,
            } => {
                for i in 0..n {
                    y[2 * i] = offsets[i];
                    y[2 * i + 1] = velocities[i];
                }
            }
        }
        for p in &self.perturbations {
            y[2 * p.vehicle] += p.dt0;
            y[2 * p.vehicle + 1] += p.dv0;
        }
        for i in 0..n {
            let v = y[2 * i + 1];
            if !(v > V_FLOOR) {
                return Err(Error::Stall {
                    vehicle: i,
                    s: s0,
                    v,
                });
            }
        }
        Ok(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::design_profile;
    use crate::safety::velocity_for_time_gap;

    fn scenario(n: usize) -> Scenario {
        let params = SafetyParams::new(6.0, 4.0).unwrap();
        let profile = design_profile(2.6, 1.74, 0.057, 0.0, params).unwrap();
        Scenario::new("s5", profile, n).unwrap()
    }

    #[test]
    fn default_grid_spans_ten_widths() {
        let s = scenario(3);
        assert!((s.grid.s_start() + 10.0 / 0.057).abs() < 1e-9);
        assert!((s.grid.s_end() - 10.0 / 0.057).abs() < 1e-9);
        assert_eq!(s.grid.step(), 0.01);
    }

    #[test]
    fn ideal_entry_matches_uniform_upstream_platoon() {
        let s = scenario(6);
        let y = s.initial_state().unwrap();
        let params = SafetyParams::new(6.0, 4.0).unwrap();
        let v1 = velocity_for_time_gap(2.6, &params).unwrap();
        for i in 0..6 {
            assert!((y[2 * i] - 2.6 * i as f64).abs() < 1e-7);
            assert!((y[2 * i + 1] - v1).abs() < 1e-6);
        }
    }

    #[test]
    fn perturbations_and_validation() {
        let s = scenario(4).perturb(2, 0.5, -1.0);
        let base = scenario(4).initial_state().unwrap();
        let y = s.initial_state().unwrap();
        assert!((y[4] - base[4] - 0.5).abs() < 1e-12);
        assert!((y[5] - base[5] + 1.0).abs() < 1e-12);

        assert!(scenario(4).perturb(4, 0.1, 0.0).initial_state().is_err());
        assert!(matches!(
            scenario(2).perturb(1, 0.0, -18.0).initial_state(),
            Err(Error::Stall { vehicle: 1, .. })
        ));
        let mut bad = scenario(2);
        bad.initial = InitialConditions::Explicit {
            offsets: vec![0.0],
            velocities: vec![10.0, 10.0],
        };
        assert!(bad.validate().is_err());
        let mut none = scenario(1);
        none.n_vehicles = 0;
        assert!(none.validate().is_err());
    }
}
