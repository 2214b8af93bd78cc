//! JSON scenario documents.
//!
//! ```json
//! {
//!   "name": "merge-shaping",
//!   "safety": { "vehicle_length": 6.0, "a_min": 4.0 },
//!   "profile": { "tau0": 2.6, "tau_odd_end": 1.74, "gamma": 0.057, "center_s": 0.0 },
//!   "gains": { "p": 0.5, "p0": 0.25, "p1": 1.0 },
//!   "grid": { "h": 0.01 },
//!   "vehicles": { "count": 10, "initial": "ideal" },
//!   "perturbations": [ { "vehicle": 3, "dt0": 0.5 } ]
//! }
//! ```
//!
//! Omitting `profile.gamma` selects the largest gamma that respects the
//! deceleration limit. Unknown keys are rejected everywhere.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::controller::ControllerGains;
use crate::error::{Error, Result};
use crate::profiles::{design_profile, optimize_gamma_bounded, ShapingProfile};
use crate::safety::SafetyParams;
use crate::sim::{
    InitialConditions, LocationGrid, Perturbation, Scenario, DEFAULT_STEP, GRID_HALF_WIDTH,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub safety: SafetySection,
    pub profile: ProfileSection,
    #[serde(default)]
    pub gains: GainsSection,
    #[serde(default)]
    pub grid: GridSection,
    pub vehicles: VehiclesSection,
    #[serde(default)]
    pub perturbations: Vec<PerturbationEntry>,
}

fn default_name() -> String {
    "scenario".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SafetySection {
    pub vehicle_length: f64,
    pub a_min: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSection {
    pub tau0: f64,
    #[serde(default)]
    pub tau_odd_end: Option<f64>,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub center_s: f64,
    /// No shaping: every vehicle keeps `tau0`.
    #[serde(default)]
    pub constant: bool,
    /// Deceleration bound for the gamma search, when it should differ from
    /// the safety-region `a_min`.
    #[serde(default)]
    pub a_min_override: Option<f64>,
    #[serde(default = "default_gamma_tol")]
    pub gamma_tol: f64,
}

fn default_gamma_tol() -> f64 {
    1e-4
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsSection {
    pub p: f64,
    pub p0: f64,
    pub p1: f64,
    #[serde(default)]
    pub u_max: Option<f64>,
}

impl Default for GainsSection {
    fn default() -> Self {
        let g = ControllerGains::default();
        Self {
            p: g.p(),
            p0: g.p0(),
            p1: g.p1(),
            u_max: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default)]
    pub s_start: Option<f64>,
    #[serde(default)]
    pub s_end: Option<f64>,
    #[serde(default = "default_step")]
    pub h: f64,
}

fn default_step() -> f64 {
    DEFAULT_STEP
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            s_start: None,
            s_end: None,
            h: DEFAULT_STEP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehiclesSection {
    pub count: usize,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default)]
    pub lead_error: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    #[default]
    Ideal,
    Explicit {
        offsets: Vec<f64>,
        velocities: Vec<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationEntry {
    pub vehicle: usize,
    #[serde(default)]
    pub dt0: f64,
    #[serde(default)]
    pub dv0: f64,
}

/// Command-line overrides applied on top of a config.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub gamma: Option<f64>,
    pub h: Option<f64>,
}

/// A designed profile and whether its gamma came from the optimizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignedProfile {
    pub profile: ShapingProfile,
    pub gamma_optimized: bool,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_json(&text)
    }

    pub fn safety_params(&self) -> Result<SafetyParams> {
        SafetyParams::new(self.safety.vehicle_length, self.safety.a_min)
    }

    pub fn design(&self, overrides: &Overrides) -> Result<DesignedProfile> {
        let params = self.safety_params()?;
        let pr = &self.profile;
        if pr.constant {
            if pr.tau_odd_end.is_some() || pr.gamma.is_some() {
                return Err(Error::Input(
                    "a constant profile takes neither tau_odd_end nor gamma".into(),
                ));
            }
            return Ok(DesignedProfile {
                profile: ShapingProfile::constant(pr.tau0, params)?.with_center(pr.center_s),
                gamma_optimized: false,
            });
        }
        let tau_odd_end = pr
            .tau_odd_end
            .ok_or_else(|| Error::Input("profile.tau_odd_end is required".into()))?;
        let (gamma, gamma_optimized) = match overrides.gamma.or(pr.gamma) {
            Some(g) => (g, false),
            None => {
                let bound = pr.a_min_override.unwrap_or(params.a_min());
                (
                    optimize_gamma_bounded(pr.tau0, tau_odd_end, params, bound, pr.gamma_tol)?,
                    true,
                )
            }
        };
        Ok(DesignedProfile {
            profile: design_profile(pr.tau0, tau_odd_end, gamma, pr.center_s, params)?,
            gamma_optimized,
        })
    }

    pub fn scenario(&self, overrides: &Overrides) -> Result<Scenario> {
        self.scenario_with(self.design(overrides)?, overrides)
    }

    /// Builds the scenario around an already designed profile.
    pub fn scenario_with(
        &self,
        designed: DesignedProfile,
        overrides: &Overrides,
    ) -> Result<Scenario> {
        let profile = designed.profile;
        let g = &self.gains;
        let gains = ControllerGains::new(g.p, g.p0, g.p1)?;
        let (lo, hi) = profile.window(GRID_HALF_WIDTH);
        let grid = LocationGrid::new(
            self.grid.s_start.unwrap_or(lo),
            self.grid.s_end.unwrap_or(hi),
            overrides.h.unwrap_or(self.grid.h),
        )?;
        let initial = match &self.vehicles.initial {
            InitialSpec::Ideal => InitialConditions::Ideal {
                lead_error: self.vehicles.lead_error,
            },
            InitialSpec::Explicit {
                offsets,
                velocities,
            } => {
                if self.vehicles.lead_error != 0.0 {
                    return Err(Error::Input(
                        "lead_error only applies to ideal initial conditions".into(),
                    ));
                }
                InitialConditions::Explicit {
                    offsets: offsets.clone(),
                    velocities: velocities.clone(),
                }
            }
        };
        let scenario = Scenario {
            name: self.name.clone(),
            profile,
            gamma_optimized: designed.gamma_optimized,
            gains,
            grid,
            n_vehicles: self.vehicles.count,
            initial,
            perturbations: self
                .perturbations
                .iter()
                .map(|p| Perturbation {
                    vehicle: p.vehicle,
                    dt0: p.dt0,
                    dv0: p.dv0,
                })
                .collect(),
            u_max: g.u_max,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}
