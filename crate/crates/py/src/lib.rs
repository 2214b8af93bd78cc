//! Python bindings: safety region, profile design, controller oracles,
//! platoon simulation and merge audits.

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyIndexError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use platoon::config::{Overrides, ScenarioConfig};
use platoon::controller::{self, CharacteristicRoots};
use platoon::profiles::{self, Parity};
use platoon::safety;
use platoon::sim::{self, MergeReport};

create_exception!(
    platoon_shaping,
    PlatoonError,
    PyException,
    "Base class of all errors."
);
create_exception!(
    platoon_shaping,
    InputError,
    PlatoonError,
    "Invalid input or parameters."
);
create_exception!(
    platoon_shaping,
    DesignInfeasible,
    PlatoonError,
    "The design targets cannot be met."
);
create_exception!(
    platoon_shaping,
    SimulationAbort,
    PlatoonError,
    "The simulation stalled, diverged or lost ordering."
);

fn to_py(e: platoon::Error) -> PyErr {
    let msg = format!("{} ({})", e, e.kind());
    if e.is_design_infeasibility() {
        DesignInfeasible::new_err(msg)
    } else if e.is_simulation_abort() {
        SimulationAbort::new_err(msg)
    } else if matches!(e, platoon::Error::Invariant(_)) {
        PlatoonError::new_err(msg)
    } else {
        InputError::new_err(msg)
    }
}

trait IntoPy<T> {
    fn py_err(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for platoon::Result<T> {
    fn py_err(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

fn parity(value: &Bound<'_, PyAny>) -> PyResult<Parity> {
    if let Ok(i) = value.extract::<usize>() {
        return Ok(Parity::of(i));
    }
    match value.extract::<String>()?.as_str() {
        "even" => Ok(Parity::Even),
        "odd" => Ok(Parity::Odd),
        other => Err(PyValueError::new_err(format!(
            "parity must be 'even', 'odd' or a vehicle index, got {other:?}"
        ))),
    }
}

#[pyclass(name = "SafetyParams", module = "platoon_shaping", frozen)]
#[derive(Clone, Copy)]
struct PySafetyParams(safety::SafetyParams);

#[pymethods]
impl PySafetyParams {
    #[new]
    #[pyo3(signature = (vehicle_length = 6.0, a_min = 4.0))]
    fn new(vehicle_length: f64, a_min: f64) -> PyResult<Self> {
        safety::SafetyParams::new(vehicle_length, a_min)
            .py_err()
            .map(Self)
    }

    #[getter]
    fn vehicle_length(&self) -> f64 {
        self.0.vehicle_length()
    }

    #[getter]
    fn a_min(&self) -> f64 {
        self.0.a_min()
    }

    /// Smallest safe time-gap over all velocities.
    #[getter]
    fn tau_min(&self) -> f64 {
        self.0.tau_min()
    }

    /// Velocity at which `tau_min` is attained.
    #[getter]
    fn v_star(&self) -> f64 {
        self.0.v_star()
    }

    fn safe_time_gap(&self, v: f64) -> PyResult<f64> {
        safety::safe_time_gap(v, &self.0).py_err()
    }

    fn min_safe_distance(&self, v: f64) -> PyResult<f64> {
        safety::min_safe_distance(v, &self.0).py_err()
    }

    /// Upper-branch velocity whose safe time-gap equals `tau`.
    fn velocity_for_time_gap(&self, tau: f64) -> PyResult<f64> {
        safety::velocity_for_time_gap(tau, &self.0).py_err()
    }

    /// `(safe, margin)` for an operating point.
    fn is_safe(&self, v: f64, tau: f64) -> PyResult<(bool, f64)> {
        let point = safety::OperatingPoint::new(v, tau).py_err()?;
        let verdict = safety::is_safe(&point, &self.0).py_err()?;
        Ok((verdict.safe, verdict.margin))
    }

    fn __repr__(&self) -> String {
        format!(
            "SafetyParams(vehicle_length={}, a_min={})",
            self.0.vehicle_length(),
            self.0.a_min()
        )
    }
}

#[pyclass(name = "ControllerGains", module = "platoon_shaping", frozen)]
#[derive(Clone, Copy)]
struct PyControllerGains(controller::ControllerGains);

#[pymethods]
impl PyControllerGains {
    #[new]
    #[pyo3(signature = (p = 0.5, p0 = 0.25, p1 = 1.0))]
    fn new(p: f64, p0: f64, p1: f64) -> PyResult<Self> {
        controller::ControllerGains::new(p, p0, p1)
            .py_err()
            .map(Self)
    }

    #[getter]
    fn p(&self) -> f64 {
        self.0.p()
    }

    #[getter]
    fn p0(&self) -> f64 {
        self.0.p0()
    }

    #[getter]
    fn p1(&self) -> f64 {
        self.0.p1()
    }

    /// Roots of `r^2 + p1 r + p0` as a pair of complex numbers.
    fn roots(&self) -> ((f64, f64), (f64, f64)) {
        match controller::characteristic_roots(&self.0) {
            CharacteristicRoots::Distinct(r1, r2) => ((r1, 0.0), (r2, 0.0)),
            CharacteristicRoots::Repeated(r) => ((r, 0.0), (r, 0.0)),
            CharacteristicRoots::Complex { re, im } => ((re, -im), (re, im)),
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "ControllerGains(p={}, p0={}, p1={})",
            self.0.p(),
            self.0.p0(),
            self.0.p1()
        )
    }
}

#[pyclass(name = "ShapingProfile", module = "platoon_shaping", frozen)]
#[derive(Clone, Copy)]
struct PyShapingProfile(profiles::ShapingProfile);

#[pymethods]
impl PyShapingProfile {
    /// Logistic profile taking odd gaps from `tau0` to `tau_odd_end`.
    #[staticmethod]
    #[pyo3(signature = (tau0, tau_odd_end, gamma, params, center_s = 0.0))]
    fn design(
        tau0: f64,
        tau_odd_end: f64,
        gamma: f64,
        params: &PySafetyParams,
        center_s: f64,
    ) -> PyResult<Self> {
        profiles::design_profile(tau0, tau_odd_end, gamma, center_s, params.0)
            .py_err()
            .map(Self)
    }

    /// No shaping: every gap stays at `tau0`.
    #[staticmethod]
    #[pyo3(signature = (tau0, params, center_s = 0.0))]
    fn constant(tau0: f64, params: &PySafetyParams, center_s: f64) -> PyResult<Self> {
        profiles::ShapingProfile::constant(tau0, params.0)
            .py_err()
            .map(|p| Self(p.with_center(center_s)))
    }

    #[getter]
    fn tau0(&self) -> f64 {
        self.0.tau0()
    }

    #[getter]
    fn tau_odd_end(&self) -> f64 {
        self.0.tau_odd_end()
    }

    #[getter]
    fn tau_even_end(&self) -> f64 {
        self.0.tau_even_end()
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.0.gamma()
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.0.beta()
    }

    #[getter]
    fn center_s(&self) -> f64 {
        self.0.center_s()
    }

    #[getter]
    fn params(&self) -> PySafetyParams {
        PySafetyParams(*self.0.params())
    }

    #[getter]
    fn is_constant(&self) -> bool {
        self.0.is_constant()
    }

    /// `(lo, hi)` with the profile flat outside to `tanh(half_width)`.
    #[pyo3(signature = (half_width = 10.0))]
    fn window(&self, half_width: f64) -> (f64, f64) {
        self.0.window(half_width)
    }

    /// `(tau, dtau/ds, d2tau/ds2)` for a parity ('even'/'odd') or vehicle index.
    fn time_gap(&self, parity: &Bound<'_, PyAny>, s: f64) -> PyResult<(f64, f64, f64)> {
        let g = self.0.time_gap_at(self::parity(parity)?, s);
        Ok((g.tau, g.dtau_ds, g.d2tau_ds2))
    }

    fn odd_velocity(&self, s: f64) -> PyResult<f64> {
        self.0.odd_velocity(s).py_err()
    }

    fn desired_velocity(&self, s: f64) -> PyResult<f64> {
        self.0.desired_velocity(s).py_err()
    }

    /// Ideal-flow `(a_odd, a_even)` at `s`.
    fn accelerations(&self, s: f64) -> PyResult<(f64, f64)> {
        self.0.analytic_accelerations(s).py_err()
    }

    fn __repr__(&self) -> String {
        format!(
            "ShapingProfile(tau0={}, tau_odd_end={}, gamma={}, center_s={})",
            self.0.tau0(),
            self.0.tau_odd_end(),
            self.0.gamma(),
            self.0.center_s()
        )
    }
}

/// Per-vehicle traces over a shared location grid.
#[pyclass(name = "PlatoonTrace", module = "platoon_shaping", frozen)]
struct PyPlatoonTrace(sim::PlatoonTrace);

impl PyPlatoonTrace {
    fn vehicle(&self, i: usize) -> PyResult<&sim::VehicleTrace> {
        self.0.vehicles.get(i).ok_or_else(|| {
            PyIndexError::new_err(format!(
                "no vehicle {i} in a platoon of {}",
                self.0.vehicles.len()
            ))
        })
    }
}

#[pymethods]
impl PyPlatoonTrace {
    #[getter]
    fn s(&self) -> Vec<f64> {
        self.0.s.clone()
    }

    #[getter]
    fn n_vehicles(&self) -> usize {
        self.0.vehicles.len()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn t(&self, i: usize) -> PyResult<Vec<f64>> {
        Ok(self.vehicle(i)?.t.clone())
    }

    fn v(&self, i: usize) -> PyResult<Vec<f64>> {
        Ok(self.vehicle(i)?.v.clone())
    }

    fn u(&self, i: usize) -> PyResult<Vec<f64>> {
        Ok(self.vehicle(i)?.u.clone())
    }

    fn e(&self, i: usize) -> PyResult<Vec<f64>> {
        Ok(self.vehicle(i)?.e.clone())
    }

    /// Time-gap error; `None` for the lead vehicle.
    fn delta(&self, i: usize) -> PyResult<Option<Vec<f64>>> {
        Ok(self.vehicle(i)?.delta.clone())
    }

    /// `t_i(s) - t_{i-1}(s)`; `None` for the lead vehicle.
    fn realized_gap(&self, i: usize) -> PyResult<Option<Vec<f64>>> {
        self.vehicle(i)?;
        Ok((i > 0).then(|| {
            (0..self.0.len())
                .filter_map(|k| self.0.realized_gap(i, k))
                .collect()
        }))
    }

    /// Headline metrics as a dict.
    fn summary<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let m = &self.0.summary;
        let d = PyDict::new_bound(py);
        d.set_item("sup_abs_e", m.sup_abs_e.clone())?;
        d.set_item("sup_abs_delta", m.sup_abs_delta.clone())?;
        d.set_item("min_acceleration", m.min_acceleration.value)?;
        d.set_item(
            "min_acceleration_at",
            (m.min_acceleration.vehicle, m.min_acceleration.s),
        )?;
        d.set_item("min_safety_margin", m.min_safety_margin.map(|x| x.value))?;
        d.set_item("convergence_s", m.convergence_s)?;
        d.set_item("final_max_error", m.final_max_error)?;
        Ok(d)
    }

    /// `[(name, passed, value, threshold)]` for the safety, acceleration
    /// and convergence audits.
    fn checks(&self) -> Vec<(String, bool, f64, f64)> {
        self.0
            .checks()
            .into_iter()
            .map(|c| (c.name, c.passed, c.value, c.threshold))
            .collect()
    }

    /// `(s, times, velocities)` at the last grid location.
    fn downstream(&self) -> (f64, Vec<f64>, Vec<f64>) {
        let d = self.0.downstream();
        (d.s, d.times, d.velocities)
    }

    /// Positions `s_i(t)` on `times`; `None` where a vehicle is off the road
    /// stretch.
    fn trajectories(&self, times: Vec<f64>) -> PyResult<Vec<Vec<Option<f64>>>> {
        sim::reconstruct_time_domain(&self.0, &times).py_err()
    }

    #[pyo3(signature = (path, stride = 1))]
    fn write_csv(&self, path: std::path::PathBuf, stride: usize) -> PyResult<()> {
        let file = std::fs::File::create(&path).map_err(|e| to_py(e.into()))?;
        self.0
            .write_csv(std::io::BufWriter::new(file), stride)
            .py_err()
    }

    fn __repr__(&self) -> String {
        format!(
            "PlatoonTrace(vehicles={}, points={})",
            self.0.vehicles.len(),
            self.0.len()
        )
    }
}

/// Largest gamma whose profile keeps decelerations within the bound
/// (`params.a_min` unless `decel_bound` is given).
#[pyfunction]
#[pyo3(signature = (tau0, tau_odd_end, params, tol = 1e-4, decel_bound = None))]
fn optimize_gamma(
    tau0: f64,
    tau_odd_end: f64,
    params: &PySafetyParams,
    tol: f64,
    decel_bound: Option<f64>,
) -> PyResult<f64> {
    let bound = decel_bound.unwrap_or(params.0.a_min());
    profiles::optimize_gamma_bounded(tau0, tau_odd_end, params.0, bound, tol).py_err()
}

/// Closed-form time-gap error of a follower.
#[pyfunction]
fn delta_solution(delta0: f64, slope0: f64, gains: &PyControllerGains, s: f64) -> f64 {
    controller::delta_solution(delta0, slope0, &gains.0, s)
}

/// Closed-form velocity error of the lead vehicle.
#[pyfunction]
fn lead_error_solution(e0: f64, p: f64, s: f64) -> f64 {
    controller::lead_error_solution(e0, p, s)
}

/// Simulates a JSON scenario document.
#[pyfunction]
#[pyo3(signature = (config_json, gamma = None, h = None))]
fn simulate(
    py: Python<'_>,
    config_json: &str,
    gamma: Option<f64>,
    h: Option<f64>,
) -> PyResult<PyPlatoonTrace> {
    let cfg = ScenarioConfig::from_json(config_json).py_err()?;
    let scenario = cfg.scenario(&Overrides { gamma, h }).py_err()?;
    py.allow_threads(|| sim::simulate_platoon(&scenario))
        .py_err()
        .map(PyPlatoonTrace)
}

/// Simulates `n_vehicles` behind `profile` on its default grid.
///
/// `perturbations` holds `(vehicle, dt0, dv0)` entry offsets.
#[pyfunction]
#[pyo3(signature = (profile, n_vehicles, gains = None, lead_error = 0.0, perturbations = Vec::new(), h = None))]
fn simulate_profile(
    py: Python<'_>,
    profile: &PyShapingProfile,
    n_vehicles: usize,
    gains: Option<&PyControllerGains>,
    lead_error: f64,
    perturbations: Vec<(usize, f64, f64)>,
    h: Option<f64>,
) -> PyResult<PyPlatoonTrace> {
    let mut scenario = sim::Scenario::new("python", profile.0, n_vehicles)
        .py_err()?
        .with_lead_error(lead_error);
    if let Some(g) = gains {
        scenario = scenario.with_gains(g.0);
    }
    if let Some(h) = h {
        scenario = scenario.with_step(h).py_err()?;
    }
    for (vehicle, dt0, dv0) in perturbations {
        scenario = scenario.perturb(vehicle, dt0, dv0);
    }
    scenario.validate().py_err()?;
    py.allow_threads(|| sim::simulate_platoon(&scenario))
        .py_err()
        .map(PyPlatoonTrace)
}

fn report_dict<'py>(py: Python<'py>, r: &MergeReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new_bound(py);
    d.set_item("merged_velocity", r.merged_velocity)?;
    d.set_item("safe_time_gap", r.safe_time_gap)?;
    d.set_item("feasible", r.feasible)?;
    d.set_item("min_margin", r.min_margin)?;
    d.set_item("worst_gap", r.worst_gap)?;
    let gaps: Vec<(String, usize, String, usize, f64, f64, bool)> = r
        .gaps
        .iter()
        .map(|g| {
            let name = |e: &sim::MergeEntry| match e.stream {
                sim::Stream::Main => "main".to_string(),
                sim::Stream::Sub => "sub".to_string(),
            };
            (
                name(&g.leader),
                g.leader.index,
                name(&g.follower),
                g.follower.index,
                g.gap,
                g.margin,
                g.safe,
            )
        })
        .collect();
    d.set_item("gaps", gaps)?;
    Ok(d)
}

/// Interleaves sorted passage times of both streams and checks every gap
/// against the safe gap at `velocity`.
#[pyfunction]
fn audit_merge<'py>(
    py: Python<'py>,
    main_times: Vec<f64>,
    sub_times: Vec<f64>,
    velocity: f64,
    params: &PySafetyParams,
) -> PyResult<Bound<'py, PyDict>> {
    let report = sim::audit_merge_times(&main_times, &sub_times, velocity, &params.0).py_err()?;
    report_dict(py, &report)
}

/// Midpoints of the gaps that follow each sub-platoon tail.
#[pyfunction]
fn centered_insertions(main_times: Vec<f64>) -> Vec<f64> {
    sim::centered_insertions(&main_times)
}

#[pymodule]
fn platoon_shaping(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add_class::<PySafetyParams>()?;
    m.add_class::<PyControllerGains>()?;
    m.add_class::<PyShapingProfile>()?;
    m.add_class::<PyPlatoonTrace>()?;
    m.add_function(wrap_pyfunction!(optimize_gamma, m)?)?;
    m.add_function(wrap_pyfunction!(delta_solution, m)?)?;
    m.add_function(wrap_pyfunction!(lead_error_solution, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_profile, m)?)?;
    m.add_function(wrap_pyfunction!(audit_merge, m)?)?;
    m.add_function(wrap_pyfunction!(centered_insertions, m)?)?;
    m.add("PlatoonError", py.get_type_bound::<PlatoonError>())?;
    m.add("InputError", py.get_type_bound::<InputError>())?;
    m.add("DesignInfeasible", py.get_type_bound::<DesignInfeasible>())?;
    m.add("SimulationAbort", py.get_type_bound::<SimulationAbort>())?;
    m.add("V_FLOOR", controller::V_FLOOR)?;
    Ok(())
}
