use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde_json::json;

use platoon::config::{Overrides, ScenarioConfig};
use platoon::numfmt::format9;
use platoon::safety::{SafetyParams, BOUNDARY_TOLERANCE};
use platoon::sim::{
    audit_merge_downstream, centered_insertions, downstream_from_rows, offset_insertions,
    read_trace_csv, simulate_platoon, Scenario,
};
use platoon::Error;

use crate::output::{self, ProfileDoc, RunManifest};
use crate::{
    AuditArgs, Common, Pattern, SafetyArgs, SafetyCurveArgs, SimulateArgs, SweepArgs, SweepParam,
};

const DEFAULT_VEHICLE_LENGTH: f64 = 6.0;
const DEFAULT_A_MIN: f64 = 4.0;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
    MergeInfeasible {
        min_margin: f64,
    },
    /// Some sweep runs failed; carries the worst of their exit codes.
    SweepFailed {
        failed: usize,
        total: usize,
        exit_code: u8,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::MergeInfeasible { .. } => 3,
            CliError::SweepFailed { exit_code, .. } => *exit_code,
            CliError::Core(e) if e.is_design_infeasibility() => 3,
            CliError::Core(e) if e.is_simulation_abort() => 4,
            CliError::Core(Error::Invariant(_)) => 4,
            CliError::Core(_) => 2,
        }
    }

    pub fn reason(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::MergeInfeasible { .. } => "merge-infeasible",
            CliError::SweepFailed { .. } => "sweep-failed",
            CliError::Core(e) => e.kind(),
        }
    }

    pub fn message(&self) -> String {
        match self {
            CliError::Usage(m) => m.clone(),
            CliError::MergeInfeasible { min_margin } => {
                format!("merge is infeasible: tightest gap margin is {min_margin} s")
            }
            CliError::SweepFailed { failed, total, .. } => {
                format!(
                    "{failed} of {total} sweep runs failed; see {}",
                    output::SWEEP_CSV
                )
            }
            CliError::Core(e) => e.to_string(),
        }
    }

    fn details(&self) -> serde_json::Value {
        match self {
            CliError::Core(Error::Stall { vehicle, s, v }) => {
                json!({ "vehicle": vehicle, "s": s, "v": v })
            }
            CliError::Core(Error::Ordering {
                s,
                leader,
                follower,
                gap,
            }) => json!({ "s": s, "leader": leader, "follower": follower, "gap": gap }),
            CliError::Core(Error::Diverged { vehicle, s }) => json!({ "vehicle": vehicle, "s": s }),
            CliError::Core(Error::InfeasibleTarget {
                tau_odd_end,
                tau_min,
            }) => {
                json!({ "tau_odd_end": tau_odd_end, "tau_min": tau_min })
            }
            CliError::Core(Error::InfeasibleTimeGap { tau, tau_min }) => {
                json!({ "tau": tau, "tau_min": tau_min })
            }
            CliError::MergeInfeasible { min_margin } => json!({ "min_margin": min_margin }),
            CliError::SweepFailed { failed, total, .. } => {
                json!({ "failed": failed, "total": total })
            }
            _ => serde_json::Value::Null,
        }
    }

    pub fn to_json(&self) -> String {
        let mut v = json!({
            "status": "error",
            "reason": self.reason(),
            "exit_code": self.exit_code(),
            "message": self.message(),
        });
        let details = self.details();
        if !details.is_null() {
            v["details"] = details;
        }
        v.to_string()
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn overrides(common: &Common) -> Overrides {
    Overrides {
        gamma: common.gamma,
        h: common.h,
    }
}

fn load_config(common: &Common) -> CliResult<ScenarioConfig> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| CliError::Usage("--config is required for this command".into()))?;
    Ok(ScenarioConfig::from_path(path)?)
}

/// Flags win over the config's safety section, which wins over l = 6 m,
/// a_min = 4 m/s^2.
fn safety_params(common: &Common, flags: &SafetyArgs) -> CliResult<SafetyParams> {
    let from_config = match &common.config {
        Some(_) => Some(load_config(common)?.safety),
        None => None,
    };
    let l = flags
        .vehicle_length
        .or(from_config.map(|s| s.vehicle_length))
        .unwrap_or(DEFAULT_VEHICLE_LENGTH);
    let a = flags
        .a_min
        .or(from_config.map(|s| s.a_min))
        .unwrap_or(DEFAULT_A_MIN);
    SafetyParams::new(l, a).map_err(|e| CliError::Usage(e.to_string()))
}

fn check_stride(common: &Common) -> CliResult<usize> {
    if common.stride == 0 {
        return Err(CliError::Usage("--stride must be at least 1".into()));
    }
    Ok(common.stride)
}

pub fn safety_curve(common: &Common, args: &SafetyCurveArgs) -> CliResult<()> {
    let params = safety_params(common, &args.safety)?;
    if args.samples < 2 {
        return Err(CliError::Usage(format!(
            "--samples must be at least 2, got {}",
            args.samples
        )));
    }
    if !(args.v_min > 0.0 && args.v_max.is_finite() && args.v_max >= args.v_min) {
        return Err(CliError::Usage(format!(
            "velocity range must satisfy 0 < v_min <= v_max < inf, got [{}, {}]",
            args.v_min, args.v_max
        )));
    }
    let dir = output::resolve_out_dir(common.out.as_deref());
    output::write_safety_curve(
        &dir.join(output::SAFETY_CURVE_CSV),
        &params,
        args.v_min,
        args.v_max,
        args.samples,
    )?;
    let mut manifest = RunManifest::new("safety-curve", common.seed);
    manifest.output("safety_curve", output::SAFETY_CURVE_CSV);
    let min = platoon::safety::min_time_gap_point(&params);
    manifest.summary = Some(json!({
        "vehicle_length": params.vehicle_length(),
        "a_min": params.a_min(),
        "v_star": min.velocity,
        "tau_min": min.time_gap,
    }));
    manifest.write(&dir)?;
    Ok(())
}

/// Profile JSON and CSV for a config, recorded in the manifest.
fn write_profile(
    cfg: &ScenarioConfig,
    ov: &Overrides,
    dir: &Path,
    stride: usize,
    manifest: &mut RunManifest,
) -> CliResult<Scenario> {
    let designed = cfg.design(ov)?;
    let scenario = cfg.scenario_with(designed, ov)?;
    let (lo, hi) = (scenario.grid.s_start(), scenario.grid.s_end());
    let doc = ProfileDoc::new(&designed, (lo, hi))?;
    output::write_json(&dir.join(output::PROFILE_JSON), &doc)?;
    let s: Vec<f64> = scenario
        .grid
        .points()
        .into_iter()
        .enumerate()
        .filter(|(k, _)| k % stride == 0 || *k == scenario.grid.len() - 1)
        .map(|(_, s)| s)
        .collect();
    output::write_profile_csv(&dir.join(output::PROFILE_CSV), &designed.profile, &s)?;
    manifest.output("profile", output::PROFILE_JSON);
    manifest.output("profile_samples", output::PROFILE_CSV);
    manifest.scenario = Some(cfg.name.clone());
    manifest.config = Some(cfg.clone());
    manifest.gamma = Some(designed.profile.gamma());
    manifest.gamma_optimized = Some(designed.gamma_optimized);
    Ok(scenario)
}

pub fn design(common: &Common) -> CliResult<()> {
    let stride = check_stride(common)?;
    let cfg = load_config(common)?;
    let dir = output::resolve_out_dir(common.out.as_deref());
    let mut manifest = RunManifest::new("design", common.seed);
    write_profile(&cfg, &overrides(common), &dir, stride, &mut manifest)?;
    manifest.write(&dir)?;
    Ok(())
}

/// Headline numbers of one simulation run.
#[derive(Debug, Clone, Default)]
struct RunOutcome {
    gamma: Option<f64>,
    min_safety_margin: Option<f64>,
    min_acceleration: Option<f64>,
    convergence_s: Option<f64>,
    final_max_error: Option<f64>,
    checks_passed: Option<bool>,
}

fn run_simulation(
    cfg: &ScenarioConfig,
    common: &Common,
    args: &SimulateArgs,
    dir: &Path,
) -> CliResult<RunOutcome> {
    let mut manifest = RunManifest::new("simulate", common.seed);
    manifest.scenario = Some(cfg.name.clone());
    manifest.config = Some(cfg.clone());
    match simulate_into(cfg, common, args, dir, &mut manifest) {
        Ok(outcome) => {
            manifest.write(dir)?;
            Ok(outcome)
        }
        Err(err) => {
            manifest.status = "failed";
            manifest.reason = Some(err.reason().to_string());
            manifest.message = Some(err.message());
            manifest.summary = Some(err.details()).filter(|d| !d.is_null());
            // best effort: the error itself is what gets reported
            let _ = manifest.write(dir);
            Err(err)
        }
    }
}

fn simulate_into(
    cfg: &ScenarioConfig,
    common: &Common,
    args: &SimulateArgs,
    dir: &Path,
    manifest: &mut RunManifest,
) -> CliResult<RunOutcome> {
    let stride = check_stride(common)?;
    if !(args.dt > 0.0 && args.dt.is_finite()) {
        return Err(CliError::Usage(format!(
            "--dt must be positive, got {}",
            args.dt
        )));
    }
    let ov = overrides(common);
    std::fs::create_dir_all(dir).map_err(Error::from)?;
    let scenario = write_profile(cfg, &ov, dir, stride, manifest)?;
    // wide enough to hold every operating point of the run
    let p = &scenario.profile;
    let v_top = p
        .desired_velocity(scenario.grid.s_start())?
        .max(p.desired_velocity(scenario.grid.s_end())?);
    output::write_safety_curve(
        &dir.join(output::SAFETY_CURVE_CSV),
        scenario.params(),
        2.0,
        (1.2 * v_top).max(30.0),
        100,
    )?;
    manifest.output("safety_curve", output::SAFETY_CURVE_CSV);

    let trace = simulate_platoon(&scenario)?;
    let mut w = output::create(&dir.join(output::TRACE_CSV))?;
    trace.write_csv(&mut w, stride)?;
    w.flush().map_err(Error::from)?;
    drop(w);
    manifest.output("trace", output::TRACE_CSV);
    output::write_trajectories(&dir.join(output::TRAJECTORIES_CSV), &trace, args.dt)?;
    manifest.output("trajectories", output::TRAJECTORIES_CSV);

    let checks = trace.checks();
    let down = trace.downstream();
    manifest.summary = Some(json!({
        "vehicles": trace.vehicles.len(),
        "grid_points": trace.len(),
        "s_start": trace.s[0],
        "s_end": down.s,
        "metrics": trace.summary,
        "downstream": down,
    }));
    let outcome = RunOutcome {
        gamma: Some(scenario.profile.gamma()),
        min_safety_margin: trace.summary.min_safety_margin.map(|m| m.value),
        min_acceleration: Some(trace.summary.min_acceleration.value),
        convergence_s: trace.summary.convergence_s,
        final_max_error: Some(trace.summary.final_max_error),
        checks_passed: Some(checks.iter().all(|c| c.passed)),
    };
    manifest.checks = checks;
    Ok(outcome)
}

pub fn simulate(common: &Common, args: &SimulateArgs) -> CliResult<()> {
    let cfg = load_config(common)?;
    let dir = output::resolve_out_dir(common.out.as_deref());
    run_simulation(&cfg, common, args, &dir).map(|_| ())
}

/// Rounding of passage times printed with 9 significant digits: two
/// half-units in the last place of the largest time.
fn csv_time_quantum(times: &[f64]) -> f64 {
    let t = times.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    if t == 0.0 {
        return 0.0;
    }
    10f64.powi(t.log10().floor() as i32 - 8)
}

pub fn audit_merge(common: &Common, args: &AuditArgs) -> CliResult<()> {
    let params = safety_params(common, &args.safety)?;
    let file = File::open(&args.trace)
        .map_err(|e| CliError::Usage(format!("cannot open trace {}: {e}", args.trace.display())))?;
    let rows = read_trace_csv(BufReader::new(file))?;
    let down = downstream_from_rows(&rows)?;

    let sub = match (&args.times, args.pattern) {
        (Some(times), _) => times.clone(),
        (None, Some(Pattern::Centered)) => centered_insertions(&down.times),
        (None, Some(Pattern::Offset)) => {
            offset_insertions(&down.times, args.offset.unwrap_or_default())
        }
        (None, None) => Vec::new(),
    };
    let velocity = args
        .velocity
        .unwrap_or_else(|| down.velocities.iter().sum::<f64>() / down.velocities.len() as f64);
    let tolerance = BOUNDARY_TOLERANCE + csv_time_quantum(&down.times);
    let report = audit_merge_downstream(&down, &sub, velocity, &params, tolerance)?;

    let dir = output::resolve_out_dir(common.out.as_deref());
    output::write_json(&dir.join(output::MERGE_REPORT_JSON), &report)?;
    let mut manifest = RunManifest::new("audit-merge", common.seed);
    manifest.output("merge_report", output::MERGE_REPORT_JSON);
    manifest.summary = Some(json!({
        "trace": args.trace.display().to_string(),
        "substream_vehicles": sub.len(),
        "merged_velocity": report.merged_velocity,
        "safe_time_gap": report.safe_time_gap,
        "min_margin": report.min_margin,
        "feasible": report.feasible,
    }));
    if !report.feasible {
        manifest.status = "infeasible";
        manifest.reason = Some("merge-infeasible".into());
    }
    manifest.write(&dir)?;
    if report.feasible {
        Ok(())
    } else {
        Err(CliError::MergeInfeasible {
            min_margin: report.min_margin.unwrap_or(f64::NAN),
        })
    }
}

fn apply_sweep(
    cfg: &mut ScenarioConfig,
    common: &mut Common,
    param: SweepParam,
    value: f64,
) -> CliResult<()> {
    let count = || {
        if value >= 1.0 && value.fract() == 0.0 {
            Ok(value as usize)
        } else {
            Err(CliError::Usage(format!(
                "vehicle count must be a positive integer, got {value}"
            )))
        }
    };
    match param {
        SweepParam::Gamma => common.gamma = Some(value),
        SweepParam::Tau0 => cfg.profile.tau0 = value,
        SweepParam::TauOddEnd => cfg.profile.tau_odd_end = Some(value),
        SweepParam::H => common.h = Some(value),
        SweepParam::P => cfg.gains.p = value,
        SweepParam::P0 => cfg.gains.p0 = value,
        SweepParam::P1 => cfg.gains.p1 = value,
        SweepParam::Count => cfg.vehicles.count = count()?,
        SweepParam::LeadError => cfg.vehicles.lead_error = value,
    }
    Ok(())
}

fn sweep_param_name(param: SweepParam) -> &'static str {
    match param {
        SweepParam::Gamma => "gamma",
        SweepParam::Tau0 => "tau0",
        SweepParam::TauOddEnd => "tau_odd_end",
        SweepParam::H => "h",
        SweepParam::P => "p",
        SweepParam::P0 => "p0",
        SweepParam::P1 => "p1",
        SweepParam::Count => "count",
        SweepParam::LeadError => "lead_error",
    }
}

/// Runs every value in its own sub-directory, in parallel, and tabulates
/// the outcomes in input order.
pub fn sweep(common: &Common, args: &SweepArgs) -> CliResult<()> {
    let base = load_config(common)?;
    let dir = output::resolve_out_dir(common.out.as_deref());
    let name = sweep_param_name(args.param);
    let runs: Vec<(String, ScenarioConfig, Common)> = args
        .values
        .iter()
        .map(|&value| {
            let mut cfg = base.clone();
            let mut c = common.clone();
            apply_sweep(&mut cfg, &mut c, args.param, value)?;
            cfg.name = format!("{}-{name}={}", base.name, format9(value));
            Ok((format!("{name}={}", format9(value)), cfg, c))
        })
        .collect::<CliResult<_>>()?;

    let jobs = args
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .clamp(1, runs.len().max(1));
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<CliResult<RunOutcome>>>> =
        Mutex::new((0..runs.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some((sub, cfg, c)) = runs.get(k) else {
                    break;
                };
                let outcome = run_simulation(cfg, c, &args.sim, &dir.join(sub));
                results
                    .lock()
                    .expect("no worker panics while holding the lock")[k] = Some(outcome);
            });
        }
    });
    let results = results.into_inner().expect("workers have finished");

    let opt = |x: Option<f64>| x.map(format9).unwrap_or_default();
    let mut w = output::create(&dir.join(output::SWEEP_CSV))?;
    writeln!(
        w,
        "param,value,dir,status,exit_code,gamma,min_safety_margin,min_acceleration,convergence_s,final_max_error,checks_passed"
    )
    .map_err(Error::from)?;
    let mut worst_exit = 0u8;
    let mut failed = 0;
    let mut rows = Vec::new();
    for ((value, (sub, _, _)), result) in args.values.iter().zip(&runs).zip(results) {
        let result = result.expect("every run is executed");
        let (status, code, o) = match &result {
            Ok(o) => ("ok", 0, o.clone()),
            Err(e) => (e.reason(), e.exit_code(), RunOutcome::default()),
        };
        worst_exit = worst_exit.max(code);
        failed += usize::from(code != 0);
        writeln!(
            w,
            "{name},{},{sub},{status},{code},{},{},{},{},{},{}",
            format9(*value),
            opt(o.gamma),
            opt(o.min_safety_margin),
            opt(o.min_acceleration),
            opt(o.convergence_s),
            opt(o.final_max_error),
            o.checks_passed.map(|b| b.to_string()).unwrap_or_default()
        )
        .map_err(Error::from)?;
        rows.push(json!({ "value": value, "dir": sub, "status": status, "exit_code": code }));
    }
    w.flush().map_err(Error::from)?;
    drop(w);

    let mut manifest = RunManifest::new("sweep", common.seed);
    manifest.scenario = Some(base.name.clone());
    manifest.config = Some(base);
    manifest.output("sweep", output::SWEEP_CSV);
    manifest.summary = Some(json!({ "param": name, "jobs": jobs, "runs": rows }));
    if worst_exit != 0 {
        manifest.status = "failed";
    }
    manifest.write(&dir)?;
    if worst_exit == 0 {
        Ok(())
    } else {
        Err(CliError::SweepFailed {
            failed,
            total: runs.len(),
            exit_code: worst_exit,
        })
    }
}
