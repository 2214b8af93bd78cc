use platoon::controller::{delta_solution, lead_error_solution, ControllerGains};
use platoon::profiles::{design_profile, Parity, ShapingProfile};
use platoon::safety::{velocity_for_time_gap, SafetyParams};
use platoon::sim::{
    downstream_from_rows, read_trace_csv, reconstruct_time_domain, simulate_platoon,
    InitialConditions, LocationGrid, PlatoonTrace, Scenario, CSV_HEADER,
};
use platoon::Error;

fn params() -> SafetyParams {
    SafetyParams::new(6.0, 4.0).unwrap()
}

fn shaped() -> ShapingProfile {
    design_profile(2.6, 1.74, 0.057, 0.0, params()).unwrap()
}

fn merge_run(n: usize) -> PlatoonTrace {
    simulate_platoon(&Scenario::new("merge", shaped(), n).unwrap()).unwrap()
}

#[test]
fn unshaped_platoon_stays_in_equilibrium() {
    let profile = ShapingProfile::constant(2.6, params()).unwrap();
    let mut sc = Scenario::new("flat", profile, 6).unwrap();
    sc.grid = LocationGrid::new(0.0, 200.0, 0.01).unwrap();
    let tr = simulate_platoon(&sc).unwrap();
    for veh in &tr.vehicles {
        // u carries a v^3 factor on top of round-off in the gap error
        assert!(veh
            .u
            .iter()
            .zip(&veh.v)
            .all(|(u, v)| (u / v.powi(3)).abs() < 1e-12));
        assert!(veh.e.iter().all(|e| e.abs() < 1e-12));
        if let Some(d) = &veh.delta {
            assert!(d.iter().all(|d| d.abs() < 1e-12));
        }
    }
    let v1 = velocity_for_time_gap(2.6, &params()).unwrap();
    assert!((tr.vehicles[5].v[tr.len() - 1] - v1).abs() < 1e-9);
}

#[test]
fn single_vehicle_at_constant_speed_reconstructs_affinely() {
    let profile = ShapingProfile::constant(2.6, params()).unwrap();
    let mut sc = Scenario::new("solo", profile, 1).unwrap();
    sc.grid = LocationGrid::new(0.0, 100.0, 0.05).unwrap();
    let tr = simulate_platoon(&sc).unwrap();
    let v = tr.vehicles[0].v[0];
    let times: Vec<f64> = (0..50).map(|k| k as f64 * 0.1).collect();
    let pos = reconstruct_time_domain(&tr, &times).unwrap();
    for (t, s) in times.iter().zip(&pos[0]) {
        assert!((s.unwrap() - v * t).abs() < 1e-9);
    }
    assert_eq!(reconstruct_time_domain(&tr, &[-1.0]).unwrap()[0][0], None);
}

#[test]
fn shaped_platoon_reaches_alternating_gaps() {
    let tr = merge_run(10);
    let k = tr.len() - 1;
    let v2 = velocity_for_time_gap(1.74, &params()).unwrap();
    for i in 1..10 {
        let expected = if i % 2 == 1 { 1.74 } else { 3.46 };
        assert!(
            (tr.realized_gap(i, k).unwrap() - expected).abs() < 1e-3,
            "vehicle {i}"
        );
    }
    for veh in &tr.vehicles {
        assert!((veh.v[k] - v2).abs() < 0.01);
    }
    assert!(tr.checks().iter().all(|c| c.passed), "{:?}", tr.checks());
    // odd vehicles carry exactly the profile slope as velocity error
    for i in (1..10).step_by(2) {
        for (k, &s) in tr.s.iter().enumerate() {
            let slope = tr.scenario.profile.variable_part(s).1;
            assert!((tr.vehicles[i].e[k] + slope).abs() < 1e-9);
        }
    }
}

#[test]
fn gap_error_follows_closed_form() {
    // moving vehicle 2 earlier leaves vehicle 3 half a second late
    let gains = ControllerGains::new(0.5, 2.0, 3.0).unwrap();
    let sc = Scenario::new("late", shaped(), 5)
        .unwrap()
        .with_gains(gains)
        .with_lead_error(0.005)
        .perturb(2, -0.5, 0.0);
    let tr = simulate_platoon(&sc).unwrap();
    let delta = tr.vehicles[3].delta.as_ref().unwrap();
    let slope0 = tr.vehicles[3].delta_slope.as_ref().unwrap()[0];
    assert!((delta[0] - 0.5).abs() < 1e-12);
    assert!(slope0.abs() < 1e-12);
    let s0 = tr.s[0];
    for (k, &s) in tr.s.iter().enumerate() {
        assert!((delta[k] - delta_solution(0.5, 0.0, &gains, s - s0)).abs() < 1e-6);
        let e0 = lead_error_solution(0.005, 0.5, s - s0);
        assert!((tr.vehicles[0].e[k] - e0).abs() < 1e-8);
    }
    // untouched followers stay on their gaps
    assert!(tr.vehicles[1]
        .delta
        .as_ref()
        .unwrap()
        .iter()
        .all(|d| d.abs() < 1e-9));
}

#[test]
fn trajectories_are_consistent_with_passage_times() {
    let tr = merge_run(4);
    let t_end = tr.vehicles[3].t[tr.len() - 1];
    let dt = 0.05;
    let times: Vec<f64> = (0..)
        .map(|k| k as f64 * dt)
        .take_while(|&t| t <= t_end)
        .collect();
    let pos = reconstruct_time_domain(&tr, &times).unwrap();

    // time at which a reconstructed curve crosses `s`
    let crossing = |curve: &[Option<f64>], s: f64| -> f64 {
        let k = curve
            .windows(2)
            .position(|w| matches!((w[0], w[1]), (Some(a), Some(b)) if a <= s && s < b))
            .unwrap();
        let (a, b) = (curve[k].unwrap(), curve[k + 1].unwrap());
        times[k] + dt * (s - a) / (b - a)
    };
    for &approx in &[-100.0, 0.0, 60.0, 150.0] {
        let k = tr.s.partition_point(|&s| s < approx);
        let target = tr.s[k];
        for i in 1..4 {
            let spacing = crossing(&pos[i], target) - crossing(&pos[i - 1], target);
            assert!((spacing - tr.realized_gap(i, k).unwrap()).abs() < 1e-3);
        }
    }

    // bumper-to-bumper distance inside a downstream sub-platoon
    let t = tr.vehicles[0].t[tr.len() - 1];
    let at = reconstruct_time_domain(&tr, &[t]).unwrap();
    let spacing = at[0][0].unwrap() - at[1][0].unwrap() - params().vehicle_length();
    assert!((spacing - 7.267).abs() < 0.01, "{spacing}");
}

#[test]
fn braking_below_the_floor_stalls() {
    // stiff gains against a follower 2.5 s too close: closing the gap asks
    // for more braking than the velocity floor allows
    let profile = ShapingProfile::constant(2.6, params()).unwrap();
    let gains = ControllerGains::new(0.5, 6.25, 5.0).unwrap();
    let mut sc = Scenario::new("stall", profile, 2)
        .unwrap()
        .with_gains(gains)
        .perturb(1, -2.5, 0.0);
    sc.grid = LocationGrid::new(0.0, 5.0, 0.002).unwrap();
    match simulate_platoon(&sc) {
        Err(Error::Stall { vehicle, s, v }) => {
            assert_eq!(vehicle, 1);
            assert!(s > 0.1 && s < 0.4, "{s}");
            assert!(v > 0.45 && v <= 0.5, "{v}");
        }
        other => panic!("expected a stall, got {other:?}"),
    }
}

#[test]
fn entry_below_the_floor_stalls_immediately() {
    let sc = Scenario::new("slow", shaped(), 3)
        .unwrap()
        .perturb(2, 0.0, -17.9);
    let err = simulate_platoon(&sc).unwrap_err();
    assert_eq!(err.kind(), "stall");
    assert!(err.is_simulation_abort());
}

#[test]
fn overtaking_at_entry_is_an_ordering_violation() {
    let mut sc = Scenario::new("swap", shaped(), 3).unwrap();
    sc.initial = InitialConditions::Explicit {
        offsets: vec![0.0, 2.0, 1.0],
        velocities: vec![18.0, 18.0, 18.0],
    };
    match simulate_platoon(&sc) {
        Err(Error::Ordering {
            leader,
            follower,
            gap,
            ..
        }) => {
            assert_eq!((leader, follower), (1, 2));
            assert!(gap < 0.0);
        }
        other => panic!("expected an ordering violation, got {other:?}"),
    }
}

#[test]
fn csv_round_trip_preserves_downstream_state() {
    let tr = merge_run(4);
    let mut buf = Vec::new();
    tr.write_csv(&mut buf, 100).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));

    let rows = read_trace_csv(text.as_bytes()).unwrap();
    let per_vehicle = (tr.len() - 1).div_ceil(100) + 1;
    assert_eq!(rows.len(), 4 * per_vehicle);
    assert!(rows[0].delta.is_none() && rows[0].tau_realized.is_none());
    assert_eq!(rows[per_vehicle].parity, Parity::Odd);

    let down = downstream_from_rows(&rows).unwrap();
    let exact = tr.downstream();
    assert_eq!(down.times.len(), 4);
    for (a, b) in down.times.iter().zip(&exact.times) {
        assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0));
    }
    for (a, b) in down.velocities.iter().zip(&exact.velocities) {
        assert!((a - b).abs() < 1e-7);
    }
    assert!(down.max_abs_error < 1e-3);
}

#[test]
fn csv_reader_rejects_foreign_headers() {
    let text = "s,i,parity,t,v\n0,0,even,0,1\n";
    assert!(read_trace_csv(text.as_bytes()).is_err());
}
