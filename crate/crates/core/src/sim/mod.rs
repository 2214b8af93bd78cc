//! Space-domain simulation of the closed-loop platoon, time-domain
//! reconstruction and merge auditing.

mod grid;
mod merge;
mod ode;
mod platoon;
mod reconstruct;
mod scenario;
mod trace;

pub use grid::LocationGrid;
pub use merge::{
    audit_merge, audit_merge_downstream, audit_merge_times, audit_merge_times_within,
    centered_insertions, offset_insertions, MergeEntry, MergeGap, MergeReport, Stream,
};
pub use ode::Rk4;
pub use platoon::simulate_platoon;
pub use reconstruct::{reconstruct_time_domain, MonotoneCubic};
pub use scenario::{InitialConditions, Perturbation, Scenario, DEFAULT_STEP, GRID_HALF_WIDTH};
pub use trace::{
    downstream_from_rows, read_trace_csv, Check, DownstreamSnapshot, Extremum, PlatoonTrace,
    TraceRow, TraceSummary, VehicleTrace, ACCELERATION_AUDIT_SLACK, CONVERGENCE_THRESHOLD,
    CSV_HEADER, SAFETY_AUDIT_TOLERANCE,
};
