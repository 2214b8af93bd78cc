use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("time-gap {tau} s is below the minimum feasible time-gap {tau_min} s")]
    InfeasibleTimeGap { tau: f64, tau_min: f64 },

    #[error(
        "final odd time-gap {tau_odd_end} s is below the minimum feasible time-gap {tau_min} s"
    )]
    InfeasibleTarget { tau_odd_end: f64, tau_min: f64 },

    #[error("degenerate profile: tau0 = {tau0} s must exceed tau_odd_end = {tau_odd_end} s")]
    DegenerateProfile { tau0: f64, tau_odd_end: f64 },

    #[error("profile inconsistency at s = {s} m: 1 + v_odd*T' = {denominator} is not positive")]
    ProfileInconsistency { s: f64, denominator: f64 },

    #[error("grid error: {0}")]
    Grid(String),

    #[error("gamma optimization failed: {0}")]
    OptimizationFailure(String),

    #[error("vehicle {vehicle} stalled at s = {s} m (v = {v} m/s)")]
    Stall { vehicle: usize, s: f64, v: f64 },

    #[error("ordering violation at s = {s} m: vehicle {follower} passes at or before vehicle {leader} (gap {gap} s)")]
    Ordering {
        s: f64,
        leader: usize,
        follower: usize,
        gap: f64,
    },

    #[error("non-finite state for vehicle {vehicle} at s = {s} m")]
    Diverged { vehicle: usize, s: f64 },

    #[error("invariant violation: {0}")]
    Invariant(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable tag, used in CLI diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::InfeasibleTimeGap { .. } => "infeasible-time-gap",
            Error::InfeasibleTarget { .. } => "infeasible-target",
            Error::DegenerateProfile { .. } => "degenerate-profile",
            Error::ProfileInconsistency { .. } => "profile-inconsistency",
            Error::Grid(_) => "grid",
            Error::OptimizationFailure(_) => "optimization-failure",
            Error::Stall { .. } => "stall",
            Error::Ordering { .. } => "ordering-violation",
            Error::Diverged { .. } => "divergence",
            Error::Invariant(_) => "invariant-violation",
            Error::Parameter(_) => "parameter",
            Error::Input(_) => "input",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }

    pub fn is_design_infeasibility(&self) -> bool {
        matches!(
            self,
            Error::InfeasibleTimeGap { .. }
                | Error::InfeasibleTarget { .. }
                | Error::DegenerateProfile { .. }
                | Error::ProfileInconsistency { .. }
                | Error::OptimizationFailure(_)
        )
    }

    pub fn is_simulation_abort(&self) -> bool {
        matches!(
            self,
            Error::Stall { .. } | Error::Ordering { .. } | Error::Diverged { .. }
        )
    }
}
