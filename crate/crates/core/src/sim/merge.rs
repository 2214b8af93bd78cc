//! Merge feasibility: interleave a substream into the shaped mainstream at
//! the downstream end and check every resulting time-gap against the safe
//! gap at the merged velocity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::safety::{safe_time_gap, SafetyParams, BOUNDARY_TOLERANCE};

use super::trace::{DownstreamSnapshot, PlatoonTrace, CONVERGENCE_THRESHOLD};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stream {
    Main,
    Sub,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MergeEntry {
    pub stream: Stream,
    pub index: usize,
    pub time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MergeGap {
    pub leader: MergeEntry,
    pub follower: MergeEntry,
    pub gap: f64,
    pub margin: f64,
    pub safe: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeReport {
    pub merged_velocity: f64,
    pub safe_time_gap: f64,
    pub sequence: Vec<MergeEntry>,
    pub gaps: Vec<MergeGap>,
    /// `None` when fewer than two vehicles pass.
    pub min_margin: Option<f64>,
    /// Index into `gaps` of the tightest gap.
    pub worst_gap: Option<usize>,
    /// Margin below zero still accepted as safe.
    pub tolerance: f64,
    pub feasible: bool,
}

/// Merges sorted passage times of both streams at one location.
pub fn audit_merge_times(
    main_times: &[f64],
    sub_times: &[f64],
    merged_velocity: f64,
    params: &SafetyParams,
) -> Result<MergeReport> {
    audit_merge_times_within(
        main_times,
        sub_times,
        merged_velocity,
        params,
        BOUNDARY_TOLERANCE,
    )
}

/// As [`audit_merge_times`] with an explicit margin tolerance, for passage
/// times that carry rounding (e.g. read back from CSV).
pub fn audit_merge_times_within(
    main_times: &[f64],
    sub_times: &[f64],
    merged_velocity: f64,
    params: &SafetyParams,
    tolerance: f64,
) -> Result<MergeReport> {
    if !(tolerance >= 0.0) {
        return Err(Error::Parameter(format!(
            "tolerance must be non-negative, got {tolerance}"
        )));
    }
    if sub_times.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::Input("substream entry times must be sorted".into()));
    }
    if main_times.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::Input(
            "mainstream passage times must be sorted".into(),
        ));
    }
    if main_times.iter().chain(sub_times).any(|t| !t.is_finite()) {
        return Err(Error::Input("passage times must be finite".into()));
    }
    let safe = safe_time_gap(merged_velocity, params)?;

    let mut sequence = Vec::with_capacity(main_times.len() + sub_times.len());
    let (mut a, mut b) = (0, 0);
    while a < main_times.len() || b < sub_times.len() {
        // mainstream goes first on ties
        let take_main =
            b == sub_times.len() || (a < main_times.len() && main_times[a] <= sub_times[b]);
        if take_main {
            sequence.push(MergeEntry {
                stream: Stream::Main,
                index: a,
                time: main_times[a],
            });
            a += 1;
        } else {
            sequence.push(MergeEntry {
                stream: Stream::Sub,
                index: b,
                time: sub_times[b],
            });
            b += 1;
        }
    }

    let gaps: Vec<MergeGap> = sequence
        .windows(2)
        .map(|w| {
            let gap = w[1].time - w[0].time;
            let margin = gap - safe;
            MergeGap {
                leader: w[0],
                follower: w[1],
                gap,
                margin,
                safe: margin >= -tolerance,
            }
        })
        .collect();
    let worst_gap = gaps
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.margin.total_cmp(&y.1.margin))
        .map(|(k, _)| k);
    Ok(MergeReport {
        merged_velocity,
        safe_time_gap: safe,
        min_margin: worst_gap.map(|k| gaps[k].margin),
        worst_gap,
        tolerance,
        feasible: gaps.iter().all(|g| g.safe),
        sequence,
        gaps,
    })
}

/// Audits a merge at the trace's downstream end. The mainstream must have
/// converged there.
pub fn audit_merge(
    main: &PlatoonTrace,
    sub_entry_times: &[f64],
    sub_velocity: f64,
    params: &SafetyParams,
) -> Result<MergeReport> {
    audit_merge_downstream(
        &main.downstream(),
        sub_entry_times,
        sub_velocity,
        params,
        BOUNDARY_TOLERANCE,
    )
}

/// As [`audit_merge`], from a downstream snapshot (e.g. one read back from
/// a trace CSV) and with an explicit margin tolerance.
pub fn audit_merge_downstream(
    down: &DownstreamSnapshot,
    sub_entry_times: &[f64],
    sub_velocity: f64,
    params: &SafetyParams,
    tolerance: f64,
) -> Result<MergeReport> {
    if !(down.max_abs_error < CONVERGENCE_THRESHOLD) {
        return Err(Error::Input(format!(
            "mainstream has not converged at s = {} (max error {})",
            down.s, down.max_abs_error
        )));
    }
    audit_merge_times_within(
        &down.times,
        sub_entry_times,
        sub_velocity,
        params,
        tolerance,
    )
}

/// One substream vehicle in the middle of every gap that follows an odd
/// (sub-platoon tail) vehicle.
pub fn centered_insertions(main_times: &[f64]) -> Vec<f64> {
    main_times
        .windows(2)
        .enumerate()
        .filter(|(k, _)| k % 2 == 1)
        .map(|(_, w)| 0.5 * (w[0] + w[1]))
        .collect()
}

/// One substream vehicle `offset` seconds behind every sub-platoon tail that
/// has a successor.
pub fn offset_insertions(main_times: &[f64], offset: f64) -> Vec<f64> {
    main_times
        .windows(2)
        .enumerate()
        .filter(|(k, _)| k % 2 == 1)
        .map(|(_, w)| w[0] + offset)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::safety::velocity_for_time_gap;

    fn params() -> SafetyParams {
        SafetyParams::new(6.0, 4.0).unwrap()
    }

    /// Passage times of a perfectly shaped mainstream: 1.74 / 3.46 gaps.
    fn shaped(n: usize) -> Vec<f64> {
        let mut t = vec![100.0];
        for i in 1..n {
            let gap = if i % 2 == 1 { 1.74 } else { 3.46 };
            t.push(t[i - 1] + gap);
        }
        t
    }

    #[test]
    fn empty_substream_keeps_mainstream_gaps() {
        let p = params();
        let v2 = velocity_for_time_gap(1.74, &p).unwrap();
        let r = audit_merge_times(&shaped(6), &[], v2, &p).unwrap();
        let gaps: Vec<f64> = r.gaps.iter().map(|g| g.gap).collect();
        for (k, g) in gaps.iter().enumerate() {
            let expected = if k % 2 == 0 { 1.74 } else { 3.46 };
            assert!((g - expected).abs() < 1e-9);
        }
        assert!(r.feasible);
    }

    #[test]
    fn centered_insertion_misses_by_the_profile_slack() {
        let p = params();
        let v2 = velocity_for_time_gap(1.74, &p).unwrap();
        let main = shaped(6);
        let sub = centered_insertions(&main);
        assert_eq!(sub.len(), 2);
        let r = audit_merge_times(&main, &sub, v2, &p).unwrap();
        assert!(!r.feasible);
        // 3.46 / 2 = 1.73 against a 1.74 s safe gap at v2
        assert!((r.min_margin.unwrap() + 0.01).abs() < 1e-9);
        assert_eq!(r.sequence.len(), 8);
    }

    #[test]
    fn offset_insertion_flags_the_short_remainder() {
        let p = params();
        let v2 = velocity_for_time_gap(1.74, &p).unwrap();
        let main = shaped(4);
        let sub = offset_insertions(&main, 1.74);
        let r = audit_merge_times(&main, &sub, v2, &p).unwrap();
        let worst = r.gaps[r.worst_gap.unwrap()];
        assert!((worst.gap - 1.72).abs() < 1e-9);
        assert!((worst.margin + 0.02).abs() < 1e-9);
        assert_eq!(worst.leader.stream, Stream::Sub);
        assert!(!r.feasible);
    }

    #[test]
    fn rejects_unsorted_substream() {
        let p = params();
        assert!(matches!(
            audit_merge_times(&shaped(3), &[5.0, 4.0], 7.6, &p),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn coincident_passages_are_infeasible() {
        let p = params();
        let r = audit_merge_times(&[0.0, 10.0], &[10.0], 7.6, &p).unwrap();
        assert!(!r.feasible);
        assert_eq!(r.gaps[1].gap, 0.0);
    }
}
