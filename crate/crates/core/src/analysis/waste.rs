//! The waste oracle: how much of the worst-case deadline a failure pattern
//! gives back, measured through distributed knowledge over the
//! full-information space, and the comparison of SendWaste against the
//! full-information optimum.

use crate::epistemics::PointSpace;
use crate::model::{ExchangeKind, Value};
use serde::Serialize;

/// Waste data of one run: `known_failures[k]` is the largest failure count
/// distributed-known at time k, `diff(k) = known_failures[k] - k`, and the
/// waste is the maximum diff. The full-information common-knowledge onset
/// must equal `min(t+1, n-1) - waste` on every run.
#[derive(Clone, Debug, Serialize)]
pub struct WasteReport {
    pub scenario_id: u64,
    pub known_failures: Vec<usize>,
    pub diffs: Vec<i64>,
    pub waste: usize,
    pub fullinfo_ck_time: usize,
    pub identity_holds: bool,
}

/// Bulk waste computation over a full-information space.
pub struct WasteTable {
    pub waste: Vec<usize>,
    pub onset: Vec<usize>,
    /// `known_failures[time][run]`.
    pub known_failures: Vec<std::sync::Arc<Vec<usize>>>,
    /// Runs where the onset does not equal `min(t+1, n-1) - waste`.
    pub identity_violations: u64,
}

/// Compute waste and the full-information onset for every run.
///
/// Callers must hand in the full-information space: the waste formula is a
/// statement about what the whole group can jointly know, and only the
/// full-information exchange preserves all of it.
pub fn waste_table(space: &PointSpace) -> WasteTable {
    assert_eq!(
        space.kind(),
        ExchangeKind::FullInfo,
        "waste is defined against the full-information exchange"
    );
    let config = *space.config();
    let known_failures: Vec<std::sync::Arc<Vec<usize>>> = (0..=config.horizon)
        .map(|time| space.known_failures(time))
        .collect();
    let ck = space.common_knowledge_slices();
    let bound = config.decision_bound();
    let mut waste = Vec::with_capacity(space.num_runs());
    let mut onset = Vec::with_capacity(space.num_runs());
    let mut identity_violations = 0;
    for run in 0..space.num_runs() {
        let w = (0..=config.horizon)
            .map(|k| known_failures[k][run] as i64 - k as i64)
            .max()
            .unwrap_or(0)
            .max(0) as usize;
        let m = (0..=config.horizon)
            .find(|&time| ck[time][run])
            .expect("the horizon covers the decision bound");
        if m != bound - w {
            identity_violations += 1;
        }
        waste.push(w);
        onset.push(m);
    }
    WasteTable {
        waste,
        onset,
        known_failures,
        identity_violations,
    }
}

/// Waste report for a single run, via the same distributed-knowledge
/// oracle. The per-time joint minima are memoized on the space, so sweeps
/// should still prefer [`waste_table`].
pub fn compute_waste(space: &PointSpace, run: usize) -> WasteReport {
    assert_eq!(space.kind(), ExchangeKind::FullInfo);
    let config = *space.config();
    let known_failures: Vec<usize> = (0..=config.horizon)
        .map(|k| space.known_failures(k)[run])
        .collect();
    let diffs: Vec<i64> = known_failures
        .iter()
        .enumerate()
        .map(|(k, &kf)| kf as i64 - k as i64)
        .collect();
    let waste = diffs.iter().copied().max().unwrap_or(0).max(0) as usize;
    let fullinfo_ck_time = space
        .ck_onset_time(run)
        .expect("the horizon covers the decision bound");
    WasteReport {
        scenario_id: run as u64,
        identity_holds: fullinfo_ck_time == config.decision_bound() - waste,
        waste,
        fullinfo_ck_time,
        known_failures,
        diffs,
    }
}

/// Histogram of the per-scenario gap between SendWaste's first decision and
/// the full-information onset, which stands in for the decision time of the
/// classic full-information-optimal protocol.
#[derive(Clone, Debug, Serialize)]
pub struct DmComparison {
    pub runs: u64,
    pub gap_zero: u64,
    pub gap_one: u64,
    /// Scenarios with a gap outside {0, 1}, or with a missing decision.
    pub violations: u64,
    pub sample: Vec<(u64, i64)>,
}

impl DmComparison {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Check `m' <= m <= m' + 1` for every scenario, where `m'` is the
/// full-information onset and `m` the SendWaste first decision.
pub fn check_sendwaste_vs_dm(
    fullinfo_onset: &[usize],
    sendwaste_first: &[Option<(usize, Value)>],
) -> DmComparison {
    assert_eq!(fullinfo_onset.len(), sendwaste_first.len());
    let mut out = DmComparison {
        runs: fullinfo_onset.len() as u64,
        gap_zero: 0,
        gap_one: 0,
        violations: 0,
        sample: Vec::new(),
    };
    for run in 0..fullinfo_onset.len() {
        match sendwaste_first[run] {
            Some((m, _)) => {
                let gap = m as i64 - fullinfo_onset[run] as i64;
                match gap {
                    0 => out.gap_zero += 1,
                    1 => out.gap_one += 1,
                    _ => {
                        out.violations += 1;
                        if out.sample.len() < 25 {
                            out.sample.push((run as u64, gap));
                        }
                    }
                }
            }
            None => {
                out.violations += 1;
                if out.sample.len() < 25 {
                    out.sample.push((run as u64, i64::MIN));
                }
            }
        }
    }
    out
}
