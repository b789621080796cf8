//! SendWaste: FloodSet plus a gossiped numeric estimate of the waste.
//!
//! Each agent estimates how much the failure pattern has already "wasted"
//! of the worst-case deadline: a round `m` with `h` silent peers is
//! evidence of waste `h - m`. The running maximum `d` of the agent's own
//! estimates and every estimate received moves the decision deadline
//! `min(t+1, n-1)` forward by `d` rounds.

use crate::model::{Action, SystemConfig, Value, ValueSet};
use serde::Serialize;

/// Local state `(W, h, d, time, v)`.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize)]
pub struct SendWasteState {
    #[serde(rename = "W")]
    pub seen: ValueSet,
    #[serde(rename = "h")]
    pub missing: usize,
    #[serde(rename = "d")]
    pub waste_estimate: usize,
    pub time: usize,
    #[serde(rename = "v")]
    pub initial: Value,
}

impl SendWasteState {
    pub fn initial(v: Value) -> Self {
        SendWasteState {
            seen: ValueSet::singleton(v),
            missing: 0,
            waste_estimate: 0,
            time: 0,
            initial: v,
        }
    }

    /// One round of updates. `d` becomes the maximum of its previous value,
    /// every received estimate, and this round's own evidence `h - m`
    /// (where `m` is the 1-indexed round just completed).
    pub fn update<'a>(
        &self,
        n: usize,
        received: impl Iterator<Item = Option<(&'a ValueSet, usize)>>,
    ) -> SendWasteState {
        let mut seen = self.seen;
        let mut heard = 0usize;
        let mut estimate = self.waste_estimate as i64;
        for slot in received {
            if let Some((w, d)) = slot {
                seen.union(*w);
                heard += 1;
                estimate = estimate.max(d as i64);
            }
        }
        let missing = (n - 1) - heard;
        let round = self.time + 1;
        estimate = estimate.max(missing as i64 - round as i64);
        SendWasteState {
            seen,
            missing,
            waste_estimate: estimate as usize,
            time: round,
            initial: self.initial,
        }
    }

    /// Decide `min W` as soon as `time >= min(t+1, n-1) - d`.
    pub fn decide(&self, config: &SystemConfig) -> Action {
        if self.time as i64 >= config.decision_bound() as i64 - self.waste_estimate as i64 {
            Action::Decide(self.seen.min().expect("W always contains the initial value"))
        } else {
            Action::Noop
        }
    }
}
