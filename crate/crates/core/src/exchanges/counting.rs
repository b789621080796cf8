//! Counting FloodSet and its perfect-recall extension.
//!
//! Both exchange exactly the same messages as FloodSet; they additionally
//! remember how many of the other agents were silent — in the last round
//! only, or per round for the perfect-recall variant. A round with all
//! `n - 1` peers silent licenses an early decision.

use crate::model::{Action, SystemConfig, Value, ValueSet};
use serde::Serialize;

/// Local state `(W, h, time, v)`, where `h` counts the messages missing
/// from the other `n - 1` agents in the last completed round.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize)]
pub struct CountState {
    #[serde(rename = "W")]
    pub seen: ValueSet,
    #[serde(rename = "h")]
    pub missing: usize,
    pub time: usize,
    #[serde(rename = "v")]
    pub initial: Value,
}

impl CountState {
    pub fn initial(v: Value) -> Self {
        CountState {
            seen: ValueSet::singleton(v),
            missing: 0,
            time: 0,
            initial: v,
        }
    }

    /// Union in the received sets and record this round's missing count.
    pub fn update<'a>(
        &self,
        n: usize,
        received: impl Iterator<Item = Option<&'a ValueSet>>,
    ) -> CountState {
        let mut seen = self.seen;
        let mut heard = 0usize;
        for slot in received {
            if let Some(w) = slot {
                seen.union(*w);
                heard += 1;
            }
        }
        CountState {
            seen,
            missing: (n - 1) - heard,
            time: self.time + 1,
            initial: self.initial,
        }
    }

    /// Decide on `time >= min(t+1, n-1)`, or early when the whole last
    /// round was silent (`h >= n-1`).
    pub fn decide(&self, config: &SystemConfig) -> Action {
        if self.time >= config.decision_bound() || self.missing >= config.n - 1 {
            Action::Decide(self.seen.min().expect("W always contains the initial value"))
        } else {
            Action::Noop
        }
    }
}

/// Perfect-recall variant: `h_hist[k]` is the missing count of round `k`,
/// with `h_hist[0] = 0` for the initial state.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize)]
pub struct CountPrState {
    #[serde(rename = "W")]
    pub seen: ValueSet,
    #[serde(rename = "h_hist")]
    pub missing_history: Vec<usize>,
    pub time: usize,
    #[serde(rename = "v")]
    pub initial: Value,
}

impl CountPrState {
    pub fn initial(v: Value) -> Self {
        CountPrState {
            seen: ValueSet::singleton(v),
            missing_history: vec![0],
            time: 0,
            initial: v,
        }
    }

    pub fn update<'a>(
        &self,
        n: usize,
        received: impl Iterator<Item = Option<&'a ValueSet>>,
    ) -> CountPrState {
        let mut seen = self.seen;
        let mut heard = 0usize;
        for slot in received {
            if let Some(w) = slot {
                seen.union(*w);
                heard += 1;
            }
        }
        let mut missing_history = self.missing_history.clone();
        missing_history.push((n - 1) - heard);
        CountPrState {
            seen,
            missing_history,
            time: self.time + 1,
            initial: self.initial,
        }
    }

    /// Decide on `time >= min(t+1, n-1)`, or when any recorded round was
    /// entirely silent.
    pub fn decide(&self, config: &SystemConfig) -> Action {
        let silent_round = self
            .missing_history
            .iter()
            .any(|&h| h >= config.n - 1);
        if self.time >= config.decision_bound() || silent_round {
            Action::Decide(self.seen.min().expect("W always contains the initial value"))
        } else {
            Action::Noop
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Value::{One, Zero};

    #[test]
    fn missing_count_from_heard() {
        let s = CountState::initial(Zero);
        let w = ValueSet::singleton(One);
        // n=4, heard from 1 of 3 others.
        let next = s.update(4, [Some(&w), None, None].into_iter());
        assert_eq!(next.missing, 2);
        // Heard from all.
        let next = s.update(4, [Some(&w), Some(&w), Some(&w)].into_iter());
        assert_eq!(next.missing, 0);
    }

    #[test]
    fn perfect_recall_appends() {
        let s = CountPrState::initial(Zero);
        let w = ValueSet::singleton(Zero);
        let s = s.update(4, [Some(&w), Some(&w), Some(&w)].into_iter());
        let s = s.update(4, [Some(&w), None, None].into_iter());
        assert_eq!(s.missing_history, vec![0, 0, 2]);
        assert_eq!(s.time, 2);
    }

    #[test]
    fn decide_with_silent_round_shortcut() {
        let config = SystemConfig::new(4, 3).unwrap(); // n-1 = 3, bound 3
        let state = CountState {
            seen: ValueSet::singleton(One),
            missing: 3,
            time: 1,
            initial: One,
        };
        assert_eq!(state.decide(&config), Action::Decide(One));
        let state = CountState {
            missing: 2,
            ..state
        };
        assert_eq!(state.decide(&config), Action::Noop);
    }

    #[test]
    fn perfect_recall_decides_on_any_silent_round() {
        let config = SystemConfig::new(4, 3).unwrap();
        let state = CountPrState {
            seen: [Zero, One].into_iter().collect(),
            missing_history: vec![0, 3, 0],
            time: 2,
            initial: One,
        };
        assert_eq!(state.decide(&config), Action::Decide(Zero));
    }
}
