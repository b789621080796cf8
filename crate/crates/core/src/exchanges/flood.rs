//! FloodSet: every agent broadcasts the set of values it has seen.

use crate::model::{Action, SystemConfig, Value, ValueSet};
use serde::Serialize;

/// Local state `(W, time, v)`: values seen so far, the clock, and the
/// agent's own initial value.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize)]
pub struct FloodState {
    #[serde(rename = "W")]
    pub seen: ValueSet,
    pub time: usize,
    #[serde(rename = "v")]
    pub initial: Value,
}

impl FloodState {
    pub fn initial(v: Value) -> Self {
        FloodState {
            seen: ValueSet::singleton(v),
            time: 0,
            initial: v,
        }
    }

    /// One round of updates: union in every received value set.
    pub fn update<'a>(&self, received: impl Iterator<Item = &'a ValueSet>) -> FloodState {
        let mut seen = self.seen;
        for w in received {
            seen.union(*w);
        }
        FloodState {
            seen,
            time: self.time + 1,
            initial: self.initial,
        }
    }

    /// Decide `min W` as soon as `time >= min(t+1, n-1)`.
    pub fn decide(&self, config: &SystemConfig) -> Action {
        if self.time >= config.decision_bound() {
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

    fn state(seen: &[Value], time: usize, v: Value) -> FloodState {
        FloodState {
            seen: seen.iter().copied().collect(),
            time,
            initial: v,
        }
    }

    #[test]
    fn update_unions_received_sets() {
        let s = state(&[Zero], 0, Zero);
        let w2 = ValueSet::singleton(One);
        let w3 = ValueSet::singleton(One);
        let next = s.update([&w2, &w3].into_iter());
        assert_eq!(next, state(&[Zero, One], 1, Zero));
    }

    #[test]
    fn update_with_no_messages_keeps_set() {
        let s = state(&[Zero, One], 2, One);
        let next = s.update(std::iter::empty());
        assert_eq!(next, state(&[Zero, One], 3, One));
    }

    #[test]
    fn update_absorbs_superset() {
        let s = state(&[One], 0, One);
        let w2: ValueSet = [Zero, One].into_iter().collect();
        let next = s.update([&w2].into_iter());
        assert_eq!(next, state(&[Zero, One], 1, One));
    }

    #[test]
    fn decide_at_threshold() {
        let config = SystemConfig::new(4, 3).unwrap(); // min(4,3) = 3
        assert_eq!(state(&[One], 3, One).decide(&config), Action::Decide(One));
        assert_eq!(state(&[Zero, One], 2, One).decide(&config), Action::Noop);

        let config = SystemConfig::new(7, 2).unwrap(); // min(3,6) = 3
        assert_eq!(
            state(&[Zero, One], 3, One).decide(&config),
            Action::Decide(Zero)
        );
    }
}
