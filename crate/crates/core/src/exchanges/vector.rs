//! Vectorized FloodSet: agents track who holds which initial value and
//! gossip only newly learned (value, agent) pairs.
//!
//! An agent stays silent in rounds where it learned nothing new, and
//! receivers cannot tell such silence from a crash. Entries of the value
//! array are write-once; under crash failures two different values for the
//! same agent can never arrive, so a conflict signals a harness bug.

use super::ExchangeError;
use crate::model::{Action, AgentId, SystemConfig, Value};
use serde::Serialize;
use std::collections::BTreeSet;

/// Local state `(V, New, time)`. The agent's own slot of `V` always holds
/// its initial value; `New` is the set of pairs learned in the last round.
#[derive(Clone, PartialEq, Eq, Debug, Serialize)]
pub struct VectorState {
    #[serde(rename = "V")]
    pub values: Vec<Option<Value>>,
    #[serde(rename = "new")]
    pub fresh: BTreeSet<(Value, AgentId)>,
    pub time: usize,
}

impl VectorState {
    pub fn initial(n: usize, agent: AgentId, v: Value) -> Self {
        let mut values = vec![None; n];
        values[agent.index()] = Some(v);
        VectorState {
            values,
            fresh: [(v, agent)].into_iter().collect(),
            time: 0,
        }
    }

    /// Number of unknown entries, the `beta` of the early-stopping rule.
    pub fn unknown_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }

    /// Fill write-once slots from the received pair sets. `New` becomes
    /// exactly the pairs whose slot was unknown at the start of the round.
    pub fn update<'a>(
        &self,
        incoming: impl Iterator<Item = &'a BTreeSet<(Value, AgentId)>>,
    ) -> Result<VectorState, ExchangeError> {
        let mut values = self.values.clone();
        let mut fresh = BTreeSet::new();
        for pairs in incoming {
            for &(v, k) in pairs {
                if self.values[k.index()].is_some() {
                    continue; // known before this round; not fresh
                }
                match values[k.index()] {
                    None => {
                        values[k.index()] = Some(v);
                        fresh.insert((v, k));
                    }
                    Some(existing) if existing != v => {
                        return Err(ExchangeError::ConflictingValue {
                            agent: k,
                            first: existing,
                            second: v,
                        });
                    }
                    Some(_) => {} // duplicate arrival in the same round
                }
            }
        }
        Ok(VectorState {
            values,
            fresh,
            time: self.time + 1,
        })
    }

    /// Decide `0` if a zero occurs in `V`, else `1`, as soon as
    /// `time > min(t+1, n-1) - max(1, beta)`.
    ///
    /// The time >= 1 guard keeps the rule quiet in the initial state, where
    /// `beta = n - 1` would otherwise fire it before any exchange has
    /// happened (and before common knowledge is attainable at all).
    pub fn decide(&self, config: &SystemConfig) -> Action {
        let beta = self.unknown_count();
        let threshold = config.decision_bound() as i64 - (beta.max(1) as i64);
        if self.time >= 1 && self.time as i64 > threshold {
            let value = if self.values.contains(&Some(Value::Zero)) {
                Value::Zero
            } else {
                Value::One
            };
            Action::Decide(value)
        } else {
            Action::Noop
        }
    }
}
