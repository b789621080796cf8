//! Full-information exchange: every agent broadcasts its entire local state
//! and records everything it receives.
//!
//! States grow exponentially with time, which is fine at model-checking
//! scale (n <= 5, horizon <= 5). Received states are shared via `Arc`, so a
//! run holds each view once rather than copying the nested history.

use crate::model::{AgentId, Value};
use serde::Serialize;
use std::collections::BTreeMap;
use std::sync::Arc;

/// One round's record: for each other agent, the state it sent, or `None`
/// for silence. A silent slot does not reveal whether the sender crashed
/// before sending or simply never sent.
pub type RoundRecord = BTreeMap<AgentId, Option<Arc<FullInfoState>>>;

/// Own initial value plus one record per past round.
#[derive(Clone, PartialEq, Eq, Debug, Serialize)]
pub struct FullInfoState {
    #[serde(rename = "v")]
    pub initial: Value,
    pub rounds: Vec<RoundRecord>,
}

impl FullInfoState {
    pub fn initial(v: Value) -> Self {
        FullInfoState {
            initial: v,
            rounds: Vec::new(),
        }
    }

    pub fn time(&self) -> usize {
        self.rounds.len()
    }

    /// Append the received vector as a new round record.
    pub fn extended(&self, record: RoundRecord) -> FullInfoState {
        let mut rounds = self.rounds.clone();
        rounds.push(record);
        FullInfoState {
            initial: self.initial,
            rounds,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn history_grows_one_record_per_round() {
        let s1 = FullInfoState::initial(Value::Zero);
        let s2 = FullInfoState::initial(Value::One);
        let record: RoundRecord = [(AgentId(2), Some(Arc::new(s2)))].into_iter().collect();
        let next = s1.extended(record);
        assert_eq!(next.time(), 1);
        assert_eq!(next.rounds[0].len(), 1);
        let further = next.extended(RoundRecord::new());
        assert_eq!(further.time(), 2);
    }

    #[test]
    fn silent_senders_are_absent_entries() {
        let s1 = FullInfoState::initial(Value::Zero);
        let record: RoundRecord = [(AgentId(2), None), (AgentId(3), None)]
            .into_iter()
            .collect();
        let next = s1.extended(record);
        // Crash-before-send and never-sent are the same absence.
        assert!(next.rounds[0][&AgentId(2)].is_none());
        let json = serde_json::to_value(&next).unwrap();
        assert_eq!(json["rounds"][0]["2"], serde_json::Value::Null);
    }
}
