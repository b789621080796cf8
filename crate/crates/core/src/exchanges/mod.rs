//! The six information-exchange state machines and their decision rules.
//!
//! An exchange fixes what agents store, what they send each round, and how
//! they fold received messages into their state. Decision rules are kept
//! separate: they read local states but never influence messages or
//! updates, so the generated run spaces do not depend on which rule is
//! being evaluated.

mod counting;
mod flood;
mod fullinfo;
mod sendwaste;
mod vector;

pub use counting::{CountPrState, CountState};
pub use flood::FloodState;
pub use fullinfo::{FullInfoState, RoundRecord};
pub use sendwaste::SendWasteState;
pub use vector::VectorState;

use crate::model::{Action, AgentId, ExchangeKind, SystemConfig, Value, ValueSet};
use serde::ser::SerializeMap;
use serde::Serialize;
use std::collections::BTreeSet;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExchangeError {
    /// Two different values for the same agent arrived in one round. This
    /// cannot happen under crash failures and signals a harness bug.
    #[error("conflicting values {first} and {second} received for agent {agent}")]
    ConflictingValue {
        agent: AgentId,
        first: Value,
        second: Value,
    },
}

/// Per-exchange local state, plus the shared crashed state.
#[derive(Clone, PartialEq, Debug)]
pub enum LocalState {
    Crashed,
    Flood(FloodState),
    Counting(CountState),
    CountingPr(CountPrState),
    Vectorized(VectorState),
    SendWaste(SendWasteState),
    FullInfo(FullInfoState),
}

impl LocalState {
    pub fn is_crashed(&self) -> bool {
        matches!(self, LocalState::Crashed)
    }

    pub fn time(&self) -> Option<usize> {
        match self {
            LocalState::Crashed => None,
            LocalState::Flood(s) => Some(s.time),
            LocalState::Counting(s) => Some(s.time),
            LocalState::CountingPr(s) => Some(s.time),
            LocalState::Vectorized(s) => Some(s.time),
            LocalState::SendWaste(s) => Some(s.time),
            LocalState::FullInfo(s) => Some(s.time()),
        }
    }
}

impl Serialize for LocalState {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            LocalState::Crashed => serializer.serialize_str("crashed"),
            LocalState::Flood(s) => s.serialize(serializer),
            LocalState::Counting(s) => s.serialize(serializer),
            LocalState::CountingPr(s) => s.serialize(serializer),
            LocalState::Vectorized(s) => s.serialize(serializer),
            LocalState::SendWaste(s) => s.serialize(serializer),
            LocalState::FullInfo(s) => s.serialize(serializer),
        }
    }
}

/// A broadcast message. Each live agent sends the same payload to every
/// other agent in a round.
#[derive(Clone, PartialEq, Debug)]
pub enum Message {
    /// FloodSet and the counting variants: the set of values seen.
    Values(ValueSet),
    /// SendWaste: values seen plus the waste estimate.
    ValuesWaste(ValueSet, usize),
    /// Vectorized: newly learned (value, agent) pairs.
    Pairs(BTreeSet<(Value, AgentId)>),
    /// Full information: the sender's whole state.
    State(Arc<FullInfoState>),
}

impl Serialize for Message {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Message::Values(w) => {
                let mut map = serializer.serialize_map(Some(1))?;
                map.serialize_entry("W", w)?;
                map.end()
            }
            Message::ValuesWaste(w, d) => {
                let mut map = serializer.serialize_map(Some(2))?;
                map.serialize_entry("W", w)?;
                map.serialize_entry("d", d)?;
                map.end()
            }
            Message::Pairs(pairs) => {
                let mut map = serializer.serialize_map(Some(1))?;
                map.serialize_entry("new", pairs)?;
                map.end()
            }
            Message::State(state) => state.serialize(serializer),
        }
    }
}

impl ExchangeKind {
    pub fn initial_state(self, n: usize, agent: AgentId, v: Value) -> LocalState {
        match self {
            ExchangeKind::Flood => LocalState::Flood(FloodState::initial(v)),
            ExchangeKind::Counting => LocalState::Counting(CountState::initial(v)),
            ExchangeKind::CountingPr => LocalState::CountingPr(CountPrState::initial(v)),
            ExchangeKind::Vectorized => {
                LocalState::Vectorized(VectorState::initial(n, agent, v))
            }
            ExchangeKind::SendWaste => LocalState::SendWaste(SendWasteState::initial(v)),
            ExchangeKind::FullInfo => LocalState::FullInfo(FullInfoState::initial(v)),
        }
    }
}

/// The message a live agent broadcasts from `state`, or `None` when it
/// stays silent (a Vectorized agent with nothing new, or a crashed one).
pub fn select_message(state: &LocalState) -> Option<Message> {
    match state {
        LocalState::Crashed => None,
        LocalState::Flood(s) => Some(Message::Values(s.seen)),
        LocalState::Counting(s) => Some(Message::Values(s.seen)),
        LocalState::CountingPr(s) => Some(Message::Values(s.seen)),
        LocalState::Vectorized(s) => {
            if s.fresh.is_empty() {
                None
            } else {
                Some(Message::Pairs(s.fresh.clone()))
            }
        }
        LocalState::SendWaste(s) => Some(Message::ValuesWaste(s.seen, s.waste_estimate)),
        LocalState::FullInfo(s) => Some(Message::State(Arc::new(s.clone()))),
    }
}

/// One state transition for agent `agent`. `received` is indexed by sender
/// (0-based); the agent's own slot is always `None` — processing one's own
/// broadcast is a no-op in every exchange in scope, and missing-message
/// counts range over the other `n - 1` agents only.
pub fn apply_round(
    state: &LocalState,
    n: usize,
    agent: AgentId,
    received: &[Option<Message>],
) -> Result<LocalState, ExchangeError> {
    debug_assert!(received[agent.index()].is_none());
    Ok(match state {
        LocalState::Crashed => LocalState::Crashed,
        LocalState::Flood(s) => LocalState::Flood(s.update(received.iter().filter_map(|m| {
            match m {
                Some(Message::Values(w)) => Some(w),
                Some(_) => unreachable!("flood agents exchange value sets"),
                None => None,
            }
        }))),
        LocalState::Counting(s) =>

            LocalState::Counting(s.update(n, others(received, agent).map(|m| match m {
                Some(Message::Values(w)) => Some(w),
                Some(_) => unreachable!("counting agents exchange value sets"),
                None => None,
            }))),
        LocalState::CountingPr(s) => {
            LocalState::CountingPr(s.update(n, others(received, agent).map(|m| match m {
                Some(Message::Values(w)) => Some(w),
                Some(_) => unreachable!("counting agents exchange value sets"),
                None => None,
            })))
        }
        LocalState::Vectorized(s) => {
            LocalState::Vectorized(s.update(received.iter().filter_map(|m| match m {
                Some(Message::Pairs(pairs)) => Some(pairs),
                Some(_) => unreachable!("vectorized agents exchange pair sets"),
                None => None,
            }))?)
        }
        LocalState::SendWaste(s) => {
            LocalState::SendWaste(s.update(n, others(received, agent).map(|m| match m {
                Some(Message::ValuesWaste(w, d)) => Some((w, *d)),
                Some(_) => unreachable!("sendwaste agents exchange (W, d)"),
                None => None,
            })))
        }
        LocalState::FullInfo(s) => {
            let record: RoundRecord = AgentId::all(n)
                .filter(|sender| *sender != agent)
                .map(|sender| {
                    let slot = match &received[sender.index()] {
                        Some(Message::State(st)) => Some(st.clone()),
                        Some(_) => unreachable!("full-info agents exchange states"),
                        None => None,
                    };
                    (sender, slot)
                })
                .collect();
            LocalState::FullInfo(s.extended(record))
        }
    })
}

fn others<'a>(
    received: &'a [Option<Message>],
    agent: AgentId,
) -> impl Iterator<Item = &'a Option<Message>> {
    received
        .iter()
        .enumerate()
        .filter(move |(idx, _)| *idx != agent.index())
        .map(|(_, m)| m)
}

/// The standard decision rule for the state's exchange. Crashed agents do
/// not act; full information has no local rule (decisions for it come from
/// the knowledge-based program).
pub fn decide(state: &LocalState, config: &SystemConfig) -> Action {
    match state {
        LocalState::Crashed => Action::Noop,
        LocalState::Flood(s) => s.decide(config),
        LocalState::Counting(s) => s.decide(config),
        LocalState::CountingPr(s) => s.decide(config),
        LocalState::Vectorized(s) => s.decide(config),
        LocalState::SendWaste(s) => s.decide(config),
        LocalState::FullInfo(_) => Action::Noop,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_formats() {
        let w: ValueSet = [Value::Zero, Value::One].into_iter().collect();
        assert_eq!(
            serde_json::to_string(&Message::Values(w)).unwrap(),
            r#"{"W":[0,1]}"#
        );
        assert_eq!(
            serde_json::to_string(&Message::ValuesWaste(ValueSet::singleton(Value::Zero), 1))
                .unwrap(),
            r#"{"W":[0],"d":1}"#
        );
        let pairs: BTreeSet<(Value, AgentId)> =
            [(Value::Zero, AgentId(3)), (Value::One, AgentId(2))]
                .into_iter()
                .collect();
        assert_eq!(
            serde_json::to_string(&Message::Pairs(pairs)).unwrap(),
            r#"{"new":[[0,3],[1,2]]}"#
        );
    }

    #[test]
    fn crashed_state_serialization() {
        assert_eq!(
            serde_json::to_string(&LocalState::Crashed).unwrap(),
            "\"crashed\""
        );
    }

    #[test]
    fn vectorized_silence_when_nothing_new() {
        let state = LocalState::Vectorized(VectorState {
            values: vec![Some(Value::Zero), Some(Value::One)],
            fresh: BTreeSet::new(),
            time: 1,
        });
        assert!(select_message(&state).is_none());
    }
}
