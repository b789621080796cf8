//! Agents, values, system parameters and the crash-failure adversary model.
//!
//! A system is a set of `n` agents, each starting with a binary value, that
//! exchange messages over synchronous rounds while up to `t` of them may
//! crash. Everything downstream (the exchange state machines, run generation,
//! the knowledge checker) is parameterised by a [`SystemConfig`] and driven by
//! a [`Scenario`].

mod pattern;
mod run;
mod scenario;

pub use pattern::{Fault, FailurePattern};
pub use run::{generate_run, DeliveryMatrix, Run, RunTrace, TraceRound, TraceTime};
pub use scenario::{
    scenario_space_size, EnumerationMode, Scenario, ScenarioFile, ScenarioStream,
};

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Largest agent count the packed internal encodings support.
pub const MAX_AGENTS: usize = 16;

/// One of the two binary initial values.
#[derive(Copy, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Value {
    Zero,
    One,
}

impl Value {
    pub const ALL: [Value; 2] = [Value::Zero, Value::One];

    pub fn as_u8(self) -> u8 {
        match self {
            Value::Zero => 0,
            Value::One => 1,
        }
    }
}

impl From<Value> for u8 {
    fn from(v: Value) -> u8 {
        v.as_u8()
    }
}

impl TryFrom<u8> for Value {
    type Error = String;

    fn try_from(raw: u8) -> Result<Self, Self::Error> {
        match raw {
            0 => Ok(Value::Zero),
            1 => Ok(Value::One),
            other => Err(format!("value must be 0 or 1, got {other}")),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

/// A set of [`Value`]s, stored as a two-bit mask.
///
/// The mask representation makes every equal set serialize identically,
/// which the knowledge machinery relies on for state equality.
#[derive(Copy, Clone, PartialEq, Eq, Hash, Debug, Default)]
pub struct ValueSet(u8);

impl ValueSet {
    pub fn empty() -> Self {
        ValueSet(0)
    }

    pub fn singleton(v: Value) -> Self {
        let mut s = ValueSet(0);
        s.insert(v);
        s
    }

    pub fn insert(&mut self, v: Value) {
        self.0 |= 1 << v.as_u8();
    }

    pub fn union(&mut self, other: ValueSet) {
        self.0 |= other.0;
    }

    pub fn contains(&self, v: Value) -> bool {
        self.0 & (1 << v.as_u8()) != 0
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    /// Smallest value in the set, i.e. the `min W` of the decision rules.
    pub fn min(&self) -> Option<Value> {
        if self.contains(Value::Zero) {
            Some(Value::Zero)
        } else if self.contains(Value::One) {
            Some(Value::One)
        } else {
            None
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Value> + '_ {
        Value::ALL.into_iter().filter(|v| self.contains(*v))
    }

    pub fn bits(&self) -> u8 {
        self.0
    }
}

impl FromIterator<Value> for ValueSet {
    fn from_iter<I: IntoIterator<Item = Value>>(iter: I) -> Self {
        let mut s = ValueSet::empty();
        for v in iter {
            s.insert(v);
        }
        s
    }
}

impl Serialize for ValueSet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter().map(|v| v.as_u8()))
    }
}

impl<'de> Deserialize<'de> for ValueSet {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw: Vec<Value> = Vec::deserialize(deserializer)?;
        Ok(raw.into_iter().collect())
    }
}

/// Agent identifier, 1-indexed to match the wire formats and the usual
/// presentation of agent sets as `{1, ..., n}`.
#[derive(
    Copy, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct AgentId(pub usize);

impl AgentId {
    /// Zero-based position for vector indexing.
    pub fn index(self) -> usize {
        self.0 - 1
    }

    pub fn from_index(idx: usize) -> Self {
        AgentId(idx + 1)
    }

    pub fn all(n: usize) -> impl Iterator<Item = AgentId> {
        (1..=n).map(AgentId)
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// What a decision protocol does with a local state in one round.
#[derive(Copy, Clone, PartialEq, Eq, Hash, Debug)]
pub enum Action {
    Noop,
    Decide(Value),
}

impl Action {
    pub fn decided_value(self) -> Option<Value> {
        match self {
            Action::Noop => None,
            Action::Decide(v) => Some(v),
        }
    }
}

impl Serialize for Action {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Action::Noop => serializer.serialize_str("noop"),
            Action::Decide(v) => {
                use serde::ser::SerializeMap;
                let mut map = serializer.serialize_map(Some(1))?;
                map.serialize_entry("decide", &v.as_u8())?;
                map.end()
            }
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Noop => write!(f, "noop"),
            Action::Decide(v) => write!(f, "decide({v})"),
        }
    }
}

/// The six information exchanges the laboratory knows how to run.
#[derive(Copy, Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExchangeKind {
    Flood,
    Counting,
    CountingPr,
    Vectorized,
    SendWaste,
    FullInfo,
}

impl ExchangeKind {
    pub const ALL: [ExchangeKind; 6] = [
        ExchangeKind::Flood,
        ExchangeKind::Counting,
        ExchangeKind::CountingPr,
        ExchangeKind::Vectorized,
        ExchangeKind::SendWaste,
        ExchangeKind::FullInfo,
    ];

    /// The five exchanges that come with a standard, local decision rule.
    /// Full information is the reference exchange: its decisions are read off
    /// the knowledge-based program instead.
    pub const LIMITED: [ExchangeKind; 5] = [
        ExchangeKind::Flood,
        ExchangeKind::Counting,
        ExchangeKind::CountingPr,
        ExchangeKind::Vectorized,
        ExchangeKind::SendWaste,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExchangeKind::Flood => "flood",
            ExchangeKind::Counting => "counting",
            ExchangeKind::CountingPr => "counting-pr",
            ExchangeKind::Vectorized => "vectorized",
            ExchangeKind::SendWaste => "sendwaste",
            ExchangeKind::FullInfo => "fullinfo",
        }
    }
}

impl fmt::Display for ExchangeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ExchangeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ExchangeKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown exchange {s:?}"))
    }
}

/// System parameters: agent count, failure budget and simulated rounds.
#[derive(Copy, Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct SystemConfig {
    pub n: usize,
    pub t: usize,
    pub horizon: usize,
}

impl SystemConfig {
    /// All protocols in scope decide by round `min(t+1, n-1)`; one spare
    /// round lets the harness observe that decisions persist.
    pub fn default_horizon(n: usize, t: usize) -> usize {
        (t + 1).min(n - 1) + 1
    }

    pub fn new(n: usize, t: usize) -> Result<Self, ModelError> {
        if n < 2 {
            return Err(ModelError::BadAgentCount { n });
        }
        Self::with_horizon(n, t, Self::default_horizon(n, t))
    }

    pub fn with_horizon(n: usize, t: usize, horizon: usize) -> Result<Self, ModelError> {
        if n < 2 || n > MAX_AGENTS {
            return Err(ModelError::BadAgentCount { n });
        }
        if t >= n {
            return Err(ModelError::BadFaultBound { n, t });
        }
        let min_horizon = Self::default_horizon(n, t);
        if horizon < min_horizon {
            return Err(ModelError::BadHorizon {
                horizon,
                min_horizon,
            });
        }
        Ok(SystemConfig { n, t, horizon })
    }

    /// The uniform decision deadline `min(t+1, n-1)`.
    pub fn decision_bound(&self) -> usize {
        (self.t + 1).min(self.n - 1)
    }

    pub fn agents(&self) -> impl Iterator<Item = AgentId> {
        AgentId::all(self.n)
    }
}

/// Errors raised while validating configurations, patterns and scenarios.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("agent count must be between 2 and {MAX_AGENTS}, got {n}")]
    BadAgentCount { n: usize },
    #[error("fault bound must satisfy t < n, got t={t}, n={n}")]
    BadFaultBound { n: usize, t: usize },
    #[error("horizon {horizon} is below the minimum {min_horizon}")]
    BadHorizon { horizon: usize, min_horizon: usize },
    #[error("pattern has {count} faulty agents but at most {t} are allowed")]
    TooManyFaults { count: usize, t: usize },
    #[error("agent {agent} crashes in round {round}, outside 1..={horizon}")]
    BadRound {
        agent: AgentId,
        round: usize,
        horizon: usize,
    },
    #[error("agent {agent} lists itself in its crash-round delivery set")]
    SelfDelivery { agent: AgentId },
    #[error("agent id {agent} out of range 1..={n}")]
    UnknownAgent { agent: usize, n: usize },
    #[error("scenario has {got} initial values but n={n}")]
    BadInitLength { got: usize, n: usize },
    #[error("exhaustive space has {count} scenarios, above the cap {cap}")]
    SpaceTooLarge { count: u128, cap: u128 },
}
