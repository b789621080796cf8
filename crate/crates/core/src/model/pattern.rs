//! Crash adversaries.
//!
//! An adversary is a function `F(round, sender, receiver) -> delivered?`.
//! We encode it by listing, per faulty agent, the round it crashes in and the
//! set of recipients its crash-round messages still reach: a faulty agent
//! behaves correctly before its crash round, delivers exactly the listed
//! subset during it, and sends nothing afterwards.

use super::{AgentId, ModelError, SystemConfig};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Crash behaviour of one faulty agent.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct Fault {
    /// Round in which the agent crashes (1-indexed, within the horizon).
    pub crash_round: usize,
    /// Receivers of the crash-round message, as a bitmask over agent indexes.
    /// Never contains the crashing agent itself.
    pub delivered: u16,
}

impl Fault {
    pub fn new(crash_round: usize, delivered: impl IntoIterator<Item = AgentId>) -> Self {
        let mut mask = 0u16;
        for a in delivered {
            mask |= 1 << a.index();
        }
        Fault {
            crash_round,
            delivered: mask,
        }
    }

    pub fn delivers_to(&self, receiver: AgentId) -> bool {
        self.delivered & (1 << receiver.index()) != 0
    }

    pub fn delivered_agents(&self, n: usize) -> impl Iterator<Item = AgentId> + '_ {
        AgentId::all(n).filter(|a| self.delivers_to(*a))
    }
}

/// A canonical crash adversary: which agents crash, when, and which
/// crash-round messages still arrive.
#[derive(Clone, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub struct FailurePattern {
    pub faults: BTreeMap<AgentId, Fault>,
}

impl FailurePattern {
    pub fn failure_free() -> Self {
        FailurePattern::default()
    }

    pub fn new(faults: impl IntoIterator<Item = (AgentId, Fault)>) -> Self {
        FailurePattern {
            faults: faults.into_iter().collect(),
        }
    }

    pub fn is_faulty(&self, agent: AgentId) -> bool {
        self.faults.contains_key(&agent)
    }

    pub fn crash_round(&self, agent: AgentId) -> Option<usize> {
        self.faults.get(&agent).map(|f| f.crash_round)
    }

    /// True iff `agent` is in the crashed local state at time `m`.
    pub fn crashed_at(&self, agent: AgentId, m: usize) -> bool {
        match self.crash_round(agent) {
            Some(c) => m >= c,
            None => false,
        }
    }

    /// The adversary function `F`: does `sender`'s round-`round` message
    /// reach `receiver`? Encodes full delivery before the crash round, the
    /// listed subset during it, and nothing after. The diagonal
    /// `F(m, i, i)` is false exactly from the crash round on.
    pub fn delivers(&self, round: usize, sender: AgentId, receiver: AgentId) -> bool {
        match self.faults.get(&sender) {
            None => true,
            Some(fault) => {
                if round < fault.crash_round {
                    true
                } else if round == fault.crash_round {
                    sender != receiver && fault.delivers_to(receiver)
                } else {
                    false
                }
            }
        }
    }

    /// Number of agents that have crashed by (at or before) time `m`.
    pub fn failed_by(&self, m: usize) -> usize {
        self.faults.values().filter(|f| f.crash_round <= m).count()
    }

    /// Receiver bitmask of `sender`'s round-`round` deliveries, i.e. one
    /// row of the adversary function. Includes the diagonal bit.
    pub fn delivered_mask(&self, round: usize, sender: AgentId, n: usize) -> u16 {
        let full = ((1u32 << n) - 1) as u16;
        match self.faults.get(&sender) {
            None => full,
            Some(fault) => {
                if round < fault.crash_round {
                    full
                } else if round == fault.crash_round {
                    fault.delivered
                } else {
                    0
                }
            }
        }
    }

    /// Bitmask of agents not yet crashed at time `m`.
    pub fn live_mask(&self, m: usize, n: usize) -> u16 {
        let mut mask = ((1u32 << n) - 1) as u16;
        for (agent, fault) in &self.faults {
            if fault.crash_round <= m {
                mask &= !(1 << agent.index());
            }
        }
        mask
    }

    pub fn num_faulty(&self) -> usize {
        self.faults.len()
    }

    /// Checks every pattern invariant against `config`.
    pub fn validate(&self, config: &SystemConfig) -> Result<(), ModelError> {
        if self.faults.len() > config.t {
            return Err(ModelError::TooManyFaults {
                count: self.faults.len(),
                t: config.t,
            });
        }
        for (&agent, fault) in &self.faults {
            if agent.0 < 1 || agent.0 > config.n {
                return Err(ModelError::UnknownAgent {
                    agent: agent.0,
                    n: config.n,
                });
            }
            if fault.crash_round < 1 || fault.crash_round > config.horizon {
                return Err(ModelError::BadRound {
                    agent,
                    round: fault.crash_round,
                    horizon: config.horizon,
                });
            }
            if fault.delivers_to(agent) {
                return Err(ModelError::SelfDelivery { agent });
            }
            if fault.delivered >> config.n != 0 {
                return Err(ModelError::UnknownAgent {
                    agent: (16 - fault.delivered.leading_zeros()) as usize,
                    n: config.n,
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn agents(ids: &[usize]) -> Vec<AgentId> {
        ids.iter().map(|&i| AgentId(i)).collect()
    }

    #[test]
    fn failure_free_pattern_is_valid() {
        let config = SystemConfig::new(3, 1).unwrap();
        assert!(FailurePattern::failure_free().validate(&config).is_ok());
    }

    #[test]
    fn too_many_faults_rejected() {
        let config = SystemConfig::new(3, 1).unwrap();
        let pattern = FailurePattern::new([
            (AgentId(1), Fault::new(1, agents(&[2]))),
            (AgentId(2), Fault::new(2, agents(&[]))),
        ]);
        assert_eq!(
            pattern.validate(&config),
            Err(ModelError::TooManyFaults { count: 2, t: 1 })
        );
    }

    #[test]
    fn single_fault_within_bounds_is_valid() {
        let config = SystemConfig::new(4, 3).unwrap();
        let pattern = FailurePattern::new([(AgentId(2), Fault::new(1, agents(&[1, 3])))]);
        assert!(pattern.validate(&config).is_ok());
    }

    #[test]
    fn self_delivery_rejected() {
        let config = SystemConfig::new(3, 1).unwrap();
        let pattern = FailurePattern::new([(AgentId(2), Fault::new(1, agents(&[2])))]);
        assert_eq!(
            pattern.validate(&config),
            Err(ModelError::SelfDelivery { agent: AgentId(2) })
        );
    }

    #[test]
    fn crash_round_outside_horizon_rejected() {
        let config = SystemConfig::new(3, 1).unwrap(); // horizon 3
        let pattern = FailurePattern::new([(AgentId(1), Fault::new(4, agents(&[])))]);
        assert_eq!(
            pattern.validate(&config),
            Err(ModelError::BadRound {
                agent: AgentId(1),
                round: 4,
                horizon: 3
            })
        );
        let pattern = FailurePattern::new([(AgentId(1), Fault::new(0, agents(&[])))]);
        assert!(matches!(
            pattern.validate(&config),
            Err(ModelError::BadRound { round: 0, .. })
        ));
    }

    #[test]
    fn adversary_function_encoding() {
        // Agent 2 crashes in round 2, delivering only to agent 3.
        let pattern = FailurePattern::new([(AgentId(2), Fault::new(2, agents(&[3])))]);
        // Before the crash round: full delivery, including to itself.
        assert!(pattern.delivers(1, AgentId(2), AgentId(1)));
        assert!(pattern.delivers(1, AgentId(2), AgentId(2)));
        // Crash round: listed subset only; the diagonal goes dark.
        assert!(pattern.delivers(2, AgentId(2), AgentId(3)));
        assert!(!pattern.delivers(2, AgentId(2), AgentId(1)));
        assert!(!pattern.delivers(2, AgentId(2), AgentId(2)));
        // Afterwards: nothing.
        assert!(!pattern.delivers(3, AgentId(2), AgentId(3)));
        // Nonfaulty senders always deliver.
        assert!(pattern.delivers(5, AgentId(1), AgentId(3)));
        // Crashed-state timeline.
        assert!(!pattern.crashed_at(AgentId(2), 1));
        assert!(pattern.crashed_at(AgentId(2), 2));
        assert!(pattern.crashed_at(AgentId(2), 3));
    }
}
