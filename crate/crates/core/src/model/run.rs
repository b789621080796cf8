//! Deterministic run generation.
//!
//! A run is the time-indexed sequence of global states produced from a
//! scenario: per round, each live agent selects a broadcast message from
//! its state, the adversary filters deliveries, every surviving agent folds
//! the arrivals into its state, and agents whose crash round has come go to
//! the crashed state. Decisions are computed from states by the analysis
//! layer; they never feed back into the run.

use crate::exchanges::{self, LocalState, Message};
use crate::model::{
    Action, AgentId, ExchangeKind, ModelError, Scenario, ScenarioFile, SystemConfig, Value,
};
use serde::Serialize;
use std::collections::BTreeMap;

/// Per-round delivery outcome: bit `r` of `senders[s]` is set iff the
/// round-`s+1` message... rather, iff sender `s+1`'s message reached agent
/// `r+1`. This is the adversary function applied to the round, independent
/// of whether the exchange had the sender broadcast anything.
#[derive(Clone, PartialEq, Eq, Debug, Serialize)]
pub struct DeliveryMatrix {
    pub senders: Vec<u16>,
}

impl DeliveryMatrix {
    pub fn delivered(&self, sender: AgentId, receiver: AgentId) -> bool {
        self.senders[sender.index()] & (1 << receiver.index()) != 0
    }
}

/// A generated run: states for times `0..=horizon`, plus the applied
/// delivery matrix per round.
#[derive(Clone, Debug)]
pub struct Run {
    pub scenario: Scenario,
    pub kind: ExchangeKind,
    /// `states[m][i]` is agent `i+1`'s state at time `m`.
    pub states: Vec<Vec<LocalState>>,
    /// `deliveries[m-1]` is the matrix of round `m`.
    pub deliveries: Vec<DeliveryMatrix>,
}

impl Run {
    pub fn config(&self) -> &SystemConfig {
        &self.scenario.config
    }

    pub fn state(&self, agent: AgentId, time: usize) -> &LocalState {
        &self.states[time][agent.index()]
    }

    /// The indexical nonfailed set `N(r, m)`.
    pub fn nonfailed(&self, time: usize) -> impl Iterator<Item = AgentId> + '_ {
        self.states[time]
            .iter()
            .enumerate()
            .filter(|(_, s)| !s.is_crashed())
            .map(|(idx, _)| AgentId::from_index(idx))
    }

    pub fn is_nonfailed(&self, agent: AgentId, time: usize) -> bool {
        !self.state(agent, time).is_crashed()
    }

    /// A round is clean when every agent live at its end received messages
    /// from exactly the same senders. Computed from the adversary-applied
    /// delivery matrix, so it depends only on the failure pattern.
    pub fn is_clean_round(&self, round: usize) -> bool {
        let matrix = &self.deliveries[round - 1];
        let live: u16 = self.states[round]
            .iter()
            .enumerate()
            .filter(|(_, s)| !s.is_crashed())
            .fold(0, |mask, (idx, _)| mask | (1 << idx));
        matrix.senders.iter().all(|&delivered| {
            let reached = delivered & live;
            reached == 0 || reached == live
        })
    }

    /// Has some round `<= time` been clean?
    pub fn clean_by(&self, time: usize) -> bool {
        (1..=time).any(|m| self.is_clean_round(m))
    }

    /// The standard rule's action for `agent` at `time`.
    pub fn action(&self, agent: AgentId, time: usize) -> Action {
        exchanges::decide(self.state(agent, time), self.config())
    }

    /// First round in which any live agent's rule fires, with the value.
    pub fn first_decision(&self) -> Option<(usize, Value)> {
        for time in 0..=self.config().horizon {
            for agent in self.nonfailed(time) {
                if let Action::Decide(v) = self.action(agent, time) {
                    return Some((time, v));
                }
            }
        }
        None
    }
}

/// Serializable dump of one run: states and rule firings per time, plus
/// messages and the applied delivery matrix per round.
#[derive(Serialize)]
pub struct RunTrace {
    pub scenario: ScenarioFile,
    pub exchange: ExchangeKind,
    pub times: Vec<TraceTime>,
    pub rounds: Vec<TraceRound>,
}

#[derive(Serialize)]
pub struct TraceTime {
    pub time: usize,
    pub states: BTreeMap<AgentId, LocalState>,
    pub actions: BTreeMap<AgentId, Action>,
}

#[derive(Serialize)]
pub struct TraceRound {
    pub round: usize,
    /// Broadcast payload per live sender; silent senders are absent.
    pub messages: BTreeMap<AgentId, Message>,
    /// Adversary-applied delivery matrix: receivers per sender.
    pub delivered: BTreeMap<AgentId, Vec<AgentId>>,
}

impl Run {
    pub fn trace(&self) -> RunTrace {
        let config = self.config();
        let times = (0..=config.horizon)
            .map(|time| TraceTime {
                time,
                states: config
                    .agents()
                    .map(|a| (a, self.state(a, time).clone()))
                    .collect(),
                actions: config
                    .agents()
                    .filter(|a| self.is_nonfailed(*a, time))
                    .map(|a| (a, self.action(a, time)))
                    .collect(),
            })
            .collect();
        let rounds = (1..=config.horizon)
            .map(|round| TraceRound {
                round,
                messages: config
                    .agents()
                    .filter_map(|a| {
                        exchanges::select_message(self.state(a, round - 1))
                            .map(|msg| (a, msg))
                    })
                    .collect(),
                delivered: config
                    .agents()
                    .map(|sender| {
                        let receivers = config
                            .agents()
                            .filter(|r| self.deliveries[round - 1].delivered(sender, *r))
                            .collect();
                        (sender, receivers)
                    })
                    .collect(),
            })
            .collect();
        RunTrace {
            scenario: ScenarioFile::from_scenario(&self.scenario),
            exchange: self.kind,
            times,
            rounds,
        }
    }
}

/// Generate the unique run of `scenario` under exchange `kind`.
pub fn generate_run(scenario: &Scenario, kind: ExchangeKind) -> Result<Run, ModelError> {
    let config = scenario.config;
    scenario.pattern.validate(&config)?;
    if scenario.init.len() != config.n {
        return Err(ModelError::BadInitLength {
            got: scenario.init.len(),
            n: config.n,
        });
    }

    let mut states: Vec<Vec<LocalState>> = Vec::with_capacity(config.horizon + 1);
    states.push(
        config
            .agents()
            .map(|a| kind.initial_state(config.n, a, scenario.initial_value(a)))
            .collect(),
    );
    let mut deliveries = Vec::with_capacity(config.horizon);

    for round in 1..=config.horizon {
        let prev = &states[round - 1];
        let outgoing: Vec<Option<Message>> =
            prev.iter().map(exchanges::select_message).collect();

        let matrix = DeliveryMatrix {
            senders: config
                .agents()
                .map(|sender| scenario.pattern.delivered_mask(round, sender, config.n))
                .collect(),
        };

        let mut next = Vec::with_capacity(config.n);
        for agent in config.agents() {
            if prev[agent.index()].is_crashed() || scenario.pattern.crashed_at(agent, round) {
                next.push(LocalState::Crashed);
                continue;
            }
            let received: Vec<Option<Message>> = config
                .agents()
                .map(|sender| {
                    if sender == agent {
                        // Self-delivery is a no-op in every exchange; the
                        // update contract takes the other agents' slots.
                        None
                    } else if matrix.delivered(sender, agent) {
                        outgoing[sender.index()].clone()
                    } else {
                        None
                    }
                })
                .collect();
            let updated = exchanges::apply_round(&prev[agent.index()], config.n, agent, &received)
                .expect("crash-failure deliveries cannot conflict");
            next.push(updated);
        }
        states.push(next);
        deliveries.push(matrix);
    }

    Ok(Run {
        scenario: scenario.clone(),
        kind,
        states,
        deliveries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exchanges::{CountState, FloodState, SendWasteState};
    use crate::model::{FailurePattern, Fault, ValueSet};
    use Value::{One, Zero};

    fn scenario(
        n: usize,
        t: usize,
        init: &[Value],
        faults: Vec<(usize, usize, Vec<usize>)>,
    ) -> Scenario {
        let config = SystemConfig::new(n, t).unwrap();
        let pattern = FailurePattern::new(faults.into_iter().map(|(agent, round, delivered)| {
            (
                AgentId(agent),
                Fault::new(round, delivered.into_iter().map(AgentId)),
            )
        }));
        Scenario::new(config, init.to_vec(), pattern).unwrap()
    }

    fn flood_seen(run: &Run, agent: usize, time: usize) -> ValueSet {
        match run.state(AgentId(agent), time) {
            LocalState::Flood(FloodState { seen, .. }) => *seen,
            other => panic!("expected flood state, got {other:?}"),
        }
    }

    #[test]
    fn partial_crash_round_one() {
        // Agent 2 crashes in round 1 delivering only to agent 1.
        let s = scenario(3, 2, &[Zero, One, Zero], vec![(2, 1, vec![1])]);
        let run = generate_run(&s, ExchangeKind::Flood).unwrap();
        assert_eq!(flood_seen(&run, 1, 1), [Zero, One].into_iter().collect());
        assert_eq!(flood_seen(&run, 3, 1), ValueSet::singleton(Zero));
        assert!(run.state(AgentId(2), 1).is_crashed());
        assert!(!run.state(AgentId(2), 0).is_crashed());
        // Agent 1 relays the value in round 2.
        assert_eq!(flood_seen(&run, 3, 2), [Zero, One].into_iter().collect());
    }

    #[test]
    fn failure_free_single_value_is_stable() {
        let s = scenario(3, 1, &[Zero, Zero, Zero], vec![]);
        let run = generate_run(&s, ExchangeKind::Flood).unwrap();
        for time in 0..=s.config.horizon {
            for agent in 1..=3 {
                assert_eq!(flood_seen(&run, agent, time), ValueSet::singleton(Zero));
            }
        }
    }

    #[test]
    fn sendwaste_silent_crashes_raise_estimates() {
        // Agents 4 and 5 crash in round 1 delivering nothing: every live
        // agent ends round 1 with h=2 and d = max(0, 2-1) = 1.
        let s = scenario(
            5,
            4,
            &[Zero, One, Zero, One, One],
            vec![(4, 1, vec![]), (5, 1, vec![])],
        );
        let run = generate_run(&s, ExchangeKind::SendWaste).unwrap();
        for agent in 1..=3 {
            match run.state(AgentId(agent), 1) {
                LocalState::SendWaste(SendWasteState {
                    missing,
                    waste_estimate,
                    ..
                }) => {
                    assert_eq!(*missing, 2);
                    assert_eq!(*waste_estimate, 1);
                }
                other => panic!("unexpected state {other:?}"),
            }
        }
    }

    #[test]
    fn determinism_bit_identical() {
        let s = scenario(4, 2, &[Zero, One, One, Zero], vec![(3, 2, vec![1, 2])]);
        for kind in ExchangeKind::ALL {
            let a = generate_run(&s, kind).unwrap();
            let b = generate_run(&s, kind).unwrap();
            assert_eq!(
                serde_json::to_string(&a.states).unwrap(),
                serde_json::to_string(&b.states).unwrap()
            );
            assert_eq!(a.deliveries, b.deliveries);
        }
    }

    #[test]
    fn crash_is_monotone_and_silences_sender() {
        let s = scenario(3, 2, &[One, Zero, One], vec![(2, 1, vec![3])]);
        let run = generate_run(&s, ExchangeKind::Counting).unwrap();
        for time in 1..=s.config.horizon {
            assert!(run.state(AgentId(2), time).is_crashed());
        }
        // After its crash round the delivery matrix rows are empty.
        for round in 2..=s.config.horizon {
            for receiver in 1..=3 {
                assert!(!run.deliveries[round - 1].delivered(AgentId(2), AgentId(receiver)));
            }
        }
        // Round 1 partial delivery reached agent 3 only.
        assert!(run.deliveries[0].delivered(AgentId(2), AgentId(3)));
        assert!(!run.deliveries[0].delivered(AgentId(2), AgentId(1)));
        // Missing counts: agent 1 heard only agent 3; agent 3 heard both.
        match run.state(AgentId(1), 1) {
            LocalState::Counting(CountState { missing, .. }) => assert_eq!(*missing, 1),
            other => panic!("unexpected state {other:?}"),
        }
        match run.state(AgentId(3), 1) {
            LocalState::Counting(CountState { missing, .. }) => assert_eq!(*missing, 0),
            other => panic!("unexpected state {other:?}"),
        }
    }

    #[test]
    fn nonfailed_set_tracks_crash_rounds() {
        let s = scenario(4, 3, &[Zero, One, Zero, One], vec![(1, 2, vec![]), (4, 1, vec![2])]);
        let run = generate_run(&s, ExchangeKind::Flood).unwrap();
        let n_at = |time: usize| run.nonfailed(time).map(|a| a.0).collect::<Vec<_>>();
        assert_eq!(n_at(0), vec![1, 2, 3]
            .into_iter()
            .chain([4])
            .collect::<Vec<_>>());
        assert_eq!(n_at(1), vec![1, 2, 3]);
        assert_eq!(n_at(2), vec![2, 3]);
        for time in 0..=s.config.horizon {
            for agent in 1..=4 {
                assert_eq!(
                    run.is_nonfailed(AgentId(agent), time),
                    !s.pattern.crashed_at(AgentId(agent), time)
                );
            }
        }
    }

    #[test]
    fn clean_round_detection() {
        // Round 1 is dirty (partial delivery), round 2 is clean.
        let s = scenario(3, 2, &[Zero, One, Zero], vec![(2, 1, vec![1])]);
        let run = generate_run(&s, ExchangeKind::Flood).unwrap();
        assert!(!run.is_clean_round(1));
        assert!(run.is_clean_round(2));
        assert!(!run.clean_by(0));
        assert!(!run.clean_by(1));
        assert!(run.clean_by(2));

        // Failure-free: round 1 is clean.
        let s = scenario(3, 1, &[Zero, One, One], vec![]);
        let run = generate_run(&s, ExchangeKind::Flood).unwrap();
        assert!(run.is_clean_round(1));
        assert!(run.clean_by(1));
    }

    #[test]
    fn vectorized_agents_go_silent_after_learning_everything() {
        let s = scenario(3, 1, &[Zero, One, One], vec![]);
        let run = generate_run(&s, ExchangeKind::Vectorized).unwrap();
        // After round 1 everyone knows everything; round 2 messages are all
        // absent, and states stop changing apart from the clock.
        for agent in 1..=3 {
            match run.state(AgentId(agent), 2) {
                LocalState::Vectorized(v) => {
                    assert_eq!(v.unknown_count(), 0);
                    assert!(v.fresh.is_empty());
                }
                other => panic!("unexpected state {other:?}"),
            }
        }
    }

    #[test]
    fn fullinfo_round_records_have_n_minus_one_slots() {
        let s = scenario(3, 1, &[Zero, One, Zero], vec![(2, 1, vec![1])]);
        let run = generate_run(&s, ExchangeKind::FullInfo).unwrap();
        match run.state(AgentId(3), 1) {
            LocalState::FullInfo(f) => {
                assert_eq!(f.rounds.len(), 1);
                assert_eq!(f.rounds[0].len(), 2);
                assert!(f.rounds[0][&AgentId(1)].is_some());
                assert!(f.rounds[0][&AgentId(2)].is_none()); // silent toward 3
            }
            other => panic!("unexpected state {other:?}"),
        }
    }
}
