//! Semantics checks for the epistemic layer: the knowledge operators
//! against hand-derived facts on small spaces, the fixpoint against the
//! iterated everyone-knows chain, and the standard modal sanity laws.

use sba_core::epistemics::{
    check_ck_transfer, check_information_order, EpistemicsError, Formula, IdTable, Point,
    PointSpace,
};
use sba_core::model::{
    Action, AgentId, ExchangeKind, Scenario, SystemConfig, Value,
};

const CAP: u128 = 5_000_000;

fn space(n: usize, t: usize, kind: ExchangeKind) -> PointSpace {
    let config = SystemConfig::new(n, t).unwrap();
    PointSpace::build(&config, kind, CAP).unwrap()
}

/// Find the unique run whose scenario satisfies the predicate.
fn find_run(space: &PointSpace, pred: impl Fn(&Scenario) -> bool) -> usize {
    let matches: Vec<usize> = (0..space.num_runs())
        .filter(|&run| pred(&space.scenario(run)))
        .collect();
    assert_eq!(matches.len(), 1, "predicate must pin down one run");
    matches[0]
}

fn failure_free_with(init: &[u8]) -> impl Fn(&Scenario) -> bool + '_ {
    move |s: &Scenario| {
        s.pattern.faults.is_empty()
            && s.init.iter().map(|v| v.as_u8()).collect::<Vec<_>>() == init
    }
}

#[test]
fn two_agent_space_has_36_runs() {
    let space = space(2, 1, ExchangeKind::Flood);
    assert_eq!(space.num_runs(), 36);
    assert_eq!(space.num_points(), 36 * 3);
}

#[test]
fn own_value_is_known_but_peer_value_is_not_at_time_zero() {
    let space = space(2, 1, ExchangeKind::Flood);
    let run = find_run(&space, failure_free_with(&[0, 1]));
    let point = Point { run, time: 0 };
    // Agent 1 starts with 0: it knows a 0 exists but cannot know about 1,
    // since its time-0 cell contains the run where agent 2 also has 0.
    assert!(space.eval_knows(point, AgentId(1), &Formula::exists(Value::Zero)));
    assert!(!space.eval_knows(point, AgentId(1), &Formula::exists(Value::One)));
    assert!(space.eval_knows(point, AgentId(2), &Formula::exists(Value::One)));
    assert!(!space.eval_knows(point, AgentId(2), &Formula::exists(Value::Zero)));
}

#[test]
fn no_common_knowledge_at_time_zero_but_some_at_the_bound() {
    // n=2, t=1: min(t+1, n-1) = 1.
    let space = space(2, 1, ExchangeKind::Flood);
    let run = find_run(&space, failure_free_with(&[0, 1]));
    for v in Value::ALL {
        assert!(!space.eval_at(
            &Formula::common(Formula::exists(v)),
            Point { run, time: 0 }
        ));
    }
    let disjunction = Formula::common(Formula::exists(Value::Zero))
        .or(Formula::common(Formula::exists(Value::One)));
    assert!(space.eval_at(&disjunction, Point { run, time: 1 }));
    assert_eq!(space.ck_onset_time(run), Some(1));
}

#[test]
fn universally_true_formulas_are_common_knowledge() {
    let space = space(3, 1, ExchangeKind::Flood);
    let tautology = Formula::exists(Value::Zero).or(Formula::exists(Value::Zero).not());
    for time in 0..=space.config().horizon {
        let held = space.eval_common(time, &tautology);
        assert_eq!(held.len(), space.num_runs());
    }
}

#[test]
fn common_knowledge_equals_iterated_everyone_limit() {
    // C_N phi must equal the stable point of E_N^k phi; the chain is
    // guaranteed stationary after at most |points| steps.
    for (n, t) in [(2, 1), (3, 1)] {
        let space = space(n, t, ExchangeKind::Flood);
        for v in Value::ALL {
            for time in 0..=space.config().horizon {
                let common =
                    space.eval_slice(&Formula::common(Formula::exists(v)), time);
                let mut chain = Formula::everyone(Formula::exists(v));
                let mut current = space.eval_slice(&chain, time);
                for _ in 0..space.num_runs() {
                    chain = Formula::everyone(chain);
                    let next = space.eval_slice(&chain, time);
                    if next == current {
                        break;
                    }
                    current = next;
                }
                assert_eq!(*current, *common, "n={n} t={t} v={v:?} m={time}");
            }
        }
    }
}

#[test]
fn knowledge_axioms_hold() {
    let space = space(3, 1, ExchangeKind::Counting);
    let formulas = [
        Formula::exists(Value::Zero),
        Formula::exists(Value::One),
        Formula::Clean,
        Formula::exists(Value::Zero).and(Formula::Clean),
    ];
    for phi in &formulas {
        for time in 0..=space.config().horizon {
            let truth = space.eval_slice(phi, time);
            let common = space.eval_slice(&Formula::common(phi.clone()), time);
            let everyone = space.eval_slice(&Formula::everyone(phi.clone()), time);
            for run in 0..space.num_runs() {
                // C -> E.
                assert!(!common[run] || everyone[run]);
                for agent in space.live_agents(run, time) {
                    let knows =
                        space.eval_slice(&Formula::knows(agent, phi.clone()), time);
                    // E -> K_i for live agents; K_i -> truth (reflexivity).
                    assert!(!everyone[run] || knows[run]);
                    assert!(!knows[run] || truth[run]);
                }
            }
        }
    }
}

#[test]
fn crashed_agents_know_almost_nothing() {
    let space = space(2, 1, ExchangeKind::Flood);
    // Agent 2 crashes in round 1 delivering nothing; its crashed cell at
    // time 1 spans every crashed-2 point, including all-ones runs.
    let run = find_run(&space, |s| {
        s.init.iter().map(|v| v.as_u8()).collect::<Vec<_>>() == [0, 0]
            && s.pattern.crash_round(AgentId(2)) == Some(1)
            && s.pattern.faults[&AgentId(2)].delivered == 0
    });
    let point = Point { run, time: 1 };
    assert!(!space.eval_knows(point, AgentId(2), &Formula::exists(Value::Zero)));
    assert!(!space.eval_knows(point, AgentId(2), &Formula::exists(Value::One)));
    // The live agent still knows its own value exists.
    assert!(space.eval_knows(point, AgentId(1), &Formula::exists(Value::Zero)));
}

#[test]
fn clean_atom_tracks_failure_free_rounds() {
    let space = space(3, 2, ExchangeKind::Flood);
    let run = find_run(&space, failure_free_with(&[0, 1, 0]));
    assert!(!space.eval_at(&Formula::Clean, Point { run, time: 0 }));
    for m in 1..=space.config().horizon {
        assert!(space.eval_at(&Formula::Clean, Point { run, time: m }));
    }
}

#[test]
fn distributed_knowledge_of_silent_double_crash() {
    // Agents 3 and 4 crash in round 1 delivering nothing: at time 1 the
    // group jointly knows two agents have failed, even though each live
    // agent alone only misses two messages it cannot attribute.
    let space = space(4, 2, ExchangeKind::FullInfo);
    let run = find_run(&space, |s| {
        s.init.iter().map(|v| v.as_u8()).collect::<Vec<_>>() == [0, 1, 0, 1]
            && s.pattern.crash_round(AgentId(3)) == Some(1)
            && s.pattern.crash_round(AgentId(4)) == Some(1)
            && s.pattern.faults[&AgentId(3)].delivered == 0
            && s.pattern.faults[&AgentId(4)].delivered == 0
    });
    let point = Point { run, time: 1 };
    assert_eq!(
        space.eval_distributed(point, &Formula::AtLeastFailed(2)),
        Ok(true)
    );
    let kf: Vec<usize> = space.known_failures(1);
    assert_eq!(kf[run], 2);
    // At time 0 nothing has failed yet and nothing is jointly known.
    assert_eq!(space.known_failures(0)[run], 0);
}

#[test]
fn distributed_knowledge_collapses_to_k_when_alone() {
    let space = space(2, 1, ExchangeKind::Flood);
    for run in 0..space.num_runs() {
        let scenario = space.scenario(run);
        if scenario.pattern.crash_round(AgentId(2)) != Some(1) {
            continue;
        }
        let point = Point { run, time: 1 };
        for phi in [Formula::exists(Value::Zero), Formula::exists(Value::One)] {
            assert_eq!(
                space.eval_distributed(point, &phi).unwrap(),
                space.eval_knows(point, AgentId(1), &phi)
            );
        }
    }
}

#[test]
fn kb_program_on_failure_free_floodset() {
    let space = space(3, 2, ExchangeKind::Flood);
    let run = find_run(&space, failure_free_with(&[0, 1, 0]));
    for agent in [AgentId(1), AgentId(2), AgentId(3)] {
        assert_eq!(
            space.eval_kb_program(Point { run, time: 0 }, agent),
            Ok(Action::Noop)
        );
        assert_eq!(
            space.eval_kb_program(Point { run, time: 1 }, agent),
            Ok(Action::Noop)
        );
        // At the bound, decide the minimum initial value.
        assert_eq!(
            space.eval_kb_program(Point { run, time: 2 }, agent),
            Ok(Action::Decide(Value::Zero))
        );
    }
}

#[test]
fn kb_program_rejects_crashed_agents() {
    let space = space(2, 1, ExchangeKind::Flood);
    let run = find_run(&space, |s| {
        s.init.iter().map(|v| v.as_u8()).collect::<Vec<_>>() == [0, 0]
            && s.pattern.crash_round(AgentId(2)) == Some(1)
            && s.pattern.faults[&AgentId(2)].delivered == 0
    });
    assert_eq!(
        space.eval_kb_program(Point { run, time: 1 }, AgentId(2)),
        Err(EpistemicsError::CrashedAgent {
            agent: AgentId(2),
            run,
            time: 1
        })
    );
}

#[test]
fn fullinfo_onset_with_two_silent_crashes_is_two() {
    // Waste 1: the group jointly knows 2 failures after round 1, so the
    // full-information deadline min(3,3) - 1 = 2.
    let space = space(4, 2, ExchangeKind::FullInfo);
    let run = find_run(&space, |s| {
        s.init.iter().map(|v| v.as_u8()).collect::<Vec<_>>() == [0, 1, 0, 1]
            && s.pattern.crash_round(AgentId(3)) == Some(1)
            && s.pattern.crash_round(AgentId(4)) == Some(1)
            && s.pattern.faults[&AgentId(3)].delivered == 0
            && s.pattern.faults[&AgentId(4)].delivered == 0
    });
    assert_eq!(space.ck_onset_time(run), Some(2));
}

#[test]
fn sendwaste_first_decision_with_two_silent_crashes_is_two() {
    let space = space(4, 2, ExchangeKind::SendWaste);
    let run = find_run(&space, |s| {
        s.init.iter().map(|v| v.as_u8()).collect::<Vec<_>>() == [0, 1, 0, 1]
            && s.pattern.crash_round(AgentId(3)) == Some(1)
            && s.pattern.crash_round(AgentId(4)) == Some(1)
            && s.pattern.faults[&AgentId(3)].delivered == 0
            && s.pattern.faults[&AgentId(4)].delivered == 0
    });
    assert_eq!(space.first_decisions()[run], Some((2, Value::Zero)));
}

#[test]
fn known_failures_agrees_with_distributed_knowledge_oracle() {
    // Dual route: the joint minimum failure count must equal the largest
    // l <= t whose "at least l failed" atom is distributed knowledge.
    let space = space(3, 2, ExchangeKind::FullInfo);
    for time in 0..=space.config().horizon {
        let direct = space.known_failures(time);
        for run in 0..space.num_runs() {
            let via_dn = (0..=space.config().t)
                .filter(|&l| {
                    space
                        .eval_distributed(Point { run, time }, &Formula::AtLeastFailed(l))
                        .unwrap()
                })
                .max()
                .unwrap_or(0);
            assert_eq!(direct[run], via_dn, "run {run} time {time}");
        }
    }
}

#[test]
fn limited_common_knowledge_transfers_to_full_information() {
    let config = SystemConfig::new(3, 2).unwrap();
    let fullinfo = PointSpace::build(&config, ExchangeKind::FullInfo, CAP).unwrap();
    for kind in ExchangeKind::LIMITED {
        let limited = PointSpace::build(&config, kind, CAP).unwrap();
        assert_eq!(check_ck_transfer(&limited, &fullinfo), 0, "{kind}");
    }
}

#[test]
fn counting_variants_refine_floodset_partitions() {
    let config = SystemConfig::new(3, 2).unwrap();
    let flood = IdTable::of(&PointSpace::build(&config, ExchangeKind::Flood, CAP).unwrap());
    let count = IdTable::of(&PointSpace::build(&config, ExchangeKind::Counting, CAP).unwrap());
    let pr = IdTable::of(&PointSpace::build(&config, ExchangeKind::CountingPr, CAP).unwrap());
    assert!(check_information_order(&pr, &count).passed());
    assert!(check_information_order(&count, &flood).passed());
    // Full information refines everything.
    let full = IdTable::of(&PointSpace::build(&config, ExchangeKind::FullInfo, CAP).unwrap());
    assert!(check_information_order(&full, &flood).passed());
    assert!(check_information_order(&full, &count).passed());
}

#[test]
fn empty_group_is_impossible_in_valid_spaces() {
    let space = space(3, 2, ExchangeKind::Flood);
    for time in 0..=space.config().horizon {
        for run in 0..space.num_runs() {
            assert!(space.live_agents(run, time).next().is_some());
        }
    }
}
