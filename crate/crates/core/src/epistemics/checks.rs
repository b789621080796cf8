//! Machine checks of the stopping-condition theorems and of the
//! knowledge-based-program equivalence, evaluated over whole point spaces.

use crate::model::{Action, ExchangeKind, Value};
use serde::Serialize;

use super::space::{decode_action, AuxData, Point, PointSpace, ACT_CRASHED};
use super::Formula;

const SAMPLE_LIMIT: usize = 25;

/// One disagreement between the standard rule and the knowledge-based
/// program.
#[derive(Clone, Debug, Serialize)]
pub struct KbMismatch {
    pub run: usize,
    pub time: usize,
    pub agent: usize,
    pub rule: String,
    pub kb: String,
}

/// Result of the rule-versus-knowledge-based-program comparison.
#[derive(Clone, Debug, Serialize)]
pub struct KbEquivalence {
    pub points_checked: u64,
    pub mismatches: u64,
    pub sample: Vec<KbMismatch>,
}

impl KbEquivalence {
    pub fn passed(&self) -> bool {
        self.mismatches == 0
    }
}

/// Compare the standard decision rule against the knowledge-based program
/// at every point with a live agent: both must fire together and with the
/// same value.
pub fn check_kb_equivalence(space: &PointSpace) -> KbEquivalence {
    assert!(
        space.kind() != ExchangeKind::FullInfo,
        "full information has no standard rule to compare"
    );
    let config = *space.config();
    let mut out = KbEquivalence {
        points_checked: 0,
        mismatches: 0,
        sample: Vec::new(),
    };
    for time in 0..=config.horizon {
        let ck0 = space.eval_slice(&Formula::common(Formula::exists(Value::Zero)), time);
        let ck1 = space.eval_slice(&Formula::common(Formula::exists(Value::One)), time);
        for agent in config.agents() {
            let k0 = space.knows_vector(agent, time, &ck0);
            let k1 = space.knows_vector(agent, time, &ck1);
            let actions = &space.actions.as_ref().expect("limited exchange")[time]
                [agent.index()];
            for run in 0..space.num_runs() {
                let code = actions[run];
                if code == ACT_CRASHED {
                    continue;
                }
                out.points_checked += 1;
                let rule = decode_action(code).expect("valid action code");
                let kb = if k0[run] {
                    Action::Decide(Value::Zero)
                } else if k1[run] {
                    Action::Decide(Value::One)
                } else {
                    Action::Noop
                };
                if rule != kb {
                    out.mismatches += 1;
                    if out.sample.len() < SAMPLE_LIMIT {
                        out.sample.push(KbMismatch {
                            run,
                            time,
                            agent: agent.0,
                            rule: rule.to_string(),
                            kb: kb.to_string(),
                        });
                    }
                }
            }
        }
    }
    out
}

/// Result of checking a common-knowledge onset or threshold formula.
#[derive(Clone, Debug, Serialize)]
pub struct OnsetCheck {
    pub expected_onset: usize,
    pub runs_checked: u64,
    pub violations: u64,
    pub sample: Vec<(usize, Option<usize>)>,
}

impl OnsetCheck {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// FloodSet theorem, both directions: common knowledge of some initial
/// value first appears at exactly `min(t+1, n-1)` in every run.
pub fn check_flood_onset(space: &PointSpace) -> OnsetCheck {
    let expected = space.config().decision_bound();
    let slices = space.common_knowledge_slices();
    let mut out = OnsetCheck {
        expected_onset: expected,
        runs_checked: space.num_runs() as u64,
        violations: 0,
        sample: Vec::new(),
    };
    for run in 0..space.num_runs() {
        let onset = (0..=space.config().horizon).find(|&m| slices[m][run]);
        if onset != Some(expected) {
            out.violations += 1;
            if out.sample.len() < SAMPLE_LIMIT {
                out.sample.push((run, onset));
            }
        }
    }
    out
}

/// Outcome of a per-point biconditional check of a theorem formula.
#[derive(Clone, Debug, Serialize)]
pub struct FormulaCheck {
    pub points_checked: u64,
    pub mismatches: u64,
    /// Mismatches at times >= 1 only.
    pub mismatches_after_round_one: u64,
    pub sample: Vec<FormulaMismatch>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FormulaMismatch {
    pub run: usize,
    pub time: usize,
    pub agent: Option<usize>,
    pub common_knowledge: bool,
    pub formula: bool,
}

impl FormulaCheck {
    fn record(&mut self, run: usize, time: usize, agent: Option<usize>, ck: bool, formula: bool) {
        self.points_checked += 1;
        if ck != formula {
            self.mismatches += 1;
            if time >= 1 {
                self.mismatches_after_round_one += 1;
            }
            if self.sample.len() < SAMPLE_LIMIT {
                self.sample.push(FormulaMismatch {
                    run,
                    time,
                    agent,
                    common_knowledge: ck,
                    formula,
                });
            }
        }
    }
}

/// Vectorized theorem: common knowledge at a point iff, for the live
/// agents' unknown-entry counts, `m > min(t+1, n-1) - max(1, beta_i)`.
/// Checked per live agent at every point.
pub fn check_vectorized_theorem(space: &PointSpace) -> FormulaCheck {
    assert_eq!(space.kind(), ExchangeKind::Vectorized);
    let AuxData::Vectorized { beta } = &space.aux else {
        unreachable!("vectorized spaces carry beta tables")
    };
    let bound = space.config().decision_bound() as i64;
    let slices = space.common_knowledge_slices();
    let mut out = FormulaCheck {
        points_checked: 0,
        mismatches: 0,
        mismatches_after_round_one: 0,
        sample: Vec::new(),
    };
    for time in 0..=space.config().horizon {
        let ck = &slices[time];
        for agent in space.config().agents() {
            let betas = &beta[time][agent.index()];
            for run in 0..space.num_runs() {
                if betas[run] == 255 {
                    continue; // crashed
                }
                let formula = (time as i64) > bound - (betas[run].max(1) as i64);
                out.record(run, time, Some(agent.0), ck[run], formula);
            }
        }
    }
    out
}

/// SendWaste theorem (a): common knowledge at a point iff
/// `m >= min(t+1, n-1) - d_N(r, m)`.
pub fn check_sendwaste_theorem(space: &PointSpace) -> FormulaCheck {
    assert_eq!(space.kind(), ExchangeKind::SendWaste);
    let AuxData::SendWaste { group_estimate } = &space.aux else {
        unreachable!("sendwaste spaces carry group estimates")
    };
    let bound = space.config().decision_bound() as i64;
    let slices = space.common_knowledge_slices();
    let mut out = FormulaCheck {
        points_checked: 0,
        mismatches: 0,
        mismatches_after_round_one: 0,
        sample: Vec::new(),
    };
    for time in 0..=space.config().horizon {
        let ck = &slices[time];
        let estimates = &group_estimate[time];
        for run in 0..space.num_runs() {
            let formula = (time as i64) >= bound - (estimates[run] as i64);
            out.record(run, time, None, ck[run], formula);
        }
    }
    out
}

/// Counting theorem at the run level: the first decision round equals
/// `min(min(t+1, n-1), first round in which a live agent heard nobody)`.
pub fn check_counting_decision_formula(space: &PointSpace) -> OnsetCheck {
    assert_eq!(space.kind(), ExchangeKind::Counting);
    let AuxData::Counting { first_all_silent } = &space.aux else {
        unreachable!("counting spaces carry silence tables")
    };
    let bound = space.config().decision_bound();
    let firsts = space.first_decisions();
    let mut out = OnsetCheck {
        expected_onset: bound,
        runs_checked: space.num_runs() as u64,
        violations: 0,
        sample: Vec::new(),
    };
    for run in 0..space.num_runs() {
        let expected = bound.min(first_all_silent[run] as usize);
        let actual = firsts[run].map(|(round, _)| round);
        if actual != Some(expected) {
            out.violations += 1;
            if out.sample.len() < SAMPLE_LIMIT {
                out.sample.push((run, actual));
            }
        }
    }
    out
}

/// Per-(agent, time) state ids of a space, retained for cross-space
/// partition comparisons after the space itself is dropped.
pub struct IdTable {
    pub kind: ExchangeKind,
    pub num_runs: usize,
    pub horizon: usize,
    /// `ids[time][agent][run]`.
    pub ids: Vec<Vec<Vec<u32>>>,
}

impl IdTable {
    pub fn of(space: &PointSpace) -> IdTable {
        IdTable {
            kind: space.kind(),
            num_runs: space.num_runs(),
            horizon: space.config().horizon,
            ids: space.state_ids.clone(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct InfoOrderCheck {
    pub finer: String,
    pub coarser: String,
    pub cells_checked: u64,
    pub violations: u64,
}

impl InfoOrderCheck {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Partition refinement: every indistinguishability cell of the finer
/// exchange must map into a single cell of the coarser one, per agent and
/// time, over corresponding runs.
pub fn check_information_order(finer: &IdTable, coarser: &IdTable) -> InfoOrderCheck {
    assert_eq!(finer.num_runs, coarser.num_runs);
    assert_eq!(finer.horizon, coarser.horizon);
    let mut out = InfoOrderCheck {
        finer: finer.kind.to_string(),
        coarser: coarser.kind.to_string(),
        cells_checked: 0,
        violations: 0,
    };
    for time in 0..=finer.horizon {
        for agent_idx in 0..finer.ids[time].len() {
            let fine = &finer.ids[time][agent_idx];
            let coarse = &coarser.ids[time][agent_idx];
            let cells = fine.iter().copied().max().map_or(0, |m| m as usize + 1);
            let mut image = vec![u32::MAX; cells];
            for run in 0..fine.len() {
                let f = fine[run] as usize;
                if image[f] == u32::MAX {
                    image[f] = coarse[run];
                    out.cells_checked += 1;
                } else if image[f] != coarse[run] {
                    out.violations += 1;
                }
            }
        }
    }
    out
}

/// Transfer of common knowledge of environment propositions: where a
/// limited exchange has `C_N(exists v)`, full information must have it at
/// the corresponding point. Returns the number of violating points.
pub fn check_ck_transfer(limited: &PointSpace, fullinfo: &PointSpace) -> u64 {
    assert_eq!(fullinfo.kind(), ExchangeKind::FullInfo);
    assert_eq!(limited.num_runs(), fullinfo.num_runs());
    let mut violations = 0;
    for v in Value::ALL {
        let phi = Formula::common(Formula::exists(v));
        for time in 0..=limited.config().horizon {
            let lim = limited.eval_slice(&phi, time);
            let full = fullinfo.eval_slice(&phi, time);
            for run in 0..limited.num_runs() {
                if lim[run] && !full[run] {
                    violations += 1;
                }
            }
        }
    }
    violations
}

/// First round at which the knowledge-based program fires for some live
/// agent, with the fired value; used in tests to cross-check the run-level
/// restatement of the equivalence.
pub fn kb_first_decision(space: &PointSpace, run: usize) -> Option<(usize, Value)> {
    for time in 0..=space.config().horizon {
        for agent in space.live_agents(run, time) {
            match space
                .eval_kb_program(Point { run, time }, agent)
                .expect("agent is live")
            {
                Action::Decide(v) => return Some((time, v)),
                Action::Noop => {}
            }
        }
    }
    None
}
