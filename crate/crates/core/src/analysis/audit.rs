//! Decision records and the agreement audit.

use crate::epistemics::PointSpace;
use crate::model::{Action, ExchangeKind, Run, SystemConfig, Value, ValueSet};
use crate::exchanges::LocalState;
use serde::Serialize;

/// Per run and protocol: which rule fired where, plus the derived
/// first-decision summary used in reports.
#[derive(Clone, Debug, Serialize)]
pub struct DecisionRecord {
    pub scenario_id: u64,
    pub kind: ExchangeKind,
    /// `firings[time][agent]`: the fired value, `None` for noop or crashed.
    pub firings: Vec<Vec<Option<Value>>>,
    /// Live-agent bitmask per time.
    pub live: Vec<u16>,
    pub init_values: ValueSet,
    /// All live deciders share one first round.
    pub simultaneous: bool,
    /// Set iff every firing carries the same value.
    pub agreed_value: Option<Value>,
}

impl DecisionRecord {
    pub fn from_run(run: &Run, scenario_id: u64) -> Self {
        Self::from_run_with_rule(run, scenario_id, crate::exchanges::decide)
    }

    /// Extract a record using an arbitrary decision rule — the hook the
    /// audit tests use to show violations are actually detectable.
    pub fn from_run_with_rule(
        run: &Run,
        scenario_id: u64,
        rule: impl Fn(&LocalState, &SystemConfig) -> Action,
    ) -> Self {
        let config = run.config();
        let mut firings = Vec::with_capacity(config.horizon + 1);
        let mut live = Vec::with_capacity(config.horizon + 1);
        for time in 0..=config.horizon {
            let mut mask = 0u16;
            let row: Vec<Option<Value>> = config
                .agents()
                .map(|agent| {
                    let state = run.state(agent, time);
                    if state.is_crashed() {
                        None
                    } else {
                        mask |= 1 << agent.index();
                        rule(state, config).decided_value()
                    }
                })
                .collect();
            firings.push(row);
            live.push(mask);
        }
        let init_values: ValueSet = run.scenario.init.iter().copied().collect();
        Self::assemble(scenario_id, run.kind, firings, live, init_values)
    }

    pub(crate) fn from_space(space: &PointSpace, run: usize) -> Self {
        let config = *space.config();
        let mut firings = Vec::with_capacity(config.horizon + 1);
        let mut live = Vec::with_capacity(config.horizon + 1);
        for time in 0..=config.horizon {
            let mut mask = 0u16;
            let row: Vec<Option<Value>> = config
                .agents()
                .map(|agent| {
                    if !space.is_live(run, agent, time) {
                        return None;
                    }
                    mask |= 1 << agent.index();
                    space
                        .rule_action(run, agent, time)
                        .and_then(Action::decided_value)
                })
                .collect();
            firings.push(row);
            live.push(mask);
        }
        let init_values: ValueSet = Value::ALL
            .into_iter()
            .filter(|v| space.has_initial_value(run, *v))
            .collect();
        Self::assemble(run as u64, space.kind(), firings, live, init_values)
    }

    fn assemble(
        scenario_id: u64,
        kind: ExchangeKind,
        firings: Vec<Vec<Option<Value>>>,
        live: Vec<u16>,
        init_values: ValueSet,
    ) -> Self {
        let mut first_rounds = std::collections::BTreeSet::new();
        let mut values = ValueSet::empty();
        let agents = firings[0].len();
        for agent_idx in 0..agents {
            if let Some(time) = (0..firings.len())
                .find(|&m| firings[m][agent_idx].is_some())
            {
                first_rounds.insert(time);
            }
        }
        for row in &firings {
            for fired in row.iter().flatten() {
                values.insert(*fired);
            }
        }
        DecisionRecord {
            scenario_id,
            kind,
            firings,
            live,
            init_values,
            simultaneous: first_rounds.len() <= 1,
            agreed_value: if values.len() == 1 { values.min() } else { None },
        }
    }

    /// Per-agent first firing (round, value).
    pub fn first_decisions(&self) -> Vec<Option<(usize, Value)>> {
        let agents = self.firings[0].len();
        (0..agents)
            .map(|agent_idx| {
                (0..self.firings.len()).find_map(|m| {
                    self.firings[m][agent_idx].map(|v| (m, v))
                })
            })
            .collect()
    }

    /// Run-level first decision: the earliest firing by any live agent.
    pub fn first_decision(&self) -> Option<(usize, Value)> {
        for (m, row) in self.firings.iter().enumerate() {
            if let Some(v) = row.iter().flatten().next() {
                return Some((m, *v));
            }
        }
        None
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Violation {
    pub scenario_id: u64,
    pub category: &'static str,
    pub detail: String,
}

/// Violation counts per property over a scenario set; self-agreement
/// violations (one agent, two values) are also included in the agreement
/// count.
#[derive(Clone, Debug, Default, Serialize)]
pub struct AuditReport {
    pub runs_audited: u64,
    pub agreement: u64,
    pub self_agreement: u64,
    pub validity: u64,
    pub simultaneity: u64,
    pub termination: u64,
    pub sample: Vec<Violation>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.agreement == 0
            && self.self_agreement == 0
            && self.validity == 0
            && self.simultaneity == 0
            && self.termination == 0
    }

    pub fn total_violations(&self) -> u64 {
        self.agreement + self.validity + self.simultaneity + self.termination
    }
}

const SAMPLE_LIMIT: usize = 25;

/// Audit a stream of decision records against the simultaneous-agreement
/// specification. Violations are report content, not errors.
pub fn audit_sba(records: impl Iterator<Item = DecisionRecord>) -> AuditReport {
    let mut report = AuditReport::default();
    for record in records {
        report.runs_audited += 1;
        audit_one(&record, &mut report);
    }
    report
}

/// Audit every run of an exhaustively built space.
pub fn audit_space(space: &PointSpace) -> AuditReport {
    audit_sba((0..space.num_runs()).map(|run| DecisionRecord::from_space(space, run)))
}

fn audit_one(record: &DecisionRecord, report: &mut AuditReport) {
    let times = record.firings.len();
    let agents = record.firings[0].len();
    let note = |report: &mut AuditReport, category: &'static str, detail: String| {
        if report.sample.len() < SAMPLE_LIMIT {
            report.sample.push(Violation {
                scenario_id: record.scenario_id,
                category,
                detail,
            });
        }
    };

    // Agreement and self-agreement: all firings in a run carry one value.
    let mut first_fired: Option<(usize, usize, Value)> = None;
    let mut agreement_broken = false;
    let mut self_agreement_broken = false;
    let mut per_agent_value: Vec<Option<Value>> = vec![None; agents];
    for m in 0..times {
        for a in 0..agents {
            let Some(v) = record.firings[m][a] else {
                continue;
            };
            match per_agent_value[a] {
                None => per_agent_value[a] = Some(v),
                Some(prev) if prev != v => self_agreement_broken = true,
                Some(_) => {}
            }
            match first_fired {
                None => first_fired = Some((m, a, v)),
                Some((_, _, w)) if w != v => agreement_broken = true,
                Some(_) => {}
            }
            // Validity: the fired value must be someone's initial value.
            if !record.init_values.contains(v) {
                report.validity += 1;
                note(
                    report,
                    "validity",
                    format!("agent {} decided {v} at time {m}, not an initial value", a + 1),
                );
            }
        }
    }
    if agreement_broken {
        report.agreement += 1;
        note(report, "agreement", "two firings with different values".into());
    }
    if self_agreement_broken {
        report.self_agreement += 1;
        note(report, "self-agreement", "one agent fired two values".into());
    }

    // Simultaneity, round by round: when anyone live fires, everyone live
    // fires.
    'outer: for m in 0..times {
        let mut fired = false;
        let mut silent = false;
        for a in 0..agents {
            if record.live[m] & (1 << a) == 0 {
                continue;
            }
            if record.firings[m][a].is_some() {
                fired = true;
            } else {
                silent = true;
            }
        }
        if fired && silent {
            report.simultaneity += 1;
            note(
                report,
                "simultaneity",
                format!("round {m}: some live agents fired, others did not"),
            );
            break 'outer;
        }
    }

    // Termination: agents alive at the horizon must have decided by then.
    let last = times - 1;
    for a in 0..agents {
        if record.live[last] & (1 << a) == 0 {
            continue;
        }
        if (0..times).all(|m| record.firings[m][a].is_none()) {
            report.termination += 1;
            note(
                report,
                "termination",
                format!("agent {} never decided within the horizon", a + 1),
            );
        }
    }
}
