//! Cross-protocol decision-time comparison and the canonical CSV rows.

use crate::model::{ExchangeKind, Value};
use serde::Serialize;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AnalysisError {
    #[error("decision-time tables cover different scenario sets ({left} vs {right} runs)")]
    MismatchedScenarios { left: usize, right: usize },
}

/// One row of the canonical per-scenario CSV.
#[derive(Clone, Debug, Serialize)]
pub struct ScenarioOutcome {
    pub scenario_id: u64,
    pub n: usize,
    pub t: usize,
    pub num_faulty: usize,
    pub exchange: ExchangeKind,
    pub first_decision_round: Option<usize>,
    pub decision_value: Option<Value>,
    pub simultaneous: bool,
    pub waste: Option<usize>,
    pub fullinfo_ck_round: Option<usize>,
}

pub const CSV_HEADER: &str = "scenario_id,n,t,num_faulty,exchange,first_decision_round,decision_value,simultaneous,waste,fullinfo_ck_round";

impl ScenarioOutcome {
    pub fn csv_row(&self) -> String {
        fn opt<T: std::fmt::Display>(v: &Option<T>) -> String {
            v.as_ref().map(|x| x.to_string()).unwrap_or_default()
        }
        let mut row = String::new();
        let _ = write!(
            row,
            "{},{},{},{},{},{},{},{},{},{}",
            self.scenario_id,
            self.n,
            self.t,
            self.num_faulty,
            self.exchange,
            opt(&self.first_decision_round),
            opt(&self.decision_value),
            self.simultaneous,
            opt(&self.waste),
            opt(&self.fullinfo_ck_round),
        );
        row
    }
}

/// First-decision rounds of one exchange over a scenario set.
pub struct DecisionTimes {
    pub kind: ExchangeKind,
    pub first_round: Vec<Option<usize>>,
}

/// Pairwise strictly-earlier counts over corresponding runs.
#[derive(Clone, Debug, Serialize)]
pub struct ComparisonTable {
    pub kinds: Vec<ExchangeKind>,
    pub scenarios: usize,
    /// `earlier[a][b]`: scenarios where `kinds[a]` first-decides strictly
    /// before `kinds[b]`.
    pub earlier: Vec<Vec<u64>>,
}

impl ComparisonTable {
    pub fn earlier_count(&self, a: ExchangeKind, b: ExchangeKind) -> u64 {
        let ia = self.kinds.iter().position(|k| *k == a).expect("kind in table");
        let ib = self.kinds.iter().position(|k| *k == b).expect("kind in table");
        self.earlier[ia][ib]
    }

    pub fn render(&self) -> String {
        let mut out = String::from("strictly-earlier decision counts (row beats column):\n");
        let _ = write!(out, "{:>14}", "");
        for k in &self.kinds {
            let _ = write!(out, "{:>14}", k.to_string());
        }
        out.push('\n');
        for (i, k) in self.kinds.iter().enumerate() {
            let _ = write!(out, "{:>14}", k.to_string());
            for j in 0..self.kinds.len() {
                let _ = write!(out, "{:>14}", self.earlier[i][j]);
            }
            out.push('\n');
        }
        out
    }
}

/// Count, for every ordered pair of exchanges, the scenarios where one
/// first-decides strictly earlier than the other. All tables must cover
/// the same scenario enumeration.
pub fn compare_decision_times(
    tables: &[DecisionTimes],
) -> Result<ComparisonTable, AnalysisError> {
    let scenarios = tables.first().map_or(0, |t| t.first_round.len());
    for table in tables {
        if table.first_round.len() != scenarios {
            return Err(AnalysisError::MismatchedScenarios {
                left: scenarios,
                right: table.first_round.len(),
            });
        }
    }
    let mut earlier = vec![vec![0u64; tables.len()]; tables.len()];
    for run in 0..scenarios {
        for (ia, a) in tables.iter().enumerate() {
            for (ib, b) in tables.iter().enumerate() {
                if ia == ib {
                    continue;
                }
                match (a.first_round[run], b.first_round[run]) {
                    (Some(ra), Some(rb)) if ra < rb => earlier[ia][ib] += 1,
                    (Some(_), None) => earlier[ia][ib] += 1,
                    _ => {}
                }
            }
        }
    }
    Ok(ComparisonTable {
        kinds: tables.iter().map(|t| t.kind).collect(),
        scenarios,
        earlier,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_row_formats_empty_optionals() {
        let outcome = ScenarioOutcome {
            scenario_id: 3,
            n: 3,
            t: 1,
            num_faulty: 1,
            exchange: ExchangeKind::Flood,
            first_decision_round: Some(2),
            decision_value: Some(Value::Zero),
            simultaneous: true,
            waste: None,
            fullinfo_ck_round: None,
        };
        assert_eq!(outcome.csv_row(), "3,3,1,1,flood,2,0,true,,");
    }

    #[test]
    fn earlier_counts() {
        let tables = vec![
            DecisionTimes {
                kind: ExchangeKind::Counting,
                first_round: vec![Some(1), Some(2), Some(2)],
            },
            DecisionTimes {
                kind: ExchangeKind::Flood,
                first_round: vec![Some(3), Some(2), Some(3)],
            },
        ];
        let table = compare_decision_times(&tables).unwrap();
        assert_eq!(table.earlier_count(ExchangeKind::Counting, ExchangeKind::Flood), 2);
        assert_eq!(table.earlier_count(ExchangeKind::Flood, ExchangeKind::Counting), 0);
    }

    #[test]
    fn mismatched_tables_rejected() {
        let tables = vec![
            DecisionTimes {
                kind: ExchangeKind::Counting,
                first_round: vec![Some(1)],
            },
            DecisionTimes {
                kind: ExchangeKind::Flood,
                first_round: vec![Some(1), Some(2)],
            },
        ];
        assert_eq!(
            compare_decision_times(&tables).unwrap_err(),
            AnalysisError::MismatchedScenarios { left: 1, right: 2 }
        );
    }
}
