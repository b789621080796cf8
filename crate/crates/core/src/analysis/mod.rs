//! Cross-protocol experiments: decision-time extraction and comparison,
//! agreement auditing, the waste oracle, and resource measurement.

mod audit;
mod compare;
mod resources;
mod waste;

pub use audit::{audit_sba, audit_space, AuditReport, DecisionRecord, Violation};
pub use compare::{
    compare_decision_times, AnalysisError, ComparisonTable, DecisionTimes, ScenarioOutcome,
    CSV_HEADER,
};
pub use resources::{measure_resources, ResourceRow, RESOURCE_CSV_HEADER};
pub use waste::{check_sendwaste_vs_dm, compute_waste, waste_table, DmComparison, WasteReport, WasteTable};
