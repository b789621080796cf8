//! One-stop verification of a (n, t) configuration: builds the exhaustive
//! point space of each selected exchange, machine-checks the
//! knowledge-based-program equivalence, the agreement properties and the
//! stopping-condition theorems, and assembles a serializable report.
//!
//! Spaces are built one at a time and dropped as soon as their results are
//! extracted; only small per-run tables and the memoized common-knowledge
//! slices survive across phases.

use crate::analysis::{
    audit_space, check_sendwaste_vs_dm, waste_table, AuditReport, DmComparison,
};
use crate::epistemics::{
    check_counting_decision_formula, check_flood_onset, check_information_order,
    check_kb_equivalence, check_sendwaste_theorem, check_vectorized_theorem, FormulaCheck,
    IdTable, InfoOrderCheck, KbEquivalence, OnsetCheck, PointSpace,
};
use crate::model::{
    generate_run, ExchangeKind, ModelError, ScenarioStream, SystemConfig, Value,
};
use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;

/// Default ceiling on exhaustive scenario counts.
pub const DEFAULT_CAP: u128 = 5_000_000;

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub cap: u128,
    /// Limited exchanges to verify.
    pub kinds: Vec<ExchangeKind>,
    /// Run the full-information-dependent checks (waste identity,
    /// SendWaste-versus-optimum gap, common-knowledge transfer).
    pub full_checks: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            cap: DEFAULT_CAP,
            kinds: ExchangeKind::LIMITED.to_vec(),
            full_checks: true,
        }
    }
}

/// Kind-specific stopping-condition check outcome.
#[derive(Clone, Debug, Serialize)]
#[serde(tag = "theorem", rename_all = "kebab-case")]
pub enum TheoremOutcome {
    /// Common knowledge first appears at exactly `min(t+1, n-1)`.
    FloodOnset(OnsetCheck),
    /// First decision equals `min(bound, first round a live agent heard
    /// nobody)`.
    CountingFormula(OnsetCheck),
    /// First decisions coincide with plain Counting on every scenario.
    PerfectRecallMatchesCounting { runs: usize, differing: u64 },
    /// Common knowledge iff `m > bound - max(1, beta_i)`, per live agent.
    /// The printed inequality misfires in initial states whenever
    /// `t + 1 < n - 1` (beta is n-1 before any exchange); those time-zero
    /// points are counted separately and do not fail verification.
    Vectorized(FormulaCheck),
    /// Common knowledge iff `m >= bound - d_N`.
    SendWaste(FormulaCheck),
}

impl TheoremOutcome {
    pub fn passed(&self) -> bool {
        match self {
            TheoremOutcome::FloodOnset(c) => c.passed(),
            TheoremOutcome::CountingFormula(c) => c.passed(),
            TheoremOutcome::PerfectRecallMatchesCounting { differing, .. } => *differing == 0,
            TheoremOutcome::Vectorized(c) => c.mismatches_after_round_one == 0,
            TheoremOutcome::SendWaste(c) => c.mismatches == 0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExchangeVerification {
    pub exchange: ExchangeKind,
    pub kb_equivalence: KbEquivalence,
    pub audit: AuditReport,
    pub theorem: TheoremOutcome,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CleanLemmaCheck {
    pub runs_checked: u64,
    pub violations: u64,
}

impl CleanLemmaCheck {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Full verification outcome for one (n, t).
#[derive(Clone, Debug, Serialize)]
pub struct SpaceVerification {
    pub n: usize,
    pub t: usize,
    pub horizon: usize,
    pub scenario_count: usize,
    pub point_count: usize,
    pub exchanges: Vec<ExchangeVerification>,
    pub information_order: Vec<InfoOrderCheck>,
    pub clean_round_lemma: Option<CleanLemmaCheck>,
    pub waste_identity_violations: Option<u64>,
    pub dm_comparison: Option<DmComparison>,
    pub ck_transfer_violations: Option<u64>,
    pub passed: bool,
}

/// Artifacts of one verified exchange that later phases reuse.
pub struct ExchangeArtifacts {
    pub first_decisions: Vec<Option<(usize, Value)>>,
    /// Per time: the `C_N(exists v)` slice for v = 0, 1.
    pub ck_slices: [Vec<Arc<Vec<bool>>>; 2],
}

/// Verify one configuration. Returns the report plus, for reuse by
/// comparisons, the per-exchange first decisions.
pub fn verify_space(
    config: &SystemConfig,
    options: &VerifyOptions,
) -> Result<SpaceVerification, ModelError> {
    use crate::epistemics::Formula;

    let mut exchanges = Vec::new();
    let mut information_order = Vec::new();
    let mut artifacts: Vec<(ExchangeKind, ExchangeArtifacts)> = Vec::new();
    let mut id_tables: Vec<(ExchangeKind, IdTable)> = Vec::new();
    let mut scenario_count = 0;
    let mut point_count = 0;

    let wants = |kind: ExchangeKind| options.kinds.contains(&kind);
    let order = [
        ExchangeKind::Flood,
        ExchangeKind::Counting,
        ExchangeKind::CountingPr,
        ExchangeKind::Vectorized,
        ExchangeKind::SendWaste,
    ];

    for kind in order {
        if !wants(kind) {
            continue;
        }
        let space = PointSpace::build(config, kind, options.cap)?;
        scenario_count = space.num_runs();
        point_count = space.num_points();
        let kb_equivalence = check_kb_equivalence(&space);
        let audit = audit_space(&space);
        let theorem = match kind {
            ExchangeKind::Flood => TheoremOutcome::FloodOnset(check_flood_onset(&space)),
            ExchangeKind::Counting => {
                TheoremOutcome::CountingFormula(check_counting_decision_formula(&space))
            }
            ExchangeKind::CountingPr => {
                let firsts = space.first_decisions();
                let differing = artifacts
                    .iter()
                    .find(|(k, _)| *k == ExchangeKind::Counting)
                    .map(|(_, a)| {
                        firsts
                            .iter()
                            .zip(a.first_decisions.iter())
                            .filter(|(pr, c)| {
                                pr.map(|(round, _)| round) != c.map(|(round, _)| round)
                            })
                            .count() as u64
                    })
                    .unwrap_or(0);
                TheoremOutcome::PerfectRecallMatchesCounting {
                    runs: space.num_runs(),
                    differing,
                }
            }
            ExchangeKind::Vectorized => {
                TheoremOutcome::Vectorized(check_vectorized_theorem(&space))
            }
            ExchangeKind::SendWaste => {
                TheoremOutcome::SendWaste(check_sendwaste_theorem(&space))
            }
            ExchangeKind::FullInfo => unreachable!(),
        };

        let ck_slices = [
            (0..=config.horizon)
                .map(|m| space.eval_slice(&Formula::common(Formula::exists(Value::Zero)), m))
                .collect(),
            (0..=config.horizon)
                .map(|m| space.eval_slice(&Formula::common(Formula::exists(Value::One)), m))
                .collect(),
        ];
        artifacts.push((
            kind,
            ExchangeArtifacts {
                first_decisions: space.first_decisions(),
                ck_slices,
            },
        ));
        if matches!(
            kind,
            ExchangeKind::Flood | ExchangeKind::Counting | ExchangeKind::CountingPr
        ) {
            id_tables.push((kind, IdTable::of(&space)));
        }

        let passed = kb_equivalence.passed() && audit.passed() && theorem.passed();
        exchanges.push(ExchangeVerification {
            exchange: kind,
            kb_equivalence,
            audit,
            theorem,
            passed,
        });
        drop(space);

        // Partition-refinement chain, checked as soon as both ends exist.
        let table_of = |k: ExchangeKind, tables: &[(ExchangeKind, IdTable)]| {
            tables.iter().position(|(tk, _)| *tk == k)
        };
        if kind == ExchangeKind::Counting {
            if let (Some(c), Some(f)) = (
                table_of(ExchangeKind::Counting, &id_tables),
                table_of(ExchangeKind::Flood, &id_tables),
            ) {
                information_order
                    .push(check_information_order(&id_tables[c].1, &id_tables[f].1));
                let f = table_of(ExchangeKind::Flood, &id_tables).unwrap();
                id_tables.remove(f);
            }
        }
        if kind == ExchangeKind::CountingPr {
            if let (Some(pr), Some(c)) = (
                table_of(ExchangeKind::CountingPr, &id_tables),
                table_of(ExchangeKind::Counting, &id_tables),
            ) {
                information_order
                    .push(check_information_order(&id_tables[pr].1, &id_tables[c].1));
                id_tables.clear();
            }
        }
    }

    // Clean-round lemmas over FloodSet runs, streamed.
    let clean_round_lemma = if wants(ExchangeKind::Flood) {
        Some(check_clean_round_lemma(config, options.cap)?)
    } else {
        None
    };

    // Full-information phase: waste identity, the SendWaste gap, transfer.
    let mut waste_identity_violations = None;
    let mut dm_comparison = None;
    let mut ck_transfer_violations = None;
    if options.full_checks {
        let fullinfo = PointSpace::build(config, ExchangeKind::FullInfo, options.cap)?;
        scenario_count = fullinfo.num_runs();
        point_count = fullinfo.num_points();
        let table = waste_table(&fullinfo);
        waste_identity_violations = Some(table.identity_violations);
        if let Some((_, sendwaste)) = artifacts
            .iter()
            .find(|(k, _)| *k == ExchangeKind::SendWaste)
        {
            dm_comparison = Some(check_sendwaste_vs_dm(
                &table.onset,
                &sendwaste.first_decisions,
            ));
        }
        let full_ck: [Vec<Arc<Vec<bool>>>; 2] = [
            (0..=config.horizon)
                .map(|m| {
                    fullinfo
                        .eval_slice(&Formula::common(Formula::exists(Value::Zero)), m)
                })
                .collect(),
            (0..=config.horizon)
                .map(|m| {
                    fullinfo
                        .eval_slice(&Formula::common(Formula::exists(Value::One)), m)
                })
                .collect(),
        ];
        let mut transfer = 0u64;
        for (_, art) in &artifacts {
            for v in 0..2 {
                for m in 0..=config.horizon {
                    let lim = &art.ck_slices[v][m];
                    let full = &full_ck[v][m];
                    for run in 0..lim.len() {
                        if lim[run] && !full[run] {
                            transfer += 1;
                        }
                    }
                }
            }
        }
        ck_transfer_violations = Some(transfer);
    }

    let passed = exchanges.iter().all(|e| e.passed)
        && information_order.iter().all(|c| c.passed())
        && clean_round_lemma.as_ref().is_none_or(|c| c.passed())
        && waste_identity_violations.is_none_or(|v| v == 0)
        && dm_comparison.as_ref().is_none_or(|c| c.passed())
        && ck_transfer_violations.is_none_or(|v| v == 0);

    Ok(SpaceVerification {
        n: config.n,
        t: config.t,
        horizon: config.horizon,
        scenario_count,
        point_count,
        exchanges,
        information_order,
        clean_round_lemma,
        waste_identity_violations,
        dm_comparison,
        ck_transfer_violations,
        passed,
    })
}

/// Clean round implies value-set agreement among the live agents, and the
/// agreement persists to the horizon, on every FloodSet run.
pub fn check_clean_round_lemma(
    config: &SystemConfig,
    cap: u128,
) -> Result<CleanLemmaCheck, ModelError> {
    use crate::exchanges::LocalState;

    let stream = ScenarioStream::exhaustive(config, cap)?;
    let num_runs = stream.len();
    let chunk = 4096usize;
    let violations: u64 = (0..num_runs.div_ceil(chunk))
        .into_par_iter()
        .map(|ci| {
            let lo = ci * chunk;
            let hi = ((ci + 1) * chunk).min(num_runs);
            let mut bad = 0u64;
            for idx in lo..hi {
                let scenario = stream.get(idx as u128);
                let run = generate_run(&scenario, ExchangeKind::Flood)
                    .expect("enumerated scenarios are valid");
                let first_clean = (1..=config.horizon).find(|&m| run.is_clean_round(m));
                let Some(first_clean) = first_clean else {
                    continue;
                };
                for later in first_clean..=config.horizon {
                    let mut sets = run.nonfailed(later).map(|agent| {
                        match run.state(agent, later) {
                            LocalState::Flood(s) => s.seen,
                            _ => unreachable!("floodset run"),
                        }
                    });
                    let Some(first) = sets.next() else { continue };
                    if sets.any(|w| w != first) {
                        bad += 1;
                    }
                }
            }
            bad
        })
        .sum();
    Ok(CleanLemmaCheck {
        runs_checked: num_runs as u64,
        violations,
    })
}
