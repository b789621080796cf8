//! Subcommand implementations.

use crate::{CompareArgs, ExchangeArg, ModeArg, SimulateArgs, TraceArgs, VerifyArgs};
use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use sba_core::analysis::{
    compare_decision_times, measure_resources, waste_table, DecisionRecord, DecisionTimes,
    ScenarioOutcome, CSV_HEADER, RESOURCE_CSV_HEADER,
};
use sba_core::epistemics::PointSpace;
use sba_core::model::{
    generate_run, EnumerationMode, ExchangeKind, Scenario, ScenarioFile, ScenarioStream,
    SystemConfig, Value,
};
use sba_core::verification::{verify_space, SpaceVerification, TheoremOutcome, VerifyOptions};
use serde::Serialize;
use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

fn build_config(n: usize, t: usize, horizon: Option<usize>) -> Result<SystemConfig> {
    match horizon {
        Some(h) => SystemConfig::with_horizon(n, t, h),
        None => SystemConfig::new(n, t),
    }
    .map_err(anyhow::Error::from)
}

#[derive(Serialize)]
struct VerifyReport {
    cap: u64,
    spaces: Vec<SpaceVerification>,
    all_passed: bool,
}

pub fn verify(args: VerifyArgs) -> Result<ExitCode> {
    let cap = crate::effective_cap(args.cap);
    let configs: Vec<SystemConfig> = match (args.n, args.t) {
        (Some(n), Some(t)) => vec![build_config(n, t, args.horizon)?],
        (Some(n), None) => (1..n)
            .map(|t| build_config(n, t, args.horizon))
            .collect::<Result<_>>()?,
        (None, Some(_)) => bail!("--t requires --n"),
        (None, None) => {
            let mut configs = Vec::new();
            for n in 2..=4 {
                for t in 1..n {
                    configs.push(build_config(n, t, args.horizon)?);
                }
            }
            configs
        }
    };

    let options = VerifyOptions {
        cap,
        kinds: args.exchange.limited(),
        full_checks: args.exchange == ExchangeArg::All,
    };

    let mut spaces = Vec::new();
    for config in &configs {
        let report = verify_space(config, &options)?;
        print_space_summary(&report);
        spaces.push(report);
    }
    let all_passed = spaces.iter().all(|s| s.passed);
    println!(
        "verify: {}",
        if all_passed { "all checks passed" } else { "FAILURES FOUND" }
    );

    if let Some(path) = &args.out {
        let report = VerifyReport {
            cap: cap.try_into().unwrap_or(u64::MAX),
            spaces,
            all_passed,
        };
        std::fs::write(path, serde_json::to_string_pretty(&report)?)
            .with_context(|| format!("writing {}", path.display()))?;
        println!("report written to {}", path.display());
    }

    Ok(if all_passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn print_space_summary(report: &SpaceVerification) {
    println!(
        "n={} t={} horizon={}: {} scenarios, {} points — {}",
        report.n,
        report.t,
        report.horizon,
        report.scenario_count,
        report.point_count,
        if report.passed { "PASS" } else { "FAIL" }
    );
    for exchange in &report.exchanges {
        let theorem_note = match &exchange.theorem {
            TheoremOutcome::Vectorized(check) if check.mismatches > 0 => format!(
                " (printed formula misfires at {} time-0 points; 0 from round 1 on)",
                check.mismatches - check.mismatches_after_round_one
            ),
            _ => String::new(),
        };
        println!(
            "  {:<12} kb mismatches {:>3}  audit violations {:>3}  theorem {}{}",
            exchange.exchange.to_string(),
            exchange.kb_equivalence.mismatches,
            exchange.audit.total_violations() + exchange.audit.self_agreement,
            if exchange.theorem.passed() { "ok" } else { "VIOLATED" },
            theorem_note
        );
    }
    if let Some(dm) = &report.dm_comparison {
        println!(
            "  sendwaste vs full-information onset: gap 0 on {} runs, gap 1 on {} runs, {} violations",
            dm.gap_zero, dm.gap_one, dm.violations
        );
    }
    if let Some(violations) = report.waste_identity_violations {
        println!("  waste identity violations: {violations}");
    }
}

/// A scenario set shared across exchanges so runs correspond.
enum ScenarioSet {
    Exhaustive(ScenarioStream),
    Sampled(Vec<Scenario>),
}

impl ScenarioSet {
    fn open(config: &SystemConfig, mode: ModeArg, samples: usize, seed: u64, cap: u128) -> Result<Self> {
        Ok(match mode {
            ModeArg::Exhaustive => {
                ScenarioSet::Exhaustive(ScenarioStream::exhaustive(config, cap)?)
            }
            ModeArg::Sampled => ScenarioSet::Sampled(
                ScenarioStream::sampled(config, samples, seed)?.collect(),
            ),
        })
    }

    fn len(&self) -> usize {
        match self {
            ScenarioSet::Exhaustive(stream) => stream.len(),
            ScenarioSet::Sampled(scenarios) => scenarios.len(),
        }
    }

    fn get(&self, index: usize) -> Scenario {
        match self {
            ScenarioSet::Exhaustive(stream) => stream.get(index as u128),
            ScenarioSet::Sampled(scenarios) => scenarios[index].clone(),
        }
    }
}

struct RunSummary {
    first_decision: Option<(usize, Value)>,
    simultaneous: bool,
    num_faulty: usize,
}

fn decision_summaries(set: &ScenarioSet, kind: ExchangeKind) -> Vec<RunSummary> {
    let len = set.len();
    let chunk = 2048usize;
    (0..len.div_ceil(chunk))
        .into_par_iter()
        .flat_map_iter(|ci| {
            let lo = ci * chunk;
            let hi = ((ci + 1) * chunk).min(len);
            (lo..hi).map(|idx| {
                let scenario = set.get(idx);
                let run = generate_run(&scenario, kind).expect("scenario sets are valid");
                let record = DecisionRecord::from_run(&run, idx as u64);
                RunSummary {
                    first_decision: record.first_decision(),
                    simultaneous: record.simultaneous,
                    num_faulty: scenario.pattern.num_faulty(),
                }
            })
        })
        .collect()
}

fn write_lines(path: Option<&Path>, lines: &[String]) -> Result<()> {
    match path {
        Some(path) => {
            let mut file = std::fs::File::create(path)
                .with_context(|| format!("writing {}", path.display()))?;
            for line in lines {
                writeln!(file, "{line}")?;
            }
        }
        None => {
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            for line in lines {
                if let Err(err) = writeln!(out, "{line}") {
                    if err.kind() == std::io::ErrorKind::BrokenPipe {
                        return Ok(()); // downstream closed the pipe
                    }
                    return Err(err.into());
                }
            }
        }
    }
    Ok(())
}

fn outcome_rows(
    config: &SystemConfig,
    set: &ScenarioSet,
    kinds: &[ExchangeKind],
    waste: Option<&(Vec<usize>, Vec<usize>)>,
) -> (Vec<String>, Vec<DecisionTimes>) {
    let mut rows = vec![CSV_HEADER.to_string()];
    let mut tables = Vec::new();
    for &kind in kinds {
        let summaries = decision_summaries(set, kind);
        for (idx, summary) in summaries.iter().enumerate() {
            let outcome = ScenarioOutcome {
                scenario_id: idx as u64,
                n: config.n,
                t: config.t,
                num_faulty: summary.num_faulty,
                exchange: kind,
                first_decision_round: summary.first_decision.map(|(round, _)| round),
                decision_value: summary.first_decision.map(|(_, v)| v),
                simultaneous: summary.simultaneous,
                waste: waste.map(|(w, _)| w[idx]),
                fullinfo_ck_round: waste.map(|(_, onset)| onset[idx]),
            };
            rows.push(outcome.csv_row());
        }
        tables.push(DecisionTimes {
            kind,
            first_round: summaries
                .iter()
                .map(|s| s.first_decision.map(|(round, _)| round))
                .collect(),
        });
    }
    (rows, tables)
}

pub fn compare(args: CompareArgs) -> Result<ExitCode> {
    if args.exchange == ExchangeArg::Fullinfo {
        bail!("full information has no standard decision rule to compare; pick a limited exchange or `all`");
    }
    let cap = crate::effective_cap(args.cap);
    let config = build_config(args.n, args.t, args.horizon)?;
    let kinds = args.exchange.limited();
    let set = ScenarioSet::open(&config, args.mode, args.samples, args.seed, cap)?;

    // The waste columns need the distributed-knowledge oracle, which is
    // only sound over the exhaustive space.
    let waste = match args.mode {
        ModeArg::Exhaustive => {
            let fullinfo = PointSpace::build(&config, ExchangeKind::FullInfo, cap)?;
            let table = waste_table(&fullinfo);
            Some((table.waste, table.onset))
        }
        ModeArg::Sampled => None,
    };

    let (rows, tables) = outcome_rows(&config, &set, &kinds, waste.as_ref());
    write_lines(Some(&args.out), &rows)?;
    println!(
        "wrote {} rows ({} scenarios x {} exchanges) to {}",
        rows.len() - 1,
        set.len(),
        kinds.len(),
        args.out.display()
    );

    let table = compare_decision_times(&tables)?;
    print!("{}", table.render());

    let resource_rows: Vec<String> = std::iter::once(RESOURCE_CSV_HEADER.to_string())
        .chain(kinds.iter().map(|&kind| {
            let mode = match args.mode {
                ModeArg::Exhaustive => EnumerationMode::Exhaustive,
                ModeArg::Sampled => EnumerationMode::Sampled {
                    count: args.samples,
                    seed: args.seed,
                },
            };
            measure_resources(&config, kind, mode, cap)
                .expect("config already validated")
                .csv_row()
        }))
        .collect();
    for line in &resource_rows {
        println!("{line}");
    }
    if let Some(path) = &args.resources_out {
        write_lines(Some(path), &resource_rows)?;
    }
    Ok(ExitCode::SUCCESS)
}

pub fn simulate(args: SimulateArgs) -> Result<ExitCode> {
    if args.exchange == ExchangeArg::Fullinfo {
        bail!("full information has no standard decision rule; pick a limited exchange or `all`");
    }
    let cap = crate::effective_cap(args.cap);
    let config = build_config(args.n, args.t, args.horizon)?;
    let kinds = args.exchange.limited();
    let set = ScenarioSet::open(&config, args.mode, args.samples, args.seed, cap)?;
    let (rows, _) = outcome_rows(&config, &set, &kinds, None);
    write_lines(args.out.as_deref(), &rows)?;
    if let Some(out) = &args.out {
        eprintln!("wrote {} rows to {}", rows.len() - 1, out.display());
    }
    Ok(ExitCode::SUCCESS)
}

pub fn trace(args: TraceArgs) -> Result<ExitCode> {
    if args.exchange == ExchangeArg::All {
        bail!("trace needs one exchange, not `all`");
    }
    let text = std::fs::read_to_string(&args.scenario)
        .with_context(|| format!("reading {}", args.scenario.display()))?;
    let scenario = ScenarioFile::parse(&text)
        .map_err(|e| anyhow::anyhow!("{}: {e}", args.scenario.display()))?;
    let run = generate_run(&scenario, args.exchange.kind())?;
    let trace = serde_json::to_string_pretty(&run.trace())?;
    match &args.out {
        Some(path) => std::fs::write(path, trace)
            .with_context(|| format!("writing {}", path.display()))?,
        None => println!("{trace}"),
    }
    Ok(ExitCode::SUCCESS)
}
