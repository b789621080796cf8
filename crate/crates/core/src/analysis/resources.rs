//! Empirical resource profiles: serialized message and state sizes plus a
//! transition operation count, for slope inspection across agent counts
//! (constant versus linear in n). Byte counts use the canonical JSON trace
//! encoding; good enough for slopes, not for absolute cost claims.

use crate::exchanges::{self, Message};
use crate::model::{
    generate_run, EnumerationMode, ExchangeKind, ModelError, ScenarioStream, SystemConfig,
};
use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct ResourceRow {
    pub exchange: ExchangeKind,
    pub n: usize,
    pub t: usize,
    pub scenarios: usize,
    pub max_message_bytes: usize,
    pub max_state_bytes: usize,
    pub mean_ops_per_round: f64,
}

pub const RESOURCE_CSV_HEADER: &str =
    "exchange,n,t,scenarios,max_message_bytes,max_state_bytes,mean_ops_per_round";

impl ResourceRow {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{:.2}",
            self.exchange,
            self.n,
            self.t,
            self.scenarios,
            self.max_message_bytes,
            self.max_state_bytes,
            self.mean_ops_per_round
        )
    }
}

/// Work a receiver performs folding one round's arrivals: one unit per
/// message, plus one per carried pair for the vectorized exchange (whose
/// per-round cost is what grows quadratically).
fn transition_ops(received: &[Option<Message>]) -> usize {
    received
        .iter()
        .flatten()
        .map(|message| match message {
            Message::Pairs(pairs) => 1 + pairs.len(),
            _ => 1,
        })
        .sum::<usize>()
        + 1
}

/// Simulate the scenario set and record per-round resource maxima and the
/// mean transition cost.
pub fn measure_resources(
    config: &SystemConfig,
    kind: ExchangeKind,
    mode: EnumerationMode,
    cap: u128,
) -> Result<ResourceRow, ModelError> {
    let stream = ScenarioStream::with_mode(config, mode, cap)?;
    let mut max_message_bytes = 0usize;
    let mut max_state_bytes = 0usize;
    let mut total_ops = 0u64;
    let mut rounds = 0u64;
    let mut scenarios = 0usize;
    for scenario in stream {
        scenarios += 1;
        let run = generate_run(&scenario, kind)?;
        for time in 0..=config.horizon {
            for agent in config.agents() {
                let state = run.state(agent, time);
                if !state.is_crashed() {
                    let bytes = serde_json::to_vec(state).expect("states serialize").len();
                    max_state_bytes = max_state_bytes.max(bytes);
                }
            }
        }
        for round in 1..=config.horizon {
            let prev = &run.states[round - 1];
            let outgoing: Vec<Option<Message>> =
                prev.iter().map(exchanges::select_message).collect();
            for message in outgoing.iter().flatten() {
                let bytes = serde_json::to_vec(message).expect("messages serialize").len();
                max_message_bytes = max_message_bytes.max(bytes);
            }
            for agent in config.agents() {
                if run.state(agent, round).is_crashed() {
                    continue;
                }
                let received: Vec<Option<Message>> = config
                    .agents()
                    .map(|sender| {
                        if sender == agent
                            || !run.deliveries[round - 1].delivered(sender, agent)
                        {
                            None
                        } else {
                            outgoing[sender.index()].clone()
                        }
                    })
                    .collect();
                total_ops += transition_ops(&received) as u64;
                rounds += 1;
            }
        }
    }
    Ok(ResourceRow {
        exchange: kind,
        n: config.n,
        t: config.t,
        scenarios,
        max_message_bytes,
        max_state_bytes,
        mean_ops_per_round: if rounds == 0 {
            0.0
        } else {
            total_ops as f64 / rounds as f64
        },
    })
}
