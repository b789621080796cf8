//! Exhaustive point spaces: every run of every canonical scenario for a
//! fixed (n, t, exchange), with per-agent indistinguishability indexes.
//!
//! Knowledge evaluated over a sampled space would be unsound — removing
//! runs can only enlarge apparent knowledge — so a `PointSpace` can only be
//! built from the exhaustive enumeration.
//!
//! Storage is columnar: per (time, agent) each run's local state is
//! interned to a dense id, with equal ids exactly when the canonically
//! serialized states are equal. Runs themselves are reconstructible from
//! their enumeration index, so nothing else is kept.

use crate::exchanges::LocalState;
use crate::model::{
    generate_run, Action, AgentId, ExchangeKind, ModelError, Scenario, ScenarioStream,
    SystemConfig, Value, MAX_AGENTS,
};
use rayon::prelude::*;
use std::collections::HashMap;
use std::sync::Mutex;

use super::eval::Formula;
use super::EvalCache;

/// A point of the space: run `run` at time `time`.
#[derive(Copy, Clone, PartialEq, Eq, Hash, Debug)]
pub struct Point {
    pub run: usize,
    pub time: usize,
}

/// Action codes packed into the dense decision table.
pub(super) const ACT_NOOP: u8 = 0;
pub(super) const ACT_DECIDE_ZERO: u8 = 1;
pub(super) const ACT_DECIDE_ONE: u8 = 2;
pub(super) const ACT_CRASHED: u8 = 3;

pub(super) fn encode_action(action: Action) -> u8 {
    match action {
        Action::Noop => ACT_NOOP,
        Action::Decide(Value::Zero) => ACT_DECIDE_ZERO,
        Action::Decide(Value::One) => ACT_DECIDE_ONE,
    }
}

pub(super) fn decode_action(code: u8) -> Option<Action> {
    match code {
        ACT_NOOP => Some(Action::Noop),
        ACT_DECIDE_ZERO => Some(Action::Decide(Value::Zero)),
        ACT_DECIDE_ONE => Some(Action::Decide(Value::One)),
        _ => None,
    }
}

/// Environment facts of one run, derived from the scenario alone.
#[derive(Copy, Clone)]
pub(super) struct RunRow {
    pub init_mask: u16,
    /// 0 for nonfaulty agents, the crash round otherwise.
    pub crash_rounds: [u8; MAX_AGENTS],
}

impl RunRow {
    fn from_scenario(scenario: &Scenario) -> Self {
        let mut crash_rounds = [0u8; MAX_AGENTS];
        for (agent, fault) in &scenario.pattern.faults {
            crash_rounds[agent.index()] = fault.crash_round as u8;
        }
        RunRow {
            init_mask: scenario.init_mask(),
            crash_rounds,
        }
    }

    pub fn is_live(&self, agent: AgentId, time: usize) -> bool {
        let c = self.crash_rounds[agent.index()];
        c == 0 || (time as u8) < c
    }

    pub fn live_mask(&self, n: usize, time: usize) -> u16 {
        let mut mask = 0u16;
        for idx in 0..n {
            let c = self.crash_rounds[idx];
            if c == 0 || (time as u8) < c {
                mask |= 1 << idx;
            }
        }
        mask
    }

    pub fn failed_by(&self, n: usize, time: usize) -> usize {
        (0..n)
            .filter(|&idx| {
                let c = self.crash_rounds[idx];
                c != 0 && c as usize <= time
            })
            .count()
    }

    pub fn num_faulty(&self, n: usize) -> usize {
        (0..n).filter(|&idx| self.crash_rounds[idx] != 0).count()
    }
}

/// Exchange-specific per-point data the theorem checks need.
pub(super) enum AuxData {
    None,
    /// First round in which some live agent heard from no other agent
    /// (255 = never).
    Counting { first_all_silent: Vec<u8> },
    /// Unknown-entry counts, `[time][agent][run]`; 255 for crashed agents.
    Vectorized { beta: Vec<Vec<Vec<u8>>> },
    /// `d_N(r, m)`: the maximum waste estimate over live agents,
    /// `[time][run]`.
    SendWaste { group_estimate: Vec<Vec<u8>> },
}

/// All points of all runs for a fixed (config, exchange), with per-agent
/// indistinguishability indexes given by interned state ids.
pub struct PointSpace {
    pub(super) config: SystemConfig,
    pub(super) kind: ExchangeKind,
    pub(super) num_runs: usize,
    pub(super) rows: Vec<RunRow>,
    /// `clean_by[m][run]`: some round `<= m` of the run was clean.
    pub(super) clean_by: Vec<Vec<bool>>,
    /// `state_ids[m][agent][run]`.
    pub(super) state_ids: Vec<Vec<Vec<u32>>>,
    pub(super) id_counts: Vec<Vec<u32>>,
    pub(super) crashed_ids: Vec<Vec<Option<u32>>>,
    /// Standard-rule actions, `[time][agent][run]`; `None` for the
    /// full-information exchange, which has no local rule.
    pub(super) actions: Option<Vec<Vec<Vec<u8>>>>,
    pub(super) aux: AuxData,
    pub(super) stream: ScenarioStream,
    pub(super) memo: Mutex<HashMap<(Formula, usize), EvalCache>>,
    pub(super) kf_memo: Mutex<HashMap<usize, std::sync::Arc<Vec<usize>>>>,
}

impl PointSpace {
    /// Build the space for the full exhaustive scenario enumeration.
    pub fn build(
        config: &SystemConfig,
        kind: ExchangeKind,
        cap: u128,
    ) -> Result<PointSpace, ModelError> {
        let stream = ScenarioStream::exhaustive(config, cap)?;
        let num_runs = stream.len();
        assert!(
            config.horizon <= 14,
            "packed state keys support horizons up to 14"
        );
        let mut space = match kind {
            ExchangeKind::FullInfo => build_fullinfo(config, &stream, num_runs),
            _ => build_limited(config, kind, &stream, num_runs),
        };
        space.stream = stream;
        Ok(space)
    }

    pub fn config(&self) -> &SystemConfig {
        &self.config
    }

    pub fn kind(&self) -> ExchangeKind {
        self.kind
    }

    pub fn num_runs(&self) -> usize {
        self.num_runs
    }

    pub fn num_points(&self) -> usize {
        self.num_runs * (self.config.horizon + 1)
    }

    pub fn points_at(&self, time: usize) -> impl Iterator<Item = Point> + '_ {
        (0..self.num_runs).map(move |run| Point { run, time })
    }

    /// Reconstruct the scenario of a run from its enumeration index.
    pub fn scenario(&self, run: usize) -> Scenario {
        self.stream.get(run as u128)
    }

    pub fn is_live(&self, run: usize, agent: AgentId, time: usize) -> bool {
        self.rows[run].is_live(agent, time)
    }

    pub fn live_agents(&self, run: usize, time: usize) -> impl Iterator<Item = AgentId> + '_ {
        let row = &self.rows[run];
        self.config
            .agents()
            .filter(move |agent| row.is_live(*agent, time))
    }

    pub fn has_initial_value(&self, run: usize, v: Value) -> bool {
        let mask = self.rows[run].init_mask;
        let full = ((1u32 << self.config.n) - 1) as u16;
        match v {
            Value::One => mask != 0,
            Value::Zero => mask != full,
        }
    }

    pub fn failed_by(&self, run: usize, time: usize) -> usize {
        self.rows[run].failed_by(self.config.n, time)
    }

    pub fn num_faulty(&self, run: usize) -> usize {
        self.rows[run].num_faulty(self.config.n)
    }

    pub fn clean_by(&self, run: usize, time: usize) -> bool {
        self.clean_by[time][run]
    }

    pub fn state_id(&self, run: usize, agent: AgentId, time: usize) -> u32 {
        self.state_ids[time][agent.index()][run]
    }

    /// The standard rule's action at a point, `None` when the agent is
    /// crashed or the exchange has no local rule.
    pub fn rule_action(&self, run: usize, agent: AgentId, time: usize) -> Option<Action> {
        let actions = self.actions.as_ref()?;
        decode_action(actions[time][agent.index()][run])
    }

    /// First round (with value) in which any live agent's rule fires.
    pub fn first_decisions(&self) -> Vec<Option<(usize, Value)>> {
        let Some(actions) = self.actions.as_ref() else {
            return vec![None; self.num_runs];
        };
        let mut out = vec![None; self.num_runs];
        for time in 0..=self.config.horizon {
            let slices: Vec<&Vec<u8>> = actions[time].iter().collect();
            for run in 0..self.num_runs {
                if out[run].is_some() {
                    continue;
                }
                for agent_idx in 0..self.config.n {
                    match decode_action(slices[agent_idx][run]) {
                        Some(Action::Decide(v)) => {
                            out[run] = Some((time, v));
                            break;
                        }
                        _ => {}
                    }
                }
            }
        }
        out
    }
}

/// Dense interning: sort (key, run) pairs and assign consecutive ids in
/// key order. Returns per-run ids, the id count, and the id of the crashed
/// cell when present.
fn dense_ids<K: Ord + Copy + Send>(
    keys: Vec<K>,
    crashed_key: K,
) -> (Vec<u32>, u32, Option<u32>) {
    let mut pairs: Vec<(K, u32)> = keys
        .into_iter()
        .enumerate()
        .map(|(run, key)| (key, run as u32))
        .collect();
    pairs.par_sort_unstable();
    let mut ids = vec![0u32; pairs.len()];
    let mut next_id = 0u32;
    let mut crashed_id = None;
    let mut prev: Option<K> = None;
    for (key, run) in pairs {
        match prev {
            Some(p) if p == key => {}
            _ => {
                if prev.is_some() {
                    next_id += 1;
                }
                if key == crashed_key {
                    crashed_id = Some(next_id);
                }
                prev = Some(key);
            }
        }
        ids[run as usize] = next_id;
    }
    let count = if prev.is_some() { next_id + 1 } else { 0 };
    (ids, count, crashed_id)
}

/// Clean-round prefix flags for one scenario, from the pattern alone.
fn clean_prefix(scenario: &Scenario) -> Vec<bool> {
    let config = &scenario.config;
    let mut out = Vec::with_capacity(config.horizon + 1);
    let mut clean_so_far = false;
    out.push(false);
    for round in 1..=config.horizon {
        let live = scenario.pattern.live_mask(round, config.n);
        let round_clean = config.agents().all(|sender| {
            let reached = scenario.pattern.delivered_mask(round, sender, config.n) & live;
            reached == 0 || reached == live
        });
        clean_so_far |= round_clean;
        out.push(clean_so_far);
    }
    out
}

const CRASHED_KEY: u64 = u64::MAX;

/// Canonical packed encoding of a limited-exchange local state. Equal keys
/// exactly when the canonically serialized states are equal; the time field
/// is omitted because keys are only compared within one time slice.
fn pack_state(state: &LocalState) -> u64 {
    match state {
        LocalState::Crashed => CRASHED_KEY,
        LocalState::Flood(s) => (s.seen.bits() as u64) | ((s.initial.as_u8() as u64) << 2),
        LocalState::Counting(s) => {
            (s.seen.bits() as u64)
                | ((s.initial.as_u8() as u64) << 2)
                | ((s.missing as u64) << 3)
        }
        LocalState::CountingPr(s) => {
            let mut key =
                (s.seen.bits() as u64) | ((s.initial.as_u8() as u64) << 2);
            for (k, &h) in s.missing_history.iter().enumerate() {
                debug_assert!(h < 16 && k < 15);
                key |= (h as u64) << (4 + 4 * k);
            }
            key
        }
        LocalState::Vectorized(s) => {
            let mut key = 0u64;
            for (idx, entry) in s.values.iter().enumerate() {
                let code: u64 = match entry {
                    None => 0,
                    Some(Value::Zero) => 1,
                    Some(Value::One) => 2,
                };
                key |= code << (2 * idx);
            }
            for &(v, k) in &s.fresh {
                key |= 1u64 << (32 + (v.as_u8() as usize) * MAX_AGENTS + k.index());
            }
            key
        }
        LocalState::SendWaste(s) => {
            (s.seen.bits() as u64)
                | ((s.initial.as_u8() as u64) << 2)
                | ((s.missing as u64) << 3)
                | ((s.waste_estimate as u64) << 8)
        }
        LocalState::FullInfo(_) => unreachable!("full-info states use the wide key path"),
    }
}

struct LimitedChunk {
    rows: Vec<RunRow>,
    clean: Vec<Vec<bool>>,
    keys: Vec<Vec<Vec<u64>>>,
    actions: Vec<Vec<Vec<u8>>>,
    first_all_silent: Vec<u8>,
    beta: Vec<Vec<Vec<u8>>>,
    group_estimate: Vec<Vec<u8>>,
}

fn build_limited(
    config: &SystemConfig,
    kind: ExchangeKind,
    stream: &ScenarioStream,
    num_runs: usize,
) -> PointSpace {
    let n = config.n;
    let times = config.horizon + 1;
    let chunk_size = 4096usize;
    let num_chunks = num_runs.div_ceil(chunk_size);

    let chunks: Vec<LimitedChunk> = (0..num_chunks)
        .into_par_iter()
        .map(|ci| {
            let lo = ci * chunk_size;
            let hi = ((ci + 1) * chunk_size).min(num_runs);
            let len = hi - lo;
            let mut chunk = LimitedChunk {
                rows: Vec::with_capacity(len),
                clean: vec![Vec::with_capacity(len); times],
                keys: vec![vec![Vec::with_capacity(len); n]; times],
                actions: vec![vec![Vec::with_capacity(len); n]; times],
                first_all_silent: Vec::new(),
                beta: Vec::new(),
                group_estimate: Vec::new(),
            };
            if kind == ExchangeKind::Counting {
                chunk.first_all_silent = Vec::with_capacity(len);
            }
            if kind == ExchangeKind::Vectorized {
                chunk.beta = vec![vec![Vec::with_capacity(len); n]; times];
            }
            if kind == ExchangeKind::SendWaste {
                chunk.group_estimate = vec![Vec::with_capacity(len); times];
            }
            for idx in lo..hi {
                let scenario = stream.get(idx as u128);
                let run = generate_run(&scenario, kind).expect("enumerated scenarios are valid");
                chunk.rows.push(RunRow::from_scenario(&scenario));
                for (m, flag) in clean_prefix(&scenario).into_iter().enumerate() {
                    chunk.clean[m].push(flag);
                }
                let mut first_silent = 255u8;
                for m in 0..times {
                    let mut d_n = 0u8;
                    for agent in config.agents() {
                        let state = run.state(agent, m);
                        chunk.keys[m][agent.index()].push(pack_state(state));
                        chunk.actions[m][agent.index()]
                            .push(match state {
                                LocalState::Crashed => ACT_CRASHED,
                                _ => encode_action(crate::exchanges::decide(state, config)),
                            });
                        match state {
                            LocalState::Counting(s) => {
                                if s.missing >= n - 1 && first_silent == 255 {
                                    first_silent = m as u8;
                                }
                            }
                            LocalState::Vectorized(s) => {
                                chunk.beta[m][agent.index()].push(s.unknown_count() as u8);
                            }
                            LocalState::SendWaste(s) => {
                                d_n = d_n.max(s.waste_estimate as u8);
                            }
                            LocalState::Crashed if kind == ExchangeKind::Vectorized => {
                                chunk.beta[m][agent.index()].push(255);
                            }
                            _ => {}
                        }
                    }
                    if kind == ExchangeKind::SendWaste {
                        chunk.group_estimate[m].push(d_n);
                    }
                }
                if kind == ExchangeKind::Counting {
                    chunk.first_all_silent.push(first_silent);
                }
            }
            chunk
        })
        .collect();

    // Assemble columnar storage from the ordered chunks.
    let mut rows = Vec::with_capacity(num_runs);
    let mut clean_by = vec![Vec::with_capacity(num_runs); times];
    let mut keys = vec![vec![Vec::with_capacity(num_runs); n]; times];
    let mut actions = vec![vec![Vec::with_capacity(num_runs); n]; times];
    let mut first_all_silent = Vec::new();
    let mut beta: Vec<Vec<Vec<u8>>> = vec![vec![Vec::new(); n]; times];
    let mut group_estimate: Vec<Vec<u8>> = vec![Vec::new(); times];
    for mut chunk in chunks {
        rows.append(&mut chunk.rows);
        for m in 0..times {
            clean_by[m].append(&mut chunk.clean[m]);
            for a in 0..n {
                keys[m][a].append(&mut chunk.keys[m][a]);
                actions[m][a].append(&mut chunk.actions[m][a]);
                if kind == ExchangeKind::Vectorized {
                    beta[m][a].append(&mut chunk.beta[m][a]);
                }
            }
            if kind == ExchangeKind::SendWaste {
                group_estimate[m].append(&mut chunk.group_estimate[m]);
            }
        }
        first_all_silent.append(&mut chunk.first_all_silent);
    }

    let mut state_ids = Vec::with_capacity(times);
    let mut id_counts = Vec::with_capacity(times);
    let mut crashed_ids = Vec::with_capacity(times);
    for per_time in keys {
        let mut ids_t = Vec::with_capacity(n);
        let mut counts_t = Vec::with_capacity(n);
        let mut crashed_t = Vec::with_capacity(n);
        for per_agent in per_time {
            let (ids, count, crashed) = dense_ids(per_agent, CRASHED_KEY);
            ids_t.push(ids);
            counts_t.push(count);
            crashed_t.push(crashed);
        }
        state_ids.push(ids_t);
        id_counts.push(counts_t);
        crashed_ids.push(crashed_t);
    }

    let aux = match kind {
        ExchangeKind::Counting => AuxData::Counting { first_all_silent },
        ExchangeKind::Vectorized => AuxData::Vectorized { beta },
        ExchangeKind::SendWaste => AuxData::SendWaste { group_estimate },
        _ => AuxData::None,
    };

    PointSpace {
        config: *config,
        kind,
        num_runs,
        rows,
        clean_by,
        state_ids,
        id_counts,
        crashed_ids,
        actions: Some(actions),
        aux,
        stream: ScenarioStream::exhaustive(config, u128::MAX).expect("already built once"),
        memo: Mutex::new(HashMap::new()),
        kf_memo: Mutex::new(HashMap::new()),
    }
}

/// Wide key for full-information states: own previous id plus, per other
/// agent, the sender's previous id + 1 (0 = silence). Two states are equal
/// iff their keys are, by induction over time.
type WideKey = [u32; MAX_FULLINFO_AGENTS];
const MAX_FULLINFO_AGENTS: usize = 8;
const WIDE_CRASHED: WideKey = [u32::MAX; MAX_FULLINFO_AGENTS];

fn build_fullinfo(
    config: &SystemConfig,
    stream: &ScenarioStream,
    num_runs: usize,
) -> PointSpace {
    let n = config.n;
    assert!(
        n <= MAX_FULLINFO_AGENTS,
        "full-information spaces support up to {MAX_FULLINFO_AGENTS} agents"
    );
    let times = config.horizon + 1;

    // Environment facts in parallel chunks, including each faulty agent's
    // crash-round delivered mask so rounds never re-decode the scenario.
    let chunk_size = 8192usize;
    let num_chunks = num_runs.div_ceil(chunk_size);
    type Facts = (Vec<RunRow>, Vec<Vec<bool>>, Vec<[u16; MAX_FULLINFO_AGENTS]>);
    let facts: Vec<Facts> = (0..num_chunks)
        .into_par_iter()
        .map(|ci| {
            let lo = ci * chunk_size;
            let hi = ((ci + 1) * chunk_size).min(num_runs);
            let mut rows = Vec::with_capacity(hi - lo);
            let mut clean = vec![Vec::with_capacity(hi - lo); times];
            let mut masks = Vec::with_capacity(hi - lo);
            for idx in lo..hi {
                let scenario = stream.get(idx as u128);
                rows.push(RunRow::from_scenario(&scenario));
                for (m, flag) in clean_prefix(&scenario).into_iter().enumerate() {
                    clean[m].push(flag);
                }
                let mut delivered = [0u16; MAX_FULLINFO_AGENTS];
                for (agent, fault) in &scenario.pattern.faults {
                    delivered[agent.index()] = fault.delivered;
                }
                masks.push(delivered);
            }
            (rows, clean, masks)
        })
        .collect();
    let mut rows = Vec::with_capacity(num_runs);
    let mut clean_by = vec![Vec::with_capacity(num_runs); times];
    let mut crash_delivered = Vec::with_capacity(num_runs);
    for (mut r, mut c, mut d) in facts {
        rows.append(&mut r);
        for m in 0..times {
            clean_by[m].append(&mut c[m]);
        }
        crash_delivered.append(&mut d);
    }

    // Interning proceeds time slice by time slice: a state at time m is
    // determined by the agent's previous id and the ids of the states it
    // received, which the delivery masks of the pattern dictate.
    let mut state_ids: Vec<Vec<Vec<u32>>> = Vec::with_capacity(times);
    let mut id_counts: Vec<Vec<u32>> = Vec::with_capacity(times);
    let mut crashed_ids: Vec<Vec<Option<u32>>> = Vec::with_capacity(times);

    // Time 0: the state is just the initial value.
    {
        let mut ids_t = Vec::with_capacity(n);
        let mut counts_t = Vec::with_capacity(n);
        let mut crashed_t = Vec::with_capacity(n);
        for agent in config.agents() {
            let keys: Vec<WideKey> = rows
                .par_iter()
                .map(|row| {
                    let mut key = [0u32; MAX_FULLINFO_AGENTS];
                    key[0] = ((row.init_mask >> agent.index()) & 1) as u32;
                    key
                })
                .collect();
            let (ids, count, crashed) = dense_ids(keys, WIDE_CRASHED);
            ids_t.push(ids);
            counts_t.push(count);
            crashed_t.push(crashed);
        }
        state_ids.push(ids_t);
        id_counts.push(counts_t);
        crashed_ids.push(crashed_t);
    }

    let full_mask = ((1u32 << n) - 1) as u16;
    for m in 1..=config.horizon {
        let round_mask = |run: usize, sender: AgentId| -> u16 {
            let c = rows[run].crash_rounds[sender.index()];
            if c == 0 || (m as u8) < c {
                full_mask
            } else if m as u8 == c {
                crash_delivered[run][sender.index()]
            } else {
                0
            }
        };
        let prev_ids = &state_ids[m - 1];
        let mut ids_t = Vec::with_capacity(n);
        let mut counts_t = Vec::with_capacity(n);
        let mut crashed_t = Vec::with_capacity(n);
        for agent in config.agents() {
            let keys: Vec<WideKey> = (0..num_runs)
                .into_par_iter()
                .map(|run| {
                    if !rows[run].is_live(agent, m) {
                        return WIDE_CRASHED;
                    }
                    let mut key = [0u32; MAX_FULLINFO_AGENTS];
                    key[0] = prev_ids[agent.index()][run];
                    let mut slot = 1;
                    for sender in config.agents() {
                        if sender == agent {
                            continue;
                        }
                        let delivered = round_mask(run, sender) & (1 << agent.index()) != 0;
                        key[slot] = if delivered {
                            prev_ids[sender.index()][run] + 1
                        } else {
                            0
                        };
                        slot += 1;
                    }
                    key
                })
                .collect();
            let (ids, count, crashed) = dense_ids(keys, WIDE_CRASHED);
            ids_t.push(ids);
            counts_t.push(count);
            crashed_t.push(crashed);
        }
        state_ids.push(ids_t);
        id_counts.push(counts_t);
        crashed_ids.push(crashed_t);
    }

    PointSpace {
        config: *config,
        kind: ExchangeKind::FullInfo,
        num_runs,
        rows,
        clean_by,
        state_ids,
        id_counts,
        crashed_ids,
        actions: None,
        aux: AuxData::None,
        stream: ScenarioStream::exhaustive(config, u128::MAX).expect("already built once"),
        memo: Mutex::new(HashMap::new()),
        kf_memo: Mutex::new(HashMap::new()),
    }
}
