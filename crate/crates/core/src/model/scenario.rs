//! Scenario enumeration: the substrate of every exhaustive run space.
//!
//! A scenario is an initial value assignment plus a canonical crash
//! adversary. The canonical adversary space is: every faulty subset of size
//! at most `t`, with each faulty agent assigned a crash round in
//! `1..=horizon` and a delivered set over the other agents. The whole space
//! is indexable, so scenarios are never stored: position in the enumeration
//! is enough to reconstruct one.

use super::{AgentId, Fault, FailurePattern, ModelError, SystemConfig, Value};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Initial values plus failure pattern: everything a run depends on.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Scenario {
    pub config: SystemConfig,
    pub init: Vec<Value>,
    pub pattern: FailurePattern,
}

impl Scenario {
    pub fn new(
        config: SystemConfig,
        init: Vec<Value>,
        pattern: FailurePattern,
    ) -> Result<Self, ModelError> {
        if init.len() != config.n {
            return Err(ModelError::BadInitLength {
                got: init.len(),
                n: config.n,
            });
        }
        pattern.validate(&config)?;
        Ok(Scenario {
            config,
            init,
            pattern,
        })
    }

    pub fn initial_value(&self, agent: AgentId) -> Value {
        self.init[agent.index()]
    }

    /// Bit `i` set iff agent `i+1` starts with value one.
    pub fn init_mask(&self) -> u16 {
        let mut mask = 0u16;
        for (idx, v) in self.init.iter().enumerate() {
            if *v == Value::One {
                mask |= 1 << idx;
            }
        }
        mask
    }

    pub fn has_initial_value(&self, v: Value) -> bool {
        self.init.contains(&v)
    }
}

/// How to walk the scenario space.
#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub enum EnumerationMode {
    Exhaustive,
    Sampled { count: usize, seed: u64 },
}

/// Total number of canonical scenarios, or an error when the count does not
/// even fit in a `u128`.
pub fn scenario_space_size(config: &SystemConfig) -> Result<u128, ModelError> {
    Ok(Indexer::new(config)?.total)
}

/// Random-access decoder for the canonical enumeration order.
///
/// Scenario index = pattern index * 2^n + init index; pattern indexes are
/// blocked by faulty subset (in bitmask order), then mixed-radix over the
/// subset's agents, each digit encoding (crash round, delivered set).
struct Indexer {
    config: SystemConfig,
    /// Options per faulty agent: horizon * 2^(n-1).
    per_agent: u128,
    /// (subset mask, first pattern index of its block), ascending.
    blocks: Vec<(u16, u128)>,
    total: u128,
}

impl Indexer {
    fn new(config: &SystemConfig) -> Result<Self, ModelError> {
        let n = config.n;
        let per_agent = (config.horizon as u128)
            .checked_mul(1u128 << (n - 1))
            .ok_or(ModelError::SpaceTooLarge {
                count: u128::MAX,
                cap: u128::MAX,
            })?;
        let mut blocks = Vec::new();
        let mut offset: u128 = 0;
        for mask in 0u32..(1 << n) {
            let size = mask.count_ones() as usize;
            if size > config.t {
                continue;
            }
            blocks.push((mask as u16, offset));
            let block = per_agent
                .checked_pow(size as u32)
                .ok_or(ModelError::SpaceTooLarge {
                    count: u128::MAX,
                    cap: u128::MAX,
                })?;
            offset = offset
                .checked_add(block)
                .ok_or(ModelError::SpaceTooLarge {
                    count: u128::MAX,
                    cap: u128::MAX,
                })?;
        }
        let total = offset
            .checked_mul(1u128 << n)
            .ok_or(ModelError::SpaceTooLarge {
                count: u128::MAX,
                cap: u128::MAX,
            })?;
        Ok(Indexer {
            config: *config,
            per_agent,
            blocks,
            total,
        })
    }

    fn decode(&self, index: u128) -> Scenario {
        debug_assert!(index < self.total);
        let n = self.config.n;
        let init_index = (index % (1u128 << n)) as u16;
        let pattern_index = index >> n;
        let init = (0..n)
            .map(|i| {
                if init_index & (1 << i) != 0 {
                    Value::One
                } else {
                    Value::Zero
                }
            })
            .collect();

        // Find the faulty-subset block this pattern index falls in.
        let pos = self
            .blocks
            .partition_point(|&(_, off)| off <= pattern_index)
            - 1;
        let (mask, block_start) = self.blocks[pos];
        let mut within = pattern_index - block_start;
        let mut faults = Vec::new();
        for agent in AgentId::all(n) {
            if mask & (1 << agent.index()) == 0 {
                continue;
            }
            let digit = within % self.per_agent;
            within /= self.per_agent;
            let crash_round = (digit / (1u128 << (n - 1))) as usize + 1;
            let compact = (digit % (1u128 << (n - 1))) as u16;
            // Expand the delivered set over "other agents" into an n-bit
            // mask by skipping the agent's own position.
            let low = compact & ((1 << agent.index()) - 1);
            let high = (compact >> agent.index()) << (agent.index() + 1);
            let delivered = low | high;
            faults.push((
                agent,
                Fault {
                    crash_round,
                    delivered,
                },
            ));
        }
        Scenario {
            config: self.config,
            init,
            pattern: FailurePattern::new(faults),
        }
    }
}

/// Deterministic stream of scenarios in either enumeration mode.
pub struct ScenarioStream {
    indexer: Indexer,
    mode: StreamMode,
    emitted: usize,
}

enum StreamMode {
    Exhaustive { next: u128 },
    Sampled { count: usize, rng: ChaCha8Rng },
}

impl ScenarioStream {
    /// Exhaustive enumeration; refuses spaces above `cap`.
    pub fn exhaustive(config: &SystemConfig, cap: u128) -> Result<Self, ModelError> {
        let indexer = Indexer::new(config)?;
        if indexer.total > cap {
            return Err(ModelError::SpaceTooLarge {
                count: indexer.total,
                cap,
            });
        }
        Ok(ScenarioStream {
            indexer,
            mode: StreamMode::Exhaustive { next: 0 },
            emitted: 0,
        })
    }

    /// Seed-reproducible uniform sample over the same canonical space.
    pub fn sampled(config: &SystemConfig, count: usize, seed: u64) -> Result<Self, ModelError> {
        let indexer = Indexer::new(config)?;
        Ok(ScenarioStream {
            indexer,
            mode: StreamMode::Sampled {
                count,
                rng: ChaCha8Rng::seed_from_u64(seed),
            },
            emitted: 0,
        })
    }

    pub fn with_mode(
        config: &SystemConfig,
        mode: EnumerationMode,
        cap: u128,
    ) -> Result<Self, ModelError> {
        match mode {
            EnumerationMode::Exhaustive => Self::exhaustive(config, cap),
            EnumerationMode::Sampled { count, seed } => Self::sampled(config, count, seed),
        }
    }

    pub fn len(&self) -> usize {
        match &self.mode {
            StreamMode::Exhaustive { .. } => self.indexer.total as usize,
            StreamMode::Sampled { count, .. } => *count,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Random access into the exhaustive order (independent of the mode).
    pub fn get(&self, index: u128) -> Scenario {
        self.indexer.decode(index)
    }
}

impl Iterator for ScenarioStream {
    type Item = Scenario;

    fn next(&mut self) -> Option<Scenario> {
        match &mut self.mode {
            StreamMode::Exhaustive { next } => {
                if *next >= self.indexer.total {
                    return None;
                }
                let s = self.indexer.decode(*next);
                *next += 1;
                self.emitted += 1;
                Some(s)
            }
            StreamMode::Sampled { count, rng } => {
                if self.emitted >= *count {
                    return None;
                }
                let idx = rng.gen_range(0..self.indexer.total);
                self.emitted += 1;
                Some(self.indexer.decode(idx))
            }
        }
    }
}

/// On-disk scenario description.
///
/// ```json
/// {"n":3,"t":1,"init":[0,1,0],"crashes":[{"agent":2,"round":1,"delivered":[1]}]}
/// ```
/// Agents and rounds are 1-indexed; `delivered` lists the recipients of the
/// crash-round message. `horizon` is optional and defaults to
/// `min(t+1, n-1) + 1`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub n: usize,
    pub t: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    pub init: Vec<u8>,
    #[serde(default)]
    pub crashes: Vec<CrashEntry>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CrashEntry {
    pub agent: usize,
    pub round: usize,
    #[serde(default)]
    pub delivered: Vec<usize>,
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Scenario, String> {
        let file: ScenarioFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
        file.into_scenario()
    }

    pub fn into_scenario(self) -> Result<Scenario, String> {
        let horizon = self
            .horizon
            .unwrap_or_else(|| SystemConfig::default_horizon(self.n, self.t));
        let config = SystemConfig::with_horizon(self.n, self.t, horizon)
            .map_err(|e| format!("n/t/horizon: {e}"))?;
        if self.init.len() != self.n {
            return Err(format!(
                "init: expected {} values, got {}",
                self.n,
                self.init.len()
            ));
        }
        let mut init = Vec::with_capacity(self.n);
        for (i, raw) in self.init.iter().enumerate() {
            init.push(Value::try_from(*raw).map_err(|e| format!("init[{i}]: {e}"))?);
        }
        let mut faults = Vec::new();
        for (i, entry) in self.crashes.iter().enumerate() {
            if entry.agent < 1 || entry.agent > self.n {
                return Err(format!(
                    "crashes[{i}].agent: unknown agent id {} (n={})",
                    entry.agent, self.n
                ));
            }
            let agent = AgentId(entry.agent);
            if faults.iter().any(|(a, _)| *a == agent) {
                return Err(format!(
                    "crashes[{i}].agent: duplicate crash entry for agent {agent}"
                ));
            }
            let mut delivered = Vec::new();
            for (j, d) in entry.delivered.iter().enumerate() {
                if *d < 1 || *d > self.n {
                    return Err(format!(
                        "crashes[{i}].delivered[{j}]: unknown agent id {d} (n={})",
                        self.n
                    ));
                }
                if *d == entry.agent {
                    return Err(format!(
                        "crashes[{i}].delivered[{j}]: agent {d} cannot deliver to itself"
                    ));
                }
                delivered.push(AgentId(*d));
            }
            faults.push((agent, Fault::new(entry.round, delivered)));
        }
        let pattern = FailurePattern::new(faults);
        Scenario::new(config, init, pattern).map_err(|e| format!("crashes: {e}"))
    }

    pub fn from_scenario(scenario: &Scenario) -> Self {
        ScenarioFile {
            n: scenario.config.n,
            t: scenario.config.t,
            horizon: Some(scenario.config.horizon),
            init: scenario.init.iter().map(|v| v.as_u8()).collect(),
            crashes: scenario
                .pattern
                .faults
                .iter()
                .map(|(agent, fault)| CrashEntry {
                    agent: agent.0,
                    round: fault.crash_round,
                    delivered: fault
                        .delivered_agents(scenario.config.n)
                        .map(|a| a.0)
                        .collect(),
                })
                .collect(),
        }
    }
}
