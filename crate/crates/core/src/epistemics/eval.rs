//! Formula evaluation over a point space.
//!
//! All modal operators reduce to folds over the dense per-(agent, time)
//! state ids:
//!
//! - `K_i phi` holds where `phi` holds on the agent's whole
//!   indistinguishability cell;
//! - `E_N phi` holds where every live agent knows `phi`;
//! - `C_N phi` is evaluated as a reachability closure: an edge joins two
//!   same-time points when some agent live at the source has equal states
//!   at both. Such an agent is live at the target too (its state there is
//!   the same non-crashed one), so edges are symmetric and the closure is a
//!   union of connected components. `C_N phi` holds at a point iff `phi`
//!   holds on its whole component — which equals the limit of the
//!   `E_N^k` chain, and every point reaches itself through a live agent's
//!   reflexive edge;
//! - `D_N phi` holds where `phi` holds at every same-time point that
//!   matches the point's live agents' states simultaneously.
//!
//! Full vectors per (formula, time) are memoized, so point queries after
//! the first are array lookups.

use crate::model::{Action, AgentId, Value};
use serde::Serialize;
use std::sync::Arc;
use thiserror::Error;

use super::space::{Point, PointSpace};

pub(crate) type EvalCache = Arc<Vec<bool>>;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EpistemicsError {
    /// All agents crashed at the point, so the nonfailed group is empty.
    /// Cannot arise from validated scenarios (t < n) but is reported
    /// rather than defined away.
    #[error("nonfailed set is empty at run {run}, time {time}")]
    EmptyNonfailedSet { run: usize, time: usize },
    #[error("agent {agent} is crashed at run {run}, time {time}")]
    CrashedAgent {
        agent: AgentId,
        run: usize,
        time: usize,
    },
}

/// The modal language: environment atoms, booleans, and the knowledge
/// operators over the indexical nonfailed group.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize)]
pub enum Formula {
    /// Some agent started with this value.
    Exists(Value),
    /// The agent has not crashed yet.
    NonFailed(AgentId),
    /// Some round so far was clean.
    Clean,
    /// At least this many agents have crashed by now.
    AtLeastFailed(usize),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Knows(AgentId, Box<Formula>),
    Everyone(Box<Formula>),
    Common(Box<Formula>),
    Distributed(Box<Formula>),
}

impl Formula {
    pub fn exists(v: Value) -> Formula {
        Formula::Exists(v)
    }

    pub fn not(self) -> Formula {
        Formula::Not(Box::new(self))
    }

    pub fn and(self, other: Formula) -> Formula {
        Formula::And(Box::new(self), Box::new(other))
    }

    pub fn or(self, other: Formula) -> Formula {
        Formula::Or(Box::new(self), Box::new(other))
    }

    pub fn knows(agent: AgentId, phi: Formula) -> Formula {
        Formula::Knows(agent, Box::new(phi))
    }

    pub fn everyone(phi: Formula) -> Formula {
        Formula::Everyone(Box::new(phi))
    }

    pub fn common(phi: Formula) -> Formula {
        Formula::Common(Box::new(phi))
    }

    pub fn distributed(phi: Formula) -> Formula {
        Formula::Distributed(Box::new(phi))
    }
}

/// Minimal union-find with path halving.
pub(super) struct UnionFind {
    parent: Vec<u32>,
}

impl UnionFind {
    pub fn new(len: usize) -> Self {
        UnionFind {
            parent: (0..len as u32).collect(),
        }
    }

    pub fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grandparent = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grandparent;
            x = grandparent;
        }
        x
    }

    pub fn union(&mut self, a: u32, b: u32) {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra != rb {
            self.parent[ra.max(rb) as usize] = ra.min(rb);
        }
    }
}

impl PointSpace {
    /// Evaluate a formula at every point of one time slice.
    pub fn eval_slice(&self, formula: &Formula, time: usize) -> EvalCache {
        let key = (formula.clone(), time);
        if let Some(cached) = self.memo.lock().unwrap().get(&key) {
            return cached.clone();
        }
        let result: EvalCache = Arc::new(self.eval_uncached(formula, time));
        self.memo
            .lock()
            .unwrap()
            .insert(key, result.clone());
        result
    }

    fn eval_uncached(&self, formula: &Formula, time: usize) -> Vec<bool> {
        let runs = self.num_runs;
        match formula {
            Formula::Exists(v) => (0..runs)
                .map(|run| self.has_initial_value(run, *v))
                .collect(),
            Formula::NonFailed(agent) => (0..runs)
                .map(|run| self.is_live(run, *agent, time))
                .collect(),
            Formula::Clean => self.clean_by[time].clone(),
            Formula::AtLeastFailed(count) => (0..runs)
                .map(|run| self.failed_by(run, time) >= *count)
                .collect(),
            Formula::Not(inner) => {
                let inner = self.eval_slice(inner, time);
                inner.iter().map(|b| !b).collect()
            }
            Formula::And(a, b) => {
                let a = self.eval_slice(a, time);
                let b = self.eval_slice(b, time);
                a.iter().zip(b.iter()).map(|(x, y)| *x && *y).collect()
            }
            Formula::Or(a, b) => {
                let a = self.eval_slice(a, time);
                let b = self.eval_slice(b, time);
                a.iter().zip(b.iter()).map(|(x, y)| *x || *y).collect()
            }
            Formula::Knows(agent, phi) => {
                let phi = self.eval_slice(phi, time);
                self.knows_vector(*agent, time, &phi)
            }
            Formula::Everyone(phi) => {
                let phi = self.eval_slice(phi, time);
                self.everyone_vector(time, &phi)
            }
            Formula::Common(phi) => {
                let phi = self.eval_slice(phi, time);
                self.common_vector(time, &phi)
            }
            Formula::Distributed(phi) => {
                let phi = self.eval_slice(phi, time);
                self.joint_fold(time, true, |run| phi[run], |a, b| a && b)
            }
        }
    }

    /// `K_i phi` per run: the AND of `phi` over each cell of agent `i`,
    /// looked up through the dense ids. Crashed points share one cell.
    pub(super) fn knows_vector(&self, agent: AgentId, time: usize, phi: &[bool]) -> Vec<bool> {
        let ids = &self.state_ids[time][agent.index()];
        let count = self.id_counts[time][agent.index()] as usize;
        let mut cell_and = vec![true; count];
        for (run, &id) in ids.iter().enumerate() {
            if !phi[run] {
                cell_and[id as usize] = false;
            }
        }
        ids.iter().map(|&id| cell_and[id as usize]).collect()
    }

    fn everyone_vector(&self, time: usize, phi: &[bool]) -> Vec<bool> {
        let per_agent: Vec<Vec<bool>> = self
            .config
            .agents()
            .map(|agent| self.knows_vector(agent, time, phi))
            .collect();
        (0..self.num_runs)
            .map(|run| {
                self.live_agents(run, time)
                    .all(|agent| per_agent[agent.index()][run])
            })
            .collect()
    }

    fn common_vector(&self, time: usize, phi: &[bool]) -> Vec<bool> {
        let mut uf = UnionFind::new(self.num_runs);
        for agent in self.config.agents() {
            let ids = &self.state_ids[time][agent.index()];
            let crashed = self.crashed_ids[time][agent.index()];
            let count = self.id_counts[time][agent.index()] as usize;
            let mut first = vec![u32::MAX; count];
            for (run, &id) in ids.iter().enumerate() {
                if Some(id) == crashed {
                    continue; // crashed agents generate no edges
                }
                if first[id as usize] == u32::MAX {
                    first[id as usize] = run as u32;
                } else {
                    uf.union(first[id as usize], run as u32);
                }
            }
        }
        let mut component_and = vec![true; self.num_runs];
        for run in 0..self.num_runs {
            if !phi[run] {
                let root = uf.find(run as u32) as usize;
                component_and[root] = false;
            }
        }
        (0..self.num_runs)
            .map(|run| component_and[uf.find(run as u32) as usize])
            .collect()
    }

    /// Fold a per-point value over each point's joint cell: the set of
    /// same-time points whose states match the point's live agents'
    /// states simultaneously. One pass per occurring live set.
    pub(super) fn joint_fold<T: Copy + Send + Sync>(
        &self,
        time: usize,
        init: T,
        value: impl Fn(usize) -> T + Sync,
        fold: impl Fn(T, T) -> T + Sync,
    ) -> Vec<T> {
        use std::collections::BTreeSet;
        let n = self.config.n;
        let live_masks: Vec<u16> = (0..self.num_runs)
            .map(|run| self.rows[run].live_mask(n, time))
            .collect();
        let occurring: BTreeSet<u16> = live_masks.iter().copied().collect();
        let mut out = vec![init; self.num_runs];
        for group in occurring {
            let members: Vec<usize> = (0..self.num_runs)
                .filter(|&run| live_masks[run] & group == group)
                .collect();
            // Key each member by its ids on the group's agents; a point
            // with one of them crashed can never match a live id, and was
            // already excluded by the superset filter.
            let mut keyed: Vec<([u32; 16], u32)> = members
                .iter()
                .map(|&run| {
                    let mut key = [0u32; 16];
                    for (slot, agent) in self
                        .config
                        .agents()
                        .filter(|a| group & (1 << a.index()) != 0)
                        .enumerate()
                    {
                        key[slot] = self.state_ids[time][agent.index()][run];
                    }
                    (key, run as u32)
                })
                .collect();
            keyed.sort_unstable();
            let mut start = 0;
            while start < keyed.len() {
                let mut end = start + 1;
                while end < keyed.len() && keyed[end].0 == keyed[start].0 {
                    end += 1;
                }
                let mut acc = init;
                for &(_, run) in &keyed[start..end] {
                    acc = fold(acc, value(run as usize));
                }
                for &(_, run) in &keyed[start..end] {
                    if live_masks[run as usize] == group {
                        out[run as usize] = acc;
                    }
                }
                start = end;
            }
        }
        out
    }

    /// `max { l <= t : D_N("at least l agents have failed") }` per run at
    /// `time`, computed directly as the minimum crashed-count over each
    /// point's joint cell (the two formulations agree: the joint minimum is
    /// the largest l for which every jointly indistinguishable point has at
    /// least l failures).
    pub fn known_failures(&self, time: usize) -> Arc<Vec<usize>> {
        if let Some(cached) = self.kf_memo.lock().unwrap().get(&time) {
            return cached.clone();
        }
        let folded = self.joint_fold(
            time,
            usize::MAX,
            |run| self.failed_by(run, time),
            |a, b| a.min(b),
        );
        let result: Arc<Vec<usize>> = Arc::new(
            folded
                .into_iter()
                .map(|v| if v == usize::MAX { 0 } else { v.min(self.config.t) })
                .collect(),
        );
        self.kf_memo.lock().unwrap().insert(time, result.clone());
        result
    }

    /// Truth of an atom or compound formula at one point.
    pub fn eval_at(&self, formula: &Formula, point: Point) -> bool {
        self.eval_slice(formula, point.time)[point.run]
    }

    /// `K_i phi` at one point.
    pub fn eval_knows(&self, point: Point, agent: AgentId, phi: &Formula) -> bool {
        self.eval_at(&Formula::knows(agent, phi.clone()), point)
    }

    /// `E_N phi` at one point.
    pub fn eval_everyone(&self, point: Point, phi: &Formula) -> bool {
        self.eval_at(&Formula::everyone(phi.clone()), point)
    }

    /// All points of a time slice at which `C_N phi` holds.
    pub fn eval_common(&self, time: usize, phi: &Formula) -> Vec<Point> {
        let held = self.eval_slice(&Formula::common(phi.clone()), time);
        (0..self.num_runs)
            .filter(|&run| held[run])
            .map(|run| Point { run, time })
            .collect()
    }

    /// `D_N phi` at one point.
    pub fn eval_distributed(
        &self,
        point: Point,
        phi: &Formula,
    ) -> Result<bool, EpistemicsError> {
        if self.live_agents(point.run, point.time).next().is_none() {
            return Err(EpistemicsError::EmptyNonfailedSet {
                run: point.run,
                time: point.time,
            });
        }
        Ok(self.eval_at(&Formula::distributed(phi.clone()), point))
    }

    /// The knowledge-based decision program: decide 0 on `K_i(C_N exists 0)`,
    /// else decide 1 on `K_i(C_N exists 1)`, else no-op.
    pub fn eval_kb_program(
        &self,
        point: Point,
        agent: AgentId,
    ) -> Result<Action, EpistemicsError> {
        if !self.is_live(point.run, agent, point.time) {
            return Err(EpistemicsError::CrashedAgent {
                agent,
                run: point.run,
                time: point.time,
            });
        }
        for v in Value::ALL {
            let phi = Formula::knows(agent, Formula::common(Formula::exists(v)));
            if self.eval_at(&phi, point) {
                return Ok(Action::Decide(v));
            }
        }
        Ok(Action::Noop)
    }

    /// Per-time slices of `C_N(exists 0) or C_N(exists 1)`.
    pub fn common_knowledge_slices(&self) -> Vec<EvalCache> {
        let phi = Formula::common(Formula::exists(Value::Zero))
            .or(Formula::common(Formula::exists(Value::One)));
        (0..=self.config.horizon)
            .map(|time| self.eval_slice(&phi, time))
            .collect()
    }

    /// Smallest time at which some initial value is common knowledge.
    pub fn ck_onset_time(&self, run: usize) -> Option<usize> {
        let slices = self.common_knowledge_slices();
        (0..=self.config.horizon).find(|&time| slices[time][run])
    }
}
