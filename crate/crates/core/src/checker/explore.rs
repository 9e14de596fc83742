use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;
use thiserror::Error;

use crate::events::System;
use crate::kernel::{EventInstance, Trace};
use crate::state::{typing_invariants, GlobalState};

/// Environment variable holding the exploration worker count.
pub const WORKERS_ENV: &str = "SDN_EVB_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExploreConfig {
    /// Maximum BFS depth expanded; states at this depth are not expanded.
    pub depth: usize,
    /// Successors expanded per state, in canonical order; 0 means all.
    pub branch: usize,
    pub workers: usize,
}

impl ExploreConfig {
    /// Fixpoint exploration with the worker count from the environment.
    pub fn full() -> Self {
        ExploreConfig {
            depth: usize::MAX,
            branch: 0,
            workers: workers_from_env(),
        }
    }

    pub fn with_depth(depth: usize) -> Self {
        ExploreConfig {
            depth,
            ..Self::full()
        }
    }
}

/// Worker count from [`WORKERS_ENV`], defaulting to the available parallelism.
pub fn workers_from_env() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|n| *n > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

#[derive(Debug, Error)]
pub enum ExploreError {
    #[error("initial state is ill-typed: {0}")]
    InvariantViolationAtInit(String),
    #[error("cannot start worker pool: {0}")]
    Workers(String),
}

/// Explicit reachable state graph. Node 0 is the initial state and nodes are
/// numbered in BFS discovery order, which is independent of the worker count.
#[derive(Debug, Clone)]
pub struct StateGraph {
    pub states: Vec<GlobalState>,
    pub index: HashMap<GlobalState, usize>,
    /// Outgoing edges per node, sorted by instance.
    pub edges: Vec<Vec<(EventInstance, usize)>>,
    /// BFS tree: the first edge that discovered each node.
    pub parent: Vec<Option<(usize, EventInstance)>>,
    pub depth: Vec<usize>,
    /// Nodes whose successors were not all expanded (depth or branch bound).
    pub truncated: BTreeSet<usize>,
}

impl StateGraph {
    pub fn initial(&self) -> &GlobalState {
        &self.states[0]
    }

    pub fn node_count(&self) -> usize {
        self.states.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }

    pub fn is_complete(&self) -> bool {
        self.truncated.is_empty()
    }

    /// Fully expanded nodes with no successor.
    pub fn deadlocks(&self) -> Vec<usize> {
        (0..self.states.len())
            .filter(|n| self.edges[*n].is_empty() && !self.truncated.contains(n))
            .collect()
    }

    pub fn max_depth(&self) -> usize {
        self.depth.iter().copied().max().unwrap_or(0)
    }

    /// Shortest trace from the initial state to `node`.
    pub fn trace_to(&self, node: usize) -> Trace<GlobalState> {
        let mut rev = Vec::new();
        let mut cur = node;
        while let Some((p, inst)) = &self.parent[cur] {
            rev.push((inst.clone(), self.states[cur].clone()));
            cur = *p;
        }
        rev.reverse();
        Trace {
            initial: self.states[0].clone(),
            steps: rev,
        }
    }

    /// Edges as `(source digest, instance, target digest)`, a representation
    /// independent of node numbering.
    pub fn edge_set(&self) -> BTreeSet<(String, EventInstance, String)> {
        let digests: Vec<String> = self.states.iter().map(GlobalState::digest).collect();
        self.edges
            .iter()
            .enumerate()
            .flat_map(|(n, out)| {
                let digests = &digests;
                out.iter()
                    .map(move |(i, t)| (digests[n].clone(), i.clone(), digests[*t].clone()))
            })
            .collect()
    }

    pub fn node_set(&self) -> BTreeSet<&GlobalState> {
        self.states.iter().collect()
    }
}

type Expansion = (Vec<(EventInstance, GlobalState)>, bool);

fn expand(sys: &System, s: &GlobalState, cfg: &ExploreConfig) -> Expansion {
    let mut enabled = sys.enabled(s);
    let capped = cfg.branch > 0 && enabled.len() > cfg.branch;
    if capped {
        enabled.truncate(cfg.branch);
    }
    let succ = enabled
        .into_iter()
        .map(|inst| {
            let t = sys.apply(s, &inst).expect("enabled instance applies");
            (inst, t)
        })
        .collect();
    (succ, capped)
}

/// Breadth-first exploration from `initial` under `sys`.
pub fn explore(
    sys: &System,
    initial: &GlobalState,
    cfg: ExploreConfig,
) -> Result<StateGraph, ExploreError> {
    if let Some(v) = typing_invariants(&sys.model, initial).first() {
        return Err(ExploreError::InvariantViolationAtInit(v.to_string()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| ExploreError::Workers(e.to_string()))?;

    let mut g = StateGraph {
        states: vec![initial.clone()],
        index: HashMap::from([(initial.clone(), 0)]),
        edges: vec![Vec::new()],
        parent: vec![None],
        depth: vec![0],
        truncated: BTreeSet::new(),
    };
    let mut frontier = vec![0usize];
    let mut level = 0usize;
    while !frontier.is_empty() {
        if level >= cfg.depth {
            for n in frontier {
                if !sys.enabled(&g.states[n]).is_empty() {
                    g.truncated.insert(n);
                }
            }
            break;
        }
        let expansions: Vec<Expansion> = if cfg.workers <= 1 {
            frontier
                .iter()
                .map(|n| expand(sys, &g.states[*n], &cfg))
                .collect()
        } else {
            let states = &g.states;
            pool.install(|| {
                frontier
                    .par_iter()
                    .map(|n| expand(sys, &states[*n], &cfg))
                    .collect()
            })
        };
        // Merge sequentially in frontier order so numbering is deterministic.
        let mut next = Vec::new();
        for (n, (succ, capped)) in frontier.iter().zip(expansions) {
            if capped {
                g.truncated.insert(*n);
            }
            let mut out = Vec::with_capacity(succ.len());
            for (inst, t) in succ {
                let id = match g.index.get(&t) {
                    Some(id) => *id,
                    None => {
                        let id = g.states.len();
                        g.index.insert(t.clone(), id);
                        g.states.push(t);
                        g.edges.push(Vec::new());
                        g.parent.push(Some((*n, inst.clone())));
                        g.depth.push(level + 1);
                        next.push(id);
                        id
                    }
                };
                out.push((inst, id));
            }
            g.edges[*n] = out;
        }
        frontier = next;
        level += 1;
    }
    Ok(g)
}
