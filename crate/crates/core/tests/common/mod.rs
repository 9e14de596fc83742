#![allow(dead_code)]

use std::collections::{HashMap, VecDeque};
use std::path::PathBuf;

use sdn_evb::scenario::Scenario;
use sdn_evb::{GlobalState, RefinementLevel, System};

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(format!("{name}.scenario"))
}

pub fn scenario(name: &str) -> Scenario {
    Scenario::load(scenario_path(name)).expect("shipped scenario loads")
}

pub fn system(sc: &Scenario, level: RefinementLevel) -> (System, GlobalState) {
    (
        System::new(&sc.model(level), level),
        sc.initial_state(level),
    )
}

/// Reachable-state counts from a plain BFS that enumerates every argument
/// binding over the full domains (no candidate generators) and keys states
/// by value. Shares nothing with the production explorer beyond the event
/// definitions themselves.
pub struct OracleCounts {
    pub nodes: usize,
    pub edges: usize,
    pub deadlocks: usize,
    pub states: HashMap<GlobalState, usize>,
}

pub fn brute_force_bfs(sys: &System, init: &GlobalState) -> OracleCounts {
    let mut states = HashMap::new();
    let mut queue = VecDeque::new();
    states.insert(init.clone(), 0);
    queue.push_back(init.clone());
    let (mut edges, mut deadlocks) = (0, 0);
    while let Some(s) = queue.pop_front() {
        let enabled = sys.catalogue.enabled_instances_brute_force(&sys.model, &s);
        if enabled.is_empty() {
            deadlocks += 1;
        }
        let mut succ = std::collections::HashSet::new();
        for inst in enabled {
            let t = sys
                .catalogue
                .apply(&sys.model, &s, &inst)
                .expect("enabled instance applies");
            succ.insert((inst, t.clone()));
            if !states.contains_key(&t) {
                states.insert(t.clone(), states.len());
                queue.push_back(t);
            }
        }
        edges += succ.len();
    }
    OracleCounts {
        nodes: states.len(),
        edges,
        deadlocks,
        states,
    }
}

/// Golden reachable-state counts, produced by [`brute_force_bfs`] and frozen.
/// (scenario, level, nodes, edges, deadlocks)
pub const GOLDEN: &[(&str, RefinementLevel, usize, usize, usize)] = &[
    ("s1", RefinementLevel::L0, 7197, 15626, 136),
    ("s1", RefinementLevel::L1, 7197, 15626, 136),
    ("s1", RefinementLevel::L2, 7197, 15626, 136),
    ("s1", RefinementLevel::L3, 7197, 15042, 136),
    ("s2", RefinementLevel::L0, 63952, 163170, 526),
    ("s2", RefinementLevel::L1, 63952, 163170, 526),
    ("s2", RefinementLevel::L2, 63952, 163170, 526),
    ("s2", RefinementLevel::L3, 63952, 162476, 526),
];
