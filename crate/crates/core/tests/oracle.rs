mod common;

use common::{brute_force_bfs, scenario, system, GOLDEN};
use sdn_evb::checker::{explore, ExploreConfig};

#[test]
fn explorer_matches_frozen_counts() {
    for &(name, level, nodes, edges, deadlocks) in GOLDEN {
        let sc = scenario(name);
        let (sys, init) = system(&sc, level);
        let g = explore(&sys, &init, ExploreConfig::full()).unwrap();
        assert!(g.is_complete(), "{name} {level}");
        assert_eq!(
            (g.node_count(), g.edge_count(), g.deadlocks().len()),
            (nodes, edges, deadlocks),
            "{name} {level}"
        );
    }
}

#[test]
fn brute_force_oracle_reproduces_goldens_on_s1() {
    for &(name, level, nodes, edges, deadlocks) in GOLDEN.iter().filter(|g| g.0 == "s1") {
        let sc = scenario(name);
        let (sys, init) = system(&sc, level);
        let o = brute_force_bfs(&sys, &init);
        assert_eq!(
            (o.nodes, o.edges, o.deadlocks),
            (nodes, edges, deadlocks),
            "{name} {level}"
        );
        let g = explore(&sys, &init, ExploreConfig::full()).unwrap();
        assert!(g.states.iter().all(|s| o.states.contains_key(s)));
    }
}

#[test]
fn brute_force_oracle_reproduces_goldens_on_s2() {
    // One level suffices here; the acceptance suite runs the oracle on all.
    let &(name, level, nodes, edges, deadlocks) = GOLDEN.iter().find(|g| g.0 == "s2").unwrap();
    let sc = scenario(name);
    let (sys, init) = system(&sc, level);
    let o = brute_force_bfs(&sys, &init);
    assert_eq!((o.nodes, o.edges, o.deadlocks), (nodes, edges, deadlocks));
}

#[test]
fn candidate_generators_agree_with_brute_force() {
    for &(name, level, ..) in GOLDEN.iter().filter(|g| g.0 == "s1") {
        let sc = scenario(name);
        let (sys, init) = system(&sc, level);
        let g = explore(&sys, &init, ExploreConfig::full()).unwrap();
        for s in &g.states {
            assert_eq!(
                sys.catalogue.enabled_instances(&sys.model, s),
                sys.catalogue.enabled_instances_brute_force(&sys.model, s),
                "{name} {level}"
            );
        }
    }
}

#[test]
fn candidate_generators_agree_on_s2_sample() {
    let sc = scenario("s2");
    for level in [sdn_evb::RefinementLevel::L0, sdn_evb::RefinementLevel::L3] {
        let (sys, init) = system(&sc, level);
        let g = explore(&sys, &init, ExploreConfig::full()).unwrap();
        for s in g.states.iter().step_by(97) {
            assert_eq!(
                sys.catalogue.enabled_instances(&sys.model, s),
                sys.catalogue.enabled_instances_brute_force(&sys.model, s)
            );
        }
    }
}
