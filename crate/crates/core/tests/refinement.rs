mod common;

use common::scenario;
use sdn_evb::refinement::{check_refinement, project_trace, ProjectionMap};
use sdn_evb::run::{scheduling_policy, simulate};
use sdn_evb::scenario::PolicyName;
use sdn_evb::{RefinementLevel, System};

const DEPTH: usize = 12;

#[test]
fn adjacent_levels_refine_on_s1() {
    let sc = scenario("s1");
    for (from, to) in [
        (RefinementLevel::L1, RefinementLevel::L0),
        (RefinementLevel::L2, RefinementLevel::L1),
        (RefinementLevel::L3, RefinementLevel::L2),
    ] {
        let v = check_refinement(from, to, &sc, 64).unwrap();
        assert!(v.holds(), "{from} -> {to}: {v:?}");
    }
}

#[test]
fn adjacent_levels_refine_on_s2() {
    let sc = scenario("s2");
    for (from, to) in [
        (RefinementLevel::L1, RefinementLevel::L0),
        (RefinementLevel::L2, RefinementLevel::L1),
        (RefinementLevel::L3, RefinementLevel::L2),
    ] {
        let v = check_refinement(from, to, &sc, DEPTH).unwrap();
        assert!(v.holds(), "{from} -> {to}: {v:?}");
    }
}

#[test]
fn composed_projection_l3_to_l0() {
    let sc = scenario("s1");
    assert!(
        check_refinement(RefinementLevel::L3, RefinementLevel::L0, &sc, DEPTH)
            .unwrap()
            .holds()
    );
}

#[test]
fn projected_simulation_replays_at_the_abstract_level() {
    let sc = scenario("s2");
    let concrete = System::new(&sc.model(RefinementLevel::L3), RefinementLevel::L3);
    let abs = System::new(&sc.model(RefinementLevel::L0), RefinementLevel::L0);
    for seed in 0..5 {
        let t = simulate(
            &concrete,
            &sc.initial_state(RefinementLevel::L3),
            scheduling_policy(PolicyName::Seeded, seed),
            60,
            false,
        )
        .unwrap();
        let pm = ProjectionMap::new(RefinementLevel::L3, RefinementLevel::L0).unwrap();
        let p = project_trace(&t, &pm).unwrap();
        assert_eq!(p.initial, sc.initial_state(RefinementLevel::L0));
        p.replay(&abs.model, &abs.catalogue).unwrap();
    }
}
