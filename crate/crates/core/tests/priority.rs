mod common;

use common::{scenario, system};
use sdn_evb::checker::{explore, ExploreConfig};
use sdn_evb::scheduler::{filter_priority, PriorityOrder, MESSAGE_CONSUMERS};
use sdn_evb::{Arg, EventInstance, RefinementLevel, System};

fn on_switch(inst: &EventInstance) -> Option<sdn_evb::ids::SwitchId> {
    inst.event
        .starts_with("sw_")
        .then(|| inst.args.first().and_then(Arg::switch))
        .flatten()
}

/// Every L3 edge taken by a lower event must not have a higher event enabled
/// on the same switch, judged by the unprioritised L2 catalogue.
fn assert_priority_respected(name: &str) {
    let sc = scenario(name);
    let (l3, init) = system(&sc, RefinementLevel::L3);
    let l2 = System::new(&sc.model(RefinementLevel::L2), RefinementLevel::L2);
    let g = explore(&l3, &init, ExploreConfig::full()).unwrap();
    assert!(g.is_complete());
    let mut checked = 0;
    for (n, out) in g.edges.iter().enumerate() {
        let unfiltered = l2.enabled(&g.states[n]);
        let higher_on = |sw, names: &[&str]| {
            unfiltered
                .iter()
                .any(|i| names.contains(&i.event.as_str()) && on_switch(i) == Some(sw))
        };
        for (inst, _) in out {
            let Some(sw) = on_switch(inst) else { continue };
            match inst.event.as_str() {
                "sw_newFTentry" => {
                    assert!(!higher_on(sw, &["sw_sendPckt2sw"]), "{inst} at node {n}")
                }
                "sw_sndPk2ctrl" => {
                    assert!(
                        !higher_on(sw, &["sw_sendPckt2sw", "sw_newFTentry"]),
                        "{inst} at node {n}"
                    )
                }
                e if MESSAGE_CONSUMERS.contains(&e) => {
                    assert!(!higher_on(sw, &["sw_barrierRp"]), "{inst} at node {n}")
                }
                _ => continue,
            }
            checked += 1;
        }
    }
    assert!(checked > 0);
}

#[test]
fn l3_respects_priority_on_s1() {
    assert_priority_respected("s1");
}

#[test]
fn l3_respects_priority_on_s2() {
    assert_priority_respected("s2");
}

#[test]
fn filter_priority_agrees_with_l3_guards() {
    let order = PriorityOrder::shipped();
    for name in ["s1", "s2"] {
        let sc = scenario(name);
        let (l3, init) = system(&sc, RefinementLevel::L3);
        let l2 = System::new(&sc.model(RefinementLevel::L2), RefinementLevel::L2);
        let g = explore(&l3, &init, ExploreConfig::full()).unwrap();
        let step = if name == "s1" { 1 } else { 7 };
        for s in g.states.iter().step_by(step) {
            assert_eq!(
                filter_priority(&l2.enabled(s), order),
                l3.enabled(s),
                "{name}"
            );
        }
    }
}

#[test]
fn l3_edges_strict_subset_of_unfiltered() {
    let sc = scenario("s1");
    let (l2, init2) = system(&sc, RefinementLevel::L2);
    let (l3, init3) = system(&sc, RefinementLevel::L3);
    assert_eq!(init2, init3);
    let e2 = explore(&l2, &init2, ExploreConfig::full())
        .unwrap()
        .edge_set();
    let e3 = explore(&l3, &init3, ExploreConfig::full())
        .unwrap()
        .edge_set();
    assert!(e3.is_subset(&e2));
    assert!(e3.len() < e2.len());
}
