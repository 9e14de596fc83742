mod common;

use common::scenario;
use sdn_evb::decomposer::{check_components, check_recomposition, decompose, Bounds, Role};
use sdn_evb::kernel::EventDef;
use sdn_evb::{Arg, GlobalState, Model, RefinementLevel};

fn bounds() -> Bounds {
    Bounds {
        global: 64,
        component: 10,
    }
}

#[test]
fn recomposition_holds_on_s1() {
    let sc = scenario("s1");
    for level in [RefinementLevel::L0, RefinementLevel::L3] {
        let r = check_recomposition(level, &sc, bounds()).unwrap();
        assert!(r.product.holds(), "{level}");
        assert!(r.soundness.holds(), "{level}");
        assert!(r.verdict().holds(), "{level}");
        for c in &r.components {
            assert!(!c.frame.fails(), "{level} {:?}", c.role);
            assert!(
                c.safety.iter().all(|(_, v)| !v.fails()),
                "{level} {:?}",
                c.role
            );
            let names: Vec<_> = c.safety.iter().map(|(n, _)| n.as_str()).collect();
            match c.role {
                Role::Controller => assert_eq!(names, ["SP_a", "SP_c"]),
                Role::Switches => assert_eq!(names, ["SP_a", "SP_b", "SP_c"]),
            }
        }
    }
}

#[test]
fn recomposition_holds_at_l1_and_l2() {
    let sc = scenario("s1");
    for level in [RefinementLevel::L1, RefinementLevel::L2] {
        let r = check_recomposition(
            level,
            &sc,
            Bounds {
                global: 64,
                component: 6,
            },
        )
        .unwrap();
        assert!(r.verdict().holds(), "{level}");
    }
}

#[test]
fn dropping_an_own_event_breaks_the_product() {
    let sc = scenario("s1");
    let (mut ctl, sw) = decompose(RefinementLevel::L0);
    ctl.own.retain(|r| r.def.name != "ctl_emitPkt");
    let r = check_components(
        RefinementLevel::L0,
        &sc,
        Bounds {
            global: 64,
            component: 4,
        },
        &ctl,
        &sw,
    )
    .unwrap();
    assert!(r.product.fails());
    assert!(r.verdict().fails());
}

fn emit_without_ghost(m: &Model, s: &GlobalState, a: &[Arg]) -> GlobalState {
    let (_, sw) = decompose(m.level);
    let mut t = (sw.external_for("ctl_emitPkt").unwrap().def.action)(m, s, a);
    t.ctl_sent = s.ctl_sent.clone();
    t
}

#[test]
fn unfaithful_external_breaks_soundness() {
    let sc = scenario("s1");
    let (ctl, mut sw) = decompose(RefinementLevel::L0);
    let ext = sw
        .external
        .iter_mut()
        .find(|e| e.mirrors == "ctl_emitPkt")
        .unwrap();
    ext.def = EventDef {
        action: emit_without_ghost,
        ..ext.def.clone()
    };
    let r = check_components(
        RefinementLevel::L0,
        &sc,
        Bounds {
            global: 64,
            component: 4,
        },
        &ctl,
        &sw,
    )
    .unwrap();
    let cex = r.soundness.counterexample().expect("soundness fails");
    assert_eq!(cex.trace.steps.last().unwrap().0.event, "ctl_emitPkt");
}

fn receive_and_touch_controller(m: &Model, s: &GlobalState, a: &[Arg]) -> GlobalState {
    let (ctl, _) = decompose(m.level);
    let mut t = (ctl.external_for("sw_rcv_machingPkt").unwrap().def.action)(m, s, a);
    t.controller
        .incoming_pk
        .insert(a[1].packet().unwrap(), a[0].switch().unwrap());
    t
}

#[test]
fn external_writing_private_state_breaks_frame() {
    let sc = scenario("s1");
    let (mut ctl, sw) = decompose(RefinementLevel::L0);
    let ext = ctl
        .external
        .iter_mut()
        .find(|e| e.mirrors == "sw_rcv_machingPkt")
        .unwrap();
    ext.def = EventDef {
        action: receive_and_touch_controller,
        ..ext.def.clone()
    };
    let r = check_components(
        RefinementLevel::L0,
        &sc,
        Bounds {
            global: 64,
            component: 8,
        },
        &ctl,
        &sw,
    )
    .unwrap();
    let frame = &r
        .components
        .iter()
        .find(|c| c.role == Role::Controller)
        .unwrap()
        .frame;
    assert!(frame
        .counterexample()
        .unwrap()
        .property
        .contains("CtlIncomingPk"));
}
