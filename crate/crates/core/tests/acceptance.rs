//! Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero if any
//! criterion fails.

mod common;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use common::{brute_force_bfs, scenario, scenario_path, system, GOLDEN};
use sdn_evb::checker::{
    check_invariants, check_ltl, explore, ltl_witness, parse_ltl, safety_suite, ExploreConfig,
    StateGraph,
};
use sdn_evb::decomposer::{check_recomposition, Bounds};
use sdn_evb::events::send_pckt_forward;
use sdn_evb::kernel::EventDef;
use sdn_evb::refinement::{check_refinement, check_refinement_systems};
use sdn_evb::run::{policy_graph, run, scheduling_policy, Mode, RunOptions};
use sdn_evb::scenario::PolicyName;
use sdn_evb::scheduler::filter_priority;
use sdn_evb::{Arg, GlobalState, Model, RefinementLevel, System};

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

struct Graphs {
    full: BTreeMap<(&'static str, RefinementLevel), (StateGraph, Duration)>,
}

impl Graphs {
    fn build() -> Self {
        let mut full = BTreeMap::new();
        for name in ["s1", "s2"] {
            let sc = scenario(name);
            for level in RefinementLevel::ALL {
                let (sys, init) = system(&sc, level);
                let t = Instant::now();
                let g = explore(&sys, &init, ExploreConfig::full()).expect("explores");
                full.insert((name, level), (g, t.elapsed()));
            }
        }
        Graphs { full }
    }
}

fn safety(graphs: &Graphs) -> Outcome {
    for ((name, level), (g, took)) in &graphs.full {
        let sc = scenario(name);
        ensure(g.is_complete(), || {
            format!("{name} {level} graph incomplete")
        })?;
        let v = check_invariants(g, &safety_suite(&sc.model(*level)));
        ensure(v.holds(), || format!("{name} {level}: {}", v.label()))?;
        if *name == "s1" {
            ensure(*took < Duration::from_secs(10), || {
                format!("S1 {level} took {took:?}")
            })?;
        }
    }
    let slowest = graphs
        .full
        .iter()
        .filter(|((n, _), _)| *n == "s1")
        .map(|(_, (_, d))| *d)
        .max()
        .unwrap();
    Ok(format!(
        "SP_a, SP_b, SP_c, typing hold on 8 complete graphs; S1 explored in at most {slowest:.2?}"
    ))
}

fn liveness(graphs: &Graphs) -> Outcome {
    let deliv = parse_ltl("e(ctl_havePacket) => F(e(ctl_emitPkt))").unwrap();
    let status = parse_ltl("e(ctl_askStatusMsg) => F(e(ctl_rcvStatus))").unwrap();
    let okmach = parse_ltl("e(ctl_emitPkt) => X(e(sw_rcv_machingPkt))").unwrap();
    for ((name, level), (g, _)) in &graphs.full {
        for (pname, f) in [("LP_deliv", &deliv), ("LP_OKstatus", &status)] {
            let v = check_ltl(g, f).map_err(|e| e.to_string())?;
            ensure(v.holds(), || {
                format!("{pname} on {name} {level}: {}", v.label())
            })?;
        }
    }
    let mut reports = Vec::new();
    for name in ["s1", "s2"] {
        let sc = scenario(name);
        for policy in [
            PolicyName::Exhaustive,
            PolicyName::Seeded,
            PolicyName::Priority,
        ] {
            let (sys, init) = system(&sc, RefinementLevel::L2);
            let g = match policy {
                PolicyName::Exhaustive => graphs.full[&(name, RefinementLevel::L2)].0.clone(),
                _ => policy_graph(
                    &sys,
                    &init,
                    scheduling_policy(policy, sc.run.seed),
                    ExploreConfig::full(),
                )
                .map_err(|e| e.to_string())?,
            };
            let v = check_ltl(&g, &okmach).map_err(|e| e.to_string())?;
            let evidence = match v.counterexample() {
                Some(c) => Some(("counterexample", c.trace.clone())),
                None => ltl_witness(&g, &okmach)
                    .map_err(|e| e.to_string())?
                    .map(|w| ("witness", w.trace)),
            };
            let (kind, trace) =
                evidence.ok_or_else(|| format!("LP_OKMach on {name}/{policy:?}: no evidence"))?;
            trace
                .replay(&sys.model, &sys.catalogue)
                .map_err(|e| format!("LP_OKMach evidence does not replay: {e}"))?;
            reports.push(format!(
                "{name}/{policy:?}={} ({kind}, {} steps)",
                v.label(),
                trace.len()
            ));
        }
    }
    Ok(format!(
        "LP_deliv, LP_OKstatus hold on 8 graphs; LP_OKMach: {}",
        reports.join(", ")
    ))
}

fn mutation() -> Outcome {
    let sc = scenario("s1");
    let (sys, init) = system(&sc, RefinementLevel::L0);
    let def = sys.catalogue.get("sw_sendPckt2sw").unwrap().clone();
    let ghostless = System::with_catalogue(
        sys.model.clone(),
        sys.catalogue.clone().replace(EventDef {
            action: send_pckt_forward,
            ..def
        }),
    );
    let g = explore(&ghostless, &init, ExploreConfig::full()).map_err(|e| e.to_string())?;
    let sp_a: Vec<_> = safety_suite(&sys.model)
        .into_iter()
        .filter(|i| i.name == "SP_a")
        .collect();
    let v = check_invariants(&g, &sp_a);
    let cex = v
        .counterexample()
        .ok_or("SP_a survives the ghostless mutant")?;
    ensure(cex.trace.len() <= 6, || {
        format!("SP_a counterexample has {} steps", cex.trace.len())
    })?;
    cex.trace
        .replay(&ghostless.model, &ghostless.catalogue)
        .map_err(|e| e.to_string())?;

    let no_emit = System::with_catalogue(
        sys.model.clone(),
        sys.catalogue.clone().without("ctl_emitPkt"),
    );
    let g = explore(&no_emit, &init, ExploreConfig::full()).map_err(|e| e.to_string())?;
    let deliv = parse_ltl("e(ctl_havePacket) => F(e(ctl_emitPkt))").unwrap();
    let v = check_ltl(&g, &deliv).map_err(|e| e.to_string())?;
    let lcex = v
        .counterexample()
        .ok_or("LP_deliv survives removing ctl_emitPkt")?;
    Ok(format!(
        "SP_a fails in {} steps without the swSentPkts update; LP_deliv fails ({} steps) without ctl_emitPkt",
        cex.trace.len(),
        lcex.trace.len()
    ))
}

fn on_switch(inst: &sdn_evb::EventInstance) -> Option<sdn_evb::ids::SwitchId> {
    inst.event
        .starts_with("sw_")
        .then(|| inst.args.first().and_then(Arg::switch))
        .flatten()
}

fn priority(graphs: &Graphs) -> Outcome {
    let sc = scenario("s2");
    let l2 = System::new(&sc.model(RefinementLevel::L2), RefinementLevel::L2);
    let g = &graphs.full[&("s2", RefinementLevel::L3)].0;
    let mut lower_edges = 0;
    for (n, out) in g.edges.iter().enumerate() {
        let unfiltered = l2.enabled(&g.states[n]);
        for (inst, _) in out {
            if inst.event != "sw_newFTentry" && inst.event != "sw_sndPk2ctrl" {
                continue;
            }
            lower_edges += 1;
            let sw = on_switch(inst);
            let clash = unfiltered
                .iter()
                .any(|i| i.event == "sw_sendPckt2sw" && on_switch(i) == sw);
            ensure(!clash, || {
                format!("{inst} taken at node {n} while sw_sendPckt2sw is enabled")
            })?;
        }
        let l3 = &out.iter().map(|(i, _)| i.clone()).collect::<Vec<_>>();
        let filtered = filter_priority(&unfiltered, sdn_evb::scheduler::PriorityOrder::shipped());
        ensure(&filtered == l3, || {
            format!("filter_priority disagrees with L3 guards at node {n}")
        })?;
    }
    let mut strict = Vec::new();
    for name in ["s1", "s2"] {
        let e2 = graphs.full[&(name, RefinementLevel::L2)].0.edge_set();
        let e3 = graphs.full[&(name, RefinementLevel::L3)].0.edge_set();
        if e3.is_subset(&e2) && e3.len() < e2.len() {
            strict.push(format!("{name}: {} < {}", e3.len(), e2.len()));
        }
    }
    ensure(!strict.is_empty(), || {
        "L3 edges are never a strict subset".into()
    })?;
    Ok(format!(
        "{lower_edges} lower-priority S2 edges checked; strict subset on {}",
        strict.join(", ")
    ))
}

fn weak_unmatching_guard(model: &Model, s: &GlobalState, args: &[Arg]) -> bool {
    let (Some(sw), Some(p)) = (args[0].switch(), args[1].packet()) else {
        return false;
    };
    let Some(st) = s.switches.get(&sw) else {
        return false;
    };
    s.data_chan.contains(&(p, sw)) && !st.buffers(p) && model.fresh_sw_msg(s).is_some()
}

fn refinement() -> Outcome {
    const DEPTH: usize = 12;
    use RefinementLevel::*;
    for name in ["s1", "s2"] {
        let sc = scenario(name);
        for (from, to) in [(L1, L0), (L2, L1), (L3, L2)] {
            let v = check_refinement(from, to, &sc, DEPTH).map_err(|e| e.to_string())?;
            ensure(v.holds(), || format!("{name} {from}->{to}: {}", v.label()))?;
        }
    }
    let sc = scenario("s1");
    let concrete = System::new(&sc.model(L1), L1);
    let def = concrete
        .catalogue
        .get("sw_rcv_unmachingPkt")
        .unwrap()
        .clone();
    let weak = System::with_catalogue(
        concrete.model.clone(),
        concrete.catalogue.clone().replace(EventDef {
            guard: weak_unmatching_guard,
            candidates: None,
            ..def
        }),
    );
    let abs = System::new(&sc.model(L0), L0);
    let v = check_refinement_systems(
        &weak,
        &abs,
        &sc.initial_state(L1),
        &sc.initial_state(L0),
        DEPTH,
    )
    .map_err(|e| e.to_string())?;
    ensure(v.fails(), || "guard-weakening mutant refines".into())?;
    Ok(format!("(L1,L0), (L2,L1), (L3,L2) hold on S1 and S2 at depth {DEPTH}; guard-weakening mutant fails"))
}

fn decomposition() -> Outcome {
    let sc = scenario("s1");
    let bounds = Bounds::new(64);
    let mut parts = Vec::new();
    for level in [RefinementLevel::L0, RefinementLevel::L3] {
        let r = check_recomposition(level, &sc, bounds).map_err(|e| e.to_string())?;
        ensure(r.product.holds(), || {
            format!("{level}: recomposed graph differs: {}", r.product.label())
        })?;
        ensure(r.soundness.holds(), || {
            format!("{level}: soundness {}", r.soundness.label())
        })?;
        for c in &r.components {
            ensure(!c.frame.fails(), || {
                format!("{level} {:?}: frame fails", c.role)
            })?;
            for (n, v) in &c.safety {
                ensure(!v.fails(), || format!("{level} {:?}: {n} fails", c.role))?;
            }
        }
        let sizes: Vec<_> = r
            .components
            .iter()
            .map(|c| format!("{:?} {}", c.role, c.nodes))
            .collect();
        parts.push(format!("{level} [{}]", sizes.join(", ")));
    }
    Ok(format!(
        "recomposed = global at L0 and L3; projected safety holds on components to depth {}: {}",
        bounds.component,
        parts.join("; ")
    ))
}

fn determinism() -> Outcome {
    let sc = scenario("s1");
    let (sys, init) = system(&sc, RefinementLevel::L3);
    let a = explore(
        &sys,
        &init,
        ExploreConfig {
            workers: 1,
            ..ExploreConfig::full()
        },
    )
    .map_err(|e| e.to_string())?;
    let b = explore(
        &sys,
        &init,
        ExploreConfig {
            workers: 4,
            ..ExploreConfig::full()
        },
    )
    .map_err(|e| e.to_string())?;
    ensure(a.states == b.states && a.edges == b.edges, || {
        "graphs differ between 1 and 4 workers".into()
    })?;
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut bytes = Vec::new();
    for (i, workers) in [1, 4].into_iter().enumerate() {
        let dir = tmp.path().join(i.to_string());
        let mut o = RunOptions::new(Mode::Simulate, scenario_path("s2"), &dir);
        o.policy = Some(PolicyName::Seeded);
        o.workers = workers;
        run(&o).map_err(|e| e.to_string())?;
        bytes.push(std::fs::read(dir.join("trace.jsonl")).map_err(|e| e.to_string())?);
    }
    ensure(bytes[0] == bytes[1], || "trace files differ".into())?;
    Ok(format!(
        "graphs equal for 1 and 4 workers; trace files byte-identical ({} bytes)",
        bytes[0].len()
    ))
}

fn oracle(graphs: &Graphs) -> Outcome {
    for &(name, level, nodes, edges, deadlocks) in GOLDEN {
        let sc = scenario(name);
        let (sys, init) = system(&sc, level);
        let o = brute_force_bfs(&sys, &init);
        ensure(
            (o.nodes, o.edges, o.deadlocks) == (nodes, edges, deadlocks),
            || {
                format!(
                    "oracle on {name} {level}: {} nodes, {} edges",
                    o.nodes, o.edges
                )
            },
        )?;
        let g = &graphs.full[&(name, level)].0;
        ensure((g.node_count(), g.edge_count()) == (nodes, edges), || {
            format!(
                "explorer on {name} {level}: {} nodes, {} edges",
                g.node_count(),
                g.edge_count()
            )
        })?;
    }
    Ok(
        "brute-force BFS and explorer match the golden counts: S1 7197 states, S2 63952 states"
            .into(),
    )
}

fn main() {
    let graphs = Graphs::build();
    let criteria: Vec<Criterion> = vec![
        ("safety", Box::new(|| safety(&graphs))),
        ("liveness", Box::new(|| liveness(&graphs))),
        ("mutation", Box::new(mutation)),
        ("priority", Box::new(|| priority(&graphs))),
        ("refinement", Box::new(refinement)),
        ("decomposition", Box::new(decomposition)),
        ("determinism", Box::new(determinism)),
        ("oracle", Box::new(|| oracle(&graphs))),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name}: {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
