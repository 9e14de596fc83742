//! Bounded refinement checking between levels.
//!
//! Levels are superposition refinements, so the gluing invariant is equality
//! after [`GlobalState::project`]. The check walks the concrete graph and
//! requires every concrete step to be matched by the same abstract event
//! between the projected states, with the abstract guard holding.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::checker::{explore, Counterexample, ExploreConfig, ExploreError, StateGraph, Verdict};
use crate::events::{refines_map, RefinementLevel, System};
use crate::kernel::{EventInstance, Trace};
use crate::scenario::Scenario;
use crate::state::GlobalState;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RefinementError {
    #[error("cannot project from {from} to {to}")]
    LevelMismatch {
        from: RefinementLevel,
        to: RefinementLevel,
    },
    #[error("event `{0}` has no abstract counterpart")]
    Unmapped(String),
}

#[derive(Debug, Clone)]
pub struct ProjectionMap {
    pub from: RefinementLevel,
    pub to: RefinementLevel,
    /// Concrete event name to abstract event name; absent names are new events.
    pub events: BTreeMap<&'static str, &'static str>,
}

impl ProjectionMap {
    /// Composes the per-level refines maps from `from` down to `to`.
    pub fn new(from: RefinementLevel, to: RefinementLevel) -> Result<Self, RefinementError> {
        if from <= to {
            return Err(RefinementError::LevelMismatch { from, to });
        }
        let mut events: Option<BTreeMap<&'static str, &'static str>> = None;
        let mut level = from;
        while level > to {
            let step =
                refines_map(level).map_err(|_| RefinementError::LevelMismatch { from, to })?;
            events = Some(match events {
                None => step,
                Some(acc) => acc
                    .into_iter()
                    .filter_map(|(c, a)| step.get(a).map(|b| (c, *b)))
                    .collect(),
            });
            level = level.below().expect("level above `to`");
        }
        Ok(ProjectionMap {
            from,
            to,
            events: events.unwrap_or_default(),
        })
    }

    pub fn state(&self, s: &GlobalState) -> GlobalState {
        s.project(self.to)
    }

    pub fn instance(&self, inst: &EventInstance) -> Option<EventInstance> {
        self.events
            .get(inst.event.as_str())
            .map(|a| EventInstance::new(*a, inst.args.clone()))
    }
}

/// Projects every state; steps of events new at the concrete level are elided.
pub fn project_trace(
    t: &Trace<GlobalState>,
    pm: &ProjectionMap,
) -> Result<Trace<GlobalState>, RefinementError> {
    if pm.from <= pm.to {
        return Err(RefinementError::LevelMismatch {
            from: pm.from,
            to: pm.to,
        });
    }
    let mut out = Trace::new(pm.state(&t.initial));
    for (inst, s) in &t.steps {
        if let Some(a) = pm.instance(inst) {
            out.steps.push((a, pm.state(s)));
        }
    }
    Ok(out)
}

fn failure(
    graph: &StateGraph,
    node: usize,
    step: Option<(EventInstance, GlobalState)>,
    why: String,
) -> Verdict {
    let mut trace = graph.trace_to(node);
    if let Some(s) = step {
        trace.steps.push(s);
    }
    Verdict::Fails(Box::new(Counterexample {
        property: why,
        trace,
        loop_start: None,
    }))
}

/// Checks `concrete` against `abstract_` from the given initial states, to
/// `depth` steps. `Holds` means bounded trace inclusion plus guard
/// strengthening on every reachable concrete state.
pub fn check_refinement_systems(
    concrete: &System,
    abstract_: &System,
    init_concrete: &GlobalState,
    init_abstract: &GlobalState,
    depth: usize,
) -> Result<Verdict, ExploreError> {
    let pm = ProjectionMap::new(concrete.level(), abstract_.level())
        .expect("concrete level lies above the abstract level");
    let cfg = ExploreConfig {
        depth,
        ..ExploreConfig::full()
    };
    let graph = explore(concrete, init_concrete, cfg)?;
    if pm.state(init_concrete) != *init_abstract {
        return Ok(failure(
            &graph,
            0,
            None,
            "initial states disagree under projection".into(),
        ));
    }
    for n in 0..graph.node_count() {
        let c = &graph.states[n];
        let a = pm.state(c);
        // Guard strengthening, including states cut by the depth bound.
        for inst in concrete.enabled(c) {
            let Some(ai) = pm.instance(&inst) else {
                continue;
            };
            if !abstract_
                .catalogue
                .is_enabled(&abstract_.model, &a, &ai)
                .unwrap_or(false)
            {
                let post = concrete.apply(c, &inst).expect("enabled");
                let why = format!(
                    "guard of {ai} at {} does not hold on the projected state",
                    pm.to
                );
                return Ok(failure(&graph, n, Some((inst, post)), why));
            }
        }
        for (inst, t) in &graph.edges[n] {
            let target = pm.state(&graph.states[*t]);
            let ok = match pm.instance(inst) {
                Some(ai) => abstract_.apply(&a, &ai).is_ok_and(|x| x == target),
                None => a == target,
            };
            if !ok {
                let why = format!("step {inst} has no matching {} step", pm.to);
                return Ok(failure(
                    &graph,
                    n,
                    Some((inst.clone(), graph.states[*t].clone())),
                    why,
                ));
            }
        }
    }
    Ok(Verdict::Holds)
}

/// Bounded refinement check of `from` against `to` on a scenario.
pub fn check_refinement(
    from: RefinementLevel,
    to: RefinementLevel,
    scenario: &Scenario,
    depth: usize,
) -> Result<Verdict, ExploreError> {
    assert!(
        from > to,
        "refinement is checked from a higher level to a lower one"
    );
    let concrete = System::new(&scenario.model(from), from);
    let abstract_ = System::new(&scenario.model(to), to);
    check_refinement_systems(
        &concrete,
        &abstract_,
        &scenario.initial_state(from),
        &scenario.initial_state(to),
        depth,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::{MsgId, SwitchId};
    use crate::kernel::Arg;
    use crate::state::{Message, MessageKind};

    #[test]
    fn map_composition() {
        let pm = ProjectionMap::new(RefinementLevel::L3, RefinementLevel::L0).unwrap();
        assert_eq!(pm.events.len(), 24);
        assert_eq!(pm.events["ctl_emitPkt"], "ctl_emitPkt");
        assert_eq!(
            ProjectionMap::new(RefinementLevel::L0, RefinementLevel::L1).unwrap_err(),
            RefinementError::LevelMismatch {
                from: RefinementLevel::L0,
                to: RefinementLevel::L1
            }
        );
    }

    #[test]
    fn priority_dropped_by_projection() {
        let mut s = GlobalState::default();
        let msg = Message {
            priority: Some(3),
            ..Message::new(MsgId(1), MessageKind::PKOut)
        };
        s.messages.insert(MsgId(1), msg.clone());
        let mut t = s.clone();
        t.chan_down.insert((MsgId(1), SwitchId(1)));
        let trace = Trace {
            initial: s,
            steps: vec![(
                EventInstance::new("ctl_emitPkt", vec![Arg::Switch(SwitchId(1))]),
                t,
            )],
        };
        let pm = ProjectionMap::new(RefinementLevel::L2, RefinementLevel::L1).unwrap();
        let p = project_trace(&trace, &pm).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.steps[0].0.event, "ctl_emitPkt");
        assert_eq!(p.steps[0].1.messages[&MsgId(1)].priority, None);
    }

    #[test]
    fn empty_trace_projects_to_empty() {
        let pm = ProjectionMap::new(RefinementLevel::L1, RefinementLevel::L0).unwrap();
        let t = Trace::new(GlobalState::default());
        assert!(project_trace(&t, &pm).unwrap().is_empty());
    }
}
