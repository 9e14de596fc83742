use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::kernel::Trace;
use crate::state::{typing_invariants, Field, GlobalState, MessageKind, Model};

use super::explore::StateGraph;

pub type Predicate = Arc<dyn Fn(&GlobalState) -> bool + Send + Sync>;

#[derive(Clone)]
pub struct InvariantDef {
    pub name: String,
    pub predicate: Predicate,
    /// Variables the predicate reads.
    pub reads: BTreeSet<Field>,
}

impl fmt::Debug for InvariantDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "InvariantDef({})", self.name)
    }
}

impl InvariantDef {
    pub fn new(
        name: impl Into<String>,
        reads: impl IntoIterator<Item = Field>,
        predicate: impl Fn(&GlobalState) -> bool + Send + Sync + 'static,
    ) -> Self {
        InvariantDef {
            name: name.into(),
            predicate: Arc::new(predicate),
            reads: reads.into_iter().collect(),
        }
    }
}

/// A failing run. `loop_start` marks the state index the last state loops
/// back to; `None` is a finite (terminating or violating) run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counterexample {
    pub property: String,
    pub trace: Trace<GlobalState>,
    pub loop_start: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Holds,
    Fails(Box<Counterexample>),
    /// No violation found, but the graph was truncated.
    BoundExceeded,
}

impl Verdict {
    pub fn holds(&self) -> bool {
        matches!(self, Verdict::Holds)
    }

    pub fn fails(&self) -> bool {
        matches!(self, Verdict::Fails(_))
    }

    pub fn counterexample(&self) -> Option<&Counterexample> {
        match self {
            Verdict::Fails(c) => Some(c),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Holds => "Holds",
            Verdict::Fails(_) => "Fails",
            Verdict::BoundExceeded => "BoundExceeded",
        }
    }
}

pub fn sent(s: &GlobalState, pair: &(crate::ids::PacketId, crate::ids::SwitchId)) -> bool {
    s.ctl_sent.contains(pair) || s.sw_sent.contains(pair)
}

/// Any packet in the data channel was sent by the controller or a switch.
pub fn sp_a(s: &GlobalState) -> bool {
    s.data_chan.distinct().all(|pair| sent(s, pair))
}

/// Any packet received by a switch was sent to it by the controller or a switch.
pub fn sp_b(s: &GlobalState) -> bool {
    s.sw_ipk().iter().all(|pair| sent(s, pair))
}

/// Every packet carried by a PKOut on the down channel was sent by the controller.
pub fn sp_c(s: &GlobalState) -> bool {
    s.chan_down
        .distinct()
        .all(|(m, sw)| match s.messages.get(m) {
            Some(msg) if msg.kind == MessageKind::PKOut => {
                msg.packet.is_some_and(|p| s.ctl_sent.contains(&(p, *sw)))
            }
            _ => true,
        })
}

/// SP_a, SP_b, SP_c and the typing invariants of `model`.
pub fn safety_suite(model: &Model) -> Vec<InvariantDef> {
    use Field::*;
    let m = model.clone();
    vec![
        InvariantDef::new("SP_a", [DataChan, CtlSentPkts, SwSentPkts], sp_a),
        InvariantDef::new("SP_b", [SwIPk, CtlSentPkts, SwSentPkts], sp_b),
        InvariantDef::new("SP_c", [SecureChanDown, MessageStore, CtlSentPkts], sp_c),
        InvariantDef::new("typing", all_fields(), move |s| {
            typing_invariants(&m, s).is_empty()
        }),
    ]
}

pub fn all_fields() -> Vec<Field> {
    use Field::*;
    vec![
        SwStatus,
        FlowTable,
        SwIncomingMsg,
        SwIPk,
        SwOMsg,
        SwOPk,
        ActionsQueues,
        CtlIncomingPk,
        CtlOutgoingPk,
        CtlOrders,
        PendingBarrier,
        PendingStatus,
        SecureChanDown,
        SecureChanUp,
        DataChan,
        CtlSentPkts,
        SwSentPkts,
        PacketPool,
        EntryPool,
        BarrierAsks,
        StatusAsks,
        MessageStore,
        MessagePriority,
    ]
}

/// Checks every node in BFS order; the first violation yields a shortest trace.
pub fn check_invariants(graph: &StateGraph, invs: &[InvariantDef]) -> Verdict {
    let bad = (0..graph.node_count()).into_par_iter().find_map_first(|n| {
        invs.iter()
            .find(|i| !(i.predicate)(&graph.states[n]))
            .map(|i| (n, i))
    });
    match bad {
        Some((n, inv)) => Verdict::Fails(Box::new(Counterexample {
            property: inv.name.clone(),
            trace: graph.trace_to(n),
            loop_start: None,
        })),
        None if graph.is_complete() => Verdict::Holds,
        None => Verdict::BoundExceeded,
    }
}
