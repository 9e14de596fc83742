//! Shared-variable decomposition into a controller and a switches component.
//!
//! Each component owns the events of its family. Every peer event that writes
//! a shared variable is mirrored by an external event `ext_<name>` whose guard
//! reads only shared variables and context, and whose action performs only the
//! peer's shared writes. External events over-approximate the peer and are
//! never refined.
//!
//! The write-once message store is shared alongside the channels and ghosts,
//! since minted messages are read by both sides.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::checker::{
    check_invariants, explore, safety_suite, Counterexample, ExploreConfig, ExploreError,
    StateGraph, Verdict,
};
use crate::events::{
    event_catalog, msg_at, pk_at, sw_at, up_of_kind, CatalogueRow, Family, RefinementLevel, System,
};
use crate::ids::{EntryId, SwitchId};
use crate::kernel::{Arg, Catalogue, EventDef, EventInstance, Sort};
use crate::scenario::Scenario;
use crate::state::{
    changed_fields, Field, FlowEntry, GlobalState, Message, MessageKind, Model, FIELD_COUNT,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Role {
    Controller,
    Switches,
}

#[derive(Debug, Clone)]
pub struct ExternalEvent {
    pub def: EventDef<Model>,
    /// The peer event this one stands in for.
    pub mirrors: &'static str,
    pub write_set: BTreeSet<Field>,
    pub refinable: bool,
}

#[derive(Debug, Clone)]
pub struct Component {
    pub role: Role,
    pub own: Vec<CatalogueRow>,
    pub external: Vec<ExternalEvent>,
    pub variables: BTreeSet<Field>,
    pub shared: BTreeSet<Field>,
}

pub fn shared_variables() -> BTreeSet<Field> {
    use Field::*;
    [
        SecureChanDown,
        SecureChanUp,
        DataChan,
        CtlSentPkts,
        SwSentPkts,
        MessageStore,
        MessagePriority,
    ]
    .into()
}

pub fn private_variables(role: Role) -> BTreeSet<Field> {
    use Field::*;
    match role {
        Role::Controller => [
            CtlIncomingPk,
            CtlOutgoingPk,
            CtlOrders,
            PendingBarrier,
            PendingStatus,
            PacketPool,
            EntryPool,
            BarrierAsks,
            StatusAsks,
        ]
        .into(),
        Role::Switches => [
            SwStatus,
            FlowTable,
            SwIncomingMsg,
            SwIPk,
            SwOMsg,
            SwOPk,
            ActionsQueues,
        ]
        .into(),
    }
}

// ---------------------------------------------------------------------------
// external events mirroring switch events (used by the controller component)

fn in_data_chan(_: &Model, s: &GlobalState, a: &[Arg]) -> bool {
    matches!((sw_at(a, 0), pk_at(a, 1)), (Some(sw), Some(p)) if s.data_chan.contains(&(p, sw)))
}

fn take_from_data_chan(_: &Model, s: &GlobalState, a: &[Arg]) -> GlobalState {
    let mut t = s.clone();
    t.data_chan
        .remove_one(&(pk_at(a, 1).unwrap(), sw_at(a, 0).unwrap()));
    t
}

fn ext_unmatching_guard(m: &Model, s: &GlobalState, a: &[Arg]) -> bool {
    in_data_chan(m, s, a) && m.fresh_sw_msg(s).is_some()
}

fn ext_unmatching_action(m: &Model, s: &GlobalState, a: &[Arg]) -> GlobalState {
    let mut t = take_from_data_chan(m, s, a);
    let id = m.fresh_sw_msg(s).unwrap();
    t.messages.insert(
        id,
        Message {
            packet: pk_at(a, 1),
            ..m.mint(id, MessageKind::PacketIn)
        },
    );
    t
}

fn minted_not_up(s: &GlobalState, a: &[Arg], kinds: &[MessageKind]) -> bool {
    let (Some(sw), Some(m)) = (sw_at(a, 0), msg_at(a, 1)) else {
        return false;
    };
    s.switches.contains_key(&sw)
        && s.kind_of(m).is_some_and(|k| kinds.contains(&k))
        && !s.chan_up.distinct().any(|(x, _)| *x == m)
}

fn ext_snd_pk_guard(_: &Model, s: &GlobalState, a: &[Arg]) -> bool {
    minted_not_up(s, a, &[MessageKind::PacketIn])
}

fn ext_snd_msg_guard(_: &Model, s: &GlobalState, a: &[Arg]) -> bool {
    minted_not_up(s, a, &[MessageKind::BarrierAck, MessageKind::StatusRep])
}

fn ext_up_action(_: &Model, s: &GlobalState, a: &[Arg]) -> GlobalState {
    let mut t = s.clone();
    t.chan_up
        .insert((msg_at(a, 1).unwrap(), sw_at(a, 0).unwrap()));
    t
}

/// A switch can only forward a packet it was sent, and a packet is in one
/// place at a time.
fn ext_send_pckt_guard(_: &Model, s: &GlobalState, a: &[Arg]) -> bool {
    let (Some(sw), Some(p), Some(to)) = (sw_at(a, 0), pk_at(a, 1), sw_at(a, 2)) else {
        return false;
    };
    s.switches.contains_key(&to)
        && (s.ctl_sent.contains(&(p, sw)) || s.sw_sent.contains(&(p, sw)))
        && !s.data_chan.distinct().any(|(x, _)| *x == p)
}

fn ext_send_pckt_action(_: &Model, s: &GlobalState, a: &[Arg]) -> GlobalState {
    let (p, to) = (pk_at(a, 1).unwrap(), sw_at(a, 2).unwrap());
    let mut t = s.clone();
    t.data_chan.insert((p, to));
    t.sw_sent.insert((p, to));
    t
}

fn ext_rcv_msg_guard(_: &Model, s: &GlobalState, a: &[Arg]) -> bool {
    matches!((sw_at(a, 0), msg_at(a, 1)), (Some(sw), Some(m)) if s.chan_down.contains(&(m, sw)))
}

fn ext_rcv_msg_action(_: &Model, s: &GlobalState, a: &[Arg]) -> GlobalState {
    let mut t = s.clone();
    t.chan_down
        .remove_one(&(msg_at(a, 1).unwrap(), sw_at(a, 0).unwrap()));
    t
}

/// One reply per delivered request.
fn ext_reply_guard(m: &Model, s: &GlobalState, a: &[Arg], kind: MessageKind) -> bool {
    let (Some(sw), Some(msg)) = (sw_at(a, 0), msg_at(a, 1)) else {
        return false;
    };
    let reply = if kind == MessageKind::Barrier {
        MessageKind::BarrierAck
    } else {
        MessageKind::StatusRep
    };
    let delivered = count_minted(s, |x| {
        x.kind == kind && !s.chan_down.distinct().any(|(y, _)| *y == x.id)
    });
    s.switches.contains_key(&sw)
        && s.kind_of(msg) == Some(kind)
        && !s.chan_down.contains(&(msg, sw))
        && count_minted(s, |x| x.kind == reply) < delivered
        && m.fresh_sw_msg(s).is_some()
}

fn ext_barrier_rp_guard(m: &Model, s: &GlobalState, a: &[Arg]) -> bool {
    ext_reply_guard(m, s, a, MessageKind::Barrier)
}

fn ext_status_rp_guard(m: &Model, s: &GlobalState, a: &[Arg]) -> bool {
    ext_reply_guard(m, s, a, MessageKind::StatusReq)
}

/// Switch status is never written by any event, so it is read as context.
fn ext_reply_action(m: &Model, s: &GlobalState, a: &[Arg]) -> GlobalState {
    let (sw, msg) = (sw_at(a, 0).unwrap(), msg_at(a, 1).unwrap());
    let id = m.fresh_sw_msg(s).unwrap();
    let reply = match s.messages[&msg].kind {
        MessageKind::Barrier => m.mint(id, MessageKind::BarrierAck),
        _ => Message {
            status: Some(s.switches[&sw].status),
            ..m.mint(id, MessageKind::StatusRep)
        },
    };
    let mut t = s.clone();
    t.messages.insert(id, reply);
    t
}

// ---------------------------------------------------------------------------
// external events mirroring controller events (used by the switches component)

fn packet_in_flight(s: &GlobalState, p: crate::ids::PacketId) -> bool {
    s.data_chan.distinct().any(|(x, _)| *x == p)
        || s.chan_down.distinct().any(|(m, _)| {
            s.messages
                .get(m)
                .is_some_and(|msg| msg.kind == MessageKind::PKOut && msg.packet == Some(p))
        })
}

fn count_minted(s: &GlobalState, f: impl Fn(&Message) -> bool) -> usize {
    s.messages.values().filter(|m| f(m)).count()
}

/// PacketIns the controller may already hold: minted and no longer on the
/// secure channel.
fn packet_ins_off_channel(s: &GlobalState, p: Option<crate::ids::PacketId>) -> usize {
    s.messages
        .values()
        .filter(|m| m.kind == MessageKind::PacketIn && (p.is_none() || m.packet == p))
        .filter(|m| !s.chan_up.distinct().any(|(x, _)| *x == m.id))
        .count()
}

/// The controller emits a packet once from its pool and once more per
/// PacketIn it received for it.
fn ext_emit_guard(m: &Model, s: &GlobalState, a: &[Arg]) -> bool {
    let (Some(sw), Some(p), Some(msg)) = (sw_at(a, 0), pk_at(a, 1), msg_at(a, 2)) else {
        return false;
    };
    let emitted = count_minted(s, |x| x.kind == MessageKind::PKOut && x.packet == Some(p));
    let credit = usize::from(m.pool_packets.contains(&p)) + packet_ins_off_channel(s, Some(p));
    s.switches.contains_key(&sw)
        && emitted < credit
        && !packet_in_flight(s, p)
        && m.is_fresh_ctl(s, msg)
}

fn ext_emit_action(m: &Model, s: &GlobalState, a: &[Arg]) -> GlobalState {
    let (sw, p, msg) = (
        sw_at(a, 0).unwrap(),
        pk_at(a, 1).unwrap(),
        msg_at(a, 2).unwrap(),
    );
    let mut t = s.clone();
    let out_port = m.pkout.get(&sw).copied();
    t.messages.insert(
        msg,
        Message {
            packet: Some(p),
            out_port,
            ..m.mint(msg, MessageKind::PKOut)
        },
    );
    t.chan_down.insert((msg, sw));
    t.ctl_sent.insert((p, sw));
    t
}

fn ext_take_up_guard(s: &GlobalState, a: &[Arg], kind: MessageKind) -> bool {
    msg_at(a, 0).is_some_and(|m| up_of_kind(s, m, kind).is_some())
}

fn ext_rcv_packet_in_guard(_: &Model, s: &GlobalState, a: &[Arg]) -> bool {
    ext_take_up_guard(s, a, MessageKind::PacketIn)
}
fn ext_rcv_barrier_guard(_: &Model, s: &GlobalState, a: &[Arg]) -> bool {
    ext_take_up_guard(s, a, MessageKind::BarrierAck)
}
fn ext_rcv_status_guard(_: &Model, s: &GlobalState, a: &[Arg]) -> bool {
    ext_take_up_guard(s, a, MessageKind::StatusRep)
}

fn ext_take_up_action(_: &Model, s: &GlobalState, a: &[Arg]) -> GlobalState {
    let m = msg_at(a, 0).unwrap();
    let sw = s
        .chan_up
        .distinct()
        .find(|(x, _)| *x == m)
        .map(|(_, sw)| *sw)
        .unwrap();
    let mut t = s.clone();
    t.chan_up.remove_one(&(m, sw));
    t
}

/// The entry an order of `kind` for (`sw`, `e`) can carry: a preloaded order
/// not yet sent, or for Add a pool entry bound to the rule for `sw`. Each
/// pool entry backs one decision, and each decision one received PacketIn.
fn derivable_entry(
    m: &Model,
    s: &GlobalState,
    kind: MessageKind,
    sw: SwitchId,
    e: EntryId,
) -> Option<FlowEntry> {
    let sent = |k: MessageKind, e: EntryId| {
        count_minted(s, |x| {
            x.kind == k && x.entry.as_ref().is_some_and(|y| y.id == e)
        }) > 0
    };
    if let Some(o) = m
        .preloaded_orders
        .iter()
        .find(|o| o.kind == kind && o.switch == sw && o.entry.id == e)
    {
        return (!sent(kind, e)).then(|| o.entry.clone());
    }
    if kind != MessageKind::Add || !m.pool_entries.contains(&e) || sent(MessageKind::Add, e) {
        return None;
    }
    let decided = count_minted(s, |x| {
        x.kind == MessageKind::Add
            && x.entry
                .as_ref()
                .is_some_and(|y| m.pool_entries.contains(&y.id))
    });
    if decided >= packet_ins_off_channel(s, None) {
        return None;
    }
    let r = m.rules.get(&sw)?;
    Some(FlowEntry {
        id: e,
        header: r.header,
        extra: (m.level >= RefinementLevel::L1).then_some([None; FIELD_COUNT]),
        actions: r.actions.clone(),
    })
}

fn ext_order_guard(m: &Model, s: &GlobalState, a: &[Arg], kind: MessageKind) -> bool {
    let (Some(sw), Some(e), Some(msg)) = (sw_at(a, 0), a.get(1).and_then(Arg::entry), msg_at(a, 2))
    else {
        return false;
    };
    s.switches.contains_key(&sw)
        && m.is_fresh_ctl(s, msg)
        && derivable_entry(m, s, kind, sw, e).is_some()
}

fn ext_send_add_guard(m: &Model, s: &GlobalState, a: &[Arg]) -> bool {
    ext_order_guard(m, s, a, MessageKind::Add)
}
fn ext_send_modf_guard(m: &Model, s: &GlobalState, a: &[Arg]) -> bool {
    ext_order_guard(m, s, a, MessageKind::Modf)
}
fn ext_send_del_guard(m: &Model, s: &GlobalState, a: &[Arg]) -> bool {
    ext_order_guard(m, s, a, MessageKind::Del)
}

fn ext_order_action(m: &Model, s: &GlobalState, a: &[Arg], kind: MessageKind) -> GlobalState {
    let (sw, e, msg) = (
        sw_at(a, 0).unwrap(),
        a[1].entry().unwrap(),
        msg_at(a, 2).unwrap(),
    );
    let mut t = s.clone();
    let entry = derivable_entry(m, s, kind, sw, e).unwrap();
    t.messages.insert(
        msg,
        Message {
            entry: Some(entry),
            ..m.mint(msg, kind)
        },
    );
    t.chan_down.insert((msg, sw));
    t
}

fn ext_send_add_action(m: &Model, s: &GlobalState, a: &[Arg]) -> GlobalState {
    ext_order_action(m, s, a, MessageKind::Add)
}
fn ext_send_modf_action(m: &Model, s: &GlobalState, a: &[Arg]) -> GlobalState {
    ext_order_action(m, s, a, MessageKind::Modf)
}
fn ext_send_del_action(m: &Model, s: &GlobalState, a: &[Arg]) -> GlobalState {
    ext_order_action(m, s, a, MessageKind::Del)
}

/// Each target is asked at most once.
fn ext_ask_guard(
    m: &Model,
    s: &GlobalState,
    a: &[Arg],
    kind: MessageKind,
    targets: &BTreeSet<SwitchId>,
) -> bool {
    let (Some(sw), Some(msg)) = (sw_at(a, 0), msg_at(a, 1)) else {
        return false;
    };
    targets.contains(&sw)
        && count_minted(s, |x| x.kind == kind) < targets.len()
        && m.is_fresh_ctl(s, msg)
}

fn ext_ask_barrier_guard(m: &Model, s: &GlobalState, a: &[Arg]) -> bool {
    ext_ask_guard(m, s, a, MessageKind::Barrier, &m.barrier_targets)
}
fn ext_ask_status_guard(m: &Model, s: &GlobalState, a: &[Arg]) -> bool {
    ext_ask_guard(m, s, a, MessageKind::StatusReq, &m.status_targets)
}

fn ext_ask_action(m: &Model, s: &GlobalState, a: &[Arg], kind: MessageKind) -> GlobalState {
    let (sw, msg) = (sw_at(a, 0).unwrap(), msg_at(a, 1).unwrap());
    let mut t = s.clone();
    t.messages.insert(msg, m.mint(msg, kind));
    t.chan_down.insert((msg, sw));
    t
}

fn ext_ask_barrier_action(m: &Model, s: &GlobalState, a: &[Arg]) -> GlobalState {
    ext_ask_action(m, s, a, MessageKind::Barrier)
}
fn ext_ask_status_action(m: &Model, s: &GlobalState, a: &[Arg]) -> GlobalState {
    ext_ask_action(m, s, a, MessageKind::StatusReq)
}

// ---------------------------------------------------------------------------

type ExtRow = (
    &'static str,
    &'static str,
    &'static [Sort],
    crate::kernel::GuardFn<Model>,
    crate::kernel::ActionFn<Model>,
);

const SW_PK: &[Sort] = &[Sort::Switch, Sort::Packet];
const SW_MSG: &[Sort] = &[Sort::Switch, Sort::Message];
const SW_PK_SW: &[Sort] = &[Sort::Switch, Sort::Packet, Sort::Switch];
const SW_PK_MSG: &[Sort] = &[Sort::Switch, Sort::Packet, Sort::Message];
const SW_ENTRY_MSG: &[Sort] = &[Sort::Switch, Sort::Entry, Sort::Message];
const MSG: &[Sort] = &[Sort::Message];

fn external_rows(role: Role) -> Vec<ExtRow> {
    match role {
        Role::Controller => vec![
            (
                "ext_sw_rcv_machingPkt",
                "sw_rcv_machingPkt",
                SW_PK,
                in_data_chan,
                take_from_data_chan,
            ),
            (
                "ext_sw_rcv_unmachingPkt",
                "sw_rcv_unmachingPkt",
                SW_PK,
                ext_unmatching_guard,
                ext_unmatching_action,
            ),
            (
                "ext_sw_sndPk2ctrl",
                "sw_sndPk2ctrl",
                SW_MSG,
                ext_snd_pk_guard,
                ext_up_action,
            ),
            (
                "ext_sw_sndMsg2ctrl",
                "sw_sndMsg2ctrl",
                SW_MSG,
                ext_snd_msg_guard,
                ext_up_action,
            ),
            (
                "ext_sw_sendPckt2sw",
                "sw_sendPckt2sw",
                SW_PK_SW,
                ext_send_pckt_guard,
                ext_send_pckt_action,
            ),
            (
                "ext_sw_rcv_Msg",
                "sw_rcv_Msg",
                SW_MSG,
                ext_rcv_msg_guard,
                ext_rcv_msg_action,
            ),
            (
                "ext_sw_barrierRp",
                "sw_barrierRp",
                SW_MSG,
                ext_barrier_rp_guard,
                ext_reply_action,
            ),
            (
                "ext_sw_statusRp",
                "sw_statusRp",
                SW_MSG,
                ext_status_rp_guard,
                ext_reply_action,
            ),
        ],
        Role::Switches => vec![
            (
                "ext_ctl_emitPkt",
                "ctl_emitPkt",
                SW_PK_MSG,
                ext_emit_guard,
                ext_emit_action,
            ),
            (
                "ext_ctl_rcvPacketIn",
                "ctl_rcvPacketIn",
                MSG,
                ext_rcv_packet_in_guard,
                ext_take_up_action,
            ),
            (
                "ext_ctl_sendAdd",
                "ctl_sendAdd",
                SW_ENTRY_MSG,
                ext_send_add_guard,
                ext_send_add_action,
            ),
            (
                "ext_ctl_sendModf",
                "ctl_sendModf",
                SW_ENTRY_MSG,
                ext_send_modf_guard,
                ext_send_modf_action,
            ),
            (
                "ext_ctl_sendDel",
                "ctl_sendDel",
                SW_ENTRY_MSG,
                ext_send_del_guard,
                ext_send_del_action,
            ),
            (
                "ext_ctl_askBarrier",
                "ctl_askBarrier",
                SW_MSG,
                ext_ask_barrier_guard,
                ext_ask_barrier_action,
            ),
            (
                "ext_ctl_rcvBarrierRp",
                "ctl_rcvBarrierRp",
                MSG,
                ext_rcv_barrier_guard,
                ext_take_up_action,
            ),
            (
                "ext_ctl_askStatusMsg",
                "ctl_askStatusMsg",
                SW_MSG,
                ext_ask_status_guard,
                ext_ask_status_action,
            ),
            (
                "ext_ctl_rcvStatus",
                "ctl_rcvStatus",
                MSG,
                ext_rcv_status_guard,
                ext_take_up_action,
            ),
        ],
    }
}

/// Splits the level's catalogue into the controller and switches components.
pub fn decompose(level: RefinementLevel) -> (Component, Component) {
    let rows = event_catalog(level);
    let shared = shared_variables();
    let build = |role: Role| {
        let family = match role {
            Role::Controller => Family::Controller,
            Role::Switches => Family::Switch,
        };
        let own: Vec<CatalogueRow> = rows
            .iter()
            .filter(|r| r.family == family)
            .cloned()
            .collect();
        let external = external_rows(role)
            .into_iter()
            .map(|(name, mirrors, sorts, guard, action)| {
                let peer = rows
                    .iter()
                    .find(|r| r.def.name == mirrors)
                    .expect("mirrored event exists");
                ExternalEvent {
                    def: EventDef {
                        name,
                        sorts,
                        guard,
                        action,
                        candidates: None,
                    },
                    mirrors,
                    write_set: peer.write_set.intersection(&shared).copied().collect(),
                    refinable: false,
                }
            })
            .collect();
        let mut variables = private_variables(role);
        variables.extend(shared.iter().copied());
        Component {
            role,
            own,
            external,
            variables,
            shared: shared.clone(),
        }
    };
    (build(Role::Controller), build(Role::Switches))
}

impl Component {
    pub fn peer(&self) -> Role {
        match self.role {
            Role::Controller => Role::Switches,
            Role::Switches => Role::Controller,
        }
    }

    /// Own events plus external events, as a catalogue.
    pub fn catalogue(&self) -> Catalogue<Model> {
        let defs = self
            .own
            .iter()
            .map(|r| r.def.clone())
            .chain(self.external.iter().map(|e| e.def.clone()));
        Catalogue::new(defs.collect()).expect("component event names are unique")
    }

    /// Resets the peer's private variables to their initial values.
    pub fn project(&self, s: &GlobalState, init: &GlobalState) -> GlobalState {
        let mut t = s.clone();
        match self.role {
            Role::Controller => t.switches = init.switches.clone(),
            Role::Switches => {
                t.controller = init.controller.clone();
                t.pools = init.pools.clone();
            }
        }
        t
    }

    pub fn external_for(&self, peer_event: &str) -> Option<&ExternalEvent> {
        self.external.iter().find(|e| e.mirrors == peer_event)
    }

    /// A TOML description of the component.
    pub fn describe(&self) -> String {
        #[derive(Serialize)]
        struct Ext<'a> {
            name: &'a str,
            mirrors: &'a str,
            writes: Vec<String>,
            refinable: bool,
        }
        #[derive(Serialize)]
        struct Desc<'a> {
            role: Role,
            own_events: Vec<&'a str>,
            variables: Vec<String>,
            shared: Vec<String>,
            external: Vec<Ext<'a>>,
        }
        let d = Desc {
            role: self.role,
            own_events: self.own.iter().map(|r| r.def.name).collect(),
            variables: self.variables.iter().map(|f| format!("{f:?}")).collect(),
            shared: self.shared.iter().map(|f| format!("{f:?}")).collect(),
            external: self
                .external
                .iter()
                .map(|e| Ext {
                    name: e.def.name,
                    mirrors: e.mirrors,
                    writes: e.write_set.iter().map(|f| format!("{f:?}")).collect(),
                    refinable: e.refinable,
                })
                .collect(),
        };
        toml::to_string(&d).expect("component description serialises")
    }
}

fn fail(property: String, trace: crate::kernel::Trace<GlobalState>) -> Verdict {
    Verdict::Fails(Box::new(Counterexample {
        property,
        trace,
        loop_start: None,
    }))
}

fn fail_at(
    graph: &StateGraph,
    n: usize,
    step: (EventInstance, GlobalState),
    why: String,
) -> Verdict {
    let mut trace = graph.trace_to(n);
    trace.steps.push(step);
    fail(why, trace)
}

/// Outcome of checking one standalone component.
#[derive(Debug, Clone)]
pub struct ComponentReport {
    pub role: Role,
    pub nodes: usize,
    pub safety: Vec<(String, Verdict)>,
    pub frame: Verdict,
}

#[derive(Debug, Clone)]
pub struct RecompositionReport {
    pub level: RefinementLevel,
    pub bounds: Bounds,
    /// Recomposed product against the global graph.
    pub product: Verdict,
    /// Every global step is a step of each component, up to projection.
    pub soundness: Verdict,
    pub components: Vec<ComponentReport>,
}

impl RecompositionReport {
    /// Overall verdict: the first failure, else BoundExceeded if any part was
    /// bounded, else Holds. Standalone components are checked to the depth
    /// bound, so a bounded component check counts as passing.
    pub fn verdict(&self) -> Verdict {
        let mut all = vec![&self.product, &self.soundness];
        for c in &self.components {
            all.push(&c.frame);
            all.extend(c.safety.iter().map(|(_, v)| v));
        }
        if let Some(f) = all.iter().find(|v| v.fails()) {
            return (*f).clone();
        }
        if self.product.holds() && self.soundness.holds() {
            Verdict::Holds
        } else {
            Verdict::BoundExceeded
        }
    }
}

fn check_product(
    global: &StateGraph,
    sys: &System,
    comps: &[&Component],
    init: &GlobalState,
    cfg: ExploreConfig,
) -> Result<Verdict, ExploreError> {
    let mut defs = Vec::new();
    for c in comps {
        defs.extend(c.own.iter().map(|r| r.def.clone()));
    }
    let Ok(cat) = Catalogue::new(defs) else {
        return Ok(fail(
            "components own overlapping events".into(),
            crate::kernel::Trace::new(init.clone()),
        ));
    };
    let product = System::with_catalogue(sys.model.clone(), cat);
    let pg = explore(&product, init, cfg)?;
    if pg.node_set() != global.node_set() {
        let missing = global.states.iter().position(|s| !pg.index.contains_key(s));
        let trace = match missing {
            Some(n) => global.trace_to(n),
            None => pg.trace_to(
                pg.states
                    .iter()
                    .position(|s| !global.index.contains_key(s))
                    .unwrap(),
            ),
        };
        return Ok(fail(
            "recomposed node set differs from the global graph".into(),
            trace,
        ));
    }
    if pg.edge_set() != global.edge_set() {
        return Ok(fail(
            "recomposed edge set differs from the global graph".into(),
            crate::kernel::Trace::new(init.clone()),
        ));
    }
    Ok(if global.is_complete() {
        Verdict::Holds
    } else {
        Verdict::BoundExceeded
    })
}

/// Every global step, projected on a component, is a stutter or a step of the
/// component (own event or the external standing in for the peer event).
fn check_soundness(global: &StateGraph, model: &Model, comp: &Component) -> Verdict {
    let init = global.initial();
    let cat = comp.catalogue();
    let own: BTreeSet<&str> = comp.own.iter().map(|r| r.def.name).collect();
    for n in 0..global.node_count() {
        let a = comp.project(&global.states[n], init);
        for (inst, t) in &global.edges[n] {
            let b = comp.project(&global.states[*t], init);
            let mapped = if own.contains(inst.event.as_str()) {
                Some(inst.clone())
            } else {
                comp.external_for(&inst.event)
                    .map(|e| EventInstance::new(e.def.name, inst.args.clone()))
            };
            let ok = match mapped {
                Some(ci) => cat.apply(model, &a, &ci).is_ok_and(|x| x == b),
                None => a == b,
            };
            if !ok {
                let why = format!("{:?} component cannot mirror {inst}", comp.role);
                return fail_at(global, n, (inst.clone(), global.states[*t].clone()), why);
            }
        }
    }
    if global.is_complete() {
        Verdict::Holds
    } else {
        Verdict::BoundExceeded
    }
}

/// Explores a component standalone and checks the projected safety suite and
/// the external events' frame condition.
pub fn check_component(
    comp: &Component,
    model: &Model,
    init: &GlobalState,
    cfg: ExploreConfig,
) -> Result<ComponentReport, ExploreError> {
    let sys = System::with_catalogue(model.clone(), comp.catalogue());
    let g = explore(&sys, init, cfg)?;
    let safety = safety_suite(model)
        .into_iter()
        .filter(|inv| inv.reads.is_subset(&comp.variables))
        .map(|inv| {
            let v = check_invariants(&g, std::slice::from_ref(&inv));
            (inv.name, v)
        })
        .collect();
    let mut frame = if g.is_complete() {
        Verdict::Holds
    } else {
        Verdict::BoundExceeded
    };
    let externals: BTreeSet<&str> = comp.external.iter().map(|e| e.def.name).collect();
    'outer: for n in 0..g.node_count() {
        for (inst, t) in &g.edges[n] {
            if !externals.contains(inst.event.as_str()) {
                continue;
            }
            let written = changed_fields(&g.states[n], &g.states[*t]);
            if let Some(f) = written.iter().find(|f| !comp.shared.contains(f)) {
                let why = format!("external {} writes private variable {f:?}", inst.event);
                frame = fail_at(&g, n, (inst.clone(), g.states[*t].clone()), why);
                break 'outer;
            }
        }
    }
    for e in &comp.external {
        if !e.write_set.is_subset(&comp.shared) || e.refinable {
            frame = fail(
                format!(
                    "external {} is not a shared-only, non-refinable event",
                    e.def.name
                ),
                g.trace_to(0),
            );
        }
    }
    Ok(ComponentReport {
        role: comp.role,
        nodes: g.node_count(),
        safety,
        frame,
    })
}

/// Depth bounds for a recomposition check. The global graph and the
/// recomposed product are explored to `global`; standalone components, whose
/// environment is an over-approximation and grows much faster, to `component`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bounds {
    pub global: usize,
    pub component: usize,
}

impl Bounds {
    pub const DEFAULT_COMPONENT_DEPTH: usize = 12;

    pub fn new(global: usize) -> Self {
        Bounds {
            global,
            component: global.min(Self::DEFAULT_COMPONENT_DEPTH),
        }
    }
}

/// Checks a given pair of components against the global model of `scenario`.
pub fn check_components(
    level: RefinementLevel,
    scenario: &Scenario,
    bounds: Bounds,
    ctl: &Component,
    sw: &Component,
) -> Result<RecompositionReport, ExploreError> {
    let model = scenario.model(level);
    let init = scenario.initial_state(level);
    let sys = System::new(&model, level);
    let cfg = ExploreConfig {
        depth: bounds.global,
        ..ExploreConfig::full()
    };
    let global = explore(&sys, &init, cfg)?;
    let product = check_product(&global, &sys, &[ctl, sw], &init, cfg)?;
    let soundness = match check_soundness(&global, &model, ctl) {
        v if v.fails() => v,
        v => match check_soundness(&global, &model, sw) {
            w if w.fails() => w,
            w => {
                if v.holds() && w.holds() {
                    Verdict::Holds
                } else {
                    Verdict::BoundExceeded
                }
            }
        },
    };
    let ccfg = ExploreConfig {
        depth: bounds.component,
        ..ExploreConfig::full()
    };
    let components = vec![
        check_component(ctl, &model, &init, ccfg)?,
        check_component(sw, &model, &init, ccfg)?,
    ];
    Ok(RecompositionReport {
        level,
        bounds,
        product,
        soundness,
        components,
    })
}

/// Decomposes at `level` and checks recomposition on `scenario`.
pub fn check_recomposition(
    level: RefinementLevel,
    scenario: &Scenario,
    bounds: Bounds,
) -> Result<RecompositionReport, ExploreError> {
    let (ctl, sw) = decompose(level);
    check_components(level, scenario, bounds, &ctl, &sw)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_by_family() {
        let (ctl, sw) = decompose(RefinementLevel::L0);
        assert_eq!(ctl.own.len(), 11);
        assert!(ctl.own.iter().all(|r| r.def.name.starts_with("ctl_")));
        assert_eq!(sw.own.len(), 13);
        assert!(sw.own.iter().all(|r| r.def.name.starts_with("sw_")));
    }

    #[test]
    fn externals_write_shared_only() {
        for level in RefinementLevel::ALL {
            let (ctl, sw) = decompose(level);
            for c in [&ctl, &sw] {
                for e in &c.external {
                    assert!(e.write_set.is_subset(&c.shared), "{}", e.def.name);
                    assert!(!e.write_set.is_empty(), "{}", e.def.name);
                    assert!(!e.refinable);
                }
            }
        }
    }

    #[test]
    fn emit_is_mirrored_but_table_updates_are_not() {
        let (ctl, sw) = decompose(RefinementLevel::L0);
        let emit = sw.external_for("ctl_emitPkt").unwrap();
        assert_eq!(emit.def.name, "ext_ctl_emitPkt");
        assert!(emit.write_set.contains(&Field::SecureChanDown));
        assert!(ctl.external_for("sw_newFTentry").is_none());
        assert!(ctl.external_for("sw_fwdLookup").is_none());
        assert!(sw.external_for("ctl_decideRule").is_none());
    }

    #[test]
    fn every_peer_shared_writer_is_mirrored() {
        let shared = shared_variables();
        let (ctl, sw) = decompose(RefinementLevel::L2);
        for r in event_catalog(RefinementLevel::L2) {
            let comp = if r.family == Family::Switch {
                &ctl
            } else {
                &sw
            };
            let writes_shared = !r.write_set.is_disjoint(&shared);
            assert_eq!(
                comp.external_for(r.def.name).is_some(),
                writes_shared,
                "{}",
                r.def.name
            );
        }
    }

    #[test]
    fn description_is_toml() {
        let (ctl, _) = decompose(RefinementLevel::L0);
        let text = ctl.describe();
        assert!(text.contains("role = \"Controller\""));
        assert!(text.contains("ext_sw_sendPckt2sw"));
    }
}
