//! The global SDN event catalogue at each refinement level.
//!
//! Levels are superposition refinements of one another:
//!
//! * L0: single-header matching, packets forwarded to destination switches.
//! * L1: refined header fields with wildcard matching, per-port action queues.
//! * L2: every minted message carries a priority.
//! * L3: switch guards strengthened by the per-switch order `≺`
//!   ([`PriorityOrder::shipped`]).
//!
//! Event names are the stable public identifiers used in traces, formulas and
//! reports, including the original spellings `sw_rcv_machingPkt` and
//! `sw_sndPk2ctrl`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{EntryId, MsgId, PacketId, SwitchId};
use crate::kernel::{Arg, Catalogue, Context, EventDef, Sort};
use crate::scheduler::PriorityOrder;
use crate::state::{match_entry, Field, GlobalState, MessageKind, Model, PortTarget, SwitchState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RefinementLevel {
    L0,
    L1,
    L2,
    L3,
}

impl RefinementLevel {
    pub const ALL: [RefinementLevel; 4] = [
        RefinementLevel::L0,
        RefinementLevel::L1,
        RefinementLevel::L2,
        RefinementLevel::L3,
    ];

    pub fn below(self) -> Option<RefinementLevel> {
        match self {
            RefinementLevel::L0 => None,
            RefinementLevel::L1 => Some(RefinementLevel::L0),
            RefinementLevel::L2 => Some(RefinementLevel::L1),
            RefinementLevel::L3 => Some(RefinementLevel::L2),
        }
    }
}

impl fmt::Display for RefinementLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for RefinementLevel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "L0" | "l0" => Ok(RefinementLevel::L0),
            "L1" | "l1" => Ok(RefinementLevel::L1),
            "L2" | "l2" => Ok(RefinementLevel::L2),
            "L3" | "l3" => Ok(RefinementLevel::L3),
            _ => Err(format!("unknown refinement level `{s}` (expected L0..L3)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Family {
    Controller,
    Switch,
}

/// Catalogue event names in row order; rows 1..=13 are switch events.
pub const ROW_NAMES: [&str; 24] = [
    "sw_rcv_machingPkt",
    "sw_rcv_unmachingPkt",
    "sw_sndPk2ctrl",
    "sw_sndMsg2ctrl",
    "sw_fwdLookup",
    "sw_sendPckt2sw",
    "sw_rcv_Msg",
    "sw_newFTentry",
    "sw_modFTentry",
    "sw_delFTentry",
    "sw_handlePkOut",
    "sw_barrierRp",
    "sw_statusRp",
    "ctl_havePacket",
    "ctl_emitPkt",
    "ctl_rcvPacketIn",
    "ctl_decideRule",
    "ctl_sendAdd",
    "ctl_sendModf",
    "ctl_sendDel",
    "ctl_askBarrier",
    "ctl_rcvBarrierRp",
    "ctl_askStatusMsg",
    "ctl_rcvStatus",
];

pub fn is_switch_event(name: &str) -> bool {
    name.starts_with("sw_") || name.starts_with("ext_sw_")
}

#[derive(Debug, Clone)]
pub struct CatalogueRow {
    pub row: u8,
    pub def: EventDef<Model>,
    pub family: Family,
    pub introduced_at: RefinementLevel,
    pub refines: Option<&'static str>,
    pub write_set: BTreeSet<Field>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LevelError {
    #[error("{0} has no abstraction")]
    NoAbstraction(RefinementLevel),
}

// ---------------------------------------------------------------------------
// argument helpers

pub(crate) fn sw_at(args: &[Arg], i: usize) -> Option<SwitchId> {
    args.get(i).and_then(Arg::switch)
}
pub(crate) fn pk_at(args: &[Arg], i: usize) -> Option<PacketId> {
    args.get(i).and_then(Arg::packet)
}
pub(crate) fn msg_at(args: &[Arg], i: usize) -> Option<MsgId> {
    args.get(i).and_then(Arg::message)
}
pub(crate) fn entry_at(args: &[Arg], i: usize) -> Option<EntryId> {
    args.get(i).and_then(Arg::entry)
}

pub(crate) fn switch_mut(s: &mut GlobalState, sw: SwitchId) -> &mut SwitchState {
    s.switches
        .get_mut(&sw)
        .expect("guard checked the switch exists")
}

fn has_incoming(s: &GlobalState, sw: SwitchId, kind: MessageKind) -> bool {
    s.switch(sw)
        .is_some_and(|st| st.incoming_msg.iter().any(|m| s.kind_of(*m) == Some(kind)))
}

fn incoming_of_kind(s: &GlobalState, sw: SwitchId, msg: MsgId, kind: MessageKind) -> bool {
    s.switch(sw)
        .is_some_and(|st| st.incoming_msg.contains(&msg))
        && s.kind_of(msg) == Some(kind)
}

/// True if a higher-priority switch event is enabled on `sw` (L3 only).
pub fn blocked_by_priority(model: &Model, s: &GlobalState, sw: SwitchId, event: &str) -> bool {
    model.level >= RefinementLevel::L3
        && PriorityOrder::shipped()
            .above(event)
            .any(|hi| enabled_on_switch(model, s, sw, hi))
}

/// L2 enabledness of a switch event on one switch, read off the state directly.
pub fn enabled_on_switch(model: &Model, s: &GlobalState, sw: SwitchId, event: &str) -> bool {
    let Some(st) = s.switch(sw) else { return false };
    match event {
        "sw_sendPckt2sw" => st.outgoing_pk.values().any(|d| !d.is_empty()),
        "sw_newFTentry" => has_incoming(s, sw, MessageKind::Add),
        "sw_modFTentry" => has_incoming(s, sw, MessageKind::Modf),
        "sw_delFTentry" => has_incoming(s, sw, MessageKind::Del),
        "sw_barrierRp" => {
            has_incoming(s, sw, MessageKind::Barrier) && model.fresh_sw_msg(s).is_some()
        }
        other => {
            let below = model.at_level(RefinementLevel::L2);
            let rows = event_catalog(RefinementLevel::L2);
            rows.iter().filter(|r| r.def.name == other).any(|r| {
                r.def
                    .all_bindings(&below, s)
                    .into_iter()
                    .any(|a| sw_at(&a, 0) == Some(sw) && (r.def.guard)(&below, s, &a))
            })
        }
    }
}

// ---------------------------------------------------------------------------
// switch family

/// Row 1 guard without the priority conjunct.
pub fn rcv_matching_base(model: &Model, s: &GlobalState, args: &[Arg]) -> bool {
    let (Some(sw), Some(p)) = (sw_at(args, 0), pk_at(args, 1)) else {
        return false;
    };
    let (Some(st), Some(pkt)) = (s.switch(sw), model.packets.get(&p)) else {
        return false;
    };
    s.data_chan.contains(&(p, sw)) && !st.buffers(p) && match_entry(st, pkt, model.level).is_some()
}

fn rcv_matching_guard(model: &Model, s: &GlobalState, args: &[Arg]) -> bool {
    rcv_matching_base(model, s, args)
        && !blocked_by_priority(model, s, sw_at(args, 0).unwrap(), ROW_NAMES[0])
}

pub fn rcv_matching_action(model: &Model, s: &GlobalState, args: &[Arg]) -> GlobalState {
    let (sw, p) = (sw_at(args, 0).unwrap(), pk_at(args, 1).unwrap());
    let mut t = s.clone();
    t.data_chan.remove_one(&(p, sw));
    let entry = match_entry(&s.switches[&sw], &model.packets[&p], model.level)
        .unwrap()
        .clone();
    switch_mut(&mut t, sw).incoming_pk.insert(p, entry);
    t
}

/// Row 2 guard without the priority conjunct.
pub fn rcv_unmatching_base(model: &Model, s: &GlobalState, args: &[Arg]) -> bool {
    let (Some(sw), Some(p)) = (sw_at(args, 0), pk_at(args, 1)) else {
        return false;
    };
    let (Some(st), Some(pkt)) = (s.switch(sw), model.packets.get(&p)) else {
        return false;
    };
    s.data_chan.contains(&(p, sw))
        && !st.buffers(p)
        && match_entry(st, pkt, model.level).is_none()
        && model.fresh_sw_msg(s).is_some()
}

fn rcv_unmatching_guard(model: &Model, s: &GlobalState, args: &[Arg]) -> bool {
    rcv_unmatching_base(model, s, args)
        && !blocked_by_priority(model, s, sw_at(args, 0).unwrap(), ROW_NAMES[1])
}

pub fn rcv_unmatching_action(model: &Model, s: &GlobalState, args: &[Arg]) -> GlobalState {
    let (sw, p) = (sw_at(args, 0).unwrap(), pk_at(args, 1).unwrap());
    let mut t = s.clone();
    t.data_chan.remove_one(&(p, sw));
    let id = model.fresh_sw_msg(s).unwrap();
    let msg = crate::state::Message {
        packet: Some(p),
        ..model.mint(id, MessageKind::PacketIn)
    };
    t.messages.insert(id, msg);
    switch_mut(&mut t, sw).outgoing_msg.insert(id);
    t
}

fn outgoing_of_kind(s: &GlobalState, sw: SwitchId, msg: MsgId, kinds: &[MessageKind]) -> bool {
    s.switch(sw)
        .is_some_and(|st| st.outgoing_msg.contains(&msg))
        && s.kind_of(msg).is_some_and(|k| kinds.contains(&k))
}

fn snd_pk2ctrl_guard(model: &Model, s: &GlobalState, args: &[Arg]) -> bool {
    let (Some(sw), Some(m)) = (sw_at(args, 0), msg_at(args, 1)) else {
        return false;
    };
    outgoing_of_kind(s, sw, m, &[MessageKind::PacketIn])
        && !blocked_by_priority(model, s, sw, ROW_NAMES[2])
}

fn snd_msg2ctrl_guard(model: &Model, s: &GlobalState, args: &[Arg]) -> bool {
    let (Some(sw), Some(m)) = (sw_at(args, 0), msg_at(args, 1)) else {
        return false;
    };
    outgoing_of_kind(s, sw, m, &[MessageKind::BarrierAck, MessageKind::StatusRep])
        && !blocked_by_priority(model, s, sw, ROW_NAMES[3])
}

pub fn move_up_action(_: &Model, s: &GlobalState, args: &[Arg]) -> GlobalState {
    let (sw, m) = (sw_at(args, 0).unwrap(), msg_at(args, 1).unwrap());
    let mut t = s.clone();
    switch_mut(&mut t, sw).outgoing_msg.remove(&m);
    t.chan_up.insert((m, sw));
    t
}

fn fwd_lookup_guard(model: &Model, s: &GlobalState, args: &[Arg]) -> bool {
    let (Some(sw), Some(p)) = (sw_at(args, 0), pk_at(args, 1)) else {
        return false;
    };
    s.switch(sw)
        .is_some_and(|st| st.incoming_pk.contains_key(&p))
        && !blocked_by_priority(model, s, sw, ROW_NAMES[4])
}

fn fwd_lookup_action(model: &Model, s: &GlobalState, args: &[Arg]) -> GlobalState {
    let (sw, p) = (sw_at(args, 0).unwrap(), pk_at(args, 1).unwrap());
    let mut t = s.clone();
    let st = switch_mut(&mut t, sw);
    let entry = st.incoming_pk.remove(&p).unwrap();
    let dests = model.switch_targets(&entry.actions);
    if !dests.is_empty() {
        st.outgoing_pk.entry(p).or_default().extend(dests);
        if model.level >= RefinementLevel::L1 {
            for port in &entry.actions {
                if let Some(PortTarget::Switch(_)) = model.target(*port) {
                    st.actions_queues.entry(*port).or_default().insert(p);
                }
            }
        }
    }
    t
}

/// Row 6 guard without the priority conjunct.
pub fn send_pckt_base(model: &Model, s: &GlobalState, args: &[Arg]) -> bool {
    let (Some(sw), Some(p), Some(to)) = (sw_at(args, 0), pk_at(args, 1), sw_at(args, 2)) else {
        return false;
    };
    let Some(st) = s.switch(sw) else { return false };
    let recorded = st.outgoing_pk.get(&p).is_some_and(|d| d.contains(&to));
    if model.level >= RefinementLevel::L1 {
        recorded
            && st.actions_queues.iter().any(|(port, q)| {
                q.contains(&p) && model.target(*port) == Some(PortTarget::Switch(to))
            })
    } else {
        recorded
    }
}

fn send_pckt_guard(model: &Model, s: &GlobalState, args: &[Arg]) -> bool {
    send_pckt_base(model, s, args)
        && !blocked_by_priority(model, s, sw_at(args, 0).unwrap(), ROW_NAMES[5])
}

/// Row 6 action: forwarding, excluding the `swSentPkts` ghost update.
pub fn send_pckt_forward(model: &Model, s: &GlobalState, args: &[Arg]) -> GlobalState {
    let (sw, p, to) = (
        sw_at(args, 0).unwrap(),
        pk_at(args, 1).unwrap(),
        sw_at(args, 2).unwrap(),
    );
    let mut t = s.clone();
    let st = switch_mut(&mut t, sw);
    let dests = st.outgoing_pk.get_mut(&p).unwrap();
    dests.remove(&to);
    if dests.is_empty() {
        st.outgoing_pk.remove(&p);
    }
    if model.level >= RefinementLevel::L1 {
        for (port, q) in st.actions_queues.iter_mut() {
            if model.target(*port) == Some(PortTarget::Switch(to)) {
                q.remove(&p);
            }
        }
        st.actions_queues.retain(|_, q| !q.is_empty());
    }
    t.data_chan.insert((p, to));
    t
}

pub fn send_pckt_action(model: &Model, s: &GlobalState, args: &[Arg]) -> GlobalState {
    let mut t = send_pckt_forward(model, s, args);
    t.sw_sent
        .insert((pk_at(args, 1).unwrap(), sw_at(args, 2).unwrap()));
    t
}

fn rcv_msg_guard(model: &Model, s: &GlobalState, args: &[Arg]) -> bool {
    let (Some(sw), Some(m)) = (sw_at(args, 0), msg_at(args, 1)) else {
        return false;
    };
    s.chan_down.contains(&(m, sw))
        && s.switch(sw).is_some()
        && !blocked_by_priority(model, s, sw, ROW_NAMES[6])
}

fn rcv_msg_action(_: &Model, s: &GlobalState, args: &[Arg]) -> GlobalState {
    let (sw, m) = (sw_at(args, 0).unwrap(), msg_at(args, 1).unwrap());
    let mut t = s.clone();
    t.chan_down.remove_one(&(m, sw));
    switch_mut(&mut t, sw).incoming_msg.insert(m);
    t
}

fn table_guard(
    model: &Model,
    s: &GlobalState,
    args: &[Arg],
    kind: MessageKind,
    name: &str,
) -> bool {
    let (Some(sw), Some(m)) = (sw_at(args, 0), msg_at(args, 1)) else {
        return false;
    };
    incoming_of_kind(s, sw, m, kind) && !blocked_by_priority(model, s, sw, name)
}

fn new_entry_guard(model: &Model, s: &GlobalState, args: &[Arg]) -> bool {
    table_guard(model, s, args, MessageKind::Add, ROW_NAMES[7])
}

fn mod_entry_guard(model: &Model, s: &GlobalState, args: &[Arg]) -> bool {
    table_guard(model, s, args, MessageKind::Modf, ROW_NAMES[8])
}

fn del_entry_guard(model: &Model, s: &GlobalState, args: &[Arg]) -> bool {
    table_guard(model, s, args, MessageKind::Del, ROW_NAMES[9])
}

/// Add and Modf both upsert by entry id.
fn install_action(_: &Model, s: &GlobalState, args: &[Arg]) -> GlobalState {
    let (sw, m) = (sw_at(args, 0).unwrap(), msg_at(args, 1).unwrap());
    let entry = s.messages[&m].entry.clone().unwrap();
    let mut t = s.clone();
    let st = switch_mut(&mut t, sw);
    st.incoming_msg.remove(&m);
    st.flow_table.insert(entry.id, entry);
    t
}

fn del_entry_action(_: &Model, s: &GlobalState, args: &[Arg]) -> GlobalState {
    let (sw, m) = (sw_at(args, 0).unwrap(), msg_at(args, 1).unwrap());
    let id = s.messages[&m].entry.as_ref().unwrap().id;
    let mut t = s.clone();
    let st = switch_mut(&mut t, sw);
    st.incoming_msg.remove(&m);
    st.flow_table.remove(&id);
    t
}

fn handle_pkout_guard(model: &Model, s: &GlobalState, args: &[Arg]) -> bool {
    let (Some(sw), Some(m)) = (sw_at(args, 0), msg_at(args, 1)) else {
        return false;
    };
    incoming_of_kind(s, sw, m, MessageKind::PKOut)
        && s.messages[&m]
            .packet
            .is_some_and(|p| !s.switches[&sw].buffers(p))
        && !blocked_by_priority(model, s, sw, ROW_NAMES[10])
}

fn handle_pkout_action(model: &Model, s: &GlobalState, args: &[Arg]) -> GlobalState {
    let (sw, m) = (sw_at(args, 0).unwrap(), msg_at(args, 1).unwrap());
    let msg = &s.messages[&m];
    let p = msg.packet.unwrap();
    let mut t = s.clone();
    let st = switch_mut(&mut t, sw);
    st.incoming_msg.remove(&m);
    if let Some(port) = msg.out_port {
        if let Some(PortTarget::Switch(to)) = model.target(port) {
            st.outgoing_pk.entry(p).or_default().insert(to);
            if model.level >= RefinementLevel::L1 {
                st.actions_queues.entry(port).or_default().insert(p);
            }
        }
    }
    t
}

fn barrier_rp_guard(model: &Model, s: &GlobalState, args: &[Arg]) -> bool {
    table_guard(model, s, args, MessageKind::Barrier, ROW_NAMES[11])
        && model.fresh_sw_msg(s).is_some()
}

fn status_rp_guard(model: &Model, s: &GlobalState, args: &[Arg]) -> bool {
    table_guard(model, s, args, MessageKind::StatusReq, ROW_NAMES[12])
        && model.fresh_sw_msg(s).is_some()
}

fn reply_action(model: &Model, s: &GlobalState, args: &[Arg]) -> GlobalState {
    let (sw, m) = (sw_at(args, 0).unwrap(), msg_at(args, 1).unwrap());
    let id = model.fresh_sw_msg(s).unwrap();
    let reply = match s.messages[&m].kind {
        MessageKind::Barrier => model.mint(id, MessageKind::BarrierAck),
        _ => crate::state::Message {
            status: Some(s.switches[&sw].status),
            ..model.mint(id, MessageKind::StatusRep)
        },
    };
    let mut t = s.clone();
    t.messages.insert(id, reply);
    let st = switch_mut(&mut t, sw);
    st.incoming_msg.remove(&m);
    st.outgoing_msg.insert(id);
    t
}

// ---------------------------------------------------------------------------
// controller family

fn have_packet_guard(_: &Model, s: &GlobalState, args: &[Arg]) -> bool {
    pk_at(args, 0)
        .is_some_and(|p| s.pools.packets.contains(&p) && !s.controller.outgoing_pk.contains(&p))
}

fn have_packet_action(_: &Model, s: &GlobalState, args: &[Arg]) -> GlobalState {
    let p = pk_at(args, 0).unwrap();
    let mut t = s.clone();
    t.pools.packets.remove(&p);
    t.controller.outgoing_pk.insert(p);
    t
}

fn emit_pkt_guard(model: &Model, s: &GlobalState, args: &[Arg]) -> bool {
    let (Some(sw), Some(p), Some(m)) = (sw_at(args, 0), pk_at(args, 1), msg_at(args, 2)) else {
        return false;
    };
    s.switches.contains_key(&sw)
        && s.controller.outgoing_pk.contains(&p)
        && model.is_fresh_ctl(s, m)
}

pub fn emit_pkt_action(model: &Model, s: &GlobalState, args: &[Arg]) -> GlobalState {
    let (sw, p, m) = (
        sw_at(args, 0).unwrap(),
        pk_at(args, 1).unwrap(),
        msg_at(args, 2).unwrap(),
    );
    let mut t = s.clone();
    let msg = crate::state::Message {
        packet: Some(p),
        out_port: model.pkout.get(&sw).copied(),
        ..model.mint(m, MessageKind::PKOut)
    };
    t.messages.insert(m, msg);
    t.chan_down.insert((m, sw));
    t.controller.outgoing_pk.remove(&p);
    t.ctl_sent.insert((p, sw));
    t
}

pub(crate) fn up_of_kind(s: &GlobalState, m: MsgId, kind: MessageKind) -> Option<SwitchId> {
    if s.kind_of(m) != Some(kind) {
        return None;
    }
    s.chan_up
        .distinct()
        .find(|(x, _)| *x == m)
        .map(|(_, sw)| *sw)
}

fn rcv_packet_in_guard(_: &Model, s: &GlobalState, args: &[Arg]) -> bool {
    let Some(m) = msg_at(args, 0) else {
        return false;
    };
    up_of_kind(s, m, MessageKind::PacketIn).is_some()
        && s.messages[&m]
            .packet
            .is_some_and(|p| !s.controller.incoming_pk.contains_key(&p))
}

fn rcv_packet_in_action(_: &Model, s: &GlobalState, args: &[Arg]) -> GlobalState {
    let m = msg_at(args, 0).unwrap();
    let sw = up_of_kind(s, m, MessageKind::PacketIn).unwrap();
    let mut t = s.clone();
    t.chan_up.remove_one(&(m, sw));
    t.controller
        .incoming_pk
        .insert(s.messages[&m].packet.unwrap(), sw);
    t
}

fn decide_rule_guard(model: &Model, s: &GlobalState, args: &[Arg]) -> bool {
    let Some(p) = pk_at(args, 0) else {
        return false;
    };
    let Some(origin) = s.controller.incoming_pk.get(&p) else {
        return false;
    };
    let Some(rule) = model.rules.get(origin) else {
        return false;
    };
    model
        .packets
        .get(&p)
        .is_some_and(|pkt| pkt.header == rule.header)
        && !s.pools.entries.is_empty()
        && !s.controller.outgoing_pk.contains(&p)
}

fn decide_rule_action(model: &Model, s: &GlobalState, args: &[Arg]) -> GlobalState {
    let p = pk_at(args, 0).unwrap();
    let mut t = s.clone();
    let origin = t.controller.incoming_pk.remove(&p).unwrap();
    let rule = &model.rules[&origin];
    let id = t.pools.entries.pop_first().unwrap();
    let entry = crate::state::FlowEntry {
        id,
        header: rule.header,
        extra: (model.level >= RefinementLevel::L1).then_some([None; crate::state::FIELD_COUNT]),
        actions: rule.actions.clone(),
    };
    t.controller.orders.insert(crate::state::Order {
        kind: MessageKind::Add,
        switch: origin,
        entry,
    });
    t.controller.outgoing_pk.insert(p);
    t
}

fn order_for(
    s: &GlobalState,
    kind: MessageKind,
    sw: SwitchId,
    e: EntryId,
) -> Option<&crate::state::Order> {
    s.controller
        .orders
        .iter()
        .find(|o| o.kind == kind && o.switch == sw && o.entry.id == e)
}

fn send_order_guard(model: &Model, s: &GlobalState, args: &[Arg], kind: MessageKind) -> bool {
    let (Some(sw), Some(e), Some(m)) = (sw_at(args, 0), entry_at(args, 1), msg_at(args, 2)) else {
        return false;
    };
    order_for(s, kind, sw, e).is_some() && model.is_fresh_ctl(s, m)
}

fn send_add_guard(model: &Model, s: &GlobalState, args: &[Arg]) -> bool {
    send_order_guard(model, s, args, MessageKind::Add)
}
fn send_modf_guard(model: &Model, s: &GlobalState, args: &[Arg]) -> bool {
    send_order_guard(model, s, args, MessageKind::Modf)
}
fn send_del_guard(model: &Model, s: &GlobalState, args: &[Arg]) -> bool {
    send_order_guard(model, s, args, MessageKind::Del)
}

fn send_order_action(model: &Model, s: &GlobalState, args: &[Arg]) -> GlobalState {
    let (sw, e, m) = (
        sw_at(args, 0).unwrap(),
        entry_at(args, 1).unwrap(),
        msg_at(args, 2).unwrap(),
    );
    let order = [MessageKind::Add, MessageKind::Modf, MessageKind::Del]
        .into_iter()
        .find_map(|k| order_for(s, k, sw, e))
        .unwrap()
        .clone();
    let mut t = s.clone();
    t.controller.orders.remove(&order);
    let msg = crate::state::Message {
        entry: Some(order.entry),
        ..model.mint(m, order.kind)
    };
    t.messages.insert(m, msg);
    t.chan_down.insert((m, sw));
    t
}

fn ask_barrier_guard(model: &Model, s: &GlobalState, args: &[Arg]) -> bool {
    let (Some(sw), Some(m)) = (sw_at(args, 0), msg_at(args, 1)) else {
        return false;
    };
    s.pools.barrier_asks.contains(&sw)
        && !s.controller.pending_barrier.contains(&sw)
        && model.is_fresh_ctl(s, m)
}

fn ask_barrier_action(model: &Model, s: &GlobalState, args: &[Arg]) -> GlobalState {
    let (sw, m) = (sw_at(args, 0).unwrap(), msg_at(args, 1).unwrap());
    let mut t = s.clone();
    t.pools.barrier_asks.remove(&sw);
    t.controller.pending_barrier.insert(sw);
    t.messages.insert(m, model.mint(m, MessageKind::Barrier));
    t.chan_down.insert((m, sw));
    t
}

fn rcv_barrier_guard(_: &Model, s: &GlobalState, args: &[Arg]) -> bool {
    msg_at(args, 0).is_some_and(|m| up_of_kind(s, m, MessageKind::BarrierAck).is_some())
}

fn rcv_barrier_action(_: &Model, s: &GlobalState, args: &[Arg]) -> GlobalState {
    let m = msg_at(args, 0).unwrap();
    let sw = up_of_kind(s, m, MessageKind::BarrierAck).unwrap();
    let mut t = s.clone();
    t.chan_up.remove_one(&(m, sw));
    t.controller.pending_barrier.remove(&sw);
    t
}

fn ask_status_guard(model: &Model, s: &GlobalState, args: &[Arg]) -> bool {
    let (Some(sw), Some(m)) = (sw_at(args, 0), msg_at(args, 1)) else {
        return false;
    };
    s.pools.status_asks.contains(&sw)
        && !s.controller.pending_status.contains(&sw)
        && model.is_fresh_ctl(s, m)
}

fn ask_status_action(model: &Model, s: &GlobalState, args: &[Arg]) -> GlobalState {
    let (sw, m) = (sw_at(args, 0).unwrap(), msg_at(args, 1).unwrap());
    let mut t = s.clone();
    t.pools.status_asks.remove(&sw);
    t.controller.pending_status.insert(sw);
    t.messages.insert(m, model.mint(m, MessageKind::StatusReq));
    t.chan_down.insert((m, sw));
    t
}

fn rcv_status_guard(_: &Model, s: &GlobalState, args: &[Arg]) -> bool {
    msg_at(args, 0).is_some_and(|m| up_of_kind(s, m, MessageKind::StatusRep).is_some())
}

fn rcv_status_action(_: &Model, s: &GlobalState, args: &[Arg]) -> GlobalState {
    let m = msg_at(args, 0).unwrap();
    let sw = up_of_kind(s, m, MessageKind::StatusRep).unwrap();
    let mut t = s.clone();
    t.chan_up.remove_one(&(m, sw));
    t.controller.pending_status.remove(&sw);
    t
}

// ---------------------------------------------------------------------------
// candidate generators (narrowing only; guards still decide)

fn data_chan_candidates(_: &Model, s: &GlobalState) -> Vec<Vec<Arg>> {
    s.data_chan
        .distinct()
        .map(|(p, sw)| vec![Arg::Switch(*sw), Arg::Packet(*p)])
        .collect()
}

fn outgoing_msg_candidates(_: &Model, s: &GlobalState) -> Vec<Vec<Arg>> {
    s.switches
        .iter()
        .flat_map(|(sw, st)| {
            st.outgoing_msg
                .iter()
                .map(move |m| vec![Arg::Switch(*sw), Arg::Message(*m)])
        })
        .collect()
}

fn incoming_pk_candidates(_: &Model, s: &GlobalState) -> Vec<Vec<Arg>> {
    s.switches
        .iter()
        .flat_map(|(sw, st)| {
            st.incoming_pk
                .keys()
                .map(move |p| vec![Arg::Switch(*sw), Arg::Packet(*p)])
        })
        .collect()
}

fn outgoing_pk_candidates(_: &Model, s: &GlobalState) -> Vec<Vec<Arg>> {
    let mut out = Vec::new();
    for (sw, st) in &s.switches {
        for (p, dests) in &st.outgoing_pk {
            for d in dests {
                out.push(vec![Arg::Switch(*sw), Arg::Packet(*p), Arg::Switch(*d)]);
            }
        }
    }
    out
}

fn chan_down_candidates(_: &Model, s: &GlobalState) -> Vec<Vec<Arg>> {
    s.chan_down
        .distinct()
        .map(|(m, sw)| vec![Arg::Switch(*sw), Arg::Message(*m)])
        .collect()
}

fn incoming_msg_candidates(_: &Model, s: &GlobalState) -> Vec<Vec<Arg>> {
    s.switches
        .iter()
        .flat_map(|(sw, st)| {
            st.incoming_msg
                .iter()
                .map(move |m| vec![Arg::Switch(*sw), Arg::Message(*m)])
        })
        .collect()
}

fn env_packet_candidates(_: &Model, s: &GlobalState) -> Vec<Vec<Arg>> {
    s.pools
        .packets
        .iter()
        .map(|p| vec![Arg::Packet(*p)])
        .collect()
}

fn emit_candidates(model: &Model, s: &GlobalState) -> Vec<Vec<Arg>> {
    let fresh = model.fresh_ctl_choices(s);
    let mut out = Vec::new();
    for sw in s.switches.keys() {
        for p in &s.controller.outgoing_pk {
            for m in &fresh {
                out.push(vec![Arg::Switch(*sw), Arg::Packet(*p), Arg::Message(*m)]);
            }
        }
    }
    out
}

fn chan_up_candidates(_: &Model, s: &GlobalState) -> Vec<Vec<Arg>> {
    s.chan_up
        .distinct()
        .map(|(m, _)| vec![Arg::Message(*m)])
        .collect()
}

fn ctl_incoming_candidates(_: &Model, s: &GlobalState) -> Vec<Vec<Arg>> {
    s.controller
        .incoming_pk
        .keys()
        .map(|p| vec![Arg::Packet(*p)])
        .collect()
}

fn order_candidates(model: &Model, s: &GlobalState) -> Vec<Vec<Arg>> {
    let fresh = model.fresh_ctl_choices(s);
    s.controller
        .orders
        .iter()
        .flat_map(|o| {
            fresh.iter().map(move |m| {
                vec![
                    Arg::Switch(o.switch),
                    Arg::Entry(o.entry.id),
                    Arg::Message(*m),
                ]
            })
        })
        .collect()
}

fn barrier_ask_candidates(model: &Model, s: &GlobalState) -> Vec<Vec<Arg>> {
    let fresh = model.fresh_ctl_choices(s);
    s.pools
        .barrier_asks
        .iter()
        .flat_map(|sw| {
            fresh
                .iter()
                .map(move |m| vec![Arg::Switch(*sw), Arg::Message(*m)])
        })
        .collect()
}

fn status_ask_candidates(model: &Model, s: &GlobalState) -> Vec<Vec<Arg>> {
    let fresh = model.fresh_ctl_choices(s);
    s.pools
        .status_asks
        .iter()
        .flat_map(|sw| {
            fresh
                .iter()
                .map(move |m| vec![Arg::Switch(*sw), Arg::Message(*m)])
        })
        .collect()
}

// ---------------------------------------------------------------------------

const SW_PK: &[Sort] = &[Sort::Switch, Sort::Packet];
const SW_MSG: &[Sort] = &[Sort::Switch, Sort::Message];
const SW_PK_SW: &[Sort] = &[Sort::Switch, Sort::Packet, Sort::Switch];
const SW_PK_MSG: &[Sort] = &[Sort::Switch, Sort::Packet, Sort::Message];
const SW_ENTRY_MSG: &[Sort] = &[Sort::Switch, Sort::Entry, Sort::Message];
const PK: &[Sort] = &[Sort::Packet];
const MSG: &[Sort] = &[Sort::Message];

type Row = (
    &'static [Sort],
    crate::kernel::GuardFn<Model>,
    crate::kernel::ActionFn<Model>,
    crate::kernel::CandidateFn<Model>,
    &'static [Field],
);

fn row_table() -> [Row; 24] {
    use Field::*;
    [
        (
            SW_PK,
            rcv_matching_guard,
            rcv_matching_action,
            data_chan_candidates,
            &[DataChan, SwIPk],
        ),
        (
            SW_PK,
            rcv_unmatching_guard,
            rcv_unmatching_action,
            data_chan_candidates,
            &[DataChan, SwOMsg, MessageStore],
        ),
        (
            SW_MSG,
            snd_pk2ctrl_guard,
            move_up_action,
            outgoing_msg_candidates,
            &[SwOMsg, SecureChanUp],
        ),
        (
            SW_MSG,
            snd_msg2ctrl_guard,
            move_up_action,
            outgoing_msg_candidates,
            &[SwOMsg, SecureChanUp],
        ),
        (
            SW_PK,
            fwd_lookup_guard,
            fwd_lookup_action,
            incoming_pk_candidates,
            &[SwIPk, SwOPk],
        ),
        (
            SW_PK_SW,
            send_pckt_guard,
            send_pckt_action,
            outgoing_pk_candidates,
            &[SwOPk, DataChan, SwSentPkts],
        ),
        (
            SW_MSG,
            rcv_msg_guard,
            rcv_msg_action,
            chan_down_candidates,
            &[SecureChanDown, SwIncomingMsg],
        ),
        (
            SW_MSG,
            new_entry_guard,
            install_action,
            incoming_msg_candidates,
            &[SwIncomingMsg, FlowTable],
        ),
        (
            SW_MSG,
            mod_entry_guard,
            install_action,
            incoming_msg_candidates,
            &[SwIncomingMsg, FlowTable],
        ),
        (
            SW_MSG,
            del_entry_guard,
            del_entry_action,
            incoming_msg_candidates,
            &[SwIncomingMsg, FlowTable],
        ),
        (
            SW_MSG,
            handle_pkout_guard,
            handle_pkout_action,
            incoming_msg_candidates,
            &[SwIncomingMsg, SwOPk],
        ),
        (
            SW_MSG,
            barrier_rp_guard,
            reply_action,
            incoming_msg_candidates,
            &[SwIncomingMsg, SwOMsg, MessageStore],
        ),
        (
            SW_MSG,
            status_rp_guard,
            reply_action,
            incoming_msg_candidates,
            &[SwIncomingMsg, SwOMsg, MessageStore],
        ),
        (
            PK,
            have_packet_guard,
            have_packet_action,
            env_packet_candidates,
            &[PacketPool, CtlOutgoingPk],
        ),
        (
            SW_PK_MSG,
            emit_pkt_guard,
            emit_pkt_action,
            emit_candidates,
            &[CtlOutgoingPk, SecureChanDown, MessageStore, CtlSentPkts],
        ),
        (
            MSG,
            rcv_packet_in_guard,
            rcv_packet_in_action,
            chan_up_candidates,
            &[SecureChanUp, CtlIncomingPk],
        ),
        (
            PK,
            decide_rule_guard,
            decide_rule_action,
            ctl_incoming_candidates,
            &[CtlIncomingPk, CtlOutgoingPk, CtlOrders, EntryPool],
        ),
        (
            SW_ENTRY_MSG,
            send_add_guard,
            send_order_action,
            order_candidates,
            &[CtlOrders, SecureChanDown, MessageStore],
        ),
        (
            SW_ENTRY_MSG,
            send_modf_guard,
            send_order_action,
            order_candidates,
            &[CtlOrders, SecureChanDown, MessageStore],
        ),
        (
            SW_ENTRY_MSG,
            send_del_guard,
            send_order_action,
            order_candidates,
            &[CtlOrders, SecureChanDown, MessageStore],
        ),
        (
            SW_MSG,
            ask_barrier_guard,
            ask_barrier_action,
            barrier_ask_candidates,
            &[BarrierAsks, PendingBarrier, SecureChanDown, MessageStore],
        ),
        (
            MSG,
            rcv_barrier_guard,
            rcv_barrier_action,
            chan_up_candidates,
            &[SecureChanUp, PendingBarrier],
        ),
        (
            SW_MSG,
            ask_status_guard,
            ask_status_action,
            status_ask_candidates,
            &[StatusAsks, PendingStatus, SecureChanDown, MessageStore],
        ),
        (
            MSG,
            rcv_status_guard,
            rcv_status_action,
            chan_up_candidates,
            &[SecureChanUp, PendingStatus],
        ),
    ]
}

/// The catalogue rows of a level.
pub fn event_catalog(level: RefinementLevel) -> Vec<CatalogueRow> {
    row_table()
        .into_iter()
        .enumerate()
        .map(|(i, (sorts, guard, action, candidates, writes))| {
            let name = ROW_NAMES[i];
            let mut write_set: BTreeSet<Field> = writes.iter().copied().collect();
            if level >= RefinementLevel::L1 && matches!(i + 1, 5 | 6 | 11) {
                write_set.insert(Field::ActionsQueues);
            }
            if level >= RefinementLevel::L2 && write_set.contains(&Field::MessageStore) {
                write_set.insert(Field::MessagePriority);
            }
            CatalogueRow {
                row: (i + 1) as u8,
                def: EventDef {
                    name,
                    sorts,
                    guard,
                    action,
                    candidates: Some(candidates),
                },
                family: if i < 13 {
                    Family::Switch
                } else {
                    Family::Controller
                },
                introduced_at: RefinementLevel::L0,
                refines: (level > RefinementLevel::L0).then_some(name),
                write_set,
            }
        })
        .collect()
}

/// Concrete-to-abstract event names for `level`.
pub fn refines_map(
    level: RefinementLevel,
) -> Result<BTreeMap<&'static str, &'static str>, LevelError> {
    if level == RefinementLevel::L0 {
        return Err(LevelError::NoAbstraction(level));
    }
    Ok(event_catalog(level)
        .into_iter()
        .filter_map(|r| r.refines.map(|a| (r.def.name, a)))
        .collect())
}

/// A model bound to the catalogue of its level.
#[derive(Debug, Clone)]
pub struct System {
    pub model: Model,
    pub catalogue: Catalogue<Model>,
}

impl System {
    pub fn new(model: &Model, level: RefinementLevel) -> Self {
        let rows = event_catalog(level);
        System {
            model: model.at_level(level),
            catalogue: Catalogue::new(rows.into_iter().map(|r| r.def).collect())
                .expect("row names are unique"),
        }
    }

    pub fn with_catalogue(model: Model, catalogue: Catalogue<Model>) -> Self {
        System { model, catalogue }
    }

    pub fn level(&self) -> RefinementLevel {
        self.model.level
    }

    pub fn enabled(&self, s: &GlobalState) -> Vec<crate::kernel::EventInstance> {
        self.catalogue.enabled_instances(&self.model, s)
    }

    pub fn apply(
        &self,
        s: &GlobalState,
        inst: &crate::kernel::EventInstance,
    ) -> Result<GlobalState, crate::kernel::KernelError> {
        self.catalogue.apply(&self.model, s, inst)
    }

    pub fn domain(&self, s: &GlobalState, sort: Sort) -> Vec<Arg> {
        self.model.domain(s, sort)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twenty_four_rows() {
        let rows = event_catalog(RefinementLevel::L0);
        assert_eq!(rows.len(), 24);
        let names: BTreeSet<_> = rows.iter().map(|r| r.def.name).collect();
        assert_eq!(names, ROW_NAMES.iter().copied().collect());
        assert_eq!(
            rows.iter()
                .filter(|r| r.family == Family::Controller)
                .count(),
            11
        );
        assert!(rows.iter().all(|r| r.refines.is_none()));
    }

    #[test]
    fn l2_emit_writes_priority() {
        let rows = event_catalog(RefinementLevel::L2);
        assert!(rows[14].write_set.contains(&Field::MessagePriority));
        let rows = event_catalog(RefinementLevel::L1);
        assert!(!rows[14].write_set.contains(&Field::MessagePriority));
    }

    #[test]
    fn refines_is_identity() {
        assert_eq!(
            refines_map(RefinementLevel::L0),
            Err(LevelError::NoAbstraction(RefinementLevel::L0))
        );
        let m = refines_map(RefinementLevel::L1).unwrap();
        assert_eq!(m["sw_sendPckt2sw"], "sw_sendPckt2sw");
        let m3 = refines_map(RefinementLevel::L3).unwrap();
        assert_eq!(
            m3.keys().copied().collect::<BTreeSet<_>>(),
            ROW_NAMES.iter().copied().collect()
        );
    }

    #[test]
    fn level_parsing() {
        assert_eq!("L2".parse::<RefinementLevel>(), Ok(RefinementLevel::L2));
        assert!("L4".parse::<RefinementLevel>().is_err());
        assert!(RefinementLevel::L0 < RefinementLevel::L3);
    }
}
