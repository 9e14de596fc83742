//! The SDN state space.
//!
//! The global relations of the model (`swIPk ∈ PACKET ↔ switches`, `flowTable ∈
//! ENTRY ⇸ switches`, ...) are stored per switch; [`GlobalState::sw_incoming_pk`]
//! and friends fold them back into the global view. Static carrier-set data
//! (packet headers, ports, controller rules) lives in [`Model`], the context.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::events::RefinementLevel;
use crate::ids::{EntryId, Header, MsgId, PacketId, PortId, SwitchId};
use crate::kernel::{Arg, Context, Sort};
use crate::multiset::Multiset;

/// Number of refined header fields carried by packets and entries from L1 on.
pub const FIELD_COUNT: usize = 9;

/// Names of the refined header fields, in storage order.
pub const FIELD_NAMES: [&str; FIELD_COUNT] = [
    "mac_src",
    "mac_dst",
    "ip_src",
    "ip_dst",
    "ip_proto",
    "tp_src",
    "tp_dst",
    "tp_src_pt",
    "tp_dst_pt",
];

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Packet {
    pub id: PacketId,
    pub header: Header,
    /// Refined header fields; present from L1 onward.
    pub fields: Option<[Header; FIELD_COUNT]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MessageKind {
    PKOut,
    PacketIn,
    Add,
    Modf,
    Del,
    Barrier,
    BarrierAck,
    StatusReq,
    StatusRep,
}

impl MessageKind {
    pub const ALL: [MessageKind; 9] = [
        MessageKind::PKOut,
        MessageKind::PacketIn,
        MessageKind::Add,
        MessageKind::Modf,
        MessageKind::Del,
        MessageKind::Barrier,
        MessageKind::BarrierAck,
        MessageKind::StatusReq,
        MessageKind::StatusRep,
    ];

    pub fn carries_packet(self) -> bool {
        matches!(self, MessageKind::PKOut | MessageKind::PacketIn)
    }

    pub fn carries_entry(self) -> bool {
        matches!(
            self,
            MessageKind::Add | MessageKind::Modf | MessageKind::Del
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SwitchStatus {
    Active,
    Inactive,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct FlowEntry {
    pub id: EntryId,
    pub header: Header,
    /// Per-field match on the refined headers; `None` is a wildcard.
    pub extra: Option<[Option<Header>; FIELD_COUNT]>,
    pub actions: BTreeSet<PortId>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Message {
    pub id: MsgId,
    pub kind: MessageKind,
    pub packet: Option<PacketId>,
    pub entry: Option<FlowEntry>,
    /// Output port a PKOut asks the switch to deliver on.
    pub out_port: Option<PortId>,
    /// Status reported by a StatusRep.
    pub status: Option<SwitchStatus>,
    pub priority: Option<u8>,
}

impl Message {
    pub fn new(id: MsgId, kind: MessageKind) -> Self {
        Message {
            id,
            kind,
            packet: None,
            entry: None,
            out_port: None,
            status: None,
            priority: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct SwitchState {
    pub status: SwitchStatus,
    pub flow_table: BTreeMap<EntryId, FlowEntry>,
    pub incoming_msg: BTreeSet<MsgId>,
    /// Received packets with the entry they matched at reception time.
    pub incoming_pk: BTreeMap<PacketId, FlowEntry>,
    pub outgoing_msg: BTreeSet<MsgId>,
    /// Packets awaiting forwarding, with their remaining destination switches.
    pub outgoing_pk: BTreeMap<PacketId, BTreeSet<SwitchId>>,
    /// L1+: packets queued per output port.
    pub actions_queues: BTreeMap<PortId, BTreeSet<PacketId>>,
}

impl SwitchState {
    pub fn new(status: SwitchStatus) -> Self {
        SwitchState {
            status,
            flow_table: BTreeMap::new(),
            incoming_msg: BTreeSet::new(),
            incoming_pk: BTreeMap::new(),
            outgoing_msg: BTreeSet::new(),
            outgoing_pk: BTreeMap::new(),
            actions_queues: BTreeMap::new(),
        }
    }

    /// True if the packet sits in one of this switch's packet buffers.
    pub fn buffers(&self, pkt: PacketId) -> bool {
        self.incoming_pk.contains_key(&pkt) || self.outgoing_pk.contains_key(&pkt)
    }
}

/// A control order the controller has decided on but not yet sent.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Order {
    pub kind: MessageKind,
    pub switch: SwitchId,
    pub entry: FlowEntry,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ControllerState {
    /// Packets received through PacketIn, with the switch that reported them.
    pub incoming_pk: BTreeMap<PacketId, SwitchId>,
    pub outgoing_pk: BTreeSet<PacketId>,
    pub orders: BTreeSet<Order>,
    pub pending_barrier: BTreeSet<SwitchId>,
    pub pending_status: BTreeSet<SwitchId>,
}

/// Environment pools: things the environment can still hand to the controller.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Pools {
    pub packets: BTreeSet<PacketId>,
    pub entries: BTreeSet<EntryId>,
    pub barrier_asks: BTreeSet<SwitchId>,
    pub status_asks: BTreeSet<SwitchId>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct GlobalState {
    pub switches: BTreeMap<SwitchId, SwitchState>,
    pub controller: ControllerState,
    /// Controller → switch half of the secure channel.
    pub chan_down: Multiset<(MsgId, SwitchId)>,
    /// Switch → controller half of the secure channel.
    pub chan_up: Multiset<(MsgId, SwitchId)>,
    pub data_chan: Multiset<(PacketId, SwitchId)>,
    /// Ghost: (packet, switch) pairs the controller emitted a packet to.
    pub ctl_sent: BTreeSet<(PacketId, SwitchId)>,
    /// Ghost: (packet, destination) pairs switches put on the data channel.
    pub sw_sent: BTreeSet<(PacketId, SwitchId)>,
    pub pools: Pools,
    /// Every message minted so far. Write-once per id.
    pub messages: BTreeMap<MsgId, Message>,
}

impl GlobalState {
    pub fn switch(&self, sw: SwitchId) -> Option<&SwitchState> {
        self.switches.get(&sw)
    }

    pub fn message(&self, msg: MsgId) -> Option<&Message> {
        self.messages.get(&msg)
    }

    pub fn kind_of(&self, msg: MsgId) -> Option<MessageKind> {
        self.messages.get(&msg).map(|m| m.kind)
    }

    /// The undirected secure channel `secureChan ⊆ MESG × switches`.
    pub fn secure_chan(&self) -> BTreeSet<(MsgId, SwitchId)> {
        self.chan_down
            .distinct()
            .chain(self.chan_up.distinct())
            .copied()
            .collect()
    }

    /// `swIPk` as a global relation.
    pub fn sw_ipk(&self) -> BTreeSet<(PacketId, SwitchId)> {
        self.switches
            .iter()
            .flat_map(|(sw, s)| s.incoming_pk.keys().map(move |p| (*p, *sw)))
            .collect()
    }

    /// `swIncomingPk = dom(swIPk)`.
    pub fn sw_incoming_pk(&self) -> BTreeSet<PacketId> {
        self.sw_ipk().into_iter().map(|(p, _)| p).collect()
    }

    /// `swOPk` as a global relation.
    pub fn sw_opk(&self) -> BTreeSet<(PacketId, SwitchId)> {
        self.switches
            .iter()
            .flat_map(|(sw, s)| s.outgoing_pk.keys().map(move |p| (*p, *sw)))
            .collect()
    }

    pub fn sw_outgoing_pk(&self) -> BTreeSet<PacketId> {
        self.sw_opk().into_iter().map(|(p, _)| p).collect()
    }

    pub fn sw_omsg(&self) -> BTreeSet<(MsgId, SwitchId)> {
        self.switches
            .iter()
            .flat_map(|(sw, s)| s.outgoing_msg.iter().map(move |m| (*m, *sw)))
            .collect()
    }

    pub fn sw_incoming_msg(&self) -> BTreeSet<(MsgId, SwitchId)> {
        self.switches
            .iter()
            .flat_map(|(sw, s)| s.incoming_msg.iter().map(move |m| (*m, *sw)))
            .collect()
    }

    /// `flowTable ∈ ENTRY ⇸ switches`.
    pub fn flow_table(&self) -> BTreeMap<EntryId, SwitchId> {
        self.switches
            .iter()
            .flat_map(|(sw, s)| s.flow_table.keys().map(move |e| (*e, *sw)))
            .collect()
    }

    pub fn data_chan_packets(&self) -> BTreeSet<PacketId> {
        self.data_chan.distinct().map(|(p, _)| *p).collect()
    }

    pub fn ctl_sent_packets(&self) -> BTreeSet<PacketId> {
        self.ctl_sent.iter().map(|(p, _)| *p).collect()
    }

    pub fn sw_sent_packets(&self) -> BTreeSet<PacketId> {
        self.sw_sent.iter().map(|(p, _)| *p).collect()
    }

    /// Short stable digest of the canonical serialisation.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("state serialises");
        let hash = Sha256::digest(&bytes);
        hash[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Forgets the variables introduced above `level`.
    pub fn project(&self, level: RefinementLevel) -> GlobalState {
        let mut s = self.clone();
        if level < RefinementLevel::L2 {
            for m in s.messages.values_mut() {
                m.priority = None;
            }
        }
        if level < RefinementLevel::L1 {
            let strip = |e: &mut FlowEntry| e.extra = None;
            for sw in s.switches.values_mut() {
                sw.actions_queues.clear();
                sw.flow_table.values_mut().for_each(strip);
                sw.incoming_pk.values_mut().for_each(strip);
            }
            s.controller.orders = s
                .controller
                .orders
                .into_iter()
                .map(|mut o| {
                    o.entry.extra = None;
                    o
                })
                .collect();
            for m in s.messages.values_mut() {
                if let Some(e) = m.entry.as_mut() {
                    e.extra = None;
                }
            }
        }
        s
    }
}

/// Where an output port leads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum PortTarget {
    Switch(SwitchId),
    /// Leaves the network; packets sent here are delivered.
    Host,
}

/// How the controller answers a PacketIn from a switch.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct ControllerRule {
    pub header: Header,
    pub actions: BTreeSet<PortId>,
}

/// Static context the events are interpreted against.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Model {
    pub level: RefinementLevel,
    pub packets: BTreeMap<PacketId, Packet>,
    pub ports: BTreeMap<PortId, PortTarget>,
    /// Port each switch delivers PKOut packets on.
    pub pkout: BTreeMap<SwitchId, PortId>,
    pub rules: BTreeMap<SwitchId, ControllerRule>,
    pub priorities: BTreeMap<MessageKind, u8>,
    /// Message ids the controller may mint.
    pub ctl_msgs: BTreeSet<MsgId>,
    /// Message ids switches may mint.
    pub sw_msgs: BTreeSet<MsgId>,
    /// Every entry id that may ever appear.
    pub entry_ids: BTreeSet<EntryId>,
    /// Branch over every unused message id instead of the smallest one.
    pub branch_fresh: bool,
    /// Initial controller setup, readable as context by external events.
    pub preloaded_orders: BTreeSet<Order>,
    pub barrier_targets: BTreeSet<SwitchId>,
    pub status_targets: BTreeSet<SwitchId>,
    pub pool_packets: BTreeSet<PacketId>,
    pub pool_entries: BTreeSet<EntryId>,
}

impl Model {
    pub fn at_level(&self, level: RefinementLevel) -> Model {
        Model {
            level,
            ..self.clone()
        }
    }

    pub fn priority_of(&self, kind: MessageKind) -> Option<u8> {
        (self.level >= RefinementLevel::L2)
            .then(|| self.priorities.get(&kind).copied().unwrap_or(0))
    }

    pub fn target(&self, port: PortId) -> Option<PortTarget> {
        self.ports.get(&port).copied()
    }

    /// Switch destinations of a set of output ports; host ports are dropped.
    pub fn switch_targets(&self, ports: &BTreeSet<PortId>) -> BTreeSet<SwitchId> {
        ports
            .iter()
            .filter_map(|p| match self.target(*p) {
                Some(PortTarget::Switch(s)) => Some(s),
                _ => None,
            })
            .collect()
    }

    fn unused<'a>(
        range: &'a BTreeSet<MsgId>,
        state: &'a GlobalState,
    ) -> impl Iterator<Item = MsgId> + 'a {
        range
            .iter()
            .copied()
            .filter(move |m| !state.messages.contains_key(m))
    }

    /// Smallest unused controller message id.
    pub fn fresh_ctl_msg(&self, state: &GlobalState) -> Option<MsgId> {
        Self::unused(&self.ctl_msgs, state).next()
    }

    pub fn fresh_sw_msg(&self, state: &GlobalState) -> Option<MsgId> {
        Self::unused(&self.sw_msgs, state).next()
    }

    /// Controller message ids an event may bind as "fresh".
    pub fn fresh_ctl_choices(&self, state: &GlobalState) -> Vec<MsgId> {
        if self.branch_fresh {
            Self::unused(&self.ctl_msgs, state).collect()
        } else {
            self.fresh_ctl_msg(state).into_iter().collect()
        }
    }

    pub fn is_fresh_ctl(&self, state: &GlobalState, msg: MsgId) -> bool {
        if self.branch_fresh {
            self.ctl_msgs.contains(&msg) && !state.messages.contains_key(&msg)
        } else {
            self.fresh_ctl_msg(state) == Some(msg)
        }
    }

    /// Builds a message of `kind` with the level's priority.
    pub fn mint(&self, id: MsgId, kind: MessageKind) -> Message {
        Message {
            priority: self.priority_of(kind),
            ..Message::new(id, kind)
        }
    }
}

impl Context for Model {
    type State = GlobalState;

    fn domain(&self, state: &GlobalState, sort: Sort) -> Vec<Arg> {
        match sort {
            Sort::Switch => state.switches.keys().map(|s| Arg::Switch(*s)).collect(),
            Sort::Packet => self.packets.keys().map(|p| Arg::Packet(*p)).collect(),
            Sort::Message => self
                .ctl_msgs
                .union(&self.sw_msgs)
                .map(|m| Arg::Message(*m))
                .collect(),
            Sort::Entry => self.entry_ids.iter().map(|e| Arg::Entry(*e)).collect(),
        }
    }
}

/// Entry of `sw`'s table matching `pkt`; lowest entry id wins.
///
/// At L0 only the primary header is compared. From L1 on, every non-wildcard
/// refined field must also agree.
pub fn match_entry<'a>(
    sw: &'a SwitchState,
    pkt: &Packet,
    level: RefinementLevel,
) -> Option<&'a FlowEntry> {
    sw.flow_table
        .values()
        .find(|e| entry_matches(e, pkt, level))
}

pub fn entry_matches(entry: &FlowEntry, pkt: &Packet, level: RefinementLevel) -> bool {
    if entry.header != pkt.header {
        return false;
    }
    if level < RefinementLevel::L1 {
        return true;
    }
    match (&entry.extra, &pkt.fields) {
        (Some(want), Some(have)) => want
            .iter()
            .zip(have)
            .all(|(w, h)| w.is_none_or(|w| w == *h)),
        (Some(want), None) => want.iter().all(Option::is_none),
        (None, _) => true,
    }
}

/// A broken typing invariant.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Violation {
    pub invariant: &'static str,
    pub ids: Vec<String>,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [{}]", self.invariant, self.ids.join(", "))
    }
}

pub const INV_MSG_STORE: &str = "message-ids-resolve";
pub const INV_PKT_STORE: &str = "packet-ids-resolve";
pub const INV_PAYLOAD: &str = "message-payload-typed";
pub const INV_PRIORITY: &str = "channel-messages-have-priority";
pub const INV_DISJOINT: &str = "switch-buffers-disjoint";
pub const INV_ACTIONS: &str = "dom(actions) = dom(flowTable)";
pub const INV_QUEUES: &str = "actions-queues-match-destinations";
pub const INV_PORTS: &str = "ports-declared";
pub const INV_MSG_RANGE: &str = "message-ids-allocated";
pub const INV_ENTRY_POOL: &str = "entry-pool-fresh";
pub const INV_STATUS: &str = "dom(swStatus) = switches";

/// Every typing invariant of the state space. Empty means well-typed.
pub fn typing_invariants(model: &Model, s: &GlobalState) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut report = |inv: &'static str, ids: Vec<String>| {
        if !ids.is_empty() {
            out.push(Violation {
                invariant: inv,
                ids,
            });
        }
    };

    let msg_refs = s
        .chan_down
        .distinct()
        .chain(s.chan_up.distinct())
        .map(|(m, _)| *m)
        .chain(
            s.switches
                .values()
                .flat_map(|sw| sw.incoming_msg.iter().chain(&sw.outgoing_msg).copied()),
        );
    report(
        INV_MSG_STORE,
        msg_refs
            .filter(|m| !s.messages.contains_key(m))
            .map(|m| m.to_string())
            .collect(),
    );

    let mut pkt_refs: BTreeSet<PacketId> = BTreeSet::new();
    pkt_refs.extend(s.data_chan.distinct().map(|(p, _)| *p));
    pkt_refs.extend(s.ctl_sent.iter().chain(&s.sw_sent).map(|(p, _)| *p));
    pkt_refs.extend(s.pools.packets.iter());
    pkt_refs.extend(s.controller.incoming_pk.keys());
    pkt_refs.extend(s.controller.outgoing_pk.iter());
    pkt_refs.extend(s.messages.values().filter_map(|m| m.packet));
    for sw in s.switches.values() {
        pkt_refs.extend(sw.incoming_pk.keys());
        pkt_refs.extend(sw.outgoing_pk.keys());
        pkt_refs.extend(sw.actions_queues.values().flatten());
    }
    report(
        INV_PKT_STORE,
        pkt_refs
            .iter()
            .filter(|p| !model.packets.contains_key(p))
            .map(|p| p.to_string())
            .collect(),
    );

    report(
        INV_PAYLOAD,
        s.messages
            .values()
            .filter(|m| {
                (m.kind.carries_packet() && m.packet.is_none())
                    || (m.kind.carries_entry() && m.entry.is_none())
            })
            .map(|m| m.id.to_string())
            .collect(),
    );

    if model.level >= RefinementLevel::L2 {
        report(
            INV_PRIORITY,
            s.chan_down
                .distinct()
                .chain(s.chan_up.distinct())
                .filter(|(m, _)| s.messages.get(m).is_some_and(|msg| msg.priority.is_none()))
                .map(|(m, _)| m.to_string())
                .collect(),
        );
    }

    let mut overlap = Vec::new();
    let mut empty_actions = Vec::new();
    let mut bad_queues = Vec::new();
    let mut bad_ports = Vec::new();
    for (id, sw) in &s.switches {
        for p in sw.incoming_pk.keys() {
            if sw.outgoing_pk.contains_key(p) {
                overlap.push(format!("{id}:{p}"));
            }
        }
        for e in sw.flow_table.values() {
            if model.level >= RefinementLevel::L1 && e.actions.is_empty() {
                empty_actions.push(format!("{id}:{}", e.id));
            }
            for port in &e.actions {
                if !model.ports.contains_key(port) {
                    bad_ports.push(format!("{id}:{}:{port}", e.id));
                }
            }
        }
        if model.level >= RefinementLevel::L1 {
            let mut from_queues: BTreeMap<PacketId, BTreeSet<SwitchId>> = BTreeMap::new();
            for (port, pkts) in &sw.actions_queues {
                if let Some(PortTarget::Switch(t)) = model.target(*port) {
                    for p in pkts {
                        from_queues.entry(*p).or_default().insert(t);
                    }
                } else {
                    bad_queues.push(format!("{id}:{port}"));
                }
            }
            if from_queues != sw.outgoing_pk {
                bad_queues.push(id.to_string());
            }
        }
    }
    report(INV_DISJOINT, overlap);
    report(INV_ACTIONS, empty_actions);
    report(INV_QUEUES, bad_queues);
    report(INV_PORTS, bad_ports);

    report(
        INV_MSG_RANGE,
        s.messages
            .keys()
            .filter(|m| !model.ctl_msgs.contains(m) && !model.sw_msgs.contains(m))
            .map(|m| m.to_string())
            .collect(),
    );

    let mut used_entries: BTreeSet<EntryId> = BTreeSet::new();
    for sw in s.switches.values() {
        used_entries.extend(sw.flow_table.keys());
        used_entries.extend(sw.incoming_pk.values().map(|e| e.id));
    }
    used_entries.extend(s.controller.orders.iter().map(|o| o.entry.id));
    used_entries.extend(
        s.messages
            .values()
            .filter_map(|m| m.entry.as_ref().map(|e| e.id)),
    );
    report(
        INV_ENTRY_POOL,
        s.pools
            .entries
            .intersection(&used_entries)
            .map(|e| e.to_string())
            .collect(),
    );

    report(
        INV_STATUS,
        model
            .pkout
            .keys()
            .filter(|sw| !s.switches.contains_key(sw))
            .map(|sw| sw.to_string())
            .collect(),
    );

    out
}

/// State variables, used for write sets and frame checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Field {
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
}

/// Fields whose value differs between two states.
pub fn changed_fields(a: &GlobalState, b: &GlobalState) -> BTreeSet<Field> {
    let mut out = BTreeSet::new();
    let mut mark = |f: Field, differ: bool| {
        if differ {
            out.insert(f);
        }
    };
    let per_switch = |f: fn(&SwitchState) -> String| {
        a.switches.keys().ne(b.switches.keys())
            || a.switches
                .values()
                .zip(b.switches.values())
                .any(|(x, y)| f(x) != f(y))
    };
    mark(Field::SwStatus, per_switch(|s| format!("{:?}", s.status)));
    mark(
        Field::FlowTable,
        per_switch(|s| format!("{:?}", s.flow_table)),
    );
    mark(
        Field::SwIncomingMsg,
        per_switch(|s| format!("{:?}", s.incoming_msg)),
    );
    mark(Field::SwIPk, per_switch(|s| format!("{:?}", s.incoming_pk)));
    mark(
        Field::SwOMsg,
        per_switch(|s| format!("{:?}", s.outgoing_msg)),
    );
    mark(Field::SwOPk, per_switch(|s| format!("{:?}", s.outgoing_pk)));
    mark(
        Field::ActionsQueues,
        per_switch(|s| format!("{:?}", s.actions_queues)),
    );
    let (c, d) = (&a.controller, &b.controller);
    mark(Field::CtlIncomingPk, c.incoming_pk != d.incoming_pk);
    mark(Field::CtlOutgoingPk, c.outgoing_pk != d.outgoing_pk);
    mark(Field::CtlOrders, c.orders != d.orders);
    mark(
        Field::PendingBarrier,
        c.pending_barrier != d.pending_barrier,
    );
    mark(Field::PendingStatus, c.pending_status != d.pending_status);
    mark(Field::SecureChanDown, a.chan_down != b.chan_down);
    mark(Field::SecureChanUp, a.chan_up != b.chan_up);
    mark(Field::DataChan, a.data_chan != b.data_chan);
    mark(Field::CtlSentPkts, a.ctl_sent != b.ctl_sent);
    mark(Field::SwSentPkts, a.sw_sent != b.sw_sent);
    mark(Field::PacketPool, a.pools.packets != b.pools.packets);
    mark(Field::EntryPool, a.pools.entries != b.pools.entries);
    mark(
        Field::BarrierAsks,
        a.pools.barrier_asks != b.pools.barrier_asks,
    );
    mark(
        Field::StatusAsks,
        a.pools.status_asks != b.pools.status_asks,
    );
    mark(Field::MessageStore, a.messages != b.messages);
    let prio = |s: &GlobalState| {
        s.messages
            .iter()
            .map(|(k, m)| (*k, m.priority))
            .collect::<Vec<_>>()
    };
    mark(
        Field::MessagePriority,
        prio(a) != prio(b) && b.messages.values().any(|m| m.priority.is_some()),
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(id: u8, h: u16) -> FlowEntry {
        FlowEntry {
            id: EntryId(id),
            header: Header(h),
            extra: None,
            actions: [PortId(1)].into(),
        }
    }

    fn packet(id: u8, h: u16) -> Packet {
        Packet {
            id: PacketId(id),
            header: Header(h),
            fields: None,
        }
    }

    #[test]
    fn match_by_header_at_l0() {
        let mut sw = SwitchState::new(SwitchStatus::Active);
        assert!(match_entry(&sw, &packet(1, 1), RefinementLevel::L0).is_none());
        sw.flow_table.insert(EntryId(1), entry(1, 1));
        assert_eq!(
            match_entry(&sw, &packet(1, 1), RefinementLevel::L0)
                .unwrap()
                .id,
            EntryId(1)
        );
        assert!(match_entry(&sw, &packet(1, 2), RefinementLevel::L0).is_none());
    }

    #[test]
    fn lowest_entry_wins_regardless_of_insertion_order() {
        for order in [[1u8, 2], [2, 1]] {
            let mut sw = SwitchState::new(SwitchStatus::Active);
            for id in order {
                sw.flow_table.insert(EntryId(id), entry(id, 1));
            }
            assert_eq!(
                match_entry(&sw, &packet(1, 1), RefinementLevel::L0)
                    .unwrap()
                    .id,
                EntryId(1)
            );
        }
    }

    #[test]
    fn wildcard_matching_at_l1() {
        let mut fields = [Header(0); FIELD_COUNT];
        fields[3] = Header(7);
        let pkt = Packet {
            fields: Some(fields),
            ..packet(1, 1)
        };
        let mut want = [None; FIELD_COUNT];
        want[3] = Some(Header(7));
        let e = FlowEntry {
            extra: Some(want),
            ..entry(1, 1)
        };
        assert!(entry_matches(&e, &pkt, RefinementLevel::L1));
        want[3] = Some(Header(8));
        let e = FlowEntry {
            extra: Some(want),
            ..entry(1, 1)
        };
        assert!(!entry_matches(&e, &pkt, RefinementLevel::L1));
        // L0 ignores the refined fields.
        assert!(entry_matches(&e, &pkt, RefinementLevel::L0));
    }

    #[test]
    fn multiset_channel_serialises() {
        let mut s = GlobalState::default();
        s.chan_down.insert((MsgId(1), SwitchId(1)));
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.contains("[[\"m1\",\"s1\"],1]"));
        assert_eq!(s.digest().len(), 16);
    }
}
