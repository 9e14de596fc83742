//! Scenario files: a TOML description of the network, pools and run settings.
//!
//! ```toml
//! name = "S1"
//!
//! [run]
//! level = "L0"
//! depth = 64
//!
//! [[switches]]
//! id = "s1"
//! pkout_port = "port1"
//!
//! [[entries]]
//! id = "e1"
//! switch = "s1"
//! header = "h1"
//! actions = ["port1"]
//!
//! [ports]
//! port1 = "s2"
//! port3 = "host"
//!
//! [[packets]]
//! id = "p1"
//! header = "h1"
//!
//! [pools]
//! ctl_messages = 6
//! sw_messages = 4
//! entries = 2
//! packets = ["p1"]
//! ```
//!
//! Controller message ids are numbered first (`m1..`), then switch message
//! ids. Pool entry ids follow the largest declared entry id.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::events::RefinementLevel;
use crate::ids::{EntryId, Header, MsgId, PacketId, PortId, SwitchId};
use crate::state::{
    typing_invariants, ControllerRule, ControllerState, FlowEntry, GlobalState, MessageKind, Model,
    Order, Packet, Pools, PortTarget, SwitchState, SwitchStatus, FIELD_COUNT, FIELD_NAMES,
};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation error: {0}")]
    Validation(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PolicyName {
    #[default]
    Exhaustive,
    Seeded,
    Priority,
}

impl std::str::FromStr for PolicyName {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "exhaustive" => Ok(PolicyName::Exhaustive),
            "seeded" => Ok(PolicyName::Seeded),
            "priority" => Ok(PolicyName::Priority),
            _ => Err(format!(
                "unknown policy `{s}` (expected exhaustive|seeded|priority)"
            )),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_level")]
    pub level: RefinementLevel,
    #[serde(default = "default_depth")]
    pub depth: usize,
    /// Successors expanded per state; 0 means all.
    #[serde(default)]
    pub branch: usize,
    #[serde(default)]
    pub policy: PolicyName,
    #[serde(default)]
    pub seed: u64,
    /// Bind every unused controller message id instead of the smallest.
    #[serde(default)]
    pub branch_fresh: bool,
}

fn default_level() -> RefinementLevel {
    RefinementLevel::L0
}
fn default_depth() -> usize {
    64
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            level: default_level(),
            depth: default_depth(),
            branch: 0,
            policy: PolicyName::Exhaustive,
            seed: 0,
            branch_fresh: false,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSwitch {
    id: SwitchId,
    #[serde(default = "active")]
    status: SwitchStatus,
    pkout_port: Option<PortId>,
}

fn active() -> SwitchStatus {
    SwitchStatus::Active
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    id: EntryId,
    header: Header,
    actions: BTreeSet<PortId>,
    #[serde(default, rename = "match")]
    matches: BTreeMap<String, Header>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTableEntry {
    id: EntryId,
    switch: SwitchId,
    header: Header,
    actions: BTreeSet<PortId>,
    #[serde(default, rename = "match")]
    matches: BTreeMap<String, Header>,
}

impl RawTableEntry {
    fn entry(&self) -> RawEntry {
        RawEntry {
            id: self.id,
            header: self.header,
            actions: self.actions.clone(),
            matches: self.matches.clone(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPacket {
    id: PacketId,
    header: Header,
    #[serde(default)]
    fields: BTreeMap<String, Header>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPools {
    #[serde(default)]
    ctl_messages: u8,
    #[serde(default)]
    sw_messages: u8,
    #[serde(default)]
    entries: u8,
    #[serde(default)]
    packets: BTreeSet<PacketId>,
    #[serde(default)]
    barrier: BTreeSet<SwitchId>,
    #[serde(default)]
    status: BTreeSet<SwitchId>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRule {
    switch: SwitchId,
    header: Header,
    actions: BTreeSet<PortId>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawController {
    #[serde(default)]
    rules: Vec<RawRule>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOrder {
    kind: MessageKind,
    switch: SwitchId,
    entry: RawEntry,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: String,
    #[serde(default)]
    run: RunConfig,
    switches: Vec<RawSwitch>,
    #[serde(default)]
    entries: Vec<RawTableEntry>,
    #[serde(default)]
    ports: BTreeMap<PortId, String>,
    #[serde(default)]
    packets: Vec<RawPacket>,
    #[serde(default)]
    pools: RawPools,
    #[serde(default)]
    controller: RawController,
    #[serde(default)]
    orders: Vec<RawOrder>,
    #[serde(default)]
    priorities: BTreeMap<MessageKind, u8>,
}

/// A validated scenario. The model and initial state are built per level.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub run: RunConfig,
    model: Model,
    switches: BTreeMap<SwitchId, SwitchStatus>,
    tables: BTreeMap<SwitchId, Vec<FlowEntry>>,
    orders: Vec<Order>,
    pools: Pools,
}

fn field_index(name: &str) -> Result<usize, ScenarioError> {
    FIELD_NAMES
        .iter()
        .position(|f| *f == name)
        .ok_or_else(|| ScenarioError::Validation(format!("unknown header field `{name}`")))
}

fn build_entry(raw: &RawEntry) -> Result<FlowEntry, ScenarioError> {
    let mut extra = [None; FIELD_COUNT];
    for (name, h) in &raw.matches {
        extra[field_index(name)?] = Some(*h);
    }
    Ok(FlowEntry {
        id: raw.id,
        header: raw.header,
        extra: Some(extra),
        actions: raw.actions.clone(),
    })
}

fn at_level(entry: &FlowEntry, level: RefinementLevel) -> FlowEntry {
    let mut e = entry.clone();
    if level < RefinementLevel::L1 {
        e.extra = None;
    }
    e
}

impl Scenario {
    pub fn load(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Scenario::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Scenario, ScenarioError> {
        let raw: RawScenario =
            toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        let sc = Scenario::build(raw)?;
        for level in RefinementLevel::ALL {
            let model = sc.model(level);
            if let Some(v) = typing_invariants(&model, &sc.initial_state(level)).first() {
                return Err(ScenarioError::Validation(format!(
                    "initial state violates {v}"
                )));
            }
        }
        Ok(sc)
    }

    fn build(raw: RawScenario) -> Result<Scenario, ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Validation(m));
        let mut switches = BTreeMap::new();
        let mut pkout = BTreeMap::new();
        for s in &raw.switches {
            if switches.insert(s.id, s.status).is_some() {
                return bad(format!("switch {} declared twice", s.id));
            }
            if let Some(p) = s.pkout_port {
                pkout.insert(s.id, p);
            }
        }
        let known_sw = |sw: &SwitchId, what: &str| -> Result<(), ScenarioError> {
            if switches.contains_key(sw) {
                Ok(())
            } else {
                Err(ScenarioError::Validation(format!(
                    "{what} references undeclared switch {sw}"
                )))
            }
        };

        let mut ports = BTreeMap::new();
        for (port, target) in &raw.ports {
            let t = if target == "host" {
                PortTarget::Host
            } else {
                let sw: SwitchId = target.parse().map_err(ScenarioError::Validation)?;
                known_sw(&sw, &format!("port {port}"))?;
                PortTarget::Switch(sw)
            };
            ports.insert(*port, t);
        }
        let known_port = |p: &PortId, what: &str| -> Result<(), ScenarioError> {
            if ports.contains_key(p) {
                Ok(())
            } else {
                Err(ScenarioError::Validation(format!(
                    "{what} references undeclared port {p}"
                )))
            }
        };
        for (sw, p) in &pkout {
            known_port(p, &format!("switch {sw}"))?;
        }

        let mut tables: BTreeMap<SwitchId, Vec<FlowEntry>> =
            switches.keys().map(|s| (*s, Vec::new())).collect();
        let mut entry_ids = BTreeSet::new();
        for t in &raw.entries {
            known_sw(&t.switch, &format!("entry {}", t.id))?;
            for p in &t.actions {
                known_port(p, &format!("entry {}", t.id))?;
            }
            if !entry_ids.insert(t.id) {
                return bad(format!("entry {} declared twice", t.id));
            }
            tables
                .get_mut(&t.switch)
                .unwrap()
                .push(build_entry(&t.entry())?);
        }

        let mut orders = Vec::new();
        for o in &raw.orders {
            if !o.kind.carries_entry() {
                return bad(format!("order kind {:?} carries no entry", o.kind));
            }
            known_sw(&o.switch, "order")?;
            for p in &o.entry.actions {
                known_port(p, &format!("order entry {}", o.entry.id))?;
            }
            entry_ids.insert(o.entry.id);
            orders.push(Order {
                kind: o.kind,
                switch: o.switch,
                entry: build_entry(&o.entry)?,
            });
        }

        let first_pool_entry = entry_ids.iter().map(|e| e.0).max().unwrap_or(0) + 1;
        let pool_entries: BTreeSet<EntryId> = (0..raw.pools.entries)
            .map(|i| EntryId(first_pool_entry + i))
            .collect();
        entry_ids.extend(pool_entries.iter().copied());

        let mut packets = BTreeMap::new();
        for p in &raw.packets {
            let mut fields = [Header(0); FIELD_COUNT];
            for (name, h) in &p.fields {
                fields[field_index(name)?] = *h;
            }
            if packets
                .insert(
                    p.id,
                    Packet {
                        id: p.id,
                        header: p.header,
                        fields: Some(fields),
                    },
                )
                .is_some()
            {
                return bad(format!("packet {} declared twice", p.id));
            }
        }
        for p in &raw.pools.packets {
            if !packets.contains_key(p) {
                return bad(format!("pool references undeclared packet {p}"));
            }
        }
        for sw in raw.pools.barrier.iter().chain(&raw.pools.status) {
            known_sw(sw, "pools")?;
        }

        let mut rules = BTreeMap::new();
        for r in &raw.controller.rules {
            known_sw(&r.switch, "controller rule")?;
            for p in &r.actions {
                known_port(p, "controller rule")?;
            }
            let rule = ControllerRule {
                header: r.header,
                actions: r.actions.clone(),
            };
            if rules.insert(r.switch, rule).is_some() {
                return bad(format!(
                    "more than one controller rule for switch {}",
                    r.switch
                ));
            }
        }
        for (kind, prio) in &raw.priorities {
            if *prio > 7 {
                return bad(format!("priority of {kind:?} is {prio}, outside 0..=7"));
            }
        }

        let c = raw.pools.ctl_messages;
        let total = c as u16 + raw.pools.sw_messages as u16;
        if total > u8::MAX as u16 {
            return bad("message pools exceed 255 ids".into());
        }
        let model = Model {
            level: raw.run.level,
            packets,
            ports,
            pkout,
            rules,
            priorities: raw.priorities,
            ctl_msgs: (1..=c).map(MsgId).collect(),
            sw_msgs: (c + 1..=total as u8).map(MsgId).collect(),
            entry_ids,
            branch_fresh: raw.run.branch_fresh,
            preloaded_orders: orders.iter().cloned().collect(),
            barrier_targets: raw.pools.barrier.clone(),
            status_targets: raw.pools.status.clone(),
            pool_packets: raw.pools.packets.clone(),
            pool_entries: pool_entries.clone(),
        };
        let pools = Pools {
            packets: raw.pools.packets,
            entries: pool_entries,
            barrier_asks: raw.pools.barrier,
            status_asks: raw.pools.status,
        };
        Ok(Scenario {
            name: raw.name,
            run: raw.run,
            model,
            switches,
            tables,
            orders,
            pools,
        })
    }

    /// The static context at `level`.
    pub fn model(&self, level: RefinementLevel) -> Model {
        self.model.at_level(level)
    }

    pub fn initial_state(&self, level: RefinementLevel) -> GlobalState {
        let switches = self
            .switches
            .iter()
            .map(|(id, status)| {
                let mut st = SwitchState::new(*status);
                for e in &self.tables[id] {
                    st.flow_table.insert(e.id, at_level(e, level));
                }
                (*id, st)
            })
            .collect();
        let orders = self
            .orders
            .iter()
            .map(|o| Order {
                entry: at_level(&o.entry, level),
                ..o.clone()
            })
            .collect();
        GlobalState {
            switches,
            controller: ControllerState {
                orders,
                ..ControllerState::default()
            },
            pools: self.pools.clone(),
            ..GlobalState::default()
        }
    }

    /// The level named in the scenario's `[run]` section.
    pub fn level(&self) -> RefinementLevel {
        self.run.level
    }

    /// Removes one flow entry from a switch's initial table.
    pub fn without_entry(&self, entry: EntryId) -> Scenario {
        let mut sc = self.clone();
        for t in sc.tables.values_mut() {
            t.retain(|e| e.id != entry);
        }
        sc
    }
}
