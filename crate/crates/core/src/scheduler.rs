//! Resolution of nondeterministic choice.
//!
//! `a ≺ b` reads "b is scheduled strictly before a when both are enabled on
//! the same switch". The L3 catalogue bakes the shipped order into its guards;
//! [`filter_priority`] exposes the same rule as a filter over enabled sets.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::{is_switch_event, ROW_NAMES};
use crate::ids::SwitchId;
use crate::kernel::{Arg, EventInstance};
use crate::state::{GlobalState, Message};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SchedulerError {
    #[error("priority order is cyclic through `{0}`")]
    CyclicOrder(String),
    #[error("no enabled instance to choose from")]
    EmptyChoice,
    #[error("message {0} has no priority")]
    MissingPriority(String),
}

/// A strict partial order on event names, scoped per switch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PriorityOrder {
    pairs: BTreeSet<(String, String)>,
    /// For each event, every event transitively above it.
    above: BTreeMap<String, BTreeSet<String>>,
}

/// Switch events that consume a message from `swIncomingMsg`, other than the
/// barrier reply itself.
pub const MESSAGE_CONSUMERS: [&str; 5] = [
    "sw_newFTentry",
    "sw_modFTentry",
    "sw_delFTentry",
    "sw_handlePkOut",
    "sw_statusRp",
];

impl PriorityOrder {
    /// Builds the order from `(lower, higher)` pairs.
    pub fn new<I, A, B>(pairs: I) -> Result<Self, SchedulerError>
    where
        I: IntoIterator<Item = (A, B)>,
        A: Into<String>,
        B: Into<String>,
    {
        let pairs: BTreeSet<(String, String)> = pairs
            .into_iter()
            .map(|(a, b)| (a.into(), b.into()))
            .collect();
        let mut above: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (lo, hi) in &pairs {
            above.entry(lo.clone()).or_default().insert(hi.clone());
        }
        // Transitive closure by iteration to a fixpoint; the relation is tiny.
        loop {
            let mut grew = false;
            let snapshot = above.clone();
            for ups in above.values_mut() {
                let extra: Vec<String> = ups
                    .iter()
                    .filter_map(|u| snapshot.get(u))
                    .flatten()
                    .filter(|x| !ups.contains(*x))
                    .cloned()
                    .collect();
                if !extra.is_empty() {
                    grew = true;
                    ups.extend(extra);
                }
            }
            if !grew {
                break;
            }
        }
        if let Some((name, _)) = above.iter().find(|(k, ups)| ups.contains(*k)) {
            return Err(SchedulerError::CyclicOrder(name.clone()));
        }
        Ok(PriorityOrder { pairs, above })
    }

    /// The order shipped with the L3 model.
    pub fn shipped() -> &'static PriorityOrder {
        static ORDER: OnceLock<PriorityOrder> = OnceLock::new();
        ORDER.get_or_init(|| {
            let mut pairs = vec![
                ("sw_newFTentry", "sw_sendPckt2sw"),
                ("sw_sndPk2ctrl", "sw_sendPckt2sw"),
                ("sw_sndPk2ctrl", "sw_newFTentry"),
                ("sw_sendPckt2sw", "sw_delFTentry"),
            ];
            pairs.extend(MESSAGE_CONSUMERS.iter().map(|e| (*e, "sw_barrierRp")));
            PriorityOrder::new(pairs).expect("shipped order is acyclic")
        })
    }

    pub fn pairs(&self) -> &BTreeSet<(String, String)> {
        &self.pairs
    }

    /// Events strictly above `name` in the transitive closure.
    pub fn above(&self, name: &str) -> impl Iterator<Item = &str> {
        self.above
            .get(name)
            .into_iter()
            .flatten()
            .map(String::as_str)
    }

    pub fn precedes(&self, lower: &str, higher: &str) -> bool {
        self.above.get(lower).is_some_and(|u| u.contains(higher))
    }
}

fn instance_switch(inst: &EventInstance) -> Option<SwitchId> {
    if !is_switch_event(&inst.event) {
        return None;
    }
    inst.args.iter().find_map(Arg::switch)
}

/// Removes every switch instance dominated by another enabled instance on the
/// same switch. Controller instances pass through untouched.
pub fn filter_priority(enabled: &[EventInstance], order: &PriorityOrder) -> Vec<EventInstance> {
    let mut names_on: BTreeMap<SwitchId, BTreeSet<&str>> = BTreeMap::new();
    for inst in enabled {
        if let Some(sw) = instance_switch(inst) {
            names_on.entry(sw).or_default().insert(inst.event.as_str());
        }
    }
    enabled
        .iter()
        .filter(|inst| match instance_switch(inst) {
            None => true,
            Some(sw) => !names_on[&sw]
                .iter()
                .any(|other| order.precedes(&inst.event, other)),
        })
        .cloned()
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SchedulingPolicy {
    Exhaustive,
    SeededRandom(u64),
    PriorityThenSeed(u64),
}

/// Outcome of [`pick`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Choice {
    /// Exhaustive policy: the caller explores every option.
    Branch,
    Take(EventInstance),
}

/// A reproducible chooser owned by a single run.
#[derive(Debug, Clone)]
pub struct Picker {
    policy: SchedulingPolicy,
    rng: ChaCha8Rng,
}

impl Picker {
    pub fn new(policy: SchedulingPolicy) -> Self {
        let seed = match policy {
            SchedulingPolicy::Exhaustive => 0,
            SchedulingPolicy::SeededRandom(s) | SchedulingPolicy::PriorityThenSeed(s) => s,
        };
        Picker {
            policy,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Chooses among `enabled`. For the priority policy, instances bound to a
    /// message are ranked by that message's priority first.
    pub fn pick(
        &mut self,
        enabled: &[EventInstance],
        state: &GlobalState,
    ) -> Result<Choice, SchedulerError> {
        if enabled.is_empty() {
            return Err(SchedulerError::EmptyChoice);
        }
        let mut options: Vec<EventInstance> = enabled.to_vec();
        options.sort();
        match self.policy {
            SchedulingPolicy::Exhaustive => Ok(if options.len() == 1 {
                Choice::Take(options.remove(0))
            } else {
                Choice::Branch
            }),
            SchedulingPolicy::SeededRandom(_) => {
                Ok(Choice::Take(options.choose(&mut self.rng).unwrap().clone()))
            }
            SchedulingPolicy::PriorityThenSeed(_) => {
                let rank = |i: &EventInstance| {
                    i.args
                        .iter()
                        .find_map(Arg::message)
                        .and_then(|m| state.message(m))
                        .and_then(|m| m.priority)
                        .unwrap_or(0)
                };
                let best = options.iter().map(rank).max().unwrap();
                let top: Vec<EventInstance> =
                    options.into_iter().filter(|i| rank(i) == best).collect();
                Ok(Choice::Take(top.choose(&mut self.rng).unwrap().clone()))
            }
        }
    }
}

/// One-shot convenience around [`Picker::pick`].
pub fn pick(
    enabled: &[EventInstance],
    policy: SchedulingPolicy,
    state: &GlobalState,
) -> Result<Choice, SchedulerError> {
    Picker::new(policy).pick(enabled, state)
}

/// Messages by descending priority, ties by ascending id.
pub fn message_dequeue_order(msgs: &[Message]) -> Result<Vec<Message>, SchedulerError> {
    if let Some(m) = msgs.iter().find(|m| m.priority.is_none()) {
        return Err(SchedulerError::MissingPriority(m.id.to_string()));
    }
    let mut out = msgs.to_vec();
    out.sort_by(|a, b| b.priority.cmp(&a.priority).then(a.id.cmp(&b.id)));
    Ok(out)
}

/// Sanity check that every name in the order is a catalogue event.
pub fn order_names_known(order: &PriorityOrder) -> bool {
    order
        .pairs()
        .iter()
        .all(|(a, b)| ROW_NAMES.contains(&a.as_str()) && ROW_NAMES.contains(&b.as_str()))
}
