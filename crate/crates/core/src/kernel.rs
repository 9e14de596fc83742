//! Guarded-event machine.
//!
//! An event is a guard/action pair over a state, parameterised by values drawn
//! from finite sorts. The kernel enumerates enabled instances, applies them and
//! detects deadlock. It never resolves nondeterministic choice itself; that is
//! left to [`crate::scheduler`].

use std::collections::BTreeSet;
use std::fmt;
use std::hash::Hash;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{EntryId, MsgId, PacketId, SwitchId};

/// Semantic sort of an event parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Sort {
    Switch,
    Packet,
    Message,
    Entry,
}

/// A bound parameter value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Arg {
    Switch(SwitchId),
    Packet(PacketId),
    Message(MsgId),
    Entry(EntryId),
}

impl Arg {
    pub fn sort(&self) -> Sort {
        match self {
            Arg::Switch(_) => Sort::Switch,
            Arg::Packet(_) => Sort::Packet,
            Arg::Message(_) => Sort::Message,
            Arg::Entry(_) => Sort::Entry,
        }
    }

    pub fn switch(&self) -> Option<SwitchId> {
        match *self {
            Arg::Switch(s) => Some(s),
            _ => None,
        }
    }

    pub fn packet(&self) -> Option<PacketId> {
        match *self {
            Arg::Packet(p) => Some(p),
            _ => None,
        }
    }

    pub fn message(&self) -> Option<MsgId> {
        match *self {
            Arg::Message(m) => Some(m),
            _ => None,
        }
    }

    pub fn entry(&self) -> Option<EntryId> {
        match *self {
            Arg::Entry(e) => Some(e),
            _ => None,
        }
    }

    /// Parses the textual form used in traces (`s1`, `p2`, `m3`, `e4`).
    pub fn parse(text: &str) -> Option<Arg> {
        let (head, tail) = text.split_at(1.min(text.len()));
        let n: u8 = tail.parse().ok()?;
        match head {
            "s" => Some(Arg::Switch(SwitchId(n))),
            "p" => Some(Arg::Packet(PacketId(n))),
            "m" => Some(Arg::Message(MsgId(n))),
            "e" => Some(Arg::Entry(EntryId(n))),
            _ => None,
        }
    }
}

impl fmt::Display for Arg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arg::Switch(s) => s.fmt(f),
            Arg::Packet(p) => p.fmt(f),
            Arg::Message(m) => m.fmt(f),
            Arg::Entry(e) => e.fmt(f),
        }
    }
}

impl std::str::FromStr for Arg {
    type Err = String;

    /// Id prefixes are distinct per sort, so the prefix picks the variant.
    fn from_str(s: &str) -> Result<Self, String> {
        match s.chars().next() {
            Some('s') => s.parse::<SwitchId>().map(Arg::Switch),
            Some('p') => s.parse::<PacketId>().map(Arg::Packet),
            Some('m') => s.parse::<MsgId>().map(Arg::Message),
            Some('e') => s.parse::<EntryId>().map(Arg::Entry),
            _ => Err(format!("`{s}` is not an event argument")),
        }
    }
}

/// Static data an event system is interpreted against (the "context").
pub trait Context {
    type State: Clone + Eq + Hash + fmt::Debug;

    /// Finite domain of a sort in a given state.
    fn domain(&self, state: &Self::State, sort: Sort) -> Vec<Arg>;
}

pub type GuardFn<C> = fn(&C, &<C as Context>::State, &[Arg]) -> bool;
pub type ActionFn<C> = fn(&C, &<C as Context>::State, &[Arg]) -> <C as Context>::State;
pub type CandidateFn<C> = fn(&C, &<C as Context>::State) -> Vec<Vec<Arg>>;

/// A parameterised guarded event.
pub struct EventDef<C: Context> {
    pub name: &'static str,
    pub sorts: &'static [Sort],
    pub guard: GuardFn<C>,
    pub action: ActionFn<C>,
    /// Optional narrowing of the parameter space. Every returned tuple is still
    /// checked against `guard`; tuples it omits must have a false guard.
    pub candidates: Option<CandidateFn<C>>,
}

impl<C: Context> Clone for EventDef<C> {
    fn clone(&self) -> Self {
        EventDef {
            name: self.name,
            sorts: self.sorts,
            guard: self.guard,
            action: self.action,
            candidates: self.candidates,
        }
    }
}

impl<C: Context> fmt::Debug for EventDef<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EventDef")
            .field("name", &self.name)
            .field("sorts", &self.sorts)
            .finish()
    }
}

impl<C: Context> EventDef<C> {
    /// Every argument tuple over the sort domains, in lexicographic order.
    pub fn all_bindings(&self, ctx: &C, state: &C::State) -> Vec<Vec<Arg>> {
        let mut out: Vec<Vec<Arg>> = vec![Vec::new()];
        for sort in self.sorts {
            let dom = ctx.domain(state, *sort);
            let mut next = Vec::with_capacity(out.len() * dom.len());
            for prefix in &out {
                for v in &dom {
                    let mut t = prefix.clone();
                    t.push(*v);
                    next.push(t);
                }
            }
            out = next;
        }
        out
    }

    pub fn well_sorted(&self, args: &[Arg]) -> bool {
        args.len() == self.sorts.len() && args.iter().zip(self.sorts).all(|(a, s)| a.sort() == *s)
    }
}

/// An event name with bound arguments; the unit of transition.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EventInstance {
    pub event: String,
    pub args: Vec<Arg>,
}

impl EventInstance {
    pub fn new(event: impl Into<String>, args: Vec<Arg>) -> Self {
        EventInstance {
            event: event.into(),
            args,
        }
    }
}

impl fmt::Display for EventInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.event)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum KernelError {
    #[error("unknown event `{0}`")]
    UnknownEvent(String),
    #[error("guard of {0} does not hold")]
    GuardViolation(String),
    #[error("arguments of {0} do not match the event's parameter sorts")]
    BadArity(String),
    #[error("duplicate event name `{0}` in catalogue")]
    DuplicateEvent(String),
}

/// A set of events with unique names.
pub struct Catalogue<C: Context> {
    events: Vec<EventDef<C>>,
}

impl<C: Context> Clone for Catalogue<C> {
    fn clone(&self) -> Self {
        Catalogue {
            events: self.events.clone(),
        }
    }
}

impl<C: Context> fmt::Debug for Catalogue<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list()
            .entries(self.events.iter().map(|e| e.name))
            .finish()
    }
}

impl<C: Context> Catalogue<C> {
    pub fn new(events: Vec<EventDef<C>>) -> Result<Self, KernelError> {
        let mut seen = BTreeSet::new();
        for e in &events {
            if !seen.insert(e.name) {
                return Err(KernelError::DuplicateEvent(e.name.to_string()));
            }
        }
        Ok(Catalogue { events })
    }

    pub fn events(&self) -> &[EventDef<C>] {
        &self.events
    }

    pub fn get(&self, name: &str) -> Option<&EventDef<C>> {
        self.events.iter().find(|e| e.name == name)
    }

    pub fn names(&self) -> BTreeSet<&'static str> {
        self.events.iter().map(|e| e.name).collect()
    }

    /// Drops an event; used to build mutants.
    pub fn without(mut self, name: &str) -> Self {
        self.events.retain(|e| e.name != name);
        self
    }

    /// Replaces an event definition with the same name.
    pub fn replace(mut self, def: EventDef<C>) -> Self {
        match self.events.iter_mut().find(|e| e.name == def.name) {
            Some(slot) => *slot = def,
            None => self.events.push(def),
        }
        self
    }

    /// Instances whose guard holds, sorted by (name, arguments).
    pub fn enabled_instances(&self, ctx: &C, state: &C::State) -> Vec<EventInstance> {
        let mut out = Vec::new();
        for ev in &self.events {
            let bindings = match ev.candidates {
                Some(gen) => gen(ctx, state),
                None => ev.all_bindings(ctx, state),
            };
            for args in bindings {
                if ev.well_sorted(&args) && (ev.guard)(ctx, state, &args) {
                    out.push(EventInstance::new(ev.name, args));
                }
            }
        }
        out.sort();
        out.dedup();
        out
    }

    /// Same as [`Catalogue::enabled_instances`] but ignores candidate generators
    /// and tries the full cartesian product of sort domains.
    pub fn enabled_instances_brute_force(&self, ctx: &C, state: &C::State) -> Vec<EventInstance> {
        let mut out = Vec::new();
        for ev in &self.events {
            for args in ev.all_bindings(ctx, state) {
                if (ev.guard)(ctx, state, &args) {
                    out.push(EventInstance::new(ev.name, args));
                }
            }
        }
        out.sort();
        out
    }

    pub fn is_enabled(
        &self,
        ctx: &C,
        state: &C::State,
        inst: &EventInstance,
    ) -> Result<bool, KernelError> {
        let ev = self
            .get(&inst.event)
            .ok_or_else(|| KernelError::UnknownEvent(inst.event.clone()))?;
        if !ev.well_sorted(&inst.args) {
            return Err(KernelError::BadArity(inst.to_string()));
        }
        Ok((ev.guard)(ctx, state, &inst.args))
    }

    pub fn apply(
        &self,
        ctx: &C,
        state: &C::State,
        inst: &EventInstance,
    ) -> Result<C::State, KernelError> {
        if !self.is_enabled(ctx, state, inst)? {
            return Err(KernelError::GuardViolation(inst.to_string()));
        }
        let ev = self.get(&inst.event).expect("checked above");
        Ok((ev.action)(ctx, state, &inst.args))
    }

    pub fn detect_deadlock(&self, ctx: &C, state: &C::State) -> bool {
        self.enabled_instances(ctx, state).is_empty()
    }
}

/// An execution: the initial state and each step with its post-state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace<S> {
    pub initial: S,
    pub steps: Vec<(EventInstance, S)>,
}

impl<S: Clone> Trace<S> {
    pub fn new(initial: S) -> Self {
        Trace {
            initial,
            steps: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn last_state(&self) -> &S {
        self.steps.last().map(|(_, s)| s).unwrap_or(&self.initial)
    }

    pub fn events(&self) -> impl Iterator<Item = &EventInstance> {
        self.steps.iter().map(|(e, _)| e)
    }
}

impl<S: Clone + Eq> Trace<S> {
    /// Re-executes the trace through the catalogue, checking every step was
    /// enabled and produced the recorded post-state.
    pub fn replay<C>(&self, ctx: &C, cat: &Catalogue<C>) -> Result<(), KernelError>
    where
        C: Context<State = S>,
        S: Hash + fmt::Debug,
    {
        let mut cur = self.initial.clone();
        for (inst, after) in &self.steps {
            let next = cat.apply(ctx, &cur, inst)?;
            if &next != after {
                return Err(KernelError::GuardViolation(format!(
                    "{inst} (post-state mismatch)"
                )));
            }
            cur = next;
        }
        Ok(())
    }
}
