//! LTL with event atoms, checked on the explored state graph.
//!
//! A formula is checked at the first position of every maximal path from the
//! initial state. Paths ending in a deadlock are extended by stuttering on the
//! final state with no event, so `F p` must be realised before termination.
//!
//! The check builds a tableau for the negated formula on the fly, takes the
//! product with the graph, and searches for an accepting lasso with Tarjan's
//! SCC algorithm. Each `F ψ` subformula contributes one acceptance condition.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::events::ROW_NAMES;
use crate::ids::PacketId;
use crate::kernel::Trace;
use crate::state::GlobalState;

use super::explore::StateGraph;
use super::invariants::{Counterexample, Verdict};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LtlError {
    #[error("parse error at {pos}: {msg}")]
    ParseError { pos: usize, msg: String },
    #[error("unknown event `{0}` in formula")]
    UnknownEventAtom(String),
    #[error("malformed predicate at {pos}: {msg}")]
    MalformedPredicate { pos: usize, msg: String },
    #[error("formula has more than 64 eventualities")]
    TooLarge,
}

/// Named packet sets predicates may mention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PacketSet {
    CtlSentPkts,
    SwSentPkts,
    SwIncomingPk,
    SwOutgoingPk,
    CtlIncomingPk,
    CtlOutgoingPk,
    DataChan,
}

impl PacketSet {
    pub const ALL: [PacketSet; 7] = [
        PacketSet::CtlSentPkts,
        PacketSet::SwSentPkts,
        PacketSet::SwIncomingPk,
        PacketSet::SwOutgoingPk,
        PacketSet::CtlIncomingPk,
        PacketSet::CtlOutgoingPk,
        PacketSet::DataChan,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PacketSet::CtlSentPkts => "ctlSentPkts",
            PacketSet::SwSentPkts => "swSentPkts",
            PacketSet::SwIncomingPk => "swIncomingPk",
            PacketSet::SwOutgoingPk => "swOutgoingPk",
            PacketSet::CtlIncomingPk => "ctlIncomingPk",
            PacketSet::CtlOutgoingPk => "ctlOutgoingPk",
            PacketSet::DataChan => "dataChan",
        }
    }

    pub fn eval(self, s: &GlobalState) -> BTreeSet<PacketId> {
        match self {
            PacketSet::CtlSentPkts => s.ctl_sent_packets(),
            PacketSet::SwSentPkts => s.sw_sent_packets(),
            PacketSet::SwIncomingPk => s.sw_incoming_pk(),
            PacketSet::SwOutgoingPk => s.sw_outgoing_pk(),
            PacketSet::CtlIncomingPk => s.controller.incoming_pk.keys().copied().collect(),
            PacketSet::CtlOutgoingPk => s.controller.outgoing_pk.clone(),
            PacketSet::DataChan => s.data_chan_packets(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SetExpr {
    Var(PacketSet),
    Union(Box<SetExpr>, Box<SetExpr>),
}

impl SetExpr {
    pub fn eval(&self, s: &GlobalState) -> BTreeSet<PacketId> {
        match self {
            SetExpr::Var(v) => v.eval(s),
            SetExpr::Union(a, b) => {
                let mut x = a.eval(s);
                x.extend(b.eval(s));
                x
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StatePred {
    NonEmpty(SetExpr),
    Empty(SetExpr),
    Subset(SetExpr, SetExpr),
}

impl StatePred {
    pub fn eval(&self, s: &GlobalState) -> bool {
        match self {
            StatePred::NonEmpty(e) => !e.eval(s).is_empty(),
            StatePred::Empty(e) => e.eval(s).is_empty(),
            StatePred::Subset(a, b) => a.eval(s).is_subset(&b.eval(s)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LtlFormula {
    True,
    False,
    Event(String),
    Pred(StatePred),
    Not(Box<LtlFormula>),
    And(Box<LtlFormula>, Box<LtlFormula>),
    Implies(Box<LtlFormula>, Box<LtlFormula>),
    Next(Box<LtlFormula>),
    Finally(Box<LtlFormula>),
    Globally(Box<LtlFormula>),
}

impl LtlFormula {
    pub fn event(name: &str) -> Self {
        LtlFormula::Event(name.to_string())
    }

    pub fn implies(a: LtlFormula, b: LtlFormula) -> Self {
        LtlFormula::Implies(Box::new(a), Box::new(b))
    }

    pub fn finally(a: LtlFormula) -> Self {
        LtlFormula::Finally(Box::new(a))
    }

    pub fn next(a: LtlFormula) -> Self {
        LtlFormula::Next(Box::new(a))
    }

    pub fn globally(a: LtlFormula) -> Self {
        LtlFormula::Globally(Box::new(a))
    }

    fn events(&self, out: &mut Vec<String>) {
        match self {
            LtlFormula::Event(e) => out.push(e.clone()),
            LtlFormula::Not(a)
            | LtlFormula::Next(a)
            | LtlFormula::Finally(a)
            | LtlFormula::Globally(a) => a.events(out),
            LtlFormula::And(a, b) | LtlFormula::Implies(a, b) => {
                a.events(out);
                b.events(out);
            }
            _ => {}
        }
    }
}

// ---------------------------------------------------------------------------
// printing

impl fmt::Display for SetExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SetExpr::Var(v) => write!(f, "{}", v.name()),
            SetExpr::Union(a, b) => write!(f, "{a} \\/ {b}"),
        }
    }
}

impl fmt::Display for StatePred {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatePred::NonEmpty(e) => write!(f, "{{{e} /= {{}}}}"),
            StatePred::Empty(e) => write!(f, "{{{e} = {{}}}}"),
            StatePred::Subset(a, b) => write!(f, "{{{a} <: {b}}}"),
        }
    }
}

impl LtlFormula {
    fn is_binary(&self) -> bool {
        matches!(self, LtlFormula::And(..) | LtlFormula::Implies(..))
    }
}

impl fmt::Display for LtlFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LtlFormula::True => write!(f, "true"),
            LtlFormula::False => write!(f, "false"),
            LtlFormula::Event(e) => write!(f, "e({e})"),
            LtlFormula::Pred(p) => write!(f, "{p}"),
            LtlFormula::Not(a) if a.is_binary() => write!(f, "not ({a})"),
            LtlFormula::Not(a) => write!(f, "not {a}"),
            LtlFormula::And(a, b) => {
                let wrap_a = matches!(**a, LtlFormula::Implies(..));
                let wrap_b = b.is_binary();
                match (wrap_a, wrap_b) {
                    (false, false) => write!(f, "{a} and {b}"),
                    (true, false) => write!(f, "({a}) and {b}"),
                    (false, true) => write!(f, "{a} and ({b})"),
                    (true, true) => write!(f, "({a}) and ({b})"),
                }
            }
            LtlFormula::Implies(a, b) if matches!(**a, LtlFormula::Implies(..)) => {
                write!(f, "({a}) => {b}")
            }
            LtlFormula::Implies(a, b) => write!(f, "{a} => {b}"),
            LtlFormula::Next(a) => write!(f, "X({a})"),
            LtlFormula::Finally(a) => write!(f, "F({a})"),
            LtlFormula::Globally(a) => write!(f, "G({a})"),
        }
    }
}

// ---------------------------------------------------------------------------
// parsing

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

fn is_ident(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

impl<'a> Parser<'a> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T, LtlError> {
        Err(LtlError::ParseError {
            pos: self.pos,
            msg: msg.into(),
        })
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn eat(&mut self, tok: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(tok) {
            self.pos += tok.len();
            true
        } else {
            false
        }
    }

    /// Eats a keyword only if it is not a prefix of a longer identifier.
    fn eat_word(&mut self, word: &str) -> bool {
        self.skip_ws();
        let r = self.rest();
        if r.starts_with(word) && !r[word.len()..].starts_with(is_ident) {
            self.pos += word.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &str) -> Result<(), LtlError> {
        if self.eat(tok) {
            Ok(())
        } else {
            self.err(format!("expected `{tok}`"))
        }
    }

    fn ident(&mut self) -> Result<&'a str, LtlError> {
        self.skip_ws();
        let r = self.rest();
        let n = r.find(|c: char| !is_ident(c)).unwrap_or(r.len());
        if n == 0 {
            return self.err("expected a name");
        }
        self.pos += n;
        Ok(&r[..n])
    }

    fn formula(&mut self) -> Result<LtlFormula, LtlError> {
        let lhs = self.conjunction()?;
        if self.eat("=>") || self.eat("⟹") {
            let rhs = self.formula()?;
            return Ok(LtlFormula::Implies(Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> Result<LtlFormula, LtlError> {
        let mut lhs = self.unary()?;
        while self.eat_word("and") || self.eat("∧") {
            let rhs = self.unary()?;
            lhs = LtlFormula::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<LtlFormula, LtlError> {
        if self.eat_word("not") || self.eat("¬") {
            return Ok(LtlFormula::Not(Box::new(self.unary()?)));
        }
        for (op, build) in [
            ("X", LtlFormula::next as fn(LtlFormula) -> LtlFormula),
            ("F", LtlFormula::finally),
            ("G", LtlFormula::globally),
        ] {
            if self.eat_word(op) {
                self.expect("(")?;
                let inner = self.formula()?;
                self.expect(")")?;
                return Ok(build(inner));
            }
        }
        if self.eat_word("e") {
            self.expect("(")?;
            let name = self.ident()?;
            self.expect(")")?;
            return Ok(LtlFormula::Event(name.to_string()));
        }
        if self.eat_word("true") {
            return Ok(LtlFormula::True);
        }
        if self.eat_word("false") {
            return Ok(LtlFormula::False);
        }
        if self.eat("{") {
            let start = self.pos;
            let mut depth = 1;
            let mut end = None;
            for (i, c) in self.rest().char_indices() {
                match c {
                    '{' => depth += 1,
                    '}' => depth -= 1,
                    _ => {}
                }
                if depth == 0 {
                    end = Some(i + 1);
                    break;
                }
            }
            let Some(end) = end else {
                return self.err("unterminated predicate");
            };
            let body = &self.rest()[..end - 1];
            let pred =
                parse_pred(body).map_err(|msg| LtlError::MalformedPredicate { pos: start, msg })?;
            self.pos += end;
            return Ok(LtlFormula::Pred(pred));
        }
        if self.eat("(") {
            let inner = self.formula()?;
            self.expect(")")?;
            return Ok(inner);
        }
        self.skip_ws();
        if self.rest().is_empty() {
            self.err("unexpected end of formula")
        } else {
            self.err("unexpected token")
        }
    }
}

fn parse_set(text: &str) -> Result<SetExpr, String> {
    let mut parts = text.split("\\/").map(str::trim);
    let var = |name: &str| {
        PacketSet::ALL
            .iter()
            .find(|v| v.name() == name)
            .map(|v| SetExpr::Var(*v))
            .ok_or_else(|| format!("unknown set `{name}`"))
    };
    let mut e = var(parts.next().unwrap_or(""))?;
    for p in parts {
        e = SetExpr::Union(Box::new(e), Box::new(var(p)?));
    }
    Ok(e)
}

fn parse_pred(body: &str) -> Result<StatePred, String> {
    if let Some((a, b)) = body.split_once("/=") {
        if b.trim() != "{}" {
            return Err("`/=` only compares with {}".into());
        }
        return Ok(StatePred::NonEmpty(parse_set(a)?));
    }
    if let Some((a, b)) = body.split_once("<:") {
        return Ok(StatePred::Subset(parse_set(a)?, parse_set(b)?));
    }
    if let Some((a, b)) = body.split_once('=') {
        if b.trim() != "{}" {
            return Err("`=` only compares with {}".into());
        }
        return Ok(StatePred::Empty(parse_set(a)?));
    }
    Err("expected `/= {}`, `= {}` or `<:`".into())
}

/// Parses one formula.
pub fn parse_ltl(text: &str) -> Result<LtlFormula, LtlError> {
    let mut p = Parser { src: text, pos: 0 };
    let f = p.formula()?;
    p.skip_ws();
    if !p.rest().is_empty() {
        return p.err("trailing input");
    }
    Ok(f)
}

/// A named formula from a property file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Property {
    pub name: String,
    pub formula: LtlFormula,
    /// Reported with a witness and a counterexample; never a pass/fail verdict.
    pub report_only: bool,
}

/// Parses a formula file: one formula per line, optionally prefixed by
/// `NAME:`, and by the keyword `report` for report-only properties. Blank
/// lines and `#` comments are skipped.
pub fn parse_ltl_file(text: &str) -> Result<Vec<Property>, (usize, LtlError)> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (report_only, line) = match line.strip_prefix("report ") {
            Some(rest) => (true, rest.trim_start()),
            None => (false, line),
        };
        let (name, body) = match line.split_once(':') {
            Some((n, b)) if !n.is_empty() && n.chars().all(is_ident) => (n.trim().to_string(), b),
            _ => (format!("formula{}", out.len() + 1), line),
        };
        let formula = parse_ltl(body).map_err(|e| (lineno + 1, e))?;
        out.push(Property {
            name,
            formula,
            report_only,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// checking

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Nnf {
    True,
    False,
    /// Atom index and polarity.
    Lit(usize, bool),
    And(Box<Nnf>, Box<Nnf>),
    Or(Box<Nnf>, Box<Nnf>),
    X(Box<Nnf>),
    F(Box<Nnf>),
    G(Box<Nnf>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Atom {
    Event(String),
    Pred(StatePred),
}

fn atom_index(atoms: &mut Vec<Atom>, a: Atom) -> usize {
    match atoms.iter().position(|x| *x == a) {
        Some(i) => i,
        None => {
            atoms.push(a);
            atoms.len() - 1
        }
    }
}

fn to_nnf(f: &LtlFormula, neg: bool, atoms: &mut Vec<Atom>) -> Nnf {
    let b = Box::new;
    match f {
        LtlFormula::True => {
            if neg {
                Nnf::False
            } else {
                Nnf::True
            }
        }
        LtlFormula::False => {
            if neg {
                Nnf::True
            } else {
                Nnf::False
            }
        }
        LtlFormula::Event(e) => Nnf::Lit(atom_index(atoms, Atom::Event(e.clone())), !neg),
        LtlFormula::Pred(p) => Nnf::Lit(atom_index(atoms, Atom::Pred(p.clone())), !neg),
        LtlFormula::Not(a) => to_nnf(a, !neg, atoms),
        LtlFormula::And(x, y) => {
            let (x, y) = (to_nnf(x, neg, atoms), to_nnf(y, neg, atoms));
            if neg {
                Nnf::Or(b(x), b(y))
            } else {
                Nnf::And(b(x), b(y))
            }
        }
        LtlFormula::Implies(x, y) => {
            let (x, y) = (to_nnf(x, !neg, atoms), to_nnf(y, neg, atoms));
            if neg {
                Nnf::And(b(x), b(y))
            } else {
                Nnf::Or(b(x), b(y))
            }
        }
        // Paths are infinite after stutter extension, so X is self-dual.
        LtlFormula::Next(a) => Nnf::X(b(to_nnf(a, neg, atoms))),
        LtlFormula::Finally(a) => {
            if neg {
                Nnf::G(b(to_nnf(a, true, atoms)))
            } else {
                Nnf::F(b(to_nnf(a, false, atoms)))
            }
        }
        LtlFormula::Globally(a) => {
            if neg {
                Nnf::F(b(to_nnf(a, true, atoms)))
            } else {
                Nnf::G(b(to_nnf(a, false, atoms)))
            }
        }
    }
}

fn collect_eventualities(f: &Nnf, out: &mut Vec<Nnf>) {
    match f {
        Nnf::F(a) => {
            if !out.contains(f) {
                out.push(f.clone());
            }
            collect_eventualities(a, out);
        }
        Nnf::X(a) | Nnf::G(a) => collect_eventualities(a, out),
        Nnf::And(a, b) | Nnf::Or(a, b) => {
            collect_eventualities(a, out);
            collect_eventualities(b, out);
        }
        _ => {}
    }
}

type Obligation = BTreeSet<Nnf>;

struct Tableau {
    eventualities: Vec<Nnf>,
    obligations: Vec<Obligation>,
    ids: HashMap<Obligation, u32>,
    memo: HashMap<(u32, u64), Vec<(u32, u64)>>,
}

impl Tableau {
    fn intern(&mut self, o: Obligation) -> u32 {
        if let Some(id) = self.ids.get(&o) {
            return *id;
        }
        let id = self.obligations.len() as u32;
        self.ids.insert(o.clone(), id);
        self.obligations.push(o);
        id
    }

    fn full_mask(&self) -> u64 {
        if self.eventualities.len() == 64 {
            u64::MAX
        } else {
            (1u64 << self.eventualities.len()) - 1
        }
    }

    /// Successor obligations when `ob` must hold at a position labelled by
    /// `label` (bit i set iff atom i holds), with the acceptance mask of each.
    fn step(&mut self, ob: u32, label: u64) -> Vec<(u32, u64)> {
        if let Some(r) = self.memo.get(&(ob, label)) {
            return r.clone();
        }
        let mut raw = Vec::new();
        let todo: Vec<Nnf> = self.obligations[ob as usize].iter().cloned().collect();
        self.expand(todo, BTreeSet::new(), 0, label, &mut raw);
        let full = self.full_mask();
        let mut out: Vec<(u32, u64)> = raw
            .into_iter()
            .map(|(n, post)| (self.intern(n), full & !post))
            .collect();
        out.sort();
        out.dedup();
        self.memo.insert((ob, label), out.clone());
        out
    }

    fn expand(
        &self,
        mut todo: Vec<Nnf>,
        mut next: Obligation,
        mut postponed: u64,
        label: u64,
        out: &mut Vec<(Obligation, u64)>,
    ) {
        while let Some(f) = todo.pop() {
            match f {
                Nnf::True => {}
                Nnf::False => return,
                Nnf::Lit(a, pos) => {
                    if ((label >> a) & 1 == 1) != pos {
                        return;
                    }
                }
                Nnf::And(a, b) => {
                    todo.push(*a);
                    todo.push(*b);
                }
                Nnf::Or(a, b) => {
                    let mut left = todo.clone();
                    left.push(*a);
                    self.expand(left, next.clone(), postponed, label, out);
                    todo.push(*b);
                }
                Nnf::X(a) => {
                    next.insert(*a);
                }
                Nnf::F(ref a) => {
                    let mut now = todo.clone();
                    now.push((**a).clone());
                    self.expand(now, next.clone(), postponed, label, out);
                    let bit = self
                        .eventualities
                        .iter()
                        .position(|e| *e == f)
                        .expect("collected");
                    postponed |= 1 << bit;
                    next.insert(f);
                }
                Nnf::G(ref a) => {
                    todo.push((**a).clone());
                    next.insert(f.clone());
                }
            }
        }
        out.push((next, postponed));
    }
}

/// Product edge: target node, acceptance mask, graph edge slot (None = stutter).
type PEdge = (u32, u64, Option<u32>);

struct Product {
    nodes: Vec<(u32, u32)>,
    edges: Vec<Vec<PEdge>>,
    parent: Vec<Option<(u32, Option<u32>)>>,
}

fn validate(f: &LtlFormula) -> Result<(), LtlError> {
    let mut evs = Vec::new();
    f.events(&mut evs);
    for e in evs {
        let base = e.strip_prefix("ext_").unwrap_or(&e);
        if !ROW_NAMES.contains(&base) {
            return Err(LtlError::UnknownEventAtom(e));
        }
    }
    Ok(())
}

/// Searches for a path from the initial state satisfying `f`.
/// A lasso (or finite run) and the step index its loop returns to.
type Run = (Trace<GlobalState>, Option<usize>);

fn find_run(graph: &StateGraph, f: &LtlFormula) -> Result<Option<Run>, LtlError> {
    let mut atoms = Vec::new();
    let root = to_nnf(f, false, &mut atoms);
    if atoms.len() > 64 {
        return Err(LtlError::TooLarge);
    }
    let mut eventualities = Vec::new();
    collect_eventualities(&root, &mut eventualities);
    if eventualities.len() > 64 {
        return Err(LtlError::TooLarge);
    }

    let pred_mask: Vec<u64> = graph
        .states
        .iter()
        .map(|s| {
            atoms.iter().enumerate().fold(0u64, |m, (i, a)| match a {
                Atom::Pred(p) if p.eval(s) => m | (1 << i),
                _ => m,
            })
        })
        .collect();
    let event_mask = |name: &str| {
        atoms.iter().enumerate().fold(0u64, |m, (i, a)| match a {
            Atom::Event(e) if e == name => m | (1 << i),
            _ => m,
        })
    };

    let mut tab = Tableau {
        eventualities,
        obligations: Vec::new(),
        ids: HashMap::new(),
        memo: HashMap::new(),
    };
    let init_ob = tab.intern(BTreeSet::from([root]));
    let full = tab.full_mask();

    // Product construction in BFS order, so node ids are ordered by distance.
    let mut p = Product {
        nodes: vec![(0, init_ob)],
        edges: vec![Vec::new()],
        parent: vec![None],
    };
    let mut index: HashMap<(u32, u32), u32> = HashMap::from([((0, init_ob), 0)]);
    let mut queue = VecDeque::from([0u32]);
    while let Some(id) = queue.pop_front() {
        let (n, ob) = p.nodes[id as usize];
        let mut moves: Vec<(u32, u64, Option<u32>)> = Vec::new();
        let out = &graph.edges[n as usize];
        if out.is_empty() {
            moves.push((n, pred_mask[n as usize], None));
        } else {
            for (slot, (inst, t)) in out.iter().enumerate() {
                moves.push((
                    *t as u32,
                    pred_mask[n as usize] | event_mask(&inst.event),
                    Some(slot as u32),
                ));
            }
        }
        let mut pedges = Vec::new();
        for (t, label, slot) in moves {
            for (next_ob, acc) in tab.step(ob, label) {
                let key = (t, next_ob);
                let tid = match index.get(&key) {
                    Some(x) => *x,
                    None => {
                        let x = p.nodes.len() as u32;
                        index.insert(key, x);
                        p.nodes.push(key);
                        p.edges.push(Vec::new());
                        p.parent.push(Some((id, slot)));
                        queue.push_back(x);
                        x
                    }
                };
                pedges.push((tid, acc, slot));
            }
        }
        p.edges[id as usize] = pedges;
    }

    let comp = tarjan(&p.edges);
    // Pick the accepting SCC closest to the root.
    let mut best: Option<u32> = None;
    let mut members: HashMap<u32, Vec<u32>> = HashMap::new();
    for (v, c) in comp.iter().enumerate() {
        members.entry(*c).or_default().push(v as u32);
    }
    for (c, vs) in &members {
        let mut acc = 0u64;
        let mut has_edge = false;
        for v in vs {
            for (t, a, _) in &p.edges[*v as usize] {
                if comp[*t as usize] == *c {
                    has_edge = true;
                    acc |= a;
                }
            }
        }
        if has_edge && acc & full == full {
            let entry = *vs.iter().min().unwrap();
            if best.is_none_or(|b| entry < b) {
                best = Some(entry);
            }
        }
    }
    let Some(entry) = best else { return Ok(None) };
    let scc = comp[entry as usize];

    // Prefix: BFS tree path to the entry node.
    let mut prefix: Vec<(u32, Option<u32>)> = Vec::new();
    let mut cur = entry;
    while let Some((par, slot)) = p.parent[cur as usize] {
        prefix.push((par, slot));
        cur = par;
    }
    prefix.reverse();

    // Cycle: visit an edge for each acceptance condition, then return.
    let mut cycle: Vec<(u32, Option<u32>)> = Vec::new();
    let mut at = entry;
    let mut covered = 0u64;
    for bit in 0..tab.eventualities.len() {
        if covered & (1 << bit) != 0 {
            continue;
        }
        let (path, last) = scc_path(&p, &comp, scc, at, |v| {
            p.edges[v as usize]
                .iter()
                .any(|(t, a, _)| comp[*t as usize] == scc && a & (1 << bit) != 0)
        });
        for (v, e) in &path {
            covered |= p.edges[*v as usize][*e].1;
            cycle.push((*v, p.edges[*v as usize][*e].2));
        }
        let (t, a, slot) = *p.edges[last as usize]
            .iter()
            .find(|(t, a, _)| comp[*t as usize] == scc && a & (1 << bit) != 0)
            .unwrap();
        covered |= a;
        cycle.push((last, slot));
        at = t;
    }
    // Close the cycle with at least one step, ending at the entry.
    if cycle.is_empty() {
        let (t, _, slot) = *p.edges[at as usize]
            .iter()
            .find(|(t, _, _)| comp[*t as usize] == scc)
            .unwrap();
        cycle.push((at, slot));
        at = t;
    }
    if at != entry {
        let (path, _) = scc_path(&p, &comp, scc, at, |v| v == entry);
        for (v, e) in &path {
            cycle.push((*v, p.edges[*v as usize][*e].2));
        }
    }

    // Map product edges back to graph steps.
    let mut trace = Trace::new(graph.states[0].clone());
    let mut push = |v: u32, slot: Option<u32>| {
        if let Some(s) = slot {
            let n = p.nodes[v as usize].0 as usize;
            let (inst, t) = &graph.edges[n][s as usize];
            trace.steps.push((inst.clone(), graph.states[*t].clone()));
        }
    };
    for (v, slot) in &prefix {
        push(*v, *slot);
    }
    let loop_at = prefix.iter().filter(|(_, s)| s.is_some()).count();
    let real_cycle = cycle.iter().any(|(_, s)| s.is_some());
    for (v, slot) in &cycle {
        push(*v, *slot);
    }
    Ok(Some((trace, real_cycle.then_some(loop_at))))
}

/// Shortest path inside one SCC from `from` to a node satisfying `goal`,
/// as (node, edge index) pairs, plus the goal node reached.
fn scc_path(
    p: &Product,
    comp: &[u32],
    scc: u32,
    from: u32,
    goal: impl Fn(u32) -> bool,
) -> (Vec<(u32, usize)>, u32) {
    if goal(from) {
        return (Vec::new(), from);
    }
    let mut prev: HashMap<u32, (u32, usize)> = HashMap::new();
    let mut queue = VecDeque::from([from]);
    let mut seen = std::collections::HashSet::from([from]);
    while let Some(v) = queue.pop_front() {
        for (i, (t, _, _)) in p.edges[v as usize].iter().enumerate() {
            if comp[*t as usize] != scc || !seen.insert(*t) {
                continue;
            }
            prev.insert(*t, (v, i));
            if goal(*t) {
                let mut path = Vec::new();
                let mut cur = *t;
                while cur != from {
                    let (pv, pe) = prev[&cur];
                    path.push((pv, pe));
                    cur = pv;
                }
                path.reverse();
                return (path, *t);
            }
            queue.push_back(*t);
        }
    }
    unreachable!("goal lies in the same strongly connected component")
}

/// Iterative Tarjan; returns the component id of every node.
fn tarjan(edges: &[Vec<PEdge>]) -> Vec<u32> {
    const UNSEEN: u32 = u32::MAX;
    let n = edges.len();
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0u32; n];
    let mut on_stack = vec![false; n];
    let mut comp = vec![UNSEEN; n];
    let mut stack: Vec<u32> = Vec::new();
    let mut counter = 0u32;
    let mut ncomp = 0u32;
    for root in 0..n as u32 {
        if index[root as usize] != UNSEEN {
            continue;
        }
        let mut call: Vec<(u32, usize)> = vec![(root, 0)];
        index[root as usize] = counter;
        low[root as usize] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root as usize] = true;
        while let Some(&mut (v, ref mut i)) = call.last_mut() {
            if *i < edges[v as usize].len() {
                let w = edges[v as usize][*i].0;
                *i += 1;
                if index[w as usize] == UNSEEN {
                    index[w as usize] = counter;
                    low[w as usize] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w as usize] = true;
                    call.push((w, 0));
                } else if on_stack[w as usize] {
                    low[v as usize] = low[v as usize].min(index[w as usize]);
                }
            } else {
                call.pop();
                if let Some(&(u, _)) = call.last() {
                    low[u as usize] = low[u as usize].min(low[v as usize]);
                }
                if low[v as usize] == index[v as usize] {
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w as usize] = false;
                        comp[w as usize] = ncomp;
                        if w == v {
                            break;
                        }
                    }
                    ncomp += 1;
                }
            }
        }
    }
    comp
}

/// Checks `f` on every maximal path of `graph` from its initial state.
pub fn check_ltl(graph: &StateGraph, f: &LtlFormula) -> Result<Verdict, LtlError> {
    validate(f)?;
    if !graph.is_complete() {
        return Ok(Verdict::BoundExceeded);
    }
    let negated = LtlFormula::Not(Box::new(f.clone()));
    Ok(match find_run(graph, &negated)? {
        None => Verdict::Holds,
        Some((trace, loop_start)) => Verdict::Fails(Box::new(Counterexample {
            property: f.to_string(),
            trace,
            loop_start,
        })),
    })
}

/// A path satisfying `f`, if one exists.
pub fn ltl_witness(graph: &StateGraph, f: &LtlFormula) -> Result<Option<Counterexample>, LtlError> {
    validate(f)?;
    Ok(
        find_run(graph, f)?.map(|(trace, loop_start)| Counterexample {
            property: f.to_string(),
            trace,
            loop_start,
        }),
    )
}
