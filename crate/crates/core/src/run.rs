//! Run orchestration behind the command-line tool.
//!
//! A run loads a scenario, resolves the options against the scenario's
//! `[run]` table, does the work of one mode and writes `report.json` plus
//! one trace file per counterexample or witness into the output directory.
//! Nothing in the output depends on the worker count or the clock.

use std::collections::HashMap;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::checker::{
    check_invariants, check_ltl, explore, ltl_witness, parse_ltl_file, safety_suite,
    Counterexample, ExploreConfig, ExploreError, LtlError, Property, StateGraph, Verdict,
};
use crate::decomposer::{check_recomposition, decompose, Bounds};
use crate::events::{RefinementLevel, System};
use crate::kernel::{EventInstance, Trace};
use crate::refinement::check_refinement_systems;
use crate::scenario::{PolicyName, Scenario, ScenarioError};
use crate::scheduler::{Choice, Picker, SchedulerError, SchedulingPolicy};
use crate::state::GlobalState;
use crate::trace::{write_trace, TraceError, TraceHeader, FORMAT};

/// Properties checked when no `--ltl` file is given.
pub const DEFAULT_PROPERTIES: &str = include_str!("../scenarios/table.ltl");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Simulate,
    Explore,
    Check,
    RefineCheck,
    DecomposeCheck,
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "simulate" => Mode::Simulate,
            "explore" => Mode::Explore,
            "check" => Mode::Check,
            "refine-check" => Mode::RefineCheck,
            "decompose-check" => Mode::DecomposeCheck,
            _ => return Err(format!("unknown mode `{s}`")),
        })
    }
}

/// Command-line options; `None` falls back to the scenario's `[run]` table.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub mode: Mode,
    pub scenario: PathBuf,
    pub level: Option<RefinementLevel>,
    pub depth: Option<usize>,
    pub branch: Option<usize>,
    pub policy: Option<PolicyName>,
    pub seed: Option<u64>,
    pub ltl: Option<PathBuf>,
    pub out: PathBuf,
    pub workers: usize,
    pub component_depth: Option<usize>,
    /// Embed full states in trace files.
    pub verbose: bool,
}

impl RunOptions {
    pub fn new(mode: Mode, scenario: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        RunOptions {
            mode,
            scenario: scenario.into(),
            level: None,
            depth: None,
            branch: None,
            policy: None,
            seed: None,
            ltl: None,
            out: out.into(),
            workers: 1,
            component_depth: None,
            verbose: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("{path}:{line}: {err}")]
    Ltl {
        path: String,
        line: usize,
        err: LtlError,
    },
    #[error("{0}")]
    Property(#[from] LtlError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Explore(#[from] ExploreError),
    #[error(transparent)]
    Scheduler(#[from] SchedulerError),
}

impl RunError {
    pub const EXIT_CODE: i32 = 2;
}

pub fn parse_workers(value: Option<&str>) -> Result<usize, RunError> {
    match value {
        None => Ok(crate::checker::explore::workers_from_env()),
        Some(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(RunError::Usage(format!(
                "{} must be a positive integer, got `{v}`",
                crate::checker::explore::WORKERS_ENV
            ))),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GraphSummary {
    pub nodes: usize,
    pub edges: usize,
    pub max_depth: usize,
    pub deadlocks: usize,
    pub complete: bool,
    /// Digest over the sorted edge set, for comparing runs.
    pub edge_digest: String,
}

impl GraphSummary {
    pub fn of(g: &StateGraph) -> Self {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for (a, inst, b) in g.edge_set() {
            h.update(format!("{a} {inst} {b}\n"));
        }
        GraphSummary {
            nodes: g.node_count(),
            edges: g.edge_count(),
            max_depth: g.max_depth(),
            deadlocks: g.deadlocks().len(),
            complete: g.is_complete(),
            edge_digest: h.finalize()[..8]
                .iter()
                .map(|b| format!("{b:02x}"))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerdictEntry {
    pub name: String,
    pub verdict: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    /// Counterexample trace file, relative to the output directory.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub report_only: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub mode: Mode,
    pub scenario: String,
    pub level: RefinementLevel,
    pub policy: String,
    pub seed: u64,
    pub depth: usize,
    pub branch: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub graph: Option<GraphSummary>,
    pub verdicts: Vec<VerdictEntry>,
}

impl Report {
    /// 1 if any checked (not report-only) property fails, else 0.
    pub fn exit_code(&self) -> i32 {
        i32::from(
            self.verdicts
                .iter()
                .any(|v| !v.report_only && v.verdict == "fails"),
        )
    }
}

pub fn policy_name(p: PolicyName) -> &'static str {
    match p {
        PolicyName::Exhaustive => "exhaustive",
        PolicyName::Seeded => "seeded",
        PolicyName::Priority => "priority",
    }
}

pub fn scheduling_policy(p: PolicyName, seed: u64) -> SchedulingPolicy {
    match p {
        PolicyName::Exhaustive => SchedulingPolicy::Exhaustive,
        PolicyName::Seeded => SchedulingPolicy::SeededRandom(seed),
        PolicyName::Priority => SchedulingPolicy::PriorityThenSeed(seed),
    }
}

/// Runs one path of at most `depth` steps. The exhaustive policy takes the
/// smallest enabled instance. Stops early at a deadlock, or when `stop_on_repeat`
/// is set and a state recurs.
pub fn simulate(
    sys: &System,
    initial: &GlobalState,
    policy: SchedulingPolicy,
    depth: usize,
    stop_on_repeat: bool,
) -> Result<Trace<GlobalState>, SchedulerError> {
    let mut picker = Picker::new(policy);
    let mut trace = Trace::new(initial.clone());
    let mut seen = std::collections::HashSet::new();
    seen.insert(initial.clone());
    while trace.len() < depth {
        let cur = trace.last_state().clone();
        let enabled = sys.enabled(&cur);
        if enabled.is_empty() {
            break;
        }
        let inst = match picker.pick(&enabled, &cur)? {
            Choice::Take(i) => i,
            Choice::Branch => enabled.iter().min().cloned().unwrap(),
        };
        let next = sys.apply(&cur, &inst).expect("picked instance is enabled");
        let repeat = !seen.insert(next.clone());
        trace.steps.push((inst, next));
        if repeat && stop_on_repeat {
            break;
        }
    }
    Ok(trace)
}

/// The graph a policy explores: the full graph for the exhaustive policy,
/// otherwise the single path the policy schedules, closed into a lasso when
/// a state recurs.
pub fn policy_graph(
    sys: &System,
    initial: &GlobalState,
    policy: SchedulingPolicy,
    cfg: ExploreConfig,
) -> Result<StateGraph, RunError> {
    if policy == SchedulingPolicy::Exhaustive {
        return Ok(explore(sys, initial, cfg)?);
    }
    let trace = simulate(sys, initial, policy, cfg.depth, true)?;
    Ok(path_graph(sys, &trace))
}

fn path_graph(sys: &System, trace: &Trace<GlobalState>) -> StateGraph {
    let mut g = StateGraph {
        states: vec![trace.initial.clone()],
        index: HashMap::from([(trace.initial.clone(), 0)]),
        edges: vec![Vec::new()],
        parent: vec![None],
        depth: vec![0],
        truncated: Default::default(),
    };
    let mut cur = 0;
    for (inst, s) in &trace.steps {
        if let Some(&n) = g.index.get(s) {
            g.edges[cur].push((inst.clone(), n));
            return g;
        }
        let n = g.states.len();
        g.states.push(s.clone());
        g.index.insert(s.clone(), n);
        g.edges.push(Vec::new());
        g.edges[cur].push((inst.clone(), n));
        g.parent.push(Some((cur, inst.clone())));
        g.depth.push(g.depth[cur] + 1);
        cur = n;
    }
    if !sys.enabled(&g.states[cur]).is_empty() {
        g.truncated.insert(cur);
    }
    g
}

fn load_properties(path: Option<&Path>) -> Result<Vec<Property>, RunError> {
    let (text, name) = match path {
        Some(p) => (fs::read_to_string(p)?, p.display().to_string()),
        None => (DEFAULT_PROPERTIES.to_string(), "<builtin>".to_string()),
    };
    parse_ltl_file(&text).map_err(|(line, err)| RunError::Ltl {
        path: name,
        line,
        err,
    })
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

struct Ctx<'a> {
    scenario: &'a Scenario,
    level: RefinementLevel,
    policy: PolicyName,
    seed: u64,
    out: &'a Path,
    verbose: bool,
}

impl Ctx<'_> {
    fn write(
        &self,
        file: &str,
        label: &str,
        trace: &Trace<GlobalState>,
        loop_start: Option<usize>,
    ) -> Result<String, RunError> {
        let header = TraceHeader {
            format: FORMAT.into(),
            scenario: self.scenario.name.clone(),
            level: self.level,
            policy: policy_name(self.policy).into(),
            seed: self.seed,
            label: label.into(),
            loop_start,
            initial: trace.initial.digest(),
        };
        let f = fs::File::create(self.out.join(file))?;
        write_trace(BufWriter::new(f), &header, trace, self.verbose)?;
        Ok(file.to_string())
    }

    fn entry(&self, name: &str, v: &Verdict) -> Result<VerdictEntry, RunError> {
        let (detail, counterexample) = match v.counterexample() {
            Some(c) => {
                let file = self.write(
                    &format!("{}.cex.jsonl", file_stem(name)),
                    &c.property,
                    &c.trace,
                    c.loop_start,
                )?;
                (Some(c.property.clone()), Some(file))
            }
            None => (None, None),
        };
        Ok(VerdictEntry {
            name: name.to_string(),
            verdict: v.label_short(),
            detail,
            counterexample,
            witness: None,
            report_only: false,
        })
    }
}

trait ShortLabel {
    fn label_short(&self) -> &'static str;
}

impl ShortLabel for Verdict {
    fn label_short(&self) -> &'static str {
        match self {
            Verdict::Holds => "holds",
            Verdict::Fails(_) => "fails",
            Verdict::BoundExceeded => "bound-exceeded",
        }
    }
}

/// Evaluates the safety suite on the states of one path.
fn path_safety(sys: &System, trace: &Trace<GlobalState>) -> Vec<(String, Verdict)> {
    safety_suite(&sys.model)
        .into_iter()
        .map(|inv| {
            let states = std::iter::once(&trace.initial).chain(trace.steps.iter().map(|(_, s)| s));
            let v = match states.enumerate().find(|(_, s)| !(inv.predicate)(s)) {
                None => Verdict::Holds,
                Some((i, _)) => Verdict::Fails(Box::new(Counterexample {
                    property: inv.name.clone(),
                    trace: Trace {
                        initial: trace.initial.clone(),
                        steps: trace.steps[..i].to_vec(),
                    },
                    loop_start: None,
                })),
            };
            (inv.name, v)
        })
        .collect()
}

pub fn run(opts: &RunOptions) -> Result<Report, RunError> {
    let scenario = Scenario::load(&opts.scenario)?;
    let level = opts.level.unwrap_or(scenario.run.level);
    let depth = opts.depth.unwrap_or(scenario.run.depth);
    let branch = opts.branch.unwrap_or(scenario.run.branch);
    let policy = opts.policy.unwrap_or(scenario.run.policy);
    let seed = opts.seed.unwrap_or(scenario.run.seed);
    if opts.mode == Mode::RefineCheck && level == RefinementLevel::L0 {
        return Err(RunError::Usage(
            "refine-check needs --level L1, L2 or L3".into(),
        ));
    }
    let properties = if opts.mode == Mode::Check {
        load_properties(opts.ltl.as_deref())?
    } else {
        Vec::new()
    };
    fs::create_dir_all(&opts.out)?;

    let model = scenario.model(level);
    let sys = System::new(&model, level);
    let init = scenario.initial_state(level);
    let cfg = ExploreConfig {
        depth,
        branch,
        workers: opts.workers,
    };
    let sched = scheduling_policy(policy, seed);
    let ctx = Ctx {
        scenario: &scenario,
        level,
        policy,
        seed,
        out: &opts.out,
        verbose: opts.verbose,
    };
    let mut report = Report {
        mode: opts.mode,
        scenario: scenario.name.clone(),
        level,
        policy: policy_name(policy).into(),
        seed,
        depth,
        branch,
        graph: None,
        verdicts: Vec::new(),
    };

    match opts.mode {
        Mode::Simulate => {
            let trace = simulate(&sys, &init, sched, depth, false)?;
            ctx.write("trace.jsonl", "simulation", &trace, None)?;
            for (name, v) in path_safety(&sys, &trace) {
                report.verdicts.push(ctx.entry(&name, &v)?);
            }
        }
        Mode::Explore => {
            let g = policy_graph(&sys, &init, sched, cfg)?;
            report.graph = Some(GraphSummary::of(&g));
        }
        Mode::Check => {
            let g = policy_graph(&sys, &init, sched, cfg)?;
            report.graph = Some(GraphSummary::of(&g));
            for inv in safety_suite(&model) {
                let v = check_invariants(&g, std::slice::from_ref(&inv));
                report.verdicts.push(ctx.entry(&inv.name, &v)?);
            }
            for p in &properties {
                let v = check_ltl(&g, &p.formula)?;
                let mut e = ctx.entry(&p.name, &v)?;
                if p.report_only {
                    e.report_only = true;
                    if let Some(w) = ltl_witness(&g, &p.formula)? {
                        let file = format!("{}.witness.jsonl", file_stem(&p.name));
                        e.witness = Some(ctx.write(&file, &w.property, &w.trace, w.loop_start)?);
                    }
                }
                report.verdicts.push(e);
            }
        }
        Mode::RefineCheck => {
            let to = level.below().expect("checked above");
            let abs = System::new(&scenario.model(to), to);
            let v =
                check_refinement_systems(&sys, &abs, &init, &scenario.initial_state(to), depth)?;
            report
                .verdicts
                .push(ctx.entry(&format!("refines_{level}_{to}"), &v)?);
        }
        Mode::DecomposeCheck => {
            let bounds = Bounds {
                global: depth,
                component: opts
                    .component_depth
                    .unwrap_or(depth.min(Bounds::DEFAULT_COMPONENT_DEPTH)),
            };
            let (ctl, sw) = decompose(level);
            fs::write(opts.out.join("controller.toml"), ctl.describe())?;
            fs::write(opts.out.join("switches.toml"), sw.describe())?;
            let r = check_recomposition(level, &scenario, bounds)?;
            report
                .verdicts
                .push(ctx.entry("recomposition", &r.product)?);
            report.verdicts.push(ctx.entry("soundness", &r.soundness)?);
            for c in &r.components {
                let role = format!("{:?}", c.role).to_lowercase();
                report
                    .verdicts
                    .push(ctx.entry(&format!("{role}.frame"), &c.frame)?);
                for (name, v) in &c.safety {
                    report
                        .verdicts
                        .push(ctx.entry(&format!("{role}.{name}"), v)?);
                }
            }
        }
    }

    let json = serde_json::to_string_pretty(&report).expect("report serialises");
    fs::write(opts.out.join("report.json"), json + "\n")?;
    Ok(report)
}

/// One line per verdict, for the terminal.
pub fn summary(report: &Report) -> String {
    let mut out = format!(
        "{} {} at {} ({} policy, seed {}, depth {})\n",
        serde_json::to_value(report.mode).unwrap().as_str().unwrap(),
        report.scenario,
        report.level,
        report.policy,
        report.seed,
        report.depth
    );
    if let Some(g) = &report.graph {
        out += &format!(
            "graph: {} nodes, {} edges, depth {}, {} deadlocks, {}\n",
            g.nodes,
            g.edges,
            g.max_depth,
            g.deadlocks,
            if g.complete { "complete" } else { "truncated" }
        );
    }
    for v in &report.verdicts {
        let tag = if v.report_only { " (report)" } else { "" };
        out += &format!("{:<24} {}{tag}", v.name, v.verdict);
        if let Some(f) = &v.counterexample {
            out += &format!("  counterexample: {f}");
        }
        if let Some(f) = &v.witness {
            out += &format!("  witness: {f}");
        }
        out += "\n";
    }
    out
}

/// Used by tests to build an instance from its printed form.
pub fn parse_instance(text: &str) -> Option<EventInstance> {
    let (name, rest) = text.split_once('(')?;
    let args = rest.strip_suffix(')')?;
    let args = args
        .split(',')
        .map(str::trim)
        .filter(|a| !a.is_empty())
        .map(|a| a.parse().ok())
        .collect::<Option<Vec<_>>>()?;
    Some(EventInstance::new(name.trim(), args))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_parse() {
        assert_eq!("refine-check".parse::<Mode>().unwrap(), Mode::RefineCheck);
        assert!("verify".parse::<Mode>().is_err());
    }

    #[test]
    fn workers_validation() {
        assert_eq!(parse_workers(Some("3")).unwrap(), 3);
        assert!(parse_workers(Some("0")).is_err());
        assert!(parse_workers(Some("many")).is_err());
    }

    #[test]
    fn builtin_properties() {
        let ps = load_properties(None).unwrap();
        let names: Vec<_> = ps
            .iter()
            .map(|p| (p.name.as_str(), p.report_only))
            .collect();
        assert_eq!(
            names,
            [
                ("LP_OKstatus", false),
                ("LP_deliv", false),
                ("LP_OKMach", true)
            ]
        );
    }

    #[test]
    fn instance_text_round_trip() {
        let i = parse_instance("sw_sendPckt2sw(s1, p1, s2)").unwrap();
        assert_eq!(i.to_string(), "sw_sendPckt2sw(s1, p1, s2)");
        assert_eq!(parse_instance("ctl_havePacket()").unwrap().args.len(), 0);
        assert!(parse_instance("nope").is_none());
    }
}
