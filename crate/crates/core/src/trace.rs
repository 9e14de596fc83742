//! JSON-lines trace files.
//!
//! The first line is a header; every following line is one step with the
//! event, its arguments and the digest of the post-state. Verbose traces also
//! embed the full post-state. Files are a pure function of the trace, so
//! identical runs produce identical bytes.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::{RefinementLevel, System};
use crate::kernel::{Arg, EventInstance, Trace};
use crate::state::GlobalState;

pub const FORMAT: &str = "sdn-evb-trace/1";

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("step {step}: {msg}")]
    Replay { step: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub format: String,
    pub scenario: String,
    pub level: RefinementLevel,
    pub policy: String,
    pub seed: u64,
    /// What the trace shows, e.g. a property name or "simulation".
    pub label: String,
    /// Step index the lasso loops back to, for liveness counterexamples.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loop_start: Option<usize>,
    pub initial: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub event: String,
    pub args: Vec<String>,
    pub digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<serde_json::Value>,
}

impl StepRecord {
    pub fn instance(&self) -> Result<EventInstance, String> {
        let args = self
            .args
            .iter()
            .map(|a| a.parse::<Arg>())
            .collect::<Result<Vec<_>, _>>()?;
        Ok(EventInstance::new(self.event.clone(), args))
    }
}

pub fn records(trace: &Trace<GlobalState>, verbose: bool) -> Vec<StepRecord> {
    trace
        .steps
        .iter()
        .enumerate()
        .map(|(i, (inst, s))| StepRecord {
            step: i + 1,
            event: inst.event.clone(),
            args: inst.args.iter().map(Arg::to_string).collect(),
            digest: s.digest(),
            state: verbose.then(|| serde_json::to_value(s).expect("state serialises")),
        })
        .collect()
}

pub fn write_trace<W: Write>(
    mut w: W,
    header: &TraceHeader,
    trace: &Trace<GlobalState>,
    verbose: bool,
) -> Result<(), TraceError> {
    serde_json::to_writer(&mut w, header).map_err(std::io::Error::from)?;
    writeln!(w)?;
    for r in records(trace, verbose) {
        serde_json::to_writer(&mut w, &r).map_err(std::io::Error::from)?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace<R: BufRead>(r: R) -> Result<(TraceHeader, Vec<StepRecord>), TraceError> {
    let mut lines = r
        .lines()
        .enumerate()
        .filter(|(_, l)| !matches!(l, Ok(l) if l.trim().is_empty()));
    let Some((_, first)) = lines.next() else {
        return Err(TraceError::Malformed {
            line: 1,
            msg: "empty trace file".into(),
        });
    };
    let header: TraceHeader = serde_json::from_str(&first?).map_err(|e| TraceError::Malformed {
        line: 1,
        msg: e.to_string(),
    })?;
    if header.format != FORMAT {
        return Err(TraceError::Malformed {
            line: 1,
            msg: format!("unknown format `{}`", header.format),
        });
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let rec: StepRecord = serde_json::from_str(&line?).map_err(|e| TraceError::Malformed {
            line: i + 1,
            msg: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok((header, out))
}

/// Re-executes recorded steps from `initial`, checking every step is enabled
/// and lands on the recorded digest.
pub fn replay(
    sys: &System,
    initial: &GlobalState,
    header: &TraceHeader,
    steps: &[StepRecord],
) -> Result<Trace<GlobalState>, TraceError> {
    if initial.digest() != header.initial {
        return Err(TraceError::Replay {
            step: 0,
            msg: "initial state digest differs".into(),
        });
    }
    let mut trace = Trace::new(initial.clone());
    for (i, rec) in steps.iter().enumerate() {
        let fail = |msg: String| TraceError::Replay { step: i + 1, msg };
        if rec.step != i + 1 {
            return Err(fail(format!("expected step {}, found {}", i + 1, rec.step)));
        }
        let inst = rec.instance().map_err(fail)?;
        let cur = trace.last_state().clone();
        if !sys
            .catalogue
            .is_enabled(&sys.model, &cur, &inst)
            .map_err(|e| fail(e.to_string()))?
        {
            return Err(fail(format!("{inst} is not enabled")));
        }
        let next = sys.apply(&cur, &inst).map_err(|e| fail(e.to_string()))?;
        if next.digest() != rec.digest {
            return Err(fail(format!(
                "{inst} reached {} instead of {}",
                next.digest(),
                rec.digest
            )));
        }
        trace.steps.push((inst, next));
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arg_strings_round_trip() {
        for s in ["s1", "p2", "m13", "e4"] {
            assert_eq!(s.parse::<Arg>().unwrap().to_string(), s);
        }
        assert!("x1".parse::<Arg>().is_err());
        assert!("port1".parse::<Arg>().is_err());
    }

    #[test]
    fn header_only_file() {
        let h = TraceHeader {
            format: FORMAT.into(),
            scenario: "t".into(),
            level: RefinementLevel::L0,
            policy: "exhaustive".into(),
            seed: 0,
            label: "simulation".into(),
            loop_start: None,
            initial: GlobalState::default().digest(),
        };
        let mut buf = Vec::new();
        write_trace(&mut buf, &h, &Trace::new(GlobalState::default()), false).unwrap();
        let (h2, steps) = read_trace(&buf[..]).unwrap();
        assert_eq!(h2, h);
        assert!(steps.is_empty());
        assert!(read_trace(&b""[..]).is_err());
    }
}
