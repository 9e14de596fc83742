//! State-graph exploration, safety checking and LTL checking.

pub mod explore;
pub mod invariants;
pub mod ltl;

pub use explore::{explore, ExploreConfig, ExploreError, StateGraph};
pub use invariants::{check_invariants, safety_suite, Counterexample, InvariantDef, Verdict};
pub use ltl::{check_ltl, ltl_witness, parse_ltl, parse_ltl_file, LtlError, LtlFormula, Property};
