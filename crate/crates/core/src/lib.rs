//! Executable guarded-event model of an OpenFlow-style software-defined network.
//!
//! The crate explores the model's state graph, checks safety invariants and
//! LTL properties, and verifies refinement between levels and recomposition
//! of the controller/switch decomposition.

pub mod checker;
pub mod decomposer;
pub mod events;
pub mod ids;
pub mod kernel;
pub mod multiset;
pub mod refinement;
pub mod run;
pub mod scenario;
pub mod scheduler;
pub mod state;
pub mod trace;

pub use events::{event_catalog, RefinementLevel, System};
pub use kernel::{Arg, Catalogue, EventDef, EventInstance, Trace};
pub use state::{GlobalState, Model};
