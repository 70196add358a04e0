//! Discrete-event simulation of serial batch production lines with
//! per-activity energy accounting, plus the analytics built on top of it:
//! energy value-stream maps, OEEE/PCE metrics, bottleneck ranking and
//! what-if scenario comparison.
//!
//! Replications use independent counter-based random streams, so a
//! campaign is bit-identical whether it runs sequentially or on the
//! rayon pool (`parallel` feature, on by default).

pub mod energy;
pub mod evsm;
pub mod line;
pub mod metrics;
pub mod report;
pub mod scenario;
pub mod sim;

pub use energy::{build_ledger, ActivityRecord, EnergyLedger, TimeClass};
pub use evsm::{build_evsm, render_dot, render_text, EvsmDocument};
pub use line::{load_config, load_config_file, validate, Dist, LineConfig, Station, ValueClass};
pub use metrics::{compute_oee, compute_oeee, FactorMode, OeeeFactors, StatSummary};
pub use report::{build_report, RunReport};
pub use scenario::{apply_delta, compare, load_delta, load_delta_file, ScenarioDelta};
pub use sim::{run_replications, run_replications_sequential, ReplicationResult, SimTime};
