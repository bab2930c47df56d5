//! Scheduling and offloading toolkit for heterogeneous edge computers.
//!
//! * [`workload`]: ETC tables, random instances, task graphs.
//! * [`sched`]: Min-Min, Max-Min, Diff-Min and a brute-force oracle.
//! * [`dag`]: layered scheduling of dependent tasks.
//! * [`offload`]: dwell-time geometry, local/remote cost model and node selection.

pub mod dag;
pub mod offload;
pub mod sched;
pub mod workload;

pub use sched::{Algorithm, Schedule, TiePolicy};
pub use workload::{EtcTable, GenSpec, TaskGraph, ValueKind};
