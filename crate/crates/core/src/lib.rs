//! Deterministic simulator for chiplet-based tile grids running task-parallel
//! sparse workloads.
//!
//! The simulated machine is a 2D grid of tiles spread across one or more
//! compute dies. Each tile owns a slice of every dataset array (a partitioned
//! global address space), executes task invocations that arrive in per-type
//! input queues, and talks to other tiles over a folded-torus/mesh NoC with a
//! second, one-router-per-die network layered on top. SRAM per tile serves as
//! scratchpad and/or a direct-mapped cache backed by a private DRAM vault
//! slice. Every run produces cycle counts plus energy, cost, and throughput
//! reports derived from event counters.

pub mod cost;
pub mod dataset;
pub mod driver;
pub mod energy;
pub mod execution;
pub mod memhier;
pub mod metrics;
pub mod noc;
pub mod report;
pub mod sysconfig;
pub mod workloads;

pub use dataset::{CsrDataset, PgasLayout};
pub use execution::{RunResult, Simulation};
pub use sysconfig::{SystemConfig, ValidatedSystem};
pub use workloads::App;
