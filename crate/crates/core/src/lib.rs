//! Discrete-event simulation of an object-oriented database storage
//! subsystem under three clustering policies: Cactis, ORION and CK.

pub mod clustering;
pub mod config;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod model;
pub mod storage;
pub mod workload;

pub use clustering::{make_policy, ClusteringPolicy};
pub use config::{parse_config, PolicyKind, SimConfig, SplitPolicy, FORMAT_TAG};
pub use engine::{run_simulation, Simulation};
pub use error::{Result, SimError};
pub use experiment::{run_experiment, ExperimentSpec, RunResult, SweepKind};
pub use metrics::{aggregate, MetricsReport, Summary};
pub use model::{ClassId, ObjectGraph, Oid, RelKind};
pub use storage::{io_time_ms, IoCause, IoCounters, PageId, PageStore};
pub use workload::TransactionKind;
