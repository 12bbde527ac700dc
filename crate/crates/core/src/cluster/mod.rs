//! Token-based cluster scheduling compiled into closed tandems.

pub mod compile;
pub mod metrics;
pub mod spec;

pub use compile::{compile, CompiledTandem, TokenKind};
pub use metrics::{
    metrics, protocol_trace, protocol_trace_from, type_served, ClusterMetrics, Meaning, TraceStep,
};
pub use spec::{ClusterMode, ClusterSpec, DagVertex, Group, JobType, Machine, Slots, TokenDag};
