//! Closed single queues and closed two-queue tandems.

pub mod classes;
pub mod isomorphic;
pub mod placement;
pub mod single;
pub mod tandem;

use std::collections::{HashMap, VecDeque};
use std::fmt::Display;
use std::hash::Hash;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

pub use classes::{communicating_classes, ClassPartition};
pub use isomorphic::{isomorphic_model, IsomorphicModel};
pub use placement::{enumerate_placement_orders, PlacementOrder};
pub use single::{
    closed_step, enumerate_adhering, stationary_closed, ClosedDistribution, ClosedQueue,
};
pub use tandem::{
    enumerate_sigma, stationary_tandem, tandem_step, QueueIndex, TandemDistribution, TandemNetwork,
    TandemState,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PartitionSummary {
    pub states: usize,
    pub components: usize,
    pub closed_components: usize,
    pub component_sizes: Vec<usize>,
    pub transient_states: usize,
}

impl PartitionSummary {
    fn of(p: &ClassPartition) -> Self {
        PartitionSummary {
            states: p.component_of.len(),
            components: p.components.len(),
            closed_components: p.n_closed(),
            component_sizes: p.components.iter().map(Vec::len).collect(),
            transient_states: p.transient_states().len(),
        }
    }
}

/// Result of the communicating-class analysis of an enumerated state space.
pub(crate) struct SpaceAnalysis {
    pub partition: ClassPartition,
    /// Indices of the states in the closed class that is reported.
    pub support: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Computes communicating classes over `states` and picks the closed class
/// containing `initial` (or the first closed class reachable from it).
pub(crate) fn analyze_space<S>(
    states: &[S],
    initial: &S,
    succ: impl Fn(&S) -> Result<Vec<S>> + Sync,
) -> Result<SpaceAnalysis>
where
    S: Hash + Eq + Clone + Display + Sync + Send,
{
    let index: HashMap<&S, usize> = states.iter().enumerate().map(|(k, s)| (s, k)).collect();
    let succ_lists: Vec<Vec<usize>> = states
        .par_iter()
        .map(|s| {
            succ(s)?
                .into_iter()
                .map(|t| {
                    index.get(&t).copied().ok_or_else(|| {
                        Error::Structure(format!(
                            "transition from {s} to {t} leaves the enumerated state space"
                        ))
                    })
                })
                .collect::<Result<Vec<usize>>>()
        })
        .collect::<Result<_>>()?;
    let partition = communicating_classes(&succ_lists);
    let start = *index.get(initial).ok_or_else(|| {
        Error::Usage(format!(
            "initial state {initial} is not in the enumerated state space"
        ))
    })?;
    let mut warnings = Vec::new();
    let mut comp = partition.component_of[start];
    if !partition.closed[comp] {
        warnings.push(format!("initial state {initial} is transient"));
        let mut seen = vec![false; states.len()];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(s) = queue.pop_front() {
            if partition.closed[partition.component_of[s]] {
                comp = partition.component_of[s];
                break;
            }
            for &t in &succ_lists[s] {
                if !seen[t] {
                    seen[t] = true;
                    queue.push_back(t);
                }
            }
        }
    }
    if partition.n_closed() > 1 {
        warnings.push(format!(
            "state space splits into {} closed communicating classes; the distribution is restricted to the class reached from the initial state and need not be unique",
            partition.n_closed()
        ));
    }
    let transient = partition.transient_states().len();
    if transient > 0 {
        warnings.push(format!("{transient} transient states"));
    }
    let support = partition.components[comp].clone();
    Ok(SpaceAnalysis {
        partition,
        support,
        warnings,
    })
}

/// Normalizes log-weights over `support` in a numerically safe way.
pub(crate) fn normalize_logs(logs: &[f64]) -> Vec<f64> {
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logs.iter().map(|w| (w - max).exp()).sum();
    logs.iter().map(|w| (w - max).exp() / sum).collect()
}
