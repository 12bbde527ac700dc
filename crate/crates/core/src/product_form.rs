//! Balance function, truncated stationary distributions, partial-balance
//! checks, stability and per-class flow rates of open queues.

use std::collections::HashMap;

use serde::Serialize;

use crate::dynamics::{complete, predecessors};
use crate::error::{Error, Result};
use crate::model::{ClassId, Macrostate, PandsQueue, State};
use crate::rate::RateModel;

/// Default cap on enumerated states.
pub const DEFAULT_STATE_BUDGET: usize = 2_000_000;

/// `Φ(c)`, kept in log space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalanceWeight {
    pub log: f64,
}

impl BalanceWeight {
    pub fn value(self) -> f64 {
        self.log.exp()
    }
}

/// `ln Φ(c) = −Σ_p ln μ(c_1..p)` for any rate model.
pub fn log_balance(rate_fn: &impl RateModel, c: &[ClassId]) -> Result<f64> {
    let prefix = rate_fn.prefix_rates(c)?;
    let mut log = 0.0;
    for (p, &r) in prefix.iter().enumerate().skip(1) {
        if r <= 0.0 {
            return Err(Error::Usage(format!(
                "μ vanishes on the non-empty prefix {}",
                State::new(c[..p].to_vec())
            )));
        }
        log -= r.ln();
    }
    Ok(log)
}

pub fn balance_fn(queue: &PandsQueue, c: &[ClassId]) -> Result<BalanceWeight> {
    Ok(BalanceWeight {
        log: log_balance(&queue.rate_fn, c)?,
    })
}

/// `ln(Φ(c) Π λ_i^{|c|_i})`, the unnormalized stationary measure with `π(∅) = 1`.
pub fn log_open_weight(queue: &PandsQueue, c: &[ClassId]) -> Result<f64> {
    let mut log = log_balance(&queue.rate_fn, c)?;
    for k in c {
        log += queue.arrival_rate(*k).ln();
    }
    Ok(log)
}

/// Product-form distribution of an open queue restricted to states with at
/// most `capacity` customers.
#[derive(Debug, Clone)]
pub struct TruncatedDistribution {
    pub capacity: usize,
    pub n_classes: usize,
    /// Ordered by length, then lexicographically.
    pub states: Vec<State>,
    pub log_weights: Vec<f64>,
    pub probs: Vec<f64>,
    pub log_normalizer: f64,
    index: HashMap<State, usize>,
}

impl TruncatedDistribution {
    pub fn prob(&self, c: &State) -> f64 {
        self.index.get(c).map_or(0.0, |&k| self.probs[k])
    }

    pub fn index_of(&self, c: &State) -> Option<usize> {
        self.index.get(c).copied()
    }

    pub fn mean_counts(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.n_classes];
        for (c, p) in self.states.iter().zip(&self.probs) {
            for k in c.iter() {
                m[k.index()] += p;
            }
        }
        m
    }

    /// Probability of each macrostate.
    pub fn macrostate_marginal(&self) -> HashMap<Macrostate, f64> {
        let mut out = HashMap::new();
        for (c, p) in self.states.iter().zip(&self.probs) {
            *out.entry(c.macrostate(self.n_classes)).or_insert(0.0) += p;
        }
        out
    }
}

/// Number of sequences of length at most `capacity` over `n` classes.
pub fn count_sequences(n: usize, capacity: usize) -> Option<usize> {
    let mut total: usize = 0;
    let mut layer: usize = 1;
    for _ in 0..=capacity {
        total = total.checked_add(layer)?;
        layer = layer.checked_mul(n)?;
    }
    Some(total)
}

/// All states with at most `capacity` customers, by length then lexicographic.
pub fn enumerate_sequences(n: usize, capacity: usize, budget: usize) -> Result<Vec<State>> {
    let count = count_sequences(n, capacity).unwrap_or(usize::MAX);
    if count > budget {
        return Err(Error::Resource {
            context: format!("enumerating states with at most {capacity} customers"),
            count,
            budget,
        });
    }
    let mut out = Vec::with_capacity(count);
    out.push(State::empty());
    let mut start = 0;
    for _ in 0..capacity {
        let end = out.len();
        for s in start..end {
            for k in 0..n {
                let mut c = out[s].clone();
                c.push(ClassId::new(k));
                out.push(c);
            }
        }
        start = end;
    }
    Ok(out)
}

/// Stationary distribution of the queue with arrivals blocked at `capacity`
/// customers. The swapping graph plays no role.
pub fn stationary_truncated(
    queue: &PandsQueue,
    capacity: usize,
    budget: usize,
) -> Result<TruncatedDistribution> {
    let n = queue.n_classes();
    let states = enumerate_sequences(n, capacity, budget)?;
    let log_lambda: Vec<f64> = queue.arrival_rates.iter().map(|l| l.ln()).collect();
    // States are generated parent-first, so each weight extends its parent's.
    let mut log_weights = Vec::with_capacity(states.len());
    log_weights.push(0.0);
    for s in 1..states.len() {
        let c = &states[s];
        let parent = (s - 1) / n;
        let last = c[c.len() - 1];
        let r = queue.rate_fn.rate(c)?;
        if r <= 0.0 {
            return Err(Error::Usage(format!(
                "μ vanishes on the non-empty state {c}"
            )));
        }
        log_weights.push(log_weights[parent] + log_lambda[last.index()] - r.ln());
    }
    let max = log_weights
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = log_weights.iter().map(|w| (w - max).exp()).sum();
    let log_normalizer = max + sum.ln();
    let probs = log_weights
        .iter()
        .map(|w| (w - log_normalizer).exp())
        .collect();
    let index = states
        .iter()
        .cloned()
        .enumerate()
        .map(|(k, c)| (c, k))
        .collect();
    Ok(TruncatedDistribution {
        capacity,
        n_classes: n,
        states,
        log_weights,
        probs,
        log_normalizer,
        index,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartialBalanceReport {
    pub capacity: usize,
    pub states_checked: usize,
    /// Max of `|π(c)μ(c) − π(c_1..n−1)λ_{c_n}|`.
    pub max_departure_residual: f64,
    /// Max of `|π(c)λ_i − Σ π(d)Δμ(d_1..p)|` over predecessors.
    pub max_arrival_residual: f64,
    /// 1-based state and class of the largest residual.
    pub worst_state: Vec<usize>,
    pub worst_class: Option<usize>,
}

impl PartialBalanceReport {
    pub fn max_residual(&self) -> f64 {
        self.max_departure_residual.max(self.max_arrival_residual)
    }
}

/// Checks both partial-balance identities, with `π(∅) = 1`, on every state of
/// length at most `capacity`.
pub fn verify_partial_balance(queue: &PandsQueue, capacity: usize) -> Result<PartialBalanceReport> {
    verify_partial_balance_with(queue, capacity, |c| Ok(log_open_weight(queue, c)?.exp()))
}

/// Same as [`verify_partial_balance`] with an arbitrary candidate measure.
pub fn verify_partial_balance_with(
    queue: &PandsQueue,
    capacity: usize,
    weight: impl Fn(&[ClassId]) -> Result<f64>,
) -> Result<PartialBalanceReport> {
    let states = enumerate_sequences(queue.n_classes(), capacity, DEFAULT_STATE_BUDGET)?;
    let mut report = PartialBalanceReport {
        capacity,
        states_checked: states.len(),
        max_departure_residual: 0.0,
        max_arrival_residual: 0.0,
        worst_state: vec![],
        worst_class: None,
    };
    let mut worst = 0.0;
    for c in &states {
        let pc = weight(c)?;
        if !c.is_empty() {
            let n = c.len();
            let lhs = pc * queue.rate_fn.rate(c)?;
            let rhs = weight(&c[..n - 1])? * queue.arrival_rate(c[n - 1]);
            let r = (lhs - rhs).abs();
            report.max_departure_residual = report.max_departure_residual.max(r);
            if r > worst {
                worst = r;
                report.worst_state = c.to_one_based();
                report.worst_class = None;
            }
        }
        for k in 0..queue.n_classes() {
            let i = ClassId::new(k);
            let lhs = pc * queue.arrival_rate(i);
            let mut rhs = 0.0;
            for (d, p) in predecessors(&queue.swapping, c, i)?.entries {
                let incs = queue.rate_fn.increments(&d[..=p])?;
                rhs += weight(&d)? * incs[p];
            }
            let r = (lhs - rhs).abs();
            report.max_arrival_residual = report.max_arrival_residual.max(r);
            if r > worst {
                worst = r;
                report.worst_state = c.to_one_based();
                report.worst_class = Some(k + 1);
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityViolation {
    /// 1-based classes of the subset.
    pub subset: Vec<usize>,
    pub arrival_sum: f64,
    pub limmu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub stable: bool,
    pub violations: Vec<StabilityViolation>,
    /// `(subset, limmu)` for every non-empty subset, subsets 1-based.
    pub limmu_values: Vec<(Vec<usize>, f64)>,
}

/// Largest class count accepted by [`stability_check`].
pub const MAX_STABILITY_CLASSES: usize = 24;

/// Tests `Σ_{i∈A} λ_i < limmu(A)` over every non-empty class subset.
pub fn stability_check(queue: &PandsQueue) -> Result<StabilityReport> {
    let n = queue.n_classes();
    if n > MAX_STABILITY_CLASSES {
        return Err(Error::Resource {
            context: "enumerating class subsets for the stability check".into(),
            count: n,
            budget: MAX_STABILITY_CLASSES,
        });
    }
    let mut violations = Vec::new();
    let mut limmu_values = Vec::with_capacity((1usize << n) - 1);
    for mask in 1u32..(1u32 << n) {
        let subset: Vec<ClassId> = (0..n)
            .filter(|k| mask & (1 << k) != 0)
            .map(ClassId::new)
            .collect();
        let limmu = queue.rate_fn.limmu(&subset)?;
        let arrival_sum: f64 = subset.iter().map(|i| queue.arrival_rate(*i)).sum();
        let labels: Vec<usize> = subset.iter().map(|i| i.index() + 1).collect();
        if !(arrival_sum < limmu) {
            violations.push(StabilityViolation {
                subset: labels.clone(),
                arrival_sum,
                limmu,
            });
        }
        limmu_values.push((labels, limmu));
    }
    Ok(StabilityReport {
        stable: violations.is_empty(),
        violations,
        limmu_values,
    })
}

/// Per-class departure rates `φ^d_i(c)` and service rates `φ^s_i(c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowRates {
    pub departure: Vec<f64>,
    pub service: Vec<f64>,
}

pub fn flow_rates(queue: &PandsQueue, c: &[ClassId]) -> Result<FlowRates> {
    let n = queue.n_classes();
    let mut departure = vec![0.0; n];
    let mut service = vec![0.0; n];
    let incs = queue.rate_fn.increments(c)?;
    for (p, &rate) in incs.iter().enumerate() {
        service[c[p].index()] += rate;
        if rate != 0.0 {
            let o = complete(&queue.swapping, c, p)?;
            departure[o.departing_class.index()] += rate;
        }
    }
    Ok(FlowRates { departure, service })
}
