//! Discrete-event simulation by exponential races.
//!
//! Every replication owns a ChaCha8 generator seeded with `seed` on stream
//! `replication index`, so a run is fully determined by its configuration.

pub mod models;
pub mod protocol;

use std::collections::HashMap;
use std::fmt::Display;
use std::hash::Hash;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::Serialize;

use crate::closed::QueueIndex;
use crate::error::{Error, Result};
use crate::model::ClassId;

pub use models::{ClosedModel, OpenModel, TandemModel};
pub use protocol::{
    simulate_protocol, ArrivalOutcome, ProtocolResult, ProtocolState, ProtocolSystem,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    Events(u64),
    Time(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub horizon: Horizon,
    /// Fraction of the horizon discarded before measuring.
    pub warmup: f64,
    pub seed: u64,
    pub replications: usize,
    /// Number of leading events of the first replication to log.
    pub trace_events: usize,
}

impl SimConfig {
    pub fn events(n: u64, seed: u64) -> Self {
        SimConfig {
            horizon: Horizon::Events(n),
            warmup: 0.2,
            seed,
            replications: 10,
            trace_events: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.horizon {
            Horizon::Events(0) => {
                return Err(Error::Usage("event horizon must be positive".into()))
            }
            Horizon::Time(t) if !(t.is_finite() && t > 0.0) => {
                return Err(Error::Usage(format!(
                    "time horizon must be positive, got {t}"
                )))
            }
            _ => {}
        }
        if !(0.0..1.0).contains(&self.warmup) {
            return Err(Error::Usage(format!(
                "warmup must be in [0,1), got {}",
                self.warmup
            )));
        }
        if self.replications == 0 {
            return Err(Error::Usage("at least one replication is needed".into()));
        }
        Ok(())
    }

    pub(crate) fn rng(&self, replication: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(replication as u64);
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SimEvent {
    Arrival { class: ClassId },
    Completion { queue: QueueIndex, position: usize },
}

#[derive(Debug, Clone)]
pub struct Step<S> {
    pub next: S,
    /// 0-based positions of the swap chain; empty for arrivals.
    pub chain: Vec<usize>,
    pub served: Option<ClassId>,
    pub departing: Option<ClassId>,
}

pub trait SimModel: Sync {
    type State: Clone + Eq + Hash + Ord + Send + Sync + Display;

    fn n_classes(&self) -> usize;
    fn initial(&self) -> Self::State;
    /// Appends every enabled event with its positive rate.
    fn events(&self, s: &Self::State, out: &mut Vec<(SimEvent, f64)>) -> Result<()>;
    fn apply(&self, s: &Self::State, e: SimEvent) -> Result<Step<Self::State>>;
    /// Whether a tandem model labels completions with their queue.
    fn two_queues(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Counters {
    pub events: u64,
    pub arrivals: Vec<u64>,
    pub completions: u64,
    /// By class of the customer in the completing position.
    pub served: Vec<u64>,
    /// By class of the customer that leaves (end of the swap chain).
    pub departures: Vec<u64>,
    pub rejections: Vec<u64>,
}

impl Counters {
    fn new(n: usize) -> Self {
        Counters {
            events: 0,
            arrivals: vec![0; n],
            completions: 0,
            served: vec![0; n],
            departures: vec![0; n],
            rejections: vec![0; n],
        }
    }

    fn absorb(&mut self, o: &Counters) {
        self.events += o.events;
        self.completions += o.completions;
        for (a, b) in [
            (&mut self.arrivals, &o.arrivals),
            (&mut self.served, &o.served),
            (&mut self.departures, &o.departures),
            (&mut self.rejections, &o.rejections),
        ] {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
}

/// Mean over replications with its standard error. The error is NaN with a
/// single replication.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    pub fn of(xs: &[f64]) -> Self {
        let r = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / r;
        if xs.len() < 2 {
            return Estimate { mean, se: f64::NAN };
        }
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1.0);
        Estimate {
            mean,
            se: (var / r).sqrt(),
        }
    }

    /// `|mean - x| <= k se`.
    pub fn within(&self, x: f64, k: f64) -> bool {
        (self.mean - x).abs() <= k * self.se
    }
}

#[derive(Debug, Clone)]
struct Replication<S> {
    occupancy: HashMap<S, f64>,
    observed: f64,
    counters: Counters,
    trace: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimResult<S> {
    /// States visited after warmup in any replication, sorted.
    #[serde(skip)]
    pub states: Vec<S>,
    /// Mean fraction of observed time per state.
    pub occupancy: Vec<f64>,
    pub occupancy_se: Vec<f64>,
    /// `per_replication[r][k]`: fraction for `states[k]` in replication `r`.
    #[serde(skip)]
    pub per_replication: Vec<Vec<f64>>,
    /// Observed (post-warmup) time per replication.
    pub observed_time: Vec<f64>,
    /// Totals over replications.
    pub counters: Counters,
    /// Per-replication counters.
    pub replication_counters: Vec<Counters>,
    pub trace: Vec<String>,
}

impl<S: Clone + Ord> SimResult<S> {
    pub fn replications(&self) -> usize {
        self.per_replication.len()
    }

    pub fn prob(&self, s: &S) -> f64 {
        self.states
            .binary_search(s)
            .map_or(0.0, |k| self.occupancy[k])
    }

    /// Occupancy of `f(state)`, with standard errors across replications.
    pub fn marginal<K: Ord + Clone>(&self, f: impl Fn(&S) -> K) -> Vec<(K, Estimate)> {
        let keys: Vec<K> = self.states.iter().map(&f).collect();
        let mut distinct = keys.clone();
        distinct.sort();
        distinct.dedup();
        let slot: Vec<usize> = keys
            .iter()
            .map(|k| distinct.binary_search(k).unwrap())
            .collect();
        let per: Vec<Vec<f64>> = self
            .per_replication
            .iter()
            .map(|row| {
                let mut m = vec![0.0; distinct.len()];
                for (k, &x) in row.iter().enumerate() {
                    m[slot[k]] += x;
                }
                m
            })
            .collect();
        distinct
            .into_iter()
            .enumerate()
            .map(|(j, key)| {
                let xs: Vec<f64> = per.iter().map(|m| m[j]).collect();
                (key, Estimate::of(&xs))
            })
            .collect()
    }

    /// Long-run rate of a per-class counter, per unit of observed time.
    pub fn rate(&self, pick: impl Fn(&Counters) -> u64) -> Estimate {
        let xs: Vec<f64> = self
            .replication_counters
            .iter()
            .zip(&self.observed_time)
            .map(|(c, t)| pick(c) as f64 / t)
            .collect();
        Estimate::of(&xs)
    }
}

fn trace_line<M: SimModel>(model: &M, t: f64, e: SimEvent, step: &Step<M::State>) -> String {
    let kind = match e {
        SimEvent::Arrival { class } => format!("arrival:{class}"),
        SimEvent::Completion { queue, position } if model.two_queues() => {
            format!("q{}:{}", queue.number(), position + 1)
        }
        SimEvent::Completion { position, .. } => format!("complete:{}", position + 1),
    };
    let chain: Vec<String> = step.chain.iter().map(|p| (p + 1).to_string()).collect();
    let depart = step.departing.map_or("-".to_string(), |k| k.to_string());
    format!(
        "t={t:.6} ev={kind} chain=[{}] depart={depart}",
        chain.join(",")
    )
}

fn run_replication<M: SimModel>(
    model: &M,
    cfg: &SimConfig,
    r: usize,
) -> Result<Replication<M::State>> {
    let n = model.n_classes();
    let mut rng = cfg.rng(r);
    let mut state = model.initial();
    let mut occupancy: HashMap<M::State, f64> = HashMap::new();
    let mut counters = Counters::new(n);
    let mut observed = 0.0;
    let mut trace = Vec::new();
    let mut events = Vec::new();
    let mut t = 0.0f64;
    let (max_events, t_end) = match cfg.horizon {
        Horizon::Events(k) => (k, f64::INFINITY),
        Horizon::Time(x) => (u64::MAX, x),
    };
    let (warm_events, warm_time) = match cfg.horizon {
        Horizon::Events(k) => ((cfg.warmup * k as f64).floor() as u64, 0.0),
        Horizon::Time(x) => (0, cfg.warmup * x),
    };
    let mut k = 0u64;
    while k < max_events {
        events.clear();
        model.events(&state, &mut events)?;
        let total: f64 = events.iter().map(|(_, r)| r).sum();
        if total <= 0.0 {
            return Err(Error::Deadlock(format!(
                "no event is enabled in state {state}"
            )));
        }
        let dt = Exp::new(total).expect("positive rate").sample(&mut rng);
        let measuring = k >= warm_events;
        // Part of [t, t + dt] inside the measurement window.
        let lo = t.max(warm_time);
        let hi = (t + dt).min(t_end);
        if measuring && hi > lo {
            *occupancy.entry(state.clone()).or_insert(0.0) += hi - lo;
            observed += hi - lo;
        }
        t += dt;
        if t > t_end {
            break;
        }
        let mut u = rng.random::<f64>() * total;
        let mut chosen = events[events.len() - 1].0;
        for &(e, r) in &events {
            if u < r {
                chosen = e;
                break;
            }
            u -= r;
        }
        let step = model.apply(&state, chosen)?;
        if r == 0 && trace.len() < cfg.trace_events {
            trace.push(trace_line(model, t, chosen, &step));
        }
        if measuring && t >= warm_time {
            counters.events += 1;
            match chosen {
                SimEvent::Arrival { class } => counters.arrivals[class.index()] += 1,
                SimEvent::Completion { .. } => counters.completions += 1,
            }
            if let Some(c) = step.served {
                counters.served[c.index()] += 1;
            }
            if let Some(c) = step.departing {
                counters.departures[c.index()] += 1;
            }
        }
        state = step.next;
        k += 1;
    }
    Ok(Replication {
        occupancy,
        observed,
        counters,
        trace,
    })
}

/// Runs `cfg.replications` independent replications in parallel.
pub fn simulate<M: SimModel>(model: &M, cfg: &SimConfig) -> Result<SimResult<M::State>> {
    cfg.validate()?;
    let reps = (0..cfg.replications)
        .into_par_iter()
        .map(|r| run_replication(model, cfg, r))
        .collect::<Result<Vec<_>>>()?;
    let mut states: Vec<M::State> = reps
        .iter()
        .flat_map(|r| r.occupancy.keys().cloned())
        .collect();
    states.sort();
    states.dedup();
    let per_replication: Vec<Vec<f64>> = reps
        .iter()
        .map(|r| {
            states
                .iter()
                .map(|s| r.occupancy.get(s).map_or(0.0, |x| x / r.observed))
                .collect()
        })
        .collect();
    let (occupancy, occupancy_se) = (0..states.len())
        .map(|k| {
            let xs: Vec<f64> = per_replication.iter().map(|row| row[k]).collect();
            let e = Estimate::of(&xs);
            (e.mean, e.se)
        })
        .unzip();
    let mut counters = Counters::new(model.n_classes());
    for r in &reps {
        counters.absorb(&r.counters);
    }
    Ok(SimResult {
        states,
        occupancy,
        occupancy_se,
        per_replication,
        observed_time: reps.iter().map(|r| r.observed).collect(),
        counters,
        replication_counters: reps.iter().map(|r| r.counters.clone()).collect(),
        trace: reps.into_iter().next().map(|r| r.trace).unwrap_or_default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimate_arithmetic() {
        let e = Estimate::of(&[1.0, 2.0, 3.0, 4.0]);
        assert!((e.mean - 2.5).abs() < 1e-15);
        // sample variance 5/3, se = sqrt(5/12)
        assert!((e.se - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
        assert!(Estimate::of(&[1.0]).se.is_nan());
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig::events(0, 1).validate().is_err());
        let mut c = SimConfig::events(10, 1);
        c.warmup = 1.0;
        assert!(c.validate().is_err());
        c.warmup = 0.0;
        c.replications = 0;
        assert!(c.validate().is_err());
    }
}
