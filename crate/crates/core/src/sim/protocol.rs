//! Direct simulation of the token protocol of a cluster, written from its
//! operational description and not through the tandem encoding.
//!
//! A type-k arrival takes the longest-available token among the groups that
//! serve type k. Failing that it waits unassigned if fewer than `ℓ_k` jobs of
//! its type already wait, and is rejected otherwise. A job assigned to group
//! t joins the buffer of every machine of t, at its arrival-order place;
//! each machine serves its buffer in order, and the job leaves as soon as one
//! machine completes it. The
//! freed token goes to the oldest unassigned job that may use it, or to the
//! back of the available list.

use std::collections::VecDeque;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::Serialize;

use super::{Estimate, Horizon, SimConfig};
use crate::cluster::{ClusterMode, ClusterSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProtocolGroup {
    pub name: String,
    pub machines: Vec<usize>,
    pub slots: u32,
    pub types: Vec<usize>,
}

/// A cluster reduced to groups; in assignment mode every machine is its own
/// group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProtocolSystem {
    pub type_names: Vec<String>,
    pub type_rates: Vec<f64>,
    pub type_slots: Vec<u32>,
    pub machine_rates: Vec<f64>,
    pub groups: Vec<ProtocolGroup>,
}

impl ProtocolSystem {
    pub fn from_spec(spec: &ClusterSpec) -> Result<Self> {
        let mode = spec.mode()?;
        let mut type_slots = Vec::new();
        for k in &spec.job_types {
            if !(k.rate.is_finite() && k.rate >= 0.0) {
                return Err(Error::Usage(format!(
                    "job type {:?} has a negative rate",
                    k.name
                )));
            }
            match k.slots.and_then(|s| s.finite()) {
                Some(n) if n >= 1 => type_slots.push(n),
                _ => {
                    return Err(Error::Unsupported(format!(
                        "job type {:?} needs a finite, positive slot count",
                        k.name
                    )))
                }
            }
        }
        for m in &spec.machines {
            if !(m.rate.is_finite() && m.rate > 0.0) {
                return Err(Error::Usage(format!(
                    "machine {:?} needs a positive rate",
                    m.name
                )));
            }
        }
        let groups = match mode {
            ClusterMode::Assignment => spec
                .machines
                .iter()
                .enumerate()
                .map(|(s, m)| {
                    let types = spec
                        .job_types
                        .iter()
                        .enumerate()
                        .filter(|(_, k)| k.machines.as_ref().is_some_and(|ms| ms.contains(&m.name)))
                        .map(|(k, _)| k)
                        .collect();
                    Ok(ProtocolGroup {
                        name: m.name.clone(),
                        machines: vec![s],
                        slots: m.buffer.filter(|&b| b >= 1).ok_or_else(|| {
                            Error::Usage(format!(
                                "machine {:?} needs a buffer of at least one slot",
                                m.name
                            ))
                        })?,
                        types,
                    })
                })
                .collect::<Result<Vec<_>>>()?,
            ClusterMode::Groups => spec
                .groups
                .as_ref()
                .expect("groups mode")
                .iter()
                .map(|g| {
                    Ok(ProtocolGroup {
                        name: g.name.clone(),
                        machines: g
                            .machines
                            .iter()
                            .map(|m| spec.machine_index(m))
                            .collect::<Result<_>>()?,
                        slots: g.slots,
                        types: g
                            .job_types
                            .iter()
                            .map(|k| spec.type_index(k))
                            .collect::<Result<_>>()?,
                    })
                })
                .collect::<Result<Vec<_>>>()?,
            ClusterMode::Dag => {
                return Err(Error::Unsupported(
                    "the direct protocol simulation covers assignment and group clusters".into(),
                ))
            }
        };
        Ok(ProtocolSystem {
            type_names: spec.job_types.iter().map(|k| k.name.clone()).collect(),
            type_rates: spec.job_types.iter().map(|k| k.rate).collect(),
            type_slots,
            machine_rates: spec.machines.iter().map(|m| m.rate).collect(),
            groups,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Job {
    pub id: u64,
    pub job_type: usize,
    pub group: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "group", rename_all = "snake_case")]
pub enum ArrivalOutcome {
    Assigned(usize),
    Waiting,
    Rejected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Departure {
    pub job: Job,
    /// Type of the waiting job that took over the token, if any.
    pub handed_to: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolState {
    /// Available group tokens, longest available first.
    pub available: VecDeque<usize>,
    /// Jobs present, in arrival order.
    pub jobs: Vec<Job>,
    /// Per machine, ids of assigned jobs in service order.
    pub buffers: Vec<VecDeque<u64>>,
    pub unassigned: Vec<u32>,
    next_id: u64,
}

impl ProtocolState {
    pub fn new(sys: &ProtocolSystem) -> Self {
        let mut available = VecDeque::new();
        for (t, g) in sys.groups.iter().enumerate() {
            available.extend(std::iter::repeat_n(t, g.slots as usize));
        }
        ProtocolState {
            available,
            jobs: Vec::new(),
            buffers: vec![VecDeque::new(); sys.machine_rates.len()],
            unassigned: vec![0; sys.type_names.len()],
            next_id: 0,
        }
    }

    /// Buffers stay in arrival order: a job that waited unassigned goes
    /// ahead of jobs that arrived after it but were assigned first.
    fn assign(&mut self, sys: &ProtocolSystem, id: u64, t: usize) {
        for &s in &sys.groups[t].machines {
            let at = self.buffers[s].partition_point(|&x| x < id);
            self.buffers[s].insert(at, id);
        }
    }

    pub fn arrive(&mut self, sys: &ProtocolSystem, k: usize) -> ArrivalOutcome {
        let id = self.next_id;
        if let Some(pos) = self
            .available
            .iter()
            .position(|&t| sys.groups[t].types.contains(&k))
        {
            let t = self.available.remove(pos).expect("position is in range");
            self.next_id += 1;
            self.jobs.push(Job {
                id,
                job_type: k,
                group: Some(t),
            });
            self.assign(sys, id, t);
            ArrivalOutcome::Assigned(t)
        } else if self.unassigned[k] < sys.type_slots[k] {
            self.next_id += 1;
            self.unassigned[k] += 1;
            self.jobs.push(Job {
                id,
                job_type: k,
                group: None,
            });
            ArrivalOutcome::Waiting
        } else {
            ArrivalOutcome::Rejected
        }
    }

    /// Machine `s` completes the job at the head of its buffer.
    pub fn complete(&mut self, sys: &ProtocolSystem, s: usize) -> Option<Departure> {
        let id = *self.buffers[s].front()?;
        let at = self
            .jobs
            .iter()
            .position(|j| j.id == id)
            .expect("buffered job is present");
        let job = self.jobs.remove(at);
        let t = job.group.expect("buffered job is assigned");
        for &m in &sys.groups[t].machines {
            self.buffers[m].retain(|&x| x != id);
        }
        let taker = self
            .jobs
            .iter()
            .position(|j| j.group.is_none() && sys.groups[t].types.contains(&j.job_type));
        let handed_to = match taker {
            Some(w) => {
                let k = self.jobs[w].job_type;
                self.jobs[w].group = Some(t);
                self.unassigned[k] -= 1;
                let wid = self.jobs[w].id;
                self.assign(sys, wid, t);
                Some(k)
            }
            None => {
                self.available.push_back(t);
                None
            }
        };
        Some(Departure { job, handed_to })
    }

    pub fn busy(&self, s: usize) -> bool {
        !self.buffers[s].is_empty()
    }

    pub fn held_tokens(&self, t: usize) -> usize {
        self.jobs.iter().filter(|j| j.group == Some(t)).count()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProtocolTypeStats {
    pub name: String,
    /// Fraction of post-warmup arrivals that were rejected.
    pub blocking: Estimate,
    pub arrivals: u64,
    pub rejections: u64,
    /// Time-average number of unassigned jobs.
    pub mean_unassigned: Estimate,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProtocolGroupStats {
    pub name: String,
    /// Time-average number of tokens held by jobs.
    pub mean_held: Estimate,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProtocolResult {
    pub types: Vec<ProtocolTypeStats>,
    pub groups: Vec<ProtocolGroupStats>,
    pub mean_jobs: Estimate,
    pub replications: usize,
}

struct RepStats {
    arrivals: Vec<u64>,
    rejections: Vec<u64>,
    unassigned_time: Vec<f64>,
    held_time: Vec<f64>,
    jobs_time: f64,
    observed: f64,
}

fn run(sys: &ProtocolSystem, cfg: &SimConfig, r: usize) -> RepStats {
    let n_types = sys.type_names.len();
    let n_groups = sys.groups.len();
    let mut rng = cfg.rng(r);
    let mut st = ProtocolState::new(sys);
    let mut out = RepStats {
        arrivals: vec![0; n_types],
        rejections: vec![0; n_types],
        unassigned_time: vec![0.0; n_types],
        held_time: vec![0.0; n_groups],
        jobs_time: 0.0,
        observed: 0.0,
    };
    let (max_events, t_end) = match cfg.horizon {
        Horizon::Events(k) => (k, f64::INFINITY),
        Horizon::Time(x) => (u64::MAX, x),
    };
    let (warm_events, warm_time) = match cfg.horizon {
        Horizon::Events(k) => ((cfg.warmup * k as f64).floor() as u64, 0.0),
        Horizon::Time(x) => (0, cfg.warmup * x),
    };
    let arrival_total: f64 = sys.type_rates.iter().sum();
    let mut t = 0.0f64;
    let mut held = vec![0usize; n_groups];
    for k in 0..max_events {
        let service_total: f64 = (0..sys.machine_rates.len())
            .filter(|&s| st.busy(s))
            .map(|s| sys.machine_rates[s])
            .sum();
        let total = arrival_total + service_total;
        if total <= 0.0 {
            break;
        }
        let dt = Exp::new(total).expect("positive rate").sample(&mut rng);
        let lo = t.max(warm_time);
        let hi = (t + dt).min(t_end);
        if k >= warm_events && hi > lo {
            let w = hi - lo;
            out.observed += w;
            for (x, &u) in out.unassigned_time.iter_mut().zip(&st.unassigned) {
                *x += w * u as f64;
            }
            held.fill(0);
            for j in &st.jobs {
                if let Some(g) = j.group {
                    held[g] += 1;
                }
            }
            for (x, &h) in out.held_time.iter_mut().zip(&held) {
                *x += w * h as f64;
            }
            out.jobs_time += w * st.jobs.len() as f64;
        }
        t += dt;
        if t > t_end {
            break;
        }
        let counting = k >= warm_events && t >= warm_time;
        let mut u = rng.random::<f64>() * total;
        if u < arrival_total {
            let mut ty = n_types - 1;
            for (i, &l) in sys.type_rates.iter().enumerate() {
                if u < l {
                    ty = i;
                    break;
                }
                u -= l;
            }
            let outcome = st.arrive(sys, ty);
            if counting {
                out.arrivals[ty] += 1;
                if outcome == ArrivalOutcome::Rejected {
                    out.rejections[ty] += 1;
                }
            }
        } else {
            u -= arrival_total;
            let busy: Vec<usize> = (0..sys.machine_rates.len())
                .filter(|&s| st.busy(s))
                .collect();
            let mut chosen = *busy.last().expect("some machine is busy");
            for &s in &busy {
                if u < sys.machine_rates[s] {
                    chosen = s;
                    break;
                }
                u -= sys.machine_rates[s];
            }
            st.complete(sys, chosen);
        }
    }
    out
}

/// Blocking fractions and token occupancies of the cluster, estimated over
/// independent replications.
pub fn simulate_protocol(spec: &ClusterSpec, cfg: &SimConfig) -> Result<ProtocolResult> {
    cfg.validate()?;
    let sys = ProtocolSystem::from_spec(spec)?;
    let reps: Vec<RepStats> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| run(&sys, cfg, r))
        .collect();
    let per = |f: &dyn Fn(&RepStats) -> f64| Estimate::of(&reps.iter().map(f).collect::<Vec<_>>());
    let types = (0..sys.type_names.len())
        .map(|k| ProtocolTypeStats {
            name: sys.type_names[k].clone(),
            blocking: per(&|r| {
                if r.arrivals[k] == 0 {
                    0.0
                } else {
                    r.rejections[k] as f64 / r.arrivals[k] as f64
                }
            }),
            arrivals: reps.iter().map(|r| r.arrivals[k]).sum(),
            rejections: reps.iter().map(|r| r.rejections[k]).sum(),
            mean_unassigned: per(&|r| {
                if r.observed > 0.0 {
                    r.unassigned_time[k] / r.observed
                } else {
                    0.0
                }
            }),
        })
        .collect();
    let groups = sys
        .groups
        .iter()
        .enumerate()
        .map(|(t, g)| ProtocolGroupStats {
            name: g.name.clone(),
            mean_held: per(&|r| {
                if r.observed > 0.0 {
                    r.held_time[t] / r.observed
                } else {
                    0.0
                }
            }),
        })
        .collect();
    Ok(ProtocolResult {
        types,
        groups,
        mean_jobs: per(&|r| {
            if r.observed > 0.0 {
                r.jobs_time / r.observed
            } else {
                0.0
            }
        }),
        replications: cfg.replications,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_machines(l: u32) -> ClusterSpec {
        ClusterSpec::assignment(
            &[("A", 1.0, l, &["1", "3"]), ("B", 1.0, l, &["2", "3"])],
            &[("1", 1.0, l), ("2", 1.0, l), ("3", 1.0, l)],
        )
    }

    #[test]
    fn longest_available_token_is_taken() {
        let sys = ProtocolSystem::from_spec(&three_machines(1)).unwrap();
        let mut st = ProtocolState::new(&sys);
        assert_eq!(st.available, VecDeque::from(vec![0, 1, 2]));
        assert_eq!(st.arrive(&sys, 1), ArrivalOutcome::Assigned(1));
        assert_eq!(st.arrive(&sys, 1), ArrivalOutcome::Assigned(2));
        assert_eq!(st.arrive(&sys, 1), ArrivalOutcome::Waiting);
        assert_eq!(st.arrive(&sys, 1), ArrivalOutcome::Rejected);
        // machine 2 finishes; its token goes to the waiting B job
        let d = st.complete(&sys, 1).unwrap();
        assert_eq!(d.handed_to, Some(1));
        assert_eq!(st.unassigned, vec![0, 0]);
        // machine 3 finishes; nobody waits, so its token is released
        let d = st.complete(&sys, 2).unwrap();
        assert_eq!(d.handed_to, None);
        assert_eq!(st.available, VecDeque::from(vec![0, 2]));
        assert_eq!(st.complete(&sys, 0), None);
    }

    #[test]
    fn zero_rate_type_is_never_blocked() {
        let mut spec = three_machines(1);
        spec.job_types[1].rate = 0.0;
        let mut cfg = SimConfig::events(20_000, 3);
        cfg.replications = 2;
        let res = simulate_protocol(&spec, &cfg).unwrap();
        assert_eq!(res.types[1].arrivals, 0);
        assert_eq!(res.types[1].blocking.mean, 0.0);
        assert_eq!(res.types[1].mean_unassigned.mean, 0.0);
    }

    #[test]
    fn deterministic_under_seed() {
        let cfg = SimConfig::events(5_000, 11);
        let a = simulate_protocol(&three_machines(2), &cfg).unwrap();
        let b = simulate_protocol(&three_machines(2), &cfg).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }
}
