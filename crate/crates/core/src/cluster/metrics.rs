//! Protocol readouts from a tandem distribution, and annotated replays.

use serde::Serialize;

use super::compile::{CompiledTandem, TokenKind};
use crate::closed::tandem::tandem_step_detailed;
use crate::closed::{QueueIndex, TandemDistribution, TandemState};
use crate::error::{Error, Result};
use crate::model::ClassId;
use crate::rate::RateModel;

#[derive(Debug, Clone, Serialize)]
pub struct TypeMetrics {
    pub name: String,
    pub arrival_rate: f64,
    /// Probability that an arriving job of this type finds no usable token.
    pub blocking: f64,
    pub throughput: f64,
    /// Expected number of unassigned jobs, when the type has its own tokens.
    pub mean_unassigned: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassOccupancy {
    pub name: String,
    /// Expected tokens held by jobs (first queue).
    pub mean_held: f64,
    /// Expected available tokens (second queue).
    pub mean_available: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClusterMetrics {
    pub types: Vec<TypeMetrics>,
    pub classes: Vec<ClassOccupancy>,
    pub mean_jobs: f64,
}

/// True when some token in `d` can be taken by a type-`k` arrival.
pub fn type_served(ct: &CompiledTandem, d: &[ClassId], k: usize) -> bool {
    d.iter().any(|c| ct.type_sets[c.index()].contains(&k))
}

pub fn metrics(ct: &CompiledTandem, dist: &TandemDistribution) -> ClusterMetrics {
    let n = ct.n_classes();
    let n_types = ct.type_names.len();
    let mut blocking = vec![0.0; n_types];
    let mut held = vec![0.0; n];
    let mut avail = vec![0.0; n];
    let mut jobs = 0.0;
    for (s, &p) in dist.states.iter().zip(&dist.probs) {
        for (k, b) in blocking.iter_mut().enumerate() {
            if !type_served(ct, &s.second, k) {
                *b += p;
            }
        }
        for c in s.first.iter() {
            held[c.index()] += p;
        }
        for c in s.second.iter() {
            avail[c.index()] += p;
        }
        jobs += p * s.first.len() as f64;
    }
    let own_class = |k: usize| {
        ct.kinds
            .iter()
            .position(|&kind| kind == TokenKind::JobType(k))
    };
    ClusterMetrics {
        types: (0..n_types)
            .map(|k| TypeMetrics {
                name: ct.type_names[k].clone(),
                arrival_rate: ct.type_rates[k],
                blocking: blocking[k],
                throughput: ct.type_rates[k] * (1.0 - blocking[k]),
                mean_unassigned: own_class(k).map(|i| held[i]),
            })
            .collect(),
        classes: (0..n)
            .map(|i| ClassOccupancy {
                name: ct.class_names[i].clone(),
                mean_held: held[i],
                mean_available: avail[i],
            })
            .collect(),
        mean_jobs: jobs,
    }
}

/// Protocol reading of one tandem transition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Meaning {
    /// A job completes and its token becomes available.
    Released { token: ClassId },
    /// A job completes and its token passes to a waiting job; the last token
    /// of the chain becomes available.
    HandedOver {
        token: ClassId,
        freed: ClassId,
        chain: Vec<ClassId>,
    },
    /// A job arrives and holds a token of its own type while it waits.
    JoinedUnassigned { token: ClassId },
    /// A job arrives and seizes an available token.
    Seized { arrival: ClassId, token: ClassId },
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceStep {
    pub step: usize,
    pub queue: QueueIndex,
    /// 0-based.
    pub position: usize,
    pub meaning: Meaning,
    pub description: String,
    #[serde(skip)]
    pub state: TandemState,
}

fn arrival_label(ct: &CompiledTandem, k: ClassId) -> String {
    match ct.kinds[k.index()] {
        TokenKind::JobType(t) => format!("type-{} job", ct.type_names[t]),
        _ => {
            let ts: Vec<&str> = ct.type_sets[k.index()]
                .iter()
                .map(|&t| ct.type_names[t].as_str())
                .collect();
            if ts.len() == 1 {
                format!("type-{} job", ts[0])
            } else {
                format!("job of type {}", ts.join("/"))
            }
        }
    }
}

fn token_label(ct: &CompiledTandem, k: ClassId) -> String {
    match ct.kinds[k.index()] {
        TokenKind::Machine(s) => format!("a token of machine {}", ct.machine_names[s]),
        TokenKind::Group(_) => format!("a token of group {}", ct.name(k)),
        TokenKind::JobType(t) => format!("a class-{} token", ct.type_names[t]),
        TokenKind::Node => format!("token {}", ct.name(k)),
    }
}

impl Meaning {
    pub fn describe(&self, ct: &CompiledTandem) -> String {
        match self {
            Meaning::Released { token } => format!(
                "job completes on {}; token released; no unassigned compatible job",
                ct.describe_machines(*token)
            ),
            Meaning::HandedOver {
                token,
                freed,
                chain,
            } => {
                let head = format!("job completes on {}", ct.describe_machines(*token));
                match (chain.len(), ct.kinds[freed.index()]) {
                    (2, TokenKind::JobType(t)) => {
                        format!(
                            "{head}; token seized by an unassigned type-{} job",
                            ct.type_names[t]
                        )
                    }
                    _ => {
                        let names: Vec<&str> = chain.iter().map(|&k| ct.name(k)).collect();
                        format!(
                            "{head}; tokens passed along {}; token {} released",
                            names.join("->"),
                            ct.name(*freed)
                        )
                    }
                }
            }
            Meaning::JoinedUnassigned { token } => format!(
                "a {} enters and waits unassigned holding {}",
                arrival_label(ct, *token),
                token_label(ct, *token)
            ),
            Meaning::Seized { arrival, token } => format!(
                "a {} enters and seizes {}",
                arrival_label(ct, *arrival),
                token_label(ct, *token)
            ),
        }
    }
}

/// Replays `(queue, position)` completions from the compiled initial state.
pub fn protocol_trace(
    ct: &CompiledTandem,
    events: &[(QueueIndex, usize)],
) -> Result<Vec<TraceStep>> {
    protocol_trace_from(ct, &ct.initial, events)
}

pub fn protocol_trace_from(
    ct: &CompiledTandem,
    start: &TandemState,
    events: &[(QueueIndex, usize)],
) -> Result<Vec<TraceStep>> {
    let mut s = start.clone();
    let mut out = Vec::with_capacity(events.len());
    for (step, &(q, p)) in events.iter().enumerate() {
        let queue = s.queue(q);
        if p >= queue.len() {
            return Err(Error::Replay {
                step,
                reason: format!(
                    "queue {} has {} tokens, no position {}",
                    q.number(),
                    queue.len(),
                    p + 1
                ),
            });
        }
        let rate = ct.tandem.rate_fn(q).increments(queue)?[p];
        if rate <= 0.0 {
            return Err(Error::Replay {
                step,
                reason: format!(
                    "position {} of queue {} is not in service",
                    p + 1,
                    q.number()
                ),
            });
        }
        let (next, o) = tandem_step_detailed(&ct.tandem, &s, q, p)?;
        let completing = queue[p];
        let chain: Vec<ClassId> = o.swap_chain.iter().map(|&pos| queue[pos]).collect();
        let meaning = match (q, o.departing_class == completing && chain.len() == 1) {
            (QueueIndex::First, true) => Meaning::Released { token: completing },
            (QueueIndex::First, false) => Meaning::HandedOver {
                token: completing,
                freed: o.departing_class,
                chain,
            },
            (QueueIndex::Second, true) => Meaning::JoinedUnassigned { token: completing },
            (QueueIndex::Second, false) => Meaning::Seized {
                arrival: completing,
                token: o.departing_class,
            },
        };
        out.push(TraceStep {
            step,
            queue: q,
            position: p,
            description: meaning.describe(ct),
            meaning,
            state: next.clone(),
        });
        s = next;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed::stationary_tandem;
    use crate::cluster::{compile, ClusterSpec};

    fn three_machines(l: u32) -> CompiledTandem {
        compile(&ClusterSpec::assignment(
            &[("A", 1.0, l, &["1", "3"]), ("B", 1.0, l, &["2", "3"])],
            &[("1", 1.0, l), ("2", 1.0, l), ("3", 1.0, l)],
        ))
        .unwrap()
    }

    #[test]
    fn blocking_walkthrough() {
        let ct = three_machines(2);
        let st = |c: &[&str], d: &[&str]| {
            TandemState::new(ct.parse_state(c).unwrap(), ct.parse_state(d).unwrap())
        };
        let a = st(&["2", "1", "3", "1", "2", "3", "A"], &["B", "A", "B"]);
        let steps = protocol_trace_from(
            &ct,
            &a,
            &[
                (QueueIndex::First, 0),
                (QueueIndex::First, 1),
                (QueueIndex::Second, 0),
            ],
        )
        .unwrap();
        assert_eq!(
            steps[0].state,
            st(&["1", "3", "1", "2", "3", "A"], &["B", "A", "B", "2"])
        );
        assert_eq!(
            steps[0].description,
            "job completes on machine 2; token released; no unassigned compatible job"
        );
        assert_eq!(
            steps[1].state,
            st(&["1", "1", "2", "3", "3"], &["B", "A", "B", "2", "A"])
        );
        assert_eq!(
            steps[1].description,
            "job completes on machine 3; token seized by an unassigned type-A job"
        );
        assert_eq!(
            steps[2].state,
            st(&["1", "1", "2", "3", "3", "2"], &["A", "B", "B", "A"])
        );
        assert_eq!(
            steps[2].description,
            "a type-B job enters and seizes a token of machine 2"
        );
    }

    #[test]
    fn replay_error_carries_step() {
        let ct = three_machines(1);
        // the first queue is empty initially
        let err =
            protocol_trace(&ct, &[(QueueIndex::Second, 0), (QueueIndex::First, 3)]).unwrap_err();
        assert!(matches!(err, Error::Replay { step: 1, .. }), "{err:?}");
        // a machine token at the head of the second queue is never served
        let err = protocol_trace(&ct, &[(QueueIndex::Second, 2)]).unwrap_err();
        assert!(matches!(err, Error::Replay { step: 0, .. }), "{err:?}");
    }

    #[test]
    fn symmetric_blocking() {
        let ct = three_machines(1);
        let dist = stationary_tandem(&ct.tandem, &ct.initial, 1_000_000).unwrap();
        let m = metrics(&ct, &dist);
        assert!((m.types[0].blocking - m.types[1].blocking).abs() < 1e-12);
        assert!(m.types[0].blocking > 0.0 && m.types[0].blocking < 1.0);
        let total: f64 = m
            .classes
            .iter()
            .map(|c| c.mean_held + c.mean_available)
            .sum();
        assert!((total - 5.0).abs() < 1e-9);
    }
}
