//! The pass-and-swap completion mechanism and its inverse.
//!
//! Positions are 0-based throughout the library. Text formats and the CLI
//! shift them to 1-based.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{check_classes, ClassId, PandsQueue, State, SwappingGraph};
use crate::rate::RateModel;

/// Result of a service completion: `δ_p(c) = (d, i)` plus the chain of
/// positions visited.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompletionOutcome {
    pub next_state: State,
    pub departing_class: ClassId,
    /// `p_1 < p_2 < … < p_u`, 0-based, with `p_1` the completing position.
    pub swap_chain: Vec<usize>,
}

impl CompletionOutcome {
    pub fn chain_one_based(&self) -> Vec<usize> {
        self.swap_chain.iter().map(|p| p + 1).collect()
    }
}

/// Applies the completion of the customer in position `p` of `c`.
///
/// The completing customer scans forward for the first customer it can swap
/// with and takes that position; the ejected customer does the same, until
/// one finds nobody to swap with and leaves.
pub fn complete(graph: &SwappingGraph, c: &[ClassId], p: usize) -> Result<CompletionOutcome> {
    if p >= c.len() {
        return Err(Error::Usage(format!(
            "position {} is outside 1..={}",
            p + 1,
            c.len()
        )));
    }
    check_classes(c, graph.n_classes())?;
    let mut next = c.to_vec();
    let mut chain = vec![p];
    let mut pos = p;
    let mut moving = c[p];
    while let Some(q) = (pos + 1..c.len()).find(|&q| graph.adjacent(moving, c[q])) {
        next[q] = moving;
        moving = c[q];
        pos = q;
        chain.push(q);
    }
    next.remove(p);
    Ok(CompletionOutcome {
        next_state: State::new(next),
        departing_class: moving,
        swap_chain: chain,
    })
}

/// [`complete`] using the queue's swapping graph.
pub fn apply_completion(queue: &PandsQueue, c: &[ClassId], p: usize) -> Result<CompletionOutcome> {
    complete(&queue.swapping, c, p)
}

/// All `(d, p)` such that the completion in position `p` of `d` leads to
/// `c` with a departure of class `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredecessorSet {
    pub entries: Vec<(State, usize)>,
}

impl PredecessorSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, d: &State, p: usize) -> bool {
        self.entries.iter().any(|(e, q)| e == d && *q == p)
    }
}

/// Constructive predecessor enumeration.
///
/// Walking backwards from the tail, `q_v` is the last position before
/// `q_{v-1}` holding a class swappable with `i_{v-1}`, and `i_v = c_{q_v}`.
/// For each `v`, inserting `i_v` anywhere in `(q_{v+1}, q_v]` after rolling
/// back the swaps at `q_1..q_v` gives a predecessor.
pub fn predecessors(graph: &SwappingGraph, c: &[ClassId], i: ClassId) -> Result<PredecessorSet> {
    check_classes(c, graph.n_classes())?;
    check_classes(&[i], graph.n_classes())?;
    // q[v] as a signed index so that the sentinel q_u = -1 fits.
    let mut q: Vec<isize> = vec![c.len() as isize];
    let mut classes = vec![i];
    loop {
        let prev_q = q[q.len() - 1];
        let prev_class = classes[classes.len() - 1];
        match (0..prev_q as usize)
            .rev()
            .find(|&k| graph.adjacent(prev_class, c[k]))
        {
            Some(k) => {
                q.push(k as isize);
                classes.push(c[k]);
            }
            None => {
                q.push(-1);
                break;
            }
        }
    }
    let u = classes.len();
    let mut entries = Vec::new();
    let mut base = c.to_vec();
    for v in 0..u {
        if v > 0 {
            base[q[v] as usize] = classes[v - 1];
        }
        let lo = (q[v + 1] + 1) as usize;
        let hi = q[v] as usize;
        for p in lo..=hi {
            let mut d = base.clone();
            d.insert(p, classes[v]);
            entries.push((State::new(d), p));
        }
    }
    Ok(PredecessorSet { entries })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    Arrival {
        class: ClassId,
    },
    /// 0-based completing position.
    Completion {
        position: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub event: Event,
    pub next: State,
    pub rate: f64,
}

/// Outgoing transitions of an open queue in state `c`. Completions with a
/// zero rate are left out.
pub fn open_transitions(queue: &PandsQueue, c: &[ClassId]) -> Result<Vec<Transition>> {
    let mut out = Vec::with_capacity(queue.n_classes() + c.len());
    for (k, &lambda) in queue.arrival_rates.iter().enumerate() {
        let mut next = c.to_vec();
        next.push(ClassId::new(k));
        out.push(Transition {
            event: Event::Arrival {
                class: ClassId::new(k),
            },
            next: State::new(next),
            rate: lambda,
        });
    }
    completion_transitions(queue, c, &mut out)?;
    Ok(out)
}

pub(crate) fn completion_transitions(
    queue: &PandsQueue,
    c: &[ClassId],
    out: &mut Vec<Transition>,
) -> Result<()> {
    let incs = queue.rate_fn.increments(c)?;
    for (p, &rate) in incs.iter().enumerate() {
        if rate > 0.0 {
            let o = complete(&queue.swapping, c, p)?;
            out.push(Transition {
                event: Event::Completion { position: p },
                next: o.next_state,
                rate,
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> SwappingGraph {
        SwappingGraph::one_based(3, &[(1, 2), (2, 3)]).unwrap()
    }

    fn six_class_graph() -> SwappingGraph {
        SwappingGraph::one_based(6, &[(6, 3), (3, 1), (1, 4), (4, 2), (2, 5), (5, 6), (6, 4)])
            .unwrap()
    }

    #[test]
    fn three_class_completion() {
        let c = State::one_based(&[1, 3, 3, 2, 2, 3, 1, 2]);
        let o = complete(&path3(), &c, 0).unwrap();
        assert_eq!(o.next_state, State::one_based(&[3, 3, 1, 2, 2, 1, 3]));
        assert_eq!(o.departing_class, ClassId::one_based(2));
        assert_eq!(o.chain_one_based(), vec![1, 4, 6, 8]);
    }

    #[test]
    fn six_class_first_transition() {
        let o = complete(
            &six_class_graph(),
            &State::one_based(&[1, 2, 3, 4, 5, 6]),
            0,
        )
        .unwrap();
        assert_eq!(o.next_state, State::one_based(&[2, 1, 4, 5, 3]));
        assert_eq!(o.departing_class, ClassId::one_based(6));
        assert_eq!(o.chain_one_based(), vec![1, 3, 6]);
    }

    #[test]
    fn edgeless_graph_removes_completing_customer() {
        let g = SwappingGraph::edgeless(3);
        let c = State::one_based(&[2, 1, 3, 1]);
        for p in 0..c.len() {
            let o = complete(&g, &c, p).unwrap();
            let mut expected = c.to_vec();
            let gone = expected.remove(p);
            assert_eq!(o.next_state.classes(), &expected[..]);
            assert_eq!(o.departing_class, gone);
            assert_eq!(o.swap_chain, vec![p]);
        }
    }

    #[test]
    fn out_of_range_position() {
        assert!(matches!(
            complete(&path3(), &State::one_based(&[1]), 1),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn predecessors_of_empty_state() {
        let set = predecessors(&SwappingGraph::edgeless(2), &[], ClassId(0)).unwrap();
        assert_eq!(set.entries, vec![(State::one_based(&[1]), 0)]);
    }

    #[test]
    fn predecessors_invert_three_class_completion() {
        let c = State::one_based(&[3, 3, 1, 2, 2, 1, 3]);
        let set = predecessors(&path3(), &c, ClassId::one_based(2)).unwrap();
        assert!(set.contains(&State::one_based(&[1, 3, 3, 2, 2, 3, 1, 2]), 0));
        for (d, p) in &set.entries {
            let o = complete(&path3(), d, *p).unwrap();
            assert_eq!(o.next_state, c);
            assert_eq!(o.departing_class, ClassId::one_based(2));
        }
    }

    #[test]
    fn empty_state_has_only_arrivals() {
        let q = PandsQueue::new(
            vec![0.5, 0.7],
            crate::rate::MultiServer::one_based(vec![1.0, 1.0, 1.0], &[&[1, 3], &[2, 3]])
                .unwrap()
                .into(),
            SwappingGraph::edgeless(2),
        )
        .unwrap();
        let ts = open_transitions(&q, &[]).unwrap();
        assert_eq!(ts.len(), 2);
        assert!(ts.iter().all(|t| matches!(t.event, Event::Arrival { .. })));
    }
}
