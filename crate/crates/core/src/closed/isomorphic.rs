//! Isomorphic queue: every customer of the initial state gets its own class.
//!
//! Scanning the initial state from the head, the k-th repeated occurrence of
//! class `i` is given a fresh class `i` followed by k primes. A fresh class
//! has the rate increments of its original and is adjacent to every class
//! whose original is adjacent to its own original, except copies of itself.

use serde::Serialize;

use super::single::ClosedQueue;
use crate::error::{Error, Result};
use crate::model::{check_classes, ClassId, Macrostate, State, SwappingGraph};
use crate::rate::{Projected, RateFunction};

#[derive(Debug, Clone)]
pub struct IsomorphicModel {
    pub original_classes: usize,
    /// Iso class to original class.
    pub projection: Vec<ClassId>,
    /// Original class to its iso classes, the original first.
    pub split_map: Vec<Vec<ClassId>>,
    /// Display names such as `1`, `1'`, `2''`.
    pub labels: Vec<String>,
    pub iso_queue: ClosedQueue,
    pub iso_initial: State,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IsoSummary {
    pub labels: Vec<String>,
    pub initial: Vec<String>,
    pub min_fiber: usize,
    pub max_fiber: usize,
}

impl IsomorphicModel {
    pub fn project(&self, c: &[ClassId]) -> State {
        c.iter().map(|k| self.projection[k.index()]).collect()
    }

    pub fn label_state(&self, c: &[ClassId]) -> Vec<String> {
        c.iter().map(|k| self.labels[k.index()].clone()).collect()
    }

    pub(crate) fn summary(&self, min_fiber: usize, max_fiber: usize) -> IsoSummary {
        IsoSummary {
            labels: self.labels.clone(),
            initial: self.label_state(&self.iso_initial),
            min_fiber,
            max_fiber,
        }
    }
}

pub fn isomorphic_model(q: &ClosedQueue, initial: &State) -> Result<IsomorphicModel> {
    let n = q.n_classes();
    check_classes(initial, n)?;
    if initial.macrostate(n) != q.population {
        return Err(Error::Usage(format!(
            "initial state {initial} does not have the queue's population {:?}",
            q.population.0
        )));
    }
    if q.swapping.has_loops() {
        return Err(Error::Structure(
            "isomorphic queues need a loop-free swapping graph".into(),
        ));
    }
    let mut projection: Vec<ClassId> = (0..n).map(ClassId::new).collect();
    let mut split_map: Vec<Vec<ClassId>> = (0..n).map(|i| vec![ClassId::new(i)]).collect();
    let mut labels: Vec<String> = (1..=n).map(|i| i.to_string()).collect();
    let mut seen = vec![0usize; n];
    let mut iso_initial = Vec::with_capacity(initial.len());
    for &k in initial.iter() {
        let copies = seen[k.index()];
        seen[k.index()] += 1;
        if copies == 0 {
            iso_initial.push(k);
        } else {
            let fresh = ClassId::new(projection.len());
            projection.push(k);
            split_map[k.index()].push(fresh);
            labels.push(format!("{}{}", k, "'".repeat(copies)));
            iso_initial.push(fresh);
        }
    }
    let m = projection.len();
    let mut graph = SwappingGraph::edgeless(m);
    for a in 0..m {
        for b in a + 1..m {
            let (pa, pb) = (projection[a], projection[b]);
            if pa != pb && q.swapping.adjacent(pa, pb) {
                graph.add_edge(ClassId::new(a), ClassId::new(b))?;
            }
        }
    }
    let rate_fn = RateFunction::Projected(Projected::new(q.rate_fn.clone(), projection.clone())?);
    let iso_queue = ClosedQueue::new(rate_fn, graph, Macrostate(vec![1; m]))?;
    Ok(IsomorphicModel {
        original_classes: n,
        projection,
        split_map,
        labels,
        iso_queue,
        iso_initial: State::new(iso_initial),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed::PlacementOrder;
    use crate::rate::RateTable;

    fn triangle_queue(initial: &State) -> ClosedQueue {
        let rate: RateFunction = RateTable::from_fn_total(3, 6, |x| x.total() as f64)
            .unwrap()
            .into();
        ClosedQueue::from_initial(rate, SwappingGraph::complete(3, false), initial).unwrap()
    }

    #[test]
    fn triangle_split() {
        let initial = State::one_based(&[1, 2, 1, 2, 2, 3]);
        let iso = isomorphic_model(&triangle_queue(&initial), &initial).unwrap();
        assert_eq!(
            iso.label_state(&iso.iso_initial),
            vec!["1", "2", "1'", "2'", "2''", "3"]
        );
        assert_eq!(iso.labels, vec!["1", "2", "3", "1'", "2'", "2''"]);
        let g = &iso.iso_queue.swapping;
        // 1' is adjacent to 2, 3, 2', 2'' but not 1
        let one_p = ClassId(3);
        let adj: Vec<&str> = g
            .neighbors(one_p)
            .iter()
            .map(|k| iso.labels[k.index()].as_str())
            .collect();
        assert_eq!(adj, vec!["2", "3", "2'", "2''"]);
        assert!(PlacementOrder::induced_by(g, &iso.iso_initial).is_some());
        assert_eq!(iso.project(&iso.iso_initial), initial);
    }

    #[test]
    fn distinct_classes_give_identity() {
        let initial = State::one_based(&[2, 3, 1]);
        let iso = isomorphic_model(&triangle_queue(&initial), &initial).unwrap();
        assert_eq!(iso.iso_initial, initial);
        assert_eq!(iso.projection.len(), 3);
    }
}
