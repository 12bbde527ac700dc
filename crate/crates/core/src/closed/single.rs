//! Closed single queue: completed customers rejoin the tail.

use rayon::prelude::*;
use serde::Serialize;

use super::isomorphic::{isomorphic_model, IsoSummary};
use super::placement::PlacementOrder;
use super::{analyze_space, normalize_logs, PartitionSummary};
use crate::dynamics::complete;
use crate::error::{Error, Result};
use crate::model::{check_classes, ClassId, Macrostate, State, SwappingGraph};
use crate::product_form::log_balance;
use crate::rate::{RateFunction, RateModel};

#[derive(Debug, Clone)]
pub struct ClosedQueue {
    pub rate_fn: RateFunction,
    pub swapping: SwappingGraph,
    /// `ℓ`, every component positive.
    pub population: Macrostate,
}

impl ClosedQueue {
    pub fn new(
        rate_fn: RateFunction,
        swapping: SwappingGraph,
        population: Macrostate,
    ) -> Result<Self> {
        let n = population.n_classes();
        if rate_fn.n_classes() != n || swapping.n_classes() != n {
            return Err(Error::Usage(format!(
                "class counts disagree: population {n}, rate function {}, swapping graph {}",
                rate_fn.n_classes(),
                swapping.n_classes()
            )));
        }
        if let Some(i) = population.0.iter().position(|&x| x == 0) {
            return Err(Error::Usage(format!(
                "class {} has no customer in the closed queue",
                i + 1
            )));
        }
        Ok(ClosedQueue {
            rate_fn,
            swapping,
            population,
        })
    }

    /// Queue whose population is the macrostate of `initial`.
    pub fn from_initial(
        rate_fn: RateFunction,
        swapping: SwappingGraph,
        initial: &State,
    ) -> Result<Self> {
        check_classes(initial, swapping.n_classes())?;
        let population = initial.macrostate(swapping.n_classes());
        Self::new(rate_fn, swapping, population)
    }

    pub fn n_classes(&self) -> usize {
        self.population.n_classes()
    }
}

/// Completion in position `p`, then the departing customer rejoins the tail.
pub fn closed_step(q: &ClosedQueue, c: &[ClassId], p: usize) -> Result<State> {
    let o = complete(&q.swapping, c, p)?;
    let mut next = o.next_state;
    next.push(o.departing_class);
    Ok(next)
}

/// `(position, next state, rate)` for every completion with a positive rate.
pub fn closed_transitions(q: &ClosedQueue, c: &[ClassId]) -> Result<Vec<(usize, State, f64)>> {
    let incs = q.rate_fn.increments(c)?;
    let mut out = Vec::new();
    for (p, &r) in incs.iter().enumerate() {
        if r > 0.0 {
            out.push((p, closed_step(q, c, p)?, r));
        }
    }
    Ok(out)
}

/// All states with macrostate `population` that adhere to `order`, in
/// lexicographic order.
pub fn enumerate_adhering(
    order: &PlacementOrder,
    population: &Macrostate,
    budget: usize,
) -> Result<Vec<State>> {
    let n = order.n_classes();
    if population.n_classes() != n {
        return Err(Error::Usage(format!(
            "population has {} classes, order has {n}",
            population.n_classes()
        )));
    }
    let total = population.total() as usize;
    let mut out = Vec::new();
    let mut remaining = population.0.clone();
    let mut placed = vec![0u32; n];
    let mut current: Vec<ClassId> = Vec::with_capacity(total);
    // Explicit stack of the next class to try at each depth.
    let mut next_try = vec![0usize; total + 1];
    loop {
        let depth = current.len();
        if depth == total {
            out.push(State::new(current.clone()));
            if out.len() > budget {
                return Err(Error::Resource {
                    context: "enumerating adhering states".into(),
                    count: out.len(),
                    budget,
                });
            }
        }
        let mut advanced = false;
        if depth < total {
            while next_try[depth] < n {
                let j = next_try[depth];
                next_try[depth] += 1;
                let cj = ClassId::new(j);
                if remaining[j] > 0
                    && (0..n).all(|i| placed[i] == 0 || !order.precedes(cj, ClassId::new(i)))
                {
                    remaining[j] -= 1;
                    placed[j] += 1;
                    current.push(cj);
                    next_try[depth + 1] = 0;
                    advanced = true;
                    break;
                }
            }
        }
        if !advanced {
            match current.pop() {
                Some(k) => {
                    remaining[k.index()] += 1;
                    placed[k.index()] -= 1;
                }
                None => break,
            }
        }
    }
    Ok(out)
}

/// Stationary distribution of a closed queue started in `initial`.
#[derive(Debug, Clone, Serialize)]
pub struct ClosedDistribution {
    /// Support, lexicographically sorted.
    #[serde(skip)]
    pub states: Vec<State>,
    pub probs: Vec<f64>,
    /// Placement order of the initial state; `None` when the initial state
    /// adheres to no order and the isomorphic queue was used.
    #[serde(skip)]
    pub order: Option<PlacementOrder>,
    /// Number of states enumerated before the class analysis.
    pub enumerated: usize,
    pub partition: PartitionSummary,
    pub warnings: Vec<String>,
    pub iso: Option<IsoSummary>,
}

impl ClosedDistribution {
    pub fn prob(&self, c: &State) -> f64 {
        self.states.binary_search(c).map_or(0.0, |k| self.probs[k])
    }
}

/// `π(c) ∝ Φ(c)` over the adhering states reachable from `initial`.
/// Non-adhering initial states go through the isomorphic queue.
pub fn stationary_closed(
    q: &ClosedQueue,
    initial: &State,
    budget: usize,
) -> Result<ClosedDistribution> {
    check_classes(initial, q.n_classes())?;
    if initial.macrostate(q.n_classes()) != q.population {
        return Err(Error::Usage(format!(
            "initial state {initial} does not have the queue's population {:?}",
            q.population.0
        )));
    }
    match PlacementOrder::induced_by(&q.swapping, initial) {
        Some(order) => direct(q, initial, order, budget),
        None if q.swapping.has_loops() => Err(Error::Structure(
            "the swapping graph has a loop, so no placement order exists".into(),
        )),
        None => via_isomorphic(q, initial, budget),
    }
}

fn direct(
    q: &ClosedQueue,
    initial: &State,
    order: PlacementOrder,
    budget: usize,
) -> Result<ClosedDistribution> {
    let states = enumerate_adhering(&order, &q.population, budget)?;
    let analysis = analyze_space(&states, initial, |c| {
        Ok(closed_transitions(q, c)?
            .into_iter()
            .map(|(_, s, _)| s)
            .collect())
    })?;
    let support: Vec<State> = analysis
        .support
        .iter()
        .map(|&k| states[k].clone())
        .collect();
    let logs = support
        .par_iter()
        .map(|c| log_balance(&q.rate_fn, c))
        .collect::<Result<Vec<f64>>>()?;
    Ok(ClosedDistribution {
        probs: normalize_logs(&logs),
        states: support,
        order: Some(order),
        enumerated: states.len(),
        partition: PartitionSummary::of(&analysis.partition),
        warnings: analysis.warnings,
        iso: None,
    })
}

fn via_isomorphic(q: &ClosedQueue, initial: &State, budget: usize) -> Result<ClosedDistribution> {
    let iso = isomorphic_model(q, initial)?;
    let order =
        PlacementOrder::induced_by(&iso.iso_queue.swapping, &iso.iso_initial).ok_or_else(|| {
            Error::Structure("isomorphic initial state adheres to no placement order".into())
        })?;
    let inner = direct(&iso.iso_queue, &iso.iso_initial, order, budget)?;
    let mut projected: Vec<(State, f64)> = inner
        .states
        .iter()
        .zip(&inner.probs)
        .map(|(c, p)| (iso.project(c), *p))
        .collect();
    projected.sort_by(|a, b| a.0.cmp(&b.0));
    let mut states: Vec<State> = Vec::new();
    let mut probs = Vec::new();
    let mut fibers: Vec<usize> = Vec::new();
    for (c, p) in projected {
        if states.last() == Some(&c) {
            *probs.last_mut().unwrap() += p;
            *fibers.last_mut().unwrap() += 1;
        } else {
            states.push(c);
            probs.push(p);
            fibers.push(1);
        }
    }
    let mut warnings = inner.warnings;
    let min_fiber = fibers.iter().copied().min().unwrap_or(0);
    let max_fiber = fibers.iter().copied().max().unwrap_or(0);
    if min_fiber != max_fiber {
        warnings.push(format!(
            "fiber sizes differ: min {min_fiber}, max {max_fiber}"
        ));
    }
    warnings.insert(
        0,
        format!("initial state {initial} adheres to no placement order; analyzed through the isomorphic queue"),
    );
    Ok(ClosedDistribution {
        states,
        probs,
        order: None,
        enumerated: inner.enumerated,
        partition: inner.partition,
        warnings,
        iso: Some(iso.summary(min_fiber, max_fiber)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rate::RateTable;

    fn six_class_graph() -> SwappingGraph {
        SwappingGraph::one_based(6, &[(6, 3), (3, 1), (1, 4), (4, 2), (2, 5), (5, 6), (6, 4)])
            .unwrap()
    }

    fn unit_table(n: usize, total: u32) -> RateFunction {
        RateTable::from_fn_total(n, total, |x| x.total() as f64)
            .unwrap()
            .into()
    }

    #[test]
    fn six_class_closed_steps() {
        let q =
            ClosedQueue::new(unit_table(6, 6), six_class_graph(), Macrostate(vec![1; 6])).unwrap();
        let a = closed_step(&q, &State::one_based(&[1, 2, 3, 4, 5, 6]), 0).unwrap();
        assert_eq!(a, State::one_based(&[2, 1, 4, 5, 3, 6]));
        let b = closed_step(&q, &a, 0).unwrap();
        assert_eq!(b, State::one_based(&[1, 2, 5, 3, 4, 6]));
        assert_eq!(closed_step(&q, &b, 5).unwrap(), b);
    }

    #[test]
    fn two_class_order() {
        let o = PlacementOrder::one_based(2, &[(1, 2)]).unwrap();
        let states = enumerate_adhering(&o, &Macrostate(vec![1, 1]), 10).unwrap();
        assert_eq!(states, vec![State::one_based(&[1, 2])]);
    }

    #[test]
    fn adhering_count_with_multiplicity() {
        // 1 < 2 with ℓ = (2, 1): only (1,1,2)
        let o = PlacementOrder::one_based(3, &[(1, 2)]).unwrap();
        let states = enumerate_adhering(&o, &Macrostate(vec![2, 1, 1]), 100).unwrap();
        // class 3 is free: (1,1,2) with 3 inserted anywhere -> 4 states
        assert_eq!(states.len(), 4);
        assert!(states.iter().all(|s| o.adheres(s)));
    }

    #[test]
    fn unit_increments_give_uniform_distribution() {
        let q =
            ClosedQueue::new(unit_table(6, 6), six_class_graph(), Macrostate(vec![1; 6])).unwrap();
        let d = stationary_closed(&q, &State::one_based(&[1, 2, 3, 4, 5, 6]), 100_000).unwrap();
        assert!(d.warnings.is_empty(), "{:?}", d.warnings);
        let u = 1.0 / d.states.len() as f64;
        assert!(d.probs.iter().all(|p| (p - u).abs() < 1e-12));
        assert_eq!(d.partition.components, 1);
    }

    #[test]
    fn budget_is_enforced() {
        let o = PlacementOrder::from_arcs(4, &[]).unwrap();
        assert!(matches!(
            enumerate_adhering(&o, &Macrostate(vec![1; 4]), 10),
            Err(Error::Resource { .. })
        ));
    }
}
