//! Closed tandem of two P&S queues sharing a swapping graph: a customer
//! leaving one queue joins the tail of the other.

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use super::placement::PlacementOrder;
use super::single::enumerate_adhering;
use super::{analyze_space, normalize_logs, PartitionSummary};
use crate::dynamics::{complete, CompletionOutcome};
use crate::error::{Error, Result};
use crate::model::{check_classes, ClassId, Macrostate, State, SwappingGraph};
use crate::product_form::log_balance;
use crate::rate::{RateFunction, RateModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QueueIndex {
    First,
    Second,
}

impl QueueIndex {
    pub fn other(self) -> Self {
        match self {
            QueueIndex::First => QueueIndex::Second,
            QueueIndex::Second => QueueIndex::First,
        }
    }

    /// 1 or 2.
    pub fn number(self) -> usize {
        match self {
            QueueIndex::First => 1,
            QueueIndex::Second => 2,
        }
    }

    pub fn from_number(k: usize) -> Result<Self> {
        match k {
            1 => Ok(QueueIndex::First),
            2 => Ok(QueueIndex::Second),
            _ => Err(Error::Usage(format!("queue index must be 1 or 2, got {k}"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TandemState {
    pub first: State,
    pub second: State,
}

impl TandemState {
    pub fn new(first: State, second: State) -> Self {
        TandemState { first, second }
    }

    pub fn queue(&self, q: QueueIndex) -> &State {
        match q {
            QueueIndex::First => &self.first,
            QueueIndex::Second => &self.second,
        }
    }

    pub fn macrostate(&self, n_classes: usize) -> Macrostate {
        self.first
            .macrostate(n_classes)
            .add(&self.second.macrostate(n_classes))
    }
}

impl fmt::Display for TandemState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |s: &State| {
            s.iter()
                .map(|k| k.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        write!(f, "({};{})", join(&self.first), join(&self.second))
    }
}

#[derive(Debug, Clone)]
pub struct TandemNetwork {
    /// `μ`, first queue.
    pub rate_fn_1: RateFunction,
    /// `ν`, second queue.
    pub rate_fn_2: RateFunction,
    pub swapping: SwappingGraph,
    pub population: Macrostate,
}

impl TandemNetwork {
    pub fn new(
        rate_fn_1: RateFunction,
        rate_fn_2: RateFunction,
        swapping: SwappingGraph,
        population: Macrostate,
    ) -> Result<Self> {
        let n = population.n_classes();
        if rate_fn_1.n_classes() != n || rate_fn_2.n_classes() != n || swapping.n_classes() != n {
            return Err(Error::Usage(format!(
                "class counts disagree: population {n}, first rate function {}, second rate function {}, swapping graph {}",
                rate_fn_1.n_classes(),
                rate_fn_2.n_classes(),
                swapping.n_classes()
            )));
        }
        if let Some(i) = population.0.iter().position(|&x| x == 0) {
            return Err(Error::Usage(format!(
                "class {} has no customer in the network",
                i + 1
            )));
        }
        Ok(TandemNetwork {
            rate_fn_1,
            rate_fn_2,
            swapping,
            population,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.population.n_classes()
    }

    pub fn rate_fn(&self, q: QueueIndex) -> &RateFunction {
        match q {
            QueueIndex::First => &self.rate_fn_1,
            QueueIndex::Second => &self.rate_fn_2,
        }
    }

    /// The placement order `initial` adheres to, if any.
    pub fn order_of(&self, initial: &TandemState) -> Option<PlacementOrder> {
        let joined: Vec<ClassId> = initial
            .first
            .iter()
            .chain(initial.second.iter().rev())
            .copied()
            .collect();
        PlacementOrder::induced_by(&self.swapping, &joined)
    }
}

/// Completion in position `p` of queue `q`; the departing customer joins the
/// other queue.
pub fn tandem_step_detailed(
    net: &TandemNetwork,
    s: &TandemState,
    q: QueueIndex,
    p: usize,
) -> Result<(TandemState, CompletionOutcome)> {
    let o = complete(&net.swapping, s.queue(q), p)?;
    let mut other = s.queue(q.other()).clone();
    other.push(o.departing_class);
    let next = match q {
        QueueIndex::First => TandemState::new(o.next_state.clone(), other),
        QueueIndex::Second => TandemState::new(other, o.next_state.clone()),
    };
    Ok((next, o))
}

pub fn tandem_step(
    net: &TandemNetwork,
    s: &TandemState,
    q: QueueIndex,
    p: usize,
) -> Result<TandemState> {
    Ok(tandem_step_detailed(net, s, q, p)?.0)
}

/// `(queue, position, next, rate)` for every completion with a positive rate.
pub fn tandem_transitions(
    net: &TandemNetwork,
    s: &TandemState,
) -> Result<Vec<(QueueIndex, usize, TandemState, f64)>> {
    let mut out = Vec::new();
    for q in [QueueIndex::First, QueueIndex::Second] {
        let incs = net.rate_fn(q).increments(s.queue(q))?;
        for (p, &r) in incs.iter().enumerate() {
            if r > 0.0 {
                out.push((q, p, tandem_step(net, s, q, p)?, r));
            }
        }
    }
    Ok(out)
}

/// All tandem states with total macrostate `population` that adhere to
/// `order`. Cutting each adhering sequence `e` at every point `k` and
/// reversing the tail gives `(e_1..e_k ; e_n..e_{k+1})`, which is a bijection.
pub fn enumerate_sigma(
    order: &PlacementOrder,
    population: &Macrostate,
    budget: usize,
) -> Result<Vec<TandemState>> {
    let total = population.total() as usize;
    let seqs = enumerate_adhering(order, population, budget / (total + 1) + 1)?;
    let count = seqs.len() * (total + 1);
    if count > budget {
        return Err(Error::Resource {
            context: "enumerating tandem states".into(),
            count,
            budget,
        });
    }
    let mut out = Vec::with_capacity(count);
    for e in &seqs {
        for k in 0..=total {
            out.push(TandemState::new(
                State::new(e[..k].to_vec()),
                State::new(e[k..].iter().rev().copied().collect()),
            ));
        }
    }
    out.sort();
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct TandemDistribution {
    /// Support, sorted.
    #[serde(skip)]
    pub states: Vec<TandemState>,
    pub probs: Vec<f64>,
    #[serde(skip)]
    pub order: PlacementOrder,
    pub enumerated: usize,
    pub partition: PartitionSummary,
    pub warnings: Vec<String>,
}

impl TandemDistribution {
    pub fn prob(&self, s: &TandemState) -> f64 {
        self.states.binary_search(s).map_or(0.0, |k| self.probs[k])
    }

    /// Probability of each first-queue state.
    pub fn first_marginal(&self) -> Vec<(State, f64)> {
        let mut v: Vec<(State, f64)> = self
            .states
            .iter()
            .map(|s| s.first.clone())
            .zip(self.probs.iter().copied())
            .collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        let mut out: Vec<(State, f64)> = Vec::new();
        for (c, p) in v {
            match out.last_mut() {
                Some(last) if last.0 == c => last.1 += p,
                _ => out.push((c, p)),
            }
        }
        out
    }
}

/// `π(c;d) ∝ Φ(c)Λ(d)` over the adhering states reachable from `initial`.
pub fn stationary_tandem(
    net: &TandemNetwork,
    initial: &TandemState,
    budget: usize,
) -> Result<TandemDistribution> {
    check_classes(&initial.first, net.n_classes())?;
    check_classes(&initial.second, net.n_classes())?;
    if initial.macrostate(net.n_classes()) != net.population {
        return Err(Error::Usage(format!(
            "initial state {initial} does not have the network population {:?}",
            net.population.0
        )));
    }
    let order = net.order_of(initial).ok_or_else(|| {
        Error::Unsupported(format!(
            "tandem initial state {initial} adheres to no placement order; only adhering tandem states are analyzed"
        ))
    })?;
    let states = enumerate_sigma(&order, &net.population, budget)?;
    let analysis = analyze_space(&states, initial, |s| {
        Ok(tandem_transitions(net, s)?
            .into_iter()
            .map(|(_, _, t, _)| t)
            .collect())
    })?;
    let support: Vec<TandemState> = analysis
        .support
        .iter()
        .map(|&k| states[k].clone())
        .collect();
    let logs = support
        .par_iter()
        .map(|s| {
            Ok(log_balance(&net.rate_fn_1, &s.first)? + log_balance(&net.rate_fn_2, &s.second)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(TandemDistribution {
        probs: normalize_logs(&logs),
        states: support,
        order,
        enumerated: states.len(),
        partition: PartitionSummary::of(&analysis.partition),
        warnings: analysis.warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rate::{MultiServer, RateTable};

    fn six_class_net() -> TandemNetwork {
        let g =
            SwappingGraph::one_based(6, &[(6, 3), (3, 1), (1, 4), (4, 2), (2, 5), (5, 6), (6, 4)])
                .unwrap();
        let mu: RateFunction = RateTable::from_fn_total(6, 6, |x| x.total() as f64)
            .unwrap()
            .into();
        let nu: RateFunction = MultiServer::new(vec![1.0], vec![vec![0]; 6])
            .unwrap()
            .into();
        TandemNetwork::new(mu, nu, g, Macrostate(vec![1; 6])).unwrap()
    }

    #[test]
    fn six_class_tandem_first_step() {
        let net = six_class_net();
        let s = TandemState::new(State::one_based(&[1, 2, 3, 4, 5, 6]), State::empty());
        let t = tandem_step(&net, &s, QueueIndex::First, 0).unwrap();
        assert_eq!(
            t,
            TandemState::new(State::one_based(&[2, 1, 4, 5, 3]), State::one_based(&[6]))
        );
    }

    #[test]
    fn single_customer_in_second_queue_moves_to_first() {
        let net = six_class_net();
        let s = TandemState::new(State::one_based(&[1, 2, 3, 4, 5]), State::one_based(&[6]));
        let t = tandem_step(&net, &s, QueueIndex::Second, 0).unwrap();
        assert_eq!(
            t,
            TandemState::new(State::one_based(&[1, 2, 3, 4, 5, 6]), State::empty())
        );
    }

    #[test]
    fn sigma_matches_brute_force_filter() {
        let net = six_class_net();
        let order = net
            .order_of(&TandemState::new(
                State::one_based(&[1, 2, 3, 4, 5, 6]),
                State::empty(),
            ))
            .unwrap();
        let sigma = enumerate_sigma(&order, &net.population, 1_000_000).unwrap();
        let mut brute = 0;
        let perms = permutations(6);
        for perm in &perms {
            for k in 0..=6 {
                let c: Vec<ClassId> = perm[..k].iter().map(|&i| ClassId::new(i)).collect();
                let d: Vec<ClassId> = perm[k..].iter().map(|&i| ClassId::new(i)).collect();
                if order.adheres_tandem(&c, &d) {
                    brute += 1;
                }
            }
        }
        assert_eq!(sigma.len(), brute);
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for k in 0..=p.len() {
                let mut q = p.clone();
                q.insert(k, n - 1);
                out.push(q);
            }
        }
        out
    }
}
