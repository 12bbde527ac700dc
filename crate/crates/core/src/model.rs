//! Classes, queue states, macrostates, swapping graphs and the open queue model.

use std::fmt;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rate::{RateFunction, RateModel};

/// Customer (or token) class, 0-based internally.
///
/// External formats and `Display` use 1-based numbering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClassId(pub u16);

impl ClassId {
    pub fn new(index: usize) -> Self {
        ClassId(index as u16)
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// Builds a class id from its 1-based external label.
    pub fn one_based(label: usize) -> Self {
        assert!(label >= 1, "class labels are 1-based");
        ClassId((label - 1) as u16)
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0 + 1)
    }
}

/// Queue state: the classes of present customers in arrival order, head first.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct State(Vec<ClassId>);

impl State {
    pub fn empty() -> Self {
        State(Vec::new())
    }

    pub fn new(classes: Vec<ClassId>) -> Self {
        State(classes)
    }

    /// State from 0-based class indices.
    pub fn from_indices(indices: &[usize]) -> Self {
        State(indices.iter().map(|&i| ClassId::new(i)).collect())
    }

    /// State from 1-based class labels, as written in files.
    pub fn one_based(labels: &[usize]) -> Self {
        State(labels.iter().map(|&i| ClassId::one_based(i)).collect())
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.0.iter().map(|c| c.index() + 1).collect()
    }

    pub fn classes(&self) -> &[ClassId] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<ClassId> {
        self.0
    }

    pub fn push(&mut self, class: ClassId) {
        self.0.push(class);
    }

    /// `c_{1..p}` with `p` counted in customers (0 gives the empty state).
    pub fn prefix(&self, p: usize) -> State {
        State(self.0[..p].to_vec())
    }

    pub fn concat(&self, other: &State) -> State {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        State(v)
    }

    pub fn reversed(&self) -> State {
        State(self.0.iter().rev().copied().collect())
    }

    pub fn macrostate(&self, n_classes: usize) -> Macrostate {
        Macrostate::of(&self.0, n_classes)
    }

    /// Applies a class relabelling to every customer.
    pub fn map_classes(&self, f: impl Fn(ClassId) -> ClassId) -> State {
        State(self.0.iter().map(|&c| f(c)).collect())
    }
}

impl Deref for State {
    type Target = [ClassId];

    fn deref(&self) -> &[ClassId] {
        &self.0
    }
}

impl FromIterator<ClassId> for State {
    fn from_iter<T: IntoIterator<Item = ClassId>>(iter: T) -> Self {
        State(iter.into_iter().collect())
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "()");
        }
        write!(f, "(")?;
        for (k, c) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Per-class customer counts.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Macrostate(pub Vec<u32>);

impl Macrostate {
    pub fn zero(n_classes: usize) -> Self {
        Macrostate(vec![0; n_classes])
    }

    pub fn of(classes: &[ClassId], n_classes: usize) -> Self {
        let mut counts = vec![0; n_classes];
        for c in classes {
            counts[c.index()] += 1;
        }
        Macrostate(counts)
    }

    /// `e_i`.
    pub fn unit(n_classes: usize, i: ClassId) -> Self {
        let mut m = Self::zero(n_classes);
        m.0[i.index()] = 1;
        m
    }

    /// `m * e_A` for a class subset `A`.
    pub fn scaled_indicator(n_classes: usize, subset: &[ClassId], m: u32) -> Self {
        let mut x = Self::zero(n_classes);
        for i in subset {
            x.0[i.index()] = m;
        }
        x
    }

    pub fn n_classes(&self) -> usize {
        self.0.len()
    }

    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn get(&self, i: ClassId) -> u32 {
        self.0[i.index()]
    }

    /// Componentwise `self <= other`.
    pub fn le(&self, other: &Macrostate) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    pub fn add(&self, other: &Macrostate) -> Macrostate {
        Macrostate(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// Componentwise difference; `None` if any component would go negative.
    pub fn checked_sub(&self, other: &Macrostate) -> Option<Macrostate> {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.checked_sub(*b))
            .collect::<Option<Vec<_>>>()
            .map(Macrostate)
    }

    /// Classes with a positive count.
    pub fn support(&self) -> Vec<ClassId> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &x)| x > 0)
            .map(|(i, _)| ClassId::new(i))
            .collect()
    }

    /// All macrostates `y` with `y <= self`, in lexicographic order.
    pub fn lower_set(&self) -> Vec<Macrostate> {
        let mut out = vec![Macrostate::zero(self.0.len())];
        for (i, &bound) in self.0.iter().enumerate() {
            let mut next = Vec::with_capacity(out.len() * (bound as usize + 1));
            for x in &out {
                for v in 0..=bound {
                    let mut y = x.clone();
                    y.0[i] = v;
                    next.push(y);
                }
            }
            out = next;
        }
        out
    }
}

/// Undirected graph on classes; loops allowed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwappingGraph {
    n_classes: usize,
    adjacency: Vec<Vec<bool>>,
    neighbors: Vec<Vec<ClassId>>,
}

impl SwappingGraph {
    pub fn edgeless(n_classes: usize) -> Self {
        SwappingGraph {
            n_classes,
            adjacency: vec![vec![false; n_classes]; n_classes],
            neighbors: vec![Vec::new(); n_classes],
        }
    }

    /// Builds a graph from 0-based edge endpoints.
    pub fn new(n_classes: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::edgeless(n_classes);
        for &(i, j) in edges {
            g.add_edge(ClassId::new(i), ClassId::new(j))?;
        }
        Ok(g)
    }

    /// Builds a graph from 1-based edge endpoints.
    pub fn one_based(n_classes: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::edgeless(n_classes);
        for &(i, j) in edges {
            if i == 0 || j == 0 {
                return Err(Error::Usage("class labels are 1-based".into()));
            }
            g.add_edge(ClassId::one_based(i), ClassId::one_based(j))?;
        }
        Ok(g)
    }

    pub fn complete(n_classes: usize, with_loops: bool) -> Self {
        let mut g = Self::edgeless(n_classes);
        for i in 0..n_classes {
            for j in i..n_classes {
                if i != j || with_loops {
                    g.add_edge(ClassId::new(i), ClassId::new(j))
                        .expect("valid classes");
                }
            }
        }
        g
    }

    pub fn add_edge(&mut self, i: ClassId, j: ClassId) -> Result<()> {
        if i.index() >= self.n_classes || j.index() >= self.n_classes {
            return Err(Error::Usage(format!(
                "edge {{{i},{j}}} references a class outside 1..={}",
                self.n_classes
            )));
        }
        if self.adjacency[i.index()][j.index()] {
            return Ok(());
        }
        self.adjacency[i.index()][j.index()] = true;
        self.adjacency[j.index()][i.index()] = true;
        self.neighbors[i.index()].push(j);
        self.neighbors[i.index()].sort_unstable();
        if i != j {
            self.neighbors[j.index()].push(i);
            self.neighbors[j.index()].sort_unstable();
        }
        Ok(())
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    #[inline]
    pub fn adjacent(&self, i: ClassId, j: ClassId) -> bool {
        self.adjacency[i.index()][j.index()]
    }

    /// `I_i`, in increasing class order.
    pub fn neighbors(&self, i: ClassId) -> &[ClassId] {
        &self.neighbors[i.index()]
    }

    pub fn has_loops(&self) -> bool {
        (0..self.n_classes).any(|i| self.adjacency[i][i])
    }

    /// Edges as `(i, j)` with `i <= j`, sorted.
    pub fn edges(&self) -> Vec<(ClassId, ClassId)> {
        let mut out = Vec::new();
        for i in 0..self.n_classes {
            for j in i..self.n_classes {
                if self.adjacency[i][j] {
                    out.push((ClassId::new(i), ClassId::new(j)));
                }
            }
        }
        out
    }
}

/// Open pass-and-swap queue: Poisson arrivals, an order-independent rate
/// function and a swapping graph over a shared class set.
#[derive(Debug, Clone)]
pub struct PandsQueue {
    pub arrival_rates: Vec<f64>,
    pub rate_fn: RateFunction,
    pub swapping: SwappingGraph,
}

impl PandsQueue {
    pub fn new(
        arrival_rates: Vec<f64>,
        rate_fn: RateFunction,
        swapping: SwappingGraph,
    ) -> Result<Self> {
        let n = arrival_rates.len();
        if n == 0 {
            return Err(Error::Usage("a queue needs at least one class".into()));
        }
        if let Some((i, l)) = arrival_rates
            .iter()
            .enumerate()
            .find(|(_, l)| !(l.is_finite() && **l > 0.0))
        {
            return Err(Error::Usage(format!(
                "arrival rate of class {} must be positive and finite, got {l}",
                i + 1
            )));
        }
        if rate_fn.n_classes() != n {
            return Err(Error::Usage(format!(
                "rate function has {} classes, arrival rates have {n}",
                rate_fn.n_classes()
            )));
        }
        if swapping.n_classes() != n {
            return Err(Error::Usage(format!(
                "swapping graph has {} classes, arrival rates have {n}",
                swapping.n_classes()
            )));
        }
        Ok(PandsQueue {
            arrival_rates,
            rate_fn,
            swapping,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.arrival_rates.len()
    }

    pub fn arrival_rate(&self, i: ClassId) -> f64 {
        self.arrival_rates[i.index()]
    }

    /// Same queue with another swapping graph.
    pub fn with_swapping(&self, swapping: SwappingGraph) -> Result<Self> {
        Self::new(self.arrival_rates.clone(), self.rate_fn.clone(), swapping)
    }
}

pub(crate) fn check_classes(c: &[ClassId], n_classes: usize) -> Result<()> {
    match c.iter().find(|k| k.index() >= n_classes) {
        Some(k) => Err(Error::Usage(format!(
            "class {k} is outside 1..={n_classes}"
        ))),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neighbors_of_path_graph() {
        let g = SwappingGraph::one_based(3, &[(1, 2), (2, 3)]).unwrap();
        assert_eq!(
            g.neighbors(ClassId::one_based(2)),
            &[ClassId(0), ClassId(2)]
        );
        assert_eq!(g.neighbors(ClassId::one_based(1)), &[ClassId(1)]);
        assert!(!g.adjacent(ClassId(0), ClassId(2)));
    }

    #[test]
    fn edgeless_graph_has_no_neighbors() {
        let g = SwappingGraph::edgeless(4);
        for i in 0..4 {
            assert!(g.neighbors(ClassId::new(i)).is_empty());
        }
    }

    #[test]
    fn loop_is_its_own_neighbor() {
        let g = SwappingGraph::one_based(2, &[(1, 1), (1, 2)]).unwrap();
        assert_eq!(g.neighbors(ClassId(0)), &[ClassId(0), ClassId(1)]);
        assert_eq!(g.neighbors(ClassId(1)), &[ClassId(0)]);
        assert!(g.has_loops());
        assert_eq!(g.edges().len(), 2);
    }

    #[test]
    fn edge_outside_class_range_is_rejected() {
        assert!(SwappingGraph::one_based(2, &[(1, 3)]).is_err());
    }

    #[test]
    fn macrostate_is_additive_and_order_free() {
        let a = State::one_based(&[1, 2, 2]);
        let b = State::one_based(&[3, 1]);
        let ab = a.concat(&b);
        assert_eq!(ab.macrostate(3), a.macrostate(3).add(&b.macrostate(3)));
        assert_eq!(ab.macrostate(3), ab.reversed().macrostate(3));
        assert_eq!(ab.macrostate(3), Macrostate(vec![2, 2, 1]));
    }

    #[test]
    fn lower_set_enumerates_box() {
        let l = Macrostate(vec![1, 2]);
        let all = l.lower_set();
        assert_eq!(all.len(), 6);
        assert!(all.iter().all(|x| x.le(&l)));
    }

    #[test]
    fn state_display_is_one_based() {
        assert_eq!(State::one_based(&[1, 3, 2]).to_string(), "(1,3,2)");
        assert_eq!(State::empty().to_string(), "()");
    }
}
