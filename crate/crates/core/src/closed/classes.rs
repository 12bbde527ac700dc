//! Communicating classes of a finite transition digraph.

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassPartition {
    /// Strongly connected components, each sorted, ordered by smallest member.
    pub components: Vec<Vec<usize>>,
    /// `closed[k]` iff no transition leaves component `k`.
    pub closed: Vec<bool>,
    pub component_of: Vec<usize>,
}

impl ClassPartition {
    pub fn n_closed(&self) -> usize {
        self.closed.iter().filter(|&&c| c).count()
    }

    /// States outside every closed class.
    pub fn transient_states(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .components
            .iter()
            .zip(&self.closed)
            .filter(|(_, &c)| !c)
            .flat_map(|(comp, _)| comp.iter().copied())
            .collect();
        out.sort_unstable();
        out
    }

    pub fn is_irreducible(&self) -> bool {
        self.components.len() == 1
    }

    pub fn closed_components(&self) -> impl Iterator<Item = &Vec<usize>> {
        self.components
            .iter()
            .zip(&self.closed)
            .filter(|(_, &c)| c)
            .map(|(comp, _)| comp)
    }
}

/// Partitions states `0..succ.len()` into strongly connected components of
/// the positive-rate digraph given by successor lists.
pub fn communicating_classes(succ: &[Vec<usize>]) -> ClassPartition {
    let n = succ.len();
    let mut g: DiGraph<(), ()> = DiGraph::with_capacity(n, succ.iter().map(Vec::len).sum());
    let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
    for (s, targets) in succ.iter().enumerate() {
        for &t in targets {
            if t != s {
                g.add_edge(nodes[s], nodes[t], ());
            }
        }
    }
    let mut components: Vec<Vec<usize>> = tarjan_scc(&g)
        .into_iter()
        .map(|comp| {
            let mut v: Vec<usize> = comp.into_iter().map(|x| x.index()).collect();
            v.sort_unstable();
            v
        })
        .collect();
    components.sort_unstable_by_key(|c| c[0]);
    let mut component_of = vec![0; n];
    for (k, comp) in components.iter().enumerate() {
        for &s in comp {
            component_of[s] = k;
        }
    }
    let closed = components
        .iter()
        .enumerate()
        .map(|(k, comp)| {
            comp.iter()
                .all(|&s| succ[s].iter().all(|&t| component_of[t] == k))
        })
        .collect();
    ClassPartition {
        components,
        closed,
        component_of,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_into_cycle() {
        // 0 -> 1 <-> 2, 3 isolated
        let p = communicating_classes(&[vec![1], vec![2], vec![1], vec![]]);
        assert_eq!(p.components, vec![vec![0], vec![1, 2], vec![3]]);
        assert_eq!(p.closed, vec![false, true, true]);
        assert_eq!(p.transient_states(), vec![0]);
        assert_eq!(p.n_closed(), 2);
    }

    #[test]
    fn single_cycle_is_irreducible() {
        let p = communicating_classes(&[vec![1], vec![2], vec![0]]);
        assert!(p.is_irreducible());
        assert_eq!(p.closed, vec![true]);
    }
}
