//! Placement orders: acyclic orientations of a loop-free swapping graph,
//! closed under transitivity.

use std::fmt;

use crate::error::{Error, Result};
use crate::model::{ClassId, SwappingGraph};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PlacementOrder {
    n: usize,
    /// Oriented edges `(i, j)` meaning `i ≺ j`, sorted.
    arcs: Vec<(ClassId, ClassId)>,
    /// `reach[i][j]` iff `i ≺ j`.
    reach: Vec<Vec<bool>>,
}

impl PlacementOrder {
    /// Builds the order generated by `arcs`; fails on a cycle or a loop.
    pub fn from_arcs(n: usize, arcs: &[(ClassId, ClassId)]) -> Result<Self> {
        let mut reach = vec![vec![false; n]; n];
        for &(i, j) in arcs {
            if i.index() >= n || j.index() >= n {
                return Err(Error::Usage(format!(
                    "arc {i}->{j} references a class outside 1..={n}"
                )));
            }
            if i == j {
                return Err(Error::Structure(format!(
                    "class {i} has a loop; placement orders exist only for loop-free swapping graphs"
                )));
            }
            reach[i.index()][j.index()] = true;
        }
        for k in 0..n {
            for i in 0..n {
                if reach[i][k] {
                    for j in 0..n {
                        if reach[k][j] {
                            reach[i][j] = true;
                        }
                    }
                }
            }
        }
        if let Some(i) = (0..n).find(|&i| reach[i][i]) {
            return Err(Error::Structure(format!(
                "orientation has a directed cycle through class {}",
                i + 1
            )));
        }
        let mut arcs = arcs.to_vec();
        arcs.sort_unstable();
        arcs.dedup();
        Ok(PlacementOrder { n, arcs, reach })
    }

    /// `arcs` given as 1-based `(i, j)` pairs meaning `i ≺ j`.
    pub fn one_based(n: usize, arcs: &[(usize, usize)]) -> Result<Self> {
        if arcs.iter().any(|&(i, j)| i == 0 || j == 0) {
            return Err(Error::Usage("class labels are 1-based".into()));
        }
        let arcs: Vec<_> = arcs
            .iter()
            .map(|&(i, j)| (ClassId::one_based(i), ClassId::one_based(j)))
            .collect();
        Self::from_arcs(n, &arcs)
    }

    /// The unique order to which `c` adheres, if `c` contains every class
    /// and adheres to some order of `graph`.
    pub fn induced_by(graph: &SwappingGraph, c: &[ClassId]) -> Option<Self> {
        let n = graph.n_classes();
        if graph.has_loops() {
            return None;
        }
        let mut first = vec![usize::MAX; n];
        let mut last = vec![0usize; n];
        for (p, k) in c.iter().enumerate() {
            let k = k.index();
            first[k] = first[k].min(p);
            last[k] = p;
        }
        if first.iter().any(|&f| f == usize::MAX) {
            return None;
        }
        let mut arcs = Vec::new();
        for (i, j) in graph.edges() {
            let (a, b) = (i.index(), j.index());
            if last[a] < first[b] {
                arcs.push((i, j));
            } else if last[b] < first[a] {
                arcs.push((j, i));
            } else {
                return None;
            }
        }
        let order = Self::from_arcs(n, &arcs).ok()?;
        order.adheres(c).then_some(order)
    }

    pub fn n_classes(&self) -> usize {
        self.n
    }

    pub fn arcs(&self) -> &[(ClassId, ClassId)] {
        &self.arcs
    }

    #[inline]
    pub fn precedes(&self, i: ClassId, j: ClassId) -> bool {
        self.reach[i.index()][j.index()]
    }

    pub fn is_minimal(&self, i: ClassId) -> bool {
        (0..self.n).all(|j| !self.reach[j][i.index()])
    }

    pub fn is_maximal(&self, i: ClassId) -> bool {
        (0..self.n).all(|j| !self.reach[i.index()][j])
    }

    /// `≻`.
    pub fn reversed(&self) -> Self {
        let arcs: Vec<_> = self.arcs.iter().map(|&(i, j)| (j, i)).collect();
        Self::from_arcs(self.n, &arcs).expect("reversal of an acyclic orientation is acyclic")
    }

    /// True iff `c_q ⊀ c_p` for all `p < q`.
    pub fn adheres(&self, c: &[ClassId]) -> bool {
        let mut seen = vec![false; self.n];
        for k in c {
            if (0..self.n).any(|i| seen[i] && self.reach[k.index()][i]) {
                return false;
            }
            seen[k.index()] = true;
        }
        true
    }

    /// Tandem adherence: `(c_1..c_n, d_m..d_1)` adheres.
    pub fn adheres_tandem(&self, c: &[ClassId], d: &[ClassId]) -> bool {
        let joined: Vec<ClassId> = c.iter().chain(d.iter().rev()).copied().collect();
        self.adheres(&joined)
    }
}

impl fmt::Display for PlacementOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.arcs.iter().map(|(i, j)| format!("{i}<{j}")).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

/// Largest edge count accepted by [`enumerate_placement_orders`].
pub const MAX_ORIENTATION_EDGES: usize = 24;

/// Every acyclic orientation of `graph`, each as its placement order.
pub fn enumerate_placement_orders(graph: &SwappingGraph) -> Result<Vec<PlacementOrder>> {
    if let Some(i) = (0..graph.n_classes())
        .map(ClassId::new)
        .find(|&i| graph.adjacent(i, i))
    {
        return Err(Error::Structure(format!(
            "class {i} has a loop; placement orders exist only for loop-free swapping graphs"
        )));
    }
    let edges = graph.edges();
    if edges.len() > MAX_ORIENTATION_EDGES {
        return Err(Error::Resource {
            context: "enumerating edge orientations".into(),
            count: edges.len(),
            budget: MAX_ORIENTATION_EDGES,
        });
    }
    let mut out: Vec<PlacementOrder> = Vec::new();
    for mask in 0u32..(1u32 << edges.len()) {
        let arcs: Vec<_> = edges
            .iter()
            .enumerate()
            .map(|(e, &(i, j))| if mask & (1 << e) == 0 { (i, j) } else { (j, i) })
            .collect();
        if let Ok(order) = PlacementOrder::from_arcs(graph.n_classes(), &arcs) {
            if !out.iter().any(|o| o.reach == order.reach) {
                out.push(order);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::State;

    fn six_class_order() -> PlacementOrder {
        PlacementOrder::one_based(6, &[(1, 3), (1, 4), (2, 4), (2, 5), (3, 6), (4, 6), (5, 6)])
            .unwrap()
    }

    #[test]
    fn single_edge_has_two_orders() {
        let g = SwappingGraph::one_based(2, &[(1, 2)]).unwrap();
        assert_eq!(enumerate_placement_orders(&g).unwrap().len(), 2);
    }

    #[test]
    fn edgeless_graph_has_one_empty_order() {
        let orders = enumerate_placement_orders(&SwappingGraph::edgeless(3)).unwrap();
        assert_eq!(orders.len(), 1);
        assert!(orders[0].arcs().is_empty());
    }

    #[test]
    fn loops_are_rejected() {
        let g = SwappingGraph::one_based(2, &[(1, 1)]).unwrap();
        assert!(matches!(
            enumerate_placement_orders(&g),
            Err(Error::Structure(_))
        ));
    }

    #[test]
    fn triangle_has_six_acyclic_orientations() {
        let g = SwappingGraph::complete(3, false);
        assert_eq!(enumerate_placement_orders(&g).unwrap().len(), 6);
    }

    #[test]
    fn six_class_adherence() {
        let o = six_class_order();
        assert!(o.adheres(&State::one_based(&[1, 2, 3, 4, 5, 6])));
        assert!(!o.adheres(&State::one_based(&[3, 1, 2, 3, 4, 5, 6])));
        assert!(o.adheres(&[]));
        assert!(o.precedes(ClassId::one_based(1), ClassId::one_based(6)));
        assert!(!o.precedes(ClassId::one_based(1), ClassId::one_based(5)));
    }

    #[test]
    fn tandem_state_adheres() {
        let o = six_class_order();
        let c = State::one_based(&[2, 5, 1]);
        let d = State::one_based(&[6, 4, 3]);
        assert!(o.adheres_tandem(&c, &d));
        assert!(!o.adheres_tandem(&d, &c));
        assert!(o.reversed().adheres_tandem(&d, &c));
    }

    #[test]
    fn induced_order_of_six_class_state() {
        let g =
            SwappingGraph::one_based(6, &[(6, 3), (3, 1), (1, 4), (4, 2), (2, 5), (5, 6), (6, 4)])
                .unwrap();
        let o = PlacementOrder::induced_by(&g, &State::one_based(&[1, 2, 3, 4, 5, 6])).unwrap();
        assert_eq!(o, six_class_order());
        let tri = SwappingGraph::complete(3, false);
        assert!(PlacementOrder::induced_by(&tri, &State::one_based(&[1, 2, 1, 2, 2, 3])).is_none());
    }
}
