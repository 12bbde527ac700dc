#![allow(dead_code)]

use pands::{ClassId, MultiServer, SwappingGraph};

/// Pass-and-swap written out literally: the completing customer walks right,
/// takes the place of the first customer it may swap with, and that customer
/// carries on. Returns `(next, departing, chain)`.
pub fn reference_completion(
    g: &SwappingGraph,
    c: &[ClassId],
    p: usize,
) -> (Vec<ClassId>, ClassId, Vec<usize>) {
    let mut out = c.to_vec();
    let mut carried = c[p];
    let mut chain = vec![p];
    let mut at = p;
    while let Some(q) = (at + 1..c.len()).find(|&q| g.adjacent(carried, c[q])) {
        out[q] = carried;
        carried = c[q];
        chain.push(q);
        at = q;
    }
    out.remove(p);
    (out, carried, chain)
}

/// Every sequence over `n` classes of length exactly `len`.
pub fn sequences(n: usize, len: usize) -> Vec<Vec<ClassId>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|s| {
                (0..n).map(move |k| {
                    let mut t = s.clone();
                    t.push(ClassId::new(k));
                    t
                })
            })
            .collect();
    }
    out
}

pub fn graph_from_mask(n: usize, mask: &[bool], loops: &[bool]) -> SwappingGraph {
    let mut edges = Vec::new();
    let mut k = 0;
    for i in 0..n {
        for j in i + 1..n {
            if mask.get(k).copied().unwrap_or(false) {
                edges.push((i, j));
            }
            k += 1;
        }
        if loops.get(i).copied().unwrap_or(false) {
            edges.push((i, i));
        }
    }
    SwappingGraph::new(n, &edges).unwrap()
}

/// Multi-server model from a compatibility bit matrix; every class gets at
/// least one server.
pub fn multi_server(rates: &[f64], bits: &[Vec<bool>]) -> MultiServer {
    let compat: Vec<Vec<usize>> = bits
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut s: Vec<usize> = (0..rates.len())
                .filter(|&k| row.get(k).copied().unwrap_or(false))
                .collect();
            if s.is_empty() {
                s.push(i % rates.len());
            }
            s
        })
        .collect();
    MultiServer::new(rates.to_vec(), compat).unwrap()
}

/// Two classes, three unit servers; class 1 uses servers 1 and 3, class 2
/// uses servers 2 and 3.
pub fn two_class_rates() -> MultiServer {
    MultiServer::one_based(vec![1.0, 1.0, 1.0], &[&[1, 3], &[2, 3]]).unwrap()
}
