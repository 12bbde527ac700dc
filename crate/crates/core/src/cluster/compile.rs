//! Cluster spec to closed tandem.

use std::collections::HashMap;

use serde::Serialize;

use super::spec::{ClusterMode, ClusterSpec, Slots};
use crate::closed::{PlacementOrder, TandemNetwork, TandemState};
use crate::error::{Error, Result};
use crate::model::{ClassId, Macrostate, State, SwappingGraph};
use crate::rate::{MultiServer, RateFunction};

/// What a token class stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "index", rename_all = "snake_case")]
pub enum TokenKind {
    JobType(usize),
    Machine(usize),
    Group(usize),
    /// A vertex of a token DAG.
    Node,
}

#[derive(Debug, Clone)]
pub struct CompiledTandem {
    pub mode: ClusterMode,
    pub tandem: TandemNetwork,
    pub class_names: Vec<String>,
    pub kinds: Vec<TokenKind>,
    pub order: PlacementOrder,
    pub initial: TandemState,
    pub machine_names: Vec<String>,
    pub machine_rates: Vec<f64>,
    pub type_names: Vec<String>,
    pub type_rates: Vec<f64>,
    /// `S_i`: machines that serve class `i` in the first queue.
    pub machine_sets: Vec<Vec<usize>>,
    /// `K_i`: job types that serve class `i` in the second queue.
    pub type_sets: Vec<Vec<usize>>,
}

impl CompiledTandem {
    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_index(&self, name: &str) -> Result<ClassId> {
        self.class_names
            .iter()
            .position(|n| n == name)
            .map(ClassId::new)
            .ok_or_else(|| Error::Usage(format!("unknown token class {name:?}")))
    }

    pub fn name(&self, k: ClassId) -> &str {
        &self.class_names[k.index()]
    }

    pub fn format_state(&self, c: &[ClassId]) -> String {
        c.iter()
            .map(|&k| self.name(k))
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn format_tandem(&self, s: &TandemState) -> String {
        format!(
            "({};{})",
            self.format_state(&s.first),
            self.format_state(&s.second)
        )
    }

    pub fn parse_state(&self, names: &[&str]) -> Result<State> {
        names.iter().map(|n| self.class_index(n)).collect()
    }

    /// Machines of class `k` by name, for annotations.
    pub(crate) fn describe_machines(&self, k: ClassId) -> String {
        let names: Vec<&str> = self.machine_sets[k.index()]
            .iter()
            .map(|&s| self.machine_names[s].as_str())
            .collect();
        match names.as_slice() {
            [one] => format!("machine {one}"),
            many => format!("machines {}", many.join(",")),
        }
    }
}

/// Class layer shared by the three input modes.
struct Layer {
    names: Vec<String>,
    kinds: Vec<TokenKind>,
    counts: Vec<u32>,
    /// `(i, j)` meaning `i ≺ j`.
    arcs: Vec<(usize, usize)>,
    /// Minimal class bindings to machines.
    machines: HashMap<usize, Vec<usize>>,
    /// Maximal class bindings to job types.
    types: HashMap<usize, Vec<usize>>,
}

fn finite_slots(spec: &ClusterSpec, k: usize) -> Result<u32> {
    let t = &spec.job_types[k];
    match t.slots {
        Some(Slots::Finite(n)) if n >= 1 => Ok(n),
        Some(Slots::Finite(_)) => Err(Error::Usage(format!("job type {:?} needs at least one slot", t.name))),
        Some(Slots::Infinite(_)) => Err(Error::Unsupported(format!(
            "job type {:?} has infinitely many waiting slots; only finite slot counts can be compiled",
            t.name
        ))),
        None => Err(Error::Usage(format!("job type {:?} is missing its slot count", t.name))),
    }
}

fn layer_of(spec: &ClusterSpec, mode: ClusterMode) -> Result<Layer> {
    let n_types = spec.job_types.len();
    let mut layer = Layer {
        names: Vec::new(),
        kinds: Vec::new(),
        counts: Vec::new(),
        arcs: Vec::new(),
        machines: HashMap::new(),
        types: HashMap::new(),
    };
    match mode {
        ClusterMode::Assignment => {
            for k in 0..n_types {
                layer.names.push(spec.job_types[k].name.clone());
                layer.kinds.push(TokenKind::JobType(k));
                layer.counts.push(finite_slots(spec, k)?);
                layer.types.insert(k, vec![k]);
            }
            for (s, m) in spec.machines.iter().enumerate() {
                let buffer = m.buffer.ok_or_else(|| {
                    Error::Usage(format!("machine {:?} is missing its buffer length", m.name))
                })?;
                if buffer == 0 {
                    return Err(Error::Usage(format!(
                        "machine {:?} needs a buffer of at least one slot",
                        m.name
                    )));
                }
                layer.names.push(m.name.clone());
                layer.kinds.push(TokenKind::Machine(s));
                layer.counts.push(buffer);
                layer.machines.insert(n_types + s, vec![s]);
            }
            for (k, t) in spec.job_types.iter().enumerate() {
                let ms = t.machines.as_ref().ok_or_else(|| {
                    Error::Usage(format!("job type {:?} lists no machines", t.name))
                })?;
                for m in ms {
                    layer.arcs.push((n_types + spec.machine_index(m)?, k));
                }
            }
        }
        ClusterMode::Groups => {
            let groups = spec.groups.as_ref().expect("groups mode");
            for k in 0..n_types {
                if spec.job_types[k].machines.is_some() {
                    return Err(Error::Usage(format!(
                        "job type {:?} lists machines, but this cluster uses groups",
                        spec.job_types[k].name
                    )));
                }
                layer.names.push(spec.job_types[k].name.clone());
                layer.kinds.push(TokenKind::JobType(k));
                layer.counts.push(finite_slots(spec, k)?);
                layer.types.insert(k, vec![k]);
            }
            for (t, g) in groups.iter().enumerate() {
                if g.slots == 0 {
                    return Err(Error::Usage(format!(
                        "group {:?} needs at least one slot",
                        g.name
                    )));
                }
                let i = n_types + t;
                layer.names.push(g.name.clone());
                layer.kinds.push(TokenKind::Group(t));
                layer.counts.push(g.slots);
                let ms = g
                    .machines
                    .iter()
                    .map(|m| spec.machine_index(m))
                    .collect::<Result<Vec<_>>>()?;
                layer.machines.insert(i, ms);
                for k in &g.job_types {
                    layer.arcs.push((i, spec.type_index(k)?));
                }
            }
        }
        ClusterMode::Dag => {
            let dag = spec.token_dag.as_ref().expect("dag mode");
            let index: HashMap<&str, usize> = dag
                .vertices
                .iter()
                .enumerate()
                .map(|(i, v)| (v.name.as_str(), i))
                .collect();
            let vertex = |name: &str| {
                index
                    .get(name)
                    .copied()
                    .ok_or_else(|| Error::Usage(format!("unknown token class {name:?}")))
            };
            for v in &dag.vertices {
                if v.count == 0 {
                    return Err(Error::Usage(format!(
                        "token class {:?} needs at least one token",
                        v.name
                    )));
                }
                layer.names.push(v.name.clone());
                layer.kinds.push(TokenKind::Node);
                layer.counts.push(v.count);
            }
            for (u, v) in &dag.arcs {
                layer.arcs.push((vertex(u)?, vertex(v)?));
            }
            for (v, ms) in &dag.machines {
                let ms = ms
                    .iter()
                    .map(|m| spec.machine_index(m))
                    .collect::<Result<Vec<_>>>()?;
                layer.machines.insert(vertex(v)?, ms);
            }
            for (v, ks) in &dag.job_types {
                let ks = ks
                    .iter()
                    .map(|k| spec.type_index(k))
                    .collect::<Result<Vec<_>>>()?;
                layer.types.insert(vertex(v)?, ks);
            }
        }
    }
    let mut seen = HashMap::new();
    for (i, n) in layer.names.iter().enumerate() {
        if let Some(j) = seen.insert(n.as_str(), i) {
            return Err(Error::Usage(format!(
                "token classes {} and {} share the name {n:?}",
                j + 1,
                i + 1
            )));
        }
    }
    Ok(layer)
}

pub fn compile(spec: &ClusterSpec) -> Result<CompiledTandem> {
    let mode = spec.mode()?;
    for m in &spec.machines {
        if !(m.rate.is_finite() && m.rate > 0.0) {
            return Err(Error::Usage(format!(
                "machine {:?} needs a positive rate, got {}",
                m.name, m.rate
            )));
        }
    }
    for k in &spec.job_types {
        if !(k.rate.is_finite() && k.rate > 0.0) {
            return Err(Error::Usage(format!(
                "job type {:?} needs a positive arrival rate to be compiled, got {}",
                k.name, k.rate
            )));
        }
    }
    let layer = layer_of(spec, mode)?;
    let n = layer.names.len();
    let arcs: Vec<(ClassId, ClassId)> = layer
        .arcs
        .iter()
        .map(|&(i, j)| (ClassId::new(i), ClassId::new(j)))
        .collect();
    let order = PlacementOrder::from_arcs(n, &arcs).map_err(|e| match e {
        Error::Structure(msg) => Error::Structure(format!("class layer is not acyclic: {msg}")),
        other => other,
    })?;

    let mut machine_sets = vec![Vec::new(); n];
    let mut type_sets = vec![Vec::new(); n];
    for i in 0..n {
        let ci = ClassId::new(i);
        if order.is_minimal(ci) {
            let ms = layer
                .machines
                .get(&i)
                .filter(|m| !m.is_empty())
                .ok_or_else(|| {
                    Error::Structure(format!(
                        "minimal token class {:?} is bound to no machine",
                        layer.names[i]
                    ))
                })?;
            machine_sets[i] = ms.clone();
        } else if layer.machines.contains_key(&i) {
            return Err(Error::Structure(format!(
                "token class {:?} is not minimal but is bound to machines",
                layer.names[i]
            )));
        }
        if order.is_maximal(ci) {
            let ks = layer
                .types
                .get(&i)
                .filter(|k| !k.is_empty())
                .ok_or_else(|| {
                    Error::Structure(format!(
                        "maximal token class {:?} is bound to no job type",
                        layer.names[i]
                    ))
                })?;
            type_sets[i] = ks.clone();
        } else if layer.types.contains_key(&i) {
            return Err(Error::Structure(format!(
                "token class {:?} is not maximal but is bound to job types",
                layer.names[i]
            )));
        }
    }
    // Non-minimal classes inherit the machines of the minimal classes below
    // them, non-maximal classes the types of the maximal classes above.
    for i in 0..n {
        let ci = ClassId::new(i);
        if !order.is_minimal(ci) {
            let mut s: Vec<usize> = (0..n)
                .filter(|&j| {
                    order.is_minimal(ClassId::new(j)) && order.precedes(ClassId::new(j), ci)
                })
                .flat_map(|j| machine_sets[j].clone())
                .collect();
            s.sort_unstable();
            s.dedup();
            machine_sets[i] = s;
        }
        if !order.is_maximal(ci) {
            let mut k: Vec<usize> = (0..n)
                .filter(|&j| {
                    order.is_maximal(ClassId::new(j)) && order.precedes(ci, ClassId::new(j))
                })
                .flat_map(|j| type_sets[j].clone())
                .collect();
            k.sort_unstable();
            k.dedup();
            type_sets[i] = k;
        }
    }
    for s in &mut machine_sets {
        s.sort_unstable();
        s.dedup();
    }
    for k in &mut type_sets {
        k.sort_unstable();
        k.dedup();
    }

    let machine_rates: Vec<f64> = spec.machines.iter().map(|m| m.rate).collect();
    let type_rates: Vec<f64> = spec.job_types.iter().map(|k| k.rate).collect();
    let mu: RateFunction = MultiServer::new(machine_rates.clone(), machine_sets.clone())?.into();
    let nu: RateFunction = MultiServer::new(type_rates.clone(), type_sets.clone())?.into();

    let mut swapping = SwappingGraph::edgeless(n);
    for &(i, j) in &arcs {
        swapping.add_edge(i, j)?;
    }
    let tandem = TandemNetwork::new(mu, nu, swapping, Macrostate(layer.counts.clone()))?;

    // All tokens available, from the maximal classes down.
    let mut placed = vec![false; n];
    let mut second = Vec::new();
    while let Some(i) = (0..n).find(|&i| {
        !placed[i] && (0..n).all(|j| placed[j] || !order.precedes(ClassId::new(i), ClassId::new(j)))
    }) {
        placed[i] = true;
        second.extend(std::iter::repeat_n(
            ClassId::new(i),
            layer.counts[i] as usize,
        ));
    }
    let initial = TandemState::new(State::empty(), State::new(second));
    debug_assert!(tandem.order_of(&initial).as_ref() == Some(&order));

    Ok(CompiledTandem {
        mode,
        tandem,
        class_names: layer.names,
        kinds: layer.kinds,
        order,
        initial,
        machine_names: spec.machines.iter().map(|m| m.name.clone()).collect(),
        machine_rates,
        type_names: spec.job_types.iter().map(|k| k.name.clone()).collect(),
        type_rates,
        machine_sets,
        type_sets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::spec::{InfTag, Slots};

    pub(crate) fn three_machines(l: u32) -> ClusterSpec {
        ClusterSpec::assignment(
            &[("A", 1.0, l, &["1", "3"]), ("B", 1.0, l, &["2", "3"])],
            &[("1", 1.0, l), ("2", 1.0, l), ("3", 1.0, l)],
        )
    }

    #[test]
    fn three_machine_tandem() {
        let ct = compile(&three_machines(2)).unwrap();
        assert_eq!(ct.class_names, vec!["A", "B", "1", "2", "3"]);
        let idx = |s: &str| ct.class_index(s).unwrap();
        let g = &ct.tandem.swapping;
        assert!(g.adjacent(idx("1"), idx("A")));
        assert!(g.adjacent(idx("3"), idx("A")));
        assert!(g.adjacent(idx("3"), idx("B")));
        assert!(g.adjacent(idx("2"), idx("B")));
        assert!(!g.adjacent(idx("1"), idx("B")));
        assert!(!g.adjacent(idx("A"), idx("B")));
        assert!(ct.order.precedes(idx("1"), idx("A")));
        // first queue: machine tokens on their machine, type tokens on S_k
        assert_eq!(
            ct.machine_sets,
            vec![vec![0, 2], vec![1, 2], vec![0], vec![1], vec![2]]
        );
        // second queue: type tokens on their type, machine tokens on K_s
        assert_eq!(
            ct.type_sets,
            vec![vec![0], vec![1], vec![0], vec![1], vec![0, 1]]
        );
        assert_eq!(ct.format_tandem(&ct.initial), "(;A,A,B,B,1,1,2,2,3,3)");
        assert_eq!(ct.tandem.order_of(&ct.initial), Some(ct.order.clone()));
    }

    #[test]
    fn mixed_graph() {
        let spec = ClusterSpec::grouped(
            &[("A", 1.0, 1), ("B", 1.0, 1)],
            &[("m1", 1.0), ("m2", 1.0), ("m3", 1.0)],
            &[
                ("1", &["m1", "m3"], 1, &["A"]),
                ("2", &["m2", "m3"], 1, &["A", "B"]),
            ],
        );
        let ct = compile(&spec).unwrap();
        assert_eq!(ct.class_names, vec!["A", "B", "1", "2"]);
        let idx = |s: &str| ct.class_index(s).unwrap();
        let mut arcs: Vec<(String, String)> = ct
            .order
            .arcs()
            .iter()
            .map(|&(i, j)| (ct.name(i).to_string(), ct.name(j).to_string()))
            .collect();
        arcs.sort();
        let want: Vec<(String, String)> = [("1", "A"), ("2", "A"), ("2", "B")]
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        assert_eq!(arcs, want);
        assert_eq!(ct.machine_sets[idx("A").index()], vec![0, 1, 2]);
        assert_eq!(ct.machine_sets[idx("B").index()], vec![1, 2]);
        assert_eq!(ct.type_sets[idx("1").index()], vec![0]);
        assert_eq!(ct.type_sets[idx("2").index()], vec![0, 1]);
    }

    #[test]
    fn hierarchical_tree() {
        let ct =
            compile(&ClusterSpec::hierarchical(3, 2.0, &[1.0, 1.0, 1.0, 1.0]).unwrap()).unwrap();
        assert_eq!(ct.n_classes(), 7);
        let g = &ct.tandem.swapping;
        for i in 1..=3usize {
            let p = ClassId::one_based(i);
            assert!(g.adjacent(p, ClassId::one_based(2 * i)));
            assert!(g.adjacent(p, ClassId::one_based(2 * i + 1)));
            assert!(ct.order.precedes(ClassId::one_based(2 * i), p));
        }
        assert!(!g.adjacent(ClassId::one_based(1), ClassId::one_based(4)));
        assert_eq!(ct.format_tandem(&ct.initial), "(;1,2,3,4,5,6,7)");
        assert_eq!(ct.machine_sets[0], vec![0, 1, 2, 3]);
        assert_eq!(ct.machine_sets[1], vec![0, 1]);
        assert_eq!(ct.machine_sets[6], vec![3]);
        assert!(ct.type_sets.iter().all(|k| k == &vec![0]));
    }

    #[test]
    fn cyclic_layer_rejected() {
        let mut spec = ClusterSpec::hierarchical(2, 1.0, &[1.0, 1.0]).unwrap();
        spec.token_dag
            .as_mut()
            .unwrap()
            .arcs
            .push(("1".into(), "2".into()));
        assert!(matches!(compile(&spec), Err(Error::Structure(_))));
    }

    #[test]
    fn infinite_slots_unsupported() {
        let mut spec = three_machines(1);
        spec.job_types[0].slots = Some(Slots::Infinite(InfTag::Inf));
        assert!(matches!(compile(&spec), Err(Error::Unsupported(_))));
    }

    #[test]
    fn unbound_minimal_class_rejected() {
        let mut spec = three_machines(1);
        spec.job_types[0].machines = Some(vec![]);
        assert!(matches!(compile(&spec), Err(Error::Structure(_))));
    }
}
