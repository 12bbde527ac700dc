//! Cluster descriptions: job types, machines, and either a direct
//! type/machine assignment graph, a group layer, or a general token DAG.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of waiting slots; `"inf"` is accepted by the format but rejected
/// by the compiler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Slots {
    Finite(u32),
    Infinite(InfTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InfTag {
    #[serde(rename = "inf")]
    Inf,
}

impl Slots {
    pub fn finite(self) -> Option<u32> {
        match self {
            Slots::Finite(n) => Some(n),
            Slots::Infinite(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobType {
    pub name: String,
    /// Poisson arrival rate `ν_k`.
    pub rate: f64,
    /// `ℓ_k`: how many jobs of this type may wait unassigned.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slots: Option<Slots>,
    /// `S_k` in assignment mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub machines: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Machine {
    pub name: String,
    pub rate: f64,
    /// `ℓ_s` in assignment mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub buffer: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Group {
    pub name: String,
    pub machines: Vec<String>,
    /// `ℓ_t`.
    pub slots: u32,
    pub job_types: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DagVertex {
    pub name: String,
    pub count: u32,
}

/// Token classes with a placement DAG. An arc `[u, v]` means `u ≺ v`.
/// Minimal vertices bind to machines, maximal vertices to job types.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenDag {
    pub vertices: Vec<DagVertex>,
    pub arcs: Vec<(String, String)>,
    pub machines: BTreeMap<String, Vec<String>>,
    pub job_types: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSpec {
    pub job_types: Vec<JobType>,
    pub machines: Vec<Machine>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<Vec<Group>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_dag: Option<TokenDag>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterMode {
    Assignment,
    Groups,
    Dag,
}

impl ClusterSpec {
    pub fn mode(&self) -> Result<ClusterMode> {
        match (&self.groups, &self.token_dag) {
            (Some(_), Some(_)) => Err(Error::Usage(
                "a cluster spec has either groups or a token DAG, not both".into(),
            )),
            (Some(_), None) => Ok(ClusterMode::Groups),
            (None, Some(_)) => Ok(ClusterMode::Dag),
            (None, None) => Ok(ClusterMode::Assignment),
        }
    }

    pub fn type_index(&self, name: &str) -> Result<usize> {
        self.job_types
            .iter()
            .position(|k| k.name == name)
            .ok_or_else(|| Error::Usage(format!("unknown job type {name:?}")))
    }

    pub fn machine_index(&self, name: &str) -> Result<usize> {
        self.machines
            .iter()
            .position(|s| s.name == name)
            .ok_or_else(|| Error::Usage(format!("unknown machine {name:?}")))
    }

    /// FCFS-ALIS / cancel-on-commit cluster: each type lists its machines.
    pub fn assignment(types: &[(&str, f64, u32, &[&str])], machines: &[(&str, f64, u32)]) -> Self {
        ClusterSpec {
            job_types: types
                .iter()
                .map(|&(name, rate, slots, ms)| JobType {
                    name: name.into(),
                    rate,
                    slots: Some(Slots::Finite(slots)),
                    machines: Some(ms.iter().map(|m| m.to_string()).collect()),
                })
                .collect(),
            machines: machines
                .iter()
                .map(|&(name, rate, buffer)| Machine {
                    name: name.into(),
                    rate,
                    buffer: Some(buffer),
                })
                .collect(),
            groups: None,
            token_dag: None,
        }
    }

    /// Distributed processing: jobs are committed to groups of machines.
    pub fn grouped(
        types: &[(&str, f64, u32)],
        machines: &[(&str, f64)],
        groups: &[(&str, &[&str], u32, &[&str])],
    ) -> Self {
        ClusterSpec {
            job_types: types
                .iter()
                .map(|&(name, rate, slots)| JobType {
                    name: name.into(),
                    rate,
                    slots: Some(Slots::Finite(slots)),
                    machines: None,
                })
                .collect(),
            machines: machines
                .iter()
                .map(|&(name, rate)| Machine {
                    name: name.into(),
                    rate,
                    buffer: None,
                })
                .collect(),
            groups: Some(
                groups
                    .iter()
                    .map(|&(name, ms, slots, ks)| Group {
                        name: name.into(),
                        machines: ms.iter().map(|m| m.to_string()).collect(),
                        slots,
                        job_types: ks.iter().map(|k| k.to_string()).collect(),
                    })
                    .collect(),
            ),
            token_dag: None,
        }
    }

    /// Hierarchical load distribution over `2^(h-1)` machines with one token
    /// per node of a perfect binary tree; tokens `2i` and `2i+1` precede `i`.
    pub fn hierarchical(h: u32, nu: f64, machine_rates: &[f64]) -> Result<Self> {
        if h == 0 || h > 12 {
            return Err(Error::Usage(format!(
                "tree height must be in 1..=12, got {h}"
            )));
        }
        let leaves = 1usize << (h - 1);
        if machine_rates.len() != leaves {
            return Err(Error::Usage(format!(
                "height {h} needs {leaves} machine rates, got {}",
                machine_rates.len()
            )));
        }
        let n = (1usize << h) - 1;
        let vertices = (1..=n)
            .map(|i| DagVertex {
                name: i.to_string(),
                count: 1,
            })
            .collect();
        let mut arcs = Vec::new();
        for i in 1..leaves {
            arcs.push(((2 * i).to_string(), i.to_string()));
            arcs.push(((2 * i + 1).to_string(), i.to_string()));
        }
        let machines: Vec<Machine> = machine_rates
            .iter()
            .enumerate()
            .map(|(s, &rate)| Machine {
                name: format!("m{}", s + 1),
                rate,
                buffer: Some(1),
            })
            .collect();
        let bindings = (0..leaves)
            .map(|s| ((leaves + s).to_string(), vec![format!("m{}", s + 1)]))
            .collect();
        Ok(ClusterSpec {
            job_types: vec![JobType {
                name: "jobs".into(),
                rate: nu,
                slots: None,
                machines: None,
            }],
            machines,
            groups: None,
            token_dag: Some(TokenDag {
                vertices,
                arcs,
                machines: bindings,
                job_types: BTreeMap::from([("1".to_string(), vec!["jobs".to_string()])]),
            }),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slots_parse_number_or_inf() {
        let k: JobType = serde_json::from_str(r#"{"name":"A","rate":1.0,"slots":"inf"}"#).unwrap();
        assert_eq!(k.slots, Some(Slots::Infinite(InfTag::Inf)));
        let k: JobType = serde_json::from_str(r#"{"name":"A","rate":1.0,"slots":3}"#).unwrap();
        assert_eq!(k.slots.unwrap().finite(), Some(3));
        assert!(serde_json::from_str::<JobType>(r#"{"name":"A","rate":1.0,"slot":3}"#).is_err());
    }

    #[test]
    fn hierarchical_shape() {
        let spec = ClusterSpec::hierarchical(3, 1.0, &[1.0; 4]).unwrap();
        let dag = spec.token_dag.unwrap();
        assert_eq!(dag.vertices.len(), 7);
        assert_eq!(dag.arcs.len(), 6);
        assert_eq!(dag.machines["4"], vec!["m1"]);
        assert_eq!(dag.machines["7"], vec!["m4"]);
    }
}
