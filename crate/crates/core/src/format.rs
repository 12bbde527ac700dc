//! Versioned JSON files for models and cluster specs. Classes, servers and
//! positions are 1-based on disk.

use serde::{Deserialize, Serialize};

use crate::closed::{ClosedQueue, TandemNetwork, TandemState};
use crate::cluster::{ClusterSpec, CompiledTandem, Group, JobType, Machine, TokenDag};
use crate::error::{Error, Result};
use crate::model::{ClassId, Macrostate, PandsQueue, State, SwappingGraph};
use crate::rate::{MultiServer, RateFunction, RateModel, RateTable};

pub const MODEL_SCHEMA: &str = "pands-model/1";
pub const CLUSTER_SCHEMA: &str = "pands-cluster/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableEntry {
    pub macrostate: Vec<u32>,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaturationEntry {
    pub subset: Vec<usize>,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RateFunctionSpec {
    MultiServer {
        server_rates: Vec<f64>,
        /// Servers of each class, 1-based.
        compat: Vec<Vec<usize>>,
    },
    Table {
        entries: Vec<TableEntry>,
        #[serde(default)]
        saturation: Vec<SaturationEntry>,
    },
}

impl RateFunctionSpec {
    pub fn build(&self, n_classes: usize) -> Result<RateFunction> {
        match self {
            RateFunctionSpec::MultiServer {
                server_rates,
                compat,
            } => {
                if compat.len() != n_classes {
                    return Err(Error::Usage(format!(
                        "compat lists {} classes, the model has {n_classes}",
                        compat.len()
                    )));
                }
                let refs: Vec<&[usize]> = compat.iter().map(Vec::as_slice).collect();
                Ok(MultiServer::one_based(server_rates.clone(), &refs)?.into())
            }
            RateFunctionSpec::Table {
                entries,
                saturation,
            } => {
                let mut t = RateTable::new(n_classes);
                for e in entries {
                    t.insert(Macrostate(e.macrostate.clone()), e.rate)?;
                }
                for s in saturation {
                    let subset = one_based_classes(&s.subset, n_classes)?;
                    t.insert_saturation(&subset, s.rate)?;
                }
                Ok(t.into())
            }
        }
    }

    pub fn from_rate_function(f: &RateFunction) -> Result<Self> {
        match f {
            RateFunction::MultiServer(m) => Ok(RateFunctionSpec::MultiServer {
                server_rates: m.server_rates().to_vec(),
                compat: (0..f.n_classes())
                    .map(|i| m.compat(ClassId::new(i)).iter().map(|s| s + 1).collect())
                    .collect(),
            }),
            RateFunction::Table(t) => {
                let mut entries: Vec<TableEntry> = t
                    .entries()
                    .map(|(x, &rate)| TableEntry {
                        macrostate: x.0.clone(),
                        rate,
                    })
                    .collect();
                entries.sort_by(|a, b| a.macrostate.cmp(&b.macrostate));
                let mut saturation: Vec<SaturationEntry> = t
                    .saturation_entries()
                    .map(|(s, &rate)| SaturationEntry {
                        subset: s.iter().map(|k| k.index() + 1).collect(),
                        rate,
                    })
                    .collect();
                saturation.sort_by(|a, b| a.subset.cmp(&b.subset));
                Ok(RateFunctionSpec::Table {
                    entries,
                    saturation,
                })
            }
            RateFunction::Projected(_) => Err(Error::Unsupported(
                "projected rate functions have no file representation".into(),
            )),
        }
    }
}

fn one_based_classes(labels: &[usize], n: usize) -> Result<Vec<ClassId>> {
    labels
        .iter()
        .map(|&k| {
            if k == 0 || k > n {
                Err(Error::Usage(format!("class {k} is outside 1..={n}")))
            } else {
                Ok(ClassId::one_based(k))
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TandemInitial {
    pub first: Vec<usize>,
    pub second: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub schema: String,
    pub classes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_names: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arrival_rates: Option<Vec<f64>>,
    pub rate_function: RateFunctionSpec,
    /// Rate function of the second queue of a tandem.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub second_rate_function: Option<RateFunctionSpec>,
    #[serde(default)]
    pub swapping_edges: Vec<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_tandem: Option<TandemInitial>,
}

fn located(e: serde_json::Error) -> Error {
    Error::Parse(format!("line {} column {}: {e}", e.line(), e.column()))
}

fn check_schema(found: &str, want: &str) -> Result<()> {
    if found == want {
        Ok(())
    } else {
        Err(Error::Parse(format!(
            "unsupported schema {found:?}; expected {want:?}"
        )))
    }
}

pub fn parse_model(text: &str) -> Result<ModelFile> {
    let m: ModelFile = serde_json::from_str(text).map_err(located)?;
    check_schema(&m.schema, MODEL_SCHEMA)?;
    if m.classes == 0 {
        return Err(Error::Parse("a model needs at least one class".into()));
    }
    Ok(m)
}

impl ModelFile {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model files serialize")
    }

    pub fn rate_function(&self) -> Result<RateFunction> {
        self.rate_function.build(self.classes)
    }

    pub fn second_rate_function(&self) -> Result<RateFunction> {
        self.second_rate_function
            .as_ref()
            .ok_or_else(|| Error::Usage("the model has no second_rate_function".into()))?
            .build(self.classes)
    }

    pub fn swapping_graph(&self) -> Result<SwappingGraph> {
        SwappingGraph::one_based(self.classes, &self.swapping_edges)
    }

    pub fn open_queue(&self) -> Result<PandsQueue> {
        let rates = self
            .arrival_rates
            .clone()
            .ok_or_else(|| Error::Usage("the model has no arrival_rates".into()))?;
        if rates.len() != self.classes {
            return Err(Error::Usage(format!(
                "{} arrival rates for {} classes",
                rates.len(),
                self.classes
            )));
        }
        PandsQueue::new(rates, self.rate_function()?, self.swapping_graph()?)
    }

    pub fn state(&self, labels: &[usize]) -> Result<State> {
        Ok(State::new(one_based_classes(labels, self.classes)?))
    }

    pub fn initial_state(&self) -> Result<State> {
        let s = self
            .initial_state
            .as_ref()
            .ok_or_else(|| Error::Usage("the model has no initial_state".into()))?;
        self.state(s)
    }

    pub fn closed_queue(&self, initial: &State) -> Result<ClosedQueue> {
        ClosedQueue::from_initial(self.rate_function()?, self.swapping_graph()?, initial)
    }

    pub fn initial_tandem(&self) -> Result<TandemState> {
        let t = self
            .initial_tandem
            .as_ref()
            .ok_or_else(|| Error::Usage("the model has no initial_tandem".into()))?;
        Ok(TandemState::new(
            self.state(&t.first)?,
            self.state(&t.second)?,
        ))
    }

    pub fn tandem_network(&self, initial: &TandemState) -> Result<TandemNetwork> {
        TandemNetwork::new(
            self.rate_function()?,
            self.second_rate_function()?,
            self.swapping_graph()?,
            initial.macrostate(self.classes),
        )
    }

    /// Label of class `k` (0-based) for display.
    pub fn label(&self, k: ClassId) -> String {
        match &self.class_names {
            Some(names) => names[k.index()].clone(),
            None => k.to_string(),
        }
    }

    pub fn from_compiled(ct: &CompiledTandem) -> Result<Self> {
        let edges = ct
            .tandem
            .swapping
            .edges()
            .into_iter()
            .map(|(i, j)| (i.index() + 1, j.index() + 1))
            .collect();
        Ok(ModelFile {
            schema: MODEL_SCHEMA.into(),
            classes: ct.n_classes(),
            class_names: Some(ct.class_names.clone()),
            arrival_rates: None,
            rate_function: RateFunctionSpec::from_rate_function(&ct.tandem.rate_fn_1)?,
            second_rate_function: Some(RateFunctionSpec::from_rate_function(&ct.tandem.rate_fn_2)?),
            swapping_edges: edges,
            capacity: None,
            initial_state: None,
            initial_tandem: Some(TandemInitial {
                first: ct.initial.first.to_one_based(),
                second: ct.initial.second.to_one_based(),
            }),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClusterFile {
    schema: String,
    job_types: Vec<JobType>,
    machines: Vec<Machine>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    groups: Option<Vec<Group>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    token_dag: Option<TokenDag>,
}

pub fn parse_cluster(text: &str) -> Result<ClusterSpec> {
    let f: ClusterFile = serde_json::from_str(text).map_err(located)?;
    check_schema(&f.schema, CLUSTER_SCHEMA)?;
    let spec = ClusterSpec {
        job_types: f.job_types,
        machines: f.machines,
        groups: f.groups,
        token_dag: f.token_dag,
    };
    spec.mode()?;
    Ok(spec)
}

pub fn cluster_to_json(spec: &ClusterSpec) -> String {
    let f = ClusterFile {
        schema: CLUSTER_SCHEMA.into(),
        job_types: spec.job_types.clone(),
        machines: spec.machines.clone(),
        groups: spec.groups.clone(),
        token_dag: spec.token_dag.clone(),
    };
    serde_json::to_string_pretty(&f).expect("cluster files serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_CLASS: &str = r#"{
        "schema": "pands-model/1",
        "classes": 2,
        "arrival_rates": [0.8, 0.8],
        "rate_function": {"kind": "multi_server", "server_rates": [1, 1, 1], "compat": [[1, 3], [2, 3]]},
        "swapping_edges": [[1, 2]]
    }"#;

    #[test]
    fn parses_two_class_model() {
        let m = parse_model(TWO_CLASS).unwrap();
        let q = m.open_queue().unwrap();
        assert_eq!(q.n_classes(), 2);
        assert!((q.rate_fn.rate(&[ClassId(0), ClassId(1)]).unwrap() - 3.0).abs() < 1e-12);
        let back = parse_model(&m.to_json()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn rejects_unknown_fields_and_schemas() {
        let extra = TWO_CLASS.replace("\"classes\": 2", "\"classes\": 2, \"colour\": 1");
        assert!(matches!(parse_model(&extra), Err(Error::Parse(_))));
        let v2 = TWO_CLASS.replace("pands-model/1", "pands-model/2");
        assert!(matches!(parse_model(&v2), Err(Error::Parse(_))));
        let err = parse_model("{\n  \"schema\": 3\n}").unwrap_err();
        assert!(
            matches!(&err, Error::Parse(m) if m.contains("line 2")),
            "{err:?}"
        );
    }

    #[test]
    fn table_round_trip() {
        let text = r#"{
            "schema": "pands-model/1",
            "classes": 2,
            "rate_function": {"kind": "table",
                "entries": [{"macrostate": [1, 0], "rate": 1}, {"macrostate": [0, 1], "rate": 1},
                            {"macrostate": [1, 1], "rate": 2}],
                "saturation": [{"subset": [1, 2], "rate": 2}]},
            "initial_state": [2, 1]
        }"#;
        let m = parse_model(text).unwrap();
        let f = m.rate_function().unwrap();
        let spec = RateFunctionSpec::from_rate_function(&f).unwrap();
        assert_eq!(
            spec.build(2)
                .unwrap()
                .rate(&[ClassId(0), ClassId(1)])
                .unwrap(),
            2.0
        );
        assert_eq!(m.initial_state().unwrap(), State::one_based(&[2, 1]));
    }

    #[test]
    fn cluster_round_trip() {
        let spec = ClusterSpec::assignment(&[("A", 1.0, 2, &["1"])], &[("1", 1.0, 2)]);
        let text = cluster_to_json(&spec);
        assert!(text.contains(CLUSTER_SCHEMA));
        assert_eq!(parse_cluster(&text).unwrap(), spec);
    }
}
