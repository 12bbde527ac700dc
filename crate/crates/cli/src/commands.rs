use std::collections::HashMap;
use std::hash::Hash;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use pands::closed::{
    communicating_classes, isomorphic_model, stationary_closed, stationary_tandem, PlacementOrder,
    TandemState,
};
use pands::cluster::{compile, metrics, CompiledTandem, TokenKind};
use pands::dynamics::complete;
use pands::format::{parse_cluster, parse_model, ModelFile, CLUSTER_SCHEMA};
use pands::oracle::{
    closed_generator, open_generator, solve_stationary, tandem_generator, total_variation,
    Generator, StationarySolution,
};
use pands::product_form::{stability_check, stationary_truncated};
use pands::rate::Violation;
use pands::sim::{
    simulate, simulate_protocol, ClosedModel, Horizon, OpenModel, SimConfig, SimModel, TandemModel,
};
use pands::{validate_rate_function, ClassId, Error, RateModel, Result, State};

use crate::output::{kv, num, table, Report};
use crate::Command;

struct Input {
    text: String,
    sha256: String,
}

fn read(path: &Path) -> Result<Input> {
    let bytes = std::fs::read(path)
        .map_err(|e| Error::Usage(format!("cannot read {}: {e}", path.display())))?;
    let sha256 = hex::encode(Sha256::digest(&bytes));
    let text = String::from_utf8(bytes)
        .map_err(|_| Error::Parse(format!("{} is not UTF-8", path.display())))?;
    Ok(Input { text, sha256 })
}

fn load_model(path: &Path) -> Result<(ModelFile, String)> {
    let input = read(path)?;
    Ok((parse_model(&input.text)?, input.sha256))
}

/// Quick axiom check before any analysis: short states only, and states a
/// rate table does not cover are skipped.
fn precheck(m: &ModelFile) -> Result<()> {
    let mut fns = vec![("rate_function", m.rate_function()?)];
    if m.second_rate_function.is_some() {
        fns.push(("second_rate_function", m.second_rate_function()?));
    }
    let n = m.classes.max(1);
    let mut depth = 0;
    let mut states = 1usize;
    while depth < 4 {
        let next = states.saturating_add(n.saturating_pow(depth as u32 + 1));
        if next > 20_000 {
            break;
        }
        states = next;
        depth += 1;
    }
    for (name, f) in fns {
        let r = validate_rate_function(&f, depth);
        if let Some(v) = r
            .violations
            .iter()
            .find(|v| !matches!(v, Violation::Unevaluable { .. }))
        {
            return Err(Error::Usage(format!(
                "{name} fails validation: {}; see the validate command",
                serde_json::to_string(v).expect("json")
            )));
        }
    }
    Ok(())
}

/// `"1,3,2"`, `"(1,3,2)"` or `""` into 1-based labels.
fn parse_list(s: &str) -> Result<Vec<usize>> {
    let inner = s.trim().trim_start_matches('(').trim_end_matches(')');
    if inner.trim().is_empty() {
        return Ok(Vec::new());
    }
    inner
        .split(',')
        .map(|x| {
            x.trim()
                .parse::<usize>()
                .map_err(|_| Error::Usage(format!("{x:?} is not a class label")))
        })
        .collect()
}

fn label_state(m: &ModelFile, c: &[ClassId]) -> String {
    let parts: Vec<String> = c.iter().map(|&k| m.label(k)).collect();
    format!("({})", parts.join(","))
}

fn label_tandem(m: &ModelFile, s: &TandemState) -> String {
    let f: Vec<String> = s.first.iter().map(|&k| m.label(k)).collect();
    let d: Vec<String> = s.second.iter().map(|&k| m.label(k)).collect();
    format!("({};{})", f.join(","), d.join(","))
}

fn order_arcs(m: &ModelFile, o: &PlacementOrder) -> Vec<(String, String)> {
    o.arcs()
        .iter()
        .map(|&(i, j)| (m.label(i), m.label(j)))
        .collect()
}

fn closed_initial(m: &ModelFile, flag: &Option<String>) -> Result<State> {
    match flag {
        Some(s) => m.state(&parse_list(s)?),
        None => m.initial_state(),
    }
}

fn tandem_initial(
    m: &ModelFile,
    first: &Option<String>,
    second: &Option<String>,
) -> Result<TandemState> {
    match (first, second) {
        (Some(f), Some(s)) => Ok(TandemState::new(
            m.state(&parse_list(f)?)?,
            m.state(&parse_list(s)?)?,
        )),
        _ => m.initial_tandem(),
    }
}

fn capacity_of(m: &ModelFile, flag: Option<usize>) -> Result<usize> {
    flag.or(m.capacity).ok_or_else(|| {
        Error::Usage("no capacity given; pass --capacity or set it in the model".into())
    })
}

fn prob_rows(
    labels: Vec<String>,
    probs: &[f64],
    top: Option<usize>,
) -> (Vec<Value>, Vec<Vec<String>>) {
    let mut idx: Vec<usize> = (0..probs.len()).collect();
    if let Some(k) = top {
        idx.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
        idx.truncate(k);
    }
    let json = idx
        .iter()
        .map(|&k| json!({"state": labels[k], "prob": probs[k]}))
        .collect();
    let rows = idx
        .iter()
        .map(|&k| vec![labels[k].clone(), num(probs[k])])
        .collect();
    (json, rows)
}

pub fn run(cmd: &Command, budget: usize) -> Result<(Report, Option<String>)> {
    match cmd {
        Command::Validate { model, max_total } => {
            let (m, h) = load_model(model)?;
            let mut reports = vec![(
                "first",
                validate_rate_function(&m.rate_function()?, *max_total as usize),
            )];
            if m.second_rate_function.is_some() {
                reports.push((
                    "second",
                    validate_rate_function(&m.second_rate_function()?, *max_total as usize),
                ));
            }
            let passed = reports.iter().all(|(_, r)| r.passed());
            let mut t = String::new();
            for (name, r) in &reports {
                t.push_str(&format!(
                    "{name} rate function: {} ({} states up to total {}, {} violations)\n",
                    if r.passed() { "pass" } else { "FAIL" },
                    r.states_checked,
                    r.max_total,
                    r.violations.len()
                ));
                for v in r.violations.iter().take(20) {
                    t.push_str(&format!("  {}\n", serde_json::to_string(v).expect("json")));
                }
            }
            let result: std::collections::BTreeMap<&str, _> =
                reports.iter().map(|(n, r)| (*n, r)).collect();
            let mut rep = Report::new("validate", json!({"passed": passed, "reports": result}), t);
            rep.status = if passed { 0 } else { 1 };
            Ok((rep, Some(h)))
        }
        Command::Stability { model } => {
            let (m, h) = load_model(model)?;
            precheck(&m)?;
            let q = m.open_queue()?;
            let r = stability_check(&q)?;
            let rows: Vec<Vec<String>> = r
                .limmu_values
                .iter()
                .map(|(subset, lim)| {
                    let load: f64 = subset.iter().map(|&k| q.arrival_rates[k - 1]).sum();
                    vec![
                        format!("{subset:?}"),
                        num(load),
                        num(*lim),
                        if load < *lim { "ok" } else { "violated" }.to_string(),
                    ]
                })
                .collect();
            let t = format!(
                "stable: {}\n{}",
                r.stable,
                table(&["subset", "arrival_sum", "limmu", "status"], &rows)
            );
            Ok((Report::new("stability", &r, t), Some(h)))
        }
        Command::Analyze {
            model,
            capacity,
            top,
        } => {
            let (m, h) = load_model(model)?;
            precheck(&m)?;
            let q = m.open_queue()?;
            let cap = capacity_of(&m, *capacity)?;
            let d = stationary_truncated(&q, cap, budget)?;
            let labels = d.states.iter().map(|c| label_state(&m, c)).collect();
            let (states, rows) = prob_rows(labels, &d.probs, *top);
            let means = d.mean_counts();
            let mean_rows: Vec<Vec<String>> = means
                .iter()
                .enumerate()
                .map(|(i, x)| vec![m.label(ClassId::new(i)), num(*x)])
                .collect();
            let t = format!(
                "{}\n{}\n{}",
                kv(&[
                    ("capacity", cap.to_string()),
                    ("states", d.states.len().to_string()),
                    ("log_normalizer", num(d.log_normalizer)),
                ]),
                table(&["class", "mean_count"], &mean_rows),
                table(&["state", "prob"], &rows)
            );
            let result = json!({
                "capacity": cap,
                "n_states": d.states.len(),
                "log_normalizer": d.log_normalizer,
                "mean_counts": means,
                "distribution": states,
            });
            Ok((Report::new("analyze", result, t), Some(h)))
        }
        Command::Trace {
            model,
            state,
            position,
        } => {
            let (m, h) = load_model(model)?;
            let c = m.state(&parse_list(state)?)?;
            if *position == 0 {
                return Err(Error::Usage("positions are 1-based".into()));
            }
            let o = complete(&m.swapping_graph()?, &c, position - 1)?;
            let rate = m
                .rate_function()?
                .increments(&c)
                .ok()
                .map(|v| v[position - 1]);
            let chain = o.chain_one_based();
            let t = kv(&[
                ("state", label_state(&m, &c)),
                ("position", position.to_string()),
                (
                    "swap_chain",
                    format!(
                        "({})",
                        chain
                            .iter()
                            .map(|p| p.to_string())
                            .collect::<Vec<_>>()
                            .join(",")
                    ),
                ),
                ("departing_class", m.label(o.departing_class)),
                ("next_state", label_state(&m, &o.next_state)),
                ("rate", rate.map_or("-".into(), num)),
            ]);
            let result = json!({
                "state": c.to_one_based(),
                "position": position,
                "swap_chain": chain,
                "departing_class": o.departing_class.index() + 1,
                "next_state": o.next_state.to_one_based(),
                "rate": rate,
            });
            Ok((Report::new("trace", result, t), Some(h)))
        }
        Command::ClosedAnalyze { model, initial } => {
            let (m, h) = load_model(model)?;
            precheck(&m)?;
            let init = closed_initial(&m, initial)?;
            let q = m.closed_queue(&init)?;
            let d = stationary_closed(&q, &init, budget)?;
            let labels = d.states.iter().map(|c| label_state(&m, c)).collect();
            let (states, rows) = prob_rows(labels, &d.probs, None);
            let arcs = d.order.as_ref().map(|o| order_arcs(&m, o));
            let mut t = kv(&[
                ("initial", label_state(&m, &init)),
                ("adhering", d.order.is_some().to_string()),
                ("enumerated", d.enumerated.to_string()),
                ("support", d.states.len().to_string()),
                (
                    "closed_components",
                    d.partition.closed_components.to_string(),
                ),
                ("transient_states", d.partition.transient_states.to_string()),
            ]);
            if let Some(iso) = &d.iso {
                t.push_str(&format!("isomorphic initial ({})\n", iso.initial.join(",")));
            }
            t.push_str(&table(&["state", "prob"], &rows));
            let result = json!({
                "initial": init.to_one_based(),
                "placement_order": arcs,
                "enumerated": d.enumerated,
                "partition": d.partition,
                "iso": d.iso,
                "distribution": states,
            });
            let mut rep = Report::new("closed-analyze", result, t);
            rep.warnings = d.warnings.clone();
            Ok((rep, Some(h)))
        }
        Command::TandemAnalyze {
            model,
            first,
            second,
        } => {
            let (m, h) = load_model(model)?;
            precheck(&m)?;
            let init = tandem_initial(&m, first, second)?;
            let net = m.tandem_network(&init)?;
            let d = stationary_tandem(&net, &init, budget)?;
            let labels = d.states.iter().map(|s| label_tandem(&m, s)).collect();
            let (states, rows) = prob_rows(labels, &d.probs, None);
            let mut t = kv(&[
                ("initial", label_tandem(&m, &init)),
                ("enumerated", d.enumerated.to_string()),
                ("support", d.states.len().to_string()),
                (
                    "closed_components",
                    d.partition.closed_components.to_string(),
                ),
                ("transient_states", d.partition.transient_states.to_string()),
            ]);
            t.push_str(&table(&["state", "prob"], &rows));
            let result = json!({
                "initial": {"first": init.first.to_one_based(), "second": init.second.to_one_based()},
                "placement_order": order_arcs(&m, &d.order),
                "enumerated": d.enumerated,
                "partition": d.partition,
                "distribution": states,
            });
            let mut rep = Report::new("tandem-analyze", result, t);
            rep.warnings = d.warnings.clone();
            Ok((rep, Some(h)))
        }
        Command::Classes {
            model,
            initial,
            first,
            second,
        } => {
            let (m, h) = load_model(model)?;
            precheck(&m)?;
            let (labels, succ) = if m.second_rate_function.is_some() {
                let init = tandem_initial(&m, first, second)?;
                let g = tandem_generator(&m.tandem_network(&init)?, &init, budget)?;
                (
                    g.states
                        .iter()
                        .map(|s| label_tandem(&m, s))
                        .collect::<Vec<_>>(),
                    g.successors(),
                )
            } else {
                let init = closed_initial(&m, initial)?;
                let g = closed_generator(&m.closed_queue(&init)?, &init, budget)?;
                (
                    g.states
                        .iter()
                        .map(|c| label_state(&m, c))
                        .collect::<Vec<_>>(),
                    g.successors(),
                )
            };
            let p = communicating_classes(&succ);
            let comps: Vec<Value> = p
                .components
                .iter()
                .zip(&p.closed)
                .map(|(c, &closed)| json!({"size": c.len(), "closed": closed, "first_state": labels[c[0]]}))
                .collect();
            let rows: Vec<Vec<String>> = p
                .components
                .iter()
                .zip(&p.closed)
                .enumerate()
                .map(|(k, (c, &closed))| {
                    vec![
                        (k + 1).to_string(),
                        c.len().to_string(),
                        if closed { "closed" } else { "transient" }.to_string(),
                        labels[c[0]].clone(),
                    ]
                })
                .collect();
            let t = format!(
                "{}{}",
                kv(&[
                    ("reachable_states", labels.len().to_string()),
                    ("components", p.components.len().to_string()),
                    ("closed_components", p.n_closed().to_string()),
                    ("irreducible", p.is_irreducible().to_string()),
                ]),
                table(&["component", "size", "kind", "first_state"], &rows)
            );
            let mut rep = Report::new(
                "classes",
                json!({
                    "reachable_states": labels.len(),
                    "irreducible": p.is_irreducible(),
                    "components": comps,
                }),
                t,
            );
            if p.n_closed() > 1 {
                rep.warnings
                    .push(format!("{} closed communicating classes", p.n_closed()));
            }
            Ok((rep, Some(h)))
        }
        Command::Iso { model, initial } => {
            let (m, h) = load_model(model)?;
            precheck(&m)?;
            let init = closed_initial(&m, initial)?;
            let iso = isomorphic_model(&m.closed_queue(&init)?, &init)?;
            let g = &iso.iso_queue.swapping;
            let edges: Vec<(String, String)> = g
                .edges()
                .into_iter()
                .map(|(i, j)| (iso.labels[i.index()].clone(), iso.labels[j.index()].clone()))
                .collect();
            let order = PlacementOrder::induced_by(g, &iso.iso_initial).map(|o| {
                o.arcs()
                    .iter()
                    .map(|&(i, j)| (iso.labels[i.index()].clone(), iso.labels[j.index()].clone()))
                    .collect::<Vec<_>>()
            });
            let projection: Vec<usize> = iso.projection.iter().map(|k| k.index() + 1).collect();
            let rows: Vec<Vec<String>> = iso
                .labels
                .iter()
                .zip(&projection)
                .map(|(l, p)| vec![l.clone(), p.to_string()])
                .collect();
            let t = format!(
                "initial ({})\nisomorphic ({})\n{}edges {}\n",
                init.to_one_based()
                    .iter()
                    .map(|k| k.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
                iso.label_state(&iso.iso_initial).join(","),
                table(&["class", "original"], &rows),
                edges
                    .iter()
                    .map(|(a, b)| format!("{a}-{b}"))
                    .collect::<Vec<_>>()
                    .join(" ")
            );
            let result = json!({
                "labels": iso.labels,
                "projection": projection,
                "initial": iso.label_state(&iso.iso_initial),
                "edges": edges,
                "placement_order": order,
            });
            Ok((Report::new("iso", result, t), Some(h)))
        }
        Command::ClusterCompile {
            cluster,
            emit_model,
        } => {
            let input = read(cluster)?;
            let spec = parse_cluster(&input.text)?;
            let ct = compile(&spec)?;
            let mf = ModelFile::from_compiled(&ct)?;
            if let Some(path) = emit_model {
                std::fs::write(path, mf.to_json() + "\n")
                    .map_err(|e| Error::Usage(format!("cannot write {}: {e}", path.display())))?;
            }
            let classes = class_rows(&ct);
            let rows: Vec<Vec<String>> = classes
                .iter()
                .map(|c| {
                    vec![
                        c.name.clone(),
                        c.kind.clone(),
                        c.tokens.to_string(),
                        c.machines.join(","),
                        c.job_types.join(","),
                    ]
                })
                .collect();
            let arcs: Vec<(String, String)> = ct
                .order
                .arcs()
                .iter()
                .map(|&(i, j)| (ct.name(i).to_string(), ct.name(j).to_string()))
                .collect();
            let t = format!(
                "mode {:?}\n{}placement {}\ninitial {}\n",
                ct.mode,
                table(
                    &[
                        "class",
                        "kind",
                        "tokens",
                        "first_queue_servers",
                        "second_queue_servers"
                    ],
                    &rows
                ),
                arcs.iter()
                    .map(|(a, b)| format!("{a}<{b}"))
                    .collect::<Vec<_>>()
                    .join(" "),
                ct.format_tandem(&ct.initial)
            );
            let result = json!({
                "mode": ct.mode,
                "classes": classes,
                "placement_order": arcs,
                "initial": ct.format_tandem(&ct.initial),
                "model": mf,
            });
            Ok((
                Report::new("cluster-compile", result, t),
                Some(input.sha256),
            ))
        }
        Command::ClusterAnalyze { cluster } => {
            let input = read(cluster)?;
            let spec = parse_cluster(&input.text)?;
            let ct = compile(&spec)?;
            let d = stationary_tandem(&ct.tandem, &ct.initial, budget)?;
            let mx = metrics(&ct, &d);
            let trows: Vec<Vec<String>> = mx
                .types
                .iter()
                .map(|k| {
                    vec![
                        k.name.clone(),
                        num(k.arrival_rate),
                        num(k.blocking),
                        num(k.throughput),
                        k.mean_unassigned.map_or("-".into(), num),
                    ]
                })
                .collect();
            let crows: Vec<Vec<String>> = mx
                .classes
                .iter()
                .map(|c| vec![c.name.clone(), num(c.mean_held), num(c.mean_available)])
                .collect();
            let t = format!(
                "{}\n{}\n{}",
                kv(&[
                    ("states", d.states.len().to_string()),
                    ("mean_jobs", num(mx.mean_jobs)),
                ]),
                table(
                    &[
                        "type",
                        "arrival_rate",
                        "blocking",
                        "throughput",
                        "mean_unassigned"
                    ],
                    &trows
                ),
                table(&["class", "mean_held", "mean_available"], &crows)
            );
            let mut rep = Report::new(
                "cluster-analyze",
                json!({"states": d.states.len(), "partition": d.partition, "metrics": mx}),
                t,
            );
            rep.warnings = d.warnings.clone();
            Ok((rep, Some(input.sha256)))
        }
        Command::Simulate {
            file,
            events,
            time,
            seed,
            reps,
            warmup,
            capacity,
            initial,
            trace,
            trace_events,
        } => {
            let horizon = match (events, time) {
                (_, Some(t)) => Horizon::Time(*t),
                (Some(n), None) => Horizon::Events(*n),
                (None, None) => Horizon::Events(1_000_000),
            };
            let cfg = SimConfig {
                horizon,
                warmup: *warmup,
                seed: *seed,
                replications: *reps,
                trace_events: if trace.is_some() { *trace_events } else { 0 },
            };
            cfg.validate()?;
            let input = read(file)?;
            let schema: Value = serde_json::from_str(&input.text).map_err(|e| {
                Error::Parse(format!("line {} column {}: {e}", e.line(), e.column()))
            })?;
            if schema.get("schema").and_then(Value::as_str) == Some(CLUSTER_SCHEMA) {
                let spec = parse_cluster(&input.text)?;
                let r = simulate_protocol(&spec, &cfg)?;
                let rows: Vec<Vec<String>> = r
                    .types
                    .iter()
                    .map(|k| {
                        vec![
                            k.name.clone(),
                            k.arrivals.to_string(),
                            k.rejections.to_string(),
                            num(k.blocking.mean),
                            num(k.blocking.se),
                            num(k.mean_unassigned.mean),
                        ]
                    })
                    .collect();
                let t = format!(
                    "protocol simulation, {} replications, mean jobs {} (se {})\n{}",
                    r.replications,
                    num(r.mean_jobs.mean),
                    num(r.mean_jobs.se),
                    table(
                        &[
                            "type",
                            "arrivals",
                            "rejections",
                            "blocking",
                            "se",
                            "mean_unassigned"
                        ],
                        &rows
                    )
                );
                return Ok((
                    Report::new(
                        "simulate",
                        json!({"kind": "protocol", "config": cfg, "result": r}),
                        t,
                    ),
                    Some(input.sha256),
                ));
            }
            let m = parse_model(&input.text)?;
            precheck(&m)?;
            let report = if m.second_rate_function.is_some() {
                let init = m.initial_tandem()?;
                let model = TandemModel::new(m.tandem_network(&init)?, init)?;
                sim_report(&model, &cfg, "tandem", |s| label_tandem(&m, s))?
            } else if initial.is_some() || m.initial_state.is_some() {
                let init = closed_initial(&m, initial)?;
                let model = ClosedModel::new(m.closed_queue(&init)?, init)?;
                sim_report(&model, &cfg, "closed", |c| label_state(&m, c))?
            } else {
                let model = OpenModel {
                    queue: m.open_queue()?,
                    capacity: capacity_of(&m, *capacity)?,
                };
                sim_report(&model, &cfg, "open", |c| label_state(&m, c))?
            };
            if let Some(path) = trace {
                let lines = report.1.join("\n");
                std::fs::write(path, lines + "\n")
                    .map_err(|e| Error::Usage(format!("cannot write {}: {e}", path.display())))?;
            }
            Ok((report.0, Some(input.sha256)))
        }
        Command::OracleCompare {
            model,
            capacity,
            initial,
            first,
            second,
            threshold,
            triplets,
        } => {
            let (m, h) = load_model(model)?;
            precheck(&m)?;
            let cmp = if m.second_rate_function.is_some() {
                let init = tandem_initial(&m, first, second)?;
                let net = m.tandem_network(&init)?;
                let d = stationary_tandem(&net, &init, budget)?;
                let g = tandem_generator(&net, &init, budget)?;
                let analytic: HashMap<TandemState, f64> = d
                    .states
                    .iter()
                    .cloned()
                    .zip(d.probs.iter().copied())
                    .collect();
                compare("tandem", &g, &analytic, &init, |s| label_tandem(&m, s))?
            } else if initial.is_some() || m.initial_state.is_some() {
                let init = closed_initial(&m, initial)?;
                let q = m.closed_queue(&init)?;
                let d = stationary_closed(&q, &init, budget)?;
                let g = closed_generator(&q, &init, budget)?;
                let analytic: HashMap<State, f64> = d
                    .states
                    .iter()
                    .cloned()
                    .zip(d.probs.iter().copied())
                    .collect();
                compare("closed", &g, &analytic, &init, |c| label_state(&m, c))?
            } else {
                let q = m.open_queue()?;
                let cap = capacity_of(&m, *capacity)?;
                let d = stationary_truncated(&q, cap, budget)?;
                let g = open_generator(&q, cap, budget)?;
                let analytic: HashMap<State, f64> = d
                    .states
                    .iter()
                    .cloned()
                    .zip(d.probs.iter().copied())
                    .collect();
                compare("open", &g, &analytic, &State::empty(), |c| {
                    label_state(&m, c)
                })?
            };
            if let Some(path) = triplets {
                std::fs::write(path, &cmp.triplets)
                    .map_err(|e| Error::Usage(format!("cannot write {}: {e}", path.display())))?;
            }
            let pass = cmp.tv < *threshold;
            let t = kv(&[
                ("mode", cmp.mode.to_string()),
                ("states", cmp.n_states.to_string()),
                ("oracle_method", cmp.method.clone()),
                ("oracle_residual", num(cmp.oracle_residual)),
                ("analytic_residual", num(cmp.analytic_residual)),
                ("max_abs_diff", num(cmp.max_abs_diff)),
                ("tv", num(cmp.tv)),
                ("threshold", num(*threshold)),
                ("pass", pass.to_string()),
            ]);
            let mut rep = Report::new(
                "oracle-compare",
                json!({
                    "mode": cmp.mode,
                    "n_states": cmp.n_states,
                    "oracle_method": cmp.method,
                    "oracle_residual": cmp.oracle_residual,
                    "analytic_residual": cmp.analytic_residual,
                    "max_abs_diff": cmp.max_abs_diff,
                    "tv": cmp.tv,
                    "threshold": threshold,
                    "pass": pass,
                    "states": cmp.per_state,
                }),
                t,
            );
            rep.warnings = cmp.warnings;
            rep.status = if pass { 0 } else { 1 };
            Ok((rep, Some(h)))
        }
    }
}

#[derive(Serialize)]
struct ClassRow {
    name: String,
    kind: String,
    tokens: u32,
    machines: Vec<String>,
    job_types: Vec<String>,
}

fn class_rows(ct: &CompiledTandem) -> Vec<ClassRow> {
    (0..ct.n_classes())
        .map(|i| ClassRow {
            name: ct.class_names[i].clone(),
            kind: match ct.kinds[i] {
                TokenKind::JobType(_) => "job_type",
                TokenKind::Machine(_) => "machine",
                TokenKind::Group(_) => "group",
                TokenKind::Node => "node",
            }
            .into(),
            tokens: ct.tandem.population.0[i],
            machines: ct.machine_sets[i]
                .iter()
                .map(|&s| ct.machine_names[s].clone())
                .collect(),
            job_types: ct.type_sets[i]
                .iter()
                .map(|&k| ct.type_names[k].clone())
                .collect(),
        })
        .collect()
}

fn sim_report<M: SimModel>(
    model: &M,
    cfg: &SimConfig,
    kind: &str,
    label: impl Fn(&M::State) -> String,
) -> Result<(Report, Vec<String>)> {
    let r = simulate(model, cfg)?;
    let rows: Vec<Vec<String>> = r
        .states
        .iter()
        .zip(r.occupancy.iter().zip(&r.occupancy_se))
        .map(|(s, (p, se))| vec![label(s), num(*p), num(*se)])
        .collect();
    let occupancy: Vec<Value> = r
        .states
        .iter()
        .zip(r.occupancy.iter().zip(&r.occupancy_se))
        .map(|(s, (p, se))| json!({"state": label(s), "fraction": p, "se": se}))
        .collect();
    let c = &r.counters;
    let t = format!(
        "{}\n{}",
        kv(&[
            ("model", kind.to_string()),
            ("replications", r.replications().to_string()),
            ("events", c.events.to_string()),
            ("arrivals", format!("{:?}", c.arrivals)),
            ("completions", c.completions.to_string()),
            ("departures", format!("{:?}", c.departures)),
            ("served", format!("{:?}", c.served)),
        ]),
        table(&["state", "fraction", "se"], &rows)
    );
    let result = json!({
        "kind": kind,
        "config": cfg,
        "observed_time": r.observed_time,
        "counters": r.counters,
        "occupancy": occupancy,
    });
    Ok((Report::new("simulate", result, t), r.trace.clone()))
}

struct Comparison {
    mode: &'static str,
    n_states: usize,
    method: String,
    oracle_residual: f64,
    analytic_residual: f64,
    max_abs_diff: f64,
    tv: f64,
    per_state: Vec<Value>,
    warnings: Vec<String>,
    triplets: String,
}

/// The oracle's closed class that holds the analytic support.
fn matching_class<S: Hash + Eq + Clone>(
    g: &Generator<S>,
    sol: &StationarySolution,
    analytic: &HashMap<S, f64>,
    initial: &S,
) -> Result<usize> {
    let probe = analytic
        .iter()
        .filter(|(_, &p)| p > 0.0)
        .find_map(|(s, _)| g.index_of(s))
        .or_else(|| g.index_of(initial))
        .ok_or_else(|| {
            Error::Structure("analytic support is disjoint from the oracle state space".into())
        })?;
    sol.class_of(probe).ok_or_else(|| {
        Error::Structure("analytic support lies in a transient class of the oracle".into())
    })
}

fn compare<S: Hash + Eq + Clone>(
    mode: &'static str,
    g: &Generator<S>,
    analytic: &HashMap<S, f64>,
    initial: &S,
    label: impl Fn(&S) -> String,
) -> Result<Comparison> {
    let sol = solve_stationary(g)?;
    let mut warnings = Vec::new();
    if sol.classes.len() > 1 {
        warnings.push(format!(
            "the oracle chain has {} closed classes",
            sol.classes.len()
        ));
    }
    let k = matching_class(g, &sol, analytic, initial)?;
    let oracle = sol.full(k);
    let mut a: Vec<f64> = g
        .states
        .iter()
        .map(|s| analytic.get(s).copied().unwrap_or(0.0))
        .collect();
    let missing: f64 = analytic
        .iter()
        .filter(|(s, _)| g.index_of(s).is_none())
        .map(|(_, p)| p)
        .sum();
    if missing > 0.0 {
        warnings.push(format!(
            "analytic mass {missing:e} lies outside the reachable set"
        ));
    }
    let tv = total_variation(&a, &oracle)? + missing / 2.0;
    let max_abs_diff = a
        .iter()
        .zip(&oracle)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let analytic_residual = g.residual(&a);
    let per_state = g
        .states
        .iter()
        .zip(a.iter_mut().zip(&oracle))
        .map(|(s, (x, y))| json!({"state": label(s), "analytic": *x, "oracle": y}))
        .collect();
    let mut triplets = format!("# pands-triplets/1 n={} (1-based row col rate)\n", g.len());
    for (i, s) in g.states.iter().enumerate() {
        triplets.push_str(&format!("# state {} {}\n", i + 1, label(s)));
    }
    for (i, j, v) in g.triplets() {
        triplets.push_str(&format!("{} {} {v:e}\n", i + 1, j + 1));
    }
    Ok(Comparison {
        mode,
        n_states: g.len(),
        method: format!("{:?}", sol.classes[k].method),
        oracle_residual: sol.classes[k].residual,
        analytic_residual,
        max_abs_diff,
        tv,
        per_state,
        warnings,
        triplets,
    })
}
