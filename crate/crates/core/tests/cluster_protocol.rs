//! The compiled tandem and the direct token protocol, driven by the same
//! event sequence, must stay in the same configuration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pands::closed::{stationary_tandem, tandem_step, QueueIndex, TandemState};
use pands::cluster::{compile, ClusterSpec, CompiledTandem, TokenKind};
use pands::oracle::{solve_stationary, tandem_generator, total_variation};
use pands::sim::{ArrivalOutcome, ProtocolState, ProtocolSystem};
use pands::{ClassId, RateModel};

fn first_position(s: &pands::State, sets: &[Vec<usize>], x: usize) -> Option<usize> {
    s.iter().position(|k| sets[k.index()].contains(&x))
}

fn token_class(ct: &CompiledTandem, sys: &ProtocolSystem, group: usize) -> ClassId {
    ct.class_index(&sys.groups[group].name).unwrap()
}

fn check_same(
    ct: &CompiledTandem,
    sys: &ProtocolSystem,
    st: &ProtocolState,
    s: &TandemState,
    step: usize,
) {
    let c: Vec<ClassId> = st
        .jobs
        .iter()
        .map(|j| match j.group {
            Some(t) => token_class(ct, sys, t),
            None => ct.class_index(&sys.type_names[j.job_type]).unwrap(),
        })
        .collect();
    assert_eq!(
        s.first.classes(),
        &c[..],
        "step {step}: first queue {}",
        ct.format_tandem(s)
    );

    let free: Vec<ClassId> = s
        .second
        .iter()
        .copied()
        .filter(|k| !matches!(ct.kinds[k.index()], TokenKind::JobType(_)))
        .collect();
    let avail: Vec<ClassId> = st
        .available
        .iter()
        .map(|&t| token_class(ct, sys, t))
        .collect();
    assert_eq!(
        free,
        avail,
        "step {step}: available tokens {}",
        ct.format_tandem(s)
    );

    for (k, name) in sys.type_names.iter().enumerate() {
        let kc = ct.class_index(name).unwrap();
        let in_d = s.second.iter().filter(|&&x| x == kc).count() as u32;
        assert_eq!(
            in_d + st.unassigned[k],
            sys.type_slots[k],
            "step {step}: type {name}"
        );
    }

    // service rates agree machine by machine
    let busy: f64 = (0..sys.machine_rates.len())
        .filter(|&m| st.busy(m))
        .map(|m| sys.machine_rates[m])
        .sum();
    let mu = ct.tandem.rate_fn_1.rate(&s.first).unwrap();
    assert!((busy - mu).abs() < 1e-12, "step {step}: {busy} vs {mu}");
}

fn lockstep(spec: &ClusterSpec, events: usize, seed: u64) -> (usize, usize) {
    let ct = compile(spec).unwrap();
    let sys = ProtocolSystem::from_spec(spec).unwrap();
    let mut st = ProtocolState::new(&sys);
    let mut s = ct.initial.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_types = sys.type_names.len();
    let n_machines = sys.machine_rates.len();
    let (mut rejections, mut handovers) = (0, 0);
    check_same(&ct, &sys, &st, &s, 0);
    for step in 1..=events {
        // arrivals and completions equally likely, so buffers fill and drain
        if rng.random_bool(0.5) {
            let k = rng.random_range(0..n_types);
            let out = st.arrive(&sys, k);
            match first_position(&s.second, &ct.type_sets, k) {
                Some(p) => {
                    assert_ne!(out, ArrivalOutcome::Rejected, "step {step}");
                    s = tandem_step(&ct.tandem, &s, QueueIndex::Second, p).unwrap();
                }
                None => {
                    assert_eq!(out, ArrivalOutcome::Rejected, "step {step}");
                    rejections += 1;
                }
            }
        } else {
            let m = rng.random_range(0..n_machines);
            match first_position(&s.first, &ct.machine_sets, m) {
                Some(p) => {
                    assert!(st.busy(m), "step {step}");
                    let d = st.complete(&sys, m).unwrap();
                    handovers += d.handed_to.is_some() as usize;
                    s = tandem_step(&ct.tandem, &s, QueueIndex::First, p).unwrap();
                }
                None => assert!(!st.busy(m), "step {step}"),
            }
        }
        check_same(&ct, &sys, &st, &s, step);
    }
    (rejections, handovers)
}

fn three_machines(l: u32) -> ClusterSpec {
    ClusterSpec::assignment(
        &[("A", 1.0, l, &["1", "3"]), ("B", 1.0, l, &["2", "3"])],
        &[("1", 1.0, l), ("2", 1.0, l), ("3", 1.0, l)],
    )
}

#[test]
fn assignment_cluster_single_slots() {
    let (rej, hand) = lockstep(&three_machines(1), 10_000, 1);
    assert!(rej > 0 && hand > 0, "{rej} rejections, {hand} handovers");
}

#[test]
fn assignment_cluster_two_slots() {
    let (rej, hand) = lockstep(&three_machines(2), 10_000, 2);
    assert!(rej > 0 && hand > 0, "{rej} rejections, {hand} handovers");
}

#[test]
fn uneven_assignment_cluster() {
    let spec = ClusterSpec::assignment(
        &[
            ("A", 1.0, 1, &["1", "2"]),
            ("B", 1.0, 3, &["2", "3"]),
            ("C", 1.0, 2, &["1", "3", "4"]),
        ],
        &[("1", 1.0, 2), ("2", 1.0, 1), ("3", 1.0, 3), ("4", 2.0, 1)],
    );
    for seed in 0..4 {
        lockstep(&spec, 10_000, 10 + seed);
    }
}

#[test]
fn grouped_cluster() {
    let spec = ClusterSpec::grouped(
        &[("A", 1.0, 2), ("B", 1.0, 1)],
        &[("m1", 1.0), ("m2", 1.0), ("m3", 1.0)],
        &[
            ("g1", &["m1", "m2"], 2, &["A"]),
            ("g2", &["m2", "m3"], 1, &["A", "B"]),
        ],
    );
    for seed in 0..4 {
        lockstep(&spec, 10_000, 20 + seed);
    }
}

/// Type classes never get service in the first queue and machine classes
/// never get service in the second, on every reachable state.
#[test]
fn structural_zero_rates() {
    for spec in [three_machines(1), three_machines(2)] {
        let ct = compile(&spec).unwrap();
        let d = stationary_tandem(&ct.tandem, &ct.initial, 1_000_000).unwrap();
        assert_eq!(d.partition.closed_components, 1);
        for s in &d.states {
            let inc1 = ct.tandem.rate_fn_1.increments(&s.first).unwrap();
            for (p, k) in s.first.iter().enumerate() {
                if !ct.order.is_minimal(*k) {
                    assert_eq!(inc1[p], 0.0, "{} position {}", ct.format_tandem(s), p + 1);
                }
            }
            let inc2 = ct.tandem.rate_fn_2.increments(&s.second).unwrap();
            for (p, k) in s.second.iter().enumerate() {
                if !ct.order.is_maximal(*k) {
                    assert_eq!(inc2[p], 0.0, "{} position {}", ct.format_tandem(s), p + 1);
                }
            }
        }
    }
}

#[test]
fn hierarchical_tree_matches_oracle() {
    let spec = ClusterSpec::hierarchical(2, 1.5, &[1.0, 2.0]).unwrap();
    let ct = compile(&spec).unwrap();
    let d = stationary_tandem(&ct.tandem, &ct.initial, 1_000_000).unwrap();
    let g = tandem_generator(&ct.tandem, &ct.initial, 1_000_000).unwrap();
    let oracle = solve_stationary(&g).unwrap().unique().unwrap();
    let analytic: Vec<f64> = g.states.iter().map(|s| d.prob(s)).collect();
    assert!(total_variation(&analytic, &oracle).unwrap() < 1e-10);
}
