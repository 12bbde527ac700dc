//! Order-independent rate functions.
//!
//! A rate function gives the overall service rate `μ(c)` of a queue state.
//! It depends only on the macrostate `|c|`, it is non-decreasing along
//! arrivals, and `μ(∅) = 0`. The service rate of the customer in position
//! `p` is the increment `Δμ(c_1..p) = μ(c_1..p) − μ(c_1..p−1)`.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{check_classes, ClassId, Macrostate, State};

/// Absolute tolerance used for exact rate comparisons.
pub const RATE_TOL: f64 = 1e-12;

/// Anything that evaluates an overall service rate on queue states.
pub trait RateModel {
    fn n_classes(&self) -> usize;

    /// `μ(c)`.
    fn rate(&self, c: &[ClassId]) -> Result<f64>;

    /// `μ(c_1..p)` for `p = 0..=n`.
    fn prefix_rates(&self, c: &[ClassId]) -> Result<Vec<f64>> {
        (0..=c.len()).map(|p| self.rate(&c[..p])).collect()
    }

    /// `Δμ(c_1..p)` for `p = 1..=n`, as a vector of length `n`.
    fn increments(&self, c: &[ClassId]) -> Result<Vec<f64>> {
        let prefix = self.prefix_rates(c)?;
        Ok(prefix.windows(2).map(|w| w[1] - w[0]).collect())
    }
}

/// Multi-server queue with class/server compatibilities: `μ(c)` is the sum of
/// the rates of the servers compatible with at least one present customer.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiServer {
    server_rates: Vec<f64>,
    /// `S_i`, 0-based server indices, sorted and deduplicated.
    compat: Vec<Vec<usize>>,
}

impl MultiServer {
    /// `compat[i]` lists the 0-based servers compatible with class `i`.
    pub fn new(server_rates: Vec<f64>, compat: Vec<Vec<usize>>) -> Result<Self> {
        if let Some((s, r)) = server_rates
            .iter()
            .enumerate()
            .find(|(_, r)| !(r.is_finite() && **r > 0.0))
        {
            return Err(Error::Usage(format!(
                "server {} rate must be positive and finite, got {r}",
                s + 1
            )));
        }
        let mut normalized = Vec::with_capacity(compat.len());
        for (i, servers) in compat.into_iter().enumerate() {
            let mut servers = servers;
            servers.sort_unstable();
            servers.dedup();
            if servers.is_empty() {
                return Err(Error::Usage(format!(
                    "class {} has no compatible server",
                    i + 1
                )));
            }
            if let Some(s) = servers.iter().find(|&&s| s >= server_rates.len()) {
                return Err(Error::Usage(format!(
                    "class {} references server {} but only {} servers exist",
                    i + 1,
                    s + 1,
                    server_rates.len()
                )));
            }
            normalized.push(servers);
        }
        Ok(MultiServer {
            server_rates,
            compat: normalized,
        })
    }

    /// Same as [`MultiServer::new`] with 1-based server labels.
    pub fn one_based(server_rates: Vec<f64>, compat: &[&[usize]]) -> Result<Self> {
        let compat = compat
            .iter()
            .map(|servers| {
                servers
                    .iter()
                    .map(|&s| {
                        s.checked_sub(1)
                            .ok_or_else(|| Error::Usage("server labels are 1-based".into()))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(server_rates, compat)
    }

    pub fn server_rates(&self) -> &[f64] {
        &self.server_rates
    }

    pub fn compat(&self, i: ClassId) -> &[usize] {
        &self.compat[i.index()]
    }

    pub fn n_servers(&self) -> usize {
        self.server_rates.len()
    }

    fn rate_of_union<'a>(&self, classes: impl Iterator<Item = &'a ClassId>) -> f64 {
        let mut covered = vec![false; self.server_rates.len()];
        let mut total = 0.0;
        for c in classes {
            for &s in &self.compat[c.index()] {
                if !covered[s] {
                    covered[s] = true;
                    total += self.server_rates[s];
                }
            }
        }
        total
    }

    fn increments(&self, c: &[ClassId]) -> Vec<f64> {
        let mut covered = vec![false; self.server_rates.len()];
        c.iter()
            .map(|k| {
                let mut delta = 0.0;
                for &s in &self.compat[k.index()] {
                    if !covered[s] {
                        covered[s] = true;
                        delta += self.server_rates[s];
                    }
                }
                delta
            })
            .collect()
    }
}

/// Rate function given by an explicit table over a bounded macrostate domain,
/// plus declared saturation values `limmu(A)` for stability analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    n_classes: usize,
    entries: HashMap<Macrostate, f64>,
    saturation: HashMap<Vec<ClassId>, f64>,
}

impl RateTable {
    pub fn new(n_classes: usize) -> Self {
        RateTable {
            n_classes,
            entries: HashMap::new(),
            saturation: HashMap::new(),
        }
    }

    pub fn insert(&mut self, x: Macrostate, rate: f64) -> Result<()> {
        if x.n_classes() != self.n_classes {
            return Err(Error::Usage(format!(
                "macrostate {:?} has {} components, table has {} classes",
                x.0,
                x.n_classes(),
                self.n_classes
            )));
        }
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(Error::Usage(format!(
                "rate {rate} is not a finite non-negative number"
            )));
        }
        self.entries.insert(x, rate);
        Ok(())
    }

    /// Declares `limmu(A)` for a non-empty class subset.
    pub fn insert_saturation(&mut self, subset: &[ClassId], rate: f64) -> Result<()> {
        let key = canonical_subset(subset);
        if key.is_empty() {
            return Err(Error::Usage("saturation subsets must be non-empty".into()));
        }
        check_classes(&key, self.n_classes)?;
        if !(rate > 0.0) {
            return Err(Error::Usage(format!(
                "saturation rate {rate} must be positive (or +inf)"
            )));
        }
        self.saturation.insert(key, rate);
        Ok(())
    }

    /// Fills the table on every macrostate with total at most `max_total`.
    pub fn from_fn_total(
        n_classes: usize,
        max_total: u32,
        f: impl Fn(&Macrostate) -> f64,
    ) -> Result<Self> {
        let mut t = RateTable::new(n_classes);
        let bound = Macrostate(vec![max_total; n_classes]);
        for x in bound.lower_set() {
            if x.total() <= max_total {
                let r = f(&x);
                t.insert(x, r)?;
            }
        }
        Ok(t)
    }

    /// Fills the table on every macrostate `x <= bound`.
    pub fn from_fn_box(bound: &Macrostate, f: impl Fn(&Macrostate) -> f64) -> Result<Self> {
        let mut t = RateTable::new(bound.n_classes());
        for x in bound.lower_set() {
            let r = f(&x);
            t.insert(x, r)?;
        }
        Ok(t)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Macrostate, &f64)> {
        self.entries.iter()
    }

    pub fn saturation_entries(&self) -> impl Iterator<Item = (&Vec<ClassId>, &f64)> {
        self.saturation.iter()
    }

    /// The empty macrostate defaults to rate 0 when the table omits it.
    fn lookup(&self, x: &Macrostate) -> Result<f64> {
        match self.entries.get(x) {
            Some(&r) => Ok(r),
            None if x.total() == 0 => Ok(0.0),
            None => Err(Error::Domain {
                macrostate: x.0.clone(),
            }),
        }
    }
}

/// Rate function of a relabelled class set: each class is projected onto a
/// base class and the base rate function is evaluated on the projection.
#[derive(Debug, Clone, PartialEq)]
pub struct Projected {
    base: Box<RateFunction>,
    projection: Vec<ClassId>,
}

impl Projected {
    pub fn new(base: RateFunction, projection: Vec<ClassId>) -> Result<Self> {
        check_classes(&projection, base.n_classes())?;
        Ok(Projected {
            base: Box::new(base),
            projection,
        })
    }

    pub fn project(&self, c: &[ClassId]) -> Vec<ClassId> {
        c.iter().map(|k| self.projection[k.index()]).collect()
    }

    pub fn base(&self) -> &RateFunction {
        &self.base
    }
}

/// The concrete rate-function families.
#[derive(Debug, Clone, PartialEq)]
pub enum RateFunction {
    MultiServer(MultiServer),
    Table(RateTable),
    Projected(Projected),
}

impl RateFunction {
    /// Saturated rate `limmu(A) = lim_m μ(m e_A)`.
    pub fn limmu(&self, subset: &[ClassId]) -> Result<f64> {
        match self {
            RateFunction::MultiServer(ms) => Ok(ms.rate_of_union(subset.iter())),
            RateFunction::Table(t) => {
                let key = canonical_subset(subset);
                t.saturation.get(&key).copied().ok_or_else(|| {
                    Error::Capability(format!(
                        "rate table declares no saturation value for subset {}",
                        State::new(key.clone())
                    ))
                })
            }
            RateFunction::Projected(p) => p.base.limmu(&canonical_subset(&p.project(subset))),
        }
    }

    /// `Δμ(prefix)`: the service rate of the last customer of `prefix`.
    pub fn delta(&self, prefix: &[ClassId]) -> Result<f64> {
        delta_mu(self, prefix)
    }

    pub fn as_multi_server(&self) -> Option<&MultiServer> {
        match self {
            RateFunction::MultiServer(ms) => Some(ms),
            _ => None,
        }
    }
}

impl From<MultiServer> for RateFunction {
    fn from(ms: MultiServer) -> Self {
        RateFunction::MultiServer(ms)
    }
}

impl From<RateTable> for RateFunction {
    fn from(t: RateTable) -> Self {
        RateFunction::Table(t)
    }
}

impl RateModel for RateFunction {
    fn n_classes(&self) -> usize {
        match self {
            RateFunction::MultiServer(ms) => ms.compat.len(),
            RateFunction::Table(t) => t.n_classes,
            RateFunction::Projected(p) => p.projection.len(),
        }
    }

    fn rate(&self, c: &[ClassId]) -> Result<f64> {
        check_classes(c, self.n_classes())?;
        match self {
            RateFunction::MultiServer(ms) => Ok(ms.rate_of_union(c.iter())),
            RateFunction::Table(t) => t.lookup(&Macrostate::of(c, t.n_classes)),
            RateFunction::Projected(p) => p.base.rate(&p.project(c)),
        }
    }

    fn prefix_rates(&self, c: &[ClassId]) -> Result<Vec<f64>> {
        check_classes(c, self.n_classes())?;
        match self {
            RateFunction::MultiServer(ms) => {
                let mut out = Vec::with_capacity(c.len() + 1);
                let mut acc = 0.0;
                out.push(0.0);
                for d in ms.increments(c) {
                    acc += d;
                    out.push(acc);
                }
                Ok(out)
            }
            RateFunction::Table(t) => {
                let mut x = Macrostate::zero(t.n_classes);
                let mut out = Vec::with_capacity(c.len() + 1);
                out.push(t.lookup(&x)?);
                for k in c {
                    x.0[k.index()] += 1;
                    out.push(t.lookup(&x)?);
                }
                Ok(out)
            }
            RateFunction::Projected(p) => p.base.prefix_rates(&p.project(c)),
        }
    }

    fn increments(&self, c: &[ClassId]) -> Result<Vec<f64>> {
        match self {
            RateFunction::MultiServer(ms) => {
                check_classes(c, self.n_classes())?;
                Ok(ms.increments(c))
            }
            RateFunction::Projected(p) => {
                check_classes(c, self.n_classes())?;
                p.base.increments(&p.project(c))
            }
            RateFunction::Table(_) => {
                let prefix = self.prefix_rates(c)?;
                Ok(prefix.windows(2).map(|w| w[1] - w[0]).collect())
            }
        }
    }
}

/// `μ(c)`.
pub fn mu(rate_fn: &impl RateModel, c: &[ClassId]) -> Result<f64> {
    rate_fn.rate(c)
}

/// `Δμ(prefix) = μ(prefix) − μ(prefix without its last customer)`.
pub fn delta_mu(rate_fn: &impl RateModel, prefix: &[ClassId]) -> Result<f64> {
    if prefix.is_empty() {
        return Err(Error::Usage("Δμ is undefined on the empty state".into()));
    }
    let incs = rate_fn.increments(prefix)?;
    Ok(incs[incs.len() - 1])
}

fn canonical_subset(subset: &[ClassId]) -> Vec<ClassId> {
    let mut v = subset.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

/// One property violation found by [`validate_rate_function`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// Two orderings of the same macrostate get different rates.
    OrderDependence {
        state: Vec<usize>,
        reordered: Vec<usize>,
        rate: f64,
        reordered_rate: f64,
    },
    /// An arrival decreased the overall rate.
    Decreasing {
        state: Vec<usize>,
        rate: f64,
        prefix_rate: f64,
    },
    /// `μ(∅) != 0`.
    NonzeroEmpty { rate: f64 },
    /// `μ(c) <= 0` on a non-empty state.
    NonPositive { state: Vec<usize>, rate: f64 },
    /// The rate function could not be evaluated.
    Unevaluable { state: Vec<usize>, error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub max_total: usize,
    pub states_checked: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Exhaustively checks the rate-function axioms on every state of length at
/// most `max_total`: `μ(∅) = 0`, positivity, monotonicity along arrivals and
/// order independence (each state is compared with the sorted arrangement of
/// its macrostate, so every permutation of every macrostate is covered).
pub fn validate_rate_function(rate_fn: &impl RateModel, max_total: usize) -> ValidationReport {
    let n = rate_fn.n_classes();
    let mut violations = Vec::new();
    let mut checked = 0usize;

    match rate_fn.rate(&[]) {
        Ok(r) if r.abs() > RATE_TOL => violations.push(Violation::NonzeroEmpty { rate: r }),
        Ok(_) => {}
        Err(e) => violations.push(Violation::Unevaluable {
            state: vec![],
            error: e.to_string(),
        }),
    }
    checked += 1;

    // Depth-first over sequences, carrying the parent's rate.
    let mut stack: Vec<(Vec<ClassId>, Option<f64>)> = vec![(Vec::new(), rate_fn.rate(&[]).ok())];
    while let Some((c, parent_rate)) = stack.pop() {
        if c.len() >= max_total || n == 0 {
            continue;
        }
        for k in 0..n {
            let mut child = c.clone();
            child.push(ClassId::new(k));
            checked += 1;
            let labels = State::new(child.clone()).to_one_based();
            let rate = match rate_fn.rate(&child) {
                Ok(r) => r,
                Err(e) => {
                    violations.push(Violation::Unevaluable {
                        state: labels,
                        error: e.to_string(),
                    });
                    continue;
                }
            };
            if rate <= 0.0 {
                violations.push(Violation::NonPositive {
                    state: labels.clone(),
                    rate,
                });
            }
            if let Some(pr) = parent_rate {
                if rate < pr - RATE_TOL * pr.abs().max(1.0) {
                    violations.push(Violation::Decreasing {
                        state: labels.clone(),
                        rate,
                        prefix_rate: pr,
                    });
                }
            }
            let mut sorted = child.clone();
            sorted.sort_unstable();
            if sorted != child {
                match rate_fn.rate(&sorted) {
                    Ok(r2) if (r2 - rate).abs() > RATE_TOL * rate.abs().max(1.0) => violations
                        .push(Violation::OrderDependence {
                            state: labels.clone(),
                            reordered: State::new(sorted).to_one_based(),
                            rate,
                            reordered_rate: r2,
                        }),
                    _ => {}
                }
            }
            stack.push((child, Some(rate)));
        }
    }
    ValidationReport {
        max_total,
        states_checked: checked,
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two classes on three servers: class 1 on {1,3}, class 2 on {2,3}.
    fn two_class(mu1: f64, mu2: f64, mu3: f64) -> RateFunction {
        MultiServer::one_based(vec![mu1, mu2, mu3], &[&[1, 3], &[2, 3]])
            .unwrap()
            .into()
    }

    struct SequenceRates(HashMap<Vec<ClassId>, f64>, usize);

    impl RateModel for SequenceRates {
        fn n_classes(&self) -> usize {
            self.1
        }
        fn rate(&self, c: &[ClassId]) -> Result<f64> {
            self.0
                .get(c)
                .copied()
                .ok_or_else(|| Error::Domain { macrostate: vec![] })
        }
    }

    #[test]
    fn multi_server_rate_of_single_customer() {
        let r = two_class(1.5, 2.0, 0.25);
        assert!((mu(&r, &State::one_based(&[1])).unwrap() - 1.75).abs() < 1e-12);
        assert_eq!(mu(&r, &[]).unwrap(), 0.0);
        let unit = two_class(1.0, 1.0, 1.0);
        assert!((mu(&unit, &State::one_based(&[1, 2])).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn increments_of_worked_example() {
        let r = two_class(1.5, 2.0, 0.25);
        assert_eq!(delta_mu(&r, &State::one_based(&[1, 1])).unwrap(), 0.0);
        assert!((delta_mu(&r, &State::one_based(&[1, 1, 2])).unwrap() - 2.0).abs() < 1e-12);
        assert!((delta_mu(&r, &State::one_based(&[2])).unwrap() - 2.25).abs() < 1e-12);
        assert!(matches!(delta_mu(&r, &[]), Err(Error::Usage(_))));
    }

    #[test]
    fn two_class_passes_validation() {
        let report = validate_rate_function(&two_class(1.0, 2.0, 3.0), 4);
        assert!(report.passed(), "{:?}", report.violations);
        assert_eq!(report.states_checked, 1 + 2 + 4 + 8 + 16);
    }

    #[test]
    fn order_dependent_table_is_flagged() {
        let (a, b) = (ClassId(0), ClassId(1));
        let mut m = HashMap::new();
        m.insert(vec![], 0.0);
        m.insert(vec![a], 1.0);
        m.insert(vec![b], 1.0);
        m.insert(vec![a, b], 2.0);
        m.insert(vec![b, a], 3.0);
        m.insert(vec![a, a], 1.0);
        m.insert(vec![b, b], 1.0);
        let report = validate_rate_function(&SequenceRates(m, 2), 2);
        assert!(report.violations.iter().any(
            |v| matches!(v, Violation::OrderDependence { state, .. } if state == &vec![2, 1])
        ));
    }

    #[test]
    fn zero_rate_single_customer_is_flagged() {
        let table = RateTable::from_fn_total(2, 3, |x| {
            if x.0 == vec![1, 0] {
                0.0
            } else {
                x.total() as f64
            }
        })
        .unwrap();
        let report = validate_rate_function(&RateFunction::from(table), 3);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::NonPositive { state, .. } if state == &vec![1])));
    }

    #[test]
    fn table_outside_domain_errors() {
        let table = RateTable::from_fn_total(2, 2, |x| x.total() as f64).unwrap();
        let r = RateFunction::from(table);
        assert!(matches!(
            mu(&r, &State::one_based(&[1, 1, 2])),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn limmu_of_multi_server_and_table() {
        let r = two_class(1.0, 2.0, 4.0);
        assert_eq!(r.limmu(&[ClassId(0)]).unwrap(), 5.0);
        assert_eq!(r.limmu(&[ClassId(0), ClassId(1)]).unwrap(), 7.0);
        let table = RateTable::from_fn_total(1, 3, |x| x.total() as f64).unwrap();
        let r = RateFunction::from(table);
        assert!(matches!(r.limmu(&[ClassId(0)]), Err(Error::Capability(_))));
    }

    #[test]
    fn multi_server_increments_match_set_difference_definition() {
        let r = two_class(1.0, 2.0, 4.0);
        let ms = r.as_multi_server().unwrap();
        // exhaustive over length-5 states of 2 classes
        for code in 0..32u32 {
            let c: Vec<ClassId> = (0..5)
                .map(|b| ClassId::new(((code >> b) & 1) as usize))
                .collect();
            let incs = r.increments(&c).unwrap();
            for p in 0..c.len() {
                let earlier: std::collections::HashSet<usize> = c[..p]
                    .iter()
                    .flat_map(|k| ms.compat(*k).iter().copied())
                    .collect();
                let expected: f64 = ms
                    .compat(c[p])
                    .iter()
                    .filter(|s| !earlier.contains(s))
                    .map(|&s| ms.server_rates()[s])
                    .sum();
                assert_eq!(incs[p], expected);
            }
        }
    }

    #[test]
    fn projected_rate_follows_base() {
        let base = two_class(1.0, 2.0, 4.0);
        let p = RateFunction::Projected(
            Projected::new(base.clone(), vec![ClassId(0), ClassId(1), ClassId(0)]).unwrap(),
        );
        let c = [ClassId(2), ClassId(1)];
        assert_eq!(
            p.rate(&c).unwrap(),
            base.rate(&[ClassId(0), ClassId(1)]).unwrap()
        );
        assert_eq!(p.limmu(&[ClassId(2)]).unwrap(), 5.0);
    }
}
