//! Brute-force CTMC: explicit generator built by breadth-first exploration
//! and a stationary solve per closed communicating class.

use std::collections::{BTreeMap, HashMap};
use std::hash::Hash;

use serde::Serialize;

use crate::closed::classes::{communicating_classes, ClassPartition};
use crate::closed::single::{closed_transitions, ClosedQueue};
use crate::closed::tandem::{tandem_transitions, TandemNetwork, TandemState};
use crate::dynamics::open_transitions;
use crate::error::{Error, Result};
use crate::model::{PandsQueue, State};

/// Off-diagonal rates by row; the diagonal is minus the row sum.
#[derive(Debug, Clone)]
pub struct Generator<S> {
    pub states: Vec<S>,
    /// `rows[s]` lists `(t, q(s→t))`, `t != s`, sorted by `t`.
    pub rows: Vec<Vec<(usize, f64)>>,
    pub diag: Vec<f64>,
    index: HashMap<S, usize>,
}

impl<S: Hash + Eq + Clone> Generator<S> {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, s: &S) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn successors(&self) -> Vec<Vec<usize>> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|&(t, _)| t).collect())
            .collect()
    }

    pub fn max_outflow(&self) -> f64 {
        self.diag.iter().map(|d| -d).fold(0.0, f64::max)
    }

    /// Largest `|Σ_t q(s,t)|` including the diagonal.
    pub fn max_row_sum(&self) -> f64 {
        self.rows
            .iter()
            .zip(&self.diag)
            .map(|(r, d)| (r.iter().map(|x| x.1).sum::<f64>() + d).abs())
            .fold(0.0, f64::max)
    }

    /// `(row, col, value)` triplets including the diagonal, row-major.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for (s, row) in self.rows.iter().enumerate() {
            let mut diag_done = false;
            for &(t, r) in row {
                if !diag_done && t > s {
                    out.push((s, s, self.diag[s]));
                    diag_done = true;
                }
                out.push((s, t, r));
            }
            if !diag_done {
                out.push((s, s, self.diag[s]));
            }
        }
        out
    }

    /// `max_t |Σ_s π_s q(s,t)|` over all states.
    pub fn residual(&self, pi: &[f64]) -> f64 {
        let mut flow: Vec<f64> = pi.iter().zip(&self.diag).map(|(p, d)| p * d).collect();
        for (s, row) in self.rows.iter().enumerate() {
            for &(t, r) in row {
                flow[t] += pi[s] * r;
            }
        }
        flow.iter().map(|x| x.abs()).fold(0.0, f64::max)
    }
}

/// Explores every state reachable from `initial`. Parallel transitions to
/// the same target are summed; self-loops are dropped.
pub fn build_generator<S, F>(initial: S, budget: usize, mut transitions: F) -> Result<Generator<S>>
where
    S: Hash + Eq + Clone,
    F: FnMut(&S) -> Result<Vec<(S, f64)>>,
{
    let mut states = vec![initial.clone()];
    let mut index = HashMap::from([(initial, 0usize)]);
    let mut rows = Vec::new();
    let mut diag = Vec::new();
    let mut head = 0;
    while head < states.len() {
        let s = states[head].clone();
        let mut row: BTreeMap<usize, f64> = BTreeMap::new();
        for (t, r) in transitions(&s)? {
            if !(r.is_finite() && r >= 0.0) {
                return Err(Error::Usage(format!(
                    "transition rate {r} is not a finite non-negative number"
                )));
            }
            if r == 0.0 {
                continue;
            }
            let k = match index.get(&t) {
                Some(&k) => k,
                None => {
                    if states.len() >= budget {
                        return Err(Error::Resource {
                            context: format!(
                                "exploring the reachable state space ({} states still unexplored)",
                                states.len() - head
                            ),
                            count: states.len() + 1,
                            budget,
                        });
                    }
                    index.insert(t.clone(), states.len());
                    states.push(t);
                    states.len() - 1
                }
            };
            if k != head {
                *row.entry(k).or_insert(0.0) += r;
            }
        }
        diag.push(-row.values().sum::<f64>());
        rows.push(row.into_iter().collect());
        head += 1;
    }
    Ok(Generator {
        states,
        rows,
        diag,
        index,
    })
}

/// Open queue with arrivals blocked at `capacity` customers, from `∅`.
pub fn open_generator(
    queue: &PandsQueue,
    capacity: usize,
    budget: usize,
) -> Result<Generator<State>> {
    build_generator(State::empty(), budget, |c| {
        Ok(open_transitions(queue, c)?
            .into_iter()
            .filter(|t| t.next.len() <= capacity)
            .map(|t| (t.next, t.rate))
            .collect())
    })
}

pub fn closed_generator(
    q: &ClosedQueue,
    initial: &State,
    budget: usize,
) -> Result<Generator<State>> {
    build_generator(initial.clone(), budget, |c| {
        Ok(closed_transitions(q, c)?
            .into_iter()
            .map(|(_, s, r)| (s, r))
            .collect())
    })
}

pub fn tandem_generator(
    net: &TandemNetwork,
    initial: &TandemState,
    budget: usize,
) -> Result<Generator<TandemState>> {
    build_generator(initial.clone(), budget, |s| {
        Ok(tandem_transitions(net, s)?
            .into_iter()
            .map(|(_, _, t, r)| (t, r))
            .collect())
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    Direct,
    PowerIteration,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Classes up to this size use the direct solver.
    pub direct_limit: usize,
    pub uniformization_factor: f64,
    pub damping: f64,
    pub max_iterations: usize,
    /// Required `‖πQ‖∞`, scaled by `max(1, max outflow)`.
    pub tolerance: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            direct_limit: 3000,
            uniformization_factor: 1.05,
            damping: 0.99,
            max_iterations: 1_000_000,
            tolerance: 1e-11,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassSolution {
    /// Generator indices of the class, sorted.
    pub states: Vec<usize>,
    pub pi: Vec<f64>,
    pub residual: f64,
    pub method: SolveMethod,
}

#[derive(Debug, Clone)]
pub struct StationarySolution {
    pub n_states: usize,
    pub partition: ClassPartition,
    /// One entry per closed communicating class.
    pub classes: Vec<ClassSolution>,
}

impl StationarySolution {
    /// Distribution of closed class `k` over all generator states.
    pub fn full(&self, k: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.n_states];
        for (&s, &p) in self.classes[k].states.iter().zip(&self.classes[k].pi) {
            v[s] = p;
        }
        v
    }

    /// The stationary distribution when it is unique.
    pub fn unique(&self) -> Option<Vec<f64>> {
        (self.classes.len() == 1).then(|| self.full(0))
    }

    /// Closed class containing generator state `s`, if any.
    pub fn class_of(&self, s: usize) -> Option<usize> {
        self.classes
            .iter()
            .position(|c| c.states.binary_search(&s).is_ok())
    }
}

pub fn solve_stationary<S: Hash + Eq + Clone>(g: &Generator<S>) -> Result<StationarySolution> {
    solve_stationary_with(g, &SolverOptions::default())
}

pub fn solve_stationary_with<S: Hash + Eq + Clone>(
    g: &Generator<S>,
    opts: &SolverOptions,
) -> Result<StationarySolution> {
    let partition = communicating_classes(&g.successors());
    let mut classes = Vec::new();
    for comp in partition.closed_components() {
        let (pi, method) = if comp.len() <= opts.direct_limit {
            (solve_direct(g, comp)?, SolveMethod::Direct)
        } else {
            (solve_power(g, comp, opts)?, SolveMethod::PowerIteration)
        };
        let residual = class_residual(g, comp, &pi);
        let scale = g.max_outflow().max(1.0);
        if residual > opts.tolerance * scale {
            return Err(Error::Convergence {
                iterations: 0,
                last_residual: residual,
                residual_history: vec![residual],
            });
        }
        classes.push(ClassSolution {
            states: comp.clone(),
            pi,
            residual,
            method,
        });
    }
    Ok(StationarySolution {
        n_states: g.len(),
        partition,
        classes,
    })
}

fn local_index(comp: &[usize]) -> HashMap<usize, usize> {
    comp.iter().enumerate().map(|(k, &s)| (s, k)).collect()
}

fn class_residual<S>(g: &Generator<S>, comp: &[usize], pi: &[f64]) -> f64 {
    let loc = local_index(comp);
    let mut flow: Vec<f64> = comp.iter().zip(pi).map(|(&s, p)| p * g.diag[s]).collect();
    for (k, &s) in comp.iter().enumerate() {
        for &(t, r) in &g.rows[s] {
            if let Some(&j) = loc.get(&t) {
                flow[j] += pi[k] * r;
            }
        }
    }
    flow.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// Solves `πQ = 0`, `Σπ = 1` on a closed class by Gaussian elimination with
/// partial pivoting, followed by one step of iterative refinement.
fn solve_direct<S>(g: &Generator<S>, comp: &[usize]) -> Result<Vec<f64>> {
    let m = comp.len();
    if m == 1 {
        return Ok(vec![1.0]);
    }
    let loc = local_index(comp);
    // a = Q_Cᵀ with the last equation replaced by normalization.
    let mut a = vec![0.0; m * m];
    for (k, &s) in comp.iter().enumerate() {
        a[k * m + k] = g.diag[s];
        for &(t, r) in &g.rows[s] {
            if let Some(&j) = loc.get(&t) {
                a[j * m + k] += r;
            }
        }
    }
    for k in 0..m {
        a[(m - 1) * m + k] = 1.0;
    }
    let mut b = vec![0.0; m];
    b[m - 1] = 1.0;
    let lu = Lu::factor(a.clone(), m)?;
    let mut x = lu.solve(&b);
    // one refinement step
    let mut r = b.clone();
    for i in 0..m {
        let row = &a[i * m..(i + 1) * m];
        r[i] -= row.iter().zip(&x).map(|(u, v)| u * v).sum::<f64>();
    }
    let dx = lu.solve(&r);
    for (xi, di) in x.iter_mut().zip(dx) {
        *xi += di;
    }
    Ok(x)
}

struct Lu {
    m: usize,
    a: Vec<f64>,
    perm: Vec<usize>,
}

impl Lu {
    fn factor(mut a: Vec<f64>, m: usize) -> Result<Self> {
        let mut perm: Vec<usize> = (0..m).collect();
        for col in 0..m {
            let (piv, best) = (col..m)
                .map(|r| (r, a[r * m + col].abs()))
                .fold((col, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if best == 0.0 {
                return Err(Error::Structure(
                    "singular linear system in the direct stationary solve".into(),
                ));
            }
            if piv != col {
                for k in 0..m {
                    a.swap(piv * m + k, col * m + k);
                }
                perm.swap(piv, col);
            }
            let d = a[col * m + col];
            for r in col + 1..m {
                let f = a[r * m + col] / d;
                if f != 0.0 {
                    a[r * m + col] = f;
                    for k in col + 1..m {
                        a[r * m + k] -= f * a[col * m + k];
                    }
                } else {
                    a[r * m + col] = 0.0;
                }
            }
        }
        Ok(Lu { m, a, perm })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..m {
            let s: f64 = (0..i).map(|k| self.a[i * m + k] * y[k]).sum();
            y[i] -= s;
        }
        for i in (0..m).rev() {
            let s: f64 = (i + 1..m).map(|k| self.a[i * m + k] * y[k]).sum();
            y[i] = (y[i] - s) / self.a[i * m + i];
        }
        y
    }
}

/// Damped power iteration on the uniformized chain of a closed class.
fn solve_power<S: Hash + Eq + Clone>(
    g: &Generator<S>,
    comp: &[usize],
    opts: &SolverOptions,
) -> Result<Vec<f64>> {
    let m = comp.len();
    let loc = local_index(comp);
    let lambda = opts.uniformization_factor
        * comp
            .iter()
            .map(|&s| -g.diag[s])
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
    let rows: Vec<Vec<(usize, f64)>> = comp
        .iter()
        .map(|&s| {
            g.rows[s]
                .iter()
                .filter_map(|&(t, r)| loc.get(&t).map(|&j| (j, r / lambda)))
                .collect()
        })
        .collect();
    let stay: Vec<f64> = comp.iter().map(|&s| 1.0 + g.diag[s] / lambda).collect();
    let mut pi = vec![1.0 / m as f64; m];
    let mut next = vec![0.0; m];
    let mut history = Vec::new();
    // Iterate well past the acceptance tolerance: a small residual can still
    // hide a visible error when the chain mixes slowly.
    let target = 1e-3 * opts.tolerance * g.max_outflow().max(1.0);
    let alpha = opts.damping;
    for it in 1..=opts.max_iterations {
        for (k, v) in next.iter_mut().enumerate() {
            *v = pi[k] * stay[k];
        }
        for (k, row) in rows.iter().enumerate() {
            for &(j, p) in row {
                next[j] += pi[k] * p;
            }
        }
        let mut sum = 0.0;
        for k in 0..m {
            pi[k] = (1.0 - alpha) * pi[k] + alpha * next[k];
            sum += pi[k];
        }
        for p in pi.iter_mut() {
            *p /= sum;
        }
        if it % 100 == 0 {
            let r = class_residual(g, comp, &pi);
            history.push(r);
            if r < target {
                return Ok(pi);
            }
            // stagnation at the floating-point floor
            let h = history.len();
            if h > 50 && r < opts.tolerance * g.max_outflow().max(1.0) && history[h - 50] <= r {
                return Ok(pi);
            }
        }
    }
    Err(Error::Convergence {
        iterations: opts.max_iterations,
        last_residual: history.last().copied().unwrap_or(f64::NAN),
        residual_history: history,
    })
}

/// `½ Σ |p − q|` over index-aligned distributions.
pub fn total_variation(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Usage(format!(
            "distributions have different supports ({} vs {} states)",
            p.len(),
            q.len()
        )));
    }
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// Total variation between keyed distributions; a missing key counts as zero.
pub fn total_variation_keyed<K: Hash + Eq>(p: &HashMap<K, f64>, q: &HashMap<K, f64>) -> f64 {
    let mut sum = 0.0;
    for (k, a) in p {
        sum += (a - q.get(k).copied().unwrap_or(0.0)).abs();
    }
    for (k, b) in q {
        if !p.contains_key(k) {
            sum += b.abs();
        }
    }
    0.5 * sum
}
