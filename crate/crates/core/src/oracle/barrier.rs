//! Log-barrier interior-point solver for the centralized problem, in f64.
//!
//! Variables are the source rates and every link-session rate that can carry
//! useful flow (μ_l^(f) with f ∈ S_l whose head still reaches Dst(f)). The
//! rest are zero at every feasible point: a node that cannot reach the
//! destination has no outlet, so nothing may enter it.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::net::{nodes_reaching, Scenario, UtilityKind};

/// One inequality a·v ≤ rhs.
#[derive(Debug, Clone)]
struct Row {
    coeffs: Vec<(usize, f64)>,
    rhs: f64,
}

impl Row {
    fn slack(&self, v: &[f64]) -> f64 {
        self.rhs - self.coeffs.iter().map(|&(j, a)| a * v[j]).sum::<f64>()
    }
}

#[derive(Debug)]
pub(crate) struct Program {
    vars: usize,
    x_var: Vec<usize>,
    /// `mu_var[l][f]`
    mu_var: Vec<Vec<Option<usize>>>,
    utilities: Vec<(UtilityKind, f64)>,
    rows: Vec<Row>,
    /// (session, node, row index) of every flow-balance row kept.
    flow_rows: Vec<(usize, usize, usize)>,
    /// `reach[f][n]`: n can reach Dst(f) on allowed links.
    reach: Vec<Vec<bool>>,
}

/// Point returned by the barrier path with its multiplier estimate.
#[derive(Debug, Clone)]
pub(crate) struct BarrierPoint {
    pub x: Vec<f64>,
    /// `mu[l][f]`
    pub mu: Vec<Vec<f64>>,
    /// `lambda[f][n]`, zero at the destination.
    pub lambda: Vec<Vec<f64>>,
    pub primal: f64,
    pub dual: f64,
}

const CENTERING_ITERS: usize = 200;
const LINE_SEARCH_HALVINGS: usize = 80;
const T_GROWTH: f64 = 10.0;
const T_MAX: f64 = 1e14;

impl Program {
    pub(crate) fn build(scenario: &Scenario<f64>) -> Result<Self> {
        let net = scenario.network();
        let sessions = scenario.session_count();
        let reach: Vec<Vec<bool>> = (0..sessions).map(|f| nodes_reaching(scenario, f)).collect();
        for (f, s) in scenario.sessions().iter().enumerate() {
            if !reach[f][s.src] {
                return Err(Error::Validation(format!(
                    "session {} cannot reach its destination; the problem is infeasible",
                    s.id
                )));
            }
        }
        let mut vars = 0;
        let x_var: Vec<usize> = (0..sessions)
            .map(|_| {
                vars += 1;
                vars - 1
            })
            .collect();
        let mut mu_var = vec![vec![None; sessions]; net.link_count()];
        for (l, link) in net.links().iter().enumerate() {
            for &f in scenario.allowed(l) {
                if reach[f][link.head] && reach[f][link.tail] {
                    mu_var[l][f] = Some(vars);
                    vars += 1;
                }
            }
        }
        let mut rows = Vec::new();
        let mut flow_rows = Vec::new();
        for (f, s) in scenario.sessions().iter().enumerate() {
            for n in 0..net.node_count() {
                if n == s.dst || !reach[f][n] {
                    continue;
                }
                let mut coeffs = Vec::new();
                if n == s.src {
                    coeffs.push((x_var[f], 1.0));
                }
                for &l in net.incoming(n) {
                    if let Some(j) = mu_var[l][f] {
                        coeffs.push((j, 1.0));
                    }
                }
                for &l in net.outgoing(n) {
                    if let Some(j) = mu_var[l][f] {
                        coeffs.push((j, -1.0));
                    }
                }
                if coeffs.is_empty() {
                    continue;
                }
                flow_rows.push((f, n, rows.len()));
                rows.push(Row { coeffs, rhs: 0.0 });
            }
        }
        for (l, link) in net.links().iter().enumerate() {
            let coeffs: Vec<(usize, f64)> = mu_var[l].iter().flatten().map(|&j| (j, 1.0)).collect();
            if !coeffs.is_empty() {
                rows.push(Row {
                    coeffs,
                    rhs: link.capacity,
                });
            }
        }
        Ok(Program {
            vars,
            x_var,
            mu_var,
            utilities: scenario
                .sessions()
                .iter()
                .map(|s| (s.utility.kind, s.utility.weight))
                .collect(),
            rows,
            flow_rows,
            reach,
        })
    }

    fn constraint_count(&self) -> usize {
        self.rows.len() + self.vars
    }

    fn objective(&self, v: &[f64]) -> f64 {
        self.utilities
            .iter()
            .zip(&self.x_var)
            .map(|(&(kind, w), &j)| match kind {
                UtilityKind::WeightedLog => w * v[j].ln(),
                UtilityKind::WeightedLog1p => w * v[j].ln_1p(),
            })
            .sum()
    }

    fn interior(&self, v: &[f64]) -> bool {
        v.iter().all(|&x| x > 0.0) && self.rows.iter().all(|r| r.slack(v) > 0.0)
    }

    fn barrier(&self, t: f64, v: &[f64]) -> f64 {
        -t * self.objective(v)
            - self.rows.iter().map(|r| r.slack(v).ln()).sum::<f64>()
            - v.iter().map(|x| x.ln()).sum::<f64>()
    }

    /// Strictly feasible start: a little flow on every variable plus enough
    /// flow from each node down a reverse-search tree to clear its deficit,
    /// then scaled so every link is at most half full.
    fn start(&self, scenario: &Scenario<f64>) -> Vec<f64> {
        const SEED: f64 = 1e-2;
        let net = scenario.network();
        let mut v = vec![SEED; self.vars];
        for (f, s) in scenario.sessions().iter().enumerate() {
            // parent[n]: link from n one step closer to the destination.
            let mut parent = vec![None; net.node_count()];
            let mut seen = vec![false; net.node_count()];
            seen[s.dst] = true;
            let mut queue = std::collections::VecDeque::from([s.dst]);
            while let Some(m) = queue.pop_front() {
                for &l in net.incoming(m) {
                    let tail = net.link(l).tail;
                    if !seen[tail] && self.mu_var[l][f].is_some() {
                        seen[tail] = true;
                        parent[tail] = Some(l);
                        queue.push_back(tail);
                    }
                }
            }
            let deficits: Vec<(usize, f64)> = self
                .flow_rows
                .iter()
                .filter(|&&(g, _, _)| g == f)
                .map(|&(_, n, r)| (n, (-self.rows[r].slack(&v)).max(0.0) + SEED))
                .collect();
            for (n, amount) in deficits {
                let mut at = n;
                while let Some(l) = parent[at] {
                    let j = self.mu_var[l][f].expect("tree links carry variables");
                    v[j] += amount;
                    at = net.link(l).head;
                }
            }
        }
        let mut worst: f64 = 0.0;
        for (l, link) in net.links().iter().enumerate() {
            let load: f64 = self.mu_var[l].iter().flatten().map(|&j| v[j]).sum();
            worst = worst.max(load / link.capacity);
        }
        if worst > 0.5 {
            let scale = 0.5 / worst;
            for x in &mut v {
                *x *= scale;
            }
        }
        v
    }

    /// Newton's method on the barrier function at parameter t.
    fn center(&self, t: f64, v: &mut Vec<f64>) -> Result<()> {
        let n = self.vars;
        for _ in 0..CENTERING_ITERS {
            let mut grad = DVector::<f64>::zeros(n);
            let mut hess = DMatrix::<f64>::zeros(n, n);
            for (&(kind, w), &j) in self.utilities.iter().zip(&self.x_var) {
                let (d1, d2) = match kind {
                    UtilityKind::WeightedLog => (w / v[j], w / (v[j] * v[j])),
                    UtilityKind::WeightedLog1p => {
                        let u = 1.0 + v[j];
                        (w / u, w / (u * u))
                    }
                };
                grad[j] -= t * d1;
                hess[(j, j)] += t * d2;
            }
            for row in &self.rows {
                let s = row.slack(v);
                for &(i, ai) in &row.coeffs {
                    grad[i] += ai / s;
                    for &(k, ak) in &row.coeffs {
                        hess[(i, k)] += ai * ak / (s * s);
                    }
                }
            }
            for j in 0..n {
                grad[j] -= 1.0 / v[j];
                hess[(j, j)] += 1.0 / (v[j] * v[j]);
            }
            let step = newton_step(hess, &grad)?;
            let decrement = -grad.dot(&step);
            if decrement / 2.0 <= 1e-12 {
                return Ok(());
            }
            let phi = self.barrier(t, v);
            let mut size = 1.0;
            let mut accepted = false;
            for _ in 0..LINE_SEARCH_HALVINGS {
                let trial: Vec<f64> = v
                    .iter()
                    .zip(step.iter())
                    .map(|(a, d)| a + size * d)
                    .collect();
                if self.interior(&trial) && self.barrier(t, &trial) <= phi - 0.25 * size * decrement
                {
                    *v = trial;
                    accepted = true;
                    break;
                }
                size *= 0.5;
            }
            if !accepted {
                // Rounding limits further progress at this t.
                return Ok(());
            }
        }
        Ok(())
    }

    /// Multipliers from the barrier slacks, extended to nodes without a row.
    fn multipliers(&self, t: f64, v: &[f64], scenario: &Scenario<f64>) -> Vec<Vec<f64>> {
        let net = scenario.network();
        let mut lambda = vec![vec![0.0; net.node_count()]; scenario.session_count()];
        for &(f, n, r) in &self.flow_rows {
            lambda[f][n] = 1.0 / (t * self.rows[r].slack(v));
        }
        // A node that cannot reach the destination needs a price at least as
        // high as every allowed upstream neighbour, so that sending into it
        // never pays in the dual.
        for (f, s) in scenario.sessions().iter().enumerate() {
            loop {
                let mut changed = false;
                for (l, link) in net.links().iter().enumerate() {
                    let head = link.head;
                    if self.reach[f][head] || head == s.dst || !scenario.is_allowed(l, f) {
                        continue;
                    }
                    let need = lambda[f][link.tail];
                    if need > lambda[f][head] {
                        lambda[f][head] = need;
                        changed = true;
                    }
                }
                if !changed {
                    break;
                }
            }
        }
        lambda
    }

    fn unpack(&self, v: &[f64], links: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
        let x = self.x_var.iter().map(|&j| v[j]).collect();
        let mu = (0..links)
            .map(|l| {
                self.mu_var[l]
                    .iter()
                    .map(|j| j.map_or(0.0, |j| v[j]))
                    .collect()
            })
            .collect();
        (x, mu)
    }

    /// Follows the central path until the certified gap is at most `tol`
    /// (or the path parameter is exhausted), returning the best point.
    pub(crate) fn solve(&self, scenario: &Scenario<f64>, tol: f64) -> Result<BarrierPoint> {
        let mut v = self.start(scenario);
        let m = self.constraint_count() as f64;
        let mut t = 1.0;
        let mut best: Option<BarrierPoint> = None;
        let mut best_primal = f64::NEG_INFINITY;
        loop {
            self.center(t, &mut v)?;
            let primal = self.objective(&v);
            best_primal = best_primal.max(primal);
            let lambda = self.multipliers(t, &v, scenario);
            let dual = dual_value(scenario, &lambda);
            if dual < best_primal - 1e-9 * (1.0 + best_primal.abs()) {
                return Err(Error::Numeric(format!(
                    "weak duality violated: dual {dual} below primal {best_primal}"
                )));
            }
            let gap = dual - primal;
            if best.as_ref().is_none_or(|b| gap < b.dual - b.primal) {
                let (x, mu) = self.unpack(&v, scenario.link_count());
                best = Some(BarrierPoint {
                    x,
                    mu,
                    lambda,
                    primal,
                    dual,
                });
            }
            if (gap <= tol && m / t <= tol * 1e-3) || t >= T_MAX {
                break;
            }
            t *= T_GROWTH;
        }
        let best = best.expect("at least one centering step");
        let gap = best.dual - best.primal;
        if gap > tol {
            return Err(Error::Oracle {
                message: format!("duality gap above tolerance {tol}"),
                best_gap: gap,
            });
        }
        Ok(best)
    }
}

/// Solves H·d = −g after scaling H to unit diagonal, which keeps the
/// factorization usable when slacks span many orders of magnitude. Adds a
/// small ridge if rounding still breaks definiteness.
fn newton_step(mut hess: DMatrix<f64>, grad: &DVector<f64>) -> Result<DVector<f64>> {
    let n = grad.len();
    let scale: DVector<f64> = DVector::from_iterator(n, (0..n).map(|i| 1.0 / hess[(i, i)].sqrt()));
    for i in 0..n {
        for k in 0..n {
            hess[(i, k)] *= scale[i] * scale[k];
        }
    }
    let rhs = -grad.component_mul(&scale);
    let mut ridge = 0.0;
    for _ in 0..8 {
        let mut h = hess.clone();
        for i in 0..n {
            h[(i, i)] += ridge;
        }
        if let Some(chol) = h.cholesky() {
            return Ok(chol.solve(&rhs).component_mul(&scale));
        }
        ridge = if ridge == 0.0 { 1e-12 } else { ridge * 100.0 };
    }
    Err(Error::Numeric(
        "barrier Hessian is not positive definite".into(),
    ))
}

/// q(λ) = Σ_f sup_{0 ≤ x ≤ x_max} (U_f(x) − λ_src·x)
///      + Σ_l C_l · max{0, max_{f ∈ S_l} (λ_tail − λ_head)},
/// with λ = 0 at destinations and x_max the capacity leaving the source.
pub(crate) fn dual_value(scenario: &Scenario<f64>, lambda: &[Vec<f64>]) -> f64 {
    let net = scenario.network();
    let mut q = 0.0;
    for (f, s) in scenario.sessions().iter().enumerate() {
        let price = lambda[f][s.src];
        let cap = net.out_capacity(s.src);
        let w = s.utility.weight;
        q += match s.utility.kind {
            UtilityKind::WeightedLog => {
                let x = if price > 0.0 {
                    (w / price).min(cap)
                } else {
                    cap
                };
                w * x.ln() - price * x
            }
            UtilityKind::WeightedLog1p => {
                let x = if price > 0.0 {
                    (w / price - 1.0).clamp(0.0, cap)
                } else {
                    cap
                };
                w * x.ln_1p() - price * x
            }
        };
    }
    for (l, link) in net.links().iter().enumerate() {
        let best = scenario
            .allowed(l)
            .iter()
            .map(|&f| {
                let dst = scenario.session(f).dst;
                let at = |n: usize| if n == dst { 0.0 } else { lambda[f][n] };
                at(link.tail) - at(link.head)
            })
            .fold(0.0f64, f64::max);
        q += link.capacity * best;
    }
    q
}
