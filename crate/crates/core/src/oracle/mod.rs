//! Centralized optimum: y*, U*, multipliers λ* and the constant ζ.
//!
//! The solver is a log-barrier interior-point method (see `barrier`) run in
//! f64. Every candidate is certified by evaluating the dual function exactly at
//! the multipliers implied by the barrier, so the reported duality gap is a
//! bound on |U* − Σ U(x)|, not an estimate.

mod barrier;
mod report;

use crate::error::Result;
use crate::net::{
    residuals, ConcaveUtility, DecisionVector, Link, Network, Scenario, Session, SessionNodeMap,
    Utility,
};
use crate::scalar::{lit, wide, Real};

pub use report::{format_report, parse_report};

/// Default certified duality-gap target.
pub const ORACLE_TOL: f64 = 1e-5;

/// Below this a flow-balance slack counts as tight.
pub const TIGHT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution<T> {
    pub y_star: DecisionVector<T>,
    pub u_star: T,
    /// One entry per (session, non-destination node); all nonnegative.
    pub lambda_star: SessionNodeMap<T>,
    /// q(λ*) − U*, certified.
    pub duality_gap: T,
    /// Largest violation of any constraint by y*.
    pub max_violation: T,
}

impl<T: Real> OracleSolution<T> {
    pub fn lambda_norm(&self) -> T {
        self.lambda_star.norm()
    }

    pub fn zeta(&self, scenario: &Scenario<T>, alpha: &[T]) -> T {
        compute_zeta(scenario, &self.y_star, alpha)
    }

    /// 2‖λ*‖ + √(2ζ): bound on every |Q| when α is at the queue-bound level.
    pub fn queue_bound(&self, zeta: T) -> T {
        let two = lit::<T>(2.0);
        two * self.lambda_norm() + (two * zeta).sqrt()
    }

    /// 4‖λ*‖ + 2√(2ζ) + Σ_{O(n)} C_l: bound on every actual backlog at n.
    pub fn backlog_bound(&self, scenario: &Scenario<T>, zeta: T, n: usize) -> T {
        let two = lit::<T>(2.0);
        two * self.queue_bound(zeta) + scenario.network().out_capacity(n)
    }
}

fn to_f64<T: Real>(scenario: &Scenario<T>) -> Result<Scenario<f64>> {
    let net = scenario.network();
    let links = net
        .links()
        .iter()
        .map(|l| Link {
            tail: l.tail,
            head: l.head,
            capacity: wide(l.capacity),
        })
        .collect();
    let sessions = scenario
        .sessions()
        .iter()
        .map(|s| {
            Ok(Session {
                id: s.id,
                src: s.src,
                dst: s.dst,
                utility: Utility::new(s.utility.kind, wide(s.utility.weight))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let allowed = (0..net.link_count())
        .map(|l| Some(scenario.allowed(l).clone()))
        .collect();
    Scenario::new(Network::new(net.node_count(), links)?, sessions, allowed)
}

/// Solves max Σ U_f(x_f) subject to flow balance, capacities, nonnegativity
/// and allow-sets, certifying a duality gap of at most `tol`. The returned y*
/// has been tightened to equality at every flow-balance constraint.
pub fn solve_centralized<T: Real>(scenario: &Scenario<T>, tol: T) -> Result<OracleSolution<T>> {
    let wide_sc = to_f64(scenario)?;
    let program = barrier::Program::build(&wide_sc)?;
    let point = program.solve(&wide_sc, wide(tol))?;

    let y = DecisionVector {
        x: point.x.iter().map(|&v| lit(v)).collect(),
        mu: point
            .mu
            .iter()
            .map(|row| row.iter().map(|&v| lit(v)).collect())
            .collect(),
    };
    let y_star = tighten_to_equality(scenario, &y);
    let u_star = total_utility(scenario, &y_star.x)?;
    let mut lambda_star = SessionNodeMap::zeros(scenario);
    for (f, row) in point.lambda.iter().enumerate() {
        for (n, &v) in row.iter().enumerate() {
            lambda_star.set(f, n, lit(v));
        }
    }
    let max_violation = constraint_violation(scenario, &y_star);
    Ok(OracleSolution {
        y_star,
        u_star,
        lambda_star,
        duality_gap: lit(point.dual - point.primal),
        max_violation,
    })
}

/// Σ_f U_f(x_f).
pub fn total_utility<T: Real>(scenario: &Scenario<T>, x: &[T]) -> Result<T> {
    scenario
        .sessions()
        .iter()
        .zip(x)
        .map(|(s, &v)| s.utility.value(v))
        .sum()
}

/// Largest violation of flow balance (positive residual) and of the set
/// constraints.
pub fn constraint_violation<T: Real>(scenario: &Scenario<T>, y: &DecisionVector<T>) -> T {
    let g = residuals(scenario, y);
    g.active()
        .map(|(_, _, v)| v)
        .fold(y.set_violation(scenario), T::max)
}

/// Makes every flow-balance constraint tight without touching x.
///
/// Rates leaving a session's own destination are dropped first; then, while
/// some node has more leaving than arriving, its outgoing rates are reduced in
/// link-index order by the slack. Each reduction only loosens the downstream
/// node, so feasibility is kept and the total rate strictly decreases.
pub fn tighten_to_equality<T: Real>(
    scenario: &Scenario<T>,
    y: &DecisionVector<T>,
) -> DecisionVector<T> {
    let net = scenario.network();
    let tight = lit::<T>(TIGHT_TOL);
    let mut out = y.clone();
    for (f, s) in scenario.sessions().iter().enumerate() {
        for &l in net.outgoing(s.dst) {
            out.mu[l][f] = T::zero();
        }
        let mut pending: std::collections::BTreeSet<usize> =
            (0..net.node_count()).filter(|&n| n != s.dst).collect();
        while let Some(n) = pending.pop_first() {
            let g =
                crate::net::flow_residual(scenario, f, n, &out).expect("n is not the destination");
            let mut slack = -g;
            if slack <= tight {
                continue;
            }
            for &l in net.outgoing(n) {
                if slack <= T::zero() {
                    break;
                }
                let cut = out.mu[l][f].min(slack);
                if cut > T::zero() {
                    out.mu[l][f] = out.mu[l][f] - cut;
                    slack = slack - cut;
                    let head = net.link(l).head;
                    if head != s.dst {
                        pending.insert(head);
                    }
                }
            }
        }
    }
    out
}

/// Φ = Σ_{f, n ≠ Dst(f)} α_n ‖y*_n^(f) − y_n^(f)‖²
///   + Σ_f α_Dst(f) Σ_{l ∈ I(Dst(f))} (μ*_l^(f) − μ_l^(f))².
pub fn phi<T: Real>(
    scenario: &Scenario<T>,
    y_star: &DecisionVector<T>,
    y: &DecisionVector<T>,
    alpha: &[T],
) -> T {
    let diff = y_star.sub(y);
    let net = scenario.network();
    let mut total = T::zero();
    for (f, s) in scenario.sessions().iter().enumerate() {
        for n in 0..net.node_count() {
            let sq: T = if n == s.dst {
                net.incoming(n)
                    .iter()
                    .map(|&l| diff.mu[l][f] * diff.mu[l][f])
                    .sum()
            } else {
                crate::net::local_variables(scenario, f, n, &diff)
                    .iter()
                    .map(|&v| v * v)
                    .sum()
            };
            total = total + alpha[n] * sq;
        }
    }
    total
}

/// ζ = Φ evaluated against the all-zero decision.
pub fn compute_zeta<T: Real>(scenario: &Scenario<T>, y_star: &DecisionVector<T>, alpha: &[T]) -> T {
    phi(scenario, y_star, &DecisionVector::zeros(scenario), alpha)
}
