//! Three queue models driven by the same decisions.
//!
//! * Y: instant forwarding, Y ← max{Y + g, 0}. Data injected in a slot may
//!   cross every hop in that slot.
//! * Z: store-and-forward. Each node first serves its outgoing links from the
//!   backlog it holds at the start of the slot, then receives what upstream
//!   nodes actually sent plus its exogenous injection.
//! * Q: signed virtual queue, Q ← Q + g.
//!
//! Everything here works over [`Fluid`] so exact rationals can be used.

use crate::net::{net_change, Scenario, SessionNodeMap};
use crate::scalar::{fabs, fmax, fmin, Fluid};

pub fn step_y<T: Fluid, S>(
    y: &SessionNodeMap<T>,
    injection: &SessionNodeMap<T>,
    mu: &[Vec<T>],
    scenario: &Scenario<S>,
) -> SessionNodeMap<T> {
    let g = net_change(scenario, injection, mu);
    y.zip_with(&g, |y, g| fmax(y + g, T::zero()))
}

pub fn step_q<T: Fluid, S>(
    q: &SessionNodeMap<T>,
    injection: &SessionNodeMap<T>,
    mu: &[Vec<T>],
    scenario: &Scenario<S>,
) -> SessionNodeMap<T> {
    let g = net_change(scenario, injection, mu);
    q.zip_with(&g, |q, g| q + g)
}

/// Returns the next Z and the actual per-(link, session) transfers.
///
/// A node short of backlog serves its outgoing links in ascending index order,
/// each taking min(prescribed μ, what is left).
pub fn step_z<T: Fluid, S>(
    z: &SessionNodeMap<T>,
    injection: &SessionNodeMap<T>,
    mu: &[Vec<T>],
    scenario: &Scenario<S>,
) -> (SessionNodeMap<T>, Vec<Vec<T>>) {
    let net = scenario.network();
    let sessions = scenario.session_count();
    let mut sent = vec![vec![T::zero(); sessions]; net.link_count()];
    let mut left = z.clone();
    for f in 0..sessions {
        let dst = scenario.session(f).dst;
        for n in 0..net.node_count() {
            if n == dst {
                continue;
            }
            let mut avail = z.get(f, n);
            for &l in net.outgoing(n) {
                let s = fmin(mu[l][f], avail);
                let s = fmax(s, T::zero());
                sent[l][f] = s;
                avail = avail - s;
            }
            left.set(f, n, avail);
        }
    }
    let next = left.map(|f, n, rest| {
        let arrivals = net
            .incoming(n)
            .iter()
            .fold(T::zero(), |acc, &l| acc + sent[l][f]);
        rest + arrivals + injection.get(f, n)
    });
    (next, sent)
}

/// (Y, Z, Q) for every (session, non-destination node).
#[derive(Debug, Clone, PartialEq)]
pub struct QueueTriple<T> {
    pub y: SessionNodeMap<T>,
    pub z: SessionNodeMap<T>,
    pub q: SessionNodeMap<T>,
}

impl<T: Fluid> QueueTriple<T> {
    pub fn zeros<S>(scenario: &Scenario<S>) -> Self {
        QueueTriple {
            y: SessionNodeMap::zeros(scenario),
            z: SessionNodeMap::zeros(scenario),
            q: SessionNodeMap::zeros(scenario),
        }
    }

    /// Advances all three families under the same decisions and returns the
    /// actual transfers of the Z model.
    pub fn advance<S>(
        &mut self,
        scenario: &Scenario<S>,
        injection: &SessionNodeMap<T>,
        mu: &[Vec<T>],
    ) -> Vec<Vec<T>> {
        self.y = step_y(&self.y, injection, mu, scenario);
        self.q = step_q(&self.q, injection, mu, scenario);
        let (z, sent) = step_z(&self.z, injection, mu, scenario);
        self.z = z;
        sent
    }
}

/// Exogenous arrivals and prescribed rates, repeating with a fixed period.
/// Entry i applies to every slot t with t mod period = i.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptedPolicy<T> {
    arrivals: Vec<SessionNodeMap<T>>,
    mu: Vec<Vec<Vec<T>>>,
}

impl<T: Fluid> ScriptedPolicy<T> {
    pub fn new(arrivals: Vec<SessionNodeMap<T>>, mu: Vec<Vec<Vec<T>>>) -> crate::Result<Self> {
        if arrivals.is_empty() || arrivals.len() != mu.len() {
            return Err(crate::Error::Validation(format!(
                "policy needs matching nonempty schedules, got {} arrival and {} rate entries",
                arrivals.len(),
                mu.len()
            )));
        }
        Ok(ScriptedPolicy { arrivals, mu })
    }

    /// Checks nonnegativity, capacities and allow-sets of every prescribed μ.
    pub fn validate(&self, scenario: &Scenario<T>) -> crate::Result<()> {
        for (i, mu) in self.mu.iter().enumerate() {
            if mu.len() != scenario.link_count() {
                return Err(crate::Error::Validation(format!(
                    "policy entry {i} has {} links",
                    mu.len()
                )));
            }
            for (l, row) in mu.iter().enumerate() {
                let total = row.iter().fold(T::zero(), |acc, &v| acc + v);
                if total > scenario.network().link(l).capacity {
                    return Err(crate::Error::Validation(format!(
                        "policy entry {i} exceeds the capacity of link {l}"
                    )));
                }
                for (f, &v) in row.iter().enumerate() {
                    if v < T::zero() || (v != T::zero() && !scenario.is_allowed(l, f)) {
                        return Err(crate::Error::Validation(format!(
                            "policy entry {i} has an invalid rate on link {l} for session {f}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn period(&self) -> usize {
        self.arrivals.len()
    }

    pub fn arrivals(&self, slot: u64) -> &SessionNodeMap<T> {
        &self.arrivals[(slot % self.period() as u64) as usize]
    }

    pub fn mu(&self, slot: u64) -> &[Vec<T>] {
        &self.mu[(slot % self.period() as u64) as usize]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueueFamily {
    Y,
    Z,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundViolation<T> {
    pub slot: u64,
    pub session: usize,
    pub node: usize,
    pub family: QueueFamily,
    pub value: T,
    pub bound: T,
}

/// Per-(session, node) running maxima of Y, Z and Z − Q plus the largest |Q|,
/// each with the slot at which it was first attained. This is enough to run
/// the bound-transfer check for any B after the fact.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueMaxima<T> {
    nodes: usize,
    dst: Vec<usize>,
    y: Vec<(T, u64)>,
    z: Vec<(T, u64)>,
    z_minus_q: Vec<(T, u64)>,
    abs_q: T,
}

fn bump<T: Fluid>(cell: &mut (T, u64), v: T, slot: u64) {
    if v > cell.0 {
        *cell = (v, slot);
    }
}

impl<T: Fluid> QueueMaxima<T> {
    pub fn new<S>(scenario: &Scenario<S>) -> Self {
        let cells = scenario.node_count() * scenario.session_count();
        QueueMaxima {
            nodes: scenario.node_count(),
            dst: scenario.sessions().iter().map(|s| s.dst).collect(),
            y: vec![(T::zero(), 0); cells],
            z: vec![(T::zero(), 0); cells],
            z_minus_q: vec![(T::zero(), 0); cells],
            abs_q: T::zero(),
        }
    }

    /// Records the queues observed at `slot`.
    pub fn observe(&mut self, slot: u64, queues: &QueueTriple<T>) {
        for (f, n, z) in queues.z.active() {
            let i = f * self.nodes + n;
            let q = queues.q.get(f, n);
            bump(&mut self.y[i], queues.y.get(f, n), slot);
            bump(&mut self.z[i], z, slot);
            bump(&mut self.z_minus_q[i], z - q, slot);
            self.abs_q = fmax(self.abs_q, fabs(q));
        }
    }

    /// Largest |Q| seen so far.
    pub fn max_abs_q(&self) -> T {
        self.abs_q
    }

    pub fn max_y(&self) -> T {
        self.y.iter().fold(T::zero(), |m, c| fmax(m, c.0))
    }

    pub fn max_z(&self) -> T {
        self.z.iter().fold(T::zero(), |m, c| fmax(m, c.0))
    }

    /// Largest Z_n^(f) ever seen at node n, over all sessions.
    pub fn max_z_at(&self, n: usize) -> T {
        (0..self.dst.len())
            .filter(|&f| self.dst[f] != n)
            .fold(T::zero(), |m, f| fmax(m, self.z[f * self.nodes + n].0))
    }

    /// If |Q| ≤ B throughout, then Y, Z ≤ 2B + Σ_{O(n)} C_l and, pathwise,
    /// Z ≤ Q + B + Σ_{O(n)} C_l. Returns every (session, node) whose worst
    /// slot breaks one of these, tagged with that slot. An empty report
    /// means the bounds hold.
    pub fn check_bound_transfer<S>(&self, b: T, scenario: &Scenario<S>) -> Vec<BoundViolation<T>>
    where
        S: Fluid + Into<T>,
    {
        let two = T::one() + T::one();
        let mut out = Vec::new();
        for f in 0..self.dst.len() {
            for n in (0..self.nodes).filter(|&n| n != self.dst[f]) {
                let i = f * self.nodes + n;
                let cap: T = scenario.network().out_capacity(n).into();
                let bound = two * b + cap;
                for (family, cell) in [(QueueFamily::Y, self.y[i]), (QueueFamily::Z, self.z[i])] {
                    if cell.0 > bound {
                        out.push(BoundViolation {
                            slot: cell.1,
                            session: f,
                            node: n,
                            family,
                            value: cell.0,
                            bound,
                        });
                    }
                }
                let (gap, slot) = self.z_minus_q[i];
                if gap > b + cap {
                    out.push(BoundViolation {
                        slot,
                        session: f,
                        node: n,
                        family: QueueFamily::Z,
                        value: gap,
                        bound: b + cap,
                    });
                }
            }
        }
        out
    }
}

/// Bound-transfer check over a full history of queue snapshots (slot i is
/// `history[i]`).
pub fn check_bound_transfer<T: Fluid, S>(
    history: &[QueueTriple<T>],
    b: T,
    scenario: &Scenario<S>,
) -> Vec<BoundViolation<T>>
where
    S: Fluid + Into<T>,
{
    let mut maxima = QueueMaxima::new(scenario);
    for (slot, queues) in history.iter().enumerate() {
        maxima.observe(slot as u64, queues);
    }
    maxima.check_bound_transfer(b, scenario)
}
