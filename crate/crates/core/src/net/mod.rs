//! Network model: topology, sessions, utilities and per-slot decisions.

mod format;
mod multipath;

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::scalar::{Fluid, Real};

pub use format::{parse_scenario, serialize_scenario};
pub use multipath::{multipath_expand, MultipathExpansion};

/// Absolute slack allowed when checking per-link capacity.
pub const CAPACITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link<T> {
    pub tail: usize,
    pub head: usize,
    pub capacity: T,
}

/// Directed capacitated graph with cached incidence lists.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    node_count: usize,
    links: Vec<Link<T>>,
    incoming: Vec<Vec<usize>>,
    outgoing: Vec<Vec<usize>>,
}

impl<T: Fluid> Network<T> {
    pub fn new(node_count: usize, links: Vec<Link<T>>) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::Validation("network needs at least one node".into()));
        }
        let mut incoming = vec![Vec::new(); node_count];
        let mut outgoing = vec![Vec::new(); node_count];
        for (idx, link) in links.iter().enumerate() {
            if link.tail >= node_count || link.head >= node_count {
                return Err(Error::Validation(format!(
                    "link {idx} ({} -> {}) references a node outside 0..{node_count}",
                    link.tail, link.head
                )));
            }
            if link.tail == link.head {
                return Err(Error::Validation(format!("link {idx} is a self-loop")));
            }
            if !(link.capacity > T::zero()) {
                return Err(Error::Validation(format!(
                    "link {idx} has non-positive capacity {:?}",
                    link.capacity
                )));
            }
            outgoing[link.tail].push(idx);
            incoming[link.head].push(idx);
        }
        Ok(Network {
            node_count,
            links,
            incoming,
            outgoing,
        })
    }
}

impl<T> Network<T> {
    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn links(&self) -> &[Link<T>] {
        &self.links
    }

    pub fn link(&self, idx: usize) -> &Link<T> {
        &self.links[idx]
    }

    /// I(n): indices of links entering `n`, ascending.
    pub fn incoming(&self, n: usize) -> &[usize] {
        &self.incoming[n]
    }

    /// O(n): indices of links leaving `n`, ascending.
    pub fn outgoing(&self, n: usize) -> &[usize] {
        &self.outgoing[n]
    }

    /// d_n = |I(n)| + |O(n)|.
    pub fn degree(&self, n: usize) -> usize {
        self.incoming[n].len() + self.outgoing[n].len()
    }

    pub fn max_degree(&self) -> usize {
        (0..self.node_count)
            .map(|n| self.degree(n))
            .max()
            .unwrap_or(0)
    }
}

impl<T: Fluid> Network<T> {
    /// Sum of capacities of links leaving `n`.
    pub fn out_capacity(&self, n: usize) -> T {
        self.outgoing[n]
            .iter()
            .fold(T::zero(), |acc, &l| acc + self.links[l].capacity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UtilityKind {
    /// w·log(x) on (0, ∞).
    WeightedLog,
    /// w·log(1 + x) on [0, ∞).
    WeightedLog1p,
}

impl UtilityKind {
    pub fn token(self) -> &'static str {
        match self {
            UtilityKind::WeightedLog => "wlog",
            UtilityKind::WeightedLog1p => "wlog1p",
        }
    }

    pub fn from_token(tok: &str) -> Option<Self> {
        match tok {
            "wlog" => Some(UtilityKind::WeightedLog),
            "wlog1p" => Some(UtilityKind::WeightedLog1p),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// (0, ∞)
    Open,
    /// [0, ∞)
    Closed,
}

impl Domain {
    pub fn contains<T: Real>(self, x: T) -> bool {
        match self {
            Domain::Open => x > T::zero() && x.is_finite(),
            Domain::Closed => x >= T::zero() && x.is_finite(),
        }
    }
}

/// Interface the solvers need from a concave source utility.
pub trait ConcaveUtility<T> {
    fn value(&self, x: T) -> Result<T>;
    /// Right derivative at `x`.
    fn derivative(&self, x: T) -> Result<T>;
    fn domain(&self) -> Domain;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Utility<T> {
    pub kind: UtilityKind,
    pub weight: T,
}

impl<T: Fluid> Utility<T> {
    pub fn new(kind: UtilityKind, weight: T) -> Result<Self> {
        if !(weight > T::zero()) {
            return Err(Error::Validation(format!(
                "utility weight must be positive, got {weight:?}"
            )));
        }
        Ok(Utility { kind, weight })
    }

    pub fn weighted_log(weight: T) -> Result<Self> {
        Self::new(UtilityKind::WeightedLog, weight)
    }

    pub fn weighted_log1p(weight: T) -> Result<Self> {
        Self::new(UtilityKind::WeightedLog1p, weight)
    }
}

impl<T> Utility<T> {
    pub fn domain_kind(&self) -> Domain {
        match self.kind {
            UtilityKind::WeightedLog => Domain::Open,
            UtilityKind::WeightedLog1p => Domain::Closed,
        }
    }
}

impl<T: Real> ConcaveUtility<T> for Utility<T> {
    fn value(&self, x: T) -> Result<T> {
        if !self.domain().contains(x) {
            return Err(Error::Contract(format!(
                "{} utility evaluated outside its domain at x = {x}",
                self.kind.token()
            )));
        }
        Ok(match self.kind {
            UtilityKind::WeightedLog => self.weight * x.ln(),
            UtilityKind::WeightedLog1p => self.weight * x.ln_1p(),
        })
    }

    fn derivative(&self, x: T) -> Result<T> {
        if !self.domain().contains(x) {
            return Err(Error::Contract(format!(
                "{} derivative evaluated outside its domain at x = {x}",
                self.kind.token()
            )));
        }
        Ok(match self.kind {
            UtilityKind::WeightedLog => self.weight / x,
            UtilityKind::WeightedLog1p => self.weight / (T::one() + x),
        })
    }

    fn domain(&self) -> Domain {
        self.domain_kind()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session<T> {
    pub id: usize,
    pub src: usize,
    pub dst: usize,
    pub utility: Utility<T>,
}

/// A network, its sessions, and per-link allowed-session sets S_l.
///
/// Sessions are addressed by their position (file order); `Session::id` is the
/// external label used by the scenario format.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario<T> {
    network: Network<T>,
    sessions: Vec<Session<T>>,
    allowed: Vec<BTreeSet<usize>>,
}

impl<T: Fluid> Scenario<T> {
    /// `allowed[l] = None` means every session may use link `l`.
    pub fn new(
        network: Network<T>,
        sessions: Vec<Session<T>>,
        allowed: Vec<Option<BTreeSet<usize>>>,
    ) -> Result<Self> {
        if allowed.len() != network.link_count() {
            return Err(Error::Validation(format!(
                "{} allow-sets for {} links",
                allowed.len(),
                network.link_count()
            )));
        }
        let mut seen = BTreeSet::new();
        for s in &sessions {
            if !seen.insert(s.id) {
                return Err(Error::Validation(format!("duplicate session id {}", s.id)));
            }
            if s.src >= network.node_count() || s.dst >= network.node_count() {
                return Err(Error::Validation(format!(
                    "session {} references a node outside 0..{}",
                    s.id,
                    network.node_count()
                )));
            }
            if s.src == s.dst {
                return Err(Error::Validation(format!(
                    "session {} has identical source and destination",
                    s.id
                )));
            }
        }
        let all: BTreeSet<usize> = (0..sessions.len()).collect();
        let allowed = allowed
            .into_iter()
            .enumerate()
            .map(|(l, set)| match set {
                None => Ok(all.clone()),
                Some(set) => {
                    if let Some(bad) = set.iter().find(|&&f| f >= sessions.len()) {
                        Err(Error::Validation(format!(
                            "link {l} allows unknown session index {bad}"
                        )))
                    } else {
                        Ok(set)
                    }
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Scenario {
            network,
            sessions,
            allowed,
        })
    }
}

impl<T> Scenario<T> {
    pub fn network(&self) -> &Network<T> {
        &self.network
    }

    pub fn sessions(&self) -> &[Session<T>] {
        &self.sessions
    }

    pub fn session(&self, f: usize) -> &Session<T> {
        &self.sessions[f]
    }

    pub fn session_count(&self) -> usize {
        self.sessions.len()
    }

    pub fn node_count(&self) -> usize {
        self.network.node_count()
    }

    pub fn link_count(&self) -> usize {
        self.network.link_count()
    }

    /// S_l as ascending session indices.
    pub fn allowed(&self, l: usize) -> &BTreeSet<usize> {
        &self.allowed[l]
    }

    pub fn is_allowed(&self, l: usize, f: usize) -> bool {
        self.allowed[l].contains(&f)
    }

    /// Session position for an external id.
    pub fn session_index(&self, id: usize) -> Option<usize> {
        self.sessions.iter().position(|s| s.id == id)
    }

    /// Whether (f, n) carries a flow-balance constraint, i.e. n ≠ Dst(f).
    pub fn has_constraint(&self, f: usize, n: usize) -> bool {
        self.sessions[f].dst != n
    }

    /// All (f, n) pairs with n ≠ Dst(f), session-major.
    pub fn constrained_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.sessions.len()).flat_map(move |f| {
            (0..self.network.node_count())
                .filter(move |&n| n != self.sessions[f].dst)
                .map(move |n| (f, n))
        })
    }
}

/// Source rates x_f and link-session rates μ_l^(f) for one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionVector<T> {
    pub x: Vec<T>,
    /// `mu[l][f]`
    pub mu: Vec<Vec<T>>,
}

impl<T: Fluid> DecisionVector<T> {
    pub fn zeros<S>(scenario: &Scenario<S>) -> Self {
        DecisionVector {
            x: vec![T::zero(); scenario.session_count()],
            mu: vec![vec![T::zero(); scenario.session_count()]; scenario.link_count()],
        }
    }

    pub fn link_total(&self, l: usize) -> T {
        self.mu[l].iter().fold(T::zero(), |acc, &v| acc + v)
    }

    /// Componentwise sum.
    pub fn add(&self, other: &Self) -> Self {
        DecisionVector {
            x: self.x.iter().zip(&other.x).map(|(&a, &b)| a + b).collect(),
            mu: self
                .mu
                .iter()
                .zip(&other.mu)
                .map(|(ra, rb)| ra.iter().zip(rb).map(|(&a, &b)| a + b).collect())
                .collect(),
        }
    }

    /// Componentwise difference.
    pub fn sub(&self, other: &Self) -> Self {
        DecisionVector {
            x: self.x.iter().zip(&other.x).map(|(&a, &b)| a - b).collect(),
            mu: self
                .mu
                .iter()
                .zip(&other.mu)
                .map(|(ra, rb)| ra.iter().zip(rb).map(|(&a, &b)| a - b).collect())
                .collect(),
        }
    }
}

impl<T: Real> DecisionVector<T> {
    /// Largest violation of capacity, nonnegativity, or forbidden-link
    /// constraints. Zero for a set-feasible vector.
    pub fn set_violation(&self, scenario: &Scenario<T>) -> T {
        let mut worst = T::zero();
        for &x in &self.x {
            worst = worst.max(-x);
        }
        for (l, row) in self.mu.iter().enumerate() {
            let cap = scenario.network().link(l).capacity;
            worst = worst.max(self.link_total(l) - cap);
            for (f, &v) in row.iter().enumerate() {
                worst = worst.max(-v);
                if !scenario.is_allowed(l, f) {
                    worst = worst.max(v.abs());
                }
            }
        }
        worst
    }

    pub fn is_set_feasible(&self, scenario: &Scenario<T>) -> bool {
        self.set_violation(scenario) <= crate::scalar::lit(CAPACITY_TOL)
    }
}

/// Dense per-(session, node) table. Entries at n = Dst(f) exist in storage but
/// are pinned to zero and skipped by the `active` iterators.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionNodeMap<T> {
    nodes: usize,
    dst: Vec<usize>,
    values: Vec<T>,
}

impl<T: Fluid> SessionNodeMap<T> {
    pub fn zeros<S>(scenario: &Scenario<S>) -> Self {
        SessionNodeMap {
            nodes: scenario.node_count(),
            dst: scenario.sessions().iter().map(|s| s.dst).collect(),
            values: vec![T::zero(); scenario.node_count() * scenario.session_count()],
        }
    }

    pub fn get(&self, f: usize, n: usize) -> T {
        self.values[f * self.nodes + n]
    }

    /// Writes to a destination entry are ignored.
    pub fn set(&mut self, f: usize, n: usize, v: T) {
        if self.dst[f] != n {
            self.values[f * self.nodes + n] = v;
        }
    }

    pub fn session_count(&self) -> usize {
        self.dst.len()
    }

    pub fn node_count(&self) -> usize {
        self.nodes
    }

    /// (f, n, value) over n ≠ Dst(f).
    pub fn active(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.dst.len()).flat_map(move |f| {
            (0..self.nodes)
                .filter(move |&n| n != self.dst[f])
                .map(move |n| (f, n, self.values[f * self.nodes + n]))
        })
    }

    pub fn map(&self, mut op: impl FnMut(usize, usize, T) -> T) -> Self {
        let mut out = self.clone();
        for f in 0..self.dst.len() {
            for n in 0..self.nodes {
                if n != self.dst[f] {
                    out.values[f * self.nodes + n] = op(f, n, self.values[f * self.nodes + n]);
                }
            }
        }
        out
    }

    pub fn zip_with(&self, other: &Self, mut op: impl FnMut(T, T) -> T) -> Self {
        self.map(|f, n, v| op(v, other.get(f, n)))
    }

    pub fn max_active(&self) -> Option<T> {
        self.active()
            .map(|(_, _, v)| v)
            .fold(None, |acc, v| match acc {
                Some(m) if m >= v => Some(m),
                _ => Some(v),
            })
    }

    pub fn max_abs(&self) -> T {
        self.active()
            .map(|(_, _, v)| crate::scalar::fabs(v))
            .fold(T::zero(), crate::scalar::fmax)
    }

    pub fn sum_active(&self) -> T {
        self.active().fold(T::zero(), |acc, (_, _, v)| acc + v)
    }

    pub fn sum_sq(&self) -> T {
        self.active().fold(T::zero(), |acc, (_, _, v)| acc + v * v)
    }
}

impl<T: Real> SessionNodeMap<T> {
    /// Euclidean norm over active entries.
    pub fn norm(&self) -> T {
        self.sum_sq().sqrt()
    }
}

/// Exogenous per-(session, node) injection where only sources inject x_f.
pub fn source_injection<T: Fluid, S>(scenario: &Scenario<S>, x: &[T]) -> SessionNodeMap<T> {
    let mut inj = SessionNodeMap::zeros(scenario);
    for (f, s) in scenario.sessions().iter().enumerate() {
        inj.set(f, s.src, x[f]);
    }
    inj
}

/// injection + Σ_{I(n)} μ − Σ_{O(n)} μ for every constrained (f, n).
pub fn net_change<T: Fluid, S>(
    scenario: &Scenario<S>,
    injection: &SessionNodeMap<T>,
    mu: &[Vec<T>],
) -> SessionNodeMap<T> {
    let net = scenario.network();
    injection.map(|f, n, inj| {
        let inflow = net
            .incoming(n)
            .iter()
            .fold(T::zero(), |acc, &l| acc + mu[l][f]);
        let outflow = net
            .outgoing(n)
            .iter()
            .fold(T::zero(), |acc, &l| acc + mu[l][f]);
        inj + inflow - outflow
    })
}

/// g_n^(f)(y) for every constrained pair.
pub fn residuals<T: Fluid, S>(scenario: &Scenario<S>, y: &DecisionVector<T>) -> SessionNodeMap<T> {
    net_change(scenario, &source_injection(scenario, &y.x), &y.mu)
}

/// g_n^(f)(y) = x_f·1{n = Src(f)} + Σ_{I(n)} μ_l^(f) − Σ_{O(n)} μ_l^(f).
pub fn flow_residual<T: Fluid, S>(
    scenario: &Scenario<S>,
    f: usize,
    n: usize,
    y: &DecisionVector<T>,
) -> Result<T> {
    let session = scenario.session(f);
    if n == session.dst {
        return Err(Error::Contract(format!(
            "node {n} is the destination of session {}; it has no flow-balance constraint",
            session.id
        )));
    }
    let net = scenario.network();
    let mut g = if n == session.src { y.x[f] } else { T::zero() };
    for &l in net.incoming(n) {
        g = g + y.mu[l][f];
    }
    for &l in net.outgoing(n) {
        g = g - y.mu[l][f];
    }
    Ok(g)
}

/// The sub-vector y_n^(f): [x_f if n is the source] followed by μ_l^(f) for
/// l ∈ I(n) then l ∈ O(n).
pub fn local_variables<T: Fluid, S>(
    scenario: &Scenario<S>,
    f: usize,
    n: usize,
    y: &DecisionVector<T>,
) -> Vec<T> {
    let net = scenario.network();
    let mut out = Vec::with_capacity(net.degree(n) + 1);
    if scenario.session(f).src == n {
        out.push(y.x[f]);
    }
    out.extend(net.incoming(n).iter().map(|&l| y.mu[l][f]));
    out.extend(net.outgoing(n).iter().map(|&l| y.mu[l][f]));
    out
}

/// Nodes that can reach `dst` using only links on which session `f` is allowed.
pub fn nodes_reaching<S>(scenario: &Scenario<S>, f: usize) -> Vec<bool> {
    let net = scenario.network();
    let dst = scenario.session(f).dst;
    let mut reach = vec![false; net.node_count()];
    reach[dst] = true;
    let mut stack = vec![dst];
    while let Some(m) = stack.pop() {
        for &l in net.incoming(m) {
            let tail = net.link(l).tail;
            if !reach[tail] && scenario.is_allowed(l, f) {
                reach[tail] = true;
                stack.push(tail);
            }
        }
    }
    reach
}
