//! Proximal backpressure with virtual-queue weights.
//!
//! Each slot t:
//! 1. W_n^(f)[t] = Q_n^(f)[t] + g_n^(f)(y[t−1]), with W = 0 at Dst(f);
//! 2. every source solves max U(x) − W·x − α_n(x − x[t−1])²;
//! 3. every link (n, m) solves
//!    max Σ_f (W_n − W_m)μ_f − (α_n + α_m) Σ_f (μ_f − μ_f[t−1])²
//!    over {μ ≥ 0, Σμ ≤ C, μ_f = 0 for f ∉ S_l}, a capped-simplex projection;
//! 4. Q[t+1] = Q[t] + g(y[t]).
//!
//! Steps 2 and 3 read only slot-t state, so they are independent across
//! sources and links. [`slot_update_parallel`] exploits that and produces the
//! same bits as [`slot_update`].

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::net::{residuals, DecisionVector, Network, Scenario, SessionNodeMap};
use crate::proj::{project_sorted, ProjectionInstance};
use crate::rate::{source_rate, RateProblem};
use crate::scalar::{lit, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AlphaMode {
    /// α_n = ½(d_n + 1), enough for the O(1/t) utility gap.
    UtilityGap,
    /// α_n = ½(d_n + 1)², enough for constant virtual-queue bounds as well.
    #[default]
    QueueBound,
}

impl AlphaMode {
    pub fn token(self) -> &'static str {
        match self {
            AlphaMode::UtilityGap => "gap",
            AlphaMode::QueueBound => "bound",
        }
    }

    pub fn from_token(tok: &str) -> Option<Self> {
        match tok {
            "gap" => Some(AlphaMode::UtilityGap),
            "bound" => Some(AlphaMode::QueueBound),
            _ => None,
        }
    }
}

pub fn default_alpha<T: Real, S>(network: &Network<S>, mode: AlphaMode) -> Vec<T> {
    let half = lit::<T>(0.5);
    (0..network.node_count())
        .map(|n| {
            let d = T::from_usize(network.degree(n) + 1).expect("degree fits scalar");
            match mode {
                AlphaMode::UtilityGap => half * d,
                AlphaMode::QueueBound => half * d * d,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgConfig<T> {
    alpha: Vec<T>,
}

impl<T: Real> AlgConfig<T> {
    pub fn new(alpha: Vec<T>) -> Result<Self> {
        if let Some((n, a)) = alpha.iter().enumerate().find(|(_, a)| !(**a > T::zero())) {
            return Err(Error::Contract(format!(
                "alpha at node {n} must be positive, got {a}"
            )));
        }
        Ok(AlgConfig { alpha })
    }

    /// Degree-based α from `mode`, multiplied by `scale`.
    pub fn from_mode<S>(network: &Network<S>, mode: AlphaMode, scale: T) -> Result<Self> {
        Self::new(
            default_alpha::<T, S>(network, mode)
                .into_iter()
                .map(|a| a * scale)
                .collect(),
        )
    }

    pub fn alpha(&self) -> &[T] {
        &self.alpha
    }

    /// Whether every α_n is at least the threshold of `mode`.
    pub fn meets<S>(&self, network: &Network<S>, mode: AlphaMode) -> bool {
        self.alpha
            .iter()
            .zip(default_alpha::<T, S>(network, mode))
            .all(|(&a, need)| a >= need)
    }
}

/// Virtual queues Q[t], the previous decisions y[t−1] and the slot counter.
#[derive(Debug, Clone, PartialEq)]
pub struct BpState<T> {
    q: SessionNodeMap<T>,
    y_prev: DecisionVector<T>,
    slot: u64,
}

impl<T: Real> BpState<T> {
    /// Q ≡ 0, y[−1] ≡ 0, t = 0.
    pub fn new(scenario: &Scenario<T>) -> Self {
        BpState {
            q: SessionNodeMap::zeros(scenario),
            y_prev: DecisionVector::zeros(scenario),
            slot: 0,
        }
    }

    pub fn q(&self) -> &SessionNodeMap<T> {
        &self.q
    }

    pub fn y_prev(&self) -> &DecisionVector<T> {
        &self.y_prev
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }
}

/// W[t] = Q[t] + g(y[t−1]).
pub fn compute_weights<T: Real>(state: &BpState<T>, scenario: &Scenario<T>) -> SessionNodeMap<T> {
    state
        .q
        .zip_with(&residuals(scenario, &state.y_prev), |q, g| q + g)
}

pub fn source_update<T: Real>(
    scenario: &Scenario<T>,
    f: usize,
    weights: &SessionNodeMap<T>,
    alpha: &[T],
    x_prev: T,
) -> Result<T> {
    let s = scenario.session(f);
    let p = RateProblem::new(s.utility, weights.get(f, s.src), x_prev, alpha[s.src])?;
    source_rate(&p)
}

/// Rates of link `l` for every session; forbidden sessions get exactly 0.
pub fn link_update<T: Real>(
    scenario: &Scenario<T>,
    l: usize,
    weights: &SessionNodeMap<T>,
    alpha: &[T],
    mu_prev: &[T],
) -> Result<Vec<T>> {
    let link = scenario.network().link(l);
    let mut out = vec![T::zero(); scenario.session_count()];
    let allowed: Vec<usize> = scenario.allowed(l).iter().copied().collect();
    if allowed.is_empty() {
        return Ok(out);
    }
    let denom = lit::<T>(2.0) * (alpha[link.tail] + alpha[link.head]);
    let a = allowed
        .iter()
        .map(|&f| mu_prev[f] + (weights.get(f, link.tail) - weights.get(f, link.head)) / denom)
        .collect();
    let proj = project_sorted(&ProjectionInstance::new(a, link.capacity)?);
    for (&f, z) in allowed.iter().zip(proj.z) {
        out[f] = z;
    }
    Ok(out)
}

/// What one slot decided.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotOutcome<T> {
    pub y: DecisionVector<T>,
    /// W[t] used for the decisions.
    pub weights: SessionNodeMap<T>,
    /// g(y[t]).
    pub residuals: SessionNodeMap<T>,
}

fn finish<T: Real>(
    state: &BpState<T>,
    scenario: &Scenario<T>,
    weights: SessionNodeMap<T>,
    y: DecisionVector<T>,
) -> (SlotOutcome<T>, BpState<T>) {
    let g = residuals(scenario, &y);
    let next = BpState {
        q: state.q.zip_with(&g, |q, g| q + g),
        y_prev: y.clone(),
        slot: state.slot + 1,
    };
    (
        SlotOutcome {
            y,
            weights,
            residuals: g,
        },
        next,
    )
}

fn check_dims<T: Real>(scenario: &Scenario<T>, config: &AlgConfig<T>) -> Result<()> {
    if config.alpha.len() != scenario.node_count() {
        return Err(Error::Contract(format!(
            "alpha has {} entries for {} nodes",
            config.alpha.len(),
            scenario.node_count()
        )));
    }
    Ok(())
}

/// One slot, sources then links in index order.
pub fn slot_update<T: Real>(
    state: &BpState<T>,
    scenario: &Scenario<T>,
    config: &AlgConfig<T>,
) -> Result<(SlotOutcome<T>, BpState<T>)> {
    check_dims(scenario, config)?;
    let w = compute_weights(state, scenario);
    let alpha = &config.alpha;
    let x = (0..scenario.session_count())
        .map(|f| source_update(scenario, f, &w, alpha, state.y_prev.x[f]))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.at_slot(state.slot))?;
    let mu = (0..scenario.link_count())
        .map(|l| link_update(scenario, l, &w, alpha, &state.y_prev.mu[l]))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.at_slot(state.slot))?;
    Ok(finish(state, scenario, w, DecisionVector { x, mu }))
}

/// Same as [`slot_update`] with sources and links solved on the rayon pool.
pub fn slot_update_parallel<T: Real>(
    state: &BpState<T>,
    scenario: &Scenario<T>,
    config: &AlgConfig<T>,
) -> Result<(SlotOutcome<T>, BpState<T>)> {
    check_dims(scenario, config)?;
    let w = compute_weights(state, scenario);
    let alpha = &config.alpha;
    let x = (0..scenario.session_count())
        .into_par_iter()
        .map(|f| source_update(scenario, f, &w, alpha, state.y_prev.x[f]))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.at_slot(state.slot))?;
    let mu = (0..scenario.link_count())
        .into_par_iter()
        .map(|l| link_update(scenario, l, &w, alpha, &state.y_prev.mu[l]))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.at_slot(state.slot))?;
    Ok(finish(state, scenario, w, DecisionVector { x, mu }))
}

/// L = ½ Σ Q² over constrained pairs.
pub fn lyapunov<T: Real>(q: &SessionNodeMap<T>) -> T {
    lit::<T>(0.5) * q.sum_sq()
}

/// L(after) − L(before), summed per entry as ½(a − b)(a + b) so that large
/// queues do not swamp the difference.
pub fn lyapunov_change<T: Real>(before: &SessionNodeMap<T>, after: &SessionNodeMap<T>) -> T {
    let half = lit::<T>(0.5);
    before
        .active()
        .map(|(f, n, b)| {
            let a = after.get(f, n);
            half * (a - b) * (a + b)
        })
        .sum()
}

/// Σ (Q·g + ½g²), the exact one-slot change of [`lyapunov`].
pub fn drift<T: Real>(q: &SessionNodeMap<T>, g: &SessionNodeMap<T>) -> T {
    let half = lit::<T>(0.5);
    q.active()
        .map(|(f, n, qv)| {
            let gv = g.get(f, n);
            qv * gv + half * gv * gv
        })
        .sum()
}
