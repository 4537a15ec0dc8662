//! Classical drift-plus-penalty backpressure.
//!
//! Sources pick x ∈ [0, x_max] maximizing V·U(x) − Q_src·x; each link gives
//! its whole capacity to the allowed session with the largest positive
//! backlog differential Q_n − Q_m (Q = 0 at the destination), lowest index on
//! ties; queues follow the clipped update Q ← max{Q + g, 0}.

use crate::error::{Error, Result};
use crate::net::{source_injection, DecisionVector, Scenario, SessionNodeMap, UtilityKind};
use crate::queues::step_y;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct DppConfig<T> {
    v: T,
    x_max: Vec<T>,
}

impl<T: Real> DppConfig<T> {
    pub fn new(v: T, x_max: Vec<T>) -> Result<Self> {
        if !(v > T::zero()) {
            return Err(Error::Contract(format!("V must be positive, got {v}")));
        }
        if let Some(bad) = x_max.iter().find(|x| !(**x > T::zero())) {
            return Err(Error::Contract(format!(
                "rate cap must be positive, got {bad}"
            )));
        }
        Ok(DppConfig { v, x_max })
    }

    /// Caps each source at the total capacity leaving it.
    pub fn with_default_caps(scenario: &Scenario<T>, v: T) -> Result<Self> {
        let caps = scenario
            .sessions()
            .iter()
            .map(|s| scenario.network().out_capacity(s.src))
            .collect();
        Self::new(v, caps)
    }

    pub fn v(&self) -> T {
        self.v
    }

    pub fn x_max(&self) -> &[T] {
        &self.x_max
    }
}

/// argmax over [0, x_max] ∩ dom(U) of V·U(x) − q·x, in closed form for the
/// supported utilities.
pub fn dpp_source_rate<T: Real>(kind: UtilityKind, weight: T, v: T, q: T, x_max: T) -> T {
    if q <= T::zero() {
        return x_max;
    }
    let stationary = v * weight / q;
    match kind {
        UtilityKind::WeightedLog => stationary.min(x_max),
        UtilityKind::WeightedLog1p => (stationary - T::one()).max(T::zero()).min(x_max),
    }
}

/// One slot of decisions for clipped queues `q`.
pub fn dpp_slot_update<T: Real>(
    q: &SessionNodeMap<T>,
    scenario: &Scenario<T>,
    config: &DppConfig<T>,
) -> Result<DecisionVector<T>> {
    if config.x_max.len() != scenario.session_count() {
        return Err(Error::Contract(format!(
            "{} rate caps for {} sessions",
            config.x_max.len(),
            scenario.session_count()
        )));
    }
    let mut y = DecisionVector::zeros(scenario);
    for (f, s) in scenario.sessions().iter().enumerate() {
        y.x[f] = dpp_source_rate(
            s.utility.kind,
            s.utility.weight,
            config.v,
            q.get(f, s.src),
            config.x_max[f],
        );
    }
    for (l, link) in scenario.network().links().iter().enumerate() {
        let mut best: Option<(usize, T)> = None;
        for &f in scenario.allowed(l) {
            let diff = q.get(f, link.tail) - q.get(f, link.head);
            if diff > T::zero() && best.is_none_or(|(_, d)| diff > d) {
                best = Some((f, diff));
            }
        }
        if let Some((f, _)) = best {
            y.mu[l][f] = link.capacity;
        }
    }
    Ok(y)
}

/// Decisions for the slot and the clipped queues after it.
pub fn dpp_step<T: Real>(
    q: &SessionNodeMap<T>,
    scenario: &Scenario<T>,
    config: &DppConfig<T>,
) -> Result<(DecisionVector<T>, SessionNodeMap<T>)> {
    let y = dpp_slot_update(q, scenario, config)?;
    let next = step_y(q, &source_injection(scenario, &y.x), &y.mu, scenario);
    Ok((y, next))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::parse_scenario;
    use proptest::prelude::*;

    fn two_sessions() -> Scenario<f64> {
        parse_scenario(
            "nodes 3\nlink 0 1 1\nlink 1 2 1\nsession 0 0 2 wlog 1\nsession 1 0 2 wlog 1\n",
        )
        .unwrap()
    }

    #[test]
    fn link_goes_to_largest_positive_differential() {
        let sc = two_sessions();
        let mut q = SessionNodeMap::zeros(&sc);
        q.set(0, 0, 5.0);
        q.set(1, 0, 2.0);
        q.set(0, 1, 1.0);
        q.set(1, 1, 4.0);
        let cfg = DppConfig::with_default_caps(&sc, 1.0).unwrap();
        let y = dpp_slot_update(&q, &sc, &cfg).unwrap();
        assert_eq!(y.mu[0], vec![1.0, 0.0]);
        // Link 1 -> 2 sees differentials (1, 4): session 1 wins.
        assert_eq!(y.mu[1], vec![0.0, 1.0]);
    }

    #[test]
    fn nonpositive_differentials_idle_the_link() {
        let sc = two_sessions();
        let mut q = SessionNodeMap::zeros(&sc);
        q.set(0, 1, 3.0);
        q.set(1, 1, 3.0);
        let cfg = DppConfig::with_default_caps(&sc, 1.0).unwrap();
        let y = dpp_slot_update(&q, &sc, &cfg).unwrap();
        assert_eq!(y.mu[0], vec![0.0, 0.0]);
        // Equal positive differentials: lowest index wins.
        assert_eq!(y.mu[1], vec![1.0, 0.0]);
    }

    #[test]
    fn source_rate_matches_grid_search() {
        let x = dpp_source_rate(UtilityKind::WeightedLog, 1.0, 500.0, 100.0, 10.0);
        assert_eq!(x, 5.0);
        let obj = |x: f64| 500.0 * x.ln() - 100.0 * x;
        let grid =
            (1..=10_000)
                .map(|i| i as f64 * 1e-3)
                .fold(1e-3, |b, x| if obj(x) > obj(b) { x } else { b });
        assert!((grid - x).abs() <= 1e-3);
        assert_eq!(
            dpp_source_rate(UtilityKind::WeightedLog, 1.0, 500.0, 100.0, 2.0),
            2.0
        );
        assert_eq!(
            dpp_source_rate(UtilityKind::WeightedLog, 1.0, 500.0, 0.0, 2.0),
            2.0
        );
        assert_eq!(
            dpp_source_rate(UtilityKind::WeightedLog1p, 1.0, 1.0, 2.0, 2.0),
            0.0
        );
        assert_eq!(
            dpp_source_rate(UtilityKind::WeightedLog1p, 1.0, 4.0, 1.0, 2.0),
            2.0
        );
    }

    #[test]
    fn queues_stay_nonnegative() {
        let sc: Scenario<f64> = parse_scenario(
            "nodes 4\nlink 0 1 1\nlink 1 3 1\nlink 0 2 1\nlink 2 3 1\nlink 3 0 1\n\
             session 0 0 3 wlog 1\nsession 1 1 3 wlog1p 2\n",
        )
        .unwrap();
        let cfg = DppConfig::with_default_caps(&sc, 50.0).unwrap();
        let mut q = SessionNodeMap::zeros(&sc);
        for _ in 0..500 {
            let (y, next) = dpp_step(&q, &sc, &cfg).unwrap();
            assert!(y.is_set_feasible(&sc));
            assert!(next.active().all(|(_, _, v)| v >= 0.0));
            q = next;
        }
    }

    #[test]
    fn rejects_bad_config() {
        assert!(DppConfig::new(0.0, vec![1.0]).is_err());
        assert!(DppConfig::new(1.0, vec![0.0]).is_err());
    }

    proptest! {
        #[test]
        fn link_choice_is_scale_invariant(
            qs in prop::collection::vec(0.0f64..50.0, 6), v in 0.1f64..100.0, c in 0.1f64..10.0
        ) {
            let sc = two_sessions();
            let mut q = SessionNodeMap::zeros(&sc);
            for f in 0..2 {
                for n in 0..2 {
                    q.set(f, n, qs[2 * f + n]);
                }
            }
            let a = dpp_slot_update(&q, &sc, &DppConfig::with_default_caps(&sc, v).unwrap()).unwrap();
            let scaled = q.map(|_, _, x| x * c);
            let b = dpp_slot_update(&scaled, &sc, &DppConfig::with_default_caps(&sc, v * c).unwrap()).unwrap();
            prop_assert_eq!(a.mu, b.mu);
        }
    }
}
