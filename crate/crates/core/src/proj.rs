//! Euclidean projection onto the capped simplex {z ≥ 0, Σ z ≤ b}.
//!
//! The minimizer of ½‖z − a‖² over that set is z_k = max{0, a_k − θ} where the
//! water level θ ≥ 0 is zero when Σ max{0, a_k} ≤ b and otherwise solves
//! Σ max{0, a_k − θ} = b.

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// Default tolerance on |Σ z − b| for [`project_bisect`].
pub const BISECT_TOL: f64 = 1e-10;
pub const BISECT_MAX_ITERS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionInstance<T> {
    a: Vec<T>,
    b: T,
}

impl<T: Real> ProjectionInstance<T> {
    pub fn new(a: Vec<T>, b: T) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::Contract(
                "projection needs at least one coordinate".into(),
            ));
        }
        if !(b >= T::zero()) || !b.is_finite() {
            return Err(Error::Contract(format!(
                "budget must be finite and nonnegative, got {b}"
            )));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::Contract(
                "projection point has a non-finite entry".into(),
            ));
        }
        Ok(ProjectionInstance { a, b })
    }

    pub fn a(&self) -> &[T] {
        &self.a
    }

    pub fn b(&self) -> T {
        self.b
    }

    fn positive_mass(&self) -> T {
        self.a.iter().map(|&v| v.max(T::zero())).sum()
    }

    fn threshold(&self, theta: T) -> Vec<T> {
        self.a.iter().map(|&v| (v - theta).max(T::zero())).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection<T> {
    pub z: Vec<T>,
    pub theta: T,
}

/// Sort-based solver, O(K log K).
///
/// Coordinates are visited in decreasing order of a_k, ties broken by the
/// original index. At step k the candidate θ = (S_k − b)/k is accepted when
/// θ ≥ 0, a_π(k) − θ > 0 and a_π(k+1) − θ ≤ 0, with a_π(K+1) taken as −∞.
pub fn project_sorted<T: Real>(inst: &ProjectionInstance<T>) -> Projection<T> {
    let b = inst.b;
    if inst.positive_mass() <= b {
        return Projection {
            z: inst.threshold(T::zero()),
            theta: T::zero(),
        };
    }
    let mut order: Vec<usize> = (0..inst.a.len()).collect();
    order.sort_by(|&i, &j| {
        inst.a[j]
            .partial_cmp(&inst.a[i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });

    let mut partial = T::zero();
    let mut theta = None;
    // Largest k whose candidate keeps a_π(k) strictly above the level; this is
    // the answer whenever rounding defeats the exact acceptance test.
    let mut fallback = None;
    for (k, &idx) in order.iter().enumerate() {
        let count = T::from_usize(k + 1).expect("count fits scalar");
        partial = partial + inst.a[idx];
        let candidate = (partial - b) / count;
        let next = order
            .get(k + 1)
            .map(|&j| inst.a[j])
            .unwrap_or_else(T::neg_infinity);
        if inst.a[idx] - candidate > T::zero() {
            fallback = Some(candidate);
            if candidate >= T::zero() && next - candidate <= T::zero() {
                theta = Some(candidate);
                break;
            }
        }
    }
    // With b = 0 no prefix leaves a_π(k) strictly above its own mean; the
    // level is then the largest entry and everything is clipped to zero.
    let theta = theta
        .or(fallback)
        .unwrap_or(inst.a[order[0]])
        .max(T::zero());
    Projection {
        z: inst.threshold(theta),
        theta,
    }
}

/// Bisection on θ over [0, max_k a_k] until |Σ max{0, a_k − θ} − b| ≤ tol.
pub fn project_bisect<T: Real>(inst: &ProjectionInstance<T>, tol: T) -> Result<Projection<T>> {
    if !(tol > T::zero()) {
        return Err(Error::Contract(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let b = inst.b;
    if inst.positive_mass() <= b {
        return Ok(Projection {
            z: inst.threshold(T::zero()),
            theta: T::zero(),
        });
    }
    let mass = |theta: T| -> T { inst.a.iter().map(|&v| (v - theta).max(T::zero())).sum() };
    let mut lo = T::zero();
    let mut hi = inst.a.iter().copied().fold(T::neg_infinity(), T::max);
    let two = lit::<T>(2.0);
    for _ in 0..BISECT_MAX_ITERS {
        let mid = (lo + hi) / two;
        let excess = mass(mid) - b;
        if excess.abs() <= tol {
            return Ok(Projection {
                z: inst.threshold(mid),
                theta: mid,
            });
        }
        if excess > T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Numeric(format!(
        "projection bisection did not reach tolerance {tol} in {BISECT_MAX_ITERS} iterations"
    )))
}

/// Largest violation of the KKT system for (z, θ):
/// primal feasibility (Σz ≤ b, z ≥ 0), dual feasibility (θ ≥ 0),
/// complementary slackness θ(Σz − b) = 0, and stationarity
/// z_k − a_k + θ = ν_k with ν_k ≥ 0 and ν_k z_k = 0.
pub fn kkt_residual<T: Real>(inst: &ProjectionInstance<T>, z: &[T], theta: T) -> T {
    assert_eq!(z.len(), inst.a.len(), "dimension mismatch");
    let zero = T::zero();
    let total: T = z.iter().copied().sum();
    let mut worst = (total - inst.b).max(zero);
    worst = worst.max(-theta);
    worst = worst.max((theta * (total - inst.b)).abs());
    for (&zk, &ak) in z.iter().zip(&inst.a) {
        worst = worst.max(-zk);
        let nu = zk - ak + theta;
        let stationarity = if zk > zero { nu.abs() } else { (-nu).max(zero) };
        worst = worst.max(stationarity);
    }
    worst
}
