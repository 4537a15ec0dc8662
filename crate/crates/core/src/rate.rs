//! Per-source proximal rate update:
//! maximize U(x) − W·x − α(x − x_prev)² over dom(U).
//!
//! The objective is strictly concave, so its right derivative
//! h(x) = U′(x) − 2αx + 2α·x_prev − W is strictly decreasing and the maximizer
//! is either the root of h or the closed-domain boundary 0 when h(0) < 0.

use crate::error::{Error, Result};
use crate::net::{ConcaveUtility, Domain, Utility, UtilityKind};
use crate::scalar::{lit, Real};

/// Default tolerance on the bracketed root of h.
pub const RATE_TOL: f64 = 1e-10;
/// Left end of the bracket for open-domain utilities.
pub const OPEN_DOMAIN_FLOOR: f64 = 1e-12;
pub const MAX_BRACKET_DOUBLINGS: usize = 64;
const MAX_BISECTIONS: usize = 400;

#[derive(Debug, Clone, PartialEq)]
pub struct RateProblem<T, U = Utility<T>> {
    pub utility: U,
    /// Weight W of the source node (queue units).
    pub price: T,
    pub x_prev: T,
    pub alpha: T,
}

impl<T: Real, U: ConcaveUtility<T>> RateProblem<T, U> {
    pub fn new(utility: U, price: T, x_prev: T, alpha: T) -> Result<Self> {
        if !(alpha > T::zero()) {
            return Err(Error::Contract(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        if !(x_prev >= T::zero()) || !x_prev.is_finite() {
            return Err(Error::Contract(format!(
                "previous rate must be finite and nonnegative, got {x_prev}"
            )));
        }
        if !price.is_finite() {
            return Err(Error::Contract("weight must be finite".into()));
        }
        Ok(RateProblem {
            utility,
            price,
            x_prev,
            alpha,
        })
    }

    /// h(x) = U′(x) − 2αx + 2α·x_prev − W.
    pub fn slope(&self, x: T) -> Result<T> {
        let two = lit::<T>(2.0);
        Ok(
            self.utility.derivative(x)? - two * self.alpha * x + two * self.alpha * self.x_prev
                - self.price,
        )
    }

    /// U(x) − W·x − α(x − x_prev)².
    pub fn objective(&self, x: T) -> Result<T> {
        let d = x - self.x_prev;
        Ok(self.utility.value(x)? - self.price * x - self.alpha * d * d)
    }
}

/// Bisection on h over [domain edge, hi], with hi doubled from
/// max(1, 2·x_prev) until h(hi) < 0.
pub fn solve_rate<T: Real, U: ConcaveUtility<T>>(p: &RateProblem<T, U>, tol: T) -> Result<T> {
    if !(tol > T::zero()) {
        return Err(Error::Contract(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let two = lit::<T>(2.0);
    let mut lo = match p.utility.domain() {
        Domain::Closed => {
            if p.slope(T::zero())? <= T::zero() {
                return Ok(T::zero());
            }
            T::zero()
        }
        Domain::Open => lit(OPEN_DOMAIN_FLOOR),
    };
    let mut hi = T::one().max(two * p.x_prev);
    let mut doublings = 0;
    while p.slope(hi)? >= T::zero() {
        if doublings == MAX_BRACKET_DOUBLINGS {
            return Err(Error::Numeric(format!(
                "rate bracket still has h(hi) >= 0 after {MAX_BRACKET_DOUBLINGS} doublings"
            )));
        }
        lo = hi;
        hi = hi * two;
        doublings += 1;
    }
    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= tol {
            break;
        }
        let mid = (lo + hi) / two;
        if mid <= lo || mid >= hi {
            break;
        }
        if p.slope(mid)? > T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) / two)
}

/// Root of h for U(x) = w·log(x):
/// x̂ = [(2α·x_prev − W) + √((W − 2α·x_prev)² + 8αw)] / (4α),
/// evaluated in the cancellation-free form 2w / (B + √(B² + 8αw)) when
/// B = W − 2α·x_prev is positive.
pub fn closed_form_wlog<T: Real>(p: &RateProblem<T>) -> Result<T> {
    if p.utility.kind != UtilityKind::WeightedLog {
        return Err(Error::Contract(format!(
            "closed form applies to wlog utilities, not {}",
            p.utility.kind.token()
        )));
    }
    let two = lit::<T>(2.0);
    let four = lit::<T>(4.0);
    let eight = lit::<T>(8.0);
    let w = p.utility.weight;
    let b = p.price - two * p.alpha * p.x_prev;
    let root = (b * b + eight * p.alpha * w).sqrt();
    let x = if b > T::zero() {
        two * w / (b + root)
    } else {
        (root - b) / (four * p.alpha)
    };
    if !(x > T::zero()) || !x.is_finite() {
        return Err(Error::Numeric(format!(
            "closed-form rate is not positive: {x}"
        )));
    }
    Ok(x)
}

/// Closed form for wlog, bisection otherwise.
pub fn source_rate<T: Real>(p: &RateProblem<T>) -> Result<T> {
    match p.utility.kind {
        UtilityKind::WeightedLog => closed_form_wlog(p),
        UtilityKind::WeightedLog1p => solve_rate(p, lit(RATE_TOL)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn wlog(w: f64, alpha: f64, price: f64, x_prev: f64) -> RateProblem<f64> {
        RateProblem::new(Utility::weighted_log(w).unwrap(), price, x_prev, alpha).unwrap()
    }

    fn grid_argmax(p: &RateProblem<f64>, hi: f64, step: f64) -> (f64, f64) {
        let start = match p.utility.domain() {
            Domain::Open => step,
            Domain::Closed => 0.0,
        };
        let n = ((hi - start) / step) as usize;
        (0..=n)
            .map(|i| start + i as f64 * step)
            .map(|x| (x, p.objective(x).unwrap()))
            .fold((0.0, f64::NEG_INFINITY), |best, c| {
                if c.1 > best.1 {
                    c
                } else {
                    best
                }
            })
    }

    #[test]
    fn bisection_examples() {
        let x = solve_rate(&wlog(1.0, 0.5, 0.0, 0.0), 1e-10).unwrap();
        assert!((x - 1.0).abs() < 1e-9);
        let p = wlog(1.0, 1.0, 1.0, 1.0);
        let x = solve_rate(&p, 1e-10).unwrap();
        assert!((x - 1.0).abs() < 1e-9);
        let (gx, _) = grid_argmax(&p, 3.0, 1e-4);
        assert!((gx - 1.0).abs() <= 1e-4);

        let p = RateProblem::new(Utility::weighted_log1p(1.0).unwrap(), 2.0, 0.0, 1.0).unwrap();
        assert!(p.slope(0.0).unwrap() < 0.0);
        assert_eq!(solve_rate(&p, 1e-10).unwrap(), 0.0);
        let (gx, _) = grid_argmax(&p, 3.0, 1e-4);
        assert_eq!(gx, 0.0);
    }

    #[test]
    fn closed_form_examples() {
        let x = closed_form_wlog(&wlog(1.0, 1.0, 0.0, 0.0)).unwrap();
        assert!((x - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(wlog(1.0, 1.0, 0.0, 0.0).slope(x).unwrap().abs() < 1e-12);
        let x = closed_form_wlog(&wlog(1.0, 1.0, 1.0, 1.0)).unwrap();
        assert!((x - 1.0).abs() < 1e-15);
        let x = closed_form_wlog(&wlog(2.0, 1.0, 0.0, 0.0)).unwrap();
        assert!((x - 1.0).abs() < 1e-15);
    }

    #[test]
    fn contract_errors() {
        let p = RateProblem::new(Utility::weighted_log1p(1.0).unwrap(), 0.0, 0.0, 1.0).unwrap();
        assert!(closed_form_wlog(&p).is_err());
        assert!(solve_rate(&p, 0.0).is_err());
        assert!(RateProblem::new(Utility::weighted_log(1.0).unwrap(), 0.0, 0.0, 0.0).is_err());
        assert!(RateProblem::new(Utility::weighted_log(1.0).unwrap(), 0.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn large_price_stays_accurate() {
        let p = wlog(0.1, 0.5, 1e6, 0.0);
        let x = closed_form_wlog(&p).unwrap();
        assert!(x > 0.0);
        assert!((p.slope(x).unwrap() / 1e6).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn closed_form_agrees_with_bisection(
            w in 0.1f64..5.0, alpha in 0.5f64..10.0, price in -10.0f64..10.0, x_prev in 0.0f64..5.0
        ) {
            let p = wlog(w, alpha, price, x_prev);
            let a = closed_form_wlog(&p).unwrap();
            let b = solve_rate(&p, 1e-10).unwrap();
            prop_assert!((a - b).abs() <= 1e-8);
            prop_assert!(p.slope(a).unwrap().abs() <= 1e-9);
        }

        #[test]
        fn strong_concavity_margin(
            w in 0.1f64..5.0, alpha in 0.5f64..10.0, price in -10.0f64..10.0,
            x_prev in 0.0f64..5.0, x in 1e-3f64..20.0
        ) {
            let p = wlog(w, alpha, price, x_prev);
            let best = closed_form_wlog(&p).unwrap();
            let lhs = p.objective(best).unwrap();
            let rhs = p.objective(x).unwrap() + alpha * (best - x).powi(2);
            prop_assert!(lhs >= rhs - 1e-9 * (1.0 + rhs.abs()));
        }

        #[test]
        fn nonincreasing_in_price(
            w in 0.1f64..5.0, alpha in 0.5f64..10.0, x_prev in 0.0f64..5.0,
            mut prices in prop::collection::vec(-10.0f64..10.0, 2..20)
        ) {
            prices.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let xs: Vec<f64> = prices
                .iter()
                .map(|&pr| closed_form_wlog(&wlog(w, alpha, pr, x_prev)).unwrap())
                .collect();
            for pair in xs.windows(2) {
                prop_assert!(pair[1] <= pair[0] + 1e-15);
            }
        }
    }
}
