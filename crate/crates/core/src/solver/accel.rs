use serde::Serialize;

use crate::hydraulics::{contraction_threshold, PipeProps};
use crate::scalar::Scalar;

/// Open interval of admissible acceleration parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AccelInterval<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Scalar> AccelInterval<T> {
    pub fn unbounded() -> Self {
        AccelInterval {
            lo: T::neg_infinity(),
            hi: T::infinity(),
        }
    }

    pub fn is_empty(&self) -> bool {
        !(self.lo < self.hi)
    }

    pub fn contains(&self, a: T) -> bool {
        self.lo < a && a < self.hi
    }

    pub fn width(&self) -> T {
        self.hi - self.lo
    }

    pub fn intersect(self, other: Self) -> Self {
        AccelInterval {
            lo: self.lo.max(other.lo),
            hi: self.hi.min(other.hi),
        }
    }
}

/// Values of `a` keeping `q + a·dq` strictly inside `(lo, hi)`.
fn keep_inside<T: Scalar>(q: T, dq: T, lo: T, hi: T) -> AccelInterval<T> {
    if dq == T::zero() {
        return AccelInterval::unbounded();
    }
    let (a, b) = ((lo - q) / dq, (hi - q) / dq);
    if dq > T::zero() {
        AccelInterval { lo: a, hi: b }
    } else {
        AccelInterval { lo: b, hi: a }
    }
}

/// Admissible acceleration parameters for one pipe.
///
/// The accelerated flow `q + a·dq` must keep the pipe's `A_f` entry in `(−1, 0)`,
/// i.e. `|q + a·dq| < θ`, and stay within `[q_min, q_max]`.
pub fn acceleration_bounds<T: Scalar>(
    q_prev: T,
    dq_prev: T,
    p: &PipeProps<T>,
    q_min: T,
    q_max: T,
) -> AccelInterval<T> {
    let theta = contraction_threshold(p);
    keep_inside(q_prev, dq_prev, -theta, theta)
        .intersect(keep_inside(q_prev, dq_prev, q_min, q_max))
}

/// Clamps a proposed parameter into `interval ∩ [0, cap]`, staying strictly inside the
/// interval. `None` when that set is empty.
pub fn clamp_parameter<T: Scalar>(proposal: T, interval: AccelInterval<T>, cap: T) -> Option<T> {
    let lo = interval.lo.max(T::zero());
    let hi = interval.hi.min(cap);
    if interval.is_empty() || !(lo < hi) || interval.hi <= T::zero() {
        return None;
    }
    let margin = T::of(1e-6);
    let lower = if interval.lo < T::zero() {
        T::zero()
    } else {
        lo + margin * (hi - lo)
    };
    let upper = if interval.hi <= cap {
        hi - margin * (hi - lower)
    } else {
        cap
    };
    if !(lower <= upper) {
        return None;
    }
    Some(proposal.max(lower).min(upper))
}

/// Aitken estimate `ρ/(1−ρ)` of the extrapolation factor for a geometric sequence with
/// ratio `ρ = cur/prev`; zero unless `0 < ρ < 1`.
pub fn aitken_factor<T: Scalar>(prev: T, cur: T) -> T {
    if prev == T::zero() {
        return T::zero();
    }
    let rho = cur / prev;
    if rho > T::zero() && rho < T::one() {
        rho / (T::one() - rho)
    } else {
        T::zero()
    }
}

/// Aitken factor from three successive steps, or zero unless the two step ratios agree to
/// within `tol·(1−ρ)`. Links still mixing several modes are left alone this way.
pub fn steady_aitken_factor<T: Scalar>(older: T, prev: T, cur: T, tol: T) -> T {
    if older == T::zero() || prev == T::zero() {
        return T::zero();
    }
    let (r1, r2) = (prev / older, cur / prev);
    if (r1 - r2).abs() <= tol * (T::one() - r2) {
        aitken_factor(prev, cur)
    } else {
        T::zero()
    }
}
