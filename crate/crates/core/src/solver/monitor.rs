use serde::Serialize;

use crate::linalg::Factorization;
use crate::scalar::{norm2, Scalar};

pub const POWER_ITERATIONS: usize = 200;

/// Estimate of `‖A_inv22·A_f‖₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContractionEstimate<T> {
    pub norm: T,
    pub iterations: usize,
    /// `false` when power iteration did not settle within the iteration budget.
    pub converged: bool,
}

/// Estimates the spectral norm of the pipe-flow iteration map by power iteration on `MᵀM`.
///
/// `A_inv22` is applied through the factorization: a vector is placed in the rows of
/// the pipe-like links, the system is solved, and their flow entries are read back.
/// `flow_offset` is the index of the first flow variable; `links` index the pipe-like links.
pub fn check_contraction<T: Scalar>(
    fact: &Factorization<T>,
    dim: usize,
    flow_offset: usize,
    links: &[usize],
    a_f: &[T],
) -> ContractionEstimate<T> {
    assert_eq!(links.len(), a_f.len());
    let m = links.len();
    if m == 0 || a_f.iter().all(|&x| x == T::zero()) {
        return ContractionEstimate {
            norm: T::zero(),
            iterations: 0,
            converged: true,
        };
    }
    let apply = |v: &[T]| -> Vec<T> {
        let mut rhs = vec![T::zero(); dim];
        for (k, &l) in links.iter().enumerate() {
            rhs[flow_offset + l] = a_f[k] * v[k];
        }
        let y = fact.solve(&rhs);
        links.iter().map(|&l| y[flow_offset + l]).collect()
    };
    let apply_t = |u: &[T]| -> Vec<T> {
        let mut z = vec![T::zero(); dim];
        for (k, &l) in links.iter().enumerate() {
            z[flow_offset + l] = u[k];
        }
        let w = fact.solve_transpose(&z);
        links
            .iter()
            .enumerate()
            .map(|(k, &l)| a_f[k] * w[flow_offset + l])
            .collect()
    };
    let mut v: Vec<T> = (0..m)
        .map(|k| T::one() + T::of(0.1) * T::of((k % 7) as f64))
        .collect();
    let n0 = norm2(&v);
    v.iter_mut().for_each(|x| *x /= n0);
    let mut est = T::zero();
    for it in 1..=POWER_ITERATIONS {
        let w = apply_t(&apply(&v));
        let lambda = norm2(&w);
        if lambda == T::zero() {
            return ContractionEstimate {
                norm: T::zero(),
                iterations: it,
                converged: true,
            };
        }
        let next = lambda.sqrt();
        v = w.into_iter().map(|x| x / lambda).collect();
        let settled = (next - est).abs() <= T::of(1e-10).max(T::epsilon() * T::of(64.0)) * next;
        est = next;
        if settled {
            return ContractionEstimate {
                norm: est,
                iterations: it,
                converged: true,
            };
        }
    }
    ContractionEstimate {
        norm: est,
        iterations: POWER_ITERATIONS,
        converged: false,
    }
}
