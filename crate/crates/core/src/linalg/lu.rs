//! Dense and sparse LU factorizations with transpose solves.

use crate::linalg::CsrMatrix;
use crate::scalar::Scalar;

type SparseRow<T> = Vec<(usize, T)>;

/// Systems smaller than this use the dense factorization.
pub const DENSE_CUTOFF: usize = 200;

/// Column threshold for partial pivoting in the sparse factorization.
const PIVOT_THRESHOLD: f64 = 0.1;
/// Stability threshold accepted when replaying a stored pivot sequence.
const REPLAY_THRESHOLD: f64 = 1e-3;
/// Number of sparsest columns examined per Markowitz step.
const MARKOWITZ_COLUMNS: usize = 4;

/// Factorization failure: the rows that could not be eliminated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SingularRows(pub Vec<usize>);

fn zero_tolerance<T: Scalar>(max_abs: T) -> T {
    T::epsilon() * T::of(100.0) * max_abs.max(T::one())
}

/// Row-pivoted dense LU (`P·A = L·U`).
#[derive(Debug, Clone)]
pub struct DenseLu<T> {
    n: usize,
    lu: Vec<T>,
    perm: Vec<usize>,
}

impl<T: Scalar> DenseLu<T> {
    pub fn factor(a: &CsrMatrix<T>) -> Result<Self, SingularRows> {
        assert_eq!(a.nrows(), a.ncols());
        let n = a.nrows();
        let mut lu = vec![T::zero(); n * n];
        for (i, j, v) in a.triplets() {
            lu[i * n + j] = v;
        }
        let tol = zero_tolerance(a.max_abs());
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pmax) =
                (k..n)
                    .map(|i| (i, lu[i * n + k].abs()))
                    .fold(
                        (k, -T::one()),
                        |best, c| if c.1 > best.1 { c } else { best },
                    );
            if pmax <= tol {
                // Let the sparse elimination name the dependent rows.
                return Err(SparseLu::factor(a)
                    .err()
                    .unwrap_or(SingularRows(vec![perm[k]])));
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let d = lu[k * n + k];
            for i in k + 1..n {
                let f = lu[i * n + k] / d;
                if f == T::zero() {
                    continue;
                }
                lu[i * n + k] = f;
                for j in k + 1..n {
                    let u = lu[k * n + j];
                    lu[i * n + j] -= f * u;
                }
            }
        }
        Ok(DenseLu { n, lu, perm })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s / self.lu[i * n + i];
        }
        x
    }

    /// Solves `Aᵀ·y = z`.
    pub fn solve_transpose(&self, z: &[T]) -> Vec<T> {
        let n = self.n;
        let mut w = z.to_vec();
        // Uᵀ·w = z
        for i in 0..n {
            let mut s = w[i];
            for j in 0..i {
                s -= self.lu[j * n + i] * w[j];
            }
            w[i] = s / self.lu[i * n + i];
        }
        // Lᵀ·v = w
        for i in (0..n).rev() {
            let mut s = w[i];
            for j in i + 1..n {
                s -= self.lu[j * n + i] * w[j];
            }
            w[i] = s;
        }
        let mut y = vec![T::zero(); n];
        for (k, &p) in self.perm.iter().enumerate() {
            y[p] = w[k];
        }
        y
    }
}

/// Pivot sequence of a sparse factorization, reusable for numeric refactorization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PivotOrder(pub Vec<(usize, usize)>);

/// Right-looking sparse LU with Markowitz pivot selection and threshold partial pivoting.
#[derive(Debug, Clone)]
pub struct SparseLu<T> {
    n: usize,
    pivots: Vec<(usize, usize)>,
    lower: Vec<Vec<(usize, T)>>,
    upper: Vec<Vec<(usize, T)>>,
    diag: Vec<T>,
}

struct Active<T> {
    rows: Vec<Vec<(usize, T)>>,
    cols: Vec<Vec<usize>>,
    row_live: Vec<bool>,
    col_live: Vec<bool>,
    col_count: Vec<usize>,
}

impl<T: Scalar> Active<T> {
    fn new(a: &CsrMatrix<T>) -> Self {
        let n = a.nrows();
        let mut rows = vec![Vec::new(); n];
        let mut cols = vec![Vec::new(); n];
        let mut col_count = vec![0; n];
        for (i, j, v) in a.triplets() {
            rows[i].push((j, v));
            cols[j].push(i);
            col_count[j] += 1;
        }
        Active {
            rows,
            cols,
            row_live: vec![true; n],
            col_live: vec![true; n],
            col_count,
        }
    }

    fn value(&self, r: usize, c: usize) -> Option<T> {
        self.rows[r].iter().find(|e| e.0 == c).map(|e| e.1)
    }

    fn column_entries(&self, c: usize) -> Vec<(usize, T)> {
        self.cols[c]
            .iter()
            .filter(|&&r| self.row_live[r])
            .filter_map(|&r| self.value(r, c).map(|v| (r, v)))
            .collect()
    }

    /// Markowitz choice over the sparsest live columns, widening to every column if needed.
    fn choose(&self, tol: T) -> Option<(usize, usize)> {
        let mut order: Vec<usize> = (0..self.rows.len()).filter(|&c| self.col_live[c]).collect();
        order.sort_by_key(|&c| self.col_count[c]);
        let mut best: Option<(usize, usize, usize, T)> = None;
        for (examined, &c) in order.iter().enumerate() {
            if examined >= MARKOWITZ_COLUMNS && best.is_some() {
                break;
            }
            let entries = self.column_entries(c);
            let cmax = entries.iter().fold(T::zero(), |m, e| m.max(e.1.abs()));
            if cmax <= tol {
                continue;
            }
            let cc = self.col_count[c].saturating_sub(1);
            for &(r, v) in &entries {
                if v.abs() < T::of(PIVOT_THRESHOLD) * cmax {
                    continue;
                }
                let cost = (self.rows[r].len() - 1) * cc;
                let better = match best {
                    None => true,
                    Some((_, _, bc, bv)) => cost < bc || (cost == bc && v.abs() > bv),
                };
                if better {
                    best = Some((r, c, cost, v.abs()));
                }
            }
        }
        best.map(|(r, c, _, _)| (r, c))
    }

    fn eliminate(
        &mut self,
        r: usize,
        c: usize,
        pos: &mut [usize],
    ) -> (T, SparseRow<T>, SparseRow<T>) {
        let prow = std::mem::take(&mut self.rows[r]);
        let p = prow.iter().find(|e| e.0 == c).map(|e| e.1).unwrap();
        let upper: Vec<(usize, T)> = prow.into_iter().filter(|e| e.0 != c).collect();
        self.row_live[r] = false;
        self.col_live[c] = false;
        self.col_count[c] = 0;
        for &(j, _) in &upper {
            self.col_count[j] -= 1;
        }
        let mut lower = Vec::new();
        let targets: Vec<usize> = std::mem::take(&mut self.cols[c])
            .into_iter()
            .filter(|&i| self.row_live[i])
            .collect();
        for i in targets {
            let row = &mut self.rows[i];
            let Some(k) = row.iter().position(|e| e.0 == c) else {
                continue;
            };
            let aic = row.swap_remove(k).1;
            let l = aic / p;
            lower.push((i, l));
            for (idx, e) in row.iter().enumerate() {
                pos[e.0] = idx;
            }
            for &(j, u) in &upper {
                if pos[j] != usize::MAX {
                    row[pos[j]].1 -= l * u;
                } else {
                    row.push((j, -(l * u)));
                    self.cols[j].push(i);
                    self.col_count[j] += 1;
                }
            }
            for e in row.iter() {
                pos[e.0] = usize::MAX;
            }
        }
        (p, lower, upper)
    }
}

impl<T: Scalar> SparseLu<T> {
    pub fn factor(a: &CsrMatrix<T>) -> Result<Self, SingularRows> {
        assert_eq!(a.nrows(), a.ncols());
        let n = a.nrows();
        let tol = zero_tolerance(a.max_abs());
        let mut act = Active::new(a);
        let mut pos = vec![usize::MAX; n];
        let mut lu = SparseLu::empty(n);
        for _ in 0..n {
            let Some((r, c)) = act.choose(tol) else {
                let rows = (0..n).filter(|&i| act.row_live[i]).collect();
                return Err(SingularRows(rows));
            };
            let (p, lower, upper) = act.eliminate(r, c, &mut pos);
            lu.push(r, c, p, lower, upper);
        }
        Ok(lu)
    }

    /// Numeric refactorization along a stored pivot sequence; `None` when a pivot became unstable.
    pub fn refactor(a: &CsrMatrix<T>, order: &PivotOrder) -> Option<Self> {
        let n = a.nrows();
        if order.0.len() != n || a.ncols() != n {
            return None;
        }
        let tol = zero_tolerance(a.max_abs());
        let mut act = Active::new(a);
        let mut pos = vec![usize::MAX; n];
        let mut lu = SparseLu::empty(n);
        for &(r, c) in &order.0 {
            let v = act.value(r, c)?;
            let cmax = act
                .column_entries(c)
                .iter()
                .fold(T::zero(), |m, e| m.max(e.1.abs()));
            if v.abs() <= tol || v.abs() < T::of(REPLAY_THRESHOLD) * cmax {
                return None;
            }
            let (p, lower, upper) = act.eliminate(r, c, &mut pos);
            lu.push(r, c, p, lower, upper);
        }
        Some(lu)
    }

    fn empty(n: usize) -> Self {
        SparseLu {
            n,
            pivots: Vec::with_capacity(n),
            lower: Vec::with_capacity(n),
            upper: Vec::with_capacity(n),
            diag: Vec::with_capacity(n),
        }
    }

    fn push(&mut self, r: usize, c: usize, p: T, lower: Vec<(usize, T)>, upper: Vec<(usize, T)>) {
        self.pivots.push((r, c));
        self.diag.push(p);
        self.lower.push(lower);
        self.upper.push(upper);
    }

    pub fn pivot_order(&self) -> PivotOrder {
        PivotOrder(self.pivots.clone())
    }

    /// Stored entries in both factors.
    pub fn fill(&self) -> usize {
        self.n
            + self.lower.iter().map(Vec::len).sum::<usize>()
            + self.upper.iter().map(Vec::len).sum::<usize>()
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut w = b.to_vec();
        for (k, &(r, _)) in self.pivots.iter().enumerate() {
            let wr = w[r];
            if wr != T::zero() {
                for &(i, l) in &self.lower[k] {
                    w[i] -= l * wr;
                }
            }
        }
        let mut x = vec![T::zero(); self.n];
        for k in (0..self.n).rev() {
            let (r, c) = self.pivots[k];
            let mut s = w[r];
            for &(j, u) in &self.upper[k] {
                s -= u * x[j];
            }
            x[c] = s / self.diag[k];
        }
        x
    }

    /// Solves `Aᵀ·y = z`.
    pub fn solve_transpose(&self, z: &[T]) -> Vec<T> {
        let mut zz = z.to_vec();
        let mut w = vec![T::zero(); self.n];
        for k in 0..self.n {
            let (r, c) = self.pivots[k];
            let wr = zz[c] / self.diag[k];
            w[r] = wr;
            for &(j, u) in &self.upper[k] {
                zz[j] -= u * wr;
            }
        }
        for k in (0..self.n).rev() {
            let r = self.pivots[k].0;
            let mut s = w[r];
            for &(i, l) in &self.lower[k] {
                s -= l * w[i];
            }
            w[r] = s;
        }
        w
    }
}

/// Factorization chosen by problem size.
#[derive(Debug, Clone)]
pub enum Factorization<T> {
    Dense(DenseLu<T>),
    Sparse(SparseLu<T>),
}

impl<T: Scalar> Factorization<T> {
    pub fn factor(a: &CsrMatrix<T>) -> Result<Self, SingularRows> {
        if a.nrows() < DENSE_CUTOFF {
            DenseLu::factor(a).map(Factorization::Dense)
        } else {
            SparseLu::factor(a).map(Factorization::Sparse)
        }
    }

    /// Refactorizes reusing the pivot sequence of `previous` when possible.
    pub fn refactor(a: &CsrMatrix<T>, previous: Option<&Self>) -> Result<Self, SingularRows> {
        if let Some(Factorization::Sparse(prev)) = previous {
            if let Some(lu) = SparseLu::refactor(a, &prev.pivot_order()) {
                return Ok(Factorization::Sparse(lu));
            }
        }
        Self::factor(a)
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        match self {
            Factorization::Dense(f) => f.solve(b),
            Factorization::Sparse(f) => f.solve(b),
        }
    }

    pub fn solve_transpose(&self, z: &[T]) -> Vec<T> {
        match self {
            Factorization::Dense(f) => f.solve_transpose(z),
            Factorization::Sparse(f) => f.solve_transpose(z),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::norm_inf;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sparse(n: usize, seed: u64) -> CsrMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, rng.gen_range(1.0..4.0)));
            for _ in 0..3 {
                let j = rng.gen_range(0..n);
                t.push((i, j, rng.gen_range(-1.0..1.0)));
            }
        }
        CsrMatrix::from_triplets(n, n, &t)
    }

    fn residual(a: &CsrMatrix<f64>, x: &[f64], b: &[f64]) -> f64 {
        let ax = a.mul_vec(x);
        norm_inf(&ax.iter().zip(b).map(|(p, q)| p - q).collect::<Vec<_>>())
    }

    #[test]
    fn identity_solves_trivially() {
        let a = CsrMatrix::<f64>::identity(3);
        let f = Factorization::factor(&a).unwrap();
        assert_eq!(f.solve(&[1.0, 0.0, 0.0]), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn needs_row_exchange() {
        let a = CsrMatrix::from_dense(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let d = DenseLu::factor(&a).unwrap();
        let s = SparseLu::factor(&a).unwrap();
        assert_eq!(d.solve(&[2.0, 3.0]), vec![3.0, 2.0]);
        assert_eq!(s.solve(&[2.0, 3.0]), vec![3.0, 2.0]);
    }

    #[test]
    fn singular_rows_are_reported() {
        let a = CsrMatrix::from_dense(&[
            vec![1.0, 1.0, 0.0],
            vec![2.0, 2.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ]);
        let err = SparseLu::factor(&a).unwrap_err();
        assert_eq!(err.0.len(), 1);
        assert!(DenseLu::factor(&a).is_err());
    }

    #[test]
    fn refactor_reuses_order() {
        let a = random_sparse(60, 3);
        let lu = SparseLu::factor(&a).unwrap();
        let again = SparseLu::refactor(&a, &lu.pivot_order()).unwrap();
        let b: Vec<f64> = (0..60).map(|i| i as f64).collect();
        assert_eq!(lu.solve(&b), again.solve(&b));
    }

    proptest! {
        #[test]
        fn sparse_and_dense_agree(seed in 0u64..500, n in 2usize..40) {
            let a = random_sparse(n, seed);
            let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
            if let (Ok(d), Ok(s)) = (DenseLu::factor(&a), SparseLu::factor(&a)) {
                let xd = d.solve(&b);
                let xs = s.solve(&b);
                let scale = 1.0 + norm_inf(&xd);
                prop_assert!(residual(&a, &xd, &b) <= 1e-9 * scale);
                prop_assert!(residual(&a, &xs, &b) <= 1e-9 * scale);
                let at = a.transpose();
                prop_assert!(residual(&at, &d.solve_transpose(&b), &b) <= 1e-9 * scale);
                prop_assert!(residual(&at, &s.solve_transpose(&b), &b) <= 1e-9 * scale);
            }
        }
    }
}
