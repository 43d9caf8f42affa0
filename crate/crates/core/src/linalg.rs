//! Sparse and dense linear algebra shared by the form modules.
//!
//! Symmetric positive definite systems go through [`SpdSolver`]: a supernodal
//! sparse Cholesky factorization below [`DIRECT_SOLVE_LIMIT`] unknowns and
//! Jacobi-preconditioned conjugate gradients above it. Dense eigenproblems use
//! `nalgebra`.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::LltError;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Above this many unknowns the resolvent solves switch to conjugate gradients.
pub const DIRECT_SOLVE_LIMIT: usize = 50_000;
/// Largest free-vertex count for which dense eigendecompositions are attempted.
pub const DENSE_EIGEN_LIMIT: usize = 2000;

/// Symmetric sparse matrix in compressed-row storage (both triangles stored).
#[derive(Clone, Debug, PartialEq)]
pub struct SymCsr {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl SymCsr {
    /// Assembles from (row, col, value) entries; duplicates are summed. Each
    /// off-diagonal entry must be supplied for both orientations by the caller.
    /// The diagonal is always present in the pattern, possibly as an explicit zero.
    pub fn from_entries(n: usize, mut entries: Vec<(usize, usize, f64)>) -> Self {
        entries.extend((0..n).map(|i| (i, i, 0.0)));
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut vals: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            if last == Some((r, c)) {
                *vals.last_mut().expect("entry present") += v;
            } else {
                col_idx.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        SymCsr {
            n,
            row_ptr,
            col_idx,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.vals[range].iter().copied())
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).find(|&(j, _)| j == i).map_or(0.0, |(_, v)| v))
            .collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    /// xᵀ A y.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        (0..self.n)
            .map(|i| x[i] * self.row(i).map(|(j, v)| v * y[j]).sum::<f64>())
            .sum()
    }

    /// A + diag(shift).
    pub fn add_diagonal(&self, shift: &[f64]) -> SymCsr {
        let mut out = self.clone();
        for i in 0..self.n {
            for k in out.row_ptr[i]..out.row_ptr[i + 1] {
                if out.col_idx[k] == i {
                    out.vals[k] += shift[i];
                }
            }
        }
        out
    }

    /// Principal submatrix on `keep` (in the given order).
    pub fn principal_submatrix(&self, keep: &[usize]) -> SymCsr {
        let mut pos = vec![usize::MAX; self.n];
        for (k, &i) in keep.iter().enumerate() {
            pos[i] = k;
        }
        let mut entries = Vec::new();
        for (k, &i) in keep.iter().enumerate() {
            for (j, v) in self.row(i) {
                if pos[j] != usize::MAX {
                    entries.push((k, pos[j], v));
                }
            }
        }
        SymCsr::from_entries(keep.len(), entries)
    }

    /// Maximum absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let triplets: Vec<Triplet<usize, usize, f64>> = (0..self.n)
            .flat_map(|i| self.row(i).map(move |(j, v)| Triplet::new(i, j, v)))
            .collect();
        SparseColMat::try_new_from_triplets(self.n, self.n, &triplets)
            .map_err(|e| Error::SolverFailure(format!("sparse assembly: {e:?}")))
    }

    /// Symbolic Cholesky analysis, reusable for every matrix with this pattern.
    pub fn symbolic_cholesky(&self) -> Result<SymbolicLlt<usize>> {
        let m = self.to_faer()?;
        SymbolicLlt::try_new(m.symbolic(), Side::Lower)
            .map_err(|e| Error::SolverFailure(format!("symbolic analysis: {e:?}")))
    }
}

/// Outcome of attempting a Cholesky factorization.
pub enum Factorization {
    Ok(SpdSolver),
    /// The matrix is not (numerically) positive definite.
    NotPositiveDefinite,
}

/// Solver for a fixed symmetric positive definite matrix.
pub enum SpdSolver {
    Direct(Box<Llt<usize, f64>>),
    Iterative {
        matrix: SymCsr,
        inv_diag: Vec<f64>,
        tol: f64,
        max_iter: usize,
    },
}

impl std::fmt::Debug for SpdSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SpdSolver::Direct(_) => f.write_str("SpdSolver::Direct"),
            SpdSolver::Iterative { matrix, .. } => {
                write!(f, "SpdSolver::Iterative(n = {})", matrix.dim())
            }
        }
    }
}

impl SpdSolver {
    /// Factorizes `a`, choosing the direct or iterative route by size.
    pub fn new(a: &SymCsr, symbolic: Option<&SymbolicLlt<usize>>, tol: f64) -> Result<Self> {
        if a.dim() > DIRECT_SOLVE_LIMIT {
            return Self::iterative(a, tol);
        }
        match Self::cholesky(a, symbolic)? {
            Factorization::Ok(s) => Ok(s),
            Factorization::NotPositiveDefinite => Err(Error::SolverFailure(
                "matrix is not positive definite".into(),
            )),
        }
    }

    pub fn iterative(a: &SymCsr, tol: f64) -> Result<Self> {
        let diag = a.diagonal();
        if diag.iter().any(|&d| d <= 0.0) {
            return Err(Error::SolverFailure(
                "non-positive diagonal in conjugate-gradient system".into(),
            ));
        }
        Ok(SpdSolver::Iterative {
            matrix: a.clone(),
            inv_diag: diag.iter().map(|d| 1.0 / d).collect(),
            tol,
            max_iter: 20 * a.dim() + 100,
        })
    }

    /// Sparse Cholesky; reports indefiniteness instead of failing.
    pub fn cholesky(a: &SymCsr, symbolic: Option<&SymbolicLlt<usize>>) -> Result<Factorization> {
        let m = a.to_faer()?;
        let symbolic = match symbolic {
            Some(s) => s.clone(),
            None => SymbolicLlt::try_new(m.symbolic(), Side::Lower)
                .map_err(|e| Error::SolverFailure(format!("symbolic analysis: {e:?}")))?,
        };
        match Llt::try_new_with_symbolic(symbolic, m.as_ref(), Side::Lower) {
            Ok(llt) => Ok(Factorization::Ok(SpdSolver::Direct(Box::new(llt)))),
            Err(LltError::Numeric(_)) => Ok(Factorization::NotPositiveDefinite),
            Err(e) => Err(Error::SolverFailure(format!("cholesky: {e:?}"))),
        }
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        match self {
            SpdSolver::Direct(llt) => {
                let rhs = Mat::from_fn(b.len(), 1, |i, _| b[i]);
                let x = llt.solve(&rhs);
                let out: Vec<f64> = (0..b.len()).map(|i| x[(i, 0)]).collect();
                if out.iter().all(|v| v.is_finite()) {
                    Ok(out)
                } else {
                    Err(Error::SolverFailure("non-finite solution".into()))
                }
            }
            SpdSolver::Iterative {
                matrix,
                inv_diag,
                tol,
                max_iter,
            } => pcg(matrix, inv_diag, b, *tol, *max_iter),
        }
    }
}

/// Jacobi-preconditioned conjugate gradients; converges when ‖r‖ ≤ tol·‖b‖.
pub fn pcg(a: &SymCsr, inv_diag: &[f64], b: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = b.len();
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for _ in 0..max_iter {
        a.matvec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::SolverFailure(
                "conjugate gradients met a non-positive curvature".into(),
            ));
        }
        let step = rz / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        if norm2(&r) <= tol * bnorm {
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::SolverFailure(format!(
        "conjugate gradients did not reach {tol:e} in {max_iter} iterations"
    )))
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

pub fn sup_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Largest eigenvalue and eigenvector of a dense symmetric matrix.
pub fn top_eigenpair(m: DMatrix<f64>) -> (f64, DVector<f64>) {
    let eig = SymmetricEigen::new(m);
    let (k, &lambda) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty matrix");
    (lambda, eig.eigenvectors.column(k).into_owned())
}

/// Generalized symmetric eigenproblem `A v = λ B v` with `B` positive definite.
///
/// Returns eigenvalues in ascending order and `B`-orthonormal eigenvectors as
/// columns. `None` when `B` is not positive definite.
pub fn pencil_eigen(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Option<(Vec<f64>, DMatrix<f64>)> {
    let chol = b.clone().cholesky()?;
    let l = chol.l();
    let linv_a = l.solve_lower_triangular(a)?;
    let c = l.solve_lower_triangular(&linv_a.transpose())?;
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut y = DMatrix::zeros(a.nrows(), order.len());
    for (k, &i) in order.iter().enumerate() {
        y.set_column(k, &eig.eigenvectors.column(i));
    }
    let vecs = l.transpose().solve_upper_triangular(&y)?;
    Some((values, vecs))
}

/// Action of `exp(-t S)` on `v` for a symmetric positive semidefinite operator
/// given by `apply`, via Lanczos with full reorthogonalization.
///
/// Long times are split into substeps so each Krylov projection sees a
/// moderate spectral spread.
pub fn expm_neg_action<F>(apply: F, v: &[f64], t: f64, norm_bound: f64, tol: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let steps = ((t * norm_bound) / 40.0).ceil().max(1.0) as usize;
    let dt = t / steps as f64;
    let mut x = v.to_vec();
    for _ in 0..steps {
        x = lanczos_expm_step(&apply, &x, dt, tol)?;
    }
    Ok(x)
}

fn lanczos_expm_step<F>(apply: &F, v: &[f64], t: f64, tol: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = v.len();
    let beta0 = norm2(v);
    if beta0 == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let max_m = n.min(250);
    let mut basis: Vec<Vec<f64>> = vec![v.iter().map(|x| x / beta0).collect()];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut previous: Option<Vec<f64>> = None;
    loop {
        let k = basis.len() - 1;
        let mut w = apply(&basis[k]);
        let a = dot(&w, &basis[k]);
        alphas.push(a);
        for _ in 0..2 {
            for q in &basis {
                let c = dot(&w, q);
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= c * qi;
                }
            }
        }
        let b = norm2(&w);
        let m = alphas.len();
        let breakdown = b <= 1e-14 * (a.abs() + betas.last().copied().unwrap_or(0.0)).max(1e-300);
        if m % 4 == 0 || breakdown || m == max_m {
            let coeffs = tridiagonal_expm_first_column(&alphas, &betas, t);
            let mut y = vec![0.0; n];
            for (q, c) in basis.iter().zip(&coeffs) {
                for (yi, qi) in y.iter_mut().zip(q) {
                    *yi += beta0 * c * qi;
                }
            }
            if breakdown || m == max_m {
                if !breakdown && m < n {
                    if let Some(prev) = &previous {
                        let change = norm2(&sub(&y, prev));
                        if change > 1e3 * tol * beta0 {
                            return Err(Error::SolverFailure(format!(
                                "Krylov exponential did not converge (change {change:e})"
                            )));
                        }
                    }
                }
                return Ok(y);
            }
            if let Some(prev) = &previous {
                if norm2(&sub(&y, prev)) <= tol * beta0 {
                    return Ok(y);
                }
            }
            previous = Some(y);
        }
        betas.push(b);
        basis.push(w.iter().map(|x| x / b).collect());
    }
}

fn tridiagonal_expm_first_column(alphas: &[f64], betas: &[f64], t: f64) -> Vec<f64> {
    let m = alphas.len();
    let mut tri = DMatrix::zeros(m, m);
    for i in 0..m {
        tri[(i, i)] = alphas[i];
        if i + 1 < m {
            tri[(i, i + 1)] = betas[i];
            tri[(i + 1, i)] = betas[i];
        }
    }
    let eig = SymmetricEigen::new(tri);
    (0..m)
        .map(|i| {
            (0..m)
                .map(|k| {
                    eig.eigenvectors[(i, k)]
                        * (-t * eig.eigenvalues[k]).exp()
                        * eig.eigenvectors[(0, k)]
                })
                .sum()
        })
        .collect()
}

fn sub(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len();
    if n < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_matrix(n: usize) -> SymCsr {
        let mut e = Vec::new();
        for i in 0..n {
            e.push((i, i, 2.0));
            if i + 1 < n {
                e.push((i, i + 1, -1.0));
                e.push((i + 1, i, -1.0));
            }
        }
        SymCsr::from_entries(n, e)
    }

    #[test]
    fn duplicates_are_summed() {
        let m = SymCsr::from_entries(2, vec![(0, 1, 1.0), (0, 1, 2.0), (1, 0, 3.0)]);
        assert_eq!(m.to_dense()[(0, 1)], 3.0);
        assert_eq!(m.diagonal(), vec![0.0, 0.0]);
    }

    #[test]
    fn direct_and_iterative_agree() {
        let a = path_matrix(50);
        let b: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let x1 = SpdSolver::new(&a, None, 1e-14).unwrap().solve(&b).unwrap();
        let x2 = SpdSolver::iterative(&a, 1e-14).unwrap().solve(&b).unwrap();
        for (u, v) in x1.iter().zip(&x2) {
            assert!((u - v).abs() < 1e-9);
        }
        let r = a.matvec(&x1);
        for (ri, bi) in r.iter().zip(&b) {
            assert!((ri - bi).abs() < 1e-12);
        }
    }

    #[test]
    fn indefinite_matrix_is_reported() {
        let a = SymCsr::from_entries(2, vec![(0, 0, 1.0), (1, 1, -1.0)]);
        assert!(matches!(
            SpdSolver::cholesky(&a, None).unwrap(),
            Factorization::NotPositiveDefinite
        ));
    }

    #[test]
    fn pencil_matches_scalar_case() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0]);
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let (vals, _) = pencil_eigen(&a, &b).unwrap();
        assert!((vals[0] - 1.5).abs() < 1e-14);
        assert!((vals[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn lanczos_matches_dense_exponential() {
        let a = path_matrix(30);
        let dense = a.to_dense();
        let eig = SymmetricEigen::new(dense.clone());
        let v: Vec<f64> = (0..30).map(|i| 1.0 + (i as f64 * 0.3).cos()).collect();
        let t = 3.0;
        let exact = &eig.eigenvectors
            * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| (-t * l).exp()))
            * eig.eigenvectors.transpose()
            * DVector::from_vec(v.clone());
        let approx = expm_neg_action(|x| a.matvec(x), &v, t, a.inf_norm(), 1e-13).unwrap();
        for i in 0..30 {
            assert!((approx[i] - exact[i]).abs() < 1e-10, "{i}");
        }
    }
}
