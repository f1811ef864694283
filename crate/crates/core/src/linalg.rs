//! Small dense linear-algebra helpers on top of nalgebra.

use crate::error::{Result, SfdError};
use crate::scalar::Scalar;
use nalgebra::{Complex, DMatrix, DVector, Schur};

/// Pivot ratio below which an LU factorization is treated as singular.
pub const PIVOT_RATIO_MIN: f64 = 1e-14;

/// LU factorization with a cheap conditioning estimate (ratio of smallest to
/// largest pivot magnitude).
pub struct Factored<T: Scalar> {
    lu: nalgebra::LU<T, nalgebra::Dyn, nalgebra::Dyn>,
    pub pivot_ratio: T,
    pub min_pivot: T,
}

impl<T: Scalar> Factored<T> {
    pub fn new(m: &DMatrix<T>) -> Self {
        let lu = m.clone().lu();
        let u = lu.u();
        let mut lo = T::max_value().unwrap();
        let mut hi = T::zero();
        for i in 0..u.nrows().min(u.ncols()) {
            let p = u[(i, i)].abs();
            lo = lo.min(p);
            hi = hi.max(p);
        }
        let pivot_ratio = if u.nrows() == 0 {
            T::one()
        } else if hi > T::zero() && lo.is_finite_val() {
            lo / hi
        } else {
            T::zero()
        };
        let min_pivot = if u.nrows() == 0 { T::one() } else { lo };
        Self { lu, pivot_ratio, min_pivot }
    }

    pub fn is_singular(&self) -> bool {
        !(self.pivot_ratio > T::lit(PIVOT_RATIO_MIN).max(T::eps_mach() * T::lit(1e2)))
    }

    pub fn solve(&self, b: &DVector<T>) -> Option<DVector<T>> {
        if self.is_singular() {
            return None;
        }
        self.lu.solve(b)
    }

    pub fn solve_mat(&self, b: &DMatrix<T>) -> Option<DMatrix<T>> {
        if self.is_singular() {
            return None;
        }
        self.lu.solve(b)
    }

    pub fn determinant(&self) -> T {
        self.lu.determinant()
    }
}

/// Solves `m z = b`, reporting a singular block by name.
pub fn solve_block<T: Scalar>(m: &DMatrix<T>, b: &DVector<T>, block: &'static str) -> Result<DVector<T>> {
    let f = Factored::new(m);
    f.solve(b).ok_or(SfdError::SingularBlock {
        block,
        cond: f.pivot_ratio.f64(),
    })
}

pub fn inf_norm<T: Scalar>(v: &DVector<T>) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

pub fn mat_inf_norm<T: Scalar>(m: &DMatrix<T>) -> T {
    (0..m.nrows()).fold(T::zero(), |acc, i| {
        acc.max(m.row(i).iter().fold(T::zero(), |s, x| s + x.abs()))
    })
}

pub fn all_finite<T: Scalar>(v: impl IntoIterator<Item = T>) -> bool {
    v.into_iter().all(|x| x.is_finite_val())
}

/// Companion matrix `[[0, I], [-B, -A]]` of `z'' + A z' + B z = 0`.
pub fn companion<T: Scalar>(a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    let f = a.nrows();
    let mut c = DMatrix::zeros(2 * f, 2 * f);
    for i in 0..f {
        c[(i, f + i)] = T::one();
        for j in 0..f {
            c[(f + i, j)] = -b[(i, j)];
            c[(f + i, f + j)] = -a[(i, j)];
        }
    }
    c
}

/// Eigenvalues of a dense real matrix.
pub fn eigenvalues<T: Scalar>(m: &DMatrix<T>) -> Result<Vec<Complex<T>>> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    if !all_finite(m.iter().copied()) {
        return Err(SfdError::EigenFailure);
    }
    let schur = Schur::try_new(m.clone(), T::eps_mach(), 10_000).ok_or(SfdError::EigenFailure)?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Singular values in decreasing order.
pub fn singular_values<T: Scalar>(m: &DMatrix<T>) -> Vec<T> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<T> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    s
}

/// Numerical rank relative to the largest singular value.
pub fn numerical_rank<T: Scalar>(m: &DMatrix<T>, rel_tol: T) -> usize {
    let s = singular_values(m);
    let Some(&top) = s.first() else { return 0 };
    if top == T::zero() {
        return 0;
    }
    s.iter().filter(|&&v| v > rel_tol * top).count()
}

/// Unit vector spanning the numerical kernel (right singular vector of the
/// smallest singular value).
pub fn kernel_vector<T: Scalar>(m: &DMatrix<T>) -> DVector<T> {
    let n = m.ncols();
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let mut idx = 0;
    for i in 1..svd.singular_values.len() {
        if svd.singular_values[i] < svd.singular_values[idx] {
            idx = i;
        }
    }
    if svd.singular_values.len() < n {
        idx = n - 1;
    }
    let mut v = v_t.row(idx).transpose();
    // orient so the largest component is positive
    let mut k = 0;
    for i in 1..n {
        if v[i].abs() > v[k].abs() {
            k = i;
        }
    }
    if v[k] < T::zero() {
        v = -v;
    }
    v
}

pub fn to_f64_vec<T: Scalar>(v: &DVector<T>) -> Vec<f64> {
    v.iter().map(|x| x.f64()).collect()
}

pub fn from_f64_slice<T: Scalar>(v: &[f64]) -> DVector<T> {
    DVector::from_iterator(v.len(), v.iter().map(|&x| T::lit(x)))
}

/// Concatenates vectors.
pub fn concat<T: Scalar>(parts: &[&DVector<T>]) -> DVector<T> {
    let n = parts.iter().map(|p| p.len()).sum();
    DVector::from_iterator(n, parts.iter().flat_map(|p| p.iter().copied()))
}
