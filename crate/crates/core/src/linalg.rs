//! Dense complex linear algebra shared by the diagnostics.
//!
//! Everything here works on `DMatrix<Complex64>`; operator norms are spectral
//! (largest singular value) unless a name says otherwise.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Result, SpectralError};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Relative asymmetry allowed before a nominally Hermitian input is rejected.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Singular values in non-increasing order.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Spectral norm.
pub fn op_norm(m: &CMatrix) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Full SVD with singular values sorted descending: `(u, sigma, v)` with `m = u diag(sigma) v*`.
pub fn svd_full(m: &CMatrix) -> (CMatrix, Vec<f64>, CMatrix) {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return (CMatrix::zeros(rows, 0), Vec::new(), CMatrix::zeros(cols, 0));
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("left singular vectors requested");
    let v = svd.v_t.expect("right singular vectors requested").adjoint();
    (u, svd.singular_values.iter().copied().collect(), v)
}

/// Right singular vectors of a square matrix, completed to a full basis, with
/// the matching singular values (zero-padded). Ordered by decreasing singular value.
pub fn right_singular_pairs(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let (_, s, v) = svd_full(m);
    (s, v)
}

/// Condition number in the spectral norm; infinite for singular matrices.
pub fn condition_number(m: &CMatrix) -> f64 {
    let sv = singular_values(m);
    match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        (Some(_), Some(_)) => f64::INFINITY,
        _ => 1.0,
    }
}

/// Frobenius-norm asymmetry `|A - A*|`.
pub fn asymmetry(m: &CMatrix) -> f64 {
    (m - m.adjoint()).norm()
}

/// Accepts a nominally Hermitian matrix, symmetrizing away round-off.
///
/// Rejects the input when `|A - A*| > 1e-12 |A|` (Frobenius norms).
pub fn symmetrize_checked(m: &CMatrix, what: &str) -> Result<CMatrix> {
    if m.nrows() != m.ncols() {
        return Err(SpectralError::DimensionMismatch(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let asym = asymmetry(m);
    let allowed = HERMITIAN_TOL * m.norm();
    if asym > allowed {
        return Err(SpectralError::NonHermitian {
            what: what.to_string(),
            asymmetry: asym,
            allowed,
        });
    }
    Ok((m + m.adjoint()).scale(0.5))
}

/// `(T - T*) / 2i`.
pub fn imaginary_part(t: &CMatrix) -> CMatrix {
    (t - t.adjoint()) / c(0.0, 2.0)
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), CMatrix::zeros(0, 0));
    }
    let h = (m + m.adjoint()).scale(0.5);
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

/// Complex eigenvalues with multiplicity, sorted by descending modulus.
pub fn eigenvalues_general(m: &CMatrix) -> Vec<Complex64> {
    let n = m.nrows();
    if n == 0 {
        return Vec::new();
    }
    let t = m.clone().schur().unpack().1;
    let mut out = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        // complex Schur forms are triangular; a leftover 2x2 bump is solved directly
        if i + 1 < n && t[(i + 1, i)] != Complex64::new(0.0, 0.0) {
            let (a, b, cc, d) = (t[(i, i)], t[(i, i + 1)], t[(i + 1, i)], t[(i + 1, i + 1)]);
            let half_tr = (a + d) * 0.5;
            let disc = ((a - d) * 0.5 * ((a - d) * 0.5) + b * cc).sqrt();
            out.push(half_tr + disc);
            out.push(half_tr - disc);
            i += 2;
        } else {
            out.push(t[(i, i)]);
            i += 1;
        }
    }
    out.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    out
}

/// Square root of a positive semidefinite Hermitian matrix.
///
/// Negative eigenvalues down to `-1e-12 * scale` are clipped to zero; anything
/// more negative is an error.
pub fn psd_sqrt(m: &CMatrix, scale: f64) -> Result<CMatrix> {
    let (vals, vecs) = hermitian_eigen(m);
    let floor = -1e-12 * scale;
    let mut roots = Vec::with_capacity(vals.len());
    for &v in &vals {
        if v < floor {
            return Err(SpectralError::IndefiniteImaginaryPart { eigenvalue: v });
        }
        roots.push(v.max(0.0).sqrt());
    }
    let d = CMatrix::from_diagonal(&CVector::from_iterator(
        roots.len(),
        roots.iter().map(|&r| c(r, 0.0)),
    ));
    Ok(&vecs * d * vecs.adjoint())
}

/// Orthonormal basis for the column span of `m`, keeping left singular vectors
/// whose singular value exceeds `threshold`.
pub fn column_span(m: &CMatrix, threshold: f64) -> CMatrix {
    let (u, s, _) = svd_full(m);
    let keep = s.iter().take_while(|&&x| x > threshold).count();
    u.columns(0, keep).into_owned()
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Real diagonal matrix.
pub fn real_diagonal(d: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_iterator(
        d.len(),
        d.iter().map(|&x| c(x, 0.0)),
    ))
}

/// Promotes a real matrix to complex.
pub fn complexify(m: &DMatrix<f64>) -> CMatrix {
    m.map(|x| c(x, 0.0))
}
