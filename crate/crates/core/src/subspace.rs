//! Subspaces of the auxiliary space: the null space of the homogeneous
//! Lippmann-Schwinger operator, nested ranges of `F E_O(H)`, and distances
//! between them.

use serde::{Deserialize, Serialize};

use crate::boundary::{probe_limit, BoundaryPath, LimitVerdict};
use crate::error::{Result, SpectralError};
use crate::linalg::{self, c, CMatrix, CVector};
use crate::model::{spectral_decomposition, OpenInterval, RiggedModel};
use crate::resolvent::{rigged_resolvent, sandwiched_resolvent};
use crate::serial;

/// Default relative null-space threshold.
pub const DEFAULT_NULL_TOL: f64 = 1e-7;

/// Default probe tolerance used when a null space is estimated from scratch.
pub const DEFAULT_PROBE_TOL: f64 = 1e-8;

/// Relative rank threshold for spans of `F` applied to eigenvectors.
pub const SPAN_REL_TOL: f64 = 1e-10;

/// Number of dyadic windows in the nested family.
pub const WINDOW_COUNT: usize = 9;

/// Eigenvalues within this multiple of `1 + max|eig|` of `lambda` count as `lambda`.
pub const EIGEN_MATCH_REL: f64 = 1e-9;

/// Orthonormal basis of a subspace of `C^K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subspace {
    #[serde(with = "serial::cmatrix")]
    pub basis: CMatrix,
    pub dim: usize,
    pub ambient_dim: usize,
    /// Threshold the basis was cut at.
    pub tolerance: f64,
}

impl Subspace {
    pub fn zero(ambient_dim: usize) -> Self {
        Self {
            basis: CMatrix::zeros(ambient_dim, 0),
            dim: 0,
            ambient_dim,
            tolerance: 0.0,
        }
    }

    /// Column span of `m`, keeping singular values above `threshold`.
    pub fn span_of(m: &CMatrix, threshold: f64) -> Self {
        let basis = linalg::column_span(m, threshold);
        Self {
            dim: basis.ncols(),
            ambient_dim: m.nrows(),
            basis,
            tolerance: threshold,
        }
    }

    /// Orthonormalizes given columns with a relative cut.
    pub fn from_columns(m: &CMatrix) -> Self {
        let scale = linalg::op_norm(m);
        Self::span_of(m, SPAN_REL_TOL * scale.max(f64::MIN_POSITIVE))
    }

    pub fn projector(&self) -> CMatrix {
        &self.basis * self.basis.adjoint()
    }
}

/// Basis of right singular vectors of `1 - T J` with singular value at most
/// `threshold`, plus the threshold actually applied.
pub fn lippmann_schwinger_null_space(t: &CMatrix, j: &CMatrix, threshold: f64) -> Result<Subspace> {
    let k = t.nrows();
    if t.ncols() != k || j.nrows() != k || j.ncols() != k {
        return Err(SpectralError::DimensionMismatch(format!(
            "T is {}x{}, J is {}x{}",
            t.nrows(),
            t.ncols(),
            j.nrows(),
            j.ncols()
        )));
    }
    let op = linalg::identity(k) - t * j;
    let (s, v) = linalg::right_singular_pairs(&op);
    let cols: Vec<usize> = (0..s.len()).filter(|&i| s[i] <= threshold).collect();
    Ok(Subspace {
        basis: v.select_columns(&cols),
        dim: cols.len(),
        ambient_dim: k,
        tolerance: threshold,
    })
}

/// Null space of `1 - T_{lambda+i0} J` from a converged boundary probe of `H0 + F*JF`.
///
/// The cut is `tol (1 + |TJ|)`, raised to ten times the last Cauchy residual
/// so that the limit estimate's own error never splits a cluster.
pub fn ls_null_space(verdict: &LimitVerdict, j: &CMatrix, tol: f64) -> Result<Subspace> {
    if !(tol > 0.0) {
        return Err(SpectralError::InvalidArgument(format!(
            "tol = {tol} must be positive"
        )));
    }
    if !verdict.converged {
        return Err(SpectralError::NotConverged(format!(
            "limit estimate did not converge (last residual {:e})",
            verdict.last_residual()
        )));
    }
    let t = verdict
        .limit_estimate
        .as_ref()
        .ok_or_else(|| SpectralError::NotConverged("no limit estimate".into()))?;
    let scale = 1.0 + linalg::op_norm(&(t * j));
    let threshold = (tol * scale).max(10.0 * verdict.last_residual());
    lippmann_schwinger_null_space(t, j, threshold)
}

/// Probes `H0 + F*JF` at `lambda` and returns the null space when it converges.
pub fn upsilon_estimate(
    model: &RiggedModel,
    lambda: f64,
    j: &CMatrix,
    path: BoundaryPath,
    tol: f64,
) -> Result<Subspace> {
    let j = model.check_coupling(j)?;
    let verdict = probe_limit(model, Some(&j), path.at(lambda), DEFAULT_PROBE_TOL)?;
    ls_null_space(&verdict, &j, tol)
}

/// Subspace distance between the null spaces obtained with two witnesses.
pub fn upsilon_independence(
    model: &RiggedModel,
    lambda: f64,
    j1: &CMatrix,
    j2: &CMatrix,
    path: BoundaryPath,
    tol: f64,
) -> Result<f64> {
    let tag = |which: &str, e: SpectralError| match e {
        SpectralError::NotConverged(msg) => {
            SpectralError::NotConverged(format!("witness {which}: {msg}"))
        }
        other => other,
    };
    let a = upsilon_estimate(model, lambda, j1, path, tol).map_err(|e| tag("j1", e))?;
    let b = upsilon_estimate(model, lambda, j2, path, tol).map_err(|e| tag("j2", e))?;
    Ok(subspace_distance(&a, &b))
}

/// Span of `F E_{(lambda - delta, lambda + delta)}(H0)`.
pub fn ran_f_eo(model: &RiggedModel, lambda: f64, delta: f64) -> Result<Subspace> {
    let dense = model.require_dense("ran_f_eo")?;
    let window = OpenInterval::around(lambda, delta)?;
    let v = spectral_decomposition(model, None)?.window_basis(window);
    let threshold = SPAN_REL_TOL * linalg::op_norm(&dense.f);
    Ok(Subspace::span_of(&(&dense.f * v), threshold))
}

/// `delta_i = delta_0 2^{-i}`, `delta_0` a quarter of the spectral diameter.
pub fn dyadic_windows(model: &RiggedModel) -> Result<Vec<f64>> {
    model.require_dense("dyadic_windows")?;
    let eig = spectral_decomposition(model, None)?.eigenvalues;
    let diameter = eig.last().unwrap_or(&0.0) - eig.first().unwrap_or(&0.0);
    let delta0 = if diameter > 0.0 { diameter / 4.0 } else { 0.25 };
    Ok((0..WINDOW_COUNT)
        .map(|i| delta0 * 0.5f64.powi(i as i32))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NestedIntersection {
    pub subspace: Subspace,
    /// Dimensions were not non-increasing along the input.
    pub non_nested: bool,
}

/// Common part of a family of subspaces: eigenvectors of the averaged
/// projector with eigenvalue `>= 1 - tol`.
pub fn nested_intersection(subspaces: &[Subspace], tol: f64) -> Result<NestedIntersection> {
    let first = subspaces
        .first()
        .ok_or_else(|| SpectralError::InvalidArgument("no subspaces to intersect".into()))?;
    let k = first.ambient_dim;
    if subspaces.iter().any(|s| s.ambient_dim != k) {
        return Err(SpectralError::DimensionMismatch(
            "subspaces live in different spaces".into(),
        ));
    }
    let non_nested = subspaces.windows(2).any(|p| p[1].dim > p[0].dim);
    let mut avg = CMatrix::zeros(k, k);
    for s in subspaces {
        avg += s.projector();
    }
    avg /= c(subspaces.len() as f64, 0.0);
    let (vals, vecs) = linalg::hermitian_eigen(&((&avg + avg.adjoint()) * c(0.5, 0.0)));
    let cols: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] >= 1.0 - tol).collect();
    Ok(NestedIntersection {
        subspace: Subspace {
            basis: vecs.select_columns(&cols),
            dim: cols.len(),
            ambient_dim: k,
            tolerance: tol,
        },
        non_nested,
    })
}

/// `nested_intersection` over the dyadic windows around `lambda`.
pub fn f_intersection(model: &RiggedModel, lambda: f64, tol: f64) -> Result<NestedIntersection> {
    let ranges = dyadic_windows(model)?
        .into_iter()
        .map(|delta| ran_f_eo(model, lambda, delta))
        .collect::<Result<Vec<_>>>()?;
    nested_intersection(&ranges, tol)
}

/// Eigenvectors of `H0` at `lambda`, as columns.
fn eigenspace(model: &RiggedModel, lambda: f64) -> Result<CMatrix> {
    let dec = spectral_decomposition(model, None)?;
    let scale = 1.0 + dec.eigenvalues.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let cols: Vec<usize> = (0..dec.eigenvalues.len())
        .filter(|&i| (dec.eigenvalues[i] - lambda).abs() <= EIGEN_MATCH_REL * scale)
        .collect();
    Ok(dec.eigenvectors.select_columns(&cols))
}

/// Multiplicity of `lambda` as an eigenvalue of `H0`.
pub fn eigen_multiplicity(model: &RiggedModel, lambda: f64) -> Result<usize> {
    model.require_dense("eigen_multiplicity")?;
    Ok(eigenspace(model, lambda)?.ncols())
}

/// Orthonormalized image of the eigenspace of `H0` at `lambda` under `F`.
pub fn eigenvector_image(model: &RiggedModel, lambda: f64) -> Result<Subspace> {
    let dense = model.require_dense("eigenvector_image")?;
    let v = eigenspace(model, lambda)?;
    Ok(Subspace::span_of(
        &(&dense.f * v),
        SPAN_REL_TOL * linalg::op_norm(&dense.f),
    ))
}

/// `|(I - P_b) A|` for orthonormal `A` spanning `a`; 0 when `a` is trivial.
pub fn inclusion_defect(a: &Subspace, b: &Subspace) -> f64 {
    if a.dim == 0 {
        return 0.0;
    }
    let residual = &a.basis - &b.basis * (b.basis.adjoint() * &a.basis);
    linalg::op_norm(&residual)
}

/// Principal angles, ascending, between subspaces of equal dimension.
///
/// Sines come from the singular values of `(I - P_b) A`, which keeps small
/// angles accurate where `acos` of cosines would floor near `1e-8`.
pub fn principal_angles(a: &Subspace, b: &Subspace) -> Vec<f64> {
    if a.dim == 0 || b.dim == 0 {
        return Vec::new();
    }
    let residual = &a.basis - &b.basis * (b.basis.adjoint() * &a.basis);
    let mut angles: Vec<f64> = linalg::singular_values(&residual)
        .into_iter()
        .map(|s| s.clamp(0.0, 1.0).asin())
        .collect();
    angles.sort_by(f64::total_cmp);
    angles
}

/// Largest principal angle; `pi/2` when dimensions differ, 0 for two trivial spaces.
pub fn subspace_distance(a: &Subspace, b: &Subspace) -> f64 {
    if a.dim != b.dim {
        return std::f64::consts::FRAC_PI_2;
    }
    let gap = inclusion_defect(a, b).max(inclusion_defect(b, a));
    gap.clamp(0.0, 1.0).asin()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LsResidual {
    pub residual: f64,
    /// `2 y |F R_{lambda+iy}(H1)| |f| + 1e-10`.
    pub bound: f64,
}

/// `|F f - T_{lambda+iy}(H1) J F f|` for `f` localized near `lambda`.
pub fn ls_residual_check(
    model: &RiggedModel,
    j: &CMatrix,
    lambda: f64,
    y: f64,
    f: &CVector,
) -> Result<LsResidual> {
    let dense = model.require_dense("ls_residual_check")?;
    if !(y > 0.0) {
        return Err(SpectralError::InvalidArgument(format!(
            "y = {y} must be positive"
        )));
    }
    if f.len() != dense.h0.nrows() {
        return Err(SpectralError::DimensionMismatch(format!(
            "vector of length {} for a {}-dimensional space",
            f.len(),
            dense.h0.nrows()
        )));
    }
    let j = model.check_coupling(j)?;
    let fnorm = f.norm();
    let defect = (&dense.h0 * f - f * c(lambda, 0.0)).norm();
    let allowed = y * fnorm + 1e-10;
    if defect > allowed {
        return Err(SpectralError::NotLocalized { defect, allowed });
    }
    let z = c(lambda, y);
    let t = sandwiched_resolvent(model, Some(&j), z)?.t;
    let ff = &dense.f * f;
    let residual = (&ff - &t * (&j * &ff)).norm();
    let fr = linalg::op_norm(&rigged_resolvent(model, Some(&j), z)?);
    Ok(LsResidual {
        residual,
        bound: 2.0 * y * fr * fnorm + 1e-10,
    })
}
