//! Sandwiched resolvents `T_z(H) = F (H - z)^{-1} F*` and their spectral data.

use num_complex::Complex64;

use crate::error::{Result, SpectralError};
use crate::linalg::{self, c, CMatrix};
use crate::model::{free_jacobi_green, ModelKind, RiggedModel};

/// Condition estimate above which a dense solve is refused.
pub const MAX_CONDITION: f64 = 1e14;

/// `1 + T0 J` counts as singular when its smallest singular value drops below
/// this times `1 + |T0 J|`.
pub const RESONANT_COUPLING_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct SandwichedResolvent {
    pub t: CMatrix,
    pub z: Complex64,
    /// `None` stands for `J = 0`.
    pub j: Option<CMatrix>,
    pub model_id: String,
    /// Set when `t` stands for a boundary value rather than an exact evaluation.
    pub limit_estimate: bool,
}

impl SandwichedResolvent {
    pub fn dim(&self) -> usize {
        self.t.nrows()
    }

    pub fn norm(&self) -> f64 {
        linalg::op_norm(&self.t)
    }

    pub fn s_numbers(&self) -> Vec<f64> {
        s_numbers(&self.t)
    }

    pub fn eigenvalues(&self) -> Vec<Complex64> {
        eigenvalues(&self.t)
    }
}

/// Evaluates `T_z(H0 + F* J F)`.
///
/// Dense models solve `(H0 + F*JF - z) X = F*` directly. Analytic models use
/// the closed form of `T_z(H0)` followed by `(1 + T0 J)^{-1} T0`.
pub fn sandwiched_resolvent(
    model: &RiggedModel,
    j: Option<&CMatrix>,
    z: Complex64,
) -> Result<SandwichedResolvent> {
    if z.im == 0.0 {
        return Err(SpectralError::RealAxisEvaluation(z));
    }
    let j = j.map(|j| model.check_coupling(j)).transpose()?;
    let t = match model.kind() {
        ModelKind::FiniteMatrix(_) | ModelKind::BlockEigenvalue { .. } => {
            dense_solve(model, j.as_ref(), z)?
        }
        _ => {
            let t0 = free_resolvent(model, z)?;
            match &j {
                None => t0,
                Some(j) => apply_coupling(&t0, j, z)?,
            }
        }
    };
    Ok(SandwichedResolvent {
        t,
        z,
        j,
        model_id: model.id().to_string(),
        limit_estimate: false,
    })
}

/// Same quantity as [`sandwiched_resolvent`] but always through the
/// second-resolvent identity `T_J = (1 + T0 J)^{-1} T0`, for any model.
pub fn sandwiched_resolvent_by_identity(
    model: &RiggedModel,
    j: &CMatrix,
    z: Complex64,
) -> Result<SandwichedResolvent> {
    let t0 = sandwiched_resolvent(model, None, z)?;
    let j = model.check_coupling(j)?;
    let t = apply_coupling(&t0.t, &j, z)?;
    Ok(SandwichedResolvent {
        t,
        z,
        j: Some(j),
        model_id: model.id().to_string(),
        limit_estimate: false,
    })
}

fn apply_coupling(t0: &CMatrix, j: &CMatrix, z: Complex64) -> Result<CMatrix> {
    let k = t0.nrows();
    let t0j = t0 * j;
    let a = CMatrix::identity(k, k) + &t0j;
    let sv = linalg::singular_values(&a);
    let sigma_min = sv.last().copied().unwrap_or(0.0);
    if sigma_min < RESONANT_COUPLING_TOL * (1.0 + linalg::op_norm(&t0j)) {
        return Err(SpectralError::ResonantCoupling { z, sigma_min });
    }
    a.lu()
        .solve(t0)
        .ok_or(SpectralError::ResonantCoupling { z, sigma_min })
}

/// `T_z(H0)` in closed form for the analytic models.
fn free_resolvent(model: &RiggedModel, z: Complex64) -> Result<CMatrix> {
    match model.kind() {
        ModelKind::ScalarCompact { lambda0, weights } => {
            let r = (c(*lambda0, 0.0) - z).inv();
            Ok(CMatrix::from_diagonal(&linalg::CVector::from_iterator(
                weights.len(),
                weights.iter().map(|w| r * (w * w)),
            )))
        }
        ModelKind::FreeJacobi { sites, weights } => {
            let k = sites.len();
            let mut t = CMatrix::zeros(k, k);
            for a in 0..k {
                for b in a..k {
                    let g = free_jacobi_green(sites[a], sites[b], z)? * (weights[a] * weights[b]);
                    t[(a, b)] = g;
                    t[(b, a)] = g;
                }
            }
            Ok(t)
        }
        _ => dense_solve(model, None, z),
    }
}

/// `(H1 - z)` for a dense model, after the conditioning check.
fn shifted_operator(model: &RiggedModel, j: Option<&CMatrix>, z: Complex64) -> Result<CMatrix> {
    let h = model.perturbed_operator(j)?;
    let n = h.nrows();
    let a = h - CMatrix::identity(n, n) * z;
    let condition = linalg::condition_number(&a);
    if !(condition <= MAX_CONDITION) {
        return Err(SpectralError::NearSingularSolve { z, condition });
    }
    Ok(a)
}

fn dense_solve(model: &RiggedModel, j: Option<&CMatrix>, z: Complex64) -> Result<CMatrix> {
    let f = &model.require_dense("sandwiched_resolvent")?.f;
    let a = shifted_operator(model, j, z)?;
    let x = a
        .lu()
        .solve(&f.adjoint())
        .ok_or(SpectralError::NearSingularSolve {
            z,
            condition: f64::INFINITY,
        })?;
    Ok(f * x)
}

/// `F R_z(H0 + F*JF)` as a `K x N` matrix, for dense models.
pub fn rigged_resolvent(model: &RiggedModel, j: Option<&CMatrix>, z: Complex64) -> Result<CMatrix> {
    if z.im == 0.0 {
        return Err(SpectralError::RealAxisEvaluation(z));
    }
    let f = &model.require_dense("rigged_resolvent")?.f;
    // F R_z = (R_{conj z} F*)*
    let a = shifted_operator(model, j, z.conj())?;
    let x = a
        .lu()
        .solve(&f.adjoint())
        .ok_or(SpectralError::NearSingularSolve {
            z,
            condition: f64::INFINITY,
        })?;
    Ok(x.adjoint())
}

/// Singular values, non-increasing.
pub fn s_numbers(t: &CMatrix) -> Vec<f64> {
    linalg::singular_values(t)
}

/// Full spectrum with multiplicity, by descending modulus.
pub fn eigenvalues(t: &CMatrix) -> Vec<Complex64> {
    linalg::eigenvalues_general(t)
}

/// Best rank-`n` approximation from the singular value decomposition.
pub fn best_rank_truncation(t: &CMatrix, n: usize) -> CMatrix {
    let (u, s, v) = linalg::svd_full(t);
    let mut out = CMatrix::zeros(t.nrows(), t.ncols());
    for (i, &sigma) in s.iter().enumerate().take(n) {
        out += u.column(i) * v.column(i).adjoint() * c(sigma, 0.0);
    }
    out
}

/// `|s_{n+1}(T) - |T - T_n||` with `T_n` the best rank-`n` truncation.
pub fn check_approximation_property(t: &CMatrix, n: usize) -> Result<f64> {
    let k = t.nrows().min(t.ncols());
    if n >= k {
        return Err(SpectralError::InvalidArgument(format!(
            "approximation order n = {n} must be below {k}"
        )));
    }
    let s = s_numbers(t);
    let tail = linalg::op_norm(&(t - best_rank_truncation(t, n)));
    Ok((s[n] - tail).abs())
}

/// Slack `s_n(A) + |B| - s_{n+1}(A + B)` of the Fan-type inequality (1-based `n`).
pub fn check_fan_inequality(a: &CMatrix, b: &CMatrix, n: usize) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(SpectralError::DimensionMismatch(format!(
            "A is {:?}, B is {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let k = a.nrows().min(a.ncols());
    if n == 0 || n >= k {
        return Err(SpectralError::InvalidArgument(format!(
            "Fan index n = {n} must lie in 1..{k}"
        )));
    }
    let sa = s_numbers(a);
    let sab = s_numbers(&(a + b));
    Ok(sa[n - 1] + linalg::op_norm(b) - sab[n])
}

/// `| |F R_z(H1)| - y^{-1/2} |sqrt(Im T_z(H1))| |` at `z = lambda + i y`.
pub fn imaginary_part_identity_residual(
    model: &RiggedModel,
    j: Option<&CMatrix>,
    lambda: f64,
    y: f64,
) -> Result<f64> {
    model.require_dense("imaginary_part_identity_residual")?;
    if !(y > 0.0) {
        return Err(SpectralError::InvalidArgument(format!(
            "y = {y} must be positive"
        )));
    }
    let z = c(lambda, y);
    let fr = linalg::op_norm(&rigged_resolvent(model, j, z)?);
    let t = sandwiched_resolvent(model, j, z)?;
    let scale = t.norm();
    let root = linalg::psd_sqrt(&linalg::imaginary_part(&t.t), scale)?;
    Ok((fr - linalg::op_norm(&root) / y.sqrt()).abs())
}
