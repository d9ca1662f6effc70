//! Operator models `(H0, F)` on a rigged Hilbert space.
//!
//! Two families are dense (`FiniteMatrix`, `BlockEigenvalue`) and carry explicit
//! matrices for `H0` and the rigging `F`. The other two (`ScalarCompact`,
//! `FreeJacobi`) are analytic: their sandwiched resolvent is known in closed
//! form and no dense Hilbert-space representation is built.

use std::collections::BTreeSet;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, SpectralError};
use crate::linalg::{self, c, CMatrix};
use crate::serial::cmatrix;

pub const MODEL_SCHEMA: &str = "spectral-lab/model/v1";

/// Rigging rank tolerance relative to the largest singular value.
pub const RANK_TOL: f64 = 1e-10;

/// Modulus tie tolerance when choosing the decaying root of `w + 1/w = z`.
const BRANCH_TIE_TOL: f64 = 1e-14;

/// Structured model record, as read from a `spectral-lab/model/v1` document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelDescription {
    FiniteMatrix {
        #[serde(with = "cmatrix")]
        h0: CMatrix,
        #[serde(with = "cmatrix")]
        f: CMatrix,
    },
    BlockEigenvalue {
        lambda0: f64,
        multiplicity: usize,
        #[serde(with = "cmatrix")]
        g: CMatrix,
        #[serde(with = "cmatrix")]
        f: CMatrix,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gap: Option<f64>,
    },
    ScalarCompact {
        lambda0: f64,
        weights: Vec<f64>,
    },
    FreeJacobi {
        sites: Vec<i64>,
        weights: Vec<f64>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelDocument {
    schema: String,
    #[serde(flatten)]
    model: ModelDescription,
}

/// `H0` and `F` as explicit matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseParts {
    pub h0: CMatrix,
    pub f: CMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    FiniteMatrix(DenseParts),
    /// `H = lambda0 * P (+) G` with `P` of rank `multiplicity`.
    BlockEigenvalue {
        lambda0: f64,
        multiplicity: usize,
        gap: f64,
        dense: DenseParts,
    },
    /// `H = lambda0 * Id` with rigging `diag(weights)`.
    ScalarCompact {
        lambda0: f64,
        weights: Vec<f64>,
    },
    /// Free discrete Laplacian on the integers with `F = sum w_i |e_i><delta_{n_i}|`.
    FreeJacobi {
        sites: Vec<i64>,
        weights: Vec<f64>,
    },
}

/// A validated, immutable model with a content-derived identity.
#[derive(Debug, Clone, PartialEq)]
pub struct RiggedModel {
    id: String,
    description: ModelDescription,
    kind: ModelKind,
}

impl RiggedModel {
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn description(&self) -> &ModelDescription {
        &self.description
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            ModelKind::FiniteMatrix(_) => "finite_matrix",
            ModelKind::BlockEigenvalue { .. } => "block_eigenvalue",
            ModelKind::ScalarCompact { .. } => "scalar_compact",
            ModelKind::FreeJacobi { .. } => "free_jacobi",
        }
    }

    /// Dimension `K` of the auxiliary space.
    pub fn rigging_dim(&self) -> usize {
        match &self.kind {
            ModelKind::FiniteMatrix(d) | ModelKind::BlockEigenvalue { dense: d, .. } => d.f.nrows(),
            ModelKind::ScalarCompact { weights, .. } => weights.len(),
            ModelKind::FreeJacobi { sites, .. } => sites.len(),
        }
    }

    pub fn dense(&self) -> Option<&DenseParts> {
        match &self.kind {
            ModelKind::FiniteMatrix(d) | ModelKind::BlockEigenvalue { dense: d, .. } => Some(d),
            _ => None,
        }
    }

    pub(crate) fn require_dense(&self, op: &'static str) -> Result<&DenseParts> {
        self.dense().ok_or(SpectralError::UnsupportedModel {
            op,
            kind: self.kind_name(),
        })
    }

    /// Validates and symmetrizes an auxiliary-space coupling `J`.
    pub fn check_coupling(&self, j: &CMatrix) -> Result<CMatrix> {
        let k = self.rigging_dim();
        if j.shape() != (k, k) {
            return Err(SpectralError::DimensionMismatch(format!(
                "J must be {k}x{k}, got {}x{}",
                j.nrows(),
                j.ncols()
            )));
        }
        linalg::symmetrize_checked(j, "J")
    }

    /// `H0 + F* J F` for dense models.
    pub fn perturbed_operator(&self, j: Option<&CMatrix>) -> Result<CMatrix> {
        let d = self.require_dense("perturbed_operator")?;
        match j {
            None => Ok(d.h0.clone()),
            Some(j) => {
                let j = self.check_coupling(j)?;
                let h = &d.h0 + d.f.adjoint() * j * &d.f;
                Ok((&h + h.adjoint()).scale(0.5))
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ModelDocument {
            schema: MODEL_SCHEMA.to_string(),
            model: self.description.clone(),
        })
        .expect("model documents always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument =
            serde_json::from_str(text).map_err(|e| SpectralError::ConfigParse {
                location: format!("line {} column {}", e.line(), e.column()),
                message: e.to_string(),
            })?;
        if doc.schema != MODEL_SCHEMA {
            return Err(SpectralError::ConfigParse {
                location: "schema".to_string(),
                message: format!("expected {MODEL_SCHEMA:?}, found {:?}", doc.schema),
            });
        }
        make_model(doc.model)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SpectralError::ModelLoad {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text).map_err(|e| SpectralError::ModelLoad {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

/// Validates a model record and assigns it a stable identity.
///
/// Hermitian payloads are symmetrized first; the identity hashes the
/// symmetrized record, so round-off noise in the input does not change it.
pub fn make_model(description: ModelDescription) -> Result<RiggedModel> {
    let (description, kind) = match description {
        ModelDescription::FiniteMatrix { h0, f } => {
            let h0 = linalg::symmetrize_checked(&h0, "h0")?;
            if h0.nrows() == 0 {
                return Err(SpectralError::InvalidModel("h0 is empty".into()));
            }
            check_rigging(&f, h0.nrows())?;
            let dense = DenseParts {
                h0: h0.clone(),
                f: f.clone(),
            };
            (
                ModelDescription::FiniteMatrix { h0, f },
                ModelKind::FiniteMatrix(dense),
            )
        }
        ModelDescription::BlockEigenvalue {
            lambda0,
            multiplicity,
            g,
            f,
            gap,
        } => {
            if !lambda0.is_finite() {
                return Err(SpectralError::InvalidModel("lambda0 must be finite".into()));
            }
            if multiplicity == 0 {
                return Err(SpectralError::InvalidModel(
                    "multiplicity must be positive".into(),
                ));
            }
            let g = if g.nrows() == 0 && g.ncols() == 0 {
                g
            } else {
                linalg::symmetrize_checked(&g, "g")?
            };
            let m = multiplicity;
            let n = m + g.nrows();
            check_rigging(&f, n)?;
            let (g_spec, _) = linalg::hermitian_eigen(&g);
            let distance = g_spec
                .iter()
                .map(|x| (x - lambda0).abs())
                .fold(f64::INFINITY, f64::min);
            let floor = 1e-12 * (1.0 + lambda0.abs());
            let required = match gap {
                Some(a) if !(a > 0.0) => {
                    return Err(SpectralError::InvalidModel("gap must be positive".into()))
                }
                Some(a) => a,
                None => floor,
            };
            if distance < required || distance <= floor {
                return Err(SpectralError::GapViolation {
                    distance,
                    gap: required,
                });
            }
            let mut h0 = CMatrix::zeros(n, n);
            for i in 0..m {
                h0[(i, i)] = c(lambda0, 0.0);
            }
            h0.view_mut((m, m), (g.nrows(), g.nrows())).copy_from(&g);
            let kind = ModelKind::BlockEigenvalue {
                lambda0,
                multiplicity,
                gap: distance.min(gap.unwrap_or(distance)),
                dense: DenseParts { h0, f: f.clone() },
            };
            (
                ModelDescription::BlockEigenvalue {
                    lambda0,
                    multiplicity,
                    g,
                    f,
                    gap,
                },
                kind,
            )
        }
        ModelDescription::ScalarCompact { lambda0, weights } => {
            if !lambda0.is_finite() {
                return Err(SpectralError::InvalidModel("lambda0 must be finite".into()));
            }
            if weights.is_empty() {
                return Err(SpectralError::InvalidModel("weights are empty".into()));
            }
            if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
                return Err(SpectralError::InvalidModel(
                    "scalar_compact weights must be strictly positive".into(),
                ));
            }
            if weights.windows(2).any(|p| p[1] > p[0]) {
                return Err(SpectralError::InvalidModel(
                    "scalar_compact weights must be non-increasing".into(),
                ));
            }
            (
                ModelDescription::ScalarCompact {
                    lambda0,
                    weights: weights.clone(),
                },
                ModelKind::ScalarCompact { lambda0, weights },
            )
        }
        ModelDescription::FreeJacobi { sites, weights } => {
            if sites.is_empty() || sites.len() != weights.len() {
                return Err(SpectralError::InvalidModel(format!(
                    "free_jacobi needs matching nonempty sites/weights, got {} and {}",
                    sites.len(),
                    weights.len()
                )));
            }
            if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
                return Err(SpectralError::InvalidModel(
                    "free_jacobi weights must be strictly positive".into(),
                ));
            }
            let distinct: BTreeSet<i64> = sites.iter().copied().collect();
            if distinct.len() != sites.len() {
                return Err(SpectralError::RankDeficientRigging {
                    rank: distinct.len(),
                    rows: sites.len(),
                    sigma_min: 0.0,
                    rank_tol: 0.0,
                });
            }
            (
                ModelDescription::FreeJacobi {
                    sites: sites.clone(),
                    weights: weights.clone(),
                },
                ModelKind::FreeJacobi { sites, weights },
            )
        }
    };
    let id = model_identity(&description);
    Ok(RiggedModel {
        id,
        description,
        kind,
    })
}

fn check_rigging(f: &CMatrix, n: usize) -> Result<()> {
    if f.ncols() != n {
        return Err(SpectralError::DimensionMismatch(format!(
            "rigging must have {n} columns, got {}",
            f.ncols()
        )));
    }
    let k = f.nrows();
    if k == 0 || k > n {
        return Err(SpectralError::InvalidModel(format!(
            "rigging must have 1..={n} rows, got {k}"
        )));
    }
    if f.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(SpectralError::InvalidModel(
            "rigging has non-finite entries".into(),
        ));
    }
    let sv = linalg::singular_values(f);
    let rank_tol = RANK_TOL * sv[0];
    let rank = sv.iter().filter(|&&s| s > rank_tol).count();
    if rank < k {
        return Err(SpectralError::RankDeficientRigging {
            rank,
            rows: k,
            sigma_min: *sv.last().unwrap_or(&0.0),
            rank_tol,
        });
    }
    Ok(())
}

fn model_identity(description: &ModelDescription) -> String {
    let canonical = serde_json::to_vec(description).expect("model descriptions serialize");
    let digest = Sha256::digest(&canonical);
    let hex: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
    let kind = match description {
        ModelDescription::FiniteMatrix { .. } => "finite_matrix",
        ModelDescription::BlockEigenvalue { .. } => "block_eigenvalue",
        ModelDescription::ScalarCompact { .. } => "scalar_compact",
        ModelDescription::FreeJacobi { .. } => "free_jacobi",
    };
    format!("{kind}-{hex}")
}

/// Eigenpairs of a dense model, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
}

impl SpectralDecomposition {
    /// Orthogonal projection onto eigenvectors with eigenvalue in the open interval.
    pub fn projection(&self, interval: OpenInterval) -> CMatrix {
        let v = self.window_basis(interval);
        &v * v.adjoint()
    }

    /// Eigenvectors with eigenvalue in the open interval, as columns.
    pub fn window_basis(&self, interval: OpenInterval) -> CMatrix {
        let cols: Vec<usize> = self
            .eigenvalues
            .iter()
            .enumerate()
            .filter(|(_, &x)| interval.contains(x))
            .map(|(i, _)| i)
            .collect();
        self.eigenvectors.select_columns(&cols)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpenInterval {
    pub lo: f64,
    pub hi: f64,
}

impl OpenInterval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(SpectralError::InvalidArgument(format!(
                "empty interval ({lo}, {hi})"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn around(center: f64, radius: f64) -> Result<Self> {
        Self::new(center - radius, center + radius)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo < x && x < self.hi
    }
}

/// Eigendecomposition of `H0 + F* J F` (or of `H0` when `j` is `None`).
pub fn spectral_decomposition(
    model: &RiggedModel,
    j: Option<&CMatrix>,
) -> Result<SpectralDecomposition> {
    model.require_dense("spectral_decomposition")?;
    let h = model.perturbed_operator(j)?;
    let (eigenvalues, eigenvectors) = linalg::hermitian_eigen(&h);
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// `E_O(H0)` for an open interval `O`.
pub fn spectral_projection(model: &RiggedModel, interval: OpenInterval) -> Result<CMatrix> {
    model.require_dense("spectral_projection")?;
    Ok(spectral_decomposition(model, None)?.projection(interval))
}

/// Root of `w + 1/w = z` with `|w| < 1`.
fn decaying_root(z: Complex64) -> Complex64 {
    let s = (z * z - 4.0).sqrt();
    let r1 = (z + s) * 0.5;
    let r2 = (z - s) * 0.5;
    // the product of the roots is 1: take the large one (no cancellation) and invert it
    let big = if r1.norm() >= r2.norm() { r1 } else { r2 };
    let small = big.inv();
    if (big.norm() - small.norm()).abs() <= BRANCH_TIE_TOL {
        // on the unit circle up to round-off: pick the Herglotz branch
        let g = (small - small.inv()).inv();
        if g.im * z.im > 0.0 {
            small
        } else {
            big
        }
    } else {
        small
    }
}

/// Green's function `<delta_n, (Delta - z)^{-1} delta_m>` of the free discrete Laplacian
/// `(Delta psi)(n) = psi(n+1) + psi(n-1)`.
pub fn free_jacobi_green(n: i64, m: i64, z: Complex64) -> Result<Complex64> {
    if z.im == 0.0 {
        return Err(SpectralError::RealAxisEvaluation(z));
    }
    let w = decaying_root(z);
    let d = n.abs_diff(m).min(u32::MAX as u64) as u32;
    Ok(w.powu(d) / (w - w.inv()))
}
