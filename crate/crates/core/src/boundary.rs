//! Approach `z = lambda + i y -> lambda + i0` along a geometric schedule.
//!
//! Everything here is finite evidence: a limit is "converged" when the tail of
//! the Cauchy residuals is small and settling, and the L/N indices are read off
//! the tail of the schedule with an explicit growth flag.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Result, SpectralError};
use crate::linalg::{self, c, CMatrix};
use crate::model::{ModelKind, RiggedModel};
use crate::resolvent::{sandwiched_resolvent, SandwichedResolvent};

pub const DEFAULT_Y0: f64 = 0.1;
pub const DEFAULT_RATIO: f64 = 0.5;
pub const DEFAULT_COUNT: usize = 30;

/// Minimum schedule length for the index estimates.
pub const MIN_INDEX_SCHEDULE: usize = 5;

/// Number of trailing schedule points the index and growth tests look at.
const TAIL: usize = 5;

/// Per-step factor the growth trace must exceed to count as growing.
pub const GROWTH_RATIO: f64 = 1.01;

/// Per-step increase must also exceed this times `1 + value`.
pub const GROWTH_FLOOR: f64 = 1e-6;

/// Number of trailing points fitted by [`blowup_rate`].
const BLOWUP_FIT_POINTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPath {
    pub lambda: f64,
    pub y0: f64,
    pub ratio: f64,
    pub count: usize,
}

impl BoundaryPath {
    pub fn new(lambda: f64, y0: f64, ratio: f64, count: usize) -> Result<Self> {
        let path = Self {
            lambda,
            y0,
            ratio,
            count,
        };
        path.validate()?;
        Ok(path)
    }

    /// `y0 = 0.1`, `q = 0.5`, 30 points (down to about `2e-10`).
    pub fn default_at(lambda: f64) -> Self {
        Self {
            lambda,
            y0: DEFAULT_Y0,
            ratio: DEFAULT_RATIO,
            count: DEFAULT_COUNT,
        }
    }

    pub fn at(&self, lambda: f64) -> Self {
        Self { lambda, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.lambda.is_finite() {
            return Err(SpectralError::InvalidArgument(
                "lambda must be finite".into(),
            ));
        }
        if !(self.y0 > 0.0 && self.y0.is_finite()) {
            return Err(SpectralError::InvalidArgument(format!(
                "y0 = {} must be positive",
                self.y0
            )));
        }
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(SpectralError::InvalidArgument(format!(
                "ratio = {} must lie in (0, 1)",
                self.ratio
            )));
        }
        if self.count < 3 {
            return Err(SpectralError::InvalidArgument(format!(
                "count = {} must be at least 3",
                self.count
            )));
        }
        if self.offsets().last().is_some_and(|&y| y <= 0.0) {
            return Err(SpectralError::InvalidArgument(
                "schedule underflows to zero".into(),
            ));
        }
        Ok(())
    }

    /// `y_k = y0 q^k`, strictly decreasing.
    pub fn offsets(&self) -> Vec<f64> {
        (0..self.count)
            .map(|k| self.y0 * self.ratio.powi(k as i32))
            .collect()
    }

    pub fn points(&self) -> Vec<Complex64> {
        self.offsets()
            .into_iter()
            .map(|y| c(self.lambda, y))
            .collect()
    }
}

/// Evaluations of `T_{lambda + i y_k}` along a schedule.
#[derive(Debug, Clone)]
pub struct BoundaryTrace {
    pub path: BoundaryPath,
    pub resolvents: Vec<SandwichedResolvent>,
}

impl BoundaryTrace {
    /// Evaluates every schedule point; the first failing offset (in schedule
    /// order) is reported.
    pub fn evaluate(model: &RiggedModel, j: Option<&CMatrix>, path: BoundaryPath) -> Result<Self> {
        path.validate()?;
        let evaluated: Vec<Result<SandwichedResolvent>> = path
            .points()
            .into_par_iter()
            .map(|z| sandwiched_resolvent(model, j, z))
            .collect();
        let resolvents = evaluated.into_iter().collect::<Result<Vec<_>>>()?;
        Ok(Self { path, resolvents })
    }

    pub fn offsets(&self) -> Vec<f64> {
        self.resolvents.iter().map(|t| t.z.im).collect()
    }

    pub fn norms(&self) -> Vec<f64> {
        self.resolvents.iter().map(|t| t.norm()).collect()
    }

    pub fn cauchy_residuals(&self) -> Vec<f64> {
        self.resolvents
            .windows(2)
            .map(|w| linalg::op_norm(&(&w[1].t - &w[0].t)))
            .collect()
    }

    pub fn limit_verdict(&self, tol: f64) -> LimitVerdict {
        let norms = self.norms();
        let residuals = self.cauchy_residuals();
        let converged = cauchy_converged(&residuals, *norms.last().unwrap_or(&0.0), tol);
        let mut limit = self.resolvents.last().cloned();
        if let Some(t) = limit.as_mut() {
            t.limit_estimate = true;
        }
        LimitVerdict {
            converged,
            limit_estimate: limit.map(|t| t.t),
            cauchy_residuals: residuals,
            norm_trace: norms,
            offsets: self.offsets(),
            tol,
        }
    }

    /// Eigenvalue moduli per schedule point, descending.
    pub fn eigen_moduli(&self) -> Vec<Vec<f64>> {
        self.resolvents
            .iter()
            .map(|t| t.eigenvalues().iter().map(|z| z.norm()).collect())
            .collect()
    }

    pub fn s_number_table(&self) -> Vec<Vec<f64>> {
        self.resolvents.iter().map(|t| t.s_numbers()).collect()
    }

    pub fn l_index(&self, r_grid: &[f64], n_max: usize) -> Result<IndexEstimate> {
        index_from_moduli(&self.offsets(), &self.eigen_moduli(), r_grid, n_max)
    }

    pub fn n_index(&self, r_grid: &[f64], n_max: usize) -> Result<IndexEstimate> {
        index_from_moduli(&self.offsets(), &self.s_number_table(), r_grid, n_max)
    }

    /// Trace table: `y, norm, cauchy_residual`, then eigenvalue and s-number
    /// counts per `R`.
    pub fn write_csv<W: Write>(&self, out: W, r_grid: &[f64]) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["y".to_string(), "norm".into(), "cauchy_residual".into()];
        header.extend(r_grid.iter().map(|r| format!("eig_count_R={r}")));
        header.extend(r_grid.iter().map(|r| format!("s_count_R={r}")));
        w.write_record(&header)?;
        let norms = self.norms();
        let residuals = self.cauchy_residuals();
        let eig = self.eigen_moduli();
        let sn = self.s_number_table();
        for (k, y) in self.offsets().iter().enumerate() {
            let mut row = vec![
                y.to_string(),
                norms[k].to_string(),
                if k == 0 {
                    String::new()
                } else {
                    residuals[k - 1].to_string()
                },
            ];
            row.extend(
                r_grid
                    .iter()
                    .map(|&r| count_at_least(&eig[k], r).to_string()),
            );
            row.extend(
                r_grid
                    .iter()
                    .map(|&r| count_at_least(&sn[k], r).to_string()),
            );
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Result of driving `T_{lambda + i y}` toward the real axis.
#[derive(Debug, Clone)]
pub struct LimitVerdict {
    pub converged: bool,
    /// `T` at the smallest offset.
    pub limit_estimate: Option<CMatrix>,
    /// `|T_{k+1} - T_k|`.
    pub cauchy_residuals: Vec<f64>,
    /// `|T_k|`.
    pub norm_trace: Vec<f64>,
    pub offsets: Vec<f64>,
    pub tol: f64,
}

impl LimitVerdict {
    pub fn last_residual(&self) -> f64 {
        self.cauchy_residuals
            .last()
            .copied()
            .unwrap_or(f64::INFINITY)
    }

    /// Re-applies the Cauchy test at a different tolerance.
    pub fn converged_at(&self, tol: f64) -> bool {
        cauchy_converged(
            &self.cauchy_residuals,
            *self.norm_trace.last().unwrap_or(&0.0),
            tol,
        )
    }
}

/// Last three residuals each `<= tol (1 + |T_last|)` and non-increasing.
///
/// "Non-increasing" allows a round-off sized uptick.
fn cauchy_converged(residuals: &[f64], last_norm: f64, tol: f64) -> bool {
    if residuals.len() < 3 {
        return false;
    }
    let tail = &residuals[residuals.len() - 3..];
    let bound = tol * (1.0 + last_norm);
    let noise = 64.0 * f64::EPSILON * (1.0 + last_norm);
    tail.iter().all(|&r| r <= bound) && tail.windows(2).all(|p| p[1] <= p[0] + noise)
}

/// Drives `T_{lambda + i y_k}(H0 + F*JF)` along the path and tests for a norm limit.
pub fn probe_limit(
    model: &RiggedModel,
    j: Option<&CMatrix>,
    path: BoundaryPath,
    tol: f64,
) -> Result<LimitVerdict> {
    if !(tol > 0.0) {
        return Err(SpectralError::InvalidArgument(format!(
            "tol = {tol} must be positive"
        )));
    }
    Ok(BoundaryTrace::evaluate(model, j, path)?.limit_verdict(tol))
}

/// Index value in `[0, +inf]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IndexValue {
    Finite(f64),
    Infinite,
}

impl IndexValue {
    pub fn is_zero(&self) -> bool {
        matches!(self, IndexValue::Finite(x) if *x == 0.0)
    }

    pub fn is_positive(&self) -> bool {
        !self.is_zero()
    }
}

impl Serialize for IndexValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            IndexValue::Finite(x) => s.serialize_f64(*x),
            IndexValue::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for IndexValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(IndexValue::Finite(x)),
            Raw::Text(t) if t == "inf" => Ok(IndexValue::Infinite),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("bad index value {t:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRow {
    pub y: f64,
    pub r: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEstimate {
    pub value: IndexValue,
    pub per_y_counts: Vec<CountRow>,
    /// The largest modulus grew by a factor `>= 1.01` at each of the last four steps.
    pub monotone_growth: bool,
}

fn count_at_least(moduli: &[f64], r: f64) -> usize {
    moduli.iter().filter(|&&m| m >= r).count()
}

/// Tail reading of an L/N-type index from per-offset moduli.
///
/// Bounded traces give 0. With growth, the value is the largest grid `R` whose
/// counts reach `n_max` at the two smallest offsets and never drop along the
/// tail; if that is the largest grid value the index is flagged infinite.
pub fn index_from_moduli(
    offsets: &[f64],
    moduli: &[Vec<f64>],
    r_grid: &[f64],
    n_max: usize,
) -> Result<IndexEstimate> {
    let count = offsets.len();
    if count < MIN_INDEX_SCHEDULE {
        return Err(SpectralError::ScheduleTooShort {
            count,
            required: MIN_INDEX_SCHEDULE,
        });
    }
    if r_grid.is_empty() || r_grid.iter().any(|r| !(*r > 0.0)) {
        return Err(SpectralError::InvalidArgument(
            "r_grid must hold positive values".into(),
        ));
    }
    if r_grid.windows(2).any(|p| p[1] <= p[0]) {
        return Err(SpectralError::InvalidArgument(
            "r_grid must be ascending".into(),
        ));
    }
    if n_max == 0 {
        return Err(SpectralError::InvalidArgument(
            "n_max must be at least 1".into(),
        ));
    }

    let mut per_y_counts = Vec::with_capacity(count * r_grid.len());
    for (y, m) in offsets.iter().zip(moduli) {
        for &r in r_grid {
            per_y_counts.push(CountRow {
                y: *y,
                r,
                count: count_at_least(m, r),
            });
        }
    }

    let growth: Vec<f64> = moduli
        .iter()
        .map(|m| m.iter().copied().fold(0.0, f64::max))
        .collect();
    let monotone_growth = growth[count - TAIL..]
        .windows(2)
        .all(|p| p[1] >= GROWTH_RATIO * p[0] && p[1] - p[0] > GROWTH_FLOOR * (1.0 + p[1]));

    let mut value = IndexValue::Finite(0.0);
    if monotone_growth {
        let tail = &moduli[count - TAIL..];
        let mut qualifying = r_grid.iter().enumerate().filter(|(_, &r)| {
            let counts: Vec<usize> = tail.iter().map(|m| count_at_least(m, r)).collect();
            counts[TAIL - 2..].iter().all(|&c| c >= n_max)
                && counts.windows(2).all(|p| p[1] >= p[0])
        });
        if let Some((idx, &r)) = qualifying.next_back() {
            value = if idx + 1 == r_grid.len() {
                IndexValue::Infinite
            } else {
                IndexValue::Finite(r)
            };
        }
    }
    Ok(IndexEstimate {
        value,
        per_y_counts,
        monotone_growth,
    })
}

/// Eigenvalue-escape index `L` read off the schedule in `path`.
pub fn estimate_l(
    model: &RiggedModel,
    j: Option<&CMatrix>,
    r_grid: &[f64],
    n_max: usize,
    path: BoundaryPath,
) -> Result<IndexEstimate> {
    if path.count < MIN_INDEX_SCHEDULE {
        return Err(SpectralError::ScheduleTooShort {
            count: path.count,
            required: MIN_INDEX_SCHEDULE,
        });
    }
    BoundaryTrace::evaluate(model, j, path)?.l_index(r_grid, n_max)
}

/// s-number-escape index `N` read off the schedule in `path`.
pub fn estimate_n(
    model: &RiggedModel,
    j: Option<&CMatrix>,
    r_grid: &[f64],
    n_max: usize,
    path: BoundaryPath,
) -> Result<IndexEstimate> {
    if path.count < MIN_INDEX_SCHEDULE {
        return Err(SpectralError::ScheduleTooShort {
            count: path.count,
            required: MIN_INDEX_SCHEDULE,
        });
    }
    BoundaryTrace::evaluate(model, j, path)?.n_index(r_grid, n_max)
}

/// s-numbers of `F P F*` for a block model, `P` the eigenprojection at `lambda0`.
pub fn projected_rigging_s_numbers(model: &RiggedModel) -> Result<Vec<f64>> {
    match model.kind() {
        ModelKind::BlockEigenvalue {
            multiplicity,
            dense,
            ..
        } => {
            let fp = dense.f.columns(0, *multiplicity).into_owned();
            Ok(linalg::singular_values(&(&fp * fp.adjoint())))
        }
        _ => Err(SpectralError::UnsupportedModel {
            op: "projected_rigging_s_numbers",
            kind: model.kind_name(),
        }),
    }
}

/// Extrapolated `lim y s_n(T_{lambda0 + i y})` for a block model (1-based `n`).
///
/// Fits `a + b y` to the last five schedule points by least squares and
/// returns `a`.
pub fn blowup_rate(model: &RiggedModel, n: usize, path: BoundaryPath) -> Result<f64> {
    let lambda0 = match model.kind() {
        ModelKind::BlockEigenvalue { lambda0, .. } => *lambda0,
        _ => {
            return Err(SpectralError::UnsupportedModel {
                op: "blowup_rate",
                kind: model.kind_name(),
            })
        }
    };
    if (path.lambda - lambda0).abs() > 1e-12 * (1.0 + lambda0.abs()) {
        return Err(SpectralError::NotAtEigenvalue {
            lambda: path.lambda,
            lambda0,
        });
    }
    let k = model.rigging_dim();
    if n == 0 || n > k {
        return Err(SpectralError::InvalidArgument(format!(
            "n = {n} must lie in 1..={k}"
        )));
    }
    if path.count < BLOWUP_FIT_POINTS {
        return Err(SpectralError::ScheduleTooShort {
            count: path.count,
            required: BLOWUP_FIT_POINTS,
        });
    }
    let trace = BoundaryTrace::evaluate(model, None, path)?;
    let samples: Vec<(f64, f64)> = trace
        .resolvents
        .iter()
        .map(|t| (t.z.im, t.z.im * t.s_numbers()[n - 1]))
        .collect();
    Ok(linear_fit(&samples[samples.len() - BLOWUP_FIT_POINTS..]).0)
}

/// Least-squares `(intercept, slope)`.
fn linear_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (my - slope * mx, slope)
}
