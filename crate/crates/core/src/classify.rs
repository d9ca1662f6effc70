//! Per-point verdicts combining the boundary probe, witness search, indices,
//! resonance curves and subspace diagnostics.
//!
//! A failing stage is recorded in `stage_errors` and leaves its evidence
//! fields empty; it never stops the other stages.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::boundary::{probe_limit, BoundaryTrace, IndexValue, LimitVerdict};
use crate::config::ExperimentConfig;
use crate::error::SpectralError;
use crate::linalg::{self, c, CMatrix};
use crate::model::RiggedModel;
use crate::resonance::{
    line_coupling, oscillation_measure, regular_couplings, vanishing_resonances, CouplingSweep,
    ResonanceTrack, MAX_TRACK_DIM,
};
use crate::subspace::{self, inclusion_defect, ls_null_space, Subspace};

pub const VERDICT_SCHEMA: &str = "spectral-lab/verdict/v1";

/// Oscillation at or above this chordal diameter counts toward non-convergence.
pub const OSCILLATION_EVIDENCE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// `J = s I`.
    SLine {
        s: f64,
    },
    Explicit {
        index: usize,
    },
    Random {
        index: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Status {
    Regular,
    SemiRegular { witness: Witness },
    Inconclusive,
    EssentiallySingularEvidence,
}

impl Status {
    pub fn label(&self) -> &'static str {
        match self {
            Status::Regular => "regular",
            Status::SemiRegular { .. } => "semi_regular",
            Status::Inconclusive => "inconclusive",
            Status::EssentiallySingularEvidence => "essentially_singular_evidence",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub probe_last_residual: Option<f64>,
    pub l_hat: Option<IndexValue>,
    pub l_monotone_growth: Option<bool>,
    pub n_hat: Option<IndexValue>,
    pub n_monotone_growth: Option<bool>,
    pub vanishing_resonance_count: Option<usize>,
    pub vanishing_tol: f64,
    pub oscillation_max: Option<f64>,
    /// Oscillation above the evidence level over the last two tail windows.
    pub r_evidence: Option<bool>,
    pub possible_branching: Option<bool>,
    pub ambiguous_matching: Option<bool>,
    pub upsilon_dim: Option<usize>,
    /// Defect of the nested range intersection inside the null-space estimate.
    pub upsilon_inclusion_defect: Option<f64>,
    pub f_intersection_dim: Option<usize>,
    pub f_intersection_non_nested: Option<bool>,
    pub eigen_multiplicity_at_lambda: Option<usize>,
    /// An eigenvector at `lambda` lies in `ker F`, so no admissible coupling moves it.
    pub persistent_eigenvector: Option<bool>,
}

/// Reported, never used for the status.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConjectureReport {
    /// Defect of the null-space estimate inside the nested range intersection.
    pub reverse_inclusion_defect: Option<f64>,
    /// `<psi, T psi>` at the smallest offset, per configured vector.
    pub quadratic_form_last: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageError {
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRef {
    pub kind: String,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointVerdict {
    pub schema: String,
    pub lambda: f64,
    pub status: Status,
    pub evidence: Evidence,
    pub conjecture_experiments: ConjectureReport,
    pub stage_errors: Vec<StageError>,
    pub traces: Vec<TraceRef>,
}

/// Verdict plus the raw data behind it, for trace export.
#[derive(Debug, Clone)]
pub struct PointAnalysis {
    pub verdict: PointVerdict,
    pub probe: Option<BoundaryTrace>,
    pub track: Option<ResonanceTrack>,
    pub sweep: Option<CouplingSweep>,
    pub upsilon: Option<Subspace>,
    pub f_intersection: Option<Subspace>,
    /// `quadratic_forms[i][k] = <psi_i, T_k psi_i>`.
    pub quadratic_forms: Vec<Vec<Complex64>>,
}

/// Hermitian `K x K` matrices with standard normal entries, scaled to norm 1.
pub fn random_witnesses(k: usize, count: usize, seed: u64) -> Vec<CMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let a = CMatrix::from_fn(k, k, |_, _| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                c(re, im)
            });
            let h = (&a + a.adjoint()) * c(0.5, 0.0);
            let norm = linalg::op_norm(&h);
            if norm > 0.0 {
                h / c(norm, 0.0)
            } else {
                h
            }
        })
        .collect()
}

pub fn classify_point(model: &RiggedModel, lambda: f64, cfg: &ExperimentConfig) -> PointVerdict {
    analyze_point(model, lambda, cfg).verdict
}

struct Recorder(Vec<StageError>);

impl Recorder {
    fn take<T>(&mut self, stage: &str, r: Result<T, SpectralError>) -> Option<T> {
        r.map_err(|e| {
            self.0.push(StageError {
                stage: stage.to_string(),
                message: e.to_string(),
            })
        })
        .ok()
    }
}

pub fn analyze_point(model: &RiggedModel, lambda: f64, cfg: &ExperimentConfig) -> PointAnalysis {
    let tol = cfg.tolerances;
    let path = cfg.path.at(lambda);
    let k = model.rigging_dim();
    let mut rec = Recorder(Vec::new());
    let mut ev = Evidence {
        vanishing_tol: tol.vanishing,
        ..Evidence::default()
    };

    let probe = rec.take("probe", BoundaryTrace::evaluate(model, None, path));
    let limit = probe.as_ref().map(|t| t.limit_verdict(tol.probe));
    ev.probe_last_residual = limit.as_ref().map(LimitVerdict::last_residual);
    let regular = limit.as_ref().is_some_and(|v| v.converged);

    let mut sweep = None;
    let mut found: Option<(Witness, CMatrix, LimitVerdict)> = None;
    if !regular {
        sweep = rec.take(
            "coupling_sweep",
            regular_couplings(model, lambda, &cfg.s_grid, path, tol.probe),
        );
        if let Some(sw) = &sweep {
            if let Some(i) =
                (0..sw.s_grid.len()).find(|&i| sw.s_grid[i] != 0.0 && sw.regular_flags[i])
            {
                let s = sw.s_grid[i];
                let j = line_coupling(k, s);
                if let Some(v) = rec.take(
                    "witness_probe",
                    probe_limit(model, Some(&j), path, tol.probe),
                ) {
                    found = Some((Witness::SLine { s }, j, v));
                }
            }
        }
        let candidates = cfg
            .explicit_witnesses
            .iter()
            .cloned()
            .enumerate()
            .map(|(index, j)| (Witness::Explicit { index }, j))
            .chain(
                random_witnesses(k, cfg.random_count, cfg.seed)
                    .into_iter()
                    .enumerate()
                    .map(|(index, j)| {
                        (
                            Witness::Random {
                                index,
                                seed: cfg.seed,
                            },
                            j,
                        )
                    }),
            );
        for (w, j) in candidates {
            if found.is_some() {
                break;
            }
            if let Some(v) = rec.take(
                "witness_probe",
                probe_limit(model, Some(&j), path, tol.probe),
            ) {
                if v.converged {
                    found = Some((w, j, v));
                }
            }
        }
    }

    let mut upsilon = None;
    if let Some((_, j, v)) = &found {
        upsilon = rec.take("upsilon", ls_null_space(v, j, tol.null_space));
        ev.upsilon_dim = upsilon.as_ref().map(|u| u.dim);
    }

    let mut track = None;
    if let Some(trace) = &probe {
        if let Some(l) = rec.take("l_index", trace.l_index(&cfg.r_grid, cfg.n_max)) {
            ev.l_hat = Some(l.value);
            ev.l_monotone_growth = Some(l.monotone_growth);
        }
        if let Some(n) = rec.take("n_index", trace.n_index(&cfg.r_grid, cfg.n_max)) {
            ev.n_hat = Some(n.value);
            ev.n_monotone_growth = Some(n.monotone_growth);
        }
        if k <= MAX_TRACK_DIM {
            track = rec.take("resonance_track", ResonanceTrack::from_trace(trace));
        } else {
            rec.0.push(StageError {
                stage: "resonance_track".into(),
                message: format!("K = {k} exceeds {MAX_TRACK_DIM}"),
            });
        }
    }
    if let Some(t) = &track {
        ev.vanishing_resonance_count = Some(vanishing_resonances(t, tol.vanishing).len());
        ev.possible_branching = Some(!t.possible_branching.is_empty());
        ev.ambiguous_matching = Some(!t.ambiguous_steps.is_empty());
        if let Some(osc) = rec.take("oscillation", oscillation_measure(t, cfg.oscillation_tail)) {
            ev.oscillation_max = Some(osc.iter().copied().fold(0.0, f64::max));
            ev.r_evidence = Some(previous_window_oscillates(t, cfg.oscillation_tail, &osc));
        }
    }

    let mut f_int = None;
    if model.dense().is_some() {
        if let Some(m) = rec.take(
            "eigen_multiplicity",
            subspace::eigen_multiplicity(model, lambda),
        ) {
            ev.eigen_multiplicity_at_lambda = Some(m);
            if let Some(img) = rec.take(
                "eigenvector_image",
                subspace::eigenvector_image(model, lambda),
            ) {
                ev.persistent_eigenvector = Some(img.dim < m);
            }
        }
        if let Some(ni) = rec.take(
            "f_intersection",
            subspace::f_intersection(model, lambda, tol.intersection),
        ) {
            ev.f_intersection_dim = Some(ni.subspace.dim);
            ev.f_intersection_non_nested = Some(ni.non_nested);
            f_int = Some(ni.subspace);
        }
    }

    let mut conjecture = ConjectureReport::default();
    if let (Some(u), Some(fi)) = (&upsilon, &f_int) {
        ev.upsilon_inclusion_defect = Some(inclusion_defect(fi, u));
        conjecture.reverse_inclusion_defect = Some(inclusion_defect(u, fi));
    }
    let quadratic_forms: Vec<Vec<Complex64>> = match &probe {
        Some(trace) => cfg
            .psi
            .iter()
            .map(|psi| {
                trace
                    .resolvents
                    .iter()
                    .map(|t| psi.dotc(&(&t.t * psi)))
                    .collect()
            })
            .collect(),
        None => Vec::new(),
    };
    conjecture.quadratic_form_last = quadratic_forms
        .iter()
        .filter_map(|q| q.last().map(|z| [z.re, z.im]))
        .collect();

    let status = if regular {
        Status::Regular
    } else if let Some((w, _, _)) = &found {
        Status::SemiRegular { witness: w.clone() }
    } else if singular_evidence(&ev, k) {
        Status::EssentiallySingularEvidence
    } else {
        Status::Inconclusive
    };

    PointAnalysis {
        verdict: PointVerdict {
            schema: VERDICT_SCHEMA.to_string(),
            lambda,
            status,
            evidence: ev,
            conjecture_experiments: conjecture,
            stage_errors: rec.0,
            traces: Vec::new(),
        },
        probe,
        track,
        sweep,
        upsilon,
        f_intersection: f_int,
        quadratic_forms,
    }
}

/// Some curve oscillates above the evidence level in both the last window and
/// the window before it.
fn previous_window_oscillates(track: &ResonanceTrack, tail: usize, last: &[f64]) -> bool {
    if 2 * tail > track.len() {
        return false;
    }
    let end = track.len() - tail;
    track.curves.iter().zip(last).any(|(curve, &d)| {
        d >= OSCILLATION_EVIDENCE
            && crate::sphere::chordal_diameter(&curve[end - tail..end]) >= OSCILLATION_EVIDENCE
    })
}

/// Escape indices with growth, a large range intersection, or a persistent eigenvector.
fn singular_evidence(ev: &Evidence, k: usize) -> bool {
    let l = ev.l_hat.is_some_and(|v| v.is_positive()) && ev.l_monotone_growth == Some(true);
    let n = ev.n_hat.is_some_and(|v| v.is_positive());
    let f = ev.f_intersection_dim.is_some_and(|d| d > 0 && 2 * d >= k);
    l || n || f || ev.persistent_eigenvector == Some(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::real_diagonal;
    use crate::model::{make_model, ModelDescription};
    use std::path::Path;

    fn config_for(model_json: &str, lambda: f64) -> ExperimentConfig {
        let text = format!(
            r#"{{"schema": "spectral-lab/experiment/v1", "model": {model_json},
                "lambda_grid": [{lambda}], "witnesses": {{"random_count": 2, "seed": 11}}}}"#
        );
        ExperimentConfig::from_json(&text, Path::new(".")).unwrap()
    }

    const DIAG12: &str = r#"{"kind": "finite_matrix",
        "h0": [[[1,0],[0,0]],[[0,0],[2,0]]], "f": [[[1,0],[0,0]],[[0,0],[1,0]]]}"#;

    #[test]
    fn resolvent_set_point_is_regular() {
        let cfg = config_for(DIAG12, 5.0);
        let v = classify_point(&cfg.model, 5.0, &cfg);
        assert_eq!(v.status, Status::Regular);
        assert_eq!(v.evidence.l_hat, Some(IndexValue::Finite(0.0)));
        assert_eq!(v.evidence.n_hat, Some(IndexValue::Finite(0.0)));
        assert_eq!(v.evidence.vanishing_resonance_count, Some(0));
        assert_eq!(v.evidence.eigen_multiplicity_at_lambda, Some(0));
        assert!(v.stage_errors.is_empty());
    }

    #[test]
    fn simple_eigenvalue_is_semi_regular_on_the_line() {
        let cfg = config_for(DIAG12, 1.0);
        let v = classify_point(&cfg.model, 1.0, &cfg);
        assert!(matches!(
            v.status,
            Status::SemiRegular {
                witness: Witness::SLine { .. }
            }
        ));
        assert_eq!(v.evidence.upsilon_dim, Some(1));
        assert_eq!(v.evidence.vanishing_resonance_count, Some(1));
        assert!(v.evidence.upsilon_inclusion_defect.unwrap() < 1e-6);
    }

    #[test]
    fn scalar_operator_shows_singular_evidence() {
        let weights: Vec<String> = (1..=50).map(|k| format!("{}", 1.0 / k as f64)).collect();
        let model = format!(
            r#"{{"kind": "scalar_compact", "lambda0": 0.0, "weights": [{}]}}"#,
            weights.join(",")
        );
        let cfg = config_for(&model, 0.0);
        let v = classify_point(&cfg.model, 0.0, &cfg);
        assert_eq!(v.status, Status::EssentiallySingularEvidence);
        assert_eq!(v.evidence.l_hat, Some(IndexValue::Infinite));
        assert_eq!(v.evidence.n_hat, Some(IndexValue::Infinite));
    }

    #[test]
    fn random_witnesses_are_hermitian_unit_and_seeded() {
        let a = random_witnesses(3, 2, 7);
        let b = random_witnesses(3, 2, 7);
        assert_eq!(a, b);
        for j in &a {
            assert!(linalg::asymmetry(j) == 0.0);
            assert!((linalg::op_norm(j) - 1.0).abs() < 1e-12);
        }
        assert_ne!(random_witnesses(3, 1, 8)[0], a[0]);
    }

    #[test]
    fn persistent_eigenvector_counts_as_evidence() {
        // eigenvector e2 at 0 is invisible to F but e1 at 0 is visible
        let m = make_model(ModelDescription::FiniteMatrix {
            h0: real_diagonal(&[0.0, 0.0]),
            f: CMatrix::from_row_slice(1, 2, &[c(1.0, 0.0), c(0.0, 0.0)]),
        })
        .unwrap();
        let text = r#"{"schema": "spectral-lab/experiment/v1",
            "model": {"kind": "finite_matrix", "h0": [[[0,0],[0,0]],[[0,0],[0,0]]], "f": [[[1,0],[0,0]]]},
            "lambda_grid": [0.0], "s_grid": [0.0], "witnesses": {"random_count": 0}}"#;
        let cfg = ExperimentConfig::from_json(text, Path::new(".")).unwrap();
        let v = classify_point(&m, 0.0, &cfg);
        assert_eq!(v.evidence.eigen_multiplicity_at_lambda, Some(2));
        assert_eq!(v.evidence.persistent_eigenvector, Some(true));
        assert_eq!(v.status, Status::EssentiallySingularEvidence);
    }

    #[test]
    fn status_json_shape() {
        let s = Status::SemiRegular {
            witness: Witness::SLine { s: 0.5 },
        };
        assert_eq!(
            serde_json::to_string(&s).unwrap(),
            r#"{"kind":"semi_regular","witness":{"kind":"s_line","s":0.5}}"#
        );
    }
}
