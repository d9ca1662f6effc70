//! Coupling resonances `r_j(z) = -1/mu_j(T_z(H0))` of the line `H0 + s F*F`,
//! their trajectories toward the real axis, and the coupling sweep.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assignment::solve_assignment;
use crate::boundary::{probe_limit, BoundaryPath, BoundaryTrace};
use crate::error::{Result, SpectralError};
use crate::linalg::{self, c, CMatrix};
use crate::model::RiggedModel;
use crate::resolvent::sandwiched_resolvent;
use crate::sphere::{chordal_diameter, chordal_distance, ExtPoint};

/// Eigenvalues below this fraction of `s_1(T)` count as zero.
pub const ZERO_EIGENVALUE_REL: f64 = 1e-14;

/// Largest rigging dimension the exact matcher accepts.
pub const MAX_TRACK_DIM: usize = 64;

/// Assignments within this cost of the optimum make a step ambiguous.
pub const MATCH_TIE_TOL: f64 = 1e-12;

/// Steps costing more than this multiple of the median of their neighbours are flagged.
pub const BRANCHING_FACTOR: f64 = 10.0;

/// Resonances from an already evaluated `T_z(H0)`.
pub fn resonances_from_t(t: &CMatrix) -> Vec<ExtPoint> {
    let s1 = linalg::op_norm(t);
    linalg::eigenvalues_general(t)
        .into_iter()
        .map(|mu| {
            if mu.norm() <= ZERO_EIGENVALUE_REL * s1 {
                ExtPoint::Infinity
            } else {
                ExtPoint::neg_reciprocal(mu)
            }
        })
        .collect()
}

/// The `K` coupling resonances at a non-real `z`.
pub fn resonances_at(model: &RiggedModel, z: Complex64) -> Result<Vec<ExtPoint>> {
    Ok(resonances_from_t(&sandwiched_resolvent(model, None, z)?.t))
}

/// `J = s I_K`, the coupling that turns `H0 + F*JF` into `H0 + s F*F`.
pub fn line_coupling(k: usize, s: f64) -> CMatrix {
    linalg::identity(k) * c(s, 0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonanceTrack {
    pub lambda: f64,
    pub y_schedule: Vec<f64>,
    /// `curves[j][k]` is curve `j` at offset `y_schedule[k]`.
    pub curves: Vec<Vec<ExtPoint>>,
    /// Cost of the matching into offset `k`; zero at `k = 0`.
    pub matching_cost: Vec<f64>,
    pub ambiguous_steps: Vec<usize>,
    /// Steps whose cost exceeds ten times the median cost of the neighbouring steps.
    pub possible_branching: Vec<usize>,
}

impl ResonanceTrack {
    pub fn len(&self) -> usize {
        self.y_schedule.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y_schedule.is_empty()
    }

    pub fn from_trace(trace: &BoundaryTrace) -> Result<Self> {
        let sets = trace
            .resolvents
            .iter()
            .map(|t| resonances_from_t(&t.t))
            .collect();
        track_from_sets(trace.path.lambda, trace.offsets(), sets)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["y", "j", "re", "im", "at_infinity", "matching_cost"])?;
        for (k, y) in self.y_schedule.iter().enumerate() {
            for (j, curve) in self.curves.iter().enumerate() {
                let (re, im) = curve[k]
                    .finite()
                    .map_or((String::new(), String::new()), |r| {
                        (r.re.to_string(), r.im.to_string())
                    });
                w.write_record([
                    y.to_string(),
                    j.to_string(),
                    re,
                    im,
                    curve[k].is_infinite().to_string(),
                    self.matching_cost[k].to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Links per-offset resonance sets into curves by minimal chordal matching.
pub fn track_from_sets(
    lambda: f64,
    y_schedule: Vec<f64>,
    sets: Vec<Vec<ExtPoint>>,
) -> Result<ResonanceTrack> {
    if sets.len() != y_schedule.len() || sets.is_empty() {
        return Err(SpectralError::DimensionMismatch(format!(
            "{} resonance sets for {} offsets",
            sets.len(),
            y_schedule.len()
        )));
    }
    let k = sets[0].len();
    if k > MAX_TRACK_DIM {
        return Err(SpectralError::InvalidArgument(format!(
            "tracking needs K <= {MAX_TRACK_DIM}, got {k}"
        )));
    }
    if sets.iter().any(|s| s.len() != k) {
        return Err(SpectralError::DimensionMismatch(
            "resonance sets differ in size".into(),
        ));
    }

    let mut curves: Vec<Vec<ExtPoint>> = sets[0].iter().map(|&p| vec![p]).collect();
    let mut matching_cost = vec![0.0];
    let mut ambiguous_steps = Vec::new();
    for (step, next) in sets.iter().enumerate().skip(1) {
        let cost: Vec<Vec<f64>> = curves
            .iter()
            .map(|curve| {
                let last = curve[step - 1];
                next.iter().map(|&p| chordal_distance(last, p)).collect()
            })
            .collect();
        let a = solve_assignment(&cost, MATCH_TIE_TOL);
        if a.ambiguous {
            ambiguous_steps.push(step);
        }
        for (curve, &col) in curves.iter_mut().zip(&a.row_to_col) {
            curve.push(next[col]);
        }
        matching_cost.push(a.cost);
    }

    let possible_branching = (1..matching_cost.len())
        .filter(|&step| {
            let local = local_median(&matching_cost[1..], step - 1);
            matching_cost[step] > 1e-12 && matching_cost[step] > BRANCHING_FACTOR * local
        })
        .collect();

    Ok(ResonanceTrack {
        lambda,
        y_schedule,
        curves,
        matching_cost,
        ambiguous_steps,
        possible_branching,
    })
}

/// Median of the costs within two steps of `at`, excluding `at` itself.
///
/// Costs shrink geometrically along a converging schedule, so a global median
/// would flag every early step.
fn local_median(costs: &[f64], at: usize) -> f64 {
    let lo = at.saturating_sub(2);
    let hi = (at + 3).min(costs.len());
    let mut near: Vec<f64> = (lo..hi).filter(|&i| i != at).map(|i| costs[i]).collect();
    if near.is_empty() {
        return f64::INFINITY;
    }
    near.sort_by(f64::total_cmp);
    near[near.len() / 2]
}

/// Resonance curves of `(H0, F*F)` along the schedule.
pub fn trace_resonances(model: &RiggedModel, path: BoundaryPath) -> Result<ResonanceTrack> {
    let k = model.rigging_dim();
    if k > MAX_TRACK_DIM {
        return Err(SpectralError::InvalidArgument(format!(
            "tracking needs K <= {MAX_TRACK_DIM}, got {k}"
        )));
    }
    ResonanceTrack::from_trace(&BoundaryTrace::evaluate(model, None, path)?)
}

/// Curves whose last three points lie within `tol` of 0 with non-increasing modulus.
pub fn vanishing_resonances(track: &ResonanceTrack, tol: f64) -> Vec<usize> {
    if track.len() < 3 {
        return Vec::new();
    }
    track
        .curves
        .iter()
        .enumerate()
        .filter(|(_, curve)| {
            let tail: Vec<f64> = curve[curve.len() - 3..]
                .iter()
                .map(ExtPoint::modulus)
                .collect();
            tail.iter().all(|&m| m <= tol) && tail.windows(2).all(|p| p[1] <= p[0] * (1.0 + 1e-12))
        })
        .map(|(j, _)| j)
        .collect()
}

/// Chordal diameter of the last `tail` points of each curve.
pub fn oscillation_measure(track: &ResonanceTrack, tail: usize) -> Result<Vec<f64>> {
    if tail == 0 || tail > track.len() {
        return Err(SpectralError::InvalidArgument(format!(
            "tail = {tail} must lie in 1..={}",
            track.len()
        )));
    }
    Ok(track
        .curves
        .iter()
        .map(|curve| chordal_diameter(&curve[curve.len() - tail..]))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingSweep {
    pub lambda: f64,
    pub s_grid: Vec<f64>,
    pub regular_flags: Vec<bool>,
    /// Last Cauchy residual of each probe; `None` where the probe failed.
    pub witness: Vec<Option<f64>>,
    pub errors: Vec<Option<String>>,
}

impl CouplingSweep {
    pub fn irregular_cells(&self) -> Vec<usize> {
        (0..self.s_grid.len())
            .filter(|&i| !self.regular_flags[i])
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["s", "regular", "witness", "error"])?;
        for i in 0..self.s_grid.len() {
            w.write_record([
                self.s_grid[i].to_string(),
                self.regular_flags[i].to_string(),
                self.witness[i].map_or(String::new(), |x| x.to_string()),
                self.errors[i].clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Probes `H0 + s F*F` at `lambda` for every `s` on the grid.
///
/// A failing probe marks its cell irregular and records the error; the rest of
/// the sweep continues.
pub fn regular_couplings(
    model: &RiggedModel,
    lambda: f64,
    s_grid: &[f64],
    path: BoundaryPath,
    tol: f64,
) -> Result<CouplingSweep> {
    if s_grid.iter().any(|s| !s.is_finite()) {
        return Err(SpectralError::InvalidArgument(
            "s_grid must be finite".into(),
        ));
    }
    let path = path.at(lambda);
    path.validate()?;
    let k = model.rigging_dim();
    let outcomes: Vec<Result<(bool, f64)>> = s_grid
        .par_iter()
        .map(|&s| {
            let v = probe_limit(model, Some(&line_coupling(k, s)), path, tol)?;
            Ok((v.converged, v.last_residual()))
        })
        .collect();
    let mut sweep = CouplingSweep {
        lambda,
        s_grid: s_grid.to_vec(),
        regular_flags: Vec::with_capacity(s_grid.len()),
        witness: Vec::with_capacity(s_grid.len()),
        errors: Vec::with_capacity(s_grid.len()),
    };
    for outcome in outcomes {
        match outcome {
            Ok((flag, residual)) => {
                sweep.regular_flags.push(flag);
                sweep.witness.push(Some(residual));
                sweep.errors.push(None);
            }
            Err(e) => {
                sweep.regular_flags.push(false);
                sweep.witness.push(None);
                sweep.errors.push(Some(e.to_string()));
            }
        }
    }
    Ok(sweep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::real_diagonal;
    use crate::model::{make_model, ModelDescription};

    fn diag_model(d: &[f64]) -> RiggedModel {
        make_model(ModelDescription::FiniteMatrix {
            h0: real_diagonal(d),
            f: CMatrix::identity(d.len(), d.len()),
        })
        .unwrap()
    }

    fn sorted(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }

    #[test]
    fn scalar_resonance_is_i() {
        let m = make_model(ModelDescription::FiniteMatrix {
            h0: real_diagonal(&[0.0]),
            f: CMatrix::identity(1, 1),
        })
        .unwrap();
        let r = resonances_at(&m, c(0.0, 1.0)).unwrap();
        assert!((r[0].finite().unwrap() - c(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn identity_rigging_gives_shifted_spectrum() {
        let m = diag_model(&[1.0, 2.0]);
        let z = c(5.0, 0.1);
        let r = sorted(
            resonances_at(&m, z)
                .unwrap()
                .iter()
                .map(|p| p.finite().unwrap())
                .collect(),
        );
        assert!((r[0] - c(3.0, 0.1)).norm() < 1e-12);
        assert!((r[1] - c(4.0, 0.1)).norm() < 1e-12);
    }

    #[test]
    fn zero_eigenvalue_maps_to_infinity() {
        let t = real_diagonal(&[1.0, 0.0]);
        let r = resonances_from_t(&t);
        assert_eq!(r.iter().filter(|p| p.is_infinite()).count(), 1);
    }

    #[test]
    fn diagonal_curves_are_vertical() {
        let m = diag_model(&[-1.0, 0.0, 2.0]);
        let path = BoundaryPath::new(0.0, 0.1, 0.5, 12).unwrap();
        let track = trace_resonances(&m, path).unwrap();
        assert!(track.ambiguous_steps.is_empty());
        for curve in &track.curves {
            let x0 = curve[0].finite().unwrap().re;
            for (p, y) in curve.iter().zip(&track.y_schedule) {
                let r = p.finite().unwrap();
                assert!((r.re - x0).abs() < 1e-10 && (r.im - y).abs() < 1e-10);
            }
        }
        assert_eq!(
            vanishing_resonances(&track, 1e-3),
            vec![track
                .curves
                .iter()
                .position(|c| c[0].finite().unwrap().re.abs() < 1e-12)
                .unwrap()]
        );
    }

    #[test]
    fn resolvent_set_has_no_vanishing_curve() {
        let m = diag_model(&[1.0, 2.0]);
        let track = trace_resonances(&m, BoundaryPath::default_at(5.0)).unwrap();
        assert!(vanishing_resonances(&track, 1e-6).is_empty());
    }

    #[test]
    fn vertical_curve_oscillation_is_exact() {
        let ys: Vec<f64> = (0..8).map(|k| 0.5f64.powi(k)).collect();
        let sets = ys
            .iter()
            .map(|&y| vec![ExtPoint::Finite(c(0.0, y))])
            .collect();
        let track = track_from_sets(0.0, ys.clone(), sets).unwrap();
        let d = oscillation_measure(&track, 3).unwrap()[0];
        let expect = chordal_distance(
            ExtPoint::Finite(c(0.0, ys[7])),
            ExtPoint::Finite(c(0.0, ys[5])),
        );
        assert!((d - expect).abs() < 1e-15);
        assert!(oscillation_measure(&track, 9).is_err());
    }

    #[test]
    fn branching_flags_spikes_not_geometric_decay() {
        let ys: Vec<f64> = (0..12).map(|k| 0.5f64.powi(k)).collect();
        let smooth = ys
            .iter()
            .map(|&y| vec![ExtPoint::Finite(c(0.0, y))])
            .collect();
        let track = track_from_sets(0.0, ys.clone(), smooth).unwrap();
        assert!(track.possible_branching.is_empty());
        let jump = ys
            .iter()
            .enumerate()
            .map(|(k, &y)| vec![ExtPoint::Finite(c(if k >= 6 { 1.0 } else { 0.0 }, y))])
            .collect();
        let track = track_from_sets(0.0, ys, jump).unwrap();
        assert_eq!(track.possible_branching, vec![6]);
    }

    #[test]
    fn shifted_diagonal_sweep() {
        let m = diag_model(&[1.0, 2.0]);
        let grid = [-0.5, 0.0, 0.5];
        let sweep = regular_couplings(&m, 1.0, &grid, BoundaryPath::default_at(1.0), 1e-8).unwrap();
        assert_eq!(sweep.regular_flags, vec![true, false, true]);
        assert_eq!(sweep.irregular_cells(), vec![1]);
    }
}
