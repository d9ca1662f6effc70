#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use spectral_lab::assignment::solve_assignment;
use spectral_lab::linalg::{c, CMatrix};
use spectral_lab::{make_model, ModelDescription, RiggedModel};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re, im)
    })
}

pub fn hermitian(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let a = gaussian(rng, n, n);
    (&a + a.adjoint()) * c(0.5, 0.0)
}

/// Random unitary from the QR factors of a Gaussian matrix.
pub fn unitary(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    gaussian(rng, n, n).qr().q()
}

/// `U diag(d) U*` with a random unitary `U`.
pub fn with_spectrum(rng: &mut ChaCha8Rng, d: &[f64]) -> (CMatrix, CMatrix) {
    let u = unitary(rng, d.len());
    let h = &u * real_diag(d) * u.adjoint();
    ((&h + h.adjoint()) * c(0.5, 0.0), u)
}

pub fn real_diag(d: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        d.len(),
        d.iter().map(|&x| c(x, 0.0)),
    ))
}

/// Random dense model with `K = k` and `N = k + extra`.
pub fn random_model(rng: &mut ChaCha8Rng, k: usize, extra: usize) -> RiggedModel {
    let n = k + extra;
    make_model(ModelDescription::FiniteMatrix {
        h0: hermitian(rng, n),
        f: gaussian(rng, k, n),
    })
    .expect("random model")
}

pub fn dense(model: &RiggedModel) -> (CMatrix, CMatrix) {
    let d = model.dense().expect("dense model");
    (d.h0.clone(), d.f.clone())
}

/// `F V diag(1/(e - z)) V* F*` from an eigendecomposition of `H`.
pub fn resolvent_oracle(h: &CMatrix, f: &CMatrix, z: Complex64) -> CMatrix {
    let eig = h.clone().symmetric_eigen();
    let n = h.nrows();
    let d = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        n,
        eig.eigenvalues.iter().map(|&e| (c(e, 0.0) - z).inv()),
    ));
    f * &eig.eigenvectors * d * eig.eigenvectors.adjoint() * f.adjoint()
}

/// Largest distance between two multisets after optimal matching.
pub fn matched_max_error(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let cost: Vec<Vec<f64>> = a
        .iter()
        .map(|x| b.iter().map(|y| (x - y).norm()).collect())
        .collect();
    let m = solve_assignment(&cost, 0.0);
    m.row_to_col
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[i][j])
        .fold(0.0, f64::max)
}

pub fn op_norm(m: &CMatrix) -> f64 {
    spectral_lab::linalg::op_norm(m)
}

pub fn real(m: &DMatrix<f64>) -> CMatrix {
    m.map(|x| c(x, 0.0))
}
