//! Seeded random-instance generators shared by the integration suites.

#![allow(dead_code)]

use dfdl::Dictionary;
use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn gaussian_vector(dim: usize, rng: &mut ChaCha8Rng) -> Array1<f64> {
    let mut v: Array1<f64> = Array1::zeros(dim);
    for x in v.iter_mut() {
        *x = rng.sample(StandardNormal);
    }
    v
}

pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let mut m: Array2<f64> = Array2::zeros((rows, cols));
    for x in m.iter_mut() {
        *x = rng.sample(StandardNormal);
    }
    m
}

/// Random dictionary with unit-norm Gaussian atoms.
pub fn random_dictionary(dim: usize, atoms: usize, rng: &mut ChaCha8Rng) -> Dictionary {
    let mut m = Array2::zeros((dim, atoms));
    for j in 0..atoms {
        loop {
            let col = gaussian_vector(dim, rng);
            let norm = col.dot(&col).sqrt();
            if norm > 1e-6 {
                m.column_mut(j).assign(&(col / norm));
                break;
            }
        }
    }
    Dictionary::new(m).expect("random dictionary is valid")
}

/// Orthonormal columns via Gram-Schmidt over Gaussian draws.
pub fn orthonormal_columns(dim: usize, count: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    assert!(count <= dim, "cannot fit {count} orthonormal columns in dimension {dim}");
    let mut cols: Vec<Array1<f64>> = Vec::with_capacity(count);
    while cols.len() < count {
        let mut col = gaussian_vector(dim, rng);
        for _ in 0..2 {
            for prev in &cols {
                let proj = col.dot(prev);
                col = col - prev * proj;
            }
        }
        let norm = col.dot(&col).sqrt();
        if norm > 1e-6 {
            cols.push(col / norm);
        }
    }
    let mut m = Array2::zeros((dim, count));
    for (j, col) in cols.iter().enumerate() {
        m.column_mut(j).assign(col);
    }
    m
}

pub fn orthonormal_dictionary(dim: usize, atoms: usize, rng: &mut ChaCha8Rng) -> Dictionary {
    Dictionary::new(orthonormal_columns(dim, atoms, rng)).expect("orthonormal dictionary is valid")
}

/// Random symmetric matrix (G + G^T)/2 plus `shift` on the diagonal.
pub fn random_symmetric(n: usize, shift: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let g = gaussian_matrix(n, n, rng);
    let mut sym = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            sym[(i, j)] = (g[(i, j)] + g[(j, i)]) / 2.0;
        }
        sym[(i, i)] += shift;
    }
    sym
}

/// Random strictly positive definite matrix G^T G / n + ridge I.
pub fn random_spd(n: usize, ridge: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let g = gaussian_matrix(n, n, rng);
    let mut spd = g.t().dot(&g) / n as f64;
    for i in 0..n {
        spd[(i, i)] += ridge;
    }
    spd
}

/// Sparsity-budgeted random codes: `nnz` Gaussian entries per column at
/// distinct random rows.
pub fn random_codes(atoms: usize, samples: usize, nnz: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let mut m = Array2::zeros((atoms, samples));
    for j in 0..samples {
        let rows = rand::seq::index::sample(rng, atoms, nnz.min(atoms));
        for row in rows.iter() {
            m[(row, j)] = rng.sample(StandardNormal);
        }
    }
    m
}

/// Uniform draw from [lo, hi).
pub fn uniform(lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> f64 {
    rng.random_range(lo..hi)
}
