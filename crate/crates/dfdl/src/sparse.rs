//! Sparse coding: batch greedy OMP for training-time codes and an
//! l1-regularized least-squares solver for classification-time codes.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// OMP stops early once the column residual drops below this norm, even if
/// fewer atoms than the sparsity budget were selected. Keeps nearly singular
/// active sets out of the least-squares solves.
pub const OMP_RESIDUAL_STOP: f64 = 1e-10;

/// Stationarity tolerance for the l1 solver: every returned code satisfies
/// the lasso subgradient conditions to this accuracy.
pub const LASSO_KKT_TOL: f64 = 1e-6;

/// Sweep budget for the cyclic coordinate-descent l1 solver.
pub const LASSO_MAX_SWEEPS: usize = 10_000;

/// Atom norms may exceed 1 by at most this much (floating-point slack).
pub const ATOM_NORM_SLACK: f64 = 1e-9;

/// A matrix of learned atoms, one atom per column. Every atom has Euclidean
/// norm in (0, 1 + 1e-9]: no zero atoms, norms capped at one.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    atoms: Array2<f64>,
}

impl Dictionary {
    pub fn new(atoms: Array2<f64>) -> Result<Self> {
        let (d, k) = atoms.dim();
        if d == 0 || k == 0 {
            return Err(Error::InvalidInput(format!(
                "dictionary must be nonempty, got {d}x{k}"
            )));
        }
        for (j, col) in atoms.axis_iter(Axis(1)).enumerate() {
            let mut sq = 0.0;
            for &v in col.iter() {
                if !v.is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "atom {j} contains a non-finite entry"
                    )));
                }
                sq += v * v;
            }
            let norm = sq.sqrt();
            if norm == 0.0 {
                return Err(Error::InvalidInput(format!("atom {j} has zero norm")));
            }
            if norm > 1.0 + ATOM_NORM_SLACK {
                return Err(Error::InvalidInput(format!(
                    "atom {j} has norm {norm}, atoms are capped at unit norm"
                )));
            }
        }
        Ok(Self { atoms })
    }

    /// Sample dimension (rows).
    pub fn dim(&self) -> usize {
        self.atoms.nrows()
    }

    /// Number of atoms (columns).
    pub fn atom_count(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn atoms(&self) -> &Array2<f64> {
        &self.atoms
    }

    pub fn atom(&self, j: usize) -> ArrayView1<'_, f64> {
        self.atoms.column(j)
    }

    /// Horizontal concatenation of several dictionaries over a shared
    /// sample dimension.
    pub fn concat(parts: &[&Dictionary]) -> Result<Dictionary> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidInput("cannot concatenate zero dictionaries".into()))?;
        let d = first.dim();
        if parts.iter().any(|p| p.dim() != d) {
            return Err(Error::InvalidInput(
                "dictionaries to concatenate must share the sample dimension".into(),
            ));
        }
        let k_total: usize = parts.iter().map(|p| p.atom_count()).sum();
        let mut atoms = Array2::zeros((d, k_total));
        let mut offset = 0;
        for part in parts {
            let k = part.atom_count();
            atoms
                .slice_mut(ndarray::s![.., offset..offset + k])
                .assign(&part.atoms);
            offset += k;
        }
        Dictionary::new(atoms)
    }
}

/// Coefficient matrix with at most `sparsity_level` nonzeros per column.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCodes {
    coefficients: Array2<f64>,
    sparsity_level: usize,
}

impl SparseCodes {
    pub fn new(coefficients: Array2<f64>, sparsity_level: usize) -> Result<Self> {
        let (k, _) = coefficients.dim();
        if sparsity_level == 0 || sparsity_level > k {
            return Err(Error::InvalidInput(format!(
                "sparsity level {sparsity_level} out of range for {k} atoms"
            )));
        }
        for (j, col) in coefficients.axis_iter(Axis(1)).enumerate() {
            let mut nnz = 0usize;
            for &v in col.iter() {
                if !v.is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "code column {j} contains a non-finite entry"
                    )));
                }
                if v != 0.0 {
                    nnz += 1;
                }
            }
            if nnz > sparsity_level {
                return Err(Error::InvalidInput(format!(
                    "code column {j} has {nnz} nonzeros, budget is {sparsity_level}"
                )));
            }
        }
        Ok(Self {
            coefficients,
            sparsity_level,
        })
    }

    pub fn coefficients(&self) -> &Array2<f64> {
        &self.coefficients
    }

    pub fn sparsity_level(&self) -> usize {
        self.sparsity_level
    }

    /// Number of coefficient rows (atoms).
    pub fn atom_count(&self) -> usize {
        self.coefficients.nrows()
    }

    /// Number of coded samples (columns).
    pub fn sample_count(&self) -> usize {
        self.coefficients.ncols()
    }

    /// Split the coded columns at `at` into two code sets sharing the
    /// sparsity level.
    pub fn split_columns(&self, at: usize) -> Result<(SparseCodes, SparseCodes)> {
        let n = self.sample_count();
        if at == 0 || at >= n {
            return Err(Error::InvalidInput(format!(
                "split point {at} out of range for {n} columns"
            )));
        }
        let left = self.coefficients.slice(ndarray::s![.., ..at]).to_owned();
        let right = self.coefficients.slice(ndarray::s![.., at..]).to_owned();
        Ok((
            SparseCodes::new(left, self.sparsity_level)?,
            SparseCodes::new(right, self.sparsity_level)?,
        ))
    }
}

/// Training samples for one class: the in-class matrix `Y` (d x N) and
/// the complementary matrix of all other classes' samples (d x N-bar).
#[derive(Debug, Clone)]
pub struct SampleSet {
    in_class: Array2<f64>,
    complementary: Array2<f64>,
}

impl SampleSet {
    pub fn new(in_class: Array2<f64>, complementary: Array2<f64>) -> Result<Self> {
        let (d, n) = in_class.dim();
        let (d_bar, n_bar) = complementary.dim();
        if d == 0 || n == 0 || n_bar == 0 {
            return Err(Error::InvalidInput(
                "sample sets must contain at least one sample each".into(),
            ));
        }
        if d != d_bar {
            return Err(Error::InvalidInput(format!(
                "in-class dimension {d} does not match complementary dimension {d_bar}"
            )));
        }
        if in_class.iter().chain(complementary.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "sample set contains non-finite entries".into(),
            ));
        }
        Ok(Self {
            in_class,
            complementary,
        })
    }

    pub fn dim(&self) -> usize {
        self.in_class.nrows()
    }

    /// N: number of in-class samples.
    pub fn in_class_count(&self) -> usize {
        self.in_class.ncols()
    }

    /// N-bar: number of complementary samples.
    pub fn complementary_count(&self) -> usize {
        self.complementary.ncols()
    }

    pub fn in_class(&self) -> &Array2<f64> {
        &self.in_class
    }

    pub fn complementary(&self) -> &Array2<f64> {
        &self.complementary
    }
}

/// Greedy batch OMP: for every sample column, repeatedly select the atom
/// with the largest absolute correlation to the current residual (lowest
/// index on ties), re-solve least squares on the active set via an
/// incrementally updated Cholesky factor, and stop after `sparsity` atoms
/// or once the residual norm falls below [`OMP_RESIDUAL_STOP`].
pub fn omp_encode_batch(
    samples: &ArrayView2<'_, f64>,
    dict: &Dictionary,
    sparsity: usize,
) -> Result<SparseCodes> {
    let d = dict.dim();
    let k = dict.atom_count();
    let (rows, n) = samples.dim();
    if rows != d {
        return Err(Error::InvalidInput(format!(
            "samples have dimension {rows}, dictionary expects {d}"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidInput("no sample columns to encode".into()));
    }
    if sparsity == 0 || sparsity > k {
        return Err(Error::InvalidInput(format!(
            "sparsity {sparsity} out of range for {k} atoms"
        )));
    }
    if sparsity > d {
        return Err(Error::InvalidInput(format!(
            "sparsity {sparsity} exceeds sample dimension {d}"
        )));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "samples contain non-finite entries".into(),
        ));
    }

    let columns: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|j| omp_encode_column(&samples.column(j), dict, sparsity))
        .collect();

    let mut coefficients = Array2::zeros((k, n));
    for (j, entries) in columns.iter().enumerate() {
        for &(atom, value) in entries {
            coefficients[(atom, j)] = value;
        }
    }
    SparseCodes::new(coefficients, sparsity)
}

/// One column of greedy OMP; returns (atom index, coefficient) pairs.
fn omp_encode_column(
    y: &ArrayView1<'_, f64>,
    dict: &Dictionary,
    sparsity: usize,
) -> Vec<(usize, f64)> {
    let d = dict.dim();
    let k = dict.atom_count();
    let mut residual: Vec<f64> = y.iter().copied().collect();
    let mut support: Vec<usize> = Vec::with_capacity(sparsity);
    let mut solution: Vec<f64> = Vec::with_capacity(sparsity);
    // Lower-triangular Cholesky factor of the active Gram matrix, stored
    // row by row: row m holds m+1 entries.
    let mut chol: Vec<f64> = Vec::new();
    let mut rhs: Vec<f64> = Vec::with_capacity(sparsity); // D_A^T y

    for _ in 0..sparsity {
        let res_norm = residual.iter().map(|v| v * v).sum::<f64>().sqrt();
        if res_norm < OMP_RESIDUAL_STOP {
            break;
        }

        // Atom of maximum absolute correlation; strict comparison keeps the
        // lowest index on ties.
        let mut best = usize::MAX;
        let mut best_abs = 0.0;
        for j in 0..k {
            if support.contains(&j) {
                continue;
            }
            let c: f64 = dict
                .atom(j)
                .iter()
                .zip(&residual)
                .map(|(a, r)| a * r)
                .sum();
            if c.abs() > best_abs {
                best_abs = c.abs();
                best = j;
            }
        }
        if best == usize::MAX || best_abs == 0.0 {
            break; // residual orthogonal to every remaining atom
        }

        // Grow the Cholesky factor with the chosen atom's Gram row.
        let m = support.len();
        let new_atom = dict.atom(best);
        let mut gram_row: Vec<f64> = support
            .iter()
            .map(|&i| dict.atom(i).iter().zip(new_atom.iter()).map(|(a, b)| a * b).sum())
            .collect();
        let gamma: f64 = new_atom.iter().map(|v| v * v).sum();
        // Forward-substitute L w = gram_row.
        for r in 0..m {
            let mut acc = gram_row[r];
            for c in 0..r {
                acc -= chol[r * (r + 1) / 2 + c] * gram_row[c];
            }
            gram_row[r] = acc / chol[r * (r + 1) / 2 + r];
        }
        let diag_sq = gamma - gram_row.iter().map(|v| v * v).sum::<f64>();
        if diag_sq <= 1e-12 {
            break; // new atom numerically inside the active span
        }
        chol.extend_from_slice(&gram_row);
        chol.push(diag_sq.sqrt());
        support.push(best);
        rhs.push(new_atom.iter().zip(y.iter()).map(|(a, b)| a * b).sum());

        // Solve (D_A^T D_A) s = rhs through the factor.
        let mm = support.len();
        let mut s = rhs.clone();
        for r in 0..mm {
            for c in 0..r {
                s[r] -= chol[r * (r + 1) / 2 + c] * s[c];
            }
            s[r] /= chol[r * (r + 1) / 2 + r];
        }
        for r in (0..mm).rev() {
            for c in r + 1..mm {
                s[r] -= chol[c * (c + 1) / 2 + r] * s[c];
            }
            s[r] /= chol[r * (r + 1) / 2 + r];
        }
        solution = s;

        // Fresh residual y - D_A s.
        for i in 0..d {
            let mut acc = y[i];
            for (t, &atom) in support.iter().enumerate() {
                acc -= dict.atoms()[(i, atom)] * solution[t];
            }
            residual[i] = acc;
        }
    }

    support.into_iter().zip(solution).collect()
}

/// L1-regularized least squares (lasso objective
/// `||y - D s||_2^2 + lambda ||s||_1`) solved by cyclic coordinate descent
/// with soft thresholding. Returns once the KKT stationarity residual is
/// at most [`LASSO_KKT_TOL`].
pub fn l1_encode(
    y: &ArrayView1<'_, f64>,
    dict_total: &Dictionary,
    lambda: f64,
) -> Result<Array1<f64>> {
    let d = dict_total.dim();
    let k = dict_total.atom_count();
    if y.len() != d {
        return Err(Error::InvalidInput(format!(
            "sample has dimension {}, dictionary expects {d}",
            y.len()
        )));
    }
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "lambda must be a positive finite real, got {lambda}"
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "sample contains non-finite entries".into(),
        ));
    }

    let atoms = dict_total.atoms();
    let col_sq: Vec<f64> = (0..k)
        .map(|j| dict_total.atom(j).iter().map(|v| v * v).sum())
        .collect();

    let mut code = vec![0.0f64; k];
    let mut residual: Vec<f64> = y.iter().copied().collect();
    let mut gap = f64::INFINITY;

    for _sweep in 0..LASSO_MAX_SWEEPS {
        for j in 0..k {
            let old = code[j];
            let corr: f64 = (0..d).map(|i| atoms[(i, j)] * residual[i]).sum();
            // Correlation against the partial residual that excludes atom j.
            let z = corr + col_sq[j] * old;
            let new = soft_threshold(z, lambda / 2.0) / col_sq[j];
            if new != old {
                let delta = old - new;
                for i in 0..d {
                    residual[i] += atoms[(i, j)] * delta;
                }
                code[j] = new;
            }
        }
        gap = kkt_violation(atoms, &code, &residual, lambda);
        if gap <= LASSO_KKT_TOL {
            return Ok(Array1::from_vec(code));
        }
    }
    Err(Error::Convergence {
        context: "l1_encode",
        iterations: LASSO_MAX_SWEEPS,
        gap,
    })
}

fn soft_threshold(z: f64, threshold: f64) -> f64 {
    if z > threshold {
        z - threshold
    } else if z < -threshold {
        z + threshold
    } else {
        0.0
    }
}

/// Worst-case violation of the lasso stationarity conditions. Zero means
/// 2 d_j^T r = lambda * sign(s_j) on the active set and |2 d_j^T r| <= lambda
/// elsewhere, with r = y - D s.
fn kkt_violation(atoms: &Array2<f64>, code: &[f64], residual: &[f64], lambda: f64) -> f64 {
    let (d, k) = atoms.dim();
    let mut worst: f64 = 0.0;
    for j in 0..k {
        let corr: f64 = (0..d).map(|i| atoms[(i, j)] * residual[i]).sum();
        let g = 2.0 * corr;
        let violation = if code[j] == 0.0 {
            (g.abs() - lambda).max(0.0)
        } else {
            (g - lambda * code[j].signum()).abs()
        };
        worst = worst.max(violation);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr1;
    use ndarray::arr2;

    fn identity_dict(n: usize) -> Dictionary {
        Dictionary::new(Array2::eye(n)).unwrap()
    }

    #[test]
    fn omp_orthonormal_selects_matching_atom() {
        let dict = identity_dict(3);
        let samples = arr2(&[[0.0], [2.0], [0.0]]);
        let codes = omp_encode_batch(&samples.view(), &dict, 1).unwrap();
        assert_eq!(codes.coefficients()[(1, 0)], 2.0);
        assert_eq!(codes.coefficients()[(0, 0)], 0.0);
        assert_eq!(codes.coefficients()[(2, 0)], 0.0);
    }

    #[test]
    fn omp_full_support_exact_recovery() {
        let dict = identity_dict(3);
        let samples = arr2(&[[1.0], [1.0], [1.0]]);
        let codes = omp_encode_batch(&samples.view(), &dict, 3).unwrap();
        for i in 0..3 {
            assert!((codes.coefficients()[(i, 0)] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn omp_rejects_bad_sparsity() {
        let dict = identity_dict(3);
        let samples = arr2(&[[1.0], [0.0], [0.0]]);
        assert!(matches!(
            omp_encode_batch(&samples.view(), &dict, 4),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            omp_encode_batch(&samples.view(), &dict, 0),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn omp_rejects_dimension_mismatch() {
        let dict = identity_dict(3);
        let samples = arr2(&[[1.0], [0.0]]);
        assert!(matches!(
            omp_encode_batch(&samples.view(), &dict, 1),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn omp_zero_column_stays_zero() {
        let dict = identity_dict(4);
        let samples = Array2::zeros((4, 2));
        let codes = omp_encode_batch(&samples.view(), &dict, 2).unwrap();
        assert!(codes.coefficients().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn lasso_orthonormal_closed_form() {
        let dict = identity_dict(2);
        let y = arr1(&[1.0, 0.0]);
        let code = l1_encode(&y.view(), &dict, 0.5).unwrap();
        assert!((code[0] - 0.75).abs() < 1e-9, "got {}", code[0]);
        assert_eq!(code[1], 0.0);
    }

    #[test]
    fn lasso_zero_above_threshold() {
        let atoms = arr2(&[[0.8, 0.1], [0.2, 0.7]]);
        let dict = Dictionary::new(atoms).unwrap();
        let y = arr1(&[0.3, -0.4]);
        let max_corr = (0..2)
            .map(|j| {
                dict.atom(j)
                    .iter()
                    .zip(y.iter())
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    .abs()
            })
            .fold(0.0, f64::max);
        let code = l1_encode(&y.view(), &dict, 2.0 * max_corr + 0.1).unwrap();
        assert!(code.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dictionary_rejects_zero_atom() {
        let atoms = arr2(&[[1.0, 0.0], [0.0, 0.0]]);
        assert!(matches!(
            Dictionary::new(atoms),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn dictionary_rejects_oversized_atom() {
        let atoms = arr2(&[[1.5], [0.0]]);
        assert!(matches!(
            Dictionary::new(atoms),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn sparse_codes_enforce_budget() {
        let coeffs = arr2(&[[1.0, 0.0], [2.0, 1.0]]);
        assert!(SparseCodes::new(coeffs.clone(), 2).is_ok());
        assert!(matches!(
            SparseCodes::new(coeffs, 1),
            Err(Error::InvalidInput(_))
        ));
    }
}
