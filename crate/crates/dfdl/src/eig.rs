//! Extreme eigenvalues of symmetric matrices.
//!
//! Dense decomposition up to [`DENSE_EIG_CUTOFF`], shifted power iteration
//! beyond that. The training loop only ever needs the smallest and largest
//! eigenvalues, never the eigenvectors.

use nalgebra::DMatrix;
use ndarray::ArrayView2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Largest matrix order handled by dense symmetric eigendecomposition.
pub const DENSE_EIG_CUTOFF: usize = 512;

const POWER_MAX_ITERS: usize = 50_000;
const POWER_REL_TOL: f64 = 1e-12;

/// Smallest eigenvalue of a symmetric matrix.
pub fn smallest_eigenvalue(m: &ArrayView2<'_, f64>) -> Result<f64> {
    extreme_eigenvalue(m, Extreme::Smallest)
}

/// Largest eigenvalue of a symmetric matrix.
pub fn largest_eigenvalue(m: &ArrayView2<'_, f64>) -> Result<f64> {
    extreme_eigenvalue(m, Extreme::Largest)
}

#[derive(Clone, Copy)]
enum Extreme {
    Smallest,
    Largest,
}

fn extreme_eigenvalue(m: &ArrayView2<'_, f64>, which: Extreme) -> Result<f64> {
    let n = check_square(m)?;
    if n <= DENSE_EIG_CUTOFF {
        let (lo, hi) = dense_extreme_eigenvalues(m)?;
        Ok(match which {
            Extreme::Smallest => lo,
            Extreme::Largest => hi,
        })
    } else {
        shifted_power_extreme(m, which)
    }
}

fn check_square(m: &ArrayView2<'_, f64>) -> Result<usize> {
    let (rows, cols) = m.dim();
    if rows != cols || rows == 0 {
        return Err(Error::InvalidInput(format!(
            "expected a nonempty square matrix, got {rows}x{cols}"
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "matrix contains non-finite entries".into(),
        ));
    }
    Ok(rows)
}

/// Both extreme eigenvalues from a full symmetric decomposition.
fn dense_extreme_eigenvalues(m: &ArrayView2<'_, f64>) -> Result<(f64, f64)> {
    let n = m.nrows();
    let dm = DMatrix::from_fn(n, n, |i, j| m[(i, j)]);
    let eigs = dm.symmetric_eigenvalues();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in eigs.iter() {
        if !v.is_finite() {
            return Err(Error::Numerical(
                "symmetric eigendecomposition produced non-finite eigenvalues".into(),
            ));
        }
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok((lo, hi))
}

/// Extreme eigenvalue via power iteration on a spectrum shifted to be
/// nonnegative. With `mu` an upper bound on the spectral radius,
/// `mu*I - A` has dominant eigenvalue `mu - lambda_min(A)` and
/// `A + mu*I` has dominant eigenvalue `lambda_max(A) + mu`.
fn shifted_power_extreme(m: &ArrayView2<'_, f64>, which: Extreme) -> Result<f64> {
    let n = m.nrows();
    let mu = inf_norm(m);
    if mu == 0.0 {
        return Ok(0.0);
    }
    let shifted_apply = |v: &[f64], out: &mut [f64]| {
        for i in 0..n {
            let row = m.row(i);
            let mut acc = 0.0;
            for j in 0..n {
                acc += row[j] * v[j];
            }
            out[i] = match which {
                Extreme::Smallest => mu * v[i] - acc,
                Extreme::Largest => acc + mu * v[i],
            };
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    normalize(&mut v);
    let mut w = vec![0.0; n];
    let mut prev = f64::INFINITY;
    for _ in 0..POWER_MAX_ITERS {
        shifted_apply(&v, &mut w);
        // Rayleigh quotient of the shifted operator.
        let lambda: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        let norm = normalize(&mut w);
        if norm == 0.0 {
            // v lies in the kernel of the shifted operator.
            return Ok(match which {
                Extreme::Smallest => mu,
                Extreme::Largest => -mu,
            });
        }
        std::mem::swap(&mut v, &mut w);
        if (lambda - prev).abs() <= POWER_REL_TOL * lambda.abs().max(1.0) {
            return Ok(match which {
                Extreme::Smallest => mu - lambda,
                Extreme::Largest => lambda - mu,
            });
        }
        prev = lambda;
    }
    Err(Error::Numerical(format!(
        "power iteration did not converge within {POWER_MAX_ITERS} iterations"
    )))
}

fn inf_norm(m: &ArrayView2<'_, f64>) -> f64 {
    m.rows()
        .into_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
    norm
}
