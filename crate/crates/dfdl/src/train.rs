//! The DFDL trainer: alternating sparse coding and block-coordinate
//! dictionary updates driven by the E/F sufficient statistics, with a
//! Weyl-bound PSD safeguard and rho shrinkage when the update quadratic
//! turns indefinite.

use std::time::Instant;

use ndarray::{concatenate, Array1, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::eig::{largest_eigenvalue, smallest_eigenvalue};
use crate::error::{Error, Result};
use crate::sparse::{omp_encode_batch, Dictionary, SampleSet, SparseCodes};

/// F counts as positive semidefinite when its smallest eigenvalue is at
/// least minus this. Genuinely PSD Gram differences dip microscopically
/// negative in floating point.
pub const PSD_TOLERANCE: f64 = 1e-9;

/// Training aborts if the shrinkage schedule pushes rho below this; the
/// objective is irreparably non-convex at this precision.
pub const RHO_UNDERFLOW: f64 = 1e-12;

/// Diagonal pivots of F at or below this leave their atom unchanged
/// during the block update.
pub const DEGENERATE_PIVOT: f64 = 1e-10;

/// The quadratic surrogate may not increase by more than this across one
/// update sweep.
pub const SURROGATE_DESCENT_TOL: f64 = 1e-9;

/// Maximum |F_ij - F_ji| accepted by [`check_psd`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

/// Default atom count per class dictionary.
pub const DEFAULT_BASES_PER_CLASS: usize = 500;

/// Default OMP sparsity level.
pub const DEFAULT_SPARSITY: usize = 3;

/// Default discriminative weight rho.
pub const DEFAULT_RHO: f64 = 0.001;

/// Default multiplicative rho shrink factor.
pub const DEFAULT_RHO_SHRINK: f64 = 0.9;

/// Default outer-iteration cap.
pub const DEFAULT_MAX_OUTER_ITERS: usize = 30;

/// Default relative objective-change stopping tolerance.
pub const DEFAULT_OBJECTIVE_TOL: f64 = 1e-4;

/// Knobs for one per-class training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Atoms in the learned dictionary (k).
    pub bases: usize,
    /// Nonzeros allowed per sparse code (L).
    pub sparsity: usize,
    /// Weight of the complementary term (rho).
    pub rho: f64,
    pub max_outer_iters: usize,
    /// Stop once the relative objective change between outer iterations
    /// falls below this.
    pub objective_tol: f64,
    /// Multiplier applied to rho whenever F fails the PSD check.
    pub rho_shrink: f64,
    pub seed: u64,
    /// Block-coordinate sweeps per outer iteration.
    pub update_sweeps: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            bases: DEFAULT_BASES_PER_CLASS,
            sparsity: DEFAULT_SPARSITY,
            rho: DEFAULT_RHO,
            max_outer_iters: DEFAULT_MAX_OUTER_ITERS,
            objective_tol: DEFAULT_OBJECTIVE_TOL,
            rho_shrink: DEFAULT_RHO_SHRINK,
            seed: 0,
            update_sweeps: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bases == 0 {
            return Err(Error::InvalidInput("bases must be positive".into()));
        }
        if self.sparsity == 0 || self.sparsity > self.bases {
            return Err(Error::InvalidInput(format!(
                "sparsity {} out of range for {} bases",
                self.sparsity, self.bases
            )));
        }
        if !self.rho.is_finite() || self.rho <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "rho must be a positive finite real, got {}",
                self.rho
            )));
        }
        if !(self.rho_shrink > 0.0 && self.rho_shrink < 1.0) {
            return Err(Error::InvalidInput(format!(
                "rho_shrink must lie in (0, 1), got {}",
                self.rho_shrink
            )));
        }
        if self.max_outer_iters == 0 {
            return Err(Error::InvalidInput("max_outer_iters must be positive".into()));
        }
        if !self.objective_tol.is_finite() || self.objective_tol <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "objective_tol must be a positive finite real, got {}",
                self.objective_tol
            )));
        }
        if self.update_sweeps == 0 {
            return Err(Error::InvalidInput("update_sweeps must be positive".into()));
        }
        Ok(())
    }
}

/// Sufficient statistics of the dictionary-update quadratic:
/// E = (1/N) Y S^T - (rho/N-bar) Y-bar S-bar^T (d x k) and
/// F = (1/N) S S^T - (rho/N-bar) S-bar S-bar^T (k x k, symmetrized).
#[derive(Debug, Clone, PartialEq)]
pub struct GramPair {
    e: Array2<f64>,
    f: Array2<f64>,
}

impl GramPair {
    /// Builds the pair from raw E and F candidates. F is symmetrized as
    /// (F + F^T)/2 so downstream eigenvalue code sees an exactly
    /// symmetric matrix.
    pub fn new(e: Array2<f64>, f: Array2<f64>) -> Result<Self> {
        let (fr, fc) = f.dim();
        if fr != fc {
            return Err(Error::InvalidInput(format!("F must be square, got {fr}x{fc}")));
        }
        if e.ncols() != fr {
            return Err(Error::InvalidInput(format!(
                "E has {} columns but F is {fr}x{fr}",
                e.ncols()
            )));
        }
        if e.iter().chain(f.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "gram pair contains non-finite entries".into(),
            ));
        }
        let mut sym = Array2::zeros((fr, fr));
        for i in 0..fr {
            for j in 0..fr {
                sym[(i, j)] = (f[(i, j)] + f[(j, i)]) / 2.0;
            }
        }
        Ok(Self { e, f: sym })
    }

    pub fn e(&self) -> &Array2<f64> {
        &self.e
    }

    pub fn f(&self) -> &Array2<f64> {
        &self.f
    }

    /// The update quadratic -2 tr(E D^T) + tr(D F D^T) at this dictionary.
    pub fn surrogate(&self, dict: &Dictionary) -> Result<f64> {
        if dict.dim() != self.e.nrows() || dict.atom_count() != self.e.ncols() {
            return Err(Error::InvalidInput(format!(
                "dictionary is {}x{}, gram pair expects {}x{}",
                dict.dim(),
                dict.atom_count(),
                self.e.nrows(),
                self.e.ncols()
            )));
        }
        Ok(surrogate_of(dict.atoms(), self))
    }
}

fn surrogate_of(atoms: &Array2<f64>, gram: &GramPair) -> f64 {
    let df = atoms.dot(&gram.f);
    let mut tr_ed = 0.0;
    let mut tr_dfd = 0.0;
    for ((e, d), fd) in gram.e.iter().zip(atoms.iter()).zip(df.iter()) {
        tr_ed += e * d;
        tr_dfd += fd * d;
    }
    -2.0 * tr_ed + tr_dfd
}

/// Outcome of the smallest-eigenvalue test on F, optionally annotated with
/// the Weyl lower bound computed from the same iteration's codes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsdReport {
    /// lambda_0; filled by the trainer, absent when [`check_psd`] is
    /// called on a bare matrix.
    pub weyl_lower_bound: Option<f64>,
    /// lambda_1(F), the smallest eigenvalue.
    pub min_eigenvalue: f64,
    pub is_psd: bool,
}

impl PsdReport {
    pub fn with_weyl(mut self, bound: f64) -> Self {
        self.weyl_lower_bound = Some(bound);
        self
    }
}

/// One outer iteration of [`train_dfdl`].
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// Training objective after this iteration's dictionary update,
    /// at the rho in effect.
    pub objective: f64,
    /// rho in effect once the PSD safeguard passed.
    pub rho: f64,
    pub psd: PsdReport,
    /// Number of rho-shrink events this iteration.
    pub shrink_events: usize,
    /// Update quadratic before the first sweep.
    pub surrogate_before: f64,
    /// Update quadratic after the last sweep.
    pub surrogate_after: f64,
    /// Atoms skipped because their F pivot was degenerate.
    pub degenerate_atoms: Vec<usize>,
    pub wall_secs: f64,
}

/// Per-iteration training log.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainTrace {
    pub iterations: Vec<IterationRecord>,
    /// True when the relative objective change fell below the tolerance
    /// before the iteration cap.
    pub converged: bool,
}

/// The training objective
/// (1/N) ||Y - D S||_F^2 - (rho/N-bar) ||Y-bar - D S-bar||_F^2.
pub fn objective(
    dict: &Dictionary,
    samples: &SampleSet,
    codes: &SparseCodes,
    codes_bar: &SparseCodes,
    rho: f64,
) -> Result<f64> {
    validate_rho(rho)?;
    validate_code_shapes(dict, samples, codes, codes_bar)?;
    let r_in = frobenius_sq(samples.in_class(), dict.atoms(), codes.coefficients());
    let r_bar = frobenius_sq(samples.complementary(), dict.atoms(), codes_bar.coefficients());
    let n = samples.in_class_count() as f64;
    let nbar = samples.complementary_count() as f64;
    Ok(r_in / n - rho * r_bar / nbar)
}

fn frobenius_sq(y: &Array2<f64>, atoms: &Array2<f64>, s: &Array2<f64>) -> f64 {
    let recon = atoms.dot(s);
    let mut acc = 0.0;
    for (a, b) in y.iter().zip(recon.iter()) {
        let r = a - b;
        acc += r * r;
    }
    acc
}

fn validate_rho(rho: f64) -> Result<()> {
    if rho < 0.0 || !rho.is_finite() {
        return Err(Error::InvalidInput(format!(
            "rho must be a finite non-negative real, got {rho}"
        )));
    }
    Ok(())
}

fn validate_code_shapes(
    dict: &Dictionary,
    samples: &SampleSet,
    codes: &SparseCodes,
    codes_bar: &SparseCodes,
) -> Result<()> {
    if dict.dim() != samples.dim() {
        return Err(Error::InvalidInput(format!(
            "dictionary dimension {} does not match sample dimension {}",
            dict.dim(),
            samples.dim()
        )));
    }
    if codes.atom_count() != dict.atom_count() || codes_bar.atom_count() != dict.atom_count() {
        return Err(Error::InvalidInput(format!(
            "codes have {}/{} rows, dictionary has {} atoms",
            codes.atom_count(),
            codes_bar.atom_count(),
            dict.atom_count()
        )));
    }
    if codes.sample_count() != samples.in_class_count()
        || codes_bar.sample_count() != samples.complementary_count()
    {
        return Err(Error::InvalidInput(format!(
            "code columns {}/{} do not match sample counts {}/{}",
            codes.sample_count(),
            codes_bar.sample_count(),
            samples.in_class_count(),
            samples.complementary_count()
        )));
    }
    Ok(())
}

/// Elementwise (1/n) a - (rho/nbar) b. Shared by the public gram/Weyl
/// operations and the trainer's cached recombination so both produce
/// bit-identical values.
fn combine(a: &Array2<f64>, b: &Array2<f64>, rho: f64, n: usize, nbar: usize) -> Array2<f64> {
    let cn = 1.0 / n as f64;
    let cb = rho / nbar as f64;
    let mut out = Array2::zeros(a.raw_dim());
    ndarray::Zip::from(&mut out)
        .and(a)
        .and(b)
        .for_each(|o, &x, &y| *o = cn * x - cb * y);
    out
}

fn weyl_from_parts(lam_min_ss: f64, lam_max_sbar: f64, rho: f64, n: usize, nbar: usize) -> f64 {
    (1.0 / n as f64) * lam_min_ss - (rho / nbar as f64) * lam_max_sbar
}

fn gram_from_parts(
    ys: &Array2<f64>,
    ybar_sbar: &Array2<f64>,
    ss: &Array2<f64>,
    sbar_sbar: &Array2<f64>,
    rho: f64,
    n: usize,
    nbar: usize,
) -> Result<GramPair> {
    let e = combine(ys, ybar_sbar, rho, n, nbar);
    let f = combine(ss, sbar_sbar, rho, n, nbar);
    GramPair::new(e, f)
}

/// E = (1/N) Y S^T - (rho/N-bar) Y-bar S-bar^T and the symmetrized
/// F = (1/N) S S^T - (rho/N-bar) S-bar S-bar^T.
pub fn compute_gram_pair(
    samples: &SampleSet,
    codes: &SparseCodes,
    codes_bar: &SparseCodes,
    rho: f64,
) -> Result<GramPair> {
    validate_rho(rho)?;
    if codes.atom_count() != codes_bar.atom_count() {
        return Err(Error::InvalidInput(format!(
            "code row counts differ: {} vs {}",
            codes.atom_count(),
            codes_bar.atom_count()
        )));
    }
    if codes.sample_count() != samples.in_class_count()
        || codes_bar.sample_count() != samples.complementary_count()
    {
        return Err(Error::InvalidInput(format!(
            "code columns {}/{} do not match sample counts {}/{}",
            codes.sample_count(),
            codes_bar.sample_count(),
            samples.in_class_count(),
            samples.complementary_count()
        )));
    }
    let s = codes.coefficients();
    let sbar = codes_bar.coefficients();
    let ys = samples.in_class().dot(&s.t());
    let ybar_sbar = samples.complementary().dot(&sbar.t());
    let ss = s.dot(&s.t());
    let sbar_sbar = sbar.dot(&sbar.t());
    gram_from_parts(
        &ys,
        &ybar_sbar,
        &ss,
        &sbar_sbar,
        rho,
        samples.in_class_count(),
        samples.complementary_count(),
    )
}

/// lambda_0 = (1/N) lambda_1(S S^T) - (rho/N-bar) lambda_max(S-bar S-bar^T),
/// a Weyl's-inequality lower bound on the smallest eigenvalue of F.
pub fn weyl_lower_bound(
    codes: &SparseCodes,
    codes_bar: &SparseCodes,
    rho: f64,
    n: usize,
    nbar: usize,
) -> Result<f64> {
    validate_rho(rho)?;
    if codes.atom_count() != codes_bar.atom_count() {
        return Err(Error::InvalidInput(format!(
            "code row counts differ: {} vs {}",
            codes.atom_count(),
            codes_bar.atom_count()
        )));
    }
    if codes.sample_count() != n || codes_bar.sample_count() != nbar {
        return Err(Error::InvalidInput(format!(
            "N/N-bar of {n}/{nbar} do not match code columns {}/{}",
            codes.sample_count(),
            codes_bar.sample_count()
        )));
    }
    let s = codes.coefficients();
    let sbar = codes_bar.coefficients();
    let ss = s.dot(&s.t());
    let sbar_sbar = sbar.dot(&sbar.t());
    let lam_min_ss = smallest_eigenvalue(&ss.view())?;
    let lam_max_sbar = largest_eigenvalue(&sbar_sbar.view())?;
    Ok(weyl_from_parts(lam_min_ss, lam_max_sbar, rho, n, nbar))
}

/// Smallest-eigenvalue test. `weyl_lower_bound` stays unset here; the
/// trainer annotates reports with the bound for the codes it used.
pub fn check_psd(f: &ArrayView2<'_, f64>) -> Result<PsdReport> {
    let (r, c) = f.dim();
    if r != c {
        return Err(Error::InvalidInput(format!("F must be square, got {r}x{c}")));
    }
    let mut worst = 0.0f64;
    for i in 0..r {
        for j in (i + 1)..r {
            worst = worst.max((f[(i, j)] - f[(j, i)]).abs());
        }
    }
    if worst > SYMMETRY_TOLERANCE {
        return Err(Error::InvalidInput(format!(
            "F is asymmetric: max |F_ij - F_ji| = {worst:.3e}"
        )));
    }
    let min_eigenvalue = smallest_eigenvalue(f)?;
    Ok(PsdReport {
        weyl_lower_bound: None,
        min_eigenvalue,
        is_psd: min_eigenvalue >= -PSD_TOLERANCE,
    })
}

/// Atoms the block update left untouched because their F pivot was at or
/// below [`DEGENERATE_PIVOT`] while the update direction was nonzero,
/// plus the surrogate values bracketing the sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateOutcome {
    pub surrogate_before: f64,
    pub surrogate_after: f64,
    pub degenerate_atoms: Vec<usize>,
}

/// One warm-started block-coordinate sweep over all atoms in ascending
/// index order: d_j <- d_j + (e_j - D f_j)/F_jj, rescaled to norm
/// min(||d_j||, 1). Expects F to have passed [`check_psd`]; under that
/// condition the sweep cannot increase -2 tr(E D^T) + tr(D F D^T), which
/// is verified before returning.
pub fn update_dictionary(dict: &Dictionary, gram: &GramPair) -> Result<(Dictionary, UpdateOutcome)> {
    let d = dict.dim();
    let k = dict.atom_count();
    if gram.e.nrows() != d || gram.e.ncols() != k {
        return Err(Error::InvalidInput(format!(
            "gram pair is for a {}x{} dictionary, got {d}x{k}",
            gram.e.nrows(),
            gram.e.ncols()
        )));
    }
    let mut atoms = dict.atoms().clone();
    let surrogate_before = surrogate_of(&atoms, gram);
    let mut degenerate_atoms = Vec::new();

    for j in 0..k {
        let f_col = gram.f.column(j);
        let df: Array1<f64> = atoms.dot(&f_col);
        let direction = &gram.e.column(j) - &df;
        let pivot = gram.f[(j, j)];
        if pivot > DEGENERATE_PIVOT {
            let updated = &atoms.column(j) + &(&direction / pivot);
            let norm = updated.dot(&updated).sqrt();
            if norm == 0.0 {
                degenerate_atoms.push(j);
            } else if norm > 1.0 {
                atoms.column_mut(j).assign(&(&updated / norm));
            } else {
                atoms.column_mut(j).assign(&updated);
            }
        } else if direction.iter().any(|&v| v != 0.0) {
            degenerate_atoms.push(j);
        }
    }

    let surrogate_after = surrogate_of(&atoms, gram);
    if surrogate_after > surrogate_before + SURROGATE_DESCENT_TOL {
        return Err(Error::Numerical(format!(
            "dictionary update increased the surrogate from {surrogate_before} to {surrogate_after}; F is likely not PSD"
        )));
    }
    Ok((
        Dictionary::new(atoms)?,
        UpdateOutcome {
            surrogate_before,
            surrogate_after,
            degenerate_atoms,
        },
    ))
}

/// Full per-class training loop: seed the dictionary from k distinct
/// nonzero in-class columns, then alternate combined OMP coding of
/// [Y, Y-bar] with safeguarded block-coordinate dictionary updates until
/// the relative objective change drops below `objective_tol` or the
/// iteration cap is hit. rho shrinks by `rho_shrink` whenever F fails the
/// PSD check and never grows back.
pub fn train_dfdl(samples: &SampleSet, config: &TrainConfig) -> Result<(Dictionary, TrainTrace)> {
    config.validate()?;
    let d = samples.dim();
    let n = samples.in_class_count();
    let nbar = samples.complementary_count();
    if n < config.bases {
        return Err(Error::InvalidInput(format!(
            "need at least {} in-class samples to seed {} atoms, got {n}",
            config.bases, config.bases
        )));
    }
    if config.sparsity > d {
        return Err(Error::InvalidInput(format!(
            "sparsity {} exceeds sample dimension {d}",
            config.sparsity
        )));
    }

    let mut dict = init_dictionary(samples.in_class(), config.bases, config.seed)?;
    let combined = concatenate(Axis(1), &[samples.in_class().view(), samples.complementary().view()])
        .map_err(|e| Error::InvalidInput(format!("cannot stack sample sets: {e}")))?;

    let mut rho = config.rho;
    let mut trace = TrainTrace::default();
    let mut previous_objective: Option<f64> = None;

    for _ in 0..config.max_outer_iters {
        let started = Instant::now();

        let codes_all = omp_encode_batch(&combined.view(), &dict, config.sparsity)?;
        let (codes, codes_bar) = codes_all.split_columns(n)?;

        // Cache the four Gram products once; rho shrinkage only changes
        // how they are linearly recombined.
        let s = codes.coefficients();
        let sbar = codes_bar.coefficients();
        let ys = samples.in_class().dot(&s.t());
        let ybar_sbar = samples.complementary().dot(&sbar.t());
        let ss = s.dot(&s.t());
        let sbar_sbar = sbar.dot(&sbar.t());
        let lam_min_ss = smallest_eigenvalue(&ss.view())?;
        let lam_max_sbar = largest_eigenvalue(&sbar_sbar.view())?;

        let mut shrink_events = 0usize;
        let (gram, psd) = loop {
            let gram = gram_from_parts(&ys, &ybar_sbar, &ss, &sbar_sbar, rho, n, nbar)?;
            let report = check_psd(&gram.f().view())?
                .with_weyl(weyl_from_parts(lam_min_ss, lam_max_sbar, rho, n, nbar));
            if report.is_psd {
                break (gram, report);
            }
            shrink_events += 1;
            rho *= config.rho_shrink;
            if rho < RHO_UNDERFLOW {
                return Err(Error::Training(format!(
                    "rho shrank below {RHO_UNDERFLOW:.0e} without making F positive semidefinite"
                )));
            }
        };

        let mut surrogate_before = f64::NAN;
        let mut surrogate_after = f64::NAN;
        let mut degenerate_atoms = Vec::new();
        for sweep in 0..config.update_sweeps {
            let (updated, outcome) = update_dictionary(&dict, &gram)?;
            dict = updated;
            if sweep == 0 {
                surrogate_before = outcome.surrogate_before;
            }
            surrogate_after = outcome.surrogate_after;
            degenerate_atoms.extend(outcome.degenerate_atoms);
        }
        degenerate_atoms.sort_unstable();
        degenerate_atoms.dedup();

        let obj = objective(&dict, samples, &codes, &codes_bar, rho)?;
        trace.iterations.push(IterationRecord {
            objective: obj,
            rho,
            psd,
            shrink_events,
            surrogate_before,
            surrogate_after,
            degenerate_atoms,
            wall_secs: started.elapsed().as_secs_f64(),
        });

        if let Some(prev) = previous_objective {
            let rel = (obj - prev).abs() / prev.abs().max(1e-12);
            if rel < config.objective_tol {
                trace.converged = true;
                break;
            }
        }
        previous_objective = Some(obj);
    }

    Ok((dict, trace))
}

/// k distinct uniformly sampled nonzero columns of Y, each normalized to
/// unit norm, drawn with a ChaCha stream seeded by `seed`.
fn init_dictionary(y: &Array2<f64>, bases: usize, seed: u64) -> Result<Dictionary> {
    let eligible: Vec<usize> = (0..y.ncols())
        .filter(|&j| y.column(j).iter().any(|&v| v != 0.0))
        .collect();
    if eligible.len() < bases {
        return Err(Error::InvalidInput(format!(
            "only {} nonzero in-class columns available to seed {} atoms",
            eligible.len(),
            bases
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = rand::seq::index::sample(&mut rng, eligible.len(), bases);
    let mut atoms = Array2::zeros((y.nrows(), bases));
    for (t, pick) in picks.iter().enumerate() {
        let col = y.column(eligible[pick]);
        let norm = col.dot(&col).sqrt();
        atoms.column_mut(t).assign(&(&col / norm));
    }
    Dictionary::new(atoms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr2, Array2};
    use rand::Rng;

    fn unit_dict(atoms: Array2<f64>) -> Dictionary {
        Dictionary::new(atoms).unwrap()
    }

    #[test]
    fn objective_zero_for_exact_codes() {
        let dict = unit_dict(Array2::eye(2));
        let s = SparseCodes::new(arr2(&[[1.0, 0.0], [0.0, 1.0]]), 1).unwrap();
        let sbar = SparseCodes::new(arr2(&[[0.5, 0.0], [0.0, 0.0]]), 1).unwrap();
        let y = dict.atoms().dot(s.coefficients());
        let ybar = dict.atoms().dot(sbar.coefficients());
        let samples = SampleSet::new(y, ybar).unwrap();
        let v = objective(&dict, &samples, &s, &sbar, 0.7).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn objective_rho_zero_is_in_class_mean_residual() {
        let dict = unit_dict(Array2::eye(2));
        let s = SparseCodes::new(arr2(&[[1.0, 0.0], [0.0, 0.0]]), 1).unwrap();
        let sbar = SparseCodes::new(arr2(&[[0.0, 0.0], [0.0, 0.0]]), 1).unwrap();
        // Residuals per column: (0,1) and (0,2) -> squared norms 1 and 4.
        let y = arr2(&[[1.0, 0.0], [1.0, 2.0]]);
        let ybar = arr2(&[[3.0, 0.0], [0.0, 3.0]]);
        let samples = SampleSet::new(y, ybar).unwrap();
        let v = objective(&dict, &samples, &s, &sbar, 0.0).unwrap();
        assert!((v - 2.5).abs() < 1e-12);
    }

    #[test]
    fn gram_pair_rho_zero_drops_complementary_terms() {
        let s = SparseCodes::new(arr2(&[[1.0, 2.0], [0.0, 0.0]]), 1).unwrap();
        let sbar = SparseCodes::new(arr2(&[[0.0, 3.0], [1.0, 0.0]]), 1).unwrap();
        let y = arr2(&[[1.0, 0.5], [0.0, 1.0]]);
        let ybar = arr2(&[[2.0, 0.0], [1.0, 1.0]]);
        let samples = SampleSet::new(y.clone(), ybar).unwrap();
        let gram = compute_gram_pair(&samples, &s, &sbar, 0.0).unwrap();
        let expected_e = y.dot(&s.coefficients().t()) / 2.0;
        let expected_f = s.coefficients().dot(&s.coefficients().t()) / 2.0;
        assert_eq!(gram.e(), &expected_e);
        assert_eq!(gram.f(), &expected_f);
    }

    #[test]
    fn gram_pair_zero_codes_are_zero() {
        let s = SparseCodes::new(Array2::zeros((2, 2)), 1).unwrap();
        let sbar = SparseCodes::new(Array2::zeros((2, 3)), 1).unwrap();
        let samples = SampleSet::new(Array2::ones((3, 2)), Array2::ones((3, 3))).unwrap();
        let gram = compute_gram_pair(&samples, &s, &sbar, 0.4).unwrap();
        assert!(gram.e().iter().all(|&v| v == 0.0));
        assert!(gram.f().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn weyl_bound_nonnegative_at_rho_zero() {
        let s = SparseCodes::new(arr2(&[[1.0, 2.0], [0.0, 0.0]]), 1).unwrap();
        let sbar = SparseCodes::new(arr2(&[[0.0, 1.0], [2.0, 0.0]]), 1).unwrap();
        let bound = weyl_lower_bound(&s, &sbar, 0.0, 2, 2).unwrap();
        assert!(bound >= -1e-12, "bound {bound}");
    }

    #[test]
    fn weyl_bound_with_zero_complement_is_in_class_term() {
        let s = SparseCodes::new(arr2(&[[1.0, 2.0], [0.0, 1.0]]), 2).unwrap();
        let sbar = SparseCodes::new(Array2::zeros((2, 3)), 1).unwrap();
        let ss = s.coefficients().dot(&s.coefficients().t());
        let expected = smallest_eigenvalue(&ss.view()).unwrap() / 2.0;
        let bound = weyl_lower_bound(&s, &sbar, 0.8, 2, 3).unwrap();
        assert!((bound - expected).abs() < 1e-14);
    }

    #[test]
    fn check_psd_identity_and_indefinite() {
        let id: Array2<f64> = Array2::eye(3);
        let report = check_psd(&id.view()).unwrap();
        assert!(report.is_psd);
        assert!((report.min_eigenvalue - 1.0).abs() < 1e-10);
        assert_eq!(report.weyl_lower_bound, None);

        let indef = arr2(&[[1.0, 0.0], [0.0, -1.0]]);
        let report = check_psd(&indef.view()).unwrap();
        assert!(!report.is_psd);
        assert!((report.min_eigenvalue + 1.0).abs() < 1e-10);
    }

    #[test]
    fn check_psd_rejects_asymmetric() {
        let f = arr2(&[[1.0, 0.5], [0.0, 1.0]]);
        assert!(matches!(
            check_psd(&f.view()),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn update_with_identity_f_replaces_dictionary_by_e() {
        let atoms = arr2(&[
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.0, 0.0],
        ]);
        let dict = unit_dict(atoms);
        let e = arr2(&[
            [0.3, 0.0, 2.0],
            [0.0, 0.4, 0.0],
            [0.1, 0.0, 0.0],
            [0.0, 0.2, 1.0],
        ]);
        let gram = GramPair::new(e.clone(), Array2::eye(3)).unwrap();
        let (updated, outcome) = update_dictionary(&dict, &gram).unwrap();
        assert!(outcome.degenerate_atoms.is_empty());
        assert!(outcome.surrogate_after <= outcome.surrogate_before + 1e-12);
        for j in 0..3 {
            let col = e.column(j);
            let norm = col.dot(&col).sqrt();
            let scale = if norm > 1.0 { norm } else { 1.0 };
            for i in 0..4 {
                assert!(
                    (updated.atoms()[(i, j)] - e[(i, j)] / scale).abs() < 1e-12,
                    "atom {j} row {i}"
                );
            }
        }
    }

    #[test]
    fn update_fixed_point_when_e_equals_df() {
        let atoms = arr2(&[
            [0.6, 0.0],
            [0.8, 0.0],
            [0.0, 1.0],
        ]);
        let f = arr2(&[[2.0, 1.0], [1.0, 2.0]]);
        let mut e = Array2::zeros((3, 2));
        for j in 0..2 {
            let col = atoms.dot(&f.column(j));
            e.column_mut(j).assign(&col);
        }
        let dict = unit_dict(atoms.clone());
        let gram = GramPair::new(e, f).unwrap();
        let (updated, outcome) = update_dictionary(&dict, &gram).unwrap();
        assert_eq!(updated.atoms(), &atoms);
        assert_eq!(outcome.surrogate_before, outcome.surrogate_after);
    }

    #[test]
    fn update_flags_degenerate_pivot() {
        let dict = unit_dict(Array2::eye(2));
        let e = arr2(&[[0.5, 0.5], [0.0, 0.0]]);
        let f = arr2(&[[0.0, 0.0], [0.0, 1.0]]);
        let gram = GramPair::new(e, f).unwrap();
        let (updated, outcome) = update_dictionary(&dict, &gram).unwrap();
        assert_eq!(outcome.degenerate_atoms, vec![0]);
        assert_eq!(updated.atoms().column(0), dict.atoms().column(0));
    }

    fn planted_two_subspace_samples(seed: u64) -> SampleSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = 8;
        let n = 30;
        let mut y: Array2<f64> = Array2::zeros((d, n));
        let mut ybar: Array2<f64> = Array2::zeros((d, n));
        for j in 0..n {
            for i in 0..4 {
                y[(i, j)] = rng.random_range(-1.0..1.0);
                ybar[(i + 4, j)] = rng.random_range(-1.0..1.0);
            }
        }
        for mut col in y.columns_mut() {
            let norm = col.dot(&col).sqrt();
            col.mapv_inplace(|v| v / norm);
        }
        for mut col in ybar.columns_mut() {
            let norm = col.dot(&col).sqrt();
            col.mapv_inplace(|v| v / norm);
        }
        SampleSet::new(y, ybar).unwrap()
    }

    #[test]
    fn train_is_reproducible_and_traces_are_sane() {
        let samples = planted_two_subspace_samples(11);
        let config = TrainConfig {
            bases: 4,
            sparsity: 1,
            rho: 0.001,
            max_outer_iters: 5,
            objective_tol: 1e-9,
            rho_shrink: 0.9,
            seed: 7,
            update_sweeps: 1,
        };
        let (dict_a, trace_a) = train_dfdl(&samples, &config).unwrap();
        let (dict_b, _) = train_dfdl(&samples, &config).unwrap();
        assert_eq!(dict_a.atoms(), dict_b.atoms());

        let mut last_rho = f64::INFINITY;
        for rec in &trace_a.iterations {
            assert!(rec.rho <= last_rho);
            last_rho = rec.rho;
            assert!(rec.psd.is_psd);
            let weyl = rec.psd.weyl_lower_bound.unwrap();
            assert!(weyl <= rec.psd.min_eigenvalue + 1e-8);
            assert!(rec.surrogate_after <= rec.surrogate_before + SURROGATE_DESCENT_TOL);
        }
        for j in 0..dict_a.atom_count() {
            let col = dict_a.atom(j);
            let norm = col.dot(&col).sqrt();
            assert!(norm > 0.0 && norm <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn train_rejects_too_few_samples() {
        let samples = planted_two_subspace_samples(3);
        let config = TrainConfig {
            bases: 64,
            sparsity: 1,
            ..TrainConfig::default()
        };
        assert!(matches!(
            train_dfdl(&samples, &config),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn defaults_match_shipped_values() {
        let config = TrainConfig::default();
        assert_eq!(config.bases, 500);
        assert_eq!(config.rho, 0.001);
        assert_eq!(config.rho_shrink, 0.9);
        assert_eq!(config.max_outer_iters, 30);
        assert_eq!(config.update_sweeps, 1);
    }
}
