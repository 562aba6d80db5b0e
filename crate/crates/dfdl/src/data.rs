//! Image ingestion, patch extraction and normalization, dataset manifests,
//! and the planted-subspace synthetic generator used for desk-scale
//! validation.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::netpbm::PnmImage;
use crate::sparse::{Dictionary, SampleSet};

/// Default training/testing patch side length.
pub const DEFAULT_PATCH_SIZE: usize = 20;

/// Default number of training patches extracted per class.
pub const DEFAULT_PATCHES_PER_CLASS: usize = 10_000;

/// Centered patches with Euclidean norm at or below this are treated as
/// zero-variance and map to the zero vector.
pub const NORM_FLOOR: f64 = 1e-12;

/// A grayscale image with intensities in [0, 1], stored row-major as
/// (height, width).
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pixels: Array2<f64>,
}

impl GrayImage {
    pub fn new(pixels: Array2<f64>) -> Result<Self> {
        let (h, w) = pixels.dim();
        if h == 0 || w == 0 {
            return Err(Error::InvalidInput(format!("empty image {w}x{h}")));
        }
        if pixels
            .iter()
            .any(|&v| !v.is_finite() || !(0.0..=1.0).contains(&v))
        {
            return Err(Error::InvalidInput(
                "image intensities must be finite and in [0, 1]".into(),
            ));
        }
        Ok(Self { pixels })
    }

    pub fn width(&self) -> usize {
        self.pixels.ncols()
    }

    pub fn height(&self) -> usize {
        self.pixels.nrows()
    }

    pub fn pixels(&self) -> &Array2<f64> {
        &self.pixels
    }

    /// Quantizes to 8-bit for PGM output, row-major.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect()
    }
}

/// Converts a decoded netpbm image to luminance: channels are scaled to
/// [0, 1] by maxval, then Y' = 0.299 R + 0.587 G + 0.114 B. Grayscale
/// input passes through scaled.
pub fn to_luminance(image: &PnmImage) -> Result<GrayImage> {
    match image {
        PnmImage::Gray {
            width,
            height,
            maxval,
            pixels,
        } => {
            let scale = 1.0 / *maxval as f64;
            let data: Vec<f64> = pixels.iter().map(|&p| p as f64 * scale).collect();
            let pixels = Array2::from_shape_vec((*height, *width), data)
                .map_err(|e| Error::Format(format!("bad raster shape: {e}")))?;
            GrayImage::new(pixels)
        }
        PnmImage::Rgb {
            width,
            height,
            maxval,
            pixels,
        } => {
            let scale = 1.0 / *maxval as f64;
            let data: Vec<f64> = pixels
                .chunks_exact(3)
                .map(|rgb| {
                    let r = rgb[0] as f64 * scale;
                    let g = rgb[1] as f64 * scale;
                    let b = rgb[2] as f64 * scale;
                    // Summing the red and blue terms first makes pure
                    // white land on exactly 1.0 in f64.
                    (0.299 * r + 0.114 * b + 0.587 * g).clamp(0.0, 1.0)
                })
                .collect();
            let pixels = Array2::from_shape_vec((*height, *width), data)
                .map_err(|e| Error::Format(format!("bad raster shape: {e}")))?;
            GrayImage::new(pixels)
        }
    }
}

/// Area-averaging downsample: every output pixel is the mean of its
/// factor x factor source block; right/bottom remainders are discarded.
pub fn downsample(img: &GrayImage, factor: usize) -> Result<GrayImage> {
    if factor == 0 {
        return Err(Error::InvalidInput("downsample factor must be positive".into()));
    }
    let out_h = img.height() / factor;
    let out_w = img.width() / factor;
    if out_h == 0 || out_w == 0 {
        return Err(Error::InvalidInput(format!(
            "factor {factor} collapses a {}x{} image to nothing",
            img.width(),
            img.height()
        )));
    }
    let inv = 1.0 / (factor * factor) as f64;
    let src = img.pixels();
    let mut out = Array2::zeros((out_h, out_w));
    for r in 0..out_h {
        for c in 0..out_w {
            let mut acc = 0.0;
            for i in 0..factor {
                for j in 0..factor {
                    acc += src[(r * factor + i, c * factor + j)];
                }
            }
            out[(r, c)] = acc * inv;
        }
    }
    GrayImage::new(out)
}

fn check_patch_fits(img: &GrayImage, patch: usize) -> Result<()> {
    if patch == 0 {
        return Err(Error::InvalidInput("patch size must be positive".into()));
    }
    if patch > img.width() || patch > img.height() {
        return Err(Error::InvalidInput(format!(
            "patch {patch} does not fit a {}x{} image",
            img.width(),
            img.height()
        )));
    }
    Ok(())
}

/// Writes the patch with top-left corner (top, left) into `out`,
/// vectorized column-major, mean-subtracted, and scaled to unit norm.
/// Zero-variance patches become the zero vector.
fn vectorize_patch(
    img: &GrayImage,
    top: usize,
    left: usize,
    patch: usize,
    mut out: ndarray::ArrayViewMut1<'_, f64>,
) {
    let src = img.pixels();
    let d = patch * patch;
    let mut mean = 0.0;
    for c in 0..patch {
        for r in 0..patch {
            let v = src[(top + r, left + c)];
            out[c * patch + r] = v;
            mean += v;
        }
    }
    mean /= d as f64;
    let mut sq = 0.0;
    for i in 0..d {
        out[i] -= mean;
        sq += out[i] * out[i];
    }
    let norm = sq.sqrt();
    if norm <= NORM_FLOOR {
        out.fill(0.0);
    } else {
        out.mapv_inplace(|v| v / norm);
    }
}

/// Draws `count` patches at uniform top-left positions, with replacement,
/// normalized per [`vectorize_patch`]. One column per patch, d = patch^2.
pub fn extract_random_patches(
    img: &GrayImage,
    patch: usize,
    count: usize,
    seed: u64,
) -> Result<Array2<f64>> {
    check_patch_fits(img, patch)?;
    if count == 0 {
        return Err(Error::InvalidInput("patch count must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Array2::zeros((patch * patch, count));
    for j in 0..count {
        let top = rng.random_range(0..=img.height() - patch);
        let left = rng.random_range(0..=img.width() - patch);
        vectorize_patch(img, top, left, patch, out.column_mut(j));
    }
    Ok(out)
}

/// Tiles the image with non-overlapping patches row-major, discarding
/// partial borders. Returns the patch matrix plus the grid shape
/// (rows, cols); column j holds the patch at (j / cols, j % cols).
pub fn extract_grid_patches(img: &GrayImage, patch: usize) -> Result<(Array2<f64>, usize, usize)> {
    check_patch_fits(img, patch)?;
    let rows = img.height() / patch;
    let cols = img.width() / patch;
    let mut out = Array2::zeros((patch * patch, rows * cols));
    for tr in 0..rows {
        for tc in 0..cols {
            vectorize_patch(img, tr * patch, tc * patch, patch, out.column_mut(tr * cols + tc));
        }
    }
    Ok((out, rows, cols))
}

/// Which side of the experiment an image belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::Format(format!(
                "split must be 'train' or 'test', got {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    /// Image path as written in the manifest; relative paths are resolved
    /// against the manifest's directory by the loader.
    pub path: String,
    pub label: String,
    pub split: Split,
}

/// The dataset listing: one image per line, `path<TAB>label<TAB>split`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DatasetManifest {
    entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Result<Self> {
        for (i, entry) in entries.iter().enumerate() {
            if entry.path.is_empty() {
                return Err(Error::InvalidInput(format!("entry {i} has an empty path")));
            }
            if entry.label.is_empty() {
                return Err(Error::InvalidInput(format!("entry {i} has an empty label")));
            }
            if entries[..i].iter().any(|e| e.path == entry.path) {
                return Err(Error::InvalidInput(format!(
                    "duplicate manifest path {:?}",
                    entry.path
                )));
            }
        }
        Ok(Self { entries })
    }

    /// Parses manifest text: tab-separated fields, `#` comment lines and
    /// blank lines ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::Format(format!(
                    "line {}: expected path<TAB>label<TAB>split, got {} fields",
                    lineno + 1,
                    fields.len()
                )));
            }
            entries.push(ManifestEntry {
                path: fields[0].to_string(),
                label: fields[1].to_string(),
                split: fields[2].parse()?,
            });
        }
        Self::new(entries)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for entry in &self.entries {
            out.push_str(&entry.path);
            out.push('\t');
            out.push_str(&entry.label);
            out.push('\t');
            out.push_str(&entry.split.to_string());
            out.push('\n');
        }
        out
    }

    pub fn read_from(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    /// Distinct labels in first-appearance order.
    pub fn labels(&self) -> Vec<String> {
        let mut labels: Vec<String> = Vec::new();
        for entry in &self.entries {
            if !labels.contains(&entry.label) {
                labels.push(entry.label.clone());
            }
        }
        labels
    }

    pub fn split_entries(&self, split: Split) -> Vec<&ManifestEntry> {
        self.entries.iter().filter(|e| e.split == split).collect()
    }
}

/// Parameters of the planted-subspace generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    /// Sample dimension d.
    pub dim: usize,
    pub classes: usize,
    /// Orthonormal planted atoms per class.
    pub planted_atoms: usize,
    /// Nonzero planted coefficients per sample.
    pub sparsity: usize,
    /// Standard deviation of the additive Gaussian noise.
    pub noise_sd: f64,
    pub patches_per_class: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 classes, got {}",
                self.classes
            )));
        }
        if self.planted_atoms == 0 || self.patches_per_class == 0 {
            return Err(Error::InvalidInput("all counts must be at least 1".into()));
        }
        if self.sparsity == 0 || self.sparsity > self.planted_atoms {
            return Err(Error::InvalidInput(format!(
                "sparsity {} out of range for {} planted atoms",
                self.sparsity, self.planted_atoms
            )));
        }
        if self.dim < self.classes * self.planted_atoms {
            return Err(Error::InvalidInput(format!(
                "dimension {} too small to plant {} classes x {} mutually orthogonal atoms",
                self.dim, self.classes, self.planted_atoms
            )));
        }
        if self.noise_sd < 0.0 || !self.noise_sd.is_finite() {
            return Err(Error::InvalidInput(format!(
                "noise sd must be finite and non-negative, got {}",
                self.noise_sd
            )));
        }
        Ok(())
    }
}

/// Ground-truth planted dictionaries: one orthonormal basis per class,
/// mutually orthogonal across classes.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedModel {
    bases: Vec<Dictionary>,
}

impl PlantedModel {
    pub fn class_count(&self) -> usize {
        self.bases.len()
    }

    pub fn basis(&self, class: usize) -> &Dictionary {
        &self.bases[class]
    }

    /// Draws `count` samples from the class subspace: basis times an
    /// L-sparse standard-normal coefficient vector, plus isotropic
    /// Gaussian noise, normalized to unit norm.
    pub fn draw_samples(
        &self,
        class: usize,
        count: usize,
        sparsity: usize,
        noise_sd: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<Array2<f64>> {
        let basis = self.basis(class);
        let d = basis.dim();
        let m = basis.atom_count();
        if sparsity == 0 || sparsity > m {
            return Err(Error::InvalidInput(format!(
                "sparsity {sparsity} out of range for {m} planted atoms"
            )));
        }
        let mut out = Array2::zeros((d, count));
        for j in 0..count {
            let chosen = rand::seq::index::sample(rng, m, sparsity);
            let mut sample = Array1::zeros(d);
            for atom in chosen.iter() {
                let coef: f64 = rng.sample(StandardNormal);
                sample.scaled_add(coef, &basis.atom(atom));
            }
            if noise_sd > 0.0 {
                for v in sample.iter_mut() {
                    let n: f64 = rng.sample(StandardNormal);
                    *v += noise_sd * n;
                }
            }
            let norm = sample.dot(&sample).sqrt();
            if norm > NORM_FLOOR {
                sample.mapv_inplace(|v| v / norm);
            }
            out.column_mut(j).assign(&sample);
        }
        Ok(out)
    }
}

/// Plants `classes` mutually orthogonal orthonormal bases of
/// `planted_atoms` columns each, by Gram-Schmidt over seeded Gaussian
/// draws.
pub fn plant_bases(dim: usize, classes: usize, planted_atoms: usize, seed: u64) -> Result<PlantedModel> {
    if dim < classes * planted_atoms {
        return Err(Error::InvalidInput(format!(
            "dimension {dim} too small to plant {classes} classes x {planted_atoms} mutually orthogonal atoms"
        )));
    }
    let total = classes * planted_atoms;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut columns: Vec<Array1<f64>> = Vec::with_capacity(total);
    while columns.len() < total {
        let mut v: Array1<f64> = Array1::zeros(dim);
        for x in v.iter_mut() {
            *x = rng.sample(StandardNormal);
        }
        // Two Gram-Schmidt passes keep the basis orthonormal to machine
        // precision.
        for _ in 0..2 {
            for q in &columns {
                let proj = q.dot(&v);
                v.scaled_add(-proj, q);
            }
        }
        let norm = v.dot(&v).sqrt();
        if norm < 1e-8 {
            continue; // degenerate draw, essentially impossible; redraw
        }
        v.mapv_inplace(|x| x / norm);
        columns.push(v);
    }
    let mut bases = Vec::with_capacity(classes);
    for class in 0..classes {
        let mut atoms = Array2::zeros((dim, planted_atoms));
        for a in 0..planted_atoms {
            atoms.column_mut(a).assign(&columns[class * planted_atoms + a]);
        }
        bases.push(Dictionary::new(atoms)?);
    }
    Ok(PlantedModel { bases })
}

/// Synthetic dataset: per-class sample matrices plus the planted truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    planted: PlantedModel,
    class_samples: Vec<Array2<f64>>,
}

impl SyntheticData {
    pub fn planted(&self) -> &PlantedModel {
        &self.planted
    }

    pub fn class_count(&self) -> usize {
        self.class_samples.len()
    }

    pub fn samples(&self, class: usize) -> &Array2<f64> {
        &self.class_samples[class]
    }

    /// The training view for one class: its samples as Y and everyone
    /// else's, concatenated in class order, as the complementary set.
    pub fn sample_set(&self, class: usize) -> Result<SampleSet> {
        let views: Vec<_> = (0..self.class_count())
            .filter(|&i| i != class)
            .map(|i| self.class_samples[i].view())
            .collect();
        let complementary = ndarray::concatenate(ndarray::Axis(1), &views)
            .map_err(|e| Error::InvalidInput(format!("cannot pool complementary samples: {e}")))?;
        SampleSet::new(self.class_samples[class].clone(), complementary)
    }
}

/// Draws the full synthetic dataset for `spec`: bases first, then each
/// class's samples in class order, all from one seeded ChaCha stream.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let planted = plant_bases(spec.dim, spec.classes, spec.planted_atoms, spec.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(1);
    let mut class_samples = Vec::with_capacity(spec.classes);
    for class in 0..spec.classes {
        class_samples.push(planted.draw_samples(
            class,
            spec.patches_per_class,
            spec.sparsity,
            spec.noise_sd,
            &mut rng,
        )?);
    }
    Ok(SyntheticData {
        planted,
        class_samples,
    })
}

/// Renders a d = patch^2 sample vector as a patch-sized tile repeated
/// `tiles_y` x `tiles_x` times. The tile is affinely mapped to [0, 1]
/// (constant tiles render as 0.5), so extraction recovers the sample
/// direction up to quantization: mean subtraction removes the offset and
/// normalization the positive scale.
pub fn render_tiled_sample(
    sample: &ArrayView1<'_, f64>,
    patch: usize,
    tiles_y: usize,
    tiles_x: usize,
) -> Result<GrayImage> {
    if patch == 0 || tiles_y == 0 || tiles_x == 0 {
        return Err(Error::InvalidInput("tile counts and patch must be positive".into()));
    }
    if sample.len() != patch * patch {
        return Err(Error::InvalidInput(format!(
            "sample has {} entries, expected {}",
            sample.len(),
            patch * patch
        )));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in sample.iter() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidInput("sample contains non-finite entries".into()));
    }
    let span = hi - lo;
    let mut tile = Array2::zeros((patch, patch));
    for c in 0..patch {
        for r in 0..patch {
            let v = sample[c * patch + r];
            tile[(r, c)] = if span > 0.0 { (v - lo) / span } else { 0.5 };
        }
    }
    let mut pixels = Array2::zeros((tiles_y * patch, tiles_x * patch));
    for ty in 0..tiles_y {
        for tx in 0..tiles_x {
            for r in 0..patch {
                for c in 0..patch {
                    pixels[(ty * patch + r, tx * patch + c)] = tile[(r, c)];
                }
            }
        }
    }
    GrayImage::new(pixels)
}
