//! Classification pipeline: sparse-representation patch decisions over the
//! concatenated class dictionaries, proportion voting for whole images, and
//! connected-region detection on the patch grid.

use ndarray::{s, Array1, ArrayView1, ArrayView2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sparse::{l1_encode, Dictionary};

/// Default l1 weight for classification-time coding of unit-norm patches.
pub const DEFAULT_LAMBDA: f64 = 0.1;

/// Default proportion-vote threshold.
pub const DEFAULT_VOTE_THRESHOLD: f64 = 0.5;

/// Default minimum connected-component size for region detection.
pub const DEFAULT_MIN_REGION_PATCHES: usize = 4;

/// Ordered per-class dictionaries plus the coding weight and label names.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    dictionaries: Vec<Dictionary>,
    lambda: f64,
    class_labels: Vec<String>,
    total: Dictionary,
    offsets: Vec<usize>,
}

impl ClassifierModel {
    pub fn new(
        dictionaries: Vec<Dictionary>,
        lambda: f64,
        class_labels: Vec<String>,
    ) -> Result<Self> {
        if dictionaries.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "a classifier needs at least 2 classes, got {}",
                dictionaries.len()
            )));
        }
        if class_labels.len() != dictionaries.len() {
            return Err(Error::InvalidInput(format!(
                "{} labels for {} dictionaries",
                class_labels.len(),
                dictionaries.len()
            )));
        }
        let d = dictionaries[0].dim();
        if dictionaries.iter().any(|dict| dict.dim() != d) {
            return Err(Error::InvalidInput(
                "all class dictionaries must share the sample dimension".into(),
            ));
        }
        if !lambda.is_finite() || lambda <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "lambda must be a positive finite real, got {lambda}"
            )));
        }
        for (i, label) in class_labels.iter().enumerate() {
            if label.is_empty() {
                return Err(Error::InvalidInput(format!("class {i} has an empty label")));
            }
            if class_labels[..i].contains(label) {
                return Err(Error::InvalidInput(format!(
                    "duplicate class label {label:?}"
                )));
            }
        }
        let refs: Vec<&Dictionary> = dictionaries.iter().collect();
        let total = Dictionary::concat(&refs)?;
        let mut offsets = Vec::with_capacity(dictionaries.len());
        let mut acc = 0;
        for dict in &dictionaries {
            offsets.push(acc);
            acc += dict.atom_count();
        }
        Ok(Self {
            dictionaries,
            lambda,
            class_labels,
            total,
            offsets,
        })
    }

    pub fn class_count(&self) -> usize {
        self.dictionaries.len()
    }

    pub fn dim(&self) -> usize {
        self.total.dim()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn class_labels(&self) -> &[String] {
        &self.class_labels
    }

    pub fn dictionaries(&self) -> &[Dictionary] {
        &self.dictionaries
    }

    pub fn dictionary(&self, class: usize) -> &Dictionary {
        &self.dictionaries[class]
    }

    /// All class dictionaries concatenated in class order.
    pub fn total_dictionary(&self) -> &Dictionary {
        &self.total
    }

    /// Index range of class `i`'s atoms within the concatenated dictionary.
    pub fn atom_range(&self, class: usize) -> std::ops::Range<usize> {
        let start = self.offsets[class];
        start..start + self.dictionaries[class].atom_count()
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.class_labels.iter().position(|l| l == label)
    }
}

/// One classified patch: the full code over the concatenated dictionary,
/// the per-class restricted residuals, and the argmin class.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchDecision {
    code: Array1<f64>,
    residuals: Vec<f64>,
    predicted_class: usize,
}

impl PatchDecision {
    /// Builds a decision from a code and its per-class residuals; the
    /// predicted class is the argmin residual, lowest index on ties.
    pub fn new(code: Array1<f64>, residuals: Vec<f64>) -> Result<Self> {
        if residuals.is_empty() {
            return Err(Error::InvalidInput("no residuals to rank".into()));
        }
        if residuals.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::InvalidInput(
                "residuals must be finite and non-negative".into(),
            ));
        }
        let mut predicted_class = 0;
        for (i, &r) in residuals.iter().enumerate() {
            if r < residuals[predicted_class] {
                predicted_class = i;
            }
        }
        Ok(Self {
            code,
            residuals,
            predicted_class,
        })
    }

    pub fn code(&self) -> &Array1<f64> {
        &self.code
    }

    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    pub fn predicted_class(&self) -> usize {
        self.predicted_class
    }
}

/// How patch labels aggregate into an image-level decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecisionMode {
    ProportionVote,
    RegionDetect,
}

/// Neighborhood used by region detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    Four,
    Eight,
}

/// Image-level decision parameters. `threshold` drives proportion voting;
/// `min_region_patches` and `connectivity` drive region detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageDecisionRule {
    pub mode: DecisionMode,
    pub threshold: f64,
    pub min_region_patches: usize,
    pub connectivity: Connectivity,
}

impl Default for ImageDecisionRule {
    fn default() -> Self {
        Self {
            mode: DecisionMode::ProportionVote,
            threshold: DEFAULT_VOTE_THRESHOLD,
            min_region_patches: DEFAULT_MIN_REGION_PATCHES,
            connectivity: Connectivity::Eight,
        }
    }
}

impl ImageDecisionRule {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.threshold) || !self.threshold.is_finite() {
            return Err(Error::InvalidInput(format!(
                "vote threshold must lie in [0, 1], got {}",
                self.threshold
            )));
        }
        if self.min_region_patches == 0 {
            return Err(Error::InvalidInput(
                "min_region_patches must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Predicted class per cell of the non-overlapping patch grid, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchGridLabels {
    rows: usize,
    cols: usize,
    labels: Vec<usize>,
    class_count: usize,
}

impl PatchGridLabels {
    pub fn new(rows: usize, cols: usize, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidInput(format!(
                "patch grid must be nonempty, got {rows}x{cols}"
            )));
        }
        if labels.len() != rows * cols {
            return Err(Error::InvalidInput(format!(
                "{} labels for a {rows}x{cols} grid",
                labels.len()
            )));
        }
        if class_count == 0 {
            return Err(Error::InvalidInput("class_count must be positive".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
            return Err(Error::InvalidInput(format!(
                "grid label {bad} out of range for {class_count} classes"
            )));
        }
        Ok(Self {
            rows,
            cols,
            labels,
            class_count,
        })
    }

    pub fn from_decisions(
        rows: usize,
        cols: usize,
        decisions: &[PatchDecision],
        class_count: usize,
    ) -> Result<Self> {
        let labels = decisions.iter().map(|d| d.predicted_class()).collect();
        Self::new(rows, cols, labels, class_count)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn label_at(&self, row: usize, col: usize) -> usize {
        self.labels[row * self.cols + col]
    }

    pub fn cell_count(&self) -> usize {
        self.labels.len()
    }

    pub fn count_of(&self, class: usize) -> usize {
        self.labels.iter().filter(|&&l| l == class).count()
    }
}

/// SRC decision for one patch: l1-code over the concatenated dictionary,
/// then pick the class whose restricted reconstruction leaves the smallest
/// residual.
pub fn classify_patch(y: &ArrayView1<'_, f64>, model: &ClassifierModel) -> Result<PatchDecision> {
    let code = l1_encode(y, model.total_dictionary(), model.lambda())?;
    let mut residuals = Vec::with_capacity(model.class_count());
    for i in 0..model.class_count() {
        let range = model.atom_range(i);
        let restricted = code.slice(s![range]);
        let recon = model.dictionary(i).atoms().dot(&restricted);
        let mut acc = 0.0;
        for (a, b) in y.iter().zip(recon.iter()) {
            let r = a - b;
            acc += r * r;
        }
        residuals.push(acc.sqrt());
    }
    PatchDecision::new(code, residuals)
}

/// Classifies every column of `patches` against the model; order of the
/// returned decisions matches column order.
pub fn classify_patches(
    patches: &ArrayView2<'_, f64>,
    model: &ClassifierModel,
) -> Result<Vec<PatchDecision>> {
    if patches.nrows() != model.dim() {
        return Err(Error::InvalidInput(format!(
            "patches have dimension {}, model expects {}",
            patches.nrows(),
            model.dim()
        )));
    }
    (0..patches.ncols())
        .into_par_iter()
        .map(|j| classify_patch(&patches.column(j), model))
        .collect()
}

/// Outcome of proportion voting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoteDecision {
    /// True when the positive-class proportion strictly exceeds the
    /// threshold.
    pub positive: bool,
    pub proportion: f64,
    pub positive_cells: usize,
    pub total_cells: usize,
}

/// Labels the image positive iff the fraction of cells predicted as
/// `positive_class` strictly exceeds `rule.threshold`.
pub fn classify_image_by_vote(
    grid: &PatchGridLabels,
    rule: &ImageDecisionRule,
    positive_class: usize,
) -> Result<VoteDecision> {
    if rule.mode != DecisionMode::ProportionVote {
        return Err(Error::InvalidInput(
            "classify_image_by_vote requires a proportion_vote rule".into(),
        ));
    }
    rule.validate()?;
    if positive_class >= grid.class_count() {
        return Err(Error::InvalidInput(format!(
            "positive class {positive_class} out of range for {} classes",
            grid.class_count()
        )));
    }
    if grid.cell_count() == 0 {
        return Err(Error::InvalidInput("empty patch grid".into()));
    }
    let positive_cells = grid.count_of(positive_class);
    let total_cells = grid.cell_count();
    let proportion = positive_cells as f64 / total_cells as f64;
    Ok(VoteDecision {
        positive: proportion > rule.threshold,
        proportion,
        positive_cells,
        total_cells,
    })
}

/// Outcome of region detection. `component_sizes` lists every connected
/// component of the target class in row-major discovery order; `mask` is
/// row-major over the grid and marks cells of qualifying components only.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionDecision {
    /// True when some component reaches `min_region_patches` cells.
    pub positive: bool,
    pub mask: Vec<bool>,
    pub component_sizes: Vec<usize>,
    pub largest_region: usize,
    pub qualifying_regions: usize,
}

/// Finds connected components of `target_class` cells under the rule's
/// connectivity; the image is positive iff some component has at least
/// `min_region_patches` cells, and the mask marks all such components.
pub fn detect_regions(
    grid: &PatchGridLabels,
    rule: &ImageDecisionRule,
    target_class: usize,
) -> Result<RegionDecision> {
    if rule.mode != DecisionMode::RegionDetect {
        return Err(Error::InvalidInput(
            "detect_regions requires a region_detect rule".into(),
        ));
    }
    rule.validate()?;
    if target_class >= grid.class_count() {
        return Err(Error::InvalidInput(format!(
            "target class {target_class} out of range for {} classes",
            grid.class_count()
        )));
    }
    if grid.cell_count() == 0 {
        return Err(Error::InvalidInput("empty patch grid".into()));
    }

    let rows = grid.rows();
    let cols = grid.cols();
    let neighbors: &[(isize, isize)] = match rule.connectivity {
        Connectivity::Four => &[(-1, 0), (1, 0), (0, -1), (0, 1)],
        Connectivity::Eight => &[
            (-1, -1),
            (-1, 0),
            (-1, 1),
            (0, -1),
            (0, 1),
            (1, -1),
            (1, 0),
            (1, 1),
        ],
    };

    let mut visited = vec![false; rows * cols];
    let mut mask = vec![false; rows * cols];
    let mut component_sizes = Vec::new();
    let mut qualifying_regions = 0;
    let mut largest_region = 0;

    for start in 0..rows * cols {
        if visited[start] || grid.labels()[start] != target_class {
            continue;
        }
        let mut component = vec![start];
        let mut frontier = vec![start];
        visited[start] = true;
        while let Some(cell) = frontier.pop() {
            let (r, c) = ((cell / cols) as isize, (cell % cols) as isize);
            for &(dr, dc) in neighbors {
                let (nr, nc) = (r + dr, c + dc);
                if nr < 0 || nc < 0 || nr >= rows as isize || nc >= cols as isize {
                    continue;
                }
                let idx = nr as usize * cols + nc as usize;
                if !visited[idx] && grid.labels()[idx] == target_class {
                    visited[idx] = true;
                    component.push(idx);
                    frontier.push(idx);
                }
            }
        }
        let size = component.len();
        component_sizes.push(size);
        largest_region = largest_region.max(size);
        if size >= rule.min_region_patches {
            qualifying_regions += 1;
            for idx in component {
                mask[idx] = true;
            }
        }
    }

    Ok(RegionDecision {
        positive: qualifying_regions > 0,
        mask,
        component_sizes,
        largest_region,
        qualifying_regions,
    })
}
