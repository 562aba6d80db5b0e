//! The four subcommands as plain functions; the binary is a thin shell
//! around them and tests can drive the exact same code paths.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::{concatenate, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dfdl::data::render_tiled_sample;
use dfdl::netpbm::{read_pnm, write_pgm};
use dfdl::{
    classify_image_by_vote, classify_patches, detect_regions, downsample, extract_grid_patches,
    extract_random_patches, generate_synthetic, load_model, save_model, to_luminance, train_dfdl,
    write_trace, ClassifierModel, DatasetManifest, DecisionMode, Error, GrayImage,
    ImageDecisionRule, ManifestEntry, PatchGridLabels, Result, SampleSet, Split, SyntheticSpec,
    TrainConfig,
};

use crate::args::{ClassifyArgs, ConnectivityFlag, EvalArgs, ModeFlag, SynthArgs, TrainArgs};
use crate::report::{ReportConfig, RunReport};

/// Reads an image as luminance, optionally downsampled.
fn load_gray(path: &Path, factor: usize) -> Result<GrayImage> {
    let gray = to_luminance(&read_pnm(path)?)?;
    if factor > 1 {
        downsample(&gray, factor)
    } else {
        Ok(gray)
    }
}

/// Manifest paths are relative to the manifest file itself.
fn resolve(base: Option<&Path>, relative: &str) -> PathBuf {
    let path = Path::new(relative);
    if path.is_absolute() {
        return path.to_path_buf();
    }
    match base {
        Some(dir) => dir.join(path),
        None => path.to_path_buf(),
    }
}

/// Patch side length for a model: the flag if given, else the square
/// root of the model dimension. Either way patch^2 must equal d.
fn patch_side(model_dim: usize, flag: Option<usize>) -> Result<usize> {
    let patch = match flag {
        Some(p) => p,
        None => (model_dim as f64).sqrt().round() as usize,
    };
    if patch * patch != model_dim {
        return Err(Error::InvalidInput(format!(
            "patch size {patch} yields {}-dimensional patches but the model expects {model_dim}; \
             pass --patch-size matching the model",
            patch * patch
        )));
    }
    Ok(patch)
}

/// Majority patch label; ties break toward the lowest class index.
fn plurality_class(grid: &PatchGridLabels) -> usize {
    let mut best = 0;
    for class in 1..grid.class_count() {
        if grid.count_of(class) > grid.count_of(best) {
            best = class;
        }
    }
    best
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn cmd_train(args: &TrainArgs) -> Result<()> {
    if args.patches_per_class == 0 {
        return Err(Error::InvalidInput("--patches-per-class must be positive".into()));
    }
    let manifest = DatasetManifest::read_from(&args.manifest)?;
    let base = args.manifest.parent();
    let labels = manifest.labels();
    if labels.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "training needs at least two classes, the manifest lists {}",
            labels.len()
        )));
    }

    let mut images: Vec<Vec<GrayImage>> = vec![Vec::new(); labels.len()];
    for entry in manifest.split_entries(Split::Train) {
        let class = labels
            .iter()
            .position(|l| *l == entry.label)
            .expect("manifest labels cover every entry");
        images[class].push(load_gray(&resolve(base, &entry.path), args.downsample)?);
    }
    if let Some(missing) = images.iter().position(Vec::is_empty) {
        return Err(Error::InvalidInput(format!(
            "class {:?} has no train images",
            labels[missing]
        )));
    }

    // One master stream hands every (class, image) pair its own patch
    // seed, so runs replay bit-identically for a fixed flag set.
    let mut seeder = ChaCha8Rng::seed_from_u64(args.seed);
    let mut class_patches: Vec<Array2<f64>> = Vec::with_capacity(labels.len());
    for class_images in &images {
        let n = class_images.len();
        let mut parts = Vec::new();
        for (j, img) in class_images.iter().enumerate() {
            let count = args.patches_per_class / n + usize::from(j < args.patches_per_class % n);
            let seed = seeder.random();
            if count == 0 {
                continue;
            }
            parts.push(extract_random_patches(img, args.patch_size, count, seed)?);
        }
        let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
        let stacked = concatenate(Axis(1), &views)
            .map_err(|e| Error::InvalidInput(format!("cannot pool class patches: {e}")))?;
        class_patches.push(stacked);
    }

    let mut dictionaries = Vec::with_capacity(labels.len());
    let mut traces = Vec::with_capacity(labels.len());
    for class in 0..labels.len() {
        let others: Vec<_> = (0..labels.len())
            .filter(|&i| i != class)
            .map(|i| class_patches[i].view())
            .collect();
        let complementary = concatenate(Axis(1), &others)
            .map_err(|e| Error::InvalidInput(format!("cannot pool complementary patches: {e}")))?;
        let samples = SampleSet::new(class_patches[class].clone(), complementary)?;
        let config = TrainConfig {
            bases: args.bases,
            sparsity: args.sparsity,
            rho: args.rho,
            max_outer_iters: args.iters,
            objective_tol: args.tol,
            rho_shrink: args.rho_shrink,
            seed: args.seed.wrapping_add(class as u64),
            update_sweeps: args.sweeps,
        };
        let started = Instant::now();
        let (dict, trace) = train_dfdl(&samples, &config)?;
        println!(
            "class={} iterations={} converged={} secs={:.2}",
            labels[class],
            trace.iterations.len(),
            trace.converged,
            started.elapsed().as_secs_f64()
        );
        dictionaries.push(dict);
        traces.push((labels[class].clone(), trace));
    }

    let model = ClassifierModel::new(dictionaries, args.lambda, labels)?;
    let bytes = save_model(&model, &args.decision_rule(), &args.out)?;
    if let Some(trace_path) = &args.trace {
        write_trace(&traces, trace_path)?;
    }
    println!("wrote {} ({bytes} bytes)", args.out.display());
    Ok(())
}

fn rule_with_overrides(stored: ImageDecisionRule, args: &ClassifyArgs) -> ImageDecisionRule {
    ImageDecisionRule {
        mode: args.mode.map(ModeFlag::to_mode).unwrap_or(stored.mode),
        threshold: args.threshold.unwrap_or(stored.threshold),
        min_region_patches: args.min_region.unwrap_or(stored.min_region_patches),
        connectivity: args
            .connectivity
            .map(ConnectivityFlag::to_connectivity)
            .unwrap_or(stored.connectivity),
    }
}

fn grid_text(grid: &PatchGridLabels) -> String {
    let mut out = String::new();
    for r in 0..grid.rows() {
        for c in 0..grid.cols() {
            if c > 0 {
                out.push('\t');
            }
            out.push_str(&grid.label_at(r, c).to_string());
        }
        out.push('\n');
    }
    out
}

/// Classifies one image; the returned line is path, plurality label,
/// and the decision statistics, tab-separated.
pub fn cmd_classify(args: &ClassifyArgs) -> Result<String> {
    let (model, stored_rule) = load_model(&args.model)?;
    let patch = patch_side(model.dim(), args.patch_size)?;
    let image = load_gray(&args.image, args.downsample)?;
    let (patches, rows, cols) = extract_grid_patches(&image, patch)?;

    let zero_energy = (0..patches.ncols())
        .filter(|&j| patches.column(j).iter().all(|&v| v == 0.0))
        .count();
    if zero_energy > 0 {
        eprintln!(
            "warning: {zero_energy} zero-energy (constant) patches fall back to {:?} by tie-break",
            model.class_labels()[0]
        );
    }

    let decisions = classify_patches(&patches.view(), &model)?;
    let grid = PatchGridLabels::from_decisions(rows, cols, &decisions, model.class_count())?;
    let label = model.class_labels()[plurality_class(&grid)].clone();

    if let Some(path) = &args.grid_dump {
        write_bytes(path, grid_text(&grid).as_bytes())?;
    }

    let rule = rule_with_overrides(stored_rule, args);
    let positive = match &args.positive_class {
        Some(name) => model
            .class_labels()
            .iter()
            .position(|l| l == name)
            .ok_or_else(|| {
                Error::InvalidInput(format!("class {name:?} is not in the model"))
            })?,
        None => model.class_count() - 1,
    };

    let image_name = args.image.display();
    match rule.mode {
        DecisionMode::ProportionVote => {
            if args.mask.is_some() {
                return Err(Error::InvalidInput(
                    "--mask requires region mode (--mode region)".into(),
                ));
            }
            let vote = classify_image_by_vote(&grid, &rule, positive)?;
            Ok(format!(
                "{image_name}\t{label}\tpositive={}\tproportion={}\tpositive_cells={}\ttotal_cells={}",
                vote.positive, vote.proportion, vote.positive_cells, vote.total_cells
            ))
        }
        DecisionMode::RegionDetect => {
            let detection = detect_regions(&grid, &rule, positive)?;
            if let Some(path) = &args.mask {
                let bytes: Vec<u8> = detection
                    .mask
                    .iter()
                    .map(|&hit| if hit { 255 } else { 0 })
                    .collect();
                write_pgm(path, cols, rows, &bytes)?;
            }
            Ok(format!(
                "{image_name}\t{label}\tpositive={}\tlargest_region={}\tqualifying_regions={}\tcomponents={}",
                detection.positive,
                detection.largest_region,
                detection.qualifying_regions,
                detection.component_sizes.len()
            ))
        }
    }
}

/// Scores the manifest's test split image by image; also writes the
/// JSON report when requested.
pub fn cmd_eval(args: &EvalArgs) -> Result<RunReport> {
    let started = Instant::now();
    let (model, _rule) = load_model(&args.model)?;
    let patch = patch_side(model.dim(), args.patch_size)?;
    let manifest = DatasetManifest::read_from(&args.manifest)?;
    let base = args.manifest.parent();
    let test = manifest.split_entries(Split::Test);
    if test.is_empty() {
        return Err(Error::InvalidInput("manifest has no test entries".into()));
    }

    let labels: Vec<String> = model.class_labels().to_vec();
    let c = labels.len();
    let mut confusion = vec![vec![0u64; c]; c];
    let mut patch_counts = vec![0u64; c];
    for entry in &test {
        let truth = labels.iter().position(|l| *l == entry.label).ok_or_else(|| {
            Error::InvalidInput(format!(
                "manifest label {:?} is not a class of the model",
                entry.label
            ))
        })?;
        let image = load_gray(&resolve(base, &entry.path), args.downsample)?;
        let (patches, rows, cols) = extract_grid_patches(&image, patch)?;
        let decisions = classify_patches(&patches.view(), &model)?;
        let grid = PatchGridLabels::from_decisions(rows, cols, &decisions, c)?;
        confusion[truth][plurality_class(&grid)] += 1;
        patch_counts[truth] += grid.cell_count() as u64;
    }
    if let Some(missing) = (0..c).find(|&t| confusion[t].iter().sum::<u64>() == 0) {
        return Err(Error::InvalidInput(format!(
            "class {:?} has no test images",
            labels[missing]
        )));
    }

    let config = ReportConfig {
        model: args.model.display().to_string(),
        manifest: args.manifest.display().to_string(),
        patch_size: patch,
        downsample: args.downsample,
        lambda: model.lambda(),
    };
    let report = RunReport::new(
        labels,
        confusion,
        patch_counts,
        started.elapsed().as_secs_f64(),
        config,
    )?;
    if let Some(path) = &args.json {
        write_bytes(path, report.to_json().as_bytes())?;
    }
    Ok(report)
}

/// Assembles one image from the next tiles^2 sample columns, advancing
/// the column cursor.
fn mosaic(samples: &Array2<f64>, cursor: &mut usize, patch: usize, tiles: usize) -> Result<GrayImage> {
    let mut pixels = Array2::zeros((tiles * patch, tiles * patch));
    for ty in 0..tiles {
        for tx in 0..tiles {
            let tile = render_tiled_sample(&samples.column(*cursor), patch, 1, 1)?;
            *cursor += 1;
            for r in 0..patch {
                for c in 0..patch {
                    pixels[(ty * patch + r, tx * patch + c)] = tile.pixels()[(r, c)];
                }
            }
        }
    }
    GrayImage::new(pixels)
}

pub fn cmd_synth(args: &SynthArgs) -> Result<()> {
    if args.tiles == 0 {
        return Err(Error::InvalidInput("--tiles must be positive".into()));
    }
    if args.train_images + args.test_images == 0 {
        return Err(Error::InvalidInput(
            "need at least one train or test image per class".into(),
        ));
    }
    let per_image = args.tiles * args.tiles;
    let spec = SyntheticSpec {
        dim: args.patch_size * args.patch_size,
        classes: args.classes,
        planted_atoms: args.planted_atoms,
        sparsity: args.sparsity,
        noise_sd: args.noise_sd,
        patches_per_class: (args.train_images + args.test_images) * per_image,
        seed: args.seed,
    };
    let data = generate_synthetic(&spec)?;
    fs::create_dir_all(&args.out_dir).map_err(|source| Error::Io {
        path: args.out_dir.clone(),
        source,
    })?;

    let mut entries = Vec::new();
    for class in 0..args.classes {
        let samples = data.samples(class);
        let mut cursor = 0;
        for (split, count) in [(Split::Train, args.train_images), (Split::Test, args.test_images)] {
            for j in 0..count {
                let image = mosaic(samples, &mut cursor, args.patch_size, args.tiles)?;
                let name = format!("class{class}_{split}_{j:04}.pgm");
                write_pgm(
                    &args.out_dir.join(&name),
                    image.width(),
                    image.height(),
                    &image.to_bytes(),
                )?;
                entries.push(ManifestEntry {
                    path: name,
                    label: format!("class{class}"),
                    split,
                });
            }
        }
    }
    let image_count = entries.len();
    DatasetManifest::new(entries)?.write_to(&args.out_dir.join("manifest.tsv"))?;
    println!(
        "wrote {image_count} images and manifest.tsv to {}",
        args.out_dir.display()
    );
    Ok(())
}
