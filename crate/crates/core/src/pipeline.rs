//! End-to-end orchestration: training, hyper-parameter search, prediction,
//! evaluation and benchmarking.
//!
//! Images are streamed: the feature stack of one image is dropped before the
//! next image is loaded. Pixel batches are split into fixed-size chunks, so
//! results do not depend on how many worker threads execute them.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use image::{ImageBuffer, Luma};
use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{
    load_image, load_labels, read_label_png, rgb_to_yuv, sample_training_pixels, ColorSpace,
    DatasetManifest, Image, LabelMap, PixelSample,
};
use crate::features::{configured_op_count, extract_image, feature_dimension, ExtractorConfig, FeatureStack, ScaleRule};
use crate::haar_swt::{paper_op_count, OpReport};
use crate::linear_svm::{self, argmax, LinearModel, TrainConfig, TrainingSet};
use crate::metrics::{boundary_exclusion_mask, confusion_matrix, ConfusionMatrix};
use crate::model::{ColorMode, ModelBundle};
use crate::rff::{self, RffConfig, RffProjection};
use crate::{par, Error, Plane, Result};

/// Pixels per transform/scoring chunk.
const CHUNK: usize = 256;

/// All tunables of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub extractor: ExtractorConfig,
    pub color: ColorMode,
    pub m_tilde: usize,
    pub gamma: f64,
    pub lambda: f64,
    pub sample_fraction: f64,
    pub epochs: usize,
    /// Master seed; projection, pixel sampling and SGD shuffling derive
    /// their own seeds from it.
    pub seed: u64,
    pub t0: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            extractor: ExtractorConfig::default(),
            color: ColorMode::Yuv,
            m_tilde: 5000,
            gamma: 1.0,
            lambda: 1e-4,
            sample_fraction: 0.02,
            epochs: 5,
            seed: 0,
            t0: None,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse `{value}` for `{key}`")))
}

/// Parses a comma-separated list such as `1,2,4`.
pub fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

impl RunConfig {
    pub fn rff_seed(&self) -> u64 {
        self.seed
    }

    pub fn sample_seed(&self) -> u64 {
        self.seed.wrapping_add(1)
    }

    pub fn sgd_seed(&self) -> u64 {
        self.seed.wrapping_add(2)
    }

    /// Sets one option by name. Keys match the command-line flags without
    /// dashes (`mtilde`, `sample-frac` or `sample_frac`, ...).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim().replace('_', "-").as_str() {
            "gamma" => self.gamma = parse(key, value)?,
            "lambda" => self.lambda = parse(key, value)?,
            "mtilde" | "m-tilde" => self.m_tilde = parse(key, value)?,
            "sample-frac" | "sample-fraction" => self.sample_fraction = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "t0" => self.t0 = Some(parse(key, value)?),
            "scales" => self.extractor.image_scales = parse_list(key, value)?,
            "levels" => self.extractor.levels = parse(key, value)?,
            "depth" => self.extractor.depth = parse(key, value)?,
            "pool-factor" => self.extractor.pool_factor = parse(key, value)?,
            "scale-rule" => {
                self.extractor.scale_rule = match value {
                    "nondecreasing" | "non-decreasing" => ScaleRule::NonDecreasing,
                    "all" => ScaleRule::All,
                    _ => return Err(Error::Config(format!("unknown scale rule `{value}`"))),
                }
            }
            "centered" => self.extractor.centered = parse(key, value)?,
            "color" => {
                self.color = match value {
                    "yuv" => ColorMode::Yuv,
                    "raw" => ColorMode::Raw,
                    _ => return Err(Error::Config(format!("unknown color mode `{value}`"))),
                }
            }
            other => return Err(Error::Config(format!("unknown option `{other}`"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            self.set(key, value)?;
        }
        Ok(())
    }

    /// Validates everything and rounds `gamma` to the `f32` value that the
    /// model file will carry.
    pub fn validated(&self) -> Result<RunConfig> {
        self.extractor.validate()?;
        let mut cfg = self.clone();
        cfg.gamma = self.gamma as f32 as f64;
        self.rff_config_for(cfg.gamma).validate()?;
        self.train_config_for(self.lambda).validate()?;
        if !(self.sample_fraction > 0.0 && self.sample_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "sample fraction {} is not in (0, 1]",
                self.sample_fraction
            )));
        }
        Ok(cfg)
    }

    fn rff_config_for(&self, gamma: f64) -> RffConfig {
        RffConfig {
            m_tilde: self.m_tilde,
            gamma,
            seed: self.rff_seed(),
        }
    }

    fn train_config_for(&self, lambda: f64) -> TrainConfig {
        TrainConfig {
            lambda,
            epochs: self.epochs,
            seed: self.sgd_seed(),
            t0: self.t0,
        }
    }
}

/// Applies the color handling of a model or run to a loaded image.
pub fn prepare_image(image: Image, color: ColorMode) -> Result<Image> {
    match color {
        ColorMode::Raw => Ok(image),
        ColorMode::Yuv if image.color() == ColorSpace::Rgb => rgb_to_yuv(&image),
        ColorMode::Yuv => Err(Error::Config(format!(
            "color mode yuv needs an RGB image, got {} channel(s) ({})",
            image.channel_count(),
            image.color()
        ))),
    }
}

/// Row-major pixel indices in `[start, end)` gathered into an `n x m` matrix.
fn gather_rows(stack: &FeatureStack, pixels: impl ExactSizeIterator<Item = usize>) -> Array2<f64> {
    let n = pixels.len();
    let mut buf = Vec::with_capacity(n * stack.dimension());
    stack.gather(pixels, &mut buf);
    Array2::from_shape_vec((n, stack.dimension()), buf).expect("gathered shape")
}

/// Random-feature transform of many rows, chunked.
pub fn transform_rows(projection: &RffProjection, rows: &Array2<f64>, gamma: f64) -> Result<Array2<f64>> {
    let chunks = rows.nrows().div_ceil(CHUNK);
    let parts = par::map_indexed(chunks, |c| {
        let end = ((c + 1) * CHUNK).min(rows.nrows());
        projection.transform_batch(rows.slice(ndarray::s![c * CHUNK..end, ..]), gamma)
    });
    let parts = parts.into_iter().collect::<Result<Vec<_>>>()?;
    let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
    if views.is_empty() {
        return Ok(Array2::zeros((0, projection.output_dim())));
    }
    ndarray::concatenate(Axis(0), &views).map_err(|e| Error::Config(e.to_string()))
}

/// Scores of every pixel of a stack under several classifiers sharing one
/// projection. Returns one `pixels x K` matrix per classifier.
fn score_stack(
    stack: &FeatureStack,
    projection: &RffProjection,
    gamma: f64,
    classifiers: &[&LinearModel],
) -> Result<Vec<Array2<f64>>> {
    let pixels = stack.width() * stack.height();
    let chunks = pixels.div_ceil(CHUNK);
    let parts = par::map_indexed(chunks, |c| -> Result<Vec<Array2<f64>>> {
        let end = ((c + 1) * CHUNK).min(pixels);
        let rows = gather_rows(stack, c * CHUNK..end);
        let phi = projection.transform_batch(rows.view(), gamma)?;
        classifiers.iter().map(|m| m.scores_batch(phi.view())).collect()
    });
    let parts = parts.into_iter().collect::<Result<Vec<_>>>()?;
    (0..classifiers.len())
        .map(|k| {
            let views: Vec<_> = parts.iter().map(|p| p[k].view()).collect();
            ndarray::concatenate(Axis(0), &views).map_err(|e| Error::Config(e.to_string()))
        })
        .collect()
}

fn labels_from_scores(scores: &Array2<f64>, width: usize, height: usize) -> LabelMap {
    let labels = scores
        .outer_iter()
        .map(|row| argmax(row.as_slice().expect("contiguous")) as u8)
        .collect();
    LabelMap::new(width, height, labels).expect("one score row per pixel")
}

#[derive(Debug, Clone)]
pub struct Segmentation {
    pub labels: LabelMap,
    /// One plane per class.
    pub scores: Vec<Plane>,
}

/// A loaded model with its regenerated projection.
#[derive(Debug, Clone)]
pub struct Segmenter {
    bundle: ModelBundle,
    projection: RffProjection,
}

impl Segmenter {
    pub fn new(bundle: ModelBundle) -> Result<Self> {
        bundle.validate()?;
        let projection = bundle.projection()?;
        Ok(Self { bundle, projection })
    }

    pub fn bundle(&self) -> &ModelBundle {
        &self.bundle
    }

    pub fn projection(&self) -> &RffProjection {
        &self.projection
    }

    /// Color conversion and channel-count check.
    pub fn prepare(&self, image: Image) -> Result<Image> {
        let image = prepare_image(image, self.bundle.color)?;
        if image.channel_count() != self.bundle.channels {
            return Err(Error::mismatch(
                format!("{} channels", self.bundle.channels),
                format!("{} channels", image.channel_count()),
            ));
        }
        Ok(image)
    }

    /// Segments an image that has already gone through [`Segmenter::prepare`].
    pub fn segment_prepared(&self, image: &Image) -> Result<Segmentation> {
        let stack = extract_image(image, &self.bundle.extractor)?;
        let scores = score_stack(&stack, &self.projection, self.bundle.rff.gamma, &[&self.bundle.classifier])?
            .pop()
            .expect("one classifier");
        let (w, h) = (image.width(), image.height());
        let planes = scores
            .axis_iter(Axis(1))
            .map(|col| Plane::new(w, h, col.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Segmentation {
            labels: labels_from_scores(&scores, w, h),
            scores: planes,
        })
    }

    pub fn segment(&self, image: Image) -> Result<Segmentation> {
        let image = self.prepare(image)?;
        self.segment_prepared(&image)
    }

    pub fn segment_file(&self, path: &Path) -> Result<Segmentation> {
        self.segment(load_image(path)?)
    }
}

/// Class names from the manifest, or `class0..` for `max label + 1` classes.
fn resolve_classes(manifest: &DatasetManifest) -> Result<Vec<String>> {
    if !manifest.class_names.is_empty() {
        return Ok(manifest.class_names.clone());
    }
    let mut max = None;
    for (_, lbl) in &manifest.entries {
        let m = read_label_png(lbl)?;
        max = max.max(m.max_label());
    }
    let count = max.ok_or(Error::NoEligiblePixels)? as usize + 1;
    Ok((0..count).map(|k| format!("class{k}")).collect())
}

fn load_all_labels(manifest: &DatasetManifest, classes: usize) -> Result<Vec<LabelMap>> {
    manifest
        .entries
        .iter()
        .map(|(_, lbl)| load_labels(lbl, classes))
        .collect()
}

/// Feature rows of sampled pixels, in sample order, plus the channel count.
fn sampled_features(
    manifest: &DatasetManifest,
    samples: &[PixelSample],
    cfg: &RunConfig,
) -> Result<(Array2<f64>, usize)> {
    let mut channels = None;
    let mut blocks = Vec::new();
    let mut k = 0;
    while k < samples.len() {
        let image_idx = samples[k].image;
        let end = k + samples[k..].iter().take_while(|s| s.image == image_idx).count();
        let (img_path, _) = &manifest.entries[image_idx];
        let image = prepare_image(load_image(img_path)?, cfg.color)?;
        match channels {
            None => channels = Some(image.channel_count()),
            Some(c) if c != image.channel_count() => {
                return Err(Error::mismatch(
                    format!("{c} channels"),
                    format!("{} channels in {}", image.channel_count(), img_path.display()),
                ))
            }
            _ => {}
        }
        let stack = extract_image(&image, &cfg.extractor)?;
        let w = stack.width();
        blocks.push(gather_rows(&stack, samples[k..end].iter().map(|s| s.row * w + s.col)));
        k = end;
    }
    let channels = channels.ok_or(Error::NoEligiblePixels)?;
    let views: Vec<_> = blocks.iter().map(|b| b.view()).collect();
    let rows = ndarray::concatenate(Axis(0), &views).map_err(|e| Error::Config(e.to_string()))?;
    Ok((rows, channels))
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub bundle: ModelBundle,
    pub feature_dim: usize,
    pub samples: usize,
    pub objective: f64,
    pub epoch_objectives: Vec<f64>,
    pub t0: f64,
}

/// Load → color conversion → features → pixel sampling → random features →
/// SVM. Errors carry the name of the failing stage.
pub fn train(manifest: &DatasetManifest, cfg: &RunConfig) -> Result<TrainOutcome> {
    let cfg = cfg.validated().map_err(|e| e.in_stage("config"))?;
    let class_names = resolve_classes(manifest).map_err(|e| e.in_stage("labels"))?;
    let labels = load_all_labels(manifest, class_names.len()).map_err(|e| e.in_stage("labels"))?;
    let samples = sample_training_pixels(&labels, cfg.sample_fraction, cfg.sample_seed())
        .map_err(|e| e.in_stage("sampling"))?;
    drop(labels);
    let (features, channels) =
        sampled_features(manifest, &samples, &cfg).map_err(|e| e.in_stage("feature extraction"))?;
    let feature_dim = features.ncols();
    debug_assert_eq!(feature_dim, feature_dimension(&cfg.extractor, channels));

    let rff_cfg = cfg.rff_config_for(cfg.gamma);
    let projection = rff::generate(&rff_cfg, feature_dim).map_err(|e| e.in_stage("random features"))?;
    let phi = transform_rows(&projection, &features, cfg.gamma).map_err(|e| e.in_stage("random features"))?;
    drop(features);
    let set = TrainingSet::new(phi, samples.iter().map(|s| s.class as usize).collect())
        .map_err(|e| e.in_stage("svm"))?;
    let report = linear_svm::train_with_trace(&set, class_names.len(), &cfg.train_config_for(cfg.lambda))
        .map_err(|e| e.in_stage("svm"))?;
    let objective = linear_svm::hinge_objective(&report.model, &set, cfg.lambda).map_err(|e| e.in_stage("svm"))?;

    let bundle = ModelBundle {
        extractor: cfg.extractor.clone(),
        channels,
        color: cfg.color,
        rff: rff_cfg,
        class_names,
        classifier: report.model,
    };
    Ok(TrainOutcome {
        bundle,
        feature_dim,
        samples: samples.len(),
        objective,
        epoch_objectives: report.epoch_objectives,
        t0: report.t0,
    })
}

/// Confusion matrix of a segmenter over a manifest, with boundary exclusion.
pub fn evaluate(segmenter: &Segmenter, manifest: &DatasetManifest, boundary_radius: f64) -> Result<ConfusionMatrix> {
    let classes = segmenter.bundle().class_count();
    let mut cm = ConfusionMatrix::new(classes);
    for (img, lbl) in &manifest.entries {
        let truth = load_labels(lbl, classes)?;
        let seg = segmenter.segment_file(img)?;
        let mask = boundary_exclusion_mask(&truth, boundary_radius);
        cm.merge(&confusion_matrix(&seg.labels, &truth, Some(&mask), classes)?);
    }
    Ok(cm)
}

/// Confusion matrix over precomputed `(prediction, truth)` pairs.
pub fn evaluate_label_pairs(pairs: &[(LabelMap, LabelMap)], classes: usize, boundary_radius: f64) -> Result<ConfusionMatrix> {
    let mut cm = ConfusionMatrix::new(classes);
    for (pred, truth) in pairs {
        let mask = boundary_exclusion_mask(truth, boundary_radius);
        cm.merge(&confusion_matrix(pred, truth, Some(&mask), classes)?);
    }
    Ok(cm)
}

/// Writes one 16-bit PNG per class (`score_<k>.png`) with the scores mapped
/// affinely from `[min, max]` to `[0, 65535]`, and `scores.txt` listing
/// `class name min max` so the values can be recovered.
pub fn write_score_planes(dir: &Path, scores: &[Plane], class_names: &[String]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut sidecar = String::from("# class\tname\tmin\tmax\n");
    for (k, plane) in scores.iter().enumerate() {
        let lo = plane.values().iter().copied().fold(f64::INFINITY, f64::min);
        let hi = plane.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = if hi > lo { hi - lo } else { 1.0 };
        let buf = ImageBuffer::<Luma<u16>, _>::from_fn(plane.width() as u32, plane.height() as u32, |x, y| {
            Luma([(((plane[(y as usize, x as usize)] - lo) / span) * 65535.0).round() as u16])
        });
        let path = dir.join(format!("score_{k}.png"));
        buf.save(&path).map_err(|source| Error::Image { path, source })?;
        let name = class_names.get(k).map_or("-", String::as_str);
        let _ = writeln!(sidecar, "{k}\t{name}\t{lo:e}\t{hi:e}");
    }
    let path = dir.join("scores.txt");
    fs::write(&path, sidecar).map_err(|e| Error::io(&path, e))
}

/// How `tune` splits images into training and validation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Split {
    Folds(usize),
    Holdout(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuneRow {
    pub gamma: f64,
    pub lambda: f64,
    pub pixel_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneOutcome {
    /// Grid rows sorted by gamma, then lambda.
    pub table: Vec<TuneRow>,
    pub best: TuneRow,
}

fn splits(n: usize, split: Split, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    match split {
        Split::Folds(k) => {
            if k < 2 || k > n {
                return Err(Error::Config(format!("{k} folds for {n} images")));
            }
            Ok((0..k)
                .map(|f| {
                    let (mut train, mut val) = (Vec::new(), Vec::new());
                    for (pos, &idx) in order.iter().enumerate() {
                        if pos % k == f { val.push(idx) } else { train.push(idx) }
                    }
                    train.sort_unstable();
                    val.sort_unstable();
                    (train, val)
                })
                .collect())
        }
        Split::Holdout(frac) => {
            let val_count = (frac * n as f64).round() as usize;
            if !(frac > 0.0 && frac < 1.0) || val_count == 0 || val_count >= n {
                return Err(Error::Config(format!("holdout fraction {frac} leaves no train or validation images of {n}")));
            }
            let (mut val, mut train) = (order[..val_count].to_vec(), order[val_count..].to_vec());
            train.sort_unstable();
            val.sort_unstable();
            Ok(vec![(train, val)])
        }
    }
}

/// Grid search over `gammas x lambdas` by pooled validation pixel accuracy.
/// Ties prefer the smaller gamma, then the smaller lambda.
pub fn tune(
    manifest: &DatasetManifest,
    cfg: &RunConfig,
    gammas: &[f64],
    lambdas: &[f64],
    split: Split,
    boundary_radius: f64,
) -> Result<TuneOutcome> {
    if gammas.is_empty() || lambdas.is_empty() {
        return Err(Error::Config("tune needs non-empty gamma and lambda grids".into()));
    }
    let cfg = cfg.validated()?;
    let mut gammas: Vec<f64> = gammas.iter().map(|&g| g as f32 as f64).collect();
    let mut lambdas = lambdas.to_vec();
    gammas.sort_by(f64::total_cmp);
    gammas.dedup();
    lambdas.sort_by(f64::total_cmp);
    lambdas.dedup();
    for &g in &gammas {
        cfg.rff_config_for(g).validate()?;
    }
    for &l in &lambdas {
        cfg.train_config_for(l).validate()?;
    }

    let class_names = resolve_classes(manifest)?;
    let classes = class_names.len();
    let folds = splits(manifest.len(), split, cfg.seed)?;
    let mut matrices = vec![ConfusionMatrix::new(classes); gammas.len() * lambdas.len()];

    for (train_idx, val_idx) in folds {
        let train_set = manifest.subset(&train_idx);
        let labels = load_all_labels(&train_set, classes)?;
        let samples = sample_training_pixels(&labels, cfg.sample_fraction, cfg.sample_seed())?;
        let (features, channels) = sampled_features(&train_set, &samples, &cfg)?;
        let targets: Vec<usize> = samples.iter().map(|s| s.class as usize).collect();

        let mut projections = Vec::with_capacity(gammas.len());
        let mut models = Vec::with_capacity(gammas.len() * lambdas.len());
        for &gamma in &gammas {
            let projection = rff::generate(&cfg.rff_config_for(gamma), features.ncols())?;
            let set = TrainingSet::new(transform_rows(&projection, &features, gamma)?, targets.clone())?;
            for &lambda in &lambdas {
                models.push(linear_svm::train(&set, classes, &cfg.train_config_for(lambda))?);
            }
            projections.push(projection);
        }

        for &v in &val_idx {
            let (img_path, lbl_path) = &manifest.entries[v];
            let truth = load_labels(lbl_path, classes)?;
            let image = prepare_image(load_image(img_path)?, cfg.color)?;
            if image.channel_count() != channels {
                return Err(Error::mismatch(channels, image.channel_count()));
            }
            let stack = extract_image(&image, &cfg.extractor)?;
            let mask = boundary_exclusion_mask(&truth, boundary_radius);
            for (g, projection) in projections.iter().enumerate() {
                let group: Vec<&LinearModel> = models[g * lambdas.len()..(g + 1) * lambdas.len()].iter().collect();
                let scores = score_stack(&stack, projection, gammas[g], &group)?;
                for (l, s) in scores.iter().enumerate() {
                    let pred = labels_from_scores(s, image.width(), image.height());
                    matrices[g * lambdas.len() + l].merge(&confusion_matrix(&pred, &truth, Some(&mask), classes)?);
                }
            }
        }
    }

    let mut table = Vec::with_capacity(matrices.len());
    for (g, &gamma) in gammas.iter().enumerate() {
        for (l, &lambda) in lambdas.iter().enumerate() {
            let cm = &matrices[g * lambdas.len() + l];
            table.push(TuneRow {
                gamma,
                lambda,
                pixel_accuracy: crate::metrics::pixel_accuracy(cm).unwrap_or(0.0),
            });
        }
    }
    let mut best = table[0];
    for row in &table[1..] {
        if row.pixel_accuracy > best.pixel_accuracy {
            best = *row;
        }
    }
    Ok(TuneOutcome { table, best })
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    /// Closed-form cost model (single scale, all second-layer paths).
    pub closed_form: OpReport,
    /// Same accounting for the configured extractor.
    pub configured: OpReport,
    pub extraction: Duration,
    pub random_features: Duration,
    pub classification: Duration,
    pub feature_dim: usize,
}

/// Op counts plus timed stages on a synthetic `width x height` image.
pub fn bench(width: usize, height: usize, channels: usize, cfg: &RunConfig, classes: usize) -> Result<BenchReport> {
    if width == 0 || height == 0 || channels == 0 {
        return Err(Error::Config("bench needs positive width, height and channels".into()));
    }
    let cfg = cfg.validated()?;
    let e = &cfg.extractor;
    let closed_form = paper_op_count(width, height, e.levels, e.orientations, channels);
    let configured = configured_op_count(e, width, height, channels);

    let planes = (0..channels)
        .map(|c| {
            let period = 4.0 + 3.0 * c as f64;
            Plane::from_fn(width, height, move |i, j| {
                0.5 + 0.4 * ((i as f64 + 0.5 * j as f64) * std::f64::consts::TAU / period).sin()
            })
        })
        .collect();
    let image = Image::new(planes, ColorSpace::Multispectral)?;

    let t = Instant::now();
    let stack = extract_image(&image, e)?;
    let extraction = t.elapsed();

    let projection = rff::generate(&cfg.rff_config_for(cfg.gamma), stack.dimension())?;
    let pixels = width * height;
    let t = Instant::now();
    let phis: Vec<Array2<f64>> = par::map_indexed(pixels.div_ceil(CHUNK), |c| {
        let end = ((c + 1) * CHUNK).min(pixels);
        projection.transform_batch(gather_rows(&stack, c * CHUNK..end).view(), cfg.gamma)
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let random_features = t.elapsed();

    let model = LinearModel::zeros(classes, cfg.m_tilde);
    let t = Instant::now();
    let mut checksum = 0usize;
    for phi in &phis {
        let scores = model.scores_batch(phi.view())?;
        checksum += scores.outer_iter().map(|r| argmax(r.as_slice().expect("contiguous"))).sum::<usize>();
    }
    let classification = t.elapsed();
    std::hint::black_box(checksum);

    Ok(BenchReport {
        closed_form,
        configured,
        extraction,
        random_features,
        classification,
        feature_dim: stack.dimension(),
    })
}
