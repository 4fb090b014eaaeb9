//! Tree-structured wavelet feature extractor.
//!
//! Each tree node holds a propagated signal `u`. The node's feature map is the
//! à-trous low-pass of `u`; its children are `|detail(u, j, r)|`, sub-sampled
//! by the pooling factor when going from the first to the second layer. All
//! maps are interpolated bilinearly back to the input size and stacked, so
//! that each pixel gets one feature per (channel, image scale, path).

use std::cmp::Ordering;
use std::fmt;

use crate::dataset::Image;
use crate::haar_swt::{lowpass_cascade, swt2d, OpReport, Orientation};
use crate::{par, Error, Plane, Result};

/// Which second-layer paths `((j1, r1), (j2, r2))` are kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScaleRule {
    /// `j2 >= j1`.
    NonDecreasing,
    /// Every `(j2, r2)`.
    All,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractorConfig {
    /// Wavelet scales per layer (J).
    pub levels: usize,
    /// Detail orientations per scale (R). Separable Haar only provides 3.
    pub orientations: usize,
    /// Tree depth (D): path lengths 0..=depth are collected.
    pub depth: usize,
    /// Sub-sampling between the first and second layer.
    pub pool_factor: usize,
    /// Image decimation factors, strictly increasing powers of two.
    pub image_scales: Vec<usize>,
    pub scale_rule: ScaleRule,
    /// Shift every map back by the delay of its forward-reading filters.
    pub centered: bool,
}

impl Default for ExtractorConfig {
    fn default() -> Self {
        Self {
            levels: 4,
            orientations: 3,
            depth: 2,
            pool_factor: 2,
            image_scales: vec![1],
            scale_rule: ScaleRule::NonDecreasing,
            centered: true,
        }
    }
}

impl ExtractorConfig {
    pub fn with_scales(mut self, scales: Vec<usize>) -> Self {
        self.image_scales = scales;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 {
            return Err(Error::Config("levels (J) must be at least 1".into()));
        }
        if self.orientations != 3 {
            return Err(Error::Config(format!(
                "separable Haar wavelets have exactly 3 orientations, got {}",
                self.orientations
            )));
        }
        if !(1..=2).contains(&self.depth) {
            return Err(Error::Config(format!("depth must be 1 or 2, got {}", self.depth)));
        }
        if self.pool_factor == 0 {
            return Err(Error::Config("pool factor must be positive".into()));
        }
        if self.image_scales.is_empty() {
            return Err(Error::Config("at least one image scale is required".into()));
        }
        for w in self.image_scales.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Config("image scales must be strictly increasing".into()));
            }
        }
        if let Some(s) = self.image_scales.iter().find(|s| !s.is_power_of_two()) {
            return Err(Error::Config(format!("image scale {s} is not a power of two")));
        }
        Ok(())
    }

    fn max_scale(&self) -> usize {
        *self.image_scales.last().expect("validated")
    }

    /// Number of second-layer children of a first-layer node at scale `j1`.
    fn children_of(&self, j1: usize) -> usize {
        let scales = match self.scale_rule {
            ScaleRule::NonDecreasing => self.levels - j1 + 1,
            ScaleRule::All => self.levels,
        };
        scales * self.orientations
    }

    fn second_layer_scales(&self, j1: usize) -> std::ops::RangeInclusive<usize> {
        match self.scale_rule {
            ScaleRule::NonDecreasing => j1..=self.levels,
            ScaleRule::All => 1..=self.levels,
        }
    }

    /// Number of depth-2 maps per channel.
    pub fn second_layer_maps(&self) -> usize {
        if self.depth < 2 {
            return 0;
        }
        self.orientations * (1..=self.levels).map(|j1| self.children_of(j1)).sum::<usize>()
    }

    /// All paths of one channel in canonical order.
    pub fn paths(&self) -> Vec<PathId> {
        let mut out = vec![PathId::root()];
        let first: Vec<_> = (1..=self.levels)
            .flat_map(|j| Orientation::DETAILS.into_iter().map(move |r| (j, r)))
            .collect();
        out.extend(first.iter().map(|&l| PathId::new(vec![l])));
        if self.depth >= 2 {
            for &(j1, r1) in &first {
                for j2 in self.second_layer_scales(j1) {
                    for r2 in Orientation::DETAILS {
                        out.push(PathId::new(vec![(j1, r1), (j2, r2)]));
                    }
                }
            }
        }
        out
    }
}

/// Closed-form count of feature maps for one channel and one image scale:
/// `1 + RJ + R²J(J+1)/2` for the non-decreasing rule, `1 + RJ + R²J²` for all
/// paths, and `1 + RJ` for a depth-1 tree.
pub fn per_channel_map_count(config: &ExtractorConfig) -> usize {
    let (r, j) = (config.orientations, config.levels);
    let first = 1 + r * j;
    if config.depth < 2 {
        return first;
    }
    match config.scale_rule {
        ScaleRule::NonDecreasing => first + r * r * j * (j + 1) / 2,
        ScaleRule::All => first + r * r * j * j,
    }
}

/// Feature vector length for `channels` input channels.
pub fn feature_dimension(config: &ExtractorConfig, channels: usize) -> usize {
    channels * config.image_scales.len() * per_channel_map_count(config)
}

/// Operation estimate for the extractor as configured, using the same
/// accounting as [`paper_op_count`](crate::haar_swt::paper_op_count) but with
/// the configured number of second-layer maps, pooling factor, depth and image
/// scales. Interpolation is counted at the full `width x height` resolution.
pub fn configured_op_count(config: &ExtractorConfig, width: usize, height: usize, channels: usize) -> OpReport {
    let (r, j) = (config.orientations as f64, config.levels as f64);
    let pool2 = (config.pool_factor * config.pool_factor) as f64;
    let second = config.second_layer_maps() as f64;
    let full = (width * height) as f64;
    let mut total = OpReport::default();
    for &s in &config.image_scales {
        let wh = full / (s * s) as f64;
        let half = wh / pool2;
        let (swt, chi) = if config.depth >= 2 {
            (6.0 * wh * j + r * j * 6.0 * j * half, second * 2.0 * j * half)
        } else {
            (6.0 * wh * j, r * j * 2.0 * j * half)
        };
        let abs = r * j * wh + second * half;
        let upsampled = r * j + second + if s > 1 { 1.0 } else { 0.0 };
        let interp = 8.0 * full * upsampled;
        total = total.add(&OpReport {
            swt_additions: swt,
            chi_additions: chi,
            abs_ops: abs,
            interpolation_ops: interp,
            total_ops: swt + chi + abs + interp,
        });
    }
    total.scaled(channels as f64)
}

/// Centroid offset, in full-resolution pixels, of the region a map reads.
fn path_delay(path: &PathId, config: &ExtractorConfig, scale: usize) -> usize {
    let reach = |j: usize| ((1usize << j) - 1) as f64 / 2.0;
    let p = config.pool_factor as f64;
    let lowpass = reach(config.levels);
    let d = match path.entries.as_slice() {
        [] => lowpass,
        [(j1, _)] => reach(*j1) + p * lowpass,
        [(j1, _), (j2, _), ..] => reach(*j1) + p * (reach(*j2) + lowpass),
    };
    (d * scale as f64).round() as usize
}

/// Moves a full-resolution map so each value sits at the centroid of the
/// input region it was computed from, when `config.centered` is set.
fn center(map: Plane, path: &PathId, config: &ExtractorConfig, scale: usize) -> Plane {
    if !config.centered {
        return map;
    }
    let c = path_delay(path, config, scale);
    map.shift_circular(c % map.height(), c % map.width())
}

/// Sequence of `(scale, orientation)` wavelet indices from the root.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PathId {
    entries: Vec<(usize, Orientation)>,
}

impl PathId {
    pub fn root() -> Self {
        Self { entries: vec![] }
    }

    pub fn new(entries: Vec<(usize, Orientation)>) -> Self {
        Self { entries }
    }

    pub fn depth(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, Orientation)] {
        &self.entries
    }
}

impl Ord for PathId {
    fn cmp(&self, other: &Self) -> Ordering {
        self.depth()
            .cmp(&other.depth())
            .then_with(|| self.entries.cmp(&other.entries))
    }
}

impl PartialOrd for PathId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for PathId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.entries.is_empty() {
            return f.write_str("root");
        }
        for (k, (j, r)) in self.entries.iter().enumerate() {
            if k > 0 {
                f.write_str("/")?;
            }
            write!(f, "{r}{j}")?;
        }
        Ok(())
    }
}

/// `(i, j) = input (s*i, s*j)`.
pub fn subsample(plane: &Plane, factor: usize) -> Result<Plane> {
    if factor == 0 || !plane.width().is_multiple_of(factor) || !plane.height().is_multiple_of(factor) {
        return Err(Error::NotDivisible {
            width: plane.width(),
            height: plane.height(),
            factor,
        });
    }
    if factor == 1 {
        return Ok(plane.clone());
    }
    Ok(Plane::from_fn(
        plane.width() / factor,
        plane.height() / factor,
        |i, j| plane[(factor * i, factor * j)],
    ))
}

/// Source positions and weights of an align-corners resampling of one axis.
fn axis_weights(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    (0..dst)
        .map(|t| {
            if src == 1 || dst == 1 {
                return (0, 0, 0.0);
            }
            let x = t as f64 * (src - 1) as f64 / (dst - 1) as f64;
            let lo = (x.floor() as usize).min(src - 1);
            let hi = (lo + 1).min(src - 1);
            (lo, hi, x - lo as f64)
        })
        .collect()
}

/// Bilinear interpolation with aligned corners: target coordinate `t` maps to
/// source coordinate `t * (src - 1) / (dst - 1)` on each axis. A source axis
/// of length 1 is extended as a constant.
pub fn bilinear_upsample(plane: &Plane, width: usize, height: usize) -> Result<Plane> {
    if width < plane.width() || height < plane.height() {
        return Err(Error::TargetTooSmall {
            src_w: plane.width(),
            src_h: plane.height(),
            dst_w: width,
            dst_h: height,
        });
    }
    if width == plane.width() && height == plane.height() {
        return Ok(plane.clone());
    }
    let cols = axis_weights(plane.width(), width);
    let rows = axis_weights(plane.height(), height);
    // Interpolate along rows first, then blend row pairs.
    let stretched: Vec<Vec<f64>> = (0..plane.height())
        .map(|i| {
            let row = plane.row(i);
            cols.iter()
                .map(|&(lo, hi, t)| row[lo] + t * (row[hi] - row[lo]))
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(width * height);
    for &(lo, hi, t) in &rows {
        let (a, b) = (&stretched[lo], &stretched[hi]);
        out.extend(a.iter().zip(b).map(|(x, y)| x + t * (y - x)));
    }
    Plane::new(width, height, out)
}

/// Feature maps at their native resolution with the up-sampling factor that
/// brings each back to the tree input size.
fn extract_native(plane: &Plane, config: &ExtractorConfig) -> Result<Vec<(PathId, Plane, usize)>> {
    let levels = config.levels;
    let pool = config.pool_factor;
    if !plane.width().is_multiple_of(pool) || !plane.height().is_multiple_of(pool) {
        return Err(Error::NotDivisible {
            width: plane.width(),
            height: plane.height(),
            factor: pool,
        });
    }
    let root = swt2d(plane, levels)?;
    let mut maps = Vec::with_capacity(per_channel_map_count(config));
    maps.push((PathId::root(), root.approx().clone(), 1));

    let first: Vec<(usize, Orientation)> = (1..=levels)
        .flat_map(|j| Orientation::DETAILS.into_iter().map(move |r| (j, r)))
        .collect();

    let nodes = par::map_indexed(first.len(), |k| -> Result<_> {
        let (j1, r1) = first[k];
        let u1 = subsample(&root.detail(j1, r1).abs(), pool)?;
        let path1 = PathId::new(vec![(j1, r1)]);
        if config.depth < 2 {
            return Ok(((path1, lowpass_cascade(&u1, levels)?), Vec::new()));
        }
        let node = swt2d(&u1, levels)?;
        let mut children = Vec::with_capacity(config.children_of(j1));
        for j2 in config.second_layer_scales(j1) {
            for r2 in Orientation::DETAILS {
                let u2 = node.detail(j2, r2).abs();
                children.push((
                    PathId::new(vec![(j1, r1), (j2, r2)]),
                    lowpass_cascade(&u2, levels)?,
                ));
            }
        }
        Ok(((path1, node.into_approx()), children))
    });

    let mut second = Vec::new();
    for node in nodes {
        let ((path, map), children) = node?;
        maps.push((path, map, pool));
        second.extend(children.into_iter().map(|(p, m)| (p, m, pool)));
    }
    maps.extend(second);
    Ok(maps)
}

/// Feature maps of one plane in canonical path order, all interpolated to the
/// plane's size.
pub fn extract_channel(plane: &Plane, config: &ExtractorConfig) -> Result<Vec<(PathId, Plane)>> {
    config.validate()?;
    let (w, h) = (plane.width(), plane.height());
    extract_native(plane, config)?
        .into_iter()
        .map(|(path, map, _)| {
            let full = center(bilinear_upsample(&map, w, h)?, &path, config, 1);
            Ok((path, full))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePlane {
    pub channel: usize,
    pub image_scale: usize,
    pub path: PathId,
    pub plane: Plane,
}

/// Full-resolution feature planes; the column at `(i, j)` is the pixel's
/// feature vector. Ordered by image scale, then channel, then path.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStack {
    width: usize,
    height: usize,
    planes: Vec<FeaturePlane>,
}

impl FeatureStack {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn planes(&self) -> &[FeaturePlane] {
        &self.planes
    }

    /// Feature dimension m.
    pub fn dimension(&self) -> usize {
        self.planes.len()
    }

    pub fn pixel_feature(&self, row: usize, col: usize) -> Result<Vec<f64>> {
        if row >= self.height || col >= self.width {
            return Err(Error::OutOfBounds {
                row,
                col,
                width: self.width,
                height: self.height,
            });
        }
        Ok(self.planes.iter().map(|p| p.plane[(row, col)]).collect())
    }

    /// Writes the feature vectors of row-major pixel indices into consecutive
    /// rows of `out` (length `pixels.len() * dimension()`).
    pub fn gather(&self, pixels: impl IntoIterator<Item = usize>, out: &mut Vec<f64>) {
        for idx in pixels {
            out.extend(self.planes.iter().map(|p| p.plane.values()[idx]));
        }
    }
}

/// Runs the extractor on every channel and image scale of `image`.
///
/// Channels are padded circularly on the right and bottom to a multiple of
/// `pool_factor * max_scale`, decimated by each image scale, processed, and
/// interpolated straight back to padded resolution before cropping.
pub fn extract_image(image: &Image, config: &ExtractorConfig) -> Result<FeatureStack> {
    config.validate()?;
    if image.channels().is_empty() {
        return Err(Error::Empty("image without channels"));
    }
    let (w, h) = (image.width(), image.height());
    let block = config.pool_factor * config.max_scale();
    let (pw, ph) = (w.div_ceil(block) * block, h.div_ceil(block) * block);
    let padded: Vec<Plane> = image
        .channels()
        .iter()
        .map(|c| c.pad_circular(pw, ph))
        .collect();

    let jobs: Vec<(usize, usize)> = config
        .image_scales
        .iter()
        .flat_map(|&s| (0..padded.len()).map(move |c| (s, c)))
        .collect();
    let results = par::map_indexed(jobs.len(), |k| -> Result<Vec<FeaturePlane>> {
        let (scale, channel) = jobs[k];
        let decimated = subsample(&padded[channel], scale)?;
        extract_native(&decimated, config)?
            .into_iter()
            .map(|(path, map, factor)| {
                let full = if factor * scale == 1 {
                    map
                } else {
                    bilinear_upsample(&map, pw, ph)?
                };
                let full = center(full, &path, config, scale);
                Ok(FeaturePlane {
                    channel,
                    image_scale: scale,
                    path,
                    plane: full.crop(w, h),
                })
            })
            .collect()
    });

    let mut planes = Vec::with_capacity(feature_dimension(config, padded.len()));
    for r in results {
        planes.extend(r?);
    }
    Ok(FeatureStack {
        width: w,
        height: h,
        planes,
    })
}
