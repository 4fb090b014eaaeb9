//! Images, label maps, manifests, training-pixel sampling and a synthetic
//! texture dataset generator.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, Luma, Rgb};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Plane, Result};

/// Label value marking pixels excluded from training and evaluation.
pub const VOID: u8 = 255;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ColorSpace {
    Gray,
    Rgb,
    Yuv,
    /// Any other channel layout, e.g. NIR-R-G plus a normalized DSM.
    Multispectral,
}

impl fmt::Display for ColorSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ColorSpace::Gray => "gray",
            ColorSpace::Rgb => "rgb",
            ColorSpace::Yuv => "yuv",
            ColorSpace::Multispectral => "multispectral",
        })
    }
}

/// Multi-channel raster with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    channels: Vec<Plane>,
    color: ColorSpace,
}

impl Image {
    pub fn new(channels: Vec<Plane>, color: ColorSpace) -> Result<Self> {
        let first = channels.first().ok_or(Error::Empty("image without channels"))?;
        if let Some(bad) = channels.iter().find(|c| !c.same_shape(first)) {
            return Err(Error::mismatch(
                format!("{}x{}", first.width(), first.height()),
                format!("{}x{}", bad.width(), bad.height()),
            ));
        }
        Ok(Self { channels, color })
    }

    pub fn width(&self) -> usize {
        self.channels[0].width()
    }

    pub fn height(&self) -> usize {
        self.channels[0].height()
    }

    pub fn channels(&self) -> &[Plane] {
        &self.channels
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn color(&self) -> ColorSpace {
        self.color
    }
}

fn planes_from_samples<T: Copy + Into<f64>>(
    width: usize,
    height: usize,
    channels: usize,
    samples: &[T],
    max: f64,
) -> Vec<Plane> {
    (0..channels)
        .map(|c| {
            Plane::from_fn(width, height, |i, j| {
                samples[(i * width + j) * channels + c].into() / max
            })
        })
        .collect()
}

/// Reads an 8- or 16-bit PNG with 1, 3 or 4 channels, scaled to `[0, 1]`.
/// Three-channel images are tagged RGB, four-channel ones multispectral.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let img = image::open(path).map_err(|source| Error::Image {
        path: path.to_owned(),
        source,
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let (planes, color) = match &img {
        DynamicImage::ImageLuma8(b) => (planes_from_samples(w, h, 1, b.as_raw(), 255.0), ColorSpace::Gray),
        DynamicImage::ImageRgb8(b) => (planes_from_samples(w, h, 3, b.as_raw(), 255.0), ColorSpace::Rgb),
        DynamicImage::ImageRgba8(b) => (
            planes_from_samples(w, h, 4, b.as_raw(), 255.0),
            ColorSpace::Multispectral,
        ),
        DynamicImage::ImageLuma16(b) => (planes_from_samples(w, h, 1, b.as_raw(), 65535.0), ColorSpace::Gray),
        DynamicImage::ImageRgb16(b) => (planes_from_samples(w, h, 3, b.as_raw(), 65535.0), ColorSpace::Rgb),
        DynamicImage::ImageRgba16(b) => (
            planes_from_samples(w, h, 4, b.as_raw(), 65535.0),
            ColorSpace::Multispectral,
        ),
        other => {
            return Err(Error::UnsupportedImage {
                path: path.to_owned(),
                reason: format!("{:?}", other.color()),
            })
        }
    };
    Image::new(planes, color)
}

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Writes a 1- or 3-channel image as an 8-bit PNG.
pub fn save_image(image: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (w, h) = (image.width() as u32, image.height() as u32);
    let result = match image.channel_count() {
        1 => ImageBuffer::<Luma<u8>, _>::from_fn(w, h, |x, y| {
            Luma([to_u8(image.channels[0][(y as usize, x as usize)])])
        })
        .save(path),
        3 => ImageBuffer::<Rgb<u8>, _>::from_fn(w, h, |x, y| {
            let px = |c: usize| to_u8(image.channels[c][(y as usize, x as usize)]);
            Rgb([px(0), px(1), px(2)])
        })
        .save(path),
        n => {
            return Err(Error::UnsupportedImage {
                path: path.to_owned(),
                reason: format!("cannot write {n}-channel image"),
            })
        }
    };
    result.map_err(|source| Error::Image {
        path: path.to_owned(),
        source,
    })
}

const YUV_U: f64 = 0.565;
const YUV_V: f64 = 0.713;

/// BT.601 full-range conversion:
/// `Y = 0.299R + 0.587G + 0.114B`, `U = 0.565(B - Y) + 0.5`,
/// `V = 0.713(R - Y) + 0.5`, all clamped to `[0, 1]`.
pub fn rgb_to_yuv(image: &Image) -> Result<Image> {
    if image.channel_count() != 3 || image.color != ColorSpace::Rgb {
        return Err(Error::Config(format!(
            "YUV conversion needs a 3-channel RGB image, got {} {} channel(s)",
            image.channel_count(),
            image.color
        )));
    }
    let (r, g, b) = (&image.channels[0], &image.channels[1], &image.channels[2]);
    let (w, h) = (image.width(), image.height());
    let luma = Plane::from_fn(w, h, |i, j| {
        0.299 * r[(i, j)] + 0.587 * g[(i, j)] + 0.114 * b[(i, j)]
    });
    let u = Plane::from_fn(w, h, |i, j| ((b[(i, j)] - luma[(i, j)]) * YUV_U + 0.5).clamp(0.0, 1.0));
    let v = Plane::from_fn(w, h, |i, j| ((r[(i, j)] - luma[(i, j)]) * YUV_V + 0.5).clamp(0.0, 1.0));
    let y = luma.map(|x| x.clamp(0.0, 1.0));
    Image::new(vec![y, u, v], ColorSpace::Yuv)
}

/// Exact inverse of [`rgb_to_yuv`] for values that were not clamped.
pub fn yuv_to_rgb(image: &Image) -> Result<Image> {
    if image.channel_count() != 3 || image.color != ColorSpace::Yuv {
        return Err(Error::Config("RGB conversion needs a 3-channel YUV image".into()));
    }
    let (y, u, v) = (&image.channels[0], &image.channels[1], &image.channels[2]);
    let (w, h) = (image.width(), image.height());
    let r = Plane::from_fn(w, h, |i, j| y[(i, j)] + (v[(i, j)] - 0.5) / YUV_V);
    let b = Plane::from_fn(w, h, |i, j| y[(i, j)] + (u[(i, j)] - 0.5) / YUV_U);
    let g = Plane::from_fn(w, h, |i, j| (y[(i, j)] - 0.299 * r[(i, j)] - 0.114 * b[(i, j)]) / 0.587);
    Image::new(vec![r, g, b], ColorSpace::Rgb)
}

/// Per-pixel class indices; [`VOID`] marks unlabeled pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: Vec<u8>,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, labels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Empty("label map with zero width or height"));
        }
        if labels.len() != width * height {
            return Err(Error::mismatch(width * height, labels.len()));
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self {
            width,
            height,
            labels: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut labels = Vec::with_capacity(width * height);
        for i in 0..height {
            for j in 0..width {
                labels.push(f(i, j));
            }
        }
        Self {
            width,
            height,
            labels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.labels[row * self.width + col]
    }

    pub fn max_label(&self) -> Option<u8> {
        self.labels.iter().copied().filter(|&l| l != VOID).max()
    }

    /// Checks every label is `< classes` or void.
    pub fn validate(&self, classes: usize, path: &Path) -> Result<()> {
        match self
            .labels
            .iter()
            .position(|&l| l != VOID && l as usize >= classes)
        {
            Some(k) => Err(Error::InvalidLabel {
                path: path.to_owned(),
                row: k / self.width,
                col: k % self.width,
                value: self.labels[k],
                classes,
            }),
            None => Ok(()),
        }
    }
}

/// Reads a single-channel 8-bit label PNG and validates it against `classes`.
pub fn load_labels(path: impl AsRef<Path>, classes: usize) -> Result<LabelMap> {
    let path = path.as_ref();
    let map = read_label_png(path)?;
    map.validate(classes, path)?;
    Ok(map)
}

/// Reads a label PNG without range validation.
pub fn read_label_png(path: &Path) -> Result<LabelMap> {
    let img = image::open(path).map_err(|source| Error::Image {
        path: path.to_owned(),
        source,
    })?;
    let DynamicImage::ImageLuma8(buf) = img else {
        return Err(Error::UnsupportedImage {
            path: path.to_owned(),
            reason: format!("labels must be 8-bit single-channel, got {:?}", img.color()),
        });
    };
    LabelMap::new(buf.width() as usize, buf.height() as usize, buf.into_raw())
}

pub fn save_labels(map: &LabelMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    ImageBuffer::<Luma<u8>, _>::from_raw(map.width as u32, map.height as u32, map.labels.clone())
        .expect("buffer size matches")
        .save(path)
        .map_err(|source| Error::Image {
            path: path.to_owned(),
            source,
        })
}

/// Image/label pairs listed in a manifest file.
///
/// Format: one `<image path>\t<label path>` record per line, paths relative
/// to the manifest, `#` starts a comment. A comment of the form
/// `# classes: sky, tree, road` declares the class names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub entries: Vec<(PathBuf, PathBuf)>,
    pub class_names: Vec<String>,
}

impl DatasetManifest {
    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sub-manifest with the given entry indices.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            entries: indices.iter().map(|&k| self.entries[k].clone()).collect(),
            class_names: self.class_names.clone(),
        }
    }

    pub fn parse(text: &str, base: &Path, origin: &Path) -> Result<Self> {
        let mut entries = Vec::new();
        let mut class_names = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(names) = comment.trim().strip_prefix("classes:") {
                    class_names = names
                        .split(',')
                        .map(|s| s.trim().to_string())
                        .filter(|s| !s.is_empty())
                        .collect();
                }
                continue;
            }
            let mut fields = raw.split('\t');
            let (Some(img), Some(lbl), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(Error::Manifest {
                    path: origin.to_owned(),
                    line: n + 1,
                    reason: "expected `<image path><TAB><label path>`".into(),
                });
            };
            entries.push((base.join(img.trim()), base.join(lbl.trim())));
        }
        Ok(Self {
            entries,
            class_names,
        })
    }

    /// Loads a manifest and checks every referenced file exists.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let manifest = Self::parse(&text, base, path)?;
        if manifest.is_empty() {
            return Err(Error::Empty("manifest lists no images"));
        }
        for (img, lbl) in &manifest.entries {
            for p in [img, lbl] {
                if !p.is_file() {
                    return Err(Error::io(
                        p,
                        std::io::Error::new(std::io::ErrorKind::NotFound, "file listed in manifest not found"),
                    ));
                }
            }
        }
        Ok(manifest)
    }

    pub fn to_text(&self, base: &Path) -> String {
        let mut out = String::new();
        if !self.class_names.is_empty() {
            out.push_str(&format!("# classes: {}\n", self.class_names.join(", ")));
        }
        for (img, lbl) in &self.entries {
            let rel = |p: &Path| p.strip_prefix(base).unwrap_or(p).display().to_string();
            out.push_str(&format!("{}\t{}\n", rel(img), rel(lbl)));
        }
        out
    }
}

/// One training pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PixelSample {
    pub image: usize,
    pub row: usize,
    pub col: usize,
    pub class: u8,
}

/// Uniform sample without replacement of `round(fraction * eligible)` pixels
/// from the union of all non-void pixels. Returned sorted by image, row, col.
pub fn sample_training_pixels(labels: &[LabelMap], fraction: f64, seed: u64) -> Result<Vec<PixelSample>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Config(format!("sample fraction {fraction} is not in (0, 1]")));
    }
    let mut eligible = Vec::new();
    for (image, map) in labels.iter().enumerate() {
        for (k, &class) in map.labels.iter().enumerate() {
            if class != VOID {
                eligible.push(PixelSample {
                    image,
                    row: k / map.width,
                    col: k % map.width,
                    class,
                });
            }
        }
    }
    if eligible.is_empty() {
        return Err(Error::NoEligiblePixels);
    }
    let amount = ((fraction * eligible.len() as f64).round() as usize).clamp(1, eligible.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<usize> = index::sample(&mut rng, eligible.len(), amount).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|k| eligible[k]).collect())
}

/// Texture of class `class`, evaluated at pixel `(i, j)`. Each class has its
/// own orientation/period pattern and a slight color tint.
fn class_texture(class: usize, i: f64, j: f64, phase: f64) -> [f64; 3] {
    use std::f64::consts::PI;
    let stripes = |angle_deg: f64, period: f64| {
        let a = angle_deg.to_radians();
        0.5 + 0.4 * (2.0 * PI * (i * a.cos() + j * a.sin()) / period + phase).sin()
    };
    let checker = |cell: f64| {
        let v = ((i / cell).floor() + (j / cell).floor()) as i64;
        if v.rem_euclid(2) == 0 { 0.85 } else { 0.15 }
    };
    let (v, tint) = match class {
        0 => (stripes(0.0, 6.0), [1.0, 0.9, 0.9]),
        1 => (stripes(90.0, 6.0), [0.9, 1.0, 0.9]),
        2 => (checker(3.0), [0.9, 0.9, 1.0]),
        3 => (stripes(45.0, 8.0), [1.0, 1.0, 0.85]),
        4 => (stripes(135.0, 8.0), [0.85, 1.0, 1.0]),
        5 => (checker(1.0), [1.0, 0.85, 1.0]),
        6 => (stripes(0.0, 16.0), [0.95, 0.95, 0.95]),
        _ => (stripes(90.0, 16.0), [0.8, 0.9, 1.0]),
    };
    tint.map(|t| v * t)
}

/// In-memory synthetic sample: a `size x size` RGB image split into polygonal
/// regions by random straight cuts, each region filled with the texture of a
/// random class plus mild noise.
pub fn render_texture_sample(size: usize, classes: usize, rng: &mut impl Rng) -> (Image, LabelMap) {
    let s = size as f64;
    // One or two random lines; the sign pattern picks the region.
    let cuts = rng.random_range(1..=2usize);
    let lines: Vec<(f64, f64, f64)> = (0..cuts)
        .map(|_| {
            let angle = rng.random_range(0.0..std::f64::consts::PI);
            let (ci, cj) = (rng.random_range(0.25 * s..0.75 * s), rng.random_range(0.25 * s..0.75 * s));
            let (n0, n1) = (angle.cos(), angle.sin());
            (n0, n1, -(n0 * ci + n1 * cj))
        })
        .collect();
    let regions = 1usize << cuts;
    let mut class_of: Vec<usize> = (0..regions).map(|_| rng.random_range(0..classes)).collect();
    // Make sure the image is not a single class.
    if class_of.iter().all(|&c| c == class_of[0]) {
        class_of[regions - 1] = (class_of[0] + 1 + rng.random_range(0..classes - 1)) % classes;
    }
    let phases: Vec<f64> = (0..regions).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
    let region = |i: f64, j: f64| {
        lines
            .iter()
            .enumerate()
            .map(|(k, (a, b, c))| usize::from(a * i + b * j + c >= 0.0) << k)
            .sum::<usize>()
    };

    let mut rgb = vec![Plane::zeros(size, size), Plane::zeros(size, size), Plane::zeros(size, size)];
    let labels = LabelMap::from_fn(size, size, |i, j| {
        let r = region(i as f64, j as f64);
        let px = class_texture(class_of[r], i as f64, j as f64, phases[r]);
        for (c, v) in px.iter().enumerate() {
            let noise = rng.random_range(-0.05..0.05);
            rgb[c][(i, j)] = (v + noise).clamp(0.0, 1.0);
        }
        class_of[r] as u8
    });
    (Image::new(rgb, ColorSpace::Rgb).expect("same shapes"), labels)
}

/// Generates `n_images` synthetic image/label PNG pairs of `size x size`
/// pixels in `out_dir` plus a `manifest.txt`.
pub fn synth_texture_dataset(
    n_images: usize,
    classes: usize,
    size: usize,
    seed: u64,
    out_dir: impl AsRef<Path>,
) -> Result<DatasetManifest> {
    if !(2..=8).contains(&classes) {
        return Err(Error::Config(format!("synthetic dataset needs 2..=8 classes, got {classes}")));
    }
    if n_images == 0 || size < 8 {
        return Err(Error::Config("synthetic dataset needs >= 1 image of >= 8 pixels".into()));
    }
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::with_capacity(n_images);
    for k in 0..n_images {
        let (img, labels) = render_texture_sample(size, classes, &mut rng);
        let img_path = out_dir.join(format!("image_{k:03}.png"));
        let lbl_path = out_dir.join(format!("label_{k:03}.png"));
        save_image(&img, &img_path)?;
        save_labels(&labels, &lbl_path)?;
        entries.push((img_path, lbl_path));
    }
    let manifest = DatasetManifest {
        entries,
        class_names: (0..classes).map(|c| format!("texture{c}")).collect(),
    };
    let path = out_dir.join("manifest.txt");
    fs::write(&path, manifest.to_text(out_dir)).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn gray_png(dir: &Path, name: &str, w: u32, h: u32, v: u8) -> PathBuf {
        let p = dir.join(name);
        ImageBuffer::<Luma<u8>, _>::from_pixel(w, h, Luma([v])).save(&p).unwrap();
        p
    }

    #[test]
    fn load_png_scaling() {
        let dir = tempdir().unwrap();
        let black = load_image(gray_png(dir.path(), "b.png", 3, 2, 0)).unwrap();
        assert!(black.channels()[0].values().iter().all(|&v| v == 0.0));
        let p = dir.path().join("w.png");
        ImageBuffer::<Rgb<u8>, _>::from_pixel(2, 2, Rgb([255, 255, 255])).save(&p).unwrap();
        let white = load_image(&p).unwrap();
        assert_eq!(white.channel_count(), 3);
        assert!(white.channels().iter().all(|c| c.values().iter().all(|&v| v == 1.0)));
        let mid = load_image(gray_png(dir.path(), "m.png", 2, 2, 128)).unwrap();
        assert_eq!(mid.channels()[0][(1, 1)], 128.0 / 255.0);

        let p16 = dir.path().join("g16.png");
        ImageBuffer::<Luma<u16>, _>::from_pixel(2, 2, Luma([65535])).save(&p16).unwrap();
        assert_eq!(load_image(&p16).unwrap().channels()[0][(0, 0)], 1.0);

        assert!(matches!(load_image(dir.path().join("missing.png")), Err(Error::Image { .. })));
    }

    #[test]
    fn yuv_values() {
        let img = |r: f64, g: f64, b: f64| {
            Image::new(
                vec![Plane::filled(1, 1, r), Plane::filled(1, 1, g), Plane::filled(1, 1, b)],
                ColorSpace::Rgb,
            )
            .unwrap()
        };
        let gray = rgb_to_yuv(&img(0.4, 0.4, 0.4)).unwrap();
        let px = |im: &Image, c: usize| im.channels()[c][(0, 0)];
        assert!((px(&gray, 0) - 0.4).abs() < 1e-12);
        assert!((px(&gray, 1) - 0.5).abs() < 1e-12);
        assert!((px(&gray, 2) - 0.5).abs() < 1e-12);
        assert!((px(&rgb_to_yuv(&img(1.0, 0.0, 0.0)).unwrap(), 0) - 0.299).abs() < 1e-12);
        assert!((px(&rgb_to_yuv(&img(0.0, 0.0, 1.0)).unwrap(), 0) - 0.114).abs() < 1e-12);

        let gray_img = Image::new(vec![Plane::zeros(1, 1)], ColorSpace::Gray).unwrap();
        assert!(rgb_to_yuv(&gray_img).is_err());

        let src = img(0.3, 0.6, 0.45);
        let back = yuv_to_rgb(&rgb_to_yuv(&src).unwrap()).unwrap();
        for c in 0..3 {
            assert!((px(&back, c) - px(&src, c)).abs() < 1e-6);
        }
    }

    #[test]
    fn label_loading() {
        let dir = tempdir().unwrap();
        let void = load_labels(gray_png(dir.path(), "v.png", 4, 4, 255), 3).unwrap();
        assert!(void.labels().iter().all(|&l| l == VOID));

        let map = LabelMap::from_fn(4, 3, |i, j| ((i + j) % 3) as u8);
        let p = dir.path().join("l.png");
        save_labels(&map, &p).unwrap();
        assert_eq!(load_labels(&p, 3).unwrap(), map);
        match load_labels(&p, 2) {
            Err(Error::InvalidLabel { row, col, value, .. }) => {
                assert_eq!((row, col, value), (0, 2, 2));
            }
            other => panic!("expected invalid label, got {other:?}"),
        }
    }

    #[test]
    fn sampling() {
        let maps = vec![LabelMap::filled(10, 10, 1), LabelMap::filled(10, 10, 0)];
        let s = sample_training_pixels(&maps, 0.02, 7).unwrap();
        assert_eq!(s.len(), 4);
        assert_eq!(s, sample_training_pixels(&maps, 0.02, 7).unwrap());

        let mut partial = LabelMap::filled(5, 5, 2);
        partial.labels[3] = VOID;
        partial.labels[17] = VOID;
        let all = sample_training_pixels(&[partial.clone()], 1.0, 1).unwrap();
        assert_eq!(all.len(), 23);
        let mut uniq = all.clone();
        uniq.dedup();
        assert_eq!(uniq.len(), 23);
        assert!(all.iter().all(|p| partial.get(p.row, p.col) != VOID));

        assert!(matches!(
            sample_training_pixels(&[LabelMap::filled(3, 3, VOID)], 0.5, 0),
            Err(Error::NoEligiblePixels)
        ));
        assert!(sample_training_pixels(&maps, 0.0, 0).is_err());
    }

    #[test]
    fn manifest_parsing() {
        let base = Path::new("/data");
        let m = DatasetManifest::parse(
            "# classes: sky, tree\n# a comment\na.png\ta_lbl.png\n\nsub/b.png\tsub/b_lbl.png\n",
            base,
            Path::new("m.txt"),
        )
        .unwrap();
        assert_eq!(m.class_names, vec!["sky", "tree"]);
        assert_eq!(m.entries[1].0, base.join("sub/b.png"));
        assert!(DatasetManifest::parse("only-one-field\n", base, Path::new("m.txt")).is_err());
    }

    #[test]
    fn missing_label_file_is_named() {
        let dir = tempdir().unwrap();
        gray_png(dir.path(), "a.png", 2, 2, 0);
        fs::write(dir.path().join("m.txt"), "a.png\tnope.png\n").unwrap();
        let err = DatasetManifest::load(dir.path().join("m.txt")).unwrap_err();
        assert!(err.to_string().contains("nope.png"), "{err}");
    }

    #[test]
    fn synth_is_deterministic() {
        assert!(synth_texture_dataset(1, 1, 32, 0, tempdir().unwrap().path()).is_err());
        let (a, b) = (tempdir().unwrap(), tempdir().unwrap());
        let ma = synth_texture_dataset(2, 3, 32, 42, a.path()).unwrap();
        synth_texture_dataset(2, 3, 32, 42, b.path()).unwrap();
        for name in ["image_000.png", "label_001.png", "manifest.txt"] {
            assert_eq!(
                fs::read(a.path().join(name)).unwrap(),
                fs::read(b.path().join(name)).unwrap()
            );
        }
        let loaded = DatasetManifest::load(a.path().join("manifest.txt")).unwrap();
        assert_eq!(loaded.class_count(), 3);
        assert_eq!(loaded.entries, ma.entries);
        let lbl = load_labels(&loaded.entries[0].1, 3).unwrap();
        assert!(lbl.max_label().is_some());
    }
}
