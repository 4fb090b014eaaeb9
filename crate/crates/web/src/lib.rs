//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Images cross the boundary as RGBA bytes (the layout of
//! `CanvasRenderingContext2D.getImageData`).

use haarseg::dataset::render_texture_sample;
use haarseg::features::{extract_channel, ExtractorConfig};
use haarseg::haar_swt::{bessel_energy_ratio, swt2d, Orientation};
use haarseg::rff::{generate, rbf_kernel, RffConfig};
use haarseg::Plane;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

fn js_err(e: haarseg::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Luminance in [0, 1] of an RGBA buffer.
fn luminance(rgba: &[u8], width: usize, height: usize) -> Result<Plane, JsError> {
    if width == 0 || height == 0 || rgba.len() != 4 * width * height {
        return Err(JsError::new("RGBA buffer does not match width x height"));
    }
    Ok(Plane::from_fn(width, height, |i, j| {
        let p = &rgba[4 * (i * width + j)..];
        (0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64) / 255.0
    }))
}

/// Writes `plane` into an RGBA canvas at `(top, left)`, min-max stretched.
fn blit(canvas: &mut [u8], canvas_width: usize, top: usize, left: usize, plane: &Plane) {
    let lo = plane.values().iter().copied().fold(f64::INFINITY, f64::min);
    let hi = plane.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    for i in 0..plane.height() {
        for j in 0..plane.width() {
            let v = ((plane[(i, j)] - lo) / span * 255.0).round() as u8;
            let at = 4 * ((top + i) * canvas_width + left + j);
            canvas[at..at + 4].copy_from_slice(&[v, v, v, 255]);
        }
    }
}

/// Random textured RGBA test image of `size x size`.
#[wasm_bindgen]
pub fn demo_image(size: usize, seed: u32) -> Result<Vec<u8>, JsError> {
    if size < 8 {
        return Err(JsError::new("size must be at least 8"));
    }
    let (image, _) = render_texture_sample(size, 3, &mut ChaCha8Rng::seed_from_u64(seed.into()));
    let c = image.channels();
    let mut out = Vec::with_capacity(4 * size * size);
    for (r, (g, b)) in c[0].values().iter().zip(c[1].values().iter().zip(c[2].values())) {
        out.extend([r, g, b].map(|v| (v * 255.0).round() as u8));
        out.push(255);
    }
    Ok(out)
}

/// Subbands of the luminance laid out as a grid: one row per scale, columns
/// H, V, D and (last row only) the approximation.
#[wasm_bindgen]
pub struct SubbandMosaic {
    width: usize,
    height: usize,
    rgba: Vec<u8>,
    energy_ratio: f64,
}

#[wasm_bindgen]
impl SubbandMosaic {
    #[wasm_bindgen(getter)]
    pub fn width(&self) -> usize {
        self.width
    }

    #[wasm_bindgen(getter)]
    pub fn height(&self) -> usize {
        self.height
    }

    #[wasm_bindgen(getter)]
    pub fn rgba(&self) -> Vec<u8> {
        self.rgba.clone()
    }

    /// Subband energy over input energy; 1 for this filter bank.
    #[wasm_bindgen(getter)]
    pub fn energy_ratio(&self) -> f64 {
        self.energy_ratio
    }
}

#[wasm_bindgen]
pub fn swt_mosaic(rgba: &[u8], width: usize, height: usize, levels: usize) -> Result<SubbandMosaic, JsError> {
    let plane = luminance(rgba, width, height)?;
    let pyramid = swt2d(&plane, levels).map_err(js_err)?;
    let (mw, mh) = (4 * width, levels * height);
    let mut canvas = vec![0u8; 4 * mw * mh];
    for j in 1..=levels {
        for (k, r) in Orientation::DETAILS.into_iter().enumerate() {
            blit(&mut canvas, mw, (j - 1) * height, k * width, pyramid.detail(j, r));
        }
    }
    blit(&mut canvas, mw, (levels - 1) * height, 3 * width, pyramid.approx());
    Ok(SubbandMosaic {
        width: mw,
        height: mh,
        rgba: canvas,
        energy_ratio: bessel_energy_ratio(&pyramid, &plane).ratio,
    })
}

/// One map of the scattering tree of the luminance.
#[wasm_bindgen]
pub struct FeatureMap {
    label: String,
    count: usize,
    rgba: Vec<u8>,
}

#[wasm_bindgen]
impl FeatureMap {
    /// Path name such as `root`, `H2` or `V1/D3`.
    #[wasm_bindgen(getter)]
    pub fn label(&self) -> String {
        self.label.clone()
    }

    /// Number of maps per channel.
    #[wasm_bindgen(getter)]
    pub fn count(&self) -> usize {
        self.count
    }

    #[wasm_bindgen(getter)]
    pub fn rgba(&self) -> Vec<u8> {
        self.rgba.clone()
    }
}

/// Map `index` (canonical order) of the default extractor. Width and height
/// must be even.
#[wasm_bindgen]
pub fn feature_map(rgba: &[u8], width: usize, height: usize, index: usize) -> Result<FeatureMap, JsError> {
    let plane = luminance(rgba, width, height)?;
    let mut maps = extract_channel(&plane, &ExtractorConfig::default()).map_err(js_err)?;
    let count = maps.len();
    if index >= count {
        return Err(JsError::new(&format!("index {index} out of {count} maps")));
    }
    let (path, map) = maps.swap_remove(index);
    let mut out = vec![0u8; 4 * width * height];
    blit(&mut out, width, 0, 0, &map);
    Ok(FeatureMap {
        label: path.to_string(),
        count,
        rgba: out,
    })
}

/// Exact and random-feature kernel along a fixed direction. Returns
/// `points` triples `(distance, exact, approx)`, flattened.
#[wasm_bindgen]
pub fn kernel_curve(dim: usize, gamma: f64, m_tilde: usize, seed: u32, max_distance: f64, points: usize) -> Result<Vec<f64>, JsError> {
    let proj = generate(&RffConfig { m_tilde, gamma, seed: seed.into() }, dim).map_err(js_err)?;
    let x = vec![0.5; dim];
    let dir: Vec<f64> = (0..dim).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let norm = (dim as f64).sqrt();
    let px = proj.transform(&x, gamma).map_err(js_err)?;
    let mut out = Vec::with_capacity(3 * points);
    for p in 0..points {
        let d = max_distance * p as f64 / (points.max(2) - 1) as f64;
        let y: Vec<f64> = x.iter().zip(&dir).map(|(a, u)| a + d * u / norm).collect();
        let py = proj.transform(&y, gamma).map_err(js_err)?;
        let approx: f64 = px.iter().zip(&py).map(|(a, b)| a * b).sum();
        out.extend([d, rbf_kernel(&x, &y, gamma), approx]);
    }
    Ok(out)
}
