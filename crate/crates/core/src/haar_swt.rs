//! Undecimated 2D Haar wavelet transform computed with the algorithme à trous.
//!
//! Filters are the normalized Haar pair `h = (1/2, 1/2)`, `g = (1/2, -1/2)`.
//! With this scaling `|H(ω)|² + |G(ω)|² = 1`, so each separable level (and
//! hence the whole cascade) is a tight frame with bound 1: the energy of all
//! subbands sums exactly to the input energy.
//!
//! Level `j` uses the base taps dilated by `2^(j-1)`, applied along rows
//! (horizontal axis) and then along columns, with circular boundaries. A
//! filter at dilation `d` reads samples at offsets `{0, +d}`:
//!
//! ```text
//! y[n] = t0 * x[n] + t1 * x[(n + d) mod N]
//! ```

use std::fmt;

use crate::{Error, Plane, Result};

/// Low-pass Haar taps.
pub const LOWPASS: [f64; 2] = [0.5, 0.5];
/// High-pass Haar taps.
pub const HIGHPASS: [f64; 2] = [0.5, -0.5];

/// Returns the `(lowpass, highpass)` 1D Haar filters.
pub fn haar_kernels() -> ([f64; 2], [f64; 2]) {
    (LOWPASS, HIGHPASS)
}

/// Subband orientation. `Horizontal` is low-pass along rows and high-pass
/// along columns, so it responds to horizontal edges; `Vertical` is the
/// transpose; `Diagonal` is high-pass along both axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Orientation {
    Horizontal,
    Vertical,
    Diagonal,
    Approx,
}

impl Orientation {
    /// The three detail orientations in canonical order.
    pub const DETAILS: [Orientation; 3] = [
        Orientation::Horizontal,
        Orientation::Vertical,
        Orientation::Diagonal,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            Orientation::Horizontal => "H",
            Orientation::Vertical => "V",
            Orientation::Diagonal => "D",
            Orientation::Approx => "A",
        }
    }

    fn detail_index(self) -> usize {
        match self {
            Orientation::Horizontal => 0,
            Orientation::Vertical => 1,
            Orientation::Diagonal => 2,
            Orientation::Approx => panic!("approximation is not a detail orientation"),
        }
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subband {
    pub scale: usize,
    pub orientation: Orientation,
    pub plane: Plane,
}

/// Output of one à-trous decomposition: `3 * levels` detail subbands ordered
/// by scale then orientation, plus the level-`levels` approximation.
#[derive(Debug, Clone, PartialEq)]
pub struct SwtPyramid {
    levels: usize,
    details: Vec<Subband>,
    approx: Subband,
}

impl SwtPyramid {
    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn details(&self) -> &[Subband] {
        &self.details
    }

    pub fn approx(&self) -> &Plane {
        &self.approx.plane
    }

    pub fn approx_subband(&self) -> &Subband {
        &self.approx
    }

    pub fn into_approx(self) -> Plane {
        self.approx.plane
    }

    /// Detail plane at `scale` (1-based) and `orientation`.
    pub fn detail(&self, scale: usize, orientation: Orientation) -> &Plane {
        assert!((1..=self.levels).contains(&scale), "scale {scale} out of range");
        &self.details[(scale - 1) * 3 + orientation.detail_index()].plane
    }

    /// All subbands, details first, approximation last.
    pub fn subbands(&self) -> impl Iterator<Item = &Subband> {
        self.details.iter().chain(std::iter::once(&self.approx))
    }

    /// Largest absolute difference over all subbands.
    pub fn max_abs_diff(&self, other: &SwtPyramid) -> f64 {
        assert_eq!(self.levels, other.levels);
        self.subbands()
            .zip(other.subbands())
            .map(|(a, b)| a.plane.max_abs_diff(&b.plane))
            .fold(0.0, f64::max)
    }
}

fn check_levels(levels: usize) -> Result<()> {
    if levels == 0 {
        return Err(Error::Config("wavelet transform needs at least one scale".into()));
    }
    Ok(())
}

fn filter_rows(src: &Plane, taps: [f64; 2], dilation: usize) -> Plane {
    let (w, h) = (src.width(), src.height());
    let d = dilation % w;
    let mut out = Vec::with_capacity(w * h);
    for i in 0..h {
        let row = src.row(i);
        for j in 0..w {
            let k = if j + d >= w { j + d - w } else { j + d };
            out.push(taps[0] * row[j] + taps[1] * row[k]);
        }
    }
    Plane::new(w, h, out).expect("shape preserved")
}

fn filter_cols(src: &Plane, taps: [f64; 2], dilation: usize) -> Plane {
    let (w, h) = (src.width(), src.height());
    let d = dilation % h;
    let mut out = Vec::with_capacity(w * h);
    for i in 0..h {
        let k = if i + d >= h { i + d - h } else { i + d };
        let (a, b) = (src.row(i), src.row(k));
        out.extend(a.iter().zip(b).map(|(x, y)| taps[0] * x + taps[1] * y));
    }
    Plane::new(w, h, out).expect("shape preserved")
}

fn lowpass_level(src: &Plane, dilation: usize) -> Plane {
    filter_cols(&filter_rows(src, LOWPASS, dilation), LOWPASS, dilation)
}

/// À-trous decomposition of `plane` into `levels` scales.
pub fn swt2d(plane: &Plane, levels: usize) -> Result<SwtPyramid> {
    check_levels(levels)?;
    let mut details = Vec::with_capacity(3 * levels);
    let mut current = plane.clone();
    for scale in 1..=levels {
        let d = 1usize << (scale - 1);
        let low_rows = filter_rows(&current, LOWPASS, d);
        let high_rows = filter_rows(&current, HIGHPASS, d);
        let bands = [
            (Orientation::Horizontal, filter_cols(&low_rows, HIGHPASS, d)),
            (Orientation::Vertical, filter_cols(&high_rows, LOWPASS, d)),
            (Orientation::Diagonal, filter_cols(&high_rows, HIGHPASS, d)),
        ];
        details.extend(bands.into_iter().map(|(orientation, plane)| Subband {
            scale,
            orientation,
            plane,
        }));
        current = filter_cols(&low_rows, LOWPASS, d);
    }
    Ok(SwtPyramid {
        levels,
        details,
        approx: Subband {
            scale: levels,
            orientation: Orientation::Approx,
            plane: current,
        },
    })
}

/// Approximation-only cascade; equal to `swt2d(plane, levels)?.approx()`.
pub fn lowpass_cascade(plane: &Plane, levels: usize) -> Result<Plane> {
    check_levels(levels)?;
    let mut current = plane.clone();
    for scale in 1..=levels {
        current = lowpass_level(&current, 1usize << (scale - 1));
    }
    Ok(current)
}

/// Expanded taps of `first` followed by `second` (both reading forward offsets).
fn compose(first: &[f64], second: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; first.len() + second.len() - 1];
    for (a, x) in first.iter().enumerate() {
        for (b, y) in second.iter().enumerate() {
            out[a + b] += x * y;
        }
    }
    out
}

fn dilate(taps: [f64; 2], dilation: usize) -> Vec<f64> {
    let mut out = vec![0.0; dilation + 1];
    out[0] = taps[0];
    out[dilation] = taps[1];
    out
}

/// Equivalent 1D filters `(lowpass, highpass)` of level `scale`: the cascade
/// of all coarser-level lowpasses followed by the level's own pair.
pub fn equivalent_filters(scale: usize) -> (Vec<f64>, Vec<f64>) {
    let mut low = vec![1.0];
    for s in 1..scale {
        low = compose(&low, &dilate(LOWPASS, 1 << (s - 1)));
    }
    let d = 1 << (scale - 1);
    (
        compose(&low, &dilate(LOWPASS, d)),
        compose(&low, &dilate(HIGHPASS, d)),
    )
}

fn separable_circular(plane: &Plane, col_taps: &[f64], row_taps: &[f64]) -> Plane {
    let (w, h) = (plane.width(), plane.height());
    Plane::from_fn(w, h, |i, j| {
        let mut acc = 0.0;
        for (a, ca) in col_taps.iter().enumerate() {
            if *ca == 0.0 {
                continue;
            }
            for (b, rb) in row_taps.iter().enumerate() {
                acc += ca * rb * plane[((i + a) % h, (j + b) % w)];
            }
        }
        acc
    })
}

/// Reference transform: explicit circular convolution with the fully expanded
/// equivalent filter of every subband. Much slower than [`swt2d`]; intended
/// as an oracle.
pub fn swt2d_direct(plane: &Plane, levels: usize) -> Result<SwtPyramid> {
    check_levels(levels)?;
    let mut details = Vec::with_capacity(3 * levels);
    for scale in 1..=levels {
        let (low, high) = equivalent_filters(scale);
        for orientation in Orientation::DETAILS {
            let (cols, rows) = match orientation {
                Orientation::Horizontal => (&high, &low),
                Orientation::Vertical => (&low, &high),
                _ => (&high, &high),
            };
            details.push(Subband {
                scale,
                orientation,
                plane: separable_circular(plane, cols, rows),
            });
        }
    }
    let (low, _) = equivalent_filters(levels);
    Ok(SwtPyramid {
        levels,
        details,
        approx: Subband {
            scale: levels,
            orientation: Orientation::Approx,
            plane: separable_circular(plane, &low, &low),
        },
    })
}

/// Result of the frame-energy check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyRatio {
    pub ratio: f64,
    /// Set when the input had zero energy; `ratio` is then 1 by convention.
    pub degenerate: bool,
}

/// `(‖approx‖² + Σ‖detail‖²) / ‖input‖²`.
pub fn bessel_energy_ratio(pyramid: &SwtPyramid, input: &Plane) -> EnergyRatio {
    let denom = input.energy();
    if denom == 0.0 {
        return EnergyRatio {
            ratio: 1.0,
            degenerate: true,
        };
    }
    let num: f64 = pyramid.subbands().map(|s| s.plane.energy()).sum();
    EnergyRatio {
        ratio: num / denom,
        degenerate: false,
    }
}

/// Operation counts of the feature extractor. All fields are summed over
/// channels; `total_ops` is the sum of the four components.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OpReport {
    pub swt_additions: f64,
    pub chi_additions: f64,
    pub abs_ops: f64,
    pub interpolation_ops: f64,
    pub total_ops: f64,
}

impl OpReport {
    fn from_parts(swt: f64, chi: f64, abs: f64, interp: f64) -> Self {
        Self {
            swt_additions: swt,
            chi_additions: chi,
            abs_ops: abs,
            interpolation_ops: interp,
            total_ops: swt + chi + abs + interp,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::from_parts(
            self.swt_additions * factor,
            self.chi_additions * factor,
            self.abs_ops * factor,
            self.interpolation_ops * factor,
        )
    }

    pub fn add(&self, other: &OpReport) -> Self {
        Self::from_parts(
            self.swt_additions + other.swt_additions,
            self.chi_additions + other.chi_additions,
            self.abs_ops + other.abs_ops,
            self.interpolation_ops + other.interpolation_ops,
        )
    }
}

/// Closed-form cost model of a depth-2 extractor with every second-layer path,
/// pooling factor 2 and a single image scale:
///
/// * SWT additions: `6WHJ + (3/2)WHRJ²`
/// * χ additions for the last layer: `(1/2)WHJ·R²J²`
/// * modulus operations: `WHRJ(1 + RJ/4)`
/// * interpolation: `WH(RJ + 1)RJ` pixels at 4 multiplies + 4 adds each
pub fn paper_op_count(
    width: usize,
    height: usize,
    levels: usize,
    orientations: usize,
    channels: usize,
) -> OpReport {
    let wh = (width * height) as f64;
    let j = levels as f64;
    let r = orientations as f64;
    let swt = 6.0 * wh * j + 1.5 * wh * r * j * j;
    let chi = 0.5 * wh * j * (r * r * j * j);
    let abs = wh * r * j * (1.0 + r * j / 4.0);
    let interp = 8.0 * wh * (r * j + 1.0) * r * j;
    OpReport::from_parts(swt, chi, abs, interp).scaled(channels as f64)
}
