//! Random Fourier features.
//!
//! `φ(F) = sqrt(2/m̃) · cos(γ G F + b)` with `G` an `m̃ x m` matrix of i.i.d.
//! standard normals and `b` uniform on `[0, 2π)`. Then
//! `⟨φ(x), φ(y)⟩ ≈ exp(-γ² ‖x - y‖² / 2)`.
//!
//! `G` and `b` are never stored: they are a pure function of
//! `(seed, m̃, m)` under the generator identified by [`PRNG_CHACHA8_BOX_MULLER`].

use std::f64::consts::TAU;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Generator id stored in model files: ChaCha8 seeded through
/// `SeedableRng::seed_from_u64`, 53-bit uniform doubles, Box–Muller pairs
/// `(r cos θ, r sin θ)` with `r = sqrt(-2 ln(1 - u1))`, `θ = 2π u2`.
pub const PRNG_CHACHA8_BOX_MULLER: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RffConfig {
    pub m_tilde: usize,
    pub gamma: f64,
    pub seed: u64,
}

impl Default for RffConfig {
    fn default() -> Self {
        Self {
            m_tilde: 5000,
            gamma: 1.0,
            seed: 0,
        }
    }
}

impl RffConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m_tilde == 0 {
            return Err(Error::Config("m_tilde must be at least 1".into()));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!("gamma must be positive, got {}", self.gamma)));
        }
        Ok(())
    }
}

/// Seed-determined projection `(G, b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RffProjection {
    matrix: Array2<f64>,
    phases: Array1<f64>,
}

struct StandardNormals {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl StandardNormals {
    fn next(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1: f64 = self.rng.random();
        let u2: f64 = self.rng.random();
        let r = (-2.0 * (1.0 - u1).ln()).sqrt();
        let (s, c) = (TAU * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }
}

/// Generates `G` (row-major, first) and then `b` from `config.seed`.
pub fn generate(config: &RffConfig, input_dim: usize) -> Result<RffProjection> {
    config.validate()?;
    if input_dim == 0 {
        return Err(Error::Config("input dimension must be at least 1".into()));
    }
    let mut normals = StandardNormals {
        rng: ChaCha8Rng::seed_from_u64(config.seed),
        spare: None,
    };
    let matrix = Array2::from_shape_simple_fn((config.m_tilde, input_dim), || normals.next());
    let mut rng = normals.rng;
    let phases = Array1::from_shape_simple_fn(config.m_tilde, || {
        let b = TAU * rng.random::<f64>();
        if b >= TAU { 0.0 } else { b }
    });
    Ok(RffProjection { matrix, phases })
}

impl RffProjection {
    /// Input dimension m.
    pub fn input_dim(&self) -> usize {
        self.matrix.ncols()
    }

    /// Output dimension m̃.
    pub fn output_dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn phases(&self) -> &Array1<f64> {
        &self.phases
    }

    /// `φ(F)` for one feature vector.
    pub fn transform(&self, features: &[f64], gamma: f64) -> Result<Vec<f64>> {
        if features.len() != self.input_dim() {
            return Err(Error::mismatch(self.input_dim(), features.len()));
        }
        let scale = (2.0 / self.output_dim() as f64).sqrt();
        Ok(self
            .matrix
            .outer_iter()
            .zip(&self.phases)
            .map(|(row, b)| {
                let dot: f64 = row.iter().zip(features).map(|(g, f)| g * f).sum();
                scale * (gamma * dot + b).cos()
            })
            .collect())
    }

    /// `φ` of every row of `features` (`n x m`), returned as `n x m̃`.
    pub fn transform_batch(&self, features: ArrayView2<'_, f64>, gamma: f64) -> Result<Array2<f64>> {
        if features.ncols() != self.input_dim() {
            return Err(Error::mismatch(self.input_dim(), features.ncols()));
        }
        let scale = (2.0 / self.output_dim() as f64).sqrt();
        let mut out = features.dot(&self.matrix.t());
        for mut row in out.axis_iter_mut(Axis(0)) {
            for (v, b) in row.iter_mut().zip(&self.phases) {
                *v = scale * (gamma * *v + b).cos();
            }
        }
        Ok(out)
    }
}

/// Exact Gaussian kernel approximated by [`RffProjection::transform`].
pub fn rbf_kernel(x: &[f64], y: &[f64], gamma: f64) -> f64 {
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum();
    (-gamma * gamma * d2 / 2.0).exp()
}
