//! Binary model format.
//!
//! Only the classifier weights are stored; the random projection is
//! regenerated from the stored seed. All integers and floats are
//! little-endian:
//!
//! ```text
//! offset  field
//! 0       magic            b"WSG1"
//! 4       version          u32 (= 1)
//!         levels J         u32
//!         orientations R   u32
//!         depth D          u32
//!         pool factor      u32
//!         scale rule       u8   (0 = non-decreasing, 1 = all)
//!         centered         u8   (0 = no, 1 = yes)
//!         n_scales         u32, followed by n_scales x u32 image scales
//!         channels         u32
//!         color mode       u8   (0 = raw, 1 = yuv)
//!         m_tilde          u32
//!         gamma            f32
//!         seed             u64
//!         prng id          u8   (1 = ChaCha8 + Box-Muller, see `rff`)
//!         K                u32, followed by K x (u32 length, UTF-8 bytes) class names
//!         W                K * m_tilde x f32, row-major (class-major)
//!         v                K x f32
//!         checksum         u64: first 8 bytes (LE) of SHA-256 over the W and v bytes
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2};
use sha2::{Digest, Sha256};

use crate::features::{feature_dimension, ExtractorConfig, ScaleRule};
use crate::linear_svm::LinearModel;
use crate::rff::{self, RffConfig, RffProjection, PRNG_CHACHA8_BOX_MULLER};
use crate::{Error, Result};

pub const MAGIC: [u8; 4] = *b"WSG1";
pub const FORMAT_VERSION: u32 = 1;

/// Input color handling applied before feature extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ColorMode {
    /// Channels used as loaded.
    Raw,
    /// RGB converted to full-range YUV.
    Yuv,
}

impl ColorMode {
    fn code(self) -> u8 {
        match self {
            ColorMode::Raw => 0,
            ColorMode::Yuv => 1,
        }
    }
}

/// Everything needed to segment an image: extractor and RFF configuration
/// plus the trained weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub extractor: ExtractorConfig,
    pub channels: usize,
    pub color: ColorMode,
    pub rff: RffConfig,
    pub class_names: Vec<String>,
    pub classifier: LinearModel,
}

impl ModelBundle {
    pub fn feature_dimension(&self) -> usize {
        feature_dimension(&self.extractor, self.channels)
    }

    pub fn class_count(&self) -> usize {
        self.classifier.class_count()
    }

    pub fn validate(&self) -> Result<()> {
        self.extractor.validate()?;
        self.rff.validate()?;
        if self.channels == 0 {
            return Err(Error::Config("model needs at least one channel".into()));
        }
        if self.classifier.dim() != self.rff.m_tilde {
            return Err(Error::mismatch(
                format!("classifier over {} random features", self.rff.m_tilde),
                format!("{} weights per class", self.classifier.dim()),
            ));
        }
        if self.class_names.len() != self.class_count() {
            return Err(Error::mismatch(
                format!("{} class names", self.class_count()),
                self.class_names.len(),
            ));
        }
        Ok(())
    }

    /// Regenerates the random projection from the stored seed.
    pub fn projection(&self) -> Result<RffProjection> {
        rff::generate(&self.rff, self.feature_dimension())
    }
}

fn checksum(payload: &[u8]) -> u64 {
    let digest = Sha256::digest(payload);
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Config(format!("{v} does not fit the model format")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

/// Encodes a bundle. Weights are written as `f32`.
pub fn serialize_model(bundle: &ModelBundle) -> Result<Vec<u8>> {
    bundle.validate()?;
    let e = &bundle.extractor;
    let mut out = Vec::with_capacity(128 + 4 * bundle.class_count() * (bundle.rff.m_tilde + 1));
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    put_u32(&mut out, e.levels)?;
    put_u32(&mut out, e.orientations)?;
    put_u32(&mut out, e.depth)?;
    put_u32(&mut out, e.pool_factor)?;
    out.push(match e.scale_rule {
        ScaleRule::NonDecreasing => 0,
        ScaleRule::All => 1,
    });
    out.push(u8::from(e.centered));
    put_u32(&mut out, e.image_scales.len())?;
    for &s in &e.image_scales {
        put_u32(&mut out, s)?;
    }
    put_u32(&mut out, bundle.channels)?;
    out.push(bundle.color.code());
    put_u32(&mut out, bundle.rff.m_tilde)?;
    out.extend_from_slice(&(bundle.rff.gamma as f32).to_le_bytes());
    out.extend_from_slice(&bundle.rff.seed.to_le_bytes());
    out.push(PRNG_CHACHA8_BOX_MULLER);
    put_u32(&mut out, bundle.class_count())?;
    for name in &bundle.class_names {
        put_u32(&mut out, name.len())?;
        out.extend_from_slice(name.as_bytes());
    }
    let payload_start = out.len();
    for w in bundle.classifier.weights().iter() {
        out.extend_from_slice(&(*w as f32).to_le_bytes());
    }
    for b in bundle.classifier.bias().iter() {
        out.extend_from_slice(&(*b as f32).to_le_bytes());
    }
    let sum = checksum(&out[payload_start..]);
    out.extend_from_slice(&sum.to_le_bytes());
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::MalformedModel(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn usize(&mut self) -> Result<usize> {
        Ok(self.u32()? as usize)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

/// Decodes and validates a model. Magic, version and checksum failures are
/// reported as distinct errors before any other validation.
pub fn deserialize_model(bytes: &[u8]) -> Result<ModelBundle> {
    let mut r = Reader { bytes, pos: 0 };
    let magic: [u8; 4] = r
        .take(4)
        .map_err(|_| Error::BadMagic([0; 4]))?
        .try_into()
        .expect("4 bytes");
    if magic != MAGIC {
        return Err(Error::BadMagic(magic));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let levels = r.usize()?;
    let orientations = r.usize()?;
    let depth = r.usize()?;
    let pool_factor = r.usize()?;
    let scale_rule = match r.u8()? {
        0 => ScaleRule::NonDecreasing,
        1 => ScaleRule::All,
        other => return Err(Error::MalformedModel(format!("unknown scale rule {other}"))),
    };
    let centered = match r.u8()? {
        0 => false,
        1 => true,
        other => return Err(Error::MalformedModel(format!("bad centered flag {other}"))),
    };
    let n_scales = r.usize()?;
    if n_scales > 64 {
        return Err(Error::MalformedModel(format!("{n_scales} image scales")));
    }
    let image_scales = (0..n_scales).map(|_| r.usize()).collect::<Result<Vec<_>>>()?;
    let channels = r.usize()?;
    let color = match r.u8()? {
        0 => ColorMode::Raw,
        1 => ColorMode::Yuv,
        other => return Err(Error::MalformedModel(format!("unknown color mode {other}"))),
    };
    let m_tilde = r.usize()?;
    let gamma = r.f32()? as f64;
    let seed = r.u64()?;
    let prng = r.u8()?;
    if prng != PRNG_CHACHA8_BOX_MULLER {
        return Err(Error::MalformedModel(format!("unknown generator id {prng}")));
    }
    let classes = r.usize()?;
    let mut class_names = Vec::with_capacity(classes.min(256));
    for _ in 0..classes {
        let len = r.usize()?;
        let raw = r.take(len)?;
        class_names.push(
            String::from_utf8(raw.to_vec())
                .map_err(|_| Error::MalformedModel("class name is not UTF-8".into()))?,
        );
    }
    let count = classes
        .checked_mul(m_tilde)
        .and_then(|n| n.checked_add(classes))
        .ok_or_else(|| Error::MalformedModel("weight count overflows".into()))?;
    let payload = r.take(count * 4)?;
    let stored = r.u64()?;
    if r.pos != bytes.len() {
        return Err(Error::MalformedModel(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    let computed = checksum(payload);
    if stored != computed {
        return Err(Error::ChecksumMismatch { stored, computed });
    }
    let values: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    let (w, v) = values.split_at(classes * m_tilde);
    let weights = Array2::from_shape_vec((classes, m_tilde), w.to_vec())
        .map_err(|e| Error::MalformedModel(e.to_string()))?;
    let bundle = ModelBundle {
        extractor: ExtractorConfig {
            levels,
            orientations,
            depth,
            pool_factor,
            image_scales,
            scale_rule,
            centered,
        },
        channels,
        color,
        rff: RffConfig { m_tilde, gamma, seed },
        class_names,
        classifier: LinearModel::new(weights, Array1::from(v.to_vec()))?,
    };
    bundle.validate()?;
    Ok(bundle)
}

/// Writes the model through a temporary file renamed into place, so a
/// failed write never leaves a partial model at `path`.
pub fn save_model(bundle: &ModelBundle, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = serialize_model(bundle)?;
    let tmp = path.with_extension("partial");
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelBundle> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    deserialize_model(&bytes)
}
