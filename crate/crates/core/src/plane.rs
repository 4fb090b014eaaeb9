use std::ops::{Index, IndexMut};

use crate::{Error, Result};

/// A single real-valued raster. Indexed as `(row, col)`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Plane {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Empty("plane with zero width or height"));
        }
        if data.len() != width * height {
            return Err(Error::mismatch(
                format!("{} values for {width}x{height}", width * height),
                format!("{} values", data.len()),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("plane contains non-finite values".into()));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(width > 0 && height > 0, "plane dimensions must be positive");
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    /// Builds a plane by evaluating `f(row, col)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(width > 0 && height > 0, "plane dimensions must be positive");
        let mut data = Vec::with_capacity(width * height);
        for i in 0..height {
            for j in 0..width {
                data.push(f(i, j));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_values(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    pub fn same_shape(&self, other: &Plane) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Squared ℓ2 norm.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Plane {
        Plane {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn abs(&self) -> Plane {
        self.map(f64::abs)
    }

    pub fn max_abs_diff(&self, other: &Plane) -> f64 {
        assert!(self.same_shape(other));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Circular shift: output `(i, j)` = input `(i - di, j - dj)` modulo the size.
    pub fn shift_circular(&self, di: usize, dj: usize) -> Plane {
        let (w, h) = (self.width, self.height);
        Plane::from_fn(w, h, |i, j| self[((i + h - di % h) % h, (j + w - dj % w) % w)])
    }

    /// Extends the plane periodically to `width x height` (right and bottom).
    pub fn pad_circular(&self, width: usize, height: usize) -> Plane {
        assert!(width >= self.width && height >= self.height);
        Plane::from_fn(width, height, |i, j| {
            self[(i % self.height, j % self.width)]
        })
    }

    /// Top-left `width x height` window.
    pub fn crop(&self, width: usize, height: usize) -> Plane {
        assert!(width <= self.width && height <= self.height);
        if width == self.width && height == self.height {
            return self.clone();
        }
        Plane::from_fn(width, height, |i, j| self[(i, j)])
    }
}

impl Index<(usize, usize)> for Plane {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.width + j]
    }
}

impl IndexMut<(usize, usize)> for Plane {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.width + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(Plane::new(0, 3, vec![]).is_err());
        assert!(Plane::new(2, 2, vec![0.0; 3]).is_err());
        assert!(Plane::new(1, 1, vec![f64::NAN]).is_err());
    }

    #[test]
    fn shift_and_pad() {
        let p = Plane::from_fn(3, 2, |i, j| (i * 3 + j) as f64);
        let s = p.shift_circular(1, 1);
        assert_eq!(s[(0, 0)], p[(1, 2)]);
        assert_eq!(s[(1, 1)], p[(0, 0)]);
        let padded = p.pad_circular(4, 4);
        assert_eq!(padded[(3, 3)], p[(1, 0)]);
        assert_eq!(padded.crop(3, 2), p);
    }
}
