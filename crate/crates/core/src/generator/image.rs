use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `height × width × 3` image stored row-major, channels interleaved.
/// Values lie in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageBuffer {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl ImageBuffer {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidArgument(
                "image dimensions must be positive".into(),
            ));
        }
        if data.len() != height * width * 3 {
            return Err(Error::dims("image data", height * width * 3, data.len()));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::OutOfDomain(format!(
                "pixel value {v} outside [0, 1]"
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        assert!(height > 0 && width > 0 && (0.0..=1.0).contains(&value));
        Self {
            height,
            width,
            data: vec![value; height * width * 3],
        }
    }

    /// Clamps into `[0, 1]` instead of rejecting.
    pub fn from_clamped(height: usize, width: usize, mut data: Vec<f64>) -> Result<Self> {
        data.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
        Self::new(height, width, data)
    }

    pub(crate) fn from_raw_unchecked(height: usize, width: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), height * width * 3);
        Self {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn pixel(&self, y: usize, x: usize) -> [f64; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn max_abs_diff(&self, other: &ImageBuffer) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn ensure_dims(&self, height: usize, width: usize) -> Result<()> {
        if self.height != height {
            return Err(Error::dims("image height", height, self.height));
        }
        if self.width != width {
            return Err(Error::dims("image width", width, self.width));
        }
        Ok(())
    }

    /// 2× box downsample (odd trailing rows/columns are dropped).
    pub fn half_scale(&self) -> ImageBuffer {
        let (h, w) = (self.height / 2, self.width / 2);
        if h == 0 || w == 0 {
            return self.clone();
        }
        let mut out = vec![0.0; h * w * 3];
        for y in 0..h {
            for x in 0..w {
                for c in 0..3 {
                    let at = |yy: usize, xx: usize| self.data[(yy * self.width + xx) * 3 + c];
                    out[(y * w + x) * 3 + c] = 0.25
                        * (at(2 * y, 2 * x)
                            + at(2 * y, 2 * x + 1)
                            + at(2 * y + 1, 2 * x)
                            + at(2 * y + 1, 2 * x + 1));
                }
            }
        }
        ImageBuffer::from_raw_unchecked(h, w, out)
    }
}
