use super::GeomError;

/// Dense row-major raster with interleaved channels and intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    pixels: Vec<f32>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, pixels: Vec<f32>) -> Result<Self, GeomError> {
        if channels != 1 && channels != 3 {
            return Err(GeomError::Channels(channels));
        }
        if width == 0 || height == 0 {
            return Err(GeomError::OutputSize(width, height));
        }
        let expected = width * height * channels;
        if pixels.len() != expected {
            return Err(GeomError::PixelCount { expected, got: pixels.len() });
        }
        if let Some(i) = pixels.iter().position(|v| !v.is_finite()) {
            return Err(GeomError::NonFinite(i));
        }
        Ok(Self { width, height, channels, pixels })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f32) -> Result<Self, GeomError> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    /// Builds an image by evaluating `f(x, y, c)` at every pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self, GeomError> {
        let mut pixels = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    pixels.push(f(x, y, c));
                }
            }
        }
        Self::new(width, height, channels, pixels)
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
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f32> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.pixels[(y * self.width + x) * self.channels + c]
    }

    /// Mean over the channels at one pixel.
    pub fn luma(&self, x: usize, y: usize) -> f32 {
        let base = (y * self.width + x) * self.channels;
        let s: f32 = self.pixels[base..base + self.channels].iter().sum();
        s / self.channels as f32
    }

    /// Single-channel copy (channel mean).
    pub fn to_gray(&self) -> Image {
        if self.channels == 1 {
            return self.clone();
        }
        let mut out = Vec::with_capacity(self.width * self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                out.push(self.luma(x, y));
            }
        }
        Image { width: self.width, height: self.height, channels: 1, pixels: out }
    }

    /// Full-image box `(0, 0, width, height)`.
    pub fn full_box(&self) -> super::BBox {
        super::BBox::full(self.width, self.height)
    }

    pub(crate) fn from_parts_unchecked(width: usize, height: usize, channels: usize, pixels: Vec<f32>) -> Self {
        debug_assert_eq!(pixels.len(), width * height * channels);
        Self { width, height, channels, pixels }
    }
}
