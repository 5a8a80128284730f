use std::path::Path;

use crate::{Error, Result, Vec3};

/// Linear RGB image with an accumulated-opacity channel, values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    /// Row-major, three values per pixel.
    pub rgb: Vec<f64>,
    pub alpha: Vec<f64>,
}

/// Gradient of a scalar loss with respect to every image channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrad {
    pub width: usize,
    pub height: usize,
    pub rgb: Vec<f64>,
    pub alpha: Vec<f64>,
}

impl ImageGrad {
    pub fn zeros(width: usize, height: usize) -> Self {
        ImageGrad {
            width,
            height,
            rgb: vec![0.0; width * height * 3],
            alpha: vec![0.0; width * height],
        }
    }

    pub fn scale(&mut self, k: f64) {
        self.rgb.iter_mut().for_each(|g| *g *= k);
        self.alpha.iter_mut().for_each(|g| *g *= k);
    }
}

impl Image {
    pub fn filled(width: usize, height: usize, color: Vec3, alpha: f64) -> Self {
        let mut rgb = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            rgb.extend_from_slice(&[color.x, color.y, color.z]);
        }
        Image {
            width,
            height,
            rgb,
            alpha: vec![alpha; width * height],
        }
    }

    pub fn pixel(&self, x: usize, y: usize) -> Vec3 {
        let i = 3 * (y * self.width + x);
        Vec3::new(self.rgb[i], self.rgb[i + 1], self.rgb[i + 2])
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, c: Vec3) {
        let i = 3 * (y * self.width + x);
        self.rgb[i..i + 3].copy_from_slice(&[c.x, c.y, c.z]);
    }

    pub fn same_size(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Mean absolute per-channel RGB difference.
    pub fn mean_abs_diff(&self, other: &Image) -> Result<f64> {
        if !self.same_size(other) {
            return Err(Error::invalid(format!(
                "image sizes differ: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        let sum: f64 = self.rgb.iter().zip(&other.rgb).map(|(a, b)| (a - b).abs()).sum();
        Ok(sum / self.rgb.len() as f64)
    }

    pub fn max_abs_diff(&self, other: &Image) -> f64 {
        self.rgb
            .iter()
            .zip(&other.rgb)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn clamp(&mut self) {
        for v in self.rgb.iter_mut().chain(self.alpha.iter_mut()) {
            *v = if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 };
        }
    }

    /// 8-bit RGBA PNG.
    pub fn save_png(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::with_capacity(self.width * self.height * 4);
        for i in 0..self.width * self.height {
            for c in 0..3 {
                buf.push(to_u8(self.rgb[3 * i + c]));
            }
            buf.push(to_u8(self.alpha[i]));
        }
        image::save_buffer(
            path,
            &buf,
            self.width as u32,
            self.height as u32,
            image::ExtendedColorType::Rgba8,
        )
        .map_err(|e| Error::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// Loads PNG or PPM; missing alpha reads as fully opaque.
    pub fn load(path: &Path) -> Result<Image> {
        let img = image::open(path).map_err(|e| Error::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let rgba = img.to_rgba8();
        let (w, h) = rgba.dimensions();
        let mut out = Image::filled(w as usize, h as usize, Vec3::zeros(), 1.0);
        for (i, px) in rgba.pixels().enumerate() {
            for c in 0..3 {
                out.rgb[3 * i + c] = px.0[c] as f64 / 255.0;
            }
            out.alpha[i] = px.0[3] as f64 / 255.0;
        }
        Ok(out)
    }

    /// The image after an 8-bit encode/decode cycle.
    pub fn quantized(&self) -> Image {
        let q = |v: f64| to_u8(v) as f64 / 255.0;
        Image {
            width: self.width,
            height: self.height,
            rgb: self.rgb.iter().map(|&v| q(v)).collect(),
            alpha: self.alpha.iter().map(|&v| q(v)).collect(),
        }
    }
}

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}
