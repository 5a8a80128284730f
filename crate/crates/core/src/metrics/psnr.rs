use crate::splat::Image;
use crate::{Error, Result};

/// Peak signal-to-noise ratio in dB for images in [0, 1]; identical images
/// give `f64::INFINITY`.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    let mse = mse(a, b)?;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (1.0 / mse).log10())
}

pub fn mse(a: &Image, b: &Image) -> Result<f64> {
    if !a.same_size(b) {
        return Err(Error::invalid(format!(
            "image sizes differ: {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    let sum: f64 = a.rgb.iter().zip(&b.rgb).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(sum / a.rgb.len() as f64)
}
