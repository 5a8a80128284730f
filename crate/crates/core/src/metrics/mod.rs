//! Image-quality and distribution metrics, and perceptual score aggregation.

pub mod features;
pub mod fid;
pub mod kid;
pub mod perceptual;
pub mod psnr;
pub mod ssim;

pub use features::FeatureSet;
pub use fid::fid;
pub use kid::{kid, polynomial_kernel};
pub use perceptual::{
    overall_from_criterion_means, parse_score_lines, perceptual_aggregate, PerceptualReport, ScoreRecord,
};
pub use psnr::{mse, psnr};
pub use ssim::{ssim, ssim_with_grad};
