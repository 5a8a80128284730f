//! Hybrid supervision sets: captured images plus avatar renders.

use serde::{Deserialize, Serialize};

use crate::geometry::Camera;
use crate::splat::Image;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    /// A captured frontal image.
    Ori,
    /// A novel view rendered from the current avatar.
    Render,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridItem {
    pub image: Image,
    pub camera: Camera,
    pub origin: Origin,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct HybridSet {
    pub items: Vec<HybridItem>,
}

impl HybridSet {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn count(&self, origin: Origin) -> usize {
        self.items.iter().filter(|i| i.origin == origin).count()
    }

    pub fn validate(&self) -> Result<()> {
        if self.items.is_empty() {
            return Err(Error::invalid("hybrid set is empty"));
        }
        for item in &self.items {
            item.camera.validate()?;
            if (item.image.width, item.image.height) != (item.camera.width, item.camera.height) {
                return Err(Error::invalid(format!(
                    "image of {}x{} paired with a {}x{} camera",
                    item.image.width, item.image.height, item.camera.width, item.camera.height
                )));
            }
        }
        Ok(())
    }
}

/// Captured views first, then avatar renders, each tagged with its origin.
pub fn build_hybrid_set(ori_views: Vec<(Image, Camera)>, avatar_renders: Vec<(Image, Camera)>) -> Result<HybridSet> {
    if ori_views.is_empty() {
        return Err(Error::invalid("a hybrid set needs at least one captured view"));
    }
    let tag = |origin| move |(image, camera): (Image, Camera)| HybridItem { image, camera, origin };
    let items = ori_views
        .into_iter()
        .map(tag(Origin::Ori))
        .chain(avatar_renders.into_iter().map(tag(Origin::Render)))
        .collect();
    let set = HybridSet { items };
    set.validate()?;
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::camera_from_orbit;
    use crate::Vec3;

    fn views(n: usize) -> Vec<(Image, Camera)> {
        (0..n)
            .map(|i| {
                let cam = camera_from_orbit(10.0 * i as f64, 0.0, 4.0, Vec3::zeros(), 50.0, (8, 6)).unwrap();
                (Image::filled(8, 6, Vec3::repeat(0.1 * i as f64), 1.0), cam)
            })
            .collect()
    }

    #[test]
    fn counts_and_tags() {
        let set = build_hybrid_set(views(3), vec![]).unwrap();
        assert_eq!(set.len(), 3);
        assert_eq!(set.count(Origin::Ori), 3);
        let set = build_hybrid_set(views(3), views(5)).unwrap();
        assert_eq!(set.len(), 8);
        assert_eq!(set.count(Origin::Render), 5);
        assert_eq!(set.items[3].origin, Origin::Render);
    }

    #[test]
    fn empty_ori_rejected() {
        assert!(build_hybrid_set(vec![], views(2)).is_err());
    }

    #[test]
    fn size_mismatch_rejected() {
        let mut v = views(1);
        v[0].0 = Image::filled(4, 4, Vec3::zeros(), 1.0);
        assert!(build_hybrid_set(v, vec![]).is_err());
    }
}
