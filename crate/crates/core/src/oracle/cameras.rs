//! Back-hemisphere camera sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{Camera, OrbitRig};
use crate::{Error, Result};

pub const BACK_AZIMUTH_MIN: f64 = 90.0;
pub const BACK_AZIMUTH_MAX: f64 = 270.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum CameraSampling {
    /// Evenly spaced over [90°, 270°], endpoints included.
    Even,
    /// Independent uniform draws from [90°, 270°].
    Random { seed: u64 },
}

pub fn back_azimuths(count: usize, sampling: CameraSampling) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::invalid("need at least one back camera"));
    }
    Ok(match sampling {
        CameraSampling::Even if count == 1 => vec![(BACK_AZIMUTH_MIN + BACK_AZIMUTH_MAX) / 2.0],
        CameraSampling::Even => (0..count)
            .map(|i| BACK_AZIMUTH_MIN + (BACK_AZIMUTH_MAX - BACK_AZIMUTH_MIN) * i as f64 / (count - 1) as f64)
            .collect(),
        CameraSampling::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..count)
                .map(|_| rng.random_range(BACK_AZIMUTH_MIN..=BACK_AZIMUTH_MAX))
                .collect()
        }
    })
}

pub fn sample_back_cameras(count: usize, rig: &OrbitRig, sampling: CameraSampling) -> Result<Vec<Camera>> {
    back_azimuths(count, sampling)?
        .into_iter()
        .map(|az| rig.camera(az))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn even_spacing() {
        assert_eq!(
            back_azimuths(3, CameraSampling::Even).unwrap(),
            vec![90.0, 180.0, 270.0]
        );
        assert_eq!(back_azimuths(1, CameraSampling::Even).unwrap(), vec![180.0]);
        assert!(back_azimuths(0, CameraSampling::Even).is_err());
    }

    #[test]
    fn seeded_draws_stay_in_range_and_repeat() {
        let a = back_azimuths(100, CameraSampling::Random { seed: 7 }).unwrap();
        assert!(a.iter().all(|x| (90.0..=270.0).contains(x)));
        let mean = a.iter().sum::<f64>() / 100.0;
        assert!((170.0..=190.0).contains(&mean), "mean {mean}");
        assert_eq!(a, back_azimuths(100, CameraSampling::Random { seed: 7 }).unwrap());
    }

    #[test]
    fn cameras_follow_rig() {
        let rig = OrbitRig::default();
        let cams = sample_back_cameras(6, &rig, CameraSampling::Even).unwrap();
        assert_eq!(cams.len(), 6);
        assert_eq!(cams[0].azimuth, 90.0);
        assert_eq!(cams[5].azimuth, 270.0);
        assert!(cams.iter().all(|c| c.radius == rig.radius && c.width == 128));
    }
}
