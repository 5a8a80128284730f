//! Back-view synthesis through the generator and the optional refinement hook.

use std::process::Command;

use serde::{Deserialize, Serialize};

use super::generator::{generate, GeneratorParams};
use crate::geometry::Camera;
use crate::splat::Image;
use crate::{Error, Result};

/// External refinement command. It is run as `program args... <in.png> <out.png>`
/// and must exit with status 0 after writing an image of the same size.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefinementHook {
    pub program: String,
    #[serde(default)]
    pub args: Vec<String>,
}

impl RefinementHook {
    pub fn describe(&self) -> String {
        std::iter::once(self.program.as_str())
            .chain(self.args.iter().map(String::as_str))
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn apply(&self, image: &Image) -> Result<Image> {
        let dir = tempfile::tempdir().map_err(|e| Error::io(std::env::temp_dir(), e))?;
        let input = dir.path().join("in.png");
        let output = dir.path().join("out.png");
        image.save_png(&input)?;
        let status = Command::new(&self.program)
            .args(&self.args)
            .arg(&input)
            .arg(&output)
            .status()
            .map_err(|e| Error::Hook {
                command: self.describe(),
                status: e.to_string(),
            })?;
        if !status.success() {
            return Err(Error::Hook {
                command: self.describe(),
                status: status.to_string(),
            });
        }
        let refined = Image::load(&output)?;
        if !refined.same_size(image) {
            return Err(Error::Hook {
                command: self.describe(),
                status: format!(
                    "returned a {}x{} image for a {}x{} input",
                    refined.width, refined.height, image.width, image.height
                ),
            });
        }
        Ok(refined)
    }
}

/// One generated image per camera, in camera order, each passed through `hook` if given.
pub fn synthesize_back_views(
    g: &GeneratorParams,
    cams: &[Camera],
    hook: Option<&RefinementHook>,
) -> Result<Vec<(Image, Camera)>> {
    if cams.is_empty() {
        return Err(Error::invalid("no cameras to synthesize"));
    }
    cams.iter()
        .map(|cam| {
            let raw = generate(g, cam)?;
            let image = match hook {
                Some(h) => h.apply(&raw)?,
                None => raw,
            };
            Ok((image, *cam))
        })
        .collect()
}
