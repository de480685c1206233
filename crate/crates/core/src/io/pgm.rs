//! Binary PGM (P5) export of attribution maps, min-max scaled to 0..255
//! for quick visual inspection.

use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Write an H×W tensor as an 8-bit grayscale PGM. Constant maps render
/// black.
pub fn save_pgm(map: &Tensor, path: &Path) -> Result<()> {
    if map.ndim() != 2 {
        return Err(Error::ShapeMismatch {
            expected: vec![0, 0],
            got: map.shape().to_vec(),
        });
    }
    let (h, w) = (map.shape()[0], map.shape()[1]);
    let (min, max) = map.min_max();
    let span = max - min;
    let mut bytes = format!("P5\n{w} {h}\n255\n").into_bytes();
    for v in map.data() {
        let level = if span > 0.0 {
            ((v - min) / span * 255.0).round() as u8
        } else {
            0
        };
        bytes.push(level);
    }
    std::fs::write(path, bytes)?;
    Ok(())
}
