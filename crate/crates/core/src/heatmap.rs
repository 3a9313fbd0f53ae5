//! Grayscale PNG export of score maps.

use std::path::Path;

use image::{GrayImage, ImageBuffer};

use crate::error::{Error, Result};
use crate::tensor::ScoreMap;

/// Maps scores to 8-bit intensities.
///
/// Without a threshold the map is min-max stretched to 0..255 (a constant map
/// becomes all zeros). With a threshold, pixels scoring at or above it are 255
/// and the rest 0.
pub fn heatmap_pixels(scores: &ScoreMap, threshold: Option<f64>) -> Vec<u8> {
    match threshold {
        Some(t) => scores.scores().iter().map(|&s| if s >= t { 255 } else { 0 }).collect(),
        None => {
            let (lo, hi) = (scores.min(), scores.max());
            let span = hi - lo;
            scores
                .scores()
                .iter()
                .map(|&s| {
                    if span > 0.0 {
                        ((s - lo) / span * 255.0).round() as u8
                    } else {
                        0
                    }
                })
                .collect()
        }
    }
}

pub fn export_heatmap(scores: &ScoreMap, path: impl AsRef<Path>, threshold: Option<f64>) -> Result<()> {
    let path = path.as_ref();
    let pixels = heatmap_pixels(scores, threshold);
    let img: GrayImage = ImageBuffer::from_raw(scores.width() as u32, scores.height() as u32, pixels)
        .expect("buffer matches score dimensions");
    img.save(path).map_err(|e| Error::Raster {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}
