//! Rectangle ground truth and its rasterization to per-pixel masks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned label rectangle covering `[x, x+w) × [y, y+h)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    pub fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        Self { x, y, w, h }
    }

    pub fn contains(&self, px: usize, py: usize) -> bool {
        self.x <= px && px < self.x + self.w && self.y <= py && py < self.y + self.h
    }

    pub fn area(&self) -> usize {
        self.w * self.h
    }

    pub fn fits(&self, height: usize, width: usize) -> bool {
        self.w >= 1 && self.h >= 1 && self.x + self.w <= width && self.y + self.h <= height
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.x < other.x + other.w
            && other.x < self.x + self.w
            && self.y < other.y + other.h
            && other.y < self.y + self.h
    }
}

pub(crate) fn check_rects(rects: &[Rect], height: usize, width: usize) -> Result<()> {
    for (index, rect) in rects.iter().enumerate() {
        if !rect.fits(height, width) {
            return Err(Error::RectOutOfBounds {
                index,
                rect: *rect,
                height,
                width,
            });
        }
    }
    Ok(())
}

/// Boolean per-pixel target membership.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMask {
    height: usize,
    width: usize,
    positive: Vec<bool>,
}

impl LabelMask {
    pub fn new(height: usize, width: usize, positive: Vec<bool>) -> Result<Self> {
        if positive.len() != height * width {
            return Err(Error::InvalidArgument(format!(
                "mask length {} != {height}x{width}",
                positive.len()
            )));
        }
        Ok(Self {
            height,
            width,
            positive,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn positive(&self) -> &[bool] {
        &self.positive
    }

    pub fn get(&self, y: usize, x: usize) -> bool {
        self.positive[y * self.width + x]
    }

    pub fn positive_count(&self) -> usize {
        self.positive.iter().filter(|&&p| p).count()
    }

    pub fn prevalence(&self) -> f64 {
        self.positive_count() as f64 / self.positive.len() as f64
    }
}

/// Marks every pixel covered by at least one rectangle. Overlaps count once.
pub fn rasterize_labels(rects: &[Rect], height: usize, width: usize) -> Result<LabelMask> {
    check_rects(rects, height, width)?;
    let mut positive = vec![false; height * width];
    for r in rects {
        for y in r.y..r.y + r.h {
            positive[y * width + r.x..y * width + r.x + r.w].fill(true);
        }
    }
    Ok(LabelMask {
        height,
        width,
        positive,
    })
}
