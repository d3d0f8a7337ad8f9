use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::radar::RadarImage;

/// Sliding per-pixel mean over the last `window` images followed by max
/// normalization to `[0, 1]`.
///
/// A window of 1 reduces to per-frame normalization.
#[derive(Debug, Clone)]
pub struct ERespd {
    window: usize,
    ring: VecDeque<RadarImage>,
}

impl ERespd {
    pub fn new(window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::Config("E-RESPD window must be >= 1".into()));
        }
        Ok(ERespd {
            window,
            ring: VecDeque::with_capacity(window),
        })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn len(&self) -> usize {
        self.ring.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ring.is_empty()
    }

    pub fn is_ready(&self) -> bool {
        self.ring.len() == self.window
    }

    /// Adds an image; returns the averaged image once `window` images are held.
    pub fn push(&mut self, image: RadarImage) -> Result<Option<RadarImage>> {
        if let Some(first) = self.ring.front() {
            if (first.kind, first.rows, first.cols) != (image.kind, image.rows, image.cols) {
                return Err(Error::shape(
                    "e_respd",
                    (first.kind, first.rows, first.cols),
                    (image.kind, image.rows, image.cols),
                ));
            }
        }
        if self.ring.len() == self.window {
            self.ring.pop_front();
        }
        self.ring.push_back(image);
        if !self.is_ready() {
            return Ok(None);
        }
        Ok(Some(averaged(self.ring.iter())))
    }
}

fn averaged<'a>(images: impl Iterator<Item = &'a RadarImage> + Clone) -> RadarImage {
    let template = images.clone().next().expect("non-empty window");
    let mut acc = vec![0.0f64; template.data.len()];
    for img in images {
        for (a, &v) in acc.iter_mut().zip(&img.data) {
            *a += v as f64;
        }
    }
    let peak = acc.iter().cloned().fold(0.0, f64::max);
    // The mean's 1/n cancels against the normalization.
    let scale = if peak > 0.0 { 1.0 / peak } else { 0.0 };
    RadarImage {
        data: acc.into_iter().map(|v| (v * scale) as f32).collect(),
        ..template.clone()
    }
}

/// Batch form: averages the last `window` images of `images`.
/// Returns `Ok(None)` when fewer than `window` images are available.
pub fn e_respd(images: &[RadarImage], window: usize) -> Result<Option<RadarImage>> {
    let mut op = ERespd::new(window)?;
    let start = images.len().saturating_sub(window);
    let mut out = None;
    for img in &images[start..] {
        out = op.push(img.clone())?;
    }
    Ok(out)
}
