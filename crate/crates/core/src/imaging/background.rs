use super::ImageFrame;
use crate::error::{Error, Result};
use crate::numerics::pairwise_sum;

pub const MIN_FRAME_SIDE: usize = 7;

/// Offset `mu0` and its spread over the selected ring.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Background {
    pub mu0: f64,
    pub sigma_mu0: f64,
    /// Ring index counted from the border (0 = outermost).
    pub ring: usize,
}

fn ring_values(frame: &ImageFrame, r: usize) -> Vec<f64> {
    let (w, h) = (frame.width, frame.height);
    let (x0, y0, x1, y1) = (r, r, w - 1 - r, h - 1 - r);
    let mut out = Vec::with_capacity(2 * (x1 - x0 + y1 - y0) + 1);
    for x in x0..=x1 {
        out.push(frame.at((x, y0)));
        if y1 != y0 {
            out.push(frame.at((x, y1)));
        }
    }
    for y in y0 + 1..y1 {
        out.push(frame.at((x0, y)));
        if x1 != x0 {
            out.push(frame.at((x1, y)));
        }
    }
    out
}

/// Scans concentric one-pixel square rings from the border inward and
/// takes the lowest ring mean; ties keep the outer ring.
pub fn estimate_background(frame: &ImageFrame) -> Result<Background> {
    if frame.width < MIN_FRAME_SIDE || frame.height < MIN_FRAME_SIDE {
        return Err(Error::arg(
            "frame",
            format!("background needs at least {MIN_FRAME_SIDE}x{MIN_FRAME_SIDE} pixels"),
        ));
    }
    let n_rings = frame.width.min(frame.height).div_ceil(2);
    let mut best: Option<(usize, f64, Vec<f64>)> = None;
    for r in 0..n_rings {
        let values = ring_values(frame, r);
        let mean = pairwise_sum(&values) / values.len() as f64;
        // rounding-level differences count as ties, which keep the outer ring
        if best
            .as_ref()
            .is_none_or(|(_, m, _)| mean < *m - 1e-12 * m.abs().max(mean.abs()))
        {
            best = Some((r, mean, values));
        }
    }
    let (ring, mu0, values) = best.expect("at least one ring");
    let sq: Vec<f64> = values.iter().map(|v| (v - mu0).powi(2)).collect();
    Ok(Background {
        mu0,
        sigma_mu0: (pairwise_sum(&sq) / values.len() as f64).sqrt(),
        ring,
    })
}
