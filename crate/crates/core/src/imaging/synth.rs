use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{CalibrationParams, FrameGeometry, ImageFrame};
use crate::error::{Error, Result};
use crate::numerics::{pairwise_sum, UniformGrid};
use crate::tof::DensityField;

/// Grid with `sub` midpoint samples per pixel along one axis of `n` pixels
/// of size `delta`, frame centre at `center`.
pub fn pixel_aligned_grid(n: usize, delta: f64, sub: usize, center: f64) -> UniformGrid {
    let step = delta / sub as f64;
    let len = n * sub;
    UniformGrid {
        start: center - (len as f64 - 1.0) / 2.0 * step,
        step,
        len,
    }
}

fn subsamples(grid: &UniformGrid, n: usize, delta: f64, center: f64) -> Result<usize> {
    let sub = (delta / grid.step).round();
    let aligned = sub >= 1.0
        && (sub * grid.step - delta).abs() <= 1e-9 * delta
        && grid.len == n * sub as usize
        && (pixel_aligned_grid(n, delta, sub as usize, center).start - grid.start).abs()
            <= 1e-9 * delta;
    if !aligned {
        return Err(Error::Geometry(format!(
            "field grid (start {:.4e}, step {:.4e}, {} points) is not a pixel-aligned subdivision of {n} pixels of {delta:.4e} m",
            grid.start, grid.step, grid.len
        )));
    }
    Ok(sub as usize)
}

/// Atoms per pixel by the midpoint rule over the field's sub-samples.
fn pixel_atoms(field: &DensityField, geometry: &FrameGeometry) -> Result<Vec<f64>> {
    let d = geometry.pixel_size;
    let qx = subsamples(&field.x_grid, geometry.width, d, geometry.center[0])?;
    let qy = subsamples(&field.y_grid, geometry.height, d, geometry.center[1])?;
    let cell = field.x_grid.step * field.y_grid.step;
    let mut out = Vec::with_capacity(geometry.n_pixels());
    let mut block = Vec::with_capacity(qx * qy);
    for j in 0..geometry.height {
        for i in 0..geometry.width {
            block.clear();
            for sy in 0..qy {
                let row = (j * qy + sy) * field.width();
                block.extend_from_slice(&field.values[row + i * qx..row + (i + 1) * qx]);
            }
            out.push(pairwise_sum(&block) * cell);
        }
    }
    Ok(out)
}

/// `mu = atoms / alpha + mu0 + noise`, with Gaussian noise of width `noise_sigma`.
pub fn synthesize_frame(
    field: &DensityField,
    geometry: &FrameGeometry,
    calib: &CalibrationParams,
    mu0_true: f64,
    noise_sigma: f64,
    seed: u64,
) -> Result<ImageFrame> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    synthesize_frame_with(field, geometry, calib, mu0_true, noise_sigma, &mut rng)
}

pub fn synthesize_frame_with<R: Rng + ?Sized>(
    field: &DensityField,
    geometry: &FrameGeometry,
    calib: &CalibrationParams,
    mu0_true: f64,
    noise_sigma: f64,
    rng: &mut R,
) -> Result<ImageFrame> {
    let atoms = pixel_atoms(field, geometry)?;
    frame_from_atoms(&atoms, geometry, calib, mu0_true, noise_sigma, rng)
}

fn frame_from_atoms<R: Rng + ?Sized>(
    atoms: &[f64],
    geometry: &FrameGeometry,
    calib: &CalibrationParams,
    mu0_true: f64,
    noise_sigma: f64,
    rng: &mut R,
) -> Result<ImageFrame> {
    calib.validate()?;
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::arg("noise_sigma", "must be finite and >= 0"));
    }
    let noise =
        Normal::new(0.0, noise_sigma).map_err(|e| Error::arg("noise_sigma", e.to_string()))?;
    let mu = atoms
        .iter()
        .map(|n| {
            let eps = if noise_sigma > 0.0 {
                noise.sample(rng)
            } else {
                0.0
            };
            n / calib.alpha + mu0_true + eps
        })
        .collect();
    ImageFrame::new(geometry.width, geometry.height, mu)
}

/// `count` frames drawn from one seeded stream.
pub fn synthesize_stack(
    field: &DensityField,
    geometry: &FrameGeometry,
    calib: &CalibrationParams,
    mu0_true: f64,
    noise_sigma: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<ImageFrame>> {
    let atoms = pixel_atoms(field, geometry)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| frame_from_atoms(&atoms, geometry, calib, mu0_true, noise_sigma, &mut rng))
        .collect()
}
