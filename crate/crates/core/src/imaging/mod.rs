//! Absorption-image stacks: synthesis, background estimation and the
//! pixelized bound with its error budget.

mod analysis;
mod background;
pub mod io;
mod synth;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::UniformGrid;
use crate::units::LatticeParams;

pub use analysis::{
    analyze_stack, default_region, AnalysisOptions, Analyzer, BoundReport, PixelMap,
    SystematicParts, EXCLUSION_RATIO,
};
pub use background::{estimate_background, Background, MIN_FRAME_SIDE};
pub use synth::{pixel_aligned_grid, synthesize_frame, synthesize_frame_with, synthesize_stack};

/// Pixel index `(column i, row j)`.
pub type Pixel = (usize, usize);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationParams {
    /// Atoms per unit optical density per pixel.
    pub alpha: f64,
    pub sigma_alpha: f64,
    /// Resonant absorption cross-section (m^2).
    pub cross_section: f64,
    /// Effective pixel size in the object plane (m).
    pub pixel_size: f64,
    /// Relative uncertainty of the lattice depth.
    pub sigma_s_rel: f64,
}

impl Default for CalibrationParams {
    fn default() -> Self {
        Self {
            alpha: 0.112,
            sigma_alpha: 0.009,
            cross_section: 2.907e-13,
            pixel_size: 2.78e-6,
            sigma_s_rel: 0.10,
        }
    }
}

impl CalibrationParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("alpha", self.alpha),
            ("cross_section", self.cross_section),
            ("pixel_size", self.pixel_size),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::arg(name, "must be positive"));
            }
        }
        // zero uncertainties are allowed
        for (name, v) in [
            ("sigma_alpha", self.sigma_alpha),
            ("sigma_s_rel", self.sigma_s_rel),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::arg(name, "must be finite and >= 0"));
            }
        }
        Ok(())
    }
}

/// Optical-density frame, row-major with rows along `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageFrame {
    pub width: usize,
    pub height: usize,
    pub mu: Vec<f64>,
}

impl ImageFrame {
    pub fn new(width: usize, height: usize, mu: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || mu.len() != width * height {
            return Err(Error::arg("mu", "length must equal width * height"));
        }
        if mu.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("mu", "values must be finite"));
        }
        Ok(Self { width, height, mu })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            mu: vec![value; width * height],
        }
    }

    pub fn at(&self, p: Pixel) -> f64 {
        self.mu[p.1 * self.width + p.0]
    }

    pub fn index(&self, p: Pixel) -> usize {
        p.1 * self.width + p.0
    }
}

/// Pixel layout: centres at `((i - (W-1)/2) Δ + c_x, (j - (H-1)/2) Δ + c_y)`,
/// where `c` is the detector position of the frame centre relative to `k = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameGeometry {
    pub width: usize,
    pub height: usize,
    pub pixel_size: f64,
    pub center: [f64; 2],
}

impl FrameGeometry {
    pub fn new(width: usize, height: usize, pixel_size: f64) -> Self {
        Self {
            width,
            height,
            pixel_size,
            center: [0.0, 0.0],
        }
    }

    pub fn n_pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn pixel_center(&self, p: Pixel) -> [f64; 2] {
        [
            (p.0 as f64 - (self.width as f64 - 1.0) / 2.0) * self.pixel_size + self.center[0],
            (p.1 as f64 - (self.height as f64 - 1.0) / 2.0) * self.pixel_size + self.center[1],
        ]
    }

    /// Pixel containing position `r` (metres), if inside the frame.
    pub fn pixel_at(&self, r: [f64; 2]) -> Option<Pixel> {
        let fi = (r[0] - self.center[0]) / self.pixel_size + (self.width as f64 - 1.0) / 2.0;
        let fj = (r[1] - self.center[1]) / self.pixel_size + (self.height as f64 - 1.0) / 2.0;
        let (i, j) = (fi.round(), fj.round());
        if i < 0.0 || j < 0.0 || i >= self.width as f64 || j >= self.height as f64 {
            return None;
        }
        Some((i as usize, j as usize))
    }

    pub fn pixels(&self) -> impl Iterator<Item = Pixel> + '_ {
        (0..self.height).flat_map(move |j| (0..self.width).map(move |i| (i, j)))
    }

    /// Pixel-centre grids along x and y.
    pub fn center_grids(&self) -> (UniformGrid, UniformGrid) {
        let g = |n: usize, c: f64| UniformGrid {
            start: -(n as f64 - 1.0) / 2.0 * self.pixel_size + c,
            step: self.pixel_size,
            len: n,
        };
        (
            g(self.width, self.center[0]),
            g(self.height, self.center[1]),
        )
    }
}

/// Frames of equal geometry together with their physical metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageStack {
    pub frames: Vec<ImageFrame>,
    pub geometry: FrameGeometry,
    pub lattice: LatticeParams,
    pub tof_time: f64,
    pub calibration: CalibrationParams,
    pub seed: Option<u64>,
}

impl ImageStack {
    pub fn new(
        frames: Vec<ImageFrame>,
        center: [f64; 2],
        lattice: LatticeParams,
        tof_time: f64,
        calibration: CalibrationParams,
        seed: Option<u64>,
    ) -> Result<Self> {
        calibration.validate()?;
        if !(tof_time > 0.0 && tof_time.is_finite()) {
            return Err(Error::arg("tof_time", "must be positive"));
        }
        let first = frames
            .first()
            .ok_or_else(|| Error::arg("frames", "stack is empty"))?;
        if frames
            .iter()
            .any(|f| f.width != first.width || f.height != first.height)
        {
            return Err(Error::Geometry("frames differ in size".into()));
        }
        let geometry = FrameGeometry {
            width: first.width,
            height: first.height,
            pixel_size: calibration.pixel_size,
            center,
        };
        Ok(Self {
            frames,
            geometry,
            lattice,
            tof_time,
            calibration,
            seed,
        })
    }
}
