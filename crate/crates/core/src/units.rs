//! Physical constants and lattice parameters.
//!
//! Everything downstream works in lattice units: lengths in the lattice
//! spacing `a`, wavenumbers in `1/a`, energies in the recoil energy. SI
//! values only appear when reading or writing physical quantities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Planck constant (J s).
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Reduced Planck constant (J s).
pub const HBAR: f64 = PLANCK / (2.0 * std::f64::consts::PI);
/// Atomic mass unit (kg).
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
/// Mass of a 87Rb atom (kg).
pub const RB87_MASS: f64 = 86.909_180_527 * ATOMIC_MASS_UNIT;
/// Lattice laser wavelength used by default (m).
pub const DEFAULT_WAVELENGTH: f64 = 830.3e-9;
/// Free-expansion time used by default (s).
pub const DEFAULT_TOF_TIME: f64 = 21e-3;
/// Largest supported lattice depth in recoil units.
pub const MAX_DEPTH: f64 = 60.0;

/// Sinusoidal optical lattice of depth `s` recoil energies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeParams {
    pub depth_s: f64,
    /// Laser wavelength (m).
    pub wavelength: f64,
    /// Lattice spacing, exactly half the wavelength (m).
    pub spacing_a: f64,
    /// Particle mass (kg).
    pub mass: f64,
    /// h^2 / (2 m lambda^2) (J).
    pub recoil_energy: f64,
}

impl LatticeParams {
    pub fn new(depth_s: f64, wavelength: f64, mass: f64) -> Result<Self> {
        if !depth_s.is_finite() || !(0.0..=MAX_DEPTH).contains(&depth_s) {
            return Err(Error::arg(
                "depth",
                format!("lattice depth {depth_s} outside supported range [0, {MAX_DEPTH}]"),
            ));
        }
        if !(wavelength.is_finite() && wavelength > 0.0) {
            return Err(Error::arg("wavelength", "must be positive"));
        }
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::arg("mass", "must be positive"));
        }
        Ok(Self {
            depth_s,
            wavelength,
            spacing_a: wavelength / 2.0,
            mass,
            recoil_energy: PLANCK * PLANCK / (2.0 * mass * wavelength * wavelength),
        })
    }

    /// 87Rb in an 830.3 nm lattice.
    pub fn rubidium(depth_s: f64) -> Result<Self> {
        Self::new(depth_s, DEFAULT_WAVELENGTH, RB87_MASS)
    }

    /// Same lattice at a different depth.
    pub fn with_depth(&self, depth_s: f64) -> Result<Self> {
        Self::new(depth_s, self.wavelength, self.mass)
    }

    /// Dimensionless expansion time 2 pi^2 hbar t / (m a^2).
    pub fn tau(&self, tof_time: f64) -> f64 {
        2.0 * std::f64::consts::PI.powi(2) * HBAR * tof_time
            / (self.mass * self.spacing_a * self.spacing_a)
    }

    /// Real-space position (m) reached after `tof_time` by wavenumber `k` (1/m).
    pub fn position_of_wavenumber(&self, k: f64, tof_time: f64) -> f64 {
        HBAR * tof_time * k / self.mass
    }

    /// Wavenumber (1/m) imaged at position `x` (m) after `tof_time`.
    pub fn wavenumber_at_position(&self, x: f64, tof_time: f64) -> f64 {
        self.mass * x / (HBAR * tof_time)
    }
}
