//! Optional TOML run configuration. Every key may be overridden by a flag.

use std::path::Path;

use lattice_entanglement::imaging::CalibrationParams;
use lattice_entanglement::units::{LatticeParams, DEFAULT_TOF_TIME, DEFAULT_WAVELENGTH, RB87_MASS};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub lattice: LatticeSection,
    #[serde(default)]
    pub calibration: CalibrationSection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub analyze: AnalyzeSection,
    #[serde(default)]
    pub reproduce: ReproduceSection,
    #[serde(default)]
    pub verify: VerifySection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    pub depth: Option<f64>,
    pub wavelength: Option<f64>,
    pub mass: Option<f64>,
    pub tof_time: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSection {
    pub alpha: Option<f64>,
    pub sigma_alpha: Option<f64>,
    pub cross_section: Option<f64>,
    pub pixel_size: Option<f64>,
    pub sigma_s_rel: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub sites: Option<usize>,
    pub atoms: Option<usize>,
    pub u_over_j: Option<f64>,
    pub temperature: Option<f64>,
    pub geometry: Option<String>,
    pub frames: Option<usize>,
    pub seed: Option<u64>,
    pub width: Option<usize>,
    pub subsamples: Option<usize>,
    pub noise: Option<f64>,
    pub mu0: Option<f64>,
    pub total_atoms: Option<f64>,
    pub format: Option<String>,
    pub approximation: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeSection {
    pub symmetry: Option<bool>,
    pub region: Option<Vec<[usize; 2]>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReproduceSection {
    pub sites: Option<usize>,
    pub atoms: Option<usize>,
    pub geometry: Option<String>,
    pub u_over_j: Option<Vec<f64>>,
    pub temperatures: Option<Vec<f64>>,
    pub thermal_u_over_j: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    pub trials: Option<usize>,
    pub channel_states: Option<usize>,
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::validation(format!("cannot read config {}: {e}", path.display()))
        })?;
        toml::from_str(&text)
            .map_err(|e| CliError::validation(format!("config {}: {e}", path.display())))
    }
}

/// Lattice flags shared by several commands.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct LatticeArgs {
    /// Lattice depth s in recoil energies.
    #[arg(long)]
    pub depth: Option<f64>,
    /// Lattice laser wavelength (m).
    #[arg(long)]
    pub wavelength: Option<f64>,
    /// Atomic mass (kg).
    #[arg(long)]
    pub mass: Option<f64>,
    /// Expansion time (s).
    #[arg(long)]
    pub tof_time: Option<f64>,
}

impl LatticeArgs {
    pub fn resolve(
        &self,
        section: &LatticeSection,
        default_depth: Option<f64>,
    ) -> Result<(LatticeParams, f64), CliError> {
        let depth = self
            .depth
            .or(section.depth)
            .or(default_depth)
            .ok_or_else(|| {
                CliError::validation("missing lattice depth (--depth or [lattice] depth)")
            })?;
        let lattice = LatticeParams::new(
            depth,
            self.wavelength
                .or(section.wavelength)
                .unwrap_or(DEFAULT_WAVELENGTH),
            self.mass.or(section.mass).unwrap_or(RB87_MASS),
        )?;
        let t = self
            .tof_time
            .or(section.tof_time)
            .unwrap_or(DEFAULT_TOF_TIME);
        if !(t.is_finite() && t > 0.0) {
            return Err(CliError::validation(
                "invalid argument `tof_time`: must be positive",
            ));
        }
        Ok((lattice, t))
    }
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct CalibrationArgs {
    /// Atoms per unit optical density per pixel.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub sigma_alpha: Option<f64>,
    /// Effective pixel size in the object plane (m).
    #[arg(long)]
    pub pixel_size: Option<f64>,
    /// Relative uncertainty of the lattice depth.
    #[arg(long)]
    pub sigma_s_rel: Option<f64>,
}

impl CalibrationArgs {
    pub fn resolve(&self, section: &CalibrationSection) -> Result<CalibrationParams, CliError> {
        let d = CalibrationParams::default();
        let c = CalibrationParams {
            alpha: self.alpha.or(section.alpha).unwrap_or(d.alpha),
            sigma_alpha: self
                .sigma_alpha
                .or(section.sigma_alpha)
                .unwrap_or(d.sigma_alpha),
            cross_section: section.cross_section.unwrap_or(d.cross_section),
            pixel_size: self
                .pixel_size
                .or(section.pixel_size)
                .unwrap_or(d.pixel_size),
            sigma_s_rel: self
                .sigma_s_rel
                .or(section.sigma_s_rel)
                .unwrap_or(d.sigma_s_rel),
        };
        c.validate()?;
        Ok(c)
    }
}
