//! Stack manifests, frame files and report output.
//!
//! A manifest is a TOML document:
//!
//! ```toml
//! pixel_size = 2.78e-6
//! alpha = 0.112
//! sigma_alpha = 0.009
//! depth_s = 9.0
//! sigma_s_rel = 0.1
//! wavelength = 830.3e-9
//! tof_time = 0.021
//! seed = 7
//! frames = ["frame_000.olif", "frame_001.csv"]
//! ```
//!
//! Frame files ending in `.csv` hold one image row per line. Any other frame
//! file is read as `OLIF`: the magic bytes, little-endian `u32` width, height
//! and a reserved word, then `f32` values row-major.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{BoundReport, CalibrationParams, ImageFrame, ImageStack};
use crate::bandstructure::write_file;
use crate::error::{Error, Result};
use crate::units::{LatticeParams, RB87_MASS};

fn default_mass() -> f64 {
    RB87_MASS
}

fn default_cross_section() -> f64 {
    CalibrationParams::default().cross_section
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub pixel_size: f64,
    pub alpha: f64,
    pub sigma_alpha: f64,
    #[serde(default = "default_cross_section")]
    pub cross_section: f64,
    pub depth_s: f64,
    pub sigma_s_rel: f64,
    pub wavelength: f64,
    #[serde(default = "default_mass")]
    pub mass: f64,
    pub tof_time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Detector position (m) of the frame centre relative to `k = 0`.
    #[serde(default)]
    pub center: [f64; 2],
    pub frames: Vec<String>,
}

impl Manifest {
    pub fn calibration(&self) -> CalibrationParams {
        CalibrationParams {
            alpha: self.alpha,
            sigma_alpha: self.sigma_alpha,
            cross_section: self.cross_section,
            pixel_size: self.pixel_size,
            sigma_s_rel: self.sigma_s_rel,
        }
    }

    pub fn lattice(&self) -> Result<LatticeParams> {
        LatticeParams::new(self.depth_s, self.wavelength, self.mass)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::format(path, e.to_string()))?;
        write_file(path, &text)
    }
}

pub fn read_csv_frame(path: &Path) -> Result<ImageFrame> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut mu = Vec::new();
    let mut width = None;
    let mut height = 0;
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::format(path, format!("line {}: {e}", lineno + 1)))?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::format(
                    path,
                    format!("line {} has {} values, expected {w}", lineno + 1, row.len()),
                ))
            }
            _ => {}
        }
        mu.extend(row);
        height += 1;
    }
    let width = width.ok_or_else(|| Error::format(path, "empty frame"))?;
    ImageFrame::new(width, height, mu).map_err(|e| Error::format(path, e.to_string()))
}

pub fn write_csv_frame(path: &Path, frame: &ImageFrame) -> Result<()> {
    let mut out = String::new();
    for row in frame.mu.chunks(frame.width) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.9e}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    write_file(path, &out)
}

pub fn read_olif_frame(path: &Path) -> Result<ImageFrame> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 16 || &bytes[..4] != b"OLIF" {
        return Err(Error::format(path, "missing OLIF header"));
    }
    let word = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes")) as usize;
    let (width, height) = (word(4), word(8));
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(16));
    if expected != Some(bytes.len()) {
        return Err(Error::format(
            path,
            format!(
                "payload of {} bytes does not match {width}x{height}",
                bytes.len() - 16
            ),
        ));
    }
    let mu = bytes[16..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    ImageFrame::new(width, height, mu).map_err(|e| Error::format(path, e.to_string()))
}

pub fn write_olif_frame(path: &Path, frame: &ImageFrame) -> Result<()> {
    crate::tof::write_olif(path, frame.width, frame.height, &frame.mu)
}

pub fn read_frame(path: &Path) -> Result<ImageFrame> {
    let is_csv = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        read_csv_frame(path)
    } else {
        read_olif_frame(path)
    }
}

/// Loads a manifest and every frame it names (relative to the manifest).
pub fn read_stack(manifest_path: &Path) -> Result<(Manifest, ImageStack)> {
    let manifest = Manifest::read(manifest_path)?;
    let dir = manifest_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    let frames = manifest
        .frames
        .iter()
        .map(|name| read_frame(&dir.join(name)))
        .collect::<Result<Vec<_>>>()?;
    let lattice = manifest
        .lattice()
        .map_err(|e| Error::format(manifest_path, e.to_string()))?;
    let stack = ImageStack::new(
        frames,
        manifest.center,
        lattice,
        manifest.tof_time,
        manifest.calibration(),
        manifest.seed,
    )
    .map_err(|e| Error::format(manifest_path, e.to_string()))?;
    Ok((manifest, stack))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameFormat {
    Csv,
    Olif,
}

/// Writes frames plus `manifest.toml` into `dir`; returns the manifest path.
pub fn write_stack(dir: &Path, stack: &ImageStack, format: FrameFormat) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut names = Vec::with_capacity(stack.frames.len());
    for (n, frame) in stack.frames.iter().enumerate() {
        let name = match format {
            FrameFormat::Csv => format!("frame_{n:03}.csv"),
            FrameFormat::Olif => format!("frame_{n:03}.olif"),
        };
        let path = dir.join(&name);
        match format {
            FrameFormat::Csv => write_csv_frame(&path, frame)?,
            FrameFormat::Olif => write_olif_frame(&path, frame)?,
        }
        names.push(name);
    }
    let c = stack.calibration;
    let manifest = Manifest {
        pixel_size: c.pixel_size,
        alpha: c.alpha,
        sigma_alpha: c.sigma_alpha,
        cross_section: c.cross_section,
        depth_s: stack.lattice.depth_s,
        sigma_s_rel: c.sigma_s_rel,
        wavelength: stack.lattice.wavelength,
        mass: stack.lattice.mass,
        tof_time: stack.tof_time,
        seed: stack.seed,
        center: stack.geometry.center,
        frames: names,
    };
    let path = dir.join("manifest.toml");
    manifest.write(&path)?;
    Ok(path)
}

#[derive(Serialize)]
struct ReportFile<'a> {
    e_bar_a: f64,
    n_bar: f64,
    sigma_stat: Option<f64>,
    sigma_stat_available: bool,
    sigma_sys: f64,
    sigma_disc: f64,
    sigma_total: f64,
    sigma_sys_alpha: f64,
    sigma_sys_mu0: f64,
    sigma_sys_envelope: f64,
    symmetry: bool,
    frames: usize,
    excluded_pixels: usize,
    region: &'a [(usize, usize)],
    mu0: &'a [f64],
    sigma_mu0: &'a [f64],
}

/// Report as TOML.
pub fn write_report(path: &Path, report: &BoundReport) -> Result<()> {
    let file = ReportFile {
        e_bar_a: report.e_bar_a,
        n_bar: report.n_bar,
        sigma_stat: report.sigma_stat,
        sigma_stat_available: report.sigma_stat.is_some(),
        sigma_sys: report.sigma_sys,
        sigma_disc: report.sigma_disc,
        sigma_total: report.sigma_total,
        sigma_sys_alpha: report.systematic.alpha,
        sigma_sys_mu0: report.systematic.mu0,
        sigma_sys_envelope: report.systematic.envelope,
        symmetry: report.symmetry,
        frames: report.frames,
        excluded_pixels: report.excluded_pixels,
        region: &report.region,
        mu0: &report.mu0,
        sigma_mu0: &report.sigma_mu0,
    };
    let text = toml::to_string(&file).map_err(|e| Error::format(path, e.to_string()))?;
    write_file(path, &text)
}

/// Per-pixel map as CSV `i, j, k_x, k_y, E_bar, sigma_total`; excluded pixels are skipped.
pub fn write_map_csv(path: &Path, report: &BoundReport) -> Result<()> {
    let map = report
        .per_pixel_map
        .as_ref()
        .ok_or_else(|| Error::arg("report", "no per-pixel map was computed"))?;
    let mut out = String::from("i,j,k_x,k_y,E_bar,sigma_total\n");
    for j in 0..map.height {
        for i in 0..map.width {
            let idx = j * map.width + i;
            if map.e_bar[idx].is_nan() {
                continue;
            }
            out.push_str(&format!(
                "{i},{j},{:.9e},{:.9e},{:.9e},{:.9e}\n",
                map.k[idx][0], map.k[idx][1], map.e_bar[idx], map.sigma_total[idx]
            ));
        }
    }
    write_file(path, &out)
}
