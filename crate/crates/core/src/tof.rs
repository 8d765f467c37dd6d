//! Free expansion of lattice orbitals and the resulting column density.
//!
//! Detector coordinates inside this module are measured in lattice spacings
//! (`x / a`); [`DensityField`] carries SI positions and atoms per square metre.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bandstructure::{write_file, WannierTable};
use crate::error::{Error, Result};
use crate::numerics::{pairwise_sum, UniformGrid};
use crate::states::OneBodyDM;
use crate::units::LatticeParams;

/// Smallest `tau` accepted by the stationary-phase form.
pub const STATIONARY_MIN_TAU: f64 = 10.0;
/// Relative change allowed when the real-space quadrature is halved.
pub const REFINEMENT_TOL: f64 = 1e-6;
/// Allowed mismatch between the integrated field and `tr G`.
pub const COVERAGE_TOL: f64 = 1e-3;
/// Default detector half-width in units of `a k / 2 pi`.
pub const DEFAULT_HALF_WIDTH_PHI: f64 = 3.5;
pub const DEFAULT_GRID_POINTS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Approximation {
    Exact,
    StationaryPhase,
    FarField,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TofParams {
    /// Expansion time in seconds, when derived from physical parameters.
    pub time: Option<f64>,
    pub tau: f64,
    pub spacing_a: f64,
    pub approximation: Approximation,
}

impl TofParams {
    pub fn new(lattice: &LatticeParams, time: f64, approximation: Approximation) -> Result<Self> {
        if !(time > 0.0 && time.is_finite()) {
            return Err(Error::arg("time", "must be positive"));
        }
        Ok(Self {
            time: Some(time),
            tau: lattice.tau(time),
            spacing_a: lattice.spacing_a,
            approximation,
        })
    }

    /// Dimensionless expansion parameter without an associated time.
    pub fn with_tau(tau: f64, spacing_a: f64, approximation: Approximation) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::arg("tau", "must be positive"));
        }
        if !(spacing_a > 0.0) {
            return Err(Error::arg("spacing_a", "must be positive"));
        }
        Ok(Self {
            time: None,
            tau,
            spacing_a,
            approximation,
        })
    }

    pub fn with_approximation(mut self, approximation: Approximation) -> Self {
        self.approximation = approximation;
        self
    }

    /// Detector position (units of `a`) of lattice wavevector `k` (units `1/a`).
    pub fn position_of_k(&self, k: f64) -> f64 {
        self.tau * k / (2.0 * PI * PI)
    }

    pub fn k_of_position(&self, x: f64) -> f64 {
        2.0 * PI * PI * x / self.tau
    }

    /// Symmetric detector grid in metres spanning `|a k / 2 pi| <= half_width_phi`.
    pub fn detector_grid(&self, half_width_phi: f64, points: usize) -> UniformGrid {
        let half = self.position_of_k(2.0 * PI * half_width_phi) * self.spacing_a;
        UniformGrid::symmetric(half, points)
    }
}

/// Expanded 1D Wannier amplitude `g_i(x)` for one orbital.
///
/// Evaluated as the real-space Fresnel integral
/// `sqrt(pi/(i tau)) e^{i pi^2 (x-i)^2/tau} int dx' w0(x') e^{i pi^2 x'^2/tau} e^{-i 2 pi^2 (x-i) x'/tau}`,
/// which is exact for free evolution; the trapezoid rule on the stored
/// Wannier grid is checked against the same rule with every other node.
pub fn g_exact(wannier: &WannierTable, site_index: i32, x: f64, tau: f64) -> Result<Complex64> {
    ExactPropagator::new(wannier, tau)?.eval(site_index, x)
}

/// Stationary-phase amplitude `(1-i) (pi/sqrt(tau)) w~(pi (x-i)/tau) e^{i pi^2 (x-i)^2/tau}`.
pub fn g_stationary(
    wannier: &WannierTable,
    site_index: i32,
    x: f64,
    tau: f64,
) -> Result<Complex64> {
    if tau < STATIONARY_MIN_TAU {
        return Err(Error::Range(format!(
            "stationary phase needs tau >= {STATIONARY_MIN_TAU}, got {tau}"
        )));
    }
    let d = x - site_index as f64;
    let w = wannier.wtilde_at(PI * d / tau)?;
    Ok(stationary_prefactor(tau) * w * Complex64::from_polar(1.0, PI * PI * d * d / tau))
}

/// Far-field amplitude: the stationary-phase form with `w~` evaluated at
/// `pi x / tau`, dropping the site-dependent shift of its argument.
pub fn g_far_field(wannier: &WannierTable, site_index: i32, x: f64, tau: f64) -> Result<Complex64> {
    if tau < STATIONARY_MIN_TAU {
        return Err(Error::Range(format!(
            "far-field form needs tau >= {STATIONARY_MIN_TAU}, got {tau}"
        )));
    }
    let d = x - site_index as f64;
    let w = wannier.wtilde_at(PI * x / tau)?;
    Ok(stationary_prefactor(tau) * w * Complex64::from_polar(1.0, PI * PI * d * d / tau))
}

fn stationary_prefactor(tau: f64) -> Complex64 {
    Complex64::new(1.0, -1.0) * (PI / tau.sqrt())
}

/// `g_i(x)` in the chosen approximation.
pub fn g_amplitude(
    wannier: &WannierTable,
    site_index: i32,
    x: f64,
    params: &TofParams,
) -> Result<Complex64> {
    match params.approximation {
        Approximation::Exact => g_exact(wannier, site_index, x, params.tau),
        Approximation::StationaryPhase => g_stationary(wannier, site_index, x, params.tau),
        Approximation::FarField => g_far_field(wannier, site_index, x, params.tau),
    }
}

/// Precomputed chirped Wannier samples for repeated exact evaluations.
struct ExactPropagator<'a> {
    wannier: &'a WannierTable,
    tau: f64,
    chirped: Vec<Complex64>,
    scale: f64,
}

impl<'a> ExactPropagator<'a> {
    fn new(wannier: &'a WannierTable, tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::arg("tau", "must be positive"));
        }
        if wannier.real_grid.len.is_multiple_of(2) {
            return Err(Error::Accuracy(
                "refinement check needs an odd number of real-space nodes".into(),
            ));
        }
        let chirped = wannier
            .real_grid
            .values()
            .iter()
            .zip(&wannier.w0_samples)
            .map(|(&x, &w)| w * Complex64::from_polar(1.0, PI * PI * x * x / tau))
            .collect();
        // Peak of |g| in the stationary-phase limit, used to judge the refinement.
        let scale = PI * 2f64.sqrt() / tau.sqrt() * wannier.max_abs_wtilde();
        Ok(Self {
            wannier,
            tau,
            chirped,
            scale,
        })
    }

    fn eval(&self, site_index: i32, x: f64) -> Result<Complex64> {
        let d = x - site_index as f64;
        let beta = 2.0 * PI * PI * d / self.tau;
        let grid = &self.wannier.real_grid;
        let n = grid.len;
        let start = Complex64::from_polar(1.0, -beta * grid.start);
        let step = Complex64::from_polar(1.0, -beta * grid.step);
        let mut phase = start;
        let (mut fine, mut coarse) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        for (m, h) in self.chirped.iter().enumerate() {
            let term = h * phase;
            let edge = if m == 0 || m == n - 1 { 0.5 } else { 1.0 };
            fine += term * edge;
            if m % 2 == 0 {
                coarse += term * edge;
            }
            phase *= step;
            if m % 64 == 63 {
                // re-anchor the recurrence against drift
                phase = Complex64::from_polar(1.0, -beta * grid.value(m + 1));
            }
        }
        fine *= grid.step;
        coarse *= 2.0 * grid.step;
        let pref = (PI / self.tau).sqrt()
            * Complex64::from_polar(1.0, -PI / 4.0 + PI * PI * d * d / self.tau);
        let (fine, coarse) = (pref * fine, pref * coarse);
        if (fine - coarse).norm() > REFINEMENT_TOL * fine.norm().max(self.scale) {
            return Err(Error::Accuracy(format!(
                "time-of-flight quadrature unresolved at x={x:.3}a (change {:.2e})",
                (fine - coarse).norm()
            )));
        }
        Ok(fine)
    }
}

/// Amplitudes of every needed orbital coordinate on a 1D detector grid
/// (positions in units of `a`).
fn amplitude_table(
    wannier: &WannierTable,
    coordinates: &[i32],
    xs: &[f64],
    params: &TofParams,
) -> Result<BTreeMap<i32, Vec<Complex64>>> {
    let exact = match params.approximation {
        Approximation::Exact => Some(ExactPropagator::new(wannier, params.tau)?),
        _ => None,
    };
    let mut table = BTreeMap::new();
    for &c in coordinates {
        if table.contains_key(&c) {
            continue;
        }
        let row = xs
            .iter()
            .map(|&x| match &exact {
                Some(p) => p.eval(c, x),
                None => g_amplitude(wannier, c, x, params),
            })
            .collect::<Result<Vec<_>>>()?;
        table.insert(c, row);
    }
    Ok(table)
}

/// Column density on a rectangular grid; row-major with rows along `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    pub x_grid: UniformGrid,
    pub y_grid: UniformGrid,
    /// Atoms per square metre.
    pub values: Vec<f64>,
}

impl DensityField {
    pub fn zeros(x_grid: UniformGrid, y_grid: UniformGrid) -> Self {
        Self {
            x_grid,
            y_grid,
            values: vec![0.0; x_grid.len * y_grid.len],
        }
    }

    pub fn width(&self) -> usize {
        self.x_grid.len
    }

    pub fn height(&self) -> usize {
        self.y_grid.len
    }

    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.width() + ix]
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Two-dimensional trapezoid integral (atoms).
    pub fn integral(&self) -> f64 {
        let rows: Vec<f64> = (0..self.height())
            .map(|iy| {
                self.x_grid
                    .trapezoid(&self.values[iy * self.width()..(iy + 1) * self.width()])
            })
            .collect();
        self.y_grid.trapezoid(&rows)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }

    /// `sum |a - b| dA`.
    pub fn l1_distance(&self, other: &DensityField) -> Result<f64> {
        if self.x_grid != other.x_grid || self.y_grid != other.y_grid {
            return Err(Error::Geometry("fields on different grids".into()));
        }
        let diff = DensityField {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| (a - b).abs())
                .collect(),
            ..self.clone()
        };
        Ok(diff.integral())
    }

    /// CSV with columns `x, y, n` (metres, atoms per square metre).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("x,y,n\n");
        for iy in 0..self.height() {
            for ix in 0..self.width() {
                out.push_str(&format!(
                    "{:.9e},{:.9e},{:.12e}\n",
                    self.x_grid.value(ix),
                    self.y_grid.value(iy),
                    self.at(ix, iy)
                ));
            }
        }
        write_file(path, &out)
    }

    /// Frame payload format: `OLIF`, u32 width, u32 height, u32 reserved,
    /// then little-endian f32 values row-major.
    pub fn write_olif(&self, path: &Path) -> Result<()> {
        write_olif(path, self.width(), self.height(), &self.values)
    }
}

pub(crate) fn write_olif(path: &Path, width: usize, height: usize, values: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(16 + 4 * values.len());
    buf.extend_from_slice(b"OLIF");
    buf.extend_from_slice(&(width as u32).to_le_bytes());
    buf.extend_from_slice(&(height as u32).to_le_bytes());
    buf.extend_from_slice(&0u32.to_le_bytes());
    for v in values {
        buf.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

/// Column density `sum_{i_z = j_z} g_i^* g_j G_ij` with `g_i(x, y) = g_{i_x}(x) g_{i_y}(y)`,
/// on SI grids (metres). The integral must match `tr G` to [`COVERAGE_TOL`].
pub fn column_density(
    g: &OneBodyDM,
    wannier: &WannierTable,
    x_grid: UniformGrid,
    y_grid: UniformGrid,
    params: &TofParams,
) -> Result<DensityField> {
    let field = column_density_unchecked(g, wannier, x_grid, y_grid, params)?;
    let n = g.n_total();
    if n > 0.0 {
        let deficit = 1.0 - field.integral() / n;
        if deficit.abs() > COVERAGE_TOL {
            return Err(Error::Coverage(deficit));
        }
    }
    Ok(field)
}

/// [`column_density`] without the coverage check, for grids that resolve
/// only part of the cloud (such as camera frames).
pub fn column_density_unchecked(
    g: &OneBodyDM,
    wannier: &WannierTable,
    x_grid: UniformGrid,
    y_grid: UniformGrid,
    params: &TofParams,
) -> Result<DensityField> {
    let a = params.spacing_a;
    let xs: Vec<f64> = x_grid.values().iter().map(|x| x / a).collect();
    let ys: Vec<f64> = y_grid.values().iter().map(|y| y / a).collect();
    let pos = &g.site_positions;
    let gx = amplitude_table(
        wannier,
        &pos.iter().map(|p| p[0]).collect::<Vec<_>>(),
        &xs,
        params,
    )?;
    let gy = amplitude_table(
        wannier,
        &pos.iter().map(|p| p[1]).collect::<Vec<_>>(),
        &ys,
        params,
    )?;

    let pairs: Vec<(usize, usize, Complex64)> = (0..pos.len())
        .flat_map(|i| (0..pos.len()).map(move |j| (i, j)))
        .filter(|&(i, j)| pos[i][2] == pos[j][2] && g.matrix[(i, j)].norm() > 0.0)
        .map(|(i, j)| (i, j, g.matrix[(i, j)]))
        .collect();

    let mut field = DensityField::zeros(x_grid, y_grid);
    let width = xs.len();
    let mut terms = Vec::with_capacity(pairs.len());
    for (iy, row) in field.values.chunks_mut(width).enumerate() {
        for (ix, v) in row.iter_mut().enumerate() {
            terms.clear();
            for &(i, j, gij) in &pairs {
                let ai = gx[&pos[i][0]][ix] * gy[&pos[i][1]][iy];
                let aj = gx[&pos[j][0]][ix] * gy[&pos[j][1]][iy];
                terms.push((ai.conj() * aj * gij).re);
            }
            *v = pairwise_sum(&terms) / (a * a);
        }
    }
    Ok(field)
}
