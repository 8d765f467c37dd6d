//! Single-particle band structure of the sinusoidal lattice, the
//! lowest-band Wannier function and the time-of-flight envelope `f(k)`.
//!
//! Lengths are in units of the lattice spacing `a`, wavenumbers in `1/a`
//! and energies in recoil units. In these units the reciprocal lattice
//! vector is `2 pi` and the first Brillouin zone is `[-pi, pi]`.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{interpolate, UniformGrid};
use crate::units::LatticeParams;

pub const DEFAULT_PLANE_WAVES: usize = 41;
pub const DEFAULT_QUASIMOMENTA: usize = 128;
/// Half-width (in units of `a`) of the real-space Wannier grid.
pub const DEFAULT_REAL_HALF_EXTENT: f64 = 8.0;
/// Real-space samples per lattice spacing.
pub const DEFAULT_RESOLUTION: usize = 64;
/// The Fourier table covers `|a k / 2 pi| <= FOURIER_HALF_EXTENT`.
pub const FOURIER_HALF_EXTENT: f64 = 4.0;
pub const FOURIER_SAMPLES_PER_UNIT: usize = 512;
/// Relative floor on `|w~|` below which the envelope is considered degenerate.
pub const ENVELOPE_FLOOR: f64 = 1e-12;

/// Bloch bands on a quasimomentum grid.
#[derive(Debug, Clone)]
pub struct BlochSpectrum {
    pub params: LatticeParams,
    /// Quasimomenta `q` in units of `1/a`, symmetric midpoint grid in `(-pi, pi)`.
    pub quasimomenta: Vec<f64>,
    /// `band_energies[iq][band]` in recoil units, ascending in `band`.
    pub band_energies: Vec<Vec<f64>>,
    /// `bloch_coefficients[iq]` is `n_planewaves x n_bands`; column `b` holds
    /// the plane-wave amplitudes of band `b`, plane wave `p` sits in row `p + P`.
    pub bloch_coefficients: Vec<DMatrix<f64>>,
    pub n_planewaves: usize,
}

impl BlochSpectrum {
    pub fn n_bands(&self) -> usize {
        self.band_energies.first().map_or(0, Vec::len)
    }

    /// Band energies as CSV: `q, E_0, E_1, ...`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("q");
        for b in 0..self.n_bands() {
            out.push_str(&format!(",E{b}"));
        }
        out.push('\n');
        for (q, energies) in self.quasimomenta.iter().zip(&self.band_energies) {
            out.push_str(&format!("{q:.12e}"));
            for e in energies {
                out.push_str(&format!(",{e:.12e}"));
            }
            out.push('\n');
        }
        write_file(path, &out)
    }
}

/// Plane-wave Hamiltonian at quasimomentum `q` (units `1/a`): kinetic terms
/// `(2p + q/pi)^2` on the diagonal and `-s/4` between neighbouring plane waves.
pub fn bloch_hamiltonian(depth_s: f64, q: f64, n_planewaves: usize) -> DMatrix<f64> {
    let half = (n_planewaves / 2) as i64;
    let qt = q / PI;
    DMatrix::from_fn(n_planewaves, n_planewaves, |r, c| {
        if r == c {
            let p = r as i64 - half;
            (2.0 * p as f64 + qt).powi(2)
        } else if r.abs_diff(c) == 1 {
            -depth_s / 4.0
        } else {
            0.0
        }
    })
}

/// Sorted eigenpairs of the Bloch Hamiltonian at a single quasimomentum.
///
/// The lowest band is sign-fixed so that its value at the site centre
/// (`sum_p c_p`) is positive; other bands get their largest component positive.
pub fn solve_at(depth_s: f64, q: f64, n_planewaves: usize) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let h = bloch_hamiltonian(depth_s, q, n_planewaves);
    let eig = SymmetricEigen::new(h);
    if eig.eigenvalues.iter().any(|e| !e.is_finite()) {
        return Err(Error::Numerical(format!(
            "Bloch eigensolve failed at s={depth_s}, q={q}"
        )));
    }
    let mut order: Vec<usize> = (0..n_planewaves).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let energies = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n_planewaves, n_planewaves);
    for (b, &i) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(i).into_owned();
        let sign = if b == 0 {
            col.sum()
        } else {
            let imax = col.iamax();
            col[imax]
        };
        if sign < 0.0 {
            col.neg_mut();
        }
        vectors.set_column(b, &col);
    }
    Ok((energies, vectors))
}

pub fn solve_band_structure(
    params: &LatticeParams,
    n_bands: usize,
    n_q: usize,
    n_planewaves: usize,
) -> Result<BlochSpectrum> {
    if n_bands == 0 {
        return Err(Error::arg("n_bands", "need at least one band"));
    }
    if n_planewaves.is_multiple_of(2) || n_planewaves < 2 * n_bands + 5 {
        return Err(Error::arg(
            "n_planewaves",
            format!("must be odd and >= 2*n_bands+5 = {}", 2 * n_bands + 5),
        ));
    }
    if n_q < 2 {
        return Err(Error::arg("n_q", "need at least two quasimomenta"));
    }
    let quasimomenta: Vec<f64> = (0..n_q)
        .map(|j| PI * (-1.0 + (2 * j + 1) as f64 / n_q as f64))
        .collect();
    let mut band_energies = Vec::with_capacity(n_q);
    let mut bloch_coefficients = Vec::with_capacity(n_q);
    for &q in &quasimomenta {
        let (e, v) = solve_at(params.depth_s, q, n_planewaves)?;
        band_energies.push(e[..n_bands].to_vec());
        bloch_coefficients.push(v.columns(0, n_bands).into_owned());
    }
    Ok(BlochSpectrum {
        params: *params,
        quasimomenta,
        band_energies,
        bloch_coefficients,
        n_planewaves,
    })
}

/// Lowest-band Wannier function on a real grid together with its Fourier
/// transform `w~(phi) = (2 pi)^(-1/2) * integral dr w0(r) exp(-2 pi i phi r)`.
#[derive(Debug, Clone)]
pub struct WannierTable {
    pub depth_s: f64,
    pub real_grid: UniformGrid,
    pub w0_samples: Vec<f64>,
    pub fourier_grid: UniformGrid,
    pub wtilde_samples: Vec<Complex64>,
    max_abs_wtilde: f64,
}

pub fn compute_wannier(
    spectrum: &BlochSpectrum,
    real_half_extent: f64,
    resolution: usize,
) -> Result<WannierTable> {
    if spectrum.n_bands() == 0 {
        return Err(Error::arg("spectrum", "no bands"));
    }
    if real_half_extent < 3.0 {
        return Err(Error::arg(
            "real_extent",
            "must span at least 6 lattice spacings",
        ));
    }
    // Highest plane wave has |k| <= pi * n_planewaves; the trapezoid rule is
    // exact for it only below the Nyquist limit.
    if resolution <= spectrum.n_planewaves {
        return Err(Error::Accuracy(format!(
            "resolution {resolution} samples/a aliases {} plane waves",
            spectrum.n_planewaves
        )));
    }
    let n_points = (2.0 * real_half_extent * resolution as f64).round() as usize + 1;
    let real_grid = UniformGrid::symmetric(real_half_extent, n_points);
    let xs = real_grid.values();
    let half = (spectrum.n_planewaves / 2) as i64;
    let n_q = spectrum.quasimomenta.len() as f64;

    let mut w0 = vec![0.0; xs.len()];
    for (w, &x) in w0.iter_mut().zip(&xs) {
        // e^{2 pi i p x} for p = -P..P by recurrence.
        let step = Complex64::from_polar(1.0, 2.0 * PI * x);
        let mut harmonics = Vec::with_capacity(spectrum.n_planewaves);
        let mut z = Complex64::from_polar(1.0, -2.0 * PI * x * half as f64);
        for _ in 0..spectrum.n_planewaves {
            harmonics.push(z);
            z *= step;
        }
        let mut acc = 0.0;
        for (&q, coeffs) in spectrum
            .quasimomenta
            .iter()
            .zip(&spectrum.bloch_coefficients)
        {
            let bloch: Complex64 = coeffs
                .column(0)
                .iter()
                .zip(&harmonics)
                .map(|(&c, &h)| h * c)
                .sum();
            acc += (Complex64::from_polar(1.0, q * x) * bloch).re;
        }
        *w = acc / n_q;
    }

    let norm: f64 = real_grid.trapezoid(&w0.iter().map(|w| w * w).collect::<Vec<_>>());
    if (1.0 - norm).abs() > 1e-6 {
        return Err(Error::Accuracy(format!(
            "Wannier normalization deficit {:.3e} on |x| <= {real_half_extent}a",
            1.0 - norm
        )));
    }
    let scale = norm.sqrt().recip();
    w0.iter_mut().for_each(|w| *w *= scale);

    let n_fourier = (2.0 * FOURIER_HALF_EXTENT * FOURIER_SAMPLES_PER_UNIT as f64) as usize + 1;
    let fourier_grid = UniformGrid::symmetric(FOURIER_HALF_EXTENT, n_fourier);
    let wtilde_samples: Vec<Complex64> = fourier_grid
        .values()
        .iter()
        .map(|&phi| fourier_transform(&real_grid, &xs, &w0, phi))
        .collect();
    let max_abs_wtilde = wtilde_samples.iter().map(|w| w.norm()).fold(0.0, f64::max);

    Ok(WannierTable {
        depth_s: spectrum.params.depth_s,
        real_grid,
        w0_samples: w0,
        fourier_grid,
        wtilde_samples,
        max_abs_wtilde,
    })
}

/// Band structure plus Wannier function with the default numerical settings.
pub fn wannier_for(params: &LatticeParams) -> Result<WannierTable> {
    let spectrum = solve_band_structure(params, 1, DEFAULT_QUASIMOMENTA, DEFAULT_PLANE_WAVES)?;
    compute_wannier(&spectrum, DEFAULT_REAL_HALF_EXTENT, DEFAULT_RESOLUTION)
}

fn fourier_transform(grid: &UniformGrid, xs: &[f64], w0: &[f64], phi: f64) -> Complex64 {
    let n = xs.len();
    let mut re = 0.0;
    let mut im = 0.0;
    for (i, (&x, &w)) in xs.iter().zip(w0).enumerate() {
        let weight = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        let (s, c) = (2.0 * PI * phi * x).sin_cos();
        re += weight * w * c;
        im -= weight * w * s;
    }
    Complex64::new(re, im) * (grid.step / (2.0 * PI).sqrt())
}

impl WannierTable {
    pub fn w0_at(&self, x: f64) -> f64 {
        interpolate(&self.real_grid, &self.w0_samples, x).unwrap_or(0.0)
    }

    /// Linearly interpolated `w~(phi)`; outside the table is a range error.
    pub fn wtilde_at(&self, phi: f64) -> Result<Complex64> {
        interpolate(&self.fourier_grid, &self.wtilde_samples, phi).ok_or_else(|| {
            Error::Range(format!(
                "a k/2pi = {phi:.4} beyond tabulated |a k/2pi| <= {FOURIER_HALF_EXTENT}"
            ))
        })
    }

    pub fn max_abs_wtilde(&self) -> f64 {
        self.max_abs_wtilde
    }

    /// Real-space samples as CSV: `x, w0`.
    pub fn write_real_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("x,w0\n");
        for (i, w) in self.w0_samples.iter().enumerate() {
            out.push_str(&format!("{:.12e},{w:.15e}\n", self.real_grid.value(i)));
        }
        write_file(path, &out)
    }

    /// Fourier samples as CSV: `phi, re, im`.
    pub fn write_fourier_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("phi,re,im\n");
        for (i, w) in self.wtilde_samples.iter().enumerate() {
            out.push_str(&format!(
                "{:.12e},{:.15e},{:.15e}\n",
                self.fourier_grid.value(i),
                w.re,
                w.im
            ));
        }
        write_file(path, &out)
    }
}

/// Time-of-flight envelope `f(k) = (m a^2 / hbar t)^2 |w~(a kx/2pi)|^2 |w~(a ky/2pi)|^2`,
/// returned per square metre, for `k` given in units of `1/a`.
pub fn envelope_f(
    wannier: &WannierTable,
    params: &LatticeParams,
    tof_time: f64,
    k: [f64; 2],
) -> Result<f64> {
    Envelope::new(wannier, params, tof_time)?.at_k(k)
}

/// [`envelope_f`] with its prefactor cached.
#[derive(Debug, Clone, Copy)]
pub struct Envelope<'a> {
    pub wannier: &'a WannierTable,
    pub params: LatticeParams,
    pub tof_time: f64,
    prefactor: f64,
}

impl<'a> Envelope<'a> {
    pub fn new(wannier: &'a WannierTable, params: &LatticeParams, tof_time: f64) -> Result<Self> {
        if !(tof_time.is_finite() && tof_time > 0.0) {
            return Err(Error::arg("tof_time", "must be positive"));
        }
        let ratio = 2.0 * PI * PI / params.tau(tof_time);
        Ok(Self {
            wannier,
            params: *params,
            tof_time,
            prefactor: ratio * ratio / (params.spacing_a * params.spacing_a),
        })
    }

    /// `f` at wavevector `k` in units of `1/a`, per square metre.
    pub fn at_k(&self, k: [f64; 2]) -> Result<f64> {
        let (px, py) = (k[0] / (2.0 * PI), k[1] / (2.0 * PI));
        let wx = self.wannier.wtilde_at(px)?;
        let wy = self.wannier.wtilde_at(py)?;
        let floor = ENVELOPE_FLOOR * self.wannier.max_abs_wtilde();
        if wx.norm() < floor || wy.norm() < floor {
            return Err(Error::DegenerateEnvelope(px, py));
        }
        Ok(self.prefactor * wx.norm_sqr() * wy.norm_sqr())
    }

    /// `f` at real-space detector position `(x, y)` in metres.
    pub fn at_position(&self, x: f64, y: f64) -> Result<f64> {
        self.at_k(self.k_at_position(x, y))
    }

    /// Lattice wavevector (units `1/a`) imaged at `(x, y)` metres.
    pub fn k_at_position(&self, x: f64, y: f64) -> [f64; 2] {
        let a = self.params.spacing_a;
        [
            self.params.wavenumber_at_position(x, self.tof_time) * a,
            self.params.wavenumber_at_position(y, self.tof_time) * a,
        ]
    }

    pub fn prefactor(&self) -> f64 {
        self.prefactor
    }
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(contents.as_bytes())
        .map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spectrum(s: f64) -> BlochSpectrum {
        let p = LatticeParams::rubidium(s).unwrap();
        solve_band_structure(&p, 3, DEFAULT_QUASIMOMENTA, DEFAULT_PLANE_WAVES).unwrap()
    }

    #[test]
    fn free_particle_at_zone_centre_has_zero_energy() {
        let (e, _) = solve_at(0.0, 0.0, DEFAULT_PLANE_WAVES).unwrap();
        assert!(e[0].abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_grid_sizes() {
        let p = LatticeParams::rubidium(5.0).unwrap();
        assert!(solve_band_structure(&p, 1, 16, 40).is_err());
        assert!(solve_band_structure(&p, 3, 16, 9).is_err());
        assert!(solve_band_structure(&p, 0, 16, 41).is_err());
        assert!(solve_band_structure(&p, 1, 1, 41).is_err());
    }

    #[test]
    fn accepts_experimental_depth_range() {
        for s in [0.0, 5.0, 12.0, 21.0, 30.0] {
            let p = LatticeParams::rubidium(s).unwrap();
            assert!(solve_band_structure(&p, 2, 16, 41).is_ok(), "s = {s}");
        }
    }

    #[test]
    fn bands_sorted_and_coefficients_normalized() {
        let sp = spectrum(12.0);
        for (e, c) in sp.band_energies.iter().zip(&sp.bloch_coefficients) {
            assert!(e.windows(2).all(|w| w[0] <= w[1]));
            for b in 0..sp.n_bands() {
                assert!((c.column(b).norm_squared() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn energies_converged_in_plane_wave_cutoff() {
        for s in [0.0, 9.0, 30.0] {
            for q in [-2.9, -0.4, 0.0, 1.7] {
                let (a, _) = solve_at(s, q, 41).unwrap();
                let (b, _) = solve_at(s, q, 81).unwrap();
                assert!((a[0] - b[0]).abs() < 1e-9, "s={s} q={q}");
            }
        }
    }

    #[test]
    fn deep_lattice_gap_close_to_harmonic_estimate() {
        let s: f64 = 30.0;
        let (e, _) = solve_at(s, 0.0, 61).unwrap();
        let harmonic = 2.0 * s.sqrt();
        assert!(((e[1] - e[0]) - harmonic).abs() < 0.1 * harmonic);
    }

    #[test]
    fn shallow_wannier_normalization_is_checked() {
        let sp = spectrum(0.0);
        assert!(matches!(
            compute_wannier(&sp, 8.0, 64),
            Err(Error::Accuracy(_))
        ));
        let sp = spectrum(9.0);
        assert!(matches!(
            compute_wannier(&sp, 8.0, 20),
            Err(Error::Accuracy(_))
        ));
        assert!(compute_wannier(&sp, 2.0, 64).is_err());
    }

    #[test]
    fn wannier_is_normalized_even_and_centred() {
        let sp = spectrum(9.0);
        let w = compute_wannier(&sp, 8.0, 64).unwrap();
        let sq: Vec<f64> = w.w0_samples.iter().map(|v| v * v).collect();
        assert!((w.real_grid.trapezoid(&sq) - 1.0).abs() < 1e-8);
        let n = w.w0_samples.len();
        for i in 0..n / 2 {
            assert!((w.w0_samples[i] - w.w0_samples[n - 1 - i]).abs() < 1e-10);
        }
        assert!(w.w0_at(0.0) > 0.0);
        for i in 0..w.wtilde_samples.len() {
            let j = w.wtilde_samples.len() - 1 - i;
            assert!((w.wtilde_samples[i].norm() - w.wtilde_samples[j].norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn envelope_floor_and_range() {
        let p = LatticeParams::rubidium(9.0).unwrap();
        let w = wannier_for(&p).unwrap();
        let env = Envelope::new(&w, &p, 21e-3).unwrap();
        assert!(env.at_k([0.0, 0.0]).unwrap() > 0.0);
        assert!(matches!(env.at_k([9.0 * PI, 0.0]), Err(Error::Range(_))));
        assert!(Envelope::new(&w, &p, 0.0).is_err());
    }
}
