use std::collections::BTreeSet;
use std::f64::consts::PI;

use serde::Serialize;

use super::{estimate_background, CalibrationParams, FrameGeometry, ImageFrame, ImageStack, Pixel};
use crate::bandstructure::{wannier_for, Envelope, WannierTable};
use crate::error::{Error, Result};
use crate::numerics::pairwise_sum;
use crate::units::LatticeParams;

/// Pixels with `f < EXCLUSION_RATIO * max f` are left out.
pub const EXCLUSION_RATIO: f64 = 1e-6;
const REGION_SIDE: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisOptions {
    /// Defaults to the 5x5 box around the pixel nearest `(pi/a, pi/a)`.
    pub region: Option<Vec<Pixel>>,
    pub symmetry: bool,
    pub per_pixel_map: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            region: None,
            symmetry: true,
            per_pixel_map: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SystematicParts {
    pub alpha: f64,
    pub mu0: f64,
    pub envelope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PixelMap {
    pub width: usize,
    pub height: usize,
    /// Wavevector (units `1/a`) imaged at each pixel centre.
    pub k: Vec<[f64; 2]>,
    /// `NaN` at excluded pixels.
    pub e_bar: Vec<f64>,
    pub sigma_total: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub e_bar_a: f64,
    pub n_bar: f64,
    /// `None` for fewer than two frames.
    pub sigma_stat: Option<f64>,
    pub sigma_sys: f64,
    pub sigma_disc: f64,
    pub sigma_total: f64,
    pub systematic: SystematicParts,
    pub region: Vec<Pixel>,
    pub symmetry: bool,
    pub frames: usize,
    pub mu0: Vec<f64>,
    pub sigma_mu0: Vec<f64>,
    /// Effective weight of every pixel entering `e_bar_a`.
    pub weights: Vec<(Pixel, f64)>,
    pub excluded_pixels: usize,
    #[serde(skip)]
    pub per_pixel_map: Option<PixelMap>,
}

/// Envelope-derived per-pixel tables for one frame geometry.
#[derive(Debug, Clone)]
pub struct Analyzer {
    pub geometry: FrameGeometry,
    pub lattice: LatticeParams,
    pub tof_time: f64,
    pub calibration: CalibrationParams,
    k: Vec<[f64; 2]>,
    /// `1/f` at pixel centres (m^2); `NaN` where excluded.
    g: Vec<f64>,
    sigma_g: Vec<f64>,
    /// Largest `|grad g|` sampled inside each pixel (m).
    epsilon: Vec<f64>,
}

fn envelope_or_nan(env: &Envelope, r: [f64; 2]) -> f64 {
    env.at_position(r[0], r[1]).unwrap_or(f64::NAN)
}

impl Analyzer {
    pub fn new(
        geometry: FrameGeometry,
        lattice: LatticeParams,
        tof_time: f64,
        calibration: CalibrationParams,
        wannier: &WannierTable,
    ) -> Result<Self> {
        calibration.validate()?;
        let env = Envelope::new(wannier, &lattice, tof_time)?;
        let centres: Vec<[f64; 2]> = geometry
            .pixels()
            .map(|p| geometry.pixel_center(p))
            .collect();
        let f: Vec<f64> = centres.iter().map(|&r| envelope_or_nan(&env, r)).collect();
        let f_max = f
            .iter()
            .copied()
            .filter(|v| v.is_finite())
            .fold(0.0, f64::max);
        if f_max <= 0.0 {
            return Err(Error::Numerical("envelope vanishes on every pixel".into()));
        }
        let keep = |v: f64| v.is_finite() && v >= EXCLUSION_RATIO * f_max;
        let mut g: Vec<f64> = f
            .iter()
            .map(|&v| if keep(v) { 1.0 / v } else { f64::NAN })
            .collect();

        // d g / d s by central difference
        let s = lattice.depth_s;
        let ds = (0.01 * s).max(1e-3);
        let shifted = |depth: f64| -> Result<Vec<f64>> {
            let lat = lattice.with_depth(depth)?;
            let w = wannier_for(&lat).map_err(|e| {
                Error::Numerical(format!("envelope derivative at s={depth:.4}: {e}"))
            })?;
            let env = Envelope::new(&w, &lat, tof_time)?;
            Ok(centres
                .iter()
                .map(|&r| 1.0 / envelope_or_nan(&env, r))
                .collect())
        };
        let (g_plus, g_minus) = (shifted(s + ds)?, shifted(s - ds)?);
        let sigma_s = calibration.sigma_s_rel * s;
        let sigma_g: Vec<f64> = (0..g.len())
            .map(|i| sigma_s * ((g_plus[i] - g_minus[i]) / (2.0 * ds)).abs())
            .collect();

        let d = geometry.pixel_size;
        let h = d / 64.0;
        let g_at = |x: f64, y: f64| 1.0 / envelope_or_nan(&env, [x, y]);
        let epsilon: Vec<f64> = centres
            .iter()
            .map(|&[cx, cy]| {
                let mut worst: f64 = 0.0;
                for ox in [-0.5, 0.0, 0.5] {
                    for oy in [-0.5, 0.0, 0.5] {
                        let (x, y) = (cx + ox * d, cy + oy * d);
                        let gx = (g_at(x + h, y) - g_at(x - h, y)) / (2.0 * h);
                        let gy = (g_at(x, y + h) - g_at(x, y - h)) / (2.0 * h);
                        worst = worst.max(gx.hypot(gy));
                        if !gx.is_finite() || !gy.is_finite() {
                            return f64::NAN;
                        }
                    }
                }
                worst
            })
            .collect();
        for i in 0..g.len() {
            if !sigma_g[i].is_finite() || !epsilon[i].is_finite() {
                g[i] = f64::NAN;
            }
        }
        let k = centres
            .iter()
            .map(|&[x, y]| env.k_at_position(x, y))
            .collect();
        Ok(Self {
            geometry,
            lattice,
            tof_time,
            calibration,
            k,
            g,
            sigma_g,
            epsilon,
        })
    }

    pub fn for_stack(stack: &ImageStack, wannier: &WannierTable) -> Result<Self> {
        Self::new(
            stack.geometry,
            stack.lattice,
            stack.tof_time,
            stack.calibration,
            wannier,
        )
    }

    fn idx(&self, p: Pixel) -> usize {
        p.1 * self.geometry.width + p.0
    }

    pub fn is_excluded(&self, p: Pixel) -> bool {
        self.g[self.idx(p)].is_nan()
    }

    pub fn excluded_pixels(&self) -> Vec<Pixel> {
        self.geometry
            .pixels()
            .filter(|&p| self.is_excluded(p))
            .collect()
    }

    /// `1/f` at the pixel centre (m^2).
    pub fn g(&self, p: Pixel) -> Option<f64> {
        let v = self.g[self.idx(p)];
        v.is_finite().then_some(v)
    }

    pub fn k(&self, p: Pixel) -> [f64; 2] {
        self.k[self.idx(p)]
    }

    /// Pixel imaging wavevector `k` (units `1/a`).
    pub fn pixel_of_k(&self, k: [f64; 2]) -> Option<Pixel> {
        let a = self.lattice.spacing_a;
        let r = [
            self.lattice.position_of_wavenumber(k[0] / a, self.tof_time),
            self.lattice.position_of_wavenumber(k[1] / a, self.tof_time),
        ];
        self.geometry.pixel_at(r)
    }

    /// Pixels equivalent to `p` under `k -> (±k_x + m 2pi/a, ±k_y + m' 2pi/a)`,
    /// `m, m'` in `{-1, 0, 1}`, restricted to usable in-frame pixels.
    pub fn orbit(&self, p: Pixel, symmetry: bool) -> Vec<Pixel> {
        if !symmetry {
            return vec![p];
        }
        let k = self.k(p);
        let big_g = 2.0 * PI;
        let mut set = BTreeSet::new();
        set.insert(p);
        for sx in [1.0, -1.0] {
            for sy in [1.0, -1.0] {
                for mx in [-1.0, 0.0, 1.0] {
                    for my in [-1.0, 0.0, 1.0] {
                        let kk = [sx * k[0] + mx * big_g, sy * k[1] + my * big_g];
                        if let Some(q) = self.pixel_of_k(kk) {
                            if !self.is_excluded(q) {
                                set.insert(q);
                            }
                        }
                    }
                }
            }
        }
        set.into_iter().collect()
    }

    /// Effective pixel weights `c_i` (summing to one) for a region.
    pub fn weights(&self, region: &[Pixel], symmetry: bool) -> Result<Vec<(Pixel, f64)>> {
        if region.is_empty() {
            return Err(Error::arg("region", "must not be empty"));
        }
        if let Some(p) = region
            .iter()
            .find(|p| p.0 >= self.geometry.width || p.1 >= self.geometry.height)
        {
            return Err(Error::Geometry(format!(
                "region pixel {p:?} outside the frame"
            )));
        }
        let bad: Vec<Pixel> = region
            .iter()
            .copied()
            .filter(|&p| self.is_excluded(p))
            .collect();
        if !bad.is_empty() {
            return Err(Error::ExcludedPixels(bad));
        }
        let mut acc = std::collections::BTreeMap::new();
        let share = 1.0 / region.len() as f64;
        for &p in region {
            let orbit = self.orbit(p, symmetry);
            let w = share / orbit.len() as f64;
            for q in orbit {
                *acc.entry(q).or_insert(0.0) += w;
            }
        }
        Ok(acc.into_iter().collect())
    }

    /// The 5x5 box around the pixel nearest `(pi/a, pi/a)`.
    pub fn default_region(&self) -> Result<Vec<Pixel>> {
        default_region(&self.geometry, &self.lattice, self.tof_time)
    }

    pub fn analyze(&self, frames: &[ImageFrame], options: &AnalysisOptions) -> Result<BoundReport> {
        let m = frames.len();
        if m == 0 {
            return Err(Error::arg("frames", "stack is empty"));
        }
        if frames
            .iter()
            .any(|f| f.width != self.geometry.width || f.height != self.geometry.height)
        {
            return Err(Error::Geometry(
                "frame size differs from the analyzer geometry".into(),
            ));
        }
        let region = match &options.region {
            Some(r) => r.clone(),
            None => self.default_region()?,
        };
        let weights = self.weights(&region, options.symmetry)?;
        let backgrounds = frames
            .iter()
            .map(estimate_background)
            .collect::<Result<Vec<_>>>()?;
        let mu0: Vec<f64> = backgrounds.iter().map(|b| b.mu0).collect();
        let sigma_mu0: Vec<f64> = backgrounds.iter().map(|b| b.sigma_mu0).collect();
        let alpha = self.calibration.alpha;
        let totals: Vec<f64> = frames
            .iter()
            .zip(&mu0)
            .map(|(f, z)| {
                let shifted: Vec<f64> = f.mu.iter().map(|v| v - z).collect();
                alpha * pairwise_sum(&shifted)
            })
            .collect();
        let n_bar = pairwise_sum(&totals) / m as f64;

        let summary = self.budget(frames, &mu0, &sigma_mu0, &totals, &weights);
        let per_pixel_map = options
            .per_pixel_map
            .then(|| self.pixel_map(frames, &mu0, &sigma_mu0, &totals, options.symmetry));

        Ok(BoundReport {
            e_bar_a: summary.e_bar,
            n_bar,
            sigma_stat: summary.stat,
            sigma_sys: summary.sys,
            sigma_disc: summary.disc,
            sigma_total: summary.total,
            systematic: summary.parts,
            region,
            symmetry: options.symmetry,
            frames: m,
            mu0,
            sigma_mu0,
            weights,
            excluded_pixels: self.g.iter().filter(|v| v.is_nan()).count(),
            per_pixel_map,
        })
    }

    fn budget(
        &self,
        frames: &[ImageFrame],
        mu0: &[f64],
        sigma_mu0: &[f64],
        totals: &[f64],
        weights: &[(Pixel, f64)],
    ) -> Budget {
        let m = frames.len() as f64;
        let alpha = self.calibration.alpha;
        let d2 = self.geometry.pixel_size.powi(2);
        let idx: Vec<(usize, f64)> = weights.iter().map(|&(p, c)| (self.idx(p), c)).collect();
        let g: Vec<f64> = idx.iter().map(|&(i, _)| self.g[i]).collect();

        let per_frame: Vec<f64> = frames
            .iter()
            .zip(mu0)
            .zip(totals)
            .map(|((f, z), n_tot)| {
                let terms: Vec<f64> = idx
                    .iter()
                    .zip(&g)
                    .map(|(&(i, c), gi)| c * gi * alpha * (f.mu[i] - z) / d2)
                    .collect();
                n_tot - pairwise_sum(&terms)
            })
            .collect();
        let e_bar = pairwise_sum(&per_frame) / m;
        let stat = (frames.len() >= 2).then(|| {
            let dev: Vec<f64> = per_frame.iter().map(|e| (e - e_bar).powi(2)).collect();
            (pairwise_sum(&dev) / (m * (m - 1.0))).sqrt()
        });

        let n_bar_pixel: Vec<f64> = idx
            .iter()
            .map(|&(i, _)| {
                let v: Vec<f64> = frames
                    .iter()
                    .zip(mu0)
                    .map(|(f, z)| alpha * (f.mu[i] - z))
                    .collect();
                pairwise_sum(&v) / m
            })
            .collect();

        let sys_alpha = self.calibration.sigma_alpha * e_bar / alpha;
        let weighted_g: f64 = pairwise_sum(
            &idx.iter()
                .zip(&g)
                .map(|(&(_, c), gi)| c * gi / d2)
                .collect::<Vec<_>>(),
        );
        let pixel_count = self.geometry.n_pixels() as f64;
        let mu0_var = pairwise_sum(&sigma_mu0.iter().map(|s| s * s).collect::<Vec<_>>());
        let sys_mu0 = (alpha / m) * (weighted_g - pixel_count).abs() * mu0_var.sqrt();
        let g_terms: Vec<f64> = idx
            .iter()
            .zip(&n_bar_pixel)
            .map(|(&(i, c), nb)| (c * self.sigma_g[i] * nb).powi(2))
            .collect();
        let sys_g = pairwise_sum(&g_terms).sqrt() / d2;
        let sys = (sys_alpha.powi(2) + sys_mu0.powi(2) + sys_g.powi(2)).sqrt();

        let d = self.geometry.pixel_size;
        let disc_terms: Vec<f64> = idx
            .iter()
            .zip(&n_bar_pixel)
            .map(|(&(i, c), nb)| (c * self.epsilon[i] * nb / (6f64.sqrt() * d)).powi(2))
            .collect();
        let disc = pairwise_sum(&disc_terms).sqrt();
        let total = (stat.unwrap_or(0.0).powi(2) + sys.powi(2) + disc.powi(2)).sqrt();
        Budget {
            e_bar,
            stat,
            sys,
            disc,
            total,
            parts: SystematicParts {
                alpha: sys_alpha.abs(),
                mu0: sys_mu0,
                envelope: sys_g,
            },
        }
    }

    fn pixel_map(
        &self,
        frames: &[ImageFrame],
        mu0: &[f64],
        sigma_mu0: &[f64],
        totals: &[f64],
        symmetry: bool,
    ) -> PixelMap {
        let n = self.geometry.n_pixels();
        let mut e_bar = vec![f64::NAN; n];
        let mut sigma_total = vec![f64::NAN; n];
        for p in self.geometry.pixels() {
            if self.is_excluded(p) {
                continue;
            }
            let orbit = self.orbit(p, symmetry);
            let c = 1.0 / orbit.len() as f64;
            let weights: Vec<(Pixel, f64)> = orbit.into_iter().map(|q| (q, c)).collect();
            let b = self.budget(frames, mu0, sigma_mu0, totals, &weights);
            let i = self.idx(p);
            e_bar[i] = b.e_bar;
            sigma_total[i] = b.total;
        }
        PixelMap {
            width: self.geometry.width,
            height: self.geometry.height,
            k: self.k.clone(),
            e_bar,
            sigma_total,
        }
    }
}

struct Budget {
    e_bar: f64,
    stat: Option<f64>,
    sys: f64,
    disc: f64,
    total: f64,
    parts: SystematicParts,
}

/// The 5x5 box around the pixel nearest `(pi/a, pi/a)`.
pub fn default_region(
    geometry: &FrameGeometry,
    lattice: &LatticeParams,
    tof_time: f64,
) -> Result<Vec<Pixel>> {
    let a = lattice.spacing_a;
    let x = lattice.position_of_wavenumber(PI / a, tof_time);
    let (ci, cj) = geometry.pixel_at([x, x]).ok_or_else(|| {
        Error::Geometry("frame does not contain the zone corner (pi/a, pi/a)".into())
    })?;
    let half = REGION_SIDE / 2;
    if ci < half || cj < half || ci + half >= geometry.width || cj + half >= geometry.height {
        return Err(Error::Geometry(
            "5x5 box around (pi/a, pi/a) leaves the frame".into(),
        ));
    }
    Ok((cj - half..=cj + half)
        .flat_map(|j| (ci - half..=ci + half).map(move |i| (i, j)))
        .collect())
}

/// Builds the envelope tables and analyzes a stack.
pub fn analyze_stack(
    stack: &ImageStack,
    wannier: &WannierTable,
    options: &AnalysisOptions,
) -> Result<BoundReport> {
    Analyzer::for_stack(stack, wannier)?.analyze(&stack.frames, options)
}
