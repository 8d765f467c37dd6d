//! Witness `W(k) = n(k)/f(k) - N` and the entanglement lower bound `E(k)`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bandstructure::write_file;
use crate::error::{Error, Result};
use crate::states::{
    one_body_dm, sample_separable_ssr_state_with, DensityOperator, OneBodyDM, Site,
};

/// Time-of-flight parameter of the experiment.
pub const DEFAULT_TAU: f64 = 1.8e3;
/// Witness values above `-NONNEGATIVE_TOL` count as nonnegative.
pub const NONNEGATIVE_TOL: f64 = 1e-9;

/// Wavevector (units of `1/a`) and time-of-flight parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentumSpec {
    pub k: [f64; 2],
    pub tau: f64,
    pub include_quadratic_phase: bool,
}

impl MomentumSpec {
    /// Quadratic phase on; `tau` may be infinite.
    pub fn new(k: [f64; 2], tau: f64) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::arg("tau", "must be > 0"));
        }
        if !k.iter().all(|x| x.is_finite()) {
            return Err(Error::arg("k", "must be finite"));
        }
        Ok(Self {
            k,
            tau,
            include_quadratic_phase: true,
        })
    }

    /// The `tau -> infinity` limit.
    pub fn far_field(k: [f64; 2]) -> Self {
        Self {
            k,
            tau: f64::INFINITY,
            include_quadratic_phase: false,
        }
    }

    pub fn without_quadratic_phase(mut self) -> Self {
        self.include_quadratic_phase = false;
        self
    }
}

/// `k = (pi/a, pi/a)`.
pub const K_HAT: [f64; 2] = [PI, PI];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundValue {
    pub e_of_k: f64,
    pub n_total: f64,
    pub witness_expectation: f64,
}

impl BoundValue {
    pub fn from_parts(n_total: f64, density_over_f: f64) -> Self {
        let w = density_over_f - n_total;
        Self {
            e_of_k: (-w).max(0.0),
            n_total,
            witness_expectation: w,
        }
    }
}

fn radius_sq(s: &Site) -> f64 {
    (s[0] as f64).powi(2) + (s[1] as f64).powi(2)
}

/// `<n(k)>/f(k) = sum_{i_z = j_z} G_ij e^{i k.(i-j)} e^{i pi^2 (j^2 - i^2)/tau}`.
pub fn momentum_density(g: &OneBodyDM, spec: &MomentumSpec) -> Result<f64> {
    let pos = &g.site_positions;
    let quad = if spec.include_quadratic_phase && spec.tau.is_finite() {
        PI * PI / spec.tau
    } else {
        0.0
    };
    let mut sum = Complex64::new(0.0, 0.0);
    for (i, pi) in pos.iter().enumerate() {
        for (j, pj) in pos.iter().enumerate() {
            if pi[2] != pj[2] {
                continue;
            }
            let phase = spec.k[0] * (pi[0] - pj[0]) as f64
                + spec.k[1] * (pi[1] - pj[1]) as f64
                + quad * (radius_sq(pj) - radius_sq(pi));
            sum += g.matrix[(i, j)] * Complex64::from_polar(1.0, phase);
        }
    }
    let tol = 1e-9 * g.n_total().max(1.0);
    if sum.im.abs() > tol {
        return Err(Error::HermiticityViolation {
            residue: sum.im.abs(),
            tolerance: tol,
        });
    }
    Ok(sum.re)
}

/// `E(k) = max(0, <N> - <n(k)>/f(k))`.
pub fn entanglement_bound(g: &OneBodyDM, spec: &MomentumSpec) -> Result<BoundValue> {
    Ok(BoundValue::from_parts(
        g.n_total(),
        momentum_density(g, spec)?,
    ))
}

/// Bound at each wavevector of a grid.
pub fn bound_map(g: &OneBodyDM, ks: &[[f64; 2]], tau: f64) -> Result<Vec<([f64; 2], BoundValue)>> {
    ks.iter()
        .map(|&k| Ok((k, entanglement_bound(g, &MomentumSpec::new(k, tau)?)?)))
        .collect()
}

/// Writes `k_x, k_y, E, witness_expectation`.
pub fn write_bound_map_csv(path: &Path, entries: &[([f64; 2], BoundValue)]) -> Result<()> {
    let mut out = String::from("k_x,k_y,E,witness_expectation\n");
    for (k, b) in entries {
        out.push_str(&format!(
            "{:.12e},{:.12e},{:.12e},{:.12e}\n",
            k[0], k[1], b.e_of_k, b.witness_expectation
        ));
    }
    write_file(path, &out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnalyticCase {
    TwoModePsi(usize),
    CoherentMixture(Complex64),
    Symmetric(usize),
}

/// Closed forms of `E(k = (pi/a, 0))` for the two-site examples in the
/// far-field limit.
pub fn analytic_example_bound(case: AnalyticCase) -> f64 {
    match case {
        AnalyticCase::TwoModePsi(n) => {
            let s: f64 = (0..n)
                .map(|k| ((k + 1) as f64).sqrt() * ((n - k) as f64).sqrt())
                .sum();
            2.0 * s / (n + 1) as f64
        }
        AnalyticCase::CoherentMixture(alpha) => 2.0 * alpha.norm_sqr(),
        AnalyticCase::Symmetric(n) => n as f64,
    }
}

/// Mean of `E` over a region. A convex combination of valid lower bounds
/// is again a lower bound.
pub fn region_average_bound<K: Ord + fmt::Debug>(
    bounds: &BTreeMap<K, BoundValue>,
    region: &[K],
) -> Result<f64> {
    if region.is_empty() {
        return Err(Error::arg("region", "must not be empty"));
    }
    let mut sum = 0.0;
    for key in region {
        let b = bounds
            .get(key)
            .ok_or_else(|| Error::arg("region", format!("pixel {key:?} has no bound")))?;
        sum += b.e_of_k;
    }
    Ok(sum / region.len() as f64)
}

/// Describes random separable states for the sampled checks.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub positions: Vec<Site>,
    pub n_max: usize,
    pub n_terms: usize,
}

impl SamplerConfig {
    pub fn new(positions: Vec<Site>, n_max: usize, n_terms: usize) -> Result<Self> {
        if positions.is_empty() || positions.len() > 3 {
            return Err(Error::arg(
                "positions",
                "sampled checks support 1 to 3 sites",
            ));
        }
        if n_max > 3 {
            return Err(Error::arg("n_max", "sampled checks support n_max <= 3"));
        }
        if n_terms == 0 {
            return Err(Error::arg("n_terms", "need at least one term"));
        }
        Ok(Self {
            positions,
            n_max,
            n_terms,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.positions.len()
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<DensityOperator> {
        sample_separable_ssr_state_with(self.n_sites(), self.n_max, self.n_terms, rng)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WitnessViolation {
    pub trial: usize,
    pub k: [f64; 2],
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WitnessReport {
    pub trials: usize,
    pub evaluations: usize,
    pub min_expectation: f64,
    pub violations: Vec<WitnessViolation>,
}

impl WitnessReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for WitnessReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "witness nonnegativity on separable samples")?;
        writeln!(f, "  trials: {}", self.trials)?;
        writeln!(f, "  evaluations: {}", self.evaluations)?;
        writeln!(f, "  min expectation: {:.3e}", self.min_expectation)?;
        writeln!(f, "  violations: {}", self.violations.len())?;
        for v in self.violations.iter().take(10) {
            writeln!(
                f,
                "    trial {} k=({:.4}, {:.4}): {:.3e}",
                v.trial, v.k[0], v.k[1], v.value
            )?;
        }
        write!(
            f,
            "  status: {}",
            if self.passed() { "PASS" } else { "FAIL" }
        )
    }
}

/// Samples separable states and checks `<W(k)> >= -1e-9` on a k-grid.
pub fn verify_witness_nonnegativity(
    config: &SamplerConfig,
    trials: usize,
    k_grid: &[[f64; 2]],
    tau: f64,
    seed: u64,
) -> Result<WitnessReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let specs: Vec<MomentumSpec> = k_grid
        .iter()
        .map(|&k| MomentumSpec::new(k, tau))
        .collect::<Result<_>>()?;
    let mut report = WitnessReport {
        trials,
        evaluations: 0,
        min_expectation: f64::INFINITY,
        violations: Vec::new(),
    };
    for trial in 0..trials {
        let rho = config.sample(&mut rng)?;
        let g = one_body_dm(&rho, &config.positions)?;
        for spec in &specs {
            let w = entanglement_bound(&g, spec)?.witness_expectation;
            report.evaluations += 1;
            report.min_expectation = report.min_expectation.min(w);
            if w < -NONNEGATIVE_TOL {
                report.violations.push(WitnessViolation {
                    trial,
                    k: spec.k,
                    value: w,
                });
            }
        }
    }
    Ok(report)
}

/// Diagonal Kraus operator on one site, indexed by local occupation.
pub type LocalKraus = Vec<Complex64>;

/// Applies `rho -> sum_a K_a rho K_a^dagger` with every `K_a` acting on
/// `site` and diagonal in its number basis.
pub fn apply_local_kraus(
    rho: &DensityOperator,
    site: usize,
    kraus: &[LocalKraus],
) -> Result<DensityOperator> {
    let basis = rho.basis();
    if site >= basis.n_sites() {
        return Err(Error::arg("site", "out of range"));
    }
    let need = basis.max_site_occupation() + 1;
    if kraus.iter().any(|k| k.len() < need) {
        return Err(Error::arg("kraus", format!("need {need} diagonal entries")));
    }
    let d = basis.dim();
    let occ: Vec<usize> = (0..d).map(|i| basis.state(i)[site] as usize).collect();
    let m = rho.matrix();
    let out = nalgebra::DMatrix::from_fn(d, d, |r, c| {
        let factor: Complex64 = kraus.iter().map(|k| k[occ[r]] * k[occ[c]].conj()).sum();
        m[(r, c)] * factor
    });
    DensityOperator::new(basis.clone(), out)
}

/// Complete dephasing of one site in its number basis.
pub fn dephase_site(rho: &DensityOperator, site: usize) -> Result<DensityOperator> {
    let n = rho.basis().max_site_occupation() + 1;
    let projectors: Vec<LocalKraus> = (0..n)
        .map(|k| {
            (0..n)
                .map(|j| Complex64::new(if j == k { 1.0 } else { 0.0 }, 0.0))
                .collect()
        })
        .collect();
    apply_local_kraus(rho, site, &projectors)
}

/// Random trace-preserving pair `K_1 = diag(cos t_n e^{i a_n})`,
/// `K_2 = diag(sin t_n e^{i b_n})`.
pub fn random_kraus_pair<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> [LocalKraus; 2] {
    let mut k1 = Vec::with_capacity(dim);
    let mut k2 = Vec::with_capacity(dim);
    for _ in 0..dim {
        let theta: f64 = rng.random_range(0.0..std::f64::consts::FRAC_PI_2);
        let a: f64 = rng.random_range(0.0..2.0 * PI);
        let b: f64 = rng.random_range(0.0..2.0 * PI);
        k1.push(Complex64::from_polar(theta.cos(), a));
        k2.push(Complex64::from_polar(theta.sin(), b));
    }
    [k1, k2]
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneReport {
    pub states: usize,
    pub channels: usize,
    pub membership_failures: usize,
    pub min_expectation: f64,
    pub violations: usize,
}

impl MonotoneReport {
    pub fn passed(&self) -> bool {
        self.membership_failures == 0 && self.violations == 0
    }
}

impl fmt::Display for MonotoneReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "local number-conserving channels on separable samples")?;
        writeln!(f, "  states: {}", self.states)?;
        writeln!(f, "  channels per state: {}", self.channels)?;
        writeln!(f, "  outputs leaving the set: {}", self.membership_failures)?;
        writeln!(f, "  min witness expectation: {:.3e}", self.min_expectation)?;
        writeln!(f, "  witness violations: {}", self.violations)?;
        write!(
            f,
            "  status: {}",
            if self.passed() { "PASS" } else { "FAIL" }
        )
    }
}

/// Applies random local number-conserving Kraus pairs (one per site) to
/// separable samples and checks the outputs stay in the set with a
/// nonnegative witness at `spec`.
pub fn check_monotone_under_local_channels(
    config: &SamplerConfig,
    n_states: usize,
    n_channels: usize,
    spec: &MomentumSpec,
    seed: u64,
) -> Result<MonotoneReport> {
    if config.n_sites() > 2 {
        return Err(Error::arg(
            "positions",
            "channel check supports at most 2 sites",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = MonotoneReport {
        states: n_states,
        channels: n_channels,
        membership_failures: 0,
        min_expectation: f64::INFINITY,
        violations: 0,
    };
    for _ in 0..n_states {
        let rho = config.sample(&mut rng)?;
        for _ in 0..n_channels {
            let mut out = rho.clone();
            for site in 0..config.n_sites() {
                let pair = random_kraus_pair(config.n_max + 1, &mut rng);
                out = apply_local_kraus(&out, site, &pair)?;
            }
            if !out.in_separable_ssr_set(1e-12) || out.min_eigenvalue() < -1e-10 {
                report.membership_failures += 1;
            }
            let g = one_body_dm(&out, &config.positions)?;
            let w = entanglement_bound(&g, spec)?.witness_expectation;
            report.min_expectation = report.min_expectation.min(w);
            if w < -NONNEGATIVE_TOL {
                report.violations += 1;
            }
        }
    }
    Ok(report)
}
