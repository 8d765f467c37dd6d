//! Many-boson states on small lattices and their one-body density matrices.

use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::bandstructure::write_file;
use crate::error::{Error, Result};
use crate::fock::{FockBasis, Sector};

/// Integer lattice coordinates of a site.
pub type Site = [i32; 3];

const NORM_TOL: f64 = 1e-10;

/// Pure state `sum c_{n_1..n_L} |n_1 ... n_L>`.
#[derive(Debug, Clone)]
pub struct StateVector {
    basis: Arc<FockBasis>,
    amplitudes: DVector<Complex64>,
}

impl StateVector {
    /// Wraps amplitudes that must already be normalized.
    pub fn new(basis: Arc<FockBasis>, amplitudes: DVector<Complex64>) -> Result<Self> {
        if amplitudes.len() != basis.dim() {
            return Err(Error::arg(
                "amplitudes",
                "length differs from basis dimension",
            ));
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::arg("amplitudes", format!("norm {norm} is not 1")));
        }
        Ok(Self { basis, amplitudes })
    }

    /// Normalizes the given amplitudes.
    pub fn normalized(basis: Arc<FockBasis>, mut amplitudes: DVector<Complex64>) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::arg("amplitudes", "zero or non-finite norm"));
        }
        amplitudes.unscale_mut(norm);
        Self::new(basis, amplitudes)
    }

    /// Gaussian random amplitudes, normalized.
    pub fn random<R: Rng + ?Sized>(basis: Arc<FockBasis>, rng: &mut R) -> Self {
        let amps = DVector::from_fn(basis.dim(), |_, _| {
            Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        Self::normalized(basis, amps).expect("gaussian vector has positive norm")
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    /// Amplitude of an occupation tuple; zero if it is outside the basis.
    pub fn amplitude_of(&self, occupation: &[u16]) -> Complex64 {
        self.basis
            .index_of(occupation)
            .map_or(Complex64::new(0.0, 0.0), |i| self.amplitudes[i])
    }

    pub fn overlap(&self, other: &StateVector) -> Complex64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    pub fn with_global_phase(&self, phase: f64) -> Self {
        Self {
            basis: self.basis.clone(),
            amplitudes: self
                .amplitudes
                .map(|c| c * Complex64::from_polar(1.0, phase)),
        }
    }

    pub fn to_density(&self) -> DensityOperator {
        DensityOperator {
            basis: self.basis.clone(),
            matrix: &self.amplitudes * self.amplitudes.adjoint(),
        }
    }

    /// Amplitudes as CSV `row, col, re, im` with `col = 0`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_complex_csv(path, self.amplitudes.len(), 1, |r, _| self.amplitudes[r])
    }
}

/// Mixed state on a Fock basis.
#[derive(Debug, Clone)]
pub struct DensityOperator {
    basis: Arc<FockBasis>,
    matrix: DMatrix<Complex64>,
}

impl DensityOperator {
    /// Checks shape, unit trace and Hermiticity (within `1e-10`).
    pub fn new(basis: Arc<FockBasis>, matrix: DMatrix<Complex64>) -> Result<Self> {
        let d = basis.dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::arg("matrix", "shape differs from basis dimension"));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > NORM_TOL || tr.im.abs() > NORM_TOL {
            return Err(Error::arg("matrix", format!("trace {tr} is not 1")));
        }
        let herm = (&matrix - matrix.adjoint()).camax();
        if herm > NORM_TOL {
            return Err(Error::arg(
                "matrix",
                format!("not Hermitian (residual {herm:.2e})"),
            ));
        }
        Ok(Self { basis, matrix })
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.matrix.clone())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Convex combination `p * self + (1 - p) * other`.
    pub fn mix(&self, other: &DensityOperator, p: f64) -> Result<Self> {
        if self.basis != other.basis {
            return Err(Error::arg("other", "different bases"));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::arg("p", "must lie in [0, 1]"));
        }
        Ok(Self {
            basis: self.basis.clone(),
            matrix: self.matrix.scale(p) + other.matrix.scale(1.0 - p),
        })
    }

    /// Frobenius norm of `[rho, n_site]`.
    pub fn local_number_commutator_norm(&self, site: usize) -> f64 {
        let d = self.basis.dim();
        let mut acc = 0.0;
        for m in 0..d {
            let nm = self.basis.state(m)[site] as f64;
            for n in 0..d {
                let nn = self.basis.state(n)[site] as f64;
                if nm != nn {
                    acc += self.matrix[(m, n)].norm_sqr() * (nm - nn).powi(2);
                }
            }
        }
        acc.sqrt()
    }

    /// Frobenius norm of `[rho, N]` with `N` the total number operator.
    pub fn total_number_commutator_norm(&self) -> f64 {
        let d = self.basis.dim();
        let mut acc = 0.0;
        for m in 0..d {
            let nm = self.basis.total_particles(m) as f64;
            for n in 0..d {
                let nn = self.basis.total_particles(n) as f64;
                acc += self.matrix[(m, n)].norm_sqr() * (nm - nn).powi(2);
            }
        }
        acc.sqrt()
    }

    /// Membership in the set of states preparable by number-conserving local
    /// operations and classical communication, with one party per site.
    ///
    /// With single-site parties every local state must be diagonal in the
    /// local number basis, so the set consists exactly of the states that
    /// commute with every `n_i` (diagonal in the product Fock basis) and are
    /// positive with unit trace.
    pub fn in_separable_ssr_set(&self, tol: f64) -> bool {
        let tr = self.trace();
        if (tr.re - 1.0).abs() > tol || tr.im.abs() > tol {
            return false;
        }
        if (0..self.basis.n_sites()).any(|i| self.local_number_commutator_norm(i) > tol) {
            return false;
        }
        (0..self.basis.dim()).all(|i| {
            let v = self.matrix[(i, i)];
            v.re >= -tol && v.im.abs() <= tol
        })
    }

    /// Expectation of the total particle number.
    pub fn mean_particles(&self) -> f64 {
        (0..self.basis.dim())
            .map(|i| self.matrix[(i, i)].re * self.basis.total_particles(i) as f64)
            .sum()
    }

    /// Matrix as CSV `row, col, re, im`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_complex_csv(path, self.matrix.nrows(), self.matrix.ncols(), |r, c| {
            self.matrix[(r, c)]
        })
    }
}

/// One-body density matrix `G[i][j] = <b†_i b_j>` with site coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct OneBodyDM {
    pub matrix: DMatrix<Complex64>,
    pub site_positions: Vec<Site>,
}

impl OneBodyDM {
    pub fn new(matrix: DMatrix<Complex64>, site_positions: Vec<Site>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() != site_positions.len() {
            return Err(Error::arg("positions", "need one position per site"));
        }
        Ok(Self {
            matrix,
            site_positions,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.site_positions.len()
    }

    /// `<N> = tr G`.
    pub fn n_total(&self) -> f64 {
        self.matrix.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn hermiticity_residual(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint()).camax()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.matrix + self.matrix.adjoint()).scale(0.5);
        SymmetricEigen::new(herm)
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Scales every correlator, e.g. to model many identical independent copies.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            matrix: self.matrix.scale(factor),
            site_positions: self.site_positions.clone(),
        }
    }

    /// Simultaneously permutes sites and their positions: new site `k` is old
    /// site `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.n_sites();
        Self {
            matrix: DMatrix::from_fn(n, n, |r, c| self.matrix[(perm[r], perm[c])]),
            site_positions: perm.iter().map(|&p| self.site_positions[p]).collect(),
        }
    }

    /// Matrix as CSV `row, col, re, im`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_complex_csv(path, self.n_sites(), self.n_sites(), |r, c| {
            self.matrix[(r, c)]
        })
    }

    /// Reads the `row, col, re, im` form back; missing entries are zero.
    pub fn read_csv(path: &Path, site_positions: Vec<Site>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let n = site_positions.len();
        let mut m = DMatrix::zeros(n, n);
        for (lineno, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let parsed = (|| -> Option<(usize, usize, f64, f64)> {
                if fields.len() != 4 {
                    return None;
                }
                Some((
                    fields[0].parse().ok()?,
                    fields[1].parse().ok()?,
                    fields[2].parse().ok()?,
                    fields[3].parse().ok()?,
                ))
            })();
            let (r, c, re, im) = parsed
                .filter(|&(r, c, _, _)| r < n && c < n)
                .ok_or_else(|| Error::format(path, format!("bad entry on line {}", lineno + 1)))?;
            m[(r, c)] = Complex64::new(re, im);
        }
        Self::new(m, site_positions)
    }
}

fn write_complex_csv(
    path: &Path,
    rows: usize,
    cols: usize,
    entry: impl Fn(usize, usize) -> Complex64,
) -> Result<()> {
    let mut out = String::from("row,col,re,im\n");
    for r in 0..rows {
        for c in 0..cols {
            let z = entry(r, c);
            out.push_str(&format!("{r},{c},{:.17e},{:.17e}\n", z.re, z.im));
        }
    }
    write_file(path, &out)
}

/// Anything whose one-body correlators can be evaluated exactly.
pub trait OneBodyCorrelations {
    fn one_body_dm(&self, positions: &[Site]) -> Result<OneBodyDM>;
}

fn check_positions(basis: &FockBasis, positions: &[Site]) -> Result<()> {
    if positions.len() != basis.n_sites() {
        return Err(Error::arg(
            "positions",
            format!(
                "{} positions for {} sites",
                positions.len(),
                basis.n_sites()
            ),
        ));
    }
    Ok(())
}

impl OneBodyCorrelations for StateVector {
    fn one_body_dm(&self, positions: &[Site]) -> Result<OneBodyDM> {
        check_positions(&self.basis, positions)?;
        let l = self.basis.n_sites();
        let c = &self.amplitudes;
        let mut g = DMatrix::<Complex64>::zeros(l, l);
        for m in 0..self.basis.dim() {
            let occ = self.basis.state(m);
            let weight = c[m].norm_sqr();
            for i in 0..l {
                g[(i, i)] += weight * occ[i] as f64;
            }
            for i in 0..l {
                for j in 0..l {
                    if i == j {
                        continue;
                    }
                    if let Some((t, amp)) = self.basis.hop(m, i, j) {
                        g[(i, j)] += c[t].conj() * c[m] * amp;
                    }
                }
            }
        }
        OneBodyDM::new(g, positions.to_vec())
    }
}

impl OneBodyCorrelations for DensityOperator {
    fn one_body_dm(&self, positions: &[Site]) -> Result<OneBodyDM> {
        check_positions(&self.basis, positions)?;
        let l = self.basis.n_sites();
        let mut g = DMatrix::<Complex64>::zeros(l, l);
        for m in 0..self.basis.dim() {
            let occ = self.basis.state(m);
            let diag = self.matrix[(m, m)];
            for i in 0..l {
                g[(i, i)] += diag * occ[i] as f64;
            }
            for i in 0..l {
                for j in 0..l {
                    if i == j {
                        continue;
                    }
                    if let Some((t, amp)) = self.basis.hop(m, i, j) {
                        g[(i, j)] += self.matrix[(m, t)] * amp;
                    }
                }
            }
        }
        OneBodyDM::new(g, positions.to_vec())
    }
}

/// Exact `<b†_i b_j>` of a pure or mixed state.
pub fn one_body_dm<S: OneBodyCorrelations + ?Sized>(
    state: &S,
    positions: &[Site],
) -> Result<OneBodyDM> {
    state.one_body_dm(positions)
}

/// Positions of the two-site examples: `(1,0,0)` and `(0,1,0)`.
pub const TWO_SITE_POSITIONS: [Site; 2] = [[1, 0, 0], [0, 1, 0]];

/// `(N+1)^(-1/2) sum_n |n>_A |N-n>_B`.
pub fn build_two_mode_psi(n: usize) -> Result<StateVector> {
    let basis = Arc::new(FockBasis::fixed(2, n)?);
    let amp = Complex64::new(1.0 / ((n + 1) as f64).sqrt(), 0.0);
    let amps = DVector::from_element(basis.dim(), amp);
    StateVector::new(basis, amps)
}

/// Truncated Poisson weight `sum_{n <= n_max} e^{-|a|^2} |a|^{2n} / n!`.
pub fn coherent_weight(alpha_abs_sq: f64, n_max: usize) -> f64 {
    let mut term = (-alpha_abs_sq).exp();
    let mut sum = term;
    for n in 1..=n_max {
        term *= alpha_abs_sq / n as f64;
        sum += term;
    }
    sum
}

/// Smallest per-mode cutoff whose two-mode coherent weight reaches `1 - deficit`.
pub fn coherent_cutoff(alpha: Complex64, deficit: f64) -> usize {
    let a2 = alpha.norm_sqr();
    (0..)
        .find(|&n| coherent_weight(a2, n).powi(2) >= 1.0 - deficit)
        .expect("Poisson tail vanishes")
}

fn coherent_amplitudes(alpha: Complex64, basis: &FockBasis) -> DVector<Complex64> {
    let norm = (-alpha.norm_sqr()).exp();
    let single = |n: usize| -> Complex64 {
        let mut z = Complex64::new(norm.sqrt(), 0.0);
        for k in 1..=n {
            z *= alpha / (k as f64).sqrt();
        }
        z
    };
    DVector::from_iterator(
        basis.dim(),
        basis
            .states()
            .map(|occ| single(occ[0] as usize) * single(occ[1] as usize)),
    )
}

fn check_coherent_truncation(alpha: Complex64, n_max: usize) -> Result<()> {
    let weight = coherent_weight(alpha.norm_sqr(), n_max).powi(2);
    if weight < 1.0 - 1e-6 {
        return Err(Error::Accuracy(format!(
            "coherent truncation n_max={n_max} keeps weight {weight:.9}, need >= 1-1e-6 (try n_max={})",
            coherent_cutoff(alpha, 1e-6)
        )));
    }
    Ok(())
}

/// Product `|z>_A |z>_B`, truncated at `n_max` per mode and renormalized.
pub fn build_coherent_product(alpha: Complex64, n_max: usize) -> Result<StateVector> {
    check_coherent_truncation(alpha, n_max)?;
    let basis = Arc::new(FockBasis::truncated(2, n_max)?);
    let amps = coherent_amplitudes(alpha, &basis);
    StateVector::normalized(basis, amps)
}

/// Phase average of `|z><z| ⊗ |z><z|`: the projection of the truncated
/// product onto blocks of fixed total particle number, renormalized.
pub fn build_coherent_mixture(alpha: Complex64, n_max: usize) -> Result<DensityOperator> {
    check_coherent_truncation(alpha, n_max)?;
    let basis = Arc::new(FockBasis::truncated(2, n_max)?);
    let amps = coherent_amplitudes(alpha, &basis);
    let d = basis.dim();
    let totals: Vec<usize> = (0..d).map(|i| basis.total_particles(i)).collect();
    let mut m = DMatrix::from_fn(d, d, |r, c| {
        if totals[r] == totals[c] {
            amps[r] * amps[c].conj()
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let tr = m.trace().re;
    m.unscale_mut(tr);
    DensityOperator::new(basis, m)
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// `(sum_i b†_i)^N |vac> / sqrt(L^N N!)` with amplitudes
/// `sqrt(multinomial(N; n_1..n_L) / L^N)`.
pub fn build_symmetric_state(n_sites: usize, n: usize) -> Result<StateVector> {
    let basis = Arc::new(FockBasis::fixed(n_sites, n)?);
    let ln_norm = ln_factorial(n) - n as f64 * (n_sites as f64).ln();
    let amps = DVector::from_iterator(
        basis.dim(),
        basis.states().map(|occ| {
            let ln_multi: f64 = occ.iter().map(|&k| ln_factorial(k as usize)).sum();
            Complex64::new((0.5 * (ln_norm - ln_multi)).exp(), 0.0)
        }),
    );
    StateVector::normalized(basis, amps)
}

/// Random element of the separable set: `sum_t p_t ⊗_i rho_i^(t)` with
/// Dirichlet(1,...,1) weights and every `rho_i^(t)` diagonal in the local
/// number basis with a uniformly drawn distribution over `0..=n_max`.
pub fn sample_separable_ssr_state(
    n_sites: usize,
    n_max: usize,
    n_terms: usize,
    seed: u64,
) -> Result<DensityOperator> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_separable_ssr_state_with(n_sites, n_max, n_terms, &mut rng)
}

pub fn sample_separable_ssr_state_with<R: Rng + ?Sized>(
    n_sites: usize,
    n_max: usize,
    n_terms: usize,
    rng: &mut R,
) -> Result<DensityOperator> {
    if n_terms == 0 {
        return Err(Error::arg("n_terms", "need at least one term"));
    }
    let weights = flat_dirichlet(n_terms, rng);
    let locals: Vec<Vec<Vec<f64>>> = (0..n_terms)
        .map(|_| {
            (0..n_sites)
                .map(|_| flat_dirichlet(n_max + 1, rng))
                .collect()
        })
        .collect();
    separable_from_parts(n_sites, n_max, &weights, &locals)
}

/// Builds `sum_t weights[t] ⊗_i diag(locals[t][i])`.
pub fn separable_from_parts(
    n_sites: usize,
    n_max: usize,
    weights: &[f64],
    locals: &[Vec<Vec<f64>>],
) -> Result<DensityOperator> {
    let basis = Arc::new(FockBasis::truncated(n_sites, n_max)?);
    let d = basis.dim();
    let mut m = DMatrix::<Complex64>::zeros(d, d);
    for (idx, occ) in basis.states().enumerate() {
        let p: f64 = weights
            .iter()
            .zip(locals)
            .map(|(w, term)| {
                w * occ
                    .iter()
                    .zip(term)
                    .map(|(&n, dist)| dist[n as usize])
                    .product::<f64>()
            })
            .sum();
        m[(idx, idx)] = Complex64::new(p, 0.0);
    }
    DensityOperator::new(basis, m)
}

/// Uniform draw from the probability simplex of dimension `n - 1`.
fn flat_dirichlet<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let draws: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|x| x / total).collect()
}

/// Success probability of revealing the hidden bit with a two-site resource
/// of definite particle number `N`:
/// `p = 1/4 sum_{n=1}^{N} |c_{n,N-n} + c_{n-1,N-n+1}|^2`.
pub fn data_hiding_success(state: &StateVector) -> Result<f64> {
    let basis = state.basis();
    if basis.n_sites() != 2 {
        return Err(Error::arg("state", "data hiding needs exactly two sites"));
    }
    let n = match basis.sector() {
        Sector::FixedParticles(n) => n,
        Sector::MaxOccupation(_) => {
            let mut totals = (0..basis.dim())
                .filter(|&i| state.amplitudes()[i].norm_sqr() > 1e-14)
                .map(|i| basis.total_particles(i));
            let first = totals.next().unwrap_or(0);
            if totals.any(|t| t != first) {
                return Err(Error::arg("state", "indefinite total particle number"));
            }
            first
        }
    };
    let c = |a: usize, b: usize| state.amplitude_of(&[a as u16, b as u16]);
    let sum: f64 = (1..=n)
        .map(|k| (c(k, n - k) + c(k - 1, n - k + 1)).norm_sqr())
        .sum();
    Ok(sum / 4.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn two_mode_psi_amplitudes() {
        let psi = build_two_mode_psi(0).unwrap();
        assert_eq!(psi.basis().dim(), 1);
        assert_eq!(psi.basis().state(0), &[0, 0]);
        let psi = build_two_mode_psi(3).unwrap();
        for a in psi.amplitudes().iter() {
            assert!((a - c(0.5)).norm() < 1e-15);
        }
        for n in 0..20 {
            assert!((build_two_mode_psi(n).unwrap().amplitudes().norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_state_amplitudes() {
        let s = build_symmetric_state(2, 1).unwrap();
        assert!((s.amplitude_of(&[1, 0]) - c(0.5f64.sqrt())).norm() < 1e-15);
        assert!((s.amplitude_of(&[0, 1]) - c(0.5f64.sqrt())).norm() < 1e-15);
        let s = build_symmetric_state(2, 4).unwrap();
        let binom = [1.0, 4.0, 6.0, 4.0, 1.0];
        for (n, b) in binom.iter().enumerate() {
            let expect = (b / 16.0f64).sqrt();
            assert!((s.amplitude_of(&[n as u16, 4 - n as u16]) - c(expect)).norm() < 1e-14);
        }
    }

    #[test]
    fn symmetric_state_is_permutation_invariant() {
        let s = build_symmetric_state(3, 4).unwrap();
        for occ in s.basis().states() {
            let a = s.amplitude_of(occ);
            let rotated = [occ[1], occ[2], occ[0]];
            let swapped = [occ[1], occ[0], occ[2]];
            assert!((a - s.amplitude_of(&rotated)).norm() < 1e-14);
            assert!((a - s.amplitude_of(&swapped)).norm() < 1e-14);
        }
    }

    #[test]
    fn coherent_mixture_properties() {
        let vac = build_coherent_mixture(c(0.0), 3).unwrap();
        assert!((vac.matrix()[(0, 0)] - c(1.0)).norm() < 1e-15);
        assert!((vac.trace() - c(1.0)).norm() < 1e-15);

        let rho = build_coherent_mixture(c(1.0), 12).unwrap();
        assert_eq!(rho.total_number_commutator_norm(), 0.0);
        assert!((rho.mean_particles() - 2.0).abs() < 1e-5);
        assert!(rho.local_number_commutator_norm(0) > 0.1);

        assert!(matches!(
            build_coherent_mixture(c(2.0), 6),
            Err(Error::Accuracy(_))
        ));
        let n = coherent_cutoff(c(2.0), 1e-6);
        assert!(build_coherent_mixture(c(2.0), n).is_ok());
    }

    #[test]
    fn one_body_dm_examples() {
        let basis = Arc::new(FockBasis::fixed(2, 2).unwrap());
        let mut amps = DVector::zeros(basis.dim());
        amps[basis.index_of(&[1, 1]).unwrap()] = c(1.0);
        let fock = StateVector::new(basis, amps).unwrap();
        let g = one_body_dm(&fock, &TWO_SITE_POSITIONS).unwrap();
        assert_eq!(g.matrix, DMatrix::identity(2, 2));

        let (l, n) = (3, 4);
        let sym = build_symmetric_state(l, n).unwrap();
        let pos = [[0, 0, 0], [1, 0, 0], [2, 0, 0]];
        let g = one_body_dm(&sym, &pos).unwrap();
        for v in g.matrix.iter() {
            assert!((v - c(n as f64 / l as f64)).norm() < 1e-12);
        }

        for n in 1..8usize {
            let psi = build_two_mode_psi(n).unwrap();
            let g = one_body_dm(&psi, &TWO_SITE_POSITIONS).unwrap();
            let expect: f64 = (0..n)
                .map(|k| ((k + 1) as f64).sqrt() * ((n - k) as f64).sqrt())
                .sum::<f64>()
                / (n + 1) as f64;
            assert!((g.matrix[(0, 1)] - c(expect)).norm() < 1e-12);
            // the same through the density-operator path
            let g2 = one_body_dm(&psi.to_density(), &TWO_SITE_POSITIONS).unwrap();
            assert!((&g.matrix - &g2.matrix).camax() < 1e-12);
        }
        assert!(one_body_dm(&sym, &pos[..2]).is_err());
    }

    #[test]
    fn separable_samples() {
        for seed in 0..20 {
            let rho = sample_separable_ssr_state(2, 3, 4, seed).unwrap();
            for i in 0..2 {
                assert_eq!(rho.local_number_commutator_norm(i), 0.0);
            }
            assert!(rho.in_separable_ssr_set(1e-12));
            assert!(rho.min_eigenvalue() >= -1e-10);
            assert!((rho.trace() - c(1.0)).norm() < 1e-10);
        }
        let a = sample_separable_ssr_state(2, 3, 3, 1).unwrap();
        let b = sample_separable_ssr_state(2, 3, 3, 2).unwrap();
        assert!(a.mix(&b, 0.3).unwrap().in_separable_ssr_set(1e-12));
        assert_eq!(
            sample_separable_ssr_state(3, 2, 5, 9).unwrap().matrix(),
            sample_separable_ssr_state(3, 2, 5, 9).unwrap().matrix()
        );
        assert!(sample_separable_ssr_state(2, 2, 0, 1).is_err());

        // single term with delta distributions is a product Fock state
        let locals = vec![vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]];
        let rho = separable_from_parts(2, 2, &[1.0], &locals).unwrap();
        let idx = rho.basis().index_of(&[1, 2]).unwrap();
        assert_eq!(rho.matrix()[(idx, idx)], c(1.0));
        assert_eq!(rho.matrix().iter().filter(|z| z.norm() > 0.0).count(), 1);

        assert!(!build_coherent_mixture(c(1.0), 12)
            .unwrap()
            .in_separable_ssr_set(1e-9));
    }

    #[test]
    fn data_hiding_examples() {
        let p1 = data_hiding_success(&build_symmetric_state(2, 1).unwrap()).unwrap();
        assert!((p1 - 0.5).abs() < 1e-15);
        let p2 = data_hiding_success(&build_symmetric_state(2, 2).unwrap()).unwrap();
        let expect = 0.5 * (0.5f64.sqrt() + 0.5).powi(2);
        assert!((p2 - expect).abs() < 1e-14);
        assert!((p2 - 0.72855).abs() < 1e-5);

        let mut prev = 0.0;
        for n in 1..=40 {
            let p = data_hiding_success(&build_symmetric_state(2, n).unwrap()).unwrap();
            assert!(p > prev);
            prev = p;
        }
        assert!(prev > 0.95 && prev <= 1.0);

        let mixed_n = build_coherent_product(c(1.0), 10).unwrap();
        assert!(data_hiding_success(&mixed_n).is_err());
        assert!(data_hiding_success(&build_symmetric_state(3, 2).unwrap()).is_err());
    }

    #[test]
    fn one_body_dm_csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.csv");
        let g = one_body_dm(&build_two_mode_psi(3).unwrap(), &TWO_SITE_POSITIONS).unwrap();
        g.write_csv(&path).unwrap();
        let back = OneBodyDM::read_csv(&path, TWO_SITE_POSITIONS.to_vec()).unwrap();
        assert!((&g.matrix - &back.matrix).camax() < 1e-15);
    }

    proptest! {
        #[test]
        fn one_body_dm_is_hermitian_psd(seed in any::<u64>(), l in 1usize..4, n in 0usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let basis = Arc::new(FockBasis::fixed(l, n).unwrap());
            let psi = StateVector::random(basis, &mut rng);
            let pos: Vec<Site> = (0..l as i32).map(|x| [x, 0, 0]).collect();
            let g = one_body_dm(&psi, &pos).unwrap();
            prop_assert!(g.hermiticity_residual() < 1e-12);
            prop_assert!(g.min_eigenvalue() > -1e-12);
            prop_assert!((g.n_total() - n as f64).abs() < 1e-12);
        }
    }
}
