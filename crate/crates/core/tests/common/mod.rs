//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use lattice_entanglement::bandstructure::WannierTable;
use lattice_entanglement::hubbard::{bose_hubbard_ground_state, BoseHubbardParams, Geometry};
use lattice_entanglement::states::{one_body_dm, OneBodyDM, Site, StateVector};
use nalgebra::DMatrix;
use num_complex::Complex64;

/// Dense annihilation operators on the full product space with occupations
/// `0..=n_max` per site, little-endian site order.
pub struct ProductSpace {
    pub n_sites: usize,
    pub n_max: usize,
    pub annihilators: Vec<DMatrix<Complex64>>,
}

impl ProductSpace {
    pub fn new(n_sites: usize, n_max: usize) -> Self {
        let d = n_max + 1;
        let dim = d.pow(n_sites as u32);
        let annihilators = (0..n_sites)
            .map(|site| {
                let stride = d.pow(site as u32);
                let mut b = DMatrix::zeros(dim, dim);
                for idx in 0..dim {
                    let n = (idx / stride) % d;
                    if n > 0 {
                        b[(idx - stride, idx)] = Complex64::new((n as f64).sqrt(), 0.0);
                    }
                }
                b
            })
            .collect();
        Self {
            n_sites,
            n_max,
            annihilators,
        }
    }

    pub fn dim(&self) -> usize {
        (self.n_max + 1).pow(self.n_sites as u32)
    }

    pub fn index_of(&self, occ: &[u16]) -> usize {
        occ.iter()
            .enumerate()
            .map(|(s, &n)| n as usize * (self.n_max + 1).pow(s as u32))
            .sum()
    }

    /// Embeds a library state by matching occupation tuples.
    pub fn embed(&self, psi: &StateVector) -> nalgebra::DVector<Complex64> {
        let mut v = nalgebra::DVector::zeros(self.dim());
        for (i, occ) in psi.basis().states().enumerate() {
            v[self.index_of(occ)] = psi.amplitudes()[i];
        }
        v
    }

    /// `<psi| sum_{i_z = j_z} e^{i k.(i-j)} e^{i pi^2 (j^2 - i^2)/tau} b_i^dag b_j |psi>`.
    pub fn momentum_expectation(
        &self,
        psi: &nalgebra::DVector<Complex64>,
        positions: &[Site],
        k: [f64; 2],
        tau: f64,
    ) -> Complex64 {
        let dim = self.dim();
        let mut op = DMatrix::<Complex64>::zeros(dim, dim);
        let r2 = |p: &Site| (p[0] * p[0] + p[1] * p[1]) as f64;
        for (i, pi) in positions.iter().enumerate() {
            for (j, pj) in positions.iter().enumerate() {
                if pi[2] != pj[2] {
                    continue;
                }
                let phase = k[0] * (pi[0] - pj[0]) as f64
                    + k[1] * (pi[1] - pj[1]) as f64
                    + if tau.is_finite() {
                        PI * PI * (r2(pj) - r2(pi)) / tau
                    } else {
                        0.0
                    };
                op += (self.annihilators[i].adjoint() * &self.annihilators[j])
                    * Complex64::from_polar(1.0, phase);
            }
        }
        psi.dotc(&(op * psi))
    }

    pub fn number_expectation(&self, psi: &nalgebra::DVector<Complex64>) -> f64 {
        self.annihilators
            .iter()
            .map(|b| psi.dotc(&(b.adjoint() * b * psi)).re)
            .sum()
    }

    pub fn correlator(&self, psi: &nalgebra::DVector<Complex64>, i: usize, j: usize) -> Complex64 {
        psi.dotc(&(self.annihilators[i].adjoint() * &self.annihilators[j] * psi))
    }
}

/// `w~(phi)` straight from the stored real-space samples by Simpson's rule.
pub fn wtilde_simpson(w: &WannierTable, phi: f64) -> Complex64 {
    let grid = &w.real_grid;
    let n = grid.len;
    assert!(n % 2 == 1);
    let mut acc = Complex64::new(0.0, 0.0);
    for (m, &v) in w.w0_samples.iter().enumerate() {
        let coef = if m == 0 || m == n - 1 {
            1.0
        } else if m % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += Complex64::from_polar(coef * v, -2.0 * PI * phi * grid.value(m));
    }
    acc * (grid.step / 3.0) / (2.0 * PI).sqrt()
}

/// Spectral form of the expanded orbital,
/// `g_i(x) = sqrt(2 pi) int dphi w~(phi) e^{2 pi i phi (x - i)} e^{-i tau phi^2}`,
/// by Gauss-Legendre panels narrow enough to resolve the chirp at the ends.
pub struct SpectralPropagator {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    wtilde: Vec<Complex64>,
    tau: f64,
}

impl SpectralPropagator {
    pub fn new(w: &WannierTable, tau: f64, half_width: f64, panels: usize, order: usize) -> Self {
        let rule = GaussLegendre::new(NonZeroUsize::new(order).unwrap());
        let width = 2.0 * half_width / panels as f64;
        let mut nodes = Vec::with_capacity(panels * order);
        let mut weights = Vec::with_capacity(panels * order);
        for p in 0..panels {
            let a = -half_width + p as f64 * width;
            for &(x, wt) in rule.as_node_weight_pairs() {
                nodes.push(a + 0.5 * width * (x + 1.0));
                weights.push(0.5 * width * wt);
            }
        }
        let wtilde = nodes.iter().map(|&phi| wtilde_simpson(w, phi)).collect();
        Self {
            nodes,
            weights,
            wtilde,
            tau,
        }
    }

    pub fn eval(&self, site: i32, x: f64) -> Complex64 {
        let d = x - site as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for ((&phi, &wt), &wt_phi) in self.nodes.iter().zip(&self.weights).zip(&self.wtilde) {
            acc += wt_phi * Complex64::from_polar(wt, 2.0 * PI * phi * d - self.tau * phi * phi);
        }
        acc * (2.0 * PI).sqrt()
    }
}

/// Two sites share one bond; three or more close into a periodic ring so the
/// Hamiltonian is translation invariant.
pub fn ed_geometry(l: usize) -> Geometry {
    if l < 3 {
        Geometry::chain(l).unwrap()
    } else {
        Geometry::ring(l).unwrap()
    }
}

pub fn ground_dm(geometry: &Geometry, n: usize, u_over_j: f64) -> OneBodyDM {
    let p = BoseHubbardParams::new(1.0, u_over_j, n, geometry.clone()).unwrap();
    let gs = bose_hubbard_ground_state(&p).unwrap();
    one_body_dm(&gs.state, geometry.positions()).unwrap()
}

/// Ground-state one-body matrix on [`ed_geometry`].
pub fn ed_ground_dm(l: usize, n: usize, u_over_j: f64) -> OneBodyDM {
    ground_dm(&ed_geometry(l), n, u_over_j)
}

/// Ground-state one-body matrix of `L` sites on an open chain along x.
pub fn chain_ground_dm(l: usize, n: usize, u_over_j: f64) -> OneBodyDM {
    let geometry = Geometry::chain(l).unwrap();
    let p = BoseHubbardParams::new(1.0, u_over_j, n, geometry.clone()).unwrap();
    let gs = bose_hubbard_ground_state(&p).unwrap();
    one_body_dm(&gs.state, geometry.positions()).unwrap()
}
