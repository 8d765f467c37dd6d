//! Bose–Hubbard model in a fixed particle-number sector.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::FockBasis;
use crate::states::{one_body_dm, OneBodyDM, Site, StateVector};

/// Largest sector diagonalized densely.
pub const DENSE_LIMIT: usize = 1500;
/// Largest sector admitted for full-spectrum thermal averages.
pub const THERMAL_LIMIT: usize = 5000;

/// Site coordinates together with the tunnelling bonds between them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    positions: Vec<Site>,
    bonds: Vec<(usize, usize)>,
}

impl Geometry {
    /// Open chain along x starting at the origin.
    pub fn chain(n_sites: usize) -> Result<Self> {
        if n_sites == 0 {
            return Err(Error::arg("L", "need at least one site"));
        }
        let positions = (0..n_sites as i32).map(|x| [x, 0, 0]).collect();
        let bonds = (1..n_sites).map(|i| (i - 1, i)).collect();
        Ok(Self { positions, bonds })
    }

    /// Periodic chain; for `L <= 2` this is the open chain.
    pub fn ring(n_sites: usize) -> Result<Self> {
        let mut g = Self::chain(n_sites)?;
        if n_sites > 2 {
            g.bonds.push((n_sites - 1, 0));
        }
        Ok(g)
    }

    /// Arbitrary integer coordinates; bonds join sites at unit distance.
    pub fn from_positions(positions: Vec<Site>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::arg("positions", "need at least one site"));
        }
        for (i, p) in positions.iter().enumerate() {
            if positions[..i].contains(p) {
                return Err(Error::arg("positions", format!("duplicate site {p:?}")));
            }
        }
        let mut bonds = Vec::new();
        for i in 0..positions.len() {
            for j in i + 1..positions.len() {
                let d: i64 = (0..3)
                    .map(|c| (positions[i][c] as i64 - positions[j][c] as i64).pow(2))
                    .sum();
                if d == 1 {
                    bonds.push((i, j));
                }
            }
        }
        Ok(Self { positions, bonds })
    }

    /// Explicit bond list.
    pub fn with_bonds(positions: Vec<Site>, bonds: Vec<(usize, usize)>) -> Result<Self> {
        let n = positions.len();
        if n == 0 {
            return Err(Error::arg("positions", "need at least one site"));
        }
        if bonds.iter().any(|&(i, j)| i >= n || j >= n || i == j) {
            return Err(Error::arg(
                "bonds",
                "bond refers to a missing site or is a self-loop",
            ));
        }
        Ok(Self { positions, bonds })
    }

    pub fn n_sites(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[Site] {
        &self.positions
    }

    pub fn bonds(&self) -> &[(usize, usize)] {
        &self.bonds
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoseHubbardParams {
    pub tunneling_j: f64,
    pub interaction_u: f64,
    pub n_particles: usize,
    pub geometry: Geometry,
    /// Energy-equivalent temperature in the same units as `J` and `U`.
    pub temperature: Option<f64>,
}

impl BoseHubbardParams {
    pub fn new(
        tunneling_j: f64,
        interaction_u: f64,
        n_particles: usize,
        geometry: Geometry,
    ) -> Result<Self> {
        let p = Self {
            tunneling_j,
            interaction_u,
            n_particles,
            geometry,
            temperature: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tunneling_j >= 0.0 && self.tunneling_j.is_finite()) {
            return Err(Error::arg("J", "must be finite and >= 0"));
        }
        if !(self.interaction_u >= 0.0 && self.interaction_u.is_finite()) {
            return Err(Error::arg("U", "must be finite and >= 0"));
        }
        if let Some(t) = self.temperature {
            if !(t >= 0.0) {
                return Err(Error::arg("temperature", "must be >= 0"));
            }
        }
        Ok(())
    }

    pub fn n_sites(&self) -> usize {
        self.geometry.n_sites()
    }
}

/// Sparse real Hamiltonian on a fixed-N basis.
#[derive(Debug, Clone)]
pub struct Hamiltonian {
    basis: Arc<FockBasis>,
    diagonal: Vec<f64>,
    /// Off-diagonal `(row, col, value)` entries, both triangles stored.
    hops: Vec<(usize, usize, f64)>,
}

impl Hamiltonian {
    pub fn build(p: &BoseHubbardParams) -> Result<Self> {
        p.validate()?;
        let basis = Arc::new(FockBasis::fixed(p.n_sites(), p.n_particles)?);
        Ok(Self::on_basis(p, basis))
    }

    fn on_basis(p: &BoseHubbardParams, basis: Arc<FockBasis>) -> Self {
        let diagonal = basis
            .states()
            .map(|occ| {
                0.5 * p.interaction_u
                    * occ
                        .iter()
                        .map(|&n| n as f64 * (n as f64 - 1.0))
                        .sum::<f64>()
            })
            .collect();
        let mut hops = Vec::new();
        if p.tunneling_j > 0.0 {
            for m in 0..basis.dim() {
                for &(i, j) in p.geometry.bonds() {
                    for (a, b) in [(i, j), (j, i)] {
                        if let Some((t, amp)) = basis.hop(m, a, b) {
                            hops.push((t, m, -p.tunneling_j * amp));
                        }
                    }
                }
            }
        }
        Self {
            basis,
            diagonal,
            hops,
        }
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::from_iterator(
            v.len(),
            self.diagonal.iter().zip(v.iter()).map(|(d, x)| d * x),
        );
        for &(r, c, h) in &self.hops {
            out[r] += h * v[c];
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::from_diagonal(&DVector::from_column_slice(&self.diagonal));
        for &(r, c, h) in &self.hops {
            m[(r, c)] += h;
        }
        m
    }

    /// `<v|H|v> / <v|v>`.
    pub fn rayleigh_quotient(&self, v: &DVector<f64>) -> f64 {
        v.dot(&self.apply(v)) / v.norm_squared()
    }
}

/// Ground state and its energy.
#[derive(Debug, Clone)]
pub struct GroundState {
    pub energy: f64,
    pub state: StateVector,
}

/// Lowest eigenvector of the Bose–Hubbard Hamiltonian, with the first
/// nonzero amplitude made positive. A degenerate ground space is resolved
/// by projecting the lowest-index basis vector that has weight in it.
pub fn bose_hubbard_ground_state(p: &BoseHubbardParams) -> Result<GroundState> {
    let h = Hamiltonian::build(p)?;
    let (energy, vector) = if p.tunneling_j == 0.0 {
        decoupled_ground(&h)
    } else if h.dim() <= DENSE_LIMIT {
        dense_ground(&h)?
    } else {
        lanczos_ground(&h)?
    };
    let vector = fix_sign(vector);
    let amps = vector.map(|x| Complex64::new(x, 0.0));
    Ok(GroundState {
        energy,
        state: StateVector::normalized(h.basis.clone(), amps)?,
    })
}

fn fix_sign(mut v: DVector<f64>) -> DVector<f64> {
    let scale = v.amax();
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-12 * scale) {
        if *first < 0.0 {
            v.neg_mut();
        }
    }
    v
}

fn decoupled_ground(h: &Hamiltonian) -> (f64, DVector<f64>) {
    let (idx, e) =
        h.diagonal
            .iter()
            .copied()
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |best, (i, e)| if e < best.1 { (i, e) } else { best },
            );
    let mut v = DVector::zeros(h.dim());
    v[idx] = 1.0;
    (e, v)
}

fn dense_ground(h: &Hamiltonian) -> Result<(f64, DVector<f64>)> {
    let eig = SymmetricEigen::try_new(h.to_dense(), 1e-14, 0)
        .ok_or_else(|| Error::Numerical("dense eigensolver did not converge".into()))?;
    let e0 = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let tol = 1e-10 * (1.0 + e0.abs());
    let ground: Vec<usize> = (0..h.dim())
        .filter(|&k| eig.eigenvalues[k] <= e0 + tol)
        .collect();
    if ground.len() == 1 {
        return Ok((e0, eig.eigenvectors.column(ground[0]).into_owned()));
    }
    for basis_index in 0..h.dim() {
        let mut proj = DVector::zeros(h.dim());
        for &k in &ground {
            let col = eig.eigenvectors.column(k);
            proj += col * col[basis_index];
        }
        if proj.norm() > 1e-8 {
            return Ok((e0, proj.normalize()));
        }
    }
    Err(Error::Numerical("empty ground space".into()))
}

/// Lanczos with full reorthogonalization, restarted from the current Ritz
/// vector until the residual falls below tolerance.
fn lanczos_ground(h: &Hamiltonian) -> Result<(f64, DVector<f64>)> {
    let n = h.dim();
    let krylov = n.min(200);
    // Uniform positive start overlaps the Perron ground state.
    let mut start = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    for _restart in 0..50 {
        let mut basis: Vec<DVector<f64>> = Vec::with_capacity(krylov);
        let mut alpha = Vec::with_capacity(krylov);
        let mut beta: Vec<f64> = Vec::with_capacity(krylov);
        basis.push(start.clone());
        let mut residual_beta = 0.0;
        for k in 0..krylov {
            let mut w = h.apply(&basis[k]);
            let a = basis[k].dot(&w);
            alpha.push(a);
            for q in &basis {
                let c = q.dot(&w);
                w.axpy(-c, q, 1.0);
            }
            for q in &basis {
                let c = q.dot(&w);
                w.axpy(-c, q, 1.0);
            }
            let b = w.norm();
            residual_beta = b;
            if k + 1 == krylov || b < 1e-13 {
                break;
            }
            beta.push(b);
            basis.push(w / b);
        }
        let m = alpha.len();
        let t = DMatrix::from_fn(m, m, |r, c| {
            if r == c {
                alpha[r]
            } else if r + 1 == c {
                beta[r]
            } else if c + 1 == r {
                beta[c]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::try_new(t, 1e-15, 0)
            .ok_or_else(|| Error::Numerical("tridiagonal eigensolver did not converge".into()))?;
        let (kmin, e0) =
            eig.eigenvalues
                .iter()
                .copied()
                .enumerate()
                .fold(
                    (0, f64::INFINITY),
                    |best, (i, e)| if e < best.1 { (i, e) } else { best },
                );
        let y = eig.eigenvectors.column(kmin);
        let mut ritz = DVector::zeros(n);
        for (q, c) in basis.iter().zip(y.iter()) {
            ritz.axpy(*c, q, 1.0);
        }
        let ritz = ritz.normalize();
        let resid = (h.apply(&ritz) - &ritz * e0).norm();
        let scale = 1.0 + e0.abs();
        if resid < 1e-10 * scale || residual_beta * y[m - 1].abs() < 1e-12 * scale {
            return Ok((h.rayleigh_quotient(&ritz), ritz));
        }
        start = ritz;
    }
    Err(Error::Numerical("Lanczos did not converge".into()))
}

/// One-body density matrix of the canonical Gibbs state `exp(-H/T)/Z` in the
/// fixed-N sector. `T = 0` gives the ground state.
pub fn thermal_one_body_dm(p: &BoseHubbardParams, temperature: f64) -> Result<OneBodyDM> {
    if !(temperature >= 0.0) {
        return Err(Error::arg("temperature", "must be >= 0"));
    }
    p.validate()?;
    let basis = Arc::new(FockBasis::fixed(p.n_sites(), p.n_particles)?);
    if basis.dim() > THERMAL_LIMIT {
        return Err(Error::Capacity {
            what: "thermal sector dimension",
            required: basis.dim() as u128,
            limit: THERMAL_LIMIT as u128,
        });
    }
    let positions = p.geometry.positions();
    if temperature == 0.0 {
        return one_body_dm(&bose_hubbard_ground_state(p)?.state, positions);
    }
    let h = Hamiltonian::on_basis(p, basis.clone());
    let eig = SymmetricEigen::try_new(h.to_dense(), 1e-14, 0)
        .ok_or_else(|| Error::Numerical("dense eigensolver did not converge".into()))?;
    let e0 = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|e| (-(e - e0) / temperature).exp())
        .collect();
    let z: f64 = weights.iter().sum();
    let l = p.n_sites();
    let mut g = DMatrix::<Complex64>::zeros(l, l);
    for (k, w) in weights.iter().enumerate() {
        let p_k = w / z;
        if p_k < 1e-18 {
            continue;
        }
        let amps = eig.eigenvectors.column(k).map(|x| Complex64::new(x, 0.0));
        let psi = StateVector::normalized(basis.clone(), amps)?;
        g += one_body_dm(&psi, positions)?.matrix.scale(p_k);
    }
    OneBodyDM::new(g, positions.to_vec())
}
