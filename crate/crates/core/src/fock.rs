//! Occupation-number bases for bosons on `L` sites.

use crate::error::{Error, Result};

/// Default cap on basis dimension.
pub const DEFAULT_DIMENSION_CAP: usize = 200_000;

/// Which part of Fock space a basis spans.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sector {
    /// Exactly `N` particles in total.
    FixedParticles(usize),
    /// At most `n_max` particles on each site, any total.
    MaxOccupation(usize),
}

/// Lexicographically ordered occupation tuples `(n_1, ..., n_L)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FockBasis {
    n_sites: usize,
    sector: Sector,
    /// Row-major, `n_sites` entries per state, ascending lexicographic order.
    occupations: Vec<u16>,
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

impl FockBasis {
    /// Fixed-`N` sector, dimension `C(N+L-1, L-1)`.
    pub fn fixed(n_sites: usize, n_particles: usize) -> Result<Self> {
        Self::fixed_with_cap(n_sites, n_particles, DEFAULT_DIMENSION_CAP)
    }

    pub fn fixed_with_cap(n_sites: usize, n_particles: usize, cap: usize) -> Result<Self> {
        if n_sites == 0 {
            return Err(Error::arg("sites", "need at least one site"));
        }
        if n_particles > u16::MAX as usize {
            return Err(Error::arg("particles", "too many particles"));
        }
        let dim = binomial((n_particles + n_sites - 1) as u128, (n_sites - 1) as u128);
        if dim > cap as u128 {
            return Err(Error::Capacity {
                what: "fixed-N Fock basis",
                required: dim,
                limit: cap as u128,
            });
        }
        let mut occupations = Vec::with_capacity(dim as usize * n_sites);
        let mut current = vec![0u16; n_sites];
        enumerate_fixed(&mut current, 0, n_particles as u16, &mut occupations);
        Ok(Self {
            n_sites,
            sector: Sector::FixedParticles(n_particles),
            occupations,
        })
    }

    /// All states with `0 <= n_i <= n_max`, dimension `(n_max+1)^L`.
    pub fn truncated(n_sites: usize, n_max: usize) -> Result<Self> {
        if n_sites == 0 {
            return Err(Error::arg("sites", "need at least one site"));
        }
        if n_max > u16::MAX as usize - 1 {
            return Err(Error::arg("n_max", "too large"));
        }
        let dim = (n_max as u128 + 1).saturating_pow(n_sites as u32);
        if dim > DEFAULT_DIMENSION_CAP as u128 {
            return Err(Error::Capacity {
                what: "truncated Fock basis",
                required: dim,
                limit: DEFAULT_DIMENSION_CAP as u128,
            });
        }
        let mut occupations = Vec::with_capacity(dim as usize * n_sites);
        let mut current = vec![0u16; n_sites];
        loop {
            occupations.extend_from_slice(&current);
            // odometer, last site fastest
            let mut site = n_sites;
            loop {
                if site == 0 {
                    return Ok(Self {
                        n_sites,
                        sector: Sector::MaxOccupation(n_max),
                        occupations,
                    });
                }
                site -= 1;
                if (current[site] as usize) < n_max {
                    current[site] += 1;
                    break;
                }
                current[site] = 0;
            }
        }
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn sector(&self) -> Sector {
        self.sector
    }

    pub fn dim(&self) -> usize {
        self.occupations.len() / self.n_sites
    }

    pub fn state(&self, index: usize) -> &[u16] {
        &self.occupations[index * self.n_sites..(index + 1) * self.n_sites]
    }

    pub fn states(&self) -> impl Iterator<Item = &[u16]> {
        self.occupations.chunks_exact(self.n_sites)
    }

    pub fn index_of(&self, occupation: &[u16]) -> Option<usize> {
        if occupation.len() != self.n_sites {
            return None;
        }
        let (mut lo, mut hi) = (0usize, self.dim());
        while lo < hi {
            let mid = (lo + hi) / 2;
            match self.state(mid).cmp(occupation) {
                std::cmp::Ordering::Less => lo = mid + 1,
                std::cmp::Ordering::Greater => hi = mid,
                std::cmp::Ordering::Equal => return Some(mid),
            }
        }
        None
    }

    /// Largest occupation any site can hold in this basis.
    pub fn max_site_occupation(&self) -> usize {
        match self.sector {
            Sector::FixedParticles(n) => n,
            Sector::MaxOccupation(n) => n,
        }
    }

    /// Index of `b†_i b_j |state>` and its amplitude `sqrt((n_i + 1) n_j)`
    /// for `i != j`, if the target is inside the basis.
    pub fn hop(&self, index: usize, i: usize, j: usize) -> Option<(usize, f64)> {
        debug_assert_ne!(i, j);
        let src = self.state(index);
        if src[j] == 0 {
            return None;
        }
        let mut target = src.to_vec();
        target[j] -= 1;
        target[i] += 1;
        let amp = ((src[i] as f64 + 1.0) * src[j] as f64).sqrt();
        self.index_of(&target).map(|t| (t, amp))
    }

    pub fn total_particles(&self, index: usize) -> usize {
        self.state(index).iter().map(|&n| n as usize).sum()
    }
}

fn enumerate_fixed(current: &mut [u16], site: usize, remaining: u16, out: &mut Vec<u16>) {
    if site == current.len() - 1 {
        current[site] = remaining;
        out.extend_from_slice(current);
        return;
    }
    for n in 0..=remaining {
        current[site] = n;
        enumerate_fixed(current, site + 1, remaining - n, out);
    }
    current[site] = 0;
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_force_count(l: usize, n: usize) -> usize {
        let mut count = 0;
        let total = (n + 1).pow(l as u32);
        for code in 0..total {
            let mut c = code;
            let mut sum = 0;
            for _ in 0..l {
                sum += c % (n + 1);
                c /= n + 1;
            }
            if sum == n {
                count += 1;
            }
        }
        count
    }

    #[test]
    fn small_dimensions() {
        assert_eq!(FockBasis::fixed(1, 5).unwrap().dim(), 1);
        assert_eq!(
            FockBasis::fixed(3, 3).unwrap().dim(),
            brute_force_count(3, 3)
        );
        assert_eq!(FockBasis::fixed(3, 3).unwrap().dim(), 10);
        let vac = FockBasis::fixed(2, 0).unwrap();
        assert_eq!(vac.dim(), 1);
        assert_eq!(vac.state(0), &[0, 0]);
        assert_eq!(FockBasis::truncated(2, 3).unwrap().dim(), 16);
    }

    #[test]
    fn capacity_is_enforced() {
        let err = FockBasis::fixed(12, 12).unwrap_err();
        assert!(matches!(err, Error::Capacity { .. }));
        assert!(FockBasis::fixed_with_cap(3, 3, 9).is_err());
        assert!(FockBasis::fixed(0, 1).is_err());
    }

    #[test]
    fn hop_amplitudes() {
        let b = FockBasis::fixed(2, 2).unwrap();
        let i11 = b.index_of(&[1, 1]).unwrap();
        let (t, amp) = b.hop(i11, 0, 1).unwrap();
        assert_eq!(b.state(t), &[2, 0]);
        assert!((amp - 2f64.sqrt()).abs() < 1e-15);
        let i20 = b.index_of(&[2, 0]).unwrap();
        assert!(b.hop(i20, 0, 1).is_none());
        let tb = FockBasis::truncated(2, 1).unwrap();
        let i11 = tb.index_of(&[1, 1]).unwrap();
        assert!(tb.hop(i11, 0, 1).is_none());
    }

    proptest! {
        #[test]
        fn index_roundtrip_and_ordering(l in 1usize..5, n in 0usize..6) {
            let b = FockBasis::fixed(l, n).unwrap();
            prop_assert_eq!(b.dim(), brute_force_count(l, n));
            for idx in 0..b.dim() {
                prop_assert_eq!(b.index_of(b.state(idx)), Some(idx));
                prop_assert_eq!(b.total_particles(idx), n);
                if idx > 0 {
                    prop_assert!(b.state(idx - 1) < b.state(idx));
                }
            }
        }

        #[test]
        fn truncated_roundtrip(l in 1usize..4, n_max in 0usize..4) {
            let b = FockBasis::truncated(l, n_max).unwrap();
            for idx in 0..b.dim() {
                prop_assert_eq!(b.index_of(b.state(idx)), Some(idx));
            }
        }
    }
}
