use crate::error::{Error, Result};

/// Largest chain representable as bit patterns without exhausting memory.
/// Full-space propagation is capped much lower by the experiment drivers.
const MAX_SITES: usize = 26;

/// Ordered basis of spin product states encoded as bit patterns.
///
/// Bit `j - 1` of a pattern holds the state of 1-based site `j`: set means
/// up. Patterns are stored in ascending numeric order, either over the full
/// 2^n space or restricted to one magnetization sector m = n_up - n/2.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProductBasis {
    n: usize,
    sector: Option<i32>,
    states: Vec<u64>,
}

impl ProductBasis {
    /// Full 2^n product space.
    pub fn full(n: usize) -> Result<Self> {
        Self::check_sites(n)?;
        let dim = 1u64 << n;
        Ok(ProductBasis {
            n,
            sector: None,
            states: (0..dim).collect(),
        })
    }

    /// Fixed-magnetization sector with S_z eigenvalue `m` (integer for the
    /// even site counts this crate works with).
    pub fn sector(n: usize, m: i32) -> Result<Self> {
        Self::check_sites(n)?;
        let n_up = m + n as i32 / 2;
        if n_up < 0 || n_up > n as i32 {
            return Err(Error::SectorRange { m, n });
        }
        let n_up = n_up as u32;
        let states: Vec<u64> = (0..1u64 << n).filter(|p| p.count_ones() == n_up).collect();
        Ok(ProductBasis {
            n,
            sector: Some(m),
            states,
        })
    }

    fn check_sites(n: usize) -> Result<()> {
        if n == 0 || n > MAX_SITES {
            return Err(Error::SiteCount { n });
        }
        Ok(())
    }

    pub fn n_sites(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    /// Sector magnetization, or None for the full space.
    pub fn sector_m(&self) -> Option<i32> {
        self.sector
    }

    pub fn states(&self) -> &[u64] {
        &self.states
    }

    pub fn state(&self, idx: usize) -> u64 {
        self.states[idx]
    }

    /// Index of a bit pattern, by binary search over the ordered states.
    pub fn index_of(&self, pattern: u64) -> Option<usize> {
        match self.sector {
            // Full space: the pattern is its own index.
            None => {
                if pattern < self.states.len() as u64 {
                    Some(pattern as usize)
                } else {
                    None
                }
            }
            Some(_) => self.states.binary_search(&pattern).ok(),
        }
    }

    /// Magnetization of one pattern: n_up - n/2.
    pub fn magnetization_of(&self, pattern: u64) -> i32 {
        pattern.count_ones() as i32 - self.n as i32 / 2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_basis_is_identity_indexed() {
        let b = ProductBasis::full(4).unwrap();
        assert_eq!(b.dim(), 16);
        for i in 0..16 {
            assert_eq!(b.state(i), i as u64);
            assert_eq!(b.index_of(i as u64), Some(i));
        }
    }

    #[test]
    fn sector_dimensions_are_binomials() {
        let b = ProductBasis::sector(6, 0).unwrap();
        assert_eq!(b.dim(), 20);
        let b = ProductBasis::sector(6, 2).unwrap();
        assert_eq!(b.dim(), 6);
        let b = ProductBasis::sector(6, 3).unwrap();
        assert_eq!(b.dim(), 1);
        assert_eq!(b.state(0), 0b111111);
    }

    #[test]
    fn sector_membership_and_lookup_agree() {
        let b = ProductBasis::sector(6, -1).unwrap();
        for (i, &p) in b.states().iter().enumerate() {
            assert_eq!(p.count_ones(), 2);
            assert_eq!(b.index_of(p), Some(i));
            assert_eq!(b.magnetization_of(p), -1);
        }
        // A pattern from another sector is absent.
        assert_eq!(b.index_of(0b111), None);
    }

    #[test]
    fn rejects_out_of_range_sectors_and_sizes() {
        assert!(ProductBasis::sector(6, 4).is_err());
        assert!(ProductBasis::sector(6, -4).is_err());
        assert!(ProductBasis::full(0).is_err());
        assert!(ProductBasis::full(27).is_err());
    }

    #[test]
    fn states_are_strictly_ascending() {
        let b = ProductBasis::sector(8, 1).unwrap();
        assert!(b.states().windows(2).all(|w| w[0] < w[1]));
    }
}
