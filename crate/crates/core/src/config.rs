use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Chain boundary condition. Open is the primary geometry; periodic exists
/// for timescale comparisons against ring-coupling setups.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    Open,
    Periodic,
}

/// Validated parameters of the driven Heisenberg chain.
///
/// Units: `j_se` sets the energy scale, times are reported in `1/j_se`.
/// Site indices are 1-based in all phase formulas, so the drive on site `j`
/// carries the phase `phi * j - phi0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChainConfig {
    n: usize,
    j_se: f64,
    omega: f64,
    phi: f64,
    phi0: f64,
    boundary: Boundary,
}

/// Wrapped distance of `phi` from the nearest multiple of 2*pi.
fn uniform_phase_distance(phi: f64) -> f64 {
    let r = phi.rem_euclid(2.0 * PI);
    r.min(2.0 * PI - r)
}

impl ChainConfig {
    /// Offset phase that centers the drive pattern on the middle of the
    /// chain; it makes the split coupling coefficients real.
    pub fn default_phi0(n: usize, phi: f64) -> f64 {
        (n as f64 + 1.0) * phi / 2.0
    }

    /// Build a validated open-boundary configuration with the default
    /// offset phase.
    pub fn new(n: usize, j_se: f64, omega: f64, phi: f64) -> Result<Self> {
        if n < 4 || n % 2 != 0 {
            return Err(Error::SiteCount { n });
        }
        Self::build(n, j_se, omega, phi)
    }

    /// Two-site configuration for test scaffolding. The production chain
    /// starts at four sites; two sites leave a single bond whose spectrum
    /// is checkable by hand.
    pub fn two_site_test(j_se: f64, omega: f64, phi: f64) -> Result<Self> {
        Self::build(2, j_se, omega, phi)
    }

    fn build(n: usize, j_se: f64, omega: f64, phi: f64) -> Result<Self> {
        if j_se == 0.0 || !j_se.is_finite() {
            return Err(Error::CouplingRange {
                name: "j_se",
                value: j_se,
                need: "finite and nonzero",
            });
        }
        if !(omega >= 0.0) || !omega.is_finite() {
            return Err(Error::CouplingRange {
                name: "omega",
                value: omega,
                need: "finite and non-negative",
            });
        }
        if !phi.is_finite() {
            return Err(Error::CouplingRange {
                name: "phi",
                value: phi,
                need: "finite",
            });
        }
        if omega > 0.0 && uniform_phase_distance(phi) < 1e-12 {
            return Err(Error::UniformPhase { phi });
        }
        Ok(ChainConfig {
            n,
            j_se,
            omega,
            phi,
            phi0: Self::default_phi0(n, phi),
            boundary: Boundary::Open,
        })
    }

    /// Replace the offset phase. The default keeps the effective couplings
    /// real; other values rotate the planar twisting axis.
    pub fn with_phi0(mut self, phi0: f64) -> Self {
        self.phi0 = phi0;
        self
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn j_se(&self) -> f64 {
        self.j_se
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn phi0(&self) -> f64 {
        self.phi0
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// True when phi sits on the commensurate grid 2*pi*k/n within `tol`
    /// of the nearest integer k (k judged after reduction mod n, k != 0).
    pub fn commensurate_index(&self, tol: f64) -> Option<usize> {
        let x = self.phi * self.n as f64 / (2.0 * PI);
        let k = x.round();
        if (x - k).abs() > tol {
            return None;
        }
        let k = (k as i64).rem_euclid(self.n as i64) as usize;
        if k == 0 {
            None
        } else {
            Some(k)
        }
    }

    /// Energy gap |E_1| of the slowest standing wave, the reference used to
    /// express drive strengths. Computed as 2 |j_se| sin^2(pi / (2n)).
    pub fn first_magnon_gap(&self) -> f64 {
        let s = (PI / (2.0 * self.n as f64)).sin();
        2.0 * self.j_se.abs() * s * s
    }

    /// Drive phase on 1-based site `j`, relative to the offset.
    pub fn site_phase(&self, j: usize) -> f64 {
        self.phi * j as f64 - self.phi0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_even_counts_from_four() {
        assert!(ChainConfig::new(4, 1.0, 0.1, PI).is_ok());
        assert!(ChainConfig::new(100, 1.0, 0.0, PI).is_ok());
    }

    #[test]
    fn rejects_odd_and_tiny_counts() {
        assert!(matches!(
            ChainConfig::new(5, 1.0, 0.1, PI),
            Err(Error::SiteCount { n: 5 })
        ));
        assert!(matches!(
            ChainConfig::new(2, 1.0, 0.1, PI),
            Err(Error::SiteCount { n: 2 })
        ));
        assert!(ChainConfig::two_site_test(1.0, 0.1, PI).is_ok());
    }

    #[test]
    fn rejects_unphysical_couplings() {
        assert!(ChainConfig::new(8, 0.0, 0.1, PI).is_err());
        assert!(ChainConfig::new(8, 1.0, -0.1, PI).is_err());
        // The exchange sign is a modeling choice; only zero is excluded.
        assert!(ChainConfig::new(8, -1.0, 0.1, PI).is_ok());
    }

    #[test]
    fn rejects_uniform_phase_only_when_driven() {
        assert!(matches!(
            ChainConfig::new(8, 1.0, 0.1, 0.0),
            Err(Error::UniformPhase { .. })
        ));
        assert!(ChainConfig::new(8, 1.0, 0.1, 4.0 * PI).is_err());
        // An undriven chain may carry any phase label.
        assert!(ChainConfig::new(8, 1.0, 0.0, 0.0).is_ok());
    }

    #[test]
    fn default_offset_centers_the_pattern() {
        let cfg = ChainConfig::new(8, 1.0, 0.1, PI).unwrap();
        assert_eq!(cfg.phi0(), 4.5 * PI);
        // Site phases come in conjugate pairs around the chain center.
        let lo = cfg.site_phase(1);
        let hi = cfg.site_phase(8);
        assert!((lo + hi).abs() < 1e-12);
    }

    #[test]
    fn commensurate_detection_reduces_mod_n() {
        let cfg = ChainConfig::new(8, 1.0, 0.1, PI).unwrap();
        assert_eq!(cfg.commensurate_index(1e-9), Some(4));
        let cfg = ChainConfig::new(8, 1.0, 0.1, 2.0 * PI * 3.0 / 8.0).unwrap();
        assert_eq!(cfg.commensurate_index(1e-9), Some(3));
        let cfg = ChainConfig::new(8, 1.0, 0.1, 2.0).unwrap();
        assert_eq!(cfg.commensurate_index(1e-9), None);
    }

    #[test]
    fn first_gap_matches_dispersion() {
        let cfg = ChainConfig::new(8, 2.0, 0.0, PI).unwrap();
        let direct = 2.0 * (1.0 - (PI / 8.0).cos());
        assert!((cfg.first_magnon_gap() - direct).abs() < 1e-15);
    }
}
