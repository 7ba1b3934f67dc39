use num_complex::Complex64 as C64;

use crate::basis::ProductBasis;
use crate::config::{Boundary, ChainConfig};
use crate::error::{Error, Result};
use crate::sparse::SparseOperator;

/// Collective spin component label. Plus and Minus are the ladder
/// combinations S_x ± i S_y and are the only non-Hermitian kinds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
    Plus,
    Minus,
}

fn bonds(cfg: &ChainConfig) -> Vec<(usize, usize)> {
    let n = cfg.n();
    let mut b: Vec<(usize, usize)> = (0..n - 1).map(|j| (j, j + 1)).collect();
    if cfg.boundary() == Boundary::Periodic {
        b.push((n - 1, 0));
    }
    b
}

/// Exchange part of the chain Hamiltonian,
/// J Σ_bonds (S_a · S_b - 1/4).
///
/// Bonds of aligned pairs contribute nothing; anti-aligned pairs give a
/// -J/2 diagonal shift plus a J/2 swap. The fully symmetric multiplet
/// therefore sits at exactly zero energy and everything else below it.
/// Works on the full space or any magnetization sector (both are invariant).
pub fn build_h_se(cfg: &ChainConfig, basis: &ProductBasis) -> Result<SparseOperator> {
    if basis.n_sites() != cfg.n() {
        return Err(Error::DimensionMismatch {
            expected: cfg.n(),
            got: basis.n_sites(),
        });
    }
    let j = cfg.j_se();
    let bond_list = bonds(cfg);
    let mut triplets = Vec::new();
    for (idx, &p) in basis.states().iter().enumerate() {
        let mut diag = 0.0;
        for &(a, b) in &bond_list {
            let bit_a = (p >> a) & 1;
            let bit_b = (p >> b) & 1;
            if bit_a == bit_b {
                continue;
            }
            diag -= 0.5 * j;
            let swapped = p ^ ((1u64 << a) | (1u64 << b));
            // Sector bases are closed under swaps, so the lookup succeeds.
            let target = basis.index_of(swapped).expect("swap leaves the sector");
            triplets.push((target, idx, C64::new(0.5 * j, 0.0)));
        }
        if diag != 0.0 {
            triplets.push((idx, idx, C64::new(diag, 0.0)));
        }
    }
    SparseOperator::from_triplets(basis.dim(), triplets, true)
}

/// Position-dependent spin-flip drive,
/// (Ω/2) Σ_j (e^{i(φ j - φ0)} S_j^+ + h.c.) with 1-based site j.
///
/// Mixes magnetization sectors, so it requires the full product basis.
pub fn build_h_flip(cfg: &ChainConfig, basis: &ProductBasis) -> Result<SparseOperator> {
    if basis.n_sites() != cfg.n() {
        return Err(Error::DimensionMismatch {
            expected: cfg.n(),
            got: basis.n_sites(),
        });
    }
    if basis.sector_m().is_some() {
        return Err(Error::basis(
            "spin-flip drive mixes magnetization sectors; build it on the full basis",
        ));
    }
    let half_omega = 0.5 * cfg.omega();
    let mut triplets = Vec::new();
    for (idx, &p) in basis.states().iter().enumerate() {
        for site in 1..=cfg.n() {
            let mask = 1u64 << (site - 1);
            if p & mask != 0 {
                continue;
            }
            let raised = basis.index_of(p | mask).expect("full basis");
            let theta = cfg.site_phase(site);
            let amp = half_omega * C64::new(theta.cos(), theta.sin());
            triplets.push((raised, idx, amp));
            triplets.push((idx, raised, amp.conj()));
        }
    }
    SparseOperator::from_triplets(basis.dim(), triplets, true)
}

/// Collective spin component Σ_j S_j^axis.
///
/// Z is diagonal and valid on any basis; the other kinds flip single sites
/// and need the full space.
pub fn build_collective(basis: &ProductBasis, axis: Axis) -> Result<SparseOperator> {
    let n = basis.n_sites();
    let mut triplets = Vec::new();
    let hermitian = !matches!(axis, Axis::Plus | Axis::Minus);
    match axis {
        Axis::Z => {
            for (idx, &p) in basis.states().iter().enumerate() {
                let m = basis.magnetization_of(p) as f64;
                if m != 0.0 {
                    triplets.push((idx, idx, C64::new(m, 0.0)));
                }
            }
        }
        Axis::X | Axis::Y | Axis::Plus | Axis::Minus => {
            if basis.sector_m().is_some() {
                return Err(Error::basis(
                    "transverse collective spin mixes sectors; build it on the full basis",
                ));
            }
            // X: (S+ + S-)/2. Y: (S+ - S-)/(2i). Plus/Minus: one direction.
            let up_amp = match axis {
                Axis::X => C64::new(0.5, 0.0),
                Axis::Y => C64::new(0.0, -0.5),
                Axis::Plus | Axis::Minus => C64::new(1.0, 0.0),
                Axis::Z => unreachable!(),
            };
            for (idx, &p) in basis.states().iter().enumerate() {
                for site in 0..n {
                    let mask = 1u64 << site;
                    if p & mask != 0 {
                        continue;
                    }
                    let raised = basis.index_of(p | mask).expect("full basis");
                    match axis {
                        Axis::Plus => triplets.push((raised, idx, up_amp)),
                        Axis::Minus => triplets.push((idx, raised, up_amp)),
                        _ => {
                            triplets.push((raised, idx, up_amp));
                            triplets.push((idx, raised, up_amp.conj()));
                        }
                    }
                }
            }
        }
    }
    SparseOperator::from_triplets(basis.dim(), triplets, hermitian)
}

/// Full chain Hamiltonian: exchange plus drive.
pub fn build_h_spin(cfg: &ChainConfig, basis: &ProductBasis) -> Result<SparseOperator> {
    let h_se = build_h_se(cfg, basis)?;
    let h_flip = build_h_flip(cfg, basis)?;
    SparseOperator::linear_combination(
        &[(C64::new(1.0, 0.0), &h_se), (C64::new(1.0, 0.0), &h_flip)],
        true,
    )
}
