use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::basis::ProductBasis;
use crate::chain::build_h_flip;
use crate::config::{Boundary, ChainConfig};
use crate::error::{Error, Result};
use crate::numeric::{Compensated, CompensatedC64};
use crate::op::{inner, HermitianOp};
use crate::spinwave::{
    coupling_amplitudes, dicke_state, magnon_energy, spin_wave_state, LadderBranch,
};

/// Commensurability tolerance on phi * n / (2 pi) for closed forms.
pub const COMMENSURATE_TOL: f64 = 1e-9;

/// Drive split into its collective mean and the site-resolved remainder.
///
/// a_plus is the mean of e^{i(φ j - φ0)} over sites; alpha holds the
/// zero-sum remainders. The collective part of the drive reduces to
/// 2 v_x S_x + 2 v_y S_y with v_x = Ω Re[a_plus]/2, v_y = -Ω Im[a_plus]/2.
#[derive(Clone, Debug)]
pub struct SplitCoupling {
    pub a_plus: C64,
    pub alpha: Vec<C64>,
    pub v_x: f64,
    pub v_y: f64,
}

/// Parameters of the collective effective model.
#[derive(Clone, Copy, Debug)]
pub struct EffectiveParams {
    pub chi_z: f64,
    pub chi_x: C64,
    pub v_x: f64,
    pub v_y: f64,
    /// Anisotropy ratio Re[chi_x] / chi_z.
    pub eta: f64,
    /// Collective drive ratio v_x / chi_z.
    pub gamma: f64,
}

/// Which collective operator to materialize on the maximum-spin ladder.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CollectiveKind {
    /// S_z^2.
    Sz2,
    /// Total spin S^2 (a constant on the ladder).
    S2,
    Sx,
    Sy,
    /// S_+^2 + S_-^2.
    Sp2PlusSm2,
    /// i (S_+^2 - S_-^2); the plain difference is anti-Hermitian, so the
    /// Hermitizing factor i is kept inside the operator and its real
    /// coefficient outside.
    Sp2MinusSm2,
}

/// Collective spin operator on the (n+1)-dimensional maximum-spin ladder.
///
/// Row/column k corresponds to magnetization m = k - n/2, ascending.
/// Every kind is Hermitian with bandwidth at most two.
#[derive(Clone, Debug)]
pub struct CollectiveOperator {
    n: usize,
    mat: DMatrix<C64>,
}

impl CollectiveOperator {
    pub fn n_sites(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    /// Largest |k - k'| with a nonzero entry.
    pub fn bandwidth(&self) -> usize {
        let mut b = 0usize;
        for r in 0..self.mat.nrows() {
            for c in 0..self.mat.ncols() {
                if self.mat[(r, c)] != C64::new(0.0, 0.0) {
                    b = b.max(r.abs_diff(c));
                }
            }
        }
        b
    }

    pub fn max_abs_adjoint_residual(&self) -> f64 {
        let adj = self.mat.adjoint();
        (&self.mat - adj)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Wrap an explicit ladder matrix, verifying Hermiticity. The door for
    /// composed models such as a Hamiltonian with one term removed.
    pub fn from_matrix(n: usize, mat: DMatrix<C64>) -> Result<Self> {
        let op = CollectiveOperator { n, mat };
        let dev = op.max_abs_adjoint_residual();
        if dev > crate::sparse::HERMITICITY_TOL {
            return Err(Error::NotHermitian { max_dev: dev });
        }
        Ok(op)
    }
}

impl HermitianOp for CollectiveOperator {
    fn dim(&self) -> usize {
        self.n + 1
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        debug_assert_eq!(x.len(), self.n + 1);
        for r in 0..=self.n {
            let mut acc = C64::new(0.0, 0.0);
            // Bandwidth two keeps the row sum short.
            let lo = r.saturating_sub(2);
            let hi = (r + 2).min(self.n);
            for c in lo..=hi {
                acc += self.mat[(r, c)] * x[c];
            }
            y[r] = acc;
        }
    }
}

fn require_open(cfg: &ChainConfig, what: &str) -> Result<()> {
    if cfg.boundary() != Boundary::Open {
        return Err(Error::unsupported(format!(
            "{what} is derived from open-chain standing waves; periodic rings are out of scope"
        )));
    }
    Ok(())
}

/// Split the drive pattern into collective mean and spin-wave remainder.
pub fn split_coupling(cfg: &ChainConfig) -> Result<SplitCoupling> {
    require_open(cfg, "the coupling split")?;
    let n = cfg.n();
    let mut acc = CompensatedC64::new();
    let phases: Vec<C64> = (1..=n)
        .map(|j| {
            let th = cfg.site_phase(j);
            let z = C64::new(th.cos(), th.sin());
            acc.add(z);
            z
        })
        .collect();
    let a_plus = acc.value() / n as f64;
    let alpha = phases.iter().map(|z| z - a_plus).collect();
    Ok(SplitCoupling {
        a_plus,
        alpha,
        v_x: 0.5 * cfg.omega() * a_plus.re,
        v_y: -0.5 * cfg.omega() * a_plus.im,
    })
}

/// Second-order twisting coefficients (chi_z, chi_x).
///
/// chi_z = Ω^2 / (4 n J (n-1)) Σ_q |f_q|^2 / E_q and chi_x the same sum
/// with conj(f_q)^2 in place of |f_q|^2, E_q being the dimensionless
/// dispersion scaled by J. chi_z is real and negative for any drive that
/// actually couples to spin waves.
pub fn chi_coefficients(cfg: &ChainConfig) -> Result<(f64, C64)> {
    require_open(cfg, "the twisting coefficients")?;
    let n = cfg.n();
    let f = coupling_amplitudes(cfg)?;
    let pref = cfg.omega() * cfg.omega()
        / (4.0 * n as f64 * cfg.j_se() * (n as f64 - 1.0));
    let mut sz = Compensated::new();
    let mut sx = CompensatedC64::new();
    for (i, fq) in f.iter().enumerate() {
        let e = magnon_energy(n, i + 1);
        sz.add(fq.norm_sqr() / e);
        sx.add(fq.conj() * fq.conj() / e);
    }
    Ok((pref * sz.value(), sx.value() * pref))
}

/// Dimensionful prefactor Ω^2 / (4 J (n-1)) that multiplies the
/// closed-form factors.
pub fn chi_prefactor(cfg: &ChainConfig) -> f64 {
    cfg.omega() * cfg.omega() / (4.0 * cfg.j_se() * (cfg.n() as f64 - 1.0))
}

/// Closed-form factors (F_diag, F_off) on the commensurate grid
/// phi = 2 pi k / n, defined by chi_z = pref * F_diag and
/// chi_x = pref * F_off.
///
/// F_diag = 2 / (cos phi - 1) everywhere on the grid. Off the midpoint,
/// F_off = -1 / (cos phi - 1); at phi = pi the two drive resonances
/// coincide and F_off doubles to exactly +1. Away from the default offset
/// phase, F_off picks up the rotation e^{2i(phi0 - default)}.
pub fn closed_form_factors(cfg: &ChainConfig) -> Result<(f64, C64)> {
    require_open(cfg, "the closed-form factors")?;
    let n = cfg.n();
    let k = cfg
        .commensurate_index(COMMENSURATE_TOL)
        .ok_or(Error::NotCommensurate { phi: cfg.phi(), n })?;
    // cos(2 pi k / n) - 1 = -2 sin^2(pi k / n), evaluated from exact k.
    let s = (std::f64::consts::PI * k as f64 / n as f64).sin();
    let s2 = s * s;
    let f_diag = -1.0 / s2;
    let off_magnitude = if 2 * k == n { 1.0 } else { 0.5 / s2 };
    let delta = 2.0 * (cfg.phi0() - ChainConfig::default_phi0(n, cfg.phi()));
    let f_off = off_magnitude * C64::new(delta.cos(), delta.sin());
    Ok((f_diag, f_off))
}

/// Anisotropy and drive ratios (eta, gamma) at offset phases that keep the
/// planar coupling real.
pub fn eta_gamma(cfg: &ChainConfig) -> Result<(f64, f64)> {
    let params = effective_params(cfg)?;
    Ok((params.eta, params.gamma))
}

/// All parameters of the effective model in one struct.
pub fn effective_params(cfg: &ChainConfig) -> Result<EffectiveParams> {
    let split = split_coupling(cfg)?;
    let (chi_z, chi_x) = chi_coefficients(cfg)?;
    if chi_z == 0.0 {
        return Err(Error::numerical(
            "twisting coefficient vanished; ratios eta and gamma are undefined",
        ));
    }
    if chi_x.norm() > 0.0 && chi_x.im.abs() > 1e-10 * chi_x.norm() {
        return Err(Error::numerical(format!(
            "planar coupling has relative imaginary part {:.2e}; \
             eta needs an offset phase from the axis-aligned family",
            chi_x.im.abs() / chi_x.norm()
        )));
    }
    Ok(EffectiveParams {
        chi_z,
        chi_x,
        v_x: split.v_x,
        v_y: split.v_y,
        eta: chi_x.re / chi_z,
        gamma: split.v_x / chi_z,
    })
}

/// Plain S_z on the maximum-spin ladder, the diagonal companion to the
/// quadratic kinds; the squeezing diagnostics consume it alongside Sx, Sy.
pub fn collective_sz(n: usize) -> Result<CollectiveOperator> {
    if n < 2 || n % 2 != 0 {
        return Err(Error::SiteCount { n });
    }
    let dim = n + 1;
    let mut mat = DMatrix::<C64>::zeros(dim, dim);
    for k in 0..dim {
        mat[(k, k)] = C64::new(k as f64 - n as f64 / 2.0, 0.0);
    }
    CollectiveOperator::from_matrix(n, mat)
}

/// Materialize one collective operator on the maximum-spin ladder.
pub fn collective_operator(n: usize, kind: CollectiveKind) -> Result<CollectiveOperator> {
    if n < 2 || n % 2 != 0 {
        return Err(Error::SiteCount { n });
    }
    let dim = n + 1;
    let s = n as f64 / 2.0;
    let m_of = |k: usize| k as f64 - s;
    // <m+1|S_+|m>.
    let up = |k: usize| {
        let m = m_of(k);
        (s * (s + 1.0) - m * (m + 1.0)).sqrt()
    };
    let mut mat = DMatrix::<C64>::zeros(dim, dim);
    match kind {
        CollectiveKind::Sz2 => {
            for k in 0..dim {
                mat[(k, k)] = C64::new(m_of(k) * m_of(k), 0.0);
            }
        }
        CollectiveKind::S2 => {
            for k in 0..dim {
                mat[(k, k)] = C64::new(s * (s + 1.0), 0.0);
            }
        }
        CollectiveKind::Sx => {
            for k in 0..dim - 1 {
                let half = C64::new(0.5 * up(k), 0.0);
                mat[(k + 1, k)] = half;
                mat[(k, k + 1)] = half;
            }
        }
        CollectiveKind::Sy => {
            for k in 0..dim - 1 {
                let half = C64::new(0.0, -0.5 * up(k));
                mat[(k + 1, k)] = half;
                mat[(k, k + 1)] = half.conj();
            }
        }
        CollectiveKind::Sp2PlusSm2 => {
            for k in 0..dim - 2 {
                let two = C64::new(up(k) * up(k + 1), 0.0);
                mat[(k + 2, k)] = two;
                mat[(k, k + 2)] = two;
            }
        }
        CollectiveKind::Sp2MinusSm2 => {
            for k in 0..dim - 2 {
                let two = C64::new(0.0, up(k) * up(k + 1));
                mat[(k + 2, k)] = two;
                mat[(k, k + 2)] = two.conj();
            }
        }
    }
    CollectiveOperator::from_matrix(n, mat)
}

/// Effective collective Hamiltonian after integrating out the spin waves:
///
///   H = 2 v_x S_x + 2 v_y S_y
///     - 2 chi_z (S^2 + S_z^2 - n)
///     + conj(chi_x) S_+^2 + chi_x S_-^2
///
/// The constant -2 chi_z (S^2 - n) is kept so the matrix agrees
/// element-wise with the literal second-order resolvent.
pub fn build_h_eff(cfg: &ChainConfig) -> Result<CollectiveOperator> {
    require_open(cfg, "the effective model")?;
    let split = split_coupling(cfg)?;
    let (chi_z, chi_x) = chi_coefficients(cfg)?;
    let n = cfg.n();
    let dim = n + 1;

    let mut mat = DMatrix::<C64>::zeros(dim, dim);
    let add = |mat: &mut DMatrix<C64>, w: C64, kind: CollectiveKind| -> Result<()> {
        let op = collective_operator(n, kind)?;
        *mat += op.matrix().map(|z| w * z);
        Ok(())
    };
    add(&mut mat, C64::new(2.0 * split.v_x, 0.0), CollectiveKind::Sx)?;
    add(&mut mat, C64::new(2.0 * split.v_y, 0.0), CollectiveKind::Sy)?;
    add(&mut mat, C64::new(-2.0 * chi_z, 0.0), CollectiveKind::S2)?;
    add(&mut mat, C64::new(-2.0 * chi_z, 0.0), CollectiveKind::Sz2)?;
    add(&mut mat, C64::new(chi_x.re, 0.0), CollectiveKind::Sp2PlusSm2)?;
    // conj(chi_x) S_+^2 + chi_x S_-^2 = Re.. plus the Hermitized difference
    // weighted by -Im[chi_x].
    add(&mut mat, C64::new(-chi_x.im, 0.0), CollectiveKind::Sp2MinusSm2)?;
    let constant = C64::new(2.0 * n as f64 * chi_z, 0.0);
    for k in 0..dim {
        mat[(k, k)] += constant;
    }
    CollectiveOperator::from_matrix(n, mat)
}

/// Literal second-order effective Hamiltonian on the symmetric multiplet:
/// first order is the multiplet-projected drive, second order sums over
/// every intermediate one-magnon state with its exchange energy denominator.
/// Exponentially expensive, usable up to a dozen sites; the ground truth
/// that `build_h_eff` must reproduce.
pub fn second_order_oracle(cfg: &ChainConfig) -> Result<DMatrix<C64>> {
    require_open(cfg, "the resolvent oracle")?;
    let n = cfg.n();
    let dim = n + 1;
    let full = ProductBasis::full(n)?;
    let h_flip = build_h_flip(cfg, &full)?;

    // Embedded symmetric states and their drive images.
    let mut dicke = Vec::with_capacity(dim);
    let mut driven = Vec::with_capacity(dim);
    for k in 0..dim {
        let m = k as i32 - n as i32 / 2;
        let d = dicke_state(n, m)?.embed(&full)?;
        let mut w = vec![C64::new(0.0, 0.0); full.dim()];
        h_flip.apply(&d, &mut w);
        dicke.push(d);
        driven.push(w);
    }

    let mut h = DMatrix::<C64>::zeros(dim, dim);
    // First order: projected drive.
    for kp in 0..dim {
        for k in 0..dim {
            h[(kp, k)] = inner(&dicke[kp], &driven[k]);
        }
    }
    // Second order: resolvent through each spin-wave state.
    for m_mid in -(n as i32) / 2 + 1..=(n as i32) / 2 - 1 {
        for q in 1..n {
            let sw = spin_wave_state(n, m_mid, q, LadderBranch::Raise)?.embed(&full)?;
            let denom = -cfg.j_se() * magnon_energy(n, q);
            // <sw|H_flip|D_m> is nonzero only for m = m_mid -+ 1.
            for dk in [-1i32, 1] {
                let k = m_mid + dk + n as i32 / 2;
                if !(0..dim as i32).contains(&k) {
                    continue;
                }
                for dkp in [-1i32, 1] {
                    let kp = m_mid + dkp + n as i32 / 2;
                    if !(0..dim as i32).contains(&kp) {
                        continue;
                    }
                    let g_k = inner(&sw, &driven[k as usize]);
                    let g_kp = inner(&sw, &driven[kp as usize]);
                    h[(kp as usize, k as usize)] += g_kp.conj() * g_k / denom;
                }
            }
        }
    }
    Ok(h)
}
