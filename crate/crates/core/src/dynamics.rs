use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::basis::ProductBasis;
use crate::effective::CollectiveOperator;
use crate::error::{Error, Result};
use crate::krylov::{KrylovParams, KrylovPropagator};
use crate::op::{inner, norm, HermitianOp};
use crate::sparse::SparseOperator;

/// Relative mean-spin length below which the transverse frame, and with it
/// the squeezing parameter, stops being defined.
pub const MEAN_SPIN_FLOOR: f64 = 1e-8;

/// Spin-coherent product state |theta, phi> over the full product basis:
/// every site points along the same Bloch direction.
///
/// Site amplitudes are cos(theta/2) for up and e^{i phi} sin(theta/2) for
/// down, which matches the maximum-spin ladder amplitudes below without any
/// extra global phase.
pub fn coherent_state_full(basis: &ProductBasis, theta: f64, phi: f64) -> Result<Vec<C64>> {
    if basis.sector_m().is_some() {
        return Err(Error::basis(
            "coherent states spread over all sectors; build them on the full basis",
        ));
    }
    let n = basis.n_sites();
    let up = C64::new((theta / 2.0).cos(), 0.0);
    let dn = C64::new(phi.cos(), phi.sin()) * (theta / 2.0).sin();
    let mut out = Vec::with_capacity(basis.dim());
    for &p in basis.states() {
        let mut amp = C64::new(1.0, 0.0);
        for site in 0..n {
            amp *= if p & (1u64 << site) != 0 { up } else { dn };
        }
        out.push(amp);
    }
    Ok(out)
}

/// The same coherent state on the maximum-spin ladder, index k holding
/// magnetization m = k - n/2:
///
///   a_m = sqrt(C(n, n/2+m)) cos^{n/2+m}(theta/2) sin^{n/2-m}(theta/2)
///         e^{i (n/2 - m) phi}
///
/// Magnitudes are accumulated in the log domain so binomials and power
/// underflow never meet in one product, which keeps hundreds of sites exact
/// to rounding.
pub fn coherent_state_dicke(n: usize, theta: f64, phi: f64) -> Result<Vec<C64>> {
    if n < 2 || n % 2 != 0 {
        return Err(Error::SiteCount { n });
    }
    let ln_cos = (theta / 2.0).cos().abs().ln();
    let ln_sin = (theta / 2.0).sin().abs().ln();
    let cos_sign: f64 = if (theta / 2.0).cos() < 0.0 { -1.0 } else { 1.0 };
    let sin_sign: f64 = if (theta / 2.0).sin() < 0.0 { -1.0 } else { 1.0 };

    // Running log-binomial ln C(n, k): add ln((n-k+1)/k) per step.
    let mut ln_binom = 0.0f64;
    let mut out = Vec::with_capacity(n + 1);
    for k in 0..=n {
        if k > 0 {
            ln_binom += ((n - k + 1) as f64).ln() - (k as f64).ln();
        }
        let ups = k as f64;
        let downs = (n - k) as f64;
        // Zero powers must not touch a -inf log.
        let mut ln_mag = 0.5 * ln_binom;
        let mut sign = 1.0;
        if ups > 0.0 {
            ln_mag += ups * ln_cos;
            sign *= cos_sign.powi(k as i32);
        }
        if downs > 0.0 {
            ln_mag += downs * ln_sin;
            sign *= sin_sign.powi((n - k) as i32);
        }
        let mag = if ln_mag == f64::NEG_INFINITY {
            0.0
        } else {
            sign * ln_mag.exp()
        };
        let ph = downs * phi;
        out.push(C64::new(ph.cos(), ph.sin()) * mag);
    }
    Ok(out)
}

/// Cached eigendecomposition of a Hermitian matrix, for dense propagation
/// and repeated time evaluation.
pub struct EigenPropagator {
    evals: Vec<f64>,
    evecs: DMatrix<C64>,
}

impl EigenPropagator {
    /// Decompose a Hermitian matrix. The adjoint residual is checked first
    /// so a silently non-Hermitian input cannot corrupt the evolution.
    pub fn from_matrix(mat: DMatrix<C64>) -> Result<Self> {
        let dev = (&mat - mat.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if dev > crate::sparse::HERMITICITY_TOL {
            return Err(Error::NotHermitian { max_dev: dev });
        }
        let eig = mat.symmetric_eigen();
        Ok(EigenPropagator {
            evals: eig.eigenvalues.iter().copied().collect(),
            evecs: eig.eigenvectors,
        })
    }

    pub fn from_collective(op: &CollectiveOperator) -> Result<Self> {
        Self::from_matrix(op.matrix().clone())
    }

    pub fn from_sparse(op: &SparseOperator) -> Result<Self> {
        Self::from_matrix(op.to_dense())
    }

    pub fn dim(&self) -> usize {
        self.evals.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.evals
    }

    /// Coefficients of `psi` in the eigenbasis.
    pub fn to_eigenbasis(&self, psi: &[C64]) -> Result<Vec<C64>> {
        if psi.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: psi.len(),
            });
        }
        let dim = self.dim();
        let mut c = vec![C64::new(0.0, 0.0); dim];
        for (k, ck) in c.iter_mut().enumerate() {
            let col = self.evecs.column(k);
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..dim {
                acc += col[i].conj() * psi[i];
            }
            *ck = acc;
        }
        Ok(c)
    }

    /// State at time t from eigenbasis coefficients of the initial state.
    pub fn state_at(&self, coeffs: &[C64], t: f64) -> Result<Vec<C64>> {
        if coeffs.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: coeffs.len(),
            });
        }
        let dim = self.dim();
        let mut out = vec![C64::new(0.0, 0.0); dim];
        for (k, c) in coeffs.iter().enumerate() {
            let phase = -self.evals[k] * t;
            let w = c * C64::new(phase.cos(), phase.sin());
            let col = self.evecs.column(k);
            for i in 0..dim {
                out[i] += w * col[i];
            }
        }
        Ok(out)
    }
}

/// Evolve through a cached eigendecomposition at each requested time.
pub fn evolve_eigen(
    prop: &EigenPropagator,
    psi0: &[C64],
    times: &[f64],
) -> Result<Vec<Vec<C64>>> {
    let coeffs = prop.to_eigenbasis(psi0)?;
    times.iter().map(|&t| prop.state_at(&coeffs, t)).collect()
}

/// Evolve by adaptive short-iterate steps, sampling at the given
/// non-decreasing times (the first may be zero).
pub fn evolve_krylov<T: HermitianOp>(
    op: &T,
    psi0: &[C64],
    times: &[f64],
    params: KrylovParams,
) -> Result<Vec<Vec<C64>>> {
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::search("sample times must be non-negative and sorted"));
    }
    let mut prop = KrylovPropagator::new(op, params)?;
    let mut psi = psi0.to_vec();
    let mut out = Vec::with_capacity(times.len());
    let mut now = 0.0;
    for &t in times {
        if t > now {
            prop.advance(&mut psi, t - now)?;
            now = t;
        }
        out.push(psi.clone());
    }
    Ok(out)
}

/// Squeezing diagnostics of one state.
#[derive(Clone, Copy, Debug)]
pub struct SqueezingSample {
    /// n * var_min / |<S>|^2; NaN when the frame collapsed.
    pub xi2: f64,
    pub mean: [f64; 3],
    pub var_min: f64,
    /// Set when the mean spin was too short to define the frame.
    pub collapsed: bool,
}

/// Squeezing trace along a time grid.
#[derive(Clone, Debug)]
pub struct SqueezingTrace {
    pub times: Vec<f64>,
    pub samples: Vec<SqueezingSample>,
}

impl SqueezingTrace {
    /// Time and value of the smallest non-collapsed squeezing parameter.
    pub fn min_xi2(&self) -> Option<(f64, f64)> {
        self.times
            .iter()
            .zip(&self.samples)
            .filter(|(_, s)| !s.collapsed && s.xi2.is_finite())
            .min_by(|a, b| a.1.xi2.partial_cmp(&b.1.xi2).unwrap())
            .map(|(&t, s)| (t, s.xi2))
    }
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn scale3(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn len3(a: [f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

/// Squeezing parameter of `psi` with respect to collective components
/// (sx, sy, sz): the minimal transverse variance normalized by the mean
/// spin length,
///
///   xi^2 = n Var_min / |<S>|^2.
///
/// The transverse frame is e1 = normalize(z x nbar), or normalize(x x nbar)
/// when the mean spin is within 1e-6 of the z axis, and e2 = nbar x e1.
/// A mean spin shorter than `MEAN_SPIN_FLOOR` * n collapses the frame and
/// errors.
pub fn squeezing_parameter<T: HermitianOp>(
    psi: &[C64],
    n_sites: usize,
    sx: &T,
    sy: &T,
    sz: &T,
) -> Result<SqueezingSample> {
    let dim = psi.len();
    for op in [sx, sy, sz] {
        if op.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: op.dim(),
            });
        }
    }
    let mut yx = vec![C64::new(0.0, 0.0); dim];
    let mut yy = vec![C64::new(0.0, 0.0); dim];
    let mut yz = vec![C64::new(0.0, 0.0); dim];
    sx.apply(psi, &mut yx);
    sy.apply(psi, &mut yy);
    sz.apply(psi, &mut yz);
    let mean = [
        inner(psi, &yx).re,
        inner(psi, &yy).re,
        inner(psi, &yz).re,
    ];
    let length = len3(mean);
    let threshold = MEAN_SPIN_FLOOR * n_sites as f64;
    if length < threshold {
        return Err(Error::MeanSpinCollapsed { length, threshold });
    }
    let nbar = scale3(mean, 1.0 / length);

    let zhat = [0.0, 0.0, 1.0];
    let xhat = [1.0, 0.0, 0.0];
    let raw = cross(zhat, nbar);
    let e1 = if len3(raw) >= 1e-6 {
        scale3(raw, 1.0 / len3(raw))
    } else {
        let alt = cross(xhat, nbar);
        scale3(alt, 1.0 / len3(alt))
    };
    let e2 = cross(nbar, e1);

    // S_e psi as linear combinations of the component images.
    let comb = |e: [f64; 3]| -> Vec<C64> {
        (0..dim)
            .map(|i| yx[i] * e[0] + yy[i] * e[1] + yz[i] * e[2])
            .collect()
    };
    let u1 = comb(e1);
    let u2 = comb(e2);
    // Transverse means vanish by construction; the symmetrized covariance
    // is the real part of the image overlaps.
    let a = inner(&u1, &u1).re;
    let b = inner(&u2, &u2).re;
    let c = inner(&u1, &u2).re;
    let var_min = 0.5 * (a + b) - (0.25 * (a - b) * (a - b) + c * c).sqrt();

    Ok(SqueezingSample {
        xi2: n_sites as f64 * var_min / (length * length),
        mean,
        var_min,
        collapsed: false,
    })
}

/// Evaluate the squeezing parameter along a set of states, mapping frame
/// collapse into a flagged NaN sample instead of an error.
pub fn squeezing_trace<T: HermitianOp>(
    times: &[f64],
    states: &[Vec<C64>],
    n_sites: usize,
    sx: &T,
    sy: &T,
    sz: &T,
) -> Result<SqueezingTrace> {
    if times.len() != states.len() {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            got: states.len(),
        });
    }
    let mut samples = Vec::with_capacity(states.len());
    for psi in states {
        match squeezing_parameter(psi, n_sites, sx, sy, sz) {
            Ok(s) => samples.push(s),
            Err(Error::MeanSpinCollapsed { .. }) => samples.push(SqueezingSample {
                xi2: f64::NAN,
                mean: [0.0, 0.0, 0.0],
                var_min: f64::NAN,
                collapsed: true,
            }),
            Err(e) => return Err(e),
        }
    }
    Ok(SqueezingTrace {
        times: times.to_vec(),
        samples,
    })
}

/// Norm drift |norm - 1| of each state, for unitarity checks.
pub fn max_norm_drift(states: &[Vec<C64>]) -> f64 {
    states
        .iter()
        .map(|s| (norm(s) - 1.0).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{build_collective, Axis};
    use crate::effective::{collective_operator, collective_sz, CollectiveKind};
    use std::f64::consts::PI;

    #[test]
    fn ladder_and_product_coherent_states_agree() {
        let n = 6;
        let basis = ProductBasis::full(n).unwrap();
        let theta = 1.1;
        let phi = 0.7;
        let full = coherent_state_full(&basis, theta, phi).unwrap();
        let ladder = coherent_state_dicke(n, theta, phi).unwrap();
        assert!((norm(&full) - 1.0).abs() < 1e-12);
        assert!((norm(&ladder) - 1.0).abs() < 1e-12);
        for k in 0..=n {
            let m = k as i32 - n as i32 / 2;
            let d = crate::spinwave::dicke_state(n, m)
                .unwrap()
                .embed(&basis)
                .unwrap();
            let overlap = inner(&d, &full);
            assert!((overlap - ladder[k]).norm() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn polar_coherent_states_are_single_ladder_levels() {
        let up = coherent_state_dicke(200, 0.0, 0.4).unwrap();
        assert!((up[200] - C64::new(1.0, 0.0)).norm() < 1e-14);
        assert!(up[..200].iter().all(|z| z.norm() == 0.0));
        let down = coherent_state_dicke(200, PI, 0.0).unwrap();
        assert!((down[0].norm() - 1.0).abs() < 1e-12);
        // Large equatorial states stay normalized through the log domain.
        let eq = coherent_state_dicke(200, PI / 2.0, 0.3).unwrap();
        assert!((norm(&eq) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coherent_state_starts_unsqueezed() {
        let n = 8;
        let basis = ProductBasis::full(n).unwrap();
        let psi = coherent_state_full(&basis, PI / 2.0, 0.0).unwrap();
        let sx = build_collective(&basis, Axis::X).unwrap();
        let sy = build_collective(&basis, Axis::Y).unwrap();
        let sz = build_collective(&basis, Axis::Z).unwrap();
        let s = squeezing_parameter(&psi, n, &sx, &sy, &sz).unwrap();
        assert!((s.xi2 - 1.0).abs() < 1e-10);
        assert!((s.mean[0] - n as f64 / 2.0).abs() < 1e-12);
        // Same through the ladder representation at a size the product
        // basis could never reach.
        let n = 100;
        let psi = coherent_state_dicke(n, PI / 2.0, 0.25).unwrap();
        let sx = collective_operator(n, CollectiveKind::Sx).unwrap();
        let sy = collective_operator(n, CollectiveKind::Sy).unwrap();
        let sz = collective_sz(n).unwrap();
        let s = squeezing_parameter(&psi, n, &sx, &sy, &sz).unwrap();
        assert!((s.xi2 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn squeezing_frame_handles_polar_means() {
        // A state pointing along z takes the fallback frame without panic.
        let n = 8;
        let basis = ProductBasis::full(n).unwrap();
        let psi = coherent_state_full(&basis, 0.0, 0.0).unwrap();
        let sx = build_collective(&basis, Axis::X).unwrap();
        let sy = build_collective(&basis, Axis::Y).unwrap();
        let sz = build_collective(&basis, Axis::Z).unwrap();
        let s = squeezing_parameter(&psi, n, &sx, &sy, &sz).unwrap();
        assert!((s.xi2 - 1.0).abs() < 1e-10);
        assert!((s.mean[2] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn collapsed_mean_spin_is_reported() {
        // The equal superposition of antipodal coherent states has zero
        // mean spin.
        let n = 6;
        let basis = ProductBasis::full(n).unwrap();
        let a = coherent_state_full(&basis, PI / 2.0, 0.0).unwrap();
        let b = coherent_state_full(&basis, PI / 2.0, PI).unwrap();
        let mut psi: Vec<C64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        crate::op::normalize(&mut psi);
        let sx = build_collective(&basis, Axis::X).unwrap();
        let sy = build_collective(&basis, Axis::Y).unwrap();
        let sz = build_collective(&basis, Axis::Z).unwrap();
        match squeezing_parameter(&psi, n, &sx, &sy, &sz) {
            Err(Error::MeanSpinCollapsed { .. }) => {}
            other => panic!("expected collapse, got {other:?}"),
        }
        // The trace form flags instead of failing.
        let tr = squeezing_trace(&[0.0], &[psi], n, &sx, &sy, &sz).unwrap();
        assert!(tr.samples[0].collapsed);
        assert!(tr.samples[0].xi2.is_nan());
        assert!(tr.min_xi2().is_none());
    }

    #[test]
    fn eigen_and_krylov_marches_agree() {
        let n = 6;
        let basis = ProductBasis::full(n).unwrap();
        let cfg = crate::ChainConfig::new(n, 1.0, 0.3, PI - 2.0 * PI / 6.0).unwrap();
        let h = crate::chain::build_h_spin(&cfg, &basis).unwrap();
        let psi0 = coherent_state_full(&basis, PI / 2.0, 0.0).unwrap();
        let times = vec![0.0, 2.0, 11.0, 40.0];
        let krylov = evolve_krylov(&h, &psi0, &times, KrylovParams::default()).unwrap();
        let eigen = evolve_eigen(&EigenPropagator::from_sparse(&h).unwrap(), &psi0, &times).unwrap();
        for (a, b) in krylov.iter().zip(&eigen) {
            let dev: f64 = a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(dev < 1e-8, "dev={dev:.2e}");
        }
        assert!(max_norm_drift(&krylov) < 1e-10);
    }

    #[test]
    fn energy_is_conserved_along_the_march() {
        let n = 6;
        let basis = ProductBasis::full(n).unwrap();
        let cfg = crate::ChainConfig::new(n, 1.0, 0.4, 2.0).unwrap();
        let h = crate::chain::build_h_spin(&cfg, &basis).unwrap();
        let psi0 = coherent_state_full(&basis, PI / 2.0, 0.5).unwrap();
        let times: Vec<f64> = (0..20).map(|k| k as f64 * 7.0).collect();
        let states = evolve_krylov(&h, &psi0, &times, KrylovParams::default()).unwrap();
        let e0 = h.expectation(&states[0]);
        for s in &states {
            assert!((h.expectation(s) - e0).abs() < 1e-8);
        }
    }

    #[test]
    fn trace_length_mismatch_is_rejected() {
        let n = 6;
        let basis = ProductBasis::full(n).unwrap();
        let sx = build_collective(&basis, Axis::X).unwrap();
        let sy = build_collective(&basis, Axis::Y).unwrap();
        let sz = build_collective(&basis, Axis::Z).unwrap();
        let psi = coherent_state_full(&basis, 1.0, 0.0).unwrap();
        assert!(squeezing_trace(&[0.0, 1.0], &[psi], n, &sx, &sy, &sz).is_err());
    }
}
