use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Mutex;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::basis::ProductBasis;
use crate::chain::{build_collective, build_h_se, build_h_spin, Axis};
use crate::config::{Boundary, ChainConfig};
use crate::dynamics::{
    coherent_state_dicke, coherent_state_full, squeezing_parameter, EigenPropagator,
    SqueezingSample, SqueezingTrace,
};
use crate::effective::{
    build_h_eff, chi_coefficients, chi_prefactor, closed_form_factors, collective_operator,
    collective_sz, effective_params, second_order_oracle, split_coupling, CollectiveKind,
    CollectiveOperator, EffectiveParams,
};
use crate::error::{Error, Result};
use crate::krylov::{KrylovParams, KrylovPropagator};
use crate::op::{inner, norm, HermitianOp};
use crate::sparse::SparseOperator;
use crate::spinwave::{
    coupling_amplitudes, coupling_amplitudes_direct, dicke_state, magnon_energy,
    one_magnon_eigensystem, spin_wave_state, LadderBranch,
};

/// Site count above which exact evolution needs an explicit opt-in.
pub const FULL_CHAIN_DEFAULT_CAP: usize = 12;

/// Hard ceiling for exact evolution even with the opt-in.
pub const FULL_CHAIN_HARD_CAP: usize = 16;

/// Which dynamical model a protocol runs on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Model {
    /// Collective ladder model with the spin waves integrated out.
    Effective,
    /// Exact evolution on the full product space.
    FullChain,
}

impl Model {
    /// Short label used in reports and output rows.
    pub fn tag(&self) -> &'static str {
        match self {
            Model::Effective => "effective",
            Model::FullChain => "full",
        }
    }
}

/// Bloch angles of a spin-coherent initial state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateAngles {
    /// Polar angle from +z.
    pub theta: f64,
    /// Azimuth from +x.
    pub phi: f64,
}

impl StateAngles {
    pub fn new(theta: f64, phi: f64) -> Self {
        StateAngles { theta, phi }
    }
}

/// Swept parameter of a scan. Each variant carries its grid.
#[derive(Clone, Debug)]
pub enum Sweep {
    /// Flip phase. The offset phase keeps its displacement from the
    /// default, so the axis-aligned family survives the sweep.
    Phi(Vec<f64>),
    /// Drive amplitude at fixed phases.
    Omega(Vec<f64>),
    /// Chain length; phases re-center on each length.
    Sites(Vec<usize>),
    /// Initial-state angles at a fixed chain, ordered by (theta, phi).
    Angles(Vec<StateAngles>),
}

/// Validated scan request: a config template, a swept grid, the model to
/// run, and the initial state.
#[derive(Clone, Debug)]
pub struct ScanSpec {
    model: Model,
    initial: StateAngles,
    values: Vec<f64>,
    configs: Vec<ChainConfig>,
    initials: Vec<StateAngles>,
}

fn strictly_monotone(keys: &[(f64, f64)]) -> bool {
    if keys.len() < 2 {
        return true;
    }
    let up = keys.windows(2).all(|w| w[0] < w[1]);
    let down = keys.windows(2).all(|w| w[0] > w[1]);
    up || down
}

impl ScanSpec {
    /// Check the grid and materialize one valid configuration per point.
    pub fn new(
        template: ChainConfig,
        sweep: Sweep,
        model: Model,
        initial: StateAngles,
    ) -> Result<Self> {
        let keys: Vec<(f64, f64)> = match &sweep {
            Sweep::Phi(g) => g.iter().map(|&v| (v, 0.0)).collect(),
            Sweep::Omega(g) => g.iter().map(|&v| (v, 0.0)).collect(),
            Sweep::Sites(g) => g.iter().map(|&v| (v as f64, 0.0)).collect(),
            Sweep::Angles(g) => g.iter().map(|a| (a.theta, a.phi)).collect(),
        };
        if keys.is_empty() {
            return Err(Error::search("scan grid is empty"));
        }
        if !strictly_monotone(&keys) {
            return Err(Error::search("scan grid must be strictly monotone"));
        }
        // Offset displacement from the default, preserved across rebuilds.
        let offset_shift = template.phi0() - ChainConfig::default_phi0(template.n(), template.phi());
        let mut configs = Vec::with_capacity(keys.len());
        let mut initials = Vec::with_capacity(keys.len());
        match &sweep {
            Sweep::Phi(g) => {
                for &phi in g {
                    let cfg = ChainConfig::new(template.n(), template.j_se(), template.omega(), phi)?
                        .with_phi0(ChainConfig::default_phi0(template.n(), phi) + offset_shift)
                        .with_boundary(template.boundary());
                    configs.push(cfg);
                    initials.push(initial);
                }
            }
            Sweep::Omega(g) => {
                for &omega in g {
                    let cfg = ChainConfig::new(template.n(), template.j_se(), omega, template.phi())?
                        .with_phi0(template.phi0())
                        .with_boundary(template.boundary());
                    configs.push(cfg);
                    initials.push(initial);
                }
            }
            Sweep::Sites(g) => {
                for &n in g {
                    let cfg = ChainConfig::new(n, template.j_se(), template.omega(), template.phi())?
                        .with_phi0(ChainConfig::default_phi0(n, template.phi()) + offset_shift)
                        .with_boundary(template.boundary());
                    configs.push(cfg);
                    initials.push(initial);
                }
            }
            Sweep::Angles(g) => {
                for &a in g {
                    configs.push(template);
                    initials.push(a);
                }
            }
        }
        Ok(ScanSpec {
            model,
            initial,
            values: keys.iter().map(|k| k.0).collect(),
            configs,
            initials,
        })
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn initial(&self) -> StateAngles {
        self.initial
    }

    /// Scalar grid value keying point `i` in output rows: the swept phase,
    /// amplitude, site count, or polar angle.
    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn config(&self, i: usize) -> &ChainConfig {
        &self.configs[i]
    }

    pub fn initial_at(&self, i: usize) -> StateAngles {
        self.initials[i]
    }
}

/// Analytic best-squeezing timescale ln(n/2) / (2 sqrt(2) (n-1) |chi_z|),
/// used only to size search windows, never to seed the minimum.
///
/// On the commensurate grid this reduces to
/// ln(n/2) |cos(phi) - 1| j / (sqrt(2) omega^2). A periodic ring twists
/// more slowly than the open chain, so its estimate carries an extra
/// factor of four of headroom.
pub fn reference_time(cfg: &ChainConfig) -> Result<f64> {
    if cfg.omega() == 0.0 {
        return Err(Error::search(
            "an undriven chain never squeezes; no reference timescale exists",
        ));
    }
    let open = match cfg.boundary() {
        Boundary::Open => *cfg,
        Boundary::Periodic => ChainConfig::new(cfg.n(), cfg.j_se(), cfg.omega(), cfg.phi())?
            .with_phi0(cfg.phi0()),
    };
    let (chi_z, _) = chi_coefficients(&open)?;
    let n = cfg.n() as f64;
    let base = (n / 2.0).ln() / (2.0 * 2f64.sqrt() * (n - 1.0) * chi_z.abs());
    Ok(match cfg.boundary() {
        Boundary::Open => base,
        Boundary::Periodic => 4.0 * base,
    })
}

/// Controls for locating the squeezing minimum.
#[derive(Clone, Copy, Debug)]
pub struct SearchSettings {
    /// Absolute search horizon in 1/J units; when absent the horizon is
    /// `t_max_factor` reference times.
    pub t_max: Option<f64>,
    pub t_max_factor: f64,
    /// Density of the coarse logarithmic stage.
    pub points_per_decade: usize,
    /// Number of decades the coarse stage spans below the horizon.
    pub decades: usize,
    /// Relative time resolution of the refinement stage.
    pub relative_resolution: f64,
    pub krylov: KrylovParams,
    /// Raise the exact-evolution site cap from 12 to 16.
    pub allow_large_full_chain: bool,
}

impl Default for SearchSettings {
    fn default() -> Self {
        SearchSettings {
            t_max: None,
            t_max_factor: 30.0,
            points_per_decade: 64,
            decades: 7,
            relative_resolution: 1e-3,
            krylov: KrylovParams::default(),
            allow_large_full_chain: false,
        }
    }
}

impl SearchSettings {
    /// Check the grid-shape knobs; run before committing to a long scan.
    pub fn validate(&self) -> Result<()> {
        if self.points_per_decade < 4 {
            return Err(Error::search("coarse stage needs at least 4 points per decade"));
        }
        if self.decades == 0 {
            return Err(Error::search("coarse stage needs at least one decade"));
        }
        if !(self.relative_resolution > 0.0 && self.relative_resolution <= 0.1) {
            return Err(Error::search(
                "relative time resolution must lie in (0, 0.1]",
            ));
        }
        Ok(())
    }

    /// Horizon for `cfg`, holding the precondition that it clears the
    /// analytic estimate with at least three-fold headroom.
    fn resolved_t_max(&self, cfg: &ChainConfig) -> Result<f64> {
        let estimate = reference_time(cfg)?;
        let t_max = self.t_max.unwrap_or(self.t_max_factor * estimate);
        if !(t_max.is_finite() && t_max > 0.0) {
            return Err(Error::search("search horizon must be positive and finite"));
        }
        if t_max < 3.0 * estimate {
            return Err(Error::search(format!(
                "search horizon {t_max:.3e} is under three reference times {estimate:.3e}; \
                 the minimum could sit beyond it"
            )));
        }
        Ok(t_max)
    }
}

/// Outcome of a best-squeezing search at one configuration.
#[derive(Clone, Copy, Debug)]
pub struct BestSqueezingResult {
    pub phi: f64,
    /// Smallest squeezing parameter found; never above the coherent level.
    pub xi2_best: f64,
    /// Time of the minimum in 1/J units; strictly positive.
    pub t_best: f64,
    /// Anisotropy ratio at this phase; NaN on a periodic ring, where the
    /// ladder parameters are undefined.
    pub eta: f64,
    /// Collective-drive ratio; NaN on a periodic ring.
    pub gamma: f64,
    /// Set when xi^2 was still falling at the search horizon.
    pub warn_local_min: bool,
    pub model: Model,
}

/// Trace evaluation backends for the minimum search.
enum Evaluator {
    Ladder {
        n: usize,
        prop: EigenPropagator,
        coeffs: Vec<C64>,
        sx: CollectiveOperator,
        sy: CollectiveOperator,
        sz: CollectiveOperator,
    },
    Full {
        n: usize,
        h: SparseOperator,
        psi0: Vec<C64>,
        sx: SparseOperator,
        sy: SparseOperator,
        sz: SparseOperator,
        krylov: KrylovParams,
    },
}

impl Evaluator {
    fn for_model(
        cfg: &ChainConfig,
        initial: StateAngles,
        model: Model,
        settings: &SearchSettings,
    ) -> Result<Self> {
        match model {
            Model::Effective => {
                Self::from_ladder_matrix(cfg.n(), build_h_eff(cfg)?, initial)
            }
            Model::FullChain => {
                let n = cfg.n();
                let cap = if settings.allow_large_full_chain {
                    FULL_CHAIN_HARD_CAP
                } else {
                    FULL_CHAIN_DEFAULT_CAP
                };
                if n > cap {
                    return Err(Error::unsupported(format!(
                        "exact evolution of {n} sites exceeds the cap of {cap}; \
                         the effective model covers large chains"
                    )));
                }
                let basis = ProductBasis::full(n)?;
                let h = build_h_spin(cfg, &basis)?;
                let psi0 = coherent_state_full(&basis, initial.theta, initial.phi)?;
                Ok(Evaluator::Full {
                    n,
                    sx: build_collective(&basis, Axis::X)?,
                    sy: build_collective(&basis, Axis::Y)?,
                    sz: build_collective(&basis, Axis::Z)?,
                    h,
                    psi0,
                    krylov: settings.krylov,
                })
            }
        }
    }

    /// Ladder evaluator over an arbitrary collective Hamiltonian.
    fn from_ladder_matrix(
        n: usize,
        h: CollectiveOperator,
        initial: StateAngles,
    ) -> Result<Evaluator> {
        let prop = EigenPropagator::from_collective(&h)?;
        let psi0 = coherent_state_dicke(n, initial.theta, initial.phi)?;
        let coeffs = prop.to_eigenbasis(&psi0)?;
        Ok(Evaluator::Ladder {
            n,
            prop,
            coeffs,
            sx: collective_operator(n, CollectiveKind::Sx)?,
            sy: collective_operator(n, CollectiveKind::Sy)?,
            sz: collective_sz(n)?,
        })
    }

    /// Squeezing samples along ascending times. Frame collapse maps to
    /// flagged NaN samples; the search decides how to treat them.
    fn trace(&self, times: &[f64]) -> Result<SqueezingTrace> {
        let mut samples = Vec::with_capacity(times.len());
        match self {
            Evaluator::Ladder {
                n,
                prop,
                coeffs,
                sx,
                sy,
                sz,
            } => {
                for &t in times {
                    let psi = prop.state_at(coeffs, t)?;
                    samples.push(sample_or_flag(&psi, *n, sx, sy, sz)?);
                }
            }
            Evaluator::Full {
                n,
                h,
                psi0,
                sx,
                sy,
                sz,
                krylov,
            } => {
                // One sequential march; states are never all held at once.
                let mut prop = KrylovPropagator::new(h, *krylov)?;
                let mut psi = psi0.clone();
                let mut now = 0.0;
                for &t in times {
                    if t > now {
                        prop.advance(&mut psi, t - now)?;
                        now = t;
                    }
                    samples.push(sample_or_flag(&psi, *n, sx, sy, sz)?);
                }
            }
        }
        Ok(SqueezingTrace {
            times: times.to_vec(),
            samples,
        })
    }
}

fn sample_or_flag<T: HermitianOp>(
    psi: &[C64],
    n: usize,
    sx: &T,
    sy: &T,
    sz: &T,
) -> Result<SqueezingSample> {
    match squeezing_parameter(psi, n, sx, sy, sz) {
        Ok(s) => Ok(s),
        Err(Error::MeanSpinCollapsed { .. }) => Ok(SqueezingSample {
            xi2: f64::NAN,
            mean: [0.0, 0.0, 0.0],
            var_min: f64::NAN,
            collapsed: true,
        }),
        Err(e) => Err(e),
    }
}

/// Ascending logarithmic grid ending exactly at `t_max`.
fn log_grid(t_max: f64, points_per_decade: usize, decades: usize) -> Vec<f64> {
    let total = points_per_decade * decades;
    (0..=total)
        .map(|i| t_max * 10f64.powf((i as f64 - total as f64) / points_per_decade as f64))
        .collect()
}

/// Uniform grid from `lo` to `hi` with spacing at most `step`.
fn uniform_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    if !(hi > lo) {
        return vec![lo];
    }
    let count = (((hi - lo) / step).ceil() as usize).clamp(2, 200_000);
    (0..=count)
        .map(|i| lo + (hi - lo) * i as f64 / count as f64)
        .collect()
}

/// Index of the smallest valid sample and the length of the valid prefix
/// (everything before the first collapse).
fn argmin_valid(trace: &SqueezingTrace) -> (Option<usize>, usize) {
    let valid_len = trace
        .samples
        .iter()
        .position(|s| s.collapsed)
        .unwrap_or(trace.samples.len());
    let mut best: Option<usize> = None;
    for i in 0..valid_len {
        let x = trace.samples[i].xi2;
        if !x.is_finite() {
            continue;
        }
        if best.is_none_or(|b| x < trace.samples[b].xi2) {
            best = Some(i);
        }
    }
    (best, valid_len)
}

/// Two-stage minimum search over the trace closure: coarse logarithmic
/// stage, then a uniform refinement across the bracketing interval.
/// Returns (t_best, xi2_best, warn_local_min).
fn locate_minimum<F>(mut trace_of: F, t_max: f64, settings: &SearchSettings) -> Result<(f64, f64, bool)>
where
    F: FnMut(&[f64]) -> Result<SqueezingTrace>,
{
    let coarse_times = log_grid(t_max, settings.points_per_decade, settings.decades);
    let coarse = trace_of(&coarse_times)?;
    let (best, valid_len) = argmin_valid(&coarse);
    let truncated = valid_len < coarse.times.len();
    let Some(idx) = best else {
        return Err(Error::SearchCollapsed {
            at_time: coarse.times[valid_len.min(coarse.times.len() - 1)],
            partial: Box::new(coarse),
        });
    };
    // A minimum adjacent to the collapse was never bracketed from the
    // right; the trace was still falling when the frame vanished.
    if truncated && idx + 1 == valid_len {
        return Err(Error::SearchCollapsed {
            at_time: coarse.times[valid_len],
            partial: Box::new(coarse),
        });
    }
    let warn_local_min = idx + 1 == coarse.times.len();

    let lo = coarse.times[idx.saturating_sub(1)];
    let hi = coarse.times[(idx + 1).min(valid_len - 1)];
    let step = settings.relative_resolution * coarse.times[idx];
    let fine = trace_of(&uniform_grid(lo, hi, step))?;
    let (fine_best, _) = argmin_valid(&fine);

    let mut t_best = coarse.times[idx];
    let mut xi2_best = coarse.samples[idx].xi2;
    if let Some(f) = fine_best {
        if fine.samples[f].xi2 < xi2_best {
            t_best = fine.times[f];
            xi2_best = fine.samples[f].xi2;
        }
    }
    Ok((t_best, xi2_best, warn_local_min))
}

/// Locate the best squeezing of one configuration on the chosen model.
///
/// The search never consults the analytic minimum location: the coarse
/// stage spans the horizon logarithmically and the refinement closes in on
/// whatever bracket it finds, so scaling laws read off these results are
/// not circular.
pub fn best_squeezing(
    cfg: &ChainConfig,
    initial: StateAngles,
    model: Model,
    settings: &SearchSettings,
) -> Result<BestSqueezingResult> {
    settings.validate()?;
    let t_max = settings.resolved_t_max(cfg)?;
    let eval = Evaluator::for_model(cfg, initial, model, settings)?;
    let (t_best, xi2_best, warn_local_min) = locate_minimum(|ts| eval.trace(ts), t_max, settings)?;
    if !(xi2_best <= 1.0 + 1e-10) {
        return Err(Error::numerical(format!(
            "located minimum {xi2_best:.6} sits above the coherent level; \
             the coarse grid no longer reaches the short-time limit"
        )));
    }
    let (eta, gamma) = match cfg.boundary() {
        Boundary::Open => {
            let p = effective_params(cfg)?;
            (p.eta, p.gamma)
        }
        Boundary::Periodic => (f64::NAN, f64::NAN),
    };
    Ok(BestSqueezingResult {
        phi: cfg.phi(),
        xi2_best,
        t_best,
        eta,
        gamma,
        warn_local_min,
        model,
    })
}

/// Squeezing trace of one configuration on the chosen model along
/// ascending sample times. Exact evolution honors the site caps; frame
/// collapse shows up as flagged samples, not errors.
pub fn model_trace(
    cfg: &ChainConfig,
    initial: StateAngles,
    model: Model,
    settings: &SearchSettings,
    times: &[f64],
) -> Result<SqueezingTrace> {
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::search("sample times must be non-negative and sorted"));
    }
    Evaluator::for_model(cfg, initial, model, settings)?.trace(times)
}

/// Effective-model parameter row at one grid point.
#[derive(Clone, Copy, Debug)]
pub struct ParamPoint {
    pub index: usize,
    pub value: f64,
    pub params: EffectiveParams,
}

/// Effective parameters along the scan grid.
pub fn scan_eta_gamma(spec: &ScanSpec) -> Result<Vec<ParamPoint>> {
    if spec.model() == Model::FullChain {
        return Err(Error::unsupported(
            "parameter scans read the collective ladder model; select the effective model",
        ));
    }
    (0..spec.len())
        .map(|i| {
            effective_params(spec.config(i)).map(|params| ParamPoint {
                index: i,
                value: spec.value(i),
                params,
            })
        })
        .collect()
}

/// One completed point of a best-squeezing scan. Failures stay attached to
/// their point instead of aborting the scan.
#[derive(Debug)]
pub struct ScanPoint {
    pub index: usize,
    pub value: f64,
    pub result: Result<BestSqueezingResult>,
}

/// Best-squeezing search at every scan point from `start_index` on,
/// executed by the thread pool but handed to `sink` strictly in grid
/// order, one point as soon as its prefix is complete. Per-point errors
/// are data; only harness failures abort.
pub fn scan_best_squeezing_streaming<F>(
    spec: &ScanSpec,
    settings: &SearchSettings,
    start_index: usize,
    sink: F,
) -> Result<()>
where
    F: FnMut(ScanPoint) + Send,
{
    if start_index > spec.len() {
        return Err(Error::search(format!(
            "resume index {start_index} is past the {} grid points",
            spec.len()
        )));
    }
    let state = Mutex::new((start_index, BTreeMap::new(), sink));
    (start_index..spec.len())
        .into_par_iter()
        .try_for_each(|i| -> Result<()> {
            let result = best_squeezing(spec.config(i), spec.initial_at(i), spec.model(), settings);
            let point = ScanPoint {
                index: i,
                value: spec.value(i),
                result,
            };
            let mut guard = state
                .lock()
                .map_err(|_| Error::numerical("a scan worker panicked; the sink is poisoned"))?;
            let (next, buffer, sink) = &mut *guard;
            buffer.insert(i, point);
            while let Some(p) = buffer.remove(next) {
                sink(p);
                *next += 1;
            }
            Ok(())
        })
}

/// Collected best-squeezing scan in grid order.
pub fn scan_best_squeezing(spec: &ScanSpec, settings: &SearchSettings) -> Result<Vec<ScanPoint>> {
    let mut out = Vec::with_capacity(spec.len());
    scan_best_squeezing_streaming(spec, settings, 0, |p| out.push(p))?;
    Ok(out)
}

/// Asymptotic best-squeezing guide levels for a chain of `n` spins: pure
/// axis twisting reaches n^{-2/3}, planar twisting the n^{-1} scaling.
#[derive(Clone, Copy, Debug)]
pub struct SqueezingReferences {
    pub one_axis_level: f64,
    pub two_axis_level: f64,
}

pub fn squeezing_references(n: usize) -> SqueezingReferences {
    SqueezingReferences {
        one_axis_level: (n as f64).powf(-2.0 / 3.0),
        two_axis_level: 1.0 / n as f64,
    }
}

/// Measured influence of the collective-drive term on the located minimum:
/// the ratio of xi2_best with the planar drive removed from the ladder
/// Hamiltonian to the full value. Recorded as data, not bounded; the
/// drive term tends not to dominate even when gamma is large.
pub fn drive_term_influence(
    cfg: &ChainConfig,
    initial: StateAngles,
    settings: &SearchSettings,
) -> Result<f64> {
    settings.validate()?;
    let t_max = settings.resolved_t_max(cfg)?;
    let with_drive = best_squeezing(cfg, initial, Model::Effective, settings)?;

    let n = cfg.n();
    let split = split_coupling(cfg)?;
    let sx = collective_operator(n, CollectiveKind::Sx)?;
    let sy = collective_operator(n, CollectiveKind::Sy)?;
    let mut mat = build_h_eff(cfg)?.matrix().clone();
    mat -= sx.matrix().map(|z| C64::new(2.0 * split.v_x, 0.0) * z);
    mat -= sy.matrix().map(|z| C64::new(2.0 * split.v_y, 0.0) * z);
    let stripped = CollectiveOperator::from_matrix(n, mat)?;
    let eval = Evaluator::from_ladder_matrix(n, stripped, initial)?;
    let (_, xi2_stripped, _) = locate_minimum(|ts| eval.trace(ts), t_max, settings)?;
    Ok(xi2_stripped / with_drive.xi2_best)
}

/// One oracle check with its measured residual.
#[derive(Clone, Debug)]
pub struct ValidationCheck {
    pub name: String,
    pub residual: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Measured quantity recorded alongside the checks without a bound.
#[derive(Clone, Debug)]
pub struct Observation {
    pub name: String,
    pub value: f64,
}

/// Aggregated oracle report over the requested chain sizes.
#[derive(Clone, Debug, Default)]
pub struct ValidationReport {
    pub checks: Vec<ValidationCheck>,
    pub observations: Vec<Observation>,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    fn push(&mut self, name: String, residual: f64, tol: f64) {
        self.checks.push(ValidationCheck {
            pass: residual.is_finite() && residual <= tol,
            name,
            residual,
            tol,
        });
    }

    fn observe(&mut self, name: String, value: f64) {
        self.observations.push(Observation { name, value });
    }
}

fn apply_to(op: &SparseOperator, x: &[C64]) -> Vec<C64> {
    let mut y = vec![C64::new(0.0, 0.0); x.len()];
    op.apply(x, &mut y);
    y
}

fn validation_config(n: usize) -> Result<ChainConfig> {
    let cfg = ChainConfig::new(n, 1.0, 0.0, PI)?;
    ChainConfig::new(n, 1.0, cfg.first_magnon_gap() / 10.0, PI - 2.0 * PI / n as f64)
}

/// Run every module oracle over the listed chain sizes and aggregate the
/// residuals into one machine-readable report. Failures are data; the only
/// errors are invalid size requests (even, 4 to 12) or harness breakage.
pub fn validate_all(n_list: &[usize]) -> Result<ValidationReport> {
    for &n in n_list {
        if n < 4 || n % 2 != 0 {
            return Err(Error::SiteCount { n });
        }
        if n > FULL_CHAIN_DEFAULT_CAP {
            return Err(Error::unsupported(format!(
                "oracle checks run the exact chain; {n} sites exceeds the cap of \
                 {FULL_CHAIN_DEFAULT_CAP}"
            )));
        }
    }
    let mut report = ValidationReport::default();
    for &n in n_list {
        validate_one(n, &mut report)?;
    }
    // Fixed-size propagation cross-checks, independent of the list.
    propagation_checks(&mut report)?;
    drive_influence_observation(&mut report)?;
    Ok(report)
}

fn validate_one(n: usize, report: &mut ValidationReport) -> Result<()> {
    let cfg = validation_config(n)?;
    let full = ProductBasis::full(n)?;
    let h_open = build_h_se(&cfg, &full)?;
    let h_ring = build_h_se(&cfg.with_boundary(Boundary::Periodic), &full)?;

    // Symmetric multiplet at exactly zero exchange energy, both geometries.
    let mut dev_open = 0.0f64;
    let mut dev_ring = 0.0f64;
    for k in 0..=n {
        let m = k as i32 - n as i32 / 2;
        let d = dicke_state(n, m)?.embed(&full)?;
        dev_open = dev_open.max(norm(&apply_to(&h_open, &d)));
        dev_ring = dev_ring.max(norm(&apply_to(&h_ring, &d)));
    }
    report.push(format!("dicke_zero_energy_open_n{n}"), dev_open, 1e-10);
    report.push(format!("dicke_zero_energy_ring_n{n}"), dev_ring, 1e-10);

    // Spin-wave states solve the exchange model sector by sector.
    let mut dev = 0.0f64;
    for m in (1 - n as i32 / 2)..=(n as i32 / 2 - 1) {
        let sector = ProductBasis::sector(n, m)?;
        let h_sector = build_h_se(&cfg, &sector)?;
        for q in 1..n {
            let sw = spin_wave_state(n, m, q, LadderBranch::Raise)?;
            let psi = sw.amplitudes();
            let mut res = apply_to(&h_sector, psi);
            let e = cfg.j_se() * magnon_energy(n, q);
            for (r, p) in res.iter_mut().zip(psi) {
                *r -= C64::new(e, 0.0) * p;
            }
            dev = dev.max(norm(&res));
        }
    }
    report.push(format!("spin_wave_residual_n{n}"), dev, 1e-10);

    // Both ladder branches reach the same physical state.
    let mut dev = 0.0f64;
    for q in 1..=(n - 1).min(3) {
        let up = spin_wave_state(n, 0, q, LadderBranch::Raise)?;
        let down = spin_wave_state(n, 0, q, LadderBranch::Lower)?;
        let overlap = inner(up.amplitudes(), down.amplitudes()).norm();
        dev = dev.max((overlap - 1.0).abs());
    }
    report.push(format!("ladder_branch_overlap_n{n}"), dev, 1e-12);

    // Tridiagonal magnon energies against the closed dispersion.
    let eig = one_magnon_eigensystem(n)?;
    let dev = eig
        .modes()
        .iter()
        .map(|mode| (mode.energy - magnon_energy(n, mode.q)).abs())
        .fold(0.0f64, f64::max);
    report.push(format!("magnon_dispersion_n{n}"), dev, 1e-12);

    // Drive amplitudes: closed kernel against compensated site sums.
    let mut dev = 0.0f64;
    for phi in [PI - 2.0 * PI / n as f64, 1.0] {
        let c = ChainConfig::new(n, 1.0, 0.1, phi)?;
        let closed = coupling_amplitudes(&c)?;
        let direct = coupling_amplitudes_direct(&c)?;
        for (a, b) in closed.iter().zip(&direct) {
            dev = dev.max((a - b).norm());
        }
    }
    report.push(format!("drive_amplitude_n{n}"), dev, 1e-12);

    // Twisting coefficients against their commensurate closed forms.
    let mut dev = 0.0f64;
    for k in 1..n {
        let c = ChainConfig::new(n, 1.0, 0.05, 2.0 * PI * k as f64 / n as f64)?;
        let (chi_z, chi_x) = chi_coefficients(&c)?;
        let (f_diag, f_off) = closed_form_factors(&c)?;
        let pref = chi_prefactor(&c);
        let scale = chi_z.abs().max((pref * f_diag).abs());
        dev = dev.max((chi_z - pref * f_diag).abs() / scale);
        dev = dev.max((chi_x - f_off * pref).norm() / scale);
    }
    report.push(format!("closed_form_chi_n{n}"), dev, 1e-10);

    // Ladder model against the literal resolvent.
    let h_eff = build_h_eff(&cfg)?;
    let oracle = second_order_oracle(&cfg)?;
    let dev = (h_eff.matrix() - &oracle)
        .iter()
        .map(|z| z.norm())
        .fold(0.0f64, f64::max);
    report.push(format!("effective_oracle_n{n}"), dev, 1e-10);

    // Collective ladder elements against their integer squares, and the
    // magnetization of spin-wave states: closed small-integer arithmetic.
    let s = n as f64 / 2.0;
    let sp = build_collective(&full, Axis::Plus)?;
    let mut dev = 0.0f64;
    for k in 0..n {
        let m = k as i32 - n as i32 / 2;
        let below = dicke_state(n, m)?.embed(&full)?;
        let above = dicke_state(n, m + 1)?.embed(&full)?;
        let amp = inner(&above, &apply_to(&sp, &below));
        let mf = m as f64;
        let exact = (s - mf) * (s + mf + 1.0);
        dev = dev.max((amp.norm_sqr() - exact).abs());
        dev = dev.max(amp.im.abs());
    }
    let sz = build_collective(&full, Axis::Z)?;
    for m in [1 - n as i32 / 2, 0, n as i32 / 2 - 1] {
        let sw = spin_wave_state(n, m, 1, LadderBranch::Raise)?.embed(&full)?;
        let mz = inner(&sw, &apply_to(&sz, &sw));
        dev = dev.max((mz.re - m as f64).abs()).max(mz.im.abs());
    }
    report.push(format!("ladder_elements_n{n}"), dev, 1e-12);

    // Coherent states: ladder coefficients against the product state.
    let theta = 1.1;
    let phi_b = 0.7;
    let product = coherent_state_full(&full, theta, phi_b)?;
    let ladder = coherent_state_dicke(n, theta, phi_b)?;
    let mut dev = (norm(&product) - 1.0).abs();
    for k in 0..=n {
        let d = dicke_state(n, k as i32 - n as i32 / 2)?.embed(&full)?;
        dev = dev.max((inner(&d, &product) - ladder[k]).norm());
    }
    report.push(format!("coherent_overlap_n{n}"), dev, 1e-12);

    // Coherent states start exactly unsqueezed.
    let sx = build_collective(&full, Axis::X)?;
    let sy = build_collective(&full, Axis::Y)?;
    let psi = coherent_state_full(&full, PI / 2.0, 0.0)?;
    let sample = squeezing_parameter(&psi, n, &sx, &sy, &sz)?;
    report.push(format!("unsqueezed_start_n{n}"), (sample.xi2 - 1.0).abs(), 1e-10);

    // Dense zero-energy multiplicity, affordable on small chains only.
    if n <= 8 {
        let eigvals = h_open.to_dense().symmetric_eigen().eigenvalues;
        let zeros = eigvals.iter().filter(|e| e.abs() < 1e-10).count();
        let above = eigvals.iter().filter(|&&e| e > 1e-10).count();
        report.push(
            format!("zero_energy_multiplicity_n{n}"),
            (zeros as f64 - (n + 1) as f64).abs() + above as f64,
            0.5,
        );
    }
    Ok(())
}

/// Propagator cross-checks on a fixed six-site drive.
fn propagation_checks(report: &mut ValidationReport) -> Result<()> {
    let n = 6;
    let cfg = validation_config(n)?;
    let full = ProductBasis::full(n)?;
    let h = build_h_spin(&cfg, &full)?;
    let psi0 = coherent_state_full(&full, PI / 2.0, 0.0)?;
    let times: Vec<f64> = (0..=12).map(|k| k as f64 * 9.0).collect();

    let prop = EigenPropagator::from_sparse(&h)?;
    let coeffs = prop.to_eigenbasis(&psi0)?;
    let mut kry = KrylovPropagator::new(&h, KrylovParams::default())?;
    let mut psi = psi0.clone();
    let mut now = 0.0;
    let mut dev = 0.0f64;
    let mut drift = 0.0f64;
    let mut e_dev = 0.0f64;
    let e0 = h.expectation(&psi0);
    for &t in &times {
        if t > now {
            kry.advance(&mut psi, t - now)?;
            now = t;
        }
        let dense = prop.state_at(&coeffs, t)?;
        let d: f64 = psi
            .iter()
            .zip(&dense)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        dev = dev.max(d);
        drift = drift.max((norm(&psi) - 1.0).abs());
        e_dev = e_dev.max((h.expectation(&psi) - e0).abs());
    }
    report.push("propagator_agreement_n6".into(), dev, 1e-8);
    report.push("march_unitarity_n6".into(), drift, 1e-10);
    report.push("march_energy_drift_n6".into(), e_dev, 1e-8);
    Ok(())
}

/// Record how much the collective-drive term moves the located minimum on
/// a hundred-site ladder at an incommensurate phase where gamma is large.
fn drive_influence_observation(report: &mut ValidationReport) -> Result<()> {
    let n = 100;
    let probe = ChainConfig::new(n, 1.0, 0.0, PI)?;
    let omega = probe.first_magnon_gap() / 10.0;
    let cfg = ChainConfig::new(n, 1.0, omega, 2.0 * PI * 5.37 / n as f64)?;
    let ratio = drive_term_influence(&cfg, StateAngles::new(0.0, 0.0), &SearchSettings::default())?;
    report.observe("drive_term_influence_n100".into(), ratio);
    let gamma = effective_params(&cfg)?.gamma;
    report.observe("drive_term_gamma_n100".into(), gamma);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_sample(xi2: f64, collapsed: bool) -> SqueezingSample {
        SqueezingSample {
            xi2,
            mean: [4.0, 0.0, 0.0],
            var_min: xi2,
            collapsed,
        }
    }

    /// Synthetic trace closure from a shape function plus a collapse time.
    fn synthetic(
        shape: impl Fn(f64) -> f64 + Copy,
        collapse_after: f64,
    ) -> impl FnMut(&[f64]) -> Result<SqueezingTrace> {
        move |times: &[f64]| {
            let samples = times
                .iter()
                .map(|&t| {
                    if t > collapse_after {
                        flat_sample(f64::NAN, true)
                    } else {
                        flat_sample(shape(t), false)
                    }
                })
                .collect();
            Ok(SqueezingTrace {
                times: times.to_vec(),
                samples,
            })
        }
    }

    #[test]
    fn scan_spec_checks_grid_shape() {
        let template = ChainConfig::new(8, 1.0, 0.1, PI).unwrap();
        let initial = StateAngles::new(PI / 2.0, 0.0);
        assert!(matches!(
            ScanSpec::new(template, Sweep::Phi(vec![]), Model::Effective, initial),
            Err(Error::Search { .. })
        ));
        assert!(ScanSpec::new(
            template,
            Sweep::Phi(vec![1.0, 0.5, 2.0]),
            Model::Effective,
            initial
        )
        .is_err());
        // Decreasing grids are monotone too.
        assert!(ScanSpec::new(
            template,
            Sweep::Phi(vec![2.0, 1.0, 0.5]),
            Model::Effective,
            initial
        )
        .is_ok());
        // Grid values must satisfy the config rules.
        assert!(ScanSpec::new(
            template,
            Sweep::Phi(vec![0.0, 1.0]),
            Model::Effective,
            initial
        )
        .is_err());
    }

    #[test]
    fn phi_sweep_keeps_the_offset_family() {
        let template = ChainConfig::new(8, 1.0, 0.1, PI)
            .unwrap()
            .with_phi0(ChainConfig::default_phi0(8, PI) + 0.25);
        let spec = ScanSpec::new(
            template,
            Sweep::Phi(vec![1.0, 2.0]),
            Model::Effective,
            StateAngles::new(0.0, 0.0),
        )
        .unwrap();
        for i in 0..spec.len() {
            let c = spec.config(i);
            let shift = c.phi0() - ChainConfig::default_phi0(8, c.phi());
            assert!((shift - 0.25).abs() < 1e-12);
        }
        assert_eq!(spec.value(1), 2.0);
    }

    #[test]
    fn log_grid_spans_the_decades() {
        let g = log_grid(10.0, 8, 3);
        assert_eq!(g.len(), 25);
        assert!((g[24] - 10.0).abs() < 1e-12);
        assert!((g[0] - 1e-2).abs() < 1e-12);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn minimum_search_refines_a_synthetic_valley() {
        // Parabola in log t with its minimum at t = 3.7.
        let shape = |t: f64| 0.2 + (t.ln() - 3.7f64.ln()).powi(2);
        let settings = SearchSettings::default();
        let (t, x, warn) = locate_minimum(synthetic(shape, f64::INFINITY), 100.0, &settings).unwrap();
        assert!(!warn);
        assert!((t - 3.7).abs() < 2e-3 * 3.7, "t={t}");
        assert!((x - 0.2).abs() < 1e-5);
    }

    #[test]
    fn still_falling_traces_raise_the_horizon_flag() {
        let shape = |t: f64| 1.0 / (1.0 + t);
        let settings = SearchSettings::default();
        let (t, _, warn) = locate_minimum(synthetic(shape, f64::INFINITY), 50.0, &settings).unwrap();
        assert!(warn);
        assert!((t - 50.0).abs() < 1e-9);
    }

    #[test]
    fn collapse_before_any_minimum_is_an_error() {
        // Still falling when the frame dies at t = 1.
        let shape = |t: f64| 1.0 / (1.0 + t);
        let settings = SearchSettings::default();
        match locate_minimum(synthetic(shape, 1.0), 50.0, &settings) {
            Err(Error::SearchCollapsed { at_time, partial }) => {
                assert!(at_time > 1.0);
                assert!(partial.samples.iter().any(|s| s.collapsed));
                assert!(partial.samples.iter().any(|s| !s.collapsed));
            }
            other => panic!("expected collapse error, got {other:?}"),
        }
    }

    #[test]
    fn collapse_after_the_minimum_is_tolerated() {
        let shape = |t: f64| 0.3 + (t.ln() - 1.0f64.ln()).powi(2);
        let settings = SearchSettings::default();
        // The frame dies well past the valley at t = 1.
        let (t, x, warn) = locate_minimum(synthetic(shape, 20.0), 100.0, &settings).unwrap();
        assert!((t - 1.0).abs() < 2e-3);
        assert!((x - 0.3).abs() < 1e-5);
        assert!(!warn);
    }

    #[test]
    fn ladder_search_sits_in_a_real_valley() {
        let cfg = ChainConfig::new(20, 1.0, 0.01, PI).unwrap();
        let res = best_squeezing(
            &cfg,
            StateAngles::new(PI / 2.0, 0.0),
            Model::Effective,
            &SearchSettings::default(),
        )
        .unwrap();
        assert!(res.t_best > 0.0);
        assert!(res.xi2_best < 0.5);
        assert!(!res.warn_local_min);
        assert!((res.eta + 1.0).abs() < 1e-9);
        // Neighborhood probes confirm a genuine local minimum.
        let eval = Evaluator::for_model(
            &cfg,
            StateAngles::new(PI / 2.0, 0.0),
            Model::Effective,
            &SearchSettings::default(),
        )
        .unwrap();
        let probe = eval
            .trace(&[res.t_best * 0.97, res.t_best, res.t_best * 1.03])
            .unwrap();
        assert!(probe.samples[0].xi2 >= probe.samples[1].xi2 - 1e-12);
        assert!(probe.samples[2].xi2 >= probe.samples[1].xi2 - 1e-12);
        assert!((probe.samples[1].xi2 - res.xi2_best).abs() < 1e-6);
    }

    #[test]
    fn horizon_preconditions_are_enforced() {
        let cfg = ChainConfig::new(20, 1.0, 0.01, PI).unwrap();
        let est = reference_time(&cfg).unwrap();
        let tight = SearchSettings {
            t_max: Some(2.0 * est),
            ..SearchSettings::default()
        };
        assert!(matches!(
            best_squeezing(
                &cfg,
                StateAngles::new(PI / 2.0, 0.0),
                Model::Effective,
                &tight
            ),
            Err(Error::Search { .. })
        ));
        let undriven = ChainConfig::new(20, 1.0, 0.0, PI).unwrap();
        assert!(reference_time(&undriven).is_err());
    }

    #[test]
    fn full_chain_cap_requires_the_opt_in() {
        let cfg = ChainConfig::new(14, 1.0, 0.01, PI).unwrap();
        let settings = SearchSettings::default();
        assert!(matches!(
            Evaluator::for_model(
                &cfg,
                StateAngles::new(PI / 2.0, 0.0),
                Model::FullChain,
                &settings
            ),
            Err(Error::Unsupported { .. })
        ));
        let open = SearchSettings {
            allow_large_full_chain: true,
            ..settings
        };
        assert!(Evaluator::for_model(
            &cfg,
            StateAngles::new(PI / 2.0, 0.0),
            Model::FullChain,
            &open
        )
        .is_ok());
    }

    #[test]
    fn eta_gamma_scan_reproduces_commensurate_plateaus() {
        let template = ChainConfig::new(8, 1.0, 0.05, PI).unwrap();
        let grid: Vec<f64> = (1..8).map(|k| 2.0 * PI * k as f64 / 8.0).collect();
        let spec = ScanSpec::new(
            template,
            Sweep::Phi(grid),
            Model::Effective,
            StateAngles::new(0.0, 0.0),
        )
        .unwrap();
        let rows = scan_eta_gamma(&spec).unwrap();
        assert_eq!(rows.len(), 7);
        for row in &rows {
            let want = if (row.value - PI).abs() < 1e-9 { -1.0 } else { -0.5 };
            assert!((row.params.eta - want).abs() < 1e-9, "phi={}", row.value);
            assert!(row.params.gamma.abs() < 1e-9);
        }
        let full_spec = ScanSpec::new(
            template,
            Sweep::Phi(vec![1.0]),
            Model::FullChain,
            StateAngles::new(0.0, 0.0),
        )
        .unwrap();
        assert!(scan_eta_gamma(&full_spec).is_err());
    }

    #[test]
    fn streaming_scan_emits_points_in_grid_order() {
        let template = ChainConfig::new(8, 1.0, 0.02, PI).unwrap();
        let grid: Vec<f64> = (1..=6).map(|k| 2.0 * PI * k as f64 / 8.0 - 0.05).collect();
        let spec = ScanSpec::new(
            template,
            Sweep::Phi(grid),
            Model::Effective,
            StateAngles::new(PI / 2.0, PI / 2.0),
        )
        .unwrap();
        let settings = SearchSettings::default();
        let mut seen = Vec::new();
        scan_best_squeezing_streaming(&spec, &settings, 0, |p| seen.push(p.index)).unwrap();
        assert_eq!(seen, vec![0, 1, 2, 3, 4, 5]);
        // Resume from the middle replays only the tail.
        let mut tail = Vec::new();
        scan_best_squeezing_streaming(&spec, &settings, 4, |p| tail.push(p.index)).unwrap();
        assert_eq!(tail, vec![4, 5]);
        let collected = scan_best_squeezing(&spec, &settings).unwrap();
        assert_eq!(collected.len(), 6);
        assert!(collected.iter().all(|p| p.result.is_ok()));
    }

    #[test]
    fn reference_levels_scale_with_size() {
        let r = squeezing_references(100);
        assert!((r.one_axis_level - 100f64.powf(-2.0 / 3.0)).abs() < 1e-15);
        assert!((r.two_axis_level - 0.01).abs() < 1e-15);
    }

    #[test]
    fn validation_report_passes_on_small_chains() {
        let report = validate_all(&[4, 6]).unwrap();
        assert!(report.all_pass(), "failing checks: {:?}", report
            .checks
            .iter()
            .filter(|c| !c.pass)
            .collect::<Vec<_>>());
        assert!(report.checks.len() > 15);
        assert!(!report.observations.is_empty());
        assert!(validate_all(&[5]).is_err());
        assert!(validate_all(&[14]).is_err());
    }

    #[test]
    fn drive_influence_ratio_is_finite_and_positive() {
        let probe = ChainConfig::new(20, 1.0, 0.0, PI).unwrap();
        let omega = probe.first_magnon_gap() / 10.0;
        let cfg = ChainConfig::new(20, 1.0, omega, 2.0 * PI * 3.3 / 20.0).unwrap();
        let r = drive_term_influence(&cfg, StateAngles::new(0.0, 0.0), &SearchSettings::default())
            .unwrap();
        assert!(r.is_finite() && r > 0.0);
    }
}
