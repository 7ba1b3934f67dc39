//! Subcommand implementations.
//!
//! Every subcommand loads one [`RunManifest`], computes, and writes a CSV
//! data product with a sibling manifest. Failures split into two exit
//! classes: configuration errors (the run never started) and runtime
//! failures (the run started and something went wrong or a check failed).

use std::path::{Path, PathBuf};

use anyhow::anyhow;
use spinchain::chain::build_h_spin;
use spinchain::dynamics::EigenPropagator;
use spinchain::effective::effective_params;
use spinchain::experiments::{self, Model, ScanSpec, Sweep, FULL_CHAIN_DEFAULT_CAP};
use spinchain::spinwave::{coupling_amplitudes, magnon_energy};
use spinchain::{Boundary, ChainConfig, ProductBasis};

use crate::csvio::{self, fmt_flag, fmt_float, Product};
use crate::settings::{self, RunManifest, ScanPlan};

/// Dense spectra need the full 2^n matrix; beyond this they stop being a
/// desk-scale tool.
pub const SPECTRUM_SITE_CAP: usize = 12;

/// Failure carrying its exit class.
#[derive(Debug)]
pub enum CliError {
    /// The configuration never described a runnable job; exit code 2.
    Config(anyhow::Error),
    /// The job ran and failed, or a validation check failed; exit code 1.
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    pub fn inner(&self) -> &anyhow::Error {
        match self {
            CliError::Config(e) | CliError::Runtime(e) => e,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn config_err(e: impl Into<anyhow::Error>) -> CliError {
    CliError::Config(e.into())
}

fn runtime_err(e: impl Into<anyhow::Error>) -> CliError {
    CliError::Runtime(e.into())
}

/// Sort a library error into its exit class: a rejected setup is a
/// configuration problem, a mid-run numerical failure is not.
fn classify(e: spinchain::Error) -> CliError {
    use spinchain::Error as E;
    match &e {
        E::SiteCount { .. }
        | E::CouplingRange { .. }
        | E::UniformPhase { .. }
        | E::SectorRange { .. }
        | E::MagnonRange { .. }
        | E::NotCommensurate { .. }
        | E::Search { .. }
        | E::Unsupported { .. } => CliError::Config(anyhow!(e)),
        _ => CliError::Runtime(anyhow!(e)),
    }
}

/// Loaded manifest plus the effective output directory.
pub struct Invocation {
    pub manifest: RunManifest,
    pub out: PathBuf,
}

/// Read and resolve the configuration; `--out` overrides the configured
/// directory and the manifest records whichever is effective.
pub fn prepare(config: Option<&Path>, out: Option<&Path>) -> CliResult<Invocation> {
    let text = match config {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| config_err(anyhow!("reading {}: {e}", path.display())))?,
        None => String::new(),
    };
    let mut manifest = settings::load_with_process_env(&text).map_err(config_err)?;
    let out_dir = match out {
        Some(dir) => dir.to_path_buf(),
        None => PathBuf::from(&manifest.output.directory),
    };
    manifest.output.directory = out_dir.display().to_string();
    Ok(Invocation { manifest, out: out_dir })
}

impl Invocation {
    fn config(&self) -> CliResult<ChainConfig> {
        self.manifest.chain.to_config().map_err(config_err)
    }

    /// Warn once when the opt-in beyond the default exact-evolution cap is
    /// actually engaged.
    fn warn_if_large(&self, cfg: &ChainConfig) {
        if self.manifest.search.model == Model::FullChain
            && cfg.n() > FULL_CHAIN_DEFAULT_CAP
            && self.manifest.search.allow_large_full_chain
        {
            eprintln!(
                "warning: exact evolution of {} sites is beyond the default cap of \
                 {FULL_CHAIN_DEFAULT_CAP}; expect long runtimes and high memory use",
                cfg.n()
            );
        }
    }
}

/// Dense many-body spectrum, ascending, one row per eigenvalue.
pub fn spectrum(inv: &Invocation) -> CliResult<()> {
    let cfg = inv.config()?;
    if cfg.n() > SPECTRUM_SITE_CAP {
        return Err(config_err(anyhow!(
            "dense spectra are capped at {SPECTRUM_SITE_CAP} sites; {} requested",
            cfg.n()
        )));
    }
    let basis = ProductBasis::full(cfg.n()).map_err(classify)?;
    let h = build_h_spin(&cfg, &basis).map_err(classify)?;
    let prop = EigenPropagator::from_sparse(&h).map_err(classify)?;
    let mut energies = prop.eigenvalues().to_vec();
    energies.sort_by(f64::total_cmp);
    let mut product =
        Product::create(&inv.out, "spectrum", &["index", "energy"], &inv.manifest)
            .map_err(runtime_err)?;
    for (i, e) in energies.iter().enumerate() {
        product.row(&[i.to_string(), fmt_float(*e)]).map_err(runtime_err)?;
    }
    let path = product.finish().map_err(runtime_err)?;
    println!("wrote {} eigenvalues to {}", energies.len(), path.display());
    Ok(())
}

/// Magnon dispersion and drive-coupling amplitudes, one row per mode.
pub fn spinwaves(inv: &Invocation) -> CliResult<()> {
    let cfg = inv.config()?;
    if cfg.boundary() == Boundary::Periodic {
        return Err(config_err(anyhow!(
            "the standing-wave mode report is defined on the open chain"
        )));
    }
    let amps = coupling_amplitudes(&cfg).map_err(classify)?;
    let sqrt_n = (cfg.n() as f64).sqrt();
    let mut product = Product::create(
        &inv.out,
        "spinwaves",
        &["q", "E_q", "re_f_q", "im_f_q", "abs_f_q_over_sqrt_N"],
        &inv.manifest,
    )
    .map_err(runtime_err)?;
    for (i, f) in amps.iter().enumerate() {
        let q = i + 1;
        product
            .row(&[
                q.to_string(),
                fmt_float(magnon_energy(cfg.n(), q)),
                fmt_float(f.re),
                fmt_float(f.im),
                fmt_float(f.norm() / sqrt_n),
            ])
            .map_err(runtime_err)?;
    }
    let path = product.finish().map_err(runtime_err)?;
    println!("wrote {} modes to {}", amps.len(), path.display());
    Ok(())
}

const PARAM_HEADER: [&str; 8] =
    ["phi", "chi_z", "re_chi_x", "im_chi_x", "v_x", "v_y", "eta", "gamma"];

fn param_row(phi: f64, p: &spinchain::effective::EffectiveParams) -> Vec<String> {
    vec![
        fmt_float(phi),
        fmt_float(p.chi_z),
        fmt_float(p.chi_x.re),
        fmt_float(p.chi_x.im),
        fmt_float(p.v_x),
        fmt_float(p.v_y),
        fmt_float(p.eta),
        fmt_float(p.gamma),
    ]
}

fn write_param_grid(inv: &Invocation, stem: &str, plan: &ScanPlan) -> CliResult<()> {
    let cfg = inv.config()?;
    let grid = plan.grid(cfg.n()).map_err(config_err)?;
    let spec = ScanSpec::new(cfg, Sweep::Phi(grid), Model::Effective, inv.manifest.search.initial())
        .map_err(classify)?;
    let points = experiments::scan_eta_gamma(&spec).map_err(classify)?;
    let mut manifest = inv.manifest.clone();
    manifest.scan = Some(plan.clone());
    let mut product =
        Product::create(&inv.out, stem, &PARAM_HEADER, &manifest).map_err(runtime_err)?;
    for p in &points {
        product.row(&param_row(p.value, &p.params)).map_err(runtime_err)?;
    }
    let path = product.finish().map_err(runtime_err)?;
    println!("wrote {} parameter rows to {}", points.len(), path.display());
    Ok(())
}

/// Effective ladder parameters: one row at the configured phase, or one
/// per grid point when a `[scan]` section is present.
pub fn effective_params_cmd(inv: &Invocation) -> CliResult<()> {
    match &inv.manifest.scan {
        Some(plan) => write_param_grid(inv, "effective-params", plan),
        None => {
            let cfg = inv.config()?;
            let params = effective_params(&cfg).map_err(classify)?;
            let mut product =
                Product::create(&inv.out, "effective-params", &PARAM_HEADER, &inv.manifest)
                    .map_err(runtime_err)?;
            product.row(&param_row(cfg.phi(), &params)).map_err(runtime_err)?;
            let path = product.finish().map_err(runtime_err)?;
            println!("wrote 1 parameter row to {}", path.display());
            Ok(())
        }
    }
}

/// Effective parameters across a phase grid; the default grid covers
/// (0, 2 pi) with 1000 points when no `[scan]` section is given.
pub fn scan_phi(inv: &Invocation) -> CliResult<()> {
    let plan = inv.manifest.scan.clone().unwrap_or_else(ScanPlan::default_grid);
    write_param_grid(inv, "scan-phi", &plan)
}

/// Squeezing trace on a uniform time grid from zero to the configured (or
/// automatic) endpoint.
pub fn evolve(inv: &Invocation) -> CliResult<()> {
    let cfg = inv.config()?;
    let plan = &inv.manifest.search;
    let t_stop = match &plan.t_stop {
        Some(r) => r.value,
        None => {
            let t_ref = experiments::reference_time(&cfg).map_err(|e| {
                config_err(anyhow!("{e}; set search.t_stop explicitly"))
            })?;
            3.0 * t_ref
        }
    };
    let times = settings::linear_grid(0.0, t_stop, plan.samples);
    inv.warn_if_large(&cfg);
    let trace = experiments::model_trace(
        &cfg,
        plan.initial(),
        plan.model,
        &plan.to_settings(),
        &times,
    )
    .map_err(classify)?;
    let mut product = Product::create(
        &inv.out,
        "evolve",
        &["t", "xi2", "Sx", "Sy", "Sz", "var_min", "collapse_flag"],
        &inv.manifest,
    )
    .map_err(runtime_err)?;
    for (t, s) in trace.times.iter().zip(&trace.samples) {
        product
            .row(&[
                fmt_float(*t),
                fmt_float(s.xi2),
                fmt_float(s.mean[0]),
                fmt_float(s.mean[1]),
                fmt_float(s.mean[2]),
                fmt_float(s.var_min),
                fmt_flag(s.collapsed),
            ])
            .map_err(runtime_err)?;
    }
    let path = product.finish().map_err(runtime_err)?;
    println!(
        "wrote {} samples on [0, {}] to {}",
        trace.times.len(),
        fmt_float(t_stop),
        path.display()
    );
    Ok(())
}

const BEST_HEADER: [&str; 6] = ["phi", "xi2_best", "t_best", "eta", "gamma", "warn_local_min"];

fn best_row(b: &experiments::BestSqueezingResult) -> Vec<String> {
    vec![
        fmt_float(b.phi),
        fmt_float(b.xi2_best),
        fmt_float(b.t_best),
        fmt_float(b.eta),
        fmt_float(b.gamma),
        fmt_flag(b.warn_local_min),
    ]
}

fn failed_row(phi: f64) -> Vec<String> {
    let nan = fmt_float(f64::NAN);
    vec![fmt_float(phi), nan.clone(), nan.clone(), nan.clone(), nan, fmt_flag(false)]
}

/// Minimum-squeezing search: one row at the configured phase, or a
/// streamed, resumable row per grid point when a `[scan]` section is
/// present.
pub fn best_squeezing(inv: &Invocation, resume: bool) -> CliResult<()> {
    let cfg = inv.config()?;
    let plan = &inv.manifest.search;
    inv.warn_if_large(&cfg);
    let Some(scan_plan) = inv.manifest.scan.clone() else {
        let best =
            experiments::best_squeezing(&cfg, plan.initial(), plan.model, &plan.to_settings())
                .map_err(classify)?;
        let mut product = Product::create(&inv.out, "best-squeezing", &BEST_HEADER, &inv.manifest)
            .map_err(runtime_err)?;
        product.row(&best_row(&best)).map_err(runtime_err)?;
        let path = product.finish().map_err(runtime_err)?;
        println!(
            "best xi2 = {} at t = {} ({}); wrote {}",
            fmt_float(best.xi2_best),
            fmt_float(best.t_best),
            plan.model.tag(),
            path.display()
        );
        return Ok(());
    };

    let stem = "best-squeezing";
    let grid = scan_plan.grid(cfg.n()).map_err(config_err)?;
    let total = grid.len();
    let spec = ScanSpec::new(cfg, Sweep::Phi(grid), plan.model, plan.initial())
        .map_err(classify)?;
    let mut manifest = inv.manifest.clone();
    manifest.scan = Some(scan_plan);

    let mut start = 0usize;
    let mut product = if resume {
        match csvio::read_manifest(&inv.out, stem).map_err(runtime_err)? {
            Some(stored) if settings::body_hash(&stored) != settings::body_hash(&manifest) => {
                return Err(config_err(anyhow!(
                    "existing {stem} output came from a different configuration; \
                     remove it or point --out elsewhere"
                )));
            }
            Some(_) => {
                start = csvio::count_rows(&inv.out, stem).map_err(runtime_err)?;
                if start > total {
                    return Err(config_err(anyhow!(
                        "existing {stem} output has {start} rows but the grid has {total} points"
                    )));
                }
                Product::append(&inv.out, stem, &manifest).map_err(runtime_err)?
            }
            None => Product::create(&inv.out, stem, &BEST_HEADER, &manifest)
                .map_err(runtime_err)?,
        }
    } else {
        Product::create(&inv.out, stem, &BEST_HEADER, &manifest).map_err(runtime_err)?
    };
    if start == total {
        println!("scan already complete: {total} of {total} points on disk");
        return Ok(());
    }
    if start > 0 {
        println!("resuming at point {start} of {total}");
    }

    let mut io_error: Option<anyhow::Error> = None;
    let mut failures = 0usize;
    let mut warns = 0usize;
    experiments::scan_best_squeezing_streaming(
        &spec,
        &plan.to_settings(),
        start,
        |point| {
            if io_error.is_some() {
                return;
            }
            let fields = match &point.result {
                Ok(best) => {
                    if best.warn_local_min {
                        warns += 1;
                    }
                    best_row(best)
                }
                Err(e) => {
                    failures += 1;
                    eprintln!("point {} (phi = {:.6}): {e}", point.index, point.value);
                    failed_row(point.value)
                }
            };
            if let Err(e) = product.row(&fields) {
                io_error = Some(e);
            }
        },
    )
    .map_err(classify)?;
    if let Some(e) = io_error {
        return Err(runtime_err(e));
    }
    let path = product.finish().map_err(runtime_err)?;
    println!(
        "wrote points {start}..{total} to {} ({warns} horizon warnings)",
        path.display()
    );
    if failures > 0 {
        return Err(runtime_err(anyhow!(
            "{failures} of {} searched points failed; their rows hold NaN",
            total - start
        )));
    }
    Ok(())
}

/// Self-check report: every analytic identity against its exact
/// construction, plus unbounded observations recorded as data.
pub fn validate(inv: &Invocation, sizes: &str) -> CliResult<()> {
    let list: Vec<usize> = sizes
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| config_err(anyhow!("--sizes wants comma-separated site counts: {e}")))?;
    let report = experiments::validate_all(&list).map_err(classify)?;
    let mut product = Product::create(
        &inv.out,
        "validate",
        &["check", "residual", "tol", "pass"],
        &inv.manifest,
    )
    .map_err(runtime_err)?;
    let mut failed = 0usize;
    for c in &report.checks {
        if !c.pass {
            failed += 1;
        }
        println!(
            "{} {:<40} residual {:>12.3e} tol {:>9.1e}",
            if c.pass { "pass" } else { "FAIL" },
            c.name,
            c.residual,
            c.tol
        );
        product
            .row(&[c.name.clone(), fmt_float(c.residual), fmt_float(c.tol), fmt_flag(c.pass)])
            .map_err(runtime_err)?;
    }
    // Observations carry no bound; an infinite tolerance keeps the schema
    // while marking them as never failing.
    for o in &report.observations {
        println!("obs  {:<40} value    {:>12.3e}", o.name, o.value);
        product
            .row(&[
                o.name.clone(),
                fmt_float(o.value),
                fmt_float(f64::INFINITY),
                fmt_flag(true),
            ])
            .map_err(runtime_err)?;
    }
    let path = product.finish().map_err(runtime_err)?;
    println!(
        "{} checks, {} observations, {} failures; wrote {}",
        report.checks.len(),
        report.observations.len(),
        failed,
        path.display()
    );
    if failed > 0 {
        return Err(runtime_err(anyhow!("{failed} validation checks failed")));
    }
    Ok(())
}
