//! Run configuration and manifests.
//!
//! A run is described by a TOML file with four sections: `[chain]` for the
//! physical system, `[scan]` for an optional parameter grid, `[search]` for
//! minimum-search and evolution controls, `[output]` for file placement.
//! Every value may be written as an arithmetic expression over `pi`, `N`
//! (site count) and `E1` (first magnon gap), so configs read like the
//! protocols they encode.
//!
//! Loading resolves all expressions and defaults into a [`RunManifest`].
//! Emitting a manifest writes the fully resolved configuration back as
//! TOML, stamped with the artifact version and a content hash; parsing an
//! emitted manifest reproduces the identical `RunManifest`, which is what
//! makes reruns bit-reproducible.

use std::fmt::Write as _;

use serde::Deserialize;
use sha2::{Digest, Sha256};
use spinchain::experiments::{self, Model, SearchSettings, StateAngles};
use spinchain::krylov::KrylovParams;
use spinchain::{Boundary, ChainConfig};

use crate::csvio::fmt_float;
use crate::expr::{self, Context};

/// Artifact version stamped into manifests; configs citing a different
/// version are rejected rather than silently reinterpreted.
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Environment variables `SPINCHAIN_<SECTION>_<KEY>` override config keys.
pub const ENV_PREFIX: &str = "SPINCHAIN_";

/// Configuration failure; always maps to the configuration exit code.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config syntax: {0}")]
    Syntax(String),
    #[error("config key `{path}`: {detail}")]
    Key { path: String, detail: String },
    #[error("{0}")]
    Invalid(String),
}

impl ConfigError {
    fn key(path: &str, detail: impl std::fmt::Display) -> Self {
        ConfigError::Key { path: path.to_string(), detail: detail.to_string() }
    }
}

type CfgResult<T> = Result<T, ConfigError>;

/// One expression-valued setting: the text as configured plus the float it
/// resolved to. Equality is exact on both, which is what the round-trip
/// guarantee rests on.
#[derive(Clone, Debug, PartialEq)]
pub struct Resolved {
    pub expr: String,
    pub value: f64,
}

/// Resolved `[chain]` section.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainPlan {
    pub sites: usize,
    pub coupling: Resolved,
    pub omega: Resolved,
    pub phi: Resolved,
    pub phi0: Resolved,
    pub boundary: Boundary,
}

impl ChainPlan {
    /// Validated simulation config for this plan.
    pub fn to_config(&self) -> CfgResult<ChainConfig> {
        ChainConfig::new(self.sites, self.coupling.value, self.omega.value, self.phi.value)
            .map(|c| c.with_phi0(self.phi0.value).with_boundary(self.boundary))
            .map_err(|e| ConfigError::key("chain", e))
    }
}

/// Resolved `[scan]` section: the parameter grid for scanning subcommands.
#[derive(Clone, Debug, PartialEq)]
pub enum ScanPlan {
    /// Uniformly spaced flip phases.
    Linear { start: Resolved, stop: Resolved, points: usize },
    /// Geometrically spaced flip phases.
    Log { start: Resolved, stop: Resolved, points: usize },
    /// Exactly commensurate phases 2 pi k / N for k in `k_min..=k_max`.
    Commensurate { k_min: usize, k_max: usize },
}

/// Grid points at most this many; scans beyond it are configuration errors.
pub const MAX_SCAN_POINTS: usize = 200_000;

impl ScanPlan {
    /// Default grid: 1000 uniformly spaced phases strictly inside (0, 2 pi).
    pub fn default_grid() -> Self {
        ScanPlan::Linear {
            start: Resolved { expr: "2*pi/1001".into(), value: 2.0 * std::f64::consts::PI / 1001.0 },
            stop: Resolved {
                expr: "2*pi*1000/1001".into(),
                value: 2.0 * std::f64::consts::PI * 1000.0 / 1001.0,
            },
            points: 1000,
        }
    }

    /// Materialize the phase grid for an `n`-site chain.
    pub fn grid(&self, n: usize) -> CfgResult<Vec<f64>> {
        match self {
            ScanPlan::Linear { start, stop, points } => {
                check_points(*points)?;
                let (a, b) = (start.value, stop.value);
                Ok(linear_grid(a, b, *points))
            }
            ScanPlan::Log { start, stop, points } => {
                check_points(*points)?;
                let (a, b) = (start.value, stop.value);
                if a <= 0.0 || b <= 0.0 {
                    return Err(ConfigError::key("scan", "log spacing needs positive endpoints"));
                }
                Ok(linear_grid(a.ln(), b.ln(), *points).into_iter().map(f64::exp).collect())
            }
            ScanPlan::Commensurate { k_min, k_max } => {
                if !(1 <= *k_min && k_min <= k_max && *k_max < n) {
                    return Err(ConfigError::key(
                        "scan",
                        format!("need 1 <= k_min <= k_max <= {} for {n} sites", n - 1),
                    ));
                }
                Ok((*k_min..=*k_max)
                    .map(|k| 2.0 * std::f64::consts::PI * k as f64 / n as f64)
                    .collect())
            }
        }
    }
}

fn check_points(points: usize) -> CfgResult<()> {
    if points == 0 || points > MAX_SCAN_POINTS {
        return Err(ConfigError::key(
            "scan.points",
            format!("need 1..={MAX_SCAN_POINTS} grid points"),
        ));
    }
    Ok(())
}

pub(crate) fn linear_grid(a: f64, b: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![a];
    }
    (0..points)
        .map(|i| a + (b - a) * i as f64 / (points - 1) as f64)
        .collect()
}

/// Resolved `[search]` section: model choice, initial state, and the knobs
/// of the minimum search and time evolution.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchPlan {
    pub model: Model,
    pub theta: Resolved,
    pub phi_initial: Resolved,
    /// Absolute search horizon; `None` sizes it from the reference time.
    pub t_max: Option<Resolved>,
    pub t_max_factor: f64,
    pub points_per_decade: usize,
    pub decades: usize,
    pub relative_resolution: f64,
    pub krylov_subspace: usize,
    pub krylov_tolerance: f64,
    pub allow_large_full_chain: bool,
    /// Evolution endpoint; `None` takes three reference times.
    pub t_stop: Option<Resolved>,
    /// Evolution sample count, endpoints included.
    pub samples: usize,
}

impl SearchPlan {
    pub fn to_settings(&self) -> SearchSettings {
        SearchSettings {
            t_max: self.t_max.as_ref().map(|r| r.value),
            t_max_factor: self.t_max_factor,
            points_per_decade: self.points_per_decade,
            decades: self.decades,
            relative_resolution: self.relative_resolution,
            krylov: KrylovParams {
                max_subspace: self.krylov_subspace,
                local_tol: self.krylov_tolerance,
            },
            allow_large_full_chain: self.allow_large_full_chain,
        }
    }

    pub fn initial(&self) -> StateAngles {
        StateAngles::new(self.theta.value, self.phi_initial.value)
    }
}

/// Resolved `[output]` section.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputPlan {
    pub directory: String,
}

/// Fully resolved run description; emitting and reparsing it is lossless.
#[derive(Clone, Debug, PartialEq)]
pub struct RunManifest {
    pub version: String,
    pub chain: ChainPlan,
    /// Absent means point mode: single-configuration subcommands use the
    /// `[chain]` phase, grid subcommands fall back to the default grid.
    pub scan: Option<ScanPlan>,
    pub search: SearchPlan,
    pub output: OutputPlan,
}

// Raw deserialization layer. Unknown keys anywhere are rejected so typos
// surface as errors instead of silently applied defaults.

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    manifest: Option<RawMeta>,
    chain: Option<RawChain>,
    scan: Option<RawScan>,
    search: Option<RawSearch>,
    output: Option<RawOutput>,
    /// Informational block written by `emit`; ignored on parse.
    #[allow(dead_code)]
    references: Option<toml::Value>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMeta {
    artifact_version: Option<String>,
    content_hash: Option<String>,
}

/// Number-or-expression config value.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawValue {
    Number(f64),
    Text(String),
}

impl RawValue {
    fn resolve(&self, path: &str, ctx: &Context) -> CfgResult<Resolved> {
        match self {
            // Numeric input is canonicalized to its exact 17-digit form so
            // the manifest stays expression-valued throughout.
            RawValue::Number(v) => Ok(Resolved { expr: fmt_float(*v), value: *v }),
            RawValue::Text(s) => {
                let value = expr::eval(s, ctx).map_err(|e| ConfigError::key(path, e))?;
                Ok(Resolved { expr: s.clone(), value })
            }
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChain {
    sites: Option<i64>,
    coupling: Option<RawValue>,
    omega: Option<RawValue>,
    phi: Option<RawValue>,
    phi0: Option<RawValue>,
    boundary: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScan {
    kind: Option<String>,
    start: Option<RawValue>,
    stop: Option<RawValue>,
    points: Option<i64>,
    k_min: Option<i64>,
    k_max: Option<i64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSearch {
    model: Option<String>,
    theta: Option<RawValue>,
    phi_initial: Option<RawValue>,
    t_max: Option<RawValue>,
    t_max_factor: Option<f64>,
    points_per_decade: Option<i64>,
    decades: Option<i64>,
    relative_resolution: Option<f64>,
    krylov_subspace: Option<i64>,
    krylov_tolerance: Option<f64>,
    allow_large_full_chain: Option<bool>,
    t_stop: Option<RawValue>,
    samples: Option<i64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    directory: Option<String>,
}

fn as_count(path: &str, v: Option<i64>, default: usize) -> CfgResult<usize> {
    match v {
        None => Ok(default),
        Some(x) if x >= 0 => Ok(x as usize),
        Some(x) => Err(ConfigError::key(path, format!("{x} is negative"))),
    }
}

/// Resolve `v` unless it is the literal `"auto"`, which means absent.
fn resolve_auto(path: &str, v: &Option<RawValue>, ctx: &Context) -> CfgResult<Option<Resolved>> {
    match v {
        None => Ok(None),
        Some(RawValue::Text(s)) if s == "auto" => Ok(None),
        Some(raw) => {
            let r = raw.resolve(path, ctx)?;
            if r.value <= 0.0 {
                return Err(ConfigError::key(path, "must be positive (or \"auto\")"));
            }
            Ok(Some(r))
        }
    }
}

/// Parse config text into a manifest, applying `env` overrides of the form
/// `SPINCHAIN_<SECTION>_<KEY>`. Overrides are refused on emitted manifests:
/// a manifest is a frozen record, not a template.
pub fn load(text: &str, env: impl Iterator<Item = (String, String)>) -> CfgResult<RunManifest> {
    let mut table: toml::Table =
        toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    let is_manifest = table.contains_key("manifest");
    let overrides = collect_overrides(env)?;
    if is_manifest && !overrides.is_empty() {
        return Err(ConfigError::Invalid(format!(
            "refusing environment overrides ({}) on an emitted manifest; edit a config instead",
            overrides.iter().map(|(s, k, _)| format!("{ENV_PREFIX}{}_{}", s.to_uppercase(), k.to_uppercase())).collect::<Vec<_>>().join(", ")
        )));
    }
    for (section, key, value) in overrides {
        let slot = table
            .entry(section.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        match slot.as_table_mut() {
            Some(t) => {
                t.insert(key, value);
            }
            None => {
                return Err(ConfigError::key(&section, "not a section; cannot override"));
            }
        }
    }
    let raw: RawConfig = RawConfig::deserialize(toml::Value::Table(table))
        .map_err(|e| ConfigError::Syntax(e.to_string()))?;
    let manifest = resolve(&raw)?;
    if let Some(meta) = &raw.manifest {
        verify_meta(meta, &manifest)?;
    }
    Ok(manifest)
}

/// Load with the process environment, the normal entry point.
pub fn load_with_process_env(text: &str) -> CfgResult<RunManifest> {
    load(text, std::env::vars())
}

fn collect_overrides(
    env: impl Iterator<Item = (String, String)>,
) -> CfgResult<Vec<(String, String, toml::Value)>> {
    let mut found = Vec::new();
    for (name, raw) in env {
        let Some(rest) = name.strip_prefix(ENV_PREFIX) else { continue };
        let Some((section, key)) = rest.split_once('_') else {
            return Err(ConfigError::Invalid(format!(
                "override {name} needs the form {ENV_PREFIX}<SECTION>_<KEY>"
            )));
        };
        if section.is_empty() || key.is_empty() {
            return Err(ConfigError::Invalid(format!(
                "override {name} needs the form {ENV_PREFIX}<SECTION>_<KEY>"
            )));
        }
        let value = if let Ok(i) = raw.parse::<i64>() {
            toml::Value::Integer(i)
        } else if let Ok(f) = raw.parse::<f64>() {
            toml::Value::Float(f)
        } else if let Ok(b) = raw.parse::<bool>() {
            toml::Value::Boolean(b)
        } else {
            toml::Value::String(raw)
        };
        found.push((section.to_ascii_lowercase(), key.to_ascii_lowercase(), value));
    }
    // Environment iteration order is unspecified; sort so later diagnostics
    // list overrides deterministically.
    found.sort_by(|a, b| (&a.0, &a.1).cmp(&(&b.0, &b.1)));
    Ok(found)
}

fn resolve(raw: &RawConfig) -> CfgResult<RunManifest> {
    let chain_raw = raw.chain.as_ref();
    let sites = match chain_raw.and_then(|c| c.sites) {
        None => 8,
        Some(x) if x >= 1 => x as usize,
        Some(x) => return Err(ConfigError::key("chain.sites", format!("{x} is not a count"))),
    };
    let base = Context::new().with("N", sites as f64);
    let coupling = match chain_raw.and_then(|c| c.coupling.as_ref()) {
        Some(v) => v.resolve("chain.coupling", &base)?,
        None => Resolved { expr: "1".into(), value: 1.0 },
    };
    // The first magnon gap in the closed form; exposing it as E1 lets drive
    // strengths be stated relative to the slowest chain mode.
    let s = (std::f64::consts::PI / (2.0 * sites as f64)).sin();
    let e1 = 2.0 * coupling.value.abs() * s * s;
    let ctx = base.with("E1", e1);
    let omega = match chain_raw.and_then(|c| c.omega.as_ref()) {
        Some(v) => v.resolve("chain.omega", &ctx)?,
        None => Resolved { expr: "E1/10".into(), value: e1 / 10.0 },
    };
    let phi = match chain_raw.and_then(|c| c.phi.as_ref()) {
        Some(v) => v.resolve("chain.phi", &ctx)?,
        None => Resolved {
            expr: "pi - 2*pi/N".into(),
            value: std::f64::consts::PI - 2.0 * std::f64::consts::PI / sites as f64,
        },
    };
    let ctx_phi = ctx.clone().with("phi", phi.value);
    let phi0 = match chain_raw.and_then(|c| c.phi0.as_ref()) {
        Some(v) => v.resolve("chain.phi0", &ctx_phi)?,
        None => Resolved {
            expr: "(N + 1)*phi/2".into(),
            value: (sites as f64 + 1.0) * phi.value / 2.0,
        },
    };
    let boundary = match chain_raw.and_then(|c| c.boundary.as_deref()) {
        None | Some("open") => Boundary::Open,
        Some("periodic") => Boundary::Periodic,
        Some(other) => {
            return Err(ConfigError::key(
                "chain.boundary",
                format!("`{other}` is neither `open` nor `periodic`"),
            ));
        }
    };
    let chain = ChainPlan { sites, coupling, omega, phi, phi0, boundary };
    chain.to_config()?;

    let scan = match raw.scan.as_ref() {
        None => None,
        Some(s) => Some(resolve_scan(s, &ctx_phi, sites)?),
    };
    let search = resolve_search(raw.search.as_ref(), &ctx_phi)?;
    let output = OutputPlan {
        directory: raw
            .output
            .as_ref()
            .and_then(|o| o.directory.clone())
            .unwrap_or_else(|| ".".to_string()),
    };
    Ok(RunManifest {
        version: ARTIFACT_VERSION.to_string(),
        chain,
        scan,
        search,
        output,
    })
}

fn resolve_scan(s: &RawScan, ctx: &Context, sites: usize) -> CfgResult<ScanPlan> {
    let kind = s.kind.as_deref().unwrap_or("linear");
    match kind {
        "linear" | "log" => {
            if s.k_min.is_some() || s.k_max.is_some() {
                return Err(ConfigError::key(
                    "scan.k_min",
                    "k bounds belong to kind = \"commensurate\" only",
                ));
            }
            let default = ScanPlan::default_grid();
            let (dstart, dstop, dpoints) = match default {
                ScanPlan::Linear { start, stop, points } => (start, stop, points),
                _ => unreachable!(),
            };
            let start = match s.start.as_ref() {
                Some(v) => v.resolve("scan.start", ctx)?,
                None => dstart,
            };
            let stop = match s.stop.as_ref() {
                Some(v) => v.resolve("scan.stop", ctx)?,
                None => dstop,
            };
            let points = as_count("scan.points", s.points, dpoints)?;
            let plan = if kind == "linear" {
                ScanPlan::Linear { start, stop, points }
            } else {
                ScanPlan::Log { start, stop, points }
            };
            plan.grid(sites)?;
            Ok(plan)
        }
        "commensurate" => {
            if s.start.is_some() || s.stop.is_some() || s.points.is_some() {
                return Err(ConfigError::key(
                    "scan.start",
                    "commensurate scans take k_min/k_max only",
                ));
            }
            let plan = ScanPlan::Commensurate {
                k_min: as_count("scan.k_min", s.k_min, 1)?,
                k_max: as_count("scan.k_max", s.k_max, sites - 1)?,
            };
            plan.grid(sites)?;
            Ok(plan)
        }
        other => Err(ConfigError::key(
            "scan.kind",
            format!("`{other}` is not `linear`, `log`, or `commensurate`"),
        )),
    }
}

fn resolve_search(s: Option<&RawSearch>, ctx: &Context) -> CfgResult<SearchPlan> {
    let model = match s.and_then(|s| s.model.as_deref()) {
        None | Some("effective") => Model::Effective,
        Some("full") => Model::FullChain,
        Some(other) => {
            return Err(ConfigError::key(
                "search.model",
                format!("`{other}` is neither `effective` nor `full`"),
            ));
        }
    };
    let theta = match s.and_then(|s| s.theta.as_ref()) {
        Some(v) => v.resolve("search.theta", ctx)?,
        None => Resolved { expr: "pi/2".into(), value: std::f64::consts::FRAC_PI_2 },
    };
    let phi_initial = match s.and_then(|s| s.phi_initial.as_ref()) {
        Some(v) => v.resolve("search.phi_initial", ctx)?,
        None => Resolved { expr: "0".into(), value: 0.0 },
    };
    let none = None;
    let t_max = resolve_auto("search.t_max", s.map_or(&none, |s| &s.t_max), ctx)?;
    let t_stop = resolve_auto("search.t_stop", s.map_or(&none, |s| &s.t_stop), ctx)?;
    let t_max_factor = s.and_then(|s| s.t_max_factor).unwrap_or(30.0);
    if t_max_factor <= 0.0 {
        return Err(ConfigError::key("search.t_max_factor", "must be positive"));
    }
    let relative_resolution = s.and_then(|s| s.relative_resolution).unwrap_or(1e-3);
    let krylov_tolerance = s.and_then(|s| s.krylov_tolerance).unwrap_or(1e-10);
    if krylov_tolerance <= 0.0 {
        return Err(ConfigError::key("search.krylov_tolerance", "must be positive"));
    }
    let plan = SearchPlan {
        model,
        theta,
        phi_initial,
        t_max,
        t_max_factor,
        points_per_decade: as_count(
            "search.points_per_decade",
            s.and_then(|s| s.points_per_decade),
            64,
        )?,
        decades: as_count("search.decades", s.and_then(|s| s.decades), 7)?,
        relative_resolution,
        krylov_subspace: as_count("search.krylov_subspace", s.and_then(|s| s.krylov_subspace), 30)?,
        krylov_tolerance,
        allow_large_full_chain: s.and_then(|s| s.allow_large_full_chain).unwrap_or(false),
        t_stop,
        samples: as_count("search.samples", s.and_then(|s| s.samples), 400)?,
    };
    if plan.krylov_subspace < 2 {
        return Err(ConfigError::key("search.krylov_subspace", "needs at least 2 vectors"));
    }
    if !(2..=MAX_SCAN_POINTS).contains(&plan.samples) {
        return Err(ConfigError::key(
            "search.samples",
            format!("need 2..={MAX_SCAN_POINTS} evolution samples"),
        ));
    }
    // The search grid shape is validated by the same code that consumes it.
    plan.to_settings().validate().map_err(|e| ConfigError::key("search", e))?;
    Ok(plan)
}

fn verify_meta(meta: &RawMeta, manifest: &RunManifest) -> CfgResult<()> {
    if let Some(v) = &meta.artifact_version {
        if v != ARTIFACT_VERSION {
            return Err(ConfigError::Invalid(format!(
                "manifest was written by artifact version {v}, this is {ARTIFACT_VERSION}; \
                 regenerate it from a plain config"
            )));
        }
    }
    if let Some(h) = &meta.content_hash {
        let actual = body_hash(manifest);
        if *h != actual {
            return Err(ConfigError::Invalid(
                "manifest content hash does not match its body; after editing, delete the \
                 [manifest] section so the file is treated as a plain config"
                    .to_string(),
            ));
        }
    }
    Ok(())
}

/// TOML string literal with correct escaping.
fn toml_str(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

fn emit_resolved(out: &mut String, key: &str, r: &Resolved) {
    let _ = writeln!(out, "{key} = {}", toml_str(&r.expr));
}

/// Canonical TOML body of the four config sections, the hashed content.
pub fn emit_body(m: &RunManifest) -> String {
    let mut out = String::new();
    out.push_str("[chain]\n");
    let _ = writeln!(out, "sites = {}", m.chain.sites);
    emit_resolved(&mut out, "coupling", &m.chain.coupling);
    emit_resolved(&mut out, "omega", &m.chain.omega);
    emit_resolved(&mut out, "phi", &m.chain.phi);
    emit_resolved(&mut out, "phi0", &m.chain.phi0);
    let boundary = match m.chain.boundary {
        Boundary::Open => "open",
        Boundary::Periodic => "periodic",
    };
    let _ = writeln!(out, "boundary = \"{boundary}\"");
    if let Some(scan) = &m.scan {
        out.push_str("\n[scan]\n");
        match scan {
            ScanPlan::Linear { start, stop, points } | ScanPlan::Log { start, stop, points } => {
                let kind = if matches!(scan, ScanPlan::Linear { .. }) { "linear" } else { "log" };
                let _ = writeln!(out, "kind = \"{kind}\"");
                emit_resolved(&mut out, "start", start);
                emit_resolved(&mut out, "stop", stop);
                let _ = writeln!(out, "points = {points}");
            }
            ScanPlan::Commensurate { k_min, k_max } => {
                let _ = writeln!(out, "kind = \"commensurate\"");
                let _ = writeln!(out, "k_min = {k_min}");
                let _ = writeln!(out, "k_max = {k_max}");
            }
        }
    }
    out.push_str("\n[search]\n");
    let _ = writeln!(out, "model = \"{}\"", m.search.model.tag());
    emit_resolved(&mut out, "theta", &m.search.theta);
    emit_resolved(&mut out, "phi_initial", &m.search.phi_initial);
    match &m.search.t_max {
        Some(r) => emit_resolved(&mut out, "t_max", r),
        None => out.push_str("t_max = \"auto\"\n"),
    }
    let _ = writeln!(out, "t_max_factor = {}", fmt_float(m.search.t_max_factor));
    let _ = writeln!(out, "points_per_decade = {}", m.search.points_per_decade);
    let _ = writeln!(out, "decades = {}", m.search.decades);
    let _ = writeln!(out, "relative_resolution = {}", fmt_float(m.search.relative_resolution));
    let _ = writeln!(out, "krylov_subspace = {}", m.search.krylov_subspace);
    let _ = writeln!(out, "krylov_tolerance = {}", fmt_float(m.search.krylov_tolerance));
    let _ = writeln!(out, "allow_large_full_chain = {}", m.search.allow_large_full_chain);
    match &m.search.t_stop {
        Some(r) => emit_resolved(&mut out, "t_stop", r),
        None => out.push_str("t_stop = \"auto\"\n"),
    }
    let _ = writeln!(out, "samples = {}", m.search.samples);
    out.push_str("\n[output]\n");
    let _ = writeln!(out, "directory = {}", toml_str(&m.output.directory));
    out
}

/// Hex SHA-256 of the canonical body.
pub fn body_hash(m: &RunManifest) -> String {
    let mut hasher = Sha256::new();
    hasher.update(emit_body(m).as_bytes());
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for b in digest {
        let _ = write!(hex, "{b:02x}");
    }
    hex
}

/// Full manifest text: version stamp and content hash, the canonical body,
/// and an informational `[references]` block of derived quantities (ignored
/// on parse, excluded from the hash).
pub fn emit(m: &RunManifest) -> String {
    let body = emit_body(m);
    let mut out = String::new();
    out.push_str("[manifest]\n");
    let _ = writeln!(out, "artifact_version = \"{ARTIFACT_VERSION}\"");
    let _ = writeln!(out, "content_hash = \"{}\"", body_hash(m));
    out.push('\n');
    out.push_str(&body);
    out.push_str("\n[references]\n");
    out.push_str("units = \"energies in units of the exchange J, times in 1/J\"\n");
    let s = (std::f64::consts::PI / (2.0 * m.chain.sites as f64)).sin();
    let e1 = 2.0 * m.chain.coupling.value.abs() * s * s;
    let _ = writeln!(out, "first_magnon_gap = {}", fmt_float(e1));
    let _ = writeln!(out, "resolved_coupling = {}", fmt_float(m.chain.coupling.value));
    let _ = writeln!(out, "resolved_omega = {}", fmt_float(m.chain.omega.value));
    let _ = writeln!(out, "resolved_phi = {}", fmt_float(m.chain.phi.value));
    let _ = writeln!(out, "resolved_phi0 = {}", fmt_float(m.chain.phi0.value));
    let refs = experiments::squeezing_references(m.chain.sites);
    let _ = writeln!(out, "one_axis_level = {}", fmt_float(refs.one_axis_level));
    let _ = writeln!(out, "two_axis_level = {}", fmt_float(refs.two_axis_level));
    if let Ok(cfg) = m.chain.to_config() {
        if let Ok(t_ref) = experiments::reference_time(&cfg) {
            let _ = writeln!(out, "reference_time = {}", fmt_float(t_ref));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn no_env() -> std::iter::Empty<(String, String)> {
        std::iter::empty()
    }

    #[test]
    fn empty_text_loads_the_documented_defaults() {
        let m = load("", no_env()).unwrap();
        assert_eq!(m.chain.sites, 8);
        assert_eq!(m.chain.coupling.value, 1.0);
        assert_eq!(m.chain.phi.value, PI - 2.0 * PI / 8.0);
        assert_eq!(m.chain.phi0.value, 9.0 * m.chain.phi.value / 2.0);
        let s = (PI / 16.0).sin();
        assert_eq!(m.chain.omega.value, 2.0 * s * s / 10.0);
        assert_eq!(m.chain.boundary, Boundary::Open);
        assert!(m.scan.is_none());
        assert_eq!(m.search.model, Model::Effective);
        assert_eq!(m.search.theta.value, PI / 2.0);
        assert!(m.search.t_max.is_none());
        assert_eq!(m.search.samples, 400);
        assert_eq!(m.output.directory, ".");
    }

    #[test]
    fn manifests_round_trip_exactly() {
        let text = r#"
            [chain]
            sites = 10
            omega = "E1/5"
            phi = "2*pi*3/N"
            boundary = "periodic"

            [scan]
            kind = "commensurate"
            k_min = 2
            k_max = 7

            [search]
            model = "full"
            theta = "pi/3"
            t_max = 250.0
            samples = 37

            [output]
            directory = "runs/a b"
        "#;
        let m = load(text, no_env()).unwrap();
        let emitted = emit(&m);
        let again = load(&emitted, no_env()).unwrap();
        assert_eq!(again, m);
        // A third generation is byte-stable.
        assert_eq!(emit(&again), emitted);
    }

    #[test]
    fn default_load_round_trips_too() {
        let m = load("", no_env()).unwrap();
        let again = load(&emit(&m), no_env()).unwrap();
        assert_eq!(again, m);
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = load("[chain]\nsits = 8\n", no_env()).unwrap_err();
        assert!(err.to_string().contains("sits"), "{err}");
        let err = load("[chian]\nsites = 8\n", no_env()).unwrap_err();
        assert!(err.to_string().contains("chian"), "{err}");
    }

    #[test]
    fn bad_expressions_carry_their_key_path() {
        let err = load("[chain]\nomega = \"E2/10\"\n", no_env()).unwrap_err();
        let text = err.to_string();
        assert!(text.contains("chain.omega"), "{text}");
        assert!(text.contains("E2"), "{text}");
    }

    #[test]
    fn env_overrides_reach_their_keys() {
        let env = vec![
            ("SPINCHAIN_CHAIN_SITES".to_string(), "12".to_string()),
            ("SPINCHAIN_CHAIN_OMEGA".to_string(), "E1/4".to_string()),
            ("SPINCHAIN_SEARCH_POINTS_PER_DECADE".to_string(), "16".to_string()),
            ("HOME".to_string(), "/root".to_string()),
        ];
        let m = load("", env.into_iter()).unwrap();
        assert_eq!(m.chain.sites, 12);
        assert_eq!(m.chain.omega.expr, "E1/4");
        assert_eq!(m.search.points_per_decade, 16);
    }

    #[test]
    fn env_overrides_are_refused_on_manifests() {
        let m = load("", no_env()).unwrap();
        let env = vec![("SPINCHAIN_CHAIN_SITES".to_string(), "12".to_string())];
        let err = load(&emit(&m), env.into_iter()).unwrap_err();
        assert!(err.to_string().contains("SPINCHAIN_CHAIN_SITES"), "{err}");
    }

    #[test]
    fn misspelled_env_overrides_are_rejected() {
        let env = vec![("SPINCHAIN_CHAIN_SITS".to_string(), "12".to_string())];
        let err = load("", env.into_iter()).unwrap_err();
        assert!(err.to_string().contains("sits"), "{err}");
    }

    #[test]
    fn edited_manifests_fail_the_content_hash() {
        let m = load("", no_env()).unwrap();
        let tampered = emit(&m).replace("sites = 8", "sites = 10");
        let err = load(&tampered, no_env()).unwrap_err();
        assert!(err.to_string().contains("hash"), "{err}");
    }

    #[test]
    fn foreign_artifact_versions_are_rejected() {
        let m = load("", no_env()).unwrap();
        let foreign = emit(&m).replace(
            &format!("artifact_version = \"{ARTIFACT_VERSION}\""),
            "artifact_version = \"99.0.0\"",
        );
        let err = load(&foreign, no_env()).unwrap_err();
        assert!(err.to_string().contains("99.0.0"), "{err}");
    }

    #[test]
    fn scan_kinds_build_their_grids() {
        let m = load("[scan]\nkind = \"commensurate\"\n", no_env()).unwrap();
        let grid = m.scan.as_ref().unwrap().grid(8).unwrap();
        assert_eq!(grid.len(), 7);
        assert!((grid[3] - PI).abs() < 1e-15);

        let m = load(
            "[scan]\nkind = \"log\"\nstart = \"pi/100\"\nstop = \"pi\"\npoints = 5\n",
            no_env(),
        )
        .unwrap();
        let grid = m.scan.as_ref().unwrap().grid(8).unwrap();
        assert_eq!(grid.len(), 5);
        let r0 = grid[1] / grid[0];
        let r1 = grid[4] / grid[3];
        assert!((r0 - r1).abs() < 1e-12);

        let m = load("[scan]\npoints = 3\n", no_env()).unwrap();
        let grid = m.scan.as_ref().unwrap().grid(8).unwrap();
        assert_eq!(grid.len(), 3);
        assert!((grid[1] - PI).abs() < 1e-12);
    }

    #[test]
    fn mixed_scan_keys_are_rejected() {
        assert!(load("[scan]\nkind = \"commensurate\"\npoints = 5\n", no_env()).is_err());
        assert!(load("[scan]\nkind = \"linear\"\nk_min = 2\n", no_env()).is_err());
        assert!(load("[scan]\nkind = \"spiral\"\n", no_env()).is_err());
    }

    #[test]
    fn physical_validation_runs_at_load_time() {
        // A uniform drive phase on a driven chain cannot split.
        assert!(load("[chain]\nphi = 0.0\n", no_env()).is_err());
        assert!(load("[chain]\nsites = 7\n", no_env()).is_err());
        assert!(load("[chain]\ncoupling = 0.0\n", no_env()).is_err());
        assert!(load("[search]\nsamples = 1\n", no_env()).is_err());
        assert!(load("[search]\nt_max = -2.0\n", no_env()).is_err());
        assert!(load("[search]\nt_max = \"auto\"\n", no_env()).is_ok());
    }
}
