//! Config-driven runs: one JSON file describes the domain, the refinement
//! sweep, the potential, the requested norms and checks; a run writes CSV
//! tables and a `manifest.json` into its output directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::calculus::{heat_kernel, ChebyshevSeries, OperatorFunction, Symbol, DEFAULT_MAX_DEGREE};
use crate::dyadic::{DyadicSystem, Profile};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::{DomainSpec, Grid, GridFunction, DEFAULT_CELL_CAP};
use crate::norms::{besov_norms, lorentz_norm, sobolev_norm, BesovParams};
use crate::operator::{assemble_laplacian, assemble_schrodinger, SpectralOperator, DEFAULT_DENSE_CAP};
use crate::potential::Potential;
use crate::verify::{self, Embedding, EquivalenceParams, FamilyTag, FunctionFamily, Level, Settings, VerifyReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG_INVALID: i32 = 2;
pub const EXIT_BUDGET_EXCEEDED: i32 = 3;

/// Environment variable that overrides the output directory of the config.
pub const OUT_DIR_ENV: &str = "SPECTRAL_BESOV_OUT";
pub const DEFAULT_OUT_DIR: &str = "besovlab-out";

pub const SPECTRUM_CSV_HEADER: &str = "h,N,k,lambda";
pub const NORMS_CSV_HEADER: &str = "h,N,family,index,norm,params,value";
pub const PROFILES_CSV_HEADER: &str = "h,lambda,function,value";
pub const BENCH_CSV_HEADER: &str = "h,N,nnz,path,degree,wall_ms,rel_error";

/// Frequencies per level in `profiles.csv`.
const PROFILE_POINTS: usize = 257;
/// Kernels larger than this many entries are not written.
const DEFAULT_KERNEL_ENTRIES: usize = 1 << 22;

/// An exponent in `[1, ∞]`, written as a number or `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Exponent(pub f64);

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(Exponent(x)),
            Raw::Text(s) if matches!(s.as_str(), "inf" | "infinity" | "∞") => Ok(Exponent(f64::INFINITY)),
            Raw::Text(s) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got \"{s}\""))),
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    /// Expression in `x, y, z, r`; `None` means `V = 0`.
    pub expr: Option<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub tag: FamilyTag,
    /// Defaults to the run seed.
    pub seed: Option<u64>,
    pub count: usize,
}

impl Default for FamilySpec {
    fn default() -> Self {
        FamilySpec { tag: FamilyTag::RandomEigenmix, seed: None, count: 8 }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NormRequest {
    Besov {
        s: f64,
        p: Exponent,
        q: Exponent,
        #[serde(default)]
        homogeneous: bool,
    },
    Sobolev {
        s: f64,
    },
    Lorentz {
        p: Exponent,
        q: Exponent,
    },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CheckSpec {
    ResolutionIdentity {
        homogeneous: Option<bool>,
        tolerance: Option<f64>,
    },
    Spectrum {},
    Bernstein {
        pairs: Vec<(Exponent, Exponent)>,
        alphas: Vec<f64>,
    },
    BlockBounds {
        #[serde(default = "default_block_ps")]
        ps: Vec<Exponent>,
    },
    HeatGaussian {
        #[serde(default = "default_t_levels")]
        t_levels: usize,
        #[serde(default = "default_c_star")]
        c_star: f64,
    },
    Duality {
        params: Vec<(f64, Exponent, Exponent)>,
    },
    Embeddings {
        embeddings: Vec<Embedding>,
    },
    Lifting {
        s: f64,
        s0: f64,
        p: Exponent,
        q: Exponent,
    },
    Equivalence {
        s: f64,
        p: Exponent,
        q: Exponent,
        #[serde(default)]
        homogeneous: bool,
        #[serde(default = "default_cross_p")]
        cross_p: Exponent,
        #[serde(default = "default_min_gap")]
        min_gap: usize,
    },
    PartitionIndependence {
        s: f64,
        p: Exponent,
        q: Exponent,
        #[serde(default)]
        homogeneous: bool,
    },
    Subspace {
        s: f64,
        p: Exponent,
        q: Exponent,
    },
    LorentzBernstein {
        p0: Exponent,
        p: Exponent,
        q: Exponent,
    },
    ZeroEigenvalue {},
    Chebyshev {
        max_degree: Option<usize>,
    },
}

fn default_block_ps() -> Vec<Exponent> {
    vec![Exponent(1.0)]
}
fn default_t_levels() -> usize {
    11
}
fn default_c_star() -> f64 {
    verify::GAUSSIAN_EXPONENT
}
fn default_cross_p() -> Exponent {
    Exponent(2.0)
}
fn default_min_gap() -> usize {
    3
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelRequest {
    #[serde(default)]
    pub heat: Vec<f64>,
    #[serde(default)]
    pub blocks: Vec<i32>,
    pub max_entries: Option<usize>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSpec {
    #[serde(default = "default_bench_degrees")]
    pub degrees: Vec<usize>,
}

impl Default for BenchSpec {
    fn default() -> Self {
        BenchSpec { degrees: default_bench_degrees() }
    }
}

fn default_bench_degrees() -> Vec<usize> {
    vec![16, 32, 64, 128, 256, 512]
}

fn default_dense_cap() -> usize {
    DEFAULT_DENSE_CAP
}
fn default_cell_cap() -> usize {
    DEFAULT_CELL_CAP
}
fn default_chebyshev_tolerance() -> f64 {
    verify::CHEBYSHEV_FIT_TOLERANCE
}
fn default_stability_factor() -> f64 {
    verify::DEFAULT_STABILITY_FACTOR
}
fn yes() -> bool {
    true
}

/// The run configuration. Unknown keys are rejected.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainSpec,
    /// Refinement sweep, coarse to fine.
    pub h: Vec<f64>,
    #[serde(default)]
    pub potential: PotentialSpec,
    pub profile: Option<Profile>,
    #[serde(default)]
    pub norms: Vec<NormRequest>,
    #[serde(default)]
    pub family: FamilySpec,
    #[serde(default)]
    pub checks: Vec<CheckSpec>,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_dense_cap")]
    pub dense_cap: usize,
    #[serde(default = "default_cell_cap")]
    pub cell_cap: usize,
    #[serde(default = "default_chebyshev_tolerance")]
    pub chebyshev_tolerance: f64,
    #[serde(default = "default_stability_factor")]
    pub stability_factor: f64,
    /// Failed checks and index constraints are errors; `false` reports only.
    #[serde(default = "yes")]
    pub assert: bool,
    pub kernels: Option<KernelRequest>,
    pub bench: Option<BenchSpec>,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::ConfigInvalid(msg.into())
}

fn exponent_ok(p: Exponent, what: &str) -> Result<()> {
    if p.0 >= 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("{what} = {} is not in [1, inf]", p.0)))
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        serde_json::from_str(text).map_err(|e| invalid(e.to_string()))
    }

    pub fn family(&self) -> FunctionFamily {
        FunctionFamily::new(self.family.tag, self.family.seed.unwrap_or(self.seed), self.family.count)
    }

    fn potential_expr(&self) -> Result<Option<Expr>> {
        self.potential.expr.as_deref().map(Expr::parse).transpose()
    }

    /// Schema-level checks that need no grid. Index constraints are errors only
    /// in assert mode.
    pub fn validate(&self) -> Result<()> {
        self.domain.validate().map_err(|e| invalid(e.to_string()))?;
        let n = self.domain.dimension;
        if self.h.is_empty() {
            return Err(invalid("h list is empty"));
        }
        if let Some(&h) = self.h.iter().find(|&&h| !(h > 0.0 && h.is_finite())) {
            return Err(invalid(format!("grid spacing {h} is not positive")));
        }
        if self.family.count == 0 {
            return Err(invalid("family count must be positive"));
        }
        if !(self.chebyshev_tolerance > 0.0) {
            return Err(invalid("chebyshev_tolerance must be positive"));
        }
        if !(self.stability_factor >= 1.0) {
            return Err(invalid("stability_factor must be at least 1"));
        }
        if matches!(self.profile, Some(Profile::BumpPower(0) | Profile::Squared(0))) {
            return Err(invalid("profile power must be at least 1"));
        }
        self.potential_expr().map_err(|e| invalid(e.to_string()))?;
        for norm in &self.norms {
            match *norm {
                NormRequest::Besov { s, p, q, .. } => {
                    exponent_ok(p, "p")?;
                    exponent_ok(q, "q")?;
                    if !s.is_finite() {
                        return Err(invalid("besov smoothness must be finite"));
                    }
                }
                NormRequest::Sobolev { s } if !(s >= 0.0 && s.is_finite()) => {
                    return Err(invalid(format!("sobolev order {s} must be finite and non-negative")))
                }
                NormRequest::Sobolev { .. } => {}
                NormRequest::Lorentz { p, q } => {
                    exponent_ok(p, "p")?;
                    exponent_ok(q, "q")?;
                }
            }
        }
        if let Some(k) = &self.kernels {
            if k.heat.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
                return Err(invalid("kernel times must be positive"));
            }
        }
        if let Some(b) = &self.bench {
            if b.degrees.is_empty() || b.degrees.contains(&0) {
                return Err(invalid("bench degrees must be positive"));
            }
        }
        for c in &self.checks {
            self.validate_check(c, n)?;
        }
        Ok(())
    }

    fn validate_check(&self, c: &CheckSpec, n: usize) -> Result<()> {
        match c {
            CheckSpec::ResolutionIdentity { tolerance: Some(t), .. } if !(*t > 0.0) => {
                return Err(invalid("resolution tolerance must be positive"))
            }
            CheckSpec::Bernstein { pairs, alphas } => {
                if pairs.is_empty() || alphas.is_empty() {
                    return Err(invalid("bernstein needs exponent pairs and alphas"));
                }
                for &(r, p) in pairs {
                    exponent_ok(r, "r")?;
                    exponent_ok(p, "p")?;
                    if r.0 > p.0 {
                        return Err(Error::IndexConstraintViolated(format!("Bernstein estimate needs r ≤ p, got r={}, p={}", r.0, p.0)));
                    }
                }
            }
            CheckSpec::BlockBounds { ps } => {
                for &p in ps {
                    exponent_ok(p, "p")?;
                }
            }
            CheckSpec::HeatGaussian { t_levels, c_star } => {
                if *t_levels == 0 || !(*c_star > 0.0) {
                    return Err(invalid("heat check needs t_levels > 0 and c_star > 0"));
                }
            }
            CheckSpec::Duality { params } => {
                for &(_, p, q) in params {
                    exponent_ok(p, "p")?;
                    exponent_ok(q, "q")?;
                }
            }
            CheckSpec::Embeddings { embeddings } => {
                for e in embeddings {
                    e.validate()?;
                }
            }
            CheckSpec::Lifting { p, q, .. } | CheckSpec::Subspace { p, q, .. } | CheckSpec::PartitionIndependence { p, q, .. } => {
                exponent_ok(*p, "p")?;
                exponent_ok(*q, "q")?;
            }
            CheckSpec::Equivalence { s, p, q, cross_p, .. } => {
                exponent_ok(*p, "p")?;
                exponent_ok(*q, "q")?;
                exponent_ok(*cross_p, "cross_p")?;
                if n < 2 {
                    return Err(invalid("equivalence check needs dimension at least 2"));
                }
                if self.assert && !verify::in_equivalence_window(n, *s, p.0) {
                    return Err(Error::IndexConstraintViolated(format!(
                        "s = {s} outside (-min(2, n(1-1/p)), min(n/p, 2)) for n = {n}, p = {}",
                        p.0
                    )));
                }
            }
            CheckSpec::LorentzBernstein { p0, p, q } => {
                exponent_ok(*p0, "p0")?;
                exponent_ok(*p, "p")?;
                exponent_ok(*q, "q")?;
                if !(p0.0 < p.0) {
                    return Err(Error::IndexConstraintViolated(format!("Lorentz Bernstein needs p0 < p, got {} and {}", p0.0, p.0)));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// What a run produces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Spectrum, norms, profiles, checks and optional kernels.
    Run,
    Spectrum,
    Norms,
    Verify,
    Bench,
    Profiles,
}

/// Command-line overrides of config values.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub dense_cap: Option<usize>,
    pub assert: Option<bool>,
}

/// Exit status of a run.
#[derive(Clone, Debug)]
pub struct RunStatus {
    pub code: i32,
    pub reason: Option<String>,
    pub out_dir: PathBuf,
}

/// Exit code for an error raised anywhere in a run.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::BudgetExceeded { .. } | Error::DenseCapExceeded { .. } => EXIT_BUDGET_EXCEEDED,
        Error::ConfigInvalid(_)
        | Error::IndexConstraintViolated(_)
        | Error::InvalidParameter(_)
        | Error::InvalidExponent(_)
        | Error::InvalidDomain(_)
        | Error::EmptyDomain
        | Error::UnsupportedDimension(_)
        | Error::Expression(_) => EXIT_CONFIG_INVALID,
        _ => EXIT_CHECK_FAILED,
    }
}

/// Sets the worker count of the thread pools used by the numerics. `0` uses
/// every core. Only the first call takes effect for the Rayon pool.
pub fn set_jobs(jobs: usize) {
    let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    faer::set_global_parallelism(if jobs == 1 { faer::Par::Seq } else { faer::Par::rayon(jobs) });
}

pub fn run_file(config: &Path, overrides: &Overrides) -> RunStatus {
    execute(Mode::Run, config, overrides)
}

/// Runs one mode. `manifest.json` is written on every path that reaches an
/// output directory.
pub fn execute(mode: Mode, config: &Path, overrides: &Overrides) -> RunStatus {
    let start = Instant::now();
    let text = fs::read_to_string(config);
    let parsed = text.as_ref().map_err(|e| invalid(format!("cannot read {}: {e}", config.display()))).and_then(|t| RunConfig::parse(t));
    let config_dir = parsed.as_ref().ok().and_then(|c| c.output_dir.clone());
    let out_dir = overrides
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .or(config_dir)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    let mut manifest = Manifest::new(mode, text.as_deref().unwrap_or(""));
    if let Err(e) = fs::create_dir_all(&out_dir) {
        return RunStatus { code: EXIT_CONFIG_INVALID, reason: Some(format!("cannot create {}: {e}", out_dir.display())), out_dir };
    }
    let result = parsed.and_then(|mut cfg| {
        if let Some(s) = overrides.seed {
            cfg.seed = s;
        }
        if let Some(c) = overrides.dense_cap {
            cfg.dense_cap = c;
        }
        if let Some(a) = overrides.assert {
            cfg.assert = a;
        }
        manifest.seed = Some(cfg.seed);
        manifest.assert = Some(cfg.assert);
        cfg.validate()?;
        Runner { cfg: &cfg, out: &out_dir, manifest: &mut manifest }.go(mode)
    });
    let (code, reason) = match result {
        Ok(None) => (EXIT_OK, None),
        Ok(Some(reason)) => (EXIT_CHECK_FAILED, Some(reason)),
        Err(e) => (exit_code(&e), Some(e.to_string())),
    };
    manifest.exit_code = code;
    manifest.reason = reason.clone();
    manifest.timings_ms.push(("total".into(), millis(start)));
    let reason = match manifest.write(&out_dir.join("manifest.json")) {
        Ok(()) => reason,
        Err(e) => Some(format!("{}; manifest not written: {e}", reason.unwrap_or_default())),
    };
    RunStatus { code, reason, out_dir }
}

fn millis(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

#[derive(Serialize)]
struct CheckOutcome {
    check: String,
    pass: bool,
    notes: Vec<String>,
}

#[derive(Serialize)]
struct Manifest {
    mode: Mode,
    config_sha256: String,
    config: serde_json::Value,
    seed: Option<u64>,
    assert: Option<bool>,
    versions: Versions,
    levels: Vec<LevelInfo>,
    checks: Vec<CheckOutcome>,
    errors: Vec<String>,
    outputs: Vec<String>,
    timings_ms: Vec<(String, f64)>,
    exit_code: i32,
    reason: Option<String>,
}

#[derive(Serialize)]
struct Versions {
    spectral_besov: &'static str,
    faer: &'static str,
    manifest: u32,
}

#[derive(Serialize)]
struct LevelInfo {
    h: f64,
    n: usize,
    lambda_min: f64,
    lambda_max: f64,
    j_min: i32,
    j_max: i32,
    cached: bool,
}

/// Hex SHA-256 of the config text.
pub fn config_hash(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

impl Manifest {
    fn new(mode: Mode, text: &str) -> Self {
        Manifest {
            mode,
            config_sha256: config_hash(text),
            config: serde_json::from_str(text).unwrap_or(serde_json::Value::Null),
            seed: None,
            assert: None,
            versions: Versions { spectral_besov: env!("CARGO_PKG_VERSION"), faer: "0.22", manifest: 1 },
            levels: Vec::new(),
            checks: Vec::new(),
            errors: Vec::new(),
            outputs: Vec::new(),
            timings_ms: Vec::new(),
            exit_code: EXIT_OK,
            reason: None,
        }
    }

    fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        fs::write(path, text + "\n")?;
        Ok(())
    }
}

struct Runner<'a> {
    cfg: &'a RunConfig,
    out: &'a Path,
    manifest: &'a mut Manifest,
}

impl Runner<'_> {
    /// `Ok(Some(reason))` when checks failed in assert mode.
    fn go(&mut self, mode: Mode) -> Result<Option<String>> {
        let t = Instant::now();
        let grids = self.plan()?;
        self.manifest.timings_ms.push(("plan".into(), millis(t)));

        let t = Instant::now();
        let levels = self.levels(&grids, false)?;
        self.manifest.timings_ms.push(("eigendecomposition".into(), millis(t)));

        match mode {
            Mode::Spectrum => {
                self.spectrum(&levels)?;
                Ok(None)
            }
            Mode::Norms => {
                self.norms(&levels)?;
                Ok(None)
            }
            Mode::Profiles => {
                self.profiles(&levels)?;
                Ok(None)
            }
            Mode::Bench => {
                self.bench(&levels)?;
                Ok(None)
            }
            Mode::Verify => self.verify(&grids, &levels),
            Mode::Run => {
                self.spectrum(&levels)?;
                self.profiles(&levels)?;
                self.norms(&levels)?;
                if self.cfg.kernels.is_some() {
                    self.kernels(&levels)?;
                }
                if self.cfg.bench.is_some() {
                    self.bench(&levels)?;
                }
                self.verify(&grids, &levels)
            }
        }
    }

    fn profile(&self) -> Profile {
        self.cfg.profile.unwrap_or(Profile::Standard)
    }

    /// Grids of the sweep, checked against the cell and dense budgets before
    /// any eigensolve.
    fn plan(&self) -> Result<Vec<std::sync::Arc<Grid>>> {
        let mut grids = Vec::with_capacity(self.cfg.h.len());
        for &h in &self.cfg.h {
            let g = Grid::build_capped(&self.cfg.domain, h, self.cfg.cell_cap)?;
            if g.len() > self.cfg.dense_cap {
                return Err(Error::DenseCapExceeded { n: g.len(), cap: self.cfg.dense_cap });
            }
            grids.push(g);
        }
        Ok(grids)
    }

    fn assemble(&self, g: &std::sync::Arc<Grid>) -> Result<SpectralOperator> {
        match self.cfg.potential_expr()? {
            Some(e) => assemble_schrodinger(g, &Potential::from_expression(g.clone(), &e)?),
            None => Ok(assemble_laplacian(g)),
        }
    }

    /// Eigendecomposed levels of `A_V`, or of `A_0` when `laplacian` is set,
    /// reusing the operator cache in the output directory.
    fn levels(&mut self, grids: &[std::sync::Arc<Grid>], laplacian: bool) -> Result<Vec<Level>> {
        let cache = self.out.join("cache");
        fs::create_dir_all(&cache)?;
        let mut out = Vec::with_capacity(grids.len());
        for g in grids {
            let expr = if laplacian { None } else { self.cfg.potential.expr.clone() };
            let key = config_hash(&format!(
                "{}|{}|{}",
                serde_json::to_string(&self.cfg.domain).unwrap_or_default(),
                g.h().to_bits(),
                expr.as_deref().unwrap_or("")
            ));
            let path = cache.join(format!("{key}.sbop"));
            let built = if laplacian { assemble_laplacian(g) } else { self.assemble(g)? };
            let (op, cached) = match SpectralOperator::load(&path) {
                Ok(op) if op.grid().same_as(g) && op.eigen().is_some() && op.matrix() == built.matrix() => (op, true),
                _ => {
                    let op = built.eigendecompose_capped(self.cfg.dense_cap)?;
                    op.save(&path)?;
                    (op, false)
                }
            };
            let sys = DyadicSystem::for_operator_profile(&op, self.profile())?;
            if !laplacian {
                self.manifest.levels.push(LevelInfo {
                    h: g.h(),
                    n: g.len(),
                    lambda_min: op.lambda_min()?,
                    lambda_max: op.lambda_max()?,
                    j_min: sys.j_min,
                    j_max: sys.j_max,
                    cached,
                });
            }
            out.push(Level::with_system(op, sys));
        }
        Ok(out)
    }

    fn write_csv(&mut self, name: &str, header: &str, rows: &[String]) -> Result<()> {
        let mut text = String::with_capacity(64 * (rows.len() + 1));
        text.push_str(header);
        text.push('\n');
        for r in rows {
            text.push_str(r);
            text.push('\n');
        }
        fs::write(self.out.join(name), text)?;
        self.manifest.outputs.push(name.into());
        Ok(())
    }

    fn spectrum(&mut self, levels: &[Level]) -> Result<()> {
        let mut rows = Vec::new();
        for l in levels {
            for (k, lam) in l.op.eigenvalues()?.iter().enumerate() {
                rows.push(format!("{},{},{},{}", l.h(), l.n(), k + 1, lam));
            }
        }
        self.write_csv("spectrum.csv", SPECTRUM_CSV_HEADER, &rows)
    }

    fn profiles(&mut self, levels: &[Level]) -> Result<()> {
        let mut rows = Vec::new();
        for l in levels {
            profile_rows(l.h(), &l.sys, &mut rows);
        }
        self.write_csv("profiles.csv", PROFILES_CSV_HEADER, &rows)
    }

    fn norms(&mut self, levels: &[Level]) -> Result<()> {
        let t = Instant::now();
        let family = self.cfg.family();
        let tag = serde_json::to_value(family.tag).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        let mut rows = Vec::new();
        for l in levels {
            let fs = family.generate(&l.op)?;
            for req in &self.cfg.norms {
                let (name, params, values) = compute_norm(l, &fs, req)?;
                for (i, v) in values.iter().enumerate() {
                    rows.push(format!("{},{},{tag},{i},{name},{params},{v}", l.h(), l.n()));
                }
            }
        }
        self.write_csv("norms.csv", NORMS_CSV_HEADER, &rows)?;
        self.manifest.timings_ms.push(("norms".into(), millis(t)));
        Ok(())
    }

    fn kernels(&mut self, levels: &[Level]) -> Result<()> {
        let req = self.cfg.kernels.clone().unwrap_or_default();
        let cap = req.max_entries.unwrap_or(DEFAULT_KERNEL_ENTRIES);
        let dir = self.out.join("kernels");
        fs::create_dir_all(&dir)?;
        for (i, l) in levels.iter().enumerate() {
            for &t in &req.heat {
                let name = format!("heat-t{t}-level{i}.csv");
                heat_kernel(&l.op, t)?.write_csv(&dir.join(&name), cap)?;
                self.manifest.outputs.push(format!("kernels/{name}"));
            }
            for &j in &req.blocks {
                let name = format!("block-j{j}-level{i}.csv");
                OperatorFunction::dense(&l.op, Symbol::block(&l.sys, j)).kernel()?.write_csv(&dir.join(&name), cap)?;
                self.manifest.outputs.push(format!("kernels/{name}"));
            }
        }
        Ok(())
    }

    /// Dense setup and apply against Chebyshev applies at each degree, on the
    /// middle block of the window.
    fn bench(&mut self, levels: &[Level]) -> Result<()> {
        let degrees = self.cfg.bench.clone().unwrap_or_default().degrees;
        let family = FunctionFamily::new(FamilyTag::RandomEigenmix, self.cfg.seed, 1);
        let mut rows = Vec::new();
        for l in levels {
            let (h, n, nnz) = (l.h(), l.n(), l.op.matrix().nnz());
            let t = Instant::now();
            let fresh = self.assemble(l.op.grid())?.eigendecompose_capped(self.cfg.dense_cap)?;
            rows.push(format!("{h},{n},{nnz},dense-setup,,{},", millis(t)));
            drop(fresh);
            let f = family.generate(&l.op)?.remove(0);
            let sym = Symbol::block(&l.sys, (l.sys.j_min + l.sys.j_max) / 2);
            let t = Instant::now();
            let dense = OperatorFunction::dense(&l.op, sym.clone()).apply(&f)?;
            rows.push(format!("{h},{n},{nnz},dense-apply,,{},0", millis(t)));
            let nd = l2(&dense).max(f64::MIN_POSITIVE);
            let (lo, hi) = l.op.spectrum_bounds();
            for &d in &degrees {
                let series = ChebyshevSeries::fixed(&sym, lo, hi, d)?;
                let t = Instant::now();
                let c = series.apply_function(l.op.matrix(), &f)?;
                let ms = millis(t);
                let err = l2(&c.sub(&dense)?) / nd;
                rows.push(format!("{h},{n},{nnz},chebyshev,{d},{ms},{err}"));
            }
        }
        self.write_csv("bench.csv", BENCH_CSV_HEADER, &rows)
    }

    fn verify(&mut self, grids: &[std::sync::Arc<Grid>], levels: &[Level]) -> Result<Option<String>> {
        let settings = Settings {
            seed: self.cfg.seed,
            config_hash: self.manifest.config_sha256.clone(),
            stability_factor: self.cfg.stability_factor,
            enforce: self.cfg.assert,
        };
        let needs_zero = self.cfg.checks.iter().any(|c| matches!(c, CheckSpec::Equivalence { .. } | CheckSpec::LorentzBernstein { .. }));
        let zero = if needs_zero { self.levels(grids, true)? } else { Vec::new() };
        let pairs: Vec<(Level, Level)> = levels.iter().cloned().zip(zero.iter().cloned()).collect();
        let family = self.cfg.family();
        let mut rows = Vec::new();
        let mut failed = Vec::new();
        for spec in &self.cfg.checks {
            let t = Instant::now();
            match run_check(spec, levels, &pairs, &family, self.cfg, &settings) {
                Ok(mut report) => {
                    report.wall_ms = t.elapsed().as_millis() as u64;
                    rows.extend(report.csv_rows());
                    if !report.pass {
                        failed.push(report.check.clone());
                    }
                    self.manifest.checks.push(CheckOutcome { check: report.check, pass: report.pass, notes: report.notes });
                }
                Err(e) => {
                    let code = exit_code(&e);
                    self.manifest.errors.push(format!("{}: {e}", check_name(spec)));
                    if self.cfg.assert || code != EXIT_CHECK_FAILED {
                        self.write_csv("verify.csv", verify::VERIFY_CSV_HEADER, &rows)?;
                        return Err(e);
                    }
                }
            }
        }
        self.write_csv("verify.csv", verify::VERIFY_CSV_HEADER, &rows)?;
        if failed.is_empty() || !self.cfg.assert {
            Ok(None)
        } else {
            Ok(Some(format!("checks failed: {}", failed.join(", "))))
        }
    }
}

fn l2(f: &GridFunction) -> f64 {
    f.values().iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

fn fmt_exp(p: f64) -> String {
    if p.is_infinite() {
        "inf".into()
    } else {
        format!("{p}")
    }
}

fn compute_norm(l: &Level, fs: &[GridFunction], req: &NormRequest) -> Result<(&'static str, String, Vec<f64>)> {
    Ok(match *req {
        NormRequest::Besov { s, p, q, homogeneous } => {
            let bp = BesovParams::new(s, p.0, q.0, homogeneous);
            let name = if homogeneous { "besov-homogeneous" } else { "besov" };
            (name, format!("s={s};p={};q={}", fmt_exp(p.0), fmt_exp(q.0)), besov_norms(&l.op, &l.sys, fs, bp)?)
        }
        NormRequest::Sobolev { s } => {
            ("sobolev", format!("s={s}"), fs.iter().map(|f| sobolev_norm(&l.op, f, s)).collect::<Result<_>>()?)
        }
        NormRequest::Lorentz { p, q } => (
            "lorentz",
            format!("p={};q={}", fmt_exp(p.0), fmt_exp(q.0)),
            fs.iter().map(|f| lorentz_norm(f, p.0, q.0)).collect::<Result<_>>()?,
        ),
    })
}

fn check_name(spec: &CheckSpec) -> &'static str {
    match spec {
        CheckSpec::ResolutionIdentity { .. } => "resolution-identity",
        CheckSpec::Spectrum {} => "spectrum",
        CheckSpec::Bernstein { .. } => "bernstein",
        CheckSpec::BlockBounds { .. } => "block-bounds",
        CheckSpec::HeatGaussian { .. } => "heat-gaussian",
        CheckSpec::Duality { .. } => "duality",
        CheckSpec::Embeddings { .. } => "embeddings",
        CheckSpec::Lifting { .. } => "lifting",
        CheckSpec::Equivalence { .. } => "equivalence",
        CheckSpec::PartitionIndependence { .. } => "partition-independence",
        CheckSpec::Subspace { .. } => "subspace",
        CheckSpec::LorentzBernstein { .. } => "lorentz-bernstein",
        CheckSpec::ZeroEigenvalue {} => "zero-eigenvalue",
        CheckSpec::Chebyshev { .. } => "chebyshev",
    }
}

fn run_check(
    spec: &CheckSpec,
    levels: &[Level],
    pairs: &[(Level, Level)],
    family: &FunctionFamily,
    cfg: &RunConfig,
    settings: &Settings,
) -> Result<VerifyReport> {
    match spec {
        CheckSpec::ResolutionIdentity { homogeneous, tolerance } => verify::check_resolution_identity(
            levels,
            family,
            *homogeneous,
            tolerance.unwrap_or(verify::RESOLUTION_TOLERANCE),
            settings,
        ),
        CheckSpec::Spectrum {} => verify::check_spectrum(levels, settings),
        CheckSpec::Bernstein { pairs: rp, alphas } => {
            let rp: Vec<(f64, f64)> = rp.iter().map(|(r, p)| (r.0, p.0)).collect();
            verify::check_bernstein(levels, family, &rp, alphas, settings)
        }
        CheckSpec::BlockBounds { ps } => {
            let ps: Vec<f64> = ps.iter().map(|p| p.0).collect();
            verify::check_block_bounds(levels, &ps, settings)
        }
        CheckSpec::HeatGaussian { t_levels, c_star } => verify::check_heat_gaussian(levels, *t_levels, *c_star, settings),
        CheckSpec::Duality { params } => {
            let params: Vec<(f64, f64, f64)> = params.iter().map(|(s, p, q)| (*s, p.0, q.0)).collect();
            verify::check_duality(levels, family, &params, settings)
        }
        CheckSpec::Embeddings { embeddings } => verify::check_embeddings(levels, family, embeddings, settings),
        CheckSpec::Lifting { s, s0, p, q } => verify::check_lifting(levels, family, *s, *s0, p.0, q.0, settings),
        CheckSpec::Equivalence { s, p, q, homogeneous, cross_p, min_gap } => verify::check_equivalence(
            pairs,
            family,
            EquivalenceParams { besov: BesovParams::new(*s, p.0, q.0, *homogeneous), cross_p: cross_p.0, min_gap: *min_gap },
            settings,
        ),
        CheckSpec::PartitionIndependence { s, p, q, homogeneous } => {
            verify::check_partition_independence(levels, family, BesovParams::new(*s, p.0, q.0, *homogeneous), settings)
        }
        CheckSpec::Subspace { s, p, q } => verify::check_subspace_characterization(levels, family, *s, p.0, q.0, settings),
        CheckSpec::LorentzBernstein { p0, p, q } => verify::check_lorentz_bernstein(pairs, family, p0.0, p.0, q.0, settings),
        CheckSpec::ZeroEigenvalue {} => verify::check_zero_eigenvalue(levels, settings),
        CheckSpec::Chebyshev { max_degree } => {
            verify::check_chebyshev(levels, family, cfg.chebyshev_tolerance, max_degree.unwrap_or(DEFAULT_MAX_DEGREE), settings)
        }
    }
}

/// `profiles.csv` rows: `χ`, `ψ`, each `φ_j` and their sum on a log-spaced
/// frequency grid up to `2^{j_max}`, where the sum telescopes to 1.
fn profile_rows(h: f64, sys: &DyadicSystem, rows: &mut Vec<String>) {
    let (lo, hi) = (2f64.powi(sys.j_min.min(0) - 4), 2f64.powi(sys.j_max));
    let lambdas: Vec<f64> =
        (0..PROFILE_POINTS).map(|i| lo * (hi / lo).powf(i as f64 / (PROFILE_POINTS - 1) as f64)).collect();
    let (header, table) = sys.profile_table(&lambdas);
    for row in &table {
        for (name, v) in header.iter().zip(row).skip(1) {
            rows.push(format!("{h},{},{name},{v}", row[0]));
        }
    }
}

/// Drops the timing columns of one of the output tables so that two runs can
/// be compared byte for byte.
pub fn strip_timing(csv: &str, name: &str) -> String {
    let header = match name {
        "verify.csv" => verify::VERIFY_CSV_HEADER,
        "bench.csv" => BENCH_CSV_HEADER,
        _ => return csv.to_string(),
    };
    let Some(col) = header.split(',').position(|c| c == "wall_ms") else {
        return csv.to_string();
    };
    csv.lines()
        .map(|line| {
            let cells: Vec<&str> = line.split(',').collect();
            cells.iter().enumerate().filter(|(i, _)| *i != col).map(|(_, c)| *c).collect::<Vec<_>>().join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "domain": {"dimension": 1, "bbox": [[0, 1]], "shape": {"type": "box", "lo": [0], "hi": [1]}},
        "h": [0.0625],
        "checks": [{"kind": "resolution-identity", "homogeneous": false}]
    }"#;

    #[test]
    fn minimal_config_defaults() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        c.validate().unwrap();
        assert_eq!(c.dense_cap, DEFAULT_DENSE_CAP);
        assert!(c.assert);
        assert_eq!(c.family().tag, FamilyTag::RandomEigenmix);
        assert_eq!(c.family().count, 8);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = MINIMAL.replacen("\"h\"", "\"hh\": 1, \"h\"", 1);
        assert!(matches!(RunConfig::parse(&bad), Err(Error::ConfigInvalid(_))));
        let bad = MINIMAL.replace("\"homogeneous\": false", "\"homogenous\": false");
        assert!(matches!(RunConfig::parse(&bad), Err(Error::ConfigInvalid(_))));
    }

    #[test]
    fn exponents_accept_inf() {
        let e: Vec<Exponent> = serde_json::from_str(r#"[1, 2.5, "inf"]"#).unwrap();
        assert_eq!(e, vec![Exponent(1.0), Exponent(2.5), Exponent(f64::INFINITY)]);
        assert!(serde_json::from_str::<Exponent>(r#""two""#).is_err());
        assert_eq!(serde_json::to_string(&Exponent(f64::INFINITY)).unwrap(), "\"inf\"");
    }

    #[test]
    fn equivalence_window_is_enforced_only_in_assert_mode() {
        let text = r#"{
            "domain": {"dimension": 2, "bbox": [[-1, 1], [-1, 1]], "shape": {"type": "ball", "center": [0, 0], "radius": 1}},
            "h": [0.25],
            "checks": [{"kind": "equivalence", "s": 1.5, "p": 2, "q": 2}]
        }"#;
        let mut c = RunConfig::parse(text).unwrap();
        assert!(matches!(c.validate(), Err(Error::IndexConstraintViolated(_))));
        c.assert = false;
        c.validate().unwrap();
    }

    #[test]
    fn validation_catches_bad_values() {
        for (from, to) in [("0.0625", "-1"), ("\"hi\": [1]", "\"hi\": [1, 2]"), ("\"checks\"", "\"potential\": {\"expr\": \"x +\"}, \"checks\"")] {
            let c = RunConfig::parse(&MINIMAL.replace(from, to)).unwrap();
            assert!(c.validate().is_err(), "{from} -> {to}");
        }
    }

    #[test]
    fn exit_codes_by_error_class() {
        assert_eq!(exit_code(&Error::ConfigInvalid("x".into())), EXIT_CONFIG_INVALID);
        assert_eq!(exit_code(&Error::IndexConstraintViolated("x".into())), EXIT_CONFIG_INVALID);
        assert_eq!(exit_code(&Error::DenseCapExceeded { n: 2, cap: 1 }), EXIT_BUDGET_EXCEEDED);
        assert_eq!(exit_code(&Error::BudgetExceeded { cells: 2, cap: 1 }), EXIT_BUDGET_EXCEEDED);
        assert_eq!(exit_code(&Error::AssumptionViolated("x".into())), EXIT_CHECK_FAILED);
    }

    #[test]
    fn strip_timing_removes_wall_ms() {
        let csv = format!("{}\nbernstein,a,1.5,true,0.1,9,3,17\n", verify::VERIFY_CSV_HEADER);
        let s = strip_timing(&csv, "verify.csv");
        assert_eq!(s, "check,anchor,constant,pass,h,N,seed\nbernstein,a,1.5,true,0.1,9,3");
        assert_eq!(strip_timing("a,b\n1,2", "norms.csv"), "a,b\n1,2");
    }

    #[test]
    fn profile_rows_sum_to_one() {
        let sys = DyadicSystem::build(10.0, 4000.0, 0.0).unwrap();
        let mut rows = Vec::new();
        profile_rows(0.1, &sys, &mut rows);
        let sums: Vec<f64> = rows
            .iter()
            .filter(|r| r.split(',').nth(2) == Some("sum"))
            .map(|r| r.split(',').nth(3).unwrap().parse().unwrap())
            .collect();
        assert_eq!(sums.len(), PROFILE_POINTS);
        assert!(sums.iter().all(|s| (s - 1.0).abs() <= 1e-14));
    }

    #[test]
    fn config_hash_is_sha256() {
        assert_eq!(config_hash(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }
}
