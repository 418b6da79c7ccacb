//! Measured-constant experiments for the inequalities of the calculus.
//!
//! Every check evaluates its quantities on one or more grid levels (typically
//! `h` and `h/2`) and reports one value per level. Existential constants become
//! measured ones: a constant passes when it is finite and consecutive levels
//! differ by at most a factor (2 unless configured otherwise). Quantities with a
//! fixed target, like identities and slopes, pass against that target instead.

use std::fmt::Write as _;
use std::time::Instant;

use faer::Mat;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::calculus::{
    function_matrix, heat_kernels_positive, matrix_mixed_norm, matrix_opnorm, power, ChebyshevSeries, Expansion,
    LogKernel, OperatorFunction, Symbol,
};
use crate::dyadic::DyadicSystem;
use crate::error::{Error, Result};
use crate::geometry::{conjugate_exponent, GridFunction};
use crate::norms::{besov_norms, block_profiles, lorentz_norm, require_positive_spectrum, test_seminorms, BesovParams};
use crate::operator::{assemble_schrodinger, interval_eigenvalues, SpectralOperator};
use crate::potential::{KatoReport, Potential};

pub const DEFAULT_STABILITY_FACTOR: f64 = 2.0;
/// Relative `L²` residual allowed in the resolution identity.
pub const RESOLUTION_TOLERANCE: f64 = 1e-10;
/// Exponent constant `C*` in `exp(-|x-y|²/(C* t))`.
pub const GAUSSIAN_EXPONENT: f64 = 8.0;
/// Allowed excess of `t^{n/2} e^{-tA_V}(x,y)` over the comparison kernel.
pub const DOMINATION_SLACK: f64 = 1e-12;
/// Smallest `t / h²` at which the lattice heat kernel is compared with the
/// Gaussian bound.
pub const HEAT_RESOLVED_STEPS: f64 = 16.0;
/// Relative `L²` distance allowed between Chebyshev and dense applies.
pub const CHEBYSHEV_AGREEMENT: f64 = 1e-8;
/// Sup error requested from the adaptive Chebyshev fit in the agreement check.
/// Clenshaw roundoff grows like `degree · ε`, so 1e-12 is out of reach for the
/// narrow low blocks on fine grids.
pub const CHEBYSHEV_FIT_TOLERANCE: f64 = 1e-10;
/// Half-width of the accepted band around the reference cross-block slope.
pub const SLOPE_BAND: f64 = 0.5;

/// Test-function generators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyTag {
    RandomEigenmix,
    Bump,
    SingleEigenvector,
    Indicator,
    BoundaryLayer,
}

impl FamilyTag {
    fn code(self) -> u64 {
        match self {
            FamilyTag::RandomEigenmix => 1,
            FamilyTag::Bump => 2,
            FamilyTag::SingleEigenvector => 3,
            FamilyTag::Indicator => 4,
            FamilyTag::BoundaryLayer => 5,
        }
    }
}

/// A reproducible batch of test functions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionFamily {
    pub tag: FamilyTag,
    pub seed: u64,
    pub count: usize,
}

/// Eigenmodes mixed by `random-eigenmix`.
const EIGENMIX_MODES: usize = 48;

impl FunctionFamily {
    pub fn new(tag: FamilyTag, seed: u64, count: usize) -> Self {
        FunctionFamily { tag, seed, count }
    }

    /// Generates the batch on the grid of `op`. Geometric generators draw their
    /// parameters in physical coordinates, so the same `(tag, seed)` describes
    /// the same functions on every refinement level.
    pub fn generate(&self, op: &SpectralOperator) -> Result<Vec<GridFunction>> {
        if self.count == 0 {
            return Err(Error::InvalidParameter("function family must not be empty".into()));
        }
        let grid = op.grid().clone();
        let n = grid.dim();
        let bbox = grid.bbox().to_vec();
        let side = bbox.iter().map(|b| b[1] - b[0]).fold(f64::INFINITY, f64::min);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ self.tag.code());
        let mut out = Vec::with_capacity(self.count);
        for i in 0..self.count {
            let f = match self.tag {
                FamilyTag::RandomEigenmix => {
                    let e = op.eigen_or_err()?;
                    let beta: f64 = rng.gen_range(0.0..2.0);
                    let coef: Vec<f64> = (0..EIGENMIX_MODES)
                        .map(|k| rng.gen_range(-1.0..1.0) * ((k + 1) as f64).powf(-beta))
                        .collect();
                    let scale = grid.cell_volume().powf(-0.5);
                    let values = (0..grid.len())
                        .map(|x| {
                            (0..EIGENMIX_MODES.min(grid.len())).map(|k| coef[k] * e.vectors[(x, k)]).sum::<f64>() * scale
                        })
                        .collect();
                    GridFunction::from_real(grid.clone(), values)?
                }
                FamilyTag::SingleEigenvector => op.eigenfunction(i % grid.len())?,
                FamilyTag::Bump | FamilyTag::Indicator => {
                    let mut f = None;
                    for _ in 0..64 {
                        let c: Vec<f64> = bbox.iter().map(|b| rng.gen_range(b[0]..b[1])).collect();
                        let rho = rng.gen_range(0.15..0.5) * side;
                        let amp = rng.gen_range(0.5..2.0);
                        let bump = self.tag == FamilyTag::Bump;
                        let g = GridFunction::from_fn(grid.clone(), |x| {
                            let r2: f64 = x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / (rho * rho);
                            if r2 >= 1.0 {
                                0.0
                            } else if bump {
                                amp * (1.0 - 1.0 / (1.0 - r2)).exp()
                            } else {
                                amp
                            }
                        })?;
                        if g.lp_norm(f64::INFINITY)? > 0.0 {
                            f = Some(g);
                            break;
                        }
                    }
                    f.ok_or_else(|| Error::InvalidParameter("could not place a test function inside the domain".into()))?
                }
                FamilyTag::BoundaryLayer => {
                    let delta = rng.gen_range(0.02..0.25) * side;
                    let amp = rng.gen_range(0.5..2.0);
                    let dist = grid.boundary_distance();
                    let h = grid.h();
                    let values = dist.iter().map(|&d| amp * (-(d as f64) * h / delta).exp()).collect();
                    GridFunction::from_real(grid.clone(), values)?
                }
            };
            debug_assert_eq!(f.grid().dim(), n);
            out.push(f);
        }
        Ok(out)
    }
}

/// An operator with eigendata and its dyadic system: one refinement level.
#[derive(Clone, Debug)]
pub struct Level {
    pub op: SpectralOperator,
    pub sys: DyadicSystem,
}

impl Level {
    pub fn new(op: SpectralOperator) -> Result<Self> {
        let sys = DyadicSystem::for_operator(&op)?;
        Ok(Level { op, sys })
    }

    pub fn with_system(op: SpectralOperator, sys: DyadicSystem) -> Self {
        Level { op, sys }
    }

    pub fn h(&self) -> f64 {
        self.op.grid().h()
    }

    pub fn n(&self) -> usize {
        self.op.len()
    }

    fn dim(&self) -> usize {
        self.op.grid().dim()
    }
}

/// Run-wide settings shared by the checks.
#[derive(Clone, Debug)]
pub struct Settings {
    pub seed: u64,
    pub config_hash: String,
    pub stability_factor: f64,
    /// Index constraints are errors when set; otherwise out-of-range indices
    /// are measured and reported without a verdict.
    pub enforce: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Settings { seed: 0, config_hash: String::new(), stability_factor: DEFAULT_STABILITY_FACTOR, enforce: true }
    }
}

/// One measured value at one level.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportRow {
    /// What was measured, with its parameters.
    pub anchor: String,
    pub constant: f64,
    /// Verdict for the quantity across all levels; `None` for diagnostics.
    pub pass: Option<bool>,
    pub h: f64,
    pub n: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub check: String,
    pub rows: Vec<ReportRow>,
    pub pass: bool,
    pub notes: Vec<String>,
    pub config_hash: String,
    pub seed: u64,
    pub wall_ms: u64,
}

pub const VERIFY_CSV_HEADER: &str = "check,anchor,constant,pass,h,N,seed,wall_ms";

impl VerifyReport {
    /// Values of one quantity in level order.
    pub fn constants(&self, anchor: &str) -> Vec<f64> {
        self.rows.iter().filter(|r| r.anchor == anchor).map(|r| r.constant).collect()
    }

    pub fn verdict(&self, anchor: &str) -> Option<bool> {
        self.rows.iter().find(|r| r.anchor == anchor).and_then(|r| r.pass)
    }

    pub fn anchors(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.anchor.as_str()) {
                out.push(&r.anchor);
            }
        }
        out
    }

    /// Rows of `verify.csv`.
    pub fn csv_rows(&self) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| {
                let pass = match r.pass {
                    Some(true) => "true",
                    Some(false) => "false",
                    None => "",
                };
                format!(
                    "{},{},{},{},{},{},{},{}",
                    self.check, r.anchor, r.constant, pass, r.h, r.n, self.seed, self.wall_ms
                )
            })
            .collect()
    }

    /// One human-readable line per quantity.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for a in self.anchors() {
            let vals: Vec<String> = self.constants(a).iter().map(|v| format!("{v:.6e}")).collect();
            let verdict = match self.verdict(a) {
                Some(true) => "pass",
                Some(false) => "FAIL",
                None => "info",
            };
            let _ = writeln!(s, "{} {a}: [{}] {verdict}", self.check, vals.join(", "));
        }
        s
    }
}

/// Whether the values are finite and consecutive ones differ by at most `factor`.
pub fn is_stable(values: &[f64], factor: f64) -> bool {
    if values.iter().any(|v| !v.is_finite()) {
        return false;
    }
    values.windows(2).all(|w| {
        let (a, b) = (w[0].abs(), w[1].abs());
        let (lo, hi) = (a.min(b), a.max(b));
        hi <= f64::MIN_POSITIVE || hi <= factor * lo
    })
}

/// One value per level.
#[derive(Clone, Copy, Debug)]
struct Sample {
    h: f64,
    n: usize,
    value: f64,
}

struct Builder {
    check: String,
    rows: Vec<ReportRow>,
    pass: bool,
    notes: Vec<String>,
    start: Instant,
    settings: Settings,
}

impl Builder {
    fn new(check: &str, settings: &Settings) -> Self {
        Builder {
            check: check.to_string(),
            rows: Vec::new(),
            pass: true,
            notes: Vec::new(),
            start: Instant::now(),
            settings: settings.clone(),
        }
    }

    fn record(&mut self, anchor: &str, samples: &[Sample], pass: Option<bool>) -> bool {
        for s in samples {
            self.rows.push(ReportRow { anchor: anchor.to_string(), constant: s.value, pass, h: s.h, n: s.n });
        }
        if pass == Some(false) {
            self.pass = false;
        }
        pass.unwrap_or(true)
    }

    fn stable(&mut self, anchor: &str, samples: &[Sample]) -> bool {
        let vals: Vec<f64> = samples.iter().map(|s| s.value).collect();
        let ok = is_stable(&vals, self.settings.stability_factor);
        self.record(anchor, samples, Some(ok))
    }

    fn at_most(&mut self, anchor: &str, samples: &[Sample], limit: f64) -> bool {
        let ok = samples.iter().all(|s| s.value <= limit);
        self.record(anchor, samples, Some(ok))
    }

    fn at_least(&mut self, anchor: &str, samples: &[Sample], floor: f64) -> bool {
        let ok = samples.iter().all(|s| s.value >= floor);
        self.record(anchor, samples, Some(ok))
    }

    fn within(&mut self, anchor: &str, samples: &[Sample], target: f64, band: f64) -> bool {
        let ok = samples.iter().all(|s| (s.value - target).abs() <= band);
        self.record(anchor, samples, Some(ok))
    }

    fn info(&mut self, anchor: &str, samples: &[Sample]) {
        self.record(anchor, samples, None);
    }

    fn note(&mut self, msg: impl Into<String>) {
        self.notes.push(msg.into());
    }

    fn finish(self) -> VerifyReport {
        VerifyReport {
            check: self.check,
            rows: self.rows,
            pass: self.pass,
            notes: self.notes,
            config_hash: self.settings.config_hash,
            seed: self.settings.seed,
            wall_ms: self.start.elapsed().as_millis() as u64,
        }
    }
}

fn sample(level: &Level, value: f64) -> Sample {
    Sample { h: level.h(), n: level.n(), value }
}

/// `inf`-aware exponent label.
fn fmt_exp(p: f64) -> String {
    if p.is_infinite() {
        "inf".into()
    } else {
        format!("{p}")
    }
}

fn require_levels(levels: &[Level]) -> Result<()> {
    if levels.is_empty() {
        return Err(Error::InvalidParameter("a check needs at least one level".into()));
    }
    Ok(())
}

fn l2_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

fn l2(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Relative residuals of `f - ψ(A)f - Σ_{j≥1} φ_j(√A)f` and, when `homogeneous`,
/// of `f - Σ_{j∈window} φ_j(√A)f`, with the blocks summed one at a time.
pub fn resolution_residuals(level: &Level, fs: &[GridFunction], homogeneous: bool) -> Result<(f64, Option<f64>)> {
    let (op, sys) = (&level.op, &level.sys);
    let exp = Expansion::new(op, fs)?;
    let mut inh: Vec<Vec<Complex64>> = exp.synthesize(|l| sys.psi(l)).into_iter().map(|g| g.into_values()).collect();
    let mut hom: Vec<Vec<Complex64>> = fs.iter().map(|f| vec![Complex64::new(0.0, 0.0); f.values().len()]).collect();
    let lo = sys.j_min.min(1);
    for j in lo..=sys.j_max {
        let blocks = exp.synthesize(|l| sys.block_symbol(j, l));
        for (k, b) in blocks.iter().enumerate() {
            for (i, v) in b.values().iter().enumerate() {
                if j >= 1 {
                    inh[k][i] += v;
                }
                if j >= sys.j_min {
                    hom[k][i] += v;
                }
            }
        }
    }
    let mut r_inh = 0.0f64;
    let mut r_hom = 0.0f64;
    for (k, f) in fs.iter().enumerate() {
        let nf = l2(f.values());
        if nf == 0.0 {
            continue;
        }
        r_inh = r_inh.max(l2_distance(f.values(), &inh[k]) / nf);
        r_hom = r_hom.max(l2_distance(f.values(), &hom[k]) / nf);
    }
    Ok((r_inh, homogeneous.then_some(r_hom)))
}

/// Resolution of the identity by the dyadic blocks.
///
/// `homogeneous`: `None` runs the homogeneous identity only when the spectrum is
/// positive, `Some(true)` requires it (zero eigenvalues are an error) and
/// `Some(false)` skips it.
pub fn check_resolution_identity(
    levels: &[Level],
    family: &FunctionFamily,
    homogeneous: Option<bool>,
    tolerance: f64,
    settings: &Settings,
) -> Result<VerifyReport> {
    require_levels(levels)?;
    let mut b = Builder::new("resolution-identity", settings);
    let mut inh = Vec::new();
    let mut hom = Vec::new();
    for level in levels {
        let positive = require_positive_spectrum(&level.op);
        let run_hom = match homogeneous {
            Some(true) => {
                positive?;
                true
            }
            Some(false) => false,
            None => positive.is_ok() && level.sys.covers_low_end(),
        };
        let fs = family.generate(&level.op)?;
        let (ri, rh) = resolution_residuals(level, &fs, run_hom)?;
        inh.push(sample(level, ri));
        if let Some(rh) = rh {
            hom.push(sample(level, rh));
        }
    }
    b.at_most("inhomogeneous-resolution-residual", &inh, tolerance);
    if !hom.is_empty() {
        b.at_most("homogeneous-resolution-residual", &hom, tolerance);
    }
    Ok(b.finish())
}

/// Measured Bernstein constants
/// `max_j ‖A^α φ_j(√A)‖_{L^r→L^p} / 2^{n(1/r-1/p)j + 2αj}`
/// for the operator (exact for `r = 1` and `r = p = 2`) and over the family.
pub fn check_bernstein(
    levels: &[Level],
    family: &FunctionFamily,
    pairs: &[(f64, f64)],
    alphas: &[f64],
    settings: &Settings,
) -> Result<VerifyReport> {
    require_levels(levels)?;
    for &(r, p) in pairs {
        if !(r >= 1.0 && p >= r) {
            return Err(Error::IndexConstraintViolated(format!("Bernstein estimate needs 1 ≤ r ≤ p, got r={r}, p={p}")));
        }
    }
    let mut b = Builder::new("bernstein", settings);
    let mut op_c = vec![vec![Vec::new(); alphas.len()]; pairs.len()];
    let mut fam_c = op_c.clone();
    let mut bracket = vec![Vec::new(); alphas.len()];
    let mut exact = true;
    for level in levels {
        let n = level.dim() as f64;
        let (op, sys) = (&level.op, &level.sys);
        let fs = family.generate(op)?;
        let exp = Expansion::new(op, &fs)?;
        let w = op.grid().cell_volume();
        for (ai, &alpha) in alphas.iter().enumerate() {
            let mut c_op = vec![0.0f64; pairs.len()];
            let mut c_fam = vec![0.0f64; pairs.len()];
            let mut worst_bracket = 0.0f64;
            for j in sys.window() {
                let sym = Symbol::power_block(sys, j, alpha);
                let needs_matrix = pairs.iter().any(|&(r, p)| !(r == 2.0 && p == 2.0));
                let m = if needs_matrix { Some(function_matrix(op, |l| sym.eval(l))?) } else { None };
                let outs = exp.synthesize(|l| sym.eval(l));
                for (pi, &(r, p)) in pairs.iter().enumerate() {
                    let scale = (n * (1.0 / r - 1.0 / p) * j as f64 + 2.0 * alpha * j as f64).exp2();
                    let norm = if r == 2.0 && p == 2.0 {
                        op.eigenvalues()?.iter().map(|&l| sym.eval(l).abs()).fold(0.0, f64::max)
                    } else {
                        let on = matrix_mixed_norm(m.as_ref().expect("matrix"), w, r, p, settings.seed);
                        exact &= on.exact;
                        on.value
                    };
                    c_op[pi] = c_op[pi].max(norm / scale);
                    for (f, g) in fs.iter().zip(&outs) {
                        let nf = f.lp_norm(r)?;
                        if nf > 0.0 {
                            c_fam[pi] = c_fam[pi].max(g.lp_norm(p)? / (scale * nf));
                        }
                    }
                }
                if alpha != 0.0 {
                    // ‖A^α φ_j f‖_2 / ‖φ_j f‖_2 lies in [4^{α(j-1)}, 4^{α(j+1)}].
                    let plain = exp.synthesize(|l| sys.block_symbol(j, l));
                    for (g, pl) in outs.iter().zip(&plain) {
                        let d = pl.lp_norm(2.0)?;
                        if d > 1e-12 * l2(pl.values()).max(f64::MIN_POSITIVE) && d > 0.0 {
                            let ratio = g.lp_norm(2.0)? / d;
                            let lo = (2.0 * alpha * (j - 1) as f64).exp2();
                            let hi = (2.0 * alpha * (j + 1) as f64).exp2();
                            let excess = (lo / ratio).max(ratio / hi);
                            worst_bracket = worst_bracket.max(excess);
                        }
                    }
                }
            }
            for pi in 0..pairs.len() {
                op_c[pi][ai].push(sample(level, c_op[pi]));
                fam_c[pi][ai].push(sample(level, c_fam[pi]));
            }
            if alpha != 0.0 {
                bracket[ai].push(sample(level, worst_bracket));
            }
        }
    }
    for (pi, &(r, p)) in pairs.iter().enumerate() {
        for (ai, &alpha) in alphas.iter().enumerate() {
            let tag = format!("r={};p={};alpha={alpha}", fmt_exp(r), fmt_exp(p));
            b.stable(&format!("block-gain-operator:{tag}"), &op_c[pi][ai]);
            b.stable(&format!("block-gain-family:{tag}"), &fam_c[pi][ai]);
        }
    }
    for (ai, &alpha) in alphas.iter().enumerate() {
        if alpha != 0.0 {
            // Values above 1 leave the bracket; 1 + 1e-12 absorbs rounding.
            b.at_most(&format!("spectral-bracket:alpha={alpha}"), &bracket[ai], 1.0 + 1e-12);
        }
    }
    if !exact {
        b.note("some operator norms are probe lower bounds");
    }
    Ok(b.finish())
}

/// Uniform bounds `sup_j ‖φ_j(√A)‖_{p→p}` and `sup_θ ‖ψ(θA)‖_{p→p}` on the
/// dilations `θ = 4^{-k}` (and `θ > 1` too when the spectrum is positive).
pub fn check_block_bounds(levels: &[Level], ps: &[f64], settings: &Settings) -> Result<VerifyReport> {
    require_levels(levels)?;
    let mut b = Builder::new("block-bounds", settings);
    let mut blocks = vec![Vec::new(); ps.len()];
    let mut lows = vec![Vec::new(); ps.len()];
    let mut exact = true;
    for level in levels {
        let (op, sys) = (&level.op, &level.sys);
        let w = op.grid().cell_volume();
        let mut sup_b = vec![0.0f64; ps.len()];
        let mut sup_l = vec![0.0f64; ps.len()];
        for j in sys.window() {
            let m = function_matrix(op, |l| sys.block_symbol(j, l))?;
            for (i, &p) in ps.iter().enumerate() {
                let on = matrix_opnorm(&m, w, p, settings.seed);
                exact &= on.exact;
                sup_b[i] = sup_b[i].max(on.value);
            }
        }
        let k_hi = sys.j_max + 1;
        let k_lo = if require_positive_spectrum(op).is_ok() { sys.j_min - 1 } else { 0 };
        for k in k_lo..=k_hi {
            let theta = (-2.0 * k as f64).exp2();
            let m = function_matrix(op, |l| sys.psi(theta * l))?;
            for (i, &p) in ps.iter().enumerate() {
                let on = matrix_opnorm(&m, w, p, settings.seed);
                exact &= on.exact;
                sup_l[i] = sup_l[i].max(on.value);
            }
        }
        for i in 0..ps.len() {
            blocks[i].push(sample(level, sup_b[i]));
            lows[i].push(sample(level, sup_l[i]));
        }
    }
    for (i, &p) in ps.iter().enumerate() {
        b.stable(&format!("block-uniform:p={}", fmt_exp(p)), &blocks[i]);
        b.stable(&format!("low-pass-dilations:p={}", fmt_exp(p)), &lows[i]);
    }
    if !exact {
        b.note("some operator norms are probe lower bounds");
    }
    Ok(b.finish())
}

/// `max_{x,y} ln(K_t(x,y) t^{n/2}) + |x-y|²/(C t)` for one kernel.
fn gaussian_log_sup(level: &Level, k: &LogKernel, c_star: f64) -> f64 {
    let g = level.op.grid();
    let n = g.len();
    let half_n = 0.5 * g.dim() as f64;
    let mut best = f64::NEG_INFINITY;
    for j in 0..n {
        for i in 0..n {
            let m = k.mantissa[(i, j)];
            if m > 0.0 {
                let d = g.distance(i, j);
                best = best.max(m.ln() + k.log_scale + half_n * k.t.ln() + d * d / (c_star * k.t));
            }
        }
    }
    best
}

/// Gaussian upper bound of the heat kernel. Reports
/// `sup_{t,x,y} K_t(x,y) t^{n/2} e^{|x-y|²/(C* t)}` over `t = 2^{-k}`,
/// `k = 0..levels_t-1`, restricted to `t ≥ 16 h²` on the coarsest level (below
/// that the lattice kernel has heavier than Gaussian tails), and the entrywise domination `e^{-tA_V} ≤ e^{-tA_{V*}}`
/// with `V* = -V_-`. When the negative part is not small enough for the global
/// bound, the growth rate `ω` of the normalized sup in `t` is reported as well.
pub fn check_heat_gaussian(levels: &[Level], t_levels: usize, c_star: f64, settings: &Settings) -> Result<VerifyReport> {
    require_levels(levels)?;
    if t_levels == 0 || !(c_star > 0.0) {
        return Err(Error::InvalidParameter("heat check needs t levels and a positive exponent constant".into()));
    }
    let mut b = Builder::new("heat-gaussian", settings);
    let h_max = levels.iter().map(Level::h).fold(0.0, f64::max);
    let t_floor = HEAT_RESOLVED_STEPS * h_max * h_max;
    let kept = (0..t_levels).filter(|&k| (-(k as f64)).exp2() >= t_floor).count();
    if kept == 0 {
        return Err(Error::InvalidParameter(format!("no time 2^-k is resolved on a grid with h = {h_max}")));
    }
    if kept < t_levels {
        b.note(format!("times below {HEAT_RESOLVED_STEPS} h² = {t_floor:e} dropped: {} of {t_levels}", t_levels - kept));
    }
    let mut sups = Vec::new();
    let mut slack = Vec::new();
    let mut growth = Vec::new();
    let mut kato_small = true;
    for level in levels {
        let op = &level.op;
        let kernels = heat_kernels_positive(op, 1.0, kept)?;
        let per_t: Vec<f64> = kernels.iter().map(|k| gaussian_log_sup(level, k, c_star)).collect();
        let best = per_t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        sups.push(sample(level, best.exp()));
        let report = op.potential().map(Potential::kato_report);
        if let Some(r) = &report {
            kato_small &= r.satisfies_ass1;
        }
        // ω from a least-squares fit of ln sup_t against t.
        let ts: Vec<f64> = kernels.iter().map(|k| k.t).collect();
        growth.push(sample(level, fit_slope(&ts, &per_t).max(0.0)));
        let pot = op.potential();
        let has_plus = pot.is_some_and(|v| v.plus().iter().any(|&x| x > 0.0));
        let mut worst = 0.0f64;
        if has_plus {
            let v = pot.expect("potential present");
            let star = Potential::from_values(op.grid().clone(), v.minus().iter().map(|m| -m).collect())?;
            let op_star = assemble_schrodinger(op.grid(), &star)?;
            let ks = heat_kernels_positive(&op_star, 1.0, kept)?;
            let half_n = 0.5 * op.grid().dim() as f64;
            for (kv, kw) in kernels.iter().zip(&ks) {
                let norm = (half_n * kv.t.ln()).exp();
                let n = op.len();
                for j in 0..n {
                    for i in 0..n {
                        let d = (kv.value(i, j) - kw.value(i, j)) * norm;
                        worst = worst.max(d);
                    }
                }
            }
        }
        slack.push(sample(level, worst));
    }
    b.stable(&format!("gaussian-normalized-sup:C={c_star}"), &sups);
    b.at_most("heat-domination-excess", &slack, DOMINATION_SLACK);
    if !kato_small {
        b.info("heat-growth-rate", &growth);
        b.note("negative part exceeds the global smallness threshold; times restricted to t ≤ 1");
    }
    Ok(b.finish())
}

/// Least-squares slope of `y` against `x`; NaN with fewer than two points.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = x.iter().zip(y).filter(|(a, b)| a.is_finite() && b.is_finite()).map(|(a, b)| (*a, *b)).collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return f64::NAN;
    }
    sxy / sxx
}

/// Applies `g` to every function of a batch through one expansion.
fn apply_batch(op: &SpectralOperator, fs: &[GridFunction], g: impl Fn(f64) -> f64) -> Result<Vec<GridFunction>> {
    Ok(Expansion::new(op, fs)?.synthesize(g))
}

/// `f|f|^{p-2}/‖f‖_p^{p-1}`: the unit-norm `L^{p'}` function with `⟨f, h⟩ = ‖f‖_p`.
fn dual_element(f: &GridFunction, p: f64) -> Result<GridFunction> {
    let nf = f.lp_norm(p)?;
    let values = f
        .values()
        .iter()
        .map(|v| {
            let a = v.norm();
            if a == 0.0 || nf == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                v * (a / nf).powf(p - 2.0) / nf
            }
        })
        .collect();
    Ok(GridFunction::diagnostic(f.grid().clone(), values))
}

/// Dual-block partner of `f` for the inhomogeneous `B^s_{p,q}` norm:
/// `g = ψ(A)h_ψ + Σ_{j≥1} 2^{sj} b_j φ_j(√A) h_j` with `h` the `L^p` dual
/// elements of the blocks and `b` the `ℓ^q` dual of the weighted block norms,
/// so that `⟨f, g⟩ = ‖f‖_{B^s_{p,q}}`.
pub fn dual_partner(level: &Level, f: &GridFunction, s: f64, p: f64, q: f64) -> Result<GridFunction> {
    let (op, sys) = (&level.op, &level.sys);
    let one = std::slice::from_ref(f);
    let exp = Expansion::new(op, one)?;
    let psi_f = exp.synthesize(|l| sys.psi(l)).remove(0);
    let mut blocks = Vec::new();
    for j in 1..=sys.j_max.max(1) {
        let bj = exp.synthesize(|l| sys.block_symbol(j, l)).remove(0);
        let a = (s * j as f64).exp2() * bj.lp_norm(p)?;
        blocks.push((j, bj, a));
    }
    let total = blocks.iter().map(|b| b.2.powf(q)).sum::<f64>().powf(1.0 / q);
    let mut acc: Vec<Complex64> = apply_batch(op, &[dual_element(&psi_f, p)?], |l| sys.psi(l))?.remove(0).into_values();
    for (j, bj, a) in &blocks {
        if *a == 0.0 || total == 0.0 {
            continue;
        }
        let coef = (s * *j as f64).exp2() * (a / total).powf(q - 1.0);
        let h = dual_element(bj, p)?;
        let g = apply_batch(op, &[h], |l| sys.block_symbol(*j, l))?.remove(0);
        for (x, v) in acc.iter_mut().zip(g.values()) {
            *x += coef * v;
        }
    }
    GridFunction::new(op.grid().clone(), acc)
}

/// Pairing bound `|⟨f,g⟩| ≤ C ‖f‖_{B^s_{p,q}} ‖g‖_{B^{-s}_{p',q'}}` over family
/// pairs, the diagonal pairs and dual-block partners, plus the fraction of the
/// measured constant reached by the partners.
pub fn check_duality(
    levels: &[Level],
    family: &FunctionFamily,
    params: &[(f64, f64, f64)],
    settings: &Settings,
) -> Result<VerifyReport> {
    require_levels(levels)?;
    for &(_, p, q) in params {
        if !(p >= 1.0 && p.is_finite() && q >= 1.0 && q.is_finite()) {
            return Err(Error::IndexConstraintViolated(format!("duality needs 1 ≤ p, q < ∞, got p={p}, q={q}")));
        }
    }
    let mut b = Builder::new("duality", settings);
    for &(s, p, q) in params {
        let (pp, qp) = (conjugate_exponent(p), conjugate_exponent(q));
        let mut consts = Vec::new();
        let mut attain = Vec::new();
        for level in levels {
            let (op, sys) = (&level.op, &level.sys);
            let fs = family.generate(op)?;
            let nf = besov_norms(op, sys, &fs, BesovParams::new(s, p, q, false))?;
            let mut partners: Vec<GridFunction> = Vec::new();
            for f in &fs {
                partners.push(dual_partner(level, f, s, p, q)?);
            }
            let ng_fam = besov_norms(op, sys, &fs, BesovParams::new(-s, pp, qp, false))?;
            let ng_adv = besov_norms(op, sys, &partners, BesovParams::new(-s, pp, qp, false))?;
            let ratio = |f: &GridFunction, g: &GridFunction, a: f64, c: f64| -> Result<f64> {
                if a == 0.0 || c == 0.0 {
                    return Ok(0.0);
                }
                Ok(f.pairing(g)?.norm() / (a * c))
            };
            let k = fs.len();
            let mut c = 0.0f64;
            for i in 0..k {
                c = c.max(ratio(&fs[i], &fs[i], nf[i], ng_fam[i])?);
                c = c.max(ratio(&fs[i], &fs[(i + 1) % k], nf[i], ng_fam[(i + 1) % k])?);
            }
            let mut adv = 0.0f64;
            for i in 0..k {
                adv = adv.max(ratio(&fs[i], &partners[i], nf[i], ng_adv[i])?);
            }
            c = c.max(adv);
            consts.push(sample(level, c));
            attain.push(sample(level, if c > 0.0 { adv / c } else { 0.0 }));
        }
        let tag = format!("s={s};p={};q={}", fmt_exp(p), fmt_exp(q));
        b.stable(&format!("pairing-constant:{tag}"), &consts);
        b.at_least(&format!("dual-block-attainment:{tag}"), &attain, 0.1);
    }
    Ok(b.finish())
}

/// Embeddings measured as `sup_f ‖f‖_target / ‖f‖_source`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Embedding {
    /// `B^0_{2,2}` against `L²`, both directions.
    BesovL2,
    /// `L^p ↪ B^0_{p,2}`, `1 < p ≤ 2`.
    LpIntoBesov { p: f64 },
    /// `B^0_{p,2} ↪ L^p`, `2 ≤ p < ∞`.
    BesovIntoLp { p: f64 },
    /// `B^{s+ε}_{p,q} ↪ B^s_{p,q0}`.
    EpsilonGain { s: f64, eps: f64, p: f64, q: f64, q0: f64 },
    /// `Ḃ^{s+n(1/r-1/p)}_{r,q} ↪ Ḃ^s_{p,q0}`, `r ≤ p`, `q ≤ q0`.
    SobolevType { s: f64, r: f64, p: f64, q: f64, q0: f64 },
    /// `‖f‖_{B^s_{p,q}} ≤ C p_{V,M}(f)` and `|⟨f,g⟩| ≤ C ‖f‖_{B^s_{p,q}} p_{V,M}(g)`
    /// with `M` large enough for the Bernstein gain.
    TestSpaceChain { s: f64, p: f64, q: f64 },
}

impl Embedding {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::IndexConstraintViolated(m));
        match *self {
            Embedding::BesovL2 => Ok(()),
            Embedding::LpIntoBesov { p } if !(p > 1.0 && p <= 2.0) => bad(format!("L^p into B^0_(p,2) needs 1 < p ≤ 2, got {p}")),
            Embedding::BesovIntoLp { p } if !(p >= 2.0 && p.is_finite()) => bad(format!("B^0_(p,2) into L^p needs 2 ≤ p < ∞, got {p}")),
            Embedding::EpsilonGain { eps, q, q0, .. } if !(eps > 0.0) || q < 1.0 || q0 < 1.0 => {
                bad(format!("epsilon-gain embedding needs ε > 0, got {eps}"))
            }
            Embedding::SobolevType { r, p, q, q0, .. } if !(r >= 1.0 && r <= p && q <= q0) => {
                bad(format!("Sobolev-type embedding needs r ≤ p and q ≤ q0, got r={r}, p={p}, q={q}, q0={q0}"))
            }
            Embedding::TestSpaceChain { p, q, .. } if p < 1.0 || q < 1.0 => bad(format!("invalid exponents p={p}, q={q}")),
            _ => Ok(()),
        }
    }

    fn label(&self) -> String {
        match *self {
            Embedding::BesovL2 => "besov-l2".into(),
            Embedding::LpIntoBesov { p } => format!("lp-into-besov:p={}", fmt_exp(p)),
            Embedding::BesovIntoLp { p } => format!("besov-into-lp:p={}", fmt_exp(p)),
            Embedding::EpsilonGain { s, eps, p, q, q0 } => {
                format!("epsilon-gain:s={s};eps={eps};p={};q={};q0={}", fmt_exp(p), fmt_exp(q), fmt_exp(q0))
            }
            Embedding::SobolevType { s, r, p, q, q0 } => format!(
                "sobolev-type:s={s};r={};p={};q={};q0={}",
                fmt_exp(r),
                fmt_exp(p),
                fmt_exp(q),
                fmt_exp(q0)
            ),
            Embedding::TestSpaceChain { s, p, q } => format!("test-space-chain:s={s};p={};q={}", fmt_exp(p), fmt_exp(q)),
        }
    }
}

fn max_ratio(num: &[f64], den: &[f64]) -> f64 {
    num.iter().zip(den).filter(|(_, &d)| d > 0.0).map(|(a, d)| a / d).fold(0.0, f64::max)
}

/// Measured embedding constants, stable across levels.
pub fn check_embeddings(
    levels: &[Level],
    family: &FunctionFamily,
    embeddings: &[Embedding],
    settings: &Settings,
) -> Result<VerifyReport> {
    require_levels(levels)?;
    for e in embeddings {
        e.validate()?;
    }
    let mut b = Builder::new("embeddings", settings);
    for e in embeddings {
        let mut main = Vec::new();
        let mut second = Vec::new();
        for level in levels {
            let (op, sys) = (&level.op, &level.sys);
            let fs = family.generate(op)?;
            let lp = |p: f64| -> Result<Vec<f64>> { fs.iter().map(|f| f.lp_norm(p)).collect() };
            let bes = |s: f64, p: f64, q: f64, hom: bool| besov_norms(op, sys, &fs, BesovParams::new(s, p, q, hom));
            let n = level.dim() as f64;
            match *e {
                Embedding::BesovL2 => {
                    let (bn, l2n) = (bes(0.0, 2.0, 2.0, false)?, lp(2.0)?);
                    main.push(sample(level, max_ratio(&bn, &l2n)));
                    second.push(sample(level, max_ratio(&l2n, &bn)));
                }
                Embedding::LpIntoBesov { p } => main.push(sample(level, max_ratio(&bes(0.0, p, 2.0, false)?, &lp(p)?))),
                Embedding::BesovIntoLp { p } => main.push(sample(level, max_ratio(&lp(p)?, &bes(0.0, p, 2.0, false)?))),
                Embedding::EpsilonGain { s, eps, p, q, q0 } => {
                    main.push(sample(level, max_ratio(&bes(s, p, q0, false)?, &bes(s + eps, p, q, false)?)))
                }
                Embedding::SobolevType { s, r, p, q, q0 } => {
                    require_positive_spectrum(op)?;
                    let src = bes(s + n * (1.0 / r - 1.0 / p), r, q, true)?;
                    main.push(sample(level, max_ratio(&bes(s, p, q0, true)?, &src)));
                }
                Embedding::TestSpaceChain { s, p, q } => {
                    let m = (s.abs() + n).ceil() as u32 + 1;
                    let bn = bes(s, p, q, false)?;
                    let pv: Vec<f64> = fs.iter().map(|f| Ok(test_seminorms(op, sys, f, m)?.p_vm)).collect::<Result<_>>()?;
                    main.push(sample(level, max_ratio(&bn, &pv)));
                    // Dual side: |⟨f, g⟩| / (‖f‖_{B^{-s}_{p',q'}} p_{V,M}(g)) over neighbouring pairs.
                    let dn = bes(-s, conjugate_exponent(p), conjugate_exponent(q), false)?;
                    let k = fs.len();
                    let mut c = 0.0f64;
                    for i in 0..k {
                        let g = (i + 1) % k;
                        let den = dn[i] * pv[g];
                        if den > 0.0 {
                            c = c.max(fs[i].pairing(&fs[g])?.norm() / den);
                        }
                    }
                    second.push(sample(level, c));
                }
            }
        }
        let label = e.label();
        b.stable(&label, &main);
        if !second.is_empty() {
            let suffix = if matches!(e, Embedding::BesovL2) { "reverse" } else { "dual" };
            b.stable(&format!("{label}:{suffix}"), &second);
        }
    }
    Ok(b.finish())
}

/// Lifting by powers of the operator: `‖A^{s0/2}f‖_{Ḃ^{s-s0}} / ‖f‖_{Ḃ^s}` and its
/// reciprocal, and the same for the shifted `(λ_0²+1+A)^{s0/2}` with
/// inhomogeneous norms. The homogeneous part needs a positive spectrum.
pub fn check_lifting(
    levels: &[Level],
    family: &FunctionFamily,
    s: f64,
    s0: f64,
    p: f64,
    q: f64,
    settings: &Settings,
) -> Result<VerifyReport> {
    require_levels(levels)?;
    let mut b = Builder::new("lifting", settings);
    let (mut up, mut down, mut sup, mut sdown) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for level in levels {
        let (op, sys) = (&level.op, &level.sys);
        require_positive_spectrum(op)?;
        let fs = family.generate(op)?;
        let lifted: Vec<GridFunction> = fs.iter().map(|f| power(op, s0 / 2.0, f, false)).collect::<Result<_>>()?;
        let src = besov_norms(op, sys, &fs, BesovParams::new(s, p, q, true))?;
        let dst = besov_norms(op, sys, &lifted, BesovParams::new(s - s0, p, q, true))?;
        up.push(sample(level, max_ratio(&dst, &src)));
        down.push(sample(level, max_ratio(&src, &dst)));
        let c = op.lambda0()?.powi(2) + 1.0;
        let shifted = apply_batch(op, &fs, |l| (c + l).powf(s0 / 2.0))?;
        let src_i = besov_norms(op, sys, &fs, BesovParams::new(s, p, q, false))?;
        let dst_i = besov_norms(op, sys, &shifted, BesovParams::new(s - s0, p, q, false))?;
        sup.push(sample(level, max_ratio(&dst_i, &src_i)));
        sdown.push(sample(level, max_ratio(&src_i, &dst_i)));
    }
    let tag = format!("s={s};s0={s0};p={};q={}", fmt_exp(p), fmt_exp(q));
    b.stable(&format!("lift-up:{tag}"), &up);
    b.stable(&format!("lift-down:{tag}"), &down);
    b.stable(&format!("shifted-lift-up:{tag}"), &sup);
    b.stable(&format!("shifted-lift-down:{tag}"), &sdown);
    Ok(b.finish())
}

/// `−min(2, n(1−1/p)) < s < min(n/p, 2)`.
pub fn in_equivalence_window(n: usize, s: f64, p: f64) -> bool {
    let n = n as f64;
    let lo = -(2.0f64).min(n * (1.0 - 1.0 / p));
    let hi = (n / p).min(2.0);
    lo < s && s < hi
}

/// `D[j][k] = ‖φ_j(√A_V) Φ_k(√A_0)‖_{p→p}` for `j, k` in `range`. For `p = 2`
/// this is the largest singular value of the block of `U_Vᵀ U_0` selected and
/// weighted by the two symbols.
pub fn cross_block_matrix(v: &Level, zero: &Level, range: std::ops::RangeInclusive<i32>, p: f64) -> Result<Vec<Vec<f64>>> {
    let ev = v.op.eigen_or_err()?;
    let e0 = zero.op.eigen_or_err()?;
    let n = v.n();
    let w = v.op.grid().cell_volume();
    let overlap: Mat<f64> = ev.vectors.transpose() * &e0.vectors;
    let js: Vec<i32> = range.collect();
    let mut out = vec![vec![0.0; js.len()]; js.len()];
    for (a, &j) in js.iter().enumerate() {
        let rows: Vec<(usize, f64)> = (0..n)
            .map(|i| (i, v.sys.block_symbol(j, ev.values[i])))
            .filter(|x| x.1 != 0.0)
            .collect();
        for (c, &k) in js.iter().enumerate() {
            let cols: Vec<(usize, f64)> = (0..n)
                .map(|i| (i, zero.sys.fat_block_symbol(k, e0.values[i])))
                .filter(|x| x.1 != 0.0)
                .collect();
            if rows.is_empty() || cols.is_empty() {
                continue;
            }
            let sub = Mat::from_fn(rows.len(), cols.len(), |r, c| rows[r].1 * overlap[(rows[r].0, cols[c].0)] * cols[c].1);
            out[a][c] = if p == 2.0 {
                let gram = if rows.len() <= cols.len() { &sub * sub.transpose() } else { sub.transpose() * &sub };
                let top = gram
                    .self_adjoint_eigenvalues(faer::Side::Lower)
                    .map_err(|e| Error::SolverFailure(format!("{e:?}")))?
                    .last()
                    .copied()
                    .unwrap_or(0.0);
                top.max(0.0).sqrt()
            } else {
                let left = Mat::from_fn(n, rows.len(), |i, r| ev.vectors[(i, rows[r].0)]);
                let right = Mat::from_fn(cols.len(), n, |c, i| e0.vectors[(i, cols[c].0)]);
                let m = &left * (&sub * &right);
                matrix_opnorm(&m, w, p, 0).value
            };
        }
    }
    Ok(out)
}

/// Decay exponent of the cross-block norms on the log₂ scale. For each gap
/// `d = j − k` (or `k − j` when `upper`) at least `min_gap`, takes the largest
/// entry with that gap and fits `log₂ D` against `d`. Entries below
/// `floor · max D` are rounding noise and are skipped.
pub fn cross_block_slope(d: &[Vec<f64>], min_gap: usize, upper: bool, floor: f64) -> f64 {
    let m = d.len();
    let top = d.iter().flatten().copied().fold(0.0, f64::max);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for gap in min_gap..m {
        let mut best = 0.0f64;
        for k in 0..m - gap {
            let v = if upper { d[k][k + gap] } else { d[k + gap][k] };
            best = best.max(v);
        }
        if best > floor * top {
            xs.push(gap as f64);
            ys.push(best.log2());
        }
    }
    fit_slope(&xs, &ys)
}

/// Largest `j` whose block center `2^j` lies below `√λ_max`. Blocks above it
/// are cut off by the top of the spectrum and carry no dyadic scaling.
fn centered_top(op: &SpectralOperator) -> Result<i32> {
    let top = op.lambda_max()?.max(f64::MIN_POSITIVE).sqrt().log2();
    Ok(top.ceil() as i32 - 1)
}

/// Parameters of the `A_V` / `A_0` comparison.
#[derive(Clone, Copy, Debug)]
pub struct EquivalenceParams {
    pub besov: BesovParams,
    /// Exponent of the cross-block operator norms.
    pub cross_p: f64,
    /// Smallest gap `j − k` used in the slope fit. The supports of `φ_j` and
    /// `Φ_k` are disjoint once the gap reaches 3.
    pub min_gap: usize,
}

/// Norm equivalence between `A_V` and `A_0`: the spread `R_max/R_min` of the
/// ratios `‖f‖_{B(A_V)}/‖f‖_{B(A_0)}` over the family, and the decay of the
/// cross-block norms against the reference slope −2.
///
/// Levels come in pairs `(A_V, A_0)` on the same grid.
pub fn check_equivalence(
    pairs: &[(Level, Level)],
    family: &FunctionFamily,
    params: EquivalenceParams,
    settings: &Settings,
) -> Result<VerifyReport> {
    if pairs.is_empty() {
        return Err(Error::InvalidParameter("a check needs at least one level".into()));
    }
    let BesovParams { s, p, q, homogeneous } = params.besov;
    let n = pairs[0].0.dim();
    if n < 2 {
        return Err(Error::UnsupportedDimension(n));
    }
    let inside = in_equivalence_window(n, s, p);
    if !inside && settings.enforce {
        return Err(Error::IndexConstraintViolated(format!(
            "s = {s} outside (-min(2, n(1-1/p)), min(n/p, 2)) for n = {n}, p = {p}"
        )));
    }
    for (v, zero) in pairs {
        if !v.op.grid().same_as(zero.op.grid()) {
            return Err(Error::GridMismatch);
        }
        let report: KatoReport = match v.op.potential() {
            Some(pot) => pot.kato_report(),
            None => Potential::zero(v.op.grid().clone()).kato_report(),
        };
        if !report.satisfies_ass1 {
            return Err(Error::AssumptionViolated(format!(
                "negative part of V is not small enough (Kato norm {:.4e})",
                report.norm
            )));
        }
    }
    let mut b = Builder::new("equivalence", settings);
    let (mut rmax, mut rmin, mut spread, mut lower, mut upper) = (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (v, zero) in pairs {
        let fs = family.generate(&v.op)?;
        let bp = BesovParams::new(s, p, q, homogeneous);
        let nv = besov_norms(&v.op, &v.sys, &fs, bp)?;
        let n0 = besov_norms(&zero.op, &zero.sys, &fs, bp)?;
        let ratios: Vec<f64> = nv.iter().zip(&n0).filter(|(_, &d)| d > 0.0).map(|(a, d)| a / d).collect();
        let hi = ratios.iter().copied().fold(0.0, f64::max);
        let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        rmax.push(sample(v, hi));
        rmin.push(sample(v, lo));
        spread.push(sample(v, hi / lo));
        let top = centered_top(&v.op)?.min(centered_top(&zero.op)?);
        let range = v.sys.j_min.min(zero.sys.j_min)..=top;
        let d = cross_block_matrix(v, zero, range, params.cross_p)?;
        lower.push(sample(v, cross_block_slope(&d, params.min_gap, false, 1e-13)));
        upper.push(sample(v, cross_block_slope(&d, params.min_gap, true, 1e-13)));
    }
    let tag = format!("s={s};p={};q={}", fmt_exp(p), fmt_exp(q));
    b.info(&format!("norm-ratio-max:{tag}"), &rmax);
    b.info(&format!("norm-ratio-min:{tag}"), &rmin);
    if inside {
        b.stable(&format!("norm-ratio-spread:{tag}"), &spread);
    } else {
        b.info(&format!("norm-ratio-spread:{tag}"), &spread);
        b.note("s outside the equivalence window: ratios reported without a verdict");
    }
    let cp = fmt_exp(params.cross_p);
    b.within(&format!("cross-block-slope-lower:p={cp}"), &lower, -2.0, SLOPE_BAND);
    b.info(&format!("cross-block-slope-upper:p={cp}"), &upper);
    Ok(b.finish())
}

/// Besov norms under the built-in system and its alternative profile: the
/// constant `max(r, 1/r)` over ratios `r`, the product identity
/// `φ¹_j = φ¹_j Φ²_j` on a λ-grid and the ratio for an eigenvector placed at a
/// dyadic center.
pub fn check_partition_independence(
    levels: &[Level],
    family: &FunctionFamily,
    params: BesovParams,
    settings: &Settings,
) -> Result<VerifyReport> {
    require_levels(levels)?;
    params.validate()?;
    let mut b = Builder::new("partition-independence", settings);
    let (mut consts, mut ident, mut centers) = (Vec::new(), Vec::new(), Vec::new());
    for level in levels {
        let (op, sys) = (&level.op, &level.sys);
        let alt = sys.second_system(settings.seed);
        let fs = family.generate(op)?;
        let n1 = besov_norms(op, sys, &fs, params)?;
        let n2 = besov_norms(op, &alt, &fs, params)?;
        consts.push(sample(level, max_ratio(&n1, &n2).max(max_ratio(&n2, &n1))));

        let (lo, hi) = (2f64.powi(sys.j_min - 2), 2f64.powi(sys.j_max + 2));
        let mut worst = 0.0f64;
        for i in 0..=4000 {
            let x = lo * (hi / lo).powf(i as f64 / 4000.0);
            for j in sys.window() {
                let a = sys.phi(j, x);
                worst = worst.max((a - a * alt.fat_phi(j, x)).abs());
            }
        }
        ident.push(sample(level, worst));

        // Shift the ground state to 4^c so that √λ = 2^c is a dyadic center.
        let c = 2;
        let shifted = op.shifted(4f64.powi(c) - op.lambda_min()?)?;
        let s1 = DyadicSystem::for_operator_profile(&shifted, sys.profile())?;
        let s2 = s1.second_system(settings.seed);
        let u = shifted.eigenfunction(0)?;
        let a = besov_norms(&shifted, &s1, std::slice::from_ref(&u), params)?[0];
        let bb = besov_norms(&shifted, &s2, std::slice::from_ref(&u), params)?[0];
        centers.push(sample(level, (a / bb - 1.0).abs()));
    }
    let tag = format!("s={};p={};q={}", params.s, fmt_exp(params.p), fmt_exp(params.q));
    b.stable(&format!("partition-ratio-bound:{tag}"), &consts);
    b.at_most("partition-product-identity", &ident, 1e-12);
    b.at_most("dyadic-center-ratio-deviation", &centers, 1e-12);
    Ok(b.finish())
}

/// Low-frequency tail `Σ_{j≤0} 2^{(n/p)j} ‖φ_j(√A)f‖_p` against `‖f‖_{Ḃ^s_{p,q}}`.
/// Requires `s < n/p` or `(s, q) = (n/p, 1)` and a positive spectrum.
pub fn check_subspace_characterization(
    levels: &[Level],
    family: &FunctionFamily,
    s: f64,
    p: f64,
    q: f64,
    settings: &Settings,
) -> Result<VerifyReport> {
    require_levels(levels)?;
    let n = levels[0].dim() as f64;
    let crit = n / p;
    if !(s < crit || (s == crit && q == 1.0)) {
        return Err(Error::IndexConstraintViolated(format!("need s < n/p or (s, q) = (n/p, 1), got s={s}, q={q}")));
    }
    let mut b = Builder::new("subspace-characterization", settings);
    let (mut ratios, mut tails) = (Vec::new(), Vec::new());
    for level in levels {
        let (op, sys) = (&level.op, &level.sys);
        require_positive_spectrum(op)?;
        let fs = family.generate(op)?;
        let profiles = block_profiles(op, sys, &fs, p)?;
        let mut worst = 0.0f64;
        let mut biggest = 0.0f64;
        for prof in &profiles {
            let tail: f64 = prof.blocks.iter().filter(|x| x.0 <= 0).map(|&(j, v)| (crit * j as f64).exp2() * v).sum();
            let norm = prof.besov(s, q, true);
            biggest = biggest.max(tail);
            if norm > 0.0 {
                worst = worst.max(tail / norm);
            }
        }
        ratios.push(sample(level, worst));
        tails.push(sample(level, biggest));
    }
    let tag = format!("s={s};p={};q={}", fmt_exp(p), fmt_exp(q));
    b.stable(&format!("low-frequency-tail-ratio:{tag}"), &ratios);
    b.info("low-frequency-tail-max", &tails);
    Ok(b.finish())
}

/// `max_{j,f} (‖φ_j(√A_V)f‖_{L^{p,q}} + ‖φ_j(√A_0)f‖_{L^{p,q}}) / (2^{n(1/p0-1/p)j} ‖f‖_{p0})`.
pub fn check_lorentz_bernstein(
    pairs: &[(Level, Level)],
    family: &FunctionFamily,
    p0: f64,
    p: f64,
    q: f64,
    settings: &Settings,
) -> Result<VerifyReport> {
    if pairs.is_empty() {
        return Err(Error::InvalidParameter("a check needs at least one level".into()));
    }
    if !(p0 >= 1.0 && p0 < p && p.is_finite()) {
        return Err(Error::IndexConstraintViolated(format!("Lorentz Bernstein needs 1 ≤ p0 < p < ∞, got p0={p0}, p={p}")));
    }
    let mut b = Builder::new("lorentz-bernstein", settings);
    let mut consts = Vec::new();
    for (v, zero) in pairs {
        let n = v.dim() as f64;
        let fs = family.generate(&v.op)?;
        let ev = Expansion::new(&v.op, &fs)?;
        let e0 = Expansion::new(&zero.op, &fs)?;
        let range = v.sys.j_min.min(zero.sys.j_min)..=v.sys.j_max.max(zero.sys.j_max);
        let mut c = 0.0f64;
        for j in range {
            let bv = ev.synthesize(|l| v.sys.block_symbol(j, l));
            let b0 = e0.synthesize(|l| zero.sys.block_symbol(j, l));
            let scale = (n * (1.0 / p0 - 1.0 / p) * j as f64).exp2();
            for ((f, gv), g0) in fs.iter().zip(&bv).zip(&b0) {
                let nf = f.lp_norm(p0)?;
                if nf > 0.0 {
                    c = c.max((lorentz_norm(gv, p, q)? + lorentz_norm(g0, p, q)?) / (scale * nf));
                }
            }
        }
        consts.push(sample(v, c));
    }
    b.stable(&format!("lorentz-block-gain:p0={};p={};q={}", fmt_exp(p0), fmt_exp(p), fmt_exp(q)), &consts);
    Ok(b.finish())
}

/// For every operator, a positive Hardy certificate must come with `λ_min > 0`.
pub fn check_zero_eigenvalue(levels: &[Level], settings: &Settings) -> Result<VerifyReport> {
    require_levels(levels)?;
    let mut b = Builder::new("zero-eigenvalue", settings);
    let mut all_hold = true;
    let (mut lmins, mut certs) = (Vec::new(), Vec::new());
    for level in levels {
        let op = &level.op;
        let report = match op.potential() {
            Some(v) => v.kato_report(),
            None => Potential::zero(op.grid().clone()).kato_report(),
        };
        let diag = op.zero_eigenvalue_check(&report)?;
        all_hold &= diag.holds;
        lmins.push(sample(level, diag.lambda_min));
        certs.push(sample(level, diag.certificate.unwrap_or(f64::NAN)));
    }
    b.record("lambda-min-when-certified", &lmins, Some(all_hold));
    b.info("hardy-certificate", &certs);
    Ok(b.finish())
}

/// The symbols exercised by the Chebyshev agreement check.
pub fn suite_symbols(sys: &DyadicSystem) -> Vec<Symbol> {
    let mut out = vec![Symbol::psi(sys)];
    for j in sys.window() {
        out.push(Symbol::block(sys, j));
    }
    let mid = (sys.j_min + sys.j_max) / 2;
    out.push(Symbol::fat_block(sys, mid));
    out.push(Symbol::power_block(sys, mid, 1.0));
    for t in [1e-3, 1e-2, 1e-1] {
        out.push(Symbol::heat(t));
    }
    out
}

/// Matrix-free Chebyshev applies against dense applies for every suite symbol.
///
/// The fit tolerance is relative to `max(1, sup |g|)` over the spectrum, so
/// symbols with large values are not held to an absolute roundoff floor. The
/// apply error is measured relative to `‖g(A)‖ ‖f‖`: a block that misses `f`
/// has `g(A) f` at roundoff level, where a ratio against it means nothing.
pub fn check_chebyshev(
    levels: &[Level],
    family: &FunctionFamily,
    fit_tolerance: f64,
    max_degree: usize,
    settings: &Settings,
) -> Result<VerifyReport> {
    require_levels(levels)?;
    let mut b = Builder::new("chebyshev", settings);
    let (mut errs, mut degs) = (Vec::new(), Vec::new());
    for level in levels {
        let (op, sys) = (&level.op, &level.sys);
        let fs = family.generate(op)?;
        let (lo, hi) = op.spectrum_bounds();
        let mut worst = 0.0f64;
        let mut deg = 0usize;
        let eigs = &op.eigen_or_err()?.values;
        for sym in suite_symbols(sys) {
            let gnorm = eigs.iter().map(|&l| sym.eval(l).abs()).fold(0.0, f64::max);
            let series = ChebyshevSeries::adaptive(&sym, lo, hi, fit_tolerance * gnorm.max(1.0), max_degree)?;
            deg = deg.max(series.degree());
            let dense = OperatorFunction::dense(op, sym.clone()).apply_many(&fs)?;
            for (f, d) in fs.iter().zip(&dense) {
                let c = series.apply_function(op.matrix(), f)?;
                let scale = gnorm * l2(f.values());
                let err = l2_distance(c.values(), d.values());
                let rel = if scale > 0.0 { err / scale } else { err };
                worst = worst.max(rel);
            }
        }
        errs.push(sample(level, worst));
        degs.push(sample(level, deg as f64));
    }
    b.at_most("chebyshev-dense-agreement", &errs, CHEBYSHEV_AGREEMENT);
    b.info("chebyshev-max-degree", &degs);
    Ok(b.finish())
}

/// Relative `L²` error of the degree-`d` Chebyshev apply against the dense
/// apply, for each requested degree.
pub fn chebyshev_error_curve(op: &SpectralOperator, symbol: &Symbol, f: &GridFunction, degrees: &[usize]) -> Result<Vec<f64>> {
    let dense = OperatorFunction::dense(op, symbol.clone()).apply(f)?;
    let nd = l2(dense.values()).max(f64::MIN_POSITIVE);
    let (lo, hi) = op.spectrum_bounds();
    degrees
        .iter()
        .map(|&d| {
            let s = ChebyshevSeries::fixed(symbol, lo, hi, d)?;
            let c = s.apply_function(op.matrix(), f)?;
            Ok(l2_distance(c.values(), dense.values()) / nd)
        })
        .collect()
}

/// Dirichlet Laplacian on a box against the tensor-sum closed form, and the
/// observed convergence order of `λ_min` to `π² Σ 1/L_i²`.
pub fn check_spectrum(levels: &[Level], settings: &Settings) -> Result<VerifyReport> {
    require_levels(levels)?;
    let mut b = Builder::new("spectrum", settings);
    let (mut rel, mut lmins, mut errs) = (Vec::new(), Vec::new(), Vec::new());
    let mut exact_min = 0.0;
    for level in levels {
        let op = &level.op;
        let g = op.grid();
        if op.potential().is_some_and(|v| v.values().iter().any(|&x| x != 0.0)) {
            return Err(Error::AssumptionViolated("spectrum oracle needs V = 0".into()));
        }
        let dim = g.dim();
        let counts: Vec<usize> = (0..dim)
            .map(|a| {
                let mut ks: Vec<i64> = g.cells().iter().map(|c| c[a]).collect();
                ks.sort_unstable();
                ks.dedup();
                ks.len()
            })
            .collect();
        if counts.iter().product::<usize>() != g.len() {
            return Err(Error::AssumptionViolated("spectrum oracle needs a box domain".into()));
        }
        let axes: Vec<Vec<f64>> = counts.iter().map(|&m| interval_eigenvalues(m, g.h())).collect();
        let mut sums = vec![0.0];
        for ax in &axes {
            sums = sums.iter().flat_map(|s| ax.iter().map(move |l| s + l)).collect();
        }
        sums.sort_by(f64::total_cmp);
        let ev = op.eigenvalues()?;
        let worst = ev.iter().zip(&sums).map(|(a, e)| ((a - e) / e).abs()).fold(0.0, f64::max);
        rel.push(sample(level, worst));
        exact_min = counts.iter().map(|&m| (std::f64::consts::PI / ((m + 1) as f64 * g.h())).powi(2)).sum::<f64>();
        lmins.push(sample(level, ev[0]));
        errs.push((level, (ev[0] - exact_min).abs()));
    }
    b.at_most("closed-form-relative-error", &rel, 1e-10);
    b.info("lambda-min", &lmins);
    if errs.len() >= 2 {
        let orders: Vec<Sample> = errs
            .windows(2)
            .map(|w| sample(w[1].0, (w[0].1 / w[1].1).ln() / (w[0].0.h() / w[1].0.h()).ln()))
            .collect();
        b.at_least("lambda-min-convergence-order", &orders, 1.9);
    }
    b.note(format!("continuum λ_min = {exact_min}"));
    Ok(b.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{DomainSpec, Grid};
    use crate::operator::assemble_laplacian;

    fn interval_level(h: f64) -> Level {
        let g = Grid::build(&DomainSpec::interval(0.0, 1.0), h).unwrap();
        Level::new(assemble_laplacian(&g).eigendecompose().unwrap()).unwrap()
    }

    #[test]
    fn stability_rule() {
        assert!(is_stable(&[1.0, 1.9, 3.7], 2.0));
        assert!(!is_stable(&[1.0, 2.1], 2.0));
        assert!(!is_stable(&[1.0, f64::NAN], 2.0));
        assert!(is_stable(&[0.0, 0.0], 2.0));
        assert!(!is_stable(&[0.0, 1.0], 2.0));
        assert!(is_stable(&[5.0], 2.0));
    }

    #[test]
    fn families_are_reproducible_and_nonzero() {
        let level = interval_level(1.0 / 32.0);
        for tag in [
            FamilyTag::RandomEigenmix,
            FamilyTag::Bump,
            FamilyTag::SingleEigenvector,
            FamilyTag::Indicator,
            FamilyTag::BoundaryLayer,
        ] {
            let fam = FunctionFamily::new(tag, 7, 5);
            let a = fam.generate(&level.op).unwrap();
            let b = fam.generate(&level.op).unwrap();
            assert_eq!(a.len(), 5);
            for (x, y) in a.iter().zip(&b) {
                assert_eq!(x.values(), y.values());
                assert!(x.lp_norm(2.0).unwrap() > 0.0, "{tag:?}");
            }
            let c = FunctionFamily::new(tag, 8, 5).generate(&level.op).unwrap();
            if tag != FamilyTag::SingleEigenvector {
                assert_ne!(a[0].values(), c[0].values());
            }
        }
        assert!(FunctionFamily::new(FamilyTag::Bump, 0, 0).generate(&level.op).is_err());
    }

    #[test]
    fn resolution_identity_on_eigenvectors() {
        let level = interval_level(1.0 / 64.0);
        let fam = FunctionFamily::new(FamilyTag::SingleEigenvector, 0, 63);
        let fs = fam.generate(&level.op).unwrap();
        let (ri, rh) = resolution_residuals(&level, &fs, true).unwrap();
        assert!(ri <= 1e-13 && rh.unwrap() <= 1e-13, "{ri} {rh:?}");
        let r = check_resolution_identity(std::slice::from_ref(&level), &fam, None, RESOLUTION_TOLERANCE, &Settings::default()).unwrap();
        assert!(r.pass);
        assert_eq!(r.anchors().len(), 2);
        // A zero eigenvalue makes the required homogeneous variant fail loudly.
        let zero = level.op.shifted(-level.op.lambda_min().unwrap()).unwrap();
        let zl = Level::new(zero).unwrap();
        let err = check_resolution_identity(&[zl], &fam, Some(true), RESOLUTION_TOLERANCE, &Settings::default());
        assert!(matches!(err, Err(Error::ZeroEigenvaluePresent { .. })));
    }

    #[test]
    fn dual_partner_attains_the_norm() {
        let level = interval_level(1.0 / 32.0);
        let f = FunctionFamily::new(FamilyTag::Bump, 3, 1).generate(&level.op).unwrap().remove(0);
        for (s, p, q) in [(0.0, 2.0, 2.0), (1.0, 2.0, 2.0), (0.5, 1.5, 2.0), (0.3, 3.0, 1.5)] {
            let g = dual_partner(&level, &f, s, p, q).unwrap();
            let nf = besov_norms(&level.op, &level.sys, std::slice::from_ref(&f), BesovParams::new(s, p, q, false)).unwrap()[0];
            let pair = f.pairing(&g).unwrap();
            assert!((pair.re - nf).abs() <= 1e-10 * nf, "{s},{p},{q}: {} vs {nf}", pair.re);
        }
    }

    #[test]
    fn single_eigenvector_duality_ratio() {
        // f = g = u_k with √λ_k at a dyadic center: only φ_j is active, so the
        // ratio is ‖u‖_2² / (2^{sj}‖u‖_2 · 2^{-sj}‖u‖_2) = 1.
        let level = interval_level(1.0 / 32.0);
        let shifted = level.op.shifted(64.0 - level.op.lambda_min().unwrap()).unwrap();
        let lvl = Level::new(shifted).unwrap();
        let u = lvl.op.eigenfunction(0).unwrap();
        let a = besov_norms(&lvl.op, &lvl.sys, std::slice::from_ref(&u), BesovParams::new(1.0, 2.0, 2.0, false)).unwrap()[0];
        let b = besov_norms(&lvl.op, &lvl.sys, std::slice::from_ref(&u), BesovParams::new(-1.0, 2.0, 2.0, false)).unwrap()[0];
        assert!((u.pairing(&u).unwrap().re / (a * b) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lifting_of_a_single_eigenvector() {
        let level = interval_level(1.0 / 32.0);
        let fam = FunctionFamily::new(FamilyTag::SingleEigenvector, 0, 31);
        for s0 in [0.0, 1.0, 2.0] {
            let r = check_lifting(std::slice::from_ref(&level), &fam, 1.0, s0, 2.0, 2.0, &Settings::default()).unwrap();
            let up = r.constants(&format!("lift-up:s=1;s0={s0};p=2;q=2"))[0];
            let down = r.constants(&format!("lift-down:s=1;s0={s0};p=2;q=2"))[0];
            if s0 == 0.0 {
                assert!((up - 1.0).abs() < 1e-12 && (down - 1.0).abs() < 1e-12);
            }
            let bound = 2f64.powf(s0) * (1.0 + 1e-12);
            assert!(up <= bound && down <= bound, "{s0}: {up} {down}");
        }
    }

    #[test]
    fn subspace_tail_of_ground_state() {
        // On (0, 8) the ground state has √λ ≈ π/8 < 1, so it has low blocks.
        let g = Grid::build(&DomainSpec::interval(0.0, 8.0), 0.25).unwrap();
        let level = Level::new(assemble_laplacian(&g).eigendecompose().unwrap()).unwrap();
        let fam = FunctionFamily::new(FamilyTag::SingleEigenvector, 0, 1);
        let r = check_subspace_characterization(std::slice::from_ref(&level), &fam, 0.25, 2.0, 2.0, &Settings::default()).unwrap();
        let tail = r.constants("low-frequency-tail-max")[0];
        let l1 = level.op.eigenvalues().unwrap()[0];
        let u = level.op.eigenfunction(0).unwrap();
        let expect: f64 = (level.sys.j_min..=0)
            .map(|j| 2f64.powf(0.5 * j as f64) * level.sys.block_symbol(j, l1).abs() * u.lp_norm(2.0).unwrap())
            .sum();
        assert!((tail - expect).abs() <= 1e-12 * expect, "{tail} {expect}");
        assert!(matches!(
            check_subspace_characterization(&[level], &fam, 0.6, 2.0, 2.0, &Settings::default()),
            Err(Error::IndexConstraintViolated(_))
        ));
    }

    #[test]
    fn lorentz_bernstein_guard_and_finite_constant() {
        let level = interval_level(1.0 / 32.0);
        let zero = level.clone();
        let fam = FunctionFamily::new(FamilyTag::Bump, 1, 4);
        let pairs = [(level, zero)];
        assert!(matches!(
            check_lorentz_bernstein(&pairs, &fam, 2.0, 2.0, 2.0, &Settings::default()),
            Err(Error::IndexConstraintViolated(_))
        ));
        let r = check_lorentz_bernstein(&pairs, &fam, 1.0, 2.0, 2.0, &Settings::default()).unwrap();
        let c = r.constants("lorentz-block-gain:p0=1;p=2;q=2")[0];
        assert!(c.is_finite() && c > 0.0);
    }

    #[test]
    fn bernstein_reduces_to_block_bounds_for_equal_exponents() {
        let level = interval_level(1.0 / 32.0);
        let fam = FunctionFamily::new(FamilyTag::Bump, 1, 4);
        let r = check_bernstein(std::slice::from_ref(&level), &fam, &[(1.0, 1.0)], &[0.0], &Settings::default()).unwrap();
        let bb = check_block_bounds(&[level], &[1.0], &Settings::default()).unwrap();
        let a = r.constants("block-gain-operator:r=1;p=1;alpha=0")[0];
        let c = bb.constants("block-uniform:p=1")[0];
        assert!((a - c).abs() <= 1e-12 * c);
    }

    #[test]
    fn equivalence_window_and_guards() {
        assert!(in_equivalence_window(2, 0.5, 2.0));
        assert!(!in_equivalence_window(2, 1.0, 2.0));
        assert!(!in_equivalence_window(3, -2.0, 4.0));
        let level = interval_level(1.0 / 16.0);
        let fam = FunctionFamily::new(FamilyTag::Bump, 1, 2);
        let params = EquivalenceParams { besov: BesovParams::new(0.5, 2.0, 2.0, false), cross_p: 2.0, min_gap: 3 };
        assert!(matches!(
            check_equivalence(&[(level.clone(), level)], &fam, params, &Settings::default()),
            Err(Error::UnsupportedDimension(1))
        ));
    }

    #[test]
    fn slope_fit_recovers_a_power_law() {
        let m = 6;
        let d: Vec<Vec<f64>> = (0..m)
            .map(|j| (0..m).map(|k| if j >= k { (-2.0 * (j - k) as f64).exp2() } else { (-(k - j) as f64).exp2() }).collect())
            .collect();
        assert!((cross_block_slope(&d, 2, false, 1e-13) + 2.0).abs() < 1e-12);
        assert!((cross_block_slope(&d, 2, true, 1e-13) + 1.0).abs() < 1e-12);
        assert!(fit_slope(&[1.0], &[2.0]).is_nan());
    }

    #[test]
    fn csv_rows_have_frozen_columns() {
        let level = interval_level(1.0 / 16.0);
        let fam = FunctionFamily::new(FamilyTag::Bump, 1, 2);
        let r = check_resolution_identity(&[level], &fam, Some(false), RESOLUTION_TOLERANCE, &Settings::default()).unwrap();
        let rows = r.csv_rows();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].split(',').count(), VERIFY_CSV_HEADER.split(',').count());
        assert!(rows[0].starts_with("resolution-identity,inhomogeneous-resolution-residual,"));
    }
}
