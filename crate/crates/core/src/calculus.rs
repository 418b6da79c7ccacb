//! Spectral functional calculus `g(A)`.
//!
//! The dense path uses the eigendecomposition, `g(A) f = Σ_k g(λ_k)(u_k, f) u_k`.
//! The matrix-free path expands `g` in Chebyshev polynomials on an interval
//! enclosing the spectrum and applies the three-term recurrence with sparse
//! matrix-vector products.

use std::fmt;
use std::io::Write;
use std::path::Path as FsPath;
use std::sync::Arc;

use faer::Mat;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rustfft::FftPlanner;

use crate::dyadic::DyadicSystem;
use crate::error::{Error, Result};
use crate::geometry::{check_exponent, lp_norm_values, Grid, GridFunction};
use crate::operator::{SparseSym, SpectralOperator};

/// A real function of the eigenvalue.
#[derive(Clone)]
pub struct Symbol {
    name: String,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Symbol({})", self.name)
    }
}

impl Symbol {
    pub fn new(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Symbol { name: name.into(), f: Arc::new(f) }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, lambda: f64) -> f64 {
        (self.f)(lambda)
    }

    pub fn identity() -> Self {
        Symbol::new("one", |_| 1.0)
    }

    /// `φ_j(√λ)`, zero for `λ ≤ 0`.
    pub fn block(sys: &DyadicSystem, j: i32) -> Self {
        let s = sys.clone();
        Symbol::new(format!("phi_{j}"), move |l| s.block_symbol(j, l))
    }

    /// `Φ_j(√λ)`.
    pub fn fat_block(sys: &DyadicSystem, j: i32) -> Self {
        let s = sys.clone();
        Symbol::new(format!("fat_phi_{j}"), move |l| s.fat_block_symbol(j, l))
    }

    /// `ψ(λ)`.
    pub fn psi(sys: &DyadicSystem) -> Self {
        let s = sys.clone();
        Symbol::new("psi", move |l| s.psi(l))
    }

    /// `e^{-tλ}`.
    pub fn heat(t: f64) -> Self {
        Symbol::new(format!("heat_{t}"), move |l| (-t * l).exp())
    }

    /// `λ^α` on `λ > 0`, zero elsewhere.
    pub fn power(alpha: f64) -> Self {
        Symbol::new(format!("power_{alpha}"), move |l| if l > 0.0 { l.powf(alpha) } else { 0.0 })
    }

    /// `λ^α φ_j(√λ)`.
    pub fn power_block(sys: &DyadicSystem, j: i32, alpha: f64) -> Self {
        let s = sys.clone();
        Symbol::new(format!("power_{alpha}_phi_{j}"), move |l| {
            let b = s.block_symbol(j, l);
            if b == 0.0 {
                0.0
            } else {
                l.powf(alpha) * b
            }
        })
    }

    /// `g(θλ)`.
    pub fn dilated(&self, theta: f64) -> Self {
        let f = self.f.clone();
        Symbol::new(format!("{}(θ={theta})", self.name), move |l| f(theta * l))
    }

    pub fn product(&self, other: &Symbol) -> Self {
        let (f, g) = (self.f.clone(), other.f.clone());
        Symbol::new(format!("{}*{}", self.name, other.name), move |l| f(l) * g(l))
    }
}

/// Evaluation path of an operator function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Path {
    Dense,
    Chebyshev { tolerance: f64, max_degree: usize },
}

/// Default ceiling on the adaptive Chebyshev degree.
pub const DEFAULT_MAX_DEGREE: usize = 1 << 15;

/// `g(A)` bound to an operator.
#[derive(Clone, Debug)]
pub struct OperatorFunction {
    pub op: SpectralOperator,
    pub symbol: Symbol,
    pub path: Path,
}

/// An induced operator norm; `exact` is false for probe-based lower bounds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OpNorm {
    pub value: f64,
    pub exact: bool,
}

impl OperatorFunction {
    pub fn dense(op: &SpectralOperator, symbol: Symbol) -> Self {
        OperatorFunction { op: op.clone(), symbol, path: Path::Dense }
    }

    pub fn chebyshev(op: &SpectralOperator, symbol: Symbol, tolerance: f64, max_degree: usize) -> Self {
        OperatorFunction { op: op.clone(), symbol, path: Path::Chebyshev { tolerance, max_degree } }
    }

    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        Ok(self.apply_many(std::slice::from_ref(f))?.pop().expect("one output"))
    }

    pub fn apply_many(&self, fs: &[GridFunction]) -> Result<Vec<GridFunction>> {
        for f in fs {
            self.op.check_grid(f)?;
        }
        match self.path {
            Path::Dense => {
                let exp = Expansion::new(&self.op, fs)?;
                Ok(exp.synthesize(|l| self.symbol.eval(l)))
            }
            Path::Chebyshev { tolerance, max_degree } => {
                let (lo, hi) = self.op.spectrum_bounds();
                let series = ChebyshevSeries::adaptive(&self.symbol, lo, hi, tolerance, max_degree)?;
                fs.iter().map(|f| series.apply_function(self.op.matrix(), f)).collect()
            }
        }
    }

    /// The matrix of `g(A)` acting on nodal values.
    pub fn matrix(&self) -> Result<Mat<f64>> {
        function_matrix(&self.op, |l| self.symbol.eval(l))
    }

    pub fn kernel(&self) -> Result<KernelMatrix> {
        Ok(KernelMatrix::from_matrix(self.symbol.name(), self.op.grid(), self.matrix()?))
    }

    /// `‖g(A)‖_{L^p → L^p}`: exact for `p ∈ {1, 2, ∞}`, a probe lower bound otherwise.
    pub fn opnorm(&self, p: f64) -> Result<OpNorm> {
        check_exponent(p)?;
        if p == 2.0 {
            let ev = self.op.eigenvalues()?;
            let v = ev.iter().map(|&l| self.symbol.eval(l).abs()).fold(0.0, f64::max);
            return Ok(OpNorm { value: v, exact: true });
        }
        let m = self.matrix()?;
        Ok(matrix_opnorm(&m, self.op.grid().cell_volume(), p, 0))
    }

    /// `‖g(A)‖_{L^r → L^p}` for `r ≤ p`; exact when `r = 1` or `r = p = 2`.
    pub fn mixed_norm(&self, r: f64, p: f64) -> Result<OpNorm> {
        check_exponent(r)?;
        check_exponent(p)?;
        if r == p {
            return self.opnorm(p);
        }
        let m = self.matrix()?;
        Ok(matrix_mixed_norm(&m, self.op.grid().cell_volume(), r, p, 0))
    }
}

/// `U diag(g(λ)) Uᵀ`.
pub fn function_matrix(op: &SpectralOperator, g: impl Fn(f64) -> f64) -> Result<Mat<f64>> {
    let e = op.eigen_or_err()?;
    let n = op.len();
    let scaled = Mat::from_fn(n, n, |i, k| e.vectors[(i, k)] * g(e.values[k]));
    Ok(&scaled * e.vectors.transpose())
}

/// Induced `L^p → L^p` norm of a nodal matrix on a grid with cell measure `w`.
pub fn matrix_opnorm(m: &Mat<f64>, w: f64, p: f64, seed: u64) -> OpNorm {
    let n = m.nrows();
    if p == 1.0 {
        let v = (0..n).map(|j| (0..n).map(|i| m[(i, j)].abs()).sum::<f64>()).fold(0.0, f64::max);
        return OpNorm { value: v, exact: true };
    }
    if p.is_infinite() {
        let v = (0..n).map(|i| (0..n).map(|j| m[(i, j)].abs()).sum::<f64>()).fold(0.0, f64::max);
        return OpNorm { value: v, exact: true };
    }
    matrix_mixed_norm(m, w, p, p, seed)
}

/// Induced `L^r → L^p` norm. Exact for `r = 1` (the extremal inputs are point
/// masses) and for `r = p = ∞`; otherwise a lower bound from a nonlinear power
/// iteration started at the constant function and random probes.
pub fn matrix_mixed_norm(m: &Mat<f64>, w: f64, r: f64, p: f64, seed: u64) -> OpNorm {
    let n = m.nrows();
    let col_norm = |j: usize| {
        let col: Vec<Complex64> = (0..n).map(|i| Complex64::new(m[(i, j)] / w, 0.0)).collect();
        lp_norm_values(&col, w, p).expect("valid exponent")
    };
    if r == 1.0 {
        let v = (0..n).map(col_norm).fold(0.0, f64::max);
        return OpNorm { value: v, exact: true };
    }
    if r.is_infinite() && p.is_infinite() {
        return matrix_opnorm(m, w, p, seed);
    }
    OpNorm { value: probe_norm(m, w, r, p, seed), exact: false }
}

/// Power iteration for `max ‖Mf‖_p / ‖f‖_r` from random starts and point masses.
fn probe_norm(m: &Mat<f64>, w: f64, r: f64, p: f64, seed: u64) -> f64 {
    let n = m.nrows();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let norm = |v: &[f64], q: f64| {
        let c: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        lp_norm_values(&c, w, q).expect("valid exponent")
    };
    let apply = |x: &[f64]| -> Vec<f64> { (0..n).map(|i| (0..n).map(|j| m[(i, j)] * x[j]).sum()).collect() };
    let apply_t = |x: &[f64]| -> Vec<f64> { (0..n).map(|j| (0..n).map(|i| m[(i, j)] * x[i]).sum()).collect() };
    let dual = |v: &[f64], q: f64| -> Vec<f64> {
        // Gradient of ‖v‖_q up to scaling: sign(v)|v|^{q-1}.
        if q.is_infinite() {
            let mx = v.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            v.iter().map(|&x| if x.abs() == mx { x.signum() } else { 0.0 }).collect()
        } else {
            v.iter().map(|&x| x.signum() * x.abs().powf(q - 1.0)).collect()
        }
    };
    let rp = crate::geometry::conjugate_exponent(r);
    let mut best = 0.0f64;
    let starts = 8usize.min(n.max(1));
    for s in 0..starts {
        let mut x: Vec<f64> = if s == 0 {
            vec![1.0; n]
        } else {
            (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
        };
        let mut prev = 0.0;
        for _ in 0..50 {
            let nx = norm(&x, r);
            if nx == 0.0 {
                break;
            }
            let y = apply(&x);
            let ratio = norm(&y, p) / nx;
            best = best.max(ratio);
            let z = dual(&apply_t(&dual(&y, p)), rp);
            if z.iter().all(|&v| v == 0.0) || (ratio - prev).abs() <= 1e-13 * ratio {
                break;
            }
            prev = ratio;
            x = z;
        }
    }
    best
}

/// Eigen-coefficients of a batch of functions, reused across symbols.
pub struct Expansion<'a> {
    op: &'a SpectralOperator,
    coef: Mat<f64>,
    complex: Vec<bool>,
}

impl<'a> Expansion<'a> {
    pub fn new(op: &'a SpectralOperator, fs: &[GridFunction]) -> Result<Self> {
        let e = op.eigen_or_err()?;
        let n = op.len();
        let complex: Vec<bool> = fs.iter().map(|f| !f.is_real()).collect();
        let cols: usize = complex.iter().map(|&c| if c { 2 } else { 1 }).sum();
        let mut x = Mat::zeros(n, cols);
        let mut c = 0;
        for (f, &is_c) in fs.iter().zip(&complex) {
            op.check_grid(f)?;
            for (i, v) in f.values().iter().enumerate() {
                x[(i, c)] = v.re;
                if is_c {
                    x[(i, c + 1)] = v.im;
                }
            }
            c += if is_c { 2 } else { 1 };
        }
        let coef = e.vectors.transpose() * &x;
        Ok(Expansion { op, coef, complex })
    }

    pub fn len(&self) -> usize {
        self.complex.len()
    }

    pub fn is_empty(&self) -> bool {
        self.complex.is_empty()
    }

    /// `Σ_k |(u_k, f)|²` weights per function, in the Euclidean normalization.
    pub fn spectral_weights(&self, index: usize) -> Vec<f64> {
        let c = self.column_of(index);
        let n = self.op.len();
        (0..n)
            .map(|k| {
                let re = self.coef[(k, c)];
                let im = if self.complex[index] { self.coef[(k, c + 1)] } else { 0.0 };
                re * re + im * im
            })
            .collect()
    }

    fn column_of(&self, index: usize) -> usize {
        self.complex[..index].iter().map(|&c| if c { 2 } else { 1 }).sum()
    }

    /// `g(A) f` for every function in the batch.
    pub fn synthesize(&self, g: impl Fn(f64) -> f64) -> Vec<GridFunction> {
        let e = self.op.eigen().expect("expansion implies eigendata");
        let n = self.op.len();
        let scaled = Mat::from_fn(n, self.coef.ncols(), |k, c| g(e.values[k]) * self.coef[(k, c)]);
        let out = &e.vectors * &scaled;
        let mut res = Vec::with_capacity(self.complex.len());
        let mut c = 0;
        for &is_c in &self.complex {
            let values = (0..n)
                .map(|i| Complex64::new(out[(i, c)], if is_c { out[(i, c + 1)] } else { 0.0 }))
                .collect();
            res.push(GridFunction::diagnostic(self.op.grid().clone(), values));
            c += if is_c { 2 } else { 1 };
        }
        res
    }
}

/// `Σ_k c_k T_k(x)` on `[lo, hi]` mapped affinely to `[-1, 1]`, with the
/// leading coefficient already halved.
#[derive(Clone, Debug)]
pub struct ChebyshevSeries {
    pub coeffs: Vec<f64>,
    pub lo: f64,
    pub hi: f64,
    /// Sup error against the symbol on the check grid.
    pub sup_error: f64,
}

/// Number of points on which the symbol approximation error is measured.
pub const CHECK_POINTS: usize = 10_000;

impl ChebyshevSeries {
    /// Coefficients of degree `degree` from `2(degree + 1)` Chebyshev points.
    pub fn fixed(symbol: &Symbol, lo: f64, hi: f64, degree: usize) -> Result<Self> {
        if !(hi >= lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidSpectrumBounds(format!("[{lo}, {hi}]")));
        }
        let (lo, hi) = pad(lo, hi);
        let m = 2 * (degree + 1);
        let samples: Vec<f64> = (0..m)
            .map(|i| {
                let x = (std::f64::consts::PI * (i as f64 + 0.5) / m as f64).cos();
                symbol.eval(from_unit(x, lo, hi))
            })
            .collect();
        let mut coeffs = dct2(&samples);
        coeffs.truncate(degree + 1);
        coeffs[0] *= 0.5;
        let mut s = ChebyshevSeries { coeffs, lo, hi, sup_error: 0.0 };
        s.sup_error = s.check_error(symbol);
        Ok(s)
    }

    /// Doubles the degree from 16 until the sup error on the check grid is at
    /// most `tolerance`.
    pub fn adaptive(symbol: &Symbol, lo: f64, hi: f64, tolerance: f64, max_degree: usize) -> Result<Self> {
        let mut degree = 16.min(max_degree.max(1));
        loop {
            let s = Self::fixed(symbol, lo, hi, degree)?;
            if s.sup_error <= tolerance {
                return Ok(s);
            }
            if degree >= max_degree {
                return Err(Error::ChebyshevToleranceUnmet { degree, error: s.sup_error, tolerance });
            }
            degree = (2 * degree).min(max_degree);
        }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Clenshaw evaluation.
    pub fn eval(&self, lambda: f64) -> f64 {
        let x = to_unit(lambda, self.lo, self.hi);
        let (mut b1, mut b2) = (0.0, 0.0);
        for &c in self.coeffs.iter().skip(1).rev() {
            let b0 = c + 2.0 * x * b1 - b2;
            b2 = b1;
            b1 = b0;
        }
        self.coeffs[0] + x * b1 - b2
    }

    fn check_error(&self, symbol: &Symbol) -> f64 {
        check_points(self.lo, self.hi)
            .into_iter()
            .map(|l| (self.eval(l) - symbol.eval(l)).abs())
            .fold(0.0, f64::max)
    }

    /// `p(A) x` by the three-term recurrence.
    pub fn apply(&self, a: &SparseSym, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let scale = 2.0 / (self.hi - self.lo);
        let shift = (self.hi + self.lo) / (self.hi - self.lo);
        let mut ax = vec![0.0; n];
        // Ã v = scale·A v - shift·v
        let mut mapped = |v: &[f64], out: &mut [f64]| {
            a.matvec(v, &mut ax);
            for i in 0..n {
                out[i] = scale * ax[i] - shift * v[i];
            }
        };
        let mut t_prev = x.to_vec();
        let mut out: Vec<f64> = x.iter().map(|v| self.coeffs[0] * v).collect();
        if self.coeffs.len() == 1 {
            return out;
        }
        let mut t_cur = vec![0.0; n];
        mapped(&t_prev, &mut t_cur);
        for i in 0..n {
            out[i] += self.coeffs[1] * t_cur[i];
        }
        let mut t_next = vec![0.0; n];
        for &c in &self.coeffs[2..] {
            mapped(&t_cur, &mut t_next);
            for i in 0..n {
                t_next[i] = 2.0 * t_next[i] - t_prev[i];
                out[i] += c * t_next[i];
            }
            std::mem::swap(&mut t_prev, &mut t_cur);
            std::mem::swap(&mut t_cur, &mut t_next);
        }
        out
    }

    pub fn apply_function(&self, a: &SparseSym, f: &GridFunction) -> Result<GridFunction> {
        let re = self.apply(a, &f.real_parts());
        let values: Vec<Complex64> = if f.is_real() {
            re.into_iter().map(|v| Complex64::new(v, 0.0)).collect()
        } else {
            let im = self.apply(a, &f.imag_parts());
            re.into_iter().zip(im).map(|(a, b)| Complex64::new(a, b)).collect()
        };
        Ok(GridFunction::diagnostic(f.grid().clone(), values))
    }
}

fn pad(lo: f64, hi: f64) -> (f64, f64) {
    let span = (hi - lo).max(1e-300);
    let m = 1e-12 * span.max(lo.abs().max(hi.abs()));
    (lo - m, hi + m)
}

fn to_unit(l: f64, lo: f64, hi: f64) -> f64 {
    (2.0 * l - (hi + lo)) / (hi - lo)
}

fn from_unit(x: f64, lo: f64, hi: f64) -> f64 {
    0.5 * (hi + lo) + 0.5 * (hi - lo) * x
}

/// Half Chebyshev-distributed, half log-distributed (from `lo`) points.
fn check_points(lo: f64, hi: f64) -> Vec<f64> {
    let half = CHECK_POINTS / 2;
    let mut pts = Vec::with_capacity(CHECK_POINTS);
    for i in 0..half {
        let th = std::f64::consts::PI * i as f64 / (half - 1) as f64;
        pts.push(from_unit(th.cos(), lo, hi));
    }
    let span = hi - lo;
    let first = (span * 1e-9).max(f64::MIN_POSITIVE);
    for i in 0..CHECK_POINTS - half {
        let t = i as f64 / (CHECK_POINTS - half - 1) as f64;
        pts.push(lo + first * (span / first).powf(t));
    }
    pts
}

/// `c_k = (2/M) Σ_m y_m cos(πk(m + 1/2)/M)` via an FFT of the even extension.
fn dct2(y: &[f64]) -> Vec<f64> {
    let m = y.len();
    let mut buf: Vec<rustfft::num_complex::Complex<f64>> = Vec::with_capacity(2 * m);
    buf.extend(y.iter().map(|&v| rustfft::num_complex::Complex::new(v, 0.0)));
    buf.extend(y.iter().rev().map(|&v| rustfft::num_complex::Complex::new(v, 0.0)));
    let fft = FftPlanner::new().plan_fft_forward(2 * m);
    fft.process(&mut buf);
    (0..m)
        .map(|k| {
            let ang = -std::f64::consts::PI * k as f64 / (2 * m) as f64;
            let w = rustfft::num_complex::Complex::new(ang.cos(), ang.sin());
            (w * buf[k]).re / m as f64
        })
        .collect()
}

/// `φ_j(√A) f`.
pub fn dyadic_block(op: &SpectralOperator, sys: &DyadicSystem, j: i32, f: &GridFunction) -> Result<GridFunction> {
    OperatorFunction::dense(op, Symbol::block(sys, j)).apply(f)
}

/// `e^{-tA} f`.
pub fn heat(op: &SpectralOperator, t: f64, f: &GridFunction) -> Result<GridFunction> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("heat time must be positive, got {t}")));
    }
    OperatorFunction::dense(op, Symbol::heat(t)).apply(f)
}

/// Kernel of `e^{-tA}` from the eigendecomposition. Entries far from the
/// diagonal carry absolute rounding of order `1e-16·max|K|`; see
/// [`heat_kernels_positive`] for entrywise-relative accuracy.
pub fn heat_kernel(op: &SpectralOperator, t: f64) -> Result<KernelMatrix> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("heat time must be positive, got {t}")));
    }
    OperatorFunction::dense(op, Symbol::heat(t)).kernel()
}

/// Heat kernels in log form: `K_t(x, y) = exp(log_scale) · mantissa(x, y)`.
#[derive(Clone, Debug)]
pub struct LogKernel {
    pub t: f64,
    pub log_scale: f64,
    pub mantissa: Mat<f64>,
}

impl LogKernel {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.mantissa[(i, j)] * self.log_scale.exp()
    }

    pub fn ln_value(&self, i: usize, j: usize) -> f64 {
        self.mantissa[(i, j)].ln() + self.log_scale
    }
}

/// Heat kernels of `A = A_0 + diag(V)` at `t_max·2^{-k}`, `k = levels-1, …, 0`
/// (ascending in t), with entrywise-relative accuracy.
///
/// With `c = max diag(A)` the matrix `B = cI - A` is entrywise non-negative, so
/// `e^{-sA} = e^{-sc} e^{sB}` is a sum of non-negative terms. A Taylor series
/// at a small time step followed by repeated squaring never cancels, which keeps
/// the tiny off-diagonal entries accurate where the spectral sum would only
/// resolve them to `1e-16` of the diagonal.
pub fn heat_kernels_positive(op: &SpectralOperator, t_max: f64, levels: usize) -> Result<Vec<LogKernel>> {
    if !(t_max > 0.0) || levels == 0 {
        return Err(Error::InvalidParameter("heat kernels need t_max > 0 and at least one level".into()));
    }
    let n = op.len();
    let a = op.matrix();
    let c = a.diagonal().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut b = Mat::zeros(n, n);
    for i in 0..n {
        for (j, v) in a.row(i) {
            b[(i, j)] = if i == j { c - v } else { -v };
        }
    }
    let norm_b = (0..n).map(|i| (0..n).map(|j| b[(i, j)]).sum::<f64>()).fold(0.0, f64::max);
    let t_min = t_max * (-(levels as f64 - 1.0)).exp2();
    // Substeps so that s‖B‖ ≤ 1/2.
    let mut squarings = 0u32;
    let mut s = t_min;
    while s * norm_b > 0.5 {
        s *= 0.5;
        squarings += 1;
    }
    // Taylor series of e^{sB}; terms are non-negative and decay geometrically.
    let mut term = Mat::<f64>::identity(n, n);
    let mut sum = term.clone();
    // Entries at lattice distance d first appear in term d, so a long series keeps
    // them relatively accurate; squaring then propagates that accuracy.
    for k in 1..=60 {
        let mut next = &term * &b;
        let f = s / k as f64;
        for j in 0..n {
            for i in 0..n {
                next[(i, j)] *= f;
            }
        }
        term = next;
        let mut tmax = 0.0f64;
        for j in 0..n {
            for i in 0..n {
                sum[(i, j)] += term[(i, j)];
                tmax = tmax.max(term[(i, j)]);
            }
        }
        if tmax == 0.0 {
            break;
        }
    }
    let mut cur = LogKernel { t: s, log_scale: -s * c, mantissa: sum };
    renormalize(&mut cur);
    let mut out = Vec::with_capacity(levels);
    for _ in 0..squarings {
        cur = square(&cur);
    }
    out.push(cur.clone());
    for _ in 1..levels {
        cur = square(&cur);
        out.push(cur.clone());
    }
    let inv_w = -op.grid().cell_volume().ln();
    for k in &mut out {
        k.log_scale += inv_w;
    }
    Ok(out)
}

fn square(k: &LogKernel) -> LogKernel {
    let mut m = LogKernel { t: 2.0 * k.t, log_scale: 2.0 * k.log_scale, mantissa: &k.mantissa * &k.mantissa };
    renormalize(&mut m);
    m
}

fn renormalize(k: &mut LogKernel) {
    let n = k.mantissa.nrows();
    let mut mx = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            mx = mx.max(k.mantissa[(i, j)]);
        }
    }
    if mx > 0.0 {
        for j in 0..n {
            for i in 0..n {
                k.mantissa[(i, j)] /= mx;
            }
        }
        k.log_scale += mx.ln();
    }
}

/// `A^α f`. For negative or non-integer `α` the function must have no weight
/// on eigenvalues `λ ≤ 0` unless `positive_part_only` is set, in which case
/// that part is discarded. Integer `α ≥ 0` act on the whole spectrum unless
/// `positive_part_only` is set.
pub fn power(op: &SpectralOperator, alpha: f64, f: &GridFunction, positive_part_only: bool) -> Result<GridFunction> {
    let exp = Expansion::new(op, std::slice::from_ref(f))?;
    let ev = op.eigenvalues()?;
    let integral = alpha >= 0.0 && alpha.fract() == 0.0;
    if !integral && !positive_part_only {
        let w = exp.spectral_weights(0);
        let total: f64 = w.iter().sum();
        let bad: f64 = w.iter().zip(ev).filter(|(_, &l)| l <= 0.0).map(|(v, _)| v).sum();
        if bad > 1e-24 * total.max(f64::MIN_POSITIVE) {
            return Err(Error::NegativeSpectrumComponent { weight: (bad / total).sqrt() });
        }
    }
    let out = exp.synthesize(|l| {
        if l > 0.0 {
            l.powf(alpha)
        } else if positive_part_only || !integral {
            0.0
        } else {
            l.powi(alpha as i32)
        }
    });
    Ok(out.into_iter().next().unwrap())
}

/// Discrete kernel `K(x, y) = M(x, y)/h^n` of a nodal matrix.
#[derive(Clone, Debug)]
pub struct KernelMatrix {
    pub label: String,
    pub cell_volume: f64,
    pub values: Mat<f64>,
}

impl KernelMatrix {
    pub fn from_matrix(label: &str, grid: &Grid, m: Mat<f64>) -> Self {
        let w = grid.cell_volume();
        let n = m.nrows();
        let values = Mat::from_fn(n, n, |i, j| m[(i, j)] / w);
        KernelMatrix { label: label.to_string(), cell_volume: w, values }
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    pub fn max_asymmetry(&self) -> f64 {
        let n = self.len();
        let mut a = 0.0f64;
        for i in 0..n {
            for j in 0..i {
                a = a.max((self.values[(i, j)] - self.values[(j, i)]).abs());
            }
        }
        a
    }

    /// Writes `x_index,y_index,value` rows; refuses kernels above `cap` entries.
    pub fn write_csv(&self, path: &FsPath, cap: usize) -> Result<()> {
        let n = self.len();
        if n * n > cap {
            return Err(Error::BudgetExceeded { cells: n * n, cap });
        }
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "x_index,y_index,value")?;
        for i in 0..n {
            for j in 0..n {
                writeln!(w, "{i},{j},{:e}", self.values[(i, j)])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
