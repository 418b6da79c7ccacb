//! Real potentials `V = V_+ - V_-`, Kato-type norms of the negative part and the
//! smallness thresholds that guarantee a positive spectrum.

use std::f64::consts::PI;
use std::sync::Arc;

use faer::Mat;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::{Grid, GridFunction};
use crate::operator::SpectralOperator;

/// A potential sampled on a grid together with its sign split.
#[derive(Clone, Debug)]
pub struct Potential {
    grid: Arc<Grid>,
    values: Vec<f64>,
    plus: Vec<f64>,
    minus: Vec<f64>,
    truncated: usize,
}

impl Potential {
    /// Wraps real samples; rejects non-finite values.
    pub fn from_values(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "{} potential samples for {} cells",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("potential has non-finite samples".into()));
        }
        let plus = values.iter().map(|&v| v.max(0.0)).collect();
        let minus = values.iter().map(|&v| (-v).max(0.0)).collect();
        Ok(Potential { grid, values, plus, minus, truncated: 0 })
    }

    pub fn zero(grid: Arc<Grid>) -> Self {
        let n = grid.len();
        Potential::from_values(grid, vec![0.0; n]).expect("zeros are finite")
    }

    pub fn constant(grid: Arc<Grid>, c: f64) -> Result<Self> {
        let n = grid.len();
        Potential::from_values(grid, vec![c; n])
    }

    /// Samples a closed-form expression. Occurrences of `|x|` are evaluated at
    /// `max(|x|, h)` so that singular profiles stay finite on the lattice; the
    /// number of frozen nodes is logged and kept in [`Potential::truncated`].
    pub fn from_expression(grid: Arc<Grid>, expr: &Expr) -> Result<Self> {
        let n = grid.dim();
        let h = grid.h();
        let mut truncated = 0;
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.len() {
            let x = grid.coords(i);
            let r = x[..n].iter().map(|v| v * v).sum::<f64>().sqrt();
            if r < h && expr.uses_radius() {
                truncated += 1;
            }
            let v = expr.eval(&x[..n], r.max(h));
            if !v.is_finite() {
                return Err(Error::Expression(format!("non-finite value {v} at node {:?}", &x[..n])));
            }
            values.push(v);
        }
        if truncated > 0 {
            log::info!("potential frozen at |x| = h on {truncated} node(s)");
        }
        let mut pot = Potential::from_values(grid, values)?;
        pot.truncated = truncated;
        Ok(pot)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn plus(&self) -> &[f64] {
        &self.plus
    }

    pub fn minus(&self) -> &[f64] {
        &self.minus
    }

    /// Nodes whose radius was frozen at `h` during sampling.
    pub fn truncated(&self) -> usize {
        self.truncated
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        let mut p = Potential::from_values(self.grid.clone(), self.values.iter().map(|v| v * c).collect())?;
        p.truncated = self.truncated;
        Ok(p)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.minus.iter().all(|&v| v == 0.0)
    }

    pub fn as_grid_function(&self) -> GridFunction {
        GridFunction::from_real(self.grid.clone(), self.values.clone()).expect("finite samples")
    }

    pub fn kato_report(&self) -> KatoReport {
        check_smallness(&self.grid, &self.minus)
    }
}

/// Splits a real grid function into its positive and negative parts.
pub fn decompose(raw: &GridFunction) -> Result<Potential> {
    if !raw.is_real() {
        return Err(Error::ComplexPotential);
    }
    Potential::from_values(raw.grid().clone(), raw.real_parts())
}

/// Integral of the Kato kernel over the node's own cell, assuming the integrand
/// is constant there.
pub fn self_cell_weight(n: usize, h: f64) -> Result<f64> {
    match n {
        1 => Ok(h),
        // ∫_{[-1/2,1/2]^2} ln(1/|w|) dw = 3/2 - π/4 + ln(2)/2
        2 => Ok(h * h * (1.5 - PI / 4.0 + 0.5 * std::f64::consts::LN_2 - h.ln())),
        // ∫_{[-1/2,1/2]^3} |w|^{-1} dw = 3 ln((√3+1)/(√3-1)) - π/2
        3 => {
            let s3 = 3f64.sqrt();
            Ok(h * h * (3.0 * ((s3 + 1.0) / (s3 - 1.0)).ln() - PI / 2.0))
        }
        _ => Err(Error::UnsupportedDimension(n)),
    }
}

/// The singular kernel of the Kato class in dimension `n` at distance `d > 0`.
pub fn kato_kernel(n: usize, d: f64) -> f64 {
    match n {
        1 => 1.0,
        2 => -d.ln(),
        _ => d.powi(2 - n as i32),
    }
}

/// Largest radius the kernel is integrated over; in one and two dimensions the
/// kernel is only meaningful locally so the radius is capped at 1.
fn effective_radius(n: usize, r: f64) -> f64 {
    if n <= 2 {
        r.min(1.0)
    } else {
        r
    }
}

/// `sup_x h^n Σ_{0<|x-y|<r} k_n(x-y) V_-(y)` plus the self-cell contribution.
/// `radius = f64::INFINITY` integrates over all of Ω (capped at 1 for n ≤ 2).
pub fn kato_norm(grid: &Grid, v_minus: &[f64], radius: f64) -> Result<f64> {
    let n = grid.dim();
    if !(1..=3).contains(&n) {
        return Err(Error::UnsupportedDimension(n));
    }
    if v_minus.len() != grid.len() {
        return Err(Error::GridMismatch);
    }
    if v_minus.iter().any(|&v| !(v >= 0.0)) {
        return Err(Error::InvalidParameter("V_- must be non-negative".into()));
    }
    if !(radius > 0.0) {
        return Err(Error::InvalidParameter(format!("Kato radius must be positive, got {radius}")));
    }
    let h = grid.h();
    let w = grid.cell_volume();
    let self_w = self_cell_weight(n, h)?;
    let r = effective_radius(n, radius);
    let support: Vec<usize> = (0..grid.len()).filter(|&i| v_minus[i] > 0.0).collect();
    if support.is_empty() {
        return Ok(0.0);
    }

    let offsets_count = if r.is_finite() { (2.0 * (r / h).ceil() + 1.0).powi(n as i32) } else { f64::INFINITY };
    let values: Vec<f64> = if offsets_count < support.len() as f64 {
        let offsets = lattice_offsets(n, h, r);
        (0..grid.len())
            .into_par_iter()
            .map(|x| {
                let kx = grid.lattice_index(x);
                let mut s = self_w * v_minus[x];
                for (off, kern) in &offsets {
                    let k = [kx[0] + off[0], kx[1] + off[1], kx[2] + off[2]];
                    if let Some(y) = grid.cell_of(k) {
                        s += w * kern * v_minus[y];
                    }
                }
                s
            })
            .collect()
    } else {
        (0..grid.len())
            .into_par_iter()
            .map(|x| {
                let mut s = self_w * v_minus[x];
                for &y in &support {
                    if y == x {
                        continue;
                    }
                    let d = grid.distance(x, y);
                    if d < r {
                        s += w * kato_kernel(n, d) * v_minus[y];
                    }
                }
                s
            })
            .collect()
    };
    Ok(values.into_iter().fold(0.0, f64::max))
}

fn lattice_offsets(n: usize, h: f64, r: f64) -> Vec<([i64; 3], f64)> {
    let reach = (r / h).ceil() as i64;
    let range = |axis: usize| if axis < n { -reach..=reach } else { 0..=0 };
    let mut out = Vec::new();
    for a in range(0) {
        for b in range(1) {
            for c in range(2) {
                if a == 0 && b == 0 && c == 0 {
                    continue;
                }
                let d = ((a * a + b * b + c * c) as f64).sqrt() * h;
                if d < r {
                    out.push(([a, b, c], kato_kernel(n, d)));
                }
            }
        }
    }
    out
}

/// Kato norm on the dyadic radii `1, 1/2, 1/4, …` down to `h`, in decreasing
/// order of radius. The small-radius end approximates the Kato-class limit.
pub fn kato_curve(grid: &Grid, v_minus: &[f64]) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    let mut r = 1.0;
    while r >= grid.h() {
        out.push((r, kato_norm(grid, v_minus, r)?));
        r *= 0.5;
    }
    Ok(out)
}

/// Smallness thresholds `π^{n/2}/Γ(n/2-1)` and four times that; defined for
/// `n ≥ 3` only.
pub fn thresholds(n: usize) -> Option<(f64, f64)> {
    if n < 3 {
        return None;
    }
    let nf = n as f64;
    let strict = PI.powf(nf / 2.0) / libm::tgamma(nf / 2.0 - 1.0);
    Some((strict, 4.0 * strict))
}

/// Hardy-type certificate `1 - Γ(n/2-1)‖V_-‖_K/(4π^{n/2})`; positive values
/// imply that zero is not an eigenvalue.
pub fn hardy_certificate(n: usize, kato: f64) -> Option<f64> {
    thresholds(n).map(|(_, weak)| 1.0 - kato / weak)
}

/// Kato-class diagnostics of a negative part.
#[derive(Clone, Debug, Serialize)]
pub struct KatoReport {
    pub dimension: usize,
    /// Kato norm over all of Ω (radius capped at 1 for n ≤ 2).
    pub norm: f64,
    /// `π^{n/2}/Γ(n/2-1)`, absent for n ≤ 2.
    pub theta_strict: Option<f64>,
    /// `4π^{n/2}/Γ(n/2-1)`, absent for n ≤ 2.
    pub theta_weak: Option<f64>,
    /// Norm strictly below `theta_strict` (n ≥ 3) or `V_- ≡ 0` (n ≤ 2).
    pub satisfies_ass1: bool,
    /// Norm strictly below `theta_weak` (n ≥ 3) or `V_- ≡ 0` (n ≤ 2).
    pub satisfies_assb1: bool,
    /// Hardy certificate; for n ≤ 2 it is 1 when `V_- ≡ 0` and absent otherwise.
    pub certificate: Option<f64>,
}

pub fn check_smallness(grid: &Grid, v_minus: &[f64]) -> KatoReport {
    let n = grid.dim();
    let norm = kato_norm(grid, v_minus, f64::INFINITY).unwrap_or(f64::INFINITY);
    let vanishes = v_minus.iter().all(|&v| v == 0.0);
    match thresholds(n) {
        Some((strict, weak)) => KatoReport {
            dimension: n,
            norm,
            theta_strict: Some(strict),
            theta_weak: Some(weak),
            satisfies_ass1: norm < strict,
            satisfies_assb1: norm < weak,
            certificate: hardy_certificate(n, norm),
        },
        None => KatoReport {
            dimension: n,
            norm,
            theta_strict: None,
            theta_weak: None,
            satisfies_ass1: vanishes,
            satisfies_assb1: vanishes,
            certificate: vanishes.then_some(1.0),
        },
    }
}

/// Smallest `λ_0 ≥ 0` with `Σ V_-|f|² h^n ≤ ε (f, A_0 f) + λ_0² ‖f‖²` for every
/// grid function `f`, i.e. `sqrt(max(0, λ_max(diag(V_-) - ε A_0)))`.
pub fn form_bound(v_minus: &[f64], eps: f64, laplacian: &SpectralOperator) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {eps}")));
    }
    let n = laplacian.len();
    if v_minus.len() != n {
        return Err(Error::GridMismatch);
    }
    let a = laplacian.matrix().to_dense();
    let m = Mat::from_fn(n, n, |i, j| {
        let d = if i == j { v_minus[i] } else { 0.0 };
        d - eps * a[(i, j)]
    });
    let eig = m
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .map_err(|e| Error::SolverFailure(format!("{e:?}")))?;
    let top = eig.last().copied().unwrap_or(0.0);
    Ok(top.max(0.0).sqrt())
}
