//! Besov, Sobolev, test-space and Lorentz norms.

use serde::{Deserialize, Serialize};

use crate::calculus::Expansion;
use crate::dyadic::DyadicSystem;
use crate::error::{Error, Result};
use crate::geometry::{check_exponent, GridFunction};
use crate::operator::SpectralOperator;
use crate::quad;

/// Smoothness `s` and exponents `p, q ∈ [1, ∞]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BesovParams {
    pub s: f64,
    pub p: f64,
    pub q: f64,
    #[serde(default)]
    pub homogeneous: bool,
}

impl BesovParams {
    pub fn new(s: f64, p: f64, q: f64, homogeneous: bool) -> Self {
        BesovParams { s, p, q, homogeneous }
    }

    pub fn validate(&self) -> Result<()> {
        check_exponent(self.p)?;
        check_exponent(self.q)?;
        if !self.s.is_finite() {
            return Err(Error::InvalidParameter(format!("smoothness {} is not finite", self.s)));
        }
        Ok(())
    }
}

/// `ℓ^q` norm of a finite sequence.
pub fn lq_norm(seq: impl IntoIterator<Item = f64>, q: f64) -> f64 {
    if q.is_infinite() {
        return seq.into_iter().fold(0.0, |a, b| a.max(b.abs()));
    }
    let v: Vec<f64> = seq.into_iter().map(f64::abs).collect();
    let mx = v.iter().copied().fold(0.0, f64::max);
    if mx == 0.0 {
        return 0.0;
    }
    mx * v.iter().map(|x| (x / mx).powf(q)).sum::<f64>().powf(1.0 / q)
}

/// `L^p` norms of `ψ(A)f` and of every block `φ_j(√A)f` in the index range.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockProfile {
    pub psi: f64,
    /// `(j, ‖φ_j(√A) f‖_p)` in increasing `j`.
    pub blocks: Vec<(i32, f64)>,
}

impl BlockProfile {
    pub fn block(&self, j: i32) -> f64 {
        self.blocks.iter().find(|b| b.0 == j).map_or(0.0, |b| b.1)
    }

    pub fn besov(&self, s: f64, q: f64, homogeneous: bool) -> f64 {
        if homogeneous {
            lq_norm(self.blocks.iter().map(|&(j, b)| (s * j as f64).exp2() * b), q)
        } else {
            self.psi + lq_norm(self.blocks.iter().filter(|b| b.0 >= 1).map(|&(j, b)| (s * j as f64).exp2() * b), q)
        }
    }
}

/// Block indices needed by both the homogeneous and the inhomogeneous norms.
pub fn block_range(sys: &DyadicSystem) -> std::ops::RangeInclusive<i32> {
    sys.j_min.min(1)..=sys.j_max
}

/// Block profiles of a batch of functions in `L^p`.
pub fn block_profiles(
    op: &SpectralOperator,
    sys: &DyadicSystem,
    fs: &[GridFunction],
    p: f64,
) -> Result<Vec<BlockProfile>> {
    check_exponent(p)?;
    let exp = Expansion::new(op, fs)?;
    let psi = exp.synthesize(|l| sys.psi(l));
    let mut out: Vec<BlockProfile> =
        psi.iter().map(|g| Ok(BlockProfile { psi: g.lp_norm(p)?, blocks: Vec::new() })).collect::<Result<_>>()?;
    for j in block_range(sys) {
        let blocks = exp.synthesize(|l| sys.block_symbol(j, l));
        for (prof, b) in out.iter_mut().zip(&blocks) {
            prof.blocks.push((j, b.lp_norm(p)?));
        }
    }
    Ok(out)
}

/// Relative size below which the smallest eigenvalue counts as zero.
pub const ZERO_EIGENVALUE_TOL: f64 = 1e-9;

/// Fails unless the spectrum is strictly positive, which the homogeneous norms
/// and the negative powers require.
pub fn require_positive_spectrum(op: &SpectralOperator) -> Result<()> {
    let lmin = op.lambda_min()?;
    let lmax = op.lambda_max()?;
    if lmin <= ZERO_EIGENVALUE_TOL * lmax.abs().max(1.0) {
        return Err(Error::ZeroEigenvaluePresent { lambda_min: lmin });
    }
    Ok(())
}

/// `‖f‖_{B^s_{p,q}(A)}` (inhomogeneous) or `‖f‖_{Ḃ^s_{p,q}(A)}` (homogeneous).
pub fn besov_norm(op: &SpectralOperator, sys: &DyadicSystem, f: &GridFunction, params: BesovParams) -> Result<f64> {
    Ok(besov_norms(op, sys, std::slice::from_ref(f), params)?[0])
}

pub fn besov_norms(
    op: &SpectralOperator,
    sys: &DyadicSystem,
    fs: &[GridFunction],
    params: BesovParams,
) -> Result<Vec<f64>> {
    params.validate()?;
    if params.homogeneous {
        require_positive_spectrum(op)?;
    }
    let profiles = block_profiles(op, sys, fs, params.p)?;
    Ok(profiles.iter().map(|b| b.besov(params.s, params.q, params.homogeneous)).collect())
}

/// `‖(I + A)^{s/2} f‖_2`, or `‖((λ_0² + 1)I + A)^{s/2} f‖_2` when `λ_min < -1`.
pub fn sobolev_norm(op: &SpectralOperator, f: &GridFunction, s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::InvalidParameter(format!("Sobolev order must be non-negative, got {s}")));
    }
    let ev = op.eigenvalues()?;
    let shift = if ev[0] < -1.0 { op.lambda0()?.powi(2) + 1.0 } else { 1.0 };
    if shift + ev[0] <= 0.0 {
        return Err(Error::NegativeShiftedEigenvalue(shift + ev[0]));
    }
    let exp = Expansion::new(op, std::slice::from_ref(f))?;
    let w = exp.spectral_weights(0);
    let total: f64 = w.iter().zip(ev).map(|(c, l)| c * (shift + l).powf(s)).sum();
    Ok((total * op.grid().cell_volume()).sqrt())
}

/// Test-space semi-norms of one function.
#[derive(Clone, Debug, PartialEq)]
pub struct TestSeminorms {
    /// `‖f‖_1 + sup_{j≥1} 2^{Mj} ‖φ_j(√A)f‖_1`.
    pub p_vm: f64,
    /// `‖f‖_1 + sup_j 2^{M|j|} ‖φ_j(√A)f‖_1`.
    pub q_vm: f64,
    /// `(j, 2^{M|j|} ‖φ_j(√A)f‖_1)` across the window.
    pub tail: Vec<(i32, f64)>,
}

pub fn test_seminorms(op: &SpectralOperator, sys: &DyadicSystem, f: &GridFunction, m: u32) -> Result<TestSeminorms> {
    if m == 0 {
        return Err(Error::InvalidParameter("M must be at least 1".into()));
    }
    let prof = &block_profiles(op, sys, std::slice::from_ref(f), 1.0)?[0];
    let l1 = f.lp_norm(1.0)?;
    let weight = |j: i32| (m as f64 * j.unsigned_abs() as f64).exp2();
    let tail: Vec<(i32, f64)> = prof.blocks.iter().map(|&(j, b)| (j, weight(j) * b)).collect();
    let p_sup = tail.iter().filter(|t| t.0 >= 1).map(|t| t.1).fold(0.0, f64::max);
    let q_sup = tail.iter().map(|t| t.1).fold(0.0, f64::max);
    Ok(TestSeminorms { p_vm: l1 + p_sup, q_vm: l1 + q_sup, tail })
}

/// One row of `norms.csv`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormReport {
    pub norm_name: String,
    pub s: f64,
    pub p: f64,
    pub q: f64,
    pub value: f64,
    pub window: String,
    pub h: f64,
    pub n: usize,
}

/// Decreasing rearrangement of `|f|` as a step function.
#[derive(Clone, Debug, PartialEq)]
pub struct RearrangementProfile {
    /// Distinct non-zero values of `f*`, strictly decreasing.
    pub values: Vec<f64>,
    /// Right endpoints `t_i` of the steps; `f* = values[i]` on `[t_{i-1}, t_i)`.
    pub ends: Vec<f64>,
    /// `∫_0^{t_i} f*`.
    pub integrals: Vec<f64>,
}

impl RearrangementProfile {
    /// Each value carries the cell measure `w`.
    pub fn from_values(moduli: &[f64], w: f64) -> Self {
        let mut v: Vec<f64> = moduli.iter().copied().filter(|&x| x > 0.0).collect();
        v.sort_by(|a, b| b.total_cmp(a));
        let mut values = Vec::new();
        let mut ends = Vec::new();
        let mut integrals = Vec::new();
        let mut count = 0usize;
        let mut acc = 0.0;
        let mut i = 0;
        while i < v.len() {
            let val = v[i];
            let mut k = i;
            while k < v.len() && v[k] == val {
                k += 1;
            }
            let start = count as f64 * w;
            count += k - i;
            let end = count as f64 * w;
            acc += val * (end - start);
            values.push(val);
            ends.push(end);
            integrals.push(acc);
            i = k;
        }
        RearrangementProfile { values, ends, integrals }
    }

    pub fn of(f: &GridFunction) -> Self {
        Self::from_values(&f.moduli(), f.grid().cell_volume())
    }

    /// Measure of the support.
    pub fn support(&self) -> f64 {
        self.ends.last().copied().unwrap_or(0.0)
    }

    pub fn f_star(&self, t: f64) -> f64 {
        let i = self.ends.partition_point(|&e| e <= t);
        self.values.get(i).copied().unwrap_or(0.0)
    }

    /// `f**(t) = (1/t) ∫_0^t f*`.
    pub fn f_star_star(&self, t: f64) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        if t <= 0.0 {
            return self.values[0];
        }
        let (a, b) = self.piece(self.ends.partition_point(|&e| e < t));
        a + b / t
    }

    /// `f** = a + b/t` on piece `i` (the tail beyond the support is piece `len`).
    fn piece(&self, i: usize) -> (f64, f64) {
        if i >= self.values.len() {
            return (0.0, self.integrals.last().copied().unwrap_or(0.0));
        }
        let (t0, s0) = if i == 0 { (0.0, 0.0) } else { (self.ends[i - 1], self.integrals[i - 1]) };
        let a = self.values[i];
        (a, s0 - a * t0)
    }

    /// `‖f‖_{L^{p,q}} = ‖t^{1/p} f**(t)‖_{L^q(dt/t)}`.
    pub fn lorentz(&self, p: f64, q: f64) -> Result<f64> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::InvalidExponent(p));
        }
        if q.is_nan() || q < 1.0 {
            return Err(Error::InvalidExponent(q));
        }
        if self.values.is_empty() {
            return Ok(0.0);
        }
        if q.is_infinite() {
            return Ok(self.lorentz_sup(p));
        }
        if p.is_infinite() || p == 1.0 {
            // t^{1/p} f** is not q-integrable against dt/t at 0 (p = ∞) or at ∞ (p = 1).
            return Err(Error::InvalidExponent(p));
        }
        let k = self.values.len();
        let mut total = 0.0;
        for i in 0..=k {
            let (a, b) = self.piece(i);
            let t0 = if i == 0 { 0.0 } else { self.ends[i - 1] };
            total += if i == 0 {
                // f** = a on the first step.
                a.powf(q) * (p / q) * self.ends[0].powf(q / p)
            } else if i == k {
                // f** = b/t beyond the support.
                b.powf(q) * t0.powf(q / p - q) / (q - q / p)
            } else {
                piece_integral(a, b, t0, self.ends[i], p, q)
            };
        }
        Ok(total.powf(1.0 / q))
    }

    fn lorentz_sup(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.values[0];
        }
        if p == 1.0 {
            // t f**(t) = ∫_0^t f* is non-decreasing.
            return self.support_integral();
        }
        let inv_p = 1.0 / p;
        let g = |t: f64, a: f64, b: f64| t.powf(inv_p) * (a + b / t);
        let mut best = 0.0f64;
        let k = self.values.len();
        for i in 0..k {
            let (a, b) = self.piece(i);
            let t0 = if i == 0 { 0.0 } else { self.ends[i - 1] };
            let t1 = self.ends[i];
            best = best.max(g(t1, a, b));
            if i > 0 {
                best = best.max(g(t0, a, b));
                let tc = b * (p - 1.0) / a;
                if tc > t0 && tc < t1 {
                    best = best.max(g(tc, a, b));
                }
            }
        }
        best
    }

    fn support_integral(&self) -> f64 {
        self.integrals.last().copied().unwrap_or(0.0)
    }
}

/// `∫_{t0}^{t1} t^{q/p - 1} (a + b/t)^q dt` with `t0 > 0`.
fn piece_integral(a: f64, b: f64, t0: f64, t1: f64, p: f64, q: f64) -> f64 {
    if q.fract() == 0.0 && q <= 64.0 {
        // Binomial expansion; every term is non-negative.
        let qi = q as i32;
        let mut binom = 1.0;
        let mut s = 0.0;
        let ratio_ln = (t1 / t0).ln();
        for m in 0..=qi {
            if m > 0 {
                binom *= (qi - m + 1) as f64 / m as f64;
            }
            let e = q / p - m as f64;
            // ∫ t^{e-1} dt = t0^e (e^{e ln(t1/t0)} - 1)/e
            let prim = if e == 0.0 { ratio_ln } else { t0.powf(e) * (e * ratio_ln).exp_m1() / e };
            s += binom * a.powi(qi - m) * b.powi(m) * prim;
        }
        return s;
    }
    // Non-integer q: Gauss–Legendre in u = ln t on panels of length at most 1/2.
    let (u0, u1) = (t0.ln(), t1.ln());
    let panels = ((u1 - u0) / 0.5).ceil().max(1.0) as usize;
    let step = (u1 - u0) / panels as f64;
    let inv_p = 1.0 / p;
    (0..panels)
        .map(|k| {
            let lo = u0 + k as f64 * step;
            quad::integrate16(
                |u| {
                    let t = u.exp();
                    (t.powf(inv_p) * (a + b / t)).powf(q)
                },
                lo,
                lo + step,
            )
        })
        .sum()
}

/// `‖f‖_{L^{p,q}(Ω)}`.
pub fn lorentz_norm(f: &GridFunction, p: f64, q: f64) -> Result<f64> {
    RearrangementProfile::of(f).lorentz(p, q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{DomainSpec, Grid};
    use crate::operator::{assemble_laplacian, assemble_schrodinger};
    use crate::potential::Potential;
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use std::sync::Arc;

    fn interval_op(h: f64) -> SpectralOperator {
        let g = Grid::build(&DomainSpec::interval(0.0, 1.0), h).unwrap();
        assemble_laplacian(&g).eigendecompose().unwrap()
    }

    fn random_fn(grid: &Arc<Grid>, seed: u64) -> GridFunction {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        GridFunction::from_real(grid.clone(), (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    /// Midpoint rule in `ln t` with many panels: an oracle independent of the
    /// piecewise antiderivatives.
    fn lorentz_oracle(prof: &RearrangementProfile, p: f64, q: f64) -> f64 {
        let (lo, hi) = ((prof.ends[0] * 1e-40).ln(), (prof.support() * 1e40).ln());
        let m = 2_000_000;
        let du = (hi - lo) / m as f64;
        let mut s = 0.0;
        for k in 0..m {
            let t = (lo + (k as f64 + 0.5) * du).exp();
            s += (t.powf(1.0 / p) * prof.f_star_star(t)).powf(q) * du;
        }
        s.powf(1.0 / q)
    }

    #[test]
    fn indicator_closed_forms() {
        let g = Grid::build(&DomainSpec::interval(0.0, 1.0), 1.0 / 64.0).unwrap();
        let f = GridFunction::from_fn(g.clone(), |x| if x[0] < 0.3 { 1.0 } else { 0.0 }).unwrap();
        let m = f.moduli().iter().filter(|&&v| v > 0.0).count() as f64 * g.h();
        for p in [1.5, 2.0, 3.0, 7.5] {
            let weak = lorentz_norm(&f, p, f64::INFINITY).unwrap();
            assert!((weak - m.powf(1.0 / p)).abs() <= 1e-12 * weak);
            let strong = lorentz_norm(&f, p, p).unwrap();
            let expect = (p / (p - 1.0) * m).powf(1.0 / p);
            assert!((strong - expect).abs() <= 1e-12 * expect, "{p}: {strong} {expect}");
        }
        assert!(matches!(lorentz_norm(&f, 1.0, 2.0), Err(Error::InvalidExponent(_))));
        assert!(matches!(lorentz_norm(&f, f64::INFINITY, 2.0), Err(Error::InvalidExponent(_))));
        assert!((lorentz_norm(&f, 1.0, f64::INFINITY).unwrap() - m).abs() < 1e-14);
        assert_eq!(lorentz_norm(&f, f64::INFINITY, f64::INFINITY).unwrap(), 1.0);
    }

    #[test]
    fn piecewise_integrals_match_quadrature() {
        let g = Grid::build(&DomainSpec::interval(0.0, 1.0), 1.0 / 32.0).unwrap();
        let f = random_fn(&g, 9);
        let prof = RearrangementProfile::of(&f);
        for (p, q) in [(2.0, 1.0), (2.0, 3.0), (1.5, 2.5), (4.0, 1.7)] {
            let exact = prof.lorentz(p, q).unwrap();
            let oracle = lorentz_oracle(&prof, p, q);
            assert!((exact - oracle).abs() <= 1e-7 * oracle, "{p},{q}: {exact} vs {oracle}");
        }
    }

    #[test]
    fn rearrangement_invariants() {
        let g = Grid::build(&DomainSpec::interval(0.0, 1.0), 1.0 / 32.0).unwrap();
        let mut vals: Vec<f64> = random_fn(&g, 3).real_parts();
        vals[4] = 0.0;
        vals[5] = vals[6];
        let f = GridFunction::from_real(g.clone(), vals).unwrap();
        let prof = RearrangementProfile::of(&f);
        assert!((prof.support() - 30.0 * g.h()).abs() < 1e-15);
        let mut prev = (f64::INFINITY, f64::INFINITY);
        for k in 0..400 {
            let t = k as f64 * 0.0025;
            let (s, ss) = (prof.f_star(t), prof.f_star_star(t));
            assert!(s <= prev.0 && ss <= prev.1 + 1e-15 && ss >= s - 1e-15);
            prev = (s, ss);
        }
    }

    #[test]
    fn besov_single_eigenvector_and_errors() {
        let g = Grid::build(&DomainSpec::interval(0.0, 1.0), 1.0 / 32.0).unwrap();
        let a0 = assemble_laplacian(&g).eigendecompose().unwrap();
        // Constant shift puts eigenvalue 5 exactly at 4^5 = 1024.
        let l5 = a0.eigenvalues().unwrap()[5];
        let op = assemble_schrodinger(&g, &Potential::constant(g.clone(), 1024.0 - l5).unwrap())
            .unwrap()
            .eigendecompose()
            .unwrap();
        let sys = DyadicSystem::for_operator(&op).unwrap();
        let u = op.eigenfunction(5).unwrap();
        for p in [1.0, 2.0, f64::INFINITY] {
            let b = besov_norm(&op, &sys, &u, BesovParams::new(0.7, p, 2.0, true)).unwrap();
            let expect = 2f64.powf(0.7 * 5.0) * u.lp_norm(p).unwrap();
            assert!((b - expect).abs() <= 1e-10 * expect, "{b} {expect}");
        }
        let f = random_fn(&g, 1);
        let n1 = besov_norm(&op, &sys, &f, BesovParams::new(1.0, 2.0, 2.0, false)).unwrap();
        let n2 = besov_norm(&op, &sys, &f.scaled(Complex64::new(-3.0, 0.0)), BesovParams::new(1.0, 2.0, 2.0, false))
            .unwrap();
        assert!((n2 - 3.0 * n1).abs() < 1e-12 * n2);
        // Shifting the ground state to zero makes the homogeneous norm refuse.
        let l0 = a0.eigenvalues().unwrap()[0];
        let zero = assemble_schrodinger(&g, &Potential::constant(g.clone(), -l0).unwrap())
            .unwrap()
            .eigendecompose()
            .unwrap();
        let zsys = DyadicSystem::for_operator(&zero).unwrap();
        assert!(matches!(
            besov_norm(&zero, &zsys, &f, BesovParams::new(0.0, 2.0, 2.0, true)),
            Err(Error::ZeroEigenvaluePresent { .. })
        ));
        assert!(besov_norm(&zero, &zsys, &f, BesovParams::new(0.0, 2.0, 2.0, false)).is_ok());
        assert!(matches!(
            besov_norm(&op, &sys, &f, BesovParams::new(0.0, 0.5, 2.0, false)),
            Err(Error::InvalidExponent(_))
        ));
    }

    #[test]
    fn sobolev_cases() {
        let op = interval_op(1.0 / 32.0);
        let f = random_fn(op.grid(), 4);
        assert!((sobolev_norm(&op, &f, 0.0).unwrap() - f.lp_norm(2.0).unwrap()).abs() < 1e-12);
        let u = op.eigenfunction(3).unwrap();
        let l = op.eigenvalues().unwrap()[3];
        assert!((sobolev_norm(&op, &u, 1.5).unwrap() - (1.0 + l).powf(0.75)).abs() < 1e-10 * (1.0 + l));
        let unit = f.scaled(Complex64::new(1.0 / f.lp_norm(2.0).unwrap(), 0.0));
        let mut prev = 0.0;
        for k in 0..8 {
            let v = sobolev_norm(&op, &unit, 0.25 * k as f64).unwrap();
            assert!(v >= prev);
            prev = v;
        }
        let g = op.grid().clone();
        let shifted = assemble_schrodinger(&g, &Potential::constant(g.clone(), -200.0).unwrap())
            .unwrap()
            .eigendecompose()
            .unwrap();
        assert!(sobolev_norm(&shifted, &f, 1.0).unwrap() > 0.0);
        // One cell of width 1/2: A_0 = [8], so V = -9 puts the only eigenvalue at -1.
        let cell = Grid::build(&DomainSpec::interval(0.0, 1.0), 0.5).unwrap();
        let edge = assemble_schrodinger(&cell, &Potential::constant(cell.clone(), -9.0).unwrap())
            .unwrap()
            .eigendecompose()
            .unwrap();
        let one = GridFunction::constant(cell.clone(), 1.0);
        assert!(matches!(sobolev_norm(&edge, &one, 1.0), Err(Error::NegativeShiftedEigenvalue(_))));
    }

    #[test]
    fn seminorms_of_a_single_block() {
        let g = Grid::build(&DomainSpec::interval(0.0, 1.0), 1.0 / 32.0).unwrap();
        let a0 = assemble_laplacian(&g).eigendecompose().unwrap();
        let l = a0.eigenvalues().unwrap()[2];
        let op = assemble_schrodinger(&g, &Potential::constant(g.clone(), 64.0 - l).unwrap())
            .unwrap()
            .eigendecompose()
            .unwrap();
        let sys = DyadicSystem::for_operator(&op).unwrap();
        let u = op.eigenfunction(2).unwrap();
        let n1 = u.lp_norm(1.0).unwrap();
        for m in 1..4 {
            let t = test_seminorms(&op, &sys, &u, m).unwrap();
            let expect = n1 + (3.0 * m as f64).exp2() * n1;
            assert!((t.p_vm - expect).abs() < 1e-10 * expect);
            assert!((t.q_vm - t.p_vm).abs() < 1e-10 * expect);
        }
        let f = random_fn(&g, 8);
        let mut prev = (0.0, 0.0);
        for m in 1..5 {
            let t = test_seminorms(&op, &sys, &f, m).unwrap();
            assert!(t.p_vm >= prev.0 && t.q_vm >= prev.1 && t.q_vm >= t.p_vm);
            prev = (t.p_vm, t.q_vm);
        }
    }

    #[test]
    fn homogeneous_l2_against_block_overlap() {
        let op = interval_op(1.0 / 64.0);
        let sys = DyadicSystem::for_operator(&op).unwrap();
        // Σ_j φ_j(√λ)² lies in [1/2, 1] because at most two blocks overlap and they sum to 1.
        for seed in 0..5 {
            let f = random_fn(op.grid(), seed);
            let b = besov_norm(&op, &sys, &f, BesovParams::new(0.0, 2.0, 2.0, true)).unwrap();
            let l2 = f.lp_norm(2.0).unwrap();
            assert!(b <= l2 * (1.0 + 1e-12) && b >= l2 / 2f64.sqrt() * (1.0 - 1e-12));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn lorentz_scaling_chain_and_holder(seed in 0u64..10_000, alpha in 0.1f64..10.0,
                                            p in 1.2f64..6.0, q in 1.0f64..8.0) {
            let g = Grid::build(&DomainSpec::interval(0.0, 1.0), 1.0 / 16.0).unwrap();
            let f = random_fn(&g, seed);
            let h = random_fn(&g, seed + 7);
            let base = lorentz_norm(&f, p, q).unwrap();
            let scaled = lorentz_norm(&f.scaled(Complex64::new(alpha, 0.0)), p, q).unwrap();
            prop_assert!((scaled - alpha * base).abs() <= 1e-12 * scaled);
            // ‖f‖_{p,r} ≤ max(1, (q/p)^{1/q - 1/r}) ‖f‖_{p,q} for q ≤ r, from the
            // monotonicity of f**.
            let one = lorentz_norm(&f, p, 1.0).unwrap();
            let weak = lorentz_norm(&f, p, f64::INFINITY).unwrap();
            prop_assert!(base <= one * (1.0 + 1e-12));
            prop_assert!(weak <= (q / p).powf(1.0 / q).max(1.0) * base * (1.0 + 1e-12));
            // Hölder with conjugate pairs.
            let (p2, q2) = (p / (p - 1.0), if q == 1.0 { f64::INFINITY } else { q / (q - 1.0) });
            let fg = f.mul(&h).unwrap().lp_norm(1.0).unwrap();
            let rhs = base * lorentz_norm(&h, p2, q2).unwrap();
            prop_assert!(fg <= rhs * (1.0 + 1e-12));
        }

        #[test]
        fn besov_is_a_norm(seed in 0u64..1000, s in -1.0f64..2.0, p in 1.0f64..4.0, q in 1.0f64..4.0) {
            let op = interval_op(1.0 / 16.0);
            let sys = DyadicSystem::for_operator(&op).unwrap();
            let f = random_fn(op.grid(), seed);
            let g = random_fn(op.grid(), seed + 1);
            for hom in [false, true] {
                let prm = BesovParams::new(s, p, q, hom);
                let nf = besov_norm(&op, &sys, &f, prm).unwrap();
                let ng = besov_norm(&op, &sys, &g, prm).unwrap();
                let nfg = besov_norm(&op, &sys, &f.add(&g).unwrap(), prm).unwrap();
                prop_assert!(nfg <= (nf + ng) * (1.0 + 1e-12));
            }
        }

        #[test]
        fn lq_monotone_embedding(seed in 0u64..1000, eps in 0.1f64..1.0) {
            // B^{s+ε}_{p,∞} ↪ B^s_{p,1} with constant Σ_{j≥1} 2^{-εj} plus the ψ term.
            let op = interval_op(1.0 / 32.0);
            let sys = DyadicSystem::for_operator(&op).unwrap();
            let f = random_fn(op.grid(), seed);
            let src = besov_norm(&op, &sys, &f, BesovParams::new(0.5 + eps, 2.0, f64::INFINITY, false)).unwrap();
            let dst = besov_norm(&op, &sys, &f, BesovParams::new(0.5, 2.0, 1.0, false)).unwrap();
            let c = 1.0 + (1..=sys.j_max).map(|j| (-eps * j as f64).exp2()).sum::<f64>();
            prop_assert!(dst <= c * src * (1.0 + 1e-12));
        }
    }
}
