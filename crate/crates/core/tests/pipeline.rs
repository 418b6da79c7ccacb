use std::sync::Arc;

use num_complex::Complex64;
use proptest::prelude::*;
use spectral_besov::calculus::{heat, OperatorFunction, Symbol};
use spectral_besov::dyadic::DyadicSystem;
use spectral_besov::expr::Expr;
use spectral_besov::geometry::{lp_norm, zero_extend, DomainSpec, Grid, GridFunction};
use spectral_besov::norms::{besov_norm, besov_norms, lorentz_norm, BesovParams};
use spectral_besov::operator::{assemble_laplacian, assemble_schrodinger, SpectralOperator};
use spectral_besov::potential::Potential;
use spectral_besov::verify::{FamilyTag, FunctionFamily};

fn disk(h: f64) -> Arc<Grid> {
    Grid::build(&DomainSpec::ball(&[0.0, 0.0], 1.0), h).unwrap()
}

fn schrodinger(g: &Arc<Grid>, expr: &str) -> SpectralOperator {
    let v = Potential::from_expression(g.clone(), &Expr::parse(expr).unwrap()).unwrap();
    assemble_schrodinger(g, &v).unwrap().eigendecompose().unwrap()
}

fn max_diff(a: &GridFunction, b: &GridFunction) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[test]
fn cached_operator_reproduces_norms_bitwise() {
    let g = disk(1.0 / 8.0);
    let op = schrodinger(&g, "3*exp(-r^2)");
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("op.sbop");
    op.save(&path).unwrap();
    let back = SpectralOperator::load(&path).unwrap();
    assert_eq!(op.eigenvalues().unwrap(), back.eigenvalues().unwrap());
    assert!(back.grid().same_as(g.as_ref()));
    let fs = FunctionFamily::new(FamilyTag::Bump, 1, 4).generate(&op).unwrap();
    let params = BesovParams::new(0.5, 3.0, 2.0, false);
    let a = besov_norms(&op, &DyadicSystem::for_operator(&op).unwrap(), &fs, params).unwrap();
    let b = besov_norms(&back, &DyadicSystem::for_operator(&back).unwrap(), &fs, params).unwrap();
    assert_eq!(a, b);
}

#[test]
fn constant_potential_shifts_the_spectrum() {
    let g = disk(1.0 / 8.0);
    let zero = assemble_laplacian(&g).eigendecompose().unwrap();
    let shifted = schrodinger(&g, "7");
    for (a, b) in zero.eigenvalues().unwrap().iter().zip(shifted.eigenvalues().unwrap()) {
        assert!((a + 7.0 - b).abs() <= 1e-10 * b.abs().max(1.0));
    }
}

#[test]
fn heat_semigroup_property() {
    let g = disk(1.0 / 8.0);
    let op = schrodinger(&g, "-2*exp(-4*r^2)");
    let f = FunctionFamily::new(FamilyTag::RandomEigenmix, 2, 1).generate(&op).unwrap().remove(0);
    let once = heat(&op, 0.03, &f).unwrap();
    let twice = heat(&op, 0.01, &heat(&op, 0.02, &f).unwrap()).unwrap();
    assert!(max_diff(&once, &twice) <= 1e-12 * lp_norm(&once, f64::INFINITY).unwrap());
}

#[test]
fn zero_extension_keeps_lp_norms_but_not_eigenvectors() {
    let small = Grid::build(&DomainSpec::cuboid(&[0.0, 0.0], &[0.5, 0.5]), 1.0 / 16.0).unwrap();
    let big = Grid::build(&DomainSpec::cuboid(&[0.0, 0.0], &[1.0, 1.0]), 1.0 / 16.0).unwrap();
    let op = assemble_laplacian(&small).eigendecompose().unwrap();
    let u = op.eigenfunction(0).unwrap();
    let e = zero_extend(&u, &big).unwrap();
    for p in [1.0, 2.0, 3.5, f64::INFINITY] {
        let (a, b) = (lp_norm(&u, p).unwrap(), lp_norm(&e, p).unwrap());
        assert!((a - b).abs() <= 1e-14 * a, "p={p}");
    }
    let big_op = assemble_laplacian(&big).eigendecompose().unwrap();
    let Ok(au) = big_op.apply_matrix(&e) else { panic!("apply on ambient grid") };
    let residual = max_diff(&au, &e.scaled(Complex64::new(op.lambda_min().unwrap(), 0.0)));
    assert!(residual > 1.0);
}

#[test]
fn dense_and_chebyshev_paths_agree_through_the_public_api() {
    let g = disk(1.0 / 12.0);
    let op = schrodinger(&g, "0.5/r^2");
    let sys = DyadicSystem::for_operator(&op).unwrap();
    let f = FunctionFamily::new(FamilyTag::Bump, 5, 1).generate(&op).unwrap().remove(0);
    let sym = Symbol::block(&sys, (sys.j_min + sys.j_max) / 2);
    let dense = OperatorFunction::dense(&op, sym.clone()).apply(&f).unwrap();
    let cheb = OperatorFunction::chebyshev(&op, sym, 1e-12, 1 << 14).apply(&f).unwrap();
    assert!(max_diff(&dense, &cheb) <= 1e-9 * lp_norm(&f, f64::INFINITY).unwrap());
}

fn level() -> &'static (SpectralOperator, DyadicSystem, Vec<GridFunction>) {
    static LEVEL: std::sync::OnceLock<(SpectralOperator, DyadicSystem, Vec<GridFunction>)> = std::sync::OnceLock::new();
    LEVEL.get_or_init(|| {
        let g = disk(1.0 / 8.0);
        let op = schrodinger(&g, "1+x");
        let sys = DyadicSystem::for_operator(&op).unwrap();
        let fs = FunctionFamily::new(FamilyTag::RandomEigenmix, 9, 6).generate(&op).unwrap();
        (op, sys, fs)
    })
}

fn exponent() -> impl Strategy<Value = f64> {
    prop_oneof![1.0..8.0f64, Just(f64::INFINITY)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn besov_norm_is_a_norm(s in -1.5..1.5f64, p in exponent(), q in exponent(), c in -4.0..4.0f64,
                            i in 0usize..6, k in 0usize..6, hom in any::<bool>()) {
        let (op, sys, fs) = level();
        let params = BesovParams::new(s, p, q, hom);
        let (f, g) = (&fs[i], &fs[k]);
        let nf = besov_norm(op, sys, f, params).unwrap();
        let ng = besov_norm(op, sys, g, params).unwrap();
        let scaled = besov_norm(op, sys, &f.scaled(Complex64::new(c, 0.0)), params).unwrap();
        prop_assert!((scaled - c.abs() * nf).abs() <= 1e-12 * nf.max(1e-300) * c.abs().max(1.0));
        let sum = besov_norm(op, sys, &f.add(g).unwrap(), params).unwrap();
        prop_assert!(sum <= (nf + ng) * (1.0 + 1e-12));
    }

    #[test]
    fn diagonal_lorentz_norm_is_within_hardy_bounds_of_lp(p in 1.05..10.0f64, i in 0usize..6) {
        // The norm is built on f**, so f* <= f** and Hardy's inequality bracket it.
        let (_, _, fs) = level();
        let a = lorentz_norm(&fs[i], p, p).unwrap();
        let b = lp_norm(&fs[i], p).unwrap();
        prop_assert!(a >= b * (1.0 - 1e-9), "{} vs {}", a, b);
        prop_assert!(a <= p / (p - 1.0) * b * (1.0 + 1e-9), "{} vs {}", a, b);
    }

    #[test]
    fn lorentz_norms_decrease_in_q(p in 1.1..6.0f64, q0 in 1.0..6.0f64, dq in 0.0..6.0f64, i in 0usize..6) {
        let (_, _, fs) = level();
        let a = lorentz_norm(&fs[i], p, q0).unwrap();
        let b = lorentz_norm(&fs[i], p, q0 + dq).unwrap();
        let w = lorentz_norm(&fs[i], p, f64::INFINITY).unwrap();
        prop_assert!(b <= a * (1.0 + 1e-9));
        prop_assert!(w <= b * (1.0 + 1e-9));
    }
}
