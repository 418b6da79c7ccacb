//! Open sets as masked lattices.
//!
//! A domain is a predicate over R^n together with a bounding box. The grid keeps
//! the lattice nodes `k·h` (k ∈ Z^n) that lie strictly inside the box and satisfy
//! the predicate; every other lattice node carries the Dirichlet value zero.
//! Each node owns the cell measure `h^n`.

use std::collections::VecDeque;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the number of interior cells a grid may hold.
pub const DEFAULT_CELL_CAP: usize = 1 << 20;

/// Point-membership test used by [`Shape::Predicate`].
#[derive(Clone)]
pub struct Predicate(pub Arc<dyn Fn(&[f64]) -> bool + Send + Sync>);

impl Predicate {
    pub fn new(f: impl Fn(&[f64]) -> bool + Send + Sync + 'static) -> Self {
        Predicate(Arc::new(f))
    }
}

impl fmt::Debug for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Predicate(..)")
    }
}

/// Composable description of an open set.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    /// Open box `lo < x < hi` componentwise.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// Open ball `|x - center| < radius`.
    Ball { center: Vec<f64>, radius: f64 },
    /// Open half-space `normal · x < offset`.
    HalfSpace { normal: Vec<f64>, offset: f64 },
    Union { parts: Vec<Shape> },
    Intersection { parts: Vec<Shape> },
    Complement { inner: std::boxed::Box<Shape> },
    #[serde(skip)]
    Predicate(Predicate),
}

impl Shape {
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Shape::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(&xi, (&a, &b))| a < xi && xi < b),
            Shape::Ball { center, radius } => {
                let d2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                d2 < radius * radius
            }
            Shape::HalfSpace { normal, offset } => {
                x.iter().zip(normal).map(|(a, b)| a * b).sum::<f64>() < *offset
            }
            Shape::Union { parts } => parts.iter().any(|s| s.contains(x)),
            Shape::Intersection { parts } => parts.iter().all(|s| s.contains(x)),
            Shape::Complement { inner } => !inner.contains(x),
            Shape::Predicate(p) => (p.0)(x),
        }
    }

    fn check_dimension(&self, n: usize) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidDomain(format!("{what} has wrong dimension")));
        match self {
            Shape::Box { lo, hi } => {
                if lo.len() != n || hi.len() != n {
                    return bad("box");
                }
            }
            Shape::Ball { center, radius } => {
                if center.len() != n {
                    return bad("ball");
                }
                if !(*radius > 0.0) {
                    return Err(Error::InvalidDomain("ball radius must be positive".into()));
                }
            }
            Shape::HalfSpace { normal, .. } => {
                if normal.len() != n {
                    return bad("half-space");
                }
            }
            Shape::Union { parts } | Shape::Intersection { parts } => {
                for p in parts {
                    p.check_dimension(n)?;
                }
            }
            Shape::Complement { inner } => inner.check_dimension(n)?,
            Shape::Predicate(_) => {}
        }
        Ok(())
    }
}

/// An open set Ω ⊂ R^n with its bounding box.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub dimension: usize,
    /// One `[lo, hi]` pair per axis.
    pub bbox: Vec<[f64; 2]>,
    pub shape: Shape,
}

impl DomainSpec {
    pub fn interval(a: f64, b: f64) -> Self {
        DomainSpec {
            dimension: 1,
            bbox: vec![[a, b]],
            shape: Shape::Box { lo: vec![a], hi: vec![b] },
        }
    }

    pub fn cuboid(lo: &[f64], hi: &[f64]) -> Self {
        DomainSpec {
            dimension: lo.len(),
            bbox: lo.iter().zip(hi).map(|(&a, &b)| [a, b]).collect(),
            shape: Shape::Box { lo: lo.to_vec(), hi: hi.to_vec() },
        }
    }

    pub fn ball(center: &[f64], radius: f64) -> Self {
        DomainSpec {
            dimension: center.len(),
            bbox: center.iter().map(|&c| [c - radius, c + radius]).collect(),
            shape: Shape::Ball { center: center.to_vec(), radius },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dimension) {
            return Err(Error::UnsupportedDimension(self.dimension));
        }
        if self.bbox.len() != self.dimension {
            return Err(Error::InvalidDomain("bounding box has wrong dimension".into()));
        }
        for &[a, b] in &self.bbox {
            if !(a.is_finite() && b.is_finite() && b > a) {
                return Err(Error::InvalidDomain(format!("degenerate bounding box side [{a}, {b}]")));
            }
        }
        self.shape.check_dimension(self.dimension)
    }
}

/// Lattice nodes of Ω at spacing `h`.
#[derive(Debug)]
pub struct Grid {
    dim: usize,
    h: f64,
    bbox: Vec<[f64; 2]>,
    lattice_lo: [i64; 3],
    lattice_shape: [usize; 3],
    index: Vec<u32>,
    cells: Vec<[i64; 3]>,
}

const NO_CELL: u32 = u32::MAX;

fn lattice_range(a: f64, b: f64, h: f64) -> (i64, i64) {
    let mut lo = (a / h).floor() as i64;
    while (lo as f64) * h <= a {
        lo += 1;
    }
    let mut hi = (b / h).ceil() as i64;
    while (hi as f64) * h >= b {
        hi -= 1;
    }
    (lo, hi)
}

impl Grid {
    pub fn build(spec: &DomainSpec, h: f64) -> Result<Arc<Grid>> {
        Self::build_capped(spec, h, DEFAULT_CELL_CAP)
    }

    pub fn build_capped(spec: &DomainSpec, h: f64, cap: usize) -> Result<Arc<Grid>> {
        spec.validate()?;
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidDomain(format!("spacing must be positive, got {h}")));
        }
        let n = spec.dimension;
        let mut lattice_lo = [0i64; 3];
        let mut lattice_shape = [1usize; 3];
        for (axis, &[a, b]) in spec.bbox.iter().enumerate() {
            if b - a < 2.0 * h {
                return Err(Error::InvalidDomain(format!(
                    "bounding box side {} shorter than 2h = {}",
                    b - a,
                    2.0 * h
                )));
            }
            let (lo, hi) = lattice_range(a, b, h);
            if hi < lo {
                return Err(Error::EmptyDomain);
            }
            lattice_lo[axis] = lo;
            lattice_shape[axis] = (hi - lo + 1) as usize;
        }
        let candidates: usize = lattice_shape.iter().product();
        if candidates > cap.saturating_mul(64) {
            return Err(Error::BudgetExceeded { cells: candidates, cap });
        }
        let mut index = vec![NO_CELL; candidates];
        let mut cells = Vec::new();
        let mut x = [0.0; 3];
        for flat in 0..candidates {
            let k = unflatten(flat, &lattice_lo, &lattice_shape);
            for axis in 0..n {
                x[axis] = k[axis] as f64 * h;
            }
            if spec.shape.contains(&x[..n]) {
                if cells.len() >= cap {
                    return Err(Error::BudgetExceeded { cells: cells.len() + 1, cap });
                }
                index[flat] = cells.len() as u32;
                cells.push(k);
            }
        }
        if cells.is_empty() {
            return Err(Error::EmptyDomain);
        }
        Ok(Arc::new(Grid {
            dim: n,
            h,
            bbox: spec.bbox.clone(),
            lattice_lo,
            lattice_shape,
            index,
            cells,
        }))
    }

    /// Rebuilds a grid from its lattice indices (used by the operator cache).
    pub fn from_cells(dim: usize, h: f64, bbox: Vec<[f64; 2]>, cells: Vec<[i64; 3]>) -> Result<Arc<Grid>> {
        if cells.is_empty() {
            return Err(Error::EmptyDomain);
        }
        if !(1..=3).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        let mut lattice_lo = [0i64; 3];
        let mut lattice_shape = [1usize; 3];
        for axis in 0..dim {
            let lo = cells.iter().map(|c| c[axis]).min().unwrap();
            let hi = cells.iter().map(|c| c[axis]).max().unwrap();
            lattice_lo[axis] = lo;
            lattice_shape[axis] = (hi - lo + 1) as usize;
        }
        let mut index = vec![NO_CELL; lattice_shape.iter().product()];
        for (i, k) in cells.iter().enumerate() {
            let flat = flatten(k, &lattice_lo, &lattice_shape).expect("cell inside its own hull");
            index[flat] = i as u32;
        }
        Ok(Arc::new(Grid { dim, h, bbox, lattice_lo, lattice_shape, index, cells }))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn bbox(&self) -> &[[f64; 2]] {
        &self.bbox
    }

    /// `h^n`.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    /// Discrete measure of Ω, `N h^n`.
    pub fn measure(&self) -> f64 {
        self.len() as f64 * self.cell_volume()
    }

    pub fn cells(&self) -> &[[i64; 3]] {
        &self.cells
    }

    pub fn lattice_index(&self, i: usize) -> [i64; 3] {
        self.cells[i]
    }

    pub fn cell_of(&self, k: [i64; 3]) -> Option<usize> {
        let flat = flatten(&k, &self.lattice_lo, &self.lattice_shape)?;
        match self.index[flat] {
            NO_CELL => None,
            i => Some(i as usize),
        }
    }

    /// Coordinates of node `i`; unused axes are zero.
    pub fn coords(&self, i: usize) -> [f64; 3] {
        let k = self.cells[i];
        let mut x = [0.0; 3];
        for axis in 0..self.dim {
            x[axis] = k[axis] as f64 * self.h;
        }
        x
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.cells[i], self.cells[j]);
        let mut d2 = 0.0;
        for axis in 0..self.dim {
            let d = (a[axis] - b[axis]) as f64;
            d2 += d * d;
        }
        d2.sqrt() * self.h
    }

    /// Neighbor of node `i` one lattice step along `axis` (`step` is ±1).
    pub fn neighbor(&self, i: usize, axis: usize, step: i64) -> Option<usize> {
        let mut k = self.cells[i];
        k[axis] += step;
        self.cell_of(k)
    }

    /// Lattice-step distance from each node to the nearest node outside Ω
    /// (1 for nodes with a missing neighbor).
    pub fn boundary_distance(&self) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.len()];
        let mut queue = VecDeque::new();
        for i in 0..self.len() {
            let exposed = (0..self.dim)
                .any(|a| self.neighbor(i, a, 1).is_none() || self.neighbor(i, a, -1).is_none());
            if exposed {
                dist[i] = 1;
                queue.push_back(i);
            }
        }
        while let Some(i) = queue.pop_front() {
            for a in 0..self.dim {
                for step in [-1, 1] {
                    if let Some(j) = self.neighbor(i, a, step) {
                        if dist[j] == usize::MAX {
                            dist[j] = dist[i] + 1;
                            queue.push_back(j);
                        }
                    }
                }
            }
        }
        dist
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        std::ptr::eq(self, other)
            || (self.dim == other.dim && self.h.to_bits() == other.h.to_bits() && self.cells == other.cells)
    }
}

fn unflatten(mut flat: usize, lo: &[i64; 3], shape: &[usize; 3]) -> [i64; 3] {
    let mut k = [0i64; 3];
    for axis in (0..3).rev() {
        k[axis] = lo[axis] + (flat % shape[axis]) as i64;
        flat /= shape[axis];
    }
    k
}

fn flatten(k: &[i64; 3], lo: &[i64; 3], shape: &[usize; 3]) -> Option<usize> {
    let mut flat = 0usize;
    for axis in 0..3 {
        let off = k[axis] - lo[axis];
        if off < 0 || off as usize >= shape[axis] {
            return None;
        }
        flat = flat * shape[axis] + off as usize;
    }
    Some(flat)
}

/// One complex value per interior node.
#[derive(Clone, Debug)]
pub struct GridFunction {
    grid: Arc<Grid>,
    values: Vec<Complex64>,
    diagnostic: bool,
}

impl GridFunction {
    pub fn new(grid: Arc<Grid>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "{} values for a grid with {} cells",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::InvalidParameter("grid function has non-finite values".into()));
        }
        Ok(GridFunction { grid, values, diagnostic: false })
    }

    /// Wraps values without the finiteness check; the result is marked as a
    /// diagnostic artifact.
    pub fn diagnostic(grid: Arc<Grid>, values: Vec<Complex64>) -> Self {
        assert_eq!(values.len(), grid.len());
        GridFunction { grid, values, diagnostic: true }
    }

    pub fn from_real(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        Self::new(grid, values.into_iter().map(|v| Complex64::new(v, 0.0)).collect())
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let n = grid.dim();
        let values = (0..grid.len()).map(|i| f(&grid.coords(i)[..n])).collect();
        Self::from_real(grid, values)
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.len();
        GridFunction { grid, values: vec![Complex64::new(0.0, 0.0); n], diagnostic: false }
    }

    pub fn constant(grid: Arc<Grid>, c: f64) -> Self {
        let n = grid.len();
        GridFunction { grid, values: vec![Complex64::new(c, 0.0); n], diagnostic: false }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn is_diagnostic(&self) -> bool {
        self.diagnostic
    }

    pub fn is_real(&self) -> bool {
        self.values.iter().all(|v| v.im == 0.0)
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn imag_parts(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.im).collect()
    }

    pub fn moduli(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    pub fn scaled(&self, alpha: Complex64) -> Self {
        GridFunction {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * alpha).collect(),
            diagnostic: self.diagnostic,
        }
    }

    pub fn add(&self, other: &GridFunction) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &GridFunction) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Pointwise product.
    pub fn mul(&self, other: &GridFunction) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    fn zip_with(&self, other: &GridFunction, op: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Self> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch);
        }
        Ok(GridFunction {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| op(a, b)).collect(),
            diagnostic: self.diagnostic || other.diagnostic,
        })
    }

    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        lp_norm_values(&self.values, self.grid.cell_volume(), p)
    }

    pub fn pairing(&self, other: &GridFunction) -> Result<Complex64> {
        pairing(self, other)
    }
}

/// Discrete `L^p(Ω)` norm of raw cell values with cell measure `w`.
pub fn lp_norm_values(values: &[Complex64], w: f64, p: f64) -> Result<f64> {
    check_exponent(p)?;
    let max = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if p.is_infinite() || max == 0.0 {
        return Ok(max);
    }
    if p == 1.0 {
        return Ok(w * values.iter().map(|v| v.norm()).sum::<f64>());
    }
    if p == 2.0 {
        return Ok((w * values.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt());
    }
    let s: f64 = values.iter().map(|v| (v.norm() / max).powf(p)).sum();
    Ok(max * (w * s).powf(1.0 / p))
}

pub(crate) fn check_exponent(p: f64) -> Result<()> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidExponent(p));
    }
    Ok(())
}

/// Hölder conjugate exponent `p' = p/(p-1)`.
pub fn conjugate_exponent(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

pub fn lp_norm(f: &GridFunction, p: f64) -> Result<f64> {
    f.lp_norm(p)
}

/// `h^n Σ f_i conj(g_i)`.
pub fn pairing(f: &GridFunction, g: &GridFunction) -> Result<Complex64> {
    if !f.grid.same_as(&g.grid) {
        return Err(Error::GridMismatch);
    }
    let s: Complex64 = f.values.iter().zip(&g.values).map(|(a, b)| a * b.conj()).sum();
    Ok(s * f.grid.cell_volume())
}

/// Extends `f` by zero to a larger grid on the same lattice.
pub fn zero_extend(f: &GridFunction, ambient: &Arc<Grid>) -> Result<GridFunction> {
    let g = f.grid();
    if g.dim() != ambient.dim() {
        return Err(Error::IncompatibleSpacing("dimensions differ".into()));
    }
    if g.h().to_bits() != ambient.h().to_bits() {
        return Err(Error::IncompatibleSpacing(format!("h = {} vs {}", g.h(), ambient.h())));
    }
    let mut values = vec![Complex64::new(0.0, 0.0); ambient.len()];
    for (i, &k) in g.cells().iter().enumerate() {
        let j = ambient
            .cell_of(k)
            .ok_or_else(|| Error::IncompatibleSpacing("ambient grid does not cover Ω".into()))?;
        values[j] = f.values[i];
    }
    Ok(GridFunction { grid: ambient.clone(), values, diagnostic: f.diagnostic })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_interval(h: f64) -> Arc<Grid> {
        Grid::build(&DomainSpec::interval(0.0, 1.0), h).unwrap()
    }

    #[test]
    fn interval_node_counts() {
        assert_eq!(unit_interval(0.5).len(), 1);
        assert_eq!(unit_interval(0.5).coords(0)[0], 0.5);
        let g = unit_interval(0.125);
        assert_eq!(g.len(), 7);
        for i in 0..7 {
            assert_eq!(g.coords(i)[0], (i + 1) as f64 / 8.0);
        }
    }

    #[test]
    fn disk_count_matches_brute_force() {
        let g = Grid::build(&DomainSpec::ball(&[0.0, 0.0], 1.0), 0.25).unwrap();
        let mut count = 0;
        for i in -4i64..=4 {
            for j in -4i64..=4 {
                if i * i + j * j < 16 {
                    count += 1;
                }
            }
        }
        assert_eq!(g.len(), count);
        assert_eq!(count, 45);
    }

    #[test]
    fn composite_shapes() {
        // Unit square minus the closed quarter x <= 0.5, y <= 0.5.
        let spec = DomainSpec {
            dimension: 2,
            bbox: vec![[0.0, 1.0], [0.0, 1.0]],
            shape: Shape::Intersection {
                parts: vec![
                    Shape::Box { lo: vec![0.0, 0.0], hi: vec![1.0, 1.0] },
                    Shape::Complement {
                        inner: std::boxed::Box::new(Shape::Box { lo: vec![-1.0, -1.0], hi: vec![0.6, 0.6] }),
                    },
                ],
            },
        };
        let g = Grid::build(&spec, 0.25).unwrap();
        // 3x3 interior nodes minus the 2x2 block {0.25, 0.5}^2.
        assert_eq!(g.len(), 5);
        let p = DomainSpec {
            dimension: 1,
            bbox: vec![[0.0, 1.0]],
            shape: Shape::Predicate(Predicate::new(|x| x[0] > 0.3)),
        };
        assert_eq!(Grid::build(&p, 0.125).unwrap().len(), 5);
        let hs = DomainSpec {
            dimension: 2,
            bbox: vec![[0.0, 1.0], [0.0, 1.0]],
            shape: Shape::HalfSpace { normal: vec![1.0, 1.0], offset: 1.0 },
        };
        // Nodes (i, j)/4 with i, j in 1..=3 and i + j < 4.
        assert_eq!(Grid::build(&hs, 0.25).unwrap().len(), 3);
    }

    #[test]
    fn grid_errors() {
        let empty = DomainSpec {
            dimension: 1,
            bbox: vec![[0.0, 1.0]],
            shape: Shape::Ball { center: vec![5.0], radius: 0.1 },
        };
        assert!(matches!(Grid::build(&empty, 0.1), Err(Error::EmptyDomain)));
        assert!(matches!(
            Grid::build_capped(&DomainSpec::interval(0.0, 1.0), 1.0 / 64.0, 10),
            Err(Error::BudgetExceeded { .. })
        ));
        assert!(Grid::build(&DomainSpec::interval(0.0, 1.0), 0.75).is_err());
        assert!(Grid::build(&DomainSpec::interval(0.0, 1.0), -0.1).is_err());
        let bad_dim = DomainSpec { dimension: 4, bbox: vec![[0.0, 1.0]; 4], shape: Shape::Box { lo: vec![0.0; 4], hi: vec![1.0; 4] } };
        assert!(matches!(Grid::build(&bad_dim, 0.25), Err(Error::UnsupportedDimension(4))));
    }

    #[test]
    fn grid_is_pure() {
        let spec = DomainSpec::ball(&[0.1, -0.2], 0.9);
        let a = Grid::build(&spec, 0.05).unwrap();
        let b = Grid::build(&spec, 0.05).unwrap();
        assert!(a.same_as(&b));
        assert_eq!(a.cells(), b.cells());
    }

    #[test]
    fn lp_norm_basics() {
        let g = unit_interval(0.125);
        let one = GridFunction::constant(g.clone(), 1.0);
        assert_eq!(one.lp_norm(1.0).unwrap(), 7.0 / 8.0);
        assert_eq!(GridFunction::constant(g.clone(), -2.5).lp_norm(f64::INFINITY).unwrap(), 2.5);
        assert!(matches!(one.lp_norm(0.5), Err(Error::InvalidExponent(_))));
        // Direct summation oracle.
        let vals: Vec<f64> = (0..7).map(|i| ((i * 37 % 11) as f64 - 5.0) / 3.0).collect();
        let f = GridFunction::from_real(g, vals.clone()).unwrap();
        let oracle = (vals.iter().map(|v| v * v).sum::<f64>() / 8.0).sqrt();
        assert!((f.lp_norm(2.0).unwrap() - oracle).abs() <= 1e-14 * oracle);
        let oracle3 = (vals.iter().map(|v| v.abs().powi(3)).sum::<f64>() / 8.0).cbrt();
        assert!((f.lp_norm(3.0).unwrap() - oracle3).abs() <= 1e-14 * oracle3);
    }

    #[test]
    fn pairing_and_extension() {
        let g = unit_interval(0.125);
        let f = GridFunction::from_fn(g.clone(), |x| x[0] * (1.0 - x[0])).unwrap();
        let ff = pairing(&f, &f).unwrap();
        assert!((ff.re - f.lp_norm(2.0).unwrap().powi(2)).abs() < 1e-15);
        assert_eq!(ff.im, 0.0);

        let ambient = Grid::build(&DomainSpec::interval(-1.0, 2.0), 0.125).unwrap();
        let one = GridFunction::constant(g.clone(), 1.0);
        let ext = zero_extend(&one, &ambient).unwrap();
        for i in 0..ambient.len() {
            let x = ambient.coords(i)[0];
            let expected = if x > 0.0 && x < 1.0 { 1.0 } else { 0.0 };
            assert_eq!(ext.values()[i].re, expected);
        }
        for p in [1.0, 2.0, 3.5, f64::INFINITY] {
            assert!((ext.lp_norm(p).unwrap() - one.lp_norm(p).unwrap()).abs() < 1e-15);
        }
        let outside = GridFunction::from_fn(ambient.clone(), |x| if x[0] > 0.0 && x[0] < 1.0 { 0.0 } else { 1.0 }).unwrap();
        assert_eq!(pairing(&ext, &outside).unwrap().norm(), 0.0);

        let other = Grid::build(&DomainSpec::interval(-1.0, 2.0), 0.25).unwrap();
        assert!(matches!(zero_extend(&one, &other), Err(Error::IncompatibleSpacing(_))));
        let g2 = unit_interval(0.25);
        assert!(matches!(pairing(&one, &GridFunction::constant(g2, 1.0)), Err(Error::GridMismatch)));
    }

    #[test]
    fn boundary_distance_on_interval() {
        let g = unit_interval(0.125);
        assert_eq!(g.boundary_distance(), vec![1, 2, 3, 4, 3, 2, 1]);
    }

    #[test]
    fn shape_roundtrips_through_json() {
        let spec = DomainSpec::ball(&[0.0, 0.0], 1.0);
        let s = serde_json::to_string(&spec).unwrap();
        let back: DomainSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(Grid::build(&back, 0.25).unwrap().len(), 45);
    }
}
