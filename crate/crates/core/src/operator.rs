//! Discrete Dirichlet Laplacian `A_0`, Schrödinger operator `A_V = A_0 + diag(V)`,
//! dense eigendata and the on-disk operator cache.
//!
//! # Cache layout
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! magic      b"SBOP"
//! version    u32 (= 1)
//! dim        u32
//! h          f64
//! N          u64
//! flags      u32   bit 0: potential present, bit 1: eigendata present
//! bbox       dim × [f64; 2]
//! cells      N × dim × i64        lattice indices
//! nnz        u64
//! row_ptr    (N + 1) × u64
//! col_idx    nnz × u64
//! values     nnz × f64
//! potential  N × f64              if bit 0
//! eigvals    N × f64              if bit 1, ascending
//! eigvecs    N × N × f64          if bit 1, column-major, one eigenvector per column
//! ```

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use faer::Mat;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{Grid, GridFunction};
use crate::potential::{KatoReport, Potential};

/// Default largest N for which dense eigendata is computed.
pub const DEFAULT_DENSE_CAP: usize = 4096;

/// Symmetric matrix in compressed sparse row form.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSym {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSym {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).find(|&(j, _)| j == i).map_or(0.0, |(_, v)| v))
            .collect()
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            y[i] = s;
        }
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Gershgorin enclosure `[lo, hi]` of the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.n {
            let mut d = 0.0;
            let mut r = 0.0;
            for (j, v) in self.row(i) {
                if j == i {
                    d = v;
                } else {
                    r += v.abs();
                }
            }
            lo = lo.min(d - r);
            hi = hi.max(d + r);
        }
        (lo, hi)
    }

    /// Exact structural and numerical symmetry.
    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| {
            self.row(i).all(|(j, v)| self.row(j).any(|(k, w)| k == i && w.to_bits() == v.to_bits()))
        })
    }
}

/// Ascending eigenvalues and orthonormal (Euclidean) eigenvectors as columns.
#[derive(Debug)]
pub struct EigenData {
    pub values: Vec<f64>,
    pub vectors: Mat<f64>,
}

/// `A_0` or `A_V` on a grid, optionally with its eigendecomposition.
#[derive(Clone, Debug)]
pub struct SpectralOperator {
    grid: Arc<Grid>,
    matrix: Arc<SparseSym>,
    potential: Option<Arc<Potential>>,
    eigen: Option<Arc<EigenData>>,
}

/// Dirichlet Laplacian by the (2n+1)-point stencil with mask truncation.
pub fn assemble_laplacian(grid: &Arc<Grid>) -> SpectralOperator {
    SpectralOperator {
        grid: grid.clone(),
        matrix: Arc::new(stencil(grid, None)),
        potential: None,
        eigen: None,
    }
}

/// `A_0 + diag(V)`.
pub fn assemble_schrodinger(grid: &Arc<Grid>, v: &Potential) -> Result<SpectralOperator> {
    if !grid.same_as(v.grid()) {
        return Err(Error::GridMismatch);
    }
    Ok(SpectralOperator {
        grid: grid.clone(),
        matrix: Arc::new(stencil(grid, Some(v.values()))),
        potential: Some(Arc::new(v.clone())),
        eigen: None,
    })
}

fn stencil(grid: &Grid, v: Option<&[f64]>) -> SparseSym {
    let n = grid.len();
    let dim = grid.dim();
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::with_capacity(n * (2 * dim + 1));
    let mut values = Vec::with_capacity(n * (2 * dim + 1));
    row_ptr.push(0);
    for i in 0..n {
        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(2 * dim + 1);
        entries.push((i, 2.0 * dim as f64 * inv_h2 + v.map_or(0.0, |v| v[i])));
        for axis in 0..dim {
            for step in [-1, 1] {
                if let Some(j) = grid.neighbor(i, axis, step) {
                    entries.push((j, -inv_h2));
                }
            }
        }
        entries.sort_by_key(|e| e.0);
        for (j, val) in entries {
            col_idx.push(j);
            values.push(val);
        }
        row_ptr.push(col_idx.len());
    }
    SparseSym { n, row_ptr, col_idx, values }
}

/// Outcome of the zero-eigenvalue check against the Hardy certificate.
#[derive(Clone, Debug, Serialize)]
pub struct ZeroEigenvalueDiagnostic {
    pub lambda_min: f64,
    pub certificate: Option<f64>,
    /// True when the certificate is positive, so `lambda_min > 0` is required.
    pub asserted: bool,
    /// False only when the assertion is active and violated.
    pub holds: bool,
}

impl SpectralOperator {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn matrix(&self) -> &SparseSym {
        &self.matrix
    }

    pub fn potential(&self) -> Option<&Potential> {
        self.potential.as_deref()
    }

    pub fn eigen(&self) -> Option<&EigenData> {
        self.eigen.as_deref()
    }

    pub fn eigen_or_err(&self) -> Result<&EigenData> {
        self.eigen.as_deref().ok_or(Error::MissingEigendata)
    }

    /// The same operator without potential.
    pub fn laplacian(&self) -> SpectralOperator {
        if self.potential.is_none() {
            return self.clone();
        }
        assemble_laplacian(&self.grid)
    }

    pub fn eigendecompose(&self) -> Result<SpectralOperator> {
        self.eigendecompose_capped(DEFAULT_DENSE_CAP)
    }

    pub fn eigendecompose_capped(&self, cap: usize) -> Result<SpectralOperator> {
        if self.eigen.is_some() {
            return Ok(self.clone());
        }
        let n = self.len();
        if n > cap {
            return Err(Error::DenseCapExceeded { n, cap });
        }
        let evd = self
            .matrix
            .to_dense()
            .self_adjoint_eigen(faer::Side::Lower)
            .map_err(|e| Error::SolverFailure(format!("{e:?}")))?;
        let values: Vec<f64> = (0..n).map(|k| evd.S().column_vector()[k]).collect();
        let vectors = evd.U().to_owned();
        Ok(SpectralOperator { eigen: Some(Arc::new(EigenData { values, vectors })), ..self.clone() })
    }

    /// `A + cI`. Eigenvectors are reused and eigenvalues shifted by `c`, so no
    /// new decomposition is computed.
    pub fn shifted(&self, c: f64) -> Result<SpectralOperator> {
        if !c.is_finite() {
            return Err(Error::InvalidParameter(format!("shift {c} is not finite")));
        }
        let base = match &self.potential {
            Some(v) => v.values().to_vec(),
            None => vec![0.0; self.len()],
        };
        let v = Potential::from_values(self.grid.clone(), base.into_iter().map(|x| x + c).collect())?;
        let mut out = assemble_schrodinger(&self.grid, &v)?;
        if let Some(e) = &self.eigen {
            let values = e.values.iter().map(|l| l + c).collect();
            out.eigen = Some(Arc::new(EigenData { values, vectors: e.vectors.clone() }));
        }
        Ok(out)
    }

    pub fn eigenvalues(&self) -> Result<&[f64]> {
        Ok(&self.eigen_or_err()?.values)
    }

    pub fn lambda_min(&self) -> Result<f64> {
        Ok(self.eigenvalues()?[0])
    }

    pub fn lambda_max(&self) -> Result<f64> {
        Ok(*self.eigenvalues()?.last().expect("non-empty grid"))
    }

    /// `sqrt(max(0, -λ_min))`, the smallest `λ_0` with `A ≥ -λ_0² I`.
    pub fn lambda0(&self) -> Result<f64> {
        Ok((-self.lambda_min()?).max(0.0).sqrt())
    }

    /// Exact spectral bounds when eigendata exists, Gershgorin otherwise.
    pub fn spectrum_bounds(&self) -> (f64, f64) {
        match &self.eigen {
            Some(e) => (e.values[0], *e.values.last().unwrap()),
            None => self.matrix.gershgorin(),
        }
    }

    pub fn apply_matrix(&self, f: &GridFunction) -> Result<GridFunction> {
        self.check_grid(f)?;
        let n = self.len();
        let (re, im) = (f.real_parts(), f.imag_parts());
        let mut are = vec![0.0; n];
        let mut aim = vec![0.0; n];
        self.matrix.matvec(&re, &mut are);
        self.matrix.matvec(&im, &mut aim);
        let values = are.into_iter().zip(aim).map(|(a, b)| Complex64::new(a, b)).collect();
        GridFunction::new(self.grid.clone(), values)
    }

    pub(crate) fn check_grid(&self, f: &GridFunction) -> Result<()> {
        if self.grid.same_as(f.grid()) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// `(f, A f)` in `L²(Ω)`; real because `A` is symmetric.
    pub fn quadratic_form(&self, f: &GridFunction) -> Result<f64> {
        let af = self.apply_matrix(f)?;
        Ok(f.pairing(&af)?.re)
    }

    /// `‖∇_h f‖²`: forward differences over every lattice edge touching Ω,
    /// including edges to the zero boundary values.
    pub fn gradient_energy(&self, f: &GridFunction) -> Result<f64> {
        self.check_grid(f)?;
        let g = &self.grid;
        let v = f.values();
        let mut s = 0.0;
        for i in 0..g.len() {
            for axis in 0..g.dim() {
                match g.neighbor(i, axis, 1) {
                    Some(j) => s += (v[i] - v[j]).norm_sqr(),
                    None => s += v[i].norm_sqr(),
                }
                if g.neighbor(i, axis, -1).is_none() {
                    s += v[i].norm_sqr();
                }
            }
        }
        Ok(s * g.cell_volume() / (g.h() * g.h()))
    }

    /// `Σ V |f|² h^n`.
    pub fn potential_energy(&self, f: &GridFunction) -> Result<f64> {
        self.check_grid(f)?;
        let Some(p) = &self.potential else { return Ok(0.0) };
        let s: f64 = p.values().iter().zip(f.values()).map(|(v, x)| v * x.norm_sqr()).sum();
        Ok(s * self.grid.cell_volume())
    }

    /// Eigenvector `k` (ascending order) normalized in `L²(Ω)`.
    pub fn eigenfunction(&self, k: usize) -> Result<GridFunction> {
        let e = self.eigen_or_err()?;
        if k >= e.values.len() {
            return Err(Error::InvalidParameter(format!("eigen index {k} out of range")));
        }
        let scale = self.grid.cell_volume().powf(-0.5);
        GridFunction::from_real(self.grid.clone(), e.vectors.col_as_slice(k).iter().map(|u| u * scale).collect())
    }

    /// `max_k ‖A u_k - λ_k u_k‖ / (1 + |λ_k|)` and `‖UᵀU - I‖_max`.
    pub fn eigendata_errors(&self) -> Result<(f64, f64)> {
        let e = self.eigen_or_err()?;
        let n = self.len();
        let mut res = 0.0f64;
        let mut au = vec![0.0; n];
        for k in 0..n {
            let u = e.vectors.col_as_slice(k);
            self.matrix.matvec(u, &mut au);
            let r: f64 = au.iter().zip(u).map(|(a, b)| (a - e.values[k] * b).powi(2)).sum::<f64>().sqrt();
            res = res.max(r / (1.0 + e.values[k].abs()));
        }
        let utu = e.vectors.transpose() * &e.vectors;
        let mut orth = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                orth = orth.max((utu[(i, j)] - target).abs());
            }
        }
        Ok((res, orth))
    }

    /// Checks `λ_min > 0` whenever the Hardy certificate is positive (grids are
    /// always bounded).
    pub fn zero_eigenvalue_check(&self, kato: &KatoReport) -> Result<ZeroEigenvalueDiagnostic> {
        let lambda_min = self.lambda_min()?;
        let asserted = kato.certificate.is_some_and(|c| c > 0.0);
        Ok(ZeroEigenvalueDiagnostic {
            lambda_min,
            certificate: kato.certificate,
            asserted,
            holds: !asserted || lambda_min > 0.0,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        let g = &self.grid;
        let dim = g.dim();
        out.write_all(b"SBOP")?;
        out.write_all(&1u32.to_le_bytes())?;
        out.write_all(&(dim as u32).to_le_bytes())?;
        out.write_all(&g.h().to_le_bytes())?;
        out.write_all(&(g.len() as u64).to_le_bytes())?;
        let flags = u32::from(self.potential.is_some()) | (u32::from(self.eigen.is_some()) << 1);
        out.write_all(&flags.to_le_bytes())?;
        for &[a, b] in g.bbox() {
            out.write_all(&a.to_le_bytes())?;
            out.write_all(&b.to_le_bytes())?;
        }
        for c in g.cells() {
            for &k in &c[..dim] {
                out.write_all(&k.to_le_bytes())?;
            }
        }
        let m = &self.matrix;
        out.write_all(&(m.nnz() as u64).to_le_bytes())?;
        for &p in &m.row_ptr {
            out.write_all(&(p as u64).to_le_bytes())?;
        }
        for &c in &m.col_idx {
            out.write_all(&(c as u64).to_le_bytes())?;
        }
        for &v in &m.values {
            out.write_all(&v.to_le_bytes())?;
        }
        if let Some(p) = &self.potential {
            for &v in p.values() {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        if let Some(e) = &self.eigen {
            for &v in &e.values {
                out.write_all(&v.to_le_bytes())?;
            }
            for k in 0..g.len() {
                for &v in e.vectors.col_as_slice(k) {
                    out.write_all(&v.to_le_bytes())?;
                }
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<SpectralOperator> {
        let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"SBOP" {
            return Err(Error::CacheFormat("bad magic".into()));
        }
        if read_u32(&mut r)? != 1 {
            return Err(Error::CacheFormat("unsupported version".into()));
        }
        let dim = read_u32(&mut r)? as usize;
        if !(1..=3).contains(&dim) {
            return Err(Error::CacheFormat(format!("dimension {dim}")));
        }
        let h = read_f64(&mut r)?;
        let n = read_u64(&mut r)? as usize;
        let flags = read_u32(&mut r)?;
        let mut bbox = Vec::with_capacity(dim);
        for _ in 0..dim {
            bbox.push([read_f64(&mut r)?, read_f64(&mut r)?]);
        }
        let mut cells = Vec::with_capacity(n);
        for _ in 0..n {
            let mut c = [0i64; 3];
            for k in c.iter_mut().take(dim) {
                *k = read_i64(&mut r)?;
            }
            cells.push(c);
        }
        let grid = Grid::from_cells(dim, h, bbox, cells).map_err(|e| Error::CacheFormat(e.to_string()))?;
        let nnz = read_u64(&mut r)? as usize;
        let row_ptr = (0..=n).map(|_| read_u64(&mut r).map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
        let col_idx = (0..nnz).map(|_| read_u64(&mut r).map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
        let values = (0..nnz).map(|_| read_f64(&mut r)).collect::<Result<Vec<_>>>()?;
        if row_ptr.last() != Some(&nnz) || col_idx.iter().any(|&c| c >= n) {
            return Err(Error::CacheFormat("inconsistent CSR arrays".into()));
        }
        let matrix = SparseSym { n, row_ptr, col_idx, values };
        let potential = if flags & 1 != 0 {
            let v = (0..n).map(|_| read_f64(&mut r)).collect::<Result<Vec<_>>>()?;
            Some(Arc::new(Potential::from_values(grid.clone(), v)?))
        } else {
            None
        };
        let eigen = if flags & 2 != 0 {
            let values = (0..n).map(|_| read_f64(&mut r)).collect::<Result<Vec<_>>>()?;
            let mut vectors = Mat::zeros(n, n);
            for k in 0..n {
                for i in 0..n {
                    vectors[(i, k)] = read_f64(&mut r)?;
                }
            }
            Some(Arc::new(EigenData { values, vectors }))
        } else {
            None
        };
        Ok(SpectralOperator { grid, matrix: Arc::new(matrix), potential, eigen })
    }
}

fn read_bytes<const K: usize>(r: &mut impl Read) -> Result<[u8; K]> {
    let mut b = [0u8; K];
    r.read_exact(&mut b).map_err(|e| Error::CacheFormat(format!("truncated file: {e}")))?;
    Ok(b)
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    Ok(u32::from_le_bytes(read_bytes(r)?))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    Ok(u64::from_le_bytes(read_bytes(r)?))
}

fn read_i64(r: &mut impl Read) -> Result<i64> {
    Ok(i64::from_le_bytes(read_bytes(r)?))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    Ok(f64::from_le_bytes(read_bytes(r)?))
}

/// `(4/h²) sin²(kπ/(2(m+1)))`, `k = 1..m`: eigenvalues of the Dirichlet
/// Laplacian on an interval of length `(m+1)h`.
pub fn interval_eigenvalues(m: usize, h: f64) -> Vec<f64> {
    (1..=m)
        .map(|k| {
            let s = (k as f64 * std::f64::consts::PI / (2.0 * (m + 1) as f64)).sin();
            4.0 / (h * h) * s * s
        })
        .collect()
}
