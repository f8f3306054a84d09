//! Dense complex linear algebra over small composite Hilbert spaces.
//!
//! Composite indices are big-endian: the leftmost tensor factor is the most
//! significant digit, so `tensor(a, b)` places `b` blocks inside each entry of
//! `a`. Every layout-aware routine here (partial trace, partial transpose,
//! factor permutation, trace-and-replace) uses the same digit order.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = nalgebra::Complex<f64>;

/// Largest row or column count any operator may have.
pub const MAX_DIM: usize = 64;

/// Absolute tolerance on the largest entry of `m - m†`.
pub const HERMITIAN_TOL: f64 = 1e-9;

pub const fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub const fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Dense complex matrix. Vectors are stored as single columns.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix(DMatrix<C64>);

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows(), self.cols())?;
        for r in 0..self.rows() {
            write!(f, "  ")?;
            for col in 0..self.cols() {
                let z = self.0[(r, col)];
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

fn check_dim(rows: usize, cols: usize) -> Result<()> {
    if rows > MAX_DIM || cols > MAX_DIM {
        return Err(Error::Capacity(format!(
            "{rows}x{cols} exceeds the {MAX_DIM}x{MAX_DIM} limit"
        )));
    }
    Ok(())
}

impl ComplexMatrix {
    /// Builds a matrix from row-major entries.
    pub fn from_row_major(rows: usize, cols: usize, entries: &[C64]) -> Result<Self> {
        check_dim(rows, cols)?;
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numerical("non-finite matrix entry".into()));
        }
        Ok(Self(DMatrix::from_row_slice(rows, cols, entries)))
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let cols = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != cols) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        let entries: Vec<C64> = rows.iter().flat_map(|row| row.iter().map(|&x| re(x))).collect();
        Self::from_row_major(r, cols, &entries)
    }

    /// Column vector.
    pub fn ket(amplitudes: &[C64]) -> Self {
        Self(DMatrix::from_column_slice(amplitudes.len(), 1, amplitudes))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(DMatrix::zeros(rows, cols))
    }

    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        let n = diag.len();
        let mut m = DMatrix::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        Self(m)
    }

    /// Computational basis ket |index⟩ of dimension `dim`.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = DMatrix::zeros(dim, 1);
        v[(index, 0)] = re(1.0);
        Self(v)
    }

    pub(crate) fn inner(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn get(&self, r: usize, col: usize) -> C64 {
        self.0[(r, col)]
    }

    pub fn set(&mut self, r: usize, col: usize, z: C64) {
        self.0[(r, col)] = z;
    }

    /// Entries in row-major order.
    pub fn to_row_major(&self) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for r in 0..self.rows() {
            for col in 0..self.cols() {
                out.push(self.0[(r, col)]);
            }
        }
        out
    }

    /// Column `j` as a plain amplitude vector.
    pub fn column(&self, j: usize) -> Vec<C64> {
        self.0.column(j).iter().copied().collect()
    }

    pub fn dagger(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn conj(&self) -> Self {
        Self(self.0.map(|z| z.conj()))
    }

    pub fn scale(&self, s: C64) -> Self {
        Self(&self.0 * s)
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(re(s))
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.0.shape(), other.0.shape(), "shape mismatch");
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Hilbert-Schmidt inner product tr(self† · other).
    pub fn hs_inner(&self, other: &Self) -> C64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a.conj() * b).sum()
    }

    /// Largest entry of `|m - m†|`. Infinite for non-square input.
    pub fn hermitian_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        self.max_abs_diff(&self.dagger())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol
    }

    /// Largest entry of `|u†u - I|`.
    pub fn unitary_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        (self.dagger() * self).max_abs_diff(&Self::identity(self.rows()))
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitary_deviation() <= tol
    }

    /// |v⟩⟨v| for a column vector.
    pub fn projector(&self) -> Self {
        Self(&self.0 * self.0.adjoint())
    }

    /// Euclidean norm of a column vector (Frobenius in general).
    pub fn norm(&self) -> f64 {
        self.frobenius_norm()
    }

    /// ⟨self|other⟩ for column vectors.
    pub fn inner_product(&self, other: &Self) -> C64 {
        self.hs_inner(other)
    }

    /// Symmetrized copy (m + m†)/2.
    pub fn hermitian_part(&self) -> Self {
        Self((&self.0 + self.0.adjoint()) * re(0.5))
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 * &rhs.0)
    }
}

impl Mul<&ComplexMatrix> for ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(self.0 * &rhs.0)
    }
}

impl Mul for ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(self.0 * rhs.0)
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 + &rhs.0)
    }
}

impl Add for ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(self.0 + rhs.0)
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 - &rhs.0)
    }
}

impl Sub for ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(self.0 - rhs.0)
    }
}

/// Ordered list of tensor factors with unique labels.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceLayout {
    factor_dims: Vec<usize>,
    labels: Vec<String>,
}

impl SpaceLayout {
    pub fn new<S: Into<String>>(factors: impl IntoIterator<Item = (S, usize)>) -> Result<Self> {
        let mut labels = Vec::new();
        let mut factor_dims = Vec::new();
        for (label, dim) in factors {
            let label = label.into();
            if dim == 0 {
                return Err(Error::InvalidLayout(format!("factor `{label}` has dimension 0")));
            }
            if labels.contains(&label) {
                return Err(Error::InvalidLayout(format!("duplicate label `{label}`")));
            }
            labels.push(label);
            factor_dims.push(dim);
        }
        let total = factor_dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::Capacity("layout dimension overflows".into()))?;
        if total > MAX_DIM {
            return Err(Error::Capacity(format!("layout dimension {total} exceeds {MAX_DIM}")));
        }
        Ok(Self { factor_dims, labels })
    }

    pub fn dims(&self) -> &[usize] {
        &self.factor_dims
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Ambient dimension: product of the factor dimensions.
    pub fn dim(&self) -> usize {
        self.factor_dims.iter().product()
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn dim_of(&self, label: &str) -> Result<usize> {
        Ok(self.factor_dims[self.index_of(label)?])
    }

    /// Sub-layout made of the given factor positions, in layout order.
    fn select(&self, positions: &[usize]) -> Self {
        Self {
            factor_dims: positions.iter().map(|&p| self.factor_dims[p]).collect(),
            labels: positions.iter().map(|&p| self.labels[p].clone()).collect(),
        }
    }

    /// Concatenation `self ⊗ other`.
    pub fn join(&self, other: &Self) -> Result<Self> {
        Self::new(
            self.labels
                .iter()
                .cloned()
                .zip(self.factor_dims.iter().copied())
                .chain(other.labels.iter().cloned().zip(other.factor_dims.iter().copied())),
        )
    }

    fn positions(&self, labels: &[&str]) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(labels.len());
        for l in labels {
            let p = self.index_of(l)?;
            if !out.contains(&p) {
                out.push(p);
            }
        }
        Ok(out)
    }

    fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut d = vec![0; self.factor_dims.len()];
        for k in (0..self.factor_dims.len()).rev() {
            d[k] = index % self.factor_dims[k];
            index /= self.factor_dims[k];
        }
        d
    }

    fn compose(&self, digits: &[usize]) -> usize {
        digits
            .iter()
            .zip(&self.factor_dims)
            .fold(0, |acc, (&d, &n)| acc * n + d)
    }
}

fn check_layout(m: &ComplexMatrix, layout: &SpaceLayout) -> Result<()> {
    if !m.is_square() || m.rows() != layout.dim() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} operator on a layout of dimension {}",
            m.rows(),
            m.cols(),
            layout.dim()
        )));
    }
    Ok(())
}

/// Kronecker product `a ⊗ b`, left factor most significant.
pub fn tensor(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    let rows = a
        .rows()
        .checked_mul(b.rows())
        .ok_or_else(|| Error::Capacity("row count overflows".into()))?;
    let cols = a
        .cols()
        .checked_mul(b.cols())
        .ok_or_else(|| Error::Capacity("column count overflows".into()))?;
    check_dim(rows, cols)?;
    Ok(ComplexMatrix(a.0.kronecker(&b.0)))
}

/// Left-to-right Kronecker product of several operands.
pub fn tensor_all<'a>(ops: impl IntoIterator<Item = &'a ComplexMatrix>) -> Result<ComplexMatrix> {
    let mut acc = ComplexMatrix::identity(1);
    for op in ops {
        acc = tensor(&acc, op)?;
    }
    Ok(acc)
}

/// Split of every composite index into (kept index, traced index).
struct IndexSplit {
    kept: Vec<usize>,
    traced: Vec<usize>,
    kept_dim: usize,
    traced_dim: usize,
}

impl IndexSplit {
    fn new(layout: &SpaceLayout, traced_positions: &[usize]) -> Self {
        let kept_positions: Vec<usize> = (0..layout.len()).filter(|p| !traced_positions.contains(p)).collect();
        let keep_layout = layout.select(&kept_positions);
        let trace_layout = layout.select(traced_positions);
        let n = layout.dim();
        let (mut kept, mut traced) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for i in 0..n {
            let d = layout.digits(i);
            let kd: Vec<usize> = kept_positions.iter().map(|&p| d[p]).collect();
            let td: Vec<usize> = traced_positions.iter().map(|&p| d[p]).collect();
            kept.push(keep_layout.compose(&kd));
            traced.push(trace_layout.compose(&td));
        }
        Self { kept, traced, kept_dim: keep_layout.dim(), traced_dim: trace_layout.dim() }
    }

    fn reduce(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let n = self.kept.len();
        let mut out = DMatrix::zeros(self.kept_dim, self.kept_dim);
        for col in 0..n {
            for r in 0..n {
                if self.traced[r] == self.traced[col] {
                    out[(self.kept[r], self.kept[col])] += rho[(r, col)];
                }
            }
        }
        out
    }
}

/// Reduced operator on the `keep` factors (returned in layout order).
pub fn partial_trace(rho: &ComplexMatrix, layout: &SpaceLayout, keep: &[&str]) -> Result<ComplexMatrix> {
    check_layout(rho, layout)?;
    let kept = layout.positions(keep)?;
    let traced: Vec<usize> = (0..layout.len()).filter(|p| !kept.contains(p)).collect();
    Ok(ComplexMatrix(IndexSplit::new(layout, &traced).reduce(&rho.0)))
}

/// `tr_X(rho) ⊗ I_X / d_X` with the identity re-inserted at the traced positions.
pub fn trace_replace(rho: &ComplexMatrix, layout: &SpaceLayout, labels: &[&str]) -> Result<ComplexMatrix> {
    check_layout(rho, layout)?;
    let mut targets = layout.positions(labels)?;
    if targets.is_empty() {
        return Ok(rho.clone());
    }
    targets.sort_unstable();
    Ok(ComplexMatrix(TraceReplace::from_split(IndexSplit::new(layout, &targets)).apply(&rho.0)))
}

/// Reusable `tr_X(·) ⊗ I_X / d_X` map for a fixed layout and factor set.
pub struct TraceReplace {
    split: IndexSplit,
}

impl TraceReplace {
    pub fn new(layout: &SpaceLayout, labels: &[&str]) -> Result<Self> {
        let mut targets = layout.positions(labels)?;
        targets.sort_unstable();
        Ok(Self::from_split(IndexSplit::new(layout, &targets)))
    }

    fn from_split(split: IndexSplit) -> Self {
        Self { split }
    }

    fn apply(&self, m: &DMatrix<C64>) -> DMatrix<C64> {
        let s = &self.split;
        let red = s.reduce(m);
        let n = s.kept.len();
        let inv = 1.0 / s.traced_dim as f64;
        let mut out = DMatrix::zeros(n, n);
        for col in 0..n {
            for r in 0..n {
                if s.traced[r] == s.traced[col] {
                    out[(r, col)] = red[(s.kept[r], s.kept[col])] * inv;
                }
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.split.kept.len()
    }

    pub fn call(&self, m: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(m.rows(), self.dim(), "trace-replace map applied to wrong dimension");
        ComplexMatrix(self.apply(&m.0))
    }
}

/// Transpose on the named factors only.
pub fn partial_transpose(rho: &ComplexMatrix, layout: &SpaceLayout, labels: &[&str]) -> Result<ComplexMatrix> {
    check_layout(rho, layout)?;
    let targets = layout.positions(labels)?;
    let n = layout.dim();
    let mut out = DMatrix::zeros(n, n);
    for r in 0..n {
        for col in 0..n {
            let mut rd = layout.digits(r);
            let mut cd = layout.digits(col);
            for &p in &targets {
                std::mem::swap(&mut rd[p], &mut cd[p]);
            }
            out[(layout.compose(&rd), layout.compose(&cd))] = rho.0[(r, col)];
        }
    }
    Ok(ComplexMatrix(out))
}

/// Reorders tensor factors. `order` lists every label of `layout` exactly once.
pub fn permute_factors(
    m: &ComplexMatrix,
    layout: &SpaceLayout,
    order: &[&str],
) -> Result<(ComplexMatrix, SpaceLayout)> {
    let perm = layout.positions(order)?;
    if perm.len() != layout.len() || order.len() != layout.len() {
        return Err(Error::InvalidLayout("permutation must name every factor once".into()));
    }
    let new_layout = layout.select(&perm);
    let map = |i: usize| -> usize {
        let d = layout.digits(i);
        let nd: Vec<usize> = perm.iter().map(|&p| d[p]).collect();
        new_layout.compose(&nd)
    };
    if m.cols() == 1 {
        if m.rows() != layout.dim() {
            return Err(Error::DimensionMismatch("vector length differs from layout".into()));
        }
        let mut out = DMatrix::zeros(m.rows(), 1);
        for i in 0..m.rows() {
            out[(map(i), 0)] = m.0[(i, 0)];
        }
        return Ok((ComplexMatrix(out), new_layout));
    }
    check_layout(m, layout)?;
    let n = layout.dim();
    let mut out = DMatrix::zeros(n, n);
    for r in 0..n {
        let nr = map(r);
        for col in 0..n {
            out[(nr, map(col))] = m.0[(r, col)];
        }
    }
    Ok((ComplexMatrix(out), new_layout))
}

/// Spectral decomposition of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct Eigen {
    /// Eigenvalues in descending order.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, aligned with `values`.
    pub vectors: ComplexMatrix,
}

impl Eigen {
    /// V · diag(values) · V†.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let d: Vec<C64> = self.values.iter().map(|&x| re(x)).collect();
        &(&self.vectors * &ComplexMatrix::from_diagonal(&d)) * &self.vectors.dagger()
    }

    /// Rebuilds V · diag(f(values)) · V†.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let d: Vec<C64> = self.values.iter().map(|&x| re(f(x))).collect();
        &(&self.vectors * &ComplexMatrix::from_diagonal(&d)) * &self.vectors.dagger()
    }
}

pub fn eig_hermitian(m: &ComplexMatrix) -> Result<Eigen> {
    let deviation = m.hermitian_deviation();
    if deviation > HERMITIAN_TOL {
        return Err(Error::NotHermitian { deviation });
    }
    let h = m.hermitian_part();
    let se = SymmetricEigen::new(h.0);
    let mut order: Vec<usize> = (0..se.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| se.eigenvalues[j].total_cmp(&se.eigenvalues[i]));
    let values = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let n = m.rows();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &se.eigenvectors.column(src));
    }
    Ok(Eigen { values, vectors: ComplexMatrix(vectors) })
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(m: &ComplexMatrix) -> Result<f64> {
    Ok(eig_hermitian(m)?.values.last().copied().unwrap_or(0.0))
}

/// True iff the minimum eigenvalue is at least `-tol`.
pub fn is_psd(m: &ComplexMatrix, tol: f64) -> Result<bool> {
    Ok(min_eigenvalue(m)? >= -tol)
}

/// Closest PSD matrix in Frobenius norm (negative eigenvalues clipped).
pub fn psd_projection(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    Ok(eig_hermitian(m)?.map_values(|x| x.max(0.0)))
}

/// Sum of singular values of a Hermitian matrix.
pub fn trace_norm_hermitian(m: &ComplexMatrix) -> Result<f64> {
    Ok(eig_hermitian(m)?.values.iter().map(|x| x.abs()).sum())
}

/// Named single-qubit gates used by configs and tests.
pub mod gates {
    use super::{c, re, ComplexMatrix};
    use std::f64::consts::FRAC_1_SQRT_2;

    pub fn i() -> ComplexMatrix {
        ComplexMatrix::identity(2)
    }

    pub fn x() -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap()
    }

    pub fn y() -> ComplexMatrix {
        ComplexMatrix::from_row_major(2, 2, &[re(0.0), c(0.0, -1.0), c(0.0, 1.0), re(0.0)]).unwrap()
    }

    pub fn z() -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]]).unwrap()
    }

    pub fn h() -> ComplexMatrix {
        let s = FRAC_1_SQRT_2;
        ComplexMatrix::from_real_rows(&[&[s, s], &[s, -s]]).unwrap()
    }

    pub fn by_name(name: &str) -> Option<ComplexMatrix> {
        match name {
            "I" => Some(i()),
            "X" => Some(x()),
            "Y" => Some(y()),
            "Z" => Some(z()),
            "H" => Some(h()),
            _ => None,
        }
    }

    /// |+⟩ and |−⟩.
    pub fn plus() -> ComplexMatrix {
        ComplexMatrix::ket(&[re(FRAC_1_SQRT_2), re(FRAC_1_SQRT_2)])
    }

    pub fn minus() -> ComplexMatrix {
        ComplexMatrix::ket(&[re(FRAC_1_SQRT_2), re(-FRAC_1_SQRT_2)])
    }
}
