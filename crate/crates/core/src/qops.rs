//! Dense complex linear algebra: tensor products, partial traces, Hermitian
//! propagators, vectorization and superoperators.
//!
//! Vectorization is column stacking throughout the crate. nalgebra stores
//! matrices column-major, so `vec(X)` is the raw storage of `X`, and the map
//! `X -> A X B` is the matrix `B^T ⊗ A`.

use nalgebra::linalg::SymmetricEigen;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Numerical tolerances shared by the validation routines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub herm: f64,
    pub trace: f64,
    pub pos: f64,
    pub eig: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { herm: 1e-10, trace: 1e-10, pos: 1e-10, eig: 1e-9 }
    }
}

impl Tolerances {
    pub fn scaled(&self, s: f64) -> Self {
        Tolerances { herm: self.herm * s, trace: self.trace * s, pos: self.pos * s, eig: self.eig * s }
    }
}

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(d: usize) -> CMatrix {
    CMatrix::identity(d, d)
}

pub fn zeros(r: usize, c: usize) -> CMatrix {
    CMatrix::zeros(r, c)
}

pub fn from_real_diag(diag: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_iterator(diag.len(), diag.iter().map(|&x| c(x, 0.0))))
}

/// Row-major construction from real/imaginary pairs.
pub fn from_rows(rows: &[Vec<C64>]) -> CMatrix {
    let r = rows.len();
    let c = if r == 0 { 0 } else { rows[0].len() };
    CMatrix::from_fn(r, c, |i, j| rows[i][j])
}

pub fn dagger(m: &CMatrix) -> CMatrix {
    m.adjoint()
}

pub fn trace(m: &CMatrix) -> C64 {
    m.trace()
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * c(0.5, 0.0)
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn hermitian_defect(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub fn check_square(m: &CMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    Ok(m.nrows())
}

pub fn check_hermitian(m: &CMatrix, tol: f64) -> Result<()> {
    check_square(m)?;
    let defect = hermitian_defect(m);
    if defect > tol * (1.0 + max_abs(m)) {
        return Err(Error::NotHermitian { defect });
    }
    Ok(())
}

/// Kronecker product with `(A⊗B)[i*rB + k, j*cB + l] = A[i,j] B[k,l]`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn kron_all(ms: &[&CMatrix]) -> CMatrix {
    let mut out = identity(1);
    for m in ms {
        out = kron(&out, m);
    }
    out
}

/// Partial trace over every factor except `keep`; factors are ordered as in [`kron`].
pub fn partial_trace(m: &CMatrix, dims: &[usize], keep: usize) -> Result<CMatrix> {
    let n = check_square(m)?;
    let total: usize = dims.iter().product();
    if total != n {
        return Err(Error::DimensionMismatch { expected: total, got: n });
    }
    if keep >= dims.len() {
        return Err(Error::InvalidParameter(format!("subsystem index {keep} out of range")));
    }
    let dk = dims[keep];
    let inner: usize = dims[keep + 1..].iter().product();
    let outer: usize = dims[..keep].iter().product();
    let mut out = zeros(dk, dk);
    for o in 0..outer {
        for q in 0..inner {
            for i in 0..dk {
                let r = (o * dk + i) * inner + q;
                for j in 0..dk {
                    let s = (o * dk + j) * inner + q;
                    out[(i, j)] += m[(r, s)];
                }
            }
        }
    }
    Ok(out)
}

/// Eigen-decomposition of a Hermitian matrix: real eigenvalues in ascending order.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

pub fn eigh(h: &CMatrix) -> Result<HermitianEig> {
    check_hermitian(h, 1e-10)?;
    let n = h.nrows();
    let sym = SymmetricEigen::try_new(hermitize(h), 1e-15, 10_000)
        .ok_or(Error::ConvergenceFailure { residual: f64::NAN })?;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| sym.eigenvalues[a].total_cmp(&sym.eigenvalues[b]));
    let values = idx.iter().map(|&k| sym.eigenvalues[k]).collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| sym.eigenvectors[(i, idx[j])]);
    Ok(HermitianEig { values, vectors })
}

impl HermitianEig {
    /// `f(H) = V diag(f(λ)) V†`.
    pub fn apply_fn<F: Fn(f64) -> C64>(&self, f: F) -> CMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let fj = f(self.values[j]);
            for i in 0..n {
                scaled[(i, j)] *= fj;
            }
        }
        scaled * self.vectors.adjoint()
    }
}

pub fn herm_fn<F: Fn(f64) -> C64>(h: &CMatrix, f: F) -> Result<CMatrix> {
    Ok(eigh(h)?.apply_fn(f))
}

/// `exp(-i t H)` via the Hermitian eigen-decomposition.
pub fn propagator(h: &CMatrix, t: f64) -> Result<CMatrix> {
    herm_fn(h, |e| C64::from_polar(1.0, -t * e))
}

/// Gibbs state `exp(-βH)/Tr exp(-βH)`, computed with a ground-energy shift.
pub fn gibbs(h: &CMatrix, beta: f64) -> Result<DensityMatrix> {
    let eig = eigh(h)?;
    let shift = if beta >= 0.0 {
        eig.values.iter().cloned().fold(f64::INFINITY, f64::min)
    } else {
        eig.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    };
    let w: Vec<f64> = eig.values.iter().map(|e| (-beta * (e - shift)).exp()).collect();
    let z: f64 = w.iter().sum();
    let mut scaled = eig.vectors.clone();
    for (j, wj) in w.iter().enumerate() {
        for i in 0..scaled.nrows() {
            scaled[(i, j)] *= c(wj / z, 0.0);
        }
    }
    let m = hermitize(&(scaled * eig.vectors.adjoint()));
    DensityMatrix::new(m)
}

pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    m.clone().singular_values().iter().cloned().collect()
}

pub fn trace_norm(m: &CMatrix) -> f64 {
    singular_values(m).iter().sum()
}

/// Largest singular value.
pub fn op_norm(m: &CMatrix) -> f64 {
    singular_values(m).iter().cloned().fold(0.0, f64::max)
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.norm()
}

/// Column-stacking vectorization.
pub fn vec_op(m: &CMatrix) -> CVector {
    CVector::from_column_slice(m.as_slice())
}

pub fn unvec(v: &CVector, d: usize) -> CMatrix {
    CMatrix::from_column_slice(d, d, v.as_slice())
}

/// Matrix unit `|i><j|` of size `d`.
pub fn unit(d: usize, i: usize, j: usize) -> CMatrix {
    let mut m = zeros(d, d);
    m[(i, j)] = ONE;
    m
}

pub fn ket(d: usize, i: usize) -> CVector {
    let mut v = CVector::zeros(d);
    v[i] = ONE;
    v
}

/// Eigenpairs of a general square matrix, sorted by descending modulus.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<C64>,
    pub vectors: CMatrix,
    pub residual: f64,
}

/// Schur decomposition followed by triangular back-substitution.
pub fn eig_general(m: &CMatrix, tol_eig: f64) -> Result<Eigen> {
    let n = check_square(m)?;
    if n == 0 {
        return Ok(Eigen { values: vec![], vectors: zeros(0, 0), residual: 0.0 });
    }
    let norm = m.norm().max(f64::MIN_POSITIVE);
    let schur = m
        .clone()
        .try_schur(1e-15 * norm, 100_000)
        .ok_or(Error::ConvergenceFailure { residual: f64::NAN })?;
    let (q, t) = schur.unpack();
    let tnorm = t.norm().max(f64::MIN_POSITIVE);
    let small = f64::EPSILON * tnorm;
    let mut y = zeros(n, n);
    for k in 0..n {
        let lk = t[(k, k)];
        y[(k, k)] = ONE;
        for j in (0..k).rev() {
            let mut s = ZERO;
            for l in j + 1..=k {
                s += t[(j, l)] * y[(l, k)];
            }
            let mut piv = t[(j, j)] - lk;
            if piv.norm() < small {
                piv = c(small, 0.0);
            }
            y[(j, k)] = -s / piv;
        }
    }
    let mut vecs = q * y;
    for k in 0..n {
        let nk = vecs.column(k).norm();
        if nk > 0.0 {
            let scale = c(1.0 / nk, 0.0);
            for i in 0..n {
                vecs[(i, k)] *= scale;
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<C64> = (0..n).map(|k| t[(k, k)]).collect();
    order.sort_by(|&a, &b| {
        diag[b]
            .norm()
            .total_cmp(&diag[a].norm())
            .then(diag[b].arg().total_cmp(&diag[a].arg()))
    });
    let values: Vec<C64> = order.iter().map(|&k| diag[k]).collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| vecs[(i, order[j])]);
    let mut residual: f64 = 0.0;
    for (j, lam) in values.iter().enumerate() {
        let v = vectors.column(j);
        let r = (m * v - v * *lam).norm();
        residual = residual.max(r);
    }
    if residual > tol_eig * norm.max(1.0) {
        return Err(Error::ConvergenceFailure { residual });
    }
    Ok(Eigen { values, vectors, residual })
}

pub fn eigenvalues(m: &CMatrix) -> Result<Vec<C64>> {
    Ok(eig_general(m, 1e-9)?.values)
}

/// Positive, Hermitian, unit-trace matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixJson", into = "MatrixJson")]
pub struct DensityMatrix {
    m: CMatrix,
}

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        Self::with_tolerances(m, &Tolerances::default())
    }

    pub fn with_tolerances(m: CMatrix, tol: &Tolerances) -> Result<Self> {
        check_square(&m)?;
        let defect = hermitian_defect(&m);
        if defect > tol.herm {
            return Err(Error::InvalidState(format!("Hermitian defect {defect:.3e}")));
        }
        let tr = trace(&m);
        if (tr - ONE).norm() > tol.trace {
            return Err(Error::InvalidState(format!("trace {tr}")));
        }
        let h = hermitize(&m);
        let min = eigh(&h)?.values.first().cloned().unwrap_or(0.0);
        if min < -tol.pos {
            return Err(Error::InvalidState(format!("min eigenvalue {min:.3e}")));
        }
        Ok(DensityMatrix { m: h })
    }

    pub fn pure(psi: &CVector) -> Result<Self> {
        let n = psi.norm();
        if n == 0.0 {
            return Err(Error::InvalidState("zero vector".into()));
        }
        let v = psi / c(n, 0.0);
        Ok(DensityMatrix { m: &v * v.adjoint() })
    }

    pub fn basis(d: usize, i: usize) -> Self {
        DensityMatrix { m: unit(d, i, i) }
    }

    pub fn maximally_mixed(d: usize) -> Self {
        DensityMatrix { m: identity(d) * c(1.0 / d as f64, 0.0) }
    }

    pub fn diagonal(p: &[f64]) -> Result<Self> {
        Self::new(from_real_diag(p))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn expect(&self, a: &CMatrix) -> C64 {
        (&self.m * a).trace()
    }

    pub fn trace_distance(&self, other: &DensityMatrix) -> f64 {
        trace_norm(&(&self.m - &other.m))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        eigh(&self.m).map(|e| e.values[0]).unwrap_or(f64::NAN)
    }
}

/// Linear map on operators stored as a `d²×d²` matrix acting on `vec(X)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Superoperator {
    dim: usize,
    matrix: CMatrix,
}

impl Superoperator {
    pub fn from_matrix(matrix: CMatrix) -> Result<Self> {
        let n = check_square(&matrix)?;
        let d = (n as f64).sqrt().round() as usize;
        if d * d != n {
            return Err(Error::DimensionMismatch { expected: d * d, got: n });
        }
        Ok(Superoperator { dim: d, matrix })
    }

    pub fn identity(d: usize) -> Self {
        Superoperator { dim: d, matrix: identity(d * d) }
    }

    pub fn zero(d: usize) -> Self {
        Superoperator { dim: d, matrix: zeros(d * d, d * d) }
    }

    /// `X -> A X B`.
    pub fn sandwich(a: &CMatrix, b: &CMatrix) -> Self {
        Superoperator { dim: a.nrows(), matrix: kron(&b.transpose(), a) }
    }

    /// `X -> Σ K X K†`.
    pub fn from_kraus(ks: &[CMatrix]) -> Result<Self> {
        let d = ks.first().map(|k| k.nrows()).ok_or_else(|| Error::InvalidParameter("empty Kraus list".into()))?;
        let mut m = zeros(d * d, d * d);
        for k in ks {
            if k.nrows() != d || k.ncols() != d {
                return Err(Error::DimensionMismatch { expected: d, got: k.nrows() });
            }
            m += kron(&k.conjugate(), k);
        }
        Ok(Superoperator { dim: d, matrix: m })
    }

    /// `X -> s (H X - X H)`.
    pub fn commutator_map(h: &CMatrix, s: C64) -> Self {
        let d = h.nrows();
        let id = identity(d);
        Superoperator { dim: d, matrix: (kron(&id, h) - kron(&h.transpose(), &id)) * s }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn apply(&self, x: &CMatrix) -> CMatrix {
        unvec(&(&self.matrix * vec_op(x)), self.dim)
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Superoperator) -> Superoperator {
        Superoperator { dim: self.dim, matrix: &self.matrix * &other.matrix }
    }

    pub fn power(&self, n: usize) -> Superoperator {
        let mut out = identity(self.dim * self.dim);
        let mut base = self.matrix.clone();
        let mut k = n;
        while k > 0 {
            if k & 1 == 1 {
                out = &out * &base;
            }
            k >>= 1;
            if k > 0 {
                base = &base * &base;
            }
        }
        Superoperator { dim: self.dim, matrix: out }
    }

    pub fn add(&self, other: &Superoperator) -> Superoperator {
        Superoperator { dim: self.dim, matrix: &self.matrix + &other.matrix }
    }

    pub fn sub(&self, other: &Superoperator) -> Superoperator {
        Superoperator { dim: self.dim, matrix: &self.matrix - &other.matrix }
    }

    pub fn scale(&self, s: C64) -> Superoperator {
        Superoperator { dim: self.dim, matrix: &self.matrix * s }
    }

    /// Dual under the Hilbert–Schmidt pairing `Tr[A† X]`: the conjugate transpose.
    pub fn dual(&self) -> Superoperator {
        Superoperator { dim: self.dim, matrix: self.matrix.adjoint() }
    }

    /// Choi matrix `Σ |i><j| ⊗ L(|i><j|)`.
    pub fn choi(&self) -> CMatrix {
        let d = self.dim;
        CMatrix::from_fn(d * d, d * d, |r, s| {
            let (i, a) = (r / d, r % d);
            let (j, b) = (s / d, s % d);
            self.matrix[(a + b * d, i + j * d)]
        })
    }

    pub fn min_choi_eigenvalue(&self) -> f64 {
        let ch = hermitize(&self.choi());
        eigh(&ch).map(|e| e.values[0]).unwrap_or(f64::NAN)
    }

    /// `‖L*(I) − I‖` in max-entry norm.
    pub fn dual_unitality_defect(&self) -> f64 {
        let id = identity(self.dim);
        max_abs(&(self.dual().apply(&id) - id))
    }

    pub fn spectral_radius(&self) -> Result<f64> {
        Ok(eigenvalues(&self.matrix)?.first().map(|z| z.norm()).unwrap_or(0.0))
    }
}

/// CPTP verdict for a superoperator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChannelCheck {
    pub min_choi_eigenvalue: f64,
    pub unitality_defect: f64,
    pub passed: bool,
}

pub fn check_cptp(map: &Superoperator, tol: f64) -> ChannelCheck {
    let min_choi_eigenvalue = map.min_choi_eigenvalue();
    let unitality_defect = map.dual_unitality_defect();
    ChannelCheck {
        min_choi_eigenvalue,
        unitality_defect,
        passed: min_choi_eigenvalue >= -tol && unitality_defect < tol,
    }
}

/// JSON form of a dense matrix: row-major rows of `[re, im]` pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MatrixJson(pub Vec<Vec<[f64; 2]>>);

impl From<&CMatrix> for MatrixJson {
    fn from(m: &CMatrix) -> Self {
        MatrixJson((0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect())
    }
}

impl TryFrom<MatrixJson> for CMatrix {
    type Error = Error;
    fn try_from(j: MatrixJson) -> Result<CMatrix> {
        let r = j.0.len();
        let cols = j.0.first().map(|row| row.len()).unwrap_or(0);
        if let Some(bad) = j.0.iter().find(|row| row.len() != cols) {
            return Err(Error::DimensionMismatch { expected: cols, got: bad.len() });
        }
        Ok(CMatrix::from_fn(r, cols, |i, k| c(j.0[i][k][0], j.0[i][k][1])))
    }
}

impl From<DensityMatrix> for MatrixJson {
    fn from(d: DensityMatrix) -> Self {
        MatrixJson::from(&d.m)
    }
}

impl TryFrom<MatrixJson> for DensityMatrix {
    type Error = Error;
    fn try_from(j: MatrixJson) -> Result<Self> {
        DensityMatrix::new(CMatrix::try_from(j)?)
    }
}

/// Serde adapter for `CMatrix` fields.
pub mod matrix_serde {
    use super::{CMatrix, MatrixJson};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &CMatrix, s: S) -> Result<S::Ok, S::Error> {
        MatrixJson::from(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMatrix, D::Error> {
        let j = MatrixJson::deserialize(d)?;
        CMatrix::try_from(j).map_err(serde::de::Error::custom)
    }
}

/// Serde adapter for complex lists as `[re, im]` pairs.
pub mod complex_list_serde {
    use super::C64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[C64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<C64>, D::Error> {
        let raw = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(raw.into_iter().map(|p| C64::new(p[0], p[1])).collect())
    }
}
