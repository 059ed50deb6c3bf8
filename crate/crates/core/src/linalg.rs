//! Dense complex matrix algebra.
//!
//! [`ComplexMatrix`] is the numeric carrier for every operator in the crate:
//! states, error and loss operators, Choi matrices and solver iterates. Products
//! and factorizations are delegated to `faer`; the tensor-structure helpers
//! (Kronecker products, partial traces, subsystem permutations, realification)
//! live here.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use faer::linalg::solvers::DenseSolveCore;
use faer::{Mat, Side};
use num_complex::Complex64;
use thiserror::Error;

/// Absolute tolerance used when a matrix is required to be Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is not Hermitian (defect {defect:.3e})")]
    NotHermitian { defect: f64 },
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("eigenvalue iteration failed to converge")]
    NoConvergence,
}

/// Dense complex matrix.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix(Mat<Complex64>);

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows(), self.cols())?;
        for i in 0..self.rows().min(12) {
            write!(f, "  ")?;
            for j in 0..self.cols().min(12) {
                let z = self[(i, j)];
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(Mat::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        Self(Mat::identity(n, n))
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> Complex64) -> Self {
        Self(Mat::from_fn(rows, cols, f))
    }

    /// Builds a matrix from row-major entries.
    pub fn from_row_major(rows: usize, cols: usize, entries: &[Complex64]) -> Result<Self, LinalgError> {
        if entries.len() != rows * cols {
            return Err(LinalgError::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        Ok(Self::from_fn(rows, cols, |i, j| entries[i * cols + j]))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self::from_fn(n, n, |i, j| if i == j { Complex64::new(diag[i], 0.0) } else { ZERO })
    }

    /// Column vector.
    pub fn column(entries: &[Complex64]) -> Self {
        Self::from_fn(entries.len(), 1, |i, _| entries[i])
    }

    /// Unit column vector `|index⟩` in dimension `dim`.
    pub fn basis_vector(dim: usize, index: usize) -> Self {
        Self::from_fn(dim, 1, |i, _| if i == index { ONE } else { ZERO })
    }

    /// `|u⟩⟨v|` for column vectors `u`, `v`.
    pub fn outer(u: &ComplexMatrix, v: &ComplexMatrix) -> Self {
        Self::from_fn(u.rows(), v.rows(), |i, j| u[(i, 0)] * v[(j, 0)].conj())
    }

    /// Rank-one projector `|v⟩⟨v|`.
    pub fn projector(v: &ComplexMatrix) -> Self {
        Self::outer(v, v)
    }

    pub fn from_faer(m: Mat<Complex64>) -> Self {
        Self(m)
    }

    pub fn as_faer(&self) -> &Mat<Complex64> {
        &self.0
    }

    pub fn into_faer(self) -> Mat<Complex64> {
        self.0
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

    /// Entries in row-major order.
    pub fn to_row_major(&self) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                out.push(self[(i, j)]);
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint().to_owned())
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose().to_owned())
    }

    /// Entrywise complex conjugate in the stored basis.
    pub fn conj(&self) -> Self {
        Self(self.0.conjugate().to_owned())
    }

    pub fn scale(&self, k: f64) -> Self {
        Self::from_fn(self.rows(), self.cols(), |i, j| self[(i, j)] * k)
    }

    pub fn scale_complex(&self, k: Complex64) -> Self {
        Self::from_fn(self.rows(), self.cols(), |i, j| self[(i, j)] * k)
    }

    /// `self += k * other`.
    pub fn axpy(&mut self, k: f64, other: &ComplexMatrix) {
        assert_eq!((self.rows(), self.cols()), (other.rows(), other.cols()), "axpy shape");
        for j in 0..self.cols() {
            for i in 0..self.rows() {
                self.0[(i, j)] += other.0[(i, j)] * k;
            }
        }
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows().min(self.cols())).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm_l2()
    }

    pub fn max_abs(&self) -> f64 {
        let mut m = 0.0f64;
        for j in 0..self.cols() {
            for i in 0..self.rows() {
                m = m.max(self[(i, j)].norm());
            }
        }
        m
    }

    /// `max_ij |M[i][j] − conj(M[j][i])|`.
    pub fn hermitian_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows();
        let mut d = 0.0f64;
        for j in 0..n {
            for i in 0..=j {
                d = d.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        d
    }

    /// Hermiticity test with a tolerance relative to the largest entry
    /// (absolute for matrices with entries of order one or smaller).
    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.is_square() && self.hermitian_defect() <= tol * self.max_abs().max(1.0)
    }

    pub fn ensure_hermitian(&self) -> Result<(), LinalgError> {
        if !self.is_square() {
            return Err(LinalgError::Dimension(format!(
                "expected a square matrix, got {}x{}",
                self.rows(),
                self.cols()
            )));
        }
        let defect = self.hermitian_defect();
        if defect > HERMITIAN_TOL * self.max_abs().max(1.0) {
            return Err(LinalgError::NotHermitian { defect });
        }
        Ok(())
    }

    /// `(M + M†)/2`.
    pub fn symmetrize(&self) -> Self {
        let n = self.rows();
        assert!(self.is_square(), "symmetrize needs a square matrix");
        Self::from_fn(n, n, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5)
    }

    pub fn symmetrize_in_place(&mut self) {
        let n = self.rows();
        for j in 0..n {
            for i in 0..j {
                let v = (self.0[(i, j)] + self.0[(j, i)].conj()) * 0.5;
                self.0[(i, j)] = v;
                self.0[(j, i)] = v.conj();
            }
            let d = self.0[(j, j)].re;
            self.0[(j, j)] = Complex64::new(d, 0.0);
        }
    }

    /// Hermitian eigenvalues in nondecreasing order.
    pub fn eigenvalues(&self) -> Result<Vec<f64>, LinalgError> {
        self.ensure_hermitian()?;
        self.0
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|_| LinalgError::NoConvergence)
    }

    /// Eigenvalues (nondecreasing) and the matching orthonormal eigenvectors
    /// as the columns of the returned matrix.
    pub fn eigen(&self) -> Result<(Vec<f64>, ComplexMatrix), LinalgError> {
        self.ensure_hermitian()?;
        let evd = self
            .0
            .self_adjoint_eigen(Side::Lower)
            .map_err(|_| LinalgError::NoConvergence)?;
        let s = evd.S();
        let vals = (0..self.rows()).map(|i| s[i].re).collect();
        Ok((vals, Self(evd.U().to_owned())))
    }

    /// Lower Cholesky factor of a Hermitian positive definite matrix.
    pub fn cholesky(&self) -> Result<ComplexMatrix, LinalgError> {
        let llt = self.0.llt(Side::Lower).map_err(|_| LinalgError::NotPositiveDefinite)?;
        Ok(Self(llt.L().to_owned()))
    }

    /// Inverse of a Hermitian positive definite matrix.
    pub fn inverse_pd(&self) -> Result<ComplexMatrix, LinalgError> {
        let llt = self.0.llt(Side::Lower).map_err(|_| LinalgError::NotPositiveDefinite)?;
        let mut inv = Self(llt.inverse());
        inv.symmetrize_in_place();
        Ok(inv)
    }

    /// Solves `L x = rhs` in place for lower-triangular `self`.
    pub fn solve_lower_in_place(&self, rhs: &mut ComplexMatrix) {
        self.0.solve_lower_triangular_in_place(rhs.0.as_mut());
    }

    pub fn matmul(&self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.cols(), rhs.rows(), "matmul shape");
        Self(&self.0 * &rhs.0)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    fn index(&self, idx: (usize, usize)) -> &Complex64 {
        &self.0[idx]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, idx: (usize, usize)) -> &mut Complex64 {
        &mut self.0[idx]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 - &rhs.0)
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        ComplexMatrix(-&self.0)
    }
}

impl AddAssign<&ComplexMatrix> for ComplexMatrix {
    fn add_assign(&mut self, rhs: &ComplexMatrix) {
        self.0 += &rhs.0;
    }
}

impl SubAssign<&ComplexMatrix> for ComplexMatrix {
    fn sub_assign(&mut self, rhs: &ComplexMatrix) {
        self.0 -= &rhs.0;
    }
}

/// Ordered factor dimensions of a tensor-product space.
#[derive(Debug, Clone, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct SubsystemDims(Vec<usize>);

impl SubsystemDims {
    pub fn new(factors: Vec<usize>) -> Result<Self, LinalgError> {
        if factors.is_empty() || factors.contains(&0) {
            return Err(LinalgError::Dimension(format!(
                "subsystem factors must be nonempty and >= 1, got {factors:?}"
            )));
        }
        Ok(Self(factors))
    }

    pub fn factors(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> usize {
        self.0.iter().product()
    }

    /// Product of the factors in `range`.
    pub fn product_of(&self, range: std::ops::Range<usize>) -> usize {
        self.0[range].iter().product()
    }

    pub fn check(&self, m: &ComplexMatrix) -> Result<(), LinalgError> {
        if m.rows() != self.total() || m.cols() != self.total() {
            return Err(LinalgError::Dimension(format!(
                "factors {:?} (total {}) do not match a {}x{} matrix",
                self.0,
                self.total(),
                m.rows(),
                m.cols()
            )));
        }
        Ok(())
    }
}

/// Kronecker product: `(a⊗b)[i·rb+k, j·cb+l] = a[i][j]·b[k][l]`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (rb, cb) = (b.rows(), b.cols());
    let mut out = ComplexMatrix::zeros(a.rows() * rb, a.cols() * cb);
    for j in 0..a.cols() {
        for i in 0..a.rows() {
            let aij = a[(i, j)];
            if aij == ZERO {
                continue;
            }
            for l in 0..cb {
                for k in 0..rb {
                    out[(i * rb + k, j * cb + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Kronecker product of a list of factors, left to right.
pub fn kron_all(factors: &[&ComplexMatrix]) -> ComplexMatrix {
    let mut it = factors.iter();
    let first = it.next().expect("kron_all needs at least one factor");
    it.fold((*first).clone(), |acc, f| kron(&acc, f))
}

/// Mixed-radix digits of `index` for the given factor sizes (most significant first).
fn digits(mut index: usize, factors: &[usize], out: &mut [usize]) {
    for (slot, &f) in out.iter_mut().zip(factors).rev() {
        *slot = index % f;
        index /= f;
    }
}

/// Reduced matrix on the factors listed in `keep` (0-based, any order; the
/// result uses the original factor order).
pub fn partial_trace(
    m: &ComplexMatrix,
    dims: &SubsystemDims,
    keep: &[usize],
) -> Result<ComplexMatrix, LinalgError> {
    dims.check(m)?;
    let nf = dims.len();
    let mut kept = vec![false; nf];
    for &k in keep {
        if k >= nf || kept[k] {
            return Err(LinalgError::Dimension(format!(
                "invalid keep set {keep:?} for {nf} factors"
            )));
        }
        kept[k] = true;
    }
    let factors = dims.factors();
    let keep_factors: Vec<usize> = (0..nf).filter(|&i| kept[i]).map(|i| factors[i]).collect();
    let trace_factors: Vec<usize> = (0..nf).filter(|&i| !kept[i]).map(|i| factors[i]).collect();
    let dk: usize = keep_factors.iter().product();
    let dt: usize = trace_factors.iter().product();

    // full index of (kept multi-index, traced multi-index)
    let mut strides = vec![1usize; nf];
    for i in (0..nf.saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * factors[i + 1];
    }
    let keep_pos: Vec<usize> = (0..nf).filter(|&i| kept[i]).collect();
    let trace_pos: Vec<usize> = (0..nf).filter(|&i| !kept[i]).collect();
    let mut kd = vec![0usize; keep_pos.len()];
    let mut td = vec![0usize; trace_pos.len()];
    let keep_off: Vec<usize> = (0..dk)
        .map(|k| {
            digits(k, &keep_factors, &mut kd);
            keep_pos.iter().zip(&kd).map(|(&p, &d)| strides[p] * d).sum()
        })
        .collect();
    let trace_off: Vec<usize> = (0..dt)
        .map(|t| {
            digits(t, &trace_factors, &mut td);
            trace_pos.iter().zip(&td).map(|(&p, &d)| strides[p] * d).sum()
        })
        .collect();

    let mut out = ComplexMatrix::zeros(dk, dk);
    for c in 0..dk {
        for r in 0..dk {
            let mut acc = ZERO;
            for &t in &trace_off {
                acc += m[(keep_off[r] + t, keep_off[c] + t)];
            }
            out[(r, c)] = acc;
        }
    }
    Ok(out)
}

/// Reorders tensor factors: factor `perm[i]` of the input becomes factor `i`
/// of the output.
pub fn permute_subsystems(
    m: &ComplexMatrix,
    dims: &SubsystemDims,
    perm: &[usize],
) -> Result<ComplexMatrix, LinalgError> {
    dims.check(m)?;
    let nf = dims.len();
    let mut seen = vec![false; nf];
    if perm.len() != nf || perm.iter().any(|&p| p >= nf || std::mem::replace(&mut seen[p], true)) {
        return Err(LinalgError::Dimension(format!("{perm:?} is not a permutation of {nf} factors")));
    }
    let factors = dims.factors();
    let new_factors: Vec<usize> = perm.iter().map(|&p| factors[p]).collect();
    let mut strides = vec![1usize; nf];
    for i in (0..nf.saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * factors[i + 1];
    }
    let n = dims.total();
    let mut d = vec![0usize; nf];
    let map: Vec<usize> = (0..n)
        .map(|new_idx| {
            digits(new_idx, &new_factors, &mut d);
            perm.iter().zip(&d).map(|(&p, &v)| strides[p] * v).sum()
        })
        .collect();
    Ok(ComplexMatrix::from_fn(n, n, |i, j| m[(map[i], map[j])]))
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(m: &ComplexMatrix) -> Result<f64, LinalgError> {
    Ok(m.eigenvalues()?[0])
}

/// Largest eigenvalue of a Hermitian matrix.
pub fn max_eigenvalue(m: &ComplexMatrix) -> Result<f64, LinalgError> {
    Ok(*m.eigenvalues()?.last().expect("nonempty spectrum"))
}

/// Real symmetric image `[[Re m, −Im m], [Im m, Re m]]` of a Hermitian matrix.
pub fn realify(m: &ComplexMatrix) -> Result<ComplexMatrix, LinalgError> {
    m.ensure_hermitian()?;
    let d = m.rows();
    Ok(ComplexMatrix::from_fn(2 * d, 2 * d, |i, j| {
        let z = m[(i % d, j % d)];
        let v = match (i < d, j < d) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        };
        Complex64::new(v, 0.0)
    }))
}

/// Inverse of [`realify`] for a real symmetric `2d×2d` matrix of arbitrary
/// block structure: averages the matrix with its symplectic conjugate and
/// reads off the complex `d×d` matrix. Recovers `m` exactly from
/// `realify(m)`, and maps any PSD matrix to a PSD matrix.
pub fn complexify(y: &ComplexMatrix) -> Result<ComplexMatrix, LinalgError> {
    if !y.is_square() || y.rows() % 2 != 0 {
        return Err(LinalgError::Dimension(format!("{}x{} is not 2d x 2d", y.rows(), y.cols())));
    }
    let d = y.rows() / 2;
    Ok(ComplexMatrix::from_fn(d, d, |i, j| {
        let re = 0.5 * (y[(i, j)].re + y[(i + d, j + d)].re);
        let im = 0.5 * (y[(i + d, j)].re - y[(i, j + d)].re);
        Complex64::new(re, im)
    }))
}

/// `Tr(a·b)` without forming the product.
pub fn trace_product(a: &ComplexMatrix, b: &ComplexMatrix) -> Complex64 {
    assert_eq!(a.cols(), b.rows(), "trace_product shape");
    assert_eq!(a.rows(), b.cols(), "trace_product shape");
    let mut acc = ZERO;
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// `Re Tr(a·b)`, the real inner product for Hermitian arguments.
pub fn trace_product_re(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    trace_product(a, b).re
}

/// `⟨u|M|v⟩` for column vectors.
pub fn sandwich(u: &ComplexMatrix, m: &ComplexMatrix, v: &ComplexMatrix) -> Complex64 {
    let mv = m.matmul(v);
    (0..u.rows()).map(|i| u[(i, 0)].conj() * mv[(i, 0)]).sum()
}

/// Inner product `⟨u|v⟩` of column vectors.
pub fn inner(u: &ComplexMatrix, v: &ComplexMatrix) -> Complex64 {
    (0..u.rows()).map(|i| u[(i, 0)].conj() * v[(i, 0)]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, cols: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(r, cols, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
        random_matrix(rng, n, n).symmetrize()
    }

    fn max_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
        (a - b).max_abs()
    }

    #[test]
    fn kron_identity_cases() {
        let i6 = kron(&ComplexMatrix::identity(2), &ComplexMatrix::identity(3));
        assert_eq!(i6, ComplexMatrix::identity(6));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_matrix(&mut rng, 3, 2);
        let scalar = ComplexMatrix::identity(1);
        assert_eq!(kron(&a, &scalar), a);
    }

    #[test]
    fn kron_matches_index_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_matrix(&mut rng, 2, 2);
        let b = random_matrix(&mut rng, 3, 3);
        let k = kron(&a, &b);
        for i in 0..2 {
            for j in 0..2 {
                for p in 0..3 {
                    for q in 0..3 {
                        let want = a[(i, j)] * b[(p, q)];
                        assert!((k[(i * 3 + p, j * 3 + q)] - want).norm() < 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn partial_trace_product_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_hermitian(&mut rng, 2);
        let b = random_hermitian(&mut rng, 3);
        let dims = SubsystemDims::new(vec![2, 3]).unwrap();
        let reduced = partial_trace(&kron(&a, &b), &dims, &[0]).unwrap();
        assert!(max_diff(&reduced, &a.scale_complex(b.trace())) < 1e-13);
    }

    #[test]
    fn partial_trace_of_maximally_entangled_pair() {
        let d = 3;
        let mut psi = ComplexMatrix::zeros(d * d, 1);
        for i in 0..d {
            psi[(i * d + i, 0)] = c(1.0 / (d as f64).sqrt(), 0.0);
        }
        let rho = ComplexMatrix::projector(&psi);
        let dims = SubsystemDims::new(vec![d, d]).unwrap();
        let reduced = partial_trace(&rho, &dims, &[1]).unwrap();
        assert!(max_diff(&reduced, &ComplexMatrix::identity(d).scale(1.0 / 3.0)) < 1e-14);
    }

    #[test]
    fn partial_trace_matches_summation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = random_hermitian(&mut rng, 6);
        let dims = SubsystemDims::new(vec![2, 3]).unwrap();
        let keep_first = partial_trace(&m, &dims, &[0]).unwrap();
        let keep_second = partial_trace(&m, &dims, &[1]).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let want: Complex64 = (0..3).map(|k| m[(i * 3 + k, j * 3 + k)]).sum();
                assert!((keep_first[(i, j)] - want).norm() < 1e-14);
            }
        }
        for k in 0..3 {
            for l in 0..3 {
                let want: Complex64 = (0..2).map(|i| m[(i * 3 + k, i * 3 + l)]).sum();
                assert!((keep_second[(k, l)] - want).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn partial_trace_rejects_bad_dims() {
        let m = ComplexMatrix::identity(6);
        let dims = SubsystemDims::new(vec![2, 2]).unwrap();
        assert!(matches!(partial_trace(&m, &dims, &[0]), Err(LinalgError::Dimension(_))));
        let dims = SubsystemDims::new(vec![2, 3]).unwrap();
        assert!(partial_trace(&m, &dims, &[2]).is_err());
        assert!(SubsystemDims::new(vec![2, 0]).is_err());
    }

    #[test]
    fn min_eigenvalue_simple_cases() {
        assert!((min_eigenvalue(&ComplexMatrix::identity(4)).unwrap() - 1.0).abs() < 1e-14);
        let d = ComplexMatrix::from_real_diagonal(&[3.0, -2.0, 0.0]);
        assert!((min_eigenvalue(&d).unwrap() + 2.0).abs() < 1e-14);
    }

    #[test]
    fn min_eigenvalue_rejects_non_hermitian() {
        let m = ComplexMatrix::from_row_major(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert!(matches!(min_eigenvalue(&m), Err(LinalgError::NotHermitian { .. })));
    }

    /// Cyclic Jacobi sweeps on the realified matrix; independent of the
    /// library eigensolver.
    fn jacobi_min_eigenvalue(m: &ComplexMatrix) -> f64 {
        let r = realify(m).unwrap();
        let n = r.rows();
        let mut a: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| r[(i, j)].re).collect()).collect();
        for _sweep in 0..100 {
            let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
            if off < 1e-26 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let cs = 1.0 / (t * t + 1.0).sqrt();
                    let sn = t * cs;
                    for k in 0..n {
                        let akp = a[k][p];
                        let akq = a[k][q];
                        a[k][p] = cs * akp - sn * akq;
                        a[k][q] = sn * akp + cs * akq;
                    }
                    for k in 0..n {
                        let apk = a[p][k];
                        let aqk = a[q][k];
                        a[p][k] = cs * apk - sn * aqk;
                        a[q][k] = sn * apk + cs * aqk;
                    }
                }
            }
        }
        (0..n).map(|i| a[i][i]).fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn min_eigenvalue_matches_jacobi_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..3 {
            let m = random_hermitian(&mut rng, 8);
            let lib = min_eigenvalue(&m).unwrap();
            let oracle = jacobi_min_eigenvalue(&m);
            assert!((lib - oracle).abs() < 1e-10, "{lib} vs {oracle}");
        }
    }

    #[test]
    fn realify_examples() {
        assert_eq!(realify(&ComplexMatrix::identity(3)).unwrap(), ComplexMatrix::identity(6));
        let y = ComplexMatrix::from_row_major(2, 2, &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)]).unwrap();
        let ev = realify(&y).unwrap().eigenvalues().unwrap();
        let want = [-1.0, -1.0, 1.0, 1.0];
        for (a, b) in ev.iter().zip(want) {
            assert!((a - b).abs() < 1e-14);
        }
        let bad = ComplexMatrix::from_row_major(1, 1, &[c(0.0, 1.0)]).unwrap();
        assert!(realify(&bad).is_err());
    }

    #[test]
    fn realify_trace_identity_and_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = random_hermitian(&mut rng, 5);
        let x = random_hermitian(&mut rng, 5);
        let lhs = trace_product_re(&realify(&a).unwrap(), &realify(&x).unwrap());
        let rhs = 2.0 * trace_product_re(&a, &x);
        assert!((lhs - rhs).abs() < 1e-13);
        assert!(max_diff(&complexify(&realify(&a).unwrap()).unwrap(), &a) < 1e-15);
    }

    #[test]
    fn permute_swaps_kron_factors() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_matrix(&mut rng, 2, 2);
        let b = random_matrix(&mut rng, 3, 3);
        let dims = SubsystemDims::new(vec![2, 3]).unwrap();
        let swapped = permute_subsystems(&kron(&a, &b), &dims, &[1, 0]).unwrap();
        assert!(max_diff(&swapped, &kron(&b, &a)) < 1e-15);
    }

    #[test]
    fn inverse_and_cholesky() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = random_matrix(&mut rng, 4, 4);
        let pd = &g.matmul(&g.adjoint()) + &ComplexMatrix::identity(4);
        let inv = pd.inverse_pd().unwrap();
        assert!(max_diff(&pd.matmul(&inv), &ComplexMatrix::identity(4)) < 1e-12);
        let l = pd.cholesky().unwrap();
        assert!(max_diff(&l.matmul(&l.adjoint()), &pd) < 1e-12);
        assert!(ComplexMatrix::from_real_diagonal(&[1.0, -1.0]).cholesky().is_err());
    }
}
