//! The real coordinate space of Hermitian matrices.
//!
//! An `N x N` Hermitian matrix is a point in an `N^2`-dimensional real vector
//! space. The coordinate map used here is fixed so that design matrices are
//! reproducible across runs and implementations:
//!
//! * coordinates `0..N` are the (real) diagonal entries,
//! * then, for `n < l` in row-major order, the pair
//!   `(sqrt(2) * Re(A[n][l]), sqrt(2) * Im(A[n][l]))`.
//!
//! With this scaling the map is an isometry: `tr(A*B)` equals the Euclidean
//! inner product of the coordinate vectors, and the Frobenius norm equals the
//! coordinate norm.
//!
//! The coordinate vector is the primary representation; the matrix form is
//! materialized from it deterministically. This makes the vectorize /
//! devectorize round trip exact by construction rather than relying on
//! floating-point mul/div cancellation.

use crate::error::{Error, Result};
use crate::{C64, CMat, CVec, RMat, RVec};

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Hermitian matrix with its real coordinate vector.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    dim: usize,
    coords: RVec,
    mat: CMat,
}

/// Real coordinate vector of a Hermitian matrix (the vectorization output).
#[derive(Debug, Clone, PartialEq)]
pub struct VectorizedHermitian {
    pub dim: usize,
    pub coords: RVec,
}

impl HermitianMatrix {
    /// Validate and canonicalize an arbitrary complex matrix.
    ///
    /// Rejects matrices whose asymmetry `|A - A^H|` exceeds `1e-10` relative
    /// to the largest entry magnitude.
    pub fn new(m: CMat) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension(format!(
                "expected square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let n = m.nrows();
        let mut scale: f64 = 0.0;
        let mut asym: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                scale = scale.max(m[(i, j)].norm());
                let d = (m[(i, j)] - m[(j, i)].conj()).norm();
                asym = asym.max(d);
            }
        }
        let tol = 1e-10;
        if scale > 0.0 && asym > tol * scale.max(1e-300) * 2.0 {
            return Err(Error::NotHermitian {
                max_asymmetry: asym / scale,
                tol,
            });
        }
        Ok(Self::from_coords_unchecked(n, coords_of(&m)))
    }

    /// Zero matrix.
    pub fn zeros(n: usize) -> Self {
        Self::from_coords_unchecked(n, RVec::zeros(n * n))
    }

    /// Identity matrix.
    pub fn identity(n: usize) -> Self {
        let mut w = RVec::zeros(n * n);
        for i in 0..n {
            w[i] = 1.0;
        }
        Self::from_coords_unchecked(n, w)
    }

    /// Rank-one matrix `v v^H`.
    pub fn from_outer(v: &CVec) -> Self {
        let n = v.len();
        let mut w = RVec::zeros(n * n);
        for i in 0..n {
            w[i] = v[i].norm_sqr();
        }
        let mut k = n;
        for i in 0..n {
            for j in (i + 1)..n {
                let e = v[i] * v[j].conj();
                w[k] = SQRT2 * e.re;
                w[k + 1] = SQRT2 * e.im;
                k += 2;
            }
        }
        Self::from_coords_unchecked(n, w)
    }

    /// Construct from a real symmetric matrix.
    pub fn from_real(m: &RMat) -> Result<Self> {
        Self::new(m.map(|x| C64::new(x, 0.0)))
    }

    /// Construct directly from a coordinate vector (must have length `n^2`).
    pub fn from_coords(n: usize, coords: RVec) -> Result<Self> {
        if coords.len() != n * n {
            return Err(Error::Dimension(format!(
                "coordinate vector has length {}, expected {}",
                coords.len(),
                n * n
            )));
        }
        Ok(Self::from_coords_unchecked(n, coords))
    }

    fn from_coords_unchecked(n: usize, coords: RVec) -> Self {
        let mat = materialize(n, &coords);
        Self {
            dim: n,
            coords,
            mat,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Matrix view (canonical: exact conjugate pairs, real diagonal).
    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    /// Coordinate view.
    pub fn coords(&self) -> &RVec {
        &self.coords
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.coords[i]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.coords.norm()
    }

    /// Frobenius inner product `tr(A B)` (real for Hermitian operands).
    pub fn inner(&self, other: &Self) -> f64 {
        self.coords.dot(&other.coords)
    }

    /// Largest imaginary coordinate magnitude (zero for real symmetric).
    pub fn max_imag_coord(&self) -> f64 {
        let n = self.dim;
        let mut m: f64 = 0.0;
        let mut k = n;
        for _ in 0..(n * (n - 1) / 2) {
            m = m.max(self.coords[k + 1].abs());
            k += 2;
        }
        m
    }

    /// Real part (as a Hermitian matrix with zero imaginary coordinates).
    pub fn real_part(&self) -> Self {
        let n = self.dim;
        let mut w = self.coords.clone();
        let mut k = n;
        for _ in 0..(n * (n - 1) / 2) {
            w[k + 1] = 0.0;
            k += 2;
        }
        Self::from_coords_unchecked(n, w)
    }

    /// Entrywise complex conjugate.
    pub fn conjugate(&self) -> Self {
        let n = self.dim;
        let mut w = self.coords.clone();
        let mut k = n;
        for _ in 0..(n * (n - 1) / 2) {
            w[k + 1] = -w[k + 1];
            k += 2;
        }
        Self::from_coords_unchecked(n, w)
    }

    /// Scale by a real factor.
    pub fn scale(&self, s: f64) -> Self {
        Self::from_coords_unchecked(self.dim, &self.coords * s)
    }

    /// Sum of two Hermitian matrices.
    pub fn add(&self, other: &Self) -> Self {
        Self::from_coords_unchecked(self.dim, &self.coords + &other.coords)
    }

    /// Difference of two Hermitian matrices.
    pub fn sub(&self, other: &Self) -> Self {
        Self::from_coords_unchecked(self.dim, &self.coords - &other.coords)
    }

    /// Quadratic form `Re(v^H A v)`.
    pub fn quadratic_form(&self, v: &CVec) -> f64 {
        let av = &self.mat * v;
        v.dotc(&av).re
    }
}

fn coords_of(m: &CMat) -> RVec {
    let n = m.nrows();
    let mut w = RVec::zeros(n * n);
    for i in 0..n {
        w[i] = m[(i, i)].re;
    }
    let mut k = n;
    for i in 0..n {
        for j in (i + 1)..n {
            // Average the conjugate pair so near-Hermitian inputs canonicalize.
            let e = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            w[k] = SQRT2 * e.re;
            w[k + 1] = SQRT2 * e.im;
            k += 2;
        }
    }
    w
}

fn materialize(n: usize, w: &RVec) -> CMat {
    let mut m = CMat::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = C64::new(w[i], 0.0);
    }
    let mut k = n;
    for i in 0..n {
        for j in (i + 1)..n {
            let e = C64::new(w[k] / SQRT2, w[k + 1] / SQRT2);
            m[(i, j)] = e;
            m[(j, i)] = e.conj();
            k += 2;
        }
    }
    m
}

/// Map a Hermitian matrix to its real coordinate vector.
pub fn vectorize(a: &HermitianMatrix) -> VectorizedHermitian {
    VectorizedHermitian {
        dim: a.dim(),
        coords: a.coords().clone(),
    }
}

/// Inverse of [`vectorize`].
pub fn devectorize(w: &VectorizedHermitian) -> Result<HermitianMatrix> {
    HermitianMatrix::from_coords(w.dim, w.coords.clone())
}

/// Orthonormal basis of the Hermitian matrix space.
///
/// `N` diagonal matrices `diag(b_n)` built from an orthonormal real basis
/// `b_1 = 1/sqrt(N), b_2, ..., b_N`, plus for each `n < l` a real-part and an
/// imaginary-part off-diagonal generator scaled by `1/sqrt(2)`.
#[derive(Debug, Clone)]
pub struct OrthonormalBasis {
    pub dim: usize,
    pub diagonal_part: Vec<HermitianMatrix>,
    pub offdiag_real: Vec<HermitianMatrix>,
    pub offdiag_imag: Vec<HermitianMatrix>,
}

impl OrthonormalBasis {
    /// All `N^2` basis matrices in a fixed order.
    pub fn all(&self) -> impl Iterator<Item = &HermitianMatrix> {
        self.diagonal_part
            .iter()
            .chain(self.offdiag_real.iter())
            .chain(self.offdiag_imag.iter())
    }

    pub fn len(&self) -> usize {
        self.dim * self.dim
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Build the orthonormal basis for dimension `n`.
///
/// The diagonal sub-basis starts from the normalized all-ones vector and is
/// completed deterministically by Gram-Schmidt over the standard basis.
pub fn build_basis(n: usize) -> Result<OrthonormalBasis> {
    if n == 0 {
        return Err(Error::Domain("basis dimension must be >= 1".into()));
    }
    // Diagonal directions.
    let mut dirs: Vec<RVec> = Vec::with_capacity(n);
    dirs.push(RVec::from_element(n, 1.0 / (n as f64).sqrt()));
    for c in 0..n {
        if dirs.len() == n {
            break;
        }
        let mut v = RVec::zeros(n);
        v[c] = 1.0;
        for d in &dirs {
            let proj = d.dot(&v);
            v -= d * proj;
        }
        let norm = v.norm();
        if norm > 1e-8 {
            dirs.push(v / norm);
        }
    }
    debug_assert_eq!(dirs.len(), n);

    let diagonal_part = dirs
        .iter()
        .map(|d| {
            let mut w = RVec::zeros(n * n);
            for i in 0..n {
                w[i] = d[i];
            }
            HermitianMatrix::from_coords(n, w).expect("diag basis")
        })
        .collect();

    let mut offdiag_real = Vec::with_capacity(n * (n - 1) / 2);
    let mut offdiag_imag = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let mut e_r = CMat::zeros(n, n);
            e_r[(i, j)] = C64::new(1.0 / SQRT2, 0.0);
            e_r[(j, i)] = C64::new(1.0 / SQRT2, 0.0);
            offdiag_real.push(HermitianMatrix::new(e_r).expect("offdiag real"));
            let mut e_i = CMat::zeros(n, n);
            e_i[(i, j)] = C64::new(0.0, 1.0 / SQRT2);
            e_i[(j, i)] = C64::new(0.0, -1.0 / SQRT2);
            offdiag_imag.push(HermitianMatrix::new(e_i).expect("offdiag imag"));
        }
    }

    Ok(OrthonormalBasis {
        dim: n,
        diagonal_part,
        offdiag_real,
        offdiag_imag,
    })
}

/// Dimension of the span of all reflection autocorrelation matrices for an
/// `N`-element equivalent reflection vector with `b` phase bits:
/// `(N^2 - N)/2 + 1` for `b = 1`, `N^2 - N + 1` for `b >= 2`.
pub fn dimension_bound(n: usize, bits: u32) -> usize {
    assert!(n >= 1 && bits >= 1);
    if bits == 1 {
        (n * n - n) / 2 + 1
    } else {
        n * n - n + 1
    }
}

/// Rank (over the reals) of the span of the given Hermitian matrices,
/// computed on their coordinate vectors with a relative singular-value
/// threshold of `1e-10`.
pub fn empirical_dimension(mats: &[HermitianMatrix]) -> Result<usize> {
    if mats.is_empty() {
        return Ok(0);
    }
    let n = mats[0].dim();
    for m in mats {
        if m.dim() != n {
            return Err(Error::Dimension(
                "empirical_dimension requires equal dimensions".into(),
            ));
        }
    }
    let mut stacked = RMat::zeros(n * n, mats.len());
    for (t, m) in mats.iter().enumerate() {
        stacked.set_column(t, m.coords());
    }
    Ok(matrix_rank(&stacked, 1e-10))
}

/// Rank with a relative singular-value threshold.
pub fn matrix_rank(m: &RMat, rel_tol: f64) -> usize {
    let svd = m.clone().svd(false, false);
    let smax = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    if smax == 0.0 {
        return 0;
    }
    svd.singular_values
        .iter()
        .filter(|&&s| s > rel_tol * smax)
        .count()
}
