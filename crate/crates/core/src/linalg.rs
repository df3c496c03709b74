//! Dense complex linear algebra shared by the rest of the crate.
//!
//! Eigenvalues are always reported in descending order: `lambda_k(A, 1)` is the
//! largest eigenvalue, `lambda_k(A, 2)` the second largest, and so on.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type ComplexMatrix = DMatrix<Complex64>;

/// Relative deviation from exact (conjugate) symmetry accepted on construction.
pub const DEFAULT_SYMMETRY_TOL: f64 = 1e-12;

/// Relative singular-value cutoff used by rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinalgError {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix must be non-empty")]
    Empty,
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("matrix is not Hermitian: relative deviation {deviation:.3e} exceeds {tol:.1e}")]
    NotHermitian { deviation: f64, tol: f64 },
    #[error("matrix is not symmetric: relative deviation {deviation:.3e} exceeds {tol:.1e}")]
    NotSymmetric { deviation: f64, tol: f64 },
    #[error("eigenvalue index {k} out of range 1..={n}")]
    IndexOutOfRange { k: usize, n: usize },
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn check_finite(a: &ComplexMatrix) -> Result<(), LinalgError> {
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            let z = a[(i, j)];
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(LinalgError::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

fn check_square(a: &ComplexMatrix) -> Result<usize, LinalgError> {
    if a.nrows() != a.ncols() {
        return Err(LinalgError::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    if a.nrows() == 0 {
        return Err(LinalgError::Empty);
    }
    Ok(a.nrows())
}

/// Deviation `‖a − b‖_F / ‖a‖_F`, with a zero matrix treated as exact.
fn relative_deviation(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let scale = a.norm();
    if scale == 0.0 {
        return 0.0;
    }
    (a - b).norm() / scale
}

/// A Hermitian matrix, stored as `(A + A^*)/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(ComplexMatrix);

impl HermitianMatrix {
    pub fn new(a: ComplexMatrix) -> Result<Self, LinalgError> {
        Self::with_tolerance(a, DEFAULT_SYMMETRY_TOL)
    }

    pub fn with_tolerance(a: ComplexMatrix, tol: f64) -> Result<Self, LinalgError> {
        check_square(&a)?;
        check_finite(&a)?;
        let adj = a.adjoint();
        let deviation = relative_deviation(&a, &adj);
        if deviation > tol {
            return Err(LinalgError::NotHermitian { deviation, tol });
        }
        Ok(Self((a + adj).unscale(2.0)))
    }

    /// Wraps a matrix already known to be Hermitian (internal assembly paths).
    pub(crate) fn from_trusted(a: ComplexMatrix) -> Self {
        debug_assert_eq!(a.nrows(), a.ncols());
        Self(a)
    }

    pub fn identity(n: usize) -> Self {
        Self(ComplexMatrix::identity(n, n))
    }

    pub fn from_real_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        Self(ComplexMatrix::from_fn(n, n, |i, j| {
            if i == j {
                c64(d[i], 0.0)
            } else {
                Complex64::default()
            }
        }))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_inner(self) -> ComplexMatrix {
        self.0
    }

    pub fn neg(&self) -> Self {
        Self(-&self.0)
    }

    pub fn conj(&self) -> Self {
        Self(self.0.map(|z| z.conj()))
    }
}

/// A complex symmetric matrix (`S = S^T`, not conjugated), stored as `(A + A^T)/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix(ComplexMatrix);

impl SymmetricMatrix {
    pub fn new(a: ComplexMatrix) -> Result<Self, LinalgError> {
        Self::with_tolerance(a, DEFAULT_SYMMETRY_TOL)
    }

    pub fn with_tolerance(a: ComplexMatrix, tol: f64) -> Result<Self, LinalgError> {
        check_square(&a)?;
        check_finite(&a)?;
        let tr = a.transpose();
        let deviation = relative_deviation(&a, &tr);
        if deviation > tol {
            return Err(LinalgError::NotSymmetric { deviation, tol });
        }
        Ok(Self((a + tr).unscale(2.0)))
    }

    pub(crate) fn from_trusted(a: ComplexMatrix) -> Self {
        debug_assert_eq!(a.nrows(), a.ncols());
        Self(a)
    }

    pub fn identity(n: usize) -> Self {
        Self(ComplexMatrix::identity(n, n))
    }

    pub fn from_diagonal(d: &[Complex64]) -> Self {
        let n = d.len();
        Self(ComplexMatrix::from_fn(n, n, |i, j| {
            if i == j {
                d[i]
            } else {
                Complex64::default()
            }
        }))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_inner(self) -> ComplexMatrix {
        self.0
    }

    pub fn neg(&self) -> Self {
        Self(-&self.0)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self(self.0.map(|z| z * s))
    }
}

/// Full Hermitian spectrum, eigenvalues sorted non-increasing.
///
/// Column `j` of `eigenvectors` belongs to `eigenvalues[j]`.
#[derive(Debug, Clone)]
pub struct SpectrumDescending {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: ComplexMatrix,
}

impl SpectrumDescending {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn vector(&self, j: usize) -> nalgebra::DVector<Complex64> {
        self.eigenvectors.column(j).into_owned()
    }
}

fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx
}

pub fn eig_hermitian(a: &HermitianMatrix) -> SpectrumDescending {
    eig_hermitian_raw(a.as_matrix())
}

pub(crate) fn eig_hermitian_raw(a: &ComplexMatrix) -> SpectrumDescending {
    let n = a.nrows();
    let eig = a.clone().symmetric_eigen();
    let values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let order = descending_order(&values);
    let eigenvalues = order.iter().map(|&i| values[i]).collect();
    let mut eigenvectors = ComplexMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    SpectrumDescending {
        eigenvalues,
        eigenvectors,
    }
}

/// Eigenvalues only, descending.
pub fn eigenvalues_descending(a: &HermitianMatrix) -> Vec<f64> {
    eigenvalues_descending_raw(a.as_matrix())
}

pub(crate) fn eigenvalues_descending_raw(a: &ComplexMatrix) -> Vec<f64> {
    let mut values: Vec<f64> = a.clone().symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(|x, y| y.total_cmp(x));
    values
}

/// k-th largest eigenvalue (1-based, counted with multiplicity).
pub fn lambda_k(a: &HermitianMatrix, k: usize) -> Result<f64, LinalgError> {
    let n = a.dim();
    if k == 0 || k > n {
        return Err(LinalgError::IndexOutOfRange { k, n });
    }
    Ok(eigenvalues_descending(a)[k - 1])
}

pub fn lambda_max(a: &HermitianMatrix) -> f64 {
    eigenvalues_descending(a)[0]
}

pub fn lambda_min(a: &HermitianMatrix) -> f64 {
    *eigenvalues_descending(a).last().expect("non-empty")
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// All singular values, descending.
pub fn singular_values(a: &ComplexMatrix) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

pub fn spectral_norm(a: &ComplexMatrix) -> f64 {
    singular_values(a).first().copied().unwrap_or(0.0)
}

pub fn sigma_min(a: &ComplexMatrix) -> f64 {
    singular_values(a).last().copied().unwrap_or(0.0)
}

/// Number of singular values strictly above `tol · σ_max`.
pub fn numerical_rank(a: &ComplexMatrix, tol: f64) -> Result<usize, LinalgError> {
    if !(tol > 0.0) {
        return Err(LinalgError::InvalidTolerance(tol));
    }
    Ok(rank_from_singular_values(&singular_values(a), tol))
}

pub fn rank_from_singular_values(s: &[f64], tol: f64) -> usize {
    let smax = s.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&v| v > tol * smax).count()
}

/// `[[0, conj(S)], [S, 0]]`, whose spectrum is `{±σ_i(S)}`.
pub fn takagi_block(s: &ComplexMatrix) -> ComplexMatrix {
    let n = s.nrows();
    let mut out = ComplexMatrix::zeros(2 * n, 2 * n);
    out.view_mut((0, n), (n, n)).copy_from(&s.map(|z| z.conj()));
    out.view_mut((n, 0), (n, n)).copy_from(s);
    out
}
