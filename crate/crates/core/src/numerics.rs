//! Dense linear-algebra kernels: symmetric eigendecomposition, spectral
//! propagators, a Padé matrix exponential for non-normal generators and
//! Kronecker products.
//!
//! Storage is dense [`nalgebra::DMatrix`] throughout. Every constructor that
//! would allocate a matrix larger than the configured cap fails with
//! [`Error::Capacity`].

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Default upper bound on the side length of any dense matrix.
pub const DEFAULT_MAX_DIM: usize = 4096;

const RECONSTRUCTION_TOL: f64 = 1e-10;

pub(crate) fn check_cap(dim: usize, cap: usize) -> Result<()> {
    if dim > cap {
        return Err(Error::Capacity {
            requested: dim,
            cap,
        });
    }
    Ok(())
}

/// Real symmetric matrix. Symmetry is checked exactly on construction.
#[derive(Clone, Debug, PartialEq)]
pub struct RealSymMatrix(DMatrix<f64>);

impl RealSymMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                actual: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(Error::invalid("matrix dimension must be positive"));
        }
        check_cap(m.nrows(), DEFAULT_MAX_DIM)?;
        for i in 0..m.nrows() {
            for j in 0..i {
                if m[(i, j)] != m[(j, i)] {
                    return Err(Error::NotSymmetric { row: i, col: j });
                }
            }
            for j in 0..m.ncols() {
                if !m[(i, j)].is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(Self(m))
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        Self::new(DMatrix::zeros(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0[(row, col)]
    }

    /// Principal submatrix on the given (0-based) index list.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), cols.len(), |i, j| self.0[(rows[i], cols[j])])
    }

    pub fn to_complex(&self) -> ComplexMatrix {
        ComplexMatrix(self.0.map(|v| C64::new(v, 0.0)))
    }
}

/// Dense complex matrix with finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix(DMatrix<C64>);

impl ComplexMatrix {
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        if let Some(idx) = m
            .iter()
            .position(|z| !(z.re.is_finite() && z.im.is_finite()))
        {
            // column-major storage
            return Err(Error::NonFinite {
                row: idx % m.nrows(),
                col: idx / m.nrows(),
            });
        }
        Ok(Self(m))
    }

    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(DMatrix::zeros(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<C64> {
        self.0
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.0[(row, col)]
    }

    pub fn mul(&self, other: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 * &other.0)
    }

    pub fn apply(&self, v: &DVector<C64>) -> DVector<C64> {
        &self.0 * v
    }

    pub fn adjoint(&self) -> ComplexMatrix {
        ComplexMatrix(self.0.adjoint())
    }

    pub fn scale(&self, s: C64) -> ComplexMatrix {
        ComplexMatrix(&self.0 * s)
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Induced 1-norm (maximum absolute column sum).
    pub fn norm1(&self) -> f64 {
        norm1(&self.0)
    }
}

fn norm1(m: &DMatrix<C64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Eigenvalues in ascending order with orthonormal eigenvectors as columns.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl SpectralDecomposition {
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Q diag(λ) Qᵀ.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let q = &self.eigenvectors;
        q * DMatrix::from_diagonal(&self.eigenvalues) * q.transpose()
    }
}

/// Symmetric eigendecomposition.
///
/// Eigenvalues are returned in ascending order. Each eigenvector is signed so
/// that its first component with magnitude above 1e-12 is positive, which makes
/// the output deterministic for non-degenerate spectra.
pub fn eig_sym(m: &RealSymMatrix) -> Result<SpectralDecomposition> {
    let dim = m.dim();
    let eig = SymmetricEigen::try_new(m.matrix().clone(), f64::EPSILON, 0).ok_or(
        Error::NumericalFailure {
            context: "symmetric eigensolver",
            dim,
            residual: f64::NAN,
        },
    )?;

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let eigenvalues = DVector::from_iterator(dim, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut eigenvectors = DMatrix::zeros(dim, dim);
    for (col, &k) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        let sign = v
            .iter()
            .find(|x| x.abs() > 1e-12)
            .map_or(1.0, |x| x.signum());
        eigenvectors.set_column(col, &(v * sign));
    }

    let spec = SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    };
    let scale = m.matrix().norm().max(1.0);
    let residual = (spec.reconstruct() - m.matrix()).norm() / scale;
    if !(residual <= RECONSTRUCTION_TOL) {
        return Err(Error::NumericalFailure {
            context: "symmetric eigensolver reconstruction",
            dim,
            residual,
        });
    }
    Ok(spec)
}

/// Unitary propagator `exp(-i H t)` built from a spectral decomposition of `H`.
pub fn propagator(spec: &SpectralDecomposition, t: f64) -> Result<ComplexMatrix> {
    if !t.is_finite() {
        return Err(Error::invalid(format!(
            "propagation time {t} is not finite"
        )));
    }
    let q = spec.eigenvectors.map(|v| C64::new(v, 0.0));
    let phases = spec.eigenvalues.map(|e| C64::from_polar(1.0, -e * t));
    let mut qd = q.clone();
    for (mut col, ph) in qd.column_iter_mut().zip(phases.iter()) {
        col *= *ph;
    }
    ComplexMatrix::new(qd * q.transpose())
}

// Padé coefficients and 1-norm thresholds for scaling and squaring.
const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539_398_330_063_23e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA13: f64 = 5.371920351148152;

// More squarings than this means the input norm is beyond anything the
// exponential can represent.
const MAX_SQUARINGS: i32 = 1000;

/// Matrix exponential by scaling and squaring with a diagonal Padé approximant
/// (orders 3, 5, 7, 9 or 13 chosen from the 1-norm).
///
/// Intended for non-normal generators such as `-i H_eff τ`; Hermitian
/// generators should go through [`propagator`].
pub fn expm_complex(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let dim = m.dim();
    if dim == 0 {
        return Err(Error::invalid("matrix dimension must be positive"));
    }
    let a = m.matrix();
    let norm = norm1(a);
    if !norm.is_finite() {
        return Err(Error::NumericalFailure {
            context: "matrix exponential input norm",
            dim,
            residual: norm,
        });
    }
    let ident = DMatrix::<C64>::identity(dim, dim);

    for &(order, theta) in &THETA {
        if norm <= theta {
            let (u, v) = pade_low(a, &ident, order);
            return pade_solve(u, v, 0, dim);
        }
    }

    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    if s > MAX_SQUARINGS {
        return Err(Error::NumericalFailure {
            context: "matrix exponential scaling",
            dim,
            residual: norm,
        });
    }
    let a = a * C64::new(0.5f64.powi(s), 0.0);
    let (u, v) = pade13(&a, &ident);
    pade_solve(u, v, s, dim)
}

fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn pade_low(a: &DMatrix<C64>, ident: &DMatrix<C64>, order: usize) -> (DMatrix<C64>, DMatrix<C64>) {
    let b: &[f64] = match order {
        3 => &PADE3,
        5 => &PADE5,
        7 => &PADE7,
        _ => &PADE9,
    };
    let a2 = a * a;
    let mut power = ident.clone();
    let mut u_inner = ident * real(b[1]);
    let mut v = ident * real(b[0]);
    for k in 1..=order / 2 {
        power = &power * &a2;
        u_inner += &power * real(b[2 * k + 1]);
        v += &power * real(b[2 * k]);
    }
    (a * u_inner, v)
}

fn pade13(a: &DMatrix<C64>, ident: &DMatrix<C64>) -> (DMatrix<C64>, DMatrix<C64>) {
    let b = &PADE13;
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_high = &a6 * real(b[13]) + &a4 * real(b[11]) + &a2 * real(b[9]);
    let u_inner =
        &a6 * u_high + &a6 * real(b[7]) + &a4 * real(b[5]) + &a2 * real(b[3]) + ident * real(b[1]);
    let u = a * u_inner;
    let v_high = &a6 * real(b[12]) + &a4 * real(b[10]) + &a2 * real(b[8]);
    let v =
        &a6 * v_high + &a6 * real(b[6]) + &a4 * real(b[4]) + &a2 * real(b[2]) + ident * real(b[0]);
    (u, v)
}

fn pade_solve(
    u: DMatrix<C64>,
    v: DMatrix<C64>,
    squarings: i32,
    dim: usize,
) -> Result<ComplexMatrix> {
    let q = &v - &u;
    let p = &v + &u;
    let mut r = q.lu().solve(&p).ok_or(Error::NumericalFailure {
        context: "Padé denominator solve",
        dim,
        residual: f64::NAN,
    })?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    ComplexMatrix::new(r).map_err(|_| Error::NumericalFailure {
        context: "matrix exponential overflow",
        dim,
        residual: f64::INFINITY,
    })
}

/// Complex matrix stored as separate real and imaginary column-major parts,
/// for repeated matrix-vector products. The column-axpy loop vectorises
/// where the interleaved `Complex<f64>` product does not.
#[derive(Clone, Debug)]
pub(crate) struct SplitMatrix {
    dim: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

/// Vector in split form, paired with [`SplitMatrix`].
#[derive(Clone, Debug)]
pub(crate) struct SplitVector {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl SplitVector {
    pub fn from_complex(v: &DVector<C64>) -> Self {
        Self {
            re: v.iter().map(|z| z.re).collect(),
            im: v.iter().map(|z| z.im).collect(),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            re: vec![0.0; dim],
            im: vec![0.0; dim],
        }
    }

    pub fn to_complex(&self) -> DVector<C64> {
        DVector::from_iterator(
            self.re.len(),
            self.re.iter().zip(&self.im).map(|(&r, &i)| C64::new(r, i)),
        )
    }

    pub fn norm_sq(&self) -> f64 {
        self.re.iter().map(|x| x * x).sum::<f64>() + self.im.iter().map(|x| x * x).sum::<f64>()
    }
}

impl SplitMatrix {
    pub fn new(m: &DMatrix<C64>) -> Self {
        assert_eq!(m.nrows(), m.ncols());
        Self {
            dim: m.nrows(),
            re: m.iter().map(|z| z.re).collect(),
            im: m.iter().map(|z| z.im).collect(),
        }
    }

    /// `y <- A x`, four columns per pass over `y`.
    pub fn apply(&self, x: &SplitVector, y: &mut SplitVector) {
        let n = self.dim;
        y.re.iter_mut().for_each(|v| *v = 0.0);
        y.im.iter_mut().for_each(|v| *v = 0.0);
        fn col(m: &[f64], n: usize, j: usize) -> &[f64] {
            &m[j * n..(j + 1) * n]
        }
        let mut j = 0;
        while j + 4 <= n {
            let (r0, r1, r2, r3) = (
                col(&self.re, n, j),
                col(&self.re, n, j + 1),
                col(&self.re, n, j + 2),
                col(&self.re, n, j + 3),
            );
            let (i0, i1, i2, i3) = (
                col(&self.im, n, j),
                col(&self.im, n, j + 1),
                col(&self.im, n, j + 2),
                col(&self.im, n, j + 3),
            );
            let xr = [x.re[j], x.re[j + 1], x.re[j + 2], x.re[j + 3]];
            let xi = [x.im[j], x.im[j + 1], x.im[j + 2], x.im[j + 3]];
            for k in 0..n {
                y.re[k] += r0[k] * xr[0] - i0[k] * xi[0] + r1[k] * xr[1] - i1[k] * xi[1]
                    + r2[k] * xr[2]
                    - i2[k] * xi[2]
                    + r3[k] * xr[3]
                    - i3[k] * xi[3];
                y.im[k] += r0[k] * xi[0]
                    + i0[k] * xr[0]
                    + r1[k] * xi[1]
                    + i1[k] * xr[1]
                    + r2[k] * xi[2]
                    + i2[k] * xr[2]
                    + r3[k] * xi[3]
                    + i3[k] * xr[3];
            }
            j += 4;
        }
        for j in j..n {
            let (xr, xi) = (x.re[j], x.im[j]);
            for ((yr, yi), (&ar, &ai)) in
                y.re.iter_mut()
                    .zip(y.im.iter_mut())
                    .zip(col(&self.re, n, j).iter().zip(col(&self.im, n, j)))
            {
                *yr += ar * xr - ai * xi;
                *yi += ar * xi + ai * xr;
            }
        }
    }
}

/// Kronecker product with the default size cap.
///
/// Row index of the result is `i_a * dim(b) + i_b`, so for two lattice axes the
/// flattened site `(l_x, l_y)` (1-based) sits at `(l_x - 1) * N + l_y`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    kron_with_cap(a, b, DEFAULT_MAX_DIM)
}

pub fn kron_with_cap(a: &ComplexMatrix, b: &ComplexMatrix, cap: usize) -> Result<ComplexMatrix> {
    let rows = a.0.nrows() * b.0.nrows();
    let cols = a.0.ncols() * b.0.ncols();
    check_cap(rows.max(cols), cap)?;
    Ok(ComplexMatrix(a.0.kronecker(&b.0)))
}
