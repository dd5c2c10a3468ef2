//! Sparse symmetric storage, direct factorizations, and power-iteration
//! spectral estimates.
//!
//! Matrices produced by the assembly are symmetric; only the lower triangle
//! is stored ([`SparseSym`]), which both halves the memory and makes the
//! symmetry exact by construction. Factorizations are delegated to `faer`:
//! Cholesky for positive definite blocks, pivoted sparse LU for the
//! indefinite saddle-point matrices. Spectral quantities (inf-sup constants,
//! condition estimates) are computed with plain power iteration, optionally
//! in a metric inner product, with deterministic start vectors.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use thiserror::Error;

/// Errors from the linear algebra layer.
#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix construction failed: {0}")]
    Construction(String),
    #[error(
        "Cholesky breakdown: matrix is not positive definite \
         (a zero augmentation parameter r produces exactly this)"
    )]
    NotPositiveDefinite,
    #[error("sparse LU failed: matrix is singular")]
    Singular,
}

/// Triplet accumulator for building sparse matrices.
#[derive(Debug, Clone, Default)]
pub struct TripletBuilder {
    entries: Vec<Triplet<u32, u32, f64>>,
}

impl TripletBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        if value != 0.0 {
            self.entries.push(Triplet::new(row as u32, col as u32, value));
        }
    }

    /// Compresses into column-major storage; duplicate entries are summed.
    pub fn build(self, nrows: usize, ncols: usize) -> Result<SparseMat, LinalgError> {
        let inner = SparseColMat::try_new_from_triplets(nrows, ncols, &self.entries)
            .map_err(|e| LinalgError::Construction(format!("{e:?}")))?;
        Ok(SparseMat { inner })
    }

    /// Compresses keeping only the lower triangle (entries with row < col are
    /// rejected in debug builds and dropped otherwise).
    pub fn build_sym_lower(self, n: usize) -> Result<SparseSym, LinalgError> {
        debug_assert!(self.entries.iter().all(|t| t.row >= t.col), "upper-triangle entry");
        let entries: Vec<_> = self.entries.into_iter().filter(|t| t.row >= t.col).collect();
        let lower = SparseColMat::try_new_from_triplets(n, n, &entries)
            .map_err(|e| LinalgError::Construction(format!("{e:?}")))?;
        Ok(SparseSym { lower })
    }
}

/// General sparse matrix (column compressed), used for the rectangular
/// constraint blocks.
#[derive(Debug, Clone)]
pub struct SparseMat {
    inner: SparseColMat<u32, f64>,
}

impl SparseMat {
    pub fn nrows(&self) -> usize {
        self.inner.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.inner.ncols()
    }

    pub fn nnz(&self) -> usize {
        self.inner.compute_nnz()
    }

    /// `y = M x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols());
        assert_eq!(y.len(), self.nrows());
        y.fill(0.0);
        let sym = self.inner.symbolic();
        for j in 0..self.ncols() {
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            for (i, v) in sym.row_idx_of_col(j).zip(self.inner.val_of_col(j)) {
                y[i] += v * xj;
            }
        }
    }

    /// `y = Mᵀ x`.
    pub fn matvec_transpose(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.nrows());
        assert_eq!(y.len(), self.ncols());
        let sym = self.inner.symbolic();
        for j in 0..self.ncols() {
            let mut acc = 0.0;
            for (i, v) in sym.row_idx_of_col(j).zip(self.inner.val_of_col(j)) {
                acc += v * x[i];
            }
            y[j] = acc;
        }
    }

    /// Iterates stored entries as `(row, col, value)`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let sym = self.inner.symbolic();
        (0..self.ncols()).flat_map(move |j| {
            sym.row_idx_of_col(j)
                .zip(self.inner.val_of_col(j))
                .map(move |(i, v)| (i, j, *v))
        })
    }

    /// Pivoted sparse LU factorization (for unsymmetric or indefinite
    /// systems).
    pub fn factor_lu(&self) -> Result<LuFactor, LinalgError> {
        let lu = self.inner.sp_lu().map_err(|_| LinalgError::Singular)?;
        Ok(LuFactor { lu, n: self.nrows() })
    }
}

/// Symmetric sparse matrix, lower triangle stored.
#[derive(Debug, Clone)]
pub struct SparseSym {
    lower: SparseColMat<u32, f64>,
}

impl SparseSym {
    pub fn n(&self) -> usize {
        self.lower.nrows()
    }

    /// Stored (lower-triangle) entry count.
    pub fn nnz_lower(&self) -> usize {
        self.lower.compute_nnz()
    }

    /// `y = M x` using the symmetric expansion of the lower triangle.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n());
        assert_eq!(y.len(), self.n());
        y.fill(0.0);
        let sym = self.lower.symbolic();
        for j in 0..self.n() {
            let xj = x[j];
            let mut acc = 0.0;
            for (i, v) in sym.row_idx_of_col(j).zip(self.lower.val_of_col(j)) {
                y[i] += v * xj;
                if i != j {
                    acc += v * x[i];
                }
            }
            y[j] += acc;
        }
    }

    /// Quadratic form `xᵀ M x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let mut y = vec![0.0; self.n()];
        self.matvec(x, &mut y);
        dot(x, &y)
    }

    /// Iterates stored lower-triangle entries as `(row, col, value)`.
    pub fn entries_lower(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let sym = self.lower.symbolic();
        (0..self.n()).flat_map(move |j| {
            sym.row_idx_of_col(j)
                .zip(self.lower.val_of_col(j))
                .map(move |(i, v)| (i, j, *v))
        })
    }

    /// Cholesky factorization; fails loudly when the matrix is not positive
    /// definite.
    pub fn factor_spd(&self) -> Result<SpdFactor, LinalgError> {
        let chol = self
            .lower
            .as_ref()
            .sp_cholesky(faer::Side::Lower)
            .map_err(|_| LinalgError::NotPositiveDefinite)?;
        Ok(SpdFactor { chol, n: self.n() })
    }

    /// Pivoted LU of the full symmetric matrix (for indefinite saddle
    /// systems).
    pub fn factor_indef(&self) -> Result<LuFactor, LinalgError> {
        let mut full = TripletBuilder::new();
        for (i, j, v) in self.entries_lower() {
            full.push(i, j, v);
            if i != j {
                full.push(j, i, v);
            }
        }
        full.build(self.n(), self.n())?.factor_lu()
    }

    /// Largest-magnitude diagonal entry (used for relative scales).
    pub fn max_abs_diag(&self) -> f64 {
        (0..self.n())
            .filter_map(|j| {
                let sym = self.lower.symbolic();
                sym.row_idx_of_col(j)
                    .zip(self.lower.val_of_col(j))
                    .find(|(i, _)| *i == j)
                    .map(|(_, v)| v.abs())
            })
            .fold(0.0, f64::max)
    }
}

/// Cholesky factorization handle.
pub struct SpdFactor {
    chol: faer::sparse::linalg::solvers::Llt<u32, f64>,
    n: usize,
}

impl SpdFactor {
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let rhs = faer::MatMut::from_column_major_slice_mut(x, self.n, 1);
        self.chol.solve_in_place(rhs);
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Sparse LU factorization handle.
pub struct LuFactor {
    lu: faer::sparse::linalg::solvers::Lu<u32, f64>,
    n: usize,
}

impl LuFactor {
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let rhs = faer::MatMut::from_column_major_slice_mut(x, self.n, 1);
        self.lu.solve_in_place(rhs);
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Outcome of a power-iteration estimate.
#[derive(Debug, Clone, Copy)]
pub struct EigenEstimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Which end of the spectrum [`extreme_eigen`] estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenSide {
    /// Largest eigenvalue of the operator itself.
    Largest,
    /// Smallest eigenvalue, estimated by running the iteration on the
    /// *inverse* operator supplied by the caller (shift-free inverse
    /// iteration) and returning the reciprocal of its dominant eigenvalue.
    SmallestViaInverse,
}

/// Deterministic pseudo-random start vector (splitmix64), normalized.
pub fn seeded_start(n: usize, seed: u64) -> Vec<f64> {
    let mut state = seed.wrapping_add(0x9e3779b97f4a7c15);
    let mut next = move || {
        state = state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    };
    let mut v: Vec<f64> = (0..n).map(|_| (next() >> 11) as f64 / (1u64 << 53) as f64 - 0.5).collect();
    let norm = norm2(&v);
    v.iter_mut().for_each(|x| *x /= norm);
    v
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Power iteration for the dominant eigenvalue of a linear operator that is
/// self-adjoint (and nonnegative) in the inner product induced by the
/// optional SPD `metric`; `metric = None` means the Euclidean inner product.
///
/// Convergence is declared when the successive Rayleigh-quotient estimates
/// change by less than `tol` relatively.
pub fn extreme_eigen<F>(
    n: usize,
    mut apply: F,
    metric: Option<&SparseSym>,
    side: EigenSide,
    tol: f64,
    maxit: usize,
) -> EigenEstimate
where
    F: FnMut(&[f64], &mut [f64]),
{
    let mut x = seeded_start(n, 0x5eed);
    let mut y = vec![0.0; n];
    let mut jx = vec![0.0; n];
    let mut theta_old = f64::NAN;
    let mut estimate = EigenEstimate { value: f64::NAN, iterations: 0, converged: false };
    for it in 1..=maxit {
        apply(&x, &mut y);
        // Rayleigh quotient θ = <Jy,x>/<Jx,x> (J = metric or identity).
        let theta = match metric {
            Some(j) => {
                j.matvec(&y, &mut jx);
                let num = dot(&jx, &x);
                j.matvec(&x, &mut jx);
                num / dot(&jx, &x)
            }
            None => dot(&y, &x) / dot(&x, &x),
        };
        let norm = norm2(&y);
        if norm == 0.0 {
            // Operator annihilates the start vector: dominant eigenvalue 0.
            return EigenEstimate { value: 0.0, iterations: it, converged: true };
        }
        x.iter_mut().zip(&y).for_each(|(xi, yi)| *xi = yi / norm);
        estimate = EigenEstimate { value: theta, iterations: it, converged: false };
        if (theta - theta_old).abs() <= tol * theta.abs().max(f64::MIN_POSITIVE) {
            estimate.converged = true;
            break;
        }
        theta_old = theta;
    }
    if side == EigenSide::SmallestViaInverse {
        estimate.value = estimate.value.recip();
    }
    estimate
}

/// Condition-number estimate `|λ|max / |λ|min` of a symmetric matrix, by
/// power iteration on the matrix and on its (LU-factored) inverse.
///
/// These are iterative estimates with relative tolerance `1e-6`; for the
/// extremely ill-conditioned saddle matrices of the fine meshes they are
/// order-of-magnitude figures, which is how they should be read.
pub fn cond_estimate(mat: &SparseSym, maxit: usize) -> Result<EigenEstimate, LinalgError> {
    let tol = 1e-6;
    let lu = mat.factor_indef()?;
    let hi = extreme_eigen(
        mat.n(),
        |x, y| mat.matvec(x, y),
        None,
        EigenSide::Largest,
        tol,
        maxit,
    );
    let lo = extreme_eigen(
        mat.n(),
        |x, y| {
            y.copy_from_slice(x);
            lu.solve_in_place(y);
        },
        None,
        EigenSide::SmallestViaInverse,
        tol,
        maxit,
    );
    Ok(EigenEstimate {
        value: hi.value.abs() / lo.value.abs(),
        iterations: hi.iterations + lo.iterations,
        converged: hi.converged && lo.converged,
    })
}

/// Writes a matrix in coordinate text format (`row col value`, 17
/// significant digits, 0-based indices), suitable for external
/// cross-validation.
pub fn write_coordinate<W: std::io::Write>(
    w: &mut W,
    nrows: usize,
    ncols: usize,
    entries: impl Iterator<Item = (usize, usize, f64)>,
) -> std::io::Result<()> {
    writeln!(w, "% coordinate {nrows} {ncols}")?;
    for (i, j, v) in entries {
        writeln!(w, "{i} {j} {v:.16e}")?;
    }
    Ok(())
}
