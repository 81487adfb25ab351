//! Dense Hermitian kernels: spectral decomposition, unitary exponential,
//! PSD square root, qubit partial transpose and finite differences.
//!
//! Every matrix function goes through [`eigh`]; there is no Padé path.

use nalgebra::linalg::SymmetricEigen;

use crate::spin_algebra::HermitianOperator;
use crate::{CMatrix, Error, Result, C64};

/// Eigenvalues above this (negative) value are roundoff and clamp to zero.
pub const NEGATIVE_HARD_LIMIT: f64 = -1.0e-8;

/// Non-negative eigenvalues at or below this are treated as exact zeros
/// before taking square roots. `sqrt(1e-16)` would otherwise inject 1e-8
/// into rank-deficient (pure) states.
pub const PSD_NOISE_FLOOR: f64 = 1.0e-12;

#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Unitary; column `i` belongs to `eigenvalues[i]`.
    pub eigenvectors: CMatrix,
}

impl EigenDecomposition {
    /// `V · diag(f(λ)) · V†`.
    pub fn apply<F>(&self, f: F) -> CMatrix
    where
        F: Fn(f64) -> C64,
    {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (j, &lambda) in self.eigenvalues.iter().enumerate() {
            let factor = f(lambda);
            for x in scaled.column_mut(j).iter_mut() {
                *x *= factor;
            }
        }
        scaled * v.adjoint()
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }
}

/// A unitary matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryOperator(CMatrix);

impl UnitaryOperator {
    pub const TOLERANCE: f64 = 1.0e-10;

    pub fn new(m: CMatrix) -> Result<Self> {
        let dev = unitarity_defect(&m)?;
        if dev >= Self::TOLERANCE {
            return Err(Error::Contract(format!(
                "matrix is not unitary: max|UU† - I| = {dev:e}"
            )));
        }
        Ok(UnitaryOperator(m))
    }

    pub(crate) fn new_unchecked(m: CMatrix) -> Self {
        UnitaryOperator(m)
    }

    pub fn identity(dim: usize) -> Self {
        UnitaryOperator(CMatrix::identity(dim, dim))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn adjoint(&self) -> UnitaryOperator {
        UnitaryOperator(self.0.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }
}

/// `max |U U† − I|`.
pub fn unitarity_defect(m: &CMatrix) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::Shape(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let n = m.nrows();
    Ok(max_abs(&(m * m.adjoint() - CMatrix::identity(n, n))))
}

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// `max |M − M†|`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// Full spectral decomposition with eigenvalues in ascending order.
pub fn eigh(m: &HermitianOperator) -> EigenDecomposition {
    let eig = SymmetricEigen::new(m.matrix().clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = CMatrix::from_fn(m.dim(), m.dim(), |r, c| eig.eigenvectors[(r, order[c])]);
    EigenDecomposition {
        eigenvalues,
        eigenvectors,
    }
}

/// Eigenvalues only, ascending. Cheaper than [`eigh`].
pub fn eigvalsh(m: &HermitianOperator) -> Vec<f64> {
    let mut values: Vec<f64> = m.matrix().clone().symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

/// `exp(-i h t)` from an existing decomposition of `h`. Exactly the
/// identity at `t = 0`.
pub fn expm_from_eigen(eig: &EigenDecomposition, t: f64) -> UnitaryOperator {
    if t == 0.0 {
        return UnitaryOperator::identity(eig.dim());
    }
    UnitaryOperator::new_unchecked(eig.apply(|lambda| C64::from_polar(1.0, -lambda * t)))
}

/// `exp(-i h t)` with `h` in rad/µs and `t` in µs.
pub fn expm_unitary(h: &HermitianOperator, t: f64) -> UnitaryOperator {
    expm_from_eigen(&eigh(h), t)
}

fn clamp_psd_eigenvalue(lambda: f64) -> Result<f64> {
    if lambda < NEGATIVE_HARD_LIMIT {
        return Err(Error::Contract(format!(
            "matrix is not positive semidefinite: eigenvalue {lambda:e}"
        )));
    }
    Ok(if lambda <= PSD_NOISE_FLOOR { 0.0 } else { lambda })
}

/// Principal square root of a positive semidefinite operator.
///
/// Eigenvalues in `[-1e-8, 1e-12]` are set to zero before the root; anything
/// more negative is rejected.
pub fn sqrtm_psd(m: &HermitianOperator) -> Result<HermitianOperator> {
    let eig = eigh(m);
    let roots = eig
        .eigenvalues
        .iter()
        .map(|&l| clamp_psd_eigenvalue(l).map(f64::sqrt))
        .collect::<Result<Vec<_>>>()?;
    let root = EigenDecomposition {
        eigenvalues: roots,
        eigenvectors: eig.eigenvectors,
    };
    Ok(HermitianOperator::symmetrized(root.apply(|s| C64::new(s, 0.0))))
}

/// `Tr sqrt(m)` for a PSD `m`, from its eigenvalues with the same clamping
/// as [`sqrtm_psd`].
pub fn trace_sqrt_psd(m: &HermitianOperator) -> Result<f64> {
    eigvalsh(m)
        .into_iter()
        .map(|l| clamp_psd_eigenvalue(l).map(f64::sqrt))
        .sum()
}

/// Partial transpose over the qubit of a `(2d)x(2d)` matrix viewed as 2x2
/// blocks of `d x d`: the off-diagonal blocks trade places, the diagonal
/// blocks stay.
pub fn partial_transpose_qubit(sigma: &CMatrix, bath_dim: usize) -> Result<CMatrix> {
    if sigma.nrows() != 2 * bath_dim || sigma.ncols() != 2 * bath_dim {
        return Err(Error::Shape(format!(
            "partial transpose expects {0}x{0} for bath dimension {bath_dim}, got {1}x{2}",
            2 * bath_dim,
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    let d = bath_dim;
    let mut out = sigma.clone();
    let upper = sigma.view((0, d), (d, d)).clone_owned();
    let lower = sigma.view((d, 0), (d, d)).clone_owned();
    out.view_mut((0, d), (d, d)).copy_from(&lower);
    out.view_mut((d, 0), (d, d)).copy_from(&upper);
    Ok(out)
}

/// First derivative on a uniform grid: central differences inside,
/// first-order one-sided differences at the two ends.
pub fn central_difference(series: &[f64], dt: f64) -> Result<Vec<f64>> {
    let n = series.len();
    if n < 3 {
        return Err(Error::Shape(format!(
            "central difference needs at least 3 samples, got {n}"
        )));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Domain(format!("time step must be positive, got {dt}")));
    }
    let mut out = Vec::with_capacity(n);
    out.push((series[1] - series[0]) / dt);
    out.extend(series.windows(3).map(|w| (w[2] - w[0]) / (2.0 * dt)));
    out.push((series[n - 1] - series[n - 2]) / dt);
    Ok(out)
}
