//! Small dense matrix utilities: spectral radius, PSD square roots and
//! factorizations, Gaussian sampling, and discrete Riccati fixed points.
//!
//! Everything here is sized for state dimensions in the tens; matrices are
//! heap-allocated `nalgebra` dynamic matrices and all solvers are direct or
//! simple fixed-point iterations.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// General dense matrix, row-major semantics at the serialization boundary.
pub type Matrix = DMatrix<f64>;
/// Dense column vector.
pub type Vector = DVector<f64>;

/// Shared numeric tolerances, fixed once for the whole crate.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    /// Absolute/relative Frobenius residual for Riccati and Lyapunov fixed points.
    pub residual: f64,
    /// Relative tolerance for spectral and square-root checks.
    pub relative: f64,
    /// Symmetry / PSD slack relative to the largest entry or eigenvalue.
    pub psd_slack: f64,
    /// Iteration cap for fixed-point solvers.
    pub max_iterations: usize,
}

pub const TOLERANCES: Tolerances = Tolerances {
    residual: 1e-10,
    relative: 1e-8,
    psd_slack: 1e-10,
    max_iterations: 1_000_000,
};

/// A matrix tagged symmetric positive semidefinite.
///
/// Checked construction enforces symmetry within `psd_slack` relative to the
/// largest entry and smallest eigenvalue `>= -psd_slack * largest`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix(Matrix);

impl SpdMatrix {
    pub fn new(m: Matrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension(format!(
                "expected square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let scale = m.amax().max(1.0);
        for i in 0..m.nrows() {
            for j in 0..i {
                if (m[(i, j)] - m[(j, i)]).abs() > TOLERANCES.psd_slack * scale {
                    return Err(Error::NotPsd(format!(
                        "asymmetry at ({i},{j}): {} vs {}",
                        m[(i, j)],
                        m[(j, i)]
                    )));
                }
            }
        }
        let sym = symmetrize(&m);
        let eigs = sym.clone().symmetric_eigen().eigenvalues;
        let max_eig = eigs.iter().cloned().fold(0.0_f64, f64::max);
        let min_eig = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
        if min_eig < -TOLERANCES.psd_slack * max_eig.max(1.0) {
            return Err(Error::NotPsd(format!(
                "smallest eigenvalue {min_eig:.3e} (largest {max_eig:.3e})"
            )));
        }
        Ok(Self(sym))
    }

    /// Wraps a matrix known to be symmetric PSD by construction
    /// (e.g. the symmetrized output of the Riccati map).
    pub(crate) fn new_unchecked(m: Matrix) -> Self {
        Self(symmetrize(&m))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(Matrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        Self(Matrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }
}

/// (M + M^T)/2; suppresses floating-point asymmetry drift.
pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// Largest eigenvalue magnitude of a square matrix.
pub fn spectral_radius(m: &Matrix) -> Result<f64> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "spectral radius needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::Parameter("non-finite entries".into()));
    }
    if m.nrows() == 0 {
        return Err(Error::Dimension("empty matrix".into()));
    }
    // a bounded Schur iteration: the unbounded default can cycle forever
    // on defective matrices (e.g. rank-deficient 0/1 draws)
    let schur = nalgebra::linalg::Schur::try_new(m.clone(), f64::EPSILON, 100_000)
        .ok_or_else(|| Error::Parameter("eigenvalue iteration did not converge".into()))?;
    let eigs = schur.complex_eigenvalues();
    Ok(eigs.iter().map(|c| c.norm()).fold(0.0, f64::max))
}

/// Symmetric PSD square root via eigendecomposition. Small negative
/// eigenvalues inside the PSD slack are clamped to zero.
pub fn psd_sqrt(m: &SpdMatrix) -> Result<SpdMatrix> {
    let se = m.as_matrix().clone().symmetric_eigen();
    let max_eig = se.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let mut d = se.eigenvalues.clone();
    for v in d.iter_mut() {
        if *v < -TOLERANCES.psd_slack * max_eig.max(1.0) {
            return Err(Error::NotPsd(format!("eigenvalue {v:.3e} in psd_sqrt")));
        }
        *v = v.max(0.0).sqrt();
    }
    let q = se.eigenvectors;
    let s = &q * Matrix::from_diagonal(&d) * q.transpose();
    Ok(SpdMatrix::new_unchecked(s))
}

/// Lower-triangular PSD factor: Cholesky with additive diagonal jitter
/// starting at `1e-12 * trace`, doubled at most 20 times. Falls back to the
/// eigendecomposition square root for stubbornly rank-deficient inputs.
pub fn psd_factor(m: &SpdMatrix) -> Result<Matrix> {
    let a = m.as_matrix();
    if a.amax() == 0.0 {
        return Ok(Matrix::zeros(a.nrows(), a.ncols()));
    }
    let mut jitter = 1e-12 * a.trace().abs().max(f64::MIN_POSITIVE);
    if let Some(chol) = nalgebra::Cholesky::new(a.clone()) {
        return Ok(chol.l());
    }
    for _ in 0..20 {
        let jittered = a + Matrix::identity(a.nrows(), a.ncols()) * jitter;
        if let Some(chol) = nalgebra::Cholesky::new(jittered) {
            return Ok(chol.l());
        }
        jitter *= 2.0;
    }
    Ok(psd_sqrt(m)?.into_matrix())
}

/// Draws `mean + L w` with `L` a PSD factor of `cov` and `w` standard normal.
/// Always consumes exactly `dim` normals from the stream.
pub fn sample_gaussian<R: Rng>(mean: &Vector, cov: &SpdMatrix, rng: &mut R) -> Result<Vector> {
    if mean.len() != cov.dim() {
        return Err(Error::Dimension(format!(
            "mean has {} entries but covariance is {}x{}",
            mean.len(),
            cov.dim(),
            cov.dim()
        )));
    }
    let l = psd_factor(cov)?;
    let w = Vector::from_fn(mean.len(), |_, _| rng.sample(StandardNormal));
    Ok(mean + l * w)
}

/// One step of the scalar-observation Riccati map
/// `g(P, a) = G P G^T + Q - G P a (a^T P a + s^2)^{-1} a^T P G^T`,
/// symmetrized.
pub fn riccati_map(
    p: &SpdMatrix,
    action: &Vector,
    gamma: &Matrix,
    q: &SpdMatrix,
    sigma2: f64,
) -> Result<SpdMatrix> {
    if sigma2 <= 0.0 {
        return Err(Error::Parameter(format!(
            "measurement variance must be positive, got {sigma2}"
        )));
    }
    let pm = p.as_matrix();
    let pa = pm * action;
    let innov = (action.dot(&pa) + sigma2).recip();
    let gpa = gamma * &pa;
    let next = gamma * pm * gamma.transpose() + q.as_matrix() - &gpa * gpa.transpose() * innov;
    Ok(SpdMatrix::new_unchecked(next))
}

fn converged(next: &Matrix, prev: &Matrix) -> bool {
    let resid = (next - prev).norm();
    resid <= TOLERANCES.residual * prev.norm().max(1.0)
}

/// Fixed point of `riccati_map` under a constant action, iterated from `Q`.
pub fn solve_dare_single(
    gamma: &Matrix,
    action: &Vector,
    q: &SpdMatrix,
    sigma2: f64,
) -> Result<SpdMatrix> {
    let mut p = q.clone();
    for _ in 0..TOLERANCES.max_iterations {
        let next = riccati_map(&p, action, gamma, q, sigma2)?;
        if converged(next.as_matrix(), p.as_matrix()) {
            return Ok(next);
        }
        p = next;
    }
    let next = riccati_map(&p, action, gamma, q, sigma2)?;
    Err(Error::RiccatiDivergence {
        iterations: TOLERANCES.max_iterations,
        residual: (next.as_matrix() - p.as_matrix()).norm(),
    })
}

/// Multi-output Riccati fixed point for the stacked observation matrix `C`
/// (one unit-norm action per row), plus the steady gain
/// `K = P C^T (C P C^T + s^2 I)^{-1}`.
pub fn solve_dare_multi(
    gamma: &Matrix,
    c: &Matrix,
    q: &SpdMatrix,
    sigma2: f64,
) -> Result<(SpdMatrix, Matrix)> {
    if sigma2 <= 0.0 {
        return Err(Error::Parameter(format!(
            "measurement variance must be positive, got {sigma2}"
        )));
    }
    if c.ncols() != gamma.nrows() {
        return Err(Error::Dimension(format!(
            "observation matrix is {}x{} but state dimension is {}",
            c.nrows(),
            c.ncols(),
            gamma.nrows()
        )));
    }
    let k_obs = c.nrows();
    let step = |p: &Matrix| -> Result<Matrix> {
        let cpct = c * p * c.transpose() + Matrix::identity(k_obs, k_obs) * sigma2;
        let inv = cpct
            .try_inverse()
            .ok_or_else(|| Error::Parameter("singular innovation covariance".into()))?;
        let gpc = gamma * p * c.transpose();
        Ok(symmetrize(
            &(gamma * p * gamma.transpose() + q.as_matrix() - &gpc * inv * gpc.transpose()),
        ))
    };
    let mut p = q.as_matrix().clone();
    let mut solution = None;
    for _ in 0..TOLERANCES.max_iterations {
        let next = step(&p)?;
        if converged(&next, &p) {
            solution = Some(next);
            break;
        }
        p = next;
    }
    let p = match solution {
        Some(p) => p,
        None => {
            let next = step(&p)?;
            return Err(Error::RiccatiDivergence {
                iterations: TOLERANCES.max_iterations,
                residual: (&next - &p).norm(),
            });
        }
    };
    let cpct = c * &p * c.transpose() + Matrix::identity(k_obs, k_obs) * sigma2;
    let inv = cpct
        .try_inverse()
        .ok_or_else(|| Error::Parameter("singular innovation covariance".into()))?;
    let gain = &p * c.transpose() * inv;
    Ok((SpdMatrix::new_unchecked(p), gain))
}

/// Fixed point of the discrete Lyapunov equation `Z = G Z G^T + Q`.
/// Requires `rho(G) < 1`.
pub fn solve_lyapunov(gamma: &Matrix, q: &SpdMatrix) -> Result<SpdMatrix> {
    let rho = spectral_radius(gamma)?;
    if rho >= 1.0 {
        return Err(Error::UnsupportedEnvironment(format!(
            "Lyapunov equation has no stationary solution for spectral radius {rho}"
        )));
    }
    let mut z = q.as_matrix().clone();
    for _ in 0..TOLERANCES.max_iterations {
        let next = symmetrize(&(gamma * &z * gamma.transpose() + q.as_matrix()));
        if converged(&next, &z) {
            return Ok(SpdMatrix::new_unchecked(next));
        }
        z = next;
    }
    Err(Error::RiccatiDivergence {
        iterations: TOLERANCES.max_iterations,
        residual: f64::NAN,
    })
}
