//! Eigenbasis of the training covariance and the change of variables
//! between feature-space weights and eigenspace coefficients.
//!
//! The classifier weight vector `w` is parameterized as `w = V * alpha`
//! where the columns of `V` are orthonormal eigenvectors of the centered
//! sample covariance, sorted by descending eigenvalue. When there are fewer
//! samples than features the decomposition runs on the `n x n` Gram matrix
//! and maps its eigenvectors back through the data matrix, which keeps the
//! cost at `O(n^2 p)` instead of `O(p^3)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Eigenvalues smaller than this fraction of the largest one are clamped
/// to zero; their eigenvectors are kept so the basis always has
/// `min(n, p)` columns.
const REL_EIG_FLOOR: f64 = 1e-12;

/// Largest deviation of `V^T V` from the identity accepted by
/// [`EigenBasis::new`].
const ORTHO_TOL: f64 = 1e-10;

/// Orthonormal eigenvectors and eigenvalues of a centered sample
/// covariance, together with the training mean used for centering.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenBasis {
    vectors: DMatrix<f64>,
    values: DVector<f64>,
    mean: DVector<f64>,
}

impl EigenBasis {
    /// Validates and wraps an eigenbasis.
    ///
    /// `vectors` must be `p x m` with orthonormal columns (within 1e-10),
    /// `values` must hold `m` non-negative eigenvalues sorted descending,
    /// and `mean` must have length `p`.
    pub fn new(vectors: DMatrix<f64>, values: DVector<f64>, mean: DVector<f64>) -> Result<Self> {
        let (p, m) = vectors.shape();
        if m == 0 || p == 0 {
            return Err(Error::Validation("eigenbasis must be non-empty".into()));
        }
        if m > p {
            return Err(Error::Validation(format!(
                "basis has {m} columns but only {p} rows; columns cannot be orthonormal"
            )));
        }
        if values.len() != m {
            return Err(Error::Dimension(format!(
                "{} eigenvalues for {} eigenvectors",
                values.len(),
                m
            )));
        }
        if mean.len() != p {
            return Err(Error::Dimension(format!(
                "mean has length {}, eigenvectors have {} rows",
                mean.len(),
                p
            )));
        }
        if vectors.iter().any(|v| !v.is_finite())
            || values.iter().any(|v| !v.is_finite())
            || mean.iter().any(|v| !v.is_finite())
        {
            return Err(Error::Validation(
                "eigenbasis contains non-finite entries".into(),
            ));
        }
        if values.iter().any(|&v| v < 0.0) {
            return Err(Error::Validation("negative eigenvalue".into()));
        }
        if (1..m).any(|j| values[j] > values[j - 1]) {
            return Err(Error::Validation(
                "eigenvalues not sorted descending".into(),
            ));
        }
        let gram = vectors.transpose() * &vectors;
        let defect = (gram - DMatrix::identity(m, m)).abs().max();
        if defect > ORTHO_TOL {
            return Err(Error::Validation(format!(
                "columns not orthonormal: max |V^T V - I| = {defect:.3e}"
            )));
        }
        Ok(Self {
            vectors,
            values,
            mean,
        })
    }

    /// `p x m` matrix whose columns are the basis vectors.
    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    /// Eigenvalues sorted descending, zeros last.
    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    /// Training feature mean subtracted before projecting.
    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    /// Number of basis vectors, `min(n, p)` for a basis built from data.
    pub fn m(&self) -> usize {
        self.vectors.ncols()
    }

    /// Feature-space dimension.
    pub fn p(&self) -> usize {
        self.vectors.nrows()
    }
}

/// Eigendecomposition of the centered sample covariance of `data`.
///
/// The covariance uses divisor `n - 1`. The returned basis has exactly
/// `min(n, p)` columns: eigenvalues below `1e-12` times the largest are
/// clamped to zero, and in the Gram-matrix path zero directions are filled
/// by a deterministic orthonormal completion (largest-residual standard
/// basis vectors, Gram-Schmidt). Each column's sign is normalized so its
/// largest-magnitude entry is positive, ties broken toward the lowest index.
pub fn eigendecompose(data: &Dataset) -> Result<EigenBasis> {
    let n = data.n();
    let p = data.p();
    let m = n.min(p);
    let mean = data.feature_means();
    let mut centered = data.features().clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let divisor = if n > 1 { (n - 1) as f64 } else { 1.0 };

    let (mut values, mut columns) = if p <= n {
        direct_eigenpairs(&centered, divisor)
    } else {
        gram_eigenpairs(&centered, divisor, m)?
    };

    let top = values.first().copied().unwrap_or(0.0).max(0.0);
    let floor = top * REL_EIG_FLOOR;
    for v in &mut values {
        if *v < floor || *v <= 0.0 {
            *v = 0.0;
        }
    }

    for col in &mut columns {
        canonicalize_sign(col);
    }
    let vectors = DMatrix::from_columns(&columns);
    EigenBasis::new(vectors, DVector::from_vec(values), mean)
}

/// Eigenpairs of the `p x p` covariance, sorted by descending eigenvalue.
fn direct_eigenpairs(centered: &DMatrix<f64>, divisor: f64) -> (Vec<f64>, Vec<DVector<f64>>) {
    let cov = centered.transpose() * centered / divisor;
    let eig = cov.symmetric_eigen();
    let order = descending_order(&eig.eigenvalues);
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let columns = order
        .iter()
        .map(|&i| eig.eigenvectors.column(i).into_owned())
        .collect();
    (values, columns)
}

/// Eigenpairs via the `n x n` Gram matrix for the `p > n` case.
///
/// Nonzero Gram eigenvectors `u` map to covariance eigenvectors
/// `C^T u / ||C^T u||` with the same eigenvalue; the mapped columns are
/// re-orthonormalized to absorb roundoff from nearly degenerate pairs, and
/// zero directions are completed afterwards.
fn gram_eigenpairs(
    centered: &DMatrix<f64>,
    divisor: f64,
    m: usize,
) -> Result<(Vec<f64>, Vec<DVector<f64>>)> {
    let gram = centered * centered.transpose() / divisor;
    let eig = gram.symmetric_eigen();
    let order = descending_order(&eig.eigenvalues);
    let top = eig.eigenvalues[order[0]].max(0.0);
    let floor = top * REL_EIG_FLOOR;

    let mut values = Vec::with_capacity(m);
    let mut columns: Vec<DVector<f64>> = Vec::with_capacity(m);
    for &i in &order {
        let eta = eig.eigenvalues[i];
        if eta <= floor || eta <= 0.0 {
            break;
        }
        let mut v = centered.transpose() * eig.eigenvectors.column(i);
        orthogonalize_against(&columns, &mut v);
        let norm = v.norm();
        if norm == 0.0 {
            return Err(Error::Contract(
                "gram eigenvector mapped to zero; data is numerically degenerate".into(),
            ));
        }
        v /= norm;
        values.push(eta);
        columns.push(v);
    }
    complete_basis(&mut columns, m, centered.ncols())?;
    values.resize(m, 0.0);
    Ok((values, columns))
}

/// Extends `columns` to `m` orthonormal vectors of length `p` using the
/// standard basis vector with the largest residual at each step
/// (deterministic; ties go to the lowest index).
fn complete_basis(columns: &mut Vec<DVector<f64>>, m: usize, p: usize) -> Result<()> {
    while columns.len() < m {
        let mut best: Option<DVector<f64>> = None;
        let mut best_norm = 0.0;
        for k in 0..p {
            let mut cand = DVector::zeros(p);
            cand[k] = 1.0;
            orthogonalize_against(columns, &mut cand);
            let norm = cand.norm();
            if norm > best_norm {
                best_norm = norm;
                best = Some(cand);
            }
        }
        match best {
            Some(v) if best_norm > 1e-8 => columns.push(v / best_norm),
            _ => {
                return Err(Error::Contract(
                    "orthonormal completion failed; basis already spans the space".into(),
                ))
            }
        }
    }
    Ok(())
}

/// Two passes of modified Gram-Schmidt against `columns`.
fn orthogonalize_against(columns: &[DVector<f64>], v: &mut DVector<f64>) {
    for _ in 0..2 {
        for u in columns {
            let d = u.dot(v);
            v.axpy(-d, u, 1.0);
        }
    }
}

/// Indices of `values` sorted by descending value; stable for ties.
fn descending_order(values: &DVector<f64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    order
}

/// Flips `col` so its largest-magnitude entry is positive; ties pick the
/// lowest index.
fn canonicalize_sign(col: &mut DVector<f64>) {
    let mut best = 0;
    let mut best_abs = f64::NEG_INFINITY;
    for (i, &x) in col.iter().enumerate() {
        if x.abs() > best_abs {
            best_abs = x.abs();
            best = i;
        }
    }
    if col[best] < 0.0 {
        col.neg_mut();
    }
}

/// Maps eigenspace coefficients to a feature-space weight vector, `V * coeffs`.
pub fn to_weight_space(coeffs: &DVector<f64>, basis: &EigenBasis) -> Result<DVector<f64>> {
    if coeffs.len() != basis.m() {
        return Err(Error::Dimension(format!(
            "{} coefficients for a basis with {} columns",
            coeffs.len(),
            basis.m()
        )));
    }
    Ok(basis.vectors() * coeffs)
}

/// Projects a feature-space weight vector onto the basis, `V^T w`.
pub fn project_to_eigen(w: &DVector<f64>, basis: &EigenBasis) -> Result<DVector<f64>> {
    if w.len() != basis.p() {
        return Err(Error::Dimension(format!(
            "weight vector has length {}, basis rows {}",
            w.len(),
            basis.p()
        )));
    }
    Ok(basis.vectors().transpose() * w)
}

/// Centers `features` by the basis mean and projects each row, returning the
/// `n x m` matrix with rows `(x_i - mean)^T V`.
pub fn project_data(features: &DMatrix<f64>, basis: &EigenBasis) -> Result<DMatrix<f64>> {
    if features.ncols() != basis.p() {
        return Err(Error::Dimension(format!(
            "features have {} columns, basis rows {}",
            features.ncols(),
            basis.p()
        )));
    }
    let mut centered = features.clone();
    for mut row in centered.row_iter_mut() {
        row -= basis.mean().transpose();
    }
    Ok(centered * basis.vectors())
}

/// Deviations measured by [`verify_change_of_variables`].
#[derive(Debug, Clone, Copy)]
pub struct ChangeOfVariablesCheck {
    /// Max entry of `|pinv(V) - V^T|`.
    pub max_pinv_deviation: f64,
    /// `| det(V^T V) - 1 |`.
    pub max_det_deviation: f64,
    /// Spread (max minus min) of the difference between the feature-space
    /// and eigenspace prior kernels across random evaluation points.
    pub max_kernel_deviation: f64,
}

/// Checks the algebra behind the eigenspace reparameterization on `basis`:
/// the pseudo-inverse of `V` must equal `V^T`, `det(V^T V)` must be 1, and
/// the joint prior kernel evaluated on feature-space weights `(V a, V b)`
/// must differ from its eigenspace form at `(a, b)` only by a constant
/// across `trials` random points.
pub fn verify_change_of_variables<R: Rng + ?Sized>(
    basis: &EigenBasis,
    trials: usize,
    rng: &mut R,
) -> Result<ChangeOfVariablesCheck> {
    if trials == 0 {
        return Err(Error::Validation(
            "need at least one evaluation point".into(),
        ));
    }
    let v = basis.vectors();
    let pinv = v
        .clone()
        .pseudo_inverse(1e-12)
        .map_err(|e| Error::Contract(format!("pseudo-inverse failed: {e}")))?;
    let max_pinv_deviation = (pinv - v.transpose()).abs().max();
    let max_det_deviation = ((v.transpose() * v).determinant() - 1.0).abs();

    let (lambda1, lambda3) = (0.9, 1.7);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for _ in 0..trials {
        let a = standard_normal_vector(basis.m(), rng);
        let b = standard_normal_vector(basis.m(), rng);
        let wa = v * &a;
        let wb = v * &b;
        let feature_space = -lambda1 * l1_norm(&wa) - 0.5 * lambda3 * (&wa - &wb).norm_squared();
        let eigen_space = -lambda1 * l1_norm(&(v * &a)) - 0.5 * lambda3 * (&a - &b).norm_squared();
        let diff = feature_space - eigen_space;
        lo = lo.min(diff);
        hi = hi.max(diff);
    }
    Ok(ChangeOfVariablesCheck {
        max_pinv_deviation,
        max_det_deviation,
        max_kernel_deviation: hi - lo,
    })
}

fn standard_normal_vector<R: Rng + ?Sized>(len: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.sample(StandardNormal))
}

fn l1_norm(v: &DVector<f64>) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}
