//! Energies of the eigenbasis-aligned sparse classifier and the composite
//! regularizer they induce, plus prediction helpers shared by every method.
//!
//! The model works in eigenspace coordinates: `alpha` are the classifier
//! coefficients (so the feature-space weights are `w = V * alpha`), `beta` is
//! an auxiliary copy pulled toward eigenvector alignment, `s` holds the
//! non-negative alignment magnitudes, and `b` is the intercept. The
//! unnormalized log posterior is the sum of the three terms exposed here.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::eigen::{project_data, EigenBasis};
use crate::error::{Error, Result};

/// Default standard deviation of the Gaussian intercept prior.
pub const DEFAULT_BIAS_SIGMA: f64 = 10.0;

/// Positive regularization strengths: `lambda1` scales the l1 penalty on
/// `V * alpha`, `lambda2` the alignment energy, `lambda3` the coupling
/// between `alpha` and `beta`, and `bias_sigma` the intercept prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    lambda1: f64,
    lambda2: f64,
    lambda3: f64,
    bias_sigma: f64,
}

impl HyperParams {
    /// Builds hyperparameters with the default intercept prior scale.
    pub fn new(lambda1: f64, lambda2: f64, lambda3: f64) -> Result<Self> {
        Self::with_bias_sigma(lambda1, lambda2, lambda3, DEFAULT_BIAS_SIGMA)
    }

    pub fn with_bias_sigma(
        lambda1: f64,
        lambda2: f64,
        lambda3: f64,
        bias_sigma: f64,
    ) -> Result<Self> {
        for (name, v) in [
            ("lambda1", lambda1),
            ("lambda2", lambda2),
            ("lambda3", lambda3),
            ("bias_sigma", bias_sigma),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Config(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(Self {
            lambda1,
            lambda2,
            lambda3,
            bias_sigma,
        })
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }

    pub fn lambda3(&self) -> f64 {
        self.lambda3
    }

    pub fn bias_sigma(&self) -> f64 {
        self.bias_sigma
    }
}

/// One point in the sampler's state space.
///
/// The eigenbasis model keeps `alpha`, `beta`, and `s` all at length `m`;
/// other targets built on the same sampler engine may leave blocks empty.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub alpha: DVector<f64>,
    pub beta: DVector<f64>,
    pub s: DVector<f64>,
    pub b: f64,
}

impl ModelState {
    /// The sampler's starting point: `alpha = beta = 0`, `s_j = 1` wherever
    /// the eigenvalue is positive (frozen at 0 elsewhere), `b = 0`.
    pub fn initial(basis: &EigenBasis) -> Self {
        let m = basis.m();
        let s = DVector::from_fn(m, |j, _| if basis.values()[j] > 0.0 { 1.0 } else { 0.0 });
        Self {
            alpha: DVector::zeros(m),
            beta: DVector::zeros(m),
            s,
            b: 0.0,
        }
    }
}

/// Numerically stable `log(sigmoid(t))`; finite for any finite `t` and never
/// below `-|t| - ln 2`.
pub fn log_sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        -(-t).exp().ln_1p()
    } else {
        t - t.exp().ln_1p()
    }
}

pub(crate) fn l1_norm(v: &DVector<f64>) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

fn check_len(name: &str, len: usize, m: usize) -> Result<()> {
    if len != m {
        return Err(Error::Dimension(format!(
            "{name} has length {len}, basis has {m} columns"
        )));
    }
    Ok(())
}

fn check_non_negative(s: &DVector<f64>) -> Result<()> {
    if let Some(j) = (0..s.len()).find(|&j| s[j] < 0.0) {
        return Err(Error::Contract(format!(
            "alignment magnitude s[{j}] = {} is negative",
            s[j]
        )));
    }
    Ok(())
}

/// Log likelihood of the labels: `sum_i log sigmoid(y_i (z_i . alpha + b))`
/// where `z_i` is observation `i` centered by the training mean and
/// projected onto the basis.
pub fn log_conditional_likelihood(
    state: &ModelState,
    basis: &EigenBasis,
    data: &Dataset,
) -> Result<f64> {
    check_len("alpha", state.alpha.len(), basis.m())?;
    let z = project_data(data.features(), basis)?;
    let margins = z * &state.alpha;
    Ok((0..data.n())
        .map(|i| log_sigmoid(data.labels()[i] * (margins[i] + state.b)))
        .sum())
}

/// Log of the alignment energy pulling `beta` toward eigenvector directions:
/// `-(lambda2 / 2) * sum_j (beta_j^2 - 2 eta_j s_j |beta_j| + eta_j s_j^2)`.
pub fn log_generative_alignment(
    state: &ModelState,
    basis: &EigenBasis,
    hp: &HyperParams,
) -> Result<f64> {
    check_len("beta", state.beta.len(), basis.m())?;
    check_len("s", state.s.len(), basis.m())?;
    check_non_negative(&state.s)?;
    let mut total = 0.0;
    for j in 0..basis.m() {
        let (beta, s, eta) = (state.beta[j], state.s[j], basis.values()[j]);
        total += beta * beta - 2.0 * eta * s * beta.abs() + eta * s * s;
    }
    Ok(-0.5 * hp.lambda2() * total)
}

/// Log of the joint prior on `(alpha, beta, b)`: an l1 penalty on the
/// feature-space weights, a Gaussian coupling between `alpha` and `beta`,
/// and a Gaussian intercept prior.
pub fn log_joint_prior(state: &ModelState, basis: &EigenBasis, hp: &HyperParams) -> Result<f64> {
    check_len("alpha", state.alpha.len(), basis.m())?;
    check_len("beta", state.beta.len(), basis.m())?;
    let w = basis.vectors() * &state.alpha;
    let coupling = (&state.alpha - &state.beta).norm_squared();
    let bias = state.b * state.b / (2.0 * hp.bias_sigma() * hp.bias_sigma());
    Ok(-hp.lambda1() * l1_norm(&w) - 0.5 * hp.lambda3() * coupling - bias)
}

/// Unnormalized log posterior: likelihood + alignment energy + joint prior.
pub fn log_posterior(
    state: &ModelState,
    basis: &EigenBasis,
    data: &Dataset,
    hp: &HyperParams,
) -> Result<f64> {
    Ok(log_conditional_likelihood(state, basis, data)?
        + log_generative_alignment(state, basis, hp)?
        + log_joint_prior(state, basis, hp)?)
}

/// The penalty the model induces on a feature-space weight vector:
/// `lambda1 ||w||_1 + (lambda2 / 2) sum_j eta_j (||w||^2 - 2 s_j |w . v_j| + s_j^2)`.
///
/// With `V = I`, `s = 0`, and a flat spectrum `eta_j = c` this collapses to
/// the elastic net `lambda1 ||w||_1 + (lambda2 c m / 2) ||w||^2`.
pub fn composite_regularizer(
    w: &DVector<f64>,
    s: &DVector<f64>,
    basis: &EigenBasis,
    hp: &HyperParams,
) -> Result<f64> {
    if w.len() != basis.p() {
        return Err(Error::Dimension(format!(
            "weight vector has length {}, basis rows {}",
            w.len(),
            basis.p()
        )));
    }
    check_len("s", s.len(), basis.m())?;
    check_non_negative(s)?;
    let norm_sq = w.norm_squared();
    let mut quad = 0.0;
    for j in 0..basis.m() {
        let eta = basis.values()[j];
        if eta == 0.0 {
            continue;
        }
        let align = w.dot(&basis.vectors().column(j)).abs();
        quad += eta * (norm_sq - 2.0 * s[j] * align + s[j] * s[j]);
    }
    Ok(hp.lambda1() * l1_norm(w) + 0.5 * hp.lambda2() * quad)
}

/// Classifies `points` with the feature-space rule
/// `sign((x - mean) . w + b)`, mapping a zero margin to `+1`.
pub fn predict(
    w: &DVector<f64>,
    b: f64,
    basis: &EigenBasis,
    points: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    if w.len() != basis.p() {
        return Err(Error::Dimension(format!(
            "weight vector has length {}, basis rows {}",
            w.len(),
            basis.p()
        )));
    }
    if points.ncols() != basis.p() {
        return Err(Error::Dimension(format!(
            "points have {} columns, basis rows {}",
            points.ncols(),
            basis.p()
        )));
    }
    let shift = b - basis.mean().dot(w);
    let margins = points * w;
    Ok(DVector::from_fn(points.nrows(), |i, _| {
        if margins[i] + shift >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }))
}

/// Fraction of labels where `predicted` and `actual` disagree.
pub fn error_rate(predicted: &DVector<f64>, actual: &DVector<f64>) -> Result<f64> {
    if predicted.len() != actual.len() {
        return Err(Error::Dimension(format!(
            "{} predictions for {} labels",
            predicted.len(),
            actual.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::Validation("cannot score zero predictions".into()));
    }
    let wrong = (0..predicted.len())
        .filter(|&i| predicted[i] != actual[i])
        .count();
    Ok(wrong as f64 / predicted.len() as f64)
}
