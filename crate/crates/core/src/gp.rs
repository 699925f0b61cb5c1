//! Gaussian-process marginal likelihoods, the collapsed sparse bound and
//! posterior prediction.
//!
//! Targets are passed as an `n x c` matrix: each column is an independent
//! draw from the same GP, and the returned value is the sum over columns.
//! Every scalar objective has a `_grad` twin returning exact derivatives
//! w.r.t. the kernel log-parameters, the log noise precision, the input
//! coordinates and the targets.

use crate::error::{Error, Result};
use crate::kernels::{KernelSpec, Points};
use crate::LOG_2PI;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

/// Extra diagonal tried, in order, when a covariance fails to factor. Scaled
/// by the kernel variance.
pub const JITTER_LADDER: [f64; 3] = [1e-6, 1e-4, 1e-2];

/// Cholesky factorization with the jitter ladder as fallback.
pub(crate) fn cholesky_with_jitter(
    cov: DMatrix<f64>,
    scale: f64,
    context: &str,
) -> Result<Cholesky<f64, Dyn>> {
    if cov.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical(format!("{context}: non-finite covariance")));
    }
    if let Some(chol) = cov.clone().cholesky() {
        return Ok(chol);
    }
    for step in JITTER_LADDER {
        let mut c = cov.clone();
        for i in 0..c.nrows() {
            c[(i, i)] += step * scale;
        }
        if let Some(chol) = c.cholesky() {
            return Ok(chol);
        }
    }
    Err(Error::numerical(context))
}

fn log_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

fn check_precision(noise_precision: f64) -> Result<()> {
    if noise_precision.is_finite() && noise_precision > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("noise precision must be > 0, got {noise_precision}")))
    }
}

fn check_targets(inputs: Points, targets: &DMatrix<f64>) -> Result<()> {
    if inputs.is_empty() {
        return Err(Error::invalid("at least one training input is required"));
    }
    if targets.nrows() != inputs.len() {
        return Err(Error::invalid(format!(
            "{} targets for {} inputs",
            targets.nrows(),
            inputs.len()
        )));
    }
    if targets.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("targets must be finite"));
    }
    Ok(())
}

/// Derivatives of a GP log marginal likelihood (or bound).
#[derive(Clone, Debug, PartialEq)]
pub struct MarginalGrad {
    pub log_params: Vec<f64>,
    pub log_noise_precision: f64,
    /// Same layout as the input point set.
    pub inputs: Vec<f64>,
    pub targets: DMatrix<f64>,
}

/// `sum_c log N(y_c | 0, C)` and, on request, `(dF/dC, dF/dY)`.
pub(crate) fn gaussian_columns(
    cov: DMatrix<f64>,
    targets: &DMatrix<f64>,
    jitter_scale: f64,
    context: &str,
    need_grad: bool,
) -> Result<(f64, Option<(DMatrix<f64>, DMatrix<f64>)>)> {
    let n = cov.nrows();
    let c = targets.ncols() as f64;
    let chol = cholesky_with_jitter(cov, jitter_scale, context)?;
    let alpha = chol.solve(targets);
    let quad = targets.component_mul(&alpha).sum();
    let value = -0.5 * quad - 0.5 * c * log_det(&chol) - 0.5 * c * n as f64 * LOG_2PI;
    if !need_grad {
        return Ok((value, None));
    }
    let cinv = chol.inverse();
    let mut dcov = &alpha * alpha.transpose() * 0.5;
    dcov -= cinv * (0.5 * c);
    Ok((value, Some((dcov, -alpha))))
}

/// Exact log marginal likelihood `log N(y | 0, K + jitter I + noise I)` for
/// one column of targets over scalar inputs.
pub fn log_marginal(
    kernel: &KernelSpec,
    noise_precision: f64,
    inputs: &[f64],
    targets: &[f64],
) -> Result<f64> {
    let y = DMatrix::from_column_slice(targets.len(), 1, targets);
    log_marginal_multi(kernel, noise_precision, Points::scalar(inputs), &y)
}

pub fn log_marginal_multi(
    kernel: &KernelSpec,
    noise_precision: f64,
    inputs: Points,
    targets: &DMatrix<f64>,
) -> Result<f64> {
    marginal_impl(kernel, noise_precision, inputs, targets, false).map(|(v, _)| v)
}

pub fn log_marginal_grad(
    kernel: &KernelSpec,
    noise_precision: f64,
    inputs: Points,
    targets: &DMatrix<f64>,
) -> Result<(f64, MarginalGrad)> {
    marginal_impl(kernel, noise_precision, inputs, targets, true).map(|(v, g)| (v, g.unwrap()))
}

fn marginal_impl(
    kernel: &KernelSpec,
    noise_precision: f64,
    inputs: Points,
    targets: &DMatrix<f64>,
    need_grad: bool,
) -> Result<(f64, Option<MarginalGrad>)> {
    check_precision(noise_precision)?;
    check_targets(inputs, targets)?;
    let noise_var = 1.0 / noise_precision;
    let mut cov = kernel.gram_self(inputs)?;
    for i in 0..cov.nrows() {
        cov[(i, i)] += noise_var;
    }
    let (value, adj) =
        gaussian_columns(cov, targets, kernel.total_variance(), "GP marginal likelihood", need_grad)?;
    let grad = adj.map(|(dcov, dy)| {
        let mut log_params = vec![0.0; kernel.n_params()];
        let mut dx = vec![0.0; inputs.as_slice().len()];
        kernel.gram_self_backward(inputs, &dcov, &mut log_params, Some(&mut dx));
        MarginalGrad {
            log_params,
            log_noise_precision: -noise_var * dcov.trace(),
            inputs: dx,
            targets: dy,
        }
    });
    Ok((value, grad))
}

/// Collapsed variational lower bound with fixed inducing inputs, one target
/// column over scalar inputs.
pub fn sparse_lower_bound(
    kernel: &KernelSpec,
    noise_precision: f64,
    inducing_inputs: &[f64],
    inputs: &[f64],
    targets: &[f64],
) -> Result<f64> {
    let y = DMatrix::from_column_slice(targets.len(), 1, targets);
    sparse_bound_impl(
        kernel,
        noise_precision,
        Points::scalar(inducing_inputs),
        Points::scalar(inputs),
        &y,
        false,
    )
    .map(|(v, _)| v)
}

pub fn sparse_bound_multi(
    kernel: &KernelSpec,
    noise_precision: f64,
    inducing: Points,
    inputs: Points,
    targets: &DMatrix<f64>,
) -> Result<f64> {
    sparse_bound_impl(kernel, noise_precision, inducing, inputs, targets, false).map(|(v, _)| v)
}

pub fn sparse_bound_grad(
    kernel: &KernelSpec,
    noise_precision: f64,
    inducing: Points,
    inputs: Points,
    targets: &DMatrix<f64>,
) -> Result<(f64, MarginalGrad)> {
    sparse_bound_impl(kernel, noise_precision, inducing, inputs, targets, true)
        .map(|(v, g)| (v, g.unwrap()))
}

/// Cross covariance where the jitter acts as a white-noise component: it is
/// added wherever an input coincides exactly with an inducing input, which
/// makes the bound tight when the inducing set equals the inputs.
fn cross_with_white(kernel: &KernelSpec, a: Points, b: Points) -> Result<DMatrix<f64>> {
    let mut k = kernel.gram(a, b, false)?;
    for i in 0..a.len() {
        for j in 0..b.len() {
            if a.point(i) == b.point(j) {
                k[(i, j)] += kernel.jitter;
            }
        }
    }
    Ok(k)
}

fn sparse_bound_impl(
    kernel: &KernelSpec,
    noise_precision: f64,
    inducing: Points,
    inputs: Points,
    targets: &DMatrix<f64>,
    need_grad: bool,
) -> Result<(f64, Option<MarginalGrad>)> {
    check_precision(noise_precision)?;
    check_targets(inputs, targets)?;
    let (m, n, c) = (inducing.len(), inputs.len(), targets.ncols());
    if m == 0 || m > n {
        return Err(Error::invalid(format!("need 1 <= M <= N inducing inputs, got M={m}, N={n}")));
    }
    let s2 = 1.0 / noise_precision;
    let kmm = kernel.gram_self(inducing)?;
    let kmn = cross_with_white(kernel, inducing, inputs)?;
    let l_mm = cholesky_with_jitter(kmm, kernel.total_variance(), "inducing covariance")?;
    let lower = l_mm.l();
    let v = lower
        .solve_lower_triangular(&kmn)
        .ok_or_else(|| Error::numerical("inducing covariance"))?;
    let mut b = &v * v.transpose() / s2;
    for i in 0..m {
        b[(i, i)] += 1.0;
    }
    let l_b = cholesky_with_jitter(b, 1.0, "sparse bound inner system")?;

    let vy = &v * targets; // m x c
    let binv_vy = l_b.solve(&vy);
    let quad = targets.norm_squared() / s2 - vy.component_mul(&binv_vy).sum() / (s2 * s2);
    let diag_knn = (kernel.total_variance() + kernel.jitter) * n as f64;
    let trace_gap = diag_knn - v.norm_squared();
    let cf = c as f64;
    let log_det_a = n as f64 * s2.ln() + log_det(&l_b);
    let value = -0.5 * quad
        - 0.5 * cf * log_det_a
        - 0.5 * cf * n as f64 * LOG_2PI
        - 0.5 * cf * trace_gap / s2;
    if !need_grad {
        return Ok((value, None));
    }

    // alpha = A^{-1} y with A = Q + s2 I
    let alpha = (targets - v.transpose() * &binv_vy / s2) / s2;
    // P = K_nm K_mm^{-1}
    let p = l_mm.solve(&kmn).transpose();
    let vp = &v * &p;
    let binv_vp = l_b.solve(&vp);
    let at_p = alpha.transpose() * &p; // c x m
    let coef = 0.5 * cf / (s2 * s2);
    // W' = 1/2 sum_c a a^T + (c/2) s2^-2 V^T B^-1 V
    let wp = &alpha * &at_p * 0.5 + v.transpose() * &binv_vp * coef;
    let ptwp = at_p.transpose() * &at_p * 0.5 + vp.transpose() * &binv_vp * coef;
    let d_kmn = (wp * 2.0).transpose();
    let d_kmm = -ptwp;

    let mut log_params = vec![0.0; kernel.n_params()];
    let mut dx = vec![0.0; inputs.as_slice().len()];
    kernel.gram_backward(inducing, inputs, &d_kmn, &mut log_params, None, Some(&mut dx));
    kernel.gram_self_backward(inducing, &d_kmm, &mut log_params, None);
    kernel.diag_backward(-0.5 * cf * n as f64 / s2, &mut log_params);

    let binv_vvt_trace = {
        let binv_v = l_b.solve(&v);
        binv_v.component_mul(&v).sum()
    };
    let tr_ainv = n as f64 / s2 - binv_vvt_trace / (s2 * s2);
    let d_s2 = 0.5 * alpha.norm_squared() - 0.5 * cf * tr_ainv + 0.5 * cf * trace_gap / (s2 * s2);
    Ok((
        value,
        Some(MarginalGrad {
            log_params,
            log_noise_precision: -s2 * d_s2,
            inputs: dx,
            targets: -alpha,
        }),
    ))
}

/// A GP conditioned on training data. Immutable after construction.
#[derive(Clone, Debug)]
pub struct GpFit {
    kernel: KernelSpec,
    noise_precision: f64,
    inputs: Vec<f64>,
    dim: usize,
    targets: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    alpha: DMatrix<f64>,
}

impl GpFit {
    /// Scalar inputs, one target column.
    pub fn new(kernel: KernelSpec, noise_precision: f64, inputs: &[f64], targets: &[f64]) -> Result<Self> {
        let y = DMatrix::from_column_slice(targets.len(), 1, targets);
        Self::new_multi(kernel, noise_precision, Points::scalar(inputs), y)
    }

    pub fn new_multi(
        kernel: KernelSpec,
        noise_precision: f64,
        inputs: Points,
        targets: DMatrix<f64>,
    ) -> Result<Self> {
        check_precision(noise_precision)?;
        check_targets(inputs, &targets)?;
        let mut cov = kernel.gram_self(inputs)?;
        for i in 0..cov.nrows() {
            cov[(i, i)] += 1.0 / noise_precision;
        }
        let chol = cholesky_with_jitter(cov, kernel.total_variance(), "GP posterior")?;
        let alpha = chol.solve(&targets);
        Ok(GpFit {
            kernel,
            noise_precision,
            inputs: inputs.as_slice().to_vec(),
            dim: inputs.dim(),
            targets,
            chol,
            alpha,
        })
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn noise_precision(&self) -> f64 {
        self.noise_precision
    }

    pub fn targets(&self) -> &DMatrix<f64> {
        &self.targets
    }

    /// Lower Cholesky factor of `K + jitter I + noise I` (plus any ladder jitter).
    pub fn cholesky_factor(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    /// Posterior mean (`t x c`) and marginal variance of the latent function,
    /// optionally including the observation noise.
    pub fn predict_multi(&self, test: Points, include_noise: bool) -> Result<(DMatrix<f64>, DVector<f64>)> {
        if test.dim() != self.dim {
            return Err(Error::invalid("test inputs have the wrong dimension"));
        }
        let train = Points::new(&self.inputs, self.dim);
        let k_star = self.kernel.gram(train, test, false)?; // n x t
        let mean = k_star.transpose() * &self.alpha;
        let v = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&k_star)
            .ok_or_else(|| Error::numerical("GP posterior"))?;
        let prior = self.kernel.total_variance();
        let noise = if include_noise { 1.0 / self.noise_precision } else { 0.0 };
        let var = DVector::from_iterator(
            test.len(),
            v.column_iter().map(|col| (prior - col.norm_squared()).max(0.0) + noise),
        );
        Ok((mean, var))
    }

    /// Posterior mean and latent variance at scalar test inputs, first target column.
    pub fn posterior_predict(&self, test: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let (mean, var) = self.predict_multi(Points::scalar(test), false)?;
        Ok((mean.column(0).iter().copied().collect(), var.iter().copied().collect()))
    }
}
