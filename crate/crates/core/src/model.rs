//! The joint MAP objective.
//!
//! For every sequence `j` a GP with kernel `theta_j` and noise precision
//! `beta_j` jointly explains the pseudo-observations `S_j` at the grid `X`
//! and the observations `Y_j` at the warped inputs `G_j`. A GP-LVM with
//! kernel `psi` and precision `gamma` maps latent points `Z` to the rows of
//! `S`. The objective is the negative log posterior
//!
//! ```text
//! -[ sum_j seq_term_j + lambda * lvm_term + log N(Z | 0, I)
//!    + sum_j warp_prior_j + sum log N(log h | 0, 1) over hyperparameters h ]
//! ```
//!
//! With [`AlignmentObjective::EnergyToMean`] the LVM term is replaced by the
//! negative energy to the mean sequence, and the latent prior and the LVM
//! hyperpriors drop out.

use crate::baselines::energy_objective;
use crate::error::{Error, Result};
use crate::gp::{log_marginal_grad, log_marginal_multi, sparse_bound_grad, sparse_bound_multi, GpFit};
use crate::kernels::{KernelSpec, Points};
use crate::warps::{g_prior, WarpFamily, WarpParams};
use crate::LOG_2PI;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Observed sequences on a shared grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub x: Vec<f64>,
    /// One `N x D` matrix per sequence.
    pub y: Vec<DMatrix<f64>>,
    pub true_warps: Option<Vec<Vec<f64>>>,
    pub groups: Option<Vec<usize>>,
}

/// `n` evenly spaced points on `[-1, 1]`.
pub fn uniform_grid(n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![0.0],
        _ => (0..n).map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64).collect(),
    }
}

impl Dataset {
    pub fn new(x: Vec<f64>, y: Vec<DMatrix<f64>>) -> Result<Self> {
        let data = Dataset {
            x,
            y,
            true_warps: None,
            groups: None,
        };
        data.validate()?;
        Ok(data)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.x.len();
        if n == 0 || self.y.is_empty() {
            return Err(Error::invalid("dataset needs at least one sequence and one sample"));
        }
        if self.x.windows(2).any(|w| !(w[1] > w[0])) || self.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("time grid must be finite and strictly increasing"));
        }
        let d = self.y[0].ncols();
        if d == 0 {
            return Err(Error::invalid("sequences need at least one dimension"));
        }
        for (j, y) in self.y.iter().enumerate() {
            if y.shape() != (n, d) {
                return Err(Error::invalid(format!(
                    "sequence {j} has shape {:?}, expected ({n}, {d})",
                    y.shape()
                )));
            }
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("sequence {j} contains non-finite values")));
            }
        }
        if let Some(w) = &self.true_warps {
            if w.len() != self.y.len() || w.iter().any(|r| r.len() != n) {
                return Err(Error::invalid("true warps must be J x N"));
            }
        }
        if let Some(g) = &self.groups {
            if g.len() != self.y.len() {
                return Err(Error::invalid("one group label per sequence is required"));
            }
        }
        Ok(())
    }

    pub fn n_sequences(&self) -> usize {
        self.y.len()
    }

    pub fn n_samples(&self) -> usize {
        self.x.len()
    }

    pub fn n_dims(&self) -> usize {
        self.y[0].ncols()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignmentObjective {
    #[serde(alias = "gplvm")]
    Gplvm,
    #[serde(alias = "energy")]
    EnergyToMean,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WarpConfig {
    pub family: WarpFamily,
    /// Number of default basis functions for [`WarpFamily::BasisSimplex`].
    pub basis_count: usize,
    /// Smoothness prior on non-parametric warps.
    pub omega: KernelSpec,
    /// Learn `omega` (under a log-Normal hyperprior) instead of keeping it fixed.
    pub optimize_omega: bool,
}

impl Default for WarpConfig {
    fn default() -> Self {
        WarpConfig {
            family: WarpFamily::NonparametricGp,
            basis_count: 5,
            omega: KernelSpec::se(1.0, 0.3).with_jitter(1e-4),
            optimize_omega: false,
        }
    }
}

/// Structural choices of the model; the free parameters live in [`ModelState`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Per-sequence data kernel; its hyperparameters are the initial `theta_j`.
    pub data_kernel: KernelSpec,
    /// LVM kernel; its hyperparameters are the initial `psi`.
    pub lvm_kernel: KernelSpec,
    pub warp: WarpConfig,
    pub latent_dim: usize,
    pub lvm_weight: f64,
    pub alignment: AlignmentObjective,
    /// Use the sparse collapsed bound with this many fixed inducing inputs
    /// (uniform on `[-1, 1]`) for the per-sequence terms.
    pub inducing_count: Option<usize>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            data_kernel: KernelSpec::se(1.0, 1.0),
            lvm_kernel: KernelSpec::se(1.0, 1.0),
            warp: WarpConfig::default(),
            latent_dim: 2,
            lvm_weight: 1.0,
            alignment: AlignmentObjective::Gplvm,
            inducing_count: None,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.data_kernel.validate()?;
        self.lvm_kernel.validate()?;
        self.warp.omega.validate()?;
        if self.latent_dim == 0 {
            return Err(Error::invalid("latent_dim must be >= 1"));
        }
        if !(self.lvm_weight.is_finite() && self.lvm_weight >= 0.0) {
            return Err(Error::invalid("lvm_weight must be finite and >= 0"));
        }
        if self.inducing_count == Some(0) {
            return Err(Error::invalid("inducing_count must be >= 1"));
        }
        Ok(())
    }

    fn inducing_inputs(&self) -> Option<Vec<f64>> {
        self.inducing_count.map(uniform_grid)
    }
}

/// All free parameters. Gradients are returned in the same layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    /// Pseudo-observations, one `N x D` matrix per sequence.
    pub s: Vec<DMatrix<f64>>,
    pub warp: WarpParams,
    /// Latent points, `J x Q`.
    pub z: DMatrix<f64>,
    pub log_theta: Vec<Vec<f64>>,
    pub log_beta: Vec<f64>,
    pub log_psi: Vec<f64>,
    pub log_gamma: f64,
    pub log_omega: Vec<Vec<f64>>,
}

impl ModelState {
    pub fn n_sequences(&self) -> usize {
        self.s.len()
    }

    pub fn theta(&self, config: &ModelConfig, j: usize) -> KernelSpec {
        config.data_kernel.with_log_params(&self.log_theta[j])
    }

    pub fn psi(&self, config: &ModelConfig) -> KernelSpec {
        config.lvm_kernel.with_log_params(&self.log_psi)
    }

    pub fn omega(&self, config: &ModelConfig, j: usize) -> KernelSpec {
        config.warp.omega.with_log_params(&self.log_omega[j])
    }

    pub fn beta(&self, j: usize) -> f64 {
        self.log_beta[j].exp()
    }

    pub fn gamma(&self) -> f64 {
        self.log_gamma.exp()
    }

    /// Realized warps, one row per sequence.
    pub fn warps(&self, x: &[f64]) -> Vec<Vec<f64>> {
        self.warp.warps(x)
    }

    /// A state with the same shapes and every value zero.
    pub fn zeros_like(&self) -> Self {
        ModelState {
            s: self.s.iter().map(|m| DMatrix::zeros(m.nrows(), m.ncols())).collect(),
            warp: self.warp.zeros_like(),
            z: DMatrix::zeros(self.z.nrows(), self.z.ncols()),
            log_theta: self.log_theta.iter().map(|v| vec![0.0; v.len()]).collect(),
            log_beta: vec![0.0; self.log_beta.len()],
            log_psi: vec![0.0; self.log_psi.len()],
            log_gamma: 0.0,
            log_omega: self.log_omega.iter().map(|v| vec![0.0; v.len()]).collect(),
        }
    }

    pub fn check_shapes(&self, data: &Dataset, config: &ModelConfig) -> Result<()> {
        let (j, n, d) = (data.n_sequences(), data.n_samples(), data.n_dims());
        let bad = |what: &str| Err(Error::invalid(format!("model state: inconsistent {what}")));
        if self.s.len() != j || self.s.iter().any(|m| m.shape() != (n, d)) {
            return bad("pseudo-observation shape");
        }
        if self.z.shape() != (j, config.latent_dim) {
            return bad("latent shape");
        }
        if self.warp.n_sequences() != j || self.warp.family() != config.warp.family {
            return bad("warp parameters");
        }
        if let WarpParams::NonparametricGp { aux } = &self.warp {
            if aux.iter().any(|r| r.len() != n) {
                return bad("warp auxiliaries");
            }
        }
        if self.log_theta.len() != j
            || self.log_theta.iter().any(|p| p.len() != config.data_kernel.n_params())
        {
            return bad("theta");
        }
        if self.log_omega.len() != j
            || self.log_omega.iter().any(|p| p.len() != config.warp.omega.n_params())
        {
            return bad("omega");
        }
        if self.log_beta.len() != j || self.log_psi.len() != config.lvm_kernel.n_params() {
            return bad("hyperparameter count");
        }
        let finite = self.s.iter().all(|m| m.iter().all(|v| v.is_finite()))
            && self.z.iter().all(|v| v.is_finite())
            && (0..j).all(|i| self.warp.row(i).iter().all(|v| v.is_finite()))
            && self.log_theta.iter().flatten().all(|v| v.is_finite())
            && self.log_beta.iter().all(|v| v.is_finite())
            && self.log_psi.iter().all(|v| v.is_finite())
            && self.log_gamma.is_finite()
            && self.log_omega.iter().flatten().all(|v| v.is_finite());
        if !finite {
            return bad("values (non-finite)");
        }
        Ok(())
    }
}

fn stack(top: &DMatrix<f64>, bottom: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, d) = top.shape();
    DMatrix::from_fn(2 * n, d, |i, c| if i < n { top[(i, c)] } else { bottom[(i - n, c)] })
}

/// `sum_d log N([S_j^d; Y_j^d] | 0, K_theta([X; G_j]) + beta^-1 I)`.
pub fn seq_term(
    y_j: &DMatrix<f64>,
    s_j: &DMatrix<f64>,
    g_j: &[f64],
    x: &[f64],
    theta: &KernelSpec,
    beta: f64,
) -> Result<f64> {
    seq_term_impl(y_j, s_j, g_j, x, theta, beta, None)
}

fn seq_term_impl(
    y_j: &DMatrix<f64>,
    s_j: &DMatrix<f64>,
    g_j: &[f64],
    x: &[f64],
    theta: &KernelSpec,
    beta: f64,
    inducing: Option<&[f64]>,
) -> Result<f64> {
    check_seq_shapes(y_j, s_j, g_j, x)?;
    let inputs: Vec<f64> = x.iter().chain(g_j).copied().collect();
    let targets = stack(s_j, y_j);
    match inducing {
        None => log_marginal_multi(theta, beta, Points::scalar(&inputs), &targets),
        Some(u) => sparse_bound_multi(theta, beta, Points::scalar(u), Points::scalar(&inputs), &targets),
    }
}

fn check_seq_shapes(y_j: &DMatrix<f64>, s_j: &DMatrix<f64>, g_j: &[f64], x: &[f64]) -> Result<()> {
    if y_j.shape() != s_j.shape() || y_j.nrows() != x.len() || g_j.len() != x.len() {
        return Err(Error::invalid("seq_term: inconsistent shapes"));
    }
    Ok(())
}

/// Gradient of one sequence term.
struct SeqGrad {
    value: f64,
    s: DMatrix<f64>,
    g: Vec<f64>,
    theta: Vec<f64>,
    log_beta: f64,
}

fn seq_term_grad(
    y_j: &DMatrix<f64>,
    s_j: &DMatrix<f64>,
    g_j: &[f64],
    x: &[f64],
    theta: &KernelSpec,
    beta: f64,
    inducing: Option<&[f64]>,
) -> Result<SeqGrad> {
    check_seq_shapes(y_j, s_j, g_j, x)?;
    let n = x.len();
    let inputs: Vec<f64> = x.iter().chain(g_j).copied().collect();
    let targets = stack(s_j, y_j);
    let (value, grad) = match inducing {
        None => log_marginal_grad(theta, beta, Points::scalar(&inputs), &targets)?,
        Some(u) => sparse_bound_grad(theta, beta, Points::scalar(u), Points::scalar(&inputs), &targets)?,
    };
    Ok(SeqGrad {
        value,
        s: grad.targets.rows(0, n).into_owned(),
        g: grad.inputs[n..].to_vec(),
        theta: grad.log_params,
        log_beta: grad.log_noise_precision,
    })
}

/// `J x (N*D)` matrix whose column `n*D + d` holds `S[.., n, d]`.
fn lvm_targets(s: &[DMatrix<f64>]) -> DMatrix<f64> {
    let (n, d) = s[0].shape();
    DMatrix::from_fn(s.len(), n * d, |j, c| s[j][(c / d, c % d)])
}

fn z_rows(z: &DMatrix<f64>) -> Vec<f64> {
    let (j, q) = z.shape();
    (0..j).flat_map(|r| (0..q).map(move |c| z[(r, c)])).collect()
}

/// `sum over the N*D feature columns of log N(S_col | 0, K_psi(Z, Z) + gamma^-1 I)`.
pub fn lvm_term(s: &[DMatrix<f64>], z: &DMatrix<f64>, psi: &KernelSpec, gamma: f64) -> Result<f64> {
    if s.is_empty() || z.nrows() != s.len() {
        return Err(Error::invalid("lvm_term: one latent point per sequence is required"));
    }
    let zr = z_rows(z);
    log_marginal_multi(psi, gamma, Points::new(&zr, z.ncols()), &lvm_targets(s))
}

fn log_std_normal(values: &[f64]) -> f64 {
    values.iter().map(|v| -0.5 * v * v - 0.5 * LOG_2PI).sum()
}

/// Every additive piece of the log posterior (not negated).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObjectiveTerms {
    pub seq: Vec<f64>,
    /// `lvm_term` for GP-LVM alignment, `-energy` for energy alignment; unweighted.
    pub alignment: f64,
    pub latent_prior: f64,
    pub warp_prior: Vec<f64>,
    pub hyperprior: f64,
}

impl ObjectiveTerms {
    pub fn objective(&self, config: &ModelConfig) -> f64 {
        -(self.seq.iter().sum::<f64>()
            + config.lvm_weight * self.alignment
            + self.latent_prior
            + self.warp_prior.iter().sum::<f64>()
            + self.hyperprior)
    }
}

fn hyperprior(state: &ModelState, config: &ModelConfig) -> f64 {
    let mut total = state.log_theta.iter().map(|p| log_std_normal(p)).sum::<f64>()
        + log_std_normal(&state.log_beta);
    if config.alignment == AlignmentObjective::Gplvm {
        total += log_std_normal(&state.log_psi) + log_std_normal(&[state.log_gamma]);
    }
    if config.warp.optimize_omega && config.warp.family == WarpFamily::NonparametricGp {
        total += state.log_omega.iter().map(|p| log_std_normal(p)).sum::<f64>();
    }
    total
}

pub fn objective_terms(state: &ModelState, data: &Dataset, config: &ModelConfig) -> Result<ObjectiveTerms> {
    state.check_shapes(data, config)?;
    let x = &data.x;
    let inducing = config.inducing_inputs();
    let per_seq: Vec<Result<(f64, f64)>> = (0..data.n_sequences())
        .into_par_iter()
        .map(|j| {
            let g = state.warp.warp(j, x);
            let seq = seq_term_impl(
                &data.y[j],
                &state.s[j],
                &g,
                x,
                &state.theta(config, j),
                state.beta(j),
                inducing.as_deref(),
            )
            .map_err(|e| e.in_sequence(j))?;
            let prior = match &state.warp {
                WarpParams::NonparametricGp { aux } => {
                    g_prior(&g, x, &state.omega(config, j), false).map_err(|e| e.in_sequence(j))?.0
                        + log_std_normal(&aux[j])
                }
                _ => 0.0,
            };
            Ok((seq, prior))
        })
        .collect();
    let mut seq = Vec::with_capacity(per_seq.len());
    let mut warp_prior = Vec::with_capacity(per_seq.len());
    for r in per_seq {
        let (a, b) = r?;
        seq.push(a);
        warp_prior.push(b);
    }
    let (alignment, latent_prior) = match config.alignment {
        AlignmentObjective::Gplvm => (
            lvm_term(&state.s, &state.z, &state.psi(config), state.gamma())?,
            log_std_normal(state.z.as_slice()),
        ),
        AlignmentObjective::EnergyToMean => (-energy_objective(&state.s), 0.0),
    };
    Ok(ObjectiveTerms {
        seq,
        alignment,
        latent_prior,
        warp_prior,
        hyperprior: hyperprior(state, config),
    })
}

/// Negative log posterior, to be minimized.
pub fn objective(state: &ModelState, data: &Dataset, config: &ModelConfig) -> Result<f64> {
    Ok(objective_terms(state, data, config)?.objective(config))
}

/// Objective value and its exact gradient w.r.t. every free field of the state.
/// Fields that do not enter the objective (e.g. `omega` when it is fixed)
/// get a zero gradient.
pub fn gradient(state: &ModelState, data: &Dataset, config: &ModelConfig) -> Result<(f64, ModelState)> {
    state.check_shapes(data, config)?;
    let x = &data.x;
    let inducing = config.inducing_inputs();
    let mut grad = state.zeros_like();

    struct PerSeq {
        seq: SeqGrad,
        prior: f64,
        warp_row: Vec<f64>,
        omega: Vec<f64>,
    }
    let per_seq: Vec<Result<PerSeq>> = (0..data.n_sequences())
        .into_par_iter()
        .map(|j| {
            let g = state.warp.warp(j, x);
            let seq = seq_term_grad(
                &data.y[j],
                &state.s[j],
                &g,
                x,
                &state.theta(config, j),
                state.beta(j),
                inducing.as_deref(),
            )
            .map_err(|e| e.in_sequence(j))?;
            let mut dg = seq.g.clone();
            let mut prior = 0.0;
            let mut omega = vec![0.0; config.warp.omega.n_params()];
            let mut extra_row = None;
            if let WarpParams::NonparametricGp { aux } = &state.warp {
                let (v, adj) = g_prior(&g, x, &state.omega(config, j), true).map_err(|e| e.in_sequence(j))?;
                let (dg_prior, domega) = adj.expect("gradient requested");
                prior = v + log_std_normal(&aux[j]);
                dg.iter_mut().zip(&dg_prior).for_each(|(a, b)| *a += b);
                if config.warp.optimize_omega {
                    omega = domega;
                }
                extra_row = Some(aux[j].iter().map(|u| -u).collect::<Vec<_>>());
            }
            let mut warp_row = state.warp.row_backward(j, x, &dg);
            if let Some(extra) = extra_row {
                warp_row.iter_mut().zip(extra).for_each(|(a, b)| *a += b);
            }
            Ok(PerSeq {
                seq,
                prior,
                warp_row,
                omega,
            })
        })
        .collect();

    // log posterior accumulated in index order; negated at the end
    let mut total = 0.0;
    for (j, r) in per_seq.into_iter().enumerate() {
        let p = r?;
        total += p.seq.value + p.prior;
        grad.s[j] = p.seq.s;
        grad.warp.row_mut(j).copy_from_slice(&p.warp_row);
        grad.log_theta[j] = p.seq.theta;
        grad.log_beta[j] = p.seq.log_beta;
        grad.log_omega[j] = p.omega;
    }

    let lambda = config.lvm_weight;
    match config.alignment {
        AlignmentObjective::Gplvm => {
            let (j, q) = state.z.shape();
            let zr = z_rows(&state.z);
            let targets = lvm_targets(&state.s);
            let (v, g) = log_marginal_grad(&state.psi(config), state.gamma(), Points::new(&zr, q), &targets)?;
            total += lambda * v + log_std_normal(state.z.as_slice());
            let d = state.s[0].ncols();
            for (jj, s_grad) in grad.s.iter_mut().enumerate() {
                for c in 0..targets.ncols() {
                    s_grad[(c / d, c % d)] += lambda * g.targets[(jj, c)];
                }
            }
            for r in 0..j {
                for c in 0..q {
                    grad.z[(r, c)] = lambda * g.inputs[r * q + c] - state.z[(r, c)];
                }
            }
            grad.log_psi = g.log_params.iter().zip(&state.log_psi).map(|(a, p)| lambda * a - p).collect();
            grad.log_gamma = lambda * g.log_noise_precision - state.log_gamma;
        }
        AlignmentObjective::EnergyToMean => {
            total -= lambda * energy_objective(&state.s);
            let mean = mean_sequence(&state.s);
            for (s_grad, s) in grad.s.iter_mut().zip(&state.s) {
                *s_grad -= (s - &mean) * (2.0 * lambda);
            }
        }
    }

    total += hyperprior(state, config);
    for (g, p) in grad.log_theta.iter_mut().zip(&state.log_theta) {
        g.iter_mut().zip(p).for_each(|(a, b)| *a -= b);
    }
    grad.log_beta.iter_mut().zip(&state.log_beta).for_each(|(a, b)| *a -= b);
    if config.warp.optimize_omega && config.warp.family == WarpFamily::NonparametricGp {
        for (g, p) in grad.log_omega.iter_mut().zip(&state.log_omega) {
            g.iter_mut().zip(p).for_each(|(a, b)| *a -= b);
        }
    }

    negate(&mut grad);
    Ok((-total, grad))
}

pub(crate) fn mean_sequence(s: &[DMatrix<f64>]) -> DMatrix<f64> {
    let mut mean = DMatrix::zeros(s[0].nrows(), s[0].ncols());
    for m in s {
        mean += m;
    }
    mean / s.len() as f64
}

fn negate(g: &mut ModelState) {
    g.s.iter_mut().for_each(|m| m.neg_mut());
    for j in 0..g.warp.n_sequences() {
        g.warp.row_mut(j).iter_mut().for_each(|v| *v = -*v);
    }
    g.z.neg_mut();
    g.log_theta.iter_mut().flatten().for_each(|v| *v = -*v);
    g.log_beta.iter_mut().for_each(|v| *v = -*v);
    g.log_psi.iter_mut().for_each(|v| *v = -*v);
    g.log_gamma = -g.log_gamma;
    g.log_omega.iter_mut().flatten().for_each(|v| *v = -*v);
}

/// A sequence generated by the GP-LVM at a new latent location.
#[derive(Clone, Debug, PartialEq)]
pub struct ManifoldSample {
    /// `N x D` posterior mean.
    pub mean: DMatrix<f64>,
    /// Predictive variance (including the LVM noise) at each of the `N`
    /// time points; shared by all features.
    pub variance: Vec<f64>,
}

/// GP-LVM posterior prediction at `z_new`, using the fitted `S` as targets.
pub fn sample_manifold(state: &ModelState, config: &ModelConfig, z_new: &[f64]) -> Result<ManifoldSample> {
    let (j, q) = state.z.shape();
    if z_new.len() != q {
        return Err(Error::invalid(format!("latent point needs {q} coordinates, got {}", z_new.len())));
    }
    if j != state.s.len() || j == 0 {
        return Err(Error::invalid("model state has no fitted sequences"));
    }
    let (n, d) = state.s[0].shape();
    let zr = z_rows(&state.z);
    let fit = GpFit::new_multi(state.psi(config), state.gamma(), Points::new(&zr, q), lvm_targets(&state.s))?;
    let (mean, var) = fit.predict_multi(Points::new(z_new, q), true)?;
    Ok(ManifoldSample {
        mean: DMatrix::from_fn(n, d, |r, c| mean[(0, r * d + c)]),
        variance: vec![var[0]; n],
    })
}
