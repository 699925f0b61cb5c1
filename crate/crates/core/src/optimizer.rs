//! Initialization and the Adam fitting loop.

use crate::error::{Error, Result};
use crate::model::{gradient, AlignmentObjective, Dataset, ModelConfig, ModelState};
use crate::warps::{WarpFamily, WarpParams};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::ops::Range;
use std::time::Instant;

/// Groups of free parameters that can be frozen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    S,
    Warp,
    Z,
    Theta,
    Beta,
    Psi,
    Gamma,
    Omega,
}

impl Field {
    pub const ALL: [Field; 8] = [
        Field::S,
        Field::Warp,
        Field::Z,
        Field::Theta,
        Field::Beta,
        Field::Psi,
        Field::Gamma,
        Field::Omega,
    ];
}

/// Fields frozen during iterations `start..end`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageSpec {
    pub start: usize,
    pub end: usize,
    pub frozen: Vec<Field>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub stage_schedule: Vec<StageSpec>,
    /// Fields frozen for the whole run.
    pub frozen: Vec<Field>,
    pub model: ModelConfig,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            learning_rate: 0.01,
            iterations: 2000,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            stage_schedule: Vec::new(),
            frozen: Vec::new(),
            model: ModelConfig::default(),
        }
    }
}

impl FitConfig {
    /// The optional two-stage schedule: data fits first with `Z` and the warps
    /// frozen, then everything jointly.
    pub fn with_two_stage(mut self, first_stage: usize) -> Self {
        self.stage_schedule = vec![StageSpec {
            start: 0,
            end: first_stage,
            frozen: vec![Field::Z, Field::Warp],
        }];
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::invalid("learning_rate must be > 0"));
        }
        if self.iterations == 0 {
            return Err(Error::invalid("iterations must be >= 1"));
        }
        let unit = |v: f64| (0.0..1.0).contains(&v);
        if !unit(self.adam_beta1) || !unit(self.adam_beta2) || !(self.adam_eps > 0.0) {
            return Err(Error::invalid("Adam betas must be in [0, 1) and eps > 0"));
        }
        if self.stage_schedule.iter().any(|s| s.start > s.end) {
            return Err(Error::invalid("stage ranges must have start <= end"));
        }
        self.model.validate()
    }

    fn frozen_at(&self, iteration: usize) -> Vec<Field> {
        let mut out = self.frozen.clone();
        for stage in &self.stage_schedule {
            if (stage.start..stage.end).contains(&iteration) {
                out.extend(&stage.frozen);
            }
        }
        if !(self.model.warp.optimize_omega && self.model.warp.family == WarpFamily::NonparametricGp) {
            out.push(Field::Omega);
        }
        if self.model.alignment == AlignmentObjective::EnergyToMean {
            out.extend([Field::Z, Field::Psi, Field::Gamma]);
        }
        out
    }
}

/// Adam with bias-corrected moment estimates.
#[derive(Clone, Debug)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(len: usize, learning_rate: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Adam {
            learning_rate,
            beta1,
            beta2,
            eps,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.step_masked(params, grad, |_| true)
    }

    /// Updates only the entries for which `active(i)` holds.
    pub fn step_masked(&mut self, params: &mut [f64], grad: &[f64], active: impl Fn(usize) -> bool) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            if !active(i) {
                continue;
            }
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Flat view of a [`ModelState`], field by field in [`Field::ALL`] order.
struct Layout {
    ranges: Vec<(Field, Range<usize>)>,
    len: usize,
}

impl Layout {
    fn of(state: &ModelState) -> Self {
        let sizes = [
            (Field::S, state.s.iter().map(|m| m.len()).sum()),
            (Field::Warp, (0..state.warp.n_sequences()).map(|j| state.warp.row(j).len()).sum()),
            (Field::Z, state.z.len()),
            (Field::Theta, state.log_theta.iter().map(Vec::len).sum()),
            (Field::Beta, state.log_beta.len()),
            (Field::Psi, state.log_psi.len()),
            (Field::Gamma, 1),
            (Field::Omega, state.log_omega.iter().map(Vec::len).sum()),
        ];
        let mut offset = 0;
        let ranges = sizes
            .into_iter()
            .map(|(f, n)| {
                let r = offset..offset + n;
                offset += n;
                (f, r)
            })
            .collect();
        Layout { ranges, len: offset }
    }

    fn mask(&self, frozen: &[Field]) -> Vec<bool> {
        let mut mask = vec![true; self.len];
        for (f, r) in &self.ranges {
            if frozen.contains(f) {
                mask[r.clone()].iter_mut().for_each(|m| *m = false);
            }
        }
        mask
    }
}

fn flatten(state: &ModelState) -> Vec<f64> {
    let mut out = Vec::new();
    state.s.iter().for_each(|m| out.extend(m.iter()));
    (0..state.warp.n_sequences()).for_each(|j| out.extend(state.warp.row(j)));
    out.extend(state.z.iter());
    state.log_theta.iter().for_each(|p| out.extend(p));
    out.extend(&state.log_beta);
    out.extend(&state.log_psi);
    out.push(state.log_gamma);
    state.log_omega.iter().for_each(|p| out.extend(p));
    out
}

fn unflatten(state: &mut ModelState, flat: &[f64]) {
    let mut it = flat.iter().copied();
    let mut fill = |dst: &mut dyn Iterator<Item = &mut f64>| dst.for_each(|v| *v = it.next().unwrap());
    for m in &mut state.s {
        fill(&mut m.iter_mut());
    }
    for j in 0..state.warp.n_sequences() {
        fill(&mut state.warp.row_mut(j).iter_mut());
    }
    fill(&mut state.z.iter_mut());
    fill(&mut state.log_theta.iter_mut().flatten());
    fill(&mut state.log_beta.iter_mut());
    fill(&mut state.log_psi.iter_mut());
    fill(&mut std::iter::once(&mut state.log_gamma));
    fill(&mut state.log_omega.iter_mut().flatten());
}

/// Latent initialization: the first `q` principal components of the
/// row-flattened sequences, each scaled to unit variance. Components that do
/// not exist (rank < q) are filled with seeded noise of scale 1e-3.
fn pca_init(s: &[DMatrix<f64>], q: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let j = s.len();
    let features = s[0].len();
    let mut flat = DMatrix::from_fn(j, features, |r, c| s[r][(c / s[0].ncols(), c % s[0].ncols())]);
    for c in 0..features {
        let mean = flat.column(c).mean();
        flat.column_mut(c).add_scalar_mut(-mean);
    }
    let mut z = DMatrix::zeros(j, q);
    let mut filled = 0;
    if j > 1 {
        let svd = flat.svd(true, true);
        let u = svd.u.expect("requested U");
        let vt = svd.v_t.expect("requested V^T");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let top = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        for &k in order.iter().take(q) {
            let sigma = svd.singular_values[k];
            if sigma <= 1e-10 * top.max(1e-300) || sigma < 1e-12 {
                break;
            }
            // sign convention: the largest loading is positive
            let row = vt.row(k);
            let lead = row.iter().copied().fold(0.0, |m: f64, v| if v.abs() > m.abs() { v } else { m });
            let sign = if lead < 0.0 { -1.0 } else { 1.0 };
            let scores = u.column(k) * (sigma * sign);
            let sd = (scores.norm_squared() / j as f64).sqrt();
            z.column_mut(filled).copy_from(&(scores / sd));
            filled += 1;
        }
    }
    for c in filled..q {
        for r in 0..j {
            let e: f64 = StandardNormal.sample(rng);
            z[(r, c)] = 1e-3 * e;
        }
    }
    z
}

/// Initial state: `S = Y`, neutral warps, PCA latent points and the
/// configured kernel hyperparameters; unit precisions.
pub fn initialize(data: &Dataset, config: &FitConfig) -> Result<ModelState> {
    data.validate()?;
    config.validate()?;
    let model = &config.model;
    let (j, n) = (data.n_sequences(), data.n_samples());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    Ok(ModelState {
        s: data.y.clone(),
        warp: WarpParams::neutral(model.warp.family, j, n, model.warp.basis_count)?,
        z: pca_init(&data.y, model.latent_dim, &mut rng),
        log_theta: vec![model.data_kernel.log_params(); j],
        log_beta: vec![0.0; j],
        log_psi: model.lvm_kernel.log_params(),
        log_gamma: 0.0,
        log_omega: vec![model.warp.omega.log_params(); j],
    })
}

#[derive(Clone, Debug)]
pub struct FitResult {
    /// Final state, or the best state seen if the run failed.
    pub state: ModelState,
    /// Realized warps, one row per sequence.
    pub warps: Vec<Vec<f64>>,
    /// Objective before each update. Shorter than `iterations` only on failure.
    pub loss_trace: Vec<f64>,
    pub wall_time: f64,
    /// Set when the run stopped early on a numerical failure.
    pub failure: Option<Error>,
}

impl FitResult {
    pub fn final_loss(&self) -> Option<f64> {
        self.loss_trace.last().copied()
    }
}

/// MAP fit of the model with Adam, starting from [`initialize`].
pub fn fit(data: &Dataset, config: &FitConfig) -> Result<FitResult> {
    let start = Instant::now();
    let mut state = initialize(data, config)?;
    fit_from(data, config, &mut state, start)
}

/// Continues fitting from an explicit state.
pub fn fit_from_state(data: &Dataset, config: &FitConfig, mut state: ModelState) -> Result<FitResult> {
    config.validate()?;
    state.check_shapes(data, &config.model)?;
    fit_from(data, config, &mut state, Instant::now())
}

fn fit_from(data: &Dataset, config: &FitConfig, state: &mut ModelState, start: Instant) -> Result<FitResult> {
    let layout = Layout::of(state);
    let mut params = flatten(state);
    let mut adam = Adam::new(
        layout.len,
        config.learning_rate,
        config.adam_beta1,
        config.adam_beta2,
        config.adam_eps,
    );
    let mut loss_trace = Vec::with_capacity(config.iterations);
    let mut best: Option<(f64, ModelState)> = None;
    let mut failure = None;
    for it in 0..config.iterations {
        let (value, grad) = match gradient(state, data, &config.model) {
            Ok(r) if r.0.is_finite() => r,
            Ok(_) => {
                failure = Some(Error::numerical("non-finite objective"));
                break;
            }
            Err(e @ Error::NumericalFailure { .. }) => {
                failure = Some(e);
                break;
            }
            Err(e) => return Err(e),
        };
        loss_trace.push(value);
        if best.as_ref().is_none_or(|(b, _)| value < *b) {
            best = Some((value, state.clone()));
        }
        let mask = layout.mask(&config.frozen_at(it));
        let flat_grad = flatten(&grad);
        adam.step_masked(&mut params, &flat_grad, |i| mask[i]);
        unflatten(state, &params);
    }
    let state = match (&failure, best) {
        (Some(_), Some((_, b))) => b,
        (Some(e), None) => return Err(e.clone()),
        (None, _) => state.clone(),
    };
    Ok(FitResult {
        warps: state.warps(&data.x),
        state,
        loss_trace,
        wall_time: start.elapsed().as_secs_f64(),
        failure,
    })
}
