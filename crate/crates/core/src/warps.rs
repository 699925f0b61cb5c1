//! Monotone warp families.
//!
//! * Non-parametric: `G = 2 * cumsum(softmax(U)) - 1`, strictly increasing
//!   with `G[N-1] = 1`, under a GP smoothness prior on `G` and a standard
//!   Normal prior on `U`.
//! * Basis simplex: a convex combination of fixed monotone functions on
//!   `[-1, 1]`, weights given by a softmax over logits.
//! * Uniform shift: `G = X + delta`.

use crate::error::{Error, Result};
use crate::gp::gaussian_columns;
use crate::kernels::{KernelSpec, Points};
use crate::LOG_2PI;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarpFamily {
    #[serde(alias = "gp", alias = "nonparametric")]
    NonparametricGp,
    #[serde(alias = "basis")]
    BasisSimplex,
    #[serde(alias = "shift")]
    UniformShift,
}

pub fn softmax(u: &[f64]) -> Vec<f64> {
    let max = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = u.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|v| v / total).collect()
}

/// Back-propagates `dF/dp` through `p = softmax(u)`.
fn softmax_backward(p: &[f64], dp: &[f64]) -> Vec<f64> {
    let inner: f64 = p.iter().zip(dp).map(|(a, b)| a * b).sum();
    p.iter().zip(dp).map(|(pi, di)| pi * (di - inner)).collect()
}

/// `[G]_n = 2 * sum_{k<=n} softmax(U)_k - 1`.
pub fn warp_from_aux(u: &[f64]) -> Vec<f64> {
    let p = softmax(u);
    let mut acc = 0.0;
    let mut g: Vec<f64> = p
        .iter()
        .map(|pk| {
            acc += pk;
            2.0 * acc - 1.0
        })
        .collect();
    // the cumulative sum can round a hair away from 1
    if let Some(last) = g.last_mut() {
        *last = 1.0;
    }
    g
}

/// `dF/dU` given `dF/dG` for [`warp_from_aux`].
pub fn warp_from_aux_backward(u: &[f64], dg: &[f64]) -> Vec<f64> {
    let p = softmax(u);
    // dF/dp_k = 2 * sum_{n >= k} dF/dG_n
    let mut dp = vec![0.0; p.len()];
    let mut acc = 0.0;
    for k in (0..p.len()).rev() {
        acc += dg[k];
        dp[k] = 2.0 * acc;
    }
    softmax_backward(&p, &dp)
}

/// Derivatives of [`warp_log_prior`].
#[derive(Clone, Debug, PartialEq)]
pub struct WarpPriorGrad {
    pub g: Vec<f64>,
    pub u: Vec<f64>,
    pub omega_log_params: Vec<f64>,
}

/// `log N(G | 0, k_omega(X, X) + jitter I) + log N(U | 0, I)`.
pub fn warp_log_prior(g: &[f64], x: &[f64], omega: &KernelSpec, u: &[f64]) -> Result<f64> {
    warp_prior_impl(g, x, omega, u, false).map(|(v, _)| v)
}

pub fn warp_log_prior_grad(
    g: &[f64],
    x: &[f64],
    omega: &KernelSpec,
    u: &[f64],
) -> Result<(f64, WarpPriorGrad)> {
    warp_prior_impl(g, x, omega, u, true).map(|(v, d)| (v, d.unwrap()))
}

fn warp_prior_impl(
    g: &[f64],
    x: &[f64],
    omega: &KernelSpec,
    u: &[f64],
    need_grad: bool,
) -> Result<(f64, Option<WarpPriorGrad>)> {
    if g.len() != x.len() || u.len() != x.len() {
        return Err(Error::invalid("warp prior: G, X and U must have equal length"));
    }
    let u_term = -0.5 * u.iter().map(|v| v * v).sum::<f64>() - 0.5 * u.len() as f64 * LOG_2PI;
    let (g_term, adj) = g_prior(g, x, omega, need_grad)?;
    let grad = adj.map(|(dg, dparams)| WarpPriorGrad {
        g: dg,
        u: u.iter().map(|v| -v).collect(),
        omega_log_params: dparams,
    });
    Ok((g_term + u_term, grad))
}

/// `log N(G | 0, k_omega(X, X) + jitter I)` with `(dF/dG, dF/dlog omega)`.
pub(crate) fn g_prior(
    g: &[f64],
    x: &[f64],
    omega: &KernelSpec,
    need_grad: bool,
) -> Result<(f64, Option<(Vec<f64>, Vec<f64>)>)> {
    let pts = Points::scalar(x);
    let cov = omega.gram_self(pts)?;
    let target = DMatrix::from_column_slice(g.len(), 1, g);
    let (value, adj) = gaussian_columns(cov, &target, omega.total_variance(), "warp prior", need_grad)?;
    Ok((
        value,
        adj.map(|(dcov, dy)| {
            let mut dparams = vec![0.0; omega.n_params()];
            omega.gram_self_backward(pts, &dcov, &mut dparams, None);
            (dy.iter().copied().collect(), dparams)
        }),
    ))
}

/// Fixed monotone functions mapping `[-1, 1]` onto `[-1, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisFunction {
    Identity,
    Cubic,
    /// `tanh(3t) / tanh(3)`
    Tanh,
    /// Logistic ramp centred at `t = -0.4`.
    RampEarly,
    /// Logistic ramp centred at `t = 0.4`.
    RampLate,
}

fn ramp(t: f64, centre: f64) -> f64 {
    let s = |v: f64| 1.0 / (1.0 + (-6.0 * (v - centre)).exp());
    let (lo, hi) = (s(-1.0), s(1.0));
    -1.0 + 2.0 * (s(t) - lo) / (hi - lo)
}

impl BasisFunction {
    pub const DEFAULT: [BasisFunction; 5] = [
        BasisFunction::Identity,
        BasisFunction::Cubic,
        BasisFunction::Tanh,
        BasisFunction::RampEarly,
        BasisFunction::RampLate,
    ];

    pub fn eval(self, t: f64) -> f64 {
        match self {
            BasisFunction::Identity => t,
            BasisFunction::Cubic => t * t * t,
            BasisFunction::Tanh => (3.0 * t).tanh() / 3f64.tanh(),
            BasisFunction::RampEarly => ramp(t, -0.4),
            BasisFunction::RampLate => ramp(t, 0.4),
        }
    }
}

/// The first `count` functions of the default basis.
pub fn default_basis(count: usize) -> Result<Vec<BasisFunction>> {
    if count == 0 || count > BasisFunction::DEFAULT.len() {
        return Err(Error::invalid(format!(
            "basis_count must be in 1..={}, got {count}",
            BasisFunction::DEFAULT.len()
        )));
    }
    Ok(BasisFunction::DEFAULT[..count].to_vec())
}

/// `G = sum_k w_k * basis_k(X)` for simplex weights `w`.
pub fn basis_warp(weights: &[f64], x: &[f64], basis: &[BasisFunction]) -> Result<Vec<f64>> {
    if weights.len() != basis.len() {
        return Err(Error::invalid("one weight per basis function is required"));
    }
    let total: f64 = weights.iter().sum();
    if weights.iter().any(|w| !(*w >= -1e-8)) || (total - 1.0).abs() > 1e-8 {
        return Err(Error::invalid("basis weights must lie on the probability simplex"));
    }
    Ok(mix_basis(weights, x, basis))
}

fn mix_basis(weights: &[f64], x: &[f64], basis: &[BasisFunction]) -> Vec<f64> {
    // every basis function fixes the endpoints, so pin them against rounding
    x.iter()
        .map(|&t| if t.abs() == 1.0 { t } else { weights.iter().zip(basis).map(|(w, b)| w * b.eval(t)).sum() })
        .collect()
}

fn basis_warp_backward(logits: &[f64], x: &[f64], basis: &[BasisFunction], dg: &[f64]) -> Vec<f64> {
    let w = softmax(logits);
    let dw: Vec<f64> = basis
        .iter()
        .map(|b| x.iter().zip(dg).map(|(&t, d)| d * b.eval(t)).sum())
        .collect();
    softmax_backward(&w, &dw)
}

/// `G = X + delta`; no clamping.
pub fn shift_warp(delta: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| v + delta).collect()
}

/// Free warp parameters for all sequences, one row per sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum WarpParams {
    NonparametricGp { aux: Vec<Vec<f64>> },
    BasisSimplex { logits: Vec<Vec<f64>>, basis: Vec<BasisFunction> },
    UniformShift { shifts: Vec<f64> },
}

impl WarpParams {
    /// Parameters giving the most neutral warp of each family: equal softmax
    /// weights, uniform basis weights, zero shift.
    pub fn neutral(family: WarpFamily, j: usize, n: usize, basis_count: usize) -> Result<Self> {
        Ok(match family {
            WarpFamily::NonparametricGp => WarpParams::NonparametricGp { aux: vec![vec![0.0; n]; j] },
            WarpFamily::BasisSimplex => WarpParams::BasisSimplex {
                logits: vec![vec![0.0; basis_count]; j],
                basis: default_basis(basis_count)?,
            },
            WarpFamily::UniformShift => WarpParams::UniformShift { shifts: vec![0.0; j] },
        })
    }

    pub fn family(&self) -> WarpFamily {
        match self {
            WarpParams::NonparametricGp { .. } => WarpFamily::NonparametricGp,
            WarpParams::BasisSimplex { .. } => WarpFamily::BasisSimplex,
            WarpParams::UniformShift { .. } => WarpFamily::UniformShift,
        }
    }

    pub fn n_sequences(&self) -> usize {
        match self {
            WarpParams::NonparametricGp { aux } => aux.len(),
            WarpParams::BasisSimplex { logits, .. } => logits.len(),
            WarpParams::UniformShift { shifts } => shifts.len(),
        }
    }

    /// The realized warp of sequence `j` on the grid `x`.
    pub fn warp(&self, j: usize, x: &[f64]) -> Vec<f64> {
        match self {
            WarpParams::NonparametricGp { aux } => warp_from_aux(&aux[j]),
            WarpParams::BasisSimplex { logits, basis } => mix_basis(&softmax(&logits[j]), x, basis),
            WarpParams::UniformShift { shifts } => shift_warp(shifts[j], x),
        }
    }

    pub fn warps(&self, x: &[f64]) -> Vec<Vec<f64>> {
        (0..self.n_sequences()).map(|j| self.warp(j, x)).collect()
    }

    /// Gradient w.r.t. the raw parameters of sequence `j` given `dF/dG_j`.
    pub fn row_backward(&self, j: usize, x: &[f64], dg: &[f64]) -> Vec<f64> {
        match self {
            WarpParams::NonparametricGp { aux } => warp_from_aux_backward(&aux[j], dg),
            WarpParams::BasisSimplex { logits, basis } => basis_warp_backward(&logits[j], x, basis, dg),
            WarpParams::UniformShift { .. } => vec![dg.iter().sum()],
        }
    }

    /// Raw parameters of sequence `j` as a flat row.
    pub fn row(&self, j: usize) -> &[f64] {
        match self {
            WarpParams::NonparametricGp { aux } => &aux[j],
            WarpParams::BasisSimplex { logits, .. } => &logits[j],
            WarpParams::UniformShift { shifts } => std::slice::from_ref(&shifts[j]),
        }
    }

    pub fn row_mut(&mut self, j: usize) -> &mut [f64] {
        match self {
            WarpParams::NonparametricGp { aux } => &mut aux[j],
            WarpParams::BasisSimplex { logits, .. } => &mut logits[j],
            WarpParams::UniformShift { shifts } => std::slice::from_mut(&mut shifts[j]),
        }
    }

    /// Same structure with every free value set to zero.
    pub fn zeros_like(&self) -> Self {
        let mut out = self.clone();
        for j in 0..out.n_sequences() {
            out.row_mut(j).iter_mut().for_each(|v| *v = 0.0);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn aux_examples() {
        assert_eq!(warp_from_aux(&[0.0; 4]), vec![-0.5, 0.0, 0.5, 1.0]);
        let g = warp_from_aux(&[3f64.ln(), 0.0]);
        assert_relative_eq!(g[0], 0.5, epsilon = 1e-15);
        assert_eq!(g[1], 1.0);
        let u = [0.3, -1.2, 2.0, 0.1, 0.0];
        let shifted: Vec<f64> = u.iter().map(|v| v + 7.3).collect();
        let (a, b) = (warp_from_aux(&u), warp_from_aux(&shifted));
        for (x, y) in a.iter().zip(&b) {
            assert_relative_eq!(x, y, epsilon = 1e-14);
        }
    }

    #[test]
    fn aux_backward_matches_finite_differences() {
        let u = [0.4, -0.7, 1.1, 0.0, -0.3, 0.9];
        let w = [0.3, -1.0, 0.5, 2.0, -0.4, 0.8];
        let f = |u: &[f64]| warp_from_aux(u).iter().zip(&w).map(|(g, w)| g * w).sum::<f64>();
        let du = warp_from_aux_backward(&u, &w);
        for i in 0..u.len() {
            let (mut up, mut dn) = (u, u);
            up[i] += 1e-5;
            dn[i] -= 1e-5;
            let fd = (f(&up) - f(&dn)) / 2e-5;
            assert!((fd - du[i]).abs() <= 1e-4 * fd.abs().max(1e-3), "{i}: {fd} vs {}", du[i]);
        }
    }

    #[test]
    fn prior_examples() {
        let omega = KernelSpec::se(1.0, 0.5);
        let x = grid(4);
        let g = warp_from_aux(&[0.0; 4]);
        let full = warp_log_prior(&g, &x, &omega, &[0.0; 4]).unwrap();
        let (g_only, _) = g_prior(&g, &x, &omega, false).unwrap();
        assert_relative_eq!(full - g_only, -2.0 * LOG_2PI, epsilon = 1e-12);

        let v = warp_log_prior(&[0.4], &[0.0], &KernelSpec::se(1.0, 1.0), &[0.0]).unwrap();
        let var = 1.0 + 1e-6;
        let expect = -0.5 * (2.0 * std::f64::consts::PI * var).ln() - 0.5 * 0.16 / var - 0.5 * LOG_2PI;
        assert_relative_eq!(v, expect, epsilon = 1e-12);
    }

    #[test]
    fn prior_matches_dense_logpdf() {
        let x = grid(5);
        let u = [0.2, -0.5, 0.1, 0.7, -0.3];
        let g = warp_from_aux(&u);
        let omega = KernelSpec::se(1.3, 0.6);
        let mut k = DMatrix::from_fn(5, 5, |i, j| {
            1.3 * (-(x[i] - x[j]).powi(2) / (2.0 * 0.36)).exp()
        });
        for i in 0..5 {
            k[(i, i)] += 1e-6;
        }
        let gv = nalgebra::DVector::from_column_slice(&g);
        let quad = (gv.transpose() * k.clone().try_inverse().unwrap() * &gv)[(0, 0)];
        let dense = -0.5 * quad - 0.5 * k.determinant().ln() - 2.5 * LOG_2PI;
        let u_term: f64 = u.iter().map(|v| -0.5 * v * v - 0.5 * LOG_2PI).sum();
        assert_relative_eq!(warp_log_prior(&g, &x, &omega, &u).unwrap(), dense + u_term, epsilon = 1e-8);
    }

    #[test]
    fn basis_examples() {
        let x = grid(11);
        let basis = default_basis(5).unwrap();
        assert_eq!(basis_warp(&[1.0, 0.0, 0.0, 0.0, 0.0], &x, &basis).unwrap(), x);
        for k in 0..5 {
            let mut w = [0.0; 5];
            w[k] = 1.0;
            let g = basis_warp(&w, &x, &basis).unwrap();
            for (gi, xi) in g.iter().zip(&x) {
                assert_relative_eq!(*gi, basis[k].eval(*xi), epsilon = 1e-15);
            }
            assert_relative_eq!(basis[k].eval(-1.0), -1.0, epsilon = 1e-12);
            assert_relative_eq!(basis[k].eval(1.0), 1.0, epsilon = 1e-12);
        }
        let g = basis_warp(&[0.2; 5], &x, &basis).unwrap();
        for (i, t) in x.iter().enumerate() {
            let oracle = 0.2 * (t + t.powi(3) + (3.0 * t).tanh() / 3f64.tanh() + ramp(*t, -0.4) + ramp(*t, 0.4));
            assert_relative_eq!(g[i], oracle, epsilon = 1e-14);
        }
        // endpoints are exact for any weights, not merely within rounding
        let params = WarpParams::BasisSimplex { logits: vec![vec![0.3, -1.1, 0.7, 2.0, -0.4]], basis: basis.clone() };
        let g = params.warp(0, &x);
        assert_eq!((g[0], g[10]), (-1.0, 1.0));
        assert!(basis_warp(&[0.5, 0.6, 0.0, 0.0, 0.0], &x, &basis).is_err());
        assert!(basis_warp(&[1.1, -0.1, 0.0, 0.0, 0.0], &x, &basis).is_err());
        assert!(default_basis(0).is_err() && default_basis(6).is_err());
    }

    #[test]
    fn shift_examples() {
        let x = [-1.0, 0.0, 1.0];
        assert_eq!(shift_warp(0.0, &x), x.to_vec());
        let g = shift_warp(0.1, &x);
        for (a, b) in g.iter().zip([-0.9, 0.1, 1.1]) {
            assert_relative_eq!(*a, b, epsilon = 1e-15);
        }
        let twice = shift_warp(0.25, &shift_warp(-0.6, &x));
        let once = shift_warp(-0.35, &x);
        for (a, b) in twice.iter().zip(&once) {
            assert_relative_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn row_backward_all_families() {
        let x = grid(6);
        let dg = [0.5, -0.2, 0.3, 1.0, -0.7, 0.4];
        let params = [
            WarpParams::NonparametricGp { aux: vec![vec![0.1, -0.2, 0.4, 0.0, 0.3, -0.5]] },
            WarpParams::BasisSimplex { logits: vec![vec![0.2, -0.4, 0.9, 0.0, 0.1]], basis: default_basis(5).unwrap() },
            WarpParams::UniformShift { shifts: vec![0.13] },
        ];
        for p in params {
            let grad = p.row_backward(0, &x, &dg);
            let f = |p: &WarpParams| p.warp(0, &x).iter().zip(&dg).map(|(a, b)| a * b).sum::<f64>();
            for i in 0..p.row(0).len() {
                let (mut up, mut dn) = (p.clone(), p.clone());
                up.row_mut(0)[i] += 1e-6;
                dn.row_mut(0)[i] -= 1e-6;
                let fd = (f(&up) - f(&dn)) / 2e-6;
                assert_relative_eq!(fd, grad[i], epsilon = 1e-7, max_relative = 1e-5);
            }
        }
    }

    proptest! {
        #[test]
        fn aux_warps_monotone(u in proptest::collection::vec(-5.0f64..5.0, 1..64)) {
            let g = warp_from_aux(&u);
            prop_assert_eq!(*g.last().unwrap(), 1.0);
            prop_assert!(g[0] > -1.0);
            for w in g.windows(2) {
                prop_assert!(w[1] > w[0]);
            }
        }

        #[test]
        fn basis_warps_monotone(logits in proptest::collection::vec(-4.0f64..4.0, 5)) {
            let p = WarpParams::BasisSimplex { logits: vec![logits], basis: default_basis(5).unwrap() };
            let g = p.warp(0, &grid(40));
            for w in g.windows(2) {
                prop_assert!(w[1] > w[0]);
            }
        }
    }
}
