//! Stationary covariance functions and Gram matrices.
//!
//! Every kernel is parametrised on the log scale when optimized: SE and both
//! Matérn kernels carry `[log variance, log lengthscale]`, periodic kernels
//! add `log period`, and a sum concatenates the parameters of its parts.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const SQRT3: f64 = 1.732_050_807_568_877_2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    #[serde(alias = "rbf", alias = "squared_exponential")]
    Se,
    #[serde(alias = "matern_12", alias = "exponential")]
    Matern12,
    #[serde(alias = "matern_32")]
    Matern32,
    Periodic,
    Sum,
}

/// A covariance function with its hyperparameters.
///
/// `parts` is only read for [`KernelFamily::Sum`]; `period` only for
/// [`KernelFamily::Periodic`]. `jitter` is added to the diagonal of square
/// self-Gram matrices (the parts' own jitter is ignored inside a sum).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub variance: f64,
    pub lengthscale: f64,
    pub period: f64,
    pub jitter: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub parts: Vec<KernelSpec>,
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec::se(1.0, 1.0)
    }
}

/// A borrowed set of input points stored row-major, `dim` coordinates each.
#[derive(Clone, Copy, Debug)]
pub struct Points<'a> {
    data: &'a [f64],
    dim: usize,
}

impl<'a> Points<'a> {
    pub fn new(data: &'a [f64], dim: usize) -> Self {
        assert!(dim > 0 && data.len() % dim == 0, "ragged point set");
        Points { data, dim }
    }

    pub fn scalar(data: &'a [f64]) -> Self {
        Points { data, dim: 1 }
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &'a [f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &'a [f64] {
        self.data
    }

    fn check_finite(&self) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::invalid("kernel inputs must be finite"))
        }
    }
}

impl KernelSpec {
    fn leaf(family: KernelFamily, variance: f64, lengthscale: f64) -> Self {
        KernelSpec {
            family,
            variance,
            lengthscale,
            period: 1.0,
            jitter: 1e-6,
            parts: Vec::new(),
        }
    }

    pub fn se(variance: f64, lengthscale: f64) -> Self {
        Self::leaf(KernelFamily::Se, variance, lengthscale)
    }

    pub fn matern12(variance: f64, lengthscale: f64) -> Self {
        Self::leaf(KernelFamily::Matern12, variance, lengthscale)
    }

    pub fn matern32(variance: f64, lengthscale: f64) -> Self {
        Self::leaf(KernelFamily::Matern32, variance, lengthscale)
    }

    pub fn periodic(variance: f64, lengthscale: f64, period: f64) -> Self {
        KernelSpec {
            period,
            ..Self::leaf(KernelFamily::Periodic, variance, lengthscale)
        }
    }

    pub fn sum(parts: Vec<KernelSpec>) -> Self {
        KernelSpec {
            parts,
            ..Self::leaf(KernelFamily::Sum, 1.0, 1.0)
        }
    }

    pub fn with_jitter(mut self, jitter: f64) -> Self {
        self.jitter = jitter;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("kernel {name} must be finite and > 0, got {v}")))
            }
        };
        if !(self.jitter.is_finite() && self.jitter >= 0.0) {
            return Err(Error::invalid(format!(
                "kernel jitter must be finite and >= 0, got {}",
                self.jitter
            )));
        }
        match self.family {
            KernelFamily::Sum => {
                if self.parts.is_empty() {
                    return Err(Error::invalid("sum kernel needs at least one part"));
                }
                self.parts.iter().try_for_each(KernelSpec::validate)
            }
            KernelFamily::Periodic => {
                positive("variance", self.variance)?;
                positive("lengthscale", self.lengthscale)?;
                positive("period", self.period)
            }
            _ => {
                positive("variance", self.variance)?;
                positive("lengthscale", self.lengthscale)
            }
        }
    }

    /// Number of log-scale hyperparameters.
    pub fn n_params(&self) -> usize {
        match self.family {
            KernelFamily::Sum => self.parts.iter().map(KernelSpec::n_params).sum(),
            KernelFamily::Periodic => 3,
            _ => 2,
        }
    }

    pub fn log_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        self.push_log_params(&mut out);
        out
    }

    fn push_log_params(&self, out: &mut Vec<f64>) {
        match self.family {
            KernelFamily::Sum => self.parts.iter().for_each(|p| p.push_log_params(out)),
            KernelFamily::Periodic => {
                out.extend([self.variance.ln(), self.lengthscale.ln(), self.period.ln()])
            }
            _ => out.extend([self.variance.ln(), self.lengthscale.ln()]),
        }
    }

    /// Overwrites the hyperparameters from log-scale values (same order as [`Self::log_params`]).
    pub fn set_log_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.n_params(), "kernel parameter count");
        match self.family {
            KernelFamily::Sum => {
                let mut offset = 0;
                for part in &mut self.parts {
                    let n = part.n_params();
                    part.set_log_params(&params[offset..offset + n]);
                    offset += n;
                }
            }
            KernelFamily::Periodic => {
                self.variance = params[0].exp();
                self.lengthscale = params[1].exp();
                self.period = params[2].exp();
            }
            _ => {
                self.variance = params[0].exp();
                self.lengthscale = params[1].exp();
            }
        }
    }

    pub fn with_log_params(&self, params: &[f64]) -> Self {
        let mut k = self.clone();
        k.set_log_params(params);
        k
    }

    /// Prior variance k(x, x), i.e. the total signal variance.
    pub fn total_variance(&self) -> f64 {
        match self.family {
            KernelFamily::Sum => self.parts.iter().map(KernelSpec::total_variance).sum(),
            _ => self.variance,
        }
    }

    /// Scalar covariance k(x, x2).
    pub fn eval(&self, x: f64, x2: f64) -> Result<f64> {
        self.validate()?;
        if !(x.is_finite() && x2.is_finite()) {
            return Err(Error::invalid("kernel inputs must be finite"));
        }
        Ok(self.k(&[x], &[x2]))
    }

    /// Covariance between two points of equal dimension (no validation).
    pub fn k(&self, a: &[f64], b: &[f64]) -> f64 {
        let r2 = sq_dist(a, b);
        self.k_r2(r2)
    }

    fn k_r2(&self, r2: f64) -> f64 {
        let v = self.variance;
        let l = self.lengthscale;
        match self.family {
            KernelFamily::Se => v * (-0.5 * r2 / (l * l)).exp(),
            KernelFamily::Matern12 => v * (-r2.sqrt() / l).exp(),
            KernelFamily::Matern32 => {
                let a = SQRT3 * r2.sqrt() / l;
                v * (1.0 + a) * (-a).exp()
            }
            KernelFamily::Periodic => {
                let s = (PI * r2.sqrt() / self.period).sin();
                v * (-2.0 * s * s / (l * l)).exp()
            }
            KernelFamily::Sum => self.parts.iter().map(|p| p.k_r2(r2)).sum(),
        }
    }

    /// Adds `w * dk/dlog(params)` into `dparams` and returns `dk/dr * (1/r)`
    /// so that `dk/da = ret * (a - b)`.
    fn backward_r2(&self, r2: f64, w: f64, dparams: &mut [f64]) -> f64 {
        let v = self.variance;
        let l = self.lengthscale;
        match self.family {
            KernelFamily::Se => {
                let k = v * (-0.5 * r2 / (l * l)).exp();
                dparams[0] += w * k;
                dparams[1] += w * k * r2 / (l * l);
                -k / (l * l)
            }
            KernelFamily::Matern12 => {
                let r = r2.sqrt();
                let k = v * (-r / l).exp();
                dparams[0] += w * k;
                dparams[1] += w * k * r / l;
                // the derivative at r = 0 does not exist; zero is a subgradient
                if r > 0.0 {
                    -k / (l * r)
                } else {
                    0.0
                }
            }
            KernelFamily::Matern32 => {
                let a = SQRT3 * r2.sqrt() / l;
                let e = (-a).exp();
                dparams[0] += w * v * (1.0 + a) * e;
                dparams[1] += w * v * a * a * e;
                -3.0 * v * e / (l * l)
            }
            KernelFamily::Periodic => {
                let r = r2.sqrt();
                let p = self.period;
                let u = PI * r / p;
                let (s, c) = u.sin_cos();
                let k = v * (-2.0 * s * s / (l * l)).exp();
                dparams[0] += w * k;
                dparams[1] += w * k * 4.0 * s * s / (l * l);
                dparams[2] += w * k * 4.0 * s * c * u / (l * l);
                // sin(2u) / r, continuous at r = 0
                let sinc = if r > 1e-12 { (2.0 * u).sin() / r } else { 2.0 * PI / p };
                -k * 2.0 * PI * sinc / (p * l * l)
            }
            KernelFamily::Sum => {
                let mut offset = 0;
                let mut dr = 0.0;
                for part in &self.parts {
                    let n = part.n_params();
                    dr += part.backward_r2(r2, w, &mut dparams[offset..offset + n]);
                    offset += n;
                }
                dr
            }
        }
    }

    /// Adds `w * dk(x, x)/dlog(params)`; identical for every `x` since all
    /// kernels here are stationary.
    pub(crate) fn diag_backward(&self, w: f64, dparams: &mut [f64]) {
        self.backward_r2(0.0, w, dparams);
    }

    /// Gram matrix `K(A, B)`. When `add_jitter` is set and `A` and `B` are the
    /// same point set, `jitter` is added to the diagonal.
    pub fn gram(&self, a: Points, b: Points, add_jitter: bool) -> Result<DMatrix<f64>> {
        self.validate()?;
        a.check_finite()?;
        b.check_finite()?;
        if a.dim() != b.dim() {
            return Err(Error::invalid("gram inputs have different dimensions"));
        }
        let same = a.as_slice() == b.as_slice();
        let mut out = DMatrix::from_fn(a.len(), b.len(), |i, j| self.k(a.point(i), b.point(j)));
        if same {
            // exact symmetry regardless of floating-point evaluation order
            for i in 0..a.len() {
                for j in 0..i {
                    out[(i, j)] = out[(j, i)];
                }
            }
            if add_jitter {
                for i in 0..a.len() {
                    out[(i, i)] += self.jitter;
                }
            }
        }
        Ok(out)
    }

    /// Self-Gram matrix with jitter on the diagonal.
    pub fn gram_self(&self, a: Points) -> Result<DMatrix<f64>> {
        self.gram(a, a, true)
    }

    /// Back-propagates an adjoint `adj = dF/dK(A, B)` into the log-parameters
    /// and, optionally, into the input coordinates of `A` and `B`.
    pub fn gram_backward(
        &self,
        a: Points,
        b: Points,
        adj: &DMatrix<f64>,
        dparams: &mut [f64],
        mut da: Option<&mut [f64]>,
        mut db: Option<&mut [f64]>,
    ) {
        debug_assert_eq!(adj.shape(), (a.len(), b.len()));
        debug_assert_eq!(dparams.len(), self.n_params());
        let dim = a.dim();
        for j in 0..b.len() {
            let pb = b.point(j);
            for i in 0..a.len() {
                let w = adj[(i, j)];
                if w == 0.0 {
                    continue;
                }
                let pa = a.point(i);
                let r2 = sq_dist(pa, pb);
                let dr = self.backward_r2(r2, w, dparams);
                if dr == 0.0 {
                    continue;
                }
                for q in 0..dim {
                    let g = w * dr * (pa[q] - pb[q]);
                    if let Some(da) = da.as_deref_mut() {
                        da[i * dim + q] += g;
                    }
                    if let Some(db) = db.as_deref_mut() {
                        db[j * dim + q] -= g;
                    }
                }
            }
        }
    }

    /// Same as [`Self::gram_backward`] for a self-Gram `K(A, A)`, where each
    /// input appears on both sides.
    pub fn gram_self_backward(
        &self,
        a: Points,
        adj: &DMatrix<f64>,
        dparams: &mut [f64],
        da: Option<&mut [f64]>,
    ) {
        match da {
            Some(da) => {
                let mut other = vec![0.0; da.len()];
                self.gram_backward(a, a, adj, dparams, Some(da), Some(&mut other));
                da.iter_mut().zip(other).for_each(|(d, o)| *d += o);
            }
            None => self.gram_backward(a, a, adj, dparams, None, None),
        }
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn catalog() -> Vec<KernelSpec> {
        vec![
            KernelSpec::se(1.3, 0.4),
            KernelSpec::matern12(0.7, 0.5),
            KernelSpec::matern32(2.0, 0.3),
            KernelSpec::periodic(1.1, 0.8, 0.6),
            KernelSpec::sum(vec![KernelSpec::matern12(0.5, 0.3), KernelSpec::periodic(0.4, 1.0, 0.5)]),
        ]
    }

    #[test]
    fn closed_forms() {
        let se = KernelSpec::se(1.0, 1.0);
        assert_eq!(se.eval(0.3, 0.3).unwrap(), 1.0);
        assert_relative_eq!(se.eval(0.0, 1.0).unwrap(), (-0.5f64).exp(), epsilon = 1e-15);
        assert_relative_eq!(se.eval(0.0, 1.0).unwrap(), 0.606531, epsilon = 1e-6);
        let per = KernelSpec::periodic(2.0, 0.7, 0.5);
        assert_relative_eq!(per.eval(0.1, 0.6).unwrap(), 2.0, epsilon = 1e-12);
        let m12 = KernelSpec::matern12(2.0, 0.5);
        assert_relative_eq!(m12.eval(0.0, 1.0).unwrap(), 2.0 * (-2.0f64).exp(), epsilon = 1e-15);
        let m32 = KernelSpec::matern32(1.0, 1.0);
        let a = 3f64.sqrt();
        assert_relative_eq!(m32.eval(1.0, 0.0).unwrap(), (1.0 + a) * (-a).exp(), epsilon = 1e-15);
        let sum = KernelSpec::sum(vec![se.clone(), m12.clone()]);
        assert_relative_eq!(
            sum.eval(0.0, 1.0).unwrap(),
            se.eval(0.0, 1.0).unwrap() + m12.eval(0.0, 1.0).unwrap()
        );
    }

    #[test]
    fn invalid_hyperparameters_rejected() {
        assert!(matches!(KernelSpec::se(0.0, 1.0).eval(0.0, 0.0), Err(Error::InvalidArgument(_))));
        assert!(KernelSpec::se(1.0, -1.0).eval(0.0, 0.0).is_err());
        assert!(KernelSpec::periodic(1.0, 1.0, 0.0).eval(0.0, 0.0).is_err());
        assert!(KernelSpec::sum(vec![]).eval(0.0, 0.0).is_err());
        assert!(KernelSpec::se(1.0, 1.0).eval(f64::NAN, 0.0).is_err());
        let x = [0.0, f64::INFINITY];
        assert!(KernelSpec::se(1.0, 1.0).gram(Points::scalar(&x), Points::scalar(&x), true).is_err());
    }

    #[test]
    fn gram_entries() {
        let k = KernelSpec::se(1.0, 1.0);
        let g = k.gram(Points::scalar(&[0.0]), Points::scalar(&[0.0, 1.0]), true).unwrap();
        assert_eq!(g.shape(), (1, 2));
        assert_eq!(g[(0, 0)], 1.0);
        assert_relative_eq!(g[(0, 1)], (-0.5f64).exp());

        let x: Vec<f64> = (0..7).map(|i| i as f64 * 0.3 - 1.0).collect();
        let k = KernelSpec::se(2.5, 0.3);
        let g = k.gram_self(Points::scalar(&x)).unwrap();
        for i in 0..x.len() {
            assert_eq!(g[(i, i)], 2.5 + k.jitter);
        }
    }

    #[test]
    fn gram_min_eigenvalue_positive() {
        let x: Vec<f64> = (0..10).map(|i| -1.0 + 2.0 * i as f64 / 9.0).collect();
        let g = KernelSpec::se(1.0, 1.0).gram_self(Points::scalar(&x)).unwrap();
        let eig = nalgebra::SymmetricEigen::new(g);
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min > 0.0, "min eigenvalue {min}");
    }

    #[test]
    fn log_param_roundtrip() {
        for k in catalog() {
            let p = k.log_params();
            assert_eq!(p.len(), k.n_params());
            let k2 = k.with_log_params(&p);
            for (a, b) in k2.log_params().iter().zip(&p) {
                assert_relative_eq!(a, b, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let a = [0.1, -0.4, 0.35, 0.9];
        let pts_b = [-0.2, 0.5, 0.05, 0.3];
        let (pa, pb) = (Points::new(&a, 2), Points::new(&pts_b, 2));
        // F = sum_ij W_ij K_ij with an arbitrary fixed W
        let w = DMatrix::from_row_slice(2, 2, &[0.3, -1.2, 0.7, 0.25]);
        let f = |k: &KernelSpec, a: &[f64], b: &[f64]| {
            let g = k.gram(Points::new(a, 2), Points::new(b, 2), false).unwrap();
            g.component_mul(&w).sum()
        };
        let h = 1e-6;
        for k in catalog() {
            let mut dp = vec![0.0; k.n_params()];
            let mut da = vec![0.0; a.len()];
            let mut db = vec![0.0; pts_b.len()];
            k.gram_backward(pa, pb, &w, &mut dp, Some(&mut da), Some(&mut db));
            let lp = k.log_params();
            for i in 0..lp.len() {
                let mut up = lp.clone();
                up[i] += h;
                let mut dn = lp.clone();
                dn[i] -= h;
                let fd = (f(&k.with_log_params(&up), &a, &pts_b) - f(&k.with_log_params(&dn), &a, &pts_b)) / (2.0 * h);
                assert_relative_eq!(dp[i], fd, epsilon = 1e-7, max_relative = 1e-6);
            }
            for i in 0..a.len() {
                let mut up = a;
                up[i] += h;
                let mut dn = a;
                dn[i] -= h;
                let fd = (f(&k, &up, &pts_b) - f(&k, &dn, &pts_b)) / (2.0 * h);
                assert_relative_eq!(da[i], fd, epsilon = 1e-7, max_relative = 1e-6);
            }
            for i in 0..pts_b.len() {
                let mut up = pts_b;
                up[i] += h;
                let mut dn = pts_b;
                dn[i] -= h;
                let fd = (f(&k, &a, &up) - f(&k, &a, &dn)) / (2.0 * h);
                assert_relative_eq!(db[i], fd, epsilon = 1e-7, max_relative = 1e-6);
            }
        }
    }

    proptest! {
        #[test]
        fn gram_symmetric_and_cholesky_succeeds(xs in proptest::collection::vec(-3.0f64..3.0, 1..20)) {
            for k in catalog() {
                let g = k.gram_self(Points::scalar(&xs)).unwrap();
                prop_assert_eq!(&g, &g.transpose());
                // coincident inputs are possible; jitter alone must keep it PD
                prop_assert!(g.clone().cholesky().is_some());
            }
        }

        #[test]
        fn stationary(x in -3.0f64..3.0, y in -3.0f64..3.0, shift in -5.0f64..5.0) {
            for k in catalog() {
                let a = k.eval(x, y).unwrap();
                let b = k.eval(x + shift, y + shift).unwrap();
                prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
            }
        }
    }
}
