//! Comparison methods: dynamic time warping, and the ablations of the full
//! model obtained by swapping the warp family and/or the alignment term.

use crate::model::{mean_sequence, AlignmentObjective, Dataset};
use crate::optimizer::{fit, FitConfig, FitResult};
use crate::warps::WarpFamily;
use crate::error::{Error, Result};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// One of the four model variants.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantSpec {
    pub warp_family: WarpFamily,
    pub alignment_objective: AlignmentObjective,
}

impl VariantSpec {
    pub const OURS: VariantSpec = VariantSpec {
        warp_family: WarpFamily::NonparametricGp,
        alignment_objective: AlignmentObjective::Gplvm,
    };
    pub const ENERGY_GPLVM: VariantSpec = VariantSpec {
        warp_family: WarpFamily::NonparametricGp,
        alignment_objective: AlignmentObjective::EnergyToMean,
    };
    pub const GPLVM_BASIS: VariantSpec = VariantSpec {
        warp_family: WarpFamily::BasisSimplex,
        alignment_objective: AlignmentObjective::Gplvm,
    };
    pub const ENERGY_BASIS: VariantSpec = VariantSpec {
        warp_family: WarpFamily::BasisSimplex,
        alignment_objective: AlignmentObjective::EnergyToMean,
    };

    /// Parses the method names used on the command line.
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "ours" => Some(Self::OURS),
            "energy+gplvm" | "energy+gp" => Some(Self::ENERGY_GPLVM),
            "gplvm+basis" => Some(Self::GPLVM_BASIS),
            "energy+basis" => Some(Self::ENERGY_BASIS),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match (self.warp_family, self.alignment_objective) {
            (WarpFamily::BasisSimplex, AlignmentObjective::Gplvm) => "gplvm+basis",
            (WarpFamily::BasisSimplex, AlignmentObjective::EnergyToMean) => "energy+basis",
            (_, AlignmentObjective::Gplvm) => "ours",
            (_, AlignmentObjective::EnergyToMean) => "energy+gplvm",
        }
    }
}

/// Runs the standard fitting pipeline with the variant's warp family and
/// alignment term swapped in.
pub fn fit_variant(data: &Dataset, spec: VariantSpec, config: &FitConfig) -> Result<FitResult> {
    let mut config = config.clone();
    config.model.warp.family = spec.warp_family;
    config.model.alignment = spec.alignment_objective;
    fit(data, &config)
}

/// `sum_j ||S_j - mean(S)||_F^2`.
pub fn energy_objective(s: &[DMatrix<f64>]) -> f64 {
    if s.is_empty() {
        return 0.0;
    }
    let mean = mean_sequence(s);
    s.iter().map(|m| (m - &mean).norm_squared()).sum()
}

fn frame_dist(a: &DMatrix<f64>, i: usize, b: &DMatrix<f64>, j: usize) -> f64 {
    a.row(i).iter().zip(b.row(j).iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Dynamic time warping over squared Euclidean frame distances.
///
/// Returns the optimal path as 0-based `(index in a, index in b)` pairs from
/// `(0, 0)` to `(Na-1, Nb-1)`, and its total cost. On ties the diagonal step
/// is preferred.
pub fn dtw_align(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(Vec<(usize, usize)>, f64)> {
    let (na, nb) = (a.nrows(), b.nrows());
    if na == 0 || nb == 0 {
        return Err(Error::invalid("dtw needs non-empty sequences"));
    }
    if a.ncols() != b.ncols() {
        return Err(Error::invalid("dtw sequences must have the same dimension"));
    }
    let mut acc = DMatrix::from_element(na, nb, f64::INFINITY);
    for i in 0..na {
        for j in 0..nb {
            let best = if i == 0 && j == 0 {
                0.0
            } else {
                let diag = if i > 0 && j > 0 { acc[(i - 1, j - 1)] } else { f64::INFINITY };
                let up = if i > 0 { acc[(i - 1, j)] } else { f64::INFINITY };
                let left = if j > 0 { acc[(i, j - 1)] } else { f64::INFINITY };
                diag.min(up).min(left)
            };
            acc[(i, j)] = best + frame_dist(a, i, b, j);
        }
    }
    let mut path = vec![(na - 1, nb - 1)];
    let (mut i, mut j) = (na - 1, nb - 1);
    while i > 0 || j > 0 {
        (i, j) = if i == 0 {
            (0, j - 1)
        } else if j == 0 {
            (i - 1, 0)
        } else {
            let diag = acc[(i - 1, j - 1)];
            let up = acc[(i - 1, j)];
            let left = acc[(i, j - 1)];
            if diag <= up && diag <= left {
                (i - 1, j - 1)
            } else if up <= left {
                (i - 1, j)
            } else {
                (i, j - 1)
            }
        };
        path.push((i, j));
    }
    path.reverse();
    Ok((path, acc[(na - 1, nb - 1)]))
}

/// Warp on `[-1, 1]` read off a DTW path: for each index of `a`, the mean of
/// the matched `b` indices, rescaled from `0..Nb-1` to `[-1, 1]`.
pub fn dtw_warp(path: &[(usize, usize)], na: usize, nb: usize) -> Vec<f64> {
    let mut sum = vec![0.0; na];
    let mut count = vec![0usize; na];
    for &(i, j) in path {
        sum[i] += j as f64;
        count[i] += 1;
    }
    let scale = if nb > 1 { 2.0 / (nb - 1) as f64 } else { 0.0 };
    sum.iter()
        .zip(&count)
        .map(|(s, &c)| -1.0 + scale * s / c.max(1) as f64)
        .collect()
}

/// Multi-sequence DTW alignment against the medoid sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct DtwAlignment {
    pub reference: usize,
    /// Latent time of every observed sample, per sequence.
    pub warps: Vec<Vec<f64>>,
    /// Each sequence resampled onto the reference's time axis.
    pub aligned: Vec<DMatrix<f64>>,
}

/// Aligns every sequence to the medoid (smallest summed DTW cost to all others).
pub fn dtw_align_dataset(data: &Dataset) -> Result<DtwAlignment> {
    let y = &data.y;
    let j = y.len();
    let costs: Vec<Vec<f64>> = (0..j)
        .into_par_iter()
        .map(|a| (0..j).map(|b| if a == b { Ok(0.0) } else { dtw_align(&y[a], &y[b]).map(|r| r.1) }).collect())
        .collect::<Result<_>>()?;
    let reference = (0..j)
        .min_by(|&a, &b| {
            let ca: f64 = costs[a].iter().sum();
            let cb: f64 = costs[b].iter().sum();
            ca.total_cmp(&cb)
        })
        .unwrap_or(0);
    let mut warps = Vec::with_capacity(j);
    let mut aligned = Vec::with_capacity(j);
    let nr = y[reference].nrows();
    for seq in y {
        let (path, _) = dtw_align(seq, &y[reference])?;
        warps.push(dtw_warp(&path, seq.nrows(), nr));
        let mut out = DMatrix::zeros(nr, seq.ncols());
        let mut count = vec![0usize; nr];
        for &(k, i) in &path {
            let row = seq.row(k).into_owned();
            let mut dst = out.row_mut(i);
            dst += row;
            count[i] += 1;
        }
        for (i, c) in count.iter().enumerate() {
            let mut r = out.row_mut(i);
            r /= *c as f64;
        }
        aligned.push(out);
    }
    Ok(DtwAlignment {
        reference,
        warps,
        aligned,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn col(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(v.len(), 1, v)
    }

    /// Minimal cost over every monotone path, by exhaustive recursion.
    fn brute_force(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        fn go(a: &DMatrix<f64>, b: &DMatrix<f64>, i: usize, j: usize) -> f64 {
            let here = frame_dist(a, i, b, j);
            if i + 1 == a.nrows() && j + 1 == b.nrows() {
                return here;
            }
            let mut best = f64::INFINITY;
            if i + 1 < a.nrows() {
                best = best.min(go(a, b, i + 1, j));
            }
            if j + 1 < b.nrows() {
                best = best.min(go(a, b, i, j + 1));
            }
            if i + 1 < a.nrows() && j + 1 < b.nrows() {
                best = best.min(go(a, b, i + 1, j + 1));
            }
            here + best
        }
        go(a, b, 0, 0)
    }

    #[test]
    fn dtw_examples() {
        let a = col(&[0.3, 1.0, -0.2, 0.8]);
        let (path, cost) = dtw_align(&a, &a).unwrap();
        assert_eq!(cost, 0.0);
        assert_eq!(path, vec![(0, 0), (1, 1), (2, 2), (3, 3)]);

        let (path, cost) = dtw_align(&col(&[0.0, 1.0]), &col(&[0.0, 1.0, 1.0])).unwrap();
        assert_eq!(cost, 0.0);
        assert_eq!(path, vec![(0, 0), (1, 1), (1, 2)]);

        let (_, cost) = dtw_align(&col(&[0.0, 2.0]), &col(&[1.0])).unwrap();
        assert_eq!(cost, 2.0);
        assert_eq!(brute_force(&col(&[0.0, 2.0]), &col(&[1.0])), 2.0);

        assert!(dtw_align(&DMatrix::zeros(0, 1), &col(&[1.0])).is_err());
    }

    #[test]
    fn dtw_path_is_valid() {
        let a = col(&[0.0, 0.5, 1.0, 0.2, -0.4, 0.1]);
        let b = col(&[0.1, 1.1, 0.9, -0.5]);
        let (path, cost) = dtw_align(&a, &b).unwrap();
        assert_eq!(path[0], (0, 0));
        assert_eq!(*path.last().unwrap(), (5, 3));
        for w in path.windows(2) {
            let (di, dj) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
            assert!((di, dj) == (1, 0) || (di, dj) == (0, 1) || (di, dj) == (1, 1));
        }
        let along: f64 = path.iter().map(|&(i, j)| frame_dist(&a, i, &b, j)).sum();
        assert_relative_eq!(along, cost, epsilon = 1e-12);
    }

    #[test]
    fn dtw_warp_of_identity_path() {
        let path: Vec<_> = (0..5).map(|i| (i, i)).collect();
        let w = dtw_warp(&path, 5, 5);
        for (a, b) in w.iter().zip(crate::model::uniform_grid(5)) {
            assert_relative_eq!(*a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn energy_examples() {
        assert_eq!(energy_objective(&[col(&[1.0, 2.0]), col(&[1.0, 2.0])]), 0.0);
        assert_eq!(energy_objective(&[col(&[0.0]), col(&[2.0])]), 2.0);
        let s: Vec<DMatrix<f64>> = (0..4)
            .map(|j| DMatrix::from_fn(3, 2, |n, d| ((j * 7 + n * 3 + d) as f64 * 0.61).sin()))
            .collect();
        let mut oracle = 0.0;
        for n in 0..3 {
            for d in 0..2 {
                let mean: f64 = s.iter().map(|m| m[(n, d)]).sum::<f64>() / 4.0;
                oracle += s.iter().map(|m| (m[(n, d)] - mean).powi(2)).sum::<f64>();
            }
        }
        assert_relative_eq!(energy_objective(&s), oracle, epsilon = 1e-12);
        let mut perm = s.clone();
        perm.swap(0, 3);
        perm.swap(1, 2);
        assert_relative_eq!(energy_objective(&perm), oracle, epsilon = 1e-12);
    }

    #[test]
    fn variant_names_roundtrip() {
        for name in ["ours", "energy+gplvm", "gplvm+basis", "energy+basis"] {
            assert_eq!(VariantSpec::from_name(name).unwrap().name(), name);
        }
        assert!(VariantSpec::from_name("dtw").is_none());
    }

    proptest! {
        #[test]
        fn dtw_matches_enumeration_and_is_symmetric(
            a in proptest::collection::vec(-2.0f64..2.0, 1..=6),
            b in proptest::collection::vec(-2.0f64..2.0, 1..=6),
        ) {
            let (a, b) = (col(&a), col(&b));
            let (_, cost) = dtw_align(&a, &b).unwrap();
            let (_, rev) = dtw_align(&b, &a).unwrap();
            let oracle = brute_force(&a, &b);
            prop_assert!((cost - oracle).abs() <= 1e-12 * (1.0 + oracle));
            prop_assert!((cost - rev).abs() <= 1e-12 * (1.0 + oracle));
        }
    }
}
