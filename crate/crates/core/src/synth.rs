//! Synthetic sequences with known warps, and the evaluation metrics.

use crate::error::{Error, Result};
use crate::kernels::{KernelSpec, Points};
use crate::model::{uniform_grid, Dataset};
use crate::warps::warp_from_aux;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

/// Resolution of the grid the latent curves are drawn on.
const DENSE_GRID: usize = 401;
const LATENT_DIM: usize = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenConfig {
    pub j: usize,
    pub n: usize,
    pub d: usize,
    pub groups: usize,
    pub warp_roughness: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.groups == 0 || self.groups > self.j {
            return Err(Error::invalid(format!(
                "need 1 <= groups <= J, got groups={} J={}",
                self.groups, self.j
            )));
        }
        if self.n < 4 {
            return Err(Error::invalid("N must be >= 4"));
        }
        if self.d == 0 {
            return Err(Error::invalid("D must be >= 1"));
        }
        if !(self.warp_roughness.is_finite() && self.warp_roughness >= 0.0) {
            return Err(Error::invalid("warp_roughness must be finite and >= 0"));
        }
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) {
            return Err(Error::invalid("noise_sd must be finite and >= 0"));
        }
        Ok(())
    }
}

/// A smooth random curve in `LATENT_DIM` dimensions, stored on the dense grid.
struct LatentCurve {
    values: DMatrix<f64>,
}

impl LatentCurve {
    fn at(&self, t: f64) -> [f64; LATENT_DIM] {
        let pos = ((t.clamp(-1.0, 1.0) + 1.0) / 2.0) * (DENSE_GRID - 1) as f64;
        let i = (pos.floor() as usize).min(DENSE_GRID - 2);
        let frac = pos - i as f64;
        std::array::from_fn(|c| (1.0 - frac) * self.values[(i, c)] + frac * self.values[(i + 1, c)])
    }
}

/// Draws from `N(0, cov)` through the eigendecomposition, which stays exact
/// when the covariance is numerically singular.
fn gp_draws(cov: &DMatrix<f64>, count: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(cov.clone());
    let scale = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt()));
    let n = cov.nrows();
    let mut out = DMatrix::zeros(n, count);
    for c in 0..count {
        let e = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
        out.set_column(c, &(&eig.eigenvectors * e.component_mul(&scale)));
    }
    out
}

fn moving_average(u: &[f64], half_width: usize) -> Vec<f64> {
    (0..u.len())
        .map(|i| {
            let lo = i.saturating_sub(half_width);
            let hi = (i + half_width + 1).min(u.len());
            u[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Generates `J` sequences on the uniform grid. Sequence `j` belongs to group
/// `j mod groups` and observes that group's latent curve, projected to `D`
/// dimensions, through a random monotone warp.
pub fn generate(config: &GenConfig) -> Result<Dataset> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let dense = uniform_grid(DENSE_GRID);
    let cov = KernelSpec::se(1.0, 0.3).with_jitter(0.0).gram_self(Points::scalar(&dense))?;

    let curves: Vec<LatentCurve> = (0..config.groups)
        .map(|_| LatentCurve { values: gp_draws(&cov, LATENT_DIM, &mut rng) })
        .collect();
    let projections: Vec<DMatrix<f64>> = (0..config.groups)
        .map(|_| {
            let mut p = DMatrix::from_fn(config.d, LATENT_DIM, |_, _| StandardNormal.sample(&mut rng));
            for mut col in p.column_iter_mut() {
                let norm = col.norm();
                if norm > 0.0 {
                    col /= norm;
                } else {
                    col[0] = 1.0;
                }
            }
            p
        })
        .collect();

    let groups: Vec<usize> = (0..config.j).map(|j| j % config.groups).collect();
    let noise = Normal::new(0.0, config.noise_sd).map_err(|e| Error::invalid(e.to_string()))?;
    let mut true_warps = Vec::with_capacity(config.j);
    let mut y = Vec::with_capacity(config.j);
    for &g in &groups {
        let u: Vec<f64> = (0..config.n)
            .map(|_| config.warp_roughness * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let warp = warp_from_aux(&moving_average(&u, 2));
        let mut seq = DMatrix::zeros(config.n, config.d);
        for (row, &t) in warp.iter().enumerate() {
            let latent = curves[g].at(t);
            for d in 0..config.d {
                let clean: f64 = (0..LATENT_DIM).map(|c| projections[g][(d, c)] * latent[c]).sum();
                seq[(row, d)] = clean + if config.noise_sd > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            }
        }
        true_warps.push(warp);
        y.push(seq);
    }

    let mut data = Dataset::new(uniform_grid(config.n), y)?;
    data.true_warps = Some(true_warps);
    data.groups = Some(groups);
    Ok(data)
}

/// Mean squared difference over all warp entries.
pub fn warping_error(estimated: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<f64> {
    if estimated.len() != truth.len() || estimated.iter().zip(truth).any(|(a, b)| a.len() != b.len()) {
        return Err(Error::invalid("warping_error: warp shapes differ"));
    }
    let count: usize = truth.iter().map(Vec::len).sum();
    if count == 0 {
        return Err(Error::invalid("warping_error: no warp entries"));
    }
    let total: f64 = estimated
        .iter()
        .zip(truth)
        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)))
        .sum();
    Ok(total / count as f64)
}

/// Mean over within-group unordered pairs of the per-entry squared difference.
pub fn alignment_error(s: &[DMatrix<f64>], groups: &[usize]) -> Result<f64> {
    if s.len() != groups.len() {
        return Err(Error::invalid("alignment_error: one label per sequence is required"));
    }
    let (mut total, mut pairs) = (0.0, 0usize);
    for a in 0..s.len() {
        for b in a + 1..s.len() {
            if groups[a] != groups[b] {
                continue;
            }
            if s[a].shape() != s[b].shape() {
                return Err(Error::invalid("alignment_error: sequence shapes differ"));
            }
            total += (&s[a] - &s[b]).norm_squared() / s[a].len() as f64;
            pairs += 1;
        }
    }
    if pairs == 0 {
        return Err(Error::invalid("alignment_error: no group has two members"));
    }
    Ok(total / pairs as f64)
}

/// Result of [`kmeans`].
#[derive(Clone, Debug, PartialEq)]
pub struct Clustering {
    pub labels: Vec<usize>,
    pub inertia: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn lloyd(points: &[Vec<f64>], mut centres: Vec<Vec<f64>>) -> Clustering {
    let k = centres.len();
    let mut labels = vec![usize::MAX; points.len()];
    for _ in 0..300 {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let best = (0..k)
                .min_by(|&a, &b| sq_dist(p, &centres[a]).total_cmp(&sq_dist(p, &centres[b])))
                .unwrap();
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        // an emptied cluster takes the point farthest from its centre
        for c in 0..k {
            if !labels.contains(&c) {
                let far = (0..points.len())
                    .max_by(|&a, &b| {
                        sq_dist(&points[a], &centres[labels[a]]).total_cmp(&sq_dist(&points[b], &centres[labels[b]]))
                    })
                    .unwrap();
                labels[far] = c;
                changed = true;
            }
        }
        for (c, centre) in centres.iter_mut().enumerate() {
            let members: Vec<&Vec<f64>> = points.iter().zip(&labels).filter(|(_, l)| **l == c).map(|(p, _)| p).collect();
            if members.is_empty() {
                continue;
            }
            for (q, v) in centre.iter_mut().enumerate() {
                *v = members.iter().map(|m| m[q]).sum::<f64>() / members.len() as f64;
            }
        }
        if !changed {
            break;
        }
    }
    let inertia = points.iter().zip(&labels).map(|(p, &l)| sq_dist(p, &centres[l])).sum();
    Clustering { labels, inertia }
}

fn plus_plus_init(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centres = vec![points[rng.random_range(0..points.len())].clone()];
    while centres.len() < k {
        let d2: Vec<f64> = points
            .iter()
            .map(|p| centres.iter().map(|c| sq_dist(p, c)).fold(f64::INFINITY, f64::min))
            .collect();
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            d2.iter()
                .position(|&w| {
                    r -= w;
                    r < 0.0
                })
                .unwrap_or(points.len() - 1)
        } else {
            rng.random_range(0..points.len())
        };
        centres.push(points[pick].clone());
    }
    centres
}

/// k-means++ seeding followed by Lloyd iterations; the restart with the lowest
/// inertia wins.
pub fn kmeans(z: &DMatrix<f64>, k: usize, restarts: usize, seed: u64) -> Result<Clustering> {
    if k == 0 || k > z.nrows() {
        return Err(Error::invalid(format!("k must be in 1..={}, got {k}", z.nrows())));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("k-means input must be finite"));
    }
    let points: Vec<Vec<f64>> = z.row_iter().map(|r| r.iter().copied().collect()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<Clustering> = None;
    for _ in 0..restarts.max(1) {
        let run = lloyd(&points, plus_plus_init(&points, k, &mut rng));
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.unwrap())
}

/// Fraction of points whose cluster majority label equals their own.
pub fn purity(clusters: &[usize], groups: &[usize]) -> f64 {
    let mut matched = 0;
    let mut seen: Vec<usize> = clusters.to_vec();
    seen.sort_unstable();
    seen.dedup();
    for c in seen {
        let mut counts = std::collections::HashMap::new();
        for (_, g) in clusters.iter().zip(groups).filter(|(l, _)| **l == c) {
            *counts.entry(*g).or_insert(0usize) += 1;
        }
        matched += counts.values().max().copied().unwrap_or(0);
    }
    matched as f64 / groups.len() as f64
}

/// k-means purity of the latent points against known labels. `k` should be
/// the number of distinct labels.
pub fn cluster_purity(z: &DMatrix<f64>, groups: &[usize], k: usize) -> Result<f64> {
    if groups.len() != z.nrows() {
        return Err(Error::invalid("cluster_purity: one label per latent point is required"));
    }
    let clustering = kmeans(z, k, 10, 0)?;
    Ok(purity(&clustering.labels, groups))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::GpFit;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn config() -> GenConfig {
        GenConfig { j: 6, n: 30, d: 2, groups: 2, warp_roughness: 1.0, noise_sd: 0.05, seed: 11 }
    }

    #[test]
    fn degenerate_generator() {
        let data = generate(&GenConfig { warp_roughness: 0.0, noise_sd: 0.0, groups: 1, ..config() }).unwrap();
        let neutral = warp_from_aux(&[0.0; 30]);
        for j in 0..6 {
            assert_eq!(data.y[j], data.y[0]);
            assert_eq!(data.true_warps.as_ref().unwrap()[j], neutral);
        }
    }

    #[test]
    fn generated_warps_monotone_and_deterministic() {
        let a = generate(&config()).unwrap();
        let b = generate(&config()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.groups, Some(vec![0, 1, 0, 1, 0, 1]));
        for g in a.true_warps.as_ref().unwrap() {
            assert_eq!(*g.last().unwrap(), 1.0);
            assert!(g.windows(2).all(|w| w[1] > w[0]));
        }
        let c = generate(&GenConfig { seed: 12, ..config() }).unwrap();
        assert_ne!(a.y, c.y);
    }

    #[test]
    fn invalid_configs() {
        assert!(generate(&GenConfig { groups: 0, ..config() }).is_err());
        assert!(generate(&GenConfig { groups: 7, ..config() }).is_err());
        assert!(generate(&GenConfig { n: 3, ..config() }).is_err());
        assert!(generate(&GenConfig { noise_sd: -1.0, ..config() }).is_err());
    }

    #[test]
    fn noiseless_group_members_differ_only_by_warp() {
        // resample each sequence back onto the common grid through its known warp
        let data = generate(&GenConfig { j: 4, n: 50, d: 2, groups: 2, noise_sd: 0.0, ..config() }).unwrap();
        let warps = data.true_warps.as_ref().unwrap();
        let lo = warps.iter().map(|g| g[0]).fold(f64::MIN, f64::max);
        let test: Vec<f64> = data.x.iter().copied().filter(|t| *t >= lo).collect();
        let resampled: Vec<DMatrix<f64>> = (0..4)
            .map(|j| {
                let fit = GpFit::new_multi(KernelSpec::se(1.0, 0.3), 1e8, Points::scalar(&warps[j]), data.y[j].clone()).unwrap();
                fit.predict_multi(Points::scalar(&test), false).unwrap().0
            })
            .collect();
        for (a, b) in [(0, 2), (1, 3)] {
            let mse = (&resampled[a] - &resampled[b]).norm_squared() / resampled[a].len() as f64;
            assert!(mse < 1e-3, "{mse}");
        }
    }

    #[test]
    fn warping_error_examples() {
        let g = vec![vec![-0.5, 0.0, 1.0], vec![-0.2, 0.4, 1.0]];
        assert_eq!(warping_error(&g, &g).unwrap(), 0.0);
        let shifted: Vec<Vec<f64>> = g.iter().map(|r| r.iter().map(|v| v + 0.3).collect()).collect();
        assert_relative_eq!(warping_error(&shifted, &g).unwrap(), 0.09, epsilon = 1e-15);
        let other = vec![vec![0.1, 0.2, 0.3], vec![0.9, -0.4, 0.0]];
        let oracle = [0.36, 0.04, 0.49, 1.21, 0.64, 1.0].iter().sum::<f64>() / 6.0;
        assert_relative_eq!(warping_error(&other, &g).unwrap(), oracle, epsilon = 1e-14);
        assert!(warping_error(&g[..1], &g).is_err());
        assert!(warping_error(&[vec![0.0, 1.0], vec![0.0]], &[vec![0.0, 1.0], vec![0.0, 1.0]]).is_err());
    }

    #[test]
    fn alignment_error_examples() {
        let base = DMatrix::from_row_slice(3, 2, &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        let same = vec![base.clone(), base.clone(), base.clone()];
        assert_eq!(alignment_error(&same, &[0, 0, 0]).unwrap(), 0.0);
        let plus1 = base.add_scalar(1.0);
        let s = vec![base.clone(), DMatrix::zeros(3, 2), plus1, DMatrix::zeros(3, 2)];
        assert_eq!(alignment_error(&s, &[0, 1, 0, 2]).unwrap(), 1.0);
        assert!(alignment_error(&s, &[0, 1, 2, 3]).is_err());
    }

    #[test]
    fn alignment_error_matches_pairwise_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s: Vec<DMatrix<f64>> = (0..5).map(|_| DMatrix::from_fn(4, 2, |_, _| rng.random::<f64>())).collect();
        let groups = [0, 1, 0, 1, 0];
        let mut sum = 0.0;
        let pairs = [(0, 2), (0, 4), (2, 4), (1, 3)];
        for (a, b) in pairs {
            let mut acc = 0.0;
            for r in 0..4 {
                for c in 0..2 {
                    acc += (s[a][(r, c)] - s[b][(r, c)]).powi(2);
                }
            }
            sum += acc / 8.0;
        }
        assert_relative_eq!(alignment_error(&s, &groups).unwrap(), sum / 4.0, epsilon = 1e-14);
    }

    #[test]
    fn purity_examples() {
        let z = DMatrix::from_row_slice(6, 2, &[0.0, 0.0, 0.1, 0.0, 0.0, 0.1, 10.0, 10.0, 10.1, 10.0, 10.0, 10.1]);
        assert_eq!(cluster_purity(&z, &[0, 0, 0, 1, 1, 1], 2).unwrap(), 1.0);
        assert_eq!(cluster_purity(&z, &[4; 6], 1).unwrap(), 1.0);
        assert!(cluster_purity(&z, &[0; 6], 7).is_err());
        assert_relative_eq!(purity(&[0, 0, 1, 1], &[0, 1, 1, 1]), 0.75);
    }

    /// Exhaustive minimum-inertia 2-partition.
    fn brute_force(points: &DMatrix<f64>) -> (f64, Vec<usize>) {
        let n = points.nrows();
        let mut best = (f64::INFINITY, vec![]);
        for mask in 1u32..(1 << n) - 1 {
            let labels: Vec<usize> = (0..n).map(|i| ((mask >> i) & 1) as usize).collect();
            let mut inertia = 0.0;
            for c in 0..2 {
                let rows: Vec<usize> = (0..n).filter(|i| labels[*i] == c).collect();
                let centre: Vec<f64> = (0..points.ncols())
                    .map(|q| rows.iter().map(|r| points[(*r, q)]).sum::<f64>() / rows.len() as f64)
                    .collect();
                for r in rows {
                    inertia += (0..points.ncols()).map(|q| (points[(r, q)] - centre[q]).powi(2)).sum::<f64>();
                }
            }
            if inertia < best.0 {
                best = (inertia, labels);
            }
        }
        best
    }

    #[test]
    fn kmeans_matches_enumeration() {
        let z = DMatrix::from_row_slice(6, 2, &[0.0, 0.0, 1.0, 0.2, 0.5, 1.1, 3.0, 2.5, 3.6, 3.1, 2.2, 3.4]);
        let groups = [0, 0, 1, 1, 1, 1];
        let (inertia, labels) = brute_force(&z);
        let km = kmeans(&z, 2, 10, 0).unwrap();
        assert_relative_eq!(km.inertia, inertia, epsilon = 1e-12);
        assert_eq!(cluster_purity(&z, &groups, 2).unwrap(), purity(&labels, &groups));
    }

    proptest! {
        #[test]
        fn kmeans_is_a_lloyd_fixed_point(vals in proptest::collection::vec(-5.0f64..5.0, 12)) {
            // restarts do not guarantee the global optimum, only a stable partition
            let z = DMatrix::from_row_slice(6, 2, &vals);
            let (inertia, _) = brute_force(&z);
            let km = kmeans(&z, 2, 10, 0).unwrap();
            prop_assert!(km.inertia >= inertia - 1e-9 * (1.0 + inertia));
            let points: Vec<Vec<f64>> = z.row_iter().map(|r| r.iter().copied().collect()).collect();
            let again = lloyd(&points, (0..2).map(|c| {
                let m: Vec<&Vec<f64>> = points.iter().zip(&km.labels).filter(|(_, l)| **l == c).map(|(p, _)| p).collect();
                (0..2).map(|q| m.iter().map(|p| p[q]).sum::<f64>() / m.len() as f64).collect()
            }).collect());
            prop_assert!((again.inertia - km.inertia).abs() <= 1e-9 * (1.0 + km.inertia));
        }

        #[test]
        fn metrics_nonnegative(a in proptest::collection::vec(-1.0f64..1.0, 8), b in proptest::collection::vec(-1.0f64..1.0, 8)) {
            let e = warping_error(&[a.clone()], &[b.clone()]).unwrap();
            prop_assert!(e >= 0.0);
            prop_assert_eq!(e == 0.0, a == b);
            let s = vec![DMatrix::from_column_slice(8, 1, &a), DMatrix::from_column_slice(8, 1, &b)];
            let al = alignment_error(&s, &[0, 0]).unwrap();
            prop_assert!(al >= 0.0);
            prop_assert_eq!(al == 0.0, a == b);
        }
    }
}
