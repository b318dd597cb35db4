//! Entropy and chaining functionals on finite point clouds.
//!
//! Every quantity here is driven by one greedy farthest-point traversal
//! (ties broken by lowest index). After `j` centres the cover radius is
//! `R_j`; the greedy cover size at scale `ε` is the least `j` with
//! `R_j ≤ ε`, and the first `j` centres are pairwise at least `R_{j-1}`
//! apart, which gives the packing numbers.

use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::empirical::{ClassKind, IndexClass};
use crate::error::{param, Error, Result};
use crate::linalg::{dot, norm};
use crate::measures::{self, MeasureSpec};
use crate::orlicz;
use crate::rng;

/// Number of dyadic scales below the diameter used for grid-based reports.
pub const SCALE_COUNT: usize = 15;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "metric", rename_all = "snake_case")]
pub enum Metric {
    Euclidean,
    WeightedEuclidean {
        weights: Vec<f64>,
    },
    /// `d(s, t) = ‖⟨s − t, Y⟩‖_{ψ₂}` estimated on one shared sample of `Y`.
    EmpiricalPsi2 {
        measure: MeasureSpec,
        samples: usize,
        seed: u64,
    },
    Precomputed,
    /// Distances supplied by a closure.
    Oracle,
}

type DistanceFn = dyn Fn(usize, usize) -> f64 + Send + Sync;

#[derive(Clone)]
enum Source {
    Points,
    Matrix(Arc<Vec<f64>>),
    Oracle(Arc<DistanceFn>),
}

/// A finite metric space.
#[derive(Clone)]
pub struct PointCloud {
    points: Vec<Vec<f64>>,
    len: usize,
    metric: Metric,
    source: Source,
}

impl std::fmt::Debug for PointCloud {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PointCloud").field("len", &self.len).field("metric", &self.metric).finish()
    }
}

fn check_points(points: &[Vec<f64>]) -> Result<usize> {
    let Some(first) = points.first() else {
        return param("point cloud must be nonempty");
    };
    let n = first.len();
    for p in points {
        if p.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: p.len() });
        }
        if p.iter().any(|x| !x.is_finite()) {
            return param("points must be finite");
        }
    }
    Ok(n)
}

impl PointCloud {
    pub fn euclidean(points: Vec<Vec<f64>>) -> Result<Self> {
        check_points(&points)?;
        Ok(PointCloud { len: points.len(), points, metric: Metric::Euclidean, source: Source::Points })
    }

    pub fn weighted_euclidean(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        let n = check_points(&points)?;
        if weights.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: weights.len() });
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return param("weights must be finite and nonnegative");
        }
        Ok(PointCloud { len: points.len(), points, metric: Metric::WeightedEuclidean { weights }, source: Source::Points })
    }

    /// ψ₂(ν) distances, filled once into a cached matrix from `samples` draws of `measure`.
    pub fn empirical_psi2(points: Vec<Vec<f64>>, measure: MeasureSpec, samples: usize, seed: u64) -> Result<Self> {
        let n = check_points(&points)?;
        if measure.n != n {
            return Err(Error::DimensionMismatch { expected: n, got: measure.n });
        }
        if samples == 0 {
            return param("sample budget must be positive");
        }
        let y = measures::sample(&measure, samples, seed)?;
        let m = points.len();
        let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect();
        let values: Vec<Result<f64>> = pairs
            .par_iter()
            .map(|&(i, j)| {
                let diff: Vec<f64> = points[i].iter().zip(&points[j]).map(|(a, b)| a - b).collect();
                let proj: Vec<f64> = y.rows().map(|r| dot(r, &diff)).collect();
                orlicz::psi_norm_point(&proj, 2.0)
            })
            .collect();
        let mut matrix = vec![0.0; m * m];
        for (&(i, j), v) in pairs.iter().zip(values) {
            let v = v?;
            matrix[i * m + j] = v;
            matrix[j * m + i] = v;
        }
        Ok(PointCloud {
            len: m,
            points,
            metric: Metric::EmpiricalPsi2 { measure, samples, seed },
            source: Source::Matrix(Arc::new(matrix)),
        })
    }

    /// Row-major `m × m` distance matrix; must be symmetric, nonnegative and zero on the diagonal.
    pub fn precomputed(m: usize, matrix: Vec<f64>) -> Result<Self> {
        if m == 0 {
            return param("point cloud must be nonempty");
        }
        if matrix.len() != m * m {
            return Err(Error::DimensionMismatch { expected: m * m, got: matrix.len() });
        }
        for i in 0..m {
            if matrix[i * m + i] != 0.0 {
                return param("distance matrix must vanish on the diagonal");
            }
            for j in 0..m {
                let d = matrix[i * m + j];
                if !(d >= 0.0) || !d.is_finite() || d != matrix[j * m + i] {
                    return param("distance matrix must be finite, nonnegative and symmetric");
                }
            }
        }
        Ok(PointCloud { points: Vec::new(), len: m, metric: Metric::Precomputed, source: Source::Matrix(Arc::new(matrix)) })
    }

    /// Cloud of `m` abstract points with distances from `dist`.
    pub fn from_oracle(m: usize, dist: impl Fn(usize, usize) -> f64 + Send + Sync + 'static) -> Result<Self> {
        if m == 0 {
            return param("point cloud must be nonempty");
        }
        Ok(PointCloud { points: Vec::new(), len: m, metric: Metric::Oracle, source: Source::Oracle(Arc::new(dist)) })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        match &self.source {
            Source::Matrix(m) => m[i * self.len + j],
            Source::Oracle(f) => f(i, j),
            Source::Points => {
                let (a, b) = (&self.points[i], &self.points[j]);
                match &self.metric {
                    Metric::WeightedEuclidean { weights } => {
                        a.iter().zip(b).zip(weights).map(|((x, y), w)| (w * (x - y)).powi(2)).sum::<f64>().sqrt()
                    }
                    _ => a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt(),
                }
            }
        }
    }

    /// Check metric axioms on `triples` random triples. The triangle inequality
    /// is skipped for the Monte Carlo ψ₂ metric.
    pub fn verify_metric(&self, triples: usize, seed: u64) -> Result<()> {
        let mut r = rng::stream(seed, 0x3e7c, 0);
        let check_triangle = !matches!(self.metric, Metric::EmpiricalPsi2 { .. });
        for _ in 0..triples {
            let (i, j, l) = (r.random_range(0..self.len), r.random_range(0..self.len), r.random_range(0..self.len));
            let (dij, dji, djl, dil) = (self.dist(i, j), self.dist(j, i), self.dist(j, l), self.dist(i, l));
            if dij != dji || dij < 0.0 || self.dist(i, i) != 0.0 {
                return Err(Error::Precondition(format!("metric axioms fail at ({i}, {j})")));
            }
            if check_triangle && dil > (dij + djl) * (1.0 + 1e-12) + 1e-300 {
                return Err(Error::Precondition(format!("triangle inequality fails at ({i}, {j}, {l})")));
            }
        }
        Ok(())
    }

    /// Largest pairwise distance (exact, `O(m²)`).
    pub fn diameter(&self) -> f64 {
        (0..self.len).map(|i| (i + 1..self.len).map(|j| self.dist(i, j)).fold(0.0, f64::max)).fold(0.0, f64::max)
    }
}

/// Ordered farthest-point traversal.
#[derive(Clone, Debug, PartialEq)]
pub struct Traversal {
    /// Centres in selection order.
    pub order: Vec<usize>,
    /// `cover_radii[j]` is the cover radius of the first `j + 1` centres.
    pub cover_radii: Vec<f64>,
}

impl Traversal {
    /// Greedy cover size at scale `eps`.
    pub fn cover_size(&self, eps: f64) -> usize {
        self.cover_radii.iter().position(|&r| r <= eps).map_or(self.order.len(), |j| j + 1)
    }

    /// Size of the greedy packing whose members are pairwise at least `separation` apart.
    pub fn packing_size(&self, separation: f64) -> usize {
        1 + self.cover_radii.iter().take_while(|&&r| r >= separation && r > 0.0).count()
    }
}

/// Farthest-point traversal from point 0. `hook(j, mind)` runs after the
/// `j`-th centre is added, with `mind[x]` the distance from `x` to the centres.
pub fn traverse(cloud: &PointCloud, mut hook: impl FnMut(usize, &[f64])) -> Traversal {
    let m = cloud.len();
    let mut mind: Vec<f64> = (0..m).map(|x| cloud.dist(0, x)).collect();
    let mut order = vec![0];
    let mut cover_radii = Vec::with_capacity(m);
    loop {
        hook(order.len(), &mind);
        let (mut best, mut far) = (0usize, -1.0);
        for (x, &d) in mind.iter().enumerate() {
            if d > far {
                far = d;
                best = x;
            }
        }
        cover_radii.push(far.max(0.0));
        if far <= 0.0 || order.len() == m {
            break;
        }
        order.push(best);
        for (x, d) in mind.iter_mut().enumerate() {
            let nd = cloud.dist(best, x);
            if nd < *d {
                *d = nd;
            }
        }
    }
    Traversal { order, cover_radii }
}

/// Greedy cover sizes; an upper bound on `N(ε)` that is exact for `ε ≥ diam`.
pub fn covering_numbers(cloud: &PointCloud, epsilons: &[f64]) -> Result<Vec<usize>> {
    if epsilons.iter().any(|e| !(*e > 0.0)) {
        return param("scales must be positive");
    }
    let tr = traverse(cloud, |_, _| {});
    Ok(epsilons.iter().map(|&e| tr.cover_size(e)).collect())
}

/// Geometric scale grid `diam · 2^{-j}`, `j = 0..15`.
pub fn scale_grid(diameter: f64) -> Vec<f64> {
    (0..SCALE_COUNT).map(|j| diameter * 0.5f64.powi(j as i32)).collect()
}

/// `∫₀^∞ √(log N(ε)) dε` of the greedy cover step function, integrated exactly.
pub fn dudley_gamma2_upper(cloud: &PointCloud) -> f64 {
    dudley_from(&traverse(cloud, |_, _| {}))
}

fn dudley_from(tr: &Traversal) -> f64 {
    let r = &tr.cover_radii;
    (1..r.len()).map(|j| ((j + 1) as f64).ln().sqrt() * (r[j - 1] - r[j])).sum()
}

/// `(∫₀^∞ ε log N(ε) dε)^{1/2}` of the greedy cover step function.
pub fn two_convex_gamma2_upper(cloud: &PointCloud) -> f64 {
    two_convex_from(&traverse(cloud, |_, _| {}))
}

fn two_convex_from(tr: &Traversal) -> f64 {
    let r = &tr.cover_radii;
    (1..r.len()).map(|j| ((j + 1) as f64).ln() * (r[j - 1].powi(2) - r[j].powi(2)) / 2.0).sum::<f64>().sqrt()
}

/// Greedy admissible sequence `T_0 ⊂ T_1 ⊂ …` (prefixes of the traversal).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AdmissibleSequence {
    /// `|T_s|` for each level.
    pub sizes: Vec<usize>,
    /// `sup_t Σ_s 2^{s/2} d(t, T_s)`.
    pub value: f64,
    /// Point attaining the supremum.
    pub argmax: usize,
}

/// `|T_0| = 1`, `|T_s| = 2^{2^{s-1}}` for `s ≥ 1`, capped at the cloud size.
pub fn admissible_sizes(m: usize) -> Vec<usize> {
    let mut sizes = vec![1usize];
    let mut s = 1u32;
    while *sizes.last().unwrap() < m {
        let size = if s >= 7 { usize::MAX } else { 1usize << (1u32 << (s - 1)) };
        sizes.push(size.min(m));
        s += 1;
    }
    sizes
}

pub fn admissible_gamma2(cloud: &PointCloud) -> AdmissibleSequence {
    let m = cloud.len();
    let sizes = admissible_sizes(m);
    let mut acc = vec![0.0; m];
    let mut level = 0usize;
    traverse(cloud, |j, mind| {
        while level < sizes.len() && sizes[level] == j {
            let w = 2f64.powf(level as f64 / 2.0);
            acc.iter_mut().zip(mind).for_each(|(a, d)| *a += w * d);
            level += 1;
        }
    });
    let (mut argmax, mut value) = (0, 0.0);
    for (i, &a) in acc.iter().enumerate() {
        if a > value {
            value = a;
            argmax = i;
        }
    }
    AdmissibleSequence { sizes, value, argmax }
}

/// `max_ε ε √(log P(ε))` over the scale grid, where `P(ε)` is the greedy
/// packing with separation `2ε`.
pub fn sudakov_lower(cloud: &PointCloud) -> f64 {
    let tr = traverse(cloud, |_, _| {});
    sudakov_from(&tr, tr.cover_radii[0])
}

fn sudakov_from(tr: &Traversal, diameter_proxy: f64) -> f64 {
    scale_grid(diameter_proxy).into_iter().map(|e| e * (tr.packing_size(2.0 * e) as f64).ln().sqrt()).fold(0.0, f64::max)
}

/// Monte Carlo estimate with standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

/// `E sup_{t∈T} |⟨g, t⟩|` over `trials` Gaussian draws.
pub fn gaussian_width(cls: &IndexClass, trials: usize, seed: u64) -> Result<Estimate> {
    if trials == 0 {
        return param("trials must be positive");
    }
    let n = cls.n;
    let sup = |g: &[f64]| -> f64 {
        match &cls.kind {
            ClassKind::Sphere => norm(g),
            ClassKind::L1Ball => g.iter().fold(0.0, |m, x| f64::max(m, x.abs())),
            ClassKind::FiniteList(vs) | ClassKind::Net { vectors: vs, .. } => vs.iter().map(|v| dot(v, g).abs()).fold(0.0, f64::max),
        }
    };
    let values: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut r = rng::stream(seed, t as u64, 0x9a55);
            let g: Vec<f64> = (0..n).map(|_| r.sample(rand_distr::StandardNormal)).collect();
            sup(&g)
        })
        .collect();
    let (value, stderr) = crate::stats::mean_stderr(&values);
    Ok(Estimate { value, stderr })
}

/// Packing of ℓ-subsets of `{0..k}` under the symmetric-difference size.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubsetPacking {
    pub sets: Vec<Vec<usize>>,
    pub min_sym_diff: usize,
    pub log_size: f64,
}

/// Exhaustive lexicographic greedy when `C(k, ℓ) ≤ 2·10⁵`, otherwise greedy
/// over `budget` random ℓ-subsets.
pub fn subset_packing(k: usize, ell: usize, min_sym_diff: usize, budget: usize, seed: u64) -> Result<SubsetPacking> {
    if ell < 1 || ell > k {
        return param(format!("need 1 <= ell <= k, got ell = {ell}, k = {k}"));
    }
    let mut chosen: Vec<Vec<bool>> = Vec::new();
    let mut sets: Vec<Vec<usize>> = Vec::new();
    let mut consider = |set: &[usize]| {
        let mut mask = vec![false; k];
        set.iter().for_each(|&i| mask[i] = true);
        let ok = chosen.iter().all(|c| c.iter().zip(&mask).filter(|(a, b)| a != b).count() >= min_sym_diff);
        if ok {
            chosen.push(mask);
            sets.push(set.to_vec());
        }
    };
    if binomial(k, ell) <= 200_000.0 {
        crate::empirical::for_each_combination(k, ell, |s| consider(s));
    } else {
        let mut r = rng::stream(seed, 0x5b5e, 0);
        for _ in 0..budget {
            let mut idx: Vec<usize> = rand::seq::index::sample(&mut r, k, ell).into_vec();
            idx.sort_unstable();
            consider(&idx);
        }
    }
    let log_size = (sets.len() as f64).ln();
    Ok(SubsetPacking { sets, min_sym_diff, log_size })
}

/// Packing at separation `|I△J| ≥ λℓ` together with the target `(1−λ) ℓ log(c k / ℓ)`.
pub fn subset_packing_lambda(k: usize, ell: usize, lambda: f64, c: f64, budget: usize, seed: u64) -> Result<(SubsetPacking, f64)> {
    if !(lambda > 0.0 && lambda <= 0.5) {
        return param(format!("lambda must lie in (0, 1/2], got {lambda}"));
    }
    let sep = (lambda * ell as f64).ceil() as usize;
    let packing = subset_packing(k, ell, sep.max(1), budget, seed)?;
    let target = (1.0 - lambda) * ell as f64 * (c * k as f64 / ell as f64).ln();
    Ok((packing, target))
}

fn binomial(k: usize, ell: usize) -> f64 {
    let ell = ell.min(k - ell);
    (0..ell).fold(1.0, |acc, i| acc * (k - i) as f64 / (i + 1) as f64)
}

/// All chaining quantities for one cloud.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainingReport {
    pub metric: Metric,
    pub points: usize,
    /// `"net_lower"` when the cloud is a net of a continuous set, else `"exact_cloud"`.
    pub cloud_semantics: String,
    pub net_resolution: Option<f64>,
    pub diameter: f64,
    pub scales: Vec<f64>,
    pub covering_numbers: Vec<usize>,
    pub dudley_upper: f64,
    pub two_convex_upper: f64,
    pub admissible_gamma2_upper: f64,
    pub admissible_sizes: Vec<usize>,
    pub sudakov_lower: f64,
    /// `sudakov_lower / admissible_gamma2_upper`, recorded rather than assumed.
    pub sudakov_ratio: f64,
    pub gaussian_width: Option<Estimate>,
}

/// Build a report; `net_resolution` marks the cloud as a net of a continuous set.
/// The Gaussian width is included for Euclidean clouds when `width_trials > 0`.
pub fn chaining_report(cloud: &PointCloud, net_resolution: Option<f64>, width_trials: usize, seed: u64) -> Result<ChainingReport> {
    let tr = traverse(cloud, |_, _| {});
    let diameter = cloud.diameter();
    let scales = scale_grid(diameter.max(f64::MIN_POSITIVE));
    let covering_numbers = scales.iter().map(|&e| tr.cover_size(e)).collect();
    let adm = admissible_gamma2(cloud);
    let sudakov = sudakov_from(&tr, tr.cover_radii[0]);
    let gaussian_width = if width_trials > 0 && matches!(cloud.metric, Metric::Euclidean) {
        Some(gaussian_width(&IndexClass::finite(cloud.points.clone())?, width_trials, seed)?)
    } else {
        None
    };
    Ok(ChainingReport {
        metric: cloud.metric.clone(),
        points: cloud.len(),
        cloud_semantics: if net_resolution.is_some() { "net_lower" } else { "exact_cloud" }.into(),
        net_resolution,
        diameter,
        scales,
        covering_numbers,
        dudley_upper: dudley_from(&tr),
        two_convex_upper: two_convex_from(&tr),
        admissible_gamma2_upper: adm.value,
        admissible_sizes: adm.sizes,
        sudakov_lower: sudakov,
        sudakov_ratio: if adm.value > 0.0 { sudakov / adm.value } else { 0.0 },
        gaussian_width,
    })
}

/// Covering curve as CSV with columns `epsilon,N,logN`.
pub fn write_covering_csv<W: Write>(w: W, scales: &[f64], counts: &[usize]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["epsilon", "N", "logN"])?;
    for (e, n) in scales.iter().zip(counts) {
        wr.write_record([format!("{e:e}"), n.to_string(), format!("{:e}", (*n as f64).ln())])?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_points(a: &[f64]) -> PointCloud {
        PointCloud::euclidean(vec![vec![0.0; a.len()], a.to_vec()]).unwrap()
    }

    #[test]
    fn singleton_functionals_vanish() {
        let c = PointCloud::euclidean(vec![vec![1.0, 2.0]]).unwrap();
        assert_eq!(covering_numbers(&c, &[0.1, 1.0]).unwrap(), vec![1, 1]);
        assert_eq!(dudley_gamma2_upper(&c), 0.0);
        assert_eq!(two_convex_gamma2_upper(&c), 0.0);
        assert_eq!(admissible_gamma2(&c).value, 0.0);
        assert_eq!(sudakov_lower(&c), 0.0);
    }

    #[test]
    fn two_point_functionals() {
        let a = [3.0, 4.0];
        let c = two_points(&a);
        let ln2 = std::f64::consts::LN_2;
        assert_eq!(covering_numbers(&c, &[0.4 * 5.0, 5.0, 6.0]).unwrap(), vec![2, 1, 1]);
        assert!((dudley_gamma2_upper(&c) - 5.0 * ln2.sqrt()).abs() < 1e-12);
        assert!((two_convex_gamma2_upper(&c) - (25.0 * ln2 / 2.0).sqrt()).abs() < 1e-12);
        assert!((admissible_gamma2(&c).value - 5.0).abs() < 1e-12);
        assert!((sudakov_lower(&c) - 2.5 * ln2.sqrt()).abs() < 1e-12);
        let unit = two_points(&[1.0]);
        assert_eq!(covering_numbers(&unit, &[0.4]).unwrap(), vec![2]);
    }

    #[test]
    fn admissible_sizes_follow_double_exponential() {
        assert_eq!(admissible_sizes(1), vec![1]);
        assert_eq!(admissible_sizes(2), vec![1, 2]);
        assert_eq!(admissible_sizes(300), vec![1, 2, 4, 16, 256, 300]);
    }

    #[test]
    fn subset_packing_examples() {
        let (p, _) = subset_packing_lambda(4, 2, 0.5, 1.0, 0, 0).unwrap();
        assert_eq!(p.sets.len(), 6);
        assert_eq!(subset_packing(4, 2, 4, 0, 0).unwrap().sets.len(), 2);
        let full = subset_packing(5, 5, 1, 0, 0).unwrap();
        assert_eq!(full.log_size, 0.0);
        assert!(subset_packing(3, 4, 1, 0, 0).is_err());
    }

    #[test]
    fn weighted_metric_and_oracle_agree() {
        let w = vec![1.0, 0.5];
        let pts = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0]];
        let c = PointCloud::weighted_euclidean(pts, w.clone()).unwrap();
        let o = PointCloud::from_oracle(3, |i, j| {
            let d = [[0.0, 1.25f64.sqrt(), 2.0], [1.25f64.sqrt(), 0.0, 1.25f64.sqrt()], [2.0, 1.25f64.sqrt(), 0.0]];
            d[i][j]
        })
        .unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((c.dist(i, j) - o.dist(i, j)).abs() < 1e-12);
            }
        }
        c.verify_metric(100, 1).unwrap();
    }

    #[test]
    fn precomputed_validation() {
        assert!(PointCloud::precomputed(2, vec![0.0, 1.0, 2.0, 0.0]).is_err());
        assert!(PointCloud::precomputed(2, vec![0.0, 1.0, 1.0, 0.0]).is_ok());
    }

    #[test]
    fn widths_of_simple_classes() {
        let a = vec![vec![3.0, 4.0]];
        let w = gaussian_width(&IndexClass::finite(a).unwrap(), 20_000, 1).unwrap();
        let target = (2.0 / std::f64::consts::PI).sqrt() * 5.0;
        assert!((w.value / target - 1.0).abs() < 0.03);
        let s = gaussian_width(&IndexClass::sphere(100), 2000, 2).unwrap();
        assert!((s.value / 10.0 - 1.0).abs() < 0.02);
    }

    #[test]
    fn covering_csv_has_header() {
        let mut buf = Vec::new();
        write_covering_csv(&mut buf, &[1.0, 0.5], &[1, 2]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("epsilon,N,logN\n"));
        assert_eq!(s.lines().count(), 3);
    }
}
