//! Empirical ψ_α Orlicz norms of scalar samples and ψ_α metrics and
//! diameters of classes of linear functionals.
//!
//! The empirical norm of `y_1, …, y_m` is the smallest `u > 0` with
//! `m⁻¹ Σ exp(|y_i|^α / u^α) ≤ 2`. The functional is continuous and strictly
//! decreasing in `u`, and with `M = max |y_i|` the interval
//! `[M / ln(2m)^{1/α}, 10³ M]` always brackets the answer: at the left end the
//! largest term alone contributes `2m`, at the right end every term is at
//! most `exp(10^{-3α}) < 2`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::empirical::{ClassKind, IndexClass};
use crate::error::{param, Error, Result};
use crate::linalg;
use crate::measures::{self, MeasureSpec};
use crate::rng;
use crate::stats;

/// Relative tolerance of the bisection on `u`.
pub const BISECTION_RTOL: f64 = 1e-7;
/// Default number of bootstrap resamples.
pub const BOOTSTRAP_RESAMPLES: usize = 200;

/// How an estimate relates to the quantity it targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateKind {
    /// Plug-in empirical value.
    Empirical,
    /// Maximum over a search; may miss the true supremum.
    LowerBound,
    /// Supremum attained on an enumerated finite set of candidates.
    Exact,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrliczEstimate {
    pub alpha: f64,
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub sample_size: usize,
    pub kind: EstimateKind,
}

/// Sorted (descending) and normalised powers `(|y_i| / M)^α`.
struct Normalized {
    z: Vec<f64>,
    max_abs: f64,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha >= 1.0 && alpha.is_finite() {
        Ok(())
    } else {
        param(format!("alpha must be a finite real >= 1, got {alpha}"))
    }
}

fn normalize(values: &[f64], alpha: f64) -> Result<Normalized> {
    if values.is_empty() {
        return param("psi norm of an empty sample");
    }
    check_alpha(alpha)?;
    if values.iter().any(|v| !v.is_finite()) {
        return param("psi norm of non-finite data");
    }
    let max_abs = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut z: Vec<f64> =
        if max_abs > 0.0 { values.iter().map(|v| (v.abs() / max_abs).powf(alpha)).collect() } else { vec![0.0; values.len()] };
    z.sort_by(|a, b| b.total_cmp(a));
    Ok(Normalized { z, max_abs })
}

/// `Σ w_i exp(z_i s) ≤ 2 Σ w_i`? Terms come largest first, so infeasible `s`
/// is usually rejected after a few terms.
fn feasible(z: &[f64], s: f64) -> bool {
    let limit = 2.0 * z.len() as f64;
    let mut acc = 0.0;
    for &zi in z {
        acc += (zi * s).exp();
        if acc > limit {
            return false;
        }
    }
    true
}

/// Bisection for the normalised norm; `z` descending with `z[0] = 1`.
fn bisect(z: &[f64], alpha: f64) -> f64 {
    let m = z.len() as f64;
    let mut lo = 1.0 / (2.0 * m).ln().powf(1.0 / alpha);
    let mut hi = 1e3;
    if feasible(z, lo.powf(-alpha)) {
        return lo;
    }
    while hi / lo > 1.0 + BISECTION_RTOL {
        let mid = (lo * hi).sqrt();
        if feasible(z, mid.powf(-alpha)) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Point estimate of the empirical ψ_α norm (no confidence interval).
pub fn psi_norm_point(values: &[f64], alpha: f64) -> Result<f64> {
    let nz = normalize(values, alpha)?;
    if nz.max_abs == 0.0 {
        return Ok(0.0);
    }
    Ok(nz.max_abs * bisect(&nz.z, alpha))
}

/// Solve `Σ w_i exp(z_i s) = 2 Σ w_i` for `s` by safeguarded Newton steps
/// starting from `s0`. Used for bootstrap replicates only.
fn newton_weighted(z: &[f64], w: &[u32], s0: f64) -> f64 {
    let total: f64 = w.iter().map(|&c| c as f64).sum();
    let target = 2.0 * total;
    let eval = |s: f64| {
        let mut g = 0.0;
        let mut dg = 0.0;
        for (&zi, &wi) in z.iter().zip(w) {
            if wi > 0 {
                let e = wi as f64 * (zi * s).exp();
                g += e;
                dg += zi * e;
            }
        }
        (g - target, dg)
    };
    // g is convex and increasing in s; bracket the root first.
    let mut lo = 0.0;
    let mut hi = s0.max(1e-12);
    while eval(hi).0 < 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    let mut s = hi;
    for _ in 0..100 {
        let (g, dg) = eval(s);
        if g.abs() <= 1e-12 * target {
            break;
        }
        if g > 0.0 {
            hi = s
        } else {
            lo = s
        }
        let mut next = if dg > 0.0 { s - g / dg } else { 0.5 * (lo + hi) };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - s).abs() <= 1e-12 * s {
            s = next;
            break;
        }
        s = next;
    }
    s
}

/// Empirical ψ_α norm with a percentile bootstrap interval.
pub fn psi_norm_with_bootstrap(values: &[f64], alpha: f64, resamples: usize, seed: u64) -> Result<OrliczEstimate> {
    let nz = normalize(values, alpha)?;
    let m = values.len();
    if nz.max_abs == 0.0 {
        return Ok(OrliczEstimate { alpha, value: 0.0, ci_low: 0.0, ci_high: 0.0, sample_size: m, kind: EstimateKind::Empirical });
    }
    let u = bisect(&nz.z, alpha);
    let value = nz.max_abs * u;
    let s0 = u.powf(-alpha);
    let mut reps: Vec<f64> = (0..resamples)
        .map(|b| {
            let mut r = rng::stream(seed, 0x0b00_7000, b as u64);
            let mut w = vec![0u32; m];
            for _ in 0..m {
                w[r.random_range(0..m)] += 1;
            }
            let s = newton_weighted(&nz.z, &w, s0);
            nz.max_abs * s.powf(-1.0 / alpha)
        })
        .collect();
    reps.retain(|x| x.is_finite());
    let (lo, hi) = if reps.is_empty() { (value, value) } else { (stats::quantile(&reps, 0.025), stats::quantile(&reps, 0.975)) };
    Ok(OrliczEstimate { alpha, value, ci_low: lo.min(value), ci_high: hi.max(value), sample_size: m, kind: EstimateKind::Empirical })
}

/// Empirical ψ_α norm with a 200-resample bootstrap interval (seed 0).
pub fn psi_norm_empirical(values: &[f64], alpha: f64) -> Result<OrliczEstimate> {
    psi_norm_with_bootstrap(values, alpha, BOOTSTRAP_RESAMPLES, 0)
}

/// Empirical mean of `exp(|y|^α / u^α)`.
pub fn orlicz_functional(values: &[f64], alpha: f64, u: f64) -> f64 {
    values.iter().map(|y| (y.abs().powf(alpha) / u.powf(alpha)).exp()).sum::<f64>() / values.len() as f64
}

fn project(sample: &measures::SampleMatrix, t: &[f64]) -> Vec<f64> {
    sample.rows().map(|r| linalg::dot(r, t)).collect()
}

/// ψ_α distance between the functionals `⟨t1, ·⟩` and `⟨t2, ·⟩` under `spec`.
pub fn psi_metric(t1: &[f64], t2: &[f64], spec: &MeasureSpec, alpha: f64, sample_size: usize, seed: u64) -> Result<OrliczEstimate> {
    for t in [t1, t2] {
        if t.len() != spec.n {
            return Err(Error::DimensionMismatch { expected: spec.n, got: t.len() });
        }
    }
    let s = measures::sample(spec, sample_size, seed)?;
    let diff = linalg::sub(t1, t2);
    psi_norm_with_bootstrap(&project(&s, &diff), alpha, BOOTSTRAP_RESAMPLES, seed)
}

/// Monte Carlo budget for [`psi_diameter`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiameterBudget {
    /// Draws from the measure shared by every functional evaluated.
    pub samples: usize,
    /// Size of the direction net for sphere classes.
    pub directions: usize,
}

impl Default for DiameterBudget {
    fn default() -> Self {
        DiameterBudget { samples: 20_000, directions: 64 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiameterEstimate {
    pub alpha: f64,
    pub value: f64,
    pub kind: EstimateKind,
    /// Direction (sphere classes) or difference vector realising `value`.
    pub witness: Vec<f64>,
}

/// Gradient of `t ↦ ψ_α(⟨t, X⟩)` by implicit differentiation of
/// `m⁻¹ Σ exp(|⟨t,x_i⟩|^α / u^α) = 2`.
fn psi_gradient(sample: &measures::SampleMatrix, t: &[f64], u: f64, alpha: f64) -> Vec<f64> {
    let n = t.len();
    let mut dt = vec![0.0; n];
    let mut du = 0.0;
    for r in sample.rows() {
        let y = linalg::dot(r, t);
        let a = (y.abs() / u).powf(alpha);
        let e = a.exp();
        du -= e * alpha * a / u;
        if y != 0.0 {
            let c = e * alpha * a / y;
            for (g, x) in dt.iter_mut().zip(r) {
                *g += c * x;
            }
        }
    }
    if du == 0.0 {
        return vec![0.0; n];
    }
    dt.iter().map(|g| -g / du).collect()
}

/// Maximise `ψ_α(⟨t, X⟩)` over unit `t` by projected gradient ascent.
fn ascend(sample: &measures::SampleMatrix, start: Vec<f64>, start_value: f64, alpha: f64, iters: usize) -> (Vec<f64>, f64) {
    let mut t = start;
    let mut best = start_value;
    for it in 1..=iters {
        let g = psi_gradient(sample, &t, best, alpha);
        let radial = linalg::dot(&g, &t);
        let tangent: Vec<f64> = g.iter().zip(&t).map(|(gi, ti)| gi - radial * ti).collect();
        let gn = linalg::norm(&tangent);
        if gn < 1e-12 {
            break;
        }
        let step = 0.5 / (it as f64).sqrt();
        let mut cand: Vec<f64> = t.iter().zip(&tangent).map(|(ti, gi)| ti + step * gi / gn).collect();
        linalg::normalize(&mut cand);
        let v = psi_norm_point(&project(sample, &cand), alpha).unwrap_or(0.0);
        if v > best {
            best = v;
            t = cand;
        }
    }
    (t, best)
}

/// ψ_α diameter of a class of linear functionals.
///
/// Sphere classes: `2 sup_t ‖⟨t, X⟩‖_{ψ_α}`. Directions are searched on one
/// sample (net plus projected gradient ascent) and re-evaluated on a fresh
/// sample of the same size; searching and scoring on the same draws would let
/// the ascent align with single large sample points. ℓ₁ ball: the norm is convex in
/// `t`, so the supremum is attained at the vertices `±e_i` (exact for the
/// shared sample). Finite lists and nets: maximum over all pairs.
pub fn psi_diameter(cls: &IndexClass, spec: &MeasureSpec, alpha: f64, budget: DiameterBudget, seed: u64) -> Result<DiameterEstimate> {
    check_alpha(alpha)?;
    cls.check_dimension(spec.n)?;
    let sample = measures::sample(spec, budget.samples, seed)?;
    let sample = sample.process_rows();
    let n = spec.n;
    match &cls.kind {
        ClassKind::Sphere => {
            let mut r = rng::stream(seed, 0xd1a0, 0);
            let net = linalg::direction_net(n, budget.directions.max(1), &mut r);
            let mut scored: Vec<(f64, Vec<f64>)> =
                net.into_iter().map(|t| (psi_norm_point(&project(&sample, &t), alpha).unwrap_or(0.0), t)).collect();
            scored.sort_by(|a, b| b.0.total_cmp(&a.0));
            let fresh = measures::sample(spec, budget.samples, rng::derive_seed(seed, 0xf2e5))?;
            let fresh = fresh.process_rows();
            let mut best = (Vec::new(), 0.0);
            for (v, t) in scored.into_iter().take(4) {
                let (t, _) = ascend(&sample, t, v, alpha, 25);
                let v = psi_norm_point(&project(&fresh, &t), alpha)?;
                if v > best.1 {
                    best = (t, v);
                }
            }
            Ok(DiameterEstimate { alpha, value: 2.0 * best.1, kind: EstimateKind::Empirical, witness: best.0 })
        }
        ClassKind::L1Ball => {
            let mut best = (0usize, 0.0);
            for i in 0..n {
                let col: Vec<f64> = sample.rows().map(|r| r[i]).collect();
                let v = psi_norm_point(&col, alpha)?;
                if v > best.1 {
                    best = (i, v);
                }
            }
            let mut w = vec![0.0; n];
            w[best.0] = 1.0;
            Ok(DiameterEstimate { alpha, value: 2.0 * best.1, kind: EstimateKind::Exact, witness: w })
        }
        ClassKind::FiniteList(vs) | ClassKind::Net { vectors: vs, .. } => {
            let mut best = (vec![0.0; n], 0.0);
            for i in 0..vs.len() {
                for j in i + 1..vs.len() {
                    let d = linalg::sub(&vs[i], &vs[j]);
                    let v = psi_norm_point(&project(&sample, &d), alpha)?;
                    if v > best.1 {
                        best = (d, v);
                    }
                }
            }
            Ok(DiameterEstimate { alpha, value: best.1, kind: EstimateKind::Exact, witness: best.0 })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Exp1, StandardNormal};

    fn draws<D: Distribution<f64>>(d: D, m: usize, seed: u64) -> Vec<f64> {
        let mut r = rng::stream(seed, 0, 0);
        (0..m).map(|_| d.sample(&mut r)).collect()
    }

    #[test]
    fn constant_data_has_closed_form() {
        let est = psi_norm_empirical(&[3.0; 17], 1.0).unwrap();
        assert!((est.value / (3.0 / 2f64.ln()) - 1.0).abs() < 1e-6);
        assert!(est.ci_low <= est.value && est.value <= est.ci_high);
    }

    #[test]
    fn exponential_psi1_is_two() {
        let y = draws(Exp1, 100_000, 1);
        let est = psi_norm_empirical(&y, 1.0).unwrap();
        assert!((est.value / 2.0 - 1.0).abs() < 0.05, "{est:?}");
        assert!(est.ci_low < est.ci_high);
    }

    #[test]
    fn gaussian_psi2_is_sqrt_eight_thirds() {
        let y = draws(StandardNormal, 100_000, 2);
        let est = psi_norm_empirical(&y, 2.0).unwrap();
        assert!((est.value / (8.0f64 / 3.0).sqrt() - 1.0).abs() < 0.05, "{est:?}");
    }

    #[test]
    fn zero_and_invalid_inputs() {
        assert_eq!(psi_norm_empirical(&[0.0, 0.0], 2.0).unwrap().value, 0.0);
        assert!(psi_norm_empirical(&[], 1.0).is_err());
        assert!(psi_norm_empirical(&[1.0], 0.5).is_err());
        assert!(psi_norm_empirical(&[f64::NAN], 1.0).is_err());
    }

    #[test]
    fn bracketing_holds_on_returned_value() {
        let y = draws(StandardNormal, 2_000, 3);
        for alpha in [1.0, 1.5, 2.0] {
            let u = psi_norm_point(&y, alpha).unwrap();
            assert!(orlicz_functional(&y, alpha, u) <= 2.0);
            assert!(orlicz_functional(&y, alpha, u / (1.0 + 1e-5)) > 2.0);
        }
    }

    #[test]
    fn single_value_sits_on_left_end_of_bracket() {
        let u = psi_norm_point(&[2.0], 1.0).unwrap();
        assert!((u - 2.0 / 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn metric_examples() {
        let g = MeasureSpec::gaussian(3);
        let e1 = [1.0, 0.0, 0.0];
        assert_eq!(psi_metric(&e1, &e1, &g, 2.0, 1_000, 0).unwrap().value, 0.0);
        let target = (8.0f64 / 3.0).sqrt();
        let one = psi_metric(&e1, &[0.0; 3], &g, 2.0, 100_000, 5).unwrap().value;
        assert!((one / target - 1.0).abs() < 0.05, "{one}");
        let two = psi_metric(&[2.0, 0.0, 0.0], &[0.0; 3], &g, 2.0, 100_000, 5).unwrap().value;
        assert!((two / (2.0 * target) - 1.0).abs() < 0.05, "{two}");
        assert!((two - 2.0 * one).abs() < 1e-9 * two);
        assert!(matches!(psi_metric(&e1, &[0.0; 2], &g, 2.0, 10, 0), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn diameter_examples() {
        let g = MeasureSpec::gaussian(3);
        let target = 2.0 * (8.0f64 / 3.0).sqrt();
        let single = IndexClass::finite(vec![vec![1.0, 2.0, 3.0]]).unwrap();
        assert_eq!(psi_diameter(&single, &g, 2.0, DiameterBudget::default(), 0).unwrap().value, 0.0);

        let pair = IndexClass::finite(vec![vec![1.0, 0.0, 0.0], vec![-1.0, 0.0, 0.0]]).unwrap();
        let budget = DiameterBudget { samples: 100_000, directions: 16 };
        let d = psi_diameter(&pair, &g, 2.0, budget, 1).unwrap();
        assert!((d.value / target - 1.0).abs() < 0.05, "{d:?}");

        let sphere = IndexClass::sphere(3);
        let d = psi_diameter(&sphere, &g, 2.0, DiameterBudget { samples: 50_000, directions: 32 }, 2).unwrap();
        assert_eq!(d.kind, EstimateKind::Empirical);
        assert!((d.value / target - 1.0).abs() < 0.07, "{d:?}");
    }

    #[test]
    fn weighted_exponential_columns_scale_like_two_over_sqrt_log() {
        let spec = MeasureSpec::weighted_exponential(6);
        let s = measures::sample(&spec, 100_000, 11).unwrap();
        for i in 0..6 {
            let col: Vec<f64> = s.rows().map(|r| r[i]).collect();
            let v = psi_norm_point(&col, 1.0).unwrap();
            let target = 2.0 / ((i as f64 + 2.0).ln()).sqrt();
            assert!((v / target - 1.0).abs() < 0.15, "coordinate {i}: {v} vs {target}");
        }
    }
}
