//! Random operators `Γ = Σ ⟨X_i, ·⟩ e_i`, their kernels, diameters of kernel
//! sections of symmetric convex bodies, and the fixed-point radii that bound
//! those diameters.

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::ConstantSet;
use crate::error::{param, Error, Result};
use crate::linalg::{self, dot, norm, norm1};
use crate::measures::{self, MeasureSpec, SampleMatrix};
use crate::orlicz;
use crate::rng;

/// Default relative numerical-rank tolerance.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Kernel dimension up to which the fine-net search is run and the result flagged exact.
pub const NET_EXACT_MAX_DIM: usize = 3;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    #[default]
    Raw,
    InvSqrtK,
}

/// `k × n` operator with row `i` equal to `X_i` (times `k^{-1/2}` when scaled).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomOperator {
    rows: Vec<Vec<f64>>,
    pub n: usize,
    pub scaling: Scaling,
}

impl RandomOperator {
    pub fn new(rows: Vec<Vec<f64>>, n: usize, scaling: Scaling) -> Result<Self> {
        for r in &rows {
            if r.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: r.len() });
            }
            if r.iter().any(|x| !x.is_finite()) {
                return param("operator entries must be finite");
            }
        }
        Ok(RandomOperator { rows, n, scaling })
    }

    pub fn from_sample(sample: &SampleMatrix, scaling: Scaling) -> Self {
        RandomOperator { rows: sample.rows().map(|r| r.to_vec()).collect(), n: sample.n(), scaling }
    }

    pub fn k(&self) -> usize {
        self.rows.len()
    }

    /// Operator built from the first `k` rows.
    pub fn prefix(&self, k: usize) -> Self {
        RandomOperator { rows: self.rows[..k.min(self.k())].to_vec(), n: self.n, scaling: self.scaling }
    }

    /// Rows of the scaled matrix.
    pub fn matrix(&self) -> Vec<Vec<f64>> {
        let f = self.factor();
        self.rows.iter().map(|r| r.iter().map(|x| x * f).collect()).collect()
    }

    fn factor(&self) -> f64 {
        match self.scaling {
            Scaling::Raw => 1.0,
            Scaling::InvSqrtK if self.k() > 0 => 1.0 / (self.k() as f64).sqrt(),
            Scaling::InvSqrtK => 1.0,
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let f = self.factor();
        self.rows.iter().map(|r| f * dot(r, x)).collect()
    }
}

/// Orthonormal kernel basis together with the numerical rank.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KernelBasis {
    /// Basis vectors, each of length `n`.
    pub columns: Vec<Vec<f64>>,
    /// Orthonormal basis of the row space (complement of the kernel).
    pub row_space: Vec<Vec<f64>>,
    pub rank: usize,
    /// Largest singular value, i.e. `‖Γ‖`.
    pub spectral_norm: f64,
}

impl KernelBasis {
    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    /// `V y`.
    pub fn embed(&self, y: &[f64]) -> Vec<f64> {
        let n = self.columns.first().map_or(0, |c| c.len());
        let mut x = vec![0.0; n];
        for (c, yi) in self.columns.iter().zip(y) {
            x.iter_mut().zip(c).for_each(|(a, b)| *a += yi * b);
        }
        x
    }

    /// Orthogonal projection onto the kernel.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        let y: Vec<f64> = self.columns.iter().map(|c| dot(c, x)).collect();
        self.embed(&y)
    }
}

/// Right singular vectors whose singular values are at most `tolerance · σ_max`.
/// The matrix is zero-padded to at least `n` rows so the SVD yields all `n` of them.
pub fn kernel_basis(op: &RandomOperator, tolerance: f64) -> KernelBasis {
    let n = op.n;
    let m = op.matrix();
    let rows = m.len().max(n);
    let mut mat = DMatrix::<f64>::zeros(rows, n);
    for (i, r) in m.iter().enumerate() {
        for (j, x) in r.iter().enumerate() {
            mat[(i, j)] = *x;
        }
    }
    let svd = mat.svd(false, true);
    let vt = svd.v_t.expect("v_t requested");
    let smax = svd.singular_values.iter().fold(0.0f64, |a, &b| a.max(b));
    let thr = tolerance * smax;
    let (mut columns, mut row_space) = (Vec::new(), Vec::new());
    for (i, &s) in svd.singular_values.iter().enumerate() {
        let v: Vec<f64> = vt.row(i).iter().copied().collect();
        if smax == 0.0 || s <= thr {
            columns.push(v)
        } else {
            row_space.push(v)
        }
    }
    KernelBasis { rank: row_space.len(), columns, row_space, spectral_norm: smax }
}

/// Symmetric convex body.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "body", rename_all = "snake_case")]
pub enum BodySpec {
    L1Ball,
    L2Ball,
    /// Convex hull of a sign-symmetric vertex list.
    FinitePolytope {
        vertices: Vec<Vec<f64>>,
    },
    Scaled {
        inner: Box<BodySpec>,
        rho: f64,
    },
}

impl BodySpec {
    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            BodySpec::L1Ball | BodySpec::L2Ball => Ok(()),
            BodySpec::FinitePolytope { vertices } => {
                if vertices.is_empty() {
                    return param("polytope needs vertices");
                }
                for v in vertices {
                    if v.len() != n {
                        return Err(Error::DimensionMismatch { expected: n, got: v.len() });
                    }
                }
                let symmetric = vertices.iter().all(|v| vertices.iter().any(|w| v.iter().zip(w).all(|(a, b)| *a == -*b)));
                if !symmetric {
                    return param("polytope vertex list must be sign-symmetric");
                }
                Ok(())
            }
            BodySpec::Scaled { inner, rho } => {
                if !(*rho > 0.0) || !rho.is_finite() {
                    return param(format!("scale must be positive, got {rho}"));
                }
                inner.validate(n)
            }
        }
    }

    /// Minkowski gauge `‖x‖_K`; `None` when an LP fails or `x` leaves the span.
    pub fn gauge(&self, x: &[f64]) -> Option<f64> {
        match self {
            BodySpec::L1Ball => Some(norm1(x)),
            BodySpec::L2Ball => Some(norm(x)),
            BodySpec::Scaled { inner, rho } => inner.gauge(x).map(|g| g / rho),
            BodySpec::FinitePolytope { vertices } => {
                let mut lp = Problem::new(OptimizationDirection::Minimize);
                let lambda: Vec<_> = vertices.iter().map(|_| lp.add_var(1.0, (0.0, f64::INFINITY))).collect();
                for (i, xi) in x.iter().enumerate() {
                    let expr: Vec<_> = lambda.iter().zip(vertices).map(|(&l, v)| (l, v[i])).collect();
                    lp.add_constraint(expr, ComparisonOp::Eq, *xi);
                }
                lp.solve().ok().map(|s| s.objective())
            }
        }
    }
}

/// Lower estimate of `diam(K ∩ ker Γ)` with a witness.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SectionDiameter {
    pub value: f64,
    /// `x ∈ K ∩ ker Γ` with `2‖x‖₂ = value`.
    pub certificate: Vec<f64>,
    /// True when the search is exhaustive (Euclidean ball, empty kernel, or kernel dimension ≤ 3).
    pub exact: bool,
    pub kernel_dim: usize,
}

/// `2 max{‖x‖₂ : x ∈ K ∩ ker Γ}` estimated from below.
///
/// For `B₁ⁿ` the section diameter equals `2 / min_{‖y‖=1} ‖V y‖₁`; the
/// minimum is sought by `restarts` runs of projected subgradient descent,
/// each polished to a vertex of the section, plus a `10⁵`-point net when the
/// kernel dimension is at most 3. Polytopes use alternating linear
/// maximisation over the section, one LP per step.
pub fn section_diameter(op: &RandomOperator, body: &BodySpec, restarts: usize, seed: u64) -> Result<SectionDiameter> {
    body.validate(op.n)?;
    let kb = kernel_basis(op, RANK_TOLERANCE);
    section_diameter_in(&kb, op.n, body, restarts, seed)
}

fn section_diameter_in(kb: &KernelBasis, n: usize, body: &BodySpec, restarts: usize, seed: u64) -> Result<SectionDiameter> {
    let d = kb.dim();
    if d == 0 {
        return Ok(SectionDiameter { value: 0.0, certificate: vec![0.0; n], exact: true, kernel_dim: 0 });
    }
    match body {
        BodySpec::Scaled { inner, rho } => {
            let mut s = section_diameter_in(kb, n, inner, restarts, seed)?;
            s.value *= rho;
            s.certificate.iter_mut().for_each(|x| *x *= rho);
            Ok(s)
        }
        BodySpec::L2Ball => {
            let x = kb.columns[0].clone();
            Ok(SectionDiameter { value: 2.0 * norm(&x), certificate: x, exact: true, kernel_dim: d })
        }
        BodySpec::L1Ball => Ok(l1_section(kb, restarts, seed)),
        BodySpec::FinitePolytope { vertices } => polytope_section(kb, vertices, restarts, seed),
    }
}

fn l1_section(kb: &KernelBasis, restarts: usize, seed: u64) -> SectionDiameter {
    let d = kb.dim();
    let objective = |y: &[f64]| norm1(&kb.embed(y));
    let mut best: (f64, Vec<f64>) = (f64::INFINITY, vec![0.0; d]);
    let consider = |y: Vec<f64>, best: &mut (f64, Vec<f64>)| {
        let v = objective(&y);
        if v < best.0 {
            *best = (v, y);
        }
    };

    let exact = d <= NET_EXACT_MAX_DIM;
    let mut r = rng::stream(seed, 0x5ec7, 0);
    if exact {
        for y in linalg::direction_net(d, 100_000, &mut r) {
            consider(y, &mut best);
        }
    }
    let starts: Vec<Vec<f64>> = (0..restarts.max(1)).map(|_| linalg::random_unit(&mut r, d)).collect();
    let runs: Vec<(f64, Vec<f64>)> = starts.into_par_iter().map(|y0| subgradient_descent(kb, y0, 300)).collect();
    for (_, y) in runs {
        consider(y, &mut best);
    }
    // Polish the incumbent to a vertex of the section and keep the better point.
    if let Some(y) = polish_l1_vertex(kb, &best.1) {
        consider(y, &mut best);
    }
    let mut x = kb.embed(&best.1);
    let s = norm1(&x);
    x.iter_mut().for_each(|v| *v /= s);
    SectionDiameter { value: 2.0 * norm(&x), certificate: x, exact, kernel_dim: d }
}

/// Minimise `‖V y‖₁` on the unit sphere with steps `η₀/√j` (η₀ = 0.5).
fn subgradient_descent(kb: &KernelBasis, mut y: Vec<f64>, iterations: usize) -> (f64, Vec<f64>) {
    let mut best = (norm1(&kb.embed(&y)), y.clone());
    for j in 1..=iterations {
        let x = kb.embed(&y);
        let signs: Vec<f64> = x.iter().map(|v| v.signum()).collect();
        let g: Vec<f64> = kb.columns.iter().map(|c| dot(c, &signs)).collect();
        let radial = dot(&g, &y);
        let tangent: Vec<f64> = g.iter().zip(&y).map(|(gi, yi)| gi - radial * yi).collect();
        let tn = norm(&tangent);
        if tn < 1e-14 {
            break;
        }
        let step = 0.5 / (j as f64).sqrt() / tn;
        y.iter_mut().zip(&tangent).for_each(|(yi, ti)| *yi -= step * ti);
        linalg::normalize(&mut y);
        let v = norm1(&kb.embed(&y));
        if v < best.0 {
            best = (v, y.clone());
        }
    }
    best
}

/// Zero the `d − 1` smallest coordinates of `V y` and solve for the remaining
/// one-dimensional direction; repeated while the objective improves.
fn polish_l1_vertex(kb: &KernelBasis, y0: &[f64]) -> Option<Vec<f64>> {
    let d = kb.dim();
    if d < 2 {
        return None;
    }
    let mut y = y0.to_vec();
    let mut cur = norm1(&kb.embed(&y));
    let mut improved_any = None;
    for _ in 0..8 {
        let x = kb.embed(&y);
        let mut idx: Vec<usize> = (0..x.len()).collect();
        idx.sort_by(|&a, &b| x[a].abs().total_cmp(&x[b].abs()));
        let active = &idx[..d - 1];
        // Rows of V restricted to the active coordinates.
        let mut a = Vec::with_capacity((d - 1) * d);
        for &i in active {
            a.extend(kb.columns.iter().map(|c| c[i]));
        }
        let z = null_vector(&a, d - 1, d)?;
        let z = if dot(&z, &y) < 0.0 { z.iter().map(|v| -v).collect() } else { z };
        let v = norm1(&kb.embed(&z));
        if v < cur * (1.0 - 1e-14) {
            cur = v;
            y = z.clone();
            improved_any = Some(z);
        } else {
            break;
        }
    }
    improved_any
}

/// Unit vector spanning the kernel of an `(d−1) × d` matrix, if one-dimensional.
fn null_vector(a: &[f64], m: usize, d: usize) -> Option<Vec<f64>> {
    let mut mat = DMatrix::<f64>::zeros(d, d);
    for i in 0..m {
        for j in 0..d {
            mat[(i, j)] = a[i * d + j];
        }
    }
    let svd = mat.svd(false, true);
    let vt = svd.v_t?;
    let smax = svd.singular_values.iter().fold(0.0f64, |x, &y| x.max(y));
    let mut small: Vec<usize> = (0..d).filter(|&i| svd.singular_values[i] <= 1e-10 * smax).collect();
    if small.len() != 1 {
        // Rank-deficient active set; take the smallest singular direction anyway.
        small = vec![(0..d).min_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]))?];
    }
    let mut z: Vec<f64> = vt.row(small[0]).iter().copied().collect();
    linalg::normalize(&mut z);
    Some(z)
}

fn polytope_section(kb: &KernelBasis, vertices: &[Vec<f64>], restarts: usize, seed: u64) -> Result<SectionDiameter> {
    let d = kb.dim();
    let n = vertices[0].len();
    // max ⟨c, Σλ_j v_j⟩ subject to Σλ_j ≤ 1, λ ≥ 0, U^T Σλ_j v_j = 0.
    let maximise = |c: &[f64]| -> Option<Vec<f64>> {
        let mut lp = Problem::new(OptimizationDirection::Maximize);
        let lambda: Vec<_> = vertices.iter().map(|v| lp.add_var(dot(c, v), (0.0, f64::INFINITY))).collect();
        lp.add_constraint(lambda.iter().map(|&l| (l, 1.0)).collect::<Vec<_>>(), ComparisonOp::Le, 1.0);
        for u in &kb.row_space {
            let expr: Vec<_> = lambda.iter().zip(vertices).map(|(&l, v)| (l, dot(u, v))).collect();
            lp.add_constraint(expr, ComparisonOp::Eq, 0.0);
        }
        let sol = lp.solve().ok()?;
        let mut x = vec![0.0; n];
        for (&l, v) in lambda.iter().zip(vertices) {
            let w = sol[l];
            x.iter_mut().zip(v).for_each(|(a, b)| *a += w * b);
        }
        Some(x)
    };
    let mut r = rng::stream(seed, 0x9017, 0);
    let mut best = vec![0.0; n];
    for _ in 0..restarts.max(1) {
        let mut c = kb.embed(&linalg::random_unit(&mut r, d));
        let mut prev = 0.0;
        for _ in 0..50 {
            let Some(x) = maximise(&c) else { break };
            let rx = norm(&x);
            if rx > norm(&best) {
                best = x.clone();
            }
            if rx <= prev * (1.0 + 1e-12) || rx == 0.0 {
                break;
            }
            prev = rx;
            c = x.iter().map(|v| v / rx).collect();
        }
    }
    // Project back onto the kernel exactly and restore membership.
    let mut x = kb.project(&best);
    let body = BodySpec::FinitePolytope { vertices: vertices.to_vec() };
    let g = body.gauge(&x).ok_or_else(|| Error::Degenerate("gauge LP failed".into()))?;
    if g > 1.0 {
        x.iter_mut().for_each(|v| *v /= g * (1.0 + 1e-12));
    }
    Ok(SectionDiameter { value: 2.0 * norm(&x), certificate: x, exact: false, kernel_dim: d })
}

/// Check `‖Γx‖ ≤ 10⁻⁸ ‖Γ‖ ‖x‖`, `x ∈ K` (tolerance 10⁻¹⁰ for polytopes) and `2‖x‖ = value`.
pub fn verify_certificate(op: &RandomOperator, body: &BodySpec, s: &SectionDiameter) -> bool {
    let kb = kernel_basis(op, RANK_TOLERANCE);
    let x = &s.certificate;
    let gx = norm(&op.apply(x));
    let in_kernel = gx <= 1e-8 * kb.spectral_norm * norm(x) + f64::MIN_POSITIVE;
    let tol = match body {
        BodySpec::FinitePolytope { .. } => 1e-10,
        BodySpec::Scaled { inner, .. } if matches!(**inner, BodySpec::FinitePolytope { .. }) => 1e-10,
        _ => 1e-12,
    };
    let member = body.gauge(x).is_some_and(|g| g <= 1.0 + tol);
    in_kernel && member && (2.0 * norm(x) - s.value).abs() <= 1e-12 * s.value.max(1.0)
}

/// Which fixed-point inequality defines `q_k*`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QStarVariant {
    /// `ρ ≥ c V_ρ √(log V_ρ) / √k`.
    #[default]
    Intro,
    /// `ρ ≥ c V_ρ √(V_ρ / k)`.
    Section4,
}

/// Geometric evaluation grid for fixed-point radii.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadiusGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Default for RadiusGrid {
    fn default() -> Self {
        RadiusGrid { lo: 1e-6, hi: 1e6, points: 24 }
    }
}

impl RadiusGrid {
    pub fn values(&self) -> Vec<f64> {
        let ratio = (self.hi / self.lo).powf(1.0 / (self.points - 1) as f64);
        (0..self.points).map(|j| self.lo * ratio.powi(j as i32)).collect()
    }
}

/// Fixed-point radius with its evaluation diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FixedPoint {
    /// Smallest admissible radius; `f64::INFINITY` when none exists on the grid.
    pub rho: f64,
    /// Smallest radius beyond which the inequality holds on the rest of the grid.
    /// Equals `rho` when the residual crosses zero once.
    pub stable_rho: f64,
    pub grid: Vec<f64>,
    /// `ρ − rhs(ρ)` on the grid.
    pub residuals: Vec<f64>,
    /// Whether the profile was nonincreasing on the grid.
    pub profile_nonincreasing: bool,
    /// Whether the residual changes sign at most once on the grid.
    pub single_crossing: bool,
    pub diagnostic: Option<String>,
}

fn solve_fixed_point(rhs: impl Fn(f64) -> f64, profile: impl Fn(f64) -> f64, grid: RadiusGrid) -> Result<FixedPoint> {
    if !(grid.lo > 0.0 && grid.hi > grid.lo && grid.points >= 2) {
        return param("radius grid needs 0 < lo < hi and at least two points");
    }
    let rhos = grid.values();
    let prof: Vec<f64> = rhos.iter().map(|&r| profile(r)).collect();
    if prof.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return param("profile must be finite and nonnegative on the grid");
    }
    let residuals: Vec<f64> = rhos.iter().map(|&r| r - rhs(r)).collect();
    let profile_nonincreasing = prof.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
    let sign_changes = residuals.windows(2).filter(|w| (w[0] >= 0.0) != (w[1] >= 0.0)).count();
    let single_crossing = sign_changes <= 1;
    let mut out = FixedPoint {
        rho: f64::INFINITY,
        stable_rho: f64::INFINITY,
        grid: rhos.clone(),
        residuals: residuals.clone(),
        profile_nonincreasing,
        single_crossing,
        diagnostic: None,
    };
    let refine = |j: usize| -> f64 {
        if j == 0 {
            return rhos[0];
        }
        let (mut lo, mut hi) = (rhos[j - 1], rhos[j]);
        for _ in 0..200 {
            let mid = (lo * hi).sqrt();
            if mid - rhs(mid) >= 0.0 {
                hi = mid
            } else {
                lo = mid
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        hi
    };
    if let Some(last_bad) = residuals.iter().rposition(|&g| g < 0.0) {
        if last_bad + 1 < rhos.len() {
            out.stable_rho = refine(last_bad + 1);
        }
    } else {
        out.stable_rho = rhos[0];
    }
    let Some(j) = residuals.iter().position(|&g| g >= 0.0) else {
        out.diagnostic = Some(format!("inequality not satisfied on [{:e}, {:e}]", grid.lo, grid.hi));
        return Ok(out);
    };
    out.rho = refine(j);
    if j == 0 {
        out.diagnostic = Some("satisfied at the lower grid end".into());
    } else if !single_crossing {
        out.diagnostic = Some("residual changes sign more than once on the grid".into());
    }
    Ok(out)
}

/// Right-hand side of the `q_k*` inequality for a profile value `v`.
pub fn q_star_rhs(v: f64, k: usize, c: f64, variant: QStarVariant) -> f64 {
    match variant {
        QStarVariant::Intro => c * v * v.ln().max(0.0).sqrt() / (k as f64).sqrt(),
        QStarVariant::Section4 => c * v * (v / k as f64).sqrt(),
    }
}

/// `q_k*`: least `ρ` with `ρ ≥ c₅ V_ρ √(log V_ρ)/√k` (intro) or
/// `ρ ≥ c₅ V_ρ^{3/2}/√k` (`Section4`). `log V` is clamped at 0.
pub fn q_star(
    profile: impl Fn(f64) -> f64,
    k: usize,
    constants: &ConstantSet,
    variant: QStarVariant,
    grid: RadiusGrid,
) -> Result<FixedPoint> {
    if k == 0 {
        return param("k must be positive");
    }
    let c = constants.c5;
    solve_fixed_point(|r| q_star_rhs(profile(r), k, c, variant), &profile, grid)
}

/// `r_k*`: least `ρ` with `ρ ≥ c₁ α² ℓ_*(ρ)/√k`.
pub fn r_star(width_profile: impl Fn(f64) -> f64, k: usize, alpha: f64, constants: &ConstantSet, grid: RadiusGrid) -> Result<FixedPoint> {
    if k == 0 {
        return param("k must be positive");
    }
    if !(alpha > 0.0) {
        return param(format!("alpha must be positive, got {alpha}"));
    }
    let f = constants.c1 * alpha * alpha / (k as f64).sqrt();
    solve_fixed_point(|r| f * width_profile(r), &width_profile, grid)
}

/// Support function `sup{⟨g, x⟩ : ‖x‖₁ ≤ 1, ‖x‖₂ ≤ ρ}`, computed as
/// `min_{λ≥0} λ + ρ ‖(|g| − λ)₊‖₂` (the dual norm of the intersection).
pub fn l1_section_support(g: &[f64], rho: f64) -> f64 {
    let tail = |lam: f64| lam + rho * g.iter().map(|x| (x.abs() - lam).max(0.0).powi(2)).sum::<f64>().sqrt();
    let (mut lo, mut hi) = (0.0, g.iter().fold(0.0, |m: f64, x| m.max(x.abs())));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let a = hi - phi * (hi - lo);
        let b = lo + phi * (hi - lo);
        if tail(a) <= tail(b) {
            hi = b
        } else {
            lo = a
        }
    }
    tail(0.5 * (lo + hi)).min(tail(0.0))
}

/// Monte Carlo `ℓ_E = E‖g‖_{ψ₂(ν)}` with the ratio to the truncation radius.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EllEstimate {
    pub value: f64,
    pub stderr: f64,
    pub radius: f64,
    pub ratio: f64,
}

/// `ℓ_E` for `E = (ℝⁿ, ψ₂(ν))` with `ν` the truncated measure `spec`; each
/// norm uses `nu_samples` shared draws of `ν`.
pub fn ell_e_estimate(spec: &MeasureSpec, trials: usize, nu_samples: usize, seed: u64) -> Result<EllEstimate> {
    if !spec.is_truncated() {
        return Err(Error::Precondition("ell_E needs a finite truncation radius".into()));
    }
    if trials == 0 || nu_samples == 0 {
        return param("trials and sample budget must be positive");
    }
    let nu = measures::sample(spec, nu_samples, rng::derive_seed(seed, 0xe11e))?;
    let values: Vec<Result<f64>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut r = rng::stream(seed, t as u64, 0x9e11);
            let g: Vec<f64> = (0..spec.n).map(|_| r.sample(StandardNormal)).collect();
            let proj: Vec<f64> = nu.rows().map(|row| dot(row, &g)).collect();
            orlicz::psi_norm_point(&proj, 2.0)
        })
        .collect();
    let values = values.into_iter().collect::<Result<Vec<f64>>>()?;
    let (value, stderr) = crate::stats::mean_stderr(&values);
    let radius = spec.truncation_radius;
    Ok(EllEstimate { value, stderr, radius, ratio: value / radius })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn op(rows: Vec<Vec<f64>>, n: usize) -> RandomOperator {
        RandomOperator::new(rows, n, Scaling::Raw).unwrap()
    }

    #[test]
    fn kernel_of_coordinate_rows() {
        let o = op(vec![vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 1.0, 0.0, 0.0]], 4);
        let kb = kernel_basis(&o, RANK_TOLERANCE);
        assert_eq!(kb.rank, 2);
        assert_eq!(kb.dim(), 2);
        for c in &kb.columns {
            assert!(c[0].abs() < 1e-12 && c[1].abs() < 1e-12);
        }
        let full = kernel_basis(&op(vec![], 3), RANK_TOLERANCE);
        assert_eq!(full.dim(), 3);
    }

    #[test]
    fn kernel_is_scaling_invariant() {
        let s = measures::sample(&MeasureSpec::gaussian(5), 3, 9).unwrap();
        let a = kernel_basis(&RandomOperator::from_sample(&s, Scaling::Raw), RANK_TOLERANCE);
        let b = kernel_basis(&RandomOperator::from_sample(&s, Scaling::InvSqrtK), RANK_TOLERANCE);
        assert_eq!(a.dim(), b.dim());
        for c in &b.columns {
            let p = a.project(c);
            assert!(p.iter().zip(c).all(|(x, y)| (x - y).abs() < 1e-10));
        }
    }

    #[test]
    fn section_examples() {
        let free = section_diameter(&op(vec![], 4), &BodySpec::L1Ball, 16, 1).unwrap();
        assert!((free.value - 2.0).abs() < 1e-12);
        let s = measures::sample(&MeasureSpec::gaussian(3), 3, 2).unwrap();
        let full = section_diameter(&RandomOperator::from_sample(&s, Scaling::Raw), &BodySpec::L1Ball, 8, 1).unwrap();
        assert_eq!(full.value, 0.0);
        let line = op(vec![vec![1.0, 1.0]], 2);
        let d = section_diameter(&line, &BodySpec::L1Ball, 8, 1).unwrap();
        assert!((d.value - 2f64.sqrt()).abs() < 1e-9, "{}", d.value);
        assert!(d.exact);
        assert!(verify_certificate(&line, &BodySpec::L1Ball, &d));
        let ball = section_diameter(&line, &BodySpec::L2Ball, 8, 1).unwrap();
        assert!((ball.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn polytope_cross_polytope_matches_l1() {
        let n = 3;
        let mut verts = Vec::new();
        for i in 0..n {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            verts.push(e.clone());
            e[i] = -1.0;
            verts.push(e);
        }
        let body = BodySpec::FinitePolytope { vertices: verts };
        let o = op(vec![vec![1.0, 2.0, -0.5]], n);
        let p = section_diameter(&o, &body, 16, 3).unwrap();
        let l = section_diameter(&o, &BodySpec::L1Ball, 16, 3).unwrap();
        assert!((p.value - l.value).abs() < 1e-8, "{} vs {}", p.value, l.value);
        assert!(verify_certificate(&o, &body, &p));
        assert!(BodySpec::FinitePolytope { vertices: vec![vec![1.0, 0.0]] }.validate(2).is_err());
    }

    #[test]
    fn q_star_examples() {
        let c = ConstantSet::default();
        let g = RadiusGrid::default();
        let v = 5.0f64;
        let q = q_star(|_| v, 16, &c, QStarVariant::Intro, g).unwrap();
        let expect = v * v.ln().sqrt() / 4.0;
        assert!((q.rho / expect - 1.0).abs() < 1e-9);
        let q4 = q_star(|_| v, 64, &c, QStarVariant::Intro, g).unwrap();
        assert!((q4.rho / (expect / 2.0) - 1.0).abs() < 1e-9);
        let a = 3.0f64;
        let k = 10usize;
        let s4 = q_star(|r| a / r, k, &c, QStarVariant::Section4, g).unwrap();
        let closed = (a.powf(1.5) / (k as f64).sqrt()).powf(0.4);
        assert!((s4.rho - closed).abs() < 1e-6);
        let never = q_star(|r| 1e9 * r, 1, &c, QStarVariant::Section4, g).unwrap();
        assert!(never.rho.is_infinite() && never.diagnostic.is_some());
    }

    #[test]
    fn r_star_examples() {
        let c = ConstantSet::default();
        let g = RadiusGrid::default();
        let r = r_star(|_| 6.0, 9, 2.0, &c, g).unwrap();
        assert!((r.rho - 4.0 * 6.0 / 3.0).abs() < 1e-9);
        let r4 = r_star(|_| 6.0, 36, 2.0, &c, g).unwrap();
        assert!((r4.rho - 4.0).abs() < 1e-9);
        let lin = r_star(|rho| 2.0 * rho.sqrt(), 4, 1.0, &c, g).unwrap();
        assert!((lin.rho - 1.0).abs() < 1e-9);
    }

    #[test]
    fn ell_e_examples() {
        let zero = measures::truncate(&MeasureSpec::gaussian(3), 1e-300).unwrap();
        assert_eq!(ell_e_estimate(&zero, 10, 100, 1).unwrap().value, 0.0);
        let d = 2.0;
        let pm = measures::truncate(&MeasureSpec::rademacher_cube(1).with_scale(d), d).unwrap();
        let e = ell_e_estimate(&pm, 20_000, 50, 3).unwrap();
        let expect = d * (2.0 / std::f64::consts::PI).sqrt() / std::f64::consts::LN_2.sqrt();
        assert!((e.value / expect - 1.0).abs() < 0.03, "{} vs {expect}", e.value);
        assert!(matches!(ell_e_estimate(&MeasureSpec::gaussian(2), 5, 5, 0), Err(Error::Precondition(_))));
    }

    #[test]
    fn l1_section_support_limits() {
        let g = [3.0, -1.0, 0.5];
        assert!((l1_section_support(&g, 10.0) - 3.0).abs() < 1e-9);
        let small = l1_section_support(&g, 1e-3);
        assert!((small - 1e-3 * norm(&g)).abs() < 1e-9);
        // x = (1, 0, 0) is feasible for rho = 1, so the support is at least 3.
        assert!((l1_section_support(&g, 1.0) - 3.0).abs() < 1e-9);
    }

    #[test]
    fn stable_rho_skips_spurious_small_radius_roots() {
        // Residual is positive near 0, negative in the middle, positive at the top.
        let grid = RadiusGrid { lo: 0.01, hi: 10.0, points: 40 };
        let fp = q_star(
            |r: f64| {
                if r < 0.1 {
                    0.5
                } else if r < 1.0 {
                    100.0
                } else {
                    0.5
                }
            },
            4,
            &ConstantSet::default(),
            QStarVariant::Intro,
            grid,
        )
        .unwrap();
        assert!(fp.rho <= 0.011);
        assert!(!fp.single_crossing);
        assert!(fp.stable_rho >= 1.0 && fp.stable_rho < 1.2, "{}", fp.stable_rho);
    }
}
