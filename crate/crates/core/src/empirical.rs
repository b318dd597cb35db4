//! Suprema of empirical processes indexed by classes of linear functionals:
//! p-th power deviations, uniform tail counts and top-ℓ subset sums.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{param, Error, Result};
use crate::linalg::{self, dot, norm};
use crate::measures::{self, Family, MeasureSpec, SampleMatrix};
use crate::rng;

/// Shape of an indexing set `T ⊂ ℝⁿ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassKind {
    /// Unit sphere `S^{n-1}`.
    Sphere,
    /// Arbitrary finite list (need not be symmetric).
    FiniteList(Vec<Vec<f64>>),
    /// Unit ball of ℓ₁ⁿ.
    L1Ball,
    /// Finite net of a continuous set at the stated resolution.
    Net { vectors: Vec<Vec<f64>>, resolution: f64 },
}

/// The indexing set of the class `{⟨t, ·⟩ : t ∈ T}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexClass {
    pub kind: ClassKind,
    pub n: usize,
}

impl IndexClass {
    pub fn sphere(n: usize) -> Self {
        IndexClass { kind: ClassKind::Sphere, n }
    }

    pub fn l1_ball(n: usize) -> Self {
        IndexClass { kind: ClassKind::L1Ball, n }
    }

    pub fn finite(vectors: Vec<Vec<f64>>) -> Result<Self> {
        let n = Self::check_vectors(&vectors)?;
        Ok(IndexClass { kind: ClassKind::FiniteList(vectors), n })
    }

    pub fn net(vectors: Vec<Vec<f64>>, resolution: f64) -> Result<Self> {
        let n = Self::check_vectors(&vectors)?;
        Ok(IndexClass { kind: ClassKind::Net { vectors, resolution }, n })
    }

    fn check_vectors(vectors: &[Vec<f64>]) -> Result<usize> {
        let n = match vectors.first() {
            Some(v) => v.len(),
            None => return param("finite class must be nonempty"),
        };
        for v in vectors {
            if v.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: v.len() });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return param("class vectors must be finite");
            }
        }
        Ok(n)
    }

    pub fn is_symmetric(&self) -> bool {
        match &self.kind {
            ClassKind::Sphere | ClassKind::L1Ball => true,
            ClassKind::FiniteList(vs) | ClassKind::Net { vectors: vs, .. } => {
                vs.iter().all(|v| vs.iter().any(|w| v.iter().zip(w).all(|(a, b)| *a == -*b)))
            }
        }
    }

    pub fn check_dimension(&self, n: usize) -> Result<()> {
        if self.n == n {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: n, got: self.n })
        }
    }

    /// Largest Euclidean norm of a class member.
    pub fn radius(&self) -> f64 {
        match &self.kind {
            ClassKind::Sphere | ClassKind::L1Ball => 1.0,
            ClassKind::FiniteList(vs) | ClassKind::Net { vectors: vs, .. } => vs.iter().map(|v| norm(v)).fold(0.0, f64::max),
        }
    }
}

/// Algorithm used (or requested) for a supremum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Extreme eigenvalues of the centred second-moment matrix (p = 2, sphere).
    EigenExact,
    /// Maximum over a finite direction net; a lower bound.
    NetLower,
    /// Multi-start projected gradient ascent combined with the net; a lower bound.
    GradientHeuristic,
    /// Exhaustive enumeration; exact within documented size limits.
    EnumerationExact,
    /// Greedy construction plus swap/flip local search; a lower bound.
    LocalSearch,
}

impl Method {
    pub fn is_exact(self) -> bool {
        matches!(self, Method::EigenExact | Method::EnumerationExact)
    }
}

/// Moment `E|⟨X, t⟩|^p` with its Monte Carlo standard error (zero when exact).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Moment {
    pub value: f64,
    pub stderr: f64,
    pub exact: bool,
}

/// `E|g|^p` for a standard Gaussian `g`.
pub fn gaussian_abs_moment(p: f64) -> f64 {
    2f64.powf(p / 2.0) * gamma((p + 1.0) / 2.0) / std::f64::consts::PI.sqrt()
}

/// Default reference-sample size for Monte Carlo population moments.
pub const POPULATION_SAMPLES: usize = 200_000;

/// How population moments `t ↦ E|⟨X,t⟩|^p` are evaluated.
#[derive(Clone, Debug)]
pub enum MomentModel {
    /// `coef · ‖t‖^p` (untruncated Gaussian).
    Radial { coef: f64, p: f64 },
    /// `tᵀ M t` (p = 2 with a closed-form second-moment matrix).
    Quadratic { m: Vec<f64>, n: usize },
    /// Plug-in average over a reference sample.
    MonteCarlo { reference: SampleMatrix, p: f64 },
}

impl MomentModel {
    pub fn for_spec(spec: &MeasureSpec, p: f64, mc_samples: usize, seed: u64) -> Result<Self> {
        if !(p >= 1.0) || !p.is_finite() {
            return param(format!("moment order must be >= 1, got {p}"));
        }
        let centred_needed = spec.recenter && !spec.is_symmetric();
        if !centred_needed && !spec.is_truncated() {
            if matches!(spec.family, Family::Gaussian) {
                return Ok(MomentModel::Radial { coef: spec.scale.powf(p) * gaussian_abs_moment(p), p });
            }
            if p == 2.0 {
                if let Some(m) = spec.second_moment_matrix() {
                    return Ok(MomentModel::Quadratic { m, n: spec.n });
                }
            }
        }
        let reference = measures::sample_trial(spec, mc_samples, rng::derive_seed(seed, 0x5eed_9090), u64::MAX)?;
        let reference = if centred_needed { reference.centered() } else { reference };
        Ok(MomentModel::MonteCarlo { reference, p })
    }

    pub fn is_exact(&self) -> bool {
        !matches!(self, MomentModel::MonteCarlo { .. })
    }

    pub fn value(&self, t: &[f64]) -> f64 {
        match self {
            MomentModel::Radial { coef, p } => coef * norm(t).powf(*p),
            MomentModel::Quadratic { m, n } => quad_form(m, *n, t),
            MomentModel::MonteCarlo { reference, p } => empirical_moment(reference, t, *p),
        }
    }

    fn gradient(&self, t: &[f64], p: f64) -> Vec<f64> {
        match self {
            MomentModel::Radial { coef, .. } => {
                let r = norm(t);
                t.iter().map(|x| coef * p * r.powf(p - 2.0) * x).collect()
            }
            MomentModel::Quadratic { m, n } => (0..*n).map(|i| 2.0 * dot(&m[i * n..(i + 1) * n], t)).collect(),
            MomentModel::MonteCarlo { reference, p } => empirical_moment_gradient(reference, t, *p),
        }
    }
}

fn quad_form(m: &[f64], n: usize, t: &[f64]) -> f64 {
    (0..n).map(|i| t[i] * dot(&m[i * n..(i + 1) * n], t)).sum()
}

/// `k⁻¹ Σ |⟨X_i, t⟩|^p`.
pub fn empirical_moment(sample: &SampleMatrix, t: &[f64], p: f64) -> f64 {
    let s: f64 =
        if p == 2.0 { sample.rows().map(|r| dot(r, t).powi(2)).sum() } else { sample.rows().map(|r| dot(r, t).abs().powf(p)).sum() };
    s / sample.k() as f64
}

fn empirical_moment_gradient(sample: &SampleMatrix, t: &[f64], p: f64) -> Vec<f64> {
    let mut g = vec![0.0; t.len()];
    for r in sample.rows() {
        let y = dot(r, t);
        if y == 0.0 {
            continue;
        }
        let c = p * y.abs().powf(p - 1.0) * y.signum();
        for (gi, x) in g.iter_mut().zip(r) {
            *gi += c * x;
        }
    }
    let inv = 1.0 / sample.k() as f64;
    g.iter_mut().for_each(|x| *x *= inv);
    g
}

/// `E|⟨X, t⟩|^p`: closed form for untruncated Gaussians and for `p = 2` with
/// a closed-form second-moment matrix, Monte Carlo otherwise.
pub fn population_moment(spec: &MeasureSpec, t: &[f64], p: f64) -> Result<Moment> {
    population_moment_with(spec, t, p, POPULATION_SAMPLES, 0)
}

pub fn population_moment_with(spec: &MeasureSpec, t: &[f64], p: f64, samples: usize, seed: u64) -> Result<Moment> {
    if t.len() != spec.n {
        return Err(Error::DimensionMismatch { expected: spec.n, got: t.len() });
    }
    let model = MomentModel::for_spec(spec, p, samples, seed)?;
    match &model {
        MomentModel::MonteCarlo { reference, p } => {
            let vals: Vec<f64> = reference.rows().map(|r| dot(r, t).abs().powf(*p)).collect();
            let (value, stderr) = crate::stats::mean_stderr(&vals);
            Ok(Moment { value, stderr, exact: false })
        }
        _ => Ok(Moment { value: model.value(t), stderr: 0.0, exact: true }),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeviationResult {
    pub value: f64,
    pub argmax_direction: Vec<f64>,
    pub method: Method,
    pub p: f64,
    /// Whether the population moments were closed-form.
    pub exact_moments: bool,
}

/// Tuning for [`deviation_sup_with`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationOptions {
    pub restarts: usize,
    pub iterations: usize,
    /// Net size; `None` means `min(10⁵, 20ⁿ)`.
    pub net_size: Option<usize>,
    pub population_samples: usize,
    pub seed: u64,
}

impl Default for DeviationOptions {
    fn default() -> Self {
        DeviationOptions { restarts: 32, iterations: 500, net_size: None, population_samples: 50_000, seed: 0 }
    }
}

impl DeviationOptions {
    fn net_size(&self, n: usize) -> usize {
        self.net_size.unwrap_or_else(|| if n >= 4 { 100_000 } else { 20usize.pow(n as u32).min(100_000) })
    }
}

struct Deviation<'a> {
    sample: &'a SampleMatrix,
    model: &'a MomentModel,
    p: f64,
}

impl Deviation<'_> {
    fn signed(&self, t: &[f64]) -> f64 {
        empirical_moment(self.sample, t, self.p) - self.model.value(t)
    }

    fn gradient(&self, t: &[f64]) -> Vec<f64> {
        let ge = empirical_moment_gradient(self.sample, t, self.p);
        let gp = self.model.gradient(t, self.p);
        ge.iter().zip(&gp).map(|(a, b)| a - b).collect()
    }

    /// Projected gradient ascent of `sign · D(t)` on the sphere. Steps follow
    /// `η/√j` with `η` adapted by success (×1.5) or backtracking (×0.5).
    fn ascend(&self, mut t: Vec<f64>, sign: f64, iterations: usize) -> (Vec<f64>, f64) {
        let mut f = sign * self.signed(&t);
        let curvature = self.p * (empirical_moment_norms(self.sample, self.p) + self.model.value(&t).abs()) + 1e-300;
        let mut eta = 1.0 / curvature;
        let mut stalled = 0;
        for j in 1..=iterations {
            let g: Vec<f64> = self.gradient(&t).into_iter().map(|x| sign * x).collect();
            let radial = dot(&g, &t);
            let tangent: Vec<f64> = g.iter().zip(&t).map(|(gi, ti)| gi - radial * ti).collect();
            if norm(&tangent) <= 1e-15 * (1.0 + radial.abs()) {
                break;
            }
            let mut accepted = false;
            for _ in 0..40 {
                let step = eta / (j as f64).sqrt();
                let mut cand: Vec<f64> = t.iter().zip(&tangent).map(|(ti, gi)| ti + step * gi).collect();
                linalg::normalize(&mut cand);
                let fc = sign * self.signed(&cand);
                if fc > f {
                    stalled = if fc - f <= 1e-14 * f.abs().max(1e-300) { stalled + 1 } else { 0 };
                    f = fc;
                    t = cand;
                    eta *= 1.5;
                    accepted = true;
                    break;
                }
                eta *= 0.5;
            }
            if !accepted || stalled >= 5 {
                break;
            }
        }
        (t, f)
    }
}

fn empirical_moment_norms(sample: &SampleMatrix, p: f64) -> f64 {
    sample.rows().map(|r| norm(r).powf(p)).sum::<f64>() / sample.k() as f64
}

/// Deviation supremum with default options.
pub fn deviation_sup(sample: &SampleMatrix, cls: &IndexClass, p: f64, method: Method) -> Result<DeviationResult> {
    deviation_sup_with(sample, cls, p, method, &DeviationOptions::default())
}

/// `sup_{t∈T} |k⁻¹ Σ |⟨X_i,t⟩|^p − E|⟨X,t⟩|^p|`.
pub fn deviation_sup_with(
    sample: &SampleMatrix,
    cls: &IndexClass,
    p: f64,
    method: Method,
    opts: &DeviationOptions,
) -> Result<DeviationResult> {
    cls.check_dimension(sample.n())?;
    if !(p >= 1.0) || !p.is_finite() {
        return param(format!("p must be >= 1, got {p}"));
    }
    let rows = sample.process_rows();
    let spec = &sample.spec;
    let n = sample.n();

    if method == Method::EigenExact {
        if p != 2.0 {
            return Err(Error::Method(format!("eigen_exact requires p = 2, got p = {p}")));
        }
        if cls.kind != ClassKind::Sphere {
            return Err(Error::Method("eigen_exact requires the sphere class".into()));
        }
        let model = MomentModel::for_spec(spec, 2.0, 0, 0).ok();
        let m = match model {
            Some(MomentModel::Quadratic { m, .. }) => m,
            Some(MomentModel::Radial { coef, .. }) => {
                let mut m = vec![0.0; n * n];
                (0..n).for_each(|i| m[i * n + i] = coef);
                m
            }
            _ => return Err(Error::Method("eigen_exact requires closed-form second moments".into())),
        };
        let s = rows.second_moment();
        let diff: Vec<f64> = s.iter().zip(&m).map(|(a, b)| a - b).collect();
        let (vals, vecs) = linalg::sym_eigen(&diff, n);
        let (lo, hi) = (vals[0], vals[n - 1]);
        let (value, dir) = if hi >= -lo { (hi, vecs[n - 1].clone()) } else { (-lo, vecs[0].clone()) };
        return Ok(DeviationResult { value: value.max(0.0), argmax_direction: dir, method, p, exact_moments: true });
    }

    let model = MomentModel::for_spec(spec, p, opts.population_samples, opts.seed)?;
    let dev = Deviation { sample: &rows, model: &model, p };
    let exact_moments = model.is_exact();

    let best_of = |dirs: &mut dyn Iterator<Item = Vec<f64>>| -> (f64, Vec<f64>) {
        let mut best = (f64::NEG_INFINITY, vec![0.0; n]);
        for t in dirs {
            let v = dev.signed(&t).abs();
            if v > best.0 {
                best = (v, t);
            }
        }
        best
    };

    match (&cls.kind, method) {
        (ClassKind::FiniteList(vs), Method::EnumerationExact | Method::NetLower | Method::GradientHeuristic)
        | (ClassKind::Net { vectors: vs, .. }, Method::EnumerationExact | Method::NetLower) => {
            let (value, dir) = best_of(&mut vs.iter().cloned());
            let method = if matches!(cls.kind, ClassKind::FiniteList(_)) { Method::EnumerationExact } else { Method::NetLower };
            Ok(DeviationResult { value, argmax_direction: dir, method, p, exact_moments })
        }
        (ClassKind::Sphere, Method::NetLower) => {
            let mut r = rng::stream(opts.seed, 0x4e37, 0);
            let net = linalg::direction_net(n, opts.net_size(n), &mut r);
            let (value, dir) = best_of(&mut net.into_iter());
            Ok(DeviationResult { value, argmax_direction: dir, method, p, exact_moments })
        }
        (ClassKind::L1Ball, Method::NetLower) => {
            let mut r = rng::stream(opts.seed, 0x4e38, 0);
            let count = opts.net_size(n);
            let mut dirs: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    let mut e = vec![0.0; n];
                    e[i] = 1.0;
                    e
                })
                .collect();
            let l1 = MeasureSpec::l1_ball(n);
            for j in 0..count {
                let mut v = measures::sample_trial(&l1, 1, r_seed(&mut r), j as u64)?.row(0).to_vec();
                let s = linalg::norm1(&v);
                if s > 0.0 {
                    v.iter_mut().for_each(|x| *x /= s);
                    dirs.push(v);
                }
            }
            let (value, dir) = best_of(&mut dirs.into_iter());
            Ok(DeviationResult { value, argmax_direction: dir, method, p, exact_moments })
        }
        (ClassKind::Sphere, Method::GradientHeuristic) => {
            let mut r = rng::stream(opts.seed, 0x4e39, 0);
            let net = linalg::direction_net(n, opts.net_size(n), &mut r);
            let (net_value, net_dir) = best_of(&mut net.into_iter());
            let mut best = (net_value, net_dir.clone());
            let mut starts = vec![net_dir];
            starts.extend((1..opts.restarts).map(|_| linalg::random_unit(&mut r, n)));
            for start in starts {
                for sign in [1.0, -1.0] {
                    let (t, f) = dev.ascend(start.clone(), sign, opts.iterations);
                    if f > best.0 {
                        best = (f, t);
                    }
                }
            }
            Ok(DeviationResult { value: best.0, argmax_direction: best.1, method, p, exact_moments })
        }
        (kind, m) => Err(Error::Method(format!("{m:?} is not available for class {}", kind_name(kind)))),
    }
}

fn r_seed(r: &mut rand_chacha::ChaCha8Rng) -> u64 {
    use rand::Rng;
    r.random()
}

fn kind_name(kind: &ClassKind) -> &'static str {
    match kind {
        ClassKind::Sphere => "sphere",
        ClassKind::FiniteList(_) => "finite_list",
        ClassKind::L1Ball => "l1_ball",
        ClassKind::Net { .. } => "net",
    }
}

/// Largest `k` for which [`tail_count_sup`] enumerates exactly.
pub const TAIL_EXACT_MAX_K: usize = 12;

/// Relative slack in the `≥ u` comparison of tail counts.
const LEVEL_SLACK: f64 = 1e-9;

/// Per-level suprema `sup_t |{i : |⟨X_i, t⟩| ≥ u}|`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailCounts {
    pub levels: Vec<f64>,
    pub counts: Vec<usize>,
    pub directions: Vec<Vec<f64>>,
    pub method: Method,
}

pub fn count_at(sample: &SampleMatrix, t: &[f64], level: f64) -> usize {
    let thr = level * (1.0 - LEVEL_SLACK);
    sample.rows().filter(|r| dot(r, t).abs() >= thr).count()
}

/// Visit every `s`-subset of `0..k` in lexicographic order.
pub fn for_each_combination(k: usize, s: usize, mut f: impl FnMut(&[usize])) {
    if s > k {
        return;
    }
    let mut idx: Vec<usize> = (0..s).collect();
    loop {
        f(&idx);
        let mut i = s;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + k - s {
                break;
            }
            if i == 0 {
                return;
            }
        }
        if idx[i] == i + k - s {
            return;
        }
        idx[i] += 1;
        for j in i + 1..s {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Directions `pinv(A_S) 1` for every signed subset `S` of at most `n` rows.
/// When `k ≤ 12` the supremum over the sphere of every tail count is attained
/// at one of them: the minimum-norm point of `{t : ε_i⟨X_i,t⟩ ≥ u, i ∈ C}`
/// is the minimum-norm solution of its active (independent) equalities.
fn signed_subset_directions(sample: &SampleMatrix) -> Vec<Vec<f64>> {
    let (k, n) = (sample.k(), sample.n());
    let mut out = Vec::new();
    for s in 1..=n.min(k) {
        for_each_combination(k, s, |idx| {
            for mask in 0..(1u64 << (s - 1)) {
                let mut a = Vec::with_capacity(s * n);
                for (pos, &i) in idx.iter().enumerate() {
                    let neg = pos > 0 && (mask >> (pos - 1)) & 1 == 1;
                    a.extend(sample.row(i).iter().map(|x| if neg { -x } else { *x }));
                }
                if let Some(mut t) = linalg::min_norm_solve(&a, s, n, &vec![1.0; s]) {
                    if linalg::normalize(&mut t) > 0.0 && t.iter().all(|x| x.is_finite()) {
                        out.push(t);
                    }
                }
            }
        });
    }
    out
}

/// Uniform tail counts over a class.
///
/// Sphere with `k ≤ 12`: exact by signed-subset enumeration. Larger samples:
/// a `budget`-direction net (plus the row directions), followed by greedy
/// augmentation of each level's best signed row set through minimum-norm
/// feasibility solves; reported as a lower bound. Every direction found is
/// re-evaluated at every level, so counts are nonincreasing in the level.
pub fn tail_count_sup(sample: &SampleMatrix, cls: &IndexClass, levels: &[f64], budget: usize) -> Result<TailCounts> {
    cls.check_dimension(sample.n())?;
    if levels.iter().any(|u| !(*u > 0.0)) || levels.windows(2).any(|w| w[1] < w[0]) {
        return param("levels must be positive and increasing");
    }
    let rows = sample.process_rows();
    let n = sample.n();
    let (mut dirs, method): (Vec<Vec<f64>>, Method) = match &cls.kind {
        ClassKind::FiniteList(vs) => (vs.clone(), Method::EnumerationExact),
        ClassKind::Net { vectors, .. } => (vectors.clone(), Method::NetLower),
        ClassKind::L1Ball => {
            return Err(Error::Method("tail counts over the l1 ball are not supported; use a net".into()));
        }
        ClassKind::Sphere if rows.k() <= TAIL_EXACT_MAX_K => (signed_subset_directions(&rows), Method::EnumerationExact),
        ClassKind::Sphere => {
            let mut r = rng::stream(rows.seed, 0x7a11, rows.trial);
            let mut d = linalg::direction_net(n, budget.max(1), &mut r);
            for row in rows.rows() {
                let mut v = row.to_vec();
                if linalg::normalize(&mut v) > 0.0 {
                    d.push(v);
                }
            }
            (d, Method::NetLower)
        }
    };

    if method == Method::NetLower && cls.kind == ClassKind::Sphere {
        let mut extra = Vec::new();
        for &u in levels {
            let mut scored: Vec<(usize, usize)> = dirs.iter().enumerate().map(|(j, t)| (count_at(&rows, t, u), j)).collect();
            scored.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
            for &(c, j) in scored.iter().take(3) {
                if c == 0 {
                    break;
                }
                extra.push(augment(&rows, &dirs[j], u));
            }
        }
        dirs.extend(extra);
    }

    let mut counts = Vec::with_capacity(levels.len());
    let mut best_dirs = Vec::with_capacity(levels.len());
    for &u in levels {
        let mut best = (0usize, vec![0.0; n]);
        for t in &dirs {
            let c = count_at(&rows, t, u);
            if c > best.0 {
                best = (c, t.clone());
            }
        }
        counts.push(best.0);
        best_dirs.push(best.1);
    }
    let method = if cls.kind == ClassKind::Sphere && rows.k() > TAIL_EXACT_MAX_K { Method::GradientHeuristic } else { method };
    Ok(TailCounts { levels: levels.to_vec(), counts, directions: best_dirs, method })
}

/// Grow the signed row set counted at `t` by adding rows in order of
/// `|⟨X_i, t⟩|`, keeping each addition whose constraint system stays
/// feasible on the unit ball.
fn augment(sample: &SampleMatrix, t: &[f64], u: f64) -> Vec<f64> {
    let thr = u * (1.0 - LEVEL_SLACK);
    let mut signed: Vec<Vec<f64>> = Vec::new();
    let mut rest: Vec<(f64, usize)> = Vec::new();
    for (i, r) in sample.rows().enumerate() {
        let y = dot(r, t);
        if y.abs() >= thr {
            signed.push(r.iter().map(|x| x * y.signum()).collect());
        } else if y != 0.0 {
            rest.push((y.abs(), i));
        }
    }
    rest.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut dir = t.to_vec();
    for &(_, i) in rest.iter().take(24) {
        let r = sample.row(i);
        let y = dot(r, &dir);
        if y.abs() >= thr {
            signed.push(r.iter().map(|x| x * y.signum()).collect());
            continue;
        }
        let sgn = if y >= 0.0 { 1.0 } else { -1.0 };
        let cand: Vec<f64> = r.iter().map(|x| x * sgn).collect();
        let mut all: Vec<&[f64]> = signed.iter().map(|v| v.as_slice()).collect();
        all.push(&cand);
        let b = vec![u; all.len()];
        if let Some(sol) = linalg::min_norm_point(&all, &b, sample.n(), 200, 1e-12 * u) {
            if norm(&sol) <= 1.0 {
                let mut d = sol;
                linalg::normalize(&mut d);
                dir = d;
                signed.push(cand);
            }
        }
    }
    dir
}

/// Result of a top-ℓ subset-sum supremum.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TopEllResult {
    pub value: f64,
    pub subset: Vec<usize>,
    pub signs: Vec<f64>,
    pub direction: Vec<f64>,
    pub method: Method,
}

/// Largest `k` accepted by the exact enumeration.
pub const TOP_ELL_EXACT_MAX_K: usize = 20;

/// `sup_{‖t‖=1, |I|=ℓ} Σ_{i∈I} |⟨X_i, t⟩| = max_{I, ε} ‖Σ_{i∈I} ε_i X_i‖₂`.
pub fn top_ell_sum_sup(sample: &SampleMatrix, ell: usize, method: Method) -> Result<TopEllResult> {
    let rows = sample.process_rows();
    let k = rows.k();
    if ell < 1 || ell > k {
        return param(format!("ell must satisfy 1 <= ell <= k = {k}, got {ell}"));
    }
    match method {
        Method::EnumerationExact => {
            if k > TOP_ELL_EXACT_MAX_K {
                return Err(Error::Method(format!("enumeration limited to k <= {TOP_ELL_EXACT_MAX_K}, got {k}")));
            }
            Ok(top_ell_enumerate(&rows, ell))
        }
        Method::LocalSearch | Method::GradientHeuristic => Ok(top_ell_local(&rows, ell, None)),
        other => Err(Error::Method(format!("{other:?} is not available for top-ell sums"))),
    }
}

/// Local-search values for every `ℓ` in `ells` (ascending), warm-starting
/// each from the previous optimum so the curve is nondecreasing.
pub fn top_ell_curve(sample: &SampleMatrix, ells: &[usize]) -> Result<Vec<TopEllResult>> {
    let rows = sample.process_rows();
    let mut out: Vec<TopEllResult> = Vec::with_capacity(ells.len());
    for &ell in ells {
        if ell < 1 || ell > rows.k() {
            return param(format!("ell out of range: {ell}"));
        }
        let warm = out.last().map(|prev: &TopEllResult| prev.direction.clone());
        out.push(top_ell_local(&rows, ell, warm));
    }
    Ok(out)
}

fn top_ell_enumerate(sample: &SampleMatrix, ell: usize) -> TopEllResult {
    let n = sample.n();
    let mut best = (f64::NEG_INFINITY, Vec::new(), Vec::new());
    for_each_combination(sample.k(), ell, |idx| {
        let mut signs = vec![1.0; ell];
        let mut v = vec![0.0; n];
        for &i in idx {
            for (a, x) in v.iter_mut().zip(sample.row(i)) {
                *a += x;
            }
        }
        // Gray code over the signs of idx[1..].
        let total = 1u64 << (ell - 1);
        for g in 0..total {
            if g > 0 {
                let bit = g.trailing_zeros() as usize + 1;
                signs[bit] = -signs[bit];
                let c = 2.0 * signs[bit];
                for (a, x) in v.iter_mut().zip(sample.row(idx[bit])) {
                    *a += c * x;
                }
            }
            let val = dot(&v, &v);
            if val > best.0 {
                best = (val, idx.to_vec(), signs.clone());
            }
        }
    });
    finish(sample, best.0.max(0.0).sqrt(), best.1, best.2, Method::EnumerationExact)
}

fn finish(sample: &SampleMatrix, value: f64, subset: Vec<usize>, signs: Vec<f64>, method: Method) -> TopEllResult {
    let mut v = vec![0.0; sample.n()];
    for (&i, &s) in subset.iter().zip(&signs) {
        for (a, x) in v.iter_mut().zip(sample.row(i)) {
            *a += s * x;
        }
    }
    linalg::normalize(&mut v);
    TopEllResult { value, subset, signs, direction: v, method }
}

/// Given a direction, the best subset is the top-ℓ of `|⟨X_i,t⟩|` with matching
/// signs; given a subset, the best direction is the normalised signed sum.
fn alternate(sample: &SampleMatrix, ell: usize, mut t: Vec<f64>) -> (f64, Vec<usize>, Vec<f64>, Vec<f64>) {
    let n = sample.n();
    let mut last = f64::NEG_INFINITY;
    let mut state = (Vec::new(), Vec::new(), vec![0.0; n]);
    for _ in 0..100 {
        let mut proj: Vec<(f64, usize, f64)> = sample
            .rows()
            .enumerate()
            .map(|(i, r)| {
                let y = dot(r, &t);
                (y.abs(), i, if y >= 0.0 { 1.0 } else { -1.0 })
            })
            .collect();
        proj.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let subset: Vec<usize> = proj[..ell].iter().map(|x| x.1).collect();
        let signs: Vec<f64> = proj[..ell].iter().map(|x| x.2).collect();
        let mut v = vec![0.0; n];
        for (&i, &s) in subset.iter().zip(&signs) {
            for (a, x) in v.iter_mut().zip(sample.row(i)) {
                *a += s * x;
            }
        }
        let val = norm(&v);
        if val <= last * (1.0 + 1e-15) {
            break;
        }
        last = val;
        state = (subset, signs, v.clone());
        if linalg::normalize(&mut v) == 0.0 {
            break;
        }
        t = v;
    }
    (last, state.0, state.1, state.2)
}

/// `(value, subset, signs, Σ ε_i X_i)` of one local-search run.
type Run = (f64, Vec<usize>, Vec<f64>, Vec<f64>);

/// Swap one member for one non-member (with its best sign) or flip one sign,
/// until no single move improves `‖Σ ε_i X_i‖`.
fn local_moves(sample: &SampleMatrix, subset: &mut [usize], signs: &mut [f64], v: &mut [f64]) {
    let k = sample.k();
    let mut inside = vec![false; k];
    subset.iter().for_each(|&i| inside[i] = true);
    let mut cur = dot(v, v);
    loop {
        let mut improved = false;
        'outer: for pos in 0..subset.len() {
            let i = subset[pos];
            let base: Vec<f64> = v.iter().zip(sample.row(i)).map(|(a, x)| a - signs[pos] * x).collect();
            let flipped: Vec<f64> = base.iter().zip(sample.row(i)).map(|(a, x)| a - signs[pos] * x).collect();
            let fv = dot(&flipped, &flipped);
            if fv > cur * (1.0 + 1e-12) {
                signs[pos] = -signs[pos];
                v.copy_from_slice(&flipped);
                cur = fv;
                improved = true;
                break 'outer;
            }
            for j in 0..k {
                if inside[j] {
                    continue;
                }
                let rj = sample.row(j);
                let s = if dot(&base, rj) >= 0.0 { 1.0 } else { -1.0 };
                let cand: Vec<f64> = base.iter().zip(rj).map(|(a, x)| a + s * x).collect();
                let cv = dot(&cand, &cand);
                if cv > cur * (1.0 + 1e-12) {
                    inside[i] = false;
                    inside[j] = true;
                    subset[pos] = j;
                    signs[pos] = s;
                    v.copy_from_slice(&cand);
                    cur = cv;
                    improved = true;
                    break 'outer;
                }
            }
        }
        if !improved {
            break;
        }
    }
}

fn top_ell_local(sample: &SampleMatrix, ell: usize, warm: Option<Vec<f64>>) -> TopEllResult {
    let n = sample.n();
    let k = sample.k();
    let mut starts: Vec<Vec<f64>> = Vec::new();
    if let Some(w) = warm {
        starts.push(w);
    }
    let mut by_norm: Vec<(f64, usize)> = sample.rows().enumerate().map(|(i, r)| (norm(r), i)).collect();
    by_norm.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(r, i) in by_norm.iter().take(16) {
        if r > 0.0 {
            starts.push(sample.row(i).iter().map(|x| x / r).collect());
        }
    }
    let mut rng = rng::stream(sample.seed, 0x70e1, ell as u64);
    starts.extend((0..8).map(|_| linalg::random_unit(&mut rng, n)));

    let mut runs: Vec<Run> = starts.into_iter().map(|t| alternate(sample, ell, t)).collect();
    runs.sort_by(|a, b| b.0.total_cmp(&a.0));
    runs.truncate(if k <= 64 { 4 } else { 2 });
    let mut best = (f64::NEG_INFINITY, Vec::new(), Vec::new());
    for (_, mut subset, mut signs, mut v) in runs {
        if subset.is_empty() {
            continue;
        }
        loop {
            local_moves(sample, &mut subset, &mut signs, &mut v);
            let mut dir = v.clone();
            if linalg::normalize(&mut dir) == 0.0 {
                break;
            }
            let (val, s2, e2, v2) = alternate(sample, ell, dir);
            if val > norm(&v) * (1.0 + 1e-12) {
                subset = s2;
                signs = e2;
                v = v2;
            } else {
                break;
            }
        }
        let val = norm(&v);
        if val > best.0 {
            best = (val, subset, signs);
        }
    }
    finish(sample, best.0.max(0.0), best.1, best.2, Method::LocalSearch)
}
