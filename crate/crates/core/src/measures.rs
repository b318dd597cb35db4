//! Sampling distributions on ℝⁿ: closed-form families, isotropy
//! calibration, truncation at a Euclidean radius, and radial statistics.

use std::fmt;
use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::rng;

/// Law of a single coordinate of a product measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum CoordinateLaw {
    /// Uniform on `[-half_width, half_width]`.
    Uniform { half_width: f64 },
    /// Symmetric exponential with density `exp(-|x|/scale) / (2 scale)`.
    Laplace { scale: f64 },
    /// Uniform on `{-1, +1}`.
    Rademacher,
    /// Raw (non-centred) exponential with the given rate.
    Exponential { rate: f64 },
}

impl CoordinateLaw {
    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            CoordinateLaw::Uniform { half_width } => half_width * (2.0 * rng.random::<f64>() - 1.0),
            CoordinateLaw::Laplace { scale } => {
                let e: f64 = rng.sample(Exp1);
                if rng.random::<bool>() {
                    scale * e
                } else {
                    -scale * e
                }
            }
            CoordinateLaw::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            CoordinateLaw::Exponential { rate } => {
                let e: f64 = rng.sample(Exp1);
                e / rate
            }
        }
    }

    fn mean(&self) -> f64 {
        match *self {
            CoordinateLaw::Exponential { rate } => 1.0 / rate,
            _ => 0.0,
        }
    }

    fn second_moment(&self) -> f64 {
        match *self {
            CoordinateLaw::Uniform { half_width } => half_width * half_width / 3.0,
            CoordinateLaw::Laplace { scale } => 2.0 * scale * scale,
            CoordinateLaw::Rademacher => 1.0,
            CoordinateLaw::Exponential { rate } => 2.0 / (rate * rate),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            CoordinateLaw::Uniform { half_width } => half_width > 0.0 && half_width.is_finite(),
            CoordinateLaw::Laplace { scale } => scale > 0.0 && scale.is_finite(),
            CoordinateLaw::Rademacher => true,
            CoordinateLaw::Exponential { rate } => rate > 0.0 && rate.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            param(format!("invalid coordinate law {self:?}"))
        }
    }
}

/// Measure family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// Standard Gaussian on ℝⁿ.
    Gaussian,
    /// Uniform measure on the vertices `{-1, 1}ⁿ`.
    RademacherCube,
    /// Uniform measure on the unit ℓ₁ ball; isotropic once `scale` is the
    /// isotropic factor (see [`MeasureSpec::l1_ball_isotropic`]).
    L1BallIsotropic,
    /// Coordinate `i` (1-based) is `Y_i / sqrt(ln(i + 1))`, `Y_i` standard
    /// exponential. Never isotropic.
    WeightedExponential {
        #[serde(default)]
        symmetrized: bool,
    },
    /// Independent coordinates with a common law.
    CustomProduct { coordinate: CoordinateLaw },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::RademacherCube => "rademacher_cube",
            Family::L1BallIsotropic => "l1_ball_isotropic",
            Family::WeightedExponential { .. } => "weighted_exponential",
            Family::CustomProduct { .. } => "custom_product",
        }
    }
}

/// Declarative description of a sampling distribution on ℝⁿ.
///
/// A raw draw is multiplied coordinatewise by `scale`; the result is then
/// replaced by the zero vector whenever its Euclidean norm exceeds
/// `truncation_radius`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpec {
    #[serde(flatten)]
    pub family: Family,
    pub n: usize,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default = "infinite", with = "radius_serde")]
    pub truncation_radius: f64,
    /// Subtract empirical means before evaluating empirical processes.
    /// Sampling itself never re-centres.
    #[serde(default)]
    pub recenter: bool,
}

fn one() -> f64 {
    1.0
}

fn infinite() -> f64 {
    f64::INFINITY
}

mod radius_serde {
    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};
    use std::fmt;

    pub fn serialize<S: Serializer>(r: &f64, s: S) -> Result<S::Ok, S::Error> {
        if r.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*r)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        struct RadiusVisitor;
        impl Visitor<'_> for RadiusVisitor {
            type Value = f64;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a positive number or \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
                Ok(v)
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
                Ok(v as f64)
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
                Ok(v as f64)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
                match v {
                    "inf" | "infinity" | "Infinity" => Ok(f64::INFINITY),
                    other => other.parse().map_err(E::custom),
                }
            }
        }
        d.deserialize_any(RadiusVisitor)
    }
}

impl MeasureSpec {
    pub fn new(family: Family, n: usize) -> Result<Self> {
        let spec = MeasureSpec { family, n, scale: 1.0, truncation_radius: f64::INFINITY, recenter: false };
        spec.validate()?;
        Ok(spec)
    }

    pub fn gaussian(n: usize) -> Self {
        Self::unchecked(Family::Gaussian, n)
    }

    pub fn rademacher_cube(n: usize) -> Self {
        Self::unchecked(Family::RademacherCube, n)
    }

    /// Uniform measure on the ℓ₁ ball with unit scale (raw support).
    pub fn l1_ball(n: usize) -> Self {
        Self::unchecked(Family::L1BallIsotropic, n)
    }

    /// Uniform measure on the ℓ₁ ball rescaled to isotropic position.
    ///
    /// `E x₁² = 2 / ((n + 1)(n + 2))` for the uniform measure on `B₁ⁿ`, so the
    /// isotropic factor is `sqrt((n + 1)(n + 2) / 2)`.
    pub fn l1_ball_isotropic(n: usize) -> Self {
        let nf = n as f64;
        Self::l1_ball(n).with_scale(((nf + 1.0) * (nf + 2.0) / 2.0).sqrt())
    }

    pub fn weighted_exponential(n: usize) -> Self {
        Self::unchecked(Family::WeightedExponential { symmetrized: false }, n)
    }

    pub fn custom_product(coordinate: CoordinateLaw, n: usize) -> Self {
        Self::unchecked(Family::CustomProduct { coordinate }, n)
    }

    fn unchecked(family: Family, n: usize) -> Self {
        MeasureSpec { family, n, scale: 1.0, truncation_radius: f64::INFINITY, recenter: false }
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn with_dimension(mut self, n: usize) -> Self {
        let iso = matches!(self.family, Family::L1BallIsotropic) && self.is_isotropic();
        self.n = n;
        if iso {
            self.scale = Self::l1_ball_isotropic(n).scale;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return param("dimension must be positive");
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return param(format!("scale must be positive and finite, got {}", self.scale));
        }
        if !(self.truncation_radius > 0.0) {
            return param(format!("truncation radius must be positive, got {}", self.truncation_radius));
        }
        if let Family::CustomProduct { coordinate } = &self.family {
            coordinate.validate()?;
        }
        Ok(())
    }

    pub fn is_truncated(&self) -> bool {
        self.truncation_radius.is_finite()
    }

    /// Second moment of one raw coordinate, when all coordinates share it.
    pub fn raw_coordinate_second_moment(&self) -> Option<f64> {
        let nf = self.n as f64;
        match &self.family {
            Family::Gaussian | Family::RademacherCube => Some(1.0),
            Family::L1BallIsotropic => Some(2.0 / ((nf + 1.0) * (nf + 2.0))),
            Family::WeightedExponential { .. } => None,
            Family::CustomProduct { coordinate } => Some(coordinate.second_moment()),
        }
    }

    /// Whether linear functionals have symmetric laws (hence mean zero).
    pub fn is_symmetric(&self) -> bool {
        match &self.family {
            Family::WeightedExponential { symmetrized } => *symmetrized,
            Family::CustomProduct { coordinate: CoordinateLaw::Exponential { .. } } => false,
            _ => true,
        }
    }

    /// Isotropic: untruncated, centred, and `E⟨X,y⟩² = ‖y‖²` exactly.
    pub fn is_isotropic(&self) -> bool {
        if self.is_truncated() || !self.is_symmetric() {
            return false;
        }
        match self.raw_coordinate_second_moment() {
            Some(m2) => ((self.scale * self.scale * m2) - 1.0).abs() < 1e-9,
            None => false,
        }
    }

    /// Closed-form second-moment matrix `E X Xᵀ` (row-major, n×n) for
    /// untruncated specs. Truncated specs return `None`.
    pub fn second_moment_matrix(&self) -> Option<Vec<f64>> {
        if self.is_truncated() {
            return None;
        }
        let n = self.n;
        let s2 = self.scale * self.scale;
        let mut m = vec![0.0; n * n];
        match &self.family {
            Family::WeightedExponential { symmetrized } => {
                let w: Vec<f64> = (1..=n).map(|i| 1.0 / ((i as f64 + 1.0).ln()).sqrt()).collect();
                for i in 0..n {
                    for j in 0..n {
                        let e = if i == j {
                            2.0
                        } else if *symmetrized {
                            0.0
                        } else {
                            1.0
                        };
                        m[i * n + j] = s2 * e * w[i] * w[j];
                    }
                }
            }
            Family::CustomProduct { coordinate } => {
                let mu = coordinate.mean();
                let m2 = coordinate.second_moment();
                for i in 0..n {
                    for j in 0..n {
                        m[i * n + j] = s2 * if i == j { m2 } else { mu * mu };
                    }
                }
            }
            _ => {
                let m2 = self.raw_coordinate_second_moment()?;
                for i in 0..n {
                    m[i * n + i] = s2 * m2;
                }
            }
        }
        Some(m)
    }

    /// One raw draw (before scaling and truncation).
    fn draw_raw(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        match &self.family {
            Family::Gaussian => {
                for x in out.iter_mut() {
                    *x = rng.sample(StandardNormal);
                }
            }
            Family::RademacherCube => {
                for x in out.iter_mut() {
                    *x = if rng.random::<bool>() { 1.0 } else { -1.0 };
                }
            }
            Family::L1BallIsotropic => {
                // Exponential spacings: (±E_1, …, ±E_n) / (E_0 + E_1 + … + E_n)
                // is uniform on the ℓ₁ ball.
                let mut total: f64 = rng.sample(Exp1);
                for x in out.iter_mut() {
                    let e: f64 = rng.sample(Exp1);
                    total += e;
                    *x = if rng.random::<bool>() { e } else { -e };
                }
                for x in out.iter_mut() {
                    *x /= total;
                }
            }
            Family::WeightedExponential { symmetrized } => {
                for (i, x) in out.iter_mut().enumerate() {
                    let y: f64 = rng.sample(Exp1);
                    let v = y / ((i as f64 + 2.0).ln()).sqrt();
                    *x = if *symmetrized && rng.random::<bool>() { -v } else { v };
                }
            }
            Family::CustomProduct { coordinate } => {
                for x in out.iter_mut() {
                    *x = coordinate.draw(rng);
                }
            }
        }
    }

    /// Scaled, truncated draw for row `row` of trial `trial`.
    fn draw_row(&self, seed: u64, trial: u64, row: u64, out: &mut [f64]) {
        let mut rng = rng::stream(seed, trial, row);
        self.draw_raw(&mut rng, out);
        let mut sq = 0.0;
        for x in out.iter_mut() {
            *x *= self.scale;
            sq += *x * *x;
        }
        if sq.sqrt() > self.truncation_radius {
            out.iter_mut().for_each(|x| *x = 0.0);
        }
    }
}

impl fmt::Display for MeasureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(n={}, scale={}, R={})", self.family.name(), self.n, self.scale, self.truncation_radius)
    }
}

/// A k×n array of i.i.d. rows with provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleMatrix {
    data: Vec<f64>,
    k: usize,
    n: usize,
    pub spec: MeasureSpec,
    pub seed: u64,
    pub trial: u64,
}

impl SampleMatrix {
    /// Build a sample from explicit rows (test hooks, fixed designs).
    pub fn from_rows(spec: MeasureSpec, rows: &[Vec<f64>]) -> Result<Self> {
        let n = spec.n;
        let mut data = Vec::with_capacity(rows.len() * n);
        for r in rows {
            if r.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: r.len() });
            }
            data.extend_from_slice(r);
        }
        Ok(SampleMatrix { data, k: rows.len(), n, spec, seed: 0, trial: 0 })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row_norms(&self) -> Vec<f64> {
        self.rows().map(crate::linalg::norm).collect()
    }

    /// Indices of rows that are identically zero.
    pub fn zeroed_rows(&self) -> Vec<usize> {
        self.rows().enumerate().filter(|(_, r)| r.iter().all(|&x| x == 0.0)).map(|(i, _)| i).collect()
    }

    /// Copy with every entry multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> SampleMatrix {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|x| *x *= factor);
        out
    }

    /// Copy with the empirical column means subtracted.
    pub fn centered(&self) -> SampleMatrix {
        let mut out = self.clone();
        let mut mean = vec![0.0; self.n];
        for r in self.rows() {
            for (m, x) in mean.iter_mut().zip(r) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= self.k.max(1) as f64);
        for r in out.data.chunks_exact_mut(self.n) {
            for (x, m) in r.iter_mut().zip(&mean) {
                *x -= m;
            }
        }
        out
    }

    /// Rows used by empirical-process computations: centred when the spec
    /// asks for it, untouched otherwise.
    pub fn process_rows(&self) -> std::borrow::Cow<'_, SampleMatrix> {
        if self.spec.recenter {
            std::borrow::Cow::Owned(self.centered())
        } else {
            std::borrow::Cow::Borrowed(self)
        }
    }

    /// First `k` rows.
    pub fn prefix(&self, k: usize) -> SampleMatrix {
        let k = k.min(self.k);
        SampleMatrix { data: self.data[..k * self.n].to_vec(), k, ..self.clone() }
    }

    /// Empirical second-moment matrix `k⁻¹ Σ X_i X_iᵀ` (row-major).
    pub fn second_moment(&self) -> Vec<f64> {
        let n = self.n;
        let mut m = vec![0.0; n * n];
        for r in self.rows() {
            for i in 0..n {
                let ri = r[i];
                if ri == 0.0 {
                    continue;
                }
                for j in i..n {
                    m[i * n + j] += ri * r[j];
                }
            }
        }
        let inv = 1.0 / self.k.max(1) as f64;
        for i in 0..n {
            for j in i..n {
                let v = m[i * n + j] * inv;
                m[i * n + j] = v;
                m[j * n + i] = v;
            }
        }
        m
    }

    /// CSV export: `#`-prefixed metadata lines, a header, one row per sample.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# family={}", self.spec.family.name())?;
        writeln!(w, "# n={}", self.n)?;
        writeln!(w, "# k={}", self.k)?;
        writeln!(w, "# seed={}", self.seed)?;
        writeln!(w, "# trial={}", self.trial)?;
        writeln!(w, "# scale={}", self.spec.scale)?;
        writeln!(w, "# truncation_radius={}", self.spec.truncation_radius)?;
        let header: Vec<String> = (1..=self.n).map(|i| format!("x{i}")).collect();
        writeln!(w, "{}", header.join(","))?;
        for r in self.rows() {
            let line: Vec<String> = r.iter().map(|x| format!("{x:e}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }
}

/// `k` i.i.d. rows from `spec`, deterministic in `(spec, k, seed)`.
pub fn sample(spec: &MeasureSpec, k: usize, seed: u64) -> Result<SampleMatrix> {
    sample_trial(spec, k, seed, 0)
}

/// As [`sample`], on the independent stream of trial `trial`.
pub fn sample_trial(spec: &MeasureSpec, k: usize, seed: u64, trial: u64) -> Result<SampleMatrix> {
    spec.validate()?;
    if k == 0 {
        return param("sample size k must be positive");
    }
    let n = spec.n;
    let mut data = vec![0.0; k * n];
    for (i, row) in data.chunks_exact_mut(n).enumerate() {
        spec.draw_row(seed, trial, i as u64, row);
    }
    Ok(SampleMatrix { data, k, n, spec: spec.clone(), seed, trial })
}

/// Scale `s` such that `s·X` has unit estimated coordinate second moment.
///
/// The estimate averages `x_j²` over all coordinates and rows of an
/// untruncated, unscaled sample.
pub fn calibrate_isotropy(spec: &MeasureSpec, sample_size: usize, seed: u64) -> Result<f64> {
    let raw = MeasureSpec { scale: 1.0, truncation_radius: f64::INFINITY, ..spec.clone() };
    let s = sample(&raw, sample_size, seed)?;
    let m2 = s.as_slice().iter().map(|x| x * x).sum::<f64>() / s.as_slice().len() as f64;
    if !(m2 > 0.0) || !m2.is_finite() {
        return Err(Error::Degenerate(format!("estimated second moment {m2}")));
    }
    Ok(1.0 / m2.sqrt())
}

/// Monte Carlo estimate of `H_k = E max_{i≤k} ‖X_i‖₂`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RadialEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
}

pub fn radial_stats(spec: &MeasureSpec, k: usize, trials: usize, seed: u64) -> Result<RadialEstimate> {
    if trials == 0 {
        return param("trials must be positive");
    }
    let maxima = (0..trials)
        .map(|t| {
            let s = sample_trial(spec, k, seed, t as u64)?;
            Ok(s.row_norms().into_iter().fold(0.0, f64::max))
        })
        .collect::<Result<Vec<f64>>>()?;
    let (mean, stderr) = crate::stats::mean_stderr(&maxima);
    Ok(RadialEstimate { mean, stderr, trials })
}

/// Copy of `spec` truncated at Euclidean radius `radius` (may be infinite).
pub fn truncate(spec: &MeasureSpec, radius: f64) -> Result<MeasureSpec> {
    if !(radius > 0.0) {
        return param(format!("truncation radius must be positive, got {radius}"));
    }
    Ok(MeasureSpec { truncation_radius: radius, ..spec.clone() })
}
