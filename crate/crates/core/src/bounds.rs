//! Closed-form envelopes for deviations, subset sums and tail counts, and
//! the truncation split `f = ϕ(f) + ψ(f)`.
//!
//! Logarithms are natural. Unnamed absolute constants live in
//! [`ConstantSet`] and default to 1.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};

/// Named absolute constants, all positive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConstantSet {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    pub c6: f64,
    pub c7: f64,
    pub c8: f64,
    pub c9: f64,
    pub c10: f64,
    pub v: f64,
    pub v1: f64,
    pub v2: f64,
    pub calibrated: bool,
    /// Fitted per-envelope multipliers, keyed `scenario/family`.
    pub multipliers: BTreeMap<String, f64>,
}

impl Default for ConstantSet {
    fn default() -> Self {
        ConstantSet {
            c1: 1.0,
            c2: 1.0,
            c3: 1.0,
            c4: 1.0,
            c5: 1.0,
            c6: 1.0,
            c7: 1.0,
            c8: 1.0,
            c9: 1.0,
            c10: 1.0,
            v: 1.0,
            v1: 1.0,
            v2: 1.0,
            calibrated: false,
            multipliers: BTreeMap::new(),
        }
    }
}

impl ConstantSet {
    pub fn named(&self) -> [(&'static str, f64); 13] {
        [
            ("c1", self.c1),
            ("c2", self.c2),
            ("c3", self.c3),
            ("c4", self.c4),
            ("c5", self.c5),
            ("c6", self.c6),
            ("c7", self.c7),
            ("c8", self.c8),
            ("c9", self.c9),
            ("c10", self.c10),
            ("v", self.v),
            ("v1", self.v1),
            ("v2", self.v2),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in self.named() {
            if !(value > 0.0) || !value.is_finite() {
                return param(format!("constant {name} must be positive and finite, got {value}"));
            }
        }
        for (key, m) in &self.multipliers {
            if !(*m > 0.0) || !m.is_finite() {
                return param(format!("multiplier {key} must be positive and finite, got {m}"));
            }
        }
        Ok(())
    }

    /// Fitted multiplier for an envelope family, 1 when uncalibrated.
    pub fn multiplier(&self, key: &str) -> f64 {
        self.multipliers.get(key).copied().unwrap_or(1.0)
    }

    /// Mutable handle to a named constant.
    pub fn get_mut(&mut self, name: &str) -> Option<&mut f64> {
        Some(match name {
            "c1" => &mut self.c1,
            "c2" => &mut self.c2,
            "c3" => &mut self.c3,
            "c4" => &mut self.c4,
            "c5" => &mut self.c5,
            "c6" => &mut self.c6,
            "c7" => &mut self.c7,
            "c8" => &mut self.c8,
            "c9" => &mut self.c9,
            "c10" => &mut self.c10,
            "v" => &mut self.v,
            "v1" => &mut self.v1,
            "v2" => &mut self.v2,
            _ => return None,
        })
    }
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        param(format!("{name} must be positive and finite, got {x}"))
    }
}

fn check_ell(ell: usize, k: usize) -> Result<()> {
    if ell >= 1 && ell <= k {
        Ok(())
    } else {
        param(format!("need 1 <= ell <= k, got ell = {ell}, k = {k}"))
    }
}

/// `2 exp(−c₁ k min(t/ψ, t²/ψ²))`.
pub fn bernstein_tail(t: f64, k: usize, psi1: f64, constants: &ConstantSet) -> Result<f64> {
    positive("t", t)?;
    positive("psi1", psi1)?;
    if k == 0 {
        return param("k must be positive");
    }
    let r = t / psi1;
    Ok(2.0 * (-constants.c1 * k as f64 * r.min(r * r)).exp())
}

/// `v₁ √ℓ γ₂ + v₂ α ℓ log(ek/ℓ)`, the ψ₁ subset-sum envelope.
pub fn subset_sum_bound_psi1(ell: usize, k: usize, gamma2: f64, diam_psi1: f64, v1: f64, v2: f64) -> Result<f64> {
    check_ell(ell, k)?;
    let (l, k) = (ell as f64, k as f64);
    Ok(v1 * l.sqrt() * gamma2 + v2 * diam_psi1 * l * (std::f64::consts::E * k / l).ln())
}

/// `v (√ℓ γ₂ + diam_ψ₂ ℓ √log(ek/ℓ))`, the ψ₂ subset-sum envelope.
pub fn subset_sum_bound_psi2(ell: usize, k: usize, gamma2: f64, diam_psi2: f64, v: f64) -> Result<f64> {
    check_ell(ell, k)?;
    let (l, k) = (ell as f64, k as f64);
    Ok(v * (l.sqrt() * gamma2 + diam_psi2 * l * (std::f64::consts::E * k / l).ln().sqrt()))
}

/// Which power of `v₁` multiplies the polynomial branch of the tail envelope.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailEnvelopeForm {
    /// `c₃ v₁² γ₂² / t²`.
    #[default]
    SquaredV1,
    /// `c₃ v₁ γ₂² / t²`.
    LinearV1,
}

/// Both branches of the tail envelope: `(c₃ v₁^a γ₂²/t², e k exp(−t/(c₃ α v₂)))`.
pub fn tail_envelope_branches(
    t: f64,
    k: usize,
    gamma2: f64,
    diam_psi1: f64,
    constants: &ConstantSet,
    form: TailEnvelopeForm,
) -> Result<(f64, f64)> {
    positive("t", t)?;
    positive("diam_psi1", diam_psi1)?;
    let c3 = constants.c3;
    let v1 = match form {
        TailEnvelopeForm::SquaredV1 => constants.v1 * constants.v1,
        TailEnvelopeForm::LinearV1 => constants.v1,
    };
    let poly = c3 * v1 * gamma2 * gamma2 / (t * t);
    let expo = std::f64::consts::E * k as f64 * (-t / (c3 * diam_psi1 * constants.v2)).exp();
    Ok((poly, expo))
}

/// `max{c₃ v₁² γ₂²/t², e k exp(−t/(c₃ α v₂))}` bounding `|{i : |f(X_i)| ≥ t}|`.
pub fn tail_envelope(t: f64, k: usize, gamma2: f64, diam_psi1: f64, constants: &ConstantSet, form: TailEnvelopeForm) -> Result<f64> {
    let (a, b) = tail_envelope_branches(t, k, gamma2, diam_psi1, constants, form)?;
    Ok(a.max(b))
}

/// Parameters of the truncation decomposition; `theta` is derived.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionParams {
    /// Upper estimate of γ₂(F, ψ₂).
    pub a: f64,
    /// Upper estimate of diam(F, ψ₁).
    pub b: f64,
    pub p: f64,
    pub v: f64,
    pub k: usize,
    pub theta: f64,
}

impl DecompositionParams {
    pub fn new(a: f64, b: f64, p: f64, v: f64, k: usize, constants: &ConstantSet) -> Result<Self> {
        let mut params = DecompositionParams { a, b, p, v, k, theta: 0.0 };
        params.theta = truncation_level(&params, constants)?;
        Ok(params)
    }
}

fn check_decomposition(a: f64, b: f64, p: f64, k: usize) -> Result<()> {
    positive("A", a)?;
    positive("B", b)?;
    if !(p >= 1.0) || !p.is_finite() {
        return param(format!("p must be >= 1, got {p}"));
    }
    if k == 0 {
        return param("k must be positive");
    }
    Ok(())
}

/// Smallest admissible level:
/// `θ = max{c₂ v B log(c₂ v B² k / A² + 1), c₂ p B log(c₂ p B + 1)}`.
pub fn truncation_level(params: &DecompositionParams, constants: &ConstantSet) -> Result<f64> {
    let &DecompositionParams { a, b, p, v, k, .. } = params;
    check_decomposition(a, b, p, k)?;
    positive("v", v)?;
    let c2 = constants.c2;
    let first = c2 * v * b * (c2 * b * b * k as f64 * v / (a * a) + 1.0).ln();
    let second = c2 * p * b * (c2 * p * b + 1.0).ln();
    Ok(first.max(second))
}

/// Truncation level without the `v` factor, as used with a truncated measure:
/// `θ = max{c₂ B log(c₂ k B²/A² + 1), c₂ p B log(c₂ p B + 1)}`.
pub fn truncated_level(a: f64, b: f64, p: f64, k: usize, constants: &ConstantSet) -> Result<f64> {
    check_decomposition(a, b, p, k)?;
    let c2 = constants.c2;
    let first = c2 * b * (c2 * k as f64 * b * b / (a * a) + 1.0).ln();
    let second = c2 * p * b * (c2 * p * b + 1.0).ln();
    Ok(first.max(second))
}

/// `ϕ(x) = sgn(x) min{|x|, θ}` and `ψ(x) = x − ϕ(x)`, elementwise.
///
/// Above the level, `ψ` is moved outward by whole ulps until `ϕ = x − ψ`
/// satisfies `|ϕ| ≤ θ`; then `ϕ + ψ == x` holds exactly in floating point,
/// which a plain `x − clamp(x)` misses for about 1% of inputs.
pub fn split(values: &[f64], theta: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    positive("theta", theta)?;
    if values.iter().any(|x| !x.is_finite()) {
        return param("split needs finite values");
    }
    let (phi, psi) = values.iter().map(|&x| split_one(x, theta)).unzip();
    Ok((phi, psi))
}

fn split_one(x: f64, theta: f64) -> (f64, f64) {
    if x.abs() <= theta {
        return (x, 0.0);
    }
    let mut psi = x - x.clamp(-theta, theta);
    let mut phi = x - psi;
    while phi.abs() > theta {
        psi = if psi > 0.0 { psi.next_up() } else { psi.next_down() };
        phi = x - psi;
    }
    (phi, psi)
}

/// `c₁ (2pB)^p exp(−θ/(c₂ B))`, bounding `E|f|^p 1{|f| ≥ θ}`.
pub fn residual_moment_bound(b: f64, p: f64, theta: f64, constants: &ConstantSet) -> Result<f64> {
    positive("B", b)?;
    if !(p >= 1.0) {
        return param(format!("p must be >= 1, got {p}"));
    }
    if !(theta >= 0.0) {
        return param(format!("theta must be nonnegative, got {theta}"));
    }
    Ok(constants.c1 * (2.0 * p * b).powf(p) * (-theta / (constants.c2 * b)).exp())
}

/// `κ_p`: `c₄ θ^{p−2}` for `p < 2`, `c₄ log A` for `p = 2`, `c₄ A^{p−2}` for `p > 2`.
pub fn kappa(p: f64, a: f64, theta: f64, constants: &ConstantSet) -> Result<f64> {
    if !(p >= 1.0) || !p.is_finite() {
        return param(format!("p must be >= 1, got {p}"));
    }
    let c4 = constants.c4;
    if p < 2.0 {
        positive("theta", theta)?;
        Ok(c4 * theta.powf(p - 2.0))
    } else if p == 2.0 {
        if !(a > 1.0) {
            return param(format!("the p = 2 branch needs A > 1, got {a}"));
        }
        Ok(c4 * a.ln())
    } else {
        positive("A", a)?;
        Ok(c4 * a.powf(p - 2.0))
    }
}

/// `c₃ p θ^{p−1} v γ₂ / √k`.
pub fn bounded_part_bound(gamma2: f64, p: f64, theta: f64, k: usize, v: f64, constants: &ConstantSet) -> Result<f64> {
    positive("theta", theta)?;
    if k == 0 {
        return param("k must be positive");
    }
    Ok(constants.c3 * p * theta.powf(p - 1.0) * v * gamma2 / (k as f64).sqrt())
}

/// `c₂ v (p θ^{p−1} A/√k + A²/k (θ^{p−2} + κ_p + 1))`, with θ from [`truncation_level`].
pub fn combined_deviation_bound(a: f64, b: f64, p: f64, k: usize, v: f64, constants: &ConstantSet) -> Result<f64> {
    let params = DecompositionParams::new(a, b, p, v, k, constants)?;
    let theta = params.theta;
    let kp = kappa(p, a, theta, constants)?;
    let kf = k as f64;
    Ok(constants.c2 * v * (p * theta.powf(p - 1.0) * a / kf.sqrt() + a * a / kf * (theta.powf(p - 2.0) + kp + 1.0)))
}

/// `κ̃_p`: 1 for `p < 2`, `log H_k` for `p = 2`, `H_k^{p−2}` for `p > 2`.
pub fn kappa_tilde(p: f64, h_k: f64) -> Result<f64> {
    if !(p >= 1.0) || !p.is_finite() {
        return param(format!("p must be >= 1, got {p}"));
    }
    if p < 2.0 {
        return Ok(1.0);
    }
    positive("H_k", h_k)?;
    Ok(if p == 2.0 { h_k.ln() } else { h_k.powf(p - 2.0) })
}

/// `c₂(θ^{p−1} A/√k + A²/k (θ^{p−2} + κ̃_p)) + c₃ B^{1/2} ε` with θ from [`truncated_level`].
pub fn truncated_process_bound(a: f64, b: f64, p: f64, k: usize, h_k: f64, eps: f64, constants: &ConstantSet) -> Result<f64> {
    let theta = truncated_level(a, b, p, k, constants)?;
    if !(eps >= 0.0) {
        return param(format!("eps must be nonnegative, got {eps}"));
    }
    let kt = kappa_tilde(p, h_k)?;
    let kf = k as f64;
    Ok(constants.c2 * (theta.powf(p - 1.0) * a / kf.sqrt() + a * a / kf * (theta.powf(p - 2.0) + kt)) + constants.c3 * b.sqrt() * eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, LN_2};

    fn unit() -> ConstantSet {
        ConstantSet::default()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * (1.0 + b.abs())
    }

    #[test]
    fn bernstein_branches() {
        let c = unit();
        assert!(close(bernstein_tail(1.0, 1, 1.0, &c).unwrap(), 2.0 / E));
        assert!(close(bernstein_tail(0.5, 3, 1.0, &c).unwrap(), 2.0 * (-3.0f64 / 4.0).exp()));
        assert!(close(bernstein_tail(2.0, 3, 1.0, &c).unwrap(), 2.0 * (-6.0f64).exp()));
        assert!(bernstein_tail(0.0, 1, 1.0, &c).is_err());
        assert!(bernstein_tail(1.0, 1, -1.0, &c).is_err());
    }

    #[test]
    fn subset_sum_arithmetic() {
        assert!(close(subset_sum_bound_psi1(9, 9, 2.0, 3.0, 1.5, 0.5).unwrap(), 1.5 * 3.0 * 2.0 + 0.5 * 3.0 * 9.0));
        assert!(close(subset_sum_bound_psi1(4, 10, 0.0, 1.0, 1.0, 1.0).unwrap(), 4.0 * (E * 10.0 / 4.0).ln()));
        assert!(close(subset_sum_bound_psi1(1, 3, 1.0, 1.0, 1.0, 1.0).unwrap(), 1.0 + (3.0 * E).ln()));
        assert!(close(subset_sum_bound_psi2(9, 9, 2.0, 3.0, 2.0).unwrap(), 2.0 * (3.0 * 2.0 + 3.0 * 9.0)));
        assert!(close(subset_sum_bound_psi2(4, 10, 0.0, 1.0, 1.0).unwrap(), 4.0 * (E * 10.0 / 4.0).ln().sqrt()));
        assert!(close(subset_sum_bound_psi2(1, 3, 1.0, 1.0, 1.0).unwrap(), 1.0 + (3.0 * E).ln().sqrt()));
        assert!(subset_sum_bound_psi1(0, 3, 1.0, 1.0, 1.0, 1.0).is_err());
        assert!(subset_sum_bound_psi2(4, 3, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn tail_envelope_examples() {
        let c = unit();
        let f = TailEnvelopeForm::SquaredV1;
        assert!(close(tail_envelope(1.0, 1, 1.0, 1.0, &c, f).unwrap(), 1.0));
        assert!(tail_envelope(1e4, 5, 1.0, 1.0, &c, f).unwrap() < 1e-7);
        assert!(tail_envelope(-1.0, 5, 1.0, 1.0, &c, f).is_err());
        let mut c2 = unit();
        c2.v1 = 2.0;
        let (sq, _) = tail_envelope_branches(1.0, 1, 1.0, 1.0, &c2, TailEnvelopeForm::SquaredV1).unwrap();
        let (lin, _) = tail_envelope_branches(1.0, 1, 1.0, 1.0, &c2, TailEnvelopeForm::LinearV1).unwrap();
        assert!(close(sq, 4.0) && close(lin, 2.0));
    }

    #[test]
    fn truncation_level_examples() {
        let c = unit();
        let p = DecompositionParams::new(1.0, 1.0, 1.0, 1.0, 1, &c).unwrap();
        assert!(close(p.theta, LN_2));
        let t3 = DecompositionParams::new(1.0, 1.0, 1.0, 1.0, 1000, &c).unwrap().theta;
        let t6 = DecompositionParams::new(1.0, 1.0, 1.0, 1.0, 1_000_000, &c).unwrap().theta;
        let ratio = (t6 / t3) / (1e6f64.ln() / 1e3f64.ln());
        assert!((ratio - 1.0).abs() < 0.1, "{ratio}");
        let big_p = DecompositionParams::new(1.0, 1.0, 50.0, 1.0, 10, &c).unwrap();
        assert!(close(big_p.theta, 50.0 * 51f64.ln()));
        assert!(DecompositionParams::new(0.0, 1.0, 1.0, 1.0, 1, &c).is_err());
    }

    #[test]
    fn split_examples() {
        let (phi, psi) = split(&[3.0, -0.5, 1.0], 1.0).unwrap();
        assert_eq!(phi, vec![1.0, -0.5, 1.0]);
        assert_eq!(psi, vec![2.0, 0.0, 0.0]);
        let (_, psi) = split(&[0.2, -0.7], 0.7).unwrap();
        assert!(psi.iter().all(|x| *x == 0.0));
        assert!(split(&[1.0], 0.0).is_err());
    }

    #[test]
    fn residual_and_kappa_examples() {
        let c = unit();
        assert!(close(residual_moment_bound(1.0, 1.0, 0.0, &c).unwrap(), 2.0));
        assert!(close(residual_moment_bound(1.0, 1.0, 4f64.ln(), &c).unwrap(), 0.5));
        let r1 = residual_moment_bound(1.0, 2.0, 1.5, &c).unwrap() / residual_moment_bound(1.0, 2.0, 0.0, &c).unwrap();
        let r2 = residual_moment_bound(1.0, 2.0, 3.0, &c).unwrap() / residual_moment_bound(1.0, 2.0, 0.0, &c).unwrap();
        assert!(close(r2, r1 * r1));
        assert!(close(kappa(1.5, 10.0, 4.0, &c).unwrap(), 0.5));
        assert!(close(kappa(2.0, E, 4.0, &c).unwrap(), 1.0));
        assert!(close(kappa(3.0, 5.0, 4.0, &c).unwrap(), 5.0));
        assert!(kappa(2.0, 1.0, 4.0, &c).is_err());
    }

    #[test]
    fn bounded_part_examples() {
        let c = unit();
        assert!(close(bounded_part_bound(3.0, 1.0, 7.0, 4, 2.0, &c).unwrap(), 2.0 * 3.0 / 2.0));
        assert!(close(bounded_part_bound(3.0, 2.5, 1.0, 9, 1.0, &c).unwrap(), 2.5 * 3.0 / 3.0));
        let a = bounded_part_bound(2.0, 2.0, 3.0, 16, 1.0, &c).unwrap();
        let b = bounded_part_bound(2.0, 2.0, 3.0, 64, 1.0, &c).unwrap();
        assert!(close(b, a / 2.0));
    }

    #[test]
    fn combined_deviation_examples() {
        let c = unit();
        // θ = ln 2 and κ₁ = θ⁻¹ at the unit point.
        let t = LN_2;
        let expect = t.powi(0) + (1.0 / t + 1.0 / t + 1.0);
        assert!(close(combined_deviation_bound(1.0, 1.0, 1.0, 1, 1.0, &c).unwrap(), expect));
        let v2 = combined_deviation_bound(1.0, 1.0, 1.0, 1, 2.0, &c).unwrap();
        let t2 = (2.0f64 * 1.0 + 1.0).ln() * 2.0;
        assert!(close(v2, 2.0 * (1.0 + 1.0 * (1.0 / t2 + 1.0 / t2 + 1.0))));
        let mut c2 = unit();
        c2.c4 = 3.0;
        let bigger = combined_deviation_bound(1.0, 1.0, 1.0, 1, 1.0, &c2).unwrap();
        assert!(close(bigger, 1.0 + (1.0 / t + 3.0 / t + 1.0)));
    }

    #[test]
    fn kappa_tilde_examples() {
        assert_eq!(kappa_tilde(1.5, 7.0).unwrap(), 1.0);
        assert!(close(kappa_tilde(2.0, E).unwrap(), 1.0));
        assert!(close(kappa_tilde(4.0, 3.0).unwrap(), 9.0));
        let c = unit();
        let b = truncated_process_bound(1.0, 1.0, 1.5, 1, 3.0, 0.0, &c).unwrap();
        let t = LN_2 * 1.0f64.max(1.5 * (2.5f64).ln() / LN_2);
        assert!(close(b, t.powf(0.5) + t.powf(-0.5) + 1.0));
    }

    #[test]
    fn constant_set_round_trip() {
        let mut c = unit();
        c.c3 = 2.5;
        c.calibrated = true;
        c.multipliers.insert("tailenv/tail_envelope".into(), 1.7);
        let text = toml::to_string(&c).unwrap();
        let back: ConstantSet = toml::from_str(&text).unwrap();
        assert_eq!(back, c);
        let partial: ConstantSet = toml::from_str("c2 = 4.0").unwrap();
        assert_eq!(partial.c2, 4.0);
        assert_eq!(partial.c1, 1.0);
        c.v = -1.0;
        assert!(c.validate().is_err());
    }
}
