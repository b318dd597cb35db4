//! Scenario drivers. Each work item is one `(n, trial)` pair; quantities
//! shared by all trials of a dimension live in [`DimContext`].

use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, Scenario};
use super::records::{passes, Record};
use crate::bounds::{self, TailEnvelopeForm};
use crate::chaining::{self, PointCloud};
use crate::empirical::{self, DeviationOptions, IndexClass, Method, TAIL_EXACT_MAX_K, TOP_ELL_EXACT_MAX_K};
use crate::error::{Error, Result};
use crate::geometry::{self, BodySpec, QStarVariant, RadiusGrid, RandomOperator, Scaling};
use crate::measures::{self, MeasureSpec, SampleMatrix};
use crate::orlicz::{self, DiameterBudget};
use crate::rng;

/// ψ-scale of the sphere class under one measure.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ClassScale {
    pub psi1_diameter: f64,
    pub psi2_diameter: f64,
    /// `E‖g‖₂`.
    pub width: f64,
    /// γ₂(F, ψ₂) proxy `(diam_ψ₂ / 2) E‖g‖₂`.
    pub gamma2: f64,
}

/// Profile `ρ ↦ V_ρ` on a log grid of `[PROFILE_LO, 1]`, zero beyond 1.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Profile {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
}

const PROFILE_LO: f64 = 1e-3;
const PROFILE_POINTS: usize = 121;
const KERNEL_GRID: RadiusGrid = RadiusGrid { lo: PROFILE_LO, hi: 2.0, points: 64 };
const HK_TRIALS: usize = 20;

impl Profile {
    pub fn eval(&self, r: f64) -> f64 {
        if r > 1.0 {
            return 0.0;
        }
        let (x0, y0) = (self.radii[0], self.values[0]);
        if r <= x0 {
            return y0 * r / x0;
        }
        let j = self.radii.partition_point(|&x| x < r).min(self.radii.len() - 1);
        let (xa, xb, ya, yb) = (self.radii[j - 1], self.radii[j], self.values[j - 1], self.values[j]);
        if ya <= 0.0 || yb <= 0.0 {
            return ya + (yb - ya) * (r - xa) / (xb - xa);
        }
        let w = (r / xa).ln() / (xb / xa).ln();
        (ya.ln() + w * (yb / ya).ln()).exp()
    }
}

pub(super) struct DimContext {
    pub n: usize,
    pub spec: MeasureSpec,
    pub ks: Vec<usize>,
    pub seed: u64,
    pub scale: Option<ClassScale>,
    /// `H_k` estimates aligned with `ks` (psphere).
    pub h_k: Vec<f64>,
    pub profile: Option<Profile>,
    /// Dudley bound of the weighted ±e_i cloud (counterexample).
    pub dudley: Option<f64>,
}

impl DimContext {
    pub fn prepare(cfg: &ExperimentConfig, n: usize, seed: u64) -> Result<Self> {
        let spec = cfg.measure_for(n);
        let seed_n = rng::derive_seed(seed, n as u64);
        let mut ctx = DimContext { n, spec, ks: cfg.ks_for(n), seed: seed_n, scale: None, h_k: Vec::new(), profile: None, dudley: None };
        match cfg.scenario {
            Scenario::Phase2 | Scenario::Psphere | Scenario::Tailenv | Scenario::Topell | Scenario::Kernel => {
                ctx.scale = Some(class_scale(cfg, &ctx.spec, seed_n)?);
            }
            _ => {}
        }
        match cfg.scenario {
            Scenario::Psphere => {
                ctx.h_k = ctx
                    .ks
                    .iter()
                    .map(|&k| Ok(measures::radial_stats(&ctx.spec, k, HK_TRIALS, rng::derive_seed(seed_n, 0x4a00 + k as u64))?.mean))
                    .collect::<Result<_>>()?;
            }
            Scenario::Kernel => {
                let s = ctx.scale.expect("kernel scale");
                ctx.profile = Some(l1_profile(n, s.psi2_diameter / 2.0, cfg.settings.width_trials, rng::derive_seed(seed_n, 0x9f0f)));
            }
            Scenario::Counterexample => ctx.dudley = Some(weighted_dudley(n)?),
            _ => {}
        }
        Ok(ctx)
    }
}

fn class_scale(cfg: &ExperimentConfig, spec: &MeasureSpec, seed: u64) -> Result<ClassScale> {
    let cls = IndexClass::sphere(spec.n);
    let budget = DiameterBudget { samples: cfg.settings.psi_samples, directions: cfg.settings.psi_directions };
    let psi1_diameter = orlicz::psi_diameter(&cls, spec, 1.0, budget, rng::derive_seed(seed, 0xb1))?.value;
    let psi2_diameter = orlicz::psi_diameter(&cls, spec, 2.0, budget, rng::derive_seed(seed, 0xb2))?.value;
    let width = chaining::gaussian_width(&cls, cfg.settings.width_trials, rng::derive_seed(seed, 0x9d))?.value;
    Ok(ClassScale { psi1_diameter, psi2_diameter, width, gamma2: psi2_diameter / 2.0 * width })
}

/// `V_ρ ≈ s · E sup_{B₁ⁿ ∩ ρB₂ⁿ} ⟨g, x⟩` with common Gaussian draws across radii.
fn l1_profile(n: usize, psi2_scale: f64, draws: usize, seed: u64) -> Profile {
    let gs: Vec<Vec<f64>> = (0..draws.max(1))
        .map(|j| {
            let mut r = rng::stream(seed, j as u64, 0);
            (0..n).map(|_| r.sample(StandardNormal)).collect()
        })
        .collect();
    let ratio = (1.0 / PROFILE_LO).powf(1.0 / (PROFILE_POINTS - 1) as f64);
    let radii: Vec<f64> = (0..PROFILE_POINTS).map(|i| PROFILE_LO * ratio.powi(i as i32)).collect();
    let values = radii
        .par_iter()
        .map(|&r| psi2_scale * gs.iter().map(|g| geometry::l1_section_support(g, r)).sum::<f64>() / gs.len() as f64)
        .collect();
    Profile { radii, values }
}

/// Dudley bound for `{±e_i}` under `|t|^{(n)} = (Σ t_i² / ln(i+1))^{1/2}`.
fn weighted_dudley(n: usize) -> Result<f64> {
    let w: Vec<f64> = (1..=n).map(|i| 1.0 / ((i + 1) as f64).ln().sqrt()).collect();
    let cloud = PointCloud::from_oracle(2 * n, move |a, b| {
        let (i, j) = (a / 2, b / 2);
        if a == b {
            0.0
        } else if i == j {
            2.0 * w[i]
        } else {
            (w[i] * w[i] + w[j] * w[j]).sqrt()
        }
    })?;
    Ok(chaining::dudley_gamma2_upper(&cloud))
}

/// Subset sizes `1, 2, 4, …` up to `k`, always ending at `k`.
pub fn ell_grid(k: usize) -> Vec<usize> {
    let mut out: Vec<usize> = std::iter::successors(Some(1usize), |l| Some(l * 2)).take_while(|&l| l < k).collect();
    out.push(k);
    out
}

/// Geometric tail levels `B·u` with `u` spanning `range`.
pub fn tail_levels(b: f64, count: usize, range: [f64; 2]) -> Vec<f64> {
    if count == 1 {
        return vec![b * range[0]];
    }
    let ratio = (range[1] / range[0]).powf(1.0 / (count - 1) as f64);
    (0..count).map(|j| b * range[0] * ratio.powi(j as i32)).collect()
}

struct Emitter<'a> {
    cfg: &'a ExperimentConfig,
    ctx: &'a DimContext,
    trial: usize,
    out: Vec<Record>,
}

impl Emitter<'_> {
    fn push(&mut self, statistic: &str, k: usize, param: Option<f64>, measured: f64, envelope: f64, started: Instant) {
        let scenario = self.cfg.scenario.name();
        let bound = self.cfg.constants.multiplier(&format!("{scenario}/{statistic}")) * envelope;
        self.out.push(Record {
            scenario: scenario.into(),
            statistic: statistic.into(),
            n: self.ctx.n,
            k,
            trial: self.trial,
            param,
            seed: self.ctx.seed,
            measured,
            bound,
            pass: passes(statistic, measured, bound),
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        });
    }
}

fn draw(cfg: &ExperimentConfig, ctx: &DimContext, k: usize, trial: usize) -> Result<SampleMatrix> {
    match &cfg.settings.fixed_rows {
        Some(rows) if rows.len() < k => Err(Error::Config(format!("fixed_rows has {} rows, k = {k} requested", rows.len()))),
        Some(rows) => SampleMatrix::from_rows(ctx.spec.clone(), &rows[..k]),
        None => measures::sample_trial(&ctx.spec, k, ctx.seed, trial as u64),
    }
}

fn item_seed(ctx: &DimContext, trial: usize, label: u64) -> u64 {
    rng::derive_seed(rng::derive_seed(ctx.seed, label), trial as u64)
}

pub(super) fn run_item(cfg: &ExperimentConfig, ctx: &DimContext, trial: usize) -> Result<Vec<Record>> {
    let mut em = Emitter { cfg, ctx, trial, out: Vec::new() };
    match cfg.scenario {
        Scenario::Phase2 | Scenario::Psphere => deviation(&mut em)?,
        Scenario::Tailenv => tail_counts(&mut em)?,
        Scenario::Topell => top_ell(&mut em)?,
        Scenario::Counterexample => counterexample(&mut em)?,
        Scenario::Kernel => kernel(&mut em)?,
        Scenario::Paouris => paouris(&mut em)?,
        Scenario::GammaTrunc => gamma_trunc(&mut em)?,
    }
    Ok(em.out)
}

fn max_k(ctx: &DimContext) -> usize {
    ctx.ks.iter().copied().max().unwrap_or(1)
}

fn deviation(em: &mut Emitter) -> Result<()> {
    let (cfg, ctx) = (em.cfg, em.ctx);
    let scale = ctx.scale.expect("deviation scale");
    let full = draw(cfg, ctx, max_k(ctx), em.trial)?;
    let cls = IndexClass::sphere(ctx.n);
    let c = &cfg.constants;
    for (j, &k) in ctx.ks.iter().enumerate() {
        let t0 = Instant::now();
        let sample = full.prefix(k);
        let (value, envelope) = if cfg.scenario == Scenario::Phase2 {
            let d = empirical::deviation_sup(&sample, &cls, 2.0, Method::EigenExact)?;
            (d.value, bounds::combined_deviation_bound(scale.gamma2, scale.psi1_diameter, 2.0, k, c.v, c)?)
        } else {
            let opts = DeviationOptions {
                restarts: cfg.settings.restarts.min(16),
                iterations: 200,
                net_size: Some(2000),
                population_samples: 50_000,
                seed: item_seed(ctx, em.trial, 0xde00 + k as u64),
            };
            let d = empirical::deviation_sup_with(&sample, &cls, cfg.p, Method::GradientHeuristic, &opts)?;
            let b = bounds::truncated_process_bound(scale.gamma2, scale.psi1_diameter, cfg.p, k, ctx.h_k[j], cfg.epsilon, c)?;
            (d.value, b)
        };
        em.push("deviation", k, None, value, envelope, t0);
    }
    Ok(())
}

fn tail_counts(em: &mut Emitter) -> Result<()> {
    let (cfg, ctx) = (em.cfg, em.ctx);
    let scale = ctx.scale.expect("tail scale");
    let s = &cfg.settings;
    let levels = tail_levels(scale.psi1_diameter, s.tail_levels, s.tail_range);
    let full = draw(cfg, ctx, max_k(ctx), em.trial)?;
    let cls = IndexClass::sphere(ctx.n);
    let (alt_form, alt_name) = match s.tail_form {
        TailEnvelopeForm::SquaredV1 => (TailEnvelopeForm::LinearV1, "tail_count_linear_v1"),
        TailEnvelopeForm::LinearV1 => (TailEnvelopeForm::SquaredV1, "tail_count_squared_v1"),
    };
    for &k in &ctx.ks {
        let t0 = Instant::now();
        let sample = full.prefix(k);
        let counts = empirical::tail_count_sup(&sample, &cls, &levels, s.tail_budget)?;
        debug_assert!(k > TAIL_EXACT_MAX_K || counts.method == Method::EnumerationExact);
        for (&u, &count) in levels.iter().zip(&counts.counts) {
            let env = bounds::tail_envelope(u, k, scale.gamma2, scale.psi1_diameter, &cfg.constants, s.tail_form)?;
            em.push("tail_count", k, Some(u), count as f64, env, t0);
            let alt = bounds::tail_envelope(u, k, scale.gamma2, scale.psi1_diameter, &cfg.constants, alt_form)?;
            em.push(alt_name, k, Some(u), count as f64, alt, t0);
        }
    }
    Ok(())
}

fn top_ell(em: &mut Emitter) -> Result<()> {
    let (cfg, ctx) = (em.cfg, em.ctx);
    let scale = ctx.scale.expect("top-ell scale");
    let c = &cfg.constants;
    let full = draw(cfg, ctx, max_k(ctx), em.trial)?;
    for &k in &ctx.ks {
        let t0 = Instant::now();
        let sample = full.prefix(k);
        let ells = ell_grid(k);
        let values: Vec<f64> = if k <= TAIL_EXACT_MAX_K.min(TOP_ELL_EXACT_MAX_K) {
            ells.iter().map(|&l| Ok(empirical::top_ell_sum_sup(&sample, l, Method::EnumerationExact)?.value)).collect::<Result<_>>()?
        } else {
            empirical::top_ell_curve(&sample, &ells)?.into_iter().map(|r| r.value).collect()
        };
        for (&ell, &v) in ells.iter().zip(&values) {
            let b1 = bounds::subset_sum_bound_psi1(ell, k, scale.gamma2, scale.psi1_diameter, c.v1, c.v2)?;
            em.push("subset_sum_psi1", k, Some(ell as f64), v, b1, t0);
            let b2 = bounds::subset_sum_bound_psi2(ell, k, scale.gamma2, scale.psi2_diameter, c.v)?;
            em.push("subset_sum_psi2", k, Some(ell as f64), v, b2, t0);
        }
    }
    Ok(())
}

fn counterexample(em: &mut Emitter) -> Result<()> {
    let (cfg, ctx) = (em.cfg, em.ctx);
    let t0 = Instant::now();
    let x = draw(cfg, ctx, 1, em.trial)?;
    // The supremum of a linear form over B₁ⁿ is attained at a vertex ±e_i.
    let sup = x.row(0).iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    let reference = cfg.settings.growth_factor * ((ctx.n + 1) as f64).ln().sqrt();
    em.push("sup_growth", 1, None, sup, reference, t0);
    if em.trial == 0 {
        let t0 = Instant::now();
        em.push("dudley_weighted", 1, None, ctx.dudley.expect("dudley"), cfg.constants.c2, t0);
    }
    Ok(())
}

fn kernel(em: &mut Emitter) -> Result<()> {
    let (cfg, ctx) = (em.cfg, em.ctx);
    let profile = ctx.profile.as_ref().expect("kernel profile");
    let variant = cfg.settings.q_variant;
    let full = draw(cfg, ctx, max_k(ctx), em.trial)?;
    let op = RandomOperator::from_sample(&full, Scaling::Raw);
    for &k in &ctx.ks {
        let t0 = Instant::now();
        let sd = geometry::section_diameter(
            &op.prefix(k),
            &BodySpec::L1Ball,
            cfg.settings.restarts,
            item_seed(ctx, em.trial, 0x5d00 + k as u64),
        )?;
        let q = geometry::q_star(|r| profile.eval(r), k, &cfg.constants, variant, KERNEL_GRID)?;
        em.push("section_diameter", k, None, sd.value, 2.0 * q.stable_rho, t0);
        em.push("q_star_constant", k, None, required_constant(profile, sd.value / 2.0, k, variant), cfg.constants.c5, t0);
    }
    Ok(())
}

/// Smallest `c` for which the stable `q_k*` reaches `radius`:
/// `inf_{ρ ≥ radius} ρ / rhs₁(ρ)` over the profile grid, `rhs₁` being the
/// right-hand side with unit constant.
pub fn required_constant(profile: &Profile, radius: f64, k: usize, variant: QStarVariant) -> f64 {
    if radius <= 0.0 {
        return 0.0;
    }
    profile
        .radii
        .iter()
        .zip(&profile.values)
        .filter(|(r, _)| **r >= radius)
        .map(|(&r, &v)| {
            let g = geometry::q_star_rhs(v, k, 1.0, variant);
            if g > 0.0 {
                r / g
            } else {
                f64::INFINITY
            }
        })
        .fold(f64::INFINITY, f64::min)
}

fn paouris(em: &mut Emitter) -> Result<()> {
    let (cfg, ctx) = (em.cfg, em.ctx);
    let full = draw(cfg, ctx, max_k(ctx), em.trial)?;
    let norms = full.row_norms();
    for &k in &ctx.ks {
        let t0 = Instant::now();
        let h = norms[..k].iter().copied().fold(0.0, f64::max);
        em.push("h_k", k, None, h, cfg.constants.c2 * (ctx.n as f64).sqrt(), t0);
    }
    Ok(())
}

fn gamma_trunc(em: &mut Emitter) -> Result<()> {
    let (cfg, ctx) = (em.cfg, em.ctx);
    let s = &cfg.settings;
    let n = ctx.n as f64;
    let radius = s.truncation_factor * n.sqrt();
    let nu = measures::truncate(&ctx.spec, radius)?;
    let t0 = Instant::now();
    let mut r = rng::stream(ctx.seed, em.trial as u64, 0x9e7);
    let points = crate::linalg::direction_net(ctx.n, s.net_points, &mut r);
    let cloud = PointCloud::empirical_psi2(points, nu.clone(), s.metric_samples, item_seed(ctx, em.trial, 0x3e7))?;
    let gamma = chaining::two_convex_gamma2_upper(&cloud);
    em.push("two_convex", 0, None, gamma, cfg.constants.c2 * (n * n.ln().max(f64::MIN_POSITIVE)).sqrt(), t0);
    let t0 = Instant::now();
    let ell = geometry::ell_e_estimate(&nu, s.width_trials, s.metric_samples, item_seed(ctx, em.trial, 0xe11))?;
    em.push("ell_e", 0, Some(radius), ell.value, cfg.constants.c7 * radius, t0);
    Ok(())
}
