//! Experiment configuration, read from TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bounds::{ConstantSet, TailEnvelopeForm};
use crate::error::{Error, Result};
use crate::geometry::QStarVariant;
use crate::measures::{Family, MeasureSpec};

/// Environment variable overriding the configured seed (a `--seed` flag wins over it).
pub const SEED_ENV: &str = "ORLICZ_LAB_SEED";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Deviation of the empirical second moments on the sphere versus `k`.
    Phase2,
    /// Deviation of p-th moments (`p > 2`) on the sphere.
    Psphere,
    /// Uniform empirical tail counts versus the tail envelope.
    Tailenv,
    /// Largest ℓ-subset sums versus the subset-sum envelopes.
    Topell,
    /// Supremum over the ℓ₁ ball for the weighted exponential measure.
    Counterexample,
    /// Diameters of kernel sections of `B₁ⁿ`.
    Kernel,
    /// Expected maximal norm `H_k` versus `√n`.
    Paouris,
    /// γ₂ of the sphere under the ψ₂ metric of a truncated measure.
    GammaTrunc,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Phase2 => "phase2",
            Scenario::Psphere => "psphere",
            Scenario::Tailenv => "tailenv",
            Scenario::Topell => "topell",
            Scenario::Counterexample => "counterexample",
            Scenario::Kernel => "kernel",
            Scenario::Paouris => "paouris",
            Scenario::GammaTrunc => "gamma_trunc",
        }
    }
}

/// Scenario knobs with defaults sized for a desk machine.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Settings {
    /// Interpret `ks` as multiples of `n`.
    pub ks_relative: bool,
    /// Draws used for ψ-norm diameters of the class.
    pub psi_samples: usize,
    /// Direction net size for ψ-norm diameters.
    pub psi_directions: usize,
    /// Number of tail levels (tailenv).
    pub tail_levels: usize,
    /// Smallest and largest tail level as multiples of diam(F, ψ₁).
    pub tail_range: [f64; 2],
    /// Direction budget of the tail-count search.
    pub tail_budget: usize,
    pub tail_form: TailEnvelopeForm,
    /// Restarts of the section-diameter search (kernel).
    pub restarts: usize,
    pub q_variant: QStarVariant,
    /// Points per net of `K ∩ ρS^{n-1}` (kernel, gamma_trunc).
    pub net_points: usize,
    /// Draws defining the empirical ψ₂ metric (gamma_trunc).
    pub metric_samples: usize,
    /// Truncation radius as a multiple of `√n` (gamma_trunc).
    pub truncation_factor: f64,
    /// Gaussian draws for ℓ_E (gamma_trunc).
    pub width_trials: usize,
    /// Multiple of `√log(n+1)` that the counterexample supremum should exceed.
    pub growth_factor: f64,
    /// Replace sampling by these rows (test hook).
    pub fixed_rows: Option<Vec<Vec<f64>>>,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            ks_relative: false,
            psi_samples: 20_000,
            psi_directions: 64,
            tail_levels: 12,
            tail_range: [0.125, 2.0],
            tail_budget: 2000,
            tail_form: TailEnvelopeForm::SquaredV1,
            restarts: 64,
            q_variant: QStarVariant::Intro,
            net_points: 200,
            metric_samples: 2000,
            truncation_factor: 4.0,
            width_trials: 200,
            growth_factor: 0.5,
            fixed_rows: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub measure: MeasureSpec,
    pub dims: Vec<usize>,
    #[serde(default)]
    pub ks: Vec<usize>,
    #[serde(default = "default_p")]
    pub p: f64,
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub constants: ConstantSet,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub settings: Settings,
}

fn default_p() -> f64 {
    2.0
}

fn default_epsilon() -> f64 {
    0.5
}

fn default_delta() -> f64 {
    0.1
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Sample sizes for dimension `n`.
    pub fn ks_for(&self, n: usize) -> Vec<usize> {
        if self.settings.ks_relative {
            self.ks.iter().map(|m| m * n).collect()
        } else {
            self.ks.clone()
        }
    }

    /// Measure in dimension `n`. For `l1_ball_isotropic` the configured
    /// `scale` multiplies the isotropic factor of dimension `n`.
    pub fn measure_for(&self, n: usize) -> MeasureSpec {
        let mut spec = self.measure.clone();
        spec.n = n;
        if matches!(spec.family, Family::L1BallIsotropic) {
            spec.scale *= MeasureSpec::l1_ball_isotropic(n).scale;
        }
        spec
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.dims.is_empty() || self.dims.contains(&0) {
            return fail("dims must be a nonempty list of positive integers".into());
        }
        let needs_ks = !matches!(self.scenario, Scenario::Counterexample | Scenario::GammaTrunc);
        if needs_ks && (self.ks.is_empty() || self.ks.contains(&0)) {
            return fail(format!("scenario {} needs a nonempty list of positive ks", self.scenario.name()));
        }
        if self.trials == 0 {
            return fail("trials must be at least 1".into());
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) || !(self.delta > 0.0 && self.delta < 1.0) {
            return fail("epsilon and delta must lie in (0, 1)".into());
        }
        if !(self.p >= 1.0) || !self.p.is_finite() {
            return fail(format!("p must be >= 1, got {}", self.p));
        }
        self.constants.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.measure.validate().map_err(|e| Error::Config(e.to_string()))?;
        match self.scenario {
            Scenario::Psphere if self.p <= 2.0 => fail(format!("psphere requires p > 2, got {}", self.p)),
            Scenario::Phase2 if self.p != 2.0 => fail(format!("phase2 uses p = 2, got {}", self.p)),
            Scenario::Counterexample if !matches!(self.measure.family, Family::WeightedExponential { .. }) => {
                fail("counterexample requires the weighted_exponential family".into())
            }
            Scenario::Tailenv | Scenario::Topell if self.settings.tail_levels == 0 => fail("tail_levels must be positive".into()),
            Scenario::GammaTrunc if !(self.settings.truncation_factor > 0.0) => fail("truncation_factor must be positive".into()),
            _ => Ok(()),
        }?;
        if let Some(rows) = &self.settings.fixed_rows {
            if self.dims.len() != 1 || rows.iter().any(|r| r.len() != self.dims[0]) {
                return fail("fixed_rows needs a single dimension matching the row length".into());
            }
        }
        Ok(())
    }

    /// Seed after applying the environment override.
    pub fn effective_seed(&self, flag: Option<u64>) -> Result<u64> {
        if let Some(s) = flag {
            return Ok(s);
        }
        match std::env::var(SEED_ENV) {
            Ok(v) => v.trim().parse().map_err(|_| Error::Config(format!("{SEED_ENV} must be an unsigned integer, got {v:?}"))),
            Err(_) => Ok(self.seed),
        }
    }
}
