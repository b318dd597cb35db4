//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the lines are always
//! printed. The exit status is nonzero on failure only when
//! `ORLICZ_LAB_STRICT_ACCEPTANCE=1`; otherwise failures are reported and
//! the run continues.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use rand_distr::{Distribution, Exp1, StandardNormal};

use orlicz_lab::bounds;
use orlicz_lab::empirical::{self, DeviationOptions, IndexClass, Method};
use orlicz_lab::geometry::QStarVariant;
use orlicz_lab::harness::{self, ExperimentConfig, RunOutput};
use orlicz_lab::measures::{self, MeasureSpec};
use orlicz_lab::orlicz;
use orlicz_lab::{rng, Result};

type Check = Result<(bool, String)>;

/// `(number, time budget in seconds, check)`.
type Criterion = (u32, Option<f64>, fn() -> Check);

fn config(name: &str) -> ExperimentConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(format!("{name}.toml"));
    ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    harness::run(cfg, None)
}

fn held_out_rate(out: &RunOutput, family: &str) -> Option<f64> {
    out.summary.calibration.held_out.iter().find(|h| h.family == family).map(|h| h.pass_rate)
}

/// Solve `mgf(u) = 2` for `u` by bisection on a bracketing interval.
fn mgf_root(mgf: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mgf(mid) > 2.0 {
            lo = mid
        } else {
            hi = mid
        }
    }
    0.5 * (lo + hi)
}

fn criterion_1() -> Check {
    let m = 100_000;
    let mut r = rng::stream(0xacc1, 0, 0);
    let exp: Vec<f64> = (0..m).map(|_| Exp1.sample(&mut r)).collect();
    let gauss: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut r)).collect();
    // E exp(Y/u) = u/(u−1) for Y ~ Exp(1); E exp(g²/u²) = (1 − 2/u²)^{−1/2}.
    let psi1_oracle = mgf_root(|u| u / (u - 1.0), 1.0 + 1e-12, 100.0);
    let psi2_oracle = mgf_root(|u| (1.0 - 2.0 / (u * u)).powf(-0.5), 2f64.sqrt() + 1e-12, 100.0);
    let psi1 = orlicz::psi_norm_empirical(&exp, 1.0)?.value;
    let psi2 = orlicz::psi_norm_empirical(&gauss, 2.0)?.value;
    let (e1, e2) = (psi1 / psi1_oracle - 1.0, psi2 / psi2_oracle - 1.0);
    Ok((
        e1.abs() <= 0.05 && e2.abs() <= 0.05,
        format!(
            "psi1(Exp) = {psi1:.4} vs {psi1_oracle:.4} ({:+.2}%), psi2(N) = {psi2:.4} vs {psi2_oracle:.4} ({:+.2}%)",
            100.0 * e1,
            100.0 * e2
        ),
    ))
}

fn criterion_2() -> Check {
    let (mut matches, mut exceeded) = (0, 0);
    for s in 0..100u64 {
        let n = 1 + (s % 4) as usize;
        let k = 4 + (s % 9) as usize;
        let ell = 1 + ((s / 4) % 4) as usize;
        let sample = measures::sample(&MeasureSpec::gaussian(n), k, rng::derive_seed(0xacc2, s))?;
        let exact = empirical::top_ell_sum_sup(&sample, ell, Method::EnumerationExact)?.value;
        let heur = empirical::top_ell_sum_sup(&sample, ell, Method::LocalSearch)?.value;
        if heur > exact * (1.0 + 1e-12) {
            exceeded += 1;
        }
        if (heur - exact).abs() <= 1e-9 * exact {
            matches += 1;
        }
    }
    let mut worst: f64 = 0.0;
    for s in 0..20u64 {
        let n = 2 + (s % 2) as usize;
        let k = 5 + 3 * s as usize;
        let sample = measures::sample(&MeasureSpec::gaussian(n), k, rng::derive_seed(0xacc3, s))?;
        let cls = IndexClass::sphere(n);
        let eig = empirical::deviation_sup(&sample, &cls, 2.0, Method::EigenExact)?.value;
        let opts = DeviationOptions { net_size: Some(100_000), ..DeviationOptions::default() };
        let net = empirical::deviation_sup_with(&sample, &cls, 2.0, Method::NetLower, &opts)?.value;
        worst = worst.max((eig - net).abs() / eig);
    }
    let pass = exceeded == 0 && matches >= 95 && worst <= 0.01;
    Ok((pass, format!("top-ell: {matches}/100 match, {exceeded} exceed; eigen vs dense net: max rel. gap {:.2e}", worst)))
}

fn criterion_3() -> Check {
    let mut failures = BTreeMap::<&str, usize>::new();
    let mut r = rng::stream(0xacc4, 0, 0);
    use rand::Rng;
    for _ in 0..10_000 {
        let theta: f64 = r.random_range(0.01..10.0);
        let spread = [0.5, 2.0, 30.0, 1e6][r.random_range(0..4)];
        let x: f64 = theta * spread * r.sample::<f64, _>(StandardNormal);
        let y: f64 = x + theta * r.sample::<f64, _>(StandardNormal);
        let p: f64 = r.random_range(1.0..6.0);
        let (phi, psi) = bounds::split(&[x, y], theta)?;
        let mut fail = |name, bad: bool| {
            if bad {
                *failures.entry(name).or_default() += 1;
            }
        };
        fail("sum", phi[0] + psi[0] != x || phi[1] + psi[1] != y);
        fail("clip", phi[0].abs() > theta || phi[1].abs() > theta);
        // Rounding allowance: the maps are 1-Lipschitz up to a few ulps of the operands.
        let slack = 4.0 * f64::EPSILON * (x.abs() + y.abs() + theta);
        fail("lipschitz_phi", (phi[0] - phi[1]).abs() > (x - y).abs() + slack);
        fail("lipschitz_psi", (psi[0] - psi[1]).abs() > (x - y).abs() + slack);
        let indicator = if x.abs() >= theta { x.abs().powf(p) } else { 0.0 };
        fail("pointwise", x.abs().powf(p) > phi[0].abs().powf(p) + indicator);
    }
    let total: usize = failures.values().sum();
    Ok((total == 0, if total == 0 { "10^4 inputs, 0 failures".into() } else { format!("failures: {failures:?}") }))
}

fn criterion_4() -> Check {
    let cfg = config("phase2");
    let out = run(&cfg)?;
    let mut lines = Vec::new();
    let mut pass = true;
    for f in out.summary.fits.iter().filter(|f| f.name == "deviation_vs_k") {
        let slope = f.fit.map(|f| f.slope).unwrap_or(f64::NAN);
        pass &= (slope + 0.5).abs() <= 0.1;
        lines.push(format!("n={} slope {slope:.3}", f.n.unwrap_or(0)));
    }
    let k0 = out.summary.fits.iter().find(|f| f.name == "k0_vs_n").and_then(|f| f.fit);
    let k0_slope = k0.map(|f| f.slope).unwrap_or(f64::NAN);
    pass &= (k0_slope - 1.0).abs() <= 0.15;
    Ok((
        pass,
        format!(
            "{}; k0 {} slope {k0_slope:.3} ± {:.3}",
            lines.join(", "),
            out.summary.details["k0"],
            k0.map(|f| f.stderr).unwrap_or(f64::NAN)
        ),
    ))
}

fn calibrated_protocol(names: &[&str], families: &[&str]) -> Check {
    let mut pass = true;
    let mut parts = Vec::new();
    for name in names {
        let cfg = config(name);
        let out = run(&cfg)?;
        let cal = &out.summary.calibration;
        pass &= cal.calibration_trials == 50 && cal.held_out_trials == 50;
        for fam in families {
            let rate = held_out_rate(&out, fam).unwrap_or(0.0);
            pass &= rate >= 0.9;
            parts.push(format!("{} {fam}: {:.0}%", cfg.measure.family.name(), 100.0 * rate));
        }
    }
    Ok((pass, format!("held-out pass {}", parts.join(", "))))
}

fn criterion_5() -> Check {
    calibrated_protocol(&["tailenv_gaussian", "tailenv_l1_ball_isotropic"], &["tailenv/tail_count"])
}

fn criterion_6() -> Check {
    calibrated_protocol(&["topell_gaussian", "topell_l1_ball_isotropic"], &["topell/subset_sum_psi1", "topell/subset_sum_psi2"])
}

fn criterion_7() -> Check {
    let cfg = config("counterexample");
    let out = run(&cfg)?;
    let d = &out.summary.details;
    let spread = d["dudley_spread"].as_f64().unwrap_or(f64::INFINITY);
    let all_above = d["all_above"].as_bool().unwrap_or(false);
    let dims_ok = cfg.dims.first() == Some(&16) && cfg.dims.last() == Some(&4096);
    let medians: Vec<String> =
        d["per_n"].as_array().into_iter().flatten().map(|v| format!("{:.2}", v["median_sup"].as_f64().unwrap_or(f64::NAN))).collect();
    Ok((
        all_above && spread < 2.0 && dims_ok,
        format!("median sups [{}] all above 0.5·sqrt(log(n+1)): {all_above}; Dudley spread {spread:.3}", medians.join(", ")),
    ))
}

/// Fraction of held-out trials whose calibrated `q_k*` covers the section at every k.
fn kernel_held_out(out: &RunOutput, base: &bounds::ConstantSet) -> f64 {
    let fam = "kernel/q_star_constant";
    let Some(c) = &out.summary.calibration.constants else { return 0.0 };
    let factor = c.multiplier(fam) / base.multiplier(fam);
    let (_, held) = harness::split_by_trial(&out.records);
    let mut per_trial: BTreeMap<usize, bool> = BTreeMap::new();
    for r in held.iter().filter(|r| r.statistic == "q_star_constant") {
        *per_trial.entry(r.trial).or_insert(true) &= r.measured <= factor * r.bound;
    }
    per_trial.values().filter(|&&b| b).count() as f64 / per_trial.len().max(1) as f64
}

fn criterion_8() -> Check {
    let mut parts = Vec::new();
    let mut any_variant = false;
    let mut monotone = true;
    for variant in [QStarVariant::Section4, QStarVariant::Intro] {
        let mut cfg = config("kernel");
        cfg.settings.q_variant = variant;
        let out = run(&cfg)?;
        let per_n = &out.summary.details["per_n"][0];
        monotone &= per_n["nonincreasing"].as_bool().unwrap_or(false);
        let rate = kernel_held_out(&out, &cfg.constants);
        any_variant |= rate >= 0.9;
        parts.push(format!("{variant:?} held-out {:.0}%", 100.0 * rate));
        if variant == QStarVariant::Section4 {
            let m: Vec<String> = per_n["median_diameter"]
                .as_array()
                .into_iter()
                .flatten()
                .map(|v| format!("{:.3}", v.as_f64().unwrap_or(f64::NAN)))
                .collect();
            parts.insert(0, format!("median diameters [{}]", m.join(", ")));
        }
    }
    Ok((monotone && any_variant, parts.join("; ")))
}

fn criterion_9() -> Check {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, exact) in [("paouris_l1_ball_isotropic", false), ("paouris_rademacher_cube", true)] {
        let out = run(&config(name))?;
        let d = &out.summary.details;
        let spread = d["ratio_spread"].as_f64().unwrap_or(f64::INFINITY);
        let ratios: Vec<f64> = d["per_nk"].as_array().into_iter().flatten().filter_map(|v| v["ratio"].as_f64()).collect();
        pass &= spread < 1.5;
        if exact {
            pass &= ratios.iter().all(|r| (r - 1.0).abs() <= 1e-12);
        }
        parts.push(format!(
            "{name}: H_k/sqrt(n) {:?}, spread {spread:.3}",
            ratios.iter().map(|r| (r * 1e4).round() / 1e4).collect::<Vec<_>>()
        ));
    }
    Ok((pass, parts.join("; ")))
}

fn strip_timing(csv: &str) -> String {
    csv.lines().map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head)).collect::<Vec<_>>().join("\n")
}

fn criterion_10() -> Check {
    let names = [
        "phase2",
        "psphere",
        "tailenv_gaussian",
        "topell_l1_ball_isotropic",
        "counterexample",
        "kernel",
        "paouris_rademacher_cube",
        "gamma_trunc",
    ];
    let dir = tempfile::tempdir()?;
    let mut differing = Vec::new();
    for name in names {
        let mut cfg = config(name);
        cfg.trials = cfg.trials.min(3);
        let mut texts = Vec::new();
        for (rep, threads) in [(0, Some(1)), (1, Some(2))] {
            let out_dir = dir.path().join(format!("{name}-{rep}"));
            harness::write_outputs(&out_dir, &cfg, &harness::run(&cfg, threads)?)?;
            texts.push(strip_timing(&std::fs::read_to_string(out_dir.join("records.csv"))?));
        }
        if texts[0] != texts[1] {
            differing.push(name);
        }
    }
    Ok((differing.is_empty(), format!("{} scenario configs re-run (1 vs 2 threads); differing: {differing:?}", names.len())))
}

fn main() {
    let criteria: [Criterion; 10] = [
        (1, Some(5.0), criterion_1),
        (2, Some(120.0), criterion_2),
        (3, None, criterion_3),
        (4, Some(600.0), criterion_4),
        (5, Some(600.0), criterion_5),
        (6, Some(600.0), criterion_6),
        (7, Some(300.0), criterion_7),
        (8, Some(600.0), criterion_8),
        (9, Some(120.0), criterion_9),
        (10, None, criterion_10),
    ];
    let only: Option<u32> = std::env::var("ORLICZ_LAB_CRITERION").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    let mut ran = 0;
    for (id, budget, check) in criteria {
        if only.is_some_and(|o| o != id) {
            continue;
        }
        ran += 1;
        let t0 = Instant::now();
        let result = check();
        let secs = t0.elapsed().as_secs_f64();
        let in_budget = budget.is_none_or(|b| secs <= b);
        let (pass, detail) = match result {
            Ok((p, d)) => (p && in_budget, d),
            Err(e) => (false, format!("error: {e}")),
        };
        failed += !pass as usize;
        let budget_text = budget.map_or(String::new(), |b| format!(" / {b:.0}s"));
        println!("criterion {id:>2}: {} [{secs:.1}s{budget_text}] {detail}", if pass { "PASS" } else { "FAIL" });
    }
    println!("acceptance: {}/{ran} criteria passed", ran - failed);
    if failed > 0 && std::env::var("ORLICZ_LAB_STRICT_ACCEPTANCE").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
