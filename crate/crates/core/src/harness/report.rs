use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use super::config::{ExperimentConfig, Scenario};
use super::records::{self, is_lower_reference, Fit, HeldOut, Record};
use super::scenarios::{ClassScale, DimContext};
use crate::bounds::ConstantSet;
use crate::error::Result;
use crate::stats::{mean_stderr, median, quantile};

/// Calibration is attempted only with at least this many distinct trials.
pub const MIN_CALIBRATION_TRIALS: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PassRate {
    pub records: usize,
    pub passed: usize,
    pub rate: f64,
}

/// Empirical quantiles of one statistic over trials.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroupQuantile {
    pub statistic: String,
    pub n: usize,
    pub k: usize,
    pub param: Option<f64>,
    pub trials: usize,
    pub median: f64,
    /// Empirical `(1 − δ)`-quantile over trials.
    pub upper: f64,
    pub median_bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NamedFit {
    pub name: String,
    pub x: String,
    pub y: String,
    pub n: Option<usize>,
    pub fit: Option<Fit>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Calibration {
    pub status: String,
    pub calibration_trials: usize,
    pub held_out_trials: usize,
    pub constants: Option<ConstantSet>,
    pub held_out: Vec<HeldOut>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DimScale {
    pub n: usize,
    pub scale: ClassScale,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub scenario: String,
    pub measure: String,
    pub seed: u64,
    pub trials: usize,
    pub dims: Vec<usize>,
    pub p: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub constants: ConstantSet,
    pub scales: Vec<DimScale>,
    pub pass_rates: BTreeMap<String, PassRate>,
    /// Probabilities are reported as empirical quantiles over trials.
    pub quantiles: Vec<GroupQuantile>,
    pub fits: Vec<NamedFit>,
    pub calibration: Calibration,
    pub details: Value,
}

/// `(statistic, n, k, param bits)`.
type GroupKey = (String, usize, usize, Option<u64>);

fn group_quantiles(records: &[Record], delta: f64) -> Vec<GroupQuantile> {
    let mut groups: BTreeMap<GroupKey, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in records {
        let g = groups.entry((r.statistic.clone(), r.n, r.k, r.param.map(f64::to_bits))).or_default();
        g.0.push(r.measured);
        g.1.push(r.bound);
    }
    let mut out: Vec<GroupQuantile> = groups
        .into_iter()
        .map(|((statistic, n, k, param), (m, b))| GroupQuantile {
            statistic,
            n,
            k,
            param: param.map(f64::from_bits),
            trials: m.len(),
            median: median(&m),
            upper: quantile(&m, 1.0 - delta),
            median_bound: median(&b),
        })
        .collect();
    out.sort_by(|a, b| {
        (&a.statistic, a.n, a.k).cmp(&(&b.statistic, b.n, b.k)).then(a.param.unwrap_or(0.0).total_cmp(&b.param.unwrap_or(0.0)))
    });
    out
}

fn named_fit(name: &str, x: &str, y: &str, n: Option<usize>, result: Result<Fit>) -> NamedFit {
    let (fit, error) = match result {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    NamedFit { name: name.into(), x: x.into(), y: y.into(), n, fit, error }
}

fn calibrate(config: &ExperimentConfig, records: &[Record]) -> Calibration {
    let trials: BTreeSet<usize> = records.iter().map(|r| r.trial).collect();
    let (cal, held) = records::split_by_trial(records);
    let count = |rs: &[Record]| rs.iter().map(|r| r.trial).collect::<BTreeSet<_>>().len();
    let mut out = Calibration {
        status: String::new(),
        calibration_trials: count(&cal),
        held_out_trials: count(&held),
        constants: None,
        held_out: Vec::new(),
    };
    if trials.len() < MIN_CALIBRATION_TRIALS {
        out.status = format!("skipped: {} trials, calibration needs at least {MIN_CALIBRATION_TRIALS}", trials.len());
        return out;
    }
    match records::calibrate_constants(&cal, &config.constants) {
        Ok(c) => {
            out.held_out = records::evaluate_held_out(&held, &config.constants, &c);
            out.constants = Some(c);
            out.status = "calibrated on the first half of the trials, evaluated on the rest".into();
        }
        Err(e) => out.status = format!("failed: {e}"),
    }
    out
}

/// Median of `statistic` per `(n, k)`.
fn medians(records: &[Record], statistic: &str) -> BTreeMap<(usize, usize), f64> {
    let mut g: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.statistic == statistic) {
        g.entry((r.n, r.k)).or_default().push(r.measured);
    }
    g.into_iter().map(|(key, v)| (key, median(&v))).collect()
}

fn means(records: &[Record], statistic: &str) -> BTreeMap<(usize, usize), f64> {
    let mut g: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.statistic == statistic) {
        g.entry((r.n, r.k)).or_default().push(r.measured);
    }
    g.into_iter().map(|(key, v)| (key, mean_stderr(&v).0)).collect()
}

fn spread(values: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = values.fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    hi / lo
}

fn by_n(records: &[Record], n: usize) -> Vec<Record> {
    records.iter().filter(|r| r.n == n).cloned().collect()
}

pub(super) fn summarize(config: &ExperimentConfig, contexts: &[DimContext], records: &[Record]) -> Summary {
    let mut pass_rates: BTreeMap<String, PassRate> = BTreeMap::new();
    for r in records {
        let e = pass_rates.entry(r.family()).or_insert(PassRate { records: 0, passed: 0, rate: 0.0 });
        e.records += 1;
        e.passed += r.pass as usize;
    }
    for e in pass_rates.values_mut() {
        e.rate = e.passed as f64 / e.records as f64;
    }
    let mut fits = Vec::new();
    let details = match config.scenario {
        Scenario::Phase2 | Scenario::Psphere => {
            let med = medians(records, "deviation");
            let mut k0 = BTreeMap::new();
            for ctx in contexts {
                let first = ctx.ks.iter().copied().find(|&k| med.get(&(ctx.n, k)).is_some_and(|&m| m < config.epsilon));
                k0.insert(ctx.n, first);
                fits.push(named_fit(
                    "deviation_vs_k",
                    "k",
                    "deviation",
                    Some(ctx.n),
                    records::scaling_fit(&by_n(records, ctx.n), "k", "deviation"),
                ));
            }
            let (xs, ys): (Vec<f64>, Vec<f64>) = k0.iter().filter_map(|(&n, k)| k.map(|k| (n as f64, k as f64))).unzip();
            fits.push(named_fit("k0_vs_n", "n", "k0", None, records::fit_loglog(&xs, &ys)));
            json!({ "k0": k0, "k0_rule": "smallest grid k whose median deviation over trials is below epsilon" })
        }
        Scenario::Counterexample => {
            let med = medians(records, "sup_growth");
            let dudley: BTreeMap<usize, f64> = contexts.iter().filter_map(|c| c.dudley.map(|d| (c.n, d))).collect();
            let per_n: Vec<Value> = contexts
                .iter()
                .map(|c| {
                    let m = med.get(&(c.n, 1)).copied().unwrap_or(f64::NAN);
                    let reference = config.settings.growth_factor * ((c.n + 1) as f64).ln().sqrt();
                    json!({ "n": c.n, "median_sup": m, "reference": reference, "above": m >= reference, "dudley": dudley.get(&c.n) })
                })
                .collect();
            let (xs, ys): (Vec<f64>, Vec<f64>) = med.iter().map(|(&(n, _), &m)| (n as f64, m)).unzip();
            fits.push(named_fit("sup_vs_n", "n", "sup_growth", None, records::fit_loglog(&xs, &ys)));
            json!({
                "per_n": per_n,
                "all_above": per_n.iter().all(|v| v["above"] == json!(true)),
                "dudley_spread": spread(dudley.values().copied()),
            })
        }
        Scenario::Kernel => {
            let med = medians(records, "section_diameter");
            let per_n: Vec<Value> = contexts
                .iter()
                .map(|c| {
                    let m: Vec<f64> = c.ks.iter().map(|&k| med[&(c.n, k)]).collect();
                    let nonincreasing = m.windows(2).all(|w| w[1] <= w[0]);
                    json!({ "n": c.n, "ks": c.ks, "median_diameter": m, "nonincreasing": nonincreasing })
                })
                .collect();
            for c in contexts {
                fits.push(named_fit(
                    "diameter_vs_k",
                    "k",
                    "section_diameter",
                    Some(c.n),
                    records::scaling_fit(&by_n(records, c.n), "k", "section_diameter"),
                ));
            }
            json!({ "per_n": per_n, "q_variant": config.settings.q_variant, "radius_convention": "section radius diam/2 compared with the stable q_k* crossing" })
        }
        Scenario::Paouris => {
            let mean = means(records, "h_k");
            let ratio: Vec<Value> =
                mean.iter().map(|(&(n, k), &h)| json!({ "n": n, "k": k, "h_k": h, "ratio": h / (n as f64).sqrt() })).collect();
            let (xs, ys): (Vec<f64>, Vec<f64>) = mean.iter().map(|(&(n, _), &h)| (n as f64, h)).unzip();
            fits.push(named_fit("h_k_vs_n", "n", "h_k", None, records::fit_loglog(&xs, &ys)));
            json!({ "per_nk": ratio, "ratio_spread": spread(mean.iter().map(|(&(n, _), &h)| h / (n as f64).sqrt())) })
        }
        Scenario::GammaTrunc => {
            let gamma = means(records, "two_convex");
            let ell = means(records, "ell_e");
            let per_n: Vec<Value> = gamma
                .iter()
                .map(|(&(n, k), &g)| {
                    let nf = n as f64;
                    let e = ell.get(&(n, k)).copied().unwrap_or(f64::NAN);
                    let radius = config.settings.truncation_factor * nf.sqrt();
                    json!({ "n": n, "two_convex": g, "ratio_sqrt_n_log_n": g / (nf * nf.ln()).sqrt(), "ell_e": e, "ell_e_over_radius": e / radius })
                })
                .collect();
            let (xs, ys): (Vec<f64>, Vec<f64>) = gamma.iter().map(|(&(n, _), &g)| (n as f64, g)).unzip();
            fits.push(named_fit("two_convex_vs_n", "n", "two_convex", None, records::fit_loglog(&xs, &ys)));
            json!({ "per_n": per_n })
        }
        Scenario::Tailenv | Scenario::Topell => {
            let mut worst: BTreeMap<String, f64> = BTreeMap::new();
            for r in records.iter().filter(|r| !is_lower_reference(&r.statistic) && r.bound > 0.0) {
                let w = worst.entry(r.statistic.clone()).or_insert(0.0);
                *w = w.max(r.measured / r.bound);
            }
            json!({ "max_ratio": worst, "tail_form": config.settings.tail_form })
        }
    };
    Summary {
        scenario: config.scenario.name().into(),
        measure: config.measure.family.name().into(),
        seed: config.seed,
        trials: config.trials,
        dims: config.dims.clone(),
        p: config.p,
        epsilon: config.epsilon,
        delta: config.delta,
        constants: config.constants.clone(),
        scales: contexts.iter().filter_map(|c| c.scale.map(|scale| DimScale { n: c.n, scale })).collect(),
        pass_rates,
        quantiles: group_quantiles(records, config.delta),
        fits,
        calibration: calibrate(config, records),
        details,
    }
}

const PLOT_SCRIPT: &str = r#"# Plots every statistic in groups.csv: median and (1-delta)-quantile over
# trials with the median bound, against param when present, else k.
import csv
import collections
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

rows = list(csv.DictReader(open("groups.csv")))
by_stat = collections.defaultdict(list)
for r in rows:
    by_stat[r["statistic"]].append(r)
for stat, rs in by_stat.items():
    use_param = all(r["param"] != "" for r in rs)
    fig, ax = plt.subplots()
    series = collections.defaultdict(list)
    for r in rs:
        series[(r["n"], r["k"] if use_param else "")].append(r)
    for (n, k), pts in sorted(series.items()):
        xs = [float(p["param"] if use_param else p["k"]) for p in pts]
        label = f"n={n}" + (f", k={k}" if k else "")
        ax.plot(xs, [float(p["median"]) for p in pts], "o-", label=label + " median")
        ax.plot(xs, [float(p["upper"]) for p in pts], ":", label=label + " upper")
        ax.plot(xs, [float(p["median_bound"]) for p in pts], "--", label=label + " bound")
    if all(float(r["median"]) > 0 and float(r["param"] if use_param else r["k"] or 0) > 0 for r in rs):
        ax.set_xscale("log")
        ax.set_yscale("log")
    ax.set_xlabel("param" if use_param else "k")
    ax.set_title(stat)
    ax.legend(fontsize=6)
    fig.savefig(f"{stat}.png", dpi=120)
"#;

pub(super) fn write_plots(dir: &Path, config: &ExperimentConfig, summary: &Summary) -> Result<()> {
    let mut w = csv::Writer::from_path(dir.join("groups.csv"))?;
    w.write_record(["scenario", "statistic", "n", "k", "param", "trials", "median", "upper", "median_bound"])?;
    for g in &summary.quantiles {
        w.write_record([
            config.scenario.name().to_string(),
            g.statistic.clone(),
            g.n.to_string(),
            g.k.to_string(),
            g.param.map(|p| p.to_string()).unwrap_or_default(),
            g.trials.to_string(),
            g.median.to_string(),
            g.upper.to_string(),
            g.median_bound.to_string(),
        ])?;
    }
    w.flush()?;
    std::fs::write(dir.join("plot.py"), PLOT_SCRIPT)?;
    Ok(())
}
