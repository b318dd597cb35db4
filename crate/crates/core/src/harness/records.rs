//! Experiment records, calibration of envelope multipliers, and log-log fits.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::bounds::ConstantSet;
use crate::error::{param, Error, Result};

/// One measured statistic against one bound.
///
/// `pass` is `measured ≤ bound`, except for lower-reference statistics
/// (see [`is_lower_reference`]) where it is `measured ≥ bound`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub scenario: String,
    pub statistic: String,
    pub n: usize,
    pub k: usize,
    pub trial: usize,
    /// Level, subset size or similar secondary coordinate.
    pub param: Option<f64>,
    pub seed: u64,
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
    pub wall_ms: f64,
}

/// Statistics whose bound is a growth reference from below.
pub fn is_lower_reference(statistic: &str) -> bool {
    statistic.ends_with("_growth")
}

pub fn passes(statistic: &str, measured: f64, bound: f64) -> bool {
    if is_lower_reference(statistic) {
        measured >= bound
    } else {
        measured <= bound
    }
}

impl Record {
    /// Recompute the pass flag from the stored fields.
    pub fn recomputed_pass(&self) -> bool {
        passes(&self.statistic, self.measured, self.bound)
    }

    /// Key of the envelope family this record belongs to.
    pub fn family(&self) -> String {
        format!("{}/{}", self.scenario, self.statistic)
    }
}

pub fn write_records<W: Write>(w: W, records: &[Record]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in records {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_records<R: Read>(r: R) -> Result<Vec<Record>> {
    let mut rd = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for row in rd.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

/// Split by trial: the first half of the distinct trials calibrates, the rest is held out.
pub fn split_by_trial(records: &[Record]) -> (Vec<Record>, Vec<Record>) {
    let trials: BTreeSet<usize> = records.iter().map(|r| r.trial).collect();
    let cut = trials.iter().nth(trials.len().div_ceil(2)).copied().unwrap_or(usize::MAX);
    records.iter().cloned().partition(|r| r.trial < cut)
}

/// Fitted multipliers: for every upper-bound family, the smallest factor
/// making `measured ≤ factor · bound` hold on all calibration records.
/// Records whose bound is not positive and finite are skipped.
pub fn calibrate_constants(calibration: &[Record], base: &ConstantSet) -> Result<ConstantSet> {
    if calibration.is_empty() {
        return param("calibration set is empty");
    }
    let mut out = base.clone();
    let mut fitted: BTreeMap<String, f64> = BTreeMap::new();
    for r in calibration.iter().filter(|r| !is_lower_reference(&r.statistic)) {
        if !(r.bound > 0.0 && r.bound.is_finite()) || !r.measured.is_finite() {
            continue;
        }
        let ratio = r.measured / r.bound;
        let e = fitted.entry(r.family()).or_insert(0.0);
        *e = e.max(ratio);
    }
    if fitted.is_empty() {
        return Err(Error::Degenerate("no calibratable records".into()));
    }
    for (key, m) in fitted {
        // Multipliers compose with any already applied to the recorded bounds.
        let total = out.multiplier(&key) * m.max(f64::MIN_POSITIVE);
        out.multipliers.insert(key, total);
    }
    out.calibrated = true;
    Ok(out)
}

/// Held-out outcome for one family: a group `(n, k, trial)` passes when all of
/// its records pass under the calibrated multiplier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeldOut {
    pub family: String,
    pub multiplier: f64,
    pub groups: usize,
    pub passed: usize,
    pub pass_rate: f64,
}

/// Evaluate held-out records against `calibrated`, whose multipliers are
/// relative to the constants the records were produced with (`base`).
pub fn evaluate_held_out(held: &[Record], base: &ConstantSet, calibrated: &ConstantSet) -> Vec<HeldOut> {
    let mut groups: BTreeMap<String, BTreeMap<(usize, usize, usize), bool>> = BTreeMap::new();
    for r in held.iter().filter(|r| !is_lower_reference(&r.statistic)) {
        let fam = r.family();
        let factor = calibrated.multiplier(&fam) / base.multiplier(&fam);
        let ok = passes(&r.statistic, r.measured, factor * r.bound);
        let g = groups.entry(fam).or_default().entry((r.n, r.k, r.trial)).or_insert(true);
        *g &= ok;
    }
    groups
        .into_iter()
        .map(|(family, g)| {
            let passed = g.values().filter(|&&b| b).count();
            HeldOut {
                multiplier: calibrated.multiplier(&family),
                family,
                groups: g.len(),
                passed,
                pass_rate: passed as f64 / g.len() as f64,
            }
        })
        .collect()
}

/// Ordinary least squares on `(log x, log y)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope.
    pub stderr: f64,
    pub points: usize,
}

pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Result<Fit> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch { expected: xs.len(), got: ys.len() });
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return param("log-log fit needs positive finite values");
    }
    let distinct: BTreeSet<u64> = xs.iter().map(|x| x.to_bits()).collect();
    if distinct.len() < 3 {
        return param("log-log fit needs at least three distinct x values");
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let m = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let stderr = if lx.len() > 2 { (rss / (m - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(Fit { slope, intercept, stderr, points: lx.len() })
}

fn field(r: &Record, name: &str) -> Option<f64> {
    Some(match name {
        "n" => r.n as f64,
        "k" => r.k as f64,
        "trial" => r.trial as f64,
        "param" => r.param?,
        "measured" => r.measured,
        "bound" => r.bound,
        _ => return None,
    })
}

/// Log-log fit of `y` against `x` over records. `y_field` is either a
/// statistic name (its `measured` values are used) or a numeric column.
/// Values are reduced to the median `y` per distinct `x`.
pub fn scaling_fit(records: &[Record], x_field: &str, y_field: &str) -> Result<Fit> {
    let by_stat = records.iter().any(|r| r.statistic == y_field);
    let mut groups: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for r in records {
        let y = if by_stat {
            if r.statistic != y_field {
                continue;
            }
            r.measured
        } else {
            field(r, y_field).ok_or_else(|| Error::Parameter(format!("unknown field {y_field:?}")))?
        };
        let x = field(r, x_field).ok_or_else(|| Error::Parameter(format!("unknown or empty field {x_field:?}")))?;
        groups.entry(x.to_bits()).or_default().push(y);
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = groups.into_iter().map(|(x, ys)| (f64::from_bits(x), crate::stats::median(&ys))).unzip();
    fit_loglog(&xs, &ys)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(stat: &str, trial: usize, measured: f64, bound: f64) -> Record {
        Record {
            scenario: "tailenv".into(),
            statistic: stat.into(),
            n: 8,
            k: 16,
            trial,
            param: None,
            seed: 0,
            measured,
            bound,
            pass: passes(stat, measured, bound),
            wall_ms: 0.0,
        }
    }

    #[test]
    fn calibration_examples() {
        let base = ConstantSet::default();
        let c = calibrate_constants(&[rec("tail_count", 0, 3.0, 1.0)], &base).unwrap();
        assert_eq!(c.multiplier("tailenv/tail_count"), 3.0);
        assert!(c.calibrated);
        let c = calibrate_constants(&[rec("tail_count", 0, 0.5, 1.0), rec("tail_count", 1, 0.9, 1.0)], &base).unwrap();
        assert!(c.multiplier("tailenv/tail_count") <= 1.0);
        assert!(calibrate_constants(&[], &base).is_err());
    }

    #[test]
    fn held_out_groups_need_every_record() {
        let base = ConstantSet::default();
        let cal = calibrate_constants(&[rec("tail_count", 0, 2.0, 1.0)], &base).unwrap();
        let held = vec![rec("tail_count", 1, 1.5, 1.0), rec("tail_count", 1, 2.5, 1.0), rec("tail_count", 2, 1.0, 1.0)];
        let h = evaluate_held_out(&held, &base, &cal);
        assert_eq!(h.len(), 1);
        assert_eq!((h[0].groups, h[0].passed), (2, 1));
    }

    #[test]
    fn fit_examples() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let f = fit_loglog(&xs, &xs.map(|x| 4.0 * x * x)).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept - 4f64.ln()).abs() < 1e-12 && f.stderr < 1e-12);
        let f = fit_loglog(&xs, &[3.0; 4]).unwrap();
        assert!(f.slope.abs() < 1e-12);
        assert!(fit_loglog(&[1.0, 2.0, 3.0], &[1.0, 0.0, 1.0]).is_err());
        assert!(fit_loglog(&[1.0, 1.0, 2.0], &[1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn csv_round_trip_and_split() {
        let mut recs: Vec<Record> = (0..4).map(|t| rec("tail_count", t, 1.0, 2.0)).collect();
        recs[1].param = Some(0.25);
        let mut buf = Vec::new();
        write_records(&mut buf, &recs).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("scenario,statistic,n,k,trial,param,seed,measured,bound,pass,wall_ms\n"));
        assert_eq!(read_records(&buf[..]).unwrap(), recs);
        let (cal, held) = split_by_trial(&recs);
        assert_eq!(cal.len(), 2);
        assert!(held.iter().all(|r| r.trial >= 2));
    }

    #[test]
    fn lower_references_flip_the_comparison() {
        assert!(rec("sup_growth", 0, 2.0, 1.0).pass);
        assert!(!rec("sup_growth", 0, 0.5, 1.0).pass);
    }
}
