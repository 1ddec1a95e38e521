//! Forecast evaluation: log predictive score, CRPS, PIT and set metrics.

use crate::distributions::norm_pdf;
use crate::error::{Error, Result};
use crate::forecast::{PredictiveDensity, SetForecast, SetType};
use crate::rng::{label, substream, Rng};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// `ln 1e-300`, used when the predictive density underflows.
pub const DEFAULT_LPS_FLOOR: f64 = -690.775_527_898_213_7;

/// Log predictive score of one realization. The flag is set when the
/// density underflowed and `floor` was returned instead.
pub fn log_predictive_score(pd: &PredictiveDensity, y: f64, floor: f64) -> Result<(f64, bool)> {
    if !(y >= 0.0) {
        return Err(Error::InvalidParameter(format!("realized value {y} is not a censored outcome")));
    }
    let p = if y == 0.0 {
        pd.pi0
    } else {
        let m = pd.n_draws() as f64;
        pd.mu.iter().zip(&pd.sd).map(|(mu, sd)| norm_pdf(y, *mu, sd * sd)).sum::<f64>() / m
    };
    if p > 0.0 && p.is_finite() {
        Ok((p.ln(), false))
    } else {
        Ok((floor, true))
    }
}

/// A draw of size `M` from the full predictive distribution, sorted: the
/// atom contributes `round(pi0 * M)` exact zeros and the remaining draws
/// resample the positive samples in proportion to their weights
/// (systematic resampling).
pub fn predictive_sample(pd: &PredictiveDensity, rng: &mut Rng) -> Vec<f64> {
    let m = pd.n_draws();
    let n0 = ((pd.pi0 * m as f64).round() as usize).min(m);
    let mut out = vec![0.0; n0];
    let n_pos = m - n0;
    let total: f64 = pd.weights.iter().sum();
    if n_pos > 0 && total > 0.0 {
        let step = total / n_pos as f64;
        let mut u = rng.random::<f64>() * step;
        let mut cum = 0.0;
        let mut j = 0;
        for _ in 0..n_pos {
            while j + 1 < m && cum + pd.weights[j] <= u {
                cum += pd.weights[j];
                j += 1;
            }
            out.push(pd.samples[j]);
            u += step;
        }
    } else if n_pos > 0 {
        // every component is (numerically) all mass at zero
        out.resize(m, 0.0);
    }
    out.sort_by(f64::total_cmp);
    out
}

/// Number of sorted draws `<= y`.
fn count_at_or_below(sorted: &[f64], y: f64) -> usize {
    sorted.partition_point(|&v| v <= y)
}

/// CRPS of the empirical CDF of `sorted` at `y` as a Riemann sum over the
/// step function, split by where `y` falls among the draws.
pub fn crps_riemann(sorted: &[f64], y: f64) -> Result<f64> {
    let m = sorted.len();
    if m == 0 {
        return Err(Error::InvalidParameter("CRPS of an empty sample".into()));
    }
    let mf = m as f64;
    let ms = count_at_or_below(sorted, y);
    let f = |j: usize| j as f64 / mf; // F at the j-th order statistic (1-based)
    let mut s = 0.0;
    if ms == m {
        for j in 2..=m {
            s += f(j - 1).powi(2) * (sorted[j - 1] - sorted[j - 2]);
        }
        s += y - sorted[m - 1];
    } else if ms == 0 {
        s += sorted[0] - y;
        for j in 2..=m {
            s += (f(j - 1) - 1.0).powi(2) * (sorted[j - 1] - sorted[j - 2]);
        }
    } else {
        for j in 2..=ms {
            s += f(j - 1).powi(2) * (sorted[j - 1] - sorted[j - 2]);
        }
        s += f(ms).powi(2) * (y - sorted[ms - 1]);
        s += (f(ms) - 1.0).powi(2) * (sorted[ms] - y);
        for j in ms + 2..=m {
            s += (f(j - 1) - 1.0).powi(2) * (sorted[j - 1] - sorted[j - 2]);
        }
    }
    Ok(s)
}

/// CRPS via `(1/M) sum |y_j - y| - (1/M^2) sum_{i<j} (y_(j) - y_(i))`,
/// with the pair sum taken in its order-statistic form.
pub fn crps_pairwise(samples: &[f64], y: f64) -> Result<f64> {
    let m = samples.len();
    if m == 0 {
        return Err(Error::InvalidParameter("CRPS of an empty sample".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mf = m as f64;
    let abs: f64 = sorted.iter().map(|v| (v - y).abs()).sum();
    let pairs: f64 = sorted
        .iter()
        .enumerate()
        .map(|(k, v)| (2.0 * (k + 1) as f64 - mf - 1.0) * v)
        .sum();
    Ok(abs / mf - pairs / (mf * mf))
}

/// Empirical CDF of the predictive draws at `y`.
pub fn pit(sorted: &[f64], y: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    count_at_or_below(sorted, y) as f64 / sorted.len() as f64
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SetTypeFractions {
    pub zero_only: f64,
    pub zero_to_b: f64,
    pub zero_and_interval: f64,
    pub empty: f64,
    pub multi_segment: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetScores {
    pub coverage_freq: f64,
    pub avg_length: f64,
    pub set_type_fractions: SetTypeFractions,
}

pub fn evaluate_sets(sets: &[SetForecast], y: &[f64]) -> Result<SetScores> {
    if sets.len() != y.len() {
        return Err(Error::Dimension(format!("{} sets for {} realizations", sets.len(), y.len())));
    }
    let n = sets.len().max(1) as f64;
    let mut hits = 0usize;
    let mut length = 0.0;
    let mut fr = SetTypeFractions::default();
    for (s, &v) in sets.iter().zip(y) {
        hits += s.contains(v) as usize;
        length += s.length();
        *match s.set_type() {
            SetType::ZeroOnly => &mut fr.zero_only,
            SetType::ZeroToB => &mut fr.zero_to_b,
            SetType::ZeroAndInterval => &mut fr.zero_and_interval,
            SetType::Empty => &mut fr.empty,
            SetType::MultiSegment => &mut fr.multi_segment,
        } += 1.0 / n;
    }
    Ok(SetScores { coverage_freq: hits as f64 / n, avg_length: length / n, set_type_fractions: fr })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitScore {
    pub lps: f64,
    pub lps_floored: bool,
    pub crps: f64,
    pub pit: f64,
}

/// Scores every unit's density forecast. The CRPS sample of unit `i` uses
/// substream `(seed, SCORING, i)`.
pub fn score_densities(pds: &[PredictiveDensity], y: &[f64], seed: u64, lps_floor: f64) -> Result<Vec<UnitScore>> {
    if pds.len() != y.len() {
        return Err(Error::Dimension(format!("{} forecasts for {} realizations", pds.len(), y.len())));
    }
    (0..pds.len())
        .into_par_iter()
        .map(|i| {
            let (lps, lps_floored) = log_predictive_score(&pds[i], y[i], lps_floor)?;
            let mut rng = substream(seed, &[label::SCORING, i as u64]);
            let sample = predictive_sample(&pds[i], &mut rng);
            Ok(UnitScore { lps, lps_floored, crps: crps_riemann(&sample, y[i])?, pit: pit(&sample, y[i]) })
        })
        .collect()
}

/// Cross-sectional averages for one forecast configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub label: String,
    pub n_units: usize,
    pub lps: f64,
    pub crps: f64,
    pub lps_floored: usize,
    pub coverage_freq: Option<f64>,
    pub avg_length: Option<f64>,
    pub set_type_fractions: Option<SetTypeFractions>,
}

impl ScoreReport {
    pub fn new(label: &str, units: &[UnitScore], sets: Option<&SetScores>) -> Self {
        let n = units.len();
        let mean = |f: fn(&UnitScore) -> f64| units.iter().map(f).sum::<f64>() / n.max(1) as f64;
        Self {
            label: label.to_string(),
            n_units: n,
            lps: mean(|u| u.lps),
            crps: mean(|u| u.crps),
            lps_floored: units.iter().filter(|u| u.lps_floored).count(),
            coverage_freq: sets.map(|s| s.coverage_freq),
            avg_length: sets.map(|s| s.avg_length),
            set_type_fractions: sets.map(|s| s.set_type_fractions),
        }
    }
}

pub const SCORE_TABLE_HEADER: [&str; 11] = [
    "label",
    "lps",
    "crps",
    "coverage",
    "length",
    "frac_zero_only",
    "frac_zero_to_b",
    "frac_zero_and_interval",
    "frac_empty",
    "frac_multi_segment",
    "lps_floored",
];

/// Writes reports as a score table, one row per configuration.
pub fn write_score_table<W: std::io::Write>(reports: &[ScoreReport], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SCORE_TABLE_HEADER)?;
    let opt = |v: Option<f64>| v.map(crate::panel::fmt_f64).unwrap_or_default();
    for r in reports {
        let fr = r.set_type_fractions;
        w.write_record([
            r.label.clone(),
            crate::panel::fmt_f64(r.lps),
            crate::panel::fmt_f64(r.crps),
            opt(r.coverage_freq),
            opt(r.avg_length),
            opt(fr.map(|f| f.zero_only)),
            opt(fr.map(|f| f.zero_to_b)),
            opt(fr.map(|f| f.zero_and_interval)),
            opt(fr.map(|f| f.empty)),
            opt(fr.map(|f| f.multi_segment)),
            r.lps_floored.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
