//! Chain convergence summaries, posterior predictive checks and the
//! intensive/extensive decomposition of a regressor change.

use crate::distributions::{draw_log_categorical, std_normal};
use crate::error::{Error, Result};
use crate::gibbs::PosteriorDraws;
use crate::panel::{censor, dot, fmt_f64, simulate_panel, CommonParams, PanelData, UnitParams};
use crate::priors::LambdaMixture;
use crate::rng::{derive_seed, label, substream};
use crate::store::quantile;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Sample autocorrelations at lags `0..=max_lag`.
pub fn acf(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return vec![];
    }
    let m = x.iter().sum::<f64>() / n as f64;
    let d: Vec<f64> = x.iter().map(|v| v - m).collect();
    let c0 = d.iter().map(|v| v * v).sum::<f64>();
    (0..=max_lag.min(n - 1))
        .map(|k| {
            if c0 == 0.0 {
                return if k == 0 { 1.0 } else { 0.0 };
            }
            d[..n - k].iter().zip(&d[k..]).map(|(a, b)| a * b).sum::<f64>() / c0
        })
        .collect()
}

/// Effective sample size with Geyer's initial monotone sequence estimator.
pub fn effective_sample_size(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 4 {
        return n as f64;
    }
    let m = x.iter().sum::<f64>() / n as f64;
    let d: Vec<f64> = x.iter().map(|v| v - m).collect();
    let c0 = d.iter().map(|v| v * v).sum::<f64>();
    if c0 == 0.0 {
        return n as f64;
    }
    // Lags are computed on demand; the sum stops well before n for any mixing chain.
    let r = |k: usize| d[..n - k].iter().zip(&d[k..]).map(|(a, b)| a * b).sum::<f64>() / c0;
    let mut tau = -1.0;
    let mut prev = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < n {
        let g = r(2 * k) + r(2 * k + 1);
        if g <= 0.0 {
            break;
        }
        let g = g.min(prev);
        tau += 2.0 * g;
        prev = g;
        k += 1;
    }
    n as f64 / tau.max(1.0 / n as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterDiagnostics {
    pub parameter: String,
    pub mean: f64,
    pub ess: f64,
    pub acf: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub parameters: Vec<ParameterDiagnostics>,
    /// Mean variance-step acceptance rate over retained sweeps.
    pub accept_rate: f64,
}

pub const ACF_MAX_LAG: usize = 100;

/// ACF to lag 100 and ESS of `rho` and each `beta_j`.
pub fn chain_diagnostics(draws: &PosteriorDraws) -> ChainReport {
    let mut series = vec![("rho".to_string(), draws.rho.clone())];
    for j in 0..draws.n_x {
        series.push((format!("beta{}", j + 1), (0..draws.n_draws()).map(|d| draws.beta_at(d)[j]).collect()));
    }
    let parameters = series
        .into_iter()
        .map(|(parameter, s)| ParameterDiagnostics {
            parameter,
            mean: s.iter().sum::<f64>() / s.len().max(1) as f64,
            ess: effective_sample_size(&s),
            acf: acf(&s, ACF_MAX_LAG),
        })
        .collect();
    let kept: Vec<f64> = draws
        .trace
        .accept_rate
        .iter()
        .skip(draws.settings.burn_in)
        .copied()
        .filter(|v| v.is_finite())
        .collect();
    let accept_rate = if kept.is_empty() { f64::NAN } else { kept.iter().sum::<f64>() / kept.len() as f64 };
    ChainReport { parameters, accept_rate }
}

impl ChainReport {
    pub fn write_summary<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["parameter", "mean", "ess", "acf1", "accept_rate"])?;
        for p in &self.parameters {
            w.write_record([
                p.parameter.clone(),
                fmt_f64(p.mean),
                fmt_f64(p.ess),
                fmt_f64(p.acf.get(1).copied().unwrap_or(f64::NAN)),
                fmt_f64(self.accept_rate),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_acf<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["parameter", "lag", "acf"])?;
        for p in &self.parameters {
            for (k, v) in p.acf.iter().enumerate() {
                w.write_record([p.parameter.clone(), k.to_string(), fmt_f64(*v)])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Simulates `n_hairlines` panels `Y_{0:T+1}` from the posterior predictive
/// distribution, each from a distinct posterior draw (evenly spaced): draw
/// `(rho, beta, xi)`, then `lambda_i`, `y*_{i0}` and `sigma_i^2` given `xi`
/// and `x_{i,-1}`, then the panel given the observed regressors.
pub fn ppc_simulate(draws: &PosteriorDraws, data: &PanelData, n_hairlines: usize, seed: u64) -> Result<Vec<PanelData>> {
    if n_hairlines == 0 {
        return Ok(vec![]);
    }
    let m = draws.n_draws();
    if n_hairlines > m {
        return Err(Error::InvalidParameter(format!("{n_hairlines} hairlines from {m} draws")));
    }
    let n = data.n_units;
    let k = data.n_x;
    let t = data.n_periods;
    // regressors for t = -1..=T+1; the T+1 row is never used by the law of motion
    let mut x = Vec::with_capacity(n * (t + 3) * k);
    for i in 0..n {
        for s in -1..=(t as isize) {
            x.extend_from_slice(data.x_row(i, s));
        }
        x.extend_from_slice(data.x_row(i, t as isize));
    }
    (0..n_hairlines)
        .into_par_iter()
        .map(|h| {
            let j = h * m / n_hairlines;
            let xi = draws.xi_at(j)?;
            let mut rng = substream(seed, &[label::PPC, h as u64]);
            let mut lambda = Vec::with_capacity(n);
            let mut sigma2 = Vec::with_capacity(n);
            let mut y0 = Vec::with_capacity(n);
            let ln_pi: Vec<f64> = xi.pi_lambda.iter().map(|p| p.ln()).collect();
            let ln_pi_s: Option<Vec<f64>> = xi.sigma.as_ref().map(|s| s.pi.iter().map(|p| p.ln()).collect());
            for i in 0..n {
                let z: Vec<f64> = std::iter::once(1.0).chain(data.x_row(i, -1).iter().copied()).collect();
                let c = draw_log_categorical(&ln_pi, &mut rng)?;
                let l = match &xi.lambda {
                    LambdaMixture::Re { phi, sigma2 } => phi[c] + sigma2[c].sqrt() * std_normal(&mut rng),
                    LambdaMixture::Cre(comp) => {
                        let mean = comp[c].mean_at(&z);
                        mean[0] + comp[c].sigma[0][0].sqrt() * std_normal(&mut rng)
                    }
                    LambdaMixture::Pooled => draws.lambda_at(j, 0),
                };
                let (m0, v0) = xi.y0_given_lambda(c, l, &z);
                lambda.push(l);
                y0.push(m0 + v0.sqrt() * std_normal(&mut rng));
                sigma2.push(match (&xi.sigma, &ln_pi_s) {
                    (Some(s), Some(lp)) => {
                        let c = draw_log_categorical(lp, &mut rng)?;
                        (s.psi[c] + s.omega2[c].sqrt() * std_normal(&mut rng)).exp()
                    }
                    _ => draws.sigma2_at(j, 0),
                });
            }
            let common = CommonParams { rho: draws.rho[j], beta: draws.beta_at(j).to_vec() };
            let (_, mut panel) = simulate_panel(
                &UnitParams { lambda, sigma2 },
                &common,
                &y0,
                &x,
                t + 1,
                derive_seed(seed, &[label::PPC, h as u64, 1]),
            )?;
            panel.unit_ids = data.unit_ids.clone();
            Ok(panel)
        })
        .collect()
}

/// Observed rows `y_{i,0:T}`, extended by the first holdout period when one
/// is present.
pub fn observed_rows(data: &PanelData) -> Vec<Vec<f64>> {
    (0..data.n_units)
        .map(|i| {
            let mut r = data.y_row(i).to_vec();
            if let Some(v) = data.holdout(i, 1) {
                r.push(v);
            }
            r
        })
        .collect()
}

fn panel_rows(p: &PanelData, len: usize) -> Vec<Vec<f64>> {
    (0..p.n_units).map(|i| p.y_row(i)[..len].to_vec()).collect()
}

/// Pearson correlation of `(y_{t-1}, y_t)` over pairs with both values
/// positive; needs at least three pairs.
pub fn autocorr_both_positive(row: &[f64]) -> Option<f64> {
    let pairs: Vec<(f64, f64)> = row.windows(2).filter(|w| w[0] > 0.0 && w[1] > 0.0).map(|w| (w[0], w[1])).collect();
    if pairs.len() < 3 {
        return None;
    }
    let n = pairs.len() as f64;
    let (ma, mb) = (pairs.iter().map(|p| p.0).sum::<f64>() / n, pairs.iter().map(|p| p.1).sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (a, b) in &pairs {
        sab += (a - ma) * (b - mb);
        saa += (a - ma) * (a - ma);
        sbb += (b - mb) * (b - mb);
    }
    (saa > 0.0 && sbb > 0.0).then(|| sab / (saa * sbb).sqrt())
}

/// Positive runs of a path as `(start, end, preceded_by_zero, followed_by_zero)`.
fn positive_runs(row: &[f64]) -> Vec<(usize, usize, bool, bool)> {
    let mut out = Vec::new();
    let mut t = 0;
    while t < row.len() {
        if row[t] > 0.0 {
            let s = t;
            while t + 1 < row.len() && row[t + 1] > 0.0 {
                t += 1;
            }
            out.push((s, t, s > 0, t + 1 < row.len()));
        }
        t += 1;
    }
    out
}

/// Mean of the observations that follow a zero, up to the next zero.
pub fn mean_after_zero(row: &[f64]) -> Option<f64> {
    run_mean(row, |r| r.2)
}

/// Mean of the observations that precede a zero, back to the previous zero.
pub fn mean_before_zero(row: &[f64]) -> Option<f64> {
    run_mean(row, |r| r.3)
}

fn run_mean(row: &[f64], keep: fn(&(usize, usize, bool, bool)) -> bool) -> Option<f64> {
    let vals: Vec<f64> =
        positive_runs(row).iter().filter(|r| keep(r)).flat_map(|r| row[r.0..=r.1].iter().copied()).collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

/// Minimum number of usable ratios for [`robust_autocorr`].
pub const ROBUST_ACF_MIN_PAIRS: usize = 4;

/// Median of the ratios `d_t / d_{t-1}` of deviations from the unit's
/// median, clamped to `[-1, 1]`; requires enough non-zero deviations.
pub fn robust_autocorr(row: &[f64]) -> Option<f64> {
    let mut s = row.to_vec();
    s.sort_by(f64::total_cmp);
    let med = quantile(&s, 0.5);
    let d: Vec<f64> = row.iter().map(|v| v - med).collect();
    let mut ratios: Vec<f64> = d.windows(2).filter(|w| w[0] != 0.0).map(|w| w[1] / w[0]).collect();
    if ratios.len() < ROBUST_ACF_MIN_PAIRS {
        return None;
    }
    ratios.sort_by(f64::total_cmp);
    Some(quantile(&ratios, 0.5).clamp(-1.0, 1.0))
}

/// Gaussian kernel density on `grid` with Silverman's bandwidth.
pub fn kde(values: &[f64], grid: &[f64]) -> Vec<f64> {
    let n = values.len();
    if n < 2 {
        return vec![0.0; grid.len()];
    }
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let mean = s.iter().sum::<f64>() / n as f64;
    let sd = (s.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt();
    let iqr = (quantile(&s, 0.75) - quantile(&s, 0.25)) / 1.34;
    let spread = if iqr > 0.0 { sd.min(iqr) } else { sd };
    let h = (0.9 * spread * (n as f64).powf(-0.2)).max(1e-8);
    grid.iter()
        .map(|g| {
            s.iter().map(|v| (-0.5 * ((g - v) / h).powi(2)).exp()).sum::<f64>()
                / (n as f64 * h * (2.0 * std::f64::consts::PI).sqrt())
        })
        .collect()
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

pub const PPC_STATS: [&str; 7] = [
    "density_positive_yT1",
    "zero_fraction_yT1",
    "zero_count_histogram",
    "autocorr_both_positive",
    "mean_after_zero",
    "mean_before_zero",
    "robust_autocorr",
];

/// One checked statistic: its observed value on `grid` and one replicated
/// value per hairline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PpcStatistic {
    pub name: String,
    pub grid: Vec<f64>,
    pub observed: Vec<f64>,
    pub replicated: Vec<Vec<f64>>,
}

const KDE_POINTS: usize = 101;

fn per_unit(rows: &[Vec<f64>], f: fn(&[f64]) -> Option<f64>) -> Vec<f64> {
    rows.iter().filter_map(|r| f(r)).collect()
}

fn stat_on(name: &str, rows: &[Vec<f64>], grid: &[f64]) -> Vec<f64> {
    let last = |r: &Vec<f64>| *r.last().expect("non-empty row");
    match name {
        "density_positive_yT1" => kde(&rows.iter().map(last).filter(|v| *v > 0.0).collect::<Vec<_>>(), grid),
        "zero_fraction_yT1" => vec![rows.iter().filter(|r| last(r) == 0.0).count() as f64 / rows.len() as f64],
        "zero_count_histogram" => {
            let mut h = vec![0.0; grid.len()];
            for r in rows {
                h[r.iter().filter(|v| **v == 0.0).count()] += 1.0 / rows.len() as f64;
            }
            h
        }
        "autocorr_both_positive" => kde(&per_unit(rows, autocorr_both_positive), grid),
        "mean_after_zero" => kde(&per_unit(rows, mean_after_zero), grid),
        "mean_before_zero" => kde(&per_unit(rows, mean_before_zero), grid),
        "robust_autocorr" => kde(&per_unit(rows, robust_autocorr), grid),
        _ => unreachable!("unknown statistic"),
    }
}

fn grid_for(name: &str, obs: &[Vec<f64>]) -> Vec<f64> {
    let width = obs[0].len();
    let positive_max = |vals: Vec<f64>| {
        let mut v = vals;
        v.sort_by(f64::total_cmp);
        let hi = if v.is_empty() { 1.0 } else { quantile(&v, 0.99) * 1.5 };
        linspace(0.0, hi.max(1e-6), KDE_POINTS)
    };
    match name {
        "density_positive_yT1" => positive_max(obs.iter().map(|r| r[width - 1]).filter(|v| *v > 0.0).collect()),
        "zero_fraction_yT1" => vec![0.0],
        "zero_count_histogram" => (0..=width).map(|k| k as f64).collect(),
        "mean_after_zero" => positive_max(per_unit(obs, mean_after_zero)),
        "mean_before_zero" => positive_max(per_unit(obs, mean_before_zero)),
        _ => linspace(-1.0, 1.0, KDE_POINTS),
    }
}

/// Posterior predictive checks for the named statistics (all of
/// [`PPC_STATS`] if `names` is empty). Replicated panels are cut to the
/// observed width.
pub fn posterior_predictive_checks(
    draws: &PosteriorDraws,
    data: &PanelData,
    n_hairlines: usize,
    names: &[String],
    seed: u64,
) -> Result<Vec<PpcStatistic>> {
    let names: Vec<String> =
        if names.is_empty() { PPC_STATS.iter().map(|s| s.to_string()).collect() } else { names.to_vec() };
    if let Some(bad) = names.iter().find(|n| !PPC_STATS.contains(&n.as_str())) {
        return Err(Error::InvalidParameter(format!("unknown statistic {bad:?}")));
    }
    let obs = observed_rows(data);
    let width = obs[0].len();
    let reps: Vec<Vec<Vec<f64>>> =
        ppc_simulate(draws, data, n_hairlines, seed)?.iter().map(|p| panel_rows(p, width)).collect();
    Ok(names
        .iter()
        .map(|name| {
            let grid = grid_for(name, &obs);
            PpcStatistic {
                name: name.clone(),
                observed: stat_on(name, &obs, &grid),
                replicated: reps.iter().map(|r| stat_on(name, r, &grid)).collect(),
                grid,
            }
        })
        .collect())
}

/// Observed value and the 5/50/95% quantiles of the replicated values at
/// every grid point.
pub fn write_ppc_summary<W: Write>(stats: &[PpcStatistic], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["statistic", "grid", "observed", "rep_q05", "rep_q50", "rep_q95"])?;
    for s in stats {
        for (g, x) in s.grid.iter().enumerate() {
            let mut r: Vec<f64> = s.replicated.iter().map(|v| v[g]).collect();
            r.sort_by(f64::total_cmp);
            w.write_record([
                s.name.clone(),
                fmt_f64(*x),
                fmt_f64(s.observed[g]),
                fmt_f64(quantile(&r, 0.05)),
                fmt_f64(quantile(&r, 0.5)),
                fmt_f64(quantile(&r, 0.95)),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Every replicated curve, one row per (statistic, hairline, grid point).
pub fn write_ppc_hairlines<W: Write>(stats: &[PpcStatistic], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["statistic", "hairline", "grid", "value"])?;
    for s in stats {
        for (h, rep) in s.replicated.iter().enumerate() {
            for (x, v) in s.grid.iter().zip(rep) {
                w.write_record([s.name.clone(), h.to_string(), fmt_f64(*x), fmt_f64(*v)])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Intensive (`I`) and extensive (`II`) parts of `(y~ - y) / dx` for one
/// draw, where `y~` uses `x_T + iota * dx`.
pub fn decompose_effect(mean: f64, beta_iota: f64, delta_x: f64, u: f64) -> (f64, f64) {
    let base = mean + u;
    let moved = base + beta_iota * delta_x;
    let on = |v: f64| if v > 0.0 { 1.0 } else { 0.0 };
    (beta_iota * on(base), moved / delta_x * (on(moved) - on(base)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreatmentSummary {
    pub unit_id: String,
    pub term_i_mean: f64,
    pub term_i_q05: f64,
    pub term_i_q95: f64,
    pub term_ii_mean: f64,
    pub term_ii_q05: f64,
    pub term_ii_q95: f64,
    /// Posterior mean of `lambda_i / sigma_i`, the ordering used for plots.
    pub lambda_over_sigma: f64,
}

/// Per-unit posterior means and pointwise 90% bands of both terms.
pub fn treatment_effect_decomposition(
    draws: &PosteriorDraws,
    data: &PanelData,
    iota: &[f64],
    delta_x: f64,
    seed: u64,
) -> Result<Vec<TreatmentSummary>> {
    if data.n_x == 0 || iota.len() != data.n_x {
        return Err(Error::Dimension("direction must have one entry per regressor".into()));
    }
    if !(delta_x > 0.0) {
        return Err(Error::InvalidParameter(format!("perturbation size {delta_x} must be positive")));
    }
    let norm = iota.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidParameter(format!("direction has length {norm}, expected 1")));
    }
    let m = draws.n_draws();
    let t = data.n_periods as isize;
    (0..data.n_units)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, &[label::TREATMENT, i as u64]);
            let x = data.x_row(i, t);
            let mut one = Vec::with_capacity(m);
            let mut two = Vec::with_capacity(m);
            let mut ratio = 0.0;
            for j in 0..m {
                let beta = draws.beta_at(j);
                let sd = draws.sigma2_at(j, i).sqrt();
                let mean = draws.lambda_at(j, i) + draws.rho[j] * draws.y_star_last_at(j, i) + dot(beta, x);
                let (a, b) = decompose_effect(mean, dot(beta, iota), delta_x, sd * std_normal(&mut rng));
                one.push(a);
                two.push(b);
                ratio += draws.lambda_at(j, i) / sd;
            }
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            let (m1, m2) = (mean(&one), mean(&two));
            one.sort_by(f64::total_cmp);
            two.sort_by(f64::total_cmp);
            Ok(TreatmentSummary {
                unit_id: data.unit_ids.get(i).cloned().unwrap_or_else(|| i.to_string()),
                term_i_mean: m1,
                term_i_q05: quantile(&one, 0.05),
                term_i_q95: quantile(&one, 0.95),
                term_ii_mean: m2,
                term_ii_q05: quantile(&two, 0.05),
                term_ii_q95: quantile(&two, 0.95),
                lambda_over_sigma: ratio / m as f64,
            })
        })
        .collect()
}

pub fn write_treatment<W: Write>(rows: &[TreatmentSummary], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Censored outcome change `(max(m + b + u, 0) - max(m + u, 0)) / dx`.
pub fn outcome_change(mean: f64, beta_iota: f64, delta_x: f64, u: f64) -> f64 {
    (censor(mean + beta_iota * delta_x + u) - censor(mean + u)) / delta_x
}
