//! Posterior predictive densities and highest-density set forecasts.
//!
//! For posterior draw `j` the `h`-step latent forecast is normal with mean
//! `mu_j` and standard deviation `sd_j`; the observed forecast puts mass
//! `Phi(-mu_j/sd_j)` at zero. Averaging over draws gives a point mass
//! `pi0` plus a continuous mixture density on `y > 0`.

use crate::distributions::{draw_truncated_normal_pos, fast_exp_nonpos, norm_cdf, INV_SQRT_2PI};
use crate::error::{Error, Result};
use crate::gibbs::PosteriorDraws;
use crate::panel::{dot, PanelData};
use crate::rng::{label, substream};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Per-unit, per-draw moments of the latent forecast `y*_{iT+h}`, stored
/// unit-major (`i * M + j`).
#[derive(Clone, Debug, PartialEq)]
pub struct PredictiveComponents {
    pub n_units: usize,
    pub n_draws: usize,
    pub horizon: usize,
    pub mu: Vec<f64>,
    pub sd: Vec<f64>,
}

impl PredictiveComponents {
    pub fn unit(&self, i: usize) -> (&[f64], &[f64]) {
        let m = self.n_draws;
        (&self.mu[i * m..(i + 1) * m], &self.sd[i * m..(i + 1) * m])
    }

    /// `W = 1 - Phi(-mu/sd)`, the probability that draw `j` is positive.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let k = i * self.n_draws + j;
        norm_cdf(self.mu[k] / self.sd[k])
    }
}

/// Moments of `y*_{T+h}` given one draw: `sum rho^s` weighted drifts and
/// `sum rho^{2s}` scaled variance. `x_path[s]` is `x_{T+s}` for
/// `s = 0..h-1`.
pub fn h_step_moments(
    lambda: f64,
    rho: f64,
    beta: &[f64],
    sigma2: f64,
    y_star_t: f64,
    x_path: &[&[f64]],
    h: usize,
) -> (f64, f64) {
    let mut mu = y_star_t;
    let mut var = 0.0;
    for s in 0..h {
        mu = lambda + rho * mu + dot(beta, x_path[s]);
        var = rho * rho * var + sigma2;
    }
    (mu, var)
}

/// Latent forecast moments for every unit and retained draw.
///
/// With a lag-`h` (direct) posterior the horizon must equal that lag and the
/// one-step formula is applied with `x_T`. For iterated forecasts with
/// `h > 1` and regressors, the future path `x_{T+1..T+h-1}` comes from
/// `x_future` (unit-major, `h - 1` rows of `n_x`) or else from the panel's
/// holdout block.
pub fn predictive_components(
    draws: &PosteriorDraws,
    data: &PanelData,
    h: usize,
    x_future: Option<&[f64]>,
) -> Result<PredictiveComponents> {
    if h == 0 {
        return Err(Error::InvalidParameter("forecast horizon must be at least 1".into()));
    }
    if draws.n_units != data.n_units || draws.n_x != data.n_x || draws.n_periods != data.n_periods {
        return Err(Error::Dimension("posterior draws and panel disagree".into()));
    }
    let lag = draws.lag();
    let steps = if lag > 1 {
        if h != lag {
            return Err(Error::InvalidParameter(format!(
                "a lag-{lag} posterior forecasts horizon {lag} only, asked for {h}"
            )));
        }
        1
    } else {
        h
    };
    let k = data.n_x;
    if steps > 1 && k > 0 {
        let ok = match x_future {
            Some(x) => x.len() == data.n_units * (steps - 1) * k,
            None => data.n_holdout >= steps - 1 && data.holdout_x.is_some(),
        };
        if !ok {
            return Err(Error::InvalidParameter(format!(
                "horizon {h} with regressors needs the future path x_(T+1..T+{})",
                steps - 1
            )));
        }
    }
    let n = data.n_units;
    let m = draws.n_draws();
    let mut mu = vec![0.0; n * m];
    let mut sd = vec![0.0; n * m];
    for i in 0..n {
        let mut path: Vec<&[f64]> = vec![data.x_row(i, data.n_periods as isize)];
        for s in 1..steps {
            path.push(match x_future {
                Some(x) => &x[(i * (steps - 1) + s - 1) * k..(i * (steps - 1) + s) * k],
                None if k > 0 => data.holdout_x_row(i, s).expect("checked above"),
                None => &[],
            });
        }
        for j in 0..m {
            let (a, v) = h_step_moments(
                draws.lambda_at(j, i),
                draws.rho[j],
                draws.beta_at(j),
                draws.sigma2_at(j, i),
                draws.y_star_last_at(j, i),
                &path,
                steps,
            );
            mu[i * m + j] = a;
            sd[i * m + j] = v.sqrt();
        }
    }
    Ok(PredictiveComponents { n_units: n, n_draws: m, horizon: h, mu, sd })
}

/// Predictive distribution of one unit: point mass `pi0` at zero plus the
/// continuous mixture `(1/M) sum_j N(y | mu_j, sd_j^2)` on `y > 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictiveDensity {
    pub pi0: f64,
    pub mu: Vec<f64>,
    pub sd: Vec<f64>,
    /// One positive draw per component, `y_j ~ N(mu_j, sd_j^2) | y > 0`.
    pub samples: Vec<f64>,
    /// Continuous mixture density at each sample; empty until evaluated
    /// (see [`PredictiveDensity::with_density`]).
    pub density: Vec<f64>,
    /// `W_j = 1 - Phi(-mu_j/sd_j)`.
    pub weights: Vec<f64>,
    /// Posterior predictive mean of the censored outcome.
    pub point_forecast: f64,
}

/// Precomputed constants for fast evaluation of a normal mixture.
pub struct MixtureKernel {
    mu: Vec<f64>,
    prec: Vec<f64>,
    coef: Vec<f64>,
}

impl MixtureKernel {
    pub fn new(mu: &[f64], sd: &[f64]) -> Self {
        let m = mu.len() as f64;
        Self {
            mu: mu.to_vec(),
            prec: sd.iter().map(|s| -0.5 / (s * s)).collect(),
            coef: sd.iter().map(|s| INV_SQRT_2PI / (s * m)).collect(),
        }
    }

    /// `(1/M) sum_j N(y | mu_j, sd_j^2)`.
    pub fn eval(&self, y: f64) -> f64 {
        self.eval_many(&[y])[0]
    }

    /// Density at every point of `ys`. Uses AVX2 when the CPU has it; the
    /// arithmetic is the same on both paths so results are bit-identical.
    pub fn eval_many(&self, ys: &[f64]) -> Vec<f64> {
        #[cfg(target_arch = "x86_64")]
        {
            if std::is_x86_feature_detected!("avx2") {
                // SAFETY: the feature was detected at runtime.
                return unsafe { self.eval_many_avx2(ys) };
            }
        }
        ys.iter().map(|&y| self.eval_one(y)).collect()
    }

    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx2")]
    unsafe fn eval_many_avx2(&self, ys: &[f64]) -> Vec<f64> {
        ys.iter().map(|&y| self.eval_one(y)).collect()
    }

    #[inline(always)]
    fn eval_one(&self, y: f64) -> f64 {
        const L: usize = 8;
        let mut acc = [0.0f64; L];
        let mu = self.mu.chunks_exact(L);
        let prec = self.prec.chunks_exact(L);
        let coef = self.coef.chunks_exact(L);
        let (mr, pr, cr) = (mu.remainder(), prec.remainder(), coef.remainder());
        for ((m, p), c) in mu.zip(prec).zip(coef) {
            for l in 0..L {
                let d = y - m[l];
                acc[l] += c[l] * fast_exp_nonpos(p[l] * d * d);
            }
        }
        let mut total = acc.iter().sum::<f64>();
        for ((m, p), c) in mr.iter().zip(pr).zip(cr) {
            let d = y - m;
            total += c * fast_exp_nonpos(p * d * d);
        }
        total
    }
}

/// Mean of `max(Y, 0)` for `Y ~ N(mu, sd^2)`.
#[inline]
pub fn censored_normal_mean(mu: f64, sd: f64) -> f64 {
    let z = mu / sd;
    mu * norm_cdf(z) + sd * INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Builds the predictive distribution from per-draw moments. The `O(M^2)`
/// density evaluation at the samples is skipped unless `with_density`.
pub fn build_predictive_density(
    mu: &[f64],
    sd: &[f64],
    with_density: bool,
    rng: &mut crate::rng::Rng,
) -> Result<PredictiveDensity> {
    let m = mu.len();
    if m == 0 || sd.len() != m {
        return Err(Error::Dimension("predictive density needs matching, non-empty draws".into()));
    }
    let mut pi0 = 0.0;
    let mut point = 0.0;
    let mut weights = Vec::with_capacity(m);
    let mut samples = Vec::with_capacity(m);
    for j in 0..m {
        let w = norm_cdf(mu[j] / sd[j]);
        pi0 += norm_cdf(-mu[j] / sd[j]);
        point += censored_normal_mean(mu[j], sd[j]);
        weights.push(w);
        samples.push(draw_truncated_normal_pos(mu[j], sd[j], rng)?);
    }
    let pd = PredictiveDensity {
        pi0: pi0 / m as f64,
        mu: mu.to_vec(),
        sd: sd.to_vec(),
        samples,
        density: vec![],
        weights,
        point_forecast: point / m as f64,
    };
    Ok(if with_density { pd.with_density() } else { pd })
}

/// Predictive densities for all units; unit `i` samples from substream
/// `(seed, i)`.
pub fn build_predictive_densities(
    comp: &PredictiveComponents,
    seed: u64,
    with_density: bool,
    parallel: bool,
) -> Result<Vec<PredictiveDensity>> {
    let one = |i: usize| {
        let (mu, sd) = comp.unit(i);
        let mut rng = substream(seed, &[label::PREDICTIVE, i as u64]);
        build_predictive_density(mu, sd, with_density, &mut rng)
    };
    let out: Vec<Result<PredictiveDensity>> = if parallel {
        (0..comp.n_units).into_par_iter().map(one).collect()
    } else {
        (0..comp.n_units).map(one).collect()
    };
    out.into_iter().collect()
}

impl PredictiveDensity {
    pub fn n_draws(&self) -> usize {
        self.mu.len()
    }

    /// Evaluates the continuous density at every sample.
    pub fn with_density(mut self) -> Self {
        if self.density.len() != self.samples.len() {
            self.density = MixtureKernel::new(&self.mu, &self.sd).eval_many(&self.samples);
        }
        self
    }

    fn has_density(&self) -> bool {
        self.density.len() == self.samples.len()
    }

    /// Continuous-part density at `y > 0`.
    pub fn continuous_density(&self, y: f64) -> f64 {
        MixtureKernel::new(&self.mu, &self.sd).eval(y)
    }

    /// `P(Y <= y)` under the predictive distribution.
    pub fn cdf(&self, y: f64) -> f64 {
        if y < 0.0 {
            return 0.0;
        }
        let m = self.n_draws() as f64;
        let cont: f64 = self
            .mu
            .iter()
            .zip(&self.sd)
            .map(|(mu, sd)| norm_cdf((y - mu) / sd) - norm_cdf(-mu / sd))
            .sum::<f64>()
            / m;
        self.pi0 + cont
    }

    /// Predictive probability of a set.
    pub fn set_mass(&self, set: &SetForecast) -> f64 {
        let m = self.n_draws() as f64;
        let mut p = if set.includes_zero { self.pi0 } else { 0.0 };
        for &(a, b) in &set.segments {
            p += self
                .mu
                .iter()
                .zip(&self.sd)
                .map(|(mu, sd)| norm_cdf((b - mu) / sd) - norm_cdf((a.max(0.0) - mu) / sd))
                .sum::<f64>()
                / m;
        }
        p
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetMode {
    Pointwise,
    Average,
}

impl std::str::FromStr for SetMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pointwise" => Ok(SetMode::Pointwise),
            "average" => Ok(SetMode::Average),
            other => Err(Error::Config(format!("unknown set mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for SetMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SetMode::Pointwise => "pointwise",
            SetMode::Average => "average",
        })
    }
}

/// `{0}` (when `includes_zero`) united with disjoint sorted intervals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetForecast {
    pub includes_zero: bool,
    pub segments: Vec<(f64, f64)>,
    pub alpha: f64,
    pub mode: SetMode,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetType {
    ZeroOnly,
    ZeroToB,
    ZeroAndInterval,
    Empty,
    MultiSegment,
}

impl SetForecast {
    pub fn empty(alpha: f64, mode: SetMode) -> Self {
        Self { includes_zero: false, segments: vec![], alpha, mode }
    }

    pub fn zero_only(alpha: f64, mode: SetMode) -> Self {
        Self { includes_zero: true, segments: vec![], alpha, mode }
    }

    pub fn is_empty(&self) -> bool {
        !self.includes_zero && self.segments.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.segments.iter().map(|(a, b)| b - a).sum()
    }

    pub fn contains(&self, y: f64) -> bool {
        (y == 0.0 && self.includes_zero) || self.segments.iter().any(|&(a, b)| a <= y && y <= b)
    }

    pub fn set_type(&self) -> SetType {
        match (self.includes_zero, self.segments.as_slice()) {
            (false, []) => SetType::Empty,
            (_, []) => SetType::ZeroOnly,
            (_, [(a, _)]) if *a == 0.0 => SetType::ZeroToB,
            (_, [_]) => SetType::ZeroAndInterval,
            _ => SetType::MultiSegment,
        }
    }
}

/// Turn a selection of samples into intervals: runs of consecutive selected
/// samples in `y` order become `[a, b]`; a run starting at the lowest sample
/// is extended down to zero, and singleton runs are dropped.
fn reconstruct_segments(samples: &[f64], selected: &[bool]) -> Vec<(f64, f64)> {
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by(|&a, &b| samples[a].total_cmp(&samples[b]).then(a.cmp(&b)));
    let mut segs = Vec::new();
    let mut start: Option<f64> = None;
    for (pos, &j) in order.iter().enumerate() {
        if selected[j] {
            if start.is_none() {
                start = Some(if pos == 0 { 0.0 } else { samples[j] });
            }
            let next_selected = order.get(pos + 1).is_some_and(|&k| selected[k]);
            if !next_selected {
                let a = start.take().expect("open interval");
                let b = samples[j];
                if a < b {
                    segs.push((a, b));
                }
            }
        }
    }
    segs
}

/// Highest-density set with pointwise coverage `1 - alpha`.
///
/// # Panics
/// If the density at the samples has not been evaluated.
pub fn hpd_pointwise(pd: &PredictiveDensity, alpha: f64) -> SetForecast {
    if pd.pi0 >= 1.0 - alpha {
        return SetForecast::zero_only(alpha, SetMode::Pointwise);
    }
    assert!(pd.has_density(), "predictive density was built without density values");
    let m = pd.n_draws();
    let target = (1.0 - alpha - pd.pi0) * m as f64;
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| pd.density[b].total_cmp(&pd.density[a]).then(a.cmp(&b)));
    let mut selected = vec![false; m];
    let mut acc = 0.0;
    for &j in &order {
        if acc >= target {
            break;
        }
        selected[j] = true;
        acc += pd.weights[j];
    }
    SetForecast {
        includes_zero: true,
        segments: reconstruct_segments(&pd.samples, &selected),
        alpha,
        mode: SetMode::Pointwise,
    }
}

/// Highest-density sets with a common density threshold, so that coverage
/// `1 - alpha` holds on average across units.
pub fn hpd_average(pds: &[PredictiveDensity], alpha: f64) -> Result<Vec<SetForecast>> {
    let n = pds.len();
    if n == 0 {
        return Ok(vec![]);
    }
    let m = pds[0].n_draws();
    if pds.iter().any(|p| p.n_draws() != m) {
        return Err(Error::Dimension("average-coverage sets need a common number of draws".into()));
    }
    if pds.iter().any(|p| !p.has_density()) {
        return Err(Error::InvalidParameter("predictive density was built without density values".into()));
    }
    let pi0_bar = pds.iter().map(|p| p.pi0).sum::<f64>() / n as f64;
    if pi0_bar >= 1.0 - alpha {
        let mut units: Vec<usize> = (0..n).collect();
        units.sort_by(|&a, &b| pds[b].pi0.total_cmp(&pds[a].pi0).then(a.cmp(&b)));
        let mut out = vec![SetForecast::empty(alpha, SetMode::Average); n];
        let mut covered = 0.0;
        for &i in &units {
            if covered / n as f64 >= 1.0 - alpha {
                break;
            }
            out[i] = SetForecast::zero_only(alpha, SetMode::Average);
            covered += pds[i].pi0;
        }
        return Ok(out);
    }
    let target = (1.0 - alpha - pi0_bar) * (n * m) as f64;
    let mut pool: Vec<(u32, u32)> = Vec::with_capacity(n * m);
    for i in 0..n {
        for j in 0..m {
            pool.push((i as u32, j as u32));
        }
    }
    let dens = |p: &(u32, u32)| pds[p.0 as usize].density[p.1 as usize];
    pool.par_sort_by(|a, b| dens(b).total_cmp(&dens(a)).then(a.cmp(b)));
    let mut selected: Vec<Vec<bool>> = vec![vec![false; m]; n];
    let mut acc = 0.0;
    for p in &pool {
        if acc >= target {
            break;
        }
        selected[p.0 as usize][p.1 as usize] = true;
        acc += pds[p.0 as usize].weights[p.1 as usize];
    }
    Ok((0..n)
        .map(|i| SetForecast {
            includes_zero: true,
            segments: reconstruct_segments(&pds[i].samples, &selected[i]),
            alpha,
            mode: SetMode::Average,
        })
        .collect())
}

/// One output record per unit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecastRecord {
    pub unit_id: String,
    pub mode: SetMode,
    pub alpha: f64,
    pub includes_zero: bool,
    pub segments: Vec<[f64; 2]>,
    pub point_forecast: f64,
    pub pi0: f64,
}

pub fn forecast_records(unit_ids: &[String], pds: &[PredictiveDensity], sets: &[SetForecast]) -> Vec<ForecastRecord> {
    unit_ids
        .iter()
        .zip(pds)
        .zip(sets)
        .map(|((id, pd), s)| ForecastRecord {
            unit_id: id.clone(),
            mode: s.mode,
            alpha: s.alpha,
            includes_zero: s.includes_zero,
            segments: s.segments.iter().map(|&(a, b)| [a, b]).collect(),
            point_forecast: pd.point_forecast,
            pi0: pd.pi0,
        })
        .collect()
}
