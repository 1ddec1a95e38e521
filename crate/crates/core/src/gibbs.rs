//! Gibbs sampler with data augmentation for the censored dynamic panel.
//!
//! One sweep runs, in order: latent draws for censored cells, unit
//! intercepts, innovation variances, common coefficients, mixture
//! memberships and mixture hyperparameters. Every random draw comes from a
//! substream keyed by `(seed, step, sweep, unit)`, so a run is reproducible
//! bit-for-bit whether units are processed serially or in parallel.

use crate::distributions::{
    draw_inverse_gamma, draw_log_categorical, draw_mniw, draw_truncated_normal_neg, draw_tsb, ln_norm_pdf,
    std_normal, TruncatedMvnSpec,
};
use crate::error::{Error, Result};
use crate::panel::{dot, CommonParams, LatentPanel, PanelData, UnitParams};
use crate::priors::{
    draw_prior_xi, CreComponent, LambdaMixture, MixtureHyperparams, ModelSpec, PriorBundle, SigmaMixture,
};
use crate::rng::{label, substream, Rng};
use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Innovation variances below this are rejected by the Metropolis step.
pub const SIGMA2_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerSettings {
    /// Post-burn-in sweeps `M`.
    pub n_draws: usize,
    /// Discarded sweeps `M0`.
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub rwmh_target_accept: f64,
    pub parallel_units: bool,
    /// Gibbs scans over each run of censored cells per sweep.
    pub tmvn_scans: usize,
    /// Autoregressive lag; values above one give the direct multistep model.
    pub lag: usize,
    /// Adapt the Metropolis step sizes during burn-in.
    pub adapt: bool,
    pub rwmh_initial_log_step: f64,
}

impl Default for SamplerSettings {
    fn default() -> Self {
        Self {
            n_draws: 10_000,
            burn_in: 1_000,
            thin: 1,
            seed: 0,
            rwmh_target_accept: 0.30,
            parallel_units: false,
            tmvn_scans: 10,
            lag: 1,
            adapt: true,
            rwmh_initial_log_step: -0.5,
        }
    }
}

impl SamplerSettings {
    pub fn validate(&self) -> Result<()> {
        if self.n_draws == 0 {
            return Err(Error::Config("n_draws must be positive".into()));
        }
        if self.thin == 0 || self.lag == 0 || self.tmvn_scans == 0 {
            return Err(Error::Config("thin, lag and tmvn_scans must be at least 1".into()));
        }
        if !(self.rwmh_target_accept > 0.0 && self.rwmh_target_accept < 1.0) {
            return Err(Error::Config("rwmh_target_accept must lie in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn retained(&self) -> usize {
        self.n_draws / self.thin
    }
}

/// Complete sampler state. Component labels are zero-based.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainState {
    pub latent: LatentPanel,
    /// Per-unit intercepts and variances. Pooled specifications repeat the
    /// common intercept; homoskedastic ones repeat the common variance.
    pub unit: UnitParams,
    pub common: CommonParams,
    pub xi: MixtureHyperparams,
    pub gamma_lambda: Vec<usize>,
    pub gamma_sigma: Vec<usize>,
    pub rwmh_log_step: Vec<f64>,
}

impl ChainState {
    pub fn check_invariants(&self, data: &PanelData) -> Result<()> {
        if !self.latent.is_consistent_with(data) {
            return Err(Error::Numerical("latent panel disagrees with observed data".into()));
        }
        if self.unit.sigma2.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::Numerical("non-positive innovation variance".into()));
        }
        if self.unit.lambda.iter().any(|l| !l.is_finite()) || !self.common.rho.is_finite() {
            return Err(Error::Numerical("non-finite location parameter".into()));
        }
        let k = self.xi.k();
        if self.gamma_lambda.iter().chain(&self.gamma_sigma).any(|&g| g >= k) {
            return Err(Error::Numerical("component label out of range".into()));
        }
        self.xi.validate()
    }
}

/// A maximal run of censored observations in one unit's path.
#[derive(Clone, Debug, PartialEq)]
pub struct CensoredSegment {
    pub unit: usize,
    pub t1: usize,
    pub t2: usize,
    /// Observed `y_{t1-1}`; `None` when the run starts at `t = 0`.
    pub left_anchor: Option<f64>,
    /// Observed `y_{t2+1}`; `None` when the run ends at `t = T`.
    pub right_anchor: Option<f64>,
}

pub fn find_segments(unit: usize, y_row: &[f64]) -> Vec<CensoredSegment> {
    let mut out = Vec::new();
    let n = y_row.len();
    let mut t = 0;
    while t < n {
        if y_row[t] == 0.0 {
            let t1 = t;
            while t + 1 < n && y_row[t + 1] == 0.0 {
                t += 1;
            }
            out.push(CensoredSegment {
                unit,
                t1,
                t2: t,
                left_anchor: if t1 > 0 { Some(y_row[t1 - 1]) } else { None },
                right_anchor: if t + 1 < n { Some(y_row[t + 1]) } else { None },
            });
        }
        t += 1;
    }
    out
}

/// Mean and covariance of the latent values in a censored run given its
/// anchors, for the lag-one model.
///
/// The run is a Gaussian AR(1) path started at the left anchor, or at the
/// initial-value distribution `init = (mu_star, sigma_star2)` when the run
/// starts at `t = 0`. A right anchor is conditioned on with the usual
/// normal conditioning formula.
pub fn segment_conditional_moments(
    seg: &CensoredSegment,
    lambda: f64,
    sigma2: f64,
    common: &CommonParams,
    data: &PanelData,
    init: Option<(f64, f64)>,
) -> Result<TruncatedMvnSpec> {
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidParameter("innovation variance must be positive".into()));
    }
    let s = seg.t2 - seg.t1 + 1;
    let total = s + usize::from(seg.right_anchor.is_some());
    let rho = common.rho;
    let drift = |t: usize| lambda + dot(&common.beta, data.x_row(seg.unit, t as isize - 1));
    let mut mu = vec![0.0; total];
    let mut var = vec![0.0; total];
    match seg.left_anchor {
        Some(y) => {
            mu[0] = drift(seg.t1) + rho * y;
            var[0] = sigma2;
        }
        None => {
            let (m, v) = init.ok_or_else(|| {
                Error::InvalidParameter("a run starting at t = 0 needs the initial-value distribution".into())
            })?;
            mu[0] = m;
            var[0] = v;
        }
    }
    for j in 1..total {
        mu[j] = drift(seg.t1 + j) + rho * mu[j - 1];
        var[j] = rho * rho * var[j - 1] + sigma2;
    }
    let cov = DMatrix::from_fn(total, total, |a, b| {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        rho.powi((hi - lo) as i32) * var[lo]
    });
    let mut m = DVector::from_column_slice(&mu[..s]);
    let mut c = cov.view((0, 0), (s, s)).into_owned();
    if let Some(y) = seg.right_anchor {
        let c12 = cov.view((0, s), (s, 1)).into_owned();
        let c22 = cov[(s, s)];
        m += &c12 * ((y - mu[s]) / c22);
        c -= &c12 * c12.transpose() / c22;
        c = 0.5 * (&c + c.transpose());
    }
    TruncatedMvnSpec::new(m, c)
}

/// Per-unit regressor vector `z_i = (1, x_{i,-1}')` used by the CRE mixture.
fn cre_covariates(data: &PanelData) -> Vec<f64> {
    let q = data.n_x + 1;
    let mut z = Vec::with_capacity(data.n_units * q);
    for i in 0..data.n_units {
        z.push(1.0);
        z.extend_from_slice(data.x_row(i, -1));
    }
    z
}

/// Apply `f` to every unit, optionally in parallel; results come back in
/// unit order either way.
fn map_units<T: Send, F>(parallel: bool, n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T + Sync + Send,
{
    if parallel {
        (0..n).into_par_iter().map(f).collect()
    } else {
        (0..n).map(f).collect()
    }
}

fn collect_results<T>(v: Vec<Result<T>>) -> Result<Vec<T>> {
    v.into_iter().collect()
}

/// Everything a sweep reads besides the state.
pub struct Model<'a> {
    pub data: &'a PanelData,
    pub spec: &'a ModelSpec,
    pub priors: &'a PriorBundle,
    pub settings: &'a SamplerSettings,
    z: Vec<f64>,
}

impl<'a> Model<'a> {
    pub fn new(
        data: &'a PanelData,
        spec: &'a ModelSpec,
        priors: &'a PriorBundle,
        settings: &'a SamplerSettings,
    ) -> Result<Self> {
        spec.validate()?;
        settings.validate()?;
        if spec.n_x != data.n_x {
            return Err(Error::Dimension(format!(
                "specification has {} regressors, data has {}",
                spec.n_x, data.n_x
            )));
        }
        if data.n_periods < settings.lag {
            return Err(Error::Insufficient(format!(
                "lag {} needs more than {} periods",
                settings.lag, data.n_periods
            )));
        }
        Ok(Self { data, spec, priors, settings, z: cre_covariates(data) })
    }

    #[inline]
    pub fn z(&self, i: usize) -> &[f64] {
        let q = self.data.n_x + 1;
        &self.z[i * q..(i + 1) * q]
    }

    /// Number of periods with a lagged value, `T - h + 1`.
    #[inline]
    pub fn n_obs(&self) -> usize {
        self.data.n_periods + 1 - self.settings.lag
    }

    /// Distribution of a pre-sample latent value given the unit's
    /// intercept and component.
    #[inline]
    fn initial_conditional(&self, state: &ChainState, i: usize) -> (f64, f64) {
        state.xi.y0_given_lambda(state.gamma_lambda[i], state.unit.lambda[i], self.z(i))
    }

    /// `y*_t - rho y*_{t-h} - beta' x_{t-h}` for `t = h..=T`, summed, and
    /// the sum of squared deviations from `lambda`.
    #[inline]
    fn residual_sums(&self, row: &[f64], i: usize, common: &CommonParams, lambda: f64) -> (f64, f64) {
        let h = self.settings.lag;
        let mut s = 0.0;
        let mut ss = 0.0;
        for t in h..=self.data.n_periods {
            let r = row[t] - common.rho * row[t - h] - dot(&common.beta, self.data.x_row(i, (t - h) as isize));
            s += r;
            ss += (r - lambda) * (r - lambda);
        }
        (s, ss)
    }
}

/// Step 1: redraw the latent value of every censored cell from its full
/// conditional, `scans` times in ascending `t`.
pub fn step1_draw_latents(state: &mut ChainState, model: &Model, sweep: usize) -> Result<()> {
    if model.spec.censoring == crate::priors::Censoring::Linear {
        return Ok(());
    }
    let data = model.data;
    let h = model.settings.lag;
    let big_t = data.n_periods;
    let w = big_t + 1;
    let seed = model.settings.seed;
    let scans = model.settings.tmvn_scans;
    let mut latent = std::mem::take(&mut state.latent.y_star);
    let st: &ChainState = state;
    let draw_unit = |i: usize, row: &mut [f64]| -> Result<()> {
        let y = data.y_row(i);
        if y.iter().all(|&v| v > 0.0) {
            return Ok(());
        }
        let mut rng = substream(seed, &[label::LATENT, sweep as u64, i as u64]);
        let lambda = st.unit.lambda[i];
        let s2 = st.unit.sigma2[i];
        let rho = st.common.rho;
        let beta = &st.common.beta;
        let (m0, v0) = model.initial_conditional(st, i);
        for _ in 0..scans {
            for t in 0..w {
                if y[t] != 0.0 {
                    continue;
                }
                let (mut prec, mut num) = if t >= h {
                    let m = lambda + rho * row[t - h] + dot(beta, data.x_row(i, (t - h) as isize));
                    (1.0 / s2, m / s2)
                } else {
                    (1.0 / v0, m0 / v0)
                };
                if t + h <= big_t {
                    let r = row[t + h] - lambda - dot(beta, data.x_row(i, t as isize));
                    prec += rho * rho / s2;
                    num += rho * r / s2;
                }
                row[t] = draw_truncated_normal_neg(num / prec, prec.sqrt().recip(), &mut rng)?;
            }
        }
        Ok(())
    };
    let res: Vec<Result<()>> = if model.settings.parallel_units {
        latent.par_chunks_mut(w).enumerate().map(|(i, row)| draw_unit(i, row)).collect()
    } else {
        latent.chunks_mut(w).enumerate().map(|(i, row)| draw_unit(i, row)).collect()
    };
    state.latent.y_star = latent;
    collect_results(res).map(|_| ())
}

/// Step 2: conjugate normal draw of each unit intercept.
pub fn step2_draw_lambda(state: &mut ChainState, model: &Model, sweep: usize) -> Result<()> {
    if model.spec.is_pooled() {
        return Ok(());
    }
    let n = model.n_obs() as f64;
    let seed = model.settings.seed;
    let st: &ChainState = state;
    let draws = map_units(model.settings.parallel_units, model.data.n_units, |i| {
        let row = st.latent.row(i);
        let (m0, v0) = st.xi.lambda_given_y0(st.gamma_lambda[i], row[0], model.z(i));
        let (s, _) = model.residual_sums(row, i, &st.common, 0.0);
        let s2 = st.unit.sigma2[i];
        let prec = 1.0 / v0 + n / s2;
        let mean = (m0 / v0 + s / s2) / prec;
        let mut rng = substream(seed, &[label::LAMBDA, sweep as u64, i as u64]);
        mean + std_normal(&mut rng) / prec.sqrt()
    });
    state.unit.lambda = draws;
    Ok(())
}

/// Log target of the Metropolis step on `l = ln sigma^2`.
#[inline]
pub fn log_variance_target(l: f64, n: f64, rss: f64, psi: f64, omega2: f64) -> f64 {
    let d = l - psi;
    -0.5 * n * l - 0.5 * rss * (-l).exp() - 0.5 * d * d / omega2
}

/// One random-walk Metropolis step on `l = ln sigma^2` with proposal
/// standard deviation `exp(log_step)`. Returns the new value and the
/// acceptance probability of the proposal.
pub fn rwmh_log_variance_step(
    l: f64,
    n: f64,
    rss: f64,
    psi: f64,
    omega2: f64,
    log_step: f64,
    rng: &mut Rng,
) -> (f64, f64) {
    let prop = l + log_step.exp() * std_normal(rng);
    let u: f64 = rng.random();
    if prop.exp() < SIGMA2_FLOOR {
        return (l, 0.0);
    }
    let diff = log_variance_target(prop, n, rss, psi, omega2) - log_variance_target(l, n, rss, psi, omega2);
    let acc = if diff >= 0.0 { 1.0 } else { diff.exp() };
    if u.ln() < diff {
        (prop, acc)
    } else {
        (l, acc)
    }
}

/// Step 3: innovation variances. Returns the mean acceptance probability of
/// the Metropolis step (NaN when no Metropolis step ran).
pub fn step3_draw_sigma2(state: &mut ChainState, model: &Model, sweep: usize) -> Result<f64> {
    let spec = model.spec;
    if let Some(s) = spec.fixed_sigma2 {
        state.unit.sigma2.iter_mut().for_each(|v| *v = s);
        return Ok(f64::NAN);
    }
    let n = model.n_obs() as f64;
    let seed = model.settings.seed;
    let settings = model.settings;
    let st: &ChainState = state;
    let rss: Vec<f64> = map_units(settings.parallel_units, model.data.n_units, |i| {
        model.residual_sums(st.latent.row(i), i, &st.common, st.unit.lambda[i]).1
    });
    if !spec.has_sigma_mixture() {
        let (a, b) = model.priors.sigma2_ig;
        let total: f64 = rss.iter().sum();
        let mut rng = substream(seed, &[label::SIGMA, sweep as u64]);
        let s2 = draw_inverse_gamma(a + 0.5 * n * model.data.n_units as f64, b + 0.5 * total, &mut rng)?;
        state.unit.sigma2.iter_mut().for_each(|v| *v = s2);
        return Ok(f64::NAN);
    }
    let sm = st.xi.sigma.as_ref().ok_or_else(|| Error::Numerical("missing variance mixture".into()))?;
    let adapting = settings.adapt && sweep < settings.burn_in;
    let gain = ((sweep + 1) as f64).powf(-0.6);
    let out: Vec<(f64, f64, f64)> = map_units(settings.parallel_units, model.data.n_units, |i| {
        let k = st.gamma_sigma[i];
        let mut rng = substream(seed, &[label::SIGMA, sweep as u64, i as u64]);
        let l = st.unit.sigma2[i].ln();
        let step = st.rwmh_log_step[i];
        let (l_new, acc) = rwmh_log_variance_step(l, n, rss[i], sm.psi[k], sm.omega2[k], step, &mut rng);
        let step = if adapting {
            (step + gain * (acc - settings.rwmh_target_accept)).clamp(-10.0, 5.0)
        } else {
            step
        };
        (l_new.exp(), step, acc)
    });
    let mut total_acc = 0.0;
    for (i, (s2, step, acc)) in out.into_iter().enumerate() {
        state.unit.sigma2[i] = s2;
        state.rwmh_log_step[i] = step;
        total_acc += acc;
    }
    Ok(total_acc / model.data.n_units as f64)
}

/// Step 4: common coefficients `(rho, beta)` by weighted conjugate
/// regression; pooled specifications also draw the shared intercept here.
pub fn step4_draw_theta(state: &mut ChainState, model: &Model, sweep: usize) -> Result<()> {
    let data = model.data;
    let h = model.settings.lag;
    let pooled = model.spec.is_pooled();
    let off = usize::from(pooled);
    let d = off + 1 + data.n_x;
    let st: &ChainState = state;
    let parts: Vec<(Vec<f64>, Vec<f64>)> = map_units(model.settings.parallel_units, data.n_units, |i| {
        let row = st.latent.row(i);
        let w = 1.0 / st.unit.sigma2[i];
        let shift = if pooled { 0.0 } else { st.unit.lambda[i] };
        let mut p = vec![0.0; d * d];
        let mut b = vec![0.0; d];
        let mut z = vec![0.0; d];
        for t in h..=data.n_periods {
            if pooled {
                z[0] = 1.0;
            }
            z[off] = row[t - h];
            z[off + 1..].copy_from_slice(data.x_row(i, (t - h) as isize));
            let r = row[t] - shift;
            for a in 0..d {
                b[a] += w * z[a] * r;
                for c in 0..=a {
                    p[a * d + c] += w * z[a] * z[c];
                }
            }
        }
        (p, b)
    });
    let mut prec = DMatrix::zeros(d, d);
    let mut rhs = DVector::zeros(d);
    for (p, b) in &parts {
        for a in 0..d {
            rhs[a] += b[a];
            for c in 0..=a {
                prec[(a, c)] += p[a * d + c];
            }
        }
    }
    for a in 0..d {
        for c in 0..a {
            prec[(c, a)] = prec[(a, c)];
        }
        let v = if pooled && a == 0 { model.priors.pooled_lambda_var } else { model.priors.theta_var };
        prec[(a, a)] += 1.0 / v;
    }
    let chol = nalgebra::Cholesky::new(prec)
        .ok_or_else(|| Error::NotPositiveDefinite("coefficient posterior precision".into()))?;
    let mean = chol.solve(&rhs);
    let mut rng = substream(model.settings.seed, &[label::THETA, sweep as u64]);
    let e = DVector::from_fn(d, |_, _| std_normal(&mut rng));
    let l = chol.l();
    let dev = l
        .transpose()
        .solve_upper_triangular(&e)
        .ok_or_else(|| Error::Numerical("triangular solve in coefficient draw".into()))?;
    let theta = mean + dev;
    if pooled {
        state.unit.lambda.iter_mut().for_each(|v| *v = theta[0]);
    }
    state.common.rho = theta[off];
    state.common.beta = theta.iter().skip(off + 1).cloned().collect();
    Ok(())
}

/// Step 5: component memberships.
pub fn step5_draw_memberships(state: &mut ChainState, model: &Model, sweep: usize) -> Result<()> {
    let k = state.xi.k();
    if k == 1 || model.spec.is_pooled() {
        return Ok(());
    }
    let seed = model.settings.seed;
    let has_sigma = model.spec.has_sigma_mixture();
    let st: &ChainState = state;
    let labels: Vec<Result<(usize, usize)>> = map_units(model.settings.parallel_units, model.data.n_units, |i| {
        let mut rng = substream(seed, &[label::MEMBERSHIP, sweep as u64, i as u64]);
        let y0 = st.latent.get(i, 0);
        let z = model.z(i);
        let lw: Vec<f64> = (0..k)
            .map(|c| st.xi.pi_lambda[c].ln() + st.xi.ln_lambda_kernel(c, st.unit.lambda[i], y0, z))
            .collect();
        let gl = draw_log_categorical(&lw, &mut rng)?;
        let gs = if has_sigma {
            let sm = st.xi.sigma.as_ref().expect("variance mixture present");
            let l = st.unit.sigma2[i].ln();
            let lw: Vec<f64> = (0..k).map(|c| sm.pi[c].ln() + ln_norm_pdf(l, sm.psi[c], sm.omega2[c])).collect();
            draw_log_categorical(&lw, &mut rng)?
        } else {
            st.gamma_sigma[i]
        };
        Ok((gl, gs))
    });
    for (i, r) in labels.into_iter().enumerate() {
        let (gl, gs) = r?;
        state.gamma_lambda[i] = gl;
        state.gamma_sigma[i] = gs;
    }
    Ok(())
}

/// Stick-breaking weights and concentration parameter given labels.
fn draw_weights(labels: &[usize], k: usize, alpha: f64, priors: &PriorBundle, rng: &mut Rng) -> Result<(Vec<f64>, f64)> {
    let mut counts = vec![0usize; k];
    for &g in labels {
        counts[g] += 1;
    }
    let mut ones = Vec::with_capacity(k);
    let mut alphas = Vec::with_capacity(k);
    let mut above: usize = counts.iter().sum();
    for &c in &counts {
        above -= c;
        ones.push(1.0 + c as f64);
        alphas.push(alpha + above as f64);
    }
    let tsb = draw_tsb(&ones, &alphas, k, rng)?;
    let shape = priors.alpha_shape + k as f64 - 1.0;
    let rate = priors.alpha_rate - tsb.ln_pi_last;
    let alpha_new = crate::distributions::draw_gamma(shape, rate, rng)?;
    Ok((tsb.pi, alpha_new))
}

/// Step 6: mixture hyperparameters given memberships, intercepts,
/// initial latents and variances.
pub fn step6_draw_xi(state: &mut ChainState, model: &Model, sweep: usize) -> Result<()> {
    let mut rng = substream(model.settings.seed, &[label::XI, sweep as u64]);
    state.xi = draw_xi_given(state, model, &mut rng)?;
    Ok(())
}

fn draw_xi_given(state: &ChainState, model: &Model, rng: &mut Rng) -> Result<MixtureHyperparams> {
    let spec = model.spec;
    let priors = model.priors;
    let data = model.data;
    let n = data.n_units;
    let k = spec.components();
    let xi = &state.xi;

    let lambda = match &xi.lambda {
        LambdaMixture::Pooled => LambdaMixture::Pooled,
        LambdaMixture::Re { .. } => {
            let mut phi = Vec::with_capacity(k);
            let mut sigma2 = Vec::with_capacity(k);
            for c in 0..k {
                let (mut cnt, mut s, mut ss) = (0usize, 0.0, 0.0);
                for i in 0..n {
                    if state.gamma_lambda[i] == c {
                        let l = state.unit.lambda[i];
                        cnt += 1;
                        s += l;
                        ss += l * l;
                    }
                }
                let post = priors.lambda_nig.posterior(cnt, s, ss);
                let (p, v) = match spec.fixed_lambda_variance {
                    Some(v) => (post.draw_location(v, rng), v),
                    None => post.draw(rng)?,
                };
                phi.push(p);
                sigma2.push(v);
            }
            LambdaMixture::Re { phi, sigma2 }
        }
        LambdaMixture::Cre(_) => {
            let q = data.n_x + 1;
            let mut comps = Vec::with_capacity(k);
            for c in 0..k {
                let members: Vec<usize> = (0..n).filter(|&i| state.gamma_lambda[i] == c).collect();
                let params = if members.is_empty() {
                    priors.cre_mniw.clone()
                } else {
                    let z = DMatrix::from_fn(members.len(), q, |r, j| model.z(members[r])[j]);
                    let y = DMatrix::from_fn(members.len(), 2, |r, j| {
                        let i = members[r];
                        if j == 0 {
                            state.unit.lambda[i]
                        } else {
                            state.latent.get(i, 0)
                        }
                    });
                    priors.cre_mniw.posterior(&z, &y)?
                };
                let (phi, sigma) = draw_mniw(&params, rng)?;
                comps.push(CreComponent::from_mniw_draw(&phi, &sigma));
            }
            LambdaMixture::Cre(comps)
        }
    };

    let y0 = if spec.is_cre() {
        None
    } else if let Some([m, v]) = spec.known_y0 {
        Some((m, v))
    } else {
        let (mut s, mut ss) = (0.0, 0.0);
        for i in 0..n {
            let y = state.latent.get(i, 0);
            s += y;
            ss += y * y;
        }
        Some(priors.y0_nig.posterior(n, s, ss).draw(rng)?)
    };

    let (pi_lambda, alpha_lambda) = if spec.is_pooled() {
        (vec![1.0], xi.alpha_lambda)
    } else {
        draw_weights(&state.gamma_lambda, k, xi.alpha_lambda, priors, rng)?
    };

    let (sigma, alpha_sigma) = if spec.has_sigma_mixture() {
        let mut psi = Vec::with_capacity(k);
        let mut omega2 = Vec::with_capacity(k);
        for c in 0..k {
            let (mut cnt, mut s, mut ss) = (0usize, 0.0, 0.0);
            for i in 0..n {
                if state.gamma_sigma[i] == c {
                    let l = state.unit.sigma2[i].ln();
                    cnt += 1;
                    s += l;
                    ss += l * l;
                }
            }
            let (p, w) = priors.log_sigma_nig.posterior(cnt, s, ss).draw(rng)?;
            psi.push(p);
            omega2.push(w);
        }
        let (pi, a) = draw_weights(&state.gamma_sigma, k, xi.alpha_sigma, priors, rng)?;
        (Some(SigmaMixture { psi, omega2, pi }), a)
    } else {
        (None, xi.alpha_sigma)
    };

    Ok(MixtureHyperparams { lambda, pi_lambda, alpha_lambda, y0, sigma, alpha_sigma })
}

/// Complete-data log likelihood of the latent panel, including the
/// initial-value and intercept densities.
pub fn complete_log_likelihood(state: &ChainState, model: &Model) -> f64 {
    let data = model.data;
    let h = model.settings.lag;
    let n = model.n_obs() as f64;
    let mut ll = 0.0;
    for i in 0..data.n_units {
        let row = state.latent.row(i);
        let s2 = state.unit.sigma2[i];
        let (_, rss) = model.residual_sums(row, i, &state.common, state.unit.lambda[i]);
        ll += -0.5 * (n * (2.0 * std::f64::consts::PI * s2).ln() + rss / s2);
        let (m0, v0) = model.initial_conditional(state, i);
        for t in 0..h {
            ll += ln_norm_pdf(row[t], m0, v0);
        }
        if !model.spec.is_pooled() {
            let (ml, vl) = match &state.xi.lambda {
                LambdaMixture::Re { phi, sigma2 } => (phi[state.gamma_lambda[i]], sigma2[state.gamma_lambda[i]]),
                LambdaMixture::Cre(c) => {
                    let comp = &c[state.gamma_lambda[i]];
                    (comp.mean_at(model.z(i))[0], comp.sigma[0][0])
                }
                LambdaMixture::Pooled => unreachable!(),
            };
            ll += ln_norm_pdf(state.unit.lambda[i], ml, vl);
        }
    }
    ll
}

/// Per-sweep diagnostics over all sweeps, burn-in included.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepTrace {
    pub rho: Vec<f64>,
    pub log_lik: Vec<f64>,
    /// Mean Metropolis acceptance probability for the variance step.
    pub accept_rate: Vec<f64>,
}

/// Retained posterior draws. Matrices are stored draw-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorDraws {
    pub spec: ModelSpec,
    pub settings: SamplerSettings,
    pub n_units: usize,
    pub n_periods: usize,
    pub n_x: usize,
    pub rho: Vec<f64>,
    /// `draws x n_x`.
    pub beta: Vec<f64>,
    /// `draws x N`.
    pub lambda: Vec<f64>,
    /// `draws x N`.
    pub sigma2: Vec<f64>,
    /// Latent `y*_{iT}`, `draws x N`.
    pub y_star_last: Vec<f64>,
    /// Flattened hyperparameters, `draws x MixtureHyperparams::flat_len`.
    pub xi: Vec<f64>,
    pub trace: SweepTrace,
}

impl PosteriorDraws {
    pub fn n_draws(&self) -> usize {
        self.rho.len()
    }

    pub fn lag(&self) -> usize {
        self.settings.lag
    }

    #[inline]
    pub fn lambda_at(&self, j: usize, i: usize) -> f64 {
        self.lambda[j * self.n_units + i]
    }

    #[inline]
    pub fn sigma2_at(&self, j: usize, i: usize) -> f64 {
        self.sigma2[j * self.n_units + i]
    }

    #[inline]
    pub fn y_star_last_at(&self, j: usize, i: usize) -> f64 {
        self.y_star_last[j * self.n_units + i]
    }

    #[inline]
    pub fn beta_at(&self, j: usize) -> &[f64] {
        &self.beta[j * self.n_x..(j + 1) * self.n_x]
    }

    pub fn xi_at(&self, j: usize) -> Result<MixtureHyperparams> {
        let len = MixtureHyperparams::flat_len(&self.spec);
        MixtureHyperparams::from_flat(&self.spec, &self.xi[j * len..(j + 1) * len])
    }

    fn push(&mut self, state: &ChainState) {
        let t = self.n_periods;
        self.rho.push(state.common.rho);
        self.beta.extend_from_slice(&state.common.beta);
        self.lambda.extend_from_slice(&state.unit.lambda);
        self.sigma2.extend_from_slice(&state.unit.sigma2);
        self.y_star_last.extend((0..self.n_units).map(|i| state.latent.get(i, t)));
        self.xi.extend(state.xi.to_flat());
    }

    pub fn posterior_mean_rho(&self) -> f64 {
        self.rho.iter().sum::<f64>() / self.rho.len() as f64
    }

    /// Posterior means of `(lambda_i, sigma2_i)` per unit.
    pub fn unit_means(&self) -> Vec<(f64, f64)> {
        let m = self.n_draws() as f64;
        (0..self.n_units)
            .map(|i| {
                let mut l = 0.0;
                let mut s = 0.0;
                for j in 0..self.n_draws() {
                    l += self.lambda_at(j, i);
                    s += self.sigma2_at(j, i);
                }
                (l / m, s / m)
            })
            .collect()
    }
}

/// Arellano-Bover forward orthogonal deviations of `a[1..]`, entries
/// `1..=len-2`; the last entry has no forward mean and is dropped.
fn fod(a: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut out = Vec::with_capacity(n.saturating_sub(1));
    for t in 0..n.saturating_sub(1) {
        let rest = n - t - 1;
        let mean: f64 = a[t + 1..].iter().sum::<f64>() / rest as f64;
        let c = (rest as f64 / (rest as f64 + 1.0)).sqrt();
        out.push(c * (a[t] - mean));
    }
    out
}

/// Initial `(rho, beta)`: just-identified IV on forward orthogonal
/// deviations with the lagged levels as instruments; pooled OLS when the
/// panel is too short, the moment matrix is singular, or the lag exceeds one.
pub fn initial_theta(data: &PanelData, lag: usize) -> (f64, Vec<f64>) {
    let d = 1 + data.n_x;
    let big_t = data.n_periods;
    if lag == 1 && big_t >= 3 {
        let mut zx = DMatrix::<f64>::zeros(d, d);
        let mut zy = DVector::<f64>::zeros(d);
        for i in 0..data.n_units {
            let y = data.y_row(i);
            let yt = fod(&y[1..]);
            let yl = fod(&y[..big_t]);
            let xl: Vec<Vec<f64>> = (0..data.n_x)
                .map(|k| fod(&(0..big_t).map(|t| data.x_row(i, t as isize)[k]).collect::<Vec<_>>()))
                .collect();
            for s in 0..yt.len() {
                let mut inst = vec![y[s]];
                inst.extend_from_slice(data.x_row(i, s as isize));
                let mut reg = vec![yl[s]];
                reg.extend(xl.iter().map(|c| c[s]));
                for a in 0..d {
                    zy[a] += inst[a] * yt[s];
                    for b in 0..d {
                        zx[(a, b)] += inst[a] * reg[b];
                    }
                }
            }
        }
        let scale = zx.amax().max(1e-300);
        if zx.determinant().abs() > 1e-10 * scale.powi(d as i32) {
            if let Some(sol) = zx.lu().solve(&zy) {
                if sol.iter().all(|v| v.is_finite()) {
                    return (sol[0].clamp(-0.99, 0.99), sol.iter().skip(1).cloned().collect());
                }
            }
        }
    }
    pooled_ols_theta(data, lag)
}

fn pooled_ols_theta(data: &PanelData, lag: usize) -> (f64, Vec<f64>) {
    let d = 2 + data.n_x;
    let fit = |positive_only: bool| -> Option<DVector<f64>> {
        let mut xx = DMatrix::<f64>::zeros(d, d);
        let mut xy = DVector::<f64>::zeros(d);
        let mut count = 0;
        for i in 0..data.n_units {
            let y = data.y_row(i);
            for t in lag..=data.n_periods {
                if positive_only && !(y[t] > 0.0 && y[t - lag] > 0.0) {
                    continue;
                }
                let mut z = vec![1.0, y[t - lag]];
                z.extend_from_slice(data.x_row(i, (t - lag) as isize));
                for a in 0..d {
                    xy[a] += z[a] * y[t];
                    for b in 0..d {
                        xx[(a, b)] += z[a] * z[b];
                    }
                }
                count += 1;
            }
        }
        if count <= d {
            return None;
        }
        nalgebra::Cholesky::new(xx).map(|c| c.solve(&xy))
    };
    match fit(true).or_else(|| fit(false)) {
        Some(b) if b.iter().all(|v| v.is_finite()) => (b[1].clamp(-0.99, 0.99), b.iter().skip(2).cloned().collect()),
        _ => (0.0, vec![0.0; data.n_x]),
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Lloyd's k-means with seeded initial centres; empty clusters restart at
/// the point farthest from its current centre.
pub fn kmeans(points: &[[f64; 2]], k: usize, rng: &mut Rng) -> Vec<usize> {
    let n = points.len();
    if k <= 1 || n == 0 {
        return vec![0; n];
    }
    let k = k.min(n);
    let mut idx: Vec<usize> = (0..n).collect();
    for j in 0..k {
        let r = j + rng.random_range(0..n - j);
        idx.swap(j, r);
    }
    let mut centres: Vec<[f64; 2]> = idx[..k].iter().map(|&i| points[i]).collect();
    let dist = |p: &[f64; 2], c: &[f64; 2]| (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2);
    let mut labels = vec![usize::MAX; n];
    for _ in 0..100 {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let mut best = 0;
            let mut bd = f64::INFINITY;
            for (c, centre) in centres.iter().enumerate() {
                let dd = dist(p, centre);
                if dd < bd {
                    bd = dd;
                    best = c;
                }
            }
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        let mut sums = vec![[0.0; 2]; k];
        let mut counts = vec![0usize; k];
        for (i, p) in points.iter().enumerate() {
            sums[labels[i]][0] += p[0];
            sums[labels[i]][1] += p[1];
            counts[labels[i]] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                centres[c] = [sums[c][0] / counts[c] as f64, sums[c][1] / counts[c] as f64];
            } else {
                let far = (0..n)
                    .max_by(|&a, &b| {
                        dist(&points[a], &centres[labels[a]]).total_cmp(&dist(&points[b], &centres[labels[b]]))
                    })
                    .unwrap_or(0);
                centres[c] = points[far];
                labels[far] = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    labels
}

/// Starting values: observed latents, IV/OLS coefficients, within-unit
/// intercepts and residual variances, k-means memberships, concentration
/// parameters at one and one conditional draw of the hyperparameters.
pub fn initialize(model: &Model) -> Result<ChainState> {
    let data = model.data;
    let spec = model.spec;
    let h = model.settings.lag;
    let n = data.n_units;
    let big_t = data.n_periods;
    let mut rng = substream(model.settings.seed, &[label::INIT]);

    let (rho, beta) = initial_theta(data, h);
    let common = CommonParams { rho, beta };
    let positives: Vec<f64> = data.y.iter().cloned().filter(|v| *v > 0.0).collect();
    let sd_pos = if positives.len() > 1 {
        let m = positives.iter().sum::<f64>() / positives.len() as f64;
        (positives.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (positives.len() - 1) as f64).sqrt()
    } else {
        1.0
    };
    let latent = LatentPanel::from_observed(data);
    let mut lambda = Vec::with_capacity(n);
    let mut sigma2 = Vec::with_capacity(n);
    for i in 0..n {
        let y = data.y_row(i);
        let r: Vec<f64> = (h..=big_t)
            .map(|t| y[t] - rho * y[t - h] - dot(&common.beta, data.x_row(i, (t - h) as isize)))
            .collect();
        let l = if y.iter().all(|&v| v == 0.0) { -sd_pos } else { r.iter().sum::<f64>() / r.len() as f64 };
        lambda.push(l);
        let s2 = if h == 1 && big_t >= 3 {
            let yt = fod(&y[1..]);
            let yl = fod(&y[..big_t]);
            let mut e2 = 0.0;
            for s in 0..yt.len() {
                let mut e = yt[s] - rho * yl[s];
                for (k, b) in common.beta.iter().enumerate() {
                    let xs: Vec<f64> = (0..big_t).map(|t| data.x_row(i, t as isize)[k]).collect();
                    e -= b * fod(&xs)[s];
                }
                e2 += e * e;
            }
            e2 / yt.len() as f64
        } else if r.len() > 1 {
            r.iter().map(|v| (v - l).powi(2)).sum::<f64>() / (r.len() - 1) as f64
        } else {
            f64::NAN
        };
        sigma2.push(s2);
    }
    let mut valid: Vec<f64> = sigma2.iter().cloned().filter(|s| s.is_finite() && *s >= SIGMA2_FLOOR).collect();
    let fill = if valid.is_empty() { model.priors.tuning.v_star } else { median(&mut valid) };
    for s in sigma2.iter_mut() {
        if !(s.is_finite() && *s >= SIGMA2_FLOOR) {
            *s = fill;
        }
    }
    if spec.is_pooled() {
        let m = lambda.iter().sum::<f64>() / n as f64;
        lambda.iter_mut().for_each(|v| *v = m);
    }
    if let Some(s) = spec.fixed_sigma2 {
        sigma2.iter_mut().for_each(|v| *v = s);
    } else if !spec.has_sigma_mixture() {
        let m = sigma2.iter().sum::<f64>() / n as f64;
        sigma2.iter_mut().for_each(|v| *v = m);
    }

    let k = spec.components();
    let labels = if k > 1 && !spec.is_pooled() {
        let feats: Vec<[f64; 2]> = lambda.iter().zip(&sigma2).map(|(l, s)| [*l, s.ln()]).collect();
        let standardized = standardize_columns(&feats);
        kmeans(&standardized, 10.min(n).min(k), &mut rng)
    } else {
        vec![0; n]
    };

    let mut xi = draw_prior_xi(model.priors, spec, &mut rng)?;
    xi.alpha_lambda = 1.0;
    xi.alpha_sigma = 1.0;
    let mut state = ChainState {
        latent,
        unit: UnitParams { lambda, sigma2 },
        common,
        xi,
        gamma_lambda: labels.clone(),
        gamma_sigma: if spec.has_sigma_mixture() { labels } else { vec![0; n] },
        rwmh_log_step: vec![model.settings.rwmh_initial_log_step; n],
    };
    state.xi = draw_xi_given(&state, model, &mut rng)?;
    Ok(state)
}

fn standardize_columns(p: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let n = p.len() as f64;
    let mut out = p.to_vec();
    for c in 0..2 {
        let m = p.iter().map(|v| v[c]).sum::<f64>() / n;
        let sd = (p.iter().map(|v| (v[c] - m).powi(2)).sum::<f64>() / n).sqrt();
        for o in out.iter_mut() {
            o[c] = if sd > 0.0 { (o[c] - m) / sd } else { o[c] - m };
        }
    }
    out
}

/// Owns a model's inputs and its current state.
pub struct Sampler {
    pub data: PanelData,
    pub spec: ModelSpec,
    pub priors: PriorBundle,
    pub settings: SamplerSettings,
    pub state: ChainState,
}

/// Statistics of a single sweep.
#[derive(Clone, Copy, Debug)]
pub struct SweepStats {
    pub accept_rate: f64,
}

impl Sampler {
    pub fn new(data: &PanelData, spec: &ModelSpec, priors: &PriorBundle, settings: &SamplerSettings) -> Result<Self> {
        let state = initialize(&Model::new(data, spec, priors, settings)?)?;
        Ok(Self { data: data.clone(), spec: spec.clone(), priors: priors.clone(), settings: settings.clone(), state })
    }

    pub fn with_state(
        data: &PanelData,
        spec: &ModelSpec,
        priors: &PriorBundle,
        settings: &SamplerSettings,
        state: ChainState,
    ) -> Result<Self> {
        Model::new(data, spec, priors, settings)?;
        Ok(Self { data: data.clone(), spec: spec.clone(), priors: priors.clone(), settings: settings.clone(), state })
    }

    pub fn model(&self) -> Model<'_> {
        Model {
            data: &self.data,
            spec: &self.spec,
            priors: &self.priors,
            settings: &self.settings,
            z: cre_covariates(&self.data),
        }
    }

    /// Run steps 1 to 6 once.
    pub fn sweep(&mut self, sweep: usize) -> Result<SweepStats> {
        let model = Model {
            data: &self.data,
            spec: &self.spec,
            priors: &self.priors,
            settings: &self.settings,
            z: cre_covariates(&self.data),
        };
        let st = &mut self.state;
        let wrap = |step: &'static str| move |e: Error| Error::Step { sweep, step, source: Box::new(e) };
        step1_draw_latents(st, &model, sweep).map_err(wrap("latent draw"))?;
        step2_draw_lambda(st, &model, sweep).map_err(wrap("intercept draw"))?;
        let accept_rate = step3_draw_sigma2(st, &model, sweep).map_err(wrap("variance draw"))?;
        step4_draw_theta(st, &model, sweep).map_err(wrap("coefficient draw"))?;
        step5_draw_memberships(st, &model, sweep).map_err(wrap("membership draw"))?;
        step6_draw_xi(st, &model, sweep).map_err(wrap("hyperparameter draw"))?;
        Ok(SweepStats { accept_rate })
    }

    /// Run burn-in plus `n_draws` sweeps, calling `keep` on every retained
    /// state.
    pub fn run_with<F: FnMut(&ChainState)>(&mut self, mut keep: F) -> Result<SweepTrace> {
        let total = self.settings.burn_in + self.settings.n_draws;
        let mut trace = SweepTrace::default();
        for s in 0..total {
            let stats = self.sweep(s)?;
            trace.rho.push(self.state.common.rho);
            trace.accept_rate.push(stats.accept_rate);
            trace.log_lik.push(complete_log_likelihood(&self.state, &self.model()));
            if s >= self.settings.burn_in && (s - self.settings.burn_in + 1) % self.settings.thin == 0 {
                keep(&self.state);
            }
            if (s + 1) % 1000 == 0 {
                log::debug!("sweep {}/{} rho {:.4}", s + 1, total, self.state.common.rho);
            }
        }
        Ok(trace)
    }

    pub fn run(mut self) -> Result<PosteriorDraws> {
        let mut draws = PosteriorDraws {
            spec: self.spec.clone(),
            settings: self.settings.clone(),
            n_units: self.data.n_units,
            n_periods: self.data.n_periods,
            n_x: self.data.n_x,
            rho: Vec::new(),
            beta: Vec::new(),
            lambda: Vec::new(),
            sigma2: Vec::new(),
            y_star_last: Vec::new(),
            xi: Vec::new(),
            trace: SweepTrace::default(),
        };
        let trace = self.run_with(|s| draws.push(s))?;
        draws.trace = trace;
        Ok(draws)
    }
}

pub fn run_chain(
    data: &PanelData,
    spec: &ModelSpec,
    priors: &PriorBundle,
    settings: &SamplerSettings,
) -> Result<PosteriorDraws> {
    Sampler::new(data, spec, priors, settings)?.run()
}

/// Estimate the direct `h`-step model `y*_t = lambda + rho y*_{t-h} +
/// beta' x_{t-h} + u_t`, ignoring the serial correlation of `u` that the
/// lag-`h` regression induces. Latent values in the first `h` periods
/// follow the initial-value distribution; only `y*_0` enters the
/// hyperparameter updates.
pub fn direct_multistep_estimate(
    data: &PanelData,
    spec: &ModelSpec,
    priors: &PriorBundle,
    settings: &SamplerSettings,
    h: usize,
) -> Result<PosteriorDraws> {
    if h == 0 || data.n_periods <= h {
        return Err(Error::Insufficient(format!("direct estimation at h = {h} needs T > h, T = {}", data.n_periods)));
    }
    let settings = SamplerSettings { lag: h, ..settings.clone() };
    run_chain(data, spec, priors, &settings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::priors::{default_priors, Dependence, PriorTuning};

    #[test]
    fn segments_of_documented_path() {
        let y = [5.0, 2.0, 0.0, 0.0, 0.0, 1.0, 3.0, 0.0, 0.0, 0.0, 4.0];
        let s = find_segments(0, &y);
        assert_eq!(s.len(), 2);
        assert_eq!((s[0].t1, s[0].t2, s[1].t1, s[1].t2), (2, 4, 7, 9));
        assert_eq!(s[0].left_anchor, Some(2.0));
        assert_eq!(s[1].right_anchor, Some(4.0));
        assert!(find_segments(0, &[1.0, 2.0]).is_empty());
        let all = find_segments(3, &[0.0; 4]);
        assert_eq!(all.len(), 1);
        assert_eq!((all[0].t1, all[0].t2, all[0].left_anchor, all[0].right_anchor), (0, 3, None, None));
    }

    fn tiny_panel() -> PanelData {
        PanelData::without_regressors(2, 3, vec![1.0, 0.0, 0.0, 2.0, 0.0, 0.5, 0.0, 0.0]).unwrap()
    }

    #[test]
    fn independent_case_has_diagonal_covariance() {
        let data = tiny_panel();
        let seg = &find_segments(0, data.y_row(0))[0];
        let c = CommonParams { rho: 0.0, beta: vec![] };
        let spec = segment_conditional_moments(seg, 0.3, 1.5, &c, &data, None).unwrap();
        assert_eq!(spec.dim(), 2);
        assert_eq!(spec.cov, DMatrix::from_diagonal_element(2, 2, 1.5));
        assert!(spec.mean.iter().all(|m| (*m - 0.3).abs() < 1e-15));
    }

    #[test]
    fn run_ending_at_last_period_is_one_step_normal() {
        let data = PanelData::without_regressors(1, 2, vec![1.0, 2.0, 0.0]).unwrap();
        let seg = &find_segments(0, data.y_row(0))[0];
        let c = CommonParams { rho: 0.8, beta: vec![] };
        let spec = segment_conditional_moments(seg, 0.5, 2.0, &c, &data, None).unwrap();
        assert!((spec.mean[0] - 2.1).abs() < 1e-14);
        assert!((spec.cov[(0, 0)] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn initial_run_requires_initial_distribution() {
        let data = tiny_panel();
        let seg = &find_segments(1, data.y_row(1))[0];
        assert_eq!(seg.t1, 0);
        let c = CommonParams { rho: 0.5, beta: vec![] };
        assert!(segment_conditional_moments(seg, 0.0, 1.0, &c, &data, None).is_err());
        assert!(segment_conditional_moments(seg, 0.0, 1.0, &c, &data, Some((0.0, 1.0))).is_ok());
    }

    #[test]
    fn settings_validation() {
        assert!(SamplerSettings { n_draws: 0, ..Default::default() }.validate().is_err());
        assert!(SamplerSettings { thin: 0, ..Default::default() }.validate().is_err());
        assert!(SamplerSettings::default().validate().is_ok());
    }

    #[test]
    fn kmeans_separates_clusters() {
        let mut pts = vec![];
        for i in 0..20 {
            pts.push([i as f64 * 0.01, 0.0]);
            pts.push([10.0 + i as f64 * 0.01, 5.0]);
        }
        let mut rng = substream(3, &[]);
        let l = kmeans(&pts, 2, &mut rng);
        for i in 0..20 {
            assert_eq!(l[2 * i], l[0]);
            assert_eq!(l[2 * i + 1], l[1]);
        }
        assert_ne!(l[0], l[1]);
    }

    #[test]
    fn short_sweep_keeps_invariants() {
        let (_, data) = crate::panel::simulate_panel(
            &UnitParams { lambda: vec![0.5, -1.0, 0.2, 1.0, -0.3], sigma2: vec![1.0, 0.5, 2.0, 1.0, 0.7] },
            &CommonParams { rho: 0.6, beta: vec![] },
            &[0.0, -1.0, 0.5, 1.0, 0.0],
            &[],
            6,
            11,
        )
        .unwrap();
        for name in ModelSpec::NAMES {
            let mut spec = ModelSpec::named(name, Dependence::Cre, 0).unwrap();
            if spec.is_pooled() {
                spec.dependence = Dependence::Re;
            }
            spec.k = 3;
            let priors = default_priors(&spec, &PriorTuning::monte_carlo(data.v_star())).unwrap();
            let settings = SamplerSettings { n_draws: 20, burn_in: 5, seed: 4, ..Default::default() };
            let mut sampler = Sampler::new(&data, &spec, &priors, &settings).unwrap();
            for s in 0..10 {
                sampler.sweep(s).unwrap();
                sampler.state.check_invariants(&data).unwrap();
            }
        }
    }
}
