//! Model specifications, prior tuning and the mixture hyperparameters.

use crate::distributions::{
    draw_gamma, draw_mniw, draw_tsb, ln_bvn_pdf, ln_norm_pdf, norm_pdf, MniwParams, NigScalar,
};
use crate::error::{Error, Result};
use crate::rng::Rng;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Heterogeneity {
    /// Mixture of `K` normals.
    Flexible,
    /// A single normal.
    Normal,
    /// Common intercept and variance for all units.
    Pooled,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dependence {
    /// `lambda` and `y0*` independent of each other and of the regressors.
    Re,
    /// `(lambda, y0*)` jointly normal per component with means linear in `x_{-1}`.
    Cre,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variance {
    Heteroskedastic,
    Homoskedastic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Censoring {
    Tobit,
    /// Ignore censoring in estimation; forecasts are still censored at zero.
    Linear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub heterogeneity: Heterogeneity,
    pub dependence: Dependence,
    pub variance: Variance,
    pub censoring: Censoring,
    /// Mixture truncation for the flexible specification.
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub n_x: usize,
    /// Known `(mean, variance)` of `y0*` under random effects; when set the
    /// initial-value block is not estimated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub known_y0: Option<[f64; 2]>,
    /// Hold every `sigma_i^2` at this value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_sigma2: Option<f64>,
    /// Hold every random-effects component variance at this value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_lambda_variance: Option<f64>,
}

fn default_k() -> usize {
    20
}

impl ModelSpec {
    pub fn new(heterogeneity: Heterogeneity, dependence: Dependence, variance: Variance, n_x: usize) -> Self {
        Self {
            heterogeneity,
            dependence,
            variance,
            censoring: Censoring::Tobit,
            k: default_k(),
            n_x,
            known_y0: None,
            fixed_sigma2: None,
            fixed_lambda_variance: None,
        }
    }

    pub fn pooled_tobit(n_x: usize) -> Self {
        Self::new(Heterogeneity::Pooled, Dependence::Re, Variance::Homoskedastic, n_x)
    }

    pub fn pooled_linear(n_x: usize) -> Self {
        Self { censoring: Censoring::Linear, ..Self::pooled_tobit(n_x) }
    }

    /// The six specifications compared in the simulation study, keyed by a
    /// short name: `flexible-het`, `normal-het`, `flexible-hom`,
    /// `normal-hom`, `pooled-tobit`, `pooled-linear`.
    pub fn named(name: &str, dependence: Dependence, n_x: usize) -> Result<Self> {
        use Heterogeneity::*;
        use Variance::*;
        Ok(match name {
            "flexible-het" => Self::new(Flexible, dependence, Heteroskedastic, n_x),
            "normal-het" => Self::new(Normal, dependence, Heteroskedastic, n_x),
            "flexible-hom" => Self::new(Flexible, dependence, Homoskedastic, n_x),
            "normal-hom" => Self::new(Normal, dependence, Homoskedastic, n_x),
            "pooled-tobit" => Self::pooled_tobit(n_x),
            "pooled-linear" => Self::pooled_linear(n_x),
            other => return Err(Error::Config(format!("unknown specification {other:?}"))),
        })
    }

    pub const NAMES: [&'static str; 6] =
        ["flexible-het", "normal-het", "flexible-hom", "normal-hom", "pooled-tobit", "pooled-linear"];

    pub fn short_name(&self) -> String {
        match (self.heterogeneity, self.variance, self.censoring) {
            (Heterogeneity::Pooled, _, Censoring::Linear) => "pooled-linear".into(),
            (Heterogeneity::Pooled, _, _) => "pooled-tobit".into(),
            (h, v, c) => {
                let h = if h == Heterogeneity::Flexible { "flexible" } else { "normal" };
                let v = if v == Variance::Heteroskedastic { "het" } else { "hom" };
                let c = if c == Censoring::Linear { "-linear" } else { "" };
                format!("{h}-{v}{c}")
            }
        }
    }

    /// Number of mixture components actually used.
    pub fn components(&self) -> usize {
        match self.heterogeneity {
            Heterogeneity::Flexible => self.k,
            _ => 1,
        }
    }

    pub fn is_pooled(&self) -> bool {
        self.heterogeneity == Heterogeneity::Pooled
    }

    pub fn is_cre(&self) -> bool {
        self.dependence == Dependence::Cre && !self.is_pooled()
    }

    pub fn has_sigma_mixture(&self) -> bool {
        self.variance == Variance::Heteroskedastic && self.fixed_sigma2.is_none() && !self.is_pooled()
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("mixture truncation K must be at least 1".into()));
        }
        if self.is_pooled() {
            if self.dependence == Dependence::Cre {
                return Err(Error::Config("pooled specifications use random effects".into()));
            }
            if self.variance == Variance::Heteroskedastic {
                return Err(Error::Config("pooled specifications are homoskedastic".into()));
            }
        }
        if self.known_y0.is_some() && self.dependence == Dependence::Cre {
            return Err(Error::Config("a known initial distribution requires random effects".into()));
        }
        if let Some([_, v]) = self.known_y0 {
            if !(v > 0.0) {
                return Err(Error::Config("known initial variance must be positive".into()));
            }
        }
        if let Some(s) = self.fixed_sigma2 {
            if !(s > 0.0) {
                return Err(Error::Config("fixed innovation variance must be positive".into()));
            }
        }
        if let Some(s) = self.fixed_lambda_variance {
            if !(s > 0.0) || self.dependence == Dependence::Cre {
                return Err(Error::Config("fixed component variance needs random effects and a positive value".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorTuning {
    pub tau_theta: f64,
    pub tau_phi: f64,
    pub tau_sigma_lambda: f64,
    pub tau_sigma_y: f64,
    pub tau_v: f64,
    /// Cross-sectional average of the per-unit variances of `y`; computed
    /// from the data.
    pub v_star: f64,
}

impl PriorTuning {
    /// Tuning used for synthetic experiments.
    pub fn monte_carlo(v_star: f64) -> Self {
        Self { tau_theta: 5.0, tau_phi: 5.0, tau_sigma_lambda: 1.0, tau_sigma_y: 1.0, tau_v: 1.0, v_star }
    }

    /// Wider prior for the initial-value block, used for empirical work.
    pub fn adjusted(v_star: f64) -> Self {
        Self { tau_phi: 20.0, tau_sigma_y: 4.0, ..Self::monte_carlo(v_star) }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.tau_theta, self.tau_phi, self.tau_sigma_lambda, self.tau_sigma_y, self.tau_v, self.v_star];
        if all.iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Config(format!("tuning constants must be positive: {self:?}")))
        }
    }
}

/// All prior distributions of one model specification.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PriorBundle {
    pub tuning: PriorTuning,
    /// Prior variance of each element of `theta = (rho, beta')`.
    pub theta_var: f64,
    /// Prior variance of the pooled intercept.
    pub pooled_lambda_var: f64,
    /// Random-effects component `(phi_k, Sigma_k)`.
    pub lambda_nig: NigScalar,
    /// Random-effects initial-value block `(phi_y, Sigma_y)`.
    pub y0_nig: NigScalar,
    /// Correlated random-effects component `(Phi_k, Sigma_k)`.
    pub cre_mniw: MniwParams,
    /// Log-variance mixture component `(psi_k, omega_k^2)`.
    pub log_sigma_nig: NigScalar,
    /// `sigma^2 ~ IG(a, b)` for homoskedastic and pooled specifications.
    pub sigma2_ig: (f64, f64),
    /// Concentration parameters `alpha ~ Gamma(shape, rate)`.
    pub alpha_shape: f64,
    pub alpha_rate: f64,
}

pub fn default_priors(spec: &ModelSpec, tuning: &PriorTuning) -> Result<PriorBundle> {
    spec.validate()?;
    tuning.validate()?;
    let q = spec.n_x + 1;
    let scale = tuning.tau_v * tuning.v_star;
    Ok(PriorBundle {
        tuning: *tuning,
        theta_var: tuning.tau_theta,
        pooled_lambda_var: tuning.tau_theta,
        lambda_nig: NigScalar { m: 0.0, v: tuning.tau_phi, a: 3.0, b: 2.0 * tuning.tau_sigma_lambda },
        y0_nig: NigScalar { m: 0.0, v: tuning.tau_phi, a: 3.0, b: 2.0 * tuning.tau_sigma_y },
        cre_mniw: MniwParams {
            m: DMatrix::zeros(q, 2),
            v: DMatrix::identity(q, q) * tuning.tau_phi,
            nu: 7.0,
            s: DMatrix::from_diagonal(&DVector::from_vec(vec![
                4.0 * tuning.tau_sigma_lambda,
                4.0 * tuning.tau_sigma_y,
            ])),
        },
        log_sigma_nig: NigScalar {
            m: scale.ln() - std::f64::consts::LN_2 / 2.0,
            v: 1.0,
            a: 3.0,
            b: 2.0 * std::f64::consts::LN_2,
        },
        sigma2_ig: (3.0, 2.0 * scale),
        alpha_shape: 2.0,
        alpha_rate: 2.0,
    })
}

/// Mean and variance of `sigma^2` under the homoskedastic prior.
pub fn homoskedastic_sigma2_moments(bundle: &PriorBundle) -> (f64, f64) {
    let (a, b) = bundle.sigma2_ig;
    let m = b / (a - 1.0);
    (m, m * m / (a - 2.0))
}

/// Mean and variance of `sigma^2` when `ln sigma^2 ~ N(psi, omega2)`.
pub fn lognormal_sigma2_moments(psi: f64, omega2: f64) -> (f64, f64) {
    let m = (psi + 0.5 * omega2).exp();
    (m, m * m * (omega2.exp() - 1.0))
}

/// One correlated random-effects component: `(lambda, y0*) | x_{-1} ~
/// N(Phi' z, Sigma)` with `z = (1, x_{-1}')'`. `coef` is `Phi` stored
/// row-major, `(n_x + 1) x 2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CreComponent {
    pub coef: Vec<f64>,
    pub sigma: [[f64; 2]; 2],
}

impl CreComponent {
    #[inline]
    pub fn mean_at(&self, z: &[f64]) -> [f64; 2] {
        let mut m = [0.0; 2];
        for (r, zr) in z.iter().enumerate() {
            m[0] += self.coef[2 * r] * zr;
            m[1] += self.coef[2 * r + 1] * zr;
        }
        m
    }

    pub fn from_mniw_draw(phi: &DMatrix<f64>, sigma: &DMatrix<f64>) -> Self {
        let q = phi.nrows();
        let mut coef = Vec::with_capacity(2 * q);
        for r in 0..q {
            coef.push(phi[(r, 0)]);
            coef.push(phi[(r, 1)]);
        }
        CreComponent { coef, sigma: [[sigma[(0, 0)], sigma[(0, 1)]], [sigma[(1, 0)], sigma[(1, 1)]]] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum LambdaMixture {
    Re { phi: Vec<f64>, sigma2: Vec<f64> },
    Cre(Vec<CreComponent>),
    Pooled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaMixture {
    pub psi: Vec<f64>,
    pub omega2: Vec<f64>,
    pub pi: Vec<f64>,
}

/// The hyperparameter vector `xi`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureHyperparams {
    pub lambda: LambdaMixture,
    pub pi_lambda: Vec<f64>,
    pub alpha_lambda: f64,
    /// Random-effects initial-value distribution `(phi_y, Sigma_y)`.
    pub y0: Option<(f64, f64)>,
    pub sigma: Option<SigmaMixture>,
    pub alpha_sigma: f64,
}

impl MixtureHyperparams {
    pub fn k(&self) -> usize {
        self.pi_lambda.len()
    }

    /// `lambda | y0*, component` as `(mean, variance)`.
    #[inline]
    pub fn lambda_given_y0(&self, k: usize, y0: f64, z: &[f64]) -> (f64, f64) {
        match &self.lambda {
            LambdaMixture::Re { phi, sigma2 } => (phi[k], sigma2[k]),
            LambdaMixture::Cre(c) => {
                let m = c[k].mean_at(z);
                let s = &c[k].sigma;
                let b = s[0][1] / s[1][1];
                (m[0] + b * (y0 - m[1]), (s[0][0] - b * s[0][1]).max(1e-300))
            }
            LambdaMixture::Pooled => (0.0, f64::INFINITY),
        }
    }

    /// `y0* | lambda, component` as `(mean, variance)`.
    #[inline]
    pub fn y0_given_lambda(&self, k: usize, lambda: f64, z: &[f64]) -> (f64, f64) {
        match &self.lambda {
            LambdaMixture::Cre(c) => {
                let m = c[k].mean_at(z);
                let s = &c[k].sigma;
                let b = s[0][1] / s[0][0];
                (m[1] + b * (lambda - m[0]), (s[1][1] - b * s[0][1]).max(1e-300))
            }
            _ => self.y0.unwrap_or((0.0, 1.0)),
        }
    }

    /// Log kernel used to allocate a unit to component `k`: the joint
    /// density of `(lambda, y0*)` under CRE, the density of `lambda` under RE.
    #[inline]
    pub fn ln_lambda_kernel(&self, k: usize, lambda: f64, y0: f64, z: &[f64]) -> f64 {
        match &self.lambda {
            LambdaMixture::Re { phi, sigma2 } => ln_norm_pdf(lambda, phi[k], sigma2[k]),
            LambdaMixture::Cre(c) => ln_bvn_pdf([lambda, y0], c[k].mean_at(z), c[k].sigma),
            LambdaMixture::Pooled => 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check_pi = |pi: &[f64]| -> Result<()> {
            let s: f64 = pi.iter().sum();
            if (s - 1.0).abs() > 1e-10 || pi.iter().any(|p| !(*p >= 0.0)) {
                return Err(Error::Numerical(format!("mixture weights do not form a probability vector (sum {s})")));
            }
            Ok(())
        };
        check_pi(&self.pi_lambda)?;
        match &self.lambda {
            LambdaMixture::Re { sigma2, .. } => {
                if sigma2.iter().any(|s| !(*s > 0.0)) {
                    return Err(Error::Numerical("non-positive component variance".into()));
                }
            }
            LambdaMixture::Cre(c) => {
                for comp in c {
                    let s = comp.sigma;
                    if !(s[0][0] > 0.0 && s[0][0] * s[1][1] - s[0][1] * s[1][0] > 0.0) {
                        return Err(Error::Numerical("component covariance not positive definite".into()));
                    }
                }
            }
            LambdaMixture::Pooled => {}
        }
        if let Some(sm) = &self.sigma {
            check_pi(&sm.pi)?;
            if sm.omega2.iter().any(|s| !(*s > 0.0)) {
                return Err(Error::Numerical("non-positive log-variance component".into()));
            }
        }
        Ok(())
    }

    /// Flatten into a fixed-length vector whose layout depends only on the
    /// specification, `K` and `n_x`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = vec![self.alpha_lambda, self.alpha_sigma];
        v.extend(&self.pi_lambda);
        match &self.lambda {
            LambdaMixture::Re { phi, sigma2 } => {
                v.extend(phi);
                v.extend(sigma2);
            }
            LambdaMixture::Cre(c) => {
                for comp in c {
                    v.extend(&comp.coef);
                    v.extend([comp.sigma[0][0], comp.sigma[0][1], comp.sigma[1][1]]);
                }
            }
            LambdaMixture::Pooled => {}
        }
        let (py, sy) = self.y0.unwrap_or((f64::NAN, f64::NAN));
        v.extend([py, sy]);
        if let Some(sm) = &self.sigma {
            v.extend(&sm.psi);
            v.extend(&sm.omega2);
            v.extend(&sm.pi);
        }
        v
    }

    pub fn flat_len(spec: &ModelSpec) -> usize {
        let k = spec.components();
        let mut n = 2 + k + 2;
        n += match (spec.is_pooled(), spec.is_cre()) {
            (true, _) => 0,
            (false, true) => k * (2 * (spec.n_x + 1) + 3),
            (false, false) => 2 * k,
        };
        if spec.has_sigma_mixture() {
            n += 3 * k;
        }
        n
    }

    pub fn from_flat(spec: &ModelSpec, v: &[f64]) -> Result<Self> {
        if v.len() != Self::flat_len(spec) {
            return Err(Error::Store(format!("xi block has {} values, expected {}", v.len(), Self::flat_len(spec))));
        }
        let k = spec.components();
        let mut pos = 0;
        let mut take = |n: usize| {
            let s = v[pos..pos + n].to_vec();
            pos += n;
            s
        };
        let a = take(2);
        let pi_lambda = take(k);
        let lambda = if spec.is_pooled() {
            LambdaMixture::Pooled
        } else if spec.is_cre() {
            let q = spec.n_x + 1;
            LambdaMixture::Cre(
                (0..k)
                    .map(|_| {
                        let coef = take(2 * q);
                        let s = take(3);
                        CreComponent { coef, sigma: [[s[0], s[1]], [s[1], s[2]]] }
                    })
                    .collect(),
            )
        } else {
            let phi = take(k);
            let sigma2 = take(k);
            LambdaMixture::Re { phi, sigma2 }
        };
        let y = take(2);
        let y0 = if y[0].is_nan() { None } else { Some((y[0], y[1])) };
        let sigma = if spec.has_sigma_mixture() {
            Some(SigmaMixture { psi: take(k), omega2: take(k), pi: take(k) })
        } else {
            None
        };
        Ok(Self { lambda, pi_lambda, alpha_lambda: a[0], y0, sigma, alpha_sigma: a[1] })
    }
}

/// Draw the random-effects block `(phi, Sigma)` for one component from the prior.
fn draw_re_component(bundle: &PriorBundle, spec: &ModelSpec, rng: &mut Rng) -> Result<(f64, f64)> {
    match spec.fixed_lambda_variance {
        Some(s) => Ok((bundle.lambda_nig.draw_location(s, rng), s)),
        None => bundle.lambda_nig.draw(rng),
    }
}

pub fn draw_prior_xi(bundle: &PriorBundle, spec: &ModelSpec, rng: &mut Rng) -> Result<MixtureHyperparams> {
    spec.validate()?;
    let k = spec.components();
    let alpha_lambda = draw_gamma(bundle.alpha_shape, bundle.alpha_rate, rng)?;
    let pi_lambda = draw_tsb(&vec![1.0; k], &vec![alpha_lambda; k], k, rng)?.pi;
    let lambda = if spec.is_pooled() {
        LambdaMixture::Pooled
    } else if spec.is_cre() {
        let mut comps = Vec::with_capacity(k);
        for _ in 0..k {
            let (phi, sigma) = draw_mniw(&bundle.cre_mniw, rng)?;
            comps.push(CreComponent::from_mniw_draw(&phi, &sigma));
        }
        LambdaMixture::Cre(comps)
    } else {
        let mut phi = Vec::with_capacity(k);
        let mut sigma2 = Vec::with_capacity(k);
        for _ in 0..k {
            let (p, s) = draw_re_component(bundle, spec, rng)?;
            phi.push(p);
            sigma2.push(s);
        }
        LambdaMixture::Re { phi, sigma2 }
    };
    let y0 = if spec.is_cre() {
        None
    } else if let Some([m, v]) = spec.known_y0 {
        Some((m, v))
    } else {
        Some(bundle.y0_nig.draw(rng)?)
    };
    let alpha_sigma = draw_gamma(bundle.alpha_shape, bundle.alpha_rate, rng)?;
    let sigma = if spec.has_sigma_mixture() {
        let pi = draw_tsb(&vec![1.0; k], &vec![alpha_sigma; k], k, rng)?.pi;
        let mut psi = Vec::with_capacity(k);
        let mut omega2 = Vec::with_capacity(k);
        for _ in 0..k {
            let (p, w) = bundle.log_sigma_nig.draw(rng)?;
            psi.push(p);
            omega2.push(w);
        }
        Some(SigmaMixture { psi, omega2, pi })
    } else {
        None
    };
    Ok(MixtureHyperparams { lambda, pi_lambda, alpha_lambda, y0, sigma, alpha_sigma })
}

/// Moments and mode count of one ξ draw's implied marginals at a probe point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorSummaryRow {
    pub draw: usize,
    pub lambda_mean: f64,
    pub lambda_sd: f64,
    pub lambda_skewness: f64,
    pub lambda_kurtosis: f64,
    pub lambda_modes: usize,
    pub y0_mean: f64,
    pub y0_sd: f64,
    pub y0_skewness: f64,
    pub y0_kurtosis: f64,
    pub y0_modes: usize,
    pub corr_lambda_y0: f64,
}

/// Moments of a univariate normal mixture: mean, sd, skewness, kurtosis.
pub fn mixture_moments(w: &[f64], m: &[f64], v: &[f64]) -> [f64; 4] {
    let mut raw = [0.0; 4];
    for k in 0..w.len() {
        let (mu, s2) = (m[k], v[k]);
        raw[0] += w[k] * mu;
        raw[1] += w[k] * (mu * mu + s2);
        raw[2] += w[k] * (mu.powi(3) + 3.0 * mu * s2);
        raw[3] += w[k] * (mu.powi(4) + 6.0 * mu * mu * s2 + 3.0 * s2 * s2);
    }
    let mean = raw[0];
    let var = (raw[1] - mean * mean).max(0.0);
    let c3 = raw[2] - 3.0 * mean * raw[1] + 2.0 * mean.powi(3);
    let c4 = raw[3] - 4.0 * mean * raw[2] + 6.0 * mean * mean * raw[1] - 3.0 * mean.powi(4);
    let sd = var.sqrt();
    [mean, sd, c3 / (var * sd), c4 / (var * var)]
}

pub const MODE_GRID_POINTS: usize = 2048;

/// Count the local maxima of a normal-mixture density on a grid of
/// [`MODE_GRID_POINTS`] points spanning six standard deviations either side
/// of the mixture mean.
pub fn count_modes(w: &[f64], m: &[f64], v: &[f64]) -> usize {
    let [mean, sd, _, _] = mixture_moments(w, m, v);
    let sd = if sd > 0.0 { sd } else { 1.0 };
    let n = MODE_GRID_POINTS;
    let lo = mean - 6.0 * sd;
    let step = 12.0 * sd / (n - 1) as f64;
    let dens: Vec<f64> = (0..n)
        .map(|g| {
            let x = lo + step * g as f64;
            (0..w.len()).map(|k| w[k] * norm_pdf(x, m[k], v[k])).sum()
        })
        .collect();
    count_grid_peaks(&dens)
}

/// Local maxima of a sampled curve; plateaus count once.
pub fn count_grid_peaks(d: &[f64]) -> usize {
    let mut vals: Vec<f64> = Vec::with_capacity(d.len());
    for &x in d {
        if vals.last() != Some(&x) {
            vals.push(x);
        }
    }
    let n = vals.len();
    if n == 1 {
        return 1;
    }
    let mut peaks = 0;
    for i in 0..n {
        let left = i == 0 || vals[i] > vals[i - 1];
        let right = i == n - 1 || vals[i] > vals[i + 1];
        if left && right {
            peaks += 1;
        }
    }
    peaks
}

/// Summaries of the marginal distributions of `lambda` and `y0*` implied by
/// each ξ draw at the regressor value `x_probe`.
pub fn prior_summary(xi_draws: &[MixtureHyperparams], x_probe: &[f64]) -> Vec<PriorSummaryRow> {
    let mut z = vec![1.0];
    z.extend_from_slice(x_probe);
    xi_draws
        .iter()
        .enumerate()
        .map(|(d, xi)| {
            let w = &xi.pi_lambda;
            let (lm, lv, ym, yv, cross) = match &xi.lambda {
                LambdaMixture::Re { phi, sigma2 } => {
                    let (py, sy) = xi.y0.unwrap_or((f64::NAN, f64::NAN));
                    (phi.clone(), sigma2.clone(), vec![py], vec![sy], None)
                }
                LambdaMixture::Cre(c) => {
                    let means: Vec<[f64; 2]> = c.iter().map(|c| c.mean_at(&z)).collect();
                    let cross: f64 = (0..c.len()).map(|k| w[k] * (c[k].sigma[0][1] + means[k][0] * means[k][1])).sum();
                    (
                        means.iter().map(|m| m[0]).collect(),
                        c.iter().map(|c| c.sigma[0][0]).collect(),
                        means.iter().map(|m| m[1]).collect(),
                        c.iter().map(|c| c.sigma[1][1]).collect(),
                        Some(cross),
                    )
                }
                LambdaMixture::Pooled => (vec![f64::NAN], vec![f64::NAN], vec![f64::NAN], vec![f64::NAN], None),
            };
            let yw: Vec<f64> = if ym.len() == 1 { vec![1.0] } else { w.clone() };
            let lw: Vec<f64> = if lm.len() == 1 { vec![1.0] } else { w.clone() };
            let lmo = mixture_moments(&lw, &lm, &lv);
            let ymo = mixture_moments(&yw, &ym, &yv);
            let corr = match cross {
                Some(c) => (c - lmo[0] * ymo[0]) / (lmo[1] * ymo[1]),
                None => 0.0,
            };
            PriorSummaryRow {
                draw: d,
                lambda_mean: lmo[0],
                lambda_sd: lmo[1],
                lambda_skewness: lmo[2],
                lambda_kurtosis: lmo[3],
                lambda_modes: if lmo[0].is_nan() { 0 } else { count_modes(&lw, &lm, &lv) },
                y0_mean: ymo[0],
                y0_sd: ymo[1],
                y0_skewness: ymo[2],
                y0_kurtosis: ymo[3],
                y0_modes: if ymo[0].is_nan() { 0 } else { count_modes(&yw, &ym, &yv) },
                corr_lambda_y0: corr,
            }
        })
        .collect()
}

/// A point on the `level` probability contour of `N(0, cov)` in the given
/// direction. Uses the chi-squared quantile with `dim` degrees of freedom,
/// so `level = 0.5` gives the 50% coverage ellipse.
pub fn probe_on_ellipse(cov: &DMatrix<f64>, direction: &[f64], level: f64) -> Result<Vec<f64>> {
    let n = cov.nrows();
    if direction.len() != n || n == 0 {
        return Err(Error::Dimension("probe direction length".into()));
    }
    let chi = ChiSquared::new(n as f64).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let r = chi.inverse_cdf(level).sqrt();
    let u = DVector::from_column_slice(direction);
    let norm = u.norm();
    if norm == 0.0 {
        return Err(Error::InvalidParameter("zero probe direction".into()));
    }
    let l = crate::distributions::repaired_cholesky(cov)?.l();
    Ok((l * (u / norm) * r).iter().cloned().collect())
}
