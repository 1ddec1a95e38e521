//! Synthetic designs and Monte Carlo experiments.

use crate::distributions::std_normal;
use crate::error::{Error, Result};
use crate::forecast::{build_predictive_densities, hpd_average, hpd_pointwise, predictive_components, SetForecast};
use crate::gibbs::{run_chain, SamplerSettings};
use crate::panel::{fmt_f64, simulate_panel, CommonParams, LatentPanel, PanelData, UnitParams};
use crate::priors::{default_priors, Dependence, ModelSpec, PriorTuning};
use crate::rng::{derive_seed, label, substream, Rng};
use crate::scoring::{evaluate_sets, score_densities, ScoreReport, SetScores, DEFAULT_LPS_FLOOR};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Two-component data-generating process with independent `lambda_i`,
/// `ln sigma_i^2` and `y*_{i0}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub rho: f64,
    pub mixture_weights: [f64; 2],
    pub lambda_means: [f64; 2],
    pub lambda_var: f64,
    /// Means of the log-variance mixture before the shift `c`.
    pub log_sigma2_means: [f64; 2],
    pub log_sigma2_var: f64,
    pub y0_mean: f64,
    pub y0_var: f64,
    pub n_units: usize,
    pub n_periods: usize,
    pub n_reps: usize,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Design {
    /// About 45% zeros.
    Table1,
    /// About 60% zeros.
    C60,
    /// About 75% zeros.
    C75,
}

impl std::str::FromStr for Design {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table1" => Ok(Design::Table1),
            "c60" => Ok(Design::C60),
            "c75" => Ok(Design::C75),
            other => Err(Error::Config(format!("unknown design {other:?}"))),
        }
    }
}

impl DgpSpec {
    pub fn design(design: Design, n_units: usize, n_periods: usize, n_reps: usize, seed: u64) -> Self {
        let lambda_means = match design {
            Design::Table1 => [2.25, 0.0],
            Design::C60 => [1.85, -0.4],
            Design::C75 => [1.3, -0.95],
        };
        Self {
            rho: 0.8,
            mixture_weights: [1.0 / 9.0, 8.0 / 9.0],
            lambda_means,
            lambda_var: 0.5,
            log_sigma2_means: [2.5, 0.25],
            log_sigma2_var: 0.5,
            y0_mean: 0.0,
            y0_var: 1.0,
            n_units,
            n_periods,
            n_reps,
            seed,
        }
    }

    /// Shift `c` making `E[sigma^2] = 1` under the lognormal mixture.
    pub fn log_sigma2_shift(&self) -> f64 {
        let m: f64 = (0..2)
            .map(|k| self.mixture_weights[k] * (self.log_sigma2_means[k] + 0.5 * self.log_sigma2_var).exp())
            .sum();
        -m.ln()
    }

    pub fn validate(&self) -> Result<()> {
        let w = self.mixture_weights[0] + self.mixture_weights[1];
        if (w - 1.0).abs() > 1e-12 || self.mixture_weights.iter().any(|p| *p < 0.0) {
            return Err(Error::Config("mixture weights must sum to one".into()));
        }
        if !(self.lambda_var > 0.0 && self.log_sigma2_var > 0.0 && self.y0_var > 0.0) {
            return Err(Error::Config("mixture variances must be positive".into()));
        }
        if self.n_units == 0 || self.n_periods == 0 {
            return Err(Error::Config("need N >= 1 and T >= 1".into()));
        }
        Ok(())
    }

    /// Seed of replication `rep`.
    pub fn rep_seed(&self, rep: usize) -> u64 {
        derive_seed(self.seed, &[label::REPLICATION, rep as u64])
    }

    /// Simulate one replication: `T + 1` periods, the last held out.
    pub fn simulate(&self, rep: usize) -> Result<(LatentPanel, PanelData)> {
        self.validate()?;
        let seed = self.rep_seed(rep);
        let mut rng = substream(seed, &[label::SIMULATE]);
        let (unit, y0) = draw_dgp_unit_params(self, self.n_units, &mut rng);
        let (latent, full) = simulate_panel(
            &unit,
            &CommonParams { rho: self.rho, beta: vec![] },
            &y0,
            &[],
            self.n_periods + 1,
            seed,
        )?;
        Ok((latent, full.split_holdout(1)?))
    }
}

fn mixture_draw(w: &[f64; 2], means: &[f64; 2], var: f64, rng: &mut Rng) -> f64 {
    let u: f64 = rng.random();
    let k = usize::from(u >= w[0]);
    means[k] + var.sqrt() * std_normal(rng)
}

/// Independent draws of `(lambda_i, sigma_i^2)` and `y*_{i0}` for `n` units.
pub fn draw_dgp_unit_params(spec: &DgpSpec, n: usize, rng: &mut Rng) -> (UnitParams, Vec<f64>) {
    let c = spec.log_sigma2_shift();
    let shifted = [spec.log_sigma2_means[0] + c, spec.log_sigma2_means[1] + c];
    let mut lambda = Vec::with_capacity(n);
    let mut sigma2 = Vec::with_capacity(n);
    let mut y0 = Vec::with_capacity(n);
    for _ in 0..n {
        lambda.push(mixture_draw(&spec.mixture_weights, &spec.lambda_means, spec.lambda_var, rng));
        sigma2.push(mixture_draw(&spec.mixture_weights, &shifted, spec.log_sigma2_var, rng).exp());
        y0.push(spec.y0_mean + spec.y0_var.sqrt() * std_normal(rng));
    }
    (UnitParams { lambda, sigma2 }, y0)
}

/// One specification estimated in every replication.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentArm {
    pub name: String,
    pub spec: ModelSpec,
    /// Build set forecasts (the costly `O(M^2)` density evaluation).
    pub sets: bool,
}

impl ExperimentArm {
    /// A named specification under random effects with `y0* ~ N(0, 1)`
    /// known, as in the synthetic designs.
    pub fn known_y0(name: &str, sets: bool) -> Result<Self> {
        let mut spec = ModelSpec::named(name, Dependence::Re, 0)?;
        spec.known_y0 = Some([0.0, 1.0]);
        Ok(Self { name: name.to_string(), spec, sets })
    }

    pub fn all_six(sets: bool) -> Vec<Self> {
        ModelSpec::NAMES.iter().map(|n| Self::known_y0(n, sets).expect("known name")).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dgp: DgpSpec,
    pub arms: Vec<ExperimentArm>,
    pub settings: SamplerSettings,
    pub alpha: f64,
    pub lps_floor: f64,
    pub parallel_reps: bool,
}

impl ExperimentConfig {
    pub fn new(dgp: DgpSpec, arms: Vec<ExperimentArm>, settings: SamplerSettings) -> Self {
        Self { dgp, arms, settings, alpha: 0.1, lps_floor: DEFAULT_LPS_FLOOR, parallel_reps: false }
    }
}

/// Metrics of one specification in one replication.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepMetrics {
    pub rep: usize,
    pub arm: String,
    pub zero_fraction: f64,
    pub rho_mean: f64,
    pub lps: f64,
    pub crps: f64,
    pub lps_floored: usize,
    pub average: Option<SetScores>,
    pub pointwise: Option<SetScores>,
}

/// Averages across successful replications.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub arm: String,
    pub n_reps: usize,
    pub n_failed: usize,
    pub rho_bias: f64,
    pub rho_sd: f64,
    pub lps: f64,
    pub crps: f64,
    pub avg_coverage: Option<f64>,
    pub avg_length: Option<f64>,
    pub pw_coverage: Option<f64>,
    pub pw_length: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub summaries: Vec<ArmSummary>,
    pub reps: Vec<RepMetrics>,
    pub failures: Vec<(usize, String, String)>,
}

/// Estimate one specification on a simulated replication and score its
/// one-step forecasts against the held-out period.
pub fn run_arm(cfg: &ExperimentConfig, arm_idx: usize, rep: usize, data: &PanelData) -> Result<RepMetrics> {
    let arm = &cfg.arms[arm_idx];
    let seed = derive_seed(cfg.dgp.rep_seed(rep), &[label::ARM, arm_idx as u64]);
    let settings = SamplerSettings { seed, ..cfg.settings.clone() };
    let tuning = PriorTuning::monte_carlo(data.v_star());
    let priors = default_priors(&arm.spec, &tuning)?;
    let draws = run_chain(data, &arm.spec, &priors, &settings)?;
    let comp = predictive_components(&draws, data, 1, None)?;
    let pds = build_predictive_densities(&comp, seed, arm.sets, settings.parallel_units)?;
    let y = data.holdout_column(1).ok_or_else(|| Error::Insufficient("no holdout period".into()))?;
    let scores = score_densities(&pds, &y, seed, cfg.lps_floor)?;
    let report = ScoreReport::new(&arm.name, &scores, None);
    let (average, pointwise) = if arm.sets {
        let avg = hpd_average(&pds, cfg.alpha)?;
        let pw: Vec<SetForecast> = pds.iter().map(|p| hpd_pointwise(p, cfg.alpha)).collect();
        (Some(evaluate_sets(&avg, &y)?), Some(evaluate_sets(&pw, &y)?))
    } else {
        (None, None)
    };
    Ok(RepMetrics {
        rep,
        arm: arm.name.clone(),
        zero_fraction: data.zero_fraction(),
        rho_mean: draws.posterior_mean_rho(),
        lps: report.lps,
        crps: report.crps,
        lps_floored: report.lps_floored,
        average,
        pointwise,
    })
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, var.sqrt())
}

/// For each replication: simulate, estimate every arm, forecast one step
/// ahead and score. Failed (replication, arm) pairs are logged and left out
/// of the averages.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.dgp.validate()?;
    let one_rep = |rep: usize| -> Result<Vec<std::result::Result<RepMetrics, (usize, String, String)>>> {
        let (_, data) = cfg.dgp.simulate(rep)?;
        Ok((0..cfg.arms.len())
            .map(|a| {
                run_arm(cfg, a, rep, &data).map_err(|e| {
                    log::warn!("replication {rep}, {}: {e}", cfg.arms[a].name);
                    (rep, cfg.arms[a].name.clone(), e.to_string())
                })
            })
            .inspect(|r| {
                if let Ok(m) = r {
                    log::info!("rep {} {}: rho {:.4} lps {:.4} crps {:.4}", m.rep, m.arm, m.rho_mean, m.lps, m.crps);
                }
            })
            .collect())
    };
    let per_rep: Vec<_> = if cfg.parallel_reps {
        (0..cfg.dgp.n_reps).into_par_iter().map(one_rep).collect::<Result<_>>()?
    } else {
        (0..cfg.dgp.n_reps).map(one_rep).collect::<Result<_>>()?
    };
    let mut reps = Vec::new();
    let mut failures = Vec::new();
    for r in per_rep.into_iter().flatten() {
        match r {
            Ok(m) => reps.push(m),
            Err(f) => failures.push(f),
        }
    }
    let summaries = cfg
        .arms
        .iter()
        .map(|arm| {
            let ms: Vec<&RepMetrics> = reps.iter().filter(|m| m.arm == arm.name).collect();
            let rho: Vec<f64> = ms.iter().map(|m| m.rho_mean - cfg.dgp.rho).collect();
            let (rho_bias, rho_sd) = mean_sd(&rho);
            let avg = |f: &dyn Fn(&RepMetrics) -> Option<f64>| -> Option<f64> {
                let v: Option<Vec<f64>> = ms.iter().map(|m| f(m)).collect();
                v.filter(|v| !v.is_empty()).map(|v| mean_sd(&v).0)
            };
            ArmSummary {
                arm: arm.name.clone(),
                n_reps: ms.len(),
                n_failed: failures.iter().filter(|f| f.1 == arm.name).count(),
                rho_bias,
                rho_sd,
                lps: avg(&|m| Some(m.lps)).unwrap_or(f64::NAN),
                crps: avg(&|m| Some(m.crps)).unwrap_or(f64::NAN),
                avg_coverage: avg(&|m| m.average.map(|s| s.coverage_freq)),
                avg_length: avg(&|m| m.average.map(|s| s.avg_length)),
                pw_coverage: avg(&|m| m.pointwise.map(|s| s.coverage_freq)),
                pw_length: avg(&|m| m.pointwise.map(|s| s.avg_length)),
            }
        })
        .collect();
    Ok(ExperimentReport { summaries, reps, failures })
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

impl ExperimentReport {
    /// One row per specification: bias and spread of the posterior mean of
    /// `rho`, LPS, CRPS, and coverage and length of both set types.
    pub fn write_table<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "spec",
            "rho_bias",
            "rho_sd",
            "lps",
            "crps",
            "avg_coverage",
            "avg_length",
            "pointwise_coverage",
            "pointwise_length",
            "n_reps",
            "n_failed",
        ])?;
        for s in &self.summaries {
            w.write_record([
                s.arm.clone(),
                fmt_f64(s.rho_bias),
                fmt_f64(s.rho_sd),
                fmt_f64(s.lps),
                fmt_f64(s.crps),
                opt(s.avg_coverage),
                opt(s.avg_length),
                opt(s.pw_coverage),
                opt(s.pw_length),
                s.n_reps.to_string(),
                s.n_failed.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// One row per (replication, specification).
    pub fn write_raw<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "rep",
            "spec",
            "zero_fraction",
            "rho_mean",
            "lps",
            "crps",
            "lps_floored",
            "avg_coverage",
            "avg_length",
            "pointwise_coverage",
            "pointwise_length",
        ])?;
        for m in &self.reps {
            w.write_record([
                m.rep.to_string(),
                m.arm.clone(),
                fmt_f64(m.zero_fraction),
                fmt_f64(m.rho_mean),
                fmt_f64(m.lps),
                fmt_f64(m.crps),
                m.lps_floored.to_string(),
                opt(m.average.map(|s| s.coverage_freq)),
                opt(m.average.map(|s| s.avg_length)),
                opt(m.pointwise.map(|s| s.coverage_freq)),
                opt(m.pointwise.map(|s| s.avg_length)),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary(&self, arm: &str) -> Option<&ArmSummary> {
        self.summaries.iter().find(|s| s.arm == arm)
    }
}
