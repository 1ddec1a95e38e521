//! Command-line interface. The binary only parses arguments and calls
//! [`run`].

use crate::config::RunConfig;
use crate::diagnostics::{
    chain_diagnostics, posterior_predictive_checks, treatment_effect_decomposition, write_ppc_hairlines,
    write_ppc_summary, write_treatment,
};
use crate::error::{Error, Result};
use crate::forecast::{
    build_predictive_densities, forecast_records, hpd_average, hpd_pointwise, predictive_components,
    PredictiveDensity, SetForecast, SetMode,
};
use crate::gibbs::{run_chain, PosteriorDraws, SamplerSettings};
use crate::montecarlo::{run_experiment, Design, DgpSpec, ExperimentArm, ExperimentConfig};
use crate::panel::{fmt_f64, PanelData, StandardizeMode};
use crate::priors::{draw_prior_xi, probe_on_ellipse, prior_summary};
use crate::rng::{derive_seed, label, substream};
use crate::scoring::{evaluate_sets, score_densities, write_score_table, ScoreReport, DEFAULT_LPS_FLOOR};
use crate::store;
use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

#[derive(Parser, Debug)]
#[command(name = "paneltobit", version, about = "Bayesian dynamic panel Tobit estimation and forecasting")]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the Gibbs sampler and store the draws.
    Estimate(EstimateArgs),
    /// Density and set forecasts from stored draws.
    Forecast(ForecastArgs),
    /// Score forecasts against held-out periods.
    Evaluate(EvaluateArgs),
    /// Simulation study on a synthetic design.
    Montecarlo(MonteCarloArgs),
    /// Chain diagnostics and posterior predictive checks.
    Check(CheckArgs),
    /// Write a synthetic panel as CSV.
    Simulate(SimulateArgs),
    /// Summaries of the distributions implied by prior draws of the hyperparameters.
    Prior(PriorArgs),
    /// Intensive and extensive margins of a regressor change.
    Effects(EffectsArgs),
}

#[derive(Args, Debug)]
pub struct EstimateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the sampler seed in the config.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct ForecastArgs {
    #[arg(long)]
    pub draws: PathBuf,
    #[arg(long, default_value_t = 0.10)]
    pub alpha: f64,
    #[arg(long, default_value = "average")]
    pub mode: SetMode,
    #[arg(long, default_value_t = 1)]
    pub h: usize,
    /// Regressor path `x_{T+1..T+h-1}` as CSV `unit_id,time,x1,...`.
    #[arg(long)]
    pub x_future: Option<PathBuf>,
    /// Output directory (default: the draws directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// One or more estimation output directories; one pair of rows each.
    #[arg(long, required = true, num_args = 1..)]
    pub draws: Vec<PathBuf>,
    #[arg(long, default_value_t = 0.10)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1)]
    pub h: usize,
    #[arg(long, default_value_t = DEFAULT_LPS_FLOOR)]
    pub lps_floor: f64,
    /// Score table CSV.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct MonteCarloArgs {
    #[arg(long, default_value = "table1")]
    pub design: Design,
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 10)]
    pub t: usize,
    /// Comma-separated specification names.
    #[arg(long, default_value = "flexible-het,normal-het,flexible-hom,normal-hom,pooled-tobit,pooled-linear")]
    pub specs: String,
    /// Specifications that also get set forecasts (comma-separated, or `all`).
    #[arg(long, default_value = "all")]
    pub sets_for: String,
    #[arg(long, default_value_t = 2000)]
    pub draws: usize,
    #[arg(long, default_value_t = 1000)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 0.10)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    #[arg(long)]
    pub draws: PathBuf,
    /// Panel to compare with (default: the estimation data).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Comma-separated statistic names, or `all`.
    #[arg(long, default_value = "all")]
    pub stats: String,
    #[arg(long, default_value_t = 100)]
    pub hairlines: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long, default_value = "table1")]
    pub design: Design,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Estimation periods; one extra period is simulated for evaluation.
    #[arg(long, default_value_t = 10)]
    pub t: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub rep: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct PriorArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Panel supplying `V*` and the regressor distribution.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Probe-point level of the regressor ellipse.
    #[arg(long, default_value_t = 0.5)]
    pub level: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EffectsArgs {
    #[arg(long)]
    pub draws: PathBuf,
    /// Direction of the change, comma-separated; normalised to unit length.
    #[arg(long)]
    pub direction: String,
    #[arg(long)]
    pub dx: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn split_list(s: &str) -> Vec<String> {
    s.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect()
}

/// An estimation run loaded back from its output directory.
pub struct StoredRun {
    pub config: RunConfig,
    pub data: PanelData,
    pub draws: PosteriorDraws,
}

pub fn load_run(dir: &Path) -> Result<StoredRun> {
    let mut config = RunConfig::load(&dir.join("config.toml"))?;
    let raw = PanelData::read_csv_path(&dir.join("data.csv"), 0)?;
    let data = config.prepare_data(&raw)?;
    let draws = store::load_draws(&dir.join("draws.bin"))?;
    if draws.n_units != data.n_units || draws.n_periods != data.n_periods {
        return Err(Error::Store("draws do not match the stored data".into()));
    }
    Ok(StoredRun { config, data, draws })
}

pub fn estimate(args: &EstimateArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = args.seed {
        config.sampler.seed = s;
    }
    let raw = PanelData::read_csv_path(&args.data, 0)?;
    let data = config.prepare_data(&raw)?;
    let priors = config.priors(&data)?;
    log::info!(
        "estimating {} on N = {}, T = {}, {} regressors",
        config.model.short_name(),
        data.n_units,
        data.n_periods,
        data.n_x
    );
    let draws = run_chain(&data, &config.model, &priors, &config.sampler)?;
    fs::create_dir_all(&args.out)?;
    config.save(&args.out.join("config.toml"))?;
    raw.write_csv(create(&args.out.join("data.csv"))?)?;
    store::save_draws(&draws, &args.out.join("draws.bin"))?;
    store::write_common_summary(&draws, create(&args.out.join("summary_common.csv"))?)?;
    store::write_unit_summary(&draws, &data.unit_ids, create(&args.out.join("summary_units.csv"))?)?;
    store::write_trace(&draws.trace, config.sampler.burn_in, create(&args.out.join("trace.csv"))?)?;
    Ok(())
}

/// Reads `unit_id,time,x1..xk` rows for periods `T+1..T+h-1` into the
/// unit-major layout used by [`predictive_components`].
pub fn read_x_future(path: &Path, data: &PanelData, h: usize) -> Result<Vec<f64>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let k = data.n_x;
    let steps = h - 1;
    let mut out = vec![f64::NAN; data.n_units * steps * k];
    let index: std::collections::HashMap<&str, usize> =
        data.unit_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = r + 2;
        let bad = |msg: String| Error::Parse { row, msg };
        if rec.len() != k + 2 {
            return Err(bad(format!("expected {} fields", k + 2)));
        }
        let i = *index.get(&rec[0]).ok_or_else(|| bad(format!("unknown unit {:?}", &rec[0])))?;
        let t: usize = rec[1].parse().map_err(|_| bad("bad time".into()))?;
        if t <= data.n_periods || t > data.n_periods + steps {
            continue;
        }
        let s = t - data.n_periods - 1;
        for j in 0..k {
            out[(i * steps + s) * k + j] = rec[2 + j].parse().map_err(|_| bad("bad regressor".into()))?;
        }
    }
    if out.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidParameter("x_future does not cover every unit and period".into()));
    }
    if let Some(st) = &data.standardization {
        if st.mode != StandardizeMode::None {
            let slot = if st.mode == StandardizeMode::PerPeriod { data.n_periods + 1 } else { 0 };
            for cell in out.chunks_mut(k) {
                for j in 0..k {
                    cell[j] = (cell[j] - st.mean[slot * k + j]) / st.sd[slot * k + j];
                }
            }
        }
    }
    Ok(out)
}

fn densities(run: &StoredRun, h: usize, x_future: Option<&[f64]>, seed: u64, with_density: bool) -> Result<Vec<PredictiveDensity>> {
    let comp = predictive_components(&run.draws, &run.data, h, x_future)?;
    build_predictive_densities(&comp, derive_seed(seed, &[label::PREDICTIVE, h as u64]), with_density, true)
}

fn sets_for(pds: &[PredictiveDensity], mode: SetMode, alpha: f64) -> Result<Vec<SetForecast>> {
    match mode {
        SetMode::Pointwise => Ok(pds.iter().map(|p| hpd_pointwise(p, alpha)).collect()),
        SetMode::Average => hpd_average(pds, alpha),
    }
}

pub fn forecast(args: &ForecastArgs) -> Result<()> {
    let run = load_run(&args.draws)?;
    let seed = args.seed.unwrap_or(run.config.sampler.seed);
    let xf = match &args.x_future {
        Some(p) => Some(read_x_future(p, &run.data, args.h)?),
        None => None,
    };
    let pds = densities(&run, args.h, xf.as_deref(), seed, true)?;
    let sets = sets_for(&pds, args.mode, args.alpha)?;
    let records = forecast_records(&run.data.unit_ids, &pds, &sets);
    let out = args.out.clone().unwrap_or_else(|| args.draws.clone());
    fs::create_dir_all(&out)?;
    let stem = format!("forecast_h{}_{}", args.h, args.mode);
    let mut w = create(&out.join(format!("{stem}.jsonl")))?;
    for r in &records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    let mut c = csv::Writer::from_writer(create(&out.join(format!("{stem}.csv")))?);
    c.write_record(["unit_id", "mode", "alpha", "includes_zero", "segments", "point_forecast", "pi0"])?;
    for r in &records {
        let segs: Vec<String> = r.segments.iter().map(|[a, b]| format!("[{a},{b}]")).collect();
        c.write_record([
            r.unit_id.clone(),
            r.mode.to_string(),
            r.alpha.to_string(),
            r.includes_zero.to_string(),
            segs.join(";"),
            r.point_forecast.to_string(),
            r.pi0.to_string(),
        ])?;
    }
    c.flush()?;
    Ok(())
}

pub fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let mut reports = Vec::new();
    for dir in &args.draws {
        let run = load_run(dir)?;
        let seed = args.seed.unwrap_or(run.config.sampler.seed);
        let y = run.data.holdout_column(args.h).ok_or_else(|| {
            Error::Insufficient(format!("{} has no held-out period {}", dir.display(), args.h))
        })?;
        let pds = densities(&run, args.h, None, seed, true)?;
        let scores = score_densities(&pds, &y, derive_seed(seed, &[label::SCORING, args.h as u64]), args.lps_floor)?;
        let name = run.config.model.short_name();
        for mode in [SetMode::Average, SetMode::Pointwise] {
            let sets = sets_for(&pds, mode, args.alpha)?;
            let s = evaluate_sets(&sets, &y)?;
            reports.push(ScoreReport::new(&format!("{name}:{mode}"), &scores, Some(&s)));
        }
    }
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    write_score_table(&reports, create(&args.out)?)
}

pub fn montecarlo(args: &MonteCarloArgs) -> Result<()> {
    let names = split_list(&args.specs);
    let sets = split_list(&args.sets_for);
    let arms = names
        .iter()
        .map(|n| ExperimentArm::known_y0(n, sets.iter().any(|s| s == "all" || s == n)))
        .collect::<Result<Vec<_>>>()?;
    let dgp = DgpSpec::design(args.design, args.n, args.t, args.reps, args.seed);
    let settings = SamplerSettings { n_draws: args.draws, burn_in: args.burn_in, ..Default::default() };
    let mut cfg = ExperimentConfig::new(dgp, arms, settings);
    cfg.alpha = args.alpha;
    cfg.parallel_reps = true;
    let report = run_experiment(&cfg)?;
    fs::create_dir_all(&args.out)?;
    report.write_table(create(&args.out.join("table.csv"))?)?;
    report.write_raw(create(&args.out.join("replications.csv"))?)?;
    fs::write(args.out.join("experiment.json"), serde_json::to_string_pretty(&cfg)?)?;
    if !report.failures.is_empty() {
        let mut w = csv::Writer::from_writer(create(&args.out.join("failures.csv"))?);
        w.write_record(["rep", "spec", "error"])?;
        for (r, s, e) in &report.failures {
            w.write_record([r.to_string(), s.clone(), e.clone()])?;
        }
        w.flush()?;
    }
    Ok(())
}

pub fn check(args: &CheckArgs) -> Result<()> {
    let run = load_run(&args.draws)?;
    let data = match &args.data {
        Some(p) => {
            let mut c = run.config.clone();
            c.prepare_data(&PanelData::read_csv_path(p, 0)?)?
        }
        None => run.data.clone(),
    };
    let seed = args.seed.unwrap_or(run.config.sampler.seed);
    let names: Vec<String> = if args.stats == "all" { vec![] } else { split_list(&args.stats) };
    let hairlines = args.hairlines.min(run.draws.n_draws());
    let stats = posterior_predictive_checks(&run.draws, &data, hairlines, &names, derive_seed(seed, &[label::PPC]))?;
    fs::create_dir_all(&args.out)?;
    write_ppc_summary(&stats, create(&args.out.join("ppc_summary.csv"))?)?;
    write_ppc_hairlines(&stats, create(&args.out.join("ppc_hairlines.csv"))?)?;
    let chain = chain_diagnostics(&run.draws);
    chain.write_summary(create(&args.out.join("chain_summary.csv"))?)?;
    chain.write_acf(create(&args.out.join("chain_acf.csv"))?)?;
    Ok(())
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let dgp = DgpSpec::design(args.design, args.n, args.t, args.rep + 1, args.seed);
    let (_, data) = dgp.simulate(args.rep)?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    data.write_csv(create(&args.out)?)
}

pub fn prior(args: &PriorArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let data = config.prepare_data(&PanelData::read_csv_path(&args.data, 0)?)?;
    let bundle = config.priors(&data)?;
    let mut rng = substream(args.seed, &[label::PRIOR]);
    let xis = (0..args.n).map(|_| draw_prior_xi(&bundle, &config.model, &mut rng)).collect::<Result<Vec<_>>>()?;
    let k = data.n_x;
    let mut probes: Vec<(String, Vec<f64>)> = Vec::new();
    let x0: Vec<Vec<f64>> = (0..data.n_units).map(|i| data.x_row(i, -1).to_vec()).collect();
    let mean: Vec<f64> = (0..k).map(|j| x0.iter().map(|r| r[j]).sum::<f64>() / data.n_units as f64).collect();
    probes.push(("center".into(), mean.clone()));
    if k > 0 {
        let mut cov = DMatrix::zeros(k, k);
        for r in &x0 {
            for a in 0..k {
                for b in 0..k {
                    cov[(a, b)] += (r[a] - mean[a]) * (r[b] - mean[b]) / data.n_units as f64;
                }
            }
        }
        for j in 0..k {
            let mut dir = vec![0.0; k];
            dir[j] = 1.0;
            let off = probe_on_ellipse(&cov, &dir, args.level)?;
            probes.push((format!("ellipse_x{}", j + 1), mean.iter().zip(&off).map(|(m, o)| m + o).collect()));
        }
    }
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let mut w = csv::Writer::from_writer(create(&args.out)?);
    w.write_record([
        "probe", "draw", "lambda_mean", "lambda_sd", "lambda_skewness", "lambda_kurtosis", "lambda_modes",
        "y0_mean", "y0_sd", "y0_skewness", "y0_kurtosis", "y0_modes", "corr_lambda_y0",
    ])?;
    for (name, x) in &probes {
        for r in prior_summary(&xis, x) {
            let f = |v: f64| fmt_f64(v);
            w.write_record([
                name.clone(),
                r.draw.to_string(),
                f(r.lambda_mean),
                f(r.lambda_sd),
                f(r.lambda_skewness),
                f(r.lambda_kurtosis),
                r.lambda_modes.to_string(),
                f(r.y0_mean),
                f(r.y0_sd),
                f(r.y0_skewness),
                f(r.y0_kurtosis),
                r.y0_modes.to_string(),
                f(r.corr_lambda_y0),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn effects(args: &EffectsArgs) -> Result<()> {
    let run = load_run(&args.draws)?;
    let dir: Vec<f64> = split_list(&args.direction)
        .iter()
        .map(|v| v.parse::<f64>().map_err(|_| Error::Config(format!("bad direction entry {v:?}"))))
        .collect::<Result<_>>()?;
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::InvalidParameter("zero direction".into()));
    }
    let iota: Vec<f64> = dir.iter().map(|v| v / norm).collect();
    let seed = args.seed.unwrap_or(run.config.sampler.seed);
    let rows = treatment_effect_decomposition(&run.draws, &run.data, &iota, args.dx, seed)?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    write_treatment(&rows, create(&args.out)?)
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    match &cli.command {
        Command::Estimate(a) => estimate(a),
        Command::Forecast(a) => forecast(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Montecarlo(a) => montecarlo(a),
        Command::Check(a) => check(a),
        Command::Simulate(a) => simulate(a),
        Command::Prior(a) => prior(a),
        Command::Effects(a) => effects(a),
    }
}
