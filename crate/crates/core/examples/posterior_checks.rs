//! Posterior predictive checks and the treatment-effect decomposition on a
//! panel with one regressor.

use paneltobit::diagnostics::{posterior_predictive_checks, treatment_effect_decomposition};
use paneltobit::distributions::std_normal;
use paneltobit::gibbs::{run_chain, SamplerSettings};
use paneltobit::panel::{simulate_panel, CommonParams, StandardizeMode, UnitParams};
use paneltobit::priors::{default_priors, Dependence, ModelSpec, PriorTuning};
use paneltobit::rng::substream;
use paneltobit::store::quantile;

fn main() -> paneltobit::Result<()> {
    let (n, t) = (400, 10);
    let mut rng = substream(31, &[0]);
    let lambda: Vec<f64> = (0..n).map(|_| 0.3 + 0.8 * std_normal(&mut rng)).collect();
    let sigma2: Vec<f64> = (0..n).map(|_| (0.5 * std_normal(&mut rng)).exp()).collect();
    let y0: Vec<f64> = (0..n).map(|_| std_normal(&mut rng)).collect();
    let x: Vec<f64> = (0..n * (t + 3)).map(|_| std_normal(&mut rng)).collect();
    let (_, full) = simulate_panel(&UnitParams { lambda, sigma2 }, &CommonParams { rho: 0.6, beta: vec![0.5] }, &y0, &x, t + 1, 31)?;
    let mut data = full.split_holdout(1)?;
    data.standardize(StandardizeMode::Pooled);

    let spec = ModelSpec::named("flexible-het", Dependence::Cre, 1)?;
    let priors = default_priors(&spec, &PriorTuning::monte_carlo(data.v_star()))?;
    let settings = SamplerSettings { n_draws: 600, burn_in: 300, seed: 4, ..Default::default() };
    let draws = run_chain(&data, &spec, &priors, &settings)?;

    let stats = posterior_predictive_checks(&draws, &data, 100, &[], 8)?;
    for s in &stats {
        if s.grid.len() == 1 {
            let mut rep: Vec<f64> = s.replicated.iter().map(|r| r[0]).collect();
            rep.sort_by(f64::total_cmp);
            println!(
                "{:<24} observed {:.3}, replicated 5-95% [{:.3}, {:.3}]",
                s.name,
                s.observed[0],
                quantile(&rep, 0.05),
                quantile(&rep, 0.95)
            );
        } else {
            println!("{:<24} density on {} grid points", s.name, s.grid.len());
        }
    }

    let effects = treatment_effect_decomposition(&draws, &data, &[1.0], 0.5, 12)?;
    let mean_i = effects.iter().map(|e| e.term_i_mean).sum::<f64>() / n as f64;
    let mean_ii = effects.iter().map(|e| e.term_ii_mean).sum::<f64>() / n as f64;
    println!("average intensive term {mean_i:.3}, average extensive term {mean_ii:.3}");
    let mut by_ratio: Vec<_> = effects.iter().collect();
    by_ratio.sort_by(|a, b| a.lambda_over_sigma.total_cmp(&b.lambda_over_sigma));
    for e in [by_ratio[0], by_ratio[n / 2], by_ratio[n - 1]] {
        println!(
            "unit {} (lambda/sigma {:.2}): I {:.3} [{:.3}, {:.3}], II {:.3}",
            e.unit_id, e.lambda_over_sigma, e.term_i_mean, e.term_i_q05, e.term_i_q95, e.term_ii_mean
        );
    }
    Ok(())
}
