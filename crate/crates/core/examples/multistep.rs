//! Two-step-ahead forecasts, iterated from the one-step model and from the
//! direct lag-2 model.

use paneltobit::forecast::{build_predictive_densities, predictive_components};
use paneltobit::gibbs::{direct_multistep_estimate, run_chain, SamplerSettings};
use paneltobit::montecarlo::{Design, DgpSpec};
use paneltobit::priors::{default_priors, Dependence, ModelSpec, PriorTuning};
use paneltobit::scoring::{score_densities, DEFAULT_LPS_FLOOR};

fn main() -> paneltobit::Result<()> {
    let (_, one) = DgpSpec::design(Design::Table1, 400, 11, 1, 13).simulate(0)?;
    // Hold out the last two periods instead of one.
    let data = {
        let y: Vec<f64> = (0..one.n_units)
            .flat_map(|i| {
                let mut r = one.y_row(i).to_vec();
                r.push(one.holdout(i, 1).expect("held out"));
                r
            })
            .collect();
        paneltobit::panel::PanelData::without_regressors(one.n_units, one.n_periods + 1, y)?.split_holdout(2)?
    };
    let y2 = data.holdout_column(2).expect("second held-out period");

    let mut spec = ModelSpec::named("flexible-het", Dependence::Re, 0)?;
    spec.known_y0 = Some([0.0, 1.0]);
    let priors = default_priors(&spec, &PriorTuning::monte_carlo(data.v_star()))?;
    let settings = SamplerSettings { n_draws: 500, burn_in: 300, seed: 3, ..Default::default() };

    let iterated = run_chain(&data, &spec, &priors, &settings)?;
    let direct = direct_multistep_estimate(&data, &spec, &priors, &settings, 2)?;
    println!("rho: one-step model {:.3}, direct lag-2 model {:.3}", iterated.posterior_mean_rho(), direct.posterior_mean_rho());

    for (name, draws) in [("iterated", &iterated), ("direct", &direct)] {
        let pds = build_predictive_densities(&predictive_components(draws, &data, 2, None)?, 1, false, true)?;
        let s = score_densities(&pds, &y2, 1, DEFAULT_LPS_FLOOR)?;
        let n = s.len() as f64;
        println!(
            "{name}: two-step LPS {:.3}, CRPS {:.3}",
            s.iter().map(|u| u.lps).sum::<f64>() / n,
            s.iter().map(|u| u.crps).sum::<f64>() / n
        );
    }
    Ok(())
}
