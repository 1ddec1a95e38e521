//! Score density and set forecasts against the held-out period.

use paneltobit::forecast::{build_predictive_densities, hpd_average, hpd_pointwise, predictive_components};
use paneltobit::gibbs::{run_chain, SamplerSettings};
use paneltobit::montecarlo::{Design, DgpSpec};
use paneltobit::priors::{default_priors, Dependence, ModelSpec, PriorTuning};
use paneltobit::scoring::{
    crps_pairwise, crps_riemann, evaluate_sets, score_densities, write_score_table, ScoreReport, DEFAULT_LPS_FLOOR,
};

fn main() -> paneltobit::Result<()> {
    // Both CRPS formulas on a sample with a zero atom and a tie.
    let sample = [0.0, 0.0, 0.4, 1.1, 1.1, 2.5];
    println!("CRPS at 1.0: riemann {:.12}, pairwise {:.12}", crps_riemann(&sample, 1.0)?, crps_pairwise(&sample, 1.0)?);

    let (_, data) = DgpSpec::design(Design::Table1, 400, 10, 1, 8).simulate(0)?;
    let y = data.holdout_column(1).expect("held-out period");
    let mut reports = Vec::new();
    for name in ["flexible-het", "pooled-tobit"] {
        let mut spec = ModelSpec::named(name, Dependence::Re, 0)?;
        spec.known_y0 = Some([0.0, 1.0]);
        let priors = default_priors(&spec, &PriorTuning::monte_carlo(data.v_star()))?;
        let settings = SamplerSettings { n_draws: 500, burn_in: 300, seed: 6, ..Default::default() };
        let draws = run_chain(&data, &spec, &priors, &settings)?;
        let pds = build_predictive_densities(&predictive_components(&draws, &data, 1, None)?, 6, true, true)?;
        let units = score_densities(&pds, &y, 6, DEFAULT_LPS_FLOOR)?;
        let avg = evaluate_sets(&hpd_average(&pds, 0.1)?, &y)?;
        let pw: Vec<_> = pds.iter().map(|p| hpd_pointwise(p, 0.1)).collect();
        let pw = evaluate_sets(&pw, &y)?;
        reports.push(ScoreReport::new(&format!("{name}:average"), &units, Some(&avg)));
        reports.push(ScoreReport::new(&format!("{name}:pointwise"), &units, Some(&pw)));

        let mut pits: Vec<f64> = units.iter().map(|u| u.pit).collect();
        pits.sort_by(f64::total_cmp);
        println!("{name}: PIT deciles {:?}", (1..10).map(|d| (pits[d * pits.len() / 10] * 100.0).round() / 100.0).collect::<Vec<_>>());
    }
    write_score_table(&reports, std::io::stdout())
}
