//! One-step predictive densities: the zero atom, the continuous part and
//! the point forecast.

use paneltobit::forecast::{build_predictive_densities, predictive_components};
use paneltobit::gibbs::{run_chain, SamplerSettings};
use paneltobit::montecarlo::{Design, DgpSpec};
use paneltobit::priors::{default_priors, Dependence, ModelSpec, PriorTuning};

fn main() -> paneltobit::Result<()> {
    let (_, data) = DgpSpec::design(Design::Table1, 300, 10, 1, 5).simulate(0)?;
    let mut spec = ModelSpec::named("flexible-het", Dependence::Re, 0)?;
    spec.known_y0 = Some([0.0, 1.0]);
    let priors = default_priors(&spec, &PriorTuning::monte_carlo(data.v_star()))?;
    let settings = SamplerSettings { n_draws: 500, burn_in: 300, seed: 1, ..Default::default() };
    let draws = run_chain(&data, &spec, &priors, &settings)?;

    let comp = predictive_components(&draws, &data, 1, None)?;
    let pds = build_predictive_densities(&comp, 9, true, true)?;
    let realized = data.holdout_column(1).expect("one held-out period");

    println!("unit  y_T   pi0    point  P(y<=1)  p(1)   realized");
    for i in 0..8 {
        let pd = &pds[i];
        println!(
            "{i:>4}  {:.2}  {:.3}  {:.3}  {:.3}    {:.3}  {:.3}",
            data.y(i, data.n_periods),
            pd.pi0,
            pd.point_forecast,
            pd.cdf(1.0),
            pd.continuous_density(1.0),
            realized[i]
        );
    }

    let mass: f64 = pds[0].pi0 + pds[0].weights.iter().sum::<f64>() / pds[0].n_draws() as f64;
    println!("unit 0: zero mass plus continuous mass = {mass:.12}");
    Ok(())
}
