//! Pointwise and average-coverage HPD sets for the same predictive densities.

use paneltobit::forecast::{
    build_predictive_densities, hpd_average, hpd_pointwise, predictive_components, SetForecast, SetType,
};
use paneltobit::gibbs::{run_chain, SamplerSettings};
use paneltobit::montecarlo::{Design, DgpSpec};
use paneltobit::priors::{default_priors, Dependence, ModelSpec, PriorTuning};

fn describe(s: &SetForecast) -> String {
    match s.set_type() {
        SetType::Empty => "empty".into(),
        SetType::ZeroOnly => "{0}".into(),
        _ => {
            let segs: Vec<String> = s.segments.iter().map(|(a, b)| format!("[{a:.2}, {b:.2}]")).collect();
            format!("{{0}} u {}", segs.join(" u "))
        }
    }
}

fn main() -> paneltobit::Result<()> {
    let (_, data) = DgpSpec::design(Design::Table1, 300, 10, 1, 21).simulate(0)?;
    let mut spec = ModelSpec::named("flexible-het", Dependence::Re, 0)?;
    spec.known_y0 = Some([0.0, 1.0]);
    let priors = default_priors(&spec, &PriorTuning::monte_carlo(data.v_star()))?;
    let settings = SamplerSettings { n_draws: 500, burn_in: 300, seed: 2, ..Default::default() };
    let draws = run_chain(&data, &spec, &priors, &settings)?;
    let pds = build_predictive_densities(&predictive_components(&draws, &data, 1, None)?, 4, true, true)?;

    let alpha = 0.10;
    let pointwise: Vec<SetForecast> = pds.iter().map(|p| hpd_pointwise(p, alpha)).collect();
    let average = hpd_average(&pds, alpha)?;
    for i in 0..6 {
        println!("unit {i} (pi0 {:.2})", pds[i].pi0);
        println!("  pointwise: {}", describe(&pointwise[i]));
        println!("  average:   {}", describe(&average[i]));
    }

    let n = pds.len() as f64;
    for (name, sets) in [("pointwise", &pointwise), ("average", &average)] {
        let mass: f64 = pds.iter().zip(sets.iter()).map(|(p, s)| p.set_mass(s)).sum::<f64>() / n;
        let length: f64 = sets.iter().map(|s| s.length()).sum::<f64>() / n;
        println!("{name}: mean posterior mass {mass:.3}, mean length {length:.3}");
    }
    Ok(())
}
