//! Run the Gibbs sampler on a simulated panel and summarise the chain.

use paneltobit::diagnostics::chain_diagnostics;
use paneltobit::gibbs::{run_chain, SamplerSettings};
use paneltobit::montecarlo::{Design, DgpSpec};
use paneltobit::priors::{default_priors, Dependence, ModelSpec, PriorTuning};
use paneltobit::store::summarize;

fn main() -> paneltobit::Result<()> {
    let dgp = DgpSpec::design(Design::Table1, 500, 10, 1, 11);
    let (_, data) = dgp.simulate(0)?;

    let mut spec = ModelSpec::named("flexible-het", Dependence::Re, 0)?;
    spec.known_y0 = Some([0.0, 1.0]);
    let priors = default_priors(&spec, &PriorTuning::monte_carlo(data.v_star()))?;
    let settings = SamplerSettings { n_draws: 1000, burn_in: 500, seed: 3, ..Default::default() };
    let draws = run_chain(&data, &spec, &priors, &settings)?;

    let s = summarize(&draws.rho);
    println!("rho: true {:.2}, posterior mean {:.4}, 90% band [{:.4}, {:.4}]", dgp.rho, s[0], s[2], s[4]);

    let report = chain_diagnostics(&draws);
    for p in &report.parameters {
        println!("{}: ESS {:.0} of {}, lag-1 ACF {:.3}", p.parameter, p.ess, draws.n_draws(), p.acf[1]);
    }
    println!("variance-step acceptance rate {:.3}", report.accept_rate);

    for (i, (lambda, sigma2)) in draws.unit_means().iter().take(5).enumerate() {
        println!("unit {i}: E[lambda] {lambda:.3}, E[sigma^2] {sigma2:.3}");
    }
    Ok(())
}
