//! A small simulation study comparing two specifications.

use paneltobit::gibbs::SamplerSettings;
use paneltobit::montecarlo::{run_experiment, Design, DgpSpec, ExperimentArm, ExperimentConfig};

fn main() -> paneltobit::Result<()> {
    let dgp = DgpSpec::design(Design::Table1, 300, 10, 3, 2024);
    let arms = vec![ExperimentArm::known_y0("flexible-het", true)?, ExperimentArm::known_y0("pooled-tobit", false)?];
    let settings = SamplerSettings { n_draws: 400, burn_in: 200, ..Default::default() };
    let mut cfg = ExperimentConfig::new(dgp, arms, settings);
    cfg.parallel_reps = true;
    let report = run_experiment(&cfg)?;
    report.write_table(std::io::stdout())?;
    for r in &report.reps {
        println!("rep {} {}: zero fraction {:.3}, rho {:.3}, LPS {:.3}", r.rep, r.arm, r.zero_fraction, r.rho_mean, r.lps);
    }
    Ok(())
}
