//! Moments of the correlated random-effects distribution implied by prior
//! draws of the mixture hyperparameters, under both prior presets.

use nalgebra::DMatrix;
use paneltobit::priors::{
    default_priors, draw_prior_xi, probe_on_ellipse, prior_summary, Dependence, ModelSpec, PriorTuning,
};
use paneltobit::rng::substream;
use paneltobit::store::summarize;

fn main() -> paneltobit::Result<()> {
    let spec = ModelSpec::named("flexible-het", Dependence::Cre, 2)?;
    let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 1.0]);
    let probe = probe_on_ellipse(&cov, &[1.0, 1.0], 0.5)?;
    println!("probe point on the 50% ellipse: {probe:.3?}");

    for (name, tuning) in [("monte carlo", PriorTuning::monte_carlo(1.0)), ("adjusted", PriorTuning::adjusted(1.0))] {
        let bundle = default_priors(&spec, &tuning)?;
        let mut rng = substream(17, &[1]);
        let xis = (0..2000).map(|_| draw_prior_xi(&bundle, &spec, &mut rng)).collect::<paneltobit::Result<Vec<_>>>()?;
        let rows = prior_summary(&xis, &probe);
        let col = |f: fn(&paneltobit::priors::PriorSummaryRow) -> f64| {
            let v: Vec<f64> = rows.iter().map(f).filter(|v| v.is_finite()).collect();
            summarize(&v)
        };
        println!("{name} prior:");
        for (label, s) in [
            ("lambda mean", col(|r| r.lambda_mean)),
            ("lambda sd", col(|r| r.lambda_sd)),
            ("lambda skewness", col(|r| r.lambda_skewness)),
            ("corr(lambda, y0)", col(|r| r.corr_lambda_y0)),
        ] {
            println!("  {label:<17} median {:>7.3}  90% [{:.3}, {:.3}]", s[3], s[2], s[4]);
        }
        let multimodal = rows.iter().filter(|r| r.lambda_modes > 1).count() as f64 / rows.len() as f64;
        println!("  share of draws with a multimodal lambda density {multimodal:.3}");
    }
    Ok(())
}
