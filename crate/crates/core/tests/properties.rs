use paneltobit::config::RunConfig;
use paneltobit::forecast::{build_predictive_density, hpd_average, hpd_pointwise, PredictiveDensity, SetForecast};
use paneltobit::gibbs::{PosteriorDraws, SamplerSettings, SweepTrace};
use paneltobit::panel::PanelData;
use paneltobit::priors::{Dependence, MixtureHyperparams, ModelSpec};
use paneltobit::rng::substream;
use paneltobit::scoring::{crps_pairwise, crps_riemann, evaluate_sets, pit};
use paneltobit::store::{read_draws, write_draws};
use proptest::prelude::*;

fn density(mu: &[f64], sd: &[f64], seed: u64) -> PredictiveDensity {
    build_predictive_density(mu, sd, true, &mut substream(seed, &[0])).unwrap()
}

fn moments() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (5usize..80).prop_flat_map(|m| (prop::collection::vec(-3.0f64..4.0, m), prop::collection::vec(0.2f64..3.0, m)))
}

fn well_formed(s: &SetForecast) -> bool {
    let ordered = s.segments.iter().all(|&(a, b)| 0.0 <= a && a < b);
    let disjoint = s.segments.windows(2).all(|w| w[0].1 < w[1].0);
    ordered && disjoint
}

/// Continuous mass of the samples that fall inside the set's segments.
fn inside_mass(pd: &PredictiveDensity, s: &SetForecast) -> f64 {
    let m = pd.n_draws() as f64;
    pd.samples
        .iter()
        .zip(&pd.weights)
        .filter(|(y, _)| s.segments.iter().any(|&(a, b)| a <= **y && **y <= b))
        .map(|(_, w)| w / m)
        .sum()
}

fn sample_with_atoms() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![2 => Just(0.0), 1 => Just(1.25), 5 => 0.0f64..6.0], 1..60)
}

proptest! {
    #[test]
    fn crps_formulas_agree(mut s in sample_with_atoms(), y in prop_oneof![Just(0.0), Just(1.25), 0.0f64..8.0]) {
        s.sort_by(f64::total_cmp);
        let a = crps_riemann(&s, y).unwrap();
        let b = crps_pairwise(&s, y).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
        prop_assert!(a >= -1e-12);
    }

    #[test]
    fn pit_is_a_cdf(mut s in sample_with_atoms(), y1 in 0.0f64..8.0, dy in 0.0f64..3.0) {
        s.sort_by(f64::total_cmp);
        let (p1, p2) = (pit(&s, y1), pit(&s, y1 + dy));
        prop_assert!((0.0..=1.0).contains(&p1) && p1 <= p2);
    }

    #[test]
    fn pointwise_sets_are_ordered_and_nested((mu, sd) in moments(), seed in 0u64..1000) {
        let pd = density(&mu, &sd, seed);
        let mut prev = f64::INFINITY;
        for alpha in [0.05, 0.1, 0.2, 0.4] {
            let s = hpd_pointwise(&pd, alpha);
            prop_assert!(well_formed(&s));
            prop_assert!(s.includes_zero);
            prop_assert!(s.length() <= prev + 1e-12);
            prev = s.length();
        }
    }

    #[test]
    fn pointwise_mass_stops_at_target((mu, sd) in moments(), seed in 0u64..1000) {
        let pd = density(&mu, &sd, seed);
        let alpha = 0.1;
        let s = hpd_pointwise(&pd, alpha);
        let m = pd.n_draws() as f64;
        if pd.pi0 < 1.0 - alpha {
            // Accumulation stops as soon as the target is reached, so the
            // mass inside the segments overshoots by at most one weight.
            prop_assert!(pd.pi0 + inside_mass(&pd, &s) <= 1.0 - alpha + 1.0 / m + 1e-9);
        }
    }

    #[test]
    fn average_sets_stop_at_target(units in prop::collection::vec(moments(), 1..5), seed in 0u64..1000) {
        let m = units.iter().map(|(mu, _)| mu.len()).min().unwrap();
        let pds: Vec<_> = units.iter().enumerate()
            .map(|(i, (mu, sd))| density(&mu[..m], &sd[..m], seed + i as u64))
            .collect();
        let alpha = 0.1;
        let sets = hpd_average(&pds, alpha).unwrap();
        prop_assert!(sets.iter().all(well_formed));
        let n = pds.len() as f64;
        let pi0_bar = pds.iter().map(|p| p.pi0).sum::<f64>() / n;
        if pi0_bar < 1.0 - alpha {
            let covered = pds.iter().zip(&sets).map(|(p, s)| inside_mass(p, s)).sum::<f64>() / n;
            prop_assert!(pi0_bar + covered <= 1.0 - alpha + 1.0 / (n * m as f64) + 1e-9);
        }
    }

    #[test]
    fn average_of_one_unit_is_pointwise((mu, sd) in moments(), seed in 0u64..1000, alpha in 0.02f64..0.5) {
        let pd = density(&mu, &sd, seed);
        let avg = hpd_average(std::slice::from_ref(&pd), alpha).unwrap();
        let pw = hpd_pointwise(&pd, alpha);
        prop_assert_eq!(&avg[0].segments, &pw.segments);
        prop_assert_eq!(avg[0].includes_zero, pw.includes_zero);
    }

    #[test]
    fn set_scores_are_bounded((mu, sd) in moments(), ys in prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..10.0], 4)) {
        let pds: Vec<_> = (0..4).map(|i| density(&mu, &sd, i)).collect();
        let sets: Vec<_> = pds.iter().map(|p| hpd_pointwise(p, 0.1)).collect();
        let s = evaluate_sets(&sets, &ys).unwrap();
        prop_assert!((0.0..=1.0).contains(&s.coverage_freq));
        prop_assert!(s.avg_length >= 0.0);
        let f = s.set_type_fractions;
        let total = f.zero_only + f.zero_to_b + f.zero_and_interval + f.empty + f.multi_segment;
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn draws_survive_the_store(
        n in 1usize..6, t in 2usize..5, m in 1usize..5, k in 0usize..3,
        vals in prop::collection::vec(any::<f64>(), 64),
    ) {
        let spec = ModelSpec::named("flexible-het", Dependence::Cre, k).unwrap();
        let xi = MixtureHyperparams::flat_len(&spec);
        let pick = |len: usize, off: usize| (0..len).map(|i| vals[(i + off) % vals.len()]).collect::<Vec<_>>();
        let d = PosteriorDraws {
            spec,
            settings: SamplerSettings { n_draws: m, burn_in: 0, ..Default::default() },
            n_units: n,
            n_periods: t,
            n_x: k,
            rho: pick(m, 0),
            beta: pick(m * k, 1),
            lambda: pick(m * n, 2),
            sigma2: pick(m * n, 3),
            y_star_last: pick(m * n, 4),
            xi: pick(m * xi, 5),
            trace: SweepTrace { rho: pick(m, 6), log_lik: pick(m, 7), accept_rate: pick(m, 8) },
        };
        let mut buf = Vec::new();
        write_draws(&d, &mut buf).unwrap();
        let back = read_draws(buf.as_slice()).unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&back.lambda), bits(&d.lambda));
        prop_assert_eq!(bits(&back.xi), bits(&d.xi));
        prop_assert_eq!(bits(&back.trace.accept_rate), bits(&d.trace.accept_rate));
        prop_assert_eq!(back.spec, d.spec);
    }

    #[test]
    fn panel_csv_round_trip(
        n in 1usize..5, t in 1usize..5, k in 0usize..3,
        cells in prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..50.0], 40),
        xs in prop::collection::vec(-5.0f64..5.0, 80),
    ) {
        let y: Vec<f64> = (0..n * (t + 1)).map(|i| cells[i % cells.len()]).collect();
        let x: Vec<f64> = (0..n * (t + 2) * k).map(|i| xs[i % xs.len()]).collect();
        let data = PanelData::new(n, t, k, y, x).unwrap();
        let mut buf = Vec::new();
        data.write_csv(&mut buf).unwrap();
        let back = PanelData::read_csv(buf.as_slice(), 0).unwrap();
        prop_assert_eq!(back.y, data.y);
        prop_assert_eq!(back.x, data.x);
    }

    #[test]
    fn config_toml_round_trip(
        draws in 1usize..100_000, burn in 0usize..10_000, seed in 0u64..(i64::MAX as u64),
        name in prop::sample::select(ModelSpec::NAMES.to_vec()), holdout in 0usize..3,
    ) {
        let mut cfg = RunConfig::default();
        cfg.model = ModelSpec::named(name, Dependence::Re, 0).unwrap();
        cfg.sampler.n_draws = draws;
        cfg.sampler.burn_in = burn;
        cfg.sampler.seed = seed;
        cfg.data.holdout = holdout;
        let back = RunConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}
