//! End-to-end checks of the assembled methods against analytic anchors and
//! the event-driven simulator.

use jsqps_core::markov::lambda_n_mc;
use jsqps_core::{
    best_method, compute_all_methods, compute_method, wasserstein, Hyperparameters, MethodId,
    ServiceDistribution, SimulationConfig, SystemConfig, TimeGrid,
};

fn sup_gap(a: &jsqps_core::SojournCdf, b: &jsqps_core::SojournCdf) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[test]
fn method_d_recovers_the_mm1_ps_mean() {
    // A single PS server is insensitive to the discipline: E[T] =
    // 1/(mu - lambda) = 2 at lambda = 0.5, mu = 1.
    let config = SystemConfig::new(1, 0.5, 1.0).unwrap();
    let hyper = Hyperparameters::defaults_for(1);
    let grid = TimeGrid::default_grid();
    let cdf = compute_method(MethodId::D, &config, &hyper, &grid).unwrap();
    let mean = cdf.mean();
    assert!(
        (mean - 2.0).abs() / 2.0 < 0.03,
        "method D mean {mean} is off the M/M/1-PS value by more than 3%"
    );
}

#[test]
fn transform_routes_agree_for_every_method_at_r2() {
    let config = SystemConfig::from_rho(2, 0.5, 1.0).unwrap();
    let hyper = Hyperparameters::defaults_for(2);
    let grid = TimeGrid::default_grid();
    let all = compute_all_methods(&config, &hyper, &grid).unwrap();
    for (expm_id, unif_id) in [
        (MethodId::A, MethodId::D),
        (MethodId::B, MethodId::E),
        (MethodId::C, MethodId::F),
    ] {
        let gap = sup_gap(&all[expm_id as usize], &all[unif_id as usize]);
        assert!(
            gap < 1e-6,
            "{expm_id:?} and {unif_id:?} differ by {gap:.3e} at R = 2, rho = 0.5"
        );
    }
}

#[test]
fn closed_form_routes_agree_at_r3() {
    // C and F share the fitted rates and birth-death join probabilities;
    // only the tail transform differs.
    let config = SystemConfig::from_rho(3, 0.6, 1.0).unwrap();
    let hyper = Hyperparameters::defaults_for(3);
    let grid = TimeGrid::default_grid();
    let c = compute_method(MethodId::C, &config, &hyper, &grid).unwrap();
    let f = compute_method(MethodId::F, &config, &hyper, &grid).unwrap();
    let gap = sup_gap(&c, &f);
    assert!(gap < 1e-6, "C and F differ by {gap:.3e} at R = 3, rho = 0.6");
}

#[test]
fn method_c_tracks_a_long_simulation_at_r5() {
    let config = SystemConfig::from_rho(5, 0.5, 1.0).unwrap();
    let hyper = Hyperparameters::defaults_for(5);
    let grid = TimeGrid::default_grid();
    let approx = compute_method(MethodId::C, &config, &hyper, &grid).unwrap();

    let sim_cfg = SimulationConfig::new(config, ServiceDistribution::exponential(1.0));
    let baseline = jsqps_core::simulate_cdf(&sim_cfg, &grid).unwrap();

    let w = wasserstein(&approx, &baseline).unwrap();
    assert!(
        w < 2.0,
        "method C sits {w} away from a {}-time-unit simulation",
        sim_cfg.q_max
    );
}

#[test]
fn chain_rates_collapse_to_the_arrival_rate_for_one_server() {
    // With R = 1 the shortest queue is the only queue, so every arrival
    // joins it: the conditional rate is lambda at every chain-covered level.
    let config = SystemConfig::new(1, 0.5, 1.0).unwrap();
    let hyper = Hyperparameters::defaults_for(1);
    let profile = lambda_n_mc(&config, &hyper).unwrap();
    for (n, &rate) in profile.rates().iter().take(hyper.l1).enumerate() {
        assert!(
            (rate - 0.5).abs() < 1e-9,
            "lambda_{n} = {rate} but every arrival joins the single server"
        );
    }
}

#[test]
fn default_regime_choices_at_r5() {
    let pick = |rho: f64| best_method(&SystemConfig::from_rho(5, rho, 1.0).unwrap()).unwrap();
    assert_eq!(pick(0.3), MethodId::D);
    assert_eq!(pick(0.8), MethodId::C);
    assert_eq!(pick(0.98), MethodId::E);
}
