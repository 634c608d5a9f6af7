use inverse_lmp::experiments::ieee14_baseline;
use inverse_lmp::grid::{ieee14, Grid};
use inverse_lmp::market::{clear_uc, solve_dcopf, ReserveConfig};
use inverse_lmp::scenario::OfferCurve;
use inverse_lmp::scuc::{clear_scuc_ramping, RampConfig, ScucOptions};
use inverse_lmp::MarketError;

fn exact() -> ScucOptions {
    ScucOptions {
        rel_gap: 0.0,
        ..ScucOptions::default()
    }
}

fn two_bus() -> (Grid, Vec<OfferCurve>) {
    let grid = Grid::from_reactances(
        "two-bus",
        2,
        0,
        &[(0, 1, 0.1, 500.0)],
        vec![0, 1],
        vec![100.0, 100.0],
        vec![0.0, 0.0],
        vec![0.0, 1.0],
    )
    .unwrap();
    let offer = |p| OfferCurve {
        bounds: vec![0.0, 100.0],
        prices: vec![p],
        no_load: 0.0,
    };
    (grid, vec![offer(10.0), offer(30.0)])
}

#[test]
fn flat_profile_with_slack_ramps_matches_single_hours() {
    let grid = ieee14();
    let offers = ieee14_baseline(&grid, 5).unwrap();
    for level in [0.3, 0.55, 0.8] {
        let load: Vec<f64> = grid.base_load.iter().map(|b| b * level * 2.0).collect();
        let ramp = RampConfig::fraction_of_capacity(&grid, 1.0);
        let r = clear_scuc_ramping(
            &grid,
            &offers,
            &[load.clone(), load.clone()],
            &ReserveConfig::default(),
            &ramp,
            &exact(),
        )
        .unwrap();
        let c = clear_uc(&grid, &offers, &load).unwrap();
        let single = solve_dcopf(&grid, &offers, &load, &c.u).unwrap();
        assert!((r.objective - 2.0 * c.objective).abs() <= 1e-7 * c.objective);
        for hour in &r.hours {
            assert!((hour.objective - single.objective).abs() <= 1e-7 * single.objective);
            for (a, b) in hour.omega.iter().zip(&single.omega) {
                assert!((a - b).abs() <= 1e-6, "{a} vs {b}");
            }
        }
        assert!(r.phi_plus.iter().flatten().all(|&p| p.abs() <= 1e-9));
        assert!(r.ramp_binding.iter().flatten().all(|&b| !b));
    }
}

#[test]
fn steep_ramp_up_prices_the_ramp_limit() {
    // the cheap unit can climb only 10 MW; the expensive one covers the rest
    let (grid, offers) = two_bus();
    let ramp = RampConfig {
        ramp_up: vec![10.0, 100.0],
        ramp_down: vec![100.0, 100.0],
    };
    let profile = vec![vec![0.0, 20.0], vec![0.0, 80.0]];
    let r = clear_scuc_ramping(&grid, &offers, &profile, &ReserveConfig::default(), &ramp, &exact())
        .unwrap();
    assert!((r.hours[1].x[0] - 30.0).abs() < 1e-9);
    assert!((r.hours[1].x[1] - 50.0).abs() < 1e-9);
    assert!((r.hours[1].lambda - 30.0).abs() < 1e-9);
    // one more MW of ramp would displace 20 $/MWh
    assert!((r.phi_plus[1][0] - 20.0).abs() < 1e-9);
    assert!(r.ramp_binding[1][0] && r.ramp_binding[0][0]);
    assert!(r.hours.iter().all(|h| h.certificate.holds()));
    assert!((r.objective - r.dual_objective).abs() <= 1e-6 * r.objective);
}

#[test]
fn binding_statistics_cover_every_committed_generator_hour() {
    let (grid, offers) = two_bus();
    let ramp = RampConfig {
        ramp_up: vec![10.0, 100.0],
        ramp_down: vec![100.0, 100.0],
    };
    let profile = vec![vec![0.0, 20.0], vec![0.0, 80.0], vec![0.0, 60.0]];
    let r = clear_scuc_ramping(&grid, &offers, &profile, &ReserveConfig::default(), &ramp, &exact())
        .unwrap();
    let committed = r.hours.iter().map(|h| h.u.iter().filter(|&&u| u).count()).sum::<usize>();
    assert_eq!(r.stats.total(), committed);
    let f = r.stats.fractions();
    assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn infeasible_hour_is_named() {
    let (grid, offers) = two_bus();
    let ramp = RampConfig::fraction_of_capacity(&grid, 1.0);
    let profile = vec![vec![0.0, 50.0], vec![0.0, 250.0], vec![0.0, 50.0]];
    let err = clear_scuc_ramping(&grid, &offers, &profile, &ReserveConfig::default(), &ramp, &exact())
        .unwrap_err();
    assert!(matches!(err, MarketError::HorizonInfeasible { hour: 1 }), "{err}");
}

#[test]
fn single_hour_horizon_is_rejected() {
    let (grid, offers) = two_bus();
    let ramp = RampConfig::fraction_of_capacity(&grid, 1.0);
    let err = clear_scuc_ramping(
        &grid,
        &offers,
        &[vec![0.0, 50.0]],
        &ReserveConfig::default(),
        &ramp,
        &exact(),
    )
    .unwrap_err();
    assert!(matches!(err, MarketError::Config(_)));
}
