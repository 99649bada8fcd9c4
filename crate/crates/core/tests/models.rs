mod common;

use gpgreeks::models::{
    bs_delta, bs_gamma, bs_mc_sample, bs_price, bs_theta, bs_vega, implied_delta, implied_vol, lv_fd_delta_gold,
    lv_fd_delta_independent, lv_mc_price, lv_sigma, lv_simulate_paths, BsParams, ConstantVol, LvParams, Measure,
};
use gpgreeks::rng::StreamSeed;

#[test]
fn black_scholes_anchors() {
    let p = BsParams::case_study();
    assert!((bs_delta(&p, 0.2, 55.0) - 0.8642).abs() < 1e-4);
    assert!((bs_delta(&p, 0.5, 55.0) - 0.7936).abs() < 1e-4);
    assert_eq!(bs_price(&p, 0.0, 60.0), 10.0);
    assert!(bs_price(&p, 0.3, 1e-3) < 1e-12);
    let deep = bs_price(&p, 0.3, 500.0);
    assert!((deep - (500.0 - 50.0 * (-0.04f64 * 0.3).exp())).abs() < 1e-8);
}

#[test]
fn black_scholes_greek_signs_and_errors() {
    let p = BsParams::case_study();
    for &s in &[35.0, 50.0, 65.0] {
        let d = bs_delta(&p, 0.3, s);
        assert!(d > 0.0 && d < 1.0);
        assert!(bs_gamma(&p, 0.3, s).unwrap() > 0.0);
        assert!(bs_vega(&p, 0.3, s).unwrap() > 0.0);
        let h = 1e-4;
        let fd = (bs_price(&p, 0.3, s + h) - bs_price(&p, 0.3, s - h)) / (2.0 * h);
        assert!((fd - d).abs() < 1e-7);
    }
    assert!(bs_theta(&p, 0.3, 50.0).unwrap() < 0.0);
    assert!(bs_gamma(&p, 0.0, 50.0).is_err());
    assert!(bs_theta(&p, 0.0, 50.0).is_err());
    assert!(bs_vega(&p, 0.0, 50.0).is_err());
    assert!(BsParams::new(0.04, 0.0, 50.0, 0.4, 0.06).is_err());
}

#[test]
fn black_scholes_monte_carlo_converges() {
    let p = BsParams::case_study();
    let mut rng = StreamSeed::new(5, 1).rng(0);
    let mc = bs_mc_sample(&p, 0.3, 52.0, 1_000_000, &mut rng);
    let exact = bs_price(&p, 0.3, 52.0);
    assert!((mc.y - exact).abs() < 3.0 * mc.sigma2_hat.sqrt(), "{} vs {exact}", mc.y);
    let otm = bs_mc_sample(&p, 0.1, 20.0, 1000, &mut rng);
    assert!(otm.y < 1e-12 && otm.sigma2_hat < 1e-20);
    let expiry = bs_mc_sample(&p, 0.0, 57.0, 1000, &mut rng);
    assert_eq!((expiry.y, expiry.sigma2_hat), (7.0, 0.0));
}

#[test]
fn local_vol_surface() {
    let p = LvParams::default();
    assert!((lv_sigma(&p, 0.4, 50.0) - 0.24).abs() < 1e-15);
    assert_eq!(lv_sigma(&p, 0.1, 20.0), 0.4);
    let edge = 50.0 * 0.4f64.exp();
    assert!((lv_sigma(&p, 0.2, edge * (1.0 - 1e-12)) - 0.4).abs() < 1e-10);
    for i in 0..200 {
        let s = 10.0 + i as f64;
        for t in [0.0, 0.2, 0.4] {
            let v = lv_sigma(&p, t, s);
            assert!((0.24..=0.4).contains(&v));
        }
    }
}

#[test]
fn local_vol_paths_are_martingales_under_pricing_measure() {
    let p = LvParams::default();
    let n = 100_000;
    let paths = lv_simulate_paths(&p, &p, &[50.0], 0.0, 0.4, 100, n, Measure::RiskNeutral, StreamSeed::new(3, 2));
    let st = paths.terminal();
    let m = st.iter().sum::<f64>() / n as f64;
    let var = st.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    let target = 50.0 * (0.05f64 * 0.4).exp();
    assert!((m - target).abs() < 3.0 * (var / n as f64).sqrt(), "{m} vs {target}");
    let again = lv_simulate_paths(&p, &p, &[50.0], 0.0, 0.4, 100, n, Measure::RiskNeutral, StreamSeed::new(3, 2));
    assert_eq!(paths, again);
}

#[test]
fn zero_volatility_paths_are_deterministic_euler() {
    let p = LvParams::default();
    let paths = lv_simulate_paths(&p, &ConstantVol(0.0), &[40.0], 0.0, 0.4, 100, 3, Measure::Physical, StreamSeed::new(1, 1));
    let expected = 40.0 * (1.0 + 0.13 * 0.004f64).powi(100);
    for path in paths.iter() {
        assert!((path[100] - expected).abs() < 1e-10);
    }
}

#[test]
fn gold_delta_matches_black_scholes_under_flat_volatility() {
    let p = LvParams::default();
    let vol = ConstantVol(0.25);
    let bs = BsParams::new(0.05, 0.25, 50.0, 0.4, 0.05).unwrap();
    let g = lv_fd_delta_gold(&p, &vol, 0.1, 52.0, 0.52, 1_000_000, StreamSeed::new(9, 6));
    let exact = bs_delta(&bs, 0.3, 52.0);
    assert!((g.delta - exact).abs() < 0.002, "{} vs {exact}", g.delta);
    assert!((g.price - bs_price(&bs, 0.3, 52.0)).abs() < 0.02);
    assert!((g.theta - bs_theta(&bs, 0.3, 52.0).unwrap()).abs() < 0.3);
}

#[test]
fn gold_delta_limits() {
    let p = LvParams::default();
    let itm = lv_fd_delta_gold(&p, &p, 0.2, 90.0, 0.9, 20_000, StreamSeed::new(1, 6));
    let otm = lv_fd_delta_gold(&p, &p, 0.2, 25.0, 0.25, 20_000, StreamSeed::new(1, 6));
    assert!((0.97..=1.0).contains(&itm.delta), "{}", itm.delta);
    assert!((0.0..=0.03).contains(&otm.delta), "{}", otm.delta);
    let at_expiry = lv_fd_delta_gold(&p, &p, 0.4, 55.0, 0.55, 10, StreamSeed::new(1, 6));
    assert_eq!((at_expiry.price, at_expiry.delta), (5.0, 1.0));
}

#[test]
fn common_random_numbers_reduce_variance() {
    let p = LvParams::default();
    let reps = 20;
    let crn: Vec<f64> = (0..reps)
        .map(|i| lv_fd_delta_gold(&p, &p, 0.1, 50.0, 0.5, 2000, StreamSeed::new(100 + i, 6)).delta)
        .collect();
    let ind: Vec<f64> = (0..reps)
        .map(|i| lv_fd_delta_independent(&p, &p, 0.1, 50.0, 0.5, 2000, StreamSeed::new(100 + i, 6)))
        .collect();
    let var = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
    };
    assert!(var(&crn) * 10.0 < var(&ind), "{} vs {}", var(&crn), var(&ind));
}

#[test]
fn local_vol_monte_carlo_price() {
    let p = LvParams::default();
    let seed = StreamSeed::new(2, 1);
    let a = lv_mc_price(&p, &p, 0.1, 50.0, 50_000, seed);
    let g = lv_fd_delta_gold(&p, &p, 0.1, 50.0, 0.5, 50_000, seed);
    assert!((a.y - g.price).abs() < 4.0 * a.sigma2_hat.sqrt());
    assert!(lv_mc_price(&p, &p, 0.1, 20.0, 5_000, seed).y < 1e-6);
    assert_eq!(lv_mc_price(&p, &p, 0.4, 61.0, 10, seed).y, 11.0);
}

#[test]
fn implied_volatility_round_trip() {
    let p = BsParams::case_study();
    for &s in &[40.0, 50.0, 60.0] {
        let price = bs_price(&p, 0.25, s);
        assert!((implied_vol(price, 0.25, s, 50.0, 0.04).unwrap() - 0.22).abs() < 1e-8);
        assert!((implied_delta(price, 0.25, s, 50.0, 0.04).unwrap() - bs_delta(&p, 0.25, s)).abs() < 1e-8);
    }
    assert!(implied_vol(0.0, 0.25, 40.0, 50.0, 0.04).is_err());
    assert!(implied_vol(60.0, 0.25, 55.0, 50.0, 0.04).is_err());
}
