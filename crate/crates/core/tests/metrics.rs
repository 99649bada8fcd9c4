mod common;

use gpgreeks::metrics::{bias, coverage, mad, mean, median, nlpd, rimse, sample_variance, GreekAccuracy, TestGrid};
use proptest::prelude::*;
use rand_distr::{Distribution, Normal};

#[test]
fn hand_computed_values() {
    let est = [1.0, 2.0, 3.0, 4.0];
    let bench = [1.5, 2.0, 2.0, 4.0];
    assert!((rimse(&est, &bench).unwrap() - (1.25f64 / 4.0).sqrt()).abs() < 1e-15);
    assert_eq!(mad(&est, &bench).unwrap(), 0.25);
    assert!((bias(&est, &bench).unwrap() - 0.125).abs() < 1e-15);
    let var = [0.25, 0.25, 0.25, 0.25];
    // half-width at 95% is 1.96 × 0.5 = 0.98: three of four benchmarks are inside
    assert_eq!(coverage(&est, &var, &bench, 0.95).unwrap(), 0.75);
    let expected = (0.25 / 0.25 + 1.0 / 0.25) / 4.0 + 0.25f64.ln();
    assert!((nlpd(&est, &var, &bench).unwrap() - expected).abs() < 1e-12);
    assert!(coverage(&est, &var, &bench, 0.0).is_err());
    assert!(rimse::<f64>(&[], &[]).is_err());
}

#[test]
fn calibrated_bands_cover_at_nominal_rate() {
    let mut r = common::rng(61);
    let n = 20_000;
    let noise = Normal::new(0.0, 0.1).unwrap();
    let bench: Vec<f64> = (0..n).map(|i| (i as f64 * 0.001).sin()).collect();
    let est: Vec<f64> = bench.iter().map(|b| b + noise.sample(&mut r)).collect();
    let var = vec![0.01; n];
    let acc = GreekAccuracy::compute(&est, &var, &bench).unwrap();
    assert!((acc.cvr95 - 0.95).abs() < 0.01, "{}", acc.cvr95);
    assert!((acc.rimse - 0.1).abs() < 0.003);
    assert!(acc.bias.abs() < 0.003);
}

#[test]
fn summary_statistics() {
    assert_eq!(mean(&[1.0, 2.0, 6.0]), 3.0);
    assert_eq!(sample_variance(&[1.0, 2.0, 6.0]), 7.0);
    assert_eq!(sample_variance(&[5.0]), 0.0);
    assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
    assert!(mean::<f64>(&[]).is_nan());
}

#[test]
fn grids() {
    let bs = TestGrid::black_scholes();
    assert_eq!(bs.len(), 1600);
    assert_eq!(bs.times().len(), 20);
    assert!((bs.sites[0].0 + 0.01).abs() < 1e-15 && bs.sites[0].1 == 30.0);
    let lv = TestGrid::local_vol();
    assert_eq!(lv.times().len(), 11);
    assert_eq!(TestGrid::rectangular(&[0.0, 0.1], &[1.0, 2.0, 3.0]).len(), 6);
}

proptest! {
    #[test]
    fn rimse_dominates_mean_abs_and_bias(v in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..50)) {
        let (e, b): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
        let r = rimse(&e, &b).unwrap();
        prop_assert!(r >= 0.0);
        prop_assert!(bias(&e, &b).unwrap().abs() <= r + 1e-12);
        let c = coverage(&e, &vec![1.0; e.len()], &b, 0.9).unwrap();
        prop_assert!((0.0..=1.0).contains(&c));
    }
}
