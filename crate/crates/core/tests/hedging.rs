mod common;

use gpgreeks::designs::normal_starts;
use gpgreeks::greeks::{GreekEstimate, GreekKind};
use gpgreeks::hedging::{
    decompose_error, decompose_many, empirical_moments, simulate_hedge, sticky_hedge, summarize, write_outcomes_csv,
    x_increments,
};
use gpgreeks::metrics::pnl_variance;
use gpgreeks::models::{bs_delta, bs_price, simulate_paths, time_grid, BsParams, Measure, PathMatrix};
use gpgreeks::rng::{substream, streams, StreamSeed};
use rand_distr::{Distribution, StandardNormal};

fn tau(p: &BsParams, t: f64) -> f64 {
    p.maturity - t
}

/// Paths from N(50, 2²) starts on a fine grid of `coarse × fine` steps over [0, T].
fn bs_paths(p: &BsParams, n: usize, coarse: usize, fine: usize, seed: u64) -> PathMatrix {
    let starts = normal_starts(n, 50.0, 2.0, StreamSeed::new(seed, streams::HEDGE_START));
    simulate_paths(
        p,
        &starts,
        &time_grid(0.0, p.maturity, coarse * fine),
        n,
        Measure::Physical,
        StreamSeed::new(seed, streams::HEDGE_PATHS),
    )
}

#[test]
fn cash_only_hedge_compounds() {
    let times = time_grid(0.0, 0.4, 20);
    let path: Vec<f64> = (0..21).map(|i| 50.0 + i as f64 * 0.3).collect();
    let o = simulate_hedge(&|_, _| 0.0, &path, &times, 0.04, 3.0, &|s| (s - 50.0f64).max(0.0)).unwrap();
    assert!((o.terminal_wealth - 3.0 * (0.04f64 * 0.4).exp()).abs() < 1e-12);
    assert!((o.total_error - (o.terminal_wealth - 6.0)).abs() < 1e-12);
    assert_eq!(o.n_trades, 20);
}

#[test]
fn forward_is_replicated_exactly() {
    let p = BsParams::case_study();
    let paths = bs_paths(&p, 50, 20, 1, 3);
    for path in paths.iter() {
        let w0 = path[0] - 50.0 * (-0.04f64 * 0.4).exp();
        let o = simulate_hedge(&|_, _| 1.0, path, &paths.times, 0.04, w0, &|s| s - 50.0).unwrap();
        assert!(o.total_error.abs() < 1e-10, "{}", o.total_error);
    }
    assert!(simulate_hedge(&|_, _| 1.0, &[50.0], &[0.0], 0.04, 0.0, &|s| s).is_err());
    assert!(simulate_hedge(&|_, _| 1.0, &[50.0, 51.0], &[0.1, 0.0], 0.04, 0.0, &|s| s).is_err());
}

#[test]
fn decomposition_identity_holds_per_path() {
    let p = BsParams::case_study();
    let paths = bs_paths(&p, 200, 20, 10, 4);
    let bench = |t: f64, s: f64| bs_delta(&p, tau(&p, t), s);
    let hat = |t: f64, s: f64| bs_delta(&p, tau(&p, t), s * 1.01) + 0.02 * (t * 40.0).sin();
    let payoff = |s: f64| (s - 50.0f64).max(0.0);
    let outs = decompose_many(&hat, &bench, &paths, 10, 0.04, &|s| bs_price(&p, 0.4, s), &payoff).unwrap();
    for (i, o) in outs.iter().enumerate() {
        let e_d = o.discretization_error.unwrap();
        let e_hat = o.approx_error.unwrap();
        assert!((o.total_error - (e_d + e_hat)).abs() < 1e-10);
        // independent recomputation of the approximation part
        let fine = paths.path(i);
        let dx = x_increments(fine, &paths.times, 10, 0.04);
        let manual: f64 = (0..20)
            .map(|k| {
                let (t, s) = (paths.times[10 * k], fine[10 * k]);
                (hat(t, s) - bench(t, s)) * dx[k]
            })
            .sum();
        assert!((manual - e_hat).abs() < 1e-10);
        assert_eq!(o.path_id, i);
    }
}

#[test]
fn constant_delta_offset_gives_scaled_gains() {
    let p = BsParams::case_study();
    let paths = bs_paths(&p, 20, 20, 10, 5);
    let c = 0.07;
    let bench = |t: f64, s: f64| bs_delta(&p, tau(&p, t), s);
    let hat = |t: f64, s: f64| bench(t, s) + c;
    for path in paths.iter() {
        let o = decompose_error(&hat, &bench, path, &paths.times, 10, 0.04, 4.0, &|s| (s - 50.0f64).max(0.0)).unwrap();
        // X_T − X_0 = S_T − S_0 − r∫S dt (trapezoid on the fine grid)
        let integral: f64 = path
            .windows(2)
            .zip(paths.times.windows(2))
            .map(|(s, t)| 0.5 * (s[0] + s[1]) * (t[1] - t[0]))
            .sum();
        let gain = path[200] - path[0] - 0.04 * integral;
        assert!((o.approx_error.unwrap() - c * gain).abs() < 1e-10);
    }
    let times = &paths.times;
    assert!(decompose_error(&hat, &bench, paths.path(0), times, 7, 0.04, 4.0, &|s| s).is_err());
}

/// A standard normal that depends only on the site, standing in for an
/// estimation error independent of future price moves.
fn site_noise(t: f64, s: f64) -> f64 {
    StandardNormal.sample(&mut substream(s.to_bits(), streams::SYNTHETIC_NOISE, t.to_bits()))
}

#[test]
fn independent_delta_noise_adds_variance_without_bias() {
    let p = BsParams::case_study();
    let n = 10_000;
    let paths = bs_paths(&p, n, 20, 10, 6);
    let sd = 0.05;
    let bench = |t: f64, s: f64| bs_delta(&p, tau(&p, t), s);
    let hat = |t: f64, s: f64| bench(t, s) + sd * site_noise(t, s);
    let outs = decompose_many(&hat, &bench, &paths, 10, p.r, &|s| bs_price(&p, 0.4, s), &|s| (s - 50.0f64).max(0.0))
        .unwrap();
    let e_hat: Vec<f64> = outs.iter().map(|o| o.approx_error.unwrap()).collect();
    let e_d: Vec<f64> = outs.iter().map(|o| o.discretization_error.unwrap()).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (mh, md) = (mean(&e_hat), mean(&e_d));
    let var_hat = e_hat.iter().map(|x| (x - mh).powi(2)).sum::<f64>() / (n - 1) as f64;
    let var_d = e_d.iter().map(|x| (x - md).powi(2)).sum::<f64>() / (n - 1) as f64;
    let cov = e_hat.iter().zip(&e_d).map(|(a, b)| (a - mh) * (b - md)).sum::<f64>() / (n - 1) as f64;

    assert!(mh.abs() < 3.0 * (var_hat / n as f64).sqrt(), "mean {mh}");
    assert!((cov / (var_hat * var_d).sqrt()).abs() < 0.05, "corr {}", cov / (var_hat * var_d).sqrt());

    // sd² E[Σ σ² S_k² Δt] over the rebalance grid
    let coarse = paths.subsample(10);
    let qv: f64 = coarse
        .iter()
        .map(|path| (0..20).map(|k| p.sigma * p.sigma * path[k] * path[k] * 0.02).sum::<f64>())
        .sum::<f64>()
        / n as f64;
    let expected = sd * sd * qv;
    assert!((var_hat / expected - 1.0).abs() < 0.1, "{var_hat} vs {expected}");

    let (mu_e, v_e) = empirical_moments(&hat, &bench, &coarse, &|_, _| p.sigma, p.mu, p.r);
    assert!((v_e / expected - 1.0).abs() < 0.1);
    assert!(mu_e.abs() < 0.01);
}

#[test]
fn exact_delta_hedging_variance() {
    let p = BsParams::case_study();
    let paths = bs_paths(&p, 2500, 20, 10, 7);
    let coarse = paths.subsample(10);
    let delta = |t: f64, s: f64| bs_delta(&p, tau(&p, t), s);
    let outs: Vec<_> = coarse
        .iter()
        .map(|path| {
            simulate_hedge(&delta, path, &coarse.times, p.r, bs_price(&p, 0.4, path[0]), &|s| (s - 50.0f64).max(0.0))
                .unwrap()
        })
        .collect();
    let v = pnl_variance(&outs);
    assert!((v - 0.265).abs() < 0.04, "{v}");
    let summary = summarize(&outs);
    assert_eq!(summary.n_paths, 2500);
    assert!((summary.total_error.unwrap().variance - v).abs() < 1e-12);
    assert!(summary.approx_error.is_none());
    assert!(summary.l1_loss > 0.0);
}

fn estimate(value: f64, variance: f64) -> GreekEstimate<f64> {
    GreekEstimate {
        value,
        variance,
        kind: GreekKind::Delta,
        site: vec![],
        degraded: false,
    }
}

#[test]
fn sticky_hedge_limits() {
    let p = BsParams::case_study();
    let paths = bs_paths(&p, 30, 20, 1, 8);
    let payoff = |s: f64| (s - 50.0f64).max(0.0);
    let delta = |t: f64, s: f64| bs_delta(&p, tau(&p, t), s);
    for path in paths.iter() {
        let w0 = bs_price(&p, 0.4, path[0]);
        // a zero-width band always rebalances
        let exact = sticky_hedge(&|t, s| estimate(delta(t, s), 0.0), 0.95, path, &paths.times, p.r, w0, &payoff).unwrap();
        let plain = simulate_hedge(&delta, path, &paths.times, p.r, w0, &payoff).unwrap();
        assert_eq!(exact.outcome.terminal_wealth, plain.terminal_wealth);
        assert_eq!((exact.n_trades, exact.n_skipped), (20, 0));
        // level 1 never trades after the first position
        let frozen = sticky_hedge(&|t, s| estimate(delta(t, s), 1e-4), 1.0, path, &paths.times, p.r, w0, &payoff).unwrap();
        let d0 = delta(0.0, path[0]);
        let held = simulate_hedge(&|_, _| d0, path, &paths.times, p.r, w0, &payoff).unwrap();
        assert!((frozen.outcome.terminal_wealth - held.terminal_wealth).abs() < 1e-12);
        assert_eq!((frozen.n_trades, frozen.n_skipped), (1, 19));
    }
}

#[test]
fn outcomes_csv_has_named_columns() {
    let p = BsParams::case_study();
    let paths = bs_paths(&p, 3, 20, 10, 9);
    let bench = |t: f64, s: f64| bs_delta(&p, tau(&p, t), s);
    let outs = decompose_many(&bench, &bench, &paths, 10, p.r, &|_| 2.0, &|s| (s - 50.0f64).max(0.0)).unwrap();
    assert!(outs.iter().all(|o| o.approx_error == Some(0.0)));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("hedge.csv");
    write_outcomes_csv(&path, &outs).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.lines().next().unwrap().starts_with("path_id,W_T,E_T,E_d,E_hat,E_bench,n_trades"));
    assert_eq!(text.lines().count(), 4);
}
