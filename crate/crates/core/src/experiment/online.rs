//! Streaming a fresh path through rank-one updates of a fitted surrogate,
//! and a sticky hedge along the same path.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, OnlineConfig};
use super::pipeline::{build_design, convention_for, fit_config, market_model, trend_spec, training_set};
use crate::error::{Error, Result, StageExt};
use crate::gp::{fit, GpModel, S_COORD};
use crate::greeks::{credible_band, delta, gradient_mean};
use crate::hedging::{simulate_hedge, sticky_hedge};
use crate::io::{write_csv, write_json};
use crate::models::{bs_delta, bs_price, lv_fd_delta_gold, simulate_path, time_grid, MarketModel, Measure};
use crate::rng::{streams, StreamSeed};

/// One streamed observation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OnlineStep {
    pub step: usize,
    pub t: f64,
    #[serde(rename = "S")]
    pub s: f64,
    pub y: f64,
    pub bench_delta: f64,
    pub original_delta: f64,
    pub original_width: f64,
    pub online_delta: f64,
    pub online_width: f64,
}

/// Hedges along the coarse version of the streamed path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StickySummary {
    pub level: f64,
    pub w0: f64,
    pub n_rebalances: usize,
    pub n_trades: usize,
    pub n_skipped: usize,
    #[serde(rename = "E_T_sticky")]
    pub error_sticky: f64,
    #[serde(rename = "E_T_surrogate")]
    pub error_surrogate: f64,
    #[serde(rename = "E_T_bench")]
    pub error_bench: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OnlineReport {
    pub n_steps: usize,
    pub mean_abs_error_original: f64,
    pub mean_abs_error_online: f64,
    pub mean_width_original: f64,
    pub mean_width_online: f64,
    /// Sites where the online band is no wider than the original one.
    pub n_narrower: usize,
    pub sticky: Option<StickySummary>,
    #[serde(skip)]
    pub steps: Vec<OnlineStep>,
}

/// Final state of an online run.
pub struct OnlineRun {
    pub original: GpModel<f64>,
    pub online: GpModel<f64>,
    pub report: OnlineReport,
}

fn bench_site(model: &MarketModel, t: f64, s: f64, n_paths: usize, seed: StreamSeed) -> (f64, f64) {
    match model {
        MarketModel::BlackScholes(p) => (bs_price(p, p.maturity - t, s), bs_delta(p, p.maturity - t, s)),
        MarketModel::LocalVolatility(p) => {
            let g = lv_fd_delta_gold(p, p, t, s, super::gold::gold_step(s), n_paths, seed);
            (g.price, g.delta)
        }
    }
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = v.fold((0.0, 0usize), |(a, n), x| (a + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Fits the base surrogate of `cfg`, then streams one physical path sampled
/// every `online.dt` through rank-one updates. At each streamed site the
/// Delta of the updated model and of the original model are compared to the
/// benchmark.
pub fn run_online(cfg: &ExperimentConfig) -> Result<OnlineRun> {
    let oc: &OnlineConfig = cfg
        .online
        .as_ref()
        .ok_or_else(|| Error::Config("configuration has no [online] section".into()))?;
    let model = market_model(cfg.case_study);
    let conv = convention_for(cfg.case_study, &model);
    let design = build_design(cfg, &model).stage("design")?;
    let ts = training_set(cfg, &model, &design, conv).stage("data")?;
    let original = fit(ts, cfg.model.kernel, trend_spec(cfg.model.trend, &model), cfg.model.noise, &fit_config(cfg))
        .stage("fit")?;

    let maturity = model.maturity();
    let n_total = (maturity / oc.dt).round() as usize;
    if n_total == 0 || ((n_total as f64) * oc.dt - maturity).abs() > 1e-9 {
        return Err(Error::Config(format!("online dt {} does not divide the maturity", oc.dt)));
    }
    let times = time_grid(0.0, maturity, n_total);
    let root = StreamSeed::new(cfg.seed, streams::ONLINE_PATH);
    let path = simulate_path(model.dynamics().as_ref(), oc.s0, &times, Measure::Physical, &mut root.rng(0));
    let n_steps = oc.max_steps.map_or(n_total, |m| m.min(n_total));

    let mut online = original.clone();
    let mut steps = Vec::with_capacity(n_steps);
    let mut bench_prices = Vec::with_capacity(n_steps);
    for k in 0..n_steps {
        let (t, s) = (times[k], path[k]);
        let x = [conv.from_calendar(t), s];
        let obs = model.price_sample(t, s, cfg.data.n_inner, root.child(2 * k as u64 + 1));
        online = online.update_rank1(&x, obs.y, obs.sigma2_hat).stage("update")?;
        let (bench_price, bench_delta) = bench_site(&model, t, s, oc.gold_paths, root.child(2 * k as u64 + 2));
        bench_prices.push(bench_price);
        let before = delta(&original, x[0], s).stage("greeks")?;
        let after = delta(&online, x[0], s).stage("greeks")?;
        steps.push(OnlineStep {
            step: k,
            t,
            s,
            y: obs.y,
            bench_delta,
            original_delta: before.value,
            original_width: credible_band(&before, 0.95)?.width(),
            online_delta: after.value,
            online_width: credible_band(&after, 0.95)?.width(),
        });
    }

    let sticky = sticky_summary(&original, &model, oc, cfg.design.path_dt, &times, &path, &steps, &bench_prices, n_steps)?;
    let report = OnlineReport {
        n_steps,
        mean_abs_error_original: mean(steps.iter().map(|s| (s.original_delta - s.bench_delta).abs())),
        mean_abs_error_online: mean(steps.iter().map(|s| (s.online_delta - s.bench_delta).abs())),
        mean_width_original: mean(steps.iter().map(|s| s.original_width)),
        mean_width_online: mean(steps.iter().map(|s| s.online_width)),
        n_narrower: steps.iter().filter(|s| s.online_width <= s.original_width).count(),
        sticky,
        steps,
    };
    Ok(OnlineRun {
        original,
        online,
        report,
    })
}

/// Sticky, plain surrogate and benchmark hedges on the coarse rebalance grid
/// (every `coarse_dt`) of the streamed path; needs the full stream.
#[allow(clippy::too_many_arguments)]
fn sticky_summary(
    gp: &GpModel<f64>,
    model: &MarketModel,
    oc: &OnlineConfig,
    coarse_dt: f64,
    times: &[f64],
    path: &[f64],
    steps: &[OnlineStep],
    bench_prices: &[f64],
    n_steps: usize,
) -> Result<Option<StickySummary>> {
    let n_total = times.len() - 1;
    let stride = (coarse_dt / oc.dt).round().max(1.0) as usize;
    if n_steps < n_total || n_total % stride != 0 {
        return Ok(None);
    }
    let idx: Vec<usize> = (0..=n_total).step_by(stride).collect();
    let ct: Vec<f64> = idx.iter().map(|&i| times[i]).collect();
    let cp: Vec<f64> = idx.iter().map(|&i| path[i]).collect();
    let conv = gp.convention();
    let r = model.rate();
    let payoff = |s: f64| model.payoff(s);
    let w0 = bench_prices[0];
    let est = |t: f64, s: f64| {
        delta(gp, conv.from_calendar(t), s).unwrap_or_else(|_| crate::greeks::GreekEstimate {
            value: f64::NAN,
            variance: 0.0,
            kind: crate::greeks::GreekKind::Delta,
            site: vec![t, s],
            degraded: true,
        })
    };
    let sticky = sticky_hedge(&est, oc.sticky_level, &cp, &ct, r, w0, &payoff)?;
    let hat = |t: f64, s: f64| gradient_mean(gp, S_COORD, &[conv.from_calendar(t), s]).unwrap_or(f64::NAN);
    let plain = simulate_hedge(&hat, &cp, &ct, r, w0, &payoff)?;
    let bench = |t: f64, _s: f64| {
        let k = ((t / oc.dt).round() as usize).min(steps.len() - 1);
        steps[k].bench_delta
    };
    let bench_out = simulate_hedge(&bench, &cp, &ct, r, w0, &payoff)?;
    Ok(Some(StickySummary {
        level: oc.sticky_level,
        w0,
        n_rebalances: ct.len() - 1,
        n_trades: sticky.n_trades,
        n_skipped: sticky.n_skipped,
        error_sticky: sticky.outcome.total_error,
        error_surrogate: plain.total_error,
        error_bench: bench_out.total_error,
    }))
}

/// Runs the online study and writes `online.csv` and `online.json` under
/// `<out>/<name>/online`.
pub fn run_online_demo(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<OnlineReport> {
    cfg.validate()?;
    let run = run_online(cfg)?;
    let dir = super::runner::OutputLayout::new(cfg, out).dir.join("online");
    write_csv(&dir.join("online.csv"), &run.report.steps).stage("output")?;
    write_json(&dir.join("online.json"), &run.report).stage("output")?;
    run.original.save(&dir.join("model_original.json")).stage("output")?;
    run.online.save(&dir.join("model_online.json")).stage("output")?;
    Ok(run.report)
}
