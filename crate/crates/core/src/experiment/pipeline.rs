//! One experiment run: design, training data, fit, Greeks on the test
//! grid, hedging and metrics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{CaseStudy, DesignKind, ExperimentConfig, HedgeConfig, InitialWealth, PathStarts, TrendChoice};
use super::gold::{implied_delta_or, Benchmark};
use crate::designs::{
    grid_design, halton_design, level_starts, normal_starts, path_design, virtual_points, Contract, Design,
};
use crate::error::{Error, Result, StageExt};
use crate::gp::{fit, FitConfig, GpModel, NoiseSpec, ReferencePrice, TimeConvention, TrainingSet, TrendSpec, S_COORD};
use crate::greeks::{self, default_gamma_step, gradient_mean, GreekEstimate, GreekRow};
use crate::hedging::{decompose_many, empirical_moments, summarize, HedgeOutcome, HedgeSummary};
use crate::linalg::Matrix;
use crate::metrics::{rimse, GreekAccuracy, TestGrid};
use crate::models::{bs_price, simulate_paths, time_grid, BsParams, LvParams, MarketModel, Measure, PathMatrix};
use crate::rng::{streams, StreamSeed};

/// The market model of a case study.
pub fn market_model(case: CaseStudy) -> MarketModel {
    match case {
        CaseStudy::BlackScholes => MarketModel::BlackScholes(BsParams::case_study()),
        CaseStudy::LocalVolatility => MarketModel::LocalVolatility(LvParams::default()),
    }
}

/// Time coordinate used by the surrogate: time to maturity for
/// Black–Scholes, calendar time for local volatility.
pub fn convention_for(case: CaseStudy, model: &MarketModel) -> TimeConvention {
    match case {
        CaseStudy::BlackScholes => TimeConvention::TimeToMaturity {
            maturity: model.maturity(),
        },
        CaseStudy::LocalVolatility => TimeConvention::Calendar,
    }
}

pub fn contract_of(model: &MarketModel) -> Contract {
    Contract {
        strike: model.strike(),
        maturity: model.maturity(),
        rate: model.rate(),
    }
}

pub fn trend_spec(choice: TrendChoice, model: &MarketModel) -> TrendSpec {
    match choice {
        TrendChoice::Constant => TrendSpec::Constant,
        TrendChoice::Linear => TrendSpec::LinearInS,
        TrendChoice::Reference { volatility } => TrendSpec::ExternalReference(ReferencePrice {
            rate: model.rate(),
            volatility,
            strike: model.strike(),
            maturity: model.maturity(),
        }),
    }
}

/// Number of paths of a path design with `n` points recorded every `dt`.
pub fn path_count(n: usize, dt: f64, maturity: f64) -> usize {
    let per_path = (maturity / dt).round().max(1.0) as usize;
    ((n as f64 / per_path as f64).round() as usize).max(1)
}

/// Sampled design followed by the virtual points.
pub fn build_design(cfg: &ExperimentConfig, model: &MarketModel) -> Result<Design> {
    let d = &cfg.design;
    let sampled = match d.kind {
        DesignKind::Halton => halton_design(d.bbox, d.n)?,
        DesignKind::Grid => grid_design(
            d.bbox,
            d.n_t.ok_or_else(|| Error::Config("grid design needs n_t".into()))?,
            d.n_s.ok_or_else(|| Error::Config("grid design needs n_s".into()))?,
        )?,
        DesignKind::Path => {
            let n_paths = path_count(d.n, d.path_dt, model.maturity());
            let starts = match d.path_starts {
                PathStarts::Normal { mean, sd } => {
                    normal_starts(n_paths, mean, sd, StreamSeed::new(cfg.seed, streams::DESIGN_START))
                }
                PathStarts::Levels { lo, hi } => level_starts(n_paths, lo, hi),
            };
            let substeps = match model {
                MarketModel::BlackScholes(_) => 1,
                MarketModel::LocalVolatility(p) => {
                    let nominal = p.maturity / p.steps_per_maturity as f64;
                    (d.path_dt / nominal).round().max(1.0) as usize
                }
            };
            path_design(
                model.dynamics().as_ref(),
                &starts,
                d.path_dt,
                model.maturity(),
                substeps,
                StreamSeed::new(cfg.seed, streams::DESIGN_PATHS),
            )?
        }
    };
    let virt = virtual_points(contract_of(model), d.bbox, d.virtual_itm, d.virtual_otm, d.virtual_maturity);
    Ok(sampled.with(&virt))
}

/// Prices every design point: Monte Carlo means with their variance for
/// sampled points (or exact prices), the pseudo-outputs for virtual points.
pub fn training_set(
    cfg: &ExperimentConfig,
    model: &MarketModel,
    design: &Design,
    convention: TimeConvention,
) -> Result<TrainingSet<f64>> {
    let root = StreamSeed::new(cfg.seed, streams::TRAINING_PRICES);
    let samples: Vec<(f64, f64)> = design
        .points
        .par_iter()
        .enumerate()
        .map(|(i, pt)| {
            if pt.is_virtual {
                return (pt.pseudo_y.unwrap_or(0.0), 0.0);
            }
            match (cfg.data.exact, model) {
                (true, MarketModel::BlackScholes(p)) => (bs_price(p, p.maturity - pt.t, pt.s), 0.0),
                _ => {
                    let m = model.price_sample(pt.t, pt.s, cfg.data.n_inner, root.child(i as u64));
                    (m.y, m.sigma2_hat)
                }
            }
        })
        .collect();
    let mut inputs = Matrix::zeros(design.len(), 2);
    for (i, pt) in design.points.iter().enumerate() {
        inputs[(i, 0)] = convention.from_calendar(pt.t);
        inputs[(i, 1)] = pt.s;
    }
    let flags = design.points.iter().map(|p| p.is_virtual).collect();
    TrainingSet::new(
        inputs,
        samples.iter().map(|s| s.0).collect(),
        Some(samples.iter().map(|s| s.1).collect()),
        Some(flags),
    )
    .map(|ts| ts.with_convention(convention))
}

pub fn fit_config(cfg: &ExperimentConfig) -> FitConfig {
    FitConfig {
        restarts: cfg.model.restarts,
        ..FitConfig::with_seed(cfg.seed)
    }
}

/// Surrogate Greeks at the test sites (calendar time).
#[derive(Clone, Debug)]
pub struct SurfaceEstimates {
    pub price: Vec<GreekEstimate<f64>>,
    pub delta: Vec<GreekEstimate<f64>>,
    pub theta: Vec<GreekEstimate<f64>>,
    pub gamma: Vec<GreekEstimate<f64>>,
}

impl SurfaceEstimates {
    /// Tidy rows: one per site and Greek.
    pub fn rows(&self, grid: &TestGrid) -> Result<Vec<GreekRow>> {
        let mut rows = Vec::with_capacity(4 * grid.len());
        for (i, &(t, _)) in grid.sites.iter().enumerate() {
            for est in [&self.price[i], &self.delta[i], &self.theta[i], &self.gamma[i]] {
                rows.push(GreekRow::from_estimate(t, est)?);
            }
        }
        Ok(rows)
    }
}

pub fn evaluate_surface(gp: &GpModel<f64>, grid: &TestGrid) -> Result<SurfaceEstimates> {
    let conv = gp.convention();
    let per_site: Vec<[GreekEstimate<f64>; 4]> = grid
        .sites
        .par_iter()
        .map(|&(t, s)| {
            let x0 = conv.from_calendar(t);
            Ok([
                greeks::price(gp, x0, s)?,
                greeks::delta(gp, x0, s)?,
                greeks::theta(gp, x0, s)?,
                greeks::gamma_fd(gp, x0, s, default_gamma_step(s))?,
            ])
        })
        .collect::<Result<_>>()?;
    let mut out = SurfaceEstimates {
        price: Vec::with_capacity(grid.len()),
        delta: Vec::with_capacity(grid.len()),
        theta: Vec::with_capacity(grid.len()),
        gamma: Vec::with_capacity(grid.len()),
    };
    for [p, d, th, g] in per_site {
        out.price.push(p);
        out.delta.push(d);
        out.theta.push(th);
        out.gamma.push(g);
    }
    Ok(out)
}

/// Hedging results of one run.
#[derive(Clone, Debug)]
pub struct HedgeReport {
    pub outcomes: Vec<HedgeOutcome>,
    pub summary: HedgeSummary,
    pub mu_e: f64,
    pub v_e: f64,
    /// Terminal-error variance when hedging with implied Delta (local volatility only).
    pub var_implied: Option<f64>,
}

/// Physical paths on the fine hedging grid from `N(start_mean, start_sd²)` starts.
pub fn hedge_paths(model: &MarketModel, h: &HedgeConfig, seed: u64) -> Result<PathMatrix> {
    let rebalances = (model.maturity() / h.dt).round() as usize;
    if rebalances == 0 || ((rebalances as f64) * h.dt - model.maturity()).abs() > 1e-9 {
        return Err(Error::Config(format!("hedge dt {} does not divide the maturity", h.dt)));
    }
    let starts = normal_starts(
        h.n_paths,
        h.start_mean,
        h.start_sd,
        StreamSeed::new(seed, streams::HEDGE_START),
    );
    let times = time_grid(0.0, model.maturity(), rebalances * h.fine_steps);
    Ok(simulate_paths(
        model.dynamics().as_ref(),
        &starts,
        &times,
        h.n_paths,
        Measure::Physical,
        StreamSeed::new(seed, streams::HEDGE_PATHS),
    ))
}

/// Hedges with the surrogate Delta against the benchmark Delta on the paths
/// of [`hedge_paths`].
pub fn run_hedge(
    gp: &GpModel<f64>,
    model: &MarketModel,
    bench: &Benchmark,
    h: &HedgeConfig,
    seed: u64,
) -> Result<HedgeReport> {
    let paths = hedge_paths(model, h, seed)?;
    let conv = gp.convention();
    let hat = |t: f64, s: f64| gradient_mean(gp, S_COORD, &[conv.from_calendar(t), s]).unwrap_or(f64::NAN);
    let bench_delta = |t: f64, s: f64| bench.delta_at(t, s);
    let payoff = |s: f64| model.payoff(s);
    let w0 = |s0: f64| match h.w0 {
        InitialWealth::Benchmark => bench.price_at(0.0, s0),
        InitialWealth::Surrogate => gp.predict_mean(&[conv.from_calendar(0.0), s0]).unwrap_or(f64::NAN),
    };
    let outcomes = decompose_many(&hat, &bench_delta, &paths, h.fine_steps, model.rate(), &w0, &payoff)?;
    let coarse = paths.subsample(h.fine_steps);
    let sigma = |t: f64, s: f64| model.volatility(t, s);
    let (mu_e, v_e) = empirical_moments(&hat, &bench_delta, &coarse, &sigma, model.drift(), model.rate());
    let var_implied = match (bench, model) {
        (Benchmark::Gold(g), MarketModel::LocalVolatility(p)) => {
            let implied = |t: f64, s: f64| implied_delta_or(p, t, s, g.price_at(t, s), g.delta_at(t, s));
            let o = decompose_many(&implied, &bench_delta, &paths, h.fine_steps, model.rate(), &w0, &payoff)?;
            summarize(&o).total_error.map(|c| c.variance)
        }
        _ => None,
    };
    let summary = summarize(&outcomes);
    Ok(HedgeReport {
        outcomes,
        summary,
        mu_e,
        v_e,
        var_implied,
    })
}

/// One row of the metrics table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub label: String,
    pub variant: Option<String>,
    pub case: CaseStudy,
    pub kernel: String,
    pub trend: String,
    pub noise: NoiseSpec,
    pub design: DesignKind,
    pub path_dt: Option<f64>,
    pub n: usize,
    pub n_virtual: usize,
    pub n_inner: Option<usize>,
    pub seed: u64,
    /// Delta accuracy on the test grid.
    pub rimse: f64,
    pub mad: f64,
    pub cvr95: f64,
    pub bias: f64,
    pub nlpd: f64,
    pub theta_err: f64,
    pub price_err: f64,
    #[serde(rename = "var_ET")]
    pub var_et: Option<f64>,
    #[serde(rename = "mean_ET")]
    pub mean_et: Option<f64>,
    #[serde(rename = "var_Ed")]
    pub var_ed: Option<f64>,
    #[serde(rename = "mean_Ed")]
    pub mean_ed: Option<f64>,
    #[serde(rename = "var_ET_bench")]
    pub var_et_bench: Option<f64>,
    #[serde(rename = "var_ET_implied")]
    pub var_et_implied: Option<f64>,
    #[serde(rename = "mu_E")]
    pub mu_e: Option<f64>,
    #[serde(rename = "V_E")]
    pub v_e: Option<f64>,
    pub l1_loss: Option<f64>,
    pub lengthscales: Vec<f64>,
    pub process_variance: f64,
    pub noise_variance: Option<f64>,
    pub beta: Vec<f64>,
    pub log_likelihood: f64,
}

/// Everything produced by a single run.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub config: ExperimentConfig,
    pub design: Design,
    pub model: GpModel<f64>,
    pub surface: SurfaceEstimates,
    pub hedge: Option<HedgeReport>,
    pub metrics: MetricsRow,
}

/// Runs one (already expanded) configuration against `bench`.
pub fn run_single(cfg: &ExperimentConfig, bench: &Benchmark, variant: Option<&str>) -> Result<RunOutput> {
    let model = market_model(cfg.case_study);
    let conv = convention_for(cfg.case_study, &model);
    let design = build_design(cfg, &model).stage("design")?;
    let ts = training_set(cfg, &model, &design, conv).stage("data")?;
    let trend = trend_spec(cfg.model.trend, &model);
    let gp = fit(ts, cfg.model.kernel, trend, cfg.model.noise, &fit_config(cfg)).stage("fit")?;

    let grid = cfg.test_grid_choice().grid();
    let surface = evaluate_surface(&gp, &grid).stage("greeks")?;
    let truth = bench.on_grid(&grid).stage("benchmark")?;
    let values = |v: &[GreekEstimate<f64>]| v.iter().map(|e| e.value).collect::<Vec<_>>();
    let vars = |v: &[GreekEstimate<f64>]| v.iter().map(|e| e.variance).collect::<Vec<_>>();
    let acc = GreekAccuracy::compute(&values(&surface.delta), &vars(&surface.delta), &truth.delta).stage("metrics")?;
    let theta_err = rimse(&values(&surface.theta), &truth.theta).stage("metrics")?;
    let price_err = rimse(&values(&surface.price), &truth.price).stage("metrics")?;

    let hedge = if cfg.hedge.enabled {
        Some(run_hedge(&gp, &model, bench, &cfg.hedge, cfg.seed).stage("hedge")?)
    } else {
        None
    };
    let h = hedge.as_ref();
    let col = |f: fn(&HedgeSummary) -> Option<f64>| h.and_then(|r| f(&r.summary));

    let metrics = MetricsRow {
        label: cfg.run_label(),
        variant: variant.map(str::to_string),
        case: cfg.case_study,
        kernel: cfg.model.kernel.to_string(),
        trend: cfg.model.trend.label(),
        noise: cfg.model.noise,
        design: cfg.design.kind,
        path_dt: (cfg.design.kind == DesignKind::Path).then_some(cfg.design.path_dt),
        n: design.len() - design.n_virtual(),
        n_virtual: design.n_virtual(),
        n_inner: (!cfg.data.exact).then_some(cfg.data.n_inner),
        seed: cfg.seed,
        rimse: acc.rimse,
        mad: acc.mad,
        cvr95: acc.cvr95,
        bias: acc.bias,
        nlpd: acc.nlpd,
        theta_err,
        price_err,
        var_et: col(|s| s.total_error.map(|c| c.variance)),
        mean_et: col(|s| s.total_error.map(|c| c.mean)),
        var_ed: col(|s| s.discretization_error.map(|c| c.variance)),
        mean_ed: col(|s| s.discretization_error.map(|c| c.mean)),
        var_et_bench: col(|s| s.benchmark_error.map(|c| c.variance)),
        var_et_implied: h.and_then(|r| r.var_implied),
        mu_e: h.map(|r| r.mu_e),
        v_e: h.map(|r| r.v_e),
        l1_loss: col(|s| Some(s.l1_loss)),
        lengthscales: gp.kernel().lengthscales().to_vec(),
        process_variance: gp.kernel().process_variance(),
        noise_variance: gp.noise().constant_variance(),
        beta: gp.beta().to_vec(),
        log_likelihood: gp.log_likelihood(),
    };
    Ok(RunOutput {
        config: cfg.clone(),
        design,
        model: gp,
        surface,
        hedge,
        metrics,
    })
}
