//! Market models that provide ground truth and Monte Carlo training data.

mod black_scholes;
mod implied;
mod local_vol;

pub use black_scholes::{
    bs_delta, bs_gamma, bs_mc_sample, bs_price, bs_theta, bs_vega, norm_cdf, norm_pdf, BsParams,
};
pub use implied::{implied_delta, implied_vol};
pub use local_vol::{
    lv_fd_delta_gold, lv_fd_delta_independent, lv_mc_price, lv_sigma, lv_simulate_paths,
    ConstantVol, GoldEstimate, LocalVol, LvParams, VolatilitySurface,
};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::rng::StreamSeed;

/// Probability measure under which paths are simulated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Measure {
    /// Physical measure, drift μ.
    Physical,
    /// Pricing measure, drift r.
    RiskNeutral,
}

/// Monte Carlo price estimate at one input.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McSample {
    /// Discounted mean payoff.
    pub y: f64,
    /// Variance of the mean `y`, i.e. the payoff sample variance divided by
    /// the number of inner draws. This is the per-observation plug-in noise.
    pub sigma2_hat: f64,
    pub n_inner: usize,
}

/// One-factor diffusion `dS = m S dt + σ(t, S) S dB` with `m` set by the measure.
pub trait Dynamics: Sync {
    fn rate(&self) -> f64;
    fn drift(&self) -> f64;
    fn volatility(&self, t: f64, s: f64) -> f64;
    /// Advances `s` from `t` to `t + dt` given a standard normal shock.
    fn step(&self, t: f64, s: f64, dt: f64, z: f64, measure: Measure) -> f64;

    fn measure_drift(&self, measure: Measure) -> f64 {
        match measure {
            Measure::Physical => self.drift(),
            Measure::RiskNeutral => self.rate(),
        }
    }
}

/// Positivity floor applied to simulated prices, relative to the start value.
pub const PATH_FLOOR: f64 = 1e-8;

/// Paths stored row by row, `n_paths × times.len()`.
#[derive(Clone, Debug, PartialEq)]
pub struct PathMatrix {
    pub times: Vec<f64>,
    values: Vec<f64>,
    n_paths: usize,
}

impl PathMatrix {
    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn path(&self, i: usize) -> &[f64] {
        let m = self.times.len();
        &self.values[i * m..(i + 1) * m]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.times.len())
    }

    pub fn terminal(&self) -> Vec<f64> {
        self.iter().map(|p| *p.last().expect("non-empty path")).collect()
    }

    /// Keeps every `stride`-th time point (the last point must fall on the stride).
    pub fn subsample(&self, stride: usize) -> PathMatrix {
        let idx: Vec<usize> = (0..self.times.len()).step_by(stride.max(1)).collect();
        let times = idx.iter().map(|&i| self.times[i]).collect();
        let values = self
            .iter()
            .flat_map(|p| idx.iter().map(move |&i| p[i]))
            .collect();
        PathMatrix {
            times,
            values,
            n_paths: self.n_paths,
        }
    }
}

/// Equally spaced grid of `n_steps + 1` times from `t0` to `t_end`.
pub fn time_grid(t0: f64, t_end: f64, n_steps: usize) -> Vec<f64> {
    let dt = (t_end - t0) / n_steps as f64;
    (0..=n_steps)
        .map(|k| if k == n_steps { t_end } else { t0 + k as f64 * dt })
        .collect()
}

/// Simulates one path on `times` with one Gaussian draw per step.
pub fn simulate_path<D: Dynamics + ?Sized, R: Rng>(
    dynamics: &D,
    s0: f64,
    times: &[f64],
    measure: Measure,
    rng: &mut R,
) -> Vec<f64> {
    let floor = PATH_FLOOR * s0;
    let mut out = Vec::with_capacity(times.len());
    let mut s = s0;
    out.push(s);
    for w in times.windows(2) {
        let z: f64 = rng.sample(StandardNormal);
        s = dynamics.step(w[0], s, w[1] - w[0], z, measure).max(floor);
        out.push(s);
    }
    out
}

/// Simulates `n_paths` paths; path `i` uses generator `seed.rng(i)` and
/// starts at `s0[i]` (or `s0[0]` when a single start value is given).
pub fn simulate_paths<D: Dynamics + ?Sized>(
    dynamics: &D,
    s0: &[f64],
    times: &[f64],
    n_paths: usize,
    measure: Measure,
    seed: StreamSeed,
) -> PathMatrix {
    use rayon::prelude::*;
    let rows: Vec<Vec<f64>> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let start = if s0.len() == 1 { s0[0] } else { s0[i] };
            simulate_path(dynamics, start, times, measure, &mut seed.rng(i as u64))
        })
        .collect();
    PathMatrix {
        times: times.to_vec(),
        values: rows.into_iter().flatten().collect(),
        n_paths,
    }
}

/// The two case-study models.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MarketModel {
    BlackScholes(BsParams),
    LocalVolatility(LvParams),
}

impl MarketModel {
    pub fn strike(&self) -> f64 {
        match self {
            MarketModel::BlackScholes(p) => p.strike,
            MarketModel::LocalVolatility(p) => p.strike,
        }
    }

    pub fn maturity(&self) -> f64 {
        match self {
            MarketModel::BlackScholes(p) => p.maturity,
            MarketModel::LocalVolatility(p) => p.maturity,
        }
    }

    pub fn rate(&self) -> f64 {
        match self {
            MarketModel::BlackScholes(p) => p.r,
            MarketModel::LocalVolatility(p) => p.r,
        }
    }

    pub fn drift(&self) -> f64 {
        match self {
            MarketModel::BlackScholes(p) => p.mu,
            MarketModel::LocalVolatility(p) => p.mu,
        }
    }

    pub fn volatility(&self, t: f64, s: f64) -> f64 {
        match self {
            MarketModel::BlackScholes(p) => p.sigma,
            MarketModel::LocalVolatility(p) => lv_sigma(p, t, s),
        }
    }

    pub fn dynamics(&self) -> Box<dyn Dynamics + '_> {
        match self {
            MarketModel::BlackScholes(p) => Box::new(*p),
            MarketModel::LocalVolatility(p) => Box::new(LocalVol::new(*p, *p)),
        }
    }

    /// Monte Carlo price sample at calendar time `t`.
    pub fn price_sample(&self, t: f64, s: f64, n_inner: usize, seed: StreamSeed) -> McSample {
        match self {
            MarketModel::BlackScholes(p) => {
                bs_mc_sample(p, (p.maturity - t).max(0.0), s, n_inner, &mut seed.rng(0))
            }
            MarketModel::LocalVolatility(p) => lv_mc_price(p, p, t, s, n_inner, seed),
        }
    }

    pub fn payoff(&self, s: f64) -> f64 {
        (s - self.strike()).max(0.0)
    }
}
