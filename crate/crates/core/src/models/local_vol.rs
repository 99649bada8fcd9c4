//! Local volatility dynamics, Euler–Maruyama simulation and the
//! common-random-numbers finite-difference benchmark.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::black_scholes::sample_moments;
use super::{simulate_paths, time_grid, Dynamics, McSample, Measure, PathMatrix, PATH_FLOOR};
use crate::rng::StreamSeed;

/// Local volatility case-study parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LvParams {
    pub r: f64,
    pub mu: f64,
    pub strike: f64,
    pub maturity: f64,
    pub s_ref: f64,
    pub t_ref: f64,
    /// Euler steps over the full maturity; a start at `t` uses the same step length.
    pub steps_per_maturity: usize,
}

impl Default for LvParams {
    fn default() -> Self {
        Self {
            r: 0.05,
            mu: 0.13,
            strike: 50.0,
            maturity: 0.4,
            s_ref: 50.0,
            t_ref: 0.4,
            steps_per_maturity: 100,
        }
    }
}

impl LvParams {
    /// Number of Euler steps from `t` to maturity at the nominal step length.
    pub fn steps_from(&self, t: f64) -> usize {
        let remaining = self.maturity - t;
        if remaining <= 0.0 {
            return 0;
        }
        let nominal = self.maturity / self.steps_per_maturity as f64;
        ((remaining / nominal) - 1e-9).ceil().max(1.0) as usize
    }
}

/// σ(t, S) as a function of calendar time and spot.
pub trait VolatilitySurface: Sync {
    fn sigma(&self, t: f64, s: f64) -> f64;
}

/// The piecewise local volatility: 0.4 outside |log S/S*| < 0.4, and a
/// cosine dip towards 0.24 inside.
pub fn lv_sigma(p: &LvParams, t: f64, s: f64) -> f64 {
    let m = (s / p.s_ref).ln();
    if m.abs() >= 0.4 {
        return 0.4;
    }
    0.4 - 0.16 * (-0.5 * (p.t_ref - t)).exp() * (1.25 * std::f64::consts::PI * m).cos()
}

impl VolatilitySurface for LvParams {
    fn sigma(&self, t: f64, s: f64) -> f64 {
        lv_sigma(self, t, s)
    }
}

/// Flat volatility, used to cross-check the simulators against Black–Scholes
/// and (with zero) to make paths deterministic.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantVol(pub f64);

impl VolatilitySurface for ConstantVol {
    fn sigma(&self, _t: f64, _s: f64) -> f64 {
        self.0
    }
}

/// Euler–Maruyama dynamics with rates from `params` and volatility from `vol`.
#[derive(Clone, Copy, Debug)]
pub struct LocalVol<V> {
    pub params: LvParams,
    pub vol: V,
}

impl<V: VolatilitySurface> LocalVol<V> {
    pub fn new(params: LvParams, vol: V) -> Self {
        Self { params, vol }
    }
}

impl<V: VolatilitySurface> Dynamics for LocalVol<V> {
    fn rate(&self) -> f64 {
        self.params.r
    }

    fn drift(&self) -> f64 {
        self.params.mu
    }

    fn volatility(&self, t: f64, s: f64) -> f64 {
        self.vol.sigma(t, s)
    }

    fn step(&self, t: f64, s: f64, dt: f64, z: f64, measure: Measure) -> f64 {
        let m = self.measure_drift(measure);
        s + m * s * dt + self.vol.sigma(t, s) * s * dt.sqrt() * z
    }
}

/// `n_paths` Euler paths on `n_steps` equal steps from `t0` to `t_end`.
#[allow(clippy::too_many_arguments)]
pub fn lv_simulate_paths<V: VolatilitySurface>(
    p: &LvParams,
    vol: &V,
    s0: &[f64],
    t0: f64,
    t_end: f64,
    n_steps: usize,
    n_paths: usize,
    measure: Measure,
    seed: StreamSeed,
) -> PathMatrix {
    let dynamics = LocalVol::new(*p, VolRef(vol));
    simulate_paths(&dynamics, s0, &time_grid(t0, t_end, n_steps), n_paths, measure, seed)
}

struct VolRef<'a, V>(&'a V);

impl<V: VolatilitySurface> VolatilitySurface for VolRef<'_, V> {
    fn sigma(&self, t: f64, s: f64) -> f64 {
        self.0.sigma(t, s)
    }
}

const CHUNK: usize = 512;

/// Evaluates `f(i)` for every path index in fixed-size chunks; the chunk
/// results come back in index order so reductions do not depend on scheduling.
fn chunked<T: Send, F>(n_paths: usize, f: F) -> Vec<T>
where
    F: Fn(std::ops::Range<usize>) -> T + Sync,
{
    let n_chunks = n_paths.div_ceil(CHUNK);
    (0..n_chunks)
        .into_par_iter()
        .map(|c| f(c * CHUNK..((c + 1) * CHUNK).min(n_paths)))
        .collect()
}

/// Terminal values of several risk-neutral Euler legs sharing one set of shocks.
fn terminal_legs<V: VolatilitySurface, R: Rng, const L: usize>(
    p: &LvParams,
    vol: &V,
    t: f64,
    starts: [f64; L],
    rng: &mut R,
) -> [f64; L] {
    let n = p.steps_from(t);
    let dt = (p.maturity - t) / n as f64;
    let sq = dt.sqrt();
    let mut s = starts;
    let floors = starts.map(|v| PATH_FLOOR * v);
    for k in 0..n {
        let tk = t + k as f64 * dt;
        let z: f64 = rng.sample(StandardNormal);
        for (leg, floor) in s.iter_mut().zip(floors) {
            let v = *leg;
            *leg = (v + p.r * v * dt + vol.sigma(tk, v) * v * sq * z).max(floor);
        }
    }
    s
}

/// Discounted mean call payoff over `n_paths` risk-neutral Euler paths from `(t, s)`.
pub fn lv_mc_price<V: VolatilitySurface>(
    p: &LvParams,
    vol: &V,
    t: f64,
    s: f64,
    n_paths: usize,
    seed: StreamSeed,
) -> McSample {
    let payoff = |x: f64| (x - p.strike).max(0.0);
    if t >= p.maturity {
        return McSample {
            y: payoff(s),
            sigma2_hat: 0.0,
            n_inner: n_paths,
        };
    }
    let disc = (-p.r * (p.maturity - t)).exp();
    let draws: Vec<Vec<f64>> = chunked(n_paths, |range| {
        range
            .map(|i| {
                let [st] = terminal_legs(p, vol, t, [s], &mut seed.rng(i as u64));
                disc * payoff(st)
            })
            .collect()
    });
    sample_moments(draws.into_iter().flatten(), n_paths)
}

/// Benchmark price and sensitivities at one site.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoldEstimate {
    pub price: f64,
    pub delta: f64,
    pub gamma: f64,
    /// Calendar Theta implied by the pricing equation.
    pub theta: f64,
    /// Monte Carlo standard error of `delta`.
    pub delta_se: f64,
}

/// Central finite-difference Delta with common random numbers: the legs
/// started at `s − h`, `s` and `s + h` see the same Brownian increments.
/// Gamma comes from the same three legs and Theta from the pricing PDE.
pub fn lv_fd_delta_gold<V: VolatilitySurface>(
    p: &LvParams,
    vol: &V,
    t: f64,
    s: f64,
    h: f64,
    n_paths: usize,
    seed: StreamSeed,
) -> GoldEstimate {
    let payoff = |x: f64| (x - p.strike).max(0.0);
    if t >= p.maturity {
        return GoldEstimate {
            price: payoff(s),
            delta: if s > p.strike { 1.0 } else { 0.0 },
            gamma: 0.0,
            theta: 0.0,
            delta_se: 0.0,
        };
    }
    let disc = (-p.r * (p.maturity - t)).exp();
    // per chunk: Σ up, Σ mid, Σ down, Σ (up − down)²
    let sums: Vec<[f64; 4]> = chunked(n_paths, |range| {
        let mut acc = [0.0; 4];
        for i in range {
            let [u, c, d] = terminal_legs(p, vol, t, [s + h, s, s - h], &mut seed.rng(i as u64));
            let (u, c, d) = (payoff(u), payoff(c), payoff(d));
            acc[0] += u;
            acc[1] += c;
            acc[2] += d;
            acc[3] += (u - d) * (u - d);
        }
        acc
    });
    let mut tot = [0.0; 4];
    for a in &sums {
        for k in 0..4 {
            tot[k] += a[k];
        }
    }
    let n = n_paths as f64;
    let (up, mid, down) = (disc * tot[0] / n, disc * tot[1] / n, disc * tot[2] / n);
    let delta = (up - down) / (2.0 * h);
    let mean_diff = (tot[0] - tot[2]) / n;
    let var_diff = (tot[3] / n - mean_diff * mean_diff).max(0.0) * n / (n - 1.0).max(1.0);
    let delta_se = disc * (var_diff / n).sqrt() / (2.0 * h);
    let gamma = (up - 2.0 * mid + down) / (h * h);
    let sig = vol.sigma(t, s);
    let theta = p.r * mid - p.r * s * delta - 0.5 * sig * sig * s * s * gamma;
    GoldEstimate {
        price: mid,
        delta,
        gamma,
        theta,
        delta_se,
    }
}

/// The same finite difference with independent shocks in the two legs.
pub fn lv_fd_delta_independent<V: VolatilitySurface>(
    p: &LvParams,
    vol: &V,
    t: f64,
    s: f64,
    h: f64,
    n_paths: usize,
    seed: StreamSeed,
) -> f64 {
    let up = lv_mc_price(p, vol, t, s + h, n_paths, seed.child(1)).y;
    let down = lv_mc_price(p, vol, t, s - h, n_paths, seed.child(2)).y;
    (up - down) / (2.0 * h)
}
