//! Benchmark Greeks: closed form under Black–Scholes, a cached grid of
//! finite-difference Monte Carlo estimates under local volatility.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::write_csv;
use crate::metrics::TestGrid;
use crate::models::{
    bs_delta, bs_price, bs_theta, implied_delta, lv_fd_delta_gold, BsParams, GoldEstimate, LvParams,
};
use crate::rng::{streams, StreamSeed};

const CACHE_VERSION: u32 = 1;

/// Finite-difference step of the benchmark at spot `s`.
pub fn gold_step(s: f64) -> f64 {
    0.01 * s
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
struct GoldRow {
    t: f64,
    #[serde(rename = "S")]
    s: f64,
    price: f64,
    delta: f64,
    gamma: f64,
    theta: f64,
    delta_se: f64,
}

/// Benchmark estimates on a rectangular grid, time-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GoldGrid {
    pub params: LvParams,
    pub times: Vec<f64>,
    pub prices: Vec<f64>,
    pub values: Vec<GoldEstimate>,
}

fn axes(grid: &TestGrid) -> Result<(Vec<f64>, Vec<f64>)> {
    let times = grid.times();
    if times.is_empty() || grid.len() % times.len() != 0 {
        return Err(Error::invalid("benchmark grid must be rectangular"));
    }
    let n_s = grid.len() / times.len();
    let prices: Vec<f64> = grid.sites[..n_s].iter().map(|&(_, s)| s).collect();
    let rectangular = grid
        .sites
        .iter()
        .enumerate()
        .all(|(i, &(t, s))| t == times[i / n_s] && s == prices[i % n_s]);
    if !rectangular || prices.windows(2).any(|w| !(w[1] > w[0])) || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("benchmark grid must be rectangular and increasing"));
    }
    Ok((times, prices))
}

fn cache_key(p: &LvParams, grid: &TestGrid, n_paths: usize, seed: u64) -> String {
    let mut h = Sha256::new();
    h.update(CACHE_VERSION.to_le_bytes());
    h.update(serde_json::to_vec(p).expect("serializable"));
    for &(t, s) in &grid.sites {
        h.update(t.to_le_bytes());
        h.update(s.to_le_bytes());
    }
    h.update((n_paths as u64).to_le_bytes());
    h.update(seed.to_le_bytes());
    h.finalize()[..12].iter().map(|b| format!("{b:02x}")).collect()
}

impl GoldGrid {
    /// Runs the benchmark at every site of `grid` with `n_paths` paths per site.
    pub fn compute(p: &LvParams, grid: &TestGrid, n_paths: usize, seed: u64) -> Result<Self> {
        let (times, prices) = axes(grid)?;
        if n_paths < 2 {
            return Err(Error::invalid("benchmark needs at least two paths"));
        }
        let root = StreamSeed::new(seed, streams::GOLD_STANDARD);
        let values = grid
            .sites
            .iter()
            .enumerate()
            .map(|(i, &(t, s))| lv_fd_delta_gold(p, p, t, s, gold_step(s), n_paths, root.child(i as u64)))
            .collect();
        Ok(Self {
            params: *p,
            times,
            prices,
            values,
        })
    }

    /// Like [`GoldGrid::compute`], reusing a CSV in `cache_dir` when one
    /// exists for the same parameters, grid, path count and seed.
    pub fn cached(p: &LvParams, grid: &TestGrid, n_paths: usize, seed: u64, cache_dir: &Path) -> Result<Self> {
        let file = Self::cache_path(p, grid, n_paths, seed, cache_dir);
        if file.exists() {
            if let Ok(g) = Self::read(p, grid, &file) {
                return Ok(g);
            }
        }
        let g = Self::compute(p, grid, n_paths, seed)?;
        g.write(&file)?;
        Ok(g)
    }

    pub fn cache_path(p: &LvParams, grid: &TestGrid, n_paths: usize, seed: u64, cache_dir: &Path) -> PathBuf {
        cache_dir.join(format!("lv-gold-{}.csv", cache_key(p, grid, n_paths, seed)))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let rows: Vec<GoldRow> = self
            .sites()
            .zip(&self.values)
            .map(|((t, s), g)| GoldRow {
                t,
                s,
                price: g.price,
                delta: g.delta,
                gamma: g.gamma,
                theta: g.theta,
                delta_se: g.delta_se,
            })
            .collect();
        write_csv(path, &rows)
    }

    fn read(p: &LvParams, grid: &TestGrid, path: &Path) -> Result<Self> {
        let (times, prices) = axes(grid)?;
        let mut rdr = csv::Reader::from_path(path)?;
        let rows: Vec<GoldRow> = rdr.deserialize().collect::<std::result::Result<_, _>>()?;
        if rows.len() != grid.len() || rows.iter().zip(&grid.sites).any(|(r, &(t, s))| r.t != t || r.s != s) {
            return Err(Error::invalid("cached benchmark does not match the grid"));
        }
        Ok(Self {
            params: *p,
            times,
            prices,
            values: rows
                .iter()
                .map(|r| GoldEstimate {
                    price: r.price,
                    delta: r.delta,
                    gamma: r.gamma,
                    theta: r.theta,
                    delta_se: r.delta_se,
                })
                .collect(),
        })
    }

    pub fn sites(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times
            .iter()
            .flat_map(move |&t| self.prices.iter().map(move |&s| (t, s)))
    }

    fn at(&self, i: usize, j: usize) -> &GoldEstimate {
        &self.values[i * self.prices.len() + j]
    }

    /// Bracketing index and weight along an increasing axis, clamped at the ends.
    fn locate(axis: &[f64], x: f64) -> (usize, f64) {
        if axis.len() == 1 || x <= axis[0] {
            return (0, 0.0);
        }
        let last = axis.len() - 1;
        if x >= axis[last] {
            return (last - 1, 1.0);
        }
        let k = axis.partition_point(|&a| a <= x) - 1;
        (k, (x - axis[k]) / (axis[k + 1] - axis[k]))
    }

    fn bilinear(&self, t: f64, s: f64, f: impl Fn(&GoldEstimate) -> f64) -> f64 {
        let (i, wt) = Self::locate(&self.times, t);
        let (j, ws) = Self::locate(&self.prices, s);
        let i1 = (i + 1).min(self.times.len() - 1);
        let j1 = (j + 1).min(self.prices.len() - 1);
        let lo = (1.0 - ws) * f(self.at(i, j)) + ws * f(self.at(i, j1));
        let hi = (1.0 - ws) * f(self.at(i1, j)) + ws * f(self.at(i1, j1));
        (1.0 - wt) * lo + wt * hi
    }

    /// Interpolated Delta; constant beyond the price range.
    pub fn delta_at(&self, t: f64, s: f64) -> f64 {
        self.bilinear(t, s, |g| g.delta)
    }

    /// Interpolated price; continued linearly with the edge Delta beyond the price range.
    pub fn price_at(&self, t: f64, s: f64) -> f64 {
        let (lo, hi) = (self.prices[0], *self.prices.last().expect("non-empty"));
        let edge = s.clamp(lo, hi);
        let base = self.bilinear(t, edge, |g| g.price);
        base + (s - edge) * self.delta_at(t, edge)
    }
}

/// Black–Scholes Delta at the volatility implied by `price`; falls back to
/// `fallback` when no volatility reproduces the price.
pub fn implied_delta_or(p: &LvParams, t: f64, s: f64, price: f64, fallback: f64) -> f64 {
    let tau = p.maturity - t;
    if tau <= 0.0 {
        return fallback;
    }
    implied_delta(price, tau, s, p.strike, p.r).unwrap_or(fallback)
}

/// Counts sites with `|log S/K| ∈ [0.1, 0.3]` and `t < T` where implied
/// Delta lies below the benchmark out of the money and above it in the
/// money. Returns `(matching, eligible)`.
pub fn implied_delta_pattern(gold: &GoldGrid) -> (usize, usize) {
    let p = &gold.params;
    let mut matching = 0;
    let mut eligible = 0;
    for ((t, s), g) in gold.sites().zip(&gold.values) {
        let m = (s / p.strike).ln();
        if t >= p.maturity || !(0.1..=0.3).contains(&m.abs()) {
            continue;
        }
        let Ok(implied) = implied_delta(g.price, p.maturity - t, s, p.strike, p.r) else {
            continue;
        };
        eligible += 1;
        let ok = if m < 0.0 { implied < g.delta } else { implied > g.delta };
        if ok {
            matching += 1;
        }
    }
    (matching, eligible)
}

/// Benchmark values at each test site.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteBenchmarks {
    pub price: Vec<f64>,
    pub delta: Vec<f64>,
    pub theta: Vec<f64>,
    pub gamma: Vec<f64>,
}

/// Source of benchmark Greeks for one case study.
#[derive(Clone, Debug)]
pub enum Benchmark {
    Exact(BsParams),
    Gold(GoldGrid),
}

impl Benchmark {
    /// Benchmarks at the test sites. A gold grid must have been computed on `grid`.
    pub fn on_grid(&self, grid: &TestGrid) -> Result<SiteBenchmarks> {
        match self {
            Benchmark::Exact(p) => {
                let mut out = SiteBenchmarks {
                    price: Vec::with_capacity(grid.len()),
                    delta: Vec::with_capacity(grid.len()),
                    theta: Vec::with_capacity(grid.len()),
                    gamma: Vec::with_capacity(grid.len()),
                };
                for &(t, s) in &grid.sites {
                    let tau = p.maturity - t;
                    out.price.push(bs_price(p, tau, s));
                    out.delta.push(bs_delta(p, tau, s));
                    out.theta.push(bs_theta(p, tau, s).unwrap_or(0.0));
                    out.gamma.push(crate::models::bs_gamma(p, tau, s).unwrap_or(0.0));
                }
                Ok(out)
            }
            Benchmark::Gold(g) => {
                if g.values.len() != grid.len() || g.sites().zip(&grid.sites).any(|(a, b)| a != *b) {
                    return Err(Error::invalid("benchmark grid differs from the test grid"));
                }
                Ok(SiteBenchmarks {
                    price: g.values.iter().map(|v| v.price).collect(),
                    delta: g.values.iter().map(|v| v.delta).collect(),
                    theta: g.values.iter().map(|v| v.theta).collect(),
                    gamma: g.values.iter().map(|v| v.gamma).collect(),
                })
            }
        }
    }

    pub fn delta_at(&self, t: f64, s: f64) -> f64 {
        match self {
            Benchmark::Exact(p) => bs_delta(p, p.maturity - t, s),
            Benchmark::Gold(g) => g.delta_at(t, s),
        }
    }

    pub fn price_at(&self, t: f64, s: f64) -> f64 {
        match self {
            Benchmark::Exact(p) => bs_price(p, p.maturity - t, s),
            Benchmark::Gold(g) => g.price_at(t, s),
        }
    }
}
