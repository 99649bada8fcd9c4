//! Discrete Delta hedging, the split of the hedging error into a
//! time-discretisation part and a Delta-approximation part, and the
//! moment proxies of the latter.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::greeks::{credible_band, GreekEstimate};
use crate::io::write_csv;
use crate::metrics::{mean, sample_variance};
use crate::models::PathMatrix;

/// A Delta rule `(t, S) ↦ Δ` with calendar time `t`.
pub type DeltaFn<'a> = dyn Fn(f64, f64) -> f64 + Sync + 'a;

/// Result of hedging one path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HedgeOutcome {
    pub path_id: usize,
    #[serde(rename = "W_T")]
    pub terminal_wealth: f64,
    /// `W_T − Φ(S_T)`.
    #[serde(rename = "E_T")]
    pub total_error: f64,
    #[serde(rename = "E_d")]
    pub discretization_error: Option<f64>,
    #[serde(rename = "E_hat")]
    pub approx_error: Option<f64>,
    /// Hedging error of the same path hedged with the benchmark Delta.
    #[serde(rename = "E_bench")]
    pub benchmark_error: Option<f64>,
    pub n_trades: usize,
}

fn check_grid(path: &[f64], times: &[f64]) -> Result<()> {
    if path.len() != times.len() || times.len() < 2 {
        return Err(Error::invalid("path and times must have equal length >= 2"));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("rebalance times must be strictly increasing"));
    }
    Ok(())
}

/// Self-financing wealth from holding `position(k)` shares over
/// `[t_k, t_{k+1}]` and the rest in the bank account.
fn wealth(positions: &[f64], path: &[f64], times: &[f64], r: f64, w0: f64) -> f64 {
    let mut w = w0;
    for k in 0..times.len() - 1 {
        let growth = (r * (times[k + 1] - times[k])).exp();
        w = path[k + 1] * positions[k] + (w - path[k] * positions[k]) * growth;
    }
    w
}

/// Hedges `payoff` along `path` (observed at the rebalance `times`) with
/// the Delta rule, starting from wealth `w0`.
pub fn simulate_hedge(
    delta_fn: &DeltaFn,
    path: &[f64],
    times: &[f64],
    r: f64,
    w0: f64,
    payoff: &dyn Fn(f64) -> f64,
) -> Result<HedgeOutcome> {
    check_grid(path, times)?;
    let k = times.len() - 1;
    let positions: Vec<f64> = (0..k).map(|i| delta_fn(times[i], path[i])).collect();
    let w = wealth(&positions, path, times, r, w0);
    Ok(HedgeOutcome {
        path_id: 0,
        terminal_wealth: w,
        total_error: w - payoff(path[k]),
        discretization_error: None,
        approx_error: None,
        benchmark_error: None,
        n_trades: k,
    })
}

/// Increments `X_{t_{k+1}} − X_{t_k} = ΔS − r∫S dt` between rebalance
/// points, integrating on the fine grid by the trapezoid rule.
pub fn x_increments(fine_path: &[f64], fine_times: &[f64], stride: usize, r: f64) -> Vec<f64> {
    let n_steps = (fine_times.len() - 1) / stride;
    (0..n_steps)
        .map(|k| {
            let (a, b) = (k * stride, (k + 1) * stride);
            let integral: f64 = (a..b)
                .map(|i| 0.5 * (fine_path[i] + fine_path[i + 1]) * (fine_times[i + 1] - fine_times[i]))
                .sum();
            fine_path[b] - fine_path[a] - r * integral
        })
        .collect()
}

fn coarse(v: &[f64], stride: usize) -> Vec<f64> {
    v.iter().step_by(stride).copied().collect()
}

/// Hedges with `delta_hat` and splits the error: the approximation part is
/// `Ê_T = Σ_k (Δ̂ − Δ_bench)(t_k, S_k)(X_{k+1} − X_k)` and the
/// discretisation part is `E_T − Ê_T`, which tracks the error of hedging
/// with `delta_bench` (also recorded). The path is given on a fine grid;
/// rebalancing happens every `stride` fine steps.
#[allow(clippy::too_many_arguments)]
pub fn decompose_error(
    delta_hat: &DeltaFn,
    delta_bench: &DeltaFn,
    fine_path: &[f64],
    fine_times: &[f64],
    stride: usize,
    r: f64,
    w0: f64,
    payoff: &dyn Fn(f64) -> f64,
) -> Result<HedgeOutcome> {
    check_grid(fine_path, fine_times)?;
    if stride == 0 || (fine_times.len() - 1) % stride != 0 {
        return Err(Error::invalid("stride must divide the number of fine steps"));
    }
    let path = coarse(fine_path, stride);
    let times = coarse(fine_times, stride);
    let k = times.len() - 1;
    let hat: Vec<f64> = (0..k).map(|i| delta_hat(times[i], path[i])).collect();
    let bench: Vec<f64> = (0..k).map(|i| delta_bench(times[i], path[i])).collect();
    let dx = x_increments(fine_path, fine_times, stride, r);
    let approx: f64 = (0..k).map(|i| (hat[i] - bench[i]) * dx[i]).sum();
    let terminal = payoff(path[k]);
    let w = wealth(&hat, &path, &times, r, w0);
    let total = w - terminal;
    let bench_error = wealth(&bench, &path, &times, r, w0) - terminal;
    Ok(HedgeOutcome {
        path_id: 0,
        terminal_wealth: w,
        total_error: total,
        discretization_error: Some(total - approx),
        approx_error: Some(approx),
        benchmark_error: Some(bench_error),
        n_trades: k,
    })
}

/// [`decompose_error`] over every path of a fine-grid path matrix, with a
/// per-path initial wealth.
pub fn decompose_many(
    delta_hat: &DeltaFn,
    delta_bench: &DeltaFn,
    paths: &PathMatrix,
    stride: usize,
    r: f64,
    w0: &(dyn Fn(f64) -> f64 + Sync),
    payoff: &(dyn Fn(f64) -> f64 + Sync),
) -> Result<Vec<HedgeOutcome>> {
    (0..paths.n_paths())
        .into_par_iter()
        .map(|i| {
            let p = paths.path(i);
            let mut o = decompose_error(delta_hat, delta_bench, p, &paths.times, stride, r, w0(p[0]), payoff)?;
            o.path_id = i;
            Ok(o)
        })
        .collect()
}

/// Moment proxies of the approximation error over forward-simulated
/// physical paths observed at the rebalance grid:
/// `μ_E = (μ − r) Σ_k Δt · mean[(Δ̂ − Δ) S]` and
/// `V_E = Σ_k Δt · mean[(Δ̂ − Δ)² σ² S²]`, summing over all but the last time.
pub fn empirical_moments(
    delta_hat: &DeltaFn,
    delta_bench: &DeltaFn,
    paths: &PathMatrix,
    sigma_fn: &(dyn Fn(f64, f64) -> f64 + Sync),
    mu: f64,
    r: f64,
) -> (f64, f64) {
    let times = &paths.times;
    let n = paths.n_paths() as f64;
    let per_path: Vec<(f64, f64)> = (0..paths.n_paths())
        .into_par_iter()
        .map(|i| {
            let p = paths.path(i);
            let mut m = 0.0;
            let mut v = 0.0;
            for k in 0..times.len() - 1 {
                let dt = times[k + 1] - times[k];
                let (t, s) = (times[k], p[k]);
                let e = delta_hat(t, s) - delta_bench(t, s);
                let sig = sigma_fn(t, s);
                m += dt * e * s;
                v += dt * e * e * sig * sig * s * s;
            }
            (m, v)
        })
        .collect();
    let (m, v) = per_path.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    ((mu - r) * m / n, v / n)
}

/// Outcome of a sticky hedge.
#[derive(Clone, Debug, PartialEq)]
pub struct StickyOutcome {
    pub outcome: HedgeOutcome,
    pub n_trades: usize,
    pub n_skipped: usize,
}

/// Rebalances only when the current position falls outside the credible
/// band of the Delta estimate at `level`; the first position is always taken.
pub fn sticky_hedge(
    delta_estimate_fn: &(dyn Fn(f64, f64) -> GreekEstimate<f64> + Sync),
    level: f64,
    path: &[f64],
    times: &[f64],
    r: f64,
    w0: f64,
    payoff: &dyn Fn(f64) -> f64,
) -> Result<StickyOutcome> {
    check_grid(path, times)?;
    let k = times.len() - 1;
    let mut positions = Vec::with_capacity(k);
    let mut trades = 0;
    for i in 0..k {
        let est = delta_estimate_fn(times[i], path[i]);
        let band = credible_band(&est, level)?;
        match positions.last() {
            Some(&held) if band.contains(held) => positions.push(held),
            _ => {
                positions.push(est.value);
                trades += 1;
            }
        }
    }
    let w = wealth(&positions, path, times, r, w0);
    Ok(StickyOutcome {
        outcome: HedgeOutcome {
            path_id: 0,
            terminal_wealth: w,
            total_error: w - payoff(path[k]),
            discretization_error: None,
            approx_error: None,
            benchmark_error: None,
            n_trades: trades,
        },
        n_trades: trades,
        n_skipped: k - trades,
    })
}

/// Mean, variance and standard deviation of one column.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnSummary {
    pub mean: f64,
    pub variance: f64,
    pub stdev: f64,
}

impl ColumnSummary {
    fn of(v: &[f64]) -> Option<Self> {
        if v.is_empty() {
            return None;
        }
        let variance = sample_variance(v);
        Some(Self {
            mean: mean(v),
            variance,
            stdev: variance.sqrt(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HedgeSummary {
    pub n_paths: usize,
    #[serde(rename = "W_T")]
    pub terminal_wealth: Option<ColumnSummary>,
    #[serde(rename = "E_T")]
    pub total_error: Option<ColumnSummary>,
    #[serde(rename = "E_d")]
    pub discretization_error: Option<ColumnSummary>,
    #[serde(rename = "E_hat")]
    pub approx_error: Option<ColumnSummary>,
    #[serde(rename = "E_bench")]
    pub benchmark_error: Option<ColumnSummary>,
    /// Mean of `max(−E_T, 0)`.
    pub l1_loss: f64,
}

pub fn summarize(outcomes: &[HedgeOutcome]) -> HedgeSummary {
    let col = |f: &dyn Fn(&HedgeOutcome) -> Option<f64>| -> Option<ColumnSummary> {
        let v: Option<Vec<f64>> = outcomes.iter().map(f).collect();
        v.and_then(|v| ColumnSummary::of(&v))
    };
    HedgeSummary {
        n_paths: outcomes.len(),
        terminal_wealth: col(&|o| Some(o.terminal_wealth)),
        total_error: col(&|o| Some(o.total_error)),
        discretization_error: col(&|o| o.discretization_error),
        approx_error: col(&|o| o.approx_error),
        benchmark_error: col(&|o| o.benchmark_error),
        l1_loss: mean(&outcomes.iter().map(|o| (-o.total_error).max(0.0)).collect::<Vec<_>>()),
    }
}

pub fn write_outcomes_csv(path: &Path, outcomes: &[HedgeOutcome]) -> Result<()> {
    write_csv(path, outcomes)
}
