use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{GpModel, NoiseModel, TrainingSet, TrendSpec};
use crate::error::{Error, Result};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::optim::{nelder_mead, scrambled_halton_starts, NelderMeadConfig};
use crate::scalar::Scalar;

/// Which noise model the fit uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseSpec {
    /// Constant `σ_ε²`, estimated by maximum likelihood.
    EstimatedConstant,
    /// Per-point variances taken from the training set.
    PluginHeteroskedastic,
}

/// Box constraints on the hyperparameters (natural units).
#[derive(Clone, Debug, PartialEq)]
pub struct HyperBounds {
    pub lengthscale: Vec<(f64, f64)>,
    pub process_variance: (f64, f64),
    pub noise_variance: (f64, f64),
    /// Variance floor added to every plug-in noise entry.
    pub nugget: f64,
}

#[derive(Clone, Debug)]
pub struct FitConfig {
    pub restarts: usize,
    pub seed: u64,
    /// Evaluation budget of each restart before the best one is polished.
    pub restart_evals: usize,
    pub nelder_mead: NelderMeadConfig,
    /// Overrides the data-driven bounds.
    pub bounds: Option<HyperBounds>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            restarts: 10,
            seed: 0,
            restart_evals: 80,
            nelder_mead: NelderMeadConfig::default(),
            bounds: None,
        }
    }
}

impl FitConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }
}

fn variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n
}

/// Scale-free default bounds: lengthscales in `[10⁻², 10]` times each
/// coordinate's range, `σ_p² ∈ [10⁻⁴, 10⁴]·var(y)`, `σ_ε² ∈ [10⁻⁸, 1]·var(y)`,
/// where `y` are the outputs net of any reference price. A constant output
/// vector uses a unit scale.
pub fn hyperparameter_bounds<T: Scalar>(ts: &TrainingSet<T>, trend: &TrendSpec) -> HyperBounds {
    let d = ts.dim();
    let lengthscale = (0..d)
        .map(|k| {
            let col: Vec<f64> = (0..ts.len()).map(|i| ts.inputs[(i, k)].as_f64()).collect();
            let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let range = if hi > lo { hi - lo } else { 1.0 };
            (1e-2 * range, 10.0 * range)
        })
        .collect();
    let y: Vec<f64> = (0..ts.len())
        .map(|i| (ts.outputs[i] - trend.reference(ts.convention, ts.inputs.row(i))).as_f64())
        .collect();
    let v = variance(&y);
    let scale = if v > 0.0 && v.is_finite() { v } else { 1.0 };
    HyperBounds {
        lengthscale,
        process_variance: (1e-4 * scale, 1e4 * scale),
        noise_variance: (1e-8 * scale, scale),
        nugget: 1e-8 * scale,
    }
}

struct Transform {
    lo: Vec<f64>,
    width: Vec<f64>,
}

impl Transform {
    fn new(b: &HyperBounds, with_noise: bool) -> Self {
        let mut pairs = b.lengthscale.clone();
        pairs.push(b.process_variance);
        if with_noise {
            pairs.push(b.noise_variance);
        }
        Self {
            lo: pairs.iter().map(|p| p.0.ln()).collect(),
            width: pairs.iter().map(|p| p.1.ln() - p.0.ln()).collect(),
        }
    }

    fn natural<T: Scalar>(&self, u: &[T]) -> Vec<T> {
        u.iter()
            .enumerate()
            .map(|(k, &v)| T::lit((self.lo[k] + v.as_f64() * self.width[k]).exp()))
            .collect()
    }
}

fn validate_bounds(b: &HyperBounds, d: usize) -> Result<()> {
    let ok = |(lo, hi): (f64, f64)| lo > 0.0 && hi >= lo && hi.is_finite();
    if b.lengthscale.len() != d
        || !b.lengthscale.iter().all(|&p| ok(p))
        || !ok(b.process_variance)
        || !ok(b.noise_variance)
        || !(b.nugget >= 0.0)
    {
        return Err(Error::invalid("hyperparameter bounds must be positive, ordered and one per coordinate"));
    }
    Ok(())
}

/// Maximum-likelihood fit: multi-start Nelder–Mead over the log
/// hyperparameters inside the bound box, trend coefficients profiled by GLS.
pub fn fit<T: Scalar>(
    ts: TrainingSet<T>,
    family: KernelFamily,
    trend: TrendSpec,
    noise: NoiseSpec,
    cfg: &FitConfig,
) -> Result<GpModel<T>> {
    let d = ts.dim();
    let p = trend.n_coefficients();
    if ts.len() < p + 1 {
        return Err(Error::invalid(format!(
            "{} training points are too few for {p} trend coefficients",
            ts.len()
        )));
    }
    if ts.dim() < trend.min_dim() {
        return Err(Error::invalid("trend needs a price coordinate"));
    }
    if noise == NoiseSpec::PluginHeteroskedastic && ts.noise_variances.is_none() {
        return Err(Error::invalid("plug-in noise needs per-point variances"));
    }
    let bounds = match &cfg.bounds {
        Some(b) => b.clone(),
        None => hyperparameter_bounds(&ts, &trend),
    };
    validate_bounds(&bounds, d)?;
    if cfg.restarts == 0 {
        return Err(Error::invalid("at least one restart is required"));
    }

    let with_noise = noise == NoiseSpec::EstimatedConstant;
    let tf = Transform::new(&bounds, with_noise);
    let nugget = T::lit(bounds.nugget);
    let build = |u: &[T]| -> Result<GpModel<T>> {
        let theta = tf.natural(u);
        let kernel = KernelSpec::new(family, theta[..d].to_vec(), theta[d])?;
        let noise_model = if with_noise {
            NoiseModel::Constant { variance: theta[d + 1] }
        } else {
            NoiseModel::Plugin { floor: nugget }
        };
        GpModel::condition(ts.clone(), kernel, trend, noise_model)
    };
    let objective = |u: &[T]| match build(u) {
        Ok(m) => -m.log_likelihood,
        Err(_) => T::infinity(),
    };

    let dim = tf.lo.len();
    let starts: Vec<Vec<T>> = scrambled_halton_starts(cfg.restarts, dim, cfg.seed);
    let short = NelderMeadConfig {
        max_evals: cfg.restart_evals.min(cfg.nelder_mead.max_evals),
        ..cfg.nelder_mead.clone()
    };
    let results: Vec<_> = starts
        .par_iter()
        .map(|x0| nelder_mead(objective, x0, &short))
        .collect();
    // ties resolve to the lowest restart index
    let best = results
        .into_iter()
        .filter(|m| m.value.is_finite())
        .reduce(|a, b| if b.value < a.value { b } else { a })
        .ok_or(Error::IllConditioned { jitter: crate::linalg::JITTER_LADDER[3] })?;
    let polished = nelder_mead(objective, &best.x, &cfg.nelder_mead);
    let x = if polished.value <= best.value { polished.x } else { best.x };
    build(&x)
}
