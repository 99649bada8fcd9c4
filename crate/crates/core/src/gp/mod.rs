//! Gaussian process surrogates: conditioning, prediction, likelihood,
//! maximum-likelihood fitting and rank-one updates.

mod fit;
mod persist;
mod trend;

pub use fit::{fit, hyperparameter_bounds, FitConfig, HyperBounds, NoiseSpec};
pub use trend::{ReferencePrice, TrendSpec};

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::linalg::{
    cholesky_extend, cholesky_jittered, dot, solve_lower, solve_lower_transpose, solve_spd_small,
    symmetric_eigen, Matrix,
};
use crate::scalar::Scalar;

/// Index of the time-like input coordinate.
pub const TIME_COORD: usize = 0;
/// Index of the underlying-price coordinate.
pub const S_COORD: usize = 1;

/// How the first input coordinate measures time.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeConvention {
    /// Calendar time `t`.
    #[default]
    Calendar,
    /// Time to maturity `τ = T − t`.
    TimeToMaturity { maturity: f64 },
}

impl TimeConvention {
    pub fn to_calendar(&self, x0: f64) -> f64 {
        match *self {
            TimeConvention::Calendar => x0,
            TimeConvention::TimeToMaturity { maturity } => maturity - x0,
        }
    }

    pub fn from_calendar(&self, t: f64) -> f64 {
        // the map is an involution in both cases
        self.to_calendar(t)
    }

    /// dt_calendar / dx0.
    pub fn calendar_sign(&self) -> f64 {
        match self {
            TimeConvention::Calendar => 1.0,
            TimeConvention::TimeToMaturity { .. } => -1.0,
        }
    }
}

/// Observed training data. Identical input rows are merged on construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct TrainingSet<T> {
    pub inputs: Matrix<T>,
    pub outputs: Vec<T>,
    pub noise_variances: Option<Vec<T>>,
    pub virtual_flags: Vec<bool>,
    pub convention: TimeConvention,
}

impl<T: Scalar> TrainingSet<T> {
    /// Builds a training set. Rows with identical inputs are merged: their
    /// outputs are averaged and the averaged noise variance is divided by the
    /// multiplicity. A merged row is virtual only if all its parts are.
    pub fn new(
        inputs: Matrix<T>,
        outputs: Vec<T>,
        noise_variances: Option<Vec<T>>,
        virtual_flags: Option<Vec<bool>>,
    ) -> Result<Self> {
        let n = inputs.rows();
        if n == 0 {
            return Err(Error::invalid("training set is empty"));
        }
        if outputs.len() != n {
            return Err(Error::invalid("outputs length does not match inputs"));
        }
        if let Some(v) = &noise_variances {
            if v.len() != n {
                return Err(Error::invalid("noise variances length does not match inputs"));
            }
            if v.iter().any(|&s| !(s >= T::zero())) {
                return Err(Error::invalid("noise variances must be nonnegative"));
            }
        }
        let flags = virtual_flags.unwrap_or_else(|| vec![false; n]);
        if flags.len() != n {
            return Err(Error::invalid("virtual flags length does not match inputs"));
        }
        if inputs.as_slice().iter().chain(&outputs).any(|v| !v.is_finite()) {
            return Err(Error::invalid("training data must be finite"));
        }

        let mut index: HashMap<Vec<u64>, usize> = HashMap::with_capacity(n);
        let mut groups: Vec<Vec<usize>> = Vec::with_capacity(n);
        for i in 0..n {
            let key: Vec<u64> = inputs.row(i).iter().map(|v| (v.as_f64() + 0.0).to_bits()).collect();
            match index.get(&key) {
                Some(&g) => groups[g].push(i),
                None => {
                    index.insert(key, groups.len());
                    groups.push(vec![i]);
                }
            }
        }
        if groups.len() == n {
            return Ok(Self {
                inputs,
                outputs,
                noise_variances,
                virtual_flags: flags,
                convention: TimeConvention::Calendar,
            });
        }
        let d = inputs.cols();
        let mut rows = Vec::with_capacity(groups.len() * d);
        let mut ys = Vec::with_capacity(groups.len());
        let mut noise = noise_variances.as_ref().map(|_| Vec::with_capacity(groups.len()));
        let mut vf = Vec::with_capacity(groups.len());
        for g in &groups {
            let m = T::lit(g.len() as f64);
            rows.extend_from_slice(inputs.row(g[0]));
            ys.push(g.iter().map(|&i| outputs[i]).sum::<T>() / m);
            if let (Some(out), Some(src)) = (noise.as_mut(), noise_variances.as_ref()) {
                out.push(g.iter().map(|&i| src[i]).sum::<T>() / (m * m));
            }
            vf.push(g.iter().all(|&i| flags[i]));
        }
        Ok(Self {
            inputs: Matrix::from_vec(groups.len(), d, rows)?,
            outputs: ys,
            noise_variances: noise,
            virtual_flags: vf,
            convention: TimeConvention::Calendar,
        })
    }

    pub fn with_convention(mut self, convention: TimeConvention) -> Self {
        self.convention = convention;
        self
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs.cols()
    }

    /// Copy with one more observation (merged if `x` is already present).
    pub fn augmented(&self, x: &[T], y: T, noise: T, is_virtual: bool) -> Result<Self> {
        let n = self.len();
        let d = self.dim();
        let mut rows = self.inputs.as_slice().to_vec();
        rows.extend_from_slice(x);
        let mut ys = self.outputs.clone();
        ys.push(y);
        let noise_variances = self.noise_variances.as_ref().map(|v| {
            let mut v = v.clone();
            v.push(noise);
            v
        });
        let mut flags = self.virtual_flags.clone();
        flags.push(is_virtual);
        Ok(TrainingSet::new(Matrix::from_vec(n + 1, d, rows)?, ys, noise_variances, Some(flags))?
            .with_convention(self.convention))
    }
}

/// Resolved observation-noise model used on the covariance diagonal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub enum NoiseModel<T> {
    /// The same variance `σ_ε²` on every observation.
    Constant { variance: T },
    /// `floor + σ̂²_i` from the training set; virtual points get the floor only.
    Plugin { floor: T },
}

impl<T: Scalar> NoiseModel<T> {
    fn diagonal(&self, ts: &TrainingSet<T>) -> Result<Vec<T>> {
        match *self {
            NoiseModel::Constant { variance } => Ok(vec![variance; ts.len()]),
            NoiseModel::Plugin { floor } => {
                let v = ts
                    .noise_variances
                    .as_ref()
                    .ok_or_else(|| Error::invalid("plug-in noise needs per-point variances"))?;
                Ok(v.iter()
                    .zip(&ts.virtual_flags)
                    .map(|(&s, &virt)| if virt { floor } else { floor + s })
                    .collect())
            }
        }
    }

    fn entry(&self, noise: T, is_virtual: bool) -> T {
        match *self {
            NoiseModel::Constant { variance } => variance,
            NoiseModel::Plugin { floor } if is_virtual => floor,
            NoiseModel::Plugin { floor } => floor + noise,
        }
    }

    /// The constant noise variance, if this is the constant model.
    pub fn constant_variance(&self) -> Option<T> {
        match *self {
            NoiseModel::Constant { variance } => Some(variance),
            NoiseModel::Plugin { .. } => None,
        }
    }
}

static NEGATIVE_VARIANCE_CLAMPS: AtomicU64 = AtomicU64::new(0);

/// Number of posterior variances that round-off drove below zero and that
/// were clamped, since process start.
pub fn negative_variance_clamps() -> u64 {
    NEGATIVE_VARIANCE_CLAMPS.load(Ordering::Relaxed)
}

pub(crate) fn clamp_variance<T: Scalar>(v: T) -> T {
    if v < T::zero() {
        NEGATIVE_VARIANCE_CLAMPS.fetch_add(1, Ordering::Relaxed);
        T::zero()
    } else {
        v
    }
}

/// A conditioned Gaussian process.
#[derive(Clone, Debug)]
pub struct GpModel<T> {
    pub(crate) ts: TrainingSet<T>,
    pub(crate) kernel: KernelSpec<T>,
    pub(crate) trend: TrendSpec,
    pub(crate) noise: NoiseModel<T>,
    pub(crate) beta: Vec<T>,
    pub(crate) chol: Matrix<T>,
    pub(crate) alpha: Vec<T>,
    pub(crate) log_likelihood: T,
    pub(crate) jitter: T,
    // L⁻¹H and L⁻¹(y − reference), kept for O(N²) updates
    z: Matrix<T>,
    w: Vec<T>,
}

/// Generalised least squares on the whitened system; returns (β, residual).
fn gls<T: Scalar>(z: &Matrix<T>, w: &[T]) -> Result<(Vec<T>, Vec<T>)> {
    let n = z.rows();
    let p = z.cols();
    let mut ztz = Matrix::zeros(p, p);
    let mut ztw = vec![T::zero(); p];
    for i in 0..n {
        let zi = z.row(i);
        for a in 0..p {
            ztw[a] += zi[a] * w[i];
            for b in 0..p {
                ztz[(a, b)] += zi[a] * zi[b];
            }
        }
    }
    let beta = solve_spd_small(&ztz, &ztw)?;
    let r = (0..n).map(|i| w[i] - dot(z.row(i), &beta)).collect();
    Ok((beta, r))
}

fn log_likelihood_from<T: Scalar>(chol: &Matrix<T>, r: &[T]) -> T {
    let n = chol.rows();
    let logdet: T = (0..n).map(|i| chol[(i, i)].ln()).sum();
    let two_pi = T::lit(2.0 * std::f64::consts::PI);
    -T::lit(0.5) * dot(r, r) - logdet - T::lit(0.5 * n as f64) * two_pi.ln()
}

impl<T: Scalar> GpModel<T> {
    /// Conditions the process on `ts` with fixed hyperparameters: factors
    /// `K + Σ`, profiles the trend coefficients by GLS and caches `α`.
    pub fn condition(
        ts: TrainingSet<T>,
        kernel: KernelSpec<T>,
        trend: TrendSpec,
        noise: NoiseModel<T>,
    ) -> Result<Self> {
        if kernel.dim() != ts.dim() {
            return Err(Error::invalid(format!(
                "kernel dimension {} does not match input dimension {}",
                kernel.dim(),
                ts.dim()
            )));
        }
        if ts.dim() < trend.min_dim() {
            return Err(Error::invalid("trend needs a price coordinate"));
        }
        let n = ts.len();
        let mut k = kernel.gram(&ts.inputs);
        for (i, d) in noise.diagonal(&ts)?.into_iter().enumerate() {
            k[(i, i)] += d;
        }
        let (chol, jitter) = cholesky_jittered(&k)?;
        let centred: Vec<T> = (0..n)
            .map(|i| ts.outputs[i] - trend.reference(ts.convention, ts.inputs.row(i)))
            .collect();
        let w = solve_lower(&chol, &centred);
        let p = trend.n_coefficients();
        let mut z = Matrix::zeros(n, p);
        for a in 0..p {
            let col: Vec<T> = (0..n).map(|i| trend.basis(ts.inputs.row(i))[a]).collect();
            for (i, v) in solve_lower(&chol, &col).into_iter().enumerate() {
                z[(i, a)] = v;
            }
        }
        let (beta, r) = gls(&z, &w)?;
        let alpha = solve_lower_transpose(&chol, &r);
        let log_likelihood = log_likelihood_from(&chol, &r);
        Ok(Self {
            ts,
            kernel,
            trend,
            noise,
            beta,
            chol,
            alpha,
            log_likelihood,
            jitter,
            z,
            w,
        })
    }

    pub fn training_set(&self) -> &TrainingSet<T> {
        &self.ts
    }

    pub fn kernel(&self) -> &KernelSpec<T> {
        &self.kernel
    }

    pub fn trend(&self) -> &TrendSpec {
        &self.trend
    }

    pub fn noise(&self) -> &NoiseModel<T> {
        &self.noise
    }

    pub fn beta(&self) -> &[T] {
        &self.beta
    }

    pub fn chol_factor(&self) -> &Matrix<T> {
        &self.chol
    }

    pub fn alpha(&self) -> &[T] {
        &self.alpha
    }

    pub fn log_likelihood(&self) -> T {
        self.log_likelihood
    }

    /// Diagonal jitter that was needed to factor `K + Σ`.
    pub fn jitter(&self) -> T {
        self.jitter
    }

    pub fn convention(&self) -> TimeConvention {
        self.ts.convention
    }

    /// Prior mean `m(x)` including any reference price.
    pub fn trend_mean(&self, x: &[T]) -> T {
        self.trend.reference(self.ts.convention, x) + dot(&self.trend.basis(x), &self.beta)
    }

    /// ∂m/∂x_j.
    pub fn trend_grad(&self, j: usize, x: &[T]) -> T {
        self.trend.reference_grad(self.ts.convention, j, x) + dot(&self.trend.basis_grad(j), &self.beta)
    }

    fn check_site(&self, x: &[T]) -> Result<()> {
        if x.len() != self.ts.dim() {
            return Err(Error::invalid(format!(
                "site has dimension {}, model expects {}",
                x.len(),
                self.ts.dim()
            )));
        }
        Ok(())
    }

    /// Posterior mean and variance at `x`.
    pub fn predict(&self, x: &[T]) -> Result<(T, T)> {
        self.check_site(x)?;
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &[T]) -> (T, T) {
        let kx = self.kernel.cross_cov(x, &self.ts.inputs);
        let mean = self.trend_mean(x) + dot(&kx, &self.alpha);
        let v = solve_lower(&self.chol, &kx);
        let var = clamp_variance(self.kernel.process_variance() - dot(&v, &v));
        (mean, var)
    }

    /// Posterior means and variances at many sites, in parallel.
    pub fn predict_many(&self, xs: &[Vec<T>]) -> Result<Vec<(T, T)>> {
        for x in xs {
            self.check_site(x)?;
        }
        Ok(xs.par_iter().map(|x| self.predict_unchecked(x)).collect())
    }

    /// Posterior mean only (skips the triangular solve).
    pub fn predict_mean(&self, x: &[T]) -> Result<T> {
        self.check_site(x)?;
        let kx = self.kernel.cross_cov(x, &self.ts.inputs);
        Ok(self.trend_mean(x) + dot(&kx, &self.alpha))
    }

    /// Full posterior covariance over `xs`. Negative eigenvalues left by
    /// round-off are clamped to zero.
    pub fn predict_cov(&self, xs: &[Vec<T>]) -> Result<Matrix<T>> {
        if xs.is_empty() {
            return Err(Error::invalid("predict_cov needs at least one site"));
        }
        for x in xs {
            self.check_site(x)?;
        }
        let m = xs.len();
        let vs: Vec<Vec<T>> = xs
            .iter()
            .map(|x| solve_lower(&self.chol, &self.kernel.cross_cov(x, &self.ts.inputs)))
            .collect();
        let mut c = Matrix::zeros(m, m);
        for a in 0..m {
            for b in 0..=a {
                let v = self.kernel.eval_unchecked(&xs[a], &xs[b]) - dot(&vs[a], &vs[b]);
                c[(a, b)] = v;
                c[(b, a)] = v;
            }
        }
        let (vals, vecs) = symmetric_eigen(&c);
        if vals.iter().all(|&v| v >= T::zero()) {
            return Ok(c);
        }
        for &v in &vals {
            clamp_variance(v);
        }
        let mut out = Matrix::zeros(m, m);
        for (k, &lam) in vals.iter().enumerate() {
            let lam = lam.max(T::zero());
            if lam == T::zero() {
                continue;
            }
            for a in 0..m {
                for b in 0..m {
                    out[(a, b)] += lam * vecs[(a, k)] * vecs[(b, k)];
                }
            }
        }
        Ok(out)
    }

    /// Adds one observation with frozen hyperparameters. The Cholesky factor
    /// is extended by one row in O(N²); if `x_new` is already a training
    /// input the duplicate is merged and the model is conditioned afresh.
    /// `noise_new` is the observation's plug-in variance (the constant noise
    /// model ignores it).
    pub fn update_rank1(&self, x_new: &[T], y_new: T, noise_new: T) -> Result<Self> {
        self.check_site(x_new)?;
        if !y_new.is_finite() || !(noise_new >= T::zero()) {
            return Err(Error::invalid("update needs a finite output and nonnegative noise"));
        }
        let ts = self.ts.augmented(x_new, y_new, noise_new, false)?;
        if ts.len() == self.ts.len() {
            return Self::condition(ts, self.kernel.clone(), self.trend, self.noise);
        }
        let kx = self.kernel.cross_cov(x_new, &self.ts.inputs);
        let c = self.kernel.process_variance() + self.noise.entry(noise_new, false) + self.jitter;
        let chol = cholesky_extend(&self.chol, &kx, c)?;
        let n = self.ts.len();
        let l_row = &chol.row(n)[..n];
        let l_nn = chol[(n, n)];

        let centred = y_new - self.trend.reference(ts.convention, x_new);
        let w_new = (centred - dot(l_row, &self.w)) / l_nn;
        let mut w = self.w.clone();
        w.push(w_new);

        let p = self.z.cols();
        let h = self.trend.basis(x_new);
        let mut z = Matrix::zeros(n + 1, p);
        for i in 0..n {
            z.row_mut(i).copy_from_slice(self.z.row(i));
        }
        for a in 0..p {
            let col_dot: T = (0..n).map(|i| l_row[i] * self.z[(i, a)]).sum();
            z[(n, a)] = (h[a] - col_dot) / l_nn;
        }
        let (beta, r) = gls(&z, &w)?;
        let alpha = solve_lower_transpose(&chol, &r);
        let log_likelihood = log_likelihood_from(&chol, &r);
        Ok(Self {
            ts,
            kernel: self.kernel.clone(),
            trend: self.trend,
            noise: self.noise,
            beta,
            chol,
            alpha,
            log_likelihood,
            jitter: self.jitter,
            z,
            w,
        })
    }

    /// `L⁻¹ v` against the cached factor.
    pub(crate) fn whiten(&self, v: &[T]) -> Vec<T> {
        solve_lower(&self.chol, v)
    }
}

/// Profile log marginal likelihood of `ts` under the given hyperparameters,
/// with trend coefficients set by GLS.
pub fn log_marginal_likelihood<T: Scalar>(
    ts: &TrainingSet<T>,
    kernel: &KernelSpec<T>,
    trend: TrendSpec,
    noise: NoiseModel<T>,
) -> Result<T> {
    Ok(GpModel::condition(ts.clone(), kernel.clone(), trend, noise)?.log_likelihood)
}
