//! Stationary covariance kernels (squared exponential, Matérn 5/2 and
//! Matérn 3/2) with analytic first derivatives and mixed second
//! derivatives.
//!
//! All three families are written as products of one-dimensional
//! correlation factors `f(u_k)` in the scaled distance `u_k = (x_k − x'_k)/ℓ_k`,
//! so that
//!
//! * `κ = σ_p² Π f(u_k)`
//! * `∂κ/∂x_j = σ_p² f'(u_j)/ℓ_j Π_{k≠j} f(u_k)`
//! * `∂²κ/∂x_j∂x'_j = −σ_p² f''(u_j)/ℓ_j² Π_{k≠j} f(u_k)`

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KernelFamily {
    #[serde(rename = "se")]
    SquaredExponential,
    #[serde(rename = "m52")]
    Matern52,
    #[serde(rename = "m32")]
    Matern32,
}

impl KernelFamily {
    pub const ALL: [KernelFamily; 3] = [
        KernelFamily::SquaredExponential,
        KernelFamily::Matern52,
        KernelFamily::Matern32,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            KernelFamily::SquaredExponential => "se",
            KernelFamily::Matern52 => "m52",
            KernelFamily::Matern32 => "m32",
        }
    }

    /// Whether the mixed second derivative exists everywhere.
    pub fn twice_differentiable(self) -> bool {
        !matches!(self, KernelFamily::Matern32)
    }

    #[inline]
    fn factor<T: Scalar>(self, u: T) -> T {
        let r = u.abs();
        match self {
            KernelFamily::SquaredExponential => (-T::lit(0.5) * u * u).exp(),
            KernelFamily::Matern52 => {
                let a = T::lit(5f64.sqrt());
                (T::one() + a * r + a * a * r * r / T::lit(3.0)) * (-a * r).exp()
            }
            KernelFamily::Matern32 => {
                let b = T::lit(3f64.sqrt());
                (T::one() + b * r) * (-b * r).exp()
            }
        }
    }

    #[inline]
    fn factor_d1<T: Scalar>(self, u: T) -> T {
        let r = u.abs();
        match self {
            KernelFamily::SquaredExponential => -u * (-T::lit(0.5) * u * u).exp(),
            KernelFamily::Matern52 => {
                let a = T::lit(5f64.sqrt());
                -(a * a / T::lit(3.0)) * u * (T::one() + a * r) * (-a * r).exp()
            }
            KernelFamily::Matern32 => {
                let b = T::lit(3f64.sqrt());
                -b * b * u * (-b * r).exp()
            }
        }
    }

    #[inline]
    fn factor_d2<T: Scalar>(self, u: T) -> T {
        let r = u.abs();
        match self {
            KernelFamily::SquaredExponential => (u * u - T::one()) * (-T::lit(0.5) * u * u).exp(),
            KernelFamily::Matern52 => {
                let a = T::lit(5f64.sqrt());
                -(a * a / T::lit(3.0)) * (T::one() + a * r - a * a * r * r) * (-a * r).exp()
            }
            KernelFamily::Matern32 => {
                let b = T::lit(3f64.sqrt());
                -b * b * (T::one() - b * r) * (-b * r).exp()
            }
        }
    }
}

impl std::str::FromStr for KernelFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "se" | "squared_exponential" | "gauss" => Ok(KernelFamily::SquaredExponential),
            "m52" | "matern52" | "matern5_2" => Ok(KernelFamily::Matern52),
            "m32" | "matern32" | "matern3_2" => Ok(KernelFamily::Matern32),
            other => Err(Error::invalid(format!("unknown kernel family `{other}`"))),
        }
    }
}

impl std::fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Kernel family with anisotropic lengthscales and process variance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct KernelSpec<T> {
    family: KernelFamily,
    lengthscales: Vec<T>,
    process_variance: T,
}

/// Mixed second derivative together with a flag raised when the value is a
/// one-sided limit (Matérn 3/2 at coincident coordinates).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrossGrad<T> {
    pub value: T,
    pub degraded: bool,
}

impl<T: Scalar> KernelSpec<T> {
    pub fn new(family: KernelFamily, lengthscales: Vec<T>, process_variance: T) -> Result<Self> {
        if lengthscales.is_empty() {
            return Err(Error::invalid("kernel needs at least one lengthscale"));
        }
        if lengthscales.iter().any(|&l| !(l > T::zero()) || !l.is_finite()) {
            return Err(Error::invalid("lengthscales must be finite and strictly positive"));
        }
        if !(process_variance > T::zero()) || !process_variance.is_finite() {
            return Err(Error::invalid("process variance must be finite and strictly positive"));
        }
        Ok(Self {
            family,
            lengthscales,
            process_variance,
        })
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn lengthscales(&self) -> &[T] {
        &self.lengthscales
    }

    pub fn process_variance(&self) -> T {
        self.process_variance
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    fn check_point(&self, x: &[T]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::invalid(format!(
                "input has dimension {}, kernel expects {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    fn check_coord(&self, j: usize) -> Result<()> {
        if j >= self.dim() {
            return Err(Error::invalid(format!(
                "coordinate {j} out of range for dimension {}",
                self.dim()
            )));
        }
        Ok(())
    }

    #[inline]
    fn scaled_diff(&self, x: &[T], x2: &[T], k: usize) -> T {
        x[k] / self.lengthscales[k] - x2[k] / self.lengthscales[k]
    }

    /// Product of the correlation factors over every coordinate except `skip`.
    #[inline]
    fn factor_product(&self, x: &[T], x2: &[T], skip: Option<usize>) -> T {
        let mut p = T::one();
        for k in 0..self.dim() {
            if Some(k) == skip {
                continue;
            }
            p *= self.family.factor(self.scaled_diff(x, x2, k));
        }
        p
    }

    /// κ(x, x2).
    pub fn eval(&self, x: &[T], x2: &[T]) -> Result<T> {
        self.check_point(x)?;
        self.check_point(x2)?;
        Ok(self.eval_unchecked(x, x2))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[T], x2: &[T]) -> T {
        self.process_variance * self.factor_product(x, x2, None)
    }

    /// ∂κ/∂x_j at (x, x2), differentiating in the first argument.
    pub fn grad(&self, j: usize, x: &[T], x2: &[T]) -> Result<T> {
        self.check_coord(j)?;
        self.check_point(x)?;
        self.check_point(x2)?;
        Ok(self.grad_unchecked(j, x, x2))
    }

    #[inline]
    pub(crate) fn grad_unchecked(&self, j: usize, x: &[T], x2: &[T]) -> T {
        let u = self.scaled_diff(x, x2, j);
        self.process_variance * self.family.factor_d1(u) / self.lengthscales[j]
            * self.factor_product(x, x2, Some(j))
    }

    /// Prior variance of the gradient process in coordinate `j`,
    /// i.e. ∂²κ/∂x_j∂x'_j at x = x'.
    pub fn grad_prior_variance(&self, j: usize) -> Result<T> {
        self.check_coord(j)?;
        let l = self.lengthscales[j];
        Ok(-self.process_variance * self.family.factor_d2(T::zero()) / (l * l))
    }

    /// ∂²κ/∂x_j∂x'_j at (x, x2).
    pub fn cross_grad(&self, j: usize, x: &[T], x2: &[T]) -> Result<CrossGrad<T>> {
        self.check_coord(j)?;
        self.check_point(x)?;
        self.check_point(x2)?;
        Ok(self.cross_grad_unchecked(j, x, x2))
    }

    pub(crate) fn cross_grad_unchecked(&self, j: usize, x: &[T], x2: &[T]) -> CrossGrad<T> {
        let u = self.scaled_diff(x, x2, j);
        let l = self.lengthscales[j];
        let value = -self.process_variance * self.family.factor_d2(u) / (l * l)
            * self.factor_product(x, x2, Some(j));
        CrossGrad {
            value,
            degraded: self.family == KernelFamily::Matern32 && u == T::zero(),
        }
    }

    /// Gram matrix over the rows of `inputs`.
    pub fn gram(&self, inputs: &Matrix<T>) -> Matrix<T> {
        let n = inputs.rows();
        let mut k = Matrix::zeros(n, n);
        for i in 0..n {
            k[(i, i)] = self.process_variance;
            for j in 0..i {
                let v = self.eval_unchecked(inputs.row(i), inputs.row(j));
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        k
    }

    /// Vector κ(x, inputs_i).
    pub fn cross_cov(&self, x: &[T], inputs: &Matrix<T>) -> Vec<T> {
        (0..inputs.rows())
            .map(|i| self.eval_unchecked(x, inputs.row(i)))
            .collect()
    }

    /// Vector ∂κ/∂x_j(x, inputs_i).
    pub fn cross_grad_vec(&self, j: usize, x: &[T], inputs: &Matrix<T>) -> Vec<T> {
        (0..inputs.rows())
            .map(|i| self.grad_unchecked(j, x, inputs.row(i)))
            .collect()
    }

    /// Same kernel with new hyperparameters.
    pub fn with_hyperparameters(&self, lengthscales: Vec<T>, process_variance: T) -> Result<Self> {
        Self::new(self.family, lengthscales, process_variance)
    }
}
