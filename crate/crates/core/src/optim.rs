//! Derivative-free minimisation on the unit box: Nelder–Mead with
//! projection onto `[0, 1]^p`, started from a randomly shifted Halton set.

use rand::Rng;

use crate::designs::radical_inverse;
use crate::rng::{substream, streams};
use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct NelderMeadConfig {
    pub max_evals: usize,
    /// Stop when the spread of simplex values falls below this.
    pub f_tol: f64,
    /// Stop when the simplex diameter (in unit-box coordinates) falls below this.
    pub x_tol: f64,
    pub initial_step: f64,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        Self {
            max_evals: 400,
            f_tol: 1e-7,
            x_tol: 1e-5,
            initial_step: 0.15,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Minimum<T> {
    pub x: Vec<T>,
    pub value: T,
    pub evals: usize,
}

fn project<T: Scalar>(x: &mut [T]) {
    for v in x.iter_mut() {
        *v = v.max(T::zero()).min(T::one());
    }
}

/// Minimises `f` over `[0, 1]^p` starting from `x0`. Non-finite objective
/// values are treated as `+∞`.
pub fn nelder_mead<T, F>(f: F, x0: &[T], cfg: &NelderMeadConfig) -> Minimum<T>
where
    T: Scalar,
    F: Fn(&[T]) -> T,
{
    let p = x0.len();
    let eval = |x: &[T]| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            T::infinity()
        }
    };
    let (alpha, gamma, rho, sigma) = (T::one(), T::lit(2.0), T::lit(0.5), T::lit(0.5));

    let mut simplex: Vec<Vec<T>> = Vec::with_capacity(p + 1);
    let mut start = x0.to_vec();
    project(&mut start);
    simplex.push(start.clone());
    for i in 0..p {
        let mut v = start.clone();
        let step = T::lit(cfg.initial_step);
        v[i] = if v[i] + step <= T::one() { v[i] + step } else { v[i] - step };
        simplex.push(v);
    }
    let mut values: Vec<T> = simplex.iter().map(|x| eval(x)).collect();
    let mut evals = p + 1;

    while evals < cfg.max_evals {
        let mut order: Vec<usize> = (0..=p).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(std::cmp::Ordering::Equal));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let best = values[0];
        let worst = values[p];
        let diameter = simplex[1..]
            .iter()
            .map(|v| {
                v.iter()
                    .zip(&simplex[0])
                    .map(|(a, b)| (*a - *b).abs())
                    .fold(T::zero(), T::max)
            })
            .fold(T::zero(), T::max);
        if best.is_finite()
            && (worst - best).abs() <= T::lit(cfg.f_tol) * (T::one() + best.abs())
            && diameter <= T::lit(cfg.x_tol)
        {
            break;
        }

        let mut centroid = vec![T::zero(); p];
        for v in &simplex[..p] {
            for (c, &x) in centroid.iter_mut().zip(v) {
                *c += x;
            }
        }
        for c in centroid.iter_mut() {
            *c /= T::lit(p as f64);
        }
        let along = |coef: T| -> Vec<T> {
            let mut x: Vec<T> = centroid
                .iter()
                .zip(&simplex[p])
                .map(|(&c, &w)| c + coef * (c - w))
                .collect();
            project(&mut x);
            x
        };

        let xr = along(alpha);
        let fr = eval(&xr);
        evals += 1;
        if fr < values[0] {
            let xe = along(gamma);
            let fe = eval(&xe);
            evals += 1;
            if fe < fr {
                simplex[p] = xe;
                values[p] = fe;
            } else {
                simplex[p] = xr;
                values[p] = fr;
            }
            continue;
        }
        if fr < values[p - 1] {
            simplex[p] = xr;
            values[p] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[p] {
            let x = along(rho);
            let v = eval(&x);
            (x, v)
        } else {
            let x = along(-rho);
            let v = eval(&x);
            (x, v)
        };
        evals += 1;
        if fc < values[p].min(fr) {
            simplex[p] = xc;
            values[p] = fc;
            continue;
        }
        // shrink towards the best vertex
        let best_x = simplex[0].clone();
        for i in 1..=p {
            for (v, &b) in simplex[i].iter_mut().zip(&best_x) {
                *v = b + sigma * (*v - b);
            }
            values[i] = eval(&simplex[i]);
            evals += 1;
        }
    }

    let (i_best, _) = values
        .iter()
        .enumerate()
        .fold((0, T::infinity()), |(bi, bv), (i, &v)| if v < bv { (i, v) } else { (bi, bv) });
    Minimum {
        x: simplex[i_best].clone(),
        value: values[i_best],
        evals,
    }
}

const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// `n` starting points in `[0, 1]^dim`: the Halton sequence with a random
/// Cranley–Patterson shift drawn from `seed`.
pub fn scrambled_halton_starts<T: Scalar>(n: usize, dim: usize, seed: u64) -> Vec<Vec<T>> {
    assert!(dim <= PRIMES.len(), "at most {} dimensions", PRIMES.len());
    let mut rng = substream(seed, streams::OPTIMIZER_STARTS, 0);
    let shift: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
    (1..=n as u64)
        .map(|i| {
            (0..dim)
                .map(|k| T::lit((radical_inverse(i, PRIMES[k]) + shift[k]).fract()))
                .collect()
        })
        .collect()
}
