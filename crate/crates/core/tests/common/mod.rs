#![allow(dead_code)]

use gpgreeks::gp::{GpModel, NoiseModel, TimeConvention, TrainingSet, TrendSpec};
use gpgreeks::kernels::{KernelFamily, KernelSpec};
use gpgreeks::linalg::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A smooth test function of (t, S).
pub fn toy_price(t: f64, s: f64) -> f64 {
    (0.05 * s).sin() * (1.0 + t) + 0.01 * s * s
}

/// Random inputs in [0, 0.4] × [30, 70] with noisy toy outputs.
pub fn toy_training(n: usize, noise_sd: f64, seed: u64) -> TrainingSet<f64> {
    let mut r = rng(seed);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| vec![r.gen_range(0.0..0.4), r.gen_range(30.0..70.0)])
        .collect();
    let y: Vec<f64> = rows
        .iter()
        .map(|x| toy_price(x[0], x[1]) + noise_sd * r.gen_range(-1.0..1.0))
        .collect();
    let nv = vec![noise_sd * noise_sd / 3.0; n];
    TrainingSet::new(Matrix::from_rows(&rows).unwrap(), y, Some(nv), None).unwrap()
}

pub fn toy_model(family: KernelFamily, n: usize, noise: f64, seed: u64) -> GpModel<f64> {
    let ts = toy_training(n, 0.0, seed).with_convention(TimeConvention::Calendar);
    let k = KernelSpec::new(family, vec![0.3, 12.0], 4.0).unwrap();
    GpModel::condition(ts, k, TrendSpec::LinearInS, NoiseModel::Constant { variance: noise }).unwrap()
}

/// Dense inverse and log-determinant by Gauss–Jordan elimination with
/// partial pivoting.
pub fn inverse_logdet(a: &[Vec<f64>]) -> (Vec<Vec<f64>>, f64) {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    let mut logdet = 0.0;
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs())).unwrap();
        m.swap(c, p);
        let piv = m[c][c];
        logdet += piv.abs().ln();
        for v in m[c].iter_mut() {
            *v /= piv;
        }
        for r in 0..n {
            if r != c {
                let f = m[r][c];
                let pivot_row = m[c].clone();
                for (v, pv) in m[r].iter_mut().zip(pivot_row) {
                    *v -= f * pv;
                }
            }
        }
    }
    (m.into_iter().map(|r| r[n..].to_vec()).collect(), logdet)
}

pub fn mv(a: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    a.iter().map(|r| r.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
}

pub fn dotp(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub struct Oracle {
    pub kinv: Vec<Vec<f64>>,
    pub resid_w: Vec<f64>,
    pub beta: Vec<f64>,
    pub ll: f64,
}

pub fn basis(x: &[f64]) -> Vec<f64> {
    vec![1.0, x[1]]
}

/// Brute-force GLS posterior pieces for a linear-in-S trend.
pub fn oracle(xs: &[Vec<f64>], y: &[f64], k: &KernelSpec<f64>, noise: &[f64]) -> Oracle {
    let n = xs.len();
    let kmat: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| k.eval(&xs[i], &xs[j]).unwrap() + if i == j { noise[i] } else { 0.0 })
                .collect()
        })
        .collect();
    let (kinv, logdet) = inverse_logdet(&kmat);
    let h: Vec<Vec<f64>> = xs.iter().map(|x| basis(x)).collect();
    let p = 2;
    // (Hᵀ K⁻¹ H) β = Hᵀ K⁻¹ y
    let kinv_y = mv(&kinv, y);
    let kinv_h: Vec<Vec<f64>> = (0..p)
        .map(|a| mv(&kinv, &h.iter().map(|r| r[a]).collect::<Vec<_>>()))
        .collect();
    let a: Vec<Vec<f64>> = (0..p)
        .map(|i| (0..p).map(|j| dotp(&h.iter().map(|r| r[i]).collect::<Vec<_>>(), &kinv_h[j])).collect())
        .collect();
    let b: Vec<f64> = (0..p).map(|i| dotp(&h.iter().map(|r| r[i]).collect::<Vec<_>>(), &kinv_y)).collect();
    let (ainv, _) = inverse_logdet(&a);
    let beta = mv(&ainv, &b);
    let resid: Vec<f64> = (0..n).map(|i| y[i] - dotp(&h[i], &beta)).collect();
    let resid_w = mv(&kinv, &resid);
    let ll = -0.5 * dotp(&resid, &resid_w) - 0.5 * logdet - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
    Oracle {
        kinv,
        resid_w,
        beta,
        ll,
    }
}
