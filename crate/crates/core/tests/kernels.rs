mod common;

use gpgreeks::kernels::{KernelFamily, KernelSpec};
use gpgreeks::linalg::{cholesky_in_place, Matrix};
use rand::Rng;

fn random_pair(r: &mut impl Rng) -> (Vec<f64>, Vec<f64>) {
    let x = vec![r.gen_range(-0.5..0.5), r.gen_range(30.0..70.0)];
    let x2 = vec![r.gen_range(-0.5..0.5), r.gen_range(30.0..70.0)];
    (x, x2)
}

#[test]
fn first_derivative_matches_central_difference() {
    let mut r = common::rng(11);
    for family in KernelFamily::ALL {
        let k = KernelSpec::new(family, vec![0.25, 9.0], 2.5).unwrap();
        for _ in 0..100 {
            let (x, x2) = random_pair(&mut r);
            for j in 0..2 {
                let h = 1e-5 * k.lengthscales()[j];
                let mut up = x.clone();
                let mut dn = x.clone();
                up[j] += h;
                dn[j] -= h;
                let fd = (k.eval(&up, &x2).unwrap() - k.eval(&dn, &x2).unwrap()) / (2.0 * h);
                let an = k.grad(j, &x, &x2).unwrap();
                let scale = k.process_variance() / k.lengthscales()[j];
                assert!((fd - an).abs() < 1e-5 * scale, "{family:?} j={j}: {fd} vs {an}");
            }
        }
    }
}

#[test]
fn mixed_derivative_matches_central_difference() {
    let mut r = common::rng(12);
    for family in KernelFamily::ALL {
        let k = KernelSpec::new(family, vec![0.25, 9.0], 2.5).unwrap();
        let mut checked = 0;
        while checked < 100 {
            let (x, x2) = random_pair(&mut r);
            for j in 0..2 {
                let l = k.lengthscales()[j];
                // Matérn 3/2 has a kink in the first derivative at coincidence
                if family == KernelFamily::Matern32 && ((x[j] - x2[j]) / l).abs() < 1e-2 {
                    continue;
                }
                let h = 1e-5 * l;
                let mut up = x2.clone();
                let mut dn = x2.clone();
                up[j] += h;
                dn[j] -= h;
                let fd = (k.grad(j, &x, &up).unwrap() - k.grad(j, &x, &dn).unwrap()) / (2.0 * h);
                let an = k.cross_grad(j, &x, &x2).unwrap();
                assert!(!an.degraded);
                let scale = k.process_variance() / (l * l);
                assert!((fd - an.value).abs() < 1e-5 * scale, "{family:?} j={j}: {fd} vs {}", an.value);
            }
            checked += 1;
        }
    }
}

#[test]
fn symmetric_and_peaked_at_coincidence() {
    let mut r = common::rng(13);
    for family in KernelFamily::ALL {
        let k = KernelSpec::new(family, vec![0.3, 10.0], 1.7).unwrap();
        for _ in 0..50 {
            let (x, x2) = random_pair(&mut r);
            let a = k.eval(&x, &x2).unwrap();
            assert_eq!(a, k.eval(&x2, &x).unwrap());
            assert!(a > 0.0 && a <= 1.7);
            assert!((k.grad(1, &x, &x2).unwrap() + k.grad(1, &x2, &x).unwrap()).abs() < 1e-12);
        }
        assert!((k.eval(&[0.1, 40.0], &[0.1, 40.0]).unwrap() - 1.7).abs() < 1e-15);
        assert_eq!(k.grad(0, &[0.1, 40.0], &[0.1, 40.0]).unwrap(), 0.0);
    }
}

#[test]
fn prior_gradient_variance_equals_mixed_derivative_at_zero_lag() {
    for family in [KernelFamily::SquaredExponential, KernelFamily::Matern52] {
        let k = KernelSpec::new(family, vec![0.3f64, 10.0], 2.0).unwrap();
        let x = [0.2, 50.0];
        for j in 0..2 {
            let c = k.cross_grad(j, &x, &x).unwrap();
            assert!((c.value - k.grad_prior_variance(j).unwrap()).abs() < 1e-12);
            assert!(c.value > 0.0);
        }
    }
    let m32 = KernelSpec::new(KernelFamily::Matern32, vec![0.3, 10.0], 2.0).unwrap();
    assert!(m32.cross_grad(1, &[0.2, 50.0], &[0.2, 50.0]).unwrap().degraded);
    assert!(!KernelFamily::Matern32.twice_differentiable());
}

#[test]
fn gram_is_positive_definite() {
    let mut r = common::rng(14);
    let rows: Vec<Vec<f64>> = (0..40)
        .map(|_| vec![r.gen_range(0.0..0.4), r.gen_range(30.0..70.0)])
        .collect();
    let inputs = Matrix::from_rows(&rows).unwrap();
    for family in KernelFamily::ALL {
        let k = KernelSpec::new(family, vec![0.1, 5.0], 1.0).unwrap();
        let mut g = k.gram(&inputs);
        for i in 0..40 {
            for j in 0..40 {
                assert_eq!(g[(i, j)], g[(j, i)]);
            }
            g[(i, i)] += 1e-10;
        }
        assert!(cholesky_in_place(&mut g).is_ok(), "{family:?}");
    }
}

#[test]
fn rejects_bad_hyperparameters() {
    assert!(KernelSpec::new(KernelFamily::Matern52, vec![0.0, 1.0], 1.0).is_err());
    assert!(KernelSpec::new(KernelFamily::Matern52, vec![1.0, 1.0], -1.0).is_err());
    let k = KernelSpec::new(KernelFamily::Matern52, vec![1.0, 1.0], 1.0).unwrap();
    assert!(k.eval(&[0.0], &[0.0, 1.0]).is_err());
    assert!(k.grad(2, &[0.0, 1.0], &[0.0, 1.0]).is_err());
}

#[test]
fn single_precision_agrees_with_double() {
    let k64 = KernelSpec::new(KernelFamily::Matern52, vec![0.3, 10.0], 2.0).unwrap();
    let k32 = KernelSpec::new(KernelFamily::Matern52, vec![0.3f32, 10.0], 2.0).unwrap();
    let a = k64.cross_grad(1, &[0.1, 45.0], &[0.2, 52.0]).unwrap().value;
    let b = k32.cross_grad(1, &[0.1f32, 45.0], &[0.2, 52.0]).unwrap().value;
    assert!((a - b as f64).abs() < 1e-5 * a.abs().max(1e-3));
}
