//! Acceptance checks. Prints one PASS/FAIL line per criterion and always
//! exits successfully; the lines are the result.

mod common;

use std::path::PathBuf;
use std::time::{Duration, Instant};

use gpgreeks::designs::normal_starts;
use gpgreeks::experiment::{
    benchmark_for, implied_delta_pattern, preset, run_experiment, run_single, DesignKind, ExperimentConfig, GoldGrid,
    MetricsRow, Scale, Variant,
};
use gpgreeks::gp::{GpModel, NoiseModel, TrendSpec};
use gpgreeks::greeks::gradient_posterior;
use gpgreeks::hedging::decompose_many;
use gpgreeks::kernels::{KernelFamily, KernelSpec};
use gpgreeks::metrics::{median, TestGrid};
use gpgreeks::models::{bs_delta, bs_price, simulate_paths, time_grid, BsParams, LvParams, Measure};
use gpgreeks::rng::{streams, substream, StreamSeed};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

type Outcome = Result<String, String>;

fn cache_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("gold-cache")
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn run(cfg: &ExperimentConfig, variant: Option<&str>) -> MetricsRow {
    let bench = benchmark_for(cfg, &cache_dir()).expect("benchmark");
    run_single(cfg, &bench, variant).expect("run").metrics
}

fn kernel_derivatives() -> Outcome {
    let start = Instant::now();
    let mut r = common::rng(1);
    let mut worst: f64 = 0.0;
    for family in KernelFamily::ALL {
        let mut done = 0;
        while done < 100 {
            let ls = vec![r.gen_range(0.05..1.0), r.gen_range(2.0..30.0)];
            let k = KernelSpec::new(family, ls, r.gen_range(0.1..10.0)).unwrap();
            let x = vec![r.gen_range(0.0..0.4), r.gen_range(30.0..70.0)];
            let x2 = vec![r.gen_range(0.0..0.4), r.gen_range(30.0..70.0)];
            for j in 0..2 {
                let l = k.lengthscales()[j];
                let h = 1e-5 * l;
                let shift = |v: &[f64], d: f64| {
                    let mut w = v.to_vec();
                    w[j] += d;
                    w
                };
                let fd1 = (k.eval(&shift(&x, h), &x2).unwrap() - k.eval(&shift(&x, -h), &x2).unwrap()) / (2.0 * h);
                worst = worst.max((fd1 - k.grad(j, &x, &x2).unwrap()).abs());
                if family == KernelFamily::Matern32 && ((x[j] - x2[j]) / l).abs() < 1e-2 {
                    continue;
                }
                let fd2 = (k.grad(j, &x, &shift(&x2, h)).unwrap() - k.grad(j, &x, &shift(&x2, -h)).unwrap()) / (2.0 * h);
                worst = worst.max((fd2 - k.cross_grad(j, &x, &x2).unwrap().value).abs());
            }
            done += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(worst < 1e-5 && secs < 5.0, format!("max |FD − analytic| = {worst:.2e}, {secs:.2} s"))
}

fn oracle_equivalence() -> Outcome {
    let mut worst: f64 = 0.0;
    for family in KernelFamily::ALL {
        for (n, seed) in [(1, 10u64), (4, 11), (7, 12), (10, 13)] {
            let ts = common::toy_training(n, 0.05, seed);
            let xs: Vec<Vec<f64>> = (0..ts.len()).map(|i| ts.inputs.row(i).to_vec()).collect();
            let noise = vec![2e-3; xs.len()];
            let k = KernelSpec::new(family, vec![0.2, 15.0], 3.0).unwrap();
            let trend = if n == 1 { TrendSpec::Constant } else { TrendSpec::LinearInS };
            let m = GpModel::condition(ts.clone(), k.clone(), trend, NoiseModel::Constant { variance: 2e-3 }).unwrap();
            if n == 1 {
                let expected = -0.5 * (3.002f64).ln() - 0.5 * (2.0 * std::f64::consts::PI).ln();
                worst = worst.max((m.log_likelihood() - expected).abs());
                continue;
            }
            let o = common::oracle(&xs, &ts.outputs, &k, &noise);
            worst = worst.max((m.log_likelihood() - o.ll).abs() / (1.0 + o.ll.abs()));
            let sites = vec![vec![0.05, 41.0], vec![0.3, 55.5], vec![0.18, 63.0]];
            let cov = m.predict_cov(&sites).unwrap();
            for (a, xa) in sites.iter().enumerate() {
                let ka: Vec<f64> = xs.iter().map(|x| k.eval(xa, x).unwrap()).collect();
                let mean = common::dotp(&common::basis(xa), &o.beta) + common::dotp(&ka, &o.resid_w);
                worst = worst.max((m.predict(xa).unwrap().0 - mean).abs() / (1.0 + mean.abs()));
                for (b, xb) in sites.iter().enumerate() {
                    let kb: Vec<f64> = xs.iter().map(|x| k.eval(xb, x).unwrap()).collect();
                    let c = k.eval(xa, xb).unwrap() - common::dotp(&ka, &common::mv(&o.kinv, &kb));
                    worst = worst.max((cov[(a, b)] - c).abs());
                }
            }
        }
    }
    verdict(worst < 1e-10, format!("max discrepancy {worst:.2e}"))
}

fn gradient_consistency() -> Outcome {
    let mut r = common::rng(2);
    let mut worst: f64 = 0.0;
    let mut var_ok = true;
    for family in KernelFamily::ALL {
        let m = common::toy_model(family, 40, 1e-4, 3);
        for _ in 0..100 {
            let x = vec![r.gen_range(0.02..0.38), r.gen_range(32.0..68.0)];
            let h = 1e-5 * m.kernel().lengthscales()[1];
            let fd = (m.predict_mean(&[x[0], x[1] + h]).unwrap() - m.predict_mean(&[x[0], x[1] - h]).unwrap()) / (2.0 * h);
            let g = gradient_posterior(&m, 1, &x).unwrap();
            worst = worst.max((fd - g.value).abs());
            if family.twice_differentiable() {
                var_ok &= g.variance <= m.kernel().grad_prior_variance(1).unwrap() * (1.0 + 1e-12);
            }
        }
    }
    verdict(worst < 1e-4 && var_ok, format!("max |FD − mean| = {worst:.2e}, variance ≤ prior: {var_ok}"))
}

fn rank_one() -> Outcome {
    let mut r = common::rng(4);
    let mut online = common::toy_model(KernelFamily::Matern52, 40, 1e-3, 5);
    let mut ts = online.training_set().clone();
    for _ in 0..30 {
        let x = vec![r.gen_range(0.0..0.4), r.gen_range(30.0..70.0)];
        let y = common::toy_price(x[0], x[1]);
        online = online.update_rank1(&x, y, 0.0).unwrap();
        ts = ts.augmented(&x, y, 0.0, false).unwrap();
    }
    let refit = GpModel::condition(ts, online.kernel().clone(), *online.trend(), *online.noise()).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let x = [r.gen_range(0.0..0.4), r.gen_range(30.0..70.0)];
        let (a, va) = online.predict(&x).unwrap();
        let (b, vb) = refit.predict(&x).unwrap();
        worst = worst.max((a - b).abs()).max((va - vb).abs());
    }

    let big = common::toy_model(KernelFamily::Matern52, 500, 1e-3, 6);
    let x = [0.123, 51.7];
    let time = |f: &dyn Fn()| {
        let mut best = Duration::MAX;
        for _ in 0..5 {
            let t = Instant::now();
            f();
            best = best.min(t.elapsed());
        }
        best
    };
    let upd = time(&|| {
        std::hint::black_box(big.update_rank1(&x, 1.0, 0.0).unwrap());
    });
    let aug = big.training_set().augmented(&x, 1.0, 0.0, false).unwrap();
    let full = time(&|| {
        std::hint::black_box(GpModel::condition(aug.clone(), big.kernel().clone(), *big.trend(), *big.noise()).unwrap());
    });
    let speedup = full.as_secs_f64() / upd.as_secs_f64();
    verdict(
        worst < 1e-8 && speedup >= 5.0,
        format!("max discrepancy {worst:.2e}, speedup {speedup:.1}× at N = 500"),
    )
}

fn anchors() -> Outcome {
    let p = BsParams::case_study();
    let a = bs_delta(&p, 0.2, 55.0);
    let b = bs_delta(&p, 0.5, 55.0);
    verdict(
        (a - 0.8642).abs() <= 1e-4 && (b - 0.7936).abs() <= 1e-4,
        format!("Δ(0.2, 55) = {a:.5}, Δ(0.5, 55) = {b:.5}"),
    )
}

fn table1_base(seed: u64, kernel: KernelFamily, hedge: bool) -> ExperimentConfig {
    let mut c = preset("table1").unwrap();
    c.sweep = Default::default();
    c.seed = seed;
    c.model.kernel = kernel;
    c.hedge.enabled = hedge;
    c
}

fn table1(seed1_m52: &MetricsRow) -> Outcome {
    let start = Instant::now();
    let m = seed1_m52;
    let accuracy = (0.008..=0.033).contains(&m.rimse) && (0.88..=1.0).contains(&m.cvr95) && m.bias.abs() < 0.005;
    let mut ordered = 0;
    let mut cvrs = Vec::new();
    for seed in 1..=5u64 {
        let se = run(&table1_base(seed, KernelFamily::SquaredExponential, false), None).cvr95;
        let m52 = if seed == 1 { m.cvr95 } else { run(&table1_base(seed, KernelFamily::Matern52, false), None).cvr95 };
        let m32 = run(&table1_base(seed, KernelFamily::Matern32, false), None).cvr95;
        if se < m52 && m52 <= m32 {
            ordered += 1;
        }
        cvrs.push(format!("({se:.3}, {m52:.3}, {m32:.3})"));
    }
    verdict(
        accuracy && ordered >= 4,
        format!(
            "seed 1 M52: RIMSE {:.4}, Cvr {:.3}, bias {:.1e}; Cvr(SE, M52, M32) ordered in {ordered}/5 seeds {}; {:.0} s",
            m.rimse,
            m.cvr95,
            m.bias,
            cvrs.join(" "),
            start.elapsed().as_secs_f64()
        ),
    )
}

fn hedging_benchmark(m: &MetricsRow) -> Outcome {
    let (Some(bench), Some(var_et), Some(var_ed), Some(v_e), Some(mean_et), Some(mean_ed)) =
        (m.var_et_bench, m.var_et, m.var_ed, m.v_e, m.mean_et, m.mean_ed)
    else {
        return Err("hedging columns missing".into());
    };
    let gap = var_et - var_ed;
    let ok = (bench - 0.265).abs() <= 0.04 && (gap - v_e).abs() <= 0.5 * v_e && (mean_et - mean_ed).abs() < 0.01;
    verdict(
        ok,
        format!(
            "exact-Delta Var(E_T) {bench:.4}; M52 Var(E_T) − Var(E_d) = {gap:.4} vs V_E {v_e:.4}; |mean gap| {:.4}",
            (mean_et - mean_ed).abs()
        ),
    )
}

fn decomposition() -> Outcome {
    let p = BsParams::case_study();
    let n = 10_000;
    let starts = normal_starts(n, 50.0, 2.0, StreamSeed::new(11, streams::HEDGE_START));
    let paths = simulate_paths(
        &p,
        &starts,
        &time_grid(0.0, 0.4, 200),
        n,
        Measure::Physical,
        StreamSeed::new(11, streams::HEDGE_PATHS),
    );
    let sd = 0.05;
    let noise = |t: f64, s: f64| -> f64 {
        StandardNormal.sample(&mut substream(s.to_bits(), streams::SYNTHETIC_NOISE, t.to_bits()))
    };
    let bench = |t: f64, s: f64| bs_delta(&p, 0.4 - t, s);
    let hat = |t: f64, s: f64| bench(t, s) + sd * noise(t, s);
    let outs = decompose_many(&hat, &bench, &paths, 10, p.r, &|s| bs_price(&p, 0.4, s), &|s| (s - 50.0f64).max(0.0))
        .unwrap();
    let identity = outs
        .iter()
        .map(|o| (o.total_error - o.discretization_error.unwrap() - o.approx_error.unwrap()).abs())
        .fold(0.0, f64::max);
    let e_hat: Vec<f64> = outs.iter().map(|o| o.approx_error.unwrap()).collect();
    let e_d: Vec<f64> = outs.iter().map(|o| o.discretization_error.unwrap()).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (mh, md) = (mean(&e_hat), mean(&e_d));
    let var_hat = e_hat.iter().map(|x| (x - mh).powi(2)).sum::<f64>() / (n - 1) as f64;
    let var_d = e_d.iter().map(|x| (x - md).powi(2)).sum::<f64>() / (n - 1) as f64;
    let corr = e_hat.iter().zip(&e_d).map(|(a, b)| (a - mh) * (b - md)).sum::<f64>() / (n - 1) as f64
        / (var_hat * var_d).sqrt();
    let coarse = paths.subsample(10);
    let qv = coarse
        .iter()
        .map(|s| (0..20).map(|k| p.sigma * p.sigma * s[k] * s[k] * 0.02).sum::<f64>())
        .sum::<f64>()
        / n as f64;
    let ratio = var_hat / (sd * sd * qv);
    let ok = identity < 1e-10 && mh.abs() < 3.0 * (var_hat / n as f64).sqrt() && corr.abs() < 0.05 && (ratio - 1.0).abs() < 0.1;
    verdict(
        ok,
        format!("identity {identity:.1e}; mean Ê {mh:.4}; corr(E_d, Ê) {corr:.3}; Var(Ê)/(σ²E⟨S⟩) {ratio:.3}"),
    )
}

/// Rectangular grid of the LV test times before maturity and the LV test
/// prices with `|log S/K| ∈ [0.1, 0.3]`.
fn moneyness_band_grid() -> TestGrid {
    let full = TestGrid::local_vol();
    let times: Vec<f64> = full.times().into_iter().filter(|&t| t < 0.4).collect();
    let first = full.sites[0].0;
    let prices: Vec<f64> = full
        .sites
        .iter()
        .filter(|&&(t, s)| t == first && (0.1..=0.3).contains(&(s / 50.0f64).ln().abs()))
        .map(|&(_, s)| s)
        .collect();
    TestGrid::rectangular(&times, &prices)
}

fn local_vol() -> Outcome {
    let start = Instant::now();
    let mut t4 = preset("table4-lv").unwrap();
    t4.sweep = Default::default();
    t4.hedge.enabled = false;
    t4.model.kernel = KernelFamily::SquaredExponential;
    let se = run(&t4, None).cvr95;
    t4.model.kernel = KernelFamily::Matern52;
    let m52 = run(&t4, None).cvr95;

    let mut t7 = preset("table7-lv").unwrap();
    t7.hedge.enabled = false;
    let rimse = |v: Variant| run(&v.apply(&t7), Some(v.as_str())).rimse;
    let (m1, m2, m6) = (rimse(Variant::M1), rimse(Variant::M2), rimse(Variant::M6));

    let p = LvParams::default();
    let band = moneyness_band_grid();
    let (mut matching, mut eligible) = (0, 0);
    for seed in [t7.gold.seed, t7.gold.seed + 1, t7.gold.seed + 2] {
        let g = GoldGrid::cached(&p, &band, t7.gold.n_paths, seed, &cache_dir()).expect("gold grid");
        let (a, b) = implied_delta_pattern(&g);
        matching += a;
        eligible += b;
    }
    let pattern = 2 * matching > eligible;
    let ok = se < m52 && m2 >= 3.0 * m1 && m6 <= m1 && pattern;
    verdict(
        ok,
        format!(
            "Cvr SE {se:.3} < M52 {m52:.3}: {}; RIMSE M1 {m1:.4}, M2 {m2:.4} (≥3×: {}), M6 {m6:.4} (≤ M1: {}); \
             implied-Delta pattern at {matching}/{eligible} sites over 3 gold seeds; {:.0} s",
            se < m52,
            m2 >= 3.0 * m1,
            m6 <= m1,
            start.elapsed().as_secs_f64()
        ),
    )
}

fn design_size() -> Outcome {
    let start = Instant::now();
    let base = |n: usize, seed: u64, kind: DesignKind| {
        let mut c = preset("fig4-paths").unwrap();
        c.sweep = Default::default();
        c.hedge.enabled = false;
        c.seed = seed;
        c.design.n = n;
        c.design.kind = kind;
        c
    };
    let mut medians = Vec::new();
    for n in [80, 160, 320] {
        let r: Vec<f64> = (1..=3).map(|s| run(&base(n, s, DesignKind::Halton), None).rimse).collect();
        medians.push(median(&r));
    }
    let paths: Vec<f64> = (1..=3).map(|s| run(&base(320, s, DesignKind::Path), None).rimse).collect();
    let path_median = median(&paths);
    let monotone = medians.windows(2).all(|w| w[1] <= w[0]);
    let ratio = path_median / medians[2];
    verdict(
        monotone && ratio >= 1.5,
        format!(
            "median RIMSE N=80/160/320: {:.4}/{:.4}/{:.4}; paths at N=320 {path_median:.4} ({ratio:.2}× Halton); {:.0} s",
            medians[0],
            medians[1],
            medians[2],
            start.elapsed().as_secs_f64()
        ),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = preset("table1").unwrap().scaled(Scale::Fast);
    let a = run_experiment(&cfg, Some(&dir.path().join("a"))).unwrap();
    let b = run_experiment(&cfg, Some(&dir.path().join("b"))).unwrap();
    let ja = std::fs::read(a.dir.join("metrics.json")).unwrap();
    let jb = std::fs::read(b.dir.join("metrics.json")).unwrap();
    verdict(ja == jb, format!("table1 (fast) metrics.json: {} bytes, identical: {}", ja.len(), ja == jb))
}

fn main() {
    // optional comma-separated list of criterion numbers to run
    let only: Option<Vec<usize>> =
        std::env::var("ACCEPTANCE_ONLY").ok().map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());

    let seed1 = std::sync::OnceLock::new();
    let seed1 = || seed1.get_or_init(|| run(&table1_base(1, KernelFamily::Matern52, true), None)).clone();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("kernel derivatives", Box::new(kernel_derivatives)),
        ("GP oracle", Box::new(oracle_equivalence)),
        ("gradient posterior", Box::new(gradient_consistency)),
        ("rank-one update", Box::new(rank_one)),
        ("BS anchors", Box::new(anchors)),
        ("BS accuracy and kernel ordering", Box::new(|| table1(&seed1()))),
        ("hedging benchmark", Box::new(|| hedging_benchmark(&seed1()))),
        ("error decomposition", Box::new(decomposition)),
        ("LV orderings", Box::new(local_vol)),
        ("design size and shape", Box::new(design_size)),
        ("determinism", Box::new(determinism)),
    ];
    let (mut passed, mut ran) = (0, 0);
    for (i, (name, check)) in criteria.iter().enumerate() {
        if only.as_ref().is_some_and(|o| !o.contains(&(i + 1))) {
            continue;
        }
        ran += 1;
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(check))
            .unwrap_or_else(|e| {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                Err(format!("panicked: {msg}"))
            });
        match outcome {
            Ok(detail) => {
                passed += 1;
                println!("PASS {:>2} {name}: {detail}", i + 1);
            }
            Err(detail) => println!("FAIL {:>2} {name}: {detail}", i + 1),
        }
    }
    println!("{passed}/{ran} criteria passed");
}
