//! Acceptance suite: one test per criterion, each printing a single
//! `criterion N (<name>): PASS` line (visible with `--nocapture`). A failure
//! panics with a matching FAIL line.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sesd::decompose::{bisquare, median_residual, stl_decompose, StlConfig};
use sesd::detect::{esd, esd_critical_value, grubbs_critical_value, s_esd, s_h_esd, three_sigma};
use sesd::eval::{contaminate_region, generate_seasonal, run_corpus, score, InjectionSpec};
use sesd::series::write_csv;
use sesd::stats::MAD_CONSISTENCY_SCALE;
use sesd::tdist::t_quantile;
use sesd::{Algorithm, DetectorConfig, Direction, TimeSeries};
use statrs::distribution::{ContinuousCDF, StudentsT};
use std::process::Command;
use std::time::{Duration, Instant};

fn standard_normal(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn check(criterion: &str, ok: bool, detail: String) {
    if ok {
        println!("{criterion}: PASS");
    } else {
        panic!("{criterion}: FAIL — {detail}");
    }
}

#[test]
fn criterion_1_statistic_oracles() {
    // t_quantile vs. an independent implementation, 1e-8 on a 20-point grid.
    let ps = [0.6, 0.75, 0.9, 0.975, 0.995];
    let dfs = [1.0, 2.0, 5.0, 30.0];
    let mut worst = 0.0f64;
    for &p in &ps {
        for &df in &dfs {
            let oracle = StudentsT::new(0.0, 1.0, df).unwrap().inverse_cdf(p);
            let got = t_quantile(p, df).unwrap();
            worst = worst.max((got - oracle).abs());
        }
    }
    let t_ok = worst < 1e-8;

    // Grubbs critical values vs. published two-sided tables at α = 0.05.
    let table = [(5usize, 1.715), (10, 2.290), (20, 2.709), (50, 3.128)];
    let mut grubbs_worst = 0.0f64;
    for (n, expect) in table {
        let got = grubbs_critical_value(n, 0.05).unwrap();
        grubbs_worst = grubbs_worst.max((got - expect).abs());
    }
    let grubbs_ok = grubbs_worst < 1e-3;

    // ESD λ_j vs. an independent evaluation of the formula, n = 54.
    let n = 54usize;
    let mut lambda_worst = 0.0f64;
    for j in 1..=10usize {
        let (nf, jf) = (n as f64, j as f64);
        let p = 1.0 - 0.05 / (2.0 * (nf - jf + 1.0));
        let t = StudentsT::new(0.0, 1.0, nf - jf - 1.0)
            .unwrap()
            .inverse_cdf(p);
        let oracle = (nf - jf) * t / (((nf - jf - 1.0 + t * t) * (nf - jf + 1.0)).sqrt());
        let got = esd_critical_value(n, j, 0.05).unwrap();
        lambda_worst = lambda_worst.max((got - oracle).abs());
    }
    let lambda_ok = lambda_worst < 1e-6;

    check(
        "criterion 1 (statistic oracles)",
        t_ok && grubbs_ok && lambda_ok,
        format!(
            "t_quantile err {worst:.2e}, grubbs err {grubbs_worst:.2e}, λ err {lambda_worst:.2e}"
        ),
    );
}

#[test]
fn criterion_2_calibration() {
    let trials = 500;
    let mut empty = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for _ in 0..trials {
        let v: Vec<f64> = (0..500).map(|_| standard_normal(&mut rng)).collect();
        let hits = esd(&v, 0.05, 50, false, MAD_CONSISTENCY_SCALE, Direction::Both).unwrap();
        if hits.is_empty() {
            empty += 1;
        }
    }
    check(
        "criterion 2 (calibration)",
        empty * 100 >= trials * 94,
        format!("{empty}/{trials} clean trials, need ≥ 94%"),
    );
}

#[test]
fn criterion_3_local_anomaly() {
    let period = 24;
    let trough = period * 6 + 18; // phase 18 of a sine: the nightly trough
    let mut successes = 0;
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values: Vec<f64> = (0..period * 14)
            .map(|t| {
                10.0 * (2.0 * std::f64::consts::PI * t as f64 / period as f64).sin()
                    + 0.1 * standard_normal(&mut rng)
            })
            .collect();
        values[trough] += 8.0; // toward zero: globally in range, locally huge
        let s = TimeSeries::from_values(values, 3600).with_period(period);
        let seasonal = s_esd(&s, &DetectorConfig::new(Algorithm::SEsd)).unwrap();
        let global = three_sigma(&s, &DetectorConfig::new(Algorithm::ThreeSigma)).unwrap();
        if seasonal.indices.contains(&trough) && !global.indices.contains(&trough) {
            successes += 1;
        }
    }
    check(
        "criterion 3 (local-anomaly detection)",
        successes >= 48,
        format!("{successes}/50 seeds, need ≥ 48"),
    );
}

#[test]
fn criterion_4_contamination_robustness() {
    let mut cfg_classic = DetectorConfig::new(Algorithm::SEsd);
    cfg_classic.max_anoms = 0.26;
    let mut cfg_hybrid = DetectorConfig::new(Algorithm::SHEsd);
    cfg_hybrid.max_anoms = 0.26;

    let seeds = 20u64;
    let (mut classic_sum, mut hybrid_sum) = (0.0, 0.0);
    for seed in 0..seeds {
        let base = generate_seasonal(24, 14, 10.0, 0.0, 1.0, 2, seed);
        let labeled = contaminate_region(&base, 0.30, 6.0, 1000 + seed);
        let truth = labeled.truth_indices();
        let in_region = |indices: &[usize]| {
            indices.iter().filter(|i| truth.contains(i)).count() as f64 / truth.len() as f64
        };
        classic_sum += in_region(&s_esd(&labeled.series, &cfg_classic).unwrap().indices);
        hybrid_sum += in_region(&s_h_esd(&labeled.series, &cfg_hybrid).unwrap().indices);
    }
    let classic = classic_sum / seeds as f64;
    let hybrid = hybrid_sum / seeds as f64;
    check(
        "criterion 4 (contamination robustness)",
        hybrid >= 0.85 && hybrid >= 3.0 * classic,
        format!("mean in-region recall: s-h-esd {hybrid:.3}, s-esd {classic:.3}"),
    );
}

#[test]
fn criterion_5_injection_corpus() {
    // Part 1: sparse 8–12σ single-point injections → high precision & recall.
    let corpus: Vec<(String, TimeSeries)> = (0..20u64)
        .map(|seed| {
            (
                format!("series-{seed}"),
                generate_seasonal(24, 28, 10.0, 0.002, 1.0, 1, seed),
            )
        })
        .collect();
    let detectors = vec![
        DetectorConfig::new(Algorithm::SEsd),
        DetectorConfig::new(Algorithm::SHEsd),
    ];
    let spec = InjectionSpec {
        count: 16,
        ..InjectionSpec::default()
    };
    let result = run_corpus(&corpus, &detectors, &spec, 3, 1.0, 0).unwrap();
    let mut sparse_ok = true;
    let mut sparse_detail = String::new();
    for agg in &result.aggregates {
        sparse_detail.push_str(&format!(
            "{}: precision {:.3} recall {:.3}; ",
            agg.detector, agg.metrics.precision, agg.metrics.recall
        ));
        if agg.metrics.precision < 0.95 || agg.metrics.recall < 0.90 {
            sparse_ok = false;
        }
    }

    // Part 2: 25–35% contiguous contamination → hybrid F1 beats classical.
    let mut cfg_classic = DetectorConfig::new(Algorithm::SEsd);
    cfg_classic.max_anoms = 0.26;
    let mut cfg_hybrid = DetectorConfig::new(Algorithm::SHEsd);
    cfg_hybrid.max_anoms = 0.26;
    let (mut f1_classic, mut f1_hybrid) = (0.0, 0.0);
    let runs = 20u64;
    for seed in 0..runs {
        let base = generate_seasonal(24, 14, 10.0, 0.0, 1.0, 2, 40 + seed);
        let fraction = 0.25 + 0.10 * (seed as f64 / (runs - 1) as f64);
        let labeled = contaminate_region(&base, fraction, 6.0, 2000 + seed);
        let truth = labeled.truth_indices();
        let n = labeled.series.len();
        let classic = s_esd(&labeled.series, &cfg_classic).unwrap();
        let hybrid = s_h_esd(&labeled.series, &cfg_hybrid).unwrap();
        f1_classic += score(&classic.indices, &truth, n, 1.0, 0).f_beta;
        f1_hybrid += score(&hybrid.indices, &truth, n, 1.0, 0).f_beta;
    }
    f1_classic /= runs as f64;
    f1_hybrid /= runs as f64;
    let contaminated_ok = f1_hybrid > f1_classic;

    check(
        "criterion 5 (injection corpus)",
        sparse_ok && contaminated_ok,
        format!(
            "{sparse_detail}contaminated mean F1: s-h-esd {f1_hybrid:.3} vs s-esd {f1_classic:.3}"
        ),
    );
}

#[test]
fn criterion_6_identities() {
    // Decomposition reconstruction, both variants.
    let series = generate_seasonal(24, 10, 10.0, 0.01, 0.5, 2, 3);
    let d = stl_decompose(&series, &StlConfig::new(24)).unwrap();
    let mut worst = 0.0f64;
    for i in 0..series.len() {
        let x = series.values()[i];
        worst = worst.max((x - (d.seasonal[i] + d.trend[i] + d.residual[i])).abs());
    }
    let m = median_residual(&series, &d).unwrap();
    let med = m.series_median;
    for i in 0..series.len() {
        let x = series.values()[i];
        worst = worst.max((x - (m.seasonal[i] + med + m.residual[i])).abs());
    }
    let recon_ok = worst < 1e-12;

    // Hand-computed score: tp=3, fp=1, fn=3 → P=0.75, R=0.5, F1=0.6.
    let metrics = score(&[1, 5, 9, 70], &[1, 5, 9, 20, 40, 60], 100, 1.0, 0);
    let score_ok = (metrics.tp, metrics.fp, metrics.fn_) == (3, 1, 3)
        && metrics.precision == 0.75
        && metrics.recall == 0.5
        && (metrics.f_beta - 0.6).abs() < 1e-15;

    // F_{β=0} is precision exactly.
    let beta0 = score(&[1, 5, 9, 70], &[1, 5, 9, 20, 40, 60], 100, 0.0, 0);
    let beta0_ok = beta0.f_beta == beta0.precision;

    // Bisquare endpoints.
    let bisquare_ok = bisquare(0.0) == 1.0 && bisquare(1.0) == 0.0;

    check(
        "criterion 6 (identities)",
        recon_ok && score_ok && beta0_ok && bisquare_ok,
        format!(
            "reconstruction err {worst:.2e}, score {:?}, F_0 {} vs P {}, bisquare ({}, {})",
            (metrics.precision, metrics.recall, metrics.f_beta),
            beta0.f_beta,
            beta0.precision,
            bisquare(0.0),
            bisquare(1.0)
        ),
    );
}

#[test]
fn criterion_7_invariance() {
    let algorithms = [
        Algorithm::ThreeSigma,
        Algorithm::Grubbs,
        Algorithm::Esd,
        Algorithm::SEsd,
        Algorithm::SHEsd,
    ];
    let mut equivariance_ok = true;
    let mut detail = String::new();
    for seed in 0..10u64 {
        let mut base = generate_seasonal(24, 10, 10.0, 0.0, 1.0, 2, 50 + seed);
        let mut values = base.values().to_vec();
        let n = values.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..4 {
            let i = rng.gen_range(0..n);
            values[i] += 15.0 * if rng.gen::<bool>() { 1.0 } else { -1.0 };
        }
        base = base.map_values(values.clone());
        let scaled = base.map_values(values.iter().map(|v| 3.7 * v + 250.0).collect());
        for algo in algorithms {
            let cfg = DetectorConfig::new(algo);
            let plain = cfg.run(&base).unwrap();
            let moved = cfg.run(&scaled).unwrap();
            if plain.indices != moved.indices {
                equivariance_ok = false;
                detail.push_str(&format!("seed {seed} {algo:?} not equivariant; "));
            }
        }
    }

    // α-monotonicity and the max_anoms cap.
    let mut alpha_ok = true;
    let mut cap_ok = true;
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let mut v: Vec<f64> = (0..300).map(|_| standard_normal(&mut rng)).collect();
        for k in 0..8 {
            v[k * 37] += 3.0 + k as f64;
        }
        let strict = esd(&v, 0.01, 30, false, MAD_CONSISTENCY_SCALE, Direction::Both).unwrap();
        let loose = esd(&v, 0.05, 30, false, MAD_CONSISTENCY_SCALE, Direction::Both).unwrap();
        let loose_set: std::collections::BTreeSet<usize> = loose.iter().map(|h| h.0).collect();
        if !strict.iter().all(|h| loose_set.contains(&h.0)) {
            alpha_ok = false;
        }
        let series = TimeSeries::from_values(v, 3600).with_period(24);
        for algo in algorithms {
            let mut cfg = DetectorConfig::new(algo);
            cfg.max_anoms = 0.05;
            let cap = (0.05 * series.len() as f64).ceil() as usize;
            let report = cfg.run(&series).unwrap();
            if report.indices.len() > cap {
                cap_ok = false;
                detail.push_str(&format!("{algo:?} exceeded cap; "));
            }
        }
    }

    // Byte-identical CLI reruns.
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("input.csv");
    write_csv(
        &generate_seasonal(24, 14, 10.0, 0.0, 1.0, 2, 77),
        None,
        &input,
    )
    .unwrap();
    let mut outputs = Vec::new();
    for tag in ["a", "b"] {
        let out = dir.path().join(format!("run-{tag}"));
        let status = Command::new(env!("CARGO_BIN_EXE_sesd"))
            .args(["detect", "--algo", "s-h-esd", "--period", "24", "--out"])
            .arg(&out)
            .arg(&input)
            .status()
            .unwrap();
        assert!(status.code() == Some(0) || status.code() == Some(2));
        outputs.push((
            std::fs::read(out.with_extension("csv")).unwrap(),
            std::fs::read(out.with_extension("json")).unwrap(),
        ));
    }
    let rerun_ok = outputs[0] == outputs[1];
    if !rerun_ok {
        detail.push_str("CLI reruns differ; ");
    }

    check(
        "criterion 7 (invariance suite)",
        equivariance_ok && alpha_ok && cap_ok && rerun_ok,
        format!("{detail}alpha_ok={alpha_ok} cap_ok={cap_ok}"),
    );
}

#[test]
fn criterion_8_performance() {
    // 4 weeks of minute data: 40,320 points, daily season of 1,440 samples.
    let period = 1440;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut values: Vec<f64> = (0..period * 28)
        .map(|t| {
            50.0 * (2.0 * std::f64::consts::PI * t as f64 / period as f64).sin()
                + standard_normal(&mut rng)
        })
        .collect();
    let n = values.len();
    for k in 1..6 {
        values[k * n / 7] += 12.0;
    }
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("minute.csv");
    write_csv(&TimeSeries::from_values(values, 60), None, &input).unwrap();

    let time_algo = |algo: &str| -> Duration {
        let mut best = Duration::MAX;
        for tag in 0..2 {
            let out = dir.path().join(format!("{algo}-{tag}"));
            let start = Instant::now();
            let status = Command::new(env!("CARGO_BIN_EXE_sesd"))
                .args([
                    "detect",
                    "--algo",
                    algo,
                    "--period",
                    "1440",
                    "--max-anoms",
                    "0.10",
                    "--out",
                ])
                .arg(&out)
                .arg(&input)
                .status()
                .unwrap();
            let elapsed = start.elapsed();
            assert!(status.code() == Some(0) || status.code() == Some(2));
            best = best.min(elapsed);
        }
        best
    };
    let hybrid = time_algo("s-h-esd");
    let classic = time_algo("s-esd");
    check(
        "criterion 8 (performance sanity)",
        hybrid < Duration::from_secs(5) && classic < hybrid,
        format!("s-h-esd {hybrid:?} (budget 5 s), s-esd {classic:?} (must be faster)"),
    );
}
