mod common;

use std::path::Path;

use common::{dim, ols};
use hyperuni_core::pointset::{
    fibonacci_sphere, load_pointset, maximize_distance_sum, random_rotation, random_uniform,
};
use hyperuni_core::structure::*;
use hyperuni_core::{Error, OptimizerOptions, PointSet};

fn designs(max_t: usize) -> PointSetSequence {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/designs");
    let members: Vec<PointSet> = (2..=max_t)
        .map(|t| load_pointset(dir.join(format!("design_t{t:02}_n{:04}.txt", (t + 1) * (t + 1)))).unwrap())
        .collect();
    PointSetSequence::new("designs", members).unwrap()
}

fn fibonacci(sizes: &[usize]) -> PointSetSequence {
    PointSetSequence::new("fibonacci", sizes.iter().map(|&n| fibonacci_sphere(n).unwrap()).collect()).unwrap()
}

const FIB_SIZES: [usize; 5] = [250, 500, 1000, 2000, 4000];

#[test]
fn sequence_validation() {
    assert!(matches!(PointSetSequence::new("x", vec![]), Err(Error::Sequence(_))));
    let a = random_uniform(dim(2), 10, 1).unwrap();
    let b = random_uniform(dim(3), 20, 1).unwrap();
    assert!(PointSetSequence::new("x", vec![a.clone(), b]).is_err());
    let c = random_uniform(dim(2), 10, 2).unwrap();
    assert!(PointSetSequence::new("x", vec![a.clone(), c]).is_err());
    let seq = PointSetSequence::new("x", vec![a, random_uniform(dim(2), 11, 2).unwrap()]).unwrap();
    assert_eq!(seq.sizes(), vec![10, 11]);
    assert_eq!(SequenceSource::family(&seq), "x");
    assert!(IidEnsemble::new(dim(2), vec![10, 20], 99, 0).is_err());
    assert!(IidExpectation::new(dim(2), vec![20, 10]).is_err());
}

#[test]
fn exact_iid_baseline_is_never_consistent() {
    let rules = VerdictRules::default();
    for (d, sizes) in [
        (1u32, vec![250, 500, 1000, 2000]),
        (2, vec![250, 500, 1000, 2000, 4000]),
        (3, vec![1000, 2000, 4000, 8000]),
    ] {
        let src = IidExpectation::new(dim(d), sizes).unwrap();
        let large = classify_large_caps(&src, &default_phi_grid(), &rules).unwrap();
        let small = classify_small_caps(&src, &WindowRule::default(), &rules).unwrap();
        let threshold = classify_threshold(&src, &default_t_grid(), &rules).unwrap();
        for r in [&large, &small, &threshold] {
            assert_eq!(r.verdict, Verdict::Inconsistent, "d={d} {:?}", r.regime);
        }
        for e in &large.exponents {
            assert!((e.slope - 1.0).abs() < 1e-12);
        }
        assert!((threshold.exponents[0].slope - d as f64).abs() < 0.25, "d={d}");
    }
}

#[test]
fn averaged_iid_ensemble_is_inconsistent() {
    let src = IidEnsemble::new(dim(2), vec![250, 500, 1000, 2000], 100, 3).unwrap();
    let rules = VerdictRules::default();
    let large = classify_large_caps(&src, &default_phi_grid(), &rules).unwrap();
    assert_eq!(large.verdict, Verdict::Inconsistent);
    for e in &large.exponents {
        assert!((e.slope - 1.0).abs() < 0.1, "{e:?}");
    }
    let small = classify_small_caps(&src, &WindowRule::default(), &rules).unwrap();
    assert_eq!(small.verdict, Verdict::Inconsistent);
}

#[test]
fn fibonacci_is_consistent_in_all_regimes() {
    let seq = fibonacci(&FIB_SIZES);
    let rules = VerdictRules::default();
    let large = classify_large_caps(&seq, &default_phi_grid(), &rules).unwrap();
    let small = classify_small_caps(&seq, &WindowRule::default(), &rules).unwrap();
    let threshold = classify_threshold(&seq, &default_t_grid(), &rules).unwrap();
    assert_eq!(large.verdict, Verdict::Consistent);
    assert_eq!(small.verdict, Verdict::Consistent);
    assert_eq!(threshold.verdict, Verdict::Consistent);
    let beta = threshold.exponents[0].slope;
    assert!((0.7..=1.3).contains(&beta), "beta {beta}");
    assert_eq!(large.table.len(), FIB_SIZES.len() * 8);
    assert_eq!(large.fit_points.len(), FIB_SIZES.len() * 8);
}

#[test]
fn large_cap_consistency_implies_weyl_decay() {
    let seq = fibonacci(&FIB_SIZES);
    let report = classify_large_caps(&seq, &default_phi_grid(), &VerdictRules::default()).unwrap();
    assert_eq!(report.verdict, Verdict::Consistent);
    let ln_n: Vec<f64> = FIB_SIZES.iter().map(|&n| (n as f64).ln()).collect();
    for n in 1..=5 {
        let sf = structure_factor(&seq, n).unwrap();
        // (1/N²) W_n = s_N(n) / N
        let y: Vec<f64> = sf
            .values
            .iter()
            .zip(&FIB_SIZES)
            .map(|(v, &size)| (v / size as f64).max(1e-300).ln())
            .collect();
        let (slope, _) = ols(&ln_n, &y);
        assert!(slope < 0.0, "n={n}: slope {slope}");
    }
}

#[test]
fn short_sequences_are_inconclusive() {
    let seq = fibonacci(&[250, 500, 1000]);
    let rules = VerdictRules::default();
    assert_eq!(classify_large_caps(&seq, &default_phi_grid(), &rules).unwrap().verdict, Verdict::Inconclusive);
    assert_eq!(classify_small_caps(&seq, &WindowRule::default(), &rules).unwrap().verdict, Verdict::Inconclusive);
    assert_eq!(classify_threshold(&seq, &default_t_grid(), &rules).unwrap().verdict, Verdict::Inconclusive);
    assert!(weyl_decay_exponent(&seq, 1).is_err());
    assert!(estimate_strength(&seq, &[1.5], &rules).is_err());
}

#[test]
fn invalid_windows_and_grids_are_rejected() {
    let seq = fibonacci(&[250, 500, 1000, 2000]);
    let rules = VerdictRules::default();
    let linear = WindowRule::Power {
        scale: 1.0,
        exponent: 1.0,
    };
    assert!(classify_small_caps(&seq, &linear, &rules).is_err());
    let shrinking = WindowRule::Power {
        scale: 4.0,
        exponent: -0.1,
    };
    assert!(classify_small_caps(&seq, &shrinking, &rules).is_err());
    assert!(classify_large_caps(&seq, &[0.2, 1.7], &rules).is_err());
    assert!(classify_large_caps(&seq, &[0.5, 0.4], &rules).is_err());
    assert!(classify_threshold(&seq, &[1.0, 80.0], &rules).is_err());
    assert!(classify_threshold(&seq, &[], &rules).is_err());
}

#[test]
fn single_t_grid_is_inconclusive() {
    let seq = fibonacci(&[250, 500, 1000, 2000]);
    let report = classify_threshold(&seq, &[2.0], &VerdictRules::default()).unwrap();
    assert_eq!(report.verdict, Verdict::Inconclusive);
    let report = classify_threshold(&seq, &[1.0, 2.0, 4.0, 8.0], &VerdictRules::default()).unwrap();
    assert_eq!(report.verdict, Verdict::Inconclusive);
    let report = classify_threshold(&seq, &default_t_grid(), &VerdictRules::default()).unwrap();
    assert_ne!(report.verdict, Verdict::Inconclusive);
}

#[test]
fn design_structure_factor_vanishes() {
    let seq = designs(12);
    for n in 1..=2 {
        let sf = structure_factor(&seq, n).unwrap();
        for (v, &size) in sf.values.iter().zip(&sf.sizes) {
            assert!(v.abs() <= 1e-8 * size as f64, "n={n}: {v}");
        }
        assert!(sf.limit.abs() < 1e-8);
    }
}

#[test]
fn iid_structure_factor_is_one() {
    let exact = IidExpectation::new(dim(2), vec![10, 20, 40]).unwrap();
    let sf = structure_factor(&exact, 3).unwrap();
    assert!(sf.values.iter().all(|&v| v == 1.0));
    assert_eq!(sf.limit, 1.0);
    let ens = IidEnsemble::new(dim(2), vec![50, 100, 200, 400], 100, 11).unwrap();
    for n in 1..=4 {
        let sf = structure_factor(&ens, n).unwrap();
        // Var((1/N) W_n) ≈ 2/Z(2,n) for one draw
        let se = (2.0 / (2.0 * n as f64 + 1.0) / 100.0).sqrt();
        for v in &sf.values {
            assert!((v - 1.0).abs() < 4.0 * se, "n={n}: {v}");
        }
    }
}

#[test]
fn single_member_structure_factor() {
    let x = random_uniform(dim(2), 100, 1).unwrap();
    let seq = PointSetSequence::new("one", vec![x.clone()]).unwrap();
    let sf = structure_factor(&seq, 2).unwrap();
    assert_eq!(sf.values.len(), 1);
    assert_eq!(sf.limit, sf.values[0]);
    assert_eq!(sf.limit_stderr, None);
    assert_eq!(sf.trend, Trend::Inconclusive);
}

#[test]
fn structure_factor_is_permutation_and_rotation_invariant() {
    let members: Vec<PointSet> = [40, 80, 160].iter().map(|&n| random_uniform(dim(3), n, n as u64).unwrap()).collect();
    let moved: Vec<PointSet> = members
        .iter()
        .enumerate()
        .map(|(k, x)| {
            let order: Vec<usize> = (0..x.len()).map(|i| (7 * i + k) % x.len()).collect();
            x.permuted(&order).unwrap().rotated(&random_rotation(dim(3), k as u64)).unwrap()
        })
        .collect();
    let a = PointSetSequence::new("a", members).unwrap();
    let b = PointSetSequence::new("b", moved).unwrap();
    for n in 1..=6 {
        let (sa, sb) = (structure_factor(&a, n).unwrap(), structure_factor(&b, n).unwrap());
        for (u, v) in sa.values.iter().zip(&sb.values) {
            assert!((u - v).abs() < 1e-10, "n={n}");
        }
    }
}

#[test]
fn iid_weyl_decay_has_unit_slope() {
    let exact = IidExpectation::new(dim(2), vec![100, 200, 400, 800]).unwrap();
    let w = weyl_decay_exponent(&exact, 3).unwrap();
    assert!((w.beta - 1.0).abs() < 1e-12);
    assert!((w.s_implied - 1.0).abs() < 1e-12);
    let ens = IidEnsemble::new(dim(2), vec![100, 200, 400, 800], 100, 5).unwrap();
    let w = weyl_decay_exponent(&ens, 1).unwrap();
    assert!((w.beta - 1.0).abs() < 0.15, "beta {}", w.beta);
}

#[test]
fn design_weyl_decay_is_floor_dominated() {
    let seq = designs(12);
    let w = weyl_decay_exponent(&seq, 2).unwrap();
    assert_eq!(w.clamped, w.sizes.len());
    assert!(w.floor_dominated());
}

#[test]
fn distance_maximizers_have_small_weyl_sums() {
    let opts = OptimizerOptions {
        restarts: 1,
        ..OptimizerOptions::default()
    };
    let members: Vec<PointSet> = [32, 64, 128, 256]
        .iter()
        .map(|&n| maximize_distance_sum(dim(2), n, 1.5, &opts).unwrap().best.points)
        .collect();
    let seq = PointSetSequence::new("maxdist", members).unwrap();
    for n in 1..=6 {
        let w = weyl_decay_exponent(&seq, n).unwrap();
        for (v, &size) in w.values.iter().zip(&w.sizes) {
            assert!(*v <= (size as f64).powf(0.7), "n={n} N={size}: {v}");
        }
    }
    // W_1 = |Σ x_i|² vanishes at a critical point of the distance sum
    assert!(weyl_decay_exponent(&seq, 1).unwrap().floor_dominated());
    let w6 = weyl_decay_exponent(&seq, 6).unwrap();
    assert_eq!(w6.clamped, 0);
    assert!(w6.beta <= 0.7, "beta {}", w6.beta);
}

#[test]
fn designs_have_qmc_strength_slopes() {
    let seq = designs(21);
    let table = estimate_strength(&seq, &[1.25, 1.5, 2.0], &VerdictRules::default()).unwrap();
    for row in &table.rows {
        assert!((row.slope - row.predicted).abs() <= 0.15, "s={}: {}", row.s, row.slope);
    }
    assert_eq!(table.rows[0].spec.rule.as_str(), "distance");
    assert_eq!(table.rows[2].spec.rule.as_str(), "power");
}

#[test]
fn iid_strength_is_monte_carlo_rate() {
    let exact = IidExpectation::new(dim(2), vec![100, 200, 400, 800]).unwrap();
    let table = estimate_strength(&exact, &[1.25, 1.5, 2.0, 3.0], &VerdictRules::default()).unwrap();
    for row in &table.rows {
        assert!((row.slope + 0.5).abs() < 1e-9, "s={}: {}", row.s, row.slope);
    }
    assert_eq!(table.s_star_hat, None);
    let ens = IidEnsemble::new(dim(2), vec![50, 100, 200, 400], 100, 8).unwrap();
    let table = estimate_strength(&ens, &[1.25, 1.5], &VerdictRules::default()).unwrap();
    for row in &table.rows {
        assert!((row.slope + 0.5).abs() < 0.05, "s={}: {}", row.s, row.slope);
    }
}

#[test]
fn single_s_grid_is_one_regression() {
    let seq = designs(9);
    let one = estimate_strength(&seq, &[1.5], &VerdictRules::default()).unwrap();
    let many = estimate_strength(&seq, &[1.25, 1.5, 2.0], &VerdictRules::default()).unwrap();
    assert_eq!(one.rows.len(), 1);
    assert_eq!(one.rows[0], many.rows[1]);
    assert!(estimate_strength(&seq, &[1.0], &VerdictRules::default()).is_err());
    assert!(estimate_strength(&seq, &[4.5], &VerdictRules::default()).is_err());
}

#[test]
fn weyl_sweep_tabulates_every_member() {
    let seq = designs(10);
    let rows = weyl_sweep(&seq, &[0.5, 1.0, 1.5], 1.0).unwrap();
    assert_eq!(rows.len(), 3 * seq.len());
    for r in &rows {
        assert!(r.max_degree >= 1 && r.argmax >= 1 && r.argmax <= r.max_degree);
        let n2 = (r.n_points * r.n_points) as f64;
        assert!((r.max_normalized - r.max_weyl / n2).abs() < 1e-15);
        let t = (r.n_points as f64).sqrt() as usize - 1;
        if r.max_degree <= t {
            assert!(r.max_normalized.abs() < 1e-8);
        }
    }
    assert!(weyl_sweep(&seq, &[0.0], 1.0).is_err());
}

#[test]
fn reports_are_deterministic_across_thread_counts() {
    let src = IidEnsemble::new(dim(2), vec![100, 200, 300, 400], 100, 21).unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| classify_large_caps(&src, &default_phi_grid(), &VerdictRules::default()).unwrap())
    };
    let a = run(1);
    let b = run(3);
    assert_eq!(a, b);
    let json = serde_json::to_value(&a).unwrap();
    for key in ["regime", "verdict", "exponents", "table", "config"] {
        assert!(json.get(key).is_some(), "{key}");
    }
    assert_eq!(json["regime"], "large");
    assert_eq!(json["config"]["source"]["replicas"], 100);
}
