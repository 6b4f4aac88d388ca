use factor_order::simulate::child_seed;
use factor_order::{
    estimate_from_spectra, estimate_orders, estimate_orders_with_spectra, generate_panel,
    predict_outlier_counts, FactorStrength, ModelConfig, RmtContext, Sigma2Source, Warning,
};

fn small(k: usize, q: usize, seed: u64) -> ModelConfig {
    ModelConfig {
        n: 200,
        t: 250,
        k,
        q,
        tau_max: q + 2,
        seed,
        ..ModelConfig::default()
    }
}

#[test]
fn recovers_small_designs() {
    for (k, q) in [(1, 0), (1, 1), (2, 1), (1, 3)] {
        let cfg = small(k, q, child_seed(31, (k * 10 + q) as u64));
        let panel = generate_panel(&cfg).unwrap();
        for sigma2 in [Some(1.0), None] {
            let est = estimate_orders(&panel, cfg.tau_max, sigma2).unwrap();
            assert_eq!(
                (est.k_hat, est.q_hat),
                (Some(k), Some(q)),
                "k={k} q={q} sigma2={sigma2:?}: {est:?}"
            );
            assert_eq!(est.s0, k * (q + 1));
            assert!(est.warnings.is_empty(), "{:?}", est.warnings);
        }
    }
}

#[test]
fn counts_follow_forward_model() {
    let cfg = small(1, 2, 5);
    let est = estimate_orders(&generate_panel(&cfg).unwrap(), cfg.tau_max, Some(1.0)).unwrap();
    let ctx = RmtContext::unit(est.c).unwrap();
    let predicted: Vec<usize> =
        predict_outlier_counts(1, 2, cfg.tau_max, &ctx, &FactorStrength::Strong)
            .unwrap()
            .iter()
            .map(|p| p.total_count)
            .collect();
    let observed: Vec<usize> = est.counts.iter().map(|c| c.count).collect();
    assert_eq!(observed, predicted);
}

#[test]
fn decision_is_invariant_to_panel_scale() {
    let cfg = small(2, 1, 77);
    let panel = generate_panel(&cfg).unwrap();
    let base = estimate_orders(&panel, cfg.tau_max, None).unwrap();
    for s in [2.0, 0.5, 3.0, 0.1] {
        let scaled = estimate_orders(&panel.scaled(s).unwrap(), cfg.tau_max, None).unwrap();
        assert_eq!((scaled.k_hat, scaled.q_hat), (base.k_hat, base.q_hat));
        assert_eq!(scaled.counts, base.counts);
        let ratio = scaled.sigma2_hat / (s * s * base.sigma2_hat);
        assert!((ratio - 1.0).abs() < 1e-10, "s={s}: {ratio}");
        let b_ratio = scaled.thresholds.b_hat / (s * s * base.thresholds.b_hat);
        assert!((b_ratio - 1.0).abs() < 1e-10);
    }
}

#[test]
fn pure_noise_reports_no_factors() {
    let cfg = ModelConfig::pure_noise(200, 300, 3, 1.0, 4);
    let est = estimate_orders(&generate_panel(&cfg).unwrap(), 3, None).unwrap();
    assert_eq!((est.k_hat, est.q_hat), (Some(0), Some(0)));
    assert_eq!(est.s0, 0);
    assert!(est.warnings.contains(&Warning::NoFactors));
    assert!((est.sigma2_hat - 1.0).abs() < 0.05, "{}", est.sigma2_hat);
}

#[test]
fn short_scan_leaves_lag_order_unresolved() {
    let cfg = ModelConfig {
        tau_max: 2,
        ..small(1, 2, 9)
    };
    let est = estimate_orders(&generate_panel(&cfg).unwrap(), 2, Some(1.0)).unwrap();
    assert_eq!(est.s0, 3);
    assert_eq!(est.q_hat, None);
    assert_eq!(est.k_hat, None);
    assert!(est.warnings.iter().any(|w| matches!(
        w,
        Warning::IncreaseTauMax {
            tau_max: 2,
            target: 6
        }
    )));
}

#[test]
fn spectra_path_matches_panel_path() {
    let cfg = small(1, 1, 12);
    let panel = generate_panel(&cfg).unwrap();
    let (est, spectra) = estimate_orders_with_spectra(&panel, cfg.tau_max, None).unwrap();
    assert_eq!(spectra.len(), cfg.tau_max + 1);
    assert_eq!(estimate_from_spectra(&spectra, None).unwrap(), est);
    assert_eq!(estimate_orders(&panel, cfg.tau_max, None).unwrap(), est);
    assert_eq!(est.sigma2_source, Sigma2Source::Estimated);
    assert_eq!(est.t_used, panel.cols() - cfg.tau_max);
    let given = estimate_orders(&panel, cfg.tau_max, Some(1.0)).unwrap();
    assert_eq!(given.sigma2_source, Sigma2Source::Given);
    assert_eq!((given.sigma2_hat, given.noise_iterations), (1.0, 0));
}

#[test]
fn same_seed_same_estimate() {
    let cfg = small(1, 1, 3);
    let a = estimate_orders(&generate_panel(&cfg).unwrap(), cfg.tau_max, None).unwrap();
    let b = estimate_orders(&generate_panel(&cfg).unwrap(), cfg.tau_max, None).unwrap();
    assert_eq!(a, b);
}

#[test]
fn rejects_bad_arguments() {
    let panel = generate_panel(&small(1, 0, 1)).unwrap();
    assert!(estimate_orders(&panel, 0, None).is_err());
    assert!(estimate_orders(&panel, 2, Some(0.0)).is_err());
    assert!(estimate_orders(&panel, 2, Some(f64::NAN)).is_err());
    assert!(estimate_orders(&panel, panel.cols(), None).is_err());
}

#[test]
fn three_factor_one_lag_counts_at_n_600() {
    let cfg = ModelConfig {
        n: 600,
        t: 667,
        k: 3,
        q: 1,
        tau_max: 2,
        seed: 600,
        ..ModelConfig::default()
    };
    let est = estimate_orders(&generate_panel(&cfg).unwrap(), 2, Some(1.0)).unwrap();
    let observed: Vec<usize> = est.counts.iter().map(|c| c.count).collect();
    let ctx = RmtContext::unit(est.c).unwrap();
    let predicted: Vec<usize> = predict_outlier_counts(3, 1, 2, &ctx, &FactorStrength::Strong)
        .unwrap()
        .iter()
        .map(|p| p.total_count)
        .collect();
    assert_eq!(predicted, [6, 6, 12]);
    assert_eq!(observed, predicted);
    assert_eq!((est.k_hat, est.q_hat), (Some(3), Some(1)));
}
