//! Order estimation: thresholds, noise variance, outlier counts and the
//! `(k̂, q̂)` decision rule.
//!
//! Lag 0 counts eigenvalues of `Φ(0)` above the buffered MP edge,
//! `b̂ = (1+√c)²(1 + 2n^{−2/3}) σ²`; this estimates `k(q+1)`. Lags `τ ≥ 1`
//! count absolute eigenvalues above the buffered lag-τ edge
//! `d̂ = a(c)(1 + 0.1 n^{−1/3}) σ²`. The count first reaches `2k(q+1)` at
//! `τ = q + 1`.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::panel::{lag_spectra, Panel, Spectrum};
use crate::rmt::{RmtContext, C_ONE_WINDOW};

/// Iteration cap for the noise-variance fixed point.
pub const MAX_NOISE_ITERATIONS: usize = 100;

/// Eigenvalues at or below this fraction of the largest are treated as zero.
pub const ZERO_FLOOR: f64 = 1e-10;

fn lag0_buffer(n: usize) -> f64 {
    1.0 + 2.0 * (n as f64).powf(-2.0 / 3.0)
}

fn lag_pos_buffer(n: usize) -> f64 {
    1.0 + 0.1 * (n as f64).powf(-1.0 / 3.0)
}

/// `(1+√c)²(1 + 2n^{−2/3}) σ²`.
pub fn threshold_tau0(ctx: &RmtContext, n: usize) -> f64 {
    ctx.mp_edges().1 * lag0_buffer(n)
}

/// `a(c)(1 + 0.1 n^{−1/3}) σ²`.
pub fn threshold_tau_pos(ctx: &RmtContext, n: usize) -> f64 {
    ctx.lsd_support() * lag_pos_buffer(n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdSet {
    pub b_hat: f64,
    pub d_hat: f64,
    pub c: f64,
    pub n: usize,
    pub sigma2_used: f64,
}

impl ThresholdSet {
    pub fn new(ctx: &RmtContext, n: usize) -> Self {
        Self {
            b_hat: threshold_tau0(ctx, n),
            d_hat: threshold_tau_pos(ctx, n),
            c: ctx.c(),
            n,
            sigma2_used: ctx.sigma2(),
        }
    }
}

/// `#{λ > threshold}`, or `#{|λ| > threshold}` when `use_abs`.
pub fn count_outliers(spec: &Spectrum, threshold: f64, use_abs: bool) -> usize {
    if use_abs {
        spec.abs_sorted
            .iter()
            .take_while(|v| v.abs() > threshold)
            .count()
    } else {
        spec.eigenvalues
            .iter()
            .take_while(|&&v| v > threshold)
            .count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseVarianceEstimate {
    pub sigma2_hat: f64,
    /// Number of window updates performed.
    pub iterations: usize,
    /// False when the iteration cap was hit before a fixed point.
    pub converged: bool,
    /// Eigenvalues trimmed from each end for the initial estimate.
    pub trimmed: usize,
}

/// Noise variance from a lag-0 spectrum.
///
/// The initial estimate averages the positive eigenvalues after dropping the
/// `m` largest and `m` smallest, where `m` counts eigenvalues beyond the
/// upper edge predicted from the smallest positive eigenvalue. The estimate
/// is then refined by averaging the eigenvalues inside
/// `[(1−√c)² σ̂², (1+√c)²(1 + 2n^{−2/3}) σ̂²]` until the set of included
/// eigenvalues stops changing.
pub fn estimate_noise_variance(spec0: &Spectrum) -> Result<NoiseVarianceEstimate> {
    let c = spec0.c;
    if (c - 1.0).abs() < C_ONE_WINDOW {
        return Err(Error::AspectRatioOne);
    }
    let root_c = c.sqrt();
    let lower = (1.0 - root_c).powi(2);
    let upper = (1.0 + root_c).powi(2) * lag0_buffer(spec0.n);

    let asc = spec0.ascending();
    let floor = ZERO_FLOOR * spec0.largest_abs();
    let positive: Vec<f64> = asc.iter().copied().filter(|&v| v > floor).collect();
    let Some(&smallest) = positive.first() else {
        return Err(Error::EmptyWindow {
            lo: floor,
            hi: floor,
        });
    };

    let edge_guess = upper / lower * smallest;
    let m = positive.iter().filter(|&&v| v >= edge_guess).count();
    let kept = &positive[m.min(positive.len())..positive.len().saturating_sub(m)];
    if kept.is_empty() {
        return Err(Error::EmptyWindow {
            lo: smallest,
            hi: edge_guess,
        });
    }
    let mut sigma2 = mean(kept);

    let mut prev: Option<(usize, usize)> = None;
    let mut iterations = 0;
    let converged = loop {
        let (lo, hi) = (lower * sigma2, upper * sigma2);
        let start = asc.partition_point(|&v| v < lo);
        let end = asc.partition_point(|&v| v <= hi);
        if start >= end {
            return Err(Error::EmptyWindow { lo, hi });
        }
        if prev == Some((start, end)) {
            break true;
        }
        if iterations == MAX_NOISE_ITERATIONS {
            break false;
        }
        sigma2 = mean(&asc[start..end]);
        prev = Some((start, end));
        iterations += 1;
    };
    Ok(NoiseVarianceEstimate {
        sigma2_hat: sigma2,
        iterations,
        converged,
        trimmed: m,
    })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sigma2Source {
    Given,
    Estimated,
}

impl Sigma2Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Sigma2Source::Given => "given",
            Sigma2Source::Estimated => "estimated",
        }
    }
}

/// Non-fatal issues attached to an estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum Warning {
    /// No lag-0 outliers at all.
    NoFactors,
    /// The lag-0 count is not a multiple of the detected `q̂ + 1`.
    Divisibility {
        s0: usize,
        lags: usize,
        k_rounded: usize,
    },
    /// No lag reached twice the lag-0 count.
    IncreaseTauMax { tau_max: usize, target: usize },
    /// The noise-variance iteration hit its cap.
    NonConvergence { iterations: usize },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::NoFactors => write!(f, "NoFactors: no lag-0 eigenvalue exceeds the threshold"),
            Warning::Divisibility { s0, lags, k_rounded } => write!(
                f,
                "Divisibility: lag-0 count {s0} is not a multiple of q+1 = {lags}; k rounded to {k_rounded}"
            ),
            Warning::IncreaseTauMax { tau_max, target } => write!(
                f,
                "IncreaseTauMax: no lag up to {tau_max} reached {target} outliers; q is unresolved"
            ),
            Warning::NonConvergence { iterations } => write!(
                f,
                "NonConvergence: noise variance iteration stopped after {iterations} steps"
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LagCount {
    pub tau: usize,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderEstimate {
    /// `None` when `q̂` could not be resolved.
    pub k_hat: Option<usize>,
    pub q_hat: Option<usize>,
    /// Lag-0 outlier count.
    pub s0: usize,
    /// One entry per lag `0..=tau_max`.
    pub counts: Vec<LagCount>,
    pub sigma2_hat: f64,
    pub sigma2_source: Sigma2Source,
    /// Window updates used by the variance estimate (0 when given).
    pub noise_iterations: usize,
    pub thresholds: ThresholdSet,
    pub warnings: Vec<Warning>,
    pub n: usize,
    pub t_used: usize,
    pub c: f64,
}

/// Runs the decision rule on precomputed spectra for lags `0..=tau_max`.
pub fn estimate_from_spectra(spectra: &[Spectrum], sigma2: Option<f64>) -> Result<OrderEstimate> {
    let Some(spec0) = spectra.first() else {
        return Err(Error::EmptyInput);
    };
    if spectra.len() < 2 {
        return Err(Error::InvalidArgument(
            "at least one positive lag is required".into(),
        ));
    }
    for (tau, s) in spectra.iter().enumerate() {
        if s.tau != tau || s.n != spec0.n || s.t_used != spec0.t_used {
            return Err(Error::InvalidArgument(format!(
                "spectrum {tau} does not belong to the same lag scan"
            )));
        }
    }

    let mut warnings = Vec::new();
    let (sigma2_hat, sigma2_source, noise_iterations) = match sigma2 {
        Some(s) => (s, Sigma2Source::Given, 0),
        None => {
            let est = estimate_noise_variance(spec0)?;
            if !est.converged {
                warnings.push(Warning::NonConvergence {
                    iterations: est.iterations,
                });
            }
            (est.sigma2_hat, Sigma2Source::Estimated, est.iterations)
        }
    };
    let ctx = RmtContext::new(spec0.c, sigma2_hat)?;
    let thresholds = ThresholdSet::new(&ctx, spec0.n);

    let counts: Vec<LagCount> = spectra
        .iter()
        .map(|s| LagCount {
            tau: s.tau,
            count: if s.tau == 0 {
                count_outliers(s, thresholds.b_hat, false)
            } else {
                count_outliers(s, thresholds.d_hat, true)
            },
        })
        .collect();
    let s0 = counts[0].count;

    let (k_hat, q_hat) = if s0 == 0 {
        warnings.push(Warning::NoFactors);
        (Some(0), Some(0))
    } else {
        match counts[1..].iter().find(|lc| lc.count >= 2 * s0) {
            Some(lc) => {
                let lags = lc.tau;
                let k = if s0.is_multiple_of(lags) {
                    s0 / lags
                } else {
                    let k_rounded = (s0 as f64 / lags as f64).round() as usize;
                    warnings.push(Warning::Divisibility {
                        s0,
                        lags,
                        k_rounded,
                    });
                    k_rounded
                };
                (Some(k), Some(lags - 1))
            }
            None => {
                warnings.push(Warning::IncreaseTauMax {
                    tau_max: spectra.len() - 1,
                    target: 2 * s0,
                });
                (None, None)
            }
        }
    };

    Ok(OrderEstimate {
        k_hat,
        q_hat,
        s0,
        counts,
        sigma2_hat,
        sigma2_source,
        noise_iterations,
        thresholds,
        warnings,
        n: spec0.n,
        t_used: spec0.t_used,
        c: spec0.c,
    })
}

/// Full pipeline on a panel: spectra for lags `0..=tau_max` with the shared
/// `T = N − tau_max`, then [`estimate_from_spectra`].
pub fn estimate_orders(
    panel: &Panel,
    tau_max: usize,
    sigma2: Option<f64>,
) -> Result<OrderEstimate> {
    estimate_orders_with_spectra(panel, tau_max, sigma2).map(|(est, _)| est)
}

/// [`estimate_orders`], also returning the spectra it was computed from.
pub fn estimate_orders_with_spectra(
    panel: &Panel,
    tau_max: usize,
    sigma2: Option<f64>,
) -> Result<(OrderEstimate, Vec<Spectrum>)> {
    if tau_max == 0 {
        return Err(Error::InvalidArgument("tau_max must be at least 1".into()));
    }
    if let Some(s) = sigma2 {
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "noise variance must be positive, got {s}"
            )));
        }
    }
    if panel.cols() <= tau_max + 1 {
        return Err(Error::InsufficientColumns {
            needed: tau_max + 2,
            available: panel.cols(),
        });
    }
    let spectra = lag_spectra(panel, tau_max)?;
    let est = estimate_from_spectra(&spectra, sigma2)?;
    Ok((est, spectra))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const TOP_TAU0: [f64; 13] = [
        10031.2366, 534.5839, 473.1639, 458.2226, 435.2661, 392.6272, 3.6928, 3.5809, 3.5449,
        3.4579, 3.4312, 3.3829, 3.3701,
    ];
    const TOP_TAU1: [f64; 13] = [
        6227.5906, 363.7782, 325.8391, 305.6334, 13.1683, 11.1482, 9.0674, 7.9537, 1.7375, 1.7326,
        1.7015, 1.6957, 1.6751,
    ];
    const TOP_TAU2: [f64; 13] = [
        2865.1554, 258.4859, 224.9343, 214.9755, 45.7319, 17.8374, 11.7423, 8.0837, 1.7988, 1.7895,
        1.7388, 1.7242, 1.6724,
    ];
    const TOP_TAU3: [f64; 13] = [
        640.5761, 48.9667, 22.7478, 21.6373, 21.3150, 19.2596, 10.3580, 9.9668, 9.5028, 8.5483,
        5.5931, 3.5968, 1.8215,
    ];
    const TOP_TAU4: [f64; 13] = [
        155.9377, 46.5224, 46.0225, 45.6650, 25.4884, 18.0820, 15.5876, 12.9088, 10.5568, 4.7840,
        4.3896, 4.3843, 1.7944,
    ];
    const TOP_TAU5: [f64; 13] = [
        128.6870, 92.3756, 53.7072, 26.3564, 25.6006, 19.3930, 14.6107, 12.0980, 8.5791, 7.0596,
        4.5411, 3.6744, 1.7468,
    ];

    fn spec(v: &[f64], tau: usize) -> Spectrum {
        Spectrum::from_eigenvalues(v.to_vec(), tau, 500).unwrap()
    }

    #[test]
    fn threshold_examples() {
        let est = RmtContext::new(0.9, 0.9894).unwrap();
        assert_abs_diff_eq!(threshold_tau0(&est, 450), 3.8851, epsilon = 1e-3);
        assert_abs_diff_eq!(threshold_tau_pos(&est, 450), 1.8616, epsilon = 1e-3);
        let unit = RmtContext::unit(0.9).unwrap();
        assert_abs_diff_eq!(threshold_tau0(&unit, 450), 3.9267, epsilon = 1e-3);
        assert_abs_diff_eq!(threshold_tau_pos(&unit, 450), 1.8815, epsilon = 1e-3);
        assert_abs_diff_eq!(
            threshold_tau0(&unit, usize::MAX),
            unit.mp_edges().1,
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(
            threshold_tau_pos(&unit, usize::MAX),
            unit.lsd_support(),
            epsilon = 1e-6
        );
    }

    #[test]
    fn table_counts() {
        let b = RmtContext::unit(0.9).unwrap().mp_edges().1;
        let d = 1.8573;
        assert_eq!(count_outliers(&spec(&TOP_TAU0, 0), b, false), 6);
        let cols = [TOP_TAU1, TOP_TAU2, TOP_TAU3, TOP_TAU4, TOP_TAU5];
        let got: Vec<usize> = cols
            .iter()
            .enumerate()
            .map(|(i, col)| count_outliers(&spec(col, i + 1), d, true))
            .collect();
        assert_eq!(got, vec![8, 8, 12, 12, 12]);
        assert_eq!(count_outliers(&spec(&[1.0, 0.5], 0), 2.0, false), 0);
    }

    #[test]
    fn abs_counting_sees_negative_outliers() {
        let s = spec(&[3.0, 0.1, -2.5, -0.2], 1);
        assert_eq!(count_outliers(&s, 2.0, true), 2);
        assert_eq!(count_outliers(&s, 2.0, false), 1);
    }

    /// Quantiles of the MP law as a deterministic noise spectrum.
    fn mp_quantile_spectrum(n: usize, t: usize, sigma2: f64, spikes: &[f64]) -> Spectrum {
        let c = n as f64 / t as f64;
        let ctx = RmtContext::new(c, sigma2).unwrap();
        let (lo, hi) = ctx.mp_edges();
        let density = |x: f64| {
            ((hi - x) * (x - lo)).max(0.0).sqrt() / (2.0 * std::f64::consts::PI * c * x * sigma2)
        };
        let grid = 20_000;
        let h = (hi - lo) / grid as f64;
        let mut cdf = Vec::with_capacity(grid + 1);
        let mut acc = 0.0;
        cdf.push(0.0);
        for i in 0..grid {
            let x = lo + (i as f64 + 0.5) * h;
            acc += density(x) * h;
            cdf.push(acc);
        }
        let mut values: Vec<f64> = (0..n - spikes.len())
            .map(|i| {
                let p = (i as f64 + 0.5) / (n - spikes.len()) as f64 * acc;
                let j = cdf.partition_point(|&v| v < p).min(grid);
                lo + j as f64 * h
            })
            .collect();
        values.extend_from_slice(spikes);
        Spectrum::from_eigenvalues(values, 0, t).unwrap()
    }

    #[test]
    fn noise_variance_recovers_mp_scale() {
        let s = mp_quantile_spectrum(400, 500, 1.0, &[]);
        let est = estimate_noise_variance(&s).unwrap();
        assert!(est.converged);
        assert!((est.sigma2_hat - 1.0).abs() < 0.03, "{}", est.sigma2_hat);

        let s = mp_quantile_spectrum(450, 500, 1.0, &[400.0, 300.0, 250.0, 200.0, 150.0, 100.0]);
        let est = estimate_noise_variance(&s).unwrap();
        assert!((est.sigma2_hat - 1.0).abs() < 0.05, "{}", est.sigma2_hat);
    }

    #[test]
    fn noise_variance_scales_exactly() {
        let s = mp_quantile_spectrum(300, 500, 1.3, &[80.0, 40.0]);
        let a = estimate_noise_variance(&s).unwrap();
        let b = estimate_noise_variance(&s.scaled(4.0).unwrap()).unwrap();
        assert_eq!(b.sigma2_hat, 4.0 * a.sigma2_hat);
        assert_eq!(a.iterations, b.iterations);
    }

    #[test]
    fn noise_variance_errors() {
        let s = Spectrum::from_eigenvalues(vec![1.0; 10], 0, 10).unwrap();
        assert_eq!(estimate_noise_variance(&s), Err(Error::AspectRatioOne));
        let s = Spectrum::from_eigenvalues(vec![0.0; 10], 0, 20).unwrap();
        assert!(matches!(
            estimate_noise_variance(&s),
            Err(Error::EmptyWindow { .. })
        ));
    }

    #[test]
    fn zero_eigenvalues_do_not_poison_start() {
        // c = 2: half the spectrum is numerically zero.
        let mut v = mp_quantile_spectrum(100, 50, 1.0, &[]).eigenvalues;
        v.extend(std::iter::repeat_n(1e-14, 100));
        let s = Spectrum::from_eigenvalues(v, 0, 100).unwrap();
        let est = estimate_noise_variance(&s).unwrap();
        // Once c > 1 the window average sits near the mean nonzero
        // eigenvalue c·σ², slightly above it because the lower window edge
        // cuts the bottom of the bulk.
        assert!(
            est.sigma2_hat > 1.9 && est.sigma2_hat < 2.3,
            "{}",
            est.sigma2_hat
        );
        assert_eq!(est.trimmed, 0);
    }

    fn table_spectra() -> Vec<Spectrum> {
        // Full 450-point spectra: the reference heads padded with in-bulk values.
        let cols = [TOP_TAU0, TOP_TAU1, TOP_TAU2, TOP_TAU3, TOP_TAU4, TOP_TAU5];
        cols.iter()
            .enumerate()
            .map(|(tau, col)| {
                let mut v = col.to_vec();
                let fill = if tau == 0 { 1.0 } else { 0.0 };
                v.resize(450, fill);
                spec(&v, tau)
            })
            .collect()
    }

    #[test]
    fn decision_rule_on_table() {
        let est = estimate_from_spectra(&table_spectra(), Some(1.0)).unwrap();
        let counts: Vec<usize> = est.counts.iter().map(|c| c.count).collect();
        assert_eq!(counts, vec![6, 8, 8, 12, 12, 12]);
        assert_eq!((est.k_hat, est.q_hat), (Some(2), Some(2)));
        assert!(est.warnings.is_empty());
        assert_eq!(est.sigma2_source, Sigma2Source::Given);
    }

    fn synthetic(counts: &[usize]) -> Vec<Spectrum> {
        counts
            .iter()
            .enumerate()
            .map(|(tau, &k)| {
                let mut v = vec![100.0; k];
                v.resize(50, if tau == 0 { 1.0 } else { 0.0 });
                Spectrum::from_eigenvalues(v, tau, 100).unwrap()
            })
            .collect()
    }

    #[test]
    fn decision_rule_warnings() {
        let est = estimate_from_spectra(&synthetic(&[0, 0, 0]), Some(1.0)).unwrap();
        assert_eq!((est.k_hat, est.q_hat), (Some(0), Some(0)));
        assert_eq!(est.warnings, vec![Warning::NoFactors]);

        let est = estimate_from_spectra(&synthetic(&[5, 6, 10]), Some(1.0)).unwrap();
        assert_eq!((est.k_hat, est.q_hat), (Some(3), Some(1)));
        assert_eq!(
            est.warnings,
            vec![Warning::Divisibility {
                s0: 5,
                lags: 2,
                k_rounded: 3
            }]
        );

        let est = estimate_from_spectra(&synthetic(&[4, 6, 6]), Some(1.0)).unwrap();
        assert_eq!((est.k_hat, est.q_hat), (None, None));
        assert_eq!(
            est.warnings,
            vec![Warning::IncreaseTauMax {
                tau_max: 2,
                target: 8
            }]
        );

        // An overshooting lag still resolves.
        let est = estimate_from_spectra(&synthetic(&[2, 5, 4]), Some(1.0)).unwrap();
        assert_eq!((est.k_hat, est.q_hat), (Some(2), Some(0)));
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(estimate_from_spectra(&synthetic(&[1]), Some(1.0)).is_err());
        let p = Panel::from_row_major(1, 3, vec![1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(
            estimate_orders(&p, 2, Some(1.0)),
            Err(Error::InsufficientColumns { .. })
        ));
        assert!(estimate_orders(&p, 0, Some(1.0)).is_err());
        assert!(estimate_orders(&p, 1, Some(-1.0)).is_err());
    }

    proptest! {
        #[test]
        fn thresholds_are_homogeneous(c in 0.1f64..3.0, s in 0.1f64..10.0, n in 1usize..5000) {
            let a = RmtContext::unit(c).unwrap();
            let b = RmtContext::new(c, s).unwrap();
            let (t0a, t0b) = (threshold_tau0(&a, n), threshold_tau0(&b, n));
            let (tpa, tpb) = (threshold_tau_pos(&a, n), threshold_tau_pos(&b, n));
            prop_assert!((t0b - s * t0a).abs() <= 1e-12 * t0b);
            prop_assert!((tpb - s * tpa).abs() <= 1e-12 * tpb);
        }

        #[test]
        fn scaled_counts_are_identical(
            values in proptest::collection::vec(-20.0f64..20.0, 1..60),
            threshold in 0.1f64..10.0,
            k in 0u32..6,
        ) {
            // Powers of two scale exactly.
            let s = 2f64.powi(k as i32 - 3);
            let a = Spectrum::from_eigenvalues(values.clone(), 1, 10).unwrap();
            let b = a.scaled(s).unwrap();
            for abs in [false, true] {
                prop_assert_eq!(count_outliers(&a, threshold, abs), count_outliers(&b, threshold * s, abs));
            }
        }
    }
}
