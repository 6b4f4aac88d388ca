//! JSON documents emitted by the CLI.

use factor_order::{OrderEstimate, Spectrum, SpikeCase, SpikePrediction};
use serde::Serialize;

pub const REPORT_SCHEMA: &str = "factor-order-report/1";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize)]
pub struct Thresholds {
    pub b_hat: f64,
    pub d_hat: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LagReport {
    pub tau: usize,
    pub count: usize,
    /// Leading eigenvalues, ordered by absolute value.
    pub top_eigenvalues: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportJson {
    pub schema: &'static str,
    pub version: &'static str,
    pub n: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub tau_max: usize,
    pub c: f64,
    pub sigma2_hat: f64,
    pub sigma2_source: &'static str,
    pub noise_iterations: usize,
    pub thresholds: Thresholds,
    pub counts: Vec<LagReport>,
    pub k_hat: Option<usize>,
    pub q_hat: Option<usize>,
    pub warnings: Vec<String>,
}

impl ReportJson {
    pub fn new(est: &OrderEstimate, spectra: &[Spectrum], report_eigs: usize) -> Self {
        let counts = est
            .counts
            .iter()
            .zip(spectra)
            .map(|(lc, spec)| LagReport {
                tau: lc.tau,
                count: lc.count,
                top_eigenvalues: spec.abs_sorted.iter().take(report_eigs).copied().collect(),
            })
            .collect();
        Self {
            schema: REPORT_SCHEMA,
            version: VERSION,
            n: est.n,
            t: est.t_used,
            tau_max: est.counts.len().saturating_sub(1),
            c: est.c,
            sigma2_hat: est.sigma2_hat,
            sigma2_source: est.sigma2_source.as_str(),
            noise_iterations: est.noise_iterations,
            thresholds: Thresholds {
                b_hat: est.thresholds.b_hat,
                d_hat: est.thresholds.d_hat,
            },
            counts,
            k_hat: est.k_hat,
            q_hat: est.q_hat,
            warnings: est.warnings.iter().map(ToString::to_string).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PredictLag {
    pub tau: usize,
    pub count: usize,
    /// Infinite strengths serialize as `null`.
    pub cases: Vec<SpikeCase>,
}

/// One entry per lag of the prediction output array.
pub fn predict_lags(preds: Vec<SpikePrediction>) -> Vec<PredictLag> {
    preds
        .into_iter()
        .map(|p| PredictLag {
            tau: p.tau,
            count: p.total_count,
            cases: p.cases,
        })
        .collect()
}
