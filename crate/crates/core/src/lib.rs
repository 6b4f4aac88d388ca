//! Order determination for large-dimensional dynamic factor models.
//!
//! Given an `n × N` panel `R` (rows are series, columns are time), the
//! number of factors `k` and the lag order `q` of
//!
//! ```text
//! R_t = Σ_{i=0..q} Λ_i f_{t-i} + e_t
//! ```
//!
//! are recovered by counting eigenvalues of the symmetrized lag-τ
//! covariance matrices `Φ(τ)` that escape the bulk of the noise spectrum.
//! At lag 0 the bulk is the Marchenko–Pastur law and `k(q+1)` eigenvalues
//! separate; at every lag `τ > q` the count doubles to `2k(q+1)`, so the
//! first lag where the count doubles identifies `q + 1`.
//!
//! Module map:
//!
//! * [`panel`] builds `Φ(τ)` and its spectrum.
//! * [`rmt`] evaluates the limiting laws (MP law, the lag-τ law, edge values).
//! * [`spike`] predicts outlier counts for a given `(k, q)`.
//! * [`estimator`] is the estimation pipeline.
//! * [`simulate`] generates panels from the factor model and runs replicates.

pub mod cubic;
pub mod error;
pub mod estimator;
pub mod panel;
pub mod quadrature;
pub mod rmt;
pub mod simulate;
pub mod spike;

pub use error::{Error, Result};
pub use estimator::{
    count_outliers, estimate_from_spectra, estimate_noise_variance, estimate_orders,
    estimate_orders_with_spectra, threshold_tau0, threshold_tau_pos, LagCount,
    NoiseVarianceEstimate, OrderEstimate, Sigma2Source, ThresholdSet, Warning,
};
pub use panel::{
    build_sym_lag_cov, eigenvalues_sym, lag_spectra, validate_panel, Panel, Spectrum, SymLagCov,
};
pub use rmt::{LsdEdge, RmtContext, SpikeLocation};
pub use simulate::{
    esd_ks_distance, generate_loadings, generate_panel, run_replicates, ModelConfig,
};
pub use spike::{
    classify_spike, g_infinity_threshold, g_j_eval, h_eigenvalues, predict_outlier_counts,
    solve_spike_tau, BandMatrixH, FactorStrength, SpikeCase, SpikeCaseLabel, SpikePrediction,
};
