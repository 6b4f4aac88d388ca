//! Seeded simulation of the dynamic factor model
//!
//! ```text
//! R_t = Σ_{i=0..q} Λ_i f_{t−i} + e_t,   t = 1..N,
//! ```
//!
//! with loadings `Λ_i[·, j] = β·1_n + N(0, σ_ε² I_n)`, factors
//! `f_t ~ N(0, σ_f² I_k)` (pre-sample `f_{1−q}, …, f_0` included) and noise
//! `e_t ~ N(0, σ² I_n)`.
//!
//! Randomness comes from ChaCha20 seeded with `seed_from_u64(seed)`; the
//! loadings, factors and noise each use their own stream (0, 1, 2) so no
//! draw in one block shifts another. Gaussians are `rand_distr`'s
//! `StandardNormal` scaled by the standard deviation. Replicates derive their
//! seeds from `(seed, index)` with a splitmix64 mix.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::{estimate_orders, OrderEstimate};
use crate::panel::{symmetric_eigenvalues, Panel, Spectrum};
use crate::rmt::RmtContext;

/// Identifies the sampling scheme. Bumped whenever any draw changes.
pub const GENERATOR_VERSION: &str = "chacha20-streams-v1";

const LOADING_STREAM: u64 = 0;
const FACTOR_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelConfig {
    pub n: usize,
    /// Sample length `T`; the panel has `T + tau_max` columns.
    pub t: usize,
    pub k: usize,
    pub q: usize,
    pub beta: f64,
    pub sigma_f2: f64,
    pub sigma2: f64,
    pub sigma_eps2: f64,
    pub seed: u64,
    pub tau_max: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            n: 450,
            t: 500,
            k: 2,
            q: 2,
            beta: 1.0,
            sigma_f2: 4.0,
            sigma2: 1.0,
            sigma_eps2: 0.25,
            seed: 0,
            tau_max: 5,
        }
    }
}

impl ModelConfig {
    /// A factor-free configuration: every loading and factor is zero.
    pub fn pure_noise(n: usize, t: usize, tau_max: usize, sigma2: f64, seed: u64) -> Self {
        Self {
            n,
            t,
            k: 1,
            q: 0,
            beta: 0.0,
            sigma_f2: 0.0,
            sigma2,
            sigma_eps2: 0.0,
            seed,
            tau_max,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    /// Number of panel columns, `T + tau_max`.
    pub fn columns(&self) -> usize {
        self.t + self.tau_max
    }

    /// Zero loading noise and zero factor variance are allowed; the noise
    /// variance must be positive.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.into()));
        if self.n == 0 || self.t == 0 || self.k == 0 {
            return bad("n, T and k must be at least 1");
        }
        if self.columns() < 2 {
            return bad("the panel needs at least two columns");
        }
        if !self.beta.is_finite() {
            return bad("beta must be finite");
        }
        for (name, v) in [("sigma_f2", self.sigma_f2), ("sigma_eps2", self.sigma_eps2)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be nonnegative"
                )));
            }
        }
        if !(self.sigma2.is_finite() && self.sigma2 > 0.0) {
            return bad("sigma2 must be positive");
        }
        Ok(())
    }

    fn rng(&self, stream: u64) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

fn normal<R: Rng + ?Sized>(rng: &mut R, sd: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    sd * z
}

/// Loadings `Λ_0, …, Λ_q`, each `n × k`, filled column by column.
pub fn generate_loadings(cfg: &ModelConfig) -> Result<Vec<DMatrix<f64>>> {
    cfg.validate()?;
    let mut rng = cfg.rng(LOADING_STREAM);
    let sd = cfg.sigma_eps2.sqrt();
    Ok((0..=cfg.q)
        .map(|_| {
            let mut m = DMatrix::zeros(cfg.n, cfg.k);
            for j in 0..cfg.k {
                for r in 0..cfg.n {
                    m[(r, j)] = cfg.beta + normal(&mut rng, sd);
                }
            }
            m
        })
        .collect())
}

/// Eigenvalues of `Q = Λ*Λ`, with `Λ = [Λ_0, …, Λ_q]`, sorted descending.
pub fn loading_gram_eigenvalues(loadings: &[DMatrix<f64>]) -> Result<Vec<f64>> {
    let Some(first) = loadings.first() else {
        return Err(Error::EmptyInput);
    };
    let (n, k) = first.shape();
    let mut stacked = DMatrix::zeros(n, k * loadings.len());
    for (i, l) in loadings.iter().enumerate() {
        stacked.view_mut((0, i * k), (n, k)).copy_from(l);
    }
    let mut v = symmetric_eigenvalues(&(stacked.transpose() * &stacked))?;
    v.sort_by(|a, b| b.total_cmp(a));
    Ok(v)
}

/// Panel with `T + tau_max` columns.
pub fn generate_panel(cfg: &ModelConfig) -> Result<Panel> {
    let loadings = generate_loadings(cfg)?;
    let cols = cfg.columns();
    let (n, k, q) = (cfg.n, cfg.k, cfg.q);

    // factors[s] is f_{s − q + 1}, so f_t sits at index t + q − 1.
    let mut frng = cfg.rng(FACTOR_STREAM);
    let fsd = cfg.sigma_f2.sqrt();
    let factors: Vec<Vec<f64>> = (0..cols + q)
        .map(|_| (0..k).map(|_| normal(&mut frng, fsd)).collect())
        .collect();

    let mut nrng = cfg.rng(NOISE_STREAM);
    let esd = cfg.sigma2.sqrt();
    let mut data = vec![0.0; n * cols];
    for t in 0..cols {
        // Column t holds R_{t+1}; f_{t+1−i} is at index t + q − i.
        for r in 0..n {
            let mut v = 0.0;
            for (i, lam) in loadings.iter().enumerate() {
                let f = &factors[t + q - i];
                for j in 0..k {
                    v += lam[(r, j)] * f[j];
                }
            }
            data[r * cols + t] = v + normal(&mut nrng, esd);
        }
    }
    Panel::from_row_major(n, cols, data)
}

/// Sup distance between a sorted sample's empirical CDF and `cdf`, whose
/// left limit is `cdf_left`. Both sides of every sample point and of the
/// origin (where the reference may carry an atom) are compared.
pub fn ks_distance<F, G>(sorted: &[f64], cdf: F, cdf_left: G) -> f64
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    let n = sorted.len() as f64;
    if sorted.is_empty() {
        return 0.0;
    }
    let check = |x: f64| {
        let below = sorted.partition_point(|&v| v < x) as f64 / n;
        let upto = sorted.partition_point(|&v| v <= x) as f64 / n;
        (cdf(x) - upto).abs().max((cdf_left(x) - below).abs())
    };
    sorted
        .iter()
        .copied()
        .chain(std::iter::once(0.0))
        .map(check)
        .fold(0.0, f64::max)
}

/// Kolmogorov distance between the spectrum of a lag-τ noise matrix and the
/// limiting lag-τ law.
pub fn esd_ks_distance(spec: &Spectrum, ctx: &RmtContext) -> f64 {
    let sorted = spec.ascending();
    ks_distance(
        &sorted,
        |x| ctx.lsd_cdf(x),
        |x| {
            if x == 0.0 {
                ctx.lsd_cdf(-f64::MIN_POSITIVE)
            } else {
                ctx.lsd_cdf(x)
            }
        },
    )
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replicate `index`, a pure function of `(seed, index)`.
pub fn child_seed(seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

/// Estimates on `reps` independent replicates, in replicate order.
pub fn run_replicates(
    cfg: &ModelConfig,
    reps: usize,
    sigma2: Option<f64>,
) -> Result<Vec<OrderEstimate>> {
    if reps == 0 {
        return Err(Error::InvalidArgument("reps must be at least 1".into()));
    }
    cfg.validate()?;
    (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let panel = generate_panel(&cfg.with_seed(child_seed(cfg.seed, r)))?;
            estimate_orders(&panel, cfg.tau_max, sigma2)
        })
        .collect()
}
