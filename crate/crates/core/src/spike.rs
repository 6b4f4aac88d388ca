//! Forward model for lag-τ outliers.
//!
//! With `k` factors loading on `q + 1` lags, the signal part of `Φ(τ)` is
//! governed by the 0/1 band matrix `H(τ) = (J_L(τ) + J_U(τ)) ⊗ I_k`. Each
//! eigenvalue `a_j` of `H(τ)`, paired with a factor strength `λ_j`, produces
//! zero, one or two sample outliers: the solutions `ℓ`, `|ℓ| > d`, of
//!
//! ```text
//! a_j = g_j(ℓ) = [ (c m / h)(1 + 1/λ_j) + ℓ/λ_j ] / (1/2 + 1/h),
//! h(ℓ) = 1 − c²m² + √(1 − c²m²),
//! ```
//!
//! where `m` is the Stieltjes transform of the lag-τ noise law and `d` its
//! support edge. `g_j` is odd and increasing on `(d, ∞)`, so the number of
//! solutions on each side is decided by `g_j(d⁺)` alone.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::panel::symmetric_eigenvalues;
use crate::rmt::RmtContext;

/// Grid used to snap eigenvalues of `H(τ)` before comparing multisets.
pub const H_SNAP: f64 = 1e-10;

/// Right end of the root bracket, as a multiple of the support edge. Roots
/// beyond it are reported as infinite.
pub const BRACKET_FACTOR: f64 = 1e6;

/// Strength of the factors, as eigenvalues of `Q = Λ*Λ` relative to `σ²`.
#[derive(Debug, Clone, PartialEq)]
pub enum FactorStrength {
    /// All eigenvalues of `Q` diverge, so `Q⁻¹ = 0`.
    Strong,
    /// Every eigenvalue equals the given value.
    Uniform(f64),
    /// One value per factor direction (`k(q+1)` of them). At lag τ ≥ 1 they
    /// are paired, in order, with the eigenvalues of `H(τ)` sorted
    /// descending.
    PerEigen(Vec<f64>),
}

impl FactorStrength {
    fn values(&self, dim: usize) -> Result<Vec<f64>> {
        let v = match self {
            FactorStrength::Strong => vec![f64::INFINITY; dim],
            FactorStrength::Uniform(l) => vec![*l; dim],
            FactorStrength::PerEigen(v) => {
                if v.len() != dim {
                    return Err(Error::InvalidArgument(format!(
                        "expected {dim} factor strengths, got {}",
                        v.len()
                    )));
                }
                v.clone()
            }
        };
        for &l in &v {
            check_lambda(l)?;
        }
        Ok(v)
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 {
        Ok(())
    } else {
        Err(Error::NonPositiveLambda(lambda))
    }
}

/// The band matrix `H(τ)` of dimension `k(q+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrixH {
    pub k: usize,
    pub q: usize,
    pub tau: usize,
    pub matrix: DMatrix<f64>,
}

impl BandMatrixH {
    /// Entry `(r, s)` is 1 iff `|r − s| = kτ`; the zero matrix when `τ > q`.
    pub fn build(k: usize, q: usize, tau: usize) -> Result<Self> {
        if k == 0 || tau == 0 {
            return Err(Error::InvalidArgument("H(τ) needs k ≥ 1 and τ ≥ 1".into()));
        }
        let blocks = q + 1;
        let shift = DMatrix::from_fn(
            blocks,
            blocks,
            |i, j| {
                if i.abs_diff(j) == tau {
                    1.0
                } else {
                    0.0
                }
            },
        );
        let matrix = shift.kronecker(&DMatrix::<f64>::identity(k, k));
        Ok(Self { k, q, tau, matrix })
    }

    pub fn dim(&self) -> usize {
        self.k * (self.q + 1)
    }

    /// Eigenvalues sorted descending, snapped to the [`H_SNAP`] grid.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let mut v: Vec<f64> = symmetric_eigenvalues(&self.matrix)?
            .into_iter()
            .map(|x| {
                let s = (x / H_SNAP).round() * H_SNAP;
                if s == 0.0 {
                    0.0
                } else {
                    s
                }
            })
            .collect();
        v.sort_by(|a, b| b.total_cmp(a));
        Ok(v)
    }
}

/// Case label for one `(a_j, λ_j)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SpikeCaseLabel {
    #[serde(rename = "I.i")]
    OneI,
    #[serde(rename = "I.ii")]
    OneIi,
    #[serde(rename = "I.iii")]
    OneIii,
    #[serde(rename = "II.i")]
    TwoI,
    #[serde(rename = "II.ii")]
    TwoIi,
    #[serde(rename = "II.iii")]
    TwoIii,
}

impl SpikeCaseLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            SpikeCaseLabel::OneI => "I.i",
            SpikeCaseLabel::OneIi => "I.ii",
            SpikeCaseLabel::OneIii => "I.iii",
            SpikeCaseLabel::TwoI => "II.i",
            SpikeCaseLabel::TwoIi => "II.ii",
            SpikeCaseLabel::TwoIii => "II.iii",
        }
    }
}

impl std::fmt::Display for SpikeCaseLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpikeCase {
    pub a_j: f64,
    /// Infinite for strong factors (serialized as `null`).
    pub lambda_j: f64,
    /// `g_j` at the right support edge.
    pub g_edge: f64,
    pub solutions_right: u8,
    pub solutions_left: u8,
    pub case_label: SpikeCaseLabel,
}

impl SpikeCase {
    pub fn solutions(&self) -> usize {
        (self.solutions_right + self.solutions_left) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpikePrediction {
    pub k: usize,
    pub q: usize,
    pub tau: usize,
    /// Empty at lag 0, where the count is `#{λ_j > √c}`.
    pub cases: Vec<SpikeCase>,
    pub total_count: usize,
}

/// `g_j` given a unit-variance Stieltjes value `m` at unit-variance `ell`.
fn g_from_m(m: f64, ell: f64, lambda: f64, c: f64) -> f64 {
    let cm = c * m;
    let r = (1.0 - cm * cm).max(0.0);
    let h = r + r.sqrt();
    let inv_lambda = if lambda.is_infinite() {
        0.0
    } else {
        1.0 / lambda
    };
    ((cm / h) * (1.0 + inv_lambda) + ell * inv_lambda) / (0.5 + 1.0 / h)
}

/// Evaluates `g_j(ℓ)` for `|ℓ| > d σ²`. `lambda_j` may be infinite.
pub fn g_j_eval(ell: f64, lambda_j: f64, ctx: &RmtContext) -> Result<f64> {
    check_lambda(lambda_j)?;
    let m = ctx.lsd_stieltjes(ell)? * ctx.sigma2();
    Ok(g_from_m(m, ell / ctx.sigma2(), lambda_j, ctx.c()))
}

/// `g_j(d⁺)` from the closed-form edge value of the Stieltjes transform.
pub fn g_edge(lambda_j: f64, ctx: &RmtContext) -> Result<f64> {
    check_lambda(lambda_j)?;
    Ok(g_from_m(
        ctx.stieltjes_edge_m1(),
        ctx.lsd_edge().a,
        lambda_j,
        ctx.c(),
    ))
}

/// Classification threshold under strong factors, `g(d⁺)` with `λ = ∞`.
pub fn g_infinity_threshold(ctx: &RmtContext) -> f64 {
    g_from_m(
        ctx.stieltjes_edge_m1(),
        ctx.lsd_edge().a,
        f64::INFINITY,
        ctx.c(),
    )
}

/// Counts the solutions of `g_j(ℓ) = a_j` on each side of the support.
pub fn classify_spike(a_j: f64, lambda_j: f64, ctx: &RmtContext) -> Result<SpikeCase> {
    let g_d = g_edge(lambda_j, ctx)?;
    let right = a_j > g_d;
    let left = a_j < -g_d;
    let case_label = match (g_d >= 0.0, right, left) {
        (true, true, _) => SpikeCaseLabel::OneI,
        (true, false, false) => SpikeCaseLabel::OneIi,
        (true, false, true) => SpikeCaseLabel::OneIii,
        (false, true, false) => SpikeCaseLabel::TwoI,
        (false, true, true) => SpikeCaseLabel::TwoIi,
        (false, false, _) => SpikeCaseLabel::TwoIii,
    };
    Ok(SpikeCase {
        a_j,
        lambda_j,
        g_edge: g_d,
        solutions_right: right as u8,
        solutions_left: left as u8,
        case_label,
    })
}

/// Root of `g_j(ℓ) = target` on `(d, d·BRACKET_FACTOR)` in unit variance,
/// assuming `target > g_j(d⁺)`. Infinite when the root is beyond the bracket.
fn right_root(target: f64, lambda: f64, ctx: &RmtContext) -> Result<f64> {
    let unit = RmtContext::unit(ctx.c())?;
    let d = unit.lsd_edge().a;
    let g = |l: f64| g_j_eval(l, lambda, &unit);
    let mut lo = d;
    let mut hi = d * BRACKET_FACTOR;
    if g(hi)? < target {
        return Ok(f64::INFINITY);
    }
    for _ in 0..200 {
        // Geometric midpoints while the bracket spans decades.
        let mid = if hi > 4.0 * lo {
            (lo * hi).sqrt()
        } else {
            0.5 * (lo + hi)
        };
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Every `ℓ` with `|ℓ| > d σ²` solving `g_j(ℓ) = a_j`, ascending. A root
/// beyond `d σ² · BRACKET_FACTOR` is reported as `±∞`.
pub fn solve_spike_tau(a_j: f64, lambda_j: f64, ctx: &RmtContext) -> Result<Vec<f64>> {
    let case = classify_spike(a_j, lambda_j, ctx)?;
    let mut roots = Vec::with_capacity(2);
    if case.solutions_left == 1 {
        roots.push(-right_root(-a_j, lambda_j, ctx)? * ctx.sigma2());
    }
    if case.solutions_right == 1 {
        roots.push(right_root(a_j, lambda_j, ctx)? * ctx.sigma2());
    }
    Ok(roots)
}

/// Eigenvalues of `H(τ)` for `τ ≥ 1`.
pub fn h_eigenvalues(h: &BandMatrixH) -> Result<Vec<f64>> {
    h.eigenvalues()
}

/// Predicted outlier counts of `Φ(τ)` for `τ = 0..=tau_max`.
pub fn predict_outlier_counts(
    k: usize,
    q: usize,
    tau_max: usize,
    ctx: &RmtContext,
    strength: &FactorStrength,
) -> Result<Vec<SpikePrediction>> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let dim = k * (q + 1);
    let lambdas = strength.values(dim)?;
    let root_c = ctx.c().sqrt();
    let lag0 = SpikePrediction {
        k,
        q,
        tau: 0,
        cases: Vec::new(),
        total_count: lambdas.iter().filter(|&&l| l > root_c).count(),
    };
    let rest: Vec<SpikePrediction> = (1..=tau_max)
        .into_par_iter()
        .map(|tau| {
            let h = BandMatrixH::build(k, q, tau)?;
            let cases = h
                .eigenvalues()?
                .into_iter()
                .zip(&lambdas)
                .map(|(a, &l)| classify_spike(a, l, ctx))
                .collect::<Result<Vec<_>>>()?;
            let total_count = cases.iter().map(SpikeCase::solutions).sum();
            Ok(SpikePrediction {
                k,
                q,
                tau,
                cases,
                total_count,
            })
        })
        .collect::<Result<_>>()?;
    Ok(std::iter::once(lag0).chain(rest).collect())
}
