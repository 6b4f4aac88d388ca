//! Limiting spectral laws.
//!
//! Two families are covered:
//!
//! * the Marchenko–Pastur (MP) law of the lag-0 sample covariance, with its
//!   Stieltjes transform and the lag-0 spike map `g(ℓ) = −ℓ m(ℓ) − 1`;
//! * the symmetric law `F_c` of a lag-τ (τ ≥ 1) noise matrix, supported on
//!   `[−a, a]`, with an atom of mass `1 − 1/c` at the origin when `c > 1`.
//!
//! Everything is computed for unit noise variance and rescaled: arguments
//! `x` and `ℓ` are divided by `σ²`, densities and Stieltjes transforms are
//! divided by `σ²`, and support edges are multiplied by it. Spike strengths
//! (`α`) and the spike map `g` are dimensionless.

use std::f64::consts::PI;

use serde::Serialize;

use crate::cubic;
use crate::error::{Error, Result};
use crate::quadrature::{integrate, Tolerance};

/// Half-width of the window around `c = 1` that uses the `c = 1` formulas.
pub const C_ONE_WINDOW: f64 = 1e-6;

/// Where the density formula is evaluated in place of `x = 0`.
const X_FLOOR: f64 = 1e-8;

const QUAD_TOL: Tolerance = Tolerance {
    abs: 1e-12,
    rel: 1e-12,
    max_intervals: 4000,
};

fn near_one(c: f64) -> bool {
    (c - 1.0).abs() < C_ONE_WINDOW
}

/// Support edge of the lag-τ law for unit variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LsdEdge {
    /// Root of `((1−c)² − 1) y³ + y² + y − 1 = 0` on the admissible branch
    /// (`1` inside the `c = 1` window).
    pub y1: f64,
    /// Half-width `a` of the support `[−a, a]`.
    pub a: f64,
}

/// Result of locating a lag-0 spike.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SpikeLocation {
    Outlier(f64),
    NoOutlier,
}

impl SpikeLocation {
    pub fn value(self) -> Option<f64> {
        match self {
            SpikeLocation::Outlier(l) => Some(l),
            SpikeLocation::NoOutlier => None,
        }
    }
}

/// Aspect ratio `c = n/T` and noise variance `σ²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmtContext {
    c: f64,
    sigma2: f64,
    edge: LsdEdge,
}

/// The branch variable `z = y − 1` solves
/// `e + 3e z + (3e − 2) z² + (e − 1) z³ = 0` with `e = (1−c)²`; this avoids
/// the cancellation the `y` form suffers near `c = 1`.
fn solve_z(c: f64) -> f64 {
    let e = (1.0 - c).powi(2);
    let coeffs = [e - 1.0, 3.0 * e - 2.0, 3.0 * e, e];
    let in_branch = |z: f64| {
        if c < 1.0 {
            z > 0.0
        } else {
            z > -1.0 && z < 0.0
        }
    };
    let found = cubic::real_roots(coeffs[0], coeffs[1], coeffs[2], coeffs[3])
        .into_iter()
        .filter(|&z| in_branch(z) && cubic::relative_residual(coeffs, z) < 1e-12)
        .reduce(f64::max);
    if let Some(z) = found {
        return z;
    }
    if c < 1.0 {
        // f(0) = e > 0 and the leading coefficient is negative.
        let mut hi = 1.0;
        while ((coeffs[0] * hi + coeffs[1]) * hi + coeffs[2]) * hi + coeffs[3] > 0.0 {
            hi *= 2.0;
        }
        cubic::bisect_root(coeffs, 0.0, hi)
    } else {
        // f(−1) = −1 < 0 < f(0) = e.
        cubic::bisect_root(coeffs, -1.0, 0.0)
    }
}

/// Admissible root of `((1−c)² − 1) y³ + y² + y − 1 = 0`: the root above 1
/// when `c < 1` and the root in `(0, 1)` when `c > 1`.
pub fn solve_y1(c: f64) -> Result<f64> {
    check_c(c)?;
    if near_one(c) {
        return Err(Error::CEqualsOne);
    }
    Ok(1.0 + solve_z(c))
}

fn check_c(c: f64) -> Result<()> {
    if c.is_finite() && c > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "aspect ratio must be positive, got {c}"
        )))
    }
}

fn unit_edge(c: f64) -> LsdEdge {
    if near_one(c) {
        return LsdEdge { y1: 1.0, a: 2.0 };
    }
    let z = solve_z(c);
    LsdEdge {
        y1: 1.0 + z,
        a: (1.0 - c) * (2.0 + z).sqrt() / z,
    }
}

/// Unit-variance density of the lag-τ law at `x`, with `a` its support edge.
///
/// The textbook radicand `y²/(1+y) − ((1−c)/|x| + 1/√(1+y))²` subtracts two
/// quantities of order `1/x²` near the origin. Using the cubic identity
/// `(y+1)(x²y² − 4) = (1−c)² y²` the first two terms combine into
/// `(4(1+y)²/x² − y²(1+2y)) / (y²(1+y))`, which is well conditioned.
fn unit_density(x: f64, c: f64, a: f64) -> f64 {
    let ax = x.abs();
    if ax >= a || !ax.is_finite() {
        return 0.0;
    }
    let x = ax.max(X_FLOOR);
    let x2 = x * x;
    let coeffs = [x2, -((1.0 - c).powi(2) - x2), -4.0, -4.0];
    let Some(y) = cubic::largest_real_root(coeffs[0], coeffs[1], coeffs[2], coeffs[3]) else {
        return 0.0;
    };
    let s = 1.0 / (1.0 + y).sqrt();
    let u = (1.0 - c) / x;
    let lead = (4.0 * (1.0 + y).powi(2) / x2 - y * y * (1.0 + 2.0 * y)) / (y * y * (1.0 + y));
    let radicand = (lead - 2.0 * u * s - s * s).max(0.0);
    radicand.sqrt() / (2.0 * c * PI)
}

impl RmtContext {
    pub fn new(c: f64, sigma2: f64) -> Result<Self> {
        check_c(c)?;
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "noise variance must be positive, got {sigma2}"
            )));
        }
        Ok(Self {
            c,
            sigma2,
            edge: unit_edge(c),
        })
    }

    /// Unit noise variance.
    pub fn unit(c: f64) -> Result<Self> {
        Self::new(c, 1.0)
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// Same aspect ratio, different variance.
    pub fn with_sigma2(&self, sigma2: f64) -> Result<Self> {
        Self::new(self.c, sigma2)
    }

    fn unit_mp_edges(&self) -> (f64, f64) {
        let r = self.c.sqrt();
        ((1.0 - r).powi(2), (1.0 + r).powi(2))
    }

    /// MP support `((1−√c)²σ², (1+√c)²σ²)`.
    pub fn mp_edges(&self) -> (f64, f64) {
        let (lo, hi) = self.unit_mp_edges();
        (lo * self.sigma2, hi * self.sigma2)
    }

    fn inside_mp(&self, ell: f64) -> Error {
        let (left, right) = self.mp_edges();
        Error::InsideSupport { ell, left, right }
    }

    /// Unit-variance MP Stieltjes transform at `l`.
    fn unit_mp_stieltjes(&self, l: f64) -> Option<f64> {
        let c = self.c;
        let (lo, hi) = self.unit_mp_edges();
        if !l.is_finite() || (l > lo && l < hi) {
            return None;
        }
        if l == 0.0 {
            // The origin carries an atom (c > 1) or an integrable pole (c = 1).
            return (c < 1.0).then(|| 1.0 / (1.0 - c));
        }
        let b = 1.0 - c - l;
        let root = (b * b - 4.0 * l * c).max(0.0).sqrt();
        let m = if l >= hi {
            // (b + √D)/(2cl) written without cancellation.
            2.0 / (b - root)
        } else if b > 0.0 {
            // (b − √D)/(2cl), same trick.
            2.0 / (b + root)
        } else {
            (b - root) / (2.0 * c * l)
        };
        Some(m)
    }

    /// MP Stieltjes transform `m(ℓ) = ∫ dF(x)/(x − ℓ)` for `ℓ` outside the
    /// open support. The edges themselves are admissible.
    pub fn mp_stieltjes(&self, ell: f64) -> Result<f64> {
        self.unit_mp_stieltjes(ell / self.sigma2)
            .map(|m| m / self.sigma2)
            .ok_or_else(|| self.inside_mp(ell))
    }

    /// Companion transform `m̄(ℓ) = −(1−c)/ℓ + c m(ℓ)`.
    pub fn mp_companion_stieltjes(&self, ell: f64) -> Result<f64> {
        let m = self.mp_stieltjes(ell)?;
        if ell == 0.0 {
            return Err(self.inside_mp(ell));
        }
        Ok(-(1.0 - self.c) / ell + self.c * m)
    }

    /// Lag-0 spike map `g(ℓ) = −ℓ m(ℓ) − 1 = ℓ m(ℓ) m̄(ℓ)` for `ℓ` at or
    /// beyond the right MP edge. Strictly decreasing, `1/√c` at the edge.
    pub fn g_tau0(&self, ell: f64) -> Result<f64> {
        let l = ell / self.sigma2;
        let (_, hi) = self.unit_mp_edges();
        if l.is_nan() || l < hi {
            return Err(self.inside_mp(ell));
        }
        let m = self
            .unit_mp_stieltjes(l)
            .ok_or_else(|| self.inside_mp(ell))?;
        Ok(-l * m - 1.0)
    }

    /// Location of the sample outlier produced by a lag-0 spike of strength
    /// `alpha` (relative to `σ²`): the root of `g(ℓ) = 1/α` beyond the right
    /// edge, which exists exactly when `α > √c`.
    pub fn spike_location_tau0(&self, alpha: f64) -> SpikeLocation {
        if !alpha.is_finite() || alpha <= self.c.sqrt() {
            return SpikeLocation::NoOutlier;
        }
        let target = 1.0 / alpha;
        let (_, edge) = self.unit_mp_edges();
        let g = |l: f64| self.g_tau0(l * self.sigma2).unwrap_or(f64::INFINITY);
        let mut lo = edge;
        let mut hi = 2.0 * edge;
        while g(hi) > target {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if g(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        SpikeLocation::Outlier(0.5 * (lo + hi) * self.sigma2)
    }

    /// Unit-variance edge data of the lag-τ law.
    pub fn lsd_edge(&self) -> LsdEdge {
        self.edge
    }

    /// Support half-width `a σ²` of the lag-τ law.
    pub fn lsd_support(&self) -> f64 {
        self.edge.a * self.sigma2
    }

    /// Density of the lag-τ law. Zero outside `[−a σ², a σ²]`; at the origin
    /// the right limit is used.
    pub fn lsd_density(&self, x: f64) -> f64 {
        unit_density(x / self.sigma2, self.c, self.edge.a) / self.sigma2
    }

    /// `∫_{|x| ≥ t} φ(x) dx` over one side, `0 ≤ t < a`, in unit variance.
    ///
    /// Uses `x = a sin(π w²/2)`: the Jacobian vanishes like `w` at the origin
    /// (absorbing the `x^{−1/2}` blow-up at `c = 1`) and like `√(1 − w)` at
    /// the edge (absorbing the square-root zero of the density).
    fn unit_tail(&self, t: f64) -> f64 {
        let a = self.edge.a;
        if t >= a {
            return 0.0;
        }
        let w0 = ((2.0 / PI) * (t / a).clamp(0.0, 1.0).asin()).sqrt();
        let c = self.c;
        integrate(
            |w| {
                let theta = 0.5 * PI * w * w;
                unit_density(a * theta.sin(), c, a) * a * theta.cos() * PI * w
            },
            w0,
            1.0,
            QUAD_TOL,
        )
        .value
    }

    /// Mass of the continuous part: `1` for `c ≤ 1`, `1/c` for `c > 1`.
    pub fn lsd_continuous_mass(&self) -> f64 {
        2.0 * self.unit_tail(0.0)
    }

    /// CDF of the lag-τ law, including the atom `1 − 1/c` at the origin
    /// when `c > 1`.
    pub fn lsd_cdf(&self, x: f64) -> f64 {
        let u = x / self.sigma2;
        let a = self.edge.a;
        if u <= -a {
            0.0
        } else if u >= a {
            1.0
        } else if u < 0.0 {
            self.unit_tail(-u).clamp(0.0, 1.0)
        } else {
            (1.0 - self.unit_tail(u)).clamp(0.0, 1.0)
        }
    }

    /// Stieltjes transform of the lag-τ law for `|ℓ| > a σ²`, by quadrature.
    /// Odd in `ℓ`, negative and increasing on `(a σ², ∞)`.
    pub fn lsd_stieltjes(&self, ell: f64) -> Result<f64> {
        let l = ell / self.sigma2;
        let a = self.edge.a;
        if !l.is_finite() || l.abs() <= a {
            return Err(Error::InsideSupport {
                ell,
                left: -self.lsd_support(),
                right: self.lsd_support(),
            });
        }
        let c = self.c;
        // φ(x)/(x − ℓ) + φ(−x)/(−x − ℓ) = φ(x)·2ℓ/(x² − ℓ²) on [0, a].
        let continuous = integrate(
            |w| {
                let theta = 0.5 * PI * w * w;
                let x = a * theta.sin();
                unit_density(x, c, a) * a * theta.cos() * PI * w * 2.0 * l / (x * x - l * l)
            },
            0.0,
            1.0,
            QUAD_TOL,
        )
        .value;
        let atom = if c > 1.0 && !near_one(c) {
            -(1.0 - 1.0 / c) / l
        } else {
            0.0
        };
        Ok((continuous + atom) / self.sigma2)
    }

    /// Unit-variance limit of the lag-τ Stieltjes transform at the right
    /// edge: `(1 − c − √((1−c)² + 8a²)) / (4 c a)`.
    pub fn stieltjes_edge_m1(&self) -> f64 {
        let c = self.c;
        let d = self.edge.a;
        (1.0 - c - ((1.0 - c).powi(2) + 8.0 * d * d).sqrt()) / (4.0 * c * d)
    }
}
