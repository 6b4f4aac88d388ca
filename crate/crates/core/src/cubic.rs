//! Real roots of cubic polynomials.
//!
//! Roots come from the closed-form trigonometric / Cardano formulas on the
//! depressed cubic and are then polished with a few Newton steps on the
//! original coefficients, which removes the cancellation the closed forms
//! suffer when the coefficients span many orders of magnitude.

use std::f64::consts::PI;

/// Evaluates `a x³ + b x² + c x + d` and its derivative.
#[inline]
fn eval(coeffs: [f64; 4], x: f64) -> (f64, f64) {
    let [a, b, c, d] = coeffs;
    let p = ((a * x + b) * x + c) * x + d;
    let dp = (3.0 * a * x + 2.0 * b) * x + c;
    (p, dp)
}

/// Residual of `x` scaled by the magnitude of the individual terms, so that
/// roots of badly scaled polynomials can still be compared against a fixed
/// relative tolerance.
pub fn relative_residual(coeffs: [f64; 4], x: f64) -> f64 {
    let [a, b, c, d] = coeffs;
    let (p, _) = eval(coeffs, x);
    let scale = (a * x * x * x).abs() + (b * x * x).abs() + (c * x).abs() + d.abs();
    if scale == 0.0 {
        p.abs()
    } else {
        p.abs() / scale
    }
}

/// Newton-polishes `x` as a root of the cubic; keeps the best iterate seen.
pub fn polish(coeffs: [f64; 4], mut x: f64) -> f64 {
    let mut best = x;
    let mut best_res = relative_residual(coeffs, x);
    for _ in 0..8 {
        let (p, dp) = eval(coeffs, x);
        if dp == 0.0 || !dp.is_finite() {
            break;
        }
        x -= p / dp;
        let res = relative_residual(coeffs, x);
        if res < best_res {
            best = x;
            best_res = res;
        }
        if best_res == 0.0 {
            break;
        }
    }
    best
}

fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    if a == 0.0 {
        if b == 0.0 {
            return Vec::new();
        }
        return vec![-c / b];
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    let sq = disc.sqrt();
    // q has the sign of b so the two roots never come from a difference of
    // nearly equal numbers.
    let q = -0.5 * (b + sq.copysign(b));
    let mut roots = if q == 0.0 {
        vec![0.0, 0.0]
    } else {
        vec![q / a, c / q]
    };
    roots.sort_by(f64::total_cmp);
    roots
}

/// All real roots of `a x³ + b x² + c x + d = 0`, sorted ascending.
///
/// A leading coefficient that is negligible against the others degrades to
/// the quadratic case. Repeated roots are reported with multiplicity when the
/// discriminant resolves them as such.
pub fn real_roots(a: f64, b: f64, c: f64, d: f64) -> Vec<f64> {
    let coeffs = [a, b, c, d];
    let rest = b.abs().max(c.abs()).max(d.abs());
    if a == 0.0 || a.abs() <= 1e-300 * rest {
        return quadratic_roots(b, c, d)
            .into_iter()
            .map(|x| polish(coeffs, x))
            .collect();
    }

    let (bb, cc, dd) = (b / a, c / a, d / a);
    let shift = bb / 3.0;
    let p = cc - bb * bb / 3.0;
    let q = 2.0 * bb * bb * bb / 27.0 - bb * cc / 3.0 + dd;
    let half_q = q / 2.0;
    let third_p = p / 3.0;
    let disc = half_q * half_q + third_p * third_p * third_p;

    let mut roots = if disc > 0.0 {
        // One real root.
        let sq = disc.sqrt();
        let u = (-half_q - sq.copysign(half_q)).cbrt();
        let t = if u == 0.0 { 0.0 } else { u - third_p / u };
        vec![t - shift]
    } else if p == 0.0 {
        vec![-shift; 3]
    } else {
        let r = (-third_p).sqrt();
        let cos_arg = (-half_q / (r * r * r)).clamp(-1.0, 1.0);
        let phi = cos_arg.acos() / 3.0;
        (0..3)
            .map(|k| 2.0 * r * (phi - 2.0 * PI * k as f64 / 3.0).cos() - shift)
            .collect()
    };

    for x in roots.iter_mut() {
        *x = polish(coeffs, *x);
    }
    roots.sort_by(f64::total_cmp);
    roots
}

/// The largest real root. Every cubic with a nonzero leading coefficient has
/// at least one, so this is `None` only for degenerate input.
pub fn largest_real_root(a: f64, b: f64, c: f64, d: f64) -> Option<f64> {
    real_roots(a, b, c, d).into_iter().reduce(f64::max)
}

/// Bisection for a sign change of the cubic on `[lo, hi]`.
pub fn bisect_root(coeffs: [f64; 4], mut lo: f64, mut hi: f64) -> f64 {
    let (mut flo, _) = eval(coeffs, lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (fm, _) = eval(coeffs, mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
