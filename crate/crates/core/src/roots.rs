//! Bracketed root finding for nondecreasing scalar maps.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Finds `x` in `[lo, hi]` with `|f(x)| <= ftol` for a nondecreasing `f`
/// with `f(lo) <= 0 <= f(hi)`.
///
/// Each iteration proposes a secant point inside the current bracket and
/// falls back to bisection whenever the secant step fails to halve the
/// bracket, so convergence is never slower than plain bisection.
pub fn nondecreasing_root<F>(mut f: F, lo: f64, hi: f64, ftol: f64, max_iter: usize) -> Result<Root>
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if !fa.is_finite() || !fb.is_finite() {
        return Err(Error::Domain(format!(
            "non-finite value on bracket [{a}, {b}]: f = ({fa}, {fb})"
        )));
    }
    if fa > 0.0 || fb < 0.0 {
        return Err(Error::Domain(format!(
            "no sign change on [{a}, {b}]: f = ({fa}, {fb})"
        )));
    }
    if fa.abs() <= ftol {
        return Ok(Root { x: a, residual: fa, iterations: 0 });
    }
    if fb.abs() <= ftol {
        return Ok(Root { x: b, residual: fb, iterations: 0 });
    }

    let mut use_secant = true;
    for it in 1..=max_iter {
        let width = b - a;
        let mut x = if use_secant && fb > fa {
            a - fa * width / (fb - fa)
        } else {
            0.5 * (a + b)
        };
        if !(x > a && x < b) {
            x = 0.5 * (a + b);
        }
        let fx = f(x);
        if !fx.is_finite() {
            return Err(Error::Domain(format!("non-finite value f({x}) = {fx}")));
        }
        if fx.abs() <= ftol || width <= f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) {
            return Ok(Root { x, residual: fx, iterations: it });
        }
        if fx < 0.0 {
            a = x;
            fa = fx;
        } else {
            b = x;
            fb = fx;
        }
        use_secant = (b - a) <= 0.5 * width;
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: fa.abs().min(fb.abs()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_square_root() {
        let r = nondecreasing_root(|x| x * x - 2.0, 0.0, 2.0, 1e-14, 200).unwrap();
        assert!((r.x - 2f64.sqrt()).abs() < 1e-13);
        assert!(r.iterations < 40);
    }

    #[test]
    fn handles_flat_pieces() {
        // clamp-like map that is flat on [1, 3]
        let f = |x: f64| x.min(1.0) + (x - 3.0).max(0.0) - 1.5;
        let r = nondecreasing_root(f, 0.0, 5.0, 1e-12, 200).unwrap();
        assert!((r.x - 3.5).abs() < 1e-11);
    }

    #[test]
    fn rejects_missing_sign_change() {
        assert!(nondecreasing_root(|x| x + 1.0, 0.0, 1.0, 1e-12, 50).is_err());
    }

    #[test]
    fn endpoint_roots() {
        let r = nondecreasing_root(|x| x, 0.0, 1.0, 1e-12, 50).unwrap();
        assert_eq!(r.x, 0.0);
    }
}
