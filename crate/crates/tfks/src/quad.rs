//! Small adaptive quadrature helper used by the special-function evaluations.

/// Adaptive Simpson integration of `f` on `[a, b]` to absolute tolerance `tol`.
///
/// Recursion depth is capped; on hitting the cap the best available estimate
/// is kept, which is adequate for the smooth integrands this crate feeds in.
pub(crate) fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let c = 0.5 * (a + b);
    let fa = f(a);
    let fb = f(b);
    let fc = f(c);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fc + fb);
    simpson_step(f, a, b, fa, fb, fc, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
    fc: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let c = 0.5 * (a + b);
    let d = 0.5 * (a + c);
    let e = 0.5 * (c + b);
    let fd = f(d);
    let fe = f(e);
    let left = (c - a) / 6.0 * (fa + 4.0 * fd + fc);
    let right = (b - c) / 6.0 * (fc + 4.0 * fe + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_step(f, a, c, fa, fc, fd, left, 0.5 * tol, depth - 1)
            + simpson_step(f, c, b, fc, fb, fe, right, 0.5 * tol, depth - 1)
    }
}

/// Integrate `f` over `[0, inf)` by adaptive Simpson on geometric panels,
/// stopping once a panel contributes less than `tol` and the integrand has
/// decayed below `tol` at the panel end.
pub(crate) fn integrate_to_infinity<F: Fn(f64) -> f64>(f: &F, first_break: f64, tol: f64) -> f64 {
    let mut total = 0.0;
    let mut lo = 0.0;
    let mut hi = first_break.max(1e-8);
    loop {
        let part = adaptive_simpson(f, lo, hi, tol);
        total += part;
        if part.abs() < tol && f(hi).abs() < tol {
            break;
        }
        lo = hi;
        hi *= 4.0;
        if hi > 1e12 {
            break;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_polynomial_is_near_exact() {
        let f = |x: f64| x * x * x - 2.0 * x + 1.0;
        let got = adaptive_simpson(&f, 0.0, 2.0, 1e-14);
        assert!((got - 2.0).abs() < 1e-12);
    }

    #[test]
    fn integrates_decaying_tail() {
        let f = |x: f64| (-x).exp();
        let got = integrate_to_infinity(&f, 1.0, 1e-13);
        assert!((got - 1.0).abs() < 1e-10);
    }
}
