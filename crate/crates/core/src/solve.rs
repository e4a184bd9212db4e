//! Bracketed scalar root finding (Brent's method).

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub(crate) struct RootTol {
    /// Stop once `|f(x)| <= f_tol`.
    pub f_tol: f64,
    /// Stop once the bracket is narrower than `x_tol * (1 + |x|)`.
    pub x_tol: f64,
    pub max_iter: usize,
}

/// Finds a root of `f` in `[a, b]`; `f(a)` and `f(b)` must differ in sign.
pub(crate) fn brent<F: FnMut(f64) -> Result<f64>>(
    mut f: F,
    mut a: f64,
    mut b: f64,
    tol: RootTol,
) -> Result<f64> {
    let mut fa = f(a)?;
    let mut fb = f(b)?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Numerical(format!(
            "root not bracketed: f({a}) = {fa:e}, f({b}) = {fb:e}"
        )));
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..tol.max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let x_tol = 0.5 * tol.x_tol * (1.0 + b.abs()) + 2.0 * f64::EPSILON * b.abs();
        let m = 0.5 * (c - b);
        if fb.abs() <= tol.f_tol || m.abs() <= x_tol {
            return Ok(b);
        }
        if e.abs() >= x_tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (x_tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > x_tol { d } else { x_tol.copysign(m) };
        fb = f(b)?;
    }
    Err(Error::Numerical(format!(
        "root finding did not converge after {} iterations",
        tol.max_iter
    )))
}
