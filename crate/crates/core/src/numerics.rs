//! Shared numerical machinery: Gauss–Legendre quadrature, tabulated functions
//! with cubic interpolation, complete elliptic integrals, deterministic
//! parallel reductions, and log-log slope fits.

use rayon::prelude::*;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on [-1, 1].
///
/// Computed by Newton iteration on the Legendre recurrence; accurate to
/// machine precision for the orders used here (≤ 64).
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1);
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-based initial guess.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre P_n(x) and derivative via recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for j in 2..=n {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Fixed-order Gauss–Legendre integral of `f` over [a, b] split into `panels`.
pub fn integrate_panels<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize, order: usize) -> f64 {
    let (x, w) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let c = lo + 0.5 * h;
        let s = 0.5 * h;
        let mut acc = 0.0;
        for (xi, wi) in x.iter().zip(&w) {
            acc += wi * f(c + s * xi);
        }
        total += acc * s;
    }
    total
}

/// Panel-doubling quadrature: doubles the panel count until the relative
/// change drops below `tol_rel` (with `floor` as the absolute scale guard).
///
/// Returns the value and the last observed change as an error estimate.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    tol_rel: f64,
    floor: f64,
) -> (f64, f64) {
    let order = 16;
    let mut panels = 1;
    let mut prev = integrate_panels(&f, a, b, panels, order);
    for _ in 0..14 {
        panels *= 2;
        let next = integrate_panels(&f, a, b, panels, order);
        let change = (next - prev).abs();
        let scale = next.abs().max(floor);
        if change <= tol_rel * scale {
            return (next, change);
        }
        prev = next;
    }
    (prev, f64::INFINITY)
}

/// Like [`integrate_adaptive`] but errors out if the target is not reached.
pub fn integrate_checked<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    tol_rel: f64,
    floor: f64,
    what: &str,
) -> Result<f64> {
    let (value, est) = integrate_adaptive(f, a, b, tol_rel, floor);
    if est.is_finite() {
        Ok(value)
    } else {
        Err(Error::Numerical(format!(
            "{what}: quadrature did not converge (last change {est:.3e})"
        )))
    }
}

/// Uniformly sampled function table interpolated by a not-a-knot cubic
/// spline. Evaluation clamps to the table range.
#[derive(Debug, Clone)]
pub struct UniformTable {
    x0: f64,
    dx: f64,
    values: Vec<f64>,
    /// Spline second derivatives at the nodes.
    d2: Vec<f64>,
}

impl UniformTable {
    pub fn build<F: Fn(f64) -> f64>(x0: f64, x1: f64, n: usize, f: F) -> Self {
        assert!(n >= 4 && x1 > x0);
        let dx = (x1 - x0) / (n - 1) as f64;
        let values: Vec<f64> = (0..n).map(|i| f(x0 + i as f64 * dx)).collect();
        Self::from_values(x0, dx, values)
    }

    pub fn from_values(x0: f64, dx: f64, values: Vec<f64>) -> Self {
        assert!(values.len() >= 4 && dx > 0.0);
        let d2 = spline_second_derivatives(&values, dx);
        UniformTable { x0, dx, values, d2 }
    }

    pub fn x_max(&self) -> f64 {
        self.x0 + self.dx * (self.values.len() - 1) as f64
    }

    pub fn x_min(&self) -> f64 {
        self.x0
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.values.len();
        let t = ((x - self.x0) / self.dx).clamp(0.0, (n - 1) as f64);
        let i = (t.floor() as usize).min(n - 2);
        let a = (i + 1) as f64 - t;
        let b = t - i as f64;
        let h2 = self.dx * self.dx / 6.0;
        a * self.values[i]
            + b * self.values[i + 1]
            + ((a * a * a - a) * self.d2[i] + (b * b * b - b) * self.d2[i + 1]) * h2
    }

    /// Second derivative of the spline (piecewise linear in x).
    pub fn eval_second(&self, x: f64) -> f64 {
        let n = self.values.len();
        let t = ((x - self.x0) / self.dx).clamp(0.0, (n - 1) as f64);
        let i = (t.floor() as usize).min(n - 2);
        let a = (i + 1) as f64 - t;
        let b = t - i as f64;
        a * self.d2[i] + b * self.d2[i + 1]
    }

    /// First derivative of the spline.
    pub fn eval_deriv(&self, x: f64) -> f64 {
        let n = self.values.len();
        let t = ((x - self.x0) / self.dx).clamp(0.0, (n - 1) as f64);
        let i = (t.floor() as usize).min(n - 2);
        let a = (i + 1) as f64 - t;
        let b = t - i as f64;
        (self.values[i + 1] - self.values[i]) / self.dx
            + self.dx / 6.0
                * ((3.0 * b * b - 1.0) * self.d2[i + 1] - (3.0 * a * a - 1.0) * self.d2[i])
    }
}

/// Not-a-knot cubic spline second derivatives on a uniform grid
/// (tridiagonal Thomas solve with the not-a-knot end rows eliminated).
fn spline_second_derivatives(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    let h2 = h * h;
    // Interior equations: m[i-1] + 4 m[i] + m[i+1] = 6(y[i-1]-2y[i]+y[i+1])/h²
    // Not-a-knot: m0 = 2 m1 − m2 and m[n-1] = 2 m[n-2] − m[n-3].
    let mut diag = vec![4.0; n - 2];
    let mut rhs: Vec<f64> = (1..n - 1)
        .map(|i| 6.0 * (y[i - 1] - 2.0 * y[i] + y[i + 1]) / h2)
        .collect();
    // Fold the end conditions into the first/last interior rows.
    diag[0] = 6.0; // 4 + 2(from m0) ... m0+4m1+m2 → (2m1−m2)+4m1+m2 = 6m1
    let m = n - 2;
    diag[m - 1] = 6.0;
    let mut sub = vec![1.0; m];
    let mut sup = vec![1.0; m];
    sup[0] = 0.0; // m2 coefficient cancelled by not-a-knot at the left end
    sub[m - 1] = 0.0;
    // Thomas algorithm.
    for i in 1..m {
        let w = sub[i] / diag[i - 1];
        diag[i] -= w * sup[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    let mut mi = vec![0.0; m];
    mi[m - 1] = rhs[m - 1] / diag[m - 1];
    for i in (0..m - 1).rev() {
        mi[i] = (rhs[i] - sup[i] * mi[i + 1]) / diag[i];
    }
    let mut d2 = vec![0.0; n];
    d2[1..(m + 1)].copy_from_slice(&mi);
    d2[0] = 2.0 * d2[1] - d2[2];
    d2[n - 1] = 2.0 * d2[n - 2] - d2[n - 3];
    d2
}

/// Complete elliptic integral of the first kind K(m), parameter m = k².
///
/// Arithmetic-geometric mean; relative accuracy ~1e-15 for m ∈ [0, 1).
pub fn elliptic_k(m: f64) -> f64 {
    debug_assert!((0.0..1.0).contains(&m));
    let mut a = 1.0_f64;
    let mut b = (1.0 - m).sqrt();
    for _ in 0..40 {
        if (a - b).abs() <= 1e-16 * a {
            break;
        }
        let an = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = an;
    }
    PI / (2.0 * a)
}

/// Complete elliptic integrals K(m) and E(m) together (AGM with the c-sum).
pub fn elliptic_ke(m: f64) -> (f64, f64) {
    debug_assert!((0.0..1.0).contains(&m));
    let mut a = 1.0_f64;
    let mut b = (1.0 - m).sqrt();
    let mut c = m.sqrt();
    let mut sum = 0.5 * c * c;
    let mut pow2 = 1.0;
    for _ in 0..40 {
        if c.abs() <= 1e-16 {
            break;
        }
        let an = 0.5 * (a + b);
        let cn = 0.5 * (a - b);
        b = (a * b).sqrt();
        a = an;
        c = cn;
        pow2 *= 2.0;
        sum += 0.5 * pow2 * c * c;
    }
    let k = PI / (2.0 * a);
    let e = k * (1.0 - sum);
    (k, e)
}

/// Azimuthal integrals over the squashed Coulomb kernel:
/// I1 = ∫₀^{2π} (p − q cosψ)^{-1/2} dψ,
/// I3 = ∫₀^{2π} (p − q cosψ)^{-3/2} dψ,
/// I3c = ∫₀^{2π} cosψ (p − q cosψ)^{-3/2} dψ,  requiring p > q ≥ 0.
pub fn azimuthal_kernel_integrals(p: f64, q: f64) -> (f64, f64, f64) {
    debug_assert!(p > 0.0 && q >= 0.0);
    if q <= 1e-300 {
        let i1 = 2.0 * PI / p.sqrt();
        let i3 = 2.0 * PI / (p * p.sqrt());
        return (i1, i3, 0.0);
    }
    let apb = p + q;
    let amb = p - q;
    debug_assert!(amb > 0.0);
    let m = 2.0 * q / apb;
    let (k, e) = elliptic_ke(m);
    let s = apb.sqrt();
    let i1 = 4.0 * k / s;
    let i3 = 4.0 * e / (amb * s);
    let i3c = 4.0 / (q * s) * (p * e / amb - k);
    (i1, i3, i3c)
}

/// Deterministic parallel sum: fixed-size chunks are reduced in parallel and
/// the per-chunk partials are folded sequentially in index order, so the
/// result is bit-identical for any thread count.
pub fn det_sum<F>(len: usize, term: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    const CHUNK: usize = 8192;
    let chunks = len.div_ceil(CHUNK).max(1);
    let partials: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = ((c + 1) * CHUNK).min(len);
            let mut acc = 0.0;
            for i in lo..hi {
                acc += term(i);
            }
            acc
        })
        .collect();
    partials.iter().sum()
}

/// Deterministic parallel sum of fixed-width vectors (see [`det_sum`]).
pub fn det_sum_array<const W: usize, F>(len: usize, term: F) -> [f64; W]
where
    F: Fn(usize) -> [f64; W] + Sync,
{
    const CHUNK: usize = 8192;
    let chunks = len.div_ceil(CHUNK).max(1);
    let partials: Vec<[f64; W]> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = ((c + 1) * CHUNK).min(len);
            let mut acc = [0.0; W];
            for i in lo..hi {
                let t = term(i);
                for (a, b) in acc.iter_mut().zip(&t) {
                    *a += b;
                }
            }
            acc
        })
        .collect();
    let mut out = [0.0; W];
    for p in partials {
        for (a, b) in out.iter_mut().zip(&p) {
            *a += b;
        }
    }
    out
}

/// Least-squares line fit y = slope·x + intercept with the standard error of
/// the slope. Needs at least two points (three for a finite error estimate).
#[derive(Debug, Clone, Copy)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "line fit needs >= 2 matched points, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter(
            "line fit: degenerate abscissae".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let stderr = if xs.len() > 2 {
        let ss_res: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, y)| {
                let r = y - (slope * x + intercept);
                r * r
            })
            .sum();
        (ss_res / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(LineFit {
        slope,
        intercept,
        slope_stderr: stderr,
    })
}

/// Slope of log(y) against log(x); the workhorse behind every
/// convergence-order check in the test suites.
pub fn fit_loglog_slope(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.iter().any(|&x| x <= 0.0) || ys.iter().any(|&y| y <= 0.0) {
        return Err(Error::InvalidParameter(
            "log-log fit requires strictly positive data".into(),
        ));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    fit_line(&lx, &ly)
}
