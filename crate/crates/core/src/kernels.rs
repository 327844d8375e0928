//! Convolution kernels of the force expansion and direct-quadrature oracles
//! for the retarded force integrals.
//!
//! Everything here is built on the radial autocorrelation of the form factor,
//! c(z) = ∫φ(x)φ(x+z)d³x, which reduces the 6D double convolutions to one- or
//! two-dimensional quadratures:
//!
//!   A_p(ξ) = (4π)⁻¹ ∫∫ φ(x)φ(y) |ξ+x−y|^(p−1) dx dy
//!          = (4π)⁻¹ ∫ c(z) |ξ+z|^(p−1) d³z,        B_p = −p·A_{p−1},
//!
//! and the retarded integrands reduce through the spherical-shell kernel
//! ψ_τ (surface density (4π|x|)⁻¹ on |x| = τ, zero elsewhere) to the overlap
//! function Λ(w, τ) = (c ∗ ψ_τ)(w) evaluated from a cumulative table.

use nalgebra::Vector3;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::formfactor::FormFactor;
use crate::numerics::{gauss_legendre, integrate_panels, UniformTable};

/// Radial autocorrelation c(|z|) of the form factor, with its cumulative
/// moment ∫₀^x ρ c(ρ) dρ, tabulated once to ~1e-10 and spline-interpolated.
#[derive(Debug, Clone)]
pub struct Autocorrelation {
    support: f64,
    c: UniformTable,
    /// Cc(x) = ∫₀^x ρ c(ρ) dρ
    cum: UniformTable,
    cum_total: f64,
    /// ∫ c d³z = (∫φ)²
    norm3d: f64,
    /// ∫ c z² d³z
    second_moment: f64,
}

impl Autocorrelation {
    pub fn build(ff: &FormFactor) -> Autocorrelation {
        let r_max = ff.support_radius();
        let support = 2.0 * r_max;
        let nodes = 12288;

        // Cumulative radial moment P(x) = ∫₀^x t φ(t) dt, accumulated on a
        // fine grid so the shell-overlap differences below cost two spline
        // evaluations instead of a nested quadrature.
        let pn = 16384;
        let ph = r_max / (pn - 1) as f64;
        let mut pv = Vec::with_capacity(pn);
        let mut acc = 0.0;
        pv.push(0.0);
        for i in 1..pn {
            let lo = (i - 1) as f64 * ph;
            acc += integrate_panels(|t| t * ff.profile(t), lo, lo + ph, 1, 12);
            pv.push(acc);
        }
        let pcum = UniformTable::from_values(0.0, ph, pv);
        let p_of = |x: f64| {
            if x <= 0.0 {
                0.0
            } else if x >= r_max {
                acc
            } else {
                pcum.eval(x)
            }
        };

        let c_of = |s: f64| -> f64 {
            if s <= 0.0 {
                // c(0) = ∫φ² d³x
                return integrate_panels(
                    |r| 4.0 * PI * r * r * ff.profile(r) * ff.profile(r),
                    0.0,
                    r_max,
                    64,
                    16,
                );
            }
            if s >= support {
                return 0.0;
            }
            // c(s) = (2π/s) ∫ r φ(r) [P(min(r+s,R)) − P(|r−s|)] dr,
            // split where the inner bounds kink.
            let mut cuts = vec![0.0, r_max];
            if s < r_max {
                cuts.push(s);
                cuts.push(r_max - s);
            } else {
                cuts.push(s - r_max);
            }
            cuts.retain(|&x| (0.0..=r_max).contains(&x));
            cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
            let mut total = 0.0;
            for seg in cuts.windows(2) {
                let (a, b) = (seg[0], seg[1]);
                if b - a < 1e-15 {
                    continue;
                }
                total += integrate_panels(
                    |r| r * ff.profile(r) * (p_of((r + s).min(r_max)) - p_of((r - s).abs())),
                    a,
                    b,
                    16,
                    16,
                );
            }
            2.0 * PI / s * total
        };

        let c = UniformTable::build(0.0, support, nodes, c_of);

        // Cumulative ∫ ρ c(ρ) dρ accumulated across the table grid.
        let h = support / (nodes - 1) as f64;
        let mut cum_vals = Vec::with_capacity(nodes);
        let mut acc = 0.0;
        cum_vals.push(0.0);
        for i in 1..nodes {
            let lo = (i - 1) as f64 * h;
            acc += integrate_panels(|x| x * c.eval(x), lo, lo + h, 1, 8);
            cum_vals.push(acc);
        }
        let cum = UniformTable::from_values(0.0, h, cum_vals);
        let cum_total = acc;

        let norm3d = integrate_panels(|x| 4.0 * PI * x * x * c.eval(x), 0.0, support, 64, 16);
        let second_moment =
            integrate_panels(|x| 4.0 * PI * x.powi(4) * c.eval(x), 0.0, support, 64, 16);

        Autocorrelation {
            support,
            c,
            cum,
            cum_total,
            norm3d,
            second_moment,
        }
    }

    /// Support radius of c, i.e. 2R_φ.
    pub fn support(&self) -> f64 {
        self.support
    }

    /// ∫ c d³z; equals (∫φ)² = 1 for the normalized form factor.
    pub fn norm3d(&self) -> f64 {
        self.norm3d
    }

    /// ∫ c z² d³z, the leading smearing correction of A₂.
    pub fn second_moment(&self) -> f64 {
        self.second_moment
    }

    pub fn eval(&self, s: f64) -> f64 {
        if s >= self.support {
            0.0
        } else {
            self.c.eval(s)
        }
    }

    fn eval_deriv(&self, s: f64) -> f64 {
        if s >= self.support {
            0.0
        } else {
            self.c.eval_deriv(s)
        }
    }

    fn eval_second(&self, s: f64) -> f64 {
        if s >= self.support {
            0.0
        } else {
            self.c.eval_second(s)
        }
    }

    fn lambda_w_shell(&self, w: f64, tau: f64) -> f64 {
        if w < 1e-12 * self.support {
            let g2 = 2.0 * self.eval_deriv(tau) + tau * self.eval_second(tau);
            return w * g2 / 3.0;
        }
        let (gx, gw) = shell_quad_nodes();
        let mut acc = 0.0;
        for (mu, qw) in gx.iter().zip(gw) {
            let rho = (w * w + tau * tau - 2.0 * w * tau * mu).sqrt();
            acc += qw * self.eval_deriv(rho) * (w - tau * mu) / rho;
        }
        0.5 * tau * acc
    }

    fn cum_eval(&self, x: f64) -> f64 {
        if x >= self.support {
            self.cum_total
        } else {
            self.cum.eval(x)
        }
    }

    /// Shell overlap Λ(w, τ) = (c ∗ ψ_τ)(w) together with ∂Λ/∂w and ∂Λ/∂τ.
    ///
    /// Λ(w, τ) = [Cc(w+τ) − Cc(|w−τ|)] / 2w, nonzero only for |w−τ| < 2R_φ.
    pub fn shell_overlap(&self, w: f64, tau: f64) -> (f64, f64, f64) {
        let lo = (w - tau).abs();
        if lo >= self.support || tau <= 0.0 {
            return (0.0, 0.0, 0.0);
        }
        let hi = w + tau;
        if w < 1e-9 * self.support {
            // Even limit in w: Λ → τ c(τ), ∂Λ/∂w → O(w), ∂Λ/∂τ → (τc)'.
            let lam = tau * self.eval(tau);
            let lam_tau = self.eval(tau) + tau * self.eval_deriv(tau);
            return (lam, 0.0, lam_tau);
        }
        let g_hi = hi * self.eval(hi);
        let g_lo = lo * self.eval(lo);
        let lam = (self.cum_eval(hi) - self.cum_eval(lo)) / (2.0 * w);
        let s_w = if w >= tau { 1.0 } else { -1.0 };
        // The direct ∂Λ/∂w is a difference of O(Λ/w) terms cancelling to
        // O(w); below w ≈ 0.004·2R_φ evaluate the cancellation-free
        // shell-average form Λ_w = (τ/2)∫ c'(ρ)(w−τμ)/ρ dμ instead.
        let lam_w = if w < 0.004 * self.support && w < tau {
            self.lambda_w_shell(w, tau)
        } else {
            (g_hi - s_w * g_lo) / (2.0 * w) - lam / w
        };
        let lam_tau = (g_hi + s_w * g_lo) / (2.0 * w);
        (lam, lam_w, lam_tau)
    }
}

fn shell_quad_nodes() -> &'static (Vec<f64>, Vec<f64>) {
    static NODES: std::sync::OnceLock<(Vec<f64>, Vec<f64>)> = std::sync::OnceLock::new();
    NODES.get_or_init(|| gauss_legendre(32))
}

/// The spherical-shell propagator kernel ψ_τ: surface density (4π|x|)⁻¹
/// concentrated on |x| = τ. Its total surface integral is τ.
#[derive(Debug, Clone, Copy)]
pub struct RetardedShellKernel {
    pub tau: f64,
}

impl RetardedShellKernel {
    /// ∫ ψ_τ dS = 4πτ² · (4πτ)⁻¹ = τ.
    pub fn surface_integral(&self) -> f64 {
        self.tau
    }

    /// (c ∗ ψ_τ)(w): the shell average entering every retarded integrand.
    pub fn convolve(&self, acorr: &Autocorrelation, w: f64) -> f64 {
        acorr.shell_overlap(w, self.tau).0
    }
}

/// A_p(|ξ|) by the radial 1D reduction of the double convolution.
///
/// Valid for p ∈ {0, 1, 2, 3} (the orders the force expansion uses).
pub fn kernel_a(acorr: &Autocorrelation, p: u32, xi: f64) -> Result<f64> {
    if p > 3 {
        return Err(Error::InvalidParameter(format!(
            "kernel order p = {p} out of the supported range 0..=3"
        )));
    }
    if !(xi > 0.0) {
        return Err(Error::InvalidParameter(
            "kernel_a requires |ξ| > 0".into(),
        ));
    }
    let q = p as i32 + 1;
    let f = |r: f64| {
        let hp = (xi + r).powi(q) - (xi - r).abs().powi(q);
        r * acorr.eval(r) * hp
    };
    let split = xi.min(acorr.support());
    let mut total = integrate_with_split(&f, 0.0, acorr.support(), split);
    total /= 2.0 * q as f64 * xi;
    Ok(total)
}

/// B_p via the identity B_p = −p·A_{p−1}; B_0 = 0.
pub fn kernel_b(acorr: &Autocorrelation, p: u32, xi: f64) -> Result<f64> {
    if p == 0 {
        return Ok(0.0);
    }
    Ok(-(p as f64) * kernel_a(acorr, p - 1, xi)?)
}

fn integrate_with_split<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, split: f64) -> f64 {
    if split > a && split < b {
        integrate_panels(&f, a, split, 24, 24) + integrate_panels(&f, split, b, 24, 24)
    } else {
        integrate_panels(&f, a, b, 32, 24)
    }
}

/// ∇_ξ A₀ by quadrature of the differentiated integrand (2D in (r, μ)),
/// together with the residual against the point-charge law −ξ/4π|ξ|³.
pub fn grad_a0_residual(
    acorr: &Autocorrelation,
    xi: &Vector3<f64>,
) -> Result<(Vector3<f64>, Vector3<f64>)> {
    let xin = xi.norm();
    if !(xin > 2.0 * 0.0) || xin == 0.0 {
        return Err(Error::InvalidParameter(
            "grad_a0_residual requires |ξ| > 0".into(),
        ));
    }
    let n_hat = xi / xin;
    // radial component of −(1/2)∫ dr r²c(r) ∫ dμ (ξ+rμ)(ξ²+r²+2ξrμ)^{-3/2};
    // the transverse components vanish by azimuthal symmetry.
    let (gmu, wmu) = gauss_legendre(32);
    let f = |r: f64| {
        let mut acc = 0.0;
        for (x, w) in gmu.iter().zip(&wmu) {
            let mu = *x;
            let d2 = xin * xin + r * r + 2.0 * xin * r * mu;
            acc += w * (xin + r * mu) / (d2 * d2.sqrt());
        }
        r * r * acorr.eval(r) * acc
    };
    let radial = -0.5 * integrate_with_split(f, 0.0, acorr.support(), xin);
    let grad = n_hat * radial;
    let residual = grad + xi / (4.0 * PI * xin.powi(3));
    Ok((grad, residual))
}

/// Radial-profile derivatives of A_p for the expansion assembly:
/// returns (a, a', a'', a''') at |ξ| = xi, valid outside the overlap region.
pub fn kernel_a_derivs(acorr: &Autocorrelation, p: u32, xi: f64) -> Result<[f64; 4]> {
    if p > 3 {
        return Err(Error::InvalidParameter(format!(
            "kernel order p = {p} out of the supported range 0..=3"
        )));
    }
    if xi <= acorr.support() {
        return Err(Error::InvalidParameter(format!(
            "kernel_a_derivs needs |ξ| > 2R_φ = {}, got {xi}",
            acorr.support()
        )));
    }
    let q = p as i32 + 1;
    // I_j = ∫ r c(r) d^j/dξ^j [(ξ+r)^{p+1} − (ξ−r)^{p+1}] dr
    let mut i_j = [0.0_f64; 4];
    for (j, slot) in i_j.iter_mut().enumerate() {
        let j = j as i32;
        if j > q {
            *slot = 0.0;
            continue;
        }
        let mut fact = 1.0;
        for step in 0..j {
            fact *= (q - step) as f64;
        }
        let f = |r: f64| {
            let hp = (xi + r).powi(q - j) - (xi - r).powi(q - j);
            r * acorr.eval(r) * fact * hp
        };
        *slot = integrate_panels(f, 0.0, acorr.support(), 32, 24);
    }
    let c = 1.0 / (2.0 * q as f64);
    let [i0, i1, i2, i3] = i_j;
    let a = c * i0 / xi;
    let a1 = c * (i1 / xi - i0 / (xi * xi));
    let a2 = c * (i2 / xi - 2.0 * i1 / (xi * xi) + 2.0 * i0 / xi.powi(3));
    let a3 = c * (i3 / xi - 3.0 * i2 / (xi * xi) + 6.0 * i1 / xi.powi(3) - 6.0 * i0 / xi.powi(4));
    Ok([a, a1, a2, a3])
}

/// ∇f for radial f: f'(|ξ|) n̂.
pub fn radial_gradient(f1: f64, xi: &Vector3<f64>) -> Vector3<f64> {
    xi / xi.norm() * f1
}

/// (v·∇)∇f for radial f.
pub fn radial_hessian_apply(f1: f64, f2: f64, xi: &Vector3<f64>, v: &Vector3<f64>) -> Vector3<f64> {
    let r = xi.norm();
    let n = xi / r;
    let vn = v.dot(&n);
    n * (f2 * vn) + (v - n * vn) * (f1 / r)
}

/// (v·∇)²∇f for radial f.
pub fn radial_third_apply(
    f1: f64,
    f2: f64,
    f3: f64,
    xi: &Vector3<f64>,
    v: &Vector3<f64>,
) -> Vector3<f64> {
    let r = xi.norm();
    let n = xi / r;
    let vn = v.dot(&n);
    let a = f3 - 3.0 * f2 / r + 3.0 * f1 / (r * r);
    let b = (f2 - f1 / r) / r;
    n * (a * vn * vn) + (v * (2.0 * vn) + n * v.norm_squared()) * b
}

/// The seven-term closed form of the mutual interaction force (the kernel
/// without the e_α e_β weight):
///
/// F = ξ/4π|ξ|³ − v̇_β/8π|ξ| − (v̇_β·ξ)ξ/8π|ξ|³ + v_β²ξ/8π|ξ|³
///     − 3(v_β·ξ)²ξ/8π|ξ|⁵ − (v_α·v_β)ξ/4π|ξ|³ + (v_α·ξ)v_β/4π|ξ|³.
pub fn mutual_force_closed(
    xi: &Vector3<f64>,
    v_alpha: &Vector3<f64>,
    v_beta: &Vector3<f64>,
    vdot_beta: &Vector3<f64>,
) -> Result<Vector3<f64>> {
    let r = xi.norm();
    if r == 0.0 {
        return Err(Error::InvalidParameter(
            "mutual_force_closed: coincident positions (ξ = 0)".into(),
        ));
    }
    let r3 = r * r * r;
    let r5 = r3 * r * r;
    let coulomb = xi / (4.0 * PI * r3);
    let acc1 = -vdot_beta / (8.0 * PI * r);
    let acc2 = -xi * (vdot_beta.dot(xi) / (8.0 * PI * r3));
    let vel1 = xi * (v_beta.norm_squared() / (8.0 * PI * r3));
    let vel2 = -xi * (3.0 * v_beta.dot(xi).powi(2) / (8.0 * PI * r5));
    let vel3 = -xi * (v_alpha.dot(v_beta) / (4.0 * PI * r3));
    let vel4 = v_beta * (v_alpha.dot(xi) / (4.0 * PI * r3));
    Ok(coulomb + acc1 + acc2 + vel1 + vel2 + vel3 + vel4)
}

/// Closed form of the self-force (the kernel without the e_α² weight):
/// −(4/3 + (8/15)v²) m_e v̇ − (16/15) m_e (v·v̇) v.
pub fn self_force_closed(v: &Vector3<f64>, vdot: &Vector3<f64>, m_e: f64) -> Vector3<f64> {
    let v2 = v.norm_squared();
    -vdot * ((4.0 / 3.0 + 8.0 / 15.0 * v2) * m_e) - v * (16.0 / 15.0 * m_e * v.dot(vdot))
}

/// Prescribed smooth particle path with exact retarded evaluations.
#[derive(Debug, Clone)]
pub enum Trajectory {
    /// q(s) = q0 + v s
    Line { q0: Vector3<f64>, v: Vector3<f64> },
    /// q(s) = q0 + v s + amp sin(ω s + phase)
    Wiggle {
        q0: Vector3<f64>,
        v: Vector3<f64>,
        amp: Vector3<f64>,
        omega: f64,
        phase: f64,
    },
    /// q(s) = q0 + v0 s + a s²/2 (valid while |v0 + a s| < 1)
    Quadratic {
        q0: Vector3<f64>,
        v0: Vector3<f64>,
        a: Vector3<f64>,
    },
    /// Uniformly sampled (position, velocity) pairs joined by cubic Hermite
    /// segments with the stored velocities as slopes.
    Sampled {
        t0: f64,
        dt: f64,
        samples: Vec<(Vector3<f64>, Vector3<f64>)>,
    },
}

impl Trajectory {
    pub fn position(&self, s: f64) -> Vector3<f64> {
        self.eval(s).0
    }

    pub fn eval(&self, s: f64) -> (Vector3<f64>, Vector3<f64>) {
        match self {
            Trajectory::Line { q0, v } => (q0 + v * s, *v),
            Trajectory::Wiggle {
                q0,
                v,
                amp,
                omega,
                phase,
            } => {
                let ph = omega * s + phase;
                (
                    q0 + v * s + amp * ph.sin(),
                    v + amp * (omega * ph.cos()),
                )
            }
            Trajectory::Quadratic { q0, v0, a } => (q0 + v0 * s + a * (0.5 * s * s), v0 + a * s),
            Trajectory::Sampled { t0, dt, samples } => {
                let t = ((s - t0) / dt).clamp(0.0, (samples.len() - 1) as f64);
                let i = (t.floor() as usize).min(samples.len() - 2);
                let u = t - i as f64;
                let (p0, v0) = samples[i];
                let (p1, v1) = samples[i + 1];
                let (m0, m1) = (v0 * *dt, v1 * *dt);
                let u2 = u * u;
                let u3 = u2 * u;
                let pos = p0 * (2.0 * u3 - 3.0 * u2 + 1.0)
                    + m0 * (u3 - 2.0 * u2 + u)
                    + p1 * (-2.0 * u3 + 3.0 * u2)
                    + m1 * (u3 - u2);
                let vel = (p0 * (6.0 * u2 - 6.0 * u)
                    + m0 * (3.0 * u2 - 4.0 * u + 1.0)
                    + p1 * (-6.0 * u2 + 6.0 * u)
                    + m1 * (3.0 * u2 - 2.0 * u))
                    / *dt;
                (pos, vel)
            }
        }
    }

    pub fn acceleration(&self, s: f64) -> Vector3<f64> {
        match self {
            Trajectory::Line { .. } => Vector3::zeros(),
            Trajectory::Wiggle {
                amp, omega, phase, ..
            } => -amp * (omega * omega * (omega * s + phase).sin()),
            Trajectory::Quadratic { a, .. } => *a,
            Trajectory::Sampled { dt, .. } => {
                let h = 0.5 * dt;
                (self.eval(s + h).1 - self.eval(s - h).1) / (2.0 * h)
            }
        }
    }
}

/// Direct evaluation of the retarded force kernel F⁽ʳ⁾_{αβ}(t): the three
/// k-integral terms converted to a time integral over retarded shells of
/// radius τ = t−s weighted by the autocorrelation (the ψ_τ reduction).
/// Multiply by e_α e_β for the physical force contribution.
pub fn retarded_force_direct(
    acorr: &Autocorrelation,
    alpha: &Trajectory,
    beta: &Trajectory,
    t: f64,
    tol_rel: f64,
    tol_abs: f64,
) -> Result<Vector3<f64>> {
    let (q_a, v_a) = alpha.eval(t);
    let support = acorr.support();

    // θ(s) = (t−s) − |q_α(t) − q_β(s)| is strictly decreasing (|v| < 1); the
    // integrand is nonzero only in the retarded window |θ| < 2R_φ.
    let theta = |s: f64| (t - s) - (q_a - beta.position(s)).norm();
    let find_level = |target: f64| -> Result<f64> {
        // March backwards to bracket, then bisect.
        let mut hi = t;
        let mut lo = t;
        let mut step = support.max(1e-3);
        for _ in 0..200 {
            lo = hi - step;
            if theta(lo) >= target {
                break;
            }
            hi = lo;
            step *= 2.0;
        }
        if theta(lo) < target {
            return Err(Error::Numerical(
                "retarded window bracketing failed".into(),
            ));
        }
        let mut a = lo;
        let mut b = hi;
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if theta(m) >= target {
                a = m;
            } else {
                b = m;
            }
            if b - a < 1e-14 * (1.0 + t.abs()) {
                break;
            }
        }
        Ok(0.5 * (a + b))
    };

    let s_lo = find_level(support)?.max(0.0);
    let s_hi = if theta(t) >= -support {
        t
    } else {
        find_level(-support)?
    }
    .min(t);
    if s_hi <= s_lo {
        return Ok(Vector3::zeros());
    }

    let integrand = |s: f64| -> Vector3<f64> {
        let tau = t - s;
        let (q_b, v_b) = beta.eval(s);
        let w_vec = q_a - q_b;
        let w = w_vec.norm();
        let (_lam, lam_w, lam_tau) = acorr.shell_overlap(w, tau);
        if lam_w == 0.0 && lam_tau == 0.0 {
            return Vector3::zeros();
        }
        let grad = if w > 1e-12 {
            w_vec * (lam_w / w)
        } else {
            Vector3::zeros()
        };
        -v_b * lam_tau - grad + v_a.cross(&grad.cross(&v_b))
    };

    // Panel-doubling GL on the (smooth) windowed integrand.
    let (gx, gw) = gauss_legendre(16);
    let eval_panels = |panels: usize| -> Vector3<f64> {
        let h = (s_hi - s_lo) / panels as f64;
        let mut acc = Vector3::zeros();
        for p in 0..panels {
            let c = s_lo + (p as f64 + 0.5) * h;
            for (x, w) in gx.iter().zip(&gw) {
                acc += integrand(c + 0.5 * h * x) * (*w * 0.5 * h);
            }
        }
        acc
    };
    let mut panels = 8;
    let mut prev = eval_panels(panels);
    for _ in 0..8 {
        panels *= 2;
        let next = eval_panels(panels);
        let change = (next - prev).norm();
        if change <= (tol_rel * next.norm()).max(tol_abs) {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::Numerical(format!(
        "retarded force quadrature did not reach {tol_rel:.1e} at {panels} panels"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formfactor::ProfileKind;
    use approx::assert_relative_eq;
    use std::sync::OnceLock;

    fn setup() -> &'static (FormFactor, Autocorrelation) {
        static CELL: OnceLock<(FormFactor, Autocorrelation)> = OnceLock::new();
        CELL.get_or_init(|| {
            let ff = FormFactor::build(1.0, ProfileKind::SmoothBump).unwrap();
            let ac = Autocorrelation::build(&ff);
            (ff, ac)
        })
    }

    #[test]
    fn autocorrelation_norm_and_support() {
        let (_, ac) = setup();
        assert_relative_eq!(ac.norm3d(), 1.0, max_relative = 1e-9);
        assert_eq!(ac.eval(2.0), 0.0);
        assert!(ac.eval(1.0) > 0.0);
    }

    #[test]
    fn shell_kernel_surface_integral() {
        let shell = RetardedShellKernel { tau: 3.7 };
        assert_eq!(shell.surface_integral(), 3.7);
    }

    #[test]
    fn shell_overlap_against_direct_shell_average() {
        // Λ(w, τ) = (τ/2)∫ c(√(w²+τ²−2wτμ)) dμ by direct quadrature.
        let (_, ac) = setup();
        for &(w, tau) in &[(3.0, 2.5), (3.0, 3.4), (0.4, 1.1), (5.0, 4.2)] {
            let direct = integrate_panels(
                |mu| {
                    let rho = (w * w + tau * tau - 2.0 * w * tau * mu).sqrt();
                    0.5 * tau * ac.eval(rho)
                },
                -1.0,
                1.0,
                64,
                16,
            );
            let (lam, _, _) = ac.shell_overlap(w, tau);
            assert_relative_eq!(lam, direct, epsilon = 1e-11, max_relative = 1e-8);
        }
    }

    #[test]
    fn shell_overlap_derivatives_match_finite_differences() {
        let (_, ac) = setup();
        let (w, tau) = (3.2, 2.9);
        let h = 1e-6;
        let (_, lw, lt) = ac.shell_overlap(w, tau);
        let fd_w = (ac.shell_overlap(w + h, tau).0 - ac.shell_overlap(w - h, tau).0) / (2.0 * h);
        let fd_t = (ac.shell_overlap(w, tau + h).0 - ac.shell_overlap(w, tau - h).0) / (2.0 * h);
        assert_relative_eq!(lw, fd_w, max_relative = 1e-6);
        assert_relative_eq!(lt, fd_t, max_relative = 1e-6);
    }

    #[test]
    fn kernel_a1_is_one_over_4pi() {
        let (_, ac) = setup();
        for &xi in &[0.5, 1.0, 3.0, 20.0] {
            let a1 = kernel_a(ac, 1, xi).unwrap();
            assert_relative_eq!(a1, 1.0 / (4.0 * PI), max_relative = 1e-8);
        }
    }

    #[test]
    fn kernel_point_limits() {
        let (_, ac) = setup();
        let xi = 12.0;
        // A₀ → 1/4πξ (exact outside the overlap), A₂ → (ξ + m₂/3ξ)/4π
        assert_relative_eq!(
            kernel_a(ac, 0, xi).unwrap(),
            1.0 / (4.0 * PI * xi),
            max_relative = 1e-9
        );
        let a2_expected = (xi + ac.second_moment() / (3.0 * xi)) / (4.0 * PI);
        assert_relative_eq!(kernel_a(ac, 2, xi).unwrap(), a2_expected, max_relative = 1e-9);
        // B₁ = −A₀, B₀ = 0
        assert_eq!(kernel_b(ac, 0, xi).unwrap(), 0.0);
        assert_relative_eq!(
            kernel_b(ac, 1, xi).unwrap(),
            -kernel_a(ac, 0, xi).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn kernel_order_guard() {
        let (_, ac) = setup();
        assert!(kernel_a(ac, 4, 1.0).is_err());
        assert!(kernel_a(ac, 0, 0.0).is_err());
    }

    #[test]
    fn grad_a0_parity_and_direction() {
        let (_, ac) = setup();
        let xi = Vector3::new(7.0, 0.0, 0.0);
        let (g, _) = grad_a0_residual(ac, &xi).unwrap();
        assert!(g.x < 0.0);
        assert_eq!(g.y, 0.0);
        assert_eq!(g.z, 0.0);
        let (gm, _) = grad_a0_residual(ac, &(-xi)).unwrap();
        assert_relative_eq!(gm.x, -g.x, max_relative = 1e-12);
    }

    #[test]
    fn kernel_a_derivs_match_closed_forms() {
        // Outside the overlap region both kernels are exact closed forms:
        // A₀ = 1/4πξ and A₂ = (ξ + m₂/3ξ)/4π, so every derivative order has
        // an independent reference.
        let (_, ac) = setup();
        let xi = 9.0;
        let m2 = ac.second_moment();
        let d0 = kernel_a_derivs(ac, 0, xi).unwrap();
        assert_relative_eq!(d0[0], 1.0 / (4.0 * PI * xi), max_relative = 1e-9);
        assert_relative_eq!(d0[1], -1.0 / (4.0 * PI * xi * xi), max_relative = 1e-9);
        assert_relative_eq!(d0[2], 2.0 / (4.0 * PI * xi.powi(3)), max_relative = 1e-9);
        assert_relative_eq!(d0[3], -6.0 / (4.0 * PI * xi.powi(4)), max_relative = 1e-9);
        let d2 = kernel_a_derivs(ac, 2, xi).unwrap();
        assert_relative_eq!(d2[0], (xi + m2 / (3.0 * xi)) / (4.0 * PI), max_relative = 1e-9);
        assert_relative_eq!(d2[1], (1.0 - m2 / (3.0 * xi * xi)) / (4.0 * PI), max_relative = 1e-9);
        assert_relative_eq!(d2[2], m2 / (6.0 * PI * xi.powi(3)), max_relative = 1e-7);
        assert_relative_eq!(d2[3], -m2 / (2.0 * PI * xi.powi(4)), max_relative = 1e-7);
    }

    #[test]
    fn closed_mutual_force_term_selection() {
        // v_α = v_β = v̇_β = 0 → pure Coulomb
        let xi = Vector3::new(3.0, 0.0, 0.0);
        let z = Vector3::zeros();
        let f = mutual_force_closed(&xi, &z, &z, &z).unwrap();
        assert_relative_eq!(f.x, 1.0 / (4.0 * PI * 9.0), max_relative = 1e-14);
        assert_eq!((f.y, f.z), (0.0, 0.0));

        // v_β ⟂ ξ, v_α = 0, v̇_β = 0 → Coulomb + v_β²ξ/8π|ξ|³
        let vb = Vector3::new(0.0, 0.2, 0.0);
        let f = mutual_force_closed(&xi, &z, &vb, &z).unwrap();
        let expect = 1.0 / (4.0 * PI * 9.0) + 0.04 / (8.0 * PI * 27.0) * 3.0;
        assert_relative_eq!(f.x, expect, max_relative = 1e-14);

        // coincident positions rejected
        assert!(mutual_force_closed(&Vector3::zeros(), &z, &z, &z).is_err());
    }

    #[test]
    fn closed_mutual_force_matches_term_by_term_hand_expansion() {
        // generic inputs, each of the seven terms evaluated from scalars
        let xi = Vector3::new(2.0, -1.0, 0.5);
        let va = Vector3::new(0.1, 0.05, -0.02);
        let vb = Vector3::new(-0.03, 0.08, 0.11);
        let ab = Vector3::new(0.002, -0.001, 0.004);
        let r: f64 = xi.norm();
        let (r3, r5) = (r.powi(3), r.powi(5));
        let hand = xi / (4.0 * PI * r3)
            - ab / (8.0 * PI * r)
            - xi * (ab.dot(&xi)) / (8.0 * PI * r3)
            + xi * vb.norm_squared() / (8.0 * PI * r3)
            - xi * 3.0 * vb.dot(&xi).powi(2) / (8.0 * PI * r5)
            - xi * va.dot(&vb) / (4.0 * PI * r3)
            + vb * va.dot(&xi) / (4.0 * PI * r3);
        let f = mutual_force_closed(&xi, &va, &vb, &ab).unwrap();
        assert!((f - hand).norm() < 1e-16);
    }

    #[test]
    fn closed_mutual_force_newton_third_law_at_coulomb_order() {
        let xi = Vector3::new(1.3, 0.4, -0.2);
        let z = Vector3::zeros();
        let f_ab = mutual_force_closed(&xi, &z, &z, &z).unwrap();
        let f_ba = mutual_force_closed(&(-xi), &z, &z, &z).unwrap();
        assert!((f_ab + f_ba).norm() < 1e-18);
    }

    #[test]
    fn self_force_closed_coefficients() {
        let m_e = 0.0643;
        // v = 0 → −(4/3) m_e v̇
        let vdot = Vector3::new(0.0, 0.0, 2.0);
        let f = self_force_closed(&Vector3::zeros(), &vdot, m_e);
        assert_relative_eq!(f.z, -4.0 / 3.0 * m_e * 2.0, max_relative = 1e-15);

        // v ⟂ v̇ → transverse coefficient (4/3 + 8v²/15) m_e, no longitudinal part
        let v = Vector3::new(0.1, 0.0, 0.0);
        let f = self_force_closed(&v, &vdot, m_e);
        assert_relative_eq!(f.z, -(4.0 / 3.0 + 8.0 * 0.01 / 15.0) * m_e * 2.0, max_relative = 1e-15);
        assert_eq!(f.x, 0.0);

        // v ∥ v̇, |v| = 0.1 → coefficient (4/3 + 8/1500 + 16/1500) m_e
        let v = Vector3::new(0.1, 0.0, 0.0);
        let a = Vector3::new(1.0, 0.0, 0.0);
        let f = self_force_closed(&v, &a, m_e);
        assert_relative_eq!(
            f.x,
            -(4.0 / 3.0 + 8.0 / 1500.0 + 16.0 / 1500.0) * m_e,
            max_relative = 1e-14
        );
    }

    #[test]
    fn static_pair_direct_force_equals_kernel_gradient() {
        // Both particles at rest forever: only the −∇Λ term survives and the
        // s-integral telescopes to −∇_ξ A₀, the smeared Coulomb force.
        let (_, ac) = setup();
        let xi = 6.0;
        let a = Trajectory::Line {
            q0: Vector3::new(xi, 0.0, 0.0),
            v: Vector3::zeros(),
        };
        let b = Trajectory::Line {
            q0: Vector3::zeros(),
            v: Vector3::zeros(),
        };
        let t = 40.0;
        let f = retarded_force_direct(ac, &a, &b, t, 1e-11, 1e-15).unwrap();
        let coulomb = 1.0 / (4.0 * PI * xi * xi);
        assert_relative_eq!(f.x, coulomb, max_relative = 1e-8);
        assert!(f.y.abs() < 1e-14 && f.z.abs() < 1e-14);
        let (g, _) = grad_a0_residual(ac, &Vector3::new(xi, 0.0, 0.0)).unwrap();
        assert_relative_eq!(f.x, -g.x, max_relative = 1e-8);
    }

    #[test]
    fn constant_velocity_self_force_vanishes() {
        let (ff, ac) = setup();
        let v = Vector3::new(0.12, 0.0, 0.05);
        let tr = Trajectory::Line {
            q0: Vector3::new(0.3, -0.1, 0.0),
            v,
        };
        let t = 30.0;
        let f = retarded_force_direct(ac, &tr, &tr, t, 1e-11, 1e-13).unwrap();
        let bound = 1e-6 * ff.electromagnetic_mass() * v.norm();
        assert!(
            f.norm() < bound,
            "free soliton self-force {:.3e} above {:.3e}",
            f.norm(),
            bound
        );
    }
}
