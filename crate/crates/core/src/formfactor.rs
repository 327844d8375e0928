//! Charge form factor φ: a smooth, radial, compactly supported profile with
//! unit integral, its radial Fourier transform, and the derived mass
//! constants (electromagnetic mass, renormalized masses, electrostatic
//! energy).
//!
//! Transform convention used throughout the crate:
//! φ̂(k) = (2π)^(−3/2) ∫ φ(x) e^(−ik·x) d³x, so φ̂(0) = (2π)^(−3/2).

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numerics::{integrate_adaptive, integrate_panels, UniformTable};
use crate::particles::ParticleSet;

/// (2π)^(−3/2), the transform constant c₀ such that φ̂(0) = c₀·∫φ.
pub const FOURIER_NORM: f64 = 0.063_493_635_934_240_97;

/// Available radial profiles. Both vanish identically for r ≥ R_φ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    /// ∝ exp(−1/(1−(r/R)²)) inside the support; C^∞ everywhere.
    SmoothBump,
    /// ∝ (1−(r/R)²)⁴ inside the support; C³ at the boundary.
    PolynomialBump,
}

impl ProfileKind {
    fn shape(self, u: f64) -> f64 {
        if u >= 1.0 {
            return 0.0;
        }
        match self {
            ProfileKind::SmoothBump => (-1.0 / (1.0 - u * u)).exp(),
            ProfileKind::PolynomialBump => {
                let w = 1.0 - u * u;
                w * w * w * w
            }
        }
    }
}

/// The smeared-charge profile with its cached Fourier transform and the
/// electromagnetic mass of the unit charge.
#[derive(Debug, Clone)]
pub struct FormFactor {
    kind: ProfileKind,
    support_radius: f64,
    /// Normalization so that ∫ φ d³x = 1.
    norm: f64,
    total_integral: f64,
    /// φ̂ tabulated on a geometric wavenumber grid (uniform in ln k).
    table: UniformTable,
    k_lo: f64,
    k_max: f64,
    /// Even moments for the small-k Taylor evaluation: ∫φ r² d³x, r⁴, r⁶.
    m2: f64,
    m4: f64,
    m6: f64,
    m_e: f64,
    m_e_err: f64,
}

impl FormFactor {
    /// Construct the form factor and cache its transform table and m_e.
    pub fn build(support_radius: f64, kind: ProfileKind) -> Result<FormFactor> {
        if !(support_radius > 0.0) || !support_radius.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "form factor support radius must be positive, got {support_radius}"
            )));
        }
        let r = support_radius;
        let (raw_int, _) = integrate_adaptive(
            |s| s * s * kind.shape(s / r),
            0.0,
            r,
            1e-13,
            1e-300,
        );
        let norm = 1.0 / (4.0 * PI * raw_int);
        let profile = |s: f64| norm * kind.shape(s / r);

        let moment = |pow: i32| {
            integrate_adaptive(|s| 4.0 * PI * s.powi(2 + pow) * profile(s), 0.0, r, 1e-13, 1e-300).0
        };
        let total_integral = moment(0);
        let m2 = moment(2);
        let m4 = moment(4);
        let m6 = moment(6);

        let k_lo = 0.05 / r;
        let k_max = 40.0 / r;
        let fourier_exact = |k: f64| fourier_exact(profile, r, k);
        let table = UniformTable::build(k_lo.ln(), k_max.ln(), 4096, |lnk| fourier_exact(lnk.exp()));

        // m_e = ½ ∫ d³k |φ̂|² k⁻² = 2π ∫₀^∞ φ̂(k)² dk; the tail beyond k_max is
        // below the φ̂ tail squared and is dropped.
        let (m_e, m_e_err) =
            integrate_adaptive(|k| 2.0 * PI * fourier_exact(k) * fourier_exact(k), 0.0, k_max, 1e-11, 1e-300);

        Ok(FormFactor {
            kind,
            support_radius,
            norm,
            total_integral,
            table,
            k_lo,
            k_max,
            m2,
            m4,
            m6,
            m_e,
            m_e_err,
        })
    }

    pub fn kind(&self) -> ProfileKind {
        self.kind
    }

    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    pub fn total_integral(&self) -> f64 {
        self.total_integral
    }

    /// Radial profile value φ(r); exactly zero for r ≥ R_φ.
    pub fn profile(&self, r: f64) -> f64 {
        self.norm * self.kind.shape(r / self.support_radius)
    }

    /// φ̂(|k|) in the (2π)^(−3/2) convention. Beyond the table the transform
    /// of the smooth compact profile decays faster than any power and is
    /// returned as exactly zero (cutoff k_max = 40/R_φ).
    pub fn fourier_profile(&self, k: f64) -> f64 {
        let k = k.abs();
        if k >= self.k_max {
            0.0
        } else if k < self.k_lo {
            // Even Taylor expansion of the radial transform around k = 0.
            let k2 = k * k;
            FOURIER_NORM
                * (self.total_integral - k2 * self.m2 / 6.0 + k2 * k2 * self.m4 / 120.0
                    - k2 * k2 * k2 * self.m6 / 5040.0)
        } else {
            self.table.eval(k.ln())
        }
    }

    /// Unit-normalized transform φ̃(|k|) = ∫φ e^(−ik·x) d³x, so φ̃(0) = 1.
    /// This is the factor entering spectral charge and current densities.
    pub fn charge_form(&self, k: f64) -> f64 {
        self.fourier_profile(k) / FOURIER_NORM
    }

    /// Electromagnetic mass m_e = ½∫ d³k |φ̂(k)|² k⁻² of the unit charge.
    pub fn electromagnetic_mass(&self) -> f64 {
        self.m_e
    }

    pub fn fourier_cutoff(&self) -> f64 {
        self.k_max
    }
}

fn fourier_exact<F: Fn(f64) -> f64>(profile: F, r_max: f64, k: f64) -> f64 {
    if k * r_max < 1e-8 {
        let (v, _) = integrate_adaptive(|s| 4.0 * PI * s * s * profile(s), 0.0, r_max, 1e-13, 1e-300);
        return FOURIER_NORM * v;
    }
    // Radial sine transform; panel count follows the oscillation count.
    let panels = (4 + (k * r_max / PI) as usize).min(512);
    let v = integrate_panels(
        |s| 4.0 * PI * s * profile(s) * (k * s).sin() / k,
        0.0,
        r_max,
        2 * panels,
        16,
    );
    FOURIER_NORM * v
}

/// Renormalized-mass bookkeeping for a particle set (§2 of the model):
/// m_α = m_bα + (4/3) e_α² m_e,  m*_α = m_bα + (16/15) e_α² m_e,
/// E_stat = m_e Σ e_α².
#[derive(Debug, Clone, PartialEq)]
pub struct MassConstants {
    pub m_e: f64,
    pub e_stat: f64,
    pub mass: Vec<f64>,
    pub mass_star: Vec<f64>,
}

pub fn mass_constants(ff: &FormFactor, particles: &ParticleSet) -> Result<MassConstants> {
    let m_e = ff.m_e;
    if !(ff.m_e_err <= 1e-8 * m_e) {
        return Err(Error::Numerical(format!(
            "electromagnetic-mass quadrature error estimate {:.3e} above 1e-8 relative",
            ff.m_e_err / m_e
        )));
    }
    let mut mass = Vec::with_capacity(particles.len());
    let mut mass_star = Vec::with_capacity(particles.len());
    let mut e_sq_sum = 0.0;
    for p in particles.iter() {
        let e2 = p.charge * p.charge;
        e_sq_sum += e2;
        mass.push(p.bare_mass + 4.0 / 3.0 * e2 * m_e);
        mass_star.push(p.bare_mass + 16.0 / 15.0 * e2 * m_e);
    }
    Ok(MassConstants {
        m_e,
        e_stat: m_e * e_sq_sum,
        mass,
        mass_star,
    })
}
