use nalgebra::Vector3;

use crate::error::{Error, Result};

/// One rigid smeared charge of the coupled system: charge eα, bare mass m_bα,
/// position qα and velocity vα (|v| < 1, c = 1 units).
#[derive(Debug, Clone, PartialEq)]
pub struct ChargedParticle {
    pub charge: f64,
    pub bare_mass: f64,
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
}

impl ChargedParticle {
    /// Relativistic factor γ = (1 − v²)^(−1/2). Derived, never stored.
    pub fn gamma(&self) -> f64 {
        gamma_of(&self.velocity)
    }

    /// Momentum p = m_b γ v.
    pub fn momentum(&self) -> Vector3<f64> {
        self.velocity * (self.bare_mass * self.gamma())
    }
}

pub fn gamma_of(v: &Vector3<f64>) -> f64 {
    1.0 / (1.0 - v.norm_squared()).sqrt()
}

/// Closed-form inversion of p = m_b γ v:  v = p / sqrt(m_b² + p²).
pub fn velocity_from_momentum(p: &Vector3<f64>, bare_mass: f64) -> Vector3<f64> {
    p / (bare_mass * bare_mass + p.norm_squared()).sqrt()
}

/// The full particle content of a run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParticleSet {
    pub particles: Vec<ChargedParticle>,
}

impl ParticleSet {
    pub fn new(particles: Vec<ChargedParticle>) -> Result<Self> {
        for (i, p) in particles.iter().enumerate() {
            if !(p.bare_mass > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "particle {i}: bare mass must be positive, got {}",
                    p.bare_mass
                )));
            }
            let v = p.velocity.norm();
            if v >= 1.0 || !v.is_finite() {
                return Err(Error::InvalidVelocity(v));
            }
        }
        Ok(ParticleSet { particles })
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, ChargedParticle> {
        self.particles.iter()
    }

    pub fn min_pairwise_separation(&self) -> Option<f64> {
        let n = self.particles.len();
        if n < 2 {
            return None;
        }
        let mut min = f64::INFINITY;
        for a in 0..n {
            for b in (a + 1)..n {
                min = min.min((self.particles[a].position - self.particles[b].position).norm());
            }
        }
        Some(min)
    }

    pub fn max_pairwise_separation(&self) -> Option<f64> {
        let n = self.particles.len();
        if n < 2 {
            return None;
        }
        let mut max = 0.0_f64;
        for a in 0..n {
            for b in (a + 1)..n {
                max = max.max((self.particles[a].position - self.particles[b].position).norm());
            }
        }
        Some(max)
    }
}

impl std::ops::Index<usize> for ParticleSet {
    type Output = ChargedParticle;
    fn index(&self, i: usize) -> &ChargedParticle {
        &self.particles[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn momentum_inversion_round_trip() {
        let v = Vector3::new(0.3, -0.5, 0.7); // |v| = 0.911
        let p = ChargedParticle {
            charge: 1.0,
            bare_mass: 0.7,
            position: Vector3::zeros(),
            velocity: v,
        };
        let back = velocity_from_momentum(&p.momentum(), p.bare_mass);
        assert!((back - v).norm() < 1e-15);
    }

    #[test]
    fn superluminal_velocity_rejected() {
        let r = ParticleSet::new(vec![ChargedParticle {
            charge: 1.0,
            bare_mass: 1.0,
            position: Vector3::zeros(),
            velocity: Vector3::new(1.0, 0.0, 0.0),
        }]);
        assert!(matches!(r, Err(Error::InvalidVelocity(_))));
    }
}
