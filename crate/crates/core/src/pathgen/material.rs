use std::f64::consts::PI;

use num_complex::Complex64;

/// Vacuum permittivity, F/m.
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaterialKind {
    PerfectConductor,
    Dielectric,
}

/// Surface material. Conductivity follows `σ = sigma_a · f^sigma_b` S/m with
/// `f` in GHz.
#[derive(Debug, Clone, PartialEq)]
pub struct Material {
    pub name: String,
    pub kind: MaterialKind,
    pub eps_r: f64,
    pub sigma_a: f64,
    pub sigma_b: f64,
    pub scattering: f64,
}

impl Material {
    pub fn perfect_conductor(name: impl Into<String>, scattering: f64) -> Self {
        Self {
            name: name.into(),
            kind: MaterialKind::PerfectConductor,
            eps_r: 1.0,
            sigma_a: 0.0,
            sigma_b: 0.0,
            scattering,
        }
    }

    pub fn dielectric(name: impl Into<String>, eps_r: f64, sigma_a: f64, sigma_b: f64, scattering: f64) -> Self {
        Self {
            name: name.into(),
            kind: MaterialKind::Dielectric,
            eps_r,
            sigma_a,
            sigma_b,
            scattering,
        }
    }

    /// ITU-R wood: εr = 1.99, σ = 0.0047·f^1.0718.
    pub fn wood() -> Self {
        Self::dielectric("wood", 1.99, 0.0047, 1.0718, 0.0)
    }

    pub fn conductivity(&self, frequency_hz: f64) -> f64 {
        self.sigma_a * (frequency_hz / 1e9).powf(self.sigma_b)
    }

    /// `ε = εr − j σ / (ω ε0)`.
    pub fn complex_permittivity(&self, frequency_hz: f64) -> Complex64 {
        let omega = 2.0 * PI * frequency_hz;
        Complex64::new(self.eps_r, -self.conductivity(frequency_hz) / (omega * EPSILON_0))
    }

    /// TE and TM Fresnel reflection coefficients for incidence from free space;
    /// `cos_incidence` is measured against the surface normal.
    pub fn fresnel(&self, cos_incidence: f64, frequency_hz: f64) -> (Complex64, Complex64) {
        match self.kind {
            MaterialKind::PerfectConductor => (Complex64::new(-1.0, 0.0), Complex64::new(1.0, 0.0)),
            MaterialKind::Dielectric => {
                let c = cos_incidence.abs().min(1.0);
                let sin2 = 1.0 - c * c;
                let eps = self.complex_permittivity(frequency_hz);
                let root = (eps - sin2).sqrt();
                let te = (c - root) / (c + root);
                let tm = (eps * c - root) / (eps * c + root);
                (te, tm)
            }
        }
    }

    /// Polarization-averaged reflection magnitude `sqrt((|Γte|² + |Γtm|²)/2)`.
    pub fn reflection_magnitude(&self, cos_incidence: f64, frequency_hz: f64) -> f64 {
        match self.kind {
            MaterialKind::PerfectConductor => 1.0,
            MaterialKind::Dielectric => {
                let (te, tm) = self.fresnel(cos_incidence, frequency_hz);
                (0.5 * (te.norm_sqr() + tm.norm_sqr())).sqrt()
            }
        }
    }
}
