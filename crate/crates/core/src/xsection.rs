//! Piecewise-constant cross-section fields and the derived random-walk
//! rates: the combined scatter rate alpha, the combined kernel pi and the
//! potential beta = sigma_f (m_f - 1).
//!
//! Cross-sections are rates per unit time, constant per material region and
//! velocity-independent within a region. Kernels are the two shapes used by
//! the slab and square experiments: sign flips / same-direction yields on the
//! two-point line, and uniform-angle kernels on the plane. 2D angular
//! densities are taken with respect to the angle measure d(theta) on [0, 2pi).

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{Domain, RegionId, Vec2, VelocitySpace};
use crate::rng::SimRng;

/// Scattering yield kernel pi_s (a probability kernel).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScatterKernel {
    /// pi_s(r, v, .) = delta_{-v}
    FlipSign1D,
    /// Outgoing direction uniform on [0, 2pi), speed preserved.
    UniformAngle2D,
}

/// Fission yield kernel shape; the mass m_f lives per material region.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FissionKernel {
    /// pi_f(r, v, .) = m delta_{v}: offspring inherit the parent velocity.
    SameDirection1D,
    /// Outgoing directions uniform on [0, 2pi), speed preserved.
    UniformAngle2D,
}

/// Cross-sections of one material region.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Material {
    pub sigma_s: f64,
    pub sigma_f: f64,
    /// m_f = integral of pi_f over V (mean fission yield).
    pub fission_mass: f64,
}

impl Material {
    pub fn new(sigma_s: f64, sigma_f: f64, fission_mass: f64) -> Self {
        Material { sigma_s, sigma_f, fission_mass }
    }

    /// alpha = sigma_s + sigma_f * m_f (total mass of the combined kernel).
    pub fn alpha(&self) -> f64 {
        self.sigma_s + self.sigma_f * self.fission_mass
    }

    /// beta = sigma_f (m_f - 1); may be negative (net capture).
    pub fn beta(&self) -> f64 {
        self.sigma_f * (self.fission_mass - 1.0)
    }
}

/// Reported outcome of validating the standing assumptions on a field.
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    /// A rate is non-finite or negative.
    H1 { region: usize, what: String },
    /// alpha vanishes in some region: neither scattering nor fission can occur.
    H2 { region: usize },
    /// No region supports fission.
    H3,
    /// Informational: offspring numbers are Poisson, hence unbounded. The
    /// bounded-offspring assumption is deliberately relaxed.
    H4Info,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::H1 { region, what } => write!(f, "(H1) region {region}: {what}"),
            Violation::H2 { region } => write!(
                f,
                "(H2) region {region}: sigma_s + sigma_f*m_f = 0, no interaction possible"
            ),
            Violation::H3 => write!(f, "(H3) no region with sigma_f*m_f > 0"),
            Violation::H4Info => write!(
                f,
                "(H4) informational: Poisson offspring are unbounded; the hard cap assumption is relaxed"
            ),
        }
    }
}

/// A region-decomposed domain together with its material cross-sections;
/// the source of all rates. Immutable after construction.
#[derive(Clone, Debug)]
pub struct CrossSectionField {
    pub domain: Domain,
    pub velocity: VelocitySpace,
    pub scatter_kernel: ScatterKernel,
    pub fission_kernel: FissionKernel,
    materials: Vec<Material>,
}

impl CrossSectionField {
    pub fn new(
        domain: Domain,
        velocity: VelocitySpace,
        scatter_kernel: ScatterKernel,
        fission_kernel: FissionKernel,
        materials: Vec<Material>,
    ) -> Result<Self> {
        velocity.validate()?;
        if materials.len() != domain.region_count() {
            return Err(Error::config(format!(
                "expected {} materials (one per region), got {}",
                domain.region_count(),
                materials.len()
            )));
        }
        match (&velocity, scatter_kernel, fission_kernel) {
            (VelocitySpace::TwoPoint1D { .. }, ScatterKernel::FlipSign1D, FissionKernel::SameDirection1D) => {}
            (VelocitySpace::FixedSpeed2D { .. }, ScatterKernel::UniformAngle2D, FissionKernel::UniformAngle2D) => {}
            (VelocitySpace::Annulus2D { .. }, ScatterKernel::UniformAngle2D, FissionKernel::UniformAngle2D) => {}
            _ => return Err(Error::config("kernel shapes do not match the velocity space")),
        }
        if domain.dim() == 1 && velocity.dim() != 1 || domain.dim() == 2 && velocity.dim() != 2 {
            return Err(Error::config("domain and velocity space dimensions differ"));
        }
        Ok(CrossSectionField { domain, velocity, scatter_kernel, fission_kernel, materials })
    }

    /// Homogeneous slab shorthand: interval domain, two-point velocities.
    pub fn slab(half_width: f64, v0: f64, sigma_s: f64, sigma_f: f64, fission_mass: f64) -> Result<Self> {
        CrossSectionField::new(
            Domain::interval(half_width)?,
            VelocitySpace::TwoPoint1D { v0 },
            ScatterKernel::FlipSign1D,
            FissionKernel::SameDirection1D,
            vec![Material::new(sigma_s, sigma_f, fission_mass)],
        )
    }

    pub fn materials(&self) -> &[Material] {
        &self.materials
    }

    pub fn material(&self, region: RegionId) -> &Material {
        &self.materials[region.0]
    }

    pub fn material_at(&self, r: Vec2) -> Result<&Material> {
        Ok(self.material(self.domain.region_of(r)?))
    }

    /// Combined scatter rate alpha(r, v) of the many-to-one walk.
    pub fn alpha(&self, r: Vec2, _v: Vec2) -> Result<f64> {
        Ok(self.material_at(r)?.alpha())
    }

    /// Potential beta(r, v) of the many-to-one weight.
    pub fn beta(&self, r: Vec2, _v: Vec2) -> Result<f64> {
        Ok(self.material_at(r)?.beta())
    }

    /// sup beta over the field.
    pub fn beta_sup(&self) -> f64 {
        self.materials.iter().map(Material::beta).fold(f64::NEG_INFINITY, f64::max)
    }

    /// inf beta over the field.
    pub fn beta_inf(&self) -> f64 {
        self.materials.iter().map(Material::beta).fold(f64::INFINITY, f64::min)
    }

    pub fn alpha_sup(&self) -> f64 {
        self.materials.iter().map(Material::alpha).fold(0.0, f64::max)
    }

    /// Density of the combined kernel pi(r, v, v') with alpha * pi =
    /// sigma_s pi_s + sigma_f pi_f. On the two-point line this is the
    /// probability mass of the atom at v'; on the plane it is a density in
    /// the outgoing angle.
    pub fn pi_density(&self, r: Vec2, v: Vec2, v_out: Vec2) -> Result<f64> {
        let m = self.material_at(r)?;
        let alpha = m.alpha();
        if alpha == 0.0 {
            return Err(Error::config("pi is undefined where alpha = 0"));
        }
        Ok(match self.scatter_kernel {
            ScatterKernel::FlipSign1D => {
                let flip = (v_out.x + v.x).abs() < 1e-12;
                let keep = (v_out.x - v.x).abs() < 1e-12;
                if flip {
                    m.sigma_s / alpha
                } else if keep {
                    m.sigma_f * m.fission_mass / alpha
                } else {
                    0.0
                }
            }
            // both kernels uniform in angle, so the mix is uniform
            ScatterKernel::UniformAngle2D => 1.0 / (2.0 * std::f64::consts::PI),
        })
    }

    /// Sample a new velocity from the combined kernel pi(r, v, .).
    pub fn sample_combined(&self, r: Vec2, v: Vec2, rng: &mut SimRng) -> Result<Vec2> {
        let m = self.material_at(r)?;
        Ok(match self.scatter_kernel {
            ScatterKernel::FlipSign1D => {
                let p_flip = m.sigma_s / m.alpha();
                if rng.random::<f64>() < p_flip {
                    v.neg()
                } else {
                    v
                }
            }
            ScatterKernel::UniformAngle2D => {
                let theta = rng.random::<f64>() * 2.0 * std::f64::consts::PI;
                Vec2::from_angle(theta, v.norm())
            }
        })
    }

    /// Sample a new velocity from the scatter kernel pi_s alone (branching
    /// process motion).
    pub fn sample_scatter(&self, v: Vec2, rng: &mut SimRng) -> Vec2 {
        match self.scatter_kernel {
            ScatterKernel::FlipSign1D => v.neg(),
            ScatterKernel::UniformAngle2D => {
                let theta = rng.random::<f64>() * 2.0 * std::f64::consts::PI;
                Vec2::from_angle(theta, v.norm())
            }
        }
    }

    /// Sample one offspring velocity from the normalized fission yield
    /// eta_f = pi_f / m_f.
    pub fn sample_fission_velocity(&self, v: Vec2, rng: &mut SimRng) -> Vec2 {
        match self.fission_kernel {
            FissionKernel::SameDirection1D => v,
            FissionKernel::UniformAngle2D => {
                let theta = rng.random::<f64>() * 2.0 * std::f64::consts::PI;
                Vec2::from_angle(theta, v.norm())
            }
        }
    }

    /// pi_s[f](r, v) = int f(r, v') pi_s(r, v, v') dv'.
    pub fn pi_s_mean(&self, r: Vec2, v: Vec2, f: &impl Fn(Vec2, Vec2) -> f64) -> f64 {
        match self.scatter_kernel {
            ScatterKernel::FlipSign1D => f(r, v.neg()),
            ScatterKernel::UniformAngle2D => angle_mean(r, v.norm(), f),
        }
    }

    /// pi_f[g](r, v) = int g(r, v') pi_f(r, v, v') dv' = m_f * eta_f[g].
    pub fn pi_f_mean(&self, r: Vec2, v: Vec2, g: &impl Fn(Vec2, Vec2) -> f64) -> Result<f64> {
        let m = self.material_at(r)?;
        Ok(match self.fission_kernel {
            FissionKernel::SameDirection1D => m.fission_mass * g(r, v),
            FissionKernel::UniformAngle2D => m.fission_mass * angle_mean(r, v.norm(), g),
        })
    }

    /// Validate the standing assumptions for the discrete region set.
    /// Returns an empty list (apart from the informational H4 note) iff they
    /// hold.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for (i, m) in self.materials.iter().enumerate() {
            for (name, v) in [("sigma_s", m.sigma_s), ("sigma_f", m.sigma_f), ("fission_mass", m.fission_mass)] {
                if !v.is_finite() || v < 0.0 {
                    out.push(Violation::H1 { region: i, what: format!("{name} = {v} is not a finite nonnegative rate") });
                }
            }
            if m.alpha() == 0.0 {
                out.push(Violation::H2 { region: i });
            }
        }
        if !self.materials.iter().any(|m| m.sigma_f > 0.0 && m.fission_mass > 0.0) {
            out.push(Violation::H3);
        }
        if self.materials.iter().any(|m| m.sigma_f > 0.0 && m.fission_mass > 0.0) {
            out.push(Violation::H4Info);
        }
        out
    }

    /// Hard violations only (the informational H4 note filtered out).
    pub fn hard_violations(&self) -> Vec<Violation> {
        self.validate().into_iter().filter(|v| !matches!(v, Violation::H4Info)).collect()
    }
}

/// Average of f(r, .) over the uniform angle measure, by trapezoid rule on
/// the circle (exact for the constants and smooth enough integrands used in
/// compensators).
fn angle_mean(r: Vec2, speed: f64, f: &impl Fn(Vec2, Vec2) -> f64) -> f64 {
    const N: usize = 128;
    let mut s = 0.0;
    for j in 0..N {
        let theta = 2.0 * std::f64::consts::PI * j as f64 / N as f64;
        s += f(r, Vec2::from_angle(theta, speed));
    }
    s / N as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn slab_field(sigma_s: f64, sigma_f: f64, m: f64) -> CrossSectionField {
        CrossSectionField::slab(1.0, 1.0, sigma_s, sigma_f, m).unwrap()
    }

    #[test]
    fn alpha_is_total_kernel_mass() {
        let f = slab_field(0.5, 0.4, 2.0);
        let a = f.alpha(Vec2::x1(0.0), Vec2::x1(1.0)).unwrap();
        assert!((a - 1.3).abs() < 1e-15);
    }

    #[test]
    fn alpha_reduces_to_sigma_s_without_fission() {
        let f = slab_field(0.7, 0.0, 2.0);
        let a = f.alpha(Vec2::x1(0.2), Vec2::x1(1.0)).unwrap();
        assert!((a - 0.7).abs() < 1e-15);
        // combined kernel = pi_s
        let p = f.pi_density(Vec2::x1(0.2), Vec2::x1(1.0), Vec2::x1(-1.0)).unwrap();
        assert!((p - 1.0).abs() < 1e-15);
    }

    #[test]
    fn combined_two_point_masses() {
        let f = slab_field(0.5, 0.4, 2.0);
        let r = Vec2::x1(0.0);
        let v = Vec2::x1(1.0);
        let flip = f.pi_density(r, v, Vec2::x1(-1.0)).unwrap();
        let keep = f.pi_density(r, v, Vec2::x1(1.0)).unwrap();
        assert!((flip - 0.5 / 1.3).abs() < 1e-15);
        assert!((keep - 0.8 / 1.3).abs() < 1e-15);
        assert!((flip + keep - 1.0).abs() < 1e-15);
    }

    #[test]
    fn beta_signs() {
        assert!((slab_field(0.3, 0.4, 2.0).beta(Vec2::x1(0.0), Vec2::x1(1.0)).unwrap() - 0.4).abs() < 1e-15);
        assert!((slab_field(0.3, 0.4, 1.0).beta(Vec2::x1(0.0), Vec2::x1(1.0)).unwrap()).abs() < 1e-15);
        assert!((slab_field(0.3, 0.4, 0.0).beta(Vec2::x1(0.0), Vec2::x1(1.0)).unwrap() + 0.4).abs() < 1e-15);
    }

    #[test]
    fn beta_bounds_bracket_pointwise_values() {
        let domain = Domain::interval_with_splits(1.0, vec![0.0]).unwrap();
        let f = CrossSectionField::new(
            domain,
            VelocitySpace::TwoPoint1D { v0: 1.0 },
            ScatterKernel::FlipSign1D,
            FissionKernel::SameDirection1D,
            vec![Material::new(0.5, 0.4, 2.0), Material::new(0.5, 0.1, 0.5)],
        )
        .unwrap();
        let (lo, hi) = (f.beta_inf(), f.beta_sup());
        for i in 0..200 {
            let x = -0.995 + i as f64 * 0.01;
            let b = f.beta(Vec2::x1(x), Vec2::x1(1.0)).unwrap();
            assert!(lo <= b + 1e-15 && b <= hi + 1e-15);
        }
    }

    #[test]
    fn validate_reports_h2_h3() {
        let domain = Domain::interval_with_splits(1.0, vec![0.0]).unwrap();
        let f = CrossSectionField::new(
            domain,
            VelocitySpace::TwoPoint1D { v0: 1.0 },
            ScatterKernel::FlipSign1D,
            FissionKernel::SameDirection1D,
            vec![Material::new(0.0, 0.0, 2.0), Material::new(0.5, 0.0, 2.0)],
        )
        .unwrap();
        let vs = f.validate();
        assert!(vs.iter().any(|v| matches!(v, Violation::H2 { region: 0 })));
        assert!(vs.iter().any(|v| matches!(v, Violation::H3)));
    }

    #[test]
    fn validate_clean_field_is_h4_note_only() {
        let f = slab_field(0.5, 1.0, 2.0);
        assert!(f.hard_violations().is_empty());
        assert!(f.validate().iter().any(|v| matches!(v, Violation::H4Info)));
    }

    #[test]
    fn two_d_pi_integrates_to_one() {
        let d = Domain::rect(1.0, 1.0, vec![]).unwrap();
        let f = CrossSectionField::new(
            d,
            VelocitySpace::FixedSpeed2D { v0: 1.0 },
            ScatterKernel::UniformAngle2D,
            FissionKernel::UniformAngle2D,
            vec![Material::new(0.5, 0.4, 2.0)],
        )
        .unwrap();
        // quadrature of the angular density over [0, 2pi)
        let r = Vec2::new(0.1, -0.2);
        let v = Vec2::from_angle(0.3, 1.0);
        let n = 4096;
        let mut total = 0.0;
        for j in 0..n {
            let th = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
            total += f.pi_density(r, v, Vec2::from_angle(th, 1.0)).unwrap();
        }
        total *= 2.0 * std::f64::consts::PI / n as f64;
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn alpha_pi_equals_mixed_cross_sections_pointwise() {
        // alpha * pi == sigma_s pi_s + sigma_f pi_f on the two-point space
        let f = slab_field(0.5, 0.4, 2.0);
        let r = Vec2::x1(0.3);
        for vx in [1.0, -1.0] {
            let v = Vec2::x1(vx);
            let a = f.alpha(r, v).unwrap();
            let flip = a * f.pi_density(r, v, v.neg()).unwrap();
            let keep = a * f.pi_density(r, v, v).unwrap();
            assert!((flip - 0.5).abs() < 1e-12); // sigma_s * 1
            assert!((keep - 0.8).abs() < 1e-12); // sigma_f * m
        }
    }
}
