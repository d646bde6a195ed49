//! Importance functions h and the transformed walk they induce.
//!
//! A nonnegative h on phase space that vanishes on the outgoing boundary
//! tilts the walk toward the interior: the transformed rates are
//!
//!   alpha_h = alpha pi[h] / h,   pi_h ~ h pi,   beta_h = Jh/h + beta,
//!
//! and the semigroup is recovered from h-walk samples through the
//! Feynman-Kac weight exp(int Lh/h + beta ds) g/h times h at the start.
//! When h decays linearly into the outgoing boundary the transformed walk
//! is conservative: the scatter rate diverges on approach and the particle
//! turns around almost surely before exiting.
//!
//! The h-walk sampler uses thinning with per-segment bounds. Every shipped
//! variant is concave or monotone along rays, so segment minima of h sit at
//! segment endpoints; near the boundary, where alpha_h grows without bound,
//! segments shrink geometrically so each carries an O(1) number of
//! proposals.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::geometry::{Domain, Vec2};
use crate::nrw::{simulate_walk, simulate_walk_into, FlightOutcome, NrwPath, WalkLaw};
use crate::numeric::adaptive_simpson;
use crate::rng::SimRng;
use crate::slab1d::SlabEigen;
use crate::xsection::{CrossSectionField, Material, ScatterKernel};

/// An importance function on phase space.
#[derive(Clone, Debug)]
pub enum HFunction {
    /// Degenerate test variant: the transform is the identity.
    Constant { value: f64 },
    /// h = c * |v| * kappa(r, v): scaled distance to the boundary along v.
    DirectionalDistance { c: f64 },
    /// h = min(c1 * d_fwd, c2 * (shift + d_bwd)): forward exit distance
    /// against a gently sloped backward distance, shifted by `shift` along
    /// the direction of travel.
    Urts { c1: f64, c2: f64, shift: f64 },
    /// epsilon + base: strictly positive everywhere, hence not conservative.
    Lifted { base: Box<HFunction>, epsilon: f64 },
    /// Slab candidate h1(r, +v0) = (r + L + reach) ^ (L - r), mirrored for
    /// -v0, with reach = v0 / sigma_s.
    Slab1dH1 { half_width: f64, reach: f64 },
    /// Slab candidate h2(r, +v0) = L - r (the poor choice: its Lh/h blows
    /// up at the incoming boundary).
    Slab1dH2 { half_width: f64 },
    /// Slab candidate h3(r, +v0) = (r + L + reach)(L - r), mirrored.
    Slab1dH3 { half_width: f64, reach: f64 },
    /// The analytic slab eigenfunction phi (zero-variance choice).
    SlabPhi { eigen: SlabEigen },
    /// base^gamma for gamma in (0, 1]: a milder tilt interpolating toward
    /// the plain walk.
    Blend { base: Box<HFunction>, gamma: f64 },
}

impl HFunction {
    /// Pointwise evaluation. Boundary points are allowed (limits).
    pub fn eval(&self, domain: &Domain, r: Vec2, v: Vec2) -> f64 {
        match self {
            HFunction::Constant { value } => *value,
            HFunction::DirectionalDistance { c } => c * ray_exit_distance(domain, r, v),
            HFunction::Urts { c1, c2, shift } => {
                let fwd = ray_exit_distance(domain, r, v);
                let bwd = ray_exit_distance(domain, r, v.neg());
                (c1 * fwd).min(c2 * (shift + bwd))
            }
            HFunction::Lifted { base, epsilon } => epsilon + base.eval(domain, r, v),
            HFunction::Slab1dH1 { half_width, reach } => {
                let (l, x) = (*half_width, slab_coord(r, v));
                (x + l + reach).min(l - x)
            }
            HFunction::Slab1dH2 { half_width } => half_width - slab_coord(r, v),
            HFunction::Slab1dH3 { half_width, reach } => {
                let (l, x) = (*half_width, slab_coord(r, v));
                (x + l + reach) * (l - x)
            }
            HFunction::SlabPhi { eigen } => eigen.phi(r, v),
            HFunction::Blend { base, gamma } => base.eval(domain, r, v).powf(*gamma),
        }
    }

    /// d/ds h(r + v s, v) at s = 0, taking the right limit along the ray at
    /// kinks of piecewise-affine variants.
    fn ray_slope(&self, domain: &Domain, r: Vec2, v: Vec2) -> f64 {
        match self {
            HFunction::Constant { .. } => 0.0,
            HFunction::DirectionalDistance { c } => -c * v.norm(),
            HFunction::Urts { c1, c2, shift } => {
                let speed = v.norm();
                let t1 = c1 * ray_exit_distance(domain, r, v);
                let t2 = c2 * (shift + ray_exit_distance(domain, r, v.neg()));
                // tie: the forward piece has the smaller slope and is the
                // active one just after the kink
                if t1 <= t2 {
                    -c1 * speed
                } else {
                    c2 * speed
                }
            }
            HFunction::Lifted { base, .. } => base.ray_slope(domain, r, v),
            HFunction::Slab1dH1 { half_width, reach } => {
                let (l, x) = (*half_width, slab_coord(r, v));
                let speed = v.norm();
                // pieces (x + l + reach) rising and (l - x) falling in the
                // flight parameter
                if l - x <= x + l + reach {
                    -speed
                } else {
                    speed
                }
            }
            HFunction::Slab1dH2 { .. } => -v.norm(),
            HFunction::Slab1dH3 { half_width, reach } => {
                let (l, x) = (*half_width, slab_coord(r, v));
                v.norm() * ((l - x) - (x + l + reach))
            }
            HFunction::SlabPhi { eigen } => eigen.phi_ray_deriv(r, v),
            HFunction::Blend { base, gamma } => {
                let b = base.eval(domain, r, v);
                gamma * b.powf(gamma - 1.0) * base.ray_slope(domain, r, v)
            }
        }
    }

    /// Upper bound on h(r, v') over all admissible v' (rejection envelope).
    fn sup_at_position(&self, domain: &Domain, r: Vec2) -> f64 {
        match self {
            HFunction::Constant { value } => *value,
            HFunction::DirectionalDistance { c } => c * domain.max_ray_distance(r),
            HFunction::Urts { c1, c2, shift } => {
                let d = domain.max_ray_distance(r);
                (c1 * d).min(c2 * (shift + d))
            }
            HFunction::Lifted { base, epsilon } => epsilon + base.sup_at_position(domain, r),
            HFunction::Blend { base, gamma } => base.sup_at_position(domain, r).powf(*gamma),
            // slab variants: the velocity space has two atoms
            other => {
                let v0 = Vec2::x1(1.0);
                other.eval(domain, r, v0).max(other.eval(domain, r, v0.neg()))
            }
        }
    }

    /// Upper bound on h over all of phase space (thinning envelope).
    fn sup_global(&self, domain: &Domain) -> f64 {
        match self {
            HFunction::Constant { value } => *value,
            HFunction::DirectionalDistance { c } => c * domain.diameter(),
            HFunction::Urts { c1, c2, shift } => {
                let d = domain.diameter();
                (c1 * d).min(c2 * (shift + d))
            }
            HFunction::Lifted { base, epsilon } => epsilon + base.sup_global(domain),
            HFunction::Slab1dH1 { half_width, reach } => {
                let kink = (-reach / 2.0).clamp(-half_width, *half_width);
                [-*half_width, kink, *half_width]
                    .iter()
                    .map(|&x| (x + half_width + reach).min(half_width - x))
                    .fold(0.0, f64::max)
            }
            HFunction::Slab1dH2 { half_width } => 2.0 * half_width,
            HFunction::Slab1dH3 { half_width, reach } => {
                let vertex = (-reach / 2.0).clamp(-half_width, *half_width);
                [-*half_width, vertex, *half_width]
                    .iter()
                    .map(|&x| (x + half_width + reach) * (half_width - x))
                    .fold(0.0, f64::max)
            }
            HFunction::SlabPhi { eigen } => {
                // the profile is concave or monotone on the slab: extrema at
                // the left edge or the interior stationary point
                let l = eigen.config.half_width;
                let mut best = eigen.phi_profile(-l).max(1.0);
                if matches!(eigen.regime, crate::slab1d::SlabRegime::ThetaLt1)
                    && eigen.x_star > std::f64::consts::FRAC_PI_2
                {
                    best = best.max(1.0 / (0.5 * eigen.x_star).sin());
                }
                best
            }
            HFunction::Blend { base, gamma } => base.sup_global(domain).powf(*gamma),
        }
    }

    /// True when h vanishes on the outgoing boundary, so the transformed
    /// scatter rate diverges on approach and flights need geometrically
    /// shrinking thinning segments.
    fn vanishes_outgoing(&self) -> bool {
        match self {
            HFunction::Constant { .. } | HFunction::Lifted { .. } => false,
            HFunction::Blend { base, .. } => base.vanishes_outgoing(),
            _ => true,
        }
    }

    /// True when h certifies the no-exit condition (linear decay into the
    /// outgoing boundary), making the h-walk conservative.
    pub fn conservative(&self) -> bool {
        match self {
            HFunction::Constant { .. } | HFunction::Lifted { .. } => false,
            HFunction::Blend { base, gamma } => *gamma >= 1.0 && base.conservative(),
            _ => true,
        }
    }

    /// Variants whose along-ray sections are exactly piecewise affine.
    fn affine_family(&self) -> bool {
        match self {
            HFunction::Constant { .. }
            | HFunction::DirectionalDistance { .. }
            | HFunction::Urts { .. }
            | HFunction::Slab1dH1 { .. }
            | HFunction::Slab1dH2 { .. } => true,
            HFunction::Lifted { base, .. } => base.affine_family(),
            _ => false,
        }
    }

    /// Variants defined only on the two-point slab.
    fn is_slab_only(&self) -> bool {
        match self {
            HFunction::Slab1dH1 { .. }
            | HFunction::Slab1dH2 { .. }
            | HFunction::Slab1dH3 { .. }
            | HFunction::SlabPhi { .. } => true,
            HFunction::Lifted { base, .. } | HFunction::Blend { base, .. } => base.is_slab_only(),
            _ => false,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            HFunction::Constant { value } => {
                if !(*value > 0.0) {
                    return Err(Error::config("constant h must be positive"));
                }
            }
            HFunction::DirectionalDistance { c } => {
                if !(*c > 0.0) {
                    return Err(Error::config("directional-distance scale must be positive"));
                }
            }
            HFunction::Urts { c1, c2, shift } => {
                if !(*c1 > 0.0 && *c2 > 0.0 && *shift >= 0.0) {
                    return Err(Error::config("urts parameters must satisfy c1, c2 > 0, shift >= 0"));
                }
            }
            HFunction::Lifted { base, epsilon } => {
                if !(*epsilon > 0.0) {
                    return Err(Error::config("lift offset must be positive"));
                }
                base.validate()?;
            }
            HFunction::Slab1dH1 { half_width, reach } | HFunction::Slab1dH3 { half_width, reach } => {
                if !(*half_width > 0.0 && *reach > 0.0) {
                    return Err(Error::config("slab h parameters must be positive"));
                }
            }
            HFunction::Slab1dH2 { half_width } => {
                if !(*half_width > 0.0) {
                    return Err(Error::config("slab h parameters must be positive"));
                }
            }
            HFunction::SlabPhi { .. } => {}
            HFunction::Blend { base, gamma } => {
                if !(*gamma > 0.0 && *gamma <= 1.0) {
                    return Err(Error::config("blend exponent must lie in (0, 1]"));
                }
                if !base.affine_family() {
                    return Err(Error::config(
                        "blend supports piecewise-affine bases (distance, urts, slab h1/h2, lifted)",
                    ));
                }
                base.validate()?;
            }
        }
        Ok(())
    }
}

/// Parameter values in (0, len) where the active affine piece of
/// s -> h(r + v s, v) changes. At most one per nesting level for the
/// shipped variants.
fn own_ray_kinks(h: &HFunction, domain: &Domain, r: Vec2, v: Vec2, len: f64, out: &mut Vec<f64>) {
    match h {
        HFunction::Urts { c1, c2, shift } => {
            let speed = v.norm();
            let fwd0 = ray_exit_distance(domain, r, v);
            let bwd0 = ray_exit_distance(domain, r, v.neg());
            let s = (c1 * fwd0 - c2 * (shift + bwd0)) / ((c1 + c2) * speed);
            if s > 0.0 && s < len {
                out.push(s);
            }
        }
        HFunction::Slab1dH1 { reach, .. } => {
            let xi0 = slab_coord(r, v);
            let s = (-reach / 2.0 - xi0) / v.x.abs();
            if s > 0.0 && s < len {
                out.push(s);
            }
        }
        HFunction::Lifted { base, .. } | HFunction::Blend { base, .. } => {
            own_ray_kinks(base, domain, r, v, len, out);
        }
        _ => {}
    }
}

/// Distance from r to the boundary along the direction of v (a length, not
/// a time). Zero on the boundary moving outward; valid for boundary points.
fn ray_exit_distance(domain: &Domain, r: Vec2, v: Vec2) -> f64 {
    let u = v.unit();
    let d = domain.ray_boundary_distance(r, u);
    if d.is_finite() {
        d.max(0.0)
    } else {
        0.0
    }
}

fn slab_coord(r: Vec2, v: Vec2) -> f64 {
    if v.x > 0.0 {
        r.x
    } else {
        -r.x
    }
}

pub const DEFAULT_N_ANGLE: usize = 128;

/// The transformed walk: an h together with the cross-section field it
/// tilts, and the angular quadrature resolution for 2D velocity integrals.
pub struct HTransform<'a> {
    pub field: &'a CrossSectionField,
    h: HFunction,
    n_angle: usize,
    sup_h: f64,
}

impl<'a> HTransform<'a> {
    pub fn new(field: &'a CrossSectionField, h: HFunction, n_angle: usize) -> Result<Self> {
        h.validate()?;
        if h.is_slab_only() && field.domain.dim() != 1 {
            return Err(Error::config("slab h variants require a one-dimensional domain"));
        }
        if let HFunction::SlabPhi { eigen } = &h {
            if let Domain::Interval1D { half_width, .. } = &field.domain {
                if (eigen.config.half_width - half_width).abs() > 1e-12 {
                    return Err(Error::config("slab phi h was built for a different half-width"));
                }
            }
        }
        if n_angle < 4 {
            return Err(Error::config("angular quadrature needs at least 4 nodes"));
        }
        let sup_h = h.sup_global(&field.domain);
        Ok(HTransform { field, h, n_angle, sup_h })
    }

    pub fn h(&self) -> &HFunction {
        &self.h
    }

    pub fn eval_h(&self, r: Vec2, v: Vec2) -> f64 {
        self.h.eval(&self.field.domain, r, v)
    }

    /// Th/h: directional derivative of h along v, over h.
    pub fn transport_term(&self, r: Vec2, v: Vec2) -> Result<f64> {
        let h = self.eval_h(r, v);
        if h <= 0.0 {
            return Err(Error::SingularRate { x: r.x, y: r.y });
        }
        Ok(self.h.ray_slope(&self.field.domain, r, v) / h)
    }

    /// S(r, v) = int h(r, v') [sigma_s pi_s + sigma_f pi_f](r, v, dv'):
    /// the unnormalised kernel mean of h; alpha_h = S / h.
    fn kernel_sum(&self, mat: &Material, r: Vec2, v: Vec2) -> f64 {
        match self.field.scatter_kernel {
            ScatterKernel::FlipSign1D => {
                mat.sigma_s * self.eval_h(r, v.neg())
                    + mat.sigma_f * mat.fission_mass * self.eval_h(r, v)
            }
            ScatterKernel::UniformAngle2D => {
                let speed = v.norm();
                let mut mean = 0.0;
                for j in 0..self.n_angle {
                    let theta = 2.0 * std::f64::consts::PI * j as f64 / self.n_angle as f64;
                    mean += self.eval_h(r, Vec2::from_angle(theta, speed));
                }
                mean /= self.n_angle as f64;
                mat.alpha() * mean
            }
        }
    }

    /// Jh/h = alpha (pi[h] - h)/h = S/h - alpha.
    pub fn jump_term(&self, r: Vec2, v: Vec2) -> Result<f64> {
        let mat = self.field.material_at(r)?;
        let h = self.eval_h(r, v);
        if h <= 0.0 {
            return Err(Error::SingularRate { x: r.x, y: r.y });
        }
        Ok(self.kernel_sum(mat, r, v) / h - mat.alpha())
    }

    /// The transformed scatter rate alpha_h(r, v).
    pub fn alpha_h(&self, r: Vec2, v: Vec2) -> Result<f64> {
        let mat = self.field.material_at(r)?;
        let h = self.eval_h(r, v);
        if h <= 0.0 {
            return Err(Error::SingularRate { x: r.x, y: r.y });
        }
        Ok(self.kernel_sum(mat, r, v) / h)
    }

    /// The transformed potential beta_h = Jh/h + beta.
    pub fn beta_h(&self, r: Vec2, v: Vec2) -> Result<f64> {
        Ok(self.jump_term(r, v)? + self.field.beta(r, v)?)
    }

    /// Lh/h = Th/h + Jh/h.
    pub fn lh_over_h(&self, r: Vec2, v: Vec2) -> Result<f64> {
        Ok(self.transport_term(r, v)? + self.jump_term(r, v)?)
    }

    /// Sample a velocity from pi_h(r, v, .) ~ h(r, v') pi(r, v, v').
    pub fn sample_pih(&self, r: Vec2, v: Vec2, rng: &mut SimRng) -> Result<Vec2> {
        if matches!(self.h, HFunction::Constant { .. }) {
            return self.field.sample_combined(r, v, rng);
        }
        let mat = self.field.material_at(r)?;
        match self.field.scatter_kernel {
            ScatterKernel::FlipSign1D => {
                let w_flip = mat.sigma_s * self.eval_h(r, v.neg());
                let w_keep = mat.sigma_f * mat.fission_mass * self.eval_h(r, v);
                let total = w_flip + w_keep;
                if total <= 0.0 {
                    return Err(Error::SingularRate { x: r.x, y: r.y });
                }
                Ok(if rng.random::<f64>() * total < w_flip { v.neg() } else { v })
            }
            ScatterKernel::UniformAngle2D => {
                let speed = v.norm();
                let envelope = self.h.sup_at_position(&self.field.domain, r);
                if envelope <= 0.0 {
                    return Err(Error::SingularRate { x: r.x, y: r.y });
                }
                for _ in 0..1_000_000u64 {
                    let theta = rng.random::<f64>() * 2.0 * std::f64::consts::PI;
                    let cand = Vec2::from_angle(theta, speed);
                    if rng.random::<f64>() * envelope <= self.eval_h(r, cand) {
                        return Ok(cand);
                    }
                }
                Err(Error::config("pi_h rejection sampler failed to accept"))
            }
        }
    }

    /// Simulate one h-walk over [t_start, horizon]. With a constant h the
    /// transform is the identity and the plain walk is produced verbatim.
    pub fn simulate(
        &self,
        r0: Vec2,
        v0: Vec2,
        t_start: f64,
        horizon: f64,
        rng: &mut SimRng,
    ) -> Result<NrwPath> {
        if matches!(self.h, HFunction::Constant { .. }) {
            return crate::nrw::simulate_nrw(self.field, r0, v0, t_start, horizon, rng);
        }
        let law = HLaw { ht: self };
        simulate_walk(&law, &self.field.domain, r0, v0, t_start, horizon, rng)
    }

    /// Buffer-reusing variant of [`Self::simulate`].
    pub fn simulate_into(
        &self,
        r0: Vec2,
        v0: Vec2,
        t_start: f64,
        horizon: f64,
        rng: &mut SimRng,
        path: &mut NrwPath,
    ) -> Result<()> {
        if matches!(self.h, HFunction::Constant { .. }) {
            let law = crate::nrw::PlainLaw { field: self.field, kind: crate::nrw::RateKind::Combined };
            return simulate_walk_into(&law, &self.field.domain, r0, v0, t_start, horizon, rng, path);
        }
        let law = HLaw { ht: self };
        simulate_walk_into(&law, &self.field.domain, r0, v0, t_start, horizon, rng, path)
    }

    /// Exact integral of alpha along one flight (piecewise constant).
    fn alpha_integral(&self, r: Vec2, v: Vec2, len: f64) -> f64 {
        let mut total = 0.0;
        self.field.domain.for_each_region_piece(r, v, len, |a, b, reg| {
            total += self.field.material(reg).alpha() * (b - a);
            std::ops::ControlFlow::Continue(())
        });
        total
    }


    /// Exact integral of 1/h(r + v s, v) over a kink-free sub-segment
    /// [p, q]. On such a segment every affine-family variant is exactly
    /// affine and the endpoint values give the exact slope; the smooth slab
    /// variants have closed forms of their own.
    fn inverse_h_integral(&self, r: Vec2, v: Vec2, p: f64, q: f64, h_p: f64, h_q: f64) -> f64 {
        match &self.h {
            HFunction::SlabPhi { eigen } => {
                let speed = v.x.abs();
                let xi_p = slab_coord(r.advance(v, p), v);
                let xi_q = slab_coord(r.advance(v, q), v);
                eigen.inverse_profile_integral(xi_p, xi_q) / speed
            }
            HFunction::Slab1dH3 { half_width, reach } => {
                // 1 / ((xi + a)(l - xi)) = (1/(a + l)) (1/(xi + a) + 1/(l - xi))
                let (l, a) = (*half_width, half_width + reach);
                let speed = v.x.abs();
                let xi_p = slab_coord(r.advance(v, p), v);
                let xi_q = slab_coord(r.advance(v, q), v);
                let anti = |x: f64| ((x + a) / (l - x)).ln() / (a + l);
                (anti(xi_q) - anti(xi_p)) / speed
            }
            HFunction::Blend { base, gamma } => {
                // base is affine on the kink-free segment: power-rule
                let d = &self.field.domain;
                let b_p = base.eval(d, r.advance(v, p), v);
                let b_q = base.eval(d, r.advance(v, q), v);
                let slope = (b_q - b_p) / (q - p);
                if slope.abs() * (q - p) < 1e-12 * b_p.max(b_q) {
                    (q - p) * 2.0 / (b_p.powf(*gamma) + b_q.powf(*gamma))
                } else {
                    (b_q.powf(1.0 - gamma) - b_p.powf(1.0 - gamma)) / (slope * (1.0 - gamma))
                }
            }
            // affine family: exact from the endpoints
            _ => {
                if (h_q - h_p).abs() < 1e-12 * h_p.max(h_q) {
                    (q - p) * 2.0 / (h_p + h_q)
                } else {
                    (q - p) * (h_q / h_p).ln() / (h_q - h_p)
                }
            }
        }
    }

    /// Integral over one flight of alpha_h(r + v s, v) ds.
    ///
    /// The integrand has a logarithmic blow-up where h vanishes toward the
    /// boundary, so it is split as alpha (N_ref int 1/h + int (N - N_ref)/h)
    /// per material piece and h-kink-free sub-segment: the singular factor
    /// integrates in closed form and the remainder is bounded (N is
    /// Lipschitz and h decays linearly), leaving a cheap quadrature.
    fn alpha_h_flight_integral(&self, r: Vec2, v: Vec2, len: f64) -> Result<f64> {
        let tol = if self.field.domain.dim() == 1 { 1e-13 } else { 1e-10 };
        let domain = &self.field.domain;

        if !self.h.vanishes_outgoing() {
            // bounded rates: plain quadrature per material piece
            let mut total = 0.0;
            domain.for_each_region_piece(r, v, len, |a, b, reg| {
                let mat = self.field.material(reg);
                total += adaptive_simpson(
                    &|s: f64| {
                        let pos = r.advance(v, s);
                        self.kernel_sum(mat, pos, v) / self.h.eval(domain, pos, v)
                    },
                    a,
                    b,
                    tol * (b - a).max(1e-6),
                );
                std::ops::ControlFlow::Continue(())
            });
            return Ok(total);
        }

        let mut kinks = Vec::new();
        own_ray_kinks(&self.h, domain, r, v, len, &mut kinks);
        kinks.sort_by(|a, b| a.partial_cmp(b).unwrap());

        let mut total = 0.0;
        let mut bad = false;
        domain.for_each_region_piece(r, v, len, |a, b, reg| {
            let mat = self.field.material(reg);
            let alpha = mat.alpha();
            if alpha == 0.0 {
                return std::ops::ControlFlow::Continue(());
            }
            // sub-segments between h-kinks inside this material piece
            let mut p = a;
            let mut bounds: Vec<f64> = kinks.iter().copied().filter(|&s| s > a && s < b).collect();
            bounds.push(b);
            for q in bounds {
                let h_p = self.eval_h(r.advance(v, p), v);
                let h_q = self.eval_h(r.advance(v, q), v);
                if h_p <= 0.0 || h_q <= 0.0 {
                    bad = true;
                    return std::ops::ControlFlow::Break(());
                }
                let inv = self.inverse_h_integral(r, v, p, q, h_p, h_q);
                // anchor the kernel mean at the endpoint where h is
                // smallest, where the remainder must vanish
                let s_ref = if h_p <= h_q { p } else { q };
                let n_ref = self.kernel_sum(mat, r.advance(v, s_ref), v) / alpha;
                let rest = adaptive_simpson(
                    &|s: f64| {
                        let pos = r.advance(v, s);
                        let n = self.kernel_sum(mat, pos, v) / alpha;
                        (n - n_ref) / self.h.eval(domain, pos, v)
                    },
                    p,
                    q,
                    tol * (q - p).max(1e-6),
                );
                total += alpha * (n_ref * inv + rest);
                p = q;
            }
            std::ops::ControlFlow::Continue(())
        });
        if bad {
            return Err(Error::SingularRate { x: r.advance(v, len).x, y: r.advance(v, len).y });
        }
        Ok(total)
    }

    /// log of the Feynman-Kac factor exp(int_0^t (Lh/h + beta) ds) along a
    /// completed h-walk path, clipped at time t. The transport part
    /// telescopes exactly into log-ratios of h along each flight; the jump
    /// part is int (alpha_h - alpha) ds; beta is exact per material piece.
    pub fn log_fk_weight(&self, path: &NrwPath, t: f64) -> Result<f64> {
        let t = t.min(path.t_end);
        let mut log_w = path.beta_integral(self.field, t)?;
        for k in 0..path.events.len() {
            let e = &path.events[k];
            if e.t >= t {
                break;
            }
            let seg_end = if k + 1 < path.events.len() { path.events[k + 1].t } else { path.t_end };
            let seg_end = seg_end.min(t);
            let len = seg_end - e.t;
            if len <= 0.0 {
                continue;
            }
            let h_start = self.eval_h(e.r, e.v);
            let h_end = self.eval_h(e.r.advance(e.v, len), e.v);
            if h_start <= 0.0 || h_end <= 0.0 {
                return Err(Error::SingularRate { x: e.r.x, y: e.r.y });
            }
            log_w += (h_end / h_start).ln();
            log_w += self.alpha_h_flight_integral(e.r, e.v, len)?;
            log_w -= self.alpha_integral(e.r, e.v, len);
        }
        Ok(log_w)
    }

    /// The same Feynman-Kac log-factor assembled in the product form:
    /// int (Jh/h + beta) ds plus log h-ratios across scatter jumps, plus the
    /// overall end/start correction. Retained as an algebraic cross-check of
    /// [`Self::log_fk_weight`] on short horizons.
    pub fn log_fk_weight_product_form(&self, path: &NrwPath, t: f64) -> Result<f64> {
        let t = t.min(path.t_end);
        // int (Jh/h + beta) ds
        let mut log_w = path.beta_integral(self.field, t)?;
        for k in 0..path.events.len() {
            let e = &path.events[k];
            if e.t >= t {
                break;
            }
            let seg_end = if k + 1 < path.events.len() { path.events[k + 1].t } else { path.t_end };
            let seg_end = seg_end.min(t);
            let len = seg_end - e.t;
            if len <= 0.0 {
                continue;
            }
            log_w += self.alpha_h_flight_integral(e.r, e.v, len)?;
            log_w -= self.alpha_integral(e.r, e.v, len);
        }
        // product over scatters of h(arrival, v_old) / h(arrival, v_new),
        // inverted by the change of measure, plus terminal/initial h ratio
        let (r_t, v_t) = path.state_unchecked(t);
        let h_t = self.eval_h(r_t, v_t);
        let h_0 = self.eval_h(path.events[0].r, path.events[0].v);
        if h_t <= 0.0 || h_0 <= 0.0 {
            return Err(Error::SingularRate { x: r_t.x, y: r_t.y });
        }
        let mut jump_ratios = 0.0;
        for k in 1..path.events.len() {
            if path.events[k].t > t {
                break;
            }
            let arr = &path.events[k];
            let before = self.eval_h(arr.r, path.events[k - 1].v);
            let after = self.eval_h(arr.r, arr.v);
            if before <= 0.0 || after <= 0.0 {
                return Err(Error::SingularRate { x: arr.r.x, y: arr.r.y });
            }
            jump_ratios += (before / after).ln();
        }
        Ok(log_w + (h_t / h_0).ln() + jump_ratios)
    }
}

/// Thinning law for the transformed walk.
struct HLaw<'a, 'b> {
    ht: &'b HTransform<'a>,
}

impl WalkLaw for HLaw<'_, '_> {
    fn flight(&self, r: Vec2, v: Vec2, s_max: f64, rng: &mut SimRng) -> Result<FlightOutcome> {
        let ht = self.ht;
        let domain = &ht.field.domain;
        let kappa = domain.exit_time(r, v)?;
        let cap = kappa.min(s_max);
        let vanishes = ht.h.vanishes_outgoing() && kappa <= s_max;
        let mut outcome: Option<FlightOutcome> = None;
        let mut singular = false;

        domain.for_each_region_piece(r, v, cap, |a, b, reg| {
            let mat = ht.field.material(reg);
            let alpha = mat.alpha();
            if alpha <= 0.0 {
                return std::ops::ControlFlow::Continue(());
            }
            let last_piece = b >= cap * (1.0 - 1e-15);
            let subdivide = vanishes && last_piece;
            let gap_floor = kappa * 1e-13;
            let mut p = a;
            loop {
                if subdivide && b - p < gap_floor {
                    // numerically pinned against the boundary: the diverging
                    // rate makes an immediate scatter certain
                    outcome = Some(FlightOutcome::Scatter(p));
                    return std::ops::ControlFlow::Break(());
                }
                let q = if subdivide { 0.5 * (p + b) } else { b };
                let h_p = ht.eval_h(r.advance(v, p), v);
                let h_q = ht.eval_h(r.advance(v, q), v);
                // along-ray sections are concave or monotone: the segment
                // minimum sits at an endpoint
                let h_min = h_p.min(h_q);
                if h_min <= 0.0 {
                    singular = true;
                    return std::ops::ControlFlow::Break(());
                }
                let bound = alpha * ht.sup_h / h_min;
                let mut s = p;
                loop {
                    let step: f64 = Exp1.sample(rng);
                    s += step / bound;
                    if s >= q {
                        break;
                    }
                    let pos = r.advance(v, s);
                    let rate = ht.kernel_sum(mat, pos, v) / ht.h.eval(domain, pos, v);
                    debug_assert!(rate <= bound * (1.0 + 1e-9), "thinning bound violated");
                    if rng.random::<f64>() * bound < rate {
                        outcome = Some(FlightOutcome::Scatter(s));
                        return std::ops::ControlFlow::Break(());
                    }
                }
                if q >= b {
                    break;
                }
                p = q;
            }
            std::ops::ControlFlow::Continue(())
        });

        if singular {
            return Err(Error::SingularRate { x: r.x, y: r.y });
        }
        match outcome {
            Some(FlightOutcome::Scatter(s)) if s >= s_max => Ok(FlightOutcome::Horizon),
            Some(o) => Ok(o),
            None if kappa <= s_max => Ok(FlightOutcome::Exit(kappa)),
            None => Ok(FlightOutcome::Horizon),
        }
    }

    fn scatter_velocity(&self, r: Vec2, v: Vec2, rng: &mut SimRng) -> Result<Vec2> {
        self.ht.sample_pih(r, v, rng)
    }
}

/// Grid extrema of (L + beta) h / h and of Lh/h, with refinement toward the
/// boundary to detect divergence of the upper bound.
#[derive(Clone, Copy, Debug)]
pub struct VarsigmaBounds {
    pub lower: f64,
    pub upper: f64,
    pub sup_lh_over_h: f64,
    /// The upper bound grows without bound under boundary refinement (the
    /// blow-up signature of a poorly chosen h).
    pub upper_diverges: bool,
}

impl HTransform<'_> {
    /// Scan (Lh/h + beta) and Lh/h over a position grid and velocity set,
    /// then refine toward the boundary: a monotone blow-up across
    /// refinement levels flags an infinite upper bound.
    pub fn varsigma_bounds(&self, positions: usize, refinement_levels: usize) -> Result<VarsigmaBounds> {
        let domain = &self.field.domain;
        let velocities: Vec<Vec2> = match &self.field.velocity {
            crate::geometry::VelocitySpace::TwoPoint1D { v0 } => {
                vec![Vec2::x1(*v0), Vec2::x1(-*v0)]
            }
            crate::geometry::VelocitySpace::FixedSpeed2D { v0 } => (0..16)
                .map(|j| Vec2::from_angle(2.0 * std::f64::consts::PI * j as f64 / 16.0, *v0))
                .collect(),
            crate::geometry::VelocitySpace::Annulus2D { vmax, .. } => (0..16)
                .map(|j| Vec2::from_angle(2.0 * std::f64::consts::PI * j as f64 / 16.0, *vmax))
                .collect(),
        };
        let points = grid_points(domain, positions);
        let mut lower = f64::INFINITY;
        let mut upper = f64::NEG_INFINITY;
        let mut sup_lh = f64::NEG_INFINITY;
        for &r in &points {
            for &v in &velocities {
                let lh = self.lh_over_h(r, v)?;
                let beta = self.field.beta(r, v)?;
                lower = lower.min(lh + beta);
                upper = upper.max(lh + beta);
                sup_lh = sup_lh.max(lh);
            }
        }
        let base_sup = sup_lh;
        let mut level_sups = Vec::with_capacity(refinement_levels);
        let scale = match domain {
            Domain::Interval1D { half_width, .. } => *half_width,
            Domain::Rect2D { half_x, half_y, .. } => half_x.min(*half_y),
        };
        for j in 1..=refinement_levels {
            let d = scale / (positions as f64) / 2f64.powi(j as i32);
            let mut level_sup = f64::NEG_INFINITY;
            for &r in &boundary_probes(domain, d) {
                for &v in &velocities {
                    if !domain.contains(r) {
                        continue;
                    }
                    let lh = self.lh_over_h(r, v)?;
                    let beta = self.field.beta(r, v)?;
                    lower = lower.min(lh + beta);
                    level_sup = level_sup.max(lh);
                }
            }
            level_sups.push(level_sup);
            sup_lh = sup_lh.max(level_sup);
            upper = upper.max(level_sup + self.field.beta_sup());
        }
        // diverging: every refinement strictly raises the sup and the finest
        // level has left the base scale far behind
        let diverges = level_sups.len() >= 3
            && level_sups.windows(2).all(|w| w[1] > w[0] + 1e-9)
            && *level_sups.last().unwrap() > 10.0 * base_sup.abs() + 100.0;
        Ok(VarsigmaBounds {
            lower,
            upper: if diverges { f64::INFINITY } else { upper },
            sup_lh_over_h: if diverges { f64::INFINITY } else { sup_lh },
            upper_diverges: diverges,
        })
    }
}

fn grid_points(domain: &Domain, n: usize) -> Vec<Vec2> {
    match domain {
        Domain::Interval1D { half_width, .. } => (0..n)
            .map(|i| Vec2::x1(-half_width + (i as f64 + 0.5) * 2.0 * half_width / n as f64))
            .collect(),
        Domain::Rect2D { half_x, half_y, .. } => {
            let m = (n as f64).sqrt().ceil() as usize;
            let mut pts = Vec::with_capacity(m * m);
            for i in 0..m {
                for j in 0..m {
                    pts.push(Vec2::new(
                        -half_x + (i as f64 + 0.5) * 2.0 * half_x / m as f64,
                        -half_y + (j as f64 + 0.5) * 2.0 * half_y / m as f64,
                    ));
                }
            }
            pts
        }
    }
}

fn boundary_probes(domain: &Domain, d: f64) -> Vec<Vec2> {
    match domain {
        Domain::Interval1D { half_width, .. } => {
            vec![Vec2::x1(half_width - d), Vec2::x1(-half_width + d)]
        }
        Domain::Rect2D { half_x, half_y, .. } => vec![
            Vec2::new(half_x - d, 0.0),
            Vec2::new(-half_x + d, 0.0),
            Vec2::new(0.0, half_y - d),
            Vec2::new(0.0, -half_y + d),
            Vec2::new(half_x - d, half_y - d),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::cycle_rng;
    use crate::slab1d::{eigen, SlabConfig};

    fn slab_field(sigma_s: f64, sigma_f: f64, m: f64) -> CrossSectionField {
        CrossSectionField::slab(1.0, 1.0, sigma_s, sigma_f, m).unwrap()
    }

    fn h1(field: &CrossSectionField) -> HTransform<'_> {
        let reach = 1.0 / field.materials()[0].sigma_s;
        HTransform::new(field, HFunction::Slab1dH1 { half_width: 1.0, reach }, DEFAULT_N_ANGLE).unwrap()
    }

    #[test]
    fn slab_h1_matches_hand_values() {
        let field = slab_field(0.5, 0.4, 2.0);
        let ht = h1(&field); // reach = v0 / sigma_s = 2
        // h(1-, +v0) = 0 and h(-1+, +v0) = min(0 + 2, 2) = 2
        assert!(ht.eval_h(Vec2::x1(1.0 - 1e-12), Vec2::x1(1.0)) < 1e-11);
        assert!((ht.eval_h(Vec2::x1(-1.0 + 1e-12), Vec2::x1(1.0)) - 2.0).abs() < 1e-11);
        // mirror symmetry
        assert_eq!(
            ht.eval_h(Vec2::x1(0.3), Vec2::x1(-1.0)),
            ht.eval_h(Vec2::x1(-0.3), Vec2::x1(1.0))
        );
    }

    #[test]
    fn lifted_h_boundary_value_is_epsilon() {
        let field = slab_field(0.5, 0.4, 2.0);
        let h = HFunction::Lifted {
            base: Box::new(HFunction::DirectionalDistance { c: 1.0 }),
            epsilon: 0.01,
        };
        let ht = HTransform::new(&field, h, DEFAULT_N_ANGLE).unwrap();
        let at_boundary = ht.eval_h(Vec2::x1(1.0), Vec2::x1(1.0));
        assert!((at_boundary - 0.01).abs() < 1e-12);
    }

    #[test]
    fn directional_distance_transport_is_minus_inverse_kappa() {
        let field = slab_field(0.5, 0.4, 2.0);
        let ht = HTransform::new(&field, HFunction::DirectionalDistance { c: 0.7 }, DEFAULT_N_ANGLE).unwrap();
        let r = Vec2::x1(0.25);
        let v = Vec2::x1(1.0);
        let kappa = field.domain.exit_time(r, v).unwrap();
        assert!((ht.transport_term(r, v).unwrap() + 1.0 / kappa).abs() < 1e-12);
    }

    #[test]
    fn slab_h1_transport_active_piece() {
        // at r with active piece (L - r), v = +v0: Th/h = -v0 / (L - r)
        let field = slab_field(0.5, 0.4, 2.0);
        let ht = h1(&field);
        let r = Vec2::x1(0.5);
        let v = Vec2::x1(1.0);
        assert!((ht.transport_term(r, v).unwrap() + 1.0 / 0.5).abs() < 1e-12);
    }

    #[test]
    fn constant_h_is_identity_transform() {
        let field = slab_field(0.5, 0.4, 2.0);
        let ht = HTransform::new(&field, HFunction::Constant { value: 3.0 }, DEFAULT_N_ANGLE).unwrap();
        let r = Vec2::x1(0.1);
        let v = Vec2::x1(1.0);
        assert_eq!(ht.transport_term(r, v).unwrap(), 0.0);
        assert!((ht.jump_term(r, v).unwrap()).abs() < 1e-12);
        let alpha = field.alpha(r, v).unwrap();
        assert!((ht.alpha_h(r, v).unwrap() - alpha).abs() < 1e-12);
        assert!((ht.beta_h(r, v).unwrap() - field.beta(r, v).unwrap()).abs() < 1e-12);

        // identical seeds, identical paths vs the plain walk
        let a = ht.simulate(Vec2::x1(0.0), Vec2::x1(1.0), 0.0, 20.0, &mut cycle_rng(5, 1)).unwrap();
        let b = crate::nrw::simulate_nrw(&field, Vec2::x1(0.0), Vec2::x1(1.0), 0.0, 20.0, &mut cycle_rng(5, 1)).unwrap();
        assert_eq!(a.events.len(), b.events.len());
        for (x, y) in a.events.iter().zip(&b.events) {
            assert_eq!(x.t.to_bits(), y.t.to_bits());
        }
    }

    #[test]
    fn jump_term_hand_check_slab_h1() {
        // sigma_s = 0.5, sigma_f = 0.4, m = 2, reach = 2
        let field = slab_field(0.5, 0.4, 2.0);
        let ht = HTransform::new(&field, HFunction::Slab1dH1 { half_width: 1.0, reach: 2.0 }, DEFAULT_N_ANGLE).unwrap();
        let v = Vec2::x1(1.0);
        // r = 0: h(+) = min(3, 1) = 1, h(-) = min(1, 3) = 1
        // Jh/h = (0.5*1 + 0.8*1)/1 - 1.3 = 0
        assert!(ht.jump_term(Vec2::x1(0.0), v).unwrap().abs() < 1e-12);
        // r = 0.3: h(+) = 0.7, h(-) = 1.3
        // Jh/h = (0.5*1.3 + 0.8*0.7)/0.7 - 1.3 = 1.21/0.7 - 1.3
        let expect = 1.21 / 0.7 - 1.3;
        assert!((ht.jump_term(Vec2::x1(0.3), v).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn jump_term_2d_matches_refined_quadrature() {
        let field = CrossSectionField::new(
            Domain::rect(1.0, 1.0, vec![]).unwrap(),
            crate::geometry::VelocitySpace::FixedSpeed2D { v0: 1.0 },
            ScatterKernel::UniformAngle2D,
            crate::xsection::FissionKernel::UniformAngle2D,
            vec![Material::new(0.5, 0.4, 2.0)],
        )
        .unwrap();
        let h = HFunction::DirectionalDistance { c: 1.0 };
        let coarse = HTransform::new(&field, h.clone(), DEFAULT_N_ANGLE).unwrap();
        let fine = HTransform::new(&field, h, 1_000_000).unwrap();
        let r = Vec2::new(0.0, 0.0);
        let v = Vec2::from_angle(0.37, 1.0);
        let a = coarse.jump_term(r, v).unwrap();
        let b = fine.jump_term(r, v).unwrap();
        assert!((a - b).abs() < 1e-5 * b.abs().max(1.0), "coarse {a} fine {b}");
    }

    #[test]
    fn pih_two_point_probabilities() {
        let field = slab_field(0.5, 0.4, 2.0);
        let ht = h1(&field);
        let r = Vec2::x1(0.3);
        let v = Vec2::x1(1.0);
        // flip probability 0.5 h(-) / (0.5 h(-) + 0.8 h(+))
        let p_flip = 0.5 * 1.3 / (0.5 * 1.3 + 0.8 * 0.7);
        let mut rng = cycle_rng(17, 0);
        let n = 200_000;
        let mut flips = 0u64;
        for _ in 0..n {
            if ht.sample_pih(r, v, &mut rng).unwrap().x < 0.0 {
                flips += 1;
            }
        }
        let p_hat = flips as f64 / n as f64;
        let se = (p_flip * (1.0 - p_flip) / n as f64).sqrt();
        assert!((p_hat - p_flip).abs() < 3.5 * se, "p_hat = {p_hat}, p = {p_flip}");
    }

    #[test]
    fn pih_2d_rejection_matches_density() {
        let field = CrossSectionField::new(
            Domain::rect(1.0, 1.0, vec![]).unwrap(),
            crate::geometry::VelocitySpace::FixedSpeed2D { v0: 1.0 },
            ScatterKernel::UniformAngle2D,
            crate::xsection::FissionKernel::UniformAngle2D,
            vec![Material::new(0.5, 0.4, 2.0)],
        )
        .unwrap();
        let ht = HTransform::new(&field, HFunction::DirectionalDistance { c: 1.0 }, 4096).unwrap();
        let r = Vec2::new(0.4, -0.2);
        let v = Vec2::from_angle(1.0, 1.0);
        let bins = 12;
        let mut counts = vec![0u64; bins];
        let mut rng = cycle_rng(23, 0);
        let n = 100_000u64;
        for _ in 0..n {
            let w = ht.sample_pih(r, v, &mut rng).unwrap();
            let mut theta = w.y.atan2(w.x);
            if theta < 0.0 {
                theta += 2.0 * std::f64::consts::PI;
            }
            counts[(theta / (2.0 * std::f64::consts::PI) * bins as f64) as usize % bins] += 1;
        }
        // bin masses of the normalized h-density by direct quadrature
        let mut masses = vec![0.0f64; bins];
        let nodes = 20_000;
        for j in 0..nodes {
            let theta = 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / nodes as f64;
            let w = ht.eval_h(r, Vec2::from_angle(theta, 1.0));
            masses[(theta / (2.0 * std::f64::consts::PI) * bins as f64) as usize % bins] += w;
        }
        let total: f64 = masses.iter().sum();
        let chi2: f64 = counts
            .iter()
            .zip(&masses)
            .map(|(&c, &m)| {
                let e = n as f64 * m / total;
                (c as f64 - e).powi(2) / e
            })
            .sum();
        // 1% critical value of chi-square with 11 degrees of freedom
        assert!(chi2 < 24.725, "chi2 = {chi2}");
    }

    #[test]
    fn conservative_h_never_exits() {
        let field = slab_field(0.5, 0.4, 2.0);
        let ht = HTransform::new(&field, HFunction::DirectionalDistance { c: 1.0 }, DEFAULT_N_ANGLE).unwrap();
        assert!(ht.h().conservative());
        for c in 0..300 {
            let mut rng = cycle_rng(31, c);
            let p = ht.simulate(Vec2::x1(0.2), Vec2::x1(1.0), 0.0, 30.0, &mut rng).unwrap();
            assert!(!p.exited(), "conservative walk exited at cycle {c}");
            assert_eq!(p.t_end, 30.0);
        }
    }

    #[test]
    fn heavily_lifted_h_behaves_like_plain_walk() {
        // epsilon >> diam: the transformed rates converge to the plain ones,
        // so the exit fraction matches within Monte Carlo error
        let field = slab_field(0.5, 0.4, 2.0);
        let h = HFunction::Lifted {
            base: Box::new(HFunction::DirectionalDistance { c: 1.0 }),
            epsilon: 1e3,
        };
        let ht = HTransform::new(&field, h, DEFAULT_N_ANGLE).unwrap();
        let n = 4000;
        let mut exits_h = 0u64;
        let mut exits_plain = 0u64;
        for c in 0..n {
            let mut rng = cycle_rng(37, c);
            if ht.simulate(Vec2::x1(0.0), Vec2::x1(1.0), 0.0, 6.0, &mut rng).unwrap().exited() {
                exits_h += 1;
            }
            let mut rng = cycle_rng(38, c);
            if crate::nrw::simulate_nrw(&field, Vec2::x1(0.0), Vec2::x1(1.0), 0.0, 6.0, &mut rng)
                .unwrap()
                .exited()
            {
                exits_plain += 1;
            }
        }
        let (p1, p2) = (exits_h as f64 / n as f64, exits_plain as f64 / n as f64);
        let se = (p1 * (1.0 - p1) / n as f64 + p2 * (1.0 - p2) / n as f64).sqrt();
        assert!((p1 - p2).abs() < 3.0 * se, "p1 = {p1}, p2 = {p2}");
    }

    #[test]
    fn fk_weight_forms_agree() {
        let field = slab_field(0.5, 0.4, 2.0);
        let ht = h1(&field);
        for c in 0..50 {
            let mut rng = cycle_rng(41, c);
            let p = ht.simulate(Vec2::x1(0.1), Vec2::x1(1.0), 0.0, 4.0, &mut rng).unwrap();
            let a = ht.log_fk_weight(&p, 4.0).unwrap();
            let b = ht.log_fk_weight_product_form(&p, 4.0).unwrap();
            assert!((a - b).abs() < 1e-9, "forms differ: {a} vs {b}");
        }
    }

    #[test]
    fn reproducible_h_walk() {
        let field = slab_field(0.5, 0.4, 2.0);
        let ht = h1(&field);
        let a = ht.simulate(Vec2::x1(0.0), Vec2::x1(1.0), 0.0, 15.0, &mut cycle_rng(43, 2)).unwrap();
        let b = ht.simulate(Vec2::x1(0.0), Vec2::x1(1.0), 0.0, 15.0, &mut cycle_rng(43, 2)).unwrap();
        assert_eq!(a.events.len(), b.events.len());
        for (x, y) in a.events.iter().zip(&b.events) {
            assert_eq!(x.r.x.to_bits(), y.r.x.to_bits());
        }
    }

    #[test]
    fn varsigma_constant_h_is_beta_range() {
        let field = slab_field(0.5, 0.4, 2.0);
        let ht = HTransform::new(&field, HFunction::Constant { value: 1.0 }, DEFAULT_N_ANGLE).unwrap();
        let b = ht.varsigma_bounds(64, 10).unwrap();
        assert!((b.lower - 0.4).abs() < 1e-9);
        assert!((b.upper - 0.4).abs() < 1e-9);
        assert!(!b.upper_diverges);
    }

    #[test]
    fn varsigma_slab_phi_pins_lambda() {
        // h = phi: (L + beta) phi / phi = lambda* pointwise
        let cfg = SlabConfig::new(1.0, 1.0, 0.5, 0.8).unwrap();
        let e = eigen(cfg).unwrap();
        let field = slab_field(0.5, 0.8, 2.0);
        let ht = HTransform::new(&field, HFunction::SlabPhi { eigen: e.clone() }, DEFAULT_N_ANGLE).unwrap();
        let b = ht.varsigma_bounds(64, 12).unwrap();
        assert!(!b.upper_diverges);
        assert!((b.lower - e.lambda_star).abs() < 1e-3, "lower {} vs {}", b.lower, e.lambda_star);
        assert!((b.upper - e.lambda_star).abs() < 1e-3, "upper {} vs {}", b.upper, e.lambda_star);
    }

    #[test]
    fn varsigma_h2_diverges_under_refinement() {
        // theta < 1 makes the h2 ratio blow up under boundary refinement
        let field = CrossSectionField::slab(1.0, 0.6, 0.5, 0.4, 2.0).unwrap();
        let ht = HTransform::new(&field, HFunction::Slab1dH2 { half_width: 1.0 }, DEFAULT_N_ANGLE).unwrap();
        let b = ht.varsigma_bounds(64, 16).unwrap();
        assert!(b.upper_diverges, "expected divergence flag, got {b:?}");
        assert!(b.sup_lh_over_h.is_infinite());
    }

    #[test]
    fn zero_variance_weight_with_phi() {
        // h = phi, g = phi: the per-path log weight is exactly lambda* t
        let cfg = SlabConfig::new(1.0, 1.0, 0.5, 1.2).unwrap();
        let e = eigen(cfg).unwrap();
        let field = slab_field(0.5, 1.2, 2.0);
        let ht = HTransform::new(&field, HFunction::SlabPhi { eigen: e.clone() }, DEFAULT_N_ANGLE).unwrap();
        let t = 8.0;
        let expect = e.lambda_star * t;
        for c in 0..20 {
            let mut rng = cycle_rng(47, c);
            let p = ht.simulate(Vec2::x1(0.2), Vec2::x1(1.0), 0.0, t, &mut rng).unwrap();
            assert!(!p.exited());
            let log_w = ht.log_fk_weight(&p, t).unwrap();
            assert!((log_w - expect).abs() < 1e-10, "cycle {c}: log weight {log_w} vs {expect}");
        }
    }
}
