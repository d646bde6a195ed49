//! Analytic oracle for the one-dimensional slab reactor: fixed-point
//! solvers, closed-form principal eigenvalue and eigenfunctions, and the
//! variance constants of the branching-estimator error expansion.
//!
//! The slab has domain (-L, L), velocities {-v0, +v0}, constant sigma_s and
//! sigma_f, sign-flip scattering and mean yield 2 at the parent velocity.
//! With theta = v0 / (2 L sigma_s) the eigenpair is, up to the normalisation
//! phi(0, +v0) = phi_tilde(0, -v0) = 1:
//!
//!   theta > 1:  sinh(x)/x = theta,  lambda = sigma_f - sigma_s - sqrt(sigma_s^2 + (v0 x/2L)^2)
//!   theta = 1:  x = 0,              lambda = sigma_f - 2 sigma_s
//!   theta < 1:  sin(x)/x = theta,   lambda = sigma_f - sigma_s - sgn(cos x) sqrt(sigma_s^2 - (v0 x/2L)^2)
//!
//! and phi(r, +v0) is the matching sinh / affine / sin profile with
//! phi(r, -v0) = phi(-r, +v0) and phi_tilde mirrored.

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::numeric::{adaptive_simpson, bisect};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlabConfig {
    pub half_width: f64,
    pub v0: f64,
    pub sigma_s: f64,
    pub sigma_f: f64,
}

impl SlabConfig {
    pub fn new(half_width: f64, v0: f64, sigma_s: f64, sigma_f: f64) -> Result<Self> {
        if !(half_width > 0.0 && v0 > 0.0 && sigma_s > 0.0 && sigma_f > 0.0) {
            return Err(Error::config("slab parameters must all be strictly positive"));
        }
        Ok(SlabConfig { half_width, v0, sigma_s, sigma_f })
    }

    pub fn theta(&self) -> f64 {
        self.v0 / (2.0 * self.half_width * self.sigma_s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlabRegime {
    ThetaGt1,
    ThetaEq1,
    ThetaLt1,
}

/// Solve the regime's fixed-point equation for x*.
///
/// theta > 1: unique nonnegative root of sinh(x)/x = theta;
/// theta < 1: smallest positive root of sin(x)/x = theta, in (0, pi);
/// theta = 1: x* = 0.
pub fn solve_fixed_point(theta: f64) -> Result<f64> {
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(Error::config("theta must be positive and finite"));
    }
    const TOL: f64 = 1e-13;
    if theta == 1.0 {
        return Ok(0.0);
    }
    if theta > 1.0 {
        // sinh(x)/x increases from 1; double until bracketed
        let f = |x: f64| x.sinh() / x - theta;
        let mut hi = 1.0;
        while f(hi) < 0.0 {
            hi *= 2.0;
        }
        // sinh(x)/x -> 1 as x -> 0, so f < 0 near 0
        Ok(bisect(f64::MIN_POSITIVE.max(1e-300), hi, TOL, f))
    } else {
        // sin(x)/x decreases from 1 to sin(pi)/pi = 0 on (0, pi)
        let f = |x: f64| x.sin() / x - theta;
        Ok(bisect(1e-300, std::f64::consts::PI, TOL, f))
    }
}

/// The principal eigenvalue and eigenfunctions of the slab.
#[derive(Clone, Debug)]
pub struct SlabEigen {
    pub config: SlabConfig,
    pub regime: SlabRegime,
    pub x_star: f64,
    pub lambda_star: f64,
}

/// Regime dispatch: solve the fixed point and assemble the eigen data.
pub fn eigen(config: SlabConfig) -> Result<SlabEigen> {
    let theta = config.theta();
    let x_star = solve_fixed_point(theta)?;
    let (regime, lambda_star) = if theta > 1.0 {
        let rate = config.v0 * x_star / (2.0 * config.half_width);
        (
            SlabRegime::ThetaGt1,
            config.sigma_f - config.sigma_s - (config.sigma_s.powi(2) + rate * rate).sqrt(),
        )
    } else if theta < 1.0 {
        let rate = config.v0 * x_star / (2.0 * config.half_width);
        let root = (config.sigma_s.powi(2) - rate * rate).max(0.0).sqrt();
        (
            SlabRegime::ThetaLt1,
            config.sigma_f - config.sigma_s - x_star.cos().signum() * root,
        )
    } else {
        (SlabRegime::ThetaEq1, config.sigma_f - 2.0 * config.sigma_s)
    };
    Ok(SlabEigen { config, regime, x_star, lambda_star })
}

impl SlabEigen {
    /// The scalar profile phi(r) = phi(r, +v0), normalised to phi(0) = 1.
    pub fn phi_profile(&self, r: f64) -> f64 {
        let l = self.config.half_width;
        let u = 0.5 * self.x_star * (1.0 - r / l);
        match self.regime {
            SlabRegime::ThetaGt1 => u.sinh() / (0.5 * self.x_star).sinh(),
            SlabRegime::ThetaEq1 => 1.0 - r / l,
            SlabRegime::ThetaLt1 => u.sin() / (0.5 * self.x_star).sin(),
        }
    }

    /// d/dr of the profile.
    pub fn phi_profile_deriv(&self, r: f64) -> f64 {
        let l = self.config.half_width;
        let u = 0.5 * self.x_star * (1.0 - r / l);
        let du = -0.5 * self.x_star / l;
        match self.regime {
            SlabRegime::ThetaGt1 => du * u.cosh() / (0.5 * self.x_star).sinh(),
            SlabRegime::ThetaEq1 => -1.0 / l,
            SlabRegime::ThetaLt1 => du * u.cos() / (0.5 * self.x_star).sin(),
        }
    }

    /// Right eigenfunction phi(r, v).
    pub fn phi(&self, r: Vec2, v: Vec2) -> f64 {
        if v.x > 0.0 {
            self.phi_profile(r.x)
        } else {
            self.phi_profile(-r.x)
        }
    }

    /// d/ds phi(r + v s, v) at s = 0 (directional derivative along v).
    pub fn phi_ray_deriv(&self, r: Vec2, v: Vec2) -> f64 {
        if v.x > 0.0 {
            v.x * self.phi_profile_deriv(r.x)
        } else {
            -v.x * self.phi_profile_deriv(-r.x)
        }
    }

    /// Closed-form antiderivative of 1/profile: int_{x_from}^{x_to} dx /
    /// phi(x). Defined for both endpoints strictly inside (-L, L).
    pub fn inverse_profile_integral(&self, x_from: f64, x_to: f64) -> f64 {
        let l = self.config.half_width;
        let x_star = self.x_star;
        match self.regime {
            // phi = sinh(u)/sinh(x*/2), u = (x*/2)(1 - x/L):
            // int dx/phi = sinh(x*/2) (-2L/x*) ln tanh(u/2)
            SlabRegime::ThetaGt1 => {
                let anti = |x: f64| {
                    let u = 0.5 * x_star * (1.0 - x / l);
                    -(2.0 * l / x_star) * (0.5 * x_star).sinh() * (0.5 * u).tanh().ln()
                };
                anti(x_to) - anti(x_from)
            }
            // phi affine: int dx/(1 - x/L) = -L ln(1 - x/L)
            SlabRegime::ThetaEq1 => {
                let anti = |x: f64| -l * (1.0 - x / l).ln();
                anti(x_to) - anti(x_from)
            }
            // phi = sin(u)/sin(x*/2): int dx/phi = sin(x*/2) (-2L/x*) ln tan(u/2)
            SlabRegime::ThetaLt1 => {
                let anti = |x: f64| {
                    let u = 0.5 * x_star * (1.0 - x / l);
                    -(2.0 * l / x_star) * (0.5 * x_star).sin() * (0.5 * u).tan().ln()
                };
                anti(x_to) - anti(x_from)
            }
        }
    }

    /// Left eigenmeasure density phi_tilde(r, v) = phi(-r, v-reflected):
    /// phi_tilde(r, +v0) = profile(-r), phi_tilde(r, -v0) = profile(r).
    pub fn phi_tilde(&self, r: Vec2, v: Vec2) -> f64 {
        if v.x > 0.0 {
            self.phi_profile(-r.x)
        } else {
            self.phi_profile(r.x)
        }
    }

    /// <f, phi_tilde> = sum over +-v0 of int f(r, v) phi_tilde(r, v) dr,
    /// with phi_tilde in the paper normalisation phi_tilde(0, -v0) = 1.
    pub fn inner_with_phi_tilde(&self, f: &impl Fn(Vec2, Vec2) -> f64) -> f64 {
        let l = self.config.half_width;
        let v0 = self.config.v0;
        let plus = adaptive_simpson(
            &|r: f64| f(Vec2::x1(r), Vec2::x1(v0)) * self.phi_profile(-r),
            -l,
            l,
            1e-10,
        );
        let minus = adaptive_simpson(
            &|r: f64| f(Vec2::x1(r), Vec2::x1(-v0)) * self.phi_profile(r),
            -l,
            l,
            1e-10,
        );
        plus + minus
    }

    /// <phi, phi_tilde> in the paper normalisation.
    pub fn phi_phi_tilde(&self) -> f64 {
        self.inner_with_phi_tilde(&|r, v| self.phi(r, v))
    }

    /// <f, phi_tilde> with phi_tilde renormalised so <phi, phi_tilde> = 1.
    pub fn inner_normalized(&self, f: &impl Fn(Vec2, Vec2) -> f64) -> f64 {
        self.inner_with_phi_tilde(f) / self.phi_phi_tilde()
    }

    /// kappa_4 = <sigma_s pi_s[f] + sigma_f pi_f[g], phi_tilde> phi(r, v)
    /// (the cost growth constant) with the <phi, phi_tilde> = 1 pair.
    pub fn cost_constant(
        &self,
        f: &impl Fn(Vec2, Vec2) -> f64,
        g: &impl Fn(Vec2, Vec2) -> f64,
        r: Vec2,
        v: Vec2,
    ) -> f64 {
        let c = self.config;
        let integrand = |p: Vec2, w: Vec2| {
            // pi_s flips the sign, pi_f has mass 2 at the parent velocity
            c.sigma_s * f(p, w.neg()) + c.sigma_f * 2.0 * g(p, w)
        };
        self.inner_normalized(&integrand) * self.phi(r, v)
    }
}

/// Finite-difference residual of the eigen ODE system
/// d/dr (f+, f-) = M (f+, f-), M = (1/v0) [[lam-sf+ss, -ss], [ss, -(lam-sf+ss)]]
/// with f+(L) = f-(-L) = 0, checked on an interior grid. Central differences
/// with step h.
pub fn verify_eigen(eigen: &SlabEigen, grid_points: usize, h: f64) -> f64 {
    let c = eigen.config;
    let l = c.half_width;
    let a = (eigen.lambda_star - c.sigma_f + c.sigma_s) / c.v0;
    let b = c.sigma_s / c.v0;
    let fp = |r: f64| eigen.phi_profile(r);
    let fm = |r: f64| eigen.phi_profile(-r);
    let mut worst: f64 = 0.0;
    for i in 1..grid_points {
        let r = -l + 2.0 * l * i as f64 / grid_points as f64;
        if r - h <= -l || r + h >= l {
            continue;
        }
        let dfp = (fp(r + h) - fp(r - h)) / (2.0 * h);
        let dfm = (fm(r + h) - fm(r - h)) / (2.0 * h);
        let res_p = dfp - (a * fp(r) - b * fm(r));
        let res_m = dfm - (b * fp(r) - a * fm(r));
        worst = worst.max(res_p.abs()).max(res_m.abs());
    }
    worst
}

/// Variance constants of the branching estimator error expansion, for the
/// implemented branching process: Poisson(m_f) offspring drawn i.i.d. from
/// eta_f, so eta_f[f](r, v) = sigma_f E[N(N-1)] (eta_f-mean of f)^2 with
/// E[N(N-1)] = m_f^2. On the slab the yield kernel is concentrated at the
/// parent velocity, giving eta_f[f] = sigma_f m^2 f^2.
#[derive(Clone, Copy, Debug)]
pub struct VarianceConstants {
    /// C0 = <g, phi_tilde> phi(r, v), the limit of the estimator itself.
    pub c0: f64,
    /// The regime constant C1 (critical), C2 (supercritical) or C3
    /// (subcritical).
    pub c_regime: f64,
    pub regime: SlabRegime,
    /// True when the constant uses the leading-order spectral approximation
    /// of the semigroup inside a time integral (the non-critical cases).
    pub approximate: bool,
}

pub fn variance_constants(
    eigen: &SlabEigen,
    g: &impl Fn(Vec2, Vec2) -> f64,
    r: Vec2,
    v: Vec2,
) -> VarianceConstants {
    let c = eigen.config;
    let m = 2.0;
    let norm = eigen.phi_phi_tilde();
    let inner = |f: &dyn Fn(Vec2, Vec2) -> f64| eigen.inner_with_phi_tilde(&|p, w| f(p, w)) / norm;

    // eta_f[phi](r, v) = sigma_f m^2 phi(r, v)^2
    let eta_phi = |p: Vec2, w: Vec2| c.sigma_f * m * m * eigen.phi(p, w).powi(2);
    let g_inner = inner(&|p, w| g(p, w));
    let eta_phi_inner = inner(&eta_phi);
    let phi_rv = eigen.phi(r, v);
    let lam = eigen.lambda_star;

    let (c_regime, approximate) = match eigen.regime_of_lambda() {
        LambdaSign::Critical => {
            // C1 = <eta_f[phi], phi_tilde> <g, phi_tilde>^2 phi(r, v), exact
            (eta_phi_inner * g_inner * g_inner * phi_rv, false)
        }
        LambdaSign::Super => {
            // C2 = <g,pt>^2 ( int_0^inf e^{-2 lam s} psi_s[eta_f[phi]] ds - phi^2 )
            // with psi_s[f] ~ e^{lam s} <f, pt> phi inside the integral
            let integral = eta_phi_inner * phi_rv / lam;
            (g_inner * g_inner * (integral - phi_rv * phi_rv), true)
        }
        LambdaSign::Sub => {
            // C3 = phi ( <g^2, pt> + int_0^inf e^{-lam s} <pt, eta_f[psi_s[g]]> ds ),
            // psi_s[g] ~ e^{lam s} <g, pt> phi
            let g2_inner = inner(&|p, w| g(p, w) * g(p, w));
            let integral = g_inner * g_inner * eta_phi_inner / (-lam);
            (phi_rv * (g2_inner + integral), true)
        }
    };

    VarianceConstants { c0: g_inner * phi_rv, c_regime, regime: eigen.regime, approximate }
}

enum LambdaSign {
    Critical,
    Super,
    Sub,
}

impl SlabEigen {
    fn regime_of_lambda(&self) -> LambdaSign {
        if self.lambda_star.abs() < 1e-12 {
            LambdaSign::Critical
        } else if self.lambda_star > 0.0 {
            LambdaSign::Super
        } else {
            LambdaSign::Sub
        }
    }
}
