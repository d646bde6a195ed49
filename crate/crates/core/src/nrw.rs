//! Simulation of neutron random walks: linear flight, scattering at an
//! inhomogeneous rate, killed on the domain boundary or truncated at the
//! horizon. Paths are exact: scatter times come from piecewise-exponential
//! inversion (materials are piecewise constant along any ray), and line
//! integrals of piecewise-constant data along a path carry no quadrature
//! error.

use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::geometry::{Domain, RegionId, Vec2};
use crate::rng::SimRng;
use crate::xsection::CrossSectionField;

/// How a trajectory ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EndCause {
    /// Killed on the boundary of the domain.
    Exit,
    /// Truncated at the time horizon.
    Horizon,
    /// Removed by a fission event (branching process particles only).
    Fission,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathEvent {
    pub t: f64,
    pub r: Vec2,
    pub v: Vec2,
}

/// One walk: the ordered scatter events, the terminal time and how it died.
/// `events[0]` is the initial state.
#[derive(Clone, Debug)]
pub struct NrwPath {
    pub events: Vec<PathEvent>,
    pub t_end: f64,
    pub end: EndCause,
}

impl NrwPath {
    pub fn start_time(&self) -> f64 {
        self.events[0].t
    }

    /// True iff the walk was killed at the boundary before the horizon.
    pub fn exited(&self) -> bool {
        self.end == EndCause::Exit
    }

    pub fn scatter_count(&self) -> usize {
        self.events.len() - 1
    }

    /// Is the particle present at time t? Death by exit or fission is
    /// half-open (dead at its own time); reaching the horizon counts as
    /// alive there.
    pub fn alive_at(&self, t: f64) -> bool {
        if t < self.start_time() {
            return false;
        }
        t < self.t_end || (t == self.t_end && self.end == EndCause::Horizon)
    }

    /// State at the terminal time, extrapolated along the last segment
    /// (the exit point for killed paths, the fission point for trimmed ones).
    pub fn state_at_end(&self) -> (Vec2, Vec2) {
        let e = self.events.last().expect("path has events");
        (e.r.advance(e.v, self.t_end - e.t), e.v)
    }

    /// Piecewise-linear interpolation of the state at time s, using the
    /// velocity of the active segment.
    pub fn trajectory_at(&self, s: f64) -> Result<(Vec2, Vec2)> {
        if s < self.start_time() || !self.alive_at(s) {
            return Err(Error::OutOfLife { s, t_end: self.t_end });
        }
        Ok(self.state_unchecked(s))
    }

    /// Interpolation without the lifetime check; s must lie in
    /// [start_time, t_end].
    pub(crate) fn state_unchecked(&self, s: f64) -> (Vec2, Vec2) {
        debug_assert!(s >= self.start_time() && s <= self.t_end);
        let k = self.events.partition_point(|e| e.t <= s);
        let e = &self.events[k.max(1) - 1];
        (e.r.advance(e.v, s - e.t), e.v)
    }

    /// Visit the path as (t0, t1, r(t0), v, region) pieces of constant
    /// material, in time order, up to `upto` (clamped to t_end).
    pub fn for_each_piece(
        &self,
        domain: &Domain,
        upto: f64,
        mut visit: impl FnMut(f64, f64, Vec2, Vec2, RegionId),
    ) {
        let upto = upto.min(self.t_end);
        for k in 0..self.events.len() {
            let e = &self.events[k];
            let seg_end = if k + 1 < self.events.len() { self.events[k + 1].t } else { self.t_end };
            let seg_end = seg_end.min(upto);
            if seg_end <= e.t {
                break;
            }
            domain.for_each_region_piece(e.r, e.v, seg_end - e.t, |a, b, reg| {
                visit(e.t + a, e.t + b, e.r.advance(e.v, a), e.v, reg);
                std::ops::ControlFlow::Continue(())
            });
            if seg_end >= upto {
                break;
            }
        }
    }

    /// Exact time integral of beta along the path up to time t.
    pub fn beta_integral(&self, field: &CrossSectionField, t: f64) -> Result<f64> {
        if t > self.t_end {
            return Err(Error::OutOfLife { s: t, t_end: self.t_end });
        }
        let mut total = 0.0;
        self.for_each_piece(&field.domain, t, |t0, t1, _r, _v, reg| {
            total += field.material(reg).beta() * (t1 - t0);
        });
        Ok(total)
    }
}

/// Which rate/kernel pair drives the walk.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RateKind {
    /// alpha = sigma_s + sigma_f m_f with the combined kernel (the
    /// many-to-one walk).
    Combined,
    /// sigma_s with the scatter kernel alone (branching process motion).
    ScatterOnly,
}

impl RateKind {
    fn rate(self, field: &CrossSectionField, region: RegionId) -> f64 {
        let m = field.material(region);
        match self {
            RateKind::Combined => m.alpha(),
            RateKind::ScatterOnly => m.sigma_s,
        }
    }
}

/// Outcome of one flight from a scatter point.
pub(crate) enum FlightOutcome {
    Scatter(f64),
    Exit(f64),
    Horizon,
}

/// A walk law: samples the next flight and the post-scatter velocity.
pub(crate) trait WalkLaw {
    fn flight(&self, r: Vec2, v: Vec2, s_max: f64, rng: &mut SimRng) -> Result<FlightOutcome>;
    fn scatter_velocity(&self, r: Vec2, v: Vec2, rng: &mut SimRng) -> Result<Vec2>;
}

pub(crate) struct PlainLaw<'a> {
    pub field: &'a CrossSectionField,
    pub kind: RateKind,
}

impl WalkLaw for PlainLaw<'_> {
    fn flight(&self, r: Vec2, v: Vec2, s_max: f64, rng: &mut SimRng) -> Result<FlightOutcome> {
        let kappa = self.field.domain.exit_time(r, v)?;
        let cap = kappa.min(s_max);
        // piecewise-constant hazard: invert one unit exponential exactly
        let mut budget: f64 = Exp1.sample(rng);
        let mut scatter_at: Option<f64> = None;
        self.field.domain.for_each_region_piece(r, v, cap, |a, b, reg| {
            let rate = self.kind.rate(self.field, reg);
            if rate > 0.0 {
                let hazard = rate * (b - a);
                if budget < hazard {
                    scatter_at = Some(a + budget / rate);
                    return std::ops::ControlFlow::Break(());
                }
                budget -= hazard;
            }
            std::ops::ControlFlow::Continue(())
        });
        match scatter_at {
            Some(s) if s >= s_max => Ok(FlightOutcome::Horizon),
            Some(s) => Ok(FlightOutcome::Scatter(s)),
            None if kappa <= s_max => Ok(FlightOutcome::Exit(kappa)),
            None => Ok(FlightOutcome::Horizon),
        }
    }

    fn scatter_velocity(&self, r: Vec2, v: Vec2, rng: &mut SimRng) -> Result<Vec2> {
        match self.kind {
            RateKind::Combined => self.field.sample_combined(r, v, rng),
            RateKind::ScatterOnly => Ok(self.field.sample_scatter(v, rng)),
        }
    }
}

/// Shared walk loop: flights, scatters, kill at the boundary, truncate at
/// the horizon. A scatter landing exactly on the horizon is truncated, so
/// the horizon state keeps the pre-scatter velocity. Writes into `path`,
/// reusing its event buffer.
pub(crate) fn simulate_walk_into(
    law: &impl WalkLaw,
    domain: &Domain,
    r0: Vec2,
    v0: Vec2,
    t_start: f64,
    horizon: f64,
    rng: &mut SimRng,
    path: &mut NrwPath,
) -> Result<()> {
    if !domain.contains(r0) {
        return Err(Error::OutsideDomain { x: r0.x, y: r0.y });
    }
    if !(t_start < horizon) {
        return Err(Error::config("t_start must precede the horizon"));
    }
    path.events.clear();
    path.events.push(PathEvent { t: t_start, r: r0, v: v0 });
    let (mut t, mut r, mut v) = (t_start, r0, v0);
    loop {
        match law.flight(r, v, horizon - t, rng)? {
            FlightOutcome::Scatter(s) => {
                t += s;
                r = r.advance(v, s);
                if !domain.contains(r) {
                    // scatter sampled within rounding of the boundary
                    path.t_end = t;
                    path.end = EndCause::Exit;
                    return Ok(());
                }
                v = law.scatter_velocity(r, v, rng)?;
                path.events.push(PathEvent { t, r, v });
            }
            FlightOutcome::Exit(kappa) => {
                path.t_end = t + kappa;
                path.end = EndCause::Exit;
                return Ok(());
            }
            FlightOutcome::Horizon => {
                path.t_end = horizon;
                path.end = EndCause::Horizon;
                return Ok(());
            }
        }
    }
}

pub(crate) fn simulate_walk(
    law: &impl WalkLaw,
    domain: &Domain,
    r0: Vec2,
    v0: Vec2,
    t_start: f64,
    horizon: f64,
    rng: &mut SimRng,
) -> Result<NrwPath> {
    let mut path = NrwPath { events: Vec::new(), t_end: horizon, end: EndCause::Horizon };
    simulate_walk_into(law, domain, r0, v0, t_start, horizon, rng, &mut path)?;
    Ok(path)
}

/// Simulate one alpha-pi neutron random walk (the many-to-one walk of the
/// transport semigroup) from (r0, v0) over [t_start, horizon].
pub fn simulate_nrw(
    field: &CrossSectionField,
    r0: Vec2,
    v0: Vec2,
    t_start: f64,
    horizon: f64,
    rng: &mut SimRng,
) -> Result<NrwPath> {
    let law = PlainLaw { field, kind: RateKind::Combined };
    simulate_walk(&law, &field.domain, r0, v0, t_start, horizon, rng)
}

/// Simulate a sigma_s / pi_s walk (the motion of one branching-process
/// particle between fission events).
pub fn simulate_scatter_walk(
    field: &CrossSectionField,
    r0: Vec2,
    v0: Vec2,
    t_start: f64,
    horizon: f64,
    rng: &mut SimRng,
) -> Result<NrwPath> {
    let law = PlainLaw { field, kind: RateKind::ScatterOnly };
    simulate_walk(&law, &field.domain, r0, v0, t_start, horizon, rng)
}

/// Sample the first scatter time along the ray r + v s under the chosen
/// rate, exactly (piecewise-exponential inversion). Returns None when the
/// ray exits the domain first.
pub fn sample_scatter_time(
    field: &CrossSectionField,
    kind: RateKind,
    r: Vec2,
    v: Vec2,
    rng: &mut SimRng,
) -> Result<Option<f64>> {
    let law = PlainLaw { field, kind };
    match law.flight(r, v, f64::INFINITY, rng)? {
        FlightOutcome::Scatter(s) => Ok(Some(s)),
        FlightOutcome::Exit(_) => Ok(None),
        FlightOutcome::Horizon => Ok(None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::VelocitySpace;
    use crate::rng::cycle_rng;
    use crate::xsection::{FissionKernel, Material, ScatterKernel};

    fn slab(sigma_s: f64, sigma_f: f64, m: f64) -> CrossSectionField {
        CrossSectionField::slab(1.0, 1.0, sigma_s, sigma_f, m).unwrap()
    }

    fn wide_slab(l: f64, sigma_s: f64) -> CrossSectionField {
        CrossSectionField::slab(l, 1.0, sigma_s, 0.0, 2.0).unwrap()
    }

    #[test]
    fn no_rates_means_ballistic_flight() {
        // alpha = 0 forces zero scatters: t_end = min(t0 + kappa, horizon)
        let field = CrossSectionField::new(
            Domain::interval(1.0).unwrap(),
            VelocitySpace::TwoPoint1D { v0: 1.0 },
            ScatterKernel::FlipSign1D,
            FissionKernel::SameDirection1D,
            vec![Material::new(0.0, 0.0, 0.0)],
        )
        .unwrap();
        let mut rng = cycle_rng(1, 0);
        let p = simulate_nrw(&field, Vec2::x1(0.0), Vec2::x1(1.0), 0.0, 10.0, &mut rng).unwrap();
        assert_eq!(p.scatter_count(), 0);
        assert!((p.t_end - 1.0).abs() < 1e-12);
        assert!(p.exited());

        let p = simulate_nrw(&field, Vec2::x1(0.0), Vec2::x1(1.0), 0.0, 0.5, &mut rng).unwrap();
        assert_eq!(p.t_end, 0.5);
        assert_eq!(p.end, EndCause::Horizon);
    }

    #[test]
    fn identical_seed_identical_path() {
        let field = slab(0.5, 0.4, 2.0);
        let a = simulate_nrw(&field, Vec2::x1(0.1), Vec2::x1(1.0), 0.0, 25.0, &mut cycle_rng(9, 4)).unwrap();
        let b = simulate_nrw(&field, Vec2::x1(0.1), Vec2::x1(1.0), 0.0, 25.0, &mut cycle_rng(9, 4)).unwrap();
        assert_eq!(a.events.len(), b.events.len());
        for (x, y) in a.events.iter().zip(&b.events) {
            assert_eq!(x.t.to_bits(), y.t.to_bits());
            assert_eq!(x.r.x.to_bits(), y.r.x.to_bits());
            assert_eq!(x.v.x.to_bits(), y.v.x.to_bits());
        }
        assert_eq!(a.t_end.to_bits(), b.t_end.to_bits());
    }

    #[test]
    fn homogeneous_scatter_count_is_poisson_mean() {
        // effectively unbounded slab: mean scatter count over paths ~ sigma_s * t
        let field = wide_slab(1e6, 0.5);
        let t = 100.0;
        let n = 10_000;
        let mut mean = 0.0;
        for c in 0..n {
            let mut rng = cycle_rng(42, c);
            let p = simulate_nrw(&field, Vec2::x1(0.0), Vec2::x1(1.0), 0.0, t, &mut rng).unwrap();
            mean += p.scatter_count() as f64;
        }
        mean /= n as f64;
        // Poisson(50): SE of the mean ~ sqrt(50 / n)
        let se = (0.5 * t / n as f64).sqrt();
        assert!((mean - 50.0).abs() < 3.0 * se, "mean = {mean}");
    }

    #[test]
    fn exit_time_consistency_on_exit() {
        let field = slab(0.5, 0.0, 2.0);
        for c in 0..200 {
            let mut rng = cycle_rng(3, c);
            let p = simulate_nrw(&field, Vec2::x1(0.0), Vec2::x1(1.0), 0.0, 50.0, &mut rng).unwrap();
            if p.exited() {
                let last = p.events.last().unwrap();
                let kappa = field.domain.exit_time(last.r, last.v).unwrap();
                assert!((p.t_end - last.t - kappa).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn scatter_time_exponential_ks() {
        // constant alpha: the sampled law is Exp(alpha)
        let field = wide_slab(1e9, 0.7);
        let n = 100_000;
        let mut xs: Vec<f64> = Vec::with_capacity(n);
        let mut rng = cycle_rng(11, 0);
        for _ in 0..n {
            let s = sample_scatter_time(&field, RateKind::Combined, Vec2::x1(0.0), Vec2::x1(1.0), &mut rng)
                .unwrap()
                .expect("cannot exit a near-infinite slab");
            xs.push(s);
        }
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut ks: f64 = 0.0;
        for (i, x) in xs.iter().enumerate() {
            let cdf = 1.0 - (-0.7 * x).exp();
            let emp_hi = (i + 1) as f64 / n as f64;
            let emp_lo = i as f64 / n as f64;
            ks = ks.max((cdf - emp_lo).abs()).max((emp_hi - cdf).abs());
        }
        // 1% critical value of the KS statistic: 1.628 / sqrt(n)
        assert!(ks < 1.628 / (n as f64).sqrt(), "ks = {ks}");
    }

    #[test]
    fn two_region_survival_matches_closed_form() {
        // alpha = 1 for x < 0, alpha = 2 for x > 0; start at x = -u moving
        // right: survival to the region boundary is e^{-u}
        let domain = Domain::interval_with_splits(1e6, vec![0.0]).unwrap();
        let field = CrossSectionField::new(
            domain,
            VelocitySpace::TwoPoint1D { v0: 1.0 },
            ScatterKernel::FlipSign1D,
            FissionKernel::SameDirection1D,
            vec![Material::new(1.0, 0.0, 0.0), Material::new(2.0, 0.0, 0.0)],
        )
        .unwrap();
        let u = 0.8;
        let n = 100_000;
        let mut survived = 0u64;
        let mut rng = cycle_rng(5, 0);
        for _ in 0..n {
            let s = sample_scatter_time(&field, RateKind::Combined, Vec2::x1(-u), Vec2::x1(1.0), &mut rng)
                .unwrap()
                .unwrap();
            if s > u {
                survived += 1;
            }
        }
        let p_hat = survived as f64 / n as f64;
        let p = (-u as f64).exp();
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((p_hat - p).abs() < 3.0 * se, "p_hat = {p_hat}, p = {p}");
    }

    #[test]
    fn trajectory_at_events_and_midpoints() {
        let field = slab(0.9, 0.4, 2.0);
        let mut rng = cycle_rng(2, 7);
        let p = simulate_nrw(&field, Vec2::x1(0.2), Vec2::x1(-1.0), 0.0, 30.0, &mut rng).unwrap();
        for e in &p.events {
            let (r, v) = p.trajectory_at(e.t).unwrap();
            assert_eq!(r.x, e.r.x);
            assert_eq!(v.x, e.v.x);
        }
        // midpoints are interior
        for w in p.events.windows(2) {
            let mid = 0.5 * (w[0].t + w[1].t);
            let (r, _) = p.trajectory_at(mid).unwrap();
            assert!(field.domain.contains(r));
        }
        assert!(matches!(
            p.trajectory_at(p.t_end + 1.0),
            Err(Error::OutOfLife { .. })
        ));
    }

    #[test]
    fn single_segment_interpolation() {
        let path = NrwPath {
            events: vec![PathEvent { t: 0.0, r: Vec2::x1(0.0), v: Vec2::x1(1.0) }],
            t_end: 2.0,
            end: EndCause::Horizon,
        };
        let (r, v) = path.trajectory_at(1.0).unwrap();
        assert_eq!(r.x, 1.0);
        assert_eq!(v.x, 1.0);
    }

    #[test]
    fn beta_integral_constant_field() {
        let field = slab(0.5, 0.4, 2.0); // beta = 0.4 everywhere
        let mut rng = cycle_rng(8, 1);
        let p = simulate_nrw(&field, Vec2::x1(0.0), Vec2::x1(1.0), 0.0, 5.0, &mut rng).unwrap();
        let t = p.t_end.min(5.0);
        let integral = p.beta_integral(&field, t).unwrap();
        assert!((integral - 0.4 * (t - p.start_time())).abs() < 1e-12);

        let zero = CrossSectionField::slab(1.0, 1.0, 0.5, 0.4, 1.0).unwrap(); // beta = 0
        let q = simulate_nrw(&zero, Vec2::x1(0.0), Vec2::x1(1.0), 0.0, 5.0, &mut rng).unwrap();
        assert_eq!(q.beta_integral(&zero, q.t_end.min(5.0)).unwrap(), 0.0);
    }

    #[test]
    fn beta_integral_two_regions_matches_quadrature() {
        let domain = Domain::interval_with_splits(1.0, vec![0.0]).unwrap();
        let field = CrossSectionField::new(
            domain,
            VelocitySpace::TwoPoint1D { v0: 1.0 },
            ScatterKernel::FlipSign1D,
            FissionKernel::SameDirection1D,
            vec![Material::new(0.5, 0.4, 2.0), Material::new(0.5, 0.9, 3.0)],
        )
        .unwrap();
        // deterministic two-segment path crossing the split once
        let path = NrwPath {
            events: vec![PathEvent { t: 0.0, r: Vec2::x1(-0.5), v: Vec2::x1(1.0) }],
            t_end: 1.2,
            end: EndCause::Horizon,
        };
        let exact = path.beta_integral(&field, 1.2).unwrap();
        // occupation: 0.5 time units in region 0 (beta 0.4), 0.7 in region 1 (beta 1.8)
        assert!((exact - (0.5 * 0.4 + 0.7 * 1.8)).abs() < 1e-12);
        // high-order quadrature oracle on the same path
        let f = |t: f64| {
            let (r, v) = path.trajectory_at(t).unwrap();
            field.beta(r, v).unwrap()
        };
        let quad = crate::numeric::adaptive_simpson(&f, 0.0, 0.5, 1e-11)
            + crate::numeric::adaptive_simpson(&f, 0.5, 1.2, 1e-11);
        assert!((exact - quad).abs() < 1e-9);
    }

    #[test]
    fn path_invariants_hold_along_simulated_paths() {
        let field = slab(0.8, 0.3, 2.0);
        for c in 0..100 {
            let mut rng = cycle_rng(13, c);
            let p = simulate_nrw(&field, Vec2::x1(-0.3), Vec2::x1(1.0), 0.0, 20.0, &mut rng).unwrap();
            // r_{k+1} = r_k + v_k (t_{k+1} - t_k)
            for w in p.events.windows(2) {
                let hop = w[0].r.advance(w[0].v, w[1].t - w[0].t);
                assert!((hop.x - w[1].r.x).abs() <= 1e-10 * hop.x.abs().max(1.0));
                assert!(field.domain.contains(w[1].r));
            }
            if p.exited() {
                let last = p.events.last().unwrap();
                let boundary = last.r.advance(last.v, p.t_end - last.t);
                assert!((boundary.x.abs() - 1.0).abs() < 1e-9);
            }
        }
    }
}
